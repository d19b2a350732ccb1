//! Hierarchical (ultrametric) random matrix ensembles.
//!
//! The crate samples symmetric random matrices whose entry variances decay in
//! a dyadic hierarchical metric, computes spectral observables (Stieltjes
//! transforms, local Green functions, density-of-states estimates,
//! eigenvector localization measures), integrates characteristic curves along
//! matrix Brownian motion, solves the self-consistent free-convolution
//! equation, and aggregates local eigenvalue statistics across Monte Carlo
//! sweeps.

pub mod ensemble;
pub mod flow;
pub mod harness;
pub mod hierarchy;
pub mod meanfield;
pub mod rng;
pub mod spectral;
pub mod statistics;

pub use ensemble::{EnsembleParams, Normalization, SymmetricMatrix};
pub use spectral::{ComplexEnergy, SpectralDecomposition, SpectralWindow};
