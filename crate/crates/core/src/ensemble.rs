//! Sampling the hierarchical ensemble and matrix Brownian motion.
//!
//! The level-`n` ensemble is the weighted sum `H_n = Σ_{r=0}^n √t_r Φ_{n,r}`
//! of independent block-diagonal GOE layers with coupling weights
//! `t_r = 2^{-(1+ε)r}`. The same distribution arises recursively: start from
//! a 1×1 `N(0,2)` entry and repeatedly take two independent copies in direct
//! sum plus a full GOE increment `Φ_{N}(t)` with entry variance
//! `(1+δ_xy)·t/N`. Both constructions are provided, along with sampled
//! Brownian increments for the flow module.

use std::io::{self, Read, Write};

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hierarchy::{layer_variance, ultrametric_distance, Site};
use crate::rng::substream;

/// Largest level accepted by default (`N = 2^14 = 16384` dense is the
/// practical eigensolver ceiling here).
pub const DEFAULT_MAX_LEVEL: u32 = 14;

/// Stream-path tags keeping the direct, recursive, and Brownian draws on
/// disjoint substreams of the same master seed.
const STREAM_DIRECT: u64 = 0x01;
const STREAM_RECURSIVE: u64 = 0x02;

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("level n = {n} exceeds the configured maximum {max}")]
    LevelTooLarge { n: u32, max: u32 },
    #[error("epsilon = {0} must be > -1 for the raw ensemble")]
    EpsilonOutOfRange(f64),
    #[error("the recursive construction is defined for the raw ensemble only")]
    RecursiveMeanField,
    #[error("time grid must be ascending and start at 0")]
    BadTimeGrid,
    #[error("matrix i/o: {0}")]
    Io(#[from] io::Error),
    #[error("matrix file has bad magic or truncated payload")]
    BadFormat,
}

/// Whether sampled matrices are rescaled by the row-variance normalizer `Z_n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// The bare sum `Σ √t_r Φ_{n,r}`.
    Raw,
    /// Divide by `Z_n` with `Z_n² = Σ_y Var⟨δ_y, H δ_x⟩`, keeping the
    /// spectrum order one even when the raw sums diverge (ε ≤ -1).
    MeanField,
}

/// Model knobs for one ensemble cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleParams {
    /// Decay exponent of the coupling weights.
    pub epsilon: f64,
    /// Hierarchy level; the matrix dimension is `2^n`.
    pub n: u32,
    pub normalization: Normalization,
    /// Master seed; all randomness is derived from it.
    pub seed: u64,
}

impl EnsembleParams {
    pub fn new(epsilon: f64, n: u32, normalization: Normalization, seed: u64) -> Self {
        Self { epsilon, n, normalization, seed }
    }

    pub fn dim(&self) -> usize {
        1usize << self.n
    }

    pub fn validate(&self) -> Result<(), EnsembleError> {
        self.validate_with_max(DEFAULT_MAX_LEVEL)
    }

    pub fn validate_with_max(&self, max: u32) -> Result<(), EnsembleError> {
        if self.n > max {
            return Err(EnsembleError::LevelTooLarge { n: self.n, max });
        }
        if self.normalization == Normalization::Raw && self.epsilon <= -1.0 {
            return Err(EnsembleError::EpsilonOutOfRange(self.epsilon));
        }
        Ok(())
    }
}

/// Dense real symmetric matrix; entries are mirrored on construction so
/// `m[(i,j)]` and `m[(j,i)]` are bit-identical.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricMatrix {
    data: Array2<f64>,
}

impl SymmetricMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { data: Array2::zeros((dim, dim)) }
    }

    /// Wrap an existing array, mirroring the upper triangle into the lower.
    pub fn from_upper(mut data: Array2<f64>) -> Self {
        let dim = data.nrows();
        assert_eq!(dim, data.ncols(), "matrix must be square");
        for i in 0..dim {
            for j in (i + 1)..dim {
                data[(j, i)] = data[(i, j)];
            }
        }
        Self { data }
    }

    /// Wrap an array that is already exactly symmetric (checked).
    pub fn from_symmetric(data: Array2<f64>) -> Self {
        let dim = data.nrows();
        assert_eq!(dim, data.ncols(), "matrix must be square");
        for i in 0..dim {
            for j in (i + 1)..dim {
                assert!(
                    data[(i, j)].to_bits() == data[(j, i)].to_bits(),
                    "matrix not bit-exactly symmetric at ({i},{j})"
                );
            }
        }
        Self { data }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn array(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_array(self) -> Array2<f64> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[(i, j)]
    }

    /// Set the `(i,j)` and `(j,i)` entries together.
    pub fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.data[(i, j)] = v;
        self.data[(j, i)] = v;
    }

    /// `self += c · other`, entrywise.
    pub fn add_scaled(&mut self, c: f64, other: &SymmetricMatrix) {
        assert_eq!(self.dim(), other.dim());
        self.data.zip_mut_with(&other.data, |a, &b| *a += c * b);
    }

    pub fn scale(&mut self, c: f64) {
        self.data.mapv_inplace(|v| v * c);
    }

    /// Write as little-endian binary: 8-byte magic `UMHMAT01`, 8-byte
    /// dimension, then row-major f64 entries.
    pub fn write_binary<W: Write>(&self, w: &mut W) -> Result<(), EnsembleError> {
        w.write_all(MATRIX_MAGIC)?;
        w.write_all(&(self.dim() as u64).to_le_bytes())?;
        for row in self.data.rows() {
            for &v in row {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(r: &mut R) -> Result<Self, EnsembleError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MATRIX_MAGIC {
            return Err(EnsembleError::BadFormat);
        }
        let mut dim_bytes = [0u8; 8];
        r.read_exact(&mut dim_bytes)?;
        let dim = u64::from_le_bytes(dim_bytes) as usize;
        let mut buf = vec![0u8; dim * dim * 8];
        r.read_exact(&mut buf)?;
        let data = Array2::from_shape_vec(
            (dim, dim),
            buf.chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        )
        .expect("shape matches by construction");
        Ok(Self::from_symmetric(data))
    }
}

const MATRIX_MAGIC: &[u8; 8] = b"UMHMAT01";

/// Coupling weight `t_r = 2^{-(1+ε)r}`.
pub fn coupling_weight(r: u32, epsilon: f64) -> f64 {
    (-(1.0 + epsilon) * r as f64).exp2()
}

/// Row sum of entry variances of `Σ √t_r Φ_{n,r}` at any fixed site:
/// each layer contributes `t_r·(2·2^{-r} + (2^r - 1)·2^{-r}) = t_r·(1 + 2^{-r})`.
pub fn z_n_squared(epsilon: f64, n: u32) -> f64 {
    (0..=n)
        .map(|r| coupling_weight(r, epsilon) * (1.0 + (-(r as f64)).exp2()))
        .sum()
}

/// Draw a GOE block of size `dim` with entry variance `(1+δ_xy)/dim`,
/// filling the upper triangle in row-major order.
pub fn sample_goe<R: Rng>(dim: usize, rng: &mut R) -> SymmetricMatrix {
    let mut m = SymmetricMatrix::zeros(dim);
    let off = (1.0 / dim as f64).sqrt();
    let diag = (2.0 / dim as f64).sqrt();
    for i in 0..dim {
        for j in i..dim {
            let g: f64 = rng.sample(StandardNormal);
            let sd = if i == j { diag } else { off };
            m.set_sym(i, j, sd * g);
        }
    }
    m
}

/// Draw the level-`r` hierarchical layer `Φ_{n,r}`: block diagonal with
/// `2^{n-r}` independent GOE blocks of size `2^r` and entry variance
/// `(1+δ_xy)·2^{-r}` inside each block.
pub fn sample_layer<R: Rng>(n: u32, r: u32, rng: &mut R) -> SymmetricMatrix {
    assert!(r <= n, "layer index r = {r} exceeds level n = {n}");
    let dim = 1usize << n;
    let block = 1usize << r;
    let mut m = SymmetricMatrix::zeros(dim);
    add_layer_scaled(&mut m, dim, block, 1.0, rng);
    m
}

/// Accumulate `c · Φ_{n,r}` into `m`, drawing blocks left to right and each
/// block's upper triangle row-major.
fn add_layer_scaled<R: Rng>(
    m: &mut SymmetricMatrix,
    dim: usize,
    block: usize,
    c: f64,
    rng: &mut R,
) {
    let off = c * (1.0 / block as f64).sqrt();
    let diag = c * (2.0 / block as f64).sqrt();
    for b in (0..dim).step_by(block) {
        for i in b..b + block {
            for j in i..b + block {
                let g: f64 = rng.sample(StandardNormal);
                let sd = if i == j { diag } else { off };
                let v = m.get(i, j) + sd * g;
                m.set_sym(i, j, v);
            }
        }
    }
}

/// Sample one realization by direct layer summation,
/// `H_n = Σ_{r=0}^n √t_r Φ_{n,r}`, optionally divided by `Z_n`.
///
/// Layer `r` of realization `k` draws from the substream
/// `(seed, [DIRECT, k, r])`, so realizations can be generated in parallel and
/// in any order with bit-identical results.
pub fn sample_direct(params: &EnsembleParams, realization: u64) -> Result<SymmetricMatrix, EnsembleError> {
    params.validate()?;
    let dim = params.dim();
    let mut m = SymmetricMatrix::zeros(dim);
    for r in 0..=params.n {
        let mut rng = substream(params.seed, &[STREAM_DIRECT, realization, r as u64]);
        let weight = coupling_weight(r, params.epsilon).sqrt();
        add_layer_scaled(&mut m, dim, 1usize << r, weight, &mut rng);
    }
    if params.normalization == Normalization::MeanField {
        m.scale(1.0 / z_n_squared(params.epsilon, params.n).sqrt());
    }
    Ok(m)
}

/// Sample one realization by the recursive construction
/// `H_0 ~ N(0,2)`, `H_k = H_{k-1} ⊕ H'_{k-1} + Φ_{N_k}(t_k)`,
/// distributionally equal to [`sample_direct`] in raw normalization.
///
/// The node at depth `k`, position `p` draws from the substream
/// `(seed, [RECURSIVE, k_realization, k, p])`.
pub fn sample_recursive(params: &EnsembleParams, realization: u64) -> Result<SymmetricMatrix, EnsembleError> {
    params.validate()?;
    if params.normalization == Normalization::MeanField {
        return Err(EnsembleError::RecursiveMeanField);
    }
    Ok(recursive_node(params, realization, params.n, 0))
}

fn recursive_node(params: &EnsembleParams, realization: u64, k: u32, pos: u64) -> SymmetricMatrix {
    let mut rng = substream(params.seed, &[STREAM_RECURSIVE, realization, k as u64, pos]);
    if k == 0 {
        let mut m = SymmetricMatrix::zeros(1);
        let g: f64 = rng.sample(StandardNormal);
        m.set_sym(0, 0, 2f64.sqrt() * g);
        return m;
    }
    let dim = 1usize << k;
    let half = dim / 2;
    let left = recursive_node(params, realization, k - 1, 2 * pos);
    let right = recursive_node(params, realization, k - 1, 2 * pos + 1);

    // Direct sum, then the full-size Gaussian increment at time t_k.
    let mut m = SymmetricMatrix::zeros(dim);
    for i in 0..half {
        for j in i..half {
            m.set_sym(i, j, left.get(i, j));
            m.set_sym(i + half, j + half, right.get(i, j));
        }
    }
    let t_k = coupling_weight(k, params.epsilon);
    let off = (t_k / dim as f64).sqrt();
    let diag = (2.0 * t_k / dim as f64).sqrt();
    for i in 0..dim {
        for j in i..dim {
            let g: f64 = rng.sample(StandardNormal);
            let sd = if i == j { diag } else { off };
            let v = m.get(i, j) + sd * g;
            m.set_sym(i, j, v);
        }
    }
    m
}

/// Independent symmetric Gaussian increments of a matrix Brownian motion.
/// The increment over `[t_k, t_{k+1}]` has entry variance
/// `(1+δ_xy)·(t_{k+1}-t_k)/dim`.
#[derive(Clone, Debug)]
pub struct DbmPath {
    pub dim: usize,
    pub times: Vec<f64>,
    pub increments: Vec<SymmetricMatrix>,
}

impl DbmPath {
    /// Cumulative sum of increments up to grid index `k` (inclusive of the
    /// first `k` increments), i.e. `Φ(times[k])`.
    pub fn cumulative(&self, k: usize) -> SymmetricMatrix {
        let mut m = SymmetricMatrix::zeros(self.dim);
        for inc in &self.increments[..k] {
            m.add_scaled(1.0, inc);
        }
        m
    }
}

/// Draw one Brownian increment over a window of length `dt`.
pub fn sample_dbm_increment<R: Rng>(dim: usize, dt: f64, rng: &mut R) -> SymmetricMatrix {
    let mut m = SymmetricMatrix::zeros(dim);
    let off = (dt / dim as f64).sqrt();
    let diag = (2.0 * dt / dim as f64).sqrt();
    for i in 0..dim {
        for j in i..dim {
            let g: f64 = rng.sample(StandardNormal);
            let sd = if i == j { diag } else { off };
            m.set_sym(i, j, sd * g);
        }
    }
    m
}

/// Sample a matrix Brownian path on an ascending grid starting at 0.
pub fn sample_dbm_path<R: Rng>(
    dim: usize,
    times: &[f64],
    rng: &mut R,
) -> Result<DbmPath, EnsembleError> {
    validate_time_grid(times)?;
    let increments = times
        .windows(2)
        .map(|w| sample_dbm_increment(dim, w[1] - w[0], rng))
        .collect();
    Ok(DbmPath { dim, times: times.to_vec(), increments })
}

pub(crate) fn validate_time_grid(times: &[f64]) -> Result<(), EnsembleError> {
    if times.is_empty() || times[0] != 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(EnsembleError::BadTimeGrid);
    }
    Ok(())
}

/// Entry variance of the raw direct construction at a site pair with
/// hierarchical distance `d`: `Σ_{r ≥ max(d,0)} t_r · layer_variance`.
pub fn entry_variance(params: &EnsembleParams, x: Site, y: Site) -> f64 {
    let d = ultrametric_distance(x, y);
    let raw: f64 = (0..=params.n)
        .map(|r| coupling_weight(r, params.epsilon) * layer_variance(x, y, r))
        .sum();
    let _ = d;
    match params.normalization {
        Normalization::Raw => raw,
        Normalization::MeanField => raw / z_n_squared(params.epsilon, params.n),
    }
}
