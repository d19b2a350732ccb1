//! Eigendecomposition and resolvent observables.
//!
//! Everything downstream works from one full symmetric eigendecomposition per
//! realization: Stieltjes transforms and local Green functions are O(N) sums
//! over eigenvalues, so many spectral parameters amortize a single O(N³)
//! solve.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, EigValsh, UPLO};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensemble::SymmetricMatrix;
use crate::hierarchy::Site;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("eigensolver failed: {0}")]
    Solver(String),
    #[error("decomposition residual {residual:.3e} exceeds tolerance {tol:.3e} (dim {dim})")]
    ResidualTooLarge { residual: f64, tol: f64, dim: usize },
    #[error("eigenvectors were not requested but are required here")]
    MissingEigenvectors,
    #[error("need at least {need} eigenvalues, have {have}")]
    TooFewEigenvalues { need: usize, have: usize },
    #[error("window quantile must lie in (0, 0.5), got {0}")]
    BadQuantile(f64),
}

/// Spectral parameter `z = E + iη` with `η > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexEnergy {
    pub e: f64,
    pub eta: f64,
}

impl ComplexEnergy {
    pub fn new(e: f64, eta: f64) -> Self {
        assert!(eta > 0.0, "spectral parameter needs Im z > 0, got {eta}");
        Self { e, eta }
    }

    pub fn as_complex(self) -> Complex64 {
        Complex64::new(self.e, self.eta)
    }

    pub fn from_complex(z: Complex64) -> Self {
        Self::new(z.re, z.im)
    }
}

/// Eigenvalues (ascending) and, optionally, orthonormal eigenvectors of one
/// realization. Eigenvector `k` is column `k`.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub dim: usize,
    pub eigenvalues: Array1<f64>,
    pub eigenvectors: Option<Array2<f64>>,
}

/// Energy window `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralWindow {
    pub lo: f64,
    pub hi: f64,
}

impl SpectralWindow {
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo < hi, "window must satisfy lo < hi");
        Self { lo, hi }
    }

    pub fn contains(&self, e: f64) -> bool {
        e >= self.lo && e <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Full symmetric eigendecomposition. Eigenvalues come back ascending; the
/// residual/orthonormality contract (tolerance `1e-10·dim`) is enforced by
/// [`SpectralDecomposition::verify`], which tests call on every code path and
/// production paths apply via randomized probes.
pub fn eig_sym(h: &SymmetricMatrix, want_vectors: bool) -> Result<SpectralDecomposition, SpectralError> {
    let dim = h.dim();
    if want_vectors {
        let (vals, vecs) = h
            .array()
            .eigh(UPLO::Lower)
            .map_err(|e| SpectralError::Solver(format!("{e} (dim {dim})")))?;
        Ok(SpectralDecomposition { dim, eigenvalues: vals, eigenvectors: Some(vecs) })
    } else {
        let vals = h
            .array()
            .eigvalsh(UPLO::Lower)
            .map_err(|e| SpectralError::Solver(format!("{e} (dim {dim})")))?;
        Ok(SpectralDecomposition { dim, eigenvalues: vals, eigenvectors: None })
    }
}

impl SpectralDecomposition {
    pub fn tolerance(&self) -> f64 {
        1e-10 * self.dim as f64
    }

    /// Check the residual `‖Hv - λv‖ ≤ tol·(‖H‖+1)` column by column and the
    /// Gram matrix against the identity. O(N³); meant for tests and audits.
    pub fn verify(&self, h: &SymmetricMatrix) -> Result<(), SpectralError> {
        let tol = self.tolerance();
        let vecs = self.eigenvectors.as_ref().ok_or(SpectralError::MissingEigenvectors)?;
        let norm_bound = self
            .eigenvalues
            .iter()
            .fold(0.0f64, |a, &l| a.max(l.abs()));
        let hv = h.array().dot(vecs);
        let mut worst = 0.0f64;
        for (k, &lambda) in self.eigenvalues.iter().enumerate() {
            let mut res = 0.0;
            for i in 0..self.dim {
                let r = hv[(i, k)] - lambda * vecs[(i, k)];
                res += r * r;
            }
            worst = worst.max(res.sqrt());
        }
        let gram = vecs.t().dot(vecs);
        for i in 0..self.dim {
            for j in 0..self.dim {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - target).abs());
            }
        }
        if worst > tol * (norm_bound + 1.0) {
            return Err(SpectralError::ResidualTooLarge { residual: worst, tol, dim: self.dim });
        }
        // Ascending order is part of the contract.
        if self.eigenvalues.windows(2).into_iter().any(|w| w[1] < w[0]) {
            return Err(SpectralError::Solver("eigenvalues not ascending".into()));
        }
        Ok(())
    }

    /// Cheap audit used on production paths: residual `‖(H - VΛVᵀ)u‖` on a few
    /// fixed probe vectors, O(N²) per probe.
    pub fn spot_check(&self, h: &SymmetricMatrix, probes: usize) -> Result<(), SpectralError> {
        let vecs = self.eigenvectors.as_ref().ok_or(SpectralError::MissingEigenvectors)?;
        let tol = self.tolerance();
        let norm_bound = self.eigenvalues.iter().fold(0.0f64, |a, &l| a.max(l.abs()));
        for p in 0..probes {
            let u = Array1::from_shape_fn(self.dim, |i| {
                // Deterministic pseudo-random probe, unit-ish scale.
                let x = ((i as u64).wrapping_mul(0x9e3779b97f4a7c15) ^ (p as u64) << 32) as f64;
                (x / u64::MAX as f64 - 0.5) * 2.0
            });
            let hu = h.array().dot(&u);
            let vtu = vecs.t().dot(&u);
            let lam_vtu = &vtu * &self.eigenvalues;
            let recon = vecs.dot(&lam_vtu);
            let err = (&hu - &recon).iter().map(|v| v * v).sum::<f64>().sqrt();
            let scale = u.iter().map(|v| v * v).sum::<f64>().sqrt();
            if err > tol * (norm_bound + 1.0) * scale {
                return Err(SpectralError::ResidualTooLarge { residual: err, tol, dim: self.dim });
            }
        }
        Ok(())
    }
}

/// Stieltjes transform of the empirical eigenvalue measure,
/// `S(z) = (1/N) Σ_k 1/(λ_k - z)`. The imaginary part is strictly positive.
pub fn stieltjes(dec: &SpectralDecomposition, z: ComplexEnergy) -> Complex64 {
    stieltjes_of_eigenvalues(dec.eigenvalues.as_slice().unwrap(), z)
}

/// Same sum over a raw eigenvalue slice (used by the flow module, which keeps
/// only eigenvalues per path grid time).
pub fn stieltjes_of_eigenvalues(eigs: &[f64], z: ComplexEnergy) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for &l in eigs {
        let dr = l - z.e;
        let denom = dr * dr + z.eta * z.eta;
        // 1/(λ - z) = (λ - E + iη)/((λ-E)² + η²)
        acc += Complex64::new(dr / denom, z.eta / denom);
    }
    acc / eigs.len() as f64
}

/// Site-diagonal resolvent entry
/// `G(x; z) = Σ_k |ψ_k(x)|² / (λ_k - z)`, requiring eigenvectors.
pub fn local_green(
    dec: &SpectralDecomposition,
    x: Site,
    z: ComplexEnergy,
) -> Result<Complex64, SpectralError> {
    let vecs = dec.eigenvectors.as_ref().ok_or(SpectralError::MissingEigenvectors)?;
    let xi = x.index();
    let mut acc = Complex64::new(0.0, 0.0);
    for (k, &l) in dec.eigenvalues.iter().enumerate() {
        let w = vecs[(xi, k)] * vecs[(xi, k)];
        let dr = l - z.e;
        let denom = dr * dr + z.eta * z.eta;
        acc += Complex64::new(w * dr / denom, w * z.eta / denom);
    }
    Ok(acc)
}

/// Cauchy-smoothed spectral density `π^{-1} Im S(E + iη)`.
pub fn dos_estimate(dec: &SpectralDecomposition, e: f64, eta: f64) -> f64 {
    stieltjes(dec, ComplexEnergy::new(e, eta)).im / std::f64::consts::PI
}

/// Empirical bulk window: eigenvalue quantiles `[q, 1-q]` with the
/// nearest-rank convention `lo = λ_(⌊qm⌋)`, `hi = λ_(⌈(1-q)m⌉-1)` (0-based).
pub fn bulk_window(dec: &SpectralDecomposition, q: f64) -> Result<SpectralWindow, SpectralError> {
    if !(q > 0.0 && q < 0.5) {
        return Err(SpectralError::BadQuantile(q));
    }
    let m = dec.eigenvalues.len();
    if m < 4 {
        return Err(SpectralError::TooFewEigenvalues { need: 4, have: m });
    }
    let lo_idx = (q * m as f64).floor() as usize;
    let hi_idx = ((1.0 - q) * m as f64).ceil() as usize - 1;
    Ok(SpectralWindow::new(dec.eigenvalues[lo_idx], dec.eigenvalues[hi_idx]))
}

/// Localization measures of one eigenvector.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EigenvectorProfile {
    pub eigenvalue: f64,
    /// `max_x |ψ(x)|`
    pub sup_norm: f64,
    /// `Σ_x ψ(x)⁴`
    pub ipr: f64,
}

/// Per-eigenvector sup-norms and inverse participation ratios for eigenvalues
/// inside `window`. An empty result means no eigenvalue fell in the window.
pub fn eigenvector_profiles(
    dec: &SpectralDecomposition,
    window: &SpectralWindow,
) -> Result<Vec<EigenvectorProfile>, SpectralError> {
    let vecs = dec.eigenvectors.as_ref().ok_or(SpectralError::MissingEigenvectors)?;
    let mut out = Vec::new();
    for (k, &l) in dec.eigenvalues.iter().enumerate() {
        if !window.contains(l) {
            continue;
        }
        let col = vecs.column(k);
        let mut sup: f64 = 0.0;
        let mut ipr = 0.0;
        for &v in col {
            sup = sup.max(v.abs());
            ipr += v * v * v * v;
        }
        out.push(EigenvectorProfile { eigenvalue: l, sup_norm: sup, ipr });
    }
    Ok(out)
}

/// Measured extrema of `Im S` and `|S|` over the grid
/// `Ω = window + i(η_α, 10)`, `η_α = dim^{-1+α}`, with a geometric η ladder of
/// ratio 2^{1/4} and an E spacing of `η_α/4`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LocalLawReport {
    pub eta_low: f64,
    pub min_im_s: f64,
    pub max_im_s: f64,
    /// `max |S| / ln(dim)`
    pub max_abs_s_over_log: f64,
    pub pass: bool,
}

/// Evaluate the local-law extrema and compare against `[k_l, k_u]`:
/// pass iff `Im S ⊂ [k_l, k_u]` and `|S| ≤ k_u·ln N` over the whole grid.
pub fn local_law_check(
    dec: &SpectralDecomposition,
    window: &SpectralWindow,
    alpha: f64,
    k_l: f64,
    k_u: f64,
) -> LocalLawReport {
    assert!(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0,1)");
    let dim = dec.dim as f64;
    let eta_low = dim.powf(-1.0 + alpha);
    let mut min_im = f64::INFINITY;
    let mut max_im = 0.0f64;
    let mut max_abs = 0.0f64;
    for eta in geometric_eta_grid(eta_low, 10.0) {
        // |∂S/∂E| ≤ η^{-2}; spacing η/4 keeps grid-point extrema within a
        // fraction of the true ones.
        let steps = (window.width() / (eta / 4.0)).ceil() as usize;
        for k in 0..=steps {
            let e = window.lo + window.width() * k as f64 / steps as f64;
            let s = stieltjes(dec, ComplexEnergy::new(e, eta));
            min_im = min_im.min(s.im);
            max_im = max_im.max(s.im);
            max_abs = max_abs.max(s.norm());
        }
    }
    let log_n = dim.ln();
    let pass = min_im >= k_l && max_im <= k_u && max_abs <= k_u * log_n;
    LocalLawReport {
        eta_low,
        min_im_s: min_im,
        max_im_s: max_im,
        max_abs_s_over_log: max_abs / log_n,
        pass,
    }
}

/// Geometric ladder from `lo` to `hi` with ratio 2^{1/4}, endpoints included.
pub fn geometric_eta_grid(lo: f64, hi: f64) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo);
    let ratio = 2f64.powf(0.25);
    let mut etas = Vec::new();
    let mut eta = lo;
    while eta < hi {
        etas.push(eta);
        eta *= ratio;
    }
    etas.push(hi);
    etas
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn diag_matrix(values: &[f64]) -> SymmetricMatrix {
        let dim = values.len();
        let mut m = SymmetricMatrix::zeros(dim);
        for (i, &v) in values.iter().enumerate() {
            m.set_sym(i, i, v);
        }
        m
    }

    #[test]
    fn eig_diag_and_swap() {
        let dec = eig_sym(&diag_matrix(&[3.0, 1.0, 2.0]), true).unwrap();
        assert!((dec.eigenvalues[0] - 1.0).abs() < 1e-12);
        assert!((dec.eigenvalues[2] - 3.0).abs() < 1e-12);

        let swap = SymmetricMatrix::from_upper(array![[0.0, 1.0], [0.0, 0.0]]);
        let dec = eig_sym(&swap, true).unwrap();
        assert!((dec.eigenvalues[0] + 1.0).abs() < 1e-12);
        assert!((dec.eigenvalues[1] - 1.0).abs() < 1e-12);
        dec.verify(&swap).unwrap();
    }

    #[test]
    fn stieltjes_closed_forms() {
        let dec = eig_sym(&diag_matrix(&[0.0]), false).unwrap();
        let s = stieltjes(&dec, ComplexEnergy::new(0.0, 1.0));
        assert!((s - Complex64::new(0.0, 1.0)).norm() < 1e-15);

        let dec = eig_sym(&diag_matrix(&[-1.0, 1.0]), false).unwrap();
        let s = stieltjes(&dec, ComplexEnergy::new(0.0, 1.0));
        assert!((s - Complex64::new(0.0, 0.5)).norm() < 1e-15);
    }

    #[test]
    fn stieltjes_im_bounded_by_inv_eta() {
        let dec = eig_sym(&diag_matrix(&[0.3, -2.0, 5.0, 0.0]), false).unwrap();
        for &eta in &[1e-3, 0.1, 2.0] {
            for &e in &[-3.0, 0.0, 0.3, 10.0] {
                let s = stieltjes(&dec, ComplexEnergy::new(e, eta));
                assert!(s.im > 0.0);
                assert!(s.im <= 1.0 / eta + 1e-12);
            }
        }
    }

    #[test]
    fn local_green_trace_identity() {
        let m = {
            let mut m = SymmetricMatrix::zeros(6);
            for i in 0..6 {
                for j in i..6 {
                    m.set_sym(i, j, ((i * 7 + j * 3) % 5) as f64 - 2.0);
                }
            }
            m
        };
        let dec = eig_sym(&m, true).unwrap();
        let z = ComplexEnergy::new(0.4, 0.2);
        let mut avg = Complex64::new(0.0, 0.0);
        for i in 0..6 {
            avg += local_green(&dec, Site::from_index(i), z).unwrap();
        }
        avg /= 6.0;
        let s = stieltjes(&dec, z);
        assert!((avg - s).norm() < 1e-12, "trace identity violated: {avg} vs {s}");
    }

    #[test]
    fn local_green_atom() {
        let dec = eig_sym(&diag_matrix(&[0.7]), true).unwrap();
        let z = ComplexEnergy::new(0.7, 1e-3);
        let g = local_green(&dec, Site(1), z).unwrap();
        assert!((g.im - 1e3).abs() < 1e-6);
    }

    #[test]
    fn dos_atom_peak_and_half_max() {
        let dec = eig_sym(&diag_matrix(&[0.0]), false).unwrap();
        let eta = 0.05;
        let peak = dos_estimate(&dec, 0.0, eta);
        assert!((peak - 1.0 / (std::f64::consts::PI * eta)).abs() < 1e-12);
        let half = dos_estimate(&dec, eta, eta);
        assert!((half - 0.5 / (std::f64::consts::PI * eta)).abs() < 1e-12);
    }

    #[test]
    fn bulk_window_quantiles() {
        let dec = eig_sym(&diag_matrix(&[4.0, 2.0, 1.0, 3.0]), false).unwrap();
        let w = bulk_window(&dec, 0.25).unwrap();
        assert_eq!((w.lo, w.hi), (2.0, 3.0));
        assert!(bulk_window(&eig_sym(&diag_matrix(&[1.0, 2.0]), false).unwrap(), 0.25).is_err());
        assert!(matches!(bulk_window(&dec, 0.6), Err(SpectralError::BadQuantile(_))));
    }

    #[test]
    fn profiles_localized_and_uniform_extremes() {
        // Identity-eigenvector case: δ basis vectors.
        let dec = eig_sym(&diag_matrix(&[1.0, 2.0, 3.0, 4.0]), true).unwrap();
        let w = SpectralWindow::new(0.0, 5.0);
        let profs = eigenvector_profiles(&dec, &w).unwrap();
        assert_eq!(profs.len(), 4);
        for p in &profs {
            assert!((p.sup_norm - 1.0).abs() < 1e-12);
            assert!((p.ipr - 1.0).abs() < 1e-12);
        }

        // A matrix whose ground state is exactly uniform: the complete graph.
        let dim = 16;
        let mut m = SymmetricMatrix::zeros(dim);
        for i in 0..dim {
            for j in (i + 1)..dim {
                m.set_sym(i, j, 1.0);
            }
        }
        let dec = eig_sym(&m, true).unwrap();
        let top = dec.eigenvalues[dim - 1];
        let w = SpectralWindow::new(top - 0.1, top + 0.1);
        let profs = eigenvector_profiles(&dec, &w).unwrap();
        assert_eq!(profs.len(), 1);
        let n = dim as f64;
        assert!((profs[0].sup_norm - n.powf(-0.5)).abs() < 1e-10);
        assert!((profs[0].ipr - 1.0 / n).abs() < 1e-10);
    }

    #[test]
    fn profile_bounds_hold() {
        let m = {
            let mut m = SymmetricMatrix::zeros(8);
            for i in 0..8 {
                for j in i..8 {
                    m.set_sym(i, j, (((i + 1) * (j + 2)) % 7) as f64 * 0.3 - 1.0);
                }
            }
            m
        };
        let dec = eig_sym(&m, true).unwrap();
        dec.verify(&m).unwrap();
        let w = SpectralWindow::new(-100.0, 100.0);
        for p in eigenvector_profiles(&dec, &w).unwrap() {
            let n = 8.0f64;
            assert!(p.ipr >= 1.0 / n - 1e-12 && p.ipr <= 1.0 + 1e-12);
            assert!(p.sup_norm >= n.powf(-0.5) - 1e-12 && p.sup_norm <= 1.0 + 1e-12);
            assert!(p.ipr <= p.sup_norm * p.sup_norm + 1e-12);
        }
    }

    #[test]
    fn local_law_single_atom_fails_outside_bulk() {
        let dec = eig_sym(&diag_matrix(&[0.0]), false).unwrap();
        let report = local_law_check(&dec, &SpectralWindow::new(-5.0, 5.0), 0.5, 0.1, 10.0);
        // Wide window past the atom: Im S collapses near the edges.
        assert!(report.min_im_s < 0.1);
        assert!(!report.pass);
    }
}
