//! The Laplace Bridge: an analytic map from Dirichlet concentrations to a
//! Gaussian over zero-sum logits, and the pseudo-inverse from any logit
//! Gaussian back to a Dirichlet.
//!
//! The forward map is the Laplace approximation of the Dirichlet expressed
//! in the softmax basis:
//!
//! ```text
//! μₖ  = ln αₖ - (1/K) Σₗ ln αₗ
//! Σₖₗ = δₖₗ/αₖ - (1/K) [1/αₖ + 1/αₗ - (1/K) Σᵤ 1/αᵤ]
//! ```
//!
//! The inverse only reads the covariance diagonal (off-diagonal entries are
//! discarded):
//!
//! ```text
//! αₖ = (1/Σₖₖ) (1 - 2/K + (e^{μₖ}/K²) Σₗ e^{-μₗ})
//! ```
//!
//! and recovers `α` exactly from a forward image. The inverse is invariant
//! to shifting every `μₖ` by the same constant, so no centering of the mean
//! is needed (or performed).

use nalgebra::DMatrix;

use crate::dist::{log_sum_exp, Covariance, DirichletParams, LogitGaussian};
use crate::error::{Error, Result};
use crate::specfun::ShapePair;

/// Gaussian image of a Dirichlet under the forward map.
///
/// The covariance is kept in factored form (it is determined by `1/α`);
/// [`BridgeGaussian::cov_full`] materializes the `K x K` matrix on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct BridgeGaussian {
    /// Zero-sum logit mean.
    pub mean: Vec<f64>,
    /// `Σₖₖ = (1/αₖ)(1 - 2/K) + (1/K²) Σₗ 1/αₗ`.
    pub cov_diag: Vec<f64>,
    inv_alpha: Vec<f64>,
    inv_sum: f64,
}

impl BridgeGaussian {
    pub fn k(&self) -> usize {
        self.mean.len()
    }

    /// `Σₖₗ = δₖₗ/αₖ - (1/K)(1/αₖ + 1/αₗ - (1/K) Σᵤ 1/αᵤ)`.
    pub fn cov_entry(&self, i: usize, j: usize) -> f64 {
        let k = self.k() as f64;
        let inv = &self.inv_alpha;
        let delta = if i == j { inv[i] } else { 0.0 };
        delta - (inv[i] + inv[j] - self.inv_sum / k) / k
    }

    /// Rank `K - 1` covariance with zero row sums.
    pub fn cov_full(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.k(), self.k(), |i, j| self.cov_entry(i, j))
    }

    pub fn to_logit_gaussian(&self) -> LogitGaussian {
        LogitGaussian::new(self.mean.clone(), Covariance::Full(self.cov_full()))
            .expect("forward image is a valid Gaussian")
    }

    /// The same mean with only the diagonal of the covariance kept.
    pub fn to_diagonal_gaussian(&self) -> LogitGaussian {
        LogitGaussian::new(self.mean.clone(), Covariance::Diagonal(self.cov_diag.clone()))
            .expect("forward image is a valid Gaussian")
    }
}

/// Dirichlet to Gaussian.
pub fn forward(params: &DirichletParams) -> BridgeGaussian {
    let alpha = params.alpha();
    let k = alpha.len() as f64;
    let log_alpha: Vec<f64> = alpha.iter().map(|a| a.ln()).collect();
    let mean_log = log_alpha.iter().sum::<f64>() / k;
    let mean = log_alpha.iter().map(|l| l - mean_log).collect();

    let inv_alpha: Vec<f64> = alpha.iter().map(|a| 1.0 / a).collect();
    let inv_sum: f64 = inv_alpha.iter().sum();
    let cov_diag = inv_alpha
        .iter()
        .map(|v| v * (1.0 - 2.0 / k) + inv_sum / (k * k))
        .collect();
    BridgeGaussian {
        mean,
        cov_diag,
        inv_alpha,
        inv_sum,
    }
}

/// Gaussian to Dirichlet, from the mean and the covariance diagonal.
pub fn inverse(g: &LogitGaussian) -> Result<DirichletParams> {
    inverse_from_parts(g.mean(), &g.diag())
}

/// [`inverse`] on a raw mean and variance vector.
pub fn inverse_from_parts(mean: &[f64], var: &[f64]) -> Result<DirichletParams> {
    if mean.len() != var.len() {
        return Err(Error::dimension(format!(
            "mean has {} entries, variance has {}",
            mean.len(),
            var.len()
        )));
    }
    if let Some((k, v)) = var.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::domain(format!(
            "variance Σ[{k},{k}] = {v} must be strictly positive"
        )));
    }
    let k = mean.len() as f64;
    let neg: Vec<f64> = mean.iter().map(|m| -m).collect();
    // ln Σₗ e^{-μₗ}
    let lse_neg = log_sum_exp(&neg);
    let base = 1.0 - 2.0 / k;
    let alpha: Vec<f64> = mean
        .iter()
        .zip(var)
        .map(|(m, v)| (base + (m + lse_neg).exp() / (k * k)) / v)
        .collect();
    debug_assert!(alpha.iter().all(|a| *a > 0.0 || a.is_nan()));
    DirichletParams::new(alpha)
}

/// `‖inverse(forward(α)) - α‖∞ / ‖α‖∞`.
pub fn roundtrip_residual(params: &DirichletParams) -> f64 {
    let image = forward(params);
    let back = inverse_from_parts(&image.mean, &image.cov_diag)
        .expect("forward image has positive variances");
    let scale = params.alpha().iter().copied().fold(0.0, f64::max);
    params
        .alpha()
        .iter()
        .zip(back.alpha())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / scale
}

/// A density tabulated at the points `x` (cell midpoints of a uniform grid).
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub x: Vec<f64>,
    pub density: Vec<f64>,
}

impl Curve {
    fn tabulate(lo: f64, hi: f64, n: usize, f: impl Fn(f64) -> f64) -> Self {
        let h = (hi - lo) / n as f64;
        let x: Vec<f64> = (0..n).map(|i| lo + (i as f64 + 0.5) * h).collect();
        let density = x.iter().map(|&v| f(v)).collect();
        Self { x, density }
    }

    /// Width of one grid cell.
    pub fn step(&self) -> f64 {
        if self.x.len() < 2 {
            return 0.0;
        }
        self.x[1] - self.x[0]
    }

    /// Midpoint-rule integral over the tabulated range.
    pub fn integral(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.step()
    }

    /// Abscissa of the largest tabulated value.
    pub fn argmax(&self) -> f64 {
        self.x[crate::dist::argmax(&self.density)]
    }
}

/// The 1D (Beta) view of the bridge, as tabulated curves.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaBridgeCurves {
    pub shapes: ShapePair,
    /// Beta density on `(0, 1)`.
    pub beta: Curve,
    /// Gaussian fitted at the Beta mode, on its own abscissa (mode ± 8 sd).
    /// `None` when `a <= 1` or `b <= 1`: there is no interior mode with
    /// negative curvature, so the approximation does not exist.
    pub laplace: Option<Curve>,
    /// Bridge Gaussian of the zero-sum logit `z₁` (with `z₂ = -z₁`), on
    /// mean ± 8 sd.
    pub bridge_logit: Curve,
    /// Bridge Gaussian transported back to `(0, 1)` through the softmax,
    /// normalized on the grid.
    pub bridge: Curve,
}

/// Minimum grid resolution for [`beta_bridge_curves`].
pub const MIN_GRID: usize = 16;

const TAIL_SDS: f64 = 8.0;

fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    (-0.5 * d * d / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

pub fn beta_bridge_curves(s: ShapePair, grid: usize) -> Result<BetaBridgeCurves> {
    if grid < MIN_GRID {
        return Err(Error::domain(format!(
            "grid must have at least {MIN_GRID} points, got {grid}"
        )));
    }
    let (a, b) = (s.a(), s.b());
    let beta = Curve::tabulate(0.0, 1.0, grid, |x| s.pdf(x));

    let laplace = (a > 1.0 && b > 1.0).then(|| {
        let mode = (a - 1.0) / (a + b - 2.0);
        let var = 1.0 / ((a - 1.0) / (mode * mode) + (b - 1.0) / ((1.0 - mode) * (1.0 - mode)));
        let sd = var.sqrt();
        Curve::tabulate(mode - TAIL_SDS * sd, mode + TAIL_SDS * sd, grid, |x| {
            normal_pdf(x, mode, var)
        })
    });

    let image = forward(&DirichletParams::new(vec![a, b])?);
    let (m1, v1) = (image.mean[0], image.cov_entry(0, 0));
    let sd1 = v1.sqrt();
    let bridge_logit = Curve::tabulate(m1 - TAIL_SDS * sd1, m1 + TAIL_SDS * sd1, grid, |z| {
        normal_pdf(z, m1, v1)
    });

    // x = softmax(z₁, z₂)₁ = σ(d) with d = z₁ - z₂ Gaussian; the density on
    // (0, 1) picks up the Jacobian 1 / (x (1 - x)).
    let d_mean = image.mean[0] - image.mean[1];
    let d_var = image.cov_entry(0, 0) + image.cov_entry(1, 1) - 2.0 * image.cov_entry(0, 1);
    let mut bridge = Curve::tabulate(0.0, 1.0, grid, |x| {
        let d = (x / (1.0 - x)).ln();
        normal_pdf(d, d_mean, d_var) / (x * (1.0 - x))
    });
    let mass = bridge.integral();
    for v in &mut bridge.density {
        *v /= mass;
    }

    Ok(BetaBridgeCurves {
        shapes: s,
        beta,
        laplace,
        bridge_logit,
        bridge,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dir(a: &[f64]) -> DirichletParams {
        DirichletParams::new(a.to_vec()).unwrap()
    }

    fn shapes(a: f64, b: f64) -> ShapePair {
        ShapePair::new(a, b).unwrap()
    }

    #[test]
    fn forward_examples() {
        let g = forward(&dir(&[1.0, 1.0]));
        assert_eq!(g.mean, vec![0.0, 0.0]);
        let want = DMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]);
        assert!((g.cov_full() - want).amax() < 1e-15);

        let g = forward(&dir(&[1.0, 1.0, 1.0]));
        assert!(g.mean.iter().all(|m| *m == 0.0));
        assert!(g.cov_diag.iter().all(|d| (d - 2.0 / 3.0).abs() < 1e-15));

        let g = forward(&dir(&[2.0, 2.0, 6.0]));
        let m = (2.0 * 2f64.ln() + 6f64.ln()) / 3.0;
        let want = [2f64.ln() - m, 2f64.ln() - m, 6f64.ln() - m];
        for (got, want) in g.mean.iter().zip(want) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn inverse_examples() {
        let g = LogitGaussian::new(vec![0.0; 3], Covariance::Diagonal(vec![2.0 / 3.0; 3])).unwrap();
        let a = inverse(&g).unwrap();
        assert!(a.alpha().iter().all(|v| (v - 1.0).abs() < 1e-15));

        let g = LogitGaussian::new(vec![0.0; 2], Covariance::Diagonal(vec![0.5; 2])).unwrap();
        let a = inverse(&g).unwrap();
        assert!(a.alpha().iter().all(|v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn inverse_is_homogeneous_in_variance() {
        let mu = vec![0.4, -1.0, 2.2, 0.1];
        let var = vec![0.3, 1.7, 0.05, 2.0];
        let a = inverse_from_parts(&mu, &var).unwrap();
        let half: Vec<f64> = var.iter().map(|v| v / 2.0).collect();
        let b = inverse_from_parts(&mu, &half).unwrap();
        for (x, y) in a.alpha().iter().zip(b.alpha()) {
            assert!((2.0 * x - y).abs() < 1e-13 * y);
        }
    }

    #[test]
    fn inverse_rejects_nonpositive_variance() {
        assert!(matches!(inverse_from_parts(&[0.0, 0.0], &[0.5, 0.0]), Err(Error::Domain(_))));
        assert!(inverse_from_parts(&[0.0, 0.0], &[0.5, -1.0]).is_err());
        assert!(inverse_from_parts(&[0.0, 0.0], &[0.5, f64::NAN]).is_err());
        assert!(matches!(inverse_from_parts(&[0.0], &[0.5, 1.0]), Err(Error::Dimension(_))));
    }

    #[test]
    fn inverse_reads_only_the_diagonal() {
        let mu = vec![0.2, -0.3, 0.9];
        let dense = DMatrix::from_row_slice(3, 3, &[1.0, 0.4, 0.1, 0.4, 0.8, -0.2, 0.1, -0.2, 0.6]);
        let full = LogitGaussian::new(mu.clone(), Covariance::Full(dense.clone())).unwrap();
        let diag = LogitGaussian::new(mu.clone(), Covariance::Diagonal(vec![1.0, 0.8, 0.6])).unwrap();
        let kron = LogitGaussian::new(mu, Covariance::ScaledKron { scale: 2.0, u: dense / 2.0 }).unwrap();
        let a = inverse(&full).unwrap();
        assert_eq!(a, inverse(&diag).unwrap());
        for (x, y) in a.alpha().iter().zip(inverse(&kron).unwrap().alpha()) {
            assert!((x - y).abs() < 1e-14 * x);
        }
    }

    #[test]
    fn inverse_is_invariant_to_mean_shifts() {
        // e^{μₖ + c} Σₗ e^{-μₗ - c} does not depend on c.
        let mu = vec![0.5, -0.2, 1.0];
        let var = vec![0.2, 0.7, 1.3];
        let a = inverse_from_parts(&mu, &var).unwrap();
        for c in [-30.0, -1.0, 3.0, 250.0] {
            let shifted: Vec<f64> = mu.iter().map(|m| m + c).collect();
            let b = inverse_from_parts(&shifted, &var).unwrap();
            for (x, y) in a.alpha().iter().zip(b.alpha()) {
                assert!((x - y).abs() < 1e-12 * x, "shift {c}");
            }
        }
    }

    #[test]
    fn roundtrip_examples() {
        assert!(roundtrip_residual(&dir(&[1.0, 1.0, 1.0])) < 1e-12);
        assert!(roundtrip_residual(&dir(&[2.0, 2.0, 6.0])) <= 1e-10);
    }

    #[test]
    fn covariance_structure() {
        let g = forward(&dir(&[0.3, 2.0, 15.0, 1e4, 0.01]));
        let scale = g.cov_full().amax();
        for i in 0..5 {
            let row: f64 = g.cov_full().row(i).iter().sum();
            assert!(row.abs() < 1e-10 * scale, "row {i} sums to {row}");
            assert!((g.cov_entry(i, i) - g.cov_diag[i]).abs() < 1e-12 * scale);
            for j in 0..5 {
                assert_eq!(g.cov_entry(i, j), g.cov_entry(j, i));
            }
        }
        assert!(g.mean.iter().sum::<f64>().abs() < 1e-10);
        g.to_logit_gaussian().check_psd().unwrap();
    }

    #[test]
    fn forward_commutes_with_relabeling() {
        let alpha = [0.5, 3.0, 7.0, 1.2];
        let perm = [2, 0, 3, 1];
        let g = forward(&dir(&alpha));
        let permuted: Vec<f64> = perm.iter().map(|&i| alpha[i]).collect();
        let h = forward(&dir(&permuted));
        for (a, &i) in perm.iter().enumerate() {
            assert!((h.mean[a] - g.mean[i]).abs() < 1e-14);
            for (b, &j) in perm.iter().enumerate() {
                assert!((h.cov_entry(a, b) - g.cov_entry(i, j)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn curves_flag_missing_laplace_panel() {
        let c = beta_bridge_curves(shapes(0.8, 0.9), 256).unwrap();
        assert!(c.laplace.is_none());
        assert!(beta_bridge_curves(shapes(1.0, 3.0), 256).unwrap().laplace.is_none());
        assert!(beta_bridge_curves(shapes(2.0, 2.0), 8).is_err());
    }

    #[test]
    fn symmetric_shapes_give_symmetric_curves() {
        let c = beta_bridge_curves(shapes(2.0, 2.0), 200).unwrap();
        let lap = c.laplace.as_ref().unwrap();
        for curve in [&c.beta, lap, &c.bridge] {
            let n = curve.density.len();
            let center = curve.x[0] + curve.x[n - 1];
            assert!((center - 1.0).abs() < 1e-12);
            for i in 0..n {
                let (l, r) = (curve.density[i], curve.density[n - 1 - i]);
                assert!((l - r).abs() <= 1e-12 * l.max(1.0), "{i}");
            }
        }
    }

    #[test]
    fn bridge_peak_in_logit_basis_is_alpha_over_total() {
        let c = beta_bridge_curves(shapes(4.0, 2.0), 512).unwrap();
        // z₁ = ln(α₁/α₀)/2 + const on the zero-sum line, so σ(2 z₁) = α₁/α₀
        let z = c.bridge_logit.argmax();
        let target = 0.5 * f64::ln(4.0 / 2.0);
        assert!((z - target).abs() <= c.bridge_logit.step());
        assert!((1.0 / (1.0 + (-2.0 * target).exp()) - 4.0 / 6.0).abs() < 1e-15);
        // Weighting the simplex density by the Jacobian x (1 - x) gives the
        // logit-basis density; its grid maximizer sits at α₁/α₀.
        let weighted: Vec<f64> = c
            .bridge
            .x
            .iter()
            .zip(&c.bridge.density)
            .map(|(x, f)| f * x * (1.0 - x))
            .collect();
        let peak = c.bridge.x[crate::dist::argmax(&weighted)];
        assert!((peak - 4.0 / 6.0).abs() <= c.bridge.step());
    }

    #[test]
    fn bridge_peak_on_simplex_solves_stationarity() {
        // d/dx ln f = 0 with d = logit x reduces to (d - m)/v = tanh(d/2).
        let (a, b) = (4.0, 2.0);
        let (m, v) = (f64::ln(a / b), 1.0 / a + 1.0 / b);
        let g = |d: f64| (d - m) / v - (d / 2.0).tanh();
        let (mut lo, mut hi) = (m, m + 5.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let root = 1.0 / (1.0 + (-lo).exp());
        assert!((root - 0.741).abs() < 1e-3);
        let c = beta_bridge_curves(shapes(a, b), 512).unwrap();
        assert!((c.bridge.argmax() - root).abs() <= c.bridge.step());
    }

    #[test]
    fn curves_integrate_to_one() {
        for (a, b) in [(4.0, 2.0), (2.0, 7.0)] {
            let c = beta_bridge_curves(shapes(a, b), 512).unwrap();
            assert!((c.beta.integral() - 1.0).abs() < 1e-3);
            assert!((c.laplace.unwrap().integral() - 1.0).abs() < 1e-3);
            assert!((c.bridge_logit.integral() - 1.0).abs() < 1e-3);
            assert!((c.bridge.integral() - 1.0).abs() < 1e-12);
        }
    }

    fn log_uniform(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
        (lo.ln()..hi.ln()).prop_map(f64::exp)
    }

    proptest! {
        #[test]
        fn roundtrip_is_exact(alpha in prop::collection::vec(log_uniform(1e-3, 1e6), 2..100)) {
            prop_assert!(roundtrip_residual(&DirichletParams::new(alpha).unwrap()) <= 1e-10);
        }
    }
}
