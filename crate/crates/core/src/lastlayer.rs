//! Logit Gaussians induced by a Gaussian posterior over the last linear
//! layer `W` (`K x Q`) of a classifier, for a feature vector `φ`.
//!
//! Weight vectors are ordered class-major: `vec(W)[k·Q + q] = W[k, q]`
//! (rows of `W` stacked). Under this ordering a Kronecker-factored
//! posterior has weight covariance `U ⊗ V` with `U` over classes and `V`
//! over features. Biases are handled by appending a constant `1` feature.

use nalgebra::{DMatrix, DVector};

use crate::dist::gaussian::{psd_factor, PSD_TOL};
use crate::dist::{Covariance, LogitGaussian};
use crate::error::{Error, Result};

/// Covariance of the last-layer weights.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightCovariance {
    /// Matrix-normal posterior with class factor `U` (`K x K`) and feature
    /// factor `V` (`Q x Q`).
    KronFactors { u: DMatrix<f64>, v: DMatrix<f64> },
    /// Mean-field posterior: per-weight variances, same shape as `W`.
    DiagonalWeights(DMatrix<f64>),
    /// Dense `(KQ) x (KQ)` covariance in class-major order.
    FullWeights(DMatrix<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LastLayerPosterior {
    weight_mean: DMatrix<f64>,
    cov: WeightCovariance,
}

fn check_psd(name: &str, m: &DMatrix<f64>) -> Result<()> {
    let scale = m.amax().max(f64::MIN_POSITIVE);
    for i in 0..m.nrows() {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > PSD_TOL * scale {
                return Err(Error::domain(format!("{name} is not symmetric at ({i}, {j})")));
            }
        }
    }
    psd_factor(m).map(|_| ())
}

impl LastLayerPosterior {
    pub fn new(weight_mean: DMatrix<f64>, cov: WeightCovariance) -> Result<Self> {
        let (k, q) = weight_mean.shape();
        if k == 0 || q == 0 {
            return Err(Error::dimension("weight mean is empty"));
        }
        if weight_mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("weight mean must be finite"));
        }
        match &cov {
            WeightCovariance::KronFactors { u, v } => {
                if u.shape() != (k, k) || v.shape() != (q, q) {
                    return Err(Error::dimension(format!(
                        "Kronecker factors {:?} and {:?} do not match W {k}x{q}",
                        u.shape(),
                        v.shape()
                    )));
                }
                check_psd("U", u)?;
                check_psd("V", v)?;
            }
            WeightCovariance::DiagonalWeights(s) => {
                if s.shape() != (k, q) {
                    return Err(Error::dimension(format!(
                        "weight variances {:?} do not match W {k}x{q}",
                        s.shape()
                    )));
                }
                if s.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(Error::domain("weight variances must be finite and >= 0"));
                }
            }
            WeightCovariance::FullWeights(h) => {
                if h.shape() != (k * q, k * q) {
                    return Err(Error::dimension(format!(
                        "weight covariance {:?} does not match W {k}x{q} (expected {n}x{n})",
                        h.shape(),
                        n = k * q
                    )));
                }
                check_psd("weight covariance", h)?;
            }
        }
        Ok(Self { weight_mean, cov })
    }

    pub fn classes(&self) -> usize {
        self.weight_mean.nrows()
    }

    pub fn features(&self) -> usize {
        self.weight_mean.ncols()
    }

    pub fn weight_mean(&self) -> &DMatrix<f64> {
        &self.weight_mean
    }

    pub fn cov(&self) -> &WeightCovariance {
        &self.cov
    }

    fn logit_mean(&self, phi: &FeatureVector) -> Result<DVector<f64>> {
        if phi.0.len() != self.features() {
            return Err(Error::dimension(format!(
                "feature vector has {} entries, posterior expects {}",
                phi.0.len(),
                self.features()
            )));
        }
        Ok(&self.weight_mean * &phi.0)
    }

    /// Dispatches on the covariance encoding.
    pub fn logit_gaussian(&self, phi: &FeatureVector) -> Result<LogitGaussian> {
        match self.cov {
            WeightCovariance::KronFactors { .. } => logit_gaussian_kfac(self, phi),
            WeightCovariance::DiagonalWeights(_) => logit_gaussian_diag(self, phi),
            WeightCovariance::FullWeights(_) => logit_gaussian_full(self, phi),
        }
    }
}

/// Penultimate-layer activations `φ(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(DVector<f64>);

impl FeatureVector {
    pub fn new(phi: Vec<f64>) -> Result<Self> {
        if phi.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("features must be finite"));
        }
        Ok(Self(DVector::from_vec(phi)))
    }

    /// Appends the constant feature that carries the bias column of `W`.
    pub fn with_bias(phi: Vec<f64>) -> Result<Self> {
        let mut phi = phi;
        phi.push(1.0);
        Self::new(phi)
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }
}

fn encoding_error(want: &str) -> Error {
    Error::dimension(format!("posterior covariance is not {want}"))
}

/// `N(W φ, (φᵀ V φ) U)`.
pub fn logit_gaussian_kfac(post: &LastLayerPosterior, phi: &FeatureVector) -> Result<LogitGaussian> {
    let WeightCovariance::KronFactors { u, v } = &post.cov else {
        return Err(encoding_error("Kronecker-factored"));
    };
    let mean = post.logit_mean(phi)?;
    let scale = phi.0.dot(&(v * &phi.0)).max(0.0);
    LogitGaussian::new(
        mean.as_slice().to_vec(),
        Covariance::ScaledKron {
            scale,
            u: u.clone(),
        },
    )
}

/// `N(W φ, diag(Σⱼ φⱼ² σ²ₖⱼ))`.
pub fn logit_gaussian_diag(post: &LastLayerPosterior, phi: &FeatureVector) -> Result<LogitGaussian> {
    let WeightCovariance::DiagonalWeights(s) = &post.cov else {
        return Err(encoding_error("diagonal"));
    };
    let mean = post.logit_mean(phi)?;
    let phi2 = phi.0.map(|v| v * v);
    let var = s * phi2;
    LogitGaussian::new(
        mean.as_slice().to_vec(),
        Covariance::Diagonal(var.as_slice().to_vec()),
    )
}

/// `N(W φ, Σ)` with `Σₖₗ = Σ_{q,r} φ_q φ_r H⁻¹[kQ + q, lQ + r]`.
pub fn logit_gaussian_full(post: &LastLayerPosterior, phi: &FeatureVector) -> Result<LogitGaussian> {
    let WeightCovariance::FullWeights(h) = &post.cov else {
        return Err(encoding_error("a full weight covariance"));
    };
    let mean = post.logit_mean(phi)?;
    let (k, q) = post.weight_mean.shape();
    let mut cov = DMatrix::zeros(k, k);
    for a in 0..k {
        for b in 0..=a {
            let block = h.view((a * q, b * q), (q, q));
            let v = phi.0.dot(&(block * &phi.0));
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    let g = LogitGaussian::new(mean.as_slice().to_vec(), Covariance::Full(cov))?;
    g.check_psd()?;
    Ok(g)
}
