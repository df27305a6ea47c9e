//! Approximations of the predictive `E[softmax(z)]` under a logit Gaussian,
//! and the condition under which the bridge preserves variance ordering.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;

use crate::bridge;
use crate::dist::{softmax, Covariance, DirichletParams, GaussianSampler, LogitGaussian, SimplexPoint};
use crate::error::{Error, Result};
use crate::rng;

/// Monte Carlo estimate of the predictive from `n` draws.
pub fn mc_softmax_mean(g: &LogitGaussian, n: usize, seed: u64) -> Result<SimplexPoint> {
    mc_softmax_mean_with(&g.sampler()?, n, seed)
}

/// As [`mc_softmax_mean`], reusing a precomputed sampler.
pub fn mc_softmax_mean_with(sampler: &GaussianSampler, n: usize, seed: u64) -> Result<SimplexPoint> {
    if n == 0 {
        return Err(Error::domain("sample count must be at least 1"));
    }
    let parts = rng::map_shards(n, seed, |rng, count| sampler.softmax_sum(rng, count));
    let mut acc = rng::pairwise_sum(parts);
    // Dividing by the accumulated total rather than `n` keeps the result on
    // the simplex to rounding.
    let total: f64 = acc.iter().sum();
    for v in &mut acc {
        *v /= total;
    }
    Ok(SimplexPoint::from_normalized(acc))
}

/// Mean of the Dirichlet the bridge assigns to `g`.
pub fn lb_predictive_mean(g: &LogitGaussian) -> Result<SimplexPoint> {
    Ok(bridge::inverse(g)?.mean())
}

fn mackay_tau(v: f64) -> f64 {
    1.0 / (1.0 + std::f64::consts::PI * v / 8.0).sqrt()
}

/// `softmax(τ(vₖ) μₖ)` with `τ(v) = 1/√(1 + πv/8)`.
pub fn extended_mackay_mean(mean: &[f64], var: &[f64]) -> Result<SimplexPoint> {
    if mean.len() != var.len() {
        return Err(Error::dimension(format!(
            "mean has {} entries, variance has {}",
            mean.len(),
            var.len()
        )));
    }
    if var.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::domain("variances must be nonnegative"));
    }
    let z: Vec<f64> = mean.iter().zip(var).map(|(m, v)| mackay_tau(*v) * m).collect();
    Ok(softmax(&z))
}

/// Raw second-order delta predictive and how far it is from summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SodppOutput {
    pub values: Vec<f64>,
    /// `|1 − Σₖ valuesₖ|`.
    pub residual: f64,
}

fn cov_times(cov: &Covariance, p: &[f64]) -> Vec<f64> {
    match cov {
        Covariance::Diagonal(d) => d.iter().zip(p).map(|(a, b)| a * b).collect(),
        Covariance::Full(m) => (m * DVector::from_column_slice(p)).as_slice().to_vec(),
        Covariance::ScaledKron { scale, u } => (u * DVector::from_column_slice(p) * *scale).as_slice().to_vec(),
    }
}

/// `p ⊙ (1 + pᵀΣp − Σp)`.
///
/// The published form also carries `+½diag Σ − ½diag Σ`; those cancel and
/// are omitted. The output is not renormalized.
pub fn sodpp_mean(p: &SimplexPoint, cov: &Covariance) -> Result<SodppOutput> {
    if cov.dim() != p.len() {
        return Err(Error::dimension(format!(
            "simplex point has {} components, covariance is {}x{}",
            p.len(),
            cov.dim(),
            cov.dim()
        )));
    }
    let p = p.as_slice();
    let sp = cov_times(cov, p);
    let quad: f64 = p.iter().zip(&sp).map(|(a, b)| a * b).sum();
    let values: Vec<f64> = p.iter().zip(&sp).map(|(pk, s)| pk * (1.0 + quad - s)).collect();
    let residual = (1.0 - values.iter().sum::<f64>()).abs();
    Ok(SodppOutput { values, residual })
}

/// Smallest `αₖ` (exclusive) for which the variance of `πₖ` decreases in
/// `αₖ`, given the remaining mass `α_{≠k}`.
pub fn prop1_threshold(alpha_rest: f64) -> f64 {
    let r = alpha_rest;
    0.25 * ((9.0 * r * r + 10.0 * r + 1.0).sqrt() - r - 1.0)
}

/// Whether `αₖ > ¼(√(9α²_{≠k} + 10α_{≠k} + 1) − α_{≠k} − 1)`.
pub fn prop1_condition(params: &DirichletParams, k: usize) -> Result<bool> {
    let alpha = params.alpha();
    if k >= alpha.len() {
        return Err(Error::Index { index: k, len: alpha.len() });
    }
    let rest = params.total() - alpha[k];
    Ok(alpha[k] > prop1_threshold(rest))
}

/// `∂ Var(πₖ) / ∂αₖ` with `α_{≠k}` held fixed.
pub fn component_variance_derivative(alpha_k: f64, alpha_rest: f64) -> f64 {
    let (a, r) = (alpha_k, alpha_rest);
    let t = a + r;
    r * (r * r - r * a + r - a * (2.0 * a + 1.0)) / (t.powi(3) * (t + 1.0).powi(2))
}

/// Which classes [`prop1_frequency`] tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClassRule {
    /// Only the class with the largest concentration.
    #[default]
    ArgmaxClass,
    AllClasses,
}

/// Fraction of tested `(params, k)` pairs meeting [`prop1_condition`].
pub fn prop1_frequency(batch: &[DirichletParams], rule: ClassRule) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Empty("Dirichlet batch"));
    }
    let (mut hits, mut tested) = (0usize, 0usize);
    for params in batch {
        match rule {
            ClassRule::ArgmaxClass => {
                let k = crate::dist::argmax(params.alpha());
                hits += prop1_condition(params, k)? as usize;
                tested += 1;
            }
            ClassRule::AllClasses => {
                for k in 0..params.k() {
                    hits += prop1_condition(params, k)? as usize;
                    tested += 1;
                }
            }
        }
    }
    Ok(hits as f64 / tested as f64)
}

/// A predictive approximation, selectable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Lb,
    Mc,
    Mackay,
    Sodpp,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Lb, Method::Mc, Method::Mackay, Method::Sodpp];

    pub fn name(self) -> &'static str {
        match self {
            Method::Lb => "lb",
            Method::Mc => "mc",
            Method::Mackay => "mackay",
            Method::Sodpp => "sodpp",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::domain(format!("unknown method {s:?} (expected lb, mc, mackay or sodpp)")))
    }
}

/// Predictive vector for `g` under `method`. `samples` and `seed` are used
/// by [`Method::Mc`] only. SODPP values are returned unnormalized.
pub fn predictive(g: &LogitGaussian, method: Method, samples: usize, seed: u64) -> Result<Vec<f64>> {
    Ok(match method {
        Method::Lb => lb_predictive_mean(g)?.into_vec(),
        Method::Mc => mc_softmax_mean(g, samples, seed)?.into_vec(),
        Method::Mackay => extended_mackay_mean(g.mean(), &g.diag())?.into_vec(),
        Method::Sodpp => sodpp_mean(&softmax(g.mean()), g.cov())?.values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn mc_with_zero_covariance_is_softmax() {
        let mu = vec![2.0, 0.0, -1.0];
        let g = LogitGaussian::new(mu.clone(), Covariance::Diagonal(vec![0.0; 3])).unwrap();
        let m = mc_softmax_mean(&g, 5000, 3).unwrap();
        // Averaging n identical vectors is exact up to accumulated rounding.
        assert!(close(m.as_slice(), softmax(&mu).as_slice(), 1e-12));
    }

    #[test]
    fn mc_symmetric_gaussian_is_uniform() {
        let n = 200_000;
        let g = LogitGaussian::isotropic(vec![0.5; 3], 1.0).unwrap();
        let m = mc_softmax_mean(&g, n, 11).unwrap();
        // softmax components are in [0, 1], so sd ≤ ½; 3σ/√n bound.
        let tol = 3.0 * 0.5 / (n as f64).sqrt();
        for v in m.as_slice() {
            assert!((v - 1.0 / 3.0).abs() < tol, "{v}");
        }
        assert!((m.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mc_reference_value() {
        // Independent 10⁷-draw numpy run: per-component sd of softmax is
        // 0.0666 / 0.0421, reference standard error ≤ 2.2e-5.
        let g = LogitGaussian::isotropic(vec![2.0, 0.0, 0.0], 0.1).unwrap();
        let n = 1_000_000;
        let m = mc_softmax_mean(&g, n, 5).unwrap();
        let want = [0.775901, 0.112050, 0.112050];
        let sd = [0.0666, 0.0421, 0.0421];
        for ((got, want), sd) in m.as_slice().iter().zip(want).zip(sd) {
            let se = (sd * sd / n as f64 + 2.2e-5f64.powi(2)).sqrt();
            assert!((got - want).abs() <= 3.0 * se, "{got} vs {want}");
        }
    }

    #[test]
    fn mc_is_deterministic_and_parallel_invariant() {
        let g = LogitGaussian::isotropic(vec![1.0, 0.0, -1.0], 2.0).unwrap();
        let a = mc_softmax_mean(&g, 20_000, 9).unwrap();
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| mc_softmax_mean(&g, 20_000, 9).unwrap());
        assert_eq!(a, b);
        assert!(mc_softmax_mean(&g, 0, 9).is_err());
    }

    #[test]
    fn lb_mean_examples() {
        let g = LogitGaussian::isotropic(vec![0.0; 4], 3.0).unwrap();
        assert!(close(lb_predictive_mean(&g).unwrap().as_slice(), &[0.25; 4], 1e-15));
        let g = LogitGaussian::isotropic(vec![0.0; 3], 2.0 / 3.0).unwrap();
        assert!(close(lb_predictive_mean(&g).unwrap().as_slice(), &[1.0 / 3.0; 3], 1e-15));
    }

    #[test]
    fn lb_mean_at_small_spread() {
        // α from the inverse map is (20.8646, 5.7059, 5.7059) (numpy oracle);
        // the bridge mean sits well below the MC value 0.7759 for class 0.
        let g = LogitGaussian::isotropic(vec![2.0, 0.0, 0.0], 0.1).unwrap();
        let lb = lb_predictive_mean(&g).unwrap();
        assert!(close(lb.as_slice(), &[0.6464337, 0.1767832, 0.1767832], 1e-6), "{:?}", lb.as_slice());
    }

    #[test]
    fn mackay_examples() {
        let mu = [1.0, -1.0, 0.5];
        assert!(close(extended_mackay_mean(&mu, &[0.0; 3]).unwrap().as_slice(), softmax(&mu).as_slice(), 0.0));
        assert!(close(extended_mackay_mean(&[0.0; 3], &[1.0, 5.0, 9.0]).unwrap().as_slice(), &[1.0 / 3.0; 3], 1e-15));
        let v = 8.0 / std::f64::consts::PI;
        let got = extended_mackay_mean(&[1.0, -1.0], &[v, v]).unwrap();
        let r = 2f64.sqrt();
        assert!(close(got.as_slice(), softmax(&[1.0 / r, -1.0 / r]).as_slice(), 1e-15));
        assert!(extended_mackay_mean(&[0.0], &[-1.0]).is_err());
        assert!(extended_mackay_mean(&[0.0, 1.0], &[1.0]).is_err());
    }

    #[test]
    fn sodpp_examples() {
        let p = SimplexPoint::new(vec![0.2, 0.3, 0.5]).unwrap();
        let out = sodpp_mean(&p, &Covariance::Diagonal(vec![0.0; 3])).unwrap();
        assert_eq!(out.values, p.as_slice());
        assert_eq!(out.residual, 0.0);

        let c = 0.7;
        let u = SimplexPoint::new(vec![0.5, 0.5]).unwrap();
        let out = sodpp_mean(&u, &Covariance::Full(DMatrix::identity(2, 2) * c)).unwrap();
        assert!(close(&out.values, &[0.5, 0.5], 1e-15));

        // pᵀΣp = 0.64; Σp = (0.8, 0) → 0.8·0.84, 0.2·1.64.
        let p = SimplexPoint::new(vec![0.8, 0.2]).unwrap();
        let out = sodpp_mean(&p, &Covariance::Diagonal(vec![1.0, 0.0])).unwrap();
        assert!(close(&out.values, &[0.672, 0.328], 1e-15));
        assert!(out.residual < 1e-15);

        // Components always sum to 1 (Σ pₖ(Σp)ₖ = pᵀΣp), but large variance
        // pushes the output off the simplex through negative entries.
        let p = SimplexPoint::new(vec![0.5, 0.5]).unwrap();
        let out = sodpp_mean(&p, &Covariance::Diagonal(vec![10.0, 0.0])).unwrap();
        assert!(close(&out.values, &[-0.75, 1.75], 1e-15));
        assert!(out.residual < 1e-15);

        assert!(sodpp_mean(&p, &Covariance::Diagonal(vec![1.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn sodpp_encodings_agree() {
        let p = SimplexPoint::new(vec![0.6, 0.3, 0.1]).unwrap();
        let u = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.0, -0.2, 0.1, -0.2, 0.5]);
        let a = sodpp_mean(&p, &Covariance::ScaledKron { scale: 0.5, u: u.clone() }).unwrap();
        let b = sodpp_mean(&p, &Covariance::Full(u * 0.5)).unwrap();
        assert!(close(&a.values, &b.values, 1e-15));
    }

    #[test]
    fn prop1_examples() {
        let d = |a: &[f64]| DirichletParams::new(a.to_vec()).unwrap();
        assert!((prop1_threshold(1.0) - 0.25 * (20f64.sqrt() - 2.0)).abs() < 1e-15);
        assert!(prop1_condition(&d(&[1.0, 1.0]), 0).unwrap());
        assert!((prop1_threshold(10.0) - 5.159).abs() < 1e-3);
        assert!(!prop1_condition(&d(&[0.1, 10.0]), 0).unwrap());
        assert!(prop1_condition(&d(&[1e12, 10.0]), 0).unwrap());
        assert!(matches!(prop1_condition(&d(&[1.0, 1.0]), 2), Err(Error::Index { .. })));
    }

    #[test]
    fn prop1_frequency_examples() {
        let d = |a: &[f64]| DirichletParams::new(a.to_vec()).unwrap();
        // Two symmetric classes satisfy the condition; three never do, since
        // c > ¼(√(36c² + 20c + 1) − 2c − 1) reduces to 12c > 20c.
        let sym2 = vec![d(&[50.0; 2]), d(&[200.0; 2])];
        assert_eq!(prop1_frequency(&sym2, ClassRule::AllClasses).unwrap(), 1.0);
        let sym3 = vec![d(&[50.0; 3]), d(&[1e6; 3])];
        assert_eq!(prop1_frequency(&sym3, ClassRule::AllClasses).unwrap(), 0.0);
        assert_eq!(prop1_frequency(&[d(&[0.01, 100.0])], ClassRule::AllClasses).unwrap(), 0.5);
        let f = prop1_frequency(&[d(&[0.01, 100.0])], ClassRule::ArgmaxClass).unwrap();
        assert_eq!(f, 1.0);
        assert!(matches!(prop1_frequency(&[], ClassRule::ArgmaxClass), Err(Error::Empty(_))));
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("probit".parse::<Method>().is_err());
    }

    #[test]
    fn all_methods_reach_softmax_in_the_zero_covariance_limit() {
        for mu in [vec![2.0, 0.0, 0.0], vec![-1.0, 2.0, -1.0], vec![0.3, -0.7]] {
            let g = LogitGaussian::isotropic(mu.clone(), 1e-12).unwrap();
            let target = softmax(&mu);
            for m in [Method::Mackay, Method::Sodpp, Method::Mc] {
                let p = predictive(&g, m, 1000, 1).unwrap();
                assert!(crate::dist::total_variation(&p, target.as_slice()) <= 1e-6, "{m}");
            }
        }
        // Two classes: the bridge mean converges as well.
        let g = LogitGaussian::isotropic(vec![0.3, -0.7], 1e-12).unwrap();
        let p = lb_predictive_mean(&g).unwrap();
        assert!(p.total_variation(&softmax(&[0.3, -0.7])) <= 1e-6);
    }

    fn variance(a: f64, r: f64) -> f64 {
        DirichletParams::new(vec![a, r]).unwrap().component_variance(0).unwrap()
    }

    /// Fourth-order central difference with step `1e-3·a`.
    fn five_point_derivative(a: f64, r: f64) -> f64 {
        let h = 1e-3 * a;
        let f = |x| variance(x, r);
        (f(a - 2.0 * h) - 8.0 * f(a - h) + 8.0 * f(a + h) - f(a + 2.0 * h)) / (12.0 * h)
    }

    /// `1e-6` relative, floored at `1e-5` of the natural scale `Var/αₖ`
    /// where the derivative itself crosses zero.
    fn derivative_tolerance(a: f64, r: f64, cf: f64) -> f64 {
        1e-6 * cf.abs().max(1e-5 * variance(a, r) / a)
    }

    proptest! {
        #[test]
        fn derivative_matches_finite_differences(a in 0.05f64..200.0, r in 0.05f64..200.0) {
            let fd = five_point_derivative(a, r);
            let cf = component_variance_derivative(a, r);
            prop_assert!((fd - cf).abs() <= derivative_tolerance(a, r, cf), "{fd} vs {cf}");
        }

        #[test]
        fn variance_decreases_beyond_threshold(r in 0.01f64..100.0, t in 1.001f64..50.0) {
            let a = prop1_threshold(r) * t + 1e-9;
            let h = 1e-4 * a;
            prop_assert!(variance(a + h, r) < variance(a - h, r));
            prop_assert!(component_variance_derivative(a, r) < 0.0);
        }

        #[test]
        fn sign_of_derivative_is_the_condition(a in 0.01f64..100.0, r in 0.01f64..100.0) {
            let params = DirichletParams::new(vec![a, r]).unwrap();
            let d = component_variance_derivative(a, r);
            prop_assume!(d.abs() > 1e-12);
            prop_assert_eq!(prop1_condition(&params, 0).unwrap(), d < 0.0);
        }
    }
}
