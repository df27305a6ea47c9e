//! Logit Gaussians from a Kronecker-factored last-layer posterior, then
//! the bridge predictive and a top-k set.

use laplace_bridge::bridge;
use laplace_bridge::lastlayer::{FeatureVector, LastLayerPosterior, WeightCovariance};
use laplace_bridge::predictive;
use laplace_bridge::topk;
use nalgebra::DMatrix;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    // 3 classes, 2 features plus a bias column.
    let w = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.5, -0.5, 1.5, 0.0, -1.0, -0.5, 0.2]);
    let u = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.2, 1.0, 0.1, 0.0, 0.1, 1.0]);
    let v = DMatrix::identity(3, 3) * 0.3;
    let post = LastLayerPosterior::new(w, WeightCovariance::KronFactors { u, v })?;

    for phi in [vec![1.0, 0.0], vec![2.0, 2.0], vec![8.0, -6.0]] {
        let x = FeatureVector::with_bias(phi.clone())?;
        let g = post.logit_gaussian(&x)?;
        let alpha = bridge::inverse(&g)?;
        let p = predictive::lb_predictive_mean(&g)?;
        let set = topk::uncertainty_aware_topk(&alpha, topk::DEFAULT_THRESHOLD, None)?;
        println!("phi {phi:?}: logit var {:.3?}, p {:.3?}, top-k {:?}", g.diag(), p.as_slice(), set.classes);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
