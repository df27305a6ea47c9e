//! Dirichlet -> logit Gaussian -> Dirichlet.

use laplace_bridge::bridge;
use laplace_bridge::dist::DirichletParams;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let params = DirichletParams::new(vec![0.5, 2.0, 7.0, 120.0])?;
    let g = bridge::forward(&params);
    println!("alpha       = {:?}", params.alpha());
    println!("mean        = {:?}", g.mean);
    println!("cov diag    = {:?}", g.cov_diag);

    let back = bridge::inverse(&g.to_logit_gaussian())?;
    println!("recovered   = {:?}", back.alpha());
    println!("max rel err = {:.2e}", bridge::roundtrip_residual(&params));

    // Any Gaussian can be mapped back, not only forward images.
    let g = laplace_bridge::dist::LogitGaussian::isotropic(vec![-1.0, 2.0, -1.0], 1.0)?;
    println!("inverse of N((-1,2,-1), I) = {:?}", bridge::inverse(&g)?.alpha());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
