//! Four approximations of E[softmax(z)] for one logit Gaussian.

use laplace_bridge::dist::{softmax, LogitGaussian};
use laplace_bridge::predictive::{self, Method};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let g = LogitGaussian::isotropic(vec![2.0, 0.0, 0.0], 0.1)?;
    println!("softmax(mean) = {:?}", softmax(g.mean()).as_slice());
    for m in Method::ALL {
        let p = predictive::predictive(&g, m, 100_000, 1)?;
        println!("{m:>7}: {p:.4?}");
    }
    let sodpp = predictive::sodpp_mean(&softmax(g.mean()), g.cov())?;
    println!("sodpp normalization residual = {:.1e}", sodpp.residual);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
