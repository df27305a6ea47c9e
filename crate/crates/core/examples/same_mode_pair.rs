//! Two Dirichlets with the same mode but very different spread, and what
//! the bridge makes of them.

use laplace_bridge::bridge;
use laplace_bridge::dist::DirichletParams;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    for alpha in [vec![2.0, 2.0, 6.0], vec![11.0, 11.0, 51.0]] {
        let p = DirichletParams::new(alpha)?;
        let g = bridge::forward(&p);
        println!(
            "alpha {:?}: mode {:?}, logit variances {:?}",
            p.alpha(),
            p.mode()?.as_slice(),
            g.cov_diag
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
