//! The two-class case: a Beta density, its Laplace approximation (when it
//! exists) and the bridge Gaussian mapped back to (0, 1).

use laplace_bridge::bridge::beta_bridge_curves;
use laplace_bridge::specfun::ShapePair;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    for (a, b) in [(0.8, 0.9), (4.0, 2.0), (2.0, 7.0)] {
        let c = beta_bridge_curves(ShapePair::new(a, b)?, 512)?;
        print!("Beta({a}, {b}): beta ∫ = {:.4}", c.beta.integral());
        match &c.laplace {
            Some(l) => print!(", laplace ∫ = {:.4}", l.integral()),
            None => print!(", laplace: none (no interior mode)"),
        }
        println!(
            ", bridge peak (logit basis) at x = {:.4}, a/(a+b) = {:.4}",
            1.0 / (1.0 + (-c.bridge_logit.argmax() * 2.0).exp()),
            a / (a + b)
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
