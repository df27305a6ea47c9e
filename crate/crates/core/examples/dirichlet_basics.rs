//! Density, moments, aggregation and sampling of a Dirichlet.

use laplace_bridge::dist::{DirichletParams, SimplexPoint};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let d = DirichletParams::new(vec![2.0, 3.0, 5.0])?;
    let x = SimplexPoint::new(vec![0.2, 0.3, 0.5])?;
    println!("log p(x)       = {:.6}", d.log_density(&x)?);
    println!("mean           = {:?}", d.mean().as_slice());
    println!("mode           = {:?}", d.mode()?.as_slice());
    println!("Var(pi_0)      = {:.6}", d.component_variance(0)?);
    println!("merge {{0,1}},{{2}} -> {:?}", d.marginal(&[vec![0, 1], vec![2]])?.alpha());
    let s = d.beta_marginal(2)?;
    println!("pi_2 ~ Beta({}, {}), 95% interval [{:.4}, {:.4}]", s.a(), s.b(), s.quantile(0.025)?, s.quantile(0.975)?);

    let draws = d.sample(10_000, 7)?;
    let m0 = draws.iter().map(|p| p.as_slice()[0]).sum::<f64>() / draws.len() as f64;
    println!("sample mean of pi_0 over 10k draws = {m0:.4}");
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
