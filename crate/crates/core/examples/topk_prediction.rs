//! Prediction sets whose size follows the uncertainty of the Dirichlet.

use laplace_bridge::dist::DirichletParams;
use laplace_bridge::topk::{topk_histogram, uncertainty_aware_topk, DEFAULT_THRESHOLD};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let batch = vec![
        DirichletParams::new(vec![990.0, 5.0, 5.0])?,
        DirichletParams::new(vec![40.0, 35.0, 2.0, 2.0])?,
        DirichletParams::new(vec![5.0, 5.0, 5.0])?,
    ];
    for d in &batch {
        let r = uncertainty_aware_topk(d, DEFAULT_THRESHOLD, None)?;
        println!("alpha {:?} -> classes {:?}", d.alpha(), r.classes);
        for (c, (l, h)) in r.classes.iter().zip(&r.boundary_quantiles) {
            println!("    class {c}: [{l:.4}, {h:.4}]");
        }
    }
    println!("set-size histogram (k = 1..5): {:?}", topk_histogram(&batch, DEFAULT_THRESHOLD, 5)?);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
