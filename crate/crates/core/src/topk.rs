//! Uncertainty-aware top-k: grow the prediction set while consecutive
//! Beta marginals (in descending order of concentration) overlap.

use rayon::prelude::*;

use crate::dist::DirichletParams;
use crate::error::{Error, Result};
use crate::specfun::ShapePair;

pub const DEFAULT_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct TopKResult {
    /// Retained class indices, by descending concentration.
    pub classes: Vec<usize>,
    pub k: usize,
    pub threshold: f64,
    /// `(F⁻¹(T/2), F⁻¹(1 − T/2))` of each retained class's Beta marginal.
    pub boundary_quantiles: Vec<(f64, f64)>,
}

fn check_threshold(t: f64) -> Result<()> {
    if t > 0.0 && t < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("threshold must lie in (0, 1), got {t}")))
    }
}

/// Class indices sorted by descending `α`, ties to the lower index.
fn descending(alpha: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..alpha.len()).collect();
    order.sort_by(|&i, &j| alpha[j].total_cmp(&alpha[i]).then(i.cmp(&j)));
    order
}

struct Interval {
    left: f64,
    right: f64,
}

fn interval(params: &DirichletParams, class: usize, t: f64) -> Result<Interval> {
    let a = params.alpha()[class];
    let s = ShapePair::new(a, params.total() - a)?;
    Ok(Interval {
        left: s.quantile(t / 2.0)?,
        right: s.quantile(1.0 - t / 2.0)?,
    })
}

/// Adds the next class while its upper quantile exceeds the previous
/// class's lower quantile (strictly); stops at the first failure or at
/// `k_max` classes.
pub fn uncertainty_aware_topk(params: &DirichletParams, t: f64, k_max: Option<usize>) -> Result<TopKResult> {
    check_threshold(t)?;
    if k_max == Some(0) {
        return Err(Error::domain("k_max must be at least 1"));
    }
    let cap = k_max.unwrap_or(usize::MAX);
    let order = descending(params.alpha());
    let mut prev = interval(params, order[0], t)?;
    let mut classes = vec![order[0]];
    let mut bounds = vec![(prev.left, prev.right)];
    for &c in &order[1..] {
        if classes.len() >= cap {
            break;
        }
        let cur = interval(params, c, t)?;
        if cur.right > prev.left {
            classes.push(c);
            bounds.push((cur.left, cur.right));
            prev = cur;
        } else {
            break;
        }
    }
    Ok(TopKResult {
        k: classes.len(),
        classes,
        threshold: t,
        boundary_quantiles: bounds,
    })
}

/// Runs [`uncertainty_aware_topk`] over a batch, preserving order.
pub fn topk_batch(batch: &[DirichletParams], t: f64, k_max: Option<usize>) -> Result<Vec<TopKResult>> {
    batch.par_iter().map(|p| uncertainty_aware_topk(p, t, k_max)).collect()
}

/// Counts of set sizes `1..=k_max` (index 0 holds `k = 1`); larger sets are
/// counted in the last bin.
pub fn topk_histogram(batch: &[DirichletParams], t: f64, k_max: usize) -> Result<Vec<usize>> {
    if batch.is_empty() {
        return Err(Error::Empty("Dirichlet batch"));
    }
    if k_max == 0 {
        return Err(Error::domain("k_max must be at least 1"));
    }
    let mut counts = vec![0; k_max];
    for r in topk_batch(batch, t, None)? {
        counts[r.k.min(k_max) - 1] += 1;
    }
    Ok(counts)
}

/// Fraction of inputs whose top-k set contains the true class.
pub fn topk_accuracy(batch: &[(DirichletParams, usize)], t: f64, k_max: Option<usize>) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Empty("labelled Dirichlet batch"));
    }
    let hits: Vec<bool> = batch
        .par_iter()
        .map(|(p, label)| {
            if *label >= p.k() {
                return Err(Error::Index { index: *label, len: p.k() });
            }
            Ok(uncertainty_aware_topk(p, t, k_max)?.classes.contains(label))
        })
        .collect::<Result<_>>()?;
    Ok(hits.iter().filter(|h| **h).count() as f64 / batch.len() as f64)
}
