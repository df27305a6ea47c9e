//! Classification and OOD metrics, and histogram KL estimates on the
//! 2-simplex.

use rayon::prelude::*;

use crate::dist::{argmax, DirichletParams, SimplexPoint};
use crate::error::{Error, Result};

pub const DEFAULT_BINS: usize = 50;

/// Mean of per-input maximum confidences.
pub fn mmc(confidences: &[f64]) -> Result<f64> {
    if confidences.is_empty() {
        return Err(Error::Empty("confidence list"));
    }
    if confidences.iter().any(|c| !(0.0..=1.0).contains(c)) {
        return Err(Error::domain("confidences must lie in [0, 1]"));
    }
    Ok(confidences.iter().sum::<f64>() / confidences.len() as f64)
}

/// Above this many score pairs AUROC switches to the sort-based count.
pub const AUROC_PAIRWISE_LIMIT: u64 = 10_000_000;

/// `P(in > out) + ½ P(in = out)` over all in/out pairs.
pub fn auroc(in_dist: &[f64], ood: &[f64]) -> Result<f64> {
    if in_dist.is_empty() || ood.is_empty() {
        return Err(Error::Empty("score list"));
    }
    if in_dist.iter().chain(ood).any(|s| s.is_nan()) {
        return Err(Error::domain("scores must not be NaN"));
    }
    let pairs = in_dist.len() as u64 * ood.len() as u64;
    let twice_u = if pairs <= AUROC_PAIRWISE_LIMIT {
        twice_u_pairwise(in_dist, ood)
    } else {
        twice_u_sorted(in_dist, ood)
    };
    // Integer counts make auroc(a, b) + auroc(b, a) == 1 exactly.
    Ok(twice_u as f64 / (2 * pairs) as f64)
}

/// `2·(#{in > out} + ½ #{in = out})`.
fn twice_u_pairwise(a: &[f64], b: &[f64]) -> u64 {
    a.par_iter()
        .map(|x| {
            b.iter()
                .map(|y| match x.partial_cmp(y) {
                    Some(std::cmp::Ordering::Greater) => 2,
                    Some(std::cmp::Ordering::Equal) => 1,
                    _ => 0,
                })
                .sum::<u64>()
        })
        .sum()
}

fn twice_u_sorted(a: &[f64], b: &[f64]) -> u64 {
    let mut b = b.to_vec();
    b.sort_by(f64::total_cmp);
    a.iter()
        .map(|x| {
            let below = b.partition_point(|y| y < x) as u64;
            let not_above = b.partition_point(|y| y <= x) as u64;
            below + not_above
        })
        .sum()
}

fn check_aligned(n: usize, m: usize) -> Result<()> {
    if n != m {
        return Err(Error::Misaligned { left: n, right: m });
    }
    if n == 0 {
        return Err(Error::Empty("prediction list"));
    }
    Ok(())
}

fn check_label(label: usize, k: usize) -> Result<()> {
    if label >= k {
        return Err(Error::Index { index: label, len: k });
    }
    Ok(())
}

/// Mean squared distance to the one-hot label.
pub fn brier(predictions: &[SimplexPoint], labels: &[usize]) -> Result<f64> {
    check_aligned(predictions.len(), labels.len())?;
    let mut total = 0.0;
    for (p, &y) in predictions.iter().zip(labels) {
        check_label(y, p.len())?;
        total += p
            .as_slice()
            .iter()
            .enumerate()
            .map(|(k, pk)| {
                let d = pk - if k == y { 1.0 } else { 0.0 };
                d * d
            })
            .sum::<f64>();
    }
    Ok(total / predictions.len() as f64)
}

pub fn accuracy(predictions: &[SimplexPoint], labels: &[usize]) -> Result<f64> {
    check_aligned(predictions.len(), labels.len())?;
    let mut hits = 0usize;
    for (p, &y) in predictions.iter().zip(labels) {
        check_label(y, p.len())?;
        hits += (argmax(p.as_slice()) == y) as usize;
    }
    Ok(hits as f64 / predictions.len() as f64)
}

/// Counts over a triangulated grid on the 2-simplex.
///
/// With `n` bins per axis, cell `(i, j)` covers `p₀ ∈ [i/n, (i+1)/n)`,
/// `p₁ ∈ [j/n, (j+1)/n)` for `i + j < n`. Cells with `i + j = n − 1` are cut
/// by the simplex edge and are half-area triangles. There are
/// `n(n+1)/2` cells.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexHistogram {
    bins_per_axis: usize,
    counts: Vec<u64>,
    total: u64,
}

impl SimplexHistogram {
    pub fn new(bins_per_axis: usize) -> Result<Self> {
        if bins_per_axis == 0 {
            return Err(Error::domain("bins per axis must be at least 1"));
        }
        let cells = bins_per_axis * (bins_per_axis + 1) / 2;
        Ok(Self {
            bins_per_axis,
            counts: vec![0; cells],
            total: 0,
        })
    }

    /// Always 3.
    pub fn k(&self) -> usize {
        3
    }

    pub fn bins_per_axis(&self) -> usize {
        self.bins_per_axis
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    fn offset(&self, i: usize) -> usize {
        let n = self.bins_per_axis;
        i * n - i * i.saturating_sub(1) / 2
    }

    fn index(&self, i: usize, j: usize) -> usize {
        self.offset(i) + j
    }

    /// Cell containing `(p₀, p₁)`.
    pub fn cell_of(&self, p: &SimplexPoint) -> Result<(usize, usize)> {
        if p.len() != 3 {
            return Err(Error::UnsupportedK(p.len()));
        }
        let n = self.bins_per_axis;
        let s = p.as_slice();
        let i = ((s[0] * n as f64) as usize).min(n - 1);
        let mut j = ((s[1] * n as f64) as usize).min(n - 1);
        // Points on the p₂ = 0 edge (or just past it by rounding) belong to
        // the edge triangle.
        if i + j >= n {
            j = n - 1 - i;
        }
        Ok((i, j))
    }

    pub fn add(&mut self, p: &SimplexPoint) -> Result<()> {
        let (i, j) = self.cell_of(p)?;
        let idx = self.index(i, j);
        self.counts[idx] += 1;
        self.total += 1;
        Ok(())
    }

    fn merge(mut self, other: Self) -> Self {
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            *a += b;
        }
        self.total += other.total;
        self
    }

    /// Every cell as `(i, j, centroid, relative area)`, in storage order.
    /// Areas sum to 1 over the triangle.
    pub fn cells(&self) -> Vec<(usize, usize, [f64; 3], f64)> {
        let n = self.bins_per_axis;
        let nf = n as f64;
        let full = 2.0 / (nf * nf);
        let mut out = Vec::with_capacity(self.counts.len());
        for i in 0..n {
            for j in 0..n - i {
                let (c, area) = if i + j + 1 == n {
                    ((1.0 / 3.0, 1.0 / 3.0), full / 2.0)
                } else {
                    ((0.5, 0.5), full)
                };
                let x = (i as f64 + c.0) / nf;
                let y = (j as f64 + c.1) / nf;
                out.push((i, j, [x, y, 1.0 - x - y], area));
            }
        }
        out
    }

    fn same_binning(&self, other: &Self) -> Result<()> {
        if self.bins_per_axis != other.bins_per_axis {
            return Err(Error::BinningMismatch(format!(
                "{} vs {} bins per axis",
                self.bins_per_axis, other.bins_per_axis
            )));
        }
        Ok(())
    }
}

/// Bins `K = 3` samples; other `K` are rejected.
pub fn build_histogram(samples: &[SimplexPoint], bins_per_axis: usize) -> Result<SimplexHistogram> {
    let empty = SimplexHistogram::new(bins_per_axis)?;
    if let Some(p) = samples.iter().find(|p| p.len() != 3) {
        return Err(Error::UnsupportedK(p.len()));
    }
    samples
        .par_chunks(crate::rng::SHARD_SIZE)
        .map(|chunk| {
            let mut h = empty.clone();
            for p in chunk {
                h.add(p)?;
            }
            Ok(h)
        })
        .try_reduce(|| empty.clone(), |a, b| Ok(a.merge(b)))
}

fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, qi)| pi * (pi / qi).ln())
        .sum::<f64>()
        .max(0.0)
}

fn normalized(h: &SimplexHistogram) -> Result<Vec<f64>> {
    if h.total == 0 {
        return Err(Error::Empty("histogram"));
    }
    let t = h.total as f64;
    Ok(h.counts.iter().map(|&c| c as f64 / t).collect())
}

/// `KL(p ‖ q)` between two histograms on the same grid.
///
/// When some cell has mass under `p` but none under `q`, `q` is smoothed
/// to `(q̂ + ε)/(1 + Bε)` with `ε = 1/(total_q · B)` over `B` cells;
/// otherwise it is used as is, so `KL(p ‖ p) = 0`.
pub fn kl_hist_vs_hist(p: &SimplexHistogram, q: &SimplexHistogram) -> Result<f64> {
    p.same_binning(q)?;
    let ph = normalized(p)?;
    let mut qh = normalized(q)?;
    let needs_smoothing = p.counts.iter().zip(&q.counts).any(|(a, b)| *a > 0 && *b == 0);
    if needs_smoothing {
        let b = qh.len() as f64;
        let eps = 1.0 / (q.total as f64 * b);
        for v in &mut qh {
            *v = (*v + eps) / (1.0 + b * eps);
        }
    }
    Ok(kl(&ph, &qh))
}

/// Cell masses of `Dir(α)` from the density at each cell centroid times the
/// cell area, renormalized over the grid.
pub fn dirichlet_cell_masses(params: &DirichletParams, bins_per_axis: usize) -> Result<Vec<f64>> {
    if params.k() != 3 {
        return Err(Error::UnsupportedK(params.k()));
    }
    let grid = SimplexHistogram::new(bins_per_axis)?;
    let logs: Vec<f64> = grid
        .cells()
        .into_iter()
        .map(|(_, _, c, area)| {
            let x = SimplexPoint::new(c.to_vec()).or_else(|_| {
                // Centroids are interior; only the sum can drift by an ulp.
                let s: f64 = c.iter().sum();
                SimplexPoint::new(c.iter().map(|v| v / s).collect())
            })?;
            Ok(params.log_density(&x)? + area.ln())
        })
        .collect::<Result<_>>()?;
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = w.iter().sum();
    Ok(w.into_iter().map(|v| v / s).collect())
}

/// `KL(p ‖ Dir(α))` with the Dirichlet discretized by
/// [`dirichlet_cell_masses`].
pub fn kl_hist_vs_dirichlet(p: &SimplexHistogram, params: &DirichletParams) -> Result<f64> {
    let q = dirichlet_cell_masses(params, p.bins_per_axis)?;
    kl_hist_vs_masses(p, &q)
}

/// `KL(p ‖ q)` for precomputed, strictly positive cell masses `q`.
pub fn kl_hist_vs_masses(p: &SimplexHistogram, q: &[f64]) -> Result<f64> {
    if q.len() != p.counts.len() {
        return Err(Error::BinningMismatch(format!("{} cells vs {} masses", p.counts.len(), q.len())));
    }
    Ok(kl(&normalized(p)?, q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::LogitGaussian;
    use proptest::prelude::*;

    fn sp(v: &[f64]) -> SimplexPoint {
        SimplexPoint::new(v.to_vec()).unwrap()
    }

    #[test]
    fn mmc_examples() {
        for k in [2usize, 3, 10] {
            let c = vec![1.0 / k as f64; 7];
            assert!((mmc(&c).unwrap() - 1.0 / k as f64).abs() < 1e-12);
        }
        assert!((mmc(&[0.9, 0.7]).unwrap() - 0.8).abs() < 1e-12);
        let confident = [0.99, 0.95, 0.97, 0.91];
        assert!((mmc(&confident).unwrap() - 3.82 / 4.0).abs() < 1e-12);
        assert!(mmc(&[]).is_err());
        assert!(mmc(&[1.5]).is_err());
    }

    #[test]
    fn auroc_examples() {
        assert_eq!(auroc(&[0.9, 0.8], &[0.2, 0.1]).unwrap(), 1.0);
        assert_eq!(auroc(&[0.3, 0.5, 0.7], &[0.3, 0.5, 0.7]).unwrap(), 0.5);
        assert_eq!(auroc(&[0.9, 0.4], &[0.6, 0.1]).unwrap(), 0.75);
        assert!(auroc(&[], &[0.1]).is_err());
        assert!(auroc(&[f64::NAN], &[0.1]).is_err());
    }

    #[test]
    fn auroc_large_inputs_use_sorted_count() {
        let a: Vec<f64> = (0..4000).map(|i| ((i * 37) % 1000) as f64 / 1000.0).collect();
        let b: Vec<f64> = (0..3000).map(|i| ((i * 53) % 900) as f64 / 1000.0).collect();
        assert!(a.len() as u64 * b.len() as u64 > AUROC_PAIRWISE_LIMIT);
        assert_eq!(twice_u_sorted(&a, &b), twice_u_pairwise(&a, &b));
        let x = auroc(&a, &b).unwrap();
        assert_eq!(x + auroc(&b, &a).unwrap(), 1.0);
    }

    #[test]
    fn brier_and_accuracy_examples() {
        let onehot = vec![sp(&[1.0, 0.0, 0.0]), sp(&[0.0, 1.0, 0.0])];
        assert_eq!(brier(&onehot, &[0, 1]).unwrap(), 0.0);
        assert_eq!(brier(&[sp(&[0.5, 0.5])], &[1]).unwrap(), 0.5);
        assert!((brier(&[sp(&[0.8, 0.2])], &[0]).unwrap() - 0.08).abs() < 1e-12);
        assert_eq!(brier(&onehot, &[1, 0]).unwrap(), 2.0);
        assert!(matches!(brier(&onehot, &[0]), Err(Error::Misaligned { .. })));
        assert!(matches!(brier(&onehot, &[0, 3]), Err(Error::Index { .. })));

        assert_eq!(accuracy(&onehot, &[0, 1]).unwrap(), 1.0);
        assert_eq!(accuracy(&onehot, &[2, 2]).unwrap(), 0.0);
        let mixed = vec![sp(&[0.6, 0.4]), sp(&[0.5, 0.5]), sp(&[0.1, 0.9]), sp(&[0.3, 0.7])];
        assert_eq!(accuracy(&mixed, &[0, 1, 1, 0]).unwrap(), 0.5);
    }

    #[test]
    fn grid_layout() {
        let h = SimplexHistogram::new(4).unwrap();
        assert_eq!(h.counts().len(), 10);
        let cells = h.cells();
        for (n, (i, j, _, _)) in cells.iter().enumerate() {
            assert_eq!(h.index(*i, *j), n);
        }
        let area: f64 = cells.iter().map(|c| c.3).sum();
        assert!((area - 1.0).abs() < 1e-15);
        assert!(cells.iter().all(|c| c.2.iter().all(|v| *v > 0.0)));
    }

    #[test]
    fn histogram_examples() {
        let h = build_histogram(&[sp(&[0.2, 0.3, 0.5])], 50).unwrap();
        assert_eq!(h.total(), 1);
        let vertex = vec![sp(&[1.0, 0.0, 0.0]); 20];
        let h = build_histogram(&vertex, 50).unwrap();
        assert_eq!(h.counts().iter().filter(|c| **c > 0).count(), 1);
        for v in [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.5, 0.5, 0.0]] {
            let h = build_histogram(&[sp(&v)], 7).unwrap();
            assert_eq!(h.total(), 1);
        }
        assert!(matches!(build_histogram(&[sp(&[0.5, 0.5])], 50), Err(Error::UnsupportedK(2))));
    }

    #[test]
    fn uniform_dirichlet_fills_cells_by_area() {
        let n = 1_000_000;
        let bins = 20;
        let samples = DirichletParams::new(vec![1.0; 3]).unwrap().sample(n, 17).unwrap();
        let h = build_histogram(&samples, bins).unwrap();
        assert_eq!(h.total(), n as u64);
        for ((_, _, _, area), &c) in h.cells().iter().zip(h.counts()) {
            let e = n as f64 * area;
            let sd = (e * (1.0 - area)).sqrt();
            assert!((c as f64 - e).abs() < 5.0 * sd, "{c} vs {e}");
        }
    }

    #[test]
    fn kl_histogram_examples() {
        let g = LogitGaussian::isotropic(vec![-1.0, 2.0, -1.0], 1.0).unwrap();
        let a = build_histogram(&g.sample_softmax(5000, 1).unwrap(), 20).unwrap();
        assert_eq!(kl_hist_vs_hist(&a, &a).unwrap(), 0.0);

        let left = build_histogram(&[sp(&[0.9, 0.05, 0.05])], 20).unwrap();
        let right = build_histogram(&[sp(&[0.05, 0.05, 0.9])], 20).unwrap();
        let d = kl_hist_vs_hist(&left, &right).unwrap();
        // ε = 1/210 → q̂ = ε/(1 + 210ε) = 1/420.
        assert!((d - 420f64.ln()).abs() < 1e-12);

        let small = |n, seed| build_histogram(&g.sample_softmax(n, seed).unwrap(), 20).unwrap();
        let truth = small(100_000, 99);
        let coarse = kl_hist_vs_hist(&truth, &small(500, 3)).unwrap();
        let fine = kl_hist_vs_hist(&truth, &small(50_000, 3)).unwrap();
        assert!(fine < coarse && fine < 0.05, "{fine} {coarse}");

        assert!(matches!(
            kl_hist_vs_hist(&a, &SimplexHistogram::new(10).unwrap()),
            Err(Error::BinningMismatch(_))
        ));
    }

    #[test]
    fn kl_against_dirichlet() {
        let flat = DirichletParams::new(vec![1.0; 3]).unwrap();
        let masses = dirichlet_cell_masses(&flat, 10).unwrap();
        let h = SimplexHistogram::new(10).unwrap();
        for (m, c) in masses.iter().zip(h.cells()) {
            assert!((m - c.3).abs() < 1e-14);
        }
        let uniform = build_histogram(&flat.sample(200_000, 4).unwrap(), 10).unwrap();
        assert!(kl_hist_vs_dirichlet(&uniform, &flat).unwrap() < 1e-3);

        let alpha = DirichletParams::new(vec![4.0, 3.0, 6.0]).unwrap();
        let h = |n| build_histogram(&alpha.sample(n, 8).unwrap(), 30).unwrap();
        let (a, b) = (kl_hist_vs_dirichlet(&h(2000), &alpha).unwrap(), kl_hist_vs_dirichlet(&h(400_000), &alpha).unwrap());
        assert!(b < a && b < 0.01, "{b} {a}");
        assert!(matches!(
            kl_hist_vs_dirichlet(&uniform, &DirichletParams::new(vec![1.0; 4]).unwrap()),
            Err(Error::UnsupportedK(4))
        ));
    }

    proptest! {
        #[test]
        fn auroc_is_antisymmetric(
            a in prop::collection::vec(0u8..20, 1..40),
            b in prop::collection::vec(0u8..20, 1..40),
        ) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            prop_assert_eq!(auroc(&a, &b).unwrap() + auroc(&b, &a).unwrap(), 1.0);
            prop_assert_eq!(twice_u_sorted(&a, &b), twice_u_pairwise(&a, &b));
        }

        #[test]
        fn brier_is_bounded(p in prop::collection::vec(0.0f64..1.0, 2..6), y in 0usize..6) {
            let s: f64 = p.iter().sum::<f64>() + 1e-9;
            let mut v: Vec<f64> = p.iter().map(|x| x / s).collect();
            let rest = 1.0 - v.iter().sum::<f64>();
            v[0] += rest;
            let point = SimplexPoint::new(v).unwrap();
            let y = y % point.len();
            let b = brier(&[point], &[y]).unwrap();
            prop_assert!((0.0..=2.0).contains(&b));
        }

        #[test]
        fn histograms_conserve_counts_and_kl_is_nonnegative(seed in 0u64..200, n in 1usize..3000) {
            let alpha = DirichletParams::new(vec![0.5, 2.0, 1.5]).unwrap();
            let s = alpha.sample(n, seed).unwrap();
            let h = build_histogram(&s, 13).unwrap();
            prop_assert_eq!(h.total(), n as u64);
            prop_assert_eq!(h.counts().iter().sum::<u64>(), n as u64);
            let other = build_histogram(&alpha.sample(500, seed + 1).unwrap(), 13).unwrap();
            prop_assert!(kl_hist_vs_hist(&h, &other).unwrap() >= 0.0);
            prop_assert!(kl_hist_vs_dirichlet(&h, &alpha).unwrap() >= 0.0);
        }
    }
}
