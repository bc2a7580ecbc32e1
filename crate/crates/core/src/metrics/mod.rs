//! Evaluation measures: exact Wasserstein-1 between equal-size point sets,
//! repeated-sampling statistics, MST spread, high-quality ratios,
//! cumulative histograms, the real/generated distance triple, and Pearson
//! correlation.

mod assignment;

pub use assignment::min_cost_assignment;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::dist;
use crate::quality::QualityScore;
use crate::rng::derived_rng;

fn check_points(a: &[Vec<f64>], label: &str) -> Result<usize> {
    let d = a.first().map_or(0, Vec::len);
    if a.iter().any(|p| p.len() != d) {
        return Err(Error::validation(format!("{label} points differ in dimension")));
    }
    Ok(d)
}

/// Exact W1 between two equal-size empirical distributions with Euclidean
/// ground cost: the mean edge length of a minimum-cost perfect matching.
pub fn wasserstein1(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::validation(format!(
            "W1 compares equal-size sets, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::validation("W1 of empty sets"));
    }
    let (da, db) = (check_points(a, "first")?, check_points(b, "second")?);
    if da != db {
        return Err(Error::validation("W1 point sets differ in dimension"));
    }
    let cost: Vec<Vec<f64>> = a
        .iter()
        .map(|p| b.iter().map(|q| dist(p, q)).collect())
        .collect();
    let (_, total) = min_cost_assignment(&cost)?;
    Ok((total / a.len() as f64).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepeatedW1Stats {
    pub mean: f64,
    /// Population (1/n) standard deviation.
    pub std: f64,
    pub runs: usize,
}

impl RepeatedW1Stats {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::validation("repeated statistics need at least 2 runs"));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Ok(RepeatedW1Stats {
            mean,
            std: var.sqrt(),
            runs: values.len(),
        })
    }

    /// True when the means differ by more than twice the larger std.
    pub fn separated_from(&self, other: &RepeatedW1Stats) -> bool {
        (self.mean - other.mean).abs() > 2.0 * self.std.max(other.std)
    }
}

/// Draw `runs` generated sets the size of `reference` and summarize their W1.
/// Run `r` uses its own stream derived from `(seed, r)`.
pub fn repeated_w1<F>(
    mut generator: F,
    reference: &[Vec<f64>],
    runs: usize,
    seed: u64,
) -> Result<RepeatedW1Stats>
where
    F: FnMut(usize, &mut crate::rng::SimRng) -> Result<Vec<Vec<f64>>>,
{
    if runs < 2 {
        return Err(Error::validation("repeated W1 needs runs >= 2"));
    }
    let values = (0..runs)
        .map(|r| {
            let mut rng = derived_rng(seed, &format!("repeated-w1/{r}"));
            let generated = generator(reference.len(), &mut rng)?;
            wasserstein1(&generated, reference)
        })
        .collect::<Result<Vec<_>>>()?;
    RepeatedW1Stats::from_values(&values)
}

/// Total edge length of a Euclidean minimum spanning tree (dense Prim).
pub fn mst_total_length(points: &[Vec<f64>]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::validation("MST of an empty point set"));
    }
    check_points(points, "MST")?;
    let n = points.len();
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    best[0] = 0.0;
    let mut total = 0.0;
    for _ in 0..n {
        let mut u = usize::MAX;
        let mut u_cost = f64::INFINITY;
        for (i, (&b, &t)) in best.iter().zip(&in_tree).enumerate() {
            if !t && b < u_cost {
                u_cost = b;
                u = i;
            }
        }
        in_tree[u] = true;
        total += u_cost;
        for v in 0..n {
            if !in_tree[v] {
                let d = dist(&points[u], &points[v]);
                if d < best[v] {
                    best[v] = d;
                }
            }
        }
    }
    Ok(total)
}

/// Fraction of scores strictly above the threshold.
pub fn hq_ratio(scores: &[QualityScore], threshold: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::validation("hq ratio of an empty score list"));
    }
    let above = scores.iter().filter(|s| s.value() > threshold).count();
    Ok(above as f64 / scores.len() as f64)
}

/// `counts[j] = |{s : s <= edges[j]}|`.
pub fn cumulative_histogram(scores: &[QualityScore], edges: &[f64]) -> Result<Vec<usize>> {
    if edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::validation("histogram edges must be strictly increasing"));
    }
    let mut sorted: Vec<f64> = scores.iter().map(|s| s.value()).collect();
    sorted.sort_by(f64::total_cmp);
    Ok(edges
        .iter()
        .map(|e| sorted.partition_point(|s| s <= e))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceTriple {
    pub d_rr: f64,
    pub d_gg: f64,
    pub d_rg: f64,
}

/// Set-level W1 between two real halves, two generated sets, and the first
/// real half against the first generated set.
pub fn distance_triple(
    real_a: &[Vec<f64>],
    real_b: &[Vec<f64>],
    gen_1: &[Vec<f64>],
    gen_2: &[Vec<f64>],
) -> Result<DistanceTriple> {
    let n = real_a.len();
    if [real_b.len(), gen_1.len(), gen_2.len()].iter().any(|&m| m != n) {
        return Err(Error::validation("distance triple needs four equal-size sets"));
    }
    Ok(DistanceTriple {
        d_rr: wasserstein1(real_a, real_b)?,
        d_gg: wasserstein1(gen_1, gen_2)?,
        d_rg: wasserstein1(real_a, gen_1)?,
    })
}

/// Split interleaved real latents into halves: even positions and odd
/// positions. Sources listed as (original, re-upload) pairs land on
/// opposite sides.
pub fn interleaved_halves(points: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let half = points.len() / 2;
    let a = points.iter().step_by(2).take(half).cloned().collect();
    let b = points.iter().skip(1).step_by(2).take(half).cloned().collect();
    (a, b)
}

/// Smallest distance between a point of `a` and a point of `b`.
pub fn min_nn_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::validation("nearest-neighbour distance of an empty set"));
    }
    Ok(a.iter()
        .flat_map(|p| b.iter().map(move |q| dist(p, q)))
        .fold(f64::INFINITY, f64::min))
}

/// Sample Pearson correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::validation(
            "correlation needs two equal-length series of at least 2 values",
        ));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Numerical("correlation undefined for a constant series".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Uniform random subset of `k` indices out of `n`, in increasing order.
pub fn subsample_indices<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    crate::rng::fisher_yates(&mut idx, rng);
    idx.truncate(k.min(n));
    idx.sort_unstable();
    idx
}
