//! Full-covariance Gaussian mixture baseline, fit by EM.
//!
//! Each M-step sets `Sigma_k = S_k + (N / N_k) * reg * I`, which is the exact
//! EM update for the log-likelihood penalized by `-1/2 tr(N reg Sigma_k^{-1})`
//! per component. That keeps every covariance's smallest eigenvalue at or
//! above `reg`, makes `M = 1` the closed-form `S + reg I`, and keeps the
//! monitored (penalized) objective monotone.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, covariance, forward_substitute, mean_vector, sq_dist, Matrix};
use crate::rng::{derive_seed, rng_from_seed};

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const COLLAPSE_WEIGHT: f64 = 1e-12;
const MAX_REINITS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmConfig {
    pub restarts: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for GmmConfig {
    fn default() -> Self {
        GmmConfig {
            restarts: 3,
            tol: 1e-8,
            max_iter: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMetadata {
    pub seed: u64,
    pub iterations: usize,
    pub objective: f64,
    pub restart: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    pub m: usize,
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covariances: Vec<Matrix>,
    pub reg: f64,
    pub fit: FitMetadata,
}

/// A fitted model plus the per-iteration penalized log-likelihood trace of
/// the winning restart.
#[derive(Debug, Clone)]
pub struct GmmFit {
    pub model: GmmModel,
    pub objective_trace: Vec<f64>,
}

struct Component {
    chol: Matrix,
    log_norm: f64,
    inv_trace: f64,
}

impl Component {
    fn new(cov: &Matrix) -> Result<Self> {
        let chol = cholesky(cov)?;
        let p = cov.rows();
        let log_det: f64 = (0..p).map(|i| chol[(i, i)].ln()).sum::<f64>() * 2.0;
        let mut inv_trace = 0.0;
        let mut e = vec![0.0; p];
        for j in 0..p {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            inv_trace += forward_substitute(&chol, &e).iter().map(|v| v * v).sum::<f64>();
        }
        Ok(Component {
            chol,
            log_norm: -0.5 * (p as f64 * LN_2PI + log_det),
            inv_trace,
        })
    }

    fn log_pdf(&self, x: &[f64], mean: &[f64]) -> f64 {
        let diff: Vec<f64> = x.iter().zip(mean).map(|(a, b)| a - b).collect();
        let w = forward_substitute(&self.chol, &diff);
        self.log_norm - 0.5 * w.iter().map(|v| v * v).sum::<f64>()
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn kmeans_plus_plus<R: Rng + ?Sized>(x: &[Vec<f64>], m: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut centers = vec![x[rng.random_range(0..x.len())].clone()];
    let mut d2: Vec<f64> = x.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < m {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut chosen = x.len() - 1;
            for (i, w) in d2.iter().enumerate() {
                if target < *w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..x.len())
        };
        centers.push(x[idx].clone());
        for (d, p) in d2.iter_mut().zip(x) {
            *d = d.min(sq_dist(p, &centers[centers.len() - 1]));
        }
    }
    centers
}

struct EmState {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    covs: Vec<Matrix>,
}

/// E-step: responsibilities and the penalized objective of `state`.
fn e_step(x: &[Vec<f64>], state: &EmState, penalty: f64) -> Result<(Vec<Vec<f64>>, f64)> {
    let comps = state
        .covs
        .iter()
        .map(Component::new)
        .collect::<Result<Vec<_>>>()?;
    let m = comps.len();
    let mut resp = Vec::with_capacity(x.len());
    let mut ll = 0.0;
    let mut logp = vec![0.0; m];
    for p in x {
        for k in 0..m {
            logp[k] = state.weights[k].ln() + comps[k].log_pdf(p, &state.means[k]);
        }
        let lse = log_sum_exp(&logp);
        ll += lse;
        resp.push(logp.iter().map(|l| (l - lse).exp()).collect());
    }
    let pen: f64 = comps.iter().map(|c| 0.5 * penalty * c.inv_trace).sum();
    Ok((resp, ll - pen))
}

fn m_step(x: &[Vec<f64>], resp: &[Vec<f64>], m: usize, reg: f64) -> Result<EmState> {
    let n = x.len() as f64;
    let p = x[0].len();
    let mut weights = Vec::with_capacity(m);
    let mut means = Vec::with_capacity(m);
    let mut covs = Vec::with_capacity(m);
    for k in 0..m {
        let nk: f64 = resp.iter().map(|r| r[k]).sum();
        if nk / n < COLLAPSE_WEIGHT {
            return Err(Error::Numerical(format!("component {k} collapsed")));
        }
        let mut mu = vec![0.0; p];
        for (xi, r) in x.iter().zip(resp) {
            for (m_, v) in mu.iter_mut().zip(xi) {
                *m_ += r[k] * v;
            }
        }
        mu.iter_mut().for_each(|v| *v /= nk);
        let mut cov = Matrix::zeros(p, p);
        let mut diff = vec![0.0; p];
        for (xi, r) in x.iter().zip(resp) {
            let w = r[k];
            for ((d, a), b) in diff.iter_mut().zip(xi).zip(&mu) {
                *d = a - b;
            }
            for i in 0..p {
                let wi = w * diff[i];
                for j in i..p {
                    cov[(i, j)] += wi * diff[j];
                }
            }
        }
        let ridge = reg * n / nk;
        for i in 0..p {
            for j in i..p {
                let v = cov[(i, j)] / nk + if i == j { ridge } else { 0.0 };
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }
        weights.push(nk / n);
        means.push(mu);
        covs.push(cov);
    }
    Ok(EmState {
        weights,
        means,
        covs,
    })
}

struct RunResult {
    state: EmState,
    trace: Vec<f64>,
    iterations: usize,
}

fn run_em(
    x: &[Vec<f64>],
    m: usize,
    init_means: Vec<Vec<f64>>,
    global: &Matrix,
    reg: f64,
    cfg: &GmmConfig,
) -> Result<RunResult> {
    let p = global.rows();
    let mut init_cov = global.clone();
    for i in 0..p {
        init_cov[(i, i)] += reg;
    }
    let mut state = EmState {
        weights: vec![1.0 / m as f64; m],
        means: init_means,
        covs: vec![init_cov; m],
    };
    let penalty = x.len() as f64 * reg;
    let n = x.len() as f64;
    let (mut resp, mut obj) = e_step(x, &state, penalty)?;
    let mut trace = vec![obj];
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        iterations += 1;
        state = m_step(x, &resp, m, reg)?;
        let (r, o) = e_step(x, &state, penalty)?;
        resp = r;
        trace.push(o);
        let improvement = (o - obj) / n;
        obj = o;
        if improvement < cfg.tol {
            break;
        }
    }
    Ok(RunResult {
        state,
        trace,
        iterations,
    })
}

/// `reg = 1e-6 * trace(S) / p`, floored at `1e-12` for degenerate data.
pub fn regularization(x: &[Vec<f64>]) -> f64 {
    let mu = mean_vector(x);
    let s = covariance(x, &mu);
    (1e-6 * s.trace() / mu.len() as f64).max(1e-12)
}

pub fn fit_em(x: &[Vec<f64>], m: usize, seed: u64, cfg: &GmmConfig) -> Result<GmmFit> {
    if m == 0 {
        return Err(Error::validation("mixture needs at least one component"));
    }
    if x.len() < m {
        return Err(Error::validation(format!(
            "{} points cannot support {m} components",
            x.len()
        )));
    }
    let p = x[0].len();
    if p == 0 || x.iter().any(|v| v.len() != p) {
        return Err(Error::validation("points must share a positive dimension"));
    }
    let mu = mean_vector(x);
    let global = covariance(x, &mu);
    let reg = regularization(x);

    let mut best: Option<(RunResult, usize, u64)> = None;
    for restart in 0..cfg.restarts.max(1) {
        let mut attempt = 0;
        let run = loop {
            let run_seed = derive_seed(seed, &format!("gmm/restart{restart}/attempt{attempt}"));
            let mut rng = rng_from_seed(run_seed);
            let init = kmeans_plus_plus(x, m, &mut rng);
            match run_em(x, m, init, &global, reg, cfg) {
                Ok(r) => break (r, run_seed),
                Err(Error::Numerical(msg)) => {
                    attempt += 1;
                    if attempt >= MAX_REINITS {
                        return Err(Error::Numerical(format!(
                            "EM failed after {MAX_REINITS} re-initializations: {msg}"
                        )));
                    }
                }
                Err(e) => return Err(e),
            }
        };
        let better = match &best {
            None => true,
            Some((b, _, _)) => run.0.trace.last() > b.trace.last(),
        };
        if better {
            best = Some((run.0, restart, run.1));
        }
    }
    let (run, restart, run_seed) = best.expect("at least one restart");
    let objective = *run.trace.last().expect("trace is non-empty");
    Ok(GmmFit {
        model: GmmModel {
            m,
            weights: run.state.weights,
            means: run.state.means,
            covariances: run.state.covs,
            reg,
            fit: FitMetadata {
                seed: run_seed,
                iterations: run.iterations,
                objective,
                restart,
            },
        },
        objective_trace: run.trace,
    })
}

impl GmmModel {
    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    /// Posterior component probabilities for each point.
    pub fn responsibilities(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let state = EmState {
            weights: self.weights.clone(),
            means: self.means.clone(),
            covs: self.covariances.clone(),
        };
        Ok(e_step(x, &state, 0.0)?.0)
    }

    pub fn log_likelihood(&self, x: &[Vec<f64>]) -> Result<f64> {
        let state = EmState {
            weights: self.weights.clone(),
            means: self.means.clone(),
            covs: self.covariances.clone(),
        };
        Ok(e_step(x, &state, 0.0)?.1)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("gmm serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let g: GmmModel = serde_json::from_str(text).map_err(|e| Error::json("gmm model", e))?;
        if g.m == 0 || g.weights.len() != g.m || g.means.len() != g.m || g.covariances.len() != g.m {
            return Err(Error::validation("gmm file has inconsistent component counts"));
        }
        Ok(g)
    }
}

pub fn gmm_sample<R: Rng + ?Sized>(model: &GmmModel, n: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    let chols = model
        .covariances
        .iter()
        .map(cholesky)
        .collect::<Result<Vec<_>>>()?;
    let p = model.dim();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.random_range(0.0..1.0);
        let mut acc = 0.0;
        let mut k = model.m - 1;
        for (i, w) in model.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                k = i;
                break;
            }
        }
        let xi: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        let offset = chols[k].matvec(&xi);
        out.push(model.means[k].iter().zip(offset).map(|(m, o)| m + o).collect());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn blobs(seed: u64, centers: &[[f64; 2]], per: usize, spread: f64) -> Vec<Vec<f64>> {
        let mut rng = rng_from_seed(seed);
        centers
            .iter()
            .flat_map(|c| {
                (0..per)
                    .map(|_| {
                        vec![
                            c[0] + spread * rng.sample::<f64, _>(StandardNormal),
                            c[1] + spread * rng.sample::<f64, _>(StandardNormal),
                        ]
                    })
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    #[test]
    fn single_component_is_closed_form() {
        let x = blobs(1, &[[1.0, -2.0], [3.0, 0.5]], 50, 0.7);
        let mu = mean_vector(&x);
        let mut s = covariance(&x, &mu);
        let reg = regularization(&x);
        for i in 0..2 {
            s[(i, i)] += reg;
        }
        for seed in [0, 99] {
            let g = fit_em(&x, 1, seed, &GmmConfig::default()).unwrap().model;
            assert!((g.weights[0] - 1.0).abs() < 1e-12);
            assert!(g.means[0].iter().zip(&mu).all(|(a, b)| (a - b).abs() < 1e-12));
            assert!(g.covariances[0].max_abs_diff(&s) < 1e-12);
        }
    }

    #[test]
    fn separated_clusters_recovered() {
        let x = blobs(2, &[[-10.0, 0.0], [10.0, 0.0]], 200, 0.3);
        let g = fit_em(&x, 2, 7, &GmmConfig::default()).unwrap().model;
        let mut means = g.means.clone();
        means.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert!((means[0][0] + 10.0).abs() < 0.1 && means[0][1].abs() < 0.1);
        assert!((means[1][0] - 10.0).abs() < 0.1 && means[1][1].abs() < 0.1);
    }

    #[test]
    fn responsibilities_normalized_and_weights_on_simplex() {
        let x = blobs(3, &[[0.0, 0.0], [4.0, 4.0], [-3.0, 5.0]], 40, 1.0);
        let g = fit_em(&x, 3, 1, &GmmConfig::default()).unwrap().model;
        assert!((g.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for r in g.responsibilities(&x).unwrap() {
            assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        for c in &g.covariances {
            let eig = crate::linalg::symmetric_eigen(c).unwrap();
            assert!(eig.values[1] >= g.reg * (1.0 - 1e-9));
        }
    }

    #[test]
    fn errors() {
        let x = blobs(4, &[[0.0, 0.0]], 3, 1.0);
        assert!(fit_em(&x, 4, 0, &GmmConfig::default()).is_err());
        assert!(fit_em(&x, 0, 0, &GmmConfig::default()).is_err());
    }

    #[test]
    fn sampling_examples() {
        let x = vec![vec![2.0, 3.0]; 10];
        let g = fit_em(&x, 1, 0, &GmmConfig::default()).unwrap().model;
        let mut rng = rng_from_seed(1);
        let s = gmm_sample(&g, 200, &mut rng).unwrap();
        let bound = 6.0 * g.reg.sqrt();
        assert!(s.iter().all(|p| (p[0] - 2.0).abs() < bound && (p[1] - 3.0).abs() < bound));
        assert!(gmm_sample(&g, 0, &mut rng).unwrap().is_empty());
    }

    #[test]
    fn component_frequencies_follow_weights() {
        let g = GmmModel {
            m: 3,
            weights: vec![0.2, 0.5, 0.3],
            means: vec![vec![-100.0], vec![0.0], vec![100.0]],
            covariances: vec![Matrix::identity(1); 3],
            reg: 1e-6,
            fit: FitMetadata { seed: 0, iterations: 0, objective: 0.0, restart: 0 },
        };
        let n = 10_000;
        let s = gmm_sample(&g, n, &mut rng_from_seed(5)).unwrap();
        let counts = [
            s.iter().filter(|p| p[0] < -50.0).count(),
            s.iter().filter(|p| p[0].abs() <= 50.0).count(),
            s.iter().filter(|p| p[0] > 50.0).count(),
        ];
        for (c, w) in counts.iter().zip(&g.weights) {
            let sd = (n as f64 * w * (1.0 - w)).sqrt();
            assert!((*c as f64 - n as f64 * w).abs() < 3.0 * sd, "{counts:?}");
        }
    }

    #[test]
    fn json_round_trip() {
        let x = blobs(6, &[[0.0, 0.0], [5.0, 5.0]], 20, 1.0);
        let g = fit_em(&x, 2, 0, &GmmConfig::default()).unwrap().model;
        assert_eq!(GmmModel::from_json(&g.to_json()).unwrap(), g);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn em_objective_is_monotone(seed in 0u64..1000, m in 1usize..5) {
            let mut rng = rng_from_seed(seed);
            let x: Vec<Vec<f64>> = (0..60)
                .map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0) * rng.random_range(0.1..3.0)).collect())
                .collect();
            let fit = fit_em(&x, m, seed, &GmmConfig::default()).unwrap();
            for w in fit.objective_trace.windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0), "{} -> {}", w[0], w[1]);
            }
        }
    }
}
