use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::net::{Activations, BackwardScratch, EpsilonNet};
use super::schedule::{write_time_embedding, NoiseSchedule};
use crate::error::{Error, Result};
use crate::rng::{derived_rng, fisher_yates, rng_from_seed};

/// The `(t, eps)` pair drawn for one training item.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDraw {
    pub t: usize,
    pub eps: Vec<f64>,
}

pub fn draw_noise<R: Rng + ?Sized>(sched: &NoiseSchedule, dim: usize, rng: &mut R) -> NoiseDraw {
    let t = rng.random_range(1..=sched.steps());
    let eps = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    NoiseDraw { t, eps }
}

/// Reusable buffers for one batch evaluation.
struct Workspace {
    acts: Activations,
    scratch: BackwardScratch,
    g_out: Vec<f64>,
}

impl Workspace {
    fn new(net: &EpsilonNet) -> Self {
        Workspace {
            acts: Activations::new(net.shape()),
            scratch: BackwardScratch::new(net.shape()),
            g_out: vec![0.0; net.shape().data_dim],
        }
    }
}

fn check_batch(net: &EpsilonNet, batch: &[Vec<f64>]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::validation("empty training batch"));
    }
    let d = net.shape().data_dim;
    if let Some(bad) = batch.iter().find(|y| y.len() != d) {
        return Err(Error::validation(format!(
            "batch item has dimension {}, network expects {d}",
            bad.len()
        )));
    }
    Ok(())
}

/// Mean squared noise-prediction error and, optionally, its exact gradient
/// for explicitly supplied draws.
fn evaluate(
    net: &EpsilonNet,
    sched: &NoiseSchedule,
    batch: &[&[f64]],
    draws: &[NoiseDraw],
    mut grad: Option<&mut [f64]>,
    ws: &mut Workspace,
) -> f64 {
    let d = net.shape().data_dim;
    let inv_b = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    for (y0, draw) in batch.iter().zip(draws) {
        let ab = sched.alpha_bar(draw.t);
        let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
        let input = ws.acts.input_mut();
        for i in 0..d {
            input[i] = a * y0[i] + b * draw.eps[i];
        }
        write_time_embedding(draw.t, &mut input[d..]);
        net.forward(&mut ws.acts);
        let mut item = 0.0;
        for i in 0..d {
            let r = ws.acts.output[i] - draw.eps[i];
            item += r * r;
            ws.g_out[i] = 2.0 * r * inv_b;
        }
        loss += item * inv_b;
        if let Some(g) = grad.as_deref_mut() {
            net.backward(&ws.acts, &ws.g_out, g, &mut ws.scratch);
        }
    }
    loss
}

/// Loss and gradient for fixed draws; the gradient has one entry per
/// network parameter.
pub fn loss_and_gradient_with(
    net: &EpsilonNet,
    sched: &NoiseSchedule,
    batch: &[Vec<f64>],
    draws: &[NoiseDraw],
) -> Result<(f64, Vec<f64>)> {
    check_batch(net, batch)?;
    if draws.len() != batch.len() {
        return Err(Error::validation("one noise draw per batch item is required"));
    }
    for dr in draws {
        sched.check_step(dr.t)?;
        if dr.eps.len() != net.shape().data_dim {
            return Err(Error::validation("noise draw has the wrong dimension"));
        }
    }
    let refs: Vec<&[f64]> = batch.iter().map(Vec::as_slice).collect();
    let mut grad = vec![0.0; net.params().len()];
    let mut ws = Workspace::new(net);
    let loss = evaluate(net, sched, &refs, draws, Some(&mut grad), &mut ws);
    Ok((loss, grad))
}

/// Draw `t ~ U{1..T}` and `eps ~ N(0, I)` per item, then evaluate.
pub fn loss_and_gradient<R: Rng + ?Sized>(
    net: &EpsilonNet,
    sched: &NoiseSchedule,
    batch: &[Vec<f64>],
    rng: &mut R,
) -> Result<(f64, Vec<f64>)> {
    let d = net.shape().data_dim;
    let draws: Vec<NoiseDraw> = batch.iter().map(|_| draw_noise(sched, d, rng)).collect();
    loss_and_gradient_with(net, sched, batch, &draws)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Fixed noise draws per validation point; more draws steady the
    /// early-stopping signal.
    pub val_repeats: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_epochs: 2000,
            batch_size: 64,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            patience: 100,
            val_repeats: 16,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::validation("learning rate must be finite and >= 0"));
        }
        if self.batch_size == 0 || self.val_repeats == 0 {
            return Err(Error::validation("batch size and validation repeats must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::validation("Adam decay rates must lie in [0, 1)"));
        }
        if !(self.adam_eps > 0.0) {
            return Err(Error::validation("Adam epsilon must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation loss (the last
    /// epoch when no validation data is given).
    pub net: EpsilonNet,
    pub curve: Vec<EpochLoss>,
    pub best_epoch: usize,
}

pub fn loss_curve_csv(curve: &[EpochLoss]) -> String {
    let mut out = String::from("epoch,train_loss,val_loss\n");
    for e in curve {
        let val = e.val_loss.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{val}\n", e.epoch, e.train_loss));
    }
    out
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    fn update(&mut self, params: &mut [f64], grad: &[f64], cfg: &TrainConfig) {
        self.step += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.step);
        let c2 = 1.0 - cfg.beta2.powi(self.step);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.adam_eps);
        }
    }
}

/// Minibatch Adam on the noise-prediction objective with early stopping on
/// a validation loss evaluated under draws fixed once per run.
pub fn train(
    net: EpsilonNet,
    sched: &NoiseSchedule,
    train_set: &[Vec<f64>],
    validation: &[Vec<f64>],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    check_batch(&net, train_set)?;
    if !validation.is_empty() {
        check_batch(&net, validation)?;
    }
    let d = net.shape().data_dim;
    let mut shuffle_rng = derived_rng(cfg.seed, "diffusion/shuffle");
    let mut noise_rng = derived_rng(cfg.seed, "diffusion/noise");
    let mut val_rng = rng_from_seed(crate::rng::derive_seed(cfg.seed, "diffusion/validation"));
    let val_refs: Vec<&[f64]> = (0..cfg.val_repeats)
        .flat_map(|_| validation.iter().map(Vec::as_slice))
        .collect();
    let val_draws: Vec<NoiseDraw> = val_refs
        .iter()
        .map(|_| draw_noise(sched, d, &mut val_rng))
        .collect();

    let mut net = net;
    let mut adam = Adam::new(net.params().len());
    let mut ws = Workspace::new(&net);
    let mut grad = vec![0.0; net.params().len()];
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut batch: Vec<&[f64]> = Vec::with_capacity(cfg.batch_size);
    let mut draws: Vec<NoiseDraw> = Vec::with_capacity(cfg.batch_size);

    let mut curve = Vec::new();
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    for epoch in 1..=cfg.max_epochs {
        fisher_yates(&mut order, &mut shuffle_rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            draws.clear();
            for &i in chunk {
                batch.push(&train_set[i]);
                draws.push(draw_noise(sched, d, &mut noise_rng));
            }
            grad.iter_mut().for_each(|g| *g = 0.0);
            let loss = evaluate(&net, sched, &batch, &draws, Some(&mut grad), &mut ws);
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            total += loss * chunk.len() as f64;
            adam.update(net.params_mut(), &grad, cfg);
        }
        let train_loss = total / train_set.len() as f64;
        let val_loss = (!validation.is_empty())
            .then(|| evaluate(&net, sched, &val_refs, &val_draws, None, &mut ws));
        if let Some(v) = val_loss {
            if !v.is_finite() {
                return Err(Error::Diverged { epoch, loss: v });
            }
        }
        curve.push(EpochLoss {
            epoch,
            train_loss,
            val_loss,
        });

        let Some(v) = val_loss else { continue };
        match &mut best {
            Some((best_loss, best_epoch, params)) if v >= *best_loss => {
                if epoch - *best_epoch >= cfg.patience {
                    let net = EpsilonNet::from_params(*net.shape(), params.clone())?;
                    let best_epoch = *best_epoch;
                    return Ok(TrainOutcome {
                        net,
                        curve,
                        best_epoch,
                    });
                }
            }
            _ => best = Some((v, epoch, net.params().to_vec())),
        }
    }
    match best {
        Some((_, best_epoch, params)) => Ok(TrainOutcome {
            net: EpsilonNet::from_params(*net.shape(), params)?,
            curve,
            best_epoch,
        }),
        None => Ok(TrainOutcome {
            best_epoch: curve.len(),
            net,
            curve,
        }),
    }
}
