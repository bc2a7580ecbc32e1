use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear variance schedule over steps `t = 1..=T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScheduleSpec", into = "ScheduleSpec")]
pub struct NoiseSchedule {
    spec: ScheduleSpec,
    beta: Vec<f64>,
    alpha: Vec<f64>,
    alpha_bar: Vec<f64>,
}

/// The three numbers a linear schedule is built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSpec {
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        ScheduleSpec {
            steps: 200,
            beta_start: 1e-4,
            beta_end: 0.05,
        }
    }
}

impl TryFrom<ScheduleSpec> for NoiseSchedule {
    type Error = Error;
    fn try_from(s: ScheduleSpec) -> Result<Self> {
        make_schedule(s.steps, s.beta_start, s.beta_end)
    }
}

impl From<NoiseSchedule> for ScheduleSpec {
    fn from(s: NoiseSchedule) -> Self {
        s.spec
    }
}

pub fn make_schedule(steps: usize, beta_start: f64, beta_end: f64) -> Result<NoiseSchedule> {
    if steps == 0 {
        return Err(Error::validation("schedule needs T >= 1"));
    }
    if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
        return Err(Error::validation(format!(
            "need 0 < beta_start <= beta_end < 1, got {beta_start} and {beta_end}"
        )));
    }
    let beta: Vec<f64> = if steps == 1 {
        vec![beta_start]
    } else {
        (0..steps)
            .map(|i| beta_start + i as f64 / (steps - 1) as f64 * (beta_end - beta_start))
            .collect()
    };
    let alpha: Vec<f64> = beta.iter().map(|b| 1.0 - b).collect();
    let alpha_bar = alpha
        .iter()
        .scan(1.0, |acc, a| {
            *acc *= a;
            Some(*acc)
        })
        .collect();
    Ok(NoiseSchedule {
        spec: ScheduleSpec {
            steps,
            beta_start,
            beta_end,
        },
        beta,
        alpha,
        alpha_bar,
    })
}

impl NoiseSchedule {
    pub fn steps(&self) -> usize {
        self.beta.len()
    }

    pub fn spec(&self) -> ScheduleSpec {
        self.spec
    }

    pub fn check_step(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.steps() {
            return Err(Error::validation(format!(
                "step {t} outside [1, {}]",
                self.steps()
            )));
        }
        Ok(())
    }

    /// `t` is 1-based throughout.
    pub fn beta(&self, t: usize) -> f64 {
        self.beta[t - 1]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alpha[t - 1]
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bar[t - 1]
    }
}

/// Sinusoidal embedding: pairs `(sin(t w_i), cos(t w_i))` with
/// `w_i = 10000^(-2i/dim)`.
pub fn time_embedding(t: usize, dim: usize) -> Result<Vec<f64>> {
    if !dim.is_multiple_of(2) {
        return Err(Error::validation(format!("time embedding dim {dim} is odd")));
    }
    let mut out = vec![0.0; dim];
    write_time_embedding(t, &mut out);
    Ok(out)
}

pub(crate) fn write_time_embedding(t: usize, out: &mut [f64]) {
    let dim = out.len();
    let tf = t as f64;
    for i in 0..dim / 2 {
        let freq = 10000f64.powf(-2.0 * i as f64 / dim as f64);
        out[2 * i] = (tf * freq).sin();
        out[2 * i + 1] = (tf * freq).cos();
    }
}

/// `sqrt(abar_t) y0 + sqrt(1 - abar_t) eps`.
pub fn forward_noise(sched: &NoiseSchedule, y0: &[f64], t: usize, eps: &[f64]) -> Result<Vec<f64>> {
    sched.check_step(t)?;
    if y0.len() != eps.len() {
        return Err(Error::validation("y0 and eps differ in dimension"));
    }
    let ab = sched.alpha_bar(t);
    let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
    Ok(y0.iter().zip(eps).map(|(y, e)| a * y + b * e).collect())
}
