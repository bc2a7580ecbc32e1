//! Denoising diffusion over whitened principal speaker coordinates.
//!
//! Forward process `q(y_t | y_0) = N(sqrt(abar_t) y_0, (1 - abar_t) I)`; the
//! network predicts the injected noise and is trained with plain MSE. New
//! speakers are drawn by ancestral sampling in `y`, completed with a
//! standard-normal residual `z`, and mapped back through the whitening.

mod net;
mod sample;
mod schedule;
mod train;

pub use net::{Activations, BackwardScratch, EpsilonNet, NetShape};
pub use sample::sample;
pub use schedule::{forward_noise, make_schedule, time_embedding, NoiseSchedule, ScheduleSpec};
pub use train::{
    draw_noise, loss_and_gradient, loss_and_gradient_with, loss_curve_csv, train, EpochLoss,
    NoiseDraw, TrainConfig, TrainOutcome,
};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::embedding::{Embedding, EmbeddingSet};
use crate::error::{Error, Result};
use crate::whitening::WhiteningModel;

pub const DIFFUSION_FORMAT_VERSION: u32 = 1;

/// Schedule and trained weights, as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionModel {
    pub format_version: u32,
    pub schedule: NoiseSchedule,
    pub net: EpsilonNet,
}

impl DiffusionModel {
    pub fn new(schedule: NoiseSchedule, net: EpsilonNet) -> Self {
        DiffusionModel {
            format_version: DIFFUSION_FORMAT_VERSION,
            schedule,
            net,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("diffusion model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: DiffusionModel =
            serde_json::from_str(text).map_err(|e| Error::json("diffusion model", e))?;
        if m.format_version != DIFFUSION_FORMAT_VERSION {
            return Err(Error::validation(format!(
                "unsupported diffusion format version {}",
                m.format_version
            )));
        }
        EpsilonNet::from_params(*m.net.shape(), m.net.params().to_vec())?;
        Ok(m)
    }
}

/// Sample `n` speakers: `y` from the diffusion model, `z ~ N(0, I)`, then
/// the inverse whitening. Ids are `gen-<index>`.
pub fn generate_speakers<R: Rng + ?Sized>(
    wm: &WhiteningModel,
    net: &EpsilonNet,
    sched: &NoiseSchedule,
    n: usize,
    rng: &mut R,
) -> Result<EmbeddingSet> {
    let d_prime = wm.d_prime()?;
    if net.shape().data_dim != d_prime {
        return Err(Error::validation(format!(
            "network models {} dimensions but whitening keeps d' = {d_prime}",
            net.shape().data_dim
        )));
    }
    let z_dim = wm.z_dim()?;
    let ys = sample(net, sched, n, rng)?;
    let items = ys
        .into_iter()
        .enumerate()
        .map(|(i, y)| {
            let z: Vec<f64> = (0..z_dim).map(|_| rng.sample(StandardNormal)).collect();
            Ok(Embedding::new(format!("gen-{i}"), wm.inverse(&y, &z)?))
        })
        .collect::<Result<Vec<_>>>()?;
    EmbeddingSet::new(wm.dim(), items)
}
