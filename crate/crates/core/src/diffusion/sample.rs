use rand::Rng;
use rand_distr::StandardNormal;

use super::net::{Activations, EpsilonNet};
use super::schedule::{write_time_embedding, NoiseSchedule};
use crate::error::{Error, Result};

/// Ancestral sampling with posterior variance `sigma_t^2 = beta_t` and no
/// noise on the final step.
pub fn sample<R: Rng + ?Sized>(
    net: &EpsilonNet,
    sched: &NoiseSchedule,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    let d = net.shape().data_dim;
    let mut acts = Activations::new(net.shape());
    let mut out = Vec::with_capacity(n);
    for chain in 0..n {
        let mut y: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        for t in (1..=sched.steps()).rev() {
            let input = acts.input_mut();
            input[..d].copy_from_slice(&y);
            write_time_embedding(t, &mut input[d..]);
            net.forward(&mut acts);
            let (alpha, beta) = (sched.alpha(t), sched.beta(t));
            let coef = beta / (1.0 - sched.alpha_bar(t)).sqrt();
            let scale = 1.0 / alpha.sqrt();
            let sigma = if t > 1 { beta.sqrt() } else { 0.0 };
            for (yi, e) in y.iter_mut().zip(&acts.output) {
                *yi = scale * (*yi - coef * e);
                if sigma > 0.0 {
                    *yi += sigma * rng.sample::<f64, _>(StandardNormal);
                }
            }
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical(format!(
                    "non-finite value in sampling chain {chain} at step {t}"
                )));
            }
        }
        out.push(y);
    }
    Ok(out)
}
