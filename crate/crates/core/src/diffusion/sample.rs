//! Reverse-process sampling with classifier-free guidance.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::rngutil;
use crate::Result;

use super::model::{normal_draw, Denoiser};
use super::schedule::{reverse_step, NoiseSchedule};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    /// Guidance scale; 1 disables the unconditional pass.
    pub guidance_scale: f64,
    pub seed: u64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            guidance_scale: 3.0,
            seed: 0,
        }
    }
}

/// Draw one latent clip from the reverse chain.
///
/// Guided noise estimate: `eps_u + s * (eps_c - eps_u)`. The injected
/// noise at the final step (n = 1) is zero by construction of the
/// reverse-step coefficient.
pub fn sample(
    model: &Denoiser,
    cond: &Array2<f64>,
    active: &[usize],
    schedule: &NoiseSchedule,
    config: &SampleConfig,
) -> Result<Array2<f64>> {
    if !model.trained {
        return Err(Error::UntrainedModel);
    }
    let frames = cond.nrows();
    if frames == 0 {
        return Err(Error::ShapeMismatch("empty condition".into()));
    }
    let dim = (frames, model.config.latent);
    let zero_cond = Array2::<f64>::zeros((frames, model.config.classes));
    let mut rng = rngutil::rng_for(config.seed, 0x5a17);
    let mut p = Array2::from_shape_fn(dim, |_| normal_draw(&mut rng));
    for n in (1..=schedule.steps).rev() {
        let eps_c = model.forward(&p, cond, active, n, schedule.steps)?;
        let eps_hat = if config.guidance_scale == 1.0 {
            eps_c
        } else {
            let eps_u = model.forward(&p, &zero_cond, &[], n, schedule.steps)?;
            &eps_u + &((&eps_c - &eps_u) * config.guidance_scale)
        };
        let eps_draw = if n > 1 {
            Array2::from_shape_fn(dim, |_| normal_draw(&mut rng))
        } else {
            Array2::zeros(dim)
        };
        p = reverse_step(&p, n, &eps_hat, schedule, &eps_draw)?;
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sample chain".into()));
        }
    }
    Ok(p)
}
