//! Adam training loop over encoded clips.

use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bank::EventClass;
use crate::caption::{schedule_to_matrix, DEFAULT_RESOLUTION};
use crate::error::Error;
use crate::rngutil;
use crate::scene::ManifestRecord;
use crate::Result;

use super::codec::{align_to_frames, toy_encode, AUX_CHANNELS};
use super::model::{Denoiser, DenoiserConfig, Gradients};
use super::schedule::{make_schedule, NoiseSchedule};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    /// Linear decay to `lr * lr_final_frac` over the run.
    pub lr_final_frac: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Probability of dropping the whole condition (timestamp matrix and
    /// event embedding together) for classifier-free guidance.
    pub cond_dropout: f64,
    /// SNR clamp for the loss weight.
    pub gamma: f64,
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub seed: u64,
    pub hidden: usize,
    pub embed: usize,
    pub time: usize,
    /// Ablation: zero the timestamp matrix and embedding for every clip.
    pub zero_condition: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 15,
            lr: 3e-3,
            lr_final_frac: 0.1,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            cond_dropout: 0.1,
            gamma: 5.0,
            steps: 50,
            beta_start: 0.004,
            beta_end: 0.18,
            seed: 0,
            hidden: 64,
            embed: 16,
            time: 8,
            zero_condition: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lr <= 0.0 || !(0.0..=1.0).contains(&self.cond_dropout) || self.gamma <= 0.0 {
            return Err(Error::InvalidConfig("bad training hyperparameters".into()));
        }
        if !(0.0..=1.0).contains(&self.lr_final_frac) {
            return Err(Error::InvalidConfig("lr_final_frac must be in [0,1]".into()));
        }
        Ok(())
    }

    pub fn schedule(&self) -> Result<NoiseSchedule> {
        make_schedule(self.steps, self.beta_start, self.beta_end)
    }
}

/// One clip ready for training: clean latent, aligned condition, active
/// class ids.
#[derive(Debug, Clone)]
pub struct TrainItem {
    pub clip_id: String,
    pub latent: Array2<f64>,
    pub cond: Array2<f64>,
    pub active: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    pub lr: f64,
}

/// Encode manifest clips into training items. Wavs are resolved relative
/// to `manifest_dir`.
pub fn encode_dataset(
    records: &[ManifestRecord],
    manifest_dir: &Path,
    classes: &[EventClass],
) -> Result<Vec<TrainItem>> {
    let names: Vec<String> = classes.iter().map(|c| c.name.clone()).collect();
    let mut items = Vec::with_capacity(records.len());
    for rec in records {
        let audio = crate::audio::read_wav(&manifest_dir.join(&rec.wav))?;
        let latent = toy_encode(&audio, classes)?;
        let schedule = rec.to_schedule();
        let matrix = schedule_to_matrix(&schedule, &names, DEFAULT_RESOLUTION)?;
        let cond = align_to_frames(&matrix, latent.frames());
        let active: Vec<usize> = classes
            .iter()
            .filter(|c| schedule.entries.contains_key(&c.name))
            .map(|c| c.id)
            .collect();
        items.push(TrainItem {
            clip_id: rec.clip_id.clone(),
            latent: latent.data,
            cond,
            active,
        });
    }
    Ok(items)
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: usize,
}

impl Adam {
    fn new(shapes: &[usize]) -> Self {
        Self {
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]], cfg: &TrainConfig, lr: f64) {
        self.t += 1;
        let b1 = cfg.adam_beta1;
        let b2 = cfg.adam_beta2;
        let bc1 = 1.0 - b1.powi(self.t as i32);
        let bc2 = 1.0 - b2.powi(self.t as i32);
        for (s, (p, g)) in params.iter_mut().zip(grads.iter()).enumerate() {
            let m = &mut self.m[s];
            let v = &mut self.v[s];
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + cfg.adam_eps);
            }
        }
    }
}

fn grad_slices(g: &Gradients) -> Vec<&[f64]> {
    vec![
        g.w1.as_slice().unwrap(),
        g.b1.as_slice().unwrap(),
        g.w2.as_slice().unwrap(),
        g.b2.as_slice().unwrap(),
        g.w3.as_slice().unwrap(),
        g.b3.as_slice().unwrap(),
        g.film_s1.as_slice().unwrap(),
        g.film_t1.as_slice().unwrap(),
        g.film_s2.as_slice().unwrap(),
        g.film_t2.as_slice().unwrap(),
        g.embedding.as_slice().unwrap(),
    ]
}

/// Train a denoiser on encoded clips. Deterministic for a fixed config
/// and item order.
pub fn train(
    items: &[TrainItem],
    classes: &[EventClass],
    config: &TrainConfig,
) -> Result<(Denoiser, Vec<EpochLog>)> {
    config.validate()?;
    if items.is_empty() {
        return Err(Error::InvalidConfig("no training items".into()));
    }
    let schedule = config.schedule()?;
    let latent = items[0].latent.ncols();
    if latent != classes.len() + AUX_CHANNELS {
        return Err(Error::ShapeMismatch(format!(
            "latent width {latent} does not match {} classes",
            classes.len()
        )));
    }
    let model_config = DenoiserConfig {
        classes: classes.len(),
        latent,
        hidden: config.hidden,
        embed: config.embed,
        time: config.time,
    };
    let mut model = Denoiser::init(model_config, config.seed);
    let shapes: Vec<usize> = {
        let mut m = model.clone();
        m.param_slices().iter().map(|s| s.len()).collect()
    };
    let mut adam = Adam::new(&shapes);
    let mut logs = Vec::with_capacity(config.epochs);
    let total_updates = (config.epochs * items.len()).max(1) as f64;
    let mut update = 0usize;
    let zero_cond = Array2::<f64>::zeros(items[0].cond.dim());

    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..items.len()).collect();
        let mut epoch_rng = rngutil::rng_for(config.seed, 0x7a_0000 + epoch as u64);
        order.shuffle(&mut epoch_rng);
        let mut loss_sum = 0.0;
        let mut lr_last = config.lr;
        for &idx in &order {
            let item = &items[idx];
            let frac = update as f64 / total_updates;
            let lr = config.lr * (1.0 - (1.0 - config.lr_final_frac) * frac);
            lr_last = lr;
            update += 1;
            let drop_cond = config.zero_condition
                || epoch_rng.gen_range(0.0..1.0) < config.cond_dropout;
            let (cond, active): (&Array2<f64>, &[usize]) = if drop_cond {
                (&zero_cond, &[])
            } else {
                (&item.cond, &item.active)
            };
            let zero_sized;
            let cond_view = if cond.nrows() == item.latent.nrows() {
                cond
            } else {
                // Clip lengths can differ by a frame after encoding; pad or
                // crop the dropped-condition zeros lazily.
                zero_sized = Array2::<f64>::zeros((item.latent.nrows(), classes.len()));
                &zero_sized
            };
            let (loss, grads) =
                model.loss(&item.latent, cond_view, active, &schedule, config.gamma, &mut epoch_rng)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            loss_sum += loss;
            let grad_refs = grad_slices(&grads);
            let mut params = model.param_slices();
            adam.step(&mut params, &grad_refs, config, lr);
        }
        let mean_loss = loss_sum / items.len() as f64;
        if !mean_loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        logs.push(EpochLog {
            epoch,
            mean_loss,
            lr: lr_last,
        });
    }
    model.trained = config.epochs > 0;
    Ok((model, logs))
}
