//! Per-frame noise-prediction network.
//!
//! Input per frame: noisy latent channels, the timestamp-matrix column,
//! and a sinusoidal step embedding, all concatenated. Two tanh hidden
//! layers with feature-wise affine modulation from a pooled event
//! embedding, then a linear head back to latent channels. Backpropagation
//! is hand-rolled so training stays dependency-free and exactly
//! reproducible.

use indexmap::IndexMap;
use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::rngutil;
use crate::Result;

use super::schedule::{forward_marginal, NoiseSchedule};

pub const CHECKPOINT_SCHEMA: &str = "tempogen-denoiser";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenoiserConfig {
    /// Number of event classes (timestamp rows and embedding entries).
    pub classes: usize,
    /// Latent channels (classes + 2 for the default codec).
    pub latent: usize,
    pub hidden: usize,
    /// Event embedding width.
    pub embed: usize,
    /// Step embedding width (even).
    pub time: usize,
}

impl Default for DenoiserConfig {
    fn default() -> Self {
        Self {
            classes: 18,
            latent: 20,
            hidden: 64,
            embed: 16,
            time: 8,
        }
    }
}

impl DenoiserConfig {
    pub fn input_dim(&self) -> usize {
        self.latent + self.classes + self.time
    }
}

/// Trainable parameters plus config. Created by [`Denoiser::init`] and
/// mutated only by the optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct Denoiser {
    pub config: DenoiserConfig,
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub w3: Array2<f64>,
    pub b3: Array1<f64>,
    pub film_s1: Array2<f64>,
    pub film_t1: Array2<f64>,
    pub film_s2: Array2<f64>,
    pub film_t2: Array2<f64>,
    pub embedding: Array2<f64>,
    pub trained: bool,
}

/// Gradients in the same layout as the parameters.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub w3: Array2<f64>,
    pub b3: Array1<f64>,
    pub film_s1: Array2<f64>,
    pub film_t1: Array2<f64>,
    pub film_s2: Array2<f64>,
    pub film_t2: Array2<f64>,
    pub embedding: Array2<f64>,
}

impl Denoiser {
    /// Seeded uniform init scaled by fan-in.
    pub fn init(config: DenoiserConfig, seed: u64) -> Self {
        let mut rng = rngutil::rng_for(seed, 0xde0);
        let mut mat = |rows: usize, cols: usize, scale: f64| {
            Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-scale..scale))
        };
        let in_dim = config.input_dim();
        let h = config.hidden;
        let s_in = 1.0 / (in_dim as f64).sqrt();
        let s_h = 1.0 / (h as f64).sqrt();
        let s_e = 1.0 / (config.embed as f64).sqrt();
        Self {
            config,
            w1: mat(h, in_dim, s_in),
            b1: Array1::zeros(h),
            w2: mat(h, h, s_h),
            b2: Array1::zeros(h),
            w3: mat(config.latent, h, s_h),
            b3: Array1::zeros(config.latent),
            film_s1: mat(h, config.embed, s_e * 0.1),
            film_t1: mat(h, config.embed, s_e * 0.1),
            film_s2: mat(h, config.embed, s_e * 0.1),
            film_t2: mat(h, config.embed, s_e * 0.1),
            embedding: mat(config.classes, config.embed, 0.5),
            trained: false,
        }
    }

    pub fn zeros_like(&self) -> Gradients {
        Gradients {
            w1: Array2::zeros(self.w1.dim()),
            b1: Array1::zeros(self.b1.dim()),
            w2: Array2::zeros(self.w2.dim()),
            b2: Array1::zeros(self.b2.dim()),
            w3: Array2::zeros(self.w3.dim()),
            b3: Array1::zeros(self.b3.dim()),
            film_s1: Array2::zeros(self.film_s1.dim()),
            film_t1: Array2::zeros(self.film_t1.dim()),
            film_s2: Array2::zeros(self.film_s2.dim()),
            film_t2: Array2::zeros(self.film_t2.dim()),
            embedding: Array2::zeros(self.embedding.dim()),
        }
    }

    /// Flat mutable views over all parameter tensors, in a fixed order.
    pub fn param_slices(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.w1.as_slice_mut().unwrap(),
            self.b1.as_slice_mut().unwrap(),
            self.w2.as_slice_mut().unwrap(),
            self.b2.as_slice_mut().unwrap(),
            self.w3.as_slice_mut().unwrap(),
            self.b3.as_slice_mut().unwrap(),
            self.film_s1.as_slice_mut().unwrap(),
            self.film_t1.as_slice_mut().unwrap(),
            self.film_s2.as_slice_mut().unwrap(),
            self.film_t2.as_slice_mut().unwrap(),
            self.embedding.as_slice_mut().unwrap(),
        ]
    }

    pub fn num_params(&self) -> usize {
        self.w1.len()
            + self.b1.len()
            + self.w2.len()
            + self.b2.len()
            + self.w3.len()
            + self.b3.len()
            + self.film_s1.len()
            + self.film_t1.len()
            + self.film_s2.len()
            + self.film_t2.len()
            + self.embedding.len()
    }

    /// Pooled event embedding: mean of the active rows, zeros when
    /// unconditional.
    pub fn pool_embedding(&self, active: &[usize]) -> Array1<f64> {
        let mut pooled = Array1::<f64>::zeros(self.config.embed);
        if active.is_empty() {
            return pooled;
        }
        for &id in active {
            pooled += &self.embedding.row(id);
        }
        pooled / active.len() as f64
    }

    fn time_embedding(&self, n: usize, steps: usize) -> Array1<f64> {
        let x = n as f64 / steps as f64;
        Array1::from_shape_fn(self.config.time, |j| {
            let pair = j / 2;
            let omega = std::f64::consts::PI * 2f64.powi(pair as i32 + 1);
            if j % 2 == 0 {
                (omega * x).sin()
            } else {
                (omega * x).cos()
            }
        })
    }

    fn build_input(
        &self,
        p_n: &Array2<f64>,
        cond: &Array2<f64>,
        n: usize,
        steps: usize,
    ) -> Result<Array2<f64>> {
        let frames = p_n.nrows();
        if p_n.ncols() != self.config.latent {
            return Err(Error::ShapeMismatch(format!(
                "latent channels {} != {}",
                p_n.ncols(),
                self.config.latent
            )));
        }
        if cond.nrows() != frames || cond.ncols() != self.config.classes {
            return Err(Error::ShapeMismatch(format!(
                "cond {:?} vs frames {frames} classes {}",
                cond.dim(),
                self.config.classes
            )));
        }
        let temb = self.time_embedding(n, steps);
        let mut x = Array2::<f64>::zeros((frames, self.config.input_dim()));
        for t in 0..frames {
            for c in 0..self.config.latent {
                x[(t, c)] = p_n[(t, c)];
            }
            for c in 0..self.config.classes {
                x[(t, self.config.latent + c)] = cond[(t, c)];
            }
            for j in 0..self.config.time {
                x[(t, self.config.latent + self.config.classes + j)] = temb[j];
            }
        }
        Ok(x)
    }

    /// Predict the injected noise for every frame.
    pub fn forward(
        &self,
        p_n: &Array2<f64>,
        cond: &Array2<f64>,
        active: &[usize],
        n: usize,
        steps: usize,
    ) -> Result<Array2<f64>> {
        Ok(self.forward_cached(p_n, cond, active, n, steps)?.out)
    }

    fn forward_cached(
        &self,
        p_n: &Array2<f64>,
        cond: &Array2<f64>,
        active: &[usize],
        n: usize,
        steps: usize,
    ) -> Result<ForwardCache> {
        let x = self.build_input(p_n, cond, n, steps)?;
        let pooled = self.pool_embedding(active);
        let s1 = self.film_s1.dot(&pooled);
        let t1 = self.film_t1.dot(&pooled);
        let s2 = self.film_s2.dot(&pooled);
        let t2 = self.film_t2.dot(&pooled);

        let a1 = x.dot(&self.w1.t()) + &self.b1;
        let m1 = &a1 * &(1.0 + &s1) + &t1;
        let h1 = m1.mapv(f64::tanh);
        let a2 = h1.dot(&self.w2.t()) + &self.b2;
        let m2 = &a2 * &(1.0 + &s2) + &t2;
        let h2 = m2.mapv(f64::tanh);
        let out = h2.dot(&self.w3.t()) + &self.b3;
        Ok(ForwardCache {
            x,
            pooled,
            s1,
            s2,
            a1,
            h1,
            a2,
            h2,
            out,
        })
    }

    /// SNR-weighted denoising loss with exact gradients for one clip.
    ///
    /// Draws the step and the noise from `rng`, forms the closed-form
    /// noisy latent, and scores `lambda_n * mean((eps - eps_theta)^2)`.
    #[allow(clippy::too_many_arguments)]
    pub fn loss(
        &self,
        p0: &Array2<f64>,
        cond: &Array2<f64>,
        active: &[usize],
        schedule: &NoiseSchedule,
        gamma: f64,
        rng: &mut impl Rng,
    ) -> Result<(f64, Gradients)> {
        let n = rng.gen_range(1..=schedule.steps);
        let eps = Array2::from_shape_fn(p0.dim(), |_| normal_draw(rng));
        let p_n = forward_marginal(p0, n, &eps, schedule)?;
        let lambda = schedule.loss_weight(n, gamma);
        let cache = self.forward_cached(&p_n, cond, active, n, schedule.steps)?;
        let residual = &cache.out - &eps;
        let count = residual.len() as f64;
        let loss = lambda * residual.iter().map(|r| r * r).sum::<f64>() / count;
        if !loss.is_finite() {
            return Err(Error::NonFinite("loss".into()));
        }
        let d_out = residual * (2.0 * lambda / count);
        let grads = self.backward(&cache, &d_out, active);
        Ok((loss, grads))
    }

    fn backward(&self, cache: &ForwardCache, d_out: &Array2<f64>, active: &[usize]) -> Gradients {
        let mut g = self.zeros_like();
        let pooled = &cache.pooled;

        g.w3 = d_out.t().dot(&cache.h2);
        g.b3 = d_out.sum_axis(ndarray::Axis(0));
        let d_h2 = d_out.dot(&self.w3);
        let d_m2 = &d_h2 * &cache.h2.mapv(|h| 1.0 - h * h);
        let d_a2 = &d_m2 * &(1.0 + &cache.s2);
        let d_s2_vec = (&d_m2 * &cache.a2).sum_axis(ndarray::Axis(0));
        let d_t2_vec = d_m2.sum_axis(ndarray::Axis(0));
        g.film_s2 = outer(&d_s2_vec, pooled);
        g.film_t2 = outer(&d_t2_vec, pooled);
        let mut d_pooled = self.film_s2.t().dot(&d_s2_vec) + self.film_t2.t().dot(&d_t2_vec);

        g.w2 = d_a2.t().dot(&cache.h1);
        g.b2 = d_a2.sum_axis(ndarray::Axis(0));
        let d_h1 = d_a2.dot(&self.w2);
        let d_m1 = &d_h1 * &cache.h1.mapv(|h| 1.0 - h * h);
        let d_a1 = &d_m1 * &(1.0 + &cache.s1);
        let d_s1_vec = (&d_m1 * &cache.a1).sum_axis(ndarray::Axis(0));
        let d_t1_vec = d_m1.sum_axis(ndarray::Axis(0));
        g.film_s1 = outer(&d_s1_vec, pooled);
        g.film_t1 = outer(&d_t1_vec, pooled);
        d_pooled += &(self.film_s1.t().dot(&d_s1_vec) + self.film_t1.t().dot(&d_t1_vec));

        g.w1 = d_a1.t().dot(&cache.x);
        g.b1 = d_a1.sum_axis(ndarray::Axis(0));

        if !active.is_empty() {
            let share = &d_pooled / active.len() as f64;
            for &id in active {
                let mut row = g.embedding.row_mut(id);
                row += &share;
            }
        }
        g
    }

    // --- checkpoints -------------------------------------------------------

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut tensors = IndexMap::new();
        let mut put = |name: &str, shape: Vec<usize>, data: Vec<f64>| {
            tensors.insert(name.to_string(), Tensor { shape, data });
        };
        put("w1", self.w1.shape().to_vec(), self.w1.iter().cloned().collect());
        put("b1", self.b1.shape().to_vec(), self.b1.to_vec());
        put("w2", self.w2.shape().to_vec(), self.w2.iter().cloned().collect());
        put("b2", self.b2.shape().to_vec(), self.b2.to_vec());
        put("w3", self.w3.shape().to_vec(), self.w3.iter().cloned().collect());
        put("b3", self.b3.shape().to_vec(), self.b3.to_vec());
        put(
            "film_s1",
            self.film_s1.shape().to_vec(),
            self.film_s1.iter().cloned().collect(),
        );
        put(
            "film_t1",
            self.film_t1.shape().to_vec(),
            self.film_t1.iter().cloned().collect(),
        );
        put(
            "film_s2",
            self.film_s2.shape().to_vec(),
            self.film_s2.iter().cloned().collect(),
        );
        put(
            "film_t2",
            self.film_t2.shape().to_vec(),
            self.film_t2.iter().cloned().collect(),
        );
        put(
            "embedding",
            self.embedding.shape().to_vec(),
            self.embedding.iter().cloned().collect(),
        );
        Checkpoint {
            schema: CHECKPOINT_SCHEMA.to_string(),
            version: CHECKPOINT_VERSION,
            config: self.config,
            trained: self.trained,
            tensors,
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.schema != CHECKPOINT_SCHEMA || ck.version != CHECKPOINT_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unknown checkpoint schema {}/{}",
                ck.schema, ck.version
            )));
        }
        let get2 = |name: &str| -> Result<Array2<f64>> {
            let t = ck
                .tensors
                .get(name)
                .ok_or_else(|| Error::InvalidConfig(format!("missing tensor {name}")))?;
            if t.shape.len() != 2 {
                return Err(Error::InvalidConfig(format!("{name} is not 2-d")));
            }
            Array2::from_shape_vec((t.shape[0], t.shape[1]), t.data.clone())
                .map_err(|e| Error::InvalidConfig(e.to_string()))
        };
        let get1 = |name: &str| -> Result<Array1<f64>> {
            let t = ck
                .tensors
                .get(name)
                .ok_or_else(|| Error::InvalidConfig(format!("missing tensor {name}")))?;
            Ok(Array1::from_vec(t.data.clone()))
        };
        Ok(Self {
            config: ck.config,
            w1: get2("w1")?,
            b1: get1("b1")?,
            w2: get2("w2")?,
            b2: get1("b2")?,
            w3: get2("w3")?,
            b3: get1("b3")?,
            film_s1: get2("film_s1")?,
            film_t1: get2("film_t1")?,
            film_s2: get2("film_s2")?,
            film_t2: get2("film_t2")?,
            embedding: get2("embedding")?,
            trained: ck.trained,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let json = serde_json::to_string(&self.to_checkpoint())?;
        std::fs::write(path, json.as_bytes())
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let ck: Checkpoint = serde_json::from_str(&text)?;
        Self::from_checkpoint(&ck)
    }
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    let mut out = Array2::<f64>::zeros((a.len(), b.len()));
    for i in 0..a.len() {
        for j in 0..b.len() {
            out[(i, j)] = a[i] * b[j];
        }
    }
    out
}

/// Box-Muller standard normal draw.
pub fn normal_draw(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

struct ForwardCache {
    x: Array2<f64>,
    pooled: Array1<f64>,
    s1: Array1<f64>,
    s2: Array1<f64>,
    a1: Array2<f64>,
    h1: Array2<f64>,
    a2: Array2<f64>,
    h2: Array2<f64>,
    out: Array2<f64>,
}

/// Versioned weight dump; round-trips bit-exactly through JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema: String,
    pub version: u32,
    pub config: DenoiserConfig,
    pub trained: bool,
    pub tensors: IndexMap<String, Tensor>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}
