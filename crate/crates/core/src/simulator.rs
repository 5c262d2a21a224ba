//! Stationary time-series generation.
//!
//! The default scheme integrates the Stratonovich system with a
//! Runge–Kutta–Gill step in which each noise channel is frozen over the step
//! at `W_k / √Δt`, `W_k ~ N(0, 1)`. An Euler–Maruyama scheme on the Itô form
//! is available for cross-checks.
//!
//! Noise channel `j` draws from its own ChaCha8 stream (`seed`, stream `j`),
//! and normal variates come from the ziggurat sampler of `rand_distr`.
//! Channel 0 is therefore the same sequence for every model sharing a seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sde::{check_len, ParamVector, Scratch, SdeModel};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Runge–Kutta–Gill with piecewise-constant noise.
    #[default]
    RkGill,
    /// Euler–Maruyama on the Itô drift.
    EulerMaruyama,
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rk-gill" => Ok(Scheme::RkGill),
            "euler-maruyama" => Ok(Scheme::EulerMaruyama),
            _ => Err(Error::InvalidConfig(format!(
                "unknown scheme `{s}` (expected rk-gill or euler-maruyama)"
            ))),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::RkGill => "rk-gill",
            Scheme::EulerMaruyama => "euler-maruyama",
        })
    }
}

pub const DEFAULT_DT: f64 = 0.01;
pub const DEFAULT_SAMPLES: usize = 10_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub n_samples: usize,
    /// Integration steps discarded before storing.
    pub skip: usize,
    /// Initial state; `None` means the origin.
    pub x0: Option<Vec<f64>>,
    pub seed: u64,
    pub scheme: Scheme,
}

impl SimConfig {
    /// `dt = 0.01`, `skip = n_samples`, start at the origin.
    pub fn new(n_samples: usize, seed: u64) -> Self {
        Self {
            dt: DEFAULT_DT,
            n_samples,
            skip: n_samples,
            x0: None,
            seed,
            scheme: Scheme::RkGill,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if self.n_samples == 0 {
            return Err(Error::InvalidConfig("n_samples must be at least 1".into()));
        }
        Ok(())
    }
}

impl Default for SimConfig {
    fn default() -> Self {
        Self::new(DEFAULT_SAMPLES, 0)
    }
}

/// Stored trajectory, one row of `state_dim` values per sample.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    pub dt: f64,
    pub state_dim: usize,
    pub states: Vec<f64>,
    pub model: String,
    pub params: ParamVector,
    pub seed: u64,
    pub scheme: Scheme,
    pub skip: usize,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.states.len() / self.state_dim.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.states[k * self.state_dim..(k + 1) * self.state_dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.states.chunks_exact(self.state_dim)
    }

    /// Sample mean of each component.
    pub fn mean(&self) -> Vec<f64> {
        let n = self.state_dim;
        let mut sum = vec![0.0; n];
        for row in self.rows() {
            for (s, v) in sum.iter_mut().zip(row) {
                *s += v;
            }
        }
        sum.iter().map(|s| s / self.len() as f64).collect()
    }

    /// Sample covariance matrix (row-major `n × n`, normalized by `N`).
    pub fn covariance(&self) -> Vec<f64> {
        let n = self.state_dim;
        let mean = self.mean();
        let mut cov = vec![0.0; n * n];
        for row in self.rows() {
            for i in 0..n {
                let di = row[i] - mean[i];
                for j in 0..n {
                    cov[i * n + j] += di * (row[j] - mean[j]);
                }
            }
        }
        cov.iter().map(|c| c / self.len() as f64).collect()
    }
}

/// Independent standard-normal streams, one per noise channel.
pub struct NoiseSource {
    channels: Vec<ChaCha8Rng>,
}

impl NoiseSource {
    pub fn new(seed: u64, channels: usize) -> Self {
        let channels = (0..channels)
            .map(|j| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(j as u64);
                rng
            })
            .collect();
        Self { channels }
    }

    /// Writes one draw per channel into `out`.
    #[inline]
    pub fn fill(&mut self, out: &mut [f64]) {
        for (w, rng) in out.iter_mut().zip(self.channels.iter_mut()) {
            *w = StandardNormal.sample(rng);
        }
    }
}

/// `count` rows of `m` i.i.d. standard normals; reproducible for a seed.
pub fn white_noise_increments(seed: u64, m: usize, count: usize) -> Vec<Vec<f64>> {
    let mut source = NoiseSource::new(seed, m);
    (0..count)
        .map(|_| {
            let mut row = vec![0.0; m];
            source.fill(&mut row);
            row
        })
        .collect()
}

struct Stepper<'a, M: SdeModel + ?Sized> {
    model: &'a M,
    q: &'a [f64],
    n: usize,
    m: usize,
    g: Vec<f64>,
    scratch: Scratch,
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl<'a, M: SdeModel + ?Sized> Stepper<'a, M> {
    fn new(model: &'a M, q: &'a [f64]) -> Self {
        let n = model.state_dim();
        let m = model.noise_dim();
        Self {
            model,
            q,
            n,
            m,
            g: vec![0.0; n * m],
            scratch: Scratch::new(model),
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
        }
    }

    /// `out = f°(x) + G(x) w` with `w` frozen over the step.
    fn frozen_field(&mut self, x: &[f64], w: &[f64], out: &mut [f64]) {
        let (n, m) = (self.n, self.m);
        self.model.drift_strat(x, self.q, out);
        self.model.diffusion(x, self.q, &mut self.g);
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..m {
                s += self.g[i * m + j] * w[j];
            }
            out[i] += s;
        }
    }

    fn rk_gill(&mut self, x: &mut [f64], w: &[f64], dt: f64) {
        const R2: f64 = std::f64::consts::FRAC_1_SQRT_2;
        let n = self.n;
        let mut k = std::mem::take(&mut self.k);
        let mut tmp = std::mem::take(&mut self.tmp);

        self.frozen_field(x, w, &mut k[0]);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * dt * k[0][i];
        }
        self.frozen_field(&tmp, w, &mut k[1]);
        for i in 0..n {
            tmp[i] = x[i] + dt * ((R2 - 0.5) * k[0][i] + (1.0 - R2) * k[1][i]);
        }
        self.frozen_field(&tmp, w, &mut k[2]);
        for i in 0..n {
            tmp[i] = x[i] + dt * (-R2 * k[1][i] + (1.0 + R2) * k[2][i]);
        }
        self.frozen_field(&tmp, w, &mut k[3]);
        for i in 0..n {
            x[i] += dt / 6.0
                * (k[0][i] + (2.0 - 2.0 * R2) * k[1][i] + (2.0 + 2.0 * R2) * k[2][i] + k[3][i]);
        }

        self.k = k;
        self.tmp = tmp;
    }

    fn euler_maruyama(&mut self, x: &mut [f64], w: &[f64], dt: f64) {
        let (n, m) = (self.n, self.m);
        let sqrt_dt = dt.sqrt();
        let f = &mut self.k[0];
        self.scratch.ito_drift(self.model, x, self.q, f);
        self.model.diffusion(x, self.q, &mut self.g);
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..m {
                s += self.g[i * m + j] * w[j];
            }
            x[i] += f[i] * dt + s * sqrt_dt;
        }
    }
}

/// Integrates the model from `x0`, discards `skip` steps and stores the
/// following `n_samples` states (one per step).
pub fn simulate<M: SdeModel + ?Sized>(model: &M, q: &[f64], cfg: &SimConfig) -> Result<TimeSeries> {
    cfg.validate()?;
    for warning in model.check_params(q)? {
        log::warn!("{}: {warning}", model.name());
    }
    let n = model.state_dim();
    let m = model.noise_dim();
    let mut x = match &cfg.x0 {
        Some(x0) => {
            check_len(n, x0.len(), "initial state")?;
            x0.clone()
        }
        None => vec![0.0; n],
    };

    let mut noise = NoiseSource::new(cfg.seed, m);
    let mut w = vec![0.0; m];
    let mut stepper = Stepper::new(model, q);
    let inv_sqrt_dt = 1.0 / cfg.dt.sqrt();
    let mut states = Vec::with_capacity(cfg.n_samples * n);
    let total = cfg.skip as u64 + cfg.n_samples as u64;

    // x holds the state at step index `step`
    for step in 0..total {
        if step >= cfg.skip as u64 {
            states.extend_from_slice(&x);
        }
        if step + 1 == total {
            break;
        }
        noise.fill(&mut w);
        match cfg.scheme {
            Scheme::RkGill => {
                for wj in w.iter_mut() {
                    *wj *= inv_sqrt_dt;
                }
                stepper.rk_gill(&mut x, &w, cfg.dt);
            }
            Scheme::EulerMaruyama => stepper.euler_maruyama(&mut x, &w, cfg.dt),
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteState { step: step + 1 });
        }
    }

    Ok(TimeSeries {
        dt: cfg.dt,
        state_dim: n,
        states,
        model: model.name().to_string(),
        params: ParamVector::new(q.to_vec()),
        seed: cfg.seed,
        scheme: cfg.scheme,
        skip: cfg.skip,
    })
}
