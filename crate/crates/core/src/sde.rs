//! Model abstraction for Stratonovich SDEs `dx = f°(x;q) dt + G(x;q) ∘ dB`
//! and the drift correction that turns them into Itô form.

use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A structurally known SDE with `n` states, `m` noise channels and `Q`
/// positional parameters.
///
/// Matrices are passed as flat row-major slices:
///
/// * `diffusion` writes `G` with `G[i][j]` at `i * m + j`;
/// * `diffusion_jacobian` writes `∂G_ij/∂x_k` at `(i * m + j) * n + k`.
///
/// Implementations must be pure; the same instance is shared across threads.
pub trait SdeModel: Send + Sync {
    fn name(&self) -> &str;
    fn state_dim(&self) -> usize;
    fn noise_dim(&self) -> usize;
    fn param_names(&self) -> &[&str];

    /// Stratonovich drift `f°(x;q)`.
    fn drift_strat(&self, x: &[f64], q: &[f64], out: &mut [f64]);
    fn diffusion(&self, x: &[f64], q: &[f64], out: &mut [f64]);
    fn diffusion_jacobian(&self, x: &[f64], q: &[f64], out: &mut [f64]);

    /// `true` when `G` does not depend on `x`, which lets callers skip the
    /// Jacobian entirely.
    fn constant_diffusion(&self) -> bool {
        false
    }

    /// Validates a parameter vector for simulation. Returns warnings for
    /// admissible but suspicious values.
    fn check_params(&self, q: &[f64]) -> Result<Vec<String>> {
        check_len(self.param_count(), q.len(), "parameter vector")?;
        Ok(Vec::new())
    }

    /// Admissible box for each parameter, used by the estimator.
    fn param_bounds(&self) -> Vec<(f64, f64)> {
        vec![(f64::NEG_INFINITY, f64::INFINITY); self.param_count()]
    }

    fn param_count(&self) -> usize {
        self.param_names().len()
    }

    fn param_index(&self, name: &str) -> Option<usize> {
        self.param_names().iter().position(|p| *p == name)
    }
}

/// Positional parameter values, aligned with [`SdeModel::param_names`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn for_model<M: SdeModel + ?Sized>(model: &M, values: Vec<f64>) -> Result<Self> {
        check_len(model.param_count(), values.len(), "parameter vector")?;
        Ok(Self(values))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ParamVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ParamVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

pub(crate) fn check_len(expected: usize, actual: usize, what: &'static str) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            actual,
        })
    }
}

fn check_inputs<M: SdeModel + ?Sized>(model: &M, x: &[f64], q: &[f64]) -> Result<()> {
    check_len(model.state_dim(), x.len(), "state vector")?;
    check_len(model.param_count(), q.len(), "parameter vector")
}

/// Itô drift `f_i = f°_i + ½ Σ_k Σ_j G_kj ∂G_ij/∂x_k`.
pub fn ito_drift<M: SdeModel + ?Sized>(model: &M, x: &[f64], q: &[f64]) -> Result<Vec<f64>> {
    check_inputs(model, x, q)?;
    let mut scratch = Scratch::new(model);
    let mut out = vec![0.0; model.state_dim()];
    scratch.ito_drift(model, x, q, &mut out);
    Ok(out)
}

/// `D = G Gᵀ`, returned row-major as an `n × n` matrix.
pub fn diffusion_product<M: SdeModel + ?Sized>(
    model: &M,
    x: &[f64],
    q: &[f64],
) -> Result<Vec<f64>> {
    check_inputs(model, x, q)?;
    let mut scratch = Scratch::new(model);
    let n = model.state_dim();
    let mut out = vec![0.0; n * n];
    scratch.diffusion_product(model, x, q, &mut out);
    Ok(out)
}

/// Reusable buffers for per-point model evaluation in hot loops.
/// Callers are responsible for dimension checks.
pub(crate) struct Scratch {
    n: usize,
    m: usize,
    g: Vec<f64>,
    dg: Vec<f64>,
}

impl Scratch {
    pub(crate) fn new<M: SdeModel + ?Sized>(model: &M) -> Self {
        let n = model.state_dim();
        let m = model.noise_dim();
        Self {
            n,
            m,
            g: vec![0.0; n * m],
            dg: vec![0.0; n * m * n],
        }
    }

    pub(crate) fn ito_drift<M: SdeModel + ?Sized>(
        &mut self,
        model: &M,
        x: &[f64],
        q: &[f64],
        out: &mut [f64],
    ) {
        model.drift_strat(x, q, out);
        if model.constant_diffusion() {
            return;
        }
        let (n, m) = (self.n, self.m);
        model.diffusion(x, q, &mut self.g);
        model.diffusion_jacobian(x, q, &mut self.dg);
        for (i, fi) in out.iter_mut().enumerate() {
            let mut corr = 0.0;
            for k in 0..n {
                for j in 0..m {
                    corr += self.g[k * m + j] * self.dg[(i * m + j) * n + k];
                }
            }
            *fi += 0.5 * corr;
        }
    }

    pub(crate) fn diffusion_product<M: SdeModel + ?Sized>(
        &mut self,
        model: &M,
        x: &[f64],
        q: &[f64],
        out: &mut [f64],
    ) {
        let (n, m) = (self.n, self.m);
        model.diffusion(x, q, &mut self.g);
        for i in 0..n {
            for j in i..n {
                let v: f64 = (0..m).map(|l| self.g[i * m + l] * self.g[j * m + l]).sum();
                out[i * n + j] = v;
                out[j * n + i] = v;
            }
        }
    }
}
