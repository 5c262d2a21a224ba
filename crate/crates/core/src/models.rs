//! Built-in linear random-vibration models and the registry used by the CLI.
//!
//! Both models have state `x = (displacement, velocity)` and drift
//! `f°(x) = (x₂, −k x₁ − c x₂)`.
//!
//! | name           | parameters           | `G(x)`                      |
//! |----------------|----------------------|-----------------------------|
//! | `lvs-additive` | `(k, c, nu)`         | `[0, ν]ᵀ`                   |
//! | `lvs-add-mult` | `(k, c, nu1, nu2)`   | `[[0, 0], [ν₁, ν₂ x₁]]`     |

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sde::{check_len, ParamVector, SdeModel};

pub const LVS_ADDITIVE: &str = "lvs-additive";
pub const LVS_ADD_MULT: &str = "lvs-add-mult";

pub const MODEL_NAMES: &[&str] = &[LVS_ADDITIVE, LVS_ADD_MULT];

/// Looks up a built-in model by its registry name.
pub fn model_by_name(name: &str) -> Result<Arc<dyn SdeModel>> {
    match name {
        LVS_ADDITIVE => Ok(Arc::new(LvsAdditive)),
        LVS_ADD_MULT => Ok(Arc::new(LvsAddMult)),
        _ => Err(Error::UnknownModel {
            name: name.to_string(),
            available: MODEL_NAMES.join(", "),
        }),
    }
}

#[inline]
fn oscillator_drift(x: &[f64], k: f64, c: f64, out: &mut [f64]) {
    out[0] = x[1];
    out[1] = -k * x[0] - c * x[1];
}

fn check_stiffness_damping(k: f64, c: f64) -> Result<()> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "k must be positive, got {k}"
        )));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "c must be positive, got {c}"
        )));
    }
    Ok(())
}

fn check_strength(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be nonnegative, got {v}"
        )))
    }
}

/// `ẍ + c ẋ + k x = ν w(t)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct LvsAdditive;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LvsAdditiveParams {
    pub k: f64,
    pub c: f64,
    pub nu: f64,
}

impl LvsAdditiveParams {
    pub fn new(k: f64, c: f64, nu: f64) -> Self {
        Self { k, c, nu }
    }

    pub fn validate(&self) -> Result<()> {
        check_stiffness_damping(self.k, self.c)?;
        check_strength("nu", self.nu)
    }

    pub fn to_vector(&self) -> ParamVector {
        ParamVector::new(vec![self.k, self.c, self.nu])
    }
}

/// Validated model instance and its parameter vector.
pub fn lvs_additive(params: LvsAdditiveParams) -> Result<(LvsAdditive, ParamVector)> {
    params.validate()?;
    Ok((LvsAdditive, params.to_vector()))
}

impl SdeModel for LvsAdditive {
    fn name(&self) -> &str {
        LVS_ADDITIVE
    }

    fn state_dim(&self) -> usize {
        2
    }

    fn noise_dim(&self) -> usize {
        1
    }

    fn param_names(&self) -> &[&str] {
        &["k", "c", "nu"]
    }

    fn drift_strat(&self, x: &[f64], q: &[f64], out: &mut [f64]) {
        oscillator_drift(x, q[0], q[1], out);
    }

    fn diffusion(&self, _x: &[f64], q: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
        out[1] = q[2];
    }

    fn diffusion_jacobian(&self, _x: &[f64], _q: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }

    fn constant_diffusion(&self) -> bool {
        true
    }

    fn check_params(&self, q: &[f64]) -> Result<Vec<String>> {
        check_len(3, q.len(), "parameter vector")?;
        LvsAdditiveParams::new(q[0], q[1], q[2]).validate()?;
        Ok(Vec::new())
    }

    fn param_bounds(&self) -> Vec<(f64, f64)> {
        vec![(0.0, f64::INFINITY); 3]
    }
}

/// Closed-form stationary density of [`LvsAdditive`]:
/// `p(x) = c√k/(πν²) · exp(−c/ν² · (k x₁² + x₂²))`.
pub fn lvs_additive_stationary_pdf(
    params: LvsAdditiveParams,
) -> Result<impl Fn(&[f64]) -> f64 + Send + Sync> {
    params.validate()?;
    let LvsAdditiveParams { k, c, nu } = params;
    if nu == 0.0 {
        return Err(Error::InvalidParameter(
            "stationary density is degenerate for nu = 0".into(),
        ));
    }
    let scale = c * k.sqrt() / (PI * nu * nu);
    let rate = c / (nu * nu);
    Ok(move |x: &[f64]| scale * (-rate * (k * x[0] * x[0] + x[1] * x[1])).exp())
}

/// Stationary moments `(V[x₁], V[x₂])`; means and covariance are zero.
pub fn lvs_additive_stationary_variances(params: LvsAdditiveParams) -> (f64, f64) {
    let LvsAdditiveParams { k, c, nu } = params;
    let v2 = nu * nu / (2.0 * c);
    (v2 / k, v2)
}

/// Linear oscillator with additive noise `ν₁` and multiplicative noise
/// `ν₂ x₁` acting on the velocity through independent channels.
#[derive(Clone, Copy, Debug, Default)]
pub struct LvsAddMult;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LvsAddMultParams {
    pub k: f64,
    pub c: f64,
    pub nu1: f64,
    pub nu2: f64,
}

impl LvsAddMultParams {
    pub fn new(k: f64, c: f64, nu1: f64, nu2: f64) -> Self {
        Self { k, c, nu1, nu2 }
    }

    /// Returns warnings for values that may destabilize second moments.
    pub fn validate(&self) -> Result<Vec<String>> {
        check_stiffness_damping(self.k, self.c)?;
        check_strength("nu1", self.nu1)?;
        check_strength("nu2", self.nu2)?;
        let mut warnings = Vec::new();
        // Mean-square stability of the parametrically excited oscillator.
        if self.nu2 * self.nu2 >= 2.0 * self.c * self.k {
            warnings.push(format!(
                "nu2^2 = {} >= 2ck = {}: second moments may diverge",
                self.nu2 * self.nu2,
                2.0 * self.c * self.k
            ));
        }
        Ok(warnings)
    }

    pub fn to_vector(&self) -> ParamVector {
        ParamVector::new(vec![self.k, self.c, self.nu1, self.nu2])
    }
}

pub fn lvs_add_mult(params: LvsAddMultParams) -> Result<(LvsAddMult, ParamVector, Vec<String>)> {
    let warnings = params.validate()?;
    Ok((LvsAddMult, params.to_vector(), warnings))
}

impl SdeModel for LvsAddMult {
    fn name(&self) -> &str {
        LVS_ADD_MULT
    }

    fn state_dim(&self) -> usize {
        2
    }

    fn noise_dim(&self) -> usize {
        2
    }

    fn param_names(&self) -> &[&str] {
        &["k", "c", "nu1", "nu2"]
    }

    fn drift_strat(&self, x: &[f64], q: &[f64], out: &mut [f64]) {
        oscillator_drift(x, q[0], q[1], out);
    }

    fn diffusion(&self, x: &[f64], q: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
        out[1] = 0.0;
        out[2] = q[2];
        out[3] = q[3] * x[0];
    }

    fn diffusion_jacobian(&self, _x: &[f64], q: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        // ∂G₂₂/∂x₁
        out[6] = q[3];
    }

    fn check_params(&self, q: &[f64]) -> Result<Vec<String>> {
        check_len(4, q.len(), "parameter vector")?;
        LvsAddMultParams::new(q[0], q[1], q[2], q[3]).validate()
    }

    fn param_bounds(&self) -> Vec<(f64, f64)> {
        vec![(0.0, f64::INFINITY); 4]
    }
}
