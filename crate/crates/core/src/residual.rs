//! Discretized stationary Fokker–Planck residual and the PDF-fitness `E`.
//!
//! For density data `p̄` and parameters `q` the probability current is
//!
//! ```text
//! J_i[s] = f_i[s] p̄[s] − ½ Σ_j ∂_j { (G Gᵀ)_ij[s] p̄[s] }
//! ```
//!
//! with `f` the Itô drift, and the residual is `R[s] = Σ_i ∂_i J_i[s]`.
//! Every `∂` is the grid stencil of [`crate::grid::numerical_partial`]
//! applied to a fully materialized field, so the diffusion term is a nested
//! composition of first-order stencils rather than a fused second
//! difference. `E = Σ_s R[s]²`, summed in storage order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{partial_at, partial_into, FieldKind, GridField};
use crate::pdf::PdfData;
use crate::sde::{check_len, ParamVector, Scratch, SdeModel};

#[derive(Clone, Debug)]
pub struct FitnessReport {
    pub fitness: f64,
    pub residual_field: GridField,
    pub current_fields: Vec<GridField>,
    pub params: ParamVector,
    pub model: String,
}

fn check_inputs<M: SdeModel + ?Sized>(pdf: &PdfData, model: &M, q: &[f64]) -> Result<()> {
    check_len(
        pdf.domain().dim(),
        model.state_dim(),
        "model state dimension",
    )?;
    check_len(model.param_count(), q.len(), "parameter vector")?;
    pdf.domain().require_stencil()
}

/// Current components `J_i` as flat arrays, one per axis.
fn current_values<M: SdeModel + ?Sized>(pdf: &PdfData, model: &M, q: &[f64]) -> Vec<Vec<f64>> {
    let domain = pdf.domain();
    let n = domain.dim();
    let cells = domain.cell_count();
    let p = pdf.values();

    let mut currents = vec![vec![0.0; cells]; n];
    let mut products = vec![vec![0.0; cells]; n * n];
    let mut scratch = Scratch::new(model);
    let mut x = vec![0.0; n];
    let mut f = vec![0.0; n];
    let mut d = vec![0.0; n * n];

    for flat in 0..cells {
        let pv = p[flat];
        if pv == 0.0 {
            continue;
        }
        domain.center_of_flat(flat, &mut x);
        scratch.ito_drift(model, &x, q, &mut f);
        scratch.diffusion_product(model, &x, q, &mut d);
        for i in 0..n {
            currents[i][flat] = f[i] * pv;
        }
        for (ij, prod) in products.iter_mut().enumerate() {
            prod[flat] = d[ij] * pv;
        }
    }

    let mut partial = vec![0.0; cells];
    for (i, current) in currents.iter_mut().enumerate() {
        for j in 0..n {
            let prod = &products[i * n + j];
            if prod.iter().all(|&v| v == 0.0) {
                continue;
            }
            partial_into(domain, prod, j, &mut partial);
            for (c, dp) in current.iter_mut().zip(&partial) {
                *c -= 0.5 * dp;
            }
        }
    }
    currents
}

fn residual_values(pdf: &PdfData, currents: &[Vec<f64>]) -> Vec<f64> {
    let domain = pdf.domain();
    (0..domain.cell_count())
        .map(|flat| {
            currents
                .iter()
                .enumerate()
                .map(|(i, current)| partial_at(domain, current, i, flat))
                .sum()
        })
        .collect()
}

/// Current component along `axis` (0-based).
pub fn probability_current<M: SdeModel + ?Sized>(
    pdf: &PdfData,
    model: &M,
    q: &[f64],
    axis: usize,
) -> Result<GridField> {
    check_inputs(pdf, model, q)?;
    if axis >= model.state_dim() {
        return Err(Error::DimensionMismatch {
            what: "axis index",
            expected: model.state_dim(),
            actual: axis,
        });
    }
    let mut currents = current_values(pdf, model, q);
    GridField::new(
        pdf.domain().clone(),
        currents.swap_remove(axis),
        FieldKind::Current(axis),
    )
}

/// All current components.
pub fn probability_currents<M: SdeModel + ?Sized>(
    pdf: &PdfData,
    model: &M,
    q: &[f64],
) -> Result<Vec<GridField>> {
    check_inputs(pdf, model, q)?;
    current_values(pdf, model, q)
        .into_iter()
        .enumerate()
        .map(|(i, v)| GridField::new(pdf.domain().clone(), v, FieldKind::Current(i)))
        .collect()
}

/// Stationary residual `div J` at every cell.
pub fn fpe_residual<M: SdeModel + ?Sized>(
    pdf: &PdfData,
    model: &M,
    q: &[f64],
) -> Result<GridField> {
    check_inputs(pdf, model, q)?;
    let currents = current_values(pdf, model, q);
    GridField::new(
        pdf.domain().clone(),
        residual_values(pdf, &currents),
        FieldKind::Residual,
    )
}

/// `E` alone, without packaging the intermediate fields.
pub fn fitness_value<M: SdeModel + ?Sized>(pdf: &PdfData, model: &M, q: &[f64]) -> Result<f64> {
    check_inputs(pdf, model, q)?;
    let currents = current_values(pdf, model, q);
    Ok(residual_values(pdf, &currents).iter().map(|r| r * r).sum())
}

pub fn pdf_fitness<M: SdeModel + ?Sized>(
    pdf: &PdfData,
    model: &M,
    q: &[f64],
) -> Result<FitnessReport> {
    check_inputs(pdf, model, q)?;
    if pdf.values().iter().all(|&v| v == 0.0) {
        log::warn!("density data has zero mass; fitness is trivially 0");
    }
    let currents = current_values(pdf, model, q);
    let residual = GridField::new(
        pdf.domain().clone(),
        residual_values(pdf, &currents),
        FieldKind::Residual,
    )?;
    let current_fields = currents
        .into_iter()
        .enumerate()
        .map(|(i, v)| GridField::new(pdf.domain().clone(), v, FieldKind::Current(i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(FitnessReport {
        fitness: residual.sum_of_squares(),
        residual_field: residual,
        current_fields,
        params: ParamVector::new(q.to_vec()),
        model: model.name().to_string(),
    })
}

/// Uniformly spaced values of one parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamAxis {
    pub index: usize,
    pub lower: f64,
    pub upper: f64,
    pub points: usize,
}

impl ParamAxis {
    pub fn new(index: usize, lower: f64, upper: f64, points: usize) -> Self {
        Self {
            index,
            lower,
            upper,
            points,
        }
    }

    /// A single point sits at `lower`.
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.lower];
        }
        let step = (self.upper - self.lower) / (self.points - 1) as f64;
        (0..self.points)
            .map(|k| {
                if k + 1 == self.points {
                    self.upper
                } else {
                    self.lower + k as f64 * step
                }
            })
            .collect()
    }

    fn validate(&self, q_len: usize) -> Result<()> {
        if self.index >= q_len {
            return Err(Error::InvalidConfig(format!(
                "parameter index {} out of range for {q_len} parameters",
                self.index
            )));
        }
        if self.points == 0 || !self.lower.is_finite() || !self.upper.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "map axis needs finite bounds and at least one point, got [{}, {}] x {}",
                self.lower, self.upper, self.points
            )));
        }
        Ok(())
    }
}

/// `E` sampled on a two-parameter grid; `values[ia * b.len() + ib]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FitnessMap {
    pub axis_a: ParamAxis,
    pub axis_b: ParamAxis,
    pub a_values: Vec<f64>,
    pub b_values: Vec<f64>,
    pub values: Vec<f64>,
    pub base: ParamVector,
}

impl FitnessMap {
    pub fn get(&self, ia: usize, ib: usize) -> f64 {
        self.values[ia * self.b_values.len() + ib]
    }

    /// `(ia, ib, E)` of the smallest finite entry.
    pub fn argmin(&self) -> Option<(usize, usize, f64)> {
        let nb = self.b_values.len();
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, &v)| (k / nb, k % nb, v))
    }
}

/// Evaluates `E` over the product of two parameter axes with every other
/// parameter held at `base`. Grid points are evaluated in parallel on the
/// current rayon pool; the output order is fixed.
pub fn fitness_map<M: SdeModel + ?Sized>(
    pdf: &PdfData,
    model: &M,
    base: &[f64],
    axis_a: ParamAxis,
    axis_b: ParamAxis,
) -> Result<FitnessMap> {
    check_inputs(pdf, model, base)?;
    axis_a.validate(base.len())?;
    axis_b.validate(base.len())?;
    if axis_a.index == axis_b.index {
        return Err(Error::InvalidConfig(
            "map axes must be distinct parameters".into(),
        ));
    }
    let a_values = axis_a.values();
    let b_values = axis_b.values();
    let nb = b_values.len();
    let values = (0..a_values.len() * nb)
        .into_par_iter()
        .map(|k| {
            let mut q = base.to_vec();
            q[axis_a.index] = a_values[k / nb];
            q[axis_b.index] = b_values[k % nb];
            fitness_value(pdf, model, &q)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FitnessMap {
        axis_a,
        axis_b,
        a_values,
        b_values,
        values,
        base: ParamVector::new(base.to_vec()),
    })
}
