//! Parameter estimation by minimizing the PDF-fitness over a subset of the
//! parameters, and one-parameter dependency sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{minimize, NelderMeadOptions, Termination};
use crate::pdf::PdfData;
use crate::residual::fitness_value;
use crate::sde::{check_len, ParamVector, SdeModel};

/// Minimize `E[p̄; q]` over the coordinates selected by `free_mask`.
///
/// `start` carries the initial guess at free indices and the fixed value
/// everywhere else.
#[derive(Clone)]
pub struct EstimationProblem<'a> {
    pub pdf: &'a PdfData,
    pub model: &'a dyn SdeModel,
    pub start: ParamVector,
    pub free_mask: Vec<bool>,
    /// One box per model parameter (entries for fixed parameters are
    /// ignored). Defaults to [`SdeModel::param_bounds`].
    pub bounds: Option<Vec<(f64, f64)>>,
    pub options: NelderMeadOptions,
}

impl<'a> EstimationProblem<'a> {
    pub fn new(
        pdf: &'a PdfData,
        model: &'a dyn SdeModel,
        start: ParamVector,
        free_mask: Vec<bool>,
    ) -> Self {
        Self {
            pdf,
            model,
            start,
            free_mask,
            bounds: None,
            options: NelderMeadOptions::default(),
        }
    }

    /// Frees the named parameters and fixes the rest.
    pub fn with_free(
        pdf: &'a PdfData,
        model: &'a dyn SdeModel,
        start: ParamVector,
        free: &[&str],
    ) -> Result<Self> {
        let mut mask = vec![false; model.param_count()];
        for name in free {
            let i = model.param_index(name).ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "unknown parameter `{name}` for {} (valid: {})",
                    model.name(),
                    model.param_names().join(", ")
                ))
            })?;
            mask[i] = true;
        }
        Ok(Self::new(pdf, model, start, mask))
    }

    pub fn with_bounds(mut self, bounds: Vec<(f64, f64)>) -> Self {
        self.bounds = Some(bounds);
        self
    }

    pub fn with_options(mut self, options: NelderMeadOptions) -> Self {
        self.options = options;
        self
    }

    pub fn free_indices(&self) -> Vec<usize> {
        (0..self.free_mask.len())
            .filter(|&i| self.free_mask[i])
            .collect()
    }

    fn bounds_or_default(&self) -> Vec<(f64, f64)> {
        self.bounds
            .clone()
            .unwrap_or_else(|| self.model.param_bounds())
    }

    pub fn validate(&self) -> Result<()> {
        let q_len = self.model.param_count();
        check_len(q_len, self.start.len(), "start parameter vector")?;
        check_len(q_len, self.free_mask.len(), "free mask")?;
        let bounds = self.bounds_or_default();
        check_len(q_len, bounds.len(), "parameter bounds")?;
        let free = self.free_indices();
        if free.is_empty() {
            return Err(Error::InvalidConfig(
                "at least one parameter must be free".into(),
            ));
        }
        for &i in &free {
            let (lo, hi) = bounds[i];
            if !(lo <= self.start[i] && self.start[i] <= hi) {
                return Err(Error::InvalidConfig(format!(
                    "initial {} = {} lies outside [{lo}, {hi}]",
                    self.model.param_names()[i],
                    self.start[i]
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub q: ParamVector,
    pub fitness: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub model: String,
    pub param_names: Vec<String>,
    pub free_mask: Vec<bool>,
    pub q_star: ParamVector,
    pub final_fitness: f64,
    pub initial_fitness: f64,
    pub evaluations: usize,
    pub converged: bool,
    pub termination: Termination,
    pub trace: Vec<TraceEntry>,
}

impl EstimationResult {
    /// Percent error of each parameter against `reference`.
    pub fn percent_errors(&self, reference: &[f64]) -> Vec<f64> {
        self.q_star
            .iter()
            .zip(reference)
            .map(|(q, r)| 100.0 * (q - r) / r)
            .collect()
    }
}

pub fn estimate(problem: &EstimationProblem<'_>) -> Result<EstimationResult> {
    problem.validate()?;
    let free = problem.free_indices();
    let all_bounds = problem.bounds_or_default();
    let bounds: Vec<(f64, f64)> = free.iter().map(|&i| all_bounds[i]).collect();
    let x0: Vec<f64> = free.iter().map(|&i| problem.start[i]).collect();

    let assemble = |x: &[f64]| -> ParamVector {
        let mut q = problem.start.clone();
        for (&i, &v) in free.iter().zip(x) {
            q[i] = v;
        }
        q
    };
    let objective =
        |x: &[f64]| fitness_value(problem.pdf, problem.model, &assemble(x)).unwrap_or(f64::NAN);

    let initial_fitness = objective(&x0);
    let minimum = minimize(objective, &x0, &bounds, &problem.options).map_err(|e| match e {
        Error::NonFiniteFitness { q } => Error::NonFiniteFitness {
            q: assemble(&q).into_inner(),
        },
        other => other,
    })?;

    Ok(EstimationResult {
        model: problem.model.name().to_string(),
        param_names: problem
            .model
            .param_names()
            .iter()
            .map(|s| s.to_string())
            .collect(),
        free_mask: problem.free_mask.clone(),
        q_star: assemble(&minimum.x),
        final_fitness: minimum.f,
        initial_fitness,
        evaluations: minimum.evaluations,
        converged: minimum.termination.converged(),
        termination: minimum.termination,
        trace: minimum
            .trace
            .iter()
            .map(|(x, f)| TraceEntry {
                q: assemble(x),
                fitness: *f,
            })
            .collect(),
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMode {
    /// Sequential; each point starts from the previous solution.
    #[default]
    Warm,
    /// Every point starts from the problem's initial guess; points run in
    /// parallel.
    Cold,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub sweep_value: f64,
    /// `NaN` when the point failed.
    pub solved_value: f64,
    pub fitness: f64,
    pub converged: bool,
    pub evaluations: usize,
    pub error: Option<String>,
}

/// For each value of parameter `sweep_index`, solves a one-dimensional
/// estimate over `solve_index` with every other parameter fixed at
/// `problem.start`. Per-point failures are recorded, not propagated.
pub fn sweep_dependency(
    problem: &EstimationProblem<'_>,
    sweep_index: usize,
    sweep_values: &[f64],
    solve_index: usize,
    mode: SweepMode,
) -> Result<Vec<SweepPoint>> {
    let q_len = problem.model.param_count();
    if sweep_index >= q_len || solve_index >= q_len {
        return Err(Error::InvalidConfig(format!(
            "sweep/solve indices ({sweep_index}, {solve_index}) out of range for {q_len} parameters"
        )));
    }
    if sweep_index == solve_index {
        return Err(Error::InvalidConfig(
            "sweep and solve parameters must differ".into(),
        ));
    }
    let mut mask = vec![false; q_len];
    mask[solve_index] = true;
    let base = EstimationProblem {
        free_mask: mask,
        ..problem.clone()
    };
    base.validate()?;

    let solve_at = |value: f64, init: f64| -> SweepPoint {
        let mut p = base.clone();
        p.start[sweep_index] = value;
        p.start[solve_index] = init;
        match estimate(&p) {
            Ok(r) => SweepPoint {
                sweep_value: value,
                solved_value: r.q_star[solve_index],
                fitness: r.final_fitness,
                converged: r.converged,
                evaluations: r.evaluations,
                error: None,
            },
            Err(e) => SweepPoint {
                sweep_value: value,
                solved_value: f64::NAN,
                fitness: f64::NAN,
                converged: false,
                evaluations: 0,
                error: Some(e.to_string()),
            },
        }
    };

    let cold_init = base.start[solve_index];
    let points = match mode {
        SweepMode::Cold => sweep_values
            .par_iter()
            .map(|&v| solve_at(v, cold_init))
            .collect(),
        SweepMode::Warm => {
            let mut out: Vec<SweepPoint> = Vec::with_capacity(sweep_values.len());
            for &v in sweep_values {
                let init = out
                    .last()
                    .filter(|p| p.error.is_none() && p.solved_value.is_finite())
                    .map_or(cold_init, |p| p.solved_value);
                out.push(solve_at(v, init));
            }
            out
        }
    };
    Ok(points)
}
