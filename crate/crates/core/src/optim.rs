//! Bounded Nelder–Mead simplex minimization.
//!
//! Trial points are projected onto the box before evaluation, so every
//! stored vertex is feasible. Non-finite objective values count as `+∞`,
//! which makes the simplex contract away from them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;
/// Halvings of an initial-simplex step whose vertex evaluates non-finite.
const MAX_STEP_HALVINGS: usize = 30;
/// Consecutive shrinks whose new vertices are all non-finite.
const MAX_BLIND_SHRINKS: usize = 30;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NelderMeadOptions {
    /// Stop when every vertex is within this distance (∞-norm) of the best.
    pub tol_x: f64,
    /// Stop when `f_worst − f_best` falls below this.
    pub tol_f: f64,
    pub max_evals: usize,
    /// Initial step per coordinate, relative to its magnitude (absolute
    /// when the coordinate is zero).
    pub initial_scale: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            tol_x: 1e-8,
            tol_f: 1e-12,
            max_evals: 2000,
            initial_scale: 0.1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    SimplexDiameter,
    FitnessSpread,
    MaxEvaluations,
}

impl Termination {
    pub fn converged(self) -> bool {
        !matches!(self, Termination::MaxEvaluations)
    }
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Termination::SimplexDiameter => "simplex-diameter",
            Termination::FitnessSpread => "fitness-spread",
            Termination::MaxEvaluations => "max-evaluations",
        })
    }
}

#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub evaluations: usize,
    pub termination: Termination,
    /// Best vertex after each iteration.
    pub trace: Vec<(Vec<f64>, f64)>,
}

struct Objective<'a, F> {
    f: F,
    bounds: &'a [(f64, f64)],
    evals: usize,
}

impl<F: FnMut(&[f64]) -> f64> Objective<'_, F> {
    fn project(&self, x: &mut [f64]) {
        for (xi, &(lo, hi)) in x.iter_mut().zip(self.bounds) {
            *xi = xi.clamp(lo, hi);
        }
    }

    fn eval(&mut self, mut x: Vec<f64>) -> (Vec<f64>, f64) {
        self.project(&mut x);
        self.evals += 1;
        let v = (self.f)(&x);
        (x, if v.is_finite() { v } else { f64::INFINITY })
    }
}

/// Minimizes `f` from `x0` inside `bounds` (one `(lo, hi)` per coordinate).
pub fn minimize<F>(
    f: F,
    x0: &[f64],
    bounds: &[(f64, f64)],
    opts: &NelderMeadOptions,
) -> Result<Minimum>
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = x0.len();
    if dim == 0 || bounds.len() != dim {
        return Err(Error::InvalidConfig(format!(
            "need one bound per coordinate and at least one coordinate, got {dim} coordinates and {} bounds",
            bounds.len()
        )));
    }
    if let Some((lo, hi)) = bounds.iter().find(|(lo, hi)| !(lo <= hi)) {
        return Err(Error::InvalidConfig(format!("empty bound [{lo}, {hi}]")));
    }
    let mut obj = Objective {
        f,
        bounds,
        evals: 0,
    };

    let (x0, f0) = obj.eval(x0.to_vec());
    if !f0.is_finite() {
        return Err(Error::NonFiniteFitness { q: x0 });
    }
    let mut simplex = vec![(x0.clone(), f0)];
    for i in 0..dim {
        let mut h = if x0[i] != 0.0 {
            opts.initial_scale * x0[i].abs()
        } else {
            opts.initial_scale
        };
        let mut vertex = None;
        for _ in 0..MAX_STEP_HALVINGS {
            let mut v = x0.clone();
            v[i] += h;
            obj.project(&mut v);
            if v[i] == x0[i] {
                // pinned at the upper bound; step the other way
                v[i] = x0[i] - h;
            }
            let (v, fv) = obj.eval(v);
            if fv.is_finite() && v[i] != x0[i] {
                vertex = Some((v, fv));
                break;
            }
            h *= 0.5;
        }
        let vertex = vertex.ok_or_else(|| {
            let mut q = x0.clone();
            q[i] += h;
            Error::NonFiniteFitness { q }
        })?;
        simplex.push(vertex);
    }

    let mut trace = Vec::new();
    let mut blind_shrinks = 0;
    let termination = loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        trace.push(simplex[0].clone());

        let best = &simplex[0];
        let diameter = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&best.0).map(|(a, b)| (a - b).abs()))
            .fold(0.0f64, f64::max);
        if diameter < opts.tol_x {
            break Termination::SimplexDiameter;
        }
        if simplex[dim].1 - best.1 < opts.tol_f {
            break Termination::FitnessSpread;
        }
        if obj.evals >= opts.max_evals {
            break Termination::MaxEvaluations;
        }

        let centroid: Vec<f64> = (0..dim)
            .map(|k| simplex[..dim].iter().map(|(x, _)| x[k]).sum::<f64>() / dim as f64)
            .collect();
        let along = |from: &[f64], t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(from)
                .map(|(c, x)| c + t * (x - c))
                .collect()
        };
        let worst = simplex[dim].clone();
        let (f_best, f_second) = (simplex[0].1, simplex[dim - 1].1);

        let raw = along(&worst.0, -REFLECT);
        let reflected = obj.eval(raw.clone());
        // a clipped reflection is shorter than the step the outside
        // contraction assumes and can pull the simplex flat onto a bound
        let clipped = reflected.0 != raw;
        if reflected.1 < f_best {
            let expanded = obj.eval(along(&reflected.0, EXPAND));
            simplex[dim] = if expanded.1 < reflected.1 {
                expanded
            } else {
                reflected
            };
            continue;
        }
        if reflected.1 < f_second {
            simplex[dim] = reflected;
            continue;
        }
        let contracted = if reflected.1 < worst.1 && !clipped {
            let c = obj.eval(along(&reflected.0, CONTRACT));
            (c.1 <= reflected.1).then_some(c)
        } else {
            let c = obj.eval(along(&worst.0, CONTRACT));
            (c.1 < worst.1).then_some(c)
        };
        if let Some(c) = contracted {
            simplex[dim] = c;
            continue;
        }

        let anchor = simplex[0].0.clone();
        let mut all_blind = true;
        for vertex in simplex.iter_mut().skip(1) {
            let x = anchor
                .iter()
                .zip(&vertex.0)
                .map(|(a, v)| a + SHRINK * (v - a))
                .collect();
            *vertex = obj.eval(x);
            all_blind &= !vertex.1.is_finite();
        }
        if all_blind {
            blind_shrinks += 1;
            if blind_shrinks >= MAX_BLIND_SHRINKS {
                return Err(Error::NonFiniteFitness {
                    q: simplex[dim].0.clone(),
                });
            }
        } else {
            blind_shrinks = 0;
        }
    };

    let (x, f) = simplex.swap_remove(0);
    Ok(Minimum {
        x,
        f,
        evaluations: obj.evals,
        termination,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const FREE: (f64, f64) = (f64::NEG_INFINITY, f64::INFINITY);

    fn tight() -> NelderMeadOptions {
        NelderMeadOptions {
            max_evals: 10_000,
            ..NelderMeadOptions::default()
        }
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let m = minimize(f, &[-1.2, 1.0], &[FREE; 2], &tight()).unwrap();
        assert!(m.termination.converged());
        assert!(
            (m.x[0] - 1.0).abs() < 1e-5 && (m.x[1] - 1.0).abs() < 1e-5,
            "{:?}",
            m.x
        );
    }

    #[test]
    fn one_dimensional_parabola() {
        // a target symmetric to the dyadic iterates can hit an exact f-tie
        // and stop on the spread test, so keep it off the binary lattice
        let m = minimize(|x| (x[0] - 0.37).powi(2), &[2.0], &[FREE], &tight()).unwrap();
        assert!((m.x[0] - 0.37).abs() < 1e-5, "{m:?}");
    }

    #[test]
    fn active_bound_is_respected() {
        let f = |x: &[f64]| (x[0] + 1.0).powi(2) + (x[1] - 2.0).powi(2);
        let m = minimize(f, &[1.0, 1.0], &[(0.0, 10.0), FREE], &tight()).unwrap();
        assert!(m.x[0].abs() < 1e-7);
        assert!((m.x[1] - 2.0).abs() < 1e-6);
        assert!(m.trace.iter().all(|(x, _)| x[0] >= 0.0));
    }

    #[test]
    fn start_on_upper_bound_steps_inward() {
        let m = minimize(|x| (x[0] - 0.5).powi(2), &[1.0], &[(0.0, 1.0)], &tight()).unwrap();
        assert!((m.x[0] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn reflection_folded_onto_bound_does_not_collapse() {
        // from 0.405 the expansions run into the bound at 0, which is where
        // the centroid sits once the simplex is {0, 0.162}
        let f = |x: &[f64]| 9.0 * (x[0] - 0.08).powi(2);
        let m = minimize(f, &[0.405], &[(0.0, f64::INFINITY)], &tight()).unwrap();
        assert!((m.x[0] - 0.08).abs() < 1e-5, "{m:?}");
    }

    #[test]
    fn trace_is_monotone() {
        let f = |x: &[f64]| (x[0] - 3.0).powi(4) + (x[0] - x[1]).powi(2);
        let m = minimize(f, &[0.0, 5.0], &[FREE; 2], &tight()).unwrap();
        assert!(m.trace.windows(2).all(|w| w[1].1 <= w[0].1));
        assert_eq!(m.trace.last().unwrap().1, m.f);
    }

    #[test]
    fn flat_objective_stops_on_spread_without_moving() {
        let m = minimize(|_| 4.0, &[0.7], &[FREE], &tight()).unwrap();
        assert_eq!(m.termination, Termination::FitnessSpread);
        assert_eq!(m.x, vec![0.7]);
    }

    #[test]
    fn non_finite_region_is_avoided() {
        let f = |x: &[f64]| {
            if x[0] > 1.05 {
                f64::NAN
            } else {
                (x[0] - 1.0).powi(2)
            }
        };
        let m = minimize(f, &[1.0 / 0.6], &[FREE], &tight());
        assert!(m.is_err(), "start point is non-finite");
        let m = minimize(f, &[0.2], &[FREE], &tight()).unwrap();
        assert!((m.x[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn non_finite_initial_vertex_halves_step() {
        // x0 = 1, default step 0.1 lands in the NaN region
        let f = |x: &[f64]| {
            if x[0] > 1.03 {
                f64::INFINITY
            } else {
                (x[0] - 0.37).powi(2)
            }
        };
        let m = minimize(f, &[1.0], &[FREE], &tight()).unwrap();
        assert!(
            (m.x[0] - 0.37).abs() < 1e-5,
            "{:?}",
            (m.x, m.f, m.termination)
        );
    }

    #[test]
    fn evaluation_budget_is_enforced() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let opts = NelderMeadOptions {
            max_evals: 25,
            ..NelderMeadOptions::default()
        };
        let m = minimize(f, &[-1.2, 1.0], &[FREE; 2], &opts).unwrap();
        assert_eq!(m.termination, Termination::MaxEvaluations);
        assert!(!m.termination.converged());
        assert!(m.evaluations < 25 + 3);
    }

    #[test]
    fn bad_inputs() {
        let opts = NelderMeadOptions::default();
        assert!(minimize(|_| 0.0, &[], &[], &opts).is_err());
        assert!(minimize(|_| 0.0, &[1.0], &[FREE, FREE], &opts).is_err());
        assert!(minimize(|_| 0.0, &[1.0], &[(2.0, 1.0)], &opts).is_err());
    }
}
