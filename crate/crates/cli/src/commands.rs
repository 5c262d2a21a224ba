use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use fpfit::estimator::{estimate, sweep_dependency, EstimationProblem, SweepMode};
use fpfit::grid::{GridDomain, MIN_STENCIL_BINS};
use fpfit::io::{
    load_pdf, load_time_series, sidecar_path, write_fitness_map_csv, write_grid_field,
    write_grid_field_csv, write_sweep_csv, write_time_series, write_time_series_csv,
    EstimationReport, FitnessSummary, PdfMeta, TimeSeriesMeta,
};
use fpfit::models::{model_by_name, LVS_ADDITIVE, LVS_ADD_MULT};
use fpfit::optim::NelderMeadOptions;
use fpfit::pdf::{build_pdf as bin_samples, PdfData};
use fpfit::residual::{fitness_map, pdf_fitness, ParamAxis};
use fpfit::simulator::{simulate as run_simulation, SimConfig, DEFAULT_DT, DEFAULT_SAMPLES};
use fpfit::{ParamVector, SdeModel};

use crate::config::{parse_assignments, AxisSpec, Bound, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::{check_targets, Staged};
use crate::{
    BuildPdfArgs, FitArgs, FitnessArgs, MapArgs, ModelArgs, OptimizerArgs, SimulateArgs, SweepArgs,
};

/// `println!` that tolerates a closed stdout (e.g. piped into `head`).
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_BINS: usize = 50;
pub const DEFAULT_BOUND: f64 = 4.0;
const DEFAULT_SERIES: &str = "series.fts";
const DEFAULT_PDF: &str = "pdf.csv";

/// Parameter values of the reference experiments.
fn default_params(model: &str) -> Option<Vec<f64>> {
    match model {
        LVS_ADDITIVE => Some(vec![1.0, 0.5, 1.0]),
        LVS_ADD_MULT => Some(vec![1.0, 0.5, 1.0, 0.6]),
        _ => None,
    }
}

/// Free parameters and their starting values when none are configured.
fn default_fit(model: &str) -> Option<Vec<(&'static str, f64)>> {
    match model {
        LVS_ADDITIVE => Some(vec![("k", 2.0), ("c", 1.0)]),
        LVS_ADD_MULT => Some(vec![("nu1", 0.5), ("nu2", 0.2)]),
        _ => None,
    }
}

fn resolve_model(cfg: &RunConfig, args: &ModelArgs) -> CliResult<Arc<dyn SdeModel>> {
    let name = args
        .model
        .as_deref()
        .or(cfg.model.as_deref())
        .unwrap_or(LVS_ADDITIVE);
    model_by_name(name).map_err(|e| CliError::Config(e.to_string()))
}

fn param_index(model: &dyn SdeModel, name: &str) -> CliResult<usize> {
    model.param_index(name).ok_or_else(|| {
        CliError::Config(format!(
            "unknown parameter `{name}` for {} (valid: {})",
            model.name(),
            model.param_names().join(", ")
        ))
    })
}

fn apply_named(
    model: &dyn SdeModel,
    q: &mut [f64],
    named: &BTreeMap<String, f64>,
) -> CliResult<()> {
    for (name, &v) in named {
        q[param_index(model, name)?] = v;
    }
    Ok(())
}

fn resolve_params(
    cfg: &RunConfig,
    args: &ModelArgs,
    model: &dyn SdeModel,
) -> CliResult<ParamVector> {
    let mut q = default_params(model.name()).unwrap_or_else(|| vec![f64::NAN; model.param_count()]);
    apply_named(model, &mut q, &cfg.params)?;
    if let Some(s) = &args.params {
        apply_named(model, &mut q, &parse_assignments(s)?)?;
    }
    if let Some(i) = q.iter().position(|v| v.is_nan()) {
        return Err(CliError::Config(format!(
            "no value for parameter `{}`",
            model.param_names()[i]
        )));
    }
    Ok(ParamVector::new(q))
}

fn optimizer_options(cfg: &RunConfig, args: &OptimizerArgs) -> NelderMeadOptions {
    let mut o = cfg.optimizer.clone().unwrap_or_default();
    if let Some(v) = args.tol_x {
        o.tol_x = v;
    }
    if let Some(v) = args.tol_f {
        o.tol_f = v;
    }
    if let Some(v) = args.max_evals {
        o.max_evals = v;
    }
    o
}

fn pdf_input(cfg: &RunConfig, flag: &Option<PathBuf>) -> PathBuf {
    flag.clone()
        .or_else(|| cfg.pdf.output.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_PDF))
}

fn read_pdf(path: &Path) -> CliResult<PdfData> {
    load_pdf(path).map_err(|source| match source {
        fpfit::Error::Io(e) => CliError::io(path, e),
        source => CliError::Read {
            path: path.to_path_buf(),
            source,
        },
    })
}

fn fmt_params(model: &dyn SdeModel, q: &[f64]) -> String {
    model
        .param_names()
        .iter()
        .zip(q)
        .map(|(n, v)| format!("{n}={v}"))
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn simulate(cfg: &RunConfig, args: SimulateArgs, force: bool) -> CliResult<()> {
    let model = resolve_model(cfg, &args.model)?;
    let q = resolve_params(cfg, &args.model, model.as_ref())?;
    let n_samples = args
        .n_samples
        .map(|n| n as usize)
        .or(cfg.simulate.n_samples)
        .unwrap_or(DEFAULT_SAMPLES);
    if n_samples == 0 {
        return Err(CliError::Config("n_samples must be at least 1".into()));
    }
    let sim = SimConfig {
        dt: args.dt.or(cfg.simulate.dt).unwrap_or(DEFAULT_DT),
        n_samples,
        skip: args.skip.or(cfg.simulate.skip).unwrap_or(n_samples),
        x0: args.x0.or_else(|| cfg.simulate.x0.clone()),
        seed: args.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED),
        scheme: args.scheme.or(cfg.simulate.scheme).unwrap_or_default(),
    };
    sim.validate()
        .map_err(|e| CliError::Config(e.to_string()))?;

    let out = args
        .out
        .or_else(|| cfg.simulate.output.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_SERIES));
    let meta = sidecar_path(&out);
    let csv = args.csv.or_else(|| cfg.simulate.csv.clone());
    let mut targets = vec![out.as_path(), meta.as_path()];
    targets.extend(csv.as_deref());
    check_targets(&targets, force)?;

    let ts = run_simulation(model.as_ref(), &q, &sim)?;
    let mut staged = Staged::default();
    staged.write(&out, |w| write_time_series(w, &ts))?;
    staged.write_json(&meta, &TimeSeriesMeta::from(&ts))?;
    if let Some(csv) = &csv {
        staged.write(csv, |w| write_time_series_csv(w, &ts))?;
    }
    staged.commit()?;
    log::info!(
        "{} samples of {} ({}) written to {}",
        ts.len(),
        model.name(),
        fmt_params(model.as_ref(), &q),
        out.display()
    );
    Ok(())
}

pub fn build_pdf(cfg: &RunConfig, args: BuildPdfArgs, force: bool) -> CliResult<()> {
    let input = args
        .input
        .or_else(|| cfg.pdf.input.clone())
        .or_else(|| cfg.simulate.output.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_SERIES));
    let out = pdf_input(cfg, &args.out);
    let meta_path = sidecar_path(&out);
    check_targets(&[&out, &meta_path], force)?;

    let bins = args.bins.or(cfg.pdf.bins).unwrap_or(DEFAULT_BINS);
    let lower = args
        .lower
        .map(Bound::PerAxis)
        .or_else(|| cfg.pdf.lower.clone())
        .unwrap_or(Bound::Scalar(-DEFAULT_BOUND));
    let upper = args
        .upper
        .map(Bound::PerAxis)
        .or_else(|| cfg.pdf.upper.clone())
        .unwrap_or(Bound::Scalar(DEFAULT_BOUND));

    let ts = load_time_series(&input).map_err(|source| match source {
        fpfit::Error::Io(e) => CliError::io(&input, e),
        source => CliError::Read {
            path: input.clone(),
            source,
        },
    })?;
    let domain = GridDomain::new(
        lower.expand(ts.state_dim)?,
        upper.expand(ts.state_dim)?,
        bins,
    )
    .map_err(|e| CliError::Config(e.to_string()))?;
    if bins < MIN_STENCIL_BINS {
        log::warn!(
            "S = {bins} is below the {MIN_STENCIL_BINS} bins per axis the residual needs; \
             the density can be stored but not fitted"
        );
    }
    let pdf = bin_samples(&ts, &domain)?;
    eprintln!(
        "{} of {} samples outside the domain (discard fraction {:.3e}), mass {:.6}",
        pdf.total_samples - pdf.retained_samples,
        pdf.total_samples,
        pdf.discard_fraction(),
        pdf.mass()
    );

    let binary = out.extension().is_some_and(|e| e == "fgf");
    let mut staged = Staged::default();
    staged.write(&out, |w| {
        if binary {
            write_grid_field(w, &pdf.field)
        } else {
            write_grid_field_csv(w, &pdf.field)
        }
    })?;
    staged.write_json(&meta_path, &PdfMeta::from(&pdf))?;
    staged.commit()
}

pub fn fitness(cfg: &RunConfig, args: FitnessArgs, force: bool) -> CliResult<()> {
    let model = resolve_model(cfg, &args.model)?;
    let q = resolve_params(cfg, &args.model, model.as_ref())?;
    let input = pdf_input(cfg, &args.pdf);
    let out = args
        .out
        .or_else(|| cfg.fitness.output.clone())
        .unwrap_or_else(|| PathBuf::from("fitness.json"));
    let with_fields = args.fields || cfg.fitness.fields.unwrap_or(false);
    let residual_path = out.with_extension("residual.csv");
    let current_paths: Vec<PathBuf> = (1..=model.state_dim())
        .map(|i| out.with_extension(format!("current-{i}.csv")))
        .collect();
    let mut targets = vec![out.as_path()];
    if with_fields {
        targets.push(&residual_path);
        targets.extend(current_paths.iter().map(PathBuf::as_path));
    }
    check_targets(&targets, force)?;

    let pdf = read_pdf(&input)?;
    let report = pdf_fitness(&pdf, model.as_ref(), &q)?;
    say!(
        "E = {:e}  at {}",
        report.fitness,
        fmt_params(model.as_ref(), &q)
    );

    let mut staged = Staged::default();
    staged.write_json(&out, &FitnessSummary::new(&report, model.param_names()))?;
    if with_fields {
        staged.write(&residual_path, |w| {
            write_grid_field_csv(w, &report.residual_field)
        })?;
        for (path, field) in current_paths.iter().zip(&report.current_fields) {
            staged.write(path, |w| write_grid_field_csv(w, field))?;
        }
    }
    staged.commit()
}

fn to_axis(
    model: &dyn SdeModel,
    spec: &AxisSpec,
    resolution: Option<usize>,
) -> CliResult<ParamAxis> {
    Ok(ParamAxis::new(
        param_index(model, &spec.param)?,
        spec.lower,
        spec.upper,
        resolution.unwrap_or(spec.points),
    ))
}

pub fn map(cfg: &RunConfig, args: MapArgs, force: bool) -> CliResult<()> {
    let model = resolve_model(cfg, &args.model)?;
    let base = resolve_params(cfg, &args.model, model.as_ref())?;
    let input = pdf_input(cfg, &args.pdf);
    let out = args
        .out
        .or_else(|| cfg.map.output.clone())
        .unwrap_or_else(|| PathBuf::from("map.csv"));
    let resolution = args.resolution.or(cfg.map.resolution);
    let (Some(a), Some(b)) = (
        args.a.or_else(|| cfg.map.a.clone()),
        args.b.or_else(|| cfg.map.b.clone()),
    ) else {
        return Err(CliError::Config(
            "map needs both axes (--a and --b, or [map] a/b)".into(),
        ));
    };
    let axis_a = to_axis(model.as_ref(), &a, resolution)?;
    let axis_b = to_axis(model.as_ref(), &b, resolution)?;
    check_targets(&[&out], force)?;

    let pdf = read_pdf(&input)?;
    let m = fitness_map(&pdf, model.as_ref(), &base, axis_a, axis_b)?;
    if let Some((ia, ib, e)) = m.argmin() {
        say!(
            "minimum E = {e:e} at {}={}, {}={}",
            a.param,
            m.a_values[ia],
            b.param,
            m.b_values[ib]
        );
    }
    let mut staged = Staged::default();
    staged.write(&out, |w| write_fitness_map_csv(w, &m, model.param_names()))?;
    staged.commit()
}

pub fn fit(cfg: &RunConfig, args: FitArgs, force: bool) -> CliResult<()> {
    let model = resolve_model(cfg, &args.model)?;
    let fixed = resolve_params(cfg, &args.model, model.as_ref())?;
    let input = pdf_input(cfg, &args.pdf);
    let out = args
        .out
        .or_else(|| cfg.fit.output.clone())
        .unwrap_or_else(|| PathBuf::from("fit.json"));

    let defaults = default_fit(model.name()).unwrap_or_default();
    let free: Vec<String> = args
        .free
        .or_else(|| cfg.fit.free.clone())
        .unwrap_or_else(|| defaults.iter().map(|(n, _)| n.to_string()).collect());
    if free.is_empty() {
        return Err(CliError::Config("no free parameters given (--free)".into()));
    }
    let mut start = fixed.clone();
    let mut mask = vec![false; model.param_count()];
    for name in &free {
        let i = param_index(model.as_ref(), name)?;
        mask[i] = true;
        if let Some((_, v)) = defaults.iter().find(|(n, _)| n == name) {
            start[i] = *v;
        }
    }
    let mut init = cfg.fit.init.clone();
    if let Some(s) = &args.init {
        init.extend(parse_assignments(s)?);
    }
    for (name, &v) in &init {
        let i = param_index(model.as_ref(), name)?;
        if !mask[i] {
            return Err(CliError::Config(format!(
                "initial value given for `{name}`, which is not free"
            )));
        }
        start[i] = v;
    }
    let reference = match (&args.reference, &cfg.reference) {
        (Some(s), _) => Some(parse_assignments(s)?),
        (None, Some(r)) => Some(r.clone()),
        (None, None) => None,
    }
    .map(|named| -> CliResult<ParamVector> {
        let mut r = fixed.clone();
        apply_named(model.as_ref(), &mut r, &named)?;
        Ok(r)
    })
    .transpose()?;
    check_targets(&[&out], force)?;

    let pdf = read_pdf(&input)?;
    let problem = EstimationProblem::new(&pdf, model.as_ref(), start, mask)
        .with_options(optimizer_options(cfg, &args.optimizer));
    problem
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let result = estimate(&problem)?;
    let report = EstimationReport::new(result, reference);

    let r = &report.result;
    say!("q* = {}", fmt_params(model.as_ref(), &r.q_star));
    say!("E  = {:e}", r.final_fitness);
    if let Some(errs) = &report.percent_errors {
        let parts: Vec<String> = model
            .param_names()
            .iter()
            .zip(errs)
            .zip(&r.free_mask)
            .filter(|(_, &free)| free)
            .map(|((n, e), _)| format!("{n} {e:+.3}%"))
            .collect();
        say!("error vs reference: {}", parts.join(", "));
    }
    say!(
        "{} ({}) after {} evaluations",
        if r.converged {
            "converged"
        } else {
            "not converged"
        },
        r.termination,
        r.evaluations
    );
    if !r.converged {
        log::warn!("evaluation budget exhausted before the tolerances were met");
    }
    let mut staged = Staged::default();
    staged.write_json(&out, &report)?;
    staged.commit()
}

pub fn sweep(cfg: &RunConfig, args: SweepArgs, force: bool) -> CliResult<()> {
    let model = resolve_model(cfg, &args.model)?;
    let mut start = resolve_params(cfg, &args.model, model.as_ref())?;
    let input = pdf_input(cfg, &args.pdf);
    let out = args
        .out
        .or_else(|| cfg.sweep.output.clone())
        .unwrap_or_else(|| PathBuf::from("sweep.csv"));
    let (Some(sweep_name), Some(solve_name)) = (
        args.sweep.or_else(|| cfg.sweep.sweep.clone()),
        args.solve.or_else(|| cfg.sweep.solve.clone()),
    ) else {
        return Err(CliError::Config(
            "sweep needs --sweep and --solve parameter names".into(),
        ));
    };
    let sweep_index = param_index(model.as_ref(), &sweep_name)?;
    let solve_index = param_index(model.as_ref(), &solve_name)?;
    let values = match (args.values, args.range) {
        (Some(v), _) => v,
        (None, Some(r)) => r.values(),
        (None, None) => match (&cfg.sweep.values, &cfg.sweep.range) {
            (Some(v), _) => v.clone(),
            (None, Some(r)) => r.values(),
            (None, None) => {
                return Err(CliError::Config("sweep needs --values or --range".into()));
            }
        },
    };
    if values.is_empty() {
        return Err(CliError::Config("sweep has no values".into()));
    }
    if let Some(init) = args.init.or(cfg.sweep.init) {
        start[solve_index] = init;
    }
    let mode: SweepMode = args
        .mode
        .map(Into::into)
        .or(cfg.sweep.mode)
        .unwrap_or_default();
    check_targets(&[&out], force)?;

    let pdf = read_pdf(&input)?;
    let mut problem = EstimationProblem::new(
        &pdf,
        model.as_ref(),
        start,
        vec![false; model.param_count()],
    )
    .with_options(optimizer_options(cfg, &args.optimizer));
    problem.free_mask[solve_index] = true;
    let points = sweep_dependency(&problem, sweep_index, &values, solve_index, mode)
        .map_err(|e| CliError::Config(e.to_string()))?;

    say!(
        "{:>12} {:>14} {:>12}  converged",
        sweep_name,
        format!("{solve_name}_hat"),
        "E"
    );
    for p in &points {
        say!(
            "{:>12.6} {:>14.8} {:>12.4e}  {}",
            p.sweep_value,
            p.solved_value,
            p.fitness,
            p.converged
        );
        if let Some(err) = &p.error {
            log::warn!("{sweep_name} = {}: {err}", p.sweep_value);
        }
    }
    let mut staged = Staged::default();
    staged.write(&out, |w| {
        write_sweep_csv(w, &points, &sweep_name, &solve_name)
    })?;
    staged.commit()
}
