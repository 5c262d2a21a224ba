//! Quantized hyperrectangular state space.
//!
//! The domain `Π [lower_i, upper_i)` is split into `S` uniform bins per axis.
//! Cell indices are 1-based, `1 ≤ s_i ≤ S`; field storage is dense row-major
//! with the first axis varying slowest.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest bin count for which the one-sided and central stencils are all
/// distinct.
pub const MIN_STENCIL_BINS: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DomainSpec", into = "DomainSpec")]
pub struct GridDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
    bins: usize,
    widths: Vec<f64>,
    strides: Vec<usize>,
    cell_count: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct DomainSpec {
    lower: Vec<f64>,
    upper: Vec<f64>,
    bins: usize,
}

impl TryFrom<DomainSpec> for GridDomain {
    type Error = Error;

    fn try_from(spec: DomainSpec) -> Result<Self> {
        GridDomain::new(spec.lower, spec.upper, spec.bins)
    }
}

impl From<GridDomain> for DomainSpec {
    fn from(d: GridDomain) -> Self {
        DomainSpec {
            lower: d.lower,
            upper: d.upper,
            bins: d.bins,
        }
    }
}

impl GridDomain {
    /// Any `bins ≥ 1` is a valid domain; derivative operations additionally
    /// require [`MIN_STENCIL_BINS`].
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, bins: usize) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::InvalidDomain(
                "domain needs at least one axis".into(),
            ));
        }
        if lower.len() != upper.len() {
            return Err(Error::InvalidDomain(format!(
                "{} lower bounds but {} upper bounds",
                lower.len(),
                upper.len()
            )));
        }
        if bins == 0 {
            return Err(Error::InvalidDomain("bin count must be at least 1".into()));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::InvalidDomain(format!(
                    "axis {}: need finite lower < upper, got [{lo}, {hi})",
                    i + 1
                )));
            }
        }
        let n = lower.len();
        let cell_count = (0..n)
            .try_fold(1usize, |acc, _| acc.checked_mul(bins))
            .ok_or_else(|| Error::InvalidDomain(format!("{bins}^{n} cells overflow")))?;
        let widths = lower
            .iter()
            .zip(&upper)
            .map(|(lo, hi)| (hi - lo) / bins as f64)
            .collect();
        let strides = (0..n).map(|i| bins.pow((n - 1 - i) as u32)).collect();
        Ok(Self {
            lower,
            upper,
            bins,
            widths,
            strides,
            cell_count,
        })
    }

    /// Same bounds on every axis.
    pub fn cube(n: usize, lower: f64, upper: f64, bins: usize) -> Result<Self> {
        Self::new(vec![lower; n], vec![upper; n], bins)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn cell_volume(&self) -> f64 {
        self.widths.iter().product()
    }

    pub fn cell_count(&self) -> usize {
        self.cell_count
    }

    pub(crate) fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    pub fn require_stencil(&self) -> Result<()> {
        if self.bins < MIN_STENCIL_BINS {
            Err(Error::InvalidDomain(format!(
                "finite differences need at least {MIN_STENCIL_BINS} bins per axis, got {}",
                self.bins
            )))
        } else {
            Ok(())
        }
    }

    fn check_index(&self, s: &CellIndex) -> Result<()> {
        if s.0.len() != self.dim() || s.0.iter().any(|&si| si == 0 || si > self.bins) {
            return Err(Error::IndexOutOfRange {
                index: s.0.clone(),
                bins: self.bins,
            });
        }
        Ok(())
    }

    /// Center `x_i = lower_i + (s_i − ½) Δ_i` of cell `s`.
    pub fn cell_center(&self, s: &CellIndex) -> Result<Vec<f64>> {
        self.check_index(s)?;
        Ok(s.0
            .iter()
            .enumerate()
            .map(|(i, &si)| self.axis_center(i, si - 1))
            .collect())
    }

    /// Center coordinate along `axis` for a 0-based bin.
    #[inline]
    pub(crate) fn axis_center(&self, axis: usize, bin0: usize) -> f64 {
        self.lower[axis] + (bin0 as f64 + 0.5) * self.widths[axis]
    }

    /// Writes the center of the cell at `flat` into `out`.
    pub(crate) fn center_of_flat(&self, flat: usize, out: &mut [f64]) {
        for (i, x) in out.iter_mut().enumerate() {
            *x = self.axis_center(i, (flat / self.strides[i]) % self.bins);
        }
    }

    /// Cell containing `x` under the half-open convention, or `None` when `x`
    /// lies outside the domain.
    pub fn locate(&self, x: &[f64]) -> Option<CellIndex> {
        self.locate_flat(x).map(|flat| self.cell_index(flat))
    }

    pub(crate) fn locate_flat(&self, x: &[f64]) -> Option<usize> {
        if x.len() != self.dim() {
            return None;
        }
        let mut flat = 0;
        for i in 0..x.len() {
            let xi = x[i];
            if !(xi >= self.lower[i] && xi < self.upper[i]) {
                return None;
            }
            // rounding can push values just below `upper` onto bin S
            let b = (((xi - self.lower[i]) / self.widths[i]).floor() as usize).min(self.bins - 1);
            flat += b * self.strides[i];
        }
        Some(flat)
    }

    pub fn flat_index(&self, s: &CellIndex) -> Result<usize> {
        self.check_index(s)?;
        Ok(s.0
            .iter()
            .zip(&self.strides)
            .map(|(si, stride)| (si - 1) * stride)
            .sum())
    }

    /// Inverse of [`flat_index`](Self::flat_index). Panics if out of range.
    pub fn cell_index(&self, flat: usize) -> CellIndex {
        assert!(flat < self.cell_count, "flat index {flat} out of range");
        CellIndex(
            self.strides
                .iter()
                .map(|stride| (flat / stride) % self.bins + 1)
                .collect(),
        )
    }

    /// All cells in storage order.
    pub fn cells(&self) -> impl Iterator<Item = CellIndex> + '_ {
        (0..self.cell_count).map(|flat| self.cell_index(flat))
    }
}

/// 1-based multi-index of a cell.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CellIndex(pub Vec<usize>);

impl CellIndex {
    pub fn new(s: Vec<usize>) -> Self {
        Self(s)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

impl From<Vec<usize>> for CellIndex {
    fn from(s: Vec<usize>) -> Self {
        Self(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    Density,
    Residual,
    /// Component of the probability current along a 0-based axis.
    Current(usize),
    Generic,
}

impl std::fmt::Display for FieldKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FieldKind::Density => f.write_str("density"),
            FieldKind::Residual => f.write_str("residual"),
            FieldKind::Current(axis) => write!(f, "current-{}", axis + 1),
            FieldKind::Generic => f.write_str("generic"),
        }
    }
}

impl std::str::FromStr for FieldKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "density" => Ok(FieldKind::Density),
            "residual" => Ok(FieldKind::Residual),
            "generic" => Ok(FieldKind::Generic),
            _ => s
                .strip_prefix("current-")
                .and_then(|a| a.parse::<usize>().ok())
                .filter(|&a| a >= 1)
                .map(|a| FieldKind::Current(a - 1))
                .ok_or_else(|| Error::Format(format!("unknown field kind `{s}`"))),
        }
    }
}

/// Values at every cell center of a domain.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    pub domain: GridDomain,
    pub values: Vec<f64>,
    pub kind: FieldKind,
}

impl GridField {
    pub fn new(domain: GridDomain, values: Vec<f64>, kind: FieldKind) -> Result<Self> {
        if values.len() != domain.cell_count() {
            return Err(Error::DimensionMismatch {
                what: "grid field values",
                expected: domain.cell_count(),
                actual: values.len(),
            });
        }
        Ok(Self {
            domain,
            values,
            kind,
        })
    }

    pub fn zeros(domain: GridDomain, kind: FieldKind) -> Self {
        let values = vec![0.0; domain.cell_count()];
        Self {
            domain,
            values,
            kind,
        }
    }

    /// Samples `f` at every cell center.
    pub fn from_fn(domain: GridDomain, kind: FieldKind, f: impl Fn(&[f64]) -> f64) -> Self {
        let mut x = vec![0.0; domain.dim()];
        let values = (0..domain.cell_count())
            .map(|flat| {
                domain.center_of_flat(flat, &mut x);
                f(&x)
            })
            .collect();
        Self {
            domain,
            values,
            kind,
        }
    }

    pub fn get(&self, s: &CellIndex) -> Result<f64> {
        Ok(self.values[self.domain.flat_index(s)?])
    }

    pub fn set(&mut self, s: &CellIndex, value: f64) -> Result<()> {
        let flat = self.domain.flat_index(s)?;
        self.values[flat] = value;
        Ok(())
    }

    /// Sum of squares in storage order.
    pub fn sum_of_squares(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// Whole-field numerical partial along `axis`.
    pub fn partial(&self, axis: usize) -> Result<GridField> {
        self.domain.require_stencil()?;
        check_axis(&self.domain, axis)?;
        let mut out = vec![0.0; self.values.len()];
        partial_into(&self.domain, &self.values, axis, &mut out);
        Ok(GridField {
            domain: self.domain.clone(),
            values: out,
            kind: FieldKind::Generic,
        })
    }
}

fn check_axis(domain: &GridDomain, axis: usize) -> Result<()> {
    if axis < domain.dim() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what: "axis index",
            expected: domain.dim(),
            actual: axis,
        })
    }
}

/// Forward difference at `s_i = 1`, backward at `s_i = S`, central
/// elsewhere.
pub fn numerical_partial(field: &GridField, axis: usize, s: &CellIndex) -> Result<f64> {
    field.domain.require_stencil()?;
    check_axis(&field.domain, axis)?;
    let flat = field.domain.flat_index(s)?;
    Ok(partial_at(&field.domain, &field.values, axis, flat))
}

#[inline]
pub(crate) fn partial_at(domain: &GridDomain, values: &[f64], axis: usize, flat: usize) -> f64 {
    let stride = domain.stride(axis);
    let bins = domain.bins();
    let width = domain.widths()[axis];
    let coord = (flat / stride) % bins;
    if coord == 0 {
        (values[flat + stride] - values[flat]) / width
    } else if coord == bins - 1 {
        (values[flat] - values[flat - stride]) / width
    } else {
        (values[flat + stride] - values[flat - stride]) / (2.0 * width)
    }
}

/// Callers must have checked `require_stencil` and the axis.
pub(crate) fn partial_into(domain: &GridDomain, values: &[f64], axis: usize, out: &mut [f64]) {
    for (flat, o) in out.iter_mut().enumerate() {
        *o = partial_at(domain, values, axis, flat);
    }
}
