//! Gridded density data `p̄[s] = N[s] / (N Δ₁···Δₙ)` built from a time series.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FieldKind, GridDomain, GridField};
use crate::sde::ParamVector;
use crate::simulator::TimeSeries;

/// Where the density values came from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PdfSource {
    pub model: Option<String>,
    pub params: Option<ParamVector>,
    pub seed: Option<u64>,
    /// `true` when sampled from a closed-form density instead of binned.
    pub synthetic: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PdfData {
    pub field: GridField,
    /// Samples in the time series, the normalizer `N`.
    pub total_samples: u64,
    /// Samples that fell inside the domain.
    pub retained_samples: u64,
    pub source: PdfSource,
}

impl PdfData {
    pub fn domain(&self) -> &GridDomain {
        &self.field.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.field.values
    }

    /// `Σ p̄[s] Δ₁···Δₙ`.
    pub fn mass(&self) -> f64 {
        self.field.values.iter().sum::<f64>() * self.domain().cell_volume()
    }

    pub fn discard_fraction(&self) -> f64 {
        if self.total_samples == 0 {
            0.0
        } else {
            (self.total_samples - self.retained_samples) as f64 / self.total_samples as f64
        }
    }

    /// The same data with every density multiplied by `alpha`.
    pub fn scaled(&self, alpha: f64) -> PdfData {
        let mut out = self.clone();
        out.field.values.iter_mut().for_each(|v| *v *= alpha);
        out
    }

    /// Density-valued data with no sampling metadata.
    pub fn from_field(field: GridField, source: PdfSource) -> Result<PdfData> {
        let field = GridField {
            kind: FieldKind::Density,
            ..field
        };
        if let Some((flat, &value)) = field
            .values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= 0.0 && v.is_finite()))
        {
            return Err(Error::NegativeDensity {
                index: field.domain.cell_index(flat).0,
                value,
            });
        }
        Ok(PdfData {
            field,
            total_samples: 0,
            retained_samples: 0,
            source,
        })
    }
}

const BIN_CHUNK_ROWS: usize = 1 << 16;

/// Per-cell sample counts and the number of in-domain samples.
///
/// Chunks are counted in parallel and merged with integer addition, so the
/// result does not depend on scheduling.
pub fn bin_counts(ts: &TimeSeries, domain: &GridDomain) -> Result<(Vec<u64>, u64)> {
    if ts.state_dim != domain.dim() {
        return Err(Error::DimensionMismatch {
            what: "time series state dimension",
            expected: domain.dim(),
            actual: ts.state_dim,
        });
    }
    let cells = domain.cell_count();
    let counts = ts
        .states
        .par_chunks(BIN_CHUNK_ROWS * ts.state_dim)
        .fold(
            || vec![0u64; cells],
            |mut counts, chunk| {
                for row in chunk.chunks_exact(ts.state_dim) {
                    if let Some(flat) = domain.locate_flat(row) {
                        counts[flat] += 1;
                    }
                }
                counts
            },
        )
        .reduce(
            || vec![0u64; cells],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let retained = counts.iter().sum();
    Ok((counts, retained))
}

/// Histogram density normalized by the total sample count, including
/// samples that fell outside the domain.
pub fn build_pdf(ts: &TimeSeries, domain: &GridDomain) -> Result<PdfData> {
    if ts.is_empty() {
        return Err(Error::EmptyTimeSeries);
    }
    let (counts, retained) = bin_counts(ts, domain)?;
    let total = ts.len() as u64;
    let norm = total as f64 * domain.cell_volume();
    let values = counts.iter().map(|&c| c as f64 / norm).collect();
    let pdf = PdfData {
        field: GridField::new(domain.clone(), values, FieldKind::Density)?,
        total_samples: total,
        retained_samples: retained,
        source: PdfSource {
            model: Some(ts.model.clone()),
            params: Some(ts.params.clone()),
            seed: Some(ts.seed),
            synthetic: false,
        },
    };
    if retained < total {
        log::info!(
            "{} of {total} samples ({:.4}%) fell outside the domain",
            total - retained,
            100.0 * pdf.discard_fraction()
        );
    }
    Ok(pdf)
}

/// Samples a closed-form density at every cell center.
pub fn analytic_pdf_field(pdf_fn: impl Fn(&[f64]) -> f64, domain: &GridDomain) -> Result<PdfData> {
    let field = GridField::from_fn(domain.clone(), FieldKind::Density, pdf_fn);
    PdfData::from_field(
        field,
        PdfSource {
            synthetic: true,
            ..PdfSource::default()
        },
    )
}
