//! File formats.
//!
//! * Time series (`FPFTS1`): little-endian header `magic[6] | n: u64 |
//!   N: u64 | dt: f64 | seed: u64` followed by `N·n` `f64` values, row-major.
//! * Grid field (`FPFGF1`): `magic[6] | n: u64 | S: u64 | lower: f64[n] |
//!   upper: f64[n]` followed by `S^n` `f64` values in storage order.
//! * Grid field CSV: `#`-prefixed metadata lines (kind, bins, one line per
//!   axis), a header `s1,…,sn,value`, then one row per cell.
//! * JSON sidecars next to binary files (`<file>.json`) carry the metadata
//!   that the binary headers do not.
//!
//! Floats in text formats use Rust's shortest round-trip representation.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{EstimationResult, SweepPoint};
use crate::grid::{FieldKind, GridDomain, GridField};
use crate::pdf::{PdfData, PdfSource};
use crate::residual::{FitnessMap, FitnessReport};
use crate::sde::ParamVector;
use crate::simulator::{Scheme, TimeSeries};

pub const TIME_SERIES_MAGIC: &[u8; 6] = b"FPFTS1";
pub const GRID_FIELD_MAGIC: &[u8; 6] = b"FPFGF1";

/// `<path>.json`
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_bits(read_u64(r)?))
}

fn read_f64s<R: Read>(r: &mut R, count: usize) -> Result<Vec<f64>> {
    let bytes = count
        .checked_mul(8)
        .ok_or_else(|| Error::Format(format!("{count} values overflow")))?;
    let mut buf = vec![0u8; bytes];
    r.read_exact(&mut buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Format(format!("truncated payload, expected {count} values"))
        } else {
            Error::Io(e)
        }
    })?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

fn write_f64s<W: Write>(w: &mut W, values: &[f64]) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn expect_magic<R: Read>(r: &mut R, magic: &[u8; 6]) -> Result<()> {
    let mut m = [0u8; 6];
    r.read_exact(&mut m)?;
    if &m != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&m),
            String::from_utf8_lossy(magic)
        )));
    }
    Ok(())
}

fn expect_eof<R: Read>(r: &mut R) -> Result<()> {
    let mut b = [0u8; 1];
    if r.read(&mut b)? != 0 {
        return Err(Error::Format("trailing bytes after payload".into()));
    }
    Ok(())
}

// ---------------------------------------------------------------- time series

/// Metadata written next to a time-series file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesMeta {
    pub model: String,
    pub params: ParamVector,
    pub state_dim: usize,
    pub n_samples: usize,
    pub dt: f64,
    pub skip: usize,
    pub seed: u64,
    pub scheme: Scheme,
}

impl From<&TimeSeries> for TimeSeriesMeta {
    fn from(ts: &TimeSeries) -> Self {
        Self {
            model: ts.model.clone(),
            params: ts.params.clone(),
            state_dim: ts.state_dim,
            n_samples: ts.len(),
            dt: ts.dt,
            skip: ts.skip,
            seed: ts.seed,
            scheme: ts.scheme,
        }
    }
}

pub fn write_time_series<W: Write>(w: &mut W, ts: &TimeSeries) -> Result<()> {
    w.write_all(TIME_SERIES_MAGIC)?;
    w.write_all(&(ts.state_dim as u64).to_le_bytes())?;
    w.write_all(&(ts.len() as u64).to_le_bytes())?;
    w.write_all(&ts.dt.to_le_bytes())?;
    w.write_all(&ts.seed.to_le_bytes())?;
    write_f64s(w, &ts.states)
}

/// Reads the binary payload; model metadata comes from `meta` when given.
pub fn read_time_series<R: Read>(r: &mut R, meta: Option<TimeSeriesMeta>) -> Result<TimeSeries> {
    expect_magic(r, TIME_SERIES_MAGIC)?;
    let n = read_u64(r)? as usize;
    let count = read_u64(r)? as usize;
    let dt = read_f64(r)?;
    let seed = read_u64(r)?;
    if n == 0 {
        return Err(Error::Format("state dimension 0".into()));
    }
    let total = n
        .checked_mul(count)
        .ok_or_else(|| Error::Format("sample count overflow".into()))?;
    let states = read_f64s(r, total)?;
    expect_eof(r)?;
    if let Some(meta) = &meta {
        if meta.state_dim != n || meta.n_samples != count {
            return Err(Error::Format(format!(
                "sidecar describes {}x{} samples, file holds {count}x{n}",
                meta.n_samples, meta.state_dim
            )));
        }
    }
    let meta = meta.unwrap_or(TimeSeriesMeta {
        model: String::new(),
        params: ParamVector::new(vec![]),
        state_dim: n,
        n_samples: count,
        dt,
        skip: 0,
        seed,
        scheme: Scheme::default(),
    });
    Ok(TimeSeries {
        dt,
        state_dim: n,
        states,
        model: meta.model,
        params: meta.params,
        seed,
        scheme: meta.scheme,
        skip: meta.skip,
    })
}

/// One row per sample, header `x1,…,xn`.
pub fn write_time_series_csv<W: Write>(w: &mut W, ts: &TimeSeries) -> Result<()> {
    let header: Vec<String> = (1..=ts.state_dim).map(|i| format!("x{i}")).collect();
    writeln!(w, "{}", header.join(","))?;
    for row in ts.rows() {
        let cols: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", cols.join(","))?;
    }
    Ok(())
}

pub fn save_time_series(path: &Path, ts: &TimeSeries) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_time_series(&mut w, ts)?;
    w.flush()?;
    write_json(&sidecar_path(path), &TimeSeriesMeta::from(ts))
}

pub fn load_time_series(path: &Path) -> Result<TimeSeries> {
    let side = sidecar_path(path);
    let meta = if side.exists() {
        Some(read_json(&side)?)
    } else {
        None
    };
    let mut r = BufReader::new(File::open(path)?);
    read_time_series(&mut r, meta)
}

// ----------------------------------------------------------------- grid field

pub fn write_grid_field<W: Write>(w: &mut W, field: &GridField) -> Result<()> {
    let d = &field.domain;
    w.write_all(GRID_FIELD_MAGIC)?;
    w.write_all(&(d.dim() as u64).to_le_bytes())?;
    w.write_all(&(d.bins() as u64).to_le_bytes())?;
    write_f64s(w, d.lower())?;
    write_f64s(w, d.upper())?;
    write_f64s(w, &field.values)
}

pub fn read_grid_field<R: Read>(r: &mut R, kind: FieldKind) -> Result<GridField> {
    expect_magic(r, GRID_FIELD_MAGIC)?;
    let n = read_u64(r)? as usize;
    let bins = read_u64(r)? as usize;
    if n == 0 || n > 16 {
        return Err(Error::Format(format!("implausible dimension {n}")));
    }
    let lower = read_f64s(r, n)?;
    let upper = read_f64s(r, n)?;
    let domain = GridDomain::new(lower, upper, bins)?;
    let values = read_f64s(r, domain.cell_count())?;
    expect_eof(r)?;
    GridField::new(domain, values, kind)
}

pub fn write_grid_field_csv<W: Write>(w: &mut W, field: &GridField) -> Result<()> {
    let d = &field.domain;
    writeln!(w, "# kind={}", field.kind)?;
    writeln!(w, "# bins={}", d.bins())?;
    for i in 0..d.dim() {
        writeln!(
            w,
            "# axis={},lower={},upper={}",
            i + 1,
            d.lower()[i],
            d.upper()[i]
        )?;
    }
    let header: Vec<String> = (1..=d.dim()).map(|i| format!("s{i}")).collect();
    writeln!(w, "{},value", header.join(","))?;
    for (flat, v) in field.values.iter().enumerate() {
        let s = d.cell_index(flat);
        let idx: Vec<String> = s.0.iter().map(|x| x.to_string()).collect();
        writeln!(w, "{},{v}", idx.join(","))?;
    }
    Ok(())
}

fn parse_num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Format(format!("cannot parse {what} from `{s}`")))
}

pub fn read_grid_field_csv<R: BufRead>(r: R) -> Result<GridField> {
    let mut kind = FieldKind::Generic;
    let mut bins = None;
    let mut axes: Vec<(usize, f64, f64)> = Vec::new();
    let mut domain: Option<GridDomain> = None;
    let mut values: Vec<f64> = Vec::new();
    let mut seen = Vec::new();

    for line in r.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            let meta = meta.trim();
            if let Some(k) = meta.strip_prefix("kind=") {
                kind = k.parse()?;
            } else if let Some(b) = meta.strip_prefix("bins=") {
                bins = Some(parse_num::<usize>(b, "bins")?);
            } else if let Some(a) = meta.strip_prefix("axis=") {
                let mut parts = a.split(',');
                let idx = parse_num(parts.next().unwrap_or(""), "axis index")?;
                let mut lo = None;
                let mut hi = None;
                for p in parts {
                    if let Some(v) = p.strip_prefix("lower=") {
                        lo = Some(parse_num(v, "lower bound")?);
                    } else if let Some(v) = p.strip_prefix("upper=") {
                        hi = Some(parse_num(v, "upper bound")?);
                    }
                }
                match (lo, hi) {
                    (Some(lo), Some(hi)) => axes.push((idx, lo, hi)),
                    _ => return Err(Error::Format(format!("incomplete axis line `{line}`"))),
                }
            }
            continue;
        }
        if line.starts_with('s') {
            axes.sort_by_key(|a| a.0);
            let bins = bins.ok_or_else(|| Error::Format("missing `# bins=` line".into()))?;
            let d = GridDomain::new(
                axes.iter().map(|a| a.1).collect(),
                axes.iter().map(|a| a.2).collect(),
                bins,
            )?;
            values = vec![f64::NAN; d.cell_count()];
            seen = vec![false; d.cell_count()];
            domain = Some(d);
            continue;
        }
        let d = domain
            .as_ref()
            .ok_or_else(|| Error::Format("data row before header".into()))?;
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != d.dim() + 1 {
            return Err(Error::Format(format!(
                "expected {} columns in `{line}`",
                d.dim() + 1
            )));
        }
        let s = cols[..d.dim()]
            .iter()
            .map(|c| parse_num::<usize>(c, "cell index"))
            .collect::<Result<Vec<_>>>()?;
        let flat = d.flat_index(&s.into())?;
        values[flat] = parse_num(cols[d.dim()], "value")?;
        seen[flat] = true;
    }
    let domain = domain.ok_or_else(|| Error::Format("missing header row".into()))?;
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::Format(format!(
            "no value for cell {:?}",
            domain.cell_index(missing).0
        )));
    }
    GridField::new(domain, values, kind)
}

// ----------------------------------------------------------------- pdf data

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdfMeta {
    pub domain: GridDomain,
    pub total_samples: u64,
    pub retained_samples: u64,
    pub discard_fraction: f64,
    pub mass: f64,
    pub source: PdfSource,
}

impl From<&PdfData> for PdfMeta {
    fn from(pdf: &PdfData) -> Self {
        Self {
            domain: pdf.domain().clone(),
            total_samples: pdf.total_samples,
            retained_samples: pdf.retained_samples,
            discard_fraction: pdf.discard_fraction(),
            mass: pdf.mass(),
            source: pdf.source.clone(),
        }
    }
}

/// Loads density data from a binary (`FPFGF1`) or CSV grid file plus its
/// optional sidecar.
pub fn load_pdf(path: &Path) -> Result<PdfData> {
    let mut head = [0u8; 6];
    let is_binary = File::open(path)?.read(&mut head)? == 6 && &head == GRID_FIELD_MAGIC;
    let field = if is_binary {
        read_grid_field(&mut BufReader::new(File::open(path)?), FieldKind::Density)?
    } else {
        read_grid_field_csv(BufReader::new(File::open(path)?))?
    };
    let side = sidecar_path(path);
    let mut pdf = PdfData::from_field(field, PdfSource::default())?;
    if side.exists() {
        let meta: PdfMeta = read_json(&side)?;
        if &meta.domain != pdf.domain() {
            return Err(Error::Format(format!(
                "sidecar domain does not match {}",
                path.display()
            )));
        }
        pdf.total_samples = meta.total_samples;
        pdf.retained_samples = meta.retained_samples;
        pdf.source = meta.source;
    }
    Ok(pdf)
}

// ----------------------------------------------------------------- reports

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

/// Scalar part of a [`FitnessReport`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitnessSummary {
    pub model: String,
    pub param_names: Vec<String>,
    pub params: ParamVector,
    pub fitness: f64,
}

impl FitnessSummary {
    pub fn new(report: &FitnessReport, param_names: &[&str]) -> Self {
        Self {
            model: report.model.clone(),
            param_names: param_names.iter().map(|s| s.to_string()).collect(),
            params: report.params.clone(),
            fitness: report.fitness,
        }
    }
}

/// Estimation result plus the optional comparison against known values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    #[serde(flatten)]
    pub result: EstimationResult,
    pub reference: Option<ParamVector>,
    pub percent_errors: Option<Vec<f64>>,
}

impl EstimationReport {
    pub fn new(result: EstimationResult, reference: Option<ParamVector>) -> Self {
        let percent_errors = reference.as_ref().map(|r| result.percent_errors(r));
        Self {
            result,
            reference,
            percent_errors,
        }
    }
}

/// Matrix CSV: metadata comments, a header row of axis-b values and one row
/// per axis-a value.
pub fn write_fitness_map_csv<W: Write>(
    w: &mut W,
    map: &FitnessMap,
    param_names: &[&str],
) -> Result<()> {
    let name = |i: usize| param_names.get(i).copied().unwrap_or("?");
    let (a, b) = (&map.axis_a, &map.axis_b);
    writeln!(
        w,
        "# rows={},lower={},upper={},points={}",
        name(a.index),
        a.lower,
        a.upper,
        a.points
    )?;
    writeln!(
        w,
        "# cols={},lower={},upper={},points={}",
        name(b.index),
        b.lower,
        b.upper,
        b.points
    )?;
    let base: Vec<String> = map.base.iter().map(|v| v.to_string()).collect();
    writeln!(w, "# base={}", base.join(","))?;
    let header: Vec<String> = map.b_values.iter().map(|v| v.to_string()).collect();
    writeln!(
        w,
        "{}\\{},{}",
        name(a.index),
        name(b.index),
        header.join(",")
    )?;
    for (ia, av) in map.a_values.iter().enumerate() {
        let row: Vec<String> = (0..map.b_values.len())
            .map(|ib| map.get(ia, ib).to_string())
            .collect();
        writeln!(w, "{av},{}", row.join(","))?;
    }
    Ok(())
}

/// Columns `<sweep>,<solve>_hat,E,converged`.
pub fn write_sweep_csv<W: Write>(
    w: &mut W,
    points: &[SweepPoint],
    sweep_name: &str,
    solve_name: &str,
) -> Result<()> {
    writeln!(w, "{sweep_name},{solve_name}_hat,E,converged")?;
    for p in points {
        writeln!(
            w,
            "{},{},{},{}",
            p.sweep_value, p.solved_value, p.fitness, p.converged
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::LvsAdditive;
    use crate::simulator::{simulate, SimConfig};
    use proptest::prelude::*;
    use std::io::Cursor;

    fn sample_field() -> GridField {
        let d = GridDomain::new(vec![-1.0, 0.5], vec![2.0, 3.25], 4).unwrap();
        GridField::from_fn(d, FieldKind::Current(1), |x| {
            x[0] * 1e-7 - x[1].powi(3) / 3.0
        })
    }

    #[test]
    fn time_series_header_layout() {
        let ts = simulate(&LvsAdditive, &[1.0, 0.5, 1.0], &SimConfig::new(3, 42)).unwrap();
        let mut buf = Vec::new();
        write_time_series(&mut buf, &ts).unwrap();
        assert_eq!(&buf[..6], b"FPFTS1");
        assert_eq!(u64::from_le_bytes(buf[6..14].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(buf[14..22].try_into().unwrap()), 3);
        assert_eq!(f64::from_le_bytes(buf[22..30].try_into().unwrap()), 0.01);
        assert_eq!(u64::from_le_bytes(buf[30..38].try_into().unwrap()), 42);
        assert_eq!(buf.len(), 38 + 3 * 2 * 8);

        let back =
            read_time_series(&mut Cursor::new(&buf), Some(TimeSeriesMeta::from(&ts))).unwrap();
        assert_eq!(back, ts);
        assert!(read_time_series(&mut Cursor::new(&buf[..buf.len() - 1]), None).is_err());
        let mut extra = buf.clone();
        extra.push(0);
        assert!(read_time_series(&mut Cursor::new(&extra), None).is_err());
    }

    #[test]
    fn grid_field_binary_and_csv() {
        let f = sample_field();
        let mut bin = Vec::new();
        write_grid_field(&mut bin, &f).unwrap();
        assert_eq!(&bin[..6], b"FPFGF1");
        assert_eq!(bin.len(), 6 + 16 + 32 + 16 * 8);
        assert_eq!(read_grid_field(&mut Cursor::new(&bin), f.kind).unwrap(), f);

        let mut csv = Vec::new();
        write_grid_field_csv(&mut csv, &f).unwrap();
        let text = String::from_utf8(csv.clone()).unwrap();
        assert!(text.starts_with("# kind=current-2\n# bins=4\n# axis=1,lower=-1,upper=2\n"));
        assert!(text.contains("\ns1,s2,value\n1,1,"));
        assert_eq!(read_grid_field_csv(Cursor::new(csv)).unwrap(), f);
    }

    #[test]
    fn csv_with_missing_cell_rejected() {
        let mut csv = Vec::new();
        write_grid_field_csv(&mut csv, &sample_field()).unwrap();
        let text = String::from_utf8(csv).unwrap();
        let truncated: String = text.lines().take(10).map(|l| format!("{l}\n")).collect();
        assert!(read_grid_field_csv(Cursor::new(truncated)).is_err());
        assert!(read_grid_field(&mut Cursor::new(b"FPFTS1xxxxxxxx"), FieldKind::Generic).is_err());
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_lossless(values in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 27)) {
            let d = GridDomain::cube(3, -0.3, 0.7, 3).unwrap();
            let f = GridField::new(d, values, FieldKind::Residual).unwrap();
            let mut csv = Vec::new();
            write_grid_field_csv(&mut csv, &f).unwrap();
            prop_assert_eq!(read_grid_field_csv(Cursor::new(csv)).unwrap(), f);
        }
    }

    #[test]
    fn pdf_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ts = simulate(&LvsAdditive, &[1.0, 0.5, 1.0], &SimConfig::new(2000, 1)).unwrap();
        let ts_path = dir.path().join("run.fts");
        save_time_series(&ts_path, &ts).unwrap();
        assert_eq!(load_time_series(&ts_path).unwrap(), ts);

        let pdf = crate::pdf::build_pdf(&ts, &GridDomain::cube(2, -4.0, 4.0, 10).unwrap()).unwrap();
        let bin = dir.path().join("pdf.fgf");
        let mut w = File::create(&bin).unwrap();
        write_grid_field(&mut w, &pdf.field).unwrap();
        write_json(&sidecar_path(&bin), &PdfMeta::from(&pdf)).unwrap();
        assert_eq!(load_pdf(&bin).unwrap(), pdf);

        let csv = dir.path().join("pdf.csv");
        let mut w = File::create(&csv).unwrap();
        write_grid_field_csv(&mut w, &pdf.field).unwrap();
        let from_csv = load_pdf(&csv).unwrap();
        assert_eq!(from_csv.field, pdf.field);
        assert_eq!(from_csv.total_samples, 0);
    }
}
