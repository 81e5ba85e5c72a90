//! JSON model documents, CSV series and the JSON reports written by the CLI.
//! Every file is written to a temporary sibling and renamed into place.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::carma::CarmaSpec;
use crate::error::{CarmaError, Result};
use crate::estimator::{FitResult, Summary, TimeSeries};
use crate::levy::{IncrementSeries, LevyModel, NoiseFit};
use crate::simulator::SimulatedPath;

pub const SCHEMA_VERSION: u32 = 1;

/// A CARMA spec with an optional noise sub-document:
/// `{"p":2,"q":1,"a":[..],"b":[..],"sigma":1,"c0":0,"noise":{"family":..,"params":{..}}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    #[serde(flatten)]
    pub spec: CarmaSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<LevyModel>,
}

fn input_err(path: &Path, e: impl std::fmt::Display) -> CarmaError {
    CarmaError::Input(format!("{}: {e}", path.display()))
}

pub fn read_model(path: &Path) -> Result<ModelDocument> {
    let text = fs::read_to_string(path).map_err(|e| input_err(path, e))?;
    parse_model(&text).map_err(|e| match e {
        CarmaError::Input(m) => CarmaError::Input(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Parses a model document; structurally invalid JSON is an input error,
/// a well-formed but invalid spec keeps its model error.
pub fn parse_model(text: &str) -> Result<ModelDocument> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| CarmaError::Input(e.to_string()))?;
    match serde_json::from_value::<ModelDocument>(value) {
        Ok(doc) => {
            if let Some(n) = &doc.noise {
                n.validate()?;
            }
            Ok(doc)
        }
        Err(e) => {
            let msg = e.to_string();
            if msg.contains("p > q") || msg.contains("invalid CARMA") {
                Err(CarmaError::Spec(msg))
            } else {
                Err(CarmaError::Input(msg))
            }
        }
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(|e| input_err(&dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| input_err(&dir, e))?;
    tmp.write_all(bytes).map_err(|e| input_err(path, e))?;
    tmp.persist(path).map_err(|e| input_err(path, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CarmaError::Input(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn csv_bytes(header: &[String], rows: impl Iterator<Item = Vec<f64>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)
        .map_err(|e| CarmaError::Input(e.to_string()))?;
    for row in rows {
        w.write_record(row.iter().map(|v| format!("{v:.16e}")))
            .map_err(|e| CarmaError::Input(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CarmaError::Input(e.to_string()))
}

/// `t,y,x0,…,x{p-1}` with one row per grid point.
pub fn path_csv(path: &SimulatedPath) -> Result<Vec<u8>> {
    let p = path.x.ncols();
    let mut header = vec!["t".to_string(), "y".to_string()];
    header.extend((0..p).map(|j| format!("x{j}")));
    let rows = (0..path.y.len()).map(|k| {
        let mut r = vec![path.times[k], path.y[k]];
        r.extend(path.x.row(k).iter());
        r
    });
    csv_bytes(&header, rows)
}

/// `t,dL`, where `t` is the right endpoint of each increment.
pub fn increments_csv(inc: &IncrementSeries) -> Result<Vec<u8>> {
    let header = ["t".to_string(), "dL".to_string()];
    csv_bytes(
        &header,
        inc.values.iter().enumerate().map(|(k, &v)| vec![inc.time(k), v]),
    )
}

/// `t,y` for an observed series.
pub fn series_csv(series: &TimeSeries) -> Result<Vec<u8>> {
    let header = ["t".to_string(), "y".to_string()];
    let t = series.times();
    csv_bytes(
        &header,
        t.into_iter().zip(&series.values).map(|(t, &y)| vec![t, y]),
    )
}

fn read_two_columns(path: &Path, second: &[&str]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| input_err(path, e))?;
    let headers = rdr.headers().map_err(|e| input_err(path, e))?.clone();
    let find = |names: &[&str]| headers.iter().position(|h| names.contains(&h));
    let ti = find(&["t"]).ok_or_else(|| input_err(path, "missing column 't'"))?;
    let yi = find(second).ok_or_else(|| input_err(path, format!("missing column '{}'", second[0])))?;
    let mut t = Vec::new();
    let mut y = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| input_err(path, e))?;
        let parse = |i: usize| -> Result<f64> {
            let s = rec.get(i).unwrap_or("");
            s.parse::<f64>()
                .map_err(|_| input_err(path, format!("row {}: cannot parse '{s}' as a number", k + 1)))
        };
        t.push(parse(ti)?);
        y.push(parse(yi)?);
    }
    if t.len() < 2 {
        return Err(input_err(path, "need at least two data rows"));
    }
    Ok((t, y))
}

/// Reads an observation CSV with columns `t,y` (extra columns are ignored).
pub fn read_series(path: &Path) -> Result<TimeSeries> {
    let (t, y) = read_two_columns(path, &["y"])?;
    TimeSeries::from_times(&t, y)
}

/// Reads an increments CSV with columns `t,dL`.
pub fn read_increments(path: &Path) -> Result<IncrementSeries> {
    let (t, v) = read_two_columns(path, &["dL", "dl"])?;
    let series = TimeSeries::from_times(&t, v)?;
    IncrementSeries::new(series.t0 - series.h, series.h, series.values)
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    /// `null` for fixed parameters and degenerate directions.
    pub stderr: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct IncrementBlock {
    #[serde(flatten)]
    pub summary: Summary,
    pub burn_in: usize,
    pub h: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NoiseReport {
    pub schema_version: u32,
    pub family: String,
    pub model: LevyModel,
    pub coefficients: Vec<Coefficient>,
    #[serde(rename = "-2logL")]
    pub minus_two_loglik: f64,
    pub at_boundary: bool,
    pub n: usize,
    pub h: f64,
}

impl NoiseReport {
    pub fn new(fit: &NoiseFit, n: usize, h: f64) -> Self {
        let mut coefficients: Vec<Coefficient> = fit
            .names
            .iter()
            .zip(fit.model.params())
            .zip(&fit.stderr)
            .map(|((name, est), &se)| Coefficient {
                name: name.clone(),
                estimate: est,
                stderr: finite(se),
            })
            .collect();
        if let Some((tau, se)) = fit.atom_sd {
            coefficients.push(Coefficient {
                name: "atom_sd".into(),
                estimate: tau,
                stderr: finite(se),
            });
        }
        Self {
            schema_version: SCHEMA_VERSION,
            family: fit.model.family().to_string(),
            model: fit.model,
            coefficients,
            minus_two_loglik: fit.minus_two_loglik(),
            at_boundary: fit.at_boundary,
            n,
            h,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FitReport {
    pub schema_version: u32,
    pub spec: CarmaSpec,
    pub normalization: String,
    pub stationary: bool,
    pub coefficients: Vec<Coefficient>,
    pub loglik: f64,
    #[serde(rename = "-2logL")]
    pub minus_two_loglik: f64,
    pub iterations: usize,
    pub increments: Option<IncrementBlock>,
    pub increments_csv: Option<String>,
    pub noise_fit: Option<NoiseReport>,
    pub warnings: Vec<String>,
}

impl FitReport {
    pub fn new(fit: &FitResult, increments_csv: Option<&Path>) -> Self {
        let spec = &fit.spec_hat;
        let mut coefficients = Vec::new();
        let mut push = |name: String, estimate: f64| {
            let stderr = fit.stderr_of(&name).and_then(finite);
            coefficients.push(Coefficient {
                name,
                estimate,
                stderr,
            });
        };
        for (i, &a) in spec.ar().iter().enumerate() {
            push(format!("a{}", i + 1), a);
        }
        for (j, &b) in spec.ma_coeffs().iter().enumerate() {
            push(format!("b{j}"), b);
        }
        push("sigma".into(), spec.sigma());
        push("c0".into(), spec.c0());

        let increments = fit.increments.as_ref().and_then(|inc| {
            Summary::of(&inc.values).map(|summary| IncrementBlock {
                summary,
                burn_in: inc.burn_in,
                h: inc.h,
            })
        });
        let noise_fit = fit.noise_fit.as_ref().map(|nf| {
            let inc = fit.increments.as_ref().expect("noise fit implies increments");
            let n = inc.len() - inc.burn_in;
            NoiseReport::new(nf, n, inc.h)
        });
        Self {
            schema_version: SCHEMA_VERSION,
            spec: spec.clone(),
            normalization: format!("{:?}", fit.normalization).to_lowercase(),
            stationary: fit.stationary,
            coefficients,
            loglik: fit.loglik,
            minus_two_loglik: fit.minus_two_loglik(),
            iterations: fit.iterations,
            increments,
            increments_csv: increments_csv.map(|p| p.display().to_string()),
            noise_fit,
            warnings: fit.warnings.clone(),
        }
    }
}
