//! Dataset, fit and result files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use hoif::cells::CellFunction;
use hoif::mar::{FitMode, Observation, PreliminaryFit, TripletModel};
use serde::{Deserialize, Serialize};

use crate::config::SCHEMA_VERSION;
use crate::error::{csv_err, io_err, HarnessError, Result};
use crate::experiment::{ResultRow, Summary};

pub const RNG_NAME: &str = "ChaCha8";

/// 17 significant digits in scientific notation; reads back exactly.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

fn write_comments(out: &mut impl Write, path: &Path, lines: &[String]) -> Result<()> {
    for l in lines {
        writeln!(out, "# {l}").map_err(io_err(path))?;
    }
    Ok(())
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err(path))
}

/// Writes `z1[,z2],a,y` with `y` the observed product `YA`.
pub fn write_dataset(path: &Path, dim: usize, obs: &[Observation], header: &[String]) -> Result<()> {
    let mut out = create(path)?;
    write_comments(&mut out, path, header)?;
    let mut w = csv::Writer::from_writer(out);
    let mut cols: Vec<String> = (1..=dim).map(|i| format!("z{i}")).collect();
    cols.extend(["a".into(), "y".into()]);
    w.write_record(&cols).map_err(csv_err(path))?;
    for o in obs {
        let mut rec: Vec<String> = o.point(dim).iter().map(|&v| fmt_f64(v)).collect();
        rec.push((o.a as u8).to_string());
        rec.push((o.y as u8).to_string());
        w.write_record(&rec).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Reads a dataset; the dimension is the number of `z` columns.
pub fn read_dataset(path: &Path) -> Result<(usize, Vec<Observation>)> {
    let mut r = reader(path)?;
    let headers = r.headers().map_err(csv_err(path))?.clone();
    let names: Vec<&str> = headers.iter().collect();
    let dim = match names.as_slice() {
        ["z1", "a", "y"] => 1,
        ["z1", "z2", "a", "y"] => 2,
        _ => return Err(HarnessError::Data(format!("{}: expected columns z1[,z2],a,y", path.display()))),
    };
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let field = |i: usize| -> Result<f64> {
            rec[i].parse::<f64>().map_err(|_| {
                HarnessError::Data(format!("{}: row {}: cannot parse {:?}", path.display(), line + 1, &rec[i]))
            })
        };
        let flag = |i: usize| -> Result<bool> {
            match &rec[i] {
                "0" => Ok(false),
                "1" => Ok(true),
                s => Err(HarnessError::Data(format!("{}: row {}: expected 0 or 1, got {s:?}", path.display(), line + 1))),
            }
        };
        let z: Vec<f64> = (0..dim).map(field).collect::<Result<_>>()?;
        let (a, y) = (flag(dim)?, flag(dim + 1)?);
        if y && !a {
            return Err(HarnessError::Data(format!("{}: row {}: y = 1 with a = 0", path.display(), line + 1)));
        }
        out.push(Observation::new(&z, a, y)?);
    }
    Ok((dim, out))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFile {
    pub level: u32,
    pub values: Vec<f64>,
}

impl CellFile {
    fn from_cells(h: &CellFunction) -> Self {
        Self {
            level: h.level(),
            values: h.values().to_vec(),
        }
    }

    fn to_cells(&self, dim: usize) -> Result<CellFunction> {
        Ok(CellFunction::new(dim, self.level, self.values.clone())?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitFile {
    pub schema_version: u32,
    pub dim: usize,
    pub mode: String,
    pub clamp_scales: [f64; 3],
    pub a_hat: CellFile,
    pub b_hat: CellFile,
    pub g_hat: CellFile,
}

impl FitFile {
    pub fn from_fit(fit: &PreliminaryFit) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            dim: fit.a_hat.dim(),
            mode: match fit.mode {
                FitMode::Synthetic => "synthetic".into(),
                FitMode::Fitted => "fitted".into(),
            },
            clamp_scales: fit.clamp_scales,
            a_hat: CellFile::from_cells(&fit.a_hat),
            b_hat: CellFile::from_cells(&fit.b_hat),
            g_hat: CellFile::from_cells(&fit.g_hat),
        }
    }

    /// Rebuilds the fit, checking its bounds against `model`.
    pub fn to_fit(&self, model: &TripletModel) -> Result<PreliminaryFit> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(HarnessError::Data(format!("fit schema_version {} unsupported", self.schema_version)));
        }
        let mode = match self.mode.as_str() {
            "synthetic" => FitMode::Synthetic,
            "fitted" => FitMode::Fitted,
            m => return Err(HarnessError::Data(format!("unknown fit mode {m:?}"))),
        };
        let mut fit = PreliminaryFit::from_parts(
            model,
            self.a_hat.to_cells(self.dim)?,
            self.b_hat.to_cells(self.dim)?,
            self.g_hat.to_cells(self.dim)?,
        )?;
        fit.mode = mode;
        fit.clamp_scales = self.clamp_scales;
        Ok(fit)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub dim: usize,
    pub eta: f64,
    pub truth: f64,
    pub a: CellFile,
    pub b: CellFile,
    pub f: CellFile,
}

impl ModelFile {
    pub fn from_model(m: &TripletModel) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            dim: m.dim(),
            eta: m.eta,
            truth: m.truth(),
            a: CellFile::from_cells(&m.a),
            b: CellFile::from_cells(&m.b),
            f: CellFile::from_cells(&m.f),
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|source| HarnessError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    writeln!(out).map_err(io_err(path))?;
    out.flush().map_err(io_err(path))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| HarnessError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub const RESULT_COLUMNS: [&str; 13] = [
    "n", "estimator", "order", "k", "cutoff", "replication", "estimate", "truth", "error", "linear", "term2",
    "term3", "term4",
];

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn write_results(path: &Path, header: &[String], rows: &[ResultRow]) -> Result<()> {
    let mut out = create(path)?;
    write_comments(&mut out, path, header)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULT_COLUMNS).map_err(csv_err(path))?;
    for r in rows {
        let term = |j: usize| opt(r.terms.get(j - 2).copied());
        w.write_record([
            r.n.to_string(),
            r.estimator.clone(),
            r.order.to_string(),
            r.k.to_string(),
            r.cutoff.map(|d| d.to_string()).unwrap_or_default(),
            r.replication.to_string(),
            fmt_f64(r.estimate),
            fmt_f64(r.truth),
            fmt_f64(r.estimate - r.truth),
            fmt_f64(r.linear),
            term(2),
            term(3),
            term(4),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = reader(path)?;
    let headers = r.headers().map_err(csv_err(path))?.clone();
    if headers.iter().collect::<Vec<_>>() != RESULT_COLUMNS {
        return Err(HarnessError::Data(format!("{}: unexpected result columns", path.display())));
    }
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let err = |what: &str| HarnessError::Data(format!("{}: row {}: bad {what}", path.display(), line + 1));
        let int = |i: usize| rec[i].parse::<usize>().map_err(|_| err(RESULT_COLUMNS[i]));
        let float = |i: usize| rec[i].parse::<f64>().map_err(|_| err(RESULT_COLUMNS[i]));
        let mut terms = Vec::new();
        for i in 10..13 {
            if !rec[i].is_empty() {
                terms.push(float(i)?);
            }
        }
        out.push(ResultRow {
            n: int(0)?,
            estimator: rec[1].to_string(),
            order: int(2)?,
            k: int(3)?,
            cutoff: if rec[4].is_empty() { None } else { Some(int(4)?) },
            replication: int(5)?,
            estimate: float(6)?,
            truth: float(7)?,
            linear: float(9)?,
            terms,
        });
    }
    Ok(out)
}

pub fn write_summary(path: &Path, header: &[String], rows: &[Summary]) -> Result<()> {
    let mut out = create(path)?;
    write_comments(&mut out, path, header)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "n", "estimator", "replications", "bias", "bias_se", "sd", "sd_se", "rmse", "rmse_se", "oracle_bias",
    ])
    .map_err(csv_err(path))?;
    for s in rows {
        w.write_record([
            s.n.to_string(),
            s.estimator.clone(),
            s.replications.to_string(),
            fmt_f64(s.bias),
            fmt_f64(s.bias_se),
            fmt_f64(s.sd),
            fmt_f64(s.sd_se),
            fmt_f64(s.rmse),
            fmt_f64(s.rmse_se),
            opt(s.oracle_bias),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}
