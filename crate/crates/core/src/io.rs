//! Dataset CSV and model JSON formats.
//!
//! Dataset CSV: header `k,u,y,p_1,...,p_np`, one row per sample, `k`
//! counting from 1. The `y` column is optional when only simulating.
//!
//! Model JSON: `{n_x, sigma, gamma, alpha, lambda, training: {u, y, p, Ts}}`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::TrainedModel;
use crate::model::{AlphaPolynomial, Dataset, HyperParams};

/// Input/scheduling record with an optional measured output.
#[derive(Debug, Clone, PartialEq)]
pub struct IoRecord {
    pub u: Vec<f64>,
    pub y: Option<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
}

impl IoRecord {
    pub fn p_flat(&self) -> Vec<f64> {
        self.p.iter().flatten().copied().collect()
    }
}

/// Reads a CSV record; `y` may be absent.
pub fn read_record_csv(path: &Path) -> Result<IoRecord> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);

    let k_col = find("k").ok_or_else(|| Error::parse(path, "missing column `k`"))?;
    let u_col = find("u").ok_or_else(|| Error::parse(path, "missing column `u`"))?;
    let y_col = find("y");
    let mut p_cols = Vec::new();
    for i in 1.. {
        match find(&format!("p_{i}")) {
            Some(c) => p_cols.push(c),
            None => break,
        }
    }
    if p_cols.is_empty() {
        p_cols.extend(find("p"));
    }
    if p_cols.is_empty() {
        return Err(Error::parse(path, "missing scheduling columns `p_1..p_np`"));
    }

    let mut rec = IoRecord {
        u: vec![],
        y: y_col.map(|_| vec![]),
        p: vec![],
    };
    for (row, result) in rdr.records().enumerate() {
        let line = row + 2;
        let r = result.map_err(|e| csv_error(path, e))?;
        let field = |col: usize, name: &str| -> Result<f64> {
            let s = r.get(col).unwrap_or("");
            s.parse::<f64>().map_err(|_| {
                Error::parse(path, format!("line {line}: invalid `{name}` value {s:?}"))
            })
        };
        let k = field(k_col, "k")?;
        if k != (row + 1) as f64 {
            return Err(Error::parse(
                path,
                format!("line {line}: expected k = {}, found {k}", row + 1),
            ));
        }
        rec.u.push(field(u_col, "u")?);
        if let (Some(c), Some(y)) = (y_col, rec.y.as_mut()) {
            y.push(field(c, "y")?);
        }
        rec.p.push(
            p_cols
                .iter()
                .map(|&c| field(c, "p"))
                .collect::<Result<_>>()?,
        );
    }
    Ok(rec)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, format!("{other:?}")),
    }
}

/// Reads an estimation dataset; the `y` column is required.
pub fn read_dataset_csv(path: &Path, ts: f64) -> Result<Dataset> {
    let rec = read_record_csv(path)?;
    let y = rec
        .y
        .ok_or_else(|| Error::parse(path, "missing column `y`"))?;
    Dataset::new(rec.u, y, rec.p, ts)
}

pub fn write_dataset_csv(d: &Dataset, path: &Path) -> Result<()> {
    let mut out = String::from("k,u,y");
    for i in 1..=d.n_p() {
        out.push_str(&format!(",p_{i}"));
    }
    out.push('\n');
    for k in 0..d.len() {
        out.push_str(&format!("{},{},{}", k + 1, d.u()[k], d.y()[k]));
        for v in d.p(k) {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes `k,y_sim`.
pub fn write_output_csv(y: &[f64], path: &Path) -> Result<()> {
    let mut out = String::from("k,y_sim\n");
    for (k, v) in y.iter().enumerate() {
        out.push_str(&format!("{},{}\n", k + 1, v));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Serialize, Deserialize)]
struct TrainingRecord {
    u: Vec<f64>,
    y: Vec<f64>,
    p: Vec<Vec<f64>>,
    #[serde(rename = "Ts")]
    ts: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    n_x: usize,
    sigma: f64,
    gamma: f64,
    alpha: Vec<f64>,
    lambda: Vec<f64>,
    training: TrainingRecord,
}

pub fn model_to_json(m: &TrainedModel) -> String {
    let d = m.dataset();
    let file = ModelFile {
        n_x: m.n_x(),
        sigma: m.hyper().sigma,
        gamma: m.hyper().gamma,
        alpha: m.alpha().coeffs().to_vec(),
        lambda: m.lambda().to_vec(),
        training: TrainingRecord {
            u: d.u().to_vec(),
            y: d.y().to_vec(),
            p: d.p_rows().map(<[f64]>::to_vec).collect(),
            ts: d.ts(),
        },
    };
    serde_json::to_string(&file).expect("model serializes")
}

pub fn model_from_json(text: &str) -> Result<TrainedModel> {
    let f: ModelFile =
        serde_json::from_str(text).map_err(|e| Error::invalid("model", e.to_string()))?;
    let hyper = HyperParams::new(f.gamma, f.sigma, f.n_x)?;
    let alpha = AlphaPolynomial::new(f.alpha)?;
    let t = f.training;
    let d = Dataset::new(t.u, t.y, t.p, t.ts)?;
    TrainedModel::from_parts(d, f.lambda, alpha, hyper)
}

pub fn save_model(m: &TrainedModel, path: &Path) -> Result<()> {
    fs::write(path, model_to_json(m) + "\n").map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&text).map_err(|e| match e {
        Error::InvalidParameter { reason, .. } => Error::parse(path, reason),
        other => other,
    })
}
