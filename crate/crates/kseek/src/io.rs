//! File formats: dataset CSV plus metadata sidecar, model and report JSON,
//! and JSON config overlays.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use kseek_core::overlap::Provenance;
use kseek_core::{Dataset, GmmModel};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Metadata stored next to a dataset CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DatasetMeta {
    pub n: usize,
    pub p: usize,
    pub labelled: bool,
    pub provenance: Option<Provenance>,
}

/// `data.csv` → `data.meta.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta.json")
}

fn is_number(s: &str) -> bool {
    s.trim().parse::<f64>().is_ok()
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))
}

/// Reads a dataset CSV. A header row is optional; a column named `label`
/// holds 1-based integer labels. The sidecar, if present, restores provenance.
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let mut rdr = reader(path)?;
    let mut records = rdr.records();
    let mut label_col = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    let mut first = true;
    for rec in &mut records {
        let rec = rec.with_context(|| format!("malformed CSV in {}", path.display()))?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        if first {
            first = false;
            if !rec.iter().all(is_number) {
                label_col = rec.iter().position(|h| h.eq_ignore_ascii_case("label"));
                width = Some(rec.len());
                continue;
            }
        }
        if *width.get_or_insert(rec.len()) != rec.len() {
            bail!("{}: ragged row with {} fields", path.display(), rec.len());
        }
        let mut row = Vec::with_capacity(rec.len());
        for (j, f) in rec.iter().enumerate() {
            if Some(j) == label_col {
                let l: usize = f.parse().with_context(|| format!("bad label '{f}'"))?;
                if l == 0 {
                    bail!("labels are 1-based; found 0");
                }
                labels.push(l - 1);
            } else {
                row.push(f.parse().with_context(|| format!("bad number '{f}' in {}", path.display()))?);
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        bail!("{} has no data rows", path.display());
    }
    let mut data = Dataset::from_rows(&rows)?;
    if label_col.is_some() {
        data = data.with_labels(labels)?;
    }
    let side = sidecar_path(path);
    if side.exists() {
        let meta: DatasetMeta = read_json(&side)?;
        if let Some(p) = meta.provenance {
            data = data.with_provenance(p);
        }
    }
    Ok(data)
}

/// Writes `x1..xp[,label]` with 1-based labels, and the metadata sidecar.
pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut header: Vec<String> = (1..=data.p()).map(|j| format!("x{j}")).collect();
    if data.labels().is_some() {
        header.push("label".into());
    }
    w.write_record(&header)?;
    for i in 0..data.n() {
        let mut rec: Vec<String> = data.sample(i).iter().map(|v| v.to_string()).collect();
        if let Some(l) = data.labels() {
            rec.push((l[i] + 1).to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    let meta = DatasetMeta {
        n: data.n(),
        p: data.p(),
        labelled: data.labels().is_some(),
        provenance: data.provenance().cloned(),
    };
    write_json(&sidecar_path(path), &meta)
}

/// Reads 1-based labels: either the `label` column of a dataset CSV or a
/// single-column file.
pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let mut rdr = reader(path)?;
    let mut col = None;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if i == 0 && !rec.iter().all(is_number) {
            col = rec.iter().position(|h| h.eq_ignore_ascii_case("label"));
            if col.is_none() && rec.len() == 1 {
                col = Some(0);
            }
            if col.is_none() {
                bail!("{}: no 'label' column", path.display());
            }
            continue;
        }
        let j = match col {
            Some(j) => j,
            None if rec.len() == 1 => 0,
            None => bail!("{}: expected one column or a 'label' header", path.display()),
        };
        let l: usize = rec.get(j).unwrap_or("").parse().with_context(|| format!("bad label in {}", path.display()))?;
        if l == 0 {
            bail!("labels are 1-based; found 0");
        }
        out.push(l - 1);
    }
    Ok(out)
}

/// First column of a CSV as numbers, skipping a non-numeric header.
pub fn read_column(path: &Path) -> Result<Vec<f64>> {
    let mut rdr = reader(path)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let Some(f) = rec.get(0) else { continue };
        if f.is_empty() {
            continue;
        }
        match f.parse() {
            Ok(v) => out.push(v),
            Err(_) if i == 0 => continue,
            Err(_) => bail!("bad number '{f}' in {}", path.display()),
        }
    }
    Ok(out)
}

pub fn read_model(path: &Path) -> Result<GmmModel> {
    read_json(path)
}

pub fn write_model(path: &Path, model: &GmmModel) -> Result<()> {
    write_json(path, model)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("cannot parse {}", path.display()))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Recursively overlays `patch` onto `base`; objects merge key by key.
pub fn merge_json(base: &mut Value, patch: &Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                merge_json(b.entry(k.clone()).or_insert(Value::Null), v);
            }
        }
        (b, p) => *b = p.clone(),
    }
}

/// `defaults` with the fields present in `patch` replaced.
pub fn overlay<T: Serialize + DeserializeOwned>(defaults: &T, patch: &Value) -> Result<T> {
    let mut v = serde_json::to_value(defaults)?;
    merge_json(&mut v, patch);
    serde_json::from_value(v).context("invalid configuration")
}
