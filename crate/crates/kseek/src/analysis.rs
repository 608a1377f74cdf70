//! Effects analysis and report generation over a results file.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use kseek_core::effects::{
    analyze, effect_tables, interaction_groups, Analysis, AnalysisOptions, EffectTable, Factor, FactorDesign,
};
use kseek_core::eval::response_transform;
use kseek_core::search::Method;
use serde::Serialize;

use crate::harness::AggregateRecord;
use crate::io::write_json;

/// Factor names in design order; `method` comes first and is the pivot.
pub const FACTORS: [&str; 6] = ["method", "n", "p", "omega_bar", "k_star", "cov_type"];

fn level_of(r: &AggregateRecord, f: usize) -> String {
    match f {
        0 => r.method.id().to_string(),
        1 => r.n.to_string(),
        2 => r.p.to_string(),
        3 => r.omega_bar.to_string(),
        4 => r.k_star.to_string(),
        _ => r.cov_type.to_string(),
    }
}

fn numeric_key(s: &str) -> f64 {
    s.parse().unwrap_or(f64::NAN)
}

/// Rows usable as responses: at least one dataset succeeded.
pub fn usable(rows: &[AggregateRecord]) -> Vec<&AggregateRecord> {
    rows.iter().filter(|r| r.mean_cari.is_finite()).collect()
}

/// Design over the six factors with all interactions of `method` up to
/// `max_order` factors, and the probit-transformed response.
pub fn build_design(rows: &[AggregateRecord], max_order: usize) -> Result<(FactorDesign, Vec<f64>)> {
    let rows = usable(rows);
    if rows.is_empty() {
        bail!("no usable result rows");
    }
    let mut factors = Vec::new();
    for (f, name) in FACTORS.iter().enumerate() {
        let mut levels: Vec<String> = rows.iter().map(|r| level_of(r, f)).collect();
        if f == 0 {
            levels.sort_by_key(|l| Method::ALL.iter().position(|m| m.id() == l));
        } else {
            levels.sort_by(|a, b| numeric_key(a).total_cmp(&numeric_key(b)));
        }
        levels.dedup();
        factors.push(Factor { name: name.to_string(), levels });
    }
    let cells: Vec<Vec<usize>> = rows
        .iter()
        .map(|r| {
            (0..FACTORS.len()).map(|f| factors[f].levels.iter().position(|l| *l == level_of(r, f)).unwrap()).collect()
        })
        .collect();
    let y = rows.iter().map(|r| response_transform(r.mean_cari)).collect::<kseek_core::Result<Vec<f64>>>()?;
    let groups = interaction_groups(FACTORS.len(), Some(0), max_order);
    let design = FactorDesign::new(factors, &cells, &groups)?;
    for d in design.dropped() {
        log::warn!("factor {d} has a single level and is left out");
    }
    Ok((design, y))
}

/// Parses `from=into` where each side is a group name such as `n` or `method:n`.
pub fn parse_absorb(design: &FactorDesign, spec: &str) -> Result<(usize, usize)> {
    let (a, b) = spec.split_once('=').ok_or_else(|| anyhow!("absorb '{spec}' is not FROM=INTO"))?;
    let find = |s: &str| {
        let names: Vec<&str> = s.split(':').collect();
        design.find_group(&names).ok_or_else(|| anyhow!("unknown group '{s}'"))
    };
    Ok((find(a)?, find(b)?))
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
struct Selection<'a> {
    groups: Vec<String>,
    lambda: f64,
    ebic: f64,
    intercept: f64,
    rss: f64,
    sigma2: f64,
    bic: f64,
    full_bic: f64,
    ridged: bool,
    n: usize,
    dropped_factors: &'a [String],
}

#[derive(Debug, Clone)]
pub struct EffectsOutput {
    pub analysis: Analysis,
    pub tables: Vec<EffectTable>,
    pub files: Vec<PathBuf>,
}

/// Runs the analysis and writes `path.csv`, `selected.json` and one
/// `effects_<group>.csv` per reported group into `out_dir`.
pub fn run_effects(
    rows: &[AggregateRecord],
    max_order: usize,
    confidence: f64,
    absorb: &[String],
    out_dir: &Path,
) -> Result<EffectsOutput> {
    let (design, y) = build_design(rows, max_order)?;
    let analysis = analyze(&design, &y, &AnalysisOptions::default())?;
    if analysis.refit.ridged {
        log::warn!("refit design is rank deficient; a ridge was added");
    }
    let mut pairs = Vec::new();
    for s in absorb {
        let (a, b) = parse_absorb(&design, s)?;
        if analysis.selected.contains(&a) && analysis.selected.contains(&b) {
            pairs.push((a, b));
        } else {
            log::warn!("absorb {s} skipped: both groups must be selected");
        }
    }
    let tables = effect_tables(&design, &analysis.refit, confidence, &pairs)?;

    fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();
    let path_file = out_dir.join("path.csv");
    let mut w = csv::Writer::from_path(&path_file)?;
    w.write_record(["lambda", "active", "m", "rss", "ebic", "selected", "groups"])?;
    for (i, pt) in analysis.path.points.iter().enumerate() {
        let names: Vec<String> = pt.active.iter().map(|&g| design.group_name(g)).collect();
        w.write_record([
            pt.fit.lambda.to_string(),
            pt.active.len().to_string(),
            pt.m.to_string(),
            pt.fit.rss.to_string(),
            pt.ebic.to_string(),
            (i == analysis.path.selected).to_string(),
            names.join(" "),
        ])?;
    }
    w.flush()?;
    files.push(path_file);

    let sel = &analysis.path.points[analysis.path.selected];
    let selection = Selection {
        groups: analysis.selected.iter().map(|&g| design.group_name(g)).collect(),
        lambda: sel.fit.lambda,
        ebic: sel.ebic,
        intercept: analysis.refit.intercept,
        rss: analysis.refit.rss,
        sigma2: analysis.refit.sigma2,
        bic: analysis.refit.bic,
        full_bic: analysis.full_bic,
        ridged: analysis.refit.ridged,
        n: design.n(),
        dropped_factors: design.dropped(),
    };
    let sel_file = out_dir.join("selected.json");
    write_json(&sel_file, &selection)?;
    files.push(sel_file);

    for t in &tables {
        let file = out_dir.join(format!("effects_{}.csv", t.name.replace(':', "_")));
        write_table(&file, t)?;
        files.push(file);
    }
    Ok(EffectsOutput { analysis, tables, files })
}

fn write_table(path: &Path, t: &EffectTable) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    let mut header = t.factors.clone();
    header.extend(["effect", "std_err", "lower", "upper", "significant"].map(String::from));
    w.write_record(&header)?;
    for r in &t.rows {
        let mut rec = r.levels.clone();
        rec.extend([
            r.effect.to_string(),
            r.std_err.to_string(),
            r.lower.to_string(),
            r.upper.to_string(),
            r.significant.to_string(),
        ]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Long-format view of the aggregates: one row per (result row, data
/// factor), ready for per-level box plots by method.
pub fn write_report(rows: &[AggregateRecord], out: &Path) -> Result<()> {
    let file = File::create(out).with_context(|| format!("cannot write {}", out.display()))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record([
        "scenario_id",
        "method",
        "factor",
        "level",
        "mean_cari",
        "probit_cari",
        "mean_khat",
        "k_deviation",
    ])?;
    for r in rows {
        let probit = if r.mean_cari.is_finite() {
            response_transform(r.mean_cari).map_or(String::new(), |v| v.to_string())
        } else {
            String::new()
        };
        for (f, name) in FACTORS.iter().enumerate().skip(1) {
            w.write_record([
                r.scenario_id.clone(),
                r.method.id().to_string(),
                name.to_string(),
                level_of(r, f),
                r.mean_cari.to_string(),
                probit.clone(),
                r.mean_khat.to_string(),
                r.k_deviation.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Concatenates every `effects_*.csv` in `dir` into one long table.
pub fn collect_effects(dir: &Path, out: &Path) -> Result<usize> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name().and_then(|s| s.to_str()).is_some_and(|s| s.starts_with("effects_") && s.ends_with(".csv"))
        })
        .collect();
    files.sort();
    let mut w = csv::Writer::from_path(out)?;
    w.write_record(["group", "levels", "effect", "std_err", "lower", "upper", "significant"])?;
    let mut count = 0;
    for f in &files {
        let group = f.file_stem().and_then(|s| s.to_str()).unwrap_or("").trim_start_matches("effects_").to_string();
        let mut rdr = csv::Reader::from_path(f)?;
        for rec in rdr.records() {
            let rec = rec?;
            let k = rec.len() - 5;
            let levels: Vec<&str> = rec.iter().take(k).collect();
            let mut row = vec![group.clone(), levels.join(":")];
            row.extend(rec.iter().skip(k).map(String::from));
            w.write_record(&row)?;
            count += 1;
        }
    }
    w.flush()?;
    Ok(count)
}
