//! File formats: edge-list graphs, dataset CSV (`agent,label,f1..fp`) and
//! trace CSV (`k,residual,consensus_err,tracking_err,gap`).

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use nalgebra::DMatrix;

use dirgraph_opt::algorithms::Trace;
use dirgraph_opt::digraph::Digraph;
use dirgraph_opt::objectives::LogisticData;

use crate::config::GraphSource;

pub const TRACE_HEADER: [&str; 5] = ["k", "residual", "consensus_err", "tracking_err", "gap"];

pub fn load_graph(src: &GraphSource) -> Result<Digraph> {
    Ok(match src {
        GraphSource::Fig1 => Digraph::fig1(),
        GraphSource::Cycle(n) => Digraph::cycle(*n)?,
        GraphSource::Complete(n) => Digraph::complete(*n)?,
        GraphSource::Random { n, extra, seed } => Digraph::random_strongly_connected(*n, *extra, *seed)?,
        GraphSource::File(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading graph {}", path.display()))?;
            Digraph::parse(&text).with_context(|| format!("parsing graph {}", path.display()))?
        }
    })
}

/// Shortest round-trip text for `v`, switching to exponent form for very
/// small or large magnitudes.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e15).contains(&a) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

pub fn trace_csv(trace: &Trace) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRACE_HEADER)?;
    for r in &trace.records {
        w.write_record([
            r.k.to_string(),
            num(r.residual),
            num(r.consensus_err),
            num(r.tracking_err),
            num(r.gap),
        ])?;
    }
    Ok(w.into_inner()?)
}

/// Writes `bytes` to `path`, creating parent directories.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    f.write_all(bytes)?;
    Ok(())
}

pub fn dataset_csv(data: &LogisticData) -> Result<Vec<u8>> {
    let p = data.dim();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["agent".to_string(), "label".to_string()];
    header.extend((1..=p).map(|j| format!("f{j}")));
    w.write_record(&header)?;
    for (i, (c, b)) in data.features.iter().zip(&data.labels).enumerate() {
        for (row, label) in b.iter().enumerate() {
            let mut rec = vec![i.to_string(), label.to_string()];
            rec.extend(c.row(row).iter().map(|v| num(*v)));
            w.write_record(&rec)?;
        }
    }
    Ok(w.into_inner()?)
}

/// Reads a dataset CSV. Agents must be numbered `0..n` and every agent must
/// hold at least one row.
pub fn read_dataset(path: &Path, beta: f64) -> Result<LogisticData> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let header = r.headers()?.clone();
    ensure!(
        header.len() >= 3 && &header[0] == "agent" && &header[1] == "label",
        "dataset header must be agent,label,f1,...,fp"
    );
    let p = header.len() - 2;
    let mut rows: Vec<Vec<(f64, Vec<f64>)>> = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let ctx = || format!("{} row {}", path.display(), line + 2);
        ensure!(rec.len() == p + 2, "{}: expected {} fields", ctx(), p + 2);
        let agent: usize = rec[0].trim().parse().with_context(ctx)?;
        let label: f64 = rec[1].trim().parse().with_context(ctx)?;
        let feats = (2..p + 2)
            .map(|j| rec[j].trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .with_context(ctx)?;
        if agent >= rows.len() {
            rows.resize_with(agent + 1, Vec::new);
        }
        rows[agent].push((label, feats));
    }
    if rows.is_empty() {
        bail!("{} holds no samples", path.display());
    }
    if let Some(i) = rows.iter().position(Vec::is_empty) {
        bail!("agent {i} has no samples in {}", path.display());
    }
    let features = rows
        .iter()
        .map(|r| DMatrix::from_fn(r.len(), p, |i, j| r[i].1[j]))
        .collect();
    let labels = rows.iter().map(|r| r.iter().map(|s| s.0).collect()).collect();
    let data = LogisticData { features, labels, beta };
    data.validate()?;
    Ok(data)
}
