//! Artifact file formats: embeddings, noise dumps, edge deltas,
//! positions/groups sidecars, and the CSV reports.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! write/read cycle is lossless and reruns are byte-comparable.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::graph::EdgeDelta;
use crate::model::{Embeddings, Model};
use crate::objective::train::TrainReport;

/// Embeddings: a "%dims n m" header followed by one "id v1 .. vm" row
/// per node.
pub fn write_embeddings<W: Write>(writer: &mut W, embeddings: &Embeddings) -> Result<()> {
    writeln!(writer, "%dims {} {}", embeddings.n(), embeddings.dim)?;
    for node in 0..embeddings.n() as u32 {
        write!(writer, "{node}")?;
        for v in embeddings.row(node) {
            write!(writer, " {v}")?;
        }
        writeln!(writer)?;
    }
    Ok(())
}

pub fn read_embeddings<R: BufRead>(reader: R) -> Result<Embeddings> {
    let mut lines = reader.lines().enumerate();
    let (n, dim) = loop {
        let (idx, line) = lines.next().ok_or_else(|| Error::Parse {
            line: 1,
            msg: "missing %dims header".into(),
        })?;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let rest = trimmed.strip_prefix("%dims").ok_or_else(|| Error::Parse {
            line: idx + 1,
            msg: format!("expected %dims header, got {trimmed:?}"),
        })?;
        let mut tokens = rest.split_whitespace();
        match (
            tokens.next().and_then(|t| t.parse::<usize>().ok()),
            tokens.next().and_then(|t| t.parse::<usize>().ok()),
            tokens.next(),
        ) {
            (Some(n), Some(dim), None) if dim > 0 => break (n, dim),
            _ => {
                return Err(Error::Parse {
                    line: idx + 1,
                    msg: format!("bad %dims header {trimmed:?}"),
                })
            }
        }
    };
    let mut data = vec![f64::NAN; n * dim];
    let mut seen = vec![false; n];
    for (idx, line) in lines {
        let line = line?;
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        let node: usize = tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Parse {
                line: line_no,
                msg: format!("bad node id in {trimmed:?}"),
            })?;
        if node >= n {
            return Err(Error::NodeRange { id: node as u32, n });
        }
        let row = &mut data[node * dim..(node + 1) * dim];
        for (k, slot) in row.iter_mut().enumerate() {
            *slot = tokens
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::Parse {
                    line: line_no,
                    msg: format!("expected {dim} values, stopped at {k}"),
                })?;
        }
        if tokens.next().is_some() {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("more than {dim} values"),
            });
        }
        seen[node] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::Parse {
            line: 0,
            msg: format!("no row for node {missing}"),
        });
    }
    Ok(Embeddings { dim, data })
}

/// Noise dump: "%noise" section with "i j eps" lines (sorted pairs),
/// then "%mixture" weights in adaptive mode and "%fitness" values when
/// the degree prior is on.
pub fn write_noise_dump<W: Write>(writer: &mut W, model: &Model) -> Result<()> {
    writeln!(writer, "%noise")?;
    for ((i, j), eps) in model.noise_entries() {
        writeln!(writer, "{i} {j} {eps}")?;
    }
    if let Ok(weights) = model.mixture_weights() {
        writeln!(writer, "%mixture")?;
        for (l, w) in weights.iter().enumerate() {
            writeln!(writer, "{l} {w}")?;
        }
    }
    if let Some(fitness) = &model.fitness {
        writeln!(writer, "%fitness")?;
        for (i, d) in fitness.iter().enumerate() {
            writeln!(writer, "{i} {d}")?;
        }
    }
    Ok(())
}

/// Delta file: "+u v" for added edges, "-u v" for removed ones.
pub fn write_delta<W: Write>(writer: &mut W, delta: &EdgeDelta) -> Result<()> {
    for &(u, v) in &delta.added {
        writeln!(writer, "+{u} {v}")?;
    }
    for &(u, v) in &delta.removed {
        writeln!(writer, "-{u} {v}")?;
    }
    Ok(())
}

pub fn read_delta<R: BufRead>(reader: R) -> Result<EdgeDelta> {
    let mut delta = EdgeDelta::default();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (sign, rest) = trimmed.split_at(1);
        let mut tokens = rest.split_whitespace();
        let pair = match (
            tokens.next().and_then(|t| t.parse::<u32>().ok()),
            tokens.next().and_then(|t| t.parse::<u32>().ok()),
            tokens.next(),
        ) {
            (Some(u), Some(v), None) => (u.min(v), u.max(v)),
            _ => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected \"+u v\" or \"-u v\", got {trimmed:?}"),
                })
            }
        };
        match sign {
            "+" => delta.added.push(pair),
            "-" => delta.removed.push(pair),
            _ => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("line must start with + or -, got {trimmed:?}"),
                })
            }
        }
    }
    delta.added.sort_unstable();
    delta.removed.sort_unstable();
    Ok(delta)
}

/// Geometric generator sidecar: "id x y" per node.
pub fn write_positions<W: Write>(writer: &mut W, points: &[[f64; 2]]) -> Result<()> {
    for (i, p) in points.iter().enumerate() {
        writeln!(writer, "{i} {} {}", p[0], p[1])?;
    }
    Ok(())
}

/// Partition generator sidecar: "id group" per node. The format matches
/// the label-file reader, so groups double as classification labels.
pub fn write_groups<W: Write>(writer: &mut W, groups: &[u32]) -> Result<()> {
    for (i, g) in groups.iter().enumerate() {
        writeln!(writer, "{i} {g}")?;
    }
    Ok(())
}

pub fn read_groups<R: BufRead>(reader: R, n: usize) -> Result<Vec<u32>> {
    let table = crate::graph::load_labels(reader, n)?;
    let mut groups = Vec::with_capacity(n);
    for node in 0..n as u32 {
        match table.labels_of(node) {
            [g] => groups.push(*g),
            other => {
                return Err(Error::Data(format!(
                    "node {node} has {} group assignments, expected exactly 1",
                    other.len()
                )))
            }
        }
    }
    Ok(groups)
}

pub fn write_train_report<W: Write>(writer: &mut W, report: &TrainReport) -> Result<()> {
    writeln!(
        writer,
        "epoch,proximity,reg_noise,reg_embed,reg_extras,total,seconds"
    )?;
    let initial = &report.initial;
    writeln!(
        writer,
        "0,{},{},{},{},{},0",
        initial.proximity, initial.reg_noise, initial.reg_embed, initial.reg_prior_extras, initial.total
    )?;
    for record in &report.epochs {
        let l = &record.loss;
        writeln!(
            writer,
            "{},{},{},{},{},{},{}",
            record.epoch, l.proximity, l.reg_noise, l.reg_embed, l.reg_prior_extras, l.total, record.seconds
        )?;
    }
    Ok(())
}

/// One metrics CSV row. `seed` and `key` (fraction or ratio) are strings
/// so aggregate rows can use markers like "mean" instead of a number.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub variant: String,
    pub dataset: String,
    pub key: String,
    pub seed: String,
    pub metric: String,
    pub value: f64,
}

pub fn write_metrics_csv<W: Write>(writer: &mut W, rows: &[MetricRow]) -> Result<()> {
    writeln!(writer, "variant,dataset,fraction_or_ratio,seed,metric,value")?;
    for r in rows {
        writeln!(
            writer,
            "{},{},{},{},{},{}",
            r.variant, r.dataset, r.key, r.seed, r.metric, r.value
        )?;
    }
    Ok(())
}

pub fn read_metrics_csv<R: BufRead>(reader: R) -> Result<Vec<MetricRow>> {
    let mut rows = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || line_no == 1 {
            continue; // header
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        let [variant, dataset, key, seed, metric, value] = fields[..] else {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected 6 CSV fields, got {}", fields.len()),
            });
        };
        let value = value.parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("bad metric value {value:?}"),
        })?;
        rows.push(MetricRow {
            variant: variant.into(),
            dataset: dataset.into(),
            key: key.into(),
            seed: seed.into(),
            metric: metric.into(),
            value,
        });
    }
    Ok(rows)
}

/// Append mean and standard-deviation rows per (variant, dataset, key,
/// metric) group, preserving first-seen group order.
pub fn aggregate_rows(rows: &[MetricRow]) -> Vec<MetricRow> {
    let mut order: Vec<(String, String, String, String)> = Vec::new();
    let mut groups: std::collections::HashMap<(String, String, String, String), Vec<f64>> =
        std::collections::HashMap::new();
    for r in rows {
        let key = (
            r.variant.clone(),
            r.dataset.clone(),
            r.key.clone(),
            r.metric.clone(),
        );
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(r.value);
    }
    let mut out = Vec::new();
    for key in order {
        let values = &groups[&key];
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64;
        let (variant, dataset, k, metric) = key;
        out.push(MetricRow {
            variant: variant.clone(),
            dataset: dataset.clone(),
            key: k.clone(),
            seed: "mean".into(),
            metric: metric.clone(),
            value: mean,
        });
        out.push(MetricRow {
            variant,
            dataset,
            key: k,
            seed: "std".into(),
            metric,
            value: var.sqrt(),
        });
    }
    out
}
