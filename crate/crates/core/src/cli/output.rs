//! CSV and JSON writers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::ensemble::{EnsembleStats, Path as TrajPath};

/// 17 significant digits; parses back to the identical double.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn stats_header(dim: usize) -> Vec<String> {
    let mut h = vec!["k".to_string()];
    for j in 0..dim {
        let sfx = if j == 0 { String::new() } else { format!("_{j}") };
        for name in ["mean_x", "sigma_x", "mean_y", "sigma_y"] {
            h.push(format!("{name}{sfx}"));
        }
    }
    h
}

pub fn write_stats_csv(path: &Path, stats: &EnsembleStats) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(stats_header(stats.dim()))?;
    for k in 0..=stats.n_steps {
        let mut row = vec![k.to_string()];
        for c in &stats.coords {
            for v in [c.mean_x[k], c.sigma_x[k], c.mean_y[k], c.sigma_y[k]] {
                row.push(fmt_f64(v));
            }
        }
        w.write_record(&row)?;
    }
    w.flush()
}

pub fn write_paths_csv(path: &Path, paths: &[TrajPath]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    let dim = paths.first().map(|p| p.dim).unwrap_or(1);
    let mut header = vec!["traj".to_string(), "k".to_string()];
    for j in 0..dim {
        let sfx = if j == 0 { String::new() } else { format!("_{j}") };
        header.push(format!("x{sfx}"));
        header.push(format!("y{sfx}"));
    }
    w.write_record(&header)?;
    for p in paths {
        for k in 0..p.len() {
            let mut row = vec![p.index.to_string(), k.to_string()];
            for j in 0..dim {
                row.push(fmt_f64(p.x_at(k)[j]));
                row.push(fmt_f64(p.y_at(k)[j]));
            }
            w.write_record(&row)?;
        }
    }
    w.flush()
}

/// Writes `columns` (name, values) side by side with a leading `k` column.
pub fn write_columns_csv(path: &Path, columns: &[(&str, Vec<f64>)]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    let mut header = vec!["k"];
    header.extend(columns.iter().map(|(n, _)| *n));
    w.write_record(&header)?;
    let len = columns.iter().map(|(_, v)| v.len()).min().unwrap_or(0);
    for k in 0..len {
        let mut row = vec![k.to_string()];
        row.extend(columns.iter().map(|(_, v)| fmt_f64(v[k])));
        w.write_record(&row)?;
    }
    w.flush()
}

/// Reads named columns of a CSV written by [`write_stats_csv`].
pub fn read_columns(path: &Path, names: &[&str]) -> Result<Vec<Vec<f64>>, String> {
    let mut r = csv::Reader::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let headers = r.headers().map_err(|e| format!("{}: {e}", path.display()))?.clone();
    let idx: Vec<usize> = names
        .iter()
        .map(|n| {
            headers
                .iter()
                .position(|h| h == *n)
                .ok_or_else(|| format!("{}: no column `{n}`", path.display()))
        })
        .collect::<Result<_, _>>()?;
    let mut out = vec![Vec::new(); names.len()];
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| format!("{}: {e}", path.display()))?;
        for (o, &i) in out.iter_mut().zip(&idx) {
            let v: f64 = rec
                .get(i)
                .unwrap_or("")
                .parse()
                .map_err(|e| format!("{}: row {}: {e}", path.display(), line + 2))?;
            o.push(v);
        }
    }
    Ok(out)
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    f.flush()
}

/// `out.csv` -> `out.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

/// `out.csv` -> `out.paths.csv`.
pub fn paths_path(csv: &Path) -> PathBuf {
    csv.with_extension("paths.csv")
}
