//! Output files. CSV files start with one '#'-prefixed JSON metadata line
//! carrying the config hash; JSON files carry it as their first key.

use crate::error::{LabError, Result};
use crate::transform::KernelGrid;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

/// Numbers print in the shortest form that round-trips, so reruns are byte-identical.
pub trait CsvCell {
    fn cell(&self) -> String;
}

impl CsvCell for f64 {
    fn cell(&self) -> String {
        format!("{self}")
    }
}

macro_rules! int_cell {
    ($($t:ty),*) => {$(
        impl CsvCell for $t {
            fn cell(&self) -> String {
                self.to_string()
            }
        }
    )*};
}
int_cell!(u32, u64, u128, usize, i64, bool);

impl CsvCell for &str {
    fn cell(&self) -> String {
        self.to_string()
    }
}

fn header(hash: &str, kind: &str, extra: Value) -> String {
    let mut meta = json!({ "config_hash": hash, "kind": kind });
    if let (Value::Object(m), Value::Object(e)) = (&mut meta, extra) {
        m.extend(e);
    }
    format!("# {meta}\n")
}

pub fn csv_string(
    hash: &str,
    kind: &str,
    extra: Value,
    columns: &[&str],
    rows: &[Vec<String>],
) -> String {
    let mut out = header(hash, kind, extra);
    out.push_str(&columns.join(","));
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{}", r.join(","));
    }
    out
}

pub fn write_csv(
    path: &Path,
    hash: &str,
    kind: &str,
    extra: Value,
    columns: &[&str],
    rows: &[Vec<String>],
) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, csv_string(hash, kind, extra, columns, rows))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvFile {
    pub meta: Value,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvFile {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        self.rows
            .iter()
            .map(|r| r.get(i).and_then(|v| v.parse().ok()))
            .collect()
    }
}

pub fn read_csv(path: &Path) -> Result<CsvFile> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let meta_line = lines
        .next()
        .ok_or_else(|| LabError::Io(format!("{} is empty", path.display())))?;
    let meta = meta_line
        .strip_prefix("# ")
        .and_then(|m| serde_json::from_str(m).ok())
        .ok_or_else(|| LabError::Io(format!("{}: missing metadata line", path.display())))?;
    let columns = lines
        .next()
        .unwrap_or("")
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    Ok(CsvFile {
        meta,
        columns,
        rows,
    })
}

#[derive(Serialize)]
struct Tagged<'a, T: Serialize> {
    config_hash: &'a str,
    kind: &'a str,
    record: &'a T,
}

pub fn write_json<T: Serialize>(path: &Path, hash: &str, kind: &str, record: &T) -> Result<()> {
    ensure_parent(path)?;
    let text = serde_json::to_string_pretty(&Tagged {
        config_hash: hash,
        kind,
        record,
    })
    .map_err(|e| LabError::Io(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

pub fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| LabError::Io(e.to_string()))
}

/// Sidecar of the raw kernel dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelHeader {
    pub config_hash: String,
    pub grid_n: usize,
    pub spacing: f64,
    pub potential: String,
    /// Row k holds K(x_k, t_l) for l = −k..=k; values are little-endian f64.
    pub layout: String,
    pub values: usize,
    pub iterations: usize,
    pub residual: f64,
    pub diagonal_error: f64,
    pub bound_excess: f64,
}

/// Writes `<stem>.bin` (flat f64 LE) and `<stem>.json`.
pub fn write_kernel(dir: &Path, stem: &str, hash: &str, kg: &KernelGrid) -> Result<KernelHeader> {
    fs::create_dir_all(dir)?;
    let flat = kg.flat();
    let bytes: Vec<u8> = flat.iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(dir.join(format!("{stem}.bin")), bytes)?;
    let h = KernelHeader {
        config_hash: hash.to_string(),
        grid_n: kg.grid_n,
        spacing: kg.spacing,
        potential: kg.potential_tag.clone(),
        layout: "triangle-rows-f64-le".into(),
        values: flat.len(),
        iterations: kg.iterations,
        residual: kg.residual,
        diagonal_error: kg.diagonal_error,
        bound_excess: kg.bound_excess,
    };
    let text = serde_json::to_string_pretty(&h).map_err(|e| LabError::Io(e.to_string()))?;
    fs::write(dir.join(format!("{stem}.json")), text + "\n")?;
    Ok(h)
}

/// Reads a dump back as (header, rows).
pub fn read_kernel(dir: &Path, stem: &str) -> Result<(KernelHeader, Vec<Vec<f64>>)> {
    let h: KernelHeader =
        serde_json::from_str(&fs::read_to_string(dir.join(format!("{stem}.json")))?)
            .map_err(|e| LabError::Io(e.to_string()))?;
    let bytes = fs::read(dir.join(format!("{stem}.bin")))?;
    if bytes.len() != 8 * h.values || h.values != (h.grid_n + 1) * (h.grid_n + 1) {
        return Err(LabError::Io(format!(
            "kernel dump has {} bytes for grid {}",
            bytes.len(),
            h.grid_n
        )));
    }
    let flat: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let mut rows = Vec::with_capacity(h.grid_n + 1);
    let mut at = 0;
    for k in 0..=h.grid_n {
        rows.push(flat[at..at + 2 * k + 1].to_vec());
        at += 2 * k + 1;
    }
    Ok((h, rows))
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(p) = path.parent() {
        if !p.as_os_str().is_empty() {
            fs::create_dir_all(p)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Potential;
    use crate::transform::solve_kernel;

    fn tmp(name: &str) -> std::path::PathBuf {
        let d = std::env::temp_dir().join(format!("steklov-io-{}-{name}", std::process::id()));
        fs::create_dir_all(&d).unwrap();
        d
    }

    #[test]
    fn csv_round_trip() {
        let p = tmp("csv").join("a.csv");
        let rows = vec![
            vec![1u32.cell(), 0.1f64.cell()],
            vec![2u32.cell(), 1e-300f64.cell()],
        ];
        write_csv(&p, "abc", "test", json!({"n": 3}), &["m", "v"], &rows).unwrap();
        let f = read_csv(&p).unwrap();
        assert_eq!(f.meta["config_hash"], "abc");
        assert_eq!(f.meta["n"], 3);
        assert_eq!(f.column("v").unwrap(), vec![0.1, 1e-300]);
    }

    #[test]
    fn kernel_round_trip() {
        let kg = solve_kernel(&Potential::constant(1.0), 8, 1e-12).unwrap();
        let d = tmp("kernel");
        let h = write_kernel(&d, "k", "hash", &kg).unwrap();
        assert_eq!(h.values, 81);
        let (h2, rows) = read_kernel(&d, "k").unwrap();
        assert_eq!(h2, h);
        assert_eq!(rows, kg.rows);
    }
}
