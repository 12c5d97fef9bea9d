use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::geometry::AmbientPoint;
use crate::solver::Snapshot;

/// One row of a convergence table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub resolution: f64,
    pub error: f64,
    pub rate: Option<f64>,
}

/// `log(e1 / e2) / log(res1 / res2)`.
pub fn convergence_rate(e1: f64, e2: f64, res1: f64, res2: f64) -> f64 {
    (e1 / e2).ln() / (res1 / res2).ln()
}

pub fn convergence_rows(resolutions: &[f64], errors: &[f64]) -> Vec<ConvergenceRow> {
    resolutions
        .iter()
        .zip(errors)
        .enumerate()
        .map(|(i, (&resolution, &error))| ConvergenceRow {
            resolution,
            error,
            rate: (i > 0).then(|| convergence_rate(errors[i - 1], error, resolutions[i - 1], resolution)),
        })
        .collect()
}

/// Round-trip exact decimal form.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_convergence_csv(rows: &[ConvergenceRow], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["resolution", "error", "rate"])?;
    for r in rows {
        w.write_record([fmt_f64(r.resolution), fmt_f64(r.error), r.rate.map(fmt_f64).unwrap_or_default()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_convergence_csv(path: impl AsRef<Path>) -> Result<Vec<ConvergenceRow>> {
    let mut r = csv::Reader::from_path(path.as_ref())?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let num = |j: usize| -> Result<Option<f64>> {
            let s = rec.get(j).unwrap_or("");
            if s.is_empty() {
                return Ok(None);
            }
            s.parse().map(Some).map_err(|_| crate::Error::FileFormat {
                path: path.as_ref().to_path_buf(),
                line: i + 2,
                message: format!("bad number `{s}`"),
            })
        };
        out.push(ConvergenceRow {
            resolution: num(0)?.unwrap_or(f64::NAN),
            error: num(1)?.unwrap_or(f64::NAN),
            rate: num(2)?,
        });
    }
    Ok(out)
}

fn snapshot_header(dim: usize, fields: usize) -> Vec<&'static str> {
    let mut h = vec!["x", "y"];
    if dim == 3 {
        h.push("z");
    }
    h.push("u");
    if fields > 1 {
        h.push("w");
    }
    h
}

/// Writes one CSV per snapshot, `<prefix>_t<time>.csv`, with columns
/// `x,y[,z],u[,w]`. An empty list gives a header-only `<prefix>.csv`.
pub fn write_snapshots(
    dir: impl AsRef<Path>,
    prefix: &str,
    nodes: &[AmbientPoint],
    dim: usize,
    fields: usize,
    snaps: &[Snapshot],
) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    if snaps.is_empty() {
        let path = dir.join(format!("{prefix}.csv"));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(snapshot_header(dim, fields))?;
        w.flush()?;
        return Ok(vec![path]);
    }
    let mut paths = Vec::with_capacity(snaps.len());
    for s in snaps {
        let path = dir.join(format!("{prefix}_t{:.6}.csv", s.t));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(snapshot_header(dim, s.values.len()))?;
        for (i, p) in nodes.iter().enumerate() {
            let mut rec: Vec<String> = p.iter().take(dim).map(|c| fmt_f64(*c)).collect();
            rec.extend(s.values.iter().map(|v| fmt_f64(v[i])));
            w.write_record(&rec)?;
        }
        w.flush()?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DVector, Vector3};

    #[test]
    fn rate_matches_reference_pairs() {
        let r = convergence_rate(8.38e-4, 2.21e-4, 0.1, 0.05);
        assert!((r - 1.92).abs() < 0.005, "{r}");
        let r = convergence_rate(2.21e-4, 9.22e-6, 0.05, 0.01);
        assert!((r - 1.97).abs() < 0.01, "{r}");
        let r = convergence_rate(9.22e-6, 9.31e-8, 0.01, 0.001);
        assert!((r - 2.00).abs() < 0.005, "{r}");
        let rows = convergence_rows(&[0.1, 0.05], &[8.38e-4, 2.21e-4]);
        assert_eq!(rows[0].rate, None);
        assert!(rows[1].rate.is_some());
    }

    #[test]
    fn convergence_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let rows = convergence_rows(&[0.1, 0.05, 1.0 / 3.0], &[8.38e-4, 2.21e-4, std::f64::consts::PI * 1e-7]);
        write_convergence_csv(&rows, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("resolution,error,rate\n"));
        let back = read_convergence_csv(&path).unwrap();
        assert_eq!(back.len(), 3);
        for (a, b) in rows.iter().zip(&back) {
            assert_eq!(a.resolution.to_bits(), b.resolution.to_bits());
            assert_eq!(a.error.to_bits(), b.error.to_bits());
            assert_eq!(a.rate.map(f64::to_bits), b.rate.map(f64::to_bits));
        }
    }

    #[test]
    fn snapshot_files() {
        let dir = tempfile::tempdir().unwrap();
        let nodes = vec![Vector3::new(1.0, 0.0, 0.0), Vector3::new(0.0, 1.0, 0.0)];
        let empty = write_snapshots(dir.path(), "none", &nodes, 2, 1, &[]).unwrap();
        assert_eq!(std::fs::read_to_string(&empty[0]).unwrap(), "x,y,u\n");
        let snaps = vec![Snapshot {
            t: 0.5,
            values: vec![DVector::from_vec(vec![0.1, 0.2]), DVector::from_vec(vec![1.0 / 3.0, -2.0])],
        }];
        let files = write_snapshots(dir.path(), "run", &nodes, 3, 2, &snaps).unwrap();
        let text = std::fs::read_to_string(&files[0]).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("x,y,z,u,w"));
        let first: Vec<f64> = lines.next().unwrap().split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(first[4].to_bits(), (1.0f64 / 3.0).to_bits());
        assert!(files[0].file_name().unwrap().to_str().unwrap().starts_with("run_t0.5"));
    }
}
