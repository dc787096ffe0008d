//! File formats and all-or-nothing output directories.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use reluflow_core::analytic::{rank_tail_probability, theoretical_probability};
use reluflow_core::dynamics::Trajectory;
use reluflow_core::experiments::{PhaseField, ScanRow, TableReport};
use reluflow_core::model::WeightVector;

use crate::error::{CliError, CliResult};

/// Files are written into a hidden staging directory and moved into place
/// only by [`Staging::commit`]; dropping an uncommitted staging area
/// removes everything it wrote.
pub struct Staging {
    out_dir: PathBuf,
    dir: PathBuf,
    files: Vec<String>,
    committed: bool,
}

impl Staging {
    pub fn new(out_dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
        let dir = out_dir.join(format!(".reluflow-partial-{}", std::process::id()));
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        }
        fs::create_dir(&dir).map_err(|e| CliError::io(&dir, e))?;
        Ok(Self { out_dir: out_dir.to_path_buf(), dir, files: Vec::new(), committed: false })
    }

    pub fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> CliResult<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: serde::Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        self.write(name, json_bytes(value))
    }

    pub fn commit(mut self) -> CliResult<Vec<PathBuf>> {
        let mut out = Vec::with_capacity(self.files.len());
        for name in &self.files {
            let from = self.dir.join(name);
            let to = self.out_dir.join(name);
            fs::rename(&from, &to).map_err(|e| CliError::io(&to, e))?;
            out.push(to);
        }
        fs::remove_dir(&self.dir).map_err(|e| CliError::io(&self.dir, e))?;
        self.committed = true;
        Ok(out)
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.dir);
        }
    }
}

pub fn json_bytes<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("output serializes");
    v.push(b'\n');
    v
}

fn csv_from_rows(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for r in rows {
        w.write_record(&r).expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}

fn num(v: f64) -> String {
    format!("{v}")
}

/// `t,w_0,…,w_{d-1},loss,step_norm,lyapunov_v`; `lyapunov_v` is empty
/// without a known optimum.
pub fn trajectory_csv(traj: &Trajectory) -> Vec<u8> {
    let d = traj.steps.first().map_or(0, |r| r.w.len());
    let mut header = vec!["t".to_string()];
    header.extend((0..d).map(|i| format!("w_{i}")));
    header.extend(["loss", "step_norm", "lyapunov_v"].map(String::from));
    let rows = traj.steps.iter().map(|r| {
        let mut row = vec![r.t.to_string()];
        row.extend(r.w.iter().map(|v| num(*v)));
        row.push(num(r.loss));
        row.push(num(r.step_norm));
        row.push(r.lyapunov_v.map(num).unwrap_or_default());
        row
    });
    csv_from_rows(&header, rows)
}

pub fn table_csv(report: &TableReport) -> Vec<u8> {
    let header = ["d", "N", "reg", "lambda", "theoretical", "empirical", "empirical_stationary", "trials", "wilson_halfwidth"]
        .map(String::from);
    let rows = report.rows.iter().map(|r| {
        vec![
            r.d.to_string(),
            r.n.to_string(),
            r.reg.as_str().to_string(),
            num(r.lambda),
            num(r.theoretical),
            num(r.empirical),
            num(r.empirical_stationary),
            r.trials.to_string(),
            num(r.wilson_halfwidth),
        ]
    });
    csv_from_rows(&header, rows)
}

pub fn phase_csv(field: &PhaseField) -> Vec<u8> {
    let header = ["x", "y", "dx", "dy", "defined"].map(String::from);
    let rows = field
        .points
        .iter()
        .map(|p| vec![num(p.x), num(p.y), num(p.dx), num(p.dy), p.defined.to_string()]);
    csv_from_rows(&header, rows)
}

pub fn scan_csv(rows: &[ScanRow]) -> Vec<u8> {
    let header = ["theta_lo", "theta_hi", "lambda", "samples", "vdot_max", "violations"].map(String::from);
    let rows = rows.iter().map(|r| {
        vec![
            num(r.theta_lo),
            num(r.theta_hi),
            num(r.lambda),
            r.samples.to_string(),
            r.vdot_max.map(num).unwrap_or_default(),
            r.violations.to_string(),
        ]
    });
    csv_from_rows(&header, rows)
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ProbRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub d: usize,
    pub a_d: f64,
    pub theoretical: f64,
}

pub fn prob_rows(n_values: &[usize], d_values: &[usize], epsilon: f64) -> CliResult<Vec<ProbRow>> {
    let mut out = Vec::new();
    for &d in d_values {
        for &n in n_values {
            out.push(ProbRow {
                n,
                d,
                a_d: rank_tail_probability(n, d)?,
                theoretical: theoretical_probability(n, d, epsilon)?,
            });
        }
    }
    Ok(out)
}

pub fn prob_csv(rows: &[ProbRow]) -> Vec<u8> {
    let header = ["N", "d", "A_d", "theoretical"].map(String::from);
    csv_from_rows(&header, rows.iter().map(|r| vec![r.n.to_string(), r.d.to_string(), num(r.a_d), num(r.theoretical)]))
}

/// Minimal SVG: arrows as line segments, the teacher as a filled circle.
pub fn phase_svg(field: &PhaseField, teacher: &WeightVector) -> String {
    let size = 500.0;
    let pad = 20.0;
    let (x0, x1) = field.grid.x_range;
    let (y0, y1) = field.grid.y_range;
    let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (size - 2.0 * pad);
    let sy = |y: f64| size - pad - (y - y0) / (y1 - y0) * (size - 2.0 * pad);
    let cell = (size - 2.0 * pad) / (field.grid.resolution.max(2) - 1) as f64;
    let len = 0.4 * cell;
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#);
    let _ = writeln!(s, r#"<rect width="{size}" height="{size}" fill="white"/>"#);
    for p in field.points.iter().filter(|p| p.defined) {
        let (ax, ay) = (sx(p.x), sy(p.y));
        let (bx, by) = (ax + len * p.dx, ay - len * p.dy);
        let _ = writeln!(s, r#"<line x1="{ax:.3}" y1="{ay:.3}" x2="{bx:.3}" y2="{by:.3}" stroke="green" stroke-width="1"/>"#);
        let _ = writeln!(s, r#"<circle cx="{bx:.3}" cy="{by:.3}" r="1.2" fill="green"/>"#);
    }
    let t = teacher.values();
    let _ = writeln!(s, r#"<circle cx="{:.3}" cy="{:.3}" r="5" fill="red"/>"#, sx(t[0]), sy(t[1]));
    s.push_str("</svg>\n");
    s
}
