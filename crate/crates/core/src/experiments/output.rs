use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::config::ExperimentConfig;
use super::runners::{DynamicsRun, RunOutput, SweepResult, TrajectoryRun};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub artifact: String,
    pub version: String,
    pub kind: String,
    pub seeds: Vec<u64>,
    pub config: ExperimentConfig,
}

impl Manifest {
    pub fn new(cfg: &ExperimentConfig) -> Self {
        Manifest {
            artifact: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            kind: cfg.kind.as_str().to_string(),
            seeds: cfg.seeds.clone(),
            config: cfg.clone(),
        }
    }
}

/// Writes `manifest.json` into `dir` (created if needed).
pub fn write_manifest(cfg: &ExperimentConfig, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join("manifest.json");
    let body = serde_json::to_string_pretty(&Manifest::new(cfg)).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(&path, body + "\n")?;
    Ok(path)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outputs {
    pub files: Vec<PathBuf>,
}

enum Cell {
    F(f64),
    U(u64),
    B(bool),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::F(v) => v.to_string(),
            Cell::U(v) => v.to_string(),
            Cell::B(v) => v.to_string(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::F(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::U(v) => Value::from(*v),
            Cell::B(v) => Value::from(*v),
        }
    }
}

struct Table {
    header: &'static [&'static str],
    /// Constant leading text column, e.g. the sweep parameter name.
    label: Option<String>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    fn write(&self, dir: &Path, stem: &str, comment: Option<&str>, out: &mut Outputs) -> Result<()> {
        let mut csv = String::new();
        if let Some(c) = comment {
            csv.push_str(&format!("# {c}\n"));
        }
        csv.push_str(&self.header.join(","));
        csv.push('\n');
        let mut json = Vec::new();
        for row in &self.rows {
            let mut cells: Vec<String> = Vec::with_capacity(self.header.len());
            let mut obj = Map::new();
            let mut names = self.header.iter();
            if let Some(l) = &self.label {
                cells.push(l.clone());
                obj.insert(names.next().unwrap().to_string(), Value::from(l.as_str()));
            }
            for (c, name) in row.iter().zip(names) {
                cells.push(c.csv());
                obj.insert(name.to_string(), c.json());
            }
            csv.push_str(&cells.join(","));
            csv.push('\n');
            json.push(Value::Object(obj));
        }
        let csv_path = dir.join(format!("{stem}.csv"));
        let json_path = dir.join(format!("{stem}.json"));
        fs::write(&csv_path, csv)?;
        let body = serde_json::to_string_pretty(&Value::Array(json)).map_err(|e| Error::Config(e.to_string()))?;
        fs::write(&json_path, body + "\n")?;
        out.files.push(csv_path);
        out.files.push(json_path);
        Ok(())
    }
}

fn sweep_tables(kind: &str, r: &SweepResult, dir: &Path, out: &mut Outputs) -> Result<()> {
    Table {
        header: &[
            "sweep_param",
            "sweep_value",
            "seed",
            "final_distance",
            "final_correlation",
            "crossed",
            "diverged",
            "weak_baseline",
        ],
        label: Some(r.sweep_param.clone()),
        rows: r
            .rows
            .iter()
            .map(|x| {
                vec![
                    Cell::F(x.sweep_value),
                    Cell::U(x.seed),
                    Cell::F(x.final_distance),
                    Cell::F(x.final_correlation),
                    Cell::B(x.crossed),
                    Cell::B(x.diverged),
                    Cell::F(x.weak_baseline),
                ]
            })
            .collect(),
    }
    .write(dir, kind, None, out)?;
    Table {
        header: &["sweep_value", "mean", "std", "n"],
        label: None,
        rows: r
            .aggregate
            .iter()
            .map(|a| vec![Cell::F(a.sweep_value), Cell::F(a.mean), Cell::F(a.std), Cell::U(a.n as u64)])
            .collect(),
    }
    .write(dir, &format!("{kind}_aggregate"), None, out)
}

fn trajectory_tables(runs: &[TrajectoryRun], dir: &Path, out: &mut Outputs) -> Result<()> {
    for run in runs {
        let t = &run.trajectory;
        Table {
            header: &["step", "distance", "correlation", "weak_distance"],
            label: None,
            rows: t
                .records
                .iter()
                .map(|r| vec![Cell::U(r.step as u64), Cell::F(r.distance), Cell::F(r.correlation), Cell::F(r.weak_distance)])
                .collect(),
        }
        .write(
            dir,
            &format!("exp2_tau{}_seed{}", run.tau0, t.seed),
            Some(&format!("{} tau0={} seed={}", t.params, run.tau0, t.seed)),
            out,
        )?;
    }
    Table {
        header: &["tau0", "seed", "crossed", "min_distance", "final_distance", "weak_baseline", "diverged"],
        label: None,
        rows: runs
            .iter()
            .map(|r| {
                let min = r.trajectory.records.iter().map(|x| x.distance).fold(f64::INFINITY, f64::min);
                vec![
                    Cell::F(r.tau0),
                    Cell::U(r.trajectory.seed),
                    Cell::B(r.crossed()),
                    Cell::F(min),
                    Cell::F(r.trajectory.last().distance),
                    Cell::F(r.weak_baseline),
                    Cell::B(r.trajectory.diverged()),
                ]
            })
            .collect(),
    }
    .write(dir, "exp2_summary", None, out)
}

fn dynamics_tables(runs: &[DynamicsRun], dir: &Path, out: &mut Outputs) -> Result<()> {
    for run in runs {
        Table {
            header: &["step", "tau", "angle_deg", "phi", "phi_se", "pull", "mu0", "mu"],
            label: None,
            rows: run
                .probes
                .iter()
                .map(|p| {
                    vec![
                        Cell::U(p.step as u64),
                        Cell::F(p.tau_now),
                        Cell::F(p.angle_deg),
                        Cell::F(p.phi),
                        Cell::F(p.se_phi),
                        Cell::F(p.pull),
                        Cell::F(p.mu0),
                        Cell::F(p.mu),
                    ]
                })
                .collect(),
        }
        .write(dir, &format!("dynamics_lambda{}_seed{}", run.lambda, run.seed), None, out)?;
    }
    Table {
        header: &["lambda", "seed", "converged", "steps", "tau", "angle_deg", "phi", "phi_se", "pull", "mu0", "mu"],
        label: None,
        rows: runs
            .iter()
            .map(|r| {
                let p = r.last();
                vec![
                    Cell::F(r.lambda),
                    Cell::U(r.seed),
                    Cell::B(r.converged),
                    Cell::U(p.step as u64),
                    Cell::F(p.tau_now),
                    Cell::F(p.angle_deg),
                    Cell::F(p.phi),
                    Cell::F(p.se_phi),
                    Cell::F(p.pull),
                    Cell::F(p.mu0),
                    Cell::F(p.mu),
                ]
            })
            .collect(),
    }
    .write(dir, "dynamics_summary", None, out)
}

/// Writes the CSV results (and their JSON mirrors) for one run into `dir`.
pub fn write_outputs(cfg: &ExperimentConfig, result: &RunOutput, dir: &Path) -> Result<Outputs> {
    fs::create_dir_all(dir)?;
    let mut out = Outputs::default();
    match result {
        RunOutput::Sweep(r) => sweep_tables(cfg.kind.as_str(), r, dir, &mut out)?,
        RunOutput::Trajectories(runs) => trajectory_tables(runs, dir, &mut out)?,
        RunOutput::Dynamics(runs) => dynamics_tables(runs, dir, &mut out)?,
    }
    Ok(out)
}
