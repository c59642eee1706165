use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Kind, Param};
use crate::analysis::{aggregate, Aggregate};
use crate::error::{Error, Result};
use crate::geometry::{embed_with_overlap, random_unit, UnitVector};
use crate::landscape::{probe, LandscapeProbe};
use crate::rng::{cell_stream, seeded, Rng};
use crate::spectral::{empirical_top_eigenvector, orient_by_weak_loss, PowerIteration};
use crate::spiked::{build_config, label, sample, weak_baseline, SpikedConfig};
use crate::training::{train_online, Supervisor, Trajectory, TrainerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sweep_value: f64,
    pub seed: u64,
    pub final_distance: f64,
    pub final_correlation: f64,
    pub crossed: bool,
    pub diverged: bool,
    pub weak_baseline: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub sweep_param: String,
    pub rows: Vec<SweepRow>,
    /// Baseline of the first row; rows carry their own (it varies with γ).
    pub weak_baseline: f64,
    pub aggregate: Vec<Aggregate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRun {
    pub tau0: f64,
    pub weak_baseline: f64,
    pub trajectory: Trajectory,
}

impl TrajectoryRun {
    /// True when some record after the start lies strictly below the
    /// supervisor's own distance.
    pub fn crossed(&self) -> bool {
        self.trajectory
            .records
            .iter()
            .any(|r| r.step >= 1 && r.distance < self.weak_baseline)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsRun {
    pub lambda: f64,
    pub seed: u64,
    pub converged: bool,
    pub probes: Vec<LandscapeProbe>,
}

impl DynamicsRun {
    pub fn last(&self) -> &LandscapeProbe {
        self.probes.last().expect("at least one probe")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunOutput {
    Sweep(SweepResult),
    Trajectories(Vec<TrajectoryRun>),
    Dynamics(Vec<DynamicsRun>),
}

/// Maps `f` over cells, in parallel when enabled; output keeps cell order.
fn map_cells<C: Sync, T: Send>(cells: &[C], f: impl Fn(&C) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        cells.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        cells.iter().map(f).collect()
    }
}

fn cell_rng(kind: Kind, value_index: usize, seed: u64) -> Rng {
    seeded(cell_stream(kind.tag(), value_index as u64, seed))
}

fn trainer(cfg: &ExperimentConfig, eta: f64, stride: usize) -> TrainerConfig {
    TrainerConfig {
        steps: cfg.t,
        eta: Some(eta),
        delta: None,
        record_stride: stride,
        supervisor: Supervisor::Weak,
        gradient: cfg.gradient,
        n_mc: cfg.n_pop,
    }
}

/// PCA on fresh pre-training samples, oriented by the weak labels.
fn pretrain(cfg: &ExperimentConfig, sc: &SpikedConfig, rng: &mut Rng, lambda: f64, rho: f64) -> Result<UnitVector> {
    let spec = cfg.activation.build(lambda, rho)?;
    let batch = sample(sc, cfg.n_pre, rng)?;
    let top = empirical_top_eigenvector(&batch, cfg.pca_tol, cfg.pca_max_iter, rng)?;
    let y = label(&batch, &sc.v_weak, &spec)?;
    orient_by_weak_loss(&top.direction, &batch, &y, &spec)
}

struct Point {
    lambda: f64,
    rho: f64,
    gamma: f64,
    eta: f64,
}

fn point(cfg: &ExperimentConfig, swept: Param, v: f64) -> Result<Point> {
    let get = |p: Param| if p == swept { Ok(v) } else { cfg.scalar(p) };
    Ok(Point {
        lambda: get(Param::Lambda)?,
        rho: get(Param::Rho)?,
        gamma: get(Param::Gamma)?,
        eta: get(Param::Eta)?,
    })
}

fn sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let swept = cfg
        .kind
        .swept()
        .ok_or_else(|| Error::Config(format!("{} is not a sweep", cfg.kind.as_str())))?;
    let values = cfg.swept_values().unwrap().to_vec();
    let cells: Vec<(usize, f64, u64)> = values
        .iter()
        .enumerate()
        .flat_map(|(i, &v)| cfg.seeds.iter().map(move |&s| (i, v, s)))
        .collect();
    let rows = map_cells(&cells, |&(i, v, seed)| {
        let p = point(cfg, swept, v)?;
        let mut rng = cell_rng(cfg.kind, i, seed);
        let sc = build_config(cfg.d, p.lambda, p.rho, p.gamma, &mut rng)?;
        let w0 = pretrain(cfg, &sc, &mut rng, p.lambda, p.rho)?;
        let spec = cfg.activation.build(p.lambda, p.rho)?;
        let traj = train_online(&w0, &sc, &spec, &trainer(cfg, p.eta, cfg.t), seed, &mut rng)?;
        let last = traj.last();
        let baseline = weak_baseline(p.gamma);
        Ok(SweepRow {
            sweep_value: v,
            seed,
            final_distance: last.distance,
            final_correlation: last.correlation,
            crossed: last.distance < baseline,
            diverged: traj.diverged(),
            weak_baseline: baseline,
        })
    })?;
    let agg_in: Vec<(f64, f64)> = rows.iter().map(|r| (r.sweep_value, r.final_distance)).collect();
    Ok(SweepResult {
        sweep_param: swept.as_str().to_string(),
        weak_baseline: rows[0].weak_baseline,
        aggregate: aggregate(&agg_in)?,
        rows,
    })
}

/// Final distance after `T` weak-label steps from the oriented PCA
/// direction, for each alignment `ρ` and seed.
pub fn run_exp1(cfg: &ExperimentConfig) -> Result<SweepResult> {
    if cfg.kind != Kind::Exp1 {
        return Err(Error::Config("run_exp1 needs kind = exp1".into()));
    }
    sweep(cfg)
}

/// One sweep over the parameter named by `cfg.kind`.
pub fn run_condition_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    match cfg.kind {
        Kind::SweepLambda | Kind::SweepRho | Kind::SweepGamma | Kind::SweepLr => sweep(cfg),
        k => Err(Error::Config(format!("{} is not a condition sweep", k.as_str()))),
    }
}

/// Full trajectories from initializations at exact overlaps `τ₀` with `v*`.
pub fn run_exp2(cfg: &ExperimentConfig) -> Result<Vec<TrajectoryRun>> {
    if cfg.kind != Kind::Exp2 {
        return Err(Error::Config("run_exp2 needs kind = exp2".into()));
    }
    cfg.validate()?;
    let (lambda, rho, gamma, eta) = (
        cfg.scalar(Param::Lambda)?,
        cfg.scalar(Param::Rho)?,
        cfg.scalar(Param::Gamma)?,
        cfg.scalar(Param::Eta)?,
    );
    let spec = cfg.activation.build(lambda, rho)?;
    let cells: Vec<(usize, f64, u64)> = cfg
        .tau_list
        .iter()
        .enumerate()
        .flat_map(|(i, &t)| cfg.seeds.iter().map(move |&s| (i, t, s)))
        .collect();
    map_cells(&cells, |&(i, tau0, seed)| {
        let mut rng = cell_rng(cfg.kind, i, seed);
        let sc = build_config(cfg.d, lambda, rho, gamma, &mut rng)?;
        let w0 = embed_with_overlap(&sc.v_star, tau0, &mut rng)?;
        let trajectory = train_online(&w0, &sc, &spec, &trainer(cfg, eta, cfg.record_stride), seed, &mut rng)?;
        Ok(TrajectoryRun { tau0, weak_baseline: sc.weak_baseline(), trajectory })
    })
}

/// Power iteration on the pre-training covariance from a random start,
/// probing the weak-supervised landscape after every step.
///
/// Each iterate is oriented by the weak labels before probing, since power
/// iteration alone does not fix the sign.
pub fn run_landscape_dynamics(cfg: &ExperimentConfig) -> Result<Vec<DynamicsRun>> {
    if cfg.kind != Kind::LandscapeDynamics {
        return Err(Error::Config("run_landscape_dynamics needs kind = landscape_dynamics".into()));
    }
    cfg.validate()?;
    let (rho, gamma) = (cfg.scalar(Param::Rho)?, cfg.scalar(Param::Gamma)?);
    let estimator = cfg.estimator();
    let cells: Vec<(usize, f64, u64)> = cfg
        .lambda
        .as_slice()
        .iter()
        .enumerate()
        .flat_map(|(i, &l)| cfg.seeds.iter().map(move |&s| (i, l, s)))
        .collect();
    map_cells(&cells, |&(i, lambda, seed)| {
        let mut rng = cell_rng(cfg.kind, i, seed);
        let spec = cfg.activation.build(lambda, rho)?;
        let sc = build_config(cfg.d, lambda, rho, gamma, &mut rng)?;
        let batch = sample(&sc, cfg.n_pre, &mut rng)?;
        let y = label(&batch, &sc.v_weak, &spec)?;
        let mut it = PowerIteration::new(&batch, random_unit(cfg.d, &mut rng)?)?;
        let mut probes = Vec::new();
        let mut converged = false;
        for step in 1..=cfg.dynamics_max_steps {
            let disp = it.step()?;
            let oriented = orient_by_weak_loss(it.current(), &batch, &y, &spec)?;
            it.set_current(oriented);
            probes.push(probe(step, it.current(), &sc, &spec, estimator, cfg.n_pop, &mut rng)?);
            if disp < cfg.dynamics_tol {
                converged = true;
                break;
            }
        }
        Ok(DynamicsRun { lambda, seed, converged, probes })
    })
}

/// Dispatches on `cfg.kind`.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    match cfg.kind {
        Kind::Exp1 => run_exp1(cfg).map(RunOutput::Sweep),
        Kind::Exp2 => run_exp2(cfg).map(RunOutput::Trajectories),
        Kind::LandscapeDynamics => run_landscape_dynamics(cfg).map(RunOutput::Dynamics),
        _ => run_condition_sweep(cfg).map(RunOutput::Sweep),
    }
}
