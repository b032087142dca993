//! Multi-run studies: grid refinement and perturbed initial data.

use crate::config::{ConfigError, EffectiveConfig};
use crate::evolve::{run, EvolveError, RunResult};
use crate::exec::{map_jobs, Execution};
use crate::model::ModelError;
use crate::reconstruct::{to_physical, uniform_samples, ReconstructError};
use crate::transform::{InitialData, TransformError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Gauss–Legendre panels per unit length for the initial-data norm.
const NORM_PANELS_PER_UNIT: f64 = 40.0;

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("a convergence study needs at least 3 levels, got {0}")]
    TooFewLevels(usize),
    #[error("initial data has zero norm; a relative perturbation is undefined")]
    ZeroNorm,
    #[error("{label} stopped early: {source}")]
    RunFailed {
        label: String,
        #[source]
        source: EvolveError,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Reconstruct(#[from] ReconstructError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub n_points: usize,
    pub dt: f64,
    pub max_energy_drift: f64,
    pub max_residual_uy: f64,
    pub max_residual_xy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub levels: Vec<LevelSummary>,
    /// Sup-norm difference of `u` between level `l` and `l + 1`.
    pub differences: Vec<f64>,
    /// `log2(d_l / d_{l+1})`; `None` when either difference is zero.
    pub orders: Vec<Option<f64>>,
}

impl ConvergenceTable {
    pub fn differences_decrease(&self) -> bool {
        self.differences.windows(2).all(|w| w[1] <= w[0])
    }
}

fn finished(mut result: RunResult, label: String) -> Result<RunResult, StudyError> {
    match result.failure.take() {
        Some(source) => Err(StudyError::RunFailed { label, source }),
        None => Ok(result),
    }
}

/// Largest `|u_a − u_b|` over common snapshot times, sampled uniformly on the
/// overlap of both physical domains clipped to `window`.
pub fn sup_difference(a: &RunResult, b: &RunResult, window: (f64, f64), samples: usize) -> Result<f64, StudyError> {
    let mut sup = 0.0f64;
    for sa in &a.trajectory.snapshots {
        let t = sa.state.time;
        let Some(sb) = b
            .trajectory
            .snapshots
            .iter()
            .find(|s| (s.state.time - t).abs() <= 1e-9 * (1.0 + t.abs()))
        else {
            continue;
        };
        let (xa, xb) = (&sa.state.x, &sb.state.x);
        let lo = xa[0].max(xb[0]).max(window.0);
        let hi = xa[xa.len() - 1].min(xb[xb.len() - 1]).min(window.1);
        let xs = uniform_samples(lo, hi, samples);
        let ua = to_physical(&sa.state, &xs, f64::MIN_POSITIVE)?;
        let ub = to_physical(&sb.state, &xs, f64::MIN_POSITIVE)?;
        for (p, q) in ua.u.iter().zip(&ub.u) {
            sup = sup.max((p - q).abs());
        }
    }
    Ok(sup)
}

/// Run `base` at `(N, dt)`, `(2N, dt/2)`, … and compare neighbouring levels.
/// Snapshot and check cadences scale with the level so snapshot times agree.
pub fn convergence_study(
    base: &EffectiveConfig,
    levels: usize,
    samples: usize,
    exec: Execution,
) -> Result<ConvergenceTable, StudyError> {
    if levels < 3 {
        return Err(StudyError::TooFewLevels(levels));
    }
    let data = base.initial_data()?;
    let mut configs = Vec::with_capacity(levels);
    for l in 0..levels {
        let m = 1usize << l;
        let mut cfg = base.clone();
        cfg.n_points *= m;
        cfg.dt /= m as f64;
        cfg.snapshot_every *= m;
        cfg.check_every *= m;
        configs.push(cfg);
    }
    let runs: Vec<Result<RunResult, StudyError>> = map_jobs(exec, configs, |cfg| {
        let params = cfg.model_params();
        let result = run(&data, &params, &cfg.run_config(exec)).map_err(|source| StudyError::RunFailed {
            label: format!("level N = {}", cfg.n_points),
            source,
        })?;
        finished(result, format!("level N = {}", cfg.n_points))
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;

    let levels = runs
        .iter()
        .map(|r| {
            let max = |f: fn(&crate::DiagnosticsReport) -> f64| r.trajectory.reports.iter().map(f).fold(0.0, f64::max);
            LevelSummary {
                n_points: r.params.n_points(),
                dt: r.config.dt,
                max_energy_drift: r.max_energy_drift(),
                max_residual_uy: max(|d| d.residual_uy),
                max_residual_xy: max(|d| d.residual_xy),
            }
        })
        .collect();
    let window = (-base.half_width, base.half_width);
    let differences = runs
        .windows(2)
        .map(|w| sup_difference(&w[0], &w[1], window, samples))
        .collect::<Result<Vec<_>, _>>()?;
    let orders = differences
        .windows(2)
        .map(|w| (w[0] > 0.0 && w[1] > 0.0).then(|| (w[0] / w[1]).log2()))
        .collect();
    Ok(ConvergenceTable {
        levels,
        differences,
        orders,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationRow {
    /// Size of the perturbation in `H¹ ∩ W^{1,k}`.
    pub delta: f64,
    /// `u₀` is multiplied by this.
    pub factor: f64,
    /// Sup-norm distance to the unperturbed solution over all snapshots.
    pub sup_difference: f64,
}

/// Perturb `u₀` along itself, `u₀ ↦ (1 + δ/‖u₀‖) u₀`, so that the perturbation
/// has norm exactly `δ`, and compare the solutions on `[−L, L]`.
pub fn perturbation_study(
    base: &EffectiveConfig,
    deltas: &[f64],
    samples: usize,
    exec: Execution,
) -> Result<Vec<PerturbationRow>, StudyError> {
    let params = base.model_params();
    let data = base.initial_data()?;
    let panels = (NORM_PANELS_PER_UNIT * base.half_width).ceil() as usize;
    let norm = data.sobolev_norm(base.half_width, panels, params.k());
    if norm == 0.0 {
        return Err(StudyError::ZeroNorm);
    }
    let mut jobs: Vec<(f64, f64)> = vec![(0.0, 1.0)];
    jobs.extend(deltas.iter().map(|&d| (d, 1.0 + d / norm)));
    let cfg = base.run_config(exec);
    let runs: Vec<Result<RunResult, StudyError>> = map_jobs(exec, jobs.clone(), |(delta, factor)| {
        let label = format!("perturbation δ = {delta:e}");
        let d: InitialData = data.scaled(factor)?;
        let result = run(&d, &params, &cfg).map_err(|source| StudyError::RunFailed {
            label: label.clone(),
            source,
        })?;
        finished(result, label)
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
    let window = (-base.half_width, base.half_width);
    jobs.iter()
        .zip(&runs)
        .skip(1)
        .map(|(&(delta, factor), r)| {
            Ok(PerturbationRow {
                delta,
                factor,
                sup_difference: sup_difference(&runs[0], r, window, samples)?,
            })
        })
        .collect()
}
