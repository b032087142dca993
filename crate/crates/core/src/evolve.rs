//! Classical RK4 for the semilinear system
//!
//! ```text
//! u_T = −P_x − Q
//! v_T = −u^λ sin²(v/2) + 2 cos²(v/2) (u^{λ+2} − P − Q_x)
//! ξ_T = (λ+1) ξ sin v (u^λ/2 + u^{λ+2} − P − Q_x)
//! x_T = u^{λ+1}
//! ```
//!
//! with breaking detection: a node breaks when its angle `v` crosses an odd
//! multiple of π.

use crate::diagnostics::{compute_diagnostics, energy, DiagnosticsReport};
use crate::exec::{self, Execution};
use crate::model::{trig_powers, CharGrid, CharState, ModelParams, NonlocalFields};
use crate::nonlocal::{eval_nonlocal, IntegrandPair, NonlocalError, NonlocalMethod};
use crate::transform::{initialize_state, InitialData, TransformError};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvolveError {
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
    #[error(
        "time step {dt:e} too large at T = {time}: dt * max|v_T| = {product:e} exceeds {limit:e}; \
         use dt <= {dt_hint:e}"
    )]
    AngleGuard {
        time: f64,
        dt: f64,
        product: f64,
        limit: f64,
        dt_hint: f64,
    },
    #[error("xi became nonpositive at node {index}, T = {time}; retry with dt <= {dt_hint:e}")]
    XiNonPositive { time: f64, index: usize, dt_hint: f64 },
    #[error("non-finite {field} at node {index}, T = {time}")]
    NonFiniteState {
        time: f64,
        field: &'static str,
        index: usize,
    },
    #[error("diagnostics failed at T = {time}: {reason}")]
    DiagnosticsFailure {
        time: f64,
        reason: String,
        report: Box<DiagnosticsReport>,
    },
    #[error(transparent)]
    Nonlocal(#[from] NonlocalError),
    #[error(transparent)]
    Transform(#[from] TransformError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct RunConfig {
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_every: usize,
    pub cfl_safety: f64,
    pub check_every: usize,
    /// Hard limit on `|E(T) − E(0)| / E(0)`.
    pub energy_drift_limit: f64,
    pub method: NonlocalMethod,
    /// Stop on the first failed a-priori bound instead of only flagging it.
    pub strict_bounds: bool,
    /// Locate the first breaking instant inside its step.
    pub refine_breaking: bool,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 5.0,
            snapshot_every: 500,
            cfl_safety: 0.9,
            check_every: 10,
            energy_drift_limit: 1e-5,
            method: NonlocalMethod::Fast,
            strict_bounds: true,
            refine_breaking: true,
            execution: Execution::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), EvolveError> {
        let bad = |m: &str| Err(EvolveError::InvalidConfig(m.to_string()));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad("dt must be positive");
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return bad("T must be positive");
        }
        if self.snapshot_every == 0 || self.check_every == 0 {
            return bad("snapshot-every and check-every must be at least 1");
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return bad("cfl-safety must lie in (0, 1]");
        }
        if !(self.energy_drift_limit > 0.0) {
            return bad("energy-drift-limit must be positive");
        }
        Ok(())
    }

    /// Number of steps; the last one is shortened when `T/dt` is not an integer.
    pub fn n_steps(&self) -> usize {
        let r = self.t_end / self.dt;
        if (r - r.round()).abs() < 1e-9 * r.max(1.0) {
            r.round() as usize
        } else {
            r.ceil() as usize
        }
    }

    fn time_at(&self, step: usize) -> f64 {
        if step >= self.n_steps() {
            self.t_end
        } else {
            step as f64 * self.dt
        }
    }
}

/// Time derivatives of `(u, v, ξ, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RhsOutput {
    pub du: Vec<f64>,
    pub dv: Vec<f64>,
    pub dxi: Vec<f64>,
    pub dx: Vec<f64>,
}

/// Packed derivatives `[u_T, v_T, ξ_T, x_T]` of every node.
fn pointwise_rhs(
    state: &CharState,
    fields: &NonlocalFields,
    params: &ModelParams,
    exec: Execution,
    out: &mut [[f64; 4]],
) {
    let lambda = params.lambda();
    let c = f64::from(lambda + 1);
    exec::fill_indexed(exec, out, |i| {
        let t = trig_powers(state.v[i], lambda);
        let u = state.u[i];
        let ul = ModelParams::upow(u, lambda);
        let ul1 = ul * u;
        let ul2 = ul1 * u;
        let src = ul2 - fields.p[i] - fields.qx[i];
        let sin_v = 2.0 * t.half_sin_v;
        [
            -fields.px[i] - fields.q[i],
            -ul * t.sin2 + 2.0 * t.cos2 * src,
            c * state.xi[i] * sin_v * (0.5 * ul + src),
            ul1,
        ]
    });
}

/// Right-hand side along `state`, together with the fields it used.
pub fn rhs(
    state: &CharState,
    grid: &CharGrid,
    params: &ModelParams,
    method: NonlocalMethod,
    exec: Execution,
) -> Result<(RhsOutput, NonlocalFields), EvolveError> {
    let (fields, _, _) = eval_nonlocal(method, state, grid, params, exec)?;
    let mut packed = vec![[0.0; 4]; state.len()];
    pointwise_rhs(state, &fields, params, exec, &mut packed);
    let column = |c: usize| packed.iter().map(|d| d[c]).collect();
    Ok((
        RhsOutput {
            du: column(0),
            dv: column(1),
            dxi: column(2),
            dx: column(3),
        },
        fields,
    ))
}

/// Reusable RK4 buffers for one grid.
pub struct Stepper<'a> {
    grid: &'a CharGrid,
    params: ModelParams,
    method: NonlocalMethod,
    exec: Execution,
    k: [Vec<[f64; 4]>; 4],
    stage: CharState,
}

/// Fields, integrands and the first-stage slope at the start of a step.
pub struct StageZero {
    pub fields: NonlocalFields,
    pub pair: IntegrandPair,
    pub max_vt: f64,
}

impl<'a> Stepper<'a> {
    pub fn new(grid: &'a CharGrid, params: ModelParams, method: NonlocalMethod, exec: Execution) -> Self {
        let n = grid.len();
        Self {
            grid,
            params,
            method,
            exec,
            k: std::array::from_fn(|_| vec![[0.0; 4]; n]),
            stage: CharState::zeros(n),
        }
    }

    fn eval(&mut self, slot: usize, state_is_stage: bool, state: &CharState) -> Result<(NonlocalFields, IntegrandPair), EvolveError> {
        let s = if state_is_stage { &self.stage } else { state };
        let (fields, _, pair) = eval_nonlocal(self.method, s, self.grid, &self.params, self.exec)?;
        pointwise_rhs(s, &fields, &self.params, self.exec, &mut self.k[slot]);
        Ok((fields, pair))
    }

    /// First stage: fields along `state` and `k1`.
    pub fn begin(&mut self, state: &CharState) -> Result<StageZero, EvolveError> {
        let (fields, pair) = self.eval(0, false, state)?;
        let max_vt = self.k[0].iter().fold(0.0f64, |m, d| m.max(d[1].abs()));
        Ok(StageZero { fields, pair, max_vt })
    }

    fn set_stage(&mut self, state: &CharState, slot: usize, h: f64) {
        let k = &self.k[slot];
        let st = &mut self.stage;
        st.time = state.time + h;
        for i in 0..state.len() {
            st.u[i] = state.u[i] + h * k[i][0];
            st.v[i] = state.v[i] + h * k[i][1];
            st.xi[i] = state.xi[i] + h * k[i][2];
            st.x[i] = state.x[i] + h * k[i][3];
        }
    }

    /// Remaining three stages after [`Stepper::begin`]; returns the state at `T + dt`.
    pub fn finish(&mut self, state: &CharState, dt: f64) -> Result<CharState, EvolveError> {
        self.set_stage(state, 0, 0.5 * dt);
        self.eval(1, true, state)?;
        self.set_stage(state, 1, 0.5 * dt);
        self.eval(2, true, state)?;
        self.set_stage(state, 2, dt);
        self.eval(3, true, state)?;

        let n = state.len();
        let mut next = CharState::zeros(n);
        next.time = state.time + dt;
        let w = dt / 6.0;
        let [k1, k2, k3, k4] = &self.k;
        for i in 0..n {
            let d = |c: usize| k1[i][c] + 2.0 * (k2[i][c] + k3[i][c]) + k4[i][c];
            next.u[i] = state.u[i] + w * d(0);
            next.v[i] = state.v[i] + w * d(1);
            next.xi[i] = state.xi[i] + w * d(2);
            next.x[i] = state.x[i] + w * d(3);
        }
        check_state(&next, dt)?;
        Ok(next)
    }

    /// One full step.
    pub fn step(&mut self, state: &CharState, dt: f64) -> Result<CharState, EvolveError> {
        self.begin(state)?;
        self.finish(state, dt)
    }
}

fn check_state(state: &CharState, dt: f64) -> Result<(), EvolveError> {
    if let Some((field, index)) = state.first_non_finite() {
        return Err(EvolveError::NonFiniteState {
            time: state.time,
            field,
            index,
        });
    }
    if let Some(index) = state.first_nonpositive_xi() {
        return Err(EvolveError::XiNonPositive {
            time: state.time,
            index,
            dt_hint: 0.5 * dt,
        });
    }
    Ok(())
}

/// Single RK4 step with the default execution policy.
pub fn step_rk4(state: &CharState, grid: &CharGrid, params: &ModelParams, dt: f64) -> Result<CharState, EvolveError> {
    Stepper::new(grid, *params, NonlocalMethod::Fast, Execution::default()).step(state, dt)
}

/// Index of the `2π`-sheet that `v` lies on; it changes exactly when `v`
/// crosses an odd multiple of π.
#[inline]
pub fn angle_sheet(v: f64) -> i64 {
    ((v + PI) / (2.0 * PI)).floor() as i64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakingEvent {
    /// End of the step in which the crossings happened.
    pub time: f64,
    pub nodes: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BreakingLog {
    /// First instant any node crosses `v = ±π`, refined inside its step.
    pub first_time: Option<f64>,
    pub first_node: Option<usize>,
    /// State at `first_time`.
    #[serde(skip)]
    pub first_state: Option<CharState>,
    pub events: Vec<BreakingEvent>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub state: CharState,
    pub fields: NonlocalFields,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    pub reports: Vec<DiagnosticsReport>,
}

#[derive(Debug)]
pub struct RunResult {
    pub params: ModelParams,
    pub config: RunConfig,
    pub grid: CharGrid,
    pub e0: f64,
    pub initial: CharState,
    pub trajectory: Trajectory,
    pub breaking: BreakingLog,
    /// Set when the run stopped early; the trajectory holds everything up to then.
    pub failure: Option<EvolveError>,
}

impl RunResult {
    pub fn completed(&self) -> bool {
        self.failure.is_none()
    }

    pub fn max_energy_drift(&self) -> f64 {
        self.trajectory
            .reports
            .iter()
            .map(|r| r.energy_drift.abs())
            .fold(0.0, f64::max)
    }

    pub fn all_bounds_hold(&self) -> bool {
        self.trajectory.reports.iter().all(|r| r.bounds_hold())
    }

    pub fn final_state(&self) -> &CharState {
        &self.trajectory.snapshots.last().expect("at least the initial snapshot").state
    }
}

/// Initialize from `data` and integrate to `cfg.t_end`.
pub fn run(data: &InitialData, params: &ModelParams, cfg: &RunConfig) -> Result<RunResult, EvolveError> {
    cfg.validate()?;
    let init = initialize_state(data, params)?;
    run_from(init.grid, init.state, params, cfg)
}

/// Integrate an already initialized state.
pub fn run_from(grid: CharGrid, initial: CharState, params: &ModelParams, cfg: &RunConfig) -> Result<RunResult, EvolveError> {
    cfg.validate()?;
    let e0 = energy(&initial, &grid, params);
    let mut trajectory = Trajectory::default();
    let mut breaking = BreakingLog::default();
    let failure = integrate(&grid, &initial, params, cfg, e0, &mut trajectory, &mut breaking).err();
    Ok(RunResult {
        params: *params,
        config: cfg.clone(),
        grid,
        e0,
        initial,
        trajectory,
        breaking,
        failure,
    })
}

fn integrate(
    grid: &CharGrid,
    initial: &CharState,
    params: &ModelParams,
    cfg: &RunConfig,
    e0: f64,
    traj: &mut Trajectory,
    breaking: &mut BreakingLog,
) -> Result<(), EvolveError> {
    let mut stepper = Stepper::new(grid, *params, cfg.method, cfg.execution);
    let n_steps = cfg.n_steps();
    let angle_limit = cfg.cfl_safety * PI / 4.0;
    let mut state = initial.clone();
    let mut sheets: Vec<i64> = state.v.iter().map(|&v| angle_sheet(v)).collect();

    for step in 0..=n_steps {
        let zero = stepper.begin(&state)?;
        let last = step == n_steps;

        if step % cfg.check_every == 0 || last {
            let report = compute_diagnostics(&state, &zero.fields, &zero.pair, grid, params, e0);
            let verdict = judge(&report, cfg);
            traj.reports.push(report);
            if let Some(reason) = verdict {
                let report = traj.reports.last().unwrap().clone();
                push_snapshot(traj, step, &state, zero.fields);
                return Err(EvolveError::DiagnosticsFailure {
                    time: state.time,
                    reason,
                    report: Box::new(report),
                });
            }
        }
        if step % cfg.snapshot_every == 0 || last {
            push_snapshot(traj, step, &state, zero.fields);
        }
        if last {
            break;
        }

        let dt = cfg.time_at(step + 1) - cfg.time_at(step);
        if dt * zero.max_vt > angle_limit {
            return Err(EvolveError::AngleGuard {
                time: state.time,
                dt,
                product: dt * zero.max_vt,
                limit: angle_limit,
                dt_hint: angle_limit / zero.max_vt,
            });
        }
        let mut next = stepper.finish(&state, dt)?;
        next.time = cfg.time_at(step + 1);

        let mut crossed = 0;
        let mut earliest: Option<(f64, usize, f64)> = None;
        for (i, (&v_new, sheet)) in next.v.iter().zip(sheets.iter_mut()).enumerate() {
            let s = angle_sheet(v_new);
            if s != *sheet {
                crossed += 1;
                if breaking.first_time.is_none() {
                    let v_old = state.v[i];
                    let level = PI * (2 * s.max(*sheet) - 1) as f64;
                    let frac = ((level - v_old) / (v_new - v_old)).clamp(0.0, 1.0);
                    if earliest.is_none_or(|(f, _, _)| frac < f) {
                        earliest = Some((frac, i, level));
                    }
                }
                *sheet = s;
            }
        }
        if crossed > 0 {
            breaking.events.push(BreakingEvent {
                time: next.time,
                nodes: crossed,
            });
            if let Some((frac, node, level)) = earliest {
                let (tau, at) = if cfg.refine_breaking {
                    refine_crossing(&mut stepper, &state, node, level, dt, frac)?
                } else {
                    (frac * dt, None)
                };
                breaking.first_time = Some(state.time + tau);
                breaking.first_node = Some(node);
                breaking.first_state = at;
            }
        }
        state = next;
    }
    Ok(())
}

fn push_snapshot(traj: &mut Trajectory, step: usize, state: &CharState, fields: NonlocalFields) {
    traj.snapshots.push(Snapshot {
        step,
        state: state.clone(),
        fields,
    });
}

fn judge(r: &DiagnosticsReport, cfg: &RunConfig) -> Option<String> {
    if r.energy_drift.abs() > cfg.energy_drift_limit {
        return Some(format!(
            "relative energy drift {:e} exceeds the limit {:e}",
            r.energy_drift, cfg.energy_drift_limit
        ));
    }
    if cfg.strict_bounds && !r.bounds_hold() {
        return Some(format!("a-priori bound violated: {:?}", r.flags));
    }
    None
}

/// Locate `τ ∈ [0, dt]` where `v_node(T + τ) = level`, each trial value
/// coming from one RK4 step of length `τ` (Illinois variant of regula falsi).
fn refine_crossing(
    stepper: &mut Stepper<'_>,
    state: &CharState,
    node: usize,
    level: f64,
    dt: f64,
    guess: f64,
) -> Result<(f64, Option<CharState>), EvolveError> {
    let g0 = state.v[node] - level;
    if g0 == 0.0 {
        return Ok((0.0, Some(state.clone())));
    }
    let mut trial = |tau: f64| -> Result<(f64, CharState), EvolveError> {
        let s = stepper.step(state, tau)?;
        Ok((s.v[node] - level, s))
    };
    let (mut a, mut fa) = (0.0, g0);
    let (mut b, mut fb) = (dt, trial(dt)?.0);
    if fa * fb > 0.0 {
        return Ok((guess * dt, None));
    }
    let mut best: Option<(f64, CharState)> = None;
    let mut side = 0;
    let mut tau = guess * dt;
    for _ in 0..60 {
        let (f, s) = trial(tau)?;
        let done = f == 0.0 || (b - a) < 1e-14 * dt.max(state.time.abs());
        best = Some((tau, s));
        if done {
            break;
        }
        if f * fb > 0.0 {
            b = tau;
            fb = f;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        } else {
            a = tau;
            fa = f;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        }
        tau = (a * fb - b * fa) / (fb - fa);
        if !(tau > a && tau < b) {
            tau = 0.5 * (a + b);
        }
        if (b - a) < 4.0 * f64::EPSILON * dt {
            break;
        }
    }
    let (tau, mut s) = best.expect("at least one trial");
    s.time = state.time + tau;
    Ok((tau, Some(s)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(lambda: u32, l: f64, n: usize) -> ModelParams {
        ModelParams::new(lambda, l, n).unwrap()
    }

    #[test]
    fn zero_state_is_a_fixed_point() {
        let p = params(1, 5.0, 64);
        let cfg = RunConfig {
            t_end: 0.5,
            dt: 0.01,
            check_every: 1,
            snapshot_every: 10,
            ..RunConfig::default()
        };
        let r = run(&InitialData::Zero, &p, &cfg).unwrap();
        assert!(r.completed());
        assert!(r.trajectory.reports.iter().all(|d| d.energy == 0.0));
        let last = r.final_state();
        assert!(last.u.iter().chain(&last.v).all(|&z| z == 0.0));
        assert!(last.xi.iter().all(|&z| z == 1.0));
        assert_relative_eq!(last.time, 0.5);
        assert!(r.breaking.first_time.is_none());
    }

    #[test]
    fn rhs_of_zero_state_vanishes() {
        let grid = CharGrid::uniform(-3.0, 3.0, 32).unwrap();
        let (d, f) = rhs(&CharState::zeros(32), &grid, &params(2, 3.0, 32), NonlocalMethod::Fast, Execution::Sequential).unwrap();
        assert!(d.du.iter().chain(&d.dv).chain(&d.dxi).chain(&d.dx).all(|&z| z == 0.0));
        assert!(f.p.iter().all(|&z| z == 0.0));
    }

    #[test]
    fn novikov_rhs_with_zero_velocity_sees_q() {
        // u ≡ 0 leaves only the a_Q integrand for λ = 1.
        let grid = CharGrid::uniform(-6.0, 6.0, 241).unwrap();
        let mut s = CharState::zeros(241);
        for (i, &y) in grid.nodes().iter().enumerate() {
            s.v[i] = 1.5 * (-y * y).exp();
            s.x[i] = y;
        }
        let p = params(1, 6.0, 241);
        let (fast, _) = rhs(&s, &grid, &p, NonlocalMethod::Fast, Execution::Sequential).unwrap();
        let (naive, f) = rhs(&s, &grid, &p, NonlocalMethod::Naive, Execution::Sequential).unwrap();
        assert!(f.q.iter().any(|&q| q != 0.0));
        for (a, b) in fast.du.iter().zip(&naive.du) {
            assert!((a - b).abs() <= 1e-13);
        }
        assert!(fast.dx.iter().all(|&z| z == 0.0));
    }

    #[test]
    fn sequential_and_parallel_runs_are_identical() {
        let p = params(1, 10.0, 4096);
        let data = InitialData::gaussian(1.0, 1.0, 0.0);
        let cfg = |execution| RunConfig {
            t_end: 0.02,
            dt: 0.005,
            execution,
            ..RunConfig::default()
        };
        let a = run(&data, &p, &cfg(Execution::Sequential)).unwrap();
        let b = run(&data, &p, &cfg(Execution::Parallel)).unwrap();
        assert_eq!(a.final_state(), b.final_state());
    }

    #[test]
    fn angle_guard_rejects_large_steps() {
        let p = params(0, 10.0, 256);
        let cfg = RunConfig {
            dt: 0.8,
            t_end: 1.6,
            ..RunConfig::default()
        };
        let r = run(&InitialData::gaussian(3.0, 0.5, 0.0), &p, &cfg).unwrap();
        assert!(matches!(r.failure, Some(EvolveError::AngleGuard { .. })));
    }

    #[test]
    fn uneven_final_step_lands_on_t_end() {
        let cfg = RunConfig {
            dt: 0.3,
            t_end: 1.0,
            ..RunConfig::default()
        };
        assert_eq!(cfg.n_steps(), 4);
        assert_eq!(cfg.time_at(4), 1.0);
        assert_eq!(RunConfig { dt: 1e-3, t_end: 5.0, ..cfg.clone() }.n_steps(), 5000);
    }

    #[test]
    fn sheet_changes_exactly_at_odd_multiples_of_pi() {
        assert_eq!(angle_sheet(0.0), 0);
        assert_eq!(angle_sheet(PI - 1e-12), 0);
        assert_eq!(angle_sheet(PI + 1e-12), 1);
        assert_eq!(angle_sheet(-PI - 1e-12), -1);
        assert_eq!(angle_sheet(3.0 * PI + 1e-9), 2);
    }

    #[test]
    fn invalid_config_is_rejected() {
        for cfg in [
            RunConfig { dt: 0.0, ..RunConfig::default() },
            RunConfig { snapshot_every: 0, ..RunConfig::default() },
            RunConfig { cfl_safety: 1.5, ..RunConfig::default() },
        ] {
            assert!(matches!(cfg.validate(), Err(EvolveError::InvalidConfig(_))));
        }
    }
}
