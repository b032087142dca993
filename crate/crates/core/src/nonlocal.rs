//! Exponential-kernel fields `P, P_x, Q, Q_x` in characteristic coordinates.
//!
//! Every field is a convolution of the form
//!
//! ```text
//! ∫ exp(−|X(Y) − X(Y')|) a(Y') dY',    X(Y) = ∫_{y_min}^{Y} cos^k(v/2) ξ ds
//! ```
//!
//! Split at `Y' = Y` into a left part `I⁻` and a right part `I⁺`, each side
//! satisfies a first-order recurrence in the node index:
//!
//! ```text
//! I⁻(Y_{i+1}) = e^{−ΔX_i} I⁻(Y_i) + ∫_{Y_i}^{Y_{i+1}} e^{−(X_{i+1} − X(s))} a(s) ds
//! ```
//!
//! so the fast path costs one sweep per direction. Panel integrals use the
//! six-node composite rule of [`CharGrid`]; the kernel factor at each stencil
//! node is a product of the panel factors `e^{∓ΔX}`, which is exact, so the
//! sweep and the O(N²) double sum agree to round-off.

use crate::exec::{self, Execution};
use crate::model::{trig_powers, CharGrid, CharState, ModelParams, NonlocalFields};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest grid accepted by the O(N²) reference path.
pub const NAIVE_MAX_POINTS: usize = 8192;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NonlocalError {
    #[error("the O(N^2) reference path is limited to {NAIVE_MAX_POINTS} points, got {0}")]
    GridTooLargeForOracle(usize),
    #[error("convolution bound violated for {field}: sup = {sup:e} exceeds bound {bound:e}")]
    BoundViolated {
        field: &'static str,
        sup: f64,
        bound: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NonlocalMethod {
    /// O(N) two-sweep recurrence.
    #[default]
    Fast,
    /// O(N) recurrence with compensated accumulation.
    FastCompensated,
    /// O(N²) direct double sum.
    Naive,
}

/// Cumulative metric `X(Y_i)` and the per-panel increments `ΔX_i ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricProfile {
    pub x: Vec<f64>,
    pub panel: Vec<f64>,
}

impl MetricProfile {
    pub fn total(&self) -> f64 {
        *self.x.last().unwrap_or(&0.0)
    }
}

/// Integrands of `P` and `Q` in characteristic coordinates, including `ξ`:
///
/// * `a_P = [(2λ+1)/2 · u^λ sin²(v/2) cos^{k−2}(v/2) + u^{λ+2} cos^k(v/2)] ξ`
/// * `a_Q = (λ/2) · u^{λ−1} sin³(v/2) cos^{k−3}(v/2) ξ`  (identically zero for λ = 0)
#[derive(Debug, Clone, PartialEq)]
pub struct IntegrandPair {
    pub a_p: Vec<f64>,
    pub a_q: Vec<f64>,
}

impl IntegrandPair {
    pub fn has_q(&self) -> bool {
        self.a_q.iter().any(|&a| a != 0.0)
    }
}

pub fn metric_profile(state: &CharState, grid: &CharGrid, params: &ModelParams) -> MetricProfile {
    let lambda = params.lambda();
    let density: Vec<f64> = state
        .v
        .iter()
        .zip(&state.xi)
        .map(|(&v, &xi)| trig_powers(v, lambda).cos_k * xi)
        .collect();
    metric_from_density(grid, &density)
}

/// Metric from the nonnegative density `cos^k(v/2) ξ` sampled at the nodes.
pub fn metric_from_density(grid: &CharGrid, density: &[f64]) -> MetricProfile {
    let n = grid.len();
    let mut panel = vec![0.0; n.saturating_sub(1)];
    let mut x = vec![0.0; n];
    for i in 0..n.saturating_sub(1) {
        // The panel rule can dip below zero where the density nearly vanishes.
        panel[i] = grid.panel_integral(density, i).max(0.0);
        x[i + 1] = x[i] + panel[i];
    }
    MetricProfile { x, panel }
}

pub fn integrands(state: &CharState, params: &ModelParams, exec: Execution) -> IntegrandPair {
    let n = state.len();
    let lambda = params.lambda();
    let c_p = f64::from(2 * lambda + 1) / 2.0;
    let c_q = f64::from(lambda) / 2.0;
    let mut a_p = vec![0.0; n];
    let mut a_q = vec![0.0; n];
    exec::fill_indexed(exec, &mut a_p, |i| {
        let t = trig_powers(state.v[i], lambda);
        let u = state.u[i];
        let ul = ModelParams::upow(u, lambda);
        (c_p * ul * t.sin2_cos_km2 + ul * u * u * t.cos_k) * state.xi[i]
    });
    if lambda > 0 {
        exec::fill_indexed(exec, &mut a_q, |i| {
            let t = trig_powers(state.v[i], lambda);
            c_q * ModelParams::upow(state.u[i], lambda - 1) * t.sin3_cos_km3 * state.xi[i]
        });
    }
    IntegrandPair { a_p, a_q }
}

/// Evaluate the four fields along `state` with the chosen method.
pub fn eval_nonlocal(
    method: NonlocalMethod,
    state: &CharState,
    grid: &CharGrid,
    params: &ModelParams,
    exec: Execution,
) -> Result<(NonlocalFields, MetricProfile, IntegrandPair), NonlocalError> {
    let metric = metric_profile(state, grid, params);
    let pair = integrands(state, params, exec);
    let fields = match method {
        NonlocalMethod::Fast => eval_nonlocal_fast(grid, &metric, &pair, false, exec),
        NonlocalMethod::FastCompensated => eval_nonlocal_fast(grid, &metric, &pair, true, exec),
        NonlocalMethod::Naive => eval_nonlocal_naive(grid, &metric, &pair, exec)?,
    };
    Ok((fields, metric, pair))
}

/// Running sum `s ← e·s + t`, optionally with a compensation term.
#[derive(Clone, Copy, Default)]
struct Acc {
    s: f64,
    c: f64,
}

impl Acc {
    #[inline]
    fn push(&mut self, decay: f64, term: f64, compensated: bool) {
        if compensated {
            self.s *= decay;
            self.c *= decay;
            let y = term - self.c;
            let t = self.s + y;
            self.c = (t - self.s) - y;
            self.s = t;
        } else {
            self.s = decay * self.s + term;
        }
    }
}

/// `exp(−(X_target − X_m))` for a stencil node `m` near `target`, built from
/// the panel factors `e_j = exp(−ΔX_j)` and their reciprocals.
#[inline]
fn left_factor(decay: &[f64], growth: &[f64], target: usize, m: usize) -> f64 {
    let mut f = 1.0;
    if m <= target {
        for d in &decay[m..target] {
            f *= d;
        }
    } else {
        for g in &growth[target..m] {
            f *= g;
        }
    }
    f
}

/// `exp(−(X_m − X_target))`.
#[inline]
fn right_factor(decay: &[f64], growth: &[f64], target: usize, m: usize) -> f64 {
    let mut f = 1.0;
    if m >= target {
        for d in &decay[target..m] {
            f *= d;
        }
    } else {
        for g in &growth[m..target] {
            f *= g;
        }
    }
    f
}

/// One directional sweep for up to two integrands sharing the kernel.
fn sweep(
    grid: &CharGrid,
    decay: &[f64],
    growth: &[f64],
    a: &[f64],
    b: Option<&[f64]>,
    leftward: bool,
    compensated: bool,
) -> (Vec<f64>, Vec<f64>) {
    let n = grid.len();
    let panels = grid.panels();
    let mut out_a = vec![0.0; n];
    let mut out_b = vec![0.0; if b.is_some() { n } else { 0 }];
    let (mut acc_a, mut acc_b) = (Acc::default(), Acc::default());

    let mut step = |i: usize, target: usize, factor: &dyn Fn(usize) -> f64| {
        let p = &panels[i];
        let mut ta = 0.0;
        let mut tb = 0.0;
        for (&m, &w) in p.idx.iter().zip(&p.w) {
            if w == 0.0 {
                continue;
            }
            let k = w * factor(m);
            ta += k * a[m];
            if let Some(b) = b {
                tb += k * b[m];
            }
        }
        acc_a.push(decay[i], ta, compensated);
        out_a[target] = acc_a.s;
        if b.is_some() {
            acc_b.push(decay[i], tb, compensated);
            out_b[target] = acc_b.s;
        }
    };

    if leftward {
        for i in 0..n.saturating_sub(1) {
            let target = i + 1;
            step(i, target, &|m| left_factor(decay, growth, target, m));
        }
    } else {
        for i in (0..n.saturating_sub(1)).rev() {
            step(i, i, &|m| right_factor(decay, growth, i, m));
        }
    }
    (out_a, out_b)
}

/// O(N) evaluation by one left-to-right and one right-to-left sweep.
pub fn eval_nonlocal_fast(
    grid: &CharGrid,
    metric: &MetricProfile,
    pair: &IntegrandPair,
    compensated: bool,
    exec: Execution,
) -> NonlocalFields {
    let n = grid.len();
    let decay: Vec<f64> = metric.panel.iter().map(|d| (-d).exp()).collect();
    let growth: Vec<f64> = decay.iter().map(|e| 1.0 / e).collect();
    let b = if pair.has_q() { Some(pair.a_q.as_slice()) } else { None };

    let ((lp, lq), (rp, rq)) = exec::join(
        exec,
        || sweep(grid, &decay, &growth, &pair.a_p, b, true, compensated),
        || sweep(grid, &decay, &growth, &pair.a_p, b, false, compensated),
    );

    let mut fields = NonlocalFields::zeros(n);
    combine(&lp, &rp, &mut fields.p, &mut fields.px);
    if b.is_some() {
        combine(&lq, &rq, &mut fields.q, &mut fields.qx);
    }
    fields
}

/// Field `½(I⁻ + I⁺)` and its x-derivative `½(I⁺ − I⁻)`.
fn combine(left: &[f64], right: &[f64], field: &mut [f64], deriv: &mut [f64]) {
    for i in 0..left.len() {
        field[i] = 0.5 * (left[i] + right[i]);
        deriv[i] = 0.5 * (right[i] - left[i]);
    }
}

/// O(N²) reference: for every node, the direct panel sum with kernel values
/// `exp(−|X_i − X_m|)` taken from the cumulative metric.
pub fn eval_nonlocal_naive(
    grid: &CharGrid,
    metric: &MetricProfile,
    pair: &IntegrandPair,
    exec: Execution,
) -> Result<NonlocalFields, NonlocalError> {
    let n = grid.len();
    if n > NAIVE_MAX_POINTS {
        return Err(NonlocalError::GridTooLargeForOracle(n));
    }
    let has_q = pair.has_q();
    let panels = grid.panels();
    let x = &metric.x;

    let rows: Vec<[f64; 4]> = exec::map_jobs(exec, (0..n).collect(), |i| {
        let (mut lp, mut lq, mut rp, mut rq) = (0.0, 0.0, 0.0, 0.0);
        for (p, panel) in panels.iter().enumerate() {
            let left = p < i;
            for (&m, &w) in panel.idx.iter().zip(&panel.w) {
                if w == 0.0 {
                    continue;
                }
                let k = if left {
                    w * (-(x[i] - x[m])).exp()
                } else {
                    w * (-(x[m] - x[i])).exp()
                };
                if left {
                    lp += k * pair.a_p[m];
                    if has_q {
                        lq += k * pair.a_q[m];
                    }
                } else {
                    rp += k * pair.a_p[m];
                    if has_q {
                        rq += k * pair.a_q[m];
                    }
                }
            }
        }
        [lp, rp, lq, rq]
    });

    let mut fields = NonlocalFields::zeros(n);
    for (i, r) in rows.iter().enumerate() {
        fields.p[i] = 0.5 * (r[0] + r[1]);
        fields.px[i] = 0.5 * (r[1] - r[0]);
        if has_q {
            fields.q[i] = 0.5 * (r[2] + r[3]);
            fields.qx[i] = 0.5 * (r[3] - r[2]);
        }
    }
    Ok(fields)
}

/// Margins of the convolution bound `sup|∫ e^{−|X−X'|} a dY'| ≤ ‖g‖₁ sup|a|`
/// with `‖g‖₁ = 9B² + 2^{λ+2}/C⁻`, `B = ‖v‖_{L²}`, `C⁻ = min ξ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvolutionBoundReport {
    pub g_l1: f64,
    pub v_l2: f64,
    pub xi_min: f64,
    /// `bound − sup` for P, Px, Q, Qx; nonnegative when the bound holds.
    pub margins: [f64; 4],
    /// `false` when `a_Q ≡ 0`, so the Q margins are trivially zero.
    pub q_active: bool,
}

impl ConvolutionBoundReport {
    pub fn holds(&self) -> bool {
        self.margins.iter().all(|&m| m >= 0.0)
    }

    /// Smallest margin over the fields with a nonzero integrand.
    pub fn min_margin(&self) -> f64 {
        let used = if self.q_active { 4 } else { 2 };
        self.margins[..used].iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `‖g‖₁ = 9B² + 2^{λ+2}/C⁻`.
pub fn kernel_envelope_l1(v_l2: f64, xi_min: f64, lambda: u32) -> f64 {
    9.0 * v_l2 * v_l2 + 2f64.powi(lambda as i32 + 2) / xi_min
}

pub fn convolution_bound_report(
    fields: &NonlocalFields,
    pair: &IntegrandPair,
    state: &CharState,
    grid: &CharGrid,
    params: &ModelParams,
) -> ConvolutionBoundReport {
    let v2: Vec<f64> = state.v.iter().map(|v| v * v).collect();
    let v_l2 = grid.integrate(&v2).max(0.0).sqrt();
    let xi_min = state.xi.iter().copied().fold(f64::INFINITY, f64::min);
    let g_l1 = kernel_envelope_l1(v_l2, xi_min, params.lambda());
    let sup = crate::model::state_sup;
    let bound_p = g_l1 * sup(&pair.a_p);
    let bound_q = g_l1 * sup(&pair.a_q);
    // Each field is half of the raw kernel integral.
    let margins = [
        bound_p - 2.0 * sup(&fields.p),
        bound_p - 2.0 * sup(&fields.px),
        bound_q - 2.0 * sup(&fields.q),
        bound_q - 2.0 * sup(&fields.qx),
    ];
    ConvolutionBoundReport {
        g_l1,
        v_l2,
        xi_min,
        margins,
        q_active: sup(&pair.a_q) > 0.0,
    }
}

pub fn convolution_bound_check(
    fields: &NonlocalFields,
    pair: &IntegrandPair,
    state: &CharState,
    grid: &CharGrid,
    params: &ModelParams,
) -> Result<ConvolutionBoundReport, NonlocalError> {
    let report = convolution_bound_report(fields, pair, state, grid, params);
    for ((name, values), margin) in fields.named().into_iter().zip(report.margins) {
        if margin < 0.0 {
            let sup = 2.0 * crate::model::state_sup(values);
            return Err(NonlocalError::BoundViolated {
                field: name,
                sup,
                bound: sup + margin,
            });
        }
    }
    Ok(report)
}
