//! Conserved and balanced functionals, identity residuals and bound monitors.

use crate::model::{state_sup, trig_powers, CharGrid, CharState, ModelParams, NonlocalFields};
use crate::nonlocal::{convolution_bound_report, IntegrandPair};
use serde::{Deserialize, Serialize};

/// Relative slack of every a-priori bound check: `tol = 1e−8 · (1 + bound)`.
pub const BOUND_TOLERANCE: f64 = 1e-8;

pub fn bound_tolerance(bound: f64) -> f64 {
    BOUND_TOLERANCE * (1.0 + bound.abs())
}

/// `E = ∫ (u² cos^k(v/2) + sin²(v/2) cos^{k−2}(v/2)) ξ dY`
pub fn energy(state: &CharState, grid: &CharGrid, params: &ModelParams) -> f64 {
    let lambda = params.lambda();
    let density: Vec<f64> = (0..state.len())
        .map(|i| {
            let t = trig_powers(state.v[i], lambda);
            let u = state.u[i];
            (u * u * t.cos_k + t.sin2_cos_km2) * state.xi[i]
        })
        .collect();
    grid.integrate(&density)
}

/// `H = ∫ ξ sin^k(v/2) dY`, the characteristic form of `∫ u_x^k dx` plus atoms.
pub fn higher_energy(state: &CharState, grid: &CharGrid, params: &ModelParams) -> f64 {
    let lambda = params.lambda();
    let density: Vec<f64> = (0..state.len())
        .map(|i| state.xi[i] * trig_powers(state.v[i], lambda).sin_k)
        .collect();
    grid.integrate(&density)
}

/// `dH/dT = k ∫ ξ (u^{λ+2} − P − Q_x) sin^{k−1}(v/2) cos(v/2) dY`
pub fn higher_energy_rate(state: &CharState, fields: &NonlocalFields, grid: &CharGrid, params: &ModelParams) -> f64 {
    let lambda = params.lambda();
    let density: Vec<f64> = (0..state.len())
        .map(|i| {
            let t = trig_powers(state.v[i], lambda);
            let u = state.u[i];
            let source = ModelParams::upow(u, lambda + 2) - fields.p[i] - fields.qx[i];
            state.xi[i] * source * t.sin_km1_cos
        })
        .collect();
    f64::from(params.k()) * grid.integrate(&density)
}

/// Max-norm residuals of `u_Y = ½ ξ sin v cos^{2λ}(v/2)` and `x_Y = ξ cos^k(v/2)`
/// with second-order differences taken one segment at a time.
pub fn identity_residuals(state: &CharState, grid: &CharGrid, params: &ModelParams) -> (f64, f64) {
    let n = state.len();
    let lambda = params.lambda();
    let mut uy = vec![0.0; n];
    let mut xy = vec![0.0; n];
    grid.derivative(&state.u, &mut uy);
    grid.derivative(&state.x, &mut xy);
    let (mut ru, mut rx) = (0.0f64, 0.0f64);
    for i in 0..n {
        let t = trig_powers(state.v[i], lambda);
        ru = ru.max((uy[i] - state.xi[i] * t.half_sin_v * t.cos_km2).abs());
        rx = rx.max((xy[i] - state.xi[i] * t.cos_k).abs());
    }
    (ru, rx)
}

pub fn min_cos2(state: &CharState) -> f64 {
    state
        .v
        .iter()
        .map(|&v| {
            let c = (0.5 * v).cos();
            c * c
        })
        .fold(1.0, f64::min)
}

/// Outcome of each a-priori check; `true` means the check holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundFlags {
    pub u_bound: bool,
    pub p_bound: bool,
    pub px_bound: bool,
    pub convolution_bound: bool,
    pub xi_positive: bool,
    pub x_monotone: bool,
    pub q_vanishes: bool,
}

impl BoundFlags {
    /// The proved bounds and ξ positivity; a failure here is a solver bug.
    pub fn hard(&self) -> bool {
        self.u_bound && self.p_bound && self.px_bound && self.convolution_bound && self.xi_positive && self.q_vanishes
    }

    /// `hard()` plus monotonicity of the evolved positions, which after
    /// breaking is only kept up to the time-stepping error of `x`.
    pub fn all(&self) -> bool {
        self.hard() && self.x_monotone
    }
}

/// Largest allowed drop `x[i] − x[i+1]`.
pub const MONOTONE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub time: f64,
    pub energy: f64,
    /// `(E − E0) / E0`, zero when `E0 = 0`.
    pub energy_drift: f64,
    pub higher: f64,
    pub higher_rate: f64,
    pub residual_uy: f64,
    pub residual_xy: f64,
    pub min_cos2: f64,
    /// Largest drop `x[i] − x[i+1]` between neighbouring characteristics.
    pub x_decrease: f64,
    pub xi_min: f64,
    pub xi_max: f64,
    pub sup_u: f64,
    pub sup_p: f64,
    pub sup_px: f64,
    /// `√E0`
    pub bound_u: f64,
    /// `(2λ+3)/4 · E0^{(λ+2)/2}`
    pub bound_p: f64,
    /// `bound − sup` for u, P, Px.
    pub margin_u: f64,
    pub margin_p: f64,
    pub margin_px: f64,
    /// Smallest margin of the kernel convolution bound over the four fields.
    pub margin_convolution: f64,
    pub flags: BoundFlags,
}

impl DiagnosticsReport {
    pub fn bounds_hold(&self) -> bool {
        self.flags.hard()
    }
}

/// `(2λ+3)/4 · E0^{(λ+2)/2}`
pub fn p_bound(e0: f64, params: &ModelParams) -> f64 {
    let lambda = f64::from(params.lambda());
    (2.0 * lambda + 3.0) / 4.0 * e0.max(0.0).powf((lambda + 2.0) / 2.0)
}

/// Full report for `state` given fields and integrands evaluated along it.
pub fn compute_diagnostics(
    state: &CharState,
    fields: &NonlocalFields,
    pair: &IntegrandPair,
    grid: &CharGrid,
    params: &ModelParams,
    e0: f64,
) -> DiagnosticsReport {
    let e = energy(state, grid, params);
    let (residual_uy, residual_xy) = identity_residuals(state, grid, params);
    let bound_u = e0.max(0.0).sqrt();
    let bound_p = p_bound(e0, params);
    let (sup_u, sup_p, sup_px) = (state.sup_u(), state_sup(&fields.p), state_sup(&fields.px));
    let conv = convolution_bound_report(fields, pair, state, grid, params);
    let margin_convolution = conv.min_margin();
    let xi_min = state.xi.iter().copied().fold(f64::INFINITY, f64::min);
    let xi_max = state.xi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let x_decrease = state.max_x_decrease();

    let (margin_u, margin_p, margin_px) = (bound_u - sup_u, bound_p - sup_p, bound_p - sup_px);
    let flags = BoundFlags {
        u_bound: margin_u >= -bound_tolerance(bound_u),
        p_bound: margin_p >= -bound_tolerance(bound_p),
        px_bound: margin_px >= -bound_tolerance(bound_p),
        convolution_bound: margin_convolution >= -bound_tolerance(conv.g_l1),
        xi_positive: xi_min > 0.0,
        x_monotone: x_decrease <= MONOTONE_SLACK,
        q_vanishes: params.lambda() > 0 || fields.q.iter().chain(&fields.qx).all(|&q| q == 0.0),
    };

    DiagnosticsReport {
        time: state.time,
        energy: e,
        energy_drift: if e0 > 0.0 { (e - e0) / e0 } else { e - e0 },
        higher: higher_energy(state, grid, params),
        higher_rate: higher_energy_rate(state, fields, grid, params),
        residual_uy,
        residual_xy,
        min_cos2: min_cos2(state),
        x_decrease,
        xi_min,
        xi_max,
        sup_u,
        sup_p,
        sup_px,
        bound_u,
        bound_p,
        margin_u,
        margin_p,
        margin_px,
        margin_convolution,
        flags,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Execution;
    use crate::nonlocal::{eval_nonlocal, NonlocalMethod};
    use crate::transform::{initialize_state, InitialData};
    use approx::assert_relative_eq;

    fn report(data: &InitialData, lambda: u32, n: usize) -> DiagnosticsReport {
        let p = ModelParams::new(lambda, 12.0, n).unwrap();
        let init = initialize_state(data, &p).unwrap();
        let (f, _, pair) = eval_nonlocal(NonlocalMethod::Fast, &init.state, &init.grid, &p, Execution::Sequential).unwrap();
        let e0 = energy(&init.state, &init.grid, &p);
        compute_diagnostics(&init.state, &f, &pair, &init.grid, &p, e0)
    }

    #[test]
    fn zero_state_report() {
        let r = report(&InitialData::Zero, 1, 64);
        assert_eq!((r.energy, r.higher, r.higher_rate), (0.0, 0.0, 0.0));
        assert_eq!(r.min_cos2, 1.0);
        assert!(r.bounds_hold());
    }

    #[test]
    fn initial_bounds_hold_with_margin() {
        for (lambda, data) in [
            (0, InitialData::gaussian(1.5, 0.5, 0.0)),
            (1, InitialData::gaussian(1.5, 0.5, 0.0)),
            (2, InitialData::peakons(&[(1.0, -2.0), (-1.0, 2.0)])),
        ] {
            let r = report(&data, lambda, 2048);
            assert!(r.bounds_hold(), "{r:?}");
            assert!(r.margin_u > 0.0 && r.margin_p > 0.0 && r.margin_px > 0.0);
            assert_eq!(r.energy_drift, 0.0);
        }
    }

    #[test]
    fn higher_energy_is_slope_integral_at_start() {
        // ∫ u₀'^2 dx for λ = 0 is the slope part of the energy.
        let data = InitialData::gaussian(1.0, 1.0, 0.0);
        let r = report(&data, 0, 2048);
        // ∫ u² dx = √(π/2), so ∫ u'² dx = E0 − √(π/2).
        let e0 = data.physical_energy(12.0, 400);
        assert_relative_eq!(r.higher, e0 - (std::f64::consts::PI / 2.0).sqrt(), max_relative = 1e-9);
    }

    #[test]
    fn identity_residuals_shrink_at_second_order() {
        let data = InitialData::gaussian(1.2, 0.8, 0.0);
        let a = report(&data, 1, 1024);
        let b = report(&data, 1, 2048);
        assert!((a.residual_uy / b.residual_uy).log2() > 1.9);
        assert!((a.residual_xy / b.residual_xy).log2() > 1.9);
    }

    #[test]
    fn tolerance_scales_with_bound() {
        assert_eq!(bound_tolerance(0.0), 1e-8);
        assert_relative_eq!(bound_tolerance(99.0), 1e-6);
    }
}
