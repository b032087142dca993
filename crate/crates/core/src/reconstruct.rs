//! Back to physical space: sampling `u(t, x)` and `u_x(t, x)` from a
//! characteristic snapshot, the energy measure `μ_t` split into atoms and an
//! absolutely continuous part, Hölder fits at cusps, the `L^k` time-Lipschitz
//! ratio and weak-form residuals.

use crate::evolve::Snapshot;
use crate::model::{trig_powers, CharGrid, CharState, ModelParams};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Threshold on `cos²(v/2)` below which a node counts as singular.
pub const DEFAULT_EPS_SING: f64 = 1e-6;

/// Minimum number of samples on each side of a cusp for a Hölder fit.
pub const MIN_FIT_SAMPLES: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReconstructError {
    #[error("sample x = {x} lies outside the reconstructed domain [{lo}, {hi}]")]
    SampleOutsideDomain { x: f64, lo: f64, hi: f64 },
    #[error("only {found} usable samples {side} of the cusp, need {needed}; widen the window or refine the grid")]
    InsufficientSamples {
        side: &'static str,
        found: usize,
        needed: usize,
    },
    #[error("no cusp at x = {x_star}: the profile is flat or the point is outside the samples")]
    NoCuspDetected { x_star: f64 },
    #[error("test function support {what} [{lo}, {hi}] exceeds the computed window [{win_lo}, {win_hi}]")]
    SupportExceedsWindow {
        what: &'static str,
        lo: f64,
        hi: f64,
        win_lo: f64,
        win_hi: f64,
    },
    #[error("need at least {needed} snapshots, got {got}")]
    TooFewSnapshots { needed: usize, got: usize },
}

/// `u` and `u_x` sampled at requested abscissae; `ux` is `None` where singular.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalSolution {
    pub time: f64,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub ux: Vec<Option<f64>>,
    pub singular: Vec<bool>,
}

impl PhysicalSolution {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Linear interpolation of the sampled `u`, clamped at the ends.
    pub fn u_at(&self, x: f64) -> f64 {
        let j = self.x.partition_point(|&s| s < x);
        if j == 0 {
            return self.u[0];
        }
        if j == self.len() {
            return self.u[self.len() - 1];
        }
        let (x0, x1) = (self.x[j - 1], self.x[j]);
        if x1 <= x0 {
            return self.u[j];
        }
        let t = (x - x0) / (x1 - x0);
        self.u[j - 1] + t * (self.u[j] - self.u[j - 1])
    }
}

fn cos2_half(v: f64) -> f64 {
    let c = (0.5 * v).cos();
    c * c
}

/// `n` equally spaced points covering `[lo, hi]`.
pub fn uniform_samples(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => {
            let h = (hi - lo) / (n - 1) as f64;
            let mut xs: Vec<f64> = (0..n).map(|i| lo + h * i as f64).collect();
            xs[n - 1] = hi;
            xs
        }
    }
}

/// Evaluate `u(T, x)` and `u_x(T, x)` at `x_samples`.
///
/// Samples falling between two characteristics are interpolated linearly in
/// `Y`; samples that coincide with several characteristics (duplicated corner
/// nodes, collapsed cusp intervals) take the mean over them, and are singular
/// if any of them is.
pub fn to_physical(state: &CharState, x_samples: &[f64], eps_sing: f64) -> Result<PhysicalSolution, ReconstructError> {
    let n = state.len();
    let (lo, hi) = (state.x[0], state.x[n - 1]);
    let mut out = PhysicalSolution {
        time: state.time,
        x: x_samples.to_vec(),
        u: Vec::with_capacity(x_samples.len()),
        ux: Vec::with_capacity(x_samples.len()),
        singular: Vec::with_capacity(x_samples.len()),
    };
    for &xs in x_samples {
        if !(xs >= lo && xs <= hi) {
            return Err(ReconstructError::SampleOutsideDomain { x: xs, lo, hi });
        }
        let a = state.x.partition_point(|&x| x < xs);
        let b = state.x.partition_point(|&x| x <= xs);
        let (u, ux) = if b > a {
            let run = a..b;
            let m = run.len() as f64;
            let u = state.u[run.clone()].iter().sum::<f64>() / m;
            let singular = state.v[run.clone()].iter().any(|&v| cos2_half(v) < eps_sing);
            let ux = (!singular).then(|| state.v[run].iter().map(|&v| (0.5 * v).tan()).sum::<f64>() / m);
            (u, ux)
        } else {
            let (i, j) = (a - 1, a);
            let t = (xs - state.x[i]) / (state.x[j] - state.x[i]);
            let u = state.u[i] + t * (state.u[j] - state.u[i]);
            let v = state.v[i] + t * (state.v[j] - state.v[i]);
            let ux = (cos2_half(v) >= eps_sing).then(|| (0.5 * v).tan());
            (u, ux)
        };
        out.u.push(u);
        out.singular.push(ux.is_none());
        out.ux.push(ux);
    }
    Ok(out)
}

/// Physical samples at every characteristic, in label order.
pub fn node_solution(state: &CharState, eps_sing: f64) -> PhysicalSolution {
    let ux: Vec<Option<f64>> = state
        .v
        .iter()
        .map(|&v| (cos2_half(v) >= eps_sing).then(|| (0.5 * v).tan()))
        .collect();
    PhysicalSolution {
        time: state.time,
        x: state.x.clone(),
        u: state.u.clone(),
        singular: ux.iter().map(Option::is_none).collect(),
        ux,
    }
}

/// A point mass of `μ_t`: a maximal run of singular labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub x: f64,
    /// Mean of `u` over the run.
    pub u: f64,
    pub mass: f64,
    pub first_node: usize,
    pub last_node: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureDecomposition {
    pub time: f64,
    /// `u_x^k` on the requested samples, zero where singular.
    pub x: Vec<f64>,
    pub ac_density: Vec<f64>,
    pub atoms: Vec<Atom>,
    /// `∫ ξ sin^k(v/2) dY` over all labels.
    pub total: f64,
    /// `total` minus the atom masses.
    pub ac_mass: f64,
}

impl MeasureDecomposition {
    pub fn atom_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).fold(0.0, |s, m| s + m)
    }

    /// Heaviest atom.
    pub fn largest_atom(&self) -> Option<&Atom> {
        self.atoms.iter().max_by(|a, b| a.mass.total_cmp(&b.mass))
    }
}

/// Split `μ_t = ξ sin^k(v/2) dY` pushed forward to `x` into atoms and the
/// density `u_x^k`. Each node carries the quadrature weight of the grid, so
/// atoms and the remainder add up to the full integral exactly.
pub fn measure_decompose(
    state: &CharState,
    grid: &CharGrid,
    params: &ModelParams,
    x_samples: &[f64],
    eps_sing: f64,
) -> Result<MeasureDecomposition, ReconstructError> {
    let lambda = params.lambda();
    let density: Vec<f64> = (0..state.len())
        .map(|i| state.xi[i] * trig_powers(state.v[i], lambda).sin_k)
        .collect();
    let total = grid.integrate(&density);
    let w = grid.weights();

    let mut atoms = Vec::new();
    let mut i = 0;
    while i < state.len() {
        if cos2_half(state.v[i]) >= eps_sing {
            i += 1;
            continue;
        }
        let start = i;
        while i + 1 < state.len() && cos2_half(state.v[i + 1]) < eps_sing {
            i += 1;
        }
        let run = start..=i;
        let m = (i - start + 1) as f64;
        atoms.push(Atom {
            x: state.x[run.clone()].iter().sum::<f64>() / m,
            u: state.u[run.clone()].iter().sum::<f64>() / m,
            mass: run.clone().map(|j| w[j] * density[j]).sum(),
            first_node: start,
            last_node: i,
        });
        i += 1;
    }

    let k = params.k() as i32;
    let phys = to_physical(state, x_samples, eps_sing)?;
    let ac_density = phys.ux.iter().map(|d| d.map_or(0.0, |s| s.powi(k))).collect();
    let atom_mass = atoms.iter().map(|a| a.mass).fold(0.0, |s, m| s + m);
    Ok(MeasureDecomposition {
        time: state.time,
        x: phys.x,
        ac_density,
        atoms,
        total,
        ac_mass: total - atom_mass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideFit {
    pub exponent: f64,
    /// RMS residual of the log-log fit.
    pub residual: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderFit {
    pub x_star: f64,
    pub u_star: f64,
    /// Mean of the two one-sided exponents.
    pub exponent: f64,
    pub residual: f64,
    pub window: f64,
    pub exclude: f64,
    pub left: SideFit,
    pub right: SideFit,
}

fn fit_side(points: &[(f64, f64)], side: &'static str) -> Result<SideFit, ReconstructError> {
    if points.len() < MIN_FIT_SAMPLES {
        return Err(ReconstructError::InsufficientSamples {
            side,
            found: points.len(),
            needed: MIN_FIT_SAMPLES,
        });
    }
    let m = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &(x, y) in points {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = sxy / sxx;
    let ss: f64 = points
        .iter()
        .map(|&(x, y)| {
            let r = y - (my + slope * (x - mx));
            r * r
        })
        .sum();
    Ok(SideFit {
        exponent: slope,
        residual: (ss / m).sqrt(),
        samples: points.len(),
    })
}

/// Least-squares slope of `log|u(x) − u(x*)|` against `log|x − x*|` on each
/// side of `x_star`, using samples with `exclude < |x − x*| ≤ window`.
/// `u(x*)` is interpolated from the samples.
pub fn holder_exponent_estimate(
    phys: &PhysicalSolution,
    x_star: f64,
    window: f64,
    exclude: f64,
) -> Result<HolderFit, ReconstructError> {
    let n = phys.len();
    if n == 0 || !(x_star >= phys.x[0] && x_star <= phys.x[n - 1]) {
        return Err(ReconstructError::NoCuspDetected { x_star });
    }
    holder_fit_about(phys, x_star, phys.u_at(x_star), window, exclude)
}

fn holder_fit_about(
    phys: &PhysicalSolution,
    x_star: f64,
    u_star: f64,
    window: f64,
    exclude: f64,
) -> Result<HolderFit, ReconstructError> {
    let (mut left, mut right) = (Vec::new(), Vec::new());
    for (&x, &u) in phys.x.iter().zip(&phys.u) {
        let d = x - x_star;
        let du = (u - u_star).abs();
        if d.abs() <= exclude || d.abs() > window || du == 0.0 {
            continue;
        }
        let p = (d.abs().ln(), du.ln());
        if d < 0.0 {
            left.push(p);
        } else {
            right.push(p);
        }
    }
    if left.is_empty() && right.is_empty() {
        return Err(ReconstructError::NoCuspDetected { x_star });
    }
    let left = fit_side(&left, "left")?;
    let right = fit_side(&right, "right")?;
    Ok(HolderFit {
        x_star,
        u_star,
        exponent: 0.5 * (left.exponent + right.exponent),
        residual: left.residual.max(right.residual),
        window,
        exclude,
        left,
        right,
    })
}

/// Innermost fit window around a cusp, widened tenfold until both sides hold
/// `MIN_FIT_SAMPLES` samples.
pub const CUSP_WINDOWS: [f64; 4] = [1e-4, 1e-3, 1e-2, 1e-1];

/// Relative floor of the excluded core; below it positions carry
/// accumulated time-stepping round-off.
pub const CUSP_CORE_FLOOR: f64 = 1e-11;

/// Hölder fit at the characteristic `node`, sampling `u` at the
/// characteristics themselves. The excluded core is twice the local spacing
/// of characteristics around the cusp (floored at round-off scale).
pub fn cusp_holder_fit(state: &CharState, node: usize) -> Result<HolderFit, ReconstructError> {
    let n = state.len();
    let x_star = state.x[node];
    let left = if node > 0 { (x_star - state.x[node - 1]).abs() } else { 0.0 };
    let right = if node + 1 < n { (state.x[node + 1] - x_star).abs() } else { 0.0 };
    let exclude = (2.0 * left.max(right)).max(CUSP_CORE_FLOOR * (1.0 + x_star.abs()));
    let mut phys = node_solution(state, 0.0);
    // Evolved positions can be out of order by round-off inside the cusp.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| phys.x[a].total_cmp(&phys.x[b]));
    phys.x = order.iter().map(|&i| state.x[i]).collect();
    phys.u = order.iter().map(|&i| state.u[i]).collect();
    let u_star = state.u[node];
    let mut last = Err(ReconstructError::NoCuspDetected { x_star });
    for window in CUSP_WINDOWS {
        last = holder_fit_about(&phys, x_star, u_star, window, exclude);
        if !matches!(last, Err(ReconstructError::InsufficientSamples { .. })) {
            break;
        }
    }
    last
}

/// Ratios `‖u(t_{j+1}) − u(t_j)‖_{L^k} / (t_{j+1} − t_j)` over consecutive
/// snapshots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    /// Ten times the first ratio.
    pub bound: f64,
    pub holds: bool,
}

/// `L^k` norms are taken by the trapezoid rule on `samples` equally spaced
/// points of the interval covered by both snapshots.
pub fn lipschitz_in_lk_check(
    snapshots: &[Snapshot],
    params: &ModelParams,
    samples: usize,
) -> Result<LipschitzReport, ReconstructError> {
    if snapshots.len() < 3 {
        return Err(ReconstructError::TooFewSnapshots {
            needed: 3,
            got: snapshots.len(),
        });
    }
    let k = params.k() as i32;
    let mut ratios = Vec::with_capacity(snapshots.len() - 1);
    for pair in snapshots.windows(2) {
        let (a, b) = (&pair[0].state, &pair[1].state);
        let h = b.time - a.time;
        if h <= 0.0 {
            continue;
        }
        let n = a.len();
        let lo = a.x[0].max(b.x[0]);
        let hi = a.x[n - 1].min(b.x[n - 1]);
        let xs = uniform_samples(lo, hi, samples.max(2));
        let ua = to_physical(a, &xs, 0.0)?;
        let ub = to_physical(b, &xs, 0.0)?;
        let f: Vec<f64> = ua.u.iter().zip(&ub.u).map(|(p, q)| (q - p).abs().powi(k)).collect();
        let dx = xs[1] - xs[0];
        let integral = dx * (f.iter().sum::<f64>() - 0.5 * (f[0] + f[f.len() - 1]));
        ratios.push(integral.powf(1.0 / f64::from(k as u32)) / h);
    }
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    let bound = 10.0 * ratios.first().copied().unwrap_or(0.0);
    Ok(LipschitzReport {
        holds: max_ratio <= bound || max_ratio == 0.0,
        ratios,
        max_ratio,
        bound,
    })
}

/// Space-time test function `φ(t, x) = b((t − t_c)/t_w) · b((x − x_c)/x_w)`
/// with `b(s) = (1 − s²)³` on `|s| < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub t_center: f64,
    pub t_half_width: f64,
    pub x_center: f64,
    pub x_half_width: f64,
}

fn bump1(s: f64) -> (f64, f64) {
    if s.abs() >= 1.0 {
        return (0.0, 0.0);
    }
    let q = 1.0 - s * s;
    (q * q * q, -6.0 * s * q * q)
}

impl Bump {
    /// `(φ, φ_t, φ_x)`
    pub fn eval(&self, t: f64, x: f64) -> (f64, f64, f64) {
        let (bt, dbt) = bump1((t - self.t_center) / self.t_half_width);
        let (bx, dbx) = bump1((x - self.x_center) / self.x_half_width);
        (bt * bx, dbt * bx / self.t_half_width, bt * dbx / self.x_half_width)
    }

    pub fn t_range(&self) -> (f64, f64) {
        (self.t_center - self.t_half_width, self.t_center + self.t_half_width)
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.x_center - self.x_half_width, self.x_center + self.x_half_width)
    }
}

/// Residuals of the two weak formulations for one test function, each with
/// the integral of the absolute values of its terms as a scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakResidual {
    /// Weak form of the equation for `u_x`.
    pub equation: f64,
    pub equation_scale: f64,
    /// Measure-valued balance law for `u_x^k`.
    pub balance: f64,
    pub balance_scale: f64,
}

impl WeakResidual {
    pub fn equation_normalized(&self) -> f64 {
        normalized(self.equation, self.equation_scale)
    }

    pub fn balance_normalized(&self) -> f64 {
        normalized(self.balance, self.balance_scale)
    }
}

fn normalized(r: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        r.abs() / scale
    } else {
        r.abs()
    }
}

/// Evaluate both weak formulations against `bump` by pulling the space-time
/// integrals back to `(T, Y)`: `dx = ξ cos^k(v/2) dY`, `u_x dx = u_Y dY`,
/// `u_x² dx = ξ sin²(v/2) cos^{k−2}(v/2) dY`, `dμ = ξ sin^k(v/2) dY` and
/// `φ_T = φ_t + u^{λ+1} φ_x`. The nonlocal terms are the fields stored with
/// each snapshot. Time integration is the trapezoid rule over the snapshots,
/// so the snapshots should be equally spaced through the support of `bump`.
///
/// When the first snapshot is at `t = 0` the initial terms
/// `−∫ u₀' φ(0) dx` and `+∫ φ(0) dμ₀` are added.
pub fn weak_form_residual(
    snapshots: &[Snapshot],
    grid: &CharGrid,
    params: &ModelParams,
    bump: &Bump,
) -> Result<WeakResidual, ReconstructError> {
    if snapshots.len() < 2 {
        return Err(ReconstructError::TooFewSnapshots {
            needed: 2,
            got: snapshots.len(),
        });
    }
    let (t_first, t_last) = (snapshots[0].state.time, snapshots[snapshots.len() - 1].state.time);
    let (tlo, thi) = bump.t_range();
    let starts_at_zero = t_first == 0.0;
    let slack = 1e-12 * t_last.abs().max(1.0);
    if (tlo < t_first - slack && !starts_at_zero) || thi > t_last + slack {
        return Err(ReconstructError::SupportExceedsWindow {
            what: "in t",
            lo: tlo,
            hi: thi,
            win_lo: t_first,
            win_hi: t_last,
        });
    }
    let (xlo, xhi) = bump.x_range();
    for s in snapshots {
        let n = s.state.len();
        let (a, b) = (s.state.x[0], s.state.x[n - 1]);
        if xlo < a || xhi > b {
            return Err(ReconstructError::SupportExceedsWindow {
                what: "in x",
                lo: xlo,
                hi: xhi,
                win_lo: a,
                win_hi: b,
            });
        }
    }

    let lambda = params.lambda();
    let k = f64::from(params.k());
    let n = grid.len();
    let mut eq = vec![0.0; n];
    let mut eq_abs = vec![0.0; n];
    let mut en = vec![0.0; n];
    let mut en_abs = vec![0.0; n];
    // Per snapshot: (time, equation, |equation|, balance, |balance|)
    let mut rows = Vec::with_capacity(snapshots.len());
    for snap in snapshots {
        let (s, f) = (&snap.state, &snap.fields);
        for i in 0..n {
            let (phi, phi_t, phi_x) = bump.eval(s.time, s.x[i]);
            if phi == 0.0 && phi_t == 0.0 && phi_x == 0.0 {
                eq[i] = 0.0;
                eq_abs[i] = 0.0;
                en[i] = 0.0;
                en_abs[i] = 0.0;
                continue;
            }
            let t = trig_powers(s.v[i], lambda);
            let u = s.u[i];
            let xi = s.xi[i];
            let phi_tt = phi_t + ModelParams::upow(u, lambda + 1) * phi_x;
            let u_y = xi * t.half_sin_v * t.cos_km2;
            let pq = f.p[i] + f.qx[i];

            let a1 = -u_y * phi_tt;
            let a2 = -(2.0 * f64::from(lambda) + 1.0) / 2.0 * ModelParams::upow(u, lambda) * t.sin2_cos_km2 * xi * phi;
            let a3 = (pq - ModelParams::upow(u, lambda + 2)) * t.cos_k * xi * phi;
            eq[i] = a1 + a2 + a3;
            eq_abs[i] = a1.abs() + a2.abs() + a3.abs();

            let b1 = phi_tt * xi * t.sin_k;
            let b2 = k * (ModelParams::upow(u, lambda + 2) - pq) * xi * t.sin_km1_cos * phi;
            en[i] = b1 + b2;
            en_abs[i] = b1.abs() + b2.abs();
        }
        rows.push((
            s.time,
            grid.integrate(&eq),
            grid.integrate(&eq_abs),
            grid.integrate(&en),
            grid.integrate(&en_abs),
        ));
    }

    let mut r = WeakResidual {
        equation: 0.0,
        equation_scale: 0.0,
        balance: 0.0,
        balance_scale: 0.0,
    };
    for w in rows.windows(2) {
        let h = 0.5 * (w[1].0 - w[0].0);
        r.equation += h * (w[0].1 + w[1].1);
        r.equation_scale += h * (w[0].2 + w[1].2);
        r.balance += h * (w[0].3 + w[1].3);
        r.balance_scale += h * (w[0].4 + w[1].4);
    }

    if starts_at_zero {
        let s = &snapshots[0].state;
        let (mut c, mut m) = (vec![0.0; n], vec![0.0; n]);
        for i in 0..n {
            let phi = bump.eval(0.0, s.x[i]).0;
            let t = trig_powers(s.v[i], lambda);
            c[i] = s.xi[i] * t.half_sin_v * t.cos_km2 * phi;
            m[i] = s.xi[i] * t.sin_k * phi;
        }
        let (ci, mi) = (grid.integrate(&c), grid.integrate(&m));
        r.equation -= ci;
        r.equation_scale += ci.abs();
        r.balance += mi;
        r.balance_scale += mi.abs();
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transform::{initialize_state, InitialData};
    use approx::assert_relative_eq;

    fn state_from(x: Vec<f64>, u: Vec<f64>, v: Vec<f64>) -> CharState {
        let n = x.len();
        CharState {
            time: 0.0,
            u,
            v,
            xi: vec![1.0; n],
            x,
        }
    }

    #[test]
    fn round_trip_at_initial_time() {
        let data = InitialData::gaussian(1.0, 1.0, 0.0);
        let p = ModelParams::new(1, 10.0, 2048).unwrap();
        let init = initialize_state(&data, &p).unwrap();
        let xs = uniform_samples(-9.0, 9.0, 721);
        let phys = to_physical(&init.state, &xs, DEFAULT_EPS_SING).unwrap();
        let (mut eu, mut eux) = (0.0f64, 0.0f64);
        for (i, &x) in xs.iter().enumerate() {
            eu = eu.max((phys.u[i] - data.value(x)).abs());
            let exact = -2.0 * x * (-x * x).exp();
            eux = eux.max((phys.ux[i].unwrap() - exact).abs());
        }
        assert!(eu < 1e-4, "{eu}");
        assert!(eux < 1e-3, "{eux}");
        assert!(phys.singular.iter().all(|&s| !s));
    }

    #[test]
    fn collapsed_interval_takes_its_common_value() {
        let pi = std::f64::consts::PI;
        let x = vec![0.0, 1.0, 2.0, 2.0, 2.0, 3.0];
        let u = vec![0.0, 0.5, 0.7, 0.7, 0.7, 0.0];
        let v = vec![0.0, 0.3, pi, pi, pi, -0.3];
        let s = state_from(x, u, v);
        let phys = to_physical(&s, &[2.0, 1.5], DEFAULT_EPS_SING).unwrap();
        assert_relative_eq!(phys.u[0], 0.7, epsilon = 1e-15);
        assert!(phys.singular[0] && phys.ux[0].is_none());
        assert_relative_eq!(phys.u[1], 0.6, epsilon = 1e-15);
    }

    #[test]
    fn samples_outside_domain_are_rejected() {
        let s = state_from(vec![0.0, 1.0], vec![0.0; 2], vec![0.0; 2]);
        assert!(matches!(
            to_physical(&s, &[1.5], DEFAULT_EPS_SING),
            Err(ReconstructError::SampleOutsideDomain { .. })
        ));
    }

    #[test]
    fn smooth_state_has_no_atoms_and_matches_slope_integral() {
        let data = InitialData::gaussian(1.0, 1.0, 0.0);
        let p = ModelParams::new(1, 10.0, 4096).unwrap();
        let init = initialize_state(&data, &p).unwrap();
        let xs = uniform_samples(-9.5, 9.5, 4001);
        let m = measure_decompose(&init.state, &init.grid, &p, &xs, DEFAULT_EPS_SING).unwrap();
        assert!(m.atoms.is_empty());
        assert_eq!(m.ac_mass, m.total);
        let dx = xs[1] - xs[0];
        let ac: f64 = dx * m.ac_density.iter().sum::<f64>();
        // ∫ (2x e^{−x²})⁴ dx = 3√π / 8
        let exact = 3.0 * std::f64::consts::PI.sqrt() / 8.0;
        assert_relative_eq!(m.total, exact, max_relative = 1e-8);
        assert_relative_eq!(ac, exact, max_relative = 2e-5);
    }

    #[test]
    fn degenerate_run_becomes_one_atom() {
        let pi = std::f64::consts::PI;
        let n = 101;
        let grid = CharGrid::uniform(-1.0, 1.0, n).unwrap();
        let y = grid.nodes().to_vec();
        let v: Vec<f64> = y.iter().map(|&y| if y.abs() < 0.2 { pi } else { 0.0 }).collect();
        let x: Vec<f64> = y.iter().map(|&y| if y.abs() < 0.2 { 0.0 } else { y - 0.2 * y.signum() }).collect();
        let s = state_from(x, vec![0.0; n], v);
        let p = ModelParams::new(0, 5.0, n).unwrap();
        let m = measure_decompose(&s, &grid, &p, &[0.5], DEFAULT_EPS_SING).unwrap();
        assert_eq!(m.atoms.len(), 1);
        assert_relative_eq!(m.atom_mass(), m.total, max_relative = 1e-14);
        assert_eq!(m.atoms[0].x, 0.0);
    }

    #[test]
    fn holder_fit_recovers_synthetic_exponents() {
        for beta in [0.5, 0.75, 5.0 / 6.0] {
            let xs = uniform_samples(-1.0, 1.0, 2001);
            let u: Vec<f64> = xs.iter().map(|&x: &f64| 1.0 - x.abs().powf(beta)).collect();
            let phys = PhysicalSolution {
                time: 0.0,
                ux: vec![None; xs.len()],
                singular: vec![false; xs.len()],
                x: xs,
                u,
            };
            let fit = holder_exponent_estimate(&phys, 0.0, 0.5, 0.002).unwrap();
            assert!((fit.exponent - beta).abs() < 0.01, "{beta}: {fit:?}");
            assert!(fit.left.samples >= MIN_FIT_SAMPLES);
        }
    }

    #[test]
    fn holder_fit_needs_samples_and_a_cusp() {
        let xs = uniform_samples(-1.0, 1.0, 21);
        let phys = PhysicalSolution {
            time: 0.0,
            u: xs.iter().map(|x: &f64| x.abs()).collect(),
            ux: vec![None; 21],
            singular: vec![false; 21],
            x: xs.clone(),
        };
        assert!(matches!(
            holder_exponent_estimate(&phys, 0.0, 1.0, 0.0),
            Err(ReconstructError::InsufficientSamples { .. })
        ));
        let flat = PhysicalSolution {
            u: vec![0.0; 21],
            ..phys
        };
        assert!(matches!(
            holder_exponent_estimate(&flat, 0.0, 1.0, 0.0),
            Err(ReconstructError::NoCuspDetected { .. })
        ));
        assert!(matches!(
            holder_exponent_estimate(&flat, 3.0, 1.0, 0.0),
            Err(ReconstructError::NoCuspDetected { .. })
        ));
    }

    #[test]
    fn bump_derivatives_match_differences() {
        let b = Bump {
            t_center: 1.0,
            t_half_width: 0.5,
            x_center: -0.3,
            x_half_width: 2.0,
        };
        let (t, x, h) = (1.2, 0.4, 1e-6);
        let (_, pt, px) = b.eval(t, x);
        assert_relative_eq!(pt, (b.eval(t + h, x).0 - b.eval(t - h, x).0) / (2.0 * h), max_relative = 1e-8);
        assert_relative_eq!(px, (b.eval(t, x + h).0 - b.eval(t, x - h).0) / (2.0 * h), max_relative = 1e-8);
        assert_eq!(b.eval(1.6, 0.0), (0.0, 0.0, 0.0));
    }
}
