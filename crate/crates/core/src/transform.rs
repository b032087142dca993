//! Initial data and the change of variables to characteristic labels.
//!
//! The label of a point is `Y(x) = ∫₀^x (1 + u₀'(s)²)^{k/2} ds`; the initial
//! state on a uniform `Y` grid is
//! `u = u₀(x₀(Y))`, `v = 2 atan u₀'(x₀(Y))`, `ξ = 1`, `x = x₀(Y)`.

use crate::model::{CharGrid, CharState, GridError, ModelParams};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

/// Slopes larger than this are treated as a jump in `u₀`.
pub const MAX_INITIAL_SLOPE: f64 = 1e12;
/// Tabulated data must decay below this at both ends.
pub const DECAY_TOLERANCE: f64 = 1e-12;
/// Smallest fine quadrature grid for the label map, per Y node.
pub const FINE_POINTS_PER_NODE: usize = 8;

#[derive(Debug, Error)]
pub enum TransformError {
    #[error("gaussian width must be positive and finite, got {0}")]
    InvalidWidth(f64),
    #[error("peakon {0} has zero amplitude")]
    ZeroPeakonAmplitude(usize),
    #[error("initial data parameter `{0}` is not finite")]
    NonFiniteParameter(&'static str),
    #[error("tabulated data need at least 5 rows, got {0}")]
    TableTooShort(usize),
    #[error("tabulated x must be strictly increasing (row {0})")]
    TableNotIncreasing(usize),
    #[error("tabulated columns have different lengths ({0} vs {1})")]
    TableLengthMismatch(usize, usize),
    #[error("tabulated u must decay below {DECAY_TOLERANCE:e} at both ends; u({x}) = {u:e}")]
    TableNotDecaying { x: f64, u: f64 },
    #[error("cannot parse tabulated data at line {line}: {message}")]
    TableParse { line: usize, message: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("initial slope is not finite at x = {0}")]
    NonFiniteDerivative(f64),
    #[error("initial slope {slope:e} at x = {x} is unbounded; u0 must be absolutely continuous")]
    UnboundedInitialSlope { x: f64, slope: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Side from which a one-sided slope is taken at a corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub amplitude: f64,
    pub center: f64,
}

/// `u₀ = Σ aᵢ e^{−|x−cᵢ|}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialData {
    /// `a · exp(−((x − c)/w)²)`
    Gaussian {
        amplitude: f64,
        width: f64,
        center: f64,
    },
    PeakonSum { peaks: Vec<Peak> },
    Tabulated(TabulatedProfile),
    Zero,
}

/// Samples `(x, u)` with 4th-order finite-difference slopes; evaluated between
/// rows by cubic Hermite interpolation and extended by zero outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTable", into = "RawTable")]
pub struct TabulatedProfile {
    x: Vec<f64>,
    u: Vec<f64>,
    du: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawTable {
    x: Vec<f64>,
    u: Vec<f64>,
}

impl TryFrom<RawTable> for TabulatedProfile {
    type Error = TransformError;
    fn try_from(raw: RawTable) -> Result<Self, Self::Error> {
        TabulatedProfile::new(raw.x, raw.u)
    }
}

impl From<TabulatedProfile> for RawTable {
    fn from(t: TabulatedProfile) -> Self {
        RawTable { x: t.x, u: t.u }
    }
}

impl TabulatedProfile {
    pub fn new(x: Vec<f64>, u: Vec<f64>) -> Result<Self, TransformError> {
        if x.len() != u.len() {
            return Err(TransformError::TableLengthMismatch(x.len(), u.len()));
        }
        if x.len() < 5 {
            return Err(TransformError::TableTooShort(x.len()));
        }
        if x.iter().chain(&u).any(|z| !z.is_finite()) {
            return Err(TransformError::NonFiniteParameter("tabulated value"));
        }
        if let Some(i) = x.windows(2).position(|w| w[1] <= w[0]) {
            return Err(TransformError::TableNotIncreasing(i + 1));
        }
        for i in [0, x.len() - 1] {
            if u[i].abs() > DECAY_TOLERANCE {
                return Err(TransformError::TableNotDecaying { x: x[i], u: u[i] });
            }
        }
        let n = x.len();
        let mut du = vec![0.0; n];
        for i in 0..n {
            // Five-point stencil, centred where possible, one-sided at the ends.
            let lo = i.saturating_sub(2).min(n - 5);
            let w = first_derivative_weights(x[i], &x[lo..lo + 5]);
            du[i] = w.iter().zip(&u[lo..lo + 5]).map(|(w, u)| w * u).sum();
        }
        Ok(Self { x, u, du })
    }

    /// Two-column CSV `x,u`; a non-numeric first row is taken as a header.
    pub fn from_csv(path: &Path) -> Result<Self, TransformError> {
        let io_err = |source| TransformError::Io {
            path: path.display().to_string(),
            source,
        };
        let file = std::fs::File::open(path).map_err(io_err)?;
        Self::from_reader(file)
    }

    pub fn from_reader<R: std::io::Read>(reader: R) -> Result<Self, TransformError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let (mut xs, mut us) = (Vec::new(), Vec::new());
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| TransformError::TableParse {
                line: line + 1,
                message: e.to_string(),
            })?;
            if rec.len() != 2 {
                return Err(TransformError::TableParse {
                    line: line + 1,
                    message: format!("expected 2 columns, found {}", rec.len()),
                });
            }
            match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
                (Ok(x), Ok(u)) => {
                    xs.push(x);
                    us.push(u);
                }
                _ if line == 0 => {}
                _ => {
                    return Err(TransformError::TableParse {
                        line: line + 1,
                        message: format!("non-numeric row `{},{}`", &rec[0], &rec[1]),
                    })
                }
            }
        }
        Self::new(xs, us)
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    fn locate(&self, x: f64) -> Option<usize> {
        if x < self.x[0] || x > *self.x.last().unwrap() {
            return None;
        }
        let j = self.x.partition_point(|&t| t <= x);
        Some(j.clamp(1, self.x.len() - 1) - 1)
    }

    fn eval(&self, x: f64) -> (f64, f64) {
        let Some(j) = self.locate(x) else {
            return (0.0, 0.0);
        };
        let h = self.x[j + 1] - self.x[j];
        let t = (x - self.x[j]) / h;
        let (u0, u1, m0, m1) = (self.u[j], self.u[j + 1], self.du[j] * h, self.du[j + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let value = (2.0 * t3 - 3.0 * t2 + 1.0) * u0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * u1
            + (t3 - t2) * m1;
        let slope = ((6.0 * t2 - 6.0 * t) * (u0 - u1) + (3.0 * t2 - 4.0 * t + 1.0) * m0 + (3.0 * t2 - 2.0 * t) * m1) / h;
        (value, slope)
    }
}

/// Weights of the first derivative at `x0` for the nodes `z` (Fornberg).
fn first_derivative_weights(x0: f64, z: &[f64]) -> Vec<f64> {
    let n = z.len();
    let mut c = vec![[0.0f64; 2]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = z[0] - x0;
    for i in 1..n {
        let mn = i.min(1);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = z[i] - x0;
        for j in 0..i {
            let c3 = z[i] - z[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|w| w[1]).collect()
}

impl InitialData {
    pub fn gaussian(amplitude: f64, width: f64, center: f64) -> Self {
        Self::Gaussian {
            amplitude,
            width,
            center,
        }
    }

    pub fn peakons(peaks: &[(f64, f64)]) -> Self {
        Self::PeakonSum {
            peaks: peaks
                .iter()
                .map(|&(amplitude, center)| Peak { amplitude, center })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<(), TransformError> {
        match self {
            Self::Gaussian {
                amplitude,
                width,
                center,
            } => {
                if !amplitude.is_finite() {
                    return Err(TransformError::NonFiniteParameter("amplitude"));
                }
                if !center.is_finite() {
                    return Err(TransformError::NonFiniteParameter("center"));
                }
                if !(width.is_finite() && *width > 0.0) {
                    return Err(TransformError::InvalidWidth(*width));
                }
            }
            Self::PeakonSum { peaks } => {
                for (i, p) in peaks.iter().enumerate() {
                    if !(p.amplitude.is_finite() && p.center.is_finite()) {
                        return Err(TransformError::NonFiniteParameter("peakon"));
                    }
                    if p.amplitude == 0.0 {
                        return Err(TransformError::ZeroPeakonAmplitude(i));
                    }
                }
            }
            Self::Tabulated(_) | Self::Zero => {}
        }
        Ok(())
    }

    pub fn analytic_derivative_available(&self) -> bool {
        !matches!(self, Self::Tabulated(_))
    }

    /// Points where `u₀'` jumps, sorted.
    pub fn corners(&self) -> Vec<f64> {
        match self {
            Self::PeakonSum { peaks } => {
                let mut c: Vec<f64> = peaks.iter().map(|p| p.center).collect();
                c.sort_by(f64::total_cmp);
                c.dedup();
                c
            }
            _ => Vec::new(),
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            Self::Gaussian {
                amplitude,
                width,
                center,
            } => {
                let s = (x - center) / width;
                amplitude * (-s * s).exp()
            }
            Self::PeakonSum { peaks } => peaks
                .iter()
                .map(|p| p.amplitude * (-(x - p.center).abs()).exp())
                .sum(),
            Self::Tabulated(t) => t.eval(x).0,
            Self::Zero => 0.0,
        }
    }

    /// `u₀'(x)`, one-sided from `side` at a corner.
    pub fn slope(&self, x: f64, side: Side) -> f64 {
        match self {
            Self::Gaussian {
                amplitude,
                width,
                center,
            } => {
                let s = (x - center) / width;
                -2.0 * s / width * amplitude * (-s * s).exp()
            }
            Self::PeakonSum { peaks } => peaks
                .iter()
                .map(|p| {
                    let d = x - p.center;
                    let sign = if d > 0.0 || (d == 0.0 && side == Side::Right) {
                        -1.0
                    } else {
                        1.0
                    };
                    sign * p.amplitude * (-d.abs()).exp()
                })
                .sum(),
            Self::Tabulated(t) => t.eval(x).1,
            Self::Zero => 0.0,
        }
    }

    /// `max(|u₀(−L)|, |u₀(L)|)`.
    pub fn boundary_magnitude(&self, half_width: f64) -> f64 {
        self.value(-half_width).abs().max(self.value(half_width).abs())
    }

    /// `∫_{−L}^{L} (u₀² + u₀'²) dx` by Gauss–Legendre panels split at corners.
    pub fn physical_energy(&self, half_width: f64, panels: usize) -> f64 {
        self.integrate_local(half_width, panels, |u, s| u * u + s * s)
    }

    /// `‖u₀‖_{H¹} + ‖u₀‖_{W^{1,k}}` on `[−L, L]`.
    pub fn sobolev_norm(&self, half_width: f64, panels: usize, k: u32) -> f64 {
        let h1 = self.physical_energy(half_width, panels).sqrt();
        let k = k as i32;
        let wk = self
            .integrate_local(half_width, panels, |u, s| u.abs().powi(k) + s.abs().powi(k))
            .powf(1.0 / f64::from(k));
        h1 + wk
    }

    fn integrate_local(&self, half_width: f64, panels: usize, f: impl Fn(f64, f64) -> f64) -> f64 {
        let edges = piece_edges(&self.corners(), half_width);
        let mut total = 0.0;
        for w in edges.windows(2) {
            let m = panels.max(1);
            let h = (w[1] - w[0]) / m as f64;
            for j in 0..m {
                let a = w[0] + j as f64 * h;
                total += gauss_legendre(a, a + h, |x| f(self.value(x), self.slope(x, Side::Right)));
            }
        }
        total
    }

    /// `factor · u₀`.
    pub fn scaled(&self, factor: f64) -> Result<Self, TransformError> {
        Ok(match self {
            Self::Gaussian {
                amplitude,
                width,
                center,
            } => Self::gaussian(amplitude * factor, *width, *center),
            Self::PeakonSum { peaks } => Self::PeakonSum {
                peaks: peaks
                    .iter()
                    .map(|p| Peak {
                        amplitude: p.amplitude * factor,
                        center: p.center,
                    })
                    .collect(),
            },
            Self::Tabulated(t) => Self::Tabulated(TabulatedProfile::new(
                t.x().to_vec(),
                t.u().iter().map(|u| u * factor).collect(),
            )?),
            Self::Zero => Self::Zero,
        })
    }
}

/// `[−L, corners inside, 0, L]`, sorted and deduplicated.
fn piece_edges(corners: &[f64], half_width: f64) -> Vec<f64> {
    let mut e: Vec<f64> = corners
        .iter()
        .copied()
        .filter(|&c| c > -half_width && c < half_width)
        .collect();
    e.push(0.0);
    e.push(-half_width);
    e.push(half_width);
    e.sort_by(f64::total_cmp);
    e.dedup();
    e
}

const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

fn gauss_legendre(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
    GL_NODES
        .iter()
        .zip(&GL_WEIGHTS)
        .map(|(t, w)| w * f(m + r * t))
        .sum::<f64>()
        * r
}

/// `(1 + s²)^{λ+1}`
#[inline]
fn label_density(slope: f64, lambda: u32) -> f64 {
    ModelParams::upow(1.0 + slope * slope, lambda + 1)
}

/// The monotone map `x ↦ Y(x)` on `[−L, L]` tabulated on a fine grid whose
/// panels never straddle a corner, with its inverse.
#[derive(Debug, Clone)]
pub struct LabelMap {
    data: InitialData,
    lambda: u32,
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Density at each panel's left end, seen from inside the panel.
    f_left: Vec<f64>,
    /// Density at each panel's right end, seen from inside the panel.
    f_right: Vec<f64>,
}

impl LabelMap {
    pub fn fine_x(&self) -> &[f64] {
        &self.xs
    }

    pub fn fine_y(&self) -> &[f64] {
        &self.ys
    }

    pub fn y_min(&self) -> f64 {
        self.ys[0]
    }

    pub fn y_max(&self) -> f64 {
        *self.ys.last().unwrap()
    }

    fn density(&self, x: f64, side: Side) -> f64 {
        label_density(self.data.slope(x, side), self.lambda)
    }

    fn panel_y(&self, j: usize, x: f64) -> f64 {
        self.ys[j] + gauss_legendre(self.xs[j], x, |s| self.density(s, Side::Right))
    }

    pub fn y_of(&self, x: f64) -> f64 {
        let last = self.xs.len() - 1;
        let j = self.xs.partition_point(|&t| t <= x).clamp(1, last) - 1;
        self.panel_y(j, x)
    }

    /// Inverse `x₀(Y)`: Hermite guess in the bracketing panel, Newton polish.
    pub fn x_of(&self, y: f64) -> f64 {
        let last = self.ys.len() - 1;
        let j = self.ys.partition_point(|&t| t <= y).clamp(1, last) - 1;
        let (x0, x1, y0, y1) = (self.xs[j], self.xs[j + 1], self.ys[j], self.ys[j + 1]);
        let hy = y1 - y0;
        if hy <= 0.0 {
            return x0;
        }
        let t = ((y - y0) / hy).clamp(0.0, 1.0);
        let (m0, m1) = (hy / self.f_left[j], hy / self.f_right[j]);
        let t2 = t * t;
        let t3 = t2 * t;
        let mut x = (2.0 * t3 - 3.0 * t2 + 1.0) * x0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * x1 + (t3 - t2) * m1;
        x = x.clamp(x0, x1);
        for _ in 0..6 {
            let side = if x <= x0 { Side::Right } else { Side::Left };
            let step = (self.panel_y(j, x) - y) / self.density(x, side);
            let next = (x - step).clamp(x0, x1);
            let done = (next - x).abs() <= 4.0 * f64::EPSILON * x.abs().max(1.0);
            x = next;
            if done {
                break;
            }
        }
        x
    }
}

/// Build `Y(x)` on `[−L, L]` with `Y(0) = 0`, on a fine grid of at least
/// `8N` points that has nodes at every corner of `u₀` and at 0.
pub fn cumulative_label(data: &InitialData, params: &ModelParams) -> Result<LabelMap, TransformError> {
    data.validate()?;
    let lambda = params.lambda();
    let half = params.domain_half_width();
    let edges = piece_edges(&data.corners(), half);
    let total_panels = (FINE_POINTS_PER_NODE * params.n_points()).max(1024);

    let mut xs = vec![edges[0]];
    for w in edges.windows(2) {
        let m = (((w[1] - w[0]) / (2.0 * half) * total_panels as f64).round() as usize).max(2);
        let h = (w[1] - w[0]) / m as f64;
        for j in 1..m {
            xs.push(w[0] + j as f64 * h);
        }
        xs.push(w[1]);
    }

    let n = xs.len();
    let mut ys = vec![0.0; n];
    let mut f_left = vec![0.0; n - 1];
    let mut f_right = vec![0.0; n - 1];
    for j in 0..n - 1 {
        let (a, b) = (xs[j], xs[j + 1]);
        let sa = data.slope(a, Side::Right);
        let sb = data.slope(b, Side::Left);
        for (x, s) in [(a, sa), (b, sb)] {
            check_slope(x, s)?;
        }
        f_left[j] = label_density(sa, lambda);
        f_right[j] = label_density(sb, lambda);
        let inc = gauss_legendre(a, b, |s| label_density(data.slope(s, Side::Right), lambda));
        if !inc.is_finite() {
            return Err(TransformError::NonFiniteDerivative(0.5 * (a + b)));
        }
        ys[j + 1] = ys[j] + inc;
    }
    let zero = xs.iter().position(|&x| x == 0.0).expect("0 is a fine node");
    let shift = ys[zero];
    ys.iter_mut().for_each(|y| *y -= shift);

    Ok(LabelMap {
        data: data.clone(),
        lambda,
        xs,
        ys,
        f_left,
        f_right,
    })
}

fn check_slope(x: f64, slope: f64) -> Result<(), TransformError> {
    if !slope.is_finite() {
        return Err(TransformError::NonFiniteDerivative(x));
    }
    if slope.abs() > MAX_INITIAL_SLOPE {
        return Err(TransformError::UnboundedInitialSlope { x, slope });
    }
    Ok(())
}

/// Grid, state at `T = 0` and the label map it came from.
#[derive(Debug, Clone)]
pub struct Initialized {
    pub grid: CharGrid,
    pub state: CharState,
    pub labels: LabelMap,
}

pub fn initialize_state(data: &InitialData, params: &ModelParams) -> Result<Initialized, TransformError> {
    let labels = cumulative_label(data, params)?;
    let half = params.domain_half_width();
    let corners: Vec<f64> = data
        .corners()
        .into_iter()
        .filter(|&c| c > -half && c < half)
        .collect();
    let breaks: Vec<f64> = corners.iter().map(|&c| labels.y_of(c)).collect();
    let grid = CharGrid::with_breaks(labels.y_min(), labels.y_max(), &breaks, params.n_points())?;

    let n = grid.len();
    let mut state = CharState::zeros(n);
    let segments = grid.segments();
    let last = segments.len() - 1;
    for (s, seg) in segments.iter().enumerate() {
        for i in seg.start..=seg.end {
            let (x, side) = if i == seg.start && s > 0 {
                (corners[s - 1], Side::Right)
            } else if i == seg.end && s < last {
                (corners[s], Side::Left)
            } else if i == seg.start {
                (-half, Side::Right)
            } else if i == seg.end {
                (half, Side::Left)
            } else {
                (labels.x_of(grid.nodes()[i]), Side::Right)
            };
            let slope = data.slope(x, side);
            check_slope(x, slope)?;
            state.x[i] = x;
            state.u[i] = data.value(x);
            state.v[i] = 2.0 * slope.atan();
        }
    }
    Ok(Initialized { grid, state, labels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::trig_powers;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn params(lambda: u32, l: f64, n: usize) -> ModelParams {
        ModelParams::new(lambda, l, n).unwrap()
    }

    #[test]
    fn zero_data_gives_identity_labels() {
        let p = params(1, 5.0, 64);
        let init = initialize_state(&InitialData::Zero, &p).unwrap();
        assert_relative_eq!(init.labels.y_min(), -5.0, max_relative = 1e-15);
        assert_relative_eq!(init.labels.y_max(), 5.0, max_relative = 1e-15);
        for (i, &y) in init.grid.nodes().iter().enumerate() {
            assert_relative_eq!(init.state.x[i], y, epsilon = 1e-14);
            assert_eq!((init.state.u[i], init.state.v[i], init.state.xi[i]), (0.0, 0.0, 1.0));
        }
    }

    // Closed form x + a²/2 (1 − e^{−2x}) checked against 50-digit quadrature (tests/oracles/generate.py).
    #[test]
    fn peakon_label_matches_reference() {
        let data = InitialData::peakons(&[(0.8, 0.0)]);
        let map = cumulative_label(&data, &params(0, 10.0, 256)).unwrap();
        assert_eq!(map.y_of(0.0), 0.0);
        assert_relative_eq!(map.y_of(0.5), 0.702_278_578_825_138_46, max_relative = 1e-10);
        assert_relative_eq!(map.y_of(2.0), 2.314_138_995_555_605, max_relative = 1e-10);
        assert_relative_eq!(map.y_of(-1.5), -1.804_068_138_122_283_5, max_relative = 1e-10);
    }

    #[test]
    fn gaussian_label_span_matches_reference() {
        let data = InitialData::gaussian(1.0, 1.0, 0.0);
        let map = cumulative_label(&data, &params(1, 10.0, 512)).unwrap();
        assert_relative_eq!(map.y_max() - map.y_min(), 23.171_298_468_720_569, max_relative = 1e-10);
    }

    #[test]
    fn inverse_round_trip_on_quadrature_grid() {
        let data = InitialData::peakons(&[(1.0, -2.0), (-0.7, 1.5)]);
        let map = cumulative_label(&data, &params(1, 12.0, 200)).unwrap();
        for (x, y) in map.fine_x().iter().zip(map.fine_y()) {
            assert!((map.x_of(*y) - x).abs() < 1e-9);
        }
        for k in 0..97 {
            let x = -11.9 + 0.2457 * k as f64;
            assert!((map.x_of(map.y_of(x)) - x).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_slope_gives_quarter_turn() {
        // u₀ = x e^{-x²}... has u₀'(0) = 1.
        let x: Vec<f64> = (0..2001).map(|i| -20.0 + 0.02 * i as f64).collect();
        let u: Vec<f64> = x.iter().map(|x| x * (-x * x).exp()).collect();
        let data = InitialData::Tabulated(TabulatedProfile::new(x, u).unwrap());
        let init = initialize_state(&data, &params(0, 8.0, 257)).unwrap();
        let mid = init.grid.nodes().iter().position(|&y| y == 0.0).unwrap_or(128);
        assert!(init.state.x[mid].abs() < 1e-12);
        assert_relative_eq!(init.state.v[mid], PI / 2.0, max_relative = 1e-6);
    }

    #[test]
    fn peakon_corner_is_duplicated_with_one_sided_angles() {
        let a = 0.9;
        let data = InitialData::peakons(&[(a, 1.0)]);
        let init = initialize_state(&data, &params(0, 15.0, 300)).unwrap();
        assert_eq!(init.grid.segments().len(), 2);
        let left = init.grid.segments()[0].end;
        assert_eq!(init.state.x[left], 1.0);
        assert_eq!(init.state.x[left + 1], 1.0);
        assert_relative_eq!(init.state.v[left], 2.0 * a.atan(), max_relative = 1e-15);
        assert_relative_eq!(init.state.v[left + 1], -2.0 * a.atan(), max_relative = 1e-15);
        assert!(init.state.x.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn discrete_energy_matches_physical_energy() {
        // 2√(π/2) for a = w = 1 by 50-digit quadrature.
        let data = InitialData::gaussian(1.0, 1.0, 0.0);
        assert_relative_eq!(data.physical_energy(10.0, 400), 2.506_628_274_631_000_5, max_relative = 1e-13);
        for (lambda, data, e0) in [
            (1, InitialData::gaussian(1.0, 1.0, 0.0), 2.506_628_274_631_000_5),
            (1, InitialData::gaussian(1.5, 0.5, 0.0), 7.049_892_022_399_688_9),
            (0, InitialData::peakons(&[(1.0, -1.0), (-1.0, 1.0)]), f64::NAN),
        ] {
            let p = params(lambda, 20.0, 4096);
            let init = initialize_state(&data, &p).unwrap();
            let s = &init.state;
            let dens: Vec<f64> = (0..s.len())
                .map(|i| {
                    let t = trig_powers(s.v[i], lambda);
                    (s.u[i] * s.u[i] * t.cos_k + t.sin2_cos_km2) * s.xi[i]
                })
                .collect();
            let e = init.grid.integrate(&dens);
            let reference = if e0.is_nan() { data.physical_energy(20.0, 2000) } else { e0 };
            assert_relative_eq!(e, reference, max_relative = 1e-6);
        }
    }

    #[test]
    fn initial_metric_matches_positions() {
        let data = InitialData::gaussian(1.2, 0.7, 0.3);
        let err = |n: usize| {
            let p = params(1, 10.0, n);
            let init = initialize_state(&data, &p).unwrap();
            let m = crate::nonlocal::metric_profile(&init.state, &init.grid, &p);
            let x0 = init.state.x[0];
            init.state
                .x
                .iter()
                .zip(&m.x)
                .map(|(x, xm)| (x - x0 - xm).abs())
                .fold(0.0, f64::max)
        };
        let (coarse, fine) = (err(1025), err(2049));
        assert!(fine < 1e-5 && coarse / fine > 8.0, "{coarse:e} {fine:e}");
    }

    #[test]
    fn tabulated_derivative_is_fourth_order() {
        let err = |h: f64| {
            let x: Vec<f64> = (0..=(20.0 / h) as usize).map(|i| -10.0 + h * i as f64).collect();
            let u: Vec<f64> = x.iter().map(|x| (-x * x).exp()).collect();
            let t = TabulatedProfile::new(x.clone(), u).unwrap();
            x.iter()
                .zip(&t.du)
                .map(|(x, d)| (d + 2.0 * x * (-x * x).exp()).abs())
                .fold(0.0, f64::max)
        };
        let order = (err(0.05) / err(0.025)).log2();
        assert!(order > 3.7, "order {order}");
    }

    #[test]
    fn csv_with_and_without_header() {
        let body: String = (0..11)
            .map(|i| {
                let x = -5.0 + i as f64;
                format!("{x},{}\n", if i == 5 { 0.5 } else { 0.0 })
            })
            .collect();
        let a = TabulatedProfile::from_reader(body.as_bytes()).unwrap();
        let b = TabulatedProfile::from_reader(format!("x,u\n{body}").as_bytes()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.x().len(), 11);
        assert!(TabulatedProfile::from_reader("x,u\n1,2\nfoo,3\n".as_bytes()).is_err());
    }

    #[test]
    fn rejects_invalid_data() {
        assert!(matches!(
            InitialData::gaussian(1.0, 0.0, 0.0).validate(),
            Err(TransformError::InvalidWidth(_))
        ));
        assert!(matches!(
            InitialData::peakons(&[(0.0, 1.0)]).validate(),
            Err(TransformError::ZeroPeakonAmplitude(0))
        ));
        let x = vec![0.0, 1.0, 1.0, 2.0, 3.0];
        assert!(matches!(
            TabulatedProfile::new(x, vec![0.0; 5]),
            Err(TransformError::TableNotIncreasing(2))
        ));
        let x = vec![0.0, 1.0, 2.0, 3.0, 4.0];
        assert!(matches!(
            TabulatedProfile::new(x, vec![0.1, 0.0, 0.0, 0.0, 0.0]),
            Err(TransformError::TableNotDecaying { .. })
        ));
        let steep = InitialData::gaussian(1e14, 1.0, 0.0);
        assert!(matches!(
            initialize_state(&steep, &params(0, 5.0, 64)),
            Err(TransformError::UnboundedInitialSlope { .. })
        ));
    }

    #[test]
    fn serde_round_trip() {
        for data in [
            InitialData::gaussian(1.5, 0.5, 0.0),
            InitialData::peakons(&[(1.0, -2.0), (-1.0, 2.0)]),
            InitialData::Zero,
        ] {
            let s = serde_json::to_string(&data).unwrap();
            assert_eq!(serde_json::from_str::<InitialData>(&s).unwrap(), data);
        }
    }

    #[test]
    fn sobolev_norm_of_a_gaussian_scales_linearly() {
        let data = InitialData::gaussian(1.0, 1.0, 0.0);
        let h1 = (2.0 * (PI / 2.0).sqrt()).sqrt();
        assert_relative_eq!(data.sobolev_norm(12.0, 400, 2), 2.0 * h1, max_relative = 1e-12);
        let big = data.scaled(3.0).unwrap();
        assert_relative_eq!(big.sobolev_norm(12.0, 400, 4), 3.0 * data.sobolev_norm(12.0, 400, 4), max_relative = 1e-12);
        assert_eq!(InitialData::Zero.scaled(2.0).unwrap(), InitialData::Zero);
    }
}
