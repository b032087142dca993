use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("grid needs at least {needed} nodes for {segments} segment(s), got {got}")]
    TooFewNodes {
        needed: usize,
        segments: usize,
        got: usize,
    },
    #[error("grid interval [{0}, {1}] is empty or not finite")]
    EmptyInterval(f64, f64),
    #[error("break point {0} is not strictly inside the grid interval")]
    BreakOutsideDomain(f64),
}

/// A maximal run of equally spaced nodes `start..=end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub h: f64,
}

impl Segment {
    pub fn panels(&self) -> usize {
        self.end - self.start
    }
}

pub const STENCIL: usize = 6;

/// Weights (×1440) of the six-point panel rule, by panel offset inside the window.
const SIX_POINT: [[f64; 6]; 5] = [
    [475.0, 1427.0, -798.0, 482.0, -173.0, 27.0],
    [-27.0, 637.0, 1022.0, -258.0, 77.0, -11.0],
    [11.0, -93.0, 802.0, 802.0, -93.0, 11.0],
    [-11.0, 77.0, -258.0, 1022.0, 637.0, -27.0],
    [27.0, -173.0, 482.0, -798.0, 1427.0, 475.0],
];

/// Up to six-node panel stencil: `∫ over [Y_i, Y_{i+1}] f ≈ Σ w·f[idx]`.
/// Unused slots and panels joining two segments carry zero weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PanelStencil {
    pub idx: [usize; STENCIL],
    pub w: [f64; STENCIL],
}

/// The characteristic grid: uniformly spaced labels `Y`, optionally split into
/// segments at fixed break labels (corners of the initial data). The break
/// label appears twice, once as the last node of the left segment and once as
/// the first node of the right one, so piecewise-smooth states are integrated
/// and differenced one segment at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct CharGrid {
    nodes: Vec<f64>,
    segments: Vec<Segment>,
    panels: Vec<PanelStencil>,
    weights: Vec<f64>,
    dy: f64,
}

impl CharGrid {
    pub fn uniform(y_min: f64, y_max: f64, n: usize) -> Result<Self, GridError> {
        Self::with_breaks(y_min, y_max, &[], n)
    }

    /// `n` nodes in total over `[y_min, y_max]`, split at the sorted `breaks`.
    pub fn with_breaks(y_min: f64, y_max: f64, breaks: &[f64], n: usize) -> Result<Self, GridError> {
        if !(y_min.is_finite() && y_max.is_finite() && y_max > y_min) {
            return Err(GridError::EmptyInterval(y_min, y_max));
        }
        let mut edges = Vec::with_capacity(breaks.len() + 2);
        edges.push(y_min);
        for &b in breaks {
            if !(b > *edges.last().unwrap() && b < y_max) {
                return Err(GridError::BreakOutsideDomain(b));
            }
            edges.push(b);
        }
        edges.push(y_max);
        let n_seg = edges.len() - 1;
        let needed = 4 * n_seg;
        if n < needed {
            return Err(GridError::TooFewNodes {
                needed,
                segments: n_seg,
                got: n,
            });
        }

        // Panels per segment, proportional to length (largest remainder), at least 3 each.
        let total_panels = n - n_seg;
        let total_len = y_max - y_min;
        let spare = total_panels - 3 * n_seg;
        let ideal: Vec<f64> = edges
            .windows(2)
            .map(|w| (w[1] - w[0]) / total_len * spare as f64)
            .collect();
        let mut counts: Vec<usize> = ideal.iter().map(|x| 3 + x.floor() as usize).collect();
        let mut left = total_panels - counts.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..n_seg).collect();
        order.sort_by(|&a, &b| {
            let ra = ideal[a] - ideal[a].floor();
            let rb = ideal[b] - ideal[b].floor();
            rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
        });
        for &s in order.iter().cycle() {
            if left == 0 {
                break;
            }
            counts[s] += 1;
            left -= 1;
        }

        let mut nodes = Vec::with_capacity(n);
        let mut segments = Vec::with_capacity(n_seg);
        for (s, w) in edges.windows(2).enumerate() {
            let start = nodes.len();
            let m = counts[s];
            let h = (w[1] - w[0]) / m as f64;
            for j in 0..m {
                nodes.push(w[0] + j as f64 * h);
            }
            nodes.push(w[1]);
            segments.push(Segment {
                start,
                end: start + m,
                h,
            });
        }
        debug_assert_eq!(nodes.len(), n);

        let panels = build_panels(&segments, n);
        let mut weights = vec![0.0; n];
        for p in &panels {
            for (&i, &w) in p.idx.iter().zip(&p.w) {
                weights[i] += w;
            }
        }
        Ok(Self {
            nodes,
            segments,
            panels,
            weights,
            dy: total_len / total_panels as f64,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn y_min(&self) -> f64 {
        self.nodes[0]
    }

    pub fn y_max(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    /// Nominal spacing: domain length over the number of non-degenerate panels.
    pub fn dy(&self) -> f64 {
        self.dy
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Stencil of panel `i` (between nodes `i` and `i+1`).
    pub fn panels(&self) -> &[PanelStencil] {
        &self.panels
    }

    /// Node weights of the composite rule.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Labels where the grid is split (duplicated nodes).
    pub fn breaks(&self) -> Vec<f64> {
        self.segments[1..].iter().map(|s| self.nodes[s.start]).collect()
    }

    /// `true` when nodes `i` and `i+1` are the two copies of a break label.
    pub fn is_split(&self, i: usize) -> bool {
        self.panels[i].w == [0.0; STENCIL]
    }

    /// `∫ f dY`, summed left to right.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.len());
        self.weights.iter().zip(f).map(|(w, v)| w * v).sum()
    }

    /// Integral of `f` over panel `i`.
    pub fn panel_integral(&self, f: &[f64], i: usize) -> f64 {
        let p = &self.panels[i];
        p.w.iter().zip(&p.idx).map(|(w, &j)| w * f[j]).sum()
    }

    /// Second-order `df/dY` within each segment: centered inside, one-sided
    /// three-point at segment ends.
    pub fn derivative(&self, f: &[f64], out: &mut [f64]) {
        for seg in &self.segments {
            let (a, b, h) = (seg.start, seg.end, seg.h);
            match b - a {
                0 => out[a] = 0.0,
                1 => {
                    let d = (f[b] - f[a]) / h;
                    out[a] = d;
                    out[b] = d;
                }
                _ => {
                    out[a] = (-3.0 * f[a] + 4.0 * f[a + 1] - f[a + 2]) / (2.0 * h);
                    for i in a + 1..b {
                        out[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
                    }
                    out[b] = (3.0 * f[b] - 4.0 * f[b - 1] + f[b - 2]) / (2.0 * h);
                }
            }
        }
    }

    /// Segment index of every node.
    pub fn segment_ids(&self) -> Vec<usize> {
        let mut ids = vec![0; self.len()];
        for (s, seg) in self.segments.iter().enumerate() {
            for id in &mut ids[seg.start..=seg.end] {
                *id = s;
            }
        }
        ids
    }
}

fn build_panels(segments: &[Segment], n: usize) -> Vec<PanelStencil> {
    let zero = PanelStencil {
        idx: [0; STENCIL],
        w: [0.0; STENCIL],
    };
    let mut panels = vec![zero; n.saturating_sub(1)];
    for seg in segments {
        let m = seg.panels();
        let h = seg.h;
        for p in 0..m {
            let i = seg.start + p;
            let (lo, w): (usize, &[f64]) = match m {
                1 => (i, &[0.5, 0.5]),
                2 if p == 0 => (i, &[5.0 / 12.0, 8.0 / 12.0, -1.0 / 12.0]),
                2 => (i - 1, &[-1.0 / 12.0, 8.0 / 12.0, 5.0 / 12.0]),
                3 | 4 if p == 0 => (i, &[9.0 / 24.0, 19.0 / 24.0, -5.0 / 24.0, 1.0 / 24.0]),
                3 | 4 if p == m - 1 => (i - 2, &[1.0 / 24.0, -5.0 / 24.0, 19.0 / 24.0, 9.0 / 24.0]),
                3 | 4 => (i - 1, &[-1.0 / 24.0, 13.0 / 24.0, 13.0 / 24.0, -1.0 / 24.0]),
                _ => {
                    let lo = p.saturating_sub(2).min(m - 5);
                    (seg.start + lo, &SIX_POINT[p - lo])
                }
            };
            let scale = if w.len() == STENCIL { h / 1440.0 } else { h };
            let mut st = PanelStencil {
                idx: [lo; STENCIL],
                w: [0.0; STENCIL],
            };
            for (k, &c) in w.iter().enumerate() {
                st.idx[k] = lo + k;
                st.w[k] = c * scale;
            }
            panels[i] = st;
        }
    }
    panels
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn uniform_grid_spacing_is_constant() {
        let g = CharGrid::uniform(-3.0, 5.0, 33).unwrap();
        assert_eq!(g.len(), 33);
        assert_eq!(g.segments().len(), 1);
        assert_relative_eq!(g.dy(), 0.25);
        for w in g.nodes().windows(2) {
            assert_relative_eq!(w[1] - w[0], 0.25, max_relative = 1e-14);
        }
        assert_eq!(g.y_min(), -3.0);
        assert_eq!(g.y_max(), 5.0);
    }

    #[test]
    fn rule_is_exact_for_cubics() {
        let g = CharGrid::with_breaks(-1.0, 2.0, &[0.3, 1.1], 40).unwrap();
        let f: Vec<f64> = g.nodes().iter().map(|y| 1.0 - 2.0 * y + 0.5 * y * y - y * y * y).collect();
        let exact = |y: f64| y - y * y + y * y * y / 6.0 - y.powi(4) / 4.0;
        assert_relative_eq!(g.integrate(&f), exact(2.0) - exact(-1.0), max_relative = 1e-13);
    }

    #[test]
    fn rule_converges_at_sixth_order() {
        let err = |n: usize| {
            let g = CharGrid::uniform(0.0, 2.0, n).unwrap();
            let f: Vec<f64> = g.nodes().iter().map(|y| (3.0 * y).sin()).collect();
            (g.integrate(&f) - (1.0 - 6f64.cos()) / 3.0).abs()
        };
        let order = (err(21) / err(41)).log2();
        assert!(order > 5.7, "observed order {order} {:e} {:e}", err(21), err(41));
    }

    #[test]
    fn breaks_duplicate_nodes() {
        let g = CharGrid::with_breaks(0.0, 10.0, &[4.0], 64).unwrap();
        assert_eq!(g.len(), 64);
        assert_eq!(g.segments().len(), 2);
        let s = g.segments()[1].start;
        assert_eq!(g.nodes()[s], 4.0);
        assert_eq!(g.nodes()[s - 1], 4.0);
        assert!(g.is_split(s - 1));
        assert_eq!(g.breaks(), vec![4.0]);
        assert_relative_eq!(g.weights().iter().sum::<f64>(), 10.0, max_relative = 1e-14);
    }

    #[test]
    fn derivative_is_second_order_including_ends() {
        let err = |n: usize| {
            let g = CharGrid::with_breaks(0.0, 2.0, &[0.9], n).unwrap();
            let f: Vec<f64> = g.nodes().iter().map(|y| y.exp()).collect();
            let mut d = vec![0.0; g.len()];
            g.derivative(&f, &mut d);
            d.iter()
                .zip(g.nodes())
                .map(|(d, y)| (d - y.exp()).abs())
                .fold(0.0, f64::max)
        };
        let order = (err(64) / err(128)).log2();
        assert!(order > 1.9, "observed order {order}");
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(matches!(CharGrid::uniform(1.0, 1.0, 32), Err(GridError::EmptyInterval(..))));
        assert!(matches!(
            CharGrid::with_breaks(0.0, 1.0, &[1.5], 32),
            Err(GridError::BreakOutsideDomain(_))
        ));
        assert!(matches!(
            CharGrid::with_breaks(0.0, 1.0, &[0.5], 6),
            Err(GridError::TooFewNodes { .. })
        ));
    }
}
