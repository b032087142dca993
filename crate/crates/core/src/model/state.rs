use serde::{Deserialize, Serialize};

/// Unknowns of the semilinear system on the Y grid at one time `T`.
///
/// `v` is kept unwrapped: it may leave `[−π, π]` after breaking, and every
/// observable depends on it only through half-angle trigonometric functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharState {
    pub time: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub xi: Vec<f64>,
    /// Physical position of each characteristic.
    pub x: Vec<f64>,
}

impl CharState {
    pub fn zeros(n: usize) -> Self {
        Self {
            time: 0.0,
            u: vec![0.0; n],
            v: vec![0.0; n],
            xi: vec![1.0; n],
            x: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// First node with a nonpositive relabeling density.
    pub fn first_nonpositive_xi(&self) -> Option<usize> {
        self.xi.iter().position(|&xi| !(xi > 0.0))
    }

    /// First non-finite entry as `(field, index)`.
    pub fn first_non_finite(&self) -> Option<(&'static str, usize)> {
        let fields: [(&'static str, &[f64]); 4] =
            [("u", &self.u), ("v", &self.v), ("xi", &self.xi), ("x", &self.x)];
        fields
            .into_iter()
            .find_map(|(name, a)| a.iter().position(|z| !z.is_finite()).map(|i| (name, i)))
    }

    /// Largest drop `x[i] − x[i+1]` (zero when x is nondecreasing).
    pub fn max_x_decrease(&self) -> f64 {
        self.x
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(0.0, f64::max)
    }

    pub fn sup_u(&self) -> f64 {
        sup_abs(&self.u)
    }
}

/// The four exponential-kernel fields along a state.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NonlocalFields {
    pub p: Vec<f64>,
    pub px: Vec<f64>,
    pub q: Vec<f64>,
    pub qx: Vec<f64>,
}

impl NonlocalFields {
    pub fn zeros(n: usize) -> Self {
        Self {
            p: vec![0.0; n],
            px: vec![0.0; n],
            q: vec![0.0; n],
            qx: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    /// `(name, values)` for each field, in output order.
    pub fn named(&self) -> [(&'static str, &[f64]); 4] {
        [("P", &self.p), ("Px", &self.px), ("Q", &self.q), ("Qx", &self.qx)]
    }
}

pub(crate) fn sup_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.abs()))
}
