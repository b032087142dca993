/// Half-angle trigonometric powers of `v` used by every right-hand side and
/// functional. All powers come from repeated multiplication of `sin(v/2)` and
/// `cos(v/2)`; `k = 2(λ+1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrigPowers {
    pub sin_half: f64,
    pub cos_half: f64,
    /// `cos²(v/2)`
    pub cos2: f64,
    /// `sin²(v/2)`
    pub sin2: f64,
    /// `cos^k(v/2)`, the metric density `x_Y / ξ`
    pub cos_k: f64,
    /// `cos^{k−2}(v/2) = cos^{2λ}(v/2)`
    pub cos_km2: f64,
    /// `sin²(v/2) cos^{k−2}(v/2)`
    pub sin2_cos_km2: f64,
    /// `sin³(v/2) cos^{k−3}(v/2)`; zero for λ = 0 where it never enters.
    pub sin3_cos_km3: f64,
    /// `sin^k(v/2)`
    pub sin_k: f64,
    /// `sin^{k−1}(v/2) cos(v/2)`
    pub sin_km1_cos: f64,
    /// `½ sin v = sin(v/2) cos(v/2)`
    pub half_sin_v: f64,
}

pub fn trig_powers(v: f64, lambda: u32) -> TrigPowers {
    let (sin_half, cos_half) = (0.5 * v).sin_cos();
    let cos2 = cos_half * cos_half;
    let sin2 = sin_half * sin_half;

    // cos^{2λ} and sin^{2λ}
    let mut cos_2l = 1.0;
    let mut sin_2l = 1.0;
    for _ in 0..lambda {
        cos_2l *= cos2;
        sin_2l *= sin2;
    }
    let cos_k = cos_2l * cos2;
    let sin_k = sin_2l * sin2;

    let sin3_cos_km3 = if lambda == 0 {
        0.0
    } else {
        // cos^{2λ−1} = cos · cos^{2(λ−1)}
        let mut c = cos_half;
        for _ in 1..lambda {
            c *= cos2;
        }
        sin2 * sin_half * c
    };

    debug_assert!(cos_k >= 0.0 && sin_k >= 0.0);

    TrigPowers {
        sin_half,
        cos_half,
        cos2,
        sin2,
        cos_k,
        cos_km2: cos_2l,
        sin2_cos_km2: sin2 * cos_2l,
        sin3_cos_km3,
        sin_k,
        sin_km1_cos: sin_2l * sin_half * cos_half,
        half_sin_v: sin_half * cos_half,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn identity_and_cusp_cases() {
        let t = trig_powers(0.0, 1);
        assert_eq!((t.cos_half, t.sin_half, t.cos_k), (1.0, 0.0, 1.0));

        for lambda in 0..5 {
            let t = trig_powers(PI, lambda);
            assert!(t.cos_half.abs() < 1e-16);
            assert!(t.cos_k.abs() < 1e-30);
            assert_eq!(t.sin_half, 1.0);
        }
    }

    // Reference values from a 50-digit mpmath evaluation (tests/oracles/generate.py).
    #[test]
    fn matches_high_precision_reference() {
        let t = trig_powers(PI / 2.0, 0);
        assert_relative_eq!(t.sin2_cos_km2, 0.5, max_relative = 1e-15);
        assert_relative_eq!(t.cos_k, 0.5, max_relative = 1e-15);
        assert_relative_eq!(t.half_sin_v, 0.5, max_relative = 1e-15);

        let t = trig_powers(1.234, 3);
        assert_relative_eq!(t.cos_k, 0.195_836_651_769_923_46, max_relative = 1e-14);
        assert_relative_eq!(t.sin2_cos_km2, 0.098_551_604_760_536_783, max_relative = 1e-14);
        assert_relative_eq!(t.sin3_cos_km3, 0.069_911_490_780_013_535, max_relative = 1e-14);
        assert_relative_eq!(t.half_sin_v, 0.471_909_104_687_316_85, max_relative = 1e-14);

        let t = trig_powers(-2.5, 1);
        assert_relative_eq!(t.cos_k, 0.009_885_965_409_436_425_6, max_relative = 1e-14);
        assert_relative_eq!(t.sin2_cos_km2, 0.089_542_226_817_096_717, max_relative = 1e-14);
        assert_relative_eq!(t.sin3_cos_km3, -0.269_483_570_358_881_43, max_relative = 1e-14);

        // Unwrapped angle beyond 2π.
        let t = trig_powers(7.0, 2);
        assert_relative_eq!(t.cos_half, -0.936_456_687_290_796_34, max_relative = 1e-14);
        assert_relative_eq!(t.cos_k, 0.674_413_370_755_384_46, max_relative = 1e-14);
        assert_relative_eq!(t.sin3_cos_km3, 0.035_447_004_925_634_726, max_relative = 1e-14);
        assert_relative_eq!(t.half_sin_v, 0.328_493_299_359_394_55, max_relative = 1e-14);
    }

    proptest! {
        #[test]
        fn pythagoras_and_power_consistency(v in -20.0f64..20.0, lambda in 0u32..=8) {
            let t = trig_powers(v, lambda);
            prop_assert!((t.sin2 + t.cos2 - 1.0).abs() <= 1e-15);
            let k = 2 * (lambda + 1);
            let reference = t.cos2.powi((k / 2) as i32);
            prop_assert!((t.cos_k - reference).abs() <= 1e-14 * reference + 1e-300);
            prop_assert!(t.cos_k >= 0.0 && t.sin_k >= 0.0);
            prop_assert!((t.sin_k - t.sin2.powi((k / 2) as i32)).abs() <= 1e-14);
        }
    }
}
