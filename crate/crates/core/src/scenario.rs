//! Named initial-data presets with their default resolution and horizon.

use crate::transform::{InitialData, TabulatedProfile, TransformError};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown scenario '{0}'; expected one of {list}", list = ScenarioPreset::names().join(", "))]
    Unknown(String),
    #[error("scenario tabulated_file needs a profile; pass --input <file.csv>")]
    MissingInput,
    #[error(transparent)]
    Transform(#[from] TransformError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioPreset {
    GaussianSmooth,
    GaussianBreaking,
    Peakon,
    AntipeakonCollision,
    TwoPeakon,
    TabulatedFile,
    Zero,
}

/// Default model and run parameters of a preset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioDefaults {
    pub lambda: u32,
    pub half_width: f64,
    pub n_points: usize,
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_every: usize,
    pub check_every: usize,
}

const BASE: ScenarioDefaults = ScenarioDefaults {
    lambda: 1,
    half_width: 20.0,
    n_points: 4096,
    dt: 1e-3,
    t_end: 5.0,
    snapshot_every: 500,
    check_every: 10,
};

/// Peakon amplitude and starting centre of the single-peakon preset.
pub const PEAKON: (f64, f64) = (1.0, -2.5);
/// Amplitude `a` and half separation `x₀`: `+a` at `−x₀`, `−a` at `+x₀`.
pub const ANTIPEAKON: (f64, f64) = (1.0, 2.0);
pub const TWO_PEAKON: [(f64, f64); 2] = [(2.0, -4.0), (1.0, 0.0)];
/// `(amplitude, width)` of the Gaussian presets.
pub const GAUSSIAN_SMOOTH: (f64, f64) = (1.4, 4.0);
pub const GAUSSIAN_BREAKING: (f64, f64) = (1.0, 1.0);

impl ScenarioPreset {
    pub const ALL: [ScenarioPreset; 7] = [
        Self::GaussianSmooth,
        Self::GaussianBreaking,
        Self::Peakon,
        Self::AntipeakonCollision,
        Self::TwoPeakon,
        Self::TabulatedFile,
        Self::Zero,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::GaussianSmooth => "gaussian_smooth",
            Self::GaussianBreaking => "gaussian_breaking",
            Self::Peakon => "peakon",
            Self::AntipeakonCollision => "antipeakon_collision",
            Self::TwoPeakon => "two_peakon",
            Self::TabulatedFile => "tabulated_file",
            Self::Zero => "zero",
        }
    }

    pub fn names() -> Vec<&'static str> {
        Self::ALL.iter().map(|s| s.name()).collect()
    }

    pub fn defaults(self) -> ScenarioDefaults {
        match self {
            Self::GaussianSmooth => ScenarioDefaults {
                half_width: 50.0,
                ..BASE
            },
            Self::GaussianBreaking | Self::TabulatedFile => BASE,
            // Fixed labels pile up ahead of a peak and spread behind it, so ξ
            // develops a layer of width ~e^{−ct} in Y; the horizons stop
            // while N = 4096 still resolves it.
            Self::Peakon => ScenarioDefaults {
                lambda: 0,
                half_width: 40.0,
                t_end: 1.5,
                snapshot_every: 250,
                ..BASE
            },
            Self::TwoPeakon => ScenarioDefaults {
                lambda: 0,
                half_width: 40.0,
                t_end: 1.0,
                snapshot_every: 250,
                ..BASE
            },
            Self::AntipeakonCollision => ScenarioDefaults {
                lambda: 0,
                half_width: 35.0,
                ..BASE
            },
            Self::Zero => ScenarioDefaults {
                half_width: 10.0,
                n_points: 256,
                t_end: 1.0,
                snapshot_every: 250,
                ..BASE
            },
        }
    }

    /// Initial profile; `input` is the CSV table of `tabulated_file`.
    pub fn initial_data(self, input: Option<&Path>) -> Result<InitialData, ScenarioError> {
        Ok(match self {
            Self::GaussianSmooth => InitialData::gaussian(GAUSSIAN_SMOOTH.0, GAUSSIAN_SMOOTH.1, 0.0),
            Self::GaussianBreaking => InitialData::gaussian(GAUSSIAN_BREAKING.0, GAUSSIAN_BREAKING.1, 0.0),
            Self::Peakon => InitialData::peakons(&[PEAKON]),
            Self::AntipeakonCollision => {
                let (a, x0) = ANTIPEAKON;
                InitialData::peakons(&[(a, -x0), (-a, x0)])
            }
            Self::TwoPeakon => InitialData::peakons(&TWO_PEAKON),
            Self::TabulatedFile => {
                let path = input.ok_or(ScenarioError::MissingInput)?;
                InitialData::Tabulated(TabulatedProfile::from_csv(path)?)
            }
            Self::Zero => InitialData::Zero,
        })
    }
}

impl fmt::Display for ScenarioPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioPreset {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|p| p.name() == key)
            .ok_or_else(|| ScenarioError::Unknown(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;

    #[test]
    fn names_round_trip() {
        for p in ScenarioPreset::ALL {
            assert_eq!(p.name().parse::<ScenarioPreset>().unwrap(), p);
            let json = serde_json::to_string(&p).unwrap();
            assert_eq!(json, format!("\"{}\"", p.name()));
        }
        assert_eq!("two-peakon".parse::<ScenarioPreset>().unwrap(), ScenarioPreset::TwoPeakon);
        assert!(matches!("soliton".parse::<ScenarioPreset>(), Err(ScenarioError::Unknown(_))));
    }

    #[test]
    fn presets_decay_at_their_default_width() {
        for p in ScenarioPreset::ALL {
            if p == ScenarioPreset::TabulatedFile {
                continue;
            }
            let d = p.defaults();
            let data = p.initial_data(None).unwrap();
            data.validate().unwrap();
            assert!(data.boundary_magnitude(d.half_width) < 1e-12, "{p}");
            ModelParams::new(d.lambda, d.half_width, d.n_points).unwrap();
        }
    }

    #[test]
    fn tabulated_preset_needs_a_file() {
        assert!(matches!(
            ScenarioPreset::TabulatedFile.initial_data(None),
            Err(ScenarioError::MissingInput)
        ));
    }

    #[test]
    fn antipeakon_is_odd() {
        let data = ScenarioPreset::AntipeakonCollision.initial_data(None).unwrap();
        for x in [0.3, 1.7, 2.0, 5.5] {
            assert_eq!(data.value(-x), -data.value(x));
        }
        assert_eq!(data.value(0.0), 0.0);
    }
}
