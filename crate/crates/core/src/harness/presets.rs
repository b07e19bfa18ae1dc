//! Named experiment setups for the standard scenarios. All use the default
//! 100 m square, 1 W at λ = 0.125 m, and a single trial.

use super::config::{ExperimentConfig, FilterMode, NoiseMode, ThetaSource};
use crate::error::{Error, Result};

pub const PRESETS: &[&str] = &[
    "neg-noise-52",
    "neg-noise-51",
    "neg-noise-101-52",
    "neg-noise-101-51",
    "sig-noise-62",
    "sig-noise-q-60",
    "sig-noise-q-56",
    "sig-noise-q-55",
];

fn base(n: usize, n0: usize, noise_mode: NoiseMode, filter_mode: FilterMode) -> ExperimentConfig {
    ExperimentConfig {
        n,
        n0,
        region: super::config::default_region(),
        signal: Default::default(),
        noise_mode,
        faking: None,
        filter_mode,
        theta_source: ThetaSource::Recalibrate,
        calibration: Default::default(),
        seed: 0,
        trials: 1,
    }
}

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    use FilterMode::*;
    use NoiseMode::*;
    let cfg = match name {
        "neg-noise-52" => base(100, 52, Negligible, Standard),
        "neg-noise-51" => base(100, 51, Negligible, Standard),
        "neg-noise-101-52" => base(101, 52, Negligible, Standard),
        "neg-noise-101-51" => base(101, 51, Negligible, Standard),
        "sig-noise-62" => base(100, 62, Significant, Standard),
        "sig-noise-q-60" => base(100, 60, Significant, Quantile),
        "sig-noise-q-56" => base(100, 56, Significant, Quantile),
        "sig-noise-q-55" => base(100, 55, Significant, Quantile),
        _ => {
            return Err(Error::Config(format!(
                "unknown preset {name:?}; known: {}",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(cfg)
}
