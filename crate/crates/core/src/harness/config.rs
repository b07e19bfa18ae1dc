use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::theta::{CalibrationMeta, DEFAULT_NUM_X0, DEFAULT_NUM_X_PER_X0};
use crate::{FakingSearchConfig, Region, SignalParams};

/// Radio constants without the noise level, which comes from [`NoiseMode`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSpec {
    /// Watts.
    pub transmit_power: f64,
    /// Metres.
    pub wavelength: f64,
    #[serde(default = "default_exponent")]
    pub path_loss_exponent: f64,
}

fn default_exponent() -> f64 {
    2.0
}

impl Default for SignalSpec {
    /// 1 W at 2.4 GHz (λ = 0.125 m), free space.
    fn default() -> Self {
        Self {
            transmit_power: 1.0,
            wavelength: 0.125,
            path_loss_exponent: 2.0,
        }
    }
}

impl SignalSpec {
    pub fn with_sigma(&self, sigma: f64) -> Result<SignalParams> {
        SignalParams::new(
            self.transmit_power,
            self.wavelength,
            sigma,
            self.path_loss_exponent,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// σ = 10⁻⁶ · SS.
    Negligible,
    /// σ = SS.
    Significant,
    /// σ given in watts.
    Explicit(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterMode {
    /// Fixpoint with θ*.
    Standard,
    /// Escalating decile schedule ending at θ*.
    Quantile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaSource {
    /// A cached table on disk.
    Path(PathBuf),
    /// Calibrate from `calibration` (cached by the CLI).
    Recalibrate,
    /// Use this θ* directly; standard filtering only.
    Fixed(f64),
}

/// Monte-Carlo effort for θ calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSpec {
    pub num_x0: usize,
    pub num_x_per_x0: usize,
    pub seed: u64,
}

impl Default for CalibrationSpec {
    fn default() -> Self {
        Self {
            num_x0: DEFAULT_NUM_X0,
            num_x_per_x0: DEFAULT_NUM_X_PER_X0,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub n0: usize,
    #[serde(default = "default_region")]
    pub region: Region,
    #[serde(default)]
    pub signal: SignalSpec,
    pub noise_mode: NoiseMode,
    /// Adversary search settings; derived from the region when absent.
    #[serde(default)]
    pub faking: Option<FakingSearchConfig>,
    pub filter_mode: FilterMode,
    #[serde(default = "default_theta_source")]
    pub theta_source: ThetaSource,
    #[serde(default)]
    pub calibration: CalibrationSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
}

pub fn default_region() -> Region {
    Region::square(100.0).expect("valid square")
}

fn default_theta_source() -> ThetaSource {
    ThetaSource::Recalibrate
}

fn default_trials() -> usize {
    1
}

/// SS: ideal received power across the region diagonal, divided by three.
pub fn compute_noise_scale(signal: &SignalSpec, region: &Region) -> Result<f64> {
    Ok(signal
        .with_sigma(0.0)?
        .ideal_received_power(region.diagonal())?
        / 3.0)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n0 < 2 || self.n0 > self.n {
            return Err(Error::Config(format!(
                "need 2 <= n0 <= n, got n0 = {}, n = {}",
                self.n0, self.n
            )));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if let NoiseMode::Explicit(s) = self.noise_mode {
            if !(s.is_finite() && s >= 0.0) {
                return Err(Error::Config(format!(
                    "noise sigma must be finite and >= 0, got {s}"
                )));
            }
        }
        if let ThetaSource::Fixed(t) = self.theta_source {
            if !(t.is_finite() && t >= 0.0) {
                return Err(Error::Config(format!(
                    "theta must be finite and >= 0, got {t}"
                )));
            }
            if self.filter_mode == FilterMode::Quantile {
                return Err(Error::Config(
                    "quantile filtering needs a theta table".into(),
                ));
            }
        }
        self.faking().validate()?;
        self.signal_params()?;
        Ok(())
    }

    pub fn n1(&self) -> usize {
        self.n - self.n0
    }

    pub fn faking(&self) -> FakingSearchConfig {
        self.faking
            .unwrap_or_else(|| FakingSearchConfig::for_region(&self.region))
    }

    pub fn noise_sigma(&self) -> Result<f64> {
        let ss = compute_noise_scale(&self.signal, &self.region)?;
        Ok(match self.noise_mode {
            NoiseMode::Negligible => 1e-6 * ss,
            NoiseMode::Significant => ss,
            NoiseMode::Explicit(s) => s,
        })
    }

    pub fn signal_params(&self) -> Result<SignalParams> {
        self.signal.with_sigma(self.noise_sigma()?)
    }

    /// Calibration inputs for θ*_{⌈n/2⌉} under this configuration.
    pub fn calibration_meta(&self) -> Result<CalibrationMeta> {
        Ok(CalibrationMeta {
            signal: self.signal_params()?,
            region: self.region,
            faking: self.faking(),
            genuine_count: self.n.div_ceil(2),
            num_x0: self.calibration.num_x0,
            num_x_per_x0: self.calibration.num_x_per_x0,
            seed: self.calibration.seed,
        })
    }
}
