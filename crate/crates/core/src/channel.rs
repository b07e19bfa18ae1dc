//! Received-signal-strength channel: ideal and noisy path loss, the RSS
//! distance estimator, the 3σ acceptance interval and the probability that a
//! claimed distance survives the test.
//!
//! The received power model is `S^r = S^s (α/d)^m + ε` with `ε ~ N(0, σ²)` and
//! `α = λ / 4π`. A receiver that is told a distance `d̃` accepts the sender
//! when its RSS estimate `d̂ = α (S^s / S^r)^{1/m}` falls inside the interval
//! obtained by solving `S^s (α/d)^m = S^s (α/d̃)^m ± 3σ` for `d`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::gaussian;
use crate::scalar::Scalar;

/// Width of the acceptance band in units of σ.
pub const BAND_SIGMAS: f64 = 3.0;

/// Standardized offsets beyond which a tail probability is below 1e-19 and is
/// treated as zero.
const NEGLIGIBLE_Z: f64 = 9.0;

/// Physical parameters shared by every link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "RawSignalParams<T>",
    bound(deserialize = "T: Scalar + Deserialize<'de>")
)]
pub struct SignalParams<T> {
    transmit_power: T,
    wavelength: T,
    alpha: T,
    noise_sigma: T,
    path_loss_exponent: T,
}

#[derive(Deserialize)]
struct RawSignalParams<T> {
    transmit_power: T,
    wavelength: T,
    #[serde(default)]
    alpha: Option<T>,
    noise_sigma: T,
    #[serde(default)]
    path_loss_exponent: Option<T>,
}

impl<T: Scalar> TryFrom<RawSignalParams<T>> for SignalParams<T> {
    type Error = crate::Error;

    fn try_from(raw: RawSignalParams<T>) -> Result<Self> {
        let m = raw.path_loss_exponent.unwrap_or_else(|| T::lit(2.0));
        let params = SignalParams::new(raw.transmit_power, raw.wavelength, raw.noise_sigma, m)?;
        if let Some(alpha) = raw.alpha {
            let rel = ((alpha - params.alpha) / params.alpha).abs();
            if rel > T::lit(1e-9).max(T::epsilon() * T::lit(16.0)) {
                return Err(domain(format!(
                    "alpha {alpha} inconsistent with wavelength {} (expected {})",
                    params.wavelength, params.alpha
                )));
            }
        }
        Ok(params)
    }
}

impl<T: Scalar> SignalParams<T> {
    pub fn new(
        transmit_power: T,
        wavelength: T,
        noise_sigma: T,
        path_loss_exponent: T,
    ) -> Result<Self> {
        if !(transmit_power > T::zero()) || !transmit_power.is_finite() {
            return Err(domain(format!(
                "transmit power must be positive, got {transmit_power}"
            )));
        }
        if !(wavelength > T::zero()) || !wavelength.is_finite() {
            return Err(domain(format!(
                "wavelength must be positive, got {wavelength}"
            )));
        }
        if !(noise_sigma >= T::zero()) || !noise_sigma.is_finite() {
            return Err(domain(format!(
                "noise sigma must be non-negative, got {noise_sigma}"
            )));
        }
        if !(path_loss_exponent >= T::lit(2.0) && path_loss_exponent <= T::lit(4.0)) {
            return Err(domain(format!(
                "path-loss exponent must lie in [2, 4], got {path_loss_exponent}"
            )));
        }
        let four_pi = T::lit(4.0) * T::PI();
        Ok(Self {
            transmit_power,
            wavelength,
            alpha: wavelength / four_pi,
            noise_sigma,
            path_loss_exponent,
        })
    }

    /// Builds parameters from `α` directly (the wavelength is `4πα`).
    pub fn from_alpha(
        transmit_power: T,
        alpha: T,
        noise_sigma: T,
        path_loss_exponent: T,
    ) -> Result<Self> {
        let mut p = Self::new(
            transmit_power,
            alpha * T::lit(4.0) * T::PI(),
            noise_sigma,
            path_loss_exponent,
        )?;
        p.alpha = alpha;
        Ok(p)
    }

    pub fn with_noise_sigma(mut self, noise_sigma: T) -> Result<Self> {
        if !(noise_sigma >= T::zero()) || !noise_sigma.is_finite() {
            return Err(domain(format!(
                "noise sigma must be non-negative, got {noise_sigma}"
            )));
        }
        self.noise_sigma = noise_sigma;
        Ok(self)
    }

    pub fn transmit_power(&self) -> T {
        self.transmit_power
    }

    pub fn wavelength(&self) -> T {
        self.wavelength
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn noise_sigma(&self) -> T {
        self.noise_sigma
    }

    pub fn path_loss_exponent(&self) -> T {
        self.path_loss_exponent
    }

    #[inline]
    fn is_square_law(&self) -> bool {
        self.path_loss_exponent == T::lit(2.0)
    }

    /// `x^m`
    #[inline]
    fn gain(&self, x: T) -> T {
        if self.is_square_law() {
            x * x
        } else {
            x.powf(self.path_loss_exponent)
        }
    }

    /// `x^{1/m}`
    #[inline]
    fn root(&self, x: T) -> T {
        if self.is_square_law() {
            x.sqrt()
        } else {
            x.powf(self.path_loss_exponent.recip())
        }
    }

    #[inline]
    pub(crate) fn power_at(&self, distance: T) -> T {
        self.transmit_power * self.gain(self.alpha / distance)
    }

    /// Power at the distance whose square is `distance_sq`; avoids the square
    /// root on the square-law path.
    #[inline]
    pub(crate) fn power_at_sq(&self, distance_sq: T) -> T {
        let ratio_sq = self.alpha * self.alpha / distance_sq;
        if self.is_square_law() {
            self.transmit_power * ratio_sq
        } else {
            self.transmit_power * ratio_sq.powf(self.path_loss_exponent / T::lit(2.0))
        }
    }

    #[inline]
    fn band(&self) -> T {
        T::lit(BAND_SIGMAS) * self.noise_sigma
    }

    /// Noiseless received power `S^s (α/d)^m`.
    pub fn ideal_received_power(&self, distance: T) -> Result<T> {
        check_distance(distance)?;
        Ok(self.power_at(distance))
    }

    /// Ideal power plus one supplied noise realization. Can be non-positive.
    pub fn noisy_received_power(&self, distance: T, noise_draw: T) -> Result<T> {
        Ok(self.ideal_received_power(distance)? + noise_draw)
    }

    /// Inverts the path-loss law: `d̂ = α (S^s / S^r)^{1/m}`.
    pub fn estimate_distance(&self, received_power: T) -> Result<T, NotEstimable> {
        if !(received_power > T::zero()) || !received_power.is_finite() {
            return Err(NotEstimable);
        }
        Ok(self.alpha * self.root(self.transmit_power / received_power))
    }

    /// Range of RSS estimates consistent with `claimed_distance` under the
    /// 3σ rule.
    pub fn acceptance_interval(&self, claimed_distance: T) -> Result<AcceptanceInterval<T>> {
        check_distance(claimed_distance)?;
        // relative band 3σ / S^r(d̃); for m = 2 this is 3σ d̃² / (α² S^s)
        let rel = self.band() / self.power_at(claimed_distance);
        let inv_m = -self.path_loss_exponent.recip();
        let lower = claimed_distance * (T::one() + rel).powf(inv_m);
        let upper = if rel < T::one() {
            claimed_distance * (T::one() - rel).powf(inv_m)
        } else {
            T::infinity()
        };
        Ok(AcceptanceInterval { lower, upper })
    }

    /// Per-link test run by a receiver. Total: every input yields a verdict.
    pub fn link_verdict(&self, claimed_distance: T, received_power: T) -> Verdict {
        let Ok(interval) = self.acceptance_interval(claimed_distance) else {
            return Verdict::Accuse;
        };
        match self.estimate_distance(received_power) {
            Ok(estimate) if interval.contains(estimate) => Verdict::Approve,
            _ => Verdict::Accuse,
        }
    }

    /// Probability that a receiver at `true_distance` from the sender approves
    /// a claim of `claimed_distance`.
    ///
    /// The estimate lands in `[lower, upper]` exactly when the noise lies in
    /// `[S(upper) − S(d), S(lower) − S(d)]`, where `S(·)` is the ideal power;
    /// an infinite upper bound only requires a positive reading, `ε > −S(d)`.
    pub fn deception_probability(&self, true_distance: T, claimed_distance: T) -> Result<T> {
        check_distance(true_distance)?;
        let interval = self.acceptance_interval(claimed_distance)?;
        let p_true = self.power_at(true_distance);
        if self.noise_sigma == T::zero() {
            let noiseless = self.alpha * self.root(self.transmit_power / p_true);
            return Ok(if interval.contains(noiseless) {
                T::one()
            } else {
                T::zero()
            });
        }
        let eps_hi = self.power_at(interval.lower) - p_true;
        let eps_lo = if interval.upper.is_finite() {
            self.power_at(interval.upper) - p_true
        } else {
            -p_true
        };
        let sigma = self.noise_sigma;
        Ok(gaussian::normal_interval_prob(
            eps_lo / sigma,
            eps_hi / sigma,
        ))
    }

    /// Fast equivalent of [`Self::deception_probability`] given both ideal
    /// powers: the acceptance event is `S^r ∈ [S̃ − 3σ, S̃ + 3σ] ∩ (0, ∞)`.
    #[inline]
    pub(crate) fn band_probability(&self, p_true: T, p_claim: T) -> T {
        let band = self.band();
        let sigma = self.noise_sigma;
        if sigma == T::zero() {
            let tol = T::epsilon() * T::lit(16.0) * p_true;
            return if (p_claim - p_true).abs() <= tol {
                T::one()
            } else {
                T::zero()
            };
        }
        let hi = (p_claim + band - p_true) / sigma;
        let lo = ((p_claim - band).max(T::zero()) - p_true) / sigma;
        let z = T::lit(NEGLIGIBLE_Z);
        if hi < -z || lo > z {
            return T::zero();
        }
        gaussian::normal_interval_prob(lo, hi)
    }
}

#[inline]
fn check_distance<T: Scalar>(d: T) -> Result<()> {
    if d > T::zero() && d.is_finite() {
        Ok(())
    } else {
        Err(domain(format!(
            "distance must be positive and finite, got {d}"
        )))
    }
}

/// Closed range `[lower, upper]` of accepted RSS distance estimates; `upper`
/// may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceInterval<T> {
    pub lower: T,
    pub upper: T,
}

impl<T: Scalar> AcceptanceInterval<T> {
    /// Closed-interval membership with a few ulps of slack so that a
    /// noiseless truthful estimate is never rejected by rounding.
    pub fn contains(&self, d: T) -> bool {
        let slack = T::epsilon() * T::lit(8.0);
        d >= self.lower * (T::one() - slack) && d <= self.upper * (T::one() + slack)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Approve,
    Accuse,
}

/// The reading was non-positive (noise dominated the signal), so the path-loss
/// law cannot be inverted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NotEstimable;

impl fmt::Display for NotEstimable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("received power is not positive; distance not estimable")
    }
}

impl std::error::Error for NotEstimable {}
