//! Calibration of the deception allowance θ* and the closed-form predictors
//! used to check the filtering protocol.
//!
//! θ* for a network of `n` nodes is the ceiling of the worst (over sampled
//! malicious positions `x₀`) average (over sampled layouts of `⌈n/2⌉` genuine
//! nodes) of the optimal expected deception. Calibration is offline and the
//! resulting [`ThetaTable`] is cached as JSON.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adversary::optimize_fake_position;
use crate::error::{domain, io_err, Error, Result};
use crate::gaussian;
use crate::seed::{self, Stream};
use crate::{FakingSearchConfig, Point, Region, SignalParams};

/// Environment variable overriding the θ-table cache directory.
pub const CACHE_DIR_ENV: &str = "POSVERIFY_THETA_CACHE";

const DEFAULT_CACHE_DIR: &str = ".posverify-cache";

/// Default number of sampled malicious positions.
pub const DEFAULT_NUM_X0: usize = 25;
/// Default number of genuine layouts per malicious position.
pub const DEFAULT_NUM_X_PER_X0: usize = 20;

/// Probability that a truthful claim passes the 3σ test, `2Φ(3) − 1`.
pub fn truthful_acceptance() -> f64 {
    gaussian::normal_interval_prob(-3.0, 3.0)
}

/// Everything a table was calibrated from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationMeta {
    pub signal: SignalParams,
    pub region: Region,
    pub faking: FakingSearchConfig,
    /// Genuine nodes per sampled layout; `⌈n/2⌉` unless calibrating θ*_{n₀}.
    pub genuine_count: usize,
    pub num_x0: usize,
    pub num_x_per_x0: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaTable {
    pub n: usize,
    pub theta_star: u32,
    /// Deciles q = 0.1 … 0.9 of the pooled samples, keyed `"0.1"` … `"0.9"`.
    pub quantiles: BTreeMap<String, f64>,
    /// One optimal expected deception per (x₀, layout) cell, x₀-major.
    pub samples: Vec<f64>,
    pub calibration_meta: CalibrationMeta,
}

fn decile_key(i: usize) -> String {
    format!("0.{i}")
}

/// Nearest-rank quantile of an ascending slice.
fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Deciles 0.1 … 0.9 by nearest rank on the pooled sample.
pub fn deciles(samples: &[f64]) -> BTreeMap<String, f64> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    (1..=9)
        .map(|i| (decile_key(i), nearest_rank(&sorted, i as f64 / 10.0)))
        .collect()
}

impl ThetaTable {
    /// Quantile for q ∈ {0.1, …, 0.9}.
    pub fn quantile(&self, q: f64) -> Option<f64> {
        let i = (q * 10.0).round() as usize;
        if !(1..=9).contains(&i) || ((q * 10.0) - i as f64).abs() > 1e-9 {
            return None;
        }
        self.quantiles.get(&decile_key(i)).copied()
    }

    /// Deciles 0.1 … 0.9 in order; `None` if any is missing.
    pub fn decile_schedule(&self) -> Option<Vec<f64>> {
        (1..=9)
            .map(|i| self.quantiles.get(&decile_key(i)).copied())
            .collect()
    }

    /// Sample mean per malicious position, in sampling order.
    pub fn x0_means(&self) -> Vec<f64> {
        let per = self.calibration_meta.num_x_per_x0.max(1);
        self.samples
            .chunks(per)
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect()
    }

    /// Cache key: SHA-256 over the network size and calibration inputs.
    pub fn cache_hash(n: usize, meta: &CalibrationMeta) -> String {
        let payload = serde_json::to_vec(&(n, meta)).expect("calibration meta serializes");
        let digest = Sha256::digest(&payload);
        hex::encode(&digest[..8])
    }

    pub fn file_name_for(n: usize, meta: &CalibrationMeta) -> String {
        format!("theta_n{n}_{}.json", Self::cache_hash(n, meta))
    }

    pub fn file_name(&self) -> String {
        Self::file_name_for(self.n, &self.calibration_meta)
    }

    /// Writes the table into `dir` under its canonical file name.
    pub fn save_to_dir(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let path = dir.join(self.file_name());
        self.save(&path)?;
        Ok(path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_vec_pretty(self).expect("theta table serializes");
        fs::write(path, json).map_err(io_err(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(io_err(path))?;
        let table: ThetaTable = serde_json::from_slice(&bytes).map_err(|source| Error::Json {
            path: path.to_owned(),
            source,
        })?;
        table.check_consistency()?;
        Ok(table)
    }

    fn check_consistency(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::Config("theta table has no samples".into()));
        }
        if self.quantiles != deciles(&self.samples) {
            return Err(Error::Config(
                "theta table quantiles do not match its samples".into(),
            ));
        }
        Ok(())
    }
}

/// Directory used for cached tables: `$POSVERIFY_THETA_CACHE` or
/// `.posverify-cache` in the working directory.
pub fn cache_dir() -> PathBuf {
    std::env::var_os(CACHE_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_CACHE_DIR))
}

/// Loads the table for `(n, meta)` from `dir` if present, otherwise calibrates
/// it and writes it there.
pub fn load_or_calibrate(dir: &Path, n: usize, meta: &CalibrationMeta) -> Result<ThetaTable> {
    let path = dir.join(ThetaTable::file_name_for(n, meta));
    if path.exists() {
        let table = ThetaTable::load(&path)?;
        if table.n == n && &table.calibration_meta == meta {
            return Ok(table);
        }
    }
    let table = calibrate(n, meta)?;
    table.save_to_dir(dir)?;
    Ok(table)
}

/// Calibrates θ*_{⌈n/2⌉} and its deciles for `n` nodes.
#[allow(clippy::too_many_arguments)]
pub fn estimate_theta_table(
    params: &SignalParams,
    region: &Region,
    n: usize,
    num_x0: usize,
    num_x_per_x0: usize,
    config: &FakingSearchConfig,
    seed: u64,
) -> Result<ThetaTable> {
    let meta = CalibrationMeta {
        signal: *params,
        region: *region,
        faking: *config,
        genuine_count: n.div_ceil(2),
        num_x0,
        num_x_per_x0,
        seed,
    };
    calibrate(n, &meta)
}

/// Runs the calibration described by `meta`. Each (x₀, layout) cell draws
/// from its own stream, so the table is identical for any worker count.
pub fn calibrate(n: usize, meta: &CalibrationMeta) -> Result<ThetaTable> {
    if n < 4 {
        return Err(domain(format!("calibration needs n >= 4, got {n}")));
    }
    if meta.num_x0 == 0 || meta.num_x_per_x0 == 0 {
        return Err(domain("sample counts must be at least 1"));
    }
    if meta.genuine_count == 0 || meta.genuine_count > n {
        return Err(domain(format!(
            "genuine count {} outside 1..={n}",
            meta.genuine_count
        )));
    }
    meta.faking.validate()?;
    let region = meta.region;
    let cells = meta.num_x0 * meta.num_x_per_x0;

    let samples: Vec<f64> = (0..cells)
        .into_par_iter()
        .map(|cell| {
            let a = (cell / meta.num_x_per_x0) as u64;
            let b = (cell % meta.num_x_per_x0) as u64;
            let mut x0_rng = seed::rng(meta.seed, Stream::MaliciousOrigin, &[a]);
            let x0 = uniform_point(&mut x0_rng, &region);
            let mut layout_rng = seed::rng(meta.seed, Stream::GenuineLayout, &[a, b]);
            let genuine: Vec<Point> = (0..meta.genuine_count)
                .map(|_| uniform_point(&mut layout_rng, &region))
                .collect();
            optimize_fake_position(&meta.signal, &region, x0, &genuine, &meta.faking)
                .map(|o| o.expected_deceived)
        })
        .collect::<Result<_>>()?;

    let mut table = ThetaTable {
        n,
        theta_star: 0,
        quantiles: deciles(&samples),
        samples,
        calibration_meta: meta.clone(),
    };
    let worst = table
        .x0_means()
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    table.theta_star = worst.ceil().max(0.0) as u32;
    Ok(table)
}

pub(crate) fn uniform_point(rng: &mut seed::Rng, region: &Region) -> Point {
    let u: f64 = rng.random();
    let v: f64 = rng.random();
    region.lerp(u, v)
}

/// Upper bound `⌊n/2⌋ + θ` on the expected approvals of a malicious node when
/// at least half the network is genuine.
pub fn theorem1_bound(n: usize, theta_ceil_half: f64) -> f64 {
    (n / 2) as f64 + theta_ceil_half
}

/// Approval threshold `(k + θ)/2` for `k` active nodes.
pub fn threshold(active_count: usize, theta: f64) -> f64 {
    (active_count as f64 + theta) / 2.0
}

/// Normal approximation to the probability that a genuine node collects at
/// least `(n + θ*)/2` approvals in the first filtering round, when each of
/// the other `n₀ − 1` genuine nodes approves it independently with
/// probability `p` and every malicious node accuses it.
pub fn genuine_acceptance_prob(n: usize, n0: usize, theta_star: f64, p: f64) -> Result<f64> {
    if n0 < 2 || n0 > n {
        return Err(domain(format!("need 2 <= n0 <= n, got n0 = {n0}, n = {n}")));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(domain(format!(
            "p must lie strictly inside (0, 1), got {p}"
        )));
    }
    let tau = (n as f64 + theta_star - 2.0 * n0 as f64 * p)
        / (2.0 * (p * (1.0 - p) * (n0 - 1) as f64).sqrt());
    Ok(gaussian::normal_sf(tau))
}

/// Normal approximation to the probability that a malicious node reaches the
/// first-round threshold, given the per-genuine-node deception probabilities
/// at its chosen claim. Its approvals are `n₁ + Σ Bernoulli(pᵢ)`.
pub fn malicious_acceptance_prob(
    n: usize,
    theta_star: f64,
    n1: usize,
    deception_probs: &[f64],
) -> Result<f64> {
    if deception_probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(domain("deception probabilities must lie in [0, 1]"));
    }
    let mean = n1 as f64 + deception_probs.iter().sum::<f64>();
    let var: f64 = deception_probs.iter().map(|p| p * (1.0 - p)).sum();
    let gap = threshold(n, theta_star) - mean;
    if var == 0.0 {
        return Ok(if gap <= 0.0 { 1.0 } else { 0.0 });
    }
    Ok(gaussian::normal_sf(gap / var.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: f64 = 0.9973;

    fn test_meta(sigma_factor: f64, num_x0: usize, per: usize) -> (usize, CalibrationMeta) {
        let region = Region::square(100.0).unwrap();
        let base = SignalParams::new(1.0, 0.125, 0.0, 2.0).unwrap();
        let ss = base.ideal_received_power(region.diagonal()).unwrap() / 3.0;
        let n = 20;
        let meta = CalibrationMeta {
            signal: base.with_noise_sigma(sigma_factor * ss).unwrap(),
            region,
            faking: FakingSearchConfig::for_region(&region),
            genuine_count: n / 2,
            num_x0,
            num_x_per_x0: per,
            seed: 99,
        };
        (n, meta)
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(threshold(100, 2.0), 51.0);
        assert_eq!(threshold(101, 2.0), 51.5);
        assert!((threshold(99, 8.6786) - 53.8393).abs() < 1e-12);
    }

    #[test]
    fn malicious_bound_examples() {
        assert_eq!(theorem1_bound(100, 2.0), 52.0);
        assert_eq!(theorem1_bound(101, 2.0), 52.0);
        assert_eq!(theorem1_bound(100, 24.0), 74.0);
    }

    #[test]
    fn genuine_acceptance_examples() {
        // mpmath: tau = -2.31961830444637, 1 - Phi(tau) = 0.989819232619664
        let v = genuine_acceptance_prob(100, 52, 2.0, P).unwrap();
        assert!((v - 0.989_819_232_619_664).abs() < 1e-9);

        // n + θ* = 2 n₀ p  ⇒  τ = 0
        let p = 0.8;
        let v = genuine_acceptance_prob(100, 65, 4.0, p).unwrap();
        assert!((v - 0.5).abs() < 1e-12);

        for n0 in 52..=100 {
            let v = genuine_acceptance_prob(100, n0, 2.0, P).unwrap();
            assert!(v > 0.5 && v <= 1.0);
        }

        assert!(genuine_acceptance_prob(100, 52, 2.0, 1.0).is_err());
        assert!(genuine_acceptance_prob(100, 52, 2.0, 0.0).is_err());
        assert!(genuine_acceptance_prob(100, 1, 2.0, P).is_err());
        assert!(genuine_acceptance_prob(100, 101, 2.0, P).is_err());
    }

    #[test]
    fn malicious_acceptance_prediction() {
        // 48 colluders plus two near-certain victims sit one below threshold 51.
        let probs = [P, P, 0.0, 0.0];
        let v = malicious_acceptance_prob(100, 2.0, 48, &probs).unwrap();
        assert!(v < 0.01, "{v}");
        // mean lands just under the integer threshold: the continuous
        // approximation splits the boundary
        let v = malicious_acceptance_prob(100, 2.0, 49, &probs).unwrap();
        assert!(v > 0.3 && v < 0.7, "{v}");
        let v = malicious_acceptance_prob(100, 2.0, 50, &probs).unwrap();
        assert!(v > 0.99, "{v}");
        assert_eq!(
            malicious_acceptance_prob(100, 2.0, 51, &[0.0]).unwrap(),
            1.0
        );
        assert!(malicious_acceptance_prob(100, 2.0, 1, &[1.5]).is_err());
    }

    #[test]
    fn truthful_acceptance_value() {
        assert!((truthful_acceptance() - 0.997_300_203_936_739_8).abs() < 1e-15);
    }

    #[test]
    fn nearest_rank_deciles() {
        let samples: Vec<f64> = (1..=10).rev().map(f64::from).collect();
        let q = deciles(&samples);
        assert_eq!(q["0.1"], 1.0);
        assert_eq!(q["0.5"], 5.0);
        assert_eq!(q["0.9"], 9.0);
        let single = deciles(&[3.5]);
        assert!(single.values().all(|&v| v == 3.5));
    }

    #[test]
    fn calibration_invariants_and_reproducibility() {
        let (n, meta) = test_meta(1.0, 3, 4);
        let table = calibrate(n, &meta).unwrap();
        assert_eq!(table.samples.len(), 12);
        let qs = table.decile_schedule().unwrap();
        assert!(qs.windows(2).all(|w| w[0] <= w[1]));
        let lo = table.samples.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = table
            .samples
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(qs.iter().all(|&q| q >= lo && q <= hi));
        let worst = table
            .x0_means()
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(table.theta_star as f64 >= worst.ceil());
        assert!(table.theta_star >= 1);
        assert_eq!(deciles(&table.samples), table.quantiles);

        let again = calibrate(n, &meta).unwrap();
        assert_eq!(table, again);

        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap();
        let threaded = pool.install(|| calibrate(n, &meta)).unwrap();
        assert_eq!(
            serde_json::to_string(&table).unwrap(),
            serde_json::to_string(&threaded).unwrap()
        );
    }

    #[test]
    fn negligible_noise_single_cell() {
        let (n, meta) = test_meta(1e-6, 1, 1);
        let table = calibrate(n, &meta).unwrap();
        assert_eq!(table.theta_star, 2);
        assert!((table.samples[0] - 2.0 * 0.997_300_2).abs() < 1e-3);
    }

    #[test]
    fn calibration_errors() {
        let (_, meta) = test_meta(1.0, 1, 1);
        assert!(calibrate(3, &meta).is_err());
        let mut zero = meta.clone();
        zero.num_x0 = 0;
        assert!(calibrate(20, &zero).is_err());
    }

    #[test]
    fn cache_round_trip() {
        let (n, meta) = test_meta(1.0, 2, 2);
        let dir = tempfile::tempdir().unwrap();
        let table = load_or_calibrate(dir.path(), n, &meta).unwrap();
        let path = dir.path().join(table.file_name());
        assert!(path.exists());
        assert!(table.file_name().starts_with("theta_n20_"));
        let loaded = ThetaTable::load(&path).unwrap();
        assert_eq!(loaded, table);
        let cached = load_or_calibrate(dir.path(), n, &meta).unwrap();
        assert_eq!(cached, table);

        let mut other = meta.clone();
        other.seed += 1;
        assert_ne!(
            ThetaTable::cache_hash(n, &meta),
            ThetaTable::cache_hash(n, &other)
        );
    }

    #[test]
    fn tampered_table_is_rejected() {
        let (n, meta) = test_meta(1.0, 1, 3);
        let mut table = calibrate(n, &meta).unwrap();
        table.samples[0] += 100.0;
        let dir = tempfile::tempdir().unwrap();
        let path = table.save_to_dir(dir.path()).unwrap();
        assert!(ThetaTable::load(&path).is_err());
    }
}
