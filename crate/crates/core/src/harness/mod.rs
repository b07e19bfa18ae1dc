//! Experiment orchestration: deployments, trials, aggregate reports.

mod config;
mod presets;
mod report;

use std::path::Path;

use rayon::prelude::*;

pub use config::{
    compute_noise_scale, default_region, CalibrationSpec, ExperimentConfig, FilterMode, NoiseMode,
    SignalSpec, ThetaSource,
};
pub use presets::{preset, PRESETS};
pub use report::{
    emit_report, Aggregate, ExperimentReport, ReportFormat, RoundSummary, StepDeletions,
    TrialRecord,
};

use crate::adversary::optimize_fake_position;
use crate::error::Result;
use crate::protocol::{accuse_approve, filter_fixpoint, filter_schedule, quantile_schedule};
use crate::seed::{self, Stream};
use crate::theta::{self, uniform_point, ThetaTable};
use crate::{Node, Point};

/// Places `n0` genuine nodes (ids `0..n0`) and `n − n0` malicious nodes (ids
/// `n0..n`) uniformly on the region; each malicious node claims its optimal
/// fake position against the genuine layout.
pub fn deploy(config: &ExperimentConfig, seed: u64) -> Result<Vec<Node>> {
    config.validate()?;
    let params = config.signal_params()?;
    let faking = config.faking();
    let mut rng = seed::rng(seed, Stream::Deployment, &[]);
    let positions: Vec<Point> = (0..config.n)
        .map(|_| uniform_point(&mut rng, &config.region))
        .collect();
    let genuine = &positions[..config.n0];

    let mut nodes: Vec<Node> = genuine
        .iter()
        .enumerate()
        .map(|(i, &p)| Node::genuine(i as u32, p))
        .collect();
    for (i, &p) in positions.iter().enumerate().skip(config.n0) {
        let fake = optimize_fake_position(&params, &config.region, p, genuine, &faking)?;
        nodes.push(Node::malicious(i as u32, p, fake.fake_position));
    }
    Ok(nodes)
}

/// The θ values the configured filtering will use.
#[derive(Debug, Clone, PartialEq)]
pub enum ThetaPlan {
    Fixed(f64),
    Table(ThetaTable),
}

impl ThetaPlan {
    /// Filtering schedule: `[θ*]` for standard mode, eleven steps for quantile.
    pub fn schedule(&self, mode: FilterMode) -> Result<Vec<f64>> {
        match (self, mode) {
            (ThetaPlan::Fixed(t), FilterMode::Standard) => Ok(vec![*t]),
            (ThetaPlan::Fixed(_), FilterMode::Quantile) => Err(crate::Error::Config(
                "quantile filtering needs a theta table".into(),
            )),
            (ThetaPlan::Table(t), FilterMode::Standard) => Ok(vec![t.theta_star as f64]),
            (ThetaPlan::Table(t), FilterMode::Quantile) => quantile_schedule(t),
        }
    }
}

/// Resolves the θ source. With `cache` set, recalibration goes through the
/// on-disk cache.
pub fn resolve_theta(config: &ExperimentConfig, cache: Option<&Path>) -> Result<ThetaPlan> {
    Ok(match &config.theta_source {
        ThetaSource::Fixed(t) => ThetaPlan::Fixed(*t),
        ThetaSource::Path(p) => ThetaPlan::Table(ThetaTable::load(p)?),
        ThetaSource::Recalibrate => {
            let meta = config.calibration_meta()?;
            ThetaPlan::Table(match cache {
                Some(dir) => theta::load_or_calibrate(dir, config.n, &meta)?,
                None => theta::calibrate(config.n, &meta)?,
            })
        }
    })
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let plan = resolve_theta(config, None)?;
    run_experiment_with(config, &plan)
}

/// Runs every trial with the given θ plan. Trials run in parallel; each
/// derives its own seed, so the report does not depend on the worker count.
pub fn run_experiment_with(
    config: &ExperimentConfig,
    plan: &ThetaPlan,
) -> Result<ExperimentReport> {
    config.validate()?;
    let schedule = plan.schedule(config.filter_mode)?;
    let params = config.signal_params()?;
    let per_trial = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let trial_seed = seed::derive(config.seed, Stream::Trial, &[t as u64]);
            let nodes = deploy(config, trial_seed)?;
            let matrix = accuse_approve(&nodes, &params, trial_seed)?;
            let result = if schedule.len() == 1 {
                filter_fixpoint(&matrix, schedule[0])
            } else {
                filter_schedule(&matrix, &schedule)
            };
            Ok(TrialRecord::new(t, trial_seed, &nodes, &matrix, &result))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentReport::new(
        config.clone(),
        params.noise_sigma(),
        schedule,
        per_trial,
    ))
}
