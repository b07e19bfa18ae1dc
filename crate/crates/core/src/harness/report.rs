use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::{io_err, Error, Result};
use crate::protocol::{count_approvals, AccusationMatrix, FilterResult};
use crate::Node;

/// One filtering pass, one row of the per-step deletion table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub step: usize,
    pub theta: f64,
    pub genuine_total: usize,
    pub malicious_total: usize,
    pub threshold: f64,
    pub genuine_deleted: usize,
    pub malicious_deleted: usize,
    /// Smallest and largest approval count among the deleted nodes.
    pub deleted_approvals: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub rounds: Vec<RoundSummary>,
    pub genuine_retained: usize,
    pub genuine_removed: usize,
    pub malicious_removed: usize,
    pub malicious_retained: usize,
    /// All malicious nodes removed and at least one genuine node kept.
    pub success: bool,
    /// Approvals per node from the full network, before any filtering.
    pub initial_genuine_approvals: Vec<usize>,
    pub initial_malicious_approvals: Vec<usize>,
}

impl TrialRecord {
    pub(crate) fn new(
        trial: usize,
        seed: u64,
        nodes: &[Node],
        matrix: &AccusationMatrix,
        result: &FilterResult,
    ) -> Self {
        let malicious: BTreeSet<u32> = nodes
            .iter()
            .filter(|n| !n.is_genuine())
            .map(|n| n.id)
            .collect();
        let is_mal = |id: &u32| malicious.contains(id);

        let mut genuine_active = nodes.len() - malicious.len();
        let mut malicious_active = malicious.len();
        let mut rounds = Vec::with_capacity(result.rounds.len());
        for r in &result.rounds {
            let m_del = r.removed.iter().filter(|id| is_mal(id)).count();
            let g_del = r.removed.len() - m_del;
            rounds.push(RoundSummary {
                step: r.step,
                theta: r.theta,
                genuine_total: genuine_active,
                malicious_total: malicious_active,
                threshold: r.threshold,
                genuine_deleted: g_del,
                malicious_deleted: m_del,
                deleted_approvals: r
                    .removed_approvals
                    .iter()
                    .min()
                    .zip(r.removed_approvals.iter().max())
                    .map(|(&a, &b)| (a, b)),
            });
            genuine_active -= g_del;
            malicious_active -= m_del;
        }

        let malicious_retained = result
            .final_genuine_set
            .iter()
            .filter(|id| is_mal(id))
            .count();
        let genuine_retained = result.final_genuine_set.len() - malicious_retained;
        let all: BTreeSet<u32> = nodes.iter().map(|n| n.id).collect();
        let approvals = count_approvals(matrix, &all);
        let (mut initial_genuine_approvals, mut initial_malicious_approvals) = (vec![], vec![]);
        for n in nodes {
            let a = approvals[&n.id];
            if n.is_genuine() {
                initial_genuine_approvals.push(a);
            } else {
                initial_malicious_approvals.push(a);
            }
        }
        Self {
            trial,
            seed,
            rounds,
            genuine_retained,
            genuine_removed: nodes.len() - malicious.len() - genuine_retained,
            malicious_removed: malicious.len() - malicious_retained,
            malicious_retained,
            success: malicious_retained == 0 && genuine_retained > 0,
            initial_genuine_approvals,
            initial_malicious_approvals,
        }
    }
}

/// Mean deletions per schedule step across trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDeletions {
    pub step: usize,
    pub theta: f64,
    pub mean_passes: f64,
    pub mean_genuine_deleted: f64,
    pub mean_malicious_deleted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub trials: usize,
    pub success_rate: f64,
    pub mean_genuine_retained: f64,
    pub mean_malicious_removed: f64,
    /// Filtering passes per trial, the final empty pass of each step included.
    pub mean_rounds: f64,
    pub deletions_by_step: Vec<StepDeletions>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub noise_sigma: f64,
    /// θ per filtering step.
    pub schedule: Vec<f64>,
    pub per_trial: Vec<TrialRecord>,
    pub aggregate: Aggregate,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = xs.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

impl ExperimentReport {
    pub fn new(
        config: ExperimentConfig,
        noise_sigma: f64,
        schedule: Vec<f64>,
        per_trial: Vec<TrialRecord>,
    ) -> Self {
        let trials = per_trial.len();
        let deletions_by_step = schedule
            .iter()
            .enumerate()
            .map(|(step, &theta)| {
                let per = |f: &dyn Fn(&RoundSummary) -> usize| {
                    mean(per_trial.iter().map(|t| {
                        t.rounds
                            .iter()
                            .filter(|r| r.step == step)
                            .map(f)
                            .sum::<usize>() as f64
                    }))
                };
                StepDeletions {
                    step,
                    theta,
                    mean_passes: per(&|_| 1),
                    mean_genuine_deleted: per(&|r| r.genuine_deleted),
                    mean_malicious_deleted: per(&|r| r.malicious_deleted),
                }
            })
            .collect();
        let aggregate = Aggregate {
            trials,
            success_rate: mean(per_trial.iter().map(|t| f64::from(u8::from(t.success)))),
            mean_genuine_retained: mean(per_trial.iter().map(|t| t.genuine_retained as f64)),
            mean_malicious_removed: mean(per_trial.iter().map(|t| t.malicious_removed as f64)),
            mean_rounds: mean(per_trial.iter().map(|t| t.rounds.len() as f64)),
            deletions_by_step,
        };
        Self {
            config,
            noise_sigma,
            schedule,
            per_trial,
            aggregate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::Config(format!("unknown report format {other:?}"))),
        }
    }
}

pub const CSV_HEADER: [&str; 8] = [
    "trial",
    "step",
    "genuine_total",
    "malicious_total",
    "threshold",
    "genuine_deleted",
    "malicious_deleted",
    "deleted_approvals",
];

fn approvals_cell(range: Option<(usize, usize)>) -> String {
    match range {
        None => "---".into(),
        Some((a, b)) if a == b => a.to_string(),
        Some((a, b)) => format!("{a}-{b}"),
    }
}

impl ExperimentReport {
    /// One row per filtering pass of every trial.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER).expect("in-memory write");
        for t in &self.per_trial {
            for r in &t.rounds {
                w.write_record([
                    t.trial.to_string(),
                    r.step.to_string(),
                    r.genuine_total.to_string(),
                    r.malicious_total.to_string(),
                    format!("{:.2}", r.threshold),
                    r.genuine_deleted.to_string(),
                    r.malicious_deleted.to_string(),
                    approvals_cell(r.deleted_approvals),
                ])
                .expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii csv")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Decode(e.to_string()))
    }

    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Csv => self.to_csv(),
            ReportFormat::Json => self.to_json(),
        }
    }
}

pub fn emit_report(report: &ExperimentReport, format: ReportFormat, path: &Path) -> Result<()> {
    fs::write(path, report.render(format)).map_err(io_err(path))
}
