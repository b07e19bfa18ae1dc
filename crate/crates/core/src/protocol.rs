//! The two-phase verification protocol.
//!
//! In the first phase every node broadcasts its (claimed) coordinates; each
//! genuine receiver compares the RSS distance estimate against the claimed
//! distance and records an accusation or approval per sender. Malicious nodes
//! skip the test: they accuse every genuine node and approve every malicious
//! one. In the second phase the broadcast verdict matrix is filtered
//! repeatedly: any active node whose approvals from active nodes fall below
//! `(k + θ)/2`, with `k` the number of active nodes, is removed, until a pass
//! removes nobody.
//!
//! Every genuine node runs the filtering on the same broadcast matrix, so a
//! single execution stands for all of them.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::channel::{SignalParams, Verdict};
use crate::error::{domain, Error, Result};
use crate::geometry::Point;
use crate::scalar::Scalar;
use crate::seed::{self, Stream};
use crate::theta::{threshold, ThetaTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Genuine,
    Malicious,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Node<T> {
    pub id: u32,
    pub kind: NodeKind,
    pub true_position: Point<T>,
    /// Coordinates the node broadcasts; equal to `true_position` for genuine
    /// nodes.
    pub claimed_position: Point<T>,
}

impl<T: Scalar> Node<T> {
    pub fn genuine(id: u32, position: Point<T>) -> Self {
        Self {
            id,
            kind: NodeKind::Genuine,
            true_position: position,
            claimed_position: position,
        }
    }

    pub fn malicious(id: u32, true_position: Point<T>, claimed_position: Point<T>) -> Self {
        Self {
            id,
            kind: NodeKind::Malicious,
            true_position,
            claimed_position,
        }
    }

    pub fn is_genuine(&self) -> bool {
        self.kind == NodeKind::Genuine
    }
}

/// Square verdict matrix; `accuses(j, i)` is node `j`'s verdict on node `i`,
/// both given as row/column indices into [`Self::ids`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccusationMatrix {
    ids: Vec<u32>,
    cells: Vec<bool>,
}

const MAGIC: &[u8; 4] = b"ACCM";
const FORMAT_VERSION: u8 = 1;

#[derive(Serialize, Deserialize)]
struct MatrixJson {
    ids: Vec<u32>,
    rows: Vec<Vec<bool>>,
}

impl AccusationMatrix {
    /// All-approve matrix over `ids`.
    pub fn new(ids: Vec<u32>) -> Result<Self> {
        let unique: HashSet<_> = ids.iter().collect();
        if unique.len() != ids.len() {
            return Err(domain("node ids must be unique"));
        }
        let n = ids.len();
        Ok(Self {
            ids,
            cells: vec![false; n * n],
        })
    }

    /// Builds a matrix from explicit rows. The diagonal must be `false`.
    pub fn from_rows(ids: Vec<u32>, rows: &[Vec<bool>]) -> Result<Self> {
        let mut m = Self::new(ids)?;
        let n = m.len();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Decode(format!("expected {n}x{n} rows")));
        }
        for (j, row) in rows.iter().enumerate() {
            if row[j] {
                return Err(Error::Decode(format!("node at row {j} accuses itself")));
            }
            for (i, &v) in row.iter().enumerate() {
                m.cells[j * n + i] = v;
            }
        }
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn index_of(&self, id: u32) -> Option<usize> {
        self.ids.iter().position(|&x| x == id)
    }

    #[inline]
    pub fn accuses(&self, accuser: usize, accused: usize) -> bool {
        self.cells[accuser * self.len() + accused]
    }

    /// Sets a verdict. Self-accusations are ignored.
    pub fn set(&mut self, accuser: usize, accused: usize, accuse: bool) {
        if accuser != accused {
            let n = self.len();
            self.cells[accuser * n + accused] = accuse;
        }
    }

    pub fn rows(&self) -> Vec<Vec<bool>> {
        self.cells
            .chunks(self.len().max(1))
            .map(<[bool]>::to_vec)
            .take(self.len())
            .collect()
    }

    /// Compact binary form: `ACCM`, version byte, `n` as u32 LE, `n` ids as
    /// u32 LE, then the row-major verdict bits packed LSB-first.
    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.len();
        let mut out = Vec::with_capacity(9 + 4 * n + (n * n).div_ceil(8));
        out.extend_from_slice(MAGIC);
        out.push(FORMAT_VERSION);
        out.extend_from_slice(&(n as u32).to_le_bytes());
        for id in &self.ids {
            out.extend_from_slice(&id.to_le_bytes());
        }
        let mut bits = vec![0u8; (n * n).div_ceil(8)];
        for (k, _) in self.cells.iter().enumerate().filter(|(_, &v)| v) {
            bits[k / 8] |= 1 << (k % 8);
        }
        out.extend_from_slice(&bits);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let err = |m: &str| Error::Decode(m.to_owned());
        if bytes.len() < 9 || &bytes[..4] != MAGIC {
            return Err(err("missing ACCM header"));
        }
        if bytes[4] != FORMAT_VERSION {
            return Err(Error::Decode(format!("unsupported version {}", bytes[4])));
        }
        let n = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
        let ids_end = 9 + 4 * n;
        let expected = ids_end + (n * n).div_ceil(8);
        if bytes.len() != expected {
            return Err(Error::Decode(format!(
                "expected {expected} bytes for n = {n}, got {}",
                bytes.len()
            )));
        }
        let ids = bytes[9..ids_end]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let mut m = Self::new(ids)?;
        let bits = &bytes[ids_end..];
        for k in 0..n * n {
            m.cells[k] = bits[k / 8] >> (k % 8) & 1 == 1;
        }
        if (0..n).any(|j| m.cells[j * n + j]) {
            return Err(err("self-accusation on the diagonal"));
        }
        Ok(m)
    }

    /// JSON debugging form: `{"ids": [...], "rows": [[bool, ...], ...]}`.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&MatrixJson {
            ids: self.ids.clone(),
            rows: self.rows(),
        })
        .expect("matrix serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: MatrixJson = serde_json::from_str(s).map_err(|e| Error::Decode(e.to_string()))?;
        Self::from_rows(raw.ids, &raw.rows)
    }
}

/// First protocol phase under the worst-case adversary.
///
/// Genuine rows come from simulated links: receiver `j` measures the noisy
/// power over the true distance to sender `i` and tests it against the
/// distance to `i`'s claimed position. Noise for row `j` is drawn from a
/// stream derived from `(seed, j)`.
pub fn accuse_approve<T: Scalar>(
    nodes: &[Node<T>],
    params: &SignalParams<T>,
    seed: u64,
) -> Result<AccusationMatrix> {
    if nodes.len() < 2 {
        return Err(domain("at least two nodes are required"));
    }
    for (a, na) in nodes.iter().enumerate() {
        for nb in &nodes[a + 1..] {
            if na.true_position.distance_sq(&nb.true_position) <= T::zero() {
                return Err(domain(format!(
                    "nodes {} and {} share a position",
                    na.id, nb.id
                )));
            }
        }
    }
    let mut matrix = AccusationMatrix::new(nodes.iter().map(|n| n.id).collect())?;
    let sigma = params.noise_sigma();

    for (j, receiver) in nodes.iter().enumerate() {
        match receiver.kind {
            NodeKind::Malicious => {
                for (i, sender) in nodes.iter().enumerate() {
                    matrix.set(j, i, sender.is_genuine());
                }
            }
            NodeKind::Genuine => {
                let mut rng = seed::rng(seed, Stream::Channel, &[j as u64]);
                let here = receiver.true_position;
                for (i, sender) in nodes.iter().enumerate() {
                    if i == j {
                        continue;
                    }
                    let z: f64 = StandardNormal.sample(&mut rng);
                    let noise = sigma * T::lit(z);
                    let received =
                        params.noisy_received_power(sender.true_position.distance(&here), noise)?;
                    let claimed = sender.claimed_position.distance(&here);
                    let verdict = params.link_verdict(claimed, received);
                    matrix.set(j, i, verdict == Verdict::Accuse);
                }
            }
        }
    }
    Ok(matrix)
}

/// Approvals each active node receives from active rows, its own included.
/// Ids in `active` that are not in the matrix are ignored.
pub fn count_approvals(matrix: &AccusationMatrix, active: &BTreeSet<u32>) -> BTreeMap<u32, usize> {
    let mask = active_mask(matrix, active);
    let counts = approvals(matrix, &mask);
    active
        .iter()
        .filter_map(|id| matrix.index_of(*id).map(|i| (*id, counts[i])))
        .collect()
}

fn active_mask(matrix: &AccusationMatrix, active: &BTreeSet<u32>) -> Vec<bool> {
    matrix.ids().iter().map(|id| active.contains(id)).collect()
}

fn approvals(matrix: &AccusationMatrix, active: &[bool]) -> Vec<usize> {
    let n = matrix.len();
    let mut counts = vec![0usize; n];
    for j in (0..n).filter(|&j| active[j]) {
        for (r, c) in counts.iter_mut().enumerate() {
            if active[r] && !matrix.accuses(j, r) {
                *c += 1;
            }
        }
    }
    counts
}

/// One filtering pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterRound {
    /// Position in the θ schedule; always 0 for plain filtering.
    pub step: usize,
    pub theta: f64,
    /// Active nodes when the pass started.
    pub active_count: usize,
    pub threshold: f64,
    pub removed: Vec<u32>,
    /// Approval counts of `removed`, in the same order.
    pub removed_approvals: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterResult {
    pub rounds: Vec<FilterRound>,
    /// Nodes still considered genuine.
    pub final_genuine_set: BTreeSet<u32>,
    /// Nodes filtered out as malicious.
    pub final_filtered_set: BTreeSet<u32>,
}

impl FilterResult {
    pub fn rounds_in_step(&self, step: usize) -> impl Iterator<Item = &FilterRound> {
        self.rounds.iter().filter(move |r| r.step == step)
    }
}

/// Second protocol phase with a fixed allowance θ.
pub fn filter_fixpoint(matrix: &AccusationMatrix, theta: f64) -> FilterResult {
    filter_schedule(matrix, &[theta])
}

/// Runs the fixpoint once per θ in `schedule`, each on the survivors of the
/// previous step.
pub fn filter_schedule(matrix: &AccusationMatrix, schedule: &[f64]) -> FilterResult {
    let n = matrix.len();
    let mut active = vec![true; n];
    let mut rounds = Vec::new();
    for (step, &theta) in schedule.iter().enumerate() {
        loop {
            let k = active.iter().filter(|&&a| a).count();
            let thr = threshold(k, theta);
            let counts = approvals(matrix, &active);
            // simultaneous removal: decide on the current counts, then update
            let doomed: Vec<usize> = (0..n)
                .filter(|&i| active[i] && (counts[i] as f64) < thr)
                .collect();
            rounds.push(FilterRound {
                step,
                theta,
                active_count: k,
                threshold: thr,
                removed: doomed.iter().map(|&i| matrix.ids()[i]).collect(),
                removed_approvals: doomed.iter().map(|&i| counts[i]).collect(),
            });
            if doomed.is_empty() {
                break;
            }
            for i in doomed {
                active[i] = false;
            }
        }
    }
    let (kept, gone): (Vec<_>, Vec<_>) = (0..n).partition(|&i| active[i]);
    FilterResult {
        rounds,
        final_genuine_set: kept.into_iter().map(|i| matrix.ids()[i]).collect(),
        final_filtered_set: gone.into_iter().map(|i| matrix.ids()[i]).collect(),
    }
}

/// Quantile schedule: θ = 0, then the deciles θ^{0.1} … θ^{0.9}, then θ*.
pub fn quantile_schedule(table: &ThetaTable) -> Result<Vec<f64>> {
    let deciles = table
        .decile_schedule()
        .ok_or_else(|| Error::Config("theta table lacks deciles 0.1..0.9".into()))?;
    let mut schedule = Vec::with_capacity(11);
    schedule.push(0.0);
    schedule.extend(deciles);
    schedule.push(table.theta_star as f64);
    Ok(schedule)
}

/// Filtering under the escalating quantile schedule.
pub fn quantile_filter(matrix: &AccusationMatrix, table: &ThetaTable) -> Result<FilterResult> {
    Ok(filter_schedule(matrix, &quantile_schedule(table)?))
}
