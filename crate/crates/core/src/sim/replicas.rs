//! Independent replicas of the protocol, run in parallel with reproducible streams.
//!
//! Replica `i` draws from ChaCha stream `i` of the run seed and results are
//! collected in replica order, so every output is identical for any number
//! of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::scalar::Scalar;

use super::protocol::{run_protocol, FeedbackStepRecord, ProtocolSetup};

pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

/// Step records indexed as `records[replica][step]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaRun<T> {
    pub seed: u64,
    pub records: Vec<Vec<FeedbackStepRecord<T>>>,
}

/// Replicas with streams `first_stream .. first_stream + n_replicas`, run on
/// the current rayon pool.
pub fn simulate_replicas<T: Scalar + Send + Sync>(
    setup: &ProtocolSetup<T>,
    first_stream: u64,
    n_replicas: usize,
    n_steps: usize,
    seed: u64,
) -> ReplicaRun<T> {
    let records = (0..n_replicas as u64)
        .into_par_iter()
        .map(|i| run_protocol(setup, n_steps, &mut replica_rng(seed, first_stream + i)))
        .collect();
    ReplicaRun { seed, records }
}

pub fn worker_pool(workers: usize) -> Result<rayon::ThreadPool, SimError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| SimError::ThreadPool {
            workers,
            reason: e.to_string(),
        })
}

/// [`simulate_replicas`] from stream 0 on a dedicated pool; `workers = 0`
/// uses rayon's default thread count.
pub fn run_replicas<T: Scalar + Send + Sync>(
    setup: &ProtocolSetup<T>,
    n_replicas: usize,
    n_steps: usize,
    seed: u64,
    workers: usize,
) -> Result<ReplicaRun<T>, SimError> {
    Ok(worker_pool(workers)?.install(|| simulate_replicas(setup, 0, n_replicas, n_steps, seed)))
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub std_error: f64,
    pub count: usize,
}

impl MeanSe {
    pub fn from_values(values: impl Iterator<Item = f64>) -> Self {
        let mut m = Moments::default();
        values.for_each(|v| m.push(v));
        m.finish()
    }

    /// `|mean − expected|` in units of the standard error.
    pub fn z_score(&self, expected: f64) -> f64 {
        (self.mean - expected).abs() / self.std_error
    }
}

/// Replica averages for one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSummary {
    pub step: usize,
    pub e_total_before: MeanSe,
    pub e_total_after: MeanSe,
    pub dv_par: MeanSe,
    pub dt_par: MeanSe,
    pub de_par: MeanSe,
    pub de_perp: MeanSe,
    pub de_total: MeanSe,
}

/// Running sums for [`MeanSe`], merged in a fixed order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Moments {
    n: usize,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1;
        self.sum += v;
        self.sum_sq += v * v;
    }

    fn merge(&mut self, o: &Self) {
        self.n += o.n;
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
    }

    fn finish(&self) -> MeanSe {
        let m = self.n as f64;
        let mean = self.sum / m;
        let var = if self.n > 1 {
            ((self.sum_sq - m * mean * mean) / (m - 1.0)).max(0.0)
        } else {
            f64::NAN
        };
        MeanSe {
            mean,
            std_error: (var / m).sqrt(),
            count: self.n,
        }
    }
}

const SUMMARY_FIELDS: usize = 7;

/// Per-step accumulation of the [`StepSummary`] fields.
#[derive(Debug, Clone, PartialEq)]
struct StepAccumulator {
    steps: Vec<[Moments; SUMMARY_FIELDS]>,
}

impl StepAccumulator {
    fn new(n_steps: usize) -> Self {
        Self {
            steps: vec![[Moments::default(); SUMMARY_FIELDS]; n_steps],
        }
    }

    fn push<T: Scalar>(&mut self, records: &[FeedbackStepRecord<T>]) {
        for (acc, r) in self.steps.iter_mut().zip(records) {
            let values = [
                r.before.total(),
                r.after.total(),
                r.dv_par(),
                r.dt_par(),
                r.de_par(),
                r.de_perp(),
                r.de_total(),
            ];
            for (m, v) in acc.iter_mut().zip(values) {
                m.push(v.to_f64_lossy());
            }
        }
    }

    fn merge(&mut self, o: &Self) {
        for (a, b) in self.steps.iter_mut().zip(&o.steps) {
            for (x, y) in a.iter_mut().zip(b) {
                x.merge(y);
            }
        }
    }

    fn finish(&self) -> Vec<StepSummary> {
        self.steps
            .iter()
            .enumerate()
            .map(|(step, m)| StepSummary {
                step,
                e_total_before: m[0].finish(),
                e_total_after: m[1].finish(),
                dv_par: m[2].finish(),
                dt_par: m[3].finish(),
                de_par: m[4].finish(),
                de_perp: m[5].finish(),
                de_total: m[6].finish(),
            })
            .collect()
    }
}

impl<T: Scalar> ReplicaRun<T> {
    pub fn n_steps(&self) -> usize {
        self.records.first().map_or(0, Vec::len)
    }

    pub fn summarize(&self) -> Vec<StepSummary> {
        let mut acc = StepAccumulator::new(self.n_steps());
        for r in &self.records {
            acc.push(r);
        }
        acc.finish()
    }
}

/// Replicas per parallel block in [`run_summarized`].
const BLOCK: usize = 1024;

/// Result of [`run_summarized`]: summaries over all replicas and the full records of the first few.
#[derive(Debug, Clone, PartialEq)]
pub struct SummarizedRun<T> {
    pub summary: Vec<StepSummary>,
    pub kept: Vec<Vec<FeedbackStepRecord<T>>>,
}

/// Like [`simulate_replicas`] but keeps only the first `keep` trajectories,
/// so memory does not grow with the number of replicas. Block partial sums
/// are merged in replica order, which makes the summary independent of the
/// thread count.
pub fn run_summarized<T: Scalar + Send + Sync>(
    setup: &ProtocolSetup<T>,
    first_stream: u64,
    n_replicas: usize,
    n_steps: usize,
    seed: u64,
    keep: usize,
) -> SummarizedRun<T> {
    let blocks: Vec<(StepAccumulator, Vec<Vec<FeedbackStepRecord<T>>>)> = (0..n_replicas
        .div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut acc = StepAccumulator::new(n_steps);
            let mut kept = Vec::new();
            for i in b * BLOCK..((b + 1) * BLOCK).min(n_replicas) {
                let recs = run_protocol(
                    setup,
                    n_steps,
                    &mut replica_rng(seed, first_stream + i as u64),
                );
                acc.push(&recs);
                if i < keep {
                    kept.push(recs);
                }
            }
            (acc, kept)
        })
        .collect();
    let mut total = StepAccumulator::new(n_steps);
    let mut kept = Vec::new();
    for (acc, k) in blocks {
        total.merge(&acc);
        kept.extend(k);
    }
    SummarizedRun {
        summary: total.finish(),
        kept,
    }
}
