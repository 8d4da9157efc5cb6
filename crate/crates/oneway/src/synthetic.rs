//! Seeded random sequences: worst-case ramps with random peaks, geometric
//! random walks standing in for market data, and walks with spikes.

use std::path::PathBuf;

use anyhow::Result;
use oneway_core::sequences::worst_case_sequence;
use oneway_core::RateSequence;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::ingest::{ingest_csv, CsvOptions};

/// The generator behind every seeded run.
pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PeakSampler {
    Fixed { peak: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl PeakSampler {
    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        match *self {
            PeakSampler::Fixed { peak } => peak,
            PeakSampler::Uniform { lo, hi } => rng.gen_range(lo..=hi),
        }
    }
}

/// Parameters of a geometric random walk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkParams {
    pub len: usize,
    pub start: f64,
    /// Standard deviation of the log-return per step.
    pub volatility: f64,
    /// Mean log-return per step.
    pub drift: f64,
}

impl Default for WalkParams {
    /// Roughly the spread of daily BTC/USD closes.
    fn default() -> Self {
        Self {
            len: 1000,
            start: 10.0,
            volatility: 0.03,
            drift: 0.001,
        }
    }
}

/// Where a sequence comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SequenceKind {
    WorstCase {
        peak: f64,
        step: f64,
    },
    Csv {
        path: PathBuf,
        options: CsvOptions,
    },
    RandomWorstCase {
        seed: u64,
        peak: PeakSampler,
        step: f64,
    },
    RandomWalk {
        seed: u64,
        params: WalkParams,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceSpec {
    #[serde(flatten)]
    pub kind: SequenceKind,
    pub m_bound: f64,
}

impl SequenceSpec {
    pub fn build(&self) -> Result<RateSequence> {
        let m = self.m_bound;
        Ok(match &self.kind {
            SequenceKind::WorstCase { peak, step } => worst_case_sequence(*peak, *step, m)?,
            SequenceKind::Csv { path, options } => ingest_csv(path, options, m)?.sequence,
            SequenceKind::RandomWorstCase { seed, peak, step } => {
                let p = peak.sample(&mut rng(*seed)).clamp(1.0, m);
                worst_case_sequence(p, *step, m)?
            }
            SequenceKind::RandomWalk { seed, params } => {
                RateSequence::new(geometric_walk(&mut rng(*seed), params, m), m)?
            }
        })
    }
}

/// Walk in log-space, reflected off `ln 1` and `ln M` so that every rate stays
/// in `[1, M]`.
pub fn geometric_walk(rng: &mut impl Rng, params: &WalkParams, m_bound: f64) -> Vec<f64> {
    let step =
        Normal::new(params.drift, params.volatility.max(0.0)).expect("finite walk parameters");
    let top = m_bound.ln();
    let mut x = params.start.clamp(1.0, m_bound).ln();
    let mut out = Vec::with_capacity(params.len);
    for _ in 0..params.len {
        out.push(x.exp().clamp(1.0, m_bound));
        x += step.sample(rng);
        // A single reflection suffices unless the step exceeds the range.
        if x < 0.0 {
            x = -x;
        }
        if x > top {
            x = 2.0 * top - x;
        }
        x = x.clamp(0.0, top);
    }
    out
}

/// A random walk of length `len` with one or more spikes to rates in
/// `[p̂, M]`, so the sequence reaches the prediction at least once.
pub fn spiky_sequence(
    rng: &mut impl Rng,
    prediction: f64,
    m_bound: f64,
    len: usize,
) -> RateSequence {
    let params = WalkParams {
        len: len.max(2),
        start: rng.gen_range(1.0..=prediction.max(1.0)),
        volatility: rng.gen_range(0.01..0.3),
        drift: rng.gen_range(-0.02..0.05),
    };
    let mut rates = geometric_walk(rng, &params, m_bound);
    let spikes = rng.gen_range(1..=3.min(rates.len()));
    for _ in 0..spikes {
        let i = rng.gen_range(0..rates.len());
        rates[i] = rng.gen_range(prediction..=m_bound);
    }
    RateSequence::new(rates, m_bound).expect("rates generated inside [1, M]")
}

/// Uniformly random rates in `[1, M]`, including occasional exact repeats and
/// descents, for property tests.
pub fn uniform_sequence(rng: &mut impl Rng, m_bound: f64, len: usize) -> RateSequence {
    let mut rates: Vec<f64> = Vec::with_capacity(len.max(1));
    for _ in 0..len.max(1) {
        let r = match (rates.last(), rng.gen_range(0..10)) {
            (Some(&prev), 0) => prev,
            (_, 1) => 1.0,
            _ => rng.gen_range(1.0..=m_bound),
        };
        rates.push(r);
    }
    RateSequence::new(rates, m_bound).expect("rates generated inside [1, M]")
}
