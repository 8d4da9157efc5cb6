//! Exchange-rate sequences and the adversarial ramp generator.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default increment of the simulated "continuously increasing" ramp.
pub const DEFAULT_RAMP_STEP: f64 = 0.01;

/// Ordered exchange rates in `[1, M]`.
///
/// The last rate is the one at which any remaining budget is liquidated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SequenceRepr", into = "SequenceRepr")]
pub struct RateSequence {
    rates: Vec<f64>,
    m_bound: f64,
}

#[derive(Serialize, Deserialize)]
struct SequenceRepr {
    m_bound: f64,
    rates: Vec<f64>,
}

impl TryFrom<SequenceRepr> for RateSequence {
    type Error = Error;

    fn try_from(repr: SequenceRepr) -> Result<Self> {
        RateSequence::new(repr.rates, repr.m_bound)
    }
}

impl From<RateSequence> for SequenceRepr {
    fn from(seq: RateSequence) -> Self {
        SequenceRepr {
            m_bound: seq.m_bound,
            rates: seq.rates,
        }
    }
}

impl RateSequence {
    pub fn new(rates: Vec<f64>, m_bound: f64) -> Result<Self> {
        if !(m_bound > 1.0) || !m_bound.is_finite() {
            return Err(Error::Domain {
                what: "rate upper bound M",
                value: m_bound,
            });
        }
        if rates.is_empty() {
            return Err(Error::InvalidSequence("sequence is empty".into()));
        }
        if let Some((i, &p)) = rates
            .iter()
            .enumerate()
            .find(|(_, &p)| !(1.0..=m_bound).contains(&p))
        {
            return Err(Error::InvalidSequence(format!(
                "rate {p} at index {i} is outside [1, {m_bound}]"
            )));
        }
        Ok(Self { rates, m_bound })
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn m_bound(&self) -> f64 {
        self.m_bound
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    /// Always false; kept for clippy's `len_without_is_empty`.
    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    /// The maximum rate `p*`, which is also the optimal offline profit.
    pub fn max_rate(&self) -> f64 {
        self.rates.iter().copied().fold(1.0, f64::max)
    }

    pub fn last_rate(&self) -> f64 {
        *self.rates.last().expect("sequence is non-empty")
    }

    pub fn into_rates(self) -> Vec<f64> {
        self.rates
    }
}

/// The worst-case input `1, 1+step, ..., peak, 1`: a ramp in increments of
/// `step` that always contains `peak` exactly, followed by a drop to 1.
pub fn worst_case_sequence(peak: f64, step: f64, m_bound: f64) -> Result<RateSequence> {
    if !(peak > 1.0 && peak <= m_bound) {
        return Err(Error::Domain {
            what: "worst-case peak",
            value: peak,
        });
    }
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::Domain {
            what: "ramp step",
            value: step,
        });
    }
    let mut rates = ramp_to(peak, step);
    rates.push(1.0);
    RateSequence::new(rates, m_bound)
}

/// Ramp rates `1, 1+step, ...` strictly below `peak`, then `peak` itself.
pub(crate) fn ramp_to(peak: f64, step: f64) -> Vec<f64> {
    // Rates within a billionth of a step of the peak are merged into it.
    let cutoff = peak - 1e-9 * step;
    let mut rates = Vec::with_capacity(((peak - 1.0) / step) as usize + 2);
    let mut k = 0u64;
    loop {
        let p = 1.0 + k as f64 * step;
        if p >= cutoff {
            break;
        }
        rates.push(p);
        k += 1;
    }
    rates.push(peak);
    rates
}

/// Splits `seq` into a prediction (the maximum of the first
/// `ceil(head_fraction * n)` rates) and the remaining tail.
pub fn split_for_prediction(seq: &RateSequence, head_fraction: f64) -> Result<(f64, RateSequence)> {
    if !(head_fraction > 0.0 && head_fraction < 1.0) {
        return Err(Error::Domain {
            what: "head fraction",
            value: head_fraction,
        });
    }
    let n = seq.len();
    let head = libm::ceil(head_fraction * n as f64 - 1e-9) as usize;
    if head == 0 || head >= n {
        return Err(Error::InvalidSequence(format!(
            "split of {n} rates at fraction {head_fraction} leaves an empty head or tail"
        )));
    }
    let prediction = seq.rates[..head].iter().copied().fold(1.0, f64::max);
    let tail = RateSequence::new(seq.rates[head..].to_vec(), seq.m_bound)?;
    Ok((prediction, tail))
}
