//! ADA-PO, the adaptive Pareto-optimal trader.
//!
//! Below the prediction `p̂` it is threat-based: it exchanges the least amount
//! that keeps the ratio at `r` should the rate fall to 1 right away. At rates
//! of at least `p̂` it exchanges the most it can while still guaranteeing
//! ratio `r` on every possible continuation.

use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::execution::{execute, ExecutionTrace, OnlineTrader, TraderState};
use crate::math::{bisect_last_true, exp, ln};
use crate::{optimal_competitive_ratio, Error, RateSequence, Result};

pub const DEFAULT_FIXED_POINT_TOL: f64 = 1e-10;
/// Slack for states that sit exactly on the robustness boundary.
const BOUNDARY_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveConfig {
    pub robustness: f64,
    pub prediction: f64,
    pub m_bound: f64,
    pub fixed_point_tol: f64,
}

impl AdaptiveConfig {
    pub fn new(robustness: f64, prediction: f64, m_bound: f64) -> Result<Self> {
        let config = Self {
            robustness,
            prediction,
            m_bound,
            fixed_point_tol: DEFAULT_FIXED_POINT_TOL,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_tolerance(mut self, tol: f64) -> Result<Self> {
        self.fixed_point_tol = tol;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let r_star = optimal_competitive_ratio(self.m_bound)?;
        // Allow the rounding of a caller that passes r* itself.
        if !(self.robustness >= r_star * (1.0 - 1e-12)) {
            return Err(Error::Parameter(alloc::format!(
                "robustness {} is below the optimal competitive ratio {r_star}",
                self.robustness
            )));
        }
        if !(1.0..=self.m_bound).contains(&self.prediction) {
            return Err(Error::Domain {
                what: "prediction",
                value: self.prediction,
            });
        }
        if !(self.fixed_point_tol > 0.0) {
            return Err(Error::Domain {
                what: "fixed-point tolerance",
                value: self.fixed_point_tol,
            });
        }
        Ok(())
    }
}

/// Largest utilization `w*` in `[w, 1]` reachable by exchanging at `rate` from
/// state `(w, s)` such that the rest of the budget can still guarantee ratio
/// `r` up to `M`.
///
/// On the boundary `w*` solves
/// `w* = 1 − ln((M − 1)/(r·X(w*) − 1))/r` with `X(v) = s + 1 − rate·w + v·(rate − 1)`,
/// the profit if everything left after the exchange went at rate 1. Returns 1
/// when the whole budget can be spent.
pub fn solve_phase2_fixed_point(
    r: f64,
    profit: f64,
    utilization: f64,
    rate: f64,
    m_bound: f64,
    tol: f64,
) -> Result<f64> {
    if !(rate > 1.0) {
        return Err(Error::Domain {
            what: "rate for the adaptive phase",
            value: rate,
        });
    }
    let (s, w, p) = (profit, utilization, rate);
    let slack = |v: f64| {
        let arg = r * (s + 1.0 - p * w + v * (p - 1.0)) - 1.0;
        if arg <= 0.0 {
            f64::NEG_INFINITY
        } else {
            ln(arg) + r * (1.0 - v) - ln(m_bound - 1.0)
        }
    };
    if slack(1.0) >= 0.0 {
        return Ok(1.0);
    }
    if slack(w) < -BOUNDARY_EPS {
        return Err(Error::InfeasibleState {
            utilization: w,
            profit: s,
            rate: p,
        });
    }
    // `slack` is concave, so its non-negative set inside [w, 1] is an interval
    // starting at w.
    Ok(bisect_last_true(
        |v| slack(v) >= -BOUNDARY_EPS * 1e-3,
        w,
        1.0,
        tol,
        200,
    ))
}

/// Where the prediction comes from: known upfront, or revealed by a callback
/// at some tick during the run.
pub trait PredictionSource {
    fn reveal(&mut self, tick: usize, rate: f64) -> Option<f64>;
}

impl PredictionSource for f64 {
    fn reveal(&mut self, _: usize, _: f64) -> Option<f64> {
        Some(*self)
    }
}

/// Adapts a closure `(tick, rate) -> Option<p̂>` into a [`PredictionSource`].
pub struct Deferred<F>(pub F);

impl<F: FnMut(usize, f64) -> Option<f64>> PredictionSource for Deferred<F> {
    fn reveal(&mut self, tick: usize, rate: f64) -> Option<f64> {
        (self.0)(tick, rate)
    }
}

/// The ADA-PO trader, usable with [`execute`].
pub struct AdaPo<S> {
    robustness: f64,
    m_bound: f64,
    tol: f64,
    source: S,
    prediction: Option<f64>,
}

impl<S: PredictionSource> AdaPo<S> {
    /// `config.prediction` is ignored in favour of `source`.
    pub fn with_source(config: &AdaptiveConfig, source: S) -> Self {
        Self {
            robustness: config.robustness,
            m_bound: config.m_bound,
            tol: config.fixed_point_tol,
            source,
            prediction: None,
        }
    }

    /// The prediction, once revealed.
    pub fn prediction(&self) -> Option<f64> {
        self.prediction
    }
}

impl AdaPo<f64> {
    pub fn new(config: &AdaptiveConfig) -> Self {
        Self::with_source(config, config.prediction)
    }
}

impl<S: PredictionSource> OnlineTrader for AdaPo<S> {
    type Error = Error;

    fn target_utilization(&mut self, tick: usize, state: &TraderState, rate: f64) -> Result<f64> {
        if self.prediction.is_none() {
            self.prediction = self.source.reveal(tick, rate);
        }
        let (w, s, r) = (state.utilization, state.profit, self.robustness);
        if rate <= state.best_seen || w >= 1.0 {
            return Ok(w);
        }
        match self.prediction {
            Some(p_hat) if rate >= p_hat => {
                let target = solve_phase2_fixed_point(r, s, w, rate, self.m_bound, self.tol)?;
                let reservation = r * (s + 1.0 - rate * w + target * (rate - 1.0));
                Ok(if reservation >= self.m_bound {
                    1.0
                } else {
                    target
                })
            }
            _ => Ok(((rate - r * (s + 1.0 - w * rate)) / (r * (rate - 1.0))).max(w)),
        }
    }
}

/// Profits right after each new best rate of at least `p̂`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProfitVector {
    pub entries: Vec<f64>,
}

impl ProfitVector {
    pub fn from_trace(trace: &ExecutionTrace, prediction: f64) -> Self {
        let mut best = 1.0;
        let mut entries = Vec::new();
        for tick in &trace.ticks {
            if tick.rate > best && tick.rate >= prediction {
                entries.push(tick.profit);
            }
            best = tick.best_seen;
        }
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dominance {
    Dominates,
    Dominated,
    Equal,
}

impl From<Ordering> for Dominance {
    fn from(o: Ordering) -> Self {
        match o {
            Ordering::Greater => Dominance::Dominates,
            Ordering::Less => Dominance::Dominated,
            Ordering::Equal => Dominance::Equal,
        }
    }
}

/// Lexicographic comparison, earliest entry first.
pub fn dominance_compare(a: &ProfitVector, b: &ProfitVector) -> Result<Dominance> {
    dominance_compare_tol(a, b, 0.0)
}

/// Like [`dominance_compare`], treating entries within `tol` of each other as
/// equal.
pub fn dominance_compare_tol(a: &ProfitVector, b: &ProfitVector, tol: f64) -> Result<Dominance> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    for (x, y) in a.entries.iter().zip(&b.entries) {
        if (x - y).abs() > tol {
            return Ok(x.partial_cmp(y).unwrap_or(Ordering::Equal).into());
        }
    }
    Ok(Dominance::Equal)
}

/// Runs ADA-PO with the prediction known from the start.
pub fn run_adapo(
    config: &AdaptiveConfig,
    seq: &RateSequence,
) -> Result<(ExecutionTrace, ProfitVector)> {
    config.validate()?;
    let trace = execute(AdaPo::new(config), seq)?;
    let vector = ProfitVector::from_trace(&trace, config.prediction);
    Ok((trace, vector))
}

/// Runs ADA-PO with the prediction supplied by `reveal(tick, rate)`; the
/// trader asks at every tick until it gets an answer. `config.prediction` is
/// not read.
pub fn run_adapo_deferred<F>(
    config: &AdaptiveConfig,
    seq: &RateSequence,
    reveal: F,
) -> Result<(ExecutionTrace, ProfitVector)>
where
    F: FnMut(usize, f64) -> Option<f64>,
{
    let mut trader = AdaPo::with_source(config, Deferred(reveal));
    let trace = execute(&mut trader, seq)?;
    let vector = match trader.prediction() {
        Some(p_hat) => ProfitVector::from_trace(&trace, p_hat),
        None => ProfitVector::default(),
    };
    Ok((trace, vector))
}

/// State ADA-PO reaches on a continuously rising ramp from 1 to `peak`.
pub fn pure_ramp_state(config: &AdaptiveConfig, peak: f64) -> Result<TraderState> {
    config.validate()?;
    let (r, m, p_hat) = (config.robustness, config.m_bound, config.prediction);
    // Threat-based phase: the drop-to-1 ratio is held at exactly r.
    let threat = |p: f64| {
        let w = if p > r {
            ln((p - 1.0) / (r - 1.0)) / r
        } else {
            0.0
        };
        let x = (p / r).max(1.0);
        TraderState {
            utilization: w,
            profit: x - 1.0 + w,
            best_seen: p,
        }
    };
    if peak < p_hat {
        return Ok(threat(peak.max(1.0)));
    }
    let before = threat(p_hat);
    let (w0, s0) = (before.utilization, before.profit);
    let lump = if p_hat > 1.0 {
        let w = solve_phase2_fixed_point(r, s0, w0, p_hat, m, config.fixed_point_tol)?;
        let reservation = r * (s0 + 1.0 - p_hat * w0 + w * (p_hat - 1.0));
        if reservation >= m {
            1.0
        } else {
            w
        }
    } else {
        w0
    };
    let s_lump = s0 + p_hat * (lump - w0);
    if lump >= 1.0 {
        return Ok(TraderState {
            utilization: 1.0,
            profit: s_lump,
            best_seen: peak,
        });
    }
    // Above p̂ the reservation rate follows (M − 1)·e^{−r(1 − w)} + 1.
    let w_at = |p: f64| 1.0 - ln((m - 1.0) / (p - 1.0)) / r;
    let w = if peak > 1.0 {
        w_at(peak).clamp(lump, 1.0)
    } else {
        lump
    };
    let area =
        |a: f64, b: f64| (m - 1.0) / r * (exp(-r * (1.0 - b)) - exp(-r * (1.0 - a))) + (b - a);
    Ok(TraderState {
        utilization: w,
        profit: s_lump + area(lump, w),
        best_seen: peak,
    })
}
