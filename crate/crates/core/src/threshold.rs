//! Piecewise-exponential threshold functions and the online threshold
//! algorithm (OTA) that trades along them.
//!
//! A threshold function `Φ` maps utilization `w ∈ [0, 1]` to a reservation
//! rate. Each piece has the form `Φ(w) = C·e^{t·(w − w_start)} + 1`. Pieces may
//! touch with an upward jump, or leave a gap between them; across a gap `Φ` is
//! flat at the value where the left piece ended.

use alloc::format;
use alloc::vec::Vec;
use core::convert::Infallible;

use serde::{Deserialize, Serialize};

use crate::execution::{execute, ExecutionTrace, OnlineTrader, TraderState};
use crate::math::{bisect, exp, ln};
use crate::{Error, RateSequence, Result};

/// Slack allowed when checking ordering and monotonicity of pieces.
const SHAPE_EPS: f64 = 1e-9;

/// One exponential piece `coeff·e^{growth·(w − w_start)} + 1` on
/// `[w_start, w_end]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpSegment {
    pub w_start: f64,
    pub w_end: f64,
    pub coeff: f64,
    pub growth: f64,
}

impl ExpSegment {
    pub fn new(w_start: f64, w_end: f64, coeff: f64, growth: f64) -> Result<Self> {
        let seg = Self {
            w_start,
            w_end,
            coeff,
            growth,
        };
        seg.validate()?;
        Ok(seg)
    }

    fn validate(&self) -> Result<()> {
        let all_finite = [self.w_start, self.w_end, self.coeff, self.growth]
            .iter()
            .all(|x| x.is_finite());
        if !all_finite {
            return Err(Error::InvalidThreshold(format!(
                "non-finite segment {self:?}"
            )));
        }
        if !(self.w_start >= 0.0 && self.w_start <= self.w_end && self.w_end <= 1.0 + SHAPE_EPS) {
            return Err(Error::InvalidThreshold(format!(
                "segment bounds [{}, {}] outside [0, 1] or reversed",
                self.w_start, self.w_end
            )));
        }
        if self.coeff < 0.0 || self.growth <= 0.0 {
            return Err(Error::InvalidThreshold(format!(
                "segment needs coeff >= 0 and growth > 0, got {} and {}",
                self.coeff, self.growth
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn value(&self, w: f64) -> f64 {
        self.coeff * exp(self.growth * (w - self.w_start)) + 1.0
    }

    pub fn start_value(&self) -> f64 {
        self.coeff + 1.0
    }

    pub fn end_value(&self) -> f64 {
        self.value(self.w_end)
    }

    pub fn width(&self) -> f64 {
        self.w_end - self.w_start
    }

    /// Closed-form `∫_a^b Φ` for `w_start <= a <= b <= w_end`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        let ea = exp(self.growth * (a - self.w_start));
        let eb = exp(self.growth * (b - self.w_start));
        self.coeff / self.growth * (eb - ea) + (b - a)
    }

    /// Utilization at which the piece reaches `rate`, clamped to the piece.
    fn solve(&self, rate: f64) -> f64 {
        if self.coeff == 0.0 {
            return self.w_start;
        }
        let w = self.w_start + ln((rate - 1.0) / self.coeff) / self.growth;
        w.clamp(self.w_start, self.w_end)
    }
}

/// Result of inverting a threshold function at some rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inversion {
    pub utilization: f64,
    /// The rate exceeds every value of the function, so the whole domain is
    /// used.
    pub saturated: bool,
}

/// A non-decreasing piecewise-exponential threshold function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ThresholdRepr", into = "ThresholdRepr")]
pub struct ThresholdFunction {
    m_bound: f64,
    segments: Vec<ExpSegment>,
}

#[derive(Serialize, Deserialize)]
struct ThresholdRepr {
    m_bound: f64,
    segments: Vec<ExpSegment>,
}

impl TryFrom<ThresholdRepr> for ThresholdFunction {
    type Error = Error;

    fn try_from(repr: ThresholdRepr) -> Result<Self> {
        ThresholdFunction::new(repr.segments, repr.m_bound)
    }
}

impl From<ThresholdFunction> for ThresholdRepr {
    fn from(phi: ThresholdFunction) -> Self {
        ThresholdRepr {
            m_bound: phi.m_bound,
            segments: phi.segments,
        }
    }
}

impl ThresholdFunction {
    /// Builds a threshold function from pieces ordered by utilization. The
    /// first piece must start at 0.
    pub fn new(segments: Vec<ExpSegment>, m_bound: f64) -> Result<Self> {
        if !(m_bound > 1.0) || !m_bound.is_finite() {
            return Err(Error::Domain {
                what: "rate upper bound M",
                value: m_bound,
            });
        }
        let first = segments
            .first()
            .ok_or_else(|| Error::InvalidThreshold("no segments".into()))?;
        if first.w_start != 0.0 {
            return Err(Error::InvalidThreshold(format!(
                "domain must start at 0, starts at {}",
                first.w_start
            )));
        }
        for seg in &segments {
            seg.validate()?;
        }
        for (i, pair) in segments.windows(2).enumerate() {
            let (prev, next) = (&pair[0], &pair[1]);
            if next.w_start < prev.w_end - SHAPE_EPS {
                return Err(Error::InvalidThreshold(format!(
                    "segments {i} and {} overlap",
                    i + 1
                )));
            }
            let tol = SHAPE_EPS * prev.end_value().max(1.0);
            if next.start_value() < prev.end_value() - tol {
                return Err(Error::InvalidThreshold(format!(
                    "function decreases between segments {i} and {}",
                    i + 1
                )));
            }
        }
        Ok(Self { m_bound, segments })
    }

    pub fn m_bound(&self) -> f64 {
        self.m_bound
    }

    pub fn segments(&self) -> &[ExpSegment] {
        &self.segments
    }

    /// Right end of the utilization domain.
    pub fn domain_end(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.w_end)
    }

    /// Value at the right end of the domain.
    pub fn final_value(&self) -> f64 {
        self.segments.last().map_or(1.0, ExpSegment::end_value)
    }

    /// `Φ(w)`. Gaps and the stretch past the domain end are flat at the value
    /// where the piece to their left ended.
    pub fn eval(&self, w: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::Domain {
                what: "utilization",
                value: w,
            });
        }
        Ok(self.value_at(w))
    }

    pub(crate) fn value_at(&self, w: f64) -> f64 {
        // Last piece starting at or before w; with zero-width pieces sharing a
        // start the rightmost (largest) one wins.
        let idx = self.segments.partition_point(|s| s.w_start <= w);
        let seg = &self.segments[idx.saturating_sub(1)];
        if w <= seg.w_end {
            seg.value(w.max(seg.w_start))
        } else {
            seg.end_value()
        }
    }

    /// The largest utilization whose reservation rate does not exceed `rate`.
    ///
    /// On strictly increasing stretches this is the usual inverse. A rate equal
    /// to the value of a flat stretch maps to the stretch's right end, and a
    /// rate below `Φ(0)` maps to 0.
    pub fn invert(&self, rate: f64) -> Inversion {
        // Pieces are located by their start values: those are exact at the
        // jumps built by the feasibility walk, while end values carry rounding.
        let idx = self.segments.partition_point(|s| s.start_value() <= rate);
        let Some(seg) = idx.checked_sub(1).map(|i| &self.segments[i]) else {
            return Inversion {
                utilization: 0.0,
                saturated: false,
            };
        };
        if rate < seg.end_value() {
            return Inversion {
                utilization: seg.solve(rate),
                saturated: false,
            };
        }
        match self.segments.get(idx) {
            Some(next) => Inversion {
                utilization: next.w_start,
                saturated: false,
            },
            None => Inversion {
                utilization: self.domain_end(),
                saturated: rate > self.final_value(),
            },
        }
    }

    /// `∫_a^b Φ`, exact per piece; gaps contribute their flat value times their
    /// width.
    pub fn integral(&self, a: f64, b: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) || a > b {
            return Err(Error::Domain {
                what: "integration bounds",
                value: if a > b {
                    a - b
                } else if (0.0..=1.0).contains(&a) {
                    b
                } else {
                    a
                },
            });
        }
        Ok(self.integral_unchecked(a, b))
    }

    pub(crate) fn integral_unchecked(&self, a: f64, b: f64) -> f64 {
        let mut total = 0.0;
        for (i, seg) in self.segments.iter().enumerate() {
            let lo = a.max(seg.w_start);
            let hi = b.min(seg.w_end);
            if hi > lo {
                total += seg.integral(lo, hi);
            }
            let gap_end = self
                .segments
                .get(i + 1)
                .map_or(f64::INFINITY, |n| n.w_start);
            let lo = a.max(seg.w_end);
            let hi = b.min(gap_end);
            if hi > lo {
                total += seg.end_value() * (hi - lo);
            }
        }
        total
    }

    /// Utilization and profit of the OTA after a continuously increasing ramp
    /// from 1 up to `peak`.
    pub fn pure_ramp_state(&self, peak: f64) -> TraderState {
        let w = if peak > self.value_at(0.0) {
            self.invert(peak).utilization.min(1.0)
        } else {
            0.0
        };
        TraderState {
            utilization: w,
            profit: self.integral_unchecked(0.0, w),
            best_seen: peak.max(1.0),
        }
    }
}

/// The OTA: when the rate beats the current reservation rate, trade up to the
/// utilization the threshold function assigns to that rate.
///
/// A tie with the reservation rate does not trade unless `Φ` is flat from the
/// current utilization on; then the trader jumps across the flat stretch,
/// which is what keeps the ratio on target exactly at a breakpoint.
#[derive(Debug, Clone, Copy)]
pub struct ThresholdTrader<'a> {
    phi: &'a ThresholdFunction,
}

impl<'a> ThresholdTrader<'a> {
    pub fn new(phi: &'a ThresholdFunction) -> Self {
        Self { phi }
    }
}

impl OnlineTrader for ThresholdTrader<'_> {
    type Error = Infallible;

    fn target_utilization(
        &mut self,
        _: usize,
        state: &TraderState,
        rate: f64,
    ) -> Result<f64, Infallible> {
        // Beyond a strict improvement on `Φ(w)`, a rate equal to the value of a
        // flat stretch starting at `w` also trades, across the stretch.
        let target = self.phi.invert(rate).utilization.min(1.0);
        Ok(target.max(state.utilization))
    }
}

/// Runs the OTA defined by `phi` on `seq`.
pub fn run_ota(phi: &ThresholdFunction, seq: &RateSequence) -> ExecutionTrace {
    match execute(ThresholdTrader::new(phi), seq) {
        Ok(trace) => trace,
        Err(never) => match never {},
    }
}

/// The optimal competitive ratio `r*` without predictions: the root of
/// `r = ln((M − 1)/(r − 1))`.
pub fn optimal_competitive_ratio(m_bound: f64) -> Result<f64> {
    if !(m_bound > 2.0) || !m_bound.is_finite() {
        return Err(Error::Domain {
            what: "rate upper bound M (must exceed 2)",
            value: m_bound,
        });
    }
    let g = |r: f64| r - ln((m_bound - 1.0) / (r - 1.0));
    let hi = (ln(m_bound - 1.0) + 1.0).max(2.0);
    bisect(g, 1.0 + 1e-12, hi, 1e-13, 200)
}
