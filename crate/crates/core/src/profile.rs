//! Performance profiles: step functions that bound the competitive ratio on
//! each interval of possible maximum rates.
//!
//! [`decide_feasible`] walks the intervals left to right, spending the least
//! budget that keeps every target ratio, and either proves the profile
//! unattainable or returns the threshold function of an online algorithm that
//! respects it.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math::{bisect_first_true, ln};
use crate::threshold::{ExpSegment, ThresholdFunction};
use crate::{optimal_competitive_ratio, Error, Result};

/// Below this, a reservation rate of `1 + ε` would have to be guaranteed,
/// which no online algorithm can do.
const LOG_GUARD: f64 = 1e-12;
/// Slack on the final budget check.
const BUDGET_EPS: f64 = 1e-12;
/// Halvings allowed in every binary search over targets.
pub const SEARCH_ITERATIONS: usize = 60;
/// Default width of the degenerate prediction interval, relative to `M`.
pub const DEFAULT_PARETO_DELTA: f64 = 1e-6;

/// A step function `F` over a partition `1 = q_1 < … < q_{l+1} = M`, mapping
/// each interval `[q_i, q_{i+1})` to the target ratio `t_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProfileRepr", into = "ProfileRepr")]
pub struct Profile {
    m_bound: f64,
    prediction: f64,
    breakpoints: Vec<f64>,
    targets: Vec<f64>,
    anchor: usize,
}

#[derive(Serialize, Deserialize)]
struct ProfileRepr {
    m_bound: f64,
    prediction: f64,
    breakpoints: Vec<f64>,
    targets: Vec<f64>,
}

impl TryFrom<ProfileRepr> for Profile {
    type Error = Error;

    fn try_from(r: ProfileRepr) -> Result<Self> {
        Profile::new(r.breakpoints, r.targets, r.prediction, r.m_bound)
    }
}

impl From<Profile> for ProfileRepr {
    fn from(p: Profile) -> Self {
        ProfileRepr {
            m_bound: p.m_bound,
            prediction: p.prediction,
            breakpoints: p.breakpoints,
            targets: p.targets,
        }
    }
}

impl Profile {
    /// Validates the partition and requires the targets to be unimodal around
    /// the interval holding `prediction`.
    pub fn new(
        breakpoints: Vec<f64>,
        targets: Vec<f64>,
        prediction: f64,
        m_bound: f64,
    ) -> Result<Self> {
        let profile = Self::unchecked_shape(breakpoints, targets, prediction, m_bound)?;
        let a = profile.anchor;
        let t = &profile.targets;
        let falls = t[..=a].windows(2).all(|w| w[0] >= w[1]);
        let rises = t[a..].windows(2).all(|w| w[0] <= w[1]);
        if !(falls && rises) {
            return Err(Error::InvalidProfile(format!(
                "targets {t:?} are not unimodal around interval {a}"
            )));
        }
        Ok(profile)
    }

    /// Same as [`Profile::new`] without the unimodality requirement. Used for
    /// intermediate profiles of searches, where only feasibility matters.
    fn unchecked_shape(
        breakpoints: Vec<f64>,
        targets: Vec<f64>,
        prediction: f64,
        m_bound: f64,
    ) -> Result<Self> {
        if !(m_bound > 1.0) || !m_bound.is_finite() {
            return Err(Error::Domain {
                what: "rate upper bound M",
                value: m_bound,
            });
        }
        if breakpoints.len() < 2 || targets.len() + 1 != breakpoints.len() {
            return Err(Error::InvalidProfile(format!(
                "{} breakpoints cannot carry {} targets",
                breakpoints.len(),
                targets.len()
            )));
        }
        if breakpoints[0] != 1.0 || *breakpoints.last().unwrap() != m_bound {
            return Err(Error::InvalidProfile(format!(
                "partition must run from 1 to {m_bound}, got {breakpoints:?}"
            )));
        }
        if !breakpoints.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidProfile(format!(
                "breakpoints must increase strictly: {breakpoints:?}"
            )));
        }
        if let Some(bad) = targets.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            return Err(Error::InvalidProfile(format!(
                "target {bad} is not a positive ratio"
            )));
        }
        if !(1.0..=m_bound).contains(&prediction) {
            return Err(Error::Domain {
                what: "prediction",
                value: prediction,
            });
        }
        let anchor = interval_index(&breakpoints, prediction);
        Ok(Self {
            m_bound,
            prediction,
            breakpoints,
            targets,
            anchor,
        })
    }

    /// The experiment profile `[1, lo·p̂) → r`, `[lo·p̂, hi·p̂) → trusted`,
    /// `[hi·p̂, M] → r`. A side of the band that reaches past 1 or `M` is cut
    /// off, dropping the outer interval on that side.
    pub fn trust_band(
        prediction: f64,
        lo: f64,
        hi: f64,
        robustness: f64,
        trusted: f64,
        m_bound: f64,
    ) -> Result<Self> {
        if !(lo <= 1.0 && 1.0 < hi) {
            return Err(Error::InvalidProfile(format!(
                "trust band [{lo}, {hi}) must contain the prediction"
            )));
        }
        if !(1.0 <= prediction && prediction < m_bound) {
            return Err(Error::Domain {
                what: "prediction for the trust band",
                value: prediction,
            });
        }
        let (q2, q3) = (lo * prediction, hi * prediction);
        let mut breakpoints = vec![1.0];
        let mut targets = Vec::with_capacity(3);
        if q2 > 1.0 {
            breakpoints.push(q2);
            targets.push(robustness);
        }
        targets.push(trusted);
        if q3 < m_bound {
            breakpoints.push(q3);
            targets.push(robustness);
        }
        breakpoints.push(m_bound);
        Self::new(breakpoints, targets, prediction, m_bound)
    }

    pub fn m_bound(&self) -> f64 {
        self.m_bound
    }

    pub fn prediction(&self) -> f64 {
        self.prediction
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// Number of intervals.
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Zero-based index of the interval holding the prediction.
    pub fn anchor(&self) -> usize {
        self.anchor
    }

    /// Index of the interval `[q_i, q_{i+1})` holding `rate`; `M` belongs to
    /// the last interval.
    pub fn interval_of(&self, rate: f64) -> usize {
        interval_index(&self.breakpoints, rate)
    }

    /// `F(rate)`.
    pub fn target_at(&self, rate: f64) -> f64 {
        self.targets[self.interval_of(rate)]
    }

    /// `G_a`: every target multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let targets = self.targets.iter().map(|t| t * factor).collect();
        self.with_targets(targets)
    }

    fn with_targets(&self, targets: Vec<f64>) -> Self {
        Self {
            targets,
            ..self.clone()
        }
    }
}

fn interval_index(breakpoints: &[f64], rate: f64) -> usize {
    let intervals = breakpoints.len() - 1;
    breakpoints[1..intervals].partition_point(|&q| q <= rate)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Feasible,
    Infeasible,
}

/// Why a profile was found infeasible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InfeasibilityCause {
    /// Interval `interval` asks for a ratio too close to 1 for any online
    /// algorithm to guarantee from the state it is reached in.
    TargetTooSmall { interval: usize },
    /// The budget ran out while covering interval `interval`.
    BudgetExceeded { interval: usize, utilization: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityResult {
    pub verdict: Verdict,
    pub cause: Option<InfeasibilityCause>,
    /// Present iff the profile is feasible.
    pub phi: Option<ThresholdFunction>,
    /// `w_1, w_2, …`: utilization when each breakpoint is reached. Shorter than
    /// `l + 1` if the walk stopped early.
    pub utilizations: Vec<f64>,
    /// `w_i′` for intervals where the reservation rate fell below `q_i` and
    /// utilization had to jump at `q_i`.
    pub adjusted_starts: Vec<Option<f64>>,
    /// Worst-case profit `s_i` banked when each breakpoint is reached.
    pub worst_case_profits: Vec<f64>,
}

impl FeasibilityResult {
    pub fn is_feasible(&self) -> bool {
        self.verdict == Verdict::Feasible
    }

    /// Utilization after the last interval.
    pub fn final_utilization(&self) -> f64 {
        *self.utilizations.last().unwrap_or(&0.0)
    }
}

/// Decides whether some online algorithm respects `profile` and, if so,
/// synthesizes its threshold function. Runs in `O(l)`.
pub fn decide_feasible(profile: &Profile) -> FeasibilityResult {
    let q = &profile.breakpoints;
    let mut w = 0.0;
    let mut s = 0.0;
    let mut segments = Vec::with_capacity(profile.len());
    let mut utilizations = vec![0.0];
    let mut adjusted_starts = Vec::with_capacity(profile.len());
    let mut profits = vec![0.0];
    let mut cause = None;

    for (i, &t) in profile.targets.iter().enumerate() {
        let (q_lo, q_hi) = (q[i], q[i + 1]);
        if t <= 1.0 {
            cause = Some(InfeasibilityCause::TargetTooSmall { interval: i });
            break;
        }
        let rho = t * (s + 1.0 - w);
        // Start of this interval's exponential piece and its value there.
        let (start, start_value) = if rho >= q_lo {
            adjusted_starts.push(None);
            (w, rho)
        } else {
            // Jump at q_lo to the utilization that makes q_lo the reservation
            // rate; Φ is flat at q_lo across the jump.
            let jumped = w + (q_lo - rho) / (t * (q_lo - 1.0));
            s += q_lo * (jumped - w);
            adjusted_starts.push(Some(jumped));
            (jumped, q_lo)
        };
        let coeff = start_value - 1.0;
        if coeff <= LOG_GUARD {
            cause = Some(InfeasibilityCause::TargetTooSmall { interval: i });
            break;
        }
        if start_value >= q_hi {
            // The reservation rate already exceeds the interval: nothing to
            // spend here. A zero-width piece keeps Φ(w_{i+1}) = q_{i+1}.
            segments.push(ExpSegment {
                w_start: start,
                w_end: start,
                coeff: q_hi - 1.0,
                growth: t,
            });
            w = start;
        } else {
            let end = start + ln((q_hi - 1.0) / coeff) / t;
            segments.push(ExpSegment {
                w_start: start,
                w_end: end,
                coeff,
                growth: t,
            });
            s += (q_hi - 1.0 - coeff) / t + (end - start);
            w = end;
        }
        utilizations.push(w);
        profits.push(s);
        if w > 1.0 + BUDGET_EPS {
            cause = Some(InfeasibilityCause::BudgetExceeded {
                interval: i,
                utilization: w,
            });
            break;
        }
    }

    let feasible = cause.is_none();
    let phi = if feasible {
        // Pieces are built to be ordered and monotone; rounding can leave the
        // last end a hair above 1.
        if let Some(last) = segments.last_mut() {
            last.w_end = last.w_end.min(1.0);
            last.w_start = last.w_start.min(last.w_end);
        }
        ThresholdFunction::new(segments, profile.m_bound).ok()
    } else {
        None
    };
    FeasibilityResult {
        verdict: if phi.is_some() {
            Verdict::Feasible
        } else {
            Verdict::Infeasible
        },
        cause,
        phi,
        utilizations,
        adjusted_starts,
        worst_case_profits: profits,
    }
}

/// Outcome of a binary search over target scalings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Extension {
    /// Smallest feasible multiplier found (upper end of the final bracket).
    pub factor: f64,
    /// The profile with the multiplier applied.
    pub profile: Profile,
    pub result: FeasibilityResult,
}

impl Extension {
    /// `(c, r)`: the ratio promised on the prediction's interval and the worst
    /// ratio promised anywhere.
    pub fn consistency_robustness(&self) -> (f64, f64) {
        consistency_robustness(&self.profile)
    }
}

/// `(F(p̂), max F)` of a feasible profile.
pub fn consistency_robustness(profile: &Profile) -> (f64, f64) {
    let c = profile.targets[profile.anchor];
    let r = profile
        .targets
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    (c, r)
}

/// The smallest `a` (within `tol`) for which `G_a` is feasible.
pub fn best_extension(profile: &Profile, tol: f64) -> Result<Extension> {
    if !(tol > 0.0) {
        return Err(Error::Domain {
            what: "search tolerance",
            value: tol,
        });
    }
    let min_target = profile
        .targets
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let hi = (profile.m_bound / min_target).max(tol);
    let feasible = |a: f64| decide_feasible(&profile.scaled(a)).is_feasible();
    let factor = if feasible(tol) {
        tol
    } else {
        bisect_first_true(feasible, tol, hi, tol, SEARCH_ITERATIONS)
    };
    let scaled = profile.scaled(factor);
    let result = decide_feasible(&scaled);
    Ok(Extension {
        factor,
        profile: scaled,
        result,
    })
}

/// Rescales only the target of `interval`, searching the multiplier in
/// `[lo, hi]` for the smallest feasible one. `hi` must be feasible.
pub fn best_interval_extension(
    profile: &Profile,
    interval: usize,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<Extension> {
    if interval >= profile.len() {
        return Err(Error::InvalidProfile(format!(
            "interval {interval} out of {} intervals",
            profile.len()
        )));
    }
    if !(tol > 0.0 && 0.0 < lo && lo <= hi) {
        return Err(Error::Domain {
            what: "search bracket",
            value: hi - lo,
        });
    }
    let at = |a: f64| {
        let mut targets = profile.targets.clone();
        targets[interval] *= a;
        profile.with_targets(targets)
    };
    let feasible = |a: f64| decide_feasible(&at(a)).is_feasible();
    if !feasible(hi) {
        return Err(Error::Parameter(format!(
            "interval {interval} is infeasible even at multiplier {hi}"
        )));
    }
    let factor = if feasible(lo) {
        lo
    } else {
        bisect_first_true(feasible, lo, hi, tol, SEARCH_ITERATIONS)
    };
    let scaled = at(factor);
    let result = decide_feasible(&scaled);
    Ok(Extension {
        factor,
        profile: scaled,
        result,
    })
}

/// The trust-band profile with the smallest middle target that keeps
/// robustness `r` outside `[lo·p̂, hi·p̂)`.
pub fn trust_band_extension(
    prediction: f64,
    lo: f64,
    hi: f64,
    robustness: f64,
    m_bound: f64,
    tol: f64,
) -> Result<Extension> {
    let base = Profile::trust_band(prediction, lo, hi, robustness, 1.0, m_bound)?;
    best_interval_extension(&base, base.anchor(), 1.0, robustness, tol)
}

/// The Pareto-optimal threshold algorithm for robustness `r` and prediction
/// `p̂`, built as a three-interval profile `(r, c, r)` with a prediction
/// interval of width `delta`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParetoBaseline {
    /// The consistency `c(r)` found by the search.
    pub consistency: f64,
    pub robustness: f64,
    pub profile: Profile,
    pub phi: ThresholdFunction,
}

pub fn pareto_baseline(
    r: f64,
    prediction: f64,
    m_bound: f64,
    delta: f64,
) -> Result<ParetoBaseline> {
    pareto_baseline_with_tol(r, prediction, m_bound, delta, 0.0)
}

/// [`pareto_baseline`] with an explicit stopping width for the search; `0`
/// runs all iterations.
pub fn pareto_baseline_with_tol(
    r: f64,
    prediction: f64,
    m_bound: f64,
    delta: f64,
    tol: f64,
) -> Result<ParetoBaseline> {
    if !(delta > 0.0) || !(1.0 < prediction && prediction + delta < m_bound) {
        return Err(Error::Domain {
            what: "prediction interval",
            value: prediction,
        });
    }
    let profile = Profile::new(
        vec![1.0, prediction, prediction + delta, m_bound],
        vec![r, r, r],
        prediction,
        m_bound,
    )?;
    let with_c = |c: f64| profile.with_targets(vec![r, c, r]);
    let feasible = |c: f64| decide_feasible(&with_c(c)).is_feasible();
    if !feasible(r) {
        let r_star = optimal_competitive_ratio(m_bound).unwrap_or(f64::NAN);
        return Err(Error::Parameter(format!(
            "robustness {r} is unattainable (optimal competitive ratio is {r_star})"
        )));
    }
    let c = bisect_first_true(feasible, 1.0, r, tol, SEARCH_ITERATIONS);
    let profile = with_c(c);
    let phi = decide_feasible(&profile)
        .phi
        .ok_or_else(|| Error::Numeric("search ended on an infeasible profile".into()))?;
    Ok(ParetoBaseline {
        consistency: c,
        robustness: r,
        profile,
        phi,
    })
}

/// [`pareto_baseline`] with the default interval width `1e-6·M`.
pub fn pareto_baseline_default(r: f64, prediction: f64, m_bound: f64) -> Result<ParetoBaseline> {
    pareto_baseline(r, prediction, m_bound, DEFAULT_PARETO_DELTA * m_bound)
}
