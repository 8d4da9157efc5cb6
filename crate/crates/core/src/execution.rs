//! The tick-by-tick executor shared by every online trader.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::RateSequence;

/// Running state of a trader right before the next rate is revealed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraderState {
    /// Fraction of the budget exchanged so far.
    pub utilization: f64,
    /// Secondary currency accrued so far.
    pub profit: f64,
    /// Largest rate seen so far (starts at 1).
    pub best_seen: f64,
}

impl TraderState {
    pub const START: TraderState = TraderState {
        utilization: 0.0,
        profit: 0.0,
        best_seen: 1.0,
    };

    /// Profit if every remaining unit were liquidated at rate 1.
    pub fn drop_profit(&self) -> f64 {
        self.profit + 1.0 - self.utilization
    }

    /// Performance ratio if the adversary drops the rate to 1 right now.
    pub fn drop_ratio(&self) -> f64 {
        self.best_seen / self.drop_profit()
    }
}

impl Default for TraderState {
    fn default() -> Self {
        Self::START
    }
}

/// An online one-way trading policy.
pub trait OnlineTrader {
    type Error;

    /// Returns the utilization the trader wants to hold after trading at
    /// `rate`. Values below the current utilization mean "exchange nothing";
    /// values above 1 are clamped to the budget.
    fn target_utilization(
        &mut self,
        tick: usize,
        state: &TraderState,
        rate: f64,
    ) -> Result<f64, Self::Error>;
}

impl<T: OnlineTrader + ?Sized> OnlineTrader for &mut T {
    type Error = T::Error;

    fn target_utilization(
        &mut self,
        tick: usize,
        state: &TraderState,
        rate: f64,
    ) -> Result<f64, Self::Error> {
        (**self).target_utilization(tick, state, rate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub rate: f64,
    pub amount: f64,
    /// Utilization after this tick's exchange.
    pub utilization: f64,
    /// Profit after this tick's exchange.
    pub profit: f64,
    /// Largest rate seen up to and including this tick.
    pub best_seen: f64,
}

impl TickRecord {
    pub fn state(&self) -> TraderState {
        TraderState {
            utilization: self.utilization,
            profit: self.profit,
            best_seen: self.best_seen,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub ticks: Vec<TickRecord>,
    /// Budget left after the last tick, exchanged at the last rate.
    pub liquidation: f64,
    pub final_profit: f64,
    pub max_rate: f64,
    pub performance_ratio: f64,
}

impl ExecutionTrace {
    /// Total amount exchanged by the trader itself (excluding liquidation).
    pub fn traded_amount(&self) -> f64 {
        self.ticks.iter().map(|t| t.amount).sum()
    }

    /// Profit recomputed from the per-tick records.
    pub fn recomputed_profit(&self) -> f64 {
        let traded: f64 = self.ticks.iter().map(|t| t.rate * t.amount).sum();
        let last = self.ticks.last().map_or(1.0, |t| t.rate);
        traded + last * self.liquidation
    }

    /// The ratio after each tick if the adversary ended the sequence with a
    /// drop to 1 right after it.
    pub fn drop_ratios(&self) -> impl Iterator<Item = f64> + '_ {
        self.ticks.iter().map(|t| t.state().drop_ratio())
    }
}

/// Feeds rates to a trader one at a time. Useful when many sequences share a
/// prefix, such as ramps to different peaks.
pub struct Session<T> {
    trader: T,
    state: TraderState,
    ticks: Vec<TickRecord>,
}

impl<T: OnlineTrader> Session<T> {
    pub fn new(trader: T) -> Self {
        Self {
            trader,
            state: TraderState::START,
            ticks: Vec::new(),
        }
    }

    pub fn state(&self) -> TraderState {
        self.state
    }

    pub fn ticks(&self) -> &[TickRecord] {
        &self.ticks
    }

    pub fn trader(&self) -> &T {
        &self.trader
    }

    pub fn step(&mut self, rate: f64) -> Result<TickRecord, T::Error> {
        let state = &mut self.state;
        let target = self
            .trader
            .target_utilization(self.ticks.len(), state, rate)?;
        let next = if target.is_nan() {
            state.utilization
        } else {
            target.clamp(state.utilization, 1.0)
        };
        let amount = next - state.utilization;
        state.profit += rate * amount;
        state.utilization = next;
        state.best_seen = state.best_seen.max(rate);
        let record = TickRecord {
            rate,
            amount,
            utilization: state.utilization,
            profit: state.profit,
            best_seen: state.best_seen,
        };
        self.ticks.push(record);
        Ok(record)
    }

    /// Liquidates what is left at the last rate. A session that saw no rates
    /// liquidates at 1.
    pub fn finish(self) -> ExecutionTrace {
        let last = self.ticks.last().map_or(1.0, |t| t.rate);
        let liquidation = 1.0 - self.state.utilization;
        let final_profit = self.state.profit + last * liquidation;
        let max_rate = self.state.best_seen;
        ExecutionTrace {
            ticks: self.ticks,
            liquidation,
            final_profit,
            max_rate,
            performance_ratio: max_rate / final_profit,
        }
    }
}

/// Runs `trader` over `seq` and liquidates the remainder at the last rate.
pub fn execute<T: OnlineTrader>(trader: T, seq: &RateSequence) -> Result<ExecutionTrace, T::Error> {
    let mut session = Session::new(trader);
    session.ticks.reserve(seq.len());
    for &rate in seq.rates() {
        session.step(rate)?;
    }
    Ok(session.finish())
}
