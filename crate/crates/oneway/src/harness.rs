//! Experiments: brittleness of the Pareto-optimal baseline, the average gain
//! of a trust-band profile, and backtests on price series.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use oneway_core::adaptive::{
    dominance_compare, run_adapo, AdaptiveConfig, Dominance, ProfitVector,
};
use oneway_core::profile::{
    pareto_baseline_default, trust_band_extension, Profile, DEFAULT_PARETO_DELTA,
};
use oneway_core::sequences::{split_for_prediction, worst_case_sequence};
use oneway_core::threshold::{run_ota, ThresholdFunction, ThresholdTrader};
use oneway_core::{ExecutionTrace, OnlineTrader, RateSequence, Session};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ingest::{normalize, CsvOptions};
use crate::synthetic::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub m_bound: f64,
    pub robustness: f64,
    /// The trust band is `[band_lo·p̂, band_hi·p̂)`.
    pub band_lo: f64,
    pub band_hi: f64,
    pub worst_case_step: f64,
    pub trials: usize,
    pub seed: u64,
    pub data_path: Option<PathBuf>,
    pub csv: CsvOptions,
    /// Share of a series used to derive the prediction.
    pub head_fraction: f64,
    /// Number of sequences a long series is cut into for chunked backtests.
    pub chunks: usize,
    /// Stopping width of the binary searches over targets.
    pub search_tol: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            m_bound: 100.0,
            robustness: 4.0,
            band_lo: 0.9,
            band_hi: 1.1,
            worst_case_step: 0.01,
            trials: 100,
            seed: 0,
            data_path: None,
            csv: CsvOptions::default(),
            head_fraction: 0.2,
            chunks: 20,
            search_tol: 1e-9,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.band_lo <= 1.0 && self.band_hi > 1.0) {
            bail!(
                "trust band [{}, {}) must contain 1",
                self.band_lo,
                self.band_hi
            );
        }
        if !(self.worst_case_step > 0.0) {
            bail!("worst-case step must be positive");
        }
        if self.trials == 0 {
            bail!("need at least one trial");
        }
        Ok(())
    }

    /// The trust-band profile for `prediction` with its smallest feasible
    /// middle target.
    pub fn trust_band(&self, prediction: f64) -> Result<Profile> {
        let ext = trust_band_extension(
            prediction,
            self.band_lo,
            self.band_hi,
            self.robustness,
            self.m_bound,
            self.search_tol,
        )?;
        Ok(ext.profile)
    }

    fn band(&self, prediction: f64) -> (f64, f64) {
        (self.band_lo * prediction, self.band_hi * prediction)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub y: f64,
}

/// Performance ratio as a function of the maximum rate (or of the prediction
/// error), for one algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioCurve {
    pub label: String,
    pub points: Vec<CurvePoint>,
}

impl RatioCurve {
    pub fn new(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            points: Vec::new(),
        }
    }

    pub fn push(&mut self, x: f64, y: f64) {
        self.points.push(CurvePoint { x, y });
    }

    /// The point whose `x` is closest to `x`.
    pub fn nearest(&self, x: f64) -> Option<CurvePoint> {
        self.points
            .iter()
            .copied()
            .min_by(|a, b| (a.x - x).abs().total_cmp(&(b.x - x).abs()))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w =
            csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
        w.write_record(["x", "y"])?;
        for p in &self.points {
            w.write_record([p.x.to_string(), p.y.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Ratios of `trader` on every worst-case sequence `1, …, p*, 1` with `p*` on
/// the grid `1 + k·sweep_step` up to `M` (plus `M` itself).
///
/// The ramps rise in increments of `ramp_step`, which must divide
/// `sweep_step`. Every ramp is a prefix of the longest one and traders are
/// online, so one pass over the longest ramp yields the whole curve.
pub fn ramp_curve<T: OnlineTrader>(
    label: &str,
    trader: T,
    m_bound: f64,
    sweep_step: f64,
    ramp_step: f64,
) -> Result<RatioCurve>
where
    T::Error: std::error::Error + Send + Sync + 'static,
{
    let stride = (sweep_step / ramp_step).round();
    if !(stride >= 1.0 && (stride * ramp_step - sweep_step).abs() <= 1e-9 * sweep_step) {
        bail!("ramp step {ramp_step} does not divide sweep step {sweep_step}");
    }
    let stride = stride as u64;
    let mut session = Session::new(trader);
    let mut curve = RatioCurve::new(label);
    let mut k = 0u64;
    loop {
        let p = 1.0 + k as f64 * ramp_step;
        if p >= m_bound - 1e-9 * ramp_step {
            break;
        }
        let tick = session.step(p)?;
        if k > 0 && k.is_multiple_of(stride) {
            curve.push(p, tick.state().drop_ratio());
        }
        k += 1;
    }
    let tick = session.step(m_bound)?;
    curve.push(m_bound, tick.state().drop_ratio());
    Ok(curve)
}

/// [`ramp_curve`] for a threshold function.
pub fn threshold_curve(
    label: &str,
    phi: &ThresholdFunction,
    sweep_step: f64,
    ramp_step: f64,
) -> RatioCurve {
    match ramp_curve(
        label,
        ThresholdTrader::new(phi),
        phi.m_bound(),
        sweep_step,
        ramp_step,
    ) {
        Ok(curve) => curve,
        Err(e) => panic!("threshold traders cannot fail: {e}"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BrittlenessReport {
    pub prediction: f64,
    /// Middle target of the trust-band profile.
    pub trusted_ratio: f64,
    /// Consistency of the Pareto-optimal baseline.
    pub po_consistency: f64,
    pub profile: Profile,
    pub profile_curve: RatioCurve,
    pub po_curve: RatioCurve,
}

/// Ratios of the trust-band OTA and the Pareto-optimal baseline on worst-case
/// sequences across all maximum rates.
pub fn brittleness_sweep(config: &ExperimentConfig, prediction: f64) -> Result<BrittlenessReport> {
    config.validate()?;
    let profile = config.trust_band(prediction)?;
    let phi = oneway_core::profile::decide_feasible(&profile)
        .phi
        .context("trust-band search returned an infeasible profile")?;
    let po = pareto_baseline_default(config.robustness, prediction, config.m_bound)?;
    let step = config.worst_case_step;
    Ok(BrittlenessReport {
        prediction,
        trusted_ratio: profile.targets()[profile.anchor()],
        po_consistency: po.consistency,
        profile_curve: threshold_curve("profile", &phi, step, step),
        po_curve: threshold_curve("po", &po.phi, step, step),
        profile,
    })
}

/// A prediction drawn uniformly from the range the baseline accepts.
pub fn sample_prediction(rng: &mut impl Rng, m_bound: f64) -> f64 {
    let margin = 4.0 * DEFAULT_PARETO_DELTA * m_bound;
    rng.gen_range(1.0 + margin..m_bound - margin)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImprovementTrial {
    pub index: usize,
    pub prediction: f64,
    pub peak: f64,
    pub ratio_po: f64,
    pub ratio_profile: f64,
    /// `(ratio_po − ratio_profile)/ratio_po`.
    pub improvement: f64,
}

impl ImprovementTrial {
    /// Prediction error `(p* − p̂)/p̂`.
    pub fn error(&self) -> f64 {
        (self.peak - self.prediction) / self.prediction
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImprovementReport {
    pub seed: u64,
    pub trials: Vec<ImprovementTrial>,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl ImprovementReport {
    pub fn curve(&self) -> RatioCurve {
        let mut c = RatioCurve::new("improvement");
        for t in &self.trials {
            c.push(t.error(), t.improvement);
        }
        c
    }
}

/// Relative gain of the trust-band OTA over the baseline on worst-case
/// sequences with random predictions and maximum rates inside the band.
pub fn average_improvement(config: &ExperimentConfig) -> Result<ImprovementReport> {
    config.validate()?;
    let mut rng = rng(config.seed);
    let m = config.m_bound;
    let mut trials = Vec::with_capacity(config.trials);
    for index in 0..config.trials {
        let prediction = sample_prediction(&mut rng, m);
        let (lo, hi) = config.band(prediction);
        let peak = rng.gen_range(lo.max(1.0 + config.worst_case_step)..=hi.min(m));
        let profile = config.trust_band(prediction)?;
        let phi = oneway_core::profile::decide_feasible(&profile)
            .phi
            .context("trust-band search returned an infeasible profile")?;
        let po = pareto_baseline_default(config.robustness, prediction, m)?;
        let seq = worst_case_sequence(peak, config.worst_case_step, m)?;
        let ratio_profile = run_ota(&phi, &seq).performance_ratio;
        let ratio_po = run_ota(&po.phi, &seq).performance_ratio;
        trials.push(ImprovementTrial {
            index,
            prediction,
            peak,
            ratio_po,
            ratio_profile,
            improvement: (ratio_po - ratio_profile) / ratio_po,
        });
    }
    let values = trials.iter().map(|t| t.improvement);
    let mean = values.clone().sum::<f64>() / trials.len() as f64;
    let min = values.clone().fold(f64::INFINITY, f64::min);
    let max = values.fold(f64::NEG_INFINITY, f64::max);
    Ok(ImprovementReport {
        seed: config.seed,
        trials,
        mean,
        min,
        max,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Profile,
    Po,
    Adapo,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Profile, Algorithm::Po, Algorithm::Adapo];

    pub fn label(self) -> &'static str {
        match self {
            Algorithm::Profile => "profile",
            Algorithm::Po => "po",
            Algorithm::Adapo => "adapo",
        }
    }
}

/// Runs `algo` with robustness `config.robustness` and prediction `p̂`.
pub fn run_algorithm(
    algo: Algorithm,
    config: &ExperimentConfig,
    prediction: f64,
    seq: &RateSequence,
) -> Result<ExecutionTrace> {
    let m = config.m_bound;
    Ok(match algo {
        Algorithm::Profile => {
            let profile = config.trust_band(prediction)?;
            let phi = oneway_core::profile::decide_feasible(&profile)
                .phi
                .context("trust-band search returned an infeasible profile")?;
            run_ota(&phi, seq)
        }
        Algorithm::Po => run_ota(
            &pareto_baseline_default(config.robustness, prediction, m)?.phi,
            seq,
        ),
        Algorithm::Adapo => {
            run_adapo(&AdaptiveConfig::new(config.robustness, prediction, m)?, seq)?.0
        }
    })
}

/// Ratio at each new best rate if the sequence were cut off there with a drop
/// to 1. The last point is the actual final ratio.
pub fn running_curve(label: &str, trace: &ExecutionTrace) -> RatioCurve {
    let mut curve = RatioCurve::new(label);
    let mut best = 1.0;
    for tick in &trace.ticks {
        if tick.rate > best {
            curve.push(tick.best_seen, tick.state().drop_ratio());
        }
        best = tick.best_seen;
    }
    curve
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BacktestRun {
    pub algorithm: Algorithm,
    pub final_ratio: f64,
    pub curve: RatioCurve,
    /// Profits at new best rates of at least the prediction.
    pub profits: ProfitVector,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BacktestReport {
    pub prediction: f64,
    pub tail_len: usize,
    pub runs: Vec<BacktestRun>,
    /// ADA-PO against the baseline, when both ran.
    pub adapo_vs_po: Option<Dominance>,
}

/// Derives the prediction from the head of `series` and runs each algorithm
/// on the tail.
pub fn backtest(
    config: &ExperimentConfig,
    series: &RateSequence,
    algorithms: &[Algorithm],
) -> Result<BacktestReport> {
    config.validate()?;
    let (prediction, tail) = split_for_prediction(series, config.head_fraction)?;
    if prediction <= 1.0 {
        bail!("the head of the series never rises above its minimum; no usable prediction");
    }
    let mut runs = Vec::new();
    for &algorithm in algorithms {
        let trace = run_algorithm(algorithm, config, prediction, &tail)?;
        runs.push(BacktestRun {
            algorithm,
            final_ratio: trace.performance_ratio,
            curve: running_curve(algorithm.label(), &trace),
            profits: ProfitVector::from_trace(&trace, prediction),
        });
    }
    let find = |a: Algorithm| runs.iter().find(|r| r.algorithm == a);
    let adapo_vs_po = match (find(Algorithm::Adapo), find(Algorithm::Po)) {
        (Some(a), Some(p)) => Some(dominance_compare(&a.profits, &p.profits)?),
        _ => None,
    };
    Ok(BacktestReport {
        prediction,
        tail_len: tail.len(),
        runs,
        adapo_vs_po,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChunkReport {
    pub index: usize,
    pub prediction: f64,
    /// New best rates of the tail inside the trust band.
    pub points_in_band: usize,
    /// Mean of `(ratio_po − ratio_profile)/ratio_po` over those points.
    pub mean_improvement: Option<f64>,
}

/// Cuts `raw` prices into `config.chunks` sequences, normalizes each on its
/// own and compares the trust-band OTA with the baseline inside the band.
pub fn chunked_backtest(config: &ExperimentConfig, raw: &[f64]) -> Result<Vec<ChunkReport>> {
    config.validate()?;
    if config.chunks == 0 || raw.len() < 2 * config.chunks {
        bail!(
            "{} values cannot make {} sequences",
            raw.len(),
            config.chunks
        );
    }
    let size = raw.len() / config.chunks;
    let mut out = Vec::with_capacity(config.chunks);
    for (index, chunk) in raw.chunks_exact(size).take(config.chunks).enumerate() {
        let lines: Vec<u64> = (0..chunk.len())
            .map(|i| (index * size + i + 1) as u64)
            .collect();
        let rates = normalize(chunk, &lines, config.csv.normalization, config.m_bound)?;
        let seq = RateSequence::new(rates, config.m_bound)?;
        let (prediction, tail) = split_for_prediction(&seq, config.head_fraction)?;
        if prediction <= 1.0 {
            out.push(ChunkReport {
                index,
                prediction,
                points_in_band: 0,
                mean_improvement: None,
            });
            continue;
        }
        let profile = running_curve(
            "profile",
            &run_algorithm(Algorithm::Profile, config, prediction, &tail)?,
        );
        let po = running_curve(
            "po",
            &run_algorithm(Algorithm::Po, config, prediction, &tail)?,
        );
        let (lo, hi) = config.band(prediction);
        let gains: Vec<f64> = profile
            .points
            .iter()
            .zip(&po.points)
            .filter(|(a, _)| a.x >= lo && a.x <= hi)
            .map(|(a, b)| (b.y - a.y) / b.y)
            .collect();
        out.push(ChunkReport {
            index,
            prediction,
            points_in_band: gains.len(),
            mean_improvement: (!gains.is_empty())
                .then(|| gains.iter().sum::<f64>() / gains.len() as f64),
        });
    }
    Ok(out)
}

/// Writes one CSV per curve plus `manifest.json` into `dir`.
pub fn write_outputs<S: Serialize>(
    dir: &Path,
    command: &str,
    seed: Option<u64>,
    summary: &S,
    curves: &[&RatioCurve],
) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut files = Vec::new();
    for curve in curves {
        let name = format!("{}.csv", curve.label);
        curve.write_csv(&dir.join(&name))?;
        files.push(
            serde_json::json!({ "label": curve.label, "file": name, "points": curve.points.len() }),
        );
    }
    let manifest = serde_json::json!({
        "command": command,
        "seed": seed,
        "curves": files,
        "summary": summary,
    });
    crate::formats::write_json(&dir.join("manifest.json"), &manifest)
}

/// Reads the raw values of the configured CSV column.
pub fn load_raw(config: &ExperimentConfig) -> Result<Vec<f64>> {
    let path = config.data_path.as_ref().context("no data file given")?;
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(crate::ingest::read_column(file, &config.csv)?.0)
}
