//! The two random-ensemble campaigns: where greedy lands in the distribution
//! of all `k`-subsets (histogram), and how the chosen Gramian's spectrum
//! depends on the metric (eigenvalue comparison).
//!
//! Trial `t` samples its system from `RandomSystemConfig { seed, stream: t }`,
//! so any single trial can be rerun on its own.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gramian::{build_cache, CandidateSet, GramianCache, Horizon};
use crate::io::format_f64;
use crate::linalg::{sym_eigenvalues, Tolerances};
use crate::metrics::{ExtReal, MetricKind, MetricSpec};
use crate::selection::{
    binomial, combination_index, enumerate_subset_values, solve_greedy, solve_lazy_greedy, SelectionProblem,
    DEFAULT_EXHAUSTIVE_CAP,
};
use crate::systems::{random_stable_system, RandomSystemConfig};

fn trial_cache(system: &RandomSystemConfig, trial: usize) -> Result<GramianCache> {
    let cfg = system.clone().with_stream(trial as u64);
    let model = random_stable_system(&cfg)?;
    build_cache(&model, &CandidateSet::unit_vectors(cfg.n), Horizon::Infinite)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistogramConfig {
    /// Ensemble parameters; `system.n` is also the number of candidates.
    pub system: RandomSystemConfig,
    pub k: usize,
    pub metric: MetricKind,
    pub trials: usize,
    pub bins: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl HistogramConfig {
    pub fn new(seed: u64) -> Self {
        HistogramConfig {
            system: RandomSystemConfig::new(25, seed),
            k: 7,
            metric: MetricKind::LogDet,
            trials: 20,
            bins: 50,
            tolerances: Tolerances::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.tolerances.validate()?;
        if self.k == 0 || self.k > self.system.n {
            return Err(Error::InvalidConfig(format!(
                "k must be in 1..={}, got {}",
                self.system.n, self.k
            )));
        }
        if self.trials == 0 || self.bins == 0 {
            return Err(Error::InvalidConfig("trials and bins must be positive".into()));
        }
        let count = binomial(self.system.n, self.k);
        if count > DEFAULT_EXHAUSTIVE_CAP {
            return Err(Error::CombinationCapExceeded {
                count,
                cap: DEFAULT_EXHAUSTIVE_CAP,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramTrial {
    pub trial: usize,
    pub subsets: usize,
    pub greedy_chosen: Vec<usize>,
    pub greedy_value: ExtReal,
    pub optimum_value: ExtReal,
    pub min_value: ExtReal,
    /// Share of all subsets scoring at most the greedy value, in percent.
    pub percentile: f64,
    /// `(f_greedy − f_min) / (f* − f_min)`; depends on the shift, unlike the percentile.
    pub shifted_ratio: Option<f64>,
    pub greedy_evaluations: usize,
    /// `None` when the metric does not admit lazy evaluation.
    pub lazy_evaluations: Option<usize>,
    /// Counts of `f(S) − f_min` over `bins` equal bins of `[0, f* − f_min]`.
    pub histogram: Vec<usize>,
    /// Subsets with `f(S) = −∞`, not binned.
    pub nonfinite: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramSummary {
    pub config: HistogramConfig,
    pub trials: Vec<HistogramTrial>,
    pub min_percentile: f64,
    pub median_percentile: f64,
    pub mean_percentile: f64,
}

/// Runs one trial and also returns every subset value (lexicographic order).
pub fn histogram_trial(cfg: &HistogramConfig, trial: usize) -> Result<(HistogramTrial, Vec<ExtReal>)> {
    cfg.validate()?;
    let cache = trial_cache(&cfg.system, trial)?;
    let problem = SelectionProblem::new(&cache, MetricSpec::new(cfg.metric), cfg.k, cfg.tolerances)?;
    let greedy = solve_greedy(&problem)?;
    let lazy_evaluations = if cfg.metric.is_submodular_monotone() {
        let lazy = solve_lazy_greedy(&problem)?;
        Some(lazy.evaluations)
    } else {
        None
    };
    let values = enumerate_subset_values(&problem)?;
    let greedy_index = combination_index(&greedy.sorted_chosen(), cache.len()) as usize;
    let greedy_value = values[greedy_index];
    let optimum_value = values.iter().copied().max().unwrap_or(ExtReal::NegInf);
    let min_value = values.iter().copied().min().unwrap_or(ExtReal::NegInf);
    let at_most = values.iter().filter(|&&v| v <= greedy_value).count();
    let percentile = 100.0 * at_most as f64 / values.len() as f64;

    let finite_min = values
        .iter()
        .filter_map(ExtReal::finite)
        .fold(f64::INFINITY, f64::min);
    let shifted_ratio = match (greedy_value, optimum_value) {
        (ExtReal::Finite(g), ExtReal::Finite(o)) if o > finite_min => Some((g - finite_min) / (o - finite_min)),
        _ => None,
    };
    let mut histogram = vec![0usize; cfg.bins];
    let mut nonfinite = 0;
    let span = optimum_value.finite().map_or(0.0, |o| o - finite_min);
    for v in &values {
        match v.finite() {
            Some(x) => {
                let pos = if span > 0.0 { (x - finite_min) / span } else { 0.0 };
                let bin = ((pos * cfg.bins as f64) as usize).min(cfg.bins - 1);
                histogram[bin] += 1;
            }
            None => nonfinite += 1,
        }
    }
    let record = HistogramTrial {
        trial,
        subsets: values.len(),
        greedy_chosen: greedy.chosen.clone(),
        greedy_value,
        optimum_value,
        min_value,
        percentile,
        shifted_ratio,
        greedy_evaluations: greedy.evaluations,
        lazy_evaluations,
        histogram,
        nonfinite,
    };
    Ok((record, values))
}

pub fn run_histogram(cfg: &HistogramConfig) -> Result<HistogramSummary> {
    cfg.validate()?;
    let trials = (0..cfg.trials)
        .into_par_iter()
        .map(|t| histogram_trial(cfg, t).map(|(r, _)| r))
        .collect::<Result<Vec<_>>>()?;
    let mut pct: Vec<f64> = trials.iter().map(|t| t.percentile).collect();
    pct.sort_by(f64::total_cmp);
    let median = if pct.len() % 2 == 1 {
        pct[pct.len() / 2]
    } else {
        0.5 * (pct[pct.len() / 2 - 1] + pct[pct.len() / 2])
    };
    Ok(HistogramSummary {
        config: cfg.clone(),
        min_percentile: pct[0],
        median_percentile: median,
        mean_percentile: pct.iter().sum::<f64>() / pct.len() as f64,
        trials,
    })
}

impl HistogramSummary {
    /// One row per trial.
    pub fn trials_csv(&self) -> String {
        let mut out = String::from(
            "trial,greedy_value,optimum_value,min_value,percentile,shifted_ratio,greedy_evaluations,lazy_evaluations\n",
        );
        for t in &self.trials {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                t.trial,
                ext(t.greedy_value),
                ext(t.optimum_value),
                ext(t.min_value),
                format_f64(t.percentile),
                t.shifted_ratio.map(format_f64).unwrap_or_default(),
                t.greedy_evaluations,
                t.lazy_evaluations.map(|e| e.to_string()).unwrap_or_default(),
            );
        }
        out
    }

    /// Binned shifted values: `trial,bin,lower,upper,count`, bounds relative
    /// to each trial's span `[0, f* − f_min]`.
    pub fn histogram_csv(&self) -> String {
        let mut out = String::from("trial,bin,lower,upper,count\n");
        let bins = self.config.bins as f64;
        for t in &self.trials {
            let span = match (t.optimum_value, t.min_value) {
                (ExtReal::Finite(o), ExtReal::Finite(m)) => o - m,
                _ => f64::NAN,
            };
            for (b, count) in t.histogram.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{b},{},{},{count}",
                    t.trial,
                    format_f64(span * b as f64 / bins),
                    format_f64(span * (b + 1) as f64 / bins),
                );
            }
        }
        out
    }
}

/// Every subset value of one trial: `index,value,shifted,greedy`, where
/// `greedy` is 1 on the greedy subset's row.
pub fn distribution_csv(record: &HistogramTrial, values: &[ExtReal], m: usize) -> String {
    let mut sorted = record.greedy_chosen.clone();
    sorted.sort_unstable();
    let greedy_index = combination_index(&sorted, m) as usize;
    let min = record.min_value.finite();
    let mut out = String::with_capacity(values.len() * 56);
    out.push_str("index,value,shifted,greedy\n");
    for (i, v) in values.iter().enumerate() {
        let shifted = match (v.finite(), min) {
            (Some(x), Some(lo)) => format_f64(x - lo),
            _ => String::new(),
        };
        let _ = writeln!(out, "{i},{},{shifted},{}", ext(*v), u8::from(i == greedy_index));
    }
    out
}

fn ext(v: ExtReal) -> String {
    match v {
        ExtReal::Finite(x) => format_f64(x),
        other => other.to_string(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigCompareConfig {
    pub system: RandomSystemConfig,
    pub k: usize,
    pub trials: usize,
    pub metrics: Vec<MetricKind>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl EigCompareConfig {
    pub fn new(seed: u64) -> Self {
        EigCompareConfig {
            system: RandomSystemConfig::new(25, seed),
            k: 7,
            trials: 200,
            metrics: vec![
                MetricKind::WeightedTrace,
                MetricKind::NegTraceInverse,
                MetricKind::LogDet,
                MetricKind::LambdaMin,
            ],
            tolerances: Tolerances::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.tolerances.validate()?;
        if self.k == 0 || self.k > self.system.n {
            return Err(Error::InvalidConfig(format!(
                "k must be in 1..={}, got {}",
                self.system.n, self.k
            )));
        }
        if self.trials == 0 || self.metrics.is_empty() {
            return Err(Error::InvalidConfig("trials and metrics must be non-empty".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenProfile {
    pub metric: MetricKind,
    /// Mean eigenvalues of the greedy Gramian, largest first.
    pub mean_eigenvalues: Vec<f64>,
}

impl EigenProfile {
    pub fn top(&self) -> f64 {
        self.mean_eigenvalues.first().copied().unwrap_or(f64::NAN)
    }

    pub fn bottom(&self) -> f64 {
        self.mean_eigenvalues.last().copied().unwrap_or(f64::NAN)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigCompareSummary {
    pub config: EigCompareConfig,
    pub profiles: Vec<EigenProfile>,
}

impl EigCompareSummary {
    pub fn profile(&self, metric: MetricKind) -> Option<&EigenProfile> {
        self.profiles.iter().find(|p| p.metric == metric)
    }

    /// `index` (1 = largest) then one column per metric.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index");
        for p in &self.profiles {
            out.push(',');
            out.push_str(p.metric.name());
        }
        out.push('\n');
        let n = self.config.system.n;
        for i in 0..n {
            let _ = write!(out, "{}", i + 1);
            for p in &self.profiles {
                let _ = write!(out, ",{}", format_f64(p.mean_eigenvalues[i]));
            }
            out.push('\n');
        }
        out
    }
}

/// Descending Gramian eigenvalues of the greedy choice, one vector per metric.
pub fn eig_compare_trial(cfg: &EigCompareConfig, trial: usize) -> Result<Vec<Vec<f64>>> {
    let cache = trial_cache(&cfg.system, trial)?;
    cfg.metrics
        .iter()
        .map(|&metric| {
            let problem = SelectionProblem::new(&cache, MetricSpec::new(metric), cfg.k, cfg.tolerances)?;
            let result = solve_greedy(&problem)?;
            let mut eigs = sym_eigenvalues(&cache.subset_gramian(&result.chosen)?);
            eigs.reverse();
            Ok(eigs)
        })
        .collect()
}

pub fn run_eig_compare(cfg: &EigCompareConfig) -> Result<EigCompareSummary> {
    cfg.validate()?;
    let per_trial = (0..cfg.trials)
        .into_par_iter()
        .map(|t| eig_compare_trial(cfg, t))
        .collect::<Result<Vec<_>>>()?;
    let n = cfg.system.n;
    let scale = 1.0 / cfg.trials as f64;
    let profiles = cfg
        .metrics
        .iter()
        .enumerate()
        .map(|(mi, &metric)| {
            let mut sum = vec![0.0; n];
            for trial in &per_trial {
                for (s, e) in sum.iter_mut().zip(&trial[mi]) {
                    *s += e;
                }
            }
            EigenProfile {
                metric,
                mean_eigenvalues: sum.into_iter().map(|s| s * scale).collect(),
            }
        })
        .collect();
    Ok(EigCompareSummary {
        config: cfg.clone(),
        profiles,
    })
}
