//! Control energy centralities: each node is scored by a metric of the
//! Gramian `W_i` of a single actuator at that node, `A W_i + W_i Aᵀ + e_i e_iᵀ = 0`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gramian::{build_cache, CandidateSet, GramianCache, Horizon, SystemModel};
use crate::linalg::Tolerances;
use crate::metrics::{self, MetricSpec};
use crate::selection::{solve_greedy, SelectionProblem};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CentralityMeasure {
    /// Average controllability, `tr(W_i)`.
    Ac,
    /// Average control energy, `−tr(W_i⁺)`.
    Ace,
    /// Volumetric control energy, log of the product of the nonzero
    /// eigenvalues of `W_i`.
    Vce,
}

impl fmt::Display for CentralityMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CentralityMeasure::Ac => "ac",
            CentralityMeasure::Ace => "ace",
            CentralityMeasure::Vce => "vce",
        })
    }
}

impl FromStr for CentralityMeasure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ac" => Ok(CentralityMeasure::Ac),
            "ace" => Ok(CentralityMeasure::Ace),
            "vce" => Ok(CentralityMeasure::Vce),
            _ => Err(Error::InvalidConfig(format!("unknown centrality measure {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CentralityReport {
    pub measure: CentralityMeasure,
    /// One score per node, in state order.
    pub scores: Vec<f64>,
    /// Node indices (0-based) by descending score, ties to the lower index.
    pub ranking: Vec<usize>,
}

impl CentralityReport {
    /// 1-based rank of each node.
    pub fn ranks(&self) -> Vec<usize> {
        let mut ranks = vec![0; self.scores.len()];
        for (pos, &node) in self.ranking.iter().enumerate() {
            ranks[node] = pos + 1;
        }
        ranks
    }
}

pub fn centrality(model: &SystemModel, measure: CentralityMeasure) -> Result<CentralityReport> {
    model.require_stable()?;
    let cache = build_cache(model, &CandidateSet::unit_vectors(model.dim()), Horizon::Infinite)?;
    centrality_from_cache(&cache, measure, model.tolerances())
}

/// Scores from single-node Gramians already in `cache` (candidate `i` must be `e_i`).
pub fn centrality_from_cache(cache: &GramianCache, measure: CentralityMeasure, tol: &Tolerances) -> Result<CentralityReport> {
    let scores = cache
        .candidates()
        .iter()
        .map(|w| match measure {
            CentralityMeasure::Ac => w.trace(),
            CentralityMeasure::Ace => metrics::neg_trace_pinv(w, tol),
            CentralityMeasure::Vce => metrics::log_prod_nonzero_eig(w, tol).to_f64(),
        })
        .collect::<Vec<f64>>();
    let mut ranking: Vec<usize> = (0..scores.len()).collect();
    ranking.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    Ok(CentralityReport {
        measure,
        scores,
        ranking,
    })
}

/// Greedy selection order over the node actuators `e_1 … e_n`, read as a
/// conditional centrality ranking: each pick is the most central node given
/// the nodes already actuated.
pub fn greedy_as_centrality(model: &SystemModel, metric: MetricSpec, k: usize) -> Result<Vec<usize>> {
    let cache = build_cache(model, &CandidateSet::unit_vectors(model.dim()), Horizon::Infinite)?;
    let problem = SelectionProblem::new(&cache, metric, k, *model.tolerances())?;
    Ok(solve_greedy(&problem)?.chosen)
}
