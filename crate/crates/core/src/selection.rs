//! Choosing `k` of `M` candidate actuators to maximize a Gramian metric.
//!
//! All algorithms work on a precomputed [`GramianCache`]: the Gramian of a
//! subset is the base Gramian plus the candidate Gramians, so a marginal gain
//! costs one matrix addition and one metric evaluation.
//!
//! Ties are always broken toward the lowest candidate index (and, for
//! exhaustive search, the lexicographically smallest index set). Parallel
//! scans collect results in candidate order before reducing, so the output
//! does not depend on the thread count.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gramian::GramianCache;
use crate::linalg::{DenseMatrix, Tolerances};
use crate::metrics::{ExtReal, MetricKind, MetricSpec, MetricValue, SingularPolicy};

/// Default limit on the number of subsets exhaustive search may visit.
pub const DEFAULT_EXHAUSTIVE_CAP: u128 = 1_000_000;

/// Absolute slack used by the property probes.
pub const PROPERTY_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Modular,
    Greedy,
    Lazy,
    Exhaustive,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Modular => "modular",
            Algorithm::Greedy => "greedy",
            Algorithm::Lazy => "lazy",
            Algorithm::Exhaustive => "exhaustive",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "modular" => Ok(Algorithm::Modular),
            "greedy" => Ok(Algorithm::Greedy),
            "lazy" => Ok(Algorithm::Lazy),
            "exhaustive" => Ok(Algorithm::Exhaustive),
            _ => Err(Error::InvalidConfig(format!("unknown algorithm {s:?}"))),
        }
    }
}

/// Maximize `f(S)` over `|S| = k`.
#[derive(Clone, Debug)]
pub struct SelectionProblem<'a> {
    cache: &'a GramianCache,
    metric: MetricSpec,
    k: usize,
    tol: Tolerances,
    exhaustive_cap: u128,
}

impl<'a> SelectionProblem<'a> {
    pub fn new(cache: &'a GramianCache, metric: MetricSpec, k: usize, tol: Tolerances) -> Result<Self> {
        tol.validate()?;
        if k == 0 || k > cache.len() {
            return Err(Error::InvalidConfig(format!(
                "k must be in 1..={}, got {k}",
                cache.len()
            )));
        }
        if let Some(c) = metric.weight() {
            if c.ncols() != cache.dim() {
                return Err(Error::DimensionMismatch(format!(
                    "weight has {} columns, state dimension is {}",
                    c.ncols(),
                    cache.dim()
                )));
            }
        }
        Ok(Self {
            cache,
            metric,
            k,
            tol,
            exhaustive_cap: DEFAULT_EXHAUSTIVE_CAP,
        })
    }

    pub fn with_exhaustive_cap(mut self, cap: u128) -> Self {
        self.exhaustive_cap = cap;
        self
    }

    /// Same cache and tolerances, different metric or budget.
    pub fn with_metric(&self, metric: MetricSpec, k: usize) -> Result<Self> {
        Ok(Self::new(self.cache, metric, k, self.tol)?.with_exhaustive_cap(self.exhaustive_cap))
    }

    pub fn cache(&self) -> &'a GramianCache {
        self.cache
    }

    pub fn metric(&self) -> &MetricSpec {
        &self.metric
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn candidate_count(&self) -> usize {
        self.cache.len()
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    pub fn evaluate(&self, w: &DenseMatrix) -> Result<MetricValue> {
        self.metric.evaluate(w, &self.tol)
    }

    /// `f(S)`.
    pub fn value_of(&self, subset: &[usize]) -> Result<MetricValue> {
        self.evaluate(&self.cache.subset_gramian(subset)?)
    }

    /// `f(S ∪ {s}) − f(S)`.
    pub fn marginal_gain(&self, subset: &[usize], s: usize) -> Result<ExtReal> {
        let base = self.value_of(subset)?;
        let mut with = subset.to_vec();
        with.push(s);
        Ok(self.value_of(&with)?.value.sub(base.value))
    }
}

/// Bound on greedy's relative shortfall:
/// `(f* − f_greedy) / (f* − f(∅)) ≤ ((k−1)/k)^k ≤ 1/e`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCertificate {
    pub f_empty: ExtReal,
    pub f_greedy: ExtReal,
    pub ratio_bound: f64,
    /// The bound only holds for monotone submodular metrics with finite `f(∅)`.
    pub applicable: bool,
}

impl BoundCertificate {
    /// Realized `(f* − f_greedy) / (f* − f(∅))`, if all terms are finite and
    /// `f* > f(∅)`.
    pub fn realized_ratio(&self, f_star: f64) -> Option<f64> {
        let empty = self.f_empty.finite()?;
        let greedy = self.f_greedy.finite()?;
        let span = f_star - empty;
        (span > 0.0).then(|| (f_star - greedy) / span)
    }

    /// True when the certificate is inapplicable or the realized ratio meets
    /// the bound within `slack`.
    pub fn holds(&self, f_star: f64, slack: f64) -> bool {
        if !self.applicable {
            return true;
        }
        self.realized_ratio(f_star)
            .is_none_or(|r| r <= self.ratio_bound + slack)
    }
}

pub fn greedy_ratio_bound(k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let k = k as f64;
    ((k - 1.0) / k).powf(k)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub algorithm: Algorithm,
    /// Candidate indices (0-based) in selection order.
    pub chosen: Vec<usize>,
    /// Marginal gain realized at each step.
    pub gains: Vec<ExtReal>,
    pub final_value: MetricValue,
    pub bound: Option<BoundCertificate>,
    /// Number of metric evaluations performed.
    pub evaluations: usize,
}

impl SelectionResult {
    pub fn sorted_chosen(&self) -> Vec<usize> {
        let mut v = self.chosen.clone();
        v.sort_unstable();
        v
    }
}

pub fn greedy_bound(result: &SelectionResult, f_empty: &MetricValue, metric: &MetricSpec) -> BoundCertificate {
    let applicable = metric.kind().is_submodular_monotone()
        && f_empty.value.is_finite()
        && result.final_value.value.is_finite()
        && (metric.singular_policy() != SingularPolicy::Fallback || f_empty.controllable);
    BoundCertificate {
        f_empty: f_empty.value,
        f_greedy: result.final_value.value,
        ratio_bound: greedy_ratio_bound(result.chosen.len()),
        applicable,
    }
}

pub fn solve(problem: &SelectionProblem<'_>, algorithm: Algorithm) -> Result<SelectionResult> {
    match algorithm {
        Algorithm::Modular => solve_modular(problem),
        Algorithm::Greedy => solve_greedy(problem),
        Algorithm::Lazy => solve_lazy_greedy(problem),
        Algorithm::Exhaustive => solve_exhaustive(problem),
    }
}

fn attach_bound(problem: &SelectionProblem<'_>, mut result: SelectionResult) -> Result<SelectionResult> {
    if problem.metric.kind().is_submodular_monotone() {
        let f_empty = problem.value_of(&[]).unwrap_or(MetricValue {
            value: ExtReal::NegInf,
            controllable: false,
            rank: 0,
            subspace_value: None,
        });
        result.bound = Some(greedy_bound(&result, &f_empty, &problem.metric));
    }
    Ok(result)
}

/// Exact top-k for the (modular) weighted trace: sort `tr(C W_s Cᵀ)` descending.
pub fn solve_modular(problem: &SelectionProblem<'_>) -> Result<SelectionResult> {
    if problem.metric.kind() != MetricKind::WeightedTrace {
        return Err(Error::UnsupportedMetric {
            metric: problem.metric.kind().to_string(),
            algorithm: "modular top-k",
        });
    }
    let weight = problem.metric.weight();
    let weights = problem
        .cache
        .candidates()
        .iter()
        .map(|w| crate::metrics::weighted_trace(w, weight))
        .collect::<Result<Vec<f64>>>()?;
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    order.truncate(problem.k);
    let gains = order.iter().map(|&i| ExtReal::Finite(weights[i])).collect();
    let final_value = problem.value_of(&order)?;
    attach_bound(
        problem,
        SelectionResult {
            algorithm: Algorithm::Modular,
            chosen: order,
            gains,
            final_value,
            bound: None,
            evaluations: weights.len(),
        },
    )
}

/// Comparison key for one greedy step. While `f(S)` is finite the key is the
/// marginal gain; while it is not, candidates are compared on `f(S ∪ {a})`,
/// with `−∞` values ordered by Gramian rank and then by the metric restricted
/// to the controllable subspace.
fn step_better(current: ExtReal, a: &MetricValue, b: &MetricValue) -> bool {
    if current.is_finite() {
        return a.value.sub(current) > b.value.sub(current);
    }
    match (a.value, b.value) {
        (ExtReal::NegInf, ExtReal::NegInf) => (a.rank, a.subspace_value) > (b.rank, b.subspace_value),
        (x, y) => x > y,
    }
}

/// Overall comparison of two subset values (exhaustive search).
fn value_better(a: &MetricValue, b: &MetricValue) -> bool {
    step_better(ExtReal::NegInf, a, b)
}

struct GreedyState<'p, 'a> {
    problem: &'p SelectionProblem<'a>,
    chosen: Vec<usize>,
    in_set: Vec<bool>,
    gramian: DenseMatrix,
    current: ExtReal,
    current_value: Option<MetricValue>,
    gains: Vec<ExtReal>,
    evaluations: usize,
}

impl<'p, 'a> GreedyState<'p, 'a> {
    fn new(problem: &'p SelectionProblem<'a>) -> Self {
        let gramian = problem.cache.base_gramian().clone();
        let current_value = problem.evaluate(&gramian).ok();
        Self {
            problem,
            chosen: Vec::with_capacity(problem.k),
            in_set: vec![false; problem.cache.len()],
            current: current_value.map_or(ExtReal::NegInf, |v| v.value),
            current_value,
            gramian,
            gains: Vec::with_capacity(problem.k),
            evaluations: 0,
        }
    }

    fn try_with(&self, a: usize) -> Result<MetricValue> {
        self.problem.evaluate(&(&self.gramian + &self.problem.cache.candidates()[a]))
    }

    /// Evaluates every remaining candidate and picks the best.
    fn full_scan(&mut self) -> Result<(usize, MetricValue)> {
        let remaining: Vec<usize> = (0..self.in_set.len()).filter(|&i| !self.in_set[i]).collect();
        let results: Vec<Result<MetricValue>> = remaining.par_iter().map(|&a| self.try_with(a)).collect();
        self.evaluations += remaining.len();
        let mut best: Option<(usize, MetricValue)> = None;
        let mut first_err = None;
        for (&a, r) in remaining.iter().zip(results) {
            match r {
                Ok(v) => {
                    if best.as_ref().is_none_or(|(_, b)| step_better(self.current, &v, b)) {
                        best = Some((a, v));
                    }
                }
                Err(e) => {
                    first_err.get_or_insert(Error::Candidate {
                        index: a,
                        source: Box::new(e),
                    });
                }
            }
        }
        match (best, first_err) {
            (Some(b), _) => Ok(b),
            (None, Some(e)) => Err(e),
            (None, None) => Err(Error::InvalidConfig("no candidates left".into())),
        }
    }

    fn accept(&mut self, a: usize, value: MetricValue) {
        self.gains.push(value.value.sub(self.current));
        self.gramian += &self.problem.cache.candidates()[a];
        self.in_set[a] = true;
        self.chosen.push(a);
        self.current = value.value;
        self.current_value = Some(value);
    }

    fn finish(self, algorithm: Algorithm) -> Result<SelectionResult> {
        let final_value = match self.current_value {
            Some(v) => v,
            None => self.problem.evaluate(&self.gramian)?,
        };
        attach_bound(
            self.problem,
            SelectionResult {
                algorithm,
                chosen: self.chosen,
                gains: self.gains,
                final_value,
                bound: None,
                evaluations: self.evaluations,
            },
        )
    }
}

/// Standard greedy: `k` rounds of adding the candidate with the largest gain.
pub fn solve_greedy(problem: &SelectionProblem<'_>) -> Result<SelectionResult> {
    let mut state = GreedyState::new(problem);
    for _ in 0..problem.k {
        let (a, v) = state.full_scan()?;
        state.accept(a, v);
    }
    state.finish(Algorithm::Greedy)
}

#[derive(Debug)]
struct StaleBound {
    gain: ExtReal,
    index: usize,
}

impl PartialEq for StaleBound {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for StaleBound {}

impl PartialOrd for StaleBound {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for StaleBound {
    // max-heap: larger gain first, then smaller index
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain.cmp(&other.gain).then(other.index.cmp(&self.index))
    }
}

/// Accelerated greedy: marginal gains only shrink as the set grows, so a gain
/// computed in an earlier round bounds the current one. Only the top of the
/// bound heap is re-evaluated, until a freshly evaluated entry stays on top.
///
/// Produces the same choices and gains as [`solve_greedy`]. Rounds that start
/// from a non-finite `f(S)` fall back to a full scan.
pub fn solve_lazy_greedy(problem: &SelectionProblem<'_>) -> Result<SelectionResult> {
    let kind = problem.metric.kind();
    if !kind.is_submodular_monotone() || problem.metric.singular_policy() == SingularPolicy::Fallback {
        return Err(Error::UnsupportedMetric {
            metric: format!("{kind} ({:?} policy)", problem.metric.singular_policy()),
            algorithm: "lazy greedy",
        });
    }
    let m = problem.cache.len();
    let mut state = GreedyState::new(problem);
    let mut heap: BinaryHeap<StaleBound> = BinaryHeap::new();
    let mut fresh_round: Vec<Option<usize>> = vec![None; m];
    let mut fresh_value: Vec<Option<MetricValue>> = vec![None; m];
    let mut heap_valid = false;
    for round in 0..problem.k {
        if !state.current.is_finite() {
            let (a, v) = state.full_scan()?;
            state.accept(a, v);
            heap_valid = false;
            continue;
        }
        if !heap_valid {
            heap = (0..m)
                .filter(|&i| !state.in_set[i])
                .map(|index| StaleBound {
                    gain: ExtReal::PosInf,
                    index,
                })
                .collect();
            heap_valid = true;
        }
        loop {
            let top = heap.pop().ok_or_else(|| Error::InvalidConfig("no candidates left".into()))?;
            if fresh_round[top.index] == Some(round) {
                match fresh_value[top.index] {
                    Some(v) => {
                        state.accept(top.index, v);
                        break;
                    }
                    None => {
                        // every remaining candidate failed to evaluate
                        return Err(Error::Candidate {
                            index: top.index,
                            source: Box::new(Error::SingularGramian),
                        });
                    }
                }
            }
            state.evaluations += 1;
            let (gain, value) = match state.try_with(top.index) {
                Ok(v) => (v.value.sub(state.current), Some(v)),
                Err(_) => (ExtReal::NegInf, None),
            };
            fresh_round[top.index] = Some(round);
            fresh_value[top.index] = value;
            heap.push(StaleBound {
                gain,
                index: top.index,
            });
        }
    }
    state.finish(Algorithm::Lazy)
}

/// `C(n, k)` as u128, saturating.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Position of a sorted `k`-subset of `0..m` in lexicographic enumeration order.
pub fn combination_index(subset: &[usize], m: usize) -> u128 {
    let k = subset.len();
    let mut idx: u128 = 0;
    let mut prev = 0;
    for (pos, &c) in subset.iter().enumerate() {
        for skipped in prev..c {
            idx += binomial(m - skipped - 1, k - pos - 1);
        }
        prev = c + 1;
    }
    idx
}

/// Depth-first walk over all `k`-subsets of `0..m` starting with `first`, in
/// lexicographic order, keeping running Gramian sums per depth.
fn walk_subsets_from<F>(cache: &GramianCache, k: usize, first: usize, visit: &mut F)
where
    F: FnMut(&[usize], &DenseMatrix),
{
    let m = cache.len();
    let mut sums: Vec<DenseMatrix> = vec![cache.base_gramian().clone(); k + 1];
    let mut prefix = Vec::with_capacity(k);
    sums[1] = &sums[0] + &cache.candidates()[first];
    prefix.push(first);
    fn recurse<F: FnMut(&[usize], &DenseMatrix)>(
        cache: &GramianCache,
        k: usize,
        m: usize,
        prefix: &mut Vec<usize>,
        sums: &mut [DenseMatrix],
        visit: &mut F,
    ) {
        let depth = prefix.len();
        if depth == k {
            visit(prefix, &sums[depth]);
            return;
        }
        let start = prefix[depth - 1] + 1;
        let needed = k - depth;
        for i in start..=(m - needed) {
            let (lo, hi) = sums.split_at_mut(depth + 1);
            hi[0].copy_from(&lo[depth]);
            hi[0] += &cache.candidates()[i];
            prefix.push(i);
            recurse(cache, k, m, prefix, sums, visit);
            prefix.pop();
        }
    }
    recurse(cache, k, m, &mut prefix, &mut sums, visit);
}

fn check_cap(problem: &SelectionProblem<'_>) -> Result<u128> {
    let count = binomial(problem.cache.len(), problem.k);
    if count > problem.exhaustive_cap {
        return Err(Error::CombinationCapExceeded {
            count,
            cap: problem.exhaustive_cap,
        });
    }
    Ok(count)
}

/// Exact optimum by enumerating every `k`-subset. The combination space is
/// split by first element across the rayon pool and reduced in order.
pub fn solve_exhaustive(problem: &SelectionProblem<'_>) -> Result<SelectionResult> {
    let count = check_cap(problem)?;
    let m = problem.cache.len();
    let k = problem.k;
    type Best = (Option<(Vec<usize>, MetricValue)>, Option<Error>);
    let parts: Vec<Best> = (0..=m - k)
        .into_par_iter()
        .map(|first| {
            let mut best: Option<(Vec<usize>, MetricValue)> = None;
            let mut err = None;
            walk_subsets_from(problem.cache, k, first, &mut |subset, w| match problem.evaluate(w) {
                Ok(v) => {
                    if best.as_ref().is_none_or(|(_, b)| value_better(&v, b)) {
                        best = Some((subset.to_vec(), v));
                    }
                }
                Err(e) => {
                    err.get_or_insert(e);
                }
            });
            (best, err)
        })
        .collect();
    let mut best: Option<(Vec<usize>, MetricValue)> = None;
    let mut first_err = None;
    for (b, e) in parts {
        if let Some((s, v)) = b {
            if best.as_ref().is_none_or(|(_, cur)| value_better(&v, cur)) {
                best = Some((s, v));
            }
        }
        if first_err.is_none() {
            first_err = e;
        }
    }
    let (chosen, final_value) = match (best, first_err) {
        (Some(b), _) => b,
        (None, Some(e)) => return Err(e),
        (None, None) => return Err(Error::InvalidConfig("no subsets to enumerate".into())),
    };
    let mut gains = Vec::with_capacity(k);
    let mut prev = problem.value_of(&[]).map_or(ExtReal::NegInf, |v| v.value);
    for i in 1..=k {
        let v = problem.value_of(&chosen[..i]).map_or(ExtReal::NegInf, |v| v.value);
        gains.push(v.sub(prev));
        prev = v;
    }
    Ok(SelectionResult {
        algorithm: Algorithm::Exhaustive,
        chosen,
        gains,
        final_value,
        bound: None,
        evaluations: count as usize,
    })
}

/// Metric value of every `k`-subset in lexicographic order. Subsets whose
/// evaluation fails are reported as `−∞`.
pub fn enumerate_subset_values(problem: &SelectionProblem<'_>) -> Result<Vec<ExtReal>> {
    check_cap(problem)?;
    let m = problem.cache.len();
    let k = problem.k;
    let parts: Vec<Vec<ExtReal>> = (0..=m - k)
        .into_par_iter()
        .map(|first| {
            let mut out = Vec::with_capacity(binomial(m - first - 1, k - 1) as usize);
            walk_subsets_from(problem.cache, k, first, &mut |_, w| {
                out.push(problem.evaluate(w).map_or(ExtReal::NegInf, |v| v.value));
            });
            out
        })
        .collect();
    Ok(parts.concat())
}

/// A diminishing-returns triple `A ⊆ B`, `s ∉ B` with `ρ(s|A) < ρ(s|B)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub smaller: Vec<usize>,
    pub larger: Vec<usize>,
    pub element: usize,
    pub gain_smaller: ExtReal,
    pub gain_larger: ExtReal,
}

impl Violation {
    /// `ρ(s|B) − ρ(s|A)`, positive for a violation.
    pub fn excess(&self) -> f64 {
        self.gain_larger.sub(self.gain_smaller).to_f64()
    }
}

/// `lhs` exceeds `rhs + slack`.
fn exceeds(lhs: ExtReal, rhs: ExtReal, slack: f64) -> bool {
    match (lhs, rhs) {
        (ExtReal::Finite(a), ExtReal::Finite(b)) => a > b + slack,
        (a, b) => a > b,
    }
}

/// Evaluates one triple; `Some` if `ρ(s|A) < ρ(s|B) − slack`.
pub fn diminishing_returns_violation(
    problem: &SelectionProblem<'_>,
    smaller: &[usize],
    larger: &[usize],
    element: usize,
    slack: f64,
) -> Result<Option<Violation>> {
    let gain_smaller = problem.marginal_gain(smaller, element)?;
    let gain_larger = problem.marginal_gain(larger, element)?;
    Ok(exceeds(gain_larger, gain_smaller, slack).then(|| Violation {
        smaller: smaller.to_vec(),
        larger: larger.to_vec(),
        element,
        gain_smaller,
        gain_larger,
    }))
}

/// Random chain `A ⊆ B ⊆ V \ {s}`.
fn sample_chain(rng: &mut ChaCha8Rng, m: usize) -> (Vec<usize>, Vec<usize>, usize) {
    let s = rng.random_range(0..m);
    let mut others: Vec<usize> = (0..m).filter(|&i| i != s).collect();
    others.shuffle(rng);
    let b_len = rng.random_range(0..=others.len());
    let mut larger = others[..b_len].to_vec();
    let a_len = rng.random_range(0..=b_len);
    let mut smaller = larger[..a_len].to_vec();
    smaller.sort_unstable();
    larger.sort_unstable();
    (smaller, larger, s)
}

/// Samples `trials` random chains and returns the triples that break
/// diminishing returns by more than [`PROPERTY_SLACK`]. Triples whose metric
/// evaluation fails are skipped.
pub fn check_diminishing_returns(problem: &SelectionProblem<'_>, trials: usize, seed: u64) -> Vec<Violation> {
    let m = problem.cache.len();
    if m == 0 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chains: Vec<_> = (0..trials).map(|_| sample_chain(&mut rng, m)).collect();
    chains
        .par_iter()
        .filter_map(|(a, b, s)| diminishing_returns_violation(problem, a, b, *s, PROPERTY_SLACK).ok().flatten())
        .collect()
}

/// `S₁ ⊆ S₂` with `f(S₁) > f(S₂) + slack`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityViolation {
    pub smaller: Vec<usize>,
    pub larger: Vec<usize>,
    pub value_smaller: ExtReal,
    pub value_larger: ExtReal,
}

pub fn check_monotonicity(problem: &SelectionProblem<'_>, trials: usize, seed: u64) -> Vec<MonotonicityViolation> {
    let m = problem.cache.len();
    if m == 0 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chains: Vec<_> = (0..trials)
        .map(|_| {
            let (a, mut b, s) = sample_chain(&mut rng, m);
            b.push(s);
            b.sort_unstable();
            (a, b)
        })
        .collect();
    chains
        .par_iter()
        .filter_map(|(a, b)| {
            let va = problem.value_of(a).ok()?.value;
            let vb = problem.value_of(b).ok()?.value;
            exceeds(va, vb, PROPERTY_SLACK).then(|| MonotonicityViolation {
                smaller: a.clone(),
                larger: b.clone(),
                value_smaller: va,
                value_larger: vb,
            })
        })
        .collect()
}

/// Largest relative deviation of `f(S)` from `f(∅) + Σ_{s∈S} (f({s}) − f(∅))`
/// over `trials` random subsets. Zero (to rounding) for a modular metric.
pub fn modularity_defect(problem: &SelectionProblem<'_>, trials: usize, seed: u64) -> Result<f64> {
    let m = problem.cache.len();
    let empty = finite_value(problem, &[])?;
    let singles = (0..m)
        .map(|i| finite_value(problem, &[i]).map(|v| v - empty))
        .collect::<Result<Vec<f64>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let mut all: Vec<usize> = (0..m).collect();
        all.shuffle(&mut rng);
        let len = rng.random_range(0..=m);
        let subset = &all[..len];
        let direct = finite_value(problem, subset)?;
        let summed = empty + subset.iter().map(|&i| singles[i]).sum::<f64>();
        let dev = (direct - summed).abs() / direct.abs().max(summed.abs()).max(f64::MIN_POSITIVE);
        worst = worst.max(dev);
    }
    Ok(worst)
}

fn finite_value(problem: &SelectionProblem<'_>, subset: &[usize]) -> Result<f64> {
    problem
        .value_of(subset)?
        .value
        .finite()
        .ok_or(Error::SingularGramian)
}
