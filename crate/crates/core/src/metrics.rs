//! Scalar controllability metrics of a Gramian.
//!
//! Values that can be `−∞` (log-determinant and inverse-trace of a singular
//! Gramian) are carried as [`ExtReal`], never as a floating NaN or infinity,
//! so comparisons stay total.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::gramian::validate_weight;
use crate::linalg::{self, psd_cutoff, rank_from_eigenvalues, sym_eigenvalues, DenseMatrix, Tolerances};

/// Extended real value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtReal {
    NegInf,
    Finite(f64),
    PosInf,
}

impl ExtReal {
    pub fn is_finite(&self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn finite(&self) -> Option<f64> {
        match *self {
            ExtReal::Finite(v) => Some(v),
            _ => None,
        }
    }

    /// `self − other`; `−∞ − (−∞)` and `+∞ − (+∞)` are taken as 0.
    pub fn sub(self, other: ExtReal) -> ExtReal {
        use ExtReal::*;
        match (self, other) {
            (Finite(a), Finite(b)) => Finite(a - b),
            (NegInf, NegInf) | (PosInf, PosInf) => Finite(0.0),
            (NegInf, _) | (_, PosInf) => NegInf,
            (PosInf, _) | (_, NegInf) => PosInf,
        }
    }

    /// Plain `f64` with infinities; only for reporting.
    pub fn to_f64(self) -> f64 {
        match self {
            ExtReal::NegInf => f64::NEG_INFINITY,
            ExtReal::Finite(v) => v,
            ExtReal::PosInf => f64::INFINITY,
        }
    }

    fn from_f64(v: f64) -> ExtReal {
        if v == f64::NEG_INFINITY {
            ExtReal::NegInf
        } else if v == f64::INFINITY {
            ExtReal::PosInf
        } else {
            ExtReal::Finite(v)
        }
    }
}

impl Eq for ExtReal {}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtReal {
    fn cmp(&self, other: &Self) -> Ordering {
        use ExtReal::*;
        match (self, other) {
            (Finite(a), Finite(b)) => a.total_cmp(b),
            (NegInf, NegInf) | (PosInf, PosInf) => Ordering::Equal,
            (NegInf, _) | (_, PosInf) => Ordering::Less,
            (PosInf, _) | (_, NegInf) => Ordering::Greater,
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::NegInf => write!(f, "-inf"),
            ExtReal::Finite(v) => write!(f, "{v}"),
            ExtReal::PosInf => write!(f, "inf"),
        }
    }
}

impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtReal::NegInf => s.serialize_str("-inf"),
            ExtReal::Finite(v) => s.serialize_f64(*v),
            ExtReal::PosInf => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) if v.is_finite() => Ok(ExtReal::Finite(v)),
            Repr::Str(s) if s == "-inf" => Ok(ExtReal::NegInf),
            Repr::Str(s) if s == "inf" => Ok(ExtReal::PosInf),
            _ => Err(serde::de::Error::custom("expected a finite number, \"inf\" or \"-inf\"")),
        }
    }
}

/// Serialized by its short name (`trace`, `trinv`, `logdet`, ...).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MetricKind {
    /// `tr(C W Cᵀ)`; the squared H₂ norm for the infinite-horizon Gramian.
    WeightedTrace,
    /// `−tr(W⁻¹)`.
    NegTraceInverse,
    /// `log det W`.
    LogDet,
    Rank,
    LambdaMin,
    /// `−tr(W⁺)`.
    NegTracePinv,
    /// Log of the product of the nonzero eigenvalues.
    LogProdNonzeroEig,
    /// `log det W / n`.
    NthRootLogDet,
    /// `log det(C W Cᵀ)`.
    WeightedLogDet,
    /// `−tr((C W Cᵀ)⁻¹)`.
    WeightedNegTraceInverse,
}

impl MetricKind {
    pub const ALL: [MetricKind; 10] = [
        MetricKind::WeightedTrace,
        MetricKind::NegTraceInverse,
        MetricKind::LogDet,
        MetricKind::Rank,
        MetricKind::LambdaMin,
        MetricKind::NegTracePinv,
        MetricKind::LogProdNonzeroEig,
        MetricKind::NthRootLogDet,
        MetricKind::WeightedLogDet,
        MetricKind::WeightedNegTraceInverse,
    ];

    /// Kinds proven monotone increasing and submodular (trace is modular).
    pub fn is_submodular_monotone(&self) -> bool {
        matches!(
            self,
            MetricKind::WeightedTrace
                | MetricKind::NegTraceInverse
                | MetricKind::LogDet
                | MetricKind::Rank
                | MetricKind::NthRootLogDet
                | MetricKind::WeightedLogDet
                | MetricKind::WeightedNegTraceInverse
        )
    }

    pub fn accepts_weight(&self) -> bool {
        matches!(
            self,
            MetricKind::WeightedTrace | MetricKind::WeightedLogDet | MetricKind::WeightedNegTraceInverse
        )
    }

    pub fn name(&self) -> &'static str {
        match self {
            MetricKind::WeightedTrace => "trace",
            MetricKind::NegTraceInverse => "trinv",
            MetricKind::LogDet => "logdet",
            MetricKind::Rank => "rank",
            MetricKind::LambdaMin => "lmin",
            MetricKind::NegTracePinv => "trpinv",
            MetricKind::LogProdNonzeroEig => "logprod",
            MetricKind::NthRootLogDet => "nlogdet",
            MetricKind::WeightedLogDet => "wlogdet",
            MetricKind::WeightedNegTraceInverse => "wtrinv",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for MetricKind {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for MetricKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MetricKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown metric {s:?}")))
    }
}

/// What to do when the Gramian (or `C W Cᵀ`) is numerically singular.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SingularPolicy {
    /// Fail with `SingularGramian`.
    Reject,
    /// Return `−∞`.
    #[default]
    Sentinel,
    /// Use the controllable-subspace variant (pseudoinverse trace or log
    /// product of nonzero eigenvalues).
    Fallback,
}

impl FromStr for SingularPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reject" => Ok(SingularPolicy::Reject),
            "sentinel" => Ok(SingularPolicy::Sentinel),
            "fallback" => Ok(SingularPolicy::Fallback),
            _ => Err(Error::InvalidConfig(format!("unknown singular policy {s:?}"))),
        }
    }
}

/// A metric together with its optional weight and singularity policy.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricSpec {
    kind: MetricKind,
    weight: Option<DenseMatrix>,
    singular_policy: SingularPolicy,
}

/// Result of evaluating a metric on one Gramian.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub value: ExtReal,
    /// Gramian has full rank n.
    pub controllable: bool,
    /// Numerical rank of the Gramian.
    pub rank: usize,
    /// When `value` is `−∞`: the metric restricted to the controllable
    /// subspace (the `Fallback` policy value), used to order singular Gramians
    /// of equal rank.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subspace_value: Option<ExtReal>,
}

impl MetricSpec {
    pub fn new(kind: MetricKind) -> Self {
        Self {
            kind,
            weight: None,
            singular_policy: SingularPolicy::default(),
        }
    }

    pub fn with_weight(mut self, c: DenseMatrix) -> Result<Self> {
        if !self.kind.accepts_weight() {
            return Err(Error::InvalidConfig(format!(
                "metric {} does not take a weight matrix",
                self.kind
            )));
        }
        validate_weight(&c, c.ncols())?;
        self.weight = Some(c);
        Ok(self)
    }

    pub fn with_policy(mut self, policy: SingularPolicy) -> Self {
        self.singular_policy = policy;
        self
    }

    pub fn kind(&self) -> MetricKind {
        self.kind
    }

    pub fn weight(&self) -> Option<&DenseMatrix> {
        self.weight.as_ref()
    }

    pub fn singular_policy(&self) -> SingularPolicy {
        self.singular_policy
    }

    pub fn evaluate(&self, w: &DenseMatrix, tol: &Tolerances) -> Result<MetricValue> {
        let n = w.nrows();
        if w.ncols() != n {
            return Err(Error::NotSquare {
                rows: n,
                cols: w.ncols(),
            });
        }
        if let Some(c) = &self.weight {
            if c.ncols() != n {
                return Err(Error::DimensionMismatch(format!(
                    "weight has {} columns, Gramian is {n}x{n}",
                    c.ncols()
                )));
            }
        }
        let eigs = sym_eigenvalues(w);
        let rank = rank_from_eigenvalues(&eigs, tol);
        let value = self.value_from(w, &eigs, rank, self.singular_policy, tol)?;
        let subspace_value = if value == ExtReal::NegInf && self.singular_policy != SingularPolicy::Fallback {
            Some(self.value_from(w, &eigs, rank, SingularPolicy::Fallback, tol)?)
        } else {
            None
        };
        Ok(MetricValue {
            value,
            controllable: rank == n,
            rank,
            subspace_value,
        })
    }

    fn value_from(
        &self,
        w: &DenseMatrix,
        eigs: &[f64],
        rank: usize,
        policy: SingularPolicy,
        tol: &Tolerances,
    ) -> Result<ExtReal> {
        let n = w.nrows();
        Ok(match self.kind {
            MetricKind::WeightedTrace => ExtReal::Finite(weighted_trace(w, self.weight.as_ref())?),
            MetricKind::NegTraceInverse => neg_trace_inverse_eigs(eigs, policy, tol)?,
            MetricKind::LogDet => log_det_eigs(eigs, policy, tol)?,
            MetricKind::NthRootLogDet => scale(log_det_eigs(eigs, policy, tol)?, n),
            MetricKind::Rank => ExtReal::Finite(rank as f64),
            MetricKind::LambdaMin => ExtReal::Finite(lambda_min_eigs(eigs)),
            MetricKind::NegTracePinv => ExtReal::Finite(-trace_pinv_eigs(eigs, tol)),
            MetricKind::LogProdNonzeroEig => log_prod_nonzero_eigs(eigs, tol),
            MetricKind::WeightedLogDet | MetricKind::WeightedNegTraceInverse => match &self.weight {
                Some(c) => weighted_eval(w, c, self.kind, policy, tol)?,
                None if self.kind == MetricKind::WeightedLogDet => log_det_eigs(eigs, policy, tol)?,
                None => neg_trace_inverse_eigs(eigs, policy, tol)?,
            },
        })
    }
}

fn scale(v: ExtReal, n: usize) -> ExtReal {
    match v {
        ExtReal::Finite(x) => ExtReal::Finite(x / n.max(1) as f64),
        other => other,
    }
}

fn is_nonsingular(eigs: &[f64], tol: &Tolerances) -> bool {
    match (eigs.first(), eigs.last()) {
        (Some(&lmin), Some(&lmax)) => lmax > 0.0 && lmin > psd_cutoff(eigs, tol),
        _ => true,
    }
}

fn singular(policy: SingularPolicy, fallback: impl FnOnce() -> ExtReal) -> Result<ExtReal> {
    match policy {
        SingularPolicy::Reject => Err(Error::SingularGramian),
        SingularPolicy::Sentinel => Ok(ExtReal::NegInf),
        SingularPolicy::Fallback => Ok(fallback()),
    }
}

fn neg_trace_inverse_eigs(eigs: &[f64], policy: SingularPolicy, tol: &Tolerances) -> Result<ExtReal> {
    if is_nonsingular(eigs, tol) {
        Ok(ExtReal::Finite(-eigs.iter().map(|l| 1.0 / l).sum::<f64>()))
    } else {
        singular(policy, || ExtReal::Finite(-trace_pinv_eigs(eigs, tol)))
    }
}

fn log_det_eigs(eigs: &[f64], policy: SingularPolicy, tol: &Tolerances) -> Result<ExtReal> {
    if is_nonsingular(eigs, tol) {
        Ok(ExtReal::Finite(eigs.iter().map(|l| l.ln()).sum()))
    } else {
        singular(policy, || log_prod_nonzero_eigs(eigs, tol))
    }
}

fn trace_pinv_eigs(eigs: &[f64], tol: &Tolerances) -> f64 {
    if rank_from_eigenvalues(eigs, tol) == 0 {
        return 0.0;
    }
    let cut = psd_cutoff(eigs, tol);
    eigs.iter().filter(|&&l| l > cut).map(|l| 1.0 / l).sum()
}

/// `−∞` for the zero matrix (empty product has no volume).
fn log_prod_nonzero_eigs(eigs: &[f64], tol: &Tolerances) -> ExtReal {
    if rank_from_eigenvalues(eigs, tol) == 0 {
        return ExtReal::NegInf;
    }
    let cut = psd_cutoff(eigs, tol);
    ExtReal::Finite(eigs.iter().filter(|&&l| l > cut).map(|l| l.ln()).sum())
}

fn lambda_min_eigs(eigs: &[f64]) -> f64 {
    match eigs.first() {
        Some(&l) if (-1e-12..0.0).contains(&l) => 0.0,
        Some(&l) => l,
        None => 0.0,
    }
}

fn weighted_eval(
    w: &DenseMatrix,
    c: &DenseMatrix,
    kind: MetricKind,
    policy: SingularPolicy,
    tol: &Tolerances,
) -> Result<ExtReal> {
    let m = linalg::symmetrize(&(c * w * c.transpose()));
    let eigs = sym_eigenvalues(&m);
    match kind {
        MetricKind::WeightedLogDet => log_det_eigs(&eigs, policy, tol),
        _ => neg_trace_inverse_eigs(&eigs, policy, tol),
    }
}

/// `tr(C W Cᵀ)`, with `C = I` when absent.
pub fn weighted_trace(w: &DenseMatrix, c: Option<&DenseMatrix>) -> Result<f64> {
    match c {
        None => Ok(w.trace()),
        Some(c) => {
            if c.ncols() != w.nrows() || w.nrows() != w.ncols() {
                return Err(Error::DimensionMismatch(format!(
                    "weight is {}x{}, Gramian is {}x{}",
                    c.nrows(),
                    c.ncols(),
                    w.nrows(),
                    w.ncols()
                )));
            }
            Ok((c * w * c.transpose()).trace())
        }
    }
}

pub fn neg_trace_inverse(w: &DenseMatrix, policy: SingularPolicy, tol: &Tolerances) -> Result<ExtReal> {
    neg_trace_inverse_eigs(&sym_eigenvalues(&linalg::symmetrize(w)), policy, tol)
}

pub fn log_det(w: &DenseMatrix, policy: SingularPolicy, tol: &Tolerances) -> Result<ExtReal> {
    log_det_eigs(&sym_eigenvalues(&linalg::symmetrize(w)), policy, tol)
}

pub fn nth_root_log_det(w: &DenseMatrix, policy: SingularPolicy, tol: &Tolerances) -> Result<ExtReal> {
    Ok(scale(log_det(w, policy, tol)?, w.nrows()))
}

pub fn rank_metric(w: &DenseMatrix, tol: &Tolerances) -> usize {
    linalg::rank_psd(w, tol)
}

/// Smallest eigenvalue; tiny negative round-off above `−1e-12` is clipped to 0.
pub fn lambda_min(w: &DenseMatrix) -> f64 {
    lambda_min_eigs(&sym_eigenvalues(&linalg::symmetrize(w)))
}

pub fn neg_trace_pinv(w: &DenseMatrix, tol: &Tolerances) -> f64 {
    -trace_pinv_eigs(&sym_eigenvalues(&linalg::symmetrize(w)), tol)
}

pub fn log_prod_nonzero_eig(w: &DenseMatrix, tol: &Tolerances) -> ExtReal {
    log_prod_nonzero_eigs(&sym_eigenvalues(&linalg::symmetrize(w)), tol)
}

/// `log det(C W Cᵀ)` or `−tr((C W Cᵀ)⁻¹)` for a full-row-rank `C`.
pub fn weighted_variant(
    w: &DenseMatrix,
    c: &DenseMatrix,
    kind: MetricKind,
    policy: SingularPolicy,
    tol: &Tolerances,
) -> Result<ExtReal> {
    if !matches!(kind, MetricKind::WeightedLogDet | MetricKind::WeightedNegTraceInverse) {
        return Err(Error::InvalidConfig(format!("{kind} is not a weighted variant")));
    }
    validate_weight(c, w.nrows())?;
    weighted_eval(w, c, kind, policy, tol)
}

/// `π^{n/2} / Γ(n/2 + 1) · (det W)^{1/n}`; 0 when `W` is singular.
pub fn ellipsoid_volume(w: &DenseMatrix, tol: &Tolerances) -> f64 {
    let n = w.nrows();
    match log_det(w, SingularPolicy::Sentinel, tol) {
        Ok(ExtReal::Finite(ld)) if n > 0 => {
            let half = n as f64 / 2.0;
            (half * std::f64::consts::PI.ln() - ln_gamma_half_integer(n + 2) + ld / n as f64).exp()
        }
        _ => 0.0,
    }
}

/// `ln Γ(m/2)` for a positive integer `m`.
fn ln_gamma_half_integer(m: usize) -> f64 {
    // Γ(1) = 1, Γ(1/2) = √π, Γ(x + 1) = x Γ(x)
    let (mut acc, mut x) = if m.is_multiple_of(2) {
        (0.0, 1.0)
    } else {
        (0.5 * std::f64::consts::PI.ln(), 0.5)
    };
    while x < m as f64 / 2.0 {
        acc += x.ln();
        x += 1.0;
    }
    acc
}

/// Relative singular-value cutoff for the Kalman matrix. Repeated products
/// with `A` leave rounding residue well above `n·eps` in directions that are
/// exactly uncontrollable, so a single-factorization cutoff overcounts.
pub const KALMAN_RANK_REL: f64 = 1e-10;

/// Numerical rank of the Kalman matrix `[B, AB, …, A^{n−1}B]`.
pub fn controllability_matrix_rank(a: &DenseMatrix, b: &DenseMatrix) -> Result<usize> {
    let n = linalg::require_square(a)?;
    if b.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "input matrix has {} rows, state dimension is {n}",
            b.nrows()
        )));
    }
    let m = b.ncols();
    let mut kalman = DenseMatrix::zeros(n, n * m);
    let mut block = b.clone();
    for j in 0..n {
        kalman.view_mut((0, j * m), (n, m)).copy_from(&block);
        block = a * block;
    }
    Ok(linalg::numerical_rank(&kalman, Some(KALMAN_RANK_REL)))
}

impl From<f64> for ExtReal {
    fn from(v: f64) -> Self {
        ExtReal::from_f64(v)
    }
}
