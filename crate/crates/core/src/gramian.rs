//! Controllability Gramians for a system, its candidate input columns and an
//! optional pre-existing input matrix.
//!
//! The Gramian of a stacked input matrix is the sum of the Gramians of its
//! columns, so a [`GramianCache`] stores one Gramian per candidate and
//! assembles any subset by summation.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, check_finite, expm, require_square, symmetrize, DenseMatrix, LyapunovSolver, Tolerances,
};

/// Linear time-invariant dynamics `ẋ = A x + B u` with an optional weight `C`
/// whose rows mark the state directions of interest.
#[derive(Clone, Debug)]
pub struct SystemModel {
    a: DenseMatrix,
    weight: Option<DenseMatrix>,
    abscissa: f64,
    stable: bool,
    tol: Tolerances,
}

impl SystemModel {
    pub fn new(a: DenseMatrix) -> Result<Self> {
        Self::with_tolerances(a, Tolerances::default())
    }

    /// Validates `A` and runs the stability check once.
    pub fn with_tolerances(a: DenseMatrix, tol: Tolerances) -> Result<Self> {
        tol.validate()?;
        require_square(&a)?;
        check_finite(&a)?;
        let abscissa = linalg::spectral_abscissa(&a)?;
        Ok(Self {
            stable: abscissa < -tol.stability_margin,
            a,
            weight: None,
            abscissa,
            tol,
        })
    }

    /// Attaches a weight matrix; it must have `n` columns and full row rank.
    pub fn with_weight(mut self, c: DenseMatrix) -> Result<Self> {
        validate_weight(&c, self.dim())?;
        self.weight = Some(c);
        Ok(self)
    }

    pub fn a(&self) -> &DenseMatrix {
        &self.a
    }

    pub fn weight(&self) -> Option<&DenseMatrix> {
        self.weight.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn is_stable(&self) -> bool {
        self.stable
    }

    /// max Re λ(A).
    pub fn spectral_abscissa(&self) -> f64 {
        self.abscissa
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    pub fn require_stable(&self) -> Result<()> {
        if self.stable {
            Ok(())
        } else {
            Err(Error::UnstableSystem {
                abscissa: self.abscissa,
                margin: self.tol.stability_margin,
            })
        }
    }
}

pub(crate) fn validate_weight(c: &DenseMatrix, n: usize) -> Result<()> {
    check_finite(c)?;
    if c.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "weight has {} columns, state dimension is {n}",
            c.ncols()
        )));
    }
    let rank = linalg::numerical_rank(c, None);
    if c.nrows() == 0 || rank < c.nrows() {
        return Err(Error::RankDeficientWeight {
            rank,
            rows: c.nrows(),
        });
    }
    Ok(())
}

/// Candidate input columns `b_1 … b_M` plus an optional existing input matrix `B₀`.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateSet {
    columns: Vec<DVector<f64>>,
    base: Option<DenseMatrix>,
}

impl CandidateSet {
    pub fn new(columns: Vec<DVector<f64>>, base: Option<DenseMatrix>, n: usize) -> Result<Self> {
        for (i, c) in columns.iter().enumerate() {
            if c.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "candidate {i} has length {}, state dimension is {n}",
                    c.len()
                )));
            }
            if let Some(j) = c.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite { row: j, col: i });
            }
        }
        if let Some(b) = &base {
            if b.nrows() != n {
                return Err(Error::DimensionMismatch(format!(
                    "base input has {} rows, state dimension is {n}",
                    b.nrows()
                )));
            }
            check_finite(b)?;
        }
        Ok(Self { columns, base })
    }

    /// The columns of `I_n`, no base.
    pub fn unit_vectors(n: usize) -> Self {
        Self::from_matrix(&DenseMatrix::identity(n, n))
    }

    /// Every column of `b` becomes a candidate.
    pub fn from_matrix(b: &DenseMatrix) -> Self {
        Self {
            columns: b.column_iter().map(|c| c.clone_owned()).collect(),
            base: None,
        }
    }

    pub fn with_base(mut self, base: DenseMatrix) -> Result<Self> {
        let n = self.columns.first().map_or(base.nrows(), |c| c.len());
        if base.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "base input has {} rows, candidates have length {n}",
                base.nrows()
            )));
        }
        check_finite(&base)?;
        self.base = Some(base);
        Ok(self)
    }

    pub fn columns(&self) -> &[DVector<f64>] {
        &self.columns
    }

    pub fn base(&self) -> Option<&DenseMatrix> {
        self.base.as_ref()
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// True when every candidate is a standard basis vector.
    pub fn is_unit_vectors(&self) -> bool {
        self.columns.iter().all(|c| {
            c.iter().filter(|&&x| x == 1.0).count() == 1
                && c.iter().filter(|&&x| x != 0.0).count() == 1
        })
    }

    /// Input matrix `[B₀ b_s …]` for the given candidate indices.
    pub fn stacked(&self, subset: &[usize]) -> Result<DenseMatrix> {
        let n = self.columns.first().map_or_else(
            || self.base.as_ref().map_or(0, |b| b.nrows()),
            |c| c.len(),
        );
        let mut cols: Vec<DVector<f64>> = Vec::new();
        if let Some(b) = &self.base {
            cols.extend(b.column_iter().map(|c| c.clone_owned()));
        }
        for &s in subset {
            cols.push(
                self.columns
                    .get(s)
                    .ok_or(Error::IndexOutOfRange {
                        index: s,
                        len: self.columns.len(),
                    })?
                    .clone(),
            );
        }
        if cols.is_empty() {
            return Ok(DenseMatrix::zeros(n, 0));
        }
        Ok(DenseMatrix::from_columns(&cols))
    }
}

/// Integration horizon of the Gramian; written as `inf` or `t=<real>`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Horizon {
    Infinite,
    Finite(f64),
}

impl Horizon {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Horizon::Finite(t) if !(t.is_finite() && t > 0.0) => Err(Error::InvalidConfig(
                format!("finite horizon must be positive, got {t}"),
            )),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Horizon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Horizon::Infinite => write!(f, "inf"),
            Horizon::Finite(t) => write!(f, "t={t}"),
        }
    }
}

impl FromStr for Horizon {
    type Err = Error;

    /// `inf` or `t=<positive real>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "inf" {
            return Ok(Horizon::Infinite);
        }
        let t = s
            .strip_prefix("t=")
            .and_then(|v| v.parse::<f64>().ok())
            .ok_or_else(|| Error::InvalidConfig(format!("bad horizon {s:?}, expected inf or t=<real>")))?;
        let h = Horizon::Finite(t);
        h.validate()?;
        Ok(h)
    }
}

impl TryFrom<String> for Horizon {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Horizon> for String {
    fn from(h: Horizon) -> String {
        h.to_string()
    }
}

/// Solves `A W + W Aᵀ + B Bᵀ = 0`.
pub fn infinite_gramian(model: &SystemModel, b: &DenseMatrix) -> Result<DenseMatrix> {
    model.require_stable()?;
    check_input(model.dim(), b)?;
    LyapunovSolver::new(model.a())?.solve(&(b * b.transpose()))
}

fn check_input(n: usize, b: &DenseMatrix) -> Result<()> {
    if b.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "input matrix has {} rows, state dimension is {n}",
            b.nrows()
        )));
    }
    check_finite(b)
}

/// `W(t) = ∫₀ᵗ e^{Aτ} B Bᵀ e^{Aᵀτ} dτ`; `A` need not be stable.
pub fn finite_gramian(a: &DenseMatrix, b: &DenseMatrix, t: f64) -> Result<DenseMatrix> {
    let n = require_square(a)?;
    check_finite(a)?;
    check_input(n, b)?;
    Horizon::Finite(t).validate()?;
    finite_gramian_q(a, &(b * b.transpose()), t)
}

/// The block exponential of `[[−A, Q], [0, Aᵀ]]·τ` gives `W(τ)` for a short
/// step `τ = t / 2^s`; `s` doublings `W(2τ) = W(τ) + e^{Aτ} W(τ) e^{Aᵀτ}` then
/// reach `t` without exponentiating a large-norm matrix.
fn finite_gramian_q(a: &DenseMatrix, q: &DenseMatrix, t: f64) -> Result<DenseMatrix> {
    let n = a.nrows();
    let norm1 = (0..n)
        .map(|c| a.column(c).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0_f64, f64::max);
    let mut doublings = 0;
    let mut tau = t;
    while norm1 * tau > 0.5 && doublings < 200 {
        tau *= 0.5;
        doublings += 1;
    }
    let mut block = DenseMatrix::zeros(2 * n, 2 * n);
    block.view_mut((0, 0), (n, n)).copy_from(&(-a * tau));
    block.view_mut((0, n), (n, n)).copy_from(&(q * tau));
    block.view_mut((n, n), (n, n)).copy_from(&(a.transpose() * tau));
    let f = expm(&block)?;
    let mut e = f.view((n, n), (n, n)).transpose();
    let mut w = symmetrize(&(&e * f.view((0, n), (n, n))));
    for _ in 0..doublings {
        w = symmetrize(&(&w + &e * &w * e.transpose()));
        e = &e * &e;
    }
    Ok(w)
}

/// Per-candidate Gramians plus the Gramian of the base input.
#[derive(Clone, Debug)]
pub struct GramianCache {
    per_candidate: Vec<DenseMatrix>,
    base: DenseMatrix,
    horizon: Horizon,
}

impl GramianCache {
    /// Assembles a cache from precomputed parts; all must be `n x n`.
    pub fn from_parts(per_candidate: Vec<DenseMatrix>, base: DenseMatrix, horizon: Horizon) -> Result<Self> {
        let n = require_square(&base)?;
        for (i, w) in per_candidate.iter().enumerate() {
            if w.shape() != (n, n) {
                return Err(Error::Candidate {
                    index: i,
                    source: Box::new(Error::DimensionMismatch(format!(
                        "Gramian is {}x{}, expected {n}x{n}",
                        w.nrows(),
                        w.ncols()
                    ))),
                });
            }
        }
        Ok(Self {
            per_candidate,
            base,
            horizon,
        })
    }

    pub fn len(&self) -> usize {
        self.per_candidate.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_candidate.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.base.nrows()
    }

    pub fn horizon(&self) -> Horizon {
        self.horizon
    }

    pub fn base_gramian(&self) -> &DenseMatrix {
        &self.base
    }

    pub fn candidate(&self, index: usize) -> Result<&DenseMatrix> {
        self.per_candidate.get(index).ok_or(Error::IndexOutOfRange {
            index,
            len: self.per_candidate.len(),
        })
    }

    pub fn candidates(&self) -> &[DenseMatrix] {
        &self.per_candidate
    }

    /// `W₀ + Σ_{s∈S} W_s`, summed in the order given.
    pub fn subset_gramian(&self, subset: &[usize]) -> Result<DenseMatrix> {
        let mut w = self.base.clone();
        for &s in subset {
            w += self.candidate(s)?;
        }
        Ok(symmetrize(&w))
    }

    /// Same cache over a reordered candidate list: entry `i` of the result is
    /// entry `order[i]` of `self`.
    pub fn reordered(&self, order: &[usize]) -> Result<Self> {
        let per_candidate = order
            .iter()
            .map(|&i| self.candidate(i).cloned())
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            per_candidate,
            base: self.base.clone(),
            horizon: self.horizon,
        })
    }
}

/// Gramian of one `B Bᵀ` right-hand side.
type ColumnSolve = dyn Fn(&DenseMatrix) -> Result<DenseMatrix> + Sync;

/// One Gramian per candidate column plus the base Gramian. Candidates are
/// solved in parallel on the current rayon pool; errors carry the index of
/// the failing candidate.
pub fn build_cache(model: &SystemModel, cands: &CandidateSet, horizon: Horizon) -> Result<GramianCache> {
    horizon.validate()?;
    let n = model.dim();
    if let Some(c) = cands.columns().first() {
        if c.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "candidates have length {}, state dimension is {n}",
                c.len()
            )));
        }
    }
    if let Some(b) = cands.base() {
        check_input(n, b)?;
    }
    let solve: Box<ColumnSolve> = match horizon {
        Horizon::Infinite => {
            model.require_stable()?;
            let solver = LyapunovSolver::new(model.a())?;
            Box::new(move |q| solver.solve(q))
        }
        Horizon::Finite(t) => {
            let a = model.a().clone();
            Box::new(move |q| finite_gramian_q(&a, q, t))
        }
    };
    let per_candidate = cands
        .columns()
        .par_iter()
        .enumerate()
        .map(|(i, b)| {
            solve(&(b * b.transpose())).map_err(|e| Error::Candidate {
                index: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let base = match cands.base() {
        Some(b) if b.ncols() > 0 => solve(&(b * b.transpose()))?,
        _ => DenseMatrix::zeros(n, n),
    };
    GramianCache::from_parts(per_candidate, base, horizon)
}

/// The dual system `Aᵀ`: observability of `(A, C)` is controllability of `(Aᵀ, Cᵀ)`.
pub fn dualize(model: &SystemModel) -> SystemModel {
    SystemModel {
        a: model.a.transpose(),
        weight: None,
        abscissa: model.abscissa,
        stable: model.stable,
        tol: model.tol,
    }
}

/// Sensor candidates (rows of `C`) as actuator candidates of the dual system.
pub fn sensor_candidates(c: &DenseMatrix) -> CandidateSet {
    CandidateSet::from_matrix(&c.transpose())
}
