//! Dense real linear-algebra kernels: symmetric eigendecomposition, matrix
//! exponential, Lyapunov solves, PSD pseudoinverse and numerical rank.
//!
//! Matrices are `nalgebra::DMatrix<f64>`. Everything here is a pure function
//! of its inputs.

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type DenseMatrix = DMatrix<f64>;

/// Largest dimension for which the vectorized (n² × n²) Lyapunov solve is attempted.
pub const KRONECKER_MAX_DIM: usize = 60;

/// Numerical thresholds shared by the rank, pseudoinverse and stability checks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Relative eigenvalue cutoff; `None` means `n * 2^-52` for an `n x n` matrix.
    #[serde(default)]
    pub rank_rel: Option<f64>,
    /// Required gap: max Re(eig(A)) < -stability_margin.
    #[serde(default = "default_stability_margin")]
    pub stability_margin: f64,
    /// Allowed asymmetry (relative to the largest entry) before symmetrization.
    #[serde(default = "default_sym_tol")]
    pub sym_tol: f64,
}

fn default_stability_margin() -> f64 {
    1e-8
}

fn default_sym_tol() -> f64 {
    1e-8
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rank_rel: None,
            stability_margin: default_stability_margin(),
            sym_tol: default_sym_tol(),
        }
    }
}

impl Tolerances {
    pub fn with_rank_rel(mut self, rank_rel: f64) -> Self {
        self.rank_rel = Some(rank_rel);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")))
            }
        };
        if let Some(r) = self.rank_rel {
            positive("rank_rel", r)?;
        }
        positive("stability_margin", self.stability_margin)?;
        positive("sym_tol", self.sym_tol)
    }

    /// Effective relative rank cutoff for an `n x n` matrix.
    pub fn rank_rel_for(&self, n: usize) -> f64 {
        self.rank_rel.unwrap_or(n.max(1) as f64 * f64::EPSILON)
    }
}

pub fn check_finite(m: &DenseMatrix) -> Result<()> {
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            if !m[(r, c)].is_finite() {
                return Err(Error::NonFinite { row: r, col: c });
            }
        }
    }
    Ok(())
}

pub fn require_square(m: &DenseMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

pub fn max_abs(m: &DenseMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// `(M + Mᵀ) / 2`.
pub fn symmetrize(m: &DenseMatrix) -> DenseMatrix {
    (m + m.transpose()) * 0.5
}

/// Checks `‖M − Mᵀ‖_max ≤ sym_tol · max(1, ‖M‖_max)` and returns the symmetric part.
pub fn symmetrize_checked(m: &DenseMatrix, tol: &Tolerances) -> Result<DenseMatrix> {
    require_square(m)?;
    check_finite(m)?;
    let asymmetry = max_abs(&(m - m.transpose()));
    if asymmetry > tol.sym_tol * max_abs(m).max(1.0) {
        return Err(Error::NotSymmetric { asymmetry });
    }
    Ok(symmetrize(m))
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct SymEig {
    pub eigenvalues: DVector<f64>,
    /// Orthonormal eigenvectors, column `i` pairs with `eigenvalues[i]`.
    pub eigenvectors: DenseMatrix,
}

impl SymEig {
    pub fn reconstruct(&self) -> DenseMatrix {
        let scaled = DenseMatrix::from_fn(
            self.eigenvectors.nrows(),
            self.eigenvectors.ncols(),
            |r, c| self.eigenvectors[(r, c)] * self.eigenvalues[c],
        );
        scaled * self.eigenvectors.transpose()
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn sym_eig(m: &DenseMatrix, tol: &Tolerances) -> Result<SymEig> {
    let s = symmetrize_checked(m, tol)?;
    let n = s.nrows();
    let eig = s.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut eigenvectors = DenseMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(SymEig {
        eigenvalues,
        eigenvectors,
    })
}

/// Eigenvalues of a symmetric matrix in ascending order. The input is taken
/// as symmetric without checking; only the lower triangle is read.
pub fn sym_eigenvalues(m: &DenseMatrix) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut v: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Cutoff below which an eigenvalue of a PSD matrix counts as zero.
pub fn psd_cutoff(eigs_ascending: &[f64], tol: &Tolerances) -> f64 {
    let lmax = eigs_ascending.last().copied().unwrap_or(0.0).max(0.0);
    tol.rank_rel_for(eigs_ascending.len()) * lmax
}

/// Number of eigenvalues strictly above the cutoff (0 for the zero matrix).
pub fn rank_from_eigenvalues(eigs_ascending: &[f64], tol: &Tolerances) -> usize {
    let lmax = eigs_ascending.last().copied().unwrap_or(0.0);
    if lmax <= 0.0 {
        return 0;
    }
    let cut = psd_cutoff(eigs_ascending, tol);
    eigs_ascending.iter().filter(|&&l| l > cut).count()
}

pub fn rank_psd(m: &DenseMatrix, tol: &Tolerances) -> usize {
    rank_from_eigenvalues(&sym_eigenvalues(&symmetrize(m)), tol)
}

/// Moore–Penrose pseudoinverse of a symmetric PSD matrix.
pub fn pinv_psd(m: &DenseMatrix, tol: &Tolerances) -> Result<DenseMatrix> {
    let eig = sym_eig(m, tol)?;
    let n = m.nrows();
    let eigs: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let mut out = DenseMatrix::zeros(n, n);
    if rank_from_eigenvalues(&eigs, tol) == 0 {
        return Ok(out);
    }
    let cut = psd_cutoff(&eigs, tol);
    for (i, &l) in eigs.iter().enumerate() {
        if l > cut {
            let v = eig.eigenvectors.column(i);
            out += (v * v.transpose()) / l;
        }
    }
    Ok(symmetrize(&out))
}

/// Numerical rank of a general matrix by Householder QR with column
/// pivoting: diagonal entries of `R` above `rel_tol · |R₁₁|` are counted, with
/// default `rel_tol = max(rows, cols) · 2^-52`.
pub fn numerical_rank(m: &DenseMatrix, rel_tol: Option<f64>) -> usize {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 || max_abs(m) == 0.0 {
        return 0;
    }
    let r = m.clone().col_piv_qr().unpack_r();
    let lead = r[(0, 0)].abs();
    let tol = rel_tol.unwrap_or(rows.max(cols) as f64 * f64::EPSILON) * lead;
    (0..rows.min(cols)).take_while(|&i| r[(i, i)].abs() > tol).count()
}

/// Eigenvalues of a general real square matrix.
pub fn eigenvalues(a: &DenseMatrix) -> Result<Vec<Complex64>> {
    let n = require_square(a)?;
    if n == 0 {
        return Ok(Vec::new());
    }
    check_finite(a)?;
    let schur = Schur::try_new(a.clone(), f64::EPSILON, 200 * n.max(10))
        .ok_or(Error::NoConvergence)?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// max Re λ(A).
pub fn spectral_abscissa(a: &DenseMatrix) -> Result<f64> {
    Ok(eigenvalues(a)?
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Errors with `UnstableSystem` unless max Re λ(A) < −stability_margin.
pub fn require_stable(a: &DenseMatrix, tol: &Tolerances) -> Result<f64> {
    let abscissa = spectral_abscissa(a)?;
    if abscissa < -tol.stability_margin {
        Ok(abscissa)
    } else {
        Err(Error::UnstableSystem {
            abscissa,
            margin: tol.stability_margin,
        })
    }
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Matrix exponential by scaling and squaring with the [13/13] Padé approximant.
pub fn expm(m: &DenseMatrix) -> Result<DenseMatrix> {
    let n = require_square(m)?;
    check_finite(m)?;
    if n == 0 {
        return Ok(m.clone());
    }
    let norm1 = (0..n)
        .map(|c| m.column(c).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0_f64, f64::max);
    let squarings = if norm1 > 5.4 {
        (norm1 / 5.4).log2().ceil() as i32
    } else {
        0
    };
    let a = m * 2f64.powi(-squarings);
    let b = &PADE13;
    let id = DenseMatrix::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9])
        + &a6 * b[7]
        + &a4 * b[5]
        + &a2 * b[3]
        + &id * b[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
        + &a6 * b[6]
        + &a4 * b[4]
        + &a2 * b[2]
        + &id * b[0];
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.lu().solve(&p).ok_or(Error::NoConvergence)?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    Ok(r)
}

/// `‖AW + WAᵀ + Q‖_max`.
pub fn lyapunov_residual(a: &DenseMatrix, w: &DenseMatrix, q: &DenseMatrix) -> f64 {
    max_abs(&(a * w + w * a.transpose() + q))
}

/// `1e-8 · (‖A‖_F ‖W‖_F + ‖Q‖_F)`.
pub fn lyapunov_residual_bound(a: &DenseMatrix, w: &DenseMatrix, q: &DenseMatrix) -> f64 {
    1e-8 * (a.norm() * w.norm() + q.norm())
}

/// Solver for `A W + W Aᵀ + Q = 0` that factors `A` once (complex Schur form)
/// and then handles any number of right-hand sides.
///
/// Stability of `A` is not checked here; see [`solve_lyapunov`].
#[derive(Clone, Debug)]
pub struct LyapunovSolver {
    a: DenseMatrix,
    u: DMatrix<Complex64>,
    t: DMatrix<Complex64>,
}

impl LyapunovSolver {
    pub fn new(a: &DenseMatrix) -> Result<Self> {
        let n = require_square(a)?;
        check_finite(a)?;
        let (u, t) = complex_schur(a, n)?;
        Ok(Self { a: a.clone(), u, t })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// Solves for `W`, checks the residual bound, and falls back to the
    /// vectorized solve for small systems if the Schur path misses it.
    pub fn solve(&self, q: &DenseMatrix) -> Result<DenseMatrix> {
        let n = self.dim();
        if q.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "Q is {}x{}, A is {n}x{n}",
                q.nrows(),
                q.ncols()
            )));
        }
        let w = self.solve_schur(q);
        let residual = lyapunov_residual(&self.a, &w, q);
        let bound = lyapunov_residual_bound(&self.a, &w, q);
        if residual <= bound {
            return Ok(w);
        }
        if n <= KRONECKER_MAX_DIM {
            let w = solve_lyapunov_kronecker(&self.a, q)?;
            let residual = lyapunov_residual(&self.a, &w, q);
            let bound = lyapunov_residual_bound(&self.a, &w, q);
            if residual <= bound {
                return Ok(w);
            }
            return Err(Error::SolveFailure { residual, bound });
        }
        Err(Error::SolveFailure { residual, bound })
    }

    fn solve_schur(&self, q: &DenseMatrix) -> DenseMatrix {
        let n = self.dim();
        if n == 0 {
            return DenseMatrix::zeros(0, 0);
        }
        let t = &self.t;
        let uh = self.u.adjoint();
        let qc = q.map(|x| Complex64::new(x, 0.0));
        // T Y + Y Tᴴ = C with C = −Uᴴ Q U, solved column by column from the right.
        let c = -(&uh * qc * &self.u);
        let mut y = DMatrix::<Complex64>::zeros(n, n);
        let mut rhs = vec![Complex64::new(0.0, 0.0); n];
        for j in (0..n).rev() {
            for (i, r) in rhs.iter_mut().enumerate() {
                *r = c[(i, j)];
            }
            for k in j + 1..n {
                let f = t[(j, k)].conj();
                if f.re != 0.0 || f.im != 0.0 {
                    for (i, r) in rhs.iter_mut().enumerate() {
                        *r -= y[(i, k)] * f;
                    }
                }
            }
            let shift = t[(j, j)].conj();
            for i in (0..n).rev() {
                let mut s = rhs[i];
                for l in i + 1..n {
                    s -= t[(i, l)] * y[(l, j)];
                }
                y[(i, j)] = s / (t[(i, i)] + shift);
            }
        }
        let w = (&self.u * y * uh).map(|z| z.re);
        symmetrize(&w)
    }
}

/// Complex Schur form `A = U T Uᴴ`. nalgebra's complex Schur iteration does
/// not converge on real input with complex eigenvalues (its shifts stay
/// real), so the real quasi-triangular form is computed first and each 2x2
/// block is then split by a unitary rotation.
fn complex_schur(a: &DenseMatrix, n: usize) -> Result<(DMatrix<Complex64>, DMatrix<Complex64>)> {
    let c = |x: f64| Complex64::new(x, 0.0);
    if n == 0 {
        return Ok((DMatrix::zeros(0, 0), DMatrix::zeros(0, 0)));
    }
    let (q, t) = Schur::try_new(a.clone(), f64::EPSILON, 200 * n.max(10))
        .ok_or(Error::NoConvergence)?
        .unpack();
    let mut u = q.map(c);
    let mut t = t.map(c);
    let mut i = 0;
    while i + 1 < n {
        if t[(i + 1, i)].norm() == 0.0 {
            i += 1;
            continue;
        }
        let (p, b, r, d) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
        let half = (p - d) * 0.5;
        let lambda = (p + d) * 0.5 + (half * half + b * r).sqrt();
        let (x1, x2) = {
            let v1 = (b, lambda - p);
            let v2 = (lambda - d, r);
            if v1.0.norm_sqr() + v1.1.norm_sqr() >= v2.0.norm_sqr() + v2.1.norm_sqr() {
                v1
            } else {
                v2
            }
        };
        let norm = (x1.norm_sqr() + x2.norm_sqr()).sqrt();
        let (g1, g2) = (x1 / norm, x2 / norm);
        // G = [[g1, −conj(g2)], [g2, conj(g1)]]; T ← Gᴴ T G, U ← U G.
        for col in 0..n {
            let (ti, tj) = (t[(i, col)], t[(i + 1, col)]);
            t[(i, col)] = g1.conj() * ti + g2.conj() * tj;
            t[(i + 1, col)] = -g2 * ti + g1 * tj;
        }
        for row in 0..n {
            let (ti, tj) = (t[(row, i)], t[(row, i + 1)]);
            t[(row, i)] = ti * g1 + tj * g2;
            t[(row, i + 1)] = -ti * g2.conj() + tj * g1.conj();
            let (ui, uj) = (u[(row, i)], u[(row, i + 1)]);
            u[(row, i)] = ui * g1 + uj * g2;
            u[(row, i + 1)] = -ui * g2.conj() + uj * g1.conj();
        }
        t[(i + 1, i)] = c(0.0);
        i += 2;
    }
    t.fill_lower_triangle(c(0.0), 1);
    Ok((u, t))
}

/// Solves `A W + W Aᵀ + Q = 0` for stable `A` and symmetric `Q`.
pub fn solve_lyapunov(a: &DenseMatrix, q: &DenseMatrix, tol: &Tolerances) -> Result<DenseMatrix> {
    require_square(a)?;
    check_finite(a)?;
    let q = symmetrize_checked(q, tol)?;
    require_stable(a, tol)?;
    LyapunovSolver::new(a)?.solve(&q)
}

/// Reference solve of `(I ⊗ A + A ⊗ I) vec(W) = −vec(Q)`. Costs O(n⁶); meant
/// for small systems and as a cross-check.
pub fn solve_lyapunov_kronecker(a: &DenseMatrix, q: &DenseMatrix) -> Result<DenseMatrix> {
    let n = require_square(a)?;
    if q.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "Q is {}x{}, A is {n}x{n}",
            q.nrows(),
            q.ncols()
        )));
    }
    let id = DenseMatrix::identity(n, n);
    let k = id.kronecker(a) + a.kronecker(&id);
    let rhs = -DVector::from_column_slice(q.as_slice());
    let x = k.lu().solve(&rhs).ok_or(Error::SolveFailure {
        residual: f64::INFINITY,
        bound: 0.0,
    })?;
    Ok(symmetrize(&DenseMatrix::from_column_slice(n, n, x.as_slice())))
}
