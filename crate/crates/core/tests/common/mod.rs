//! Independent reference computations used by the integration tests. None of
//! these call into the library's numerics.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

pub type M = DMatrix<f64>;

/// `(I ⊗ A + A ⊗ I) vec(W) = −vec(Q)` by dense LU.
pub fn kronecker_lyapunov(a: &M, q: &M) -> M {
    let n = a.nrows();
    let id = M::identity(n, n);
    let k = id.kronecker(a) + a.kronecker(&id);
    let rhs = -DVector::from_column_slice(q.as_slice());
    let x = k.lu().solve(&rhs).expect("singular Kronecker system");
    let w = M::from_column_slice(n, n, x.as_slice());
    (&w + w.transpose()) * 0.5
}

/// Cyclic Jacobi eigenvalues of a symmetric matrix, ascending.
pub fn jacobi_eigenvalues(m: &M) -> Vec<f64> {
    let n = m.nrows();
    let mut a = m.clone();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off.sqrt() <= 1e-15 * a.norm() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)] == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut e: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    e.sort_by(f64::total_cmp);
    e
}

/// Truncated Taylor series with scaling and squaring.
pub fn taylor_expm(m: &M) -> M {
    let n = m.nrows();
    let norm = m.norm();
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let a = m * 2f64.powi(-s);
    let mut term = M::identity(n, n);
    let mut sum = term.clone();
    for k in 1..30 {
        term = &term * &a / k as f64;
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// `∫₀ᵗ e^{Aτ} B Bᵀ e^{Aᵀτ} dτ` by composite Simpson on `2·intervals` panels.
pub fn simpson_gramian(a: &M, b: &M, t: f64, intervals: usize) -> M {
    let n = a.nrows();
    let panels = 2 * intervals;
    let h = t / panels as f64;
    let step = taylor_expm(&(a * h));
    let mut e = M::identity(n, n);
    let mut acc = M::zeros(n, n);
    for i in 0..=panels {
        let weight = if i == 0 || i == panels {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let eb = &e * b;
        acc += &eb * eb.transpose() * weight;
        e = &step * e;
    }
    acc * (h / 3.0)
}

/// Rank from singular values above `rel · σ_max`.
pub fn svd_rank(m: &M, rel: f64) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().copied().fold(0.0, f64::max);
    sv.iter().filter(|&&s| s > rel * max).count()
}

/// `[B, AB, …, A^{n−1}B]`.
pub fn kalman_matrix(a: &M, b: &M) -> M {
    let n = a.nrows();
    let p = b.ncols();
    let mut k = M::zeros(n, n * p);
    let mut block = b.clone();
    for i in 0..n {
        k.view_mut((0, i * p), (n, p)).copy_from(&block);
        block = a * block;
    }
    k
}

/// All `k`-subsets of `0..m` in lexicographic order.
pub fn combinations(m: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    if k > m {
        return out;
    }
    loop {
        out.push(cur.clone());
        let mut i = k;
        while i > 0 && cur[i - 1] == m - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        cur[i - 1] += 1;
        for j in i..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// Small deterministic generator so oracle-side instances do not depend on the
/// library's sampler.
pub struct SplitMix(pub u64);

impl SplitMix {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform().max(1e-300);
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    pub fn matrix(&mut self, r: usize, c: usize) -> M {
        M::from_fn(r, c, |_, _| self.normal())
    }

    /// Orthogonal matrix from Gram-Schmidt on a Gaussian matrix.
    pub fn orthogonal(&mut self, n: usize) -> M {
        let g = self.matrix(n, n);
        let mut q = M::zeros(n, n);
        for j in 0..n {
            let mut v = g.column(j).clone_owned();
            for _ in 0..2 {
                for i in 0..j {
                    let qi = q.column(i).clone_owned();
                    v -= &qi * qi.dot(&v);
                }
            }
            q.set_column(j, &(&v / v.norm()));
        }
        q
    }
}
