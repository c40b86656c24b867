//! Test systems: seeded random stable matrices, the 3-state λ_min
//! counterexample, and damped oscillator networks.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`), a counter-based generator
//! whose output is fixed across platforms for a given `(seed, stream)`.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gramian::{CandidateSet, SystemModel};
use crate::linalg::DenseMatrix;

fn default_real_part_range() -> [f64; 2] {
    [-2.0, -0.2]
}

fn default_imag_range() -> [f64; 2] {
    [0.2, 2.0]
}

fn default_complex_fraction() -> f64 {
    0.5
}

fn default_rotation() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSystemConfig {
    pub n: usize,
    pub seed: u64,
    /// ChaCha stream; experiments give each trial its own stream.
    #[serde(default)]
    pub stream: u64,
    #[serde(default = "default_real_part_range")]
    pub real_part_range: [f64; 2],
    /// Range of the imaginary parts of conjugate pairs.
    #[serde(default = "default_imag_range")]
    pub imag_range: [f64; 2],
    /// Fraction of eigenvalues that come in conjugate pairs.
    #[serde(default = "default_complex_fraction")]
    pub complex_fraction: f64,
    /// Apply a random orthogonal similarity (otherwise `A` is block diagonal).
    #[serde(default = "default_rotation")]
    pub rotation: bool,
}

impl RandomSystemConfig {
    pub fn new(n: usize, seed: u64) -> Self {
        Self {
            n,
            seed,
            stream: 0,
            real_part_range: default_real_part_range(),
            imag_range: default_imag_range(),
            complex_fraction: default_complex_fraction(),
            rotation: default_rotation(),
        }
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.real_part_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi && hi < 0.0) {
            return Err(Error::InvalidConfig(format!(
                "real_part_range must be a strictly negative interval, got [{lo}, {hi}]"
            )));
        }
        let [ilo, ihi] = self.imag_range;
        if !(ilo.is_finite() && ihi.is_finite() && 0.0 < ilo && ilo <= ihi) {
            return Err(Error::InvalidConfig(format!(
                "imag_range must be a positive interval, got [{ilo}, {ihi}]"
            )));
        }
        if !(0.0..=1.0).contains(&self.complex_fraction) {
            return Err(Error::InvalidConfig(format!(
                "complex_fraction must be in [0, 1], got {}",
                self.complex_fraction
            )));
        }
        if self.n == 0 {
            return Err(Error::InvalidConfig("n must be positive".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = crate::io::from_json_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// A sampled system together with the spectrum it was built from.
#[derive(Clone, Debug)]
pub struct RandomSystem {
    pub model: SystemModel,
    pub spectrum: Vec<Complex64>,
}

fn uniform(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

/// Haar-distributed orthogonal matrix from the QR factorization of a
/// Gaussian matrix (signs fixed so `R` has a positive diagonal).
fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DenseMatrix {
    let g = DenseMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// `A = Qᵀ D Q` with `D` block diagonal: `2x2` blocks `[[a, b], [−b, a]]` for
/// conjugate pairs `a ± ib`, then `1x1` real blocks.
pub fn sample_random_system(cfg: &RandomSystemConfig) -> Result<RandomSystem> {
    cfg.validate()?;
    let n = cfg.n;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(cfg.stream);
    let pairs = ((cfg.complex_fraction * n as f64) / 2.0).floor() as usize;
    let mut d = DenseMatrix::zeros(n, n);
    let mut spectrum = Vec::with_capacity(n);
    let mut i = 0;
    for _ in 0..pairs {
        let a = uniform(&mut rng, cfg.real_part_range);
        let b = uniform(&mut rng, cfg.imag_range);
        d[(i, i)] = a;
        d[(i, i + 1)] = b;
        d[(i + 1, i)] = -b;
        d[(i + 1, i + 1)] = a;
        spectrum.push(Complex64::new(a, b));
        spectrum.push(Complex64::new(a, -b));
        i += 2;
    }
    while i < n {
        let a = uniform(&mut rng, cfg.real_part_range);
        d[(i, i)] = a;
        spectrum.push(Complex64::new(a, 0.0));
        i += 1;
    }
    let a = if cfg.rotation {
        let q = random_orthogonal(&mut rng, n);
        q.transpose() * d * q
    } else {
        d
    };
    Ok(RandomSystem {
        model: SystemModel::new(a)?,
        spectrum,
    })
}

pub fn random_stable_system(cfg: &RandomSystemConfig) -> Result<SystemModel> {
    Ok(sample_random_system(cfg)?.model)
}

/// Three-state system on which `λ_min(W_S)` fails diminishing returns;
/// candidates are the columns of `I₃`.
pub fn counterexample_system() -> (SystemModel, CandidateSet) {
    let a = DenseMatrix::from_row_slice(3, 3, &[-8.0, 0.0, -2.0, 0.0, -2.0, -8.0, 7.0, 0.0, -3.0]);
    let model = SystemModel::new(a).expect("fixture matrix is finite and square");
    (model, CandidateSet::unit_vectors(3))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
}

fn default_grounding() -> f64 {
    0.1
}

/// Second-order network `q̈ = −(L + gI) q − D q̇` over an undirected graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscillatorNetworkConfig {
    pub node_count: usize,
    pub edges: Vec<Edge>,
    /// Per-node damping, all positive.
    pub damping: Vec<f64>,
    /// Restoring stiffness added to every node; 0 gives a pure Laplacian
    /// network with a marginally stable common mode.
    #[serde(default = "default_grounding")]
    pub grounding: f64,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl OscillatorNetworkConfig {
    /// Ring of `node_count` nodes with couplings in [0.5, 1.5] and damping in
    /// [0.2, 1.0] drawn from `seed`.
    pub fn ring(node_count: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let edges = (0..node_count)
            .filter(|_| node_count > 1)
            .filter_map(|i| {
                let j = (i + 1) % node_count;
                (node_count > 2 || i < j).then(|| Edge {
                    from: i,
                    to: j,
                    weight: rng.random_range(0.5..1.5),
                })
            })
            .collect();
        let damping = (0..node_count).map(|_| rng.random_range(0.2..1.0)).collect();
        Self {
            node_count,
            edges,
            damping,
            grounding: default_grounding(),
            seed: Some(seed),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = crate::io::from_json_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.node_count;
        if n == 0 {
            return Err(Error::InvalidConfig("node_count must be positive".into()));
        }
        if self.damping.len() != n {
            return Err(Error::InvalidConfig(format!(
                "damping has {} entries, node_count is {n}",
                self.damping.len()
            )));
        }
        if let Some(d) = self.damping.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
            return Err(Error::InvalidConfig(format!("damping must be positive, got {d}")));
        }
        if !(self.grounding.is_finite() && self.grounding >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "grounding must be non-negative, got {}",
                self.grounding
            )));
        }
        for e in &self.edges {
            if e.from >= n || e.to >= n || e.from == e.to {
                return Err(Error::InvalidConfig(format!(
                    "edge {}-{} is not between two distinct nodes below {n}",
                    e.from, e.to
                )));
            }
            if !(e.weight.is_finite() && e.weight >= 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "edge weight must be non-negative, got {}",
                    e.weight
                )));
            }
        }
        if !self.is_connected() {
            return Err(Error::InvalidConfig("oscillator graph is disconnected".into()));
        }
        Ok(())
    }

    fn is_connected(&self) -> bool {
        let n = self.node_count;
        let mut adj = vec![Vec::new(); n];
        for e in &self.edges {
            adj[e.from].push(e.to);
            adj[e.to].push(e.from);
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &u in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        seen.iter().all(|&s| s)
    }

    /// Weighted graph Laplacian.
    pub fn laplacian(&self) -> DenseMatrix {
        let n = self.node_count;
        let mut l = DenseMatrix::zeros(n, n);
        for e in &self.edges {
            l[(e.from, e.from)] += e.weight;
            l[(e.to, e.to)] += e.weight;
            l[(e.from, e.to)] -= e.weight;
            l[(e.to, e.from)] -= e.weight;
        }
        l
    }
}

/// State `[q; q̇]` with `A = [[0, I], [−(L + gI), −D]]`; candidates are the
/// velocity-channel unit vectors.
pub fn oscillator_network(cfg: &OscillatorNetworkConfig) -> Result<(SystemModel, CandidateSet)> {
    cfg.validate()?;
    let n = cfg.node_count;
    let stiffness = cfg.laplacian() + DenseMatrix::identity(n, n) * cfg.grounding;
    let mut a = DenseMatrix::zeros(2 * n, 2 * n);
    a.view_mut((0, n), (n, n)).fill_with_identity();
    a.view_mut((n, 0), (n, n)).copy_from(&(-stiffness));
    for (i, d) in cfg.damping.iter().enumerate() {
        a[(n + i, n + i)] = -d;
    }
    let columns = (0..n)
        .map(|i| {
            let mut v = DVector::zeros(2 * n);
            v[n + i] = 1.0;
            v
        })
        .collect();
    let cands = CandidateSet::new(columns, None, 2 * n)?;
    Ok((SystemModel::new(a)?, cands))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;

    #[test]
    fn diagonal_when_unrotated_and_real() {
        let cfg = RandomSystemConfig {
            complex_fraction: 0.0,
            rotation: false,
            ..RandomSystemConfig::new(6, 3)
        };
        let sys = sample_random_system(&cfg).unwrap();
        let a = sys.model.a();
        for i in 0..6 {
            for j in 0..6 {
                if i != j {
                    assert_eq!(a[(i, j)], 0.0);
                }
            }
            assert!((-2.0..-0.2).contains(&a[(i, i)]));
            assert_eq!(sys.spectrum[i].re, a[(i, i)]);
        }
    }

    #[test]
    fn deterministic_per_seed_and_stream() {
        let cfg = RandomSystemConfig::new(8, 42);
        let a = random_stable_system(&cfg).unwrap();
        let b = random_stable_system(&cfg).unwrap();
        assert_eq!(a.a(), b.a());
        let c = random_stable_system(&cfg.clone().with_stream(1)).unwrap();
        assert_ne!(a.a(), c.a());
    }

    #[test]
    fn config_validation() {
        let mut cfg = RandomSystemConfig::new(4, 0);
        cfg.real_part_range = [-1.0, 0.5];
        assert!(cfg.validate().is_err());
        let mut cfg = RandomSystemConfig::new(4, 0);
        cfg.complex_fraction = 1.5;
        assert!(cfg.validate().is_err());
        assert!(RandomSystemConfig::from_json(r#"{"n": 3, "seed": 1, "bogus": 2}"#).is_err());
        let cfg = RandomSystemConfig::from_json(r#"{"n": 3, "seed": 1}"#).unwrap();
        assert_eq!(cfg, RandomSystemConfig::new(3, 1));
    }

    #[test]
    fn counterexample_constants() {
        let (m, c) = counterexample_system();
        assert_eq!(m.a()[(2, 0)], 7.0);
        assert_eq!(m.a()[(0, 0)], -8.0);
        assert_eq!(m.a()[(1, 2)], -8.0);
        assert_eq!(c.len(), 3);
        assert!(c.is_unit_vectors());
        assert!(m.is_stable());
    }

    #[test]
    fn two_node_oscillator_matrix() {
        let cfg = OscillatorNetworkConfig {
            node_count: 2,
            edges: vec![Edge { from: 0, to: 1, weight: 1.0 }],
            damping: vec![1.0, 1.0],
            grounding: 0.0,
            seed: None,
        };
        let (m, c) = oscillator_network(&cfg).unwrap();
        #[rustfmt::skip]
        let expected = DenseMatrix::from_row_slice(4, 4, &[
             0.0,  0.0,  1.0,  0.0,
             0.0,  0.0,  0.0,  1.0,
            -1.0,  1.0, -1.0,  0.0,
             1.0, -1.0,  0.0, -1.0,
        ]);
        assert_eq!(m.a(), &expected);
        assert_eq!(c.len(), 2);
        assert_eq!(c.columns()[1][3], 1.0);
        // common mode has a zero eigenvalue without grounding
        assert!(!m.is_stable());
    }

    #[test]
    fn zero_coupling_decouples() {
        let cfg = OscillatorNetworkConfig {
            node_count: 3,
            edges: vec![Edge { from: 0, to: 1, weight: 0.0 }, Edge { from: 1, to: 2, weight: 0.0 }],
            damping: vec![0.5, 1.0, 2.0],
            grounding: 0.0,
            seed: None,
        };
        let (m, _) = oscillator_network(&cfg).unwrap();
        let a = m.a();
        for i in 0..3 {
            assert_eq!(a[(i, 3 + i)], 1.0);
            assert_eq!(a[(3 + i, 3 + i)], -cfg.damping[i]);
            for j in 0..3 {
                assert_eq!(a[(3 + i, j)], 0.0);
            }
        }
    }

    #[test]
    fn disconnected_graph_rejected() {
        let cfg = OscillatorNetworkConfig {
            node_count: 3,
            edges: vec![Edge { from: 0, to: 1, weight: 1.0 }],
            damping: vec![1.0; 3],
            grounding: 0.1,
            seed: None,
        };
        assert!(matches!(oscillator_network(&cfg), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn ring_is_stable() {
        let (m, _) = oscillator_network(&OscillatorNetworkConfig::ring(20, 5)).unwrap();
        assert!(m.is_stable());
        let eigs = linalg::eigenvalues(m.a()).unwrap();
        assert!(eigs.iter().all(|z| z.re < 0.0));
    }
}
