//! Finite exponential families: sample spaces, sufficient statistics,
//! log-partition / density / score computations, the canonical affine chart
//! on the simplex, Ceva lines, and a Gaussian reference family with
//! quadrature-backed expectations.
//!
//! Conventions: densities are `rho_theta(w) = h(w) exp(theta . X(w) - psi)`,
//! with counting base measure (`h = 1`) unless per-outcome weights are given.
//! All normalization goes through one max-shifted log-sum-exp path.

use std::sync::OnceLock;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FamilyError {
    #[error("statistics are not minimal: [1 | X] has rank {rank}, need {needed}")]
    RankDeficient { rank: usize, needed: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("invalid probability vector: {0}")]
    InvalidProbability(String),
    #[error("face distribution has mass {mass} at vertex {vertex}")]
    BadFace { vertex: usize, mass: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid family: {0}")]
    InvalidFamily(String),
}

pub type Result<T> = std::result::Result<T, FamilyError>;

/// Finite outcome set with distinct labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleSpace {
    labels: Vec<String>,
}

impl SampleSpace {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(FamilyError::InvalidFamily("sample space must be non-empty".into()));
        }
        for (j, l) in labels.iter().enumerate() {
            if labels[..j].contains(l) {
                return Err(FamilyError::InvalidFamily(format!("duplicate outcome label '{l}'")));
            }
        }
        Ok(SampleSpace { labels })
    }

    /// Space with `m` synthetic atom labels `A1..Am`.
    pub fn atoms(m: usize) -> Result<Self> {
        SampleSpace::new((1..=m).map(|j| format!("A{j}")).collect())
    }

    pub fn m(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// Point in the natural parameter space of a family (all entries finite,
/// length checked against the family at construction).
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaPoint {
    theta: Vec<f64>,
}

impl ThetaPoint {
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }
}

/// Strictly positive probability vector summing to 1 within 1e-12.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbVector {
    p: Vec<f64>,
}

impl ProbVector {
    pub const SUM_TOL: f64 = 1e-12;

    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(FamilyError::InvalidProbability("empty vector".into()));
        }
        for (j, &v) in p.iter().enumerate() {
            if !v.is_finite() {
                return Err(FamilyError::InvalidProbability(format!("entry {j} is not finite")));
            }
            if v <= 0.0 {
                return Err(FamilyError::InvalidProbability(format!(
                    "entry {j} = {v} is not strictly positive"
                )));
            }
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOL {
            return Err(FamilyError::InvalidProbability(format!(
                "entries sum to {sum}, off by more than {}",
                Self::SUM_TOL
            )));
        }
        Ok(ProbVector { p })
    }

    pub fn uniform(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(FamilyError::InvalidProbability("empty vector".into()));
        }
        Ok(ProbVector { p: vec![1.0 / m as f64; m] })
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }

    pub fn get(&self, j: usize) -> f64 {
        self.p[j]
    }
}

/// Exponential family over a finite sample space, defined by an m x n
/// statistics table. Construction enforces minimality: the columns of
/// `[1 | X]` must be linearly independent (rank n+1, tolerance 1e-10),
/// which makes the Fisher metric positive definite everywhere.
#[derive(Clone, Debug)]
pub struct ExponentialFamily {
    space: SampleSpace,
    stats: Vec<Vec<f64>>,
    /// `ln h(w)` per outcome when explicit base weights were supplied;
    /// `None` means counting measure and keeps the logit path free of
    /// spurious `+ 0.0` terms.
    ln_weights: Option<Vec<f64>>,
}

/// Rank tolerance for the minimality test at construction.
const RANK_TOL: f64 = 1e-10;

impl ExponentialFamily {
    pub fn new(space: SampleSpace, stats: Vec<Vec<f64>>) -> Result<Self> {
        Self::build(space, stats, None)
    }

    /// Family with per-outcome base weights `h(w) > 0`.
    pub fn with_weights(space: SampleSpace, stats: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != space.m() {
            return Err(FamilyError::DimMismatch { expected: space.m(), got: weights.len() });
        }
        for &w in &weights {
            if !w.is_finite() || w <= 0.0 {
                return Err(FamilyError::InvalidFamily(format!(
                    "base weights must be finite and positive, got {w}"
                )));
            }
        }
        let ln_w = weights.iter().map(|w| w.ln()).collect();
        Self::build(space, stats, Some(ln_w))
    }

    fn build(space: SampleSpace, stats: Vec<Vec<f64>>, ln_weights: Option<Vec<f64>>) -> Result<Self> {
        let m = space.m();
        if stats.len() != m {
            return Err(FamilyError::DimMismatch { expected: m, got: stats.len() });
        }
        let n = stats.first().map_or(0, |r| r.len());
        if n == 0 {
            return Err(FamilyError::InvalidFamily("at least one statistic is required".into()));
        }
        for row in &stats {
            if row.len() != n {
                return Err(FamilyError::DimMismatch { expected: n, got: row.len() });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(FamilyError::NonFinite("statistics table"));
            }
        }
        let rank = augmented_rank(&stats, m, n);
        if rank < n + 1 {
            return Err(FamilyError::RankDeficient { rank, needed: n + 1 });
        }
        Ok(ExponentialFamily { space, stats, ln_weights })
    }

    /// Two-outcome family with a single indicator statistic: X(H)=1, X(T)=0.
    pub fn bernoulli() -> Self {
        let space = SampleSpace::new(vec!["H".into(), "T".into()]).unwrap();
        ExponentialFamily::new(space, vec![vec![1.0], vec![0.0]]).unwrap()
    }

    /// Family on `m` atoms whose statistics are the indicators of the first
    /// m-1 atoms (the last atom is dropped to keep `[1 | X]` full rank).
    /// Its natural parameters are the canonical affine coordinates of the
    /// open simplex.
    pub fn indicator_family(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(FamilyError::InvalidFamily("indicator family needs m >= 2".into()));
        }
        let space = SampleSpace::atoms(m)?;
        let stats = (0..m)
            .map(|j| (0..m - 1).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        ExponentialFamily::new(space, stats)
    }

    pub fn space(&self) -> &SampleSpace {
        &self.space
    }

    pub fn m(&self) -> usize {
        self.space.m()
    }

    pub fn n(&self) -> usize {
        self.stats[0].len()
    }

    /// Statistic value X_i(w_j).
    pub fn stat(&self, j: usize, i: usize) -> f64 {
        self.stats[j][i]
    }

    pub fn stats(&self) -> &[Vec<f64>] {
        &self.stats
    }

    /// Validates a natural-parameter vector against this family.
    pub fn point(&self, theta: &[f64]) -> Result<ThetaPoint> {
        if theta.len() != self.n() {
            return Err(FamilyError::DimMismatch { expected: self.n(), got: theta.len() });
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(FamilyError::NonFinite("theta"));
        }
        Ok(ThetaPoint { theta: theta.to_vec() })
    }

    fn logits(&self, theta: &[f64]) -> Vec<f64> {
        (0..self.m())
            .map(|j| {
                let dot: f64 = (0..self.n()).map(|i| theta[i] * self.stats[j][i]).sum();
                match &self.ln_weights {
                    Some(lw) => lw[j] + dot,
                    None => dot,
                }
            })
            .collect()
    }

    /// Log-partition psi(theta) = ln sum_w h(w) exp(theta . X(w)), evaluated
    /// with a max shift so it never overflows for finite theta.
    pub fn log_partition(&self, t: &ThetaPoint) -> f64 {
        log_sum_exp(&self.logits(&t.theta))
    }

    /// Normalized density as a strictly positive probability vector.
    ///
    /// The log-sum-exp path cannot overflow, but for extreme parameters
    /// (logit spread beyond ~745) individual entries underflow to zero and
    /// the strict-positivity invariant is unrepresentable; that surfaces as
    /// `InvalidProbability`.
    pub fn density(&self, t: &ThetaPoint) -> Result<ProbVector> {
        ProbVector::new(normalized_from_logits(&self.logits(&t.theta)))
    }

    /// Density entries without the positivity check; entries may underflow
    /// to exactly zero for extreme parameters. Internal use by descent loops
    /// that must tolerate (and then reject) such iterates.
    pub(crate) fn density_raw(&self, theta: &[f64]) -> Vec<f64> {
        normalized_from_logits(&self.logits(theta))
    }

    /// Expectation of an outcome-indexed observable under the density at `t`.
    pub fn expectation(&self, t: &ThetaPoint, f: &[f64]) -> Result<f64> {
        if f.len() != self.m() {
            return Err(FamilyError::DimMismatch { expected: self.m(), got: f.len() });
        }
        let p = self.density(t)?;
        Ok((0..self.m()).map(|j| p.get(j) * f[j]).sum())
    }

    /// Mean of each sufficient statistic, `E_theta[X_i]` (the gradient of psi).
    pub fn mean_statistics(&self, t: &ThetaPoint) -> Result<Vec<f64>> {
        let p = self.density(t)?;
        Ok(self.means_under(p.as_slice()))
    }

    pub(crate) fn means_under(&self, p: &[f64]) -> Vec<f64> {
        (0..self.n())
            .map(|i| (0..self.m()).map(|j| p[j] * self.stats[j][i]).sum())
            .collect()
    }

    /// Score matrix with entry (w, i) = d_i ln rho_theta(w) = X_i(w) - E[X_i].
    /// Every column is centered: its density-weighted sum is zero.
    pub fn score_matrix(&self, t: &ThetaPoint) -> Result<Vec<Vec<f64>>> {
        let mean = self.mean_statistics(t)?;
        Ok((0..self.m())
            .map(|j| (0..self.n()).map(|i| self.stats[j][i] - mean[i]).collect())
            .collect())
    }
}

/// Rank of `[1 | X]` by modified Gram-Schmidt with a relative tolerance:
/// a column counts as dependent when its residual norm drops below
/// `RANK_TOL` times its original norm.
fn augmented_rank(stats: &[Vec<f64>], m: usize, n: usize) -> usize {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    cols.push(vec![1.0; m]);
    for i in 0..n {
        cols.push((0..m).map(|j| stats[j][i]).collect());
    }
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for col in cols {
        let orig_norm = norm(&col);
        if orig_norm == 0.0 {
            continue;
        }
        let mut v = col;
        for b in &basis {
            let proj: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            for (x, y) in v.iter_mut().zip(b) {
                *x -= proj * y;
            }
        }
        let res_norm = norm(&v);
        if res_norm > RANK_TOL * orig_norm {
            for x in v.iter_mut() {
                *x /= res_norm;
            }
            basis.push(v);
        }
    }
    basis.len()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Max-shifted log-sum-exp.
pub(crate) fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    max + logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln()
}

/// Softmax sharing the same shift as `log_sum_exp`; the single normalization
/// path for every density-producing operation in this module.
pub(crate) fn normalized_from_logits(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let unnorm: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = unnorm.iter().sum();
    unnorm.into_iter().map(|u| u / sum).collect()
}

/// Canonical affine chart of the open simplex: moves `base` by the
/// coordinate vector `x` of length m-1 (the last atom carries no
/// coordinate), returning the point with `p_j proportional to base_j e^{x_j}`.
///
/// `x = 0` returns `base` bitwise. For a uniform base the logits reduce to
/// `[x, 0]`, the exact normalization path of the indicator family's density,
/// so the chart and that family agree bit-for-bit.
pub fn canonical_to_prob(base: &ProbVector, x: &[f64]) -> Result<ProbVector> {
    let m = base.len();
    if x.len() != m - 1 {
        return Err(FamilyError::DimMismatch { expected: m - 1, got: x.len() });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(FamilyError::NonFinite("chart coordinates"));
    }
    if x.iter().all(|&v| v == 0.0) {
        return Ok(base.clone());
    }
    let uniform = base.as_slice().iter().all(|v| v.to_bits() == base.get(0).to_bits());
    let logits: Vec<f64> = if uniform {
        x.iter().copied().chain(std::iter::once(0.0)).collect()
    } else {
        (0..m)
            .map(|j| {
                let ln_b = base.get(j).ln();
                if j < m - 1 {
                    ln_b + x[j]
                } else {
                    ln_b
                }
            })
            .collect()
    };
    ProbVector::new(normalized_from_logits(&logits))
}

/// Point at parameter `t` on the Ceva line of the m-simplex through vertex
/// `vertex` and the face point `q` (a length-m distribution with zero mass
/// exactly at the vertex and positive mass elsewhere).
///
/// The vertex coordinate follows the logistic `p = 1/(1 + e^{-t})`; the
/// complement is computed directly as `1/(1 + e^{t})` rather than `1 - p`,
/// which would lose all precision for large `t`.
pub fn ceva_line(m: usize, vertex: usize, t: f64, q: &[f64]) -> Result<ProbVector> {
    if m < 2 {
        return Err(FamilyError::InvalidFamily("Ceva line needs m >= 2".into()));
    }
    if vertex >= m {
        return Err(FamilyError::DimMismatch { expected: m - 1, got: vertex });
    }
    if q.len() != m {
        return Err(FamilyError::DimMismatch { expected: m, got: q.len() });
    }
    if !t.is_finite() {
        return Err(FamilyError::NonFinite("Ceva parameter"));
    }
    let mut sum = 0.0;
    for (j, &qj) in q.iter().enumerate() {
        if !qj.is_finite() {
            return Err(FamilyError::InvalidProbability(format!("face entry {j} is not finite")));
        }
        if j == vertex {
            if qj != 0.0 {
                return Err(FamilyError::BadFace { vertex, mass: qj });
            }
        } else if qj <= 0.0 {
            return Err(FamilyError::InvalidProbability(format!(
                "face entry {j} = {qj} is not strictly positive"
            )));
        }
        sum += qj;
    }
    if (sum - 1.0).abs() > ProbVector::SUM_TOL {
        return Err(FamilyError::InvalidProbability(format!("face entries sum to {sum}")));
    }
    let p_vertex = 1.0 / (1.0 + (-t).exp());
    let complement = 1.0 / (1.0 + t.exp());
    let p: Vec<f64> = (0..m)
        .map(|j| if j == vertex { p_vertex } else { complement * q[j] })
        .collect();
    ProbVector::new(p)
}

/// Gaussian family N(mu, sigma^2) with closed-form scores and Gauss-Hermite
/// expectations, used as an analytic cross-check against the finite families.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianFamily {
    mu: f64,
    sigma: f64,
}

/// Number of Gauss-Hermite nodes; exact for polynomial integrands up to
/// degree 2*20 - 1.
const GH_NODES: usize = 20;

impl GaussianFamily {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() || !sigma.is_finite() {
            return Err(FamilyError::NonFinite("Gaussian parameters"));
        }
        if sigma <= 0.0 {
            return Err(FamilyError::InvalidFamily(format!("sigma must be positive, got {sigma}")));
        }
        Ok(GaussianFamily { mu, sigma })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Score of the (mu, sigma) parametrization at observation `x`:
    /// `(d/dmu ln rho, d/dsigma ln rho) = ((x-mu)/sigma^2, (x-mu)^2/sigma^3 - 1/sigma)`.
    pub fn score(&self, x: f64) -> (f64, f64) {
        let d = x - self.mu;
        let s2 = self.sigma * self.sigma;
        (d / s2, d * d / (s2 * self.sigma) - 1.0 / self.sigma)
    }

    /// Expectation of `f` under N(mu, sigma^2) by 20-node Gauss-Hermite
    /// quadrature (substitution x = mu + sqrt(2) sigma t).
    pub fn expectation(&self, f: impl Fn(f64) -> f64) -> f64 {
        let nodes = gauss_hermite_nodes();
        let scale = std::f64::consts::PI.sqrt();
        nodes
            .iter()
            .map(|&(t, w)| w / scale * f(self.mu + std::f64::consts::SQRT_2 * self.sigma * t))
            .sum()
    }
}

/// Gauss-Hermite nodes/weights for weight e^{-x^2}, via eigendecomposition
/// of the symmetric Jacobi matrix (zero diagonal, off-diagonal sqrt(k/2));
/// weights are sqrt(pi) times the squared first eigenvector components.
fn gauss_hermite_nodes() -> &'static [(f64, f64)] {
    static NODES: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    NODES.get_or_init(|| {
        let n = GH_NODES;
        let mut jacobi = nalgebra::DMatrix::<f64>::zeros(n, n);
        for k in 1..n {
            let b = (k as f64 / 2.0).sqrt();
            jacobi[(k - 1, k)] = b;
            jacobi[(k, k - 1)] = b;
        }
        let eig = nalgebra::SymmetricEigen::new(jacobi);
        let mu0 = std::f64::consts::PI.sqrt();
        let mut nodes: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let t = eig.eigenvalues[i];
                let v0 = eig.eigenvectors[(0, i)];
                (t, mu0 * v0 * v0)
            })
            .collect();
        nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
        nodes
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_family(rng: &mut ChaCha8Rng, max_m: usize, max_n: usize) -> ExponentialFamily {
        loop {
            let m = rng.random_range(2..=max_m);
            let n = rng.random_range(1..=max_n.min(m - 1));
            let stats: Vec<Vec<f64>> =
                (0..m).map(|_| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
            let space = SampleSpace::atoms(m).unwrap();
            if let Ok(fam) = ExponentialFamily::new(space, stats) {
                return fam;
            }
        }
    }

    #[test]
    fn log_partition_pinned_values() {
        let fam = ExponentialFamily::bernoulli();
        let t0 = fam.point(&[0.0]).unwrap();
        assert!((fam.log_partition(&t0) - 2.0f64.ln()).abs() < 1e-15);
        let t = fam.point(&[3.0f64.ln()]).unwrap();
        assert!((fam.log_partition(&t) - 4.0f64.ln()).abs() < 1e-14);

        // Single-statistic family on five outcomes: psi(0) = ln 5.
        let space = SampleSpace::atoms(5).unwrap();
        let stats = vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0], vec![0.0]];
        let fam5 = ExponentialFamily::new(space, stats).unwrap();
        let t0 = fam5.point(&[0.0]).unwrap();
        assert!((fam5.log_partition(&t0) - 5.0f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn log_partition_never_overflows() {
        let fam = ExponentialFamily::bernoulli();
        for theta in [1e4, -1e4, 700.0, 1e8] {
            let t = fam.point(&[theta]).unwrap();
            assert!(fam.log_partition(&t).is_finite());
        }
    }

    #[test]
    fn density_pinned_values() {
        let fam = ExponentialFamily::bernoulli();
        let t0 = fam.point(&[0.0]).unwrap();
        assert_eq!(fam.density(&t0).unwrap().as_slice(), &[0.5, 0.5]);
        let t = fam.point(&[3.0f64.ln()]).unwrap();
        let p = fam.density(&t).unwrap();
        assert!((p.get(0) - 0.75).abs() < 1e-15);
        assert!((p.get(1) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn relabeling_outcomes_permutes_density() {
        let space = SampleSpace::new(vec!["a".into(), "b".into(), "c".into()]).unwrap();
        let stats = vec![vec![1.0, 0.5], vec![0.0, 2.0], vec![-1.0, 0.0]];
        let fam = ExponentialFamily::new(space, stats.clone()).unwrap();
        let perm = [2usize, 0, 1];
        let space_p = SampleSpace::new(vec!["c".into(), "a".into(), "b".into()]).unwrap();
        let stats_p: Vec<Vec<f64>> = perm.iter().map(|&j| stats[j].clone()).collect();
        let fam_p = ExponentialFamily::new(space_p, stats_p).unwrap();
        let theta = [0.3, -1.1];
        let p = fam.density(&fam.point(&theta).unwrap()).unwrap();
        let pp = fam_p.density(&fam_p.point(&theta).unwrap()).unwrap();
        for (slot, &j) in perm.iter().enumerate() {
            assert_eq!(pp.get(slot).to_bits(), p.get(j).to_bits());
        }
    }

    #[test]
    fn density_sums_to_one_across_parameter_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let fam = random_family(&mut rng, 8, 3);
            let theta: Vec<f64> =
                (0..fam.n()).map(|_| rng.random_range(-50.0..50.0)).collect();
            let p = fam.density(&fam.point(&theta).unwrap()).unwrap();
            let sum: f64 = p.as_slice().iter().sum();
            assert!((sum - 1.0).abs() <= 1e-12, "sum off by {}", (sum - 1.0).abs());
        }
    }

    #[test]
    fn scores_are_centered_and_match_pinned_values() {
        let fam = ExponentialFamily::bernoulli();
        let t0 = fam.point(&[0.0]).unwrap();
        let s = fam.score_matrix(&t0).unwrap();
        assert_eq!(s[0][0], 0.5);
        assert_eq!(s[1][0], -0.5);

        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..30 {
            let fam = random_family(&mut rng, 8, 3);
            let theta: Vec<f64> = (0..fam.n()).map(|_| rng.random_range(-2.0..2.0)).collect();
            let t = fam.point(&theta).unwrap();
            let p = fam.density(&t).unwrap();
            let s = fam.score_matrix(&t).unwrap();
            for i in 0..fam.n() {
                let e: f64 = (0..fam.m()).map(|j| p.get(j) * s[j][i]).sum();
                assert!(e.abs() <= 1e-12, "score column {i} not centered: {e}");
            }
        }
    }

    #[test]
    fn expectation_basics() {
        let fam = ExponentialFamily::bernoulli();
        let t = fam.point(&[3.0f64.ln()]).unwrap();
        assert!((fam.expectation(&t, &[1.0, 1.0]).unwrap() - 1.0).abs() < 1e-14);
        assert!((fam.expectation(&t, &[1.0, 0.0]).unwrap() - 0.75).abs() < 1e-15);

        // Linearity up to rounding.
        let f = [0.7, -2.0];
        let g = [1.3, 0.4];
        let comb: Vec<f64> = (0..2).map(|j| 2.0 * f[j] + 3.0 * g[j]).collect();
        let lhs = fam.expectation(&t, &comb).unwrap();
        let rhs = 2.0 * fam.expectation(&t, &f).unwrap() + 3.0 * fam.expectation(&t, &g).unwrap();
        assert!((lhs - rhs).abs() < 1e-13);

        assert!(matches!(
            fam.expectation(&t, &[1.0]),
            Err(FamilyError::DimMismatch { .. })
        ));
    }

    #[test]
    fn minimality_is_enforced() {
        // Constant statistic duplicates the all-ones column.
        let space = SampleSpace::atoms(3).unwrap();
        let stats = vec![vec![1.0], vec![1.0], vec![1.0]];
        assert!(matches!(
            ExponentialFamily::new(space, stats),
            Err(FamilyError::RankDeficient { rank: 1, needed: 2 })
        ));

        // Duplicated column among the statistics.
        let space = SampleSpace::atoms(3).unwrap();
        let stats = vec![vec![1.0, 1.0], vec![0.0, 0.0], vec![2.0, 2.0]];
        assert!(matches!(
            ExponentialFamily::new(space, stats),
            Err(FamilyError::RankDeficient { .. })
        ));

        // A single outcome cannot support any statistic.
        let space = SampleSpace::atoms(1).unwrap();
        assert!(ExponentialFamily::new(space, vec![vec![1.0]]).is_err());

        assert!(ExponentialFamily::indicator_family(4).is_ok());
    }

    #[test]
    fn base_weights_shift_the_family() {
        let space = SampleSpace::new(vec!["H".into(), "T".into()]).unwrap();
        let fam =
            ExponentialFamily::with_weights(space, vec![vec![1.0], vec![0.0]], vec![3.0, 1.0])
                .unwrap();
        let t0 = fam.point(&[0.0]).unwrap();
        assert!((fam.log_partition(&t0) - 4.0f64.ln()).abs() < 1e-14);
        let p = fam.density(&t0).unwrap();
        assert!((p.get(0) - 0.75).abs() < 1e-15);

        let space = SampleSpace::atoms(2).unwrap();
        assert!(ExponentialFamily::with_weights(
            space,
            vec![vec![1.0], vec![0.0]],
            vec![1.0, 0.0]
        )
        .is_err());
    }

    #[test]
    fn prob_vector_validation() {
        assert!(ProbVector::new(vec![0.5, 0.5]).is_ok());
        assert!(ProbVector::new(vec![0.5, 0.0, 0.5]).is_err());
        assert!(ProbVector::new(vec![1.5, -0.5]).is_err());
        assert!(ProbVector::new(vec![0.5, 0.5 + 1e-6]).is_err());
        assert!(ProbVector::new(vec![]).is_err());
        let u = ProbVector::uniform(4).unwrap();
        assert_eq!(u.as_slice(), &[0.25, 0.25, 0.25, 0.25]);
    }

    #[test]
    fn theta_point_validation() {
        let fam = ExponentialFamily::bernoulli();
        assert!(matches!(fam.point(&[0.0, 1.0]), Err(FamilyError::DimMismatch { .. })));
        assert!(matches!(fam.point(&[f64::NAN]), Err(FamilyError::NonFinite(_))));
    }

    #[test]
    fn canonical_chart_pinned_values() {
        let base = ProbVector::uniform(2).unwrap();
        let p = canonical_to_prob(&base, &[0.0]).unwrap();
        assert_eq!(p.as_slice(), base.as_slice());

        for t in [-3.0, 0.7, 12.0] {
            let p = canonical_to_prob(&base, &[t]).unwrap();
            let expect = t.exp() / (t.exp() + 1.0);
            assert!((p.get(0) - expect).abs() < 1e-15);
        }

        let base3 = ProbVector::uniform(3).unwrap();
        let p = canonical_to_prob(&base3, &[1.0, 0.0]).unwrap();
        let e = 1.0f64.exp();
        let z = e + 2.0;
        assert!((p.get(0) - e / z).abs() < 1e-15);
        assert!((p.get(1) - 1.0 / z).abs() < 1e-15);
        assert!((p.get(2) - 1.0 / z).abs() < 1e-15);
    }

    #[test]
    fn canonical_chart_matches_indicator_family_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let m = rng.random_range(2..=5);
            let fam = ExponentialFamily::indicator_family(m).unwrap();
            let x: Vec<f64> = (0..m - 1).map(|_| rng.random_range(-4.0..4.0)).collect();
            let base = ProbVector::uniform(m).unwrap();
            let via_chart = canonical_to_prob(&base, &x).unwrap();
            let via_family = fam.density(&fam.point(&x).unwrap()).unwrap();
            for j in 0..m {
                assert_eq!(via_chart.get(j).to_bits(), via_family.get(j).to_bits());
            }
        }
    }

    #[test]
    fn canonical_chart_moves_non_uniform_bases() {
        let base = ProbVector::new(vec![0.2, 0.3, 0.5]).unwrap();
        let p = canonical_to_prob(&base, &[0.4, -1.0]).unwrap();
        let w = [0.2 * 0.4f64.exp(), 0.3 * (-1.0f64).exp(), 0.5];
        let z: f64 = w.iter().sum();
        for j in 0..3 {
            assert!((p.get(j) - w[j] / z).abs() < 1e-15);
        }
        assert!(matches!(
            canonical_to_prob(&base, &[0.0]),
            Err(FamilyError::DimMismatch { .. })
        ));
    }

    #[test]
    fn ceva_line_follows_the_logistic() {
        let q = [0.0, 1.0];
        let p = ceva_line(2, 0, 0.0, &q).unwrap();
        assert_eq!(p.get(0), 0.5);

        let p = ceva_line(2, 0, 3.0f64.ln(), &q).unwrap();
        assert!((p.get(0) - 0.75).abs() < 1e-15);
        assert!((p.get(1) - 0.25).abs() < 1e-15);

        let p = ceva_line(2, 0, 40.0, &q).unwrap();
        assert!((p.get(0) - 1.0).abs() <= 1e-12);
        assert!(p.get(1) > 0.0);

        let q3 = [0.25, 0.0, 0.75];
        let p = ceva_line(3, 1, -1.2, &q3).unwrap();
        let sigma = 1.0 / (1.0 + 1.2f64.exp());
        let c = 1.0 / (1.0 + (-1.2f64).exp());
        assert!((p.get(1) - sigma).abs() < 1e-15);
        assert!((p.get(0) - c * 0.25).abs() < 1e-15);
        assert!((p.get(2) - c * 0.75).abs() < 1e-15);
    }

    #[test]
    fn ceva_line_rejects_bad_faces() {
        assert!(matches!(
            ceva_line(2, 0, 0.0, &[0.5, 0.5]),
            Err(FamilyError::BadFace { vertex: 0, .. })
        ));
        assert!(ceva_line(3, 0, 0.0, &[0.0, 1.0, 0.0]).is_err()); // zero off-vertex mass
        assert!(ceva_line(3, 0, 0.0, &[0.0, 0.7, 0.7]).is_err()); // bad sum
        assert!(ceva_line(2, 5, 0.0, &[0.0, 1.0]).is_err()); // vertex out of range
    }

    #[test]
    fn gaussian_scores_match_closed_forms() {
        let gf = GaussianFamily::new(0.0, 1.0).unwrap();
        assert_eq!(gf.score(2.0), (2.0, 3.0));

        let gf = GaussianFamily::new(1.5, 0.5).unwrap();
        let (dmu, dsigma) = gf.score(1.5);
        assert_eq!(dmu, 0.0);
        assert!((dsigma + 1.0 / 0.5).abs() < 1e-15);

        // Translation invariance of the mu-score.
        let a = 0.9;
        let shifted = GaussianFamily::new(1.5 + a, 0.5).unwrap();
        assert_eq!(shifted.score(1.5 + a).0, gf.score(1.5).0);

        assert!(GaussianFamily::new(0.0, 0.0).is_err());
        assert!(GaussianFamily::new(0.0, -1.0).is_err());
    }

    #[test]
    fn gauss_hermite_moments_are_exact() {
        let gf = GaussianFamily::new(0.7, 1.3).unwrap();
        assert!((gf.expectation(|_| 1.0) - 1.0).abs() < 1e-14);
        assert!((gf.expectation(|x| x) - 0.7).abs() < 1e-14);
        let second = gf.expectation(|x| x * x);
        assert!((second - (0.7 * 0.7 + 1.3 * 1.3)).abs() < 1e-13);
    }

    #[test]
    fn score_span_is_the_quadratic_tangent_plane() {
        // A combination a*score_mu + b*score_sigma expands to the quadratic
        // A x^2 + B x + C with A = b/s^3, B = a/s^2 - 2 b mu/s^3 and
        // C = -A (sigma^2 + mu^2) - B mu; all such quadratics have mean zero.
        let gf = GaussianFamily::new(0.8, 1.7).unwrap();
        let (mu, s) = (gf.mu(), gf.sigma());
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let a = rng.random_range(-2.0..2.0);
            let b = rng.random_range(-2.0..2.0);
            let big_a = b / (s * s * s);
            let big_b = a / (s * s) - 2.0 * b * mu / (s * s * s);
            let big_c = -big_a * (s * s + mu * mu) - big_b * mu;

            // The quadratic really is the score combination pointwise.
            for x in [-1.0, 0.3, 2.4] {
                let (smu, ssig) = gf.score(x);
                let combo = a * smu + b * ssig;
                let quad = big_a * x * x + big_b * x + big_c;
                assert!((combo - quad).abs() < 1e-12);
            }

            // And its Gaussian expectation vanishes.
            let mean = gf.expectation(|x| big_a * x * x + big_b * x + big_c);
            assert!(mean.abs() < 1e-8, "tangent-plane mean {mean}");
        }
    }
}
