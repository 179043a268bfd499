//! Pre-Frobenius diagnostics: the circle multiplication induced by a flat
//! metric and a cubic tensor field, potentiality and associativity (WDVV)
//! residuals, the structure-connection flatness pair, semisimple idempotent
//! bases, and the Monge-Ampere density of a statistical potential.
//!
//! The metric is constant in the working chart (flat coordinates assumed);
//! for statistical instances it is frozen at a chosen base point.

use crate::expfam::{ExponentialFamily, FamilyError, ThetaPoint};
use crate::geometry::{amari_chentsov, fisher_metric, GeomError};
use crate::tensor::{
    determinant, finite_diff, metric_inverse, raise_index, MixedTensor12, SymTensor, TensorError,
};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FrobeniusError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error(transparent)]
    Geometry(#[from] GeomError),
    #[error("multiplication is not associative at this point (WDVV residual {residual:.3e})")]
    NotAssociative { residual: f64 },
    #[error("algebra is not semisimple: {0}")]
    NotSemisimple(String),
    #[error("invalid input: {0}")]
    BadInput(String),
}

pub type Result<T> = std::result::Result<T, FrobeniusError>;

/// WDVV residual above which the tangent algebra is treated as
/// non-associative and idempotent extraction refuses to run.
const ASSOC_TOL: f64 = 1e-8;

/// Numerical tolerance on eigenvalue realness/separation and on the
/// verification of idempotent relations.
const SEMISIMPLE_TOL: f64 = 1e-8;

/// Step for differentiating a cubic tensor field.
const A_FIELD_FD_STEP: f64 = 1e-3;

/// Step for the third derivative of a scalar potential; wider than the
/// generic third-order default because the result feeds a second
/// differentiation in the potentiality check.
const POTENTIAL_FD_STEP: f64 = 1e-2;

type AField = Box<dyn Fn(&[f64]) -> Result<SymTensor> + Send + Sync>;
type PotentialFn = Box<dyn Fn(&[f64]) -> Result<f64> + Send + Sync>;

/// A flat metric together with a totally symmetric cubic tensor field,
/// the data defining a candidate Frobenius multiplication.
pub struct PreFrobeniusData {
    dim: usize,
    metric: SymTensor,
    metric_inv: SymTensor,
    a_field: AField,
    potential: Option<PotentialFn>,
}

impl PreFrobeniusData {
    pub fn new<F>(metric: SymTensor, a_field: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Result<SymTensor> + Send + Sync + 'static,
    {
        if metric.order() != 2 {
            return Err(FrobeniusError::BadInput("metric must have order 2".into()));
        }
        let metric_inv = metric_inverse(&metric)?;
        Ok(PreFrobeniusData {
            dim: metric.dim(),
            metric,
            metric_inv,
            a_field: Box::new(a_field),
            potential: None,
        })
    }

    /// Data with a constant cubic tensor.
    pub fn from_constant(metric: SymTensor, a: SymTensor) -> Result<Self> {
        if a.order() != 3 || a.dim() != metric.dim() {
            return Err(FrobeniusError::BadInput(
                "cubic tensor must have order 3 and match the metric dimension".into(),
            ));
        }
        Self::new(metric, move |_x: &[f64]| Ok(a.clone()))
    }

    /// Data whose cubic tensor is the third derivative of a scalar
    /// potential, taken by central finite differences.
    pub fn from_potential<F>(metric: SymTensor, phi: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Result<f64> + Send + Sync + Clone + 'static,
    {
        let phi_fd = phi.clone();
        let mut data = Self::new(metric, move |x: &[f64]| {
            let f = |y: &[f64]| phi_fd(y).map_err(|e| TensorError::EvalFailed(e.to_string()));
            finite_diff(f, x, 3, Some(POTENTIAL_FD_STEP)).map_err(Into::into)
        })?;
        data.potential = Some(Box::new(phi));
        Ok(data)
    }

    /// Statistical instance of a family: metric = Fisher metric frozen at
    /// `theta0`, cubic field = the cubic moment tensor as a function of the
    /// natural parameters, potential = the log-partition.
    pub fn from_family(fam: &ExponentialFamily, theta0: &[f64]) -> Result<Self> {
        let t0 = fam.point(theta0)?;
        let metric = fisher_metric(fam, &t0)?;
        let fam_a = fam.clone();
        let fam_phi = fam.clone();
        let mut data = Self::new(metric, move |x: &[f64]| {
            let t = fam_a.point(x)?;
            amari_chentsov(&fam_a, &t).map_err(Into::into)
        })?;
        data.potential = Some(Box::new(move |x: &[f64]| {
            let t = fam_phi.point(x)?;
            Ok(fam_phi.log_partition(&t))
        }));
        Ok(data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn metric(&self) -> &SymTensor {
        &self.metric
    }

    pub fn metric_inv(&self) -> &SymTensor {
        &self.metric_inv
    }

    pub fn has_potential(&self) -> bool {
        self.potential.is_some()
    }

    pub fn potential_at(&self, x: &[f64]) -> Option<Result<f64>> {
        self.potential.as_ref().map(|phi| phi(x))
    }

    /// Cubic tensor at `x`, validated for order and dimension.
    pub fn a_at(&self, x: &[f64]) -> Result<SymTensor> {
        if x.len() != self.dim {
            return Err(FrobeniusError::BadInput(format!(
                "point has dimension {}, data expects {}",
                x.len(),
                self.dim
            )));
        }
        let a = (self.a_field)(x)?;
        if a.order() != 3 || a.dim() != self.dim {
            return Err(FrobeniusError::BadInput(
                "cubic field returned a tensor of the wrong shape".into(),
            ));
        }
        Ok(a)
    }

    /// Multiplication tensor `T^k_{ij} = g^{km} A_{ijm}` at `x`.
    pub fn mult_tensor(&self, x: &[f64]) -> Result<MixedTensor12> {
        let a = self.a_at(x)?;
        raise_index(&a, &self.metric_inv).map_err(Into::into)
    }

    /// Circle product `u . v` of tangent vectors at `x`.
    pub fn circle_product(&self, x: &[f64], u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.dim || v.len() != self.dim {
            return Err(FrobeniusError::BadInput(
                "product arguments must match the data dimension".into(),
            ));
        }
        Ok(self.mult_tensor(x)?.apply(u, v))
    }

    /// Max-norm of `d_a A_{bcd} - d_b A_{acd}` over all index tuples, with
    /// the derivatives taken by central finite differences of the cubic
    /// field. Vanishes (up to FD noise) exactly when `A` admits a local
    /// potential.
    pub fn potentiality_residual(&self, x: &[f64]) -> Result<f64> {
        let n = self.dim;
        let h = A_FIELD_FD_STEP;
        let da: Vec<SymTensor> = (0..n)
            .map(|a| {
                let mut xp = x.to_vec();
                xp[a] += h;
                let mut xm = x.to_vec();
                xm[a] -= h;
                let ap = self.a_at(&xp)?;
                let am = self.a_at(&xm)?;
                Ok(SymTensor::from_fn_sym(n, 3, |idx| (ap.get(idx) - am.get(idx)) / (2.0 * h)))
            })
            .collect::<Result<_>>()?;
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let diff = da[a].get(&[b, c, d]) - da[b].get(&[a, c, d]);
                        worst = worst.max(diff.abs());
                    }
                }
            }
        }
        Ok(worst)
    }

    /// Associativity defect: max over (a,b,c,d) of
    /// `|sum_f T^f_{ab} A_{fcd} - sum_f T^f_{bc} A_{fad}|`, the residual of
    /// the WDVV equations at `x`.
    pub fn wdvv_residual(&self, x: &[f64]) -> Result<f64> {
        let a = self.a_at(x)?;
        let tbar = raise_index(&a, &self.metric_inv)?;
        let n = self.dim;
        let mut worst: f64 = 0.0;
        for ia in 0..n {
            for ib in 0..n {
                for ic in 0..n {
                    for id in 0..n {
                        let lhs: f64 =
                            (0..n).map(|f| tbar.get(f, ia, ib) * a.get(&[f, ic, id])).sum();
                        let rhs: f64 =
                            (0..n).map(|f| tbar.get(f, ib, ic) * a.get(&[f, ia, id])).sum();
                        worst = worst.max((lhs - rhs).abs());
                    }
                }
            }
        }
        Ok(worst)
    }

    /// Flatness residuals of the structure-connection pencil
    /// `nabla_lambda = nabla_0 + lambda (X . _)` in flat coordinates: the
    /// pencil is flat for all lambda exactly when both vanish. The first
    /// component is the potentiality residual (lambda-linear part), the
    /// second the associativity defect (lambda-quadratic part).
    pub fn structure_connection_residuals(&self, x: &[f64]) -> Result<(f64, f64)> {
        Ok((self.potentiality_residual(x)?, self.wdvv_residual(x)?))
    }

    /// Idempotent basis `e_i . e_j = delta_ij e_i` of the tangent algebra
    /// at `x`, when it exists.
    ///
    /// Strategy: diagonalize the multiplication operator of a generic
    /// random vector and rescale its eigenvectors to idempotents; retried
    /// with three deterministic seeds before giving up. Requires the
    /// multiplication to be associative (`wdvv_residual <= 1e-8`).
    /// Returned vectors are sorted lexicographically by coordinates.
    pub fn semisimple_idempotents(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let r2 = self.wdvv_residual(x)?;
        if r2 > ASSOC_TOL {
            return Err(FrobeniusError::NotAssociative { residual: r2 });
        }
        let tbar = self.mult_tensor(x)?;
        let n = self.dim;

        let mut last_failure = String::new();
        for attempt in 0..3u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE + attempt);
            let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            match idempotents_from_generic(&tbar, &u) {
                Ok(mut es) => {
                    if let Err(msg) = verify_idempotents(&tbar, &es) {
                        last_failure = msg;
                        continue;
                    }
                    es.sort_by(|a, b| {
                        a.iter()
                            .zip(b)
                            .map(|(x, y)| x.total_cmp(y))
                            .find(|o| *o != std::cmp::Ordering::Equal)
                            .unwrap_or(std::cmp::Ordering::Equal)
                    });
                    return Ok(es);
                }
                Err(msg) => last_failure = msg,
            }
        }
        Err(FrobeniusError::NotSemisimple(last_failure))
    }
}

impl std::fmt::Debug for PreFrobeniusData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PreFrobeniusData")
            .field("dim", &self.dim)
            .field("metric", &self.metric)
            .field("has_potential", &self.potential.is_some())
            .finish_non_exhaustive()
    }
}

/// Attempts to build the idempotent basis from the eigenvectors of the
/// multiplication operator `L_u` of one generic vector. Errors are plain
/// strings describing the obstruction; the caller retries with fresh seeds.
fn idempotents_from_generic(
    tbar: &MixedTensor12,
    u: &[f64],
) -> std::result::Result<Vec<Vec<f64>>, String> {
    let n = tbar.dim();
    let l = tbar.mult_operator(u);
    let scale = l
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1.0);

    let lm = nalgebra::DMatrix::from_fn(n, n, |i, j| l[i][j]);
    let eig = lm.complex_eigenvalues();
    let mut lambdas = Vec::with_capacity(n);
    for ev in eig.iter() {
        if ev.im.abs() > SEMISIMPLE_TOL * scale {
            return Err(format!("complex eigenvalue {:.3e}+{:.3e}i of a generic multiplication operator", ev.re, ev.im));
        }
        lambdas.push(ev.re);
    }
    lambdas.sort_by(|a, b| a.total_cmp(b));
    for w in lambdas.windows(2) {
        if (w[1] - w[0]).abs() <= SEMISIMPLE_TOL * scale {
            return Err(format!(
                "eigenvalues {:.6e} and {:.6e} are not separated",
                w[0], w[1]
            ));
        }
    }

    let mut idempotents = Vec::with_capacity(n);
    for &lambda in &lambdas {
        let shifted: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| l[i][j] - if i == j { lambda } else { 0.0 }).collect())
            .collect();
        let v = null_vector(shifted, SEMISIMPLE_TOL * scale)
            .ok_or_else(|| format!("eigenspace of {lambda:.6e} is not one-dimensional"))?;
        // In a split-semisimple commutative algebra each eigenvector is a
        // scalar multiple of an idempotent: v . v = s v, and e = v / s.
        let vv = tbar.apply(&v, &v);
        let v_sq: f64 = v.iter().map(|a| a * a).sum();
        let s: f64 = vv.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() / v_sq;
        let vv_norm = vv.iter().map(|a| a * a).sum::<f64>().sqrt();
        let parallel_defect: f64 = vv
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - s * b).abs())
            .fold(0.0, f64::max);
        if parallel_defect > SEMISIMPLE_TOL * vv_norm.max(1.0) {
            return Err("eigenvector square is not parallel to the eigenvector".into());
        }
        if s.abs() <= SEMISIMPLE_TOL {
            return Err(format!("eigenvector square vanishes (scale {s:.3e}); nilpotent direction"));
        }
        idempotents.push(v.iter().map(|a| a / s).collect());
    }
    Ok(idempotents)
}

/// Checks `e_i . e_j = delta_ij e_i` within the semisimplicity tolerance.
fn verify_idempotents(tbar: &MixedTensor12, es: &[Vec<f64>]) -> std::result::Result<(), String> {
    let n = tbar.dim();
    for i in 0..es.len() {
        for j in 0..es.len() {
            let prod = tbar.apply(&es[i], &es[j]);
            for k in 0..n {
                let expect = if i == j { es[i][k] } else { 0.0 };
                if (prod[k] - expect).abs() > SEMISIMPLE_TOL {
                    return Err(format!(
                        "candidate basis violates e{i} . e{j} = {} e{i} by {:.3e}",
                        if i == j { "1" } else { "0" },
                        (prod[k] - expect).abs()
                    ));
                }
            }
        }
    }
    Ok(())
}

/// One-dimensional null space of a square matrix by Gaussian elimination
/// with partial pivoting; `None` when the rank deficiency is not exactly 1.
fn null_vector(mut a: Vec<Vec<f64>>, tol: f64) -> Option<Vec<f64>> {
    let n = a.len();
    let mut pivot_cols = Vec::new();
    let mut row = 0;
    for col in 0..n {
        let (best, best_val) = (row..n)
            .map(|r| (r, a[r][col].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap_or((row, 0.0));
        if best_val <= tol {
            continue;
        }
        a.swap(row, best);
        for r in 0..n {
            if r == row {
                continue;
            }
            let f = a[r][col] / a[row][col];
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                a[r][c] -= f * a[row][c];
            }
        }
        pivot_cols.push(col);
        row += 1;
        if row == n {
            break;
        }
    }
    if pivot_cols.len() != n - 1 {
        return None;
    }
    let free_col = (0..n).find(|c| !pivot_cols.contains(c)).unwrap();
    let mut v = vec![0.0; n];
    v[free_col] = 1.0;
    for (r, &pc) in pivot_cols.iter().enumerate() {
        v[pc] = -a[r][free_col] / a[r][pc];
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in v.iter_mut() {
        *x /= norm;
    }
    Some(v)
}

/// Monge-Ampere density of the statistical potential: the determinant of
/// the Fisher metric (Hessian of the log-partition), strictly positive for
/// minimal families.
pub fn monge_ampere_density(fam: &ExponentialFamily, t: &ThetaPoint) -> Result<f64> {
    let g = fisher_metric(fam, t)?;
    Ok(determinant(&g))
}
