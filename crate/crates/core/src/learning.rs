//! Kullback-Leibler objectives over a finite exponential family, the
//! moment-matching gradient fit, cumulant correlator tensors, and the
//! paracomplex splitting diagnostic for optimization traces.

use crate::expfam::{ExponentialFamily, FamilyError, ProbVector, ThetaPoint};
use crate::paracomplex::{project_plus, split, ParacomplexNumber};
use crate::tensor::{SymTensor, TensorError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("length mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("correlator order {0} is not supported (1..=4)")]
    UnsupportedOrder(usize),
    #[error("invalid input: {0}")]
    BadInput(String),
    #[error("line search could not find a descent step")]
    NoDescent { trace: LearningTrace },
    #[error("iteration limit reached before the moment residual dropped below tolerance")]
    IterLimit { trace: LearningTrace },
}

pub type Result<T> = std::result::Result<T, LearnError>;

/// Maximum number of step halvings per line search before giving up.
const MAX_HALVINGS: u32 = 40;

/// Factor by which an accepted step is grown for the next iteration.
const STEP_GROWTH: f64 = 3.0;

/// Hard ceiling on the adaptive step (or the user's step, if larger).
const STEP_CEILING: f64 = 64.0;

/// Below this KL value the objective sits at the rounding noise floor and
/// the line search accepts on the moment residual instead.
const KL_NOISE_FLOOR: f64 = 1e-13;

/// One accepted optimizer state.
#[derive(Debug, Clone)]
pub struct TraceEntry {
    theta: Vec<f64>,
    kl_value: f64,
    moment_residual: f64,
}

impl TraceEntry {
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn kl_value(&self) -> f64 {
        self.kl_value
    }

    /// Infinity norm of the moment-matching gradient at this iterate.
    pub fn moment_residual(&self) -> f64 {
        self.moment_residual
    }
}

/// The accepted iterates of a fit, in order, including the starting point.
#[derive(Debug, Clone)]
pub struct LearningTrace {
    iterations: Vec<TraceEntry>,
    converged: bool,
    step_size: f64,
}

impl LearningTrace {
    pub fn iterations(&self) -> &[TraceEntry] {
        &self.iterations
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    /// The adaptive step size in effect when the fit stopped.
    pub fn step_size(&self) -> f64 {
        self.step_size
    }

    pub fn len(&self) -> usize {
        self.iterations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterations.is_empty()
    }
}

/// A totally symmetric order-`n` cumulant tensor of the family statistics.
#[derive(Debug, Clone)]
pub struct CorrelatorTensor {
    order: usize,
    tensor: SymTensor,
}

impl CorrelatorTensor {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn tensor(&self) -> &SymTensor {
        &self.tensor
    }

    pub fn into_tensor(self) -> SymTensor {
        self.tensor
    }
}

/// Relative entropy `sum_j p_j ln(p_j / q_j)`, computed through `ln_1p` of
/// the relative deviation for accuracy near `p = q`.
pub fn kl_divergence(p: &ProbVector, q: &ProbVector) -> Result<f64> {
    if p.len() != q.len() {
        return Err(LearnError::DimMismatch { expected: p.len(), got: q.len() });
    }
    Ok(kl_raw(p.as_slice(), q.as_slice()))
}

/// KL sum over raw slices; `q` entries may be zero (the result is then
/// `+inf`), which the descent loop rejects naturally.
fn kl_raw(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(&pj, &qj)| pj * ((pj - qj) / qj).ln_1p())
        .sum()
}

/// Gradient of `theta -> KL(target || rho_theta)` in the natural
/// parameters: the moment gap `E_theta[X] - E_target[X]`.
pub fn kl_gradient(
    fam: &ExponentialFamily,
    t: &ThetaPoint,
    target: &ProbVector,
) -> Result<Vec<f64>> {
    if target.len() != fam.m() {
        return Err(LearnError::DimMismatch { expected: fam.m(), got: target.len() });
    }
    let model = fam.means_under(&fam.density_raw(t.theta()));
    let truth = fam.means_under(target.as_slice());
    Ok(model.iter().zip(&truth).map(|(m, t)| m - t).collect())
}

/// Moment-matching fit of the family to a strictly positive target law by
/// gradient descent on `KL(target || rho_theta)`, following the
/// Ackley-Hinton-Sejnowski learning rule.
///
/// Starts at `theta = 0` and stops when the infinity norm of the moment
/// gap drops to `tol`. Each iteration line-searches by halving (at most 40
/// times) until the KL value does not increase; once KL sits at the
/// rounding noise floor the acceptance test switches to the moment
/// residual. Accepted steps grow by 3x up to `max(64, step)`.
pub fn fit_ahs(
    fam: &ExponentialFamily,
    target: &ProbVector,
    step: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(ThetaPoint, LearningTrace)> {
    fit_ahs_observed(fam, target, step, tol, max_iter, |_| {})
}

/// [`fit_ahs`] with a per-iteration observer invoked on every accepted
/// state, starting with the initial one.
pub fn fit_ahs_observed(
    fam: &ExponentialFamily,
    target: &ProbVector,
    step: f64,
    tol: f64,
    max_iter: usize,
    mut observer: impl FnMut(&TraceEntry),
) -> Result<(ThetaPoint, LearningTrace)> {
    if target.len() != fam.m() {
        return Err(LearnError::DimMismatch { expected: fam.m(), got: target.len() });
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(LearnError::BadInput("step must be positive and finite".into()));
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(LearnError::BadInput("tol must be positive and finite".into()));
    }
    if max_iter == 0 {
        return Err(LearnError::BadInput("max_iter must be at least 1".into()));
    }

    let n = fam.n();
    let truth = fam.means_under(target.as_slice());
    let step_cap = STEP_CEILING.max(step);

    let state_at = |theta: &[f64]| -> (f64, f64, Vec<f64>) {
        let q = fam.density_raw(theta);
        let kl = kl_raw(target.as_slice(), &q);
        let grad: Vec<f64> =
            fam.means_under(&q).iter().zip(&truth).map(|(m, t)| m - t).collect();
        let resid = grad.iter().fold(0.0f64, |a, g| a.max(g.abs()));
        (kl, resid, grad)
    };

    let mut theta = vec![0.0; n];
    let mut cur_step = step;
    let (mut kl, mut resid, mut grad) = state_at(&theta);
    let mut iterations = Vec::new();
    let mut push = |entries: &mut Vec<TraceEntry>, theta: &[f64], kl: f64, resid: f64| {
        let entry = TraceEntry { theta: theta.to_vec(), kl_value: kl, moment_residual: resid };
        observer(&entry);
        entries.push(entry);
    };
    push(&mut iterations, &theta, kl, resid);

    let mut steps_taken = 0;
    loop {
        if resid <= tol {
            let trace =
                LearningTrace { iterations, converged: true, step_size: cur_step };
            return Ok((fam.point(&theta)?, trace));
        }
        if steps_taken == max_iter {
            let trace =
                LearningTrace { iterations, converged: false, step_size: cur_step };
            return Err(LearnError::IterLimit { trace });
        }

        let mut accepted = false;
        let mut trial = cur_step;
        for _ in 0..=MAX_HALVINGS {
            let cand: Vec<f64> =
                theta.iter().zip(&grad).map(|(t, g)| t - trial * g).collect();
            let (kl_c, resid_c, grad_c) = state_at(&cand);
            let ok = if kl > KL_NOISE_FLOOR {
                kl_c <= kl
            } else {
                resid_c <= resid
            };
            if ok {
                theta = cand;
                kl = kl_c;
                resid = resid_c;
                grad = grad_c;
                cur_step = (trial * STEP_GROWTH).min(step_cap);
                push(&mut iterations, &theta, kl, resid);
                accepted = true;
                break;
            }
            trial /= 2.0;
        }
        if !accepted {
            let trace =
                LearningTrace { iterations, converged: false, step_size: cur_step };
            return Err(LearnError::NoDescent { trace });
        }
        steps_taken += 1;
    }
}

/// Order-`n` correlator of the family statistics at `t`: the `n`-th
/// cumulant tensor (derivative tensor of the log-partition). Orders 1-4:
/// mean, covariance, third central moment, and the fourth cumulant
/// `E[YYYY] - (gg + gg + gg)` of the centered scores `Y`.
pub fn gws_correlator(
    fam: &ExponentialFamily,
    t: &ThetaPoint,
    n: usize,
) -> Result<CorrelatorTensor> {
    if n == 0 || n > 4 {
        return Err(LearnError::UnsupportedOrder(n));
    }
    let dim = fam.n();
    let p = fam.density(t)?;
    let p = p.as_slice();
    let scores = fam.score_matrix(t)?;
    let central = |idx: &[usize]| -> f64 {
        (0..fam.m())
            .map(|w| p[w] * idx.iter().map(|&i| scores[w][i]).product::<f64>())
            .sum()
    };
    let tensor = match n {
        1 => {
            let mean = fam.mean_statistics(t)?;
            SymTensor::from_fn_sym(dim, 1, |idx| mean[idx[0]])
        }
        2 | 3 => SymTensor::from_fn_sym(dim, n, central),
        4 => {
            let g = SymTensor::from_fn_sym(dim, 2, |idx| central(idx));
            SymTensor::from_fn_sym(dim, 4, |idx| {
                let (i, j, k, l) = (idx[0], idx[1], idx[2], idx[3]);
                central(idx)
                    - g.get(&[i, j]) * g.get(&[k, l])
                    - g.get(&[i, k]) * g.get(&[j, l])
                    - g.get(&[i, l]) * g.get(&[j, k])
            })
        }
        _ => unreachable!(),
    };
    Ok(CorrelatorTensor { order: n, tensor })
}

/// Paracomplex splitting diagnostic of an optimizer trace: consecutive
/// iterates are embedded as curve samples `z_k = theta_k + eps * dtheta_k`,
/// split into the `E+`/`E-` branches, and compared in the `E+` coordinate
/// block. Returns one Euclidean distance per consecutive pair; the
/// distances shrink to zero exactly when the steps do.
pub fn trace_split_diagnostics(
    trace: &LearningTrace,
    fam: &ExponentialFamily,
) -> Result<Vec<f64>> {
    if trace.is_empty() {
        return Err(LearnError::BadInput("trace has no iterations".into()));
    }
    let n = fam.n();
    for entry in trace.iterations() {
        if entry.theta.len() != n {
            return Err(LearnError::DimMismatch { expected: n, got: entry.theta.len() });
        }
    }
    let thetas: Vec<&[f64]> = trace.iterations().iter().map(|e| e.theta()).collect();
    let curve: Vec<Vec<ParacomplexNumber>> = thetas
        .windows(2)
        .map(|w| {
            (0..n)
                .map(|i| ParacomplexNumber::new(w[0][i], w[1][i] - w[0][i]))
                .collect()
        })
        .collect();
    let gamma_plus = project_plus(&curve);
    let gamma_minus: Vec<Vec<f64>> =
        curve.iter().map(|sample| split(sample).minus().to_vec()).collect();
    Ok(gamma_plus
        .iter()
        .zip(&gamma_minus)
        .map(|(p, m)| {
            p.iter()
                .zip(m)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .collect())
}
