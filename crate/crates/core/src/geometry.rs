//! Riemannian machinery over chart points: Fisher metric, cubic moment
//! tensor, alpha-connections, Levi-Civita coefficients, curvature, torsion,
//! the first Bianchi identity as a self-check, sectional curvature, geodesic
//! integration, and parallel transport.
//!
//! Index conventions, fixed once to avoid drift:
//! - all-lower coefficients `Gamma_{ijk}` are symmetric in (i,j) with the
//!   LAST index the output slot;
//! - raised coefficients `Gamma^k_{ij}` are stored as `[k][i][j]` with `i`
//!   the differentiation direction and `j` the argument (this matters only
//!   for torsionful custom connections);
//! - curvature `R^l_{jkm}` means `R(e_k, e_m) e_j = R^l_{jkm} e_l`, so it is
//!   antisymmetric in its last two indices.

use crate::expfam::{ExponentialFamily, FamilyError, ThetaPoint};
use crate::tensor::{metric_inverse, MixedTensor12, SymTensor, Tensor3, Tensor4, TensorError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeomError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error("plane is degenerate: Gram determinant {gram:.3e} below 1e-12")]
    DegeneratePlane { gram: f64 },
    #[error("geodesic integration blew up (state exceeded {limit:.1e}); partial path retained", limit = BLOW_UP_LIMIT)]
    BlowUp { path: GeodesicPath },
    #[error("parallel transport blew up (state exceeded {limit:.1e}); partial vectors retained", limit = BLOW_UP_LIMIT)]
    TransportBlowUp { vectors: Vec<Vec<f64>> },
    #[error("invalid input: {0}")]
    BadInput(String),
    #[error("connection coefficients are not finite at the requested point")]
    NonFinite,
}

pub type Result<T> = std::result::Result<T, GeomError>;

/// Integration aborts once any state entry exceeds this magnitude.
pub const BLOW_UP_LIMIT: f64 = 1e12;

/// Finite-difference step for derivatives of metric/connection fields.
const FIELD_FD_STEP: f64 = 1e-4;

/// How the coefficients of a [`ConnectionField`] were produced.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ConnectionKind {
    /// Alpha-connection of an exponential family in natural coordinates.
    Alpha(f64),
    /// Levi-Civita connection of a metric field.
    LeviCivita,
    /// Identically zero coefficients.
    Flat,
    /// User-supplied coefficients; `torsionful` marks that symmetry in the
    /// two lower slots is not guaranteed.
    Custom { torsionful: bool },
}

type GammaFn = Box<dyn Fn(&[f64]) -> Result<MixedTensor12> + Send + Sync>;

/// Raised connection coefficients as a function of a chart point.
pub struct ConnectionField {
    dim: usize,
    kind: ConnectionKind,
    gamma_fn: GammaFn,
}

impl ConnectionField {
    /// The flat connection: all coefficients zero.
    pub fn flat(dim: usize) -> Self {
        ConnectionField {
            dim,
            kind: ConnectionKind::Flat,
            gamma_fn: Box::new(move |_| Ok(MixedTensor12::zeros(dim))),
        }
    }

    /// Alpha-connection of `fam` in natural coordinates, raised with the
    /// Fisher metric at the same point.
    pub fn alpha(fam: &ExponentialFamily, alpha: f64) -> Self {
        let fam = fam.clone();
        let dim = fam.n();
        ConnectionField {
            dim,
            kind: ConnectionKind::Alpha(alpha),
            gamma_fn: Box::new(move |x| {
                let t = fam.point(x)?;
                let lower = alpha_connection(&fam, &t, alpha)?;
                let g = fisher_metric(&fam, &t)?;
                let ginv = metric_inverse(&g)?;
                Ok(raise_connection(&lower, &ginv))
            }),
        }
    }

    /// Levi-Civita connection of a metric field (derivatives by central
    /// finite differences).
    pub fn levi_civita<F>(dim: usize, metric_field: F) -> Self
    where
        F: Fn(&[f64]) -> Result<SymTensor> + Send + Sync + 'static,
    {
        ConnectionField {
            dim,
            kind: ConnectionKind::LeviCivita,
            gamma_fn: Box::new(move |x| Ok(levi_civita(&metric_field, x)?.1)),
        }
    }

    /// User-supplied raised coefficients `[k][i][j]` (i = direction).
    pub fn custom<F>(dim: usize, torsionful: bool, gamma: F) -> Self
    where
        F: Fn(&[f64]) -> Result<MixedTensor12> + Send + Sync + 'static,
    {
        ConnectionField {
            dim,
            kind: ConnectionKind::Custom { torsionful },
            gamma_fn: Box::new(gamma),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> ConnectionKind {
        self.kind
    }

    /// Coefficients at `x`, validated finite.
    pub fn gamma(&self, x: &[f64]) -> Result<MixedTensor12> {
        if x.len() != self.dim {
            return Err(GeomError::BadInput(format!(
                "point has dimension {}, connection expects {}",
                x.len(),
                self.dim
            )));
        }
        let g = (self.gamma_fn)(x)?;
        if g.data().iter().any(|v| !v.is_finite()) {
            return Err(GeomError::NonFinite);
        }
        Ok(g)
    }
}

impl std::fmt::Debug for ConnectionField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConnectionField")
            .field("dim", &self.dim)
            .field("kind", &self.kind)
            .finish_non_exhaustive()
    }
}

/// Sampled curve with velocities, as produced by [`geodesic`].
#[derive(Clone, Debug, PartialEq)]
pub struct GeodesicPath {
    times: Vec<f64>,
    points: Vec<Vec<f64>>,
    velocities: Vec<Vec<f64>>,
}

impl GeodesicPath {
    pub fn new(times: Vec<f64>, points: Vec<Vec<f64>>, velocities: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() != points.len() || times.len() != velocities.len() {
            return Err(GeomError::BadInput("times/points/velocities lengths differ".into()));
        }
        if times.is_empty() {
            return Err(GeomError::BadInput("path must contain at least one sample".into()));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(GeomError::BadInput("times must be strictly increasing".into()));
        }
        let dim = points[0].len();
        if points.iter().chain(&velocities).any(|v| v.len() != dim) {
            return Err(GeomError::BadInput("inconsistent sample dimensions".into()));
        }
        Ok(GeodesicPath { times, points, velocities })
    }

    /// Wraps an arbitrary sampled curve, filling velocities with forward
    /// difference quotients (last segment's repeated), for use as a
    /// transport path.
    pub fn from_samples(times: Vec<f64>, points: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() != points.len() || times.is_empty() {
            return Err(GeomError::BadInput("times/points lengths differ or empty".into()));
        }
        let velocities = if times.len() == 1 {
            vec![vec![0.0; points[0].len()]]
        } else {
            let mut v: Vec<Vec<f64>> = times
                .windows(2)
                .zip(points.windows(2))
                .map(|(tw, pw)| {
                    let dt = tw[1] - tw[0];
                    pw[0].iter().zip(&pw[1]).map(|(a, b)| (b - a) / dt).collect()
                })
                .collect();
            let last = v.last().cloned().unwrap();
            v.push(last);
            v
        };
        GeodesicPath::new(times, points, velocities)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn velocities(&self) -> &[Vec<f64>] {
        &self.velocities
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn endpoint(&self) -> (&[f64], &[f64]) {
        (self.points.last().unwrap(), self.velocities.last().unwrap())
    }
}

/// Fisher information metric `g_ij = E_theta[s_i s_j]`, the covariance of
/// the score vector (and the Hessian of the log-partition).
pub fn fisher_metric(fam: &ExponentialFamily, t: &ThetaPoint) -> Result<SymTensor> {
    let p = fam.density(t)?;
    let s = fam.score_matrix(t)?;
    Ok(SymTensor::from_fn_sym(fam.n(), 2, |idx| {
        let (i, k) = (idx[0], idx[1]);
        (0..fam.m()).map(|j| p.get(j) * s[j][i] * s[j][k]).sum()
    }))
}

/// Cubic moment tensor `T_ijk = E_theta[s_i s_j s_k]` (third cumulant of the
/// statistics; the third derivative of the log-partition).
pub fn amari_chentsov(fam: &ExponentialFamily, t: &ThetaPoint) -> Result<SymTensor> {
    let p = fam.density(t)?;
    let s = fam.score_matrix(t)?;
    Ok(SymTensor::from_fn_sym(fam.n(), 3, |idx| {
        let (i, k, l) = (idx[0], idx[1], idx[2]);
        (0..fam.m()).map(|j| p.get(j) * s[j][i] * s[j][k] * s[j][l]).sum()
    }))
}

/// Alpha-connection in natural coordinates, all-lower coefficients
/// `Gamma^alpha_{ijk} = E[(d_i d_j l + (1-alpha)/2 s_i s_j) s_k]`, where
/// `d_i d_j l = -g_ij` is constant over outcomes for exponential families.
/// Symmetric in (i,j); `k` is the output slot.
pub fn alpha_connection(fam: &ExponentialFamily, t: &ThetaPoint, alpha: f64) -> Result<Tensor3> {
    let p = fam.density(t)?;
    let s = fam.score_matrix(t)?;
    let g = fisher_metric(fam, t)?;
    let c = (1.0 - alpha) / 2.0;
    let n = fam.n();
    Ok(Tensor3::from_fn(n, |i, j, k| {
        (0..fam.m())
            .map(|w| p.get(w) * (-g.get(&[i, j]) + c * s[w][i] * s[w][j]) * s[w][k])
            .sum()
    }))
}

/// Alpha-connection by the displacement identity
/// `Gamma^alpha = Gamma^1 + (1-alpha)/2 T`; an independent route used to
/// cross-check [`alpha_connection`].
pub fn alpha_connection_displacement(
    fam: &ExponentialFamily,
    t: &ThetaPoint,
    alpha: f64,
) -> Result<Tensor3> {
    let gamma1 = alpha_connection(fam, t, 1.0)?;
    let ac = amari_chentsov(fam, t)?;
    let c = (1.0 - alpha) / 2.0;
    let n = fam.n();
    Ok(Tensor3::from_fn(n, |i, j, k| gamma1.get(i, j, k) + c * ac.get(&[i, j, k])))
}

/// Raises the output slot of all-lower coefficients with an inverse metric:
/// `Gamma^k_{ij} = g^{km} Gamma_{ijm}`.
pub fn raise_connection(lower: &Tensor3, g_inv: &SymTensor) -> MixedTensor12 {
    let n = lower.dim();
    MixedTensor12::from_fn(n, |k, i, j| {
        (0..n).map(|m| g_inv.get(&[k, m]) * lower.get(i, j, m)).sum()
    })
}

/// Central-difference derivatives of a metric field: `out[k] = d_k g` at `x`.
fn metric_derivatives<F>(metric_field: &F, x: &[f64]) -> Result<Vec<SymTensor>>
where
    F: Fn(&[f64]) -> Result<SymTensor> + ?Sized,
{
    let h = FIELD_FD_STEP;
    (0..x.len())
        .map(|k| {
            let mut xp = x.to_vec();
            xp[k] += h;
            let mut xm = x.to_vec();
            xm[k] -= h;
            let gp = metric_field(&xp)?;
            let gm = metric_field(&xm)?;
            Ok(SymTensor::from_fn_sym(x.len(), 2, |idx| {
                (gp.get(idx) - gm.get(idx)) / (2.0 * h)
            }))
        })
        .collect()
}

/// Levi-Civita coefficients of a metric field at `x`:
/// `Gamma_{ijk} = (d_j g_ik + d_i g_jk - d_k g_ij) / 2` (all-lower, output
/// slot last) together with the raised form `Gamma^k_{ij}`.
pub fn levi_civita<F>(metric_field: &F, x: &[f64]) -> Result<(Tensor3, MixedTensor12)>
where
    F: Fn(&[f64]) -> Result<SymTensor> + ?Sized,
{
    let n = x.len();
    let dg = metric_derivatives(metric_field, x)?;
    let lower = Tensor3::from_fn(n, |i, j, k| {
        0.5 * (dg[j].get(&[i, k]) + dg[i].get(&[j, k]) - dg[k].get(&[i, j]))
    });
    let g = metric_field(x)?;
    let ginv = metric_inverse(&g)?;
    let raised = raise_connection(&lower, &ginv);
    Ok((lower, raised))
}

/// Closure form of the Fisher metric of a family, for use as a metric field.
pub fn fisher_metric_field(
    fam: &ExponentialFamily,
) -> impl Fn(&[f64]) -> Result<SymTensor> + Send + Sync + 'static {
    let fam = fam.clone();
    move |x: &[f64]| {
        let t = fam.point(x)?;
        fisher_metric(&fam, &t)
    }
}

/// Riemann curvature of a connection field at `x`, raised form `R^l_{jkm}`
/// (layout `[l][j][k][m]`), with connection derivatives taken by central
/// finite differences:
/// `R^l_{jkm} = d_k Gamma^l_{mj} - d_m Gamma^l_{kj}
///            + sum_t (Gamma^t_{mj} Gamma^l_{kt} - Gamma^t_{kj} Gamma^l_{mt})`.
pub fn curvature(conn: &ConnectionField, x: &[f64]) -> Result<Tensor4> {
    let n = conn.dim();
    let g0 = conn.gamma(x)?;
    let dg = gamma_derivatives(conn, x)?;
    Ok(Tensor4::from_fn(n, |l, j, k, m| {
        let quad: f64 = (0..n)
            .map(|t| g0.get(t, m, j) * g0.get(l, k, t) - g0.get(t, k, j) * g0.get(l, m, t))
            .sum();
        dg[k].get(l, m, j) - dg[m].get(l, k, j) + quad
    }))
}

fn gamma_derivatives(conn: &ConnectionField, x: &[f64]) -> Result<Vec<MixedTensor12>> {
    let h = FIELD_FD_STEP;
    let n = conn.dim();
    (0..n)
        .map(|k| {
            let mut xp = x.to_vec();
            xp[k] += h;
            let mut xm = x.to_vec();
            xm[k] -= h;
            let gp = conn.gamma(&xp)?;
            let gm = conn.gamma(&xm)?;
            Ok(MixedTensor12::from_fn(n, |l, i, j| {
                (gp.get(l, i, j) - gm.get(l, i, j)) / (2.0 * h)
            }))
        })
        .collect()
}

/// Lowers the first index of a raised curvature tensor:
/// `R_ijkm = g_il R^l_{jkm}`.
pub fn lower_curvature(r: &Tensor4, g: &SymTensor) -> Tensor4 {
    let n = r.dim();
    Tensor4::from_fn(n, |i, j, k, m| (0..n).map(|l| g.get(&[i, l]) * r.get(l, j, k, m)).sum())
}

/// Torsion `T^l_{jk} = Gamma^l_{jk} - Gamma^l_{kj}`; identically zero for
/// coefficient fields symmetric in their lower slots.
pub fn torsion(conn: &ConnectionField, x: &[f64]) -> Result<MixedTensor12> {
    let g = conn.gamma(x)?;
    let n = conn.dim();
    Ok(MixedTensor12::from_fn(n, |l, j, k| g.get(l, j, k) - g.get(l, k, j)))
}

/// Residual of the first Bianchi identity with torsion,
/// `cyc R(e_mu,e_nu)e_rho = cyc [(nabla_mu T)(e_nu,e_rho) + T(T(e_mu,e_nu),e_rho)]`
/// (cyclic sums over (mu,nu,rho)). This holds for every smooth connection,
/// so the returned max-norm residual is a self-consistency check of the
/// curvature and torsion code; only finite-difference noise should remain.
pub fn bianchi_residual(conn: &ConnectionField, x: &[f64]) -> Result<f64> {
    let n = conn.dim();
    let r = curvature(conn, x)?;
    let g0 = conn.gamma(x)?;
    let t0 = torsion(conn, x)?;
    let dg = gamma_derivatives(conn, x)?;
    // d_mu T^l_{jk}, from the connection derivatives (torsion is linear).
    let dt: Vec<MixedTensor12> = (0..n)
        .map(|mu| {
            MixedTensor12::from_fn(n, |l, j, k| dg[mu].get(l, j, k) - dg[mu].get(l, k, j))
        })
        .collect();

    // Covariant derivative of the torsion tensor.
    let nabla_t = |mu: usize, lam: usize, nu: usize, rho: usize| -> f64 {
        let mut s = dt[mu].get(lam, nu, rho);
        for sg in 0..n {
            s += g0.get(lam, mu, sg) * t0.get(sg, nu, rho);
            s -= g0.get(sg, mu, nu) * t0.get(lam, sg, rho);
            s -= g0.get(sg, mu, rho) * t0.get(lam, nu, sg);
        }
        s
    };

    let mut worst: f64 = 0.0;
    for lam in 0..n {
        for mu in 0..n {
            for nu in 0..n {
                for rho in 0..n {
                    let cyc = [(mu, nu, rho), (nu, rho, mu), (rho, mu, nu)];
                    let lhs: f64 = cyc.iter().map(|&(a, b, c)| r.get(lam, c, a, b)).sum();
                    let mut rhs = 0.0;
                    for &(a, b, c) in &cyc {
                        rhs += nabla_t(a, lam, b, c);
                        rhs += (0..n).map(|s| t0.get(s, a, b) * t0.get(lam, s, c)).sum::<f64>();
                    }
                    worst = worst.max((lhs - rhs).abs());
                }
            }
        }
    }
    Ok(worst)
}

/// Residual of metric compatibility `nabla_a g_{mn} =
/// d_a g_{mn} - Gamma^b_{am} g_{bn} - Gamma^b_{an} g_{mb}` (max-norm over
/// all index tuples); zero for the Levi-Civita connection of the same field.
pub fn metric_compatibility_residual<F>(
    metric_field: &F,
    conn: &ConnectionField,
    x: &[f64],
) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<SymTensor> + ?Sized,
{
    let n = conn.dim();
    let g = metric_field(x)?;
    let dg = metric_derivatives(metric_field, x)?;
    let gamma = conn.gamma(x)?;
    let mut worst: f64 = 0.0;
    for a in 0..n {
        for m in 0..n {
            for nu in 0..n {
                let mut r = dg[a].get(&[m, nu]);
                for b in 0..n {
                    r -= gamma.get(b, a, m) * g.get(&[b, nu]);
                    r -= gamma.get(b, a, nu) * g.get(&[m, b]);
                }
                worst = worst.max(r.abs());
            }
        }
    }
    Ok(worst)
}

/// Sectional curvature of the plane spanned by `u, v` at `x`:
/// `K = <R(u,v)v, u> / (|u|^2 |v|^2 - <u,v>^2)` with inner products taken
/// in the supplied metric.
pub fn sectional_curvature<F>(
    metric_field: &F,
    conn: &ConnectionField,
    x: &[f64],
    u: &[f64],
    v: &[f64],
) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<SymTensor> + ?Sized,
{
    let n = conn.dim();
    if u.len() != n || v.len() != n {
        return Err(GeomError::BadInput("plane vectors must match the chart dimension".into()));
    }
    let g = metric_field(x)?;
    let ip = |a: &[f64], b: &[f64]| -> f64 {
        (0..n).map(|i| (0..n).map(|j| g.get(&[i, j]) * a[i] * b[j]).sum::<f64>()).sum()
    };
    let gram = ip(u, u) * ip(v, v) - ip(u, v) * ip(u, v);
    if gram <= 1e-12 {
        return Err(GeomError::DegeneratePlane { gram });
    }
    let r = lower_curvature(&curvature(conn, x)?, &g);
    let mut num = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for m in 0..n {
                    num += r.get(i, j, k, m) * u[i] * v[j] * u[k] * v[m];
                }
            }
        }
    }
    Ok(num / gram)
}

/// Integrates the geodesic equation `x'' + Gamma^k_{ij} x'^i x'^j = 0` by
/// fixed-step classical RK4 from `(x0, v0)` over `[0, t_end]`.
///
/// `t_end` must be positive; to integrate backward in time, negate the
/// initial velocity (the equation is quadratic in velocity) and reflect the
/// returned times.
pub fn geodesic(
    conn: &ConnectionField,
    x0: &[f64],
    v0: &[f64],
    t_end: f64,
    steps: usize,
) -> Result<GeodesicPath> {
    let n = conn.dim();
    if x0.len() != n || v0.len() != n {
        return Err(GeomError::BadInput("initial state must match the chart dimension".into()));
    }
    if steps < 1 {
        return Err(GeomError::BadInput("steps must be >= 1".into()));
    }
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(GeomError::BadInput(format!("t_end must be positive and finite, got {t_end}")));
    }
    let dt = t_end / steps as f64;

    let accel = |x: &[f64], v: &[f64]| -> Result<Vec<f64>> {
        let gamma = conn.gamma(x)?;
        Ok((0..n).map(|k| -gamma.apply(v, v)[k]).collect())
    };

    let mut times = Vec::with_capacity(steps + 1);
    let mut points = Vec::with_capacity(steps + 1);
    let mut velocities = Vec::with_capacity(steps + 1);
    let mut x = x0.to_vec();
    let mut v = v0.to_vec();
    times.push(0.0);
    points.push(x.clone());
    velocities.push(v.clone());

    for step in 0..steps {
        match rk4_step_state(&accel, &x, &v, dt) {
            Ok((nx, nv)) => {
                x = nx;
                v = nv;
            }
            Err(e) => return Err(e),
        }
        if x.iter().chain(&v).any(|&a| a.abs() > BLOW_UP_LIMIT || !a.is_finite()) {
            let path = GeodesicPath { times, points, velocities };
            return Err(GeomError::BlowUp { path });
        }
        times.push((step + 1) as f64 * dt);
        points.push(x.clone());
        velocities.push(v.clone());
    }
    Ok(GeodesicPath { times, points, velocities })
}

/// One classical RK4 step of the coupled system (x' = v, v' = accel(x, v)).
fn rk4_step_state<F>(accel: &F, x: &[f64], v: &[f64], dt: f64) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: Fn(&[f64], &[f64]) -> Result<Vec<f64>>,
{
    let n = x.len();
    let shift = |base: &[f64], d: &[f64], s: f64| -> Vec<f64> {
        base.iter().zip(d).map(|(b, k)| b + s * k).collect()
    };

    let a1 = accel(x, v)?;
    let x2 = shift(x, v, dt / 2.0);
    let v2 = shift(v, &a1, dt / 2.0);
    let a2 = accel(&x2, &v2)?;
    let x3 = shift(x, &v2, dt / 2.0);
    let v3 = shift(v, &a2, dt / 2.0);
    let a3 = accel(&x3, &v3)?;
    let x4 = shift(x, &v3, dt);
    let v4 = shift(v, &a3, dt);
    let a4 = accel(&x4, &v4)?;

    let nx: Vec<f64> = (0..n)
        .map(|i| x[i] + dt / 6.0 * (v[i] + 2.0 * v2[i] + 2.0 * v3[i] + v4[i]))
        .collect();
    let nv: Vec<f64> = (0..n)
        .map(|i| v[i] + dt / 6.0 * (a1[i] + 2.0 * a2[i] + 2.0 * a3[i] + a4[i]))
        .collect();
    Ok((nx, nv))
}

/// Parallel transport of `w0` along a sampled curve: solves
/// `w'^k = -Gamma^k_{ij} x'^i w^j` with one RK4 step per segment, treating
/// the curve as piecewise linear between samples. Returns one vector per
/// sample, starting with `w0`.
pub fn parallel_transport(
    conn: &ConnectionField,
    path: &GeodesicPath,
    w0: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let n = conn.dim();
    if w0.len() != n {
        return Err(GeomError::BadInput("transported vector must match the chart dimension".into()));
    }
    let mut out = Vec::with_capacity(path.len());
    let mut w = w0.to_vec();
    out.push(w.clone());

    for seg in 0..path.len().saturating_sub(1) {
        let t0 = path.times[seg];
        let t1 = path.times[seg + 1];
        let dt = t1 - t0;
        let x0 = &path.points[seg];
        let x1 = &path.points[seg + 1];
        let xdot: Vec<f64> = x0.iter().zip(x1).map(|(a, b)| (b - a) / dt).collect();
        let pos = |s: f64| -> Vec<f64> {
            // s in [0, 1] along the segment.
            x0.iter().zip(x1).map(|(a, b)| a + s * (b - a)).collect()
        };
        let deriv = |s: f64, w: &[f64]| -> Result<Vec<f64>> {
            let gamma = conn.gamma(&pos(s))?;
            Ok((0..n).map(|k| -gamma.apply(&xdot, w)[k]).collect())
        };

        let k1 = deriv(0.0, &w)?;
        let w2: Vec<f64> = w.iter().zip(&k1).map(|(a, k)| a + dt / 2.0 * k).collect();
        let k2 = deriv(0.5, &w2)?;
        let w3: Vec<f64> = w.iter().zip(&k2).map(|(a, k)| a + dt / 2.0 * k).collect();
        let k3 = deriv(0.5, &w3)?;
        let w4: Vec<f64> = w.iter().zip(&k3).map(|(a, k)| a + dt * k).collect();
        let k4 = deriv(1.0, &w4)?;
        w = (0..n)
            .map(|i| w[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect();

        if w.iter().any(|&a| a.abs() > BLOW_UP_LIMIT || !a.is_finite()) {
            return Err(GeomError::TransportBlowUp { vectors: out });
        }
        out.push(w.clone());
    }
    Ok(out)
}
