//! Dense symmetric tensors, index raising/lowering, and finite differences.
//!
//! Everything downstream (metrics, cubic tensors, connection coefficients)
//! is small and dense, so storage is a flat `Vec<f64>` in row-major order.
//! Symmetric tensors enforce their symmetry *exactly*: every write fills the
//! whole permutation orbit, and construction from raw data checks the orbit
//! bit-for-bit.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("tensor data is not symmetric at index {index:?}: {a} != {b}")]
    NotSymmetric { index: Vec<usize>, a: f64, b: f64 },
    #[error("metric is numerically singular (pivot {pivot:.3e} below relative tolerance {tol:.3e})")]
    SingularMetric { pivot: f64, tol: f64 },
    #[error("finite differences support derivative orders 1..=4, got {0}")]
    UnsupportedOrder(usize),
    #[error("function evaluation failed: {0}")]
    EvalFailed(String),
}

pub type Result<T> = std::result::Result<T, TensorError>;

/// Relative pivot threshold below which a metric counts as singular.
pub const SINGULAR_PIVOT_RTOL: f64 = 1e-12;

/// Default finite-difference steps by derivative order (1-based).
/// Calibrated so truncation and roundoff balance for unit-scale smooth inputs.
pub const FD_DEFAULT_STEP: [f64; 4] = [1e-4, 1e-4, 1e-3, 5e-3];

/// Fully symmetric tensor of arbitrary order, stored dense.
#[derive(Clone, Debug, PartialEq)]
pub struct SymTensor {
    dim: usize,
    order: usize,
    data: Vec<f64>,
}

impl SymTensor {
    pub fn zeros(dim: usize, order: usize) -> Self {
        assert!(dim >= 1 && order >= 1, "tensor needs dim >= 1 and order >= 1");
        SymTensor { dim, order, data: vec![0.0; dim.pow(order as u32)] }
    }

    /// Builds a symmetric tensor by evaluating `f` once per *sorted* index
    /// tuple and mirroring the value across the permutation orbit, so the
    /// result is symmetric by construction (bitwise).
    pub fn from_fn_sym(dim: usize, order: usize, mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let mut t = SymTensor::zeros(dim, order);
        let mut idx = vec![0usize; order];
        loop {
            if idx.windows(2).all(|w| w[0] <= w[1]) {
                let v = f(&idx);
                t.set_sym(&idx, v);
            }
            if !next_index(&mut idx, dim) {
                break;
            }
        }
        t
    }

    /// Wraps dense row-major data, verifying exact symmetry across all
    /// permutations of every index tuple.
    pub fn from_dense(dim: usize, order: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != dim.pow(order as u32) {
            return Err(TensorError::DimMismatch { expected: dim.pow(order as u32), got: data.len() });
        }
        let t = SymTensor { dim, order, data };
        let mut idx = vec![0usize; order];
        loop {
            let mut sorted = idx.clone();
            sorted.sort_unstable();
            let a = t.get(&idx);
            let b = t.get(&sorted);
            if a.to_bits() != b.to_bits() {
                return Err(TensorError::NotSymmetric { index: idx.clone(), a, b });
            }
            if !next_index(&mut idx, dim) {
                break;
            }
        }
        Ok(t)
    }

    /// Convenience constructor for order-2 tensors from nested rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for r in rows {
            if r.len() != dim {
                return Err(TensorError::DimMismatch { expected: dim, got: r.len() });
            }
            data.extend_from_slice(r);
        }
        SymTensor::from_dense(dim, 2, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    fn flat(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.order);
        idx.iter().fold(0, |acc, &i| {
            debug_assert!(i < self.dim);
            acc * self.dim + i
        })
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.flat(idx)]
    }

    /// Writes `v` at `idx` and every permutation of it.
    pub fn set_sym(&mut self, idx: &[usize], v: f64) {
        let mut perm = idx.to_vec();
        perm.sort_unstable();
        loop {
            let k = self.flat(&perm);
            self.data[k] = v;
            if !next_permutation(&mut perm) {
                break;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest absolute entry-wise difference.
    pub fn max_abs_diff(&self, other: &SymTensor) -> f64 {
        assert_eq!(self.data.len(), other.data.len());
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Order-2 only: row-major matrix rows.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        assert_eq!(self.order, 2);
        (0..self.dim)
            .map(|i| self.data[i * self.dim..(i + 1) * self.dim].to_vec())
            .collect()
    }
}

/// General (not necessarily symmetric) order-3 tensor, index layout `[i][j][k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3 {
    dim: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(dim: usize) -> Self {
        Tensor3 { dim, data: vec![0.0; dim * dim * dim] }
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = Tensor3::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                for k in 0..dim {
                    t.set(i, j, k, f(i, j, k));
                }
            }
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.dim + j) * self.dim + k]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        self.data[(i * self.dim + j) * self.dim + k] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Tensor3) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// General order-4 tensor, dense, layout `[i][j][k][m]`; no symmetry is
/// enforced (curvature tensors are only antisymmetric in their last pair).
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor4 {
    dim: usize,
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(dim: usize) -> Self {
        Tensor4 { dim, data: vec![0.0; dim * dim * dim * dim] }
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let mut t = Tensor4::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                for k in 0..dim {
                    for m in 0..dim {
                        t.set(i, j, k, m, f(i, j, k, m));
                    }
                }
            }
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize, k: usize, m: usize) -> f64 {
        self.data[((i * self.dim + j) * self.dim + k) * self.dim + m]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, m: usize, v: f64) {
        self.data[((i * self.dim + j) * self.dim + k) * self.dim + m] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Tensor4) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Tensor with one upper and two lower slots, layout `T^k_{ij}` as `[k][i][j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedTensor12 {
    dim: usize,
    data: Vec<f64>,
}

impl MixedTensor12 {
    pub fn zeros(dim: usize) -> Self {
        MixedTensor12 { dim, data: vec![0.0; dim * dim * dim] }
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = MixedTensor12::zeros(dim);
        for k in 0..dim {
            for i in 0..dim {
                for j in 0..dim {
                    t.set(k, i, j, f(k, i, j));
                }
            }
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.dim + i) * self.dim + j]
    }

    pub fn set(&mut self, k: usize, i: usize, j: usize, v: f64) {
        self.data[(k * self.dim + i) * self.dim + j] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Bilinear application: `out^k = T^k_{ij} u^i v^j`.
    pub fn apply(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        assert_eq!(u.len(), self.dim);
        assert_eq!(v.len(), self.dim);
        let n = self.dim;
        let mut out = vec![0.0; n];
        for k in 0..n {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    s += self.get(k, i, j) * u[i] * v[j];
                }
            }
            out[k] = s;
        }
        out
    }

    /// Left-multiplication operator `L_u` with entries `L[l][j] = T^l_{ij} u^i`.
    pub fn mult_operator(&self, u: &[f64]) -> Vec<Vec<f64>> {
        let n = self.dim;
        let mut m = vec![vec![0.0; n]; n];
        for l in 0..n {
            for j in 0..n {
                m[l][j] = (0..n).map(|i| self.get(l, i, j) * u[i]).sum();
            }
        }
        m
    }
}

/// Inverse of a symmetric order-2 tensor by Gauss-Jordan elimination with
/// partial pivoting. Fails with `SingularMetric` when a pivot drops below
/// `SINGULAR_PIVOT_RTOL` relative to the largest input entry.
pub fn metric_inverse(g: &SymTensor) -> Result<SymTensor> {
    assert_eq!(g.order(), 2, "metric_inverse expects an order-2 tensor");
    let n = g.dim();
    let scale = g.max_abs().max(f64::MIN_POSITIVE);
    let tol = SINGULAR_PIVOT_RTOL * scale;

    let mut a: Vec<Vec<f64>> = g.to_rows();
    let mut inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    for col in 0..n {
        let (piv_row, piv_val) = (col..n)
            .map(|r| (r, a[r][col]))
            .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
            .unwrap();
        if piv_val.abs() < tol {
            return Err(TensorError::SingularMetric { pivot: piv_val.abs(), tol });
        }
        a.swap(col, piv_row);
        inv.swap(col, piv_row);
        let p = a[col][col];
        for j in 0..n {
            a[col][j] /= p;
            inv[col][j] /= p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a[r][col];
            if f == 0.0 {
                continue;
            }
            for j in 0..n {
                a[r][j] -= f * a[col][j];
                inv[r][j] -= f * inv[col][j];
            }
        }
    }

    // The computed inverse of a symmetric matrix can drift off symmetry by
    // rounding; average the transpose pair so the result is exactly symmetric.
    Ok(SymTensor::from_fn_sym(n, 2, |idx| {
        let (i, j) = (idx[0], idx[1]);
        0.5 * (inv[i][j] + inv[j][i])
    }))
}

/// Determinant of a symmetric order-2 tensor (LU with partial pivoting).
pub fn determinant(g: &SymTensor) -> f64 {
    assert_eq!(g.order(), 2);
    let n = g.dim();
    let mut a = g.to_rows();
    let mut det = 1.0;
    for col in 0..n {
        let piv_row = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs())).unwrap();
        if a[piv_row][col] == 0.0 {
            return 0.0;
        }
        if piv_row != col {
            a.swap(col, piv_row);
            det = -det;
        }
        det *= a[col][col];
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for j in col..n {
                a[r][j] -= f * a[col][j];
            }
        }
    }
    det
}

/// Raises the last index of a symmetric cubic tensor with an inverse metric:
/// `out^k_{ij} = g^{km} T_{ijm}`.
pub fn raise_index(t: &SymTensor, g_inv: &SymTensor) -> Result<MixedTensor12> {
    assert_eq!(t.order(), 3);
    assert_eq!(g_inv.order(), 2);
    if t.dim() != g_inv.dim() {
        return Err(TensorError::DimMismatch { expected: t.dim(), got: g_inv.dim() });
    }
    let n = t.dim();
    Ok(MixedTensor12::from_fn(n, |k, i, j| {
        (0..n).map(|m| g_inv.get(&[k, m]) * t.get(&[i, j, m])).sum()
    }))
}

/// Lowers the upper index of a `(1,2)` tensor: `out_{ijm} = g_{mk} T^k_{ij}`.
/// Returned dense with layout `[i][j][m]`; the result is only as symmetric as
/// the inputs make it, so no symmetry is enforced.
pub fn lower_index(t: &MixedTensor12, g: &SymTensor) -> Result<Tensor3> {
    assert_eq!(g.order(), 2);
    if t.dim() != g.dim() {
        return Err(TensorError::DimMismatch { expected: t.dim(), got: g.dim() });
    }
    let n = t.dim();
    Ok(Tensor3::from_fn(n, |i, j, m| {
        (0..n).map(|k| g.get(&[m, k]) * t.get(k, i, j)).sum()
    }))
}

/// Central finite differences of a scalar function, returning the symmetric
/// derivative tensor of the requested order (1..=4).
///
/// Each entry composes one central difference per index, giving an O(h^2)
/// approximation from 2^order evaluations; entries are computed once per
/// sorted index tuple so the output is symmetric bitwise.
pub fn finite_diff<F>(mut f: F, x: &[f64], order: usize, h: Option<f64>) -> Result<SymTensor>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if order == 0 || order > 4 {
        return Err(TensorError::UnsupportedOrder(order));
    }
    let h = h.unwrap_or(FD_DEFAULT_STEP[order - 1]);
    let dim = x.len();
    let denom = (2.0 * h).powi(order as i32);

    let mut err: Option<TensorError> = None;
    let t = SymTensor::from_fn_sym(dim, order, |idx| {
        if err.is_some() {
            return 0.0;
        }
        let mut sum = 0.0;
        for bits in 0..(1u32 << order) {
            let mut point = x.to_vec();
            let mut sign = 1.0;
            for (slot, &i) in idx.iter().enumerate() {
                if bits >> slot & 1 == 1 {
                    point[i] += h;
                } else {
                    point[i] -= h;
                    sign = -sign;
                }
            }
            match f(&point) {
                Ok(v) => sum += sign * v,
                Err(e) => {
                    err = Some(e);
                    return 0.0;
                }
            }
        }
        sum / denom
    });
    match err {
        Some(e) => Err(e),
        None => Ok(t),
    }
}

/// Advances a row-major multi-index; returns false after the last one.
fn next_index(idx: &mut [usize], dim: usize) -> bool {
    for slot in (0..idx.len()).rev() {
        idx[slot] += 1;
        if idx[slot] < dim {
            return true;
        }
        idx[slot] = 0;
    }
    false
}

/// Lexicographic next permutation (for iterating a symmetry orbit).
fn next_permutation(p: &mut [usize]) -> bool {
    if p.len() < 2 {
        return false;
    }
    let mut i = p.len() - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = p.len() - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}
