//! Shared fixtures for the benchmark suite.

use infogeo_core::{ExponentialFamily, SampleSpace, SymTensor};

/// A well-conditioned symmetric positive definite matrix of size `n`,
/// deterministic in `n`, for inversion and index benchmarks.
pub fn spd_matrix(n: usize) -> SymTensor {
    SymTensor::from_fn_sym(n, 2, |idx| {
        let (i, j) = (idx[0], idx[1]);
        let base = 1.0 / (1.0 + (i as f64 - j as f64).abs());
        base + if i == j { n as f64 } else { 0.0 }
    })
}

/// Deterministic minimal family with `m` atoms and `n` statistics, built
/// from shifted cosine tables so entries are generic (no hidden symmetry).
pub fn cosine_family(m: usize, n: usize) -> ExponentialFamily {
    let stats: Vec<Vec<f64>> = (0..m)
        .map(|w| (0..n).map(|i| ((w * (i + 2) + i) as f64).cos()).collect())
        .collect();
    ExponentialFamily::new(SampleSpace::atoms(m).unwrap(), stats).unwrap()
}

/// Deterministic symmetric cubic tensor with generic entries.
pub fn cubic_field(n: usize) -> SymTensor {
    SymTensor::from_fn_sym(n, 3, |idx| ((idx[0] * 9 + idx[1] * 4 + idx[2] + 1) as f64).sin())
}
