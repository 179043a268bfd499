//! Crate-level invariants exercised over randomized inputs: simplex
//! normalization across the natural-parameter range, index round trips,
//! and exactness of the finite-difference stencils on polynomials they
//! should differentiate without truncation error.

#![allow(clippy::needless_range_loop)]

use infogeo_core::{
    finite_diff, fisher_metric, lower_index, metric_inverse, raise_index, ExponentialFamily,
    SymTensor, Tensor3,
};
use proptest::prelude::*;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Draws a random minimal family: 2..=8 atoms, 1..=3 statistics bounded
/// by 2 in absolute value. Rank-deficient draws are rare and skipped.
fn random_family(rng: &mut ChaCha8Rng) -> ExponentialFamily {
    loop {
        let m = rng.random_range(2..=8);
        let n = rng.random_range(1..=3.min(m - 1));
        let stats: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let space = infogeo_core::SampleSpace::atoms(m).unwrap();
        if let Ok(fam) = ExponentialFamily::new(space, stats) {
            return fam;
        }
    }
}

#[test]
fn densities_sum_to_one_across_the_parameter_range() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..1000 {
        let fam = random_family(&mut rng);
        let theta: Vec<f64> =
            (0..fam.n()).map(|_| rng.random_range(-50.0..50.0)).collect();
        let t = fam.point(&theta).unwrap();
        let p = fam.density(&t).unwrap();
        let total: f64 = p.as_slice().iter().sum();
        assert!(
            (total - 1.0).abs() <= 1e-12,
            "density sums to {total} at theta {theta:?}"
        );
    }
}

#[test]
fn fisher_metric_inverts_cleanly_on_random_families() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..50 {
        let fam = random_family(&mut rng);
        let theta: Vec<f64> =
            (0..fam.n()).map(|_| rng.random_range(-2.0..2.0)).collect();
        let t = fam.point(&theta).unwrap();
        let g = fisher_metric(&fam, &t).unwrap();
        let g_inv = metric_inverse(&g).unwrap();
        let n = g.dim();
        for i in 0..n {
            for j in 0..n {
                let prod: f64 =
                    (0..n).map(|k| g.get(&[i, k]) * g_inv.get(&[k, j])).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((prod - expect).abs() < 1e-8);
            }
        }
    }
}

proptest! {
    /// Raising an index with g^{-1} and lowering it back with g is the
    /// identity on cubic tensors.
    #[test]
    fn raise_lower_round_trip(
        seed in 0u64..1000,
        n in 1usize..=4,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = SymTensor::from_fn_sym(n, 3, |_| rng.random_range(-2.0..2.0));
        // SPD metric: Gram matrix plus a diagonal shift.
        let cols: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let g = SymTensor::from_fn_sym(n, 2, |idx| {
            let dot: f64 = (0..n).map(|k| cols[k][idx[0]] * cols[k][idx[1]]).sum();
            dot + if idx[0] == idx[1] { 1.0 } else { 0.0 }
        });
        let g_inv = metric_inverse(&g).unwrap();
        let raised = raise_index(&a, &g_inv).unwrap();
        let lowered: Tensor3 = lower_index(&raised, &g).unwrap();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    prop_assert!((lowered.get(i, j, k) - a.get(&[i, j, k])).abs() <= 1e-10);
                }
            }
        }
    }

    /// Central differences of order 1 and 2 have zero truncation error on
    /// quadratics; only rounding noise remains.
    #[test]
    fn finite_differences_are_exact_on_quadratics(
        seed in 0u64..1000,
        n in 1usize..=3,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
        let lin: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let quad: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let x0: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();

        let lin_f = lin.clone();
        let quad_f = quad.clone();
        let f = move |x: &[f64]| -> Result<f64, infogeo_core::TensorError> {
            let mut v = 0.0;
            for i in 0..x.len() {
                v += lin_f[i] * x[i];
                for j in 0..x.len() {
                    v += 0.5 * (quad_f[i][j] + quad_f[j][i]) * x[i] * x[j];
                }
            }
            Ok(v)
        };

        let grad = finite_diff(f.clone(), &x0, 1, None).unwrap();
        for i in 0..n {
            let expect: f64 = lin[i]
                + (0..n).map(|j| 0.5 * (quad[i][j] + quad[j][i]) * 2.0 * x0[j]).sum::<f64>();
            prop_assert!((grad.get(&[i]) - expect).abs() <= 1e-7);
        }

        let hess = finite_diff(f, &x0, 2, None).unwrap();
        for i in 0..n {
            for j in 0..n {
                let expect = quad[i][j] + quad[j][i];
                prop_assert!((hess.get(&[i, j]) - expect).abs() <= 1e-6);
            }
        }
    }
}
