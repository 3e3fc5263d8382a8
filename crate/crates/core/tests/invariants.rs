//! Structural properties that must hold for any input.

use poperm_core::linalg::{sinkhorn, DenseMatrix};
use poperm_core::oracle::build_q;
use poperm_core::ordering::{cost_matrix, pairwise_f, OrderingCostParams};
use poperm_core::permopt::{po_forward, total_cost, ComparisonStructure, InitMode, InitParams, PoConfig};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

fn random_params(rng: &mut ChaCha8Rng, dim: usize, hidden: usize, channels: usize) -> OrderingCostParams {
    OrderingCostParams::new(
        random(rng, hidden, 2 * dim),
        (0..hidden).map(|_| rng.gen_range(-0.3..0.3)).collect(),
        random(rng, channels, hidden),
        (0..channels).map(|_| rng.gen_range(-0.3..0.3)).collect(),
    )
    .unwrap()
}

fn structure_strategy() -> impl Strategy<Value = ComparisonStructure> {
    prop_oneof![
        (2usize..8).prop_map(ComparisonStructure::Sequence),
        (1usize..4, 1usize..4)
            .prop_filter("at least two tiles", |(r, c)| r * c >= 2)
            .prop_map(|(r, c)| ComparisonStructure::grid(r, c).unwrap()),
    ]
}

/// Plain re-derivation of the comparator: one hidden ReLU layer on `[a; b]`.
fn reference_f(p: &OrderingCostParams, a: &[f64], b: &[f64]) -> Vec<f64> {
    let input: Vec<f64> = a.iter().chain(b).copied().collect();
    let hidden: Vec<f64> = (0..p.w1.rows())
        .map(|h| {
            let s: f64 = p.w1.row(h).iter().zip(&input).map(|(w, v)| w * v).sum();
            (s + p.b1[h]).max(0.0)
        })
        .collect();
    (0..p.w2.rows())
        .map(|c| p.w2.row(c).iter().zip(&hidden).map(|(w, v)| w * v).sum::<f64>() + p.b2[c])
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cost_is_antisymmetric_with_unit_norm(seed: u64, n in 2usize..9, dim in 1usize..4, channels in 1usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = random_params(&mut rng, dim, 6, channels);
        let x = random(&mut rng, n, dim);
        let (costs, _) = cost_matrix(&params, &x).unwrap();
        for c in &costs {
            for i in 0..n {
                prop_assert_eq!(c[(i, i)], 0.0);
                for j in 0..n {
                    prop_assert_eq!(c[(i, j)], -c[(j, i)]);
                }
            }
            let norm = c.frobenius_norm();
            prop_assert!(norm == 0.0 || (norm - 1.0).abs() <= 1e-12, "norm {}", norm);
        }
    }

    #[test]
    fn cost_is_permutation_equivariant(seed: u64, n in 2usize..9, dim in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = random_params(&mut rng, dim, 5, 2);
        let x = random(&mut rng, n, dim);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let (c, _) = cost_matrix(&params, &x).unwrap();
        let (cp, _) = cost_matrix(&params, &x.select_rows(&order)).unwrap();
        for (c, cp) in c.iter().zip(&cp) {
            for i in 0..n {
                for j in 0..n {
                    prop_assert_eq!(cp[(i, j)], c[(order[i], order[j])]);
                }
            }
        }
    }

    #[test]
    fn comparator_matches_reference(seed: u64, dim in 1usize..4, hidden in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = random_params(&mut rng, dim, hidden, 2);
        let a: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let b: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let got = pairwise_f(&params, &a, &b).unwrap();
        for (g, r) in got.iter().zip(reference_f(&params, &a, &b)) {
            prop_assert!((g - r).abs() <= 1e-12);
        }
    }

    #[test]
    fn sinkhorn_ignores_row_and_global_shifts(seed: u64, n in 1usize..8, iters in 1usize..6, shift in -50.0f64..50.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = DenseMatrix::from_fn(n, n, |_, _| rng.gen_range(-5.0..5.0));
        let row_shift: Vec<f64> = (0..n).map(|_| rng.gen_range(-20.0..20.0)).collect();
        let shifted = DenseMatrix::from_fn(n, n, |i, j| m[(i, j)] + row_shift[i] + shift);
        let (p, _) = sinkhorn(&m, iters).unwrap();
        let (q, _) = sinkhorn(&shifted, iters).unwrap();
        prop_assert!(p.max_abs_diff(&q).unwrap() <= 1e-12);
    }

    #[test]
    fn total_cost_matches_double_sum_and_quadratic_form(seed: u64, structure in structure_strategy()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = structure.positions();
        let costs: Vec<DenseMatrix> = (0..structure.channels())
            .map(|_| {
                let r = random(&mut rng, n, n);
                r.sub(&r.transpose()).unwrap()
            })
            .collect();
        let (p, _) = sinkhorn(&DenseMatrix::from_fn(n, n, |_, _| rng.gen_range(-3.0..3.0)), 10).unwrap();
        let direct = total_cost(&costs, &p, &structure).unwrap();

        let mut double_sum = 0.0;
        for (c, o) in costs.iter().zip(structure.order_matrices()) {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        for kk in 0..n {
                            double_sum += c[(i, j)] * p[(i, k)] * p[(j, kk)] * o[(k, kk)];
                        }
                    }
                }
            }
        }
        let quadratic = build_q(&costs, &structure).unwrap().quadratic_form(&p).unwrap();
        prop_assert!((direct - double_sum).abs() <= 1e-10, "{} vs {}", direct, double_sum);
        prop_assert!((direct - quadratic).abs() <= 1e-10, "{} vs {}", direct, quadratic);
    }

    #[test]
    fn output_ignores_input_order(seed: u64, n in 2usize..8, linear_init: bool) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = 2;
        let params = random_params(&mut rng, dim, 6, 1);
        let x = random(&mut rng, n, dim);
        let init = linear_init.then(|| InitParams { w: random(&mut rng, n, dim) });
        let config = PoConfig {
            init: if linear_init { InitMode::LinearAssignment } else { InitMode::Uniform },
            ..PoConfig::sequence(n, 4, 1.0)
        };
        let (y, _, _) = po_forward(&x, &params, &config, init.as_ref()).unwrap();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let (ys, _, _) = po_forward(&x.select_rows(&order), &params, &config, init.as_ref()).unwrap();
        prop_assert!(y.max_abs_diff(&ys).unwrap() <= 1e-10);
    }
}
