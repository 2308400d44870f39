mod common;

use bai_lab::arms::{BanditInstance, Weights};
use bai_lab::complexity::{
    gamma, gamma_fc, gamma_na, objective, transport_cost, two_armed_gaussian_closed_form,
    Direction, SolverOptions,
};
use common::Family;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DIRECTIONS: [Direction; 2] = [Direction::FixedConfidence, Direction::NonAdaptive];

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn gaussian_instance() -> impl Strategy<Value = BanditInstance> {
    (2usize..=5)
        .prop_flat_map(|k| {
            (
                prop::collection::vec(-3.0f64..3.0, k),
                prop::collection::vec(0.2f64..4.0, k),
            )
        })
        .prop_filter_map("distinct best arm", |(m, v)| {
            let inst = BanditInstance::gaussian(&m, &v).ok()?;
            let b = inst.best_arm();
            let second = m
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != b)
                .map(|(_, &x)| x)
                .fold(f64::NEG_INFINITY, f64::max);
            (m[b] - second > 0.05).then_some(inst)
        })
}

fn bernoulli_instance() -> impl Strategy<Value = BanditInstance> {
    (2usize..=5)
        .prop_flat_map(|k| prop::collection::vec(0.02f64..0.98, k))
        .prop_filter_map("distinct best arm", |m| {
            let inst = BanditInstance::bernoulli(&m).ok()?;
            let b = inst.best_arm();
            let second = m
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != b)
                .map(|(_, &x)| x)
                .fold(f64::NEG_INFINITY, f64::max);
            (m[b] - second > 0.02).then_some(inst)
        })
}

fn any_instance() -> impl Strategy<Value = BanditInstance> {
    prop_oneof![gaussian_instance(), bernoulli_instance()]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn optimal_weights_lie_on_the_simplex(inst in any_instance()) {
        for d in DIRECTIONS {
            let r = gamma(&inst, d, &SolverOptions::default()).unwrap();
            let w = r.optimal_weights.as_slice();
            prop_assert!(w.iter().all(|&x| x >= 0.0));
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!((r.gamma * r.objective_value - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn relabeling_permutes_weights(inst in any_instance(), seed in any::<u64>()) {
        let k = inst.k();
        let mut perm: Vec<usize> = (0..k).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..k).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let permuted = inst.permuted(&perm).unwrap();
        for d in DIRECTIONS {
            let a = gamma(&inst, d, &SolverOptions::default()).unwrap();
            let b = gamma(&permuted, d, &SolverOptions::default()).unwrap();
            prop_assert!(rel(a.gamma, b.gamma) <= 1e-8);
            for (i, &p) in perm.iter().enumerate() {
                prop_assert!((b.optimal_weights[i] - a.optimal_weights[p]).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn gaussian_shift_leaves_solution_unchanged(inst in gaussian_instance(), c in -10.0f64..10.0) {
        let shifted: Vec<f64> = inst.means().iter().map(|m| m + c).collect();
        let moved = BanditInstance::gaussian(&shifted, &inst.variances().unwrap()).unwrap();
        let a = gamma_fc(&inst, 1e-10).unwrap();
        let b = gamma_fc(&moved, 1e-10).unwrap();
        prop_assert!(rel(a.gamma, b.gamma) <= 1e-8);
        for i in 0..inst.k() {
            prop_assert!((a.optimal_weights[i] - b.optimal_weights[i]).abs() <= 1e-6);
        }
    }

    #[test]
    fn gaussian_directions_coincide(inst in gaussian_instance()) {
        let fc = gamma_fc(&inst, 1e-8).unwrap();
        let na = gamma_na(&inst, 1e-8).unwrap();
        prop_assert!(rel(fc.gamma, na.gamma) <= 1e-6);
    }

    #[test]
    fn optimum_dominates_random_allocations(inst in any_instance(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for d in DIRECTIONS {
            let r = gamma(&inst, d, &SolverOptions::default()).unwrap();
            let f_star = r.objective_value;
            let uniform = vec![1.0 / inst.k() as f64; inst.k()];
            prop_assert!(f_star >= objective(&inst, &uniform, d) - 1e-8 * f_star);
            for _ in 0..20 {
                let w = common::random_simplex(&mut rng, inst.k());
                prop_assert!(f_star >= objective(&inst, &w, d) - 1e-8 * f_star);
            }
        }
    }

    #[test]
    fn objective_is_concave(inst in any_instance(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for d in DIRECTIONS {
            for _ in 0..10 {
                let w1 = common::random_simplex(&mut rng, inst.k());
                let w2 = common::random_simplex(&mut rng, inst.k());
                let l: f64 = rng.random();
                let mid: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| l * a + (1.0 - l) * b).collect();
                let lhs = objective(&inst, &mid, d);
                let rhs = l * objective(&inst, &w1, d) + (1.0 - l) * objective(&inst, &w2, d);
                prop_assert!(lhs >= rhs - 1e-12);
            }
        }
    }
}

fn random_triple(rng: &mut ChaCha8Rng, family: Family) -> (BanditInstance, Weights, usize) {
    loop {
        let k = rng.random_range(2..=5);
        let inst = match family {
            Family::Gaussian => {
                let m: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
                let v: Vec<f64> = (0..k).map(|_| rng.random_range(0.3..3.0)).collect();
                BanditInstance::gaussian(&m, &v)
            }
            Family::Bernoulli => {
                let m: Vec<f64> = (0..k).map(|_| rng.random_range(0.02..0.98)).collect();
                BanditInstance::bernoulli(&m)
            }
        };
        let Ok(inst) = inst else { continue };
        let w = Weights::new(common::random_simplex(rng, k)).unwrap();
        let j = loop {
            let j = rng.random_range(0..k);
            if j != inst.best_arm() {
                break j;
            }
        };
        return (inst, w, j);
    }
}

#[test]
fn transport_costs_match_grid_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for family in [Family::Gaussian, Family::Bernoulli] {
        for d in DIRECTIONS {
            for _ in 0..10 {
                let (inst, w, j) = random_triple(&mut rng, family);
                let b = inst.best_arm();
                let arm = |i: usize| {
                    let a = inst.arm(i);
                    (
                        a.mean(),
                        if family == Family::Gaussian {
                            a.variance()
                        } else {
                            0.0
                        },
                    )
                };
                let (_, want) = common::transport_oracle(
                    family,
                    arm(b),
                    arm(j),
                    w[b],
                    w[j],
                    d == Direction::NonAdaptive,
                    1e-4,
                );
                let got = transport_cost(&inst, &w, j, d).unwrap().value;
                assert!(
                    (got - want).abs() <= 1e-10,
                    "{family:?} {d:?}: {got} vs {want}"
                );
            }
        }
    }
}

#[test]
fn two_arm_gaussian_matches_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let m = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let v = [rng.random_range(0.1..5.0), rng.random_range(0.1..5.0)];
        let Ok(inst) = BanditInstance::gaussian(&m, &v) else {
            continue;
        };
        let exact = two_armed_gaussian_closed_form(&inst).unwrap();
        for d in DIRECTIONS {
            let r = gamma(&inst, d, &SolverOptions::with_tol(1e-10)).unwrap();
            assert!(rel(r.gamma, exact.gamma) <= 1e-8);
            assert!((r.optimal_weights[0] - exact.optimal_weights[0]).abs() <= 1e-6);
        }
    }
}

#[test]
fn gap_scaling_two_arms_is_exact() {
    let base = gamma_fc(
        &BanditInstance::gaussian(&[1.0, 0.0], &[1.0, 2.0]).unwrap(),
        1e-10,
    )
    .unwrap()
    .gamma;
    for c in [0.1, 0.5, 2.0, 7.0] {
        let inst = BanditInstance::gaussian(&[c, 0.0], &[1.0, 2.0]).unwrap();
        let g = gamma_fc(&inst, 1e-10).unwrap().gamma;
        assert!(rel(g * c * c, base) <= 1e-8, "c = {c}");
    }
}

#[test]
fn gap_scaling_three_arms_matches_grid_oracle() {
    let arms = [(1.0, 1.0), (0.4, 2.0), (0.0, 0.5)];
    for c in [1.0, 2.0] {
        let scaled = arms.map(|(m, v)| (c * m, v));
        let want = common::three_arm_gaussian_gamma_oracle(scaled, 2.5e-4);
        let inst = BanditInstance::gaussian(&scaled.map(|a| a.0), &scaled.map(|a| a.1)).unwrap();
        let got = gamma_fc(&inst, 1e-10).unwrap().gamma;
        assert!(rel(got, want) <= 1e-3, "c = {c}: {got} vs {want}");
    }
    let g1 = gamma_fc(
        &BanditInstance::gaussian(&[1.0, 0.4, 0.0], &[1.0, 2.0, 0.5]).unwrap(),
        1e-10,
    )
    .unwrap()
    .gamma;
    let g3 = gamma_fc(
        &BanditInstance::gaussian(&[3.0, 1.2, 0.0], &[1.0, 2.0, 0.5]).unwrap(),
        1e-10,
    )
    .unwrap()
    .gamma;
    assert!(rel(g3 * 9.0, g1) <= 1e-8);
}

/// Minimises over whole alternative instances on a grid, without reducing
/// to per-challenger problems first.
fn full_alternative_oracle(family: Family, arms: &[(f64, f64)], w: &[f64], reversed: bool) -> f64 {
    let lo = arms.iter().map(|a| a.0).fold(f64::INFINITY, f64::min);
    let hi = arms.iter().map(|a| a.0).fold(f64::NEG_INFINITY, f64::max);
    let b = arms.iter().position(|a| a.0 == hi).unwrap();
    let n = if arms.len() == 2 { 2000 } else { 150 };
    let grid: Vec<f64> = (0..=n)
        .map(|i| lo + (hi - lo) * i as f64 / n as f64)
        .collect();
    let costs: Vec<Vec<f64>> = arms
        .iter()
        .zip(w)
        .map(|(&(m, v), &wi)| {
            grid.iter()
                .map(|&x| wi * common::move_cost(family, m, v, x, reversed))
                .collect()
        })
        .collect();
    let mut best = f64::INFINITY;
    let mut idx = vec![0usize; arms.len()];
    loop {
        let top = idx[b];
        if idx.iter().enumerate().any(|(i, &g)| i != b && g >= top) {
            let c: f64 = idx.iter().enumerate().map(|(i, &g)| costs[i][g]).sum();
            best = best.min(c);
        }
        let mut p = 0;
        loop {
            if p == idx.len() {
                return best;
            }
            idx[p] += 1;
            if idx[p] <= n {
                break;
            }
            idx[p] = 0;
            p += 1;
        }
    }
}

#[test]
fn per_challenger_reduction_matches_full_alternative_search() {
    type Case = (Family, Vec<(f64, f64)>, Vec<f64>);
    let cases: [Case; 4] = [
        (
            Family::Gaussian,
            vec![(1.0, 1.0), (0.0, 3.0)],
            vec![0.3, 0.7],
        ),
        (
            Family::Bernoulli,
            vec![(0.8, 0.0), (0.5, 0.0)],
            vec![0.6, 0.4],
        ),
        (
            Family::Gaussian,
            vec![(0.2, 1.0), (1.0, 0.5), (0.5, 2.0)],
            vec![0.2, 0.5, 0.3],
        ),
        (
            Family::Bernoulli,
            vec![(0.3, 0.0), (0.7, 0.0), (0.5, 0.0)],
            vec![0.3, 0.3, 0.4],
        ),
    ];
    for (family, arms, w) in cases {
        let means: Vec<f64> = arms.iter().map(|a| a.0).collect();
        let inst = match family {
            Family::Gaussian => {
                BanditInstance::gaussian(&means, &arms.iter().map(|a| a.1).collect::<Vec<_>>())
            }
            Family::Bernoulli => BanditInstance::bernoulli(&means),
        }
        .unwrap();
        for d in DIRECTIONS {
            let want = full_alternative_oracle(family, &arms, &w, d == Direction::NonAdaptive);
            let got = objective(&inst, &w, d);
            let tol = if arms.len() == 2 { 1e-5 } else { 2e-3 };
            assert!(got <= want + 1e-12, "{family:?} {d:?}");
            assert!(rel(got, want) <= tol, "{family:?} {d:?}: {got} vs {want}");
        }
    }
}

#[test]
fn two_arm_bernoulli_matches_simplex_grid() {
    for means in [[0.8, 0.5], [0.9, 0.6], [0.3, 0.1]] {
        let inst = BanditInstance::bernoulli(&means).unwrap();
        for d in DIRECTIONS {
            let (want, w0) = common::two_arm_gamma_oracle(
                Family::Bernoulli,
                [(means[0], 0.0), (means[1], 0.0)],
                d == Direction::NonAdaptive,
                1e-3,
                1e-4,
            );
            let r = gamma(&inst, d, &SolverOptions::default()).unwrap();
            assert!(
                rel(r.gamma, want) <= 1e-3,
                "{means:?} {d:?}: {} vs {want}",
                r.gamma
            );
            assert!((r.optimal_weights[0] - w0).abs() <= 5e-3);
        }
    }
}

#[test]
fn frozen_bernoulli_complexities() {
    // Independent simplex-grid computation with refinement.
    let inst = BanditInstance::bernoulli(&[0.9, 0.6]).unwrap();
    let fc = gamma_fc(&inst, 1e-10).unwrap();
    let na = gamma_na(&inst, 1e-10).unwrap();
    assert!(rel(fc.gamma, 15.714671714) <= 1e-8);
    assert!(rel(na.gamma, 14.744867247) <= 1e-8);
    assert!((fc.optimal_weights[0] - 0.5376).abs() <= 1e-4);
    assert!((na.optimal_weights[0] - 0.4598).abs() <= 1e-4);

    let three = BanditInstance::gaussian(&[1.0, 0.0, -1.0], &[1.0, 1.0, 1.0]).unwrap();
    assert!(rel(gamma_fc(&three, 1e-10).unwrap().gamma, 8.57122063316) <= 1e-9);
}
