use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::fixtures;
use crate::model::{IvSpec, Nest, NestTree, ParamKind, ParamLayout, ParameterVector, Slot};

/// Layout with one utility slot per alternative followed by one slot per free nest.
fn utility_layout(tree: &NestTree) -> ParamLayout {
    let mut slots: Vec<Slot> = (0..tree.n_alternatives())
        .map(|j| Slot {
            name: format!("v{j}"),
            kind: ParamKind::Beta,
        })
        .collect();
    slots.extend(tree.free_nests().map(|n| Slot {
        name: n.id.clone(),
        kind: ParamKind::Iv,
    }));
    ParamLayout { slots }
}

/// Single observation whose alternative `j` has utility `v[j]`.
fn direct_utilities(tree: &NestTree, v: &[f64], lambdas_free: &[f64]) -> (ParameterVector, DesignMatrix) {
    let layout = utility_layout(tree);
    let mut values = v.to_vec();
    values.extend_from_slice(lambdas_free);
    let rows = vec![(0..v.len()).map(|j| vec![(j, 1.0)]).collect::<Vec<_>>()];
    (ParameterVector::new(layout, values), DesignMatrix::from_rows(v.len(), &rows))
}

/// Textbook evaluation with no shifting, for moderate utilities only.
fn naive_probabilities(tree: &NestTree, v: &[f64], lambda: &[f64]) -> Vec<f64> {
    let mut p = vec![0.0; v.len()];
    let ivs: Vec<f64> = tree
        .nests
        .iter()
        .zip(lambda)
        .map(|(n, &l)| {
            n.members
                .iter()
                .map(|m| (v[tree.alternative_index(m).unwrap()] / l).exp())
                .sum::<f64>()
                .ln()
        })
        .collect();
    let denom: f64 = ivs.iter().zip(lambda).map(|(iv, l)| (l * iv).exp()).sum();
    for ((n, &l), iv) in tree.nests.iter().zip(lambda).zip(&ivs) {
        let pn = (l * iv).exp() / denom;
        let inner: f64 = n
            .members
            .iter()
            .map(|m| (v[tree.alternative_index(m).unwrap()] / l).exp())
            .sum();
        for m in &n.members {
            let j = tree.alternative_index(m).unwrap();
            p[j] = pn * (v[j] / l).exp() / inner;
        }
    }
    p
}

/// Random partition of 2..=7 alternatives into nests with random inclusive values.
fn random_tree(rng: &mut impl Rng, all_fixed_one: bool) -> (NestTree, Vec<f64>) {
    let n_alts = rng.random_range(2..=7);
    let names: Vec<String> = (0..n_alts).map(|j| format!("a{j}")).collect();
    let mut nests: Vec<Vec<String>> = Vec::new();
    for name in &names {
        if nests.is_empty() || rng.random_bool(0.5) {
            nests.push(vec![name.clone()]);
        } else {
            let k = rng.random_range(0..nests.len());
            nests[k].push(name.clone());
        }
    }
    let mut lambdas = Vec::new();
    let nests: Vec<Nest> = nests
        .into_iter()
        .enumerate()
        .map(|(k, members)| {
            let refs: Vec<&str> = members.iter().map(String::as_str).collect();
            let iv = if all_fixed_one || members.len() == 1 {
                IvSpec::Fixed(1.0)
            } else {
                let l = rng.random_range(0.05..=1.0);
                lambdas.push(l);
                IvSpec::Free(l)
            };
            Nest::new(format!("n{k}"), &refs, iv)
        })
        .collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut tree = NestTree::new(&refs, nests);
    tree.plain_mnl = true;
    (tree, lambdas)
}

fn all_lambdas(tree: &NestTree, free: &[f64]) -> Vec<f64> {
    let mut it = free.iter();
    tree.nests
        .iter()
        .map(|n| match n.iv {
            IvSpec::Fixed(v) => v,
            IvSpec::Free(_) => *it.next().unwrap(),
        })
        .collect()
}

#[test]
fn symmetric_pair_splits_evenly() {
    for lam in [0.1, 0.5, 1.0] {
        let tree = NestTree {
            plain_mnl: true,
            ..NestTree::new(&["a", "b"], vec![Nest::new("ab", &["a", "b"], IvSpec::Free(lam))])
        };
        let (params, design) = direct_utilities(&tree, &[0.0, 0.0], &[lam]);
        let p = choice_probabilities(&params, &design, &tree).unwrap();
        assert_eq!(p.row(0), &[0.5, 0.5]);
    }
}

#[test]
fn severity_tree_with_unit_ivs_is_uniform() {
    let mut tree = fixtures::severity_tree(1.0);
    for n in &mut tree.nests {
        n.iv = IvSpec::Fixed(1.0);
    }
    let (params, design) = direct_utilities(&tree, &[0.3; 5], &[]);
    let p = choice_probabilities(&params, &design, &tree).unwrap();
    for &pi in p.row(0) {
        assert!((pi - 0.2).abs() < 1e-15);
    }
}

#[test]
fn severity_tree_matches_high_precision_oracle() {
    // 50-digit evaluation of the closed form, V = (1.0, 0.5, 0.2, 0.1, 0.0),
    // inclusive values 0.365 / 0.283 / 1.
    const ORACLE: [f64; 5] = [
        0.463_053_138_499_714_774_7,
        0.226_912_548_946_466_176_91,
        0.078_609_615_373_146_795_671,
        0.131_464_944_510_841_589_35,
        0.099_959_752_669_830_663_369,
    ];
    let tree = fixtures::severity_tree(0.5);
    let (params, design) = direct_utilities(&tree, &[1.0, 0.5, 0.2, 0.1, 0.0], &[0.365, 0.283]);
    let p = choice_probabilities(&params, &design, &tree).unwrap();
    for (got, want) in p.row(0).iter().zip(ORACLE) {
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
}

#[test]
fn non_positive_iv_is_rejected() {
    let tree = fixtures::severity_tree(0.5);
    let (params, design) = direct_utilities(&tree, &[0.0; 5], &[0.0, 0.3]);
    assert!(matches!(
        choice_probabilities(&params, &design, &tree),
        Err(KernelError::NonPositiveIv { ref nest, .. }) if nest == "class1"
    ));
}

#[test]
fn non_finite_utility_reports_observation() {
    let tree = fixtures::severity_tree(0.5);
    let layout = utility_layout(&tree);
    let params = ParameterVector::new(layout, vec![1.0, 1.0, 1.0, 1.0, 1.0, 0.5, 0.5]);
    let rows = vec![
        (0..5).map(|j| vec![(j, 0.0)]).collect::<Vec<_>>(),
        (0..5).map(|j| vec![(j, if j == 2 { f64::INFINITY } else { 0.0 })]).collect(),
    ];
    let design = DesignMatrix::from_rows(5, &rows);
    assert_eq!(
        choice_probabilities(&params, &design, &tree).unwrap_err(),
        KernelError::NonFiniteUtility { obs: 1 }
    );
}

#[test]
fn log_likelihood_of_even_pair_is_ln_half() {
    let tree = NestTree {
        plain_mnl: true,
        ..NestTree::new(&["a", "b"], vec![Nest::new("ab", &["a", "b"], IvSpec::Free(0.7))])
    };
    let (params, design) = direct_utilities(&tree, &[0.0, 0.0], &[0.7]);
    let ll = log_likelihood(&params, &design, &tree, &[1]).unwrap();
    assert!((ll - 0.5f64.ln()).abs() < 1e-15);
}

#[test]
fn log_likelihood_is_additive_over_identical_observations() {
    let tree = fixtures::severity_tree(0.5);
    let (params, one) = direct_utilities(&tree, &[0.4, -0.2, 0.9, 0.1, 0.0], &[0.45, 0.8]);
    let single = log_likelihood(&params, &one, &tree, &[2]).unwrap();
    let n = 37;
    let many = one.select(&vec![0; n]);
    let total = log_likelihood(&params, &many, &tree, &vec![2; n]).unwrap();
    assert!((total - n as f64 * single).abs() < 1e-12 * n as f64);
}

fn random_design(rng: &mut impl Rng, n_obs: usize, n_alts: usize, n_beta: usize) -> DesignMatrix {
    let rows: Vec<Vec<Vec<(usize, f64)>>> = (0..n_obs)
        .map(|_| {
            (0..n_alts)
                .map(|_| {
                    let mut row = Vec::new();
                    for k in 0..n_beta {
                        if rng.random_bool(0.6) {
                            row.push((k, rng.random_range(-1.0..1.0)));
                        }
                    }
                    row
                })
                .collect()
        })
        .collect();
    DesignMatrix::from_rows(n_alts, &rows)
}

fn random_problem(
    seed: u64,
    n_obs: usize,
    n_beta: usize,
) -> (NestTree, ParameterVector, DesignMatrix, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (tree, free) = random_tree(&mut rng, false);
    let mut slots: Vec<Slot> = (0..n_beta)
        .map(|k| Slot {
            name: format!("b{k}"),
            kind: ParamKind::Beta,
        })
        .collect();
    slots.extend(tree.free_nests().map(|n| Slot {
        name: n.id.clone(),
        kind: ParamKind::Iv,
    }));
    let mut values: Vec<f64> = (0..n_beta).map(|_| rng.random_range(-1.5..1.5)).collect();
    values.extend(free.iter().map(|l| l.max(0.2)));
    let design = random_design(&mut rng, n_obs, tree.n_alternatives(), n_beta);
    let choices = (0..n_obs).map(|_| rng.random_range(0..tree.n_alternatives())).collect();
    (tree, ParameterVector::new(ParamLayout { slots }, values), design, choices)
}

#[test]
fn log_likelihood_matches_per_observation_brute_force() {
    for seed in 0..20 {
        let (tree, params, design, choices) = random_problem(seed, 25, 4);
        let lambdas = all_lambdas(&tree, &params.values[4..]);
        let mut brute = 0.0;
        for (obs, &c) in choices.iter().enumerate() {
            let v: Vec<f64> = (0..tree.n_alternatives())
                .map(|j| design.row(obs, j).map(|(s, x)| params.values[s] * x).sum())
                .collect();
            brute += naive_probabilities(&tree, &v, &lambdas)[c].ln();
        }
        let ll = log_likelihood(&params, &design, &tree, &choices).unwrap();
        assert!((ll - brute).abs() < 1e-12 * brute.abs().max(1.0), "seed {seed}: {ll} vs {brute}");
    }
}

#[test]
fn gradient_vanishes_at_uniform_balanced_point() {
    let mut tree = fixtures::severity_tree(1.0);
    for n in &mut tree.nests {
        n.iv = IvSpec::Fixed(1.0);
    }
    let layout = utility_layout(&tree);
    let params = ParameterVector::new(layout, vec![0.0; 5]);
    let rows: Vec<_> = (0..10)
        .map(|_| (0..5).map(|j| vec![(j, 1.0)]).collect::<Vec<_>>())
        .collect();
    let design = DesignMatrix::from_rows(5, &rows);
    let choices: Vec<usize> = (0..10).map(|i| i % 5).collect();
    let g = gradient(&params, &design, &tree, &choices).unwrap();
    assert_eq!(g.len(), 5);
    for gk in g {
        assert!(gk.abs() < 1e-10);
    }
}

fn central_difference(
    tree: &NestTree,
    params: &ParameterVector,
    design: &DesignMatrix,
    choices: &[usize],
) -> Vec<f64> {
    let h = 1e-6;
    (0..params.len())
        .map(|k| {
            let mut up = params.values.clone();
            let mut dn = params.values.clone();
            up[k] += h;
            dn[k] -= h;
            let fu = log_likelihood(&params.with_values(up), design, tree, choices).unwrap();
            let fd = log_likelihood(&params.with_values(dn), design, tree, choices).unwrap();
            (fu - fd) / (2.0 * h)
        })
        .collect()
}

#[test]
fn gradient_matches_finite_differences() {
    for seed in 100..120 {
        let (tree, params, design, choices) = random_problem(seed, 50, 6);
        let g = gradient(&params, &design, &tree, &choices).unwrap();
        let fd = central_difference(&tree, &params, &design, &choices);
        for (k, (a, b)) in g.iter().zip(&fd).enumerate() {
            let rel = (a - b).abs() / a.abs().max(b.abs()).max(1.0);
            assert!(rel < 1e-6, "seed {seed} slot {k}: {a} vs {b}");
        }
    }
}

#[test]
fn fixed_tree_gradient_has_no_iv_slots() {
    let mut spec = fixtures::recovery_spec();
    for n in &mut spec.tree.nests {
        n.iv = IvSpec::Fixed(1.0);
    }
    let layout = ParamLayout::for_spec(&spec);
    assert!(layout.slots.iter().all(|s| s.kind == ParamKind::Beta));
    let params = ParameterVector::new(layout.clone(), vec![0.1; layout.len()]);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let design = random_design(&mut rng, 10, 5, layout.len());
    let g = gradient(&params, &design, &spec.tree, &[0, 1, 2, 3, 4, 0, 1, 2, 3, 4]).unwrap();
    assert_eq!(g.len(), 10);
}

#[test]
fn parallel_reduction_matches_sequential() {
    let (tree, params, _, _) = random_problem(7, 1, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 10_000;
    let design = random_design(&mut rng, n, tree.n_alternatives(), 5);
    let choices: Vec<usize> = (0..n).map(|_| rng.random_range(0..tree.n_alternatives())).collect();
    let seq = Evaluator::new(&tree, &params.layout, &design, &choices, Reduction::Sequential).unwrap();
    let par = Evaluator::new(&tree, &params.layout, &design, &choices, Reduction::Parallel).unwrap();
    let (a, ga) = seq.log_likelihood_and_gradient(&params.values).unwrap();
    let (b, gb) = par.log_likelihood_and_gradient(&params.values).unwrap();
    assert!((a - b).abs() <= 1e-12 * a.abs());
    for (x, y) in ga.iter().zip(&gb) {
        assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
    }
    assert_eq!(par.log_likelihood(&params.values).unwrap(), b);
}

#[test]
fn observation_gradients_sum_to_total() {
    let (tree, params, design, choices) = random_problem(11, 40, 4);
    let ev = Evaluator::new(&tree, &params.layout, &design, &choices, Reduction::Sequential).unwrap();
    let rows = ev.observation_gradients(&params.values).unwrap();
    let (_, total) = ev.log_likelihood_and_gradient(&params.values).unwrap();
    let k = params.len();
    for slot in 0..k {
        let s: f64 = (0..40).map(|i| rows[i * k + slot]).sum();
        assert!((s - total[slot]).abs() < 1e-12);
    }
}

#[test]
fn simulation_degenerate_limit() {
    let tree = fixtures::severity_tree(0.5);
    let (params, one) = direct_utilities(&tree, &[-50.0, -50.0, 50.0, -50.0, -50.0], &[0.5, 0.5]);
    let design = one.select(&vec![0; 500]);
    let out = simulate(&params, &design, &tree, 3).unwrap();
    assert!(out.choices.iter().all(|&c| c == 2));
}

#[test]
fn simulated_shares_converge_to_uniform() {
    let tree = fixtures::severity_tree(0.5);
    let (params, one) = direct_utilities(&tree, &[0.0; 5], &[1.0, 1.0]);
    let n = 100_000;
    let design = one.select(&vec![0; n]);
    let out = simulate(&params, &design, &tree, 2024).unwrap();
    let mut counts = [0usize; 5];
    out.choices.iter().for_each(|&c| counts[c] += 1);
    for c in counts {
        // 4 binomial standard deviations: 4 * sqrt(0.2 * 0.8 / 1e5) ≈ 0.00506.
        assert!((c as f64 / n as f64 - 0.2).abs() < 0.006, "{counts:?}");
    }
}

#[test]
fn simulation_is_deterministic_per_seed() {
    let (tree, params, design, _) = random_problem(31, 300, 4);
    let a = simulate(&params, &design, &tree, 99).unwrap();
    let b = simulate(&params, &design, &tree, 99).unwrap();
    let c = simulate(&params, &design, &tree, 100).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.choices, c.choices);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn simplex_and_decomposition(seed in any::<u64>(), scale in 0.1f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (tree, free) = random_tree(&mut rng, false);
        let v: Vec<f64> = (0..tree.n_alternatives()).map(|_| rng.random_range(-scale..scale)).collect();
        let (params, design) = direct_utilities(&tree, &v, &free);
        let p = choice_probabilities(&params, &design, &tree).unwrap();
        let sum: f64 = p.row(0).iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-10);
        for j in 0..v.len() {
            let n = p.nest_of[j];
            prop_assert!((p.row(0)[j] - p.nest_row(0)[n] * p.conditional_row(0)[j]).abs() <= 1e-12);
            if tree.nests[n].members.len() == 1 {
                prop_assert_eq!(p.conditional_row(0)[j], 1.0);
            }
        }
    }

    #[test]
    fn unit_ivs_collapse_to_mnl(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (tree, _) = random_tree(&mut rng, true);
        let v: Vec<f64> = (0..tree.n_alternatives()).map(|_| rng.random_range(-5.0..5.0)).collect();
        let (params, design) = direct_utilities(&tree, &v, &[]);
        let p = choice_probabilities(&params, &design, &tree).unwrap();
        let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let denom: f64 = v.iter().map(|x| (x - max).exp()).sum();
        for (j, x) in v.iter().enumerate() {
            prop_assert!((p.row(0)[j] - (x - max).exp() / denom).abs() <= 1e-12);
        }
    }

    #[test]
    fn translation_invariance(seed in any::<u64>(), shift in -100.0f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (tree, free) = random_tree(&mut rng, false);
        let v: Vec<f64> = (0..tree.n_alternatives()).map(|_| rng.random_range(-3.0..3.0)).collect();
        let shifted: Vec<f64> = v.iter().map(|x| x + shift).collect();
        let (pa, da) = direct_utilities(&tree, &v, &free);
        let (pb, db) = direct_utilities(&tree, &shifted, &free);
        let a = choice_probabilities(&pa, &da, &tree).unwrap();
        let b = choice_probabilities(&pb, &db, &tree).unwrap();
        for (x, y) in a.row(0).iter().zip(b.row(0)) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn extreme_utilities_stay_finite(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (tree, free) = random_tree(&mut rng, false);
        let v: Vec<f64> = (0..tree.n_alternatives()).map(|_| rng.random_range(-700.0..=700.0)).collect();
        let (params, design) = direct_utilities(&tree, &v, &free);
        let p = choice_probabilities(&params, &design, &tree).unwrap();
        prop_assert!(p.row(0).iter().all(|x| x.is_finite() && *x >= 0.0));
        let sum: f64 = p.row(0).iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-10);
    }
}
