use std::collections::BTreeMap;

use proptest::prelude::*;

use super::*;
use crate::estimator::{IvParameterization, NullModel, ParameterEstimate, SeMethod, Stars};
use crate::fixtures::{self, SEVERITY_COEFFICIENTS};
use crate::model::{pack_parameters, NestTree, UtilityTerm};
use crate::synth::{simulate_dataset, CovariateDist};

fn result_with(params: &[(&str, f64, f64)]) -> EstimationResult {
    EstimationResult {
        parameters: params
            .iter()
            .map(|&(name, estimate, t)| ParameterEstimate {
                name: name.into(),
                kind: ParamKind::Beta,
                covariate: String::new(),
                alternatives: vec![],
                estimate,
                std_error: estimate / t,
                t_stat: t,
                stars: Stars::from_t(t),
            })
            .collect(),
        iv_report: vec![],
        ll_start: -10.0,
        ll_final: -5.0,
        ll_null: -10.0,
        null_model: NullModel::EqualShares,
        pseudo_adjusted_r2: 0.5,
        k_params: params.len(),
        sample_size: 10,
        choice_counts: vec![],
        converged: true,
        iterations: 1,
        gradient_max_norm: 0.0,
        se_method: SeMethod::OuterProduct,
        iv_parameterization: IvParameterization::Direct,
        separation: vec![],
        warnings: vec![],
        ll_trace: vec![],
    }
}

fn small_spec() -> ModelSpec {
    ModelSpec::new(
        NestTree::mnl(&["a", "b", "c"]),
        vec![
            UtilityTerm::constant("asc_a", "a"),
            UtilityTerm::constant("asc_b", "b"),
            UtilityTerm::new("x_a", "x", &["a"]),
            UtilityTerm::new("y_b", "y", &["b"]),
            UtilityTerm::new("w_ab", "w", &["a", "b"]),
        ],
        "c",
    )
}

fn segment(truth: &[(&str, f64)], n: usize, seed: u64) -> Dataset {
    let spec = small_spec();
    let named: BTreeMap<String, f64> = truth.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    let params = pack_parameters(&spec, &named).unwrap();
    let overrides: BTreeMap<String, CovariateDist> =
        ["x", "y", "w"].iter().map(|c| (c.to_string(), CovariateDist::Uniform)).collect();
    simulate_dataset(&spec, &params, &overrides, n, seed).unwrap()
}

const BASE: [(&str, f64); 5] = [("asc_a", 0.2), ("asc_b", -0.1), ("x_a", 1.0), ("y_b", -1.5), ("w_ab", 0.8)];

fn row(name: &str) -> &'static crate::fixtures::CoefficientRow {
    SEVERITY_COEFFICIENTS.iter().find(|r| r.parameter == name).unwrap()
}

fn published_ratio(name: &str) -> CoefficientRatio {
    let r = row(name);
    coefficient_ratio(
        r.parameter,
        &[],
        (r.male, r.male_t),
        (r.female.unwrap(), r.female_t),
        DEFAULT_ALPHA_T,
    )
    .unwrap()
}

#[test]
fn published_pairs() {
    let speeding = published_ratio("fatal:speeding");
    assert!((speeding.ratio.unwrap() - 0.27 / 0.14).abs() < 1e-12);
    assert!((speeding.ratio.unwrap() - 1.93).abs() < 0.01);
    assert_eq!(speeding.dominant, Dominance::Primary);

    let intox = published_ratio("fatal:intoxicated");
    assert!((intox.ratio.unwrap() - 0.81).abs() < 0.01);
    assert_eq!(intox.dominant, Dominance::Secondary);

    let curve = published_ratio("pdo:level_curve");
    assert!((curve.ratio.unwrap() - 0.43).abs() < 0.01);
    assert_eq!(curve.dominant, Dominance::Secondary);
}

#[test]
fn guard_and_sign_conflict() {
    assert!(coefficient_ratio("p", &[], (0.5, 3.0), (0.4, 1.0), 1.645).is_none());
    assert!(coefficient_ratio("p", &[], (0.5, 1.0), (0.4, 3.0), 1.645).is_none());
    let c = coefficient_ratio("p", &[], (0.5, 3.0), (-0.4, -3.0), 1.645).unwrap();
    assert_eq!(c.dominant, Dominance::SignConflict);
    assert_eq!(c.ratio, None);
}

proptest! {
    #[test]
    fn swapping_roles_inverts_ratios(a in 0.01f64..10.0, b in 0.01f64..10.0, neg in any::<bool>()) {
        let s = if neg { -1.0 } else { 1.0 };
        let fwd = coefficient_ratio("p", &[], (s * a, 5.0), (s * b, 5.0), 1.645).unwrap();
        let back = coefficient_ratio("p", &[], (s * b, 5.0), (s * a, 5.0), 1.645).unwrap();
        prop_assert!((fwd.ratio.unwrap() * back.ratio.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn restriction_is_a_subset(ts in proptest::collection::vec(-5.0f64..5.0, 3), alpha in 0.0f64..3.0) {
        let spec = small_spec();
        let r = result_with(&[("asc_a", 1.0, 9.0), ("asc_b", 1.0, 9.0), ("x_a", 1.0, ts[0]), ("y_b", 1.0, ts[1]), ("w_ab", 1.0, ts[2])]);
        if let Ok(restricted) = restrict_spec(&spec, &r, alpha) {
            prop_assert_eq!(&restricted.tree, &spec.tree);
            for t in &restricted.terms {
                prop_assert!(spec.terms.contains(t));
            }
            for t in &restricted.terms {
                if !t.covariate.is_constant() {
                    prop_assert!(r.t_stat(&t.parameter).unwrap().abs() >= alpha);
                }
            }
        }
    }
}

#[test]
fn restriction_rules() {
    let spec = small_spec();
    let r = result_with(&[("asc_a", 0.1, 0.2), ("asc_b", 0.1, 0.3), ("x_a", 1.0, 4.0), ("y_b", 1.0, 1.0), ("w_ab", 1.0, -2.0)]);
    let kept: Vec<String> = restrict_spec(&spec, &r, 1.645)
        .unwrap()
        .terms
        .into_iter()
        .map(|t| t.parameter)
        .collect();
    assert_eq!(kept, vec!["asc_a", "asc_b", "x_a", "w_ab"]);
    assert_eq!(restrict_spec(&spec, &r, 0.0).unwrap(), spec);

    let weak = result_with(&[("asc_a", 0.1, 5.0), ("asc_b", 0.1, 5.0), ("x_a", 1.0, 1.0), ("y_b", 1.0, 1.0), ("w_ab", 1.0, -1.0)]);
    assert!(matches!(
        restrict_spec(&spec, &weak, 1.645),
        Err(SegmentError::EmptyRestriction { .. })
    ));
}

#[test]
fn male_fixture_restriction_keeps_every_reported_row() {
    let spec = fixtures::male_severity_spec();
    let rows: Vec<(&str, f64, f64)> = SEVERITY_COEFFICIENTS.iter().map(|r| (r.parameter, r.male, r.male_t)).collect();
    let restricted = restrict_spec(&spec, &result_with(&rows), DEFAULT_ALPHA_T).unwrap();
    assert_eq!(restricted, spec);
    assert!(restricted.terms.iter().any(|t| t.parameter == "fatal:speeding"));
}

#[test]
fn shared_dgp_ratios_near_one() {
    let a = segment(&BASE, 30_000, 1);
    let b = segment(&BASE, 30_000, 2);
    let c = compare_segments(&small_spec(), &a, &b, &CompareOptions::default()).unwrap();
    assert!(c.both_converged());
    assert_eq!(c.ratios.len(), 3);
    for r in &c.ratios {
        let x = r.ratio.unwrap();
        assert!((0.75..1.33).contains(&x), "{}: {x}", r.parameter);
    }
}

#[test]
fn scaled_coefficient_tops_primary_list() {
    let mut doubled = BASE;
    doubled[3].1 *= 2.0;
    let a = segment(&doubled, 40_000, 3);
    let b = segment(&BASE, 40_000, 4);
    let c = compare_segments(&small_spec(), &a, &b, &CompareOptions::default()).unwrap();
    assert_eq!(c.primary_label, "a");
    let top = c.primary_dominant()[0];
    assert_eq!(top.parameter, "y_b");
    assert!((1.7..2.3).contains(&top.ratio.unwrap()));
}

#[test]
fn larger_segment_becomes_primary() {
    let a = segment(&BASE, 2_000, 5);
    let b = segment(&BASE, 3_000, 6);
    let c = compare_segments(&small_spec(), &a, &b, &CompareOptions::default()).unwrap();
    assert_eq!(c.primary_label, "b");
    assert_eq!(c.primary_result.sample_size, 3_000);
}

#[test]
fn empty_or_mismatched_segments_error() {
    let a = segment(&BASE, 500, 7);
    let empty = a.select_rows(&[]);
    assert!(matches!(
        compare_segments(&small_spec(), &a, &empty, &CompareOptions::default()),
        Err(SegmentError::Empty(label)) if label == "b"
    ));
    let other = Dataset::from_columns(vec!["a".into(), "z".into()], vec![], vec![0, 1]).unwrap();
    assert!(matches!(
        compare_segments(&small_spec(), &a, &other, &CompareOptions::default()),
        Err(SegmentError::Schema(_))
    ));
}

#[test]
fn report_files() {
    let mut c = compare_segments(
        &small_spec(),
        &segment(&BASE, 3_000, 8),
        &segment(&BASE, 3_000, 9),
        &CompareOptions::default(),
    )
    .unwrap();
    c.ratios = vec![
        coefficient_ratio("p1", &["a".into()], (2.0, 5.0), (1.0, 5.0), 1.645).unwrap(),
        coefficient_ratio("p2", &["a".into(), "b".into()], (1.0, 5.0), (2.0, 5.0), 1.645).unwrap(),
        coefficient_ratio("p3", &["b".into()], (3.0, 5.0), (1.0, 5.0), 1.645).unwrap(),
        coefficient_ratio("p4", &["b".into()], (3.0, 5.0), (-1.0, -5.0), 1.645).unwrap(),
    ];
    c.dropped = vec!["p5".into()];
    let dir = tempfile::tempdir().unwrap();
    let files = gap_report(&c, &dir.path().join("gap")).unwrap();
    let primary = std::fs::read_to_string(&files.dominant_primary).unwrap();
    let secondary = std::fs::read_to_string(&files.dominant_secondary).unwrap();
    assert_eq!(primary.lines().count(), 3);
    assert_eq!(secondary.lines().count(), 2);
    assert!(primary.lines().nth(1).unwrap().starts_with("p3,b,3.000000"));
    assert!(secondary.contains("p2,a;b,0.500000"));
    assert!(!primary.contains("p4") && !secondary.contains("p4"));
    let text = std::fs::read_to_string(&files.report).unwrap();
    assert!(text.contains("Sign conflicts\n  p4"));
    assert!(text.contains("p5"));
}
