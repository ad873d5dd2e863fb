//! Reference model structures for single-vehicle crash severity.
//!
//! The five-level severity tree groups severe injury with fatality and
//! incapacitating with possible injury, leaving property-damage-only crashes
//! in a degenerate nest. The coefficient table holds published gender-specific
//! estimates, used as data-generating values for simulation studies.

use std::collections::BTreeMap;

use crate::model::{IvSpec, ModelSpec, Nest, NestTree, UtilityTerm, CONSTANT};

pub const SEVERITY_LEVELS: [&str; 5] = [
    "pdo",
    "possible_injury",
    "incapacitating_injury",
    "severe_injury",
    "fatality",
];

pub const BASE_LEVEL: &str = "fatality";

/// Inclusive values of the male model: (severe+fatal, incapacitating+possible).
pub const MALE_IV: (f64, f64) = (0.365, 0.283);
/// Inclusive values of the female model.
pub const FEMALE_IV: (f64, f64) = (0.956, 0.392);

pub const MALE_SAMPLE_SIZE: usize = 97_275;
pub const FEMALE_SAMPLE_SIZE: usize = 61_143;

/// Severity tree with both free inclusive values starting at `start`.
pub fn severity_tree(start: f64) -> NestTree {
    NestTree::new(
        &SEVERITY_LEVELS,
        vec![
            Nest::new("class1", &["severe_injury", "fatality"], IvSpec::Free(start)),
            Nest::new("class2", &["incapacitating_injury", "possible_injury"], IvSpec::Free(start)),
            Nest::new("class3", &["pdo"], IvSpec::Fixed(1.0)),
        ],
    )
}

/// One published coefficient row.
#[derive(Clone, Copy, Debug)]
pub struct CoefficientRow {
    pub parameter: &'static str,
    pub column: &'static str,
    pub levels: &'static [&'static str],
    pub male: f64,
    pub male_t: f64,
    /// `None` where the female model reports the variable as insignificant.
    pub female: Option<f64>,
    pub female_t: f64,
}

const fn row(
    parameter: &'static str,
    column: &'static str,
    levels: &'static [&'static str],
    male: f64,
    male_t: f64,
    female: Option<f64>,
    female_t: f64,
) -> CoefficientRow {
    CoefficientRow {
        parameter,
        column,
        levels,
        male,
        male_t,
        female,
        female_t,
    }
}

const PDO: &[&str] = &["pdo"];
const POSSIBLE: &[&str] = &["possible_injury"];
const INCAP: &[&str] = &["incapacitating_injury"];
const CLASS2: &[&str] = &["possible_injury", "incapacitating_injury"];
const SEVERE: &[&str] = &["severe_injury"];
const FATAL: &[&str] = &["fatality"];
const CLASS1: &[&str] = &["severe_injury", "fatality"];

/// Gender-specific estimates; rows with identical values and t-statistics at two
/// levels of one nest are represented as a single shared coefficient.
pub const SEVERITY_COEFFICIENTS: &[CoefficientRow] = &[
    row("pdo:constant", CONSTANT, PDO, 12.08, 6.13, Some(23.34), 5.72),
    row("pdo:icy", "icy", PDO, 0.46, 11.25, Some(0.36), 8.12),
    row("pdo:snowy", "snowy", PDO, 0.56, 11.49, Some(0.53), 9.41),
    row("pdo:suv", "suv", PDO, -0.18, -8.64, Some(-0.13), -5.97),
    row("pdo:work_zone", "work_zone", PDO, 0.44, 6.89, Some(0.19), 2.33),
    row("pdo:age", "age", PDO, -1.17, -19.59, Some(-1.01), -12.87),
    row("pdo:left_turn", "left_turn", PDO, 0.41, 7.47, Some(0.36), 5.53),
    row("pdo:animal", "animal", PDO, 2.97, 30.94, Some(3.15), 29.12),
    row("pdo:hour_0_3", "hour_0_3", PDO, -0.07, -2.40, None, 0.76),
    row("pdo:hour_21_24", "hour_21_24", PDO, -0.06, -2.55, None, 1.32),
    row("pdo:intoxicated", "intoxicated", PDO, -0.23, -10.06, None, 1.09),
    row("pdo:fail_control", "fail_control", PDO, -0.42, -17.01, Some(-0.44), -13.17),
    row("pdo:grade_curve", "grade_curve", PDO, -1.00, -3.28, None, -1.49),
    row("pdo:level_curve", "level_curve", PDO, -0.93, -3.34, Some(-2.18), -2.65),
    row("pdo:ramp", "ramp", PDO, 0.51, 8.66, Some(0.48), 6.62),
    row("possible:constant", CONSTANT, POSSIBLE, 1.21, 2.24, Some(3.92), 3.41),
    row("possible:speeding", "speeding", POSSIBLE, -0.12, -4.92, Some(-0.09), -3.39),
    row("class2:fail_control", "fail_control", CLASS2, -0.06, -5.86, Some(-0.06), -5.03),
    row("class2:brakes_defective", "brakes_defective", CLASS2, 0.05, 2.38, None, 1.43),
    row("class2:worn_tires", "worn_tires", CLASS2, 0.03, 3.31, None, 1.16),
    row("possible:intersection", "intersection", POSSIBLE, 0.31, 11.05, Some(0.26), 8.53),
    row("possible:age", "age", POSSIBLE, -0.16, -2.55, None, -0.06),
    row("possible:animal", "animal", POSSIBLE, 0.77, 12.38, Some(0.69), 10.97),
    row("possible:hour_0_3", "hour_0_3", POSSIBLE, -0.14, -4.79, Some(-0.07), -1.91),
    row("possible:lane_change", "lane_change", POSSIBLE, -0.28, -2.58, Some(-0.24), -2.62),
    row("possible:weather_adverse", "weather_adverse", POSSIBLE, 0.11, 4.32, Some(0.08), 3.00),
    row("possible:grade_curve", "grade_curve", POSSIBLE, -0.35, -4.22, Some(-0.37), -1.85),
    row("possible:level_curve", "level_curve", POSSIBLE, -0.32, -4.12, Some(-0.49), -2.43),
    row("incap:constant", CONSTANT, INCAP, 2.21, 4.09, Some(4.82), 4.19),
    row("incap:speeding", "speeding", INCAP, 0.10, 9.09, Some(0.09), 6.79),
    row("incap:intersection", "intersection", INCAP, -0.17, -10.13, Some(-0.18), -8.53),
    row("incap:age", "age", INCAP, -0.14, -4.50, Some(-0.21), -5.55),
    row("incap:rain_windshield", "rain_windshield", INCAP, -0.05, -2.89, None, -1.21),
    row("incap:weather_adverse", "weather_adverse", INCAP, -0.12, -8.80, Some(-0.11), -7.57),
    row("incap:grade_curve", "grade_curve", INCAP, -0.18, -2.32, None, -1.32),
    row("incap:level_curve", "level_curve", INCAP, -0.18, -2.52, Some(-0.49), -2.46),
    row("severe:constant", CONSTANT, SEVERE, 2.61, 23.52, Some(2.89), 18.72),
    row("severe:speeding", "speeding", SEVERE, 0.15, 4.11, Some(0.06), 3.98),
    row("severe:intoxicated", "intoxicated", SEVERE, 0.09, 2.54, None, 0.68),
    row("class1:not_divided", "not_divided", CLASS1, 0.07, 4.08, Some(0.04), 4.24),
    row("class1:angle", "angle", CLASS1, -0.17, -3.65, Some(-0.07), -3.24),
    row("severe:speed_limit", "speed_limit", SEVERE, 0.002, 2.60, Some(0.001), 3.55),
    row("severe:grade_curve", "grade_curve", SEVERE, -0.29, -3.64, None, -1.48),
    row("severe:level_curve", "level_curve", SEVERE, -0.26, -3.64, Some(-0.33), -3.05),
    row("fatal:weather_adverse", "weather_adverse", FATAL, -0.19, -4.54, Some(-0.09), -5.03),
    row("fatal:speeding", "speeding", FATAL, 0.27, 4.04, Some(0.14), 1.66),
    row("fatal:intoxicated", "intoxicated", FATAL, 0.30, 9.43, Some(0.37), 7.23),
    row("fatal:intersection", "intersection", FATAL, -0.62, -4.71, Some(-1.17), -3.75),
    row("fatal:left_turn", "left_turn", FATAL, -1.17, -2.56, None, 0.00),
    row("fatal:speed_limit", "speed_limit", FATAL, 0.01, 5.19, None, 1.40),
];

/// Five-level severity model carrying every male-significant coefficient.
pub fn male_severity_spec() -> ModelSpec {
    let terms = SEVERITY_COEFFICIENTS
        .iter()
        .map(|r| UtilityTerm::new(r.parameter, r.column, r.levels))
        .collect();
    ModelSpec::new(severity_tree(0.5), terms, BASE_LEVEL)
}

/// Male coefficients and inclusive values keyed by parameter name.
pub fn male_parameter_values() -> BTreeMap<String, f64> {
    let mut out: BTreeMap<String, f64> = SEVERITY_COEFFICIENTS
        .iter()
        .map(|r| (r.parameter.to_string(), r.male))
        .collect();
    out.insert("class1".into(), MALE_IV.0);
    out.insert("class2".into(), MALE_IV.1);
    out
}

/// Continuous covariates among the severity columns; all others are indicators.
pub const CONTINUOUS_COLUMNS: &[&str] = &["age", "speed_limit", "aadt_per_lane"];

/// Average of each indicator in the male sample, where published.
pub const MALE_INDICATOR_SHARES: &[(&str, f64)] = &[
    ("commercial_vehicle", 0.041),
    ("speeding", 0.212),
    ("intoxicated", 0.160),
    ("intersection", 0.126),
    ("weather_adverse", 0.257),
    ("urban", 0.523),
    ("drug", 0.021),
    ("not_divided", 0.570),
];

/// Ten-term model on the severity tree used for parameter-recovery studies.
///
/// Four constants plus six covariate coefficients, two of them shared within a nest.
pub fn recovery_spec() -> ModelSpec {
    let terms = vec![
        UtilityTerm::constant("asc_pdo", "pdo"),
        UtilityTerm::constant("asc_possible", "possible_injury"),
        UtilityTerm::constant("asc_incap", "incapacitating_injury"),
        UtilityTerm::constant("asc_severe", "severe_injury"),
        UtilityTerm::new("age_pdo", "age", &["pdo"]),
        UtilityTerm::new("animal_pdo", "animal", &["pdo"]),
        UtilityTerm::new("intersection_possible", "intersection", &["possible_injury"]),
        UtilityTerm::new("weather_class2", "weather_adverse", &["possible_injury", "incapacitating_injury"]),
        UtilityTerm::new("speeding_class1", "speeding", &["severe_injury", "fatality"]),
        UtilityTerm::new("intoxicated_fatal", "intoxicated", &["fatality"]),
    ];
    ModelSpec::new(severity_tree(0.5), terms, BASE_LEVEL)
}

/// True values for [`recovery_spec`], with inclusive values 0.4 and 0.3.
pub fn recovery_truth() -> BTreeMap<String, f64> {
    [
        ("asc_pdo", 1.5),
        ("asc_possible", 0.6),
        ("asc_incap", 0.3),
        ("asc_severe", 0.4),
        ("age_pdo", -1.0),
        ("animal_pdo", 1.2),
        ("intersection_possible", 0.5),
        ("weather_class2", -0.4),
        ("speeding_class1", 0.8),
        ("intoxicated_fatal", 0.9),
        ("class1", 0.4),
        ("class2", 0.3),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}
