use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tree::{Alternative, IvSpec, Nest, NestTree};
use super::SpecError;

/// Reserved covariate name for alternative-specific constants.
pub const CONSTANT: &str = "CONSTANT";

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Covariate {
    Constant,
    Column(String),
}

impl Covariate {
    pub fn column(name: impl Into<String>) -> Self {
        Covariate::Column(name.into())
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Covariate::Constant)
    }

    pub fn name(&self) -> &str {
        match self {
            Covariate::Constant => CONSTANT,
            Covariate::Column(c) => c,
        }
    }
}

impl From<&str> for Covariate {
    fn from(s: &str) -> Self {
        if s == CONSTANT {
            Covariate::Constant
        } else {
            Covariate::Column(s.to_string())
        }
    }
}

/// A coefficient multiplying one covariate in the utility of each listed alternative.
///
/// Listing several alternatives shares a single coefficient between them.
#[derive(Clone, Debug, PartialEq)]
pub struct UtilityTerm {
    pub parameter: String,
    pub covariate: Covariate,
    pub applies_to: Vec<String>,
}

impl UtilityTerm {
    pub fn new(parameter: impl Into<String>, covariate: impl Into<Covariate>, applies_to: &[&str]) -> Self {
        Self {
            parameter: parameter.into(),
            covariate: covariate.into(),
            applies_to: applies_to.iter().map(|a| a.to_string()).collect(),
        }
    }

    pub fn constant(parameter: impl Into<String>, alternative: &str) -> Self {
        Self::new(parameter, Covariate::Constant, &[alternative])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub tree: NestTree,
    pub terms: Vec<UtilityTerm>,
    pub base_alternative: String,
}

/// A structural problem found by [`validate_spec`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    DuplicateAlternative(String),
    DuplicateNest(String),
    EmptyNest(String),
    /// A nest lists another nest as a member; only two-level trees are supported.
    DeeperNesting { nest: String, member: String },
    UnknownMember { nest: String, member: String },
    InMultipleNests { alternative: String, nests: Vec<String> },
    Unassigned(String),
    SingleNest,
    SingletonFreeIv(String),
    FixedIvOutOfRange { nest: String, value: String },
    FreeIvStartInvalid { nest: String, value: String },
    UnknownBase(String),
    EmptyTerm(String),
    UnknownTermAlternative { parameter: String, alternative: String },
    DuplicateTerm { parameter: String, alternative: String },
    ConstantOnBase { parameter: String, alternative: String },
    NameCollision(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateAlternative(a) => write!(f, "alternative `{a}` is declared more than once"),
            Violation::DuplicateNest(n) => write!(f, "nest `{n}` is declared more than once"),
            Violation::EmptyNest(n) => write!(f, "nest `{n}` has no members"),
            Violation::DeeperNesting { nest, member } => {
                write!(f, "nest `{nest}` contains nest `{member}`; only two-level trees are supported")
            }
            Violation::UnknownMember { nest, member } => {
                write!(f, "nest `{nest}` lists unknown alternative `{member}`")
            }
            Violation::InMultipleNests { alternative, nests } => write!(
                f,
                "alternative `{alternative}` belongs to more than one nest: {}",
                nests.join(", ")
            ),
            Violation::Unassigned(a) => write!(f, "alternative `{a}` belongs to no nest"),
            Violation::SingleNest => write!(f, "tree has a single nest but is not flagged as plain MNL"),
            Violation::SingletonFreeIv(n) => {
                write!(f, "single-alternative nest `{n}` must have its inclusive value fixed to 1")
            }
            Violation::FixedIvOutOfRange { nest, value } => {
                write!(f, "nest `{nest}` has fixed inclusive value {value} outside (0, 1]")
            }
            Violation::FreeIvStartInvalid { nest, value } => {
                write!(f, "nest `{nest}` has non-positive inclusive value start {value}")
            }
            Violation::UnknownBase(a) => write!(f, "base alternative `{a}` is not in the tree"),
            Violation::EmptyTerm(p) => write!(f, "term `{p}` applies to no alternative"),
            Violation::UnknownTermAlternative { parameter, alternative } => {
                write!(f, "term `{parameter}` applies to unknown alternative `{alternative}`")
            }
            Violation::DuplicateTerm { parameter, alternative } => {
                write!(f, "parameter `{parameter}` enters alternative `{alternative}` more than once")
            }
            Violation::ConstantOnBase { parameter, alternative } => write!(
                f,
                "constant `{parameter}` enters base alternative `{alternative}`"
            ),
            Violation::NameCollision(n) => {
                write!(f, "`{n}` names both a coefficient and a free inclusive value")
            }
        }
    }
}

/// Lists every structural problem with `spec`, in a fixed order. An empty list means valid.
pub fn validate_spec(spec: &ModelSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    let tree = &spec.tree;

    let mut seen = HashSet::new();
    for a in &tree.alternatives {
        if !seen.insert(a.id.as_str()) {
            out.push(Violation::DuplicateAlternative(a.id.clone()));
        }
    }
    let mut seen = HashSet::new();
    for n in &tree.nests {
        if !seen.insert(n.id.as_str()) {
            out.push(Violation::DuplicateNest(n.id.clone()));
        }
    }

    let alt_ids: HashSet<&str> = tree.alternatives.iter().map(|a| a.id.as_str()).collect();
    let nest_ids: HashSet<&str> = tree.nests.iter().map(|n| n.id.as_str()).collect();
    let mut owners: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for nest in &tree.nests {
        if nest.members.is_empty() {
            out.push(Violation::EmptyNest(nest.id.clone()));
        }
        for m in &nest.members {
            if alt_ids.contains(m.as_str()) {
                owners.entry(m.as_str()).or_default().push(nest.id.clone());
            } else if nest_ids.contains(m.as_str()) {
                out.push(Violation::DeeperNesting {
                    nest: nest.id.clone(),
                    member: m.clone(),
                });
            } else {
                out.push(Violation::UnknownMember {
                    nest: nest.id.clone(),
                    member: m.clone(),
                });
            }
        }
    }
    for a in &tree.alternatives {
        match owners.get(a.id.as_str()) {
            None => out.push(Violation::Unassigned(a.id.clone())),
            Some(nests) if nests.len() > 1 => out.push(Violation::InMultipleNests {
                alternative: a.id.clone(),
                nests: nests.clone(),
            }),
            Some(_) => {}
        }
    }
    if tree.nests.len() < 2 && !tree.plain_mnl {
        out.push(Violation::SingleNest);
    }
    for nest in &tree.nests {
        match nest.iv {
            IvSpec::Free(_) if nest.members.len() == 1 => {
                out.push(Violation::SingletonFreeIv(nest.id.clone()))
            }
            IvSpec::Free(x0) if !(x0 > 0.0 && x0.is_finite()) => out.push(Violation::FreeIvStartInvalid {
                nest: nest.id.clone(),
                value: x0.to_string(),
            }),
            IvSpec::Fixed(v) if !(v > 0.0 && v <= 1.0) => out.push(Violation::FixedIvOutOfRange {
                nest: nest.id.clone(),
                value: v.to_string(),
            }),
            _ => {}
        }
    }

    if !alt_ids.contains(spec.base_alternative.as_str()) {
        out.push(Violation::UnknownBase(spec.base_alternative.clone()));
    }

    let mut pairs = HashSet::new();
    for term in &spec.terms {
        if term.applies_to.is_empty() {
            out.push(Violation::EmptyTerm(term.parameter.clone()));
        }
        for alt in &term.applies_to {
            if !alt_ids.contains(alt.as_str()) {
                out.push(Violation::UnknownTermAlternative {
                    parameter: term.parameter.clone(),
                    alternative: alt.clone(),
                });
                continue;
            }
            if !pairs.insert((term.parameter.as_str(), alt.as_str())) {
                out.push(Violation::DuplicateTerm {
                    parameter: term.parameter.clone(),
                    alternative: alt.clone(),
                });
            }
            if term.covariate.is_constant() && *alt == spec.base_alternative {
                out.push(Violation::ConstantOnBase {
                    parameter: term.parameter.clone(),
                    alternative: alt.clone(),
                });
            }
        }
    }

    let betas: BTreeSet<&str> = spec.terms.iter().map(|t| t.parameter.as_str()).collect();
    for nest in tree.free_nests() {
        if betas.contains(nest.id.as_str()) {
            out.push(Violation::NameCollision(nest.id.clone()));
        }
    }
    out
}

impl ModelSpec {
    pub fn new(tree: NestTree, terms: Vec<UtilityTerm>, base_alternative: impl Into<String>) -> Self {
        Self {
            tree,
            terms,
            base_alternative: base_alternative.into(),
        }
    }

    /// Validates and returns `self`, or the full violation list.
    pub fn validated(self) -> Result<Self, SpecError> {
        let violations = validate_spec(&self);
        if violations.is_empty() {
            Ok(self)
        } else {
            Err(SpecError::Invalid(violations))
        }
    }

    /// Distinct coefficient names in first-appearance order.
    pub fn beta_names(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        self.terms
            .iter()
            .filter(|t| seen.insert(t.parameter.as_str()))
            .map(|t| t.parameter.clone())
            .collect()
    }

    /// Distinct non-constant covariate columns in first-appearance order.
    pub fn covariate_columns(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        self.terms
            .iter()
            .filter_map(|t| match &t.covariate {
                Covariate::Column(c) if seen.insert(c.as_str()) => Some(c.clone()),
                _ => None,
            })
            .collect()
    }

    /// Whether every term carrying `parameter` is a constant.
    pub fn is_constant_parameter(&self, parameter: &str) -> bool {
        let mut terms = self.terms.iter().filter(|t| t.parameter == parameter).peekable();
        terms.peek().is_some() && terms.all(|t| t.covariate.is_constant())
    }

    /// Alternatives a coefficient enters, in tree order.
    pub fn alternatives_of(&self, parameter: &str) -> Vec<String> {
        let used: HashSet<&str> = self
            .terms
            .iter()
            .filter(|t| t.parameter == parameter)
            .flat_map(|t| t.applies_to.iter().map(String::as_str))
            .collect();
        self.tree
            .alternatives
            .iter()
            .filter(|a| used.contains(a.id.as_str()))
            .map(|a| a.id.clone())
            .collect()
    }

    pub fn from_json(text: &str) -> Result<Self, SpecError> {
        let file: SpecFile = serde_json::from_str(text)?;
        Ok(file.into())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&SpecFile::from(self)).expect("spec serialization cannot fail")
    }

    pub fn load(path: &Path) -> Result<Self, SpecError> {
        let text = std::fs::read_to_string(path).map_err(|source| SpecError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    alternatives: Vec<String>,
    nests: Vec<Nest>,
    terms: Vec<TermFile>,
    base_alternative: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    plain_mnl: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermFile {
    param: String,
    covariate: String,
    alternatives: Vec<String>,
}

impl From<SpecFile> for ModelSpec {
    fn from(f: SpecFile) -> Self {
        let tree = NestTree {
            alternatives: f
                .alternatives
                .into_iter()
                .enumerate()
                .map(|(index, id)| Alternative { id, index })
                .collect(),
            nests: f.nests,
            plain_mnl: f.plain_mnl,
        };
        let terms = f
            .terms
            .into_iter()
            .map(|t| UtilityTerm {
                parameter: t.param,
                covariate: Covariate::from(t.covariate.as_str()),
                applies_to: t.alternatives,
            })
            .collect();
        ModelSpec {
            tree,
            terms,
            base_alternative: f.base_alternative,
        }
    }
}

impl From<&ModelSpec> for SpecFile {
    fn from(s: &ModelSpec) -> Self {
        SpecFile {
            alternatives: s.tree.alternatives.iter().map(|a| a.id.clone()).collect(),
            nests: s.tree.nests.clone(),
            terms: s
                .terms
                .iter()
                .map(|t| TermFile {
                    param: t.parameter.clone(),
                    covariate: t.covariate.name().to_string(),
                    alternatives: t.applies_to.clone(),
                })
                .collect(),
            base_alternative: s.base_alternative.clone(),
            plain_mnl: s.tree.plain_mnl,
        }
    }
}
