use serde::{Deserialize, Serialize};

/// One outcome of the choice set, e.g. `pdo` or `fatality`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Alternative {
    pub id: String,
    pub index: usize,
}

/// How a nest's inclusive value parameter enters the model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IvSpec {
    /// Estimated, starting from the given value.
    Free(f64),
    /// Held at the given value.
    Fixed(f64),
}

impl IvSpec {
    pub fn is_free(&self) -> bool {
        matches!(self, IvSpec::Free(_))
    }

    pub fn value(&self) -> f64 {
        match *self {
            IvSpec::Free(v) | IvSpec::Fixed(v) => v,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Nest {
    pub id: String,
    pub members: Vec<String>,
    pub iv: IvSpec,
}

impl Nest {
    pub fn new(id: impl Into<String>, members: &[&str], iv: IvSpec) -> Self {
        Self {
            id: id.into(),
            members: members.iter().map(|m| m.to_string()).collect(),
            iv,
        }
    }
}

/// Two-level grouping of alternatives into nests.
#[derive(Clone, Debug, PartialEq)]
pub struct NestTree {
    pub alternatives: Vec<Alternative>,
    pub nests: Vec<Nest>,
    /// Allows a single all-encompassing nest, which only makes sense as plain MNL.
    pub plain_mnl: bool,
}

impl NestTree {
    pub fn new(alternatives: &[&str], nests: Vec<Nest>) -> Self {
        Self {
            alternatives: alternatives
                .iter()
                .enumerate()
                .map(|(index, id)| Alternative {
                    id: id.to_string(),
                    index,
                })
                .collect(),
            nests,
            plain_mnl: false,
        }
    }

    /// Multinomial logit: every alternative in its own degenerate nest.
    pub fn mnl(alternatives: &[&str]) -> Self {
        let nests = alternatives
            .iter()
            .map(|a| Nest::new(*a, &[a], IvSpec::Fixed(1.0)))
            .collect();
        let mut tree = Self::new(alternatives, nests);
        tree.plain_mnl = true;
        tree
    }

    pub fn n_alternatives(&self) -> usize {
        self.alternatives.len()
    }

    pub fn alternative_index(&self, id: &str) -> Option<usize> {
        self.alternatives.iter().position(|a| a.id == id)
    }

    pub fn alternative_ids(&self) -> Vec<&str> {
        self.alternatives.iter().map(|a| a.id.as_str()).collect()
    }

    pub fn free_nests(&self) -> impl Iterator<Item = &Nest> {
        self.nests.iter().filter(|n| n.iv.is_free())
    }

    /// Nest index of every alternative, or `None` when the tree is not a partition.
    pub fn nest_of_alternatives(&self) -> Option<Vec<usize>> {
        let mut owner = vec![None; self.alternatives.len()];
        for (n, nest) in self.nests.iter().enumerate() {
            for m in &nest.members {
                let i = self.alternative_index(m)?;
                if owner[i].is_some() {
                    return None;
                }
                owner[i] = Some(n);
            }
        }
        owner.into_iter().collect()
    }
}
