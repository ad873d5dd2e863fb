use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::spec::ModelSpec;
use super::SpecError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    Beta,
    Iv,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub name: String,
    pub kind: ParamKind,
}

/// Ordered slot list: coefficients by term order, then free inclusive values by nest order.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ParamLayout {
    pub slots: Vec<Slot>,
}

impl ParamLayout {
    pub fn for_spec(spec: &ModelSpec) -> Self {
        let betas = spec.beta_names().into_iter().map(|name| Slot {
            name,
            kind: ParamKind::Beta,
        });
        let ivs = spec.tree.free_nests().map(|n| Slot {
            name: n.id.clone(),
            kind: ParamKind::Iv,
        });
        Self {
            slots: betas.chain(ivs).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.slots.iter().position(|s| s.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.slots.iter().map(|s| s.name.as_str())
    }

    pub fn n_beta(&self) -> usize {
        self.slots.iter().filter(|s| s.kind == ParamKind::Beta).count()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParameterVector {
    pub values: Vec<f64>,
    pub layout: ParamLayout,
}

impl ParameterVector {
    pub fn new(layout: ParamLayout, values: Vec<f64>) -> Self {
        assert_eq!(layout.len(), values.len(), "layout and values differ in length");
        Self { values, layout }
    }

    /// Documented start point: every coefficient 0, every free inclusive value at its nest's start.
    pub fn start(spec: &ModelSpec) -> Self {
        let layout = ParamLayout::for_spec(spec);
        let values = layout
            .slots
            .iter()
            .map(|s| match s.kind {
                ParamKind::Beta => 0.0,
                ParamKind::Iv => spec
                    .tree
                    .nests
                    .iter()
                    .find(|n| n.id == s.name)
                    .map(|n| n.iv.value())
                    .unwrap_or(0.5),
            })
            .collect();
        Self { values, layout }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.layout.index_of(name).map(|i| self.values[i])
    }

    pub fn with_values(&self, values: Vec<f64>) -> Self {
        Self::new(self.layout.clone(), values)
    }
}

/// Places named values into the spec's slot layout; every free parameter must be named exactly once.
pub fn pack_parameters(spec: &ModelSpec, named: &BTreeMap<String, f64>) -> Result<ParameterVector, SpecError> {
    let layout = ParamLayout::for_spec(spec);
    let missing: Vec<String> = layout
        .names()
        .filter(|n| !named.contains_key(*n))
        .map(str::to_string)
        .collect();
    let extra: Vec<String> = named
        .keys()
        .filter(|k| layout.index_of(k).is_none())
        .cloned()
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(SpecError::ParameterMismatch { missing, extra });
    }
    let values = layout.names().map(|n| named[n]).collect();
    Ok(ParameterVector { values, layout })
}

pub fn unpack_parameters(params: &ParameterVector) -> BTreeMap<String, f64> {
    params
        .layout
        .names()
        .map(str::to_string)
        .zip(params.values.iter().copied())
        .collect()
}
