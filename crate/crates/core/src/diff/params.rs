use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const PARAMS_FORMAT_VERSION: u32 = 1;

/// Named, ordered collection of tensors.
///
/// Names are unique and a tensor's shape is fixed once inserted; values may be
/// updated in place through [`ParamSet::get_mut`] or [`ParamSet::update`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    tensors: IndexMap<String, Tensor>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) -> Result<()> {
        let name = name.into();
        if self.tensors.contains_key(&name) {
            return Err(Error::InvalidArgument(format!(
                "duplicate parameter name `{name}`"
            )));
        }
        self.tensors.insert(name, t);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        self.tensors.get_mut(name).map(|t| t.data_mut())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    /// Total number of scalar entries.
    pub fn numel(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }

    pub fn zeros_like(&self) -> ParamSet {
        ParamSet {
            tensors: self
                .tensors
                .iter()
                .map(|(k, t)| (k.clone(), Tensor::zeros(t.shape())))
                .collect(),
        }
    }

    /// Fails unless `other` has the same names, order and shapes.
    pub fn check_same_layout(&self, other: &ParamSet) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::Shape(format!(
                "parameter sets hold {} and {} tensors",
                self.len(),
                other.len()
            )));
        }
        for ((n1, t1), (n2, t2)) in self.tensors.iter().zip(&other.tensors) {
            if n1 != n2 || t1.shape() != t2.shape() {
                return Err(Error::Shape(format!(
                    "`{n1}` {:?} vs `{n2}` {:?}",
                    t1.shape(),
                    t2.shape()
                )));
            }
        }
        Ok(())
    }

    pub fn global_norm(&self) -> f64 {
        self.tensors
            .values()
            .map(Tensor::sq_norm)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.values().all(Tensor::is_finite)
    }

    /// Applies `f(param_entry, other_entry)` across two sets of equal layout.
    pub fn update(&mut self, other: &ParamSet, mut f: impl FnMut(&mut f64, f64)) -> Result<()> {
        self.check_same_layout(other)?;
        for (t, o) in self.tensors.values_mut().zip(other.tensors.values()) {
            for (p, q) in t.data_mut().iter_mut().zip(o.data()) {
                f(p, *q);
            }
        }
        Ok(())
    }

    /// Flat copy of every entry in set order.
    pub fn flatten(&self) -> Vec<f64> {
        self.tensors
            .values()
            .flat_map(|t| t.data().iter().copied())
            .collect()
    }

    /// Mutable access to the `i`-th scalar entry in flattened order.
    pub fn entry_mut(&mut self, mut i: usize) -> &mut f64 {
        for t in self.tensors.values_mut() {
            if i < t.len() {
                return &mut t.data_mut()[i];
            }
            i -= t.len();
        }
        panic!("entry index out of range");
    }

    /// Copies tensors into a new set with `prefix` prepended to each name.
    pub fn prefixed(&self, prefix: &str) -> ParamSet {
        ParamSet {
            tensors: self
                .tensors
                .iter()
                .map(|(k, t)| (format!("{prefix}{k}"), t.clone()))
                .collect(),
        }
    }

    /// Inverse of [`ParamSet::prefixed`]: the tensors whose name starts with
    /// `prefix`, with the prefix removed.
    pub fn strip_prefix(&self, prefix: &str) -> ParamSet {
        ParamSet {
            tensors: self
                .tensors
                .iter()
                .filter_map(|(k, t)| k.strip_prefix(prefix).map(|s| (s.to_string(), t.clone())))
                .collect(),
        }
    }

    pub fn extend(&mut self, other: ParamSet) -> Result<()> {
        for (k, t) in other.tensors {
            self.insert(k, t)?;
        }
        Ok(())
    }

    pub fn to_doc(&self) -> ParamDoc {
        ParamDoc {
            format_version: PARAMS_FORMAT_VERSION,
            tensors: self
                .tensors
                .iter()
                .map(|(name, t)| TensorDoc {
                    name: name.clone(),
                    shape: t.shape().to_vec(),
                    data: t.data().to_vec(),
                })
                .collect(),
        }
    }

    pub fn from_doc(doc: ParamDoc) -> Result<Self> {
        if doc.format_version != PARAMS_FORMAT_VERSION {
            return Err(Error::Incompatible(format!(
                "parameter format version {} (expected {PARAMS_FORMAT_VERSION})",
                doc.format_version
            )));
        }
        let mut set = ParamSet::new();
        for t in doc.tensors {
            set.insert(t.name, Tensor::new(t.shape, t.data)?)?;
        }
        Ok(set)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_doc()).expect("parameter documents always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ParamDoc = serde_json::from_str(text).map_err(|e| Error::Corrupt {
            path: "<memory>".into(),
            reason: e.to_string(),
        })?;
        Self::from_doc(doc)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let doc: ParamDoc = serde_json::from_str(&text).map_err(|e| Error::Corrupt {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Self::from_doc(doc)
    }
}

/// On-disk form of a [`ParamSet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDoc {
    pub format_version: u32,
    pub tensors: Vec<TensorDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorDoc {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}
