//! Named parameter collections and their on-disk snapshot format.
//!
//! A checkpoint is a JSON document: `{"format_version": 1, "params":
//! [{"name", "shape", "values"}, ...]}`. Parameter order is part of the
//! format, so writing the same set twice produces identical bytes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

/// One named parameter tensor (row-major values).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl Param {
    pub fn new(name: &str, shape: &[usize], values: Vec<f64>) -> Param {
        debug_assert_eq!(shape.iter().product::<usize>(), values.len());
        Param {
            name: name.to_string(),
            shape: shape.to_vec(),
            values,
        }
    }
}

/// Ordered set of uniquely named parameters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    params: Vec<Param>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointFile {
    format_version: u32,
    params: Vec<Param>,
}

impl ParamSet {
    pub fn new() -> ParamSet {
        ParamSet { params: Vec::new() }
    }

    pub fn push(&mut self, param: Param) {
        debug_assert!(
            self.get(&param.name).is_none(),
            "duplicate parameter {}",
            param.name
        );
        self.params.push(param);
    }

    pub fn get(&self, name: &str) -> Option<&Param> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Param> {
        self.params.iter_mut().find(|p| p.name == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.params.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn value_count(&self) -> usize {
        self.params.iter().map(|p| p.values.len()).sum()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = CheckpointFile {
            format_version: FORMAT_VERSION,
            params: self.params.clone(),
        };
        let json = serde_json::to_string(&file)
            .map_err(|e| Error::Checkpoint(format!("serialize: {e}")))?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<ParamSet> {
        let text = std::fs::read_to_string(path)?;
        let file: CheckpointFile = serde_json::from_str(&text)
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        if file.format_version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "{}: format_version {} unsupported (expected {FORMAT_VERSION})",
                path.display(),
                file.format_version
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for p in &file.params {
            if p.shape.iter().product::<usize>() != p.values.len() {
                return Err(Error::Checkpoint(format!(
                    "parameter {}: shape {:?} does not hold {} values",
                    p.name,
                    p.shape,
                    p.values.len()
                )));
            }
            if !seen.insert(p.name.clone()) {
                return Err(Error::Checkpoint(format!(
                    "duplicate parameter {}",
                    p.name
                )));
            }
        }
        Ok(ParamSet { params: file.params })
    }

    /// Checks this set against a template built for the wanted
    /// architecture; any missing, extra, or reshaped parameter is an
    /// error naming the offender.
    pub fn check_matches(&self, template: &ParamSet) -> Result<()> {
        for want in template.iter() {
            match self.get(&want.name) {
                None => {
                    return Err(Error::Checkpoint(format!(
                        "missing parameter {} (shape {:?})",
                        want.name, want.shape
                    )))
                }
                Some(have) if have.shape != want.shape => {
                    return Err(Error::Checkpoint(format!(
                        "parameter {}: checkpoint shape {:?}, expected {:?}",
                        want.name, have.shape, want.shape
                    )))
                }
                Some(_) => {}
            }
        }
        for have in self.iter() {
            if template.get(&have.name).is_none() {
                return Err(Error::Checkpoint(format!(
                    "unexpected parameter {}",
                    have.name
                )));
            }
        }
        Ok(())
    }
}

impl FromIterator<Param> for ParamSet {
    fn from_iter<T: IntoIterator<Item = Param>>(iter: T) -> Self {
        let mut set = ParamSet::new();
        for p in iter {
            set.push(p);
        }
        set
    }
}
