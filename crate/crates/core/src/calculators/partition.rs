use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::CatalogError;

/// Split of a calculator's coordinates into output, input and hidden sets.
///
/// Only the full set and the output/input subsets are stored; the hidden set
/// is always recomputed as `all - output`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DofPartition {
    all: Vec<String>,
    output: Vec<String>,
    input: Vec<String>,
}

impl DofPartition {
    pub fn new<S: Into<String>>(
        all: impl IntoIterator<Item = S>,
        output: impl IntoIterator<Item = S>,
        input: impl IntoIterator<Item = S>,
    ) -> Result<Self, CatalogError> {
        let all: Vec<String> = all.into_iter().map(Into::into).collect();
        let output: Vec<String> = output.into_iter().map(Into::into).collect();
        let input: Vec<String> = input.into_iter().map(Into::into).collect();
        let set: BTreeSet<&str> = all.iter().map(String::as_str).collect();
        if set.len() != all.len() {
            return Err(CatalogError::Partition("dof ids must be unique".into()));
        }
        for (name, subset) in [("output", &output), ("input", &input)] {
            let sub: BTreeSet<&str> = subset.iter().map(String::as_str).collect();
            if sub.len() != subset.len() {
                return Err(CatalogError::Partition(format!("duplicate {name} dof id")));
            }
            if let Some(missing) = subset.iter().find(|d| !set.contains(d.as_str())) {
                return Err(CatalogError::Partition(format!(
                    "{name} dof `{missing}` is not a coordinate of the calculator"
                )));
            }
        }
        Ok(Self { all, output, input })
    }

    pub fn all(&self) -> &[String] {
        &self.all
    }

    pub fn output(&self) -> &[String] {
        &self.output
    }

    pub fn input(&self) -> &[String] {
        &self.input
    }

    /// Unobservable coordinates, in the order of the full set.
    pub fn hidden(&self) -> Vec<String> {
        self.all
            .iter()
            .filter(|d| !self.output.contains(d))
            .cloned()
            .collect()
    }

    pub fn observes_everything(&self) -> bool {
        self.output.len() == self.all.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hidden_is_complement_of_output() {
        let p = DofPartition::new(["x1", "y1", "x2", "y2"], ["x1", "y1"], []).unwrap();
        assert_eq!(p.hidden(), vec!["x2", "y2"]);
        assert!(!p.observes_everything());
    }

    #[test]
    fn rejects_foreign_and_duplicate_ids() {
        assert!(DofPartition::new(["x", "y"], ["z"], []).is_err());
        assert!(DofPartition::new(["x", "y"], ["x"], ["q"]).is_err());
        assert!(DofPartition::new(["x", "x"], ["x"], []).is_err());
        assert!(DofPartition::new(["x", "y"], ["x", "x"], []).is_err());
    }
}
