use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Declared sign of the covariance between two indicators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceSign {
    Nonnegative,
    Nonpositive,
    #[default]
    Unknown,
}

/// Sign knowledge about `cov(1{x_i = a}, 1{x_j = b})` for distinct nodes `i != j`.
///
/// Entries are stored under the ordered key `(min, max)`, so lookups are
/// symmetric. Anything not declared is [`CovarianceSign::Unknown`].
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CorrelationLedger {
    entries: BTreeMap<(usize, usize), CovarianceSign>,
}

impl CorrelationLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, a: usize, b: usize, sign: CovarianceSign) -> Self {
        self.set(a, b, sign);
        self
    }

    pub fn set(&mut self, a: usize, b: usize, sign: CovarianceSign) {
        let key = (a.min(b), a.max(b));
        if sign == CovarianceSign::Unknown {
            self.entries.remove(&key);
        } else {
            self.entries.insert(key, sign);
        }
    }

    pub fn sign(&self, a: usize, b: usize) -> CovarianceSign {
        self.entries.get(&(a.min(b), a.max(b))).copied().unwrap_or_default()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = ((usize, usize), CovarianceSign)> + '_ {
        self.entries.iter().map(|(k, v)| (*k, *v))
    }

    /// Named form for run metadata, e.g. `{"I,I": "nonnegative"}`.
    pub fn describe(&self, compartments: &[String]) -> BTreeMap<String, CovarianceSign> {
        self.entries
            .iter()
            .map(|(&(a, b), &s)| (format!("{},{}", compartments[a], compartments[b]), s))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_lookup_and_default() {
        let l = CorrelationLedger::new().with(1, 0, CovarianceSign::Nonpositive);
        assert_eq!(l.sign(0, 1), CovarianceSign::Nonpositive);
        assert_eq!(l.sign(1, 0), CovarianceSign::Nonpositive);
        assert_eq!(l.sign(1, 1), CovarianceSign::Unknown);
        let mut l = l;
        l.set(0, 1, CovarianceSign::Unknown);
        assert!(l.is_empty());
    }

    #[test]
    fn describe_uses_names() {
        let names = vec!["S".to_string(), "I".to_string()];
        let l = CorrelationLedger::new().with(1, 1, CovarianceSign::Nonnegative);
        let d = l.describe(&names);
        assert_eq!(d["I,I"], CovarianceSign::Nonnegative);
    }
}
