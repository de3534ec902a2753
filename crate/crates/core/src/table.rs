//! Aggregate per-basket trial data.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// One basket: responders out of enrolled patients, tested against a
/// basket-specific null response rate.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Basket {
    pub label: String,
    /// Number of responders.
    #[cfg_attr(feature = "serde", serde(rename = "y"))]
    pub responders: u64,
    /// Number of enrolled patients.
    #[cfg_attr(feature = "serde", serde(rename = "n"))]
    pub patients: u64,
    /// Null (clinically meaningful minimum) response rate.
    #[cfg_attr(feature = "serde", serde(rename = "pi0"))]
    pub null_rate: f64,
    /// Optional user weight; overrides the ratio-scale weight policy.
    #[cfg_attr(
        feature = "serde",
        serde(default, skip_serializing_if = "Option::is_none")
    )]
    pub weight: Option<f64>,
}

impl Basket {
    pub fn new(label: impl Into<String>, responders: u64, patients: u64, null_rate: f64) -> Self {
        Basket {
            label: label.into(),
            responders,
            patients,
            null_rate,
            weight: None,
        }
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = Some(weight);
        self
    }

    /// Observed response rate `y / n`.
    pub fn rate(&self) -> f64 {
        self.responders as f64 / self.patients as f64
    }

    fn validate(&self) -> Result<()> {
        if self.patients == 0 {
            return Err(Error::InvalidSampleSize {
                label: self.label.clone(),
            });
        }
        if self.responders > self.patients {
            return Err(Error::InvalidCount {
                label: self.label.clone(),
                y: self.responders,
                n: self.patients,
            });
        }
        // NaN fails both comparisons.
        if !(self.null_rate > 0.0 && self.null_rate < 1.0) {
            return Err(Error::InvalidNullRate {
                label: self.label.clone(),
                pi0: self.null_rate,
            });
        }
        if let Some(w) = self.weight {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidWeight {
                    label: self.label.clone(),
                    weight: w,
                });
            }
        }
        Ok(())
    }
}

/// A validated, ordered collection of baskets. Baskets keep input order and
/// are reported as 1..K in that order.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct BasketTable {
    baskets: Vec<Basket>,
}

impl BasketTable {
    pub fn new(baskets: Vec<Basket>) -> Result<Self> {
        validate_baskets(&baskets)?;
        Ok(BasketTable { baskets })
    }

    pub fn baskets(&self) -> &[Basket] {
        &self.baskets
    }

    pub fn len(&self) -> usize {
        self.baskets.len()
    }

    /// Always false for a validated table; present for API symmetry.
    pub fn is_empty(&self) -> bool {
        self.baskets.is_empty()
    }

    pub fn iter(&self) -> core::slice::Iter<'_, Basket> {
        self.baskets.iter()
    }

    pub fn total_patients(&self) -> u64 {
        self.baskets.iter().map(|b| b.patients).sum()
    }

    pub fn total_responders(&self) -> u64 {
        self.baskets.iter().map(|b| b.responders).sum()
    }

    /// Table restricted to the given basket indices (0-based, in the given order).
    pub fn subset(&self, indices: &[usize]) -> Result<BasketTable> {
        let mut baskets = Vec::with_capacity(indices.len());
        for &i in indices {
            let b = self.baskets.get(i).ok_or_else(|| {
                Error::InvalidArgument(alloc::format!(
                    "basket index {i} out of range for {} baskets",
                    self.baskets.len()
                ))
            })?;
            baskets.push(b.clone());
        }
        BasketTable::new(baskets)
    }

    pub fn into_baskets(self) -> Vec<Basket> {
        self.baskets
    }
}

impl<'a> IntoIterator for &'a BasketTable {
    type Item = &'a Basket;
    type IntoIter = core::slice::Iter<'a, Basket>;

    fn into_iter(self) -> Self::IntoIter {
        self.baskets.iter()
    }
}

#[cfg(feature = "serde")]
impl<'de> serde::Deserialize<'de> for BasketTable {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let baskets = Vec::<Basket>::deserialize(d)?;
        BasketTable::new(baskets).map_err(serde::de::Error::custom)
    }
}

fn validate_baskets(baskets: &[Basket]) -> Result<()> {
    if baskets.is_empty() {
        return Err(Error::EmptyTable);
    }
    let mut seen = BTreeSet::new();
    for b in baskets {
        b.validate()?;
        if !seen.insert(b.label.as_str()) {
            return Err(Error::DuplicateLabel(b.label.clone()));
        }
    }
    Ok(())
}

/// Checks every table invariant and hands the table back unchanged.
pub fn validate_table(raw: BasketTable) -> Result<BasketTable> {
    validate_baskets(&raw.baskets)?;
    Ok(raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn vemurafenib() -> Vec<Basket> {
        let rows = [
            ("ATC", 2, 7),
            ("ECD/LCH", 6, 14),
            ("CCA", 1, 8),
            ("CRC-V", 1, 26),
            ("CRC-VC", 0, 10),
            ("NSCLC", 8, 19),
        ];
        rows.iter()
            .map(|&(l, y, n)| Basket::new(l, y, n, 0.15))
            .collect()
    }

    #[test]
    fn accepts_vemurafenib() {
        let t = BasketTable::new(vemurafenib()).unwrap();
        assert_eq!(t.len(), 6);
        assert_eq!(t.total_patients(), 84);
        assert_eq!(t.total_responders(), 18);
        let again = validate_table(t.clone()).unwrap();
        assert_eq!(again, t);
    }

    #[test]
    fn accepts_minimal_table() {
        let t = BasketTable::new(vec![Basket::new("a", 0, 1, 0.5)]).unwrap();
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn rejects_bad_rows() {
        let err = BasketTable::new(vec![Basket::new("a", 5, 3, 0.2)]).unwrap_err();
        assert!(matches!(err, Error::InvalidCount { y: 5, n: 3, .. }));

        for pi0 in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            let err = BasketTable::new(vec![Basket::new("a", 1, 3, pi0)]).unwrap_err();
            assert!(matches!(err, Error::InvalidNullRate { .. }));
        }
        for w in [0.0, -1.0, f64::INFINITY] {
            let err =
                BasketTable::new(vec![Basket::new("a", 1, 3, 0.2).with_weight(w)]).unwrap_err();
            assert!(matches!(err, Error::InvalidWeight { .. }));
        }
        assert_eq!(BasketTable::new(vec![]).unwrap_err(), Error::EmptyTable);
        let err = BasketTable::new(vec![Basket::new("a", 0, 0, 0.2)]).unwrap_err();
        assert!(matches!(err, Error::InvalidSampleSize { .. }));
        let err = BasketTable::new(vec![
            Basket::new("a", 0, 2, 0.2),
            Basket::new("a", 1, 2, 0.2),
        ])
        .unwrap_err();
        assert_eq!(err, Error::DuplicateLabel("a".into()));
    }

    #[test]
    fn subset_keeps_requested_order() {
        let t = BasketTable::new(vemurafenib()).unwrap();
        let s = t.subset(&[5, 0]).unwrap();
        assert_eq!(s.baskets()[0].label, "NSCLC");
        assert_eq!(s.baskets()[1].label, "ATC");
        assert!(t.subset(&[6]).is_err());
    }
}
