//! Partitions of baskets into subclasses and candidate-model enumeration.
//!
//! A partition is stored as a restricted growth string: basket `i` belongs to
//! class `assignment[i]` (0-based), and classes are numbered by the first
//! basket they contain. Restricted growth strings are in one-to-one
//! correspondence with set partitions, so the canonical form doubles as the
//! identity used for de-duplication and tie-breaking.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::error::{Error, Result};
use crate::table::BasketTable;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Partition {
    assignment: Vec<usize>,
    classes: usize,
}

impl Partition {
    /// Builds a partition from 1-based subclass labels with `classes`
    /// declared subclasses, canonicalising the labelling.
    pub fn from_labels(labels: &[usize], classes: usize) -> Result<Partition> {
        if labels.is_empty() {
            return Err(Error::EmptyTable);
        }
        let mut used = vec![false; classes];
        for &l in labels {
            if l == 0 || l > classes {
                return Err(Error::InvalidPartition { label: l, classes });
            }
            used[l - 1] = true;
        }
        if let Some(missing) = used.iter().position(|u| !u) {
            return Err(Error::EmptySubclass(missing + 1));
        }
        Ok(relabel(labels, classes))
    }

    /// Single subclass holding all `k` baskets.
    pub fn single(k: usize) -> Partition {
        Partition {
            assignment: vec![0; k],
            classes: 1,
        }
    }

    /// Every basket in its own subclass.
    pub fn separate(k: usize) -> Partition {
        Partition {
            assignment: (0..k).collect(),
            classes: k,
        }
    }

    /// Partition whose subclasses are the given groups of 0-based basket
    /// indices. Every index below `k` must appear exactly once.
    pub fn from_groups(k: usize, groups: &[&[usize]]) -> Result<Partition> {
        let mut labels = vec![0usize; k];
        for (g, members) in groups.iter().enumerate() {
            if members.is_empty() {
                return Err(Error::EmptySubclass(g + 1));
            }
            for &m in members.iter() {
                if m >= k || labels[m] != 0 {
                    return Err(Error::InvalidArgument(alloc::format!(
                        "basket index {m} missing, repeated or out of range"
                    )));
                }
                labels[m] = g + 1;
            }
        }
        if labels.contains(&0) {
            return Err(Error::InvalidArgument(
                "every basket must be assigned".into(),
            ));
        }
        Partition::from_labels(&labels, groups.len())
    }

    pub fn num_baskets(&self) -> usize {
        self.assignment.len()
    }

    pub fn num_classes(&self) -> usize {
        self.classes
    }

    /// 0-based class index per basket.
    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// 1-based subclass labels per basket.
    pub fn labels(&self) -> Vec<usize> {
        self.assignment.iter().map(|c| c + 1).collect()
    }

    /// Members (0-based basket indices, ascending) of each subclass, in
    /// canonical subclass order.
    pub fn classes(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.classes];
        for (i, &c) in self.assignment.iter().enumerate() {
            out[c].push(i);
        }
        out
    }

    /// Model string with 1-based baskets, e.g. `1 2 6/ 3 4 5`.
    pub fn model_string(&self) -> String {
        let mut s = String::new();
        for (ci, members) in self.classes().iter().enumerate() {
            if ci > 0 {
                s.push_str("/ ");
            }
            s.push_str(&members_string(members));
        }
        s
    }
}

/// Space-separated 1-based basket numbers.
pub fn members_string(members: &[usize]) -> String {
    let mut s = String::new();
    for (j, m) in members.iter().enumerate() {
        if j > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{}", m + 1);
    }
    s
}

fn relabel(labels: &[usize], classes: usize) -> Partition {
    let mut map = vec![usize::MAX; classes + 1];
    let mut next = 0;
    let assignment = labels
        .iter()
        .map(|&l| {
            if map[l] == usize::MAX {
                map[l] = next;
                next += 1;
            }
            map[l]
        })
        .collect();
    Partition {
        assignment,
        classes: next,
    }
}

/// Canonical form: subclasses renumbered in order of their smallest member.
/// Idempotent.
pub fn canonicalize_partition(p: &Partition) -> Partition {
    let labels = p.labels();
    relabel(&labels, p.classes)
}

/// Candidate model families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Strategy {
    /// The single-class model plus every split into two subclasses.
    TwoSubclass,
    /// Every set partition.
    AllSubclasses,
    /// Every set partition whose subclasses all exceed the patient minimum.
    NonSparse,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::TwoSubclass => "two-subclass",
            Strategy::AllSubclasses => "all-subclasses",
            Strategy::NonSparse => "non-sparse",
        }
    }
}

/// Limits on enumeration size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumerationLimits {
    /// Maximum number of partitions to enumerate before filtering.
    pub max_models: u64,
}

impl Default for EnumerationLimits {
    /// Bell(12) = 4,213,597: all set partitions of up to twelve baskets.
    fn default() -> Self {
        EnumerationLimits {
            max_models: 4_213_597,
        }
    }
}

/// Bell number `B(k)` (saturating).
pub fn bell_number(k: usize) -> u128 {
    // Bell triangle.
    let mut row: Vec<u128> = vec![1];
    for _ in 0..k {
        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(*row.last().unwrap());
        for &v in &row {
            let last = *next.last().unwrap();
            next.push(last.saturating_add(v));
        }
        row = next;
    }
    row[0]
}

fn candidate_count(k: usize, strategy: Strategy) -> u128 {
    match strategy {
        Strategy::TwoSubclass => {
            if k >= 128 {
                u128::MAX
            } else {
                1u128 << (k.saturating_sub(1))
            }
        }
        Strategy::AllSubclasses | Strategy::NonSparse => bell_number(k),
    }
}

/// Visits every restricted growth string of length `k` with at most
/// `max_classes` classes, in lexicographic order, until `f` returns false.
fn for_each_rgs(k: usize, max_classes: usize, mut f: impl FnMut(&[usize], usize) -> bool) {
    if k == 0 {
        return;
    }
    let mut a = vec![0usize; k];
    // prefix_max[i] = max(a[0..=i])
    let mut prefix_max = vec![0usize; k];
    loop {
        if !f(&a, prefix_max[k - 1] + 1) {
            return;
        }
        // Find rightmost position that can be incremented.
        let mut i = k - 1;
        loop {
            if i == 0 {
                return;
            }
            let bound = prefix_max[i - 1] + 1;
            if a[i] < bound && a[i] + 1 < max_classes {
                break;
            }
            i -= 1;
        }
        a[i] += 1;
        prefix_max[i] = prefix_max[i - 1].max(a[i]);
        for j in i + 1..k {
            a[j] = 0;
            prefix_max[j] = prefix_max[j - 1];
        }
    }
}

/// Streams the candidate partitions in canonical order without storing
/// them. `f` receives the 0-based class of each basket and the number of
/// classes; an error from `f` stops the walk and is returned.
///
/// `min_subclass_patients` only applies to [`Strategy::NonSparse`]: a
/// subclass qualifies when its total patients strictly exceed it.
pub fn for_each_model(
    table: &BasketTable,
    strategy: Strategy,
    min_subclass_patients: u64,
    limits: EnumerationLimits,
    mut f: impl FnMut(&[usize], usize) -> Result<()>,
) -> Result<()> {
    let k = table.len();
    let count = candidate_count(k, strategy);
    if count > limits.max_models as u128 {
        return Err(Error::CombinatorialLimit {
            models: count,
            limit: limits.max_models,
        });
    }
    let sizes: Vec<u64> = table.iter().map(|b| b.patients).collect();
    let max_classes = match strategy {
        Strategy::TwoSubclass => 2,
        _ => k,
    };
    let mut totals = vec![0u64; k];
    let mut outcome = Ok(());
    for_each_rgs(k, max_classes, |a, classes| {
        if strategy == Strategy::NonSparse {
            totals[..classes].iter_mut().for_each(|t| *t = 0);
            for (i, &c) in a.iter().enumerate() {
                totals[c] += sizes[i];
            }
            if totals[..classes]
                .iter()
                .any(|&t| t <= min_subclass_patients)
            {
                return true;
            }
        }
        outcome = f(a, classes);
        outcome.is_ok()
    });
    outcome
}

/// Candidate partitions of the table's baskets, in canonical (lexicographic
/// restricted-growth) order. See [`for_each_model`].
pub fn enumerate_models(
    table: &BasketTable,
    strategy: Strategy,
    min_subclass_patients: u64,
    limits: EnumerationLimits,
) -> Result<Vec<Partition>> {
    let mut out = Vec::new();
    for_each_model(
        table,
        strategy,
        min_subclass_patients,
        limits,
        |a, classes| {
            out.push(Partition {
                assignment: a.to_vec(),
                classes,
            });
            Ok(())
        },
    )?;
    Ok(out)
}

impl Partition {
    /// Partition from a restricted growth string, as produced by
    /// [`for_each_model`].
    pub fn from_rgs(assignment: &[usize], classes: usize) -> Partition {
        debug_assert_eq!(
            canonicalize_partition(&Partition {
                assignment: assignment.to_vec(),
                classes
            })
            .assignment,
            assignment
        );
        Partition {
            assignment: assignment.to_vec(),
            classes,
        }
    }

    /// Bit mask of the baskets in each subclass.
    pub fn class_masks(&self) -> Vec<u64> {
        masks_of(&self.assignment, self.classes)
    }
}

pub(crate) fn masks_of(assignment: &[usize], classes: usize) -> Vec<u64> {
    let mut masks = vec![0u64; classes];
    for (i, &c) in assignment.iter().enumerate() {
        masks[c] |= 1 << i;
    }
    masks
}
