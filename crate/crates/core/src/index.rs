//! Inverted alignment index: timestamp to the representations with a
//! dominant outlier there.
//!
//! Most representation pairs share no outlier timestamp and can never carry
//! a meaningful outlier relationship, so enumerating co-posted pairs from
//! the index prunes them before any regression is fitted. Postings hold
//! only outlier timestamps; full score vectors stay in the catalog.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scoring::Representation;
use crate::series::Timestamp;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("duplicate representation id {0:?}")]
    DuplicateId(String),
}

/// Which candidate pairs are dropped regardless of shared outliers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionPolicy {
    /// Drop pairs of representations derived from the same base attribute
    /// (different windows of one attribute explain nothing but themselves).
    #[default]
    SameAttribute,
    None,
}

impl ExclusionPolicy {
    pub fn allows(&self, a: &Representation, b: &Representation) -> bool {
        match self {
            ExclusionPolicy::SameAttribute => a.attr_id != b.attr_id,
            ExclusionPolicy::None => true,
        }
    }
}

/// An unordered representation pair sharing at least one dominant-outlier
/// timestamp. Ids are canonicalized so `rep_a < rep_b`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidatePair {
    pub rep_a: String,
    pub rep_b: String,
    pub shared_outlier_timestamps: BTreeSet<Timestamp>,
}

/// Counts behind the index's pruning effect for one corpus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PruningReport {
    pub total_pairs: usize,
    pub indexed_pairs: usize,
    pub pruned_fraction: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AlignmentIndex {
    postings: BTreeMap<Timestamp, BTreeSet<String>>,
    catalog: BTreeMap<String, Representation>,
}

impl AlignmentIndex {
    pub fn new() -> Self {
        AlignmentIndex::default()
    }

    /// Insert one representation, posting its outlier timestamps. Designed
    /// to be called as each dominant representation is produced, so building
    /// the index adds no extra pass.
    pub fn insert(&mut self, rep: Representation) -> Result<(), IndexError> {
        let id = rep.id();
        if self.catalog.contains_key(&id) {
            return Err(IndexError::DuplicateId(id));
        }
        for ts in rep.outlier_timestamps() {
            self.postings.entry(ts).or_default().insert(id.clone());
        }
        self.catalog.insert(id, rep);
        Ok(())
    }

    pub fn postings(&self) -> &BTreeMap<Timestamp, BTreeSet<String>> {
        &self.postings
    }

    pub fn catalog(&self) -> &BTreeMap<String, Representation> {
        &self.catalog
    }

    pub fn get(&self, rep_id: &str) -> Option<&Representation> {
        self.catalog.get(rep_id)
    }

    pub fn len(&self) -> usize {
        self.catalog.len()
    }

    pub fn is_empty(&self) -> bool {
        self.catalog.is_empty()
    }

    /// All non-excluded unordered pairs co-posted at one or more timestamps,
    /// each carrying its full set of shared outlier timestamps, in
    /// canonical id order.
    pub fn candidate_pairs(&self, exclusion: ExclusionPolicy) -> Vec<CandidatePair> {
        let mut shared: BTreeMap<(String, String), BTreeSet<Timestamp>> = BTreeMap::new();
        for (ts, ids) in &self.postings {
            let ids: Vec<&String> = ids.iter().collect();
            for i in 0..ids.len() {
                for j in i + 1..ids.len() {
                    let (a, b) = (ids[i], ids[j]);
                    if !exclusion.allows(&self.catalog[a], &self.catalog[b]) {
                        continue;
                    }
                    shared
                        .entry((a.clone(), b.clone()))
                        .or_default()
                        .insert(*ts);
                }
            }
        }
        shared
            .into_iter()
            .map(|((rep_a, rep_b), shared_outlier_timestamps)| CandidatePair {
                rep_a,
                rep_b,
                shared_outlier_timestamps,
            })
            .collect()
    }

    /// All non-excluded unordered pairs of catalog entries, indexed or not.
    /// This is the universe the index prunes.
    pub fn all_pairs(&self, exclusion: ExclusionPolicy) -> Vec<(String, String)> {
        let ids: Vec<&String> = self.catalog.keys().collect();
        let mut out = Vec::new();
        for i in 0..ids.len() {
            for j in i + 1..ids.len() {
                if exclusion.allows(&self.catalog[ids[i]], &self.catalog[ids[j]]) {
                    out.push((ids[i].clone(), ids[j].clone()));
                }
            }
        }
        out
    }

    /// How many pairs the index removes from consideration. With no
    /// exclusion the universe is n * (n - 1) / 2 over the catalog.
    pub fn pruning_report(&self, exclusion: ExclusionPolicy) -> PruningReport {
        let total_pairs = self.all_pairs(exclusion).len();
        let indexed_pairs = self.candidate_pairs(exclusion).len();
        let pruned_fraction = if total_pairs == 0 {
            1.0
        } else {
            1.0 - indexed_pairs as f64 / total_pairs as f64
        };
        PruningReport { total_pairs, indexed_pairs, pruned_fraction }
    }
}

/// Build an index over dominant representations in one pass.
pub fn build_index<I>(reps: I) -> Result<AlignmentIndex, IndexError>
where
    I: IntoIterator<Item = Representation>,
{
    let mut index = AlignmentIndex::new();
    for rep in reps {
        index.insert(rep)?;
    }
    Ok(index)
}
