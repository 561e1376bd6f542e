//! Exact Euclidean k-NN over an archive and majority voting.
//!
//! Rows are kept in ascending id order and every comparison uses the key
//! `(squared distance, row)`, so ties resolve by ascending id and results do
//! not depend on archive order or on how the scan is split across workers.

use alloc::collections::{BTreeMap, BinaryHeap};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::data::{FeatureConfig, FeatureVector, Label};
use crate::exec::{Executor, Sequential};
use crate::{Error, Result};

/// Rows scanned per work unit.
pub const SCAN_BLOCK: usize = 1024;

/// Archive vectors with aligned ids and labels, in ascending id order.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchIndex {
    dim: usize,
    config: FeatureConfig,
    ids: Vec<String>,
    labels: Vec<Label>,
    data: Vec<f32>,
    normalized: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchOptions {
    /// L2-normalize archive rows and queries before matching.
    pub normalize: bool,
}

fn l2_normalized(values: &[f32]) -> Vec<f32> {
    let norm = libm::sqrt(values.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>());
    if norm == 0.0 {
        return values.to_vec();
    }
    values.iter().map(|&v| (f64::from(v) / norm) as f32).collect()
}

impl SearchIndex {
    /// Build from vectors and a label lookup. Every vector needs a label.
    pub fn build<'a, L>(vectors: &[FeatureVector], mut label_of: L, options: SearchOptions) -> Result<Self>
    where
        L: FnMut(&str) -> Option<Label> + 'a,
    {
        let first = vectors.first().ok_or(Error::Empty("archive"))?;
        let dim = first.dim();
        let config = first.config;
        let mut order: Vec<usize> = (0..vectors.len()).collect();
        order.sort_by(|&a, &b| vectors[a].record_id.cmp(&vectors[b].record_id));
        let mut ids = Vec::with_capacity(vectors.len());
        let mut labels = Vec::with_capacity(vectors.len());
        let mut data = Vec::with_capacity(vectors.len() * dim);
        for i in order {
            let v = &vectors[i];
            if v.dim() != dim || v.config != config {
                return Err(Error::Shape(format!(
                    "`{}` is {:?}/{} wide, archive is {:?}/{}",
                    v.record_id,
                    v.config,
                    v.dim(),
                    config,
                    dim
                )));
            }
            if ids.last() == Some(&v.record_id) {
                return Err(Error::DuplicateId(v.record_id.clone()));
            }
            let label = label_of(&v.record_id).ok_or_else(|| Error::MissingRecord(v.record_id.clone()))?;
            ids.push(v.record_id.clone());
            labels.push(label);
            if options.normalize {
                data.extend(l2_normalized(&v.values));
            } else {
                data.extend_from_slice(&v.values);
            }
        }
        Ok(Self {
            dim,
            config,
            ids,
            labels,
            data,
            normalized: options.normalize,
        })
    }

    /// Build with labels taken from a map of record id to label.
    pub fn from_labels(vectors: &[FeatureVector], labels: &BTreeMap<String, Label>, options: SearchOptions) -> Result<Self> {
        Self::build(vectors, |id| labels.get(id).copied(), options)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn config(&self) -> FeatureConfig {
        self.config
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    fn position(&self, id: &str) -> Option<usize> {
        self.ids.binary_search_by(|probe| probe.as_str().cmp(id)).ok()
    }
}

/// One retrieved archive entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub id: String,
    pub distance: f64,
    pub label: Label,
}

/// Ranked retrieval result for one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborSet {
    pub query_id: Option<String>,
    pub k: usize,
    pub hits: Vec<Hit>,
    pub vote_m: usize,
    pub likelihood: f64,
    /// Set when the archive held fewer than `k` candidates; the likelihood
    /// then divides by the number of hits.
    pub truncated: bool,
}

impl NeighborSet {
    fn from_hits(query_id: Option<String>, k: usize, hits: Vec<Hit>) -> Self {
        let vote_m = hits.iter().filter(|h| h.label.is_positive()).count();
        let truncated = hits.len() < k;
        let denom = if truncated { hits.len() } else { k };
        let likelihood = if denom == 0 { 0.0 } else { vote_m as f64 / denom as f64 };
        Self {
            query_id,
            k,
            hits,
            vote_m,
            likelihood,
            truncated,
        }
    }

    /// The first `k` hits as their own neighbor set. Exact because hits are
    /// totally ordered.
    pub fn prefix(&self, k: usize) -> NeighborSet {
        let hits = self.hits[..k.min(self.hits.len())].to_vec();
        NeighborSet::from_hits(self.query_id.clone(), k, hits)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    dist2: f64,
    row: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2.total_cmp(&other.dist2).then(self.row.cmp(&other.row))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Squared Euclidean distance, accumulated sequentially in `f64`.
pub fn squared_distance(a: &[f32], b: &[f32]) -> f64 {
    let mut acc = 0.0f64;
    for (&x, &y) in a.iter().zip(b) {
        let d = f64::from(x) - f64::from(y);
        acc += d * d;
    }
    acc
}

fn top_k_rows(index: &SearchIndex, query: &[f32], rows: core::ops::Range<usize>, skip: Option<usize>, k: usize) -> Vec<Candidate> {
    let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
    for row in rows {
        if Some(row) == skip {
            continue;
        }
        let c = Candidate {
            dist2: squared_distance(query, index.row(row)),
            row,
        };
        if heap.len() < k {
            heap.push(c);
        } else if let Some(worst) = heap.peek() {
            if c < *worst {
                heap.pop();
                heap.push(c);
            }
        }
    }
    heap.into_vec()
}

/// Exact k-NN on one thread. See [`knn_with`].
pub fn knn(index: &SearchIndex, query: &[f32], query_id: Option<&str>, k: usize) -> Result<NeighborSet> {
    knn_with(index, query, query_id, k, &Sequential)
}

/// Exact top-`k` by Euclidean distance, ties broken by ascending id.
///
/// The archive is scanned in blocks of [`SCAN_BLOCK`] rows on `exec`; block
/// winners are merged under the same total order. A query whose id is in
/// the archive is excluded from its own results.
pub fn knn_with<E: Executor>(
    index: &SearchIndex,
    query: &[f32],
    query_id: Option<&str>,
    k: usize,
    exec: &E,
) -> Result<NeighborSet> {
    if index.is_empty() {
        return Err(Error::Empty("archive"));
    }
    if k == 0 {
        return Err(Error::Invalid("k must be at least 1".into()));
    }
    if query.len() != index.dim {
        return Err(Error::Shape(format!(
            "query has {} values, archive rows have {}",
            query.len(),
            index.dim
        )));
    }
    if query.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("query"));
    }
    let normalized;
    let query = if index.normalized {
        normalized = l2_normalized(query);
        normalized.as_slice()
    } else {
        query
    };
    let skip = query_id.and_then(|id| index.position(id));
    let blocks = index.len().div_ceil(SCAN_BLOCK);
    let partial = exec.map(blocks, |b| {
        let start = b * SCAN_BLOCK;
        let end = (start + SCAN_BLOCK).min(index.len());
        top_k_rows(index, query, start..end, skip, k)
    });
    let mut merged: Vec<Candidate> = partial.into_iter().flatten().collect();
    merged.sort_unstable();
    merged.truncate(k);
    let hits = merged
        .into_iter()
        .map(|c| Hit {
            id: index.ids[c.row].clone(),
            distance: libm::sqrt(c.dist2),
            label: index.labels[c.row],
        })
        .collect();
    Ok(NeighborSet::from_hits(query_id.map(String::from), k, hits))
}

/// Positive-vote likelihood `m / k`.
pub fn vote(neighbors: &NeighborSet) -> Result<f64> {
    if neighbors.hits.is_empty() {
        return Err(Error::Empty("neighbor set"));
    }
    Ok(neighbors.likelihood)
}

/// Positive iff `likelihood >= threshold`.
pub fn classify(likelihood: f64, threshold: f64) -> Label {
    Label::from_bool(likelihood >= threshold)
}
