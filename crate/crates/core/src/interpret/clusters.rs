use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataio::{Dataset, FeatureKind};
use crate::error::{Error, Result};
use crate::model::DpnnModel;

/// Cells with fewer patients than this are flagged low-confidence.
pub const DEFAULT_MIN_CELL: usize = 25;

/// Nearest prototype (Euclidean, in latent space) for every patient; ties
/// go to the lower prototype index.
pub fn assign_clusters(model: &DpnnModel, dataset: &Dataset) -> Result<Vec<usize>> {
    dataset
        .records
        .iter()
        .map(|r| {
            let z = model.encode_raw(&r.values()?)?;
            let d = model.proto_distances(&z)?;
            Ok(argmin(&d))
        })
        .collect()
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreatmentCell {
    pub treatment: String,
    /// Canonical treatment index.
    pub index: usize,
    pub n: usize,
    pub remitted: usize,
    /// Absent when the cell is empty.
    pub rate: Option<f64>,
    pub low_confidence: bool,
}

impl TreatmentCell {
    pub fn new(
        treatment: impl Into<String>,
        index: usize,
        n: usize,
        remitted: usize,
        min_cell: usize,
    ) -> Self {
        Self {
            treatment: treatment.into(),
            index,
            n,
            remitted,
            rate: (n > 0).then(|| remitted as f64 / n as f64),
            low_confidence: n < min_cell,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSummary {
    pub feature: String,
    pub mean: Option<f64>,
    /// Rounded value -> share of cluster members.
    pub histogram: BTreeMap<i64, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterProfile {
    pub cluster: usize,
    pub members: Vec<String>,
    pub size: usize,
    pub remission_rate: Option<f64>,
    pub treatments: Vec<TreatmentCell>,
    pub features: Vec<FeatureSummary>,
}

fn check_labels(dataset: &Dataset, clusters: &[usize], n_clusters: usize) -> Result<()> {
    if clusters.len() != dataset.len() {
        return Err(Error::Shape(format!(
            "{} cluster labels for {} patients",
            clusters.len(),
            dataset.len()
        )));
    }
    if let Some(c) = clusters.iter().find(|&&c| c >= n_clusters) {
        return Err(Error::Domain(format!(
            "cluster label {c} outside 0..{n_clusters}"
        )));
    }
    Ok(())
}

/// Observed remission per (cluster, treatment) plus per-feature means and
/// histograms, one profile per cluster id in `0..n_clusters`.
pub fn cluster_treatment_table(
    dataset: &Dataset,
    clusters: &[usize],
    n_clusters: usize,
    min_cell: usize,
) -> Result<Vec<ClusterProfile>> {
    check_labels(dataset, clusters, n_clusters)?;
    let histograms = feature_histograms(dataset, clusters, n_clusters)?;
    let t = dataset.treatments.len();
    let mut out = Vec::with_capacity(n_clusters);
    for c in 0..n_clusters {
        let members: Vec<usize> = (0..dataset.len()).filter(|&i| clusters[i] == c).collect();
        let mut n = vec![0usize; t];
        let mut remitted = vec![0usize; t];
        for &i in &members {
            let r = &dataset.records[i];
            n[r.treatment] += 1;
            remitted[r.treatment] += usize::from(r.remission);
        }
        let total_remitted: usize = remitted.iter().sum();
        let treatments = (0..t)
            .map(|k| TreatmentCell::new(dataset.treatments.name(k), k, n[k], remitted[k], min_cell))
            .collect();
        let features = dataset
            .schema
            .features()
            .iter()
            .enumerate()
            .map(|(f, desc)| {
                let vals: Vec<f64> = members
                    .iter()
                    .filter_map(|&i| dataset.records[i].features[f])
                    .collect();
                FeatureSummary {
                    feature: desc.name.clone(),
                    mean: (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64),
                    histogram: histograms[f].per_cluster[c].clone(),
                }
            })
            .collect();
        out.push(ClusterProfile {
            cluster: c,
            members: members
                .iter()
                .map(|&i| dataset.records[i].patient_id.clone())
                .collect(),
            size: members.len(),
            remission_rate: (!members.is_empty())
                .then(|| total_remitted as f64 / members.len() as f64),
            treatments,
            features,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedTreatment {
    pub treatment: String,
    pub index: usize,
    pub rate: f64,
    pub n: usize,
    pub low_confidence: bool,
}

/// Rated treatments by descending remission rate; equal rates keep canonical
/// treatment order.
pub fn rank_treatments(profile: &ClusterProfile) -> Result<Vec<RankedTreatment>> {
    let mut cells: Vec<&TreatmentCell> = profile
        .treatments
        .iter()
        .filter(|c| c.rate.is_some())
        .collect();
    if cells.is_empty() {
        return Err(Error::Domain(format!(
            "cluster {} has no rated treatments",
            profile.cluster
        )));
    }
    cells.sort_by(|a, b| {
        b.rate
            .partial_cmp(&a.rate)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.index.cmp(&b.index))
    });
    Ok(cells
        .into_iter()
        .map(|c| RankedTreatment {
            treatment: c.treatment.clone(),
            index: c.index,
            rate: c.rate.expect("filtered"),
            n: c.n,
            low_confidence: c.low_confidence,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureHistogram {
    pub feature: String,
    pub kind: FeatureKind,
    /// Indexed by cluster id.
    pub per_cluster: Vec<BTreeMap<i64, f64>>,
}

/// Values rounded half away from zero, counted per cluster and normalized by
/// the number of observed values in the cluster.
pub fn feature_histograms(
    dataset: &Dataset,
    clusters: &[usize],
    n_clusters: usize,
) -> Result<Vec<FeatureHistogram>> {
    check_labels(dataset, clusters, n_clusters)?;
    Ok(dataset
        .schema
        .features()
        .iter()
        .enumerate()
        .map(|(f, desc)| {
            let mut counts = vec![BTreeMap::<i64, usize>::new(); n_clusters];
            let mut totals = vec![0usize; n_clusters];
            for (r, &c) in dataset.records.iter().zip(clusters) {
                if let Some(v) = r.features[f] {
                    *counts[c].entry(v.round() as i64).or_default() += 1;
                    totals[c] += 1;
                }
            }
            let per_cluster = counts
                .into_iter()
                .zip(&totals)
                .map(|(m, &tot)| {
                    m.into_iter()
                        .map(|(k, n)| (k, n as f64 / tot as f64))
                        .collect()
                })
                .collect();
            FeatureHistogram {
                feature: desc.name.clone(),
                kind: desc.kind,
                per_cluster,
            }
        })
        .collect())
}

/// `1 - minmax(d)`; all ones when every distance is equal.
fn inverted_minmax(d: &[f64]) -> Vec<f64> {
    let lo = d.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo <= 0.0 {
        return vec![1.0; d.len()];
    }
    d.iter().map(|v| 1.0 - (v - lo) / (hi - lo)).collect()
}

/// For each feature, similarity of the patient's value to each cluster's
/// mean: absolute gaps min-max normalized across clusters and inverted.
/// Result is indexed `[feature][cluster]`.
pub fn patient_feature_similarity(x: &[f64], profiles: &[ClusterProfile]) -> Result<Vec<Vec<f64>>> {
    if profiles.len() < 2 {
        return Err(Error::Domain(
            "feature similarity needs at least two clusters".into(),
        ));
    }
    let p = x.len();
    let mut means = Vec::with_capacity(profiles.len());
    for prof in profiles {
        if prof.features.len() != p {
            return Err(Error::Shape(format!(
                "cluster {} summarizes {} features, patient has {p}",
                prof.cluster,
                prof.features.len()
            )));
        }
        let m: Option<Vec<f64>> = prof.features.iter().map(|f| f.mean).collect();
        means.push(
            m.ok_or_else(|| Error::Domain(format!("cluster {} has no members", prof.cluster)))?,
        );
    }
    Ok((0..p)
        .map(|f| {
            let gaps: Vec<f64> = means.iter().map(|m| (x[f] - m[f]).abs()).collect();
            inverted_minmax(&gaps)
        })
        .collect())
}

/// Similarity of a patient (raw features) to each prototype in latent space.
pub fn patient_latent_similarity(model: &DpnnModel, raw: &[f64]) -> Result<Vec<f64>> {
    let z = model.encode_raw(raw)?;
    let d: Vec<f64> = model
        .proto_distances(&z)?
        .into_iter()
        .map(f64::sqrt)
        .collect();
    Ok(inverted_minmax(&d))
}

/// Chance-corrected agreement between two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "labelings of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    let mut table: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut rows: BTreeMap<usize, u64> = BTreeMap::new();
    let mut cols: BTreeMap<usize, u64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let pairs = |n: u64| (n * n.saturating_sub(1) / 2) as f64;
    let index: f64 = table.values().map(|&n| pairs(n)).sum();
    let sum_a: f64 = rows.values().map(|&n| pairs(n)).sum();
    let sum_b: f64 = cols.values().map(|&n| pairs(n)).sum();
    let total = pairs(a.len() as u64);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sum_a * sum_b / total;
    let max = 0.5 * (sum_a + sum_b);
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}
