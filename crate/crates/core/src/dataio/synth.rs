//! Synthetic cohorts with planted patient clusters.
//!
//! Each patient draws a cluster, then features from that cluster's
//! distributions, then a treatment, then remission from the cluster-by-
//! treatment probability table. The default profile follows the
//! three reference subgroups qualitatively: cluster A younger with more fatigue,
//! B older and mostly female with milder symptoms, C more agitation,
//! suicidality and genital symptoms with a more diverse race mix.

use serde::{Deserialize, Serialize};

use super::{Dataset, FeatureKind, FeatureSchema, PatientRecord, TreatmentSet, RACE_CATEGORIES};
use crate::error::{Error, Result};
use crate::numerics::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum FeatureDist {
    /// Normal truncated to the schema range.
    Normal {
        mean: f64,
        sd: f64,
    },
    Bernoulli {
        p: f64,
    },
    Categorical {
        probs: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub name: String,
    pub weight: f64,
    pub features: Vec<FeatureDist>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySpec {
    pub name: String,
    pub weight: f64,
    /// Overrides the cluster's race distribution for this study's patients.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub race_probs: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_patients: usize,
    pub seed: u64,
    pub clusters: Vec<ClusterSpec>,
    pub treatment_probs: Vec<f64>,
    /// When set, exact per-treatment counts (shuffled) replace sampling from
    /// `treatment_probs`; they must sum to `n_patients`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub treatment_counts: Option<Vec<usize>>,
    /// `remission_table[cluster][treatment]`.
    pub remission_table: Vec<Vec<f64>>,
    pub studies: Vec<StudySpec>,
}

/// Observed per-cluster remission rates, canonical treatment order.
pub const REFERENCE_REMISSION: [[f64; 8]; 3] = [
    [0.45, 0.34, 0.18, 0.19, 0.40, 0.35, 0.43, 0.42],
    [0.50, 0.36, 0.47, 0.47, 0.59, 0.39, 0.49, 0.62],
    [0.36, 0.34, 0.15, 0.18, 0.49, 0.39, 0.33, 0.34],
];
pub const CLUSTER_SIZES: [usize; 3] = [1742, 2459, 1237];
pub const TREATMENT_COUNTS: [usize; 8] = [2477, 726, 559, 536, 402, 311, 214, 213];
pub const STUDY_SIZES: [(&str, usize); 6] = [
    ("STARD", 2477),
    ("SUND", 1093),
    ("REVAMP", 797),
    ("COMED", 648),
    ("IRLGREY", 372),
    ("EMBARC", 114),
];

fn normalize(counts: &[usize]) -> Vec<f64> {
    let total: usize = counts.iter().sum();
    counts.iter().map(|&c| c as f64 / total as f64).collect()
}

/// Feature distributions for one of the three reference clusters.
///
/// `separation` scales each cluster's offsets from a shared baseline; 1.0 is
/// the default overlap, larger values pull the clusters apart.
fn reference_profile(cluster: usize, separation: f64) -> Vec<FeatureDist> {
    // baseline symptom means on the harmonized 0..3 scale
    const BASE: [f64; 10] = [1.7, 0.8, 1.2, 1.3, 1.0, 1.0, 1.5, 1.8, 1.6, 0.9];
    // offsets: total, suic_plan, guilt, worth, agitation, genital, anhedonia, sadness, fatigue, overall_suic
    const OFFSETS: [[f64; 10]; 3] = [
        [0.3, -0.1, 0.1, 0.1, -0.3, -0.2, 0.3, 0.2, 0.6, -0.1],
        [-0.5, -0.3, -0.2, -0.3, -0.3, -0.3, -0.4, -0.3, -0.3, -0.3],
        [0.3, 0.6, 0.1, 0.1, 0.8, 0.7, 0.1, 0.1, -0.2, 0.6],
    ];
    const BIN_P: [[f64; 6]; 3] = [
        [0.55, 0.60, 0.45, 0.35, 0.45, 0.35],
        [0.35, 0.40, 0.30, 0.20, 0.30, 0.20],
        [0.60, 0.55, 0.55, 0.45, 0.50, 0.40],
    ];
    const AGE: [f64; 3] = [36.0, 51.0, 48.0];
    const FEMALE: [f64; 3] = [0.52, 0.74, 0.50];
    const RACE: [[f64; 4]; 3] = [
        [0.70, 0.17, 0.08, 0.05],
        [0.68, 0.20, 0.07, 0.05],
        [0.40, 0.25, 0.17, 0.18],
    ];
    let s = separation;
    let sd = 0.55 / s.max(1.0).sqrt();
    let mut out = Vec::with_capacity(19);
    for k in 0..10 {
        out.push(FeatureDist::Normal {
            mean: BASE[k] + s * OFFSETS[cluster][k],
            sd,
        });
    }
    for &bin_p in &BIN_P[cluster] {
        let p = 0.4 + s * (bin_p - 0.4);
        out.push(FeatureDist::Bernoulli {
            p: p.clamp(0.02, 0.98),
        });
    }
    out.push(FeatureDist::Normal {
        mean: 45.0 + s * (AGE[cluster] - 45.0),
        sd: 13.0 / s.max(1.0).sqrt(),
    });
    out.push(FeatureDist::Bernoulli {
        p: (0.6 + s * (FEMALE[cluster] - 0.6)).clamp(0.02, 0.98),
    });
    out.push(FeatureDist::Categorical {
        probs: RACE[cluster].to_vec(),
    });
    out
}

impl SynthConfig {
    /// Three clusters sized like the reference cohort with the reference
    /// per-cluster remission table and treatment mix.
    pub fn reference(n_patients: usize, seed: u64) -> Self {
        Self::reference_with_separation(n_patients, seed, 1.0)
    }

    pub fn reference_with_separation(n_patients: usize, seed: u64, separation: f64) -> Self {
        let weights = normalize(&CLUSTER_SIZES);
        let clusters = ["A", "B", "C"]
            .iter()
            .enumerate()
            .map(|(c, name)| ClusterSpec {
                name: name.to_string(),
                weight: weights[c],
                features: reference_profile(c, separation),
            })
            .collect();
        let study_w = normalize(&STUDY_SIZES.map(|(_, n)| n));
        let studies = STUDY_SIZES
            .iter()
            .zip(study_w)
            .map(|((name, _), weight)| StudySpec {
                name: name.to_string(),
                weight,
                race_probs: None,
            })
            .collect();
        Self {
            n_patients,
            seed,
            clusters,
            treatment_probs: normalize(&TREATMENT_COUNTS),
            treatment_counts: None,
            remission_table: REFERENCE_REMISSION.iter().map(|r| r.to_vec()).collect(),
            studies,
        }
    }

    pub fn validate(&self, schema: &FeatureSchema, treatments: &TreatmentSet) -> Result<()> {
        let mut problems = Vec::new();
        let close_to_one = |s: f64| (s - 1.0).abs() < 1e-9;
        let prob_ok = |p: f64| (0.0..=1.0).contains(&p);

        if self.clusters.is_empty() {
            problems.push("at least one cluster is required".to_string());
        }
        let wsum: f64 = self.clusters.iter().map(|c| c.weight).sum();
        if !close_to_one(wsum)
            || self
                .clusters
                .iter()
                .any(|c| c.weight.is_nan() || c.weight < 0.0)
        {
            problems.push(format!(
                "cluster weights must be non-negative and sum to 1 (sum {wsum})"
            ));
        }
        for c in &self.clusters {
            if c.features.len() != schema.len() {
                problems.push(format!(
                    "cluster {}: {} feature distributions for {} features",
                    c.name,
                    c.features.len(),
                    schema.len()
                ));
                continue;
            }
            for (d, desc) in c.features.iter().zip(schema.features()) {
                let ok = match (d, desc.kind) {
                    (FeatureDist::Normal { mean, sd }, FeatureKind::Continuous) => {
                        mean.is_finite() && *sd > 0.0 && sd.is_finite()
                    }
                    (FeatureDist::Bernoulli { p }, FeatureKind::Binary) => prob_ok(*p),
                    (FeatureDist::Categorical { probs }, FeatureKind::Categorical) => {
                        let levels = (desc.range.1 - desc.range.0) as usize + 1;
                        probs.len() == levels
                            && probs.iter().all(|&p| prob_ok(p))
                            && close_to_one(probs.iter().sum())
                    }
                    _ => false,
                };
                if !ok {
                    problems.push(format!(
                        "cluster {}: invalid distribution for {}",
                        c.name, desc.name
                    ));
                }
            }
        }
        if self.treatment_probs.len() != treatments.len()
            || !self.treatment_probs.iter().all(|&p| prob_ok(p))
            || !close_to_one(self.treatment_probs.iter().sum())
        {
            problems.push(format!(
                "treatment_probs must be {} probabilities summing to 1",
                treatments.len()
            ));
        }
        if let Some(counts) = &self.treatment_counts {
            if counts.len() != treatments.len() || counts.iter().sum::<usize>() != self.n_patients {
                problems.push(
                    "treatment_counts must cover every treatment and sum to n_patients".into(),
                );
            }
        }
        if self.remission_table.len() != self.clusters.len()
            || self
                .remission_table
                .iter()
                .any(|r| r.len() != treatments.len())
        {
            problems.push(format!(
                "remission_table must be {} x {}",
                self.clusters.len(),
                treatments.len()
            ));
        } else if self.remission_table.iter().flatten().any(|&p| !prob_ok(p)) {
            problems.push("remission probabilities must lie in [0, 1]".into());
        }
        if self.studies.is_empty() || !close_to_one(self.studies.iter().map(|s| s.weight).sum()) {
            problems.push("study weights must sum to 1".into());
        }
        for s in &self.studies {
            if let Some(p) = &s.race_probs {
                if p.len() != RACE_CATEGORIES.len() || !close_to_one(p.iter().sum()) {
                    problems.push(format!(
                        "study {}: race_probs must be 4 probabilities",
                        s.name
                    ));
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }
}

fn truncated_normal(rng: &mut RngStream, mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    for _ in 0..1000 {
        let v = mean + sd * rng.normal();
        if (lo..=hi).contains(&v) {
            return v;
        }
    }
    mean.clamp(lo, hi)
}

/// Draws a cohort and the planted cluster of every patient.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<(Dataset, Vec<usize>)> {
    let schema = FeatureSchema::standard();
    let treatments = TreatmentSet::standard();
    generate_with(cfg, &schema, &treatments)
}

pub fn generate_with(
    cfg: &SynthConfig,
    schema: &FeatureSchema,
    treatments: &TreatmentSet,
) -> Result<(Dataset, Vec<usize>)> {
    cfg.validate(schema, treatments)?;
    let mut rng = RngStream::new(cfg.seed);
    let weights: Vec<f64> = cfg.clusters.iter().map(|c| c.weight).collect();
    let study_weights: Vec<f64> = cfg.studies.iter().map(|s| s.weight).collect();
    let race_idx = schema
        .features()
        .iter()
        .position(|f| f.kind == FeatureKind::Categorical);

    let fixed_treatments = cfg.treatment_counts.as_ref().map(|counts| {
        let mut list: Vec<usize> = counts
            .iter()
            .enumerate()
            .flat_map(|(t, &c)| std::iter::repeat_n(t, c))
            .collect();
        rng.shuffle(&mut list);
        list
    });

    let width = cfg.n_patients.max(1).to_string().len().max(5);
    let mut records = Vec::with_capacity(cfg.n_patients);
    let mut planted = Vec::with_capacity(cfg.n_patients);
    for i in 0..cfg.n_patients {
        let c = rng.categorical(&weights);
        let study = &cfg.studies[rng.categorical(&study_weights)];
        let mut features = Vec::with_capacity(schema.len());
        for (f, (dist, desc)) in cfg.clusters[c]
            .features
            .iter()
            .zip(schema.features())
            .enumerate()
        {
            let v = match dist {
                FeatureDist::Normal { mean, sd } => {
                    truncated_normal(&mut rng, *mean, *sd, desc.range.0, desc.range.1)
                }
                FeatureDist::Bernoulli { p } => f64::from(u8::from(rng.bernoulli(*p))),
                FeatureDist::Categorical { probs } => {
                    let probs = match (&study.race_probs, race_idx) {
                        (Some(over), Some(r)) if r == f => over,
                        _ => probs,
                    };
                    desc.range.0 + rng.categorical(probs) as f64
                }
            };
            features.push(Some(v));
        }
        let t = match &fixed_treatments {
            Some(list) => list[i],
            None => rng.categorical(&cfg.treatment_probs),
        };
        let remission = rng.bernoulli(cfg.remission_table[c][t]);
        records.push(PatientRecord {
            patient_id: format!("P{:0width$}", i + 1),
            study: study.name.clone(),
            treatment: t,
            remission,
            features,
        });
        planted.push(c);
    }
    Ok((
        Dataset {
            schema: schema.clone(),
            treatments: treatments.clone(),
            records,
        },
        planted,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::write_csv;

    #[test]
    fn reference_config_is_valid() {
        let cfg = SynthConfig::reference(100, 1);
        cfg.validate(&FeatureSchema::standard(), &TreatmentSet::standard())
            .unwrap();
        let json = serde_json::to_string(&cfg).unwrap();
        let back: SynthConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn single_cluster_certain_remission() {
        let mut cfg = SynthConfig::reference(300, 3);
        cfg.clusters.truncate(1);
        cfg.clusters[0].weight = 1.0;
        cfg.remission_table = vec![vec![1.0; 8]];
        let (ds, planted) = generate_synthetic(&cfg).unwrap();
        assert!(ds.records.iter().all(|r| r.remission));
        assert!(planted.iter().all(|&c| c == 0));
        ds.validate().unwrap();
    }

    #[test]
    fn byte_identical_under_seed() {
        let cfg = SynthConfig::reference(500, 42);
        let render = || {
            let (ds, _) = generate_synthetic(&cfg).unwrap();
            let mut buf = Vec::new();
            write_csv(&ds, &mut buf).unwrap();
            buf
        };
        assert_eq!(render(), render());
    }

    #[test]
    fn exact_treatment_counts() {
        let mut cfg = SynthConfig::reference(5438, 5);
        cfg.treatment_counts = Some(TREATMENT_COUNTS.to_vec());
        let (ds, _) = generate_synthetic(&cfg).unwrap();
        assert_eq!(ds.treatment_counts(), TREATMENT_COUNTS.to_vec());
    }

    #[test]
    fn validation_lists_violations() {
        let mut cfg = SynthConfig::reference(10, 0);
        cfg.clusters[0].weight = 0.9;
        cfg.remission_table[1][2] = 1.5;
        cfg.treatment_probs.pop();
        match generate_synthetic(&cfg) {
            Err(Error::Validation(v)) => assert_eq!(v.len(), 3, "{v:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn study_race_override() {
        let mut cfg = SynthConfig::reference(400, 8);
        cfg.studies = vec![StudySpec {
            name: "ONLY".into(),
            weight: 1.0,
            race_probs: Some(vec![0.0, 1.0, 0.0, 0.0]),
        }];
        let (ds, _) = generate_synthetic(&cfg).unwrap();
        assert!(ds.records.iter().all(|r| r.features[18] == Some(1.0)));
    }
}
