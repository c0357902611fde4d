use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FEATURE_COUNT: usize = 19;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Continuous,
    Binary,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub name: String,
    pub kind: FeatureKind,
    /// Inclusive `[lo, hi]`. Categorical features hold integer codes in range.
    pub range: (f64, f64),
}

impl FeatureDescriptor {
    fn new(name: &str, kind: FeatureKind, lo: f64, hi: f64) -> Self {
        Self {
            name: name.to_string(),
            kind,
            range: (lo, hi),
        }
    }

    pub fn accepts(&self, v: f64) -> bool {
        if !v.is_finite() || v < self.range.0 || v > self.range.1 {
            return false;
        }
        match self.kind {
            FeatureKind::Continuous => true,
            FeatureKind::Binary => v == 0.0 || v == 1.0,
            FeatureKind::Categorical => v.fract() == 0.0,
        }
    }
}

/// Ordered harmonized feature set shared by every record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    features: Vec<FeatureDescriptor>,
}

/// Race/ethnicity codes used by the categorical feature.
pub const RACE_CATEGORIES: [&str; 4] = ["caucasian", "asian", "african_descent", "other"];

impl FeatureSchema {
    /// The 19 harmonized features: 16 symptom items followed by age, sex and race.
    pub fn standard() -> Self {
        use FeatureKind::*;
        let sym = |n: &str| FeatureDescriptor::new(n, Continuous, 0.0, 3.0);
        let bin = |n: &str| FeatureDescriptor::new(n, Binary, 0.0, 1.0);
        Self {
            features: vec![
                sym("total_severity"),
                sym("suicidal_ideation_planning"),
                sym("guilt"),
                sym("worthlessness"),
                sym("psychomotor_agitation"),
                sym("genital_symptoms"),
                sym("anhedonia"),
                sym("sadness"),
                sym("fatigue"),
                sym("overall_suicidal_ideation"),
                bin("guilt_bin"),
                bin("anhedonia_bin"),
                bin("negative_thoughts_v1"),
                bin("negative_thoughts_v2"),
                bin("worthlessness_bin"),
                bin("excessive_guilt_bin"),
                FeatureDescriptor::new("age", Continuous, 18.0, 93.0),
                bin("sex"),
                FeatureDescriptor::new("race_ethnicity", Categorical, 0.0, 3.0),
            ],
        }
    }

    pub fn new(features: Vec<FeatureDescriptor>) -> Result<Self> {
        let schema = Self { features };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.features.len() != FEATURE_COUNT {
            problems.push(format!(
                "expected {FEATURE_COUNT} features, found {}",
                self.features.len()
            ));
        }
        let mut seen = BTreeMap::new();
        for (i, f) in self.features.iter().enumerate() {
            if let Some(prev) = seen.insert(f.name.as_str(), i) {
                problems.push(format!("duplicate feature `{}` at {prev} and {i}", f.name));
            }
            if f.range.0.is_nan() || f.range.1.is_nan() || f.range.0 >= f.range.1 {
                problems.push(format!("feature `{}` has an empty range", f.name));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &[FeatureDescriptor] {
        &self.features
    }

    pub fn get(&self, i: usize) -> &FeatureDescriptor {
        &self.features[i]
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.name.as_str())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }
}

pub const STANDARD_TREATMENTS: [&str; 8] = [
    "citalopram",
    "sertraline",
    "mirtazapine",
    "mirtazapine+sertraline",
    "venlafaxine",
    "escitalopram",
    "mirtazapine+venlafaxine",
    "bupropion+escitalopram",
];

/// Ordered treatment ids. The order is the canonical tie-break order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TreatmentSet {
    names: Vec<String>,
}

impl TreatmentSet {
    pub fn standard() -> Self {
        Self {
            names: STANDARD_TREATMENTS.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(Error::Validation(vec!["treatment set is empty".into()]));
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::Validation(vec![format!(
                    "duplicate treatment `{n}`"
                )]));
            }
        }
        Ok(Self { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, t: usize) -> &str {
        &self.names[t]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub patient_id: String,
    pub study: String,
    /// Index into the dataset's [`TreatmentSet`].
    pub treatment: usize,
    pub remission: bool,
    pub features: Vec<Option<f64>>,
}

impl PatientRecord {
    pub fn is_complete(&self) -> bool {
        self.features.iter().all(Option::is_some)
    }

    /// Feature values, failing on the first missing entry.
    pub fn values(&self) -> Result<Vec<f64>> {
        self.features
            .iter()
            .enumerate()
            .map(|(i, v)| {
                v.ok_or_else(|| {
                    Error::Domain(format!(
                        "patient `{}` is missing feature {i}",
                        self.patient_id
                    ))
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema: FeatureSchema,
    pub treatments: TreatmentSet,
    pub records: Vec<PatientRecord>,
}

impl Dataset {
    pub fn new(
        schema: FeatureSchema,
        treatments: TreatmentSet,
        records: Vec<PatientRecord>,
    ) -> Result<Self> {
        let ds = Self {
            schema,
            treatments,
            records,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        for r in &self.records {
            if r.treatment >= self.treatments.len() {
                problems.push(format!(
                    "patient `{}`: treatment index out of range",
                    r.patient_id
                ));
            }
            if r.features.len() != self.schema.len() {
                problems.push(format!(
                    "patient `{}`: {} features, schema has {}",
                    r.patient_id,
                    r.features.len(),
                    self.schema.len()
                ));
                continue;
            }
            for (f, v) in self.schema.features().iter().zip(&r.features) {
                if let Some(v) = v {
                    if !f.accepts(*v) {
                        problems.push(format!(
                            "patient `{}`: {} = {v} outside {:?}",
                            r.patient_id, f.name, f.range
                        ));
                    }
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn labels(&self) -> Vec<bool> {
        self.records.iter().map(|r| r.remission).collect()
    }

    pub fn treatments_received(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.treatment).collect()
    }

    /// Feature rows; every record must be complete.
    pub fn feature_rows(&self) -> Result<Vec<Vec<f64>>> {
        self.records.iter().map(PatientRecord::values).collect()
    }

    pub fn column(&self, feature: usize) -> Vec<Option<f64>> {
        self.records.iter().map(|r| r.features[feature]).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            treatments: self.treatments.clone(),
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
        }
    }

    pub fn filter(&self, mut keep: impl FnMut(&PatientRecord) -> bool) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            treatments: self.treatments.clone(),
            records: self.records.iter().filter(|r| keep(r)).cloned().collect(),
        }
    }

    /// Study names in order of first appearance.
    pub fn studies(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.records {
            if !out.contains(&r.study) {
                out.push(r.study.clone());
            }
        }
        out
    }

    pub fn positive_rate(&self) -> f64 {
        if self.records.is_empty() {
            return f64::NAN;
        }
        self.records.iter().filter(|r| r.remission).count() as f64 / self.len() as f64
    }

    pub fn treatment_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.treatments.len()];
        for r in &self.records {
            counts[r.treatment] += 1;
        }
        counts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_schema_is_valid() {
        let s = FeatureSchema::standard();
        s.validate().unwrap();
        assert_eq!(s.len(), 19);
        assert_eq!(s.index_of("fatigue"), Some(8));
        assert_eq!(s.get(16).range, (18.0, 93.0));
        for f in s
            .features()
            .iter()
            .filter(|f| f.kind == FeatureKind::Continuous && f.name != "age")
        {
            assert!(f.range.0 >= 0.0 && f.range.1 <= 3.0);
        }
    }

    #[test]
    fn schema_rejects_duplicates() {
        let mut f = FeatureSchema::standard().features().to_vec();
        f[1].name = "total_severity".into();
        assert!(matches!(FeatureSchema::new(f), Err(Error::Validation(_))));
    }

    #[test]
    fn treatment_order() {
        let t = TreatmentSet::standard();
        assert_eq!(t.len(), 8);
        assert_eq!(t.index_of("venlafaxine"), Some(4));
        assert_eq!(t.name(7), "bupropion+escitalopram");
        assert!(TreatmentSet::new(["a", "a"]).is_err());
    }

    #[test]
    fn descriptor_acceptance() {
        let s = FeatureSchema::standard();
        assert!(s.get(0).accepts(2.5));
        assert!(!s.get(0).accepts(3.5));
        assert!(!s.get(10).accepts(0.5));
        assert!(s.get(18).accepts(2.0));
        assert!(!s.get(18).accepts(1.5));
    }
}
