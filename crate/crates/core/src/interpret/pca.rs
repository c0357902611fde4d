use serde::{Deserialize, Serialize};

use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::numerics::{symmetric_eigen, DenseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PcaOptions {
    pub standardize: bool,
    pub include_race: bool,
    pub include_remission: bool,
}

impl Default for PcaOptions {
    fn default() -> Self {
        Self {
            standardize: true,
            include_race: false,
            include_remission: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaResult {
    pub variables: Vec<String>,
    /// `loadings[c][v]`: weight of variable `v` in component `c`. Each
    /// component's largest-magnitude entry is positive.
    pub loadings: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
    pub cumulative_variance: Vec<f64>,
    /// Centered (and scaled) rows projected on the first two components.
    pub projections: Vec<[f64; 2]>,
    pub patient_ids: Vec<String>,
    pub studies: Vec<String>,
}

/// Principal components of the covariance (or correlation, when
/// `standardize`) matrix of `rows`.
pub fn pca(rows: &[Vec<f64>], variables: &[String], standardize: bool) -> Result<PcaResult> {
    let p = variables.len();
    if p < 2 {
        return Err(Error::Domain("PCA needs at least two variables".into()));
    }
    if rows.len() < 3 {
        return Err(Error::Domain("PCA needs at least three records".into()));
    }
    if rows.iter().any(|r| r.len() != p) {
        return Err(Error::Shape(format!("every row must have {p} values")));
    }
    let n = rows.len() as f64;
    let mean: Vec<f64> = (0..p)
        .map(|v| rows.iter().map(|r| r[v]).sum::<f64>() / n)
        .collect();
    let mut scale = vec![1.0; p];
    if standardize {
        for v in 0..p {
            let var = rows.iter().map(|r| (r[v] - mean[v]).powi(2)).sum::<f64>() / (n - 1.0);
            if var.is_nan() || var <= 1e-24 {
                return Err(Error::Domain(format!(
                    "variable `{}` has zero variance",
                    variables[v]
                )));
            }
            scale[v] = var.sqrt();
        }
    }
    let centered: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| (0..p).map(|v| (r[v] - mean[v]) / scale[v]).collect())
        .collect();
    let mut cov = DenseMatrix::zeros(p, p);
    for a in 0..p {
        for b in a..p {
            let c = centered.iter().map(|r| r[a] * r[b]).sum::<f64>() / (n - 1.0);
            cov[(a, b)] = c;
            cov[(b, a)] = c;
        }
    }
    let eig = symmetric_eigen(&cov)?;
    let loadings: Vec<Vec<f64>> = (0..p)
        .map(|c| {
            let mut v = eig.vector(c);
            let mut lead = 0;
            for (i, x) in v.iter().enumerate() {
                if x.abs() > v[lead].abs() {
                    lead = i;
                }
            }
            if v[lead] < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            v
        })
        .collect();
    let eigenvalues: Vec<f64> = eig.values.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = eigenvalues.iter().sum();
    let explained_variance_ratio: Vec<f64> = if total > 0.0 {
        eigenvalues.iter().map(|v| v / total).collect()
    } else {
        vec![1.0 / p as f64; p]
    };
    let cumulative_variance = explained_variance_ratio
        .iter()
        .scan(0.0, |acc, r| {
            *acc += r;
            Some(*acc)
        })
        .collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let projections = centered
        .iter()
        .map(|r| [dot(r, &loadings[0]), dot(r, &loadings[1])])
        .collect();
    Ok(PcaResult {
        variables: variables.to_vec(),
        loadings,
        eigenvalues,
        explained_variance_ratio,
        cumulative_variance,
        projections,
        patient_ids: vec![],
        studies: vec![],
    })
}

/// PCA over the dataset's features (race optional) and, optionally, the
/// remission outcome, with projections tagged by study.
pub fn pca_dataset(dataset: &Dataset, opts: &PcaOptions) -> Result<PcaResult> {
    let race = dataset.schema.index_of("race_ethnicity");
    let cols: Vec<usize> = (0..dataset.schema.len())
        .filter(|&f| opts.include_race || Some(f) != race)
        .collect();
    let mut variables: Vec<String> = cols
        .iter()
        .map(|&f| dataset.schema.features()[f].name.clone())
        .collect();
    if opts.include_remission {
        variables.push("remission".to_string());
    }
    let rows: Vec<Vec<f64>> = dataset
        .records
        .iter()
        .map(|r| {
            let vals = r.values()?;
            let mut row: Vec<f64> = cols.iter().map(|&f| vals[f]).collect();
            if opts.include_remission {
                row.push(if r.remission { 1.0 } else { 0.0 });
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let mut out = pca(&rows, &variables, opts.standardize)?;
    out.patient_ids = dataset
        .records
        .iter()
        .map(|r| r.patient_id.clone())
        .collect();
    out.studies = dataset.records.iter().map(|r| r.study.clone()).collect();
    Ok(out)
}
