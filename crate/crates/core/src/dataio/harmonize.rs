//! Primitives for putting features from different questionnaires on a
//! common scale: thresholding, equipercentile equating, affine rescaling and
//! single imputation.

use serde::{Deserialize, Serialize};

use super::{Dataset, FeatureKind};
use crate::error::{Error, Result};

/// `v >= threshold` maps to 1, everything else to 0. Missing stays missing.
pub fn binarize(values: &[Option<f64>], threshold: f64) -> Vec<Option<f64>> {
    values
        .iter()
        .map(|v| v.map(|x| if x >= threshold { 1.0 } else { 0.0 }))
        .collect()
}

/// Threshold among the observed values whose binarized positive rate is
/// closest to `target_rate`. Ties go to the lower threshold.
pub fn rate_matching_threshold(values: &[Option<f64>], target_rate: f64) -> Result<f64> {
    let mut observed: Vec<f64> = values.iter().flatten().copied().collect();
    if observed.is_empty() {
        return Err(Error::Domain("no observed values to threshold".into()));
    }
    observed.sort_by(f64::total_cmp);
    let n = observed.len() as f64;
    let mut best = (f64::INFINITY, observed[0]);
    let mut i = 0;
    while i < observed.len() {
        let th = observed[i];
        let rate = (observed.len() - i) as f64 / n;
        let gap = (rate - target_rate).abs();
        if gap < best.0 {
            best = (gap, th);
        }
        while i < observed.len() && observed[i] == th {
            i += 1;
        }
    }
    Ok(best.1)
}

/// Equipercentile equating from a source score distribution onto a target one.
///
/// Both empirical CDFs use plotting positions `(i - 0.5) / n` with linear
/// interpolation between order statistics; tied source values share the mean
/// of their plotting positions so the map stays monotone.
#[derive(Debug, Clone)]
pub struct Equipercentile {
    source_values: Vec<f64>,
    source_probs: Vec<f64>,
    target_sorted: Vec<f64>,
    target_probs: Vec<f64>,
}

fn plotting_positions(n: usize) -> Vec<f64> {
    (1..=n).map(|i| (i as f64 - 0.5) / n as f64).collect()
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    // xs sorted, non-decreasing; caller clamps x to [xs[0], xs[last]]
    let hi = xs.partition_point(|&v| v < x);
    if hi == 0 {
        return ys[0];
    }
    if hi == xs.len() {
        return ys[xs.len() - 1];
    }
    let lo = hi - 1;
    if xs[hi] == x {
        return ys[hi];
    }
    let w = (x - xs[lo]) / (xs[hi] - xs[lo]);
    ys[lo] + w * (ys[hi] - ys[lo])
}

impl Equipercentile {
    pub fn fit(source: &[f64], target: &[f64]) -> Result<Self> {
        if source.is_empty() || target.is_empty() {
            return Err(Error::Domain("equating needs nonempty samples".into()));
        }
        if source.iter().chain(target).any(|v| !v.is_finite()) {
            return Err(Error::Domain("equating samples must be finite".into()));
        }
        let mut s = source.to_vec();
        s.sort_by(f64::total_cmp);
        let sp = plotting_positions(s.len());
        let mut source_values = Vec::new();
        let mut source_probs = Vec::new();
        let mut i = 0;
        while i < s.len() {
            let j = s[i..].partition_point(|&v| v == s[i]) + i;
            source_values.push(s[i]);
            source_probs.push(sp[i..j].iter().sum::<f64>() / (j - i) as f64);
            i = j;
        }
        let mut target_sorted = target.to_vec();
        target_sorted.sort_by(f64::total_cmp);
        let target_probs = plotting_positions(target_sorted.len());
        Ok(Self {
            source_values,
            source_probs,
            target_sorted,
            target_probs,
        })
    }

    /// Empirical source CDF; 0 below the sample and 1 above it.
    pub fn source_cdf(&self, x: f64) -> f64 {
        let first = self.source_values[0];
        let last = *self.source_values.last().unwrap();
        if x < first {
            0.0
        } else if x > last {
            1.0
        } else {
            interpolate(&self.source_values, &self.source_probs, x)
        }
    }

    /// Interpolated inverse of the target CDF, clamped to the target range.
    pub fn target_quantile(&self, p: f64) -> f64 {
        let lo = self.target_probs[0];
        let hi = *self.target_probs.last().unwrap();
        interpolate(&self.target_probs, &self.target_sorted, p.clamp(lo, hi))
    }

    pub fn map(&self, x: f64) -> f64 {
        self.target_quantile(self.source_cdf(x))
    }
}

pub fn equipercentile_map(source: &[f64], target: &[f64], x: f64) -> Result<f64> {
    Ok(Equipercentile::fit(source, target)?.map(x))
}

/// Affine map sending `src` endpoints onto `dst` endpoints.
pub fn rescale(values: &[f64], src: (f64, f64), dst: (f64, f64)) -> Result<Vec<f64>> {
    if src.0 == src.1 || !src.0.is_finite() || !src.1.is_finite() {
        return Err(Error::DegenerateRange {
            lo: src.0,
            hi: src.1,
        });
    }
    let slope = (dst.1 - dst.0) / (src.1 - src.0);
    Ok(values
        .iter()
        .map(|&v| dst.0 + (v - src.0) * slope)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImputeStrategy {
    /// Mean for continuous features, mode for binary and categorical ones.
    #[default]
    ByKind,
    Mean,
    Mode,
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Most frequent value; ties go to the smallest.
fn mode(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let (mut best, mut best_count) = (v[0], 0);
    let mut i = 0;
    while i < v.len() {
        let j = v[i..].partition_point(|&x| x == v[i]) + i;
        if j - i > best_count {
            best = v[i];
            best_count = j - i;
        }
        i = j;
    }
    best
}

/// Per-feature fill values learned from observed data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Imputer {
    pub fills: Vec<f64>,
}

impl Imputer {
    pub fn fit(ds: &Dataset, strategy: ImputeStrategy) -> Result<Self> {
        let mut fills = Vec::with_capacity(ds.schema.len());
        for (f, desc) in ds.schema.features().iter().enumerate() {
            let observed: Vec<f64> = ds.records.iter().filter_map(|r| r.features[f]).collect();
            if observed.is_empty() {
                return Err(Error::AllMissing(desc.name.clone()));
            }
            let use_mean = match strategy {
                ImputeStrategy::Mean => true,
                ImputeStrategy::Mode => false,
                ImputeStrategy::ByKind => desc.kind == FeatureKind::Continuous,
            };
            fills.push(if use_mean {
                mean(&observed)
            } else {
                mode(&observed)
            });
        }
        Ok(Self { fills })
    }

    pub fn apply(&self, ds: &Dataset) -> Dataset {
        let mut out = ds.clone();
        for r in &mut out.records {
            for (v, &fill) in r.features.iter_mut().zip(&self.fills) {
                if v.is_none() {
                    *v = Some(fill);
                }
            }
        }
        out
    }
}

pub fn impute(ds: &Dataset, strategy: ImputeStrategy) -> Result<Dataset> {
    Ok(Imputer::fit(ds, strategy)?.apply(ds))
}
