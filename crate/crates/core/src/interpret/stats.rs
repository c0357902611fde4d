use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{chi_square_sf, ln_gamma, normal_sf};

/// Pooled midranks (1-based) with the tie sizes encountered.
struct Ranked {
    /// Per group, per value.
    ranks: Vec<Vec<f64>>,
    n: usize,
    /// `sum(t^3 - t)` over tie groups.
    tie_sum: f64,
}

fn rank_groups(groups: &[Vec<f64>]) -> Result<Ranked> {
    if groups.len() < 2 {
        return Err(Error::Domain("need at least two groups".into()));
    }
    if groups.iter().any(Vec::is_empty) {
        return Err(Error::Domain("every group must be nonempty".into()));
    }
    let mut pooled: Vec<(f64, usize, usize)> = Vec::new();
    for (g, vals) in groups.iter().enumerate() {
        for (k, &v) in vals.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    name: format!("group {g}"),
                });
            }
            pooled.push((v, g, k));
        }
    }
    let n = pooled.len();
    if n < 3 {
        return Err(Error::Domain("need at least three observations".into()));
    }
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut ranks: Vec<Vec<f64>> = groups.iter().map(|g| vec![0.0; g.len()]).collect();
    let mut tie_sum = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && pooled[j].0 == pooled[i].0 {
            j += 1;
        }
        let mid = (i + 1 + j) as f64 / 2.0;
        for &(_, g, k) in &pooled[i..j] {
            ranks[g][k] = mid;
        }
        let t = (j - i) as f64;
        tie_sum += t * t * t - t;
        i = j;
    }
    Ok(Ranked { ranks, n, tie_sum })
}

/// Largest number of distinct group assignments enumerated for the exact
/// permutation p-value.
pub const EXACT_LIMIT: f64 = 1e7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KruskalWallis {
    /// Tie-corrected statistic.
    pub h: f64,
    pub df: usize,
    /// Chi-square approximation.
    pub p: f64,
    /// Share of all equally likely group assignments with a statistic at
    /// least as large as observed; absent above `EXACT_LIMIT` assignments.
    pub p_exact: Option<f64>,
}

/// `sum_g S_g^2 / n_g`, which orders assignments exactly as `H` does.
fn rank_sum_statistic(sums: &[f64], sizes: &[usize]) -> f64 {
    sums.iter().zip(sizes).map(|(s, &n)| s * s / n as f64).sum()
}

fn exact_tail(ranks: &[Vec<f64>], observed: f64) -> Option<f64> {
    let sizes: Vec<usize> = ranks.iter().map(Vec::len).collect();
    let n: usize = sizes.iter().sum();
    let ln_count =
        ln_gamma(n as f64 + 1.0) - sizes.iter().map(|&k| ln_gamma(k as f64 + 1.0)).sum::<f64>();
    if ln_count > EXACT_LIMIT.ln() {
        return None;
    }
    let pooled: Vec<f64> = ranks.concat();
    let tol = 1e-9 * observed.abs().max(1.0);

    struct Walk<'a> {
        pooled: &'a [f64],
        sizes: &'a [usize],
        counts: Vec<usize>,
        sums: Vec<f64>,
        threshold: f64,
        hits: u64,
        total: u64,
    }
    fn walk(w: &mut Walk<'_>, i: usize) {
        if i == w.pooled.len() {
            w.total += 1;
            if rank_sum_statistic(&w.sums, w.sizes) >= w.threshold {
                w.hits += 1;
            }
            return;
        }
        for g in 0..w.sizes.len() {
            if w.counts[g] < w.sizes[g] {
                w.counts[g] += 1;
                w.sums[g] += w.pooled[i];
                walk(w, i + 1);
                w.sums[g] -= w.pooled[i];
                w.counts[g] -= 1;
            }
        }
    }
    let mut w = Walk {
        pooled: &pooled,
        sizes: &sizes,
        counts: vec![0; sizes.len()],
        sums: vec![0.0; sizes.len()],
        threshold: observed - tol,
        hits: 0,
        total: 0,
    };
    walk(&mut w, 0);
    Some(w.hits as f64 / w.total as f64)
}

pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<KruskalWallis> {
    let r = rank_groups(groups)?;
    let n = r.n as f64;
    let df = groups.len() - 1;
    let correction = 1.0 - r.tie_sum / (n * n * n - n);
    if correction <= 0.0 {
        return Ok(KruskalWallis {
            h: 0.0,
            df,
            p: 1.0,
            p_exact: Some(1.0),
        });
    }
    let sums: Vec<f64> = r.ranks.iter().map(|g| g.iter().sum()).collect();
    let sizes: Vec<usize> = r.ranks.iter().map(Vec::len).collect();
    let stat = rank_sum_statistic(&sums, &sizes);
    let h = (12.0 / (n * (n + 1.0)) * stat - 3.0 * (n + 1.0)) / correction;
    let h = h.max(0.0);
    Ok(KruskalWallis {
        h,
        df,
        p: chi_square_sf(h, df as f64)?,
        p_exact: exact_tail(&r.ranks, stat),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DunnPair {
    pub a: usize,
    pub b: usize,
    /// `None` when every observation is tied.
    pub z: Option<f64>,
    /// Two-sided, unadjusted.
    pub p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DunnTable {
    pub mean_ranks: Vec<f64>,
    /// Pairs with `a < b`.
    pub pairs: Vec<DunnPair>,
}

impl DunnTable {
    /// Statistic for `(i, j)` in either order; `z(i, j) = -z(j, i)`.
    pub fn z(&self, i: usize, j: usize) -> Option<f64> {
        if i == j {
            return Some(0.0);
        }
        let (a, b, sign) = if i < j { (i, j, 1.0) } else { (j, i, -1.0) };
        self.pairs
            .iter()
            .find(|p| p.a == a && p.b == b)
            .and_then(|p| p.z)
            .map(|z| sign * z)
    }

    pub fn p(&self, i: usize, j: usize) -> Option<f64> {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.pairs
            .iter()
            .find(|p| p.a == a && p.b == b)
            .and_then(|p| p.p)
    }
}

/// Pairwise post-hoc comparisons of mean ranks with tie-adjusted variance.
pub fn dunn_test(groups: &[Vec<f64>]) -> Result<DunnTable> {
    let r = rank_groups(groups)?;
    let n = r.n as f64;
    let mean_ranks: Vec<f64> = r
        .ranks
        .iter()
        .map(|g| g.iter().sum::<f64>() / g.len() as f64)
        .collect();
    let base = n * (n + 1.0) / 12.0 - r.tie_sum / (12.0 * (n - 1.0));
    let mut pairs = Vec::new();
    for a in 0..groups.len() {
        for b in a + 1..groups.len() {
            let var = base * (1.0 / groups[a].len() as f64 + 1.0 / groups[b].len() as f64);
            let z = (var > 0.0).then(|| (mean_ranks[a] - mean_ranks[b]) / var.sqrt());
            let p = z.map(|z| (2.0 * normal_sf(z.abs())).min(1.0));
            pairs.push(DunnPair { a, b, z, p });
        }
    }
    Ok(DunnTable { mean_ranks, pairs })
}
