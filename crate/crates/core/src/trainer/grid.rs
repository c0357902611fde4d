use serde::{Deserialize, Serialize};

use super::train;
use crate::dataio::{Dataset, FoldPlan};
use crate::error::{Error, Result};
use crate::eval::{predict_all, roc_auc};
use crate::model::Hyperparams;
use crate::numerics::derive_seed;
use crate::parallel::par_map;

/// Candidate values per hyperparameter. Unlisted fields keep `base`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub base: Hyperparams,
    pub latent_dim: Vec<usize>,
    pub prototype_count: Vec<usize>,
    pub encoder_hidden: Vec<Vec<usize>>,
    pub decoder_hidden: Vec<Vec<usize>>,
    pub classifier_hidden: Vec<Vec<usize>>,
    pub lambda_cls: Vec<f64>,
    pub lambda_ae: Vec<f64>,
    pub lambda_pv: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub epochs: Vec<usize>,
    pub batch_size: Vec<usize>,
    pub learning_rate: Vec<f64>,
    /// Inner stratified folds per cell.
    pub folds: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            base: Hyperparams::default(),
            latent_dim: vec![],
            prototype_count: vec![],
            encoder_hidden: vec![],
            decoder_hidden: vec![],
            classifier_hidden: vec![],
            lambda_cls: vec![],
            lambda_ae: vec![],
            lambda_pv: vec![],
            alpha: vec![],
            beta: vec![],
            epochs: vec![],
            batch_size: vec![],
            learning_rate: vec![],
            folds: 3,
        }
    }
}

fn expand<T: Clone>(
    cells: Vec<Hyperparams>,
    values: &[T],
    set: impl Fn(&mut Hyperparams, T),
) -> Vec<Hyperparams> {
    if values.is_empty() {
        return cells;
    }
    let mut out = Vec::with_capacity(cells.len() * values.len());
    for c in &cells {
        for v in values {
            let mut c = c.clone();
            set(&mut c, v.clone());
            out.push(c);
        }
    }
    out
}

impl GridSpec {
    /// Cartesian product of the listed values in field order, the last
    /// listed field varying fastest.
    pub fn cells(&self) -> Vec<Hyperparams> {
        let mut cells = vec![self.base.clone()];
        cells = expand(cells, &self.latent_dim, |h, v| h.latent_dim = v);
        cells = expand(cells, &self.prototype_count, |h, v| h.prototype_count = v);
        cells = expand(cells, &self.encoder_hidden, |h, v| h.encoder_hidden = v);
        cells = expand(cells, &self.decoder_hidden, |h, v| h.decoder_hidden = v);
        cells = expand(cells, &self.classifier_hidden, |h, v| {
            h.classifier_hidden = v
        });
        cells = expand(cells, &self.lambda_cls, |h, v| h.lambda_cls = v);
        cells = expand(cells, &self.lambda_ae, |h, v| h.lambda_ae = v);
        cells = expand(cells, &self.lambda_pv, |h, v| h.lambda_pv = v);
        cells = expand(cells, &self.alpha, |h, v| h.alpha = v);
        cells = expand(cells, &self.beta, |h, v| h.beta = v);
        cells = expand(cells, &self.epochs, |h, v| h.epochs = v);
        cells = expand(cells, &self.batch_size, |h, v| h.batch_size = v);
        cells = expand(cells, &self.learning_rate, |h, v| h.learning_rate = v);
        cells
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.folds < 2 {
            problems.push("folds must be at least 2".to_string());
        }
        if let Err(Error::Validation(v)) = self.base.validate() {
            problems.extend(v.into_iter().map(|p| format!("base: {p}")));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }
}

/// Parameter count of a network built from `h` for `features` inputs and
/// `treatments` heads.
pub fn model_size(h: &Hyperparams, features: usize, treatments: usize) -> usize {
    let dense = |sizes: Vec<usize>| sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum::<usize>();
    let chain = |a: usize, hidden: &[usize], b: usize| {
        let mut v = vec![a];
        v.extend_from_slice(hidden);
        v.push(b);
        v
    };
    dense(chain(features, &h.encoder_hidden, h.latent_dim))
        + dense(chain(h.latent_dim, &h.decoder_hidden, features))
        + dense(chain(h.prototype_count, &h.classifier_hidden, treatments))
        + h.prototype_count * h.latent_dim
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub index: usize,
    pub hyperparams: Hyperparams,
    pub param_count: usize,
    pub fold_aucs: Vec<f64>,
    pub mean_auc: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best_index: usize,
    pub best: Hyperparams,
    pub cells: Vec<GridCell>,
}

/// Evaluates every cell by mean inner-fold validation AUC. All cells share
/// one fold plan; each cell's training seeds derive from `(seed, cell, fold)`.
pub fn grid_search(
    dataset: &Dataset,
    grid: &GridSpec,
    seed: u64,
    jobs: usize,
) -> Result<GridResult> {
    grid.validate()?;
    let cells = grid.cells();
    let plan = FoldPlan::repeated(&dataset.labels(), grid.folds, 1, seed)?;
    let indexed: Vec<(usize, Hyperparams)> = cells.into_iter().enumerate().collect();
    let p = dataset.schema.len();
    let t = dataset.treatments.len();
    let evaluated = par_map(jobs, &indexed, |(index, h)| {
        let run = || -> Result<Vec<f64>> {
            h.validate()?;
            let mut aucs = Vec::with_capacity(grid.folds);
            for fold in 0..grid.folds {
                let hf = Hyperparams {
                    seed: derive_seed(seed, &[*index as u64, fold as u64]),
                    ..h.clone()
                };
                let report = train(&dataset.subset(&plan.train_indices(0, fold)), &hf)?;
                let test = dataset.subset(&plan.test_indices(0, fold));
                let probs = predict_all(&report.model, &test)?;
                let scores: Vec<f64> = probs
                    .iter()
                    .zip(test.treatments_received())
                    .map(|(p, t)| p[t])
                    .collect();
                aucs.push(roc_auc(&scores, &test.labels())?);
            }
            Ok(aucs)
        };
        let (fold_aucs, error) = match run() {
            Ok(a) => (a, None),
            Err(e) => (vec![], Some(e.to_string())),
        };
        let mean_auc =
            (!fold_aucs.is_empty()).then(|| fold_aucs.iter().sum::<f64>() / fold_aucs.len() as f64);
        GridCell {
            index: *index,
            hyperparams: h.clone(),
            param_count: model_size(h, p, t),
            fold_aucs,
            mean_auc,
            error,
        }
    })?;
    let best = evaluated
        .iter()
        .filter_map(|c| c.mean_auc.map(|a| (a, c)))
        .fold(None::<(f64, &GridCell)>, |acc, (a, c)| match acc {
            Some((ba, bc)) if ba > a || (ba == a && bc.param_count <= c.param_count) => {
                Some((ba, bc))
            }
            _ => Some((a, c)),
        })
        .ok_or_else(|| Error::Domain("every grid cell failed".into()))?
        .1;
    Ok(GridResult {
        best_index: best.index,
        best: best.hyperparams.clone(),
        cells: evaluated,
    })
}
