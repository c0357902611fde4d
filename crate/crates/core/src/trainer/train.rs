use std::time::{Duration, Instant};

use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::model::{
    init_model, loss, loss_and_gradients, DpnnModel, FeatureScaling, Hyperparams, LossBreakdown,
    Sample,
};
use crate::numerics::{adam_step, AdamConfig, AdamState, RngStream};

#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Per-epoch mean of the mini-batch losses, weighted by batch size.
    pub trace: Vec<LossBreakdown>,
    /// Per-epoch validation loss when early stopping is configured.
    pub validation_trace: Vec<LossBreakdown>,
    pub model: DpnnModel,
    pub wall_time: Duration,
    pub seed: u64,
    /// Optimizer steps taken.
    pub steps: u64,
}

impl TrainReport {
    pub fn epochs_run(&self) -> usize {
        self.trace.len()
    }
}

fn check_trainable(dataset: &Dataset) -> Result<Vec<Vec<f64>>> {
    if dataset.is_empty() {
        return Err(Error::Domain("cannot train on an empty dataset".into()));
    }
    let labels = dataset.labels();
    if labels.iter().all(|&y| y) || labels.iter().all(|&y| !y) {
        return Err(Error::Domain(
            "training data must contain both outcomes".into(),
        ));
    }
    dataset.feature_rows()
}

/// Fits feature scaling on `dataset`, initializes the network from `h.seed`
/// and runs `h.epochs` passes of shuffled mini-batch Adam.
pub fn train(dataset: &Dataset, h: &Hyperparams) -> Result<TrainReport> {
    h.validate()?;
    let start = Instant::now();
    let rows = check_trainable(dataset)?;
    let scaling = FeatureScaling::fit(&rows)?;
    let xs: Vec<Vec<f64>> = rows.iter().map(|r| scaling.apply(r)).collect();
    let samples: Vec<Sample<'_>> = xs
        .iter()
        .zip(&dataset.records)
        .map(|(x, r)| Sample {
            x,
            treatment: r.treatment,
            remission: r.remission,
        })
        .collect();

    let mut rng = RngStream::new(h.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut validation = Vec::new();
    if h.patience.is_some() && h.epochs > 0 {
        let mut split = RngStream::derived(h.seed, &[1]);
        split.shuffle(&mut order);
        let n_val = ((samples.len() as f64 * h.validation_fraction).round() as usize)
            .clamp(1, samples.len() - 1);
        validation = order.split_off(samples.len() - n_val);
        order.sort_unstable();
    }
    let seed_rows: Vec<Vec<f64>> = order.iter().map(|&i| xs[i].clone()).collect();
    let mut model = init_model(
        h,
        &dataset.schema,
        &dataset.treatments,
        scaling,
        &mut rng,
        Some(&seed_rows),
    )?;

    let mut state = AdamState::new(&model.params.group_sizes());
    let cfg = AdamConfig::with_lr(h.learning_rate);
    let mut trace = Vec::with_capacity(h.epochs);
    let mut validation_trace = Vec::new();
    let val_batch: Vec<Sample<'_>> = validation.iter().map(|&i| samples[i]).collect();
    let mut best: Option<(f64, DpnnModel)> = None;
    let mut stale = 0;
    let mut batch = Vec::with_capacity(h.batch_size);

    for epoch in 0..h.epochs {
        rng.shuffle(&mut order);
        let mut acc = LossAccumulator::default();
        for (b, chunk) in order.chunks(h.batch_size).enumerate() {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| samples[i]));
            let (lb, grads) = loss_and_gradients(&model, &batch, h)
                .map_err(|_| Error::Diverged { epoch, batch: b })?;
            let named = grads.groups();
            let slices: Vec<&[f64]> = named.iter().map(|(_, g)| *g).collect();
            adam_step(&mut model.params.slots_mut(), &slices, &mut state, &cfg)
                .map_err(|_| Error::Diverged { epoch, batch: b })?;
            if !model.params.all_finite() {
                return Err(Error::Diverged { epoch, batch: b });
            }
            acc.add(&lb, batch.len());
        }
        trace.push(acc.mean());

        if let Some(patience) = h.patience {
            let v = loss(&model, &val_batch, h).map_err(|_| Error::Diverged { epoch, batch: 0 })?;
            validation_trace.push(v);
            if best.as_ref().is_none_or(|(b, _)| v.total < *b) {
                best = Some((v.total, model.clone()));
                stale = 0;
            } else {
                stale += 1;
                if stale >= patience {
                    break;
                }
            }
        }
    }
    if let Some((_, m)) = best {
        model = m;
    }
    Ok(TrainReport {
        trace,
        validation_trace,
        model,
        wall_time: start.elapsed(),
        seed: h.seed,
        steps: state.step(),
    })
}

#[derive(Default)]
struct LossAccumulator {
    sum: LossBreakdown,
    weight: f64,
}

impl LossAccumulator {
    fn add(&mut self, lb: &LossBreakdown, n: usize) {
        let w = n as f64;
        self.sum.total += w * lb.total;
        self.sum.cls_term += w * lb.cls_term;
        self.sum.ae_term += w * lb.ae_term;
        self.sum.pv_term += w * lb.pv_term;
        self.sum.between_variance += w * lb.between_variance;
        self.sum.within_variance += w * lb.within_variance;
        self.weight += w;
    }

    fn mean(&self) -> LossBreakdown {
        let w = self.weight;
        LossBreakdown {
            total: self.sum.total / w,
            cls_term: self.sum.cls_term / w,
            ae_term: self.sum.ae_term / w,
            pv_term: self.sum.pv_term / w,
            between_variance: self.sum.between_variance / w,
            within_variance: self.sum.within_variance / w,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{generate_synthetic, SynthConfig};

    fn data(n: usize, seed: u64) -> Dataset {
        generate_synthetic(&SynthConfig::reference(n, seed))
            .unwrap()
            .0
    }

    #[test]
    fn zero_epochs_returns_initial_model() {
        let ds = data(200, 1);
        let h = Hyperparams {
            epochs: 0,
            seed: 9,
            ..Hyperparams::default()
        };
        let report = train(&ds, &h).unwrap();
        assert!(report.trace.is_empty());
        let rows = ds.feature_rows().unwrap();
        let scaling = FeatureScaling::fit(&rows).unwrap();
        let xs: Vec<Vec<f64>> = rows.iter().map(|r| scaling.apply(r)).collect();
        let init = init_model(
            &h,
            &ds.schema,
            &ds.treatments,
            scaling,
            &mut RngStream::new(9),
            Some(&xs),
        )
        .unwrap();
        assert_eq!(report.model, init);
    }

    #[test]
    fn deterministic_under_seed() {
        let ds = data(300, 2);
        let h = Hyperparams {
            epochs: 3,
            seed: 5,
            ..Hyperparams::default()
        };
        let a = train(&ds, &h).unwrap();
        let b = train(&ds, &h).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.trace, b.trace);
        let c = train(&ds, &Hyperparams { seed: 6, ..h }).unwrap();
        assert_ne!(a.model, c.model);
    }

    #[test]
    fn partial_batches_are_kept() {
        let ds = data(130, 3);
        let h = Hyperparams {
            epochs: 2,
            batch_size: 64,
            ..Hyperparams::default()
        };
        // 130 = 64 + 64 + 2, so three Adam steps per epoch.
        let report = train(&ds, &h).unwrap();
        assert_eq!(report.epochs_run(), 2);
        assert_eq!(report.steps, 6);
    }

    #[test]
    fn early_stopping_restores_best() {
        let ds = data(400, 4);
        let h = Hyperparams {
            epochs: 60,
            patience: Some(2),
            learning_rate: 0.05,
            ..Hyperparams::default()
        };
        let report = train(&ds, &h).unwrap();
        assert_eq!(report.validation_trace.len(), report.epochs_run());
        assert!(report.epochs_run() <= 60);
        let best = report
            .validation_trace
            .iter()
            .map(|v| v.total)
            .fold(f64::INFINITY, f64::min);
        assert!(best.is_finite());
    }

    #[test]
    fn rejects_single_class_and_missing() {
        let mut ds = data(50, 5);
        ds.records.iter_mut().for_each(|r| r.remission = true);
        assert!(train(&ds, &Hyperparams::default()).is_err());
        let mut ds = data(50, 5);
        ds.records[0].features[3] = None;
        assert!(train(&ds, &Hyperparams::default()).is_err());
    }

    #[test]
    fn divergence_reports_position() {
        let ds = data(100, 6);
        let h = Hyperparams {
            epochs: 5,
            learning_rate: 1e300,
            ..Hyperparams::default()
        };
        match train(&ds, &h) {
            Err(Error::Diverged { epoch, .. }) => assert!(epoch < 5),
            other => panic!(
                "expected divergence, got {:?}",
                other.map(|r| r.trace.len())
            ),
        }
    }
}
