//! Composite training objective and its reverse-mode gradients.

use serde::{Deserialize, Serialize};

use super::{distances_to, sigmoid, DpnnModel, DpnnParams, Hyperparams};
use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

/// Probability clamp applied inside the cross-entropy.
pub const BCE_CLAMP: f64 = 1e-12;

/// One training example: a scaled feature vector, the treatment received and
/// the observed outcome.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub x: &'a [f64],
    pub treatment: usize,
    pub remission: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    /// Mean cross-entropy on the received treatment's head (unweighted).
    pub cls_term: f64,
    /// Mean squared reconstruction error (unweighted).
    pub ae_term: f64,
    /// `-(alpha * between + beta * within)` (unweighted).
    pub pv_term: f64,
    pub between_variance: f64,
    pub within_variance: f64,
}

pub fn loss(model: &DpnnModel, batch: &[Sample<'_>], h: &Hyperparams) -> Result<LossBreakdown> {
    run(model, batch, h, None)
}

pub fn loss_gradients(
    model: &DpnnModel,
    batch: &[Sample<'_>],
    h: &Hyperparams,
) -> Result<DpnnParams> {
    loss_and_gradients(model, batch, h).map(|(_, g)| g)
}

pub fn loss_and_gradients(
    model: &DpnnModel,
    batch: &[Sample<'_>],
    h: &Hyperparams,
) -> Result<(LossBreakdown, DpnnParams)> {
    let mut grads = model.params.zeros_like();
    let lb = run(model, batch, h, Some(&mut grads))?;
    Ok((lb, grads))
}

fn check_batch(model: &DpnnModel, batch: &[Sample<'_>]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::Domain("loss needs a nonempty batch".into()));
    }
    let t = model.treatment_count();
    for s in batch {
        model.params.encoder.check_input(s.x)?;
        if s.treatment >= t {
            return Err(Error::Shape(format!(
                "treatment index {} out of range for {t} heads",
                s.treatment
            )));
        }
    }
    Ok(())
}

fn bce(p: f64, y: bool) -> (f64, f64) {
    let c = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
    let value = if y { -c.ln() } else { -(1.0 - c).ln() };
    // Gradient with respect to the pre-sigmoid logit; flat where clamped.
    let slope = if c != p {
        0.0
    } else {
        p - if y { 1.0 } else { 0.0 }
    };
    (value, slope)
}

fn run(
    model: &DpnnModel,
    batch: &[Sample<'_>],
    h: &Hyperparams,
    mut grads: Option<&mut DpnnParams>,
) -> Result<LossBreakdown> {
    check_batch(model, batch)?;
    let params = &model.params;
    let n = batch.len() as f64;
    let features = params.encoder.inputs() as f64;
    let mut cls = 0.0;
    let mut ae = 0.0;

    for s in batch {
        let enc = params.encoder.forward_trace(s.x);
        let z = enc.output();
        let dec = params.decoder.forward_trace(z);
        let x_hat = dec.output();
        let dist = distances_to(&params.prototypes, z);
        let cla = params.classifier.forward_trace(&dist);
        let u = cla.output()[s.treatment];
        let (value, slope) = bce(sigmoid(u), s.remission);
        cls += value;
        ae += x_hat
            .iter()
            .zip(s.x)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / features;

        let Some(g) = grads.as_deref_mut() else {
            continue;
        };
        let mut d_z = vec![0.0; z.len()];
        if h.lambda_cls != 0.0 && slope != 0.0 {
            let mut d_u = vec![0.0; params.classifier.outputs()];
            d_u[s.treatment] = h.lambda_cls * slope / n;
            let d_s = params.classifier.backward(&cla, &d_u, &mut g.classifier);
            for (j, ds) in d_s.iter().enumerate() {
                if *ds == 0.0 {
                    continue;
                }
                let p = params.prototypes.row(j);
                for k in 0..z.len() {
                    let diff = 2.0 * ds * (z[k] - p[k]);
                    d_z[k] += diff;
                    g.prototypes[(j, k)] -= diff;
                }
            }
        }
        if h.lambda_ae != 0.0 {
            let scale = 2.0 * h.lambda_ae / (n * features);
            let d_xhat: Vec<f64> = x_hat
                .iter()
                .zip(s.x)
                .map(|(a, b)| scale * (a - b))
                .collect();
            let from_dec = params.decoder.backward(&dec, &d_xhat, &mut g.decoder);
            d_z.iter_mut().zip(from_dec).for_each(|(a, b)| *a += b);
        }
        if d_z.iter().any(|v| *v != 0.0) {
            params.encoder.backward(&enc, &d_z, &mut g.encoder);
        }
    }
    cls /= n;
    ae /= n;

    let (between, within) = prototype_variances(model, h, grads);
    let pv = -(h.alpha * between + h.beta * within);
    let total = h.lambda_cls * cls + h.lambda_ae * ae + h.lambda_pv * pv;
    if !total.is_finite() {
        return Err(Error::NonFinite {
            name: "loss".into(),
        });
    }
    Ok(LossBreakdown {
        total,
        cls_term: cls,
        ae_term: ae,
        pv_term: pv,
        between_variance: between,
        within_variance: within,
    })
}

/// Population variances of the prototype outcome matrix, accumulating the
/// variance term's gradient when requested.
fn prototype_variances(
    model: &DpnnModel,
    h: &Hyperparams,
    grads: Option<&mut DpnnParams>,
) -> (f64, f64) {
    let params = &model.params;
    let protos = &params.prototypes;
    let (m, t) = (protos.rows(), params.classifier.outputs());
    let mut traces = Vec::with_capacity(m);
    let mut q = DenseMatrix::zeros(m, t);
    for j in 0..m {
        let trace = params
            .classifier
            .forward_trace(&distances_to(protos, protos.row(j)));
        for (dst, u) in q.row_mut(j).iter_mut().zip(trace.output()) {
            *dst = sigmoid(*u);
        }
        traces.push(trace);
    }
    let col_mean: Vec<f64> = (0..t)
        .map(|c| (0..m).map(|j| q[(j, c)]).sum::<f64>() / m as f64)
        .collect();
    let row_mean: Vec<f64> = (0..m)
        .map(|j| q.row(j).iter().sum::<f64>() / t as f64)
        .collect();
    let mut between = 0.0;
    let mut within = 0.0;
    for j in 0..m {
        for c in 0..t {
            between += (q[(j, c)] - col_mean[c]).powi(2);
            within += (q[(j, c)] - row_mean[j]).powi(2);
        }
    }
    let mt = (m * t) as f64;
    between /= mt;
    within /= mt;

    let Some(g) = grads else {
        return (between, within);
    };
    if h.lambda_pv == 0.0 {
        return (between, within);
    }
    let d = protos.cols();
    for j in 0..m {
        let d_u: Vec<f64> = (0..t)
            .map(|c| {
                let v = q[(j, c)];
                let d_b = 2.0 / mt * (v - col_mean[c]);
                let d_w = 2.0 / mt * (v - row_mean[j]);
                -h.lambda_pv * (h.alpha * d_b + h.beta * d_w) * v * (1.0 - v)
            })
            .collect();
        let d_s = params
            .classifier
            .backward(&traces[j], &d_u, &mut g.classifier);
        for (k, ds) in d_s.iter().enumerate() {
            if *ds == 0.0 || k == j {
                continue;
            }
            for c in 0..d {
                let diff = 2.0 * ds * (protos[(j, c)] - protos[(k, c)]);
                g.prototypes[(j, c)] += diff;
                g.prototypes[(k, c)] -= diff;
            }
        }
    }
    (between, within)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{FeatureSchema, TreatmentSet};
    use crate::model::{init_model, FeatureScaling};
    use crate::numerics::{grad_check, RngStream};

    struct Fixture {
        xs: Vec<Vec<f64>>,
        treatments: Vec<usize>,
        labels: Vec<bool>,
    }

    impl Fixture {
        // Moderate inputs keep classifier hidden units out of deep saturation,
        // where gradients fall below the finite-difference noise floor.
        fn new(n: usize, seed: u64) -> Self {
            let mut rng = RngStream::new(seed);
            Self {
                xs: (0..n)
                    .map(|_| (0..19).map(|_| 0.5 * rng.normal()).collect())
                    .collect(),
                treatments: (0..n).map(|_| rng.below(8)).collect(),
                labels: (0..n).map(|_| rng.bernoulli(0.4)).collect(),
            }
        }

        fn batch(&self) -> Vec<Sample<'_>> {
            (0..self.xs.len())
                .map(|i| Sample {
                    x: &self.xs[i],
                    treatment: self.treatments[i],
                    remission: self.labels[i],
                })
                .collect()
        }
    }

    fn model(h: &Hyperparams, seed: u64) -> DpnnModel {
        init_model(
            h,
            &FeatureSchema::standard(),
            &TreatmentSet::standard(),
            FeatureScaling::identity(19),
            &mut RngStream::new(seed),
            None,
        )
        .unwrap()
    }

    fn check_point(h: &Hyperparams, seed: u64) -> f64 {
        let fx = Fixture::new(8, seed);
        let batch = fx.batch();
        let m = init_model(
            h,
            &FeatureSchema::standard(),
            &TreatmentSet::standard(),
            FeatureScaling::identity(19),
            &mut RngStream::new(seed),
            Some(&fx.xs),
        )
        .unwrap();
        let analytic = loss_gradients(&m, &batch, h).unwrap().to_flat();
        let mut probe = m.clone();
        grad_check(
            |theta| {
                probe.params.set_flat(theta).unwrap();
                loss(&probe, &batch, h).unwrap().total
            },
            &m.params.to_flat(),
            &analytic,
            1e-4,
        )
        .unwrap()
    }

    #[test]
    fn gradients_match_central_differences() {
        let h = Hyperparams::default();
        for seed in 0..10 {
            let err = check_point(&h, seed);
            assert!(err < 1e-4, "seed {seed}: relative error {err}");
        }
    }

    #[test]
    fn gradients_match_for_each_term_alone() {
        for (lc, la, lp) in [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)] {
            let h = Hyperparams {
                lambda_cls: lc,
                lambda_ae: la,
                lambda_pv: lp,
                prototype_count: 4,
                alpha: 0.7,
                beta: 1.3,
                ..Hyperparams::default()
            };
            let err = check_point(&h, 42);
            assert!(err < 1e-4, "({lc},{la},{lp}): {err}");
        }
    }

    #[test]
    fn decomposition_identity() {
        let h = Hyperparams {
            lambda_ae: 0.3,
            lambda_pv: 0.9,
            alpha: 0.4,
            beta: 2.0,
            ..Hyperparams::default()
        };
        let fx = Fixture::new(20, 3);
        let lb = loss(&model(&h, 3), &fx.batch(), &h).unwrap();
        let expect =
            h.lambda_cls * lb.cls_term + h.lambda_ae * lb.ae_term + h.lambda_pv * lb.pv_term;
        assert!((lb.total - expect).abs() < 1e-12);
        let pv = -(h.alpha * lb.between_variance + h.beta * lb.within_variance);
        assert!((lb.pv_term - pv).abs() < 1e-12);
    }

    #[test]
    fn variances_match_direct_computation() {
        let h = Hyperparams {
            prototype_count: 5,
            ..Hyperparams::default()
        };
        let m = model(&h, 17);
        let fx = Fixture::new(4, 17);
        let lb = loss(&m, &fx.batch(), &h).unwrap();
        let q = m.prototype_outcome_matrix();
        let var = |v: &[f64]| {
            let mu = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / v.len() as f64
        };
        let between = (0..8).map(|t| var(&q.column(t))).sum::<f64>() / 8.0;
        let within = (0..5).map(|j| var(q.row(j))).sum::<f64>() / 5.0;
        assert!((lb.between_variance - between).abs() < 1e-12);
        assert!((lb.within_variance - within).abs() < 1e-12);
    }

    #[test]
    fn single_prototype_has_no_between_variance() {
        let h = Hyperparams {
            prototype_count: 1,
            ..Hyperparams::default()
        };
        let fx = Fixture::new(5, 1);
        let lb = loss(&model(&h, 1), &fx.batch(), &h).unwrap();
        assert_eq!(lb.between_variance, 0.0);
    }

    #[test]
    fn perfect_predictions_drive_total_to_zero() {
        let h = Hyperparams {
            lambda_ae: 0.0,
            lambda_pv: 0.0,
            ..Hyperparams::default()
        };
        let mut m = model(&h, 2);
        m.params.classifier = m.params.classifier.zeros_like();
        let fx = Fixture::new(10, 2);
        let batch: Vec<Sample> = fx
            .batch()
            .into_iter()
            .map(|s| Sample {
                remission: true,
                ..s
            })
            .collect();
        let mut last = f64::INFINITY;
        for bias in [1.0, 5.0, 10.0, 20.0, 40.0] {
            m.params.classifier.layers.last_mut().unwrap().bias = vec![bias; 8];
            let total = loss(&m, &batch, &h).unwrap().total;
            assert!(total < last && total.is_finite());
            last = total;
        }
        assert!(last < 1e-11);
        // Saturated far past the clamp stays finite.
        m.params.classifier.layers.last_mut().unwrap().bias = vec![-800.0; 8];
        let lb = loss(&m, &batch, &h).unwrap();
        assert!(lb.total.is_finite());
        assert!((lb.cls_term - -(BCE_CLAMP.ln())).abs() < 1e-9);
    }

    #[test]
    fn zero_variance_weight_contributes_nothing() {
        let h = Hyperparams {
            lambda_cls: 0.0,
            lambda_ae: 0.0,
            lambda_pv: 0.0,
            ..Hyperparams::default()
        };
        let fx = Fixture::new(8, 5);
        let g = loss_gradients(&model(&h, 5), &fx.batch(), &h).unwrap();
        assert!(g.to_flat().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn unused_heads_get_no_classification_gradient() {
        let h = Hyperparams {
            lambda_ae: 0.0,
            lambda_pv: 0.0,
            ..Hyperparams::default()
        };
        let fx = Fixture::new(12, 6);
        let batch: Vec<Sample> = fx
            .batch()
            .into_iter()
            .map(|s| Sample {
                treatment: s.treatment % 3,
                ..s
            })
            .collect();
        let g = loss_gradients(&model(&h, 6), &batch, &h).unwrap();
        let out = g.classifier.layers.last().unwrap();
        for head in 3..8 {
            assert!(out.weight.row(head).iter().all(|v| *v == 0.0));
            assert_eq!(out.bias[head], 0.0);
        }
        assert!(out.weight.row(0).iter().any(|v| *v != 0.0));
    }

    #[test]
    fn variance_step_increases_spread() {
        let h = Hyperparams {
            lambda_cls: 0.0,
            lambda_ae: 0.0,
            ..Hyperparams::default()
        };
        let fx = Fixture::new(4, 8);
        let batch = fx.batch();
        for seed in 0..5 {
            let m = model(&h, 100 + seed);
            let before = loss(&m, &batch, &h).unwrap();
            let g = loss_gradients(&m, &batch, &h).unwrap().to_flat();
            let mut stepped = m.clone();
            let theta: Vec<f64> = m
                .params
                .to_flat()
                .iter()
                .zip(&g)
                .map(|(t, d)| t - 1e-2 * d)
                .collect();
            stepped.params.set_flat(&theta).unwrap();
            let after = loss(&stepped, &batch, &h).unwrap();
            assert!(
                after.between_variance + after.within_variance
                    > before.between_variance + before.within_variance
            );
        }
    }

    #[test]
    fn rejects_bad_batches() {
        let h = Hyperparams::default();
        let m = model(&h, 1);
        assert!(matches!(loss(&m, &[], &h), Err(Error::Domain(_))));
        let x = vec![0.0; 19];
        let bad = [Sample {
            x: &x,
            treatment: 8,
            remission: false,
        }];
        assert!(loss(&m, &bad, &h).is_err());
    }
}
