//! The differential prototypes network: an autoencoder whose latent space
//! holds `m` learned prototypes, and a classifier that maps a patient's
//! squared distances to those prototypes onto one remission probability per
//! treatment.

mod io;
mod loss;
mod mlp;
mod params;

use serde::{Deserialize, Serialize};

use crate::dataio::{FeatureSchema, TreatmentSet};
use crate::error::{Error, Result};
use crate::numerics::{sq_dist, DenseMatrix, RngStream};

pub use io::{
    load_model, model_from_json, model_to_json, model_to_json_with, save_model, FORMAT_VERSION,
};
pub use loss::{loss, loss_and_gradients, loss_gradients, LossBreakdown, Sample, BCE_CLAMP};
pub use mlp::{Dense, Mlp, MlpTrace};
pub use params::DpnnParams;

/// Selection rule for the training rows whose encodings seed the prototypes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrototypeInit {
    /// Uniformly random distinct rows.
    Uniform,
    /// Rows drawn with probability proportional to squared latent distance
    /// from the rows already drawn.
    #[default]
    Spread,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    pub latent_dim: usize,
    pub prototype_count: usize,
    pub encoder_hidden: Vec<usize>,
    pub decoder_hidden: Vec<usize>,
    pub classifier_hidden: Vec<usize>,
    pub lambda_cls: f64,
    pub lambda_ae: f64,
    pub lambda_pv: f64,
    /// Weight of the across-prototype variance inside the variance term.
    pub alpha: f64,
    /// Weight of the across-treatment variance inside the variance term.
    pub beta: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// How data rows are picked to seed the prototypes.
    pub prototype_init: PrototypeInit,
    /// Early stopping patience in epochs; `None` trains for all epochs.
    pub patience: Option<usize>,
    /// Fraction held out for early stopping when `patience` is set.
    pub validation_fraction: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            latent_dim: 8,
            prototype_count: 3,
            encoder_hidden: vec![16],
            decoder_hidden: vec![16],
            classifier_hidden: vec![8],
            lambda_cls: 1.0,
            lambda_ae: 0.5,
            lambda_pv: 0.5,
            alpha: 1.0,
            beta: 1.0,
            epochs: 200,
            batch_size: 64,
            learning_rate: 1e-3,
            seed: 0,
            prototype_init: PrototypeInit::Spread,
            patience: None,
            validation_fraction: 0.1,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.latent_dim == 0 {
            problems.push("latent_dim must be at least 1".to_string());
        }
        if self.prototype_count == 0 {
            problems.push("prototype_count must be at least 1".to_string());
        }
        if self
            .encoder_hidden
            .iter()
            .chain(&self.decoder_hidden)
            .chain(&self.classifier_hidden)
            .any(|&w| w == 0)
        {
            problems.push("hidden layer widths must be positive".to_string());
        }
        for (name, v) in [
            ("lambda_cls", self.lambda_cls),
            ("lambda_ae", self.lambda_ae),
            ("lambda_pv", self.lambda_pv),
            ("alpha", self.alpha),
            ("beta", self.beta),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                problems.push(format!("{name} must be finite and non-negative"));
            }
        }
        if self.batch_size == 0 {
            problems.push("batch_size must be positive".to_string());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            problems.push("learning_rate must be positive".to_string());
        }
        if self.patience.is_some()
            && !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0)
        {
            problems.push("validation_fraction must lie in (0, 1)".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }
}

/// Per-feature standardization learned from training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaling {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl FeatureScaling {
    pub fn identity(n: usize) -> Self {
        Self {
            mean: vec![0.0; n],
            scale: vec![1.0; n],
        }
    }

    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::Domain("cannot fit scaling on zero rows".into()))?;
        let p = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; p];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; p];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, scale })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DpnnModel {
    pub hyper: Hyperparams,
    pub schema: FeatureSchema,
    pub treatments: TreatmentSet,
    pub scaling: FeatureScaling,
    pub params: DpnnParams,
}

fn widths(first: usize, hidden: &[usize], last: usize) -> Vec<usize> {
    std::iter::once(first)
        .chain(hidden.iter().copied())
        .chain(std::iter::once(last))
        .collect()
}

/// Builds a freshly initialized network.
///
/// With `seed_rows` (already scaled), prototypes start at the encodings of
/// `m` distinct rows chosen per `h.prototype_init`; otherwise they are
/// standard normal draws.
pub fn init_model(
    h: &Hyperparams,
    schema: &FeatureSchema,
    treatments: &TreatmentSet,
    scaling: FeatureScaling,
    rng: &mut RngStream,
    seed_rows: Option<&[Vec<f64>]>,
) -> Result<DpnnModel> {
    h.validate()?;
    let p = schema.len();
    let (d, m, t) = (h.latent_dim, h.prototype_count, treatments.len());
    if scaling.mean.len() != p || scaling.scale.len() != p {
        return Err(Error::Shape("scaling does not match the schema".into()));
    }
    let encoder = Mlp::glorot(&widths(p, &h.encoder_hidden, d), rng);
    let decoder = Mlp::glorot(&widths(d, &h.decoder_hidden, p), rng);
    let classifier = Mlp::glorot(&widths(m, &h.classifier_hidden, t), rng);
    let mut prototypes = DenseMatrix::zeros(m, d);
    match seed_rows {
        Some(rows) if !rows.is_empty() => {
            for r in rows {
                encoder.check_input(r)?;
            }
            let chosen = match h.prototype_init {
                PrototypeInit::Uniform => rng.sample_distinct(rows.len(), m),
                PrototypeInit::Spread => {
                    let codes: Vec<Vec<f64>> = rows.iter().map(|r| encoder.forward(r)).collect();
                    spread_indices(&codes, m, rng)
                }
            };
            for j in 0..m {
                let row = match chosen.get(j) {
                    Some(&i) => encoder.forward(&rows[i]),
                    None => (0..d).map(|_| rng.normal()).collect(),
                };
                prototypes.row_mut(j).copy_from_slice(&row);
            }
        }
        _ => {
            for v in prototypes.as_mut_slice() {
                *v = rng.normal();
            }
        }
    }
    Ok(DpnnModel {
        hyper: h.clone(),
        schema: schema.clone(),
        treatments: treatments.clone(),
        scaling,
        params: DpnnParams {
            encoder,
            decoder,
            classifier,
            prototypes,
        },
    })
}

/// Distinct row indices drawn one at a time with probability proportional to
/// the squared distance from the nearest already chosen code; the first is
/// uniform.
fn spread_indices(codes: &[Vec<f64>], k: usize, rng: &mut RngStream) -> Vec<usize> {
    let n = codes.len();
    let mut chosen: Vec<usize> = Vec::with_capacity(k.min(n));
    if n == 0 || k == 0 {
        return chosen;
    }
    chosen.push(rng.below(n));
    let mut nearest: Vec<f64> = codes
        .iter()
        .map(|c| sq_dist(c, &codes[chosen[0]]))
        .collect();
    while chosen.len() < k.min(n) {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            rng.categorical(&nearest)
        } else {
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.below(free.len())]
        };
        chosen.push(next);
        for (w, c) in nearest.iter_mut().zip(codes) {
            *w = w.min(sq_dist(c, &codes[next]));
        }
    }
    chosen
}

pub(crate) fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

impl DpnnModel {
    pub fn latent_dim(&self) -> usize {
        self.params.prototypes.cols()
    }

    pub fn prototype_count(&self) -> usize {
        self.params.prototypes.rows()
    }

    pub fn treatment_count(&self) -> usize {
        self.params.classifier.outputs()
    }

    pub fn scale(&self, raw: &[f64]) -> Result<Vec<f64>> {
        if raw.len() != self.scaling.mean.len() {
            return Err(Error::Shape(format!(
                "expected {} features, got {}",
                self.scaling.mean.len(),
                raw.len()
            )));
        }
        Ok(self.scaling.apply(raw))
    }

    /// Latent code of an already scaled feature vector.
    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.params.encoder.check_input(x)?;
        Ok(self.params.encoder.forward(x))
    }

    pub fn decode(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.params.decoder.check_input(z)?;
        Ok(self.params.decoder.forward(z))
    }

    /// Squared Euclidean distance from `z` to each prototype.
    pub fn proto_distances(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.latent_dim() {
            return Err(Error::Shape(format!(
                "latent vector of length {} for latent dim {}",
                z.len(),
                self.latent_dim()
            )));
        }
        Ok(distances_to(&self.params.prototypes, z))
    }

    /// Remission probability per treatment from prototype distances.
    pub fn classify(&self, distances: &[f64]) -> Result<Vec<f64>> {
        self.params.classifier.check_input(distances)?;
        Ok(self
            .params
            .classifier
            .forward(distances)
            .into_iter()
            .map(sigmoid)
            .collect())
    }

    /// Per-treatment remission probabilities for a scaled feature vector.
    pub fn predict_probs(&self, x: &[f64]) -> Result<Vec<f64>> {
        let z = self.encode(x)?;
        self.classify(&self.proto_distances(&z)?)
    }

    pub fn predict_raw(&self, raw: &[f64]) -> Result<Vec<f64>> {
        self.predict_probs(&self.scale(raw)?)
    }

    pub fn encode_raw(&self, raw: &[f64]) -> Result<Vec<f64>> {
        self.encode(&self.scale(raw)?)
    }

    /// Row `j` is the classifier output for a patient sitting exactly on prototype `j`.
    pub fn prototype_outcome_matrix(&self) -> DenseMatrix<f64> {
        let p = &self.params.prototypes;
        let t = self.treatment_count();
        let mut q = DenseMatrix::zeros(p.rows(), t);
        for j in 0..p.rows() {
            let s = distances_to(p, p.row(j));
            let probs = self.params.classifier.forward(&s);
            for (dst, u) in q.row_mut(j).iter_mut().zip(probs) {
                *dst = sigmoid(u);
            }
        }
        q
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }
}

pub(crate) fn distances_to(prototypes: &DenseMatrix<f64>, z: &[f64]) -> Vec<f64> {
    (0..prototypes.rows())
        .map(|j| sq_dist(z, prototypes.row(j)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(h: &Hyperparams, seed: u64) -> DpnnModel {
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

    fn random_x(rng: &mut RngStream) -> Vec<f64> {
        (0..19).map(|_| rng.normal()).collect()
    }

    #[test]
    fn shapes_and_determinism() {
        let h = Hyperparams {
            latent_dim: 4,
            ..Hyperparams::default()
        };
        let a = small(&h, 3);
        assert_eq!(a.params.prototypes.shape(), (3, 4));
        assert_eq!(a.treatment_count(), 8);
        assert_eq!(a, small(&h, 3));
        assert_ne!(a, small(&h, 4));
    }

    #[test]
    fn prototypes_from_data_are_encodings() {
        let mut rng = RngStream::new(10);
        let rows: Vec<Vec<f64>> = (0..30).map(|_| random_x(&mut rng)).collect();
        let m = init_model(
            &Hyperparams::default(),
            &FeatureSchema::standard(),
            &TreatmentSet::standard(),
            FeatureScaling::identity(19),
            &mut RngStream::new(1),
            Some(&rows),
        )
        .unwrap();
        for j in 0..3 {
            let p = m.params.prototypes.row(j);
            let hit = rows.iter().any(|r| m.encode(r).unwrap() == p);
            assert!(hit, "prototype {j} is not the encoding of any row");
        }
        let distinct: std::collections::BTreeSet<Vec<u64>> = (0..3)
            .map(|j| {
                m.params
                    .prototypes
                    .row(j)
                    .iter()
                    .map(|v| v.to_bits())
                    .collect()
            })
            .collect();
        assert_eq!(distinct.len(), 3);
    }

    #[test]
    fn zero_encoder_returns_bias() {
        let mut m = small(&Hyperparams::default(), 1);
        m.params.encoder = m.params.encoder.zeros_like();
        let bias = vec![0.5, -0.25, 0.0, 1.0, 2.0, -2.0, 0.1, 0.2];
        m.params.encoder.layers.last_mut().unwrap().bias = bias.clone();
        assert_eq!(m.encode(&[0.7; 19]).unwrap(), bias);
        assert!(m.encode(&[0.0; 18]).is_err());
    }

    #[test]
    fn identity_linear_autoencoder() {
        let h = Hyperparams {
            latent_dim: 19,
            encoder_hidden: vec![],
            decoder_hidden: vec![],
            ..Hyperparams::default()
        };
        let mut m = small(&h, 2);
        m.params.encoder.layers[0] = Dense {
            weight: DenseMatrix::identity(19),
            bias: vec![0.0; 19],
        };
        m.params.decoder.layers[0] = Dense {
            weight: DenseMatrix::identity(19),
            bias: vec![0.0; 19],
        };
        let x = random_x(&mut RngStream::new(5));
        assert_eq!(m.decode(&m.encode(&x).unwrap()).unwrap(), x);
    }

    #[test]
    fn encode_is_continuous() {
        let m = small(&Hyperparams::default(), 6);
        let x = random_x(&mut RngStream::new(6));
        let z = m.encode(&x).unwrap();
        let mut prev = f64::INFINITY;
        for k in 1..8 {
            let delta = 10f64.powi(-k);
            let xd: Vec<f64> = x.iter().map(|v| v + delta).collect();
            let gap = crate::numerics::sq_dist(&m.encode(&xd).unwrap(), &z).sqrt();
            assert!(gap < prev);
            prev = gap;
        }
        assert!(prev < 1e-5);
    }

    #[test]
    fn distances_match_direct_sum() {
        let m = small(
            &Hyperparams {
                prototype_count: 5,
                ..Hyperparams::default()
            },
            7,
        );
        let mut rng = RngStream::new(7);
        let z: Vec<f64> = (0..8).map(|_| rng.normal()).collect();
        let s = m.proto_distances(&z).unwrap();
        for (j, sj) in s.iter().enumerate() {
            let mut acc = 0.0;
            for (k, zk) in z.iter().enumerate() {
                let diff = zk - m.params.prototypes[(j, k)];
                acc += diff * diff;
            }
            assert!((sj - acc).abs() < 1e-12);
            assert!(*sj >= 0.0);
        }
        let p1 = m.params.prototypes.row(1).to_vec();
        assert_eq!(m.proto_distances(&p1).unwrap()[1], 0.0);
        let one = small(
            &Hyperparams {
                prototype_count: 1,
                ..Hyperparams::default()
            },
            7,
        );
        assert_eq!(one.proto_distances(&z).unwrap().len(), 1);
    }

    #[test]
    fn zero_classifier_is_half() {
        let mut m = small(&Hyperparams::default(), 8);
        m.params.classifier = m.params.classifier.zeros_like();
        let p = m.predict_probs(&[0.3; 19]).unwrap();
        assert_eq!(p, vec![0.5; 8]);
        let q = m.prototype_outcome_matrix();
        assert!(q.as_slice().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn probabilities_strictly_inside_unit_interval() {
        let m = small(&Hyperparams::default(), 9);
        let mut rng = RngStream::new(9);
        for _ in 0..200 {
            let x: Vec<f64> = (0..19).map(|_| 3.0 * rng.normal()).collect();
            for p in m.predict_probs(&x).unwrap() {
                assert!(p > 0.0 && p < 1.0);
            }
        }
    }

    #[test]
    fn prototype_permutation_symmetry() {
        let h = Hyperparams {
            prototype_count: 4,
            ..Hyperparams::default()
        };
        let m = small(&h, 11);
        let perm = [2usize, 0, 3, 1];
        let mut pm = m.clone();
        for (dst, &src) in perm.iter().enumerate() {
            pm.params
                .prototypes
                .row_mut(dst)
                .copy_from_slice(m.params.prototypes.row(src));
            let first = &m.params.classifier.layers[0].weight;
            for o in 0..first.rows() {
                pm.params.classifier.layers[0].weight[(o, dst)] = first[(o, src)];
            }
        }
        let mut rng = RngStream::new(12);
        for _ in 0..50 {
            let x = random_x(&mut rng);
            let a = m.predict_probs(&x).unwrap();
            let b = pm.predict_probs(&x).unwrap();
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn outcome_matrix_matches_predict_path() {
        let m = small(&Hyperparams::default(), 13);
        let q = m.prototype_outcome_matrix();
        for j in 0..3 {
            let z = m.params.prototypes.row(j).to_vec();
            let s = m.proto_distances(&z).unwrap();
            assert_eq!(s[j], 0.0);
            assert_eq!(m.classify(&s).unwrap(), q.row(j));
        }
    }

    #[test]
    fn flat_round_trip() {
        let m = small(&Hyperparams::default(), 14);
        let theta = m.params.to_flat();
        let mut other = small(&Hyperparams::default(), 15);
        other.params.set_flat(&theta).unwrap();
        assert_eq!(other.params, m.params);
        assert!(other.params.set_flat(&theta[1..]).is_err());
    }

    #[test]
    fn hyperparam_validation() {
        let bad = Hyperparams {
            prototype_count: 0,
            lambda_ae: -1.0,
            ..Hyperparams::default()
        };
        match bad.validate() {
            Err(Error::Validation(v)) => assert_eq!(v.len(), 2),
            other => panic!("{other:?}"),
        }
    }
}
