//! JSON model files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dense, DpnnModel, DpnnParams, FeatureScaling, Hyperparams, Mlp};
use crate::dataio::{FeatureSchema, TreatmentSet};
use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerFile {
    weight: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightsFile {
    encoder: Vec<LayerFile>,
    decoder: Vec<LayerFile>,
    classifier: Vec<LayerFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: u32,
    hyperparams: Hyperparams,
    feature_schema: FeatureSchema,
    treatments: TreatmentSet,
    scaling: FeatureScaling,
    weights: WeightsFile,
    prototypes: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<serde_json::Value>,
}

fn net_to_file(net: &Mlp) -> Vec<LayerFile> {
    net.layers
        .iter()
        .map(|l| LayerFile {
            weight: l.weight.to_rows(),
            bias: l.bias.clone(),
        })
        .collect()
}

fn matrix_from(rows: &[Vec<f64>], what: &str) -> Result<DenseMatrix<f64>> {
    DenseMatrix::from_rows(rows).map_err(|e| Error::Format(format!("{what}: {e}")))
}

fn net_from_file(layers: &[LayerFile], name: &str) -> Result<Mlp> {
    let mut out = Vec::with_capacity(layers.len());
    for (i, l) in layers.iter().enumerate() {
        let weight = matrix_from(&l.weight, &format!("{name}.{i}.weight"))?;
        if weight.rows() != l.bias.len() {
            return Err(Error::Format(format!(
                "{name}.{i}: {} weight rows but {} biases",
                weight.rows(),
                l.bias.len()
            )));
        }
        if let Some(prev) = out.last().map(Dense::outputs) {
            if prev != weight.cols() {
                return Err(Error::Format(format!(
                    "{name}.{i}: expects {} inputs, previous layer gives {prev}",
                    weight.cols()
                )));
            }
        }
        out.push(Dense {
            weight,
            bias: l.bias.clone(),
        });
    }
    if out.is_empty() {
        return Err(Error::Format(format!("{name} has no layers")));
    }
    Ok(Mlp { layers: out })
}

pub fn model_to_json(model: &DpnnModel) -> Result<String> {
    model_to_json_with(model, None)
}

/// Serializes `model`, embedding an opaque `provenance` object that loading
/// ignores.
pub fn model_to_json_with(
    model: &DpnnModel,
    provenance: Option<&serde_json::Value>,
) -> Result<String> {
    let file = ModelFile {
        format_version: FORMAT_VERSION,
        hyperparams: model.hyper.clone(),
        feature_schema: model.schema.clone(),
        treatments: model.treatments.clone(),
        scaling: model.scaling.clone(),
        weights: WeightsFile {
            encoder: net_to_file(&model.params.encoder),
            decoder: net_to_file(&model.params.decoder),
            classifier: net_to_file(&model.params.classifier),
        },
        prototypes: model.params.prototypes.to_rows(),
        provenance: provenance.cloned(),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn model_from_json(text: &str) -> Result<DpnnModel> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    match value.get("format_version").and_then(|v| v.as_u64()) {
        Some(v) if v == u64::from(FORMAT_VERSION) => {}
        Some(v) => {
            return Err(Error::Format(format!(
                "format version {v} is not supported (expected {FORMAT_VERSION})"
            )))
        }
        None => return Err(Error::Format("missing format_version".into())),
    }
    let file: ModelFile =
        serde_json::from_value(value).map_err(|e| Error::Format(e.to_string()))?;
    let params = DpnnParams {
        encoder: net_from_file(&file.weights.encoder, "encoder")?,
        decoder: net_from_file(&file.weights.decoder, "decoder")?,
        classifier: net_from_file(&file.weights.classifier, "classifier")?,
        prototypes: matrix_from(&file.prototypes, "prototypes")?,
    };
    file.feature_schema
        .validate()
        .map_err(|e| Error::Format(e.to_string()))?;
    let (p, t) = (file.feature_schema.len(), file.treatments.len());
    let (m, d) = params.prototypes.shape();
    let checks = [
        (
            params.encoder.inputs() == p,
            "encoder input width differs from the schema",
        ),
        (
            params.encoder.outputs() == d,
            "encoder output width differs from the prototypes",
        ),
        (
            params.decoder.inputs() == d,
            "decoder input width differs from the latent dim",
        ),
        (
            params.decoder.outputs() == p,
            "decoder output width differs from the schema",
        ),
        (
            params.classifier.inputs() == m,
            "classifier input width differs from the prototype count",
        ),
        (
            params.classifier.outputs() == t,
            "classifier output width differs from the treatment count",
        ),
        (
            file.scaling.mean.len() == p && file.scaling.scale.len() == p,
            "scaling length differs from the schema",
        ),
        (params.all_finite(), "non-finite weight"),
        (
            file.scaling.scale.iter().all(|s| s.is_finite() && *s > 0.0),
            "invalid scaling",
        ),
    ];
    if let Some((_, msg)) = checks.iter().find(|(ok, _)| !ok) {
        return Err(Error::Format((*msg).to_string()));
    }
    Ok(DpnnModel {
        hyper: file.hyperparams,
        schema: file.feature_schema,
        treatments: file.treatments,
        scaling: file.scaling,
        params,
    })
}

pub fn save_model(model: &DpnnModel, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, model_to_json(model)?)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<DpnnModel> {
    model_from_json(&std::fs::read_to_string(path)?)
}
