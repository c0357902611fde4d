use serde::{Deserialize, Serialize};

use super::Mlp;
use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, ParamSlot};

/// Every trainable tensor of the network. The same layout doubles as the
/// gradient container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpnnParams {
    pub encoder: Mlp,
    pub decoder: Mlp,
    pub classifier: Mlp,
    /// `m x d`, one prototype per row.
    pub prototypes: DenseMatrix<f64>,
}

impl DpnnParams {
    pub fn zeros_like(&self) -> Self {
        Self {
            encoder: self.encoder.zeros_like(),
            decoder: self.decoder.zeros_like(),
            classifier: self.classifier.zeros_like(),
            prototypes: DenseMatrix::zeros(self.prototypes.rows(), self.prototypes.cols()),
        }
    }

    /// Named views in a fixed order: encoder, decoder, classifier layers
    /// (weight then bias), then prototypes.
    pub fn groups(&self) -> Vec<(String, &[f64])> {
        let mut out = Vec::new();
        for (net_name, net) in self.nets() {
            for (l, layer) in net.layers.iter().enumerate() {
                out.push((format!("{net_name}.{l}.weight"), layer.weight.as_slice()));
                out.push((format!("{net_name}.{l}.bias"), layer.bias.as_slice()));
            }
        }
        out.push(("prototypes".to_string(), self.prototypes.as_slice()));
        out
    }

    pub fn slots_mut(&mut self) -> Vec<ParamSlot<'_, f64>> {
        let mut out = Vec::new();
        for (net_name, net) in [
            ("encoder", &mut self.encoder),
            ("decoder", &mut self.decoder),
            ("classifier", &mut self.classifier),
        ] {
            for (l, layer) in net.layers.iter_mut().enumerate() {
                out.push(ParamSlot {
                    name: format!("{net_name}.{l}.weight"),
                    values: layer.weight.as_mut_slice(),
                });
                out.push(ParamSlot {
                    name: format!("{net_name}.{l}.bias"),
                    values: layer.bias.as_mut_slice(),
                });
            }
        }
        out.push(ParamSlot {
            name: "prototypes".to_string(),
            values: self.prototypes.as_mut_slice(),
        });
        out
    }

    fn nets(&self) -> [(&'static str, &Mlp); 3] {
        [
            ("encoder", &self.encoder),
            ("decoder", &self.decoder),
            ("classifier", &self.classifier),
        ]
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        self.groups().iter().map(|(_, g)| g.len()).collect()
    }

    pub fn len(&self) -> usize {
        self.group_sizes().iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.groups()
            .into_iter()
            .flat_map(|(_, g)| g.to_vec())
            .collect()
    }

    pub fn set_flat(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.len() {
            return Err(Error::Shape(format!(
                "{} values for {} parameters",
                theta.len(),
                self.len()
            )));
        }
        let mut k = 0;
        for slot in self.slots_mut() {
            let n = slot.values.len();
            slot.values.copy_from_slice(&theta[k..k + n]);
            k += n;
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.groups()
            .iter()
            .all(|(_, g)| g.iter().all(|v| v.is_finite()))
    }
}
