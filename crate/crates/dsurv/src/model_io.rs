//! Model persistence: a single self-describing JSON document.
//!
//! The file carries a schema version, the grid boundaries as a plain list of
//! day values, the layer specs, and every weight at full precision (numbers
//! are printed shortest-round-trip, so reloading reproduces predictions
//! bitwise).

use crate::error::{Error, Result};
use crate::nnet::{DenseLayer, LayerKind, LayerSpec, ModelParams};
use crate::timegrid::TimeGrid;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const MODEL_SCHEMA: &str = "dsurv-model/1";

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    schema: String,
    grid: TimeGrid,
    specs: Vec<LayerSpec>,
    layers: Vec<LayerFile>,
    baseline_logits: Option<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LayerFile {
    /// Row-major weights, one inner vec per input unit.
    weights: Vec<Vec<f64>>,
    bias: Option<Vec<f64>>,
}

/// Write a model to disk.
pub fn save_model(path: &Path, params: &ModelParams) -> Result<()> {
    let file = ModelFile {
        schema: MODEL_SCHEMA.to_string(),
        grid: params.grid().clone(),
        specs: params.specs().to_vec(),
        layers: params
            .layers
            .iter()
            .map(|l| LayerFile {
                weights: l.weights.rows().into_iter().map(|r| r.to_vec()).collect(),
                bias: l.bias.as_ref().map(|b| b.to_vec()),
            })
            .collect(),
        baseline_logits: params.baseline_logits().map(|g| g.to_vec()),
    };
    let text = serde_json::to_string_pretty(&file)
        .map_err(|e| Error::ModelParse(format!("serialize: {e}")))?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Read a model back; the inverse of [`save_model`].
pub fn load_model(path: &Path) -> Result<ModelParams> {
    let text =
        std::fs::read_to_string(path).map_err(|e| crate::dataio::with_path(e, path))?;
    load_model_from_str(&text)
}

pub fn load_model_from_str(text: &str) -> Result<ModelParams> {
    // Peek at the schema first so a version mismatch is reported as such
    // even if the rest of the layout changed.
    #[derive(Deserialize)]
    struct SchemaOnly {
        schema: String,
    }
    let schema: SchemaOnly =
        serde_json::from_str(text).map_err(|e| Error::ModelParse(e.to_string()))?;
    if schema.schema != MODEL_SCHEMA {
        return Err(Error::ModelVersion {
            found: schema.schema,
            supported: MODEL_SCHEMA.to_string(),
        });
    }
    let file: ModelFile =
        serde_json::from_str(text).map_err(|e| Error::ModelParse(e.to_string()))?;
    rebuild(file)
}

fn rebuild(file: ModelFile) -> Result<ModelParams> {
    // Cross-check stored weights against the specs before rebuilding.
    let dense_specs: Vec<&LayerSpec> = file
        .specs
        .iter()
        .filter(|s| s.kind != LayerKind::PropHazHead)
        .collect();
    if dense_specs.len() != file.layers.len() {
        return Err(Error::ModelParse(format!(
            "{} dense specs but {} stored layers",
            dense_specs.len(),
            file.layers.len()
        )));
    }
    let mut layers = Vec::with_capacity(file.layers.len());
    for (spec, stored) in dense_specs.iter().zip(file.layers) {
        if stored.weights.len() != spec.input_dim
            || stored.weights.iter().any(|r| r.len() != spec.output_dim)
        {
            return Err(Error::ModelParse(format!(
                "stored weights do not match the {}x{} spec",
                spec.input_dim, spec.output_dim
            )));
        }
        let mut weights = Array2::zeros((spec.input_dim, spec.output_dim));
        for (i, row) in stored.weights.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                weights[[i, j]] = v;
            }
        }
        let bias = match (&stored.bias, spec.use_bias) {
            (Some(b), true) if b.len() == spec.output_dim => Some(Array1::from(b.clone())),
            (None, false) => None,
            _ => {
                return Err(Error::ModelParse(
                    "stored bias does not match the layer spec".into(),
                ))
            }
        };
        layers.push(DenseLayer {
            weights,
            bias,
            activation: spec.activation,
        });
    }
    let baseline_logits = file.baseline_logits.map(Array1::from);
    ModelParams::from_parts(file.specs, layers, baseline_logits, file.grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::{forward, layer_stack, train, HeadKind, TrainConfig};
    use crate::timegrid::SurvivalRecord;
    use ndarray::array;

    fn trained(head: HeadKind) -> ModelParams {
        let grid = TimeGrid::from_boundaries(vec![100.0, 250.0, 400.0]).unwrap();
        let records: Vec<SurvivalRecord> = (0..60)
            .map(|i| {
                SurvivalRecord::new(
                    (i * 31 % 450) as f64,
                    i % 3 != 0,
                    vec![(i % 2) as f64, (i % 5) as f64 / 4.0],
                )
            })
            .collect();
        let specs = layer_stack(2, &[4], head, 3);
        let config = TrainConfig {
            epochs: 20,
            batch_size: 16,
            rng_seed: 8,
            ..TrainConfig::default()
        };
        train(&records, &grid, &specs, &config).unwrap().params
    }

    #[test]
    fn round_trip_reproduces_predictions_bitwise() {
        for head in [HeadKind::Flexible, HeadKind::ProportionalHazards] {
            let params = trained(head);
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("model.json");
            save_model(&path, &params).unwrap();
            let loaded = load_model(&path).unwrap();
            assert_eq!(params, loaded);

            let x = array![[0.0, 0.25], [1.0, 0.75], [1.0, 0.0]];
            let a = forward(&params, &x).unwrap();
            let b = forward(&loaded, &x).unwrap();
            for (ca, cb) in a.iter().zip(&b) {
                assert_eq!(ca.cond_surv, cb.cond_surv);
                assert_eq!(ca.cum_surv, cb.cum_surv);
            }
        }
    }

    #[test]
    fn unknown_schema_version_names_both() {
        let params = trained(HeadKind::Flexible);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_model(&path, &params).unwrap();
        let text = std::fs::read_to_string(&path)
            .unwrap()
            .replace(MODEL_SCHEMA, "dsurv-model/999");
        match load_model_from_str(&text) {
            Err(Error::ModelVersion { found, supported }) => {
                assert_eq!(found, "dsurv-model/999");
                assert_eq!(supported, MODEL_SCHEMA);
            }
            other => panic!("expected version error, got {other:?}"),
        }
    }

    #[test]
    fn truncated_file_is_a_parse_error() {
        let params = trained(HeadKind::Flexible);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_model(&path, &params).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let truncated = &text[..text.len() / 2];
        assert!(matches!(
            load_model_from_str(truncated),
            Err(Error::ModelParse(_))
        ));
    }
}
