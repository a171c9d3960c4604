//! Two-layer prediction cascade.
//!
//! Layer 1 is the initial rejection model over the observed features.
//! Samples it accepts are labeled immediately. Samples it rejects are
//! re-scored by the augmented model, which sees the observed features
//! plus the selected candidate block; a second rejection becomes the
//! final answer `unknown`. The candidate block is fetched lazily, so
//! samples decided at layer 1 never pay for feature acquisition.

use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::error::{Error, Result};
use crate::rejection::{predict, Decision, Outcome, Prediction, RejectionModel};

/// Which layer produced the final outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    Initial,
    Augmented,
}

impl std::fmt::Display for Layer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Layer::Initial => "initial",
            Layer::Augmented => "augmented",
        })
    }
}

/// Initial and augmented models bound to one selected candidate feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeModel {
    initial: RejectionModel,
    augmented: RejectionModel,
    feature_id: usize,
    feature_name: String,
    /// Column names of the selected feature block, in the order the
    /// augmented model expects them appended to the observed row.
    feature_columns: Vec<String>,
}

impl CascadeModel {
    pub fn initial(&self) -> &RejectionModel {
        &self.initial
    }

    pub fn augmented(&self) -> &RejectionModel {
        &self.augmented
    }

    pub fn feature_id(&self) -> usize {
        self.feature_id
    }

    pub fn feature_name(&self) -> &str {
        &self.feature_name
    }

    pub fn feature_columns(&self) -> &[String] {
        &self.feature_columns
    }

    /// Observed input width (layer 1).
    pub fn observed_dim(&self) -> usize {
        self.initial.dimension()
    }

    /// Width of the selected feature block (layer 2 minus layer 1).
    pub fn feature_width(&self) -> usize {
        self.feature_columns.len()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let model: CascadeModel = serde_json::from_str(json)?;
        validate_dims(
            &model.initial,
            &model.augmented,
            model.feature_columns.len(),
        )?;
        Ok(model)
    }
}

fn validate_dims(
    initial: &RejectionModel,
    augmented: &RejectionModel,
    feature_width: usize,
) -> Result<()> {
    if feature_width == 0 {
        return Err(Error::InvalidInput(
            "cascade feature block has zero width".into(),
        ));
    }
    let expected = initial.dimension() + feature_width;
    if augmented.dimension() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            actual: augmented.dimension(),
        });
    }
    Ok(())
}

/// Assembles a cascade, checking that the augmented model's input width
/// is exactly the observed width plus the feature block width. The two
/// models may use different thresholds and bandwidths.
pub fn build_cascade(
    initial: RejectionModel,
    augmented: RejectionModel,
    feature_id: usize,
    feature_name: String,
    feature_columns: Vec<String>,
) -> Result<CascadeModel> {
    validate_dims(&initial, &augmented, feature_columns.len())?;
    Ok(CascadeModel {
        initial,
        augmented,
        feature_id,
        feature_name,
        feature_columns,
    })
}

/// Prediction trail of one sample through the cascade.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadePrediction {
    pub outcome: Outcome,
    pub layer: Layer,
    pub initial: Prediction,
    /// Present only when layer 1 rejected and layer 2 ran.
    pub augmented: Option<Prediction>,
}

/// Runs one sample through the cascade. `fetch_block` supplies the
/// selected feature's values and is invoked only when layer 1 rejects;
/// its result must match the cascade's feature width.
pub fn cascade_predict<F>(
    model: &CascadeModel,
    observed: &[f64],
    fetch_block: F,
) -> Result<CascadePrediction>
where
    F: FnOnce() -> Result<Vec<f64>>,
{
    let first = predict(&model.initial, observed)?;
    match first.decision {
        Decision::Positive => Ok(CascadePrediction {
            outcome: Outcome::Positive,
            layer: Layer::Initial,
            initial: first,
            augmented: None,
        }),
        Decision::Negative => Ok(CascadePrediction {
            outcome: Outcome::Negative,
            layer: Layer::Initial,
            initial: first,
            augmented: None,
        }),
        Decision::Reject => {
            let block = fetch_block()?;
            if block.len() != model.feature_width() {
                return Err(Error::DimensionMismatch {
                    expected: model.feature_width(),
                    actual: block.len(),
                });
            }
            let mut row = observed.to_vec();
            row.extend_from_slice(&block);
            let second = predict(&model.augmented, &row)?;
            let outcome = match second.decision {
                Decision::Positive => Outcome::Positive,
                Decision::Negative => Outcome::Negative,
                Decision::Reject => Outcome::Unknown,
            };
            Ok(CascadePrediction {
                outcome,
                layer: Layer::Augmented,
                initial: first,
                augmented: Some(second),
            })
        }
    }
}

/// Writes batch predictions as CSV with one row per sample:
/// `sample_id,layer_decided,label,h1,g1,h2,g2` (`h2`/`g2` empty for
/// samples decided at layer 1).
pub fn write_batch_csv<W: Write>(
    results: &[(String, CascadePrediction)],
    mut out: W,
) -> Result<()> {
    writeln!(out, "sample_id,layer_decided,label,h1,g1,h2,g2")?;
    for (id, p) in results {
        let (h2, g2) = match &p.augmented {
            Some(a) => (format!("{}", a.h_value), format!("{}", a.g_value)),
            None => (String::new(), String::new()),
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            id, p.layer, p.outcome, p.initial.h_value, p.initial.g_value, h2, g2
        )?;
    }
    Ok(())
}
