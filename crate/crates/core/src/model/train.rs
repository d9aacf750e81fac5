use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{AttentionProfile, MilModel, ModelConfig};
use crate::data::{Bag, Dataset};
use crate::error::{Error, Result};
use crate::eval::{accuracy, iauc_of_run};
use crate::nn::{AdamConfig, AdamState, Matrix};
use crate::rng::derived_rng;

const SHUFFLE_STREAM: u64 = 0x2;

/// One trained realisation of a configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_id: String,
    pub seed: u64,
    /// Accuracy on the validation split after the final epoch.
    pub validation_accuracy: f64,
    pub test_accuracy: f64,
    /// Validation accuracy after every epoch (not used for selection).
    pub validation_curve: Vec<f64>,
    pub final_train_loss: f64,
    /// `None` only when the test split has no eligible bag.
    pub test_iauc: Option<f64>,
    pub training_diverged: bool,
    /// One profile per test bag, in test-split order. Persisted separately.
    #[serde(skip)]
    pub test_attention: Vec<AttentionProfile>,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub predictions: Vec<u8>,
    pub attention: Vec<AttentionProfile>,
}

impl Evaluation {
    pub fn accuracy(&self, bags: &[Bag]) -> Result<f64> {
        let labels: Vec<u8> = bags.iter().map(|b| b.label).collect();
        accuracy(&self.predictions, &labels)
    }
}

/// Argmax predictions and attention for every bag.
pub fn evaluate(model: &MilModel, bags: &[Bag]) -> Result<Evaluation> {
    let mut predictions = Vec::with_capacity(bags.len());
    let mut attention = Vec::with_capacity(bags.len());
    for bag in bags {
        let (logits, profile) = model.predict_bag(&bag.instances)?;
        predictions.push((logits[1] > logits[0]) as u8);
        attention.push(profile);
    }
    Ok(Evaluation {
        predictions,
        attention,
    })
}

fn validation_accuracy(model: &MilModel, bags: &[Bag]) -> Result<f64> {
    if bags.is_empty() {
        return Ok(0.0);
    }
    evaluate(model, bags)?.accuracy(bags)
}

/// Trains `config` from `seed` for the full epoch budget with shuffled
/// mini-batches and Adam, then evaluates on the validation and test splits.
///
/// A non-finite loss or gradient stops training; the model is rolled back
/// to its last finite parameters and the record is flagged as diverged.
pub fn train(
    config: &ModelConfig,
    config_id: &str,
    seed: u64,
    data: &Dataset,
) -> Result<(MilModel, RunRecord)> {
    if data.train.is_empty() || data.test.is_empty() {
        return Err(Error::Data("training needs non-empty train and test splits".into()));
    }
    let config = config.clone().normalized();
    let mut model = MilModel::init(&config, seed)?;
    if model.input_dim() != data.input_dim() {
        return Err(Error::Dimension {
            context: "train input_dim",
            expected: model.input_dim(),
            actual: data.input_dim(),
        });
    }
    let mut adam = AdamState::new(
        AdamConfig::new(config.learning_rate, config.weight_decay),
        &model.param_shapes(),
    )?;
    let mut rng = derived_rng(seed, &[SHUFFLE_STREAM]);
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let mut curve = Vec::with_capacity(config.epochs);
    let mut diverged = false;
    let mut last_loss = f64::NAN;

    'epochs: for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let bags: Vec<&Matrix> = chunk.iter().map(|&i| &data.train[i].instances).collect();
            let labels: Vec<usize> = chunk.iter().map(|&i| data.train[i].label as usize).collect();
            let snapshot = model.to_flat();
            let step = model.loss_and_grads(&bags, &labels).and_then(|(loss, grads)| {
                let slices = grads.slices();
                adam.step(&mut model.params_mut(), &slices)?;
                Ok(loss)
            });
            match step {
                Ok(loss) if model.is_finite() => epoch_loss += loss * chunk.len() as f64,
                Ok(_) | Err(Error::Diverged(_)) => {
                    model.set_flat(&snapshot)?;
                    diverged = true;
                    break 'epochs;
                }
                Err(e) => return Err(e),
            }
        }
        last_loss = epoch_loss / data.train.len() as f64;
        curve.push(validation_accuracy(&model, &data.validation)?);
    }

    let validation_acc = match curve.last() {
        Some(&a) if !diverged => a,
        _ => validation_accuracy(&model, &data.validation)?,
    };
    let test = evaluate(&model, &data.test)?;
    let test_iauc = match iauc_of_run(&test.attention, &data.test, data.problem) {
        Ok(v) => Some(v),
        Err(Error::UndefinedMetric(_)) => None,
        Err(e) => return Err(e),
    };
    let record = RunRecord {
        config_id: config_id.to_string(),
        seed,
        validation_accuracy: validation_acc,
        test_accuracy: test.accuracy(&data.test)?,
        validation_curve: curve,
        final_train_loss: last_loss,
        test_iauc,
        training_diverged: diverged,
        test_attention: test.attention,
    };
    Ok((model, record))
}
