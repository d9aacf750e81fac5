//! Attention-pooled set classifier.
//!
//! A bag `X = {x_1..x_M}` is embedded instance-wise by the featurizer,
//! `z_m = φ(x_m)`, pooled with attention weights
//! `a_m = softmax_m(wᵀ tanh(V z_m))` into `Z = Σ a_m z_m`, and classified by
//! `ρ(Z)` into two logits.

mod attention;
mod train;

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

pub use attention::{attention_scores, AttentionProfile};
pub use train::{evaluate, train, Evaluation, RunRecord};

use crate::error::{Error, Result};
use crate::nn::{
    axpy, softmax, softmax_cross_entropy, Activation, Dense, Matrix, Mlp, MlpCache, MlpGrads,
};
use crate::rng::{mix_seed, Rng};
use attention::attention_logits;

const INIT_STREAM: u64 = 0x1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_dim: usize,
    /// K: width of the featurizer output and of all hidden layers.
    pub embed_dim: usize,
    /// L: rows of the attention matrix V.
    pub attention_dim: usize,
    pub featurizer_depth: usize,
    pub classifier_depth: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Bags per mini-batch.
    pub batch_size: usize,
    pub weight_decay: f64,
    #[serde(default = "default_activation")]
    pub hidden_activation: Activation,
}

fn default_activation() -> Activation {
    Activation::Relu
}

impl ModelConfig {
    /// With an identity featurizer the embedding width is the input width.
    pub fn normalized(mut self) -> Self {
        if self.featurizer_depth == 0 {
            self.embed_dim = self.input_dim;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("input_dim", self.input_dim),
            ("embed_dim", self.embed_dim),
            ("attention_dim", self.attention_dim),
            ("classifier_depth", self.classifier_depth),
            ("batch_size", self.batch_size),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.featurizer_depth == 0 && self.embed_dim != self.input_dim {
            return Err(Error::Config(format!(
                "identity featurizer requires embed_dim == input_dim ({} != {})",
                self.embed_dim, self.input_dim
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Config("weight_decay must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilModel {
    pub featurizer: Mlp,
    /// V, shape (L, K).
    pub attention_v: Matrix,
    /// w, length L.
    pub attention_w: Vec<f64>,
    pub classifier: Mlp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub featurizer: MlpGrads,
    pub attention_v: Matrix,
    pub attention_w: Vec<f64>,
    pub classifier: MlpGrads,
}

impl ModelGrads {
    pub fn zeros_like(model: &MilModel) -> Self {
        ModelGrads {
            featurizer: MlpGrads::zeros_like(&model.featurizer),
            attention_v: Matrix::zeros(model.attention_v.rows(), model.attention_v.cols()),
            attention_w: vec![0.0; model.attention_w.len()],
            classifier: MlpGrads::zeros_like(&model.classifier),
        }
    }

    pub fn add_scaled(&mut self, other: &ModelGrads, scale: f64) {
        self.featurizer.add_scaled(&other.featurizer, scale);
        axpy(scale, other.attention_v.data(), self.attention_v.data_mut());
        axpy(scale, &other.attention_w, &mut self.attention_w);
        self.classifier.add_scaled(&other.classifier, scale);
    }

    /// Same tensor order as [`MilModel::params`].
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = self.featurizer.slices();
        out.push(self.attention_v.data());
        out.push(&self.attention_w);
        out.extend(self.classifier.slices());
        out
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.slices().concat()
    }
}

/// Everything the backward pass of one bag needs.
#[derive(Debug, Clone)]
pub struct BagCache {
    featurizer: MlpCache,
    embeddings: Matrix,
    hidden: Matrix,
    attention: Vec<f64>,
    classifier: MlpCache,
}

#[derive(Debug, Clone)]
pub struct BagForward {
    pub logits: [f64; 2],
    pub attention: AttentionProfile,
    pub cache: BagCache,
}

impl MilModel {
    /// Deterministic Glorot initialisation from `(config, seed)`.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        let config = config.clone().normalized();
        config.validate()?;
        let mut rng = Rng::seed_from_u64(mix_seed(seed, &[INIT_STREAM]));
        let k = config.embed_dim;
        let act = config.hidden_activation;

        let featurizer = if config.featurizer_depth == 0 {
            Mlp::identity()
        } else {
            let mut dims = vec![config.input_dim];
            dims.extend(std::iter::repeat_n(k, config.featurizer_depth));
            Mlp::glorot(&dims, act, act, &mut rng)?
        };
        let v_layer = Dense::glorot(k, config.attention_dim, &mut rng);
        let w_layer = Dense::glorot(config.attention_dim, 1, &mut rng);
        let mut dims = vec![k; config.classifier_depth];
        dims.push(2);
        let classifier = Mlp::glorot(&dims, act, Activation::Identity, &mut rng)?;

        Ok(MilModel {
            featurizer,
            attention_v: v_layer.weight,
            attention_w: w_layer.weight.into_vec(),
            classifier,
        })
    }

    pub fn from_parts(
        featurizer: Mlp,
        attention_v: Matrix,
        attention_w: Vec<f64>,
        classifier: Mlp,
    ) -> Result<Self> {
        let k = featurizer.output_dim().unwrap_or(attention_v.cols());
        if attention_v.cols() != k {
            return Err(Error::Config(format!(
                "V has {} columns but the featurizer emits {k}",
                attention_v.cols()
            )));
        }
        if attention_w.len() != attention_v.rows() {
            return Err(Error::Config("w length differs from the rows of V".into()));
        }
        if classifier.input_dim() != Some(k) || classifier.output_dim() != Some(2) {
            return Err(Error::Config(format!(
                "classifier must map {k} -> 2, got {:?} -> {:?}",
                classifier.input_dim(),
                classifier.output_dim()
            )));
        }
        Ok(MilModel {
            featurizer,
            attention_v,
            attention_w,
            classifier,
        })
    }

    pub fn embed_dim(&self) -> usize {
        self.attention_v.cols()
    }

    pub fn attention_dim(&self) -> usize {
        self.attention_v.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.featurizer.input_dim().unwrap_or(self.embed_dim())
    }

    pub fn params(&self) -> Vec<&[f64]> {
        let mut out = self.featurizer.params();
        out.push(self.attention_v.data());
        out.push(&self.attention_w);
        out.extend(self.classifier.params());
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.featurizer.params_mut();
        out.push(self.attention_v.data_mut());
        out.push(&mut self.attention_w);
        out.extend(self.classifier.params_mut());
        out
    }

    pub fn param_shapes(&self) -> Vec<usize> {
        self.params().iter().map(|p| p.len()).collect()
    }

    pub fn num_params(&self) -> usize {
        self.param_shapes().iter().sum()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.params().concat()
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::Dimension {
                context: "MilModel::set_flat",
                expected: self.num_params(),
                actual: flat.len(),
            });
        }
        let mut offset = 0;
        for p in self.params_mut() {
            p.copy_from_slice(&flat[offset..offset + p.len()]);
            offset += p.len();
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|p| p.iter().all(|v| v.is_finite()))
    }

    pub fn forward_bag(&self, instances: &Matrix) -> Result<BagForward> {
        if instances.rows() == 0 {
            return Err(Error::Input("bag has no instances".into()));
        }
        if instances.cols() != self.input_dim() {
            return Err(Error::Dimension {
                context: "forward_bag instances",
                expected: self.input_dim(),
                actual: instances.cols(),
            });
        }
        let featurizer = self.featurizer.forward_cached(instances)?;
        let embeddings = featurizer.output().clone();
        let (scores, hidden) = attention_logits(&embeddings, &self.attention_v, &self.attention_w)?;
        let attention = softmax(&scores);
        let pooled = pool(&embeddings, &attention);
        let classifier = self.classifier.forward_cached(&pooled)?;
        let out = classifier.output();
        let logits = [out.get(0, 0), out.get(0, 1)];
        Ok(BagForward {
            logits,
            attention: AttentionProfile::new_unchecked(attention.clone()),
            cache: BagCache {
                featurizer,
                embeddings,
                hidden,
                attention,
                classifier,
            },
        })
    }

    /// Logits and attention without recording activations.
    pub fn predict_bag(&self, instances: &Matrix) -> Result<([f64; 2], AttentionProfile)> {
        if instances.rows() == 0 {
            return Err(Error::Input("bag has no instances".into()));
        }
        if instances.cols() != self.input_dim() {
            return Err(Error::Dimension {
                context: "predict_bag instances",
                expected: self.input_dim(),
                actual: instances.cols(),
            });
        }
        let embeddings = self.featurizer.predict(instances)?;
        let (scores, _) = attention_logits(&embeddings, &self.attention_v, &self.attention_w)?;
        let attention = softmax(&scores);
        let out = self.classifier.predict(&pool(&embeddings, &attention))?;
        Ok((
            [out.get(0, 0), out.get(0, 1)],
            AttentionProfile::new_unchecked(attention),
        ))
    }

    /// Gradients of `dlogits · logits(bag)` for the bag recorded in `cache`.
    pub fn backward_bag(&self, cache: &BagCache, dlogits: &[f64; 2]) -> Result<ModelGrads> {
        let (classifier, dpooled) = self
            .classifier
            .backward(&cache.classifier, &Matrix::from_vec(1, 2, dlogits.to_vec())?)?;
        let dpooled = dpooled.row(0);
        let z = &cache.embeddings;
        let a = &cache.attention;
        let (m_count, l) = (z.rows(), self.attention_dim());

        // Through Z = Σ a_m z_m.
        let mut dz = Matrix::zeros(m_count, z.cols());
        let mut da = vec![0.0; m_count];
        for m in 0..m_count {
            da[m] = crate::nn::dot(dpooled, z.row(m));
            axpy(a[m], dpooled, dz.row_mut(m));
        }
        // Through the softmax.
        let mean_da: f64 = a.iter().zip(&da).map(|(x, y)| x * y).sum();
        let ds: Vec<f64> = a.iter().zip(&da).map(|(x, y)| x * (y - mean_da)).collect();

        // Through s_m = wᵀ tanh(V z_m).
        let mut dw = vec![0.0; l];
        let mut dv = Matrix::zeros(l, z.cols());
        let mut du = vec![0.0; l];
        for m in 0..m_count {
            let h = cache.hidden.row(m);
            axpy(ds[m], h, &mut dw);
            for j in 0..l {
                du[j] = ds[m] * self.attention_w[j] * (1.0 - h[j] * h[j]);
            }
            let zm = z.row(m);
            for (j, &duj) in du.iter().enumerate() {
                if duj == 0.0 {
                    continue;
                }
                axpy(duj, zm, dv.row_mut(j));
                axpy(duj, self.attention_v.row(j), dz.row_mut(m));
            }
        }

        let featurizer = self.featurizer.backward_params(&cache.featurizer, &dz)?;
        Ok(ModelGrads {
            featurizer,
            attention_v: dv,
            attention_w: dw,
            classifier,
        })
    }

    /// Mean cross-entropy over a batch of bags and its exact gradient.
    pub fn loss_and_grads(&self, bags: &[&Matrix], labels: &[usize]) -> Result<(f64, ModelGrads)> {
        if bags.is_empty() {
            return Err(Error::Input("empty batch".into()));
        }
        if bags.len() != labels.len() {
            return Err(Error::Dimension {
                context: "loss_and_grads labels",
                expected: bags.len(),
                actual: labels.len(),
            });
        }
        let scale = 1.0 / bags.len() as f64;
        let mut total = 0.0;
        let mut grads = ModelGrads::zeros_like(self);
        for (bag, &label) in bags.iter().zip(labels) {
            let fwd = self.forward_bag(bag)?;
            let logits = Matrix::from_vec(1, 2, fwd.logits.to_vec())?;
            let (loss, dlogits) = softmax_cross_entropy(&logits, &[label])?;
            let g = self.backward_bag(&fwd.cache, &[dlogits.get(0, 0), dlogits.get(0, 1)])?;
            total += loss;
            grads.add_scaled(&g, scale);
        }
        let loss = total * scale;
        if !loss.is_finite() {
            return Err(Error::Diverged(format!("loss is {loss}")));
        }
        Ok((loss, grads))
    }
}

/// `Σ_m a_m z_m` as a 1 × K matrix.
fn pool(embeddings: &Matrix, attention: &[f64]) -> Matrix {
    let mut pooled = Matrix::zeros(1, embeddings.cols());
    for (m, &a) in attention.iter().enumerate() {
        axpy(a, embeddings.row(m), pooled.data_mut());
    }
    pooled
}

pub fn init_model(config: &ModelConfig, seed: u64) -> Result<MilModel> {
    MilModel::init(config, seed)
}
