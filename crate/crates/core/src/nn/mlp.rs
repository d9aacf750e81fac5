//! Dense feed-forward network with hand-derived backpropagation.
//!
//! A layer computes `post = act(input · Wᵀ + b)` with `W` stored `(out, in)`.
//! Hidden layers use `hidden_activation`, the last layer uses
//! `output_activation`. A network with no layers is the identity map.

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::matrix::{axpy, Matrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the pre- and post-activation values.
    #[inline]
    fn derivative(self, pre: f64, post: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - post * post,
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn new(weight: Matrix, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != weight.rows() {
            return Err(Error::Dimension {
                context: "Dense::new bias",
                expected: weight.rows(),
                actual: bias.len(),
            });
        }
        Ok(Dense { weight, bias })
    }

    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn glorot<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit).expect("finite glorot bound");
        let data = (0..in_dim * out_dim).map(|_| dist.sample(rng)).collect();
        Dense {
            weight: Matrix::from_vec(out_dim, in_dim, data).expect("sized by construction"),
            bias: vec![0.0; out_dim],
        }
    }

    #[inline]
    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    #[inline]
    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Dense>,
    hidden_activation: Activation,
    output_activation: Activation,
}

/// Activations recorded by [`Mlp::forward`], sufficient for exact backprop.
#[derive(Debug, Clone)]
pub struct MlpCache {
    input: Matrix,
    pre: Vec<Matrix>,
    post: Vec<Matrix>,
}

impl MlpCache {
    pub fn output(&self) -> &Matrix {
        self.post.last().unwrap_or(&self.input)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<Dense>,
}

impl MlpGrads {
    pub fn zeros_like(net: &Mlp) -> Self {
        MlpGrads {
            layers: net
                .layers
                .iter()
                .map(|l| Dense {
                    weight: Matrix::zeros(l.out_dim(), l.in_dim()),
                    bias: vec![0.0; l.out_dim()],
                })
                .collect(),
        }
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, other: &MlpGrads, scale: f64) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            axpy(scale, b.weight.data(), a.weight.data_mut());
            axpy(scale, &b.bias, &mut a.bias);
        }
    }

    pub fn slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.data(), l.bias.as_slice()])
            .collect()
    }
}

impl Mlp {
    /// The depth-0 network.
    pub fn identity() -> Self {
        Mlp {
            layers: Vec::new(),
            hidden_activation: Activation::Identity,
            output_activation: Activation::Identity,
        }
    }

    pub fn from_layers(
        layers: Vec<Dense>,
        hidden_activation: Activation,
        output_activation: Activation,
    ) -> Result<Self> {
        for pair in layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::Config(format!(
                    "layer dimensions do not chain: {} -> {}",
                    pair[0].out_dim(),
                    pair[1].in_dim()
                )));
            }
        }
        for l in &layers {
            if l.bias.len() != l.out_dim() {
                return Err(Error::Config("bias length differs from layer width".into()));
            }
        }
        Ok(Mlp {
            layers,
            hidden_activation,
            output_activation,
        })
    }

    /// Glorot-initialised network through the widths in `dims`
    /// (`dims[0]` is the input width). `dims.len() == 1` yields the identity.
    pub fn glorot<R: Rng + ?Sized>(
        dims: &[usize],
        hidden_activation: Activation,
        output_activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::Config(format!("invalid layer widths {dims:?}")));
        }
        let layers = dims
            .windows(2)
            .map(|w| Dense::glorot(w[0], w[1], rng))
            .collect();
        Mlp::from_layers(layers, hidden_activation, output_activation)
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> Option<usize> {
        self.layers.first().map(Dense::in_dim)
    }

    pub fn output_dim(&self) -> Option<usize> {
        self.layers.last().map(Dense::out_dim)
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden_activation
    }

    pub fn output_activation(&self) -> Activation {
        self.output_activation
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.data().len() + l.bias.len())
            .sum()
    }

    /// Parameter slices in the canonical order (per layer: weight, then bias).
    pub fn params(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.data(), l.bias.as_slice()])
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.data_mut(), l.bias.as_mut_slice()])
            .collect()
    }

    fn activation_of(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            self.output_activation
        } else {
            self.hidden_activation
        }
    }

    pub fn forward(&self, input: &Matrix) -> Result<(Matrix, MlpCache)> {
        let cache = self.forward_cached(input)?;
        Ok((cache.output().clone(), cache))
    }

    /// Forward pass keeping only the cache; the output is `cache.output()`.
    pub fn forward_cached(&self, input: &Matrix) -> Result<MlpCache> {
        self.check_input(input)?;
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post: Vec<Matrix> = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let x = post.last().unwrap_or(input);
            let (z, h) = self.affine(i, layer, x)?;
            pre.push(z);
            post.push(h);
        }
        Ok(MlpCache {
            input: input.clone(),
            pre,
            post,
        })
    }

    /// Forward pass without recording activations.
    pub fn predict(&self, input: &Matrix) -> Result<Matrix> {
        self.check_input(input)?;
        let mut current: Option<Matrix> = None;
        for (i, layer) in self.layers.iter().enumerate() {
            let (_, h) = self.affine(i, layer, current.as_ref().unwrap_or(input))?;
            current = Some(h);
        }
        Ok(current.unwrap_or_else(|| input.clone()))
    }

    fn check_input(&self, input: &Matrix) -> Result<()> {
        match self.input_dim() {
            Some(d) if input.cols() != d => Err(Error::Dimension {
                context: "mlp_forward",
                expected: d,
                actual: input.cols(),
            }),
            _ => Ok(()),
        }
    }

    fn affine(&self, i: usize, layer: &Dense, x: &Matrix) -> Result<(Matrix, Matrix)> {
        let mut z = x.matmul_transposed(&layer.weight)?;
        let mut h = Matrix::zeros(z.rows(), z.cols());
        let act = self.activation_of(i);
        for r in 0..z.rows() {
            for ((v, o), b) in z.row_mut(r).iter_mut().zip(h.row_mut(r)).zip(&layer.bias) {
                *v += b;
                *o = act.apply(*v);
            }
        }
        Ok((z, h))
    }

    /// Exact gradients of `Σ output_grad ⊙ forward(input)` with respect to the
    /// parameters and the input.
    pub fn backward(&self, cache: &MlpCache, output_grad: &Matrix) -> Result<(MlpGrads, Matrix)> {
        let (grads, input_grad) = self.backward_impl(cache, output_grad, true)?;
        Ok((grads, input_grad.expect("input gradient requested")))
    }

    /// Like [`Mlp::backward`] but skips the gradient with respect to the input.
    pub fn backward_params(&self, cache: &MlpCache, output_grad: &Matrix) -> Result<MlpGrads> {
        Ok(self.backward_impl(cache, output_grad, false)?.0)
    }

    fn backward_impl(
        &self,
        cache: &MlpCache,
        output_grad: &Matrix,
        want_input_grad: bool,
    ) -> Result<(MlpGrads, Option<Matrix>)> {
        let stale = cache.pre.len() != self.layers.len()
            || self
                .layers
                .iter()
                .zip(&cache.pre)
                .any(|(l, p)| p.cols() != l.out_dim() || p.rows() != cache.input.rows());
        if stale {
            return Err(Error::Internal(
                "mlp_backward called with a cache from a different network".into(),
            ));
        }
        if output_grad.shape() != cache.output().shape() {
            return Err(Error::Internal(format!(
                "output gradient shape {:?} differs from forward output {:?}",
                output_grad.shape(),
                cache.output().shape()
            )));
        }

        let mut grads = MlpGrads::zeros_like(self);
        let mut delta = output_grad.clone();
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let act = self.activation_of(i);
            let pre = &cache.pre[i];
            let post = &cache.post[i];
            for ((d, &z), &h) in delta.data_mut().iter_mut().zip(pre.data()).zip(post.data()) {
                *d *= act.derivative(z, h);
            }
            let x = if i == 0 { &cache.input } else { &cache.post[i - 1] };
            let g = &mut grads.layers[i];
            for r in 0..delta.rows() {
                let dr = delta.row(r);
                let xr = x.row(r);
                for (j, &dj) in dr.iter().enumerate() {
                    if dj == 0.0 {
                        continue;
                    }
                    g.bias[j] += dj;
                    axpy(dj, xr, g.weight.row_mut(j));
                }
            }
            if i == 0 && !want_input_grad {
                return Ok((grads, None));
            }
            delta = delta.matmul(&layer.weight)?;
        }
        Ok((grads, Some(delta)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;

    #[test]
    fn depth_zero_is_identity_both_ways() {
        let net = Mlp::identity();
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let (y, cache) = net.forward(&x).unwrap();
        assert_eq!(y, x);
        let g = Matrix::from_rows(&[vec![0.5, -1.0], vec![2.0, 0.0]]).unwrap();
        let (pg, ig) = net.backward(&cache, &g).unwrap();
        assert!(pg.layers.is_empty());
        assert_eq!(ig, g);
    }

    #[test]
    fn relu_clamps_negatives() {
        let layer = Dense::new(Matrix::identity(2), vec![0.0, 0.0]).unwrap();
        let net = Mlp::from_layers(vec![layer], Activation::Relu, Activation::Relu).unwrap();
        let (y, _) = net
            .forward(&Matrix::from_rows(&[vec![-1.0, 2.0]]).unwrap())
            .unwrap();
        assert_eq!(y.data(), &[0.0, 2.0]);
    }

    #[test]
    fn linear_weight_gradient_is_input() {
        let layer = Dense::new(
            Matrix::from_rows(&[vec![0.3, -0.7, 1.1]]).unwrap(),
            vec![0.0],
        )
        .unwrap();
        let net = Mlp::from_layers(vec![layer], Activation::Identity, Activation::Identity).unwrap();
        let x = Matrix::from_rows(&[vec![2.0, -1.0, 0.5]]).unwrap();
        let (_, cache) = net.forward(&x).unwrap();
        let (g, _) = net
            .backward(&cache, &Matrix::from_rows(&[vec![1.0]]).unwrap())
            .unwrap();
        assert_eq!(g.layers[0].weight.data(), x.data());
        assert_eq!(g.layers[0].bias, vec![1.0]);
    }

    #[test]
    fn rejects_unchained_layers_and_bad_input() {
        let mut rng = rng_from(1);
        let a = Dense::glorot(3, 4, &mut rng);
        let b = Dense::glorot(5, 2, &mut rng);
        assert!(Mlp::from_layers(vec![a.clone(), b], Activation::Relu, Activation::Identity).is_err());
        let net = Mlp::from_layers(vec![a], Activation::Relu, Activation::Identity).unwrap();
        assert!(matches!(
            net.forward(&Matrix::zeros(2, 2)),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn stale_cache_is_an_internal_error() {
        let mut rng = rng_from(2);
        let small = Mlp::glorot(&[2, 3], Activation::Relu, Activation::Identity, &mut rng).unwrap();
        let deep = Mlp::glorot(&[2, 3, 3], Activation::Relu, Activation::Identity, &mut rng).unwrap();
        let (_, cache) = small.forward(&Matrix::zeros(1, 2)).unwrap();
        assert!(matches!(
            deep.backward(&cache, &Matrix::zeros(1, 3)),
            Err(Error::Internal(_))
        ));
    }

    #[test]
    fn glorot_bounds_and_zero_bias() {
        let mut rng = rng_from(3);
        let l = Dense::glorot(10, 6, &mut rng);
        let limit = (6.0f64 / 16.0).sqrt();
        assert!(l.weight.data().iter().all(|w| w.abs() <= limit));
        assert!(l.bias.iter().all(|&b| b == 0.0));
    }
}
