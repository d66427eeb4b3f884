//! Fully connected layers and the dense autoencoder that reconstructs
//! operation-cycle rows.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Element-wise activation of a dense layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    /// Derivative at pre-activation `z` with post-activation `y` available.
    fn derivative(self, z: f64, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// One affine layer `y = act(W x + b)` with `W` of shape out×in.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    /// Random layer with weights and biases uniform in
    /// [-1/√fan_in, +1/√fan_in].
    pub fn random(input: usize, output: usize, activation: Activation, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (input as f64).sqrt();
        let mut weights = Matrix::zeros(output, input);
        for w in weights.as_mut_slice().iter_mut() {
            *w = rng.gen_range(-bound..=bound);
        }
        let bias = (0..output).map(|_| rng.gen_range(-bound..=bound)).collect();
        DenseLayer {
            weights,
            bias,
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.rows()
    }

    /// Forward pass returning (pre-activation, post-activation).
    pub fn forward(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut z = self.weights.matvec(x);
        for (zi, b) in z.iter_mut().zip(&self.bias) {
            *zi += b;
        }
        let y = z.iter().map(|&zi| self.activation.apply(zi)).collect();
        (z, y)
    }
}

/// Gradients for one dense layer, same shapes as the layer.
#[derive(Debug, Clone)]
pub struct DenseGrads {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl DenseGrads {
    pub fn zeros_like(layer: &DenseLayer) -> Self {
        DenseGrads {
            weights: Matrix::zeros(layer.output_dim(), layer.input_dim()),
            bias: vec![0.0; layer.output_dim()],
        }
    }

    pub fn add_assign(&mut self, other: &DenseGrads) {
        for (a, b) in self
            .weights
            .as_mut_slice()
            .iter_mut()
            .zip(other.weights.as_slice())
        {
            *a += b;
        }
        for (a, b) in self.bias.iter_mut().zip(&other.bias) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for w in self.weights.as_mut_slice().iter_mut() {
            *w *= factor;
        }
        for b in self.bias.iter_mut() {
            *b *= factor;
        }
    }
}

/// How to build a dense autoencoder. `hidden` lists the encoder's layer
/// sizes from the input inward; the last entry is the code size and the
/// decoder mirrors the list back out to `input_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    /// Activation of the first layer; the rest alternate tanh/ReLU.
    pub first_activation: Activation,
    /// Activation of the final reconstruction layer.
    pub output_activation: Activation,
    /// Coefficient of the L1 penalty on the first encoder layer's weights.
    pub l1_coeff: f64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            input_dim: 0,
            hidden: vec![6, 6],
            first_activation: Activation::Tanh,
            output_activation: Activation::Identity,
            l1_coeff: 1e-5,
        }
    }
}

impl MlpConfig {
    pub fn with_input_dim(input_dim: usize) -> Self {
        MlpConfig {
            input_dim,
            ..MlpConfig::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::Config("autoencoder input dimension must be ≥ 1".into()));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::Config(
                "autoencoder needs at least one non-empty hidden layer".into(),
            ));
        }
        if self.l1_coeff < 0.0 {
            return Err(Error::Config("l1_coeff must be non-negative".into()));
        }
        Ok(())
    }
}

/// Dense autoencoder: encoder and decoder stacks of [`DenseLayer`] with an
/// L1 penalty on the first encoder layer's weights. Input and output share
/// one dimension.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpAutoencoder {
    pub encoder: Vec<DenseLayer>,
    pub decoder: Vec<DenseLayer>,
    pub l1_coeff: f64,
}

/// Per-layer values cached by the forward pass for backpropagation.
pub struct MlpCache {
    /// For each layer in encoder-then-decoder order: (input, pre-activation,
    /// post-activation).
    layers: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)>,
}

impl MlpAutoencoder {
    /// Build from a config with seeded random initialization. Activations
    /// alternate starting from `first_activation`; the final layer uses
    /// `output_activation`.
    pub fn new(config: &MlpConfig, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let mut dims = vec![config.input_dim];
        dims.extend_from_slice(&config.hidden);
        // Mirror the interior sizes back out to the input dimension.
        dims.extend(config.hidden.iter().rev().skip(1));
        dims.push(config.input_dim);

        let alternating = [config.first_activation, flip(config.first_activation)];
        let layer_count = dims.len() - 1;
        let mut layers = Vec::with_capacity(layer_count);
        for l in 0..layer_count {
            let activation = if l == layer_count - 1 {
                config.output_activation
            } else {
                alternating[l % 2]
            };
            layers.push(DenseLayer::random(dims[l], dims[l + 1], activation, rng));
        }
        let decoder = layers.split_off(config.hidden.len());
        Ok(MlpAutoencoder {
            encoder: layers,
            decoder,
            l1_coeff: config.l1_coeff,
        })
    }

    /// Assemble from explicit layers (used by tests and deserialization).
    pub fn from_layers(
        encoder: Vec<DenseLayer>,
        decoder: Vec<DenseLayer>,
        l1_coeff: f64,
    ) -> Result<Self> {
        let model = MlpAutoencoder {
            encoder,
            decoder,
            l1_coeff,
        };
        let dims_ok = model
            .layers()
            .zip(model.layers().skip(1))
            .all(|(a, b)| a.output_dim() == b.input_dim());
        let n_layers = model.encoder.len() + model.decoder.len();
        if n_layers == 0 || !dims_ok {
            return Err(Error::Config("inconsistent autoencoder layer shapes".into()));
        }
        if model.input_dim() != model.output_dim() {
            return Err(Error::Config(
                "autoencoder input and output dimensions must match".into(),
            ));
        }
        if l1_coeff < 0.0 || (l1_coeff > 0.0 && model.encoder.is_empty()) {
            return Err(Error::Config(
                "l1 penalty requires a non-negative coefficient and an encoder layer".into(),
            ));
        }
        Ok(model)
    }

    fn layers(&self) -> impl Iterator<Item = &DenseLayer> {
        self.encoder.iter().chain(self.decoder.iter())
    }

    pub fn input_dim(&self) -> usize {
        self.layers().next().expect("non-empty").input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers().last().expect("non-empty").output_dim()
    }

    /// Reconstruct one input row; the cache feeds [`MlpAutoencoder::backward`].
    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, MlpCache)> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: x.len(),
                context: "autoencoder input".into(),
            });
        }
        let mut layers = Vec::with_capacity(self.encoder.len() + self.decoder.len());
        let mut current = x.to_vec();
        for layer in self.layers() {
            let (z, y) = layer.forward(&current);
            layers.push((std::mem::replace(&mut current, y.clone()), z, y));
        }
        Ok((current, MlpCache { layers }))
    }

    /// Reconstruction without the cache, for scoring.
    pub fn reconstruct(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(x)?.0)
    }

    /// The objective's regularization term: l1_coeff · ‖W₁‖₁ over the first
    /// encoder layer.
    pub fn l1_penalty(&self) -> f64 {
        match self.encoder.first() {
            Some(first) if self.l1_coeff > 0.0 => {
                self.l1_coeff * first.weights.as_slice().iter().map(|w| w.abs()).sum::<f64>()
            }
            _ => 0.0,
        }
    }

    /// Backpropagate `loss_grad` (∂loss/∂x̂) through the cached forward pass.
    /// The returned gradients include the L1 subgradient on the first
    /// encoder layer (0 where a weight is exactly 0).
    pub fn backward(&self, cache: &MlpCache, loss_grad: &[f64]) -> Result<MlpGrads> {
        let layer_refs: Vec<&DenseLayer> = self.layers().collect();
        if cache.layers.len() != layer_refs.len() {
            return Err(Error::DimensionMismatch {
                expected: layer_refs.len(),
                actual: cache.layers.len(),
                context: "forward cache vs model layers".into(),
            });
        }
        if loss_grad.len() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.output_dim(),
                actual: loss_grad.len(),
                context: "loss gradient vs model output".into(),
            });
        }

        let mut grads = MlpGrads::zeros_like(self);
        let mut upstream = loss_grad.to_vec();
        for (l, layer) in layer_refs.iter().enumerate().rev() {
            let (input, z, y) = &cache.layers[l];
            if input.len() != layer.input_dim() || z.len() != layer.output_dim() {
                return Err(Error::DimensionMismatch {
                    expected: layer.input_dim(),
                    actual: input.len(),
                    context: format!("cache entry for layer {l}"),
                });
            }
            let dz: Vec<f64> = upstream
                .iter()
                .zip(z.iter().zip(y))
                .map(|(u, (&zi, &yi))| u * layer.activation.derivative(zi, yi))
                .collect();
            grads.layers[l].weights.outer_add(&dz, input);
            for (b, d) in grads.layers[l].bias.iter_mut().zip(&dz) {
                *b += d;
            }
            upstream = layer.weights.matvec_t(&dz);
        }

        if self.l1_coeff > 0.0 {
            if let Some(first) = self.encoder.first() {
                let g = grads.layers[0].weights.as_mut_slice();
                for (gi, &w) in g.iter_mut().zip(first.weights.as_slice()) {
                    *gi += self.l1_coeff * sign(w);
                }
            }
        }
        Ok(grads)
    }
}

fn flip(a: Activation) -> Activation {
    match a {
        Activation::Tanh => Activation::Relu,
        Activation::Relu => Activation::Tanh,
        Activation::Identity => Activation::Identity,
    }
}

fn sign(w: f64) -> f64 {
    if w > 0.0 {
        1.0
    } else if w < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Gradients for every layer, encoder first then decoder.
#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub layers: Vec<DenseGrads>,
}

impl MlpGrads {
    pub fn zeros_like(model: &MlpAutoencoder) -> Self {
        MlpGrads {
            layers: model.layers().map(DenseGrads::zeros_like).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &MlpGrads) {
        debug_assert_eq!(self.layers.len(), other.layers.len());
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.add_assign(b);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for layer in self.layers.iter_mut() {
            layer.scale(factor);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zero_layer(input: usize, output: usize, activation: Activation) -> DenseLayer {
        DenseLayer {
            weights: Matrix::zeros(output, input),
            bias: vec![0.0; output],
            activation,
        }
    }

    #[test]
    fn default_architecture_mirrors_hidden_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let model = MlpAutoencoder::new(&MlpConfig::with_input_dim(22), &mut rng).unwrap();
        // 22 -> 6 -> 6 (code) -> 6 -> 22
        assert_eq!(model.encoder.len(), 2);
        assert_eq!(model.decoder.len(), 2);
        assert_eq!(model.encoder[0].input_dim(), 22);
        assert_eq!(model.encoder[0].output_dim(), 6);
        assert_eq!(model.encoder[1].output_dim(), 6);
        assert_eq!(model.decoder[0].output_dim(), 6);
        assert_eq!(model.decoder[1].output_dim(), 22);
        // tanh, relu, tanh, then an identity reconstruction layer.
        assert_eq!(model.encoder[0].activation, Activation::Tanh);
        assert_eq!(model.encoder[1].activation, Activation::Relu);
        assert_eq!(model.decoder[0].activation, Activation::Tanh);
        assert_eq!(model.decoder[1].activation, Activation::Identity);
    }

    #[test]
    fn initialization_respects_fan_in_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = MlpAutoencoder::new(&MlpConfig::with_input_dim(16), &mut rng).unwrap();
        let bound = 1.0 / 16f64.sqrt();
        assert!(model.encoder[0]
            .weights
            .as_slice()
            .iter()
            .all(|w| w.abs() <= bound));
    }

    #[test]
    fn zero_network_reconstructs_zero() {
        let model = MlpAutoencoder::from_layers(
            vec![zero_layer(3, 2, Activation::Tanh)],
            vec![zero_layer(2, 3, Activation::Relu)],
            0.0,
        )
        .unwrap();
        let (xhat, _) = model.forward(&[1.0, -2.0, 0.5]).unwrap();
        assert_eq!(xhat, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let model = MlpAutoencoder::from_layers(
            vec![DenseLayer {
                weights: Matrix::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]),
                bias: vec![0.0, 0.0],
                activation: Activation::Identity,
            }],
            vec![],
            0.0,
        )
        .unwrap();
        let x = [0.7, -0.3];
        assert_eq!(model.reconstruct(&x).unwrap(), x.to_vec());
    }

    #[test]
    fn forward_matches_independent_reevaluation() {
        // Re-evaluate a random 6-4-6 net with bare matrix arithmetic.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let config = MlpConfig {
            input_dim: 6,
            hidden: vec![4],
            ..MlpConfig::default()
        };
        let model = MlpAutoencoder::new(&config, &mut rng).unwrap();
        let x: Vec<f64> = (0..6).map(|i| (i as f64) / 7.0 - 0.4).collect();
        let (xhat, _) = model.forward(&x).unwrap();

        let mut v = x.clone();
        for layer in model.encoder.iter().chain(model.decoder.iter()) {
            let mut next = vec![0.0; layer.output_dim()];
            for (r, out) in next.iter_mut().enumerate() {
                let mut acc = layer.bias[r];
                for (c, &vc) in v.iter().enumerate() {
                    acc += layer.weights.get(r, c) * vc;
                }
                *out = match layer.activation {
                    Activation::Tanh => acc.tanh(),
                    Activation::Relu => acc.max(0.0),
                    Activation::Identity => acc,
                };
            }
            v = next;
        }
        for (a, b) in xhat.iter().zip(&v) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_loss_gradient_gives_zero_parameter_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let config = MlpConfig {
            input_dim: 4,
            hidden: vec![3],
            l1_coeff: 0.0,
            ..MlpConfig::default()
        };
        let model = MlpAutoencoder::new(&config, &mut rng).unwrap();
        let (_, cache) = model.forward(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        let grads = model.backward(&cache, &[0.0; 4]).unwrap();
        for layer in &grads.layers {
            assert!(layer.weights.as_slice().iter().all(|&g| g == 0.0));
            assert!(layer.bias.iter().all(|&g| g == 0.0));
        }
    }

    #[test]
    fn scalar_network_matches_hand_gradient() {
        // y = w*x (no bias effect checked separately); MSE vs target t gives
        // dL/dw = 2(wx - t)x.
        let (w, x, t) = (1.5, 0.8, 2.0);
        let model = MlpAutoencoder::from_layers(
            vec![DenseLayer {
                weights: Matrix::from_vec(1, 1, vec![w]),
                bias: vec![0.0],
                activation: Activation::Identity,
            }],
            vec![],
            0.0,
        )
        .unwrap();
        let (y, cache) = model.forward(&[x]).unwrap();
        let loss_grad = [2.0 * (y[0] - t)];
        let grads = model.backward(&cache, &loss_grad).unwrap();
        let expected = 2.0 * (w * x - t) * x;
        assert!((grads.layers[0].weights.get(0, 0) - expected).abs() < 1e-12);
        assert!((grads.layers[0].bias[0] - 2.0 * (w * x - t)).abs() < 1e-12);
    }

    #[test]
    fn l1_subgradient_is_sign_scaled_by_coefficient() {
        let l1 = 0.01;
        let model = MlpAutoencoder::from_layers(
            vec![DenseLayer {
                weights: Matrix::from_vec(1, 3, vec![0.5, -0.2, 0.0]),
                bias: vec![0.0],
                activation: Activation::Identity,
            }],
            vec![DenseLayer {
                weights: Matrix::zeros(3, 1),
                bias: vec![0.0; 3],
                activation: Activation::Identity,
            }],
            l1,
        )
        .unwrap();
        let (_, cache) = model.forward(&[1.0, 1.0, 1.0]).unwrap();
        // Zero reconstruction gradient isolates the regularizer.
        let grads = model.backward(&cache, &[0.0; 3]).unwrap();
        assert_eq!(grads.layers[0].weights.as_slice(), &[l1, -l1, 0.0]);
        assert!((model.l1_penalty() - l1 * 0.7).abs() < 1e-15);
    }
}
