//! From-scratch neural-network machinery for the two reconstruction models:
//! dense layers, LSTM cells, Adam, losses, dropout, training loops and
//! finite-difference gradient checking.

pub mod adam;
pub mod dense;
pub mod gradcheck;
pub mod loss;
pub mod lstm;
pub mod train;

pub use adam::AdamState;
pub use dense::{Activation, DenseLayer, MlpAutoencoder, MlpConfig, MlpGrads};
pub use gradcheck::{grad_check, GradCheckReport, ModelKind, LSTM_TOLERANCE, MLP_TOLERANCE};
pub use loss::Loss;
pub use lstm::{LstmCell, LstmConfig, LstmEncoderDecoder, LstmGrads};
pub use train::{train_lstm, train_mlp, TrainConfig};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Uniform access to a model's parameters as one flat vector, in a stable
/// documented order. The optimizer, the gradient checker and serialization
/// all go through this interface.
pub trait Parameterized {
    /// Named parameter groups with their flat lengths, in flattening order.
    fn param_blocks(&self) -> Vec<(String, usize)>;
    /// Append all parameters to `out` in block order.
    fn append_params(&self, out: &mut Vec<f64>);
    /// Overwrite all parameters from a flat vector (must match the count).
    fn set_params(&mut self, flat: &[f64]) -> Result<()>;

    fn param_count(&self) -> usize {
        self.param_blocks().iter().map(|(_, n)| n).sum()
    }

    fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.append_params(&mut out);
        out
    }
}

fn take<'a>(flat: &'a [f64], cursor: &mut usize, len: usize) -> Result<&'a [f64]> {
    if *cursor + len > flat.len() {
        return Err(Error::DimensionMismatch {
            expected: *cursor + len,
            actual: flat.len(),
            context: "flat parameter vector too short".into(),
        });
    }
    let s = &flat[*cursor..*cursor + len];
    *cursor += len;
    Ok(s)
}

impl Parameterized for MlpAutoencoder {
    fn param_blocks(&self) -> Vec<(String, usize)> {
        let mut blocks = Vec::new();
        for (stack, layers) in [("encoder", &self.encoder), ("decoder", &self.decoder)] {
            for (l, layer) in layers.iter().enumerate() {
                blocks.push((
                    format!("{stack}.{l}.weights"),
                    layer.weights.as_slice().len(),
                ));
                blocks.push((format!("{stack}.{l}.bias"), layer.bias.len()));
            }
        }
        blocks
    }

    fn append_params(&self, out: &mut Vec<f64>) {
        for layer in self.encoder.iter().chain(self.decoder.iter()) {
            out.extend_from_slice(layer.weights.as_slice());
            out.extend_from_slice(&layer.bias);
        }
    }

    fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        let expected = self.param_count();
        if flat.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: flat.len(),
                context: "autoencoder parameter vector".into(),
            });
        }
        let mut cursor = 0;
        for layer in self.encoder.iter_mut().chain(self.decoder.iter_mut()) {
            let n = layer.weights.as_slice().len();
            layer
                .weights
                .as_mut_slice()
                .copy_from_slice(take(flat, &mut cursor, n)?);
            let n = layer.bias.len();
            layer.bias.copy_from_slice(take(flat, &mut cursor, n)?);
        }
        Ok(())
    }
}

impl Parameterized for LstmEncoderDecoder {
    fn param_blocks(&self) -> Vec<(String, usize)> {
        let mut blocks = Vec::new();
        for (stack, cells) in [("encoder", &self.encoder), ("decoder", &self.decoder)] {
            for (l, cell) in cells.iter().enumerate() {
                for (name, len) in [
                    ("w_i", cell.w_i.as_slice().len()),
                    ("u_i", cell.u_i.as_slice().len()),
                    ("b_i", cell.b_i.len()),
                    ("w_f", cell.w_f.as_slice().len()),
                    ("u_f", cell.u_f.as_slice().len()),
                    ("b_f", cell.b_f.len()),
                    ("w_g", cell.w_g.as_slice().len()),
                    ("u_g", cell.u_g.as_slice().len()),
                    ("b_g", cell.b_g.len()),
                    ("w_o", cell.w_o.as_slice().len()),
                    ("u_o", cell.u_o.as_slice().len()),
                    ("b_o", cell.b_o.len()),
                ] {
                    blocks.push((format!("{stack}.{l}.{name}"), len));
                }
            }
        }
        blocks.push((
            "projection.weights".into(),
            self.projection.weights.as_slice().len(),
        ));
        blocks.push(("projection.bias".into(), self.projection.bias.len()));
        blocks
    }

    fn append_params(&self, out: &mut Vec<f64>) {
        for cell in self.encoder.iter().chain(self.decoder.iter()) {
            out.extend_from_slice(cell.w_i.as_slice());
            out.extend_from_slice(cell.u_i.as_slice());
            out.extend_from_slice(&cell.b_i);
            out.extend_from_slice(cell.w_f.as_slice());
            out.extend_from_slice(cell.u_f.as_slice());
            out.extend_from_slice(&cell.b_f);
            out.extend_from_slice(cell.w_g.as_slice());
            out.extend_from_slice(cell.u_g.as_slice());
            out.extend_from_slice(&cell.b_g);
            out.extend_from_slice(cell.w_o.as_slice());
            out.extend_from_slice(cell.u_o.as_slice());
            out.extend_from_slice(&cell.b_o);
        }
        out.extend_from_slice(self.projection.weights.as_slice());
        out.extend_from_slice(&self.projection.bias);
    }

    fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        let expected = self.param_count();
        if flat.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: flat.len(),
                context: "sequence autoencoder parameter vector".into(),
            });
        }
        let mut cursor = 0;
        for cell in self.encoder.iter_mut().chain(self.decoder.iter_mut()) {
            for m in [
                &mut cell.w_i, &mut cell.u_i, // matrices interleaved with biases below
            ] {
                let n = m.as_slice().len();
                m.as_mut_slice().copy_from_slice(take(flat, &mut cursor, n)?);
            }
            let n = cell.b_i.len();
            cell.b_i.copy_from_slice(take(flat, &mut cursor, n)?);
            for m in [&mut cell.w_f, &mut cell.u_f] {
                let n = m.as_slice().len();
                m.as_mut_slice().copy_from_slice(take(flat, &mut cursor, n)?);
            }
            let n = cell.b_f.len();
            cell.b_f.copy_from_slice(take(flat, &mut cursor, n)?);
            for m in [&mut cell.w_g, &mut cell.u_g] {
                let n = m.as_slice().len();
                m.as_mut_slice().copy_from_slice(take(flat, &mut cursor, n)?);
            }
            let n = cell.b_g.len();
            cell.b_g.copy_from_slice(take(flat, &mut cursor, n)?);
            for m in [&mut cell.w_o, &mut cell.u_o] {
                let n = m.as_slice().len();
                m.as_mut_slice().copy_from_slice(take(flat, &mut cursor, n)?);
            }
            let n = cell.b_o.len();
            cell.b_o.copy_from_slice(take(flat, &mut cursor, n)?);
        }
        let n = self.projection.weights.as_slice().len();
        self.projection
            .weights
            .as_mut_slice()
            .copy_from_slice(take(flat, &mut cursor, n)?);
        let n = self.projection.bias.len();
        self.projection
            .bias
            .copy_from_slice(take(flat, &mut cursor, n)?);
        Ok(())
    }
}

/// Flatten dense-autoencoder gradients in the same order as
/// [`Parameterized::params_flat`] on the model.
pub fn flatten_mlp_grads(grads: &MlpGrads) -> Vec<f64> {
    let mut out = Vec::new();
    for layer in &grads.layers {
        out.extend_from_slice(layer.weights.as_slice());
        out.extend_from_slice(&layer.bias);
    }
    out
}

/// Flatten sequence-autoencoder gradients in model parameter order.
pub fn flatten_lstm_grads(grads: &LstmGrads) -> Vec<f64> {
    let mut out = Vec::new();
    for cell in grads.encoder.iter().chain(grads.decoder.iter()) {
        out.extend_from_slice(cell.w_i.as_slice());
        out.extend_from_slice(cell.u_i.as_slice());
        out.extend_from_slice(&cell.b_i);
        out.extend_from_slice(cell.w_f.as_slice());
        out.extend_from_slice(cell.u_f.as_slice());
        out.extend_from_slice(&cell.b_f);
        out.extend_from_slice(cell.w_g.as_slice());
        out.extend_from_slice(cell.u_g.as_slice());
        out.extend_from_slice(&cell.b_g);
        out.extend_from_slice(cell.w_o.as_slice());
        out.extend_from_slice(cell.u_o.as_slice());
        out.extend_from_slice(&cell.b_o);
    }
    out.extend_from_slice(grads.projection.weights.as_slice());
    out.extend_from_slice(&grads.projection.bias);
    out
}

// ---------------------------------------------------------------------------
// Model files: architecture metadata + flat parameters, versioned.
// ---------------------------------------------------------------------------

const MODEL_FILE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    kind: String,
    architecture: serde_json::Value,
    params: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct DenseLayerArch {
    input: usize,
    output: usize,
    activation: Activation,
}

#[derive(Serialize, Deserialize)]
struct MlpArch {
    layers: Vec<DenseLayerArch>,
    encoder_len: usize,
    l1_coeff: f64,
}

#[derive(Serialize, Deserialize)]
struct LstmArch {
    input_dim: usize,
    hidden_size: usize,
    num_layers: usize,
    dropout: f64,
    reverse_reconstruction: bool,
}

fn write_model_file(path: &std::path::Path, file: &ModelFile) -> Result<()> {
    let text = serde_json::to_string(file)
        .map_err(|e| Error::Validation(format!("could not serialize model: {e}")))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_model_file(path: &std::path::Path, expected_kind: &str) -> Result<ModelFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: ModelFile =
        serde_json::from_str(&text).map_err(|e| Error::parse(e.line(), e.to_string()))?;
    if file.version != MODEL_FILE_VERSION {
        return Err(Error::Validation(format!(
            "unsupported model file version {} (expected {MODEL_FILE_VERSION})",
            file.version
        )));
    }
    if file.kind != expected_kind {
        return Err(Error::Validation(format!(
            "model file holds a '{}', expected a '{expected_kind}'",
            file.kind
        )));
    }
    Ok(file)
}

/// Persist a dense autoencoder (architecture + flat parameters).
pub fn save_mlp(model: &MlpAutoencoder, path: &std::path::Path) -> Result<()> {
    let layers: Vec<DenseLayerArch> = model
        .encoder
        .iter()
        .chain(model.decoder.iter())
        .map(|l| DenseLayerArch {
            input: l.input_dim(),
            output: l.output_dim(),
            activation: l.activation,
        })
        .collect();
    let arch = MlpArch {
        layers,
        encoder_len: model.encoder.len(),
        l1_coeff: model.l1_coeff,
    };
    write_model_file(
        path,
        &ModelFile {
            version: MODEL_FILE_VERSION,
            kind: "dense_autoencoder".into(),
            architecture: serde_json::to_value(arch)
                .map_err(|e| Error::Validation(e.to_string()))?,
            params: model.params_flat(),
        },
    )
}

/// Load a dense autoencoder saved by [`save_mlp`].
pub fn load_mlp(path: &std::path::Path) -> Result<MlpAutoencoder> {
    let file = read_model_file(path, "dense_autoencoder")?;
    let arch: MlpArch = serde_json::from_value(file.architecture)
        .map_err(|e| Error::Validation(format!("bad architecture block: {e}")))?;
    if arch.encoder_len > arch.layers.len() {
        return Err(Error::Validation("encoder length exceeds layer count".into()));
    }
    let mut layers: Vec<DenseLayer> = arch
        .layers
        .iter()
        .map(|a| DenseLayer {
            weights: Matrix::zeros(a.output, a.input),
            bias: vec![0.0; a.output],
            activation: a.activation,
        })
        .collect();
    let decoder = layers.split_off(arch.encoder_len);
    let mut model = MlpAutoencoder::from_layers(layers, decoder, arch.l1_coeff)?;
    model.set_params(&file.params)?;
    Ok(model)
}

/// Persist a sequence autoencoder (architecture + flat parameters).
pub fn save_lstm(model: &LstmEncoderDecoder, path: &std::path::Path) -> Result<()> {
    let arch = LstmArch {
        input_dim: model.input_dim(),
        hidden_size: model.hidden_size(),
        num_layers: model.num_layers(),
        dropout: model.dropout,
        reverse_reconstruction: model.reverse_reconstruction,
    };
    write_model_file(
        path,
        &ModelFile {
            version: MODEL_FILE_VERSION,
            kind: "lstm_encoder_decoder".into(),
            architecture: serde_json::to_value(arch)
                .map_err(|e| Error::Validation(e.to_string()))?,
            params: model.params_flat(),
        },
    )
}

/// Load a sequence autoencoder saved by [`save_lstm`].
pub fn load_lstm(path: &std::path::Path) -> Result<LstmEncoderDecoder> {
    let file = read_model_file(path, "lstm_encoder_decoder")?;
    let arch: LstmArch = serde_json::from_value(file.architecture)
        .map_err(|e| Error::Validation(format!("bad architecture block: {e}")))?;
    let config = LstmConfig {
        input_dim: arch.input_dim,
        hidden_size: arch.hidden_size,
        num_layers: arch.num_layers,
        dropout: arch.dropout,
        reverse_reconstruction: arch.reverse_reconstruction,
    };
    // Shape from the config, then overwrite every parameter.
    let mut seed = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let mut model = LstmEncoderDecoder::new(&config, &mut seed)?;
    model.set_params(&file.params)?;
    Ok(model)
}

use rand::SeedableRng as _;

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mlp_params_round_trip_through_flat_vector() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = MlpAutoencoder::new(&MlpConfig::with_input_dim(5), &mut rng).unwrap();
        let flat = model.params_flat();
        assert_eq!(flat.len(), model.param_count());

        let mut copy = model.clone();
        copy.set_params(&vec![0.0; flat.len()]).unwrap();
        assert!(copy.params_flat().iter().all(|&v| v == 0.0));
        copy.set_params(&flat).unwrap();
        assert_eq!(copy.params_flat(), flat);
    }

    #[test]
    fn lstm_params_round_trip_through_flat_vector() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let config = LstmConfig {
            input_dim: 3,
            hidden_size: 4,
            num_layers: 2,
            dropout: 0.0,
            reverse_reconstruction: true,
        };
        let model = LstmEncoderDecoder::new(&config, &mut rng).unwrap();
        let flat = model.params_flat();
        let total: usize = model.param_blocks().iter().map(|(_, n)| n).sum();
        assert_eq!(flat.len(), total);

        let mut copy = model.clone();
        copy.set_params(&flat).unwrap();
        assert_eq!(copy.params_flat(), flat);
        assert!(copy.set_params(&flat[1..]).is_err());
    }

    #[test]
    fn model_files_round_trip_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);

        let mlp = MlpAutoencoder::new(&MlpConfig::with_input_dim(7), &mut rng).unwrap();
        let path = dir.path().join("mlp.json");
        save_mlp(&mlp, &path).unwrap();
        let loaded = load_mlp(&path).unwrap();
        assert_eq!(loaded.params_flat(), mlp.params_flat());
        assert_eq!(loaded.encoder.len(), mlp.encoder.len());
        assert_eq!(loaded.l1_coeff, mlp.l1_coeff);

        let lstm = LstmEncoderDecoder::new(
            &LstmConfig {
                input_dim: 2,
                hidden_size: 3,
                num_layers: 2,
                dropout: 0.2,
                reverse_reconstruction: true,
            },
            &mut rng,
        )
        .unwrap();
        let path = dir.path().join("lstm.json");
        save_lstm(&lstm, &path).unwrap();
        let loaded = load_lstm(&path).unwrap();
        assert_eq!(loaded.params_flat(), lstm.params_flat());
        assert_eq!(loaded.dropout, lstm.dropout);

        // Loading one kind as the other is rejected.
        assert!(load_mlp(&path).is_err());
    }
}
