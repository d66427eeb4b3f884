//! LSTM encoder–decoder that reconstructs fixed-length sensor windows.
//!
//! The encoder consumes the window and hands its final hidden/cell states to
//! the decoder, which re-emits the window in reverse order without teacher
//! forcing: each decoder step receives the previous step's own reconstruction
//! (a zero vector at the first step). Outputs are re-reversed before they are
//! returned so they align index-wise with the input. Gradients are
//! hand-derived backpropagation through time, including the feedback path
//! through the reconstructions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::neuralnet::dense::{Activation, DenseGrads, DenseLayer};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Uniform draw in [0, 1) from a type-erased generator (the trait's generic
/// helpers require a sized type).
fn uniform_unit(rng: &mut dyn rand::RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn uniform_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    let bound = 1.0 / (cols as f64).sqrt();
    let mut m = Matrix::zeros(rows, cols);
    for w in m.as_mut_slice().iter_mut() {
        *w = rng.gen_range(-bound..=bound);
    }
    m
}

fn uniform_vector(n: usize, fan_in: usize, rng: &mut impl Rng) -> Vec<f64> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    (0..n).map(|_| rng.gen_range(-bound..=bound)).collect()
}

/// One LSTM layer: input, forget and output gates (sigmoid) plus the
/// candidate update (tanh), with the usual elementwise cell-state update.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LstmCell {
    pub w_i: Matrix,
    pub u_i: Matrix,
    pub b_i: Vec<f64>,
    pub w_f: Matrix,
    pub u_f: Matrix,
    pub b_f: Vec<f64>,
    pub w_g: Matrix,
    pub u_g: Matrix,
    pub b_g: Vec<f64>,
    pub w_o: Matrix,
    pub u_o: Matrix,
    pub b_o: Vec<f64>,
}

/// Values cached by one cell step, enough to run the step backward.
#[derive(Debug, Clone)]
pub struct StepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

impl LstmCell {
    /// Random cell with all parameters uniform in [-1/√fan_in, +1/√fan_in],
    /// where fan_in is the column count of each matrix.
    pub fn random(input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        LstmCell {
            w_i: uniform_matrix(hidden, input, rng),
            u_i: uniform_matrix(hidden, hidden, rng),
            b_i: uniform_vector(hidden, input, rng),
            w_f: uniform_matrix(hidden, input, rng),
            u_f: uniform_matrix(hidden, hidden, rng),
            b_f: uniform_vector(hidden, input, rng),
            w_g: uniform_matrix(hidden, input, rng),
            u_g: uniform_matrix(hidden, hidden, rng),
            b_g: uniform_vector(hidden, input, rng),
            w_o: uniform_matrix(hidden, input, rng),
            u_o: uniform_matrix(hidden, hidden, rng),
            b_o: uniform_vector(hidden, input, rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_i.cols()
    }

    pub fn hidden_size(&self) -> usize {
        self.w_i.rows()
    }

    fn gate(&self, w: &Matrix, u: &Matrix, b: &[f64], x: &[f64], h: &[f64]) -> Vec<f64> {
        let mut z = w.matvec(x);
        let uh = u.matvec(h);
        for ((zi, ui), bi) in z.iter_mut().zip(&uh).zip(b) {
            *zi += ui + bi;
        }
        z
    }

    /// One forward step.
    pub fn step(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> StepCache {
        let i: Vec<f64> = self
            .gate(&self.w_i, &self.u_i, &self.b_i, x, h_prev)
            .into_iter()
            .map(sigmoid)
            .collect();
        let f: Vec<f64> = self
            .gate(&self.w_f, &self.u_f, &self.b_f, x, h_prev)
            .into_iter()
            .map(sigmoid)
            .collect();
        let g: Vec<f64> = self
            .gate(&self.w_g, &self.u_g, &self.b_g, x, h_prev)
            .into_iter()
            .map(f64::tanh)
            .collect();
        let o: Vec<f64> = self
            .gate(&self.w_o, &self.u_o, &self.b_o, x, h_prev)
            .into_iter()
            .map(sigmoid)
            .collect();
        let c: Vec<f64> = (0..self.hidden_size())
            .map(|k| f[k] * c_prev[k] + i[k] * g[k])
            .collect();
        let tanh_c: Vec<f64> = c.iter().map(|&v| v.tanh()).collect();
        let h: Vec<f64> = (0..self.hidden_size()).map(|k| o[k] * tanh_c[k]).collect();
        StepCache {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            c_prev: c_prev.to_vec(),
            i,
            f,
            g,
            o,
            c,
            tanh_c,
            h,
        }
    }

    /// Backward through one step. `dh` and `dc_in` are the gradients flowing
    /// into this step's hidden/cell outputs; gradients for the parameters
    /// accumulate into `grads`. Returns (dx, dh_prev, dc_prev).
    pub fn backward_step(
        &self,
        cache: &StepCache,
        dh: &[f64],
        dc_in: &[f64],
        grads: &mut LstmCellGrads,
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let hidden = self.hidden_size();
        let mut d_i_pre = vec![0.0; hidden];
        let mut d_f_pre = vec![0.0; hidden];
        let mut d_g_pre = vec![0.0; hidden];
        let mut d_o_pre = vec![0.0; hidden];
        let mut dc_prev = vec![0.0; hidden];
        for k in 0..hidden {
            let dc_total = dc_in[k] + dh[k] * cache.o[k] * (1.0 - cache.tanh_c[k].powi(2));
            d_o_pre[k] = dh[k] * cache.tanh_c[k] * cache.o[k] * (1.0 - cache.o[k]);
            d_i_pre[k] = dc_total * cache.g[k] * cache.i[k] * (1.0 - cache.i[k]);
            d_f_pre[k] = dc_total * cache.c_prev[k] * cache.f[k] * (1.0 - cache.f[k]);
            d_g_pre[k] = dc_total * cache.i[k] * (1.0 - cache.g[k].powi(2));
            dc_prev[k] = dc_total * cache.f[k];
        }

        grads.w_i.outer_add(&d_i_pre, &cache.x);
        grads.u_i.outer_add(&d_i_pre, &cache.h_prev);
        grads.w_f.outer_add(&d_f_pre, &cache.x);
        grads.u_f.outer_add(&d_f_pre, &cache.h_prev);
        grads.w_g.outer_add(&d_g_pre, &cache.x);
        grads.u_g.outer_add(&d_g_pre, &cache.h_prev);
        grads.w_o.outer_add(&d_o_pre, &cache.x);
        grads.u_o.outer_add(&d_o_pre, &cache.h_prev);
        for k in 0..hidden {
            grads.b_i[k] += d_i_pre[k];
            grads.b_f[k] += d_f_pre[k];
            grads.b_g[k] += d_g_pre[k];
            grads.b_o[k] += d_o_pre[k];
        }

        let mut dx = self.w_i.matvec_t(&d_i_pre);
        let mut dh_prev = self.u_i.matvec_t(&d_i_pre);
        for (acc, v) in dx.iter_mut().zip(self.w_f.matvec_t(&d_f_pre)) {
            *acc += v;
        }
        for (acc, v) in dx.iter_mut().zip(self.w_g.matvec_t(&d_g_pre)) {
            *acc += v;
        }
        for (acc, v) in dx.iter_mut().zip(self.w_o.matvec_t(&d_o_pre)) {
            *acc += v;
        }
        for (acc, v) in dh_prev.iter_mut().zip(self.u_f.matvec_t(&d_f_pre)) {
            *acc += v;
        }
        for (acc, v) in dh_prev.iter_mut().zip(self.u_g.matvec_t(&d_g_pre)) {
            *acc += v;
        }
        for (acc, v) in dh_prev.iter_mut().zip(self.u_o.matvec_t(&d_o_pre)) {
            *acc += v;
        }
        (dx, dh_prev, dc_prev)
    }
}

/// Gradients for one cell, same shapes as [`LstmCell`].
#[derive(Debug, Clone)]
pub struct LstmCellGrads {
    pub w_i: Matrix,
    pub u_i: Matrix,
    pub b_i: Vec<f64>,
    pub w_f: Matrix,
    pub u_f: Matrix,
    pub b_f: Vec<f64>,
    pub w_g: Matrix,
    pub u_g: Matrix,
    pub b_g: Vec<f64>,
    pub w_o: Matrix,
    pub u_o: Matrix,
    pub b_o: Vec<f64>,
}

impl LstmCellGrads {
    pub fn zeros_like(cell: &LstmCell) -> Self {
        let (h, d) = (cell.hidden_size(), cell.input_dim());
        LstmCellGrads {
            w_i: Matrix::zeros(h, d),
            u_i: Matrix::zeros(h, h),
            b_i: vec![0.0; h],
            w_f: Matrix::zeros(h, d),
            u_f: Matrix::zeros(h, h),
            b_f: vec![0.0; h],
            w_g: Matrix::zeros(h, d),
            u_g: Matrix::zeros(h, h),
            b_g: vec![0.0; h],
            w_o: Matrix::zeros(h, d),
            u_o: Matrix::zeros(h, h),
            b_o: vec![0.0; h],
        }
    }

    fn for_each_pair(&mut self, other: &LstmCellGrads, f: impl Fn(&mut f64, f64) + Copy) {
        let pairs: [(&mut Matrix, &Matrix); 8] = [
            (&mut self.w_i, &other.w_i),
            (&mut self.u_i, &other.u_i),
            (&mut self.w_f, &other.w_f),
            (&mut self.u_f, &other.u_f),
            (&mut self.w_g, &other.w_g),
            (&mut self.u_g, &other.u_g),
            (&mut self.w_o, &other.w_o),
            (&mut self.u_o, &other.u_o),
        ];
        for (a, b) in pairs {
            for (x, y) in a.as_mut_slice().iter_mut().zip(b.as_slice()) {
                f(x, *y);
            }
        }
        let bias_pairs: [(&mut Vec<f64>, &Vec<f64>); 4] = [
            (&mut self.b_i, &other.b_i),
            (&mut self.b_f, &other.b_f),
            (&mut self.b_g, &other.b_g),
            (&mut self.b_o, &other.b_o),
        ];
        for (a, b) in bias_pairs {
            for (x, y) in a.iter_mut().zip(b) {
                f(x, *y);
            }
        }
    }

    pub fn add_assign(&mut self, other: &LstmCellGrads) {
        self.for_each_pair(other, |a, b| *a += b);
    }

    pub fn scale(&mut self, factor: f64) {
        let zero = self.clone();
        // Reuse the traversal with a closure that ignores the second operand.
        self.for_each_pair(&zero, |a, _| *a *= factor);
    }
}

/// How to build the sequence autoencoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LstmConfig {
    pub input_dim: usize,
    /// Hidden units per layer.
    pub hidden_size: usize,
    /// Stacked layers in each of the encoder and the decoder.
    pub num_layers: usize,
    /// Dropout probability on layer outputs during training.
    pub dropout: f64,
    /// Reconstruct the window back-to-front (the default) or front-to-back.
    pub reverse_reconstruction: bool,
}

impl Default for LstmConfig {
    fn default() -> Self {
        LstmConfig {
            input_dim: 0,
            hidden_size: 64,
            num_layers: 2,
            dropout: 0.2,
            reverse_reconstruction: true,
        }
    }
}

impl LstmConfig {
    pub fn with_input_dim(input_dim: usize) -> Self {
        LstmConfig {
            input_dim,
            ..LstmConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_size == 0 || self.num_layers == 0 {
            return Err(Error::Config(
                "sequence autoencoder dimensions must all be ≥ 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config("dropout must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Stacked LSTM encoder–decoder with a linear output projection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LstmEncoderDecoder {
    pub encoder: Vec<LstmCell>,
    pub decoder: Vec<LstmCell>,
    pub projection: DenseLayer,
    pub dropout: f64,
    pub reverse_reconstruction: bool,
}

/// Everything the backward pass needs from one forward pass.
pub struct LstmSeqCache {
    enc_steps: Vec<Vec<StepCache>>, // [layer][t]
    enc_masks: Vec<Vec<Option<Vec<f64>>>>, // [layer < L-1][t]
    dec_steps: Vec<Vec<StepCache>>, // [layer][k], in decoding order
    dec_masks: Vec<Vec<Option<Vec<f64>>>>, // [layer][k]
    proj_inputs: Vec<Vec<f64>>,     // [k] masked top hidden state
    len: usize,
}

impl LstmEncoderDecoder {
    pub fn new(config: &LstmConfig, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let mut encoder = Vec::with_capacity(config.num_layers);
        let mut decoder = Vec::with_capacity(config.num_layers);
        for l in 0..config.num_layers {
            let input = if l == 0 {
                config.input_dim
            } else {
                config.hidden_size
            };
            encoder.push(LstmCell::random(input, config.hidden_size, rng));
        }
        for l in 0..config.num_layers {
            let input = if l == 0 {
                config.input_dim
            } else {
                config.hidden_size
            };
            decoder.push(LstmCell::random(input, config.hidden_size, rng));
        }
        let projection = DenseLayer::random(
            config.hidden_size,
            config.input_dim,
            Activation::Identity,
            rng,
        );
        Ok(LstmEncoderDecoder {
            encoder,
            decoder,
            projection,
            dropout: config.dropout,
            reverse_reconstruction: config.reverse_reconstruction,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.encoder[0].input_dim()
    }

    pub fn hidden_size(&self) -> usize {
        self.encoder[0].hidden_size()
    }

    pub fn num_layers(&self) -> usize {
        self.encoder.len()
    }

    fn check_input(&self, seq: &Matrix) -> Result<()> {
        if seq.cols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: seq.cols(),
                context: "sequence feature dimension".into(),
            });
        }
        if seq.rows() == 0 {
            return Err(Error::Validation("cannot reconstruct an empty sequence".into()));
        }
        Ok(())
    }

    fn make_mask(&self, rng: &mut dyn rand::RngCore) -> Vec<f64> {
        let keep = 1.0 - self.dropout;
        (0..self.hidden_size())
            .map(|_| {
                if uniform_unit(rng) < self.dropout {
                    0.0
                } else {
                    1.0 / keep
                }
            })
            .collect()
    }

    /// Forward pass. When `dropout_rng` is given (training mode), inverted
    /// dropout masks are drawn for every layer output at every step; without
    /// it the pass is deterministic (inference mode). Returns the
    /// reconstruction aligned index-wise with `seq`, plus the cache.
    pub fn forward(
        &self,
        seq: &Matrix,
        mut dropout_rng: Option<&mut dyn rand::RngCore>,
    ) -> Result<(Matrix, LstmSeqCache)> {
        self.check_input(seq)?;
        let w = seq.rows();
        let layers = self.num_layers();
        let hidden = self.hidden_size();
        let training = dropout_rng.is_some() && self.dropout > 0.0;

        // --- Encoder ---
        let mut enc_steps: Vec<Vec<StepCache>> = vec![Vec::with_capacity(w); layers];
        let mut enc_masks: Vec<Vec<Option<Vec<f64>>>> =
            vec![Vec::with_capacity(w); layers.saturating_sub(1)];
        let mut h = vec![vec![0.0; hidden]; layers];
        let mut c = vec![vec![0.0; hidden]; layers];
        for t in 0..w {
            let mut input = seq.row(t).to_vec();
            for l in 0..layers {
                let step = self.encoder[l].step(&input, &h[l], &c[l]);
                h[l] = step.h.clone();
                c[l] = step.c.clone();
                if l + 1 < layers {
                    let mask = if training {
                        let rng = dropout_rng.as_deref_mut().expect("training mode");
                        Some(self.make_mask(rng))
                    } else {
                        None
                    };
                    input = match &mask {
                        Some(m) => step.h.iter().zip(m).map(|(v, s)| v * s).collect(),
                        None => step.h.clone(),
                    };
                    enc_masks[l].push(mask);
                } else {
                    input = Vec::new(); // top layer output feeds nothing per-step
                }
                enc_steps[l].push(step);
            }
        }

        // --- Decoder, seeded with the encoder's final states ---
        let mut dec_steps: Vec<Vec<StepCache>> = vec![Vec::with_capacity(w); layers];
        let mut dec_masks: Vec<Vec<Option<Vec<f64>>>> = vec![Vec::with_capacity(w); layers];
        let mut proj_inputs = Vec::with_capacity(w);
        let mut outputs_decode_order = Matrix::zeros(w, self.input_dim());
        let mut prev_output = vec![0.0; self.input_dim()];
        for k in 0..w {
            let mut input = prev_output.clone();
            for l in 0..layers {
                let step = self.decoder[l].step(&input, &h[l], &c[l]);
                h[l] = step.h.clone();
                c[l] = step.c.clone();
                let mask = if training {
                    let rng = dropout_rng.as_deref_mut().expect("training mode");
                    Some(self.make_mask(rng))
                } else {
                    None
                };
                input = match &mask {
                    Some(m) => step.h.iter().zip(m).map(|(v, s)| v * s).collect(),
                    None => step.h.clone(),
                };
                dec_masks[l].push(mask);
                dec_steps[l].push(step);
            }
            let (_, xhat) = self.projection.forward(&input);
            proj_inputs.push(input);
            outputs_decode_order.row_mut(k).copy_from_slice(&xhat);
            prev_output = xhat;
        }

        // Align with the input ordering.
        let mut aligned = Matrix::zeros(w, self.input_dim());
        for k in 0..w {
            let target_row = if self.reverse_reconstruction {
                w - 1 - k
            } else {
                k
            };
            aligned
                .row_mut(target_row)
                .copy_from_slice(outputs_decode_order.row(k));
        }

        Ok((
            aligned,
            LstmSeqCache {
                enc_steps,
                enc_masks,
                dec_steps,
                dec_masks,
                proj_inputs,
                len: w,
            },
        ))
    }

    /// Inference-mode reconstruction without keeping the cache.
    pub fn reconstruct(&self, seq: &Matrix) -> Result<Matrix> {
        Ok(self.forward(seq, None)?.0)
    }

    /// Backpropagation through time. `d_output` holds ∂loss/∂reconstruction
    /// aligned index-wise with the input sequence (like `forward`'s output).
    pub fn backward(&self, cache: &LstmSeqCache, d_output: &Matrix) -> Result<LstmGrads> {
        let w = cache.len;
        let layers = self.num_layers();
        let hidden = self.hidden_size();
        if d_output.rows() != w || d_output.cols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: w,
                actual: d_output.rows(),
                context: "loss gradient vs cached sequence length".into(),
            });
        }
        if cache.dec_steps.len() != layers || cache.enc_steps.len() != layers {
            return Err(Error::DimensionMismatch {
                expected: layers,
                actual: cache.dec_steps.len(),
                context: "cache layer count".into(),
            });
        }

        let mut grads = LstmGrads::zeros_like(self);

        // Recurrent gradients flowing backward across decoder steps.
        let mut dh_rec = vec![vec![0.0; hidden]; layers];
        let mut dc_rec = vec![vec![0.0; hidden]; layers];
        // Gradient reaching each step's reconstruction through the feedback
        // connection from the following step.
        let mut d_feedback = vec![0.0; self.input_dim()];

        for k in (0..w).rev() {
            let source_row = if self.reverse_reconstruction {
                w - 1 - k
            } else {
                k
            };
            let mut d_xhat = d_output.row(source_row).to_vec();
            for (a, b) in d_xhat.iter_mut().zip(&d_feedback) {
                *a += b;
            }

            // Projection (identity activation): z = W p + b.
            grads.projection.weights.outer_add(&d_xhat, &cache.proj_inputs[k]);
            for (b, d) in grads.projection.bias.iter_mut().zip(&d_xhat) {
                *b += d;
            }
            let mut d_above = self.projection.weights.matvec_t(&d_xhat);

            for l in (0..layers).rev() {
                if let Some(mask) = &cache.dec_masks[l][k] {
                    for (d, m) in d_above.iter_mut().zip(mask) {
                        *d *= m;
                    }
                }
                let mut dh = d_above;
                for (a, b) in dh.iter_mut().zip(&dh_rec[l]) {
                    *a += b;
                }
                let (dx, dh_prev, dc_prev) = self.decoder[l].backward_step(
                    &cache.dec_steps[l][k],
                    &dh,
                    &dc_rec[l],
                    &mut grads.decoder[l],
                );
                dh_rec[l] = dh_prev;
                dc_rec[l] = dc_prev;
                d_above = dx;
            }
            // d_above is now the gradient w.r.t. this step's input: the
            // previous step's reconstruction (or the fixed zero start vector).
            d_feedback = if k > 0 {
                d_above
            } else {
                vec![0.0; self.input_dim()]
            };
        }

        // The decoder's initial states were the encoder's final states.
        let mut dh_enc = dh_rec;
        let mut dc_enc = dc_rec;
        for t in (0..w).rev() {
            let mut d_from_above: Option<Vec<f64>> = None;
            for l in (0..layers).rev() {
                let mut dh = dh_enc[l].clone();
                if let Some(mut d_above) = d_from_above.take() {
                    if let Some(mask) = &cache.enc_masks[l][t] {
                        for (d, m) in d_above.iter_mut().zip(mask) {
                            *d *= m;
                        }
                    }
                    for (a, b) in dh.iter_mut().zip(&d_above) {
                        *a += b;
                    }
                }
                let (dx, dh_prev, dc_prev) = self.encoder[l].backward_step(
                    &cache.enc_steps[l][t],
                    &dh,
                    &dc_enc[l],
                    &mut grads.encoder[l],
                );
                dh_enc[l] = dh_prev;
                dc_enc[l] = dc_prev;
                d_from_above = if l > 0 { Some(dx) } else { None };
            }
        }

        Ok(grads)
    }
}

/// Gradients for the whole encoder–decoder.
#[derive(Debug, Clone)]
pub struct LstmGrads {
    pub encoder: Vec<LstmCellGrads>,
    pub decoder: Vec<LstmCellGrads>,
    pub projection: DenseGrads,
}

impl LstmGrads {
    pub fn zeros_like(model: &LstmEncoderDecoder) -> Self {
        LstmGrads {
            encoder: model.encoder.iter().map(LstmCellGrads::zeros_like).collect(),
            decoder: model.decoder.iter().map(LstmCellGrads::zeros_like).collect(),
            projection: DenseGrads::zeros_like(&model.projection),
        }
    }

    pub fn add_assign(&mut self, other: &LstmGrads) {
        for (a, b) in self.encoder.iter_mut().zip(&other.encoder) {
            a.add_assign(b);
        }
        for (a, b) in self.decoder.iter_mut().zip(&other.decoder) {
            a.add_assign(b);
        }
        self.projection.add_assign(&other.projection);
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self.encoder.iter_mut() {
            g.scale(factor);
        }
        for g in self.decoder.iter_mut() {
            g.scale(factor);
        }
        self.projection.scale(factor);
    }
}
