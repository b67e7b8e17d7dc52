//! Model specifications and the network that realizes them.
//!
//! An MLP stacks `Dense -> [BatchNorm] -> ReLU -> Dropout` blocks; a recurrent
//! model stacks LSTM layers (bidirectional for [`ModelKind::Birnn`]) and ends
//! in `[BatchNorm] -> Dropout -> Dense`. Both emit logits over
//! `num_classes`.

use ndarray::{concatenate, s, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{
    batchnorm_backward, batchnorm_forward, dense_backward, dense_forward, dropout_mask,
    relu_backward, relu_forward, BnCache, BnStats,
};
use super::loss::cross_entropy;
use super::lstm::{backprop_direction, run_direction, DirectionCache, LstmParams};
use super::{Matrix, Mode};
use crate::error::{Error, Result};
use crate::features::{FEATURE_DIM, NUM_CLASSES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Mlp,
    /// Bidirectional LSTM encoder.
    Birnn,
    /// Unidirectional LSTM encoder.
    Lstm,
}

impl ModelKind {
    pub fn is_recurrent(self) -> bool {
        !matches!(self, ModelKind::Mlp)
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Mlp => "mlp",
            ModelKind::Birnn => "birnn",
            ModelKind::Lstm => "lstm",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mlp" => Ok(ModelKind::Mlp),
            "birnn" | "bi-rnn" => Ok(ModelKind::Birnn),
            "lstm" | "rnn" => Ok(ModelKind::Lstm),
            other => Err(Error::InvalidArgument(format!(
                "unknown architecture {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub input_dim: usize,
    /// Hidden widths of the MLP.
    pub hidden: Vec<usize>,
    pub rnn_units: usize,
    pub rnn_layers: usize,
    /// Ignored (treated as 1) for the MLP.
    pub seq_length: usize,
    pub dropout_p: f64,
    pub l2_lambda: f64,
    pub use_batchnorm: bool,
    pub num_classes: usize,
}

impl ModelSpec {
    /// `128-64-32` MLP with batch normalization, dropout 0.3 and L2 1e-4.
    pub fn mlp(hidden: Vec<usize>) -> Self {
        Self {
            kind: ModelKind::Mlp,
            input_dim: FEATURE_DIM,
            hidden,
            rnn_units: 0,
            rnn_layers: 0,
            seq_length: 1,
            dropout_p: 0.3,
            l2_lambda: 1e-4,
            use_batchnorm: true,
            num_classes: NUM_CLASSES,
        }
    }

    pub fn birnn(rnn_units: usize, rnn_layers: usize, seq_length: usize) -> Self {
        Self {
            kind: ModelKind::Birnn,
            input_dim: FEATURE_DIM,
            hidden: Vec::new(),
            rnn_units,
            rnn_layers,
            seq_length,
            dropout_p: 0.3,
            l2_lambda: 1e-4,
            use_batchnorm: false,
            num_classes: NUM_CLASSES,
        }
    }

    pub fn lstm(rnn_units: usize, rnn_layers: usize, seq_length: usize) -> Self {
        Self {
            kind: ModelKind::Lstm,
            ..Self::birnn(rnn_units, rnn_layers, seq_length)
        }
    }

    /// Steps per sample the network consumes.
    pub fn steps(&self) -> usize {
        if self.kind.is_recurrent() {
            self.seq_length
        } else {
            1
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.input_dim == 0 || self.num_classes < 2 {
            return bad(format!(
                "input_dim {} / num_classes {} invalid",
                self.input_dim, self.num_classes
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return bad(format!("dropout_p {} outside [0, 1)", self.dropout_p));
        }
        if !(self.l2_lambda >= 0.0 && self.l2_lambda.is_finite()) {
            return bad(format!("l2_lambda {} must be >= 0", self.l2_lambda));
        }
        match self.kind {
            ModelKind::Mlp => {
                if self.hidden.contains(&0) {
                    return bad("hidden widths must be >= 1".into());
                }
            }
            _ => {
                if self.rnn_units == 0 || self.rnn_layers == 0 || self.seq_length == 0 {
                    return bad(format!(
                        "recurrent model needs units, layers and seq_length >= 1 (got {}, {}, {})",
                        self.rnn_units, self.rnn_layers, self.seq_length
                    ));
                }
            }
        }
        Ok(())
    }

    /// Short human-readable architecture string.
    pub fn describe(&self) -> String {
        match self.kind {
            ModelKind::Mlp => {
                let widths: Vec<String> = self.hidden.iter().map(|h| h.to_string()).collect();
                format!(
                    "MLP {}{}{}",
                    widths.join("-"),
                    if self.use_batchnorm { " +BN" } else { "" },
                    if self.dropout_p > 0.0 {
                        format!(" +dropout {}", self.dropout_p)
                    } else {
                        String::new()
                    }
                )
            }
            k => format!(
                "{} {}x{}{}",
                if k == ModelKind::Birnn {
                    "BiLSTM"
                } else {
                    "LSTM"
                },
                self.rnn_layers,
                self.rnn_units,
                if self.use_batchnorm { " +BN" } else { "" }
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    pub w: Matrix,
    pub b: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BnParams {
    pub gamma: Matrix,
    pub beta: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RnnLayer {
    pub fwd: LstmParams,
    pub bwd: Option<LstmParams>,
}

/// Every trainable tensor of a network. Gradients use the same layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub hidden: Vec<DenseParams>,
    pub hidden_bn: Vec<Option<BnParams>>,
    pub rnn: Vec<RnnLayer>,
    pub head_bn: Option<BnParams>,
    pub out: DenseParams,
}

/// Name, shape and whether L2 applies, in the canonical tensor order.
#[derive(Debug, Clone, PartialEq)]
pub struct Slot {
    pub name: String,
    pub shape: (usize, usize),
    pub decay: bool,
}

impl Params {
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    pub fn tensors(&self) -> Vec<&Matrix> {
        let mut v: Vec<&Matrix> = Vec::new();
        for (d, bn) in self.hidden.iter().zip(&self.hidden_bn) {
            v.extend([&d.w, &d.b]);
            if let Some(bn) = bn {
                v.extend([&bn.gamma, &bn.beta]);
            }
        }
        for l in &self.rnn {
            v.extend([&l.fwd.w_x, &l.fwd.w_h, &l.fwd.b]);
            if let Some(b) = &l.bwd {
                v.extend([&b.w_x, &b.w_h, &b.b]);
            }
        }
        if let Some(bn) = &self.head_bn {
            v.extend([&bn.gamma, &bn.beta]);
        }
        v.extend([&self.out.w, &self.out.b]);
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut v: Vec<&mut Matrix> = Vec::new();
        for (d, bn) in self.hidden.iter_mut().zip(self.hidden_bn.iter_mut()) {
            v.extend([&mut d.w, &mut d.b]);
            if let Some(bn) = bn {
                v.extend([&mut bn.gamma, &mut bn.beta]);
            }
        }
        for l in &mut self.rnn {
            v.extend([&mut l.fwd.w_x, &mut l.fwd.w_h, &mut l.fwd.b]);
            if let Some(b) = &mut l.bwd {
                v.extend([&mut b.w_x, &mut b.w_h, &mut b.b]);
            }
        }
        if let Some(bn) = &mut self.head_bn {
            v.extend([&mut bn.gamma, &mut bn.beta]);
        }
        v.extend([&mut self.out.w, &mut self.out.b]);
        v
    }

    pub fn slots(&self) -> Vec<Slot> {
        let mut names: Vec<(String, bool)> = Vec::new();
        for (i, bn) in self.hidden_bn.iter().enumerate() {
            names.push((format!("dense{i}.w"), true));
            names.push((format!("dense{i}.b"), false));
            if bn.is_some() {
                names.push((format!("bn{i}.gamma"), false));
                names.push((format!("bn{i}.beta"), false));
            }
        }
        for (i, l) in self.rnn.iter().enumerate() {
            let dirs: &[&str] = if l.bwd.is_some() {
                &["fwd", "bwd"]
            } else {
                &["fwd"]
            };
            for d in dirs {
                names.push((format!("lstm{i}.{d}.w_x"), true));
                names.push((format!("lstm{i}.{d}.w_h"), true));
                names.push((format!("lstm{i}.{d}.b"), false));
            }
        }
        if self.head_bn.is_some() {
            names.push(("head_bn.gamma".into(), false));
            names.push(("head_bn.beta".into(), false));
        }
        names.push(("out.w".into(), true));
        names.push(("out.b".into(), false));
        names
            .into_iter()
            .zip(self.tensors())
            .map(|((name, decay), t)| Slot {
                name,
                shape: t.dim(),
                decay,
            })
            .collect()
    }

    /// `sum ||W||^2` over the decayed tensors.
    pub fn l2_norm_sq(&self) -> f64 {
        self.tensors()
            .into_iter()
            .zip(self.slots())
            .filter(|(_, s)| s.decay)
            .map(|(t, _)| t.iter().map(|v| v * v).sum::<f64>())
            .sum()
    }
}

fn glorot(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Matrix::from_shape_fn((rows, cols), |_| rng.random_range(-limit..limit))
}

fn bn_params(dim: usize) -> BnParams {
    BnParams {
        gamma: Matrix::ones((1, dim)),
        beta: Matrix::zeros((1, dim)),
    }
}

fn lstm_init(input: usize, units: usize, rng: &mut ChaCha8Rng) -> LstmParams {
    let mut b = Matrix::zeros((1, 4 * units));
    b.slice_mut(s![.., units..2 * units]).fill(1.0);
    LstmParams {
        w_x: glorot(input, 4 * units, rng),
        w_h: glorot(units, 4 * units, rng),
        b,
    }
}

#[derive(Debug, Clone)]
struct MlpLayerCache {
    x: Matrix,
    bn: Option<BnCache>,
    relu_in: Matrix,
    mask: Option<Matrix>,
}

#[derive(Debug, Clone)]
struct RnnLayerCache {
    fwd: DirectionCache,
    bwd: Option<DirectionCache>,
}

/// Everything backward needs from one forward pass, plus the batchnorm
/// running statistics the pass would commit (train mode only).
#[derive(Debug, Clone)]
pub struct ForwardCache {
    mlp: Vec<MlpLayerCache>,
    rnn: Vec<RnnLayerCache>,
    steps: usize,
    head_bn: Option<BnCache>,
    head_mask: Option<Matrix>,
    out_in: Matrix,
    pub bn_updates: Vec<BnStats>,
}

/// Loss, gradient and pending batchnorm statistics of one minibatch.
#[derive(Debug, Clone)]
pub struct StepResult {
    /// Data loss plus the L2 penalty.
    pub loss: f64,
    pub data_loss: f64,
    pub logits: Matrix,
    pub grads: Params,
    pub bn_updates: Vec<BnStats>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub spec: ModelSpec,
    pub params: Params,
    /// Running statistics, hidden-layer norms first, then the head norm.
    pub bn_stats: Vec<BnStats>,
}

impl Network {
    /// Glorot-uniform weights, zero biases (forget-gate bias 1), unit gammas.
    pub fn new(spec: &ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut hidden = Vec::new();
        let mut hidden_bn = Vec::new();
        let mut rnn = Vec::new();
        let mut bn_stats = Vec::new();
        let mut width = spec.input_dim;
        let mut head_bn = None;
        match spec.kind {
            ModelKind::Mlp => {
                for &h in &spec.hidden {
                    hidden.push(DenseParams {
                        w: glorot(width, h, &mut rng),
                        b: Matrix::zeros((1, h)),
                    });
                    if spec.use_batchnorm {
                        hidden_bn.push(Some(bn_params(h)));
                        bn_stats.push(BnStats::new(h));
                    } else {
                        hidden_bn.push(None);
                    }
                    width = h;
                }
            }
            kind => {
                let bi = kind == ModelKind::Birnn;
                for _ in 0..spec.rnn_layers {
                    let fwd = lstm_init(width, spec.rnn_units, &mut rng);
                    let bwd = bi.then(|| lstm_init(width, spec.rnn_units, &mut rng));
                    rnn.push(RnnLayer { fwd, bwd });
                    width = if bi {
                        2 * spec.rnn_units
                    } else {
                        spec.rnn_units
                    };
                }
                if spec.use_batchnorm {
                    head_bn = Some(bn_params(width));
                    bn_stats.push(BnStats::new(width));
                }
            }
        }
        let out = DenseParams {
            w: glorot(width, spec.num_classes, &mut rng),
            b: Matrix::zeros((1, spec.num_classes)),
        };
        Ok(Self {
            spec: spec.clone(),
            params: Params {
                hidden,
                hidden_bn,
                rnn,
                head_bn,
                out,
            },
            bn_stats,
        })
    }

    pub fn num_parameters(&self) -> usize {
        self.params.tensors().iter().map(|t| t.len()).sum()
    }

    fn check_input(&self, xs: &[Matrix]) -> Result<usize> {
        let steps = self.spec.steps();
        if xs.len() != steps {
            return Err(Error::DimensionMismatch(format!(
                "model expects {steps} steps, got {}",
                xs.len()
            )));
        }
        let b = xs[0].nrows();
        if b == 0 || xs.iter().any(|x| x.dim() != (b, self.spec.input_dim)) {
            return Err(Error::DimensionMismatch(format!(
                "inputs must be non-empty batch x {} at every step",
                self.spec.input_dim
            )));
        }
        Ok(b)
    }

    /// Logits for a batch given as one `B x input_dim` matrix per step.
    /// Dropout masks are drawn from `rng` in train mode; without an rng
    /// dropout is skipped.
    pub fn forward(
        &self,
        xs: &[Matrix],
        mode: Mode,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(Matrix, ForwardCache)> {
        let batch = self.check_input(xs)?;
        let p = self.spec.dropout_p;
        let mut draw = |rows: usize, cols: usize| match rng.as_deref_mut() {
            Some(r) => dropout_mask(rows, cols, p, mode, r),
            None => None,
        };
        let mut bn_iter = self.bn_stats.iter();
        let mut bn_updates = Vec::new();
        let mut mlp = Vec::new();
        let mut rnn = Vec::new();

        let mut h = xs[0].clone();
        for (d, bn) in self.params.hidden.iter().zip(&self.params.hidden_bn) {
            let z = dense_forward(&h, &d.w, &d.b)?;
            let (relu_in, bn_cache) = match bn {
                Some(bn) => {
                    let stats = bn_iter.next().expect("stats per norm layer");
                    let (y, mut c) = batchnorm_forward(&z, &bn.gamma, &bn.beta, stats, mode)?;
                    bn_updates.extend(c.updated.take());
                    (y, Some(c))
                }
                None => (z, None),
            };
            let mut a = relu_forward(&relu_in);
            let mask = draw(batch, a.ncols());
            if let Some(m) = &mask {
                a *= m;
            }
            mlp.push(MlpLayerCache {
                x: std::mem::replace(&mut h, a),
                bn: bn_cache,
                relu_in,
                mask,
            });
        }

        let mut head_bn = None;
        let mut head_mask = None;
        if self.spec.kind.is_recurrent() {
            let mut seq: Vec<Matrix> = xs.to_vec();
            let last = self.params.rnn.len() - 1;
            for (li, layer) in self.params.rnn.iter().enumerate() {
                let (hf, cf) = run_direction(&seq, &layer.fwd, false)?;
                let back = match &layer.bwd {
                    Some(bp) => Some(run_direction(&seq, bp, true)?),
                    None => None,
                };
                let t = seq.len();
                if li == last {
                    h = match &back {
                        Some((hb, _)) => concatenate![Axis(1), hf[t - 1], hb[0]],
                        None => hf[t - 1].clone(),
                    };
                } else {
                    seq = match &back {
                        Some((hb, _)) => (0..t)
                            .map(|k| concatenate![Axis(1), hf[k], hb[k]])
                            .collect(),
                        None => hf,
                    };
                }
                rnn.push(RnnLayerCache {
                    fwd: cf,
                    bwd: back.map(|(_, c)| c),
                });
            }
            if let Some(bn) = &self.params.head_bn {
                let stats = bn_iter.next().expect("stats per norm layer");
                let (y, mut c) = batchnorm_forward(&h, &bn.gamma, &bn.beta, stats, mode)?;
                bn_updates.extend(c.updated.take());
                head_bn = Some(c);
                h = y;
            }
            head_mask = draw(batch, h.ncols());
            if let Some(m) = &head_mask {
                h *= m;
            }
        }
        let logits = dense_forward(&h, &self.params.out.w, &self.params.out.b)?;
        Ok((
            logits,
            ForwardCache {
                mlp,
                rnn,
                steps: xs.len(),
                head_bn,
                head_mask,
                out_in: h,
                bn_updates,
            },
        ))
    }

    /// Gradients of `data_loss + l2 * sum ||W||^2` given `d data_loss / d logits`.
    pub fn backward(&self, cache: &ForwardCache, dlogits: &Matrix) -> Params {
        let l2 = self.spec.l2_lambda;
        let mut grads = self.params.zeros_like();
        let g = dense_backward(&cache.out_in, &self.params.out.w, dlogits, l2);
        grads.out = DenseParams { w: g.dw, b: g.db };
        let mut d = g.dx;

        if self.spec.kind.is_recurrent() {
            if let Some(m) = &cache.head_mask {
                d *= m;
            }
            if let (Some(c), Some(bn)) = (&cache.head_bn, &self.params.head_bn) {
                let g = batchnorm_backward(c, &bn.gamma, &d);
                grads.head_bn = Some(BnParams {
                    gamma: g.dgamma,
                    beta: g.dbeta,
                });
                d = g.dx;
            }
            let t = cache.steps;
            let units = self.spec.rnn_units;
            let n_layers = self.params.rnn.len();
            // gradient w.r.t. each layer's per-step output
            let mut dout: Vec<Option<Matrix>> = vec![None; t];
            for li in (0..n_layers).rev() {
                let layer = &self.params.rnn[li];
                let lc = &cache.rnn[li];
                let bi = layer.bwd.is_some();
                let (dhf, dhb): (Vec<Option<Matrix>>, Vec<Option<Matrix>>) = if li == n_layers - 1 {
                    let mut f = vec![None; t];
                    let mut b = vec![None; t];
                    f[t - 1] = Some(d.slice(s![.., 0..units]).to_owned());
                    if bi {
                        b[0] = Some(d.slice(s![.., units..]).to_owned());
                    }
                    (f, b)
                } else {
                    dout.iter()
                        .map(|o| {
                            let o = o.as_ref().expect("upper layer filled every step");
                            (
                                Some(o.slice(s![.., 0..units]).to_owned()),
                                bi.then(|| o.slice(s![.., units..]).to_owned()),
                            )
                        })
                        .unzip()
                };
                let gl = &mut grads.rnn[li];
                let mut dxs = backprop_direction(&lc.fwd, &layer.fwd, &dhf, &mut gl.fwd);
                if let (Some(bp), Some(bc), Some(bg)) = (&layer.bwd, &lc.bwd, gl.bwd.as_mut()) {
                    let dxb = backprop_direction(bc, bp, &dhb, bg);
                    for (a, b) in dxs.iter_mut().zip(dxb) {
                        *a += &b;
                    }
                }
                for (lp, lg) in std::iter::once((&layer.fwd, &mut gl.fwd))
                    .chain(layer.bwd.as_ref().zip(gl.bwd.as_mut()))
                {
                    lg.w_x.scaled_add(2.0 * l2, &lp.w_x);
                    lg.w_h.scaled_add(2.0 * l2, &lp.w_h);
                }
                dout = dxs.into_iter().map(Some).collect();
            }
        }

        for i in (0..self.params.hidden.len()).rev() {
            let c = &cache.mlp[i];
            if let Some(m) = &c.mask {
                d *= m;
            }
            d = relu_backward(&c.relu_in, &d);
            if let (Some(bc), Some(bn)) = (&c.bn, &self.params.hidden_bn[i]) {
                let g = batchnorm_backward(bc, &bn.gamma, &d);
                grads.hidden_bn[i] = Some(BnParams {
                    gamma: g.dgamma,
                    beta: g.dbeta,
                });
                d = g.dx;
            }
            let g = dense_backward(&c.x, &self.params.hidden[i].w, &d, l2);
            grads.hidden[i] = DenseParams { w: g.dw, b: g.db };
            d = g.dx;
        }
        grads
    }

    /// Objective value and gradients for one minibatch.
    pub fn loss_and_grads(
        &self,
        xs: &[Matrix],
        targets: &[usize],
        class_weights: Option<&[f64]>,
        mode: Mode,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<StepResult> {
        let (logits, cache) = self.forward(xs, mode, rng)?;
        let (data_loss, dlogits) = cross_entropy(&logits, targets, class_weights)?;
        let grads = self.backward(&cache, &dlogits);
        Ok(StepResult {
            loss: data_loss + self.spec.l2_lambda * self.params.l2_norm_sq(),
            data_loss,
            logits,
            grads,
            bn_updates: cache.bn_updates,
        })
    }

    /// Inference-mode logits.
    pub fn logits(&self, xs: &[Matrix]) -> Result<Matrix> {
        Ok(self.forward(xs, Mode::Infer, None)?.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::testing::random_matrix;

    #[test]
    fn parameter_counts() {
        let net = Network::new(&ModelSpec::mlp(vec![128, 64, 32]), 1).unwrap();
        let want = (8 * 128 + 128 + 2 * 128)
            + (128 * 64 + 64 + 2 * 64)
            + (64 * 32 + 32 + 2 * 32)
            + (32 * 5 + 5);
        assert_eq!(net.num_parameters(), want);
        assert_eq!(net.bn_stats.len(), 3);

        let net = Network::new(&ModelSpec::birnn(16, 1, 1), 1).unwrap();
        let lstm = 8 * 64 + 16 * 64 + 64;
        assert_eq!(net.num_parameters(), 2 * lstm + 32 * 5 + 5);
        let net = Network::new(&ModelSpec::lstm(16, 2, 10), 1).unwrap();
        assert_eq!(
            net.num_parameters(),
            lstm + (16 * 64 + 16 * 64 + 64) + 16 * 5 + 5
        );
    }

    #[test]
    fn slots_align_with_tensors() {
        let mut spec = ModelSpec::birnn(4, 2, 3);
        spec.use_batchnorm = true;
        let net = Network::new(&spec, 0).unwrap();
        let slots = net.params.slots();
        let tensors = net.params.tensors();
        assert_eq!(slots.len(), tensors.len());
        for (s, t) in slots.iter().zip(tensors) {
            assert_eq!(s.shape, t.dim(), "{}", s.name);
        }
        assert_eq!(slots[0].name, "lstm0.fwd.w_x");
        assert_eq!(slots[3].name, "lstm0.bwd.w_x");
        assert_eq!(slots[6].shape, (8, 16));
        assert_eq!(slots.last().unwrap().name, "out.b");
        // forget-gate bias starts at one
        assert!(net.params.rnn[0]
            .fwd
            .b
            .slice(s![.., 4..8])
            .iter()
            .all(|&v| v == 1.0));
    }

    #[test]
    fn rejects_wrong_step_count_and_width() {
        let net = Network::new(&ModelSpec::birnn(4, 1, 5), 0).unwrap();
        let x = random_matrix(3, 8, 1);
        assert!(net.logits(std::slice::from_ref(&x)).is_err());
        assert!(net.logits(&vec![x; 5]).is_ok());
        assert!(net.logits(&vec![random_matrix(3, 7, 1); 5]).is_err());
    }

    #[test]
    fn invalid_specs() {
        let mut s = ModelSpec::mlp(vec![8]);
        s.dropout_p = 1.0;
        assert!(s.validate().is_err());
        assert!(ModelSpec::birnn(0, 1, 1).validate().is_err());
        assert!(ModelSpec::birnn(4, 1, 0).validate().is_err());
        assert!(ModelSpec::mlp(vec![8, 0]).validate().is_err());
    }

    #[test]
    fn infer_mode_is_row_independent() {
        for spec in [ModelSpec::mlp(vec![16, 8]), ModelSpec::birnn(6, 2, 3)] {
            let net = Network::new(&spec, 3).unwrap();
            let steps = spec.steps();
            let xs: Vec<Matrix> = (0..steps)
                .map(|t| random_matrix(7, 8, 10 + t as u64))
                .collect();
            let all = net.logits(&xs).unwrap();
            for r in 0..7 {
                let one: Vec<Matrix> = xs
                    .iter()
                    .map(|x| x.slice(s![r..r + 1, ..]).to_owned())
                    .collect();
                let l = net.logits(&one).unwrap();
                for (a, b) in l.row(0).iter().zip(all.row(r).iter()) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn spec_json_round_trip() {
        let s = ModelSpec::lstm(32, 1, 10);
        let back: ModelSpec = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
        assert_eq!("birnn".parse::<ModelKind>().unwrap(), ModelKind::Birnn);
        assert!("cnn".parse::<ModelKind>().is_err());
    }
}
