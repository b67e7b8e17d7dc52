//! Gated recurrent (LSTM) cell and the bidirectional sequence encoder.
//!
//! Gate pre-activations are packed column-wise as `[i | f | g | o]`, each
//! block `H` wide:
//!
//! ```text
//! a   = x W_x + h_prev W_h + b
//! i,f,o = sigmoid(a_i, a_f, a_o)     g = tanh(a_g)
//! c   = f * c_prev + i * g
//! h   = o * tanh(c)
//! ```

use ndarray::{concatenate, s, Axis};

use super::Matrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    /// `in x 4H`
    pub w_x: Matrix,
    /// `H x 4H`
    pub w_h: Matrix,
    /// `1 x 4H`
    pub b: Matrix,
}

impl LstmParams {
    pub fn zeros(input: usize, units: usize) -> Self {
        Self {
            w_x: Matrix::zeros((input, 4 * units)),
            w_h: Matrix::zeros((units, 4 * units)),
            b: Matrix::zeros((1, 4 * units)),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.input_dim(), self.units())
    }

    pub fn units(&self) -> usize {
        self.w_h.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.w_x.nrows()
    }
}

/// Gradients share the parameter layout.
pub type LstmGrads = LstmParams;

/// Values saved by the forward step for the backward step. `h_prev`/`c_prev`
/// are `None` for a zero initial state.
#[derive(Debug, Clone)]
pub struct CellCache {
    x: Matrix,
    h_prev: Option<Matrix>,
    c_prev: Option<Matrix>,
    i: Matrix,
    f: Matrix,
    g: Matrix,
    o: Matrix,
    tanh_c: Matrix,
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn cell_forward(
    x: &Matrix,
    h_prev: Option<&Matrix>,
    c_prev: Option<&Matrix>,
    p: &LstmParams,
) -> Result<(Matrix, Matrix, CellCache)> {
    let units = p.units();
    let batch = x.nrows();
    if x.ncols() != p.input_dim()
        || p.w_x.ncols() != 4 * units
        || p.b.dim() != (1, 4 * units)
        || h_prev.is_some_and(|h| h.dim() != (batch, units))
        || c_prev.is_some_and(|c| c.dim() != (batch, units))
    {
        return Err(Error::DimensionMismatch(format!(
            "lstm cell: x {:?}, W_x {:?}, W_h {:?}, h {:?}, c {:?}",
            x.dim(),
            p.w_x.dim(),
            p.w_h.dim(),
            h_prev.map(|h| h.dim()),
            c_prev.map(|c| c.dim())
        )));
    }
    let mut a = x.dot(&p.w_x);
    if let Some(h) = h_prev {
        a += &h.dot(&p.w_h);
    }
    a += &p.b;

    let i = a.slice(s![.., 0..units]).mapv(sigmoid);
    let f = a.slice(s![.., units..2 * units]).mapv(sigmoid);
    let g = a.slice(s![.., 2 * units..3 * units]).mapv(f64::tanh);
    let o = a.slice(s![.., 3 * units..]).mapv(sigmoid);
    let mut c = &i * &g;
    if let Some(cp) = c_prev {
        c += &(&f * cp);
    }
    let tanh_c = c.mapv(f64::tanh);
    let h = &o * &tanh_c;
    let cache = CellCache {
        x: x.clone(),
        h_prev: h_prev.cloned(),
        c_prev: c_prev.cloned(),
        i,
        f,
        g,
        o,
        tanh_c,
    };
    Ok((h, c, cache))
}

/// One LSTM step: returns `(h_t, c_t)` and the cache for [`lstm_cell_backward`].
pub fn lstm_cell_forward(
    x: &Matrix,
    h_prev: &Matrix,
    c_prev: &Matrix,
    p: &LstmParams,
) -> Result<(Matrix, Matrix, CellCache)> {
    cell_forward(x, Some(h_prev), Some(c_prev), p)
}

/// Gradients w.r.t. input and previous state: `(dx, dh_prev, dc_prev)`.
pub struct CellInputGrads {
    pub dx: Matrix,
    pub dh_prev: Matrix,
    pub dc_prev: Matrix,
}

/// Backward step given the gradient flowing into `h_t` and `c_t`. Parameter
/// gradients are accumulated into `grads`.
pub fn lstm_cell_backward(
    cache: &CellCache,
    p: &LstmParams,
    dh: &Matrix,
    dc: &Matrix,
    grads: &mut LstmGrads,
) -> CellInputGrads {
    let units = p.units();
    let CellCache {
        x,
        h_prev,
        c_prev,
        i,
        f,
        g,
        o,
        tanh_c,
    } = cache;
    let d_o = dh * tanh_c;
    let dc_total = dc + &(dh * o * &tanh_c.mapv(|t| 1.0 - t * t));
    let di = &dc_total * g;
    let dg = &dc_total * i;
    let (df, dc_prev) = match c_prev {
        Some(cp) => (&dc_total * cp, &dc_total * f),
        None => (Matrix::zeros(f.dim()), &dc_total * f),
    };

    let mut da = Matrix::zeros((x.nrows(), 4 * units));
    da.slice_mut(s![.., 0..units])
        .assign(&(di * i * &i.mapv(|v| 1.0 - v)));
    da.slice_mut(s![.., units..2 * units])
        .assign(&(df * f * &f.mapv(|v| 1.0 - v)));
    da.slice_mut(s![.., 2 * units..3 * units])
        .assign(&(dg * &g.mapv(|v| 1.0 - v * v)));
    da.slice_mut(s![.., 3 * units..])
        .assign(&(d_o * o * &o.mapv(|v| 1.0 - v)));

    grads.w_x += &x.t().dot(&da);
    if let Some(hp) = h_prev {
        grads.w_h += &hp.t().dot(&da);
    }
    grads.b += &da.sum_axis(Axis(0)).insert_axis(Axis(0));
    CellInputGrads {
        dx: da.dot(&p.w_x.t()),
        dh_prev: da.dot(&p.w_h.t()),
        dc_prev,
    }
}

/// Cached forward pass of one direction over a sequence.
#[derive(Debug, Clone)]
pub struct DirectionCache {
    /// In processing order.
    steps: Vec<CellCache>,
    reverse: bool,
}

/// Runs a cell over `xs` (`T` matrices of `B x in`), from a zero state, in
/// forward or reversed order. Returns hidden states indexed by time.
pub fn run_direction(
    xs: &[Matrix],
    p: &LstmParams,
    reverse: bool,
) -> Result<(Vec<Matrix>, DirectionCache)> {
    let t_len = xs.len();
    let mut hs: Vec<Option<Matrix>> = vec![None; t_len];
    let mut steps = Vec::with_capacity(t_len);
    let mut state: Option<(Matrix, Matrix)> = None;
    for k in 0..t_len {
        let t = if reverse { t_len - 1 - k } else { k };
        let (h, c, cache) = match &state {
            None => cell_forward(&xs[t], None, None, p)?,
            Some((h, c)) => cell_forward(&xs[t], Some(h), Some(c), p)?,
        };
        hs[t] = Some(h.clone());
        steps.push(cache);
        state = Some((h, c));
    }
    Ok((
        hs.into_iter()
            .map(|h| h.expect("every step visited"))
            .collect(),
        DirectionCache { steps, reverse },
    ))
}

/// Back-propagation through time for one direction. `dhs[t]` is the gradient
/// arriving at the hidden output of time `t` (may be `None`). Returns the
/// input gradients indexed by time.
pub fn backprop_direction(
    cache: &DirectionCache,
    p: &LstmParams,
    dhs: &[Option<Matrix>],
    grads: &mut LstmGrads,
) -> Vec<Matrix> {
    let t_len = cache.steps.len();
    let batch = cache.steps[0].x.nrows();
    let units = p.units();
    let mut dxs: Vec<Option<Matrix>> = vec![None; t_len];
    let mut dh_next = Matrix::zeros((batch, units));
    let mut dc_next = Matrix::zeros((batch, units));
    for k in (0..t_len).rev() {
        let t = if cache.reverse { t_len - 1 - k } else { k };
        let dh = match &dhs[t] {
            Some(d) => &dh_next + d,
            None => dh_next.clone(),
        };
        let g = lstm_cell_backward(&cache.steps[k], p, &dh, &dc_next, grads);
        dxs[t] = Some(g.dx);
        dh_next = g.dh_prev;
        dc_next = g.dc_prev;
    }
    dxs.into_iter()
        .map(|d| d.expect("every step visited"))
        .collect()
}

/// Bidirectional encoding of a sequence: forward pass over `xs`, independent
/// backward pass over the reversed sequence, output
/// `[h_fwd(T-1) | h_bwd(0)]` of width `2H`. With a single step this is two
/// cell applications from a zero state, concatenated.
pub fn bidirectional_encode(xs: &[Matrix], fwd: &LstmParams, bwd: &LstmParams) -> Result<Matrix> {
    if xs.is_empty() {
        return Err(Error::InvalidArgument("empty sequence".into()));
    }
    let (hf, _) = run_direction(xs, fwd, false)?;
    let (hb, _) = run_direction(xs, bwd, true)?;
    Ok(concatenate![Axis(1), hf[xs.len() - 1], hb[0]])
}
