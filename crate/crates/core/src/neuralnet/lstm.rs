//! Peephole LSTM with batched forward pass and backpropagation through time.
//!
//! Per step, with `σ` the logistic function and `⊙` element-wise product:
//!
//! ```text
//! i = σ(W_xi x + W_hi h' + w_ci ⊙ c' + b_i)
//! f = σ(W_xf x + W_hf h' + w_cf ⊙ c' + b_f)
//! z = W_xc x + W_hc h' + b_c
//! c = f ⊙ c' + i ⊙ tanh(z)
//! o = σ(W_xo x + W_ho h' + w_co ⊙ c + b_o)
//! h = o ⊙ tanh(c)
//! ```
//!
//! where `h'`, `c'` are the previous hidden and cell states. Peephole weights
//! are diagonal. Batched code packs the four gate blocks into a single
//! `4H × (D + H)` matrix so each step is one matrix product.

use serde::{Deserialize, Serialize};

use super::activation::sigmoid;
use super::params::{fill_uniform, qualify, ParamRng, ParamSet};
use super::tensor::{gemm, Op, Tensor2};
use crate::error::{shape_err, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmCellParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub w_xi: Tensor2,
    pub w_xf: Tensor2,
    pub w_xc: Tensor2,
    pub w_xo: Tensor2,
    pub w_hi: Tensor2,
    pub w_hf: Tensor2,
    pub w_hc: Tensor2,
    pub w_ho: Tensor2,
    pub w_ci: Vec<f64>,
    pub w_cf: Vec<f64>,
    pub w_co: Vec<f64>,
    pub b_i: Vec<f64>,
    pub b_f: Vec<f64>,
    pub b_c: Vec<f64>,
    pub b_o: Vec<f64>,
}

impl LstmCellParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let wx = || Tensor2::zeros(hidden_dim, input_dim);
        let wh = || Tensor2::zeros(hidden_dim, hidden_dim);
        let v = || vec![0.0; hidden_dim];
        Self {
            input_dim,
            hidden_dim,
            w_xi: wx(),
            w_xf: wx(),
            w_xc: wx(),
            w_xo: wx(),
            w_hi: wh(),
            w_hf: wh(),
            w_hc: wh(),
            w_ho: wh(),
            w_ci: v(),
            w_cf: v(),
            w_co: v(),
            b_i: v(),
            b_f: v(),
            b_c: v(),
            b_o: v(),
        }
    }

    /// Uniform `±1/√(input_dim + hidden_dim)` weights, forget bias 1, other biases 0.
    pub fn init(input_dim: usize, hidden_dim: usize, rng: &mut ParamRng) -> Self {
        let mut p = Self::zeros(input_dim, hidden_dim);
        let bound = 1.0 / ((input_dim + hidden_dim) as f64).sqrt();
        for w in [
            &mut p.w_xi, &mut p.w_xf, &mut p.w_xc, &mut p.w_xo, &mut p.w_hi, &mut p.w_hf,
            &mut p.w_hc, &mut p.w_ho,
        ] {
            fill_uniform(w.as_mut_slice(), bound, rng);
        }
        for w in [&mut p.w_ci, &mut p.w_cf, &mut p.w_co] {
            fill_uniform(w, bound, rng);
        }
        p.b_f.fill(1.0);
        p
    }

    /// Sets every weight to `w` and every bias to `b`.
    pub fn constant(input_dim: usize, hidden_dim: usize, w: f64, b: f64) -> Self {
        let mut p = Self::zeros(input_dim, hidden_dim);
        for t in [
            &mut p.w_xi, &mut p.w_xf, &mut p.w_xc, &mut p.w_xo, &mut p.w_hi, &mut p.w_hf,
            &mut p.w_hc, &mut p.w_ho,
        ] {
            t.fill(w);
        }
        for v in [&mut p.w_ci, &mut p.w_cf, &mut p.w_co] {
            v.fill(w);
        }
        for v in [&mut p.b_i, &mut p.b_f, &mut p.b_c, &mut p.b_o] {
            v.fill(b);
        }
        p
    }

    fn packed(&self) -> Packed {
        let (d, h) = (self.input_dim, self.hidden_dim);
        let width = d + h;
        let mut w = vec![0.0; 4 * h * width];
        let mut b = vec![0.0; 4 * h];
        let gates = [
            (&self.w_xi, &self.w_hi, &self.b_i),
            (&self.w_xf, &self.w_hf, &self.b_f),
            (&self.w_xc, &self.w_hc, &self.b_c),
            (&self.w_xo, &self.w_ho, &self.b_o),
        ];
        for (g, (wx, wh, bias)) in gates.into_iter().enumerate() {
            for k in 0..h {
                let row = &mut w[(g * h + k) * width..(g * h + k + 1) * width];
                row[..d].copy_from_slice(wx.row(k));
                row[d..].copy_from_slice(wh.row(k));
                b[g * h + k] = bias[k];
            }
        }
        Packed { w, b, width }
    }

    fn absorb_packed_grad(&mut self, dw: &[f64], db: &[f64]) {
        let (d, h) = (self.input_dim, self.hidden_dim);
        let width = d + h;
        let gates = [
            (&mut self.w_xi, &mut self.w_hi, &mut self.b_i),
            (&mut self.w_xf, &mut self.w_hf, &mut self.b_f),
            (&mut self.w_xc, &mut self.w_hc, &mut self.b_c),
            (&mut self.w_xo, &mut self.w_ho, &mut self.b_o),
        ];
        for (g, (wx, wh, bias)) in gates.into_iter().enumerate() {
            for k in 0..h {
                let row = &dw[(g * h + k) * width..(g * h + k + 1) * width];
                for (dst, src) in wx.row_mut(k).iter_mut().zip(&row[..d]) {
                    *dst += src;
                }
                for (dst, src) in wh.row_mut(k).iter_mut().zip(&row[d..]) {
                    *dst += src;
                }
                bias[k] += db[g * h + k];
            }
        }
    }
}

impl ParamSet for LstmCellParams {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(String, &[usize], &[f64])) {
        let (d, h) = (self.input_dim, self.hidden_dim);
        for (name, t) in [
            ("w_xi", &self.w_xi),
            ("w_xf", &self.w_xf),
            ("w_xc", &self.w_xc),
            ("w_xo", &self.w_xo),
        ] {
            f(qualify(prefix, name), &[h, d], t.as_slice());
        }
        for (name, t) in [
            ("w_hi", &self.w_hi),
            ("w_hf", &self.w_hf),
            ("w_hc", &self.w_hc),
            ("w_ho", &self.w_ho),
        ] {
            f(qualify(prefix, name), &[h, h], t.as_slice());
        }
        for (name, v) in [
            ("w_ci", &self.w_ci),
            ("w_cf", &self.w_cf),
            ("w_co", &self.w_co),
            ("b_i", &self.b_i),
            ("b_f", &self.b_f),
            ("b_c", &self.b_c),
            ("b_o", &self.b_o),
        ] {
            f(qualify(prefix, name), &[h], v);
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        for t in [
            &mut self.w_xi, &mut self.w_xf, &mut self.w_xc, &mut self.w_xo, &mut self.w_hi,
            &mut self.w_hf, &mut self.w_hc, &mut self.w_ho,
        ] {
            f(t.as_mut_slice());
        }
        for v in [
            &mut self.w_ci, &mut self.w_cf, &mut self.w_co, &mut self.b_i, &mut self.b_f,
            &mut self.b_c, &mut self.b_o,
        ] {
            f(v);
        }
    }
}

struct Packed {
    w: Vec<f64>,
    b: Vec<f64>,
    width: usize,
}

/// Hidden and memory-cell state for a single sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden_dim: usize) -> Self {
        Self {
            h: vec![0.0; hidden_dim],
            c: vec![0.0; hidden_dim],
        }
    }
}

/// Intermediate values of one step for a batch of `B` sequences.
#[derive(Debug, Clone)]
struct StepCache {
    /// `[x | h']`, `B × (D + H)`.
    xh: Vec<f64>,
    c_prev: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    c: Vec<f64>,
    tc: Vec<f64>,
}

/// Everything the backward pass needs from a forward pass.
#[derive(Debug, Clone)]
pub struct LstmCache {
    input_dim: usize,
    hidden_dim: usize,
    batch: usize,
    steps: Vec<StepCache>,
}

impl LstmCache {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Final state of the sequence in batch row `b`.
    pub fn final_state(&self, b: usize) -> Option<LstmState> {
        let h = self.hidden_dim;
        let last = self.steps.last()?;
        let c = last.c[b * h..(b + 1) * h].to_vec();
        let hv = (0..h).map(|k| last.o[b * h + k] * last.tc[b * h + k]).collect();
        Some(LstmState { h: hv, c })
    }
}

/// Runs the LSTM over `xs` (one `B × D` matrix per step) from a zero state,
/// or from `init = (h0, c0)` (each `B × H`) when given.
///
/// Returns the final hidden state `B × H` and the cache for [`lstm_backward_batch`].
pub fn lstm_forward_batch(
    p: &LstmCellParams,
    xs: &[Tensor2],
    init: Option<(&Tensor2, &Tensor2)>,
) -> Result<(Tensor2, LstmCache)> {
    let first = xs
        .first()
        .ok_or_else(|| Error::InvalidInput("LSTM input sequence is empty".into()))?;
    let (d, h) = (p.input_dim, p.hidden_dim);
    let batch = first.rows();
    for x in xs {
        if x.shape() != (batch, d) {
            return Err(shape_err(
                "lstm_forward_batch input",
                format!("{batch}x{d}"),
                format!("{}x{}", x.rows(), x.cols()),
            ));
        }
    }
    let (mut h_prev, mut c_prev) = match init {
        Some((h0, c0)) => {
            if h0.shape() != (batch, h) || c0.shape() != (batch, h) {
                return Err(shape_err("lstm_forward_batch init", format!("{batch}x{h}"), "other"));
            }
            (h0.as_slice().to_vec(), c0.as_slice().to_vec())
        }
        None => (vec![0.0; batch * h], vec![0.0; batch * h]),
    };

    let packed = p.packed();
    let width = packed.width;
    let mut pre = vec![0.0; batch * 4 * h];
    let mut steps = Vec::with_capacity(xs.len());

    for x in xs {
        let mut xh = vec![0.0; batch * width];
        for b in 0..batch {
            let row = &mut xh[b * width..(b + 1) * width];
            row[..d].copy_from_slice(x.row(b));
            row[d..].copy_from_slice(&h_prev[b * h..(b + 1) * h]);
        }
        gemm(batch, width, 4 * h, &xh, Op::N, &packed.w, Op::T, &mut pre, false);

        let n = batch * h;
        let mut st = StepCache {
            xh,
            c_prev: c_prev.clone(),
            i: vec![0.0; n],
            f: vec![0.0; n],
            g: vec![0.0; n],
            o: vec![0.0; n],
            c: vec![0.0; n],
            tc: vec![0.0; n],
        };
        let mut h_next = vec![0.0; n];
        for b in 0..batch {
            let pr = &pre[b * 4 * h..(b + 1) * 4 * h];
            for k in 0..h {
                let idx = b * h + k;
                let cp = c_prev[idx];
                let i = sigmoid(pr[k] + packed.b[k] + p.w_ci[k] * cp);
                let f = sigmoid(pr[h + k] + packed.b[h + k] + p.w_cf[k] * cp);
                let g = (pr[2 * h + k] + packed.b[2 * h + k]).tanh();
                let c = f * cp + i * g;
                let o = sigmoid(pr[3 * h + k] + packed.b[3 * h + k] + p.w_co[k] * c);
                let tc = c.tanh();
                st.i[idx] = i;
                st.f[idx] = f;
                st.g[idx] = g;
                st.o[idx] = o;
                st.c[idx] = c;
                st.tc[idx] = tc;
                h_next[idx] = o * tc;
            }
        }
        c_prev.copy_from_slice(&st.c);
        h_prev = h_next;
        steps.push(st);
    }

    let h_final = Tensor2::from_vec(batch, h, h_prev)?;
    Ok((
        h_final,
        LstmCache {
            input_dim: d,
            hidden_dim: h,
            batch,
            steps,
        },
    ))
}

/// Backpropagation through time from a gradient on the final hidden state.
///
/// Returns parameter gradients summed over the batch and the gradient on each
/// step's input matrix.
pub fn lstm_backward_batch(
    p: &LstmCellParams,
    cache: &LstmCache,
    dh_final: &Tensor2,
) -> Result<(LstmCellParams, Vec<Tensor2>)> {
    let (d, h, batch) = (p.input_dim, p.hidden_dim, cache.batch);
    if cache.input_dim != d || cache.hidden_dim != h {
        return Err(shape_err(
            "lstm_backward_batch cache",
            format!("{d}->{h}"),
            format!("{}->{}", cache.input_dim, cache.hidden_dim),
        ));
    }
    if cache.steps.is_empty() {
        return Err(Error::InvalidInput("LSTM cache holds no steps".into()));
    }
    if dh_final.shape() != (batch, h) {
        return Err(shape_err(
            "lstm_backward_batch upstream",
            format!("{batch}x{h}"),
            format!("{}x{}", dh_final.rows(), dh_final.cols()),
        ));
    }

    let packed = p.packed();
    let width = packed.width;
    let n = batch * h;
    let mut grads = LstmCellParams::zeros(d, h);
    let mut dw = vec![0.0; 4 * h * width];
    let mut db = vec![0.0; 4 * h];
    let mut dxs = vec![Tensor2::zeros(batch, d); cache.steps.len()];

    let mut dh = dh_final.as_slice().to_vec();
    let mut dc_carry = vec![0.0; n];
    let mut dpre = vec![0.0; batch * 4 * h];
    let mut dxh = vec![0.0; batch * width];

    for (t, st) in cache.steps.iter().enumerate().rev() {
        for b in 0..batch {
            for k in 0..h {
                let idx = b * h + k;
                let (i, f, g, o, c, tc, cp) =
                    (st.i[idx], st.f[idx], st.g[idx], st.o[idx], st.c[idx], st.tc[idx], st.c_prev[idx]);
                let dhv = dh[idx];
                let d_o = dhv * tc;
                let dpre_o = d_o * o * (1.0 - o);
                let mut dc = dc_carry[idx] + dhv * o * (1.0 - tc * tc) + dpre_o * p.w_co[k];
                grads.w_co[k] += dpre_o * c;

                let dpre_i = dc * g * i * (1.0 - i);
                let dpre_f = dc * cp * f * (1.0 - f);
                let dpre_z = dc * i * (1.0 - g * g);
                grads.w_ci[k] += dpre_i * cp;
                grads.w_cf[k] += dpre_f * cp;
                dc = dc * f + dpre_i * p.w_ci[k] + dpre_f * p.w_cf[k];
                dc_carry[idx] = dc;

                let row = &mut dpre[b * 4 * h..(b + 1) * 4 * h];
                row[k] = dpre_i;
                row[h + k] = dpre_f;
                row[2 * h + k] = dpre_z;
                row[3 * h + k] = dpre_o;
            }
        }
        for b in 0..batch {
            for (acc, v) in db.iter_mut().zip(&dpre[b * 4 * h..(b + 1) * 4 * h]) {
                *acc += v;
            }
        }
        // dW += dPreᵀ · [x | h']
        gemm(4 * h, batch, width, &dpre, Op::T, &st.xh, Op::N, &mut dw, true);
        // d[x | h'] = dPre · W
        gemm(batch, 4 * h, width, &dpre, Op::N, &packed.w, Op::N, &mut dxh, false);
        let dx = &mut dxs[t];
        for b in 0..batch {
            let row = &dxh[b * width..(b + 1) * width];
            dx.row_mut(b).copy_from_slice(&row[..d]);
            dh[b * h..(b + 1) * h].copy_from_slice(&row[d..]);
        }
    }
    grads.absorb_packed_grad(&dw, &db);
    Ok((grads, dxs))
}

/// One step for a single sequence.
pub fn lstm_cell_forward(
    x: &[f64],
    prev: &LstmState,
    p: &LstmCellParams,
) -> Result<(LstmState, LstmCache)> {
    if x.len() != p.input_dim {
        return Err(shape_err("lstm_cell_forward input", p.input_dim, x.len()));
    }
    if prev.h.len() != p.hidden_dim || prev.c.len() != p.hidden_dim {
        return Err(shape_err("lstm_cell_forward state", p.hidden_dim, prev.h.len()));
    }
    let xs = [Tensor2::from_vec(1, x.len(), x.to_vec())?];
    let h0 = Tensor2::from_vec(1, p.hidden_dim, prev.h.clone())?;
    let c0 = Tensor2::from_vec(1, p.hidden_dim, prev.c.clone())?;
    let (_, cache) = lstm_forward_batch(p, &xs, Some((&h0, &c0)))?;
    let state = cache.final_state(0).expect("one step");
    Ok((state, cache))
}

/// Folds the cell over a single sequence; returns the last hidden state.
pub fn lstm_forward_sequence(
    xs: &[Vec<f64>],
    p: &LstmCellParams,
    init: Option<&LstmState>,
) -> Result<(Vec<f64>, LstmCache)> {
    if xs.is_empty() {
        return Err(Error::InvalidInput("LSTM input sequence is empty".into()));
    }
    let steps = xs
        .iter()
        .map(|x| {
            if x.len() != p.input_dim {
                return Err(shape_err("lstm_forward_sequence input", p.input_dim, x.len()));
            }
            Tensor2::from_vec(1, x.len(), x.clone())
        })
        .collect::<Result<Vec<_>>>()?;
    let init = match init {
        Some(s) => Some((
            Tensor2::from_vec(1, p.hidden_dim, s.h.clone())?,
            Tensor2::from_vec(1, p.hidden_dim, s.c.clone())?,
        )),
        None => None,
    };
    let (h, cache) = lstm_forward_batch(p, &steps, init.as_ref().map(|(a, b)| (a, b)))?;
    Ok((h.into_vec(), cache))
}

/// Gradients of a scalar loss given `dh` on the final hidden state of a
/// single-sequence forward pass.
pub fn lstm_backward_sequence(
    p: &LstmCellParams,
    cache: &LstmCache,
    dh: &[f64],
) -> Result<(LstmCellParams, Vec<Vec<f64>>)> {
    if cache.batch != 1 {
        return Err(shape_err("lstm_backward_sequence batch", 1, cache.batch));
    }
    let dh = Tensor2::from_vec(1, dh.len(), dh.to_vec())?;
    let (grads, dxs) = lstm_backward_batch(p, cache, &dh)?;
    Ok((grads, dxs.into_iter().map(Tensor2::into_vec).collect()))
}
