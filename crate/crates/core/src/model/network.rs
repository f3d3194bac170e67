//! Three LSTM branches, an external-feature embedding and a fused output head.

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::config::DeepAutoConfig;
use crate::dataprep::{OutputKind, WindowedSample, EXTERNAL_DIM};
use crate::error::{shape_err, Error, Result};
use crate::neuralnet::{
    dense_backward_batch, dense_backward_preactivation, dense_forward_batch, kl_softmax_gradient, lstm_backward_batch,
    lstm_forward_batch, mmse_gradient, mmse_loss, Activation, DenseParams, LstmCache, LstmCellParams, ParamRng,
    ParamSet, Tensor2,
};

/// All trainable tensors. Disabled branches are absent rather than zeroed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeepAutoParams {
    pub lstm_r: LstmCellParams,
    pub lstm_p: Option<LstmCellParams>,
    pub lstm_s: Option<LstmCellParams>,
    /// Empty when external features are disabled.
    pub ext_net: Vec<DenseParams>,
    pub head: DenseParams,
}

fn head_activation(cfg: &DeepAutoConfig) -> Activation {
    match cfg.output {
        OutputKind::ScalarHorizons(_) => Activation::Sigmoid,
        OutputKind::Pdf(_) => Activation::Softmax,
    }
}

impl DeepAutoParams {
    /// Shapes for `cfg` with every value zero.
    pub fn zeros(cfg: &DeepAutoConfig) -> Self {
        let d = cfg.input_dim;
        Self {
            lstm_r: LstmCellParams::zeros(d, cfg.hidden_r),
            lstm_p: cfg.periodic_enabled().then(|| LstmCellParams::zeros(d, cfg.hidden_p)),
            lstm_s: cfg.seasonal_enabled().then(|| LstmCellParams::zeros(d, cfg.hidden_s)),
            ext_net: if cfg.external_enabled() {
                vec![DenseParams::zeros(EXTERNAL_DIM, cfg.ext_embed_dim, Activation::Tanh)]
            } else {
                Vec::new()
            },
            head: DenseParams::zeros(cfg.fusion_dim(), cfg.output_dim(), head_activation(cfg)),
        }
    }

    /// Seeded initialization.
    pub fn init(cfg: &DeepAutoConfig) -> Self {
        let mut rng = ParamRng::seed_from_u64(cfg.seed);
        let d = cfg.input_dim;
        let lstm_r = LstmCellParams::init(d, cfg.hidden_r, &mut rng);
        let lstm_p = cfg.periodic_enabled().then(|| LstmCellParams::init(d, cfg.hidden_p, &mut rng));
        let lstm_s = cfg.seasonal_enabled().then(|| LstmCellParams::init(d, cfg.hidden_s, &mut rng));
        let ext_net = if cfg.external_enabled() {
            vec![DenseParams::init(EXTERNAL_DIM, cfg.ext_embed_dim, Activation::Tanh, &mut rng)]
        } else {
            Vec::new()
        };
        let head = DenseParams::init(cfg.fusion_dim(), cfg.output_dim(), head_activation(cfg), &mut rng);
        Self {
            lstm_r,
            lstm_p,
            lstm_s,
            ext_net,
            head,
        }
    }

    /// Checks that tensor shapes agree with `cfg`.
    pub fn check_matches(&self, cfg: &DeepAutoConfig) -> Result<()> {
        let want = Self::zeros(cfg);
        let mut a = Vec::new();
        let mut b = Vec::new();
        self.visit("", &mut |n, s, _| a.push((n, s.to_vec())));
        want.visit("", &mut |n, s, _| b.push((n, s.to_vec())));
        if a != b || self.head.activation != want.head.activation {
            return Err(Error::Config("parameters do not match the model configuration".into()));
        }
        Ok(())
    }
}

impl ParamSet for DeepAutoParams {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(String, &[usize], &[f64])) {
        let q = |n: &str| if prefix.is_empty() { n.to_string() } else { format!("{prefix}.{n}") };
        self.lstm_r.visit(&q("lstm_r"), f);
        if let Some(p) = &self.lstm_p {
            p.visit(&q("lstm_p"), f);
        }
        if let Some(p) = &self.lstm_s {
            p.visit(&q("lstm_s"), f);
        }
        for (i, l) in self.ext_net.iter().enumerate() {
            l.visit(&q(&format!("ext.{i}")), f);
        }
        self.head.visit(&q("head"), f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.lstm_r.visit_mut(f);
        if let Some(p) = &mut self.lstm_p {
            p.visit_mut(f);
        }
        if let Some(p) = &mut self.lstm_s {
            p.visit_mut(f);
        }
        for l in &mut self.ext_net {
            l.visit_mut(f);
        }
        self.head.visit_mut(f);
    }
}

/// Intermediate values of a batched forward pass.
#[derive(Debug)]
pub struct ForwardCache {
    r: LstmCache,
    p: Option<LstmCache>,
    s: Option<LstmCache>,
    /// Inputs to each external layer followed by the final embedding.
    ext_acts: Vec<Tensor2>,
    fused: Tensor2,
    /// Head output (`B × K`).
    pub output: Tensor2,
}

/// Step-major stacking: one `B × D` matrix per sequence position.
fn stack_steps(samples: &[&WindowedSample], pick: impl Fn(&WindowedSample) -> &Tensor2, d: usize) -> Result<Vec<Tensor2>> {
    let len = pick(samples[0]).rows();
    let mut steps = vec![Tensor2::zeros(samples.len(), d); len];
    for (b, s) in samples.iter().enumerate() {
        let m = pick(s);
        if m.shape() != (len, d) {
            return Err(shape_err("model input window", format!("{len}x{d}"), format!("{}x{}", m.rows(), m.cols())));
        }
        for (k, step) in steps.iter_mut().enumerate() {
            step.row_mut(b).copy_from_slice(m.row(k));
        }
    }
    Ok(steps)
}

/// Runs the network on a batch. Output rows are horizon predictions in the
/// scaled domain, or probability vectors for a PDF head.
pub fn forward_batch(params: &DeepAutoParams, samples: &[&WindowedSample]) -> Result<(Tensor2, ForwardCache)> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    let batch = samples.len();
    let d = params.lstm_r.input_dim;
    let mut parts: Vec<Tensor2> = Vec::with_capacity(4);

    let (h_r, r) = lstm_forward_batch(&params.lstm_r, &stack_steps(samples, |s| &s.x_recent, d)?, None)?;
    parts.push(h_r);
    let mut run_branch = |p: &Option<LstmCellParams>, pick: fn(&WindowedSample) -> &Tensor2| -> Result<Option<LstmCache>> {
        match p {
            Some(p) => {
                let (h, c) = lstm_forward_batch(p, &stack_steps(samples, pick, d)?, None)?;
                parts.push(h);
                Ok(Some(c))
            }
            None => Ok(None),
        }
    };
    let p = run_branch(&params.lstm_p, |s| &s.x_periodic)?;
    let s = run_branch(&params.lstm_s, |s| &s.x_seasonal)?;

    let mut ext_acts = Vec::new();
    if !params.ext_net.is_empty() {
        let mut x = Tensor2::zeros(batch, EXTERNAL_DIM);
        for (b, smp) in samples.iter().enumerate() {
            if smp.external.len() != EXTERNAL_DIM {
                return Err(shape_err("external features", EXTERNAL_DIM, smp.external.len()));
            }
            x.row_mut(b).copy_from_slice(&smp.external);
        }
        for layer in &params.ext_net {
            let y = dense_forward_batch(&x, layer)?;
            ext_acts.push(x);
            x = y;
        }
        parts.push(x.clone());
        ext_acts.push(x);
    }

    let width: usize = parts.iter().map(Tensor2::cols).sum();
    let mut fused = Tensor2::zeros(batch, width);
    for b in 0..batch {
        let row = fused.row_mut(b);
        let mut off = 0;
        for part in &parts {
            row[off..off + part.cols()].copy_from_slice(part.row(b));
            off += part.cols();
        }
    }
    let output = dense_forward_batch(&fused, &params.head)?;
    Ok((
        output.clone(),
        ForwardCache {
            r,
            p,
            s,
            ext_acts,
            fused,
            output,
        },
    ))
}

/// Single-sample forward.
pub fn forward(params: &DeepAutoParams, sample: &WindowedSample) -> Result<Vec<f64>> {
    Ok(forward_batch(params, &[sample])?.0.into_vec())
}

fn targets(samples: &[&WindowedSample], k: usize) -> Result<Tensor2> {
    let mut y = Tensor2::zeros(samples.len(), k);
    for (b, s) in samples.iter().enumerate() {
        if s.target.len() != k {
            return Err(shape_err("sample target", k, s.target.len()));
        }
        y.row_mut(b).copy_from_slice(&s.target);
    }
    Ok(y)
}

/// Batch loss only (MMSE or KL per the output head).
pub fn batch_loss(params: &DeepAutoParams, cfg: &DeepAutoConfig, samples: &[&WindowedSample]) -> Result<f64> {
    let (out, _) = forward_batch(params, samples)?;
    let y = targets(samples, out.cols())?;
    match cfg.output {
        OutputKind::ScalarHorizons(_) => mmse_loss(&y, &out, cfg.alpha),
        OutputKind::Pdf(_) => Ok(kl_softmax_gradient(&y, &out)?.0),
    }
}

/// Mean loss over the batch and its gradient with respect to every parameter.
pub fn loss_and_gradients(
    params: &DeepAutoParams,
    cfg: &DeepAutoConfig,
    samples: &[&WindowedSample],
) -> Result<(f64, DeepAutoParams)> {
    let (out, cache) = forward_batch(params, samples)?;
    let y = targets(samples, out.cols())?;
    let (loss, head_grads, d_fused) = match cfg.output {
        OutputKind::ScalarHorizons(_) => {
            let loss = mmse_loss(&y, &out, cfg.alpha)?;
            let dy = mmse_gradient(&y, &out, cfg.alpha)?;
            let (g, dx) = dense_backward_batch(&cache.fused, &out, &dy, &params.head)?;
            (loss, g, dx)
        }
        OutputKind::Pdf(_) => {
            let (loss, dlogits) = kl_softmax_gradient(&y, &out)?;
            let (g, dx) = dense_backward_preactivation(&cache.fused, &dlogits, &params.head)?;
            (loss, g, dx)
        }
    };
    let mut grads = DeepAutoParams::zeros(cfg);
    grads.head = head_grads;

    let batch = samples.len();
    let mut off = 0;
    let mut take = |n: usize| {
        let mut m = Tensor2::zeros(batch, n);
        for b in 0..batch {
            m.row_mut(b).copy_from_slice(&d_fused.row(b)[off..off + n]);
        }
        off += n;
        m
    };
    let dh_r = take(params.lstm_r.hidden_dim);
    let dh_p = params.lstm_p.as_ref().map(|p| take(p.hidden_dim));
    let dh_s = params.lstm_s.as_ref().map(|p| take(p.hidden_dim));
    let d_ext = params.ext_net.last().map(|l| take(l.out_dim()));

    grads.lstm_r = lstm_backward_batch(&params.lstm_r, &cache.r, &dh_r)?.0;
    if let (Some(p), Some(c), Some(dh)) = (&params.lstm_p, &cache.p, dh_p) {
        grads.lstm_p = Some(lstm_backward_batch(p, c, &dh)?.0);
    }
    if let (Some(p), Some(c), Some(dh)) = (&params.lstm_s, &cache.s, dh_s) {
        grads.lstm_s = Some(lstm_backward_batch(p, c, &dh)?.0);
    }
    if let Some(mut dy) = d_ext {
        for (i, layer) in params.ext_net.iter().enumerate().rev() {
            let (g, dx) = dense_backward_batch(&cache.ext_acts[i], &cache.ext_acts[i + 1], &dy, layer)?;
            grads.ext_net[i] = g;
            dy = dx;
        }
    }
    Ok((loss, grads))
}
