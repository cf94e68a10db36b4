//! Small dense feedforward networks with exact reverse-mode gradients.
//!
//! Parameters live in one flat `f64` slice so that several networks can share
//! a single optimizer buffer. Per layer the layout is the weight matrix
//! `[n_in][n_out]` row-major followed by the bias vector `[n_out]`; the layer
//! computes `act(x W + b)`. Weight rows are indexed by input, which lets the
//! forward and backward passes skip zero inputs (observations are sparse).

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite gradient at index {index} (value {value})")]
    NonFiniteGradient { index: usize, value: f64 },
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Abs,
    Tanh,
    Identity,
    Elu,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Abs => x.abs(),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
            Activation::Elu => {
                if x > 0.0 {
                    x
                } else {
                    x.exp_m1()
                }
            }
        }
    }

    /// Derivative given the pre-activation and the activation output.
    /// Subgradients at the ReLU and Abs kinks are 0.
    #[inline]
    pub fn derivative(self, pre: f64, post: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Abs => {
                if pre > 0.0 {
                    1.0
                } else if pre < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - post * post,
            Activation::Identity => 1.0,
            Activation::Elu => {
                if pre > 0.0 {
                    1.0
                } else {
                    post + 1.0
                }
            }
        }
    }

    /// Whether the activation has a kink where the gradient jumps.
    pub fn is_kinked(self) -> bool {
        matches!(self, Activation::Relu | Activation::Abs)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    sizes: Vec<usize>,
    activations: Vec<Activation>,
}

impl Topology {
    pub fn new(sizes: Vec<usize>, activations: Vec<Activation>) -> Result<Self, NetError> {
        if sizes.len() < 2 {
            return Err(NetError::InvalidTopology("need at least one layer".into()));
        }
        if sizes.contains(&0) {
            return Err(NetError::InvalidTopology("layer sizes must be >= 1".into()));
        }
        if activations.len() != sizes.len() - 1 {
            return Err(NetError::InvalidTopology(format!(
                "{} layers but {} activations",
                sizes.len() - 1,
                activations.len()
            )));
        }
        Ok(Topology { sizes, activations })
    }

    /// Hidden layers share one activation; the output layer uses `output`.
    pub fn mlp(sizes: &[usize], hidden: Activation, output: Activation) -> Result<Self, NetError> {
        let n_layers = sizes.len().saturating_sub(1);
        let mut acts = vec![hidden; n_layers.saturating_sub(1)];
        acts.push(output);
        Topology::new(sizes.to_vec(), acts)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn n_layers(&self) -> usize {
        self.activations.len()
    }

    pub fn input_len(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_len(&self) -> usize {
        *self.sizes.last().expect("topology has layers")
    }

    pub fn param_count(&self) -> usize {
        self.sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Offset of layer `l`'s weights within the flat parameter vector.
    fn layer_offset(&self, layer: usize) -> usize {
        self.sizes[..=layer].windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }
}

/// Cached activations from one forward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    /// `acts[0]` is the input, `acts[l+1]` the output of layer `l`.
    acts: Vec<Vec<f64>>,
    pres: Vec<Vec<f64>>,
}

impl Tape {
    pub fn new(topology: &Topology) -> Self {
        Tape {
            acts: topology.sizes.iter().map(|&n| vec![0.0; n]).collect(),
            pres: topology.sizes[1..].iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("tape has layers")
    }

    pub fn input(&self) -> &[f64] {
        &self.acts[0]
    }

    /// Smallest |pre-activation| over layers whose activation is kinked.
    pub fn min_kink_margin(&self, topology: &Topology) -> f64 {
        self.pres
            .iter()
            .zip(&topology.activations)
            .filter(|(_, a)| a.is_kinked())
            .flat_map(|(p, _)| p.iter().map(|v| v.abs()))
            .fold(f64::INFINITY, f64::min)
    }

    /// Folds the sign pattern of kinked pre-activations into `hash`.
    pub fn hash_region(&self, topology: &Topology, hash: &mut u64) {
        for (pre, act) in self.pres.iter().zip(&topology.activations) {
            if act.is_kinked() {
                for &v in pre {
                    let code = if v > 0.0 { 1u64 } else if v < 0.0 { 2 } else { 3 };
                    *hash = (*hash ^ code).wrapping_mul(0x0100_0000_01b3);
                }
            }
        }
    }
}

/// Runs the network over `params` (a slice of exactly `param_count` values),
/// writing intermediate values into `tape`. Returns the output slice.
pub fn forward_into<'t>(
    topology: &Topology,
    params: &[f64],
    input: &[f64],
    tape: &'t mut Tape,
) -> Result<&'t [f64], NetError> {
    if input.len() != topology.input_len() {
        return Err(NetError::ShapeMismatch(format!(
            "input length {} != {}",
            input.len(),
            topology.input_len()
        )));
    }
    if params.len() != topology.param_count() {
        return Err(NetError::ShapeMismatch(format!(
            "param length {} != {}",
            params.len(),
            topology.param_count()
        )));
    }
    tape.acts[0].copy_from_slice(input);
    let mut offset = 0;
    for (l, act) in topology.activations.iter().enumerate() {
        let (n_in, n_out) = (topology.sizes[l], topology.sizes[l + 1]);
        let w = &params[offset..offset + n_in * n_out];
        let b = &params[offset + n_in * n_out..offset + n_in * n_out + n_out];
        offset += n_in * n_out + n_out;

        let (before, after) = tape.acts.split_at_mut(l + 1);
        let x = &before[l];
        let pre = &mut tape.pres[l];
        pre.copy_from_slice(b);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            axpy(pre, xi, &w[i * n_out..(i + 1) * n_out]);
        }
        for (o, &p) in after[0].iter_mut().zip(pre.iter()) {
            *o = act.apply(p);
        }
    }
    Ok(tape.output())
}

/// Backpropagates `out_grad` through the pass recorded in `tape`.
///
/// Parameter gradients are accumulated (`+=`) into `param_grad`. When
/// `input_grad` is given it is overwritten with the gradient w.r.t. the input.
pub fn backward_into(
    topology: &Topology,
    params: &[f64],
    tape: &Tape,
    out_grad: &[f64],
    param_grad: &mut [f64],
    mut input_grad: Option<&mut [f64]>,
) -> Result<(), NetError> {
    if out_grad.len() != topology.output_len() {
        return Err(NetError::ShapeMismatch(format!(
            "output gradient length {} != {}",
            out_grad.len(),
            topology.output_len()
        )));
    }
    if param_grad.len() != topology.param_count() || params.len() != topology.param_count() {
        return Err(NetError::ShapeMismatch("parameter gradient length".into()));
    }
    if let Some(g) = input_grad.as_deref() {
        if g.len() != topology.input_len() {
            return Err(NetError::ShapeMismatch("input gradient length".into()));
        }
    }
    let mut delta: Vec<f64> = out_grad.to_vec();
    for l in (0..topology.n_layers()).rev() {
        let (n_in, n_out) = (topology.sizes[l], topology.sizes[l + 1]);
        let offset = topology.layer_offset(l);
        let act = topology.activations[l];
        for ((d, &p), &o) in delta.iter_mut().zip(&tape.pres[l]).zip(&tape.acts[l + 1]) {
            *d *= act.derivative(p, o);
        }
        let x = &tape.acts[l];
        let (gw, gb) = param_grad[offset..offset + n_in * n_out + n_out].split_at_mut(n_in * n_out);
        for (g, &d) in gb.iter_mut().zip(&delta) {
            *g += d;
        }
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            axpy(&mut gw[i * n_out..(i + 1) * n_out], xi, &delta);
        }
        let need_input = l > 0 || input_grad.is_some();
        if !need_input {
            break;
        }
        let w = &params[offset..offset + n_in * n_out];
        // Units of the previous layer with zero local derivative get no
        // gradient anyway; only the network input needs every entry.
        let live = |i: usize| {
            l == 0 || {
                let a = topology.activations[l - 1];
                a.derivative(tape.pres[l - 1][i], tape.acts[l][i]) != 0.0
            }
        };
        let next: Vec<f64> =
            (0..n_in).map(|i| if live(i) { dot(&w[i * n_out..(i + 1) * n_out], &delta) } else { 0.0 }).collect();
        if l == 0 {
            if let Some(g) = input_grad.as_deref_mut() {
                g.copy_from_slice(&next);
            }
        }
        delta = next;
    }
    Ok(())
}

// Hot kernels. On x86-64 with AVX2 the same scalar code is compiled a second
// time with wider vectors and picked at runtime; there is no FMA contraction,
// so both paths produce identical bits.

#[inline(always)]
fn axpy_scalar(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline(always)]
fn dot_scalar(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[cfg(target_arch = "x86_64")]
mod avx2 {
    #[target_feature(enable = "avx2")]
    pub(super) unsafe fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
        super::axpy_scalar(y, a, x)
    }

    #[target_feature(enable = "avx2")]
    pub(super) unsafe fn dot(a: &[f64], b: &[f64]) -> f64 {
        super::dot_scalar(a, b)
    }
}

/// `y += a * x`
#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx2") {
        // SAFETY: the CPU supports AVX2.
        return unsafe { avx2::axpy(y, a, x) };
    }
    axpy_scalar(y, a, x)
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx2") {
        // SAFETY: the CPU supports AVX2.
        return unsafe { avx2::dot(a, b) };
    }
    dot_scalar(a, b)
}

/// A network: topology plus its own parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct NetParams {
    pub topology: Topology,
    pub values: Vec<f64>,
}

impl NetParams {
    pub fn zeros(topology: Topology) -> Self {
        let n = topology.param_count();
        NetParams { topology, values: vec![0.0; n] }
    }

    /// Weights uniform in `±sqrt(1/fan_in)`, biases zero.
    pub fn init<R: Rng + ?Sized>(topology: Topology, rng: &mut R) -> Self {
        let mut values = Vec::with_capacity(topology.param_count());
        init_into(&topology, rng, &mut values);
        NetParams { topology, values }
    }

    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, Tape), NetError> {
        let mut tape = Tape::new(&self.topology);
        let out = forward_into(&self.topology, &self.values, input, &mut tape)?.to_vec();
        Ok((out, tape))
    }

    /// Returns `(param_grad, input_grad)`.
    pub fn backward(&self, tape: &Tape, out_grad: &[f64]) -> Result<(Vec<f64>, Vec<f64>), NetError> {
        let mut pg = vec![0.0; self.values.len()];
        let mut ig = vec![0.0; self.topology.input_len()];
        backward_into(&self.topology, &self.values, tape, out_grad, &mut pg, Some(&mut ig))?;
        Ok((pg, ig))
    }
}

/// Appends freshly initialized parameters for `topology` to `out`.
pub fn init_into<R: Rng + ?Sized>(topology: &Topology, rng: &mut R, out: &mut Vec<f64>) {
    for w in topology.sizes.windows(2) {
        let (n_in, n_out) = (w[0], w[1]);
        let bound = (1.0 / n_in as f64).sqrt();
        out.extend((0..n_in * n_out).map(|_| rng.gen_range(-bound..bound)));
        out.extend(std::iter::repeat_n(0.0, n_out));
    }
}

/// Scales `grads` in place so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm.is_finite() {
        let scale = max_norm / norm;
        grads.iter_mut().for_each(|g| *g *= scale);
    }
    norm
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(n: usize, lr: f64) -> Self {
        AdamState { m: vec![0.0; n], v: vec![0.0; n], step: 0, lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    /// One bias-corrected update of `params` in place. Rejects non-finite
    /// gradients before touching any state.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<(), NetError> {
        if params.len() != grads.len() || params.len() != self.m.len() {
            return Err(NetError::ShapeMismatch(format!(
                "params {} grads {} moments {}",
                params.len(),
                grads.len(),
                self.m.len()
            )));
        }
        if let Some((index, &value)) = grads.iter().enumerate().find(|(_, g)| !g.is_finite()) {
            return Err(NetError::NonFiniteGradient { index, value });
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        let (b1, b2) = (self.beta1, self.beta2);
        let (inv1, inv2) = (1.0 / bc1, 1.0 / bc2);
        for ((p, &g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= self.lr * (*m * inv1) / ((*v * inv2).sqrt() + self.eps);
        }
        Ok(())
    }
}

/// A scalar loss over a flat parameter vector, as seen by the gradient check.
pub trait Differentiable {
    fn loss(&mut self, params: &[f64]) -> f64;
    fn gradient(&mut self, params: &[f64]) -> Vec<f64>;
    /// Identifier of the piecewise-smooth region containing `params`, e.g. a
    /// hash of activation signs. Coordinates whose `±eps` probes land in a
    /// different region straddle a kink and are skipped.
    fn region(&mut self, _params: &[f64]) -> u64 {
        0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdReport {
    pub max_rel_error: f64,
    pub coords_checked: usize,
    pub kinks_skipped: usize,
}

/// Central-difference gradient check.
///
/// Checks every coordinate when `max_coords` is `None` or at least the
/// parameter count, otherwise a random subset of that size drawn from `rng`.
/// The relative error of one coordinate is `|a - n| / max(|a|, |n|, floor)`
/// where `floor` absorbs round-off on gradients that are essentially zero.
pub fn finite_diff_check<D: Differentiable, R: Rng + ?Sized>(
    params: &[f64],
    target: &mut D,
    eps: f64,
    max_coords: Option<usize>,
    floor: f64,
    rng: &mut R,
) -> FdReport {
    let analytic = target.gradient(params);
    let base_region = target.region(params);
    let n = params.len();
    let coords: Vec<usize> = match max_coords {
        Some(k) if k < n => rand::seq::index::sample(rng, n, k).into_vec(),
        _ => (0..n).collect(),
    };
    let mut probe = params.to_vec();
    let mut report = FdReport { max_rel_error: 0.0, coords_checked: 0, kinks_skipped: 0 };
    for &i in &coords {
        probe[i] = params[i] + eps;
        let region_plus = target.region(&probe);
        let plus = target.loss(&probe);
        probe[i] = params[i] - eps;
        let region_minus = target.region(&probe);
        let minus = target.loss(&probe);
        probe[i] = params[i];
        if region_plus != base_region || region_minus != base_region {
            report.kinks_skipped += 1;
            continue;
        }
        let numeric = (plus - minus) / (2.0 * eps);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
        report.max_rel_error = report.max_rel_error.max(rel);
        report.coords_checked += 1;
    }
    report
}
