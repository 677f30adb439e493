//! Fully connected networks with jet-valued forward passes and reverse-mode
//! parameter gradients through every jet channel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::jet::{channel_count, pairs, Jet2};
use crate::error::{Error, Result};
use crate::scalar::{sigmoid, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Sigmoid,
}

impl Activation {
    /// The activation and its first three derivatives at `z`.
    #[inline]
    fn eval<S: Real>(self, z: S) -> [S; 4] {
        let one = S::one();
        let two = S::lit(2.0);
        match self {
            Activation::Tanh => {
                let t = z.tanh();
                let d1 = one - t * t;
                [t, d1, -two * t * d1, d1 * (S::lit(6.0) * t * t - two)]
            }
            Activation::Sigmoid => {
                let s = sigmoid(z);
                let d1 = s * (one - s);
                [s, d1, d1 * (one - two * s), d1 * (one - S::lit(6.0) * s + S::lit(6.0) * s * s)]
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            other => Err(Error::config(format!("unknown activation '{other}'"))),
        }
    }
}

/// Weights and biases of a scalar-output multilayer perceptron.
///
/// Parameters live in one flat vector, layer by layer: the row-major
/// `out x in` weight matrix followed by the `out` biases. Hidden layers apply
/// the activation; the output layer is affine.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParameters<S> {
    layer_sizes: Vec<usize>,
    activation: Activation,
    params: Vec<S>,
    offsets: Vec<usize>,
}

fn layer_offsets(layer_sizes: &[usize]) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(layer_sizes.len());
    let mut acc = 0;
    for w in layer_sizes.windows(2) {
        offsets.push(acc);
        acc += w[0] * w[1] + w[1];
    }
    offsets.push(acc);
    offsets
}

fn validate_sizes(layer_sizes: &[usize]) -> Result<()> {
    if layer_sizes.len() < 2 {
        return Err(Error::config(format!(
            "layer_sizes needs at least an input and an output layer, got {layer_sizes:?}"
        )));
    }
    if layer_sizes.contains(&0) {
        return Err(Error::config(format!("layer sizes must be positive, got {layer_sizes:?}")));
    }
    if *layer_sizes.last().unwrap() != 1 {
        return Err(Error::config(format!("network output must be scalar, got {layer_sizes:?}")));
    }
    Ok(())
}

impl<S: Real> NetworkParameters<S> {
    /// Glorot-uniform weights, `U(-l, l)` with `l = sqrt(6 / (fan_in + fan_out))`,
    /// and zero biases. Deterministic in `seed`.
    pub fn init(layer_sizes: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        validate_sizes(layer_sizes)?;
        let offsets = layer_offsets(layer_sizes);
        let mut params = vec![S::zero(); *offsets.last().unwrap()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (l, w) in layer_sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let start = offsets[l];
            for p in &mut params[start..start + fan_in * fan_out] {
                *p = S::lit(rng.random_range(-limit..limit));
            }
        }
        Ok(Self { layer_sizes: layer_sizes.to_vec(), activation, params, offsets })
    }

    pub fn from_flat(layer_sizes: &[usize], activation: Activation, params: Vec<S>) -> Result<Self> {
        validate_sizes(layer_sizes)?;
        let offsets = layer_offsets(layer_sizes);
        let expected = *offsets.last().unwrap();
        if params.len() != expected {
            return Err(Error::Shape { expected, got: params.len() });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::config("non-finite network parameter"));
        }
        Ok(Self { layer_sizes: layer_sizes.to_vec(), activation, params, offsets })
    }

    /// A network of the same architecture with different parameter values.
    pub fn with_params(&self, params: Vec<S>) -> Result<Self> {
        if params.len() != self.params.len() {
            return Err(Error::Shape { expected: self.params.len(), got: params.len() });
        }
        Ok(Self { params, ..self.clone() })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn as_slice(&self) -> &[S] {
        &self.params
    }

    pub fn as_mut_slice(&mut self) -> &mut [S] {
        &mut self.params
    }

    pub fn into_flat(self) -> Vec<S> {
        self.params
    }

    /// Row-major `out x in` weights of layer `l`.
    pub fn weights(&self, l: usize) -> &[S] {
        let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
        &self.params[self.offsets[l]..self.offsets[l] + n_in * n_out]
    }

    pub fn biases(&self, l: usize) -> &[S] {
        let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
        let start = self.offsets[l] + n_in * n_out;
        &self.params[start..start + n_out]
    }

    /// Flat offset of layer `l`'s block (weights then biases).
    pub fn layer_offset(&self, l: usize) -> usize {
        self.offsets[l]
    }

    pub fn same_architecture(&self, other: &Self) -> bool {
        self.layer_sizes == other.layer_sizes && self.activation == other.activation
    }

    fn check_input(&self, x: &[S]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape { expected: self.input_dim(), got: x.len() });
        }
        Ok(())
    }

    /// Network output at `x`.
    pub fn forward(&self, x: &[S]) -> Result<S> {
        self.check_input(x)?;
        let mut tape = Tape::new(self, &[])?;
        Ok(self.propagate(x, &mut tape).value)
    }

    /// Output together with exact first and second derivatives with respect to
    /// the `tracked` input coordinates.
    pub fn forward_jet(&self, x: &[S], tracked: &[usize]) -> Result<Jet2<S>> {
        if tracked.is_empty() || tracked.len() > 2 {
            return Err(Error::UnsupportedOrder(tracked.len()));
        }
        self.check_input(x)?;
        let mut tape = Tape::new(self, tracked)?;
        Ok(self.propagate(x, &mut tape))
    }

    /// Like [`forward_jet`](Self::forward_jet) but records the tape needed by
    /// [`backward`](Self::backward). `tracked` may be empty for value-only passes.
    pub fn forward_recorded(&self, x: &[S], tape: &mut Tape<S>) -> Result<Jet2<S>> {
        self.check_input(x)?;
        tape.check(self)?;
        Ok(self.propagate(x, tape))
    }

    /// Activations of the last hidden layer at `x`.
    pub fn hidden_features(&self, x: &[S]) -> Result<Vec<S>> {
        self.check_input(x)?;
        let mut tape = Tape::new(self, &[])?;
        self.propagate(x, &mut tape);
        let last = self.num_layers() - 1;
        Ok(tape.inputs[last].clone())
    }

    fn propagate(&self, x: &[S], tape: &mut Tape<S>) -> Jet2<S> {
        let dim = tape.tracked.len();
        let nch = channel_count(dim);
        let n0 = self.input_dim();
        {
            let a = &mut tape.inputs[0];
            a.iter_mut().for_each(|v| *v = S::zero());
            a[..n0].copy_from_slice(x);
            for (k, &t) in tape.tracked.iter().enumerate() {
                a[(1 + k) * n0 + t] = S::one();
            }
        }
        let n_layers = self.num_layers();
        for l in 0..n_layers {
            let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let w = self.weights(l);
            let b = self.biases(l);
            {
                let a = &tape.inputs[l];
                let z = &mut tape.pre[l];
                for o in 0..n_out {
                    let row = &w[o * n_in..(o + 1) * n_in];
                    for c in 0..nch {
                        let ac = &a[c * n_in..(c + 1) * n_in];
                        let mut s = S::zero();
                        for i in 0..n_in {
                            s += row[i] * ac[i];
                        }
                        z[c * n_out + o] = if c == 0 { s + b[o] } else { s };
                    }
                }
            }
            if l + 1 < n_layers {
                let (z, next) = {
                    let (pre, inputs) = (&tape.pre, &mut tape.inputs);
                    (&pre[l], &mut inputs[l + 1])
                };
                for u in 0..n_out {
                    let z0 = z[u];
                    let [s0, s1, s2, _] = self.activation.eval(z0);
                    next[u] = s0;
                    for k in 0..dim {
                        next[(1 + k) * n_out + u] = s1 * z[(1 + k) * n_out + u];
                    }
                    for (p, &(i, j)) in pairs(dim).iter().enumerate() {
                        let zi = z[(1 + i) * n_out + u];
                        let zj = z[(1 + j) * n_out + u];
                        let zp = z[(1 + dim + p) * n_out + u];
                        next[(1 + dim + p) * n_out + u] = s2 * zi * zj + s1 * zp;
                    }
                }
            }
        }
        let out = &tape.pre[n_layers - 1];
        Jet2::from_channels(&out[..nch], dim)
    }

    /// Accumulates into `grad` the parameter gradient of `<upstream, output jet>`
    /// for the evaluation recorded in `tape`.
    pub fn backward_into(&self, tape: &mut Tape<S>, upstream: &Jet2<S>, grad: &mut [S]) -> Result<()> {
        tape.check(self)?;
        if grad.len() != self.params.len() {
            return Err(Error::Shape { expected: self.params.len(), got: grad.len() });
        }
        let dim = tape.tracked.len();
        if upstream.dim() != dim {
            return Err(Error::Internal(format!(
                "cotangent tracks {} inputs, tape tracks {}",
                upstream.dim(),
                dim
            )));
        }
        let nch = channel_count(dim);
        let n_layers = self.num_layers();
        let Tape { inputs, pre, gz, ga, .. } = tape;
        gz[..nch].copy_from_slice(&upstream.channels());
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let w_off = self.offsets[l];
            let b_off = w_off + n_in * n_out;
            let a = &inputs[l];
            for o in 0..n_out {
                let gw = &mut grad[w_off + o * n_in..w_off + (o + 1) * n_in];
                for c in 0..nch {
                    let g = gz[c * n_out + o];
                    if g != S::zero() {
                        let ac = &a[c * n_in..(c + 1) * n_in];
                        for i in 0..n_in {
                            gw[i] += g * ac[i];
                        }
                    }
                }
                grad[b_off + o] += gz[o];
            }
            if l == 0 {
                break;
            }
            // cotangent on this layer's input activations
            let w = self.weights(l);
            ga[..nch * n_in].iter_mut().for_each(|v| *v = S::zero());
            for o in 0..n_out {
                let row = &w[o * n_in..(o + 1) * n_in];
                for c in 0..nch {
                    let g = gz[c * n_out + o];
                    if g != S::zero() {
                        let gac = &mut ga[c * n_in..(c + 1) * n_in];
                        for i in 0..n_in {
                            gac[i] += row[i] * g;
                        }
                    }
                }
            }
            // through the activation of layer l - 1
            let z = &pre[l - 1];
            let n = n_in;
            for u in 0..n {
                let [_, s1, s2, s3] = self.activation.eval(z[u]);
                let mut g0 = ga[u] * s1;
                let mut g1 = [S::zero(); 2];
                for k in 0..dim {
                    let gak = ga[(1 + k) * n + u];
                    g1[k] = gak * s1;
                    g0 += gak * s2 * z[(1 + k) * n + u];
                }
                for (p, &(i, j)) in pairs(dim).iter().enumerate() {
                    let gap = ga[(1 + dim + p) * n + u];
                    let zi = z[(1 + i) * n + u];
                    let zj = z[(1 + j) * n + u];
                    let zp = z[(1 + dim + p) * n + u];
                    gz[(1 + dim + p) * n + u] = gap * s1;
                    g0 += gap * (s3 * zi * zj + s2 * zp);
                    g1[i] += gap * s2 * zj;
                    g1[j] += gap * s2 * zi;
                }
                gz[u] = g0;
                for k in 0..dim {
                    gz[(1 + k) * n + u] = g1[k];
                }
            }
        }
        Ok(())
    }

    /// Parameter gradient of `<upstream, output jet>` for the recorded evaluation.
    pub fn backward(&self, tape: &mut Tape<S>, upstream: &Jet2<S>) -> Result<Vec<S>> {
        let mut grad = vec![S::zero(); self.params.len()];
        self.backward_into(tape, upstream, &mut grad)?;
        Ok(grad)
    }
}

/// Per-layer activations and pre-activations of one jet-valued forward pass,
/// plus scratch space for the reverse sweep. Reusable across evaluations of
/// networks with the same architecture.
#[derive(Clone, Debug)]
pub struct Tape<S> {
    layer_sizes: Vec<usize>,
    tracked: Vec<usize>,
    inputs: Vec<Vec<S>>,
    pre: Vec<Vec<S>>,
    gz: Vec<S>,
    ga: Vec<S>,
}

impl<S: Real> Tape<S> {
    pub fn new(params: &NetworkParameters<S>, tracked: &[usize]) -> Result<Self> {
        if tracked.len() > 2 {
            return Err(Error::UnsupportedOrder(tracked.len()));
        }
        let n0 = params.input_dim();
        if let Some(&bad) = tracked.iter().find(|&&t| t >= n0) {
            return Err(Error::config(format!("tracked input {bad} out of range for input dim {n0}")));
        }
        if tracked.len() == 2 && tracked[0] == tracked[1] {
            return Err(Error::config("tracked inputs must be distinct"));
        }
        let nch = channel_count(tracked.len());
        let sizes = params.layer_sizes();
        let widest = *sizes.iter().max().unwrap();
        Ok(Self {
            layer_sizes: sizes.to_vec(),
            tracked: tracked.to_vec(),
            inputs: sizes[..sizes.len() - 1].iter().map(|&n| vec![S::zero(); nch * n]).collect(),
            pre: sizes[1..].iter().map(|&n| vec![S::zero(); nch * n]).collect(),
            gz: vec![S::zero(); nch * widest],
            ga: vec![S::zero(); nch * widest],
        })
    }

    pub fn tracked(&self) -> &[usize] {
        &self.tracked
    }

    fn check(&self, params: &NetworkParameters<S>) -> Result<()> {
        if self.layer_sizes != params.layer_sizes {
            return Err(Error::Internal(format!(
                "tape recorded for layers {:?}, parameters have {:?}",
                self.layer_sizes, params.layer_sizes
            )));
        }
        Ok(())
    }
}
