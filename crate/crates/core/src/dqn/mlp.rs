//! Fully connected network with rectified-linear hidden layers and an
//! identity output layer, plus hand-written backpropagation.

use std::io;
use std::path::Path;

use rand::Rng;

use super::DqnError;

const CHECKPOINT_MAGIC: &[u8; 5] = b"GPMLP";
const CHECKPOINT_VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    inputs: usize,
    outputs: usize,
    /// Row-major `outputs x inputs`.
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn weight(&self, out: usize, inp: usize) -> f64 {
        self.weights[out * self.inputs + inp]
    }

    pub fn weight_mut(&mut self, out: usize, inp: usize) -> &mut f64 {
        &mut self.weights[out * self.inputs + inp]
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }

    fn affine(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.biases.clone();
        for (j, &xj) in x.iter().enumerate() {
            // one-hot inputs are mostly zero
            if xj == 0.0 {
                continue;
            }
            for (o, acc) in out.iter_mut().enumerate() {
                *acc += self.weights[o * self.inputs + j] * xj;
            }
        }
        out
    }
}

/// Activations recorded during a forward pass, consumed by [`Mlp::backward`].
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// `inputs[l]` is the input to layer `l`.
    inputs: Vec<Vec<f64>>,
    /// Pre-activation of every layer.
    pre: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &[f64] {
        self.pre.last().expect("network has at least one layer")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
}

impl Mlp {
    /// All-zero network with the given layer sizes (`[inputs, hidden.., outputs]`).
    pub fn zeros(sizes: &[usize]) -> Result<Self, DqnError> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(DqnError::Architecture(format!("bad layer sizes {sizes:?}")));
        }
        Ok(Self {
            layers: sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(),
        })
    }

    /// He-uniform weights, zero biases.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self, DqnError> {
        let mut net = Self::zeros(sizes)?;
        for layer in &mut net.layers {
            let bound = (6.0 / layer.inputs as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.random_range(-bound..bound);
            }
        }
        Ok(net)
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.layers[0].inputs];
        sizes.extend(self.layers.iter().map(|l| l.outputs));
        sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").outputs
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// Flat view over every parameter: each layer's weights, then its biases.
    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(l.biases.iter()))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.biases.iter_mut()))
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(|p| p.is_finite())
    }

    fn check_input(&self, x: &[f64]) -> Result<(), DqnError> {
        if x.len() != self.input_dim() {
            return Err(DqnError::Dimension {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, DqnError> {
        self.check_input(x)?;
        let last = self.layers.len() - 1;
        let mut h = x.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            h = layer.affine(&h);
            if l < last {
                relu_in_place(&mut h);
            }
        }
        Ok(h)
    }

    pub fn forward_trace(&self, x: &[f64]) -> Result<ForwardTrace, DqnError> {
        self.check_input(x)?;
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut h = x.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let z = layer.affine(&h);
            inputs.push(h);
            h = z.clone();
            if l < last {
                relu_in_place(&mut h);
            }
            pre.push(z);
        }
        Ok(ForwardTrace { inputs, pre })
    }

    /// Accumulates `d(loss)/d(params)` into `grads` given `d(loss)/d(output)`.
    pub fn backward(&self, trace: &ForwardTrace, grad_output: &[f64], grads: &mut Mlp) {
        debug_assert_eq!(grad_output.len(), self.output_dim());
        let mut delta = grad_output.to_vec();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = &trace.inputs[l];
            let g = &mut grads.layers[l];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                g.biases[o] += d;
                let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (w, &xi) in row.iter_mut().zip(input) {
                    *w += d * xi;
                }
            }
            if l == 0 {
                break;
            }
            let below = &trace.pre[l - 1];
            let mut next = vec![0.0; layer.inputs];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (acc, &w) in next.iter_mut().zip(row) {
                    *acc += d * w;
                }
            }
            for (n, &z) in next.iter_mut().zip(below) {
                if z <= 0.0 {
                    *n = 0.0;
                }
            }
            delta = next;
        }
    }

    pub fn zeros_like(&self) -> Mlp {
        Mlp {
            layers: self
                .layers
                .iter()
                .map(|l| Layer::zeros(l.inputs, l.outputs))
                .collect(),
        }
    }

    /// `self += scale * other`, elementwise.
    pub fn add_scaled(&mut self, scale: f64, other: &Mlp) {
        for (p, g) in self.params_mut().zip(other.params()) {
            *p += scale * g;
        }
    }

    /// Overwrites every parameter with `source`'s.
    pub fn copy_from(&mut self, source: &Mlp) -> Result<(), DqnError> {
        if self.layer_sizes() != source.layer_sizes() {
            return Err(DqnError::Architecture(format!(
                "cannot copy {:?} into {:?}",
                source.layer_sizes(),
                self.layer_sizes()
            )));
        }
        for (dst, src) in self.layers.iter_mut().zip(&source.layers) {
            dst.weights.copy_from_slice(&src.weights);
            dst.biases.copy_from_slice(&src.biases);
        }
        Ok(())
    }

    /// Binary checkpoint: `GPMLP`, version byte, u32 layer-size count,
    /// u64 sizes, then each layer's row-major weights and biases as f64.
    /// All integers and floats little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let sizes = self.layer_sizes();
        let mut out = Vec::with_capacity(10 + sizes.len() * 8 + self.param_count() * 8);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.push(CHECKPOINT_VERSION);
        out.extend_from_slice(&(sizes.len() as u32).to_le_bytes());
        for s in sizes {
            out.extend_from_slice(&(s as u64).to_le_bytes());
        }
        for p in self.params() {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DqnError> {
        let bad = |m: &str| DqnError::Checkpoint(m.to_string());
        let mut cursor = bytes;
        let mut take = |n: usize| -> Result<&[u8], DqnError> {
            if cursor.len() < n {
                return Err(bad("truncated"));
            }
            let (head, tail) = cursor.split_at(n);
            cursor = tail;
            Ok(head)
        };
        if take(5)? != CHECKPOINT_MAGIC {
            return Err(bad("bad magic"));
        }
        let version = take(1)?[0];
        if version != CHECKPOINT_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let count = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        if count > 1024 {
            return Err(bad("implausible layer count"));
        }
        let mut sizes = Vec::with_capacity(count);
        for _ in 0..count {
            let s = u64::from_le_bytes(take(8)?.try_into().unwrap());
            sizes.push(usize::try_from(s).map_err(|_| bad("layer size overflow"))?);
        }
        let total: usize = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        if total.checked_mul(8).map_or(true, |b| b > bytes.len()) {
            return Err(bad("truncated"));
        }
        let mut net = Self::zeros(&sizes).map_err(|_| bad("bad layer sizes"))?;
        for p in net.params_mut() {
            *p = f64::from_le_bytes(take(8)?.try_into().unwrap());
        }
        if !cursor.is_empty() {
            return Err(bad("trailing bytes"));
        }
        Ok(net)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> io::Result<()> {
        std::fs::write(path, self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DqnError> {
        let bytes = std::fs::read(path).map_err(|e| DqnError::Checkpoint(e.to_string()))?;
        Self::from_bytes(&bytes)
    }
}

fn relu_in_place(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}
