use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use crate::error::{Error, Result};

/// Lower probability clamp used before taking logs.
pub const PROB_CLAMP: f64 = 1e-7;

const CHECKPOINT_MAGIC: &str = "mlbatch-mlp";
const CHECKPOINT_VERSION: u32 = 1;

/// Dense network: ReLU hidden layers and a sigmoid output layer.
///
/// Parameters live in one flat vector, layer by layer, each layer storing its
/// `in × out` weight matrix row-major followed by its `out` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Activations kept for the backward pass.
struct Trace {
    /// Input to each layer (the batch itself, then post-ReLU activations).
    inputs: Vec<Array2<f64>>,
    probabilities: Array2<f64>,
}

fn sigmoid(z: f64) -> f64 {
    let p = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    // keep outputs strictly inside (0, 1)
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

impl Mlp {
    /// Zero-initialized network with layer sizes `[d, h1, ..., q]`.
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Argument(format!(
                "layer sizes {sizes:?} need at least an input and output layer, all non-zero"
            )));
        }
        let count = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        Ok(Self {
            sizes: sizes.to_vec(),
            params: vec![0.0; count],
        })
    }

    /// Glorot-uniform weights and zero biases.
    pub fn init<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        let mut mlp = Self::zeros(sizes)?;
        let mut offset = 0;
        for w in mlp.sizes.clone().windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in &mut mlp.params[offset..offset + fan_in * fan_out] {
                *p = rng.random_range(-limit..limit);
            }
            offset += fan_in * fan_out + fan_out;
        }
        Ok(mlp)
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self> {
        let mut mlp = Self::zeros(sizes)?;
        if params.len() != mlp.params.len() {
            return Err(Error::Argument(format!(
                "{} parameters given, layer sizes {sizes:?} need {}",
                params.len(),
                mlp.params.len()
            )));
        }
        mlp.params = params;
        Ok(mlp)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn n_inputs(&self) -> usize {
        self.sizes[0]
    }

    pub fn n_outputs(&self) -> usize {
        *self.sizes.last().expect("at least two layers")
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    /// Weight matrix and bias vector of `layer`.
    pub fn layer(&self, layer: usize) -> (ArrayView2<'_, f64>, ArrayView1<'_, f64>) {
        let (fan_in, fan_out) = (self.sizes[layer], self.sizes[layer + 1]);
        let start = self.offset_of(layer);
        let w = ArrayView2::from_shape((fan_in, fan_out), &self.params[start..start + fan_in * fan_out])
            .expect("consistent layout");
        let b = ArrayView1::from(&self.params[start + fan_in * fan_out..start + fan_in * fan_out + fan_out]);
        (w, b)
    }

    fn offset_of(&self, layer: usize) -> usize {
        self.sizes[..=layer]
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.n_inputs() {
            return Err(Error::Argument(format!(
                "batch has {} features, network expects {}",
                x.ncols(),
                self.n_inputs()
            )));
        }
        Ok(())
    }

    fn trace(&self, x: ArrayView2<f64>) -> Trace {
        let mut inputs = vec![x.to_owned()];
        let last = self.n_layers() - 1;
        let mut probabilities = Array2::zeros((0, 0));
        for l in 0..self.n_layers() {
            let (w, b) = self.layer(l);
            let z = inputs[l].dot(&w) + &b;
            if l == last {
                probabilities = z.mapv(sigmoid);
            } else {
                inputs.push(z.mapv(|v| v.max(0.0)));
            }
        }
        Trace {
            inputs,
            probabilities,
        }
    }

    /// Per-label probabilities for each row of `x`.
    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        Ok(self.trace(x).probabilities)
    }

    /// Gradient of the batch-mean BCE with respect to every parameter,
    /// together with the per-sample losses of the same forward pass.
    pub fn gradient(&self, x: ArrayView2<f64>, y: ArrayView2<u8>) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_input(&x)?;
        if y.dim() != (x.nrows(), self.n_outputs()) {
            return Err(Error::Argument(format!(
                "label batch is {:?}, expected ({}, {})",
                y.dim(),
                x.nrows(),
                self.n_outputs()
            )));
        }
        if x.nrows() == 0 {
            return Err(Error::Argument("empty batch".into()));
        }
        let trace = self.trace(x);
        let losses = bce_per_sample(trace.probabilities.view(), y)?;
        let scale = 1.0 / (x.nrows() * self.n_outputs()) as f64;
        let yf = y.mapv(f64::from);
        let mut delta = (&trace.probabilities - &yf) * scale;
        let mut grad = vec![0.0; self.params.len()];
        for l in (0..self.n_layers()).rev() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let start = self.offset_of(l);
            let dw = trace.inputs[l].t().dot(&delta);
            let db = delta.sum_axis(Axis(0));
            grad[start..start + fan_in * fan_out]
                .iter_mut()
                .zip(dw.iter())
                .for_each(|(g, v)| *g = *v);
            grad[start + fan_in * fan_out..start + fan_in * fan_out + fan_out]
                .iter_mut()
                .zip(db.iter())
                .for_each(|(g, v)| *g = *v);
            if l > 0 {
                let (w, _) = self.layer(l);
                let mut back = delta.dot(&w.t());
                back.zip_mut_with(&trace.inputs[l], |d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = back;
            }
        }
        Ok((grad, losses))
    }

    /// Writes a versioned text checkpoint.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = format!("{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}\nsizes");
        for s in &self.sizes {
            out.push_str(&format!(" {s}"));
        }
        out.push('\n');
        for p in &self.params {
            out.push_str(&format!("{p}\n"));
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        if header != format!("{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}") {
            return Err(Error::parse(1, format!("unsupported checkpoint header '{header}'")));
        }
        let sizes_line = lines.next().unwrap_or_default();
        let sizes = sizes_line
            .strip_prefix("sizes")
            .ok_or_else(|| Error::parse(2, "missing layer sizes"))?
            .split_whitespace()
            .map(|s| s.parse::<usize>().map_err(|e| Error::parse(2, e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        let params = lines
            .enumerate()
            .map(|(i, l)| l.trim().parse::<f64>().map_err(|e| Error::parse(i + 3, e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        Self::from_params(&sizes, params)
    }
}

/// Mean BCE over labels for each row, with probabilities clamped to
/// `[1e-7, 1 - 1e-7]`.
pub fn bce_per_sample(probabilities: ArrayView2<f64>, labels: ArrayView2<u8>) -> Result<Vec<f64>> {
    if probabilities.dim() != labels.dim() {
        return Err(Error::Argument(format!(
            "probabilities {:?} and labels {:?} differ in shape",
            probabilities.dim(),
            labels.dim()
        )));
    }
    let q = labels.ncols() as f64;
    Ok(probabilities
        .rows()
        .into_iter()
        .zip(labels.rows())
        .map(|(p, y)| {
            let total: f64 = p
                .iter()
                .zip(y.iter())
                .map(|(&p, &y)| {
                    let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
                    if y == 1 {
                        -p.ln()
                    } else {
                        -(1.0 - p).ln()
                    }
                })
                .sum();
            total / q
        })
        .collect())
}

/// Mean of [`bce_per_sample`] over all rows.
pub fn mean_bce(probabilities: ArrayView2<f64>, labels: ArrayView2<u8>) -> Result<f64> {
    let losses = bce_per_sample(probabilities, labels)?;
    Ok(losses.iter().sum::<f64>() / losses.len().max(1) as f64)
}
