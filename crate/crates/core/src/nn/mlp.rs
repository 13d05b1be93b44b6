use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::{Layout, ParamVector};
use crate::error::{Error, Result};

/// How the last layer's pre-activations are exposed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum OutputHead {
    /// Raw logits, read as `groups` independent categoricals of `choices` each.
    Logits { groups: usize, choices: usize },
    Linear,
    /// Logistic squashing into `[0, 1]`.
    Bounded,
}

/// Dense network with tanh hidden layers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub head: OutputHead,
}

/// Per-layer outputs of one forward pass; `layers[0]` is the input.
#[derive(Debug, Clone)]
pub struct Trace {
    pub layers: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.layers.last().expect("trace always holds the input")
    }
}

#[derive(Debug, Clone)]
pub struct Backprop {
    pub params: Vec<f64>,
    pub input: Vec<f64>,
}

/// Dot product with four interleaved accumulators.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, ra) = a.split_at(a.len() - a.len() % 4);
    let (cb, rb) = b.split_at(ca.len());
    for (x, y) in ca.chunks_exact(4).zip(cb.chunks_exact(4)) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl MlpSpec {
    pub fn new(input_dim: usize, hidden_dims: Vec<usize>, output_dim: usize, head: OutputHead) -> Result<Self> {
        let spec = Self {
            input_dim,
            hidden_dims,
            output_dim,
            head,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden_dims.contains(&0) {
            return Err(Error::validation("network", "all layer widths must be at least 1"));
        }
        if let OutputHead::Logits { groups, choices } = self.head {
            if groups * choices != self.output_dim {
                return Err(Error::validation(
                    "network",
                    format!("{groups} groups x {choices} choices != output_dim {}", self.output_dim),
                ));
            }
        }
        Ok(())
    }

    pub fn layout(&self) -> Layout {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 2);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.hidden_dims);
        dims.push(self.output_dim);
        Layout::new(dims).expect("validated spec has a valid layout")
    }

    /// Uniform fan-in initialization; the final layer is scaled by `final_scale`.
    pub fn init(&self, rng: &mut impl Rng, final_scale: f64) -> ParamVector {
        let layout = self.layout();
        let n_layers = layout.dims().len() - 1;
        let mut values = Vec::with_capacity(layout.num_params());
        for (li, (fan_in, fan_out)) in layout.layers().enumerate() {
            let bound = 1.0 / (fan_in as f64).sqrt();
            let scale = if li + 1 == n_layers { final_scale } else { 1.0 };
            for _ in 0..fan_out * fan_in {
                values.push(scale * rng.random_range(-bound..bound));
            }
            values.extend(std::iter::repeat_n(0.0, fan_out));
        }
        ParamVector::new(layout, values).expect("init fills every parameter")
    }

    fn check(&self, params: &ParamVector, input: &[f64]) -> Result<()> {
        if params.layout() != &self.layout() {
            return Err(Error::LayoutMismatch(format!(
                "params {:?} do not match network {:?}",
                params.layout().dims(),
                self.layout().dims()
            )));
        }
        if input.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                actual: input.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, params: &ParamVector, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.trace(params, input)?.layers.pop().expect("non-empty trace"))
    }

    pub fn trace(&self, params: &ParamVector, input: &[f64]) -> Result<Trace> {
        self.check(params, input)?;
        let layout = params.layout();
        let n_layers = layout.dims().len() - 1;
        let p = params.values();
        let mut layers = Vec::with_capacity(n_layers + 1);
        layers.push(input.to_vec());
        let mut offset = 0;
        for (li, (fan_in, fan_out)) in layout.layers().enumerate() {
            let x = &layers[li];
            let w = &p[offset..offset + fan_in * fan_out];
            let b = &p[offset + fan_in * fan_out..offset + (fan_in + 1) * fan_out];
            let last = li + 1 == n_layers;
            let y: Vec<f64> = (0..fan_out)
                .map(|o| {
                    let row = &w[o * fan_in..(o + 1) * fan_in];
                    let z = dot(row, x) + b[o];
                    match (last, self.head) {
                        (false, _) => z.tanh(),
                        (true, OutputHead::Bounded) => sigmoid(z),
                        (true, _) => z,
                    }
                })
                .collect();
            layers.push(y);
            offset += (fan_in + 1) * fan_out;
        }
        Ok(Trace { layers })
    }

    /// Reverse-mode gradient of `<output_gradient, forward(params, input)>`
    /// with respect to the parameters and the input.
    pub fn backward(&self, params: &ParamVector, input: &[f64], output_gradient: &[f64]) -> Result<Backprop> {
        let trace = self.trace(params, input)?;
        let mut grad = vec![0.0; params.len()];
        let input_grad = self.backward_trace(params, &trace, output_gradient, &mut grad)?;
        Ok(Backprop {
            params: grad,
            input: input_grad,
        })
    }

    /// Accumulates the parameter gradient into `grad` and returns the input
    /// gradient. `trace` must come from [`MlpSpec::trace`] with the same params.
    pub fn backward_trace(
        &self,
        params: &ParamVector,
        trace: &Trace,
        output_gradient: &[f64],
        grad: &mut [f64],
    ) -> Result<Vec<f64>> {
        if grad.len() != params.len() {
            return Err(Error::DimensionMismatch {
                expected: params.len(),
                actual: grad.len(),
            });
        }
        self.backprop(params, trace, output_gradient, Some(grad))
    }

    /// Input gradient only; skips the parameter gradient.
    pub fn input_gradient(&self, params: &ParamVector, trace: &Trace, output_gradient: &[f64]) -> Result<Vec<f64>> {
        self.backprop(params, trace, output_gradient, None)
    }

    fn backprop(
        &self,
        params: &ParamVector,
        trace: &Trace,
        output_gradient: &[f64],
        mut grad: Option<&mut [f64]>,
    ) -> Result<Vec<f64>> {
        if output_gradient.len() != self.output_dim {
            return Err(Error::DimensionMismatch {
                expected: self.output_dim,
                actual: output_gradient.len(),
            });
        }
        let layout = params.layout();
        let layer_shapes: Vec<(usize, usize)> = layout.layers().collect();
        let n_layers = layer_shapes.len();
        let p = params.values();

        let mut offsets = Vec::with_capacity(n_layers);
        let mut off = 0;
        for &(i, o) in &layer_shapes {
            offsets.push(off);
            off += (i + 1) * o;
        }

        // delta = dL/dz for the current layer
        let out = trace.output();
        let mut delta: Vec<f64> = match self.head {
            OutputHead::Bounded => output_gradient
                .iter()
                .zip(out)
                .map(|(g, y)| g * y * (1.0 - y))
                .collect(),
            _ => output_gradient.to_vec(),
        };

        for li in (0..n_layers).rev() {
            let (fan_in, fan_out) = layer_shapes[li];
            let x = &trace.layers[li];
            let off = offsets[li];
            if let Some(grad) = grad.as_deref_mut() {
                let (gw, gb) = grad[off..off + (fan_in + 1) * fan_out].split_at_mut(fan_in * fan_out);
                for o in 0..fan_out {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    gb[o] += d;
                    for (g, xi) in gw[o * fan_in..(o + 1) * fan_in].iter_mut().zip(x) {
                        *g += d * xi;
                    }
                }
            }
            let w = &p[off..off + fan_in * fan_out];
            let mut prev = vec![0.0; fan_in];
            for o in 0..fan_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                for (pv, wi) in prev.iter_mut().zip(&w[o * fan_in..(o + 1) * fan_in]) {
                    *pv += d * wi;
                }
            }
            if li > 0 {
                // hidden layers are tanh: dy/dz = 1 - y^2
                for (pv, y) in prev.iter_mut().zip(x) {
                    *pv *= 1.0 - y * y;
                }
            }
            delta = prev;
        }
        Ok(delta)
    }
}
