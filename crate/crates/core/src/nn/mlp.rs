use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use crate::error::{Error, Result};
use crate::rng::SeededRng;

pub const LEAKY_SLOPE: f64 = 0.2;
/// Sigmoid heads clamp their logit to `[-LOGIT_CLAMP, LOGIT_CLAMP]`.
pub const LOGIT_CLAMP: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    Sigmoid,
    Identity,
}

/// Multilayer perceptron with LeakyReLU(0.2) hidden units.
///
/// Parameters are stored flat, layer by layer; within a layer the weight
/// matrix (row-major, `out x in`) comes before the bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layer_dims: Vec<usize>,
    hidden_activation: String,
    output_activation: Head,
    params: Vec<f64>,
}

/// Activations recorded by a forward pass: `inputs[l]` feeds layer `l`, `pre[l]` is its affine output.
#[derive(Debug, Clone)]
pub struct Trace {
    pub inputs: Vec<Vec<f64>>,
    pub pre: Vec<Vec<f64>>,
}

impl Trace {
    /// Raw network output before the head.
    pub fn raw_output(&self) -> &[f64] {
        self.pre.last().expect("at least one layer")
    }
}

#[inline]
fn leaky(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        LEAKY_SLOPE * z
    }
}

#[inline]
pub(crate) fn leaky_slope(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else {
        LEAKY_SLOPE
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    let z = z.clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
    1.0 / (1.0 + (-z).exp())
}

impl Mlp {
    fn param_count(dims: &[usize]) -> usize {
        dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn zeros(layer_dims: &[usize], head: Head) -> Result<Self> {
        if layer_dims.len() < 2 || layer_dims.contains(&0) {
            return Err(Error::InvalidInput(format!(
                "layer dims must have at least two positive entries, got {layer_dims:?}"
            )));
        }
        Ok(Self {
            layer_dims: layer_dims.to_vec(),
            hidden_activation: "leaky_relu(0.2)".into(),
            output_activation: head,
            params: vec![0.0; Self::param_count(layer_dims)],
        })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot(layer_dims: &[usize], head: Head, rng: &mut SeededRng) -> Result<Self> {
        let mut mlp = Self::zeros(layer_dims, head)?;
        let mut off = 0;
        for w in layer_dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in &mut mlp.params[off..off + fan_in * fan_out] {
                *p = limit * (2.0 * rng.uniform() - 1.0);
            }
            off += fan_in * fan_out + fan_out;
        }
        Ok(mlp)
    }

    pub fn from_params(layer_dims: &[usize], head: Head, params: Vec<f64>) -> Result<Self> {
        let mut mlp = Self::zeros(layer_dims, head)?;
        if params.len() != mlp.params.len() {
            return Err(Error::DimensionMismatch {
                expected: mlp.params.len(),
                got: params.len(),
            });
        }
        mlp.params = params;
        mlp.validate()?;
        Ok(mlp)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_dims.len() < 2 || self.layer_dims.contains(&0) {
            return Err(Error::InvalidInput("bad layer dims".into()));
        }
        if self.params.len() != Self::param_count(&self.layer_dims) {
            return Err(Error::DimensionMismatch {
                expected: Self::param_count(&self.layer_dims),
                got: self.params.len(),
            });
        }
        if self.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NaN("network parameters"));
        }
        Ok(())
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn head(&self) -> Head {
        self.output_activation
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn num_layers(&self) -> usize {
        self.layer_dims.len() - 1
    }

    /// (weight offset, bias offset, fan_in, fan_out) of layer `l`.
    fn layer(&self, l: usize) -> (usize, usize, usize, usize) {
        let mut off = 0;
        for w in self.layer_dims.windows(2).take(l) {
            off += w[0] * w[1] + w[1];
        }
        let (fi, fo) = (self.layer_dims[l], self.layer_dims[l + 1]);
        (off, off + fi * fo, fi, fo)
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn trace(&self, x: &[f64]) -> Result<Trace> {
        self.check_input(x)?;
        let layers = self.num_layers();
        let mut inputs = Vec::with_capacity(layers);
        let mut pre = Vec::with_capacity(layers);
        let mut h = x.to_vec();
        for l in 0..layers {
            let (wo, bo, fi, fo) = self.layer(l);
            let w = &self.params[wo..wo + fi * fo];
            let b = &self.params[bo..bo + fo];
            let z: Vec<f64> = (0..fo)
                .map(|o| b[o] + w[o * fi..(o + 1) * fi].iter().zip(&h).map(|(a, c)| a * c).sum::<f64>())
                .collect();
            let next = if l + 1 < layers {
                z.iter().map(|&v| leaky(v)).collect()
            } else {
                Vec::new()
            };
            inputs.push(std::mem::replace(&mut h, next));
            pre.push(z);
        }
        Ok(Trace { inputs, pre })
    }

    /// Network output with the head applied. Sigmoid outputs lie strictly in (0, 1).
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let t = self.trace(x)?;
        let raw = t.raw_output();
        Ok(match self.output_activation {
            Head::Identity => raw.to_vec(),
            Head::Sigmoid => raw.iter().map(|&z| sigmoid(z)).collect(),
        })
    }

    pub fn forward_scalar(&self, x: &[f64]) -> Result<f64> {
        if self.output_dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: self.output_dim(),
            });
        }
        Ok(self.forward(x)?[0])
    }

    /// Reverse pass from `grad_out` (gradient w.r.t. the raw output).
    ///
    /// Adds `scale * dL/dtheta` into `param_grad` and returns `dL/dx`. When
    /// `deltas` is given it receives the gradient w.r.t. every layer's
    /// pre-activation.
    pub fn backward(
        &self,
        trace: &Trace,
        grad_out: &[f64],
        scale: f64,
        param_grad: &mut [f64],
        mut deltas: Option<&mut Vec<Vec<f64>>>,
    ) -> Vec<f64> {
        let layers = self.num_layers();
        let mut delta = grad_out.to_vec();
        if let Some(ds) = deltas.as_deref_mut() {
            ds.clear();
            ds.resize(layers, Vec::new());
        }
        for l in (0..layers).rev() {
            let (wo, bo, fi, fo) = self.layer(l);
            let input = &trace.inputs[l];
            for o in 0..fo {
                let g = scale * delta[o];
                if g != 0.0 {
                    for (pg, &a) in param_grad[wo + o * fi..wo + (o + 1) * fi].iter_mut().zip(input) {
                        *pg += g * a;
                    }
                }
                param_grad[bo + o] += g;
            }
            let w = &self.params[wo..wo + fi * fo];
            let mut gin = vec![0.0; fi];
            for o in 0..fo {
                let d = delta[o];
                if d != 0.0 {
                    for (gi, &wv) in gin.iter_mut().zip(&w[o * fi..(o + 1) * fi]) {
                        *gi += wv * d;
                    }
                }
            }
            if let Some(ds) = deltas.as_deref_mut() {
                ds[l] = std::mem::take(&mut delta);
            }
            if l > 0 {
                let below = &trace.pre[l - 1];
                delta = gin.iter().zip(below).map(|(g, &z)| g * leaky_slope(z)).collect();
            } else {
                return gin;
            }
        }
        unreachable!("loop returns at the input layer")
    }

    fn require_scalar_critic(&self) -> Result<()> {
        if self.output_activation != Head::Identity || self.output_dim() != 1 {
            return Err(Error::InvalidInput(
                "input gradient requires a scalar identity-head network".into(),
            ));
        }
        Ok(())
    }

    /// Exact gradient of the scalar output with respect to the input.
    pub fn grad_wrt_input(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.require_scalar_critic()?;
        let t = self.trace(x)?;
        let mut scratch = vec![0.0; self.num_params()];
        Ok(self.backward(&t, &[1.0], 0.0, &mut scratch, None))
    }

    /// Value of `||d out / dx||` at `x`; adds `scale * d||d out/dx|| / dtheta` into `param_grad`.
    ///
    /// LeakyReLU is piecewise linear, so with the activation pattern at `x`
    /// frozen the input gradient `g = W0^T r0` is multilinear in the weights.
    /// With `u = g / |g|`, pushing `u` forward through the masked linear chain
    /// gives `a_l`, and `d|g|/dW_l = r_l a_l^T` where `r_l` is the reverse-pass
    /// gradient at layer `l`. Biases only move the activation pattern and
    /// contribute nothing almost everywhere.
    pub fn input_grad_norm_with_param_grad(&self, x: &[f64], scale: f64, param_grad: &mut [f64]) -> Result<f64> {
        self.require_scalar_critic()?;
        let t = self.trace(x)?;
        let mut scratch = vec![0.0; self.num_params()];
        let mut deltas = Vec::new();
        let g = self.backward(&t, &[1.0], 0.0, &mut scratch, Some(&mut deltas));
        let norm = super::l2_norm(&g);
        if norm == 0.0 || scale == 0.0 {
            return Ok(norm);
        }
        let layers = self.num_layers();
        let mut a: Vec<f64> = g.iter().map(|v| v / norm).collect();
        for (l, r) in deltas.iter().enumerate() {
            let (wo, _, fi, fo) = self.layer(l);
            for o in 0..fo {
                let c = scale * r[o];
                if c != 0.0 {
                    for (pg, &av) in param_grad[wo + o * fi..wo + (o + 1) * fi].iter_mut().zip(&a) {
                        *pg += c * av;
                    }
                }
            }
            if l + 1 < layers {
                let w = &self.params[wo..wo + fi * fo];
                let z = &t.pre[l];
                a = (0..fo)
                    .map(|o| {
                        leaky_slope(z[o]) * w[o * fi..(o + 1) * fi].iter().zip(&a).map(|(p, q)| p * q).sum::<f64>()
                    })
                    .collect();
            }
        }
        Ok(norm)
    }
}

/// Network checkpoint: architecture, parameters and optional optimizer state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    #[serde(flatten)]
    pub network: Mlp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adam: Option<AdamState>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_net_outputs() {
        let s = Mlp::zeros(&[3, 4, 1], Head::Sigmoid).unwrap();
        assert_eq!(s.forward_scalar(&[1.0, -2.0, 0.3]).unwrap(), 0.5);
        let i = Mlp::zeros(&[3, 4, 1], Head::Identity).unwrap();
        assert_eq!(i.forward_scalar(&[1.0, -2.0, 0.3]).unwrap(), 0.0);
        assert_eq!(i.grad_wrt_input(&[1.0, 2.0, 3.0]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn hand_evaluated_single_layer() {
        // Hidden: 2 units, output identity. h = leaky(W x + b), y = v.h + c.
        let params = vec![
            1.0, -1.0, // W row 0
            0.5, 2.0, // W row 1
            0.1, -3.0, // b
            2.0, 1.0,  // v
            0.25, // c
        ];
        let m = Mlp::from_params(&[2, 2, 1], Head::Identity, params).unwrap();
        // x = (1, 2): z0 = 1 - 2 + 0.1 = -0.9 -> -0.18; z1 = 0.5 + 4 - 3 = 1.5 -> 1.5
        let y = m.forward_scalar(&[1.0, 2.0]).unwrap();
        assert!((y - (2.0 * -0.18 + 1.5 + 0.25)).abs() < 1e-12);
    }

    #[test]
    fn linear_critic_input_grad_is_weight() {
        let m = Mlp::from_params(&[3, 1], Head::Identity, vec![0.3, -1.2, 2.0, 0.7]).unwrap();
        assert_eq!(m.grad_wrt_input(&[5.0, 1.0, -2.0]).unwrap(), vec![0.3, -1.2, 2.0]);
    }

    #[test]
    fn sigmoid_strictly_inside_unit_interval() {
        let m = Mlp::from_params(&[1, 1], Head::Sigmoid, vec![1e6, 0.0]).unwrap();
        let hi = m.forward_scalar(&[1.0]).unwrap();
        let lo = m.forward_scalar(&[-1.0]).unwrap();
        assert!(hi < 1.0 && lo > 0.0);
    }

    #[test]
    fn dimension_mismatch() {
        let m = Mlp::zeros(&[3, 1], Head::Identity).unwrap();
        assert!(matches!(m.forward(&[1.0]), Err(Error::DimensionMismatch { .. })));
        let s = Mlp::zeros(&[3, 1], Head::Sigmoid).unwrap();
        assert!(s.grad_wrt_input(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn checkpoint_json_round_trip() {
        let m = Mlp::glorot(&[2, 3, 1], Head::Sigmoid, &mut SeededRng::new(1, 0)).unwrap();
        let ck = Checkpoint { network: m, adam: None };
        let s = serde_json::to_string(&ck).unwrap();
        assert!(s.contains("\"layer_dims\":[2,3,1]"));
        assert!(s.contains("\"output_activation\":\"sigmoid\""));
        let back: Checkpoint = serde_json::from_str(&s).unwrap();
        assert_eq!(back, ck);
    }
}
