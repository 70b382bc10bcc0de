//! Small feed-forward network: at most two tanh hidden layers of at most 64
//! units and a linear output layer, stored as one flat parameter vector.
//!
//! Layout per layer: row-major weights `out × in`, then `out` biases.

use serde::{Deserialize, Serialize};

use super::RlError;
use crate::scalar::Real;

pub const MAX_HIDDEN_LAYERS: usize = 2;
pub const MAX_HIDDEN_UNITS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
}

/// Layer widths including input and output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchDescriptor {
    pub layers: Vec<usize>,
    pub activation: Activation,
}

impl ArchDescriptor {
    pub fn new(input: usize, hidden: &[usize], output: usize) -> Result<Self, RlError> {
        if input == 0 || output == 0 {
            return Err(RlError::Architecture("input and output widths must be positive".into()));
        }
        if hidden.len() > MAX_HIDDEN_LAYERS {
            return Err(RlError::Architecture(format!(
                "at most {MAX_HIDDEN_LAYERS} hidden layers, got {}",
                hidden.len()
            )));
        }
        if hidden.iter().any(|&h| h == 0 || h > MAX_HIDDEN_UNITS) {
            return Err(RlError::Architecture(format!(
                "hidden widths must be in 1..={MAX_HIDDEN_UNITS}"
            )));
        }
        let mut layers = Vec::with_capacity(hidden.len() + 2);
        layers.push(input);
        layers.extend_from_slice(hidden);
        layers.push(output);
        Ok(Self {
            layers,
            activation: Activation::Tanh,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layers.last().expect("non-empty layers")
    }

    /// Width of the last hidden layer, or the input width without hidden layers.
    pub fn last_hidden_dim(&self) -> usize {
        self.layers[self.layers.len() - 2]
    }

    pub fn param_count(&self) -> usize {
        self.layers.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }
}

/// Activations recorded during a forward pass, input first, output last.
#[derive(Debug, Clone)]
pub struct Trace<T> {
    pub activations: Vec<Vec<T>>,
}

impl<T: Real> Trace<T> {
    pub fn output(&self) -> &[T] {
        self.activations.last().expect("trace has output")
    }

    pub fn last_hidden(&self) -> &[T] {
        &self.activations[self.activations.len() - 2]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    arch: ArchDescriptor,
    _scalar: std::marker::PhantomData<T>,
}

impl<T: Real> Mlp<T> {
    pub fn new(arch: ArchDescriptor) -> Self {
        Self {
            arch,
            _scalar: std::marker::PhantomData,
        }
    }

    pub fn arch(&self) -> &ArchDescriptor {
        &self.arch
    }

    fn check(&self, params: &[T], input: &[T]) -> Result<(), RlError> {
        if params.len() != self.arch.param_count() {
            return Err(RlError::Dimension {
                what: "parameters",
                expected: self.arch.param_count(),
                got: params.len(),
            });
        }
        if input.len() != self.arch.input_dim() {
            return Err(RlError::Dimension {
                what: "input",
                expected: self.arch.input_dim(),
                got: input.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, params: &[T], input: &[T]) -> Result<Vec<T>, RlError> {
        Ok(self.forward_trace(params, input)?.activations.pop().expect("output"))
    }

    pub fn forward_trace(&self, params: &[T], input: &[T]) -> Result<Trace<T>, RlError> {
        self.check(params, input)?;
        let n_layers = self.arch.layers.len() - 1;
        let mut activations = Vec::with_capacity(n_layers + 1);
        activations.push(input.to_vec());
        let mut offset = 0;
        for (l, w) in self.arch.layers.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let weights = &params[offset..offset + fan_in * fan_out];
            let biases = &params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            offset += fan_in * fan_out + fan_out;
            let prev = &activations[l];
            let hidden = l + 1 < n_layers;
            let mut out = Vec::with_capacity(fan_out);
            for (row, &b) in weights.chunks_exact(fan_in).zip(biases) {
                let z = row.iter().zip(prev).fold(b, |acc, (&wij, &x)| acc + wij * x);
                out.push(if hidden { z.tanh() } else { z });
            }
            activations.push(out);
        }
        Ok(Trace { activations })
    }

    /// Accumulates `∂(upstream·output)/∂params` into `grad` and returns the
    /// gradient with respect to the input.
    pub fn backward(&self, params: &[T], trace: &Trace<T>, upstream: &[T], grad: &mut [T]) -> Result<Vec<T>, RlError> {
        if upstream.len() != self.arch.output_dim() {
            return Err(RlError::Dimension {
                what: "upstream gradient",
                expected: self.arch.output_dim(),
                got: upstream.len(),
            });
        }
        if grad.len() != params.len() {
            return Err(RlError::Dimension {
                what: "gradient buffer",
                expected: params.len(),
                got: grad.len(),
            });
        }
        let mut offsets = Vec::with_capacity(self.arch.layers.len());
        let mut offset = 0;
        for w in self.arch.layers.windows(2) {
            offsets.push(offset);
            offset += w[0] * w[1] + w[1];
        }
        let mut delta = upstream.to_vec();
        for l in (0..self.arch.layers.len() - 1).rev() {
            let (fan_in, fan_out) = (self.arch.layers[l], self.arch.layers[l + 1]);
            let base = offsets[l];
            let prev = &trace.activations[l];
            let mut prev_delta = vec![T::zero(); fan_in];
            for (j, &dj) in delta.iter().enumerate().take(fan_out) {
                let row = base + j * fan_in;
                for i in 0..fan_in {
                    grad[row + i] += dj * prev[i];
                    prev_delta[i] += params[row + i] * dj;
                }
                grad[base + fan_in * fan_out + j] += dj;
            }
            if l > 0 {
                for (d, &a) in prev_delta.iter_mut().zip(prev) {
                    *d *= T::one() - a * a;
                }
            }
            delta = prev_delta;
        }
        Ok(delta)
    }

    /// Parameter gradient of `upstream·f(params, input)`.
    pub fn gradient(&self, params: &[T], input: &[T], upstream: &[T]) -> Result<Vec<T>, RlError> {
        let trace = self.forward_trace(params, input)?;
        let mut grad = vec![T::zero(); params.len()];
        self.backward(params, &trace, upstream, &mut grad)?;
        Ok(grad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn architecture_limits() {
        assert!(ArchDescriptor::new(4, &[64, 64], 1).is_ok());
        assert!(ArchDescriptor::new(4, &[65], 1).is_err());
        assert!(ArchDescriptor::new(4, &[8, 8, 8], 1).is_err());
        assert_eq!(
            ArchDescriptor::new(6, &[8, 8], 2).unwrap().param_count(),
            6 * 8 + 8 + 8 * 8 + 8 + 8 * 2 + 2
        );
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let net = Mlp::<f64>::new(ArchDescriptor::new(3, &[5], 2).unwrap());
        let params = vec![0.0; net.arch().param_count()];
        assert_eq!(net.forward(&params, &[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch() {
        let net = Mlp::<f64>::new(ArchDescriptor::new(3, &[5], 2).unwrap());
        let params = vec![0.0; net.arch().param_count()];
        assert!(net.forward(&params, &[1.0]).is_err());
        assert!(net.forward(&params[1..], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn input_gradient_matches_finite_difference() {
        let net = Mlp::<f64>::new(ArchDescriptor::new(4, &[6, 5], 1).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params: Vec<f64> = (0..net.arch().param_count())
            .map(|_| rng.random_range(-0.8..0.8))
            .collect();
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let trace = net.forward_trace(&params, &x).unwrap();
        let mut g = vec![0.0; params.len()];
        let dx = net.backward(&params, &trace, &[1.0], &mut g).unwrap();
        for i in 0..4 {
            let h = 1e-6;
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (net.forward(&params, &xp).unwrap()[0] - net.forward(&params, &xm).unwrap()[0]) / (2.0 * h);
            assert!((fd - dx[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn f32_network_runs() {
        let net = Mlp::<f32>::new(ArchDescriptor::new(2, &[3], 1).unwrap());
        let params = vec![0.1f32; net.arch().param_count()];
        let y = net.forward(&params, &[1.0, 1.0]).unwrap();
        assert!(y[0].is_finite());
    }
}
