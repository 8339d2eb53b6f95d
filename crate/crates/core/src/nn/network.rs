use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::matrix::{dot, Matrix};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

/// Fully connected layer; `weights` is `out_dim × in_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub spec: LayerSpec,
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Dense>,
}

/// Activations kept by [`Network::forward`]: entry 0 is the input, entry
/// `i + 1` the output of layer `i`.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    activations: Vec<Matrix>,
}

impl ForwardCache {
    pub fn output(&self) -> &Matrix {
        self.activations.last().expect("cache holds the input at least")
    }

    pub fn into_output(mut self) -> Matrix {
        self.activations.pop().expect("cache holds the input at least")
    }

    pub fn activations(&self) -> &[Matrix] {
        &self.activations
    }
}

/// Parameter gradients plus the gradient with respect to the input batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
    pub input: Matrix,
}

impl Network {
    pub fn new(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            let s = l.spec;
            if s.in_dim == 0 || s.out_dim == 0 {
                return Err(Error::Config(format!("layer {i} has a zero dimension")));
            }
            if l.weights.rows() != s.out_dim || l.weights.cols() != s.in_dim {
                return Err(Error::Shape {
                    layer: i,
                    expected: format!("{}x{} weights", s.out_dim, s.in_dim),
                    actual: format!("{}x{}", l.weights.rows(), l.weights.cols()),
                });
            }
            if l.bias.len() != s.out_dim {
                return Err(Error::Shape {
                    layer: i,
                    expected: format!("{} biases", s.out_dim),
                    actual: l.bias.len().to_string(),
                });
            }
            if i > 0 && layers[i - 1].spec.out_dim != s.in_dim {
                return Err(Error::Shape {
                    layer: i,
                    expected: format!("in_dim {}", layers[i - 1].spec.out_dim),
                    actual: s.in_dim.to_string(),
                });
            }
            if !l.weights.all_finite() || l.bias.iter().any(|b| !b.is_finite()) {
                return Err(Error::Config(format!("layer {i} has non-finite parameters")));
            }
        }
        Ok(Self { layers })
    }

    /// Uniform fan-in initialization: weights in `±sqrt(6/in)` for ReLU
    /// layers and `±sqrt(3/in)` for identity layers; biases zero.
    pub fn init(specs: &[LayerSpec], rng: &mut Rng) -> Result<Self> {
        let layers = specs
            .iter()
            .map(|&spec| {
                let gain = match spec.activation {
                    Activation::Relu => 6.0,
                    Activation::Identity => 3.0,
                };
                let bound = (gain / spec.in_dim.max(1) as f64).sqrt();
                let data = (0..spec.in_dim * spec.out_dim)
                    .map(|_| rng.random_range(-bound..bound))
                    .collect();
                Dense {
                    spec,
                    weights: Matrix::from_vec(spec.out_dim, spec.in_dim, data),
                    bias: vec![0.0; spec.out_dim],
                }
            })
            .collect();
        Self::new(layers)
    }

    /// Single identity-activation layer with identity weights.
    pub fn identity(dim: usize) -> Self {
        Self::new(vec![Dense {
            spec: LayerSpec {
                in_dim: dim,
                out_dim: dim,
                activation: Activation::Identity,
            },
            weights: Matrix::identity(dim),
            bias: vec![0.0; dim],
        }])
        .expect("identity layer is well formed")
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].spec.in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().spec.out_dim
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.spec.in_dim * l.spec.out_dim + l.spec.out_dim)
            .sum()
    }

    /// Raw bit patterns of every parameter, layer by layer, weights then bias.
    pub fn parameter_bits(&self) -> Vec<u64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.as_slice().iter().chain(&l.bias))
            .map(|x| x.to_bits())
            .collect()
    }

    pub fn forward(&self, x: &Matrix) -> Result<ForwardCache> {
        if x.cols() != self.input_dim() {
            return Err(Error::Shape {
                layer: 0,
                expected: format!("{} input columns", self.input_dim()),
                actual: x.cols().to_string(),
            });
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.clone());
        for layer in &self.layers {
            let next = layer_forward(layer, activations.last().unwrap());
            activations.push(next);
        }
        Ok(ForwardCache { activations })
    }

    /// Forward pass without keeping intermediate activations.
    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.input_dim() {
            return Err(Error::Shape {
                layer: 0,
                expected: format!("{} input columns", self.input_dim()),
                actual: x.cols().to_string(),
            });
        }
        let mut a = layer_forward(&self.layers[0], x);
        for layer in &self.layers[1..] {
            a = layer_forward(layer, &a);
        }
        Ok(a)
    }

    pub fn backward(&self, cache: &ForwardCache, grad_output: &Matrix) -> Result<Gradients> {
        let acts = &cache.activations;
        if acts.len() != self.layers.len() + 1 {
            return Err(Error::Shape {
                layer: 0,
                expected: format!("{} cached activations", self.layers.len() + 1),
                actual: acts.len().to_string(),
            });
        }
        let batch = acts[0].rows();
        for (i, layer) in self.layers.iter().enumerate() {
            let (a_in, a_out) = (&acts[i], &acts[i + 1]);
            if a_in.cols() != layer.spec.in_dim
                || a_out.cols() != layer.spec.out_dim
                || a_out.rows() != batch
            {
                return Err(Error::Shape {
                    layer: i,
                    expected: format!("{}→{} activations", layer.spec.in_dim, layer.spec.out_dim),
                    actual: format!("{}→{}", a_in.cols(), a_out.cols()),
                });
            }
        }
        if grad_output.rows() != batch || grad_output.cols() != self.output_dim() {
            return Err(Error::Shape {
                layer: self.layers.len() - 1,
                expected: format!("{}x{} output gradient", batch, self.output_dim()),
                actual: format!("{}x{}", grad_output.rows(), grad_output.cols()),
            });
        }

        let n = self.layers.len();
        let mut weights = Vec::with_capacity(n);
        let mut biases = Vec::with_capacity(n);
        let mut grad = grad_output.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            if layer.spec.activation == Activation::Relu {
                let out = acts[i + 1].as_slice();
                grad.as_mut_slice()
                    .iter_mut()
                    .zip(out)
                    .for_each(|(g, &a)| {
                        if a <= 0.0 {
                            *g = 0.0;
                        }
                    });
            }
            let (dw, db, dx) = layer_backward(layer, &acts[i], &grad);
            weights.push(dw);
            biases.push(db);
            grad = dx;
        }
        weights.reverse();
        biases.reverse();
        Ok(Gradients {
            weights,
            biases,
            input: grad,
        })
    }
}

fn layer_forward(layer: &Dense, x: &Matrix) -> Matrix {
    let out_dim = layer.spec.out_dim;
    let relu = layer.spec.activation == Activation::Relu;
    let mut out = Matrix::zeros(x.rows(), out_dim);
    exec::for_each_row_mut(out.as_mut_slice(), out_dim, |b, row| {
        let xb = x.row(b);
        for (o, y) in row.iter_mut().enumerate() {
            let z = dot(layer.weights.row(o), xb) + layer.bias[o];
            *y = if relu { z.max(0.0) } else { z };
        }
    });
    out
}

/// `dW = gᵀ·x`, `db = Σ_b g`, `dx = g·W`; each entry summed in index order.
fn layer_backward(layer: &Dense, x: &Matrix, g: &Matrix) -> (Matrix, Vec<f64>, Matrix) {
    let (in_dim, out_dim) = (layer.spec.in_dim, layer.spec.out_dim);
    let batch = x.rows();

    let mut gt = Matrix::zeros(out_dim, batch);
    for b in 0..batch {
        for (o, &v) in g.row(b).iter().enumerate() {
            gt[(o, b)] = v;
        }
    }

    let mut dw = Matrix::zeros(out_dim, in_dim);
    exec::for_each_row_mut(dw.as_mut_slice(), in_dim, |o, row| {
        for (b, &go) in gt.row(o).iter().enumerate() {
            if go != 0.0 {
                row.iter_mut().zip(x.row(b)).for_each(|(w, &xi)| *w += go * xi);
            }
        }
    });
    let db = (0..out_dim).map(|o| gt.row(o).iter().sum()).collect();

    let mut dx = Matrix::zeros(batch, in_dim);
    exec::for_each_row_mut(dx.as_mut_slice(), in_dim, |b, row| {
        for (o, &go) in g.row(b).iter().enumerate() {
            if go != 0.0 {
                row.iter_mut()
                    .zip(layer.weights.row(o))
                    .for_each(|(d, &w)| *d += go * w);
            }
        }
    });
    (dw, db, dx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::mlp_specs;
    use crate::rng;

    fn random_matrix(r: usize, c: usize, rng: &mut Rng) -> Matrix {
        Matrix::from_vec(r, c, (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect())
    }

    #[test]
    fn identity_network_passes_input() {
        let net = Network::identity(3);
        let x = Matrix::from_rows(&[[1.0, -2.0, 3.5], [0.0, 4.0, -1.0]]).unwrap();
        assert_eq!(net.forward(&x).unwrap().output(), &x);
    }

    #[test]
    fn relu_kills_negative_preactivations() {
        let mut net = Network::identity(2);
        net.layers[0].spec.activation = Activation::Relu;
        let x = Matrix::from_rows(&[[-1.0, -0.5], [-3.0, -0.1]]).unwrap();
        let y = net.predict(&x).unwrap();
        assert!(y.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn forward_matches_straight_line_arithmetic() {
        let mut r = rng::rng(7);
        let net = Network::init(&mlp_specs(4, &[5], 3, Activation::Identity), &mut r).unwrap();
        let x = random_matrix(6, 4, &mut r);
        let y = net.predict(&x).unwrap();
        let (l0, l1) = (&net.layers[0], &net.layers[1]);
        for b in 0..6 {
            let mut h = [0.0; 5];
            for (o, hv) in h.iter_mut().enumerate() {
                let mut z = l0.bias[o];
                for i in 0..4 {
                    z += l0.weights[(o, i)] * x[(b, i)];
                }
                *hv = if z > 0.0 { z } else { 0.0 };
            }
            for o in 0..3 {
                let mut z = l1.bias[o];
                for (i, hv) in h.iter().enumerate() {
                    z += l1.weights[(o, i)] * hv;
                }
                let rel = (y[(b, o)] - z).abs() / z.abs().max(1e-300);
                assert!(rel < 1e-12, "{} vs {}", y[(b, o)], z);
            }
        }
    }

    #[test]
    fn input_dimension_mismatch_names_layer() {
        let net = Network::identity(3);
        let err = net.forward(&Matrix::zeros(2, 4)).unwrap_err();
        assert!(matches!(err, Error::Shape { layer: 0, .. }));
    }

    #[test]
    fn zero_output_gradient_gives_zero_gradients() {
        let mut r = rng::rng(1);
        let net = Network::init(&mlp_specs(3, &[4, 4], 2, Activation::Identity), &mut r).unwrap();
        let cache = net.forward(&random_matrix(5, 3, &mut r)).unwrap();
        let g = net.backward(&cache, &Matrix::zeros(5, 2)).unwrap();
        assert!(g.weights.iter().all(|w| w.as_slice().iter().all(|&v| v == 0.0)));
        assert!(g.biases.iter().all(|b| b.iter().all(|&v| v == 0.0)));
        assert!(g.input.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_layer_weight_gradient_is_outer_product_sum() {
        let mut r = rng::rng(3);
        let net = Network::init(&mlp_specs(3, &[], 2, Activation::Identity), &mut r).unwrap();
        let x = random_matrix(4, 3, &mut r);
        let g = random_matrix(4, 2, &mut r);
        let grads = net.backward(&net.forward(&x).unwrap(), &g).unwrap();
        for o in 0..2 {
            for i in 0..3 {
                let expect: f64 = (0..4).map(|b| g[(b, o)] * x[(b, i)]).sum();
                assert!((grads.weights[0][(o, i)] - expect).abs() < 1e-14);
            }
            let expect_b: f64 = (0..4).map(|b| g[(b, o)]).sum();
            assert!((grads.biases[0][o] - expect_b).abs() < 1e-14);
        }
    }

    #[test]
    fn stale_cache_rejected() {
        let mut r = rng::rng(5);
        let a = Network::init(&mlp_specs(3, &[4], 2, Activation::Identity), &mut r).unwrap();
        let b = Network::init(&mlp_specs(3, &[6], 2, Activation::Identity), &mut r).unwrap();
        let cache = a.forward(&Matrix::zeros(2, 3)).unwrap();
        assert!(matches!(b.backward(&cache, &Matrix::zeros(2, 2)), Err(Error::Shape { .. })));
        assert!(matches!(a.backward(&cache, &Matrix::zeros(3, 2)), Err(Error::Shape { .. })));
    }

    #[test]
    fn chain_mismatch_rejected() {
        let mut r = rng::rng(0);
        let mut specs = mlp_specs(3, &[4], 2, Activation::Identity);
        specs[1].in_dim = 5;
        assert!(Network::init(&specs, &mut r).is_err());
    }
}
