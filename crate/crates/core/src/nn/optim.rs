use serde::{Deserialize, Serialize};

use super::network::{Gradients, Network};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerKind {
    /// Plain gradient descent, `w ← w − η·g`.
    Sgd,
    /// Adaptive moment estimation with bias correction.
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl Default for OptimizerKind {
    fn default() -> Self {
        Self::adam()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub learning_rate: f64,
    pub kind: OptimizerKind,
    pub step: u64,
    // flat per-layer [weights..., bias...] moments
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(net: &Network, kind: OptimizerKind, learning_rate: f64) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        let shapes: Vec<usize> = net
            .layers()
            .iter()
            .map(|l| l.spec.in_dim * l.spec.out_dim + l.spec.out_dim)
            .collect();
        let (first, second) = match kind {
            OptimizerKind::Sgd => (Vec::new(), Vec::new()),
            OptimizerKind::Adam { .. } => (
                shapes.iter().map(|&n| vec![0.0; n]).collect(),
                shapes.iter().map(|&n| vec![0.0; n]).collect(),
            ),
        };
        Ok(Self {
            learning_rate,
            kind,
            step: 0,
            first,
            second,
        })
    }

    /// Apply one update. Nothing is modified if any gradient entry is
    /// non-finite or shaped unlike the network.
    pub fn step(&mut self, net: &mut Network, grads: &Gradients) -> Result<()> {
        if grads.weights.len() != net.layers().len() || grads.biases.len() != net.layers().len() {
            return Err(Error::Shape {
                layer: 0,
                expected: format!("{} layer gradients", net.layers().len()),
                actual: grads.weights.len().to_string(),
            });
        }
        for (i, layer) in net.layers().iter().enumerate() {
            let (gw, gb) = (&grads.weights[i], &grads.biases[i]);
            if gw.rows() != layer.weights.rows()
                || gw.cols() != layer.weights.cols()
                || gb.len() != layer.bias.len()
            {
                return Err(Error::Shape {
                    layer: i,
                    expected: format!("{}x{}", layer.weights.rows(), layer.weights.cols()),
                    actual: format!("{}x{}", gw.rows(), gw.cols()),
                });
            }
            if !gw.all_finite() {
                return Err(Error::NonFiniteGradient { layer: i, which: "weights" });
            }
            if gb.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteGradient { layer: i, which: "bias" });
            }
        }

        self.step += 1;
        let lr = self.learning_rate;
        match self.kind {
            OptimizerKind::Sgd => {
                for (i, layer) in net.layers_mut().iter_mut().enumerate() {
                    let params = layer.weights.as_mut_slice().iter_mut().chain(layer.bias.iter_mut());
                    let g = grads.weights[i].as_slice().iter().chain(&grads.biases[i]);
                    params.zip(g).for_each(|(w, g)| *w -= lr * g);
                }
            }
            OptimizerKind::Adam { beta1, beta2, epsilon } => {
                let t = self.step as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for (i, layer) in net.layers_mut().iter_mut().enumerate() {
                    let params = layer.weights.as_mut_slice().iter_mut().chain(layer.bias.iter_mut());
                    let g = grads.weights[i].as_slice().iter().chain(&grads.biases[i]);
                    let moments = self.first[i].iter_mut().zip(self.second[i].iter_mut());
                    for ((w, &g), (m, v)) in params.zip(g).zip(moments) {
                        *m = beta1 * *m + (1.0 - beta1) * g;
                        *v = beta2 * *v + (1.0 - beta2) * g * g;
                        *w -= lr * (*m / c1) / ((*v / c2).sqrt() + epsilon);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use crate::nn::{Activation, Dense, LayerSpec};

    fn scalar_net(w: f64) -> Network {
        Network::new(vec![Dense {
            spec: LayerSpec { in_dim: 1, out_dim: 1, activation: Activation::Identity },
            weights: Matrix::from_vec(1, 1, vec![w]),
            bias: vec![0.0],
        }])
        .unwrap()
    }

    fn scalar_grad(g: f64) -> Gradients {
        Gradients {
            weights: vec![Matrix::from_vec(1, 1, vec![g])],
            biases: vec![vec![0.0]],
            input: Matrix::zeros(0, 1),
        }
    }

    #[test]
    fn sgd_definition() {
        let mut net = scalar_net(2.0);
        let mut opt = OptimizerState::new(&net, OptimizerKind::Sgd, 0.1).unwrap();
        opt.step(&mut net, &scalar_grad(3.0)).unwrap();
        assert!((net.layers()[0].weights[(0, 0)] - 1.7).abs() < 1e-15);
        assert_eq!(opt.step, 1);
    }

    #[test]
    fn zero_gradient_is_fixed_point() {
        for kind in [OptimizerKind::Sgd, OptimizerKind::adam()] {
            let mut net = scalar_net(0.25);
            let mut opt = OptimizerState::new(&net, kind, 0.5).unwrap();
            opt.step(&mut net, &scalar_grad(0.0)).unwrap();
            opt.step(&mut net, &scalar_grad(0.0)).unwrap();
            assert_eq!(net.layers()[0].weights[(0, 0)], 0.25);
            assert_eq!(opt.step, 2);
        }
    }

    #[test]
    fn adam_matches_scripted_trace() {
        // Hand-executed with β1=0.9, β2=0.999, ε=1e-8, η=0.1, w0=1:
        // t=1 g=1:   m=0.1,    v=0.001,       m̂=1,         v̂=1        → w=0.900000001
        // t=2 g=-2:  m=-0.11,  v=0.004999,    m̂=-0.578947, v̂=2.500750 → w=0.93661035347
        // t=3 g=0.5: m=-0.049, v=0.005244001, m̂=-0.180812, v̂=1.749750 → w=0.95027941967
        let grads = [1.0, -2.0, 0.5];
        let (b1, b2, eps, lr) = (0.9f64, 0.999f64, 1e-8, 0.1);
        let mut w_ref = 1.0f64;
        let (mut m, mut v) = (0.0f64, 0.0f64);
        let mut trace = Vec::new();
        for (t, &g) in grads.iter().enumerate() {
            let t = (t + 1) as i32;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            w_ref -= lr * (m / (1.0 - b1.powi(t))) / ((v / (1.0 - b2.powi(t))).sqrt() + eps);
            trace.push(w_ref);
        }
        assert!((trace[0] - 0.900_000_001).abs() < 1e-12);
        assert!((trace[1] - 0.936_610_353_47).abs() < 1e-10);
        assert!((trace[2] - 0.950_279_419_67).abs() < 1e-10);

        let mut net = scalar_net(1.0);
        let mut opt = OptimizerState::new(&net, OptimizerKind::adam(), lr).unwrap();
        for (&g, &expect) in grads.iter().zip(&trace) {
            opt.step(&mut net, &scalar_grad(g)).unwrap();
            assert!((net.layers()[0].weights[(0, 0)] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn non_finite_gradient_aborts_untouched() {
        let mut net = scalar_net(1.0);
        let mut opt = OptimizerState::new(&net, OptimizerKind::adam(), 0.1).unwrap();
        let err = opt.step(&mut net, &scalar_grad(f64::NAN)).unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient { layer: 0, which: "weights" }));
        assert_eq!(net.layers()[0].weights[(0, 0)], 1.0);
        assert_eq!(opt.step, 0);
    }
}
