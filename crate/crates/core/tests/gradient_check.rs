//! Analytic gradients against central finite differences.

use hsmcfl_core::matrix::Matrix;
use hsmcfl_core::nn::{
    l2_normalize_rows, l2_normalize_rows_backward, mlp_specs, softmax_cross_entropy, Activation, Network,
};
use hsmcfl_core::rng;
use hsmcfl_core::supcon::{supcon_dot_loss, supcon_grad, supcon_loss, ContrastiveBatch};
use rand::Rng;

const H: f64 = 1e-5;
const TOLERANCE: f64 = 1e-6;
const INSTANCES: usize = 50;

/// `‖a − n‖ / (‖a‖ + ‖n‖)`, zero when both vanish.
fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic.iter().zip(numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt() + numeric.iter().map(|n| n * n).sum::<f64>().sqrt();
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

fn central<F: FnMut(&[f64]) -> f64>(x: &[f64], mut f: F) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + H;
            let up = f(&probe);
            probe[i] = orig - H;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * H)
        })
        .collect()
}

fn random_matrix(r: &mut rng::Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| r.random_range(-1.0..1.0)).collect())
}

/// Smallest |pre-activation| over all ReLU units; small values put the
/// finite difference across a kink.
fn kink_margin(net: &Network, x: &Matrix) -> f64 {
    let mut a = x.clone();
    let mut margin = f64::INFINITY;
    for layer in net.layers() {
        let single = Network::new(vec![hsmcfl_core::nn::Dense {
            spec: hsmcfl_core::nn::LayerSpec {
                activation: Activation::Identity,
                ..layer.spec
            },
            ..layer.clone()
        }])
        .unwrap();
        let pre = single.predict(&a).unwrap();
        if layer.spec.activation == Activation::Relu {
            margin = pre.as_slice().iter().fold(margin, |m, v| m.min(v.abs()));
        }
        a = pre;
        if layer.spec.activation == Activation::Relu {
            a.map_inplace(|v| v.max(0.0));
        }
    }
    margin
}

fn weighted_sum(out: &Matrix, g: &Matrix) -> f64 {
    out.as_slice().iter().zip(g.as_slice()).map(|(a, b)| a * b).sum()
}

#[test]
fn dense_network_gradients() {
    let mut r = rng::rng(11);
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    while checked < INSTANCES {
        let input = r.random_range(1..6);
        let hidden: Vec<usize> = (0..r.random_range(0..3)).map(|_| r.random_range(1..6)).collect();
        let output = r.random_range(1..5);
        let last = if r.random_bool(0.5) { Activation::Relu } else { Activation::Identity };
        let specs = mlp_specs(input, &hidden, output, last);
        let net = Network::init(&specs, &mut r).unwrap();
        let batch = r.random_range(1..5);
        let x = random_matrix(&mut r, batch, input);
        if kink_margin(&net, &x) < 1e-3 {
            continue;
        }
        let g = random_matrix(&mut r, batch, output);
        let grads = net.backward(&net.forward(&x).unwrap(), &g).unwrap();

        let numeric_input = central(x.as_slice(), |p| {
            weighted_sum(&net.predict(&Matrix::from_vec(batch, input, p.to_vec())).unwrap(), &g)
        });
        worst = worst.max(relative_error(grads.input.as_slice(), &numeric_input));

        for l in 0..net.layers().len() {
            let w = net.layers()[l].weights.clone();
            let numeric_w = central(w.as_slice(), |p| {
                let mut layers = net.layers().to_vec();
                layers[l].weights = Matrix::from_vec(w.rows(), w.cols(), p.to_vec());
                weighted_sum(&Network::new(layers).unwrap().predict(&x).unwrap(), &g)
            });
            worst = worst.max(relative_error(grads.weights[l].as_slice(), &numeric_w));

            let b = net.layers()[l].bias.clone();
            let numeric_b = central(&b, |p| {
                let mut layers = net.layers().to_vec();
                layers[l].bias = p.to_vec();
                weighted_sum(&Network::new(layers).unwrap().predict(&x).unwrap(), &g)
            });
            worst = worst.max(relative_error(&grads.biases[l], &numeric_b));
        }
        checked += 1;
    }
    assert!(worst < TOLERANCE, "worst relative error {worst:e}");
}

#[test]
fn cross_entropy_gradient() {
    let mut r = rng::rng(12);
    let mut worst: f64 = 0.0;
    for _ in 0..INSTANCES {
        let (b, k) = (r.random_range(1..6), r.random_range(2..6));
        let logits = random_matrix(&mut r, b, k);
        let labels: Vec<usize> = (0..b).map(|_| r.random_range(0..k)).collect();
        let ce = softmax_cross_entropy(&logits, &labels).unwrap();
        let numeric = central(logits.as_slice(), |p| {
            softmax_cross_entropy(&Matrix::from_vec(b, k, p.to_vec()), &labels).unwrap().loss
        });
        worst = worst.max(relative_error(ce.grad.as_slice(), &numeric));
    }
    assert!(worst < TOLERANCE, "worst relative error {worst:e}");
}

#[test]
fn row_normalization_gradient() {
    let mut r = rng::rng(13);
    let mut worst: f64 = 0.0;
    for _ in 0..INSTANCES {
        let (b, e) = (r.random_range(1..5), r.random_range(2..6));
        let x = random_matrix(&mut r, b, e);
        let g = random_matrix(&mut r, b, e);
        let analytic = l2_normalize_rows_backward(&l2_normalize_rows(&x), &g);
        let numeric = central(x.as_slice(), |p| {
            weighted_sum(&l2_normalize_rows(&Matrix::from_vec(b, e, p.to_vec())).rows, &g)
        });
        worst = worst.max(relative_error(analytic.as_slice(), &numeric));
    }
    assert!(worst < TOLERANCE, "worst relative error {worst:e}");
}

fn random_labels(r: &mut rng::Rng, b: usize) -> Vec<usize> {
    let k = r.random_range(1..4);
    (0..b).map(|_| r.random_range(0..k)).collect()
}

#[test]
fn contrastive_gradient_in_dot_product_form() {
    let mut r = rng::rng(14);
    let mut worst: f64 = 0.0;
    for _ in 0..INSTANCES {
        let (b, e) = (r.random_range(2..9), r.random_range(2..6));
        let tau = r.random_range(0.1..1.0);
        let z = random_matrix(&mut r, b, e);
        let labels = random_labels(&mut r, b);
        let (_, analytic) = supcon_dot_loss(&z, &labels, tau).unwrap();
        let numeric = central(z.as_slice(), |p| {
            supcon_dot_loss(&Matrix::from_vec(b, e, p.to_vec()), &labels, tau).unwrap().0
        });
        worst = worst.max(relative_error(analytic.as_slice(), &numeric));
    }
    assert!(worst < TOLERANCE, "worst relative error {worst:e}");
}

#[test]
fn contrastive_gradient_through_normalization() {
    let mut r = rng::rng(15);
    let mut worst: f64 = 0.0;
    for _ in 0..INSTANCES {
        let (b, e) = (r.random_range(2..9), r.random_range(2..6));
        let tau = r.random_range(0.1..1.0);
        let x = random_matrix(&mut r, b, e);
        let labels = random_labels(&mut r, b);
        let fwd = l2_normalize_rows(&x);
        let grad_z = supcon_grad(&ContrastiveBatch::new(&fwd.rows, &labels, tau).unwrap());
        let analytic = l2_normalize_rows_backward(&fwd, &grad_z);
        let numeric = central(x.as_slice(), |p| {
            let z = l2_normalize_rows(&Matrix::from_vec(b, e, p.to_vec())).rows;
            supcon_loss(&ContrastiveBatch::new(&z, &labels, tau).unwrap())
        });
        worst = worst.max(relative_error(analytic.as_slice(), &numeric));
    }
    assert!(worst < TOLERANCE, "worst relative error {worst:e}");
}
