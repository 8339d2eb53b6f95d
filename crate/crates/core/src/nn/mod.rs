//! Dense feed-forward networks with hand-written backpropagation.

mod checkpoint;
mod loss;
mod network;
mod normalize;
mod optim;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint, Checkpoint,
    CHECKPOINT_MAGIC,
};
pub use loss::{softmax_cross_entropy, CrossEntropy};
pub use network::{Activation, Dense, ForwardCache, Gradients, LayerSpec, Network};
pub use normalize::{l2_normalize_rows, l2_normalize_rows_backward, NormalizedRows};
pub use optim::{OptimizerKind, OptimizerState};

/// Layer specs for a chain `input → hidden… → output`, ReLU on hidden layers
/// and `last` on the final one.
pub fn mlp_specs(input: usize, hidden: &[usize], output: usize, last: Activation) -> Vec<LayerSpec> {
    let mut dims = Vec::with_capacity(hidden.len() + 2);
    dims.push(input);
    dims.extend_from_slice(hidden);
    dims.push(output);
    dims.windows(2)
        .enumerate()
        .map(|(i, w)| LayerSpec {
            in_dim: w[0],
            out_dim: w[1],
            activation: if i + 2 == dims.len() { last } else { Activation::Relu },
        })
        .collect()
}
