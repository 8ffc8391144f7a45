//! Patch-level least-squares discriminator.
//!
//! The `p` frames of a sequence are stacked on the channel axis and passed
//! through stride-2 4×4 convolutions. The output keeps one unbounded score
//! per spatial patch.

use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::init::uniform_kernel;
use crate::numerics::{Graph, NodeId, ParamId, ParamStore, Real, Tensor};

pub const KERNEL: usize = 4;
pub const STRIDE: usize = 2;
pub const PADDING: usize = 1;
pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscriminatorConfig {
    /// Frames per sequence `p`.
    pub sequence_len: usize,
    pub frame_channels: usize,
    /// Widths of the hidden layers; a final one-channel layer is appended.
    pub channels: Vec<usize>,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        Self {
            sequence_len: 5,
            frame_channels: 1,
            channels: vec![64, 128, 256],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvLayer {
    pub kernel: ParamId,
    pub bias: ParamId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Discriminator {
    pub config: DiscriminatorConfig,
    pub layers: Vec<ConvLayer>,
}

/// How the discriminator weights enter a graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weights {
    /// Trainable leaves; `backward` writes their gradients.
    Trainable,
    /// Constants; gradients pass through to the input only.
    Frozen,
}

impl Discriminator {
    pub fn new<T: Real, R: Rng + ?Sized>(config: DiscriminatorConfig, store: &mut ParamStore<T>, rng: &mut R) -> Result<Self> {
        if config.sequence_len == 0 || config.frame_channels == 0 {
            return Err(Error::InvalidArgument("discriminator needs p >= 1 and C >= 1".into()));
        }
        let mut widths = vec![config.sequence_len * config.frame_channels];
        widths.extend(&config.channels);
        widths.push(1);
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(l, w)| ConvLayer {
                kernel: store.add(format!("disc.l{l}.kernel"), uniform_kernel(rng, [w[1], w[0], KERNEL, KERNEL])),
                bias: store.add(format!("disc.l{l}.bias"), Tensor::zeros(&[w[1]])),
            })
            .collect();
        Ok(Self { config, layers })
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        self.layers.iter().flat_map(|l| [l.kernel, l.bias]).collect()
    }

    /// Patch grid `[B, 1, Hp, Wp]` for a sequence of `p` frames `[B, C, H, W]`.
    pub fn discriminate<T: Real>(&self, g: &mut Graph<T>, store: &ParamStore<T>, seq: &[NodeId], weights: Weights) -> Result<NodeId> {
        if seq.len() != self.config.sequence_len {
            return Err(Error::InvalidArgument(format!(
                "discriminator expects {} frames, got {}",
                self.config.sequence_len,
                seq.len()
            )));
        }
        let mut x = g.concat_channels(seq)?;
        let bind = |g: &mut Graph<T>, id| match weights {
            Weights::Trainable => g.param(store, id),
            Weights::Frozen => g.input(store.value(id).clone()),
        };
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let k = bind(g, layer.kernel);
            let b = bind(g, layer.bias);
            x = g.conv2d(x, k, STRIDE, PADDING)?;
            x = g.add_bias(x, b)?;
            if l != last {
                x = g.leaky_relu(x, T::from_f64(LEAKY_SLOPE));
            }
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small() -> DiscriminatorConfig {
        DiscriminatorConfig {
            sequence_len: 2,
            frame_channels: 1,
            channels: vec![4, 4, 4],
        }
    }

    #[test]
    fn grid_size_for_64_pixels() {
        let mut store = ParamStore::<f32>::new();
        let d = Discriminator::new(small(), &mut store, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let mut g = Graph::new();
        let seq: Vec<_> = (0..2).map(|_| g.input(Tensor::full(&[3, 1, 64, 64], 0.5))).collect();
        let grid = d.discriminate(&mut g, &store, &seq, Weights::Trainable).unwrap();
        assert_eq!(g.shape(grid), &[3, 1, 4, 4]);
    }

    #[test]
    fn zero_weights_give_zero_grid() {
        let mut store = ParamStore::<f64>::new();
        let d = Discriminator::new(small(), &mut store, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        for p in store.iter_mut() {
            p.value.fill(0.0);
        }
        let mut g = Graph::new();
        let seq: Vec<_> = (0..2).map(|_| g.input(Tensor::full(&[1, 1, 16, 16], 0.7))).collect();
        let grid = d.discriminate(&mut g, &store, &seq, Weights::Frozen).unwrap();
        assert!(g.value(grid).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn wrong_sequence_length_rejected() {
        let mut store = ParamStore::<f32>::new();
        let d = Discriminator::new(small(), &mut store, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let mut g = Graph::new();
        let seq = vec![g.input(Tensor::zeros(&[1, 1, 16, 16]))];
        assert!(d.discriminate(&mut g, &store, &seq, Weights::Trainable).is_err());
    }

    #[test]
    fn batch_permutation_permutes_grid() {
        let mut store = ParamStore::<f64>::new();
        let d = Discriminator::new(small(), &mut store, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let item = |k: usize| -> Vec<f64> { (0..256).map(|i| ((i * (k + 2)) % 11) as f64 / 10.0).collect() };
        let run = |order: [usize; 2]| {
            let mut g = Graph::new();
            let mut data = Vec::new();
            for k in order {
                data.extend(item(k));
            }
            let f = g.input(Tensor::from_vec(&[2, 1, 16, 16], data).unwrap());
            let grid = d.discriminate(&mut g, &store, &[f, f], Weights::Frozen).unwrap();
            g.value(grid).clone()
        };
        let a = run([0, 1]);
        let b = run([1, 0]);
        let n = a.len() / 2;
        assert_eq!(a.data()[..n], b.data()[n..]);
        assert_eq!(a.data()[n..], b.data()[..n]);
    }

    #[test]
    fn frozen_weights_receive_no_gradient() {
        let mut store = ParamStore::<f64>::new();
        let d = Discriminator::new(small(), &mut store, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let mut g = Graph::new();
        let f = g.input(Tensor::full(&[1, 1, 16, 16], 0.3));
        let grid = d.discriminate(&mut g, &store, &[f, f], Weights::Frozen).unwrap();
        let loss = g.sum(grid);
        g.backward(loss, &mut store).unwrap();
        assert!(store.iter().all(|p| p.grad.data().iter().all(|&v| v == 0.0)));
    }
}
