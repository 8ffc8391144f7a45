//! Spatiotemporal LSTM unit with a per-layer temporal memory `C` and a
//! spatial-temporal memory `M` that travels between layers.
//!
//! Gate kernels are stored stacked along the output-channel axis so each
//! input is convolved once per step:
//!
//! | parameter   | shape                    | output blocks (in order)            |
//! |-------------|--------------------------|-------------------------------------|
//! | `x_gates`   | `[7·Ch, Cin, k, k]`      | `i, f, g, i', f', g', o`            |
//! | `x_bias`    | `[7·Ch]`                 | `b_i, b_f, b_g, b'_i, b'_f, b'_g, b_o` |
//! | `h_gates`   | `[4·Ch, Ch, k, k]`       | `i, f, g, o`                        |
//! | `m_gates`   | `[3·Ch, Ch, k, k]`       | `i', f', g'`                        |
//! | `cm_output` | `[Ch, 2·Ch, k, k]`       | output-gate taps on `[C, M]`        |
//! | `fusion`    | `[Ch, 2·Ch, 1, 1]`       | hidden-state fusion of `[C, M]`     |
//! | `decouple`  | `[Ch, Ch, 1, 1]`         | shared increment projection `W_c`   |

use rand::Rng;

use crate::error::{shape_mismatch, Result};
use crate::numerics::init::uniform_kernel;
use crate::numerics::{Graph, NodeId, ParamId, ParamStore, Real, Tensor};

/// Offsets of each gate block inside `x_gates` / `x_bias`.
pub mod gate {
    pub const I: usize = 0;
    pub const F: usize = 1;
    pub const G: usize = 2;
    pub const I_PRIME: usize = 3;
    pub const F_PRIME: usize = 4;
    pub const G_PRIME: usize = 5;
    pub const O: usize = 6;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellShape {
    pub in_channels: usize,
    pub hidden_channels: usize,
    pub kernel_size: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StLstmParams {
    pub x_gates: ParamId,
    pub x_bias: ParamId,
    pub h_gates: ParamId,
    pub m_gates: ParamId,
    pub cm_output: ParamId,
    pub fusion: ParamId,
    pub decouple: ParamId,
}

impl StLstmParams {
    pub fn ids(&self) -> [ParamId; 7] {
        [
            self.x_gates,
            self.x_bias,
            self.h_gates,
            self.m_gates,
            self.cm_output,
            self.fusion,
            self.decouple,
        ]
    }
}

/// Concrete `H`, `C`, `M` tensors of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct StLstmState<T> {
    pub hidden: Tensor<T>,
    pub temporal: Tensor<T>,
    pub spatial: Tensor<T>,
}

/// All-zero state of shape `[batch, channels, height, width]`.
pub fn init_state<T: Real>(batch: usize, channels: usize, height: usize, width: usize) -> StLstmState<T> {
    let shape = [batch, channels, height, width];
    StLstmState {
        hidden: Tensor::zeros(&shape),
        temporal: Tensor::zeros(&shape),
        spatial: Tensor::zeros(&shape),
    }
}

/// Graph handles for a layer's state after one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateNodes {
    pub hidden: NodeId,
    pub temporal: NodeId,
    pub spatial: NodeId,
}

/// Memory increments `ΔC = W_c * (i ⊙ g)` and `ΔM = W_c * (i' ⊙ g')`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecoupleIncrements {
    pub temporal: NodeId,
    pub spatial: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StLstmCell {
    pub shape: CellShape,
    pub params: StLstmParams,
}

impl StLstmCell {
    /// Registers a freshly initialised cell under `prefix` in `store`.
    pub fn new<T: Real, R: Rng + ?Sized>(store: &mut ParamStore<T>, prefix: &str, shape: CellShape, rng: &mut R) -> Self {
        let CellShape {
            in_channels: cin,
            hidden_channels: ch,
            kernel_size: k,
        } = shape;
        assert!(k % 2 == 1, "cell kernels must have odd size, got {k}");
        // Each gate block is a separate kernel, so fan-in is taken per block.
        let mut block_kernels = |blocks: usize, cin: usize, k: usize| {
            let mut data = Vec::new();
            for _ in 0..blocks {
                data.extend(uniform_kernel::<T, _>(rng, [ch, cin, k, k]).into_data());
            }
            Tensor::from_vec(&[blocks * ch, cin, k, k], data).expect("block layout")
        };
        let x_gates = block_kernels(7, cin, k);
        let h_gates = block_kernels(4, ch, k);
        let m_gates = block_kernels(3, ch, k);
        let cm_output = block_kernels(1, 2 * ch, k);
        let fusion = block_kernels(1, 2 * ch, 1);
        let decouple = block_kernels(1, ch, 1);
        let mut bias = Tensor::zeros(&[7 * ch]);
        for blk in [gate::F, gate::F_PRIME] {
            bias.data_mut()[blk * ch..(blk + 1) * ch].fill(T::one());
        }
        let params = StLstmParams {
            x_gates: store.add(format!("{prefix}.x_gates"), x_gates),
            x_bias: store.add(format!("{prefix}.x_bias"), bias),
            h_gates: store.add(format!("{prefix}.h_gates"), h_gates),
            m_gates: store.add(format!("{prefix}.m_gates"), m_gates),
            cm_output: store.add(format!("{prefix}.cm_output"), cm_output),
            fusion: store.add(format!("{prefix}.fusion"), fusion),
            decouple: store.add(format!("{prefix}.decouple"), decouple),
        };
        Self { shape, params }
    }

    /// One recurrent update.
    ///
    /// `hidden_prev` and `temporal_prev` come from this layer at the previous
    /// step; `spatial_in` is `M` from the layer below (or the top layer of the
    /// previous step when this is the bottom layer).
    pub fn step<T: Real>(
        &self,
        g: &mut Graph<T>,
        store: &ParamStore<T>,
        x: NodeId,
        hidden_prev: NodeId,
        temporal_prev: NodeId,
        spatial_in: NodeId,
    ) -> Result<(StateNodes, DecoupleIncrements)> {
        let xs = g.shape(x).to_vec();
        for other in [hidden_prev, temporal_prev, spatial_in] {
            let s = g.shape(other);
            if s.len() != 4 || xs.len() != 4 || s[0] != xs[0] || s[2..] != xs[2..] || s[1] != self.shape.hidden_channels {
                return Err(shape_mismatch("stlstm_step", &xs, s));
            }
        }
        if xs[1] != self.shape.in_channels {
            return Err(shape_mismatch("stlstm_step", &xs, &[xs[0], self.shape.in_channels, xs[2], xs[3]]));
        }
        let pad = self.shape.kernel_size / 2;
        let p = &self.params;

        let wx = g.param(store, p.x_gates);
        let bx = g.param(store, p.x_bias);
        let xc = g.conv2d(x, wx, 1, pad)?;
        let xc = g.add_bias(xc, bx)?;
        let xg = g.split_channels(xc, 7)?;

        let wh = g.param(store, p.h_gates);
        let hc = g.conv2d(hidden_prev, wh, 1, pad)?;
        let hg = g.split_channels(hc, 4)?;

        let wm = g.param(store, p.m_gates);
        let mc = g.conv2d(spatial_in, wm, 1, pad)?;
        let mg = g.split_channels(mc, 3)?;

        let pre = g.add(xg[gate::I], hg[0])?;
        let i = g.sigmoid(pre);
        let pre = g.add(xg[gate::F], hg[1])?;
        let f = g.sigmoid(pre);
        let pre = g.add(xg[gate::G], hg[2])?;
        let gg = g.tanh(pre);
        let keep = g.mul(f, temporal_prev)?;
        let write = g.mul(i, gg)?;
        let temporal = g.add(keep, write)?;

        let pre = g.add(xg[gate::I_PRIME], mg[0])?;
        let ip = g.sigmoid(pre);
        let pre = g.add(xg[gate::F_PRIME], mg[1])?;
        let fp = g.sigmoid(pre);
        let pre = g.add(xg[gate::G_PRIME], mg[2])?;
        let gp = g.tanh(pre);
        let keep_m = g.mul(fp, spatial_in)?;
        let write_m = g.mul(ip, gp)?;
        let spatial = g.add(keep_m, write_m)?;

        let cm = g.concat_channels(&[temporal, spatial])?;
        let wcm = g.param(store, p.cm_output);
        let peep = g.conv2d(cm, wcm, 1, pad)?;
        let pre = g.add(xg[gate::O], hg[3])?;
        let pre = g.add(pre, peep)?;
        let o = g.sigmoid(pre);
        let wf = g.param(store, p.fusion);
        let fused = g.conv2d(cm, wf, 1, 0)?;
        let fused = g.tanh(fused);
        let hidden = g.mul(o, fused)?;

        let wc = g.param(store, p.decouple);
        let d_temporal = g.conv2d(write, wc, 1, 0)?;
        let d_spatial = g.conv2d(write_m, wc, 1, 0)?;

        Ok((
            StateNodes {
                hidden,
                temporal,
                spatial,
            },
            DecoupleIncrements {
                temporal: d_temporal,
                spatial: d_spatial,
            },
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cell(store: &mut ParamStore<f64>, cin: usize, ch: usize, k: usize) -> StLstmCell {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        StLstmCell::new(
            store,
            "cell",
            CellShape {
                in_channels: cin,
                hidden_channels: ch,
                kernel_size: k,
            },
            &mut rng,
        )
    }

    fn run(cell: &StLstmCell, store: &ParamStore<f64>, x: &Tensor<f64>, prev: &StLstmState<f64>) -> (StLstmState<f64>, Tensor<f64>, Tensor<f64>) {
        let mut g = Graph::new();
        let xn = g.input(x.clone());
        let h = g.input(prev.hidden.clone());
        let c = g.input(prev.temporal.clone());
        let m = g.input(prev.spatial.clone());
        let (s, inc) = cell.step(&mut g, store, xn, h, c, m).unwrap();
        (
            StLstmState {
                hidden: g.value(s.hidden).clone(),
                temporal: g.value(s.temporal).clone(),
                spatial: g.value(s.spatial).clone(),
            },
            g.value(inc.temporal).clone(),
            g.value(inc.spatial).clone(),
        )
    }

    fn pattern(shape: &[usize], seed: f64) -> Tensor<f64> {
        let n: usize = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|i| ((i as f64 + seed) * 0.731).sin()).collect()).unwrap()
    }

    #[test]
    fn zero_weights_halve_memories() {
        let mut store = ParamStore::new();
        let c = cell(&mut store, 2, 3, 3);
        for p in store.iter_mut() {
            p.value.fill(0.0);
        }
        let prev = StLstmState {
            hidden: Tensor::zeros(&[1, 3, 4, 4]),
            temporal: pattern(&[1, 3, 4, 4], 1.0),
            spatial: pattern(&[1, 3, 4, 4], 2.0),
        };
        let (s, _, _) = run(&c, &store, &pattern(&[1, 2, 4, 4], 0.0), &prev);
        assert_eq!(s.temporal, prev.temporal.map(|v| 0.5 * v));
        assert_eq!(s.spatial, prev.spatial.map(|v| 0.5 * v));
        assert!(s.hidden.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn saturated_gates_carry_memory() {
        let mut store = ParamStore::new();
        let c = cell(&mut store, 2, 3, 3);
        for p in store.iter_mut() {
            p.value.fill(0.0);
        }
        let bias = store.value_mut(c.params.x_bias);
        for blk in [gate::F, gate::F_PRIME] {
            bias.data_mut()[blk * 3..(blk + 1) * 3].fill(30.0);
        }
        for blk in [gate::I, gate::I_PRIME] {
            bias.data_mut()[blk * 3..(blk + 1) * 3].fill(-30.0);
        }
        let prev = StLstmState {
            hidden: pattern(&[1, 3, 4, 4], 3.0),
            temporal: pattern(&[1, 3, 4, 4], 1.0),
            spatial: pattern(&[1, 3, 4, 4], 2.0),
        };
        let (s, _, _) = run(&c, &store, &pattern(&[1, 2, 4, 4], 0.0), &prev);
        for (a, b) in s.temporal.data().iter().zip(prev.temporal.data()) {
            assert!((a - b).abs() < 1e-4);
        }
        for (a, b) in s.spatial.data().iter().zip(prev.spatial.data()) {
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn increments_ignore_output_gate() {
        let mut store = ParamStore::new();
        let c = cell(&mut store, 2, 3, 3);
        let x = pattern(&[1, 2, 4, 4], 0.0);
        let prev = StLstmState {
            hidden: pattern(&[1, 3, 4, 4], 3.0),
            temporal: pattern(&[1, 3, 4, 4], 1.0),
            spatial: pattern(&[1, 3, 4, 4], 2.0),
        };
        let (s0, dc0, dm0) = run(&c, &store, &x, &prev);
        let w = store.value_mut(c.params.x_gates);
        let per = w.len() / 7;
        w.data_mut()[gate::O * per..].iter_mut().for_each(|v| *v += 0.3);
        store.value_mut(c.params.cm_output).data_mut().iter_mut().for_each(|v| *v -= 0.2);
        let (s1, dc1, dm1) = run(&c, &store, &x, &prev);
        assert_eq!(dc0, dc1);
        assert_eq!(dm0, dm1);
        assert_ne!(s0.hidden, s1.hidden);
    }

    #[test]
    fn step_is_deterministic() {
        let mut store = ParamStore::new();
        let c = cell(&mut store, 2, 3, 5);
        let prev = StLstmState {
            hidden: pattern(&[2, 3, 4, 4], 3.0),
            temporal: pattern(&[2, 3, 4, 4], 1.0),
            spatial: pattern(&[2, 3, 4, 4], 2.0),
        };
        let x = pattern(&[2, 2, 4, 4], 0.5);
        assert_eq!(run(&c, &store, &x, &prev), run(&c, &store, &x, &prev));
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut store = ParamStore::new();
        let c = cell(&mut store, 2, 3, 3);
        let mut g = Graph::new();
        let x = g.input(Tensor::zeros(&[1, 2, 4, 4]));
        let h = g.input(Tensor::zeros(&[1, 3, 4, 4]));
        let m = g.input(Tensor::zeros(&[1, 3, 5, 5]));
        assert!(c.step(&mut g, &store, x, h, h, m).is_err());
        let bad_x = g.input(Tensor::zeros(&[1, 1, 4, 4]));
        assert!(c.step(&mut g, &store, bad_x, h, h, h).is_err());
    }

    #[test]
    fn init_state_is_zero() {
        let s = init_state::<f32>(1, 16, 8, 8);
        assert_eq!(s.hidden.shape(), &[1, 16, 8, 8]);
        assert_eq!(s.hidden.sum() + s.temporal.sum() + s.spatial.sum(), 0.0);
        assert_eq!(s, init_state(1, 16, 8, 8));
    }

    #[test]
    fn forget_biases_start_at_one() {
        let mut store = ParamStore::new();
        let c = cell(&mut store, 2, 3, 3);
        let b = store.value(c.params.x_bias).to_f64_vec();
        assert_eq!(&b[3..6], &[1.0; 3]);
        assert_eq!(&b[12..15], &[1.0; 3]);
        assert_eq!(b.iter().sum::<f64>(), 6.0);
    }
}
