//! Reverse-mode gradients against central finite differences, in f64.
//!
//! Each suite returns `(label, relative error)` for every checked tensor.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stcnet::discriminator::{Discriminator, DiscriminatorConfig, Weights};
use stcnet::generator::{Generator, GeneratorConfig};
use stcnet::losses::{
    decouple_loss, generator_total_loss, gradient_loss, intensity_loss, lsgan_d_loss, lsgan_g_loss, GeneratorTerms, LossWeights,
};
use stcnet::numerics::{finite_diff_param, relative_error, Graph, NodeId, ParamId, ParamStore, SpatialAxis, Tensor};
use stcnet::stlstm::{CellShape, StLstmCell};
use stcnet::Result;

pub type Errors = Vec<(String, f64)>;

pub const STEP: f64 = 1e-6;
pub const TOLERANCE: f64 = 1e-5;

pub fn random(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

/// Reduces any node to a scalar with fixed pseudo-random weights so that
/// every output element contributes a distinct amount.
fn weighted_sum(g: &mut Graph<f64>, x: NodeId) -> NodeId {
    let n = g.value(x).len();
    let w: Vec<f64> = (0..n).map(|i| ((i * 7919 % 101) as f64 / 101.0) - 0.37).collect();
    let w = g.input(Tensor::from_vec(g.shape(x), w).unwrap());
    let p = g.mul(x, w).unwrap();
    g.sum(p)
}

/// Checks d(build)/d(param) for every parameter in `store`.
fn check_store(store: &mut ParamStore<f64>, build: impl Fn(&mut Graph<f64>, &ParamStore<f64>) -> Result<NodeId>) -> Errors {
    let mut g = Graph::new();
    let out = build(&mut g, store).unwrap();
    let loss = if g.value(out).len() == 1 { out } else { weighted_sum(&mut g, out) };
    store.zero_grad();
    g.backward(loss, store).unwrap();
    let ids: Vec<ParamId> = store.ids().collect();
    let mut errors = Errors::new();
    for id in ids {
        let numeric = finite_diff_param(
            store,
            id,
            |s| {
                let mut g = Graph::new();
                let out = build(&mut g, s).unwrap();
                let loss = if g.value(out).len() == 1 { out } else { weighted_sum(&mut g, out) };
                g.scalar(loss)
            },
            STEP,
        );
        errors.push((store.get(id).name.clone(), relative_error(store.grad(id), &numeric)));
    }
    errors
}

/// Registers `inputs` as parameters and checks an op applied to them.
fn check_op(out: &mut Errors, name: &str, inputs: Vec<Tensor<f64>>, op: impl Fn(&mut Graph<f64>, &[NodeId]) -> Result<NodeId>) {
    let mut store = ParamStore::new();
    let ids: Vec<ParamId> = inputs.into_iter().enumerate().map(|(k, t)| store.add(format!("{name}.in{k}"), t)).collect();
    out.extend(check_store(&mut store, |g, s| {
        let nodes: Vec<NodeId> = ids.iter().map(|&id| g.param(s, id)).collect();
        op(g, &nodes)
    }));
}

pub fn primitive_ops() -> Errors {
    let mut errs = Errors::new();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let r = &mut rng;
    let x = random(r, &[2, 3, 5, 5], -1.0, 1.0);
    check_op(&mut errs, "conv_same", vec![x.clone(), random(r, &[4, 3, 3, 3], -0.5, 0.5)], |g, n| g.conv2d(n[0], n[1], 1, 1));
    check_op(&mut errs, "conv_strided", vec![random(r, &[2, 2, 8, 8], -1.0, 1.0), random(r, &[3, 2, 4, 4], -0.5, 0.5)], |g, n| {
        g.conv2d(n[0], n[1], 2, 1)
    });
    check_op(&mut errs, "conv_1x1", vec![x.clone(), random(r, &[2, 3, 1, 1], -0.5, 0.5)], |g, n| g.conv2d(n[0], n[1], 1, 0));
    check_op(&mut errs, "add_bias", vec![x.clone(), random(r, &[3], -1.0, 1.0)], |g, n| g.add_bias(n[0], n[1]));
    let y = random(r, &[2, 3, 5, 5], -1.0, 1.0);
    check_op(&mut errs, "add", vec![x.clone(), y.clone()], |g, n| g.add(n[0], n[1]));
    check_op(&mut errs, "sub", vec![x.clone(), y.clone()], |g, n| g.sub(n[0], n[1]));
    check_op(&mut errs, "mul", vec![x.clone(), y.clone()], |g, n| g.mul(n[0], n[1]));
    check_op(&mut errs, "scale", vec![x.clone()], |g, n| Ok(g.scale(n[0], -2.5)));
    check_op(&mut errs, "sigmoid", vec![x.clone()], |g, n| Ok(g.sigmoid(n[0])));
    check_op(&mut errs, "tanh", vec![x.clone()], |g, n| Ok(g.tanh(n[0])));
    let away_from_zero = x.map(|v| if v.abs() < 0.05 { v + 0.1 } else { v });
    check_op(&mut errs, "leaky_relu", vec![away_from_zero.clone()], |g, n| Ok(g.leaky_relu(n[0], 0.2)));
    check_op(&mut errs, "abs", vec![away_from_zero.clone()], |g, n| Ok(g.abs(n[0])));
    check_op(&mut errs, "concat", vec![x.clone(), random(r, &[2, 2, 5, 5], -1.0, 1.0)], |g, n| g.concat_channels(&[n[0], n[1]]));
    check_op(&mut errs, "slice", vec![x.clone()], |g, n| g.slice_channels(n[0], 1, 2));
    check_op(&mut errs, "split", vec![random(r, &[2, 4, 3, 3], -1.0, 1.0)], |g, n| {
        let parts = g.split_channels(n[0], 2)?;
        let scaled = g.scale(parts[1], 3.0);
        g.mul(parts[0], scaled)
    });
    let grid = random(r, &[2, 2, 4, 4], -1.0, 1.0);
    check_op(&mut errs, "space_to_depth", vec![grid.clone()], |g, n| g.space_to_depth(n[0], 2));
    check_op(&mut errs, "depth_to_space", vec![random(r, &[2, 8, 2, 2], -1.0, 1.0)], |g, n| g.depth_to_space(n[0], 2));
    check_op(&mut errs, "diff_v", vec![grid.clone()], |g, n| g.spatial_diff(n[0], SpatialAxis::Vertical));
    check_op(&mut errs, "diff_h", vec![grid.clone()], |g, n| g.spatial_diff(n[0], SpatialAxis::Horizontal));
    check_op(&mut errs, "reshape", vec![grid.clone()], |g, n| g.reshape(n[0], &[4, 16]));
    check_op(&mut errs, "sum", vec![grid.clone()], |g, n| Ok(g.sum(n[0])));
    check_op(&mut errs, "mean", vec![grid.clone()], |g, n| Ok(g.mean(n[0])));
    check_op(&mut errs, "mse_mean", vec![x.clone(), y.clone()], |g, n| g.mse_mean(n[0], n[1]));
    check_op(&mut errs, "abs_diff_l1", vec![x.clone(), y.clone()], |g, n| g.abs_diff_l1(n[0], n[1]));
    check_op(&mut errs, "abs_cosine", vec![x.clone(), y.clone()], |g, n| Ok(g.abs_cosine(n[0], n[1])?.0));
    errs
}

pub fn loss_functions() -> Errors {
    let mut errs = Errors::new();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let r = &mut rng;
    let frames = || (0..2).map(|_| random(&mut ChaCha8Rng::seed_from_u64(5), &[2, 1, 4, 4], 0.0, 1.0));
    let preds: Vec<Tensor<f64>> = (0..2).map(|_| random(r, &[2, 1, 4, 4], 0.0, 1.0)).collect();
    let targets: Vec<Tensor<f64>> = frames().collect();
    let with_targets = |f: fn(&mut Graph<f64>, &[NodeId], &[NodeId]) -> Result<NodeId>| {
        let targets = targets.clone();
        move |g: &mut Graph<f64>, n: &[NodeId]| {
            let t: Vec<NodeId> = targets.iter().map(|t| g.input(t.clone())).collect();
            f(g, n, &t)
        }
    };
    check_op(&mut errs, "intensity_loss", preds.clone(), with_targets(intensity_loss));
    check_op(&mut errs, "gradient_loss", preds.clone(), with_targets(gradient_loss));
    let incs: Vec<Tensor<f64>> = (0..4).map(|_| random(r, &[2, 3, 2, 2], -1.0, 1.0)).collect();
    check_op(&mut errs, "decouple_loss", incs, |g, n| {
        let pairs = [
            stcnet::stlstm::DecoupleIncrements { temporal: n[0], spatial: n[1] },
            stcnet::stlstm::DecoupleIncrements { temporal: n[2], spatial: n[3] },
        ];
        Ok(decouple_loss(g, &pairs)?.0)
    });
    let grids = vec![random(r, &[2, 1, 3, 3], -1.0, 2.0), random(r, &[2, 1, 3, 3], -1.0, 2.0)];
    check_op(&mut errs, "lsgan_d_loss", grids.clone(), |g, n| lsgan_d_loss(g, n[0], n[1]));
    check_op(&mut errs, "lsgan_g_loss", grids[..1].to_vec(), |g, n| lsgan_g_loss(g, n[0]));
    errs
}

pub fn stlstm_step() -> Errors {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut store = ParamStore::new();
    let shape = CellShape {
        in_channels: 2,
        hidden_channels: 3,
        kernel_size: 3,
    };
    let cell = StLstmCell::new(&mut store, "cell", shape, &mut rng);
    let x = store.add("x", random(&mut rng, &[2, 2, 3, 3], -1.0, 1.0));
    let h = store.add("h", random(&mut rng, &[2, 3, 3, 3], -1.0, 1.0));
    let c = store.add("c", random(&mut rng, &[2, 3, 3, 3], -1.0, 1.0));
    let m = store.add("m", random(&mut rng, &[2, 3, 3, 3], -1.0, 1.0));
    check_store(&mut store, |g, s| {
        let (xn, hn, cn, mn) = (g.param(s, x), g.param(s, h), g.param(s, c), g.param(s, m));
        let (state, inc) = cell.step(g, s, xn, hn, cn, mn)?;
        let parts = [state.hidden, state.temporal, state.spatial, inc.temporal, inc.spatial];
        let cat = g.concat_channels(&parts)?;
        let (cos, _) = g.abs_cosine(inc.temporal, inc.spatial)?;
        let a = weighted_sum(g, cat);
        let b = g.sum(cos);
        g.add(a, b)
    })
}

pub fn discriminator() -> Errors {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut store = ParamStore::new();
    let cfg = DiscriminatorConfig {
        sequence_len: 2,
        frame_channels: 1,
        channels: vec![3, 4],
    };
    let d = Discriminator::new(cfg, &mut store, &mut rng).unwrap();
    for p in store.iter_mut() {
        if p.name.ends_with("bias") {
            p.value = p.value.map(|_| 0.05);
        }
    }
    let real: Vec<ParamId> = (0..2).map(|k| store.add(format!("real{k}"), random(&mut rng, &[2, 1, 8, 8], 0.0, 1.0))).collect();
    let fake: Vec<ParamId> = (0..2).map(|k| store.add(format!("fake{k}"), random(&mut rng, &[2, 1, 8, 8], 0.0, 1.0))).collect();
    check_store(&mut store, |g, s| {
        let rn: Vec<NodeId> = real.iter().map(|&id| g.param(s, id)).collect();
        let fk: Vec<NodeId> = fake.iter().map(|&id| g.param(s, id)).collect();
        let rg = d.discriminate(g, s, &rn, Weights::Trainable)?;
        let fg = d.discriminate(g, s, &fk, Weights::Trainable)?;
        lsgan_d_loss(g, rg, fg)
    })
}

fn tiny_generator(store: &mut ParamStore<f64>, rng: &mut ChaCha8Rng) -> Generator {
    let cfg = GeneratorConfig {
        num_layers: 1,
        hidden_channels: 2,
        kernel_size: 3,
        patch_factor: 2,
        context_len: 1,
        prediction_len: 2,
        frame_channels: 1,
        frame_size: (4, 4),
        bidirectional: true,
    };
    Generator::new(cfg, store, rng).unwrap()
}

/// Full one-layer, two-step bidirectional window prediction with every loss
/// the generator trains on, including the adversarial term through a frozen
/// discriminator.
pub fn predict_window_with_losses() -> Errors {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut store = ParamStore::new();
    let gen = tiny_generator(&mut store, &mut rng);
    let mut disc_store = ParamStore::new();
    let disc = Discriminator::new(
        DiscriminatorConfig {
            sequence_len: 2,
            frame_channels: 1,
            channels: vec![2],
        },
        &mut disc_store,
        &mut rng,
    )
    .unwrap();
    let before = random(&mut rng, &[2, 1, 4, 4], 0.0, 1.0);
    let after = random(&mut rng, &[2, 1, 4, 4], 0.0, 1.0);
    let targets: Vec<Tensor<f64>> = (0..2).map(|_| random(&mut rng, &[2, 1, 4, 4], 0.0, 1.0)).collect();
    check_store(&mut store, |g, s| {
        let b = g.input(before.clone());
        let a = g.input(after.clone());
        let pred = gen.predict_window(g, s, &[b], &[a], &[true], &[true])?;
        let t: Vec<NodeId> = targets.iter().map(|t| g.input(t.clone())).collect();
        let intensity = intensity_loss(g, &pred.frames, &t)?;
        let gradient = gradient_loss(g, &pred.frames, &t)?;
        let (decouple, _) = decouple_loss(g, &pred.increments())?;
        let fake = disc.discriminate(g, &disc_store, &pred.frames, Weights::Frozen)?;
        let adversarial = Some(lsgan_g_loss(g, fake)?);
        let terms = GeneratorTerms {
            intensity,
            gradient,
            adversarial,
            decouple,
        };
        generator_total_loss(g, &terms, &LossWeights::default())
    })
}

/// Raw predicted frames (no losses) through the same window.
pub fn predict_window_frames() -> Errors {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let mut store = ParamStore::new();
    let gen = tiny_generator(&mut store, &mut rng);
    let before = random(&mut rng, &[1, 1, 4, 4], 0.0, 1.0);
    let after = random(&mut rng, &[1, 1, 4, 4], 0.0, 1.0);
    check_store(&mut store, |g, s| {
        let b = g.input(before.clone());
        let a = g.input(after.clone());
        let pred = gen.predict_window(g, s, &[b], &[a], &[true], &[true])?;
        g.concat_channels(&pred.frames)
    })
}
