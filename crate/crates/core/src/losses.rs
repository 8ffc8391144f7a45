//! Generator and discriminator objectives.

use crate::error::{shape_mismatch, Error, Result};
use crate::numerics::{Graph, NodeId, Real, SpatialAxis, Tensor};
use crate::stlstm::DecoupleIncrements;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub intensity: f64,
    pub gradient: f64,
    pub adversarial: f64,
    pub decouple: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            intensity: 1.0,
            gradient: 1.0,
            adversarial: 0.05,
            decouple: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.intensity, self.gradient, self.adversarial, self.decouple];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidArgument(format!("loss weights must be finite and non-negative, got {all:?}")));
        }
        Ok(())
    }
}

/// Scalar values of one training iteration's losses.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBundle {
    pub intensity: f64,
    pub gradient: f64,
    pub adversarial_g: f64,
    pub decouple: f64,
    pub total_g: f64,
    pub total_d: f64,
}

impl LossBundle {
    pub fn all_finite(&self) -> bool {
        [self.intensity, self.gradient, self.adversarial_g, self.decouple, self.total_g, self.total_d]
            .iter()
            .all(|v| v.is_finite())
    }
}

fn check_pairs<T: Real>(g: &Graph<T>, op: &'static str, a: &[NodeId], b: &[NodeId]) -> Result<()> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::InvalidArgument(format!("{op}: {} predicted vs {} target frames", a.len(), b.len())));
    }
    for (&x, &y) in a.iter().zip(b) {
        if g.shape(x) != g.shape(y) {
            return Err(shape_mismatch(op, g.shape(x), g.shape(y)));
        }
    }
    Ok(())
}

fn sum_scalars<T: Real>(g: &mut Graph<T>, terms: &[NodeId]) -> Result<NodeId> {
    let mut acc = terms[0];
    for &t in &terms[1..] {
        acc = g.add(acc, t)?;
    }
    Ok(acc)
}

/// Mean squared error over every frame and pixel.
pub fn intensity_loss<T: Real>(g: &mut Graph<T>, predicted: &[NodeId], target: &[NodeId]) -> Result<NodeId> {
    check_pairs(g, "intensity_loss", predicted, target)?;
    let per_frame = predicted
        .iter()
        .zip(target)
        .map(|(&p, &t)| g.mse_mean(p, t))
        .collect::<Result<Vec<_>>>()?;
    let total = sum_scalars(g, &per_frame)?;
    Ok(g.scale(total, T::from_f64(1.0 / predicted.len() as f64)))
}

/// Differences of absolute one-pixel gradients, summed over pixels and
/// frames, divided by the pixel count of a frame and averaged over the batch.
pub fn gradient_loss<T: Real>(g: &mut Graph<T>, predicted: &[NodeId], target: &[NodeId]) -> Result<NodeId> {
    check_pairs(g, "gradient_loss", predicted, target)?;
    let (b, _, h, w) = g.value(predicted[0]).dims4();
    if h < 2 || w < 2 {
        return Err(Error::InvalidArgument(format!("gradient_loss needs frames of at least 2x2, got {h}x{w}")));
    }
    let mut terms = Vec::with_capacity(2 * predicted.len());
    for (&p, &t) in predicted.iter().zip(target) {
        for axis in [SpatialAxis::Vertical, SpatialAxis::Horizontal] {
            let dp = g.spatial_diff(p, axis)?;
            let dp = g.abs(dp);
            let dt = g.spatial_diff(t, axis)?;
            let dt = g.abs(dt);
            terms.push(g.abs_diff_l1(dp, dt)?);
        }
    }
    let total = sum_scalars(g, &terms)?;
    Ok(g.scale(total, T::from_f64(1.0 / (h * w * b) as f64)))
}

/// Sum over `(t, l)` of the batch-averaged `|cos|` between the two memory
/// increments. Also returns how many per-sample terms were zeroed by the
/// norm guard.
pub fn decouple_loss<T: Real>(g: &mut Graph<T>, increments: &[DecoupleIncrements]) -> Result<(NodeId, usize)> {
    if increments.is_empty() {
        return Err(Error::InvalidArgument("decouple_loss needs at least one increment pair".into()));
    }
    let mut guarded = 0;
    let mut terms = Vec::with_capacity(increments.len());
    for inc in increments {
        let (cos, n) = g.abs_cosine(inc.temporal, inc.spatial)?;
        guarded += n;
        terms.push(g.mean(cos));
    }
    Ok((sum_scalars(g, &terms)?, guarded))
}

fn half_mean_sq_to<T: Real>(g: &mut Graph<T>, grid: NodeId, target: f64) -> Result<NodeId> {
    let t = g.input(Tensor::full(g.shape(grid), T::from_f64(target)));
    let m = g.mse_mean(grid, t)?;
    Ok(g.scale(m, T::from_f64(0.5)))
}

/// `mean ½(real − 1)² + mean ½ fake²` over patches.
pub fn lsgan_d_loss<T: Real>(g: &mut Graph<T>, real: NodeId, fake: NodeId) -> Result<NodeId> {
    if g.shape(real) != g.shape(fake) {
        return Err(shape_mismatch("lsgan_d_loss", g.shape(real), g.shape(fake)));
    }
    let r = half_mean_sq_to(g, real, 1.0)?;
    let f = half_mean_sq_to(g, fake, 0.0)?;
    g.add(r, f)
}

/// `mean ½(fake − 1)²` over patches.
pub fn lsgan_g_loss<T: Real>(g: &mut Graph<T>, fake: NodeId) -> Result<NodeId> {
    half_mean_sq_to(g, fake, 1.0)
}

/// Loss component nodes of one generator pass. `adversarial` is absent when
/// training without the discriminator.
#[derive(Debug, Clone, Copy)]
pub struct GeneratorTerms {
    pub intensity: NodeId,
    pub gradient: NodeId,
    pub adversarial: Option<NodeId>,
    pub decouple: NodeId,
}

/// λ-weighted sum of the generator terms.
pub fn generator_total_loss<T: Real>(g: &mut Graph<T>, terms: &GeneratorTerms, weights: &LossWeights) -> Result<NodeId> {
    let mut parts = vec![
        g.scale(terms.intensity, T::from_f64(weights.intensity)),
        g.scale(terms.gradient, T::from_f64(weights.gradient)),
    ];
    if let Some(adv) = terms.adversarial {
        parts.push(g.scale(adv, T::from_f64(weights.adversarial)));
    }
    parts.push(g.scale(terms.decouple, T::from_f64(weights.decouple)));
    sum_scalars(g, &parts)
}

/// The discriminator objective; `fake` must come from detached predictions.
pub fn discriminator_total_loss<T: Real>(g: &mut Graph<T>, real: NodeId, fake: NodeId) -> Result<NodeId> {
    lsgan_d_loss(g, real, fake)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(g: &mut Graph<f64>, v: f64) -> NodeId {
        g.input(Tensor::full(&[2, 1, 3, 3], v))
    }

    fn frame(g: &mut Graph<f64>, data: &[f64], h: usize, w: usize) -> NodeId {
        g.input(Tensor::from_vec(&[1, 1, h, w], data.to_vec()).unwrap())
    }

    #[test]
    fn lsgan_closed_forms() {
        let mut g = Graph::new();
        let cases: [(f64, f64, f64); 3] = [(1.0, 0.0, 0.0), (0.5, 0.5, 0.25), (0.0, 1.0, 1.0)];
        for (r, f, want) in cases {
            let (rn, fnode) = (grid(&mut g, r), grid(&mut g, f));
            let l = lsgan_d_loss(&mut g, rn, fnode).unwrap();
            assert!((g.scalar(l) - want).abs() < 1e-12);
        }
        for (f, want) in [(1.0, 0.0), (0.5, 0.125), (0.0f64, 0.5f64)] {
            let fnode = grid(&mut g, f);
            let l = lsgan_g_loss(&mut g, fnode).unwrap();
            assert!((g.scalar(l) - want).abs() < 1e-12);
        }
        let a = grid(&mut g, 0.0);
        let b = g.input(Tensor::zeros(&[1, 1, 3, 3]));
        assert!(lsgan_d_loss(&mut g, a, b).is_err());
    }

    #[test]
    fn intensity_examples() {
        let mut g = Graph::new();
        let p = frame(&mut g, &[0.2, 0.4, 0.6, 0.8], 2, 2);
        let q = frame(&mut g, &[0.3, 0.5, 0.7, 0.9], 2, 2);
        let same = intensity_loss(&mut g, &[p], &[p]).unwrap();
        assert_eq!(g.scalar(same), 0.0);
        let off = intensity_loss(&mut g, &[q, q], &[p, p]).unwrap();
        assert!((g.scalar(off) - 0.01).abs() < 1e-12);
    }

    #[test]
    fn gradient_hand_example() {
        let mut g = Graph::new();
        let pred = frame(&mut g, &[0.0, 1.0, 0.0, 1.0], 2, 2);
        let target = frame(&mut g, &[0.0; 4], 2, 2);
        let l = gradient_loss(&mut g, &[pred], &[target]).unwrap();
        assert!((g.scalar(l) - 0.5).abs() < 1e-12);
        let c1 = frame(&mut g, &[0.3; 4], 2, 2);
        let c2 = frame(&mut g, &[0.8; 4], 2, 2);
        let l = gradient_loss(&mut g, &[c1], &[c2]).unwrap();
        assert_eq!(g.scalar(l), 0.0);
        let tiny = frame(&mut g, &[0.1, 0.2], 1, 2);
        assert!(gradient_loss(&mut g, &[tiny], &[tiny]).is_err());
    }

    #[test]
    fn decouple_bounds() {
        let mut g = Graph::<f64>::new();
        let a = g.input(Tensor::from_vec(&[2, 2, 1, 1], vec![1.0, 0.0, 0.5, 0.0]).unwrap());
        let b = g.input(Tensor::from_vec(&[2, 2, 1, 1], vec![0.0, 2.0, 0.0, -1.0]).unwrap());
        let neg = g.scale(a, -3.0);
        let ortho = DecoupleIncrements { temporal: a, spatial: b };
        let same = DecoupleIncrements { temporal: a, spatial: a };
        let flipped = DecoupleIncrements { temporal: a, spatial: neg };
        let (l, guarded) = decouple_loss(&mut g, &[ortho; 6]).unwrap();
        assert!(g.scalar(l).abs() < 1e-12);
        assert_eq!(guarded, 0);
        let (l, _) = decouple_loss(&mut g, &[same, same, flipped]).unwrap();
        assert!((g.scalar(l) - 3.0).abs() < 1e-12);
        let z = g.input(Tensor::zeros(&[2, 2, 1, 1]));
        let (l, guarded) = decouple_loss(&mut g, &[DecoupleIncrements { temporal: z, spatial: a }]).unwrap();
        assert_eq!((g.scalar(l), guarded), (0.0, 2));
    }

    #[test]
    fn total_is_weighted_sum() {
        let mut g = Graph::new();
        let s = |g: &mut Graph<f64>, v| g.input(Tensor::scalar(v));
        let terms = GeneratorTerms {
            intensity: s(&mut g, 0.2),
            gradient: s(&mut g, 0.1),
            adversarial: Some(s(&mut g, 0.4)),
            decouple: s(&mut g, 0.3),
        };
        let t = generator_total_loss(&mut g, &terms, &LossWeights::default()).unwrap();
        assert!((g.scalar(t) - 0.62).abs() < 1e-12);
        let zero = LossWeights {
            intensity: 0.0,
            gradient: 0.0,
            adversarial: 0.0,
            decouple: 0.0,
        };
        let t = generator_total_loss(&mut g, &terms, &zero).unwrap();
        assert_eq!(g.scalar(t), 0.0);
        let doubled = LossWeights {
            intensity: 2.0,
            ..LossWeights::default()
        };
        let t = generator_total_loss(&mut g, &terms, &doubled).unwrap();
        assert!((g.scalar(t) - 0.82).abs() < 1e-12);
        assert!(LossWeights { gradient: -1.0, ..zero }.validate().is_err());
    }
}
