//! Training losses with analytic gradients, the weighted combiners and a
//! central-difference gradient checker.
//!
//! Every loss returns its scalar value together with the gradient with
//! respect to the prediction argument.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::geometry::Aabb;
use crate::oversegment::SuperpointPartition;

#[derive(Debug, Clone, PartialEq)]
pub struct LossValueGrad {
    pub value: f64,
    pub grad: Vec<f64>,
}

/// Weights of the per-layer decoder loss (`beta`) and the total loss (`alpha`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    /// Rec, focal, dice and query-selection weights.
    pub alpha: [f64; 4],
    /// Coord, size, GIoU, semantic and position alignment weights.
    pub beta: [f64; 5],
    pub num_decoder_layers: usize,
}

impl LossWeights {
    /// ScanRefer setting with `L` decoder layers.
    pub fn scanrefer(num_decoder_layers: usize) -> Self {
        Self {
            alpha: [1.0 / (num_decoder_layers as f64 + 1.0), 10.0, 2.0, 8.0],
            beta: [5.0, 1.0, 1.0, 0.5, 0.5],
            num_decoder_layers,
        }
    }

    /// Nr3D / Sr3D setting: alignment weights raised to 1.
    pub fn referit3d(num_decoder_layers: usize) -> Self {
        Self {
            beta: [5.0, 1.0, 1.0, 1.0, 1.0],
            ..Self::scanrefer(num_decoder_layers)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_decoder_layers == 0 {
            return Err(invalid("num_decoder_layers", "must be at least 1"));
        }
        if self
            .alpha
            .iter()
            .chain(&self.beta)
            .any(|w| !(w.is_finite() && *w >= 0.0))
        {
            return Err(invalid("loss weights", "must be finite and nonnegative"));
        }
        Ok(())
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        Self::scanrefer(6)
    }
}

/// The five per-layer decoder terms. `sem` and `pos` are slots for alignment
/// losses computed elsewhere and default to zero.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DecoderTerms {
    pub coord: f64,
    pub size: f64,
    pub giou: f64,
    pub sem: f64,
    pub pos: f64,
}

impl DecoderTerms {
    pub fn from_array(t: [f64; 5]) -> Self {
        Self {
            coord: t[0],
            size: t[1],
            giou: t[2],
            sem: t[3],
            pos: t[4],
        }
    }

    pub fn to_array(self) -> [f64; 5] {
        [self.coord, self.size, self.giou, self.sem, self.pos]
    }
}

fn check_shapes(context: &'static str, a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            context,
            expected: a,
            actual: b,
        });
    }
    if a == 0 {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

/// Mean elementwise smooth-L1 with transition point `beta`.
pub fn smooth_l1(pred: &[f64], target: &[f64], beta: f64) -> Result<LossValueGrad> {
    check_shapes("smooth_l1 target", pred.len(), target.len())?;
    if beta.is_nan() || beta <= 0.0 {
        return Err(invalid("beta", "must be positive"));
    }
    let n = pred.len() as f64;
    let mut value = 0.0;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let diff = p - t;
            if diff.abs() < beta {
                value += 0.5 * diff * diff / beta;
                diff / beta / n
            } else {
                value += diff.abs() - 0.5 * beta;
                diff.signum() / n
            }
        })
        .collect();
    Ok(LossValueGrad {
        value: value / n,
        grad,
    })
}

/// Generalized IoU of two axis-aligned boxes, in `[-1, 1]`.
pub fn giou_3d(a: &Aabb, b: &Aabb) -> f64 {
    let inter = a.intersection_volume(b);
    let union = a.volume() + b.volume() - inter;
    let hull = a.hull_volume(b);
    inter / union - (hull - union) / hull
}

/// `1 - GIoU` for `(cx, cy, cz, sx, sy, sz)` boxes, gradient w.r.t. `pred`.
///
/// Where an interval endpoint of the prediction coincides with one of the
/// target, the corresponding min/max contributes a zero subgradient.
pub fn giou_loss_3d(pred: &[f64; 6], gt: &[f64; 6]) -> Result<LossValueGrad> {
    let p = Aabb::from_array(*pred)?;
    let g = Aabb::from_array(*gt)?;

    let mut inter_len = [0.0; 3];
    let mut hull_len = [0.0; 3];
    // d(len)/d(lo), d(len)/d(hi) per axis
    let mut d_inter = [(0.0, 0.0); 3];
    let mut d_hull = [(0.0, 0.0); 3];
    for a in 0..3 {
        let (plo, phi, glo, ghi) = (p.min(a), p.max(a), g.min(a), g.max(a));
        let overlap = phi.min(ghi) - plo.max(glo);
        if overlap > 0.0 {
            inter_len[a] = overlap;
            d_inter[a] = (
                if plo > glo { -1.0 } else { 0.0 },
                if phi < ghi { 1.0 } else { 0.0 },
            );
        }
        hull_len[a] = phi.max(ghi) - plo.min(glo);
        d_hull[a] = (
            if plo < glo { -1.0 } else { 0.0 },
            if phi > ghi { 1.0 } else { 0.0 },
        );
    }
    let inter: f64 = inter_len.iter().product();
    let vp = p.volume();
    let union = vp + g.volume() - inter;
    let hull: f64 = hull_len.iter().product();
    let value = 2.0 - inter / union - union / hull;

    // loss = 2 - I/U - U/H with U = Vp + Vg - I
    let dl_du = inter / (union * union) - 1.0 / hull;
    let dl_di = -1.0 / union - dl_du;
    let dl_dh = union / (hull * hull);

    let others = |v: &[f64; 3], a: usize| -> f64 { (0..3).filter(|&b| b != a).map(|b| v[b]).product() };
    let mut grad = vec![0.0; 6];
    for a in 0..3 {
        let di = dl_di * others(&inter_len, a);
        let dh = dl_dh * others(&hull_len, a);
        let dlo = di * d_inter[a].0 + dh * d_hull[a].0;
        let dhi = di * d_inter[a].1 + dh * d_hull[a].1;
        // lo = c - s/2, hi = c + s/2
        grad[a] = dlo + dhi;
        grad[3 + a] = 0.5 * (dhi - dlo) + dl_du * others(&p.size, a);
    }
    Ok(LossValueGrad { value, grad })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocalParams {
    pub alpha: f64,
    pub gamma: f64,
}

impl Default for FocalParams {
    fn default() -> Self {
        Self {
            alpha: 0.25,
            gamma: 2.0,
        }
    }
}

/// Mean binary focal loss `-α_t (1 - p_t)^γ log p_t` on probabilities.
pub fn focal_loss(probs: &[f64], targets: &[bool], params: FocalParams) -> Result<LossValueGrad> {
    check_shapes("focal_loss targets", probs.len(), targets.len())?;
    if params.gamma.is_nan() || params.gamma < 0.0 || !(0.0..=1.0).contains(&params.alpha) {
        return Err(invalid("focal params", "need gamma >= 0 and alpha in [0, 1]"));
    }
    if let Some(index) = probs.iter().position(|p| !(*p > 0.0 && *p < 1.0)) {
        return Err(Error::ProbabilityOutOfRange {
            index,
            value: probs[index],
        });
    }
    let n = probs.len() as f64;
    let FocalParams { alpha, gamma } = params;
    let mut value = 0.0;
    let grad = probs
        .iter()
        .zip(targets)
        .map(|(&p, &y)| {
            let (pt, at, sign) = if y { (p, alpha, 1.0) } else { (1.0 - p, 1.0 - alpha, -1.0) };
            let q = 1.0 - pt;
            let log_pt = pt.ln();
            value += -at * q.powf(gamma) * log_pt;
            let modulating_grad = if gamma == 0.0 { 0.0 } else { gamma * q.powf(gamma - 1.0) * log_pt };
            let dpt = at * (modulating_grad - q.powf(gamma) / pt);
            sign * dpt / n
        })
        .collect();
    Ok(LossValueGrad {
        value: value / n,
        grad,
    })
}

/// `1 - (2 Σ p·y + smooth) / (Σ p + Σ y + smooth)`. An all-zero input with
/// `smooth = 0` counts as a perfect match.
pub fn dice_loss(probs: &[f64], targets: &[bool], smooth: f64) -> Result<LossValueGrad> {
    check_shapes("dice_loss targets", probs.len(), targets.len())?;
    if smooth.is_nan() || smooth < 0.0 {
        return Err(invalid("smooth", "must be nonnegative"));
    }
    if let Some(index) = probs.iter().position(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::ProbabilityOutOfRange {
            index,
            value: probs[index],
        });
    }
    let y = |t: bool| if t { 1.0 } else { 0.0 };
    let inter: f64 = probs.iter().zip(targets).map(|(p, &t)| p * y(t)).sum();
    let num = 2.0 * inter + smooth;
    let den = probs.iter().sum::<f64>() + targets.iter().map(|&t| y(t)).sum::<f64>() + smooth;
    if den == 0.0 {
        return Ok(LossValueGrad {
            value: 0.0,
            grad: vec![0.0; probs.len()],
        });
    }
    let grad = targets
        .iter()
        .map(|&t| -(2.0 * y(t) * den - num) / (den * den))
        .collect();
    Ok(LossValueGrad {
        value: 1.0 - num / den,
        grad,
    })
}

/// Per-layer decoder loss: `Σ β_i · term_i`.
pub fn combine_decoder_loss(terms: &DecoderTerms, weights: &LossWeights) -> f64 {
    terms
        .to_array()
        .iter()
        .zip(&weights.beta)
        .map(|(t, b)| t * b)
        .sum()
}

/// Mean of the per-layer decoder losses.
pub fn rec_loss(per_layer: &[f64]) -> f64 {
    per_layer.iter().sum::<f64>() / per_layer.len() as f64
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MaskTerms {
    pub focal: f64,
    pub dice: f64,
    /// Query-selection loss slot, zero unless supplied by the caller.
    pub kps: f64,
}

/// `α1·L_rec + α2·focal + α3·dice + α4·kps`.
pub fn total_loss(per_layer_dec: &[f64], mask: &MaskTerms, weights: &LossWeights) -> Result<f64> {
    if per_layer_dec.len() != weights.num_decoder_layers {
        return Err(Error::DimensionMismatch {
            context: "decoder layer losses",
            expected: weights.num_decoder_layers,
            actual: per_layer_dec.len(),
        });
    }
    if per_layer_dec.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("decoder layer losses"));
    }
    let [a1, a2, a3, a4] = weights.alpha;
    Ok(a1 * rec_loss(per_layer_dec) + a2 * mask.focal + a3 * mask.dice + a4 * mask.kps)
}

/// Largest `|fd - analytic| / max(1, |analytic|)` over all coordinates, where
/// `fd` is the central difference with step `epsilon`.
pub fn finite_difference_check<F>(loss: F, point: &[f64], epsilon: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<LossValueGrad>,
{
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(invalid("epsilon", "must be positive"));
    }
    let analytic = loss(point)?.grad;
    if analytic.len() != point.len() {
        return Err(Error::DimensionMismatch {
            context: "gradient length",
            expected: point.len(),
            actual: analytic.len(),
        });
    }
    let mut x = point.to_vec();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + epsilon;
        let up = loss(&x)?.value;
        x[i] = orig - epsilon;
        let down = loss(&x)?.value;
        x[i] = orig;
        let fd = (up - down) / (2.0 * epsilon);
        worst = worst.max((fd - analytic[i]).abs() / analytic[i].abs().max(1.0));
    }
    Ok(worst)
}

/// Resolution at which mask losses are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaskLevel {
    /// One target per superpoint: set when at least half its points are set.
    #[default]
    Superpoint,
    /// One target per point, predictions upsampled through the labels.
    Point,
}

/// Majority vote of point targets inside each superpoint.
pub fn superpoint_targets(point_targets: &[bool], partition: &SuperpointPartition) -> Result<Vec<bool>> {
    if point_targets.len() != partition.num_points() {
        return Err(Error::DimensionMismatch {
            context: "point targets",
            expected: partition.num_points(),
            actual: point_targets.len(),
        });
    }
    let mut hits = vec![0usize; partition.num_segments()];
    for (&t, &l) in point_targets.iter().zip(partition.labels()) {
        hits[l] += usize::from(t);
    }
    Ok(hits
        .iter()
        .zip(partition.segment_sizes())
        .map(|(&h, &s)| 2 * h >= s)
        .collect())
}

/// Focal and dice losses of one mask column against point-level ground truth,
/// at the requested resolution.
pub fn mask_losses(
    superpoint_probs: &[f64],
    point_targets: &[bool],
    partition: &SuperpointPartition,
    level: MaskLevel,
    focal: FocalParams,
    dice_smooth: f64,
) -> Result<(LossValueGrad, LossValueGrad)> {
    check_shapes(
        "superpoint probabilities",
        partition.num_segments(),
        superpoint_probs.len(),
    )?;
    match level {
        MaskLevel::Superpoint => {
            let targets = superpoint_targets(point_targets, partition)?;
            Ok((
                focal_loss(superpoint_probs, &targets, focal)?,
                dice_loss(superpoint_probs, &targets, dice_smooth)?,
            ))
        }
        MaskLevel::Point => {
            check_shapes("point targets", partition.num_points(), point_targets.len())?;
            let probs: Vec<f64> = partition.labels().iter().map(|&l| superpoint_probs[l]).collect();
            let f = focal_loss(&probs, point_targets, focal)?;
            let d = dice_loss(&probs, point_targets, dice_smooth)?;
            // chain rule through the label gather
            let fold = |g: &[f64]| {
                let mut out = vec![0.0; partition.num_segments()];
                for (gi, &l) in g.iter().zip(partition.labels()) {
                    out[l] += gi;
                }
                out
            };
            Ok((
                LossValueGrad {
                    value: f.value,
                    grad: fold(&f.grad),
                },
                LossValueGrad {
                    value: d.value,
                    grad: fold(&d.grad),
                },
            ))
        }
    }
}

/// Worst finite-difference disagreement per loss over a seeded batch of
/// random points, each kept well away from the loss's kinks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradcheckReport {
    pub trials: usize,
    pub epsilon: f64,
    pub smooth_l1: f64,
    pub giou: f64,
    pub focal: f64,
    pub dice: f64,
}

impl GradcheckReport {
    pub fn worst(&self) -> f64 {
        self.smooth_l1.max(self.giou).max(self.focal).max(self.dice)
    }

    pub fn entries(&self) -> [(&'static str, f64); 4] {
        [
            ("smooth_l1", self.smooth_l1),
            ("giou_3d", self.giou),
            ("focal", self.focal),
            ("dice", self.dice),
        ]
    }
}

fn random_box(rng: &mut ChaCha8Rng) -> [f64; 6] {
    std::array::from_fn(|i| {
        if i < 3 {
            rng.random_range(-1.0..1.0)
        } else {
            rng.random_range(0.2..2.0)
        }
    })
}

fn interval_ends_apart(a: &[f64; 6], b: &[f64; 6], gap: f64) -> bool {
    (0..3).all(|ax| {
        let ea = [a[ax] - 0.5 * a[ax + 3], a[ax] + 0.5 * a[ax + 3]];
        let eb = [b[ax] - 0.5 * b[ax + 3], b[ax] + 0.5 * b[ax + 3]];
        ea.iter().all(|x| eb.iter().all(|y| (x - y).abs() > gap))
    })
}

/// Checks every loss gradient at `trials` random points with step `epsilon`.
pub fn gradcheck_suite(trials: usize, epsilon: f64, seed: u64) -> Result<GradcheckReport> {
    if !(epsilon > 0.0 && epsilon < 0.01) {
        return Err(invalid("epsilon", "must lie in (0, 0.01)"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gap = (100.0 * epsilon).max(1e-3);
    let mut report = GradcheckReport {
        trials,
        epsilon,
        smooth_l1: 0.0,
        giou: 0.0,
        focal: 0.0,
        dice: 0.0,
    };
    for _ in 0..trials {
        let n = rng.random_range(1..8);
        let target: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let point: Vec<f64> = target
            .iter()
            .map(|t| loop {
                let d: f64 = rng.random_range(-3.0..3.0);
                if (d.abs() - 1.0).abs() > gap {
                    break t + d;
                }
            })
            .collect();
        let e = finite_difference_check(|p| smooth_l1(p, &target, 1.0), &point, epsilon)?;
        report.smooth_l1 = report.smooth_l1.max(e);

        let (pred, gt) = loop {
            let (p, g) = (random_box(&mut rng), random_box(&mut rng));
            if interval_ends_apart(&p, &g, gap) {
                break (p, g);
            }
        };
        let e = finite_difference_check(
            |x| giou_loss_3d(&[x[0], x[1], x[2], x[3], x[4], x[5]], &gt),
            &pred,
            epsilon,
        )?;
        report.giou = report.giou.max(e);

        let n = rng.random_range(1..10);
        let probs: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..0.9)).collect();
        let targets: Vec<bool> = (0..n).map(|_| rng.random()).collect();
        let e = finite_difference_check(|p| focal_loss(p, &targets, FocalParams::default()), &probs, epsilon)?;
        report.focal = report.focal.max(e);
        let e = finite_difference_check(|p| dice_loss(p, &targets, 1.0), &probs, epsilon)?;
        report.dice = report.dice.max(e);
    }
    Ok(report)
}
