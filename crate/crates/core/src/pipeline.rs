//! Refinement-stage plumbing: merge the coarse prediction with the input,
//! subsample it evenly, and evaluate the joint loss.

use crate::emd::{emd_auction, AuctionConfig};
use crate::error::{Error, Result};
use crate::expansion::{expansion_penalty, ElementBatch, ExpansionConfig};
use crate::geometry::{LabeledPointCloud, PointCloud, Source};
use crate::sampling::{mds_sample, MdsConfig};

/// Concatenates `input` (label 0) and `coarse` (label 1), preserving order.
pub fn merge(input: &PointCloud, coarse: &PointCloud) -> LabeledPointCloud {
    let mut points = Vec::with_capacity(input.len() + coarse.len());
    points.extend_from_slice(input.points());
    points.extend_from_slice(coarse.points());
    let mut sources = vec![Source::Input; input.len()];
    sources.resize(points.len(), Source::Coarse);
    let cloud = PointCloud::new(points).expect("both parts are valid clouds");
    LabeledPointCloud::new(cloud, sources).expect("one label per point")
}

/// [`merge`] followed by minimum density sampling of `m` points.
pub fn merge_and_subsample(
    input: &PointCloud,
    coarse: &PointCloud,
    m: usize,
    cfg: &MdsConfig,
) -> Result<LabeledPointCloud> {
    let merged = merge(input, coarse);
    let sample = mds_sample(merged.cloud(), m, cfg)?;
    sample.apply_labeled(&merged)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    /// Weight of the expansion penalty.
    pub alpha: f64,
    /// Weight of the final-output EMD.
    pub beta: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            alpha: 0.1,
            beta: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport {
    pub emd_coarse: f64,
    pub expansion: f64,
    pub emd_final: f64,
    pub total: f64,
}

impl LossReport {
    pub fn compose(emd_coarse: f64, expansion: f64, emd_final: f64, weights: &LossWeights) -> Self {
        LossReport {
            emd_coarse,
            expansion,
            emd_final,
            total: emd_coarse + weights.alpha * expansion + weights.beta * emd_final,
        }
    }
}

/// Everything `joint_loss` needs besides the clouds.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossConfig {
    pub weights: LossWeights,
    pub emd: AuctionConfig,
    pub expansion: ExpansionConfig,
}

/// `EMD(coarse, gt) + alpha * expansion(batch) + beta * EMD(final, gt)`.
///
/// `batch` must be the element decomposition of `coarse`.
pub fn joint_loss(
    coarse: &PointCloud,
    final_cloud: &PointCloud,
    gt: &PointCloud,
    batch: &ElementBatch,
    cfg: &LossConfig,
) -> Result<LossReport> {
    let w = &cfg.weights;
    if !(w.alpha >= 0.0 && w.beta >= 0.0 && w.alpha.is_finite() && w.beta.is_finite()) {
        return Err(Error::invalid("loss weights must be finite and non-negative"));
    }
    for (name, c) in [("coarse", coarse), ("final", final_cloud)] {
        if c.len() != gt.len() {
            return Err(Error::invalid(format!(
                "{name} cloud has {} points but ground truth has {}",
                c.len(),
                gt.len()
            )));
        }
    }
    if batch.points() != coarse.points() {
        return Err(Error::invalid(
            "element batch does not match the coarse cloud",
        ));
    }

    let ((emd_coarse, emd_final), expansion) = rayon::join(
        || {
            rayon::join(
                || emd_auction(coarse, gt, &cfg.emd),
                || emd_auction(final_cloud, gt, &cfg.emd),
            )
        },
        || expansion_penalty(batch, &cfg.expansion),
    );
    Ok(LossReport::compose(
        emd_coarse?.mean_cost,
        expansion?.value,
        emd_final?.mean_cost,
        w,
    ))
}
