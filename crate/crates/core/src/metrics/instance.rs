use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::components::{connected_components, Connectivity, LabeledComponents};
use crate::metrics::mask::BinaryMask;

/// IoU threshold used for instance matching unless configured otherwise.
pub const DEFAULT_IOU_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub pred: u32,
    pub gt: u32,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub pairs: Vec<MatchedPair>,
}

impl MatchResult {
    /// `2TP / (2TP + FP + FN)`, 1 when there is nothing to detect or predict.
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            1.0
        } else {
            2.0 * self.tp as f64 / denom as f64
        }
    }
}

/// All component pairs with non-zero overlap and their IoU, sorted by
/// descending IoU. Ties go to the pair whose overlap starts first in raster
/// order, which does not depend on which mask is called the prediction.
pub(crate) fn overlap_pairs(pred: &LabeledComponents, gt: &LabeledComponents) -> Vec<MatchedPair> {
    // (pred, gt) -> (overlap pixels, first overlapping pixel)
    let mut inter: BTreeMap<(u32, u32), (usize, usize)> = BTreeMap::new();
    for (i, (&p, &g)) in pred.labels.iter().zip(&gt.labels).enumerate() {
        if p != 0 && g != 0 {
            inter.entry((p, g)).or_insert((0, i)).0 += 1;
        }
    }
    let mut pairs: Vec<(MatchedPair, usize)> = inter
        .into_iter()
        .map(|((p, g), (n, first))| {
            let union = pred.pixels[p as usize - 1].len() + gt.pixels[g as usize - 1].len() - n;
            let pair = MatchedPair {
                pred: p,
                gt: g,
                iou: n as f64 / union as f64,
            };
            (pair, first)
        })
        .collect();
    pairs.sort_by(|a, b| b.0.iou.total_cmp(&a.0.iou).then(a.1.cmp(&b.1)));
    pairs.into_iter().map(|(p, _)| p).collect()
}

/// Greedy one-to-one matching of components by descending IoU; only pairs
/// whose IoU exceeds `iou_threshold` can match.
pub fn instance_f1(
    pred: &BinaryMask,
    gt: &BinaryMask,
    iou_threshold: f64,
    connectivity: Connectivity,
) -> Result<MatchResult> {
    pred.check_same_size(gt)?;
    if !(iou_threshold > 0.0 && iou_threshold <= 1.0) {
        return Err(Error::InvalidThreshold(iou_threshold));
    }
    let pc = connected_components(pred, connectivity);
    let gc = connected_components(gt, connectivity);
    let mut pred_used = vec![false; pc.count() + 1];
    let mut gt_used = vec![false; gc.count() + 1];
    let mut pairs = Vec::new();
    for pair in overlap_pairs(&pc, &gc) {
        if pair.iou <= iou_threshold {
            break;
        }
        if pred_used[pair.pred as usize] || gt_used[pair.gt as usize] {
            continue;
        }
        pred_used[pair.pred as usize] = true;
        gt_used[pair.gt as usize] = true;
        pairs.push(pair);
    }
    let tp = pairs.len();
    Ok(MatchResult {
        tp,
        fp: pc.count() - tp,
        fn_: gc.count() - tp,
        pairs,
    })
}
