//! Confusion matrix, per-class IoU and the last-evaluations score.

use serde::{Deserialize, Serialize};

use crate::data::IGNORE_INDEX;
use crate::error::{Error, Result};

/// Pixel counts, rows = ground truth, columns = prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * self.classes + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Counts every pixel whose ground truth is not `IGNORE_INDEX`.
    pub fn accumulate(&mut self, pred: &[u8], gt: &[u8]) -> Result<()> {
        if pred.len() != gt.len() {
            return Err(Error::Argument(format!(
                "prediction has {} pixels, ground truth {}",
                pred.len(),
                gt.len()
            )));
        }
        let c = self.classes;
        for (&p, &g) in pred.iter().zip(gt) {
            if g == IGNORE_INDEX {
                continue;
            }
            if p as usize >= c || g as usize >= c {
                return Err(Error::Argument(format!("class id out of range: pred {p}, gt {g}")));
            }
            self.counts[g as usize * c + p as usize] += 1;
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.classes != self.classes {
            return Err(Error::Argument("cannot merge matrices of different sizes".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    /// Per-class IoU (`None` when the class never occurs in prediction or
    /// ground truth) and their mean over the defined classes, 0 if none is.
    pub fn miou(&self) -> (Vec<Option<f64>>, f64) {
        let c = self.classes;
        let per_class: Vec<Option<f64>> = (0..c)
            .map(|k| {
                let tp = self.get(k, k);
                let row: u64 = (0..c).map(|j| self.get(k, j)).sum();
                let col: u64 = (0..c).map(|j| self.get(j, k)).sum();
                let union = row + col - tp;
                (union > 0).then(|| tp as f64 / union as f64)
            })
            .collect();
        let defined: Vec<f64> = per_class.iter().flatten().copied().collect();
        let mean = if defined.is_empty() {
            0.0
        } else {
            defined.iter().sum::<f64>() / defined.len() as f64
        };
        (per_class, mean)
    }
}

/// Mean of the last `min(9, len)` mIoU values of an evaluation history.
pub fn final_score(history: &[(usize, f64)]) -> Result<f64> {
    if history.is_empty() {
        return Err(Error::Argument("no evaluations to score".into()));
    }
    let tail = &history[history.len().saturating_sub(LAST_EVALUATIONS)..];
    Ok(tail.iter().map(|(_, v)| v).sum::<f64>() / tail.len() as f64)
}

pub const LAST_EVALUATIONS: usize = 9;

/// One line of the per-evaluation JSON log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub round: usize,
    pub split: String,
    pub per_class_iou: Vec<Option<f64>>,
    pub miou: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_prediction_is_diagonal() {
        let mut cm = ConfusionMatrix::new(3);
        let gt = [0, 1, 2, 2, 1, 0];
        cm.accumulate(&gt, &gt).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(cm.get(i, j), if i == j { 2 } else { 0 });
            }
        }
        assert_eq!(cm.miou().1, 1.0);
    }

    #[test]
    fn ignored_pixels_leave_matrix_unchanged() {
        let mut cm = ConfusionMatrix::new(2);
        cm.accumulate(&[0, 1, 1], &[IGNORE_INDEX; 3]).unwrap();
        assert_eq!(cm, ConfusionMatrix::new(2));
        assert_eq!(cm.miou().1, 0.0);
    }

    #[test]
    fn two_class_example() {
        // [[3, 1], [1, 3]]
        let mut cm = ConfusionMatrix::new(2);
        cm.accumulate(&[0, 0, 0, 1, 0, 1, 1, 1], &[0, 0, 0, 0, 1, 1, 1, 1]).unwrap();
        assert_eq!((cm.get(0, 0), cm.get(0, 1), cm.get(1, 0), cm.get(1, 1)), (3, 1, 1, 3));
        let (iou, mean) = cm.miou();
        assert_eq!(iou, vec![Some(0.6), Some(0.6)]);
        assert!((mean - 0.6).abs() < 1e-15);
    }

    #[test]
    fn absent_class_is_excluded() {
        let mut cm = ConfusionMatrix::new(3);
        cm.accumulate(&[0, 1, 1], &[0, 1, 0]).unwrap();
        let (iou, mean) = cm.miou();
        assert_eq!(iou[2], None);
        assert!((mean - (0.5 + 0.5) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        let mut cm = ConfusionMatrix::new(2);
        assert!(cm.accumulate(&[0], &[0, 1]).is_err());
        assert!(cm.accumulate(&[2], &[0]).is_err());
        assert!(final_score(&[]).is_err());
    }

    #[test]
    fn final_score_examples() {
        assert_eq!(final_score(&[(0, 0.3)]).unwrap(), 0.3);
        let same: Vec<(usize, f64)> = (0..9).map(|i| (i, 0.25)).collect();
        assert_eq!(final_score(&same).unwrap(), 0.25);
        let ramp: Vec<(usize, f64)> = (1..=12).map(|i| (i, i as f64)).collect();
        assert_eq!(final_score(&ramp).unwrap(), 8.0);
    }

    fn masks() -> impl Strategy<Value = (Vec<u8>, Vec<u8>)> {
        (1usize..80).prop_flat_map(|n| {
            (
                proptest::collection::vec(0u8..4, n),
                proptest::collection::vec(prop_oneof![0u8..4, Just(IGNORE_INDEX)], n),
            )
        })
    }

    proptest! {
        #[test]
        fn concatenation_equals_sum((p1, g1) in masks(), (p2, g2) in masks()) {
            let mut whole = ConfusionMatrix::new(4);
            whole.accumulate(&[p1.clone(), p2.clone()].concat(), &[g1.clone(), g2.clone()].concat()).unwrap();
            let mut a = ConfusionMatrix::new(4);
            a.accumulate(&p1, &g1).unwrap();
            let mut b = ConfusionMatrix::new(4);
            b.accumulate(&p2, &g2).unwrap();
            let mut ba = b.clone();
            a.merge(&b).unwrap();
            ba.merge(&{ let mut x = ConfusionMatrix::new(4); x.accumulate(&p1, &g1).unwrap(); x }).unwrap();
            prop_assert_eq!(&whole, &a);
            prop_assert_eq!(&a, &ba);
        }

        #[test]
        fn iou_bounds_and_permutation_invariance((p, g) in masks(), perm in Just([2u8, 0, 3, 1])) {
            let mut cm = ConfusionMatrix::new(4);
            cm.accumulate(&p, &g).unwrap();
            let (iou, mean) = cm.miou();
            prop_assert!((0.0..=1.0).contains(&mean));
            for v in iou.iter().flatten() {
                prop_assert!((0.0..=1.0).contains(v));
            }
            let map = |v: u8| if v == IGNORE_INDEX { v } else { perm[v as usize] };
            let mut permuted = ConfusionMatrix::new(4);
            permuted.accumulate(
                &p.iter().map(|&v| map(v)).collect::<Vec<_>>(),
                &g.iter().map(|&v| map(v)).collect::<Vec<_>>(),
            ).unwrap();
            let (piou, pmean) = permuted.miou();
            for k in 0..4 {
                prop_assert_eq!(iou[k], piou[perm[k] as usize]);
            }
            prop_assert!((mean - pmean).abs() < 1e-12);
        }
    }
}
