//! Accuracy of a point estimate against ground truth, and information
//! criteria computed from pointwise log-likelihoods.

pub(crate) mod information;

pub use information::{
    dic, pointwise_loglik, waic, CriterionReport, Dic, PointwiseLogLik, UnitSubset, Waic,
};

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, PairSet};
use crate::error::Result;

/// Pairwise classification counts over all cross-file record pairs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

pub fn confusion(predicted: &PairSet, truth: &PairSet, data: &Dataset) -> Result<ConfusionCounts> {
    let sizes = data.file_sizes();
    predicted.check_against(&sizes)?;
    truth.check_against(&sizes)?;
    let tp = predicted.pairs().iter().filter(|&&(a, b)| truth.contains(a, b)).count() as u64;
    let fp = predicted.len() as u64 - tp;
    let fn_ = truth.len() as u64 - tp;
    let tn = data.n_cross_pairs() - tp - fp - fn_;
    Ok(ConfusionCounts { tp, fp, fn_, tn })
}

/// Precision, recall and F1; `None` where the ratio is 0/0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkageMetrics {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

pub fn precision_recall_f1(c: &ConfusionCounts) -> LinkageMetrics {
    let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        (Some(_), Some(_)) => Some(0.0),
        _ => None,
    };
    LinkageMetrics { precision, recall, f1 }
}

/// Fraction of `subset` pairs present in `predicted`; `None` for an empty
/// subset. Used to check that anchors survive into estimates.
pub fn recall_on(predicted: &PairSet, subset: &PairSet) -> Option<f64> {
    if subset.is_empty() {
        return None;
    }
    let hit = subset.pairs().iter().filter(|&&(a, b)| predicted.contains(a, b)).count();
    Some(hit as f64 / subset.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Adjacency, ProfileTable, RecordRef};
    use proptest::prelude::*;

    fn data(sizes: &[usize]) -> Dataset {
        let t = sizes.iter().enumerate().map(|(j, &n)| ProfileTable::empty(j, n)).collect();
        let y = sizes.iter().enumerate().map(|(j, &n)| Adjacency::new(j, n, []).unwrap()).collect();
        Dataset::new(vec![], t, y).unwrap()
    }

    fn pairs(p: &[(usize, usize, usize, usize)]) -> PairSet {
        PairSet::new(p.iter().map(|&(a, i, b, k)| (RecordRef::new(a, i), RecordRef::new(b, k)))).unwrap()
    }

    #[test]
    fn confusion_two_by_two() {
        let d = data(&[2, 2]);
        let t = pairs(&[(0, 0, 1, 0)]);
        let c = confusion(&t, &t, &d).unwrap();
        assert_eq!(c, ConfusionCounts { tp: 1, fp: 0, fn_: 0, tn: 3 });
        let c = confusion(&PairSet::default(), &t, &d).unwrap();
        assert_eq!((c.fn_, c.tp, c.fp), (1, 0, 0));
        let c = confusion(&pairs(&[(0, 1, 1, 1)]), &t, &d).unwrap();
        assert_eq!((c.fp, c.fn_, c.tn), (1, 1, 2));
    }

    #[test]
    fn confusion_rejects_dangling() {
        let d = data(&[2, 2]);
        assert!(confusion(&pairs(&[(0, 5, 1, 0)]), &PairSet::default(), &d).is_err());
    }

    #[test]
    fn metric_examples() {
        let m = precision_recall_f1(&ConfusionCounts { tp: 1, fp: 0, fn_: 0, tn: 0 });
        assert_eq!((m.precision, m.recall, m.f1), (Some(1.0), Some(1.0), Some(1.0)));
        let m = precision_recall_f1(&ConfusionCounts { tp: 1, fp: 1, fn_: 1, tn: 0 });
        assert_eq!((m.precision, m.recall, m.f1), (Some(0.5), Some(0.5), Some(0.5)));
        let m = precision_recall_f1(&ConfusionCounts { tp: 0, fp: 0, fn_: 3, tn: 0 });
        assert_eq!((m.precision, m.recall, m.f1), (None, Some(0.0), None));
    }

    #[test]
    fn anchor_recall() {
        let a = pairs(&[(0, 0, 1, 0), (0, 1, 1, 1)]);
        assert_eq!(recall_on(&a, &a), Some(1.0));
        assert_eq!(recall_on(&pairs(&[(0, 0, 1, 0)]), &a), Some(0.5));
        assert_eq!(recall_on(&a, &PairSet::default()), None);
    }

    proptest! {
        #[test]
        fn f1_is_symmetric_and_sandwiched(tp in 0u64..50, fp in 0u64..50, fn_ in 0u64..50) {
            let m = precision_recall_f1(&ConfusionCounts { tp, fp, fn_, tn: 0 });
            let swapped = precision_recall_f1(&ConfusionCounts { tp, fp: fn_, fn_: fp, tn: 0 });
            prop_assert_eq!(m.f1, swapped.f1);
            if let (Some(p), Some(r), Some(f)) = (m.precision, m.recall, m.f1) {
                prop_assert!(f >= p.min(r) - 1e-12 && f <= p.max(r) + 1e-12);
            }
        }
    }
}
