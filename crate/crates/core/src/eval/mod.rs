//! ROC analysis, Youden's index, confusion counts and the cross-validation
//! experiment driver.

mod cv;
pub mod reference;

pub use cv::{
    plan_folds, run_cv, run_fold, CvMethod, CvSetup, ExperimentReport, FoldOutcome, FoldPlan, FoldReport, KSummary, PooledStats,
    ThresholdMode, DEFAULT_K_LIST,
};

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn sensitivity(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn specificity(&self) -> f64 {
        ratio(self.tn, self.tn + self.fp)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Counts under the inclusive rule: predicted positive iff `score >= threshold`.
pub fn confusion(scores: &[f64], labels: &[Label], threshold: f64) -> Result<Confusion> {
    check_aligned(scores, labels)?;
    let mut c = Confusion::default();
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l.is_positive()) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

fn check_aligned(scores: &[f64], labels: &[Label]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!("{} scores but {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("scores"));
    }
    Ok(())
}

/// One operating point. `threshold` is `+inf` for the all-negative sentinel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    #[serde(with = "threshold_serde")]
    pub threshold: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub fpr: f64,
    pub tp: usize,
    pub fp: usize,
}

impl RocPoint {
    pub fn tpr(&self) -> f64 {
        self.sensitivity
    }

    pub fn youden_j(&self) -> f64 {
        self.sensitivity + self.specificity - 1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// Ordered by decreasing threshold, so `fpr` is non-decreasing.
    pub points: Vec<RocPoint>,
    pub auc: f64,
    pub youden_index_argmax: usize,
    pub positives: usize,
    pub negatives: usize,
}

/// ROC over every distinct score value, plus a `+inf` sentinel where nothing
/// is predicted positive.
///
/// AUC is the trapezoidal area, accumulated exactly in integer counts, which
/// gives half credit to tied positive/negative pairs.
pub fn roc(scores: &[f64], labels: &[Label]) -> Result<RocCurve> {
    check_aligned(scores, labels)?;
    let positives = labels.iter().filter(|l| l.is_positive()).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Invalid(format!(
            "ROC needs both classes, got {positives} positive and {negatives} negative"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let point = |threshold: f64, tp: usize, fp: usize| RocPoint {
        threshold,
        sensitivity: tp as f64 / positives as f64,
        specificity: (negatives - fp) as f64 / negatives as f64,
        fpr: fp as f64 / negatives as f64,
        tp,
        fp,
    };
    let mut points = alloc::vec![point(f64::INFINITY, 0, 0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    // Twice the area in units of one (positive, negative) pair.
    let mut area2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]].is_positive() {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area2 += ((fp - fp0) as u128) * ((tp + tp0) as u128);
        points.push(point(s, tp, fp));
    }
    let auc = area2 as f64 / (2.0 * positives as f64 * negatives as f64);
    let mut curve = RocCurve {
        points,
        auc,
        youden_index_argmax: 0,
        positives,
        negatives,
    };
    curve.youden_index_argmax = youden_argmax(&curve);
    Ok(curve)
}

fn youden_argmax(curve: &RocCurve) -> usize {
    let mut best = 0;
    for (i, p) in curve.points.iter().enumerate().skip(1) {
        let b = &curve.points[best];
        let better = p.youden_j() > b.youden_j()
            || (p.youden_j() == b.youden_j()
                && (p.sensitivity > b.sensitivity
                    || (p.sensitivity == b.sensitivity && p.threshold < b.threshold)));
        if better {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YoudenPoint {
    pub index: usize,
    #[serde(with = "threshold_serde")]
    pub threshold: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub j: f64,
}

/// Point maximizing `sensitivity + specificity - 1`; ties go to the higher
/// sensitivity, then the lower threshold.
pub fn youden(curve: &RocCurve) -> YoudenPoint {
    let index = curve.youden_index_argmax;
    let p = &curve.points[index];
    YoudenPoint {
        index,
        threshold: p.threshold,
        sensitivity: p.sensitivity,
        specificity: p.specificity,
        j: p.youden_j(),
    }
}

/// Youden's J for a sensitivity/specificity pair.
pub fn youden_j(sensitivity: f64, specificity: f64) -> f64 {
    sensitivity + specificity - 1.0
}

/// Trapezoidal area under `(fpr, tpr)` points in curve order.
pub fn trapezoid_auc(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].sensitivity + w[0].sensitivity) / 2.0)
        .sum()
}

/// Thresholds may be `+inf` (the all-negative operating point), which JSON
/// numbers cannot hold; it is written as the string `"inf"`.
pub(crate) mod threshold_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(alloc::string::String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *v == f64::INFINITY {
            Repr::Text("inf".into()).serialize(s)
        } else {
            Repr::Number(*v).serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Number(v) => Ok(v),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(other) => Err(serde::de::Error::custom(alloc::format!("bad threshold `{other}`"))),
        }
    }
}

pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, libm::sqrt(var))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn labels(bits: &[u8]) -> Vec<Label> {
        bits.iter().map(|&b| Label::from_bool(b == 1)).collect()
    }

    #[test]
    fn separated_scores() {
        let c = roc(&[0.9, 0.8, 0.2, 0.1], &labels(&[1, 1, 0, 0])).unwrap();
        assert_eq!(c.auc, 1.0);
        let y = youden(&c);
        assert_eq!((y.sensitivity, y.specificity, y.threshold), (1.0, 1.0, 0.8));
    }

    #[test]
    fn identical_scores_give_half() {
        let c = roc(&[0.3; 6], &labels(&[1, 0, 1, 0, 0, 1])).unwrap();
        assert_eq!(c.auc, 0.5);
        assert_eq!(c.points.len(), 2);
    }

    #[test]
    fn single_class_rejected() {
        assert!(roc(&[0.1, 0.2], &labels(&[1, 1])).is_err());
        assert!(roc(&[0.1], &labels(&[1, 0])).is_err());
    }

    #[test]
    fn trapezoid_agrees_with_integer_area() {
        let s = [0.1, 0.4, 0.35, 0.8, 0.4, 0.7, 0.2];
        let c = roc(&s, &labels(&[0, 0, 1, 1, 1, 0, 1])).unwrap();
        assert!((trapezoid_auc(&c.points) - c.auc).abs() < 1e-12);
        assert!(c.points.windows(2).all(|w| w[0].fpr <= w[1].fpr));
    }

    #[test]
    fn youden_spot_value() {
        // 86/100 sensitivity and 84/100 specificity.
        assert_eq!(youden_j(0.86, 0.84), 0.7);
        assert!((youden_j(0.86, 0.84) - 0.70).abs() < 1e-15);
        let c = RocCurve {
            points: vec![RocPoint {
                threshold: 0.5,
                sensitivity: 0.5,
                specificity: 0.5,
                fpr: 0.5,
                tp: 1,
                fp: 1,
            }],
            auc: 0.5,
            youden_index_argmax: 0,
            positives: 2,
            negatives: 2,
        };
        assert_eq!(youden(&c).j, 0.0);
    }

    #[test]
    fn confusion_boundaries() {
        let l = labels(&[1, 1, 1]);
        assert_eq!(
            confusion(&[0.6, 0.7, 0.9], &l, 0.5).unwrap(),
            Confusion { tp: 3, fp: 0, tn: 0, fn_: 0 }
        );
        let l = labels(&[1, 0, 1, 0]);
        let c = confusion(&[0.0, 0.0, 0.3, 1.0], &l, 0.0).unwrap();
        assert_eq!(c.tp + c.fp, 4);
        assert!(confusion(&[0.1], &l, 0.0).is_err());
    }

    #[test]
    fn sample_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - 1.2909944487358056).abs() < 1e-12);
    }
}
