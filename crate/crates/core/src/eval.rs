//! Metrics for each phase against fixture ground truth, plus the Rico
//! gesture-to-label conversion.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::geometry::{Point, Rect};
use crate::localization::LocMethod;
use crate::segmentation::StableInterval;
use crate::trace::{Direction, InteractionType};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("{what}: {pred} predictions vs {gt} ground-truth items")]
    LengthMismatch { what: &'static str, pred: usize, gt: usize },
}

fn same_len(what: &'static str, pred: usize, gt: usize) -> Result<(), EvalError> {
    if pred == gt {
        Ok(())
    } else {
        Err(EvalError::LengthMismatch { what, pred, gt })
    }
}

/// Harmonic mean, 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegEvalResult {
    pub correct: usize,
    pub predicted: usize,
    pub actual: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl SegEvalResult {
    pub fn from_counts(correct: usize, predicted: usize, actual: usize) -> Self {
        let (precision, recall) = (ratio(correct, predicted), ratio(correct, actual));
        Self { correct, predicted, actual, precision, recall, f1: f1_score(precision, recall) }
    }

    /// Counts pooled over several recordings.
    pub fn pooled(parts: &[SegEvalResult]) -> Self {
        let sum = |f: fn(&SegEvalResult) -> usize| parts.iter().map(f).sum();
        Self::from_counts(sum(|r| r.correct), sum(|r| r.predicted), sum(|r| r.actual))
    }
}

/// A keyframe is correct when it is the only prediction inside a ground-truth interval.
pub fn eval_segmentation(pred: &[usize], gt: &[StableInterval]) -> SegEvalResult {
    let correct = gt.iter().filter(|iv| pred.iter().filter(|&&k| iv.contains(k)).count() == 1).count();
    SegEvalResult::from_counts(correct, pred.len(), gt.len())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClsEvalResult {
    /// In [`InteractionType::ALL`] order.
    pub per_class: Vec<(InteractionType, ClassMetrics)>,
    pub macro_avg: ClassMetrics,
    pub weighted_avg: ClassMetrics,
    pub accuracy: f64,
    /// `confusion[gt][pred]`, indices in [`InteractionType::ALL`] order.
    pub confusion: Vec<Vec<usize>>,
}

fn class_index(t: InteractionType) -> usize {
    InteractionType::ALL.iter().position(|&x| x == t).expect("known type")
}

pub fn eval_classification(pred: &[InteractionType], gt: &[InteractionType]) -> Result<ClsEvalResult, EvalError> {
    same_len("classification", pred.len(), gt.len())?;
    let n = InteractionType::ALL.len();
    let mut confusion = vec![vec![0usize; n]; n];
    for (&p, &g) in pred.iter().zip(gt) {
        confusion[class_index(g)][class_index(p)] += 1;
    }
    let per_class: Vec<(InteractionType, ClassMetrics)> = InteractionType::ALL
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let tp = confusion[i][i];
            let predicted: usize = (0..n).map(|g| confusion[g][i]).sum();
            let support: usize = confusion[i].iter().sum();
            let (precision, recall) = (ratio(tp, predicted), ratio(tp, support));
            (t, ClassMetrics { precision, recall, f1: f1_score(precision, recall), support })
        })
        .collect();
    let metrics: Vec<ClassMetrics> = per_class.iter().map(|(_, m)| m.clone()).collect();
    let (macro_avg, weighted_avg) = averages(&metrics);
    let correct = (0..n).map(|i| confusion[i][i]).sum();
    Ok(ClsEvalResult { per_class, macro_avg, weighted_avg, accuracy: ratio(correct, gt.len()), confusion })
}

/// Macro average over classes with support, and the support-weighted average.
pub fn averages(rows: &[ClassMetrics]) -> (ClassMetrics, ClassMetrics) {
    let total: usize = rows.iter().map(|m| m.support).sum();
    let present: Vec<&ClassMetrics> = rows.iter().filter(|m| m.support > 0).collect();
    let mean = |f: fn(&ClassMetrics) -> f64| {
        if present.is_empty() {
            0.0
        } else {
            present.iter().map(|m| f(m)).sum::<f64>() / present.len() as f64
        }
    };
    let weighted = |f: fn(&ClassMetrics) -> f64| rows.iter().map(|m| f(m) * m.support as f64).sum::<f64>() / total.max(1) as f64;
    (
        ClassMetrics { precision: mean(|m| m.precision), recall: mean(|m| m.recall), f1: mean(|m| m.f1), support: total },
        ClassMetrics { precision: weighted(|m| m.precision), recall: weighted(|m| m.recall), f1: weighted(|m| m.f1), support: total },
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocEvalResult {
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
    /// method name → (correct, total)
    pub per_method: BTreeMap<String, (usize, usize)>,
}

/// Correct iff the point lies inside the box, boundary included.
pub fn eval_localization(pred: &[(Point, Option<LocMethod>)], gt: &[Rect]) -> Result<LocEvalResult, EvalError> {
    same_len("localization", pred.len(), gt.len())?;
    let mut per_method: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let mut correct = 0;
    for ((p, method), bbox) in pred.iter().zip(gt) {
        let ok = bbox.contains(*p);
        correct += usize::from(ok);
        let e = per_method.entry(method.map_or("unknown", LocMethod::as_str).to_string()).or_default();
        e.0 += usize::from(ok);
        e.1 += 1;
    }
    Ok(LocEvalResult { correct, total: gt.len(), accuracy: ratio(correct, gt.len()), per_method })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayEvalResult {
    pub successes: usize,
    pub total: usize,
    pub rate: f64,
}

/// `None` predictions are failed matches.
pub fn eval_replay(pred: &[Option<Point>], gt: &[Rect]) -> Result<ReplayEvalResult, EvalError> {
    same_len("replay", pred.len(), gt.len())?;
    let successes = pred.iter().zip(gt).filter(|(p, b)| p.is_some_and(|p| b.contains(p))).count();
    Ok(ReplayEvalResult { successes, total: gt.len(), rate: ratio(successes, gt.len()) })
}

/// Longest gesture path still labeled a tap.
pub const RICO_TAP_PATH_PX: f64 = 10.0;

/// Label a recorded touch path: short paths are taps, longer ones swipes in
/// the dominant direction of travel.
pub fn rico_gesture_to_type(path: &[Point]) -> Option<InteractionType> {
    let (first, last) = (path.first()?, path.last()?);
    let length: f64 = path.windows(2).map(|w| w[0].distance(w[1])).sum();
    if path.len() == 1 || length <= RICO_TAP_PATH_PX {
        return Some(InteractionType::Tap);
    }
    let (dx, dy) = (last.x - first.x, last.y - first.y);
    let dir = if dx.abs() > dy.abs() {
        if dx < 0.0 {
            Direction::Left
        } else {
            Direction::Right
        }
    } else if dy < 0.0 {
        Direction::Up
    } else {
        Direction::Down
    };
    Some(dir.interaction())
}

fn pct(v: f64) -> String {
    format!("{:.1}", v * 100.0)
}

pub fn format_segmentation_table(rows: &[(String, SegEvalResult)]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<16} {:>6} {:>6} {:>6} {:>9} {:>7} {:>6}", "config", "C", "P", "A", "precision", "recall", "F1");
    for (name, r) in rows {
        let _ = writeln!(
            s,
            "{:<16} {:>6} {:>6} {:>6} {:>9} {:>7} {:>6}",
            name,
            r.correct,
            r.predicted,
            r.actual,
            pct(r.precision),
            pct(r.recall),
            pct(r.f1)
        );
    }
    s
}

pub fn format_classification_table(r: &ClsEvalResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<14} {:>9} {:>7} {:>6} {:>8}", "type", "precision", "recall", "F1", "support");
    let mut row = |name: &str, m: &ClassMetrics| {
        let _ = writeln!(s, "{:<14} {:>9} {:>7} {:>6} {:>8}", name, pct(m.precision), pct(m.recall), pct(m.f1), m.support);
    };
    for (t, m) in &r.per_class {
        row(t.as_str(), m);
    }
    row("Macro Avg.", &r.macro_avg);
    row("Weighted Avg.", &r.weighted_avg);
    let _ = writeln!(s, "accuracy {}", pct(r.accuracy));
    s
}

pub fn format_localization_table(rows: &[(String, LocEvalResult)]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<20} {:>8} {:>6} {:>9}", "model", "correct", "total", "accuracy");
    for (name, r) in rows {
        let _ = writeln!(s, "{:<20} {:>8} {:>6} {:>9}", name, r.correct, r.total, pct(r.accuracy));
        for (m, (c, t)) in &r.per_method {
            let _ = writeln!(s, "  {:<18} {:>8} {:>6} {:>9}", m, c, t, pct(ratio(*c, *t)));
        }
    }
    s
}

pub fn format_replay_table(rows: &[(String, ReplayEvalResult)]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<20} {:>9} {:>6} {:>7}", "setting", "successes", "total", "rate");
    for (name, r) in rows {
        let _ = writeln!(s, "{:<20} {:>9} {:>6} {:>7}", name, r.successes, r.total, pct(r.rate));
    }
    s
}
