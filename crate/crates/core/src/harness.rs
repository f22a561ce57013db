//! Phase-by-phase evaluation runs over rendered fixtures.
//!
//! Predicted clips are paired with ground-truth interactions through the
//! stable intervals their endpoints fall in, so a segmentation miss shows up
//! as an unaligned clip rather than shifting every later pairing.

use crate::classification::{classify_interaction, ClassifierConfig};
use crate::eval::{eval_segmentation, SegEvalResult};
use crate::fixtures::{replay_screen, GroundTruth};
use crate::geometry::{Point, Rect};
use crate::localization::{localize_tap, HeuristicConfig, LocError, LocMethod, LocModel};
use crate::raster::Raster;
use crate::recording::Recording;
use crate::replay::{fallback_detect, match_interaction, DetectorConfig, MatchConfig, MatchStats, ReplayScreen};
use crate::segmentation::{segment_video, SegConfig, SegError, Segmentation, StableInterval};
use crate::trace::{Clip, InteractionTrace, InteractionType};

/// Ground-truth interaction index for each predicted clip: `Some(j)` when the
/// clip starts in interval `j` and ends in interval `j + 1`.
pub fn align_clips(clips: &[Clip], intervals: &[StableInterval]) -> Vec<Option<usize>> {
    let holding = |f: usize| intervals.iter().position(|iv| iv.contains(f));
    clips
        .iter()
        .map(|c| match (holding(c.start), holding(c.end)) {
            (Some(a), Some(b)) if b == a + 1 => Some(a),
            _ => None,
        })
        .collect()
}

pub fn segmentation_run(rec: &Recording, gt: &GroundTruth, cfg: &SegConfig) -> Result<(Segmentation, SegEvalResult), SegError> {
    let seg = segment_video(&rec.frames.rasters(), cfg)?;
    let score = eval_segmentation(&seg.keyframes, &gt.stable_intervals);
    Ok((seg, score))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClassificationRun {
    pub pred: Vec<InteractionType>,
    pub gt: Vec<InteractionType>,
    /// Predicted clips with no ground-truth counterpart.
    pub unaligned: usize,
    /// Ground-truth interactions no predicted clip covers.
    pub missed: usize,
}

impl ClassificationRun {
    pub fn extend(&mut self, other: ClassificationRun) {
        self.pred.extend(other.pred);
        self.gt.extend(other.gt);
        self.unaligned += other.unaligned;
        self.missed += other.missed;
    }
}

/// Classify every predicted clip of `seg` and pair it with its ground truth.
pub fn classification_run(rec: &Recording, gt: &GroundTruth, seg: &Segmentation, cfg: &ClassifierConfig) -> ClassificationRun {
    let mut run = ClassificationRun::default();
    let mut covered = vec![false; gt.interactions.len()];
    for (clip, j) in seg.clips.iter().zip(align_clips(&seg.clips, &gt.stable_intervals)) {
        let Some(j) = j.filter(|&j| j < gt.interactions.len()) else {
            run.unaligned += 1;
            continue;
        };
        covered[j] = true;
        run.pred.push(classify_interaction(*clip, &rec.tokens, rec.dims(), cfg).interaction.kind);
        run.gt.push(gt.interactions[j].kind);
    }
    run.missed = covered.iter().filter(|c| !**c).count();
    run
}

/// Localize every ground-truth tap over its ground-truth clip.
pub fn localization_run(
    rec: &Recording,
    gt: &GroundTruth,
    model: Option<&LocModel<f32>>,
    cfg: &HeuristicConfig,
) -> Result<(Vec<(Point, Option<LocMethod>)>, Vec<Rect>), LocError> {
    let frames = rec.frames.rasters();
    let mut pred = Vec::new();
    let mut boxes = Vec::new();
    for g in gt.interactions.iter().filter(|g| g.kind == InteractionType::Tap) {
        let Some(bbox) = g.element else { continue };
        let loc = localize_tap(g.clip, &frames, &rec.tokens, rec.dims(), model, cfg)?;
        pred.push((loc.point, Some(loc.method)));
        boxes.push(bbox);
    }
    Ok((pred, boxes))
}

/// Replay an extracted `trace` onto each pre-interaction screen re-rendered
/// at `scale`. Returns one predicted point per ground-truth interaction
/// (`None` on failure) and the boxes a correct replay lands in.
pub fn replay_run(
    trace: &InteractionTrace,
    crops: &[(usize, Raster)],
    gt: &GroundTruth,
    scale: usize,
    matching: &MatchConfig,
    detector: &DetectorConfig,
    stats: &mut MatchStats,
) -> (Vec<Option<Point>>, Vec<Rect>) {
    let clips: Vec<Clip> = trace.interactions.iter().map(|i| i.clip).collect();
    let aligned = align_clips(&clips, &gt.stable_intervals);
    let factor = scale as f64 / gt.scale as f64;
    let mut pred = vec![None; gt.interactions.len()];
    for (i, j) in aligned.iter().enumerate() {
        let Some(j) = j.filter(|&j| j < gt.interactions.len()) else { continue };
        let (raster, tokens) = replay_screen(gt, j, scale);
        let dets = fallback_detect(&raster, &tokens, detector);
        let screen = ReplayScreen::new(&raster, &dets);
        let crop = crops.iter().find(|(k, _)| *k == i).map(|(_, c)| c);
        if let Ok(action) = match_interaction(&trace.interactions[i], trace.screen, crop, &screen, matching, stats) {
            pred[j] = Some(action.point);
        }
    }
    let boxes = gt.interactions.iter().map(|g| g.replay_bbox.scaled(factor, factor)).collect();
    (pred, boxes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clips_align_through_intervals() {
        let iv = [StableInterval::new(0, 5), StableInterval::new(10, 15), StableInterval::new(20, 25)];
        let clips = [Clip::new(2, 12), Clip::new(12, 14), Clip::new(13, 22), Clip::new(3, 22)];
        assert_eq!(align_clips(&clips, &iv), vec![Some(0), None, Some(1), None]);
    }
}
