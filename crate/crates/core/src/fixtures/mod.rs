//! Deterministic synthetic screen recordings with ground truth.
//!
//! OCR on fixtures is exact: each frame's sidecar lists precisely the labels
//! drawn on it. [`noise::inject_noise`] degrades that on demand.

pub mod corpus;
pub mod font;
pub mod noise;
pub mod scenario;
pub mod screen;

use std::fs;
use std::path::Path;

pub use corpus::{builtin_corpus, builtin_corpus_seeded, Profile};
pub use noise::{inject_noise, NoiseConfig};
pub use scenario::{render_scenario, replay_screen, Action, Cue, GroundTruth, GtInteraction, Rendered, Scenario, ScenarioError};

use crate::localization::{tap_sample, LocError, LocModelConfig, Sample};
use crate::recording::{write_recording, RecordingError};
use crate::trace::InteractionType;
use crate::trace::to_canonical_string;

pub const GROUND_TRUTH: &str = "ground_truth.json";
pub const SCENARIO: &str = "scenario.json";

#[derive(Debug, thiserror::Error)]
pub enum FixtureError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Recording(#[from] RecordingError),
    #[error("{path}: {message}")]
    File { path: String, message: String },
}

/// Render `scenario` into `dir` as a loadable recording plus `ground_truth.json`.
pub fn write_fixture(dir: &Path, scenario: &Scenario, scale: usize, noise: Option<NoiseConfig>) -> Result<GroundTruth, FixtureError> {
    let mut rendered = render_scenario(scenario, scale)?;
    if let Some(cfg) = noise {
        rendered.recording.tokens = inject_noise(&rendered.recording.tokens, cfg);
    }
    write_recording(dir, &rendered.recording)?;
    let file_err = |path: &Path, e: String| FixtureError::File { path: path.display().to_string(), message: e };
    let gt_path = dir.join(GROUND_TRUTH);
    let doc = to_canonical_string(&rendered.ground_truth).map_err(|e| file_err(&gt_path, e.to_string()))?;
    fs::write(&gt_path, doc + "\n").map_err(|e| file_err(&gt_path, e.to_string()))?;
    let sc_path = dir.join(SCENARIO);
    let doc = to_canonical_string(scenario).map_err(|e| file_err(&sc_path, e.to_string()))?;
    fs::write(&sc_path, doc + "\n").map_err(|e| file_err(&sc_path, e.to_string()))?;
    Ok(rendered.ground_truth)
}

/// Supervised examples for every ground-truth tap of a rendered recording.
pub fn tap_samples(rendered: &Rendered, cfg: &LocModelConfig) -> Result<Vec<Sample>, LocError> {
    let frames = rendered.recording.frames.rasters();
    let dims = rendered.recording.dims();
    rendered
        .ground_truth
        .interactions
        .iter()
        .filter(|g| g.kind == InteractionType::Tap)
        .filter_map(|g| g.point_px.map(|p| (g, p)))
        .map(|(g, p)| tap_sample(&frames[g.clip.start..=g.clip.end], dims, p, g.element, cfg))
        .collect()
}

pub fn load_ground_truth(dir: &Path) -> Result<GroundTruth, FixtureError> {
    let path = dir.join(GROUND_TRUTH);
    let text = fs::read_to_string(&path).map_err(|e| FixtureError::File { path: path.display().to_string(), message: e.to_string() })?;
    serde_json::from_str(&text).map_err(|e| FixtureError::File { path: path.display().to_string(), message: e.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classification::{match_tokens, swipe_params, ClassifierConfig};
    use crate::trace::{Direction, InteractionType};

    #[test]
    fn tap_scenario_frame_budget() {
        let sc = &corpus::smoke(1)[0];
        let r = render_scenario(sc, 1).unwrap();
        // hold + ripple + fade + hold
        assert_eq!(r.recording.frames.len(), 6 + 3 + 3 + 6);
        assert_eq!(r.ground_truth.stable_intervals.len(), 2);
        assert_eq!(r.ground_truth.trace.interactions[0].kind, InteractionType::Tap);
    }

    #[test]
    fn ripple_radii_strictly_increase() {
        let e = crate::geometry::Rect::new(0.0, 0.0, 40.0, 20.0);
        let radii: Vec<f64> = (1..=scenario::CUE_FRAMES).map(|k| scenario::ripple_radius(&e, k)).collect();
        assert!(radii.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn swipe_up_labels_move_together() {
        let sc = corpus::smoke(1).into_iter().find(|s| s.name == "smoke-swipe-up").unwrap();
        let Action::Swipe { distance, .. } = sc.actions[0] else { panic!() };
        let r = render_scenario(&sc, 1).unwrap();
        let clip = r.ground_truth.trace.interactions[0].clip;
        let m = match_tokens(&r.recording.tokens[clip.start], &r.recording.tokens[clip.end]);
        let moved = m.matches.iter().filter(|t| t.movement == (0.0, -(distance as f64))).count();
        assert!(moved >= 3, "{moved}");
        let sp = swipe_params(&m.matches, &ClassifierConfig::default()).unwrap();
        assert_eq!(sp.direction, Direction::Up);
    }

    #[test]
    fn rendering_is_deterministic_and_traces_valid() {
        for profile in [Profile::Smoke, Profile::Eval] {
            for sc in builtin_corpus(profile) {
                let a = render_scenario(&sc, 1).unwrap();
                a.ground_truth.trace.validate().unwrap();
                for (f, toks) in a.recording.tokens.iter().enumerate() {
                    for t in toks {
                        assert!(a.ground_truth.screen.contains_rect(&t.bbox), "{} frame {f}: {t:?}", sc.name);
                    }
                }
            }
        }
        let sc = &builtin_corpus(Profile::Smoke)[1];
        let (a, b) = (render_scenario(sc, 1).unwrap(), render_scenario(sc, 1).unwrap());
        assert_eq!(a.recording, b.recording);
    }

    #[test]
    fn fixture_directory_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let sc = &corpus::smoke(1)[0];
        let gt = write_fixture(dir.path(), sc, 1, None).unwrap();
        let rec = crate::recording::load_recording(dir.path()).unwrap();
        assert_eq!(rec.frames.len(), 18);
        let back = load_ground_truth(dir.path()).unwrap();
        assert_eq!(back.keyframes, gt.keyframes);
        let rendered = render_scenario(sc, 1).unwrap();
        for (a, b) in rec.tokens.iter().zip(&rendered.recording.tokens) {
            assert_eq!(a.len(), b.len());
        }
    }
}
