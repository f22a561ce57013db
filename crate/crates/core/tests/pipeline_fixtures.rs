//! End-to-end runs over rendered fixtures.

use vid2trace_core::eval::{eval_localization, eval_replay, eval_segmentation};
use vid2trace_core::fixtures::{builtin_corpus, render_scenario, Profile};
use vid2trace_core::harness::{align_clips, replay_run};
use vid2trace_core::localization::{argmax, make_target_heatmap, GridMap, LocModelConfig, Variant};
use vid2trace_core::pipeline::{run_pipeline, PipelineConfig};
use vid2trace_core::replay::{DetectorConfig, MatchConfig, MatchStats};
use vid2trace_core::InteractionType;

#[test]
fn smoke_corpus_extracts_every_interaction() {
    let cfg = PipelineConfig::default();
    for sc in builtin_corpus(Profile::Smoke) {
        let r = render_scenario(&sc, 1).unwrap();
        let gt = &r.ground_truth;
        let out = run_pipeline(&r.recording, &sc.name, &cfg, None).unwrap();
        let seg = eval_segmentation(&out.segmentation.keyframes, &gt.stable_intervals);
        assert_eq!(seg.recall, 1.0, "{}", sc.name);
        let aligned = align_clips(&out.segmentation.clips, &gt.stable_intervals);
        assert_eq!(aligned, (0..gt.interactions.len()).map(Some).collect::<Vec<_>>(), "{}", sc.name);
        for (it, g) in out.trace.interactions.iter().zip(&gt.interactions) {
            assert_eq!(it.kind, g.kind, "{}", sc.name);
            assert!(out.segmentation.keyframes.contains(&it.clip.start) && out.segmentation.keyframes.contains(&it.clip.end));
            assert_eq!(it.typed_text, g.typed_text);
            if g.kind == InteractionType::Tap {
                let p = vid2trace_core::trace::denormalize_point(it.point.unwrap(), gt.screen);
                assert!(g.element.unwrap().contains(p), "{}: {p:?}", sc.name);
                assert_eq!(it.target.as_ref().unwrap().text, g.label);
            }
        }
    }
}

#[test]
fn smoke_replays_across_resolutions() {
    let cfg = PipelineConfig::default();
    let mut stats = MatchStats::default();
    for sc in builtin_corpus(Profile::Smoke) {
        let r = render_scenario(&sc, 1).unwrap();
        let out = run_pipeline(&r.recording, &sc.name, &cfg, None).unwrap();
        let (pred, boxes) =
            replay_run(&out.trace, &out.crops, &r.ground_truth, 2, &MatchConfig::default(), &DetectorConfig::default(), &mut stats);
        let res = eval_replay(&pred, &boxes).unwrap();
        assert_eq!(res.rate, 1.0, "{}: {pred:?} vs {boxes:?}", sc.name);
    }
}

#[test]
fn oracle_heatmaps_localize_every_tap() {
    let mc = LocModelConfig::desk(Variant::Hm3d2d);
    for profile in [Profile::Smoke, Profile::Eval, Profile::Train] {
        for sc in builtin_corpus(profile) {
            let r = render_scenario(&sc, 1).unwrap();
            let dims = r.ground_truth.screen;
            let map = GridMap::new(dims, mc.height, mc.width);
            let taps: Vec<_> = r.ground_truth.interactions.iter().filter(|g| g.kind == InteractionType::Tap).collect();
            let mut pred = Vec::new();
            let mut boxes = Vec::new();
            for g in taps {
                let t = make_target_heatmap(g.point_px.unwrap(), g.element, map).unwrap();
                let (row, col) = argmax(&t.grid);
                pred.push((map.to_source(row, col), None));
                boxes.push(g.element.unwrap());
            }
            if !boxes.is_empty() {
                assert_eq!(eval_localization(&pred, &boxes).unwrap().accuracy, 1.0, "{}", sc.name);
            }
        }
    }
}

#[test]
fn extraction_is_deterministic() {
    let cfg = PipelineConfig::default();
    for sc in builtin_corpus(Profile::Smoke) {
        let r = render_scenario(&sc, 1).unwrap();
        let a = run_pipeline(&r.recording, &sc.name, &cfg, None).unwrap().trace.to_canonical_json().unwrap();
        let b = run_pipeline(&r.recording, &sc.name, &cfg, None).unwrap().trace.to_canonical_json().unwrap();
        assert_eq!(a, b);
    }
}
