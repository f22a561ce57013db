//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so every line is printed on success too.
//! Exits non-zero when any criterion fails.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vid2trace_core::classification::{classify_interaction, ClassifierConfig};
use vid2trace_core::eval::{eval_classification, eval_replay, eval_segmentation, f1_score, SegEvalResult};
use vid2trace_core::fixtures::{builtin_corpus, builtin_corpus_seeded, inject_noise, render_scenario, tap_samples, NoiseConfig, Profile};
use vid2trace_core::harness::{align_clips, classification_run, replay_run, ClassificationRun};
use vid2trace_core::localization::{
    localize_tap, point_accuracy, title_match_heuristic, train_with, HeuristicConfig, LocMethod, LocModel, LocModelConfig,
    Sample, TrainConfig, Variant,
};
use vid2trace_core::pipeline::{run_pipeline, PipelineConfig};
use vid2trace_core::replay::{
    fallback_detect, match_interaction, template_match, DetectorConfig, LumaImage, MatchConfig, MatchStats, ReplayMethod,
    ReplayScreen,
};
use vid2trace_core::fixtures::replay_screen;
use vid2trace_core::segmentation::{detect_stable_intervals, segment_video, FeatureKind, Metric, SegConfig};
use vid2trace_core::{Clip, InteractionType, OcrToken, Rect, ScreenDims};
use vid2trace_nn::{focal_loss, focal_loss_logits, grad_check, FocalParams, GradCheckOptions, Tensor};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn corpus(profile: Profile) -> Vec<(String, vid2trace_core::fixtures::Rendered)> {
    builtin_corpus(profile).iter().map(|sc| (sc.name.clone(), render_scenario(sc, 1).unwrap())).collect()
}

fn c1_segmentation() -> Verdict {
    let data = corpus(Profile::Smoke);
    let cfg = SegConfig { feature: FeatureKind::Hog, metric: Metric::Ssim, ..SegConfig::default() };
    let start = Instant::now();
    let parts: Vec<SegEvalResult> = data
        .iter()
        .map(|(_, r)| {
            let seg = segment_video(&r.recording.frames.rasters(), &cfg).unwrap();
            eval_segmentation(&seg.keyframes, &r.ground_truth.stable_intervals)
        })
        .collect();
    let took = start.elapsed();
    let s = SegEvalResult::pooled(&parts);
    verdict(
        s.recall == 1.0 && s.precision >= 0.9 && took < Duration::from_secs(30),
        format!(
            "smoke HOG+SSIM recall {:.3} precision {:.3} in {:.2}s (need recall 1.0, precision >= 0.9, < 30 s)",
            s.recall,
            s.precision,
            took.as_secs_f64()
        ),
    )
}

/// Maximal runs at or above `max - range / divisor`, checked frame pair by frame pair.
fn interval_oracle(s: &[f64], divisor: f64, min_len: usize) -> Vec<(usize, usize)> {
    let hi = s.iter().cloned().fold(f64::MIN, f64::max);
    let lo = s.iter().cloned().fold(f64::MAX, f64::min);
    let theta = hi - (hi - lo) / divisor;
    let mut out = Vec::new();
    for i in 0..s.len() {
        for j in i..s.len() {
            let stable = s[i..=j].iter().all(|&v| v >= theta);
            let maximal = (i == 0 || s[i - 1] < theta) && (j + 1 == s.len() || s[j + 1] < theta);
            if stable && maximal && j + 2 - i >= min_len {
                out.push((i, j + 1));
            }
        }
    }
    out
}

fn c2_interval_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cfg = SegConfig::default();
    let mut mismatches = 0;
    let mut intervals = 0;
    for _ in 0..100 {
        let n = rng.gen_range(2..80);
        let s: Vec<f64> = (0..n)
            .map(|_| match rng.gen_range(0..5) {
                0 => rng.gen_range(0.0..0.9),
                1 => 1.0,
                _ => rng.gen_range(0.9..1.0),
            })
            .collect();
        let got: Vec<(usize, usize)> =
            detect_stable_intervals(&s, &cfg).unwrap().iter().map(|iv| (iv.start_frame, iv.end_frame)).collect();
        let want = interval_oracle(&s, cfg.spike_divisor, cfg.min_stable_frames);
        intervals += want.len();
        if got != want {
            mismatches += 1;
        }
    }
    verdict(mismatches == 0, format!("100 random series, {intervals} oracle intervals, {mismatches} mismatches"))
}

fn accuracy_with_misses(run: &ClassificationRun) -> f64 {
    let correct = run.pred.iter().zip(&run.gt).filter(|(p, g)| p == g).count();
    correct as f64 / (run.gt.len() + run.missed) as f64
}

fn classify_corpus(data: &[(String, vid2trace_core::fixtures::Rendered)], noise: Option<f64>) -> ClassificationRun {
    let mut run = ClassificationRun::default();
    for (i, (_, r)) in data.iter().enumerate() {
        let mut rec = r.recording.clone();
        if let Some(drop) = noise {
            rec.tokens = inject_noise(&rec.tokens, NoiseConfig { drop, perturb: 0.0, seed: 1000 + i as u64 });
        }
        let seg = segment_video(&rec.frames.rasters(), &SegConfig::default()).unwrap();
        run.extend(classification_run(&rec, &r.ground_truth, &seg, &ClassifierConfig::default()));
    }
    run
}

/// Random co-moving and static text layouts over a five-frame clip.
fn comoving_case(rng: &mut ChaCha8Rng) -> Vec<Vec<OcrToken>> {
    let moving = rng.gen_range(0..8);
    let still = rng.gen_range(0..5);
    let vertical = rng.gen_bool(0.5);
    let shift = rng.gen_range(-60.0..60.0);
    let (dx, dy) = if vertical { (rng.gen_range(-3.0..3.0), shift) } else { (shift, rng.gen_range(-3.0..3.0)) };
    let mut first = Vec::new();
    let mut last = Vec::new();
    for i in 0..moving + still {
        let x = rng.gen_range(10.0..80.0);
        let y = rng.gen_range(40.0..180.0);
        let b = Rect::new(x, y, 30.0, 7.0);
        first.push(OcrToken::new(format!("w{i}"), b, 0));
        let b2 = if i < moving { Rect::new((x + dx).clamp(0.0, 98.0), (y + dy).clamp(0.0, 249.0), 30.0, 7.0) } else { b };
        if rng.gen_bool(0.9) {
            last.push(OcrToken::new(format!("w{i}"), b2, 4));
        }
    }
    for j in 0..rng.gen_range(0..3) {
        last.push(OcrToken::new(format!("n{j}"), Rect::new(rng.gen_range(0.0..90.0), rng.gen_range(40.0..180.0), 30.0, 7.0), 4));
    }
    let mut frames = vec![first];
    frames.extend((1..4).map(|_| Vec::new()));
    frames.push(last);
    frames
}

fn c3_classification() -> Verdict {
    let smoke = classify_corpus(&corpus(Profile::Smoke), None);
    let smoke_acc = accuracy_with_misses(&smoke);
    let eval = corpus(Profile::Eval);
    let noisy = classify_corpus(&eval, Some(0.1));
    let noisy_acc = accuracy_with_misses(&noisy);
    let noisy_res = eval_classification(&noisy.pred, &noisy.gt).unwrap();

    let dims = ScreenDims::new(128, 256);
    let n3 = ClassifierConfig { min_comoving_texts: 3, ..ClassifierConfig::default() };
    let n5 = ClassifierConfig { min_comoving_texts: 5, ..ClassifierConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut flips, mut swipes3, mut swipes5) = (0, 0, 0);
    for _ in 0..200 {
        let tokens = comoving_case(&mut rng);
        let a = classify_interaction(Clip::new(0, 4), &tokens, dims, &n3).interaction.kind;
        let b = classify_interaction(Clip::new(0, 4), &tokens, dims, &n5).interaction.kind;
        swipes3 += a.is_swipe() as usize;
        swipes5 += b.is_swipe() as usize;
        if a == InteractionType::Tap && b.is_swipe() {
            flips += 1;
        }
    }
    verdict(
        smoke_acc == 1.0 && noisy_acc >= 0.85 && flips == 0,
        format!(
            "smoke accuracy {:.3} (need 1.0); eval drop=0.1 accuracy {:.3} over {} interactions, {} missed (need >= 0.85, macro F1 {:.3}); N 3->5 Tap->Swipe flips {flips}/200 (need 0; swipes {swipes3} -> {swipes5})",
            smoke_acc,
            noisy_acc,
            noisy.gt.len() + noisy.missed,
            noisy.missed,
            noisy_res.macro_avg.f1
        ),
    )
}

fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap()
}

/// Independent summation of the penalty-reduced focal loss.
fn focal_direct(p: &[f64], y: &[f64], alpha: f64, beta: f64) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (&pi, &yi) in p.iter().zip(y) {
        if yi == 1.0 {
            n += 1;
            sum += (1.0 - pi).powf(alpha) * pi.ln();
        } else {
            sum += (1.0 - yi).powf(beta) * pi.powf(alpha) * (1.0 - pi).ln();
        }
    }
    -sum / n.max(1) as f64
}

fn c4_gradients() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for t in 0..50 {
        let variant = Variant::ALL[t % 4];
        let k = if t % 5 == 4 { 16 } else { 8 };
        let cfg = LocModelConfig { variant, k, height: 16, width: 8, ..LocModelConfig::default() };
        let model: LocModel<f64> = LocModel::<f32>::init(cfg, t as u64).unwrap().cast();
        let frames = random(&[3, k, 16, 8], &mut rng);
        let endpoints = random(&[6, 16, 8], &mut rng);
        let (pr, pc) = (rng.gen_range(0..16), rng.gen_range(0..8));
        let mut target = Tensor::<f64>::zeros(&[1, 16, 8]);
        for r in 0..16 {
            for c in 0..8 {
                let d2 = ((r as f64 - pr as f64).powi(2) + (c as f64 - pc as f64).powi(2)) / 8.0;
                target.data_mut()[r * 8 + c] = (-d2).exp();
            }
        }
        let (_, grads) = model.loss_and_grads(&frames, &endpoints, &target).unwrap();
        let n = model.params().len();
        let Some(i) = (0..n).map(|o| (t * 7 + o) % n).find(|&i| grads[i].data().iter().any(|g| *g != 0.0)) else {
            return verdict(false, format!("trial {t}: every gradient is zero"));
        };
        let f = |x: &Tensor<f64>| {
            let mut m = model.clone();
            m.params_mut()[i] = x.clone();
            let (loss, g) = m.loss_and_grads(&frames, &endpoints, &target).map_err(|e| vid2trace_nn::NnError::NonFinite(e.to_string()))?;
            Ok((loss, g[i].clone()))
        };
        let report = grad_check(f, &model.params()[i], GradCheckOptions { step: 1e-5, max_coords: 12, seed: t as u64 }).unwrap();
        worst = worst.max(report.max_rel_error);
    }

    let mut p = Vec::new();
    let mut y = Vec::new();
    for r in 0..8 {
        for c in 0..8 {
            p.push(rng.gen_range(0.01..0.99));
            let d2 = ((r as f64 - 3.0).powi(2) + (c as f64 - 5.0).powi(2)) / 2.0;
            y.push((-d2).exp());
        }
    }
    let want = focal_direct(&p, &y, 2.0, 4.0);
    let pt = Tensor::from_vec(&[1, 8, 8], p.clone()).unwrap();
    let yt = Tensor::from_vec(&[1, 8, 8], y).unwrap();
    let got = focal_loss(&pt, &yt, FocalParams::default()).unwrap().value;
    let zt = pt.map(|v| (v / (1.0 - v)).ln());
    let got_logits = focal_loss_logits(&zt, &yt, FocalParams::default()).unwrap().value;
    let focal_err = (got - want).abs().max((got_logits - want).abs());
    verdict(
        worst < 1e-3 && focal_err < 1e-6,
        format!("50 finite-difference trials, worst relative error {worst:.2e} (need < 1e-3); focal 8x8 vs direct sum {focal_err:.2e} (need < 1e-6)"),
    )
}

fn samples_of(scenarios: &[vid2trace_core::fixtures::Scenario], cfg: &LocModelConfig) -> Vec<Sample> {
    scenarios.iter().flat_map(|sc| tap_samples(&render_scenario(sc, 1).unwrap(), cfg).unwrap()).collect()
}

struct TrainOutcome {
    train_acc: f64,
    held_acc: f64,
    first_hit: Option<usize>,
    seconds: f64,
}

fn train_variant(variant: Variant, train_sc: &[vid2trace_core::fixtures::Scenario], held_sc: &[vid2trace_core::fixtures::Scenario]) -> TrainOutcome {
    let mc = LocModelConfig::desk(variant);
    let tr = samples_of(train_sc, &mc);
    let held = samples_of(held_sc, &mc);
    let dims = ScreenDims::new(128, 256);
    let cfg = TrainConfig { epochs: 25, lr: 1e-3, batch: 1, seed: 0 };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    pool.install(|| {
        let mut first_hit = None;
        let mut eval_time = Duration::ZERO;
        let start = Instant::now();
        let report = train_with(&tr, LocModel::init(mc.clone(), cfg.seed).unwrap(), &cfg, |epoch, _, m| {
            let t = Instant::now();
            if first_hit.is_none() && point_accuracy(m, &tr, dims).unwrap() >= 0.9 {
                first_hit = Some(epoch + 1);
            }
            eval_time += t.elapsed();
        })
        .unwrap();
        let seconds = (start.elapsed() - eval_time).as_secs_f64();
        TrainOutcome {
            train_acc: point_accuracy(&report.model, &tr, dims).unwrap(),
            held_acc: point_accuracy(&report.model, &held, dims).unwrap(),
            first_hit,
            seconds,
        }
    })
}

fn c5_localization() -> Verdict {
    let train_sc = builtin_corpus(Profile::Train);
    let held_sc: Vec<_> = builtin_corpus_seeded(Profile::Train, 99).into_iter().take(20).collect();
    let full = train_variant(Variant::Hm3d2d, &train_sc, &held_sc);
    let hm3d = train_variant(Variant::Hm3d, &train_sc, &held_sc);
    let hm2d = train_variant(Variant::Hm2d, &train_sc, &held_sc);
    let reached = full.first_hit.is_some() && full.train_acc >= 0.9;
    let ordered = full.held_acc >= hm3d.held_acc && hm3d.held_acc >= hm2d.held_acc;
    verdict(
        reached && full.seconds < 900.0 && ordered,
        format!(
            "HM3D+2D 128x64 K=8, 50 taps: train acc {:.2} (first >= 0.9 at epoch {}), {:.0}s single-threaded (need >= 0.9 within 25 epochs, < 900 s); held-out 20: HM3D+2D {:.2} >= HM3D {:.2} >= HM2D {:.2} (train {:.2} / {:.2})",
            full.train_acc,
            full.first_hit.map(|e| e.to_string()).unwrap_or_else(|| "never".into()),
            full.seconds,
            full.held_acc,
            hm3d.held_acc,
            hm2d.held_acc,
            hm3d.train_acc,
            hm2d.train_acc
        ),
    )
}

fn c6_title_heuristic() -> Verdict {
    let cfg = HeuristicConfig::default();
    let (mut expected, mut fired, mut landed, mut scenarios) = (0, 0, 0, 0);
    let (mut band_cases, mut band_fired) = (0, 0);
    for (_, r) in corpus(Profile::Eval) {
        let gt = &r.ground_truth;
        let frames = r.recording.frames.rasters();
        let mut any = false;
        for g in gt.interactions.iter().filter(|g| g.kind == InteractionType::Tap) {
            let hit = title_match_heuristic(&r.recording.tokens[g.clip.start], &r.recording.tokens[g.clip.end], gt.screen, &cfg);
            if g.title_match {
                any = true;
                expected += 1;
                if let Some(m) = hit {
                    fired += 1;
                    let loc = localize_tap(g.clip, &frames, &r.recording.tokens, gt.screen, None, &cfg).unwrap();
                    if loc.method == LocMethod::Heuristic && g.element.unwrap().contains(m.point) {
                        landed += 1;
                    }
                }
            } else if g.tab {
                band_cases += 1;
                band_fired += hit.is_some() as usize;
            }
        }
        scenarios += any as usize;
    }
    verdict(
        scenarios >= 3 && fired == expected && landed == expected && band_cases > 0 && band_fired == 0,
        format!(
            "fired on {fired}/{expected} title-change taps in {scenarios} eval scenarios, {landed} inside the element (need all, >= 3 scenarios); fired on {band_fired}/{band_cases} tab-label-only taps (need 0)"
        ),
    )
}

fn c7_replay() -> Verdict {
    let cfg = PipelineConfig::default();
    let mut stats = MatchStats::default();
    let (mut pred, mut boxes) = (Vec::new(), Vec::new());
    let mut tap_out = None;
    for (name, r) in corpus(Profile::Smoke) {
        let out = run_pipeline(&r.recording, &name, &cfg, None).unwrap();
        let (p, b) = replay_run(&out.trace, &out.crops, &r.ground_truth, 2, &cfg.matching, &cfg.detector, &mut stats);
        pred.extend(p);
        boxes.extend(b);
        if name == "smoke-tap" {
            tap_out = Some((out, r));
        }
    }
    let rate = eval_replay(&pred, &boxes).unwrap().rate;

    let (out, r) = tap_out.unwrap();
    let crop = &out.crops[0].1;
    let self_ncc = template_match(crop, &LumaImage::new(crop), &[1.0], None).map(|h| h.score).unwrap_or(f64::NAN);

    // The recorded tap target stripped of its text forces the template path.
    let mut it = out.trace.interactions[0].clone();
    it.target.as_mut().unwrap().text = None;
    let gt = &r.ground_truth;
    let j = align_clips(&[it.clip], &gt.stable_intervals)[0].unwrap();
    let (raster, tokens) = replay_screen(gt, j, 2);
    let dets = fallback_detect(&raster, &tokens, &DetectorConfig::default());
    let replay_box = gt.interactions[j].replay_bbox.scaled(2.0, 2.0);
    let mut with_dets = MatchStats::default();
    let a = match_interaction(&it, out.trace.screen, Some(crop), &ReplayScreen::new(&raster, &dets), &MatchConfig::default(), &mut with_dets);
    let mut no_dets = MatchStats::default();
    let b = match_interaction(&it, out.trace.screen, Some(crop), &ReplayScreen::new(&raster, &[]), &MatchConfig::default(), &mut no_dets);
    let region_first = matches!(&a, Ok(x) if x.method == ReplayMethod::TemplateMatch && replay_box.contains(x.point))
        && with_dets.region_passes > 0
        && with_dets.full_screen_passes == 0;
    let full_fallback = matches!(&b, Ok(x) if x.method == ReplayMethod::FullScreenTemplate && replay_box.contains(x.point))
        && no_dets.full_screen_passes == 1;
    verdict(
        rate == 1.0 && (self_ncc - 1.0).abs() <= 1e-6 && region_first && full_fallback,
        format!(
            "smoke 1x -> 2x replay rate {rate:.3} (need 1.0); NCC self-match {self_ncc:.9} (need 1 +- 1e-6); detection-first counters region {} / full-screen {} with detections, full-screen {} without (need >0/0, 1)",
            with_dets.region_passes, with_dets.full_screen_passes, no_dets.full_screen_passes
        ),
    )
}

fn c8_f1() -> Verdict {
    let f = f1_score(0.792, 0.847) * 100.0;
    verdict((f - 81.9).abs() <= 0.1, format!("F1(79.2, 84.7) = {f:.3} (need 81.9 +- 0.1)"))
}

fn c9_determinism() -> Verdict {
    let bin = env!("CARGO_BIN_EXE_vid2trace");
    let tmp = tempfile::tempdir().unwrap();
    let fx = tmp.path().join("fx");
    let st = Command::new(bin).args(["gen-fixtures", "--profile", "smoke", "--out"]).arg(&fx).output().unwrap();
    if !st.status.success() {
        return verdict(false, format!("gen-fixtures failed: {}", String::from_utf8_lossy(&st.stderr)));
    }
    let mut names: Vec<_> = fs::read_dir(&fx).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    let mut differing = Vec::new();
    let extract = |rec: &Path, out: &Path| Command::new(bin).arg("extract").arg(rec).arg("--out").arg(out).output().unwrap();
    for name in &names {
        let rec = fx.join(name);
        let (a, b) = (tmp.path().join("a").join(name), tmp.path().join("b").join(name));
        let (ra, rb) = (extract(&rec, &a), extract(&rec, &b));
        if !ra.status.success() || !rb.status.success() {
            return verdict(false, format!("extract failed on {name:?}: {}", String::from_utf8_lossy(&ra.stderr)));
        }
        if fs::read(a.join("trace.json")).unwrap() != fs::read(b.join("trace.json")).unwrap() {
            differing.push(name.to_string_lossy().into_owned());
        }
    }
    verdict(differing.is_empty(), format!("{} recordings extracted twice, differing traces: {differing:?}", names.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 9] = [
        ("segmentation", c1_segmentation),
        ("stable-interval oracle", c2_interval_oracle),
        ("classification", c3_classification),
        ("gradients and focal loss", c4_gradients),
        ("tap localization", c5_localization),
        ("title heuristic", c6_title_heuristic),
        ("replay", c7_replay),
        ("F1 arithmetic", c8_f1),
        ("determinism", c9_determinism),
    ];
    let wanted: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = format!("{}", i + 1);
        if !wanted.is_empty() && !wanted.iter().any(|w| *w == id || name.contains(w.as_str())) {
            continue;
        }
        let start = Instant::now();
        let v = check();
        failed += !v.pass as usize;
        println!(
            "criterion {id} {} {name}: {} [{:.1}s]",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
