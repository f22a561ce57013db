//! Subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context};
use serde::{Deserialize, Serialize};
use serde_json::json;
use vid2trace_core::annotate::{annotate_keyframes, plot_series};
use vid2trace_core::classification::classify_interaction;
use vid2trace_core::eval::{
    eval_classification, eval_localization, eval_replay, format_classification_table, format_localization_table,
    format_replay_table, format_segmentation_table, SegEvalResult,
};
use vid2trace_core::fixtures::corpus::DEFAULT_SEED;
use vid2trace_core::fixtures::{
    builtin_corpus_seeded, corpus, inject_noise, load_ground_truth, render_scenario, tap_samples, write_fixture,
    NoiseConfig, Profile, Rendered, GROUND_TRUTH,
};
use vid2trace_core::geometry::Rect;
use vid2trace_core::harness::{classification_run, localization_run, replay_run, segmentation_run, ClassificationRun};
use vid2trace_core::localization::{load_checkpoint, point_accuracy, save_checkpoint, train_with, LocModel};
use vid2trace_core::pipeline::{
    run_pipeline, write_json, write_output, Phase, PipelineConfig, PipelineError, CLASSIFICATION_FILE, HEATMAP_DIR,
    LOCALIZATION_FILE, SEGMENTATION_FILE,
};
use vid2trace_core::raster::Raster;
use vid2trace_core::recording::{frame_stem, load_recording, OcrToken, Recording};
use vid2trace_core::replay::{
    fallback_detect, load_detections, match_interaction, MatchStats, ReplayEntry, ReplayPlan, ReplayScreen,
};
use vid2trace_core::segmentation::segment_video;
use vid2trace_core::trace::InteractionTrace;

use crate::config::{apply_cls, apply_model, apply_seg, base, validated};
use crate::{decode, AtStage, Cli, CliResult, Command, RecordingArgs, Stage, StageError};

pub fn run(cli: &Cli) -> CliResult {
    let cfg = base(&cli.global).at(Stage::Config)?;
    match &cli.command {
        Command::Segment { input, seg, out, plot, keyframes } => {
            let mut cfg = cfg;
            apply_seg(&mut cfg, seg).at(Stage::Config)?;
            let cfg = validated(cfg).at(Stage::Config)?;
            let rec = load_input(input)?;
            let segmentation = segment_video(&rec.frames.rasters(), &cfg.segmentation).at(Stage::Segment)?;
            let dir = out_dir(&out.out, &cfg);
            create(&dir)?;
            write_json(&dir.join(SEGMENTATION_FILE), &segmentation).at(Stage::Output)?;
            if *plot {
                save_png(&plot_series(&segmentation.series, segmentation.threshold, &segmentation.keyframes), &dir.join("series.png"))?;
            }
            if *keyframes {
                let kdir = dir.join("keyframes");
                create(&kdir)?;
                for &k in &segmentation.keyframes {
                    save_png(&rec.frames.frames[k].raster, &kdir.join(format!("{}.png", frame_stem(k))))?;
                }
            }
            println!(
                "{} frames, {} stable intervals, {} keyframes, threshold {:.4}",
                rec.frames.len(),
                segmentation.intervals.len(),
                segmentation.keyframes.len(),
                segmentation.threshold
            );
            Ok(())
        }
        Command::Classify { input, seg, cls, out } => {
            let mut cfg = cfg;
            apply_seg(&mut cfg, seg).at(Stage::Config)?;
            apply_cls(&mut cfg, cls);
            let cfg = validated(cfg).at(Stage::Config)?;
            let rec = load_input(input)?;
            let segmentation = segment_video(&rec.frames.rasters(), &cfg.segmentation).at(Stage::Segment)?;
            let classes: Vec<_> =
                segmentation.clips.iter().map(|&c| classify_interaction(c, &rec.tokens, rec.dims(), &cfg.classifier)).collect();
            let dir = out_dir(&out.out, &cfg);
            create(&dir)?;
            write_json(&dir.join(SEGMENTATION_FILE), &segmentation).at(Stage::Output)?;
            write_json(&dir.join(CLASSIFICATION_FILE), &classes).at(Stage::Output)?;
            for (i, c) in classes.iter().enumerate() {
                println!("{i:>3} frames {:>4}..={:<4} {}", c.interaction.clip.start, c.interaction.clip.end, c.interaction.kind);
            }
            Ok(())
        }
        Command::Localize { input, seg, cls, out, checkpoint } | Command::Extract { input, seg, cls, out, checkpoint } => {
            let full = matches!(cli.command, Command::Extract { .. });
            let mut cfg = cfg;
            apply_seg(&mut cfg, seg).at(Stage::Config)?;
            apply_cls(&mut cfg, cls);
            let cfg = validated(cfg).at(Stage::Config)?;
            let model = model_from(checkpoint.as_ref().or(cfg.checkpoint.as_ref()))?;
            let rec = load_input(input)?;
            let source = source_name(&input.recording);
            let result = run_pipeline(&rec, &source, &cfg, model.as_ref()).map_err(pipeline_err)?;
            let dir = out_dir(&out.out, &cfg);
            if full {
                let path = write_output(&dir, &result).map_err(pipeline_err)?;
                println!("{} interactions -> {}", result.trace.interactions.len(), path.display());
            } else {
                create(&dir.join(HEATMAP_DIR))?;
                write_json(&dir.join(LOCALIZATION_FILE), &result.localizations).at(Stage::Output)?;
                for (i, h) in &result.heatmaps {
                    let path = dir.join(HEATMAP_DIR).join(format!("{i:03}.png"));
                    save_png(&vid2trace_core::pipeline::heatmap_raster(h), &path)?;
                }
                for l in &result.localizations {
                    println!("{:>3} ({:.1}, {:.1}) {:?}", l.index, l.point_px.x, l.point_px.y, l.method);
                }
            }
            Ok(())
        }
        Command::Train { fixtures, count, model, epochs, lr, batch, out } => {
            let mut cfg = cfg;
            apply_model(&mut cfg.model, model).at(Stage::Config)?;
            if let Some(e) = epochs {
                cfg.train.epochs = *e;
            }
            if let Some(l) = lr {
                cfg.train.lr = *l;
            }
            if let Some(b) = batch {
                cfg.train.batch = *b;
            }
            let cfg = validated(cfg).at(Stage::Config)?;
            let seed = cli.global.seed.unwrap_or(DEFAULT_SEED);
            let data = match fixtures {
                Some(dir) => load_fixtures(dir)?,
                None => corpus::train(seed, *count)
                    .iter()
                    .map(|sc| render_scenario(sc, 1).map(|r| (sc.name.clone(), r)))
                    .collect::<Result<_, _>>()
                    .at(Stage::Fixtures)?,
            };
            train_cmd(&cfg, &data, out)
        }
        Command::Match { trace, screen, detections, ocr, out } => {
            let cfg = validated(cfg).at(Stage::Config)?;
            match_cmd(&cfg, trace, screen, detections.as_deref(), ocr.as_deref(), out)
        }
        Command::Eval { phase, fixtures, profile, noise_drop, checkpoint, replay_scale, json } => {
            let cfg = validated(cfg).at(Stage::Config)?;
            let model = model_from(checkpoint.as_ref().or(cfg.checkpoint.as_ref()))?;
            let mut data = match fixtures {
                Some(dir) => load_fixtures(dir)?,
                None => render_profile(profile, cli.global.seed.unwrap_or(DEFAULT_SEED))?,
            };
            if *noise_drop > 0.0 {
                if !(0.0..=1.0).contains(noise_drop) {
                    return Err(anyhow!("--noise-drop must lie in [0, 1]")).at(Stage::Config);
                }
                for (i, (_, r)) in data.iter_mut().enumerate() {
                    let nc = NoiseConfig { drop: *noise_drop, perturb: 0.0, seed: cfg.seed.wrapping_add(i as u64) };
                    r.recording.tokens = inject_noise(&r.recording.tokens, nc);
                }
            }
            eval_cmd(&cfg, phase, &data, model.as_ref(), *replay_scale, json.as_deref())
        }
        Command::GenFixtures { profile, out, scale, noise_drop, noise_perturb } => {
            let p: Profile = profile.parse().map_err(|e: String| anyhow!(e)).at(Stage::Config)?;
            if *scale == 0 {
                return Err(anyhow!("--scale must be >= 1")).at(Stage::Config);
            }
            let seed = cli.global.seed.unwrap_or(DEFAULT_SEED);
            let noisy = *noise_drop > 0.0 || *noise_perturb > 0.0;
            for (i, sc) in builtin_corpus_seeded(p, seed).iter().enumerate() {
                let noise = noisy.then_some(NoiseConfig { drop: *noise_drop, perturb: *noise_perturb, seed: seed.wrapping_add(i as u64) });
                let dir = out.join(&sc.name);
                write_fixture(&dir, sc, *scale, noise).at(Stage::Fixtures)?;
                println!("{}", dir.display());
            }
            Ok(())
        }
        Command::Annotate { recording, trace, out } => {
            let rec = load_recording(recording).at(Stage::Load)?;
            let trace = InteractionTrace::load(trace).at(Stage::Load)?;
            create(out)?;
            for (k, r) in annotate_keyframes(&rec.frames.rasters(), &trace) {
                save_png(&r, &out.join(format!("{}.png", frame_stem(k))))?;
            }
            Ok(())
        }
    }
}

fn pipeline_err(e: PipelineError) -> StageError {
    let stage = match e.phase() {
        Phase::Config => Stage::Config,
        Phase::Load => Stage::Load,
        Phase::Segment => Stage::Segment,
        Phase::Classify => Stage::Classify,
        Phase::Localize => Stage::Localize,
        Phase::Output => Stage::Output,
    };
    StageError { stage, error: e.into() }
}

fn create(dir: &Path) -> CliResult {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).at(Stage::Output)
}

fn save_png(r: &Raster, path: &Path) -> CliResult {
    r.save_png(path).with_context(|| format!("writing {}", path.display())).at(Stage::Output)
}

fn out_dir(flag: &Option<PathBuf>, cfg: &PipelineConfig) -> PathBuf {
    flag.clone().or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("vid2trace-out"))
}

fn source_name(dir: &Path) -> String {
    dir.canonicalize()
        .ok()
        .and_then(|p| p.file_name().map(|s| s.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "recording".into())
}

fn load_input(a: &RecordingArgs) -> CliResult<Recording> {
    if let Some(video) = &a.video {
        let hook = a.decoder_hook.as_deref().ok_or_else(|| anyhow!("--video needs --decoder-hook")).at(Stage::Config)?;
        let n = decode::decode(hook, video, &a.recording, a.fps).at(Stage::Decode)?;
        eprintln!("decoded {n} frames into {}", a.recording.display());
    }
    load_recording(&a.recording).at(Stage::Load)
}

fn model_from(path: Option<&PathBuf>) -> CliResult<Option<LocModel<f32>>> {
    path.map(|p| load_checkpoint(p)).transpose().at(Stage::Load)
}

fn load_fixture(dir: &Path) -> CliResult<(String, Rendered)> {
    let recording = load_recording(dir).at(Stage::Load)?;
    let ground_truth = load_ground_truth(dir).at(Stage::Load)?;
    Ok((ground_truth.name.clone(), Rendered { recording, ground_truth }))
}

/// One fixture directory, or every fixture directly below `dir`.
fn load_fixtures(dir: &Path) -> CliResult<Vec<(String, Rendered)>> {
    if dir.join(GROUND_TRUTH).is_file() {
        return Ok(vec![load_fixture(dir)?]);
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))
        .at(Stage::Load)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(GROUND_TRUTH).is_file())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(anyhow!("no fixtures (directories with {GROUND_TRUTH}) in {}", dir.display())).at(Stage::Load);
    }
    dirs.iter().map(|d| load_fixture(d)).collect()
}

fn render_profile(profile: &str, seed: u64) -> CliResult<Vec<(String, Rendered)>> {
    let p: Profile = profile.parse().map_err(|e: String| anyhow!(e)).at(Stage::Config)?;
    builtin_corpus_seeded(p, seed)
        .iter()
        .map(|sc| render_scenario(sc, 1).map(|r| (sc.name.clone(), r)))
        .collect::<Result<_, _>>()
        .at(Stage::Fixtures)
}

#[derive(Serialize)]
struct TrainHistory {
    model: vid2trace_core::localization::LocModelConfig,
    train: vid2trace_core::localization::TrainConfig,
    samples: usize,
    epoch_losses: Vec<f64>,
    steps: u64,
    train_accuracy: f64,
    seconds: f64,
}

fn train_cmd(cfg: &PipelineConfig, data: &[(String, Rendered)], out: &Path) -> CliResult {
    let mut samples = Vec::new();
    for (_, r) in data {
        samples.extend(tap_samples(r, &cfg.model).at(Stage::Train)?);
    }
    if samples.is_empty() {
        return Err(anyhow!("no tap interactions in the training fixtures")).at(Stage::Train);
    }
    let dims = data[0].1.recording.dims();
    if data.iter().any(|(_, r)| r.recording.dims() != dims) {
        return Err(anyhow!("training fixtures differ in screen size")).at(Stage::Train);
    }
    eprintln!("training {:?} on {} taps", cfg.model.variant, samples.len());
    let start = Instant::now();
    let init = LocModel::init(cfg.model.clone(), cfg.train.seed).at(Stage::Train)?;
    let report = train_with(&samples, init, &cfg.train, |epoch, loss, _| {
        eprintln!("epoch {epoch:>3} loss {loss:.5} ({:.1}s)", start.elapsed().as_secs_f64());
    })
    .at(Stage::Train)?;
    let train_accuracy = point_accuracy(&report.model, &samples, dims).at(Stage::Train)?;
    save_checkpoint(out, &report.model).at(Stage::Output)?;
    let history = TrainHistory {
        model: cfg.model.clone(),
        train: cfg.train.clone(),
        samples: samples.len(),
        epoch_losses: report.epoch_losses,
        steps: report.steps,
        train_accuracy,
        seconds: start.elapsed().as_secs_f64(),
    };
    let hpath = out.with_extension("history.json");
    write_json(&hpath, &history).at(Stage::Output)?;
    println!("train accuracy {:.3} -> {}", train_accuracy, out.display());
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OcrEntry {
    text: String,
    bbox: Rect,
}

fn match_cmd(
    cfg: &PipelineConfig,
    trace_path: &Path,
    screen_path: &Path,
    detections: Option<&Path>,
    ocr: Option<&Path>,
    out: &Path,
) -> CliResult {
    let trace = InteractionTrace::load(trace_path).at(Stage::Load)?;
    let raster = Raster::load_png(screen_path).with_context(|| format!("loading {}", screen_path.display())).at(Stage::Load)?;
    let dets = match detections {
        Some(p) => load_detections(p).at(Stage::Load)?,
        None => {
            let tokens: Vec<OcrToken> = match ocr {
                Some(p) => {
                    let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display())).at(Stage::Load)?;
                    let entries: Vec<OcrEntry> =
                        serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display())).at(Stage::Load)?;
                    entries.into_iter().map(|e| OcrToken::new(e.text, e.bbox, 0)).collect()
                }
                None => Vec::new(),
            };
            fallback_detect(&raster, &tokens, &cfg.detector)
        }
    };
    let base = trace_path.parent().unwrap_or(Path::new("."));
    let screen = ReplayScreen::new(&raster, &dets);
    let mut stats = MatchStats::default();
    let mut entries = Vec::new();
    for (index, it) in trace.interactions.iter().enumerate() {
        let crop = match it.target.as_ref().and_then(|t| t.crop.as_ref()) {
            Some(rel) => Some(Raster::load_png(&base.join(rel)).with_context(|| format!("loading crop {rel}")).at(Stage::Load)?),
            None => None,
        };
        let (action, error) = match match_interaction(it, trace.screen, crop.as_ref(), &screen, &cfg.matching, &mut stats) {
            Ok(a) => (Some(a), None),
            Err(e) => (None, Some(e.to_string())),
        };
        entries.push(ReplayEntry { index, kind: it.kind, action, error });
    }
    let failed = entries.iter().filter(|e| e.error.is_some()).count();
    let plan = ReplayPlan { screen: screen.dims(), entries, stats };
    write_json(out, &plan).at(Stage::Output)?;
    for e in &plan.entries {
        match (&e.action, &e.error) {
            (Some(a), _) => println!("{:>3} {:<12} ({:.1}, {:.1}) {:?}", e.index, e.kind, a.point.x, a.point.y, a.method),
            (None, Some(err)) => println!("{:>3} {:<12} unmatched: {err}", e.index, e.kind),
            _ => {}
        }
    }
    if failed > 0 {
        return Err(anyhow!("{failed} of {} interactions could not be matched (plan written to {})", plan.entries.len(), out.display()))
            .at(Stage::Match);
    }
    Ok(())
}

fn eval_cmd(
    cfg: &PipelineConfig,
    phase: &str,
    data: &[(String, Rendered)],
    model: Option<&LocModel<f32>>,
    replay_scale: usize,
    json_out: Option<&Path>,
) -> CliResult {
    let phases: &[&str] = match phase {
        "all" => &["segmentation", "classification", "localization", "replay"],
        "segmentation" => &["segmentation"],
        "classification" => &["classification"],
        "localization" => &["localization"],
        "replay" => &["replay"],
        other => return Err(anyhow!("unknown phase {other:?}")).at(Stage::Config),
    };
    if replay_scale == 0 {
        return Err(anyhow!("--replay-scale must be >= 1")).at(Stage::Config);
    }
    let mut report = serde_json::Map::new();
    for &p in phases {
        match p {
            "segmentation" => {
                let mut rows = Vec::new();
                for (name, r) in data {
                    let (_, s) = segmentation_run(&r.recording, &r.ground_truth, &cfg.segmentation).at(Stage::Eval)?;
                    rows.push((name.clone(), s));
                }
                let pooled = SegEvalResult::pooled(&rows.iter().map(|(_, s)| s.clone()).collect::<Vec<_>>());
                rows.push(("pooled".into(), pooled.clone()));
                print!("{}", format_segmentation_table(&rows));
                report.insert(p.into(), json!(pooled));
            }
            "classification" => {
                let mut run = ClassificationRun::default();
                for (_, r) in data {
                    let seg = vid2trace_core::segmentation::segment_video(&r.recording.frames.rasters(), &cfg.segmentation)
                        .at(Stage::Eval)?;
                    run.extend(classification_run(&r.recording, &r.ground_truth, &seg, &cfg.classifier));
                }
                let res = eval_classification(&run.pred, &run.gt).at(Stage::Eval)?;
                print!("{}", format_classification_table(&res));
                println!("unaligned clips {}, missed interactions {}", run.unaligned, run.missed);
                report.insert(p.into(), json!({ "result": res, "unaligned": run.unaligned, "missed": run.missed }));
            }
            "localization" => {
                let (mut pred, mut boxes) = (Vec::new(), Vec::new());
                for (name, r) in data {
                    let (p2, b2) = localization_run(&r.recording, &r.ground_truth, model, &cfg.heuristic)
                        .with_context(|| format!("{name} (a model checkpoint is needed where the title heuristic does not apply)"))
                        .at(Stage::Eval)?;
                    pred.extend(p2);
                    boxes.extend(b2);
                }
                if boxes.is_empty() {
                    println!("no taps to localize");
                    continue;
                }
                let res = eval_localization(&pred, &boxes).at(Stage::Eval)?;
                let label = model.map(|m| format!("{:?}", m.config().variant)).unwrap_or_else(|| "heuristic".into());
                print!("{}", format_localization_table(&[(label, res.clone())]));
                report.insert(p.into(), json!(res));
            }
            "replay" => {
                let (mut pred, mut boxes) = (Vec::new(), Vec::new());
                let mut stats = MatchStats::default();
                for (name, r) in data {
                    let out = run_pipeline(&r.recording, name, cfg, model)
                        .map_err(|e| anyhow!("{name}: {e}"))
                        .at(Stage::Eval)?;
                    let (p2, b2) =
                        replay_run(&out.trace, &out.crops, &r.ground_truth, replay_scale, &cfg.matching, &cfg.detector, &mut stats);
                    pred.extend(p2);
                    boxes.extend(b2);
                }
                if boxes.is_empty() {
                    println!("no interactions to replay");
                    continue;
                }
                let res = eval_replay(&pred, &boxes).at(Stage::Eval)?;
                print!("{}", format_replay_table(&[(format!("scale {replay_scale}x"), res.clone())]));
                println!("region template passes {}, full-screen passes {}", stats.region_passes, stats.full_screen_passes);
                report.insert(p.into(), json!({ "result": res, "stats": stats }));
            }
            _ => unreachable!(),
        }
    }
    if let Some(path) = json_out {
        write_json(path, &serde_json::Value::Object(report)).at(Stage::Output)?;
    }
    Ok(())
}
