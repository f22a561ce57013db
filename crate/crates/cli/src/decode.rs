//! Video decoding through an external command.
//!
//! The hook is a shell template such as
//! `ffmpeg -loglevel error -i {input} -vf fps=10 {output}/f%05d.png`. Whatever
//! PNGs it leaves in the output directory become the recording's frames, in
//! file-name order.

use std::fs;
use std::path::Path;
use std::process::Command;

use anyhow::{bail, Context, Result};
use vid2trace_core::raster::Raster;
use vid2trace_core::recording::{frame_stem, Manifest, MANIFEST};

fn quote(p: &Path) -> String {
    format!("'{}'", p.display().to_string().replace('\'', r"'\''"))
}

pub fn render_hook(template: &str, input: &Path, output: &Path) -> Result<String> {
    if !template.contains("{input}") || !template.contains("{output}") {
        bail!("decoder hook must contain {{input}} and {{output}}");
    }
    Ok(template.replace("{input}", &quote(input)).replace("{output}", &quote(output)))
}

/// Decode `video` into `dir` and write the frame manifest.
pub fn decode(template: &str, video: &Path, dir: &Path, fps: f64) -> Result<usize> {
    if !video.is_file() {
        bail!("video {} not found", video.display());
    }
    if !(fps > 0.0) {
        bail!("--fps must be positive");
    }
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let cmd = render_hook(template, video, dir)?;
    let status = Command::new("sh").arg("-c").arg(&cmd).status().with_context(|| format!("running {cmd}"))?;
    if !status.success() {
        bail!("decoder hook exited with {status}");
    }
    let mut pngs: Vec<_> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")))
        .collect();
    pngs.sort();
    if pngs.is_empty() {
        bail!("decoder hook produced no PNG frames in {}", dir.display());
    }
    let first = Raster::load_png(&pngs[0])?;
    let staged: Vec<_> = pngs
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let tmp = dir.join(format!(".decoded-{i}.png"));
            fs::rename(p, &tmp).map(|_| tmp)
        })
        .collect::<std::io::Result<_>>()?;
    let mut frames = Vec::with_capacity(staged.len());
    for (i, tmp) in staged.iter().enumerate() {
        let name = format!("{}.png", frame_stem(i));
        fs::rename(tmp, dir.join(&name))?;
        frames.push(name);
    }
    let manifest = Manifest { width: first.width() as u32, height: first.height() as u32, fps, frames };
    fs::write(dir.join(MANIFEST), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(manifest.frames.len())
}
