//! Episode manifests: one CSV per episode with header
//! `frame,hand_mask,object_mask,label`, paths relative to the manifest.

use std::fs;
use std::path::{Path, PathBuf};

use super::{ClassLabel, Episode};
use crate::error::{Error, Result};
use crate::raster::pgm;

pub const MANIFEST_HEADER: [&str; 4] = ["frame", "hand_mask", "object_mask", "label"];
pub const MANIFEST_FILE: &str = "manifest.csv";

/// Episode id for a manifest: the parent directory name for `manifest.csv`,
/// otherwise the file stem.
pub fn episode_id_for(path: &Path) -> String {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    if path.file_name().is_some_and(|n| n == MANIFEST_FILE) {
        if let Some(dir) = path.parent().and_then(|p| p.file_name()) {
            return dir.to_string_lossy().into_owned();
        }
    }
    stem
}

pub fn read_episode(manifest: &Path) -> Result<Episode> {
    let base = manifest.parent().unwrap_or_else(|| Path::new("."));
    let malformed = |line: usize, msg: String| Error::Malformed {
        path: manifest.to_path_buf(),
        line,
        msg,
    };
    let mut r = csv::Reader::from_path(manifest)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != MANIFEST_HEADER {
        return Err(malformed(1, format!("unexpected header {header:?}")));
    }
    let (mut frames, mut hands, mut objects, mut labels) = (vec![], vec![], vec![], vec![]);
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| malformed(line, e.to_string()))?;
        if rec.len() != 4 {
            return Err(malformed(
                line,
                format!("expected 4 fields, got {}", rec.len()),
            ));
        }
        let load = |j: usize| -> Result<pgm::Gray8> {
            let p = base.join(&rec[j]);
            let bytes =
                fs::read(&p).map_err(|e| malformed(line, format!("{}: {e}", p.display())))?;
            pgm::decode(&bytes).map_err(|e| malformed(line, format!("{}: {e}", p.display())))
        };
        frames.push((&load(0)?).into());
        hands.push((&load(1)?).into());
        objects.push((&load(2)?).into());
        labels.push(
            rec[3]
                .parse::<ClassLabel>()
                .map_err(|e| malformed(line, e.to_string()))?,
        );
    }
    Episode::new(episode_id_for(manifest), frames, hands, objects, labels)
        .map_err(|e| malformed(0, e.to_string()))
}

/// Writes `dir/manifest.csv` plus one PGM per frame and mask.
pub fn write_episode(episode: &Episode, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let manifest = dir.join(MANIFEST_FILE);
    let mut w = csv::Writer::from_path(&manifest)?;
    w.write_record(MANIFEST_HEADER)?;
    for i in 0..episode.len() {
        let frame = format!("frame_{i:04}.pgm");
        let hand = format!("hand_{i:04}.pgm");
        let object = format!("object_{i:04}.pgm");
        pgm::write_raster(dir.join(&frame), &episode.frames[i])?;
        pgm::write_mask(dir.join(&hand), &episode.hand_masks[i])?;
        pgm::write_mask(dir.join(&object), &episode.object_masks[i])?;
        w.write_record([frame, hand, object, episode.labels[i].name().to_string()])?;
    }
    w.flush()?;
    Ok(manifest)
}

/// All `*.csv` manifests under `root` (recursively), sorted by path.
pub fn discover_manifests(root: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    if root.is_file() {
        out.push(root.to_path_buf());
        return Ok(out);
    }
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e == "csv") {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}

pub fn read_corpus(root: &Path) -> Result<Vec<Episode>> {
    discover_manifests(root)?
        .iter()
        .map(|p| read_episode(p))
        .collect()
}
