//! Dataset-level execution.
//!
//! A dataset is a directory tree. Every `.vdt` file is a video, and so is
//! every directory that directly contains `.ppm`/`.pgm` frames; other
//! directories are searched recursively. Each video gets the seed
//! `hash64(master_seed, relative_path)` where the relative path uses `/`
//! separators, and its output is written to the same relative path under
//! the output directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::PrivacyParams;
use crate::error::{DprpError, Result};
use crate::formats;
use crate::mechanism;
use crate::rng;

/// Outcome for one video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoRecord {
    pub path: String,
    pub frames: usize,
    pub width: u32,
    pub height: u32,
    pub channels: u32,
    pub wall_ms: f64,
    /// `"ok"` or the error message.
    pub status: String,
}

impl VideoRecord {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Per-video results of [`run_dataset`], sorted by path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub params: PrivacyParams,
    pub videos: Vec<VideoRecord>,
    pub total_wall_ms: f64,
}

impl BatchReport {
    pub fn failures(&self) -> usize {
        self.videos.iter().filter(|v| !v.is_ok()).count()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("path,frames,width,height,channels,wall_ms,status\n");
        for v in &self.videos {
            out.push_str(&format!(
                "{},{},{},{},{},{:.3},{}\n",
                csv_field(&v.path),
                v.frames,
                v.width,
                v.height,
                v.channels,
                v.wall_ms,
                csv_field(&v.status)
            ));
        }
        out
    }
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Seed of the video at `relative_path` under `master_seed`.
pub fn video_seed(master_seed: u64, relative_path: &str) -> u64 {
    rng::hash64(master_seed, relative_path.as_bytes())
}

fn has_frames(dir: &Path) -> Result<bool> {
    for entry in fs::read_dir(dir)? {
        let p = entry?.path();
        if p.is_file() && p.extension().is_some_and(|e| e == "ppm" || e == "pgm") {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Relative paths of every video under `root`, sorted.
pub fn discover_videos(root: &Path) -> Result<Vec<String>> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<()> {
        let mut entries: Vec<PathBuf> = fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<_>>()?;
        entries.sort();
        for p in entries {
            if p.is_dir() {
                if has_frames(&p)? {
                    out.push(relative(root, &p));
                } else {
                    walk(root, &p, out)?;
                }
            } else if formats::is_vdt_path(&p) {
                out.push(relative(root, &p));
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    if has_frames(root)? {
        out.push(".".to_string());
    } else {
        walk(root, root, &mut out)?;
    }
    out.sort();
    Ok(out)
}

fn relative(root: &Path, p: &Path) -> String {
    let rel = p.strip_prefix(root).expect("walked below root");
    rel.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect::<Vec<_>>().join("/")
}

fn resolve(root: &Path, rel: &str) -> PathBuf {
    if rel == "." {
        root.to_path_buf()
    } else {
        rel.split('/').fold(root.to_path_buf(), |p, c| p.join(c))
    }
}

/// Writes through a sibling temporary path and renames it into place.
fn store_atomically(video: &crate::video::VideoTensor, target: &Path) -> Result<()> {
    let parent = target.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(parent)?;
    let name = target.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = parent.join(format!(".{name}.tmp-{}", std::process::id()));
    if formats::is_vdt_path(target) {
        fs::write(&tmp, formats::encode_vdt(video))
            .and_then(|_| fs::rename(&tmp, target))
            .inspect_err(|_| {
                let _ = fs::remove_file(&tmp);
            })
            .map_err(DprpError::from)
    } else {
        let _ = fs::remove_dir_all(&tmp);
        let result = formats::store_video(video, &tmp).and_then(|_| {
            if target.exists() {
                fs::remove_dir_all(target)?;
            }
            fs::rename(&tmp, target).map_err(DprpError::from)
        });
        if result.is_err() {
            let _ = fs::remove_dir_all(&tmp);
        }
        result
    }
}

fn process(input: &Path, output: &Path, rel: &str, params: &PrivacyParams) -> VideoRecord {
    let start = Instant::now();
    let mut record = VideoRecord {
        path: rel.to_string(),
        frames: 0,
        width: 0,
        height: 0,
        channels: 0,
        wall_ms: 0.0,
        status: String::new(),
    };
    let result = (|| -> Result<()> {
        let video = formats::load_video(&resolve(input, rel))?;
        let s = video.shape();
        (record.frames, record.width, record.height, record.channels) = (video.frames(), s.width, s.height, s.channels);
        let p = params.with_seed(video_seed(params.seed, rel));
        let out = mechanism::run_video_dprp(&video, &p)?;
        let target = if rel == "." { output.join("video") } else { resolve(output, rel) };
        store_atomically(&out, &target)
    })();
    record.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    record.status = match result {
        Ok(()) => "ok".into(),
        Err(e) => e.to_string(),
    };
    record
}

/// Transforms every video under `input_dir` into `output_dir` using
/// `parallelism` worker threads. Per-video failures are recorded in the
/// report and do not stop the batch.
pub fn run_dataset(input_dir: &Path, output_dir: &Path, params: &PrivacyParams, parallelism: usize) -> Result<BatchReport> {
    params.validate()?;
    let videos = discover_videos(input_dir)?;
    if videos.is_empty() {
        return Err(DprpError::EmptyDataset);
    }
    fs::create_dir_all(output_dir)?;
    let start = Instant::now();
    let records = Mutex::new(Vec::with_capacity(videos.len()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| DprpError::Io(std::io::Error::other(e)))?;
    pool.install(|| {
        videos.par_iter().for_each(|rel| {
            let record = process(input_dir, output_dir, rel, params);
            if !record.is_ok() {
                log::warn!("{}: {}", record.path, record.status);
            }
            records.lock().expect("report lock").push(record);
        })
    });
    let mut videos = records.into_inner().expect("report lock");
    videos.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(BatchReport { params: *params, videos, total_wall_ms: start.elapsed().as_secs_f64() * 1e3 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::video::{FrameShape, VideoTensor};

    fn sample_video(seed: u8) -> VideoTensor {
        let shape = FrameShape::new(4, 3, 3).unwrap();
        VideoTensor::from_fn(2, shape, |t, x, y, c| (t * 31 + x * 7 + y * 13 + c * 3) as u8 ^ seed).unwrap()
    }

    fn params() -> PrivacyParams {
        PrivacyParams::new(2.0, 1e-4, 0.8, 8, 42).unwrap()
    }

    #[test]
    fn copies_get_distinct_outputs_and_reruns_are_identical() {
        let input = tempfile::tempdir().unwrap();
        let v = sample_video(0);
        for name in ["a.vdt", "b.vdt", "sub/c.vdt"] {
            let p = input.path().join(name);
            fs::create_dir_all(p.parent().unwrap()).unwrap();
            formats::store_video(&v, &p).unwrap();
        }
        formats::store_video(&v, &input.path().join("frames")).unwrap();
        let out1 = tempfile::tempdir().unwrap();
        let out2 = tempfile::tempdir().unwrap();
        let r1 = run_dataset(input.path(), out1.path(), &params(), 2).unwrap();
        let r2 = run_dataset(input.path(), out2.path(), &params(), 1).unwrap();
        let paths: Vec<_> = r1.videos.iter().map(|v| v.path.as_str()).collect();
        assert_eq!(paths, ["a.vdt", "b.vdt", "frames", "sub/c.vdt"]);
        assert_eq!((r1.failures(), r2.failures()), (0, 0));
        let load = |root: &Path, rel: &str| formats::load_video(&resolve(root, rel)).unwrap();
        let outs: Vec<_> = paths.iter().map(|p| load(out1.path(), p)).collect();
        assert_ne!(outs[0], outs[1]);
        assert_ne!(outs[0], outs[3]);
        for (i, p) in paths.iter().enumerate() {
            assert_eq!(outs[i], load(out2.path(), p));
        }
        let leftovers: Vec<_> = fs::read_dir(out1.path())
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_name().to_string_lossy().starts_with('.'))
            .collect();
        assert!(leftovers.is_empty());
    }

    #[test]
    fn failures_are_recorded_and_batch_continues() {
        let input = tempfile::tempdir().unwrap();
        formats::store_video(&sample_video(1), &input.path().join("good.vdt")).unwrap();
        fs::write(input.path().join("bad.vdt"), b"nope").unwrap();
        let out = tempfile::tempdir().unwrap();
        let report = run_dataset(input.path(), out.path(), &params(), 1).unwrap();
        assert_eq!(report.videos.len(), 2);
        assert_eq!(report.failures(), 1);
        assert!(report.videos[1].is_ok());
        assert!(out.path().join("good.vdt").exists());
        let csv = report.to_csv();
        assert!(csv.starts_with("path,frames,width,height,channels,wall_ms,status\n"));
        assert_eq!(csv.lines().count(), 3);
        let json: serde_json::Value = serde_json::from_str(&report.to_json().unwrap()).unwrap();
        assert_eq!(json["videos"][1]["status"], "ok");
    }

    #[test]
    fn empty_dataset_is_an_error() {
        let input = tempfile::tempdir().unwrap();
        let out = tempfile::tempdir().unwrap();
        assert!(matches!(run_dataset(input.path(), out.path(), &params(), 1), Err(DprpError::EmptyDataset)));
    }
}
