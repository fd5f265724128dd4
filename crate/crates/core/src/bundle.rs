//! Dataset bundles on disk. A training bundle holds what the robot
//! records (clips, poses, views); an evaluation bundle holds the held-out
//! class labels for the same recording. Loading a training bundle never
//! touches evaluation data.
//!
//! ```text
//! training/                      evaluation/
//!   clips/clip_00000.wav           truth/clips.csv      (clip,class)
//!   poses.csv                      truth/view_00000.pgm (class index, 255 void)
//!   images/view_00000.ppm          meta/manifest
//!   images/index.csv (file,pose_row)
//!   meta/manifest
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::io::{self, cell};
use crate::geometry::BirdsEyeView;
use crate::imagery::{decode_label, encode_class, LabelMask, VOID};
use crate::pipeline::{Dataset, Truth};
use crate::synthgen::{TraversalParams, WorldSpec};
use crate::{Error, Result};

pub const FORMAT: &str = "terrasonic-bundle-1";

pub type Manifest = BTreeMap<String, String>;

/// SHA-256 (hex) over every generation input: world spec, traversal
/// settings, clip count and speed range.
pub fn spec_hash(spec: &WorldSpec, params: &TraversalParams, clips: usize, speed_range: (f64, f64)) -> String {
    let mut p = params.clone();
    p.exec = crate::Exec::Sequential;
    let text = format!("{spec:?}\n{p:?}\nclips={clips}\nspeed={speed_range:?}\n");
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Manifest entries shared by both bundles of one recording.
pub fn manifest(spec: &WorldSpec, params: &TraversalParams, clips: usize, speed_range: (f64, f64), ds: &Dataset) -> Manifest {
    let mut m = Manifest::new();
    let mut put = |k: &str, v: String| {
        m.insert(k.to_string(), v);
    };
    put("format", FORMAT.to_string());
    put("seed", spec.seed.to_string());
    put("spec_hash", spec_hash(spec, params, clips, speed_range));
    put("clips", ds.clips.len().to_string());
    put("views", ds.views.len().to_string());
    put("sample_rate_hz", params.sample_rate_hz.to_string());
    put("clip_seconds", params.clip_seconds.to_string());
    put("meters_per_pixel", ds.meters_per_pixel.to_string());
    put("camera_height_m", ds.camera_height_m.to_string());
    put("image_size_px", params.image_size_px.to_string());
    put("world_width_m", spec.width_m.to_string());
    put("world_height_m", spec.height_m.to_string());
    m
}

fn get<T: std::str::FromStr>(m: &Manifest, key: &str, path: &Path) -> Result<T> {
    m.get(key)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::format(path, format!("manifest lacks a valid {key}")))
}

fn read_manifest(dir: &Path, kind: &str) -> Result<Manifest> {
    let path = dir.join("meta/manifest");
    let m = io::read_kv(&path)?;
    if m.get("format").map(String::as_str) != Some(FORMAT) || m.get("kind").map(String::as_str) != Some(kind) {
        return Err(Error::format(&path, format!("not a {kind} bundle of format {FORMAT}")));
    }
    Ok(m)
}

fn clip_file(k: usize) -> String {
    format!("clip_{k:05}.wav")
}

fn view_file(v: usize, ext: &str) -> String {
    format!("view_{v:05}.{ext}")
}

pub fn write_training_bundle(dir: &Path, ds: &Dataset, manifest: &Manifest) -> Result<()> {
    for (k, clip) in ds.clips.iter().enumerate() {
        io::write_wav(&dir.join("clips").join(clip_file(k)), clip)?;
    }
    io::write_poses(&dir.join("poses.csv"), &ds.poses)?;
    for (v, view) in ds.views.iter().enumerate() {
        io::write_ppm(&dir.join("images").join(view_file(v, "ppm")), &view.image)?;
    }
    io::write_csv(
        &dir.join("images/index.csv"),
        &["file", "pose_row"],
        ds.view_pose.iter().enumerate().map(|(v, p)| [view_file(v, "ppm"), p.to_string()]),
    )?;
    let mut m = manifest.clone();
    m.insert("kind".into(), "training".into());
    io::write_bytes(&dir.join("meta/manifest"), io::format_kv(&m).as_bytes())
}

/// Loads a training bundle and its manifest.
pub fn read_training_bundle(dir: &Path) -> Result<(Dataset, Manifest)> {
    let m = read_manifest(dir, "training")?;
    let mpath = dir.join("meta/manifest");
    let n: usize = get(&m, "clips", &mpath)?;
    let clips = (0..n)
        .map(|k| io::read_wav(&dir.join("clips").join(clip_file(k))))
        .collect::<Result<Vec<_>>>()?;
    let poses = io::read_poses(&dir.join("poses.csv"))?;
    if poses.len() != n {
        return Err(Error::format(dir.join("poses.csv"), format!("{} poses for {n} clips", poses.len())));
    }
    let index_path = dir.join("images/index.csv");
    let index = io::read_csv(&index_path, &["file", "pose_row"])?;
    let mut views = Vec::with_capacity(index.len());
    let mut view_pose = Vec::with_capacity(index.len());
    for row in &index {
        let pose_row: usize = cell(row, 1, &index_path)?;
        let pose = poses
            .get(pose_row)
            .ok_or_else(|| Error::format(&index_path, format!("pose row {pose_row} out of range")))?;
        let image = io::read_ppm(&dir.join("images").join(&row[0]))?;
        views.push(BirdsEyeView {
            image,
            frame_pose: pose.north_up(),
        });
        view_pose.push(pose_row);
    }
    let ds = Dataset {
        clips,
        poses,
        views,
        view_pose,
        meters_per_pixel: get(&m, "meters_per_pixel", &mpath)?,
        camera_height_m: get(&m, "camera_height_m", &mpath)?,
    };
    Ok((ds, m))
}

pub fn write_evaluation_bundle(dir: &Path, truth: &Truth, manifest: &Manifest) -> Result<()> {
    io::write_csv(
        &dir.join("truth/clips.csv"),
        &["clip", "class"],
        truth.clip_classes.iter().enumerate().map(|(k, c)| [k.to_string(), c.to_string()]),
    )?;
    for (v, mask) in truth.dense.iter().enumerate() {
        let raw: Vec<u8> = mask.data.iter().map(|&l| decode_label(l).map_or(VOID, |c| c as u8)).collect();
        io::write_pgm(&dir.join("truth").join(view_file(v, "pgm")), mask.width, mask.height, &raw)?;
    }
    let mut m = manifest.clone();
    m.insert("kind".into(), "evaluation".into());
    m.insert("num_classes".into(), truth.num_classes.to_string());
    io::write_bytes(&dir.join("meta/manifest"), io::format_kv(&m).as_bytes())
}

pub fn read_evaluation_bundle(dir: &Path) -> Result<(Truth, Manifest)> {
    let m = read_manifest(dir, "evaluation")?;
    let mpath = dir.join("meta/manifest");
    let k: usize = get(&m, "num_classes", &mpath)?;
    let views: usize = get(&m, "views", &mpath)?;
    let cpath = dir.join("truth/clips.csv");
    let rows = io::read_csv(&cpath, &["clip", "class"])?;
    let mut clip_classes = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let (clip, class): (usize, usize) = (cell(row, 0, &cpath)?, cell(row, 1, &cpath)?);
        if clip != i || class >= k {
            return Err(Error::format(&cpath, format!("row {i}: clip {clip} class {class}")));
        }
        clip_classes.push(class);
    }
    let mut dense = Vec::with_capacity(views);
    for v in 0..views {
        let path = dir.join("truth").join(view_file(v, "pgm"));
        let (width, height, raw) = io::read_pgm(&path)?;
        let mut data = Vec::with_capacity(raw.len());
        for b in raw {
            data.push(match b {
                VOID => VOID,
                c if (c as usize) < k => encode_class(c as usize),
                c => return Err(Error::format(&path, format!("class {c} out of range"))),
            });
        }
        dense.push(LabelMask { width, height, data });
    }
    Ok((
        Truth {
            num_classes: k,
            clip_classes,
            dense,
        },
        m,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::simulate;
    use crate::synthgen::easy_spec;

    fn small() -> (WorldSpec, TraversalParams, Dataset, Truth) {
        let mut spec = easy_spec(4);
        spec.width_m = 12.0;
        spec.height_m = 12.0;
        let params = TraversalParams { image_size_px: 32, ..TraversalParams::default() };
        let (_, ds, truth) = simulate(&spec, 24, (0.5, 1.0), &params).unwrap();
        (spec, params, ds, truth)
    }

    #[test]
    fn bundles_round_trip() {
        let (spec, params, ds, truth) = small();
        let dir = tempfile::tempdir().unwrap();
        let m = manifest(&spec, &params, 24, (0.5, 1.0), &ds);
        write_training_bundle(&dir.path().join("train"), &ds, &m).unwrap();
        write_evaluation_bundle(&dir.path().join("eval"), &truth, &m).unwrap();
        let (back, bm) = read_training_bundle(&dir.path().join("train")).unwrap();
        assert_eq!(back.clips, ds.clips);
        assert_eq!(back.view_pose, ds.view_pose);
        assert_eq!(back.views.len(), ds.views.len());
        for (a, b) in back.views.iter().zip(&ds.views) {
            assert_eq!(a.image, b.image);
            assert!((a.frame_pose.position - b.frame_pose.position).norm() < 1e-12);
        }
        assert_eq!(bm["spec_hash"], m["spec_hash"]);
        let (t, _) = read_evaluation_bundle(&dir.path().join("eval")).unwrap();
        assert_eq!(t, truth);
    }

    #[test]
    fn training_bundle_has_no_class_ids() {
        let (spec, params, ds, truth) = small();
        let dir = tempfile::tempdir().unwrap();
        let m = manifest(&spec, &params, 24, (0.5, 1.0), &ds);
        write_training_bundle(dir.path(), &ds, &m).unwrap();
        let mut files = Vec::new();
        let mut stack = vec![dir.path().to_path_buf()];
        while let Some(d) = stack.pop() {
            for e in std::fs::read_dir(d).unwrap() {
                let p = e.unwrap().path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    files.push(p);
                }
            }
        }
        assert!(files.iter().all(|p| !p.to_string_lossy().contains("truth")));
        let manifest_text = io::read_text(&dir.path().join("meta/manifest")).unwrap();
        assert!(!manifest_text.contains("class"));
        let poses = io::read_text(&dir.path().join("poses.csv")).unwrap();
        assert!(!poses.contains("class"));
        assert!(read_evaluation_bundle(dir.path()).is_err());
        assert!(truth.clip_classes.len() == ds.clips.len());
    }

    #[test]
    fn hash_tracks_every_spec_field() {
        let (spec, params, _, _) = small();
        let h = spec_hash(&spec, &params, 24, (0.5, 1.0));
        let mut s2 = spec.clone();
        s2.classes[3].texture.grain += 1.0;
        assert_ne!(spec_hash(&s2, &params, 24, (0.5, 1.0)), h);
        let mut s3 = spec.clone();
        s3.seed += 1;
        assert_ne!(spec_hash(&s3, &params, 24, (0.5, 1.0)), h);
        assert_ne!(spec_hash(&spec, &params, 25, (0.5, 1.0)), h);
        let p2 = TraversalParams { exec: crate::Exec::Sequential, ..params.clone() };
        assert_eq!(spec_hash(&spec, &p2, 24, (0.5, 1.0)), h);
    }
}
