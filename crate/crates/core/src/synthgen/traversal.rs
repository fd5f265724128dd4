use std::f64::consts::TAU;

use nalgebra::Point2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{render_birdseye, AudioSignature, World};
use crate::audio::{AudioClip, DEFAULT_CLIP_SECONDS, DEFAULT_SAMPLE_RATE};
use crate::exec::Exec;
use crate::geometry::{BirdsEyeView, Pose};
use crate::{seed, Error, Result};

/// Audio and imaging settings for a traversal.
#[derive(Debug, Clone, PartialEq)]
pub struct TraversalParams {
    pub sample_rate_hz: u32,
    pub clip_seconds: f64,
    /// Drive-train tones shared by every terrain: (Hz, amplitude per m/s).
    pub drive_tones: Vec<(f64, f64)>,
    /// Per-clip relative jitter of each band amplitude, uniform in ±jitter.
    pub amplitude_jitter: f64,
    /// Range of the std of terrain-independent ambient white noise; each
    /// clip draws its level log-uniformly from it.
    pub ambient_floor: (f64, f64),
    /// Truncate the record to at most this many clips.
    pub max_clips: Option<usize>,
    /// One birds-eye image every this many clips (0 disables imaging).
    pub image_every: usize,
    pub image_size_px: usize,
    pub seed: u64,
    pub exec: Exec,
}

impl Default for TraversalParams {
    fn default() -> Self {
        Self {
            sample_rate_hz: DEFAULT_SAMPLE_RATE,
            clip_seconds: DEFAULT_CLIP_SECONDS,
            drive_tones: vec![(320.0, 0.35)],
            amplitude_jitter: 0.3,
            ambient_floor: (0.005, 0.15),
            max_clips: None,
            image_every: 4,
            image_size_px: 96,
            seed: 0,
            exec: Exec::default(),
        }
    }
}

impl TraversalParams {
    pub fn samples_per_clip(&self) -> usize {
        (self.clip_seconds * self.sample_rate_hz as f64).round() as usize
    }
}

/// Everything recorded while driving through the world. Poses are one per
/// clip, taken at the clip midpoint; images are anchored to clip poses.
#[derive(Debug, Clone, PartialEq)]
pub struct TraversalRecord {
    pub clips: Vec<AudioClip>,
    pub poses: Vec<Pose>,
    pub speeds: Vec<f64>,
    pub images: Vec<BirdsEyeView>,
    /// Clip (and pose row) each image was taken at.
    pub image_clip: Vec<usize>,
    /// Held-out terrain class under each clip midpoint.
    pub true_class_per_clip: Vec<usize>,
}

/// Waypoints and per-leg speeds of a planned drive.
#[derive(Debug, Clone, PartialEq)]
pub struct Tour {
    pub waypoints: Vec<Point2<f64>>,
    pub speeds: Vec<f64>,
}

/// Plans a drive long enough for `n_clips` clips that keeps revisiting the
/// world's Voronoi sites in shuffled order, with one speed per leg drawn
/// uniformly from `speed_range`.
pub fn plan_tour(world: &World, n_clips: usize, clip_seconds: f64, speed_range: (f64, f64), tour_seed: u64) -> Result<Tour> {
    let (lo, hi) = speed_range;
    if !(lo > 0.0 && hi >= lo && hi <= 2.0) {
        return Err(Error::config(format!("speed range [{lo}, {hi}] must lie in (0, 2]")));
    }
    let spec = &world.spec;
    let margin = 1.0f64.min(spec.width_m / 4.0).min(spec.height_m / 4.0);
    let clamp = |p: Point2<f64>| {
        Point2::new(
            p.x.clamp(margin, spec.width_m - margin),
            p.y.clamp(margin, spec.height_m - margin),
        )
    };
    let mut rng = seed::rng(tour_seed, 0x70_u64);
    let mut order: Vec<usize> = (0..world.sites.len()).collect();
    order.shuffle(&mut rng);
    let mut waypoints = vec![clamp(world.sites[order[0]].0)];
    let mut speeds = Vec::new();
    let needed = (n_clips as f64 + 1.0) * clip_seconds;
    let mut time = 0.0;
    let mut k = 1;
    while time < needed {
        if k == order.len() {
            let last = order[order.len() - 1];
            order.shuffle(&mut rng);
            if order[0] == last && order.len() > 1 {
                order.swap(0, 1);
            }
            k = 0;
        }
        let next = clamp(world.sites[order[k]].0);
        k += 1;
        let prev = *waypoints.last().unwrap();
        let len = (next - prev).norm();
        if len < 1e-6 {
            continue;
        }
        let v = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        waypoints.push(next);
        speeds.push(v);
        time += len / v;
        if speeds.len() > 1_000_000 {
            return Err(Error::config("tour planning did not accumulate enough path length"));
        }
    }
    Ok(Tour { waypoints, speeds })
}

struct Motion {
    /// Start time of each leg.
    starts: Vec<f64>,
    total: f64,
}

impl Motion {
    fn new(waypoints: &[Point2<f64>], speeds: &[f64]) -> Self {
        let mut starts = Vec::with_capacity(waypoints.len());
        let mut t = 0.0;
        for (j, w) in waypoints.windows(2).enumerate() {
            starts.push(t);
            t += (w[1] - w[0]).norm() / speeds[j % speeds.len()];
        }
        Motion { starts, total: t }
    }

    /// (position, heading, speed) at time t.
    fn at(&self, t: f64, waypoints: &[Point2<f64>], speeds: &[f64]) -> (Point2<f64>, f64, f64) {
        let j = match self.starts.partition_point(|&s| s <= t) {
            0 => 0,
            n => n - 1,
        };
        let (a, b) = (waypoints[j], waypoints[j + 1]);
        let v = speeds[j % speeds.len()];
        let d = b - a;
        let len = d.norm();
        let s = ((t - self.starts[j]) * v).min(len);
        let p = if len > 0.0 { a + d * (s / len) } else { a };
        (p, d.y.atan2(d.x), v)
    }
}

/// Synthesizes one clip: terrain bands scaled by `speed_gain * speed`,
/// drive tones scaled by speed, and a white-noise floor. Samples are
/// quantized to 16-bit PCM levels so that on-disk and in-memory data agree.
pub fn synthesize_clip(
    sig: &AudioSignature,
    params: &TraversalParams,
    speed: f64,
    rng: &mut impl Rng,
) -> AudioClip {
    let n = params.samples_per_clip();
    let sr = params.sample_rate_hz as f64;
    let mut tones: Vec<(f64, f64, f64)> = Vec::new();
    for (&f, &a) in sig.band_centers_hz.iter().zip(&sig.band_amplitudes) {
        let jit = if params.amplitude_jitter > 0.0 {
            1.0 + rng.random_range(-params.amplitude_jitter..=params.amplitude_jitter)
        } else {
            1.0
        };
        tones.push((f, a * sig.speed_gain * speed * jit, rng.random_range(0.0..TAU)));
    }
    for &(f, a) in &params.drive_tones {
        tones.push((f, a * speed, rng.random_range(0.0..TAU)));
    }
    let (lo, hi) = params.ambient_floor;
    let ambient = if hi > 0.0 && lo > 0.0 && hi > lo {
        (lo.ln() + (hi.ln() - lo.ln()) * rng.random::<f64>()).exp()
    } else {
        lo.max(0.0)
    };
    let std = (sig.broadband_floor.max(0.0).powi(2) + ambient * ambient).sqrt();
    let floor = Normal::new(0.0, std).expect("finite std");
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / sr;
            let mut s: f64 = tones
                .iter()
                .filter(|(_, a, _)| *a != 0.0)
                .map(|(f, a, ph)| a * (TAU * f * t + ph).sin())
                .sum();
            if std > 0.0 {
                s += floor.sample(rng);
            }
            (s.clamp(-1.0, 1.0) * 32767.0).round() / 32767.0
        })
        .collect();
    AudioClip {
        samples,
        sample_rate_hz: params.sample_rate_hz,
    }
}

/// Drives the polyline `waypoints` with leg `j` at `speed_profile[j % len]`
/// and records one clip per `clip_seconds` of travel (non-overlapping,
/// trailing partial clip dropped).
pub fn simulate_traversal(
    world: &World,
    waypoints: &[Point2<f64>],
    speed_profile: &[f64],
    params: &TraversalParams,
) -> Result<TraversalRecord> {
    if waypoints.is_empty() {
        return Err(Error::input("traversal needs at least one waypoint"));
    }
    if let Some(p) = waypoints.iter().find(|p| !world.contains(p.x, p.y)) {
        return Err(Error::input(format!("waypoint ({}, {}) lies outside the world", p.x, p.y)));
    }
    if speed_profile.is_empty() || speed_profile.iter().any(|v| !(*v > 0.0 && *v <= 2.0)) {
        return Err(Error::input("speeds must lie in (0, 2] m/s"));
    }
    if !(params.clip_seconds > 0.0) || params.samples_per_clip() == 0 {
        return Err(Error::config("clip duration must cover at least one sample"));
    }
    for c in &world.spec.classes {
        c.audio.validate(params.sample_rate_hz)?;
    }
    let (lo, hi) = params.ambient_floor;
    if !(lo >= 0.0 && hi >= lo && hi.is_finite()) {
        return Err(Error::config("ambient floor range must satisfy 0 <= min <= max"));
    }
    let nyquist = params.sample_rate_hz as f64 / 2.0;
    if params.drive_tones.iter().any(|(f, _)| !(*f > 0.0 && *f < nyquist)) {
        return Err(Error::config("drive tones must lie below Nyquist"));
    }

    let motion = if waypoints.len() > 1 {
        Some(Motion::new(waypoints, speed_profile))
    } else {
        None
    };
    let total = motion.as_ref().map_or(0.0, |m| m.total);
    let mut n = (total / params.clip_seconds + 1e-9).floor() as usize;
    if let Some(cap) = params.max_clips {
        n = n.min(cap);
    }

    let mut poses = Vec::with_capacity(n);
    let mut speeds = Vec::with_capacity(n);
    let mut classes = Vec::with_capacity(n);
    for k in 0..n {
        let t = (k as f64 + 0.5) * params.clip_seconds;
        let (p, heading, v) = motion.as_ref().unwrap().at(t, waypoints, speed_profile);
        let class = world
            .class_at(p.x, p.y)
            .or_else(|| world.class_at(p.x.min(world.spec.width_m - 1e-9), p.y.max(1e-9)))
            .unwrap_or(0);
        poses.push(Pose::planar(t, p.x, p.y, heading));
        speeds.push(v);
        classes.push(class);
    }

    let clips = params.exec.map_range(n, |k| {
        let mut rng = seed::rng(params.seed, 0xC11_0000 + k as u64);
        synthesize_clip(&world.spec.classes[classes[k]].audio, params, speeds[k], &mut rng)
    });

    let image_clip: Vec<usize> = if params.image_every == 0 {
        Vec::new()
    } else {
        (params.image_every / 2..n).step_by(params.image_every).collect()
    };
    let images = params.exec.try_map(&image_clip, |&k| {
        render_birdseye(world, &poses[k].north_up(), params.image_size_px, world.meters_per_pixel())
    })?;

    Ok(TraversalRecord {
        clips,
        poses,
        speeds,
        images,
        image_clip,
        true_class_per_clip: classes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::{easy_spec, generate_world};

    fn small_world() -> World {
        let mut spec = easy_spec(5);
        spec.width_m = 10.0;
        spec.height_m = 10.0;
        generate_world(&spec).unwrap()
    }

    #[test]
    fn silent_signature_gives_silent_clips() {
        let mut world = small_world();
        for c in &mut world.spec.classes {
            c.audio.band_amplitudes.iter_mut().for_each(|a| *a = 0.0);
            c.audio.broadband_floor = 0.0;
        }
        let params = TraversalParams { drive_tones: vec![], ambient_floor: (0.0, 0.0), image_every: 0, ..Default::default() };
        let rec = simulate_traversal(&world, &[Point2::new(1.0, 1.0), Point2::new(3.0, 1.0)], &[0.5], &params).unwrap();
        assert_eq!(rec.clips.len(), 8);
        assert!(rec.clips.iter().all(|c| c.samples.iter().all(|&s| s == 0.0)));
    }

    #[test]
    fn single_class_segment_has_one_class() {
        let mut world = small_world();
        world.classes.iter_mut().for_each(|c| *c = 2);
        let params = TraversalParams { image_every: 0, ..Default::default() };
        let rec = simulate_traversal(&world, &[Point2::new(1.0, 5.0), Point2::new(9.0, 5.0)], &[0.5], &params).unwrap();
        assert!(rec.true_class_per_clip.iter().all(|&c| c == 2));
        assert!(rec.clips.iter().all(|c| c.len() == 22050));
    }

    #[test]
    fn boundary_crossing_changes_class_once() {
        let mut world = small_world();
        let w = world.width_px;
        for (i, c) in world.classes.iter_mut().enumerate() {
            *c = u8::from(i % w >= w / 2);
        }
        let params = TraversalParams { image_every: 0, ..Default::default() };
        let rec = simulate_traversal(&world, &[Point2::new(1.0, 5.0), Point2::new(9.0, 5.0)], &[0.8], &params).unwrap();
        let changes = rec.true_class_per_clip.windows(2).filter(|p| p[0] != p[1]).count();
        assert_eq!(changes, 1);
        for (pose, &c) in rec.poses.iter().zip(&rec.true_class_per_clip) {
            assert_eq!(world.class_at(pose.position.x, pose.position.y), Some(c));
        }
    }

    #[test]
    fn rejects_bad_waypoints_and_speeds() {
        let world = small_world();
        let p = TraversalParams::default();
        assert!(simulate_traversal(&world, &[Point2::new(-1.0, 1.0)], &[0.5], &p).is_err());
        assert!(simulate_traversal(&world, &[Point2::new(1.0, 1.0)], &[2.5], &p).is_err());
        assert!(simulate_traversal(&world, &[Point2::new(1.0, 1.0)], &[], &p).is_err());
    }

    #[test]
    fn tour_covers_requested_clips() {
        let world = small_world();
        let tour = plan_tour(&world, 40, 0.5, (0.2, 1.0), 3).unwrap();
        assert!(tour.speeds.iter().all(|v| (0.2..=1.0).contains(v)));
        let params = TraversalParams { max_clips: Some(40), image_every: 0, ..Default::default() };
        let rec = simulate_traversal(&world, &tour.waypoints, &tour.speeds, &params).unwrap();
        assert_eq!(rec.clips.len(), 40);
        assert_eq!(rec.poses.len(), 40);
    }

    #[test]
    fn traversal_is_deterministic_across_exec() {
        let world = small_world();
        let tour = plan_tour(&world, 12, 0.5, (0.2, 1.0), 9).unwrap();
        let seq = TraversalParams { max_clips: Some(12), exec: Exec::Sequential, ..Default::default() };
        let par = TraversalParams { exec: Exec::Parallel, ..seq.clone() };
        assert_eq!(
            simulate_traversal(&world, &tour.waypoints, &tour.speeds, &seq).unwrap(),
            simulate_traversal(&world, &tour.waypoints, &tour.speeds, &par).unwrap()
        );
    }
}
