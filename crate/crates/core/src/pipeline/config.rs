use std::collections::BTreeMap;
use std::fmt::Write;
use std::str::FromStr;

use crate::audio::{StftParams, WindowFn};
use crate::exec::Exec;
use crate::geometry::{DEFAULT_PATCH_PX, FOOTPRINT_RADIUS_M};
use crate::metric::{OptimizerKind, TrainConfig};
use crate::seg::SegConfig;
use crate::synthgen::{easy_spec, hard_spec, shifted_spec, TraversalParams, WorldSpec};
use crate::triplets::SamplingMechanism;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorldPreset {
    Easy,
    Hard,
    Shifted,
}

impl WorldPreset {
    pub fn name(self) -> &'static str {
        match self {
            Self::Easy => "easy",
            Self::Hard => "hard",
            Self::Shifted => "shifted",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "easy" => Some(Self::Easy),
            "hard" => Some(Self::Hard),
            "shifted" => Some(Self::Shifted),
            _ => None,
        }
    }

    pub fn spec(self, seed: u64) -> WorldSpec {
        match self {
            Self::Easy => easy_spec(seed),
            Self::Hard => hard_spec(seed),
            Self::Shifted => shifted_spec(seed),
        }
    }
}

/// Every tunable of the pipeline. Serialized as flat `section.key=value`
/// text; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    pub num_classes: usize,
    pub world: WorldPreset,
    pub clips: usize,
    pub speed_range: (f64, f64),
    pub image_every: usize,
    pub image_size_px: usize,
    pub stft: StftParams,
    pub snr_db: Option<f64>,
    pub mechanism: SamplingMechanism,
    pub triplet_count: usize,
    pub correct_ratio: Option<f64>,
    pub patch_px: usize,
    pub footprint_radius_m: f64,
    pub encoder: TrainConfig,
    pub kmeans_restarts: usize,
    pub seg: SegConfig,
    pub unknown_cost: f64,
    pub experiment_seeds: Vec<u64>,
    pub snr_grid: Vec<f64>,
    pub triplet_count_grid: Vec<usize>,
    pub sampling_grid: Vec<SamplingMechanism>,
    pub correct_ratio_grid: Vec<f64>,
    pub exec: Exec,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            num_classes: 5,
            world: WorldPreset::Easy,
            clips: 1500,
            speed_range: (0.4, 1.0),
            image_every: 4,
            image_size_px: 96,
            stft: StftParams::default(),
            snr_db: None,
            mechanism: SamplingMechanism::DISTANCE_CLUSTER,
            triplet_count: 4000,
            correct_ratio: None,
            patch_px: DEFAULT_PATCH_PX,
            footprint_radius_m: FOOTPRINT_RADIUS_M,
            encoder: TrainConfig {
                epochs: 30,
                ..TrainConfig::default()
            },
            kmeans_restarts: 10,
            seg: SegConfig::default(),
            unknown_cost: 50.0,
            experiment_seeds: vec![1, 2, 3],
            snr_grid: vec![0.0, 10.0, 20.0, 30.0, 40.0, 50.0],
            triplet_count_grid: vec![30, 100, 300, 1000, 3000],
            sampling_grid: ["random/random", "random/cluster", "cluster/cluster", "distance/cluster", "distance/distance"]
                .iter()
                .map(|s| SamplingMechanism::parse(s).unwrap())
                .collect(),
            correct_ratio_grid: vec![0.2, 0.4, 0.6, 0.8, 1.0],
            exec: Exec::default(),
        }
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::config(format!("{key}: cannot parse {v:?}")))
}

fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').filter(|s| !s.trim().is_empty()).map(|s| num(key, s)).collect()
}

fn optional(key: &str, v: &str) -> Result<Option<f64>> {
    match v.trim() {
        "" | "none" => Ok(None),
        s => num(key, s).map(Some),
    }
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn mechanism(key: &str, v: &str) -> Result<SamplingMechanism> {
    SamplingMechanism::parse(v.trim()).ok_or_else(|| Error::config(format!("{key}: unknown sampling mechanism {v:?}")))
}

impl PipelineConfig {
    /// Applies `key=value` overrides on top of `self`.
    pub fn apply(&mut self, kv: &BTreeMap<String, String>) -> Result<()> {
        for (k, v) in kv {
            self.set(k, v)?;
        }
        self.validate()
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let k = key;
        match key {
            "seed" => self.seed = num(k, v)?,
            "num_classes" => self.num_classes = num(k, v)?,
            "exec" => {
                self.exec = match v.trim() {
                    "sequential" => Exec::Sequential,
                    "parallel" => Exec::Parallel,
                    _ => return Err(Error::config(format!("exec: expected sequential or parallel, got {v:?}"))),
                }
            }
            "world.preset" => {
                self.world = WorldPreset::parse(v.trim()).ok_or_else(|| Error::config(format!("world.preset: unknown preset {v:?}")))?
            }
            "world.clips" => self.clips = num(k, v)?,
            "world.speed_min" => self.speed_range.0 = num(k, v)?,
            "world.speed_max" => self.speed_range.1 = num(k, v)?,
            "world.image_every" => self.image_every = num(k, v)?,
            "world.image_size_px" => self.image_size_px = num(k, v)?,
            "audio.window_size" => self.stft.window_size = num(k, v)?,
            "audio.hop" => self.stft.hop = num(k, v)?,
            "audio.window" => {
                self.stft.window_fn = WindowFn::parse(v.trim()).ok_or_else(|| Error::config(format!("audio.window: unknown window {v:?}")))?
            }
            "audio.snr_db" => self.snr_db = optional(k, v)?,
            "triplets.mechanism" => self.mechanism = mechanism(k, v)?,
            "triplets.count" => self.triplet_count = num(k, v)?,
            "triplets.correct_ratio" => self.correct_ratio = optional(k, v)?,
            "triplets.patch_px" => self.patch_px = num(k, v)?,
            "labels.footprint_radius_m" => self.footprint_radius_m = num(k, v)?,
            "encoder.alpha" => self.encoder.alpha = num(k, v)?,
            "encoder.beta" => self.encoder.beta = num(k, v)?,
            "encoder.epochs" => self.encoder.epochs = num(k, v)?,
            "encoder.batch_size" => self.encoder.batch_size = num(k, v)?,
            "encoder.learning_rate" => self.encoder.learning_rate = num(k, v)?,
            "encoder.momentum" => self.encoder.momentum = num(k, v)?,
            "encoder.optimizer" => {
                self.encoder.optimizer = OptimizerKind::parse(v.trim()).ok_or_else(|| Error::config(format!("encoder.optimizer: unknown optimizer {v:?}")))?
            }
            "cluster.restarts" => self.kmeans_restarts = num(k, v)?,
            "seg.hidden" => self.seg.hidden = num(k, v)?,
            "seg.epochs" => self.seg.epochs = num(k, v)?,
            "seg.batch_size" => self.seg.batch_size = num(k, v)?,
            "seg.learning_rate" => self.seg.learning_rate = num(k, v)?,
            "seg.momentum" => self.seg.momentum = num(k, v)?,
            "seg.max_pixels" => self.seg.max_pixels = num(k, v)?,
            "map.unknown_cost" => self.unknown_cost = num(k, v)?,
            "experiment.seeds" => self.experiment_seeds = list(k, v)?,
            "experiment.snr_db" => self.snr_grid = list(k, v)?,
            "experiment.triplet_count" => self.triplet_count_grid = list(k, v)?,
            "experiment.sampling" => {
                self.sampling_grid = v.split(',').filter(|s| !s.trim().is_empty()).map(|s| mechanism(k, s)).collect::<Result<_>>()?
            }
            "experiment.correct_ratio" => self.correct_ratio_grid = list(k, v)?,
            _ => return Err(Error::config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes == 0 || self.num_classes > 254 {
            return Err(Error::config("num_classes must lie in 1..=254"));
        }
        if self.clips < 3 {
            return Err(Error::config("world.clips must be at least 3"));
        }
        if self.triplet_count == 0 {
            return Err(Error::config("triplets.count must be positive"));
        }
        if let Some(r) = self.correct_ratio {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::config("triplets.correct_ratio must lie in [0, 1]"));
            }
        }
        if self.image_size_px == 0 || self.patch_px == 0 || self.patch_px > self.image_size_px {
            return Err(Error::config("patch size must lie in 1..=world.image_size_px"));
        }
        if self.kmeans_restarts == 0 {
            return Err(Error::config("cluster.restarts must be positive"));
        }
        if !(self.unknown_cost > 0.0) {
            return Err(Error::config("map.unknown_cost must be positive"));
        }
        self.encoder.validate()
    }

    /// Flat text form, one `key=value` per line in a fixed order.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let opt = |v: Option<f64>| v.map_or("none".to_string(), |x| x.to_string());
        let exec = match self.exec {
            Exec::Sequential => "sequential",
            Exec::Parallel => "parallel",
        };
        let sampling: Vec<String> = self.sampling_grid.iter().map(|m| m.to_string()).collect();
        let lines: Vec<(&str, String)> = vec![
            ("seed", self.seed.to_string()),
            ("num_classes", self.num_classes.to_string()),
            ("exec", exec.to_string()),
            ("world.preset", self.world.name().to_string()),
            ("world.clips", self.clips.to_string()),
            ("world.speed_min", self.speed_range.0.to_string()),
            ("world.speed_max", self.speed_range.1.to_string()),
            ("world.image_every", self.image_every.to_string()),
            ("world.image_size_px", self.image_size_px.to_string()),
            ("audio.window_size", self.stft.window_size.to_string()),
            ("audio.hop", self.stft.hop.to_string()),
            ("audio.window", self.stft.window_fn.name().to_string()),
            ("audio.snr_db", opt(self.snr_db)),
            ("triplets.mechanism", self.mechanism.to_string()),
            ("triplets.count", self.triplet_count.to_string()),
            ("triplets.correct_ratio", opt(self.correct_ratio)),
            ("triplets.patch_px", self.patch_px.to_string()),
            ("labels.footprint_radius_m", self.footprint_radius_m.to_string()),
            ("encoder.alpha", self.encoder.alpha.to_string()),
            ("encoder.beta", self.encoder.beta.to_string()),
            ("encoder.epochs", self.encoder.epochs.to_string()),
            ("encoder.batch_size", self.encoder.batch_size.to_string()),
            ("encoder.learning_rate", self.encoder.learning_rate.to_string()),
            ("encoder.momentum", self.encoder.momentum.to_string()),
            ("encoder.optimizer", self.encoder.optimizer.name().to_string()),
            ("cluster.restarts", self.kmeans_restarts.to_string()),
            ("seg.hidden", self.seg.hidden.to_string()),
            ("seg.epochs", self.seg.epochs.to_string()),
            ("seg.batch_size", self.seg.batch_size.to_string()),
            ("seg.learning_rate", self.seg.learning_rate.to_string()),
            ("seg.momentum", self.seg.momentum.to_string()),
            ("seg.max_pixels", self.seg.max_pixels.to_string()),
            ("map.unknown_cost", self.unknown_cost.to_string()),
            ("experiment.seeds", join(&self.experiment_seeds)),
            ("experiment.snr_db", join(&self.snr_grid)),
            ("experiment.triplet_count", join(&self.triplet_count_grid)),
            ("experiment.sampling", sampling.join(",")),
            ("experiment.correct_ratio", join(&self.correct_ratio_grid)),
        ];
        for (k, v) in lines {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    /// World description the `world.*` keys and seed select.
    /// `num_classes` may select a prefix of the preset's terrains.
    pub fn world_spec(&self) -> Result<WorldSpec> {
        let mut spec = self.world.spec(self.seed);
        if self.num_classes > spec.num_classes {
            return Err(Error::config(format!(
                "num_classes {} exceeds the {} terrains of the {} preset",
                self.num_classes,
                spec.num_classes,
                self.world.name()
            )));
        }
        spec.num_classes = self.num_classes;
        spec.classes.truncate(self.num_classes);
        Ok(spec)
    }

    pub fn traversal_params(&self) -> TraversalParams {
        TraversalParams {
            image_every: self.image_every,
            image_size_px: self.image_size_px,
            seed: self.seed,
            exec: self.exec,
            ..TraversalParams::default()
        }
    }

    /// Stage seed derived from the global seed.
    pub fn stage_seed(&self, stage: u64) -> u64 {
        crate::seed::derive(self.seed, stage)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut c = PipelineConfig::default();
        c.snr_db = Some(10.0);
        c.mechanism = SamplingMechanism::RANDOM;
        c.experiment_seeds = vec![4, 5];
        let mut back = PipelineConfig::default();
        for line in c.to_kv().lines() {
            let (k, v) = line.split_once('=').unwrap();
            back.set(k, v).unwrap();
        }
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_unknown_and_bad_values() {
        let mut c = PipelineConfig::default();
        assert!(c.set("audio.windowsize", "256").is_err());
        assert!(c.set("audio.hop", "x").is_err());
        assert!(c.set("triplets.mechanism", "nearest/cluster").is_err());
        c.set("encoder.beta", "2").unwrap();
        assert!(c.validate().is_err());
    }
}
