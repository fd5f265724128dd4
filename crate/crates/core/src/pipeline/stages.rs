use ndarray::Array2;

use super::{Dataset, PipelineConfig, Truth};
use crate::audio::{add_noise, encoder_input, spectrogram_batch, AudioClip, SpectrogramNormalizer, StftParams};
use crate::cluster::{assign_to_centroids, class_mapping, clustering_accuracy, confusion, kmeans, nmi, ClusterAssignment, KMeansParams, MaskScores, SegCounts};
use crate::exec::Exec;
use crate::geometry::{extract_patches, weak_label_image, TerrainPatch, WeakLabelImage};
use crate::imagery::{decode_label, encode_class, LabelMask};
use crate::metric::{embed, train, EpochLoss, Mlp, TrainConfig, TrainOutput};
use crate::seg::{predict_mask, train_segmenter, SegModel, SegTrainOutput};
use crate::triplets::{cluster_visual, corrupt_triplets, sample_triplets, triplet_correctness, visual_features_batch, Guide, SamplingMechanism, Triplet};
use crate::{seed, Error, Result};

/// Seed streams of the stages, derived from the global seed.
pub mod streams {
    pub const NOISE: u64 = 1;
    pub const VISUAL: u64 = 2;
    pub const SAMPLE: u64 = 3;
    pub const CORRUPT: u64 = 4;
    pub const ENCODER: u64 = 5;
    pub const CLUSTER: u64 = 6;
    pub const SEGMENT: u64 = 7;
}
use streams::*;

/// Clips with white noise added at `snr_db` (clip `k` uses its own stream).
pub fn noisy_clips(clips: &[AudioClip], snr_db: f64, noise_seed: u64, exec: Exec) -> Result<Vec<AudioClip>> {
    let idx: Vec<usize> = (0..clips.len()).collect();
    exec.try_map(&idx, |&k| add_noise(&clips[k], snr_db, seed::derive(noise_seed, k as u64)))
}

/// Encoder inputs for all clips (one row each) and the scaler used: the
/// given one, or one fitted on these clips.
pub fn audio_inputs(
    clips: &[AudioClip],
    stft: &StftParams,
    normalizer: Option<SpectrogramNormalizer>,
    exec: Exec,
) -> Result<(Array2<f64>, SpectrogramNormalizer)> {
    let specs = spectrogram_batch(clips, stft, exec)?;
    let mut rows: Vec<Vec<f64>> = exec.map(&specs, encoder_input);
    let norm = normalizer.unwrap_or_else(|| SpectrogramNormalizer::fit(rows.iter().map(|r| r.as_slice())));
    for r in &mut rows {
        norm.apply(r);
    }
    let d = rows.first().map_or(0, |r| r.len());
    let flat = rows.concat();
    Ok((Array2::from_shape_vec((clips.len(), d), flat).expect("rows share a length"), norm))
}

/// Paints encoded per-clip labels on the footprint in every view.
pub fn weak_label_views(ds: &Dataset, clip_labels: &[u8], footprint_radius_m: f64) -> Result<Vec<WeakLabelImage>> {
    if clip_labels.len() != ds.clips.len() {
        return Err(Error::input(format!("{} labels for {} clips", clip_labels.len(), ds.clips.len())));
    }
    (0..ds.views.len())
        .map(|v| {
            let projected = ds.projected_midpoints(v)?;
            weak_label_image(&ds.views[v], &projected, clip_labels, footprint_radius_m, ds.meters_per_pixel)
        })
        .collect()
}

/// Views with the traversed path marked, before any class is known.
pub fn path_views(ds: &Dataset, footprint_radius_m: f64) -> Result<Vec<WeakLabelImage>> {
    weak_label_views(ds, &vec![encode_class(0); ds.clips.len()], footprint_radius_m)
}

/// One patch per clip: the candidate closest to its view's center (earlier
/// view on ties). Sorted by clip.
pub fn best_patches(views: &[WeakLabelImage], patch_px: usize) -> Vec<TerrainPatch> {
    let mut best: std::collections::BTreeMap<usize, TerrainPatch> = Default::default();
    for v in views {
        for p in extract_patches(v, patch_px).patches {
            match best.get(&p.clip_index) {
                Some(q) if q.offset_from_center_px <= p.offset_from_center_px => {}
                _ => {
                    best.insert(p.clip_index, p);
                }
            }
        }
    }
    best.into_values().collect()
}

/// Visual features of the patched clips and the triplets formed on them.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletStage {
    /// Clip index of each feature row.
    pub patch_clips: Vec<usize>,
    pub features: Array2<f64>,
    pub visual_clusters: Option<Vec<usize>>,
    /// Triplets over clip indices.
    pub triplets: Vec<Triplet>,
}

/// Forms `n` triplets over the patched clips. `truth` (clip classes) is
/// only consulted by the ground-truth rules.
pub fn form_triplets(
    patches: &[TerrainPatch],
    mechanism: SamplingMechanism,
    k: usize,
    n: usize,
    truth: Option<&[usize]>,
    stage_seed: u64,
    exec: Exec,
) -> Result<TripletStage> {
    let imgs: Vec<_> = patches.iter().map(|p| &p.pixels).collect();
    let features = visual_features_batch(&imgs, exec)?;
    let patch_clips: Vec<usize> = patches.iter().map(|p| p.clip_index).collect();
    triplets_from_features(features, patch_clips, mechanism, k, n, truth, stage_seed, exec)
}

/// [`form_triplets`] from precomputed patch descriptors; row `i` of
/// `features` belongs to clip `patch_clips[i]`.
#[allow(clippy::too_many_arguments)]
pub fn triplets_from_features(
    features: Array2<f64>,
    patch_clips: Vec<usize>,
    mechanism: SamplingMechanism,
    k: usize,
    n: usize,
    truth: Option<&[usize]>,
    stage_seed: u64,
    exec: Exec,
) -> Result<TripletStage> {
    if features.nrows() != patch_clips.len() {
        return Err(Error::input(format!("{} feature rows for {} patches", features.nrows(), patch_clips.len())));
    }
    let visual_clusters = if mechanism.needs_clusters() {
        Some(cluster_visual(&features, k, seed::derive(stage_seed, VISUAL), exec)?)
    } else {
        None
    };
    let patch_truth: Option<Vec<usize>> = match truth {
        Some(t) => Some(
            patch_clips
                .iter()
                .map(|&c| t.get(c).copied().ok_or_else(|| Error::input(format!("no truth for clip {c}"))))
                .collect::<Result<_>>()?,
        ),
        None => None,
    };
    let guide = Guide {
        clusters: visual_clusters.as_deref(),
        truth: patch_truth.as_deref(),
    };
    let local = sample_triplets(&features, mechanism, &guide, n, seed::derive(stage_seed, SAMPLE))?;
    let triplets = local
        .iter()
        .map(|t| Triplet {
            anchor: patch_clips[t.anchor],
            positive: patch_clips[t.positive],
            negative: patch_clips[t.negative],
        })
        .collect();
    Ok(TripletStage {
        patch_clips,
        features,
        visual_clusters,
        triplets,
    })
}

/// Triplets used for training: unchanged, or edited to an exact share of
/// correct triplets (requires truth).
pub fn encoder_triplets(triplets: &[Triplet], correct_ratio: Option<f64>, truth: Option<&[usize]>, stage_seed: u64) -> Result<Vec<Triplet>> {
    match correct_ratio {
        None => Ok(triplets.to_vec()),
        Some(r) => {
            let t = truth.ok_or_else(|| Error::input("correct-ratio editing needs clip truth"))?;
            corrupt_triplets(triplets, t, r, seed::derive(stage_seed, CORRUPT))
        }
    }
}

pub fn train_encoder(inputs: &Array2<f64>, triplets: &[Triplet], config: &TrainConfig) -> Result<TrainOutput> {
    train(inputs, triplets, config)
}

/// Embeds every clip and clusters the embeddings into `k` groups.
pub fn cluster_embeddings(
    out: &TrainOutput,
    inputs: &Array2<f64>,
    k: usize,
    restarts: usize,
    cluster_seed: u64,
    exec: Exec,
) -> Result<(Array2<f64>, ClusterAssignment)> {
    let emb = embed(&out.encoder, inputs.view(), exec)?;
    let mut params = KMeansParams::new(k, cluster_seed);
    params.restarts = restarts;
    let assignment = kmeans(&emb, &params, exec)?;
    Ok((emb, assignment))
}

/// Labels new clips with an already trained encoder: same input scaling,
/// nearest learned centroid.
pub fn label_clips(
    clips: &[AudioClip],
    stft: &StftParams,
    normalizer: SpectrogramNormalizer,
    encoder: &Mlp,
    centroids: &Array2<f64>,
    exec: Exec,
) -> Result<Vec<usize>> {
    let (inputs, _) = audio_inputs(clips, stft, Some(normalizer), exec)?;
    let emb = embed(encoder, inputs.view(), exec)?;
    assign_to_centroids(&emb, centroids)
}

/// Trains the segmenter on views labeled with per-clip classes.
pub fn segmentation_labels(
    ds: &Dataset,
    clip_classes: &[usize],
    config: &PipelineConfig,
) -> Result<(Vec<WeakLabelImage>, SegTrainOutput)> {
    let encoded: Vec<u8> = clip_classes.iter().map(|&c| encode_class(c)).collect();
    let weak = weak_label_views(ds, &encoded, config.footprint_radius_m)?;
    let mut seg = config.seg.clone();
    seg.num_classes = config.num_classes;
    seg.seed = config.stage_seed(SEGMENT);
    let out = train_segmenter(&weak, &seg)?;
    Ok((weak, out))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegEvaluation {
    pub iou: MaskScores,
    /// Recall on pixels carrying a true weak label.
    pub recall: MaskScores,
    pub predictions: Vec<LabelMask>,
}

/// Scores dense predictions on `views`. Predicted ids pass through
/// `to_class` (cluster id to class id) first; `dense` holds the true
/// classes and `weak_truth` the truly labeled footprint.
pub fn evaluate_segmentation(
    model: &SegModel,
    views: &[&crate::imagery::RgbImage],
    to_class: &[usize],
    dense: &[LabelMask],
    weak_truth: &[LabelMask],
    exec: Exec,
) -> Result<SegEvaluation> {
    let k = model.num_classes();
    let mut dense_counts = SegCounts::new(k);
    let mut weak_counts = SegCounts::new(k);
    let mut predictions = Vec::with_capacity(views.len());
    for (i, img) in views.iter().enumerate() {
        let mut mask = predict_mask(img, model, exec)?.mask;
        for v in &mut mask.data {
            if let Some(c) = decode_label(*v) {
                *v = encode_class(to_class[c]);
            }
        }
        dense_counts.add(&mask, &dense[i])?;
        if let Some(w) = weak_truth.get(i) {
            weak_counts.add(&mask, w)?;
        }
        predictions.push(mask);
    }
    Ok(SegEvaluation {
        iou: dense_counts.iou(),
        recall: weak_counts.recall(),
        predictions,
    })
}

/// Cluster-to-class lookup from the best one-to-one matching; unmatched
/// clusters keep their own id.
pub fn cluster_to_class(pred: &[usize], truth: &[usize], k: usize) -> Result<Vec<usize>> {
    let map = class_mapping(pred, truth)?;
    Ok((0..k).map(|c| *map.get(&c).unwrap_or(&c)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Also train and score the segmenter.
    pub segment: bool,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub clustering_accuracy: f64,
    pub nmi: f64,
    pub triplet_correctness: f64,
    pub confusion: Array2<u64>,
    pub clusters: Vec<usize>,
    pub cluster_to_class: Vec<usize>,
    pub trace: Vec<EpochLoss>,
    pub encoder: TrainOutput,
    pub normalizer: SpectrogramNormalizer,
    pub centroids: Array2<f64>,
    pub triplets: Vec<Triplet>,
    /// Clips that received a terrain patch, and their visual clusters.
    pub patch_clips: Vec<usize>,
    pub visual_clusters: Option<Vec<usize>>,
    pub segmenter: Option<SegModel>,
    pub segmentation: Option<SegEvaluation>,
}

/// Runs every stage on `ds`. Truth is read only for scoring, for the
/// ground-truth sampling rules, and for correct-ratio editing.
pub fn run(ds: &Dataset, truth: &Truth, config: &PipelineConfig, opts: RunOptions) -> Result<RunReport> {
    config.validate()?;
    let k = config.num_classes;
    let exec = config.exec;
    let clips = match config.snr_db {
        Some(db) => noisy_clips(&ds.clips, db, config.stage_seed(NOISE), exec)?,
        None => ds.clips.clone(),
    };
    let (inputs, normalizer) = audio_inputs(&clips, &config.stft, None, exec)?;
    let views = path_views(ds, config.footprint_radius_m)?;
    let patches = best_patches(&views, config.patch_px);
    let gt = config.mechanism.needs_truth().then_some(truth.clip_classes.as_slice());
    let stage = form_triplets(&patches, config.mechanism, k, config.triplet_count, gt, config.seed, exec)?;
    let ct = config.correct_ratio.map(|_| truth.clip_classes.as_slice());
    let triplets = encoder_triplets(&stage.triplets, config.correct_ratio, ct, config.seed)?;
    let mut enc_cfg = config.encoder.clone();
    enc_cfg.seed = config.stage_seed(ENCODER);
    let encoder = train_encoder(&inputs, &triplets, &enc_cfg)?;
    let (_, assignment) = cluster_embeddings(&encoder, &inputs, k, config.kmeans_restarts, config.stage_seed(CLUSTER), exec)?;
    let labels = assignment.labels.clone();
    let to_class = cluster_to_class(&labels, &truth.clip_classes, k)?;

    let (segmenter, segmentation) = if opts.segment {
        let (_, out) = segmentation_labels(ds, &labels, config)?;
        let truth_codes: Vec<u8> = truth.clip_classes.iter().map(|&c| encode_class(c)).collect();
        let weak_truth: Vec<LabelMask> = weak_label_views(ds, &truth_codes, config.footprint_radius_m)?
            .into_iter()
            .map(|w| w.labels)
            .collect();
        let imgs: Vec<_> = ds.views.iter().map(|v| &v.image).collect();
        let eval = evaluate_segmentation(&out.model, &imgs, &to_class, &truth.dense, &weak_truth, exec)?;
        (Some(out.model), Some(eval))
    } else {
        (None, None)
    };

    Ok(RunReport {
        clustering_accuracy: clustering_accuracy(&labels, &truth.clip_classes)?,
        nmi: nmi(&truth.clip_classes, &labels)?,
        triplet_correctness: triplet_correctness(&triplets, &truth.clip_classes),
        confusion: confusion(&truth.clip_classes, &labels.iter().map(|&c| to_class[c]).collect::<Vec<_>>(), k)?,
        clusters: labels,
        cluster_to_class: to_class,
        trace: encoder.trace.clone(),
        encoder,
        normalizer,
        centroids: assignment.centroids,
        triplets,
        patch_clips: stage.patch_clips,
        visual_clusters: stage.visual_clusters,
        segmenter,
        segmentation,
    })
}
