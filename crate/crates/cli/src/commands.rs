use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use terrasonic::audio::{spectrogram, SpectrogramNormalizer};
use terrasonic::bundle;
use terrasonic::checkpoint;
use terrasonic::cluster::{clustering_accuracy, confusion, kmeans, nmi, KMeansParams, MaskScores};
use terrasonic::imagery::{encode_class, LabelMask, VOID};
use terrasonic::io::{self, cell};
use terrasonic::mapplan::{assign_costs, path_cost, plan, CostMap, SemanticMap};
use terrasonic::metric::{embed, Mlp};
use terrasonic::pipeline::{
    audio_inputs, best_patches, cluster_to_class, encoder_triplets, evaluate_segmentation, label_clips, noisy_clips, path_views, run,
    streams, train_encoder, triplets_from_features, weak_label_views, Dataset, PipelineConfig, RunOptions, Truth,
};
use terrasonic::seg::{predict_mask, train_segmenter, SegModel};
use terrasonic::triplets::{triplet_correctness, visual_features_batch, Triplet};

use crate::{stage, CliError, DataArg, Experiment, Global};

type CliResult<T> = Result<T, CliError>;

// stage directories under --out
const SPECTROGRAM: &str = "spectrogram";
const FEATURES: &str = "features";
const TRIPLETS: &str = "triplets";
const ENCODER: &str = "encoder";
const CLUSTER: &str = "cluster";
const LABEL: &str = "label";
const SEG: &str = "seg";
const EVALUATE: &str = "evaluate";
const MAP: &str = "map";
const PLAN: &str = "plan";
const EXPERIMENT: &str = "experiment";

/// Spectrogram previews written by the spectrogram stage.
const PREVIEWS: usize = 4;

pub struct Context {
    global: Global,
    config: PipelineConfig,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn is_nonempty_dir(dir: &Path) -> bool {
    fs::read_dir(dir).map(|mut d| d.next().is_some()).unwrap_or(false)
}

fn require(path: &Path, hint: &str) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(usage(format!("{} not found; {hint}", path.display())))
    }
}

fn write_rows<const N: usize>(stage_name: &'static str, path: &Path, header: [&str; N], rows: Vec<[String; N]>) -> CliResult<()> {
    io::write_csv(path, &header, rows).map_err(stage(stage_name))
}

fn read_labels(path: &Path, stage_name: &'static str) -> CliResult<Vec<usize>> {
    let rows = io::read_csv(path, &["clip", "cluster"]).map_err(stage(stage_name))?;
    let mut out = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let clip: usize = cell(row, 0, path).map_err(stage(stage_name))?;
        if clip != i {
            return Err(usage(format!("{}: row {i} names clip {clip}", path.display())));
        }
        out.push(cell(row, 1, path).map_err(stage(stage_name))?);
    }
    Ok(out)
}

fn labels_rows(labels: &[usize]) -> Vec<[String; 2]> {
    labels.iter().enumerate().map(|(i, c)| [i.to_string(), c.to_string()]).collect()
}

fn score_rows(name: &str, scores: &MaskScores, rows: &mut Vec<[String; 3]>) {
    rows.push([format!("mean_{name}"), String::new(), scores.mean.to_string()]);
    for (c, v) in scores.per_class.iter().enumerate() {
        if let Some(v) = v {
            rows.push([name.to_string(), c.to_string(), v.to_string()]);
        }
    }
}

impl Context {
    pub fn new(global: Global, config: PipelineConfig) -> Self {
        Self { global, config }
    }

    pub fn data(&self, d: &DataArg) -> PathBuf {
        d.data.clone().unwrap_or_else(|| self.global.out.clone())
    }

    fn dir(&self, name: &str) -> PathBuf {
        self.global.out.join(name)
    }

    /// Output directory of a stage, emptied when --force is given and
    /// refused when it already holds files otherwise.
    fn stage_dir(&self, name: &str) -> CliResult<PathBuf> {
        let dir = self.dir(name);
        if is_nonempty_dir(&dir) {
            if !self.global.force {
                return Err(usage(format!("{} is not empty (use --force to replace it)", dir.display())));
            }
            fs::remove_dir_all(&dir).map_err(|e| usage(format!("cannot clear {}: {e}", dir.display())))?;
        }
        fs::create_dir_all(&dir).map_err(|e| usage(format!("cannot create {}: {e}", dir.display())))?;
        Ok(dir)
    }

    fn training(&self, data: &Path) -> CliResult<Dataset> {
        let dir = data.join("train");
        require(&dir.join("meta/manifest"), "run `terrasonic generate` first")?;
        let (ds, _) = bundle::read_training_bundle(&dir).map_err(stage("load"))?;
        Ok(ds)
    }

    fn truth(&self, data: &Path) -> CliResult<Truth> {
        let dir = data.join("eval");
        require(&dir.join("meta/manifest"), "the evaluation bundle is missing")?;
        let (truth, _) = bundle::read_evaluation_bundle(&dir).map_err(stage("load"))?;
        if truth.num_classes != self.config.num_classes {
            return Err(usage(format!(
                "bundle has {} classes but num_classes is {}",
                truth.num_classes, self.config.num_classes
            )));
        }
        Ok(truth)
    }

    fn encoder(&self) -> CliResult<(Mlp, Mlp)> {
        let path = self.dir(ENCODER).join("encoder.ckpt");
        require(&path, "run `terrasonic train-encoder` first")?;
        let bytes = io::read_bytes(&path).map_err(stage("load"))?;
        let nets = checkpoint::decode(&bytes).map_err(stage("load"))?;
        let [enc, dec]: [Mlp; 2] = nets.try_into().map_err(|_| usage(format!("{} must hold two networks", path.display())))?;
        Ok((enc, dec))
    }

    fn normalizer(&self) -> CliResult<SpectrogramNormalizer> {
        let path = self.dir(SPECTROGRAM).join("normalizer");
        require(&path, "run `terrasonic spectrogram` first")?;
        let kv = io::read_kv(&path).map_err(stage("load"))?;
        let get = |k: &str| {
            kv.get(k)
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| usage(format!("{}: missing {k}", path.display())))
        };
        Ok(SpectrogramNormalizer {
            min: get("min")?,
            max: get("max")?,
        })
    }

    fn matrix(&self, dir: &str, file: &str, hint: &str) -> CliResult<ndarray::Array2<f64>> {
        let path = self.dir(dir).join(file);
        require(&path, hint)?;
        io::read_matrix(&path).map_err(stage("load"))
    }

    fn segmenter(&self) -> CliResult<SegModel> {
        let path = self.dir(SEG).join("segmenter.ckpt");
        require(&path, "run `terrasonic train-seg` first")?;
        let bytes = io::read_bytes(&path).map_err(stage("load"))?;
        SegModel::from_bytes(&bytes).map_err(stage("load"))
    }

    pub fn generate(&self) -> CliResult<()> {
        let out = &self.global.out;
        if is_nonempty_dir(out) {
            if !self.global.force {
                return Err(usage(format!("{} is not empty (use --force to replace the bundles)", out.display())));
            }
            for sub in ["train", "eval"] {
                let d = out.join(sub);
                if d.exists() {
                    fs::remove_dir_all(&d).map_err(|e| usage(format!("cannot clear {}: {e}", d.display())))?;
                }
            }
        }
        let c = &self.config;
        let spec = c.world_spec().map_err(stage("generate"))?;
        let params = c.traversal_params();
        let (_, ds, truth) = terrasonic::pipeline::simulate(&spec, c.clips, c.speed_range, &params).map_err(stage("generate"))?;
        let manifest = bundle::manifest(&spec, &params, c.clips, c.speed_range, &ds);
        bundle::write_training_bundle(&out.join("train"), &ds, &manifest).map_err(stage("generate"))?;
        bundle::write_evaluation_bundle(&out.join("eval"), &truth, &manifest).map_err(stage("generate"))?;
        io::write_bytes(&out.join("config"), c.to_kv().as_bytes()).map_err(stage("generate"))?;
        println!(
            "generate: {} clips, {} views, spec hash {}",
            ds.clips.len(),
            ds.views.len(),
            manifest["spec_hash"]
        );
        Ok(())
    }

    pub fn spectrogram(&self, data: &Path) -> CliResult<()> {
        let ds = self.training(data)?;
        let dir = self.stage_dir(SPECTROGRAM)?;
        let c = &self.config;
        let clips = match c.snr_db {
            Some(db) => noisy_clips(&ds.clips, db, c.stage_seed(streams::NOISE), c.exec).map_err(stage("spectrogram"))?,
            None => ds.clips,
        };
        let (inputs, norm) = audio_inputs(&clips, &c.stft, None, c.exec).map_err(stage("spectrogram"))?;
        io::write_matrix(&dir.join("inputs.f64"), &inputs).map_err(stage("spectrogram"))?;
        let kv: BTreeMap<String, String> = [("min".to_string(), norm.min.to_string()), ("max".to_string(), norm.max.to_string())].into();
        io::write_bytes(&dir.join("normalizer"), io::format_kv(&kv).as_bytes()).map_err(stage("spectrogram"))?;
        for (k, clip) in clips.iter().take(PREVIEWS).enumerate() {
            let (w, h, gray) = spectrogram(clip, &c.stft).map_err(stage("spectrogram"))?.to_gray8();
            io::write_pgm(&dir.join(format!("clip_{k:05}.pgm")), w, h, &gray).map_err(stage("spectrogram"))?;
        }
        println!("spectrogram: {} clips x {} inputs", inputs.nrows(), inputs.ncols());
        Ok(())
    }

    pub fn features(&self, data: &Path) -> CliResult<()> {
        let ds = self.training(data)?;
        let dir = self.stage_dir(FEATURES)?;
        let c = &self.config;
        let views = path_views(&ds, c.footprint_radius_m).map_err(stage("features"))?;
        let patches = best_patches(&views, c.patch_px);
        let imgs: Vec<_> = patches.iter().map(|p| &p.pixels).collect();
        let features = visual_features_batch(&imgs, c.exec).map_err(stage("features"))?;
        io::write_matrix(&dir.join("features.f64"), &features).map_err(stage("features"))?;
        let rows = patches
            .iter()
            .map(|p| [p.clip_index.to_string(), p.offset_from_center_px.to_string()])
            .collect();
        write_rows("features", &dir.join("patches.csv"), ["clip", "offset_px"], rows)?;
        println!("features: {} of {} clips have a patch", patches.len(), ds.clips.len());
        Ok(())
    }

    pub fn triplets(&self, data: &Path) -> CliResult<()> {
        let c = &self.config;
        let features = self.matrix(FEATURES, "features.f64", "run `terrasonic features` first")?;
        let path = self.dir(FEATURES).join("patches.csv");
        let rows = io::read_csv(&path, &["clip", "offset_px"]).map_err(stage("triplets"))?;
        let patch_clips = rows
            .iter()
            .map(|r| cell::<usize>(r, 0, &path))
            .collect::<terrasonic::Result<Vec<_>>>()
            .map_err(stage("triplets"))?;
        // class ids are only read for the evaluation-only rules
        let truth = if c.mechanism.needs_truth() || c.correct_ratio.is_some() {
            Some(self.truth(data)?.clip_classes)
        } else {
            None
        };
        let gt = truth.as_deref().filter(|_| c.mechanism.needs_truth());
        let st = triplets_from_features(features, patch_clips, c.mechanism, c.num_classes, c.triplet_count, gt, c.seed, c.exec)
            .map_err(stage("triplets"))?;
        let triplets = encoder_triplets(&st.triplets, c.correct_ratio, truth.as_deref(), c.seed).map_err(stage("triplets"))?;
        let dir = self.stage_dir(TRIPLETS)?;
        let rows = triplets
            .iter()
            .map(|t| [t.anchor.to_string(), t.positive.to_string(), t.negative.to_string()])
            .collect();
        write_rows("triplets", &dir.join("triplets.csv"), ["anchor", "positive", "negative"], rows)?;
        if let Some(vc) = &st.visual_clusters {
            let rows = st.patch_clips.iter().zip(vc).map(|(a, b)| [a.to_string(), b.to_string()]).collect();
            write_rows("triplets", &dir.join("visual_clusters.csv"), ["clip", "cluster"], rows)?;
        }
        println!("triplets: {} formed with {}", triplets.len(), c.mechanism);
        Ok(())
    }

    fn read_triplets(&self) -> CliResult<Vec<Triplet>> {
        let path = self.dir(TRIPLETS).join("triplets.csv");
        require(&path, "run `terrasonic triplets` first")?;
        let rows = io::read_csv(&path, &["anchor", "positive", "negative"]).map_err(stage("load"))?;
        rows.iter()
            .map(|r| {
                Ok(Triplet {
                    anchor: cell(r, 0, &path)?,
                    positive: cell(r, 1, &path)?,
                    negative: cell(r, 2, &path)?,
                })
            })
            .collect::<terrasonic::Result<_>>()
            .map_err(stage("load"))
    }

    pub fn train_encoder(&self) -> CliResult<()> {
        let inputs = self.matrix(SPECTROGRAM, "inputs.f64", "run `terrasonic spectrogram` first")?;
        let triplets = self.read_triplets()?;
        let mut cfg = self.config.encoder.clone();
        cfg.seed = self.config.stage_seed(streams::ENCODER);
        let out = train_encoder(&inputs, &triplets, &cfg).map_err(stage("train-encoder"))?;
        let dir = self.stage_dir(ENCODER)?;
        io::write_bytes(&dir.join("encoder.ckpt"), &checkpoint::encode(&[&out.encoder, &out.decoder])).map_err(stage("train-encoder"))?;
        let rows = out
            .trace
            .iter()
            .map(|e| [e.epoch.to_string(), e.triplet.to_string(), e.reconstruction.to_string(), e.combined.to_string()])
            .collect();
        write_rows("train-encoder", &dir.join("loss_trace.csv"), ["epoch", "Lt", "Lr", "L"], rows)?;
        let last = out.trace.last().map_or(f64::NAN, |e| e.combined);
        println!("train-encoder: {} epochs, final loss {last:.5}", cfg.epochs);
        Ok(())
    }

    pub fn cluster(&self) -> CliResult<()> {
        let c = &self.config;
        let inputs = self.matrix(SPECTROGRAM, "inputs.f64", "run `terrasonic spectrogram` first")?;
        let (encoder, _) = self.encoder()?;
        let emb = embed(&encoder, inputs.view(), c.exec).map_err(stage("cluster"))?;
        let mut params = KMeansParams::new(c.num_classes, c.stage_seed(streams::CLUSTER));
        params.restarts = c.kmeans_restarts;
        let a = kmeans(&emb, &params, c.exec).map_err(stage("cluster"))?;
        let dir = self.stage_dir(CLUSTER)?;
        io::write_matrix(&dir.join("embeddings.f64"), &emb).map_err(stage("cluster"))?;
        io::write_matrix(&dir.join("centroids.f64"), &a.centroids).map_err(stage("cluster"))?;
        write_rows("cluster", &dir.join("clusters.csv"), ["clip", "cluster"], labels_rows(&a.labels))?;
        if !a.empty_clusters.is_empty() {
            eprintln!("cluster: warning: empty clusters {:?}", a.empty_clusters);
        }
        println!("cluster: {} clips in {} clusters, inertia {:.4}", a.labels.len(), c.num_classes, a.inertia);
        Ok(())
    }

    pub fn label(&self, data: &Path) -> CliResult<()> {
        let ds = self.training(data)?;
        let (encoder, _) = self.encoder()?;
        let centroids = self.matrix(CLUSTER, "centroids.f64", "run `terrasonic cluster` first")?;
        let norm = self.normalizer()?;
        let labels = label_clips(&ds.clips, &self.config.stft, norm, &encoder, &centroids, self.config.exec).map_err(stage("label"))?;
        let dir = self.stage_dir(LABEL)?;
        write_rows("label", &dir.join("clip_labels.csv"), ["clip", "cluster"], labels_rows(&labels))?;
        println!("label: {} clips of {}", labels.len(), data.display());
        Ok(())
    }

    pub fn train_seg(&self, data: &Path, labels: Option<PathBuf>, extra_data: &[PathBuf], extra_labels: &[PathBuf]) -> CliResult<()> {
        if extra_data.len() != extra_labels.len() {
            return Err(usage("--extra-data and --extra-labels must be given in pairs"));
        }
        let c = &self.config;
        let labels = labels.unwrap_or_else(|| self.dir(CLUSTER).join("clusters.csv"));
        let sources: Vec<(PathBuf, PathBuf)> = std::iter::once((data.to_path_buf(), labels))
            .chain(extra_data.iter().cloned().zip(extra_labels.iter().cloned()))
            .collect();
        let mut weak = Vec::new();
        for (d, l) in &sources {
            let ds = self.training(d)?;
            require(l, "run `terrasonic cluster` or `terrasonic label` first")?;
            let clip_labels = read_labels(l, "train-seg")?;
            if let Some(bad) = clip_labels.iter().find(|&&x| x >= c.num_classes) {
                return Err(usage(format!("{}: label {bad} exceeds num_classes", l.display())));
            }
            let encoded: Vec<u8> = clip_labels.iter().map(|&x| encode_class(x)).collect();
            weak.extend(weak_label_views(&ds, &encoded, c.footprint_radius_m).map_err(stage("train-seg"))?);
        }
        let mut cfg = c.seg.clone();
        cfg.num_classes = c.num_classes;
        cfg.seed = c.stage_seed(streams::SEGMENT);
        let out = train_segmenter(&weak, &cfg).map_err(stage("train-seg"))?;
        let dir = self.stage_dir(SEG)?;
        io::write_bytes(&dir.join("segmenter.ckpt"), &out.model.to_bytes()).map_err(stage("train-seg"))?;
        let rows = out.trace.iter().enumerate().map(|(e, l)| [e.to_string(), l.to_string()]).collect();
        write_rows("train-seg", &dir.join("loss_trace.csv"), ["epoch", "loss"], rows)?;
        let rows = out.class_weights.iter().enumerate().map(|(k, w)| [k.to_string(), w.to_string()]).collect();
        write_rows("train-seg", &dir.join("class_weights.csv"), ["class", "weight"], rows)?;
        for (v, w) in weak.iter().enumerate() {
            io::write_mask(&dir.join("weak").join(format!("view_{v:05}.pgm")), &w.labels).map_err(stage("train-seg"))?;
        }
        println!("train-seg: {} weakly labeled views, final loss {:.5}", weak.len(), out.trace.last().copied().unwrap_or(f64::NAN));
        Ok(())
    }

    pub fn evaluate(&self, data: &Path) -> CliResult<()> {
        let c = &self.config;
        let k = c.num_classes;
        let truth = self.truth(data)?;
        let cpath = self.dir(CLUSTER).join("clusters.csv");
        require(&cpath, "run `terrasonic cluster` first")?;
        let clusters = read_labels(&cpath, "evaluate")?;
        if clusters.len() != truth.clip_classes.len() {
            return Err(usage(format!(
                "{} clusters for {} clips in {}",
                clusters.len(),
                truth.clip_classes.len(),
                data.display()
            )));
        }
        let triplets = self.read_triplets()?;
        let to_class = cluster_to_class(&clusters, &truth.clip_classes, k).map_err(stage("evaluate"))?;
        let mapped: Vec<usize> = clusters.iter().map(|&x| to_class[x]).collect();
        let mut rows: Vec<[String; 3]> = vec![
            [
                "clustering_accuracy".into(),
                String::new(),
                clustering_accuracy(&clusters, &truth.clip_classes).map_err(stage("evaluate"))?.to_string(),
            ],
            ["nmi".into(), String::new(), nmi(&truth.clip_classes, &clusters).map_err(stage("evaluate"))?.to_string()],
            [
                "triplet_correctness".into(),
                String::new(),
                triplet_correctness(&triplets, &truth.clip_classes).to_string(),
            ],
        ];
        for (cl, cls) in to_class.iter().enumerate() {
            rows.push(["cluster_to_class".into(), cl.to_string(), cls.to_string()]);
        }

        let seg_path = self.dir(SEG).join("segmenter.ckpt");
        let mut predictions = Vec::new();
        if seg_path.exists() {
            let model = self.segmenter()?;
            let ds = self.training(data)?;
            let codes: Vec<u8> = truth.clip_classes.iter().map(|&x| encode_class(x)).collect();
            let weak_truth: Vec<LabelMask> = weak_label_views(&ds, &codes, c.footprint_radius_m)
                .map_err(stage("evaluate"))?
                .into_iter()
                .map(|w| w.labels)
                .collect();
            let imgs: Vec<_> = ds.views.iter().map(|v| &v.image).collect();
            let eval = evaluate_segmentation(&model, &imgs, &to_class, &truth.dense, &weak_truth, c.exec).map_err(stage("evaluate"))?;
            score_rows("iou", &eval.iou, &mut rows);
            score_rows("recall", &eval.recall, &mut rows);
            predictions = eval.predictions;
        } else {
            eprintln!("evaluate: no segmenter checkpoint, scoring clustering only");
        }

        let dir = self.stage_dir(EVALUATE)?;
        let summary: Vec<String> = rows
            .iter()
            .filter(|r| r[1].is_empty())
            .map(|r| format!("{} {:.4}", r[0], r[2].parse::<f64>().unwrap_or(f64::NAN)))
            .collect();
        write_rows("evaluate", &dir.join("metrics.csv"), ["metric", "class", "value"], rows)?;
        let m = confusion(&truth.clip_classes, &mapped, k).map_err(stage("evaluate"))?;
        let header: Vec<String> = std::iter::once("truth".to_string()).chain((0..k).map(|p| format!("pred_{p}"))).collect();
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows = m
            .rows()
            .into_iter()
            .enumerate()
            .map(|(t, r)| std::iter::once(t.to_string()).chain(r.iter().map(|v| v.to_string())).collect::<Vec<_>>());
        io::write_csv(&dir.join("confusion.csv"), &header_refs, rows).map_err(stage("evaluate"))?;
        for (v, p) in predictions.iter().enumerate() {
            io::write_mask(&dir.join("predictions").join(format!("view_{v:05}.pgm")), p).map_err(stage("evaluate"))?;
        }
        println!("evaluate: {}", summary.join(", "));
        Ok(())
    }

    pub fn map(&self, data: &Path, cell_m: f64) -> CliResult<()> {
        if !(cell_m > 0.0) || !cell_m.is_finite() {
            return Err(usage("--cell-m must be positive"));
        }
        let model = self.segmenter()?;
        let dir_train = data.join("train");
        let ds = self.training(data)?;
        let manifest = io::read_kv(&dir_train.join("meta/manifest")).map_err(stage("map"))?;
        let extent = |k: &str| {
            manifest
                .get(k)
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| usage(format!("manifest lacks {k}")))
        };
        let (w_m, h_m) = (extent("world_width_m")?, extent("world_height_m")?);
        let (w, h) = ((w_m / cell_m).ceil() as usize, (h_m / cell_m).ceil() as usize);
        let mut map = SemanticMap::new(w, h, cell_m, model.num_classes()).map_err(stage("map"))?;
        let (mut voted, mut clipped) = (0, 0);
        for (v, view) in ds.views.iter().enumerate() {
            let mask = predict_mask(&view.image, &model, self.config.exec).map_err(stage("map"))?.mask;
            let camera = ds.camera(v).map_err(stage("map"))?;
            let r = map.fuse_observation(&mask, &view.frame_pose, &camera).map_err(stage("map"))?;
            voted += r.voted;
            clipped += r.clipped;
        }
        let dir = self.stage_dir(MAP)?;
        let raw: Vec<u8> = (0..h)
            .flat_map(|r| (0..w).map(move |c| (r, c)))
            .map(|(r, c)| map.class_at(r, c).map_or(VOID, |k| k as u8))
            .collect();
        io::write_pgm(&dir.join("map.pgm"), w, h, &raw).map_err(stage("map"))?;
        let kv: BTreeMap<String, String> = [
            ("width", w.to_string()),
            ("height", h.to_string()),
            ("meters_per_cell", cell_m.to_string()),
            ("num_classes", map.num_classes.to_string()),
            ("voted", voted.to_string()),
            ("clipped", clipped.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        io::write_bytes(&dir.join("map.meta"), io::format_kv(&kv).as_bytes()).map_err(stage("map"))?;
        let observed = raw.iter().filter(|&&b| b != VOID).count();
        println!("map: {w}x{h} cells, {observed} observed, {voted} votes, {clipped} clipped");
        Ok(())
    }

    fn read_map(&self) -> CliResult<SemanticMap> {
        let dir = self.dir(MAP);
        require(&dir.join("map.pgm"), "run `terrasonic map` first")?;
        let meta = io::read_kv(&dir.join("map.meta")).map_err(stage("load"))?;
        let get = |k: &str| meta.get(k).cloned().ok_or_else(|| usage(format!("map.meta lacks {k}")));
        let parse_err = |k: &str| usage(format!("map.meta: bad {k}"));
        let k: usize = get("num_classes")?.parse().map_err(|_| parse_err("num_classes"))?;
        let mpc: f64 = get("meters_per_cell")?.parse().map_err(|_| parse_err("meters_per_cell"))?;
        let (w, h, raw) = io::read_pgm(&dir.join("map.pgm")).map_err(stage("load"))?;
        let mut map = SemanticMap::new(w, h, mpc, k).map_err(stage("load"))?;
        for (i, &b) in raw.iter().enumerate() {
            if b != VOID {
                let c = b as usize;
                if c >= k {
                    return Err(usage(format!("map.pgm holds class {c} >= {k}")));
                }
                map.votes[i * k + c] = 1;
            }
        }
        Ok(map)
    }

    pub fn plan(&self, costs: Option<&Path>, start: (usize, usize), goal: (usize, usize)) -> CliResult<()> {
        let map = self.read_map()?;
        let table: BTreeMap<usize, f64> = match costs {
            Some(p) => {
                require(p, "cost table")?;
                let kv = io::read_kv(p).map_err(stage("plan"))?;
                kv.iter()
                    .map(|(k, v)| {
                        let class = k.parse::<usize>().map_err(|_| usage(format!("{}: bad class id {k:?}", p.display())))?;
                        let cost = v.parse::<f64>().map_err(|_| usage(format!("{}: bad cost {v:?}", p.display())))?;
                        Ok((class, cost))
                    })
                    .collect::<CliResult<_>>()?
            }
            None => (0..map.num_classes).map(|k| (k, 1.0)).collect(),
        };
        let terrain = assign_costs(&map, &table, self.config.unknown_cost).map_err(stage("plan"))?;
        let uniform = CostMap::uniform(map.width, map.height, 1.0);
        let no_path = || usage(format!("no route from {start:?} to {goal:?}"));
        let u = plan(&uniform, start, goal).map_err(stage("plan"))?.ok_or_else(no_path)?;
        let t = plan(&terrain, start, goal).map_err(stage("plan"))?.ok_or_else(no_path)?;
        let u_cost = path_cost(&terrain, &u.cells);
        let dir = self.stage_dir(PLAN)?;
        for (name, traj) in [("uniform.csv", &u), ("terrain.csv", &t)] {
            let rows = traj.cells.iter().map(|(r, c)| [r.to_string(), c.to_string()]).collect();
            write_rows("plan", &dir.join(name), ["row", "col"], rows)?;
        }
        let rows = vec![
            ["uniform_path_cells".to_string(), u.cells.len().to_string()],
            ["uniform_path_cost".to_string(), u_cost.to_string()],
            ["terrain_path_cells".to_string(), t.cells.len().to_string()],
            ["terrain_path_cost".to_string(), t.cost.to_string()],
        ];
        write_rows("plan", &dir.join("costs.csv"), ["metric", "value"], rows)?;
        println!(
            "plan: uniform route {} cells costs {u_cost:.3}; terrain-aware route {} cells costs {:.3}",
            u.cells.len(),
            t.cells.len(),
            t.cost
        );
        Ok(())
    }

    pub fn experiment(&self, name: Experiment, data: &Path) -> CliResult<()> {
        let ds = self.training(data)?;
        let truth = self.truth(data)?;
        let base = &self.config;
        let points: Vec<(String, PipelineConfig)> = match name {
            Experiment::Snr => base
                .snr_grid
                .iter()
                .map(|&v| (v.to_string(), PipelineConfig { snr_db: Some(v), ..base.clone() }))
                .collect(),
            Experiment::TripletCount => base
                .triplet_count_grid
                .iter()
                .map(|&v| (v.to_string(), PipelineConfig { triplet_count: v, ..base.clone() }))
                .collect(),
            Experiment::Sampling => base
                .sampling_grid
                .iter()
                .map(|&m| (m.to_string(), PipelineConfig { mechanism: m, ..base.clone() }))
                .collect(),
            Experiment::CorrectRatio => base
                .correct_ratio_grid
                .iter()
                .map(|&v| (v.to_string(), PipelineConfig { correct_ratio: Some(v), ..base.clone() }))
                .collect(),
        };
        let dir = self.stage_dir(EXPERIMENT)?;
        let mut rows = Vec::new();
        for (value, cfg) in &points {
            let mut accs = Vec::new();
            for &seed in &base.experiment_seeds {
                let cfg = PipelineConfig { seed, ..cfg.clone() };
                let r = run(&ds, &truth, &cfg, RunOptions { segment: false }).map_err(stage("experiment"))?;
                accs.push(r.clustering_accuracy);
                rows.push([value.clone(), seed.to_string(), r.clustering_accuracy.to_string(), r.nmi.to_string()]);
            }
            let mean = accs.iter().sum::<f64>() / accs.len().max(1) as f64;
            println!("experiment {name:?}: {value} -> mean accuracy {mean:.2}%");
        }
        let file = match name {
            Experiment::Snr => "snr.csv",
            Experiment::TripletCount => "triplet_count.csv",
            Experiment::Sampling => "sampling.csv",
            Experiment::CorrectRatio => "correct_ratio.csv",
        };
        write_rows("experiment", &dir.join(file), ["variable", "seed", "clustering_accuracy", "nmi"], rows)
    }

    pub fn pipeline(&self, data: &Path) -> CliResult<()> {
        self.spectrogram(data)?;
        self.features(data)?;
        self.triplets(data)?;
        self.train_encoder()?;
        self.cluster()?;
        self.train_seg(data, None, &[], &[])?;
        self.evaluate(data)
    }
}
