use ndarray::{Array2, ArrayView2};
use rand::seq::index::sample;
use rand::seq::SliceRandom;

use super::loss::{class_weights, softmax_rows, weighted_ce_logits};
use crate::exec::Exec;
use crate::geometry::WeakLabelImage;
use crate::imagery::{decode_label, encode_class, LabelMask, RgbImage, VOID};
use crate::metric::{Activation, Mlp, Optimizer, OptimizerKind};
use crate::triplets::{descriptor_window, FEATURE_DIM};
use crate::{checkpoint, seed, Error, Result};

/// Side of the square neighbourhood each pixel descriptor is computed on.
pub const NEIGHBORHOOD: usize = 9;

/// Descriptor of the edge-clamped neighbourhood around `(x, y)`; zeros if
/// every neighbour is void.
pub fn pixel_feature(img: &RgbImage, x: usize, y: usize) -> [f64; FEATURE_DIM] {
    let h = (NEIGHBORHOOD / 2) as isize;
    descriptor_window(img, x as isize - h, y as isize - h, NEIGHBORHOOD, NEIGHBORHOOD).unwrap_or([0.0; FEATURE_DIM])
}

/// Descriptors of all pixels, row-major, one row per pixel.
pub fn pixel_features(img: &RgbImage, exec: Exec) -> Array2<f64> {
    let rows = exec.map_range(img.height, |y| {
        (0..img.width).flat_map(|x| pixel_feature(img, x, y)).collect::<Vec<f64>>()
    });
    Array2::from_shape_vec((img.width * img.height, FEATURE_DIM), rows.concat()).unwrap()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegConfig {
    pub num_classes: usize,
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Labeled pixels sampled for training (all when fewer).
    pub max_pixels: usize,
    pub seed: u64,
}

impl Default for SegConfig {
    fn default() -> Self {
        Self {
            num_classes: 5,
            hidden: 32,
            epochs: 30,
            batch_size: 256,
            learning_rate: 0.05,
            momentum: 0.9,
            max_pixels: 20_000,
            seed: 0,
        }
    }
}

/// Feature standardization followed by a one-hidden-layer softmax
/// classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct SegModel {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub mlp: Mlp,
}

impl SegModel {
    pub fn num_classes(&self) -> usize {
        self.mlp.output_dim()
    }

    fn standardize(&self, f: &mut Array2<f64>) {
        for mut row in f.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - self.mean[j]) / self.scale[j];
            }
        }
    }

    /// Standardization is stored as a linear layer in front of the MLP.
    pub fn to_bytes(&self) -> Vec<u8> {
        let d = self.mean.len();
        let mut theta = vec![0.0; d * d + d];
        for j in 0..d {
            theta[j * d + j] = 1.0 / self.scale[j];
            theta[d * d + j] = -self.mean[j] / self.scale[j];
        }
        let pre = Mlp::from_parts(vec![d, d], vec![Activation::Linear], theta).unwrap();
        checkpoint::encode(&[&pre, &self.mlp])
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let nets = checkpoint::decode(bytes)?;
        let [pre, mlp]: [Mlp; 2] = nets
            .try_into()
            .map_err(|_| Error::input("segmenter checkpoint must hold two networks"))?;
        let d = pre.input_dim();
        if pre.output_dim() != d || mlp.input_dim() != d {
            return Err(Error::input("segmenter checkpoint shapes are inconsistent"));
        }
        let w = pre.weights(0);
        let b = pre.biases(0);
        let scale: Vec<f64> = (0..d).map(|j| 1.0 / w[(j, j)]).collect();
        let mean = (0..d).map(|j| -b[j] * scale[j]).collect();
        Ok(SegModel { mean, scale, mlp })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegTrainOutput {
    pub model: SegModel,
    pub class_weights: Vec<f64>,
    /// Mean weighted cross-entropy per epoch; entry 0 is the initial model.
    pub trace: Vec<f64>,
}

/// Labeled pixel counts per class over a set of weak label images.
pub fn labeled_histogram(images: &[WeakLabelImage], k: usize) -> Result<Vec<u64>> {
    let mut h = vec![0u64; k];
    for img in images {
        for &v in &img.labels.data {
            if let Some(c) = decode_label(v) {
                if c >= k {
                    return Err(Error::input(format!("label {c} out of range for {k} classes")));
                }
                h[c] += 1;
            }
        }
    }
    Ok(h)
}

/// Weighted cross-entropy of the classifier on standardized features and
/// its gradient with respect to the MLP parameters.
pub fn seg_loss_and_grad(mlp: &Mlp, x: ArrayView2<f64>, labels: &[Option<usize>], weights: &[f64]) -> Result<(f64, Vec<f64>)> {
    let t = mlp.forward_trace(x)?;
    let ce = weighted_ce_logits(t.output().view(), labels, weights)?;
    let mut g = vec![0.0; mlp.num_params()];
    mlp.backward(&t, ce.grad, &mut g, false);
    Ok((ce.value, g))
}

/// Trains the per-pixel classifier on the labeled pixels of weak label
/// images (background and void pixels are never sampled).
pub fn train_segmenter(images: &[WeakLabelImage], config: &SegConfig) -> Result<SegTrainOutput> {
    let k = config.num_classes;
    if k == 0 || config.batch_size == 0 || config.hidden == 0 {
        return Err(Error::config("segmenter needs positive class count, batch size and width"));
    }
    let hist = labeled_histogram(images, k)?;
    let weights = class_weights(&hist)?;

    let mut pool: Vec<(usize, usize, usize)> = Vec::new();
    for (i, img) in images.iter().enumerate() {
        for (p, &v) in img.labels.data.iter().enumerate() {
            if decode_label(v).is_some() && !img.view.image.is_void(p % img.labels.width, p / img.labels.width) {
                pool.push((i, p % img.labels.width, p / img.labels.width));
            }
        }
    }
    let mut rng = seed::rng(config.seed, 0x5E6);
    if pool.len() > config.max_pixels {
        let mut idx = sample(&mut rng, pool.len(), config.max_pixels).into_vec();
        idx.sort_unstable();
        pool = idx.into_iter().map(|i| pool[i]).collect();
    }
    let n = pool.len();
    let mut x = Array2::zeros((n, FEATURE_DIM));
    let mut labels = Vec::with_capacity(n);
    for (r, &(i, px, py)) in pool.iter().enumerate() {
        let f = pixel_feature(&images[i].view.image, px, py);
        x.row_mut(r).assign(&ndarray::ArrayView1::from(&f[..]));
        labels.push(decode_label(images[i].labels.get(px, py)));
    }

    let mut mean = vec![0.0; FEATURE_DIM];
    let mut scale = vec![1.0; FEATURE_DIM];
    if n > 0 {
        for j in 0..FEATURE_DIM {
            let col = x.column(j);
            let m = col.sum() / n as f64;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
            mean[j] = m;
            scale[j] = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
        }
    }
    let mut mlp = Mlp::new(&[FEATURE_DIM, config.hidden, k], &[Activation::Tanh, Activation::Linear], &mut rng)?;
    let (w, b) = mlp.layer_mut(1);
    w.fill(0.0);
    b.fill(0.0);
    let mut model = SegModel { mean, scale, mlp };
    model.standardize(&mut x);

    let mut trace = vec![seg_loss_and_grad(&model.mlp, x.view(), &labels, &weights)?.0];
    let mut opt = Optimizer::new(OptimizerKind::SgdMomentum, config.learning_rate, config.momentum, model.mlp.num_params())?;
    let mut order: Vec<usize> = (0..n).collect();
    let mut last_good = model.clone();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut seed::rng(config.seed, 0x5E60_0000 + epoch as u64));
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let xb = x.select(ndarray::Axis(0), batch);
            let lb: Vec<Option<usize>> = batch.iter().map(|&i| labels[i]).collect();
            let (l, g) = seg_loss_and_grad(&model.mlp, xb.view(), &lb, &weights)?;
            if !l.is_finite() {
                return Err(Error::Diverged {
                    stage: "train-seg",
                    epoch,
                    checkpoint: last_good.to_bytes(),
                });
            }
            total += l * batch.len() as f64;
            opt.step(&mut model.mlp.theta, &g);
        }
        trace.push(total / n.max(1) as f64);
        last_good = model.clone();
    }
    Ok(SegTrainOutput {
        model,
        class_weights: weights,
        trace,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// Encoded classes; void where the image is void.
    pub mask: LabelMask,
    /// Per-pixel class probabilities, row-major pixels.
    pub probs: Array2<f64>,
}

/// Dense per-pixel prediction; border pixels use edge-clamped
/// neighbourhoods.
pub fn predict_mask(image: &RgbImage, model: &SegModel, exec: Exec) -> Result<Prediction> {
    if image.width == 0 || image.height == 0 {
        return Err(Error::input("empty image"));
    }
    let mut f = pixel_features(image, exec);
    model.standardize(&mut f);
    let logits = model.mlp.forward_batched(f.view(), 1024, exec)?;
    let probs = softmax_rows(logits.view());
    let mut mask = LabelMask::new(image.width, image.height, VOID);
    for (p, row) in probs.rows().into_iter().enumerate() {
        let (x, y) = (p % image.width, p / image.width);
        if image.is_void(x, y) {
            continue;
        }
        let mut best = 0;
        for (c, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = c;
            }
        }
        mask.set(x, y, encode_class(best));
    }
    Ok(Prediction { mask, probs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BirdsEyeView, Pose};
    use crate::gradcheck::grad_check;

    fn striped(w: usize, h: usize, colors: &[[u8; 3]]) -> RgbImage {
        let mut img = RgbImage::new(w, h);
        let band = w / colors.len();
        for y in 0..h {
            for x in 0..w {
                img.set_pixel(x, y, colors[(x / band).min(colors.len() - 1)]);
            }
        }
        img
    }

    fn weak(img: RgbImage, label: impl Fn(usize, usize) -> u8) -> WeakLabelImage {
        let mut labels = LabelMask::new(img.width, img.height, 0);
        for y in 0..img.height {
            for x in 0..img.width {
                labels.set(x, y, label(x, y));
            }
        }
        let n = img.width * img.height;
        WeakLabelImage {
            view: BirdsEyeView { image: img, frame_pose: Pose::planar(0.0, 0.0, 0.0, 0.0) },
            labels,
            provenance: vec![None; n],
            samples: vec![],
        }
    }

    fn cfg(k: usize) -> SegConfig {
        SegConfig { num_classes: k, epochs: 40, batch_size: 64, learning_rate: 0.05, seed: 2, ..Default::default() }
    }

    #[test]
    fn separable_colors_are_learned() {
        let img = striped(60, 20, &[[30, 30, 30], [200, 40, 40], [40, 200, 40]]);
        // labels only on rows 5..15, background elsewhere
        let w = weak(img.clone(), |x, y| if (5..15).contains(&y) { encode_class(x / 20) } else { 0 });
        let out = train_segmenter(&[w.clone()], &cfg(3)).unwrap();
        let pred = predict_mask(&img, &out.model, Exec::Sequential).unwrap();
        let mut hit = 0;
        let mut total = 0;
        for (p, t) in pred.mask.data.iter().zip(&w.labels.data) {
            if *t != 0 {
                total += 1;
                hit += usize::from(p == t);
            }
        }
        assert!(hit as f64 / total as f64 >= 0.99, "{hit}/{total}");
        for r in pred.probs.rows() {
            assert!((r.sum() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_epochs_returns_initial_model() {
        let img = striped(20, 10, &[[0, 0, 0], [255, 255, 255]]);
        let w = weak(img, |x, _| encode_class(x / 10));
        let a = train_segmenter(&[w.clone()], &SegConfig { epochs: 0, ..cfg(2) }).unwrap();
        assert_eq!(a.trace.len(), 1);
        let b = train_segmenter(&[w], &SegConfig { epochs: 0, ..cfg(2) }).unwrap();
        assert_eq!(a.model, b.model);
        assert!(a.model.mlp.weights(1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn missing_class_is_config_error() {
        let img = striped(20, 10, &[[0, 0, 0], [255, 255, 255]]);
        let w = weak(img, |x, _| encode_class(x / 10));
        assert!(matches!(train_segmenter(&[w], &cfg(3)), Err(Error::Config(_))));
    }

    #[test]
    fn constant_image_predicts_trained_class() {
        let img = striped(30, 10, &[[20, 20, 20], [220, 220, 220]]);
        let w = weak(img, |x, _| encode_class(x / 15));
        let out = train_segmenter(&[w], &cfg(2)).unwrap();
        let flat = striped(12, 12, &[[220, 220, 220]]);
        let pred = predict_mask(&flat, &out.model, Exec::Sequential).unwrap();
        assert!(pred.mask.data.iter().all(|&v| v == encode_class(1)));
    }

    #[test]
    fn small_lr_full_batch_is_monotone() {
        let img = striped(30, 10, &[[20, 90, 20], [120, 120, 220], [200, 30, 30]]);
        let w = weak(img, |x, _| encode_class(x / 10));
        let c = SegConfig { learning_rate: 1e-4, momentum: 0.0, batch_size: 10_000, epochs: 20, ..cfg(3) };
        let out = train_segmenter(&[w], &c).unwrap();
        for p in out.trace.windows(2) {
            assert!(p[1] <= p[0], "{:?}", out.trace);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = seed::rng(5, 0);
        let mlp = Mlp::new(&[FEATURE_DIM, 32, 5], &[Activation::Tanh, Activation::Linear], &mut rng).unwrap();
        let x = Array2::from_shape_fn((40, FEATURE_DIM), |(i, j)| ((i * 13 + j * 7) % 11) as f64 / 5.0 - 1.0);
        let labels: Vec<Option<usize>> = (0..40).map(|i| (i % 3 != 0).then_some(i % 5)).collect();
        let w = [0.7, 1.1, 1.3, 0.9, 1.0];
        let (_, g) = seg_loss_and_grad(&mlp, x.view(), &labels, &w).unwrap();
        let f = |t: &[f64]| {
            let m = Mlp::from_parts(mlp.sizes().to_vec(), mlp.activations().to_vec(), t.to_vec()).unwrap();
            seg_loss_and_grad(&m, x.view(), &labels, &w).unwrap().0
        };
        let r = grad_check(&mlp.theta, &g, f, 1e-5, 400, 3);
        assert!(r.passes(1e-6), "{r:?}");
    }

    #[test]
    fn checkpoint_round_trip() {
        let img = striped(20, 10, &[[0, 0, 0], [255, 255, 255]]);
        let w = weak(img, |x, _| encode_class(x / 10));
        let m = train_segmenter(&[w], &SegConfig { epochs: 2, ..cfg(2) }).unwrap().model;
        let back = SegModel::from_bytes(&m.to_bytes()).unwrap();
        assert_eq!(back.mlp, m.mlp);
        for j in 0..FEATURE_DIM {
            assert!((back.mean[j] - m.mean[j]).abs() <= 1e-12 * m.mean[j].abs().max(1.0));
            assert!((back.scale[j] - m.scale[j]).abs() <= 1e-12 * m.scale[j]);
        }
    }
}
