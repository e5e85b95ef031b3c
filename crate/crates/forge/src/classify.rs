//! Built-in classifier: multinomial logistic regression over downsampled
//! fused images, evaluation metrics, and a small binary model format.
//!
//! The model is intentionally simple — every gradient is checkable against
//! finite differences, and training is bit-for-bit reproducible from a seed.

use crate::fuse::lanczos_resize;
use crate::raster::RgbImage;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ClassifyError {
    #[error("InvalidSize: {0}")]
    InvalidSize(String),
    #[error("DegenerateDataset: {0}")]
    DegenerateDataset(String),
    #[error("EmptyEvalSet: no records to evaluate")]
    EmptyEvalSet,
    #[error("ModelFormat: {0}")]
    ModelFormat(String),
}

/// Training hyperparameters (the RNG seed travels separately).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub epochs: u32,
    pub l2: f64,
    pub batch_size: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 100,
            l2: 1e-4,
            batch_size: 32,
        }
    }
}

/// Multinomial softmax classifier with per-class weight rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxModel {
    /// Label names, sorted; index = class id.
    pub classes: Vec<String>,
    pub n_features: usize,
    /// `classes.len() × n_features`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub seed: u64,
    pub hyper: Hyperparams,
}

/// Flatten a fused image into `3·d·d` intensities in [0, 1]:
/// each channel resized to `d`×`d`, concatenated R then G then B.
pub fn featurize(img: &RgbImage, d: usize) -> Result<Vec<f64>, ClassifyError> {
    if img.width() != img.height() {
        return Err(ClassifyError::InvalidSize(format!(
            "image must be square, got {}x{}",
            img.width(),
            img.height()
        )));
    }
    if d == 0 {
        return Err(ClassifyError::InvalidSize("downsample size is zero".into()));
    }
    let mut out = Vec::with_capacity(3 * d * d);
    for c in 0..3 {
        let plane = img.channel(c);
        let small = lanczos_resize(&plane, d, d)
            .map_err(|e| ClassifyError::InvalidSize(e.to_string()))?;
        out.extend(small.pixels().iter().map(|&p| p as f64 / 255.0));
    }
    Ok(out)
}

impl SoftmaxModel {
    fn zeroed(classes: Vec<String>, n_features: usize, seed: u64, hyper: Hyperparams) -> Self {
        let n_classes = classes.len();
        Self {
            classes,
            n_features,
            weights: vec![0.0; n_classes * n_features],
            bias: vec![0.0; n_classes],
            seed,
            hyper,
        }
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let mut z = self.bias.clone();
        for (c, zc) in z.iter_mut().enumerate() {
            let row = &self.weights[c * self.n_features..(c + 1) * self.n_features];
            *zc += row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
        z
    }

    /// Predicted class index; ties resolve to the lowest index.
    pub fn predict(&self, x: &[f64]) -> usize {
        let z = self.logits(x);
        let mut best = 0;
        for (i, &v) in z.iter().enumerate().skip(1) {
            if v > z[best] {
                best = i;
            }
        }
        best
    }

    pub fn predict_label(&self, x: &[f64]) -> &str {
        &self.classes[self.predict(x)]
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == label)
    }
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = z.iter().map(|&v| (v - m).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

fn log_softmax_at(z: &[f64], idx: usize) -> f64 {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|&v| (v - m).exp()).sum::<f64>().ln();
    z[idx] - lse
}

/// Mean cross-entropy over `batch` plus the L2 penalty `l2/2 · ||W||²`.
fn objective(model: &SoftmaxModel, batch: &[(&[f64], usize)], l2: f64) -> f64 {
    let ce: f64 = batch
        .iter()
        .map(|(x, y)| -log_softmax_at(&model.logits(x), *y))
        .sum::<f64>()
        / batch.len() as f64;
    let penalty = 0.5 * l2 * model.weights.iter().map(|w| w * w).sum::<f64>();
    ce + penalty
}

/// Analytic gradient of [`objective`] with respect to all parameters.
/// Returns (weight gradient, bias gradient).
fn gradients(model: &SoftmaxModel, batch: &[(&[f64], usize)], l2: f64) -> (Vec<f64>, Vec<f64>) {
    let n_classes = model.classes.len();
    let nf = model.n_features;
    let mut gw = vec![0.0; n_classes * nf];
    let mut gb = vec![0.0; n_classes];
    let inv_n = 1.0 / batch.len() as f64;
    for (x, y) in batch {
        let p = softmax(&model.logits(x));
        for c in 0..n_classes {
            let delta = (p[c] - if c == *y { 1.0 } else { 0.0 }) * inv_n;
            gb[c] += delta;
            let row = &mut gw[c * nf..(c + 1) * nf];
            for (g, v) in row.iter_mut().zip(*x) {
                *g += delta * v;
            }
        }
    }
    for (g, w) in gw.iter_mut().zip(&model.weights) {
        *g += l2 * w;
    }
    (gw, gb)
}

pub struct TrainOutcome {
    pub model: SoftmaxModel,
    /// Full-dataset objective after each epoch.
    pub loss_trace: Vec<f64>,
}

/// Train from labelled feature vectors. Classes are the sorted distinct
/// labels; weights start at zero; the per-epoch shuffle comes from a
/// ChaCha20 stream seeded with `seed`, so training is fully reproducible.
pub fn train(
    samples: &[(Vec<f64>, String)],
    hyper: Hyperparams,
    seed: u64,
) -> Result<TrainOutcome, ClassifyError> {
    if samples.is_empty() {
        return Err(ClassifyError::DegenerateDataset("no samples".into()));
    }
    let n_features = samples[0].0.len();
    if n_features == 0 {
        return Err(ClassifyError::DegenerateDataset("empty feature vectors".into()));
    }
    for (x, label) in samples {
        if x.len() != n_features {
            return Err(ClassifyError::DegenerateDataset(format!(
                "feature length mismatch for label '{label}'"
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(ClassifyError::DegenerateDataset(
                "non-finite feature value".into(),
            ));
        }
    }
    let mut classes: Vec<String> = samples.iter().map(|(_, l)| l.clone()).collect();
    classes.sort();
    classes.dedup();
    if classes.len() < 2 {
        return Err(ClassifyError::DegenerateDataset(
            "need at least two classes".into(),
        ));
    }
    if hyper.batch_size == 0 {
        return Err(ClassifyError::DegenerateDataset("batch_size is zero".into()));
    }

    let class_of: BTreeMap<&str, usize> = classes
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let encoded: Vec<(&[f64], usize)> = samples
        .iter()
        .map(|(x, l)| (x.as_slice(), class_of[l.as_str()]))
        .collect();

    let mut model = SoftmaxModel::zeroed(classes, n_features, seed, hyper);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..encoded.len()).collect();
    let mut loss_trace = Vec::with_capacity(hyper.epochs as usize);

    for _ in 0..hyper.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(hyper.batch_size) {
            let batch: Vec<(&[f64], usize)> = chunk.iter().map(|&i| encoded[i]).collect();
            let (gw, gb) = gradients(&model, &batch, hyper.l2);
            for (w, g) in model.weights.iter_mut().zip(&gw) {
                *w -= hyper.learning_rate * g;
            }
            for (b, g) in model.bias.iter_mut().zip(&gb) {
                *b -= hyper.learning_rate * g;
            }
        }
        loss_trace.push(objective(&model, &encoded, hyper.l2));
    }
    Ok(TrainOutcome { model, loss_trace })
}

/// Compare analytic gradients against central finite differences
/// (h = 1e-5) on `sample_count` randomly chosen parameters, at least 100
/// when the model has that many. Returns the maximum relative error.
pub fn gradient_check(model: &SoftmaxModel, batch: &[(Vec<f64>, usize)], seed: u64) -> f64 {
    assert!(!batch.is_empty(), "gradient check needs a batch");
    let h = 1e-5;
    let l2 = model.hyper.l2;
    let borrowed: Vec<(&[f64], usize)> = batch.iter().map(|(x, y)| (x.as_slice(), *y)).collect();
    let (gw, gb) = gradients(model, &borrowed, l2);

    let total = model.weights.len() + model.bias.len();
    let sample_count = total.min(100.max(total / 10));
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut picks: Vec<usize> = if total <= sample_count {
        (0..total).collect()
    } else {
        (0..sample_count)
            .map(|_| rng.random_range(0..total))
            .collect()
    };
    picks.sort_unstable();
    picks.dedup();

    fn param_mut(m: &mut SoftmaxModel, idx: usize) -> &mut f64 {
        let wlen = m.weights.len();
        if idx < wlen {
            &mut m.weights[idx]
        } else {
            &mut m.bias[idx - wlen]
        }
    }

    let mut worst = 0.0f64;
    let mut probe = model.clone();
    for idx in picks {
        let analytic = if idx < model.weights.len() {
            gw[idx]
        } else {
            gb[idx - model.weights.len()]
        };
        let original = *param_mut(&mut probe, idx);
        *param_mut(&mut probe, idx) = original + h;
        let plus = objective(&probe, &borrowed, l2);
        *param_mut(&mut probe, idx) = original - h;
        let minus = objective(&probe, &borrowed, l2);
        *param_mut(&mut probe, idx) = original;
        let numeric = (plus - minus) / (2.0 * h);
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-4);
        worst = worst.max(rel);
    }
    worst
}

/// Confusion counts and the four derived metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Derive accuracy/precision/recall/F1 from confusion counts, with the
/// zero-denominator conventions: precision and recall fall back to 0 when
/// their denominator is 0, F1 to 0 when precision+recall is 0.
pub fn metrics_from_counts(tp: u64, tn: u64, fp: u64, fn_: u64) -> Metrics {
    let total = tp + tn + fp + fn_;
    let accuracy = if total == 0 {
        0.0
    } else {
        (tp + tn) as f64 / total as f64
    };
    let precision = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Metrics {
        tp,
        tn,
        fp,
        fn_,
        accuracy,
        precision,
        recall,
        f1,
    }
}

/// Binary evaluation: `positive_label` is the positive class, everything
/// else counts as negative.
pub fn evaluate_binary(
    model: &SoftmaxModel,
    records: &[(Vec<f64>, String)],
    positive_label: &str,
) -> Result<Metrics, ClassifyError> {
    if records.is_empty() {
        return Err(ClassifyError::EmptyEvalSet);
    }
    let (mut tp, mut tn, mut fp, mut fn_) = (0u64, 0u64, 0u64, 0u64);
    for (x, actual) in records {
        let predicted = model.predict_label(x);
        match (predicted == positive_label, actual == positive_label) {
            (true, true) => tp += 1,
            (false, false) => tn += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
        }
    }
    Ok(metrics_from_counts(tp, tn, fp, fn_))
}

/// Unweighted and support-weighted averages over per-class metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AveragedMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone)]
pub struct MulticlassReport {
    /// Plain fraction of records whose argmax class matches the label.
    pub accuracy: f64,
    /// One-vs-rest metrics per class, in model class order.
    pub per_class: Vec<(String, Metrics)>,
    pub macro_avg: AveragedMetrics,
    pub weighted_avg: AveragedMetrics,
}

/// One-vs-rest evaluation across all model classes.
pub fn evaluate_multiclass(
    model: &SoftmaxModel,
    records: &[(Vec<f64>, String)],
) -> Result<MulticlassReport, ClassifyError> {
    if records.is_empty() {
        return Err(ClassifyError::EmptyEvalSet);
    }
    let predictions: Vec<&str> = records.iter().map(|(x, _)| model.predict_label(x)).collect();
    let correct = predictions
        .iter()
        .zip(records)
        .filter(|(p, (_, a))| **p == *a)
        .count();
    let accuracy = correct as f64 / records.len() as f64;

    let mut per_class = Vec::with_capacity(model.classes.len());
    let (mut macro_p, mut macro_r, mut macro_f) = (0.0, 0.0, 0.0);
    let (mut wp, mut wr, mut wf) = (0.0, 0.0, 0.0);
    let mut total_support = 0u64;
    for class in &model.classes {
        let (mut tp, mut tn, mut fp, mut fn_) = (0u64, 0u64, 0u64, 0u64);
        for (pred, (_, actual)) in predictions.iter().zip(records) {
            match (*pred == *class, actual == class) {
                (true, true) => tp += 1,
                (false, false) => tn += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
            }
        }
        let m = metrics_from_counts(tp, tn, fp, fn_);
        let support = tp + fn_;
        macro_p += m.precision;
        macro_r += m.recall;
        macro_f += m.f1;
        wp += m.precision * support as f64;
        wr += m.recall * support as f64;
        wf += m.f1 * support as f64;
        total_support += support;
        per_class.push((class.clone(), m));
    }
    let k = model.classes.len() as f64;
    let ts = (total_support as f64).max(1.0);
    Ok(MulticlassReport {
        accuracy,
        per_class,
        macro_avg: AveragedMetrics {
            precision: macro_p / k,
            recall: macro_r / k,
            f1: macro_f / k,
        },
        weighted_avg: AveragedMetrics {
            precision: wp / ts,
            recall: wr / ts,
            f1: wf / ts,
        },
    })
}

const MODEL_MAGIC: &[u8; 4] = b"MLF1";

/// Serialize a model to the flat `MLF1` binary layout.
pub fn encode_model(m: &SoftmaxModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&(m.classes.len() as u32).to_le_bytes());
    for c in &m.classes {
        out.extend_from_slice(&(c.len() as u32).to_le_bytes());
        out.extend_from_slice(c.as_bytes());
    }
    out.extend_from_slice(&(m.n_features as u32).to_le_bytes());
    out.extend_from_slice(&m.seed.to_le_bytes());
    out.extend_from_slice(&m.hyper.learning_rate.to_le_bytes());
    out.extend_from_slice(&m.hyper.epochs.to_le_bytes());
    out.extend_from_slice(&m.hyper.l2.to_le_bytes());
    out.extend_from_slice(&(m.hyper.batch_size as u32).to_le_bytes());
    for w in &m.weights {
        out.extend_from_slice(&w.to_le_bytes());
    }
    for b in &m.bias {
        out.extend_from_slice(&b.to_le_bytes());
    }
    out
}

pub fn decode_model(bytes: &[u8]) -> Result<SoftmaxModel, ClassifyError> {
    struct Reader<'a> {
        buf: &'a [u8],
        pos: usize,
    }
    impl<'a> Reader<'a> {
        fn take(&mut self, n: usize) -> Result<&'a [u8], ClassifyError> {
            let s = self
                .buf
                .get(self.pos..self.pos + n)
                .ok_or_else(|| ClassifyError::ModelFormat("unexpected end of file".into()))?;
            self.pos += n;
            Ok(s)
        }
        fn u32(&mut self) -> Result<u32, ClassifyError> {
            Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
        }
        fn u64(&mut self) -> Result<u64, ClassifyError> {
            Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
        }
        fn f64(&mut self) -> Result<f64, ClassifyError> {
            Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
        }
    }
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != MODEL_MAGIC {
        return Err(ClassifyError::ModelFormat("bad magic".into()));
    }
    let n_classes = r.u32()? as usize;
    if n_classes == 0 || n_classes > 4096 {
        return Err(ClassifyError::ModelFormat(format!(
            "implausible class count {n_classes}"
        )));
    }
    let mut classes = Vec::with_capacity(n_classes);
    for _ in 0..n_classes {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| ClassifyError::ModelFormat("class name not UTF-8".into()))?;
        classes.push(name.to_string());
    }
    let n_features = r.u32()? as usize;
    let seed = r.u64()?;
    let hyper = Hyperparams {
        learning_rate: r.f64()?,
        epochs: r.u32()?,
        l2: r.f64()?,
        batch_size: r.u32()? as usize,
    };
    let mut weights = Vec::with_capacity(n_classes * n_features);
    for _ in 0..n_classes * n_features {
        weights.push(r.f64()?);
    }
    let mut bias = Vec::with_capacity(n_classes);
    for _ in 0..n_classes {
        bias.push(r.f64()?);
    }
    if r.pos != bytes.len() {
        return Err(ClassifyError::ModelFormat("trailing bytes".into()));
    }
    if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
        return Err(ClassifyError::ModelFormat("non-finite parameter".into()));
    }
    Ok(SoftmaxModel {
        classes,
        n_features,
        weights,
        bias,
        seed,
        hyper,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    

    /// Two well-separated 2-D blobs, 100 points each.
    fn toy_blobs() -> Vec<(Vec<f64>, String)> {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let mut samples = Vec::new();
        for _ in 0..100 {
            let jx: f64 = rng.random_range(-0.8..0.8);
            let jy: f64 = rng.random_range(-0.8..0.8);
            samples.push((vec![2.0 + jx, 2.0 + jy], "pos".to_string()));
            let jx: f64 = rng.random_range(-0.8..0.8);
            let jy: f64 = rng.random_range(-0.8..0.8);
            samples.push((vec![-2.0 + jx, -2.0 + jy], "neg".to_string()));
        }
        samples
    }

    #[test]
    fn separable_toys_reach_high_accuracy_with_monotone_loss() {
        let samples = toy_blobs();
        let hyper = Hyperparams {
            learning_rate: 0.1,
            epochs: 200,
            l2: 0.0,
            batch_size: samples.len(), // full batch: loss must never rise
        };
        let out = train(&samples, hyper, 11).unwrap();
        for w in out.loss_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "loss rose: {} -> {}", w[0], w[1]);
        }
        let correct = samples
            .iter()
            .filter(|(x, l)| out.model.predict_label(x) == l)
            .count();
        assert!(correct as f64 / samples.len() as f64 >= 0.99);
    }

    #[test]
    fn two_points_are_memorized() {
        let samples = vec![
            (vec![1.0, 0.0], "a".to_string()),
            (vec![0.0, 1.0], "b".to_string()),
        ];
        let out = train(&samples, Hyperparams::default(), 3).unwrap();
        assert_eq!(out.model.predict_label(&samples[0].0), "a");
        assert_eq!(out.model.predict_label(&samples[1].0), "b");
    }

    #[test]
    fn identical_features_cap_at_class_prior() {
        let samples = vec![
            (vec![0.5, 0.5], "a".to_string()),
            (vec![0.5, 0.5], "b".to_string()),
        ];
        let out = train(&samples, Hyperparams::default(), 3).unwrap();
        let correct = samples
            .iter()
            .filter(|(x, l)| out.model.predict_label(x) == l)
            .count();
        assert_eq!(correct, 1); // exactly the majority prior: 1 of 2
    }

    #[test]
    fn training_is_bit_identical_across_runs() {
        let samples = toy_blobs();
        let hyper = Hyperparams {
            batch_size: 16,
            epochs: 20,
            ..Hyperparams::default()
        };
        let a = train(&samples, hyper, 99).unwrap();
        let b = train(&samples, hyper, 99).unwrap();
        assert_eq!(a.model.weights, b.model.weights);
        assert_eq!(a.model.bias, b.model.bias);
        assert_eq!(a.loss_trace, b.loss_trace);
    }

    #[test]
    fn degenerate_datasets_are_rejected() {
        let one_class = vec![
            (vec![1.0], "only".to_string()),
            (vec![2.0], "only".to_string()),
        ];
        assert!(matches!(
            train(&one_class, Hyperparams::default(), 0),
            Err(ClassifyError::DegenerateDataset(_))
        ));
        assert!(matches!(
            train(&[], Hyperparams::default(), 0),
            Err(ClassifyError::DegenerateDataset(_))
        ));
        let ragged = vec![
            (vec![1.0], "a".to_string()),
            (vec![1.0, 2.0], "b".to_string()),
        ];
        assert!(matches!(
            train(&ragged, Hyperparams::default(), 0),
            Err(ClassifyError::DegenerateDataset(_))
        ));
    }

    fn random_model_and_batch(seed: u64) -> (SoftmaxModel, Vec<(Vec<f64>, usize)>) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let (n_classes, nf) = (3usize, 17usize);
        let mut model = SoftmaxModel::zeroed(
            (0..n_classes).map(|i| format!("c{i}")).collect(),
            nf,
            seed,
            Hyperparams {
                l2: 0.01,
                ..Hyperparams::default()
            },
        );
        for w in &mut model.weights {
            *w = rng.random_range(-1.0..1.0);
        }
        for b in &mut model.bias {
            *b = rng.random_range(-1.0..1.0);
        }
        let batch = (0..12)
            .map(|_| {
                (
                    (0..nf).map(|_| rng.random_range(-1.0..1.0)).collect(),
                    rng.random_range(0..n_classes),
                )
            })
            .collect();
        (model, batch)
    }

    #[test]
    fn gradient_check_passes_on_random_init() {
        for seed in [1u64, 2, 3] {
            let (model, batch) = random_model_and_batch(seed);
            let err = gradient_check(&model, &batch, seed ^ 0xABCD);
            assert!(err < 1e-4, "seed {seed}: relative error {err}");
        }
    }

    #[test]
    fn zero_init_balanced_batch_has_uniform_minus_onehot_bias_gradient() {
        let model = SoftmaxModel::zeroed(
            vec!["a".into(), "b".into()],
            2,
            0,
            Hyperparams {
                l2: 0.0,
                ..Hyperparams::default()
            },
        );
        let batch = vec![
            (vec![1.0, 0.0], 0usize),
            (vec![0.0, 1.0], 1usize),
        ];
        let borrowed: Vec<(&[f64], usize)> =
            batch.iter().map(|(x, y)| (x.as_slice(), *y)).collect();
        let (_, gb) = gradients(&model, &borrowed, 0.0);
        // softmax is uniform (1/2) at zero init and the labels are balanced,
        // so the bias gradient vanishes exactly.
        assert!(gb.iter().all(|g| g.abs() < 1e-15), "bias grad {gb:?}");
        let err = gradient_check(&model, &batch, 5);
        assert!(err < 1e-4, "relative error {err}");
    }

    #[test]
    fn gradient_check_single_sample() {
        let (model, batch) = random_model_and_batch(9);
        let err = gradient_check(&model, &batch[..1], 77);
        assert!(err < 1e-4, "relative error {err}");
    }

    #[test]
    fn argmax_is_shift_invariant() {
        let (model, batch) = random_model_and_batch(21);
        let mut shifted = model.clone();
        for b in &mut shifted.bias {
            *b += 7.25;
        }
        for (x, _) in &batch {
            assert_eq!(model.predict(x), shifted.predict(x));
        }
    }

    #[test]
    fn worked_confusion_example() {
        let m = metrics_from_counts(3, 5, 1, 1);
        assert_eq!(m.accuracy, 0.8);
        assert_eq!(m.precision, 0.75);
        assert_eq!(m.recall, 0.75);
        assert_eq!(m.f1, 0.75);
    }

    #[test]
    fn zero_denominator_conventions() {
        let m = metrics_from_counts(0, 4, 0, 2);
        assert_eq!(m.precision, 0.0);
        assert_eq!(m.recall, 0.0);
        assert_eq!(m.f1, 0.0);
        assert_eq!(m.accuracy, 4.0 / 6.0);
        let empty = metrics_from_counts(0, 0, 0, 0);
        assert_eq!(empty.accuracy, 0.0);
    }

    #[test]
    fn binary_evaluation_counts() {
        // A model rigged to always predict "benign".
        let mut model = SoftmaxModel::zeroed(
            vec!["benign".into(), "malicious".into()],
            1,
            0,
            Hyperparams::default(),
        );
        model.bias = vec![1.0, 0.0];
        let records = vec![
            (vec![0.0], "malicious".to_string()),
            (vec![0.0], "malicious".to_string()),
            (vec![0.0], "benign".to_string()),
        ];
        let m = evaluate_binary(&model, &records, "malicious").unwrap();
        assert_eq!((m.tp, m.tn, m.fp, m.fn_), (0, 1, 0, 2));
        assert_eq!(m.recall, 0.0);
        assert_eq!(m.precision, 0.0);
        assert!((m.accuracy - 1.0 / 3.0).abs() < 1e-12);
        assert!(matches!(
            evaluate_binary(&model, &[], "malicious"),
            Err(ClassifyError::EmptyEvalSet)
        ));
    }

    #[test]
    fn perfect_predictor_scores_ones_across_the_board() {
        // Sign of the single feature decides the class; ten clean samples.
        let mut model = SoftmaxModel::zeroed(
            vec!["benign".into(), "malicious".into()],
            1,
            0,
            Hyperparams::default(),
        );
        model.weights = vec![-1.0, 1.0];
        let records: Vec<(Vec<f64>, String)> = (0..10)
            .map(|i| {
                if i % 2 == 0 {
                    (vec![1.0], "malicious".to_string())
                } else {
                    (vec![-1.0], "benign".to_string())
                }
            })
            .collect();
        let m = evaluate_binary(&model, &records, "malicious").unwrap();
        assert_eq!((m.tp, m.tn, m.fp, m.fn_), (5, 5, 0, 0));
        assert_eq!((m.accuracy, m.precision, m.recall, m.f1), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn multiclass_one_vs_rest_report() {
        let mut model = SoftmaxModel::zeroed(
            vec!["a".into(), "b".into(), "c".into()],
            3,
            0,
            Hyperparams::default(),
        );
        // Identity weights: predicts the index of the largest feature.
        for i in 0..3 {
            model.weights[i * 3 + i] = 1.0;
        }
        let records = vec![
            (vec![1.0, 0.0, 0.0], "a".to_string()),
            (vec![0.0, 1.0, 0.0], "b".to_string()),
            (vec![0.0, 0.0, 1.0], "c".to_string()),
            (vec![1.0, 0.0, 0.0], "b".to_string()), // one mistake
        ];
        let rep = evaluate_multiclass(&model, &records).unwrap();
        assert_eq!(rep.accuracy, 0.75);
        assert_eq!(rep.per_class.len(), 3);
        let (name_a, ma) = &rep.per_class[0];
        assert_eq!(name_a, "a");
        assert_eq!((ma.tp, ma.fp), (1, 1));
        // Weighted recall equals plain accuracy for single-label problems.
        assert!((rep.weighted_avg.recall - 0.75).abs() < 1e-12);
        assert!(rep.macro_avg.f1 > 0.0 && rep.macro_avg.f1 < 1.0);
    }

    #[test]
    fn model_file_round_trips_bit_exact() {
        let samples = toy_blobs();
        let out = train(
            &samples,
            Hyperparams {
                epochs: 5,
                ..Hyperparams::default()
            },
            123,
        )
        .unwrap();
        let bytes = encode_model(&out.model);
        let back = decode_model(&bytes).unwrap();
        assert_eq!(back, out.model);
    }

    #[test]
    fn model_decode_rejects_garbage() {
        assert!(decode_model(b"").is_err());
        assert!(decode_model(b"MLF2AAAA").is_err());
        let samples = toy_blobs();
        let out = train(
            &samples,
            Hyperparams {
                epochs: 1,
                ..Hyperparams::default()
            },
            1,
        )
        .unwrap();
        let mut bytes = encode_model(&out.model);
        bytes.truncate(bytes.len() - 3);
        assert!(decode_model(&bytes).is_err());
    }

    #[test]
    fn featurize_black_white_and_channel_slices() {
        let black = RgbImage::new(16, 16, vec![0; 3 * 256]).unwrap();
        let f = featurize(&black, 4).unwrap();
        assert_eq!(f.len(), 48);
        assert!(f.iter().all(|&v| v == 0.0));

        let white = RgbImage::new(16, 16, vec![255; 3 * 256]).unwrap();
        let f = featurize(&white, 4).unwrap();
        assert!(f.iter().all(|&v| v == 1.0));

        // Channel-0 slice must equal the resized red plane / 255.
        let mut data = vec![0u8; 3 * 64];
        for (i, px) in data.chunks_mut(3).enumerate() {
            px[0] = (i * 3 % 256) as u8;
        }
        let img = RgbImage::new(8, 8, data).unwrap();
        let f = featurize(&img, 4).unwrap();
        let red = lanczos_resize(&img.channel(0), 4, 4).unwrap();
        for (v, p) in f[..16].iter().zip(red.pixels()) {
            assert_eq!(*v, *p as f64 / 255.0);
        }
        assert!(f[16..].iter().all(|&v| v == 0.0));

        let tall = RgbImage::new(4, 8, vec![0; 96]).unwrap();
        assert!(matches!(
            featurize(&tall, 4),
            Err(ClassifyError::InvalidSize(_))
        ));
    }
}
