//! Linear 1x1 readout over frozen feature stacks, trained on negative NSS.
//!
//! The prediction at native feature resolution is `sum_j w_j * f_j + b`,
//! bilinearly resized to the image grid. Because resizing is linear, the
//! loss gradient flows back through the transpose of the resampler.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_io::{load_vector, save_vector};
use crate::error::{Error, Result};
use crate::map::{ActivationStack, DenseMap};
use crate::metrics::{mean_std, CONSTANT_EPSILON};
use crate::resize::Resampler;
use crate::warning::Warning;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderWeights {
    w: Vec<f64>,
    b: f64,
}

impl DecoderWeights {
    pub fn new(w: Vec<f64>, b: f64) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::InvalidConfig("decoder needs at least one channel".into()));
        }
        if w.iter().any(|v| !v.is_finite()) || !b.is_finite() {
            return Err(Error::NonFinite("decoder weights".into()));
        }
        Ok(Self { w, b })
    }

    /// One-hot readout of `channel`.
    pub fn one_hot(channels: usize, channel: usize) -> Result<Self> {
        let mut w = vec![0.0; channels];
        *w.get_mut(channel).ok_or(Error::ChannelMismatch {
            expected: channels,
            found: channel + 1,
        })? = 1.0;
        Self::new(w, 0.0)
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn channels(&self) -> usize {
        self.w.len()
    }

    /// Writes `C + 1` float32 values: the weights, then the bias.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut v = self.w.clone();
        v.push(self.b);
        save_vector(&v, path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut v = load_vector(path)?;
        if v.len() < 2 {
            return Err(Error::InvalidShape {
                shape: vec![v.len()],
                reason: format!("{} needs at least one weight and a bias", path.display()),
            });
        }
        let b = v.pop().expect("length checked");
        Self::new(v, b)
    }
}

/// Uniform in `[-1/sqrt(C), 1/sqrt(C)]`, zero bias.
pub fn init_weights(channels: usize, seed: u64) -> Result<DecoderWeights> {
    if channels == 0 {
        return Err(Error::InvalidConfig("decoder needs at least one channel".into()));
    }
    let bound = 1.0 / (channels as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = (0..channels).map(|_| rng.random_range(-bound..=bound)).collect();
    DecoderWeights::new(w, 0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub seed: u64,
    pub batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            momentum: 0.9,
            epochs: 50,
            seed: 0,
            batch_size: 8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        // lr = 0 is accepted as a no-op run
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning_rate must be a finite non-negative number".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig("momentum must lie in [0, 1)".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

fn check_channels(features: &ActivationStack, weights: &DecoderWeights) -> Result<()> {
    if features.num_channels() != weights.channels() {
        return Err(Error::ChannelMismatch {
            expected: weights.channels(),
            found: features.num_channels(),
        });
    }
    Ok(())
}

fn native_prediction(features: &ActivationStack, weights: &DecoderWeights) -> ndarray::Array2<f64> {
    let mut acc = ndarray::Array2::from_elem(features.native_size(), weights.b);
    for (wj, f) in weights.w.iter().zip(features.channels()) {
        acc.scaled_add(*wj, f.values());
    }
    acc
}

/// Prediction resized to `image_size`.
pub fn forward(features: &ActivationStack, weights: &DecoderWeights, image_size: (usize, usize)) -> Result<DenseMap> {
    check_channels(features, weights)?;
    let resampler = Resampler::new(features.native_size(), image_size);
    DenseMap::new(resampler.apply(&native_prediction(features, weights)))
}

/// Gradient of the loss with respect to the readout parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub dw: Vec<f64>,
    pub db: f64,
}

/// Negative NSS of the prediction against a binary fixation grid of `image_size`.
pub fn nss_loss(features: &ActivationStack, weights: &DecoderWeights, fixations: &DenseMap, image_size: (usize, usize)) -> Result<f64> {
    let pred = forward(features, weights, image_size)?;
    Ok(-crate::metrics::nss(&pred, fixations)?)
}

/// Analytic gradient of [`nss_loss`].
pub fn loss_gradient(features: &ActivationStack, weights: &DecoderWeights, fixations: &DenseMap, image_size: (usize, usize)) -> Result<Gradient> {
    check_channels(features, weights)?;
    let sample = PreparedSample::new(features, fixations, image_size)?;
    Ok(sample.loss_and_gradient(weights)?.1)
}

struct PreparedSample<'a> {
    features: &'a ActivationStack,
    resampler: Resampler,
    fixated: Vec<usize>,
}

impl<'a> PreparedSample<'a> {
    fn new(features: &'a ActivationStack, fixations: &DenseMap, image_size: (usize, usize)) -> Result<Self> {
        if fixations.dims() != image_size {
            return Err(Error::ShapeMismatch {
                expected: image_size,
                found: fixations.dims(),
            });
        }
        let fixated = fixations.nonzero_indices();
        if fixated.is_empty() {
            return Err(Error::EmptyFixations);
        }
        Ok(Self {
            features,
            resampler: Resampler::new(features.native_size(), image_size),
            fixated,
        })
    }

    fn loss_and_gradient(&self, weights: &DecoderWeights) -> Result<(f64, Gradient)> {
        let pred = self.resampler.apply(&native_prediction(self.features, weights));
        let values = pred.as_slice().expect("standard layout");
        let (mean, std) = mean_std(values);
        if std <= CONSTANT_EPSILON {
            return Err(Error::ConstantMap);
        }
        let n = values.len() as f64;
        let k = self.fixated.len() as f64;
        let z: Vec<f64> = values.iter().map(|v| (v - mean) / std).collect();
        let score = self.fixated.iter().map(|&i| z[i]).sum::<f64>() / k;

        // d(score)/d(pred_i) = (fix_i / k - 1 / n - score * z_i / n) / std
        let mut grad = ndarray::Array2::<f64>::zeros(pred.dim());
        {
            let g = grad.as_slice_mut().expect("standard layout");
            for (gi, zi) in g.iter_mut().zip(&z) {
                *gi = (score * zi / n + 1.0 / n) / std;
            }
            for &i in &self.fixated {
                g[i] -= 1.0 / (k * std);
            }
        }
        let native = self.resampler.adjoint(&grad);
        let dw = self.features.channels().iter().map(|f| (&native * f.values()).sum()).collect();
        // z-scoring removes any constant shift, so the bias never affects the loss
        Ok((-score, Gradient { dw, db: 0.0 }))
    }
}

/// A feature stack with its binary fixation grid at image resolution.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub features: ActivationStack,
    pub fixations: DenseMap,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub weights: DecoderWeights,
    /// Mean per-image loss of each epoch over the images used; NaN for an epoch whose batches were all degenerate.
    pub loss_curve: Vec<f64>,
    pub batches: usize,
    pub skipped_batches: usize,
    pub skipped_images: usize,
    pub warnings: Vec<Warning>,
}

/// Trains from seeded random initial weights.
pub fn train(dataset: &[TrainSample], cfg: &TrainConfig) -> Result<TrainReport> {
    let c = dataset
        .first()
        .map(|s| s.features.num_channels())
        .ok_or_else(|| Error::InvalidConfig("training set is empty".into()))?;
    train_from(init_weights(c, cfg.seed)?, dataset, cfg)
}

/// SGD with momentum on the mean per-image loss of each batch. Images whose
/// prediction is constant are left out of their batch; a batch with no
/// usable image is skipped and counted.
pub fn train_from(initial: DecoderWeights, dataset: &[TrainSample], cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::InvalidConfig("training set is empty".into()));
    }
    let prepared = dataset
        .iter()
        .map(|s| {
            check_channels(&s.features, &initial)?;
            PreparedSample::new(&s.features, &s.fixations, s.fixations.dims())
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut weights = initial;
    let mut velocity = vec![0.0; weights.channels()];
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let mut report = TrainReport {
        weights: weights.clone(),
        loss_curve: Vec::with_capacity(cfg.epochs),
        batches: 0,
        skipped_batches: 0,
        skipped_images: 0,
        warnings: Vec::new(),
    };

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut epoch_images = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            report.batches += 1;
            let results: Vec<Result<(f64, Gradient)>> = batch.par_iter().map(|&i| prepared[i].loss_and_gradient(&weights)).collect();
            let mut loss = 0.0;
            let mut grad = vec![0.0; weights.channels()];
            let mut used = 0usize;
            for r in results {
                match r {
                    Ok((l, g)) => {
                        loss += l;
                        for (a, b) in grad.iter_mut().zip(&g.dw) {
                            *a += b;
                        }
                        used += 1;
                    }
                    Err(Error::ConstantMap) => report.skipped_images += 1,
                    Err(e) => return Err(e),
                }
            }
            if used == 0 {
                report.skipped_batches += 1;
                report.warnings.push(Warning::new(
                    "degenerate_batch",
                    format!("epoch {epoch}: every prediction in a batch of {} was constant", batch.len()),
                ));
                continue;
            }
            let scale = 1.0 / used as f64;
            for ((v, w), g) in velocity.iter_mut().zip(weights.w.iter_mut()).zip(&grad) {
                *v = cfg.momentum * *v - cfg.learning_rate * g * scale;
                *w += *v;
            }
            if weights.w.iter().any(|w| !w.is_finite()) {
                return Err(Error::NonFinite(format!("decoder weights after epoch {epoch}")));
            }
            epoch_loss += loss;
            epoch_images += used;
        }
        report.loss_curve.push(if epoch_images > 0 {
            epoch_loss / epoch_images as f64
        } else {
            f64::NAN
        });
    }
    if report.skipped_batches == report.batches {
        return Err(Error::AllBatchesDegenerate);
    }
    report.weights = weights;
    Ok(report)
}

/// Mean NSS of the decoder over a dataset.
pub fn mean_nss(dataset: &[TrainSample], weights: &DecoderWeights) -> Result<f64> {
    let scores = dataset
        .par_iter()
        .map(|s| nss_loss(&s.features, weights, &s.fixations, s.fixations.dims()).map(|l| -l))
        .collect::<Result<Vec<_>>>()?;
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}
