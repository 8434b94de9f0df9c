//! Mini-batch training with Adam, a stratified split and per-epoch history.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Matrix, ParamSet, Tape};
use crate::error::{Error, Result};
use crate::evaluation::{self, ConfusionMatrix};
use crate::gnn::{cross_entropy, ConvKind, GraphBatch, GraphSample, ModelConfig, ModelParams};
use crate::label::{EmotionLabel, NUM_CLASSES};
use crate::mln::TweetMln;
use crate::seed::mix_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub split_fraction: f64,
    /// Architecture; `model.seed` is replaced by `seed` when training starts.
    pub model: ModelConfig,
    pub class_weights: [f64; NUM_CLASSES],
    /// When false every `seconds` entry of the history is written as 0 so
    /// that repeated runs produce identical files.
    pub record_timing: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            epochs: 100,
            batch_size: 32,
            seed: 0,
            split_fraction: 0.8,
            model: ModelConfig::default(),
            class_weights: [1.0; NUM_CLASSES],
            record_timing: true,
        }
    }
}

impl TrainConfig {
    pub fn conv_kind(&self) -> ConvKind {
        self.model.conv
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "split fraction {} outside (0, 1)",
                self.split_fraction
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be at least 1".into()));
        }
        if self.class_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidConfig("class weights must be finite and non-negative".into()));
        }
        self.model.validate()
    }

    fn model_config(&self) -> ModelConfig {
        ModelConfig {
            seed: self.seed,
            ..self.model
        }
    }
}

/// Stratified seeded split. Each class contributes `round(n * fraction)`
/// items to the training part, clamped so both parts get at least one.
pub fn split<T>(
    items: Vec<T>,
    label_of: impl Fn(&T) -> usize,
    fraction: f64,
    seed: u64,
) -> Result<(Vec<T>, Vec<T>)> {
    if items.is_empty() {
        return Err(Error::InvalidConfig("nothing to split".into()));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidConfig(format!("split fraction {fraction} outside (0, 1)")));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); NUM_CLASSES];
    for (i, item) in items.iter().enumerate() {
        let label = label_of(item);
        if label >= NUM_CLASSES {
            return Err(Error::UnknownLabel(label.to_string()));
        }
        by_class[label].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x5917));
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for (class, members) in by_class.iter_mut().enumerate() {
        let n = members.len();
        if n == 0 {
            continue;
        }
        if n < 2 {
            return Err(Error::TooFewSamples {
                class: EmotionLabel::ALL[class].to_string(),
                count: n,
            });
        }
        members.shuffle(&mut rng);
        let k = ((n as f64 * fraction).round() as usize).clamp(1, n - 1);
        train_idx.extend_from_slice(&members[..k]);
        test_idx.extend_from_slice(&members[k..]);
    }
    train_idx.shuffle(&mut rng);
    test_idx.shuffle(&mut rng);

    let mut slots: Vec<Option<T>> = items.into_iter().map(Some).collect();
    let mut take = |idx: &[usize]| idx.iter().map(|&i| slots[i].take().expect("index used once")).collect();
    let train: Vec<T> = take(&train_idx);
    let test: Vec<T> = take(&test_idx);
    Ok((train, test))
}

pub fn split_mlns(mlns: Vec<TweetMln>, fraction: f64, seed: u64) -> Result<(Vec<TweetMln>, Vec<TweetMln>)> {
    split(mlns, |m| m.label.index(), fraction, seed)
}

/// Sample order for one epoch; reshuffled per `(seed, epoch)`.
pub fn epoch_order(len: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..len).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(mix_seed(seed, 0xba7c), epoch as u64));
    order.shuffle(&mut rng);
    order
}

pub fn make_batches(
    samples: &[GraphSample],
    batch_size: usize,
    seed: u64,
    epoch: usize,
) -> Result<Vec<GraphBatch>> {
    if batch_size == 0 {
        return Err(Error::InvalidConfig("batch size must be at least 1".into()));
    }
    epoch_order(samples.len(), seed, epoch)
        .chunks(batch_size)
        .map(|chunk| {
            let members: Vec<&GraphSample> = chunk.iter().map(|&i| &samples[i]).collect();
            GraphBatch::new(&members)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first: Vec<Matrix>,
    pub second: Vec<Matrix>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(params: &ParamSet) -> Self {
        let zeros: Vec<Matrix> = params
            .iter()
            .map(|p| Matrix::zeros(p.value.rows(), p.value.cols()))
            .collect();
        AdamState {
            first: zeros.clone(),
            second: zeros,
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One bias-corrected Adam update from the accumulated gradients, which are
/// zeroed afterwards. Nothing is modified if any gradient is non-finite.
pub fn adam_step(params: &mut ParamSet, state: &mut AdamState, learning_rate: f64) -> Result<()> {
    if state.first.len() != params.len() {
        return Err(Error::LengthMismatch {
            left: state.first.len(),
            right: params.len(),
        });
    }
    if let Some(p) = params.iter().find(|p| !p.grad.is_finite()) {
        return Err(Error::NonFiniteGradient { name: p.name.clone() });
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let correction1 = 1.0 - b1.powi(t);
    let correction2 = 1.0 - b2.powi(t);
    for ((p, m), v) in params.iter_mut().zip(&mut state.first).zip(&mut state.second) {
        if m.shape() != p.value.shape() {
            return Err(Error::ShapeMismatch {
                op: "adam moments",
                left: m.shape(),
                right: p.value.shape(),
            });
        }
        let grads = p.grad.as_slice();
        let values = p.value.as_mut_slice();
        let (ms, vs) = (m.as_mut_slice(), v.as_mut_slice());
        for i in 0..values.len() {
            let g = grads[i];
            ms[i] = b1 * ms[i] + (1.0 - b1) * g;
            vs[i] = b2 * vs[i] + (1.0 - b2) * g * g;
            let m_hat = ms[i] / correction1;
            let v_hat = vs[i] / correction2;
            values[i] -= learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
        }
    }
    params.zero_grads();
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_f1: f64,
    pub test_f1: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the highest test macro-F1 (earliest
    /// on ties); the initial parameters when no epoch ran.
    pub best: ModelParams,
    pub last: ModelParams,
    pub best_epoch: Option<usize>,
    pub history: Vec<EpochRecord>,
}

impl TrainOutcome {
    pub fn best_test_f1(&self) -> Option<f64> {
        self.best_epoch.map(|e| self.history[e - 1].test_f1)
    }

    pub fn mean_seconds_per_epoch(&self) -> f64 {
        if self.history.is_empty() {
            return 0.0;
        }
        self.history.iter().map(|r| r.seconds).sum::<f64>() / self.history.len() as f64
    }
}

/// Whether the loop should keep going after an epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Progress {
    Continue,
    Stop,
}

pub fn train(train_set: &[GraphSample], test_set: &[GraphSample], config: &TrainConfig) -> Result<TrainOutcome> {
    train_with(train_set, test_set, config, |_| Progress::Continue)
}

/// Same as [`train`], calling `on_epoch` after each epoch's record.
pub fn train_with(
    train_set: &[GraphSample],
    test_set: &[GraphSample],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord) -> Progress,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_set.is_empty() || test_set.is_empty() {
        return Err(Error::InvalidConfig("training and test sets must be non-empty".into()));
    }
    let mut params = ModelParams::init(config.model_config())?;
    let mut adam = AdamState::new(&params.set);
    let mut best = params.clone();
    let mut best_epoch = None;
    let mut best_f1 = f64::NEG_INFINITY;
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        let started = Instant::now();
        let batches = make_batches(train_set, config.batch_size, config.seed, epoch)?;
        let mut loss_total = 0.0;
        let mut train_cm = ConfusionMatrix::new(NUM_CLASSES);
        let dropout_base = mix_seed(mix_seed(config.seed, 0xd50f), epoch as u64);
        for (b, batch) in batches.iter().enumerate() {
            let mut tape = Tape::new();
            let logits = params.forward(&mut tape, batch, true, mix_seed(dropout_base, b as u64))?;
            let loss = cross_entropy(&mut tape, logits, &batch.labels, &config.class_weights)?;
            let value = tape.value(loss)[(0, 0)];
            if !value.is_finite() {
                return Err(Error::NonFinite {
                    context: format!("training loss at epoch {epoch}, batch {b}"),
                });
            }
            loss_total += value * batch.len() as f64;
            let predicted = crate::gnn::argmax_rows(tape.value(logits));
            for (&truth, &pred) in batch.labels.iter().zip(&predicted) {
                train_cm.add(truth, pred);
            }
            tape.backward(loss, &mut params.set)?;
            adam_step(&mut params.set, &mut adam, config.learning_rate)?;
        }
        let test_pred = evaluation::predict(test_set, &params, config.batch_size)?;
        let test_truth: Vec<usize> = test_set.iter().map(|s| s.label).collect();
        let test_cm = ConfusionMatrix::from_pairs(NUM_CLASSES, &test_truth, &test_pred)?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_total / train_set.len() as f64,
            train_f1: evaluation::metrics(&train_cm)?.macro_f1,
            test_f1: evaluation::metrics(&test_cm)?.macro_f1,
            seconds: if config.record_timing {
                started.elapsed().as_secs_f64()
            } else {
                0.0
            },
        };
        log::info!(
            "epoch {epoch}: loss {:.6} train_f1 {:.4} test_f1 {:.4} ({:.2}s)",
            record.train_loss,
            record.train_f1,
            record.test_f1,
            record.seconds
        );
        if record.test_f1 > best_f1 {
            best_f1 = record.test_f1;
            best = params.clone();
            best_epoch = Some(epoch);
        }
        let progress = on_epoch(&record);
        history.push(record);
        if progress == Progress::Stop {
            break;
        }
    }
    Ok(TrainOutcome {
        best,
        last: params,
        best_epoch,
        history,
    })
}

pub fn write_history(writer: impl Write, history: &[EpochRecord]) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(writer);
    writeln!(w, "epoch,train_loss,train_f1,test_f1,seconds")?;
    for r in history {
        writeln!(w, "{},{},{},{},{}", r.epoch, r.train_loss, r.train_f1, r.test_f1, r.seconds)?;
    }
    w.flush()
}

pub fn save_history(path: impl AsRef<Path>, history: &[EpochRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_history(file, history).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Parameter;
    use crate::embedding::Embeddings;
    use crate::gnn::Adjacency;
    use crate::mln::build_groups;
    use crate::preprocess::Cleaner;
    use crate::synthetic::{generate, GenConfig};

    fn tiny_model(conv: ConvKind) -> ModelConfig {
        ModelConfig {
            conv,
            in_dim: 6,
            conv_dim: 4,
            fc1_dim: 8,
            fc2_dim: 6,
            ..ModelConfig::default()
        }
    }

    /// Two groups of four tweets per class from a small synthetic corpus.
    fn samples(seed: u64) -> Vec<GraphSample> {
        let corpus = generate(&GenConfig {
            tweets_per_class: 8,
            vocab_per_class: 10,
            shared_vocab: 6,
            dimension: 6,
            seed,
            ..GenConfig::default()
        })
        .unwrap();
        let emb = Embeddings::single(corpus.embeddings);
        let cleaner = Cleaner::builtin().with_vocabulary(emb.vocabulary());
        let clean: Vec<_> = corpus.tweets.iter().map(|t| cleaner.clean(t).unwrap()).collect();
        let (mlns, leftover) = build_groups(&clean, 4).unwrap();
        assert_eq!(leftover, 0);
        mlns.iter().map(|m| GraphSample::new(m, &emb)).collect()
    }

    fn config(conv: ConvKind, epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            batch_size: 4,
            seed: 5,
            learning_rate: 0.01,
            model: tiny_model(conv),
            record_timing: false,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn split_sizes() {
        let items: Vec<usize> = (0..3000).map(|i| i % 6).collect();
        let (train, test) = split(items, |&l| l, 0.8, 1).unwrap();
        assert_eq!((train.len(), test.len()), (2400, 600));
        for c in 0..6 {
            assert_eq!(train.iter().filter(|&&l| l == c).count(), 400);
        }

        let one_class = vec![3usize; 10];
        let (train, test) = split(one_class, |&l| l, 0.8, 1).unwrap();
        assert_eq!((train.len(), test.len()), (8, 2));
    }

    #[test]
    fn split_is_seeded_and_partitions() {
        let items: Vec<(usize, usize)> = (0..60).map(|i| (i, i % 6)).collect();
        let a = split(items.clone(), |p| p.1, 0.8, 9).unwrap();
        let b = split(items.clone(), |p| p.1, 0.8, 9).unwrap();
        assert_eq!(a, b);
        let c = split(items, |p| p.1, 0.8, 10).unwrap();
        assert_ne!(a, c);
        let mut ids: Vec<usize> = a.0.iter().chain(&a.1).map(|p| p.0).collect();
        ids.sort_unstable();
        assert_eq!(ids, (0..60).collect::<Vec<_>>());
    }

    #[test]
    fn split_errors() {
        assert!(matches!(
            split(vec![0usize, 0, 1], |&l| l, 0.8, 0),
            Err(Error::TooFewSamples { count: 1, .. })
        ));
        assert!(split(Vec::<usize>::new(), |&l| l, 0.8, 0).is_err());
        assert!(split(vec![0usize, 0], |&l| l, 1.0, 0).is_err());
        // Tiny classes still put one item on each side.
        let (train, test) = split(vec![2usize, 2], |&l| l, 0.8, 0).unwrap();
        assert_eq!((train.len(), test.len()), (1, 1));
    }

    #[test]
    fn batches_cover_every_sample_once() {
        let s = samples(1);
        let batches = make_batches(&s, 5, 3, 1).unwrap();
        assert_eq!(batches.iter().map(GraphBatch::len).collect::<Vec<_>>(), [5, 5, 2]);
        let order = epoch_order(s.len(), 3, 1);
        let mut sorted = order.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..s.len()).collect::<Vec<_>>());
        let labels: Vec<usize> = batches.iter().flat_map(|b| b.labels.clone()).collect();
        assert_eq!(labels, order.iter().map(|&i| s[i].label).collect::<Vec<_>>());

        assert_eq!(order, epoch_order(s.len(), 3, 1));
        assert_ne!(order, epoch_order(s.len(), 3, 2));
        assert!(make_batches(&s, 0, 3, 1).is_err());

        let singles = make_batches(&s[..1], 1, 0, 0).unwrap();
        assert_eq!(singles[0].layers[0].segments.count(), 1);
    }

    fn one_param(value: Matrix) -> ParamSet {
        let mut set = ParamSet::new();
        set.push(Parameter::new("p", value));
        set
    }

    #[test]
    fn adam_zero_gradient_is_a_no_op() {
        let start = Matrix::from_rows(&[[1.0, -2.0], [0.5, 3.0]]).unwrap();
        let mut set = one_param(start.clone());
        let mut state = AdamState::new(&set);
        adam_step(&mut set, &mut state, 0.1).unwrap();
        assert_eq!(set.iter().next().unwrap().value, start);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let start = Matrix::from_rows(&[[1.0, -2.0, 0.0]]).unwrap();
        let grad = [0.3, -7.0, 1e-3];
        let mut set = one_param(start.clone());
        set.iter_mut().next().unwrap().grad.as_mut_slice().copy_from_slice(&grad);
        let mut state = AdamState::new(&set);
        let lr = 0.001;
        adam_step(&mut set, &mut state, lr).unwrap();
        let p = set.iter().next().unwrap();
        for i in 0..3 {
            // m_hat = g and v_hat = g^2 after bias correction.
            let expected = start.as_slice()[i] - lr * grad[i] / (grad[i].abs() + 1e-8);
            assert!((p.value.as_slice()[i] - expected).abs() < 1e-15);
            assert!(((p.value.as_slice()[i] - start.as_slice()[i]).abs() - lr).abs() < 1e-7);
        }
        assert_eq!(p.grad, Matrix::zeros(1, 3));
    }

    #[test]
    fn adam_descends_a_quadratic_bowl() {
        let target = Matrix::from_rows(&[[3.0, -1.0, 0.5]]).unwrap();
        let mut set = one_param(Matrix::zeros(1, 3));
        let mut state = AdamState::new(&set);
        let loss = |set: &ParamSet| {
            let v = &set.iter().next().unwrap().value;
            v.as_slice().iter().zip(target.as_slice()).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
        };
        let initial = loss(&set);
        for _ in 0..200 {
            let p = set.iter_mut().next().unwrap();
            for i in 0..3 {
                p.grad.as_mut_slice()[i] = 2.0 * (p.value.as_slice()[i] - target.as_slice()[i]);
            }
            adam_step(&mut set, &mut state, 0.05).unwrap();
        }
        assert!(loss(&set) < initial * 0.01, "{} vs {initial}", loss(&set));
    }

    #[test]
    fn adam_rejects_non_finite_gradients() {
        let start = Matrix::row_vector(vec![1.0, 2.0]);
        let mut set = one_param(start.clone());
        set.iter_mut().next().unwrap().grad.as_mut_slice()[1] = f64::NAN;
        let mut state = AdamState::new(&set);
        assert!(matches!(
            adam_step(&mut set, &mut state, 0.1),
            Err(Error::NonFiniteGradient { .. })
        ));
        assert_eq!(set.iter().next().unwrap().value, start);
        assert_eq!(state.step, 0);
    }

    #[test]
    fn zero_epochs_returns_initial_parameters() {
        let s = samples(2);
        let cfg = config(ConvKind::Graph, 0);
        let out = train(&s[..8], &s[8..], &cfg).unwrap();
        assert!(out.history.is_empty());
        assert_eq!(out.best_epoch, None);
        assert_eq!(out.best, ModelParams::init(cfg.model_config()).unwrap());
    }

    #[test]
    fn training_is_deterministic() {
        let s = samples(3);
        let cfg = config(ConvKind::GatV2 { heads: 2 }, 3);
        let a = train(&s[..8], &s[8..], &cfg).unwrap();
        let b = train(&s[..8], &s[8..], &cfg).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.best, b.best);
        assert_eq!(a.last, b.last);
        assert!(a.history.iter().all(|r| r.seconds == 0.0));
        let best = a.best_epoch.unwrap();
        assert!(a.history.iter().all(|r| r.test_f1 <= a.history[best - 1].test_f1));
    }

    #[test]
    fn repeated_steps_on_one_batch_lower_the_loss() {
        let s = samples(4);
        let refs: Vec<&GraphSample> = s.iter().take(6).collect();
        let batch = GraphBatch::new(&refs).unwrap();
        let weights = [1.0; NUM_CLASSES];
        for conv in ConvKind::all(2) {
            let mut params = ModelParams::init(ModelConfig { dropout: 0.0, ..tiny_model(conv) }).unwrap();
            let mut state = AdamState::new(&params.set);
            let loss_now = |params: &ModelParams| {
                let mut tape = Tape::new();
                let logits = params.forward(&mut tape, &batch, false, 0).unwrap();
                let loss = cross_entropy(&mut tape, logits, &batch.labels, &weights).unwrap();
                tape.value(loss)[(0, 0)]
            };
            let initial = loss_now(&params);
            for _ in 0..50 {
                let mut tape = Tape::new();
                let logits = params.forward(&mut tape, &batch, true, 1).unwrap();
                let loss = cross_entropy(&mut tape, logits, &batch.labels, &weights).unwrap();
                tape.backward(loss, &mut params.set).unwrap();
                adam_step(&mut params.set, &mut state, 0.01).unwrap();
            }
            let last = loss_now(&params);
            assert!(last < initial, "{conv}: {last} >= {initial}");
        }
    }

    #[test]
    fn callback_can_stop_early() {
        let s = samples(6);
        let out = train_with(&s[..8], &s[8..], &config(ConvKind::Gcn, 10), |r| {
            if r.epoch == 2 {
                Progress::Stop
            } else {
                Progress::Continue
            }
        })
        .unwrap();
        assert_eq!(out.history.len(), 2);
    }

    #[test]
    fn bad_configs_rejected() {
        let s = samples(7);
        let mut cfg = config(ConvKind::Gcn, 1);
        cfg.learning_rate = 0.0;
        assert!(train(&s[..8], &s[8..], &cfg).is_err());
        let cfg = config(ConvKind::Gcn, 1);
        assert!(train(&s[..8], &[], &cfg).is_err());
    }

    #[test]
    fn history_csv_layout() {
        let history = vec![
            EpochRecord { epoch: 1, train_loss: 1.5, train_f1: 0.25, test_f1: 0.5, seconds: 0.0 },
            EpochRecord { epoch: 2, train_loss: 0.75, train_f1: 0.5, test_f1: 1.0, seconds: 0.0 },
        ];
        let mut out = Vec::new();
        write_history(&mut out, &history).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "epoch,train_loss,train_f1,test_f1,seconds\n1,1.5,0.25,0.5,0\n2,0.75,0.5,1,0\n"
        );
    }

    #[test]
    fn isolated_nodes_train_without_error() {
        let x = Matrix::from_fn(1, 6, |_, c| c as f64 / 6.0);
        let sample = GraphSample {
            features: crate::embedding::MlnFeatures { layers: [x.clone(), x.clone(), x] },
            adjacency: [0, 1, 2].map(|i| Adjacency::new(1, vec![], i == 1).unwrap()),
            label: 4,
        };
        let set = vec![sample.clone(), sample.clone()];
        assert!(train(&set, &set, &config(ConvKind::GatV2 { heads: 2 }, 2)).is_ok());
    }
}
