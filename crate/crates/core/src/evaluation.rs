//! Confusion matrices, precision/recall/F1, the sentiment pair baseline and
//! the convolution ablation.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::embedding::Embeddings;
use crate::error::{Error, Result};
use crate::gnn::{argmax_rows, ConvKind, GraphBatch, GraphSample, ModelParams};
use crate::label::{EmotionLabel, Sentiment, NUM_CLASSES};
use crate::mln::TweetMln;
use crate::training::{self, TrainConfig};

/// Square count grid; rows are true classes, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    /// Emotion names when `size` is six, indices otherwise.
    pub fn new(size: usize) -> Self {
        let labels = if size == NUM_CLASSES {
            EmotionLabel::ALL.iter().map(|l| l.to_string()).collect()
        } else {
            (0..size).map(|i| i.to_string()).collect()
        };
        Self::with_labels(labels)
    }

    pub fn with_labels(labels: Vec<String>) -> Self {
        let n = labels.len();
        ConfusionMatrix {
            labels,
            counts: vec![0; n * n],
        }
    }

    /// Positive first, then negative.
    pub fn binary_sentiment() -> Self {
        Self::with_labels(vec!["positive".into(), "negative".into()])
    }

    pub fn from_pairs(size: usize, truth: &[usize], predicted: &[usize]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::LengthMismatch {
                left: truth.len(),
                right: predicted.len(),
            });
        }
        let mut cm = Self::new(size);
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= size || p >= size {
                return Err(Error::InvalidConfig(format!("class index out of range for {size} classes")));
            }
            cm.add(t, p);
        }
        Ok(cm)
    }

    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let n = counts.len();
        if counts.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidConfig("confusion matrix must be square".into()));
        }
        let mut cm = Self::new(n);
        cm.counts = counts.into_iter().flatten().collect();
        Ok(cm)
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    /// Panics if either index is out of range.
    pub fn add(&mut self, truth: usize, predicted: usize) {
        let n = self.size();
        assert!(truth < n && predicted < n, "class index out of range");
        self.counts[truth * n + predicted] += 1;
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.size() + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts.chunks(self.size().max(1)).map(<[u64]>::to_vec).collect()
    }

    /// One-vs-rest counts for `class`: (TP, FP, FN).
    pub fn one_vs_rest(&self, class: usize) -> (u64, u64, u64) {
        let n = self.size();
        let tp = self.get(class, class);
        let predicted: u64 = (0..n).map(|t| self.get(t, class)).sum();
        let actual: u64 = (0..n).map(|p| self.get(class, p)).sum();
        (tp, predicted - tp, actual - tp)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    /// The class occurs among the true labels or the predictions.
    pub present: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub samples: u64,
    /// Set when some ratio had a zero denominator and was reported as 0.
    pub zero_division: bool,
    pub seconds_per_epoch: Option<f64>,
    pub confusion: ConfusionMatrix,
}

fn ratio(num: f64, den: f64, flagged: &mut bool) -> f64 {
    if den == 0.0 {
        *flagged = true;
        0.0
    } else {
        num / den
    }
}

/// Per-class one-vs-rest scores and their unweighted mean over the classes
/// that occur in the truth or the predictions.
pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    let samples = cm.total();
    if samples == 0 {
        return Err(Error::EmptyMatrix);
    }
    let mut zero_division = false;
    let per_class: Vec<ClassMetrics> = (0..cm.size())
        .map(|c| {
            let (tp, fp, fn_) = cm.one_vs_rest(c);
            let (tp, fp, fn_) = (tp as f64, fp as f64, fn_ as f64);
            let precision = ratio(tp, tp + fp, &mut zero_division);
            let recall = ratio(tp, tp + fn_, &mut zero_division);
            let f1 = ratio(2.0 * precision * recall, precision + recall, &mut zero_division);
            ClassMetrics {
                label: cm.labels[c].clone(),
                precision,
                recall,
                f1,
                support: (tp + fn_) as u64,
                present: tp + fp + fn_ > 0.0,
            }
        })
        .collect();
    let present: Vec<&ClassMetrics> = per_class.iter().filter(|m| m.present).collect();
    let n = present.len() as f64;
    let mean = |f: fn(&ClassMetrics) -> f64| present.iter().map(|m| f(m)).sum::<f64>() / n;
    Ok(MetricsReport {
        macro_precision: mean(|m| m.precision),
        macro_recall: mean(|m| m.recall),
        macro_f1: mean(|m| m.f1),
        per_class,
        samples,
        zero_division,
        seconds_per_epoch: None,
        confusion: cm.clone(),
    })
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<12} {:>9} {:>9} {:>9} {:>8}", "class", "precision", "recall", "f1", "support")?;
        for m in &self.per_class {
            writeln!(
                f,
                "{:<12} {:>9.4} {:>9.4} {:>9.4} {:>8}",
                m.label, m.precision, m.recall, m.f1, m.support
            )?;
        }
        writeln!(
            f,
            "{:<12} {:>9.4} {:>9.4} {:>9.4} {:>8}",
            "macro", self.macro_precision, self.macro_recall, self.macro_f1, self.samples
        )?;
        if let Some(s) = self.seconds_per_epoch {
            writeln!(f, "seconds/epoch {s:.3}")?;
        }
        if self.zero_division {
            writeln!(f, "note: some ratios had a zero denominator and were set to 0")?;
        }
        Ok(())
    }
}

/// Eval-mode argmax predictions, computed `batch_size` graphs at a time.
pub fn predict(samples: &[GraphSample], params: &ModelParams, batch_size: usize) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(batch_size.max(1)) {
        let members: Vec<&GraphSample> = chunk.iter().collect();
        let logits = params.logits(&GraphBatch::new(&members)?)?;
        out.extend(argmax_rows(&logits));
    }
    Ok(out)
}

pub fn evaluate(samples: &[GraphSample], params: &ModelParams, batch_size: usize) -> Result<(MetricsReport, Vec<usize>)> {
    let predicted = predict(samples, params, batch_size)?;
    let truth: Vec<usize> = samples.iter().map(|s| s.label).collect();
    let report = metrics(&ConfusionMatrix::from_pairs(NUM_CLASSES, &truth, &predicted)?)?;
    Ok((report, predicted))
}

/// Emotion to polarity: happy and surprised are positive, the rest negative.
pub fn sentiment_collapse(label: EmotionLabel) -> Sentiment {
    label.sentiment()
}

fn sentiment_index(s: Sentiment) -> Option<usize> {
    match s {
        Sentiment::Positive => Some(0),
        Sentiment::Negative => Some(1),
        Sentiment::Neutral => None,
    }
}

/// Predictions from another system over the same pairs, in pair order.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalPredictions {
    pub name: String,
    pub predictions: Vec<Sentiment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRow {
    pub model: String,
    pub report: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairBaselineReport {
    pub pairs: usize,
    pub rows: Vec<BaselineRow>,
}

impl fmt::Display for PairBaselineReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<28} {:>8} {:>9} {:>9}", "model", "f1", "precision", "recall")?;
        for row in &self.rows {
            writeln!(
                f,
                "{:<28} {:>8.4} {:>9.4} {:>9.4}",
                row.model, row.report.macro_f1, row.report.macro_precision, row.report.macro_recall
            )?;
        }
        write!(f, "pairs: {}", self.pairs)
    }
}

/// Binary sentiment scores on two-tweet networks. Each network's emotion
/// prediction is collapsed to polarity; external systems are scored on the
/// same pairs. A neutral external prediction counts as the wrong polarity.
pub fn pair_baseline(
    pairs: &[TweetMln],
    embeddings: &Embeddings,
    params: &ModelParams,
    external: &[ExternalPredictions],
) -> Result<PairBaselineReport> {
    for (index, mln) in pairs.iter().enumerate() {
        if mln.group_size != 2 {
            return Err(Error::BadGroupSize {
                index,
                size: mln.group_size,
            });
        }
    }
    if pairs.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    let truth: Vec<usize> = pairs
        .iter()
        .map(|m| sentiment_index(sentiment_collapse(m.label)).expect("emotions are polar"))
        .collect();
    let samples: Vec<GraphSample> = pairs.iter().map(|m| GraphSample::new(m, embeddings)).collect();
    let predicted = predict(&samples, params, 32)?;

    let score = |predicted: &mut dyn Iterator<Item = Option<usize>>| -> Result<MetricsReport> {
        let mut cm = ConfusionMatrix::binary_sentiment();
        for (&t, p) in truth.iter().zip(predicted) {
            cm.add(t, p.unwrap_or(1 - t));
        }
        metrics(&cm)
    };

    let mut rows = vec![BaselineRow {
        model: format!("MLTA ({})", params.config.conv),
        report: score(&mut predicted.iter().map(|&p| {
            let label = EmotionLabel::ALL[p];
            sentiment_index(sentiment_collapse(label))
        }))?,
    }];
    for ext in external {
        if ext.predictions.len() != pairs.len() {
            return Err(Error::LengthMismatch {
                left: pairs.len(),
                right: ext.predictions.len(),
            });
        }
        rows.push(BaselineRow {
            model: ext.name.clone(),
            report: score(&mut ext.predictions.iter().map(|&s| sentiment_index(s)))?,
        });
    }
    Ok(PairBaselineReport {
        pairs: pairs.len(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub conv: ConvKind,
    /// Best test macro-F1 over the run.
    pub f1: f64,
    pub final_f1: f64,
    pub seconds_per_epoch: f64,
    pub epochs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn row(&self, name: &str) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.conv.name() == name)
    }
}

impl fmt::Display for AblationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<14} {:>8} {:>9} {:>14}", "conv", "f1", "final_f1", "seconds/epoch")?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<14} {:>8.4} {:>9.4} {:>14.3}",
                r.conv.to_string(),
                r.f1,
                r.final_f1,
                r.seconds_per_epoch
            )?;
        }
        Ok(())
    }
}

/// Trains every convolution kind on the same data and seed. `heads` is
/// the GATv2 head count.
pub fn ablation(
    train_set: &[GraphSample],
    test_set: &[GraphSample],
    base: &TrainConfig,
    heads: usize,
) -> Result<AblationReport> {
    let mut rows = Vec::with_capacity(3);
    for conv in ConvKind::all(heads) {
        let mut config = base.clone();
        config.model.conv = conv;
        log::info!("ablation: training {conv}");
        let outcome = training::train(train_set, test_set, &config)?;
        rows.push(AblationRow {
            conv,
            f1: outcome.best_test_f1().unwrap_or(0.0),
            final_f1: outcome.history.last().map_or(0.0, |r| r.test_f1),
            seconds_per_epoch: outcome.mean_seconds_per_epoch(),
            epochs: outcome.history.len(),
        });
    }
    Ok(AblationReport { rows })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::autodiff::Matrix;
    use crate::gnn::ModelConfig;
    use crate::mln::build_groups;
    use crate::preprocess::Cleaner;
    use crate::synthetic::{generate, GenConfig};

    fn cm(rows: &[&[u64]]) -> ConfusionMatrix {
        ConfusionMatrix::from_counts(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn perfect_diagonal_scores_one() {
        let r = metrics(&cm(&[&[3, 0, 0], &[0, 2, 0], &[0, 0, 5]])).unwrap();
        assert_eq!((r.macro_precision, r.macro_recall, r.macro_f1), (1.0, 1.0, 1.0));
        assert!(!r.zero_division);
        assert_eq!(r.samples, 10);
    }

    #[test]
    fn two_thirds_example() {
        let r = metrics(&cm(&[&[2, 1, 0], &[1, 3, 0], &[0, 0, 4]])).unwrap();
        let c = &r.per_class[0];
        for v in [c.precision, c.recall, c.f1] {
            assert!((v - 2.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn absent_class_scores_zero_and_is_left_out_of_the_mean() {
        let r = metrics(&cm(&[&[2, 0, 0], &[0, 0, 0], &[1, 0, 1]])).unwrap();
        let absent = &r.per_class[1];
        assert_eq!((absent.precision, absent.recall, absent.f1, absent.present), (0.0, 0.0, 0.0, false));
        assert!(r.zero_division);
        let f0 = 2.0 * (2.0 / 3.0) / (2.0 / 3.0 + 1.0);
        let f2 = 2.0 * 0.5 / 1.5;
        assert!((r.macro_f1 - (f0 + f2) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn empty_matrix_is_an_error() {
        assert!(matches!(metrics(&ConfusionMatrix::new(6)), Err(Error::EmptyMatrix)));
    }

    #[test]
    fn from_pairs_counts() {
        let m = ConfusionMatrix::from_pairs(6, &[0, 0, 5, 3], &[0, 1, 5, 3]).unwrap();
        assert_eq!(m.get(0, 1), 1);
        assert_eq!(m.total(), 4);
        assert_eq!(m.labels[0], "angry");
        assert!(ConfusionMatrix::from_pairs(6, &[0], &[]).is_err());
        assert!(ConfusionMatrix::from_pairs(6, &[6], &[0]).is_err());
    }

    #[test]
    fn sentiment_collapse_follows_the_emotion_table() {
        use EmotionLabel::*;
        let expected = [
            (Angry, Sentiment::Negative),
            (Bad, Sentiment::Negative),
            (Fearful, Sentiment::Negative),
            (Happy, Sentiment::Positive),
            (Sad, Sentiment::Negative),
            (Surprised, Sentiment::Positive),
        ];
        for (label, s) in expected {
            assert_eq!(sentiment_collapse(label), s);
        }
    }

    fn tiny_params(conv: ConvKind) -> ModelParams {
        ModelParams::init(ModelConfig {
            conv,
            in_dim: 6,
            conv_dim: 4,
            fc1_dim: 5,
            fc2_dim: 4,
            seed: 3,
            ..ModelConfig::default()
        })
        .unwrap()
    }

    fn pairs() -> (Vec<TweetMln>, Embeddings) {
        let corpus = generate(&GenConfig {
            tweets_per_class: 4,
            vocab_per_class: 8,
            shared_vocab: 4,
            dimension: 6,
            seed: 2,
            ..GenConfig::default()
        })
        .unwrap();
        let emb = Embeddings::single(corpus.embeddings);
        let cleaner = Cleaner::builtin().with_vocabulary(emb.vocabulary());
        let clean: Vec<_> = corpus.tweets.iter().map(|t| cleaner.clean(t).unwrap()).collect();
        (build_groups(&clean, 2).unwrap().0, emb)
    }

    #[test]
    fn batched_and_single_predictions_agree() {
        let (mlns, emb) = pairs();
        let samples: Vec<_> = mlns.iter().map(|m| GraphSample::new(m, &emb)).collect();
        let p = tiny_params(ConvKind::GatV2 { heads: 2 });
        let batched = predict(&samples, &p, 5).unwrap();
        let single = predict(&samples, &p, 1).unwrap();
        assert_eq!(batched, single);
        let (report, predicted) = evaluate(&samples, &p, 32).unwrap();
        assert_eq!(predicted, batched);
        assert_eq!(report.samples, samples.len() as u64);
    }

    /// A model whose output ignores its input and always picks `label`.
    fn constant_model(label: EmotionLabel) -> ModelParams {
        let mut p = tiny_params(ConvKind::Graph);
        let id = p.set.find("out.bias").unwrap();
        let mut bias = Matrix::zeros(1, NUM_CLASSES);
        bias.as_mut_slice()[label.index()] = 1e3;
        p.set.get_mut(id).value = bias;
        p
    }

    #[test]
    fn pair_baseline_rows_and_scores() {
        let (mlns, emb) = pairs();
        assert_eq!(mlns.len(), 12);
        let positive: Vec<TweetMln> = mlns
            .iter()
            .filter(|m| m.label.sentiment() == Sentiment::Positive)
            .cloned()
            .collect();
        let report = pair_baseline(&positive, &emb, &constant_model(EmotionLabel::Happy), &[]).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert_eq!(report.rows[0].model, "MLTA (graphconv)");
        assert_eq!(report.rows[0].report.macro_f1, 1.0);

        // 4 positive and 8 negative pairs; a constant "positive" system
        // gets TP=4, FP=8 for positive and nothing right for negative.
        let external = ExternalPredictions {
            name: "always-positive".into(),
            predictions: vec![Sentiment::Positive; mlns.len()],
        };
        let neutral = ExternalPredictions {
            name: "always-neutral".into(),
            predictions: vec![Sentiment::Neutral; mlns.len()],
        };
        let report = pair_baseline(&mlns, &emb, &constant_model(EmotionLabel::Sad), &[external, neutral]).unwrap();
        assert_eq!(report.rows.len(), 3);
        let ext = &report.rows[1].report;
        let (p, r) = (4.0 / 12.0, 1.0);
        let f_pos = 2.0 * p * r / (p + r);
        assert!((ext.per_class[0].f1 - f_pos).abs() < 1e-12);
        assert_eq!(ext.per_class[1].f1, 0.0);
        assert!((ext.macro_f1 - f_pos / 2.0).abs() < 1e-12);
        assert_eq!(report.rows[2].report.macro_f1, 0.0);
        let text = report.to_string();
        assert!(text.contains("always-positive") && text.contains("pairs: 12"));
    }

    #[test]
    fn pair_baseline_errors() {
        let (mlns, emb) = pairs();
        let p = tiny_params(ConvKind::Gcn);
        let mut wrong = mlns.clone();
        wrong[3].group_size = 3;
        assert!(matches!(
            pair_baseline(&wrong, &emb, &p, &[]),
            Err(Error::BadGroupSize { index: 3, size: 3 })
        ));
        let short = ExternalPredictions {
            name: "short".into(),
            predictions: vec![Sentiment::Positive],
        };
        assert!(matches!(
            pair_baseline(&mlns, &emb, &p, &[short]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn ablation_has_one_row_per_kind() {
        let (mlns, emb) = pairs();
        let samples: Vec<_> = mlns.iter().map(|m| GraphSample::new(m, &emb)).collect();
        let config = TrainConfig {
            epochs: 2,
            batch_size: 4,
            model: tiny_params(ConvKind::Gcn).config,
            ..TrainConfig::default()
        };
        let report = ablation(&samples[..6], &samples[6..], &config, 2).unwrap();
        assert_eq!(report.rows.len(), 3);
        assert!(report.rows.iter().all(|r| r.seconds_per_epoch > 0.0 && r.epochs == 2));
        assert!(report.row("gatv2").is_some());
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("graphconv"));
        assert_eq!(report.to_string().lines().count(), 4);
    }

    #[test]
    fn report_renders_and_serializes() {
        let r = metrics(&cm(&[&[1, 1], &[0, 2]])).unwrap();
        let json: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert_eq!(json["confusion"]["counts"], serde_json::json!([1, 1, 0, 2]));
        assert!(r.to_string().contains("macro"));
    }

    fn counts(n: usize) -> impl Strategy<Value = Vec<Vec<u64>>> {
        prop::collection::vec(prop::collection::vec(0u64..20, n), n)
            .prop_filter("non-empty", |rows| rows.iter().flatten().sum::<u64>() > 0)
    }

    proptest! {
        #[test]
        fn binary_counts_match_direct_formulas(rows in counts(2)) {
            let r = metrics(&ConfusionMatrix::from_counts(rows.clone()).unwrap()).unwrap();
            let (tp, fn_, fp) = (rows[0][0] as f64, rows[0][1] as f64, rows[1][0] as f64);
            let p = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
            let rc = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
            let f = if p + rc > 0.0 { 2.0 * p * rc / (p + rc) } else { 0.0 };
            prop_assert!((r.per_class[0].precision - p).abs() < 1e-12);
            prop_assert!((r.per_class[0].recall - rc).abs() < 1e-12);
            prop_assert!((r.per_class[0].f1 - f).abs() < 1e-12);
        }

        #[test]
        fn metrics_follow_class_permutations(rows in counts(6), perm in Just((0..6).collect::<Vec<usize>>()).prop_shuffle()) {
            let base = metrics(&ConfusionMatrix::from_counts(rows.clone()).unwrap()).unwrap();
            let permuted: Vec<Vec<u64>> = (0..6)
                .map(|i| (0..6).map(|j| rows[perm[i]][perm[j]]).collect())
                .collect();
            let moved = metrics(&ConfusionMatrix::from_counts(permuted).unwrap()).unwrap();
            for i in 0..6 {
                let (a, b) = (&moved.per_class[i], &base.per_class[perm[i]]);
                prop_assert_eq!((a.precision, a.recall, a.f1), (b.precision, b.recall, b.f1));
            }
            prop_assert!((moved.macro_f1 - base.macro_f1).abs() < 1e-12);
            let present: Vec<f64> = base.per_class.iter().filter(|m| m.present).map(|m| m.f1).collect();
            prop_assert_eq!(base.macro_f1, present.iter().sum::<f64>() / present.len() as f64);
            prop_assert!(base.per_class.iter().all(|m| (0.0..=1.0).contains(&m.f1)));
        }
    }
}
