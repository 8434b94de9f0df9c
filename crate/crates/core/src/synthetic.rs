//! Seeded synthetic corpora with tunable class separability.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::{EmbeddingTable, DEFAULT_DIMENSION};
use crate::error::{Error, Result};
use crate::label::{EmotionLabel, NUM_CLASSES};
use crate::preprocess::RawTweet;
use crate::seed::mix_seed;

pub const MIN_TOKENS: usize = 5;
pub const MAX_TOKENS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub tweets_per_class: usize,
    pub vocab_per_class: usize,
    pub shared_vocab: usize,
    /// Probability that a tweet carries a class hashtag.
    pub hashtag_rate: f64,
    /// Probability that a class token (or hashtag) is drawn from a class
    /// chosen uniformly at random instead of the tweet's own class.
    pub noise_rate: f64,
    /// Probability that a token comes from the shared vocabulary.
    pub shared_rate: f64,
    pub hashtags_per_class: usize,
    pub dimension: usize,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            tweets_per_class: 600,
            vocab_per_class: 60,
            shared_vocab: 60,
            hashtag_rate: 0.5,
            noise_rate: 0.1,
            shared_rate: 0.4,
            hashtags_per_class: 8,
            dimension: DEFAULT_DIMENSION,
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("tweets_per_class", self.tweets_per_class),
            ("vocab_per_class", self.vocab_per_class),
            ("hashtags_per_class", self.hashtags_per_class),
            ("dimension", self.dimension),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidConfig(format!("{name} must be positive")));
        }
        let rates = [
            ("hashtag_rate", self.hashtag_rate),
            ("noise_rate", self.noise_rate),
            ("shared_rate", self.shared_rate),
        ];
        if let Some((name, v)) = rates.iter().find(|(_, v)| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidConfig(format!("{name} {v} outside [0, 1]")));
        }
        if self.shared_vocab == 0 && self.shared_rate > 0.0 {
            return Err(Error::InvalidConfig("shared_rate > 0 needs a shared vocabulary".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub tweets: Vec<RawTweet>,
    /// One vector per vocabulary word; hashtags are compounds of these.
    pub embeddings: EmbeddingTable,
    pub class_vocab: Vec<Vec<String>>,
    pub shared_vocab: Vec<String>,
    /// Hashtag bodies per class, without the leading '#'.
    pub hashtags: Vec<Vec<String>>,
}

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";
const SYLLABLES: usize = 70;
const WORD_SPACE: usize = SYLLABLES * SYLLABLES * SYLLABLES;
/// Coprime with `WORD_SPACE`, so `i * STRIDE mod WORD_SPACE` is a bijection.
const STRIDE: usize = 104_729;

/// The `i`-th word of a fixed sequence of distinct three-syllable words.
pub fn word(i: usize) -> String {
    let mut code = (i % WORD_SPACE) * STRIDE % WORD_SPACE;
    let mut out = String::with_capacity(6);
    for _ in 0..3 {
        let s = code % SYLLABLES;
        code /= SYLLABLES;
        out.push(CONSONANTS[s / VOWELS.len()] as char);
        out.push(VOWELS[s % VOWELS.len()] as char);
    }
    out
}

fn pick<'a>(rng: &mut ChaCha8Rng, items: &'a [String]) -> &'a str {
    &items[rng.random_range(0..items.len())]
}

pub fn generate(config: &GenConfig) -> Result<SyntheticCorpus> {
    config.validate()?;
    if NUM_CLASSES * config.vocab_per_class + config.shared_vocab > WORD_SPACE {
        return Err(Error::InvalidConfig("vocabulary too large".into()));
    }
    let mut next = 0;
    let mut words = |n: usize| -> Vec<String> {
        let out = (next..next + n).map(word).collect();
        next += n;
        out
    };
    let class_vocab: Vec<Vec<String>> = (0..NUM_CLASSES).map(|_| words(config.vocab_per_class)).collect();
    let shared_vocab = words(config.shared_vocab);

    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, 0x5e7));
    let hashtags: Vec<Vec<String>> = class_vocab
        .iter()
        .map(|vocab| {
            (0..config.hashtags_per_class)
                .map(|_| format!("{}{}", pick(&mut rng, vocab), pick(&mut rng, vocab)))
                .collect()
        })
        .collect();

    let mut embeddings = EmbeddingTable::empty("synthetic", config.dimension);
    let mut vec_rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, 0xe3b));
    for w in class_vocab.iter().flatten().chain(&shared_vocab) {
        let v: Vec<f64> = (0..config.dimension).map(|_| vec_rng.random_range(-1.0..1.0)).collect();
        embeddings.insert(w, &v)?;
    }

    let mut tweets = Vec::with_capacity(NUM_CLASSES * config.tweets_per_class);
    for label in EmotionLabel::ALL {
        for _ in 0..config.tweets_per_class {
            let source = |rng: &mut ChaCha8Rng| {
                if rng.random_bool(config.noise_rate) {
                    rng.random_range(0..NUM_CLASSES)
                } else {
                    label.index()
                }
            };
            let len = rng.random_range(MIN_TOKENS..=MAX_TOKENS);
            let mut tokens: Vec<String> = Vec::with_capacity(len + 1);
            // The first token is always a class token so no tweet is
            // shared-vocabulary only.
            for k in 0..len {
                if k > 0 && config.shared_vocab > 0 && rng.random_bool(config.shared_rate) {
                    tokens.push(pick(&mut rng, &shared_vocab).to_string());
                } else {
                    let class = source(&mut rng);
                    tokens.push(pick(&mut rng, &class_vocab[class]).to_string());
                }
            }
            if rng.random_bool(config.hashtag_rate) {
                let class = source(&mut rng);
                let at = rng.random_range(0..=tokens.len());
                tokens.insert(at, format!("#{}", pick(&mut rng, &hashtags[class])));
            }
            tweets.push(RawTweet::new(tokens.join(" "), label));
        }
    }
    Ok(SyntheticCorpus {
        tweets,
        embeddings,
        class_vocab,
        shared_vocab,
        hashtags,
    })
}
