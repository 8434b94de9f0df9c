//! Shared fixtures for the benchmarks.

use mlta_core::embedding::Embeddings;
use mlta_core::gnn::GraphSample;
use mlta_core::mln::{build_groups, TweetMln};
use mlta_core::preprocess::{CleanTweet, Cleaner, RawTweet};
use mlta_core::synthetic::{generate, GenConfig};

pub struct Fixture {
    pub raw: Vec<RawTweet>,
    pub clean: Vec<CleanTweet>,
    pub mlns: Vec<TweetMln>,
    pub samples: Vec<GraphSample>,
    pub embeddings: Embeddings,
}

/// Synthetic corpus with 300-dimensional vectors grouped `group_size` tweets per network.
pub fn fixture(tweets_per_class: usize, group_size: usize) -> Fixture {
    let corpus = generate(&GenConfig {
        tweets_per_class,
        seed: 1,
        ..GenConfig::default()
    })
    .expect("valid generator config");
    let embeddings = Embeddings::single(corpus.embeddings);
    let cleaner = Cleaner::builtin().with_vocabulary(embeddings.vocabulary());
    let clean: Vec<CleanTweet> = corpus
        .tweets
        .iter()
        .map(|t| cleaner.clean(t).expect("synthetic tweets survive cleaning"))
        .collect();
    let (mlns, _) = build_groups(&clean, group_size).expect("group size is positive");
    let samples = mlns.iter().map(|m| GraphSample::new(m, &embeddings)).collect();
    Fixture {
        raw: corpus.tweets,
        clean,
        mlns,
        samples,
        embeddings,
    }
}
