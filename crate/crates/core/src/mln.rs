//! Three-layer tweet networks.
//!
//! One network is built from a group of same-label tweets:
//!
//! * layer 1, undirected: hashtag tokens. Two tokens are linked when they
//!   occur in the same tweet, or in two tweets that share a hashtag token.
//! * layer 2, directed: keyword tokens, chained in reading order per tweet.
//!   Hashtags are skipped, so the edge runs to the following keyword.
//! * layer 3, undirected: one node per tweet, linked when the tweets'
//!   hashtag token sets intersect.
//!
//! Layers never share node identifiers and carry no cross-layer edges.
//! A layer that would be empty gets a single sentinel node with an empty
//! payload, which featurizes to the zero vector.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::EmotionLabel;
use crate::preprocess::{write_jsonl, CleanTweet};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerGraph {
    pub node_ids: Vec<String>,
    pub node_payloads: Vec<String>,
    /// Undirected layers store `(u, v)` with `u < v`. Sorted, no duplicates.
    pub edges: Vec<(usize, usize)>,
    pub directed: bool,
}

impl LayerGraph {
    pub fn num_nodes(&self) -> usize {
        self.node_payloads.len()
    }

    pub fn is_sentinel(&self) -> bool {
        self.node_payloads.len() == 1 && self.node_payloads[0].is_empty()
    }

    fn sentinel(layer: usize, directed: bool) -> Self {
        LayerGraph {
            node_ids: vec![format!("L{layer}:<empty>")],
            node_payloads: vec![String::new()],
            edges: Vec::new(),
            directed,
        }
    }

    fn from_parts(
        layer: usize,
        payloads: Vec<String>,
        edges: BTreeSet<(usize, usize)>,
        directed: bool,
    ) -> Self {
        if payloads.is_empty() {
            return Self::sentinel(layer, directed);
        }
        LayerGraph {
            node_ids: (0..payloads.len())
                .map(|i| node_id(layer, &payloads, i))
                .collect(),
            node_payloads: payloads,
            edges: edges.into_iter().collect(),
            directed,
        }
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_nodes();
        if n == 0 || self.node_ids.len() != n {
            return Err(Error::MalformedGraph("layer without nodes".into()));
        }
        let mut seen = HashSet::new();
        for &(u, v) in &self.edges {
            if u >= n || v >= n {
                return Err(Error::MalformedGraph(format!(
                    "edge ({u}, {v}) out of range for {n} nodes"
                )));
            }
            if u == v {
                return Err(Error::MalformedGraph(format!("self-edge on node {u}")));
            }
            if !self.directed && u > v {
                return Err(Error::MalformedGraph(format!(
                    "undirected edge ({u}, {v}) not stored as (min, max)"
                )));
            }
            if !seen.insert((u, v)) {
                return Err(Error::MalformedGraph(format!("duplicate edge ({u}, {v})")));
            }
        }
        Ok(())
    }
}

fn node_id(layer: usize, payloads: &[String], i: usize) -> String {
    if layer == 3 {
        format!("L3:{i}")
    } else {
        format!("L{layer}:{}", payloads[i])
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TweetMln {
    pub layers: [LayerGraph; 3],
    pub label: EmotionLabel,
    pub group_size: usize,
}

impl TweetMln {
    pub fn hashtag_layer(&self) -> &LayerGraph {
        &self.layers[0]
    }

    pub fn keyword_layer(&self) -> &LayerGraph {
        &self.layers[1]
    }

    pub fn tweet_layer(&self) -> &LayerGraph {
        &self.layers[2]
    }
}

/// Assigns indices to tokens in order of first appearance.
struct Interner {
    index: HashMap<String, usize>,
    tokens: Vec<String>,
}

impl Interner {
    fn new() -> Self {
        Interner {
            index: HashMap::new(),
            tokens: Vec::new(),
        }
    }

    fn intern(&mut self, token: &str) -> usize {
        if let Some(&i) = self.index.get(token) {
            return i;
        }
        let i = self.tokens.len();
        self.index.insert(token.to_string(), i);
        self.tokens.push(token.to_string());
        i
    }
}

fn ordered(u: usize, v: usize) -> (usize, usize) {
    (u.min(v), u.max(v))
}

/// Per-tweet distinct hashtag node indices, plus the interned tokens.
fn hashtag_sets(tweets: &[CleanTweet]) -> (Vec<BTreeSet<usize>>, Vec<String>) {
    let mut interner = Interner::new();
    let sets = tweets
        .iter()
        .map(|t| t.hashtag_tokens.iter().map(|h| interner.intern(h)).collect())
        .collect();
    (sets, interner.tokens)
}

pub fn build_layer1(tweets: &[CleanTweet]) -> LayerGraph {
    let (sets, tokens) = hashtag_sets(tweets);
    let mut edges = BTreeSet::new();
    for (i, a) in sets.iter().enumerate() {
        for &u in a {
            for &v in a {
                if u != v {
                    edges.insert(ordered(u, v));
                }
            }
        }
        for b in &sets[i + 1..] {
            if a.is_disjoint(b) {
                continue;
            }
            for &u in a {
                for &v in b {
                    if u != v {
                        edges.insert(ordered(u, v));
                    }
                }
            }
        }
    }
    LayerGraph::from_parts(1, tokens, edges, false)
}

pub fn build_layer2(tweets: &[CleanTweet]) -> LayerGraph {
    let mut interner = Interner::new();
    let mut edges = BTreeSet::new();
    for tweet in tweets {
        let chain: Vec<usize> = tweet
            .keyword_tokens
            .iter()
            .map(|k| interner.intern(k))
            .collect();
        for pair in chain.windows(2) {
            if pair[0] != pair[1] {
                edges.insert((pair[0], pair[1]));
            }
        }
    }
    LayerGraph::from_parts(2, interner.tokens, edges, true)
}

pub fn build_layer3(tweets: &[CleanTweet]) -> LayerGraph {
    let (sets, _) = hashtag_sets(tweets);
    let mut edges = BTreeSet::new();
    for i in 0..sets.len() {
        for j in i + 1..sets.len() {
            if !sets[i].is_disjoint(&sets[j]) {
                edges.insert((i, j));
            }
        }
    }
    let payloads = tweets.iter().map(|t| t.raw_text.clone()).collect();
    LayerGraph::from_parts(3, payloads, edges, false)
}

pub fn build_mln(tweets: &[CleanTweet]) -> Result<TweetMln> {
    let first = tweets.first().ok_or(Error::EmptyGroup)?;
    if let Some(other) = tweets.iter().find(|t| t.label != first.label) {
        return Err(Error::MixedLabels {
            first: first.label.to_string(),
            other: other.label.to_string(),
        });
    }
    Ok(TweetMln {
        layers: [
            build_layer1(tweets),
            build_layer2(tweets),
            build_layer3(tweets),
        ],
        label: first.label,
        group_size: tweets.len(),
    })
}

/// Groups tweets by label (in label order, keeping input order inside a
/// label) and builds one network per full group. Returns the networks and
/// the number of leftover tweets that did not fill a group.
pub fn build_groups(tweets: &[CleanTweet], group_size: usize) -> Result<(Vec<TweetMln>, usize)> {
    if group_size == 0 {
        return Err(Error::InvalidConfig("group size must be at least 1".into()));
    }
    let mut by_label: Vec<Vec<CleanTweet>> = vec![Vec::new(); EmotionLabel::ALL.len()];
    for tweet in tweets {
        by_label[tweet.label.index()].push(tweet.clone());
    }
    let mut mlns = Vec::new();
    let mut leftover = 0;
    for group in &by_label {
        let chunks = group.chunks_exact(group_size);
        leftover += chunks.remainder().len();
        for chunk in chunks {
            mlns.push(build_mln(chunk)?);
        }
    }
    Ok((mlns, leftover))
}

#[derive(Serialize, Deserialize)]
struct LayerRecord {
    directed: bool,
    nodes: Vec<String>,
    edges: Vec<[usize; 2]>,
}

#[derive(Serialize, Deserialize)]
struct MlnRecord {
    label: EmotionLabel,
    layers: Vec<LayerRecord>,
}

impl From<&TweetMln> for MlnRecord {
    fn from(mln: &TweetMln) -> Self {
        MlnRecord {
            label: mln.label,
            layers: mln
                .layers
                .iter()
                .map(|layer| LayerRecord {
                    directed: layer.directed,
                    nodes: layer.node_payloads.clone(),
                    edges: layer.edges.iter().map(|&(u, v)| [u, v]).collect(),
                })
                .collect(),
        }
    }
}

impl TryFrom<MlnRecord> for TweetMln {
    type Error = Error;

    fn try_from(record: MlnRecord) -> Result<Self> {
        let [l1, l2, l3]: [LayerRecord; 3] = record
            .layers
            .try_into()
            .map_err(|_| Error::MalformedGraph("expected exactly 3 layers".into()))?;
        let convert = |layer: usize, rec: LayerRecord| -> Result<LayerGraph> {
            let graph = LayerGraph {
                node_ids: (0..rec.nodes.len())
                    .map(|i| {
                        if rec.nodes[i].is_empty() {
                            format!("L{layer}:<empty>")
                        } else {
                            node_id(layer, &rec.nodes, i)
                        }
                    })
                    .collect(),
                node_payloads: rec.nodes,
                edges: rec.edges.into_iter().map(|[u, v]| (u, v)).collect(),
                directed: rec.directed,
            };
            graph.validate()?;
            Ok(graph)
        };
        let layers = [convert(1, l1)?, convert(2, l2)?, convert(3, l3)?];
        let group_size = layers[2].num_nodes();
        Ok(TweetMln {
            layers,
            label: record.label,
            group_size,
        })
    }
}

pub fn mln_to_json(mln: &TweetMln) -> String {
    serde_json::to_string(&MlnRecord::from(mln)).expect("network records always serialize")
}

pub fn mln_from_json(text: &str) -> Result<TweetMln> {
    serde_json::from_str::<MlnRecord>(text)?.try_into()
}

/// One network per line.
pub fn write_mlns(path: impl AsRef<Path>, mlns: &[TweetMln]) -> Result<()> {
    let records: Vec<MlnRecord> = mlns.iter().map(MlnRecord::from).collect();
    write_jsonl(path.as_ref(), &records)
}

pub fn read_mlns(path: impl AsRef<Path>) -> Result<Vec<TweetMln>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut mlns = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        mlns.push(mln_from_json(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(mlns)
}
