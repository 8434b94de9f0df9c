//! Pretrained word vectors and node featurization.
//!
//! Lookups go through a primary table, then a fallback table, and finally a
//! deterministic pseudo-vector seeded from the token hash, so every token
//! gets a vector.

use std::borrow::Cow;
use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::Matrix;
use crate::error::{Error, Result};
use crate::mln::{LayerGraph, TweetMln};
use crate::preprocess::token_views;

pub const DEFAULT_DIMENSION: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub name: String,
    dimension: usize,
    index: HashMap<String, usize>,
    data: Vec<f64>,
}

impl EmbeddingTable {
    pub fn empty(name: impl Into<String>, dimension: usize) -> Self {
        EmbeddingTable {
            name: name.into(),
            dimension,
            index: HashMap::new(),
            data: Vec::new(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.index
            .get(token)
            .map(|&i| &self.data[i * self.dimension..(i + 1) * self.dimension])
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    /// Inserts a vector, lowercasing the token. An existing entry wins.
    pub fn insert(&mut self, token: &str, vector: &[f64]) -> Result<()> {
        if vector.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                line: self.len() + 1,
                expected: self.dimension,
                found: vector.len(),
            });
        }
        let token = token.to_lowercase();
        if !self.index.contains_key(&token) {
            self.index.insert(token, self.index.len());
            self.data.extend_from_slice(vector);
        }
        Ok(())
    }

    /// Tokens in insertion order.
    pub fn tokens(&self) -> Vec<&str> {
        let mut tokens = vec![""; self.index.len()];
        for (token, &i) in &self.index {
            tokens[i] = token;
        }
        tokens
    }

    /// Multiplies every vector by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// Parses the plain-text vector layout: `token v1 ... vd` per line, with
    /// an optional leading `count dimension` header.
    pub fn parse(name: impl Into<String>, reader: impl BufRead) -> Result<Self> {
        let mut table: Option<EmbeddingTable> = None;
        let name = name.into();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            let mut fields = line.split_whitespace();
            let Some(token) = fields.next() else { continue };
            let values: Vec<&str> = fields.collect();
            if i == 0 && is_header(token, &values) {
                continue;
            }
            let vector = values
                .iter()
                .map(|v| {
                    v.parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| Error::Parse {
                            line: line_no,
                            message: format!("{v:?} is not a finite number"),
                        })
                })
                .collect::<Result<Vec<f64>>>()?;
            let table = table.get_or_insert_with(|| EmbeddingTable::empty(name.clone(), vector.len()));
            if vector.is_empty() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("token {token:?} has no vector"),
                });
            }
            if vector.len() != table.dimension {
                return Err(Error::DimensionMismatch {
                    line: line_no,
                    expected: table.dimension,
                    found: vector.len(),
                });
            }
            table.insert(token, &vector)?;
        }
        table.ok_or(Error::Parse {
            line: 0,
            message: "embedding file contains no vectors".into(),
        })
    }

    pub fn write(&self, writer: impl Write) -> std::io::Result<()> {
        let mut out = BufWriter::new(writer);
        for token in self.tokens() {
            write!(out, "{token}")?;
            for v in self.get(token).expect("token listed by the table") {
                write!(out, " {v}")?;
            }
            writeln!(out)?;
        }
        out.flush()
    }
}

fn is_header(first: &str, rest: &[&str]) -> bool {
    rest.len() == 1 && first.parse::<usize>().is_ok() && rest[0].parse::<usize>().is_ok()
}

pub fn load_table(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map_or_else(|| "embeddings".to_string(), |s| s.to_string_lossy().into_owned());
    EmbeddingTable::parse(name, BufReader::new(file))
}

pub fn write_table(path: impl AsRef<Path>, table: &EmbeddingTable) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    table.write(file).map_err(|e| Error::io(path, e))
}

/// Primary table, fallback table, then hashed pseudo-vectors.
#[derive(Debug, Clone)]
pub struct Embeddings {
    pub primary: EmbeddingTable,
    pub fallback: EmbeddingTable,
}

impl Embeddings {
    pub fn new(primary: EmbeddingTable, fallback: EmbeddingTable) -> Result<Self> {
        if primary.dimension() != fallback.dimension() {
            return Err(Error::DimensionMismatch {
                line: 0,
                expected: primary.dimension(),
                found: fallback.dimension(),
            });
        }
        Ok(Embeddings { primary, fallback })
    }

    /// A single table with an empty fallback.
    pub fn single(primary: EmbeddingTable) -> Self {
        let fallback = EmbeddingTable::empty("fallback", primary.dimension());
        Embeddings { primary, fallback }
    }

    pub fn dimension(&self) -> usize {
        self.primary.dimension()
    }

    pub fn knows(&self, token: &str) -> bool {
        self.primary.contains(token) || self.fallback.contains(token)
    }

    pub fn vocabulary(&self) -> HashSet<String> {
        self.primary
            .tokens()
            .into_iter()
            .chain(self.fallback.tokens())
            .map(str::to_string)
            .collect()
    }

    pub fn lookup(&self, token: &str) -> Cow<'_, [f64]> {
        lookup(token, &self.primary, &self.fallback)
    }

    pub fn featurize(&self, mln: &TweetMln) -> MlnFeatures {
        featurize(mln, self)
    }
}

pub fn lookup<'a>(token: &str, primary: &'a EmbeddingTable, fallback: &'a EmbeddingTable) -> Cow<'a, [f64]> {
    if let Some(v) = primary.get(token) {
        return Cow::Borrowed(v);
    }
    if let Some(v) = fallback.get(token) {
        return Cow::Borrowed(v);
    }
    Cow::Owned(hashed_vector(token, primary.dimension()))
}

/// Unit-norm vector with components drawn from a generator seeded by the
/// FNV-1a hash of the token.
pub fn hashed_vector(token: &str, dimension: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(fnv1a(token.as_bytes()));
    let mut v: Vec<f64> = (0..dimension).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Node feature matrices for the three layers of one network.
#[derive(Debug, Clone, PartialEq)]
pub struct MlnFeatures {
    pub layers: [Matrix; 3],
}

pub fn featurize(mln: &TweetMln, embeddings: &Embeddings) -> MlnFeatures {
    let token_layer = |layer: &LayerGraph| {
        let dim = embeddings.dimension();
        let mut m = Matrix::zeros(layer.num_nodes(), dim);
        if !layer.is_sentinel() {
            for (r, token) in layer.node_payloads.iter().enumerate() {
                m.row_mut(r).copy_from_slice(&embeddings.lookup(token));
            }
        }
        m
    };
    let tweet_layer = |layer: &LayerGraph| {
        let dim = embeddings.dimension();
        let known = |w: &str| embeddings.knows(w);
        let mut m = Matrix::zeros(layer.num_nodes(), dim);
        for (r, text) in layer.node_payloads.iter().enumerate() {
            let (hashtags, keywords) = token_views(text, &known);
            let count = hashtags.len() + keywords.len();
            if count == 0 {
                continue;
            }
            let row = m.row_mut(r);
            for token in hashtags.iter().chain(&keywords) {
                for (o, v) in row.iter_mut().zip(embeddings.lookup(token).iter()) {
                    *o += v;
                }
            }
            row.iter_mut().for_each(|o| *o /= count as f64);
        }
        m
    };
    MlnFeatures {
        layers: [
            token_layer(mln.hashtag_layer()),
            token_layer(mln.keyword_layer()),
            tweet_layer(mln.tweet_layer()),
        ],
    }
}
