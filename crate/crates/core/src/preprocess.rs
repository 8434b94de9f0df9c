//! Tweet cleaning and the three token views the network builder consumes.
//!
//! Cleaning runs a fixed sequence of steps over the raw text:
//!
//! 1. emoji are replaced by their underscore-joined alias,
//! 2. hashtags are located (their tokens are split against a vocabulary),
//! 3. contractions are expanded,
//! 4. newlines and surrounding whitespace are removed,
//! 5. a leading `RT` retweet marker is dropped,
//! 6. `@` symbols are removed (the mentioned handle stays as a keyword),
//! 7. everything is lowercased.
//!
//! The result keeps the cleaned full text alongside the hashtag tokens and
//! the keyword tokens.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::{EmotionLabel, Sentiment};

const DEFAULT_CONTRACTIONS: &str = include_str!("../data/contractions.tsv");
const DEFAULT_EMOJI: &str = include_str!("../data/emoji.tsv");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawTweet {
    pub text: String,
    pub label: EmotionLabel,
}

impl RawTweet {
    pub fn new(text: impl Into<String>, label: EmotionLabel) -> Self {
        RawTweet {
            text: text.into(),
            label,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanTweet {
    /// Keyword tokens joined by single spaces.
    pub body: String,
    pub hashtag_tokens: Vec<String>,
    pub keyword_tokens: Vec<String>,
    /// Cleaned full tweet, hashtags included with their `#`.
    pub raw_text: String,
    pub label: EmotionLabel,
}

impl CleanTweet {
    /// Hashtag and keyword tokens, hashtags first.
    pub fn all_tokens(&self) -> impl Iterator<Item = &str> {
        self.hashtag_tokens
            .iter()
            .chain(self.keyword_tokens.iter())
            .map(String::as_str)
    }
}

/// Lowercase contraction form to expansion.
#[derive(Debug, Clone, Default)]
pub struct ContractionTable {
    map: HashMap<String, String>,
}

impl ContractionTable {
    pub fn builtin() -> Self {
        Self::parse_tsv(DEFAULT_CONTRACTIONS).expect("bundled contraction table is valid")
    }

    pub fn parse_tsv(text: &str) -> Result<Self> {
        let mut map = HashMap::new();
        for (line, form, expansion) in tsv_rows(text)? {
            let key = normalize_apostrophes(&form.to_lowercase());
            if map.insert(key, expansion.to_lowercase()).is_some() {
                return Err(Error::Parse {
                    line,
                    message: format!("duplicate contraction {form:?}"),
                });
            }
        }
        Ok(ContractionTable { map })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_tsv(&read_to_string(path.as_ref())?)
    }

    pub fn get(&self, form: &str) -> Option<&str> {
        self.map.get(form).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Emoji sequence to alias token, matched longest-first.
#[derive(Debug, Clone, Default)]
pub struct EmojiAliasTable {
    map: HashMap<String, String>,
    max_chars: usize,
}

impl EmojiAliasTable {
    pub fn builtin() -> Self {
        Self::parse_tsv(DEFAULT_EMOJI).expect("bundled emoji table is valid")
    }

    pub fn parse_tsv(text: &str) -> Result<Self> {
        let mut map = HashMap::new();
        let mut max_chars = 0;
        for (line, emoji, alias) in tsv_rows(text)? {
            let valid = !alias.is_empty()
                && alias.split('_').all(|part| {
                    !part.is_empty() && part.chars().all(|c| c.is_ascii_alphanumeric())
                });
            if !valid {
                return Err(Error::Parse {
                    line,
                    message: format!("alias {alias:?} is not underscore-joined ASCII words"),
                });
            }
            max_chars = max_chars.max(emoji.chars().count());
            map.insert(emoji, alias.to_lowercase());
        }
        Ok(EmojiAliasTable { map, max_chars })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_tsv(&read_to_string(path.as_ref())?)
    }

    /// Replaces every known emoji sequence with ` alias `.
    pub fn substitute(&self, text: &str) -> String {
        if self.map.is_empty() {
            return text.to_string();
        }
        let chars: Vec<char> = text.chars().collect();
        let mut out = String::with_capacity(text.len());
        let mut i = 0;
        'outer: while i < chars.len() {
            if !chars[i].is_ascii() {
                let longest = self.max_chars.min(chars.len() - i);
                for len in (1..=longest).rev() {
                    let candidate: String = chars[i..i + len].iter().collect();
                    if let Some(alias) = self.map.get(&candidate) {
                        out.push(' ');
                        out.push_str(alias);
                        out.push(' ');
                        i += len;
                        continue 'outer;
                    }
                }
            }
            out.push(chars[i]);
            i += 1;
        }
        out
    }
}

/// Cleans raw tweets into [`CleanTweet`]s.
///
/// The vocabulary drives hashtag segmentation; with an empty vocabulary
/// every hashtag stays a single token.
#[derive(Debug, Clone, Default)]
pub struct Cleaner {
    pub contractions: ContractionTable,
    pub emoji: EmojiAliasTable,
    pub vocabulary: HashSet<String>,
}

impl Cleaner {
    pub fn new(
        contractions: ContractionTable,
        emoji: EmojiAliasTable,
        vocabulary: HashSet<String>,
    ) -> Self {
        Cleaner {
            contractions,
            emoji,
            vocabulary,
        }
    }

    /// Bundled tables, no segmentation vocabulary.
    pub fn builtin() -> Self {
        Cleaner::new(
            ContractionTable::builtin(),
            EmojiAliasTable::builtin(),
            HashSet::new(),
        )
    }

    pub fn with_vocabulary(mut self, vocabulary: HashSet<String>) -> Self {
        self.vocabulary = vocabulary;
        self
    }

    pub fn clean(&self, raw: &RawTweet) -> Result<CleanTweet> {
        let text = self.emoji.substitute(&raw.text);
        let text = expand_contractions(&text, &self.contractions);
        let mut words: Vec<&str> = text.split_whitespace().collect();
        if words.first().is_some_and(|w| is_retweet_marker(w)) {
            words.remove(0);
        }
        let raw_text = words.join(" ").replace('@', "").to_lowercase();
        let raw_text = raw_text.split_whitespace().collect::<Vec<_>>().join(" ");

        let (hashtag_tokens, keyword_tokens) = self.token_views(&raw_text);
        if hashtag_tokens.is_empty() && keyword_tokens.is_empty() {
            return Err(Error::EmptyAfterCleaning {
                text: raw.text.clone(),
            });
        }
        Ok(CleanTweet {
            body: keyword_tokens.join(" "),
            hashtag_tokens,
            keyword_tokens,
            raw_text,
            label: raw.label,
        })
    }

    /// Token views of an already-cleaned text (used for whole-tweet nodes).
    pub fn token_views(&self, cleaned: &str) -> (Vec<String>, Vec<String>) {
        token_views(cleaned, &|w| self.vocabulary.contains(w))
    }
}

/// Splits cleaned text into (hashtag tokens, keyword tokens).
pub fn token_views(cleaned: &str, known: &dyn Fn(&str) -> bool) -> (Vec<String>, Vec<String>) {
    let mut hashtags = Vec::new();
    let mut keywords = Vec::new();
    for token in tokenize(cleaned) {
        match hashtag_body(&token) {
            Some(body) => hashtags.extend(segment(body, known)),
            None if token.starts_with('#') => {}
            None => keywords.push(token),
        }
    }
    (hashtags, keywords)
}

/// Whitespace split with surrounding punctuation stripped. A leading `#`
/// survives so hashtags stay recognisable.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|word| {
            let word = word.trim_end_matches(is_punctuation);
            let word = word.trim_start_matches(|c| c != '#' && is_punctuation(c));
            (!word.is_empty()).then(|| word.to_string())
        })
        .collect()
}

/// Greedy longest-match segmentation of a hashtag against `vocabulary`.
///
/// Longer prefixes are tried first and the search backtracks when a prefix
/// leaves an unsegmentable remainder. Without any full segmentation the
/// whole body comes back as one token.
pub fn split_hashtag(tag: &str, vocabulary: &HashSet<String>) -> Vec<String> {
    let body = tag.trim_start_matches('#');
    segment(body, &|w| vocabulary.contains(w))
}

fn segment(body: &str, known: &dyn Fn(&str) -> bool) -> Vec<String> {
    if body.is_empty() {
        return Vec::new();
    }
    // Byte offsets of char boundaries, including the end.
    let bounds: Vec<usize> = body
        .char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(body.len()))
        .collect();
    let mut dead = vec![false; bounds.len()];
    let mut pieces = Vec::new();
    if search(body, &bounds, 0, known, &mut dead, &mut pieces) {
        pieces.into_iter().map(str::to_string).collect()
    } else {
        vec![body.to_string()]
    }
}

fn search<'a>(
    body: &'a str,
    bounds: &[usize],
    at: usize,
    known: &dyn Fn(&str) -> bool,
    dead: &mut [bool],
    pieces: &mut Vec<&'a str>,
) -> bool {
    if at == bounds.len() - 1 {
        return true;
    }
    if dead[at] {
        return false;
    }
    for end in (at + 1..bounds.len()).rev() {
        let piece = &body[bounds[at]..bounds[end]];
        if known(piece) {
            pieces.push(piece);
            if search(body, bounds, end, known, dead, pieces) {
                return true;
            }
            pieces.pop();
        }
    }
    dead[at] = true;
    false
}

/// Keeps a tweet iff its external prediction agrees with the polarity of its
/// emotion label. Neutral predictions always drop the tweet.
pub fn filter_by_sentiment(
    tweets: Vec<RawTweet>,
    predictions: &[Sentiment],
) -> Result<Vec<RawTweet>> {
    if tweets.len() != predictions.len() {
        return Err(Error::LengthMismatch {
            left: tweets.len(),
            right: predictions.len(),
        });
    }
    Ok(tweets
        .into_iter()
        .zip(predictions)
        .filter(|(tweet, &prediction)| {
            prediction != Sentiment::Neutral && prediction == tweet.label.sentiment()
        })
        .map(|(tweet, _)| tweet)
        .collect())
}

fn hashtag_body(token: &str) -> Option<&str> {
    let rest = token.strip_prefix('#')?.trim_start_matches('#');
    let end = rest
        .char_indices()
        .find(|&(_, c)| !is_word_char(c))
        .map_or(rest.len(), |(i, _)| i);
    (end > 0).then(|| &rest[..end])
}

fn expand_contractions(text: &str, table: &ContractionTable) -> String {
    if table.is_empty() {
        return text.to_string();
    }
    let mut out = String::with_capacity(text.len());
    for (i, word) in text.split_whitespace().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let core_start = word.len() - word.trim_start_matches(is_punctuation).len();
        let core_end = word.trim_end_matches(is_punctuation).len();
        // Hashtags were already extracted and are left intact.
        if core_start >= core_end || word.starts_with('#') {
            out.push_str(word);
            continue;
        }
        let core = &word[core_start..core_end];
        match table.get(&normalize_apostrophes(&core.to_lowercase())) {
            Some(expansion) => {
                out.push_str(&word[..core_start]);
                out.push_str(expansion);
                out.push_str(&word[core_end..]);
            }
            None => out.push_str(word),
        }
    }
    out
}

fn is_retweet_marker(word: &str) -> bool {
    word == "RT" || word == "RT:"
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{2018}'..='\u{201F}' | '\u{2026}' | '\u{2013}' | '\u{2014}' | '\u{00AB}' | '\u{00BB}' | '\u{00A1}' | '\u{00BF}'
        )
}

fn normalize_apostrophes(s: &str) -> String {
    s.replace(['\u{2019}', '\u{2018}'], "'")
}

fn tsv_rows(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (left, right) = line.split_once('\t').ok_or_else(|| Error::Parse {
            line: i + 1,
            message: "expected two tab-separated columns".into(),
        })?;
        rows.push((i + 1, left.trim().to_string(), right.trim().to_string()));
    }
    Ok(rows)
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Reads newline-delimited `{"text": ..., "label": ...}` records.
pub fn read_corpus(path: impl AsRef<Path>) -> Result<Vec<RawTweet>> {
    #[derive(Deserialize)]
    struct Record {
        text: String,
        label: String,
    }
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut tweets = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        tweets.push(RawTweet::new(record.text, record.label.parse()?));
    }
    Ok(tweets)
}

pub fn write_corpus(path: impl AsRef<Path>, tweets: &[RawTweet]) -> Result<()> {
    write_jsonl(path.as_ref(), tweets)
}

pub fn write_clean(path: impl AsRef<Path>, tweets: &[CleanTweet]) -> Result<()> {
    write_jsonl(path.as_ref(), tweets)
}

/// Reads the output of [`write_clean`].
pub fn read_clean(path: impl AsRef<Path>) -> Result<Vec<CleanTweet>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut tweets = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        tweets.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(tweets)
}

/// One `positive` / `negative` / `neutral` per line.
pub fn read_predictions(path: impl AsRef<Path>) -> Result<Vec<Sentiment>> {
    let path = path.as_ref();
    read_to_string(path)?
        .lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| {
            line.parse().map_err(|_| Error::Parse {
                line: i + 1,
                message: format!("expected positive/negative/neutral, got {line:?}"),
            })
        })
        .collect()
}

pub(crate) fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}
