//! Feature encoding: vocabularies, BIO tag sequences, relative-position
//! features, and conversion of instances into aligned integer id sequences.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::corpus::{Corpus, Entity, Sentence};
use crate::error::{Error, Result};
use crate::instances::Instance;

pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";
pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;

/// Token-to-id map with reserved PAD and UNK entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    id_of: HashMap<String, u32>,
    tokens: Vec<String>,
}

impl Vocabulary {
    /// Builds a vocabulary from training sentences, keeping tokens with
    /// frequency >= `min_count`, ordered by frequency then lexicographically.
    pub fn build(sentences: &[Sentence], min_count: usize) -> Vocabulary {
        assert!(min_count >= 1, "min_count must be at least 1");
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for s in sentences {
            for t in &s.tokens {
                *counts.entry(t.as_str()).or_insert(0) += 1;
            }
        }
        let mut kept: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|&(_, c)| c >= min_count)
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

        let mut tokens = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        tokens.extend(kept.into_iter().map(|(t, _)| t.to_string()));
        Vocabulary::from_tokens(tokens)
    }

    fn from_tokens(tokens: Vec<String>) -> Vocabulary {
        let id_of = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocabulary { id_of, tokens }
    }

    pub fn id(&self, token: &str) -> u32 {
        self.id_of.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false // PAD and UNK are always present
    }

    /// Writes `token<TAB>id` lines in id order.
    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        write_tsv(&self.tokens, path)
    }

    pub fn read_tsv(path: &Path) -> Result<Vocabulary> {
        Ok(Vocabulary::from_tokens(read_tsv(path)?))
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

pub const PAD_TAG: &str = "<pad>";
pub const OUTSIDE_TAG: &str = "O";

/// BIO tag alphabet derived from the corpus entity-type set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagAlphabet {
    id_of: HashMap<String, u32>,
    tags: Vec<String>,
}

impl TagAlphabet {
    /// PAD, O, then `B_T`/`I_T` per entity type in sorted order.
    pub fn from_entity_types(types: &[String]) -> TagAlphabet {
        let mut sorted: Vec<&String> = types.iter().collect();
        sorted.sort();
        sorted.dedup();
        let mut tags = vec![PAD_TAG.to_string(), OUTSIDE_TAG.to_string()];
        for t in sorted {
            tags.push(format!("B_{t}"));
            tags.push(format!("I_{t}"));
        }
        TagAlphabet::from_tags(tags)
    }

    fn from_tags(tags: Vec<String>) -> TagAlphabet {
        let id_of = tags
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        TagAlphabet { id_of, tags }
    }

    pub fn id(&self, tag: &str) -> Option<u32> {
        self.id_of.get(tag).copied()
    }

    pub fn outside_id(&self) -> u32 {
        self.id_of[OUTSIDE_TAG]
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        write_tsv(&self.tags, path)
    }

    pub fn read_tsv(path: &Path) -> Result<TagAlphabet> {
        Ok(TagAlphabet::from_tags(read_tsv(path)?))
    }
}

fn write_tsv(entries: &[String], path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    for (i, e) in entries.iter().enumerate() {
        writeln!(f, "{e}\t{i}")?;
    }
    Ok(())
}

fn read_tsv(path: &Path) -> Result<Vec<String>> {
    let file = std::fs::File::open(path)?;
    let mut entries = Vec::new();
    for (idx, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let (token, id) = line.split_once('\t').ok_or_else(|| Error::MalformedRecord {
            line: idx + 1,
            message: "expected token<TAB>id".into(),
        })?;
        let id: usize = id.parse().map_err(|_| Error::MalformedRecord {
            line: idx + 1,
            message: format!("bad id {id}"),
        })?;
        if id != entries.len() {
            return Err(Error::MalformedRecord {
                line: idx + 1,
                message: format!("ids must be contiguous from 0, got {id}"),
            });
        }
        entries.push(token.to_string());
    }
    Ok(entries)
}

/// Per-token BIO tag strings for a sentence. Overlapping or nested entities
/// resolve to the longest covering span (ties to the earliest start); a `B`
/// tag opens each maximal run of tokens resolved to the same entity.
pub fn bio_tags(sentence: &Sentence) -> Vec<String> {
    let n = sentence.tokens.len();
    let mut resolved: Vec<Option<usize>> = vec![None; n];
    for (idx, e) in sentence.entities.iter().enumerate() {
        for i in e.start..e.end.min(n) {
            let better = match resolved[i] {
                None => true,
                Some(prev) => {
                    let p = &sentence.entities[prev];
                    (e.width(), std::cmp::Reverse(e.start), std::cmp::Reverse(idx))
                        > (p.width(), std::cmp::Reverse(p.start), std::cmp::Reverse(prev))
                }
            };
            if better {
                resolved[i] = Some(idx);
            }
        }
    }
    (0..n)
        .map(|i| match resolved[i] {
            None => OUTSIDE_TAG.to_string(),
            Some(idx) => {
                let t = &sentence.entities[idx].entity_type;
                let run_start = i == 0 || resolved[i - 1] != Some(idx);
                if run_start {
                    format!("B_{t}")
                } else {
                    format!("I_{t}")
                }
            }
        })
        .collect()
}

/// Signed distance from token `i` to the nearest edge of `span` (0 inside).
pub fn relative_distance(i: usize, span: (usize, usize)) -> i64 {
    let (start, end) = span;
    let i = i as i64;
    if i < start as i64 {
        i - start as i64
    } else if i >= end as i64 {
        i - (end as i64 - 1)
    } else {
        0
    }
}

/// Position-feature ids: relative distances clipped to `[-p_max, p_max]`
/// and shifted by `+p_max` into `[0, 2*p_max]`.
pub fn position_features(n: usize, span: (usize, usize), p_max: usize) -> Vec<u32> {
    let p = p_max as i64;
    (0..n)
        .map(|i| {
            let d = relative_distance(i, span).clamp(-p, p);
            (d + p) as u32
        })
        .collect()
}

/// Encoder settings; `max_len` bounds stored sequence length and `p_max`
/// is the position-feature clip radius.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncoderConfig {
    pub max_len: usize,
    pub p_max: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            max_len: 120,
            p_max: 60,
        }
    }
}

/// Integer feature sequences for one instance; all four sequences have
/// length `max_len`, with the first `len` positions holding real tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedInstance {
    pub sentence_id: String,
    pub word_ids: Vec<u32>,
    pub pos1_ids: Vec<u32>,
    pub pos2_ids: Vec<u32>,
    pub tag_ids: Vec<u32>,
    /// Unpadded token count.
    pub len: usize,
    /// Positive-class index, or `None` for the artificial class Other.
    pub gold_class: Option<usize>,
    /// 1 iff `gold_class` is a positive class.
    pub gold_binary: u8,
}

fn clamp_span(span: (usize, usize), window: (usize, usize)) -> (usize, usize) {
    let (ws, we) = window;
    let start = span.0.clamp(ws, we) - ws;
    let end = span.1.clamp(ws, we) - ws;
    (start, end.max(start))
}

/// Converts an instance into aligned id sequences. Sentences longer than
/// `max_len` keep their prefix when both target entities fit, otherwise the
/// window is centered on the span between the targets.
pub fn encode(
    instance: &Instance,
    corpus: &Corpus,
    vocab: &Vocabulary,
    tags: &TagAlphabet,
    classes: &[String],
    config: &EncoderConfig,
) -> Result<EncodedInstance> {
    let sentence = corpus
        .sentence(&instance.sentence_id)
        .ok_or_else(|| Error::InvalidSentence {
            sentence_id: instance.sentence_id.clone(),
            message: "instance references a sentence missing from the corpus".into(),
        })?;
    let entity = |id: &str| -> Result<&Entity> {
        sentence.entity(id).ok_or_else(|| Error::InvalidSentence {
            sentence_id: sentence.id.clone(),
            message: format!("target entity {id} not found"),
        })
    };
    let head = entity(&instance.head)?;
    let tail = entity(&instance.tail)?;
    if head.end > sentence.tokens.len() || tail.end > sentence.tokens.len() {
        return Err(Error::InvalidSentence {
            sentence_id: sentence.id.clone(),
            message: "target entity span exceeds sentence length".into(),
        });
    }

    let n = sentence.tokens.len();
    let window = if n <= config.max_len {
        (0, n)
    } else if head.end <= config.max_len && tail.end <= config.max_len {
        (0, config.max_len)
    } else {
        let union = (head.start.min(tail.start), head.end.max(tail.end));
        let center = (union.0 + union.1) / 2;
        let start = center
            .saturating_sub(config.max_len / 2)
            .min(n - config.max_len);
        (start, start + config.max_len)
    };
    let win_len = window.1 - window.0;

    let head_span = clamp_span((head.start, head.end), window);
    let tail_span = clamp_span((tail.start, tail.end), window);

    let full_tags = bio_tags(sentence);
    let out_id = tags.outside_id();

    let mut word_ids: Vec<u32> = sentence.tokens[window.0..window.1]
        .iter()
        .map(|t| vocab.id(t))
        .collect();
    let mut tag_ids: Vec<u32> = full_tags[window.0..window.1]
        .iter()
        .map(|t| tags.id(t).unwrap_or(out_id))
        .collect();
    let mut pos1_ids = position_features(win_len, head_span, config.p_max);
    let mut pos2_ids = position_features(win_len, tail_span, config.p_max);

    word_ids.resize(config.max_len, PAD_ID);
    tag_ids.resize(config.max_len, out_id);
    pos1_ids.resize(config.max_len, 0);
    pos2_ids.resize(config.max_len, 0);

    let gold_class = if instance.is_positive {
        let idx = classes.iter().position(|c| *c == instance.class);
        match idx {
            Some(i) => Some(i),
            None => {
                return Err(Error::Model(format!(
                    "gold class {} not in the class list",
                    instance.class
                )))
            }
        }
    } else {
        None
    };

    Ok(EncodedInstance {
        sentence_id: instance.sentence_id.clone(),
        word_ids,
        pos1_ids,
        pos2_ids,
        tag_ids,
        len: win_len,
        gold_class,
        gold_binary: u8::from(instance.is_positive),
    })
}
