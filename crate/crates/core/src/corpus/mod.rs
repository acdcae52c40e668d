//! Annotated-corpus data model: tokenized sentences with typed entity spans
//! and directed relation mentions, plus JSON Lines parsing, validation,
//! corpus statistics and a synthetic-corpus generator for desk-scale runs.

mod synth;

pub use synth::{generate_synthetic_corpus, GeneratorSettings};

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reserved label for the artificial no-relation class. It never appears in
/// corpus files; negative instances are labeled with it during extraction.
pub const OTHER_CLASS: &str = "Other";

/// A typed entity mention over a half-open token interval `[start, end)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entity {
    pub id: String,
    pub start: usize,
    pub end: usize,
    #[serde(rename = "type")]
    pub entity_type: String,
}

impl Entity {
    pub fn width(&self) -> usize {
        self.end.saturating_sub(self.start)
    }
}

/// A directed relation mention between two entities of the same sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationMention {
    pub head: String,
    pub tail: String,
    pub class: String,
}

/// One tokenized, annotated sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sentence {
    pub id: String,
    pub tokens: Vec<String>,
    #[serde(default)]
    pub entities: Vec<Entity>,
    #[serde(default)]
    pub relations: Vec<RelationMention>,
}

impl Sentence {
    pub fn entity(&self, id: &str) -> Option<&Entity> {
        self.entities.iter().find(|e| e.id == id)
    }
}

/// An immutable collection of sentences with derived label sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    sentences: Vec<Sentence>,
    relation_classes: Vec<String>,
    entity_types: Vec<String>,
}

/// A single invariant violation found by [`validate_corpus`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub sentence_id: String,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "sentence {}: {}", self.sentence_id, self.rule)
    }
}

/// Aggregate counts over a corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub sentence_count: usize,
    pub avg_entities_per_sentence: f64,
    pub avg_relations_per_sentence: f64,
    pub class_histogram: BTreeMap<String, usize>,
}

impl Corpus {
    /// Builds a corpus and derives its label sets. Invariants are not
    /// enforced here; use [`validate_corpus`] or [`parse_corpus`] for that.
    pub fn new(sentences: Vec<Sentence>) -> Self {
        let mut classes = BTreeSet::new();
        let mut types = BTreeSet::new();
        for s in &sentences {
            for e in &s.entities {
                types.insert(e.entity_type.clone());
            }
            for r in &s.relations {
                classes.insert(r.class.clone());
            }
        }
        Corpus {
            sentences,
            relation_classes: classes.into_iter().collect(),
            entity_types: types.into_iter().collect(),
        }
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }

    /// Sorted set of relation-class labels occurring in the corpus.
    pub fn relation_classes(&self) -> &[String] {
        &self.relation_classes
    }

    /// Sorted set of entity-type labels occurring in the corpus.
    pub fn entity_types(&self) -> &[String] {
        &self.entity_types
    }

    pub fn sentence(&self, id: &str) -> Option<&Sentence> {
        self.sentences.iter().find(|s| s.id == id)
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    /// Serializes the corpus to JSON Lines, one sentence per line, in order.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for s in &self.sentences {
            out.push_str(&serde_json::to_string(s).expect("sentence serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_jsonl().as_bytes())?;
        Ok(())
    }
}

fn sentence_violations(s: &Sentence, out: &mut Vec<Violation>) {
    let n = s.tokens.len();
    let mut seen = HashSet::new();
    for e in &s.entities {
        if !seen.insert(e.id.as_str()) {
            out.push(Violation {
                sentence_id: s.id.clone(),
                rule: format!("duplicate entity id {}", e.id),
            });
        }
        if e.start >= e.end {
            out.push(Violation {
                sentence_id: s.id.clone(),
                rule: format!("entity {} has empty span [{}, {})", e.id, e.start, e.end),
            });
        }
        if e.end > n {
            out.push(Violation {
                sentence_id: s.id.clone(),
                rule: format!(
                    "entity {} span [{}, {}) exceeds token count {}",
                    e.id, e.start, e.end, n
                ),
            });
        }
        if e.entity_type.is_empty() {
            out.push(Violation {
                sentence_id: s.id.clone(),
                rule: format!("entity {} has empty type", e.id),
            });
        }
    }
    for r in &s.relations {
        if r.head == r.tail {
            out.push(Violation {
                sentence_id: s.id.clone(),
                rule: format!("relation references the same entity {} twice", r.head),
            });
        }
        for end in [&r.head, &r.tail] {
            if s.entity(end).is_none() {
                out.push(Violation {
                    sentence_id: s.id.clone(),
                    rule: format!("relation references missing entity {end}"),
                });
            }
        }
        if r.class == OTHER_CLASS {
            out.push(Violation {
                sentence_id: s.id.clone(),
                rule: format!("relation uses the reserved class label {OTHER_CLASS}"),
            });
        }
    }
}

/// Checks every sentence invariant and reports violations as data.
pub fn validate_corpus(corpus: &Corpus) -> Vec<Violation> {
    let mut out = Vec::new();
    for s in corpus.sentences() {
        sentence_violations(s, &mut out);
    }
    out
}

/// Parses a JSON Lines corpus file. Malformed records and invariant
/// violations are hard failures naming the line or sentence at fault.
pub fn parse_corpus(path: &Path) -> Result<Corpus> {
    let file = std::fs::File::open(path)?;
    parse_corpus_reader(BufReader::new(file))
}

/// Parses JSON Lines corpus text from any reader.
pub fn parse_corpus_reader<R: BufRead>(reader: R) -> Result<Corpus> {
    let mut sentences = Vec::new();
    let mut ids = HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let sentence: Sentence =
            serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
                line: line_no,
                message: e.to_string(),
            })?;
        if let Some(prev) = ids.insert(sentence.id.clone(), line_no) {
            return Err(Error::InvalidSentence {
                sentence_id: sentence.id,
                message: format!("sentence id already used on line {prev}"),
            });
        }
        let mut violations = Vec::new();
        sentence_violations(&sentence, &mut violations);
        if let Some(v) = violations.first() {
            return Err(Error::InvalidSentence {
                sentence_id: v.sentence_id.clone(),
                message: v.rule.clone(),
            });
        }
        sentences.push(sentence);
    }
    Ok(Corpus::new(sentences))
}

/// Exact per-sentence means and the relation-class histogram.
pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let n = corpus.len();
    let mut entities = 0usize;
    let mut relations = 0usize;
    let mut histogram = BTreeMap::new();
    for s in corpus.sentences() {
        entities += s.entities.len();
        relations += s.relations.len();
        for r in &s.relations {
            *histogram.entry(r.class.clone()).or_insert(0) += 1;
        }
    }
    let avg = |total: usize| {
        if n == 0 {
            0.0
        } else {
            total as f64 / n as f64
        }
    };
    CorpusStats {
        sentence_count: n,
        avg_entities_per_sentence: avg(entities),
        avg_relations_per_sentence: avg(relations),
        class_histogram: histogram,
    }
}
