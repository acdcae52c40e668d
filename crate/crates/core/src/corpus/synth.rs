//! Synthetic corpus generation for desk-scale experiments.
//!
//! Sentences are built as entity blocks separated by filler gaps. A planted
//! relation always joins two *adjacent* entities and its gap holds exactly
//! the relation class's trigger tokens, so every planted relation is
//! recoverable from the surface form; non-related gaps hold two or more
//! filler tokens and never a trigger.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::{Corpus, Entity, RelationMention, Sentence};
use crate::error::{Error, Result};
use crate::rng;

/// Settings for [`generate_synthetic_corpus`]. Ranges are inclusive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorSettings {
    pub sentences: usize,
    pub entities_per_sentence: (usize, usize),
    pub relations_per_sentence: (usize, usize),
    /// Number of distinct filler tokens.
    pub vocab_size: usize,
    pub relation_classes: Vec<String>,
    pub entity_types: Vec<String>,
    /// Per-class trigger token pattern planted between related entity pairs.
    /// Classes missing here get a single derived trigger token.
    pub triggers: BTreeMap<String, Vec<String>>,
    /// Hard cap on sentence length, if any.
    pub max_tokens: Option<usize>,
}

impl Default for GeneratorSettings {
    fn default() -> Self {
        GeneratorSettings {
            sentences: 100,
            entities_per_sentence: (3, 6),
            relations_per_sentence: (1, 2),
            vocab_size: 50,
            relation_classes: vec!["REL_A".into(), "REL_B".into()],
            entity_types: vec!["PER".into(), "ORG".into(), "GPE".into()],
            triggers: BTreeMap::new(),
            max_tokens: None,
        }
    }
}

impl GeneratorSettings {
    fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InfeasibleSettings(msg));
        let (e_min, e_max) = self.entities_per_sentence;
        let (r_min, r_max) = self.relations_per_sentence;
        if e_min > e_max {
            return fail(format!("entity range {e_min}..={e_max} is empty"));
        }
        if r_min > r_max {
            return fail(format!("relation range {r_min}..={r_max} is empty"));
        }
        if self.sentences > 0 && e_max > 0 && self.entity_types.is_empty() {
            return fail("entities requested but no entity types given".into());
        }
        if r_max > 0 && self.relation_classes.is_empty() {
            return fail("relations requested but no relation classes given".into());
        }
        if self.vocab_size == 0 {
            return fail("vocab_size must be at least 1".into());
        }
        // A relation needs an adjacent entity pair; m entities give m-1.
        if r_min > e_min.saturating_sub(1) {
            return fail(format!(
                "cannot plant {r_min} relations with as few as {e_min} entities"
            ));
        }
        if let Some(cap) = self.max_tokens {
            // Minimal layout: every entity one token, every gap one token.
            let need = 2 * e_max.saturating_sub(1) + usize::from(e_max > 0);
            if need > cap {
                return fail(format!(
                    "{e_max} entities need at least {need} tokens but max_tokens is {cap}"
                ));
            }
        }
        Ok(())
    }

    fn trigger_for(&self, class: &str) -> Vec<String> {
        self.triggers
            .get(class)
            .cloned()
            .unwrap_or_else(|| vec![format!("trig_{}", class.to_lowercase())])
    }
}

/// Deterministically generates a corpus from `(settings, seed)`.
pub fn generate_synthetic_corpus(settings: &GeneratorSettings, seed: u64) -> Result<Corpus> {
    settings.validate()?;
    let mut sentences = Vec::with_capacity(settings.sentences);
    for idx in 0..settings.sentences {
        let mut r = rng::stream(seed, "synth-sentence", &[idx as u64]);
        sentences.push(gen_sentence(settings, idx, &mut r));
    }
    Ok(Corpus::new(sentences))
}

fn gen_sentence<R: Rng>(settings: &GeneratorSettings, idx: usize, rng: &mut R) -> Sentence {
    let (e_min, e_max) = settings.entities_per_sentence;
    let m = rng.gen_range(e_min..=e_max);

    let max_rel = m.saturating_sub(1);
    let (r_min, r_max) = settings.relations_per_sentence;
    let n_rel = if max_rel == 0 {
        0
    } else {
        rng.gen_range(r_min.min(max_rel)..=r_max.min(max_rel))
    };
    let mut gap_indices: Vec<usize> = (0..max_rel).collect();
    gap_indices.shuffle(rng);
    let mut related: Vec<usize> = gap_indices.into_iter().take(n_rel).collect();
    related.sort_unstable();

    let filler = |rng: &mut R| format!("w{}", rng.gen_range(0..settings.vocab_size));

    let mut tokens: Vec<String> = Vec::new();
    let mut entities: Vec<Entity> = Vec::new();
    let mut relations: Vec<RelationMention> = Vec::new();

    for _ in 0..rng.gen_range(0..=2usize) {
        tokens.push(filler(rng));
    }
    for e_idx in 0..m {
        let entity_type = settings.entity_types.choose(rng).expect("validated").clone();
        let width = rng.gen_range(1..=2usize);
        let start = tokens.len();
        for _ in 0..width {
            let j = rng.gen_range(0..6usize);
            tokens.push(format!("{}{}", entity_type.to_lowercase(), j));
        }
        entities.push(Entity {
            id: format!("e{e_idx}"),
            start,
            end: tokens.len(),
            entity_type,
        });
        if e_idx + 1 < m {
            if related.contains(&e_idx) {
                let class = settings.relation_classes.choose(rng).expect("validated").clone();
                for t in settings.trigger_for(&class) {
                    tokens.push(t);
                }
                relations.push(RelationMention {
                    head: format!("e{e_idx}"),
                    tail: format!("e{}", e_idx + 1),
                    class,
                });
            } else {
                for _ in 0..rng.gen_range(2..=4usize) {
                    tokens.push(filler(rng));
                }
            }
        }
    }
    for _ in 0..rng.gen_range(0..=2usize) {
        tokens.push(filler(rng));
    }

    Sentence {
        id: format!("s{idx}"),
        tokens,
        entities,
        relations,
    }
}
