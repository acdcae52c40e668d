//! Candidate-instance extraction and the imbalanced-data pipeline:
//! enumerating entity pairs, labeling positives/negatives, filtering by
//! entity-type combination, ratio subsampling and cross-validation folds.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Sentence, OTHER_CLASS};
use crate::error::{Error, Result};
use crate::rng;

/// One (sentence, entity-pair) candidate with its gold class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub sentence_id: String,
    pub head: String,
    pub tail: String,
    /// A relation-class label, or [`OTHER_CLASS`] for negatives.
    pub class: String,
    pub is_positive: bool,
    pub directed: bool,
}

impl Instance {
    fn new(sentence_id: &str, head: &str, tail: &str, class: Option<&str>, directed: bool) -> Self {
        Instance {
            sentence_id: sentence_id.to_string(),
            head: head.to_string(),
            tail: tail.to_string(),
            class: class.unwrap_or(OTHER_CLASS).to_string(),
            is_positive: class.is_some(),
            directed,
        }
    }
}

/// Entity-type pairs observed in positive instances.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeCombinationSet {
    combos: BTreeSet<(String, String)>,
    ordered: bool,
}

impl TypeCombinationSet {
    pub fn ordered(&self) -> bool {
        self.ordered
    }

    pub fn len(&self) -> usize {
        self.combos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.combos.is_empty()
    }

    pub fn contains(&self, head_type: &str, tail_type: &str) -> bool {
        let key = canonical_pair(head_type, tail_type, self.ordered);
        self.combos.contains(&key)
    }

    pub fn iter(&self) -> impl Iterator<Item = &(String, String)> {
        self.combos.iter()
    }
}

fn canonical_pair(a: &str, b: &str, ordered: bool) -> (String, String) {
    if ordered || a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

/// Sentence-level fold assignment for k-fold cross-validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    k: usize,
    folds: BTreeMap<String, usize>,
}

impl FoldAssignment {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn fold_of(&self, sentence_id: &str) -> Option<usize> {
        self.folds.get(sentence_id).copied()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.k];
        for &f in self.folds.values() {
            sizes[f] += 1;
        }
        sizes
    }

    pub fn as_map(&self) -> &BTreeMap<String, usize> {
        &self.folds
    }

    /// Writes the assignment as a single JSON object `{"sentence_id": fold}`.
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(serde_json::to_string(&self.folds).expect("map serializes").as_bytes())?;
        f.write_all(b"\n")?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<FoldAssignment> {
        let text = std::fs::read_to_string(path)?;
        let folds: BTreeMap<String, usize> =
            serde_json::from_str(&text).map_err(|e| Error::MalformedRecord {
                line: 1,
                message: e.to_string(),
            })?;
        let k = folds.values().copied().max().map_or(0, |m| m + 1);
        Ok(FoldAssignment { k, folds })
    }
}

fn annotated_classes(sentence: &Sentence) -> Result<HashMap<(&str, &str), &str>> {
    let mut out: HashMap<(&str, &str), &str> = HashMap::new();
    for r in &sentence.relations {
        let key = (r.head.as_str(), r.tail.as_str());
        if let Some(&prev) = out.get(&key) {
            if prev != r.class {
                return Err(Error::ConflictingClasses {
                    sentence_id: sentence.id.clone(),
                    a: r.head.clone(),
                    b: r.tail.clone(),
                    first: prev.to_string(),
                    second: r.class.clone(),
                });
            }
        }
        out.insert(key, &r.class);
    }
    Ok(out)
}

/// One instance per unordered entity pair: C(m, 2) per sentence. A pair is
/// positive if it is annotated in either direction; head and tail are stored
/// in entity-id order.
pub fn extract_undirected(corpus: &Corpus) -> Result<Vec<Instance>> {
    let mut out = Vec::new();
    for s in corpus.sentences() {
        let annotated = annotated_classes(s)?;
        for i in 0..s.entities.len() {
            for j in (i + 1)..s.entities.len() {
                let (a, b) = (&s.entities[i].id, &s.entities[j].id);
                let fwd = annotated.get(&(a.as_str(), b.as_str())).copied();
                let rev = annotated.get(&(b.as_str(), a.as_str())).copied();
                let class = match (fwd, rev) {
                    (Some(x), Some(y)) if x != y => {
                        return Err(Error::ConflictingClasses {
                            sentence_id: s.id.clone(),
                            a: a.clone(),
                            b: b.clone(),
                            first: x.to_string(),
                            second: y.to_string(),
                        });
                    }
                    (Some(x), _) | (_, Some(x)) => Some(x),
                    (None, None) => None,
                };
                let (head, tail) = if a <= b { (a, b) } else { (b, a) };
                out.push(Instance::new(&s.id, head, tail, class, false));
            }
        }
    }
    Ok(out)
}

/// Two instances per entity pair, one per order: m(m-1) per sentence. An
/// ordered pair is positive only if that exact direction is annotated; the
/// reverse of a positive pair is a negative instance.
pub fn extract_directed(corpus: &Corpus) -> Result<Vec<Instance>> {
    let mut out = Vec::new();
    for s in corpus.sentences() {
        let annotated = annotated_classes(s)?;
        for i in 0..s.entities.len() {
            for j in 0..s.entities.len() {
                if i == j {
                    continue;
                }
                let (a, b) = (&s.entities[i].id, &s.entities[j].id);
                let class = annotated.get(&(a.as_str(), b.as_str())).copied();
                out.push(Instance::new(&s.id, a, b, class, true));
            }
        }
    }
    Ok(out)
}

fn entity_types_of(corpus: &Corpus, inst: &Instance) -> Result<(String, String)> {
    let sentence = corpus
        .sentence(&inst.sentence_id)
        .ok_or_else(|| Error::InvalidSentence {
            sentence_id: inst.sentence_id.clone(),
            message: "instance references a sentence missing from the corpus".into(),
        })?;
    let lookup = |id: &str| {
        sentence
            .entity(id)
            .map(|e| e.entity_type.clone())
            .ok_or_else(|| Error::InvalidSentence {
                sentence_id: inst.sentence_id.clone(),
                message: format!("instance references missing entity {id}"),
            })
    };
    Ok((lookup(&inst.head)?, lookup(&inst.tail)?))
}

fn instances_directed(instances: &[Instance]) -> Option<bool> {
    let first = instances.first()?.directed;
    debug_assert!(instances.iter().all(|i| i.directed == first));
    Some(first)
}

/// Entity-type pairs occurring in at least one positive instance. Combos are
/// ordered in directed mode and canonically sorted in undirected mode.
pub fn allowed_type_combinations(
    corpus: &Corpus,
    instances: &[Instance],
) -> Result<TypeCombinationSet> {
    let ordered = instances_directed(instances).unwrap_or(false);
    let mut combos = BTreeSet::new();
    for inst in instances.iter().filter(|i| i.is_positive) {
        let (h, t) = entity_types_of(corpus, inst)?;
        combos.insert(canonical_pair(&h, &t, ordered));
    }
    Ok(TypeCombinationSet { combos, ordered })
}

/// Keeps every positive instance and every negative whose entity-type pair
/// appears in `combos`; input order is preserved.
pub fn filter_by_type_combination(
    corpus: &Corpus,
    instances: &[Instance],
    combos: &TypeCombinationSet,
) -> Result<Vec<Instance>> {
    if let Some(directed) = instances_directed(instances) {
        if directed != combos.ordered {
            return Err(Error::DirectednessMismatch {
                combos: if combos.ordered { "ordered" } else { "unordered" },
                instances: if directed { "directed" } else { "undirected" },
            });
        }
    }
    let mut out = Vec::with_capacity(instances.len());
    for inst in instances {
        if inst.is_positive {
            out.push(inst.clone());
            continue;
        }
        let (h, t) = entity_types_of(corpus, inst)?;
        if combos.contains(&h, &t) {
            out.push(inst.clone());
        }
    }
    Ok(out)
}

/// Result of [`subsample_negatives`]; `truncated` flags a request for more
/// negatives than the pool holds (all of them are kept in that case).
#[derive(Debug, Clone)]
pub struct SubsampleOutcome {
    pub instances: Vec<Instance>,
    pub truncated: bool,
}

/// Keeps all positives plus `round(positives * rho)` negatives drawn
/// uniformly without replacement; relative order is preserved and the draw
/// is deterministic per seed. Draw order is a seeded shuffle, so smaller
/// ratios select a prefix of larger ones under the same seed.
pub fn subsample_negatives(instances: &[Instance], rho: f64, seed: u64) -> SubsampleOutcome {
    assert!(rho >= 0.0, "negative ratio must be nonnegative");
    let positives = instances.iter().filter(|i| i.is_positive).count();
    let negative_idx: Vec<usize> = instances
        .iter()
        .enumerate()
        .filter(|(_, i)| !i.is_positive)
        .map(|(idx, _)| idx)
        .collect();

    let wanted = (positives as f64 * rho).round() as usize;
    let take = wanted.min(negative_idx.len());

    let mut order = negative_idx;
    order.shuffle(&mut rng::stream(seed, "subsample-negatives", &[]));
    let keep: BTreeSet<usize> = order.into_iter().take(take).collect();

    let instances = instances
        .iter()
        .enumerate()
        .filter(|(idx, inst)| inst.is_positive || keep.contains(idx))
        .map(|(_, inst)| inst.clone())
        .collect();
    SubsampleOutcome {
        instances,
        truncated: wanted > take,
    }
}

/// Formats a positive:negative count pair as `1:ρ` with one decimal.
pub fn ratio_string(positives: usize, negatives: usize) -> Result<String> {
    if positives == 0 {
        return Err(Error::ZeroPositives);
    }
    Ok(format!("1:{:.1}", negatives as f64 / positives as f64))
}

/// Partitions sentences into k folds of sizes differing by at most one,
/// deterministically per seed.
pub fn kfold_split(corpus: &Corpus, k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 || k > corpus.len() {
        return Err(Error::BadFoldCount {
            sentences: corpus.len(),
            k,
        });
    }
    let mut ids: Vec<&str> = corpus.sentences().iter().map(|s| s.id.as_str()).collect();
    ids.shuffle(&mut rng::stream(seed, "kfold", &[k as u64]));
    let folds = ids
        .into_iter()
        .enumerate()
        .map(|(pos, id)| (id.to_string(), pos % k))
        .collect();
    Ok(FoldAssignment { k, folds })
}

/// Instance-file line schema (`{"sentence_id":…, "head":…, "tail":…, "class":…}`).
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceRecord {
    sentence_id: String,
    head: String,
    tail: String,
    class: String,
}

/// Writes instances as line-delimited JSON records.
pub fn write_instances(instances: &[Instance], path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    for inst in instances {
        let rec = InstanceRecord {
            sentence_id: inst.sentence_id.clone(),
            head: inst.head.clone(),
            tail: inst.tail.clone(),
            class: inst.class.clone(),
        };
        serde_json::to_writer(&mut f, &rec).expect("record serializes");
        f.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads an instance file; directedness is not stored in the records and
/// must be supplied by the caller.
pub fn read_instances(path: &Path, directed: bool) -> Result<Vec<Instance>> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: InstanceRecord =
            serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
                line: idx + 1,
                message: e.to_string(),
            })?;
        let is_positive = rec.class != OTHER_CLASS;
        out.push(Instance {
            sentence_id: rec.sentence_id,
            head: rec.head,
            tail: rec.tail,
            class: rec.class,
            is_positive,
            directed,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Entity, RelationMention, Sentence};

    fn sentence(id: &str, entities: usize, relations: &[(usize, usize, &str)]) -> Sentence {
        let ents: Vec<Entity> = (0..entities)
            .map(|i| Entity {
                id: format!("e{i}"),
                start: i,
                end: i + 1,
                entity_type: "PER".into(),
            })
            .collect();
        let rels = relations
            .iter()
            .map(|&(h, t, c)| RelationMention {
                head: format!("e{h}"),
                tail: format!("e{t}"),
                class: c.into(),
            })
            .collect();
        Sentence {
            id: id.into(),
            tokens: (0..entities.max(1)).map(|i| format!("t{i}")).collect(),
            entities: ents,
            relations: rels,
        }
    }

    #[test]
    fn undirected_counts_and_labels() {
        let corpus = Corpus::new(vec![sentence("s1", 3, &[(0, 1, "R")])]);
        let instances = extract_undirected(&corpus).unwrap();
        assert_eq!(instances.len(), 3);
        let positive: Vec<_> = instances.iter().filter(|i| i.is_positive).collect();
        assert_eq!(positive.len(), 1);
        assert_eq!(positive[0].class, "R");
        assert_eq!((positive[0].head.as_str(), positive[0].tail.as_str()), ("e0", "e1"));
        assert_eq!(instances.iter().filter(|i| i.class == OTHER_CLASS).count(), 2);
    }

    #[test]
    fn undirected_without_relations_is_all_other() {
        let corpus = Corpus::new(vec![sentence("s1", 3, &[])]);
        let instances = extract_undirected(&corpus).unwrap();
        assert_eq!(instances.len(), 3);
        assert!(instances.iter().all(|i| !i.is_positive));
    }

    #[test]
    fn single_entity_yields_no_instances() {
        let corpus = Corpus::new(vec![sentence("s1", 1, &[])]);
        assert!(extract_undirected(&corpus).unwrap().is_empty());
        assert!(extract_directed(&corpus).unwrap().is_empty());
    }

    #[test]
    fn undirected_positive_reaches_either_direction() {
        let corpus = Corpus::new(vec![sentence("s1", 2, &[(1, 0, "R")])]);
        let instances = extract_undirected(&corpus).unwrap();
        assert_eq!(instances.len(), 1);
        assert!(instances[0].is_positive);
        // Canonical id order regardless of mention direction.
        assert_eq!(instances[0].head, "e0");
        assert_eq!(instances[0].tail, "e1");
    }

    #[test]
    fn undirected_conflicting_directions_fail() {
        let corpus = Corpus::new(vec![sentence("s1", 2, &[(0, 1, "R1"), (1, 0, "R2")])]);
        assert!(matches!(
            extract_undirected(&corpus),
            Err(Error::ConflictingClasses { .. })
        ));
    }

    #[test]
    fn directed_counts_and_reverse_negative() {
        let corpus = Corpus::new(vec![sentence("s1", 3, &[(0, 1, "R")])]);
        let instances = extract_directed(&corpus).unwrap();
        assert_eq!(instances.len(), 6);
        let positives: Vec<_> = instances.iter().filter(|i| i.is_positive).collect();
        assert_eq!(positives.len(), 1);
        assert_eq!((positives[0].head.as_str(), positives[0].tail.as_str()), ("e0", "e1"));
        let reverse = instances
            .iter()
            .find(|i| i.head == "e1" && i.tail == "e0")
            .unwrap();
        assert!(!reverse.is_positive);
    }

    #[test]
    fn directed_both_directions_positive() {
        let corpus = Corpus::new(vec![sentence("s1", 2, &[(0, 1, "R1"), (1, 0, "R2")])]);
        let instances = extract_directed(&corpus).unwrap();
        assert_eq!(instances.len(), 2);
        assert!(instances.iter().all(|i| i.is_positive));
    }

    #[test]
    fn directed_duplicate_conflicting_mention_fails() {
        let corpus = Corpus::new(vec![sentence("s1", 2, &[(0, 1, "R1"), (0, 1, "R2")])]);
        assert!(matches!(
            extract_directed(&corpus),
            Err(Error::ConflictingClasses { .. })
        ));
    }

    fn typed_corpus() -> Corpus {
        let mut s = sentence("s1", 3, &[(0, 1, "R")]);
        s.entities[0].entity_type = "PER".into();
        s.entities[1].entity_type = "GPE".into();
        s.entities[2].entity_type = "PER".into();
        Corpus::new(vec![s])
    }

    #[test]
    fn combos_come_from_positives_only() {
        let corpus = typed_corpus();
        let instances = extract_directed(&corpus).unwrap();
        let combos = allowed_type_combinations(&corpus, &instances).unwrap();
        assert_eq!(combos.len(), 1);
        assert!(combos.contains("PER", "GPE"));
        assert!(!combos.contains("GPE", "PER"));
    }

    #[test]
    fn no_positives_gives_empty_combo_set() {
        let corpus = Corpus::new(vec![sentence("s1", 3, &[])]);
        let instances = extract_undirected(&corpus).unwrap();
        let combos = allowed_type_combinations(&corpus, &instances).unwrap();
        assert!(combos.is_empty());
    }

    #[test]
    fn undirected_combos_are_canonical() {
        let mut s1 = sentence("s1", 2, &[(0, 1, "R")]);
        s1.entities[0].entity_type = "GPE".into();
        s1.entities[1].entity_type = "PER".into();
        let mut s2 = sentence("s2", 2, &[(0, 1, "R")]);
        s2.entities[0].entity_type = "PER".into();
        s2.entities[1].entity_type = "GPE".into();
        let corpus = Corpus::new(vec![s1, s2]);
        let instances = extract_undirected(&corpus).unwrap();
        let combos = allowed_type_combinations(&corpus, &instances).unwrap();
        assert_eq!(combos.len(), 1);
        assert!(combos.contains("PER", "GPE"));
        assert!(combos.contains("GPE", "PER"));
    }

    #[test]
    fn filter_drops_unseen_negative_combos_and_keeps_positives() {
        let corpus = typed_corpus();
        let instances = extract_directed(&corpus).unwrap();
        let combos = allowed_type_combinations(&corpus, &instances).unwrap();
        let kept = filter_by_type_combination(&corpus, &instances, &combos).unwrap();
        // Positives always survive.
        assert!(kept.iter().any(|i| i.is_positive));
        // (PER, PER) negatives are dropped; only (PER, GPE) negatives stay.
        for inst in kept.iter().filter(|i| !i.is_positive) {
            let (h, t) = entity_types_of(&corpus, inst).unwrap();
            assert_eq!((h.as_str(), t.as_str()), ("PER", "GPE"));
        }
        // Independent recount of the expected survivor count.
        let mut expected = 0;
        for inst in &instances {
            let (h, t) = entity_types_of(&corpus, inst).unwrap();
            if inst.is_positive || (h == "PER" && t == "GPE") {
                expected += 1;
            }
        }
        assert_eq!(kept.len(), expected);
    }

    #[test]
    fn filter_directedness_mismatch_fails() {
        let corpus = typed_corpus();
        let directed = extract_directed(&corpus).unwrap();
        let undirected = extract_undirected(&corpus).unwrap();
        let combos = allowed_type_combinations(&corpus, &directed).unwrap();
        assert!(matches!(
            filter_by_type_combination(&corpus, &undirected, &combos),
            Err(Error::DirectednessMismatch { .. })
        ));
    }

    fn mixed_instances(positives: usize, negatives: usize) -> Vec<Instance> {
        let mut out = Vec::new();
        for i in 0..positives {
            out.push(Instance::new(&format!("s{i}"), "e0", "e1", Some("R"), false));
        }
        for i in 0..negatives {
            out.push(Instance::new(&format!("s{}", positives + i), "e0", "e1", None, false));
        }
        out
    }

    #[test]
    fn subsample_hits_requested_ratio() {
        let instances = mixed_instances(2, 40);
        let out = subsample_negatives(&instances, 5.0, 3);
        assert_eq!(out.instances.iter().filter(|i| i.is_positive).count(), 2);
        assert_eq!(out.instances.iter().filter(|i| !i.is_positive).count(), 10);
        assert!(!out.truncated);
    }

    #[test]
    fn subsample_ratio_zero_keeps_positives_only() {
        let instances = mixed_instances(3, 10);
        let out = subsample_negatives(&instances, 0.0, 3);
        assert_eq!(out.instances.len(), 3);
        assert!(out.instances.iter().all(|i| i.is_positive));
    }

    #[test]
    fn subsample_is_deterministic_per_seed() {
        let instances = mixed_instances(2, 40);
        let a = subsample_negatives(&instances, 5.0, 9);
        let b = subsample_negatives(&instances, 5.0, 9);
        assert_eq!(a.instances, b.instances);
    }

    #[test]
    fn subsample_overrequest_sets_truncated_flag() {
        let instances = mixed_instances(4, 5);
        let out = subsample_negatives(&instances, 10.0, 1);
        assert!(out.truncated);
        assert_eq!(out.instances.len(), 9);
    }

    #[test]
    fn ratio_string_matches_reported_values() {
        assert_eq!(ratio_string(6906, 64989).unwrap(), "1:9.4");
        assert_eq!(ratio_string(10, 10).unwrap(), "1:1.0");
        assert_eq!(ratio_string(9317, 205800).unwrap(), "1:22.1");
        assert!(ratio_string(0, 5).is_err());
    }

    fn ten_sentence_corpus() -> Corpus {
        Corpus::new((0..10).map(|i| sentence(&format!("s{i}"), 2, &[])).collect())
    }

    #[test]
    fn kfold_partitions_evenly() {
        let corpus = ten_sentence_corpus();
        let folds = kfold_split(&corpus, 5, 7).unwrap();
        assert_eq!(folds.fold_sizes(), vec![2, 2, 2, 2, 2]);
        for s in corpus.sentences() {
            assert!(folds.fold_of(&s.id).is_some());
        }
    }

    #[test]
    fn kfold_is_deterministic_and_rejects_bad_k() {
        let corpus = ten_sentence_corpus();
        let a = kfold_split(&corpus, 3, 1).unwrap();
        let b = kfold_split(&corpus, 3, 1).unwrap();
        assert_eq!(a, b);
        assert!(kfold_split(&corpus, 11, 1).is_err());
        assert!(kfold_split(&corpus, 1, 1).is_err());
    }

    #[test]
    fn instance_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("instances.jsonl");
        let corpus = typed_corpus();
        let instances = extract_directed(&corpus).unwrap();
        write_instances(&instances, &path).unwrap();
        let back = read_instances(&path, true).unwrap();
        assert_eq!(instances, back);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_corpus() -> impl Strategy<Value = Corpus> {
            proptest::collection::vec((0usize..=6, proptest::collection::vec((0usize..6, 0usize..6), 0..3)), 1..8)
                .prop_map(|specs| {
                    let sentences = specs
                        .into_iter()
                        .enumerate()
                        .map(|(idx, (m, rels))| {
                            let pairs: Vec<(usize, usize, &str)> = rels
                                .into_iter()
                                .filter(|&(h, t)| h < m && t < m && h != t)
                                .map(|(h, t)| (h, t, "R"))
                                .collect();
                            super::sentence(&format!("s{idx}"), m, &pairs)
                        })
                        .collect();
                    Corpus::new(sentences)
                })
        }

        proptest! {
            #[test]
            fn extraction_counts_match_formulas(corpus in arb_corpus()) {
                let directed = match extract_directed(&corpus) {
                    Ok(i) => i,
                    Err(_) => return Ok(()), // conflicting random annotation
                };
                let undirected = extract_undirected(&corpus).unwrap();
                let m_sum: usize = corpus.sentences().iter().map(|s| {
                    let m = s.entities.len();
                    m * m.saturating_sub(1)
                }).sum();
                prop_assert_eq!(directed.len(), m_sum);
                prop_assert_eq!(undirected.len(), m_sum / 2);
            }

            #[test]
            fn filter_keeps_positives_and_is_idempotent(corpus in arb_corpus()) {
                let instances = match extract_directed(&corpus) {
                    Ok(i) => i,
                    Err(_) => return Ok(()),
                };
                let combos = allowed_type_combinations(&corpus, &instances).unwrap();
                let once = filter_by_type_combination(&corpus, &instances, &combos).unwrap();
                let twice = filter_by_type_combination(&corpus, &once, &combos).unwrap();
                prop_assert_eq!(&once, &twice);
                let pos_before = instances.iter().filter(|i| i.is_positive).count();
                let pos_after = once.iter().filter(|i| i.is_positive).count();
                prop_assert_eq!(pos_before, pos_after);
            }

            #[test]
            fn subsample_nesting_under_shared_seed(
                positives in 1usize..5,
                negatives in 0usize..40,
                rho1 in 0.0f64..4.0,
                extra in 0.0f64..4.0,
                seed in 0u64..1000,
            ) {
                let instances = mixed_instances(positives, negatives);
                let small = subsample_negatives(&instances, rho1, seed);
                let large = subsample_negatives(&instances, rho1 + extra, seed);
                let small_negs: Vec<_> = small.instances.iter().filter(|i| !i.is_positive).collect();
                let large_negs: Vec<_> = large.instances.iter().filter(|i| !i.is_positive).collect();
                for neg in &small_negs {
                    prop_assert!(large_negs.contains(neg));
                }
                // Positive count invariant under subsampling.
                prop_assert_eq!(small.instances.iter().filter(|i| i.is_positive).count(), positives);
            }

            #[test]
            fn kfold_is_a_partition(k in 2usize..6, n in 6usize..30, seed in 0u64..100) {
                prop_assume!(k <= n);
                let corpus = Corpus::new((0..n).map(|i| super::sentence(&format!("s{i}"), 2, &[])).collect());
                let folds = kfold_split(&corpus, k, seed).unwrap();
                let sizes = folds.fold_sizes();
                prop_assert_eq!(sizes.iter().sum::<usize>(), n);
                let max = sizes.iter().max().unwrap();
                let min = sizes.iter().min().unwrap();
                prop_assert!(max - min <= 1);
            }
        }
    }
}
