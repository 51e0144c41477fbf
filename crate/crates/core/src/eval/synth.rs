//! Random typed knowledge graphs with planted relation-path questions.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kg::{shortest_path_relations, EntityId, KnowledgeGraph, PathConfig, QaInstance, RelationId};

const TYPE_NAMES: [&str; 8] = ["person", "film", "place", "company", "book", "team", "song", "school"];

/// Relation label words and the words questions use for the same relation.
/// The two lists share no tokens, so matching them must be learned.
const RELATION_WORDS: [&str; 24] = [
    "employer", "director", "located_in", "founder", "author", "home_stadium", "performer", "alumni",
    "spouse", "producer", "capital", "ceo", "publisher", "coach", "composer", "principal", "nationality",
    "genre", "mayor", "headquarters", "translator", "sponsor", "label", "campus",
];
const QUESTION_WORDS: [&str; 24] = [
    "workplace", "filmmaker", "region", "creator", "writer", "arena", "singer", "graduate", "partner",
    "financier", "seat", "boss", "printer", "trainer", "songwriter", "head", "citizenship", "style",
    "governor", "office", "interpreter", "backer", "imprint", "grounds",
];

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub entities: usize,
    pub relations: usize,
    /// Entity types; relation `i` links type `i mod types` to `(i + 1) mod types`.
    pub types: usize,
    pub hops: usize,
    /// Path templates; 0 means one per relation.
    pub templates: usize,
    /// Probability that an entity has a given outgoing relation.
    pub edge_prob: f64,
    /// Most tails per (head, relation).
    pub max_fanout: usize,
    pub max_answers: usize,
    pub n_train: usize,
    pub n_valid: usize,
    pub n_test: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            entities: 500,
            relations: 12,
            types: 4,
            hops: 2,
            templates: 0,
            edge_prob: 0.6,
            max_fanout: 2,
            max_answers: 3,
            n_train: 200,
            n_valid: 50,
            n_test: 100,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SynthDataset {
    pub kg: KnowledgeGraph,
    /// Planted relation sequences.
    pub templates: Vec<Vec<RelationId>>,
    pub train: Vec<QaInstance>,
    pub valid: Vec<QaInstance>,
    pub test: Vec<QaInstance>,
}

impl SynthDataset {
    pub fn all(&self) -> impl Iterator<Item = &QaInstance> {
        self.train.iter().chain(&self.valid).chain(&self.test)
    }
}

pub fn relation_label(i: usize, types: usize) -> String {
    let domain = TYPE_NAMES.get(i % types).map_or_else(|| format!("type{}", i % types), |s| s.to_string());
    let word = RELATION_WORDS.get(i).map_or_else(|| format!("link{i}"), |s| s.to_string());
    format!("{domain}.{word}")
}

pub fn question_word(i: usize) -> String {
    QUESTION_WORDS.get(i).map_or_else(|| format!("via{i}"), |s| s.to_string())
}

/// "what is the {pN} of ... the {p1} of {topic}".
pub fn question_text(path: &[usize], topic: &str) -> String {
    let mut text = String::from("what is");
    for &r in path.iter().rev() {
        text.push_str(&format!(" the {} of", question_word(r)));
    }
    text.push(' ');
    text.push_str(topic);
    text
}

fn validate(cfg: &SynthConfig) -> Result<()> {
    if !(1..=3).contains(&cfg.hops) {
        return Err(Error::InvalidArgument(format!("hops must be 1, 2 or 3, got {}", cfg.hops)));
    }
    if cfg.relations < 4 {
        return Err(Error::InvalidArgument(format!("need at least 4 relations, got {}", cfg.relations)));
    }
    if cfg.types < 2 || cfg.types > cfg.relations {
        return Err(Error::InvalidArgument(format!("types must lie in 2..={}, got {}", cfg.relations, cfg.types)));
    }
    if cfg.entities < cfg.types * 2 {
        return Err(Error::Infeasible(format!("{} entities cannot populate {} types", cfg.entities, cfg.types)));
    }
    if cfg.max_fanout == 0 || cfg.max_answers == 0 || !(0.0..=1.0).contains(&cfg.edge_prob) {
        return Err(Error::InvalidArgument("fanout, answer cap and edge probability must be positive".into()));
    }
    Ok(())
}

/// Deterministic per seed. Every instance's answers are exactly `hops`
/// edges from its topic and its shortest-path relations are exactly the
/// planted ones.
pub fn synth_dataset(cfg: &SynthConfig) -> Result<SynthDataset> {
    validate(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let types = cfg.types;
    let labels: Vec<String> = (0..cfg.entities).map(|e| format!("ent{e}")).collect();
    let of_type: Vec<Vec<usize>> = (0..types).map(|t| (t..cfg.entities).step_by(types).collect()).collect();

    let mut b = KnowledgeGraph::builder();
    for l in &labels {
        b.add_entity(l);
    }
    for i in 0..cfg.relations {
        b.add_relation(&relation_label(i, types))?;
    }
    // successor lists in planted (forward) direction, for answer computation
    let mut succ: Vec<Vec<Vec<usize>>> = vec![vec![Vec::new(); cfg.relations]; cfg.entities];
    for (head, out) in succ.iter_mut().enumerate() {
        for r in (0..cfg.relations).filter(|r| r % types == head % types) {
            if !rng.gen_bool(cfg.edge_prob) {
                continue;
            }
            let n = rng.gen_range(1..=cfg.max_fanout);
            let range = &of_type[(r + 1) % types];
            let mut tails: Vec<usize> = range.choose_multiple(&mut rng, n).copied().collect();
            tails.sort_unstable();
            for &t in &tails {
                b.add_triple(&labels[head], &relation_label(r, types), &labels[t])?;
            }
            out[r] = tails;
        }
    }
    let kg = b.build();

    let n_templates = if cfg.templates == 0 { cfg.relations } else { cfg.templates };
    let mut paths: Vec<Vec<usize>> = Vec::with_capacity(n_templates);
    for k in 0..n_templates {
        let mut path = vec![k % cfg.relations];
        while path.len() < cfg.hops {
            let ty = (path.last().expect("nonempty") + 1) % types;
            let next: Vec<usize> = (0..cfg.relations).filter(|r| r % types == ty).collect();
            path.push(*next.choose(&mut rng).expect("every type has a relation"));
        }
        paths.push(path);
    }

    let mut candidates: Vec<(usize, usize)> = paths
        .iter()
        .enumerate()
        .flat_map(|(k, p)| of_type[p[0] % types].iter().map(move |&e| (k, e)))
        .collect();
    candidates.shuffle(&mut rng);

    let needed = cfg.n_train + cfg.n_valid + cfg.n_test;
    let mut accepted = Vec::with_capacity(needed);
    for (k, topic) in candidates {
        if accepted.len() == needed {
            break;
        }
        let mut frontier = BTreeSet::from([topic]);
        for &r in &paths[k] {
            frontier = frontier.iter().flat_map(|&e| succ[e][r].iter().copied()).collect();
        }
        if frontier.is_empty() || frontier.len() > cfg.max_answers || frontier.contains(&topic) {
            continue;
        }
        let inst = QaInstance {
            id: String::new(),
            question: question_text(&paths[k], &labels[topic]),
            topic_entities: vec![EntityId(topic as u32)],
            answers: frontier.iter().map(|&e| EntityId(e as u32)).collect(),
        };
        let planted: BTreeSet<RelationId> = paths[k].iter().map(|&r| RelationId(2 * r as u32)).collect();
        if shortest_path_relations(&kg, &inst, PathConfig::default()) != planted {
            continue;
        }
        accepted.push(inst);
    }
    if accepted.len() < needed {
        return Err(Error::Infeasible(format!(
            "only {} of {needed} questions satisfy the planted-path constraints",
            accepted.len()
        )));
    }
    let mut it = accepted.into_iter().enumerate().map(|(i, mut q)| {
        q.id = format!("q{i:05}");
        q
    });
    let train = it.by_ref().take(cfg.n_train).collect();
    let valid = it.by_ref().take(cfg.n_valid).collect();
    let test = it.collect();
    let templates =
        paths.into_iter().map(|p| p.into_iter().map(|r| RelationId(2 * r as u32)).collect()).collect();
    Ok(SynthDataset { kg, templates, train, valid, test })
}
