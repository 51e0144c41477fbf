//! Contrastive question/relation pre-training of the encoder.

use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::TrainConfig;
use super::optim::AdamW;
use crate::encoder::{relation_text, Encoder, ToyEncoder};
use crate::error::{Error, Result};
use crate::kg::{shortest_path_relations, KnowledgeGraph, PathConfig, QaInstance, RelationId};
use crate::linalg::{cosine, cosine_backward, log_sum_exp, softmax, Matrix};
use crate::scalar::Scalar;

/// Weakly supervised relevant relations of one question: every relation on a
/// shortest topic-to-answer path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelevantRelations {
    pub id: String,
    pub question: String,
    pub relations: BTreeSet<RelationId>,
}

/// One sampled positive pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QrPair {
    pub id: String,
    pub question: String,
    pub positive: String,
}

/// A batch row: question, positive relation label, sampled negative labels,
/// and labels that may never act as negatives for this question.
#[derive(Clone, Debug)]
pub struct ContrastiveItem {
    pub question: String,
    pub positive: String,
    pub negatives: Vec<String>,
    pub excluded: BTreeSet<String>,
}

/// Instances without any reachable answer are dropped.
pub fn relevant_relations(kg: &KnowledgeGraph, instances: &[QaInstance], cfg: PathConfig) -> Vec<RelevantRelations> {
    instances
        .iter()
        .filter_map(|inst| {
            let relations = shortest_path_relations(kg, inst, cfg);
            if relations.is_empty() {
                log::debug!("{}: no weak-supervision relations", inst.id);
                return None;
            }
            Some(RelevantRelations { id: inst.id.clone(), question: inst.question.clone(), relations })
        })
        .collect()
}

/// Samples one positive and `negatives` uniformly drawn non-relevant relations.
pub fn sample_item<R: Rng + ?Sized>(
    kg: &KnowledgeGraph,
    source: &RelevantRelations,
    negatives: usize,
    rng: &mut R,
) -> (QrPair, ContrastiveItem) {
    let positives: Vec<RelationId> = source.relations.iter().copied().collect();
    let positive = kg.relation_label(*positives.choose(rng).expect("nonempty relevant set"));
    let pool: Vec<RelationId> = kg.relation_ids().filter(|r| !source.relations.contains(r)).collect();
    let negatives: Vec<String> = if pool.is_empty() {
        Vec::new()
    } else {
        (0..negatives).map(|_| kg.relation_label(*pool.choose(rng).expect("nonempty"))).collect()
    };
    let excluded = source.relations.iter().map(|&r| kg.relation_label(r)).collect();
    let pair = QrPair { id: source.id.clone(), question: source.question.clone(), positive: positive.clone() };
    (pair, ContrastiveItem { question: source.question.clone(), positive, negatives, excluded })
}

struct Encoded<S> {
    ids: Vec<usize>,
    vector: Vec<S>,
    grad: Vec<S>,
}

fn encode_all<S: Scalar>(toy: &ToyEncoder<S>, texts: impl Iterator<Item = String>) -> HashMap<String, Encoded<S>> {
    let mut out = HashMap::new();
    for text in texts {
        out.entry(text).or_insert_with_key(|t| {
            let ids = toy.token_ids(t);
            let vector = toy.encode_ids(&ids);
            let grad = vec![S::zero(); vector.len()];
            Encoded { ids, vector, grad }
        });
    }
    out
}

/// Mean contrastive loss over the batch and its gradient with respect to the
/// toy encoder's token table.
///
/// Row `i` scores its positive against every other row's positive and every
/// row's negatives, minus any candidate whose label is excluded for `i`.
pub fn contrastive_loss<S: Scalar>(toy: &ToyEncoder<S>, batch: &[ContrastiveItem], temperature: f64) -> (S, Matrix<S>) {
    let mut grad_table = Matrix::zeros(toy.vocab_size(), toy.dim());
    if batch.is_empty() {
        return (S::zero(), grad_table);
    }
    let tau = S::lit(temperature);
    let mut questions = encode_all(toy, batch.iter().map(|b| b.question.clone()));
    let mut relations = encode_all(
        toy,
        batch.iter().flat_map(|b| std::iter::once(&b.positive).chain(&b.negatives)).map(|l| relation_text(l)),
    );
    let scale = S::one() / S::lit(batch.len() as f64);
    let mut total = S::zero();

    for (i, item) in batch.iter().enumerate() {
        let mut candidates: Vec<&str> = vec![&item.positive];
        for (j, other) in batch.iter().enumerate() {
            if j != i && !item.excluded.contains(&other.positive) && other.positive != item.positive {
                candidates.push(&other.positive);
            }
        }
        for other in batch {
            for neg in &other.negatives {
                if !item.excluded.contains(neg) && *neg != item.positive {
                    candidates.push(neg);
                }
            }
        }
        let texts: Vec<String> = candidates.iter().map(|l| relation_text(l)).collect();
        let q = &questions[&item.question].vector;
        let logits: Vec<S> = texts.iter().map(|t| cosine(q, &relations[t].vector) / tau).collect();
        total += log_sum_exp(&logits) - logits[0];

        let probs = softmax(&logits);
        let mut dq = vec![S::zero(); q.len()];
        for (k, text) in texts.iter().enumerate() {
            let indicator = if k == 0 { S::one() } else { S::zero() };
            let upstream = (probs[k] - indicator) * scale / tau;
            let rel = relations.get_mut(text).expect("encoded");
            let mut dr = vec![S::zero(); q.len()];
            cosine_backward(q, &rel.vector, upstream, &mut dq, &mut dr);
            rel.grad.iter_mut().zip(dr).for_each(|(g, x)| *g += x);
        }
        let qe = questions.get_mut(&item.question).expect("encoded");
        qe.grad.iter_mut().zip(dq).for_each(|(g, x)| *g += x);
    }

    for e in questions.values().chain(relations.values()) {
        toy.backward_ids(&e.ids, &e.vector, &e.grad, &mut grad_table);
    }
    (total * scale, grad_table)
}

#[derive(Clone, Debug, Default)]
pub struct PretrainReport {
    /// Mean batch loss per epoch.
    pub epoch_losses: Vec<f64>,
    pub pairs: usize,
}

/// Trains the toy encoder on sampled question/relation pairs, then freezes it.
pub fn pretrain_qrm<S: Scalar>(
    kg: &KnowledgeGraph,
    sources: &[RelevantRelations],
    encoder: &mut Encoder<S>,
    cfg: &TrainConfig,
) -> Result<PretrainReport> {
    cfg.validate()?;
    if !encoder.is_trainable() {
        return Err(Error::NotTrainable);
    }
    if sources.is_empty() {
        return Err(Error::NoTrainableInstances("no question has weak-supervision relations".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5052_4554_5241_494e);
    let mut opt = AdamW::<S>::new(cfg.lr_encoder, cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay);
    let mut report = PretrainReport { pairs: sources.len(), ..Default::default() };
    let mut order: Vec<usize> = (0..sources.len()).collect();
    for epoch in 0..cfg.pretrain_epochs {
        order.shuffle(&mut rng);
        let mut losses = Vec::new();
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<ContrastiveItem> =
                chunk.iter().map(|&i| sample_item(kg, &sources[i], cfg.negatives, &mut rng).1).collect();
            let toy = encoder.toy_mut()?;
            let (loss, grad) = contrastive_loss(toy, &batch, cfg.temperature);
            opt.step(vec![toy.table_mut().as_mut_slice()], vec![grad.as_slice()]);
            losses.push(loss.as_f64());
        }
        let mean = losses.iter().sum::<f64>() / losses.len() as f64;
        log::info!("pretrain epoch {epoch}: loss {mean:.4}");
        report.epoch_losses.push(mean);
    }
    encoder.freeze();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn encoder() -> ToyEncoder<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        ToyEncoder::from_texts(
            ["who directed film x", "film directed by", "person spouse", "team arena", "book author", "music genre"],
            6,
            &mut rng,
        )
    }

    fn item(q: &str, pos: &str, negs: &[&str]) -> ContrastiveItem {
        ContrastiveItem {
            question: q.into(),
            positive: pos.into(),
            negatives: negs.iter().map(|s| s.to_string()).collect(),
            excluded: BTreeSet::from([pos.to_string()]),
        }
    }

    #[test]
    fn lone_positive_has_zero_loss() {
        let (loss, grad) = contrastive_loss(&encoder(), &[item("who directed film x", "film.directed_by", &[])], 0.05);
        assert_eq!(loss, 0.0);
        assert!(grad.as_slice().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn infinite_temperature_gives_log_2m() {
        let batch = vec![
            item("who directed film x", "film.directed_by", &["person.spouse"]),
            item("team arena", "team.arena", &["book.author"]),
            item("music genre", "music.genre", &["sports.team"]),
        ];
        let (loss, _) = contrastive_loss(&encoder(), &batch, 1e12);
        assert!((loss - 6.0f64.ln()).abs() < 1e-9, "{loss}");
    }

    #[test]
    fn excluded_labels_never_compete() {
        let mut a = item("who directed film x", "film.directed_by", &[]);
        let b = item("team arena", "person.spouse", &[]);
        a.excluded.insert("person.spouse".into());
        let (loss, _) = contrastive_loss(&encoder(), &[a, b], 0.05);
        // row 0 only sees its positive; row 1 competes against row 0's positive
        let enc = encoder();
        let q = enc.encode("team arena");
        let s_pos = cosine(&q, &enc.encode("person spouse")) / 0.05;
        let s_neg = cosine(&q, &enc.encode("film directed by")) / 0.05;
        let want = (log_sum_exp(&[s_pos, s_neg]) - s_pos) / 2.0;
        assert!((loss - want).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let enc = encoder();
        let batch = vec![
            item("who directed film x", "film.directed_by", &["person.spouse"]),
            item("team arena x", "team.arena", &["music.genre", "~film.directed_by"]),
        ];
        let (_, grad) = contrastive_loss(&enc, &batch, 0.5);
        for row in 0..enc.vocab_size() {
            for col in 0..enc.dim() {
                let mut plus = enc.clone();
                plus.table_mut()[(row, col)] += 1e-6;
                let mut minus = enc.clone();
                minus.table_mut()[(row, col)] -= 1e-6;
                let fd = (contrastive_loss(&plus, &batch, 0.5).0 - contrastive_loss(&minus, &batch, 0.5).0) / 2e-6;
                let an = grad[(row, col)];
                assert!((fd - an).abs() <= 1e-4 * fd.abs().max(an.abs()) + 1e-9, "({row},{col}) {fd} vs {an}");
            }
        }
    }
}
