//! End-to-end runs: pre-train, train the retriever, retrieve, transfer,
//! train the reasoner, answer and score.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::encoder::{relation_text, Backend, Encoder, ToyEncoder};
use crate::error::Result;
use crate::eval::{choose_threshold, EvalReport, QuestionRecord};
use crate::kg::{KnowledgeGraph, PathConfig, QaInstance, Subgraph};
use crate::model::{Dims, ModelParams};
use crate::pipeline::{rank_entities, retrieve_with, RetrievalResult, ScoreMode};
use crate::scalar::Scalar;
use crate::training::{
    finetune, hits_at_1, pretrain_qrm, reasoning_example, relevant_relations, retrieval_example, transfer_params,
    Example, FinetuneOutcome, Phase, PretrainReport, TrainConfig,
};

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub dims: Dims,
    pub k: usize,
    pub max_hops: usize,
    pub score_mode: ScoreMode,
    /// Weak-supervision path search for pre-training.
    pub supervision: PathConfig,
    pub train: TrainConfig,
    pub pretrain: bool,
    pub transfer: bool,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dims: Dims { num_steps: 3, features: 16, hidden: 16 },
            k: 10,
            max_hops: 2,
            score_mode: ScoreMode::default(),
            supervision: PathConfig::default(),
            train: TrainConfig::default(),
            pretrain: true,
            transfer: true,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn fingerprint(&self) -> String {
        format!("{:x}", Sha256::digest(format!("{self:?}").as_bytes()))
    }
}

/// Toy encoder whose vocabulary covers the given questions and every
/// relation of `kg`. Rows are seeded by `seed`.
pub fn toy_encoder<'a, S: Scalar>(
    kg: &KnowledgeGraph,
    questions: impl IntoIterator<Item = &'a QaInstance>,
    dim: usize,
    seed: u64,
) -> Encoder<S> {
    let mut texts: Vec<String> = kg.relation_ids().map(|r| relation_text(&kg.relation_label(r))).collect();
    texts.extend(questions.into_iter().map(|q| q.question.clone()));
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x656e_636f);
    Encoder::new(Backend::Toy(ToyEncoder::from_texts(texts.iter().map(String::as_str), dim, &mut rng)))
}

pub struct Splits<'a> {
    pub kg: &'a KnowledgeGraph,
    pub train: &'a [QaInstance],
    pub valid: &'a [QaInstance],
    pub test: &'a [QaInstance],
}

pub struct PipelineRun<S> {
    pub encoder: Encoder<S>,
    pub pretrain: Option<PretrainReport>,
    pub retriever: FinetuneOutcome<S>,
    pub reasoner: FinetuneOutcome<S>,
    /// Test retrieval results in question order.
    pub retrieved: Vec<RetrievalResult>,
    /// Reasoning test Hits@1 after each epoch, starting at the initial model.
    pub test_curve: Vec<f64>,
    pub report: EvalReport,
}

pub fn retrieve_all<S: Scalar>(
    questions: &[QaInstance],
    kg: &KnowledgeGraph,
    params: &ModelParams<S>,
    encoder: &Encoder<S>,
    k: usize,
    max_hops: usize,
    mode: ScoreMode,
) -> Result<Vec<RetrievalResult>> {
    questions.iter().map(|q| retrieve_with(q, kg, params, encoder, k, max_hops, mode)).collect()
}

fn reasoning_examples<S: Scalar>(
    kg: &KnowledgeGraph,
    questions: &[QaInstance],
    retrieved: &[RetrievalResult],
    encoder: &Encoder<S>,
) -> Result<Vec<Example<S>>> {
    questions.iter().zip(retrieved).map(|(q, r)| reasoning_example(kg, q, &r.subgraph, encoder)).collect()
}

/// Ranked `(entity, score)` lists for `questions` over their subgraphs.
pub fn rank_all<S: Scalar>(
    questions: &[QaInstance],
    subgraphs: &[&Subgraph],
    kg: &KnowledgeGraph,
    params: &ModelParams<S>,
    encoder: &Encoder<S>,
) -> Result<Vec<Vec<(crate::kg::EntityId, f64)>>> {
    questions
        .iter()
        .zip(subgraphs)
        .map(|(q, s)| {
            rank_entities(q, s, kg, params, encoder).map(|r| r.into_iter().map(|x| (x.entity, x.score)).collect())
        })
        .collect()
}

/// Pre-trains the encoder (or freezes it untouched) for `cfg`.
pub fn prepare_encoder<S: Scalar>(
    data: &Splits<'_>,
    cfg: &ExperimentConfig,
) -> Result<(Encoder<S>, Option<PretrainReport>)> {
    let all = data.train.iter().chain(data.valid).chain(data.test);
    let mut encoder = toy_encoder(data.kg, all, cfg.dims.hidden, cfg.seed);
    let report = if cfg.pretrain {
        let sources = relevant_relations(data.kg, data.train, cfg.supervision);
        Some(pretrain_qrm(data.kg, &sources, &mut encoder, &cfg.train)?)
    } else {
        encoder.freeze();
        None
    };
    Ok((encoder, report))
}

pub fn run_pipeline<S: Scalar>(data: &Splits<'_>, cfg: &ExperimentConfig) -> Result<PipelineRun<S>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let train_cfg = TrainConfig { seed: cfg.seed, ..cfg.train.clone() };
    let cfg = &ExperimentConfig { train: train_cfg, ..cfg.clone() };
    let (encoder, pretrain) = prepare_encoder::<S>(data, cfg)?;
    let kg = data.kg;

    let retrieval_train = data
        .train
        .iter()
        .map(|q| retrieval_example(kg, q, &encoder, cfg.max_hops).map(|(e, _)| e))
        .collect::<Result<Vec<_>>>()?;
    let retrieval_valid = data
        .valid
        .iter()
        .map(|q| retrieval_example(kg, q, &encoder, cfg.max_hops).map(|(e, _)| e))
        .collect::<Result<Vec<_>>>()?;
    let init = ModelParams::random(cfg.dims, &mut rng)?;
    let fresh = ModelParams::random(cfg.dims, &mut rng)?;
    let mut valid_eval = |p: &ModelParams<S>| hits_at_1(p, &retrieval_valid);
    let retriever =
        finetune(Phase::Retrieval, init, &retrieval_train, &cfg.train, cfg.train.retrieval_epochs, Some(&mut valid_eval))?;

    let theta = &retriever.params;
    let train_ret = retrieve_all(data.train, kg, theta, &encoder, cfg.k, cfg.max_hops, cfg.score_mode)?;
    let valid_ret = retrieve_all(data.valid, kg, theta, &encoder, cfg.k, cfg.max_hops, cfg.score_mode)?;
    let test_ret = retrieve_all(data.test, kg, theta, &encoder, cfg.k, cfg.max_hops, cfg.score_mode)?;

    let gamma = if cfg.transfer { transfer_params(theta, cfg.dims)? } else { fresh };
    let train_ex = reasoning_examples(kg, data.train, &train_ret, &encoder)?;
    let valid_ex = reasoning_examples(kg, data.valid, &valid_ret, &encoder)?;
    let test_ex = reasoning_examples(kg, data.test, &test_ret, &encoder)?;
    let mut test_curve = Vec::new();
    let mut eval = |p: &ModelParams<S>| {
        test_curve.push(hits_at_1(p, &test_ex)?);
        hits_at_1(p, &valid_ex)
    };
    let reasoner = finetune(Phase::Reasoning, gamma, &train_ex, &cfg.train, cfg.train.reasoning_epochs, Some(&mut eval))?;

    let valid_subs: Vec<&Subgraph> = valid_ret.iter().map(|r| &r.subgraph).collect();
    let valid_ranked = rank_all(data.valid, &valid_subs, kg, &reasoner.params, &encoder)?;
    let threshold = choose_threshold(
        &valid_ranked
            .into_iter()
            .zip(data.valid)
            .map(|(r, q)| (r, q.answers.iter().copied().collect()))
            .collect::<Vec<_>>(),
    );
    let test_subs: Vec<&Subgraph> = test_ret.iter().map(|r| &r.subgraph).collect();
    let test_ranked = rank_all(data.test, &test_subs, kg, &reasoner.params, &encoder)?;
    let records = data
        .test
        .iter()
        .zip(&test_ranked)
        .zip(&test_ret)
        .map(|((q, ranked), r)| {
            QuestionRecord::score(
                q.id.clone(),
                ranked,
                &q.answers,
                threshold,
                r.coverage.unwrap_or(false),
                r.subgraph.entities.len(),
            )
        })
        .collect();
    let report = EvalReport::from_records(records, threshold, cfg.fingerprint(), cfg.seed);
    Ok(PipelineRun { encoder, pretrain, retriever, reasoner, retrieved: test_ret, test_curve, report })
}
