//! Flat `section.key = value` run configuration.
//!
//! ```text
//! # comments start with '#'
//! model.T = 3
//! retrieval.K = 10
//! train.lr_other = 0.01
//! ```

use std::path::{Path, PathBuf};
use std::time::Duration;

use sha2::{Digest, Sha256};

use crate::encoder::{Backend, Encoder, FileEncoder, RemoteEncoder, ToyEncoder};
use crate::error::{Error, Result};
use crate::eval::SynthConfig;
use crate::experiment::ExperimentConfig;
use crate::kg::PathConfig;
use crate::model::Dims;
use crate::pipeline::ScoreMode;
use crate::scalar::Scalar;
use crate::training::{KlDirection, TrainConfig};

/// Overrides `paths.cache` when set.
pub const CACHE_DIR_ENV: &str = "UNIKGQA_CACHE_DIR";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EncoderKind {
    Toy,
    File,
    Remote,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub kg: Option<PathBuf>,
    pub questions: Option<PathBuf>,
    pub valid_questions: Option<PathBuf>,
    pub checkpoints: PathBuf,
    pub cache: PathBuf,
    pub dims: Dims,
    pub k: usize,
    pub max_hops: usize,
    pub score_mode: ScoreMode,
    pub supervision: PathConfig,
    pub top_n: usize,
    pub train: TrainConfig,
    pub encoder: EncoderKind,
    /// Embedding file for the file backend.
    pub encoder_path: Option<PathBuf>,
    pub encoder_url: Option<String>,
    pub encoder_timeout_secs: u64,
    pub synth: SynthConfig,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let exp = ExperimentConfig::default();
        Self {
            kg: None,
            questions: None,
            valid_questions: None,
            checkpoints: PathBuf::from("checkpoints"),
            cache: PathBuf::from(".kgqa-cache"),
            dims: exp.dims,
            k: exp.k,
            max_hops: exp.max_hops,
            score_mode: exp.score_mode,
            supervision: exp.supervision,
            top_n: 20,
            train: exp.train,
            encoder: EncoderKind::Toy,
            encoder_path: None,
            encoder_url: None,
            encoder_timeout_secs: 30,
            synth: SynthConfig::default(),
            seed: 0,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

fn opt_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            cfg.set(key.trim(), value.trim()).map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Applies `key=value` overrides in order.
    pub fn apply_overrides<I: AsRef<str>>(&mut self, overrides: impl IntoIterator<Item = I>) -> Result<()> {
        for o in overrides {
            let o = o.as_ref();
            let (k, v) = o.split_once('=').ok_or_else(|| Error::Config(format!("override {o:?} is not key=value")))?;
            self.set(k.trim(), v.trim())?;
        }
        self.validate()
    }

    /// Reads [`CACHE_DIR_ENV`].
    pub fn apply_env(&mut self) {
        if let Some(dir) = std::env::var_os(CACHE_DIR_ENV).filter(|d| !d.is_empty()) {
            self.cache = PathBuf::from(dir);
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let t = &mut self.train;
        let s = &mut self.synth;
        match key {
            "paths.kg" => self.kg = opt_path(value),
            "paths.questions" => self.questions = opt_path(value),
            "paths.valid_questions" => self.valid_questions = opt_path(value),
            "paths.checkpoints" => self.checkpoints = PathBuf::from(value),
            "paths.cache" => self.cache = PathBuf::from(value),
            "model.T" => self.dims.num_steps = parse(key, value)?,
            "model.d" => self.dims.features = parse(key, value)?,
            "model.h" => self.dims.hidden = parse(key, value)?,
            "retrieval.K" => self.k = parse(key, value)?,
            "retrieval.max_hops" => self.max_hops = parse(key, value)?,
            "retrieval.score_mode" => self.score_mode = value.parse()?,
            "answer.top_n" => self.top_n = parse(key, value)?,
            "supervision.allow_inverse" => self.supervision.allow_inverse = parse(key, value)?,
            "train.temperature" => t.temperature = parse(key, value)?,
            "train.batch_size" => t.batch_size = parse(key, value)?,
            "train.negatives" => t.negatives = parse(key, value)?,
            "train.lr_encoder" => t.lr_encoder = parse(key, value)?,
            "train.lr_other" => t.lr_other = parse(key, value)?,
            "train.pretrain_epochs" => t.pretrain_epochs = parse(key, value)?,
            "train.retrieval_epochs" => t.retrieval_epochs = parse(key, value)?,
            "train.reasoning_epochs" => t.reasoning_epochs = parse(key, value)?,
            "train.beta1" => t.beta1 = parse(key, value)?,
            "train.beta2" => t.beta2 = parse(key, value)?,
            "train.eps" => t.eps = parse(key, value)?,
            "train.weight_decay" => t.weight_decay = parse(key, value)?,
            "train.kl_direction" => {
                t.kl_direction = match value {
                    "target_first" => KlDirection::TargetFirst,
                    "prediction_first" => KlDirection::PredictionFirst,
                    _ => return Err(Error::Config(format!("{key}: expected target_first or prediction_first"))),
                }
            }
            "encoder.backend" => {
                self.encoder = match value {
                    "toy" => EncoderKind::Toy,
                    "file" => EncoderKind::File,
                    "remote" => EncoderKind::Remote,
                    _ => return Err(Error::Config(format!("{key}: expected toy, file or remote"))),
                }
            }
            "encoder.path" => self.encoder_path = opt_path(value),
            "encoder.remote_url" | "encoder.url" => self.encoder_url = (!value.is_empty()).then(|| value.to_string()),
            "encoder.timeout_secs" => self.encoder_timeout_secs = parse(key, value)?,
            "synth.entities" => s.entities = parse(key, value)?,
            "synth.relations" => s.relations = parse(key, value)?,
            "synth.types" => s.types = parse(key, value)?,
            "synth.hops" => s.hops = parse(key, value)?,
            "synth.templates" => s.templates = parse(key, value)?,
            "synth.edge_prob" => s.edge_prob = parse(key, value)?,
            "synth.max_fanout" => s.max_fanout = parse(key, value)?,
            "synth.max_answers" => s.max_answers = parse(key, value)?,
            "synth.n_train" => s.n_train = parse(key, value)?,
            "synth.n_valid" => s.n_valid = parse(key, value)?,
            "synth.n_test" => s.n_test = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.dims.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.k == 0 || self.max_hops == 0 || self.top_n == 0 {
            return Err(Error::Config("retrieval.K, retrieval.max_hops and answer.top_n must be positive".into()));
        }
        self.train.validate()
    }

    /// Every key with its resolved value, sorted by key.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let t = &self.train;
        let s = &self.synth;
        let mut out = vec![
            ("paths.kg", path(&self.kg)),
            ("paths.questions", path(&self.questions)),
            ("paths.valid_questions", path(&self.valid_questions)),
            ("paths.checkpoints", self.checkpoints.display().to_string()),
            ("paths.cache", self.cache.display().to_string()),
            ("model.T", self.dims.num_steps.to_string()),
            ("model.d", self.dims.features.to_string()),
            ("model.h", self.dims.hidden.to_string()),
            ("retrieval.K", self.k.to_string()),
            ("retrieval.max_hops", self.max_hops.to_string()),
            (
                "retrieval.score_mode",
                match self.score_mode {
                    ScoreMode::Final => "final",
                    ScoreMode::MaxStep => "max_step",
                }
                .into(),
            ),
            ("answer.top_n", self.top_n.to_string()),
            ("supervision.allow_inverse", self.supervision.allow_inverse.to_string()),
            ("train.temperature", t.temperature.to_string()),
            ("train.batch_size", t.batch_size.to_string()),
            ("train.negatives", t.negatives.to_string()),
            ("train.lr_encoder", t.lr_encoder.to_string()),
            ("train.lr_other", t.lr_other.to_string()),
            ("train.pretrain_epochs", t.pretrain_epochs.to_string()),
            ("train.retrieval_epochs", t.retrieval_epochs.to_string()),
            ("train.reasoning_epochs", t.reasoning_epochs.to_string()),
            ("train.beta1", t.beta1.to_string()),
            ("train.beta2", t.beta2.to_string()),
            ("train.eps", t.eps.to_string()),
            ("train.weight_decay", t.weight_decay.to_string()),
            (
                "train.kl_direction",
                match t.kl_direction {
                    KlDirection::TargetFirst => "target_first",
                    KlDirection::PredictionFirst => "prediction_first",
                }
                .into(),
            ),
            (
                "encoder.backend",
                match self.encoder {
                    EncoderKind::Toy => "toy",
                    EncoderKind::File => "file",
                    EncoderKind::Remote => "remote",
                }
                .into(),
            ),
            ("encoder.path", path(&self.encoder_path)),
            ("encoder.remote_url", self.encoder_url.clone().unwrap_or_default()),
            ("encoder.timeout_secs", self.encoder_timeout_secs.to_string()),
            ("synth.entities", s.entities.to_string()),
            ("synth.relations", s.relations.to_string()),
            ("synth.types", s.types.to_string()),
            ("synth.hops", s.hops.to_string()),
            ("synth.templates", s.templates.to_string()),
            ("synth.edge_prob", s.edge_prob.to_string()),
            ("synth.max_fanout", s.max_fanout.to_string()),
            ("synth.max_answers", s.max_answers.to_string()),
            ("synth.n_train", s.n_train.to_string()),
            ("synth.n_valid", s.n_valid.to_string()),
            ("synth.n_test", s.n_test.to_string()),
            ("seed", self.seed.to_string()),
        ];
        out.sort();
        out
    }

    pub fn to_text(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Hex SHA-256 of [`RunConfig::to_text`].
    pub fn fingerprint(&self) -> String {
        format!("{:x}", Sha256::digest(self.to_text().as_bytes()))
    }

    pub fn experiment(&self, pretrain: bool, transfer: bool) -> ExperimentConfig {
        ExperimentConfig {
            dims: self.dims,
            k: self.k,
            max_hops: self.max_hops,
            score_mode: self.score_mode,
            supervision: self.supervision,
            train: TrainConfig { seed: self.seed, ..self.train.clone() },
            pretrain,
            transfer,
            seed: self.seed,
        }
    }

    /// Opens a file or remote encoder. Toy encoders come from checkpoints.
    pub fn external_encoder<S: Scalar>(&self) -> Result<Encoder<S>> {
        let backend = match self.encoder {
            EncoderKind::Toy => return Err(Error::Config("toy encoders are loaded from checkpoints".into())),
            EncoderKind::File => {
                let p = self.encoder_path.as_ref().ok_or_else(|| Error::Config("encoder.path is not set".into()))?;
                Backend::File(FileEncoder::load(p)?)
            }
            EncoderKind::Remote => {
                let url = self.encoder_url.clone().ok_or_else(|| Error::Config("encoder.url is not set".into()))?;
                Backend::Remote(RemoteEncoder::new(url, self.dims.hidden, Duration::from_secs(self.encoder_timeout_secs)))
            }
        };
        Ok(Encoder::new(backend))
    }

    /// File of persisted remote embeddings under the cache directory, keyed by
    /// endpoint and dimension. Other backends are not persisted.
    pub fn embedding_cache_path(&self) -> Option<PathBuf> {
        match (&self.encoder, &self.encoder_url) {
            (EncoderKind::Remote, Some(url)) => {
                let key = Sha256::digest(format!("{url}\n{}", self.dims.hidden).as_bytes());
                let hex: String = key.iter().take(8).map(|b| format!("{b:02x}")).collect();
                Some(self.cache.join(format!("embeddings-{hex}.jsonl")))
            }
            _ => None,
        }
    }

    /// Loads a toy encoder checkpoint as a frozen encoder.
    pub fn toy_encoder<S: Scalar>(path: impl AsRef<Path>) -> Result<Encoder<S>> {
        let mut enc = Encoder::new(Backend::Toy(ToyEncoder::load(path)?));
        enc.freeze();
        Ok(enc)
    }
}
