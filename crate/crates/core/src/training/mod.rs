//! Contrastive encoder pre-training, KL fine-tuning and parameter transfer.

mod config;
mod contrastive;
mod finetune;
mod kl;
mod optim;

pub use config::TrainConfig;
pub use contrastive::{
    contrastive_loss, pretrain_qrm, relevant_relations, sample_item, ContrastiveItem, PretrainReport, QrPair,
    RelevantRelations,
};
pub use finetune::{
    example_loss, finetune, finetune_reasoning, finetune_retrieval, hits_at_1, reasoning_example, retrieval_example,
    transfer_params, EpochRecord, EvalFn, Example, FinetuneOutcome, Phase,
};
pub use kl::{kl_divergence, kl_loss, KlDirection, REVERSE_SMOOTHING};
pub use optim::AdamW;

use sha2::{Digest, Sha256};

use crate::scalar::Scalar;

/// Hex SHA-256 over the little-endian f64 image of every value, block by block.
pub fn checksum<'a, S: Scalar>(blocks: impl IntoIterator<Item = &'a [S]>) -> String {
    let mut hasher = Sha256::new();
    for block in blocks {
        hasher.update((block.len() as u64).to_le_bytes());
        for v in block {
            hasher.update(v.as_f64().to_le_bytes());
        }
    }
    format!("{:x}", hasher.finalize())
}
