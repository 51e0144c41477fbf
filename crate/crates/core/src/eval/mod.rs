//! Evaluation metrics and the synthetic benchmark generator.

mod metrics;
mod synth;

pub use metrics::{
    choose_threshold, coverage_rate, f1, hits_at_1, predicted_set, EvalReport, Graded, Hit, QuestionRecord, THRESHOLD_GRID,
};
pub use synth::{question_text, question_word, relation_label, synth_dataset, SynthConfig, SynthDataset};
