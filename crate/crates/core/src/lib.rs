//! Rationale-supervised toxic speech classification.
//!
//! * [`corpus`]: dataset schema, loading, majority-vote resolution
//! * [`rationale`]: annotator rationales → ground-truth attention
//! * [`masking`]: target-community term masking
//! * [`model`]: attention classifier trained on `L_pred + λ·L_att`
//! * [`metrics`]: performance, unintended-bias and explainability metrics
//! * [`experiment`]: end-to-end runs, λ sweeps and report emission

pub mod analysis;
pub mod corpus;
pub mod error;
pub mod experiment;
pub mod io;
pub mod masking;
pub mod metrics;
pub mod model;
pub mod rationale;
pub mod report;
pub mod synthetic;

pub use analysis::{error_analysis, ErrorAnalysis};
pub use corpus::{load_corpus, AnnotatorRecord, Corpus, Label, LoadSummary, Post, ResolvedPost, Split};
pub use error::{Error, Result};
pub use experiment::{run_experiment, sweep, ExperimentConfig};
pub use masking::{mask_corpus, mask_post, ApplyTo, CommunityLexicon, MaskConfig};
pub use metrics::{evaluate, EvalReport};
pub use model::{
    batch_loss, gradients, loss, train, train_with_history, Checkpoint, LossBreakdown, ModelParams, Prediction,
    TrainConfig, TrainingExample,
};
pub use rationale::{
    combine_rationales, ground_truth_attention, softmax_normalize, AttentionStrategy, AttentionTarget,
    NormalAttention,
};
