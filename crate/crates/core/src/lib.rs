//! Segmented knowledge-graph embeddings.
//!
//! Entities and relations are embedded in `d` dimensions split into `k`
//! segments. The scoring function `f4` combines relation, head and tail
//! segments in `k²` signed multi-linear terms: the even relation segments
//! score symmetric patterns and the odd ones antisymmetric patterns, at
//! `O(kd)` cost per triple. `k = 1` reduces to DistMult and `k = 2` to
//! ComplEx.
//!
//! The crate covers the whole pipeline: TSV loading ([`data`]), scoring and
//! exact gradients ([`scoring`]), negative-sampling AdaGrad training
//! ([`trainer`]), filtered ranking evaluation ([`eval`]), checkpoints
//! ([`checkpoint`]) and a segment-count timing harness ([`bench`]).

pub mod bench;
pub mod checkpoint;
pub mod data;
pub mod error;
pub mod eval;
pub mod scoring;
pub mod toy;
pub mod trainer;

pub use checkpoint::Checkpoint;
pub use data::{build_filter_index, load_triples, Dataset, FilterIndex, Split, Triple, TripleSet, Vocabulary};
pub use error::{Error, Result};
pub use eval::{case_study, evaluate, rank_triple, CaseStudyRow, LinkPredictionReport, RankingReport, Scorer, Side};
pub use scoring::{
    grad_f4, init_embeddings, probability, score_f1, score_f2, score_f3, score_f4, score_f4_vectors, sign_coeff,
    tail_index, EmbeddingTable, ModelConfig, ScoreFn, TripleGradient,
};
pub use trainer::{
    loss_term, sample_negatives, sgd_step, train, EpochStats, Label, LabeledTriple, OptimizerState, TrainConfig,
    TrainOutcome, Trainer,
};
