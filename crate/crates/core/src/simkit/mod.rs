//! Synthetic multi-rater phantoms and surrogate ensemble members.
//!
//! Surrogates stand in for trained networks. Member disagreement has two
//! sources: seed noise, shared by both ensemble constructions, and an
//! exposure gap that only hits cross-validation members whose training fold
//! never contained a case's concept variant.

mod experiment;
mod phantom;
mod surrogate;

pub use experiment::{
    build_ensembles, run_experiment, run_on_dataset, training_items, ExperimentConfig,
    ExperimentOutcome, SurrogateEnsembles,
};
pub use phantom::{
    make_phantom_dataset, ConceptRegion, PhantomCase, PhantomDataset, PhantomSpec,
};
pub use surrogate::{surrogate_predict, SurrogateMember};
