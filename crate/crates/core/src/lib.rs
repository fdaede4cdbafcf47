//! Truncated involutive cubical ω-categories: free term algebras, congruence
//! closure, strict finite models and free contractions.

pub mod congruence;
pub mod contraction;
pub mod models;
pub mod presentation;
pub mod report;
pub mod strict;
pub mod suite;
pub mod term;

use thiserror::Error;

pub use presentation::{
    Cell, CellId, Direction, DirectionSet, Presentation, PresentationError, SetMorphism, Side,
    TruncationConfig,
};
pub use report::{Report, Violation};
pub use term::{Mode, Node, TermError, TermExpr, TermId, TermStore, TermUniverse};

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Presentation(#[from] PresentationError),
    #[error(transparent)]
    Term(#[from] TermError),
    #[error(transparent)]
    Strict(#[from] strict::StrictError),
    #[error(transparent)]
    Congruence(#[from] congruence::CongruenceError),
    #[error(transparent)]
    Model(#[from] models::ModelError),
    #[error(transparent)]
    Contraction(#[from] contraction::ContractionError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
