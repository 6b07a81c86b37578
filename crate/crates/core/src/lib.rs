//! Semantic linkage of software components.
//!
//! Components are described by an annotated program-structure tree (see
//! [`aslt`]), expose provided and required ports derived from that tree
//! ([`nmc`]), and are matched pairwise by the linkage manager ([`linkage`]).
//! When a pair does not cooperate at its current revisions the version
//! manager ([`rollback`]) searches older revisions for a minimal alignment.
//! Proof results are persisted in a cross-reference [`catalogue`], and whole
//! applications can be verified and hot-swapped through [`app`].

pub mod app;
pub mod aslt;
pub mod catalogue;
pub mod cli;
pub mod linkage;
pub mod nmc;
pub mod rollback;
mod xml;

pub use aslt::{Aslt, MaskedView, MetaEntry, NodeId, NodeKind, TypingContext};
pub use nmc::{ComponentView, Direction, Nmc, Port, Revision, Signature};
pub use linkage::{analyse, bind, check_pair, AnalysisResult, Binding, LinkRequest, LinkageError, MatchReport, MismatchReason};
pub use rollback::{alignment_plan, classify, rollback_search, AlignmentCandidate, Side, Verdict};
pub use app::{Application, ExchangeResult, Link, Member};
pub use catalogue::{Catalogue, CatalogueEntry, ProofVerdict};
