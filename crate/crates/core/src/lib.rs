//! Topic classification of scientific abstracts with interchangeable
//! document-embedding backends and local surrogate explanations.
//!
//! The crate is organised the way the pipeline runs:
//!
//! * [`corpus`] ingests annotated abstracts, keeps the consensus-labelled
//!   subset, tokenizes, detects bigram phrases and builds the vocabulary.
//! * [`lda`], [`word2vec`] and [`ctxembed`] turn token sequences into
//!   fixed-length document vectors ([`EmbeddingMatrix`]).
//! * [`forest`] trains and evaluates a random forest on those vectors.
//! * [`lime`] explains single predictions of any token-level black box.
//!
//! The guide under `book/` walks through each stage with runnable snippets;
//! every snippet is compiled and run as a doctest of this crate.

pub mod container;
pub mod corpus;
pub mod ctxembed;
pub mod embedding;
pub mod fingerprint;
pub mod forest;
pub mod lda;
pub mod lime;
pub mod rng;
pub mod word2vec;

pub use corpus::{Corpus, Document, TopicLabel};
pub use embedding::{Backend, EmbeddingMatrix};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/corpus.md")]
    mod corpus {}
    #[doc = include_str!("../../../book/src/lda.md")]
    mod lda {}
    #[doc = include_str!("../../../book/src/word2vec.md")]
    mod word2vec {}
    #[doc = include_str!("../../../book/src/contextual.md")]
    mod contextual {}
    #[doc = include_str!("../../../book/src/forest.md")]
    mod forest {}
    #[doc = include_str!("../../../book/src/lime.md")]
    mod lime {}
}
