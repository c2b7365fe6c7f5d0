//! Finite combinatorics of the Lelek fan.
//!
//! Finite rooted reflexive fans and their epimorphisms form a projective
//! Fraïssé family. This crate builds Fraïssé sequences of such fans, embeds
//! their approximations in the planar Cantor fan, factorizes level maps into
//! small steps and decides membership in the augmented family `F⁺`.

pub mod conjugacy;
pub mod fraisse;
pub mod geometry;
pub mod homeo;
pub mod morphisms;
pub mod sequence;
pub mod structures;

pub use conjugacy::{fplus_jpp, fplus_oracle, fplus_witness, in_fplus, s_connected, SRelation};
pub use geometry::{cells, cover_cantor, endpoint_gap, pair_survival, render, CellAssignment, CoverStructure};
pub use homeo::{adjacent, ensure_star, factorize, FactorChain};
pub use morphisms::{compose, enumerate_epis, FanMorphism, Morphism, MorphismError, Status};
pub use sequence::{build, build_with, envelope, Envelope, InverseSequence};
pub use structures::{validate, Branch, Classification, Fan, Spider, Structure, StructureDoc, Tree};
