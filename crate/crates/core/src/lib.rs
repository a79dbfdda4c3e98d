//! clonelab-core: computing with operations and relations over small finite
//! domains.
//!
//! The crate provides finite operation tables with minors and composition
//! (`ops`), relations and the Pol/Inv machinery with essential/critical
//! relation analysis (`rel`), minor conditions with exhaustive satisfaction
//! checking and witness search (`conditions`), explicit operation-building
//! pipelines with term-tree audit trails (`constructions`), and
//! homomorphisms, cores, pp-powers and free-structure gadgets (`ppcon`).

pub mod catalog;
pub mod conditions;
pub mod constructions;
pub mod error;
pub mod ops;
pub mod ppcon;
pub mod rel;

pub use error::{Error, Result};
pub use ops::{Element, Operation, Symmetry, VarMap};
pub use rel::{Relation, Structure};
