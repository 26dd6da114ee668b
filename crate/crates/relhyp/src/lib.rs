//! relhyp: a desk-scale metric laboratory for relatively hyperbolic groups.
//!
//! The crate builds finite pieces of the spaces attached to a free product
//! with peripheral structure (Cayley balls, combinatorial horoballs, the
//! Bowditch space, coned-off graphs, projection complexes, quasi-trees of
//! spaces, tree products) and measures their coarse-geometric constants:
//! hyperbolicity proxies, projection axioms, distance-formula fits,
//! embedding distortion, cover multiplicities, and Bass-Serre separation
//! data for HNN extensions.

pub mod bowditch;
pub mod covers;
pub mod embed;
pub mod error;
pub mod graph;
pub mod groups;
pub mod hnn;
pub mod horoball;
pub mod projections;
pub mod quasitree;
pub mod report;
pub mod suites;
pub mod words;

pub use error::{RelhypError, Result};
