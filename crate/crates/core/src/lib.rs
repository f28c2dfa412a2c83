//! Functional object-oriented networks (FOON) for robot task planning.
//!
//! The crate covers the whole planning pipeline: reading and merging
//! knowledge subgraphs ([`format`], [`merge`]), grounding a perceived scene
//! into a kitchen ([`grounding`]), retrieving task trees ([`retrieval`]),
//! decomposing each functional unit into motion primitives ([`planfoon`]),
//! binding primitives to learned movement skills ([`dmp`]) and estimating
//! plan success by simulation ([`simulator`]). [`pipeline`] runs all of it
//! from one configuration file.

pub mod dmp;
pub mod format;
pub mod grounding;
pub mod merge;
pub mod model;
pub mod pipeline;
pub mod planfoon;
pub mod retrieval;
pub mod simulator;

pub use model::{object_index, unit_equals, validate, FoonGraph, FunctionalUnit, Kitchen, Label, MotionNode, ObjectNode, StateDescriptor};
