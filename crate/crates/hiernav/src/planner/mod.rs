//! Hierarchical planning: global vertex sequences over the topometric graph
//! and ego-centric local waypoint generation.

pub mod global;
pub mod local;
