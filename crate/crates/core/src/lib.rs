//! Simulator for classical analog computers.
//!
//! A machine is described in a line-oriented patch language ([`netlist`]),
//! checked into a dataflow graph, and integrated with fixed-step Euler or
//! RK4 ([`engine`]). Component semantics, including the discontinuous
//! elements (limiters, function generators, step generators, converters),
//! live in [`blocks`]. [`repclass`] decides whether a representation
//! scheme is analog and evaluates place-value numerals exactly.

pub mod blocks;
pub mod engine;
pub mod netlist;
pub mod repclass;
pub mod signal;

pub use engine::{run, RunError, SimResult};
pub use netlist::{format, parse, validate, CircuitGraph, NetlistDoc, NetlistError};
