//! The patch language.
//!
//! One declaration per line:
//!
//! ```text
//! block <kind> <name> [key=value ...] [in=<net>[,<net>...]] out=<net>
//! probe <net>
//! sim dt=<real> t=<real> method=<euler|rk4> [limit=<real>]
//! ```
//!
//! `#` starts a comment. Parameter values are reals or comma-separated
//! lists of reals; a one-element list is written with a trailing comma
//! (`levels=3,`).

mod format;
mod parse;
mod validate;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::blocks::{Arity, KindTag};

pub use format::format;
pub use parse::parse;
pub use validate::{validate, Block, BlockId, CircuitGraph, NetId};

/// Upper bound on `t_end / dt` for one run.
pub const MAX_STEPS: f64 = 1e8;

#[derive(Debug, Clone, PartialEq)]
pub enum ParamValue {
    Real(f64),
    List(Vec<f64>),
}

impl ParamValue {
    /// Values as a slice; a lone real reads as a one-element list.
    pub fn as_slice(&self) -> &[f64] {
        match self {
            ParamValue::Real(v) => std::slice::from_ref(v),
            ParamValue::List(vs) => vs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Euler,
    Rk4,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Euler => "euler",
            Method::Rk4 => "rk4",
        }
    }

    /// Global order of accuracy on smooth problems.
    pub fn order(self) -> u32 {
        match self {
            Method::Euler => 1,
            Method::Rk4 => 4,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "euler" => Ok(Method::Euler),
            "rk4" => Ok(Method::Rk4),
            other => Err(format!("unknown method `{other}` (expected euler or rk4)")),
        }
    }
}

/// One component instance.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDecl {
    pub name: String,
    pub kind: KindTag,
    pub params: BTreeMap<String, ParamValue>,
    pub inputs: Vec<String>,
    pub output: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeDecl {
    pub net: String,
    pub line: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimDirective {
    pub dt: f64,
    pub t_end: f64,
    pub method: Method,
    pub limit: f64,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetlistDoc {
    pub blocks: Vec<BlockDecl>,
    pub probes: Vec<ProbeDecl>,
    pub sim: SimDirective,
}

impl NetlistDoc {
    /// Equality ignoring source line numbers.
    pub fn structurally_eq(&self, other: &NetlistDoc) -> bool {
        let block_eq = |a: &BlockDecl, b: &BlockDecl| {
            a.name == b.name
                && a.kind == b.kind
                && a.params == b.params
                && a.inputs == b.inputs
                && a.output == b.output
        };
        self.blocks.len() == other.blocks.len()
            && self.blocks.iter().zip(&other.blocks).all(|(a, b)| block_eq(a, b))
            && self.probes.len() == other.probes.len()
            && self
                .probes
                .iter()
                .zip(&other.probes)
                .all(|(a, b)| a.net == b.net)
            && self.sim.dt == other.sim.dt
            && self.sim.t_end == other.sim.t_end
            && self.sim.method == other.sim.method
            && self.sim.limit == other.sim.limit
    }

    pub fn block(&self, name: &str) -> Option<&BlockDecl> {
        self.blocks.iter().find(|b| b.name == name)
    }

    pub fn block_mut(&mut self, name: &str) -> Option<&mut BlockDecl> {
        self.blocks.iter_mut().find(|b| b.name == name)
    }

    pub fn probe_names(&self) -> impl Iterator<Item = &str> {
        self.probes.iter().map(|p| p.net.as_str())
    }
}

impl FromStr for NetlistDoc {
    type Err = NetlistError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

/// Parse and validation failures. Every variant carries a 1-based line.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetlistError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}, column {column}: unknown block kind `{kind}`")]
    UnknownKind {
        line: usize,
        column: usize,
        kind: String,
    },
    #[error("line {line}: block `{name}` already declared on line {first_line}")]
    DuplicateBlock {
        name: String,
        first_line: usize,
        line: usize,
    },
    #[error("line {line}: net `{net}` probed twice (first on line {first_line})")]
    DuplicateProbe {
        net: String,
        first_line: usize,
        line: usize,
    },
    #[error("line {line}: second sim directive (first on line {first_line})")]
    DuplicateSim { first_line: usize, line: usize },
    #[error("line {line}: missing sim directive")]
    MissingSim { line: usize },
    #[error("line {line}: block `{block}` ({kind}) takes {expected} inputs, got {got}")]
    Arity {
        line: usize,
        block: String,
        kind: KindTag,
        expected: Arity,
        got: usize,
    },
    #[error("line {line}: block `{block}`: {message}")]
    Param {
        line: usize,
        block: String,
        message: String,
    },
    #[error("line {line}: net `{net}` is not driven by any block")]
    Undriven { line: usize, net: String },
    #[error("line {line}: net `{net}` is already driven by `{first_driver}`")]
    MultiplyDriven {
        line: usize,
        net: String,
        first_driver: String,
    },
    #[error("line {line}: algebraic loop through {}", .blocks.join(" -> "))]
    AlgebraicLoop { line: usize, blocks: Vec<String> },
}

impl NetlistError {
    pub fn line(&self) -> usize {
        match self {
            NetlistError::Syntax { line, .. }
            | NetlistError::UnknownKind { line, .. }
            | NetlistError::DuplicateBlock { line, .. }
            | NetlistError::DuplicateProbe { line, .. }
            | NetlistError::DuplicateSim { line, .. }
            | NetlistError::MissingSim { line }
            | NetlistError::Arity { line, .. }
            | NetlistError::Param { line, .. }
            | NetlistError::Undriven { line, .. }
            | NetlistError::MultiplyDriven { line, .. }
            | NetlistError::AlgebraicLoop { line, .. } => *line,
        }
    }
}

/// The spring-mass setup: `-x'' = 3x' + 16x - y` with `y = -80`,
/// `x(0) = 2`, `x'(0) = -0.64`.
pub const SPRING_MASS: &str = "\
# -x'' = 3x' + 16x - y ; y = -80 ; x(0)=2 ; x'(0)=-0.64
block const  Y   val=-80            out=Y
block pot    P16 gain=16 in=X       out=KX
block pot    P3  gain=3  in=XDOT    out=BXDOT
block adder  S1  in=KX,BXDOT,NEGY   out=NEGXDD
block inv    N1  in=Y               out=NEGY
block inv    N2  in=NEGXDD          out=XDD
block int    I1  ic=-0.64 in=XDD    out=XDOT
block int    I2  ic=2     in=XDOT   out=X
probe X
probe XDOT
sim dt=0.001 t=10 method=rk4 limit=100
";

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}
