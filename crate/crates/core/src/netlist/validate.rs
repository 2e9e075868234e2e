use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};

use super::{BlockDecl, NetlistDoc, NetlistError, ParamValue, SimDirective};
use crate::blocks::{
    BlockKind, Breakpoints, Contact, FourierSquare, KindTag, Limiter, Quantizer, Sine,
    StepSchedule,
};

pub type BlockId = usize;
pub type NetId = usize;

/// A block with its parameters resolved and nets replaced by indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub name: String,
    pub kind: BlockKind,
    pub inputs: Vec<NetId>,
    pub output: NetId,
    pub line: usize,
}

/// Validated dataflow graph of a netlist.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitGraph {
    blocks: Vec<Block>,
    nets: Vec<String>,
    drivers: Vec<BlockId>,
    probes: Vec<NetId>,
    static_order: Vec<BlockId>,
    sim: SimDirective,
}

impl CircuitGraph {
    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block(&self, id: BlockId) -> &Block {
        &self.blocks[id]
    }

    pub fn nets(&self) -> &[String] {
        &self.nets
    }

    pub fn net_name(&self, id: NetId) -> &str {
        &self.nets[id]
    }

    pub fn net_id(&self, name: &str) -> Option<NetId> {
        self.nets.iter().position(|n| n == name)
    }

    /// Block driving each net.
    pub fn driver(&self, net: NetId) -> BlockId {
        self.drivers[net]
    }

    pub fn probes(&self) -> &[NetId] {
        &self.probes
    }

    /// Memoryless blocks in evaluation order, integrator outputs taken as given.
    pub fn static_order(&self) -> &[BlockId] {
        &self.static_order
    }

    pub fn integrators(&self) -> impl Iterator<Item = BlockId> + '_ {
        self.blocks
            .iter()
            .enumerate()
            .filter(|(_, b)| b.kind.tag().is_integrator())
            .map(|(id, _)| id)
    }

    pub fn sim(&self) -> &SimDirective {
        &self.sim
    }

    pub fn has_discontinuous_blocks(&self) -> bool {
        self.blocks.iter().any(|b| b.kind.tag().is_discontinuous())
    }
}

/// Pulls typed parameters out of a declaration and flags leftovers.
struct Params<'a> {
    decl: &'a BlockDecl,
    seen: BTreeSet<&'a str>,
}

impl<'a> Params<'a> {
    fn new(decl: &'a BlockDecl) -> Self {
        Self {
            decl,
            seen: BTreeSet::new(),
        }
    }

    fn err(&self, message: impl Into<String>) -> NetlistError {
        NetlistError::Param {
            line: self.decl.line,
            block: self.decl.name.clone(),
            message: message.into(),
        }
    }

    fn raw(&mut self, key: &'a str) -> Option<&'a ParamValue> {
        self.seen.insert(key);
        self.decl.params.get(key)
    }

    fn real_opt(&mut self, key: &'a str) -> Result<Option<f64>, NetlistError> {
        match self.raw(key) {
            None => Ok(None),
            Some(ParamValue::Real(v)) => Ok(Some(*v)),
            Some(ParamValue::List(_)) => Err(self.err(format!("`{key}` must be a single number"))),
        }
    }

    fn real(&mut self, key: &'a str) -> Result<f64, NetlistError> {
        self.real_opt(key)?
            .ok_or_else(|| self.err(format!("missing parameter `{key}`")))
    }

    fn real_or(&mut self, key: &'a str, default: f64) -> Result<f64, NetlistError> {
        Ok(self.real_opt(key)?.unwrap_or(default))
    }

    fn count(&mut self, key: &'a str) -> Result<u32, NetlistError> {
        let v = self.real(key)?;
        if v.fract() != 0.0 || !(0.0..=u32::MAX as f64).contains(&v) {
            return Err(self.err(format!("`{key}` must be a non-negative integer, got {v}")));
        }
        Ok(v as u32)
    }

    fn list(&mut self, key: &'a str) -> Result<&'a [f64], NetlistError> {
        self.raw(key)
            .map(ParamValue::as_slice)
            .ok_or_else(|| self.err(format!("missing parameter `{key}`")))
    }

    fn finish(self, kind: BlockKind) -> Result<BlockKind, NetlistError> {
        if let Some(extra) = self
            .decl
            .params
            .keys()
            .find(|k| !self.seen.contains(k.as_str()))
        {
            return Err(self.err(format!(
                "unknown parameter `{extra}` for {}",
                self.decl.kind
            )));
        }
        Ok(kind)
    }
}

fn resolve_kind(decl: &BlockDecl) -> Result<BlockKind, NetlistError> {
    let mut p = Params::new(decl);
    let block_err = |p: &Params<'_>, e: crate::blocks::BlockError| p.err(e.to_string());
    let kind = match decl.kind {
        KindTag::Const => BlockKind::Const {
            value: p.real("val")?,
        },
        KindTag::SineSrc => BlockKind::Sine(Sine {
            amp: p.real_or("amp", 1.0)?,
            omega: p.real_or("omega", 1.0)?,
            phase: p.real_or("phase", 0.0)?,
        }),
        KindTag::FourierSquareSrc => {
            let n_terms = p.count("n_terms")?;
            let period = p.real_or("period", 1.0)?;
            let amplitude = p.real_or("amplitude", 1.0)?;
            if n_terms == 0 {
                return Err(p.err("n_terms must be at least 1"));
            }
            if period <= 0.0 {
                return Err(p.err("period must be positive"));
            }
            BlockKind::FourierSquare(FourierSquare {
                n_terms,
                period,
                amplitude,
            })
        }
        KindTag::Adder => BlockKind::Adder,
        KindTag::Inv => BlockKind::Inv,
        KindTag::Pot => BlockKind::Pot {
            gain: p.real("gain")?,
        },
        KindTag::Int => BlockKind::Int {
            ic: p.real_or("ic", 0.0)?,
        },
        KindTag::LimZero => BlockKind::Limiter(Limiter::Zero {
            threshold: p.real_or("threshold", 0.0)?,
        }),
        KindTag::LimDead => {
            let half_width = p.real("half_width")?;
            if half_width < 0.0 {
                return Err(p.err("half_width must be non-negative"));
            }
            BlockKind::Limiter(Limiter::Dead { half_width })
        }
        KindTag::LimSat => {
            let level = p.real("level")?;
            if level <= 0.0 {
                return Err(p.err("level must be positive"));
            }
            BlockKind::Limiter(Limiter::Sat { level })
        }
        KindTag::LimBang => BlockKind::Limiter(Limiter::Bang {
            threshold: p.real_or("threshold", 0.0)?,
            level: p.real("level")?,
        }),
        KindTag::Afg => {
            let xs = p.list("xs")?;
            let ys = p.list("ys")?;
            if xs.len() != ys.len() {
                return Err(p.err("xs and ys must have the same length"));
            }
            let points = xs.iter().copied().zip(ys.iter().copied()).collect();
            BlockKind::Afg(Breakpoints::new(points).map_err(|e| block_err(&p, e))?)
        }
        KindTag::StepGen => {
            let times = p.list("times")?;
            let levels = p.list("levels")?;
            if times.len() != levels.len() {
                return Err(p.err("times and levels must have the same length"));
            }
            let overlap = p.real_or("overlap", 0.0)?;
            let contact = if overlap > 0.0 {
                Contact::MakeBeforeBreak { overlap }
            } else if overlap == 0.0 {
                Contact::BreakBeforeMake
            } else {
                return Err(p.err("overlap must be non-negative"));
            };
            let segments = times.iter().copied().zip(levels.iter().copied()).collect();
            BlockKind::StepGen(StepSchedule::new(segments, contact).map_err(|e| block_err(&p, e))?)
        }
        KindTag::Adc => {
            let n_bits = p.count("n_bits")?;
            let quantum = p.real_or("quantum", 1.0)?;
            let quantizer = Quantizer::new(n_bits, quantum).map_err(|e| block_err(&p, e))?;
            let bit = p.count("bit")?;
            if bit >= n_bits {
                return Err(p.err(format!("bit must be below n_bits ({n_bits})")));
            }
            BlockKind::Adc { quantizer, bit }
        }
        KindTag::Dac => {
            let n_bits = p.count("n_bits")?;
            let quantum = p.real_or("quantum", 1.0)?;
            BlockKind::Dac {
                quantizer: Quantizer::new(n_bits, quantum).map_err(|e| block_err(&p, e))?,
            }
        }
    };
    p.finish(kind)
}

/// Checks a parsed netlist and compiles it into a [`CircuitGraph`].
///
/// Feedback through an integrator is legal; any cycle made only of
/// memoryless blocks is an algebraic loop and is rejected.
pub fn validate(doc: &NetlistDoc) -> Result<CircuitGraph, NetlistError> {
    let mut kinds = Vec::with_capacity(doc.blocks.len());
    for decl in &doc.blocks {
        let kind = resolve_kind(decl)?;
        let arity = kind.arity();
        if !arity.admits(decl.inputs.len()) {
            return Err(NetlistError::Arity {
                line: decl.line,
                block: decl.name.clone(),
                kind: decl.kind,
                expected: arity,
                got: decl.inputs.len(),
            });
        }
        kinds.push(kind);
    }

    // Nets are numbered in the order their drivers are declared.
    let mut nets: Vec<String> = Vec::new();
    let mut net_ids: HashMap<&str, NetId> = HashMap::new();
    let mut drivers: Vec<BlockId> = Vec::new();
    for (id, decl) in doc.blocks.iter().enumerate() {
        if let Some(&net) = net_ids.get(decl.output.as_str()) {
            return Err(NetlistError::MultiplyDriven {
                line: decl.line,
                net: decl.output.clone(),
                first_driver: doc.blocks[drivers[net]].name.clone(),
            });
        }
        net_ids.insert(&decl.output, nets.len());
        nets.push(decl.output.clone());
        drivers.push(id);
    }

    let mut blocks = Vec::with_capacity(doc.blocks.len());
    for (decl, kind) in doc.blocks.iter().zip(kinds) {
        let inputs = decl
            .inputs
            .iter()
            .map(|net| {
                net_ids.get(net.as_str()).copied().ok_or_else(|| NetlistError::Undriven {
                    line: decl.line,
                    net: net.clone(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        blocks.push(Block {
            name: decl.name.clone(),
            kind,
            inputs,
            output: net_ids[decl.output.as_str()],
            line: decl.line,
        });
    }

    let probes = doc
        .probes
        .iter()
        .map(|p| {
            net_ids.get(p.net.as_str()).copied().ok_or_else(|| NetlistError::Undriven {
                line: p.line,
                net: p.net.clone(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let static_order = schedule_static(&blocks, &drivers)?;

    Ok(CircuitGraph {
        blocks,
        nets,
        drivers,
        probes,
        static_order,
        sim: doc.sim,
    })
}

/// Kahn's algorithm over memoryless blocks, always taking the lowest ready
/// block id so the order is deterministic.
fn schedule_static(blocks: &[Block], drivers: &[BlockId]) -> Result<Vec<BlockId>, NetlistError> {
    let is_static = |id: BlockId| !blocks[id].kind.tag().is_integrator();
    // Edges run driver -> reader; integrator outputs cut the dependency.
    let mut successors: BTreeMap<BlockId, Vec<BlockId>> = BTreeMap::new();
    let mut indegree = vec![0usize; blocks.len()];
    for (id, block) in blocks.iter().enumerate().filter(|(id, _)| is_static(*id)) {
        for &net in &block.inputs {
            let src = drivers[net];
            if is_static(src) {
                successors.entry(src).or_default().push(id);
                indegree[id] += 1;
            }
        }
    }

    let mut ready: BinaryHeap<Reverse<BlockId>> = (0..blocks.len())
        .filter(|&id| is_static(id) && indegree[id] == 0)
        .map(Reverse)
        .collect();
    let mut order = Vec::new();
    while let Some(Reverse(id)) = ready.pop() {
        order.push(id);
        for &next in successors.get(&id).into_iter().flatten() {
            indegree[next] -= 1;
            if indegree[next] == 0 {
                ready.push(Reverse(next));
            }
        }
    }

    let n_static = (0..blocks.len()).filter(|&id| is_static(id)).count();
    if order.len() == n_static {
        return Ok(order);
    }

    // Every leftover block has a leftover static predecessor, so walking
    // predecessors from any of them must revisit a block.
    let stuck = |id: BlockId| is_static(id) && indegree[id] > 0;
    let start = (0..blocks.len()).find(|&id| stuck(id)).expect("leftover block");
    let mut path = vec![start];
    let mut pos: HashMap<BlockId, usize> = HashMap::from([(start, 0)]);
    let cycle_start = loop {
        let cur = *path.last().unwrap();
        let pred = blocks[cur]
            .inputs
            .iter()
            .map(|&net| drivers[net])
            .find(|&src| stuck(src))
            .expect("stuck block has a stuck predecessor");
        if let Some(&at) = pos.get(&pred) {
            break at;
        }
        pos.insert(pred, path.len());
        path.push(pred);
    };
    // `path` follows predecessors; reverse it to read in signal direction.
    let mut cycle: Vec<BlockId> = path[cycle_start..].to_vec();
    cycle.reverse();
    let first = cycle
        .iter()
        .enumerate()
        .min_by_key(|(_, &id)| id)
        .map(|(i, _)| i)
        .unwrap();
    cycle.rotate_left(first);
    Err(NetlistError::AlgebraicLoop {
        line: blocks[cycle[0]].line,
        blocks: cycle.iter().map(|&id| blocks[id].name.clone()).collect(),
    })
}
