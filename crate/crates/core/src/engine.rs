//! Fixed-step simulation of a patched machine.
//!
//! Integrator outputs are the state vector. Every derivative evaluation
//! writes the states onto their nets, then runs the memoryless blocks in
//! topological order; each integrator's derivative is whatever sits on its
//! input net afterwards.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::blocks::{BlockError, BlockKind};
use crate::netlist::{self, BlockId, CircuitGraph, Method, NetId, NetlistDoc, NetlistError};
use crate::signal::{
    check_overload, trace_sample, MachineLimits, Overload, SignalError, TimeGrid, Trace,
};

/// A value beyond `DIVERGENCE_FACTOR * limit` means the run has blown up,
/// not merely overloaded.
pub const DIVERGENCE_FACTOR: f64 = 1e4;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Netlist(#[from] NetlistError),
    #[error("run diverged at t={time}: block `{block}` produced {value}")]
    Diverged {
        block: String,
        time: f64,
        value: f64,
    },
    #[error("block `{block}` failed at t={time}: {source}")]
    Block {
        block: String,
        time: f64,
        source: BlockError,
    },
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error("{0}")]
    Contract(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateSlot {
    pub block: BlockId,
    pub ic: f64,
    /// Net whose value is this state's derivative.
    pub input: NetId,
    /// Net carrying the state itself.
    pub output: NetId,
}

/// Execution plan for a validated graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub states: Vec<StateSlot>,
    pub static_order: Vec<BlockId>,
}

pub fn compile(graph: &CircuitGraph) -> Schedule {
    let states = graph
        .integrators()
        .map(|id| {
            let block = graph.block(id);
            let ic = match block.kind {
                BlockKind::Int { ic } => ic,
                _ => unreachable!("integrators() yields only integrators"),
            };
            StateSlot {
                block: id,
                ic,
                input: block.inputs[0],
                output: block.output,
            }
        })
        .collect();
    Schedule {
        states,
        static_order: graph.static_order().to_vec(),
    }
}

/// Net overload attributed to a probe.
#[derive(Debug, Clone, PartialEq)]
pub struct NetOverload {
    pub net: String,
    pub overload: Overload,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    traces: BTreeMap<String, Trace>,
    probe_order: Vec<String>,
    overloads: Vec<NetOverload>,
    method: Method,
    grid: TimeGrid,
}

impl SimResult {
    pub fn trace(&self, net: &str) -> Option<&Trace> {
        self.traces.get(net)
    }

    /// Probed traces in declaration order.
    pub fn traces(&self) -> impl Iterator<Item = &Trace> {
        self.probe_order.iter().map(|n| &self.traces[n])
    }

    pub fn overloads(&self) -> &[NetOverload] {
        &self.overloads
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn steps(&self) -> usize {
        self.grid.n_steps()
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }
}

/// Run settings; usually taken from the netlist's sim directive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub method: Method,
    pub dt: f64,
    pub t_end: f64,
    pub limit: f64,
}

impl RunConfig {
    pub fn from_graph(graph: &CircuitGraph) -> Self {
        let sim = graph.sim();
        Self {
            method: sim.method,
            dt: sim.dt,
            t_end: sim.t_end,
            limit: sim.limit,
        }
    }

    /// Grid ending exactly at `t_end`, with a step no larger than `dt`.
    pub fn grid(&self) -> Result<TimeGrid, SignalError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SignalError::BadStep(self.dt));
        }
        let n = (self.t_end / self.dt - 1e-9).ceil().max(1.0) as usize;
        TimeGrid::new(0.0, self.t_end / n as f64, n)
    }
}

struct Machine<'g> {
    graph: &'g CircuitGraph,
    schedule: Schedule,
    nets: Vec<f64>,
    inputs: Vec<f64>,
    bound: f64,
}

impl<'g> Machine<'g> {
    fn new(graph: &'g CircuitGraph, bound: f64) -> Self {
        Self {
            graph,
            schedule: compile(graph),
            nets: vec![0.0; graph.nets().len()],
            inputs: Vec::new(),
            bound,
        }
    }

    fn check(&self, block: BlockId, time: f64, value: f64) -> Result<(), RunError> {
        if value.is_finite() && value.abs() <= self.bound {
            Ok(())
        } else {
            Err(RunError::Diverged {
                block: self.graph.block(block).name.clone(),
                time,
                value,
            })
        }
    }

    /// Drives every net for state `states` at time `t`.
    fn settle(&mut self, t: f64, states: &[f64]) -> Result<(), RunError> {
        for (slot, &s) in self.schedule.states.iter().zip(states) {
            self.check(slot.block, t, s)?;
            self.nets[slot.output] = s;
        }
        for &id in &self.schedule.static_order {
            let block = self.graph.block(id);
            self.inputs.clear();
            self.inputs.extend(block.inputs.iter().map(|&n| self.nets[n]));
            let value = block
                .kind
                .eval(&self.inputs, t)
                .map_err(|source| RunError::Block {
                    block: block.name.clone(),
                    time: t,
                    source,
                })?;
            self.check(id, t, value)?;
            self.nets[block.output] = value;
        }
        Ok(())
    }

    fn derivatives(&self, out: &mut [f64]) {
        for (d, slot) in out.iter_mut().zip(&self.schedule.states) {
            *d = self.nets[slot.input];
        }
    }
}

fn axpy(out: &mut [f64], base: &[f64], scale: f64, dir: &[f64]) {
    for ((o, b), d) in out.iter_mut().zip(base).zip(dir) {
        *o = b + scale * d;
    }
}

/// Integrates a validated graph with explicit settings.
pub fn run_graph(graph: &CircuitGraph, config: RunConfig) -> Result<SimResult, RunError> {
    let limits = MachineLimits::new(config.limit)?;
    let grid = config.grid()?;
    let dt = grid.dt();
    let mut machine = Machine::new(graph, DIVERGENCE_FACTOR * limits.max_abs());
    let n_states = machine.schedule.states.len();
    let mut state: Vec<f64> = machine.schedule.states.iter().map(|s| s.ic).collect();
    let probes = graph.probes();
    let mut recorded: Vec<Vec<f64>> = vec![Vec::with_capacity(grid.len()); probes.len()];

    let (mut k1, mut k2, mut k3, mut k4) = (
        vec![0.0; n_states],
        vec![0.0; n_states],
        vec![0.0; n_states],
        vec![0.0; n_states],
    );
    let mut stage = vec![0.0; n_states];

    for k in 0..=grid.n_steps() {
        let t = grid.time(k);
        machine.settle(t, &state)?;
        for (rec, &net) in recorded.iter_mut().zip(probes) {
            rec.push(machine.nets[net]);
        }
        if k == grid.n_steps() {
            break;
        }
        machine.derivatives(&mut k1);
        match config.method {
            Method::Euler => {
                for (s, d) in state.iter_mut().zip(&k1) {
                    *s += dt * d;
                }
            }
            Method::Rk4 => {
                let half = 0.5 * dt;
                axpy(&mut stage, &state, half, &k1);
                machine.settle(t + half, &stage)?;
                machine.derivatives(&mut k2);
                axpy(&mut stage, &state, half, &k2);
                machine.settle(t + half, &stage)?;
                machine.derivatives(&mut k3);
                axpy(&mut stage, &state, dt, &k3);
                machine.settle(t + dt, &stage)?;
                machine.derivatives(&mut k4);
                for i in 0..n_states {
                    state[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
        }
    }

    let mut traces = BTreeMap::new();
    let mut probe_order = Vec::new();
    let mut overloads = Vec::new();
    for (&net, values) in probes.iter().zip(recorded) {
        let name = graph.net_name(net).to_string();
        let trace = Trace::new(name.clone(), grid, values)?;
        overloads.extend(
            check_overload(&trace, limits)
                .into_iter()
                .map(|overload| NetOverload {
                    net: name.clone(),
                    overload,
                }),
        );
        probe_order.push(name.clone());
        traces.insert(name, trace);
    }
    Ok(SimResult {
        traces,
        probe_order,
        overloads,
        method: config.method,
        grid,
    })
}

/// Validates and runs a document with its own sim directive.
pub fn run(doc: &NetlistDoc) -> Result<SimResult, RunError> {
    let graph = netlist::validate(doc)?;
    run_graph(&graph, RunConfig::from_graph(&graph))
}

/// One term of a residual expression: `coeff * (d/dt)^derivative net`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualTerm {
    pub net: String,
    /// 0, 1 or 2; derivatives use central differences.
    pub derivative: u8,
    pub coeff: f64,
}

/// `|sum of terms + constant|`, evaluated on interior grid points.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSpec {
    pub terms: Vec<ResidualTerm>,
    pub constant: f64,
}

impl ResidualSpec {
    /// `x'' + 3x' + 16x - y`, with x'' differenced from the XDOT probe.
    pub fn spring_mass(y: f64) -> Self {
        let term = |net: &str, derivative, coeff| ResidualTerm {
            net: net.into(),
            derivative,
            coeff,
        };
        Self {
            terms: vec![
                term("XDOT", 1, 1.0),
                term("XDOT", 0, 3.0),
                term("X", 0, 16.0),
            ],
            constant: -y,
        }
    }
}

pub fn residual(result: &SimResult, spec: &ResidualSpec) -> Result<Trace, RunError> {
    let grid = *result.grid();
    if grid.n_steps() < 3 {
        return Err(RunError::Contract(
            "residual needs at least 4 samples".into(),
        ));
    }
    let n = grid.n_steps();
    let h = grid.dt();
    let mut values = vec![spec.constant; n - 1];
    for term in &spec.terms {
        let tr = result.trace(&term.net).ok_or_else(|| {
            RunError::Contract(format!("residual needs a probe on `{}`", term.net))
        })?;
        let v = tr.values();
        for (k, out) in (1..n).zip(values.iter_mut()) {
            let d = match term.derivative {
                0 => v[k],
                1 => (v[k + 1] - v[k - 1]) / (2.0 * h),
                2 => (v[k + 1] - 2.0 * v[k] + v[k - 1]) / (h * h),
                other => {
                    return Err(RunError::Contract(format!(
                        "derivative order {other} is not supported"
                    )))
                }
            };
            *out += term.coeff * d;
        }
    }
    for v in &mut values {
        *v = v.abs();
    }
    Ok(Trace::new(
        "residual",
        TimeGrid::new(grid.time(1), h, n - 2)?,
        values,
    )?)
}

/// Residual of the spring-mass fixture, reading `y` from its `Y` block.
pub fn spring_mass_residual(result: &SimResult, doc: &NetlistDoc) -> Result<Trace, RunError> {
    let y = doc
        .block("Y")
        .and_then(|b| b.params.get("val"))
        .and_then(|v| v.as_slice().first().copied())
        .ok_or_else(|| RunError::Contract("document has no `Y` const block".into()))?;
    residual(result, &ResidualSpec::spring_mass(y))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderEstimate {
    /// Least-squares slope of log(error) against log(dt); `None` when the
    /// errors are all at round-off level.
    pub slope: Option<f64>,
    /// `(dt, error)` for each requested step.
    pub errors: Vec<(f64, f64)>,
    pub warnings: Vec<String>,
}

fn fit_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
    let (mx, my) = (sx / n, sy / n);
    let (num, den) = points.iter().fold((0.0, 0.0), |(num, den), &(x, y)| {
        (num + (x - mx) * (y - my), den + (x - mx) * (x - mx))
    });
    num / den
}

/// Measures the observed order of the document's method.
///
/// The reference solution is a Richardson extrapolation of two runs at
/// 1/8 and 1/16 of the finest requested step, using the method's nominal
/// order. The error of each run is the largest deviation from the
/// reference over every probe and every grid point of that run.
pub fn convergence_order(doc: &NetlistDoc, dts: &[f64]) -> Result<OrderEstimate, RunError> {
    if dts.len() < 3 {
        return Err(RunError::Contract(
            "convergence order needs at least 3 step sizes".into(),
        ));
    }
    let graph = netlist::validate(doc)?;
    let base = RunConfig::from_graph(&graph);
    let mut warnings = Vec::new();
    if graph.has_discontinuous_blocks() {
        warnings.push("circuit has discontinuous blocks; measured order may be meaningless".into());
    }
    if graph.probes().is_empty() {
        return Err(RunError::Contract("convergence order needs a probe".into()));
    }
    let with_dt = |dt| RunConfig { dt, ..base };
    let finest = dts.iter().copied().fold(f64::INFINITY, f64::min);
    let coarse_ref = run_graph(&graph, with_dt(finest / 8.0))?;
    let fine_ref = run_graph(&graph, with_dt(finest / 16.0))?;
    let gain = f64::from(2u32.pow(base.method.order())) - 1.0;
    let reference = |net: &str, t: f64| -> Result<f64, RunError> {
        let f = trace_sample(fine_ref.trace(net).unwrap(), t)?;
        let c = trace_sample(coarse_ref.trace(net).unwrap(), t)?;
        Ok(f + (f - c) / gain)
    };

    let mut errors = Vec::with_capacity(dts.len());
    let mut scale: f64 = 0.0;
    for &dt in dts {
        let result = run_graph(&graph, with_dt(dt))?;
        let mut worst: f64 = 0.0;
        for tr in result.traces() {
            for (t, v) in tr.iter() {
                let r = reference(tr.name(), t.min(base.t_end))?;
                worst = worst.max((v - r).abs());
                scale = scale.max(r.abs());
            }
        }
        errors.push((dt, worst));
    }

    let floor = 1e-12 * scale.max(1.0);
    let slope = if errors.iter().all(|&(_, e)| e > floor) {
        let logs: Vec<(f64, f64)> = errors.iter().map(|&(h, e)| (h.ln(), e.ln())).collect();
        Some(fit_slope(&logs))
    } else {
        warnings.push("errors are at round-off level; order not applicable".into());
        None
    };
    Ok(OrderEstimate {
        slope,
        errors,
        warnings,
    })
}

/// Integrator output deviations from the ideal ramp for a clean step and
/// for a step whose top keeps rising with slope `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Drift {
    pub exact: f64,
    pub approx: f64,
}

/// Number of steps used by [`drift_experiment`].
pub const DRIFT_STEPS: usize = 1000;

/// The netlist behind [`drift_experiment`]: a unit step at t=0 feeds one
/// integrator directly and another after picking up a residual slope.
pub fn drift_netlist(epsilon: f64, t_end: f64) -> String {
    let dt = t_end / DRIFT_STEPS as f64;
    let limit = 100f64.max(10.0 * t_end * (1.0 + epsilon * t_end));
    format!(
        "\
block stepgen STEP times=0, levels=1, out=S
block int     RAMP in=S out=R
block pot     SLOPE gain={epsilon} in=R out=ER
block adder   APPROX in=S,ER out=A
block int     IE in=S out=XE
block int     IA in=A out=XA
probe XE
probe XA
sim dt={dt} t={t_end} method=rk4 limit={limit}
"
    )
}

pub fn drift_experiment(epsilon: f64, t_end: f64) -> Result<Drift, RunError> {
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(RunError::Contract("epsilon must be non-negative".into()));
    }
    let doc = netlist::parse(&drift_netlist(epsilon, t_end))?;
    let result = run(&doc)?;
    let ideal = t_end;
    Ok(Drift {
        exact: result.trace("XE").unwrap().last() - ideal,
        approx: result.trace("XA").unwrap().last() - ideal,
    })
}
