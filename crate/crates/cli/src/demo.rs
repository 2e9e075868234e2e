//! Canned demonstrations. Each writes `<name>.csv`, `<name>.svg` and
//! `<name>-report.txt` into the output directory and returns the report.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, Context, Result};
use patchsim_core::blocks::{adc, dac, disk_rotations, gibbs_peak, DiskIntegratorParams, LOGIC_HIGH};
use patchsim_core::engine::{drift_netlist, spring_mass_residual};
use patchsim_core::netlist::SPRING_MASS;
use patchsim_core::signal::{write_csv, Trace};
use patchsim_core::{parse, run, SimResult};

use crate::plot::{plot_svg, PlotSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Demo {
    SpringMass,
    Gibbs,
    Drift,
    SineIntegral,
    AdcRoundtrip,
}

impl Demo {
    pub const ALL: [Demo; 5] = [
        Demo::SpringMass,
        Demo::Gibbs,
        Demo::Drift,
        Demo::SineIntegral,
        Demo::AdcRoundtrip,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Demo::SpringMass => "springmass",
            Demo::Gibbs => "gibbs",
            Demo::Drift => "drift",
            Demo::SineIntegral => "sine-integral",
            Demo::AdcRoundtrip => "adc-roundtrip",
        }
    }
}

impl FromStr for Demo {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Demo::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Demo::ALL.iter().map(|d| d.name()).collect();
                format!("unknown demo `{s}` (expected one of: {})", names.join(", "))
            })
    }
}

// Spring-mass constants; the fixture netlist is built from these.
const MASS: f64 = 1.0;
const DAMPING: f64 = 3.0;
const STIFFNESS: f64 = 16.0;
const FORCE: f64 = -80.0;

const GIBBS_TERMS: u32 = 50;
const DRIFT_EPSILON: f64 = 0.01;
const DRIFT_T: f64 = 100.0;
const ADC_BITS: u32 = 4;

const GIBBS_NETLIST: &str = "\
block stepgen            SQ times=0,0.5 levels=1,-1 out=SQ
block fourier_square_src F  n_terms=50 period=1 amplitude=1 out=F
probe SQ
probe F
sim dt=0.0001 t=1 method=rk4 limit=10
";

const SINE_NETLIST: &str = "\
block sine_src S amp=1 omega=1 out=P
block int      I in=P out=X
probe P
probe X
sim dt=0.0001 t=3.141592653589793 method=rk4
";

const ADC_NETLIST: &str = "\
block const ONE val=1 out=ONE
block int   RAMP in=ONE out=V
block adc   B0 n_bits=4 bit=0 in=V out=D0
block adc   B1 n_bits=4 bit=1 in=V out=D1
block adc   B2 n_bits=4 bit=2 in=V out=D2
block adc   B3 n_bits=4 bit=3 in=V out=D3
block dac   DA n_bits=4 in=D0,D1,D2,D3 out=VQ
probe V
probe VQ
sim dt=0.01 t=15.4 method=rk4
";

fn simulate(src: &str) -> Result<SimResult> {
    Ok(run(&parse(src)?)?)
}

fn save(result: &SimResult, nets: &[&str], dir: &Path, name: &str) -> Result<()> {
    let path = dir.join(format!("{name}.csv"));
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    let traces: Vec<&Trace> = result.traces().collect();
    write_csv(BufWriter::new(file), &traces)?;
    plot_svg(result, &PlotSpec::for_nets(nets), &dir.join(format!("{name}.svg")))
}

fn bits(digits: &[f64]) -> String {
    digits
        .iter()
        .map(|&v| if v == LOGIC_HIGH { '1' } else { '0' })
        .collect()
}

fn springmass(dir: &Path) -> Result<String> {
    let doc = parse(SPRING_MASS)?;
    let result = run(&doc)?;
    save(&result, &["X", "XDOT"], dir, "springmass")?;
    let x = result.trace("X").unwrap();
    let residual = spring_mass_residual(&result, &doc)?;
    let worst = residual.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut r = String::new();
    writeln!(r, "M = {MASS}, B = {DAMPING}, K = {STIFFNESS}, y = {FORCE}")?;
    writeln!(r, "x(0) = {:.3}", x.first())?;
    writeln!(r, "x({}) = {:.3}", x.grid().t_end(), x.last())?;
    writeln!(r, "steady state y/K = {:.3}", FORCE / STIFFNESS)?;
    writeln!(r, "max equation residual = {worst:.2e}")?;
    Ok(r)
}

fn gibbs(dir: &Path) -> Result<String> {
    let result = simulate(GIBBS_NETLIST)?;
    save(&result, &["SQ", "F"], dir, "gibbs")?;
    let sampled = result
        .trace("F")
        .unwrap()
        .values()
        .iter()
        .fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let mut r = String::new();
    writeln!(r, "n_terms = {GIBBS_TERMS}, amplitude = 1")?;
    writeln!(r, "overshoot = {:.4}", gibbs_peak(GIBBS_TERMS))?;
    writeln!(r, "sampled peak = {sampled:.4}")?;
    Ok(r)
}

fn drift(dir: &Path) -> Result<String> {
    let result = simulate(&drift_netlist(DRIFT_EPSILON, DRIFT_T))?;
    save(&result, &["XE", "XA"], dir, "drift")?;
    let exact = result.trace("XE").unwrap().last() - DRIFT_T;
    let approx = result.trace("XA").unwrap().last() - DRIFT_T;
    let mut r = String::new();
    writeln!(r, "epsilon = {DRIFT_EPSILON}, T = {DRIFT_T}")?;
    writeln!(r, "drift exact = {exact:.3e}")?;
    writeln!(r, "drift approx = {approx:.3}")?;
    Ok(r)
}

fn sine_integral(dir: &Path) -> Result<String> {
    let result = simulate(SINE_NETLIST)?;
    save(&result, &["P", "X"], dir, "sine-integral")?;
    let p = result.trace("P").unwrap();
    let disk = disk_rotations(p, DiskIntegratorParams::new(1.0, 1.0)?);
    let mut r = String::new();
    writeln!(r, "integral = {:.3}", result.trace("X").unwrap().last())?;
    writeln!(r, "disk rotations = {disk:.3}")?;
    Ok(r)
}

fn adc_roundtrip(dir: &Path) -> Result<String> {
    let result = simulate(ADC_NETLIST)?;
    save(&result, &["V", "VQ"], dir, "adc-roundtrip")?;
    let mut r = String::new();
    for code in 0..(1u32 << ADC_BITS) {
        let v = f64::from(code);
        let digits = adc(v, ADC_BITS, 1.0)?;
        let back = dac(&digits, 1.0)?;
        writeln!(r, "{v} → {} → {back}", bits(&digits))?;
    }
    Ok(r)
}

pub fn run_demo(demo: Demo, dir: &Path) -> Result<String> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let report = match demo {
        Demo::SpringMass => springmass(dir),
        Demo::Gibbs => gibbs(dir),
        Demo::Drift => drift(dir),
        Demo::SineIntegral => sine_integral(dir),
        Demo::AdcRoundtrip => adc_roundtrip(dir),
    }
    .map_err(|e| anyhow!("demo {}: {e:#}", demo.name()))?;
    let path = dir.join(format!("{}-report.txt", demo.name()));
    fs::write(&path, &report).with_context(|| format!("writing {}", path.display()))?;
    Ok(report)
}
