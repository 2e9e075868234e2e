//! Semantics of every component kind.
//!
//! Blocks are ideal mathematical elements: no op-amp dynamics, no loading.
//! Everything here is a pure function; integrator state lives in the engine.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::signal::Trace;

/// Digit voltage for a binary 0.
pub const LOGIC_LOW: f64 = 0.0;
/// Digit voltage for a binary 1.
pub const LOGIC_HIGH: f64 = 5.0;
/// How far a digit voltage may sit from its nominal level.
pub const LOGIC_TOLERANCE: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BlockError {
    #[error("value {value} is outside the converter range [0, {max}) in quanta")]
    AdcRange { value: f64, max: f64 },
    #[error("digit voltage {0} is neither near {LOGIC_LOW} V nor near {LOGIC_HIGH} V")]
    MalformedDigit(f64),
    #[error("step generator queried at negative time {0}")]
    NegativeTime(f64),
    #[error("converter width must be 1..=32 bits, got {0}")]
    BadWidth(u32),
    #[error("quantum must be positive and finite, got {0}")]
    BadQuantum(f64),
    #[error("{0}")]
    BadParams(String),
}

fn bad(msg: impl Into<String>) -> BlockError {
    BlockError::BadParams(msg.into())
}

/// Netlist keyword for a block kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KindTag {
    Const,
    SineSrc,
    FourierSquareSrc,
    Adder,
    Inv,
    Pot,
    Int,
    LimZero,
    LimDead,
    LimSat,
    LimBang,
    Afg,
    StepGen,
    Adc,
    Dac,
}

impl KindTag {
    pub const ALL: [KindTag; 15] = [
        KindTag::Const,
        KindTag::SineSrc,
        KindTag::FourierSquareSrc,
        KindTag::Adder,
        KindTag::Inv,
        KindTag::Pot,
        KindTag::Int,
        KindTag::LimZero,
        KindTag::LimDead,
        KindTag::LimSat,
        KindTag::LimBang,
        KindTag::Afg,
        KindTag::StepGen,
        KindTag::Adc,
        KindTag::Dac,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            KindTag::Const => "const",
            KindTag::SineSrc => "sine_src",
            KindTag::FourierSquareSrc => "fourier_square_src",
            KindTag::Adder => "adder",
            KindTag::Inv => "inv",
            KindTag::Pot => "pot",
            KindTag::Int => "int",
            KindTag::LimZero => "lim_zero",
            KindTag::LimDead => "lim_dead",
            KindTag::LimSat => "lim_sat",
            KindTag::LimBang => "lim_bang",
            KindTag::Afg => "afg",
            KindTag::StepGen => "stepgen",
            KindTag::Adc => "adc",
            KindTag::Dac => "dac",
        }
    }

    /// Whether the block's output depends on its inputs at the same instant.
    pub fn is_integrator(self) -> bool {
        self == KindTag::Int
    }

    /// Whether the block must be evaluated with the current time.
    pub fn is_time_dependent(self) -> bool {
        matches!(
            self,
            KindTag::SineSrc | KindTag::FourierSquareSrc | KindTag::StepGen
        )
    }

    /// Blocks whose output has jumps or kinks.
    pub fn is_discontinuous(self) -> bool {
        matches!(
            self,
            KindTag::FourierSquareSrc
                | KindTag::LimZero
                | KindTag::LimDead
                | KindTag::LimSat
                | KindTag::LimBang
                | KindTag::Afg
                | KindTag::StepGen
                | KindTag::Adc
                | KindTag::Dac
        )
    }
}

impl fmt::Display for KindTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KindTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        KindTag::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown block kind `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arity {
    Exactly(usize),
    AtLeast(usize),
}

impl Arity {
    pub fn admits(self, n: usize) -> bool {
        match self {
            Arity::Exactly(k) => n == k,
            Arity::AtLeast(k) => n >= k,
        }
    }
}

impl fmt::Display for Arity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arity::Exactly(k) => write!(f, "exactly {k}"),
            Arity::AtLeast(k) => write!(f, "at least {k}"),
        }
    }
}

pub fn eval_adder(inputs: &[f64]) -> f64 {
    inputs.iter().sum()
}

pub fn eval_pot(gain: f64, input: f64) -> f64 {
    gain * input
}

pub fn eval_inv(input: f64) -> f64 {
    -input
}

/// Discontinuity shapes. Only the zero limiter is named as such in the
/// source material; dead zone (gear slack), saturation and bang-bang are
/// our picks for the remaining three.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Limiter {
    /// `max(0, x - threshold)`.
    Zero { threshold: f64 },
    /// Zero inside `[-half_width, half_width]`, shifted identity outside.
    Dead { half_width: f64 },
    /// Clamp to `[-level, level]`.
    Sat { level: f64 },
    /// `-level` below threshold, `+level` above, 0 exactly at it.
    Bang { threshold: f64, level: f64 },
}

pub fn eval_limiter(limiter: Limiter, input: f64) -> f64 {
    match limiter {
        Limiter::Zero { threshold } => (input - threshold).max(0.0),
        Limiter::Dead { half_width } => {
            if input.abs() <= half_width {
                0.0
            } else {
                input - input.signum() * half_width
            }
        }
        Limiter::Sat { level } => input.clamp(-level, level),
        Limiter::Bang { threshold, level } => {
            if input < threshold {
                -level
            } else if input > threshold {
                level
            } else {
                0.0
            }
        }
    }
}

/// Breakpoints of an arbitrary function generator, strictly increasing in x.
#[derive(Debug, Clone, PartialEq)]
pub struct Breakpoints(Vec<(f64, f64)>);

impl Breakpoints {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, BlockError> {
        if points.len() < 2 {
            return Err(bad("function generator needs at least 2 breakpoints"));
        }
        if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(bad("breakpoints must be finite"));
        }
        if points.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(bad("breakpoint abscissae must be strictly increasing"));
        }
        Ok(Self(points))
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.0
    }
}

/// Piecewise-linear interpolation, clamped to the end ordinates outside
/// the breakpoint range.
pub fn eval_afg(breakpoints: &Breakpoints, input: f64) -> f64 {
    let pts = breakpoints.points();
    let (x0, y0) = pts[0];
    let (xn, yn) = pts[pts.len() - 1];
    if input <= x0 {
        return y0;
    }
    if input >= xn {
        return yn;
    }
    // First breakpoint strictly right of input; 1..len-1 here.
    let hi = pts.partition_point(|&(x, _)| x <= input);
    let (xa, ya) = pts[hi - 1];
    let (xb, yb) = pts[hi];
    if input == xa {
        return ya;
    }
    ya + (yb - ya) * (input - xa) / (xb - xa)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Contact {
    /// Clean jump; right-continuous.
    BreakBeforeMake,
    /// Both taps shorted for `overlap` seconds after each jump.
    MakeBeforeBreak { overlap: f64 },
}

/// Levels of a rotary step-function generator.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSchedule {
    segments: Vec<(f64, f64)>,
    contact: Contact,
}

impl StepSchedule {
    /// `segments` are `(start_time, level)`; the first must start at 0.
    pub fn new(segments: Vec<(f64, f64)>, contact: Contact) -> Result<Self, BlockError> {
        let Some(&(first, _)) = segments.first() else {
            return Err(bad("step schedule needs at least one segment"));
        };
        if first != 0.0 {
            return Err(bad("step schedule must start at t=0"));
        }
        if segments.iter().any(|(t, l)| !t.is_finite() || !l.is_finite()) {
            return Err(bad("step schedule entries must be finite"));
        }
        if segments.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(bad("step times must be strictly increasing"));
        }
        if let Contact::MakeBeforeBreak { overlap } = contact {
            if !(overlap >= 0.0 && overlap.is_finite()) {
                return Err(bad("overlap must be non-negative"));
            }
            if segments.windows(2).any(|w| w[1].0 - w[0].0 <= overlap) {
                return Err(bad("overlap must be shorter than every segment"));
            }
        }
        Ok(Self { segments, contact })
    }

    pub fn break_before_make(segments: Vec<(f64, f64)>) -> Result<Self, BlockError> {
        Self::new(segments, Contact::BreakBeforeMake)
    }

    pub fn segments(&self) -> &[(f64, f64)] {
        &self.segments
    }

    pub fn contact(&self) -> Contact {
        self.contact
    }
}

pub fn eval_stepgen(schedule: &StepSchedule, t: f64) -> Result<f64, BlockError> {
    if t < 0.0 || t.is_nan() {
        return Err(BlockError::NegativeTime(t));
    }
    let segs = &schedule.segments;
    // Segment in force: last start time <= t.
    let idx = segs.partition_point(|&(start, _)| start <= t) - 1;
    let level = segs[idx].1;
    match schedule.contact {
        Contact::MakeBeforeBreak { overlap } if idx > 0 && t < segs[idx].0 + overlap => {
            Ok(0.5 * (segs[idx - 1].1 + level))
        }
        _ => Ok(level),
    }
}

/// Ball-and-disk integrator: disk A turns at `omega_a`, the ball sits at
/// the input position, disk B's rotation count is the output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiskIntegratorParams {
    omega_a: f64,
    gain: f64,
}

impl DiskIntegratorParams {
    pub fn new(omega_a: f64, gain: f64) -> Result<Self, BlockError> {
        if !(omega_a > 0.0 && omega_a.is_finite()) {
            return Err(bad("disk A speed must be positive"));
        }
        if !(gain > 0.0 && gain.is_finite()) {
            return Err(bad("disk gain must be positive"));
        }
        Ok(Self { omega_a, gain })
    }

    pub fn omega_a(&self) -> f64 {
        self.omega_a
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }
}

/// Net rotations of disk B over the trace (trapezoidal rule). Positions
/// left of centre turn B backwards.
pub fn disk_rotations(position: &Trace, params: DiskIntegratorParams) -> f64 {
    let dt = position.grid().dt();
    let area: f64 = position
        .values()
        .windows(2)
        .map(|w| 0.5 * (w[0] + w[1]) * dt)
        .sum();
    params.gain * params.omega_a * area
}

/// Binary converter geometry shared by the ADC and DAC.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantizer {
    n_bits: u32,
    quantum: f64,
}

impl Quantizer {
    pub fn new(n_bits: u32, quantum: f64) -> Result<Self, BlockError> {
        if !(1..=32).contains(&n_bits) {
            return Err(BlockError::BadWidth(n_bits));
        }
        if !(quantum > 0.0 && quantum.is_finite()) {
            return Err(BlockError::BadQuantum(quantum));
        }
        Ok(Self { n_bits, quantum })
    }

    pub fn n_bits(&self) -> u32 {
        self.n_bits
    }

    pub fn quantum(&self) -> f64 {
        self.quantum
    }

    fn span(&self) -> f64 {
        (1u64 << self.n_bits) as f64
    }

    /// Integer code for `value`, rounded to nearest with ties away from zero.
    pub fn code(&self, value: f64) -> Result<u64, BlockError> {
        let ratio = value / self.quantum;
        let max = self.span();
        if !(ratio >= 0.0 && ratio < max) {
            return Err(BlockError::AdcRange { value: ratio, max });
        }
        let code = ratio.round();
        if code >= max {
            return Err(BlockError::AdcRange { value: ratio, max });
        }
        Ok(code as u64)
    }

    /// Digit voltages, most significant first.
    pub fn encode(&self, value: f64) -> Result<Vec<f64>, BlockError> {
        let code = self.code(value)?;
        Ok((0..self.n_bits)
            .rev()
            .map(|bit| {
                if code >> bit & 1 == 1 {
                    LOGIC_HIGH
                } else {
                    LOGIC_LOW
                }
            })
            .collect())
    }

    /// Voltage on one output line of the converter (`bit` 0 is the MSB).
    pub fn digit(&self, value: f64, bit: u32) -> Result<f64, BlockError> {
        let code = self.code(value)?;
        let shift = self.n_bits - 1 - bit;
        Ok(if code >> shift & 1 == 1 {
            LOGIC_HIGH
        } else {
            LOGIC_LOW
        })
    }

    pub fn decode(&self, digits: &[f64]) -> Result<f64, BlockError> {
        if digits.len() != self.n_bits as usize {
            return Err(bad(format!(
                "converter expects {} digits, got {}",
                self.n_bits,
                digits.len()
            )));
        }
        decode_digits(digits, self.quantum)
    }
}

fn digit_bit(v: f64) -> Result<u64, BlockError> {
    if (v - LOGIC_LOW).abs() <= LOGIC_TOLERANCE {
        Ok(0)
    } else if (v - LOGIC_HIGH).abs() <= LOGIC_TOLERANCE {
        Ok(1)
    } else {
        Err(BlockError::MalformedDigit(v))
    }
}

fn decode_digits(digits: &[f64], quantum: f64) -> Result<f64, BlockError> {
    if digits.is_empty() || digits.len() > 32 {
        return Err(BlockError::BadWidth(digits.len() as u32));
    }
    let code = digits
        .iter()
        .try_fold(0u64, |acc, &v| Ok::<_, BlockError>(acc << 1 | digit_bit(v)?))?;
    Ok(code as f64 * quantum)
}

/// Analog-to-digital conversion: digit voltages, most significant first.
pub fn adc(value: f64, n_bits: u32, quantum: f64) -> Result<Vec<f64>, BlockError> {
    Quantizer::new(n_bits, quantum)?.encode(value)
}

/// Digital-to-analog conversion; the word width is the number of digits.
pub fn dac(digits: &[f64], quantum: f64) -> Result<f64, BlockError> {
    if !(quantum > 0.0 && quantum.is_finite()) {
        return Err(BlockError::BadQuantum(quantum));
    }
    decode_digits(digits, quantum)
}

/// Odd-harmonic partial sum of a square wave that is `+amplitude` on the
/// first half period and `-amplitude` on the second.
pub fn eval_fourier_square(t: f64, n_terms: u32, period: f64, amplitude: f64) -> f64 {
    let w = 2.0 * PI * t / period;
    let sum: f64 = (0..n_terms)
        .map(|i| {
            let k = f64::from(2 * i + 1);
            (k * w).sin() / k
        })
        .sum();
    4.0 * amplitude / PI * sum
}

/// Peak of the unit-amplitude partial sum, found by a dense sweep of the
/// first quarter period (the wave is symmetric about it).
pub fn gibbs_peak(n_terms: u32) -> f64 {
    let samples = 2000 * n_terms.max(1) as usize;
    (0..=samples)
        .map(|i| eval_fourier_square(0.25 * i as f64 / samples as f64, n_terms, 1.0, 1.0))
        .fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sine {
    pub amp: f64,
    pub omega: f64,
    pub phase: f64,
}

impl Sine {
    pub fn eval(&self, t: f64) -> f64 {
        self.amp * (self.omega * t + self.phase).sin()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierSquare {
    pub n_terms: u32,
    pub period: f64,
    pub amplitude: f64,
}

/// A fully resolved block with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockKind {
    Const { value: f64 },
    Sine(Sine),
    FourierSquare(FourierSquare),
    Adder,
    Inv,
    Pot { gain: f64 },
    Int { ic: f64 },
    Limiter(Limiter),
    Afg(Breakpoints),
    StepGen(StepSchedule),
    /// One output line of an ADC; `bit` 0 is the most significant digit.
    Adc { quantizer: Quantizer, bit: u32 },
    /// Takes one digit voltage per input, most significant first.
    Dac { quantizer: Quantizer },
}

impl BlockKind {
    pub fn tag(&self) -> KindTag {
        match self {
            BlockKind::Const { .. } => KindTag::Const,
            BlockKind::Sine(_) => KindTag::SineSrc,
            BlockKind::FourierSquare(_) => KindTag::FourierSquareSrc,
            BlockKind::Adder => KindTag::Adder,
            BlockKind::Inv => KindTag::Inv,
            BlockKind::Pot { .. } => KindTag::Pot,
            BlockKind::Int { .. } => KindTag::Int,
            BlockKind::Limiter(Limiter::Zero { .. }) => KindTag::LimZero,
            BlockKind::Limiter(Limiter::Dead { .. }) => KindTag::LimDead,
            BlockKind::Limiter(Limiter::Sat { .. }) => KindTag::LimSat,
            BlockKind::Limiter(Limiter::Bang { .. }) => KindTag::LimBang,
            BlockKind::Afg(_) => KindTag::Afg,
            BlockKind::StepGen(_) => KindTag::StepGen,
            BlockKind::Adc { .. } => KindTag::Adc,
            BlockKind::Dac { .. } => KindTag::Dac,
        }
    }

    pub fn arity(&self) -> Arity {
        match self {
            BlockKind::Const { .. }
            | BlockKind::Sine(_)
            | BlockKind::FourierSquare(_)
            | BlockKind::StepGen(_) => Arity::Exactly(0),
            BlockKind::Adder => Arity::AtLeast(2),
            BlockKind::Dac { quantizer } => Arity::Exactly(quantizer.n_bits() as usize),
            _ => Arity::Exactly(1),
        }
    }

    /// Output of a memoryless block at time `t`.
    ///
    /// Integrators hold state and are never evaluated here; the engine
    /// writes their output directly.
    pub fn eval(&self, inputs: &[f64], t: f64) -> Result<f64, BlockError> {
        Ok(match self {
            BlockKind::Const { value } => *value,
            BlockKind::Sine(s) => s.eval(t),
            BlockKind::FourierSquare(f) => {
                eval_fourier_square(t, f.n_terms, f.period, f.amplitude)
            }
            BlockKind::Adder => eval_adder(inputs),
            BlockKind::Inv => eval_inv(inputs[0]),
            BlockKind::Pot { gain } => eval_pot(*gain, inputs[0]),
            BlockKind::Int { .. } => unreachable!("integrator output comes from state"),
            BlockKind::Limiter(l) => eval_limiter(*l, inputs[0]),
            BlockKind::Afg(bp) => eval_afg(bp, inputs[0]),
            BlockKind::StepGen(s) => eval_stepgen(s, t)?,
            BlockKind::Adc { quantizer, bit } => quantizer.digit(inputs[0], *bit)?,
            BlockKind::Dac { quantizer } => quantizer.decode(inputs)?,
        })
    }
}
