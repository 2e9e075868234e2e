//! Time grids, sampled traces, amplitude scaling and overload checks.
//!
//! All values are dimensionless machine units. A netlist may note a physical
//! unit next to a value, but nothing here converts between units.

use std::fmt;
use std::io::{self, Write};

use thiserror::Error;

/// Default machine limit, in machine units.
pub const DEFAULT_MAX_ABS: f64 = 100.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("time step must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("a grid needs at least one step")]
    NoSteps,
    #[error("trace `{name}` has {got} samples, grid expects {expected}")]
    LengthMismatch {
        name: String,
        got: usize,
        expected: usize,
    },
    #[error("trace `{name}` holds a non-finite value at sample {index}")]
    NonFinite { name: String, index: usize },
    #[error("time {t} is outside [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },
    #[error("scale factor must be finite and non-zero, got {0}")]
    BadScale(f64),
    #[error("machine limit must be positive and finite, got {0}")]
    BadLimit(f64),
    #[error("traces do not share one time grid")]
    GridMismatch,
}

/// Uniform sampling grid. Sample `k` sits at `t_start + k * dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_start: f64,
    dt: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, dt: f64, n_steps: usize) -> Result<Self, SignalError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(SignalError::BadStep(dt));
        }
        if n_steps == 0 {
            return Err(SignalError::NoSteps);
        }
        Ok(Self {
            t_start,
            dt,
            n_steps,
        })
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Number of samples, one more than the number of steps.
    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Time of sample `k`, computed by multiplication so it never drifts.
    pub fn time(&self, k: usize) -> f64 {
        self.t_start + k as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.n_steps)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|k| self.time(k))
    }
}

/// One sampled machine variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    name: String,
    grid: TimeGrid,
    values: Vec<f64>,
}

impl Trace {
    pub fn new(
        name: impl Into<String>,
        grid: TimeGrid,
        values: Vec<f64>,
    ) -> Result<Self, SignalError> {
        let name = name.into();
        if values.len() != grid.len() {
            return Err(SignalError::LengthMismatch {
                name,
                got: values.len(),
                expected: grid.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(SignalError::NonFinite { name, index });
        }
        Ok(Self { name, grid, values })
    }

    /// Samples `f` at every grid time.
    pub fn from_fn(
        name: impl Into<String>,
        grid: TimeGrid,
        f: impl Fn(f64) -> f64,
    ) -> Result<Self, SignalError> {
        let values = grid.times().map(f).collect();
        Self::new(name, grid, values)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn first(&self) -> f64 {
        self.values[0]
    }

    pub fn last(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(|(k, &v)| (self.grid.time(k), v))
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

/// Linearly interpolated value of `trace` at time `t`; exact at grid points.
pub fn trace_sample(trace: &Trace, t: f64) -> Result<f64, SignalError> {
    let grid = trace.grid;
    let (start, end) = (grid.t_start(), grid.t_end());
    if !(t >= start && t <= end) {
        return Err(SignalError::OutOfRange { t, start, end });
    }
    let u = (t - start) / grid.dt();
    let nearest = (u.round() as usize).min(grid.n_steps());
    if grid.time(nearest) == t {
        return Ok(trace.values[nearest]);
    }
    let lo = (u.floor() as usize).min(grid.n_steps() - 1);
    let frac = (t - grid.time(lo)) / grid.dt();
    let (a, b) = (trace.values[lo], trace.values[lo + 1]);
    Ok(a + (b - a) * frac)
}

/// Amplitude scale applied to a whole trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleMap {
    factor: f64,
}

impl ScaleMap {
    pub fn new(factor: f64) -> Result<Self, SignalError> {
        if factor == 0.0 || !factor.is_finite() {
            return Err(SignalError::BadScale(factor));
        }
        Ok(Self { factor })
    }

    pub fn factor(&self) -> f64 {
        self.factor
    }

    pub fn inverse(&self) -> Self {
        Self {
            factor: 1.0 / self.factor,
        }
    }
}

pub fn apply_scale(trace: &Trace, scale: ScaleMap) -> Trace {
    Trace {
        name: trace.name.clone(),
        grid: trace.grid,
        values: trace.values.iter().map(|v| v * scale.factor).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MachineLimits {
    max_abs: f64,
}

impl MachineLimits {
    pub fn new(max_abs: f64) -> Result<Self, SignalError> {
        if !(max_abs > 0.0 && max_abs.is_finite()) {
            return Err(SignalError::BadLimit(max_abs));
        }
        Ok(Self { max_abs })
    }

    pub fn max_abs(&self) -> f64 {
        self.max_abs
    }
}

impl Default for MachineLimits {
    fn default() -> Self {
        Self {
            max_abs: DEFAULT_MAX_ABS,
        }
    }
}

/// A sample whose magnitude exceeded the machine limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Overload {
    pub time: f64,
    pub value: f64,
}

impl fmt::Display for Overload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t={} value={}", self.time, self.value)
    }
}

/// Every sample with `|value| > max_abs`. The limit itself is in range.
pub fn check_overload(trace: &Trace, limits: MachineLimits) -> Vec<Overload> {
    trace
        .iter()
        .filter(|(_, v)| v.abs() > limits.max_abs)
        .map(|(time, value)| Overload { time, value })
        .collect()
}

/// Writes traces sharing one grid as CSV: header `t,<name>...`, one row per
/// grid point. Floats use Rust's shortest round-trip formatting.
pub fn write_csv<W: Write>(mut out: W, traces: &[&Trace]) -> io::Result<()> {
    let Some(first) = traces.first() else {
        return writeln!(out, "t");
    };
    if traces.iter().any(|tr| tr.grid != first.grid) {
        return Err(io::Error::new(
            io::ErrorKind::InvalidInput,
            SignalError::GridMismatch,
        ));
    }
    write!(out, "t")?;
    for tr in traces {
        write!(out, ",{}", tr.name)?;
    }
    writeln!(out)?;
    for k in 0..first.grid.len() {
        write!(out, "{}", first.grid.time(k))?;
        for tr in traces {
            write!(out, ",{}", tr.values[k])?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp() -> Trace {
        let grid = TimeGrid::new(0.0, 1.0, 2).unwrap();
        Trace::new("r", grid, vec![0.0, 1.0, 2.0]).unwrap()
    }

    fn constant(v: f64, n: usize) -> Trace {
        let grid = TimeGrid::new(0.0, 0.1, n).unwrap();
        Trace::new("c", grid, vec![v; n + 1]).unwrap()
    }

    #[test]
    fn grid_rejects_bad_parameters() {
        assert_eq!(TimeGrid::new(0.0, 0.0, 3), Err(SignalError::BadStep(0.0)));
        assert!(TimeGrid::new(0.0, -1.0, 3).is_err());
        assert!(TimeGrid::new(0.0, f64::NAN, 3).is_err());
        assert_eq!(TimeGrid::new(0.0, 1.0, 0), Err(SignalError::NoSteps));
    }

    #[test]
    fn grid_times_are_multiplied_not_accumulated() {
        let grid = TimeGrid::new(0.0, 0.1, 1000).unwrap();
        let mut acc = 0.0;
        for _ in 0..1000 {
            acc += 0.1;
        }
        assert_eq!(grid.t_end(), 1000.0 * 0.1);
        assert_ne!(acc, grid.t_end());
    }

    #[test]
    fn trace_rejects_wrong_length_and_nan() {
        let grid = TimeGrid::new(0.0, 1.0, 2).unwrap();
        assert!(matches!(
            Trace::new("x", grid, vec![0.0; 2]),
            Err(SignalError::LengthMismatch { .. })
        ));
        assert!(matches!(
            Trace::new("x", grid, vec![0.0, f64::INFINITY, 1.0]),
            Err(SignalError::NonFinite { index: 1, .. })
        ));
    }

    #[test]
    fn sample_interpolates_between_grid_points() {
        assert_eq!(trace_sample(&ramp(), 0.5).unwrap(), 0.5);
        assert_eq!(trace_sample(&ramp(), 1.75).unwrap(), 1.75);
    }

    #[test]
    fn sample_at_endpoints() {
        let tr = ramp();
        assert_eq!(trace_sample(&tr, 0.0).unwrap(), 0.0);
        assert_eq!(trace_sample(&tr, 2.0).unwrap(), 2.0);
    }

    #[test]
    fn sample_out_of_range() {
        let tr = ramp();
        assert!(matches!(
            trace_sample(&tr, 3.0),
            Err(SignalError::OutOfRange { .. })
        ));
        assert!(trace_sample(&tr, -1e-9).is_err());
        assert!(trace_sample(&tr, f64::NAN).is_err());
    }

    #[test]
    fn sample_exact_at_awkward_grid_points() {
        let grid = TimeGrid::new(0.3, 0.1, 50).unwrap();
        let tr = Trace::from_fn("s", grid, |t| (7.0 * t).sin()).unwrap();
        for k in 0..grid.len() {
            assert_eq!(trace_sample(&tr, grid.time(k)).unwrap(), tr.values()[k]);
        }
    }

    #[test]
    fn scale_700_to_7() {
        let tr = constant(700.0, 3);
        let scaled = apply_scale(&tr, ScaleMap::new(0.01).unwrap());
        for &v in scaled.values() {
            assert!((v - 7.0).abs() < 1e-12);
        }
        assert_eq!(scaled.grid(), tr.grid());
    }

    #[test]
    fn scale_identity_and_inverse() {
        let grid = TimeGrid::new(0.0, 0.01, 100).unwrap();
        let tr = Trace::from_fn("s", grid, |t| 50.0 * (3.0 * t).cos() - 12.5).unwrap();
        assert_eq!(apply_scale(&tr, ScaleMap::new(1.0).unwrap()), tr);
        let s = ScaleMap::new(0.01).unwrap();
        let back = apply_scale(&apply_scale(&tr, s), ScaleMap::new(100.0).unwrap());
        for (a, b) in tr.values().iter().zip(back.values()) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
        let back = apply_scale(&apply_scale(&tr, s), s.inverse());
        for (a, b) in tr.values().iter().zip(back.values()) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn zero_scale_rejected() {
        assert_eq!(ScaleMap::new(0.0), Err(SignalError::BadScale(0.0)));
        assert!(MachineLimits::new(0.0).is_err());
        assert_eq!(MachineLimits::default().max_abs(), 100.0);
    }

    #[test]
    fn overload_reports() {
        let lim = MachineLimits::default();
        assert_eq!(check_overload(&constant(700.0, 4), lim).len(), 5);
        assert!(check_overload(&constant(7.0, 4), lim).is_empty());
        assert!(check_overload(&constant(100.0, 4), lim).is_empty());
        assert_eq!(check_overload(&constant(-100.5, 4), lim).len(), 5);
    }

    #[test]
    fn csv_layout() {
        let a = ramp();
        let b = apply_scale(&ramp(), ScaleMap::new(0.1).unwrap()).renamed("q");
        let mut buf = Vec::new();
        write_csv(&mut buf, &[&a, &b]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "t,r,q\n0,0,0\n1,1,0.1\n2,2,0.2\n");
    }

    #[test]
    fn csv_values_round_trip_exactly() {
        let grid = TimeGrid::new(0.0, 1e-3, 20).unwrap();
        let tr = Trace::from_fn("x", grid, |t| (t * 1234.5).sin() / 3.0).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &[&tr]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        for (line, &v) in text.lines().skip(1).zip(tr.values()) {
            let parsed: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
            assert_eq!(parsed.to_bits(), v.to_bits());
        }
    }

    #[test]
    fn csv_rejects_mixed_grids() {
        let a = ramp();
        let b = constant(1.0, 2);
        assert!(write_csv(Vec::new(), &[&a, &b]).is_err());
    }

    fn values(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-1e3..1e3f64, n)
    }

    proptest! {
        #[test]
        fn scale_is_linear(
            (v1, v2) in (1usize..40).prop_flat_map(|n| (values(n + 1), values(n + 1))),
            a in -10.0..10.0f64,
            b in -10.0..10.0f64,
            factor in prop_oneof![-5.0..-0.01f64, 0.01..5.0f64],
        ) {
            let grid = TimeGrid::new(0.0, 0.5, v1.len() - 1).unwrap();
            let t1 = Trace::new("a", grid, v1.clone()).unwrap();
            let t2 = Trace::new("b", grid, v2.clone()).unwrap();
            let combo: Vec<f64> = v1.iter().zip(&v2).map(|(x, y)| a * x + b * y).collect();
            let s = ScaleMap::new(factor).unwrap();
            let lhs = apply_scale(&Trace::new("c", grid, combo).unwrap(), s);
            let (s1, s2) = (apply_scale(&t1, s), apply_scale(&t2, s));
            for k in 0..grid.len() {
                let rhs = a * s1.values()[k] + b * s2.values()[k];
                let scale = 1.0 + lhs.values()[k].abs() + (a * s1.values()[k]).abs() + (b * s2.values()[k]).abs();
                prop_assert!((lhs.values()[k] - rhs).abs() <= 1e-12 * scale);
            }
        }

        #[test]
        fn overload_commutes_with_scaling(
            vals in (2usize..60).prop_flat_map(values),
            factor in prop_oneof![-4.0..-0.25f64, 0.25..4.0f64],
            limit in 1.0..500.0f64,
        ) {
            let grid = TimeGrid::new(0.0, 0.1, vals.len() - 1).unwrap();
            let tr = Trace::new("v", grid, vals).unwrap();
            let s = ScaleMap::new(factor).unwrap();
            // Skip samples sitting within rounding distance of the limit.
            prop_assume!(tr.values().iter().all(|v| (v.abs() - limit).abs() > 1e-9 * limit));
            let plain: Vec<f64> = check_overload(&tr, MachineLimits::new(limit).unwrap())
                .into_iter().map(|o| o.time).collect();
            let scaled: Vec<f64> = check_overload(
                &apply_scale(&tr, s),
                MachineLimits::new(factor.abs() * limit).unwrap(),
            ).into_iter().map(|o| o.time).collect();
            prop_assert_eq!(plain, scaled);
        }

        #[test]
        fn sample_exact_on_grid(vals in (2usize..60).prop_flat_map(values), t0 in -5.0..5.0f64, dt in 1e-3..2.0f64) {
            let grid = TimeGrid::new(t0, dt, vals.len() - 1).unwrap();
            let tr = Trace::new("v", grid, vals).unwrap();
            for k in 0..grid.len() {
                prop_assert_eq!(trace_sample(&tr, grid.time(k)).unwrap(), tr.values()[k]);
            }
        }
    }
}
