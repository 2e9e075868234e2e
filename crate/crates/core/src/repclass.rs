//! Analog/digital representation checks.
//!
//! A scheme is a finite sample of (represented quantity Q, representing
//! magnitude P) pairs with a resolution `r`. It is analog when, for every
//! two pairs whose magnitudes differ by at least `r`, the larger magnitude
//! always stands for the larger quantity (increasing) or always for the
//! smaller one (decreasing). Magnitudes closer than `r` carry no
//! representational difference. Only that ordering condition is checked;
//! whether P genuinely represents Q is the caller's claim.
//!
//! On a finite sample the verdict means "consistent with analog", never a
//! proof about the values that were not sampled.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RepError {
    #[error("a scheme needs at least 2 pairs, got {0}")]
    TooFewPairs(usize),
    #[error("resolution must be finite and non-negative, got {0}")]
    BadResolution(f64),
    #[error("pair {0} holds a non-finite value")]
    NonFinite(usize),
    #[error("pairs {0} and {1} give the same quantity magnitudes at least r apart")]
    InconsistentDuplicate(usize, usize),
    #[error("scale factor must be finite and non-zero, got {0}")]
    BadScale(f64),
    #[error("numeral has no digits")]
    EmptyNumeral,
    #[error("base must be at least 1")]
    BadBase,
    #[error("digit {digit} at position {position} is not valid in base {base}")]
    MalformedDigit {
        digit: u32,
        position: usize,
        base: u32,
    },
    #[error("point position {point} is beyond the {len} digits")]
    BadPoint { point: usize, len: usize },
}

/// One (quantity, magnitude) sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepPair {
    pub quantity: f64,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepScheme {
    pairs: Vec<RepPair>,
    resolution: f64,
}

impl RepScheme {
    pub fn new(pairs: Vec<RepPair>, resolution: f64) -> Result<Self, RepError> {
        if pairs.len() < 2 {
            return Err(RepError::TooFewPairs(pairs.len()));
        }
        if !(resolution >= 0.0 && resolution.is_finite()) {
            return Err(RepError::BadResolution(resolution));
        }
        if let Some(i) = pairs
            .iter()
            .position(|p| !p.quantity.is_finite() || !p.magnitude.is_finite())
        {
            return Err(RepError::NonFinite(i));
        }
        for i in 0..pairs.len() {
            for j in i + 1..pairs.len() {
                if pairs[i].quantity == pairs[j].quantity
                    && constrains(pairs[i].magnitude, pairs[j].magnitude, resolution)
                {
                    return Err(RepError::InconsistentDuplicate(i, j));
                }
            }
        }
        Ok(Self { pairs, resolution })
    }

    /// Builds a scheme from `(Q, P)` tuples.
    pub fn from_tuples(pairs: &[(f64, f64)], resolution: f64) -> Result<Self, RepError> {
        Self::new(
            pairs
                .iter()
                .map(|&(quantity, magnitude)| RepPair {
                    quantity,
                    magnitude,
                })
                .collect(),
            resolution,
        )
    }

    pub fn pairs(&self) -> &[RepPair] {
        &self.pairs
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    /// Same pairs judged at a different resolution.
    pub fn with_resolution(&self, resolution: f64) -> Result<Self, RepError> {
        Self::new(self.pairs.clone(), resolution)
    }
}

/// Whether two magnitudes are far enough apart to be ordered.
fn constrains(p1: f64, p2: f64, r: f64) -> bool {
    p1 != p2 && (p1 - p2).abs() >= r
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictTag {
    AnalogIncreasing,
    AnalogDecreasing,
    NotAnalog,
}

impl VerdictTag {
    pub fn as_str(self) -> &'static str {
        match self {
            VerdictTag::AnalogIncreasing => "analog_increasing",
            VerdictTag::AnalogDecreasing => "analog_decreasing",
            VerdictTag::NotAnalog => "not_analog",
        }
    }

    pub fn is_analog(self) -> bool {
        self != VerdictTag::NotAnalog
    }
}

impl fmt::Display for VerdictTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Pair indices `(i, j)`, `i < j`, that break an ordering hypothesis.
pub type Witness = (usize, usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub tag: VerdictTag,
    /// Pairs that break the increasing hypothesis.
    pub against_increasing: Vec<Witness>,
    /// Pairs that break the decreasing hypothesis.
    pub against_decreasing: Vec<Witness>,
    /// No pair of magnitudes was at least `r` apart, so both hypotheses
    /// hold vacuously.
    pub degenerate: bool,
}

impl Verdict {
    /// Counter-examples; empty exactly when the scheme is analog.
    pub fn witnesses(&self) -> Vec<Witness> {
        if self.tag.is_analog() {
            return Vec::new();
        }
        let mut all = self.against_increasing.clone();
        all.extend(self.against_decreasing.iter().copied());
        all.sort_unstable();
        all.dedup();
        all
    }
}

pub fn classify(scheme: &RepScheme) -> Verdict {
    let pairs = &scheme.pairs;
    let r = scheme.resolution;
    let mut against_increasing = Vec::new();
    let mut against_decreasing = Vec::new();
    let mut constrained = false;
    for i in 0..pairs.len() {
        for j in i + 1..pairs.len() {
            let (a, b) = (pairs[i], pairs[j]);
            if !constrains(a.magnitude, b.magnitude, r) {
                continue;
            }
            constrained = true;
            let (small, large) = if a.magnitude < b.magnitude {
                (a, b)
            } else {
                (b, a)
            };
            if small.quantity >= large.quantity {
                against_increasing.push((i, j));
            }
            if small.quantity <= large.quantity {
                against_decreasing.push((i, j));
            }
        }
    }
    let tag = if against_increasing.is_empty() {
        VerdictTag::AnalogIncreasing
    } else if against_decreasing.is_empty() {
        VerdictTag::AnalogDecreasing
    } else {
        VerdictTag::NotAnalog
    };
    Verdict {
        tag,
        against_increasing,
        against_decreasing,
        degenerate: !constrained,
    }
}

/// Maps every magnitude to `a·P + c` and the resolution to `|a|·r`.
pub fn affine_transform(scheme: &RepScheme, a: f64, c: f64) -> Result<RepScheme, RepError> {
    if a == 0.0 || !a.is_finite() || !c.is_finite() {
        return Err(RepError::BadScale(a));
    }
    Ok(RepScheme {
        pairs: scheme
            .pairs
            .iter()
            .map(|p| RepPair {
                quantity: p.quantity,
                magnitude: a * p.magnitude + c,
            })
            .collect(),
        resolution: a.abs() * scheme.resolution,
    })
}

/// A place-value numeral. `point` counts the digits left of the radix
/// point; `None` means an integer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NumeralString {
    digits: Vec<u32>,
    base: u32,
    point: Option<usize>,
}

impl NumeralString {
    pub fn new(digits: Vec<u32>, base: u32, point: Option<usize>) -> Result<Self, RepError> {
        if digits.is_empty() {
            return Err(RepError::EmptyNumeral);
        }
        if base == 0 {
            return Err(RepError::BadBase);
        }
        if let Some(point) = point {
            if point > digits.len() {
                return Err(RepError::BadPoint {
                    point,
                    len: digits.len(),
                });
            }
        }
        // Unary numerals are strings of strokes, each worth one.
        let max_digit = if base == 1 { 1 } else { base - 1 };
        let min_digit = u32::from(base == 1);
        if let Some((position, &digit)) = digits
            .iter()
            .enumerate()
            .find(|(_, &d)| d > max_digit || d < min_digit)
        {
            return Err(RepError::MalformedDigit {
                digit,
                position,
                base,
            });
        }
        Ok(Self {
            digits,
            base,
            point,
        })
    }

    /// Parses text such as `29.7`; digits above 9 are not supported here.
    pub fn parse(text: &str, base: u32) -> Result<Self, RepError> {
        let mut digits = Vec::new();
        let mut point = None;
        for (position, c) in text.chars().enumerate() {
            match c {
                '.' if point.is_none() => point = Some(digits.len()),
                _ => digits.push(c.to_digit(10).ok_or(RepError::MalformedDigit {
                    digit: u32::MAX,
                    position,
                    base,
                })?),
            }
        }
        Self::new(digits, base, point)
    }

    pub fn digits(&self) -> &[u32] {
        &self.digits
    }

    pub fn base(&self) -> u32 {
        self.base
    }

    pub fn point(&self) -> Option<usize> {
        self.point
    }
}

/// Exact place-value sum: `Σ d_i · b^(position of i)`, negative powers to
/// the right of the point.
pub fn digital_value(numeral: &NumeralString) -> BigRational {
    let base = BigRational::from_integer(BigInt::from(numeral.base));
    let int_len = numeral.point.unwrap_or(numeral.digits.len());
    let mut value = BigRational::zero();
    let mut weight = BigRational::one();
    // Integer part, least significant digit first.
    for &d in numeral.digits[..int_len].iter().rev() {
        value += &weight * BigInt::from(d);
        weight *= &base;
    }
    let mut weight = BigRational::one();
    for &d in &numeral.digits[int_len..] {
        weight /= &base;
        value += &weight * BigInt::from(d);
    }
    value
}

/// Whether a unary numeral of `digit_count` strokes has the same value for
/// every radix-point placement in `point_positions`. It always does, since
/// every power of one is one; positions beyond the numeral are skipped.
pub fn unary_point_invariance(
    digit_count: usize,
    point_positions: impl IntoIterator<Item = usize>,
) -> bool {
    if digit_count == 0 {
        return false;
    }
    let plain = digital_value(
        &NumeralString::new(vec![1; digit_count], 1, None).expect("unary numeral"),
    );
    point_positions
        .into_iter()
        .filter(|&p| p <= digit_count)
        .all(|p| {
            let n = NumeralString::new(vec![1; digit_count], 1, Some(p)).expect("unary numeral");
            digital_value(&n) == plain
        })
}
