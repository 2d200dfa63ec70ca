//! Extended reals: finite `f64` values plus a distinguished `-inf` element.
//!
//! `-inf` is an enum variant rather than `f64::NEG_INFINITY` so that equality
//! and serialization are exact. Addition absorbs (`-inf + x = -inf`), max is
//! the usual total order with `-inf` at the bottom. Finite payloads must not
//! be NaN or infinite; constructors enforce this.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

/// A finite real number or negative infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum XReal {
    /// The absorbing bottom element.
    NegInf,
    /// An ordinary finite value.
    Finite(f64),
}

impl XReal {
    pub const ZERO: XReal = XReal::Finite(0.0);

    /// Wraps a finite value. Panics on NaN or infinite input.
    pub fn finite(v: f64) -> Self {
        assert!(v.is_finite(), "XReal::finite requires a finite value, got {v}");
        XReal::Finite(v)
    }

    pub fn is_neg_inf(self) -> bool {
        matches!(self, XReal::NegInf)
    }

    /// The finite payload, if any.
    pub fn as_finite(self) -> Option<f64> {
        match self {
            XReal::NegInf => None,
            XReal::Finite(v) => Some(v),
        }
    }

    pub fn max(self, other: XReal) -> XReal {
        match (self, other) {
            (XReal::NegInf, x) | (x, XReal::NegInf) => x,
            (XReal::Finite(a), XReal::Finite(b)) => XReal::Finite(a.max(b)),
        }
    }

    /// Multiplies by a nonnegative scalar. Zero annihilates: `0 * -inf = 0`,
    /// which is what learning-rate extremes (`eta = 1`) require.
    pub fn scale(self, c: f64) -> XReal {
        assert!(c >= 0.0 && c.is_finite(), "scale factor must be finite and >= 0");
        if c == 0.0 {
            return XReal::ZERO;
        }
        match self {
            XReal::NegInf => XReal::NegInf,
            XReal::Finite(v) => XReal::Finite(c * v),
        }
    }
}

impl From<f64> for XReal {
    fn from(v: f64) -> Self {
        XReal::finite(v)
    }
}

impl Add for XReal {
    type Output = XReal;

    fn add(self, rhs: XReal) -> XReal {
        match (self, rhs) {
            (XReal::NegInf, _) | (_, XReal::NegInf) => XReal::NegInf,
            (XReal::Finite(a), XReal::Finite(b)) => XReal::Finite(a + b),
        }
    }
}

impl AddAssign for XReal {
    fn add_assign(&mut self, rhs: XReal) {
        *self = *self + rhs;
    }
}

impl PartialOrd for XReal {
    fn partial_cmp(&self, other: &XReal) -> Option<Ordering> {
        match (self, other) {
            (XReal::NegInf, XReal::NegInf) => Some(Ordering::Equal),
            (XReal::NegInf, XReal::Finite(_)) => Some(Ordering::Less),
            (XReal::Finite(_), XReal::NegInf) => Some(Ordering::Greater),
            (XReal::Finite(a), XReal::Finite(b)) => a.partial_cmp(b),
        }
    }
}

impl fmt::Display for XReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            XReal::NegInf => write!(f, "-inf"),
            XReal::Finite(v) => write!(f, "{v}"),
        }
    }
}
