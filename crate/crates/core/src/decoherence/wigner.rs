//! Angular-momentum quantum numbers and Wigner 6j symbols.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;

/// Nonnegative integer or half-integer angular momentum, stored doubled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Spin(u32);

impl Spin {
    pub const ZERO: Spin = Spin(0);
    pub const HALF: Spin = Spin(1);
    pub const ONE: Spin = Spin(2);

    /// Spin with value `twice / 2`.
    pub const fn from_twice(twice: u32) -> Self {
        Spin(twice)
    }

    pub const fn integer(j: u32) -> Self {
        Spin(2 * j)
    }

    pub fn from_f64(j: f64) -> Option<Self> {
        let twice = 2.0 * j;
        (twice >= 0.0 && twice.fract() == 0.0 && twice <= u32::MAX as f64).then_some(Spin(twice as u32))
    }

    pub const fn twice(self) -> u32 {
        self.0
    }

    pub fn value(self) -> f64 {
        0.5 * self.0 as f64
    }

    /// `2j + 1`.
    pub fn multiplicity(self) -> f64 {
        (self.0 + 1) as f64
    }

    /// All `j` with `|a - b| <= j <= a + b`.
    pub fn coupled(a: Spin, b: Spin) -> impl Iterator<Item = Spin> {
        let lo = a.0.abs_diff(b.0);
        (lo..=a.0 + b.0).step_by(2).map(Spin)
    }
}

impl fmt::Display for Spin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_multiple_of(2) {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}

impl FromStr for Spin {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let value = match s.split_once('/') {
            Some((num, den)) => {
                let num: f64 = num.trim().parse().map_err(|_| format!("bad numerator in `{s}`"))?;
                let den: f64 = den.trim().parse().map_err(|_| format!("bad denominator in `{s}`"))?;
                if den != 2.0 && den != 1.0 {
                    return Err(format!("`{s}` is not an integer or half-integer"));
                }
                num / den
            }
            None => s.parse().map_err(|_| format!("`{s}` is not a number"))?,
        };
        Spin::from_f64(value).ok_or_else(|| format!("`{s}` is not a nonnegative integer or half-integer"))
    }
}

/// `|a - b| <= c <= a + b` with `a + b + c` integer.
pub fn triangle(a: Spin, b: Spin, c: Spin) -> bool {
    let (a, b, c) = (a.0, b.0, c.0);
    c >= a.abs_diff(b) && c <= a + b && (a + b + c) % 2 == 0
}

/// `ln Delta(abc)` for a valid triad, in doubled units.
fn ln_triangle_coefficient(a: u32, b: u32, c: u32) -> f64 {
    let f = |x: u32| ln_factorial(x as u64);
    0.5 * (f((a + b - c) / 2) + f((a + c - b) / 2) + f((b + c - a) / 2) - f((a + b + c) / 2 + 1))
}

/// Wigner 6j symbol `{j1 j2 j3; j4 j5 j6}` by the Racah single-sum formula.
///
/// Returns exactly 0 when any of the four triads `(j1 j2 j3)`, `(j1 j5 j6)`,
/// `(j4 j2 j6)`, `(j4 j5 j3)` violates the triangle rule.
pub fn wigner_6j(j1: Spin, j2: Spin, j3: Spin, j4: Spin, j5: Spin, j6: Spin) -> f64 {
    if !(triangle(j1, j2, j3) && triangle(j1, j5, j6) && triangle(j4, j2, j6) && triangle(j4, j5, j3)) {
        return 0.0;
    }
    let (a, b, c, d, e, f) = (j1.0, j2.0, j3.0, j4.0, j5.0, j6.0);
    let ln_delta = ln_triangle_coefficient(a, b, c)
        + ln_triangle_coefficient(a, e, f)
        + ln_triangle_coefficient(d, b, f)
        + ln_triangle_coefficient(d, e, c);
    // Triad sums and pair sums, all even in doubled units.
    let triads = [a + b + c, a + e + f, d + b + f, d + e + c];
    let pairs = [a + b + d + e, a + c + d + f, b + c + e + f];
    let t_min = triads.iter().max().unwrap() / 2;
    let t_max = pairs.iter().min().unwrap() / 2;
    let lf = |x: u32| ln_factorial(x as u64);
    let mut sum = 0.0;
    for t in t_min..=t_max {
        let mut ln_term = lf(t + 1);
        for s in triads {
            ln_term -= lf(t - s / 2);
        }
        for p in pairs {
            ln_term -= lf(p / 2 - t);
        }
        let term = (ln_term + ln_delta).exp();
        sum += if t % 2 == 0 { term } else { -term };
    }
    sum
}
