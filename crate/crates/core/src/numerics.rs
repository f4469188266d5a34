//! Precision policies and reduced-precision complex arithmetic.
//!
//! All values are stored as `f64`. A [`PrecisionSpec`] narrows the set of
//! values an operation may produce by rounding its result to a given number
//! of fractional significand bits, round-to-nearest-even, while keeping the
//! full binary64 exponent range. Rounding happens once per arithmetic result
//! (one complex add, subtract or multiply), never inside the products that
//! make up a complex multiply.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};

/// One complex value. Its components are restricted to the value set of
/// the [`PrecisionSpec`] that produced it.
pub type ComplexSample = Complex64;

const F64_MANTISSA_BITS: u8 = 52;
const F32_MANTISSA_BITS: u8 = 23;

/// Fractional significand width of an emulated format, in `1..=52`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MantissaBits(u8);

impl MantissaBits {
    pub fn new(bits: u8) -> Result<Self> {
        if (1..=F64_MANTISSA_BITS).contains(&bits) {
            Ok(MantissaBits(bits))
        } else {
            Err(Error::Configuration(format!(
                "custom mantissa width must be in 1..=52, got {bits}"
            )))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

/// Precision policy applied to every arithmetic result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum PrecisionSpec {
    /// Native binary64, no rounding.
    Double,
    /// binary32 significand (23 bits) on the binary64 exponent range.
    Single,
    /// Arbitrary significand width on the binary64 exponent range.
    Custom(MantissaBits),
}

impl PrecisionSpec {
    pub fn custom(bits: u8) -> Result<Self> {
        MantissaBits::new(bits).map(PrecisionSpec::Custom)
    }

    pub fn mantissa_bits(self) -> u8 {
        match self {
            PrecisionSpec::Double => F64_MANTISSA_BITS,
            PrecisionSpec::Single => F32_MANTISSA_BITS,
            PrecisionSpec::Custom(m) => m.get(),
        }
    }

    /// Unit roundoff: half the spacing of representable values at 1.0.
    pub fn unit_roundoff(self) -> f64 {
        (-(f64::from(self.mantissa_bits()) + 1.0)).exp2()
    }

    /// Spacing of representable values in `[1, 2)`.
    pub fn ulp_at_one(self) -> f64 {
        (-f64::from(self.mantissa_bits())).exp2()
    }

    #[inline]
    pub fn round(self, v: f64) -> f64 {
        round_to_precision(v, self)
    }

    #[inline]
    pub fn round_complex(self, c: ComplexSample) -> ComplexSample {
        if self.is_exact() {
            return c;
        }
        ComplexSample::new(self.round(c.re), self.round(c.im))
    }

    #[inline]
    pub fn add(self, a: ComplexSample, b: ComplexSample) -> ComplexSample {
        self.round_complex(a + b)
    }

    #[inline]
    pub fn sub(self, a: ComplexSample, b: ComplexSample) -> ComplexSample {
        self.round_complex(a - b)
    }

    /// Complex multiply with the real and imaginary parts each rounded once.
    #[inline]
    pub fn mul(self, a: ComplexSample, b: ComplexSample) -> ComplexSample {
        self.round_complex(a * b)
    }

    #[inline]
    pub fn scale(self, a: ComplexSample, s: f64) -> ComplexSample {
        self.round_complex(a * s)
    }

    /// Code used by the tensor file format: 0 double, 1 single, 2 custom.
    pub fn code(self) -> u8 {
        match self {
            PrecisionSpec::Double => 0,
            PrecisionSpec::Single => 1,
            PrecisionSpec::Custom(_) => 2,
        }
    }

    pub fn from_code(code: u8, mantissa_bits: u8) -> Result<Self> {
        match (code, mantissa_bits) {
            (0, F64_MANTISSA_BITS) => Ok(PrecisionSpec::Double),
            (1, F32_MANTISSA_BITS) => Ok(PrecisionSpec::Single),
            (2, m) => PrecisionSpec::custom(m),
            (c, m) => Err(Error::Configuration(format!(
                "invalid precision code {c} with mantissa width {m}"
            ))),
        }
    }

    fn is_exact(self) -> bool {
        self.mantissa_bits() == F64_MANTISSA_BITS
    }
}

impl fmt::Display for PrecisionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PrecisionSpec::Double => f.write_str("double"),
            PrecisionSpec::Single => f.write_str("single"),
            PrecisionSpec::Custom(m) => write!(f, "custom:{}", m.get()),
        }
    }
}

impl FromStr for PrecisionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "double" | "f64" => Ok(PrecisionSpec::Double),
            "single" | "f32" => Ok(PrecisionSpec::Single),
            other => {
                let bits = other
                    .strip_prefix("custom:")
                    .and_then(|b| b.parse::<u8>().ok())
                    .ok_or_else(|| Error::Configuration(format!("unknown precision '{s}'")))?;
                PrecisionSpec::custom(bits)
            }
        }
    }
}

impl From<PrecisionSpec> for String {
    fn from(p: PrecisionSpec) -> String {
        p.to_string()
    }
}

impl TryFrom<String> for PrecisionSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Round `v` to `spec.mantissa_bits()` fractional significand bits,
/// ties to even. NaN and infinities pass through unchanged.
pub fn round_to_precision(v: f64, spec: PrecisionSpec) -> f64 {
    let drop = u32::from(F64_MANTISSA_BITS - spec.mantissa_bits());
    if drop == 0 || !v.is_finite() {
        return v;
    }
    let bits = v.to_bits();
    let mask = (1u64 << drop) - 1;
    let half = 1u64 << (drop - 1);
    let rem = bits & mask;
    let mut kept = bits & !mask;
    let lsb = (bits >> drop) & 1;
    if rem > half || (rem == half && lsb == 1) {
        // a carry out of the significand bumps the exponent, which is the
        // correctly rounded result
        kept += 1u64 << drop;
    }
    f64::from_bits(kept)
}

/// `exp(-2πi·k/n)` evaluated at binary64 with exact values on the axes.
pub(crate) fn unit_root(n: usize, k: usize) -> ComplexSample {
    debug_assert!(k < n);
    if n.is_multiple_of(4) {
        let quarter = n / 4;
        let q = k / quarter;
        let r = k % quarter;
        let theta = std::f64::consts::TAU * r as f64 / n as f64;
        let (s, c) = theta.sin_cos();
        let w = if r == 0 { ComplexSample::new(1.0, 0.0) } else { ComplexSample::new(c, -s) };
        // multiply by (-i)^q
        match q {
            0 => w,
            1 => ComplexSample::new(w.im, -w.re),
            2 => ComplexSample::new(-w.re, -w.im),
            _ => ComplexSample::new(-w.im, w.re),
        }
    } else if 2 * k == n {
        ComplexSample::new(-1.0, 0.0)
    } else if k == 0 {
        ComplexSample::new(1.0, 0.0)
    } else {
        let (s, c) = (std::f64::consts::TAU * k as f64 / n as f64).sin_cos();
        ComplexSample::new(c, -s)
    }
}

/// Twiddle factor `W_n^k = exp(-2πi·k/n)`, evaluated at binary64 and then
/// rounded to `spec`.
pub fn twiddle(n: usize, k: usize, spec: PrecisionSpec) -> Result<ComplexSample> {
    if n == 0 {
        return Err(contract("twiddle requires n >= 1"));
    }
    if k >= n {
        return Err(contract(format!("twiddle index {k} out of range for n = {n}")));
    }
    Ok(spec.round_complex(unit_root(n, k)))
}
