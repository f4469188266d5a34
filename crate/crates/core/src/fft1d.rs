//! Radix-2 decimation-in-time FFT with an explicit bit-reversal stage.
//!
//! The streaming kernel this mirrors consumes 8 points per cycle, so an
//! n-point transform takes n/8 steps. That lane structure is captured by
//! [`StageSchedule`] and consumed by the latency model; the arithmetic
//! itself is lane-count independent.

use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::numerics::{unit_root, ComplexSample, PrecisionSpec};

/// Points consumed per step by the streaming kernel.
pub const POINTS_PER_STEP: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Unnormalized `Σ x[j]·W^{jk}`.
    Forward,
    /// Conjugate transform scaled by `1/n`.
    Inverse,
}

/// Step structure of an n-point transform on the 8-lane streaming kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSchedule {
    pub n: usize,
    /// Butterfly stages, `log2 n`.
    pub stages: u32,
    /// Steps of `points_per_step` points needed to stream one transform.
    pub steps: usize,
    pub points_per_step: usize,
}

pub fn make_schedule(n: usize) -> Result<StageSchedule> {
    if !n.is_power_of_two() || n < POINTS_PER_STEP {
        return Err(Error::UnsupportedSize {
            n,
            rule: "the streaming kernel needs a power of two n >= 8",
        });
    }
    Ok(StageSchedule {
        n,
        stages: n.trailing_zeros(),
        steps: n / POINTS_PER_STEP,
        points_per_step: POINTS_PER_STEP,
    })
}

/// Index permutation mapping position `i` to the `log2 n`-bit reversal of `i`.
pub fn bit_reverse_permutation(n: usize) -> Result<Vec<usize>> {
    if !n.is_power_of_two() {
        return Err(contract(format!("bit reversal needs a power of two, got {n}")));
    }
    let bits = n.trailing_zeros();
    if bits == 0 {
        return Ok(vec![0]);
    }
    Ok((0..n).map(|i| i.reverse_bits() >> (usize::BITS - bits)).collect())
}

/// A precomputed n-point radix-2 transform at a fixed precision.
///
/// Twiddles are evaluated once at binary64 and rounded to the precision;
/// the table is immutable and may be shared between threads.
#[derive(Debug, Clone)]
pub struct Radix2 {
    n: usize,
    spec: PrecisionSpec,
    twiddles: Vec<ComplexSample>,
    bitrev: Vec<usize>,
}

impl Radix2 {
    pub fn new(n: usize, spec: PrecisionSpec) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::UnsupportedSize { n, rule: "radix-2 FFT needs a power of two n >= 2" });
        }
        let twiddles = (0..n / 2).map(|k| spec.round_complex(unit_root(n, k))).collect();
        Ok(Radix2 { n, spec, twiddles, bitrev: bit_reverse_permutation(n)? })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn precision(&self) -> PrecisionSpec {
        self.spec
    }

    /// `W_n^k` for `k < n/2`, already rounded to the plan's precision.
    pub fn twiddles(&self) -> &[ComplexSample] {
        &self.twiddles
    }

    /// Transform `data` in place. Input values are first rounded to the
    /// plan's precision; output is in natural order.
    pub fn process(&self, data: &mut [ComplexSample], direction: Direction) -> Result<()> {
        if data.len() != self.n {
            return Err(contract(format!(
                "FFT of length {} given {} samples",
                self.n,
                data.len()
            )));
        }
        self.process_unchecked(data, direction);
        Ok(())
    }

    pub(crate) fn process_unchecked(&self, data: &mut [ComplexSample], direction: Direction) {
        let spec = self.spec;
        let n = self.n;
        for v in data.iter_mut() {
            *v = spec.round_complex(*v);
        }
        for (i, &j) in self.bitrev.iter().enumerate() {
            if i < j {
                data.swap(i, j);
            }
        }

        let mut span = 2;
        while span <= n {
            let half = span / 2;
            let stride = n / span;
            for block in data.chunks_exact_mut(span) {
                let (lo, hi) = block.split_at_mut(half);
                for (j, (a, b)) in lo.iter_mut().zip(hi.iter_mut()).enumerate() {
                    let mut w = self.twiddles[j * stride];
                    if direction == Direction::Inverse {
                        w = w.conj();
                    }
                    let t = spec.mul(w, *b);
                    let u = *a;
                    *a = spec.add(u, t);
                    *b = spec.sub(u, t);
                }
            }
            span *= 2;
        }

        if direction == Direction::Inverse {
            let inv = 1.0 / n as f64;
            for v in data.iter_mut() {
                *v = spec.scale(*v, inv);
            }
        }
    }
}

/// One-shot n-point FFT of `x` at precision `spec`.
pub fn fft1d(
    x: &[ComplexSample],
    direction: Direction,
    spec: PrecisionSpec,
) -> Result<Vec<ComplexSample>> {
    let plan = Radix2::new(x.len(), spec)?;
    let mut out = x.to_vec();
    plan.process_unchecked(&mut out, direction);
    Ok(out)
}
