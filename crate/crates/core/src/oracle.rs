//! Ground-truth references. Everything here runs at binary64 and shares no
//! code with the transform pipeline except [`separable_fft3d`], which reuses
//! the 1D kernel on purpose to isolate the transposes.

use serde::Serialize;

use crate::error::{contract, Error, Result};
use crate::fft1d::{fft1d, Direction};
use crate::layout::Tensor3;
use crate::numerics::{ComplexSample, PrecisionSpec};

/// Largest edge the brute-force DFT accepts without `allow_large`.
pub const BRUTEFORCE_LIMIT: usize = 32;

/// Direct evaluation of the triple sum
/// `F(k) = Σ_z Σ_y Σ_x f(x, y, z)·W^{x·kx}·W^{y·ky}·W^{z·kz}`, `W = exp(-2πi/n)`.
///
/// Costs O(n⁶); refused above [`BRUTEFORCE_LIMIT`] unless `allow_large`.
pub fn dft3d_bruteforce(t: &Tensor3, allow_large: bool) -> Result<Tensor3> {
    let n = t.n();
    if n > BRUTEFORCE_LIMIT && !allow_large {
        return Err(Error::TooExpensive { n, limit: BRUTEFORCE_LIMIT });
    }
    // W^{a}·W^{b}·W^{c} = W^{(a+b+c) mod n}
    let roots: Vec<ComplexSample> = (0..n)
        .map(|j| ComplexSample::from_polar(1.0, -std::f64::consts::TAU * j as f64 / n as f64))
        .collect();
    Tensor3::from_fn(n, |kx, ky, kz| {
        let mut acc = ComplexSample::new(0.0, 0.0);
        for z in 0..n {
            for y in 0..n {
                let base = (y * ky + z * kz) % n;
                for x in 0..n {
                    acc += t[(x, y, z)] * roots[(base + x * kx) % n];
                }
            }
        }
        acc
    })
}

/// Three passes of the 1D FFT along x, y and z by strided gather/scatter,
/// with no transposes. Used to check the pipeline's data movement.
pub fn separable_fft3d(t: &Tensor3, direction: Direction, spec: PrecisionSpec) -> Result<Tensor3> {
    let n = t.n();
    let mut out = t.clone();
    let mut pencil = vec![ComplexSample::new(0.0, 0.0); n];
    for axis in 0..3 {
        for a in 0..n {
            for b in 0..n {
                let idx = |i: usize| match axis {
                    0 => (i, a, b),
                    1 => (a, i, b),
                    _ => (a, b, i),
                };
                for (i, p) in pencil.iter_mut().enumerate() {
                    *p = out[idx(i)];
                }
                for (i, v) in fft1d(&pencil, direction, spec)?.into_iter().enumerate() {
                    out[idx(i)] = v;
                }
            }
        }
    }
    Ok(out)
}

/// Difference between a tensor under test and a reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorReport {
    /// `‖a − b‖₂ / ‖b‖₂`; zero when the reference is zero (see `reference_is_zero`).
    pub l2_rel: f64,
    /// Largest complex modulus of `a − b`.
    pub linf_abs: f64,
    /// `(x, y, z)` of the largest difference.
    pub worst_index: (usize, usize, usize),
    /// Set when `‖b‖₂ = 0`, in which case `l2_rel` is reported as 0 and only
    /// `linf_abs` is meaningful.
    pub reference_is_zero: bool,
}

pub fn error_metrics(a: &Tensor3, b: &Tensor3) -> Result<ErrorReport> {
    if a.n() != b.n() {
        return Err(contract(format!("comparing a {}^3 tensor with a {}^3 tensor", a.n(), b.n())));
    }
    let mut diff = CompensatedSum::default();
    let mut reference = CompensatedSum::default();
    let mut linf_abs = 0.0;
    let mut worst = 0;
    for (i, (x, y)) in a.data().iter().zip(b.data()).enumerate() {
        let d = x - y;
        diff.add(d.norm_sqr());
        reference.add(y.norm_sqr());
        let m = d.norm();
        if m > linf_abs {
            linf_abs = m;
            worst = i;
        }
    }
    let (num, den) = (diff.total(), reference.total());
    let reference_is_zero = den == 0.0;
    let l2_rel = if reference_is_zero { 0.0 } else { (num / den).sqrt() };
    Ok(ErrorReport { l2_rel, linf_abs, worst_index: a.coords_of(worst), reference_is_zero })
}

/// `Σ|v|²` with compensated summation, so that Parseval checks are limited
/// by the transform's error and not by the accumulation.
pub fn sum_norm_sqr(data: &[ComplexSample]) -> f64 {
    let mut s = CompensatedSum::default();
    for v in data {
        s.add(v.norm_sqr());
    }
    s.total()
}

/// Neumaier summation.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.carry
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, seed: u64) -> Tensor3 {
        Tensor3::random(n, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn impulse_gives_ones() {
        let mut t = Tensor3::zeros(4).unwrap();
        t[(0, 0, 0)] = ComplexSample::new(1.0, 0.0);
        let f = dft3d_bruteforce(&t, false).unwrap();
        assert!(f.data().iter().all(|&v| v == ComplexSample::new(1.0, 0.0)));
    }

    #[test]
    fn single_mode_concentrates() {
        // Σ_x exp(2πi·(m − k)·x/n) = n·δ(m, k): exp(+2πi·x/n) lands on kx = 1,
        // exp(−2πi·x/n) on kx = n − 1
        let n = 8;
        for (sign, bin) in [(1.0, (1, 0, 0)), (-1.0, (7, 0, 0))] {
            let t = Tensor3::from_fn(n, |x, _, _| {
                ComplexSample::from_polar(1.0, sign * std::f64::consts::TAU * x as f64 / n as f64)
            })
            .unwrap();
            let f = dft3d_bruteforce(&t, false).unwrap();
            for (i, v) in f.data().iter().enumerate() {
                let expected = if f.coords_of(i) == bin { 512.0 } else { 0.0 };
                assert!((v - ComplexSample::new(expected, 0.0)).norm() < 1e-9, "{:?}", f.coords_of(i));
            }
        }
    }

    #[test]
    fn size_guard() {
        let t = Tensor3::zeros(64).unwrap();
        assert!(matches!(dft3d_bruteforce(&t, false), Err(Error::TooExpensive { n: 64, .. })));
    }

    #[test]
    fn parseval_at_binary64() {
        for n in [2, 4, 8, 16] {
            let t = random(n, 9);
            let f = dft3d_bruteforce(&t, false).unwrap();
            let lhs = sum_norm_sqr(t.data());
            let rhs = sum_norm_sqr(f.data()) / (n * n * n) as f64;
            assert!(((lhs - rhs) / lhs).abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn metrics_examples() {
        let t = random(4, 1);
        let same = error_metrics(&t, &t).unwrap();
        assert_eq!((same.l2_rel, same.linf_abs), (0.0, 0.0));

        let zero = Tensor3::zeros(4).unwrap();
        let z = error_metrics(&zero, &zero).unwrap();
        assert_eq!(z.l2_rel, 0.0);
        assert!(z.reference_is_zero);

        let doubled = t.map(|v| v * 2.0);
        assert!((error_metrics(&t, &doubled).unwrap().l2_rel - 0.5).abs() < 1e-15);

        assert!(error_metrics(&t, &random(8, 1)).is_err());
    }

    #[test]
    fn metrics_locate_worst_point() {
        let a = Tensor3::zeros(4).unwrap();
        let mut b = a.clone();
        b[(1, 2, 3)] = ComplexSample::new(0.0, -3.0);
        b[(0, 0, 1)] = ComplexSample::new(1.0, 0.0);
        let r = error_metrics(&a, &b).unwrap();
        assert_eq!(r.worst_index, (1, 2, 3));
        assert_eq!(r.linf_abs, 3.0);
        assert!((r.l2_rel - 1.0).abs() < 1e-15);
    }

    #[test]
    fn l2_rel_is_scale_invariant() {
        let a = random(4, 2);
        let b = random(4, 3);
        let base = error_metrics(&a, &b).unwrap().l2_rel;
        for s in [1e-8, 0.3, -2.0, 1e12] {
            let scaled = error_metrics(&a.map(|v| v * s), &b.map(|v| v * s)).unwrap().l2_rel;
            assert!(((scaled - base) / base).abs() < 1e-13);
        }
    }
}
