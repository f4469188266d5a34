//! Precision tolerance of a plane-wave energy.
//!
//! The Hartree energy of a periodic charge density is evaluated in
//! reciprocal space,
//!
//! ```text
//! ρ̂(k) = h³ · FFT(ρ)(k)
//! E    = (2π / L³) · Σ_{k≠0} |ρ̂(k)|² / |k|²
//! ```
//!
//! with `k = 2π·m/L`, `m ∈ [−n/2, n/2)` per axis. The `k = 0` term is
//! dropped (neutralizing background). All data passes through the 3D FFT,
//! so running the same computation under different [`PrecisionSpec`]s shows
//! how transform rounding reaches the total energy.

use serde::Serialize;

use crate::error::{contract, Error, Result};
use crate::fft1d::Direction;
use crate::fft3d::Plan;
use crate::layout::Tensor3;
use crate::numerics::{ComplexSample, PrecisionSpec};
use crate::oracle::{sum_norm_sqr, CompensatedSum};

/// Madelung constant of a simple cubic lattice of point charges in a
/// uniform neutralizing background.
pub const CUBIC_MADELUNG: f64 = 2.837_297_479_480_619;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub n: usize,
    pub box_length: f64,
}

impl GridSpec {
    pub fn new(n: usize, box_length: f64) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::UnsupportedSize { n, rule: "grid edge must be a power of two" });
        }
        if !(box_length > 0.0 && box_length.is_finite()) {
            return Err(Error::Configuration(format!("box length must be positive, got {box_length}")));
        }
        Ok(GridSpec { n, box_length })
    }

    pub fn spacing(&self) -> f64 {
        self.box_length / self.n as f64
    }

    pub fn center(&self) -> [f64; 3] {
        [0.5 * self.box_length; 3]
    }

    fn volume(&self) -> f64 {
        self.box_length.powi(3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyResult {
    pub energy: f64,
    pub precision: PrecisionSpec,
    /// The `k = 0` term is always excluded.
    pub k0_dropped: bool,
}

/// Smallest accepted `sigma / spacing`.
pub const MIN_SIGMA_PER_SPACING: f64 = 1.5;

/// Samples `ρ(r) = q·(2πσ²)^{-3/2}·exp(−|r − c|²/(2σ²))` at `r = h·(x, y, z)`
/// using minimum-image distances.
pub fn gaussian_density(g: &GridSpec, q: f64, sigma: f64, center: [f64; 3]) -> Result<Tensor3> {
    let h = g.spacing();
    if !(sigma >= MIN_SIGMA_PER_SPACING * h) {
        return Err(Error::Resolution { sigma, spacing: h });
    }
    if center.iter().any(|c| !(0.0..g.box_length).contains(c)) {
        return Err(contract(format!("center {center:?} lies outside the box [0, {})", g.box_length)));
    }
    let l = g.box_length;
    let axis: Vec<[f64; 3]> = (0..g.n)
        .map(|i| {
            let r = i as f64 * h;
            let mut d = [0.0; 3];
            for (dk, ck) in d.iter_mut().zip(center) {
                let raw = r - ck;
                let wrapped = raw - l * (raw / l).round();
                *dk = wrapped * wrapped;
            }
            d
        })
        .collect();
    let norm = q * (2.0 * std::f64::consts::PI * sigma * sigma).powf(-1.5);
    let inv = 1.0 / (2.0 * sigma * sigma);
    Tensor3::from_fn(g.n, |x, y, z| {
        let r2 = axis[x][0] + axis[y][1] + axis[z][2];
        ComplexSample::new(norm * (-r2 * inv).exp(), 0.0)
    })
}

/// Signed frequency of FFT bin `i`, in `[−n/2, n/2)`.
fn signed_bin(i: usize, n: usize) -> f64 {
    if i < n / 2 {
        i as f64
    } else {
        i as f64 - n as f64
    }
}

pub fn hartree_energy(rho: &Tensor3, g: &GridSpec, plan: &Plan) -> Result<EnergyResult> {
    let n = g.n;
    if rho.n() != n || plan.n() != n {
        return Err(contract(format!(
            "density {}^3, grid {n}^3 and plan {}^3 must agree",
            rho.n(),
            plan.n()
        )));
    }
    let imag: f64 = rho.data().iter().map(|v| v.im * v.im).sum::<f64>().sqrt();
    let total = sum_norm_sqr(rho.data()).sqrt();
    if imag > 1e-12 * total {
        return Err(contract(format!("density is not real (imaginary norm {imag:e})")));
    }

    let spectrum = plan.execute(rho, Direction::Forward)?;
    let h3 = g.spacing().powi(3);
    let dk = 2.0 * std::f64::consts::PI / g.box_length;
    let k2: Vec<f64> = (0..n).map(|i| (dk * signed_bin(i, n)).powi(2)).collect();

    let mut acc = CompensatedSum::default();
    for (i, v) in spectrum.data().iter().enumerate().skip(1) {
        let (x, y, z) = spectrum.coords_of(i);
        acc.add((v * h3).norm_sqr() / (k2[x] + k2[y] + k2[z]));
    }
    Ok(EnergyResult {
        energy: 2.0 * std::f64::consts::PI / g.volume() * acc.total(),
        precision: plan.precision(),
        k0_dropped: true,
    })
}

/// Self-energy `q²/(2√π·σ)` of an isolated Gaussian charge.
pub fn isolated_gaussian_energy(q: f64, sigma: f64) -> f64 {
    q * q / (2.0 * std::f64::consts::PI.sqrt() * sigma)
}

/// Closed form of [`hartree_energy`] for one Gaussian per cubic cell of
/// edge `l` in a neutralizing background:
/// `q²/(2√πσ) − ξ·q²/(2L) + 2π·q²·σ²/L³`, with ξ the cubic Madelung
/// constant. Terms of order `erfc(L/2σ)` are neglected.
pub fn periodic_gaussian_energy(q: f64, sigma: f64, l: f64) -> f64 {
    isolated_gaussian_energy(q, sigma) - CUBIC_MADELUNG * q * q / (2.0 * l)
        + 2.0 * std::f64::consts::PI * q * q * sigma * sigma / l.powi(3)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub precision: PrecisionSpec,
    pub energy: f64,
    pub rel_error_vs_double: f64,
}

/// Hartree energy of a box-centered Gaussian under each precision, with
/// deviations relative to the binary64 result.
pub fn precision_sweep(g: &GridSpec, q: f64, sigma: f64, specs: &[PrecisionSpec]) -> Result<Vec<SweepRow>> {
    if specs.is_empty() {
        return Err(contract("precision sweep needs at least one precision"));
    }
    let rho = gaussian_density(g, q, sigma, g.center())?;
    let energy = |spec: PrecisionSpec| -> Result<f64> {
        let plan = Plan::with_defaults(g.n, spec)?;
        Ok(hartree_energy(&rho, g, &plan)?.energy)
    };
    let reference = energy(PrecisionSpec::Double)?;
    specs
        .iter()
        .map(|&spec| {
            let e = if spec.mantissa_bits() == PrecisionSpec::Double.mantissa_bits() {
                reference
            } else {
                energy(spec)?
            };
            let rel = if reference == 0.0 { (e - reference).abs() } else { ((e - reference) / reference).abs() };
            Ok(SweepRow { precision: spec, energy: e, rel_error_vs_double: rel })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> GridSpec {
        GridSpec::new(n, 10.0).unwrap()
    }

    fn energy(n: usize, q: f64, center: [f64; 3]) -> f64 {
        let g = grid(n);
        let rho = gaussian_density(&g, q, 0.5, center).unwrap();
        hartree_energy(&rho, &g, &Plan::with_defaults(n, PrecisionSpec::Double).unwrap()).unwrap().energy
    }

    #[test]
    fn zero_charge_gives_zero() {
        let g = grid(16);
        let rho = gaussian_density(&g, 0.0, 1.0, g.center()).unwrap();
        assert!(rho.data().iter().all(|v| *v == ComplexSample::new(0.0, 0.0)));
        let e = hartree_energy(&rho, &g, &Plan::with_defaults(16, PrecisionSpec::Double).unwrap()).unwrap();
        assert_eq!(e.energy, 0.0);
        assert!(e.k0_dropped);
    }

    #[test]
    fn density_integrates_to_charge() {
        let g = grid(64);
        let rho = gaussian_density(&g, 1.0, 0.5, g.center()).unwrap();
        let total: f64 = rho.data().iter().map(|v| v.re).sum::<f64>() * g.spacing().powi(3);
        assert!((total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn centered_density_is_reflection_symmetric() {
        let g = grid(32);
        let rho = gaussian_density(&g, 1.0, 0.7, g.center()).unwrap();
        let n = g.n;
        for z in 0..n {
            for y in 0..n {
                for x in 1..n {
                    assert!((rho[(x, y, z)].re - rho[(n - x, y, z)].re).abs() <= 1e-15 * rho[(x, y, z)].re.max(1e-300));
                }
            }
        }
    }

    #[test]
    fn resolution_and_placement_guards() {
        let g = grid(16);
        assert!(matches!(gaussian_density(&g, 1.0, 0.01, g.center()), Err(Error::Resolution { .. })));
        assert!(gaussian_density(&g, 1.0, 1.0, [10.0, 0.0, 0.0]).is_err());
        assert!(GridSpec::new(12, 10.0).is_err());
        assert!(GridSpec::new(16, 0.0).is_err());
    }

    #[test]
    fn complex_density_is_rejected() {
        let g = grid(8);
        let rho = Tensor3::from_fn(8, |_, _, _| ComplexSample::new(1.0, 1e-3)).unwrap();
        let plan = Plan::with_defaults(8, PrecisionSpec::Double).unwrap();
        assert!(matches!(hartree_energy(&rho, &g, &plan), Err(Error::ContractViolation(_))));
        let other = Plan::with_defaults(16, PrecisionSpec::Double).unwrap();
        assert!(hartree_energy(&rho.map(|v| v.re.into()), &g, &other).is_err());
    }

    #[test]
    fn energy_is_quadratic_in_charge() {
        let e1 = energy(32, 1.0, grid(32).center());
        let e2 = energy(32, 2.0, grid(32).center());
        assert!(e1 > 0.0);
        assert!((e2 - 4.0 * e1).abs() <= 8.0 * f64::EPSILON * e2);
    }

    #[test]
    fn matches_periodic_closed_form() {
        // frozen from an independent numpy evaluation at 128^3: 0.42389550590052
        let analytic = periodic_gaussian_energy(1.0, 0.5, 10.0);
        assert!((analytic - 0.423_895_505_900_52).abs() < 1e-12);
        let e = energy(64, 1.0, grid(64).center());
        assert!(((e - analytic) / analytic).abs() < 1e-9, "{e}");
        assert!((isolated_gaussian_energy(1.0, 0.5) - 0.564_189_583_547_756).abs() < 1e-14);
    }

    #[test]
    fn translation_invariance() {
        let reference = energy(64, 1.0, [5.0, 5.0, 5.0]);
        for c in [[1.3, 7.7, 0.2], [9.9, 0.05, 4.44]] {
            let e = energy(64, 1.0, c);
            assert!(((e - reference) / reference).abs() < 1e-6);
        }
    }

    #[test]
    fn grid_convergence() {
        let c = [5.0; 3];
        let (e32, e64) = (energy(32, 1.0, c), energy(64, 1.0, c));
        assert!(((e32 - e64) / e64).abs() < 1e-3);
    }

    #[test]
    fn sweep_examples() {
        let g = grid(32);
        let rows = precision_sweep(&g, 1.0, 0.5, &[PrecisionSpec::Double, PrecisionSpec::Single]).unwrap();
        assert_eq!(rows[0].rel_error_vs_double, 0.0);
        assert!(rows[1].rel_error_vs_double < 1e-4);
        assert!(precision_sweep(&g, 1.0, 0.5, &[]).is_err());
        assert!(matches!(precision_sweep(&g, 1.0, 0.01, &[PrecisionSpec::Single]), Err(Error::Resolution { .. })));
    }
}
