//! Averaged wall-clock timing of the forward 3D transform.
//!
//! Each size gets a seeded random input and a plan built outside the timed
//! region. One warm-up run is discarded, then `iters` forward transforms are
//! timed individually on a monotonic clock.

use std::time::{Duration, Instant};

use ft3d_core::perfmodel::Measurement;
use ft3d_core::{Direction, Error, Plan, PrecisionSpec, Tensor3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Iteration count used for the reference measurements.
pub const DEFAULT_ITERS: usize = 100;

/// Source of monotonic timestamps. Injected so tests can check exactly
/// which work falls inside the timed window.
pub trait Clock {
    fn now(&mut self) -> Duration;
}

/// [`Instant`]-backed clock.
#[derive(Debug)]
pub struct MonotonicClock {
    origin: Instant,
}

impl Default for MonotonicClock {
    fn default() -> Self {
        MonotonicClock { origin: Instant::now() }
    }
}

impl Clock for MonotonicClock {
    fn now(&mut self) -> Duration {
        self.origin.elapsed()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchResult {
    pub n: usize,
    pub precision: PrecisionSpec,
    pub iters: usize,
    pub mean_ms: f64,
    pub stddev_ms: f64,
    pub min_ms: f64,
    /// Pencils of each phase were spread over the rayon pool.
    pub parallel: bool,
}

/// A size whose plan could not be built.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeFailure {
    pub n: usize,
    pub error: Error,
}

pub type BenchOutcome = Result<BenchResult, SizeFailure>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchOptions {
    pub precision: PrecisionSpec,
    pub iters: usize,
    pub seed: u64,
    pub parallel: bool,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions { precision: PrecisionSpec::Single, iters: DEFAULT_ITERS, seed: 0, parallel: false }
    }
}

/// Deterministic benchmark input for size `n`.
pub fn bench_input(n: usize, seed: u64) -> Result<Tensor3, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (n as u64).rotate_left(32));
    Tensor3::random(n, &mut rng)
}

pub fn run_bench(sizes: &[usize], opts: &BenchOptions) -> Result<Vec<BenchOutcome>, Error> {
    run_bench_with_clock(sizes, opts, &mut MonotonicClock::default())
}

/// Like [`run_bench`] with an explicit clock. Only `Plan::execute` runs
/// between the two clock reads of an iteration.
pub fn run_bench_with_clock<C: Clock>(
    sizes: &[usize],
    opts: &BenchOptions,
    clock: &mut C,
) -> Result<Vec<BenchOutcome>, Error> {
    if opts.iters == 0 {
        return Err(Error::Configuration("iteration count must be at least 1".into()));
    }
    Ok(sizes.iter().map(|&n| bench_size(n, opts, clock)).collect())
}

fn bench_size<C: Clock>(n: usize, opts: &BenchOptions, clock: &mut C) -> BenchOutcome {
    let fail = |error| SizeFailure { n, error };
    let plan = Plan::with_defaults(n, opts.precision).map_err(fail)?.with_parallelism(opts.parallel);
    let input = bench_input(n, opts.seed).map_err(fail)?;

    // warm-up, not recorded
    std::hint::black_box(plan.execute(&input, Direction::Forward).map_err(fail)?);

    let mut samples = Vec::with_capacity(opts.iters);
    for _ in 0..opts.iters {
        let start = clock.now();
        let out = plan.execute(std::hint::black_box(&input), Direction::Forward);
        let stop = clock.now();
        std::hint::black_box(out.map_err(fail)?);
        samples.push(stop.saturating_sub(start).as_secs_f64() * 1e3);
    }
    let (mean_ms, stddev_ms, min_ms) = summarize(&samples);
    Ok(BenchResult { n, precision: opts.precision, iters: opts.iters, mean_ms, stddev_ms, min_ms, parallel: opts.parallel })
}

/// Mean, sample standard deviation (0 for a single sample) and minimum.
fn summarize(samples: &[f64]) -> (f64, f64, f64) {
    let count = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / count;
    let var = if samples.len() > 1 {
        samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (count - 1.0)
    } else {
        0.0
    };
    let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
    // guard against the mean rounding just below the minimum
    (mean.max(min), var.sqrt(), min)
}

/// Host timing joined with a reference row of the same size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub n: usize,
    pub measured_ms: f64,
    pub fixture_kernel_ms: f64,
    pub fixture_fftw_ms: Option<f64>,
    /// `measured / fixture kernel`.
    pub ratio_vs_kernel: f64,
    /// `measured / fixture FFTW`, when the fixture has that column.
    pub ratio_vs_fftw: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    pub warnings: Vec<String>,
}

/// Joins host results with reference rows by size. Informational only:
/// the reference timings come from different hardware.
pub fn compare_against_fixture(results: &[BenchResult], fixture: &[Measurement]) -> Comparison {
    let mut cmp = Comparison::default();
    let mut skipped = Vec::new();
    for row in fixture {
        match results.iter().find(|r| r.n == row.n) {
            Some(r) => cmp.rows.push(ComparisonRow {
                n: row.n,
                measured_ms: r.mean_ms,
                fixture_kernel_ms: row.kernel_ms,
                fixture_fftw_ms: row.fftw_ms,
                ratio_vs_kernel: r.mean_ms / row.kernel_ms,
                ratio_vs_fftw: row.fftw_ms.map(|f| r.mean_ms / f),
            }),
            None => skipped.push(row.n),
        }
    }
    if cmp.rows.is_empty() {
        cmp.warnings.push("no size overlaps between results and fixture; comparison is empty".into());
    }
    if !skipped.is_empty() {
        cmp.warnings.push(format!("fixture sizes without results skipped: {skipped:?}"));
    }
    cmp
}

/// Bench results in the fixture's `n,kernel_ms,pcie_ms,fftw_ms` columns,
/// with the host transform time in `kernel_ms`.
pub fn as_measurements(results: &[BenchResult]) -> Vec<Measurement> {
    results
        .iter()
        .map(|r| Measurement { n: r.n, kernel_ms: r.mean_ms.max(f64::MIN_POSITIVE), pcie_ms: None, fftw_ms: None })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ft3d_core::perfmodel::reference_timings;

    /// Advances a fixed step per read and counts reads.
    struct StepClock {
        t: Duration,
        step: Duration,
        reads: usize,
    }

    impl Clock for StepClock {
        fn now(&mut self) -> Duration {
            self.reads += 1;
            self.t += self.step;
            self.t
        }
    }

    fn opts(iters: usize) -> BenchOptions {
        BenchOptions { iters, seed: 1, ..BenchOptions::default() }
    }

    #[test]
    fn single_iteration() {
        let out = run_bench(&[16], &opts(1)).unwrap();
        let r = out[0].as_ref().unwrap();
        assert_eq!((r.n, r.iters, r.stddev_ms), (16, 1, 0.0));
        assert!(r.min_ms <= r.mean_ms);
    }

    #[test]
    fn only_execute_is_timed() {
        let mut clock = StepClock { t: Duration::ZERO, step: Duration::from_micros(250), reads: 0 };
        let out = run_bench_with_clock(&[8, 16], &opts(5), &mut clock).unwrap();
        // two reads per timed iteration; nothing for planning, input or warm-up
        assert_eq!(clock.reads, 2 * 5 * 2);
        for r in out.into_iter().map(Result::unwrap) {
            assert_eq!(r.mean_ms, 0.25);
            assert_eq!(r.min_ms, 0.25);
            assert_eq!(r.stddev_ms, 0.0);
        }
    }

    #[test]
    fn failures_do_not_abort_other_sizes() {
        let out = run_bench(&[12, 8], &opts(2)).unwrap();
        assert_eq!(out[0].as_ref().unwrap_err().n, 12);
        assert!(out[1].is_ok());
        assert!(run_bench(&[8], &opts(0)).is_err());
    }

    #[test]
    fn inputs_are_seeded() {
        assert_eq!(bench_input(16, 9).unwrap(), bench_input(16, 9).unwrap());
        assert_ne!(bench_input(16, 9).unwrap(), bench_input(16, 10).unwrap());
    }

    #[test]
    fn default_iterations() {
        assert_eq!(BenchOptions::default().iters, 100);
    }

    #[test]
    fn statistics() {
        let (mean, sd, min) = summarize(&[1.0, 2.0, 3.0]);
        assert_eq!((mean, sd, min), (2.0, 1.0, 1.0));
    }

    fn result(n: usize, mean_ms: f64) -> BenchResult {
        BenchResult { n, precision: PrecisionSpec::Single, iters: 1, mean_ms, stddev_ms: 0.0, min_ms: mean_ms, parallel: false }
    }

    #[test]
    fn comparison_joins_by_size() {
        let cmp = compare_against_fixture(&[result(16, 0.02)], &reference_timings());
        assert_eq!(cmp.rows.len(), 1);
        let row = &cmp.rows[0];
        assert_eq!(row.fixture_fftw_ms, Some(0.01));
        assert!((row.ratio_vs_fftw.unwrap() - 2.0).abs() < 1e-12);
        assert!((row.ratio_vs_kernel - 0.02 / 0.11).abs() < 1e-12);
        assert_eq!(cmp.warnings, vec!["fixture sizes without results skipped: [32, 64]".to_string()]);
    }

    #[test]
    fn empty_comparison_warns() {
        let cmp = compare_against_fixture(&[], &reference_timings());
        assert!(cmp.rows.is_empty());
        assert!(cmp.warnings[0].contains("no size overlaps"));
    }
}
