//! The 3D transform pipeline.
//!
//! ```text
//! x-pencil FFTs -> 2D transpose (per z slab) -> y-pencil FFTs
//!   -> 3D rotation (z becomes fastest) -> z-pencil FFTs -> axis restoration
//! ```
//!
//! Every FFT phase works on contiguous pencils. Restoration is one more
//! slab transpose followed by one more rotation, so output indexing is the
//! `(k_x, k_y, k_z)` convention of the input.

use rayon::prelude::*;

use crate::error::{contract, Error, Result};
use crate::fft1d::{make_schedule, Direction, Radix2, StageSchedule};
use crate::layout::{transpose3d_zx, transpose_plane_into, Staging, Tensor3, TileConfig};
use crate::numerics::{ComplexSample, PrecisionSpec};

const SUPPORTED_SIZES: &str = "n must be a power of two in [2, 1024]";

/// Immutable description of an `n³` transform at a given precision.
#[derive(Debug, Clone)]
pub struct Plan {
    n: usize,
    spec: PrecisionSpec,
    schedule: Option<StageSchedule>,
    fft: Radix2,
    tile_cfg: TileConfig,
    parallel: bool,
}

impl Plan {
    pub const MIN_N: usize = 2;
    pub const MAX_N: usize = 1024;

    pub fn new(n: usize, spec: PrecisionSpec, tile_cfg: TileConfig) -> Result<Self> {
        if !n.is_power_of_two() || !(Self::MIN_N..=Self::MAX_N).contains(&n) {
            return Err(Error::UnsupportedSize { n, rule: SUPPORTED_SIZES });
        }
        tile_cfg.validate_for(n)?;
        Ok(Plan {
            n,
            spec,
            // below the 8-lane width there is no streaming schedule
            schedule: make_schedule(n).ok(),
            fft: Radix2::new(n, spec)?,
            tile_cfg,
            parallel: false,
        })
    }

    /// Plan with the default tiling, clamped to `n`.
    pub fn with_defaults(n: usize, spec: PrecisionSpec) -> Result<Self> {
        Self::new(n, spec, TileConfig::for_size(n))
    }

    /// Run the pencils of each phase on the rayon pool. Results are
    /// bitwise identical to the serial path.
    pub fn with_parallelism(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn precision(&self) -> PrecisionSpec {
        self.spec
    }

    /// `None` for `n < 8`.
    pub fn schedule(&self) -> Option<&StageSchedule> {
        self.schedule.as_ref()
    }

    pub fn tile_config(&self) -> &TileConfig {
        &self.tile_cfg
    }

    pub fn is_parallel(&self) -> bool {
        self.parallel
    }

    /// Precomputed `W_n^k`, `k < n/2`, rounded to the plan's precision.
    pub fn twiddles(&self) -> &[ComplexSample] {
        self.fft.twiddles()
    }

    /// Forward computes the unnormalized 3D DFT; inverse applies the
    /// conjugate transform scaled by `1/n³`.
    pub fn execute(&self, t: &Tensor3, direction: Direction) -> Result<Tensor3> {
        if t.n() != self.n {
            return Err(contract(format!("plan for n = {} given a {}^3 tensor", self.n, t.n())));
        }
        let mut work = t.data().to_vec();

        self.fft_phase(&mut work, direction);
        let mut work = self.transpose_slabs(&work);
        self.fft_phase(&mut work, direction);
        let rotated = transpose3d_zx(&Tensor3::from_vec(self.n, work)?);
        let mut work = rotated.into_vec();
        self.fft_phase(&mut work, direction);

        // layout is now (z, y, x) fastest-first
        let swapped = self.transpose_slabs(&work);
        Ok(transpose3d_zx(&Tensor3::from_vec(self.n, swapped)?))
    }

    fn fft_phase(&self, data: &mut [ComplexSample], direction: Direction) {
        if self.parallel {
            data.par_chunks_exact_mut(self.n)
                .for_each(|pencil| self.fft.process_unchecked(pencil, direction));
        } else {
            for pencil in data.chunks_exact_mut(self.n) {
                self.fft.process_unchecked(pencil, direction);
            }
        }
    }

    fn transpose_slabs(&self, src: &[ComplexSample]) -> Vec<ComplexSample> {
        let n = self.n;
        let plane = n * n;
        let mut dst = vec![ComplexSample::new(0.0, 0.0); src.len()];
        if self.parallel {
            dst.par_chunks_exact_mut(plane).zip(src.par_chunks_exact(plane)).for_each_init(
                || Staging::new(&self.tile_cfg),
                |staging, (d, s)| transpose_plane_into(s, d, n, &self.tile_cfg, staging),
            );
        } else {
            let mut staging = Staging::new(&self.tile_cfg);
            for (d, s) in dst.chunks_exact_mut(plane).zip(src.chunks_exact(plane)) {
                transpose_plane_into(s, d, n, &self.tile_cfg, &mut staging);
            }
        }
        dst
    }
}
