//! A precision-parameterized 3D FFT pipeline modeled on a streaming
//! accelerator design: three phases of radix-2 1D FFTs separated by a
//! buffered 2D plane transpose and a 3D axis rotation.
//!
//! Besides the transform itself the crate carries
//!
//! * [`numerics`]: emulation of reduced mantissa widths on top of `f64`,
//! * [`oracle`]: a direct triple-sum DFT and error metrics used as ground truth,
//! * [`perfmodel`]: an analytical latency model for the accelerator kernel and
//!   the host link, fitted by least squares to measured timings,
//! * [`tolerance`]: a spectral Hartree-energy computation used to check how
//!   an energy reacts to reduced floating-point precision.
//!
//! ```
//! use ft3d_core::{Direction, Plan, PrecisionSpec, Tensor3};
//!
//! let plan = Plan::with_defaults(16, PrecisionSpec::Single).unwrap();
//! let mut t = Tensor3::zeros(16).unwrap();
//! t[(0, 0, 0)] = 1.0.into();
//! let spectrum = plan.execute(&t, Direction::Forward).unwrap();
//! assert!(spectrum.data().iter().all(|c| (c.re - 1.0).abs() < 1e-12 && c.im == 0.0));
//! ```

pub mod error;
pub mod fft1d;
pub mod fft3d;
pub mod layout;
pub mod numerics;
pub mod oracle;
pub mod perfmodel;
pub mod tolerance;

pub use error::{Error, Result};
pub use fft1d::{bit_reverse_permutation, fft1d, make_schedule, Direction, Radix2, StageSchedule};
pub use fft3d::Plan;
pub use layout::{transpose2d, transpose3d_zx, Tensor3, TileConfig};
pub use numerics::{round_to_precision, twiddle, ComplexSample, PrecisionSpec};
pub use oracle::{dft3d_bruteforce, error_metrics, ErrorReport};
pub use perfmodel::{Calibration, Measurement, PerfConfig};
pub use tolerance::{EnergyResult, GridSpec};
