//! Analytical latency model of the accelerator pipeline and its host link.
//!
//! Kernel: three FFT phases each stream `n²` pencils of `n` points at
//! `lanes` points per cycle, so `cycles = 3·n³/lanes`. Transpose phases
//! overlap with streaming; their cost, and any fixed launch or memory cost,
//! is a single overhead term:
//!
//! ```text
//! kernel_time = cycles / clock_hz + kernel_overhead_s
//! pcie_time   = pcie_latency_s + 2·n³·bytes_per_sample / pcie_bytes_per_s
//! ```
//!
//! Neither the clock nor the link parameters are assumed; both are fitted
//! by least squares to measurements.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};

/// Default streaming width of the 1D FFT kernel.
pub const DEFAULT_LANES: u32 = 8;
/// Single-precision complex sample.
pub const DEFAULT_BYTES_PER_SAMPLE: u32 = 8;

/// Measured timings of the reference accelerator, bundled as CSV.
pub const REFERENCE_TIMINGS_CSV: &str = include_str!("../fixtures/reference_timings.csv");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerfConfig {
    pub clock_hz: f64,
    pub lanes: u32,
    pub kernel_overhead_s: f64,
    pub pcie_latency_s: f64,
    pub pcie_bytes_per_s: f64,
    pub bytes_per_sample: u32,
}

impl PerfConfig {
    /// Configuration with the default lane count and sample width.
    pub fn new(clock_hz: f64, kernel_overhead_s: f64, pcie_latency_s: f64, pcie_bytes_per_s: f64) -> Self {
        PerfConfig {
            clock_hz,
            lanes: DEFAULT_LANES,
            kernel_overhead_s,
            pcie_latency_s,
            pcie_bytes_per_s,
            bytes_per_sample: DEFAULT_BYTES_PER_SAMPLE,
        }
    }

    fn check_kernel(&self) -> Result<()> {
        if !(self.clock_hz > 0.0 && self.clock_hz.is_finite()) || self.lanes == 0 {
            return Err(Error::Configuration(format!(
                "kernel model is uncalibrated (clock {} Hz, {} lanes)",
                self.clock_hz, self.lanes
            )));
        }
        if !(self.kernel_overhead_s >= 0.0) {
            return Err(Error::Configuration(format!("negative kernel overhead {}", self.kernel_overhead_s)));
        }
        Ok(())
    }

    fn check_link(&self) -> Result<()> {
        if !(self.pcie_bytes_per_s > 0.0 && self.pcie_bytes_per_s.is_finite()) || self.bytes_per_sample == 0 {
            return Err(Error::Configuration(format!(
                "link model is uncalibrated ({} B/s)",
                self.pcie_bytes_per_s
            )));
        }
        if !(self.pcie_latency_s >= 0.0) {
            return Err(Error::Configuration(format!("negative link latency {}", self.pcie_latency_s)));
        }
        Ok(())
    }
}

/// One row of a timing table. Times are in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub n: usize,
    pub kernel_ms: f64,
    pub pcie_ms: Option<f64>,
    pub fftw_ms: Option<f64>,
}

impl Measurement {
    fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if self.n == 0
            || !positive(self.kernel_ms)
            || self.pcie_ms.is_some_and(|v| !positive(v))
            || self.fftw_ms.is_some_and(|v| !positive(v))
        {
            return Err(Error::Table(format!("row for n = {} has a non-positive size or time", self.n)));
        }
        Ok(())
    }
}

/// Model prediction against one measured point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residual {
    pub n: usize,
    pub measured_ms: f64,
    pub predicted_ms: f64,
    /// `(predicted − measured) / measured`.
    pub relative: f64,
}

impl Residual {
    fn new(n: usize, measured_ms: f64, predicted_ms: f64) -> Self {
        Residual { n, measured_ms, predicted_ms, relative: (predicted_ms - measured_ms) / measured_ms }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    pub config: PerfConfig,
    pub kernel_residuals: Vec<Residual>,
    pub pcie_residuals: Vec<Residual>,
}

fn check_size(n: usize) -> Result<()> {
    if !n.is_power_of_two() || n < DEFAULT_LANES as usize {
        return Err(contract(format!("model sizes must be powers of two >= 8, got {n}")));
    }
    Ok(())
}

pub fn kernel_cycles(n: usize, cfg: &PerfConfig) -> Result<u64> {
    check_size(n)?;
    if cfg.lanes == 0 {
        return Err(Error::Configuration("zero lanes".into()));
    }
    let n = n as u64;
    Ok(3 * n * n * n / u64::from(cfg.lanes))
}

/// Kernel execution time in seconds.
pub fn kernel_time(n: usize, cfg: &PerfConfig) -> Result<f64> {
    cfg.check_kernel()?;
    Ok(kernel_cycles(n, cfg)? as f64 / cfg.clock_hz + cfg.kernel_overhead_s)
}

/// Bytes moved host -> device -> host for one `n³` transform.
pub fn round_trip_bytes(n: usize, cfg: &PerfConfig) -> Result<u64> {
    check_size(n)?;
    let n = n as u64;
    Ok(2 * n * n * n * u64::from(cfg.bytes_per_sample))
}

/// Link transfer time in seconds.
pub fn pcie_time(n: usize, cfg: &PerfConfig) -> Result<f64> {
    cfg.check_link()?;
    Ok(cfg.pcie_latency_s + round_trip_bytes(n, cfg)? as f64 / cfg.pcie_bytes_per_s)
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub fn fit_affine(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 2 {
        return Err(Error::Calibration(format!("need at least 2 points, got {}", points.len())));
    }
    let count = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / count;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / count;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    if sxx == 0.0 {
        return Err(Error::Calibration("all points share one size; the fit is singular".into()));
    }
    let slope = sxy / sxx;
    Ok((slope, mean_y - slope * mean_x))
}

/// Fits `(clock_hz, kernel_overhead_s)` to `(n, kernel_ms)` points.
pub fn fit_kernel(points: &[(usize, f64)], lanes: u32) -> Result<(f64, f64)> {
    let probe = PerfConfig { lanes, ..PerfConfig::new(1.0, 0.0, 0.0, 1.0) };
    let xy = points
        .iter()
        .map(|&(n, ms)| Ok((kernel_cycles(n, &probe)? as f64, ms * 1e-3)))
        .collect::<Result<Vec<_>>>()?;
    let (seconds_per_cycle, overhead) = fit_affine(&xy)?;
    if !(seconds_per_cycle > 0.0) || !(overhead > 0.0) {
        return Err(Error::Calibration(format!(
            "kernel fit is non-physical (s/cycle {seconds_per_cycle:e}, overhead {overhead:e} s)"
        )));
    }
    Ok((1.0 / seconds_per_cycle, overhead))
}

/// Fits `(pcie_latency_s, pcie_bytes_per_s)` to `(n, pcie_ms)` points.
pub fn fit_pcie(points: &[(usize, f64)], bytes_per_sample: u32) -> Result<(f64, f64)> {
    let probe = PerfConfig { bytes_per_sample, ..PerfConfig::new(1.0, 0.0, 0.0, 1.0) };
    let xy = points
        .iter()
        .map(|&(n, ms)| Ok((round_trip_bytes(n, &probe)? as f64, ms * 1e-3)))
        .collect::<Result<Vec<_>>>()?;
    let (seconds_per_byte, latency) = fit_affine(&xy)?;
    if !(seconds_per_byte > 0.0) || !(latency > 0.0) {
        return Err(Error::Calibration(format!(
            "link fit is non-physical (s/byte {seconds_per_byte:e}, latency {latency:e} s)"
        )));
    }
    Ok((latency, 1.0 / seconds_per_byte))
}

/// Fits the full model to a timing table. Every row must carry `pcie_ms`.
pub fn calibrate(ms: &[Measurement]) -> Result<Calibration> {
    for m in ms {
        m.validate().map_err(|e| Error::Calibration(e.to_string()))?;
    }
    let kernel_points: Vec<_> = ms.iter().map(|m| (m.n, m.kernel_ms)).collect();
    let pcie_points = ms
        .iter()
        .map(|m| {
            m.pcie_ms
                .map(|p| (m.n, p))
                .ok_or_else(|| Error::Calibration(format!("row n = {} has no link time", m.n)))
        })
        .collect::<Result<Vec<_>>>()?;

    let (clock_hz, kernel_overhead_s) = fit_kernel(&kernel_points, DEFAULT_LANES)?;
    let (pcie_latency_s, pcie_bytes_per_s) = fit_pcie(&pcie_points, DEFAULT_BYTES_PER_SAMPLE)?;
    let config = PerfConfig::new(clock_hz, kernel_overhead_s, pcie_latency_s, pcie_bytes_per_s);

    let kernel_residuals = kernel_points
        .iter()
        .map(|&(n, t)| Ok(Residual::new(n, t, kernel_time(n, &config)? * 1e3)))
        .collect::<Result<_>>()?;
    let pcie_residuals = pcie_points
        .iter()
        .map(|&(n, t)| Ok(Residual::new(n, t, pcie_time(n, &config)? * 1e3)))
        .collect::<Result<_>>()?;
    Ok(Calibration { config, kernel_residuals, pcie_residuals })
}

/// Predicted kernel and link times, in milliseconds, for each size.
pub fn predict_report(sizes: &[usize], cfg: &PerfConfig) -> Result<Vec<Measurement>> {
    sizes
        .iter()
        .map(|&n| {
            Ok(Measurement {
                n,
                kernel_ms: kernel_time(n, cfg)? * 1e3,
                pcie_ms: Some(pcie_time(n, cfg)? * 1e3),
                fftw_ms: None,
            })
        })
        .collect()
}

/// Reads a `n,kernel_ms,pcie_ms,fftw_ms` table.
pub fn read_measurements<R: Read>(reader: R) -> Result<Vec<Measurement>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Table(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["n", "kernel_ms", "pcie_ms", "fftw_ms"] {
        return Err(Error::Table(format!("unexpected header {:?}", headers.iter().collect::<Vec<_>>())));
    }
    let mut rows = Vec::new();
    for record in rdr.deserialize() {
        let m: Measurement = record.map_err(|e| Error::Table(e.to_string()))?;
        m.validate()?;
        rows.push(m);
    }
    Ok(rows)
}

pub fn write_measurements<W: Write>(writer: W, rows: &[Measurement]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for r in rows {
        wtr.serialize(r).map_err(|e| Error::Table(e.to_string()))?;
    }
    if rows.is_empty() {
        wtr.write_record(["n", "kernel_ms", "pcie_ms", "fftw_ms"]).map_err(|e| Error::Table(e.to_string()))?;
    }
    wtr.flush().map_err(|e| Error::Table(e.to_string()))
}

/// The bundled reference timings for 16³, 32³ and 64³.
pub fn reference_timings() -> Vec<Measurement> {
    read_measurements(REFERENCE_TIMINGS_CSV.as_bytes()).expect("bundled fixture is well formed")
}
