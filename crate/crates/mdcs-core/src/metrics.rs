//! Reconstruction quality metrics and benchmark reporting.
//!
//! All quality metrics compare an estimate against a reference field of the
//! same extents:
//!
//! * [`psnr`] — peak signal-to-noise ratio over every element at once.
//! * [`ssim`] — mean structural similarity of the spatial `(s, t)` slices,
//!   one slice per `(u, v, band)` combination, using a Gaussian-weighted
//!   sliding window at fully-valid positions.
//! * [`spectral_angle`] — mean angle between per-position spectral vectors,
//!   a colorimetric error measure insensitive to per-pixel scaling.
//!
//! [`BenchRow`]/[`write_csv`] give benchmark runs a stable machine-readable
//! schema, and [`median_of_three`] is the timing discipline used everywhere
//! a wall-clock number is reported.

use std::io::Write;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

/// SSIM window edge (per axis), truncated on slices smaller than this.
pub const SSIM_WINDOW: usize = 11;
/// Standard deviation of the Gaussian window weights.
pub const SSIM_SIGMA: f64 = 1.5;
/// Luminance stabilization constant factor (`C1 = (K1 * range)^2`).
pub const SSIM_K1: f64 = 0.01;
/// Contrast stabilization constant factor (`C2 = (K2 * range)^2`).
pub const SSIM_K2: f64 = 0.03;
/// Dynamic range all fields are normalized to.
pub const SIGNAL_RANGE: f64 = 1.0;

/// Spectral vectors with norm at or below this are excluded from the
/// spectral-angle mean (the angle is undefined for them).
pub const SPECTRAL_NORM_FLOOR: f64 = 1e-12;

fn check_same_dims(reference: &DenseTensor, estimate: &DenseTensor) -> Result<()> {
    if reference.dims() != estimate.dims() {
        return Err(Error::InvalidArgument(format!(
            "metric operands have different extents: {:?} vs {:?}",
            reference.dims(),
            estimate.dims()
        )));
    }
    Ok(())
}

/// Peak signal-to-noise ratio in decibels: `10 log10(peak^2 / MSE)`.
///
/// Returns `f64::INFINITY` when the operands are exactly equal.
pub fn psnr(reference: &DenseTensor, estimate: &DenseTensor, peak: f64) -> Result<f64> {
    check_same_dims(reference, estimate)?;
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "peak must be positive and finite, got {peak}"
        )));
    }
    let mse: f64 = reference
        .data()
        .iter()
        .zip(estimate.data())
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum::<f64>()
        / reference.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

/// Outcome of an SSIM evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimScore {
    /// Mean SSIM: per-slice means averaged over all `(u, v, band)` slices.
    pub value: f64,
    /// Window extents actually used (shrunk on small slices).
    pub window: (usize, usize),
    /// True when a spatial extent was smaller than [`SSIM_WINDOW`] and the
    /// window had to shrink; scores are then not comparable across sizes.
    pub truncated_window: bool,
}

/// Mean structural similarity over the spatial slices of two fields.
///
/// The first two modes are treated as the spatial extents `(s, t)`; every
/// combination of the remaining modes contributes one slice. Within a slice
/// the Gaussian-weighted window statistics are evaluated at every fully
/// interior position ("valid" placement, no padding).
pub fn ssim(reference: &DenseTensor, estimate: &DenseTensor) -> Result<SsimScore> {
    check_same_dims(reference, estimate)?;
    if reference.ndim() < 2 {
        return Err(Error::InvalidArgument(
            "SSIM needs at least two spatial modes".to_string(),
        ));
    }
    let s = reference.dims()[0];
    let t = reference.dims()[1];
    let ws = SSIM_WINDOW.min(s);
    let wt = SSIM_WINDOW.min(t);
    let truncated = ws < SSIM_WINDOW || wt < SSIM_WINDOW;
    let weights_s = gaussian_window(ws);
    let weights_t = gaussian_window(wt);

    let slice_len = s * t;
    let slices = reference.len() / slice_len;
    let mut slice_mean_sum = 0.0f64;
    for slice in 0..slices {
        let range = slice * slice_len..(slice + 1) * slice_len;
        slice_mean_sum += ssim_slice(
            &reference.data()[range.clone()],
            &estimate.data()[range],
            s,
            t,
            &weights_s,
            &weights_t,
        );
    }
    Ok(SsimScore {
        value: slice_mean_sum / slices as f64,
        window: (ws, wt),
        truncated_window: truncated,
    })
}

/// Normalized Gaussian weights for a window of the given length.
fn gaussian_window(len: usize) -> Vec<f64> {
    let center = (len as f64 - 1.0) / 2.0;
    let mut w: Vec<f64> = (0..len)
        .map(|i| {
            let d = i as f64 - center;
            (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
        })
        .collect();
    let sum: f64 = w.iter().sum();
    for v in &mut w {
        *v /= sum;
    }
    w
}

/// Weighted "valid" filtering along the first axis of an `s x t`
/// column-major slice: output is `(s - w + 1) x t`.
fn filter_rows(data: &[f64], s: usize, t: usize, w: &[f64]) -> Vec<f64> {
    let out_s = s - w.len() + 1;
    let mut out = vec![0.0; out_s * t];
    for col in 0..t {
        let src = &data[col * s..(col + 1) * s];
        let dst = &mut out[col * out_s..(col + 1) * out_s];
        for (i, d) in dst.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (a, &wa) in w.iter().enumerate() {
                acc += wa * src[i + a];
            }
            *d = acc;
        }
    }
    out
}

/// Weighted "valid" filtering along the second axis: `s x t` becomes
/// `s x (t - w + 1)`.
fn filter_cols(data: &[f64], s: usize, t: usize, w: &[f64]) -> Vec<f64> {
    let out_t = t - w.len() + 1;
    let mut out = vec![0.0; s * out_t];
    for col in 0..out_t {
        let dst = &mut out[col * s..(col + 1) * s];
        for (b, &wb) in w.iter().enumerate() {
            let src = &data[(col + b) * s..(col + b + 1) * s];
            for (d, &v) in dst.iter_mut().zip(src) {
                *d += wb * v;
            }
        }
    }
    out
}

/// Separable windowed filtering of one slice; the test oracle recomputes the
/// same statistics with a direct per-position double loop instead.
fn windowed(data: &[f64], s: usize, t: usize, ws: &[f64], wt: &[f64]) -> Vec<f64> {
    let rows = filter_rows(data, s, t, ws);
    filter_cols(&rows, s - ws.len() + 1, t, wt)
}

fn ssim_slice(x: &[f64], y: &[f64], s: usize, t: usize, ws: &[f64], wt: &[f64]) -> f64 {
    let c1 = (SSIM_K1 * SIGNAL_RANGE) * (SSIM_K1 * SIGNAL_RANGE);
    let c2 = (SSIM_K2 * SIGNAL_RANGE) * (SSIM_K2 * SIGNAL_RANGE);

    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();

    let mu_x = windowed(x, s, t, ws, wt);
    let mu_y = windowed(y, s, t, ws, wt);
    let e_xx = windowed(&xx, s, t, ws, wt);
    let e_yy = windowed(&yy, s, t, ws, wt);
    let e_xy = windowed(&xy, s, t, ws, wt);

    let mut sum = 0.0;
    for i in 0..mu_x.len() {
        let (mx, my) = (mu_x[i], mu_y[i]);
        let var_x = e_xx[i] - mx * mx;
        let var_y = e_yy[i] - my * my;
        let cov = e_xy[i] - mx * my;
        sum += ((2.0 * mx * my + c1) * (2.0 * cov + c2))
            / ((mx * mx + my * my + c1) * (var_x + var_y + c2));
    }
    sum / mu_x.len() as f64
}

/// Outcome of a spectral-angle evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralAngleScore {
    /// Mean angle in degrees over all evaluated positions (0 when every
    /// position was skipped).
    pub mean_degrees: f64,
    /// Positions whose reference or estimate spectrum had (near-)zero norm.
    pub skipped_positions: usize,
    /// Positions that entered the mean.
    pub evaluated_positions: usize,
}

/// Mean angle between the per-position spectral vectors of two fields.
///
/// The last mode is treated as the spectral axis; each combination of the
/// remaining modes is one position. Positions where either spectrum has
/// norm at or below [`SPECTRAL_NORM_FLOOR`] are excluded and counted.
pub fn spectral_angle(
    reference: &DenseTensor,
    estimate: &DenseTensor,
) -> Result<SpectralAngleScore> {
    check_same_dims(reference, estimate)?;
    let bands = *reference
        .dims()
        .last()
        .expect("tensors have at least one mode");
    let positions = reference.len() / bands;

    let mut sum = 0.0f64;
    let mut skipped = 0usize;
    for pos in 0..positions {
        let mut dot = 0.0f64;
        let mut na = 0.0f64;
        let mut nb = 0.0f64;
        for b in 0..bands {
            // Spectral samples of one position are strided by the leading
            // block size because the band index is the slowest mode.
            let a = reference.data()[pos + positions * b];
            let e = estimate.data()[pos + positions * b];
            dot += a * e;
            na += a * a;
            nb += e * e;
        }
        let (na, nb) = (na.sqrt(), nb.sqrt());
        if na <= SPECTRAL_NORM_FLOOR || nb <= SPECTRAL_NORM_FLOOR {
            skipped += 1;
            continue;
        }
        let cosine = (dot / (na * nb)).clamp(-1.0, 1.0);
        sum += cosine.acos();
    }
    let evaluated = positions - skipped;
    let mean = if evaluated == 0 {
        0.0
    } else {
        (sum / evaluated as f64).to_degrees()
    };
    Ok(SpectralAngleScore {
        mean_degrees: mean,
        skipped_positions: skipped,
        evaluated_positions: evaluated,
    })
}

/// All quality metrics of one reconstruction, plus bookkeeping for reports.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub psnr_db: f64,
    pub ssim: SsimScore,
    pub spectral_angle: SpectralAngleScore,
}

impl MetricsReport {
    /// Evaluates every metric of `estimate` against `reference`.
    pub fn compute(reference: &DenseTensor, estimate: &DenseTensor, peak: f64) -> Result<Self> {
        Ok(Self {
            psnr_db: psnr(reference, estimate, peak)?,
            ssim: ssim(reference, estimate)?,
            spectral_angle: spectral_angle(reference, estimate)?,
        })
    }
}

/// Runs `f` three times and returns the median wall-clock seconds.
pub fn median_of_three<F: FnMut()>(mut f: F) -> f64 {
    let mut times = [0.0f64; 3];
    for t in &mut times {
        let start = Instant::now();
        f();
        *t = start.elapsed().as_secs_f64();
    }
    times.sort_by(|a, b| a.partial_cmp(b).expect("timings are finite"));
    times[1]
}

/// Bytes held by a factored operator: each factor plus its pseudo-inverse.
pub fn factored_operator_bytes(factor_shapes: &[(usize, usize)]) -> u64 {
    factor_shapes
        .iter()
        .map(|&(r, c)| 2 * 8 * (r as u64) * (c as u64))
        .sum()
}

/// Bytes a flattened operator of the same factors would hold (operator plus
/// pseudo-inverse).
pub fn flattened_operator_bytes(factor_shapes: &[(usize, usize)]) -> u64 {
    let rows: u64 = factor_shapes.iter().map(|&(r, _)| r as u64).product();
    let cols: u64 = factor_shapes.iter().map(|&(_, c)| c as u64).product();
    2 * 8 * rows * cols
}

/// One benchmark result line.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    /// Scene or dataset label.
    pub scene: String,
    /// Dictionary label (e.g. `dct`, `learned`).
    pub basis: String,
    /// Solver form: `nd` or `1d`.
    pub mode: String,
    /// Snapshots per patch.
    pub snapshots: usize,
    pub psnr_db: f64,
    pub ssim: f64,
    pub spectral_angle_deg: f64,
    pub time_seconds: f64,
    pub operator_bytes: u64,
}

/// Header of the benchmark CSV schema.
pub const CSV_HEADER: &str = "scene,basis,mode,K,psnr_db,ssim,sa_deg,time_s,operator_bytes";

/// Writes benchmark rows as CSV; zero rows still produce the header so
/// downstream parsers always see the schema.
pub fn write_csv<W: Write>(w: &mut W, rows: &[BenchRow]) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            csv_field(&r.scene),
            csv_field(&r.basis),
            csv_field(&r.mode),
            r.snapshots,
            r.psnr_db,
            r.ssim,
            r.spectral_angle_deg,
            r.time_seconds,
            r.operator_bytes,
        )?;
    }
    Ok(())
}

/// Labels come from CLI arguments; reject separators rather than quote them
/// so the schema stays trivially splittable.
fn csv_field(s: &str) -> String {
    s.replace([',', '\n', '\r'], "_")
}
