//! On-disk tensor format, synthetic scene generation, and RGB rendering.
//!
//! # The `.tns` container
//!
//! A minimal little-endian binary format for dense tensors:
//!
//! ```text
//! offset  size        field
//! 0       4           magic "MDCS"
//! 4       4           format version (u32, currently 1)
//! 8       1           number of dimensions (u8, at least 1)
//! 9       8 * ndims   extents (u64 each)
//! ...     1           dtype tag (u8): 0 = f32, 1 = f64
//! ...     rest        payload, first dimension varying fastest
//! ```
//!
//! Malformed files are rejected with [`Error::Format`] carrying the byte
//! offset of the problem. `f32` payloads are widened to `f64` on read.
//!
//! # Synthetic scenes
//!
//! [`synth_scene`] renders seeded Gaussian blobs with per-view parallax and
//! smooth spectra — enough structure for end-to-end pipeline tests without
//! any external dataset. Real captures stored in other containers can be
//! converted to `.tns` externally; the format above is the whole contract.
//!
//! # RGB rendering
//!
//! [`spectral_to_rgb`] integrates a field's spectrum at one view against the
//! CIE 1931 2-degree observer under D65 illumination and maps the result
//! through the sRGB matrix and transfer curve, producing a `u8` PNG-ready
//! image for visual inspection.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

const TNS_MAGIC: &[u8; 4] = b"MDCS";
const TNS_FORMAT_VERSION: u32 = 1;

/// Payload element type of a `.tns` file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TnsDtype {
    F32,
    F64,
}

impl TnsDtype {
    fn tag(self) -> u8 {
        match self {
            TnsDtype::F32 => 0,
            TnsDtype::F64 => 1,
        }
    }

    fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(TnsDtype::F32),
            1 => Some(TnsDtype::F64),
            _ => None,
        }
    }

    fn element_bytes(self) -> usize {
        match self {
            TnsDtype::F32 => 4,
            TnsDtype::F64 => 8,
        }
    }
}

/// Writes a tensor as `.tns` with an `f64` payload (lossless).
pub fn write_tensor(path: &Path, t: &DenseTensor) -> Result<()> {
    write_tensor_with_dtype(path, t, TnsDtype::F64)
}

/// Writes a tensor as `.tns` with the chosen payload type; `f32` halves the
/// size at ~1e-7 relative rounding.
pub fn write_tensor_with_dtype(path: &Path, t: &DenseTensor, dtype: TnsDtype) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(TNS_MAGIC)?;
    w.write_all(&TNS_FORMAT_VERSION.to_le_bytes())?;
    let ndims = u8::try_from(t.ndim()).map_err(|_| {
        Error::InvalidArgument(format!(
            "cannot serialize {} dimensions (limit 255)",
            t.ndim()
        ))
    })?;
    w.write_all(&[ndims])?;
    for &d in t.dims() {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    w.write_all(&[dtype.tag()])?;
    match dtype {
        TnsDtype::F64 => {
            for v in t.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        TnsDtype::F32 => {
            for v in t.data() {
                w.write_all(&(*v as f32).to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a `.tns` file; `f32` payloads are widened to `f64`.
pub fn read_tensor(path: &Path) -> Result<DenseTensor> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut cur = ByteCursor::new(&bytes);

    let magic = cur.take(4, "magic")?;
    if magic != TNS_MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: format!("bad magic {magic:?}, expected {TNS_MAGIC:?}"),
        });
    }
    let version_off = cur.offset();
    let version = u32::from_le_bytes(cur.take(4, "format version")?.try_into().unwrap());
    if version != TNS_FORMAT_VERSION {
        return Err(Error::Format {
            offset: version_off,
            message: format!("unsupported format version {version}"),
        });
    }
    let ndims_off = cur.offset();
    let ndims = cur.take(1, "dimension count")?[0] as usize;
    if ndims == 0 {
        return Err(Error::Format {
            offset: ndims_off,
            message: "dimension count must be at least 1".to_string(),
        });
    }
    let mut dims = Vec::with_capacity(ndims);
    let mut len: usize = 1;
    for mode in 0..ndims {
        let extent_off = cur.offset();
        let extent = u64::from_le_bytes(cur.take(8, "extent")?.try_into().unwrap());
        let extent = usize::try_from(extent)
            .ok()
            .filter(|&e| e > 0)
            .ok_or_else(|| Error::Format {
                offset: extent_off,
                message: format!("extent {extent} for mode {mode} is not usable"),
            })?;
        len = len.checked_mul(extent).ok_or_else(|| Error::Format {
            offset: extent_off,
            message: "extent product overflows".to_string(),
        })?;
        dims.push(extent);
    }
    let dtype_off = cur.offset();
    let dtype = TnsDtype::from_tag(cur.take(1, "dtype tag")?[0]).ok_or_else(|| Error::Format {
        offset: dtype_off,
        message: "unknown dtype tag (0 = f32, 1 = f64)".to_string(),
    })?;

    let payload_off = cur.offset();
    let expected = len
        .checked_mul(dtype.element_bytes())
        .ok_or_else(|| Error::Format {
            offset: payload_off,
            message: "payload size overflows".to_string(),
        })?;
    if cur.remaining() != expected {
        return Err(Error::Format {
            offset: payload_off,
            message: format!(
                "header declares {expected} payload bytes but the file has {}",
                cur.remaining()
            ),
        });
    }
    let mut data = Vec::with_capacity(len);
    match dtype {
        TnsDtype::F64 => {
            for _ in 0..len {
                let raw = cur.take(8, "payload element")?;
                data.push(f64::from_le_bytes(raw.try_into().unwrap()));
            }
        }
        TnsDtype::F32 => {
            for _ in 0..len {
                let raw = cur.take(4, "payload element")?;
                data.push(f32::from_le_bytes(raw.try_into().unwrap()) as f64);
            }
        }
    }
    DenseTensor::new(dims, data)
}

/// Byte-slice reader that reports the offset of whatever it failed to read.
pub(crate) struct ByteCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteCursor<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub(crate) fn offset(&self) -> u64 {
        self.pos as u64
    }

    pub(crate) fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    pub(crate) fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::Format {
                offset: self.offset(),
                message: format!(
                    "unexpected end of file reading {what}: needed {n} bytes, \
                     only {} left",
                    self.remaining()
                ),
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }
}

/// Recipe for a synthetic multispectral light field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSceneSpec {
    /// Field extents `(s, t, u, v, bands)`.
    pub dims: [usize; 5],
    /// Number of Gaussian blobs to render (0 gives an all-zero field).
    pub primitives: usize,
    /// Spatial shift, in pixels, per unit of angular offset from the central
    /// view: the parallax of every blob.
    pub disparity: f64,
    /// Seed for blob placement, size, spectrum, and amplitude.
    pub seed: u64,
}

struct Blob {
    cx: f64,
    cy: f64,
    sigma_spatial: f64,
    band_center: f64,
    band_sigma: f64,
    amplitude: f64,
}

/// Renders a seeded field of Gaussian blobs with per-view parallax.
///
/// Every blob has a spatial center inside the middle 70% of the image, a
/// smooth Gaussian spectrum, and shifts linearly with the angular offset of
/// the view by `disparity` pixels per view step. Non-zero scenes are
/// normalized so the peak value is exactly 1.0.
pub fn synth_scene(spec: &SyntheticSceneSpec) -> Result<DenseTensor> {
    if let Some(mode) = spec.dims.iter().position(|&d| d == 0) {
        return Err(Error::InvalidArgument(format!(
            "scene extent for mode {mode} must be positive"
        )));
    }
    if !spec.disparity.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "disparity must be finite, got {}",
            spec.disparity
        )));
    }
    let [s_dim, t_dim, u_dim, v_dim, bands] = spec.dims;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let max_spatial = s_dim.max(t_dim) as f64;
    let blobs: Vec<Blob> = (0..spec.primitives)
        .map(|_| Blob {
            cx: rng.random_range(0.15..0.85) * (s_dim.max(2) - 1) as f64,
            cy: rng.random_range(0.15..0.85) * (t_dim.max(2) - 1) as f64,
            sigma_spatial: rng.random_range(0.06..0.15) * max_spatial,
            band_center: rng.random_range(0.0..bands as f64),
            band_sigma: rng.random_range(0.8..(bands as f64 / 3.0).max(1.2)),
            amplitude: rng.random_range(0.5..1.0),
        })
        .collect();

    let center_u = (u_dim as f64 - 1.0) / 2.0;
    let center_v = (v_dim as f64 - 1.0) / 2.0;
    let mut field = DenseTensor::from_fn(&spec.dims, |idx| {
        let (s, t, u, v, b) = (idx[0], idx[1], idx[2], idx[3], idx[4]);
        let du = u as f64 - center_u;
        let dv = v as f64 - center_v;
        let mut acc = 0.0;
        for blob in &blobs {
            let dx = s as f64 - (blob.cx + spec.disparity * du);
            let dy = t as f64 - (blob.cy + spec.disparity * dv);
            let spatial =
                (-(dx * dx + dy * dy) / (2.0 * blob.sigma_spatial * blob.sigma_spatial)).exp();
            let db = b as f64 - blob.band_center;
            let spectral = (-db * db / (2.0 * blob.band_sigma * blob.band_sigma)).exp();
            acc += blob.amplitude * spatial * spectral;
        }
        acc
    })?;

    let peak = field.max_abs();
    if peak > 0.0 {
        for v in field.data_mut() {
            *v /= peak;
        }
    }
    Ok(field)
}

/// Wavelengths (nm) assumed for 13-band fields when none are given:
/// 400 to 700 in steps of 25.
pub const DEFAULT_WAVELENGTHS_13: [f64; 13] = [
    400.0, 425.0, 450.0, 475.0, 500.0, 525.0, 550.0, 575.0, 600.0, 625.0, 650.0, 675.0, 700.0,
];

/// CIE 1931 2-degree color matching functions, 400–700 nm at 10 nm steps.
const CMF_STEP_NM: f64 = 10.0;
const CMF_START_NM: f64 = 400.0;
const CMF_XYZ: [[f64; 3]; 31] = [
    [0.014310, 0.000396, 0.067850],
    [0.043510, 0.001210, 0.207400],
    [0.134380, 0.004000, 0.645600],
    [0.283900, 0.011600, 1.385600],
    [0.348280, 0.023000, 1.747060],
    [0.336200, 0.038000, 1.772110],
    [0.290800, 0.060000, 1.669200],
    [0.195360, 0.090980, 1.287640],
    [0.095640, 0.139020, 0.812950],
    [0.032010, 0.208020, 0.465180],
    [0.004900, 0.323000, 0.272000],
    [0.009300, 0.503000, 0.158200],
    [0.063270, 0.710000, 0.078250],
    [0.165500, 0.862000, 0.042160],
    [0.290400, 0.954000, 0.020300],
    [0.433450, 0.994950, 0.008750],
    [0.594500, 0.995000, 0.003900],
    [0.762100, 0.952000, 0.002100],
    [0.916300, 0.870000, 0.001650],
    [1.026300, 0.757000, 0.001100],
    [1.062200, 0.631000, 0.000800],
    [1.002600, 0.503000, 0.000340],
    [0.854450, 0.381000, 0.000190],
    [0.642400, 0.265000, 0.000050],
    [0.447900, 0.175000, 0.000020],
    [0.283500, 0.107000, 0.000000],
    [0.164900, 0.061000, 0.000000],
    [0.087400, 0.032000, 0.000000],
    [0.046770, 0.017000, 0.000000],
    [0.022700, 0.008210, 0.000000],
    [0.011359, 0.004102, 0.000000],
];

/// D65 relative spectral power, same grid as [`CMF_XYZ`].
const D65_POWER: [f64; 31] = [
    82.7549, 91.4860, 93.4318, 86.6823, 104.8650, 117.0080, 117.8120, 114.8610, 115.9230, 108.8110,
    109.3540, 107.8020, 104.7900, 107.6890, 104.4050, 104.0460, 100.0000, 96.3342, 95.7880,
    88.6856, 90.0062, 89.5991, 87.6987, 83.2886, 83.6992, 80.0268, 80.2146, 78.2842, 78.2842,
    71.6091, 71.6091,
];

fn interp_table(wavelength: f64, column: impl Fn(usize) -> f64) -> f64 {
    let pos = (wavelength - CMF_START_NM) / CMF_STEP_NM;
    let lo = pos.floor() as usize;
    if lo + 1 >= 31 {
        return column(30);
    }
    let frac = pos - lo as f64;
    column(lo) * (1.0 - frac) + column(lo + 1) * frac
}

fn resolve_wavelengths(bands: usize, wavelengths: Option<&[f64]>) -> Result<Vec<f64>> {
    let grid: Vec<f64> = match wavelengths {
        Some(w) => w.to_vec(),
        None if bands == DEFAULT_WAVELENGTHS_13.len() => DEFAULT_WAVELENGTHS_13.to_vec(),
        None => {
            return Err(Error::InvalidArgument(format!(
                "no default wavelength grid for {bands} bands; pass explicit \
                 wavelengths"
            )))
        }
    };
    if grid.len() != bands {
        return Err(Error::InvalidArgument(format!(
            "{} wavelengths given for {bands} bands",
            grid.len()
        )));
    }
    for &w in &grid {
        if !(CMF_START_NM..=700.0).contains(&w) {
            return Err(Error::InvalidArgument(format!(
                "wavelength {w} nm is outside the supported 400-700 nm range"
            )));
        }
    }
    Ok(grid)
}

/// Linear CIE XYZ of one `(u, v)` view: a `(s, t)` plane stored first
/// dimension fastest, before any clipping or gamma.
///
/// Each band is weighted by D65 power times the interpolated observer
/// response, normalized so a flat unit spectrum lands on the white point
/// with Y = 1. Linear in the field by construction.
pub fn spectral_to_xyz(
    field: &DenseTensor,
    view_u: usize,
    view_v: usize,
    wavelengths: Option<&[f64]>,
) -> Result<Vec<[f64; 3]>> {
    if field.ndim() != 5 {
        return Err(Error::InvalidArgument(format!(
            "expected a 5-way field, got {} modes",
            field.ndim()
        )));
    }
    let [s_dim, t_dim, u_dim, v_dim, bands] = [
        field.dims()[0],
        field.dims()[1],
        field.dims()[2],
        field.dims()[3],
        field.dims()[4],
    ];
    if view_u >= u_dim || view_v >= v_dim {
        return Err(Error::InvalidArgument(format!(
            "view ({view_u}, {view_v}) outside the {u_dim}x{v_dim} angular grid"
        )));
    }
    let grid = resolve_wavelengths(bands, wavelengths)?;

    // Per-band weights: D65 * observer, normalized to Y = 1 for a flat
    // unit spectrum on this band grid.
    let mut weights = vec![[0.0f64; 3]; bands];
    let mut y_total = 0.0;
    for (b, &w) in grid.iter().enumerate() {
        let power = interp_table(w, |i| D65_POWER[i]);
        for c in 0..3 {
            weights[b][c] = power * interp_table(w, |i| CMF_XYZ[i][c]);
        }
        y_total += weights[b][1];
    }
    for wb in &mut weights {
        for c in wb.iter_mut() {
            *c /= y_total;
        }
    }

    let mut out = vec![[0.0f64; 3]; s_dim * t_dim];
    for b in 0..bands {
        for t in 0..t_dim {
            for s in 0..s_dim {
                let v = field.get(&[s, t, view_u, view_v, b]);
                let px = &mut out[s + s_dim * t];
                for c in 0..3 {
                    px[c] += weights[b][c] * v;
                }
            }
        }
    }
    Ok(out)
}

/// sRGB transfer curve for one linear channel value in [0, 1].
fn srgb_gamma(c: f64) -> f64 {
    if c <= 0.003_130_8 {
        12.92 * c
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

/// Renders one `(u, v)` view of a field to an 8-bit sRGB image.
///
/// The field is assumed normalized to [0, 1]; out-of-gamut values are
/// clipped after the XYZ-to-linear-sRGB matrix. The image is `s` pixels wide
/// and `t` pixels tall.
pub fn spectral_to_rgb(
    field: &DenseTensor,
    view_u: usize,
    view_v: usize,
    wavelengths: Option<&[f64]>,
) -> Result<image::RgbImage> {
    let xyz = spectral_to_xyz(field, view_u, view_v, wavelengths)?;
    let (s_dim, t_dim) = (field.dims()[0], field.dims()[1]);

    // XYZ to linear sRGB, D65 white.
    const M: [[f64; 3]; 3] = [
        [3.240_454_2, -1.537_138_5, -0.498_531_4],
        [-0.969_266_0, 1.876_010_8, 0.041_556_0],
        [0.055_643_4, -0.204_025_9, 1.057_225_2],
    ];

    let mut img = image::RgbImage::new(s_dim as u32, t_dim as u32);
    for t in 0..t_dim {
        for s in 0..s_dim {
            let [x, y, z] = xyz[s + s_dim * t];
            let mut rgb = [0u8; 3];
            for (c, out) in rgb.iter_mut().enumerate() {
                let linear = M[c][0] * x + M[c][1] * y + M[c][2] * z;
                let gamma = srgb_gamma(linear.clamp(0.0, 1.0));
                *out = (gamma * 255.0).round().clamp(0.0, 255.0) as u8;
            }
            img.put_pixel(s as u32, t as u32, image::Rgb(rgb));
        }
    }
    Ok(img)
}
