//! Seeded construction of the acquisition operator and the forward model.
//!
//! A snapshot acquisition of a 5-way patch `L(s, t, u, v, lambda)` is modeled
//! as a chain of per-dimension operators:
//!
//! * modes 0..4 (spatial `s, t` and angular `u, v`): row-shuffled identity
//!   matrices — optical shuffling of rays, optionally disabled, in which
//!   case they are plain identities;
//! * mode 4 (spectral): a `K x n_bands` one-hot matrix that selects one
//!   distinct band per snapshot row, modeling a coded aperture that passes
//!   exactly one spectral band per exposure.
//!
//! Every row of every factor sums to exactly 1 with binary entries, and each
//! factor has orthonormal rows, which is what later lets the solver use
//! plain transposes as pseudo-inverses.
//!
//! All randomness is driven by a deterministic seed tree: a master seed plus
//! the patch index derive independent streams for each permutation and for
//! the band draw, so any patch's operator can be rebuilt in isolation — the
//! property the [`manifest`] export relies on.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dict::DEFAULT_FLATTEN_CAP_BYTES;
use crate::error::{Error, Result};
use crate::tensor::{kron_all_rev, nmode_product, DenseMatrix, DenseTensor};

/// Number of modes in a light-field patch.
pub const FIELD_MODES: usize = 5;

/// Index of the spectral mode.
pub const SPECTRAL_MODE: usize = 4;

// Seed-tree stream tags. Streams 1..=4 are the per-mode permutations.
const STREAM_OPERATOR: u64 = 0;
const STREAM_PERM_BASE: u64 = 1;
const STREAM_BANDS: u64 = 5;

/// Acquisition geometry: patch extents, snapshot count, and seeding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaskSpec {
    /// Patch extents `(s, t, u, v, lambda)`.
    pub patch_dims: [usize; 5],
    /// Snapshots per patch; each selects a distinct spectral band.
    pub snapshots: usize,
    /// Root of the seed tree; everything else derives from it.
    pub master_seed: u64,
    /// When false, the four spatial/angular factors are identities.
    pub shuffle_spatial_angular: bool,
}

impl MaskSpec {
    /// Validates extents and the snapshot count (at least 1, at most the
    /// number of spectral bands, since bands are drawn without replacement).
    pub fn new(
        patch_dims: [usize; 5],
        snapshots: usize,
        master_seed: u64,
        shuffle_spatial_angular: bool,
    ) -> Result<Self> {
        if let Some(mode) = patch_dims.iter().position(|&d| d == 0) {
            return Err(Error::InvalidArgument(format!(
                "patch extent for mode {mode} must be positive"
            )));
        }
        let bands = patch_dims[SPECTRAL_MODE];
        if snapshots == 0 {
            return Err(Error::InvalidArgument(
                "snapshot count must be at least 1".to_string(),
            ));
        }
        if snapshots > bands {
            return Err(Error::InvalidArgument(format!(
                "snapshot count {snapshots} exceeds the {bands} spectral bands \
                 available for replacement-free selection"
            )));
        }
        Ok(Self {
            patch_dims,
            snapshots,
            master_seed,
            shuffle_spatial_angular,
        })
    }

    /// Spectral band count.
    pub fn bands(&self) -> usize {
        self.patch_dims[SPECTRAL_MODE]
    }

    /// Measured samples per patch: `s * t * u * v * snapshots`.
    pub fn measured_samples(&self) -> usize {
        self.patch_dims[..SPECTRAL_MODE].iter().product::<usize>() * self.snapshots
    }

    /// Total samples per patch: `s * t * u * v * lambda`.
    pub fn total_samples(&self) -> usize {
        self.patch_dims.iter().product()
    }
}

/// Fraction of the patch actually measured: `measured / total`, which
/// reduces to `snapshots / bands`.
pub fn compression_ratio(spec: &MaskSpec) -> f64 {
    spec.measured_samples() as f64 / spec.total_samples() as f64
}

/// The five per-dimension factors of one patch's acquisition.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableSensingOperator {
    phi: Vec<DenseMatrix>,
    snapshots: usize,
    bands: Vec<usize>,
    permutation_seeds: [u64; 4],
    seed: u64,
}

impl SeparableSensingOperator {
    /// Wraps externally built factors, enforcing the structural invariants:
    /// five factors, modes 0..4 square permutation matrices, mode 4 a
    /// one-hot selector with distinct bands (one row per snapshot).
    pub fn from_parts(
        phi: Vec<DenseMatrix>,
        permutation_seeds: [u64; 4],
        seed: u64,
    ) -> Result<Self> {
        if phi.len() != FIELD_MODES {
            return Err(Error::InvalidArgument(format!(
                "expected {FIELD_MODES} factors, got {}",
                phi.len()
            )));
        }
        for (mode, m) in phi.iter().take(SPECTRAL_MODE).enumerate() {
            if !is_permutation_matrix(m) {
                return Err(Error::Validation(format!(
                    "factor for mode {mode} is not a permutation matrix"
                )));
            }
        }
        let bands = onehot_bands(&phi[SPECTRAL_MODE]).ok_or_else(|| {
            Error::Validation(
                "spectral factor is not a one-hot selector with distinct bands".to_string(),
            )
        })?;
        let snapshots = bands.len();
        Ok(Self {
            phi,
            snapshots,
            bands,
            permutation_seeds,
            seed,
        })
    }

    /// The per-mode factors; `factors()[mode]` applies to `mode`.
    pub fn factors(&self) -> &[DenseMatrix] {
        &self.phi
    }

    /// Snapshot count (rows of the spectral factor).
    pub fn snapshots(&self) -> usize {
        self.snapshots
    }

    /// Band selected by each snapshot, in snapshot order.
    pub fn bands(&self) -> &[usize] {
        &self.bands
    }

    /// Seeds that generated the four permutations (recorded even when the
    /// permutations are identities so manifests have a stable schema).
    pub fn permutation_seeds(&self) -> [u64; 4] {
        self.permutation_seeds
    }

    /// Operator-level seed, for reporting.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Extents of the patch this operator measures.
    pub fn input_dims(&self) -> Vec<usize> {
        self.phi.iter().map(|m| m.cols()).collect()
    }

    /// Extents of the measurement tensor it produces.
    pub fn output_dims(&self) -> Vec<usize> {
        self.phi.iter().map(|m| m.rows()).collect()
    }
}

/// Stateless seed mixer (splitmix-style finalizer).
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent stream seed from (master, patch, stream).
pub(crate) fn derive_seed(master_seed: u64, patch_index: u64, stream: u64) -> u64 {
    mix(mix(mix(master_seed) ^ patch_index) ^ stream)
}

/// A `dim x dim` row-shuffled identity drawn uniformly from all
/// permutations (Fisher-Yates over a seeded stream).
pub fn make_permutation(dim: usize, seed: u64) -> Result<DenseMatrix> {
    if dim == 0 {
        return Err(Error::InvalidArgument(
            "permutation extent must be positive".to_string(),
        ));
    }
    let mut perm: Vec<usize> = (0..dim).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..dim).rev() {
        let j = rng.random_range(0..=i);
        perm.swap(i, j);
    }
    let mut m = DenseMatrix::zeros(dim, dim)?;
    for (row, &col) in perm.iter().enumerate() {
        m.set(row, col, 1.0);
    }
    Ok(m)
}

/// A `snapshots x bands` one-hot selector whose rows pick `snapshots`
/// distinct bands, drawn without replacement from a seeded stream.
pub fn make_onehot(bands: usize, snapshots: usize, seed: u64) -> Result<DenseMatrix> {
    if bands == 0 {
        return Err(Error::InvalidArgument(
            "band count must be positive".to_string(),
        ));
    }
    if snapshots == 0 || snapshots > bands {
        return Err(Error::InvalidArgument(format!(
            "snapshot count must be in 1..={bands}, got {snapshots}"
        )));
    }
    let mut pool: Vec<usize> = (0..bands).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Partial Fisher-Yates: after k swaps the prefix holds a uniform
    // without-replacement sample in draw order.
    for i in 0..snapshots {
        let j = rng.random_range(i..bands);
        pool.swap(i, j);
    }
    let mut m = DenseMatrix::zeros(snapshots, bands)?;
    for (row, &band) in pool[..snapshots].iter().enumerate() {
        m.set(row, band, 1.0);
    }
    Ok(m)
}

/// Builds the acquisition operator for one patch of a field.
///
/// Deterministic in `(spec.master_seed, patch_index)`: permutations draw
/// from per-mode streams, the band selection from its own stream, so
/// rebuilding any single patch's operator needs no global state.
pub fn build_operator(spec: &MaskSpec, patch_index: u64) -> Result<SeparableSensingOperator> {
    let mut permutation_seeds = [0u64; 4];
    let mut phi = Vec::with_capacity(FIELD_MODES);
    for (mode, slot) in permutation_seeds.iter_mut().enumerate() {
        let seed = derive_seed(
            spec.master_seed,
            patch_index,
            STREAM_PERM_BASE + mode as u64,
        );
        *slot = seed;
        let factor = if spec.shuffle_spatial_angular {
            make_permutation(spec.patch_dims[mode], seed)?
        } else {
            DenseMatrix::identity(spec.patch_dims[mode])
        };
        phi.push(factor);
    }
    let band_seed = derive_seed(spec.master_seed, patch_index, STREAM_BANDS);
    phi.push(make_onehot(spec.bands(), spec.snapshots, band_seed)?);
    SeparableSensingOperator::from_parts(
        phi,
        permutation_seeds,
        derive_seed(spec.master_seed, patch_index, STREAM_OPERATOR),
    )
}

/// Forward model: measures a patch, producing an `(s, t, u, v, snapshots)`
/// tensor via one n-mode product per mode.
pub fn sense(patch: &DenseTensor, op: &SeparableSensingOperator) -> Result<DenseTensor> {
    if patch.ndim() != FIELD_MODES {
        return Err(Error::InvalidArgument(format!(
            "expected a {FIELD_MODES}-way patch, got {} modes",
            patch.ndim()
        )));
    }
    let mut cur = patch.clone();
    for (mode, factor) in op.phi.iter().enumerate() {
        cur = nmode_product(&cur, factor, mode)?;
    }
    Ok(cur)
}

/// Materializes the flattened operator (Kronecker product of the factors in
/// reverse mode order) under [`DEFAULT_FLATTEN_CAP_BYTES`].
pub fn kron_flatten(op: &SeparableSensingOperator) -> Result<DenseMatrix> {
    kron_flatten_with_cap(op, DEFAULT_FLATTEN_CAP_BYTES)
}

/// [`kron_flatten`] with an explicit allocation cap in bytes.
pub fn kron_flatten_with_cap(op: &SeparableSensingOperator, cap_bytes: u64) -> Result<DenseMatrix> {
    let rows: u64 = op.phi.iter().map(|m| m.rows() as u64).product();
    let cols: u64 = op.phi.iter().map(|m| m.cols() as u64).product();
    let required_bytes = rows
        .checked_mul(cols)
        .and_then(|e| e.checked_mul(8))
        .ok_or(Error::CapExceeded {
            required_bytes: u64::MAX,
            cap_bytes,
        })?;
    if required_bytes > cap_bytes {
        return Err(Error::CapExceeded {
            required_bytes,
            cap_bytes,
        });
    }
    kron_all_rev(&op.phi)
}

fn is_permutation_matrix(m: &DenseMatrix) -> bool {
    if m.rows() != m.cols() {
        return false;
    }
    let n = m.rows();
    let mut col_seen = vec![false; n];
    for row in 0..n {
        let mut ones = 0usize;
        for (col, seen) in col_seen.iter_mut().enumerate() {
            let v = m.get(row, col);
            if v == 1.0 {
                ones += 1;
                if *seen {
                    return false;
                }
                *seen = true;
            } else if v != 0.0 {
                return false;
            }
        }
        if ones != 1 {
            return false;
        }
    }
    true
}

/// Returns the band per row if `m` is a binary one-hot selector with
/// distinct bands; `None` otherwise.
fn onehot_bands(m: &DenseMatrix) -> Option<Vec<usize>> {
    let mut col_seen = vec![false; m.cols()];
    let mut bands = Vec::with_capacity(m.rows());
    for row in 0..m.rows() {
        let mut hit: Option<usize> = None;
        for (col, seen) in col_seen.iter_mut().enumerate() {
            let v = m.get(row, col);
            if v == 1.0 {
                if hit.is_some() || *seen {
                    return None;
                }
                hit = Some(col);
                *seen = true;
            } else if v != 0.0 {
                return None;
            }
        }
        bands.push(hit?);
    }
    Some(bands)
}

/// Plain-text export of the acquisition schedule so a capture device (or a
/// later reconstruction run) can reproduce every patch's operator.
pub mod manifest {
    use super::*;

    /// One manifest line: a patch/snapshot pair, the band that snapshot
    /// selects, and the four permutation seeds of the patch.
    #[derive(Debug, Clone, PartialEq, Eq)]
    pub struct ManifestRow {
        pub patch: u64,
        pub snapshot: u64,
        pub band: usize,
        pub permutation_seeds: [u64; 4],
    }

    const HEADER: &str = "# mask manifest v1";
    const COLUMNS: &str = "# patch snapshot band seed_s seed_t seed_u seed_v";

    /// Rows describing one patch's operator, in snapshot order.
    pub fn rows_for_operator(patch_index: u64, op: &SeparableSensingOperator) -> Vec<ManifestRow> {
        op.bands()
            .iter()
            .enumerate()
            .map(|(snapshot, &band)| ManifestRow {
                patch: patch_index,
                snapshot: snapshot as u64,
                band,
                permutation_seeds: op.permutation_seeds(),
            })
            .collect()
    }

    /// Writes rows as whitespace-separated columns under a comment header.
    pub fn write_manifest<W: Write>(w: &mut W, rows: &[ManifestRow]) -> Result<()> {
        writeln!(w, "{HEADER}")?;
        writeln!(w, "{COLUMNS}")?;
        for r in rows {
            writeln!(
                w,
                "{} {} {} {} {} {} {}",
                r.patch,
                r.snapshot,
                r.band,
                r.permutation_seeds[0],
                r.permutation_seeds[1],
                r.permutation_seeds[2],
                r.permutation_seeds[3],
            )?;
        }
        Ok(())
    }

    /// Parses a manifest, reporting malformed lines with their byte offset.
    pub fn read_manifest<R: BufRead>(r: &mut R) -> Result<Vec<ManifestRow>> {
        let mut rows = Vec::new();
        let mut offset = 0u64;
        let mut line = String::new();
        loop {
            line.clear();
            let n = r.read_line(&mut line)?;
            if n == 0 {
                break;
            }
            let line_offset = offset;
            offset += n as u64;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            if fields.len() != 7 {
                return Err(Error::Format {
                    offset: line_offset,
                    message: format!("manifest line has {} fields, expected 7", fields.len()),
                });
            }
            let parse_u64 = |s: &str, what: &str| -> Result<u64> {
                s.parse().map_err(|_| Error::Format {
                    offset: line_offset,
                    message: format!("cannot parse {what} from {s:?}"),
                })
            };
            rows.push(ManifestRow {
                patch: parse_u64(fields[0], "patch index")?,
                snapshot: parse_u64(fields[1], "snapshot index")?,
                band: parse_u64(fields[2], "band")? as usize,
                permutation_seeds: [
                    parse_u64(fields[3], "seed")?,
                    parse_u64(fields[4], "seed")?,
                    parse_u64(fields[5], "seed")?,
                    parse_u64(fields[6], "seed")?,
                ],
            });
        }
        Ok(rows)
    }
}
