//! End-to-end orchestration: tile a light field into patches, sense each
//! patch, reconstruct every patch independently, and reassemble.
//!
//! # Tiling
//!
//! Fields are cut into non-overlapping patches over the spatial and angular
//! modes; the spectral mode is never tiled (it is the mode being
//! compressed, so every patch carries the full band axis). Extents that do
//! not divide evenly are extended by symmetric reflection, and
//! [`assemble_patches`] drops the reflected margin again, making
//! extract/assemble an exact inverse pair on the original region.
//!
//! # Per-patch independence
//!
//! Every patch gets its own seed-derived operator and is reconstructed in
//! isolation, so the parallel map over patches is embarrassingly parallel:
//! results are written to positions determined by the patch index alone,
//! and the assembled field is byte-identical for any thread count.
//!
//! # Measurement bundles
//!
//! [`write_bundle`] persists a sensing run as a directory:
//!
//! ```text
//! bundle/
//!   config.txt              key=value snapshot of the acquisition setup
//!   manifest.txt            per-snapshot band choices and permutation seeds
//!   patch_<i>_snap_<k>.tns  one measured (s,t,u,v) image per snapshot
//! ```
//!
//! [`read_bundle`] re-derives every operator from `config.txt` and refuses
//! the bundle if the manifest does not match, so a bundle can never be
//! silently reconstructed with the wrong masks.

use std::io::BufReader;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::dict::{SeparableDictionary, DEFAULT_FLATTEN_CAP_BYTES};
use crate::error::{Error, Result};
use crate::metrics::{factored_operator_bytes, flattened_operator_bytes, MetricsReport};
use crate::sensing::{
    build_operator, derive_seed, manifest, sense, MaskSpec, SeparableSensingOperator, FIELD_MODES,
    SPECTRAL_MODE,
};
use crate::sl0::{
    equilibrate_columns, pseudo_inverse, sl0_1d, sl0_nd_with_pinvs, undo_column_scaling, Sl0Params,
};
use crate::tensor::{devectorize, kron_all_rev, vectorize, DenseMatrix, DenseTensor};

/// Seed stream for deriving one independent master seed per snapshot count
/// in [`snapshot_sweep`]; disjoint from the per-operator streams.
const SWEEP_STREAM: u64 = 6;

/// How a light field is tiled into patches.
///
/// Patch indices enumerate grid positions in row-major order over
/// `(s, t, u, v)`: the angular `v` coordinate varies fastest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchGrid {
    field_dims: [usize; 5],
    patch_dims: [usize; 5],
    counts: [usize; 5],
    padded_dims: [usize; 5],
}

impl PatchGrid {
    /// Plans a tiling of `field_dims` by `patch_dims`.
    ///
    /// The spectral extents must agree exactly; the other four modes are
    /// padded up to the next multiple of the patch extent by reflection.
    pub fn new(field_dims: [usize; 5], patch_dims: [usize; 5]) -> Result<Self> {
        for (mode, (&f, &p)) in field_dims.iter().zip(&patch_dims).enumerate() {
            if f == 0 || p == 0 {
                return Err(Error::InvalidArgument(format!(
                    "extent for mode {mode} must be positive"
                )));
            }
        }
        if patch_dims[SPECTRAL_MODE] != field_dims[SPECTRAL_MODE] {
            return Err(Error::InvalidArgument(format!(
                "patches must keep the full spectral axis: field has {} bands, \
                 patch has {}",
                field_dims[SPECTRAL_MODE], patch_dims[SPECTRAL_MODE]
            )));
        }
        let mut counts = [0usize; 5];
        let mut padded_dims = [0usize; 5];
        for m in 0..FIELD_MODES {
            counts[m] = field_dims[m].div_ceil(patch_dims[m]);
            padded_dims[m] = counts[m] * patch_dims[m];
        }
        Ok(Self {
            field_dims,
            patch_dims,
            counts,
            padded_dims,
        })
    }

    /// Extents of the field being tiled.
    pub fn field_dims(&self) -> [usize; 5] {
        self.field_dims
    }

    /// Extents of one patch.
    pub fn patch_dims(&self) -> [usize; 5] {
        self.patch_dims
    }

    /// Patches along each mode (always 1 along the spectral mode).
    pub fn counts(&self) -> [usize; 5] {
        self.counts
    }

    /// Field extents after reflection padding.
    pub fn padded_dims(&self) -> [usize; 5] {
        self.padded_dims
    }

    /// Total number of patches.
    pub fn patch_count(&self) -> usize {
        self.counts.iter().product()
    }

    /// Padded-field coordinates of a patch's first element.
    pub fn patch_origin(&self, index: usize) -> [usize; 5] {
        debug_assert!(index < self.patch_count());
        let mut rest = index;
        let mut origin = [0usize; 5];
        // Row-major over (s, t, u, v): v fastest. The spectral mode is
        // never tiled, so its origin is always 0.
        for m in (0..SPECTRAL_MODE).rev() {
            origin[m] = (rest % self.counts[m]) * self.patch_dims[m];
            rest /= self.counts[m];
        }
        origin
    }
}

/// Maps a padded coordinate back into `[0, extent)` by symmetric
/// reflection: `extent` maps to `extent - 1`, `extent + 1` to `extent - 2`,
/// and so on.
fn reflect(i: usize, extent: usize) -> usize {
    let r = i % (2 * extent);
    if r < extent {
        r
    } else {
        2 * extent - 1 - r
    }
}

/// Cuts the field into patches in grid order.
///
/// Elements past the field boundary are filled by reflection, so every
/// patch has the full `patch_dims` shape.
pub fn extract_patches(field: &DenseTensor, grid: &PatchGrid) -> Result<Vec<DenseTensor>> {
    if field.dims() != grid.field_dims() {
        return Err(Error::InvalidArgument(format!(
            "field dims {:?} do not match the grid's {:?}",
            field.dims(),
            grid.field_dims()
        )));
    }
    let mut patches = Vec::with_capacity(grid.patch_count());
    for p in 0..grid.patch_count() {
        let origin = grid.patch_origin(p);
        let patch = DenseTensor::from_fn(&grid.patch_dims(), |local| {
            let mut src = [0usize; 5];
            for m in 0..FIELD_MODES {
                src[m] = reflect(origin[m] + local[m], grid.field_dims[m]);
            }
            field.get(&src)
        })?;
        patches.push(patch);
    }
    Ok(patches)
}

/// Reassembles patches into a field, dropping the reflected margin.
///
/// The exact inverse of [`extract_patches`] on the original region: every
/// in-range element is owned by exactly one patch and copied back
/// bit-identically.
pub fn assemble_patches(grid: &PatchGrid, patches: &[DenseTensor]) -> Result<DenseTensor> {
    if patches.len() != grid.patch_count() {
        return Err(Error::InvalidArgument(format!(
            "expected {} patches, got {}",
            grid.patch_count(),
            patches.len()
        )));
    }
    let mut field = DenseTensor::zeros(&grid.field_dims())?;
    let patch_dims = grid.patch_dims();
    for (p, patch) in patches.iter().enumerate() {
        if patch.dims() != patch_dims {
            return Err(Error::InvalidArgument(format!(
                "patch {p} has dims {:?}, expected {:?}",
                patch.dims(),
                patch_dims
            )));
        }
        let origin = grid.patch_origin(p);
        let mut local = [0usize; 5];
        'elements: loop {
            let mut global = [0usize; 5];
            let mut inside = true;
            for m in 0..FIELD_MODES {
                global[m] = origin[m] + local[m];
                inside &= global[m] < grid.field_dims[m];
            }
            if inside {
                field.set(&global, patch.get(&local));
            }
            // Odometer over patch-local coordinates, first mode fastest.
            for m in 0..FIELD_MODES {
                local[m] += 1;
                if local[m] < patch_dims[m] {
                    continue 'elements;
                }
                local[m] = 0;
            }
            break;
        }
    }
    Ok(field)
}

/// One sensing run: the tiling, the acquisition setup, and each patch's
/// measurements as an `(s, t, u, v, K)` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct SensedBundle {
    pub grid: PatchGrid,
    pub mask: MaskSpec,
    pub measurements: Vec<DenseTensor>,
    pub manifest: Vec<manifest::ManifestRow>,
}

/// Senses every patch of the field with its own seed-derived operator.
pub fn sense_lightfield(field: &DenseTensor, mask: &MaskSpec) -> Result<SensedBundle> {
    if field.ndim() != FIELD_MODES {
        return Err(Error::InvalidArgument(format!(
            "expected a 5-way field, got {} modes",
            field.ndim()
        )));
    }
    let mut field_dims = [0usize; 5];
    field_dims.copy_from_slice(field.dims());
    let grid = PatchGrid::new(field_dims, mask.patch_dims)?;
    let patches = extract_patches(field, &grid)?;

    let mut measurements = Vec::with_capacity(patches.len());
    let mut rows = Vec::with_capacity(patches.len() * mask.snapshots);
    for (p, patch) in patches.iter().enumerate() {
        let op = build_operator(mask, p as u64)?;
        measurements.push(sense(patch, &op)?);
        rows.extend(manifest::rows_for_operator(p as u64, &op));
    }
    Ok(SensedBundle {
        grid,
        mask: *mask,
        measurements,
        manifest: rows,
    })
}

const CONFIG_FILE: &str = "config.txt";
const MANIFEST_FILE: &str = "manifest.txt";

/// Persists a bundle as a directory of plain-text metadata plus one tensor
/// per patch/snapshot pair.
pub fn write_bundle(dir: &Path, bundle: &SensedBundle) -> Result<()> {
    std::fs::create_dir_all(dir)?;

    let g = &bundle.grid;
    let m = &bundle.mask;
    let config = format!(
        "# measurement bundle config v1\n\
         field_dims = {}\n\
         patch_dims = {}\n\
         snapshots = {}\n\
         master_seed = {}\n\
         shuffle_spatial_angular = {}\n",
        join_dims(&g.field_dims()),
        join_dims(&m.patch_dims),
        m.snapshots,
        m.master_seed,
        m.shuffle_spatial_angular,
    );
    std::fs::write(dir.join(CONFIG_FILE), config)?;

    let mut manifest_bytes = Vec::new();
    manifest::write_manifest(&mut manifest_bytes, &bundle.manifest)?;
    std::fs::write(dir.join(MANIFEST_FILE), manifest_bytes)?;

    // The snapshot axis is the slowest-varying mode, so each snapshot's
    // (s,t,u,v) image is one contiguous block of the measurement tensor.
    let image_dims: Vec<usize> = m.patch_dims[..SPECTRAL_MODE].to_vec();
    let image_len: usize = image_dims.iter().product();
    for (p, meas) in bundle.measurements.iter().enumerate() {
        for k in 0..m.snapshots {
            let block = &meas.data()[k * image_len..(k + 1) * image_len];
            let image = DenseTensor::new(image_dims.clone(), block.to_vec())?;
            crate::io::write_tensor(&dir.join(format!("patch_{p}_snap_{k}.tns")), &image)?;
        }
    }
    Ok(())
}

fn join_dims(dims: &[usize]) -> String {
    dims.iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_dims(value: &str, key: &str) -> Result<[usize; 5]> {
    let parts: Vec<usize> = value
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Validation(format!("config key {key}: {e}")))?;
    parts
        .try_into()
        .map_err(|_| Error::Validation(format!("config key {key} must list exactly 5 extents")))
}

/// Reads back a bundle written by [`write_bundle`].
///
/// The operators are re-derived from the config and checked against the
/// stored manifest, so a config or manifest edited out from under the
/// measurements is rejected as a validation error.
pub fn read_bundle(dir: &Path) -> Result<SensedBundle> {
    let text = std::fs::read_to_string(dir.join(CONFIG_FILE))?;
    let mut field_dims = None;
    let mut patch_dims = None;
    let mut snapshots = None;
    let mut master_seed = None;
    let mut shuffle = None;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Validation(format!("config line {line:?} is not key = value")))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "field_dims" => field_dims = Some(parse_dims(value, key)?),
            "patch_dims" => patch_dims = Some(parse_dims(value, key)?),
            "snapshots" => {
                snapshots = Some(
                    value
                        .parse::<usize>()
                        .map_err(|e| Error::Validation(format!("config key snapshots: {e}")))?,
                )
            }
            "master_seed" => {
                master_seed = Some(
                    value
                        .parse::<u64>()
                        .map_err(|e| Error::Validation(format!("config key master_seed: {e}")))?,
                )
            }
            "shuffle_spatial_angular" => {
                shuffle = Some(value.parse::<bool>().map_err(|e| {
                    Error::Validation(format!("config key shuffle_spatial_angular: {e}"))
                })?)
            }
            other => return Err(Error::Validation(format!("unknown config key {other:?}"))),
        }
    }
    let missing = |key: &str| Error::Validation(format!("config key {key} is missing"));
    let field_dims = field_dims.ok_or_else(|| missing("field_dims"))?;
    let patch_dims = patch_dims.ok_or_else(|| missing("patch_dims"))?;
    let snapshots = snapshots.ok_or_else(|| missing("snapshots"))?;
    let master_seed = master_seed.ok_or_else(|| missing("master_seed"))?;
    let shuffle = shuffle.ok_or_else(|| missing("shuffle_spatial_angular"))?;

    let mask = MaskSpec::new(patch_dims, snapshots, master_seed, shuffle)?;
    let grid = PatchGrid::new(field_dims, patch_dims)?;

    let mut reader = BufReader::new(std::fs::File::open(dir.join(MANIFEST_FILE))?);
    let stored_manifest = manifest::read_manifest(&mut reader)?;

    // Re-derive every operator and demand the stored manifest agrees.
    let mut expected = Vec::with_capacity(grid.patch_count() * snapshots);
    let mut operators = Vec::with_capacity(grid.patch_count());
    for p in 0..grid.patch_count() {
        let op = build_operator(&mask, p as u64)?;
        expected.extend(manifest::rows_for_operator(p as u64, &op));
        operators.push(op);
    }
    if stored_manifest != expected {
        return Err(Error::Validation(
            "manifest does not match the operators derived from the config; \
             the bundle has been edited or mixed from different runs"
                .to_string(),
        ));
    }

    let image_dims: Vec<usize> = patch_dims[..SPECTRAL_MODE].to_vec();
    let image_len: usize = image_dims.iter().product();
    let mut measurements = Vec::with_capacity(grid.patch_count());
    let mut meas_dims = patch_dims.to_vec();
    meas_dims[SPECTRAL_MODE] = snapshots;
    for p in 0..grid.patch_count() {
        let mut data = Vec::with_capacity(image_len * snapshots);
        for k in 0..snapshots {
            let image = crate::io::read_tensor(&dir.join(format!("patch_{p}_snap_{k}.tns")))?;
            if image.dims() != image_dims {
                return Err(Error::Validation(format!(
                    "patch_{p}_snap_{k}.tns has dims {:?}, expected {:?}",
                    image.dims(),
                    image_dims
                )));
            }
            data.extend_from_slice(image.data());
        }
        measurements.push(DenseTensor::new(meas_dims.clone(), data)?);
    }
    Ok(SensedBundle {
        grid,
        mask,
        measurements,
        manifest: stored_manifest,
    })
}

/// Which solver drives the per-patch recovery.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMode {
    /// Factored per-mode solve; operators stay as five small matrices.
    Factored,
    /// Baseline that materializes the full Kronecker operator and runs the
    /// one-dimensional solve, pseudo-inverse and all.
    Flattened,
}

impl SolverMode {
    /// Short label used in reports and CSV output.
    pub fn label(self) -> &'static str {
        match self {
            SolverMode::Factored => "nd",
            SolverMode::Flattened => "1d",
        }
    }
}

/// Everything [`reconstruct_lightfield`] needs besides the measurements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructionConfig {
    pub sl0: Sl0Params,
    pub mode: SolverMode,
    /// Worker threads for the parallel map over patches; 0 uses the
    /// process-wide default pool.
    pub threads: usize,
    /// Rescale the combined operator's columns to unit norm before solving
    /// (and map the coefficients back afterwards). The snapshot rows sample
    /// only a few bands, so dictionary atoms concentrated on unsampled
    /// bands otherwise enter the solve with tiny columns and are routinely
    /// missed; equilibration removes that bias without changing the
    /// solution set. Defaults to on — see
    /// `equilibration_rescues_band_starved_atoms` for a pinned instance
    /// that fails without it.
    pub column_equilibration: bool,
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        Self {
            sl0: Sl0Params::default(),
            mode: SolverMode::Factored,
            threads: 0,
            column_equilibration: true,
        }
    }
}

/// Timing and size accounting of one reconstruction run.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionStats {
    pub mode: SolverMode,
    /// End-to-end wall time including assembly.
    pub wall_seconds: f64,
    /// Per-patch wall time: operator construction, solve, and synthesis.
    pub patch_seconds: Vec<f64>,
    /// Bytes one patch operator occupies (with its pseudo-inverse) in the
    /// chosen mode.
    pub operator_bytes_per_patch: u64,
}

/// Per-mode products of the sensing factors with the dictionary factors.
fn combined_factors(
    op: &SeparableSensingOperator,
    dict: &SeparableDictionary,
) -> Result<Vec<DenseMatrix>> {
    op.factors()
        .iter()
        .zip(dict.factors())
        .map(|(phi, d)| phi.matmul(d))
        .collect()
}

/// Combined factors plus the column scales the configuration asks for.
///
/// Without equilibration the scales are `None` and the factors keep their
/// orthonormal rows, so the pseudo-inverses are plain transposes. With
/// equilibration the columns are rescaled to unit norm and the (small)
/// per-mode pseudo-inverses must be computed properly.
fn prepared_factors(
    op: &SeparableSensingOperator,
    dict: &SeparableDictionary,
    config: &ReconstructionConfig,
) -> Result<(Vec<DenseMatrix>, Option<Vec<Vec<f64>>>)> {
    let mut a = combined_factors(op, dict)?;
    let scales = if config.column_equilibration {
        Some(equilibrate_columns(&mut a))
    } else {
        None
    };
    Ok((a, scales))
}

/// Recovers one patch from its measurements via the factored solver.
pub fn reconstruct_patch(
    measurement: &DenseTensor,
    op: &SeparableSensingOperator,
    dict: &SeparableDictionary,
    config: &ReconstructionConfig,
) -> Result<DenseTensor> {
    let (a, scales) = prepared_factors(op, dict, config)?;
    let pinvs: Vec<DenseMatrix> = match &scales {
        Some(_) => a.iter().map(pseudo_inverse).collect(),
        None => a.iter().map(DenseMatrix::transpose).collect(),
    };
    let (mut coeffs, _) = sl0_nd_with_pinvs(measurement, &a, &pinvs, &config.sl0)?;
    if let Some(scales) = &scales {
        undo_column_scaling(&mut coeffs, scales)?;
    }
    dict.synthesize(&coeffs)
}

/// Recovers one patch through the flattened baseline: materializes the
/// Kronecker product of the combined factors and runs the one-dimensional
/// solve on it, computing the dense pseudo-inverse the hard way.
///
/// Equilibration, when enabled, rescales the factors before flattening;
/// since the Kronecker product's column norms are the products of the
/// per-mode column norms, this is exactly the same change of variables the
/// factored path applies, and the two paths keep solving the identical
/// problem.
pub fn reconstruct_patch_flattened(
    measurement: &DenseTensor,
    op: &SeparableSensingOperator,
    dict: &SeparableDictionary,
    config: &ReconstructionConfig,
) -> Result<DenseTensor> {
    let (a, scales) = prepared_factors(op, dict, config)?;
    let flat = flatten_factors(&a, DEFAULT_FLATTEN_CAP_BYTES)?;
    let y = vectorize(measurement);
    let (coeffs, _) = sl0_1d(&y, &flat, &config.sl0)?;
    let mut coeffs = devectorize(coeffs, &dict.dims())?;
    if let Some(scales) = &scales {
        undo_column_scaling(&mut coeffs, scales)?;
    }
    dict.synthesize(&coeffs)
}

/// Materializes the Kronecker product of per-mode factors, refusing to
/// allocate more than `cap_bytes`.
fn flatten_factors(factors: &[DenseMatrix], cap_bytes: u64) -> Result<DenseMatrix> {
    let mut rows = 1u64;
    let mut cols = 1u64;
    for f in factors {
        rows = rows.saturating_mul(f.rows() as u64);
        cols = cols.saturating_mul(f.cols() as u64);
    }
    let required = rows.saturating_mul(cols).saturating_mul(8);
    if required > cap_bytes {
        return Err(Error::CapExceeded {
            required_bytes: required,
            cap_bytes,
        });
    }
    kron_all_rev(factors)
}

/// Reconstructs every patch of a bundle and reassembles the field.
///
/// Patches are processed as a parallel map; each result lands at the
/// position its patch index dictates, so the output bytes are identical
/// for every thread count.
pub fn reconstruct_lightfield(
    bundle: &SensedBundle,
    dict: &SeparableDictionary,
    config: &ReconstructionConfig,
) -> Result<(DenseTensor, ReconstructionStats)> {
    if dict.dims() != bundle.mask.patch_dims {
        return Err(Error::Validation(format!(
            "dictionary dims {:?} do not match patch dims {:?}",
            dict.dims(),
            bundle.mask.patch_dims
        )));
    }
    if bundle.measurements.len() != bundle.grid.patch_count() {
        return Err(Error::Validation(format!(
            "bundle holds {} measurement tensors for {} patches",
            bundle.measurements.len(),
            bundle.grid.patch_count()
        )));
    }
    let start = Instant::now();

    let per_patch = |p: usize| -> Result<(DenseTensor, f64)> {
        let patch_start = Instant::now();
        let op = build_operator(&bundle.mask, p as u64)?;
        let recon = match config.mode {
            SolverMode::Factored => reconstruct_patch(&bundle.measurements[p], &op, dict, config)?,
            SolverMode::Flattened => {
                reconstruct_patch_flattened(&bundle.measurements[p], &op, dict, config)?
            }
        };
        Ok((recon, patch_start.elapsed().as_secs_f64()))
    };
    let run = || -> Result<Vec<(DenseTensor, f64)>> {
        (0..bundle.grid.patch_count())
            .into_par_iter()
            .map(per_patch)
            .collect()
    };
    let results = if config.threads == 0 {
        run()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(run)?
    };

    let mut patches = Vec::with_capacity(results.len());
    let mut patch_seconds = Vec::with_capacity(results.len());
    for (patch, seconds) in results {
        patches.push(patch);
        patch_seconds.push(seconds);
    }
    let field = assemble_patches(&bundle.grid, &patches)?;

    let shapes: Vec<(usize, usize)> = bundle
        .mask
        .patch_dims
        .iter()
        .enumerate()
        .map(|(m, &d)| {
            if m == SPECTRAL_MODE {
                (bundle.mask.snapshots, d)
            } else {
                (d, d)
            }
        })
        .collect();
    let operator_bytes_per_patch = match config.mode {
        SolverMode::Factored => factored_operator_bytes(&shapes),
        SolverMode::Flattened => flattened_operator_bytes(&shapes),
    };

    Ok((
        field,
        ReconstructionStats {
            mode: config.mode,
            wall_seconds: start.elapsed().as_secs_f64(),
            patch_seconds,
            operator_bytes_per_patch,
        },
    ))
}

/// One row of a snapshot sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub snapshots: usize,
    pub psnr_db: f64,
    pub ssim: f64,
    pub spectral_angle_deg: f64,
    pub time_seconds: f64,
}

/// Runs the full sense-and-reconstruct pipeline once per snapshot count.
///
/// Each count gets an independent mask: its master seed is derived from
/// the base mask's seed and the count, so sweeps are reproducible while
/// masks stay uncorrelated across counts.
pub fn snapshot_sweep(
    field: &DenseTensor,
    base_mask: &MaskSpec,
    dict: &SeparableDictionary,
    config: &ReconstructionConfig,
    snapshot_counts: &[usize],
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(snapshot_counts.len());
    for &k in snapshot_counts {
        let mask = MaskSpec::new(
            base_mask.patch_dims,
            k,
            derive_seed(base_mask.master_seed, k as u64, SWEEP_STREAM),
            base_mask.shuffle_spatial_angular,
        )?;
        let bundle = sense_lightfield(field, &mask)?;
        let (recon, stats) = reconstruct_lightfield(&bundle, dict, config)?;
        let report = MetricsReport::compute(field, &recon, 1.0)?;
        rows.push(SweepRow {
            snapshots: k,
            psnr_db: report.psnr_db,
            ssim: report.ssim.value,
            spectral_angle_deg: report.spectral_angle.mean_degrees,
            time_seconds: stats.wall_seconds,
        });
    }
    Ok(rows)
}
