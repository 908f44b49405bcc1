//! `mdcs` — batch driver for the separable light-field compressed-sensing
//! pipeline.
//!
//! Eight subcommands map one-to-one onto library operations: `synth`,
//! `train-dict`, `mask`, `sense`, `reconstruct`, `metrics`, `sweep`,
//! `bench`. Parameters resolve in three layers: built-in defaults, then a
//! plain-text `key=value` config file (`--config`), then explicit flags.
//!
//! Every run that writes an artifact also writes a run record next to it
//! (`<output>.run.txt`, or `run.txt` inside a bundle directory) holding the
//! fully resolved configuration, the tool version, and a SHA-256 of the
//! configuration payload. The record is itself a valid config file:
//! `mdcs <command> --config <record>` replays the run and, for all
//! deterministic artifacts (`.tns`, dictionaries, manifests, PNGs),
//! reproduces them byte for byte. Timing columns in sweep CSVs are
//! measurements and are exempt.
//!
//! Exit codes: 0 on success, 1 for validation/usage errors, 2 for I/O and
//! file-format errors.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use mdcs_core::dict::{
    learn_separable_dictionary, load_dictionary, memory_ratio, save_dictionary, SeparableDictionary,
};
use mdcs_core::error::Error as CoreError;
use mdcs_core::io::{read_tensor, spectral_to_rgb, synth_scene, write_tensor, SyntheticSceneSpec};
use mdcs_core::metrics::{
    factored_operator_bytes, flattened_operator_bytes, write_csv, BenchRow, MetricsReport,
};
use mdcs_core::pipeline::{
    extract_patches, read_bundle, reconstruct_lightfield, sense_lightfield, snapshot_sweep,
    write_bundle, PatchGrid, ReconstructionConfig, SolverMode,
};
use mdcs_core::sensing::{build_operator, compression_ratio, manifest, MaskSpec, SPECTRAL_MODE};
use mdcs_core::sl0::{AscentScaling, SigmaStart, Sl0Params};
use mdcs_core::tensor::DenseTensor;

const VERSION: &str = env!("CARGO_PKG_VERSION");

// ---------------------------------------------------------------------------
// Error handling and exit codes
// ---------------------------------------------------------------------------

/// A failure with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn validation(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }

    fn io(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Self {
        let code = match &e {
            CoreError::Io(_) | CoreError::Format { .. } => 2,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::io(e.to_string())
    }
}

type RunResult = Result<(), Failure>;

// ---------------------------------------------------------------------------
// Config files: plain key=value, '#' comments, flags take precedence.
// ---------------------------------------------------------------------------

#[derive(Default)]
struct Kv(BTreeMap<String, String>);

impl Kv {
    fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(Kv::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::io(format!("config {}: {e}", path.display())))?;
        let mut map = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Failure::validation(format!(
                    "config {}:{}: expected key=value, got {line:?}",
                    path.display(),
                    lineno + 1
                )));
            };
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Kv(map))
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }
}

/// Flag value if given, else config-file value, else default.
fn resolve<T: FromStr + Clone>(
    flag: &Option<T>,
    kv: &Kv,
    key: &str,
    default: T,
) -> Result<T, Failure>
where
    T::Err: std::fmt::Display,
{
    if let Some(v) = flag {
        return Ok(v.clone());
    }
    match kv.raw(key) {
        Some(raw) => raw
            .parse()
            .map_err(|e| Failure::validation(format!("config key {key}={raw:?}: {e}"))),
        None => Ok(default),
    }
}

/// Flag value if given, else config-file value, else an error naming the key.
fn resolve_required<T: FromStr + Clone>(flag: &Option<T>, kv: &Kv, key: &str) -> Result<T, Failure>
where
    T::Err: std::fmt::Display,
{
    if let Some(v) = flag {
        return Ok(v.clone());
    }
    match kv.raw(key) {
        Some(raw) => raw
            .parse()
            .map_err(|e| Failure::validation(format!("config key {key}={raw:?}: {e}"))),
        None => Err(Failure::validation(format!(
            "missing required parameter `{key}` (flag --{key} or config entry)"
        ))),
    }
}

// ---------------------------------------------------------------------------
// Small parseable wrappers for structured flag values
// ---------------------------------------------------------------------------

/// Five comma-separated extents, e.g. `5,5,4,4,13`.
#[derive(Clone, Copy, Debug)]
struct Dims5([usize; 5]);

impl FromStr for Dims5 {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 5 {
            return Err(format!(
                "expected 5 comma-separated extents, got {}",
                parts.len()
            ));
        }
        let mut dims = [0usize; 5];
        for (d, p) in dims.iter_mut().zip(&parts) {
            *d = p.parse().map_err(|e| format!("extent {p:?}: {e}"))?;
        }
        Ok(Dims5(dims))
    }
}

impl std::fmt::Display for Dims5 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s: Vec<String> = self.0.iter().map(usize::to_string).collect();
        write!(f, "{}", s.join(","))
    }
}

/// Comma-separated positive integers, e.g. `1,3,5,7,13`.
#[derive(Clone, Debug)]
struct UsizeList(Vec<usize>);

impl FromStr for UsizeList {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = Vec::new();
        for p in s.split(',').map(str::trim) {
            out.push(p.parse().map_err(|e| format!("entry {p:?}: {e}"))?);
        }
        if out.is_empty() {
            return Err("expected at least one entry".to_string());
        }
        Ok(UsizeList(out))
    }
}

impl std::fmt::Display for UsizeList {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s: Vec<String> = self.0.iter().map(usize::to_string).collect();
        write!(f, "{}", s.join(","))
    }
}

/// An angular view `u,v`.
#[derive(Clone, Copy, Debug)]
struct View(usize, usize);

impl FromStr for View {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 2 {
            return Err(format!("expected u,v, got {s:?}"));
        }
        Ok(View(
            parts[0]
                .parse()
                .map_err(|e| format!("u {:?}: {e}", parts[0]))?,
            parts[1]
                .parse()
                .map_err(|e| format!("v {:?}: {e}", parts[1]))?,
        ))
    }
}

impl std::fmt::Display for View {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{}", self.0, self.1)
    }
}

fn parse_sigma_start(s: &str) -> Result<SigmaStart, Failure> {
    match s {
        "initial-estimate" => Ok(SigmaStart::InitialEstimate),
        "measurement-max" => Ok(SigmaStart::MeasurementMax),
        other => Err(Failure::validation(format!(
            "sigma-start must be `initial-estimate` or `measurement-max`, got {other:?}"
        ))),
    }
}

fn parse_ascent(s: &str) -> Result<AscentScaling, Failure> {
    match s {
        "sigma2" => Ok(AscentScaling::Sigma2),
        "raw" => Ok(AscentScaling::Raw),
        other => Err(Failure::validation(format!(
            "ascent must be `sigma2` or `raw`, got {other:?}"
        ))),
    }
}

fn parse_mode(s: &str) -> Result<SolverMode, Failure> {
    match s {
        "nd" => Ok(SolverMode::Factored),
        "1d" => Ok(SolverMode::Flattened),
        other => Err(Failure::validation(format!(
            "mode must be `nd` or `1d`, got {other:?}"
        ))),
    }
}

// ---------------------------------------------------------------------------
// Run records
// ---------------------------------------------------------------------------

/// Writes the resolved configuration with version and payload hash. The
/// payload (the non-comment lines) is itself a loadable config file, so
/// `--config <record>` replays the run.
fn write_run_record(
    record_path: &Path,
    command: &str,
    entries: &[(&str, String)],
) -> Result<(), Failure> {
    let mut payload = String::new();
    let mut sorted: Vec<&(&str, String)> = entries.iter().collect();
    sorted.sort_by_key(|(k, _)| *k);
    for (key, value) in &sorted {
        let _ = writeln!(payload, "{key}={value}");
    }
    let digest = Sha256::digest(payload.as_bytes());
    let mut hex = String::with_capacity(64);
    for byte in digest {
        let _ = write!(hex, "{byte:02x}");
    }
    let record = format!(
        "# mdcs {command} run record\n# version={VERSION}\n# config_sha256={hex}\n{payload}"
    );
    std::fs::write(record_path, record)
        .map_err(|e| Failure::io(format!("run record {}: {e}", record_path.display())))?;
    Ok(())
}

fn record_path_for(output: &Path) -> PathBuf {
    let mut name = output
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "output".to_string());
    name.push_str(".run.txt");
    output.with_file_name(name)
}

// ---------------------------------------------------------------------------
// Shared flag groups
// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
struct SolverFlags {
    /// Anneal floor as a fraction of the starting scale, in (0, 1).
    #[arg(long)]
    sigma_min_factor: Option<f64>,
    /// Multiplicative anneal decay per outer round, in (0, 1).
    #[arg(long)]
    sigma_decrease: Option<f64>,
    /// Gradient/projection steps per outer round.
    #[arg(long)]
    inner_iterations: Option<usize>,
    /// Gradient step size.
    #[arg(long)]
    step_size: Option<f64>,
    /// Anneal start rule: `initial-estimate` or `measurement-max`.
    #[arg(long)]
    sigma_start: Option<String>,
    /// Gradient scaling rule: `sigma2` or `raw`.
    #[arg(long)]
    ascent: Option<String>,
    /// Rescale operator columns to unit norm before solving (true/false).
    #[arg(long)]
    equilibration: Option<bool>,
    /// Worker threads for the patch map; 0 uses all cores.
    #[arg(long)]
    threads: Option<usize>,
}

/// Resolved solver settings plus the record entries they came from.
struct SolverChoice {
    config: ReconstructionConfig,
    entries: Vec<(&'static str, String)>,
}

fn resolve_solver(flags: &SolverFlags, kv: &Kv, mode: SolverMode) -> Result<SolverChoice, Failure> {
    let defaults = Sl0Params::default();
    let sigma_min_factor = resolve(
        &flags.sigma_min_factor,
        kv,
        "sigma_min_factor",
        defaults.sigma_min_factor,
    )?;
    let sigma_decrease = resolve(
        &flags.sigma_decrease,
        kv,
        "sigma_decrease",
        defaults.sigma_decrease,
    )?;
    let inner_iterations = resolve(
        &flags.inner_iterations,
        kv,
        "inner_iterations",
        defaults.inner_iterations,
    )?;
    let step_size = resolve(&flags.step_size, kv, "step_size", defaults.step_size)?;
    let sigma_start_name = resolve(
        &flags.sigma_start,
        kv,
        "sigma_start",
        "initial-estimate".to_string(),
    )?;
    let ascent_name = resolve(&flags.ascent, kv, "ascent", "sigma2".to_string())?;
    let equilibration = resolve(&flags.equilibration, kv, "equilibration", true)?;
    let threads = resolve(&flags.threads, kv, "threads", 0)?;

    let sl0 = Sl0Params {
        sigma_min_factor,
        sigma_decrease,
        inner_iterations,
        step_size,
        sigma_start: parse_sigma_start(&sigma_start_name)?,
        ascent: parse_ascent(&ascent_name)?,
    };
    sl0.validate()?;
    let config = ReconstructionConfig {
        sl0,
        mode,
        threads,
        column_equilibration: equilibration,
    };
    let entries = vec![
        ("sigma_min_factor", sigma_min_factor.to_string()),
        ("sigma_decrease", sigma_decrease.to_string()),
        ("inner_iterations", inner_iterations.to_string()),
        ("step_size", step_size.to_string()),
        ("sigma_start", sigma_start_name),
        ("ascent", ascent_name),
        ("equilibration", equilibration.to_string()),
        ("threads", threads.to_string()),
    ];
    Ok(SolverChoice { config, entries })
}

/// Loads `dct` or a dictionary file path for the given patch extents.
fn resolve_basis(name: &str, patch_dims: &[usize; 5]) -> Result<SeparableDictionary, Failure> {
    if name == "dct" {
        return Ok(SeparableDictionary::dct(patch_dims)?);
    }
    let dict = load_dictionary(Path::new(name))?;
    if dict.dims().as_slice() != patch_dims.as_slice() {
        return Err(Failure::validation(format!(
            "dictionary {name} has extents {:?}, expected {:?}",
            dict.dims(),
            patch_dims
        )));
    }
    Ok(dict)
}

fn save_view_png(field: &DenseTensor, view: Option<View>, png: &Path) -> Result<(), Failure> {
    let dims = field.dims();
    let View(u, v) = view.unwrap_or(View(dims[2] / 2, dims[3] / 2));
    let img = spectral_to_rgb(field, u, v, None)?;
    img.save(png)
        .map_err(|e| Failure::io(format!("png {}: {e}", png.display())))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// CLI surface
// ---------------------------------------------------------------------------

#[derive(Parser, Debug)]
#[command(
    name = "mdcs",
    version,
    about = "Separable compressed sensing for multispectral light fields",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic multispectral light field.
    Synth(SynthArgs),
    /// Fit a separable dictionary to a field's patches.
    TrainDict(TrainDictArgs),
    /// Export the per-patch mask manifest for an acquisition device.
    Mask(MaskArgs),
    /// Simulate coded acquisition of a field into a measurement bundle.
    Sense(SenseArgs),
    /// Reconstruct a field from a measurement bundle.
    Reconstruct(ReconstructArgs),
    /// Compare two fields: PSNR, SSIM, spectral angle.
    Metrics(MetricsArgs),
    /// Reconstruct at several snapshot counts and tabulate quality.
    Sweep(SweepArgs),
    /// Print operator storage accounting and optional solver timings.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// key=value defaults file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Field extents `s,t,u,v,bands`.
    #[arg(long)]
    dims: Option<Dims5>,
    /// Number of Gaussian blobs.
    #[arg(long)]
    primitives: Option<usize>,
    /// Pixels of view shift per angular step.
    #[arg(long)]
    disparity: Option<f64>,
    /// Random seed; all randomness derives from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Output `.tns` path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also render one view to this PNG.
    #[arg(long)]
    png: Option<PathBuf>,
    /// View `u,v` for --png; defaults to the central view.
    #[arg(long)]
    view: Option<View>,
}

fn run_synth(args: &SynthArgs) -> RunResult {
    let kv = Kv::load(args.config.as_deref())?;
    let dims = resolve(&args.dims, &kv, "dims", Dims5([20, 20, 4, 4, 13]))?;
    let primitives = resolve(&args.primitives, &kv, "primitives", 6)?;
    let disparity = resolve(&args.disparity, &kv, "disparity", 1.0)?;
    let seed = resolve(&args.seed, &kv, "seed", 0)?;
    let out: PathBuf = resolve_required(&args.out, &kv, "out")?;

    let field = synth_scene(&SyntheticSceneSpec {
        dims: dims.0,
        primitives,
        disparity,
        seed,
    })?;
    write_tensor(&out, &field)?;
    if let Some(png) = &args.png {
        save_view_png(&field, args.view, png)?;
    }
    write_run_record(
        &record_path_for(&out),
        "synth",
        &[
            ("dims", dims.to_string()),
            ("primitives", primitives.to_string()),
            ("disparity", disparity.to_string()),
            ("seed", seed.to_string()),
            ("out", out.display().to_string()),
        ],
    )?;
    println!("wrote={}", out.display());
    println!("dims={dims}");
    println!("seed={seed}");
    Ok(())
}

#[derive(Args, Debug)]
struct TrainDictArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training field (`.tns`).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Patch extents `s,t,u,v,bands`; spectral extent must match the field.
    #[arg(long)]
    patch: Option<Dims5>,
    /// Output dictionary path.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run_train_dict(args: &TrainDictArgs) -> RunResult {
    let kv = Kv::load(args.config.as_deref())?;
    let input: PathBuf = resolve_required(&args.input, &kv, "input")?;
    let patch = resolve(&args.patch, &kv, "patch", Dims5([5, 5, 4, 4, 13]))?;
    let out: PathBuf = resolve_required(&args.out, &kv, "out")?;

    let field = read_tensor(&input)?;
    let field_dims: [usize; 5] = field
        .dims()
        .try_into()
        .map_err(|_| Failure::validation(format!("{} is not a 5-way field", input.display())))?;
    let grid = PatchGrid::new(field_dims, patch.0)?;
    let patches = extract_patches(&field, &grid)?;
    let dict = learn_separable_dictionary(&patches)?;
    save_dictionary(&dict, &out)?;
    write_run_record(
        &record_path_for(&out),
        "train-dict",
        &[
            ("input", input.display().to_string()),
            ("patch", patch.to_string()),
            ("out", out.display().to_string()),
        ],
    )?;
    println!("wrote={}", out.display());
    println!("patches={}", patches.len());
    Ok(())
}

#[derive(Args, Debug)]
struct MaskArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Patch extents `s,t,u,v,bands`.
    #[arg(long)]
    patch: Option<Dims5>,
    /// Snapshots per patch (distinct bands).
    #[arg(long)]
    snapshots: Option<usize>,
    /// Master seed for band draws and permutations.
    #[arg(long)]
    seed: Option<u64>,
    /// Randomize spatial/angular orientations (true/false).
    #[arg(long)]
    shuffle: Option<bool>,
    /// Number of patches to list in the manifest.
    #[arg(long)]
    patches: Option<usize>,
    /// Output manifest path.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run_mask(args: &MaskArgs) -> RunResult {
    let kv = Kv::load(args.config.as_deref())?;
    let patch = resolve(&args.patch, &kv, "patch", Dims5([5, 5, 4, 4, 13]))?;
    let snapshots = resolve(&args.snapshots, &kv, "snapshots", 1)?;
    let seed = resolve(&args.seed, &kv, "seed", 0)?;
    let shuffle = resolve(&args.shuffle, &kv, "shuffle", true)?;
    let patches = resolve(&args.patches, &kv, "patches", 1)?;
    let out: PathBuf = resolve_required(&args.out, &kv, "out")?;

    let mask = MaskSpec::new(patch.0, snapshots, seed, shuffle)?;
    let mut rows = Vec::with_capacity(patches * snapshots);
    for p in 0..patches {
        let op = build_operator(&mask, p as u64)?;
        rows.extend(manifest::rows_for_operator(p as u64, &op));
    }
    let mut file = std::io::BufWriter::new(std::fs::File::create(&out)?);
    manifest::write_manifest(&mut file, &rows)?;
    drop(file);
    write_run_record(
        &record_path_for(&out),
        "mask",
        &[
            ("patch", patch.to_string()),
            ("snapshots", snapshots.to_string()),
            ("seed", seed.to_string()),
            ("shuffle", shuffle.to_string()),
            ("patches", patches.to_string()),
            ("out", out.display().to_string()),
        ],
    )?;
    println!("wrote={}", out.display());
    println!("rows={}", rows.len());
    println!("compression_ratio={}", compression_ratio(&mask));
    Ok(())
}

#[derive(Args, Debug)]
struct SenseArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input field (`.tns`).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Patch extents `s,t,u,v,bands`.
    #[arg(long)]
    patch: Option<Dims5>,
    /// Snapshots per patch (distinct bands).
    #[arg(long)]
    snapshots: Option<usize>,
    /// Master seed for band draws and permutations.
    #[arg(long)]
    seed: Option<u64>,
    /// Randomize spatial/angular orientations (true/false).
    #[arg(long)]
    shuffle: Option<bool>,
    /// Output bundle directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run_sense(args: &SenseArgs) -> RunResult {
    let kv = Kv::load(args.config.as_deref())?;
    let input: PathBuf = resolve_required(&args.input, &kv, "input")?;
    let patch = resolve(&args.patch, &kv, "patch", Dims5([5, 5, 4, 4, 13]))?;
    let snapshots = resolve(&args.snapshots, &kv, "snapshots", 1)?;
    let seed = resolve(&args.seed, &kv, "seed", 0)?;
    let shuffle = resolve(&args.shuffle, &kv, "shuffle", true)?;
    let out: PathBuf = resolve_required(&args.out, &kv, "out")?;

    let field = read_tensor(&input)?;
    let mask = MaskSpec::new(patch.0, snapshots, seed, shuffle)?;
    let bundle = sense_lightfield(&field, &mask)?;
    write_bundle(&out, &bundle)?;
    let measured: usize = bundle.measurements.iter().map(DenseTensor::len).sum();
    write_run_record(
        &out.join("run.txt"),
        "sense",
        &[
            ("input", input.display().to_string()),
            ("patch", patch.to_string()),
            ("snapshots", snapshots.to_string()),
            ("seed", seed.to_string()),
            ("shuffle", shuffle.to_string()),
            ("out", out.display().to_string()),
        ],
    )?;
    println!("wrote={}", out.display());
    println!("patches={}", bundle.grid.patch_count());
    println!("measured_samples={measured}");
    println!("field_samples={}", field.len());
    Ok(())
}

#[derive(Args, Debug)]
struct ReconstructArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Measurement bundle directory (from `sense`).
    #[arg(long)]
    bundle: Option<PathBuf>,
    /// `dct` or a dictionary file path (from `train-dict`).
    #[arg(long)]
    basis: Option<String>,
    /// Solver form: `nd` (factored) or `1d` (flattened baseline).
    #[arg(long)]
    mode: Option<String>,
    #[command(flatten)]
    solver: SolverFlags,
    /// Output field path (`.tns`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also render one view of the reconstruction to this PNG.
    #[arg(long)]
    png: Option<PathBuf>,
    /// View `u,v` for --png; defaults to the central view.
    #[arg(long)]
    view: Option<View>,
}

fn run_reconstruct(args: &ReconstructArgs) -> RunResult {
    let kv = Kv::load(args.config.as_deref())?;
    let bundle_dir: PathBuf = resolve_required(&args.bundle, &kv, "bundle")?;
    let basis = resolve(&args.basis, &kv, "basis", "dct".to_string())?;
    let mode_name = resolve(&args.mode, &kv, "mode", "nd".to_string())?;
    let out: PathBuf = resolve_required(&args.out, &kv, "out")?;
    let mode = parse_mode(&mode_name)?;
    let solver = resolve_solver(&args.solver, &kv, mode)?;

    let bundle = read_bundle(&bundle_dir)?;
    let dict = resolve_basis(&basis, &bundle.mask.patch_dims)?;
    let (field, stats) = reconstruct_lightfield(&bundle, &dict, &solver.config)?;
    write_tensor(&out, &field)?;
    if let Some(png) = &args.png {
        save_view_png(&field, args.view, png)?;
    }
    let mut entries = vec![
        ("bundle", bundle_dir.display().to_string()),
        ("basis", basis.clone()),
        ("mode", mode_name.clone()),
        ("out", out.display().to_string()),
    ];
    entries.extend(solver.entries);
    write_run_record(&record_path_for(&out), "reconstruct", &entries)?;
    println!("wrote={}", out.display());
    println!("mode={}", stats.mode.label());
    println!("patches={}", stats.patch_seconds.len());
    println!("wall_seconds={}", stats.wall_seconds);
    println!(
        "operator_bytes_per_patch={}",
        stats.operator_bytes_per_patch
    );
    Ok(())
}

#[derive(Args, Debug)]
struct MetricsArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Ground-truth field (`.tns`).
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Estimate field (`.tns`).
    #[arg(long)]
    estimate: Option<PathBuf>,
    /// Peak signal value for PSNR.
    #[arg(long)]
    peak: Option<f64>,
}

fn run_metrics(args: &MetricsArgs) -> RunResult {
    let kv = Kv::load(args.config.as_deref())?;
    let reference: PathBuf = resolve_required(&args.reference, &kv, "reference")?;
    let estimate: PathBuf = resolve_required(&args.estimate, &kv, "estimate")?;
    let peak = resolve(&args.peak, &kv, "peak", 1.0)?;

    let reference_field = read_tensor(&reference)?;
    let estimate_field = read_tensor(&estimate)?;
    let report = MetricsReport::compute(&reference_field, &estimate_field, peak)?;
    println!("psnr_db={}", report.psnr_db);
    println!("ssim={}", report.ssim.value);
    println!("spectral_angle_deg={}", report.spectral_angle.mean_degrees);
    Ok(())
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input field (`.tns`).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Patch extents `s,t,u,v,bands`.
    #[arg(long)]
    patch: Option<Dims5>,
    /// Snapshot counts to sweep, e.g. `1,3,5,7,13`.
    #[arg(long)]
    snapshots: Option<UsizeList>,
    /// Master seed; per-count masks derive from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Randomize spatial/angular orientations (true/false).
    #[arg(long)]
    shuffle: Option<bool>,
    /// `dct` or a dictionary file path.
    #[arg(long)]
    basis: Option<String>,
    /// Solver form: `nd` or `1d`.
    #[arg(long)]
    mode: Option<String>,
    #[command(flatten)]
    solver: SolverFlags,
    /// Write the table as CSV here.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn run_sweep(args: &SweepArgs) -> RunResult {
    let kv = Kv::load(args.config.as_deref())?;
    let input: PathBuf = resolve_required(&args.input, &kv, "input")?;
    let patch = resolve(&args.patch, &kv, "patch", Dims5([5, 5, 4, 4, 13]))?;
    let snapshots = resolve(
        &args.snapshots,
        &kv,
        "snapshots",
        UsizeList(vec![1, 3, 5, 7, 13]),
    )?;
    let seed = resolve(&args.seed, &kv, "seed", 0)?;
    let shuffle = resolve(&args.shuffle, &kv, "shuffle", true)?;
    let basis = resolve(&args.basis, &kv, "basis", "dct".to_string())?;
    let mode_name = resolve(&args.mode, &kv, "mode", "nd".to_string())?;
    let mode = parse_mode(&mode_name)?;
    let solver = resolve_solver(&args.solver, &kv, mode)?;

    let field = read_tensor(&input)?;
    let dict = resolve_basis(&basis, &patch.0)?;
    let base_mask = MaskSpec::new(patch.0, 1, seed, shuffle)?;
    let rows = snapshot_sweep(&field, &base_mask, &dict, &solver.config, &snapshots.0)?;

    let scene = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "field".to_string());
    let bench_rows: Vec<BenchRow> = rows
        .iter()
        .map(|r| {
            let shapes: Vec<(usize, usize)> = patch
                .0
                .iter()
                .enumerate()
                .map(|(m, &d)| {
                    if m == SPECTRAL_MODE {
                        (r.snapshots, d)
                    } else {
                        (d, d)
                    }
                })
                .collect();
            let operator_bytes = match mode {
                SolverMode::Factored => factored_operator_bytes(&shapes),
                SolverMode::Flattened => flattened_operator_bytes(&shapes),
            };
            BenchRow {
                scene: scene.clone(),
                basis: basis.clone(),
                mode: mode.label().to_string(),
                snapshots: r.snapshots,
                psnr_db: r.psnr_db,
                ssim: r.ssim,
                spectral_angle_deg: r.spectral_angle_deg,
                time_seconds: r.time_seconds,
                operator_bytes,
            }
        })
        .collect();

    let mut stdout = std::io::stdout().lock();
    write_csv(&mut stdout, &bench_rows)?;
    drop(stdout);
    if let Some(csv) = &args.csv {
        let mut file = std::io::BufWriter::new(std::fs::File::create(csv)?);
        write_csv(&mut file, &bench_rows)?;
        drop(file);
        let mut entries = vec![
            ("input", input.display().to_string()),
            ("patch", patch.to_string()),
            ("snapshots", snapshots.to_string()),
            ("seed", seed.to_string()),
            ("shuffle", shuffle.to_string()),
            ("basis", basis.clone()),
            ("mode", mode_name.clone()),
            ("csv", csv.display().to_string()),
        ];
        entries.extend(solver.entries);
        write_run_record(&record_path_for(csv), "sweep", &entries)?;
    }
    Ok(())
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Patch extents `s,t,u,v,bands`.
    #[arg(long)]
    patch: Option<Dims5>,
    /// Snapshots per patch for the byte accounting and timings.
    #[arg(long)]
    snapshots: Option<usize>,
    /// Seed for the timing instance.
    #[arg(long)]
    seed: Option<u64>,
    /// Also time one factored and one flattened patch solve.
    #[arg(long)]
    time_solvers: bool,
}

fn run_bench(args: &BenchArgs) -> RunResult {
    let kv = Kv::load(args.config.as_deref())?;
    let patch = resolve(&args.patch, &kv, "patch", Dims5([5, 5, 4, 4, 13]))?;
    let snapshots = resolve(&args.snapshots, &kv, "snapshots", 5)?;
    let seed = resolve(&args.seed, &kv, "seed", 0)?;

    let dims = patch.0;
    let full_elements: u64 = {
        let n: u64 = dims.iter().map(|&d| d as u64).product();
        n * n
    };
    let separable_elements: u64 = dims.iter().map(|&d| (d * d) as u64).sum();
    println!("patch={patch}");
    println!("flattened_elements={full_elements}");
    println!("separable_elements={separable_elements}");
    println!("memory_ratio={:.2}", memory_ratio(&dims));

    let shapes: Vec<(usize, usize)> = dims
        .iter()
        .enumerate()
        .map(|(m, &d)| {
            if m == SPECTRAL_MODE {
                (snapshots, d)
            } else {
                (d, d)
            }
        })
        .collect();
    println!("snapshots={snapshots}");
    println!(
        "factored_operator_bytes={}",
        factored_operator_bytes(&shapes)
    );
    println!(
        "flattened_operator_bytes={}",
        flattened_operator_bytes(&shapes)
    );

    if args.time_solvers {
        use mdcs_core::pipeline::{reconstruct_patch, reconstruct_patch_flattened};
        use mdcs_core::sensing::sense;
        let dict = SeparableDictionary::dct(&dims)?;
        let mask = MaskSpec::new(dims, snapshots, seed, true)?;
        let op = build_operator(&mask, 0)?;
        let field = synth_scene(&SyntheticSceneSpec {
            dims,
            primitives: 3,
            disparity: 0.5,
            seed,
        })?;
        let meas = sense(&field, &op)?;
        let config = ReconstructionConfig::default();
        let t0 = std::time::Instant::now();
        let _ = reconstruct_patch(&meas, &op, &dict, &config)?;
        let nd_seconds = t0.elapsed().as_secs_f64();
        let t1 = std::time::Instant::now();
        let _ = reconstruct_patch_flattened(&meas, &op, &dict, &config)?;
        let flattened_seconds = t1.elapsed().as_secs_f64();
        println!("nd_seconds={nd_seconds}");
        println!("flattened_seconds={flattened_seconds}");
        println!("speedup={:.1}", flattened_seconds / nd_seconds);
    }
    Ok(())
}

// ---------------------------------------------------------------------------

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version displays are successful outcomes; everything
            // else is a usage problem.
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    ExitCode::SUCCESS
                }
                _ => {
                    let _ = e.print();
                    ExitCode::from(1)
                }
            };
        }
    };
    let result = match &cli.command {
        Command::Synth(args) => run_synth(args),
        Command::TrainDict(args) => run_train_dict(args),
        Command::Mask(args) => run_mask(args),
        Command::Sense(args) => run_sense(args),
        Command::Reconstruct(args) => run_reconstruct(args),
        Command::Metrics(args) => run_metrics(args),
        Command::Sweep(args) => run_sweep(args),
        Command::Bench(args) => run_bench(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
