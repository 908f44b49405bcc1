//! End-to-end acceptance gates.
//!
//! Each test checks one headline capability of the crate and prints a
//! one-line summary, so `cargo test --test acceptance -- --nocapture`
//! doubles as a capability report. Tolerances and problem sizes are pinned
//! here, on purpose: they are the contract, not tunables.

use std::sync::OnceLock;
use std::time::Instant;

use mdcs_core::dict::{
    learn_separable_dictionary, memory_ratio, DictionaryKind, SeparableDictionary,
};
use mdcs_core::io::{synth_scene, SyntheticSceneSpec};
use mdcs_core::metrics::{psnr, spectral_angle, ssim};
use mdcs_core::pipeline::{
    reconstruct_lightfield, reconstruct_patch, sense_lightfield, snapshot_sweep,
    ReconstructionConfig, ReconstructionStats, SolverMode,
};
use mdcs_core::sensing::{build_operator, kron_flatten, sense, MaskSpec, SeparableSensingOperator};
use mdcs_core::sl0::{pseudo_inverse, Sl0Params};
use mdcs_core::tensor::{vectorize, DenseMatrix, DenseTensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Patch extents used throughout: 5x5 spatial, 4x4 angular, 13 bands.
const PATCH: [usize; 5] = [5, 5, 4, 4, 13];

/// Anneal schedule pinned for the recovery-accuracy gates: the floor sets
/// the final accuracy (well below the 1e-3 relative-error target) and the
/// slower decay gives the anneal enough rounds to sort large coefficients
/// from small ones.
fn pinned_sl0() -> Sl0Params {
    Sl0Params {
        sigma_min_factor: 1e-5,
        sigma_decrease: 0.9,
        inner_iterations: 5,
        step_size: 2.0,
        ..Sl0Params::default()
    }
}

fn pinned_config() -> ReconstructionConfig {
    ReconstructionConfig {
        sl0: pinned_sl0(),
        ..ReconstructionConfig::default()
    }
}

/// Draws a tensor with exactly `k` nonzero entries in `[0.5, 1.5)` with
/// random signs at distinct random positions.
fn sparse_tensor(dims: &[usize], k: usize, rng: &mut ChaCha8Rng) -> DenseTensor {
    let len: usize = dims.iter().product();
    let mut t = DenseTensor::zeros(dims).unwrap();
    let mut used = std::collections::HashSet::new();
    while used.len() < k {
        let flat = rng.random_range(0..len);
        if !used.insert(flat) {
            continue;
        }
        let sign = if rng.random_range(0..2) == 0 {
            1.0
        } else {
            -1.0
        };
        t.data_mut()[flat] = sign * rng.random_range(0.5..1.5);
    }
    t
}

fn rel_err(truth: &DenseTensor, estimate: &DenseTensor) -> f64 {
    let err: f64 = truth
        .data()
        .iter()
        .zip(estimate.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let norm: f64 = truth.data().iter().map(|v| v * v).sum::<f64>().sqrt();
    err / norm
}

/// Smallest-footprint mixed-radix decomposition, dimension 0 fastest.
fn multi_index(mut flat: usize, dims: &[usize]) -> Vec<usize> {
    let mut idx = Vec::with_capacity(dims.len());
    for &d in dims {
        idx.push(flat % d);
        flat /= d;
    }
    idx
}

// ---------------------------------------------------------------------------
// 1. The factored forward model equals the flattened one.
// ---------------------------------------------------------------------------

#[test]
fn sensing_equivalence_factored_vs_flattened() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for trial in 0..200u64 {
        let snapshots = rng.random_range(1..=PATCH[4]);
        let mask =
            MaskSpec::new(PATCH, snapshots, 7000 + trial, rng.random_range(0..2) == 0).unwrap();
        let op = build_operator(&mask, rng.random_range(0..64)).unwrap();
        let patch = DenseTensor::from_fn(&PATCH, |_| rng.random_range(-1.0..1.0)).unwrap();

        let factored = vectorize(&sense(&patch, &op).unwrap());
        let flat = kron_flatten(&op).unwrap();
        let flattened = flat.matvec(&vectorize(&patch)).unwrap();

        let diff = factored
            .iter()
            .zip(&flattened)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        worst = worst.max(diff);
    }
    let elapsed = start.elapsed().as_secs_f64();
    println!(
        "sensing equivalence: max |factored - flattened| = {worst:.2e} \
         over 200 random operators in {elapsed:.1} s (PASS needs <= 1e-10, < 30 s)"
    );
    assert!(worst <= 1e-10, "forward models disagree by {worst:.2e}");
    assert!(elapsed < 30.0, "took {elapsed:.1} s, budget is 30 s");
}

// ---------------------------------------------------------------------------
// 2 & 3. Desk-scale field: the factored and flattened reconstructions agree,
// and the factored one is at least an order of magnitude faster.
// ---------------------------------------------------------------------------

struct DeskScale {
    field: DenseTensor,
    nd_field: DenseTensor,
    nd_stats: ReconstructionStats,
    flat_field: DenseTensor,
    flat_stats: ReconstructionStats,
    elapsed_seconds: f64,
}

fn desk_scale() -> &'static DeskScale {
    static DESK: OnceLock<DeskScale> = OnceLock::new();
    DESK.get_or_init(|| {
        let start = Instant::now();
        let field = synth_scene(&SyntheticSceneSpec {
            dims: [20, 20, 4, 4, 13],
            primitives: 6,
            disparity: 1.0,
            seed: 77,
        })
        .unwrap();
        // Angular 2x2 tiles keep the flattened baseline tractable: its
        // operator still has 500x1300 entries per patch, paid 64 times.
        let mask = MaskSpec::new([5, 5, 2, 2, 13], 5, 4242, true).unwrap();
        let bundle = sense_lightfield(&field, &mask).unwrap();
        let run = |mode: SolverMode| {
            let config = ReconstructionConfig {
                mode,
                threads: 1,
                ..ReconstructionConfig::default()
            };
            reconstruct_lightfield(
                &bundle,
                &SeparableDictionary::dct(&mask.patch_dims).unwrap(),
                &config,
            )
            .unwrap()
        };
        let (nd_field, nd_stats) = run(SolverMode::Factored);
        let (flat_field, flat_stats) = run(SolverMode::Flattened);
        DeskScale {
            field,
            nd_field,
            nd_stats,
            flat_field,
            flat_stats,
            elapsed_seconds: start.elapsed().as_secs_f64(),
        }
    })
}

#[test]
fn solver_equivalence_factored_vs_flattened() {
    let desk = desk_scale();
    let psnr_nd = psnr(&desk.field, &desk.nd_field, 1.0).unwrap();
    let psnr_flat = psnr(&desk.field, &desk.flat_field, 1.0).unwrap();
    let diff = (psnr_nd - psnr_flat).abs();
    println!(
        "solver equivalence: factored {psnr_nd:.6} dB vs flattened {psnr_flat:.6} dB, \
         |diff| = {diff:.2e} dB in {:.0} s (PASS needs <= 1e-4 dB, < 600 s)",
        desk.elapsed_seconds
    );
    assert!(diff <= 1e-4, "paths differ by {diff:.2e} dB");
    assert!(
        desk.elapsed_seconds < 600.0,
        "took {:.0} s, budget is 600 s",
        desk.elapsed_seconds
    );
}

#[test]
fn solver_speedup_factored_over_flattened() {
    let desk = desk_scale();
    let ratio = desk.flat_stats.wall_seconds / desk.nd_stats.wall_seconds;
    println!(
        "solver speedup: factored {:.3} s vs flattened {:.1} s -> {ratio:.0}x \
         (PASS needs >= 10x)",
        desk.nd_stats.wall_seconds, desk.flat_stats.wall_seconds
    );
    assert!(
        ratio >= 10.0,
        "factored path is only {ratio:.1}x faster than the flattened baseline"
    );
}

// ---------------------------------------------------------------------------
// 4. Operator storage accounting.
// ---------------------------------------------------------------------------

#[test]
fn operator_memory_accounting() {
    let ratio = memory_ratio(&PATCH);
    let full_elements: u64 = {
        let n: u64 = PATCH.iter().map(|&d| d as u64).product();
        n * n
    };
    let separable_elements: u64 = PATCH.iter().map(|&d| (d * d) as u64).sum();
    let expected = full_elements as f64 / separable_elements as f64;

    let rel = (ratio - 27_040_000.0 / 251.0).abs() / (27_040_000.0 / 251.0);
    println!(
        "memory accounting: flattened/factored = {full_elements}/{separable_elements} \
         elements = {ratio:.2} (PASS needs 27040000/251 within 1e-9, exact element ratio)"
    );
    assert!(rel <= 1e-9, "ratio off by {rel:.2e} relative");
    assert_eq!(
        ratio, expected,
        "memory_ratio must equal the element-count ratio exactly"
    );
}

// ---------------------------------------------------------------------------
// 5. One snapshot of a 13-band field keeps exactly 1/13 of its samples.
// ---------------------------------------------------------------------------

#[test]
fn compression_accounting_single_snapshot() {
    // Extents divide the patch grid exactly; padding would add samples and
    // the ratio is only exact on an unpadded tiling.
    let field = synth_scene(&SyntheticSceneSpec {
        dims: [10, 10, 4, 4, 13],
        primitives: 4,
        disparity: 0.5,
        seed: 5,
    })
    .unwrap();
    let mask = MaskSpec::new(PATCH, 1, 99, true).unwrap();
    let bundle = sense_lightfield(&field, &mask).unwrap();
    let measured: usize = bundle.measurements.iter().map(|m| m.len()).sum();
    let total: usize = field.len();
    println!(
        "compression accounting: {measured}/{total} samples kept \
         (PASS needs exactly 1/13 = {:.4}%)",
        100.0 / 13.0
    );
    assert_eq!(measured * 13, total, "measured/total must be exactly 1/13");
}

// ---------------------------------------------------------------------------
// 6. More snapshots help, and a full set of bands is essentially exact.
// ---------------------------------------------------------------------------

#[test]
fn snapshot_count_improves_reconstruction() {
    let dict = SeparableDictionary::dct(&PATCH).unwrap();
    let counts = [1usize, 3, 5, 7, 13];
    let seeds = 20u64;
    let mut sums = [0.0f64; 5];
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(3000 + seed);
        let coeffs = sparse_tensor(&PATCH, 8, &mut rng);
        let field = dict.synthesize(&coeffs).unwrap();
        let base_mask = MaskSpec::new(PATCH, 5, 5000 + seed, true).unwrap();
        let rows = snapshot_sweep(&field, &base_mask, &dict, &pinned_config(), &counts).unwrap();
        for (slot, row) in sums.iter_mut().zip(&rows) {
            *slot += row.psnr_db;
        }
    }
    let means: Vec<f64> = sums.iter().map(|s| s / seeds as f64).collect();
    println!(
        "snapshot sweep: mean PSNR over {seeds} seeds at K={counts:?} = \
         [{:.2}, {:.2}, {:.2}, {:.2}, {:.2}] dB (PASS needs strict increase \
         through K=7 and >= 80 dB at K=13)",
        means[0], means[1], means[2], means[3], means[4]
    );
    for i in 0..3 {
        assert!(
            means[i] < means[i + 1],
            "mean PSNR not strictly increasing: K={} gives {:.2} dB, K={} gives {:.2} dB",
            counts[i],
            means[i],
            counts[i + 1],
            means[i + 1]
        );
    }
    assert!(
        means[4] >= 80.0,
        "full band sampling should be essentially exact, got {:.2} dB",
        means[4]
    );
}

// ---------------------------------------------------------------------------
// 7. Exact recovery of sparse tensors from 5 snapshots, checked against a
// support-restricted least-squares oracle.
// ---------------------------------------------------------------------------

/// One column of the flattened combined operator, built from the factor
/// columns without materializing the Kronecker product.
fn flattened_column(factors: &[DenseMatrix], support_flat: usize, dims: &[usize]) -> Vec<f64> {
    let col_idx = multi_index(support_flat, dims);
    let meas_dims: Vec<usize> = factors.iter().map(DenseMatrix::rows).collect();
    let meas_len: usize = meas_dims.iter().product();
    (0..meas_len)
        .map(|r| {
            let row_idx = multi_index(r, &meas_dims);
            factors
                .iter()
                .zip(row_idx.iter().zip(&col_idx))
                .map(|(f, (&i, &j))| f.get(i, j))
                .product()
        })
        .collect()
}

#[test]
fn sparse_exact_recovery_with_oracle_check() {
    let dict = SeparableDictionary::dct(&PATCH).unwrap();
    let config = pinned_config();
    let mut rng = ChaCha8Rng::seed_from_u64(20260814);
    let mut successes = 0u32;
    let mut failures = Vec::new();
    for trial in 0..100u64 {
        let k = 1 + (trial as usize % 5);
        let mask = MaskSpec::new(PATCH, 5, 9000 + trial, true).unwrap();
        let coeffs = sparse_tensor(&PATCH, k, &mut rng);
        let op = build_operator(&mask, 0).unwrap();
        let patch = dict.synthesize(&coeffs).unwrap();
        let meas = sense(&patch, &op).unwrap();

        // Oracle: restrict the flattened operator to the true support and
        // least-squares for the coefficients. It must reproduce the truth,
        // proving each instance identifiable before the solver is judged.
        let factors: Vec<DenseMatrix> = op
            .factors()
            .iter()
            .zip(dict.factors())
            .map(|(phi, d)| phi.matmul(d).unwrap())
            .collect();
        let support: Vec<usize> = coeffs
            .data()
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, _)| i)
            .collect();
        let y = vectorize(&meas);
        let mut restricted = DenseMatrix::zeros(y.len(), support.len()).unwrap();
        for (c, &flat) in support.iter().enumerate() {
            for (r, v) in flattened_column(&factors, flat, &PATCH).iter().enumerate() {
                restricted.set(r, c, *v);
            }
        }
        let oracle_coeffs = pseudo_inverse(&restricted).matvec(&y).unwrap();
        let truth_norm: f64 = coeffs.data().iter().map(|v| v * v).sum::<f64>().sqrt();
        let oracle_err: f64 = support
            .iter()
            .zip(&oracle_coeffs)
            .map(|(&flat, est)| {
                let d = coeffs.data()[flat] - est;
                d * d
            })
            .sum::<f64>()
            .sqrt();
        assert!(
            oracle_err <= 1e-9 * truth_norm,
            "trial {trial}: oracle cannot reproduce the truth (rel {:.1e}) — bad instance",
            oracle_err / truth_norm
        );

        let recon = reconstruct_patch(&meas, &op, &dict, &config).unwrap();
        let recovered = dict.analyze(&recon).unwrap();
        if rel_err(&coeffs, &recovered) <= 1e-3 {
            successes += 1;
        } else {
            failures.push(trial);
        }
    }
    println!(
        "sparse recovery: {successes}/100 trials recovered to 1e-3 relative error \
         (PASS needs >= 95); failing trials: {failures:?}"
    );
    assert!(
        successes >= 95,
        "only {successes}/100 sparse instances recovered"
    );
}

// ---------------------------------------------------------------------------
// 8. A dictionary learned from training data beats the analytic cosine
// basis on content sparse in the learned basis.
// ---------------------------------------------------------------------------

/// Random orthonormal factor via QR of a random square matrix.
fn random_orthonormal(n: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    let m = nalgebra::DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let q = m.qr().q();
    DenseMatrix::from_fn(n, n, |r, c| q[(r, c)])
}

/// Sparse coefficients whose amplitude decays with the per-mode index, so
/// low-index atoms dominate — the energy ordering a moment-based learner
/// needs to identify the basis from data.
fn decaying_sparse(dims: &[usize], k: usize, rho: f64, rng: &mut ChaCha8Rng) -> DenseTensor {
    let mut t = sparse_tensor(dims, k, rng);
    let mut strides = vec![1usize; dims.len()];
    for m in 1..dims.len() {
        strides[m] = strides[m - 1] * dims[m - 1];
    }
    for (flat, v) in t.data_mut().iter_mut().enumerate() {
        if *v != 0.0 {
            for (m, &d) in dims.iter().enumerate() {
                *v *= rho.powi(((flat / strides[m]) % d) as i32);
            }
        }
    }
    t
}

/// Orthonormal spectral factor whose first column is a steep geometric
/// energy profile (natural spectra concentrate on such a leading atom); the
/// remaining columns are a random orthonormal complement.
fn profiled_spectral(n: usize, rho: f64, rng: &mut ChaCha8Rng) -> DenseMatrix {
    let mut m = nalgebra::DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let norm: f64 = (0..n).map(|b| rho.powi(2 * b as i32)).sum::<f64>().sqrt();
    for b in 0..n {
        m[(b, 0)] = rho.powi(b as i32) / norm;
    }
    let q = m.qr().q();
    let flip = if q[(0, 0)] < 0.0 { -1.0 } else { 1.0 };
    DenseMatrix::from_fn(
        n,
        n,
        |r, c| if c == 0 { q[(r, c)] * flip } else { q[(r, c)] },
    )
}

/// `k` nonzeros at distinct spatial-angular positions, all on spectral
/// index 0 — content carried entirely by the dictionary's leading spectral
/// atom, the energy-dominant atom of the training distribution.
fn leading_band_sparse(dims: &[usize; 5], k: usize, rng: &mut ChaCha8Rng) -> DenseTensor {
    let spatial: usize = dims[..4].iter().product();
    let mut t = DenseTensor::zeros(dims).unwrap();
    let mut placed = 0;
    while placed < k {
        let pos = rng.random_range(0..spatial);
        if t.data()[pos] == 0.0 {
            let sign = if rng.random_range(0..2) == 0 {
                1.0
            } else {
                -1.0
            };
            t.data_mut()[pos] = sign * rng.random_range(0.5..1.5);
            placed += 1;
        }
    }
    t
}

/// Single-snapshot operator sampling exactly `band`, with identity
/// spatial/angular orientations — used to evaluate every band once, so the
/// comparison cannot hinge on which bands a particular seed happens to draw.
fn single_band_operator(dims: &[usize; 5], band: usize) -> SeparableSensingOperator {
    let phi: Vec<DenseMatrix> = dims
        .iter()
        .enumerate()
        .map(|(m, &d)| {
            if m == 4 {
                DenseMatrix::from_fn(1, d, |_, c| if c == band { 1.0 } else { 0.0 })
            } else {
                DenseMatrix::from_fn(d, d, |r, c| if r == c { 1.0 } else { 0.0 })
            }
        })
        .collect();
    SeparableSensingOperator::from_parts(phi, [0; 4], band as u64).unwrap()
}

#[test]
fn learned_dictionary_beats_cosine_basis() {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut latent_factors: Vec<DenseMatrix> = PATCH[..4]
        .iter()
        .map(|&d| random_orthonormal(d, &mut rng))
        .collect();
    latent_factors.push(profiled_spectral(PATCH[4], 0.7, &mut rng));
    let latent =
        SeparableDictionary::from_factors(latent_factors, DictionaryKind::Learned).unwrap();

    let train: Vec<DenseTensor> = (0..300)
        .map(|_| {
            let coeffs = decaying_sparse(&PATCH, 6, 0.75, &mut rng);
            latent.synthesize(&coeffs).unwrap()
        })
        .collect();
    let learned = learn_separable_dictionary(&train).unwrap();
    let dct = SeparableDictionary::dct(&PATCH).unwrap();

    // The learner must actually have identified the latent leading spectral
    // atom from the training data; otherwise the comparison below would
    // measure the wrong thing.
    let atom0_match: f64 = {
        let lf = &learned.factors()[4];
        let tf = &latent.factors()[4];
        (0..PATCH[4])
            .map(|r| lf.get(r, 0) * tf.get(r, 0))
            .sum::<f64>()
            .abs()
    };
    assert!(
        atom0_match >= 0.99,
        "learned leading spectral atom only matches the latent one to {atom0_match:.4}"
    );

    // One single-snapshot reconstruction per spectral band: with one
    // snapshot, only content aligned with the sampled band's dominant
    // dictionary entry is identifiable at all, so a fair comparison must
    // cover every band rather than a seed-dependent draw of them.
    let config = pinned_config();
    let bands = PATCH[4];
    let mut rng_eval = ChaCha8Rng::seed_from_u64(909);
    let (mut sum_learned, mut sum_dct) = (0.0f64, 0.0f64);
    for band in 0..bands {
        let coeffs = leading_band_sparse(&PATCH, 3, &mut rng_eval);
        let mut field = latent.synthesize(&coeffs).unwrap();
        let peak = field.data().iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        for v in field.data_mut().iter_mut() {
            *v /= peak;
        }
        let op = single_band_operator(&PATCH, band);
        let meas = sense(&field, &op).unwrap();
        let with_learned = reconstruct_patch(&meas, &op, &learned, &config).unwrap();
        let with_dct = reconstruct_patch(&meas, &op, &dct, &config).unwrap();
        sum_learned += psnr(&field, &with_learned, 1.0).unwrap();
        sum_dct += psnr(&field, &with_dct, 1.0).unwrap();
    }
    let mean_learned = sum_learned / bands as f64;
    let mean_dct = sum_dct / bands as f64;
    println!(
        "dictionary quality: learned {mean_learned:.2} dB vs cosine {mean_dct:.2} dB \
         at one snapshot over {bands} single-band trials (PASS needs >= 3 dB advantage)"
    );
    assert!(
        mean_learned >= mean_dct + 3.0,
        "learned advantage is only {:.2} dB",
        mean_learned - mean_dct
    );
}

// ---------------------------------------------------------------------------
// 9. Metric definitions: pinned exact values and invariances.
// ---------------------------------------------------------------------------

#[test]
fn metric_sanity() {
    let dims = [6usize, 6, 2, 2, 4];
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let a = DenseTensor::from_fn(&dims, |_| rng.random_range(0.0..1.0)).unwrap();
    let b = DenseTensor::from_fn(&dims, |_| rng.random_range(0.0..1.0)).unwrap();

    // PSNR: constant error of 0.5 against peak 1 is exactly 20 log10(2).
    let quarter = DenseTensor::from_fn(&dims, |_| 0.25).unwrap();
    let three_quarter = DenseTensor::from_fn(&dims, |_| 0.75).unwrap();
    let p = psnr(&quarter, &three_quarter, 1.0).unwrap();
    assert!((p - 20.0 * 2.0f64.log10()).abs() <= 1e-12, "PSNR {p}");
    // Symmetry and the identical-input special case.
    assert_eq!(
        psnr(&a, &b, 1.0).unwrap(),
        psnr(&b, &a, 1.0).unwrap(),
        "PSNR must be symmetric"
    );
    assert!(psnr(&a, &a, 1.0).unwrap().is_infinite());

    // SSIM of a field with itself is 1.
    let s = ssim(&a, &a).unwrap().value;
    assert!((s - 1.0).abs() <= 1e-12, "SSIM(x,x) = {s}");

    // Spectral angle: invariant to positive per-pixel scaling, and exactly
    // 90 degrees for orthogonal spectra.
    let scaled = {
        let mut t = b.clone();
        let spatial: usize = dims[..4].iter().product();
        for (flat, v) in t.data_mut().iter_mut().enumerate() {
            // Bands are the slowest axis, so `flat % spatial` indexes the pixel.
            let pixel = flat % spatial;
            *v *= 0.5 + (pixel as f64) / spatial as f64;
        }
        t
    };
    let plain = spectral_angle(&a, &b).unwrap().mean_degrees;
    let invariant = spectral_angle(&a, &scaled).unwrap().mean_degrees;
    assert!(
        (plain - invariant).abs() <= 1e-9,
        "spectral angle changed under positive scaling: {plain} vs {invariant}"
    );
    let band0 = DenseTensor::from_fn(&dims, |idx| if idx[4] == 0 { 1.0 } else { 0.0 }).unwrap();
    let band1 = DenseTensor::from_fn(&dims, |idx| if idx[4] == 1 { 1.0 } else { 0.0 }).unwrap();
    let ortho = spectral_angle(&band0, &band1).unwrap().mean_degrees;
    assert!((ortho - 90.0).abs() <= 1e-9, "orthogonal spectra: {ortho}");

    println!(
        "metric sanity: PSNR pinned value/symmetry/identity, SSIM identity, \
         spectral-angle invariances all hold (PASS)"
    );
}
