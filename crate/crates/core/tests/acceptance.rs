//! Acceptance suite: one test per release gate, each printing a single
//! pass/fail line with its pinned tolerance. These run whole-pipeline
//! experiments and are slower than the unit tests.

use rand::Rng;
use swot_core::diffgrad::{
    chain_forward, chain_vjp, finite_diff_check, grad_moments, grad_sw1, sw1_tie_mask,
    DifferentiableMap,
};
use swot_core::guidance::{
    guided_sample, lr_sweep, unguided_sample, DdimSchedule, Decoder, GmmComponent,
    GmmScoreModel, GuidanceConfig, LossMode, PredictX0Map,
};
use swot_core::ot::{empirical_cdf, evaluate_w2, exact_w2, w1_1d, Samples1D};
use swot_core::palette::{histogram_match, transfer_palette, ImageBuffer, PaletteTransferConfig};
use swot_core::rng::{derive_seed, stream_rng};
use swot_core::sliced::{sample_slices, sw_distance_with_slices, SliceScheme, SlicedVariant};
use swot_core::{PointCloud, SlicedConfig};

fn report(name: &str, pass: bool, detail: &str) {
    println!(
        "acceptance: {name}: {} ({detail})",
        if pass { "pass" } else { "FAIL" }
    );
    assert!(pass, "{name}: {detail}");
}

fn random_samples(n: usize, seed: u64) -> Samples1D {
    let mut rng = stream_rng(seed, 0);
    Samples1D::new((0..n).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect()).unwrap()
}

/// Exact integral of |F - G| over the real line for empirical CDFs: the
/// integrand is constant between consecutive breakpoints.
fn cdf_area(x: &Samples1D, y: &Samples1D) -> f64 {
    let mut pts: Vec<f64> = x.sorted().iter().chain(y.sorted()).cloned().collect();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    let mut area = 0.0;
    for w in pts.windows(2) {
        let diff = (empirical_cdf(x, w[0]) - empirical_cdf(y, w[0])).abs();
        area += diff * (w[1] - w[0]);
    }
    area
}

/// Midpoint-rule approximation of the same integral on a uniform grid.
fn cdf_area_grid(x: &Samples1D, y: &Samples1D, cells: usize) -> f64 {
    let lo = x.sorted()[0].min(y.sorted()[0]) - 0.5;
    let hi = x.sorted()[x.len() - 1].max(y.sorted()[y.len() - 1]) + 0.5;
    let h = (hi - lo) / cells as f64;
    (0..cells)
        .map(|i| {
            let m = lo + (i as f64 + 0.5) * h;
            (empirical_cdf(x, m) - empirical_cdf(y, m)).abs() * h
        })
        .sum()
}

#[test]
fn acceptance_quantile_cdf_equivalence() {
    // 200 random pairs: sorted-pairing W1 equals the CDF-difference area
    let mut worst = 0.0_f64;
    let mut rng = stream_rng(101, 0);
    for trial in 0..200u64 {
        let n = rng.gen_range(2..=256);
        let x = random_samples(n, derive_seed(1000, trial));
        let y = random_samples(n, derive_seed(2000, trial));
        let quantile = w1_1d(&x, &y).unwrap();
        let area = cdf_area(&x, &y);
        worst = worst.max((quantile - area).abs());
    }
    // grid refinement converges to the breakpoint value on a few pairs
    let mut grid_gap = 0.0_f64;
    for trial in 0..3u64 {
        let x = random_samples(64, derive_seed(3000, trial));
        let y = random_samples(64, derive_seed(4000, trial));
        let exact = cdf_area(&x, &y);
        let mut prev_err = f64::INFINITY;
        for cells in [1 << 12, 1 << 15, 1 << 18] {
            let err = (cdf_area_grid(&x, &y, cells) - exact).abs();
            assert!(err < prev_err * 0.5, "grid not converging: {err} vs {prev_err}");
            prev_err = err;
        }
        grid_gap = grid_gap.max(prev_err);
    }
    report(
        "1d quantile/cdf equivalence",
        worst < 1e-6,
        &format!("max |quantile - area| = {worst:.2e} over 200 pairs, tol 1e-6; finest grid gap {grid_gap:.2e}"),
    );
}

#[test]
fn acceptance_sphere_moment() {
    // SW1 between unit-separated point masses in d=3 is E|<v, theta>| = 1/2
    let mut rng = stream_rng(55, 0);
    let v: Vec<f64> = {
        let raw: Vec<f64> = (0..3).map(|_| rng.gen::<f64>() - 0.5).collect();
        let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        raw.into_iter().map(|x| x / norm).collect()
    };
    let a = PointCloud::from_rows(&[vec![0.0; 3]]).unwrap();
    let b = PointCloud::from_rows(&[v]).unwrap();
    let cfg = SlicedConfig {
        scheme: SliceScheme::IidSphere,
        ..SlicedConfig::sw(100_000, 7)
    };
    let slices = sample_slices(&cfg, 3).unwrap();
    let sw = sw_distance_with_slices(&a, &b, 1.0, &slices).unwrap();
    report(
        "sphere moment",
        (sw - 0.5).abs() < 0.01,
        &format!("SW1 = {sw:.5} at 1e5 iid slices, target 0.5 +- 0.01"),
    );
}

fn random_cloud(n: usize, d: usize, seed: u64) -> PointCloud {
    let mut rng = stream_rng(seed, 0);
    let data: Vec<f64> = (0..n * d).map(|_| rng.gen::<f64>()).collect();
    PointCloud::new(n, d, data).unwrap()
}

#[test]
fn acceptance_gradient_finite_difference() {
    let eps = 1e-5;
    let mut worst_sw = 0.0_f64;
    let mut worst_mom = 0.0_f64;
    for i in 0..50u64 {
        let a = random_cloud(64, 3, derive_seed(10, i));
        let b = random_cloud(64, 3, derive_seed(20, i));
        let slices = sample_slices(&SlicedConfig::sw(10, i), 3).unwrap();

        let r = grad_sw1(&a, &b, &slices).unwrap();
        let mask = sw1_tie_mask(&a, &b, &slices, eps);
        let f = |x: &[f64]| {
            let c = PointCloud::new(64, 3, x.to_vec()).unwrap();
            grad_sw1(&c, &b, &slices).unwrap().loss
        };
        let rep = finite_diff_check("sw1", &f, &r.grad, a.data(), eps, 1e-4, Some(&mask));
        worst_sw = worst_sw.max(rep.max_rel_err);

        let m = grad_moments(&a, &b).unwrap();
        let g = |x: &[f64]| {
            let c = PointCloud::new(64, 3, x.to_vec()).unwrap();
            grad_moments(&c, &b).unwrap().loss
        };
        let rep = finite_diff_check("moments", &g, &m.grad, a.data(), eps, 1e-4, None);
        worst_mom = worst_mom.max(rep.max_rel_err);
    }

    // full chain: x0 prediction through an affine-tanh decoder
    let mut worst_chain = 0.0_f64;
    for i in 0..50u64 {
        let model = GmmScoreModel::isotropic(vec![0.3, -0.1, 0.2], 0.2).unwrap();
        let decoder = Decoder::random_affine_tanh(3, derive_seed(30, i));
        let x0_map = PredictX0Map {
            model,
            alpha_bar: 0.5,
            gamma: 1.0,
            label: None,
        };
        let decoder_maps = decoder.maps();
        let mut maps: Vec<&dyn DifferentiableMap> = vec![&x0_map];
        for m in &decoder_maps {
            maps.push(m.as_ref());
        }
        let mut rng = stream_rng(derive_seed(40, i), 0);
        let x: Vec<f64> = (0..3).map(|_| rng.gen::<f64>() - 0.5).collect();
        let w: Vec<f64> = (0..3).map(|_| rng.gen::<f64>() - 0.5).collect();
        let analytic = chain_vjp(&maps, &x, &w).unwrap();
        let f = |x: &[f64]| {
            let y = chain_forward(&maps, x).unwrap();
            y.iter().zip(&w).map(|(a, b)| a * b).sum()
        };
        let rep = finite_diff_check("chain", &f, &analytic, &x, eps, 1e-3, None);
        worst_chain = worst_chain.max(rep.max_rel_err);
    }
    let pass = worst_sw < 1e-4 && worst_mom < 1e-4 && worst_chain < 1e-3;
    report(
        "gradient finite-difference",
        pass,
        &format!("max rel err over 50 instances: sw1 {worst_sw:.2e}, moments {worst_mom:.2e} (tol 1e-4); chain {worst_chain:.2e} (tol 1e-3)"),
    );
}

#[test]
fn acceptance_ddim_sampler() {
    // unguided 30-step rollout over a single Gaussian matches direct samples.
    // Deterministic DDIM contracts variance on non-degenerate Gaussians (a
    // first-order discretization property, verified against the analytic
    // variance recursion), so the budget covers that bias plus the n = 2048
    // empirical noise floor.
    let model = GmmScoreModel::isotropic(vec![0.45, 0.5, 0.55], 0.001).unwrap();
    let schedule = DdimSchedule::default_30();
    let decoder = Decoder::identity(3);
    let cfg = GuidanceConfig {
        seed: 17,
        ..GuidanceConfig::default()
    };
    let run = unguided_sample(&model, &schedule, &decoder, &cfg, 2048).unwrap();
    let direct = model.sample(2048, 99, None).unwrap();
    let w2 = exact_w2(&run.generated, &direct).unwrap();
    report(
        "ddim sampler",
        w2 < 0.05,
        &format!("W2(generated, direct) = {w2:.4} at n = 2048, tol 0.05"),
    );
}

/// Desk-scale prior: one broad blob in the unit cube.
fn prior_model() -> GmmScoreModel {
    GmmScoreModel::isotropic(vec![0.5, 0.5, 0.5], 0.02).unwrap()
}

/// Structurally different target: two tight, well-separated clusters.
fn bimodal_reference(n: usize, seed: u64) -> PointCloud {
    let model = GmmScoreModel {
        dim: 3,
        components: vec![
            GmmComponent {
                weight: 0.55,
                mean: vec![0.25, 0.35, 0.3],
                cov: diag3(0.003),
            },
            GmmComponent {
                weight: 0.45,
                mean: vec![0.7, 0.6, 0.65],
                cov: diag3(0.003),
            },
        ],
        conditional: Default::default(),
    };
    model.sample(n, seed, None).unwrap()
}

fn diag3(v: f64) -> Vec<f64> {
    vec![v, 0.0, 0.0, 0.0, v, 0.0, 0.0, 0.0, v]
}

fn run_w2(
    reference: &PointCloud,
    cfg: &GuidanceConfig,
    batch: usize,
    guided: bool,
) -> f64 {
    let model = prior_model();
    let schedule = DdimSchedule::default_30();
    let decoder = Decoder::identity(3);
    let run = if guided {
        guided_sample(&model, &schedule, &decoder, reference, cfg, batch).unwrap()
    } else {
        unguided_sample(&model, &schedule, &decoder, cfg, batch).unwrap()
    };
    let n = batch.min(reference.len()).min(2048);
    evaluate_w2(&run.generated, reference, n, cfg.seed).unwrap()
}

#[test]
fn acceptance_guidance_efficacy() {
    // reference = prior samples translated by a fixed offset
    let reference = prior_model()
        .sample(4096, 7, None)
        .unwrap()
        .translate(&[0.18, -0.12, 0.15])
        .unwrap();
    let mut rows = Vec::new();
    let mut pass = true;
    for seed in 0..5u64 {
        let cfg = GuidanceConfig {
            seed: 100 + seed,
            ..GuidanceConfig::default()
        };
        let guided = run_w2(&reference, &cfg, 512, true);
        let unguided = run_w2(&reference, &cfg, 512, false);
        pass &= guided < 0.5 * unguided;
        rows.push(format!("{guided:.4}/{unguided:.4}"));
    }
    report(
        "guidance efficacy",
        pass,
        &format!("guided/unguided W2 per seed: {} (need < 0.5x, K=10, M=10, lr=0.04)", rows.join(" ")),
    );
}

#[test]
fn acceptance_loss_mode_ordering_simulator() {
    let reference = bimodal_reference(4096, 11);
    let modes = [LossMode::SwOnly, LossMode::SwPlusMoments, LossMode::MomentsOnly];
    let mut means = Vec::new();
    for mode in modes {
        let mut acc = 0.0;
        for seed in 0..3u64 {
            let cfg = GuidanceConfig {
                loss_mode: mode,
                seed: 200 + seed,
                ..GuidanceConfig::default()
            };
            acc += run_w2(&reference, &cfg, 512, true);
        }
        means.push(acc / 3.0);
    }
    let mut unguided = 0.0;
    for seed in 0..3u64 {
        let cfg = GuidanceConfig {
            seed: 200 + seed,
            ..GuidanceConfig::default()
        };
        unguided += run_w2(&reference, &cfg, 512, false);
    }
    unguided /= 3.0;
    let (sw, swm, mom) = (means[0], means[1], means[2]);
    let pass = sw <= swm && swm < mom && mom < unguided && sw * 2.0 <= mom;
    report(
        "loss-mode ordering (simulator)",
        pass,
        &format!("W2 means: sw {sw:.4} <= sw+moments {swm:.4} < moments {mom:.4} < unguided {unguided:.4}, sw at least 2x better than moments"),
    );
}

#[test]
fn acceptance_variant_comparison() {
    let reference = bimodal_reference(4096, 13);
    let variant_w2 = |variant: SlicedVariant, mode: LossMode| -> f64 {
        let mut acc = 0.0;
        for seed in 0..3u64 {
            let cfg = GuidanceConfig {
                variant,
                loss_mode: mode,
                seed: 300 + seed,
                ..GuidanceConfig::default()
            };
            acc += run_w2(&reference, &cfg, 512, true);
        }
        acc / 3.0
    };
    let sw = variant_w2(SlicedVariant::Sw, LossMode::SwOnly);
    let ebsw = variant_w2(SlicedVariant::Ebsw, LossMode::SwOnly);
    let dsw = variant_w2(SlicedVariant::Dsw, LossMode::SwOnly);
    let gsw = variant_w2(SlicedVariant::Gsw, LossMode::SwOnly);
    let mom = variant_w2(SlicedVariant::Sw, LossMode::MomentsOnly);

    let within = (sw - ebsw).abs() <= 0.1 * sw.max(ebsw);
    let pass = within && sw * 2.0 <= mom && ebsw * 2.0 <= mom && dsw < mom && gsw < mom;
    report(
        "variant comparison",
        pass,
        &format!("W2 means: sw {sw:.4}, ebsw {ebsw:.4} (within 10%), dsw {dsw:.4}, gsw {gsw:.4}, moments {mom:.4}; sw/ebsw at least 2x better than moments, dsw/gsw better than moments"),
    );
}

#[test]
fn acceptance_lr_curve_interior_minimum() {
    // W2 as a function of the guidance rate over 3 decades has an interior
    // minimizer, by more than one Monte Carlo standard deviation
    let reference = bimodal_reference(4096, 17);
    let model = prior_model();
    let schedule = DdimSchedule::default_30();
    let decoder = Decoder::identity(3);
    let grid: Vec<f64> = (0..7).map(|i| 1e-3 * 10f64.powf(i as f64 / 2.0)).collect();
    let mut curves: Vec<Vec<f64>> = Vec::new();
    for seed in 0..5u64 {
        let cfg = GuidanceConfig {
            seed: 400 + seed,
            ..GuidanceConfig::default()
        };
        let rows = lr_sweep(&model, &schedule, &decoder, &reference, &cfg, &grid, 256).unwrap();
        curves.push(rows.iter().map(|r| r.w2).collect());
    }
    let mean = |j: usize| curves.iter().map(|c| c[j]).sum::<f64>() / 5.0;
    let std = |j: usize| {
        let m = mean(j);
        (curves.iter().map(|c| (c[j] - m) * (c[j] - m)).sum::<f64>() / 5.0).sqrt()
    };
    let last = grid.len() - 1;
    let (mut best_j, mut best) = (0usize, f64::INFINITY);
    for j in 1..last {
        if mean(j) < best {
            best = mean(j);
            best_j = j;
        }
    }
    let margin = std(0).max(std(last)).max(std(best_j));
    let pass = best + margin < mean(0) && best + margin < mean(last);
    report(
        "lr curve interior minimum",
        pass,
        &format!(
            "min W2 {best:.4} at lr {:.3} vs endpoints {:.4}/{:.4}, margin (1 MC std) {margin:.4}",
            grid[best_j],
            mean(0),
            mean(last)
        ),
    );
}

#[test]
fn acceptance_free_cloud_descent_moment_convergence() {
    // plain gradient descent of a free cloud under SW1 toward a fixed target
    let target = bimodal_reference(256, 23);
    let mut a = random_cloud(256, 3, 29);
    let slices0 = sample_slices(&SlicedConfig::sw(10, 0), 3).unwrap();
    let sw_init = sw_distance_with_slices(&a, &target, 1.0, &slices0).unwrap();
    let mean_err = |c: &PointCloud| -> f64 {
        c.mean()
            .iter()
            .zip(target.mean())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    };
    let cov_err = |c: &PointCloud| -> f64 {
        c.covariance()
            .iter()
            .zip(target.covariance())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    };
    let (me0, ce0) = (mean_err(&a), cov_err(&a));

    let n = a.len() as f64;
    for it in 0..1500u64 {
        let slices = sample_slices(&SlicedConfig::sw(10, derive_seed(31, it)), 3).unwrap();
        let r = grad_sw1(&a, &target, &slices).unwrap();
        let moved: Vec<f64> = a
            .data()
            .iter()
            .zip(&r.grad)
            .map(|(x, g)| x - 0.02 * n * g)
            .collect();
        a = PointCloud::new(256, 3, moved).unwrap();
    }
    let sw_final = sw_distance_with_slices(&a, &target, 1.0, &slices0).unwrap();
    let (me1, ce1) = (mean_err(&a), cov_err(&a));
    let pass = sw_final * 10.0 <= sw_init && me1 < 0.25 * me0 && ce1 < 0.25 * ce0;
    report(
        "free-cloud descent moment convergence",
        pass,
        &format!("SW1 {sw_init:.4} -> {sw_final:.4} (need 10x), mean err {me0:.4} -> {me1:.4}, cov err {ce0:.4} -> {ce1:.4} (need < 25%)"),
    );
}

// ---- synthetic palette corpus ----

/// Smooth two-color gradient with mild noise.
fn gradient_image(w: usize, h: usize, seed: u64) -> ImageBuffer {
    let mut rng = stream_rng(seed, 0);
    let c1: Vec<f64> = (0..3).map(|_| rng.gen::<f64>()).collect();
    let c2: Vec<f64> = (0..3).map(|_| rng.gen::<f64>()).collect();
    let mut data = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            let t = (x as f64 / (w - 1) as f64 + y as f64 / (h - 1) as f64) / 2.0;
            for c in 0..3 {
                let v = c1[c] + t * (c2[c] - c1[c]) + 0.05 * (rng.gen::<f64>() - 0.5);
                data.push(v.clamp(0.0, 1.0));
            }
        }
    }
    ImageBuffer::new(w, h, data).unwrap()
}

/// Two tight color clusters; structurally unlike the gradient images.
fn cluster_image(w: usize, h: usize, seed: u64) -> ImageBuffer {
    let mut rng = stream_rng(seed, 0);
    let c1: Vec<f64> = (0..3).map(|_| 0.15 + 0.3 * rng.gen::<f64>()).collect();
    let c2: Vec<f64> = (0..3).map(|_| 0.55 + 0.3 * rng.gen::<f64>()).collect();
    let ratio = 0.35 + 0.3 * rng.gen::<f64>();
    let mut data = Vec::with_capacity(w * h * 3);
    for _ in 0..w * h {
        let base = if rng.gen::<f64>() < ratio { &c1 } else { &c2 };
        for c in 0..3 {
            data.push((base[c] + 0.06 * (rng.gen::<f64>() - 0.5)).clamp(0.0, 1.0));
        }
    }
    ImageBuffer::new(w, h, data).unwrap()
}

fn corpus() -> Vec<(ImageBuffer, ImageBuffer)> {
    (0..10u64)
        .map(|i| {
            (
                gradient_image(64, 64, derive_seed(5000, i)),
                cluster_image(64, 64, derive_seed(6000, i)),
            )
        })
        .collect()
}

fn image_w2(a: &ImageBuffer, b: &ImageBuffer, seed: u64) -> f64 {
    evaluate_w2(&a.all_pixels(), &b.all_pixels(), 3000, seed).unwrap()
}

#[test]
fn acceptance_loss_mode_ordering_palette() {
    // Run well past the initial descent (sw and sw+moments tie mid-descent;
    // the separation shows once the straggler pixels between clusters have
    // resolved) and score with full-cloud exact W2, which has no subsampling
    // noise at 64x64.
    let pairs = corpus();
    let modes = [LossMode::SwOnly, LossMode::SwPlusMoments, LossMode::MomentsOnly];
    let mut means = vec![0.0; 3];
    let mut unguided = 0.0;
    for (i, (content, reference)) in pairs.iter().enumerate() {
        let rc = reference.all_pixels();
        unguided += exact_w2(&content.all_pixels(), &rc).unwrap();
        for (m, &mode) in modes.iter().enumerate() {
            let cfg = PaletteTransferConfig {
                loss_mode: mode,
                iterations: 800,
                seed: 700 + i as u64,
                ..PaletteTransferConfig::default()
            };
            let out = transfer_palette(content, reference, &cfg).unwrap();
            means[m] += exact_w2(&out.all_pixels(), &rc).unwrap();
        }
    }
    let k = pairs.len() as f64;
    let (sw, swm, mom, unguided) = (means[0] / k, means[1] / k, means[2] / k, unguided / k);
    let pass = sw <= swm && swm < mom && mom < unguided && sw * 2.0 <= mom;
    report(
        "loss-mode ordering (palette corpus)",
        pass,
        &format!("mean W2 over 10 pairs: sw {sw:.4} <= sw+moments {swm:.4} < moments {mom:.4} < untouched {unguided:.4}, sw at least 2x better than moments"),
    );
}

#[test]
fn acceptance_palette_transfer_vs_histogram_matching() {
    let pairs = corpus();
    let mut strict_reductions = 0usize;
    let mut beats_hm = 0usize;
    let mut rows = Vec::new();
    for (i, (content, reference)) in pairs.iter().enumerate() {
        let before = image_w2(content, reference, i as u64);
        let cfg = PaletteTransferConfig {
            seed: 800 + i as u64,
            ..PaletteTransferConfig::default()
        };
        let out = transfer_palette(content, reference, &cfg).unwrap();
        let after = image_w2(&out, reference, i as u64);
        let hm = histogram_match(content, reference).unwrap();
        let hm_w2 = image_w2(&hm, reference, i as u64);
        if after < before {
            strict_reductions += 1;
        }
        if after < hm_w2 {
            beats_hm += 1;
        }
        rows.push(format!("{after:.3}/{hm_w2:.3}"));
    }
    let pass = strict_reductions == 10 && beats_hm >= 8;
    report(
        "palette transfer vs histogram matching",
        pass,
        &format!("strict W2 reduction {strict_reductions}/10, beats hm {beats_hm}/10 (need >= 8); transfer/hm per pair: {}", rows.join(" ")),
    );
}
