//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod common;

use std::f64::consts::{LN_2, SQRT_2};
use std::hint::black_box;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{dense_log_ml, dense_posterior_mean, grid, instances, max_off_band, rel_diff, rng, Instance};
use rand::Rng;
use stablekern::estimator::{
    log_marginal_likelihood, posterior_mean, toeplitz_regressor, tune_hyperparameters,
    EstimationProblem, LogRange, RefineConfig, SearchConfig,
};
use stablekern::kernels::{gram, stable_increments};
use stablekern::maxent::{
    band_extend, band_project, completion_entropy_test, gaussian_entropy,
    increment_constrained_entropy_test, increment_law_covariance,
};
use stablekern::oracle::{dense_inverse, dense_logdet, matmul, max_relative_deviation};
use stablekern::process::{sample, sample_ss1_via_wiener, stable_time_transform, PathSet, WhiteNoiseSource};
use stablekern::structure::{
    apply_precision, closed_form_inverse, log_det, precision_factor, sqrt_factor,
};
use stablekern::{DenseMatrix, KernelFamily, KernelSpec, SamplingGrid};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

/// Shared by criteria 1-3.
fn core_instances() -> Vec<Instance> {
    instances(2024, 200, 3..=50)
}

fn c1_inverse() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for inst in core_instances() {
        let n = inst.grid.len();
        let p = gram(&inst.spec, &inst.grid).unwrap().values;
        let t = closed_form_inverse(&inst.spec, &inst.grid).unwrap().to_dense();
        let res = matmul(&t, &p).unwrap().sub(&DenseMatrix::identity(n)).unwrap().norm_inf();
        worst = worst.max(res / (1e-8 * n as f64));
    }
    let elapsed = start.elapsed();
    Outcome::new(
        worst <= 1.0 && elapsed < Duration::from_secs(10),
        format!("worst residual/threshold {worst:.2e}, {:.2} s (limit 10 s)", secs(elapsed)),
    )
}

fn c2_log_det() -> Outcome {
    let mut worst = 0.0f64;
    for inst in core_instances() {
        let p = gram(&inst.spec, &inst.grid).unwrap().values;
        let ld = log_det(&inst.spec, &inst.grid).unwrap();
        let err = (ld - dense_logdet(&p).unwrap()).abs();
        worst = worst.max(err / (1e-9 * ld.abs().max(1.0)));
    }
    Outcome::new(worst <= 1.0, format!("worst error/threshold {worst:.2e}"))
}

fn c3_factors() -> Outcome {
    let (mut wf, mut wu) = (0.0f64, 0.0f64);
    for inst in core_instances() {
        let p = gram(&inst.spec, &inst.grid).unwrap().values;
        let t = closed_form_inverse(&inst.spec, &inst.grid).unwrap().to_dense();
        let f = precision_factor(&inst.spec, &inst.grid).unwrap().to_dense();
        let res = matmul(&f.transpose(), &f).unwrap().sub(&t).unwrap().norm_inf();
        wf = wf.max(res / (1e-10 * t.norm_inf()));
        let u = sqrt_factor(&inst.spec, &inst.grid).unwrap().to_dense();
        let res = matmul(&u, &u.transpose()).unwrap().sub(&p).unwrap().norm_inf();
        wu = wu.max(res / (1e-12 * p.norm_inf()));
    }
    Outcome::new(
        wf <= 1.0 && wu <= 1.0,
        format!("precision factor {wf:.2e}, square root {wu:.2e} (residual/threshold)"),
    )
}

fn c4_completion() -> Outcome {
    let mut r = rng(4);
    let (mut dev, mut off) = (0.0f64, 0.0f64);
    let mut count = 0;
    for family in [KernelFamily::Ss1, KernelFamily::Wiener] {
        for _ in 0..50 {
            let n = r.random_range(3..=30);
            let inst = common::random_instance(&mut r, family, n);
            let p = gram(&inst.spec, &inst.grid).unwrap().values;
            let ext = band_extend(&band_project(&p).unwrap()).unwrap();
            dev = dev.max(max_relative_deviation(&ext, &p));
            let inv = dense_inverse(&ext).unwrap();
            off = off.max(max_off_band(&inv) / inv.norm_inf());
            count += 1;
        }
    }
    Outcome::new(
        dev <= 1e-12 && off <= 1e-8,
        format!("{count} instances: max relative deviation {dev:.2e}, off-band inverse {off:.2e}"),
    )
}

fn c5_completion_entropy() -> Outcome {
    let start = Instant::now();
    let mut r = rng(5);
    let mut ok = true;
    let (mut excess, mut strict_min) = (f64::NEG_INFINITY, 1.0f64);
    for family in [KernelFamily::Ss1, KernelFamily::Wiener] {
        for k in 0..3 {
            let inst = common::random_instance(&mut r, family, 6);
            let a = band_project(&gram(&inst.spec, &inst.grid).unwrap().values).unwrap();
            let rep = completion_entropy_test(&a, 50 + k, 1000).unwrap();
            let strict = rep.strictly_dominated as f64 / rep.candidate_entropies.len() as f64;
            ok &= rep.dominance && strict >= 0.95 && rep.candidate_entropies.len() == 1000;
            excess = excess.max(rep.max_excess.unwrap());
            strict_min = strict_min.min(strict);
        }
    }
    let elapsed = start.elapsed();
    Outcome::new(
        ok && elapsed < Duration::from_secs(30),
        format!(
            "6 instances x 1000: max excess {excess:.2e} nats, min strict fraction {strict_min:.3}, {:.2} s",
            secs(elapsed)
        ),
    )
}

fn c6_increment_entropy() -> Outcome {
    let mut r = rng(6);
    let mut ok = true;
    let (mut excess, mut id_err) = (f64::NEG_INFINITY, 0.0f64);
    for family in [KernelFamily::Wiener, KernelFamily::Ss1] {
        for k in 0..2 {
            let inst = common::random_instance(&mut r, family, 4);
            let rep = increment_constrained_entropy_test(&inst.spec, &inst.grid, 60 + k, 1000).unwrap();
            ok &= rep.dominance;
            excess = excess.max(rep.max_excess.unwrap());
            let id = increment_law_covariance(&inst.spec, &inst.grid, &DenseMatrix::identity(4)).unwrap();
            id_err = id_err.max((gaussian_entropy(&id).unwrap() - rep.reference_entropy).abs());
        }
    }
    Outcome::new(
        ok && id_err <= 1e-9,
        format!("4 instances x 1000: max excess {excess:.2e} nats, identity-correlation gap {id_err:.2e}"),
    )
}

fn cov_z(ps: &PathSet, p: &DenseMatrix) -> f64 {
    let cov = ps.covariance();
    let m = ps.num_paths() as f64;
    let n = p.rows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let se = ((p[(i, i)] * p[(j, j)] + p[(i, j)] * p[(i, j)]) / m).sqrt();
            worst = worst.max((cov[(i, j)] - p[(i, j)]).abs() / se);
        }
    }
    worst
}

fn c7_samplers() -> Outcome {
    const P: usize = 200_000;
    let start = Instant::now();
    let mut r = rng(7);
    let (mut direct, mut via) = (0.0f64, 0.0f64);
    for (k, family) in [KernelFamily::Wiener, KernelFamily::Ss1, KernelFamily::Wiener, KernelFamily::Ss1]
        .into_iter()
        .enumerate()
    {
        let inst = common::random_instance(&mut r, family, 5);
        let p = gram(&inst.spec, &inst.grid).unwrap().values;
        direct = direct.max(cov_z(&sample(&inst.spec, &inst.grid, 70 + k as u64, P).unwrap(), &p));
        if family == KernelFamily::Ss1 {
            let beta = inst.spec.beta().unwrap();
            let ps = sample_ss1_via_wiener(&inst.grid, inst.spec.c(), beta, 80 + k as u64, P).unwrap();
            via = via.max(cov_z(&ps, &p));
        }
    }
    let elapsed = start.elapsed();
    Outcome::new(
        direct <= 5.0 && via <= 5.0 && elapsed < Duration::from_secs(60),
        format!(
            "max |cov - P| in standard errors: direct {direct:.2}, time-transformed {via:.2}; {:.2} s",
            secs(elapsed)
        ),
    )
}

/// Fastest of `reps` timed runs of `apply_precision`.
fn time_apply(n: usize, reps: usize) -> Duration {
    let spec = KernelSpec::ss1(1.0, 0.5).unwrap();
    let g = SamplingGrid::uniform(n, 1e-4, 1.0).unwrap();
    let f = precision_factor(&spec, &g).unwrap();
    let v: Vec<f64> = (0..n).map(|i| (i % 17) as f64 - 8.0).collect();
    (0..reps)
        .map(|_| {
            let start = Instant::now();
            black_box(apply_precision(black_box(&f), black_box(&v)).unwrap());
            start.elapsed()
        })
        .min()
        .unwrap()
}

fn c8_performance() -> Outcome {
    let big = time_apply(1_000_000, 3);
    let sizes = [100_000, 200_000, 400_000, 800_000];
    let times: Vec<Duration> = sizes.iter().map(|&n| time_apply(n, 15)).collect();
    let ratios: Vec<f64> = times.windows(2).map(|w| secs(w[1]) / secs(w[0])).collect();
    let ok = big < Duration::from_millis(500) && ratios.iter().all(|r| (1.5..=3.0).contains(r));
    let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.2}")).collect();
    Outcome::new(
        ok,
        format!("n=1e6 in {:.1} ms; doubling ratios [{}]", secs(big) * 1e3, shown.join(", ")),
    )
}

fn c9_estimator() -> Outcome {
    let mut r = rng(9);
    let (mut mean_err, mut lml_err) = (0.0f64, 0.0f64);
    for k in 0..50 {
        let family = if k % 2 == 0 { KernelFamily::Ss1 } else { KernelFamily::Wiener };
        let n = r.random_range(1..=50);
        let rows = r.random_range(n..=200);
        let inst = common::random_instance(&mut r, family, n);
        let u: Vec<f64> = (0..rows).map(|_| r.random_range(-1.0..=1.0)).collect();
        let phi = toeplitz_regressor(&u, n).unwrap();
        let y: Vec<f64> = (0..rows).map(|_| r.random_range(-2.0..=2.0)).collect();
        let sigma2 = 10f64.powf(r.random_range(-2.0..=0.0));
        let p = gram(&inst.spec, &inst.grid).unwrap().values;
        let mean = posterior_mean(&phi, &y, sigma2, &inst.spec, &inst.grid).unwrap();
        mean_err = mean_err.max(rel_diff(&mean, &dense_posterior_mean(&phi, &y, sigma2, &p)));
        let lml = log_marginal_likelihood(&phi, &y, sigma2, &inst.spec, &inst.grid).unwrap();
        let reference = dense_log_ml(&phi, &y, sigma2, &p);
        lml_err = lml_err.max((lml - reference).abs() / reference.abs());
    }

    // Tuning against data simulated from the prior, truth on the grid.
    let mut shortfall = f64::NEG_INFINITY;
    for (seed, c, beta) in [(91u64, 1.0, 0.2), (92, 10.0, 0.5), (93, 0.3, 0.1), (94, 3.0, 1.0)] {
        let (n, rows) = (30, 500);
        let spec = KernelSpec::ss1(c, beta).unwrap();
        let g = SamplingGrid::uniform(n, 1.0, 1.0).unwrap();
        let src = WhiteNoiseSource::new(seed, 1.0).unwrap();
        let h = sqrt_factor(&spec, &g).unwrap().mul_vec(&src.draws(0, n)).unwrap();
        let u = src.draws(1, rows);
        let phi = toeplitz_regressor(&u, n).unwrap();
        let clean = phi.mul_vec(&h).unwrap();
        let sigma2 = clean.iter().map(|x| x * x).sum::<f64>() / rows as f64 / 10.0;
        let y: Vec<f64> = clean.iter().zip(src.draws(2, rows)).map(|(a, e)| a + sigma2.sqrt() * e).collect();
        let problem = EstimationProblem::new(u, y.clone(), n, None).unwrap();
        let search = SearchConfig {
            family: KernelFamily::Ss1,
            c: LogRange::Values { values: vec![c / 10.0, c, c * 10.0] },
            beta: LogRange::Values { values: vec![beta / 3.0, beta, beta * 3.0] },
            sigma2: LogRange::Values { values: vec![sigma2 / 10.0, sigma2, sigma2 * 10.0] },
            refine: RefineConfig::default(),
        };
        let tuned = tune_hyperparameters(&problem, &g, &search).unwrap();
        let truth = log_marginal_likelihood(&phi, &y, sigma2, &spec, &g).unwrap();
        shortfall = shortfall.max(truth - tuned.log_ml);
    }
    Outcome::new(
        mean_err <= 1e-8 && lml_err <= 1e-8 && shortfall <= 1e-6,
        format!(
            "50 problems: mean {mean_err:.2e}, log-ML {lml_err:.2e} relative; tuning shortfall vs truth {shortfall:.2e}"
        ),
    )
}

/// Worked examples to within a few ulps (`ln 2` is not exact in binary).
fn c10_examples() -> Outcome {
    let mut failures = Vec::new();
    let mut check = |name: &str, got: &[f64], want: &[f64]| {
        let ok = got.len() == want.len()
            && got.iter().zip(want).all(|(a, b)| (a - b).abs() <= 4.0 * f64::EPSILON * b.abs());
        if !ok {
            failures.push(format!("{name}: {got:?} != {want:?}"));
        }
    };
    let ss1 = KernelSpec::ss1(1.0, LN_2).unwrap();
    let w = KernelSpec::wiener(1.0).unwrap();
    let w2 = KernelSpec::wiener(2.0).unwrap();
    let gs = grid(&[1.0, 2.0, 3.0]);
    let gw = grid(&[1.0, 2.0, 4.0]);
    let r = 1.0 / (2.0 * SQRT_2);

    let ps = gram(&ss1, &gs).unwrap().values;
    check("SS-1 gram", ps.as_slice(), &[0.5, 0.25, 0.125, 0.25, 0.25, 0.125, 0.125, 0.125, 0.125]);
    let pw = gram(&w, &gw).unwrap().values;
    check("Wiener gram", pw.as_slice(), &[1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 1.0, 2.0, 4.0]);
    check("increments", &stable_increments(&gs, LN_2), &[0.25, 0.125, 0.125]);

    let t = closed_form_inverse(&ss1, &gs).unwrap();
    check("SS-1 inverse diag", t.diag(), &[4.0, 12.0, 16.0]);
    check("SS-1 inverse offdiag", t.offdiag(), &[-4.0, -8.0]);
    let t = closed_form_inverse(&w, &gw).unwrap();
    check("Wiener inverse diag", t.diag(), &[2.0, 1.5, 0.5]);
    check("Wiener inverse offdiag", t.offdiag(), &[-1.0, -0.5]);
    let t = closed_form_inverse(&w2, &gw).unwrap();
    check("Wiener c=2 inverse diag", t.diag(), &[1.0, 0.75, 0.25]);
    check("Wiener c=2 inverse offdiag", t.offdiag(), &[-0.5, -0.25]);

    check("Wiener log det", &[log_det(&w, &gw).unwrap()], &[LN_2]);
    check("SS-1 log det", &[log_det(&ss1, &gs).unwrap()], &[-8.0 * LN_2]);

    let f = precision_factor(&ss1, &gs).unwrap();
    check("SS-1 factor diag", f.diag(), &[2.0, 2.0 * SQRT_2, 2.0 * SQRT_2]);
    check("SS-1 factor sup", f.sup(), &[-2.0, -2.0 * SQRT_2]);
    let f = precision_factor(&w, &gw).unwrap();
    check("Wiener factor diag", f.diag(), &[SQRT_2, 1.0, 0.5]);
    check("Wiener factor sup", f.sup(), &[-SQRT_2 / 2.0, -0.5]);

    let u = sqrt_factor(&ss1, &gs).unwrap().to_dense();
    check("SS-1 square root", u.as_slice(), &[0.5, r, r, 0.0, r, r, 0.0, 0.0, r]);
    let u = sqrt_factor(&ss1, &grid(&[1.0])).unwrap().to_dense();
    check("n=1 square root", u.as_slice(), &[0.5f64.sqrt()]);
    let u = sqrt_factor(&w, &gw).unwrap().to_dense();
    check("Wiener U U^T", matmul(&u, &u.transpose()).unwrap().as_slice(), pw.as_slice());

    let ext = band_extend(&band_project(&ps).unwrap()).unwrap();
    check("SS-1 M13", &[ext[(0, 2)]], &[0.125]);
    check("SS-1 extension", ext.as_slice(), ps.as_slice());
    let ext = band_extend(&band_project(&pw).unwrap()).unwrap();
    check("Wiener M13", &[ext[(0, 2)]], &[1.0]);
    check("Wiener extension", ext.as_slice(), pw.as_slice());

    let tau = stable_time_transform(&gs, LN_2).unwrap();
    check("time transform", tau.tau().times(), &[0.125, 0.25, 0.5]);

    let h = gaussian_entropy(&ps).unwrap();
    if (h - 1.4842).abs() > 1e-4 {
        failures.push(format!("entropy {h}"));
    }
    Outcome::new(
        failures.is_empty(),
        if failures.is_empty() {
            format!("all entries within 4 ulps; entropy {h:.6}")
        } else {
            failures.join("; ")
        },
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("closed-form inverse, 200 instances", c1_inverse),
        ("log-determinant, 200 instances", c2_log_det),
        ("precision factor and square root", c3_factors),
        ("covariance completion", c4_completion),
        ("completion entropy dominance", c5_completion_entropy),
        ("increment-constrained entropy", c6_increment_entropy),
        ("sampler covariances, 200k paths", c7_samplers),
        ("apply_precision performance", c8_performance),
        ("estimator coherence", c9_estimator),
        ("worked examples", c10_examples),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let out = run();
        let tag = if out.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] criterion {:>2}: {name}: {}", k + 1, out.detail);
        failed += usize::from(!out.pass);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
