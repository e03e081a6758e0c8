#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stablekern::oracle::{dense_inverse, dense_logdet, dense_solve, matmul};
use stablekern::{DenseMatrix, KernelFamily, KernelSpec, SamplingGrid};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn grid(t: &[f64]) -> SamplingGrid {
    SamplingGrid::new(t.to_vec()).unwrap()
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub spec: KernelSpec,
    pub grid: SamplingGrid,
}

/// Grid with `n` points, first time and gaps uniform on `[0.1, 2]`;
/// `beta` on `[0.05, 2]`, `c` on `[0.1, 10]`.
pub fn random_instance(rng: &mut impl Rng, family: KernelFamily, n: usize) -> Instance {
    let mut t = Vec::with_capacity(n);
    let mut acc = 0.0;
    for _ in 0..n {
        acc += rng.random_range(0.1..=2.0);
        t.push(acc);
    }
    let c = rng.random_range(0.1..=10.0);
    let spec = match family {
        KernelFamily::Wiener => KernelSpec::wiener(c).unwrap(),
        KernelFamily::Ss1 => KernelSpec::ss1(c, rng.random_range(0.05..=2.0)).unwrap(),
    };
    Instance {
        spec,
        grid: SamplingGrid::new(t).unwrap(),
    }
}

/// `count` instances alternating kernel families, `n` uniform on `n_range`.
pub fn instances(seed: u64, count: usize, n_range: std::ops::RangeInclusive<usize>) -> Vec<Instance> {
    let mut r = rng(seed);
    (0..count)
        .map(|k| {
            let family = if k % 2 == 0 { KernelFamily::Ss1 } else { KernelFamily::Wiener };
            let n = r.random_range(n_range.clone());
            random_instance(&mut r, family, n)
        })
        .collect()
}

pub fn max_abs_diff(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    a.sub(b).unwrap().max_abs()
}

/// Largest `|i - j| > 1` entry of `m`.
pub fn max_off_band(m: &DenseMatrix) -> f64 {
    let n = m.rows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i.abs_diff(j) > 1 {
                worst = worst.max(m[(i, j)].abs());
            }
        }
    }
    worst
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

/// `P Phi^T (Phi P Phi^T + sigma2 I)^{-1} y`, never inverting `P`.
pub fn dense_posterior_mean(phi: &DenseMatrix, y: &[f64], sigma2: f64, p: &DenseMatrix) -> Vec<f64> {
    let k = marginal_cov(phi, sigma2, p);
    let alpha = dense_solve(&k, y).unwrap();
    let pt = matmul(p, &phi.transpose()).unwrap();
    pt.mul_vec(&alpha).unwrap()
}

/// `(Phi^T Phi / sigma2 + inv(P))^{-1} Phi^T y / sigma2` with a dense inverse.
pub fn dense_posterior_mean_inv(phi: &DenseMatrix, y: &[f64], sigma2: f64, p: &DenseMatrix) -> Vec<f64> {
    let pinv = dense_inverse(p).unwrap();
    let ptp = matmul(&phi.transpose(), phi).unwrap();
    let a = DenseMatrix::from_fn(pinv.rows(), pinv.cols(), |i, j| ptp[(i, j)] / sigma2 + pinv[(i, j)]);
    let b: Vec<f64> = phi.transpose().mul_vec(y).unwrap().iter().map(|v| v / sigma2).collect();
    dense_solve(&a, &b).unwrap()
}

/// `ln N(y; 0, Phi P Phi^T + sigma2 I)` over the full `N x N` covariance.
pub fn dense_log_ml(phi: &DenseMatrix, y: &[f64], sigma2: f64, p: &DenseMatrix) -> f64 {
    let k = marginal_cov(phi, sigma2, p);
    let alpha = dense_solve(&k, y).unwrap();
    let quad: f64 = y.iter().zip(&alpha).map(|(a, b)| a * b).sum();
    let n = y.len() as f64;
    -0.5 * (quad + dense_logdet(&k).unwrap() + n * (2.0 * std::f64::consts::PI).ln())
}

fn marginal_cov(phi: &DenseMatrix, sigma2: f64, p: &DenseMatrix) -> DenseMatrix {
    let k = matmul(&matmul(phi, p).unwrap(), &phi.transpose()).unwrap();
    DenseMatrix::from_fn(k.rows(), k.cols(), |i, j| {
        k[(i, j)] + if i == j { sigma2 } else { 0.0 }
    })
}
