//! Measures on section spaces and their classical limit lemmas.
//!
//! Three coefficient ensembles: Haar measure on the unit sphere of the
//! section space, the normalized complex Gaussian with `<c_j conj(c_k)> =
//! delta_jk / d`, and normalized Lebesgue measure on the unit ball. All
//! samplers run on the deterministic block streams of [`crate::rng`], so a
//! seed fixes every batch bit-for-bit regardless of worker count.
//!
//! Generalized Gaussians are laws determined by a positive semi-definite
//! covariance through the characteristic function `exp(-<Delta t, t>/2)`;
//! degenerate directions carry no mass, so the sampler factors the clamped
//! spectral decomposition. Pushforwards transform the covariance by
//! `T Delta T^*`.
//!
//! The classical facts exercised here: the sphere tail law
//! `P(|<P, A>| > lambda) = (1 - lambda^2)^{d-1}`, and the density of the
//! scaled coordinate projection of the sphere,
//!
//! ```text
//! psi_d(x) = sigma_{d-k} / (sigma_d d^{k/2}) [1 - |x|^2/d]^{(d-k-2)/2},
//! ```
//!
//! which integrates to one, reduces to Archimedes' axis projection at
//! (d, k) = (3, 1), and tends to the standard Gaussian density as the
//! dimension grows.

use crate::linalg::{hermitian_eigen, CMatrix};
use crate::rng::{block_rng, fill_blocks, standard_complex_normal, standard_normal, uniform_01, BLOCK};
use crate::{C64, Error, Result};

/// Coefficient ensemble kinds on a d-dimensional section space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleKind {
    /// Haar measure on the unit sphere.
    Sphere,
    /// Complex Gaussian with `<c_j conj(c_k)> = delta_jk / d`.
    NormalizedGaussian,
    /// Normalized Lebesgue measure on the unit ball.
    Ball,
}

/// Deterministic sampler for one ensemble.
#[derive(Clone, Copy, Debug)]
pub struct EnsembleSampler {
    pub kind: EnsembleKind,
    pub dim: usize,
    pub seed: u64,
}

impl EnsembleSampler {
    pub fn new(kind: EnsembleKind, dim: usize, seed: u64) -> EnsembleSampler {
        EnsembleSampler { kind, dim, seed }
    }

    /// Draw `count` i.i.d. coefficient vectors. Identical `(seed, kind,
    /// dim)` give identical batches for any worker count.
    pub fn sample(&self, count: usize) -> Vec<Vec<C64>> {
        let kind = self.kind;
        let dim = self.dim;
        let tag = match kind {
            EnsembleKind::Sphere => 0x5348,
            EnsembleKind::NormalizedGaussian => 0x4755,
            EnsembleKind::Ball => 0x424c,
        };
        fill_blocks(self.seed, tag, count, dim, move |rng, row| {
            for c in row.iter_mut() {
                *c = standard_complex_normal(rng);
            }
            match kind {
                EnsembleKind::Sphere | EnsembleKind::Ball => {
                    let norm = row.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
                    let scale = if kind == EnsembleKind::Ball {
                        // radius law r = U^{1/(2d)} for the ball in real
                        // dimension 2d
                        uniform_01(rng).powf(1.0 / (2.0 * dim as f64)) / norm
                    } else {
                        1.0 / norm
                    };
                    for c in row.iter_mut() {
                        *c *= scale;
                    }
                }
                EnsembleKind::NormalizedGaussian => {
                    let scale = 1.0 / (dim as f64).sqrt();
                    for c in row.iter_mut() {
                        *c *= scale;
                    }
                }
            }
        })
    }
}

/// Uniform samples on the real unit sphere in `R^d`.
pub fn sample_real_sphere(d: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    fill_blocks(seed, 0x7253, count, d, |rng, row| {
        for x in row.iter_mut() {
            *x = standard_normal(rng);
        }
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in row.iter_mut() {
            *x /= norm;
        }
    })
}

/// Gaussian law on `R^n` with positive semi-definite covariance, defined
/// through its characteristic function and supported on the positive
/// eigenspace.
pub struct GeneralizedGaussian {
    pub dim: usize,
    delta: CMatrix,
    eigvals: Vec<f64>,
    /// Columns scaled by sqrt(eigenvalue): sample = factor * g.
    factor: CMatrix,
    pub support_rank: usize,
}

/// Relative eigenvalue clamp for PSD matrices arriving with roundoff.
pub const PSD_CLAMP: f64 = 1e-12;

/// Build a generalized Gaussian from a real symmetric PSD matrix given
/// row-major.
pub fn generalized_gaussian(delta: &[f64], n: usize) -> Result<GeneralizedGaussian> {
    assert_eq!(delta.len(), n * n);
    let dm = CMatrix::from_fn(n, n, |i, j| C64::new(delta[i * n + j], 0.0));
    generalized_gaussian_c(dm)
}

/// Hermitian-matrix version; used both for real symmetric input and for the
/// real embedding of complex covariances.
pub fn generalized_gaussian_c(delta: CMatrix) -> Result<GeneralizedGaussian> {
    let n = delta.rows;
    let scale = delta.max_abs().max(1e-300);
    if delta.hermitian_defect() > 1e-10 * scale {
        return Err(Error::Invalid(format!(
            "covariance is not symmetric/hermitian within tolerance (defect {:.3e})",
            delta.hermitian_defect()
        )));
    }
    let (vals, vecs) = hermitian_eigen(&delta);
    let top = vals.iter().cloned().fold(0.0f64, f64::max).max(1e-300);
    if vals[0] < -PSD_CLAMP * top - 1e-300 {
        return Err(Error::Invalid(format!(
            "covariance has a negative eigenvalue {:.3e} beyond the clamp",
            vals[0]
        )));
    }
    let clamped: Vec<f64> = vals.iter().map(|&v| if v < PSD_CLAMP * top { 0.0 } else { v }).collect();
    let support_rank = clamped.iter().filter(|&&v| v > 0.0).count();
    let factor = CMatrix::from_fn(n, n, |i, j| vecs[(i, j)] * clamped[j].sqrt());
    // factorization must reproduce delta
    let rec = factor.mul(&factor.adjoint());
    let mut err = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            err = err.max((rec[(i, j)] - delta[(i, j)]).norm());
        }
    }
    if err > 1e-10 * scale.max(1.0) {
        return Err(Error::Numerical(format!(
            "spectral factorization error {err:.3e} exceeds tolerance"
        )));
    }
    Ok(GeneralizedGaussian { dim: n, delta, eigvals: clamped, factor, support_rank })
}

impl GeneralizedGaussian {
    pub fn covariance(&self) -> &CMatrix {
        &self.delta
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigvals
    }

    /// Characteristic function `E exp(i <t, x>) = exp(-<Delta t, t>/2)` for
    /// real covariances.
    pub fn characteristic_function(&self, t: &[f64]) -> f64 {
        assert_eq!(t.len(), self.dim);
        let mut q = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                q += self.delta[(i, j)].re * t[i] * t[j];
            }
        }
        (-0.5 * q).exp()
    }

    /// Draw real sample vectors (valid when the covariance is real).
    pub fn sample(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let n = self.dim;
        let factor = self.factor.clone();
        fill_blocks(seed, 0x4747, count, n, move |rng, row| {
            let g: Vec<f64> = (0..n).map(|_| standard_normal(rng)).collect();
            for i in 0..n {
                let mut s = 0.0;
                for j in 0..n {
                    s += factor[(i, j)].re * g[j];
                }
                row[i] = s;
            }
        })
    }
}

/// Pushforward by a (not necessarily surjective) real linear map:
/// the covariance transforms as `T Delta T^T`.
pub fn pushforward(t_map: &[f64], k: usize, g: &GeneralizedGaussian) -> Result<GeneralizedGaussian> {
    let n = g.dim;
    assert_eq!(t_map.len(), k * n);
    let t = CMatrix::from_fn(k, n, |i, j| C64::new(t_map[i * n + j], 0.0));
    let mut pushed = t.mul(&g.delta).mul(&t.adjoint());
    pushed.hermitize();
    generalized_gaussian_c(pushed)
}

/// Complex circular Gaussian with hermitian PSD covariance
/// `<z_j conj(z_k)> = Delta_jk`, realized on the real embedding
/// `Sigma = (1/2) [[Re D, -Im D], [Im D^T?, Re D]]`.
pub struct ComplexGeneralizedGaussian {
    pub n: usize,
    real: GeneralizedGaussian,
}

pub fn complex_generalized_gaussian(delta: &CMatrix) -> Result<ComplexGeneralizedGaussian> {
    let n = delta.rows;
    let sigma = CMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let v = if i < n && j < n {
            0.5 * delta[(i, j)].re
        } else if i >= n && j >= n {
            0.5 * delta[(i - n, j - n)].re
        } else if i < n {
            -0.5 * delta[(i, j - n)].im
        } else {
            0.5 * delta[(i - n, j)].im
        };
        C64::new(v, 0.0)
    });
    Ok(ComplexGeneralizedGaussian { n, real: generalized_gaussian_c(sigma)? })
}

impl ComplexGeneralizedGaussian {
    pub fn sample(&self, count: usize, seed: u64) -> Vec<Vec<C64>> {
        let n = self.n;
        self.real
            .sample(count, seed)
            .into_iter()
            .map(|row| (0..n).map(|j| C64::new(row[j], row[j + n])).collect())
            .collect()
    }

    pub fn support_rank(&self) -> usize {
        self.real.support_rank
    }
}

/// Probability that a Haar point on the unit sphere of `C^d` pairs with a
/// fixed unit vector above `lambda` in modulus: `(1 - lambda^2)^{d-1}`.
pub fn sphere_tail_prob(lambda: f64, d: usize) -> f64 {
    assert!((0.0..1.0).contains(&lambda) && d >= 2);
    (1.0 - lambda * lambda).powi(d as i32 - 1)
}

/// `ln Gamma` by the Lanczos approximation (g = 7, 9 terms).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return pi.ln() - (pi * x).sin().ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + 7.5;
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// `ln Vol(S^{n-1}) = ln(2 pi^{n/2} / Gamma(n/2))`.
pub fn ln_sphere_area(n: usize) -> f64 {
    (2.0f64).ln() + 0.5 * n as f64 * std::f64::consts::PI.ln() - ln_gamma(0.5 * n as f64)
}

/// Density at `x` in `R^k` of the pushforward of the uniform sphere measure
/// on `S^{d-1}` under `x -> sqrt(d) (x_1, ..., x_k)`:
/// `sigma_{d-k} / (sigma_d d^{k/2}) [1 - |x|^2/d]^{(d-k-2)/2}` inside the
/// ball of radius sqrt(d), zero outside. The `d^{k/2}` normalization is the
/// one that integrates to one and matches the d = 3, k = 1 axis-projection
/// value `1/(2 sqrt 3)`. Requires `d >= k + 2` so the density is bounded;
/// the boundary case is exactly the Archimedes projection (constant
/// density).
pub fn sphere_projection_density(x: &[f64], d: usize, k: usize) -> f64 {
    assert!(d >= k + 2, "need d >= k + 2");
    assert_eq!(x.len(), k);
    let r2: f64 = x.iter().map(|v| v * v).sum();
    let df = d as f64;
    if r2 >= df {
        return 0.0;
    }
    let ln_c = ln_sphere_area(d - k) - ln_sphere_area(d) - 0.5 * k as f64 * df.ln();
    (ln_c + 0.5 * (df - k as f64 - 2.0) * (1.0 - r2 / df).ln()).exp()
}

/// One-sample Kolmogorov-Smirnov statistic against the standard normal CDF.
pub fn ks_vs_standard_normal(samples: &[f64]) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    let mut ks = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let cdf = standard_normal_cdf(x);
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        ks = ks.max((cdf - lo).abs()).max((hi - cdf).abs());
    }
    ks
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|p, q| p.partial_cmp(q).unwrap());
    ys.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let (na, nb) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j, mut ks) = (0usize, 0usize, 0.0f64);
    while i < xs.len() && j < ys.len() {
        if xs[i] <= ys[j] {
            i += 1;
        } else {
            j += 1;
        }
        ks = ks.max((i as f64 / na - j as f64 / nb).abs());
    }
    ks
}

pub fn standard_normal_cdf(x: f64) -> f64 {
    0.5 * erfc_scalar(-x / std::f64::consts::SQRT_2)
}

/// Complementary error function, ~1e-7 relative accuracy; plenty for the
/// statistical tolerances used here.
fn erfc_scalar(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let ans = t
        * (-z * z - 1.26551223
            + t * (1.00002368
                + t * (0.37409196
                    + t * (0.09678418
                        + t * (-0.18628806
                            + t * (0.27886807
                                + t * (-1.13520398
                                    + t * (1.48851587
                                        + t * (-0.82215223 + t * 0.17087277)))))))))
        .exp();
    if x >= 0.0 {
        ans
    } else {
        2.0 - ans
    }
}

/// Energy distance between two multivariate samples:
/// `2 E|X - Y| - E|X - X'| - E|Y - Y'|`. Pairwise sums are taken over a
/// deterministic prefix of at most `cap` rows per side to bound cost.
pub fn energy_distance(xs: &[Vec<f64>], ys: &[Vec<f64>], cap: usize) -> f64 {
    let xs = &xs[..xs.len().min(cap)];
    let ys = &ys[..ys.len().min(cap)];
    let dist = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
    };
    let mean_cross = {
        let mut s = 0.0;
        for a in xs {
            for b in ys {
                s += dist(a, b);
            }
        }
        s / (xs.len() * ys.len()) as f64
    };
    let mean_self = |v: &[Vec<f64>]| -> f64 {
        let n = v.len();
        if n < 2 {
            return 0.0;
        }
        let mut s = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                s += dist(&v[i], &v[j]);
            }
        }
        2.0 * s / (n * (n - 1)) as f64
    };
    2.0 * mean_cross - mean_self(xs) - mean_self(ys)
}

/// One map of a pushforward family: `R^d -> R^k`, row-major `k x d`.
pub struct PushMap {
    pub d: usize,
    pub k: usize,
    pub t: Vec<f64>,
}

impl PushMap {
    /// The Poincare-Borel projection `sqrt(d) (x_1..x_k)`.
    pub fn scaled_projection(d: usize, k: usize) -> PushMap {
        let mut t = vec![0.0; k * d];
        for i in 0..k {
            t[i * d + i] = (d as f64).sqrt();
        }
        PushMap { d, k, t }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.k)
            .map(|i| (0..self.d).map(|j| self.t[i * self.d + j] * x[j]).sum())
            .collect()
    }
}

/// Distance report of pushed sphere measures against a target generalized
/// Gaussian, one energy distance per family member (expected to decrease
/// when `(1/d) T T^*` converges to the target covariance).
pub fn spherical_vs_gaussian_check(
    maps: &[PushMap],
    target: &GeneralizedGaussian,
    samples: usize,
    seed: u64,
) -> Vec<f64> {
    let gauss = target.sample(samples, seed ^ 0x9e37);
    maps.iter()
        .enumerate()
        .map(|(i, map)| {
            let sphere = sample_real_sphere(map.d, samples, seed.wrapping_add(i as u64));
            let pushed: Vec<Vec<f64>> = sphere.iter().map(|x| map.apply(x)).collect();
            energy_distance(&pushed, &gauss, 2048)
        })
        .collect()
}

/// Monte Carlo estimate of the sphere tail law frequency, with the binomial
/// standard error. Uses the first coordinate as the fixed unit vector.
pub fn sphere_tail_frequency(d: usize, lambda: f64, samples: usize, seed: u64) -> (f64, f64) {
    let batch = EnsembleSampler::new(EnsembleKind::Sphere, d, seed).sample(samples);
    let hits = batch.iter().filter(|c| c[0].norm() > lambda).count();
    let p = hits as f64 / samples as f64;
    let se = (p * (1.0 - p) / samples as f64).sqrt();
    (p, se)
}

/// Jackknife standard errors over the deterministic RNG blocks; returns
/// (mean, se) of a statistic accumulated per block.
pub fn block_jackknife(block_means: &[(f64, usize)]) -> (f64, f64) {
    let total_n: usize = block_means.iter().map(|b| b.1).sum();
    let mean: f64 =
        block_means.iter().map(|b| b.0 * b.1 as f64).sum::<f64>() / total_n as f64;
    let nb = block_means.len();
    if nb < 2 {
        return (mean, f64::INFINITY);
    }
    let mut var = 0.0;
    for &(m, n) in block_means {
        let rest = (mean * total_n as f64 - m * n as f64) / (total_n - n) as f64;
        var += (rest - mean) * (rest - mean);
    }
    var *= (nb - 1) as f64 / nb as f64;
    (mean, var.sqrt())
}

/// Number of RNG blocks covering `count` samples.
pub fn block_count(count: usize) -> usize {
    count.div_ceil(BLOCK)
}

/// Deterministic uniform stream used by tests that need plain reals.
pub fn sample_uniform(count: usize, seed: u64) -> Vec<f64> {
    fill_blocks(seed, 0x5546, count, 1, |rng, row| row[0] = uniform_01(rng))
        .into_iter()
        .map(|r| r[0])
        .collect()
}

/// Convenience: rng for ad-hoc scalar draws in tests and experiments.
pub fn scalar_rng(seed: u64) -> rand_chacha::ChaCha12Rng {
    block_rng(seed, 0x5343, 0)
}
