//! Joint distributions of section values and scaled jets, their exact
//! covariances, and the universal scaling limit.
//!
//! For `n` configuration points the random vector collects the section
//! values `x^p = s(z^p)` and the scaled horizontal derivatives `xi^p_q =
//! N^{-1/2} d^h s(z^p)` (holomorphic components first, then the
//! anti-holomorphic ones, which vanish identically on these integrable
//! models). Under the normalized Gaussian ensemble the covariance is
//! `Delta^N = (1/d_N) J J^*` where `J` stacks the basis jet evaluations;
//! the same matrix governs the sphere ensemble asymptotically.
//!
//! The scaling limit of `Delta^N(z / sqrt N)` is assembled from the
//! Heisenberg model kernel with the level-one horizontal rules
//! `d^h/du_q -> d/du_q - ubar_q/2`, `d^h/dubar_q -> d/dubar_q + u_q/2`:
//!
//! ```text
//! A_pp'        = pi^{-m} exp(psi2)
//! B_p,(p'q')   = pi^{-m} (z^p_q' - z^p'_q') exp(psi2)
//! C_(pq),(p'q')= pi^{-m} [delta_qq' + (conj z^p'_q - conj z^p_q)
//!                                     (z^p_q' - z^p'_q')] exp(psi2)
//! ```
//!
//! all scaled by `m! / c_1^m` and vanishing in every anti-holomorphic slot.
//! The `delta_qq'` term is required: without it the coincident-point
//! derivative variance would vanish, contradicting the exact finite-N
//! covariance (which is constant in N at the chart center of the flat
//! model). [`oracle`] recomputes the limit by mechanical jet
//! differentiation of the model kernel as an independent check.

use crate::linalg::{hermitian_eigen, CMatrix};
use crate::measure_lab::{block_count, EnsembleKind, EnsembleSampler};
use crate::model_geometry::HeisenbergChart;
use crate::section_space::{jet_deriv_index, jet_length, jet_value_index, SectionBasis};
use crate::{C64, Error, Result};
use rayon::prelude::*;

/// Cap on the jet-vector length `n (2m + 1)` for covariance assembly.
pub const JET_LENGTH_CAP: usize = 64;

/// Minimal allowed configuration-point separation (scaled units).
pub const MIN_SEPARATION: f64 = 1e-6;

/// Hermitian PSD covariance of a jet vector, with named blocks
/// `A = <x xbar>`, `B = <x xibar>`, `C = <xi xibar>`.
#[derive(Clone, Debug)]
pub struct CovarianceBlocks {
    pub n_points: usize,
    pub m: usize,
    pub mat: CMatrix,
}

impl CovarianceBlocks {
    pub fn len(&self) -> usize {
        jet_length(self.n_points, self.m)
    }

    pub fn is_empty(&self) -> bool {
        self.n_points == 0
    }

    pub fn a(&self, p: usize, pp: usize) -> C64 {
        self.mat[(jet_value_index(p), jet_value_index(pp))]
    }

    pub fn b(&self, p: usize, pp: usize, qp: usize) -> C64 {
        self.mat[(jet_value_index(p), jet_deriv_index(self.n_points, self.m, pp, qp))]
    }

    pub fn c(&self, p: usize, q: usize, pp: usize, qp: usize) -> C64 {
        self.mat[(
            jet_deriv_index(self.n_points, self.m, p, q),
            jet_deriv_index(self.n_points, self.m, pp, qp),
        )]
    }

    /// Largest modulus among entries in anti-holomorphic rows or columns.
    pub fn anti_holo_max(&self) -> f64 {
        let len = self.len();
        let mut worst = 0.0f64;
        for p in 0..self.n_points {
            for q in self.m..2 * self.m {
                let i = jet_deriv_index(self.n_points, self.m, p, q);
                for j in 0..len {
                    worst = worst.max(self.mat[(i, j)].norm());
                    worst = worst.max(self.mat[(j, i)].norm());
                }
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.mat.max_abs()
    }

    pub fn entrywise_max_dev(&self, other: &CovarianceBlocks) -> f64 {
        let len = self.len();
        let mut worst = 0.0f64;
        for i in 0..len {
            for j in 0..len {
                worst = worst.max((self.mat[(i, j)] - other.mat[(i, j)]).norm());
            }
        }
        worst
    }

    /// Spectral norm of the difference.
    pub fn spectral_dev(&self, other: &CovarianceBlocks) -> f64 {
        let len = self.len();
        let diff = CMatrix::from_fn(len, len, |i, j| self.mat[(i, j)] - other.mat[(i, j)]);
        let (vals, _) = hermitian_eigen(&diff);
        vals.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// Smallest eigenvalue relative to the largest (for PSD checks).
    pub fn min_eigenvalue(&self) -> f64 {
        let (vals, _) = hermitian_eigen(&self.mat);
        vals[0]
    }

    pub fn to_json(&self) -> serde_json::Value {
        let len = self.len();
        let rows: Vec<Vec<[f64; 2]>> = (0..len)
            .map(|i| (0..len).map(|j| [self.mat[(i, j)].re, self.mat[(i, j)].im]).collect())
            .collect();
        serde_json::json!({ "n_points": self.n_points, "m": self.m, "matrix": rows })
    }
}

/// Stack the basis jet evaluations at the configuration points into the
/// `n(2m+1) x d` map whose rows are (values..., scaled derivatives...).
pub fn jet_map(
    basis: &SectionBasis,
    chart: &HeisenbergChart,
    points: &[Vec<C64>],
) -> CMatrix {
    let m = basis.model().m();
    let n_points = points.len();
    let d = basis.dim();
    let scale = 1.0 / (basis.model().n_power() as f64).sqrt();
    let mut j_mat = CMatrix::zeros(jet_length(n_points, m), d);
    for (p, z) in points.iter().enumerate() {
        let frame = basis.frame_jet(chart, z, 0.0);
        for j in 0..d {
            j_mat[(jet_value_index(p), j)] = frame.values[j];
            for q in 0..m {
                j_mat[(jet_deriv_index(n_points, m, p, q), j)] = scale * frame.d_holo[q][j];
                j_mat[(jet_deriv_index(n_points, m, p, m + q), j)] =
                    scale * frame.d_anti[q][j];
            }
        }
    }
    j_mat
}

/// Exact jet covariance `Delta^N = (1/d_N) J J^*` at the given chart
/// points. Fails on coincident points, oversize configurations, or loss of
/// positive semi-definiteness.
pub fn covariance_exact(
    basis: &SectionBasis,
    chart: &HeisenbergChart,
    points: &[Vec<C64>],
) -> Result<CovarianceBlocks> {
    let m = basis.model().m();
    let n_points = points.len();
    if n_points == 0 {
        return Err(Error::Invalid("empty configuration".into()));
    }
    let len = jet_length(n_points, m);
    if len > JET_LENGTH_CAP {
        return Err(Error::ResourceCap(format!(
            "jet vector length {len} exceeds cap {JET_LENGTH_CAP}"
        )));
    }
    for i in 0..n_points {
        for j in i + 1..n_points {
            let d2: f64 = points[i]
                .iter()
                .zip(points[j].iter())
                .map(|(a, b)| (a - b).norm_sqr())
                .sum();
            if d2.sqrt() < MIN_SEPARATION {
                return Err(Error::Invalid(format!(
                    "configuration points {i} and {j} are closer than {MIN_SEPARATION}"
                )));
            }
        }
    }
    let j_mat = jet_map(basis, chart, points);
    let d = basis.dim() as f64;
    let mut mat = j_mat.mul(&j_mat.adjoint());
    for i in 0..len {
        for j in 0..len {
            mat[(i, j)] /= d;
        }
    }
    mat.hermitize();
    let cov = CovarianceBlocks { n_points, m, mat };
    let min_eig = cov.min_eigenvalue();
    let top = cov.max_abs().max(1e-300);
    if min_eig < -1e-10 * top {
        return Err(Error::Numerical(format!(
            "jet covariance lost positivity: min eigenvalue {min_eig:.3e}"
        )));
    }
    Ok(cov)
}

/// Universal limit covariance at a configuration in scaled coordinates,
/// from the closed-form Heisenberg blocks; `c1_pow_m` is `c_1(L)^m` (1 for
/// the hyperplane bundle on projective space).
pub fn covariance_limit(points: &[Vec<C64>], m: usize, c1_pow_m: f64) -> CovarianceBlocks {
    let n_points = points.len();
    let len = jet_length(n_points, m);
    let mut mat = CMatrix::zeros(len, len);
    let mut m_fact = 1.0f64;
    for k in 1..=m {
        m_fact *= k as f64;
    }
    let kappa = m_fact / c1_pow_m / std::f64::consts::PI.powi(m as i32);
    for p in 0..n_points {
        for pp in 0..n_points {
            let e = crate::kernel_engine::psi2(&points[p], &points[pp]).exp() * kappa;
            mat[(jet_value_index(p), jet_value_index(pp))] = e;
            for qp in 0..m {
                let dzq = points[p][qp] - points[pp][qp];
                mat[(jet_value_index(p), jet_deriv_index(n_points, m, pp, qp))] = dzq * e;
                // hermitian mirror fills the conj side below
            }
            for q in 0..m {
                for qp in 0..m {
                    let delta = if q == qp { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
                    let factor = (points[pp][q].conj() - points[p][q].conj())
                        * (points[p][qp] - points[pp][qp]);
                    mat[(
                        jet_deriv_index(n_points, m, p, q),
                        jet_deriv_index(n_points, m, pp, qp),
                    )] = (delta + factor) * e;
                }
            }
        }
    }
    // fill B^* block
    for p in 0..n_points {
        for pp in 0..n_points {
            for qp in 0..2 * m {
                let b = mat[(jet_value_index(p), jet_deriv_index(n_points, m, pp, qp))];
                mat[(jet_deriv_index(n_points, m, pp, qp), jet_value_index(p))] = b.conj();
            }
        }
    }
    CovarianceBlocks { n_points, m, mat }
}

/// Independent verification route for the limit covariance: differentiate
/// the Heisenberg-model kernel mechanically with jet arithmetic and the
/// horizontal rules, making no use of the closed-form block expressions.
pub mod oracle {
    use super::*;
    use crate::autodiff::Jet;

    /// Jets over (u real coords, v real coords, theta, phi): up to
    /// 4 * MAX_M + 2 = 10 variables.
    type K10 = Jet<10>;

    struct Slot {
        ix: usize,
        iy: usize,
        /// -1 for d/dz, +1 for d/dzbar.
        conj_sign: f64,
        /// fiber-angle variable index for this slot.
        angle: usize,
        /// connection coefficient of the slot's horizontal rule.
        conn: C64,
    }

    fn wirt1(jet: &K10, s: &Slot) -> C64 {
        0.5 * (jet.grad[s.ix] + s.conj_sign * C64::i() * jet.grad[s.iy])
    }

    fn wirt1_angle(jet: &K10, s: &Slot, angle: usize) -> C64 {
        0.5 * (jet.hess[s.ix][angle] + s.conj_sign * C64::i() * jet.hess[s.iy][angle])
    }

    fn wirt2(jet: &K10, s1: &Slot, s2: &Slot) -> C64 {
        0.25 * (jet.hess[s1.ix][s2.ix]
            - s1.conj_sign * s2.conj_sign * jet.hess[s1.iy][s2.iy]
            + C64::i()
                * (s2.conj_sign * jet.hess[s1.ix][s2.iy]
                    + s1.conj_sign * jet.hess[s1.iy][s2.ix]))
    }

    /// One horizontal derivative: `D = wirt - conn * d/dangle`.
    fn horiz1(jet: &K10, s: &Slot) -> C64 {
        wirt1(jet, s) - s.conn * jet.grad[s.angle]
    }

    /// Composition of horizontal derivatives acting on different slots.
    fn horiz2(jet: &K10, s1: &Slot, s2: &Slot) -> C64 {
        wirt2(jet, s1, s2) - s2.conn * wirt1_angle(jet, s1, s2.angle)
            - s1.conn * wirt1_angle(jet, s2, s1.angle)
            + s1.conn * s2.conn * jet.hess[s1.angle][s2.angle]
    }

    /// Model kernel as a jet in all 4m + 2 real variables at
    /// `(u, theta; v, phi) = (zp, 0; zpp, 0)`.
    fn kernel_jet(zp: &[C64], zpp: &[C64], m: usize) -> K10 {
        let u: Vec<K10> = (0..m).map(|q| Jet::complex_variable(2 * q, 2 * q + 1, zp[q])).collect();
        let v: Vec<K10> = (0..m)
            .map(|q| Jet::complex_variable(2 * m + 2 * q, 2 * m + 2 * q + 1, zpp[q]))
            .collect();
        let theta = K10::variable(4 * m, 0.0);
        let phi = K10::variable(4 * m + 1, 0.0);
        // E = i(theta - phi) + u . conj(v) - (|u|^2 + |v|^2)/2
        let mut e = theta.sub(&phi).scale(C64::i());
        for q in 0..m {
            e = e.add(&u[q].mul(&v[q].conj()));
            e = e.sub(&u[q].norm_sqr().scale(C64::new(0.5, 0.0)));
            e = e.sub(&v[q].norm_sqr().scale(C64::new(0.5, 0.0)));
        }
        e.exp().scale(C64::new(1.0 / std::f64::consts::PI.powi(m as i32), 0.0))
    }

    /// First-slot horizontal derivative descriptor; `q < m` holomorphic,
    /// `q >= m` anti-holomorphic. Connection coefficients are the exact
    /// Heisenberg-group ones, `A_q(u) = -(i/2) conj(u_q)`.
    fn first_slot(q: usize, zp: &[C64], m: usize) -> Slot {
        if q < m {
            Slot {
                ix: 2 * q,
                iy: 2 * q + 1,
                conj_sign: -1.0,
                angle: 4 * m,
                conn: C64::new(0.0, -0.5) * zp[q].conj(),
            }
        } else {
            let qq = q - m;
            Slot {
                ix: 2 * qq,
                iy: 2 * qq + 1,
                conj_sign: 1.0,
                angle: 4 * m,
                conn: C64::new(0.0, 0.5) * zp[qq],
            }
        }
    }

    /// Second-slot descriptor for the conjugated operator: a holomorphic
    /// jet component pairs with `d/dvbar - conj(A)(v) d/dphi`.
    fn second_slot(q: usize, zpp: &[C64], m: usize) -> Slot {
        if q < m {
            Slot {
                ix: 2 * m + 2 * q,
                iy: 2 * m + 2 * q + 1,
                conj_sign: 1.0,
                angle: 4 * m + 1,
                conn: C64::new(0.0, 0.5) * zpp[q],
            }
        } else {
            let qq = q - m;
            Slot {
                ix: 2 * m + 2 * qq,
                iy: 2 * m + 2 * qq + 1,
                conj_sign: -1.0,
                angle: 4 * m + 1,
                conn: C64::new(0.0, -0.5) * zpp[qq].conj(),
            }
        }
    }

    /// Limit covariance by differentiation of the model kernel.
    pub fn covariance_limit_by_differentiation(
        points: &[Vec<C64>],
        m: usize,
        c1_pow_m: f64,
    ) -> CovarianceBlocks {
        assert!(m <= crate::model_geometry::MAX_M);
        let n_points = points.len();
        let len = jet_length(n_points, m);
        let mut mat = CMatrix::zeros(len, len);
        let mut m_fact = 1.0f64;
        for k in 1..=m {
            m_fact *= k as f64;
        }
        let kappa = C64::new(m_fact / c1_pow_m, 0.0);
        for p in 0..n_points {
            for pp in 0..n_points {
                let jet = kernel_jet(&points[p], &points[pp], m);
                mat[(jet_value_index(p), jet_value_index(pp))] = kappa * jet.val;
                for q in 0..2 * m {
                    let s2 = second_slot(q, &points[pp], m);
                    mat[(jet_value_index(p), jet_deriv_index(n_points, m, pp, q))] =
                        kappa * horiz1(&jet, &s2);
                    let s1 = first_slot(q, &points[p], m);
                    mat[(jet_deriv_index(n_points, m, p, q), jet_value_index(pp))] =
                        kappa * horiz1(&jet, &s1);
                }
                for q in 0..2 * m {
                    for qp in 0..2 * m {
                        let s1 = first_slot(q, &points[p], m);
                        let s2 = second_slot(qp, &points[pp], m);
                        mat[(
                            jet_deriv_index(n_points, m, p, q),
                            jet_deriv_index(n_points, m, pp, qp),
                        )] = kappa * horiz2(&jet, &s1, &s2);
                    }
                }
            }
        }
        CovarianceBlocks { n_points, m, mat }
    }
}

/// Per-power deviation of the exact covariance at `z / sqrt N` from the
/// limit at `z`.
#[derive(Clone, Debug, serde::Serialize)]
pub struct JpdDeviation {
    pub n_power: u32,
    pub max_dev: f64,
    pub spectral_dev: f64,
}

/// Run the scaling-convergence series for a fixed configuration in scaled
/// coordinates.
pub fn scaling_convergence(
    stacks: &[(&SectionBasis, &HeisenbergChart)],
    config: &[Vec<C64>],
) -> Result<Vec<JpdDeviation>> {
    if stacks.is_empty() {
        return Err(Error::Invalid("empty power list".into()));
    }
    let m = stacks[0].0.model().m();
    let limit = covariance_limit(config, m, 1.0);
    let mut out = Vec::with_capacity(stacks.len());
    for (basis, chart) in stacks {
        let n = basis.model().n_power();
        let rn = (n as f64).sqrt();
        let scaled: Vec<Vec<C64>> =
            config.iter().map(|z| z.iter().map(|c| c / rn).collect()).collect();
        let exact = covariance_exact(basis, chart, &scaled)?;
        out.push(JpdDeviation {
            n_power: n,
            max_dev: exact.entrywise_max_dev(&limit),
            spectral_dev: exact.spectral_dev(&limit),
        });
    }
    Ok(out)
}

/// Empirical joint second moments of sampled jets with jackknife standard
/// errors over the deterministic sample blocks.
pub struct JpdReport {
    pub n_power: u32,
    pub ensemble: EnsembleKind,
    pub samples: usize,
    pub points: Vec<Vec<C64>>,
    pub exact: CovarianceBlocks,
    pub empirical: CMatrix,
    /// Per-entry standard error (combined re/im), row-major.
    pub se: Vec<f64>,
}

pub fn empirical_jpd(
    basis: &SectionBasis,
    chart: &HeisenbergChart,
    points: &[Vec<C64>],
    ensemble: EnsembleKind,
    samples: usize,
    seed: u64,
) -> Result<JpdReport> {
    if samples < 1000 {
        return Err(Error::Invalid("need at least 1000 samples".into()));
    }
    let exact = covariance_exact(basis, chart, points)?;
    let m = basis.model().m();
    let len = jet_length(points.len(), m);
    let j_mat = jet_map(basis, chart, points);
    let draws = EnsembleSampler::new(ensemble, basis.dim(), seed).sample(samples);
    // per-block second-moment partials, reduced in block order
    let nb = block_count(samples);
    let partials: Vec<(CMatrix, usize)> = (0..nb)
        .into_par_iter()
        .map(|b| {
            let lo = b * crate::rng::BLOCK;
            let hi = (lo + crate::rng::BLOCK).min(samples);
            let mut acc = CMatrix::zeros(len, len);
            for c in &draws[lo..hi] {
                let y = j_mat.matvec(c);
                for i in 0..len {
                    for j in 0..len {
                        acc[(i, j)] += y[i] * y[j].conj();
                    }
                }
            }
            (acc, hi - lo)
        })
        .collect();
    let mut total = CMatrix::zeros(len, len);
    for (p, _) in &partials {
        for i in 0..len {
            for j in 0..len {
                total[(i, j)] += p[(i, j)];
            }
        }
    }
    let inv_n = 1.0 / samples as f64;
    let empirical = CMatrix::from_fn(len, len, |i, j| total[(i, j)] * inv_n);
    // jackknife over blocks
    let mut se = vec![0.0f64; len * len];
    if partials.len() >= 2 {
        let nbf = partials.len() as f64;
        for i in 0..len {
            for j in 0..len {
                let full = empirical[(i, j)];
                let mut var_re = 0.0;
                let mut var_im = 0.0;
                for (p, cnt) in &partials {
                    let rest = (total[(i, j)] - p[(i, j)]) / (samples - cnt) as f64;
                    var_re += (rest.re - full.re) * (rest.re - full.re);
                    var_im += (rest.im - full.im) * (rest.im - full.im);
                }
                let scale = (nbf - 1.0) / nbf;
                se[i * len + j] = (scale * (var_re + var_im)).sqrt();
            }
        }
    }
    Ok(JpdReport {
        n_power: basis.model().n_power(),
        ensemble,
        samples,
        points: points.to_vec(),
        exact,
        empirical,
        se,
    })
}

impl JpdReport {
    /// Largest ratio |empirical - exact| / se over entries with resolvable
    /// standard error; entries whose se is below `floor` are compared
    /// absolutely against the floor.
    pub fn max_sigma_deviation(&self, floor: f64) -> f64 {
        let len = self.exact.len();
        let mut worst = 0.0f64;
        for i in 0..len {
            for j in 0..len {
                let dev = (self.empirical[(i, j)] - self.exact.mat[(i, j)]).norm();
                let s = self.se[i * len + j].max(floor);
                worst = worst.max(dev / s);
            }
        }
        worst
    }

    /// Largest modulus among empirical entries in anti-holomorphic
    /// rows/columns.
    pub fn empirical_anti_holo_max(&self) -> f64 {
        let len = self.exact.len();
        let (n, m) = (self.exact.n_points, self.exact.m);
        let mut worst = 0.0f64;
        for p in 0..n {
            for q in m..2 * m {
                let i = jet_deriv_index(n, m, p, q);
                for j in 0..len {
                    worst = worst.max(self.empirical[(i, j)].norm());
                    worst = worst.max(self.empirical[(j, i)].norm());
                }
            }
        }
        worst
    }
}
