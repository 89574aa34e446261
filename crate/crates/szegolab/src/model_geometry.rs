//! Model manifolds, Heisenberg charts, and quadrature grids.
//!
//! The models are the complex projective spaces `CP^m` (m = 1, 2) with the
//! hyperplane bundle power `O(N)`, hermitian metric Fubini-Study times
//! `exp(-weight)`, and symplectic form the curvature of that metric, so that
//! the total volume is `pi^m / m!`.
//!
//! A Heisenberg chart at a base point packages preferred coordinates and a
//! preferred frame: after an exact projective unitary moves the base point
//! to the affine origin, a linear change of coordinates normalizes the
//! metric at the origin and a holomorphic quadratic gauge factor normalizes
//! the frame weight `a` to `a(0) = 1`, `da|_0 = 0`, Hessian `d^2 a = (delta,
//! 0)` in the mixed/holomorphic blocks. All derivatives entering the
//! construction come from jet arithmetic, not finite differences, and the
//! unitary transport is exact, so recentering introduces no discretization
//! error.
//!
//! Quadrature grids integrate `polynomial x Fubini-Study density` exactly:
//! in the radial variable `s = |z|^2 / (1 + |z|^2)` those integrands become
//! polynomials on [0, 1], handled by Gauss-Legendre nodes, while equispaced
//! angular nodes kill all monomial cross-frequencies up to the declared
//! bound. The declared exactness is validated against the closed-form Beta
//! values rather than assumed.

use crate::autodiff::{wirtinger_dz, wirtinger_dz_dz, wirtinger_dz_dzbar, Jet};
use crate::linalg::{cholesky, gauss_legendre_01, invert_upper, CMatrix};
use crate::weight::Weight;
use crate::{C64, Error, Result};
use std::sync::Arc;

/// Largest complex dimension with feasible quadrature.
pub const MAX_M: usize = 2;
/// Jets over at most 2 * MAX_M real chart coordinates.
pub type GeomJet = Jet<4>;

/// Ln of the Fubini-Study norm-squared of the tautological representative,
/// `ln(1 + |z|^2)` in affine coordinates; the flat Kaehler potential.
const ONE: C64 = C64::new(1.0, 0.0);

/// `CP^m` with bundle power `N` and a bounded metric-weight perturbation.
#[derive(Clone, Debug)]
pub struct ProjectiveModel {
    m: usize,
    n_power: u32,
    weight: Weight,
}

/// `binomial(n_power + m, m)`: the section-space dimension.
pub fn section_dimension(m: usize, n_power: u32) -> u64 {
    let n = n_power as u64;
    match m {
        1 => n + 1,
        2 => (n + 1) * (n + 2) / 2,
        _ => {
            let mut acc = 1u64;
            for i in 1..=m as u64 {
                acc = acc * (n + i) / i;
            }
            acc
        }
    }
}

/// Build and validate a model. The weight must parse in the chart grammar
/// and stay bounded toward the hyperplane at infinity.
pub fn make_model(m: usize, n_power: u32, weight_src: &str) -> Result<ProjectiveModel> {
    if m < 1 || m > MAX_M {
        return Err(Error::Invalid(format!(
            "dimension m = {m} unsupported; quadrature is feasible for m in 1..={MAX_M}"
        )));
    }
    if n_power < 1 {
        return Err(Error::Invalid("bundle power N must be at least 1".into()));
    }
    let weight = Weight::parse(weight_src, m)?;
    Ok(ProjectiveModel { m, n_power, weight })
}

impl ProjectiveModel {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n_power(&self) -> u32 {
        self.n_power
    }

    pub fn weight(&self) -> &Weight {
        &self.weight
    }

    pub fn is_flat(&self) -> bool {
        self.weight.is_zero()
    }

    /// Section-space dimension `binomial(N + m, m)`.
    pub fn dimension(&self) -> usize {
        section_dimension(self.m, self.n_power) as usize
    }

    /// Total symplectic volume `pi^m / m!` (the weight perturbation does not
    /// change the cohomology class, hence not the volume).
    pub fn volume(&self) -> f64 {
        let mut v = 1.0f64;
        for k in 1..=self.m {
            v *= std::f64::consts::PI / k as f64;
        }
        v
    }

    /// Kaehler potential `log a` at affine `z` for the identity chart
    /// (frame gauge not applied): `ln(1+|z|^2) + weight(z)`.
    pub fn potential_jet(&self, z: &[C64]) -> GeomJet {
        let zj: Vec<GeomJet> = z
            .iter()
            .enumerate()
            .map(|(q, &v)| GeomJet::complex_variable(2 * q, 2 * q + 1, v))
            .collect();
        let mut norm2 = GeomJet::constant_re(1.0);
        for j in &zj {
            norm2 = norm2.add(&j.norm_sqr());
        }
        let mut pot = norm2.ln();
        if !self.weight.is_zero() {
            pot = pot.add(&self.weight.eval_jet(&zj));
        }
        pot
    }

    /// Ratio of the perturbed volume density to the Fubini-Study one at `z`:
    /// `det(H_fs + d dbar weight) / det(H_fs)`. Equals 1 for flat weight.
    pub fn density_ratio(&self, z: &[C64]) -> f64 {
        if self.weight.is_zero() {
            return 1.0;
        }
        let pot = self.potential_jet(z);
        let m = self.m;
        let h = CMatrix::from_fn(m, m, |q, qp| wirtinger_dz_dzbar(&pot, q, qp));
        let det_h = match m {
            1 => h[(0, 0)].re,
            2 => (h[(0, 0)] * h[(1, 1)] - h[(0, 1)] * h[(1, 0)]).re,
            _ => unreachable!(),
        };
        let t: f64 = z.iter().map(|c| c.norm_sqr()).sum();
        det_h * (1.0 + t).powi(self.m as i32 + 1)
    }
}

/// Preferred coordinates and preferred frame at a base point, realized as an
/// exact projective unitary plus a linear coordinate map and a holomorphic
/// quadratic frame gauge.
pub struct HeisenbergChart {
    model: Arc<ProjectiveModel>,
    base_point: Vec<C64>,
    /// `U^*`: homogeneous representative of chart point `w` is
    /// `U^* (1, T w)`.
    u_adj: CMatrix,
    /// Linear coordinate normalization `T` (m x m).
    t_lin: CMatrix,
    /// Gauge `g(w) = c0 + c1 . w + w^T C2 w`; the frame is multiplied by
    /// `exp(g)`, so `log a` loses `2 Re g`.
    gauge_c0: f64,
    gauge_c1: Vec<C64>,
    gauge_c2: CMatrix,
    /// Directions `d V / d w_q = U^* (0, T e_q)`, columns of an
    /// (m+1) x m matrix.
    hom_dirs: CMatrix,
}

/// Chart at an affine base point. The projective unitary group acts
/// transitively, so this succeeds for every point of a valid model.
pub fn make_heisenberg_chart(
    model: &Arc<ProjectiveModel>,
    base_point: &[C64],
) -> Result<HeisenbergChart> {
    if base_point.len() != model.m() {
        return Err(Error::Invalid(format!(
            "base point has {} coordinates, model has m = {}",
            base_point.len(),
            model.m()
        )));
    }
    let mp1 = model.m() + 1;
    let mut h = vec![ONE];
    h.extend_from_slice(base_point);
    let norm: f64 = h.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    for c in &mut h {
        *c /= norm;
    }
    let u = unitary_with_first_row(&h.iter().map(|c| c.conj()).collect::<Vec<_>>(), mp1);
    make_chart_from_unitary_inner(model, u, base_point.to_vec())
}

/// Chart determined by an explicit projective unitary; the base point is the
/// projective image of the first standard basis vector. Used for charts
/// centered at points outside the affine chart (e.g. coordinate swaps when
/// covering the whole manifold with grids).
pub fn make_heisenberg_chart_from_unitary(
    model: &Arc<ProjectiveModel>,
    u: CMatrix,
) -> Result<HeisenbergChart> {
    if u.rows != model.m() + 1 || u.cols != model.m() + 1 {
        return Err(Error::Invalid("unitary has wrong shape".into()));
    }
    let defect = u.mul(&u.adjoint());
    for i in 0..u.rows {
        for j in 0..u.cols {
            let want = if i == j { ONE } else { C64::new(0.0, 0.0) };
            if (defect[(i, j)] - want).norm() > 1e-12 {
                return Err(Error::Invalid("matrix is not unitary".into()));
            }
        }
    }
    // Nominal base point: affine image of U^* e_0 when it lies in the chart.
    let col0: Vec<C64> = (0..u.rows).map(|i| u[(0, i)].conj()).collect();
    let base = if col0[0].norm() > 1e-12 {
        (1..u.rows).map(|i| col0[i] / col0[0]).collect()
    } else {
        vec![C64::new(f64::INFINITY, 0.0); model.m()]
    };
    make_chart_from_unitary_inner(model, u, base)
}

fn make_chart_from_unitary_inner(
    model: &Arc<ProjectiveModel>,
    u: CMatrix,
    base_point: Vec<C64>,
) -> Result<HeisenbergChart> {
    let m = model.m();
    let u_adj = u.adjoint();
    let mut chart = HeisenbergChart {
        model: model.clone(),
        base_point,
        u_adj,
        t_lin: CMatrix::identity(m),
        gauge_c0: 0.0,
        gauge_c1: vec![C64::new(0.0, 0.0); m],
        gauge_c2: CMatrix::zeros(m, m),
        hom_dirs: CMatrix::zeros(m + 1, m),
    };
    chart.refresh_dirs();
    if model.is_flat() {
        // Unitary transport preserves the Fubini-Study potential exactly:
        // a(w) = 1 + |w|^2 without any further normalization.
        return Ok(chart);
    }
    // Pass 1: metric at the origin in the recentered coordinates.
    let pot0 = chart.potential_jet(&vec![C64::new(0.0, 0.0); m]);
    let h0 = CMatrix::from_fn(m, m, |q, qp| wirtinger_dz_dzbar(&pot0, q, qp));
    let l = cholesky(&h0, 1e-12).map_err(|_| {
        Error::Numerical(
            "perturbed metric is not positive at the base point; weight amplitude too large"
                .into(),
        )
    })?;
    chart.t_lin = invert_upper(&l.adjoint());
    chart.refresh_dirs();
    // Pass 2: frame gauge killing the value, gradient, and
    // holomorphic-holomorphic Hessian of the potential at the origin.
    let pot1 = chart.potential_jet(&vec![C64::new(0.0, 0.0); m]);
    chart.gauge_c0 = 0.5 * pot1.val.re;
    for q in 0..m {
        chart.gauge_c1[q] = wirtinger_dz(&pot1, q);
    }
    chart.gauge_c2 = CMatrix::from_fn(m, m, |q, qp| 0.5 * wirtinger_dz_dz(&pot1, q, qp));
    Ok(chart)
}

/// Deterministic unitary whose first row is the given unit vector; remaining
/// rows complete it by Gram-Schmidt over the standard basis.
fn unitary_with_first_row(row0: &[C64], n: usize) -> CMatrix {
    let mut rows: Vec<Vec<C64>> = vec![row0.to_vec()];
    for k in 0..n {
        if rows.len() == n {
            break;
        }
        let mut cand = vec![C64::new(0.0, 0.0); n];
        cand[k] = ONE;
        for r in &rows {
            let proj: C64 = cand
                .iter()
                .zip(r.iter())
                .map(|(c, v)| c * v.conj())
                .sum();
            for (ci, vi) in cand.iter_mut().zip(r.iter()) {
                *ci -= proj * vi;
            }
        }
        let nrm: f64 = cand.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if nrm > 1e-8 {
            for c in &mut cand {
                *c /= nrm;
            }
            rows.push(cand);
        }
    }
    CMatrix::from_fn(n, n, |i, j| rows[i][j])
}

impl HeisenbergChart {
    pub fn model(&self) -> &Arc<ProjectiveModel> {
        &self.model
    }

    pub fn m(&self) -> usize {
        self.model.m()
    }

    pub fn base_point(&self) -> &[C64] {
        &self.base_point
    }

    fn refresh_dirs(&mut self) {
        let m = self.m();
        let mut dirs = CMatrix::zeros(m + 1, m);
        for q in 0..m {
            for i in 0..=m {
                let mut s = C64::new(0.0, 0.0);
                for k in 0..m {
                    s += self.u_adj[(i, k + 1)] * self.t_lin[(k, q)];
                }
                dirs[(i, q)] = s;
            }
        }
        self.hom_dirs = dirs;
    }

    /// Homogeneous representative `V(w) = U^* (1, T w)` of the chart point.
    pub fn hom_coords(&self, w: &[C64]) -> Vec<C64> {
        let m = self.m();
        (0..=m)
            .map(|i| {
                let mut s = self.u_adj[(i, 0)];
                for q in 0..m {
                    s += self.hom_dirs[(i, q)] * w[q];
                }
                s
            })
            .collect()
    }

    /// Constant direction vectors `dV/dw_q`.
    pub fn hom_dirs(&self) -> &CMatrix {
        &self.hom_dirs
    }

    /// Chart coordinates of a manifold point given in the global affine
    /// chart; None when the point sits on the chart's hyperplane at
    /// infinity. Inverse of the projective map `w -> [U^*(1, Tw)]`.
    pub fn chart_coords(&self, z_affine: &[C64]) -> Option<Vec<C64>> {
        let m = self.m();
        // y = U (1, z); then (1, Tw) = y / y_0
        let mut y = vec![C64::new(0.0, 0.0); m + 1];
        for (i, yi) in y.iter_mut().enumerate() {
            // U = (U^*)^H, so U_ij = conj(U^*_ji)
            *yi = self.u_adj[(0, i)].conj();
            for (j, zj) in z_affine.iter().enumerate() {
                *yi += self.u_adj[(j + 1, i)].conj() * zj;
            }
        }
        if y[0].norm() < 1e-14 {
            return None;
        }
        let tw: Vec<C64> = (1..=m).map(|i| y[i] / y[0]).collect();
        Some(crate::linalg::solve_upper(&self.t_lin, &tw))
    }

    /// Holomorphic quadratic gauge `g(w)`.
    pub fn gauge(&self, w: &[C64]) -> C64 {
        let m = self.m();
        let mut g = C64::new(self.gauge_c0, 0.0);
        for q in 0..m {
            g += self.gauge_c1[q] * w[q];
            for k in 0..m {
                g += self.gauge_c2[(q, k)] * w[q] * w[k];
            }
        }
        g
    }

    /// `d g / d w_q`.
    pub fn gauge_grad(&self, w: &[C64], q: usize) -> C64 {
        let m = self.m();
        let mut d = self.gauge_c1[q];
        for k in 0..m {
            d += (self.gauge_c2[(q, k)] + self.gauge_c2[(k, q)]) * w[k];
        }
        d
    }

    /// `d^2 g / d w_q d w_k` (constant).
    pub fn gauge_hess(&self, q: usize, k: usize) -> C64 {
        self.gauge_c2[(q, k)] + self.gauge_c2[(k, q)]
    }

    /// Full second-order jet of the chart potential `log a` at `w`.
    pub fn potential_jet(&self, w: &[C64]) -> GeomJet {
        let m = self.m();
        let wj: Vec<GeomJet> = (0..m)
            .map(|q| GeomJet::complex_variable(2 * q, 2 * q + 1, w[q]))
            .collect();
        // V = U^*(1, Tw) as jets.
        let v: Vec<GeomJet> = (0..=m)
            .map(|i| {
                let mut s = GeomJet::constant(self.u_adj[(i, 0)]);
                for q in 0..m {
                    s = s.add(&wj[q].scale(self.hom_dirs[(i, q)]));
                }
                s
            })
            .collect();
        let mut norm2 = GeomJet::constant_re(0.0);
        for vi in &v {
            norm2 = norm2.add(&vi.norm_sqr());
        }
        let mut pot = norm2.ln();
        if !self.model.is_flat() {
            let z: Vec<GeomJet> = (1..=m).map(|j| v[j].div(&v[0])).collect();
            pot = pot.add(&self.model.weight().eval_jet(&z));
        }
        // subtract 2 Re g
        let mut g = GeomJet::constant_re(self.gauge_c0 * 2.0);
        for q in 0..m {
            let lin = wj[q].scale(self.gauge_c1[q]);
            g = g.add(&lin).add(&lin.conj());
            for k in 0..m {
                let quad = wj[q].mul(&wj[k]).scale(self.gauge_c2[(q, k)]);
                g = g.add(&quad).add(&quad.conj());
            }
        }
        pot.sub(&g)
    }

    /// Frame weight `a(w) = |e_L^*(w)|^2`.
    pub fn frame_weight(&self, w: &[C64]) -> f64 {
        self.potential_jet(w).val.re.exp()
    }

    /// Wirtinger gradient `d_q log a` for q = 0..m.
    pub fn log_a_grad(&self, w: &[C64]) -> Vec<C64> {
        let jet = self.potential_jet(w);
        (0..self.m()).map(|q| wirtinger_dz(&jet, q)).collect()
    }

    /// Connection coefficients `A_q(w) = -(i/2) d_q log a`, so that the
    /// contact form is `dtheta + sum_q (A_q dw_q + conj(A_q) dwbar_q)`.
    pub fn connection(&self, w: &[C64]) -> Vec<C64> {
        self.log_a_grad(w)
            .into_iter()
            .map(|d| C64::new(0.0, -0.5) * d)
            .collect()
    }

    /// Mixed potential Hessian `H_{q qbar'} = d^2 log a / dw_q dwbar_q'`,
    /// the Kaehler metric coefficient matrix in chart coordinates.
    pub fn metric_hessian(&self, w: &[C64]) -> CMatrix {
        let jet = self.potential_jet(w);
        CMatrix::from_fn(self.m(), self.m(), |q, qp| wirtinger_dz_dzbar(&jet, q, qp))
    }
}

/// Quadrature nodes and weights with respect to the Fubini-Study volume
/// `dV_FS`; the level-N metric weight and any perturbation density stay in
/// the integrand.
pub struct QuadratureGrid {
    pub m: usize,
    pub nodes: Vec<Vec<C64>>,
    pub weights: Vec<f64>,
    pub bound: u32,
}

/// Node budget guard (total grid points).
const NODE_CAP: usize = 8_000_000;

/// Build a grid whose declared exactness `bound` covers all monomial pairs
/// arising in level-N Gram matrices (`bound >= 2N + 4`). Both grid
/// invariants are validated before returning: total weight equals the model
/// volume, and the closed-form Beta values are matched to 1e-9.
pub fn build_quadrature(model: &ProjectiveModel, bound: u32) -> Result<QuadratureGrid> {
    if bound < 2 * model.n_power() + 4 {
        return Err(Error::Invalid(format!(
            "exactness bound {bound} below 2N + 4 = {}",
            2 * model.n_power() + 4
        )));
    }
    let harmonic = model.weight().harmonic_degree();
    let n_s = (bound as usize) / 2 + 16;
    let mut n_ang = bound as usize + 2;
    if harmonic > 0 {
        // exp(-N * weight) spreads angular harmonics; double the rule and
        // let the empirical validation below have the final word.
        n_ang = 2 * bound as usize + 16;
    }
    let grid = match model.m() {
        1 => {
            if n_s * n_ang > NODE_CAP {
                return Err(Error::ResourceCap(format!(
                    "quadrature would need {} nodes (cap {NODE_CAP})",
                    n_s * n_ang
                )));
            }
            let (s_nodes, s_w) = gauss_legendre_01(n_s);
            let mut nodes = Vec::with_capacity(n_s * n_ang);
            let mut weights = Vec::with_capacity(n_s * n_ang);
            for (s, ws) in s_nodes.iter().zip(&s_w) {
                let r = (s / (1.0 - s)).sqrt();
                let w_total = 0.5 * ws * (2.0 * std::f64::consts::PI / n_ang as f64);
                for a in 0..n_ang {
                    let ang = 2.0 * std::f64::consts::PI * a as f64 / n_ang as f64;
                    nodes.push(vec![C64::from_polar(r, ang)]);
                    weights.push(w_total);
                }
            }
            QuadratureGrid { m: 1, nodes, weights, bound }
        }
        2 => {
            let n_tau = (bound as usize) / 2 + 8;
            let total = n_s * n_tau * n_ang * n_ang;
            if total > NODE_CAP {
                return Err(Error::ResourceCap(format!(
                    "quadrature would need {total} nodes (cap {NODE_CAP})"
                )));
            }
            let (s_nodes, s_w) = gauss_legendre_01(n_s);
            let (t_nodes, t_w) = gauss_legendre_01(n_tau);
            let dang = 2.0 * std::f64::consts::PI / n_ang as f64;
            let mut nodes = Vec::with_capacity(total);
            let mut weights = Vec::with_capacity(total);
            for (s, ws) in s_nodes.iter().zip(&s_w) {
                let sigma = s / (1.0 - s);
                for (tau, wt) in t_nodes.iter().zip(&t_w) {
                    let r1 = (sigma * tau).sqrt();
                    let r2 = (sigma * (1.0 - tau)).sqrt();
                    let w_total = 0.25 * s * ws * wt * dang * dang;
                    for a1 in 0..n_ang {
                        let ang1 = dang * a1 as f64;
                        for a2 in 0..n_ang {
                            let ang2 = dang * a2 as f64;
                            nodes.push(vec![
                                C64::from_polar(r1, ang1),
                                C64::from_polar(r2, ang2),
                            ]);
                            weights.push(w_total);
                        }
                    }
                }
            }
            QuadratureGrid { m: 2, nodes, weights, bound }
        }
        _ => unreachable!(),
    };
    grid.validate(model)?;
    Ok(grid)
}

impl QuadratureGrid {
    /// Integrate a function given on affine coordinates against `dV_FS`.
    pub fn integrate(&self, f: impl Fn(&[C64]) -> f64 + Sync) -> f64 {
        use rayon::prelude::*;
        self.nodes
            .par_iter()
            .zip(self.weights.par_iter())
            .map(|(z, w)| w * f(z))
            .sum()
    }

    /// Closed-form norm of the affine monomial `z^alpha` at level N on the
    /// flat model: `pi^m alpha! (N - |alpha|)! / (N + m)!`.
    pub fn beta_norm(m: usize, n_power: u32, alpha: &[u32]) -> f64 {
        let total: u32 = alpha.iter().sum();
        assert!(total <= n_power);
        let mut ln = (m as f64) * std::f64::consts::PI.ln();
        for &a in alpha {
            ln += ln_factorial(a as u64);
        }
        ln += ln_factorial((n_power - total) as u64);
        ln -= ln_factorial((n_power + m as u32) as u64);
        ln.exp()
    }

    fn validate(&self, model: &ProjectiveModel) -> Result<()> {
        let vol = model.volume();
        let total: f64 = self.weights.iter().sum();
        if ((total - vol) / vol).abs() > 1e-10 {
            return Err(Error::Numerical(format!(
                "grid volume {total:.15e} deviates from {vol:.15e}"
            )));
        }
        let n = model.n_power();
        let check = |alpha: &[u32]| -> Result<()> {
            let expected = Self::beta_norm(model.m(), n, alpha);
            let got = self.integrate(|z| {
                let t: f64 = z.iter().map(|c| c.norm_sqr()).sum();
                let mono: f64 = z
                    .iter()
                    .zip(alpha.iter())
                    .map(|(c, &a)| c.norm_sqr().powi(a as i32))
                    .product();
                mono * (1.0 + t).powi(-(n as i32))
            });
            if ((got - expected) / expected).abs() > 1e-9 {
                return Err(Error::Numerical(format!(
                    "grid misses Beta value for alpha = {alpha:?}: {got:.12e} vs {expected:.12e}"
                )));
            }
            Ok(())
        };
        match model.m() {
            1 => {
                for k in 0..=n {
                    check(&[k])?;
                }
            }
            2 => {
                // All pairs would be O(N^2) integrals; probe the axes, the
                // diagonal, and the extreme corners.
                let mut alphas: Vec<[u32; 2]> = Vec::new();
                for k in 0..=n.min(6) {
                    alphas.push([k, 0]);
                    alphas.push([0, k]);
                    if 2 * k <= n {
                        alphas.push([k, k]);
                    }
                }
                alphas.push([n, 0]);
                alphas.push([0, n]);
                alphas.push([n / 2, n - n / 2]);
                for a in alphas {
                    check(&a)?;
                }
            }
            _ => unreachable!(),
        }
        // Angular orthogonality spot check: distinct monomials integrate to
        // zero against the level-N density.
        if n >= 1 {
            let got = self.integrate(|z| {
                let t: f64 = z.iter().map(|c| c.norm_sqr()).sum();
                (z[0] * (1.0 + t).powi(-(n as i32))).re
            });
            if got.abs() > 1e-10 {
                return Err(Error::Numerical(format!(
                    "angular rule fails cross-frequency cancellation: {got:.3e}"
                )));
            }
        }
        Ok(())
    }
}

/// `ln(k!)` without overflow.
pub fn ln_factorial(k: u64) -> f64 {
    crate::measure_lab::ln_gamma(k as f64 + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(m: usize, n: u32) -> Arc<ProjectiveModel> {
        Arc::new(make_model(m, n, "0").unwrap())
    }

    #[test]
    fn model_validation() {
        assert!(make_model(1, 3, "0").is_ok());
        assert!(make_model(0, 3, "0").is_err());
        assert!(make_model(3, 3, "0").is_err());
        assert!(make_model(1, 0, "0").is_err());
        assert!(make_model(1, 2, "r2").is_err(), "unbounded weight");
        assert!(make_model(1, 2, "0.1 * r2 / (1 + r2)").is_ok());
    }

    #[test]
    fn volume_normalization() {
        assert!((flat(1, 3).volume() - std::f64::consts::PI).abs() < 1e-15);
        let pi = std::f64::consts::PI;
        assert!((flat(2, 1).volume() - pi * pi / 2.0).abs() < 1e-15);
    }

    #[test]
    fn dimension_counts() {
        assert_eq!(flat(1, 3).dimension(), 4);
        assert_eq!(flat(2, 1).dimension(), 3);
        assert_eq!(section_dimension(2, 128), 8385);
        // ratio d_N m! / N^m decreasing toward 1 for m = 1
        let mut prev = f64::INFINITY;
        for n in [8u32, 16, 32, 64, 128] {
            let ratio = section_dimension(1, n) as f64 / n as f64;
            assert!(ratio < prev && ratio > 1.0);
            prev = ratio;
        }
    }

    #[test]
    fn flat_chart_is_exact_fs() {
        let model = flat(1, 4);
        let chart = make_heisenberg_chart(&model, &[C64::new(0.0, 0.0)]).unwrap();
        for &z in &[C64::new(0.3, -0.2), C64::new(1.5, 0.7)] {
            let a = chart.frame_weight(&[z]);
            assert!((a - (1.0 + z.norm_sqr())).abs() < 1e-14);
            // A(z) = -(i/2) zbar / (1 + |z|^2) for the flat model
            let a1 = chart.connection(&[z])[0];
            let expect = C64::new(0.0, -0.5) * z.conj() / (1.0 + z.norm_sqr());
            assert!((a1 - expect).norm() < 1e-14);
        }
    }

    fn check_chart_normalization(chart: &HeisenbergChart) {
        let m = chart.m();
        let zero = vec![C64::new(0.0, 0.0); m];
        let jet = chart.potential_jet(&zero);
        // log a(0) = 0 and a(0) = 1
        assert!(jet.val.norm() < 1e-12, "a(0) = {}", jet.val.exp());
        // da = 0
        for q in 0..m {
            assert!(wirtinger_dz(&jet, q).norm() < 1e-10);
        }
        // Because a(0)=1 and da=0, the Hessian of a equals the Hessian of
        // log a: mixed block identity, holomorphic block zero.
        for q in 0..m {
            for qp in 0..m {
                let mixed = wirtinger_dz_dzbar(&jet, q, qp);
                let want = if q == qp { 1.0 } else { 0.0 };
                assert!((mixed - C64::new(want, 0.0)).norm() < 1e-8, "mixed {mixed}");
                assert!(wirtinger_dz_dz(&jet, q, qp).norm() < 1e-8);
            }
        }
        // connection 1-jet: A_q(w) + (i/2) wbar_q = O(|w|^2)
        let h = 1e-4;
        for q in 0..m {
            let mut w = zero.clone();
            w[q] = C64::new(h, 0.5 * h);
            let a_q = chart.connection(&w)[q];
            let lead = C64::new(0.0, -0.5) * w[q].conj();
            assert!((a_q - lead).norm() < 10.0 * h * h, "{:e}", (a_q - lead).norm());
        }
    }

    #[test]
    fn chart_normalization_flat_various_points() {
        let model = flat(1, 5);
        for p in [[C64::new(0.0, 0.0)], [C64::new(0.8, -0.4)], [C64::new(-2.0, 1.0)]] {
            let chart = make_heisenberg_chart(&model, &p).unwrap();
            check_chart_normalization(&chart);
        }
        let model2 = flat(2, 3);
        let chart2 =
            make_heisenberg_chart(&model2, &[C64::new(0.4, 0.1), C64::new(-0.3, 0.6)]).unwrap();
        check_chart_normalization(&chart2);
    }

    #[test]
    fn chart_normalization_perturbed() {
        let model =
            Arc::new(make_model(1, 4, "0.1 * r2 / (1 + r2) + 0.03 * re1 / (1 + r2)").unwrap());
        for p in [[C64::new(0.0, 0.0)], [C64::new(0.5, 0.3)]] {
            let chart = make_heisenberg_chart(&model, &p).unwrap();
            check_chart_normalization(&chart);
        }
        let model2 = Arc::new(make_model(2, 2, "0.05 * r2 / (1 + r2)").unwrap());
        let chart2 =
            make_heisenberg_chart(&model2, &[C64::new(0.2, -0.1), C64::new(0.1, 0.4)]).unwrap();
        check_chart_normalization(&chart2);
    }

    #[test]
    fn swap_chart_unitary() {
        let model = flat(1, 3);
        let mut u = CMatrix::zeros(2, 2);
        u[(0, 1)] = ONE;
        u[(1, 0)] = ONE;
        let chart = make_heisenberg_chart_from_unitary(&model, u).unwrap();
        check_chart_normalization(&chart);
    }

    #[test]
    fn quadrature_beta_table() {
        let model = flat(1, 4);
        let grid = build_quadrature(&model, 12).unwrap();
        // pi k!(N-k)!/(N+1)! for N=4
        for (k, expect) in [(0u32, 24.0 / 120.0), (1, 6.0 / 120.0), (2, 4.0 / 120.0)] {
            let want = std::f64::consts::PI * expect;
            let got = grid.integrate(|z| {
                let t = z[0].norm_sqr();
                t.powi(k as i32) * (1.0 + t).powi(-4)
            });
            assert!(((got - want) / want).abs() < 1e-10, "k={k}: {got} vs {want}");
        }
    }

    #[test]
    fn quadrature_volume_and_constant() {
        // N = 1 grid integrating the constant against pure dV_FS gives pi.
        let model = flat(1, 1);
        let grid = build_quadrature(&model, 6).unwrap();
        let total: f64 = grid.weights.iter().sum();
        assert!((total - std::f64::consts::PI).abs() < 1e-12);
        let model2 = flat(2, 1);
        let grid2 = build_quadrature(&model2, 6).unwrap();
        let total2: f64 = grid2.weights.iter().sum();
        let want = std::f64::consts::PI.powi(2) / 2.0;
        assert!(((total2 - want) / want).abs() < 1e-12);
    }

    #[test]
    fn quadrature_rejects_low_bound() {
        let model = flat(1, 4);
        assert!(build_quadrature(&model, 8).is_err());
    }

    #[test]
    fn density_ratio_flat_is_one() {
        let model = flat(1, 2);
        assert_eq!(model.density_ratio(&[C64::new(0.4, 0.2)]), 1.0);
        let pert = Arc::new(make_model(1, 2, "0.1 * r2 / (1 + r2)").unwrap());
        // ratio = 1 + eps (1-t)/(1+t) for this weight (hand derivative)
        let z = C64::new(0.5, 0.0);
        let t = z.norm_sqr();
        let want = 1.0 + 0.1 * (1.0 - t) / (1.0 + t);
        assert!((pert.density_ratio(&[z]) - want).abs() < 1e-12);
    }
}
