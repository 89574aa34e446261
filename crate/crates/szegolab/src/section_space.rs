//! Orthonormal bases of `H^0(CP^m, O(N))` and their evaluation as
//! equivariant functions on the circle bundle.
//!
//! Sections are stored as homogeneous degree-N polynomials in the m+1
//! homogeneous coordinates, which makes the exact projective-unitary chart
//! transport a matter of evaluating the same polynomial at a rotated
//! argument. For the flat weight the monomials are orthogonal with the
//! closed-form norms `pi^m gamma! / (N+m)!`, so the basis is diagonal;
//! otherwise the Gram matrix is assembled by quadrature and factored by
//! Cholesky (a deterministic triangular orthonormalization).
//!
//! Evaluation works on the *normalized* homogeneous representative, so a
//! section value is `P(V/|V|)` times a bounded weight-and-phase prefactor;
//! nothing here overflows even at high powers or near the chart boundary.
//! Horizontal derivatives are assembled analytically from polynomial
//! derivatives, the chart gauge, and the connection coefficients; finite
//! differences appear only in tests as an independent oracle.

use crate::autodiff::wirtinger_dz_dz;
use crate::linalg::{cholesky, invert_upper, CMatrix};
use crate::model_geometry::{build_quadrature, HeisenbergChart, ProjectiveModel, QuadratureGrid};
use crate::{C64, Error, Result};
use rayon::prelude::*;
use std::sync::Arc;

/// Documented cap on the section-space dimension for basis construction.
pub const DIMENSION_CAP: usize = 2000;

const ZERO: C64 = C64::new(0.0, 0.0);

enum BasisCoeff {
    /// Orthogonal monomials: `S_j = diag_j * monomial_j`.
    Diagonal(Vec<f64>),
    /// `S_j = sum_{k <= j} upper[(k, j)] * monomial_k`.
    Upper(CMatrix),
}

/// Orthonormal basis of the level-N section space as a coefficient matrix
/// over homogeneous monomials.
pub struct SectionBasis {
    model: Arc<ProjectiveModel>,
    dim: usize,
    /// Homogeneous multi-indices, each of length m+1 summing to N.
    exponents: Vec<Vec<u32>>,
    coeff: BasisCoeff,
    /// Exact monomial norms (squared) for the flat weight.
    mono_norms_sq: Option<Vec<f64>>,
}

/// Values and first horizontal derivatives of every basis section at one
/// lift point.
pub struct FrameEval {
    pub values: Vec<C64>,
    /// `d^h S_j / d w_q`, indexed `[q][j]`.
    pub d_holo: Vec<Vec<C64>>,
    /// `d^h S_j / d wbar_q`, indexed `[q][j]`; identically zero on these
    /// integrable models up to roundoff of the connection cancellation.
    pub d_anti: Vec<Vec<C64>>,
}

/// FrameEval plus the holomorphic second horizontal derivatives.
pub struct FrameEval2 {
    pub first: FrameEval,
    /// `d^h_q d^h_{q'} S_j`, indexed `[q][q'][j]`; symmetric in (q, q').
    pub h2: Vec<Vec<Vec<C64>>>,
}

/// Value and unscaled horizontal derivatives of one section at one point.
pub struct PointJet {
    pub value: C64,
    pub d_holo: Vec<C64>,
    pub d_anti: Vec<C64>,
}

/// Flattened jet of one section over a point configuration: the values
/// `x^p = s(z^p)` followed by the scaled derivatives
/// `xi^p_q = N^{-1/2} d^h s(z^p)`, holomorphic components first. Total
/// length `n (2m + 1)`.
pub struct JetVector {
    pub n_points: usize,
    pub m: usize,
    pub data: Vec<C64>,
}

impl JetVector {
    /// Sample the jet of the section with orthonormal coefficients `c`.
    pub fn from_section(
        basis: &SectionBasis,
        chart: &HeisenbergChart,
        c: &[C64],
        points: &[Vec<C64>],
    ) -> JetVector {
        let m = basis.model().m();
        let n_points = points.len();
        let scale = 1.0 / (basis.model().n_power() as f64).sqrt();
        let mut data = vec![ZERO; jet_length(n_points, m)];
        for (p, z) in points.iter().enumerate() {
            let jet = basis.horizontal_jet(chart, c, z, 0.0);
            data[jet_value_index(p)] = jet.value;
            for q in 0..m {
                data[jet_deriv_index(n_points, m, p, q)] = scale * jet.d_holo[q];
                data[jet_deriv_index(n_points, m, p, m + q)] = scale * jet.d_anti[q];
            }
        }
        JetVector { n_points, m, data }
    }

    pub fn value(&self, p: usize) -> C64 {
        self.data[jet_value_index(p)]
    }

    pub fn xi(&self, p: usize, q: usize) -> C64 {
        self.data[jet_deriv_index(self.n_points, self.m, p, q)]
    }

    /// Largest anti-holomorphic component modulus; identically zero (to
    /// roundoff) for sections of these integrable models.
    pub fn anti_holo_max(&self) -> f64 {
        let mut worst = 0.0f64;
        for p in 0..self.n_points {
            for q in self.m..2 * self.m {
                worst = worst.max(self.xi(p, q).norm());
            }
        }
        worst
    }
}

/// Length of the jet vector for `n` points in dimension `m`.
pub fn jet_length(n_points: usize, m: usize) -> usize {
    n_points * (2 * m + 1)
}

/// Index of the value component `x^p`.
pub fn jet_value_index(p: usize) -> usize {
    p
}

/// Index of the scaled-derivative component `xi^p_q`; `q` in `0..2m` with
/// holomorphic directions first.
pub fn jet_deriv_index(n_points: usize, m: usize, p: usize, q: usize) -> usize {
    n_points + p * 2 * m + q
}

/// Enumerate homogeneous exponents of degree `n` in `m + 1` variables, in a
/// fixed (lexicographic in the affine part) order.
pub fn homogeneous_exponents(m: usize, n: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    match m {
        1 => {
            for k in 0..=n {
                out.push(vec![n - k, k]);
            }
        }
        2 => {
            for a in 0..=n {
                for b in 0..=(n - a) {
                    out.push(vec![n - a - b, a, b]);
                }
            }
        }
        _ => unreachable!("m capped at 2"),
    }
    out
}

/// Build the orthonormal basis; exact norms for the flat weight, quadrature
/// Gram plus triangular factorization otherwise.
pub fn build_basis(model: &Arc<ProjectiveModel>) -> Result<SectionBasis> {
    let dim = model.dimension();
    if dim > DIMENSION_CAP {
        return Err(Error::ResourceCap(format!(
            "section space dimension {dim} exceeds the supported cap {DIMENSION_CAP}"
        )));
    }
    let exponents = homogeneous_exponents(model.m(), model.n_power());
    assert_eq!(exponents.len(), dim);
    if model.is_flat() {
        let norms: Vec<f64> = exponents
            .iter()
            .map(|g| {
                let alpha: Vec<u32> = g[1..].to_vec();
                QuadratureGrid::beta_norm(model.m(), model.n_power(), &alpha)
            })
            .collect();
        let diag = norms.iter().map(|n| 1.0 / n.sqrt()).collect();
        return Ok(SectionBasis {
            model: model.clone(),
            dim,
            exponents,
            coeff: BasisCoeff::Diagonal(diag),
            mono_norms_sq: Some(norms),
        });
    }
    let grid = build_quadrature(model, 2 * model.n_power() + 4)?;
    // Gram over flat-normalized monomials; rescaling by its own diagonal
    // gives a correlation matrix, so the factorization stays conditioned
    // even though raw monomial norms span many orders of magnitude.
    let flat_norms: Vec<f64> = exponents
        .iter()
        .map(|g| QuadratureGrid::beta_norm(model.m(), model.n_power(), &g[1..]).sqrt())
        .collect();
    let gram = monomial_gram(model, &exponents, &grid);
    let diag_scale: Vec<f64> = (0..dim).map(|j| 1.0 / gram[(j, j)].re.sqrt()).collect();
    let corr = CMatrix::from_fn(dim, dim, |j, k| gram[(j, k)] * diag_scale[j] * diag_scale[k]);
    let l = cholesky(&corr, 1e-12).map_err(|e| {
        Error::Numerical(format!(
            "Gram matrix not positive definite ({e}); quadrature under-resolved or weight too strong"
        ))
    })?;
    let upper = invert_upper(&l.adjoint());
    // fold both normalizations back: S_j = sum_k upper[k][j] * d_k / |m_k|
    // times the raw monomial m_k
    let coeff = CMatrix::from_fn(dim, dim, |k, j| {
        upper[(k, j)] * diag_scale[k] / flat_norms[k]
    });
    Ok(SectionBasis {
        model: model.clone(),
        dim,
        exponents,
        coeff: BasisCoeff::Upper(coeff),
        mono_norms_sq: None,
    })
}

/// Gram matrix of the flat-normalized homogeneous monomials under the
/// level-N inner product, by quadrature. Deterministic: per-chunk partial
/// matrices are reduced in fixed chunk order.
pub fn monomial_gram(
    model: &ProjectiveModel,
    exponents: &[Vec<u32>],
    grid: &QuadratureGrid,
) -> CMatrix {
    let dim = exponents.len();
    let n = model.n_power();
    let inv_norms: Vec<f64> = exponents
        .iter()
        .map(|g| 1.0 / QuadratureGrid::beta_norm(model.m(), n, &g[1..]).sqrt())
        .collect();
    let chunk = 2048usize;
    let n_chunks = grid.nodes.len().div_ceil(chunk);
    let partials: Vec<CMatrix> = (0..n_chunks)
        .into_par_iter()
        .map(|ci| {
            let lo = ci * chunk;
            let hi = (lo + chunk).min(grid.nodes.len());
            let mut g = CMatrix::zeros(dim, dim);
            let mut mono = vec![ZERO; dim];
            for idx in lo..hi {
                let z = &grid.nodes[idx];
                let w = grid.weights[idx];
                let t: f64 = z.iter().map(|c| c.norm_sqr()).sum();
                let scale = 1.0 / (1.0 + t).sqrt();
                let mut zeta = vec![C64::new(scale, 0.0)];
                zeta.extend(z.iter().map(|c| c * scale));
                evaluate_monomials(exponents, &zeta, n, &mut mono);
                for (m, s) in mono.iter_mut().zip(inv_norms.iter()) {
                    *m *= s;
                }
                let phi = model.weight().eval(z);
                let density = w
                    * model.density_ratio(z)
                    * (-(n as f64) * phi).exp();
                for j in 0..dim {
                    let mj = mono[j] * density;
                    for k in 0..=j {
                        g[(j, k)] += mj * mono[k].conj();
                    }
                }
            }
            g
        })
        .collect();
    let mut gram = CMatrix::zeros(dim, dim);
    for p in partials {
        for j in 0..dim {
            for k in 0..=j {
                gram[(j, k)] += p[(j, k)];
            }
        }
    }
    for j in 0..dim {
        for k in j + 1..dim {
            gram[(j, k)] = gram[(k, j)].conj();
        }
    }
    gram
}

fn evaluate_monomials(exponents: &[Vec<u32>], v: &[C64], n: u32, out: &mut [C64]) {
    let tables: Vec<Vec<C64>> = v.iter().map(|&c| power_table(c, n)).collect();
    for (k, g) in exponents.iter().enumerate() {
        let mut p = C64::new(1.0, 0.0);
        for (i, &e) in g.iter().enumerate() {
            p *= tables[i][e as usize];
        }
        out[k] = p;
    }
}

fn power_table(v: C64, max: u32) -> Vec<C64> {
    let mut t = Vec::with_capacity(max as usize + 1);
    t.push(C64::new(1.0, 0.0));
    for k in 1..=max as usize {
        let prev = t[k - 1];
        t.push(prev * v);
    }
    t
}

/// Per-point data shared by value and derivative evaluation.
struct PointCtx {
    /// Normalized homogeneous representative.
    vhat: Vec<C64>,
    /// |V|.
    nv: f64,
    /// Bounded prefactor: weight, gauge phase, fiber phase.
    pref: C64,
    /// `d_q (gauge + log a)` at the point.
    l_grad: Vec<C64>,
    /// `dbar_q log a` at the point.
    dbar_log_a: Vec<C64>,
    /// connection coefficients `A_q`.
    conn: Vec<C64>,
}

impl SectionBasis {
    pub fn model(&self) -> &Arc<ProjectiveModel> {
        &self.model
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn exponents(&self) -> &[Vec<u32>] {
        &self.exponents
    }

    /// Exact monomial norms squared (flat weight only).
    pub fn mono_norms_sq(&self) -> Option<&[f64]> {
        self.mono_norms_sq.as_deref()
    }

    fn point_ctx(&self, chart: &HeisenbergChart, w: &[C64], theta: f64) -> PointCtx {
        let m = self.model.m();
        let n = self.model.n_power() as f64;
        let v = chart.hom_coords(w);
        let nv = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let vhat: Vec<C64> = v.iter().map(|c| c / nv).collect();
        let gauge = chart.gauge(w);
        let mut phase = n * (theta - gauge.im);
        let mut amp = 1.0f64;
        if !self.model.is_flat() {
            let z: Vec<C64> = (1..=m).map(|j| v[j] / v[0]).collect();
            amp = (-(0.5 * n) * self.model.weight().eval(&z)).exp();
        }
        // wrap the phase to keep exp well-conditioned at large N * theta
        phase = phase.rem_euclid(2.0 * std::f64::consts::PI);
        let pref = C64::from_polar(amp, phase);
        let jet = chart.potential_jet(w);
        let mut l_grad = Vec::with_capacity(m);
        let mut dbar = Vec::with_capacity(m);
        let mut conn = Vec::with_capacity(m);
        for q in 0..m {
            let d = crate::autodiff::wirtinger_dz(&jet, q);
            l_grad.push(chart.gauge_grad(w, q) + d);
            dbar.push(d.conj());
            conn.push(C64::new(0.0, -0.5) * d);
        }
        PointCtx { vhat, nv, pref, l_grad, dbar_log_a: dbar, conn }
    }

    fn apply_coeff(&self, mono: &[C64], out: &mut [C64]) {
        match &self.coeff {
            BasisCoeff::Diagonal(d) => {
                for j in 0..self.dim {
                    out[j] = mono[j] * d[j];
                }
            }
            BasisCoeff::Upper(u) => {
                for j in 0..self.dim {
                    let mut s = ZERO;
                    for k in 0..=j {
                        s += u[(k, j)] * mono[k];
                    }
                    out[j] = s;
                }
            }
        }
    }

    /// All basis section values at the lift point `(w, theta)` of a chart.
    pub fn frame_values(&self, chart: &HeisenbergChart, w: &[C64], theta: f64) -> Vec<C64> {
        let ctx = self.point_ctx(chart, w, theta);
        let n = self.model.n_power();
        let mut mono = vec![ZERO; self.dim];
        evaluate_monomials(&self.exponents, &ctx.vhat, n, &mut mono);
        let mut out = vec![ZERO; self.dim];
        self.apply_coeff(&mono, &mut out);
        for v in &mut out {
            *v *= ctx.pref;
        }
        out
    }

    /// Values plus first horizontal derivatives of every basis section.
    pub fn frame_jet(&self, chart: &HeisenbergChart, w: &[C64], theta: f64) -> FrameEval {
        let m = self.model.m();
        let n = self.model.n_power();
        let nf = n as f64;
        let ctx = self.point_ctx(chart, w, theta);
        let tables: Vec<Vec<C64>> = ctx.vhat.iter().map(|&c| power_table(c, n)).collect();
        let dirs = chart.hom_dirs();

        let mut mono = vec![ZERO; self.dim];
        let mut dir_mono: Vec<Vec<C64>> = vec![vec![ZERO; self.dim]; m];
        for (k, g) in self.exponents.iter().enumerate() {
            let mut p = C64::new(1.0, 0.0);
            for (i, &e) in g.iter().enumerate() {
                p *= tables[i][e as usize];
            }
            mono[k] = p;
            // directional derivatives <dP, W_q> / nv on the normalized point
            for q in 0..m {
                let mut s = ZERO;
                for (i, &e) in g.iter().enumerate() {
                    if e == 0 {
                        continue;
                    }
                    let mut dp = C64::new(e as f64, 0.0) * tables[i][e as usize - 1];
                    for (i2, &e2) in g.iter().enumerate() {
                        if i2 != i {
                            dp *= tables[i2][e2 as usize];
                        }
                    }
                    s += dirs[(i, q)] * dp;
                }
                dir_mono[q][k] = s / ctx.nv;
            }
        }

        let mut values = vec![ZERO; self.dim];
        self.apply_coeff(&mono, &mut values);
        let mut d_holo = Vec::with_capacity(m);
        let mut d_anti = Vec::with_capacity(m);
        for q in 0..m {
            let mut dq = vec![ZERO; self.dim];
            self.apply_coeff(&dir_mono[q], &mut dq);
            let mut anti = vec![ZERO; self.dim];
            // dbar^h = dbar f - (N/2)(dbar log a) f - i N conj(A) f;
            // the polynomial part is holomorphic, the rest cancels.
            let anti_coef = C64::new(-0.5 * nf, 0.0) * ctx.dbar_log_a[q]
                - C64::i() * nf * ctx.conn[q].conj();
            for j in 0..self.dim {
                dq[j] = (dq[j] - nf * ctx.l_grad[q] * values[j]) * ctx.pref;
                anti[j] = anti_coef * values[j] * ctx.pref;
            }
            d_holo.push(dq);
            d_anti.push(anti);
        }
        for v in &mut values {
            *v *= ctx.pref;
        }
        FrameEval { values, d_holo, d_anti }
    }

    /// First and second holomorphic horizontal derivatives.
    pub fn frame_jet2(&self, chart: &HeisenbergChart, w: &[C64], theta: f64) -> FrameEval2 {
        let m = self.model.m();
        let n = self.model.n_power();
        let nf = n as f64;
        let ctx = self.point_ctx(chart, w, theta);
        let first = self.frame_jet(chart, w, theta);
        let tables: Vec<Vec<C64>> = ctx.vhat.iter().map(|&c| power_table(c, n)).collect();
        let dirs = chart.hom_dirs();
        let jet = chart.potential_jet(w);

        // M_{q q'} = d^2 (gauge + log a) / dw_q dw_q'
        let mut m2 = vec![vec![ZERO; m]; m];
        for q in 0..m {
            for qp in 0..m {
                m2[q][qp] = chart.gauge_hess(q, qp) + wirtinger_dz_dz(&jet, q, qp);
            }
        }

        // second directional monomial derivatives <d2P W_q, W_q'> / nv^2
        let mut dir2 = vec![vec![vec![ZERO; self.dim]; m]; m];
        for (k, g) in self.exponents.iter().enumerate() {
            for q in 0..m {
                for qp in q..m {
                    let mut s = ZERO;
                    for (i, &e) in g.iter().enumerate() {
                        if e == 0 {
                            continue;
                        }
                        for (i2, &e2) in g.iter().enumerate() {
                            let coef = if i == i2 {
                                if e < 2 {
                                    continue;
                                }
                                (e * (e - 1)) as f64
                            } else {
                                if e2 == 0 {
                                    continue;
                                }
                                (e * e2) as f64
                            };
                            let mut dp = C64::new(coef, 0.0);
                            for (i3, &e3) in g.iter().enumerate() {
                                let mut ee = e3 as usize;
                                if i3 == i {
                                    ee -= 1;
                                }
                                if i3 == i2 {
                                    ee -= 1;
                                }
                                dp *= tables[i3][ee];
                            }
                            s += dirs[(i, q)] * dirs[(i2, qp)] * dp;
                        }
                    }
                    let val = s / (ctx.nv * ctx.nv);
                    dir2[q][qp][k] = val;
                    dir2[qp][q][k] = val;
                }
            }
        }

        // raw values / first directional derivatives without prefactor
        let mut p_raw = vec![ZERO; self.dim];
        let mut mono = vec![ZERO; self.dim];
        evaluate_monomials(&self.exponents, &ctx.vhat, n, &mut mono);
        self.apply_coeff(&mono, &mut p_raw);
        let mut pq_raw: Vec<Vec<C64>> = Vec::with_capacity(m);
        for q in 0..m {
            let mut dq = vec![ZERO; self.dim];
            // recompute directional first derivatives in monomial basis
            for (k, g) in self.exponents.iter().enumerate() {
                let mut s = ZERO;
                for (i, &e) in g.iter().enumerate() {
                    if e == 0 {
                        continue;
                    }
                    let mut dp = C64::new(e as f64, 0.0) * tables[i][e as usize - 1];
                    for (i2, &e2) in g.iter().enumerate() {
                        if i2 != i {
                            dp *= tables[i2][e2 as usize];
                        }
                    }
                    s += dirs[(i, q)] * dp;
                }
                dq[k] = s / ctx.nv;
            }
            let mut out = vec![ZERO; self.dim];
            self.apply_coeff(&dq, &mut out);
            pq_raw.push(out);
        }

        let mut h2 = vec![vec![vec![ZERO; self.dim]; m]; m];
        for q in 0..m {
            for qp in 0..m {
                let mut pqq = vec![ZERO; self.dim];
                self.apply_coeff(&dir2[q][qp], &mut pqq);
                for j in 0..self.dim {
                    let term = pqq[j]
                        - nf * m2[q][qp] * p_raw[j]
                        - nf * ctx.l_grad[q] * pq_raw[qp][j]
                        - nf * ctx.l_grad[qp] * pq_raw[q][j]
                        + nf * nf * ctx.l_grad[q] * ctx.l_grad[qp] * p_raw[j];
                    h2[q][qp][j] = term * ctx.pref;
                }
            }
        }
        FrameEval2 { first, h2 }
    }

    /// `s(w, theta)` for the section with orthonormal coefficients `c`.
    pub fn evaluate_section(
        &self,
        chart: &HeisenbergChart,
        c: &[C64],
        w: &[C64],
        theta: f64,
    ) -> C64 {
        assert_eq!(c.len(), self.dim);
        let frame = self.frame_values(chart, w, theta);
        c.iter().zip(frame.iter()).map(|(a, b)| a * b).sum()
    }

    /// Value and unscaled horizontal derivatives of the section `c` at one
    /// chart point.
    pub fn horizontal_jet(
        &self,
        chart: &HeisenbergChart,
        c: &[C64],
        w: &[C64],
        theta: f64,
    ) -> PointJet {
        assert_eq!(c.len(), self.dim);
        let frame = self.frame_jet(chart, w, theta);
        let dot = |v: &[C64]| -> C64 { c.iter().zip(v.iter()).map(|(a, b)| a * b).sum() };
        PointJet {
            value: dot(&frame.values),
            d_holo: frame.d_holo.iter().map(|v| dot(v)).collect(),
            d_anti: frame.d_anti.iter().map(|v| dot(v)).collect(),
        }
    }

    /// Reproducibility export: model data, exponents, coefficients, norms.
    pub fn export_json(&self) -> serde_json::Value {
        let coeff_rows: Vec<Vec<[f64; 2]>> = match &self.coeff {
            BasisCoeff::Diagonal(d) => (0..self.dim)
                .map(|j| {
                    (0..self.dim)
                        .map(|k| if j == k { [d[j], 0.0] } else { [0.0, 0.0] })
                        .collect()
                })
                .collect(),
            BasisCoeff::Upper(u) => (0..self.dim)
                .map(|k| (0..self.dim).map(|j| [u[(k, j)].re, u[(k, j)].im]).collect())
                .collect(),
        };
        serde_json::json!({
            "m": self.model.m(),
            "n_power": self.model.n_power(),
            "weight": self.model.weight().source,
            "exponents": self.exponents,
            "coefficients_row_major": coeff_rows,
            "mono_norms_sq": self.mono_norms_sq,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_geometry::{make_heisenberg_chart, make_model};

    fn flat_stack(m: usize, n: u32) -> (Arc<ProjectiveModel>, SectionBasis, HeisenbergChart) {
        let model = Arc::new(make_model(m, n, "0").unwrap());
        let basis = build_basis(&model).unwrap();
        let chart =
            make_heisenberg_chart(&model, &vec![C64::new(0.0, 0.0); m]).unwrap();
        (model, basis, chart)
    }

    #[test]
    fn flat_monomial_norms() {
        let (_, basis, _) = flat_stack(1, 2);
        let norms = basis.mono_norms_sq().unwrap();
        let pi = std::f64::consts::PI;
        assert!((norms[0] - pi / 3.0).abs() < 1e-14, "|z^0|^2");
        assert!((norms[1] - pi / 6.0).abs() < 1e-14, "|z^1|^2");
        assert!((norms[2] - pi / 3.0).abs() < 1e-14, "|z^2|^2");
        assert_eq!(basis.dim(), 3);
        let (_, basis2, _) = flat_stack(2, 1);
        assert_eq!(basis2.dim(), 3);
    }

    #[test]
    fn unit_section_value_example() {
        // N = 1 basis on CP^1: S = z / |z|, |z|^2 = pi/2;
        // s(1, 0) = (1/sqrt(pi/2)) * 1 * 2^{-1/2} = 1/sqrt(pi).
        let (_, basis, chart) = flat_stack(1, 1);
        let mut c = vec![ZERO; 2];
        c[1] = C64::new(1.0, 0.0);
        let v = basis.evaluate_section(&chart, &c, &[C64::new(1.0, 0.0)], 0.0);
        let want = 1.0 / std::f64::consts::PI.sqrt();
        assert!((v - C64::new(want, 0.0)).norm() < 1e-14, "{v}");
    }

    #[test]
    fn equivariance_modulus_independent_of_theta() {
        let (_, basis, chart) = flat_stack(1, 3);
        let mut c = vec![ZERO; basis.dim()];
        c[0] = C64::new(1.0, 0.0);
        let w = [C64::new(0.4, -0.2)];
        let v0 = basis.evaluate_section(&chart, &c, &w, 0.0);
        let v1 = basis.evaluate_section(&chart, &c, &w, 0.83);
        assert!((v0.norm() - v1.norm()).abs() < 1e-14);
        // phase advances by exp(i N theta)
        let expect = v0 * C64::from_polar(1.0, 3.0 * 0.83);
        assert!((v1 - expect).norm() < 1e-13);
    }

    #[test]
    fn gram_is_identity_by_quadrature_flat() {
        let (model, basis, chart) = flat_stack(1, 3);
        let grid = build_quadrature(&model, 2 * 3 + 4).unwrap();
        let dim = basis.dim();
        let mut gram = CMatrix::zeros(dim, dim);
        for (z, w) in grid.nodes.iter().zip(grid.weights.iter()) {
            let f = basis.frame_values(&chart, z, 0.0);
            for j in 0..dim {
                for k in 0..dim {
                    gram[(j, k)] += w * f[j] * f[k].conj();
                }
            }
        }
        for j in 0..dim {
            for k in 0..dim {
                let want = if j == k { 1.0 } else { 0.0 };
                assert!(
                    (gram[(j, k)] - C64::new(want, 0.0)).norm() < 1e-9,
                    "gram[{j}{k}] = {}",
                    gram[(j, k)]
                );
            }
        }
    }

    #[test]
    fn gram_identity_perturbed_and_refined() {
        let model = Arc::new(make_model(1, 6, "0.1 * r2 / (1 + r2)").unwrap());
        let basis = build_basis(&model).unwrap();
        let chart = make_heisenberg_chart(&model, &[ZERO]).unwrap();
        // Verify against a *finer* grid than the one used to build the
        // basis: this checks quadrature truth, not just factorization
        // consistency. The pointwise pairing S_j conj(S_k) is lift- and
        // chart-independent; nodes are mapped into chart coordinates.
        let grid = build_quadrature(&model, 2 * 6 + 10).unwrap();
        let dim = basis.dim();
        let mut gram = CMatrix::zeros(dim, dim);
        for (z, w) in grid.nodes.iter().zip(grid.weights.iter()) {
            let wc = chart.chart_coords(z).unwrap();
            let f = basis.frame_values(&chart, &wc, 0.0);
            let density = w * model.density_ratio(z);
            for j in 0..dim {
                for k in 0..=j {
                    gram[(j, k)] += density * f[j] * f[k].conj();
                }
            }
        }
        for j in 0..dim {
            for k in 0..=j {
                let want = if j == k { 1.0 } else { 0.0 };
                assert!(
                    (gram[(j, k)] - C64::new(want, 0.0)).norm() < 1e-9,
                    "gram[{j}{k}] = {}",
                    gram[(j, k)]
                );
            }
        }
    }

    #[test]
    fn gram_identity_perturbed_dimension_two() {
        let model = Arc::new(make_model(2, 2, "0.05 * r2 / (1 + r2)").unwrap());
        let basis = build_basis(&model).unwrap();
        let chart = make_heisenberg_chart(&model, &[ZERO, ZERO]).unwrap();
        let grid = build_quadrature(&model, 2 * 2 + 8).unwrap();
        let dim = basis.dim();
        let mut gram = CMatrix::zeros(dim, dim);
        for (z, w) in grid.nodes.iter().zip(grid.weights.iter()) {
            let wc = chart.chart_coords(z).unwrap();
            let f = basis.frame_values(&chart, &wc, 0.0);
            let density = w * model.density_ratio(z);
            for j in 0..dim {
                for k in 0..=j {
                    gram[(j, k)] += density * f[j] * f[k].conj();
                }
            }
        }
        for j in 0..dim {
            for k in 0..=j {
                let want = if j == k { 1.0 } else { 0.0 };
                assert!(
                    (gram[(j, k)] - C64::new(want, 0.0)).norm() < 1e-9,
                    "gram[{j}{k}] = {}",
                    gram[(j, k)]
                );
            }
        }
    }

    #[test]
    fn horizontal_derivative_matches_finite_differences() {
        let (_, basis, chart) = flat_stack(1, 4);
        let mut c = vec![ZERO; basis.dim()];
        c[1] = C64::new(0.7, 0.1);
        c[3] = C64::new(-0.3, 0.5);
        let w = [C64::new(0.31, -0.12)];
        let jet = basis.horizontal_jet(&chart, &c, &w, 0.0);
        // FD of s along z and of the fiber angle; then d^h = d_z - A d_theta.
        let h = 1e-5;
        let eval = |wz: C64, th: f64| basis.evaluate_section(&chart, &c, &[wz], th);
        let dx = (eval(w[0] + C64::new(h, 0.0), 0.0) - eval(w[0] - C64::new(h, 0.0), 0.0))
            / (2.0 * h);
        let dy = (eval(w[0] + C64::new(0.0, h), 0.0) - eval(w[0] - C64::new(0.0, h), 0.0))
            / (2.0 * h);
        let dth = (eval(w[0], h) - eval(w[0], -h)) / (2.0 * h);
        let dz = 0.5 * (dx - C64::i() * dy);
        let dzbar = 0.5 * (dx + C64::i() * dy);
        let a = chart.connection(&w)[0];
        let fd_holo = dz - a * dth;
        let fd_anti = dzbar - a.conj() * dth;
        assert!(
            (jet.d_holo[0] - fd_holo).norm() < 1e-6 * (1.0 + jet.d_holo[0].norm()),
            "holo: {} vs {}",
            jet.d_holo[0],
            fd_holo
        );
        assert!(fd_anti.norm() < 1e-6, "anti by FD: {fd_anti}");
        assert!(jet.d_anti[0].norm() < 1e-12, "anti analytic: {}", jet.d_anti[0]);
    }

    #[test]
    fn perturbed_horizontal_derivative_fd() {
        let model = Arc::new(make_model(1, 3, "0.1 * r2 / (1 + r2)").unwrap());
        let basis = build_basis(&model).unwrap();
        let chart = make_heisenberg_chart(&model, &[C64::new(0.2, 0.1)]).unwrap();
        let mut c = vec![ZERO; basis.dim()];
        c[0] = C64::new(0.3, -0.8);
        c[2] = C64::new(0.5, 0.25);
        let w = [C64::new(-0.15, 0.22)];
        let jet = basis.horizontal_jet(&chart, &c, &w, 0.3);
        let h = 1e-5;
        let eval = |wz: C64, th: f64| basis.evaluate_section(&chart, &c, &[wz], th);
        let dx = (eval(w[0] + C64::new(h, 0.0), 0.3) - eval(w[0] - C64::new(h, 0.0), 0.3))
            / (2.0 * h);
        let dy = (eval(w[0] + C64::new(0.0, h), 0.3) - eval(w[0] - C64::new(0.0, h), 0.3))
            / (2.0 * h);
        let dth = (eval(w[0], 0.3 + h) - eval(w[0], 0.3 - h)) / (2.0 * h);
        let dz = 0.5 * (dx - C64::i() * dy);
        let a = chart.connection(&w)[0];
        let fd_holo = dz - a * dth;
        assert!(
            (jet.d_holo[0] - fd_holo).norm() < 1e-5 * (1.0 + fd_holo.norm()),
            "{} vs {}",
            jet.d_holo[0],
            fd_holo
        );
        let dzbar = 0.5 * (dx + C64::i() * dy);
        let fd_anti = dzbar - a.conj() * dth;
        assert!(fd_anti.norm() < 1e-5, "{fd_anti}");
    }

    #[test]
    fn constant_section_center_derivative_vanishes() {
        let (_, basis, chart) = flat_stack(1, 2);
        let mut c = vec![ZERO; basis.dim()];
        c[0] = C64::new(1.0, 0.0);
        let jet = basis.horizontal_jet(&chart, &c, &[ZERO], 0.0);
        assert!(jet.d_holo[0].norm() < 1e-14);
        assert!(jet.d_anti[0].norm() < 1e-14);
    }

    #[test]
    fn second_derivative_consistent_with_first_by_fd() {
        let (_, basis, chart) = flat_stack(1, 5);
        let mut c = vec![ZERO; basis.dim()];
        c[2] = C64::new(1.0, -0.4);
        c[4] = C64::new(0.2, 0.9);
        let w = C64::new(0.17, 0.28);
        let eval2 = basis.frame_jet2(&chart, &[w], 0.0);
        let dot = |v: &[C64]| -> C64 { c.iter().zip(v).map(|(a, b)| a * b).sum() };
        let got = dot(&eval2.h2[0][0]);
        // FD in the holomorphic direction of the first horizontal
        // derivative, corrected by the connection along the fiber response.
        let h = 1e-4;
        let jet_at = |wz: C64, th: f64| basis.horizontal_jet(&chart, &c, &[wz], th);
        let dpx = jet_at(w + C64::new(h, 0.0), 0.0).d_holo[0];
        let dmx = jet_at(w - C64::new(h, 0.0), 0.0).d_holo[0];
        let dpy = jet_at(w + C64::new(0.0, h), 0.0).d_holo[0];
        let dmy = jet_at(w - C64::new(0.0, h), 0.0).d_holo[0];
        let dzfd = 0.5 * ((dpx - dmx) / (2.0 * h) - C64::i() * (dpy - dmy) / (2.0 * h));
        let dth = (jet_at(w, h).d_holo[0] - jet_at(w, -h).d_holo[0]) / (2.0 * h);
        let a = chart.connection(&[w])[0];
        let fd = dzfd - a * dth;
        assert!((got - fd).norm() < 1e-5 * (1.0 + fd.norm()), "{got} vs {fd}");
    }

    #[test]
    fn jet_vector_layout_and_degeneracy() {
        let (_, basis, chart) = flat_stack(1, 5);
        let mut c = vec![ZERO; basis.dim()];
        c[2] = C64::new(0.8, -0.6);
        let pts = vec![vec![ZERO], vec![C64::new(0.4, 0.1)]];
        let jet = JetVector::from_section(&basis, &chart, &c, &pts);
        assert_eq!(jet.data.len(), jet_length(2, 1));
        let direct = basis.evaluate_section(&chart, &c, &pts[1], 0.0);
        assert!((jet.value(1) - direct).norm() < 1e-14);
        assert!(jet.anti_holo_max() < 1e-12);
        // scaled derivative matches the unscaled horizontal jet
        let raw = basis.horizontal_jet(&chart, &c, &pts[0], 0.0);
        let want = raw.d_holo[0] / (5.0f64).sqrt();
        assert!((jet.xi(0, 0) - want).norm() < 1e-14);
    }

    #[test]
    fn dimension_cap_enforced() {
        let model = Arc::new(make_model(1, 2500, "0").unwrap());
        match build_basis(&model) {
            Err(Error::ResourceCap(_)) => {}
            Err(other) => panic!("expected resource cap, got {other}"),
            Ok(_) => panic!("expected resource cap, basis built"),
        }
    }

    #[test]
    fn export_contains_fields() {
        let (_, basis, _) = flat_stack(1, 2);
        let j = basis.export_json();
        assert_eq!(j["m"], 1);
        assert_eq!(j["n_power"], 2);
        assert!(j["exponents"].as_array().unwrap().len() == 3);
    }
}
