//! Szego kernel evaluation and its near-diagonal scaling limit.
//!
//! The level-N kernel is the orthonormal-basis sum `Pi_N(x, y) = sum_j
//! S_j(x) conj(S_j(y))` on the circle bundle; derivative kernels apply
//! horizontal derivatives analytically to either factor. The model for the
//! near-diagonal limit is the level-one kernel of the reduced Heisenberg
//! group,
//!
//! ```text
//! Pi^H_1(u, theta; v, phi) = pi^{-m} exp(i(theta - phi) + psi2(u, v)),
//! psi2(u, v) = u . conj(v) - (|u|^2 + |v|^2)/2,
//! ```
//!
//! and [`scaling_study`] measures the sup-distance between the dilated
//! kernel `N^{-m} Pi_N(u/sqrt N, theta/N; ...)` and that model over a fixed
//! grid, together with the fitted log-log decay slope. The diagonal-density
//! expansion `Pi_N(z, z) = a_0 N^m + a_1 N^{m-1} + ...` is fitted by least
//! squares over a power list.

use crate::model_geometry::HeisenbergChart;
use crate::section_space::{FrameEval, SectionBasis};
use crate::{C64, Error, Result};
use rayon::prelude::*;

/// Dilated chart points must stay within this coordinate radius.
pub const CHART_RADIUS: f64 = 10.0;

/// Kernel evaluation bound to one basis and one chart.
pub struct KernelEvaluator<'a> {
    pub basis: &'a SectionBasis,
    pub chart: &'a HeisenbergChart,
}

/// Direction of a horizontal derivative on a kernel factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JetDir {
    Holo(usize),
    Anti(usize),
}

impl<'a> KernelEvaluator<'a> {
    pub fn new(basis: &'a SectionBasis, chart: &'a HeisenbergChart) -> Self {
        KernelEvaluator { basis, chart }
    }

    fn n_power(&self) -> u32 {
        self.basis.model().n_power()
    }

    /// `Pi_N(x, y)` with lift points given as (chart coordinates, fiber
    /// angle).
    pub fn szego(&self, x: (&[C64], f64), y: (&[C64], f64)) -> C64 {
        let fx = self.basis.frame_values(self.chart, x.0, x.1);
        let fy = self.basis.frame_values(self.chart, y.0, y.1);
        dot_conj(&fx, &fy)
    }

    /// Diagonal value `Pi_N(x, x)`, a positive number independent of the
    /// fiber angle.
    pub fn diagonal(&self, w: &[C64]) -> f64 {
        let f = self.basis.frame_values(self.chart, w, 0.0);
        f.iter().map(|v| v.norm_sqr()).sum()
    }

    /// Horizontal-derivative kernels. `left` differentiates the first
    /// factor; `right` applies the conjugated derivative to the second
    /// factor, i.e. `sum_j (D_left S_j)(x) conj((D_right S_j)(y))`. No
    /// `1/sqrt(N)` scaling is applied here.
    pub fn szego_derivative(
        &self,
        x: (&[C64], f64),
        y: (&[C64], f64),
        left: Option<JetDir>,
        right: Option<JetDir>,
    ) -> C64 {
        let fx = self.factor(x, left);
        let fy = self.factor(y, right);
        dot_conj(&fx, &fy)
    }

    fn factor(&self, p: (&[C64], f64), dir: Option<JetDir>) -> Vec<C64> {
        match dir {
            None => self.basis.frame_values(self.chart, p.0, p.1),
            Some(d) => {
                let jet = self.basis.frame_jet(self.chart, p.0, p.1);
                match d {
                    JetDir::Holo(q) => jet.d_holo[q].clone(),
                    JetDir::Anti(q) => jet.d_anti[q].clone(),
                }
            }
        }
    }

    /// Full frame jet at a lift point (values and horizontal derivatives of
    /// every basis element), for callers assembling many kernels at once.
    pub fn frame_jet(&self, w: &[C64], theta: f64) -> FrameEval {
        self.basis.frame_jet(self.chart, w, theta)
    }

    /// Heisenberg-dilated kernel `N^{-m} Pi_N(u/sqrt N, theta/N; v/sqrt N,
    /// phi/N)` in the chart.
    pub fn scaled(&self, u: &[C64], theta: f64, v: &[C64], phi: f64) -> Result<C64> {
        let n = self.n_power() as f64;
        let rn = n.sqrt();
        let us: Vec<C64> = u.iter().map(|c| c / rn).collect();
        let vs: Vec<C64> = v.iter().map(|c| c / rn).collect();
        for w in us.iter().chain(vs.iter()) {
            if w.norm() > CHART_RADIUS {
                return Err(Error::Invalid(format!(
                    "dilated point radius {:.3} leaves the chart (cap {CHART_RADIUS})",
                    w.norm()
                )));
            }
        }
        let m = self.basis.model().m() as i32;
        Ok(self.szego((&us, theta / n), (&vs, phi / n)) * n.powi(-m))
    }
}

fn dot_conj(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y.conj()).sum()
}

/// Universal phase `psi2(u, v) = u . conj(v) - (|u|^2 + |v|^2) / 2`;
/// `Re psi2 = -|u - v|^2 / 2`.
pub fn psi2(u: &[C64], v: &[C64]) -> C64 {
    let mut s = C64::new(0.0, 0.0);
    let mut n2 = 0.0;
    for (a, b) in u.iter().zip(v.iter()) {
        s += a * b.conj();
        n2 += a.norm_sqr() + b.norm_sqr();
    }
    s - C64::new(0.5 * n2, 0.0)
}

/// Level-one Szego kernel of the reduced Heisenberg group,
/// `pi^{-m} exp(i(theta - phi) + psi2(u, v))`.
pub fn heisenberg_kernel(u: &[C64], theta: f64, v: &[C64], phi: f64) -> C64 {
    let m = u.len();
    let exponent = psi2(u, v) + C64::new(0.0, theta - phi);
    exponent.exp() / std::f64::consts::PI.powi(m as i32)
}

/// Grid for the near-diagonal study: lattice points of spacing `step`
/// clipped to the disk of radius `radius` in each of u and v (m = 1), with
/// fiber angles from `angles`.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct ScalingGrid {
    pub radius: f64,
    pub step: f64,
    pub angles: Vec<f64>,
}

impl Default for ScalingGrid {
    fn default() -> Self {
        ScalingGrid { radius: 2.0, step: 0.25, angles: vec![0.0, std::f64::consts::FRAC_PI_4] }
    }
}

impl ScalingGrid {
    pub fn lattice(&self) -> Vec<C64> {
        let k = (self.radius / self.step).round() as i64;
        let mut pts = Vec::new();
        for a in -k..=k {
            for b in -k..=k {
                let z = C64::new(a as f64 * self.step, b as f64 * self.step);
                if z.norm() <= self.radius + 1e-12 {
                    pts.push(z);
                }
            }
        }
        pts
    }
}

/// Near-diagonal deviation study across bundle powers.
#[derive(Clone, Debug, serde::Serialize)]
pub struct ScalingReport {
    pub n_list: Vec<u32>,
    pub sup_errors: Vec<f64>,
    /// Least-squares slope of log sup-error against log N.
    pub slope: f64,
    /// Slope of the prefix ending at each N (first entry is NaN).
    pub running_slopes: Vec<f64>,
    /// Per-N constants `sup_error * N^{-slope}`: the measured remainder
    /// bound at the fitted rate.
    pub remainder_constants: Vec<f64>,
    /// Per-N error profile, max over angle combinations, indexed by the
    /// (u, v) lattice pair `iu * len + iv`.
    pub grid_errors: Vec<Vec<f64>>,
    pub lattice: Vec<[f64; 2]>,
}

/// Sup-distance between the dilated kernel and the Heisenberg model over
/// the grid, for each power in the stack. Stacks pair a basis with a chart
/// at the common scaling center.
pub fn scaling_study(
    stacks: &[(&SectionBasis, &HeisenbergChart)],
    grid: &ScalingGrid,
) -> Result<ScalingReport> {
    if stacks.is_empty() {
        return Err(Error::Invalid("empty power list".into()));
    }
    for pair in stacks.windows(2) {
        if pair[1].0.model().n_power() <= pair[0].0.model().n_power() {
            return Err(Error::Invalid("power list must be strictly increasing".into()));
        }
    }
    if stacks[0].0.model().m() != 1 {
        return Err(Error::Invalid("the scaling grid sweep is defined for m = 1".into()));
    }
    let lattice = grid.lattice();
    let n_list: Vec<u32> = stacks.iter().map(|s| s.0.model().n_power()).collect();
    let mut sup_errors = Vec::with_capacity(stacks.len());
    let mut grid_errors = Vec::with_capacity(stacks.len());
    for (basis, chart) in stacks {
        let n = basis.model().n_power() as f64;
        let rn = n.sqrt();
        // lift vectors at every (lattice point, angle)
        let frames: Vec<Vec<Vec<C64>>> = lattice
            .par_iter()
            .map(|&u| {
                grid.angles
                    .iter()
                    .map(|&th| basis.frame_values(chart, &[u / rn], th / n))
                    .collect()
            })
            .collect();
        let len = lattice.len();
        let errors: Vec<f64> = (0..len * len)
            .into_par_iter()
            .map(|idx| {
                let iu = idx / len;
                let iv = idx % len;
                let mut worst = 0.0f64;
                for (ia, &th) in grid.angles.iter().enumerate() {
                    for (ib, &ph) in grid.angles.iter().enumerate() {
                        let kernel =
                            dot_conj(&frames[iu][ia], &frames[iv][ib]) / n;
                        let model =
                            heisenberg_kernel(&[lattice[iu]], th, &[lattice[iv]], ph);
                        worst = worst.max((kernel - model).norm());
                    }
                }
                worst
            })
            .collect();
        let sup = errors.iter().cloned().fold(0.0, f64::max);
        sup_errors.push(sup);
        grid_errors.push(errors);
    }
    let slope = log_log_slope(&n_list, &sup_errors);
    let running_slopes: Vec<f64> = (0..n_list.len())
        .map(|i| {
            if i == 0 {
                f64::NAN
            } else {
                log_log_slope(&n_list[..=i], &sup_errors[..=i])
            }
        })
        .collect();
    let remainder_constants: Vec<f64> = n_list
        .iter()
        .zip(sup_errors.iter())
        .map(|(&n, &e)| if slope.is_finite() { e * (n as f64).powf(-slope) } else { f64::NAN })
        .collect();
    Ok(ScalingReport {
        n_list,
        sup_errors,
        slope,
        running_slopes,
        remainder_constants,
        grid_errors,
        lattice: lattice.iter().map(|z| [z.re, z.im]).collect(),
    })
}

fn log_log_slope(n_list: &[u32], errs: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = n_list
        .iter()
        .zip(errs.iter())
        .filter(|(_, &e)| e > 0.0)
        .map(|(&n, &e)| ((n as f64).ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Least-squares fit of diagonal densities against `{N^m, N^{m-1},
/// N^{m-2}}`. Returns `(a0, a1, residual)` where the residual is the max
/// relative misfit.
pub fn density_expansion_fit(n_list: &[u32], diag: &[f64], m: usize) -> Result<(f64, f64, f64)> {
    if n_list.len() < 3 {
        return Err(Error::Invalid("density fit needs at least 3 powers".into()));
    }
    if n_list.len() != diag.len() {
        return Err(Error::Invalid("power list and density list differ in length".into()));
    }
    let nmax = *n_list.iter().max().unwrap() as f64;
    let nmin = *n_list.iter().min().unwrap() as f64;
    if nmax / nmin < 3.0 {
        return Err(Error::Invalid(
            "power range too narrow for a 3-term expansion fit (need max/min >= 3)".into(),
        ));
    }
    // Normal equations for the 3-parameter model, scaled by N^{-m} so the
    // system stays well conditioned.
    let mut ata = [[0.0f64; 3]; 3];
    let mut atb = [0.0f64; 3];
    for (&n, &d) in n_list.iter().zip(diag.iter()) {
        let nf = n as f64;
        let row = [1.0, 1.0 / nf, 1.0 / (nf * nf)];
        let y = d / nf.powi(m as i32);
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
            atb[i] += row[i] * y;
        }
    }
    let coef = solve3(ata, atb)
        .ok_or_else(|| Error::Invalid("singular normal equations in density fit".into()))?;
    let mut residual = 0.0f64;
    for (&n, &d) in n_list.iter().zip(diag.iter()) {
        let nf = n as f64;
        let fit = (coef[0] + coef[1] / nf + coef[2] / (nf * nf)) * nf.powi(m as i32);
        residual = residual.max(((fit - d) / d).abs());
    }
    Ok((coef[0], coef[1], residual))
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: &[[f64; 3]; 3]| -> f64 {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&a);
    if d.abs() < 1e-14 {
        return None;
    }
    let mut out = [0.0f64; 3];
    for k in 0..3 {
        let mut ak = a;
        for i in 0..3 {
            ak[i][k] = b[i];
        }
        out[k] = det(&ak) / d;
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_geometry::{make_heisenberg_chart, make_model};
    use crate::section_space::build_basis;
    use std::sync::Arc;

    const ZERO: C64 = C64::new(0.0, 0.0);

    fn stack(n: u32) -> (Arc<crate::model_geometry::ProjectiveModel>, SectionBasis, HeisenbergChart)
    {
        let model = Arc::new(make_model(1, n, "0").unwrap());
        let basis = build_basis(&model).unwrap();
        let chart = make_heisenberg_chart(&model, &[ZERO]).unwrap();
        (model, basis, chart)
    }

    #[test]
    fn heisenberg_kernel_values() {
        // diagonal at the origin: 1/pi
        let k = heisenberg_kernel(&[ZERO], 0.0, &[ZERO], 0.0);
        assert!((k - C64::new(1.0 / std::f64::consts::PI, 0.0)).norm() < 1e-15);
        // modulus at u = 1, v = 0: exp(-1/2)/pi
        let k2 = heisenberg_kernel(&[C64::new(1.0, 0.0)], 0.0, &[ZERO], 0.0);
        let want = (-0.5f64).exp() / std::f64::consts::PI;
        assert!((k2.norm() - want).abs() < 1e-15);
        assert!((want - 0.19306).abs() < 1e-5);
        // diagonal modulus is 1/pi^m for all u
        let u = [C64::new(0.8, -1.1)];
        let k3 = heisenberg_kernel(&u, 0.4, &u, 0.4);
        assert!((k3.norm() - 1.0 / std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn psi2_identities() {
        let u = [C64::new(0.3, 0.5)];
        let v = [C64::new(-0.2, 0.9)];
        assert!(psi2(&u, &u).norm() < 1e-15);
        assert!((psi2(&u, &v) - psi2(&v, &u).conj()).norm() < 1e-15);
        let re = psi2(&u, &v).re;
        let want = -0.5 * (u[0] - v[0]).norm_sqr();
        assert!((re - want).abs() < 1e-15);
        // m = 2 arithmetic check: psi2((1,0),(0,1)) = -1
        let a = [C64::new(1.0, 0.0), ZERO];
        let b = [ZERO, C64::new(1.0, 0.0)];
        assert!((psi2(&a, &b) - C64::new(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn diagonal_density_flat() {
        // unitary invariance of the flat metric: the diagonal kernel is the
        // same constant (N+1)/pi across the whole manifold, including the
        // chart around the point at infinity
        let (model, basis, chart) = stack(6);
        let eval = KernelEvaluator::new(&basis, &chart);
        let want = 7.0 / std::f64::consts::PI;
        for &z in &[ZERO, C64::new(0.4, 0.1), C64::new(-1.1, 0.6), C64::new(8.0, -3.0)] {
            let d = eval.diagonal(&[z]);
            assert!(((d - want) / want).abs() < 1e-12, "{d} at {z}");
        }
        let mut swap = crate::linalg::CMatrix::zeros(2, 2);
        swap[(0, 1)] = C64::new(1.0, 0.0);
        swap[(1, 0)] = C64::new(1.0, 0.0);
        let far_chart =
            crate::model_geometry::make_heisenberg_chart_from_unitary(&model, swap).unwrap();
        let far = KernelEvaluator::new(&basis, &far_chart);
        // w = 0 in the swap chart is the point at infinity of the affine one
        let d_inf = far.diagonal(&[ZERO]);
        assert!(((d_inf - want) / want).abs() < 1e-12, "{d_inf} at infinity");
    }

    #[test]
    fn hermitian_symmetry_and_cauchy_schwarz() {
        let (_, basis, chart) = stack(5);
        let eval = KernelEvaluator::new(&basis, &chart);
        let x = ([C64::new(0.3, -0.4)], 0.2);
        let y = ([C64::new(-0.1, 0.8)], 0.9);
        let k_xy = eval.szego((&x.0, x.1), (&y.0, y.1));
        let k_yx = eval.szego((&y.0, y.1), (&x.0, x.1));
        assert!((k_xy - k_yx.conj()).norm() < 1e-12 * k_xy.norm().max(1.0));
        let dx = eval.diagonal(&x.0);
        let dy = eval.diagonal(&y.0);
        assert!(k_xy.norm_sqr() <= dx * dy * (1.0 + 1e-12));
    }

    #[test]
    fn parseval_at_a_point() {
        let (_, basis, chart) = stack(4);
        let eval = KernelEvaluator::new(&basis, &chart);
        let w = [C64::new(0.5, 0.2)];
        let frame = basis.frame_values(&chart, &w, 0.7);
        let sum: f64 = frame.iter().map(|v| v.norm_sqr()).sum();
        assert!((sum - eval.diagonal(&w)).abs() < 1e-12 * sum);
    }

    #[test]
    fn reproducing_property_by_quadrature() {
        let (model, basis, chart) = stack(3);
        let grid = crate::model_geometry::build_quadrature(&model, 10).unwrap();
        let eval = KernelEvaluator::new(&basis, &chart);
        let mut c = vec![ZERO; basis.dim()];
        c[1] = C64::new(0.6, 0.2);
        c[3] = C64::new(-0.1, 0.9);
        let x = [C64::new(0.25, -0.35)];
        let direct = basis.evaluate_section(&chart, &c, &x, 0.0);
        let mut rec = ZERO;
        for (z, w) in grid.nodes.iter().zip(grid.weights.iter()) {
            let s_y = basis.evaluate_section(&chart, &c, z, 0.0);
            rec += *w * eval.szego((&x, 0.0), (z, 0.0)) * s_y;
        }
        assert!((rec - direct).norm() < 1e-9 * direct.norm().max(1.0), "{rec} vs {direct}");
    }

    #[test]
    fn trace_equals_dimension() {
        let (model, basis, chart) = stack(5);
        let grid = crate::model_geometry::build_quadrature(&model, 14).unwrap();
        let eval = KernelEvaluator::new(&basis, &chart);
        let trace: f64 = grid
            .nodes
            .iter()
            .zip(grid.weights.iter())
            .map(|(z, w)| w * eval.diagonal(z))
            .sum();
        assert!((trace - model.dimension() as f64).abs() < 1e-9);
    }

    #[test]
    fn derivative_kernel_matches_fd() {
        let (_, basis, chart) = stack(4);
        let eval = KernelEvaluator::new(&basis, &chart);
        let x = [C64::new(0.3, 0.1)];
        let y = [C64::new(-0.2, 0.4)];
        let got = eval.szego_derivative((&x, 0.0), (&y, 0.0), Some(JetDir::Holo(0)), None);
        // FD on the first slot along the horizontal lift
        let h = 1e-5;
        let k = |wx: C64, th: f64| eval.szego((&[wx], th), (&y, 0.0));
        let dx = (k(x[0] + C64::new(h, 0.0), 0.0) - k(x[0] - C64::new(h, 0.0), 0.0)) / (2.0 * h);
        let dy = (k(x[0] + C64::new(0.0, h), 0.0) - k(x[0] - C64::new(0.0, h), 0.0)) / (2.0 * h);
        let dth = (k(x[0], h) - k(x[0], -h)) / (2.0 * h);
        let a = chart.connection(&x)[0];
        let fd = 0.5 * (dx - C64::i() * dy) - a * dth;
        assert!((got - fd).norm() < 1e-5 * (1.0 + fd.norm()), "{got} vs {fd}");
        // anti-holomorphic derivative of the integrable kernel vanishes
        let anti = eval.szego_derivative((&x, 0.0), (&y, 0.0), Some(JetDir::Anti(0)), None);
        assert!(anti.norm() < 1e-10);
    }

    #[test]
    fn mixed_diagonal_derivative_positive() {
        let (_, basis, chart) = stack(4);
        let eval = KernelEvaluator::new(&basis, &chart);
        let x = [C64::new(0.2, -0.3)];
        let k = eval.szego_derivative(
            (&x, 0.0),
            (&x, 0.0),
            Some(JetDir::Holo(0)),
            Some(JetDir::Holo(0)),
        );
        assert!(k.im.abs() < 1e-12 * k.re.abs());
        assert!(k.re > 0.0);
    }

    #[test]
    fn scaled_kernel_center_value_and_symmetry() {
        let (_, basis, chart) = stack(8);
        let eval = KernelEvaluator::new(&basis, &chart);
        let got = eval.scaled(&[ZERO], 0.0, &[ZERO], 0.0).unwrap();
        let want = 9.0 / (8.0 * std::f64::consts::PI);
        assert!((got - C64::new(want, 0.0)).norm() < 1e-12);
        let u = [C64::new(0.7, 0.2)];
        let v = [C64::new(-0.5, 0.6)];
        let kuv = eval.scaled(&u, 0.3, &v, 0.1).unwrap();
        let kvu = eval.scaled(&v, 0.1, &u, 0.3).unwrap();
        assert!((kuv - kvu.conj()).norm() < 1e-12);
    }

    #[test]
    fn scaled_kernel_domain_check() {
        let (_, basis, chart) = stack(4);
        let eval = KernelEvaluator::new(&basis, &chart);
        assert!(eval.scaled(&[C64::new(100.0, 0.0)], 0.0, &[ZERO], 0.0).is_err());
    }

    #[test]
    fn scaling_errors_decrease() {
        let stacks: Vec<_> = [8u32, 16, 32]
            .iter()
            .map(|&n| {
                let model = Arc::new(make_model(1, n, "0").unwrap());
                let basis = build_basis(&model).unwrap();
                let chart = make_heisenberg_chart(&model, &[ZERO]).unwrap();
                (basis, chart)
            })
            .collect();
        let refs: Vec<(&SectionBasis, &HeisenbergChart)> =
            stacks.iter().map(|(b, c)| (b, c)).collect();
        let grid = ScalingGrid { radius: 1.5, step: 0.5, angles: vec![0.0] };
        let report = scaling_study(&refs, &grid).unwrap();
        assert!(report.sup_errors[0] > report.sup_errors[1]);
        assert!(report.sup_errors[1] > report.sup_errors[2]);
        assert!(report.slope < -0.4, "slope {}", report.slope);
        // diagonal slice error is exactly 1/(N pi) at u = v = 0
        let iu0 = report
            .lattice
            .iter()
            .position(|p| p[0] == 0.0 && p[1] == 0.0)
            .unwrap();
        let len = report.lattice.len();
        let got = report.grid_errors[0][iu0 * len + iu0];
        let want = 1.0 / (8.0 * std::f64::consts::PI);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn scaling_study_rejects_empty_and_unordered() {
        let grid = ScalingGrid::default();
        assert!(scaling_study(&[], &grid).is_err());
    }

    #[test]
    fn off_diagonal_decay_bound() {
        let (_, basis, chart) = stack(16);
        let eval = KernelEvaluator::new(&basis, &chart);
        // sup error at this N over a small grid
        let grid = ScalingGrid { radius: 1.5, step: 0.5, angles: vec![0.0] };
        let refs = [(&basis, &chart)];
        let report = scaling_study(&refs, &grid).unwrap();
        let sup = report.sup_errors[0];
        for &u in &[ZERO, C64::new(1.0, 0.5), C64::new(-1.5, 0.0)] {
            for &v in &[ZERO, C64::new(0.5, -1.0)] {
                let k = eval.scaled(&[u], 0.0, &[v], 0.0).unwrap();
                let bound = (-0.5 * (u - v).norm_sqr()).exp() / std::f64::consts::PI + sup;
                assert!(k.norm() <= bound + 1e-12, "u={u} v={v}");
            }
        }
    }

    #[test]
    fn density_fit_flat_exact() {
        let n_list = [8u32, 16, 32, 64];
        let diag: Vec<f64> =
            n_list.iter().map(|&n| (n as f64 + 1.0) / std::f64::consts::PI).collect();
        let (a0, a1, res) = density_expansion_fit(&n_list, &diag, 1).unwrap();
        let inv_pi = 1.0 / std::f64::consts::PI;
        assert!((a0 - inv_pi).abs() < 1e-9, "a0 {a0}");
        assert!((a1 - inv_pi).abs() < 1e-7, "a1 {a1}");
        assert!(res < 1e-9, "residual {res}");
    }

    #[test]
    fn density_fit_preconditions() {
        assert!(density_expansion_fit(&[8, 16], &[1.0, 2.0], 1).is_err());
        assert!(density_expansion_fit(&[8, 9, 10], &[1.0, 2.0, 3.0], 1).is_err());
    }

    #[test]
    fn kernel_modulus_invariant_under_recentering() {
        let model = Arc::new(make_model(1, 6, "0").unwrap());
        let basis = build_basis(&model).unwrap();
        let chart0 = make_heisenberg_chart(&model, &[ZERO]).unwrap();
        let p = C64::new(0.4, -0.3);
        let chart1 = make_heisenberg_chart(&model, &[p]).unwrap();
        // the same pair of manifold points, expressed in both charts
        let (z1, z2) = (C64::new(0.1, 0.2), C64::new(-0.3, 0.05));
        let eval0 = KernelEvaluator::new(&basis, &chart0);
        let eval1 = KernelEvaluator::new(&basis, &chart1);
        let k0 = eval0.szego((&[z1], 0.0), (&[z2], 0.0));
        // express z1, z2 in chart1 coordinates
        let w1 = chart1.chart_coords(&[z1]).unwrap()[0];
        let w2 = chart1.chart_coords(&[z2]).unwrap()[0];
        let k1 = eval1.szego((&[w1], 0.0), (&[w2], 0.0));
        assert!(
            (k0.norm() - k1.norm()).abs() < 1e-9 * k0.norm(),
            "{} vs {}",
            k0.norm(),
            k1.norm()
        );
        // diagonal values agree exactly as reals
        let d0 = eval0.diagonal(&[z1]);
        let d1 = eval1.diagonal(&[w1]);
        assert!((d0 - d1).abs() < 1e-9 * d0);
    }
}
