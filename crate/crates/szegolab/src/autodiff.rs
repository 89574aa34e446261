//! Second-order forward-mode differentiation with complex values over a
//! fixed set of real variables.
//!
//! A [`Jet`] carries a value, the gradient, and the full Hessian with
//! respect to `NV` real coordinates. Chart potentials, metric Hessians, and
//! connection coefficients are obtained by evaluating composite expressions
//! (homogeneous coordinates, weight grammar, gauge factors) in jet
//! arithmetic, so all geometric derivatives are exact to machine precision
//! rather than finite-differenced. The same machinery differentiates the
//! Heisenberg-model kernel as an independent cross-check of the closed-form
//! covariance blocks.
//!
//! Differentiation is with respect to *real* variables, so `conj` and
//! modulus-squared are perfectly legal jet operations.

use crate::C64;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Truncated second-order Taylor expansion in `NV` real variables.
#[derive(Clone, Debug)]
pub struct Jet<const NV: usize> {
    pub val: C64,
    pub grad: [C64; NV],
    /// Full symmetric Hessian, `hess[i][j] = d^2 f / dx_i dx_j`.
    pub hess: [[C64; NV]; NV],
}

impl<const NV: usize> Jet<NV> {
    pub fn constant(v: C64) -> Self {
        Jet { val: v, grad: [ZERO; NV], hess: [[ZERO; NV]; NV] }
    }

    pub fn constant_re(v: f64) -> Self {
        Self::constant(C64::new(v, 0.0))
    }

    /// The coordinate variable `x_i` seeded with value `v`.
    pub fn variable(i: usize, v: f64) -> Self {
        let mut j = Self::constant(C64::new(v, 0.0));
        j.grad[i] = C64::new(1.0, 0.0);
        j
    }

    /// Complex combination `x_{re} + i x_{im}` of two real variables.
    pub fn complex_variable(idx_re: usize, idx_im: usize, v: C64) -> Self {
        let mut j = Self::constant(v);
        j.grad[idx_re] = C64::new(1.0, 0.0);
        j.grad[idx_im] = C64::new(0.0, 1.0);
        j
    }

    pub fn conj(&self) -> Self {
        let mut out = Self::constant(self.val.conj());
        for i in 0..NV {
            out.grad[i] = self.grad[i].conj();
            for j in 0..NV {
                out.hess[i][j] = self.hess[i][j].conj();
            }
        }
        out
    }

    /// |f|^2 = f * conj(f); real-valued jet.
    pub fn norm_sqr(&self) -> Self {
        self.mul(&self.conj())
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut out = self.clone();
        out.val += o.val;
        for i in 0..NV {
            out.grad[i] += o.grad[i];
            for j in 0..NV {
                out.hess[i][j] += o.hess[i][j];
            }
        }
        out
    }

    pub fn sub(&self, o: &Self) -> Self {
        let mut out = self.clone();
        out.val -= o.val;
        for i in 0..NV {
            out.grad[i] -= o.grad[i];
            for j in 0..NV {
                out.hess[i][j] -= o.hess[i][j];
            }
        }
        out
    }

    pub fn neg(&self) -> Self {
        Self::constant(ZERO).sub(self)
    }

    pub fn scale(&self, c: C64) -> Self {
        let mut out = self.clone();
        out.val *= c;
        for i in 0..NV {
            out.grad[i] *= c;
            for j in 0..NV {
                out.hess[i][j] *= c;
            }
        }
        out
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut out = Self::constant(self.val * o.val);
        for i in 0..NV {
            out.grad[i] = self.grad[i] * o.val + self.val * o.grad[i];
            for j in 0..NV {
                out.hess[i][j] = self.hess[i][j] * o.val
                    + self.grad[i] * o.grad[j]
                    + self.grad[j] * o.grad[i]
                    + self.val * o.hess[i][j];
            }
        }
        out
    }

    pub fn div(&self, o: &Self) -> Self {
        self.mul(&o.recip())
    }

    pub fn recip(&self) -> Self {
        let v = C64::new(1.0, 0.0) / self.val;
        let v2 = v * v;
        let v3 = v2 * v;
        let mut out = Self::constant(v);
        for i in 0..NV {
            out.grad[i] = -self.grad[i] * v2;
            for j in 0..NV {
                out.hess[i][j] =
                    2.0 * self.grad[i] * self.grad[j] * v3 - self.hess[i][j] * v2;
            }
        }
        out
    }

    pub fn exp(&self) -> Self {
        let e = self.val.exp();
        let mut out = Self::constant(e);
        for i in 0..NV {
            out.grad[i] = e * self.grad[i];
            for j in 0..NV {
                out.hess[i][j] = e * (self.hess[i][j] + self.grad[i] * self.grad[j]);
            }
        }
        out
    }

    pub fn ln(&self) -> Self {
        let v = self.val;
        let mut out = Self::constant(v.ln());
        for i in 0..NV {
            out.grad[i] = self.grad[i] / v;
            for j in 0..NV {
                out.hess[i][j] = self.hess[i][j] / v - self.grad[i] * self.grad[j] / (v * v);
            }
        }
        out
    }

    pub fn powi(&self, k: i32) -> Self {
        if k == 0 {
            return Self::constant_re(1.0);
        }
        let mut base = if k > 0 { self.clone() } else { self.recip() };
        let mut n = k.unsigned_abs();
        let mut acc: Option<Self> = None;
        while n > 0 {
            if n & 1 == 1 {
                acc = Some(match acc {
                    None => base.clone(),
                    Some(a) => a.mul(&base),
                });
            }
            n >>= 1;
            if n > 0 {
                base = base.mul(&base);
            }
        }
        acc.unwrap()
    }
}

/// Wirtinger first derivative `d/dz_q = (d/dx_q - i d/dy_q)/2` of a jet whose
/// variable layout interleaves `x_q = vars[2q]`, `y_q = vars[2q+1]`.
pub fn wirtinger_dz<const NV: usize>(jet: &Jet<NV>, q: usize) -> C64 {
    0.5 * (jet.grad[2 * q] - C64::i() * jet.grad[2 * q + 1])
}

/// Wirtinger conjugate derivative `d/dzbar_q`.
pub fn wirtinger_dzbar<const NV: usize>(jet: &Jet<NV>, q: usize) -> C64 {
    0.5 * (jet.grad[2 * q] + C64::i() * jet.grad[2 * q + 1])
}

/// Mixed second Wirtinger derivative `d^2/dz_q dzbar_{q'}`.
pub fn wirtinger_dz_dzbar<const NV: usize>(jet: &Jet<NV>, q: usize, qp: usize) -> C64 {
    let (xq, yq, xp, yp) = (2 * q, 2 * q + 1, 2 * qp, 2 * qp + 1);
    0.25 * (jet.hess[xq][xp] + jet.hess[yq][yp]
        + C64::i() * (jet.hess[xq][yp] - jet.hess[yq][xp]))
}

/// Holomorphic second Wirtinger derivative `d^2/dz_q dz_{q'}`.
pub fn wirtinger_dz_dz<const NV: usize>(jet: &Jet<NV>, q: usize, qp: usize) -> C64 {
    let (xq, yq, xp, yp) = (2 * q, 2 * q + 1, 2 * qp, 2 * qp + 1);
    0.25 * (jet.hess[xq][xp] - jet.hess[yq][yp]
        - C64::i() * (jet.hess[xq][yp] + jet.hess[yq][xp]))
}
