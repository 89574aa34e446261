//! Metric-weight expression grammar.
//!
//! A weight perturbation is a real function on the affine chart given as a
//! string over the variables `re1, im1, ..., re{m}, im{m}` (real and
//! imaginary parts of the affine coordinates) and `r2` (= |z|^2), combined
//! with numbers, `+ - * /`, integer powers `^k`, and parentheses. The
//! hermitian metric on the line bundle is the Fubini-Study one times
//! `exp(-weight)`.
//!
//! Two semantic restrictions keep the perturbed metric usable:
//!
//! * denominators must be radial (no `re`/`im` leaves), which is what makes
//!   rational combinations of `1/(1+r2)` expressible while excluding poles
//!   on angular zero sets;
//! * the function must stay bounded toward the hyperplane at infinity; this
//!   is validated by sampling on rings of large radius.
//!
//! Example: the bounded radial bump `0.1 * r2 / (1 + r2)`.

use crate::autodiff::Jet;
use crate::{C64, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    /// re part of z_j (0-based index).
    Re(usize),
    /// im part of z_j (0-based index).
    Im(usize),
    /// |z|^2.
    R2,
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, u32),
}

/// Parsed and validated weight function.
#[derive(Clone, Debug)]
pub struct Weight {
    pub source: String,
    expr: Expr,
    m: usize,
    harmonic_degree: u32,
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: &str) -> Error {
        Error::Schema(format!("weight parse error at byte {}: {msg}", self.pos))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.power()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.power()?));
                }
                Some(b'/') => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.power()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if start == self.pos {
                return Err(self.err("expected a nonnegative integer exponent after '^'"));
            }
            let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
            let k: u32 = text
                .parse()
                .map_err(|_| self.err("exponent does not fit in u32"))?;
            return Ok(Expr::Pow(Box::new(base), k));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            None => Err(self.err("unexpected end of expression")),
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected ')'"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(b'-') => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.power()?)))
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(c) => Err(self.err(&format!("unexpected character '{}'", c as char))),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() {
            let c = self.src[self.pos];
            if c.is_ascii_digit() || c == b'.' {
                self.pos += 1;
            } else if (c == b'e' || c == b'E')
                && self.pos > start
                && self
                    .src
                    .get(self.pos + 1)
                    .is_some_and(|&d| d.is_ascii_digit() || d == b'+' || d == b'-')
            {
                self.pos += 2;
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        text.parse::<f64>()
            .map(Expr::Num)
            .map_err(|_| self.err(&format!("bad number literal '{text}'")))
    }

    fn ident(&mut self) -> Result<Expr> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        if text == "r2" {
            return Ok(Expr::R2);
        }
        for (prefix, ctor) in [("re", true), ("im", false)] {
            if let Some(idx) = text.strip_prefix(prefix) {
                if let Ok(j) = idx.parse::<usize>() {
                    if j >= 1 {
                        return Ok(if ctor { Expr::Re(j - 1) } else { Expr::Im(j - 1) });
                    }
                }
            }
        }
        self.pos = start;
        Err(self.err(&format!(
            "unknown identifier '{text}' (expected re<j>, im<j>, or r2)"
        )))
    }
}

impl Expr {
    /// Max coordinate index used, or None for purely radial expressions.
    fn max_var_index(&self) -> Option<usize> {
        match self {
            Expr::Num(_) | Expr::R2 => None,
            Expr::Re(j) | Expr::Im(j) => Some(*j),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                match (a.max_var_index(), b.max_var_index()) {
                    (Some(x), Some(y)) => Some(x.max(y)),
                    (x, y) => x.or(y),
                }
            }
            Expr::Neg(a) | Expr::Pow(a, _) => a.max_var_index(),
        }
    }

    /// Angular-harmonic degree bound: re/im leaves count 1, products add,
    /// powers multiply. Division requires a radial denominator.
    fn harmonic_degree(&self) -> Result<u32> {
        Ok(match self {
            Expr::Num(_) | Expr::R2 => 0,
            Expr::Re(_) | Expr::Im(_) => 1,
            Expr::Add(a, b) | Expr::Sub(a, b) => a.harmonic_degree()?.max(b.harmonic_degree()?),
            Expr::Mul(a, b) => a.harmonic_degree()? + b.harmonic_degree()?,
            Expr::Div(a, b) => {
                if b.harmonic_degree()? != 0 {
                    return Err(Error::Schema(
                        "weight denominators must be radial (no re/im factors)".into(),
                    ));
                }
                a.harmonic_degree()?
            }
            Expr::Neg(a) => a.harmonic_degree()?,
            Expr::Pow(a, k) => a.harmonic_degree()? * k,
        })
    }

    fn eval_jet<const NV: usize>(&self, re: &[Jet<NV>], im: &[Jet<NV>], r2: &Jet<NV>) -> Jet<NV> {
        match self {
            Expr::Num(c) => Jet::constant_re(*c),
            Expr::Re(j) => re[*j].clone(),
            Expr::Im(j) => im[*j].clone(),
            Expr::R2 => r2.clone(),
            Expr::Add(a, b) => a.eval_jet(re, im, r2).add(&b.eval_jet(re, im, r2)),
            Expr::Sub(a, b) => a.eval_jet(re, im, r2).sub(&b.eval_jet(re, im, r2)),
            Expr::Mul(a, b) => a.eval_jet(re, im, r2).mul(&b.eval_jet(re, im, r2)),
            Expr::Div(a, b) => a.eval_jet(re, im, r2).div(&b.eval_jet(re, im, r2)),
            Expr::Neg(a) => a.eval_jet(re, im, r2).neg(),
            Expr::Pow(a, k) => a.eval_jet(re, im, r2).powi(*k as i32),
        }
    }
}

impl Weight {
    /// Parse and validate a weight for a model of complex dimension `m`.
    pub fn parse(source: &str, m: usize) -> Result<Weight> {
        let mut p = Parser { src: source.as_bytes(), pos: 0 };
        let expr = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.err("trailing input after expression"));
        }
        if let Some(j) = expr.max_var_index() {
            if j >= m {
                return Err(Error::Schema(format!(
                    "weight uses coordinate {} but the model has dimension m = {m}",
                    j + 1
                )));
            }
        }
        let harmonic_degree = expr.harmonic_degree()?;
        let w = Weight { source: source.to_string(), expr, m, harmonic_degree };
        w.validate_bounded()?;
        Ok(w)
    }

    /// The flat weight.
    pub fn zero(m: usize) -> Weight {
        Weight { source: "0".into(), expr: Expr::Num(0.0), m, harmonic_degree: 0 }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.expr, Expr::Num(c) if c == 0.0)
    }

    pub fn dimension(&self) -> usize {
        self.m
    }

    /// Bound on the angular-harmonic content, used to size angular
    /// quadrature rules.
    pub fn harmonic_degree(&self) -> u32 {
        self.harmonic_degree
    }

    /// Evaluate at a chart point whose coordinates are given as jets.
    /// The result is a (real-valued) jet in the same variables.
    pub fn eval_jet<const NV: usize>(&self, z: &[Jet<NV>]) -> Jet<NV> {
        assert_eq!(z.len(), self.m);
        let re: Vec<Jet<NV>> = z
            .iter()
            .map(|zj| zj.add(&zj.conj()).scale(C64::new(0.5, 0.0)))
            .collect();
        let im: Vec<Jet<NV>> = z
            .iter()
            .map(|zj| zj.sub(&zj.conj()).scale(C64::new(0.0, -0.5)))
            .collect();
        let mut r2 = Jet::constant_re(0.0);
        for zj in z {
            r2 = r2.add(&zj.norm_sqr());
        }
        self.expr.eval_jet(&re, &im, &r2)
    }

    /// Plain evaluation at affine coordinates.
    pub fn eval(&self, z: &[C64]) -> f64 {
        let jets: Vec<Jet<1>> = z.iter().map(|&c| Jet::constant(c)).collect();
        self.eval_jet(&jets).val.re
    }

    /// Sample rings of growing radius; the weight has to stay finite and
    /// moderate there for the metric to extend over the hyperplane at
    /// infinity.
    fn validate_bounded(&self) -> Result<()> {
        const CAP: f64 = 1.0e6;
        for &radius in &[1.0, 1.0e2, 1.0e4, 1.0e8] {
            for k in 0..24 {
                let angle = 2.0 * std::f64::consts::PI * (k as f64) / 24.0;
                let mut z = vec![C64::new(0.0, 0.0); self.m];
                z[0] = C64::from_polar(radius, angle);
                if self.m > 1 {
                    z[1] = C64::from_polar(radius * 0.7, 1.7 * angle + 0.3);
                }
                let v = self.eval(&z);
                if !v.is_finite() || v.abs() > CAP {
                    return Err(Error::Schema(format!(
                        "weight is unbounded near the chart boundary: value {v:.3e} at |z| = {radius:.1e}"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_bounded_radial_bump() {
        let w = Weight::parse("0.1 * r2 / (1 + r2)", 1).unwrap();
        assert_eq!(w.harmonic_degree(), 0);
        // value at |z|^2 = 1 is 0.05
        assert!((w.eval(&[C64::new(1.0, 0.0)]) - 0.05).abs() < 1e-15);
        // bounded limit toward infinity
        assert!((w.eval(&[C64::new(1e8, 0.0)]) - 0.1).abs() < 1e-7);
    }

    #[test]
    fn parses_low_harmonic() {
        let w = Weight::parse("0.05 * re1 / (1 + r2)", 1).unwrap();
        assert_eq!(w.harmonic_degree(), 1);
        let v = w.eval(&[C64::new(2.0, 0.0)]);
        assert!((v - 0.05 * 2.0 / 5.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_unbounded() {
        assert!(Weight::parse("r2", 1).is_err());
        assert!(Weight::parse("re1 * im1", 1).is_err());
    }

    #[test]
    fn rejects_angular_denominator() {
        let e = Weight::parse("1 / (1 + re1)", 1).unwrap_err();
        assert!(format!("{e}").contains("radial"));
    }

    #[test]
    fn reports_parse_position() {
        let e = Weight::parse("0.1 * (r2", 1).unwrap_err();
        let msg = format!("{e}");
        assert!(msg.contains("byte"), "{msg}");
        let e2 = Weight::parse("0.1 * foo", 1).unwrap_err();
        assert!(format!("{e2}").contains("unknown identifier"));
    }

    #[test]
    fn rejects_out_of_range_coordinate() {
        assert!(Weight::parse("re2 / (1 + r2)", 1).is_err());
        assert!(Weight::parse("re2 / (1 + r2)", 2).is_ok());
    }

    #[test]
    fn jet_derivatives_match_finite_differences() {
        let w = Weight::parse("0.1 * r2 / (1 + r2) + 0.02 * re1 / (1 + r2)", 1).unwrap();
        let (x, y) = (0.4, -0.3);
        let z = Jet::<2>::complex_variable(0, 1, C64::new(x, y));
        let jet = w.eval_jet(&[z]);
        let h = 1e-5;
        let f = |x: f64, y: f64| w.eval(&[C64::new(x, y)]);
        let fd_x = (f(x + h, y) - f(x - h, y)) / (2.0 * h);
        let fd_y = (f(x, y + h) - f(x, y - h)) / (2.0 * h);
        assert!((jet.grad[0].re - fd_x).abs() < 1e-9);
        assert!((jet.grad[1].re - fd_y).abs() < 1e-9);
        let fd_xx = (f(x + h, y) - 2.0 * f(x, y) + f(x - h, y)) / (h * h);
        assert!((jet.hess[0][0].re - fd_xx).abs() < 1e-5);
    }
}
