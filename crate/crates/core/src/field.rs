//! Scalar fields of `(x, x', xi)` with exact derivative oracles, and a small
//! expression layer that differentiates sums, products, conjugates and
//! oscillating factors symbolically down to oracle leaves.
//!
//! Symbols `b(x, xi)` and phases `Phi(x, xi)` are fields that ignore the
//! second spatial slot (their `x'` derivatives are exactly zero), so one
//! leaf signature serves symbols, amplitudes and doubled phases alike.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::multi::{self, MultiIndex};

/// Real-valued field with exact partial derivatives.
/// Argument order: derivative orders in `x`, `x'`, `xi`, then the points.
pub trait RealField3: Send + Sync {
    fn eval_deriv(
        &self,
        bx: &[u32],
        bxp: &[u32],
        axi: &[u32],
        x: &[f64],
        xp: &[f64],
        xi: &[f64],
    ) -> Result<f64>;
}

/// Complex-valued field with exact partial derivatives.
pub trait CxField3: Send + Sync {
    fn eval_deriv(
        &self,
        bx: &[u32],
        bxp: &[u32],
        axi: &[u32],
        x: &[f64],
        xp: &[f64],
        xi: &[f64],
    ) -> Result<Complex64>;
}

/// Real field lifted to the complex trait.
pub struct RealAsCx(pub Arc<dyn RealField3>);

impl CxField3 for RealAsCx {
    fn eval_deriv(
        &self,
        bx: &[u32],
        bxp: &[u32],
        axi: &[u32],
        x: &[f64],
        xp: &[f64],
        xi: &[f64],
    ) -> Result<Complex64> {
        Ok(Complex64::new(self.0.eval_deriv(bx, bxp, axi, x, xp, xi)?, 0.0))
    }
}

/// Differentiation slot: a coordinate of `x`, `x'` or `xi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    X(usize),
    Xp(usize),
    Xi(usize),
}

/// Expression over field leaves, closed under differentiation.
#[derive(Clone)]
pub enum Expr {
    Const(Complex64),
    Leaf {
        f: Arc<dyn CxField3>,
        bx: MultiIndex,
        bxp: MultiIndex,
        axi: MultiIndex,
    },
    Sum(Vec<Expr>),
    Prod(Vec<Expr>),
    Scale(Complex64, Box<Expr>),
    Conj(Box<Expr>),
}

impl Expr {
    pub fn leaf(f: Arc<dyn CxField3>, dim: usize) -> Expr {
        Expr::Leaf {
            f,
            bx: vec![0; dim],
            bxp: vec![0; dim],
            axi: vec![0; dim],
        }
    }

    pub fn zero() -> Expr {
        Expr::Const(Complex64::new(0.0, 0.0))
    }

    /// Exact derivative along one slot coordinate.
    pub fn differentiate(&self, s: Slot) -> Expr {
        match self {
            Expr::Const(_) => Expr::zero(),
            Expr::Leaf { f, bx, bxp, axi } => {
                let (mut bx, mut bxp, mut axi) = (bx.clone(), bxp.clone(), axi.clone());
                match s {
                    Slot::X(i) => bx[i] += 1,
                    Slot::Xp(i) => bxp[i] += 1,
                    Slot::Xi(i) => axi[i] += 1,
                }
                Expr::Leaf { f: f.clone(), bx, bxp, axi }
            }
            Expr::Sum(v) => Expr::Sum(v.iter().map(|e| e.differentiate(s)).collect()),
            Expr::Prod(v) => {
                let mut out = Vec::with_capacity(v.len());
                for (i, _) in v.iter().enumerate() {
                    let mut fs = v.clone();
                    fs[i] = fs[i].differentiate(s);
                    out.push(Expr::Prod(fs));
                }
                Expr::Sum(out)
            }
            Expr::Scale(c, e) => Expr::Scale(*c, Box::new(e.differentiate(s))),
            Expr::Conj(e) => Expr::Conj(Box::new(e.differentiate(s))),
        }
    }

    /// Derivative by a multi-index in the given slot family.
    pub fn differentiate_multi(&self, alpha: &[u32], family: fn(usize) -> Slot) -> Expr {
        let mut e = self.clone();
        for (i, &k) in alpha.iter().enumerate() {
            for _ in 0..k {
                e = e.differentiate(family(i));
            }
        }
        e
    }

    pub fn eval(&self, x: &[f64], xp: &[f64], xi: &[f64]) -> Result<Complex64> {
        match self {
            Expr::Const(c) => Ok(*c),
            Expr::Leaf { f, bx, bxp, axi } => f.eval_deriv(bx, bxp, axi, x, xp, xi),
            Expr::Sum(v) => {
                let mut s = Complex64::new(0.0, 0.0);
                for e in v {
                    s += e.eval(x, xp, xi)?;
                }
                Ok(s)
            }
            Expr::Prod(v) => {
                let mut p = Complex64::new(1.0, 0.0);
                for e in v {
                    p *= e.eval(x, xp, xi)?;
                }
                Ok(p)
            }
            Expr::Scale(c, e) => Ok(*c * e.eval(x, xp, xi)?),
            Expr::Conj(e) => Ok(e.eval(x, xp, xi)?.conj()),
        }
    }
}

/// `exp(i * mult * Theta) * body` with a shared real phase `Theta`.
/// Differentiation keeps the oscillating factor out front; products and
/// conjugates track the integer multiplicity, so same-phase products whose
/// multiplicities cancel collapse to plain expressions automatically.
#[derive(Clone)]
pub struct OscExpr {
    pub phase: Option<Arc<dyn RealField3>>,
    pub mult: i32,
    pub body: Expr,
    pub dim: usize,
}

impl OscExpr {
    pub fn plain(body: Expr, dim: usize) -> OscExpr {
        OscExpr { phase: None, mult: 0, body, dim }
    }

    pub fn oscillating(phase: Arc<dyn RealField3>, body: Expr, dim: usize) -> OscExpr {
        OscExpr { phase: Some(phase), mult: 1, body, dim }
    }

    fn phase_leaf(&self, s: Slot) -> Expr {
        let phase = self.phase.as_ref().expect("phase leaf without phase").clone();
        let (mut bx, mut bxp, mut axi) =
            (vec![0u32; self.dim], vec![0u32; self.dim], vec![0u32; self.dim]);
        match s {
            Slot::X(i) => bx[i] += 1,
            Slot::Xp(i) => bxp[i] += 1,
            Slot::Xi(i) => axi[i] += 1,
        }
        Expr::Leaf { f: Arc::new(RealAsCx(phase)), bx, bxp, axi }
    }

    /// d/ds [e^{i m Theta} B] = e^{i m Theta} (i m dTheta/ds B + dB/ds).
    pub fn differentiate(&self, s: Slot) -> OscExpr {
        let mut body = self.body.differentiate(s);
        if self.mult != 0 {
            let im = Complex64::new(0.0, self.mult as f64);
            body = Expr::Sum(vec![
                Expr::Scale(im, Box::new(Expr::Prod(vec![self.phase_leaf(s), self.body.clone()]))),
                body,
            ]);
        }
        OscExpr { phase: self.phase.clone(), mult: self.mult, body, dim: self.dim }
    }

    pub fn differentiate_multi(&self, alpha: &[u32], family: fn(usize) -> Slot) -> OscExpr {
        let mut e = self.clone();
        for (i, &k) in alpha.iter().enumerate() {
            for _ in 0..k {
                e = e.differentiate(family(i));
            }
        }
        e
    }

    /// `D^alpha = (-i d/ds)^{alpha}` along a slot family.
    pub fn d_multi(&self, alpha: &[u32], family: fn(usize) -> Slot) -> OscExpr {
        let mut e = self.differentiate_multi(alpha, family);
        let phase_pow = multi::order(alpha);
        let c = Complex64::new(0.0, -1.0).powu(phase_pow);
        e.body = Expr::Scale(c, Box::new(e.body));
        e
    }

    pub fn conj(&self) -> OscExpr {
        OscExpr {
            phase: self.phase.clone(),
            mult: -self.mult,
            body: Expr::Conj(Box::new(self.body.clone())),
            dim: self.dim,
        }
    }

    /// Product of expressions sharing the same phase object (or plain ones).
    pub fn mul(&self, other: &OscExpr) -> Result<OscExpr> {
        let (phase, mult) = match (&self.phase, &other.phase) {
            (None, None) => (None, 0),
            (Some(p), None) => (Some(p.clone()), self.mult),
            (None, Some(q)) => (Some(q.clone()), other.mult),
            (Some(p), Some(q)) => {
                if !Arc::ptr_eq(p, q) {
                    return Err(Error::Precondition(
                        "product requires the same phase object for both factors".into(),
                    ));
                }
                let m = self.mult + other.mult;
                (if m == 0 { None } else { Some(p.clone()) }, m)
            }
        };
        let mult = if phase.is_none() { 0 } else { mult };
        Ok(OscExpr {
            phase,
            mult,
            body: Expr::Prod(vec![self.body.clone(), other.body.clone()]),
            dim: self.dim,
        })
    }

    /// Value including the oscillating factor.
    pub fn eval(&self, x: &[f64], xp: &[f64], xi: &[f64]) -> Result<Complex64> {
        let b = self.body.eval(x, xp, xi)?;
        match (&self.phase, self.mult) {
            (Some(p), m) if m != 0 => {
                let zero = vec![0u32; self.dim];
                let th = p.eval_deriv(&zero, &zero, &zero, x, xp, xi)?;
                Ok(Complex64::from_polar(1.0, m as f64 * th) * b)
            }
            _ => Ok(b),
        }
    }

    /// Value of the body alone (the oscillating factor stripped).
    pub fn eval_body(&self, x: &[f64], xp: &[f64], xi: &[f64]) -> Result<Complex64> {
        self.body.eval(x, xp, xi)
    }

    pub fn is_plain(&self) -> bool {
        self.mult == 0 || self.phase.is_none()
    }
}

/// Nested central finite differences for fields supplied as plain closures.
/// Step `h` is scaled by `1 + |xi|` in the frequency slot.
pub struct FdCxField<F: Fn(&[f64], &[f64], &[f64]) -> Complex64 + Send + Sync> {
    pub f: F,
    pub h: f64,
}

impl<F: Fn(&[f64], &[f64], &[f64]) -> Complex64 + Send + Sync> FdCxField<F> {
    fn diff(
        &self,
        bx: &[u32],
        bxp: &[u32],
        axi: &[u32],
        x: &[f64],
        xp: &[f64],
        xi: &[f64],
    ) -> Complex64 {
        // Find the first remaining derivative and recurse on a shifted point.
        let norm = xi.iter().map(|t| t * t).sum::<f64>().sqrt();
        for (i, &k) in bx.iter().enumerate() {
            if k > 0 {
                let mut lower = bx.to_vec();
                lower[i] -= 1;
                return self.stencil(|t| {
                    let mut y = x.to_vec();
                    y[i] = t;
                    self.diff(&lower, bxp, axi, &y, xp, xi)
                }, x[i], self.h);
            }
        }
        for (i, &k) in bxp.iter().enumerate() {
            if k > 0 {
                let mut lower = bxp.to_vec();
                lower[i] -= 1;
                return self.stencil(|t| {
                    let mut y = xp.to_vec();
                    y[i] = t;
                    self.diff(bx, &lower, axi, x, &y, xi)
                }, xp[i], self.h);
            }
        }
        for (i, &k) in axi.iter().enumerate() {
            if k > 0 {
                let mut lower = axi.to_vec();
                lower[i] -= 1;
                let h = self.h * (1.0 + norm);
                return self.stencil(|t| {
                    let mut y = xi.to_vec();
                    y[i] = t;
                    self.diff(bx, bxp, &lower, x, xp, &y)
                }, xi[i], h);
            }
        }
        (self.f)(x, xp, xi)
    }

    fn stencil<G: Fn(f64) -> Complex64>(&self, g: G, t: f64, h: f64) -> Complex64 {
        (-g(t + 2.0 * h) + 8.0 * g(t + h) - 8.0 * g(t - h) + g(t - 2.0 * h)) / (12.0 * h)
    }
}

impl<F: Fn(&[f64], &[f64], &[f64]) -> Complex64 + Send + Sync> CxField3 for FdCxField<F> {
    fn eval_deriv(
        &self,
        bx: &[u32],
        bxp: &[u32],
        axi: &[u32],
        x: &[f64],
        xp: &[f64],
        xi: &[f64],
    ) -> Result<Complex64> {
        let total = multi::order(bx) + multi::order(bxp) + multi::order(axi);
        if total > 3 {
            return Err(Error::UnsupportedDerivative(format!(
                "finite-difference fallback is limited to total order 3, got {total}"
            )));
        }
        Ok(self.diff(bx, bxp, axi, x, xp, xi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// f(x, x', xi) = x_0^2 * xi_0 with exact derivatives, for engine checks.
    struct Monomial;
    impl CxField3 for Monomial {
        fn eval_deriv(
            &self,
            bx: &[u32],
            bxp: &[u32],
            axi: &[u32],
            x: &[f64],
            _xp: &[f64],
            xi: &[f64],
        ) -> Result<Complex64> {
            if bxp.iter().any(|&k| k > 0) {
                return Ok(Complex64::new(0.0, 0.0));
            }
            let v = match (bx[0], axi[0]) {
                (0, 0) => x[0] * x[0] * xi[0],
                (1, 0) => 2.0 * x[0] * xi[0],
                (2, 0) => 2.0 * xi[0],
                (0, 1) => x[0] * x[0],
                (1, 1) => 2.0 * x[0],
                (2, 1) => 2.0,
                _ => 0.0,
            };
            Ok(Complex64::new(v, 0.0))
        }
    }

    struct PhaseXxXi; // Theta = x_0 * xi_0
    impl RealField3 for PhaseXxXi {
        fn eval_deriv(
            &self,
            bx: &[u32],
            bxp: &[u32],
            axi: &[u32],
            x: &[f64],
            _xp: &[f64],
            xi: &[f64],
        ) -> Result<f64> {
            if bxp.iter().any(|&k| k > 0) {
                return Ok(0.0);
            }
            Ok(match (bx[0], axi[0]) {
                (0, 0) => x[0] * xi[0],
                (1, 0) => xi[0],
                (0, 1) => x[0],
                (1, 1) => 1.0,
                _ => 0.0,
            })
        }
    }

    #[test]
    fn product_rule() {
        let f = Expr::leaf(Arc::new(Monomial), 1);
        let p = Expr::Prod(vec![f.clone(), f.clone()]);
        // d/dx (x^2 xi)^2 = 2 * (x^2 xi) * 2 x xi = 4 x^3 xi^2
        let d = p.differentiate(Slot::X(0));
        let v = d.eval(&[2.0], &[0.0], &[3.0]).unwrap();
        assert!((v.re - 4.0 * 8.0 * 9.0).abs() < 1e-12);
    }

    #[test]
    fn oscillating_derivative() {
        // a = e^{i x xi}, da/dx = i xi e^{i x xi}
        let phase: Arc<dyn RealField3> = Arc::new(PhaseXxXi);
        let a = OscExpr::oscillating(phase, Expr::Const(Complex64::new(1.0, 0.0)), 1);
        let da = a.differentiate(Slot::X(0));
        let (x, xi) = (0.7, 2.0);
        let v = da.eval(&[x], &[0.0], &[xi]).unwrap();
        let expect = Complex64::new(0.0, xi) * Complex64::from_polar(1.0, x * xi);
        assert!((v - expect).norm() < 1e-14);
    }

    #[test]
    fn conjugate_product_cancels_phase() {
        let phase: Arc<dyn RealField3> = Arc::new(PhaseXxXi);
        let b = Expr::leaf(Arc::new(Monomial), 1);
        let a = OscExpr::oscillating(phase, b, 1);
        let prod = a.mul(&a.conj()).unwrap();
        assert!(prod.is_plain());
        // |a|^2 = (x^2 xi)^2
        let v = prod.eval(&[2.0], &[0.0], &[3.0]).unwrap();
        assert!((v.re - 144.0).abs() < 1e-12 && v.im.abs() < 1e-15);
    }

    #[test]
    fn distinct_phases_refuse_product() {
        let p1: Arc<dyn RealField3> = Arc::new(PhaseXxXi);
        let p2: Arc<dyn RealField3> = Arc::new(PhaseXxXi);
        let a = OscExpr::oscillating(p1, Expr::Const(Complex64::new(1.0, 0.0)), 1);
        let b = OscExpr::oscillating(p2, Expr::Const(Complex64::new(1.0, 0.0)), 1);
        assert!(a.mul(&b).is_err());
    }

    #[test]
    fn fd_fallback_first_derivative() {
        let f = FdCxField {
            f: |x: &[f64], _: &[f64], xi: &[f64]| Complex64::new((x[0] * xi[0]).sin(), 0.0),
            h: 1e-4,
        };
        let v = f
            .eval_deriv(&[1], &[0], &[0], &[0.5], &[0.0], &[2.0])
            .unwrap();
        assert!((v.re - 2.0 * (0.5f64 * 2.0).cos()).abs() < 1e-8);
    }
}
