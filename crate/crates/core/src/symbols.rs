//! Phases, symbols and amplitudes with declared class data and exact
//! derivative oracles, plus empirical seminorm probes.
//!
//! The shipped models are separable: a product of per-axis spatial profiles
//! and a frequency part that is either per-axis, radial `g(|xi|)`, a power
//! `(1+|xi|^2)^{m/2}`, or a smoothly truncated linear form. Radial and power
//! parts differentiate through a small closed term algebra, so the oracles
//! are analytic in every dimension.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::{CxField3, Expr, OscExpr, RealAsCx, RealField3};
use crate::multi::{self, MultiIndex};
use crate::smooth::{
    CutoffStep, FractionalPower, Plateau, Poly1D, ProfileProduct, SmoothBump,
    SmoothProfile,
};

/// Declared symbol class `S^m_{rho,delta}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolClass {
    pub m: f64,
    pub rho: f64,
    pub delta: f64,
}

impl SymbolClass {
    /// Exponent of the seminorm weight for derivative orders `(alpha, beta)`:
    /// the class bound is `(1+|xi|)^{m - rho |alpha| + delta |beta|}`.
    pub fn weight_exponent(&self, alpha: &[u32], beta: &[u32]) -> f64 {
        self.m - self.rho * multi::order(alpha) as f64 + self.delta * multi::order(beta) as f64
    }
}

/// One-dimensional profile evaluated as `p((t - center)/width)`.
#[derive(Clone)]
pub struct AxisProfile {
    pub profile: Arc<dyn SmoothProfile>,
    pub center: f64,
    pub width: f64,
}

impl AxisProfile {
    pub fn new(profile: Arc<dyn SmoothProfile>, center: f64, width: f64) -> Self {
        assert!(width > 0.0, "axis profile needs positive width");
        AxisProfile { profile, center, width }
    }

    pub fn eval_deriv(&self, t: f64, k: u32) -> f64 {
        self.profile.eval_deriv((t - self.center) / self.width, k as usize)
            / self.width.powi(k as i32)
    }
}

/// Frequency factor of a separable model field.
#[derive(Clone)]
pub enum XiPart {
    One,
    PerAxis(Vec<AxisProfile>),
    /// `g(|xi|)`; identically zero (with all derivatives) for `|xi| <= vanish_below`.
    Radial { g: Arc<dyn SmoothProfile>, vanish_below: f64 },
    /// `(1 + |xi|^2)^{m/2}`.
    Power { m: f64 },
    /// `<c, xi> * q(|xi|)` with a plateau truncation `q`.
    LinearTruncated { c: Vec<f64>, q: Arc<dyn SmoothProfile> },
}

/// Term of the radial derivative algebra:
/// `coeff * g^(j)(rho) * xi^beta * rho^(-p)`.
#[derive(Debug, Clone)]
struct RTerm {
    coeff: f64,
    j: usize,
    beta: MultiIndex,
    p: i32,
}

fn radial_terms(seed: Vec<(f64, MultiIndex)>, alpha: &[u32]) -> Vec<RTerm> {
    let mut terms: Vec<RTerm> = seed
        .into_iter()
        .map(|(coeff, beta)| RTerm { coeff, j: 0, beta, p: 0 })
        .collect();
    for (i, &k) in alpha.iter().enumerate() {
        for _ in 0..k {
            let mut next: Vec<RTerm> = Vec::with_capacity(terms.len() * 3);
            for t in &terms {
                // chain through g(rho): g^(j+1) * xi_i / rho
                next.push(RTerm {
                    coeff: t.coeff,
                    j: t.j + 1,
                    beta: multi::bump(&t.beta, i),
                    p: t.p + 1,
                });
                // monomial factor
                if t.beta[i] > 0 {
                    next.push(RTerm {
                        coeff: t.coeff * t.beta[i] as f64,
                        j: t.j,
                        beta: multi::lower(&t.beta, i).unwrap(),
                        p: t.p,
                    });
                }
                // rho^{-p} factor
                if t.p != 0 {
                    next.push(RTerm {
                        coeff: -t.coeff * t.p as f64,
                        j: t.j,
                        beta: multi::bump(&t.beta, i),
                        p: t.p + 2,
                    });
                }
            }
            // merge duplicates to keep the list short
            let mut merged: Vec<RTerm> = Vec::new();
            'outer: for t in next {
                for m in &mut merged {
                    if m.j == t.j && m.p == t.p && m.beta == t.beta {
                        m.coeff += t.coeff;
                        continue 'outer;
                    }
                }
                merged.push(t);
            }
            terms = merged;
        }
    }
    terms
}

fn eval_radial(g: &dyn SmoothProfile, vanish_below: f64, seed: Vec<(f64, MultiIndex)>, alpha: &[u32], xi: &[f64]) -> f64 {
    let rho = xi.iter().map(|t| t * t).sum::<f64>().sqrt();
    if rho <= vanish_below {
        return 0.0;
    }
    let mut sum = 0.0;
    for t in radial_terms(seed, alpha) {
        let gj = g.eval_deriv(rho, t.j);
        if gj == 0.0 {
            continue; // also guards rho^{-p} at the origin in flat regions
        }
        sum += t.coeff * gj * multi::monomial(xi, &t.beta) * rho.powi(-t.p);
    }
    sum
}

/// Term of the power derivative algebra:
/// `coeff * (1+|xi|^2)^{q - s} * xi^beta`.
fn eval_power(q: f64, alpha: &[u32], xi: &[f64]) -> f64 {
    let d = xi.len();
    let mut terms: Vec<(f64, u32, MultiIndex)> = vec![(1.0, 0, vec![0; d])];
    for (i, &k) in alpha.iter().enumerate() {
        for _ in 0..k {
            let mut next = Vec::with_capacity(terms.len() * 2);
            for (c, s, beta) in &terms {
                next.push((2.0 * c * (q - *s as f64), s + 1, multi::bump(beta, i)));
                if beta[i] > 0 {
                    next.push((c * beta[i] as f64, *s, multi::lower(beta, i).unwrap()));
                }
            }
            terms = next;
        }
    }
    let rho2: f64 = xi.iter().map(|t| t * t).sum();
    terms
        .iter()
        .map(|(c, s, beta)| c * (1.0 + rho2).powf(q - *s as f64) * multi::monomial(xi, beta))
        .sum()
}

impl XiPart {
    fn eval_deriv(&self, alpha: &[u32], xi: &[f64]) -> f64 {
        match self {
            XiPart::One => {
                if multi::order(alpha) == 0 {
                    1.0
                } else {
                    0.0
                }
            }
            XiPart::PerAxis(ps) => ps
                .iter()
                .zip(alpha.iter().zip(xi))
                .map(|(p, (&k, &t))| p.eval_deriv(t, k))
                .product(),
            XiPart::Radial { g, vanish_below } => {
                let seed = vec![(1.0, vec![0; xi.len()])];
                eval_radial(g.as_ref(), *vanish_below, seed, alpha, xi)
            }
            XiPart::Power { m } => eval_power(m / 2.0, alpha, xi),
            XiPart::LinearTruncated { c, q } => {
                let seed: Vec<(f64, MultiIndex)> = c
                    .iter()
                    .enumerate()
                    .filter(|(_, &ci)| ci != 0.0)
                    .map(|(i, &ci)| {
                        let mut beta = vec![0u32; xi.len()];
                        beta[i] = 1;
                        (ci, beta)
                    })
                    .collect();
                eval_radial(q.as_ref(), 0.0, seed, alpha, xi)
            }
        }
    }
}

/// Separable real field `amp * prod_i px_i(x_i) * prod_i pxp_i(x'_i) * xi_part(xi)`.
/// Empty profile slots are the constant 1 (so their derivatives vanish).
#[derive(Clone)]
pub struct SeparableField {
    pub dim: usize,
    pub amp: f64,
    pub x_part: Option<Vec<AxisProfile>>,
    pub xp_part: Option<Vec<AxisProfile>>,
    pub xi_part: XiPart,
}

fn space_factor(part: &Option<Vec<AxisProfile>>, beta: &[u32], pt: &[f64]) -> f64 {
    match part {
        None => {
            if multi::order(beta) == 0 {
                1.0
            } else {
                0.0
            }
        }
        Some(ps) => ps
            .iter()
            .zip(beta.iter().zip(pt))
            .map(|(p, (&k, &t))| p.eval_deriv(t, k))
            .product(),
    }
}

impl RealField3 for SeparableField {
    fn eval_deriv(
        &self,
        bx: &[u32],
        bxp: &[u32],
        axi: &[u32],
        x: &[f64],
        xp: &[f64],
        xi: &[f64],
    ) -> Result<f64> {
        let fx = space_factor(&self.x_part, bx, x);
        if fx == 0.0 {
            return Ok(0.0);
        }
        let fxp = space_factor(&self.xp_part, bxp, xp);
        if fxp == 0.0 {
            return Ok(0.0);
        }
        Ok(self.amp * fx * fxp * self.xi_part.eval_deriv(axi, xi))
    }
}

/// Sum of real fields.
pub struct SumField(pub Vec<Arc<dyn RealField3>>);

impl RealField3 for SumField {
    fn eval_deriv(
        &self,
        bx: &[u32],
        bxp: &[u32],
        axi: &[u32],
        x: &[f64],
        xp: &[f64],
        xi: &[f64],
    ) -> Result<f64> {
        let mut s = 0.0;
        for f in &self.0 {
            s += f.eval_deriv(bx, bxp, axi, x, xp, xi)?;
        }
        Ok(s)
    }
}

/// Real field scaled into the complex plane.
pub struct CxScaled {
    pub c: Complex64,
    pub f: Arc<dyn RealField3>,
}

impl CxField3 for CxScaled {
    fn eval_deriv(
        &self,
        bx: &[u32],
        bxp: &[u32],
        axi: &[u32],
        x: &[f64],
        xp: &[f64],
        xi: &[f64],
    ) -> Result<Complex64> {
        Ok(self.c * self.f.eval_deriv(bx, bxp, axi, x, xp, xi)?)
    }
}

/// Swap the two spatial slots of a field: `g(x, x', xi) = f(x', x, xi)`.
pub struct SwappedField(pub Arc<dyn RealField3>);

impl RealField3 for SwappedField {
    fn eval_deriv(
        &self,
        bx: &[u32],
        bxp: &[u32],
        axi: &[u32],
        x: &[f64],
        xp: &[f64],
        xi: &[f64],
    ) -> Result<f64> {
        self.0.eval_deriv(bxp, bx, axi, xp, x, xi)
    }
}

/// Smooth scalar phase `Phi(x, xi)` with declared order `r` in `[0, 1)`.
#[derive(Clone)]
pub struct PhaseFunction {
    pub dim: usize,
    pub order_r: f64,
    pub field: Arc<dyn RealField3>,
    zeros: MultiIndex,
}

impl PhaseFunction {
    pub fn new(dim: usize, order_r: f64, field: Arc<dyn RealField3>) -> Result<Self> {
        if !(0.0..1.0).contains(&order_r) {
            return Err(Error::Domain(format!(
                "phase order r = {order_r} outside [0, 1)"
            )));
        }
        Ok(PhaseFunction { dim, order_r, field, zeros: vec![0; dim] })
    }

    pub fn eval(&self, x: &[f64], xi: &[f64]) -> f64 {
        self.field
            .eval_deriv(&self.zeros, &self.zeros, &self.zeros, x, x, xi)
            .expect("order-0 phase evaluation cannot fail")
    }

    /// `d^alpha_xi d^beta_x Phi`.
    pub fn deriv(&self, alpha: &[u32], beta: &[u32], x: &[f64], xi: &[f64]) -> Result<f64> {
        self.field.eval_deriv(beta, &self.zeros, alpha, x, x, xi)
    }

    pub fn grad_xi(&self, x: &[f64], xi: &[f64]) -> Result<Vec<f64>> {
        (0..self.dim)
            .map(|i| {
                let mut a = self.zeros.clone();
                a[i] = 1;
                self.deriv(&a, &self.zeros, x, xi)
            })
            .collect()
    }

    pub fn grad_x(&self, x: &[f64], xi: &[f64]) -> Result<Vec<f64>> {
        (0..self.dim)
            .map(|i| {
                let mut b = self.zeros.clone();
                b[i] = 1;
                self.deriv(&self.zeros, &b, x, xi)
            })
            .collect()
    }

    /// Class of the phase itself: `S^r_{1,0}` restricted to compacts.
    pub fn class(&self) -> SymbolClass {
        SymbolClass { m: self.order_r, rho: 1.0, delta: 0.0 }
    }
}

/// Doubled-argument phase `Theta(x, x', xi)`.
#[derive(Clone)]
pub struct AmplitudePhase {
    pub dim: usize,
    pub order_r: f64,
    pub field: Arc<dyn RealField3>,
    zeros: MultiIndex,
}

struct DiagonalField(Arc<dyn RealField3>);

impl RealField3 for DiagonalField {
    fn eval_deriv(
        &self,
        bx: &[u32],
        bxp: &[u32],
        axi: &[u32],
        x: &[f64],
        _xp: &[f64],
        xi: &[f64],
    ) -> Result<f64> {
        if multi::order(bxp) > 0 {
            return Err(Error::UnsupportedDerivative(
                "diagonal restriction has a single spatial slot".into(),
            ));
        }
        // total derivative of x -> f(x, x, xi): Leibniz sum over slot splits
        let mut v = 0.0;
        for gamma in multi::sub_indices(bx) {
            let rest = multi::sub(bx, &gamma);
            v += multi::choose(bx, &gamma) * self.0.eval_deriv(&gamma, &rest, axi, x, x, xi)?;
        }
        Ok(v)
    }
}

struct DiffField(Arc<dyn RealField3>);

impl RealField3 for DiffField {
    fn eval_deriv(
        &self,
        bx: &[u32],
        bxp: &[u32],
        axi: &[u32],
        x: &[f64],
        xp: &[f64],
        xi: &[f64],
    ) -> Result<f64> {
        let zeros = vec![0u32; x.len()];
        let mut v = 0.0;
        if multi::order(bxp) == 0 {
            v += self.0.eval_deriv(bx, &zeros, axi, x, x, xi)?;
        }
        if multi::order(bx) == 0 {
            v -= self.0.eval_deriv(bxp, &zeros, axi, xp, xp, xi)?;
        }
        Ok(v)
    }
}

impl AmplitudePhase {
    pub fn new(dim: usize, order_r: f64, field: Arc<dyn RealField3>) -> Result<Self> {
        if !(0.0..1.0).contains(&order_r) {
            return Err(Error::Domain(format!(
                "phase order r = {order_r} outside [0, 1)"
            )));
        }
        Ok(AmplitudePhase { dim, order_r, field, zeros: vec![0; dim] })
    }

    /// `Theta(x, x', xi) = Phi(x, xi) - Phi(x', xi)` (vanishes on the diagonal).
    pub fn difference(phi: &PhaseFunction) -> Self {
        AmplitudePhase {
            dim: phi.dim,
            order_r: phi.order_r,
            field: Arc::new(DiffField(phi.field.clone())),
            zeros: vec![0; phi.dim],
        }
    }

    /// `Theta(x, x', xi) = Phi(x, xi)` (independent of `x'`).
    pub fn from_phase(phi: &PhaseFunction) -> Self {
        AmplitudePhase {
            dim: phi.dim,
            order_r: phi.order_r,
            field: phi.field.clone(),
            zeros: vec![0; phi.dim],
        }
    }

    /// `Theta = (Phi(x, xi) + Phi(x', xi)) / 2` (symmetric, nonzero diagonal).
    pub fn average(phi: &PhaseFunction) -> Self {
        let swapped: Arc<dyn RealField3> = Arc::new(SwappedField(phi.field.clone()));
        let sum = SumField(vec![phi.field.clone(), swapped]);
        let half = SeparableField {
            dim: phi.dim,
            amp: 0.5,
            x_part: None,
            xp_part: None,
            xi_part: XiPart::One,
        };
        let field: Arc<dyn RealField3> = Arc::new(ProductReal(Arc::new(half), Arc::new(sum)));
        AmplitudePhase {
            dim: phi.dim,
            order_r: phi.order_r,
            field,
            zeros: vec![0; phi.dim],
        }
    }

    /// Diagonal restriction `Phi(x, xi) = Theta(x, x, xi)` as a single-slot
    /// phase; spatial derivatives are total derivatives across both slots.
    pub fn diagonal(&self) -> PhaseFunction {
        PhaseFunction {
            dim: self.dim,
            order_r: self.order_r,
            field: Arc::new(DiagonalField(self.field.clone())),
            zeros: self.zeros.clone(),
        }
    }

    pub fn eval(&self, x: &[f64], xp: &[f64], xi: &[f64]) -> f64 {
        self.field
            .eval_deriv(&self.zeros, &self.zeros, &self.zeros, x, xp, xi)
            .expect("order-0 phase evaluation cannot fail")
    }

    /// `d^beta_x d^{beta'}_{x'} d^alpha_xi Theta`.
    pub fn deriv(
        &self,
        beta: &[u32],
        betap: &[u32],
        alpha: &[u32],
        x: &[f64],
        xp: &[f64],
        xi: &[f64],
    ) -> Result<f64> {
        self.field.eval_deriv(beta, betap, alpha, x, xp, xi)
    }
}

/// Pointwise product of two real fields (multi-slot Leibniz).
pub struct ProductReal(pub Arc<dyn RealField3>, pub Arc<dyn RealField3>);

impl RealField3 for ProductReal {
    fn eval_deriv(
        &self,
        bx: &[u32],
        bxp: &[u32],
        axi: &[u32],
        x: &[f64],
        xp: &[f64],
        xi: &[f64],
    ) -> Result<f64> {
        // Leibniz over all three slots; orders are small in practice.
        let mut total = 0.0;
        for gx in multi::sub_indices(bx) {
            for gxp in multi::sub_indices(bxp) {
                for gxi in multi::sub_indices(axi) {
                    let c = multi::choose(bx, &gx)
                        * multi::choose(bxp, &gxp)
                        * multi::choose(axi, &gxi);
                    let a = self.0.eval_deriv(&gx, &gxp, &gxi, x, xp, xi)?;
                    if a == 0.0 {
                        continue;
                    }
                    let b = self.1.eval_deriv(
                        &multi::sub(bx, &gx),
                        &multi::sub(bxp, &gxp),
                        &multi::sub(axi, &gxi),
                        x,
                        xp,
                        xi,
                    )?;
                    total += c * a * b;
                }
            }
        }
        Ok(total)
    }
}

/// `a(x, xi) = e^{i Phi(x, xi)} b(x, xi)`; `phase = None` is a plain symbol.
#[derive(Clone)]
pub struct OscillatingSymbol {
    pub dim: usize,
    pub order_m: f64,
    pub phase: Option<Arc<PhaseFunction>>,
    pub base: Arc<dyn CxField3>,
    pub support: Option<Vec<(f64, f64)>>,
    zeros: MultiIndex,
}

impl OscillatingSymbol {
    pub fn plain(dim: usize, order_m: f64, base: Arc<dyn CxField3>) -> Self {
        OscillatingSymbol { dim, order_m, phase: None, base, support: None, zeros: vec![0; dim] }
    }

    pub fn oscillating(phase: Arc<PhaseFunction>, order_m: f64, base: Arc<dyn CxField3>) -> Self {
        let dim = phase.dim;
        OscillatingSymbol {
            dim,
            order_m,
            phase: Some(phase),
            base,
            support: None,
            zeros: vec![0; dim],
        }
    }

    pub fn with_support(mut self, support: Vec<(f64, f64)>) -> Self {
        self.support = Some(support);
        self
    }

    /// Order parameter `r` of the oscillation (0 for plain symbols).
    pub fn order_r(&self) -> f64 {
        self.phase.as_ref().map_or(0.0, |p| p.order_r)
    }

    /// Class of the full symbol: `S^m_{1-r, r}`.
    pub fn class(&self) -> SymbolClass {
        let r = self.order_r();
        SymbolClass { m: self.order_m, rho: 1.0 - r, delta: r }
    }

    pub fn base_eval(&self, x: &[f64], xi: &[f64]) -> Complex64 {
        self.base
            .eval_deriv(&self.zeros, &self.zeros, &self.zeros, x, x, xi)
            .expect("order-0 symbol evaluation cannot fail")
    }

    pub fn eval(&self, x: &[f64], xi: &[f64]) -> Complex64 {
        let b = self.base_eval(x, xi);
        match &self.phase {
            Some(p) => Complex64::from_polar(1.0, p.eval(x, xi)) * b,
            None => b,
        }
    }

    /// Expression form for the exact calculus.
    pub fn expr(&self) -> OscExpr {
        let body = Expr::leaf(self.base.clone(), self.dim);
        match &self.phase {
            Some(p) => OscExpr::oscillating(p.field.clone(), body, self.dim),
            None => OscExpr::plain(body, self.dim),
        }
    }

    /// True when both symbols carry the same phase object (or none).
    pub fn shares_phase(&self, other: &OscillatingSymbol) -> bool {
        match (&self.phase, &other.phase) {
            (None, None) => true,
            (Some(p), Some(q)) => Arc::ptr_eq(p, q),
            _ => false,
        }
    }
}

/// `a(x, x', xi) = e^{i Theta(x, x', xi)} b(x, x', xi)`.
#[derive(Clone)]
pub struct OscillatingAmplitude {
    pub dim: usize,
    pub order_m: f64,
    pub phase: Option<Arc<AmplitudePhase>>,
    pub base: Arc<dyn CxField3>,
    zeros: MultiIndex,
}

impl OscillatingAmplitude {
    pub fn plain(dim: usize, order_m: f64, base: Arc<dyn CxField3>) -> Self {
        OscillatingAmplitude { dim, order_m, phase: None, base, zeros: vec![0; dim] }
    }

    pub fn oscillating(
        phase: Arc<AmplitudePhase>,
        order_m: f64,
        base: Arc<dyn CxField3>,
    ) -> Self {
        let dim = phase.dim;
        OscillatingAmplitude { dim, order_m, phase: Some(phase), base, zeros: vec![0; dim] }
    }

    pub fn order_r(&self) -> f64 {
        self.phase.as_ref().map_or(0.0, |p| p.order_r)
    }

    pub fn base_eval(&self, x: &[f64], xp: &[f64], xi: &[f64]) -> Complex64 {
        self.base
            .eval_deriv(&self.zeros, &self.zeros, &self.zeros, x, xp, xi)
            .expect("order-0 amplitude evaluation cannot fail")
    }

    pub fn phase_eval(&self, x: &[f64], xp: &[f64], xi: &[f64]) -> f64 {
        self.phase.as_ref().map_or(0.0, |p| p.eval(x, xp, xi))
    }

    pub fn eval(&self, x: &[f64], xp: &[f64], xi: &[f64]) -> Complex64 {
        let b = self.base_eval(x, xp, xi);
        match &self.phase {
            Some(p) => Complex64::from_polar(1.0, p.eval(x, xp, xi)) * b,
            None => b,
        }
    }

    pub fn expr(&self) -> OscExpr {
        let body = Expr::leaf(self.base.clone(), self.dim);
        match &self.phase {
            Some(p) => OscExpr::oscillating(p.field.clone(), body, self.dim),
            None => OscExpr::plain(body, self.dim),
        }
    }
}

/// Spatial bump description shared by the model constructors.
/// `plateau_inner > 0` makes the profile identically 1 on that inner radius.
#[derive(Debug, Clone)]
pub struct BumpSpec {
    pub center: Vec<f64>,
    pub width: f64,
    pub plateau_inner: f64,
    pub amp: f64,
}

impl BumpSpec {
    pub fn new(center: Vec<f64>, width: f64) -> Self {
        BumpSpec { center, width, plateau_inner: 0.0, amp: 1.0 }
    }

    pub fn with_plateau(mut self, inner: f64) -> Self {
        self.plateau_inner = inner;
        self
    }

    pub fn with_amp(mut self, amp: f64) -> Self {
        self.amp = amp;
        self
    }

    pub fn profiles(&self) -> Vec<AxisProfile> {
        self.center
            .iter()
            .map(|&c| {
                let p: Arc<dyn SmoothProfile> = if self.plateau_inner > 0.0 {
                    Arc::new(Plateau::new(self.plateau_inner / self.width, 1.0))
                } else {
                    Arc::new(SmoothBump)
                };
                AxisProfile::new(p, c, self.width)
            })
            .collect()
    }
}

/// Model phase selector.
#[derive(Debug, Clone)]
pub enum PhaseModel {
    /// `Phi(x, xi) = v(x) chi(|xi|) |xi|^r` with `chi = 0` below `cutoff.0`
    /// and `chi = 1` above `cutoff.1`.
    LongRange { r: f64, bump: BumpSpec, cutoff: (f64, f64) },
    Zero { dim: usize },
    /// `Phi(x, xi) = <c, xi>` truncated smoothly beyond `|xi| = saturation`.
    Linear { c: Vec<f64>, saturation: f64 },
}

/// Construct a model phase with analytic derivative oracles.
pub fn model_phase(model: &PhaseModel) -> Result<PhaseFunction> {
    match model {
        PhaseModel::LongRange { r, bump, cutoff } => {
            if !(0.0..1.0).contains(r) {
                return Err(Error::Domain(format!("long_range r = {r} outside [0, 1)")));
            }
            if !(0.0 < cutoff.0 && cutoff.0 < cutoff.1) {
                return Err(Error::Domain("cutoff edges must satisfy 0 < lo < hi".into()));
            }
            let g: Arc<dyn SmoothProfile> = Arc::new(ProfileProduct(
                CutoffStep::new(cutoff.0, cutoff.1),
                FractionalPower { r: *r },
            ));
            let field = SeparableField {
                dim: bump.center.len(),
                amp: bump.amp,
                x_part: Some(bump.profiles()),
                xp_part: None,
                xi_part: XiPart::Radial { g, vanish_below: cutoff.0 },
            };
            PhaseFunction::new(bump.center.len(), *r, Arc::new(field))
        }
        PhaseModel::Zero { dim } => {
            let field = SeparableField {
                dim: *dim,
                amp: 0.0,
                x_part: None,
                xp_part: None,
                xi_part: XiPart::One,
            };
            PhaseFunction::new(*dim, 0.0, Arc::new(field))
        }
        PhaseModel::Linear { c, saturation } => {
            if *saturation <= 0.0 {
                return Err(Error::Domain("linear phase needs positive saturation".into()));
            }
            let q: Arc<dyn SmoothProfile> =
                Arc::new(Plateau::new(*saturation, 2.0 * saturation));
            let field = SeparableField {
                dim: c.len(),
                amp: 1.0,
                x_part: None,
                xp_part: None,
                xi_part: XiPart::LinearTruncated { c: c.clone(), q },
            };
            PhaseFunction::new(c.len(), 0.0, Arc::new(field))
        }
    }
}

/// Plain symbol `b(x, xi) = f(x) (1 + |xi|^2)^{m/2}` (`f = 1` when no bump).
pub fn base_power(dim: usize, m: f64, x_bump: Option<&BumpSpec>) -> OscillatingSymbol {
    let field = SeparableField {
        dim,
        amp: x_bump.map_or(1.0, |b| b.amp),
        x_part: x_bump.map(|b| b.profiles()),
        xp_part: None,
        xi_part: XiPart::Power { m },
    };
    let base: Arc<dyn CxField3> = Arc::new(RealAsCx(Arc::new(field)));
    let mut sym = OscillatingSymbol::plain(dim, m, base);
    if let Some(b) = x_bump {
        sym.support = Some(b.center.iter().map(|&c| (c - b.width, c + b.width)).collect());
    }
    sym
}

/// Constant symbol `b = value` (class `S^0`).
pub fn constant_symbol(dim: usize, value: Complex64) -> OscillatingSymbol {
    let one = SeparableField { dim, amp: 1.0, x_part: None, xp_part: None, xi_part: XiPart::One };
    let base: Arc<dyn CxField3> = Arc::new(CxScaled { c: value, f: Arc::new(one) });
    OscillatingSymbol::plain(dim, 0.0, base)
}

/// Symbol with separable per-axis frequency profiles (e.g. Gaussian in `xi`).
pub fn base_xi_profile(
    dim: usize,
    x_bump: Option<&BumpSpec>,
    xi_profiles: Vec<AxisProfile>,
    order_m: f64,
) -> OscillatingSymbol {
    let field = SeparableField {
        dim,
        amp: x_bump.map_or(1.0, |b| b.amp),
        x_part: x_bump.map(|b| b.profiles()),
        xp_part: None,
        xi_part: XiPart::PerAxis(xi_profiles),
    };
    let base: Arc<dyn CxField3> = Arc::new(RealAsCx(Arc::new(field)));
    OscillatingSymbol::plain(dim, order_m, base)
}

/// Symbol `b(x, xi) = f(x) g(|xi|)` with a radial annulus profile in `xi`
/// supported on `center - width <= |xi| <= center + width`.
pub fn base_xi_annulus(
    dim: usize,
    x_bump: Option<&BumpSpec>,
    center: f64,
    width: f64,
) -> Result<OscillatingSymbol> {
    if center - width < 0.0 {
        return Err(Error::Domain("annulus must stay away from the origin".into()));
    }
    struct Recentred {
        center: f64,
        width: f64,
    }
    impl SmoothProfile for Recentred {
        fn eval_deriv(&self, t: f64, k: usize) -> f64 {
            SmoothBump.eval_deriv((t - self.center) / self.width, k) / self.width.powi(k as i32)
        }
    }
    let g: Arc<dyn SmoothProfile> = Arc::new(Recentred { center, width });
    let field = SeparableField {
        dim,
        amp: x_bump.map_or(1.0, |b| b.amp),
        x_part: x_bump.map(|b| b.profiles()),
        xp_part: None,
        xi_part: XiPart::Radial { g, vanish_below: (center - width).max(0.0) * 0.99 },
    };
    let base: Arc<dyn CxField3> = Arc::new(RealAsCx(Arc::new(field)));
    Ok(OscillatingSymbol::plain(dim, 0.0, base))
}

/// Probe sampling plan: `count` points, frequencies log-uniform in
/// `[xi_lo, xi_hi]` with random directions, positions uniform in the box.
#[derive(Debug, Clone, Copy)]
pub struct ProbePlan {
    pub count: usize,
    pub seed: u64,
    pub xi_lo: f64,
    pub xi_hi: f64,
}

impl ProbePlan {
    pub fn sample(&self, k_box: &[(f64, f64)]) -> Vec<(Vec<f64>, Vec<f64>)> {
        let d = k_box.len();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = Vec::with_capacity(self.count);
        for _ in 0..self.count {
            let x: Vec<f64> = k_box.iter().map(|&(lo, hi)| rng.gen_range(lo..hi)).collect();
            let rho = self.xi_lo * (self.xi_hi / self.xi_lo).powf(rng.gen::<f64>());
            let dir = random_direction(&mut rng, d);
            let xi: Vec<f64> = dir.iter().map(|&t| t * rho).collect();
            out.push((x, xi));
        }
        out
    }
}

fn random_direction(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    if d == 1 {
        return vec![if rng.gen::<bool>() { 1.0 } else { -1.0 }];
    }
    loop {
        // Box-Muller pairs, normalized
        let v: Vec<f64> = (0..d)
            .map(|_| {
                let (u1, u2) = (rng.gen::<f64>().max(1e-12), rng.gen::<f64>());
                (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
            })
            .collect();
        let n = v.iter().map(|t| t * t).sum::<f64>().sqrt();
        if n > 1e-6 {
            return v.iter().map(|t| t / n).collect();
        }
    }
}

/// Anything with a declared class and derivative magnitudes, for seminorm probing.
pub trait ClassMember {
    fn dim(&self) -> usize;
    fn class(&self) -> SymbolClass;
    fn deriv_abs(&self, alpha: &[u32], beta: &[u32], x: &[f64], xi: &[f64]) -> Result<f64>;
}

impl ClassMember for PhaseFunction {
    fn dim(&self) -> usize {
        self.dim
    }
    fn class(&self) -> SymbolClass {
        self.class()
    }
    fn deriv_abs(&self, alpha: &[u32], beta: &[u32], x: &[f64], xi: &[f64]) -> Result<f64> {
        Ok(self.deriv(alpha, beta, x, xi)?.abs())
    }
}

impl ClassMember for OscillatingSymbol {
    fn dim(&self) -> usize {
        self.dim
    }
    fn class(&self) -> SymbolClass {
        self.class()
    }
    fn deriv_abs(&self, alpha: &[u32], beta: &[u32], x: &[f64], xi: &[f64]) -> Result<f64> {
        let e = self
            .expr()
            .differentiate_multi(beta, crate::field::Slot::X)
            .differentiate_multi(alpha, crate::field::Slot::Xi);
        Ok(e.eval(x, x, xi)?.norm())
    }
}

/// Empirical seminorm: max over probes of
/// `|d^alpha_xi d^beta_x f| * (1+|xi|)^{-(m - rho|alpha| + delta|beta|)}`.
pub fn probe_seminorm<T: ClassMember + ?Sized>(
    f: &T,
    alpha: &[u32],
    beta: &[u32],
    k_box: &[(f64, f64)],
    plan: &ProbePlan,
) -> Result<f64> {
    if plan.count == 0 {
        return Err(Error::Precondition("probe plan is empty".into()));
    }
    if k_box.len() != f.dim() {
        return Err(Error::DimensionMismatch(format!(
            "probe box dimension {} vs field dimension {}",
            k_box.len(),
            f.dim()
        )));
    }
    let class = f.class();
    let expo = class.weight_exponent(alpha, beta);
    let mut best = 0.0f64;
    for (x, xi) in plan.sample(k_box) {
        let norm = xi.iter().map(|t| t * t).sum::<f64>().sqrt();
        let v = f.deriv_abs(alpha, beta, &x, &xi)? * (1.0 + norm).powf(-expo);
        if !v.is_finite() {
            return Err(Error::Domain(format!(
                "non-finite derivative at x={x:?}, xi={xi:?}"
            )));
        }
        best = best.max(v);
    }
    Ok(best)
}

/// `b(x, xi) = c * xi_1` as a complex symbol (class `S^1`), for tests.
pub fn xi_coordinate_symbol(dim: usize, axis: usize, c: Complex64) -> OscillatingSymbol {
    let mut profiles = Vec::new();
    for i in 0..dim {
        let coeffs = if i == axis { vec![0.0, 1.0] } else { vec![1.0] };
        profiles.push(AxisProfile::new(Arc::new(Poly1D { coeffs }), 0.0, 1.0));
    }
    let field = SeparableField {
        dim,
        amp: 1.0,
        x_part: None,
        xp_part: None,
        xi_part: XiPart::PerAxis(profiles),
    };
    let base: Arc<dyn CxField3> = Arc::new(CxScaled { c, f: Arc::new(field) });
    OscillatingSymbol::plain(dim, 1.0, base)
}
