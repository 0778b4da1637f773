//! Truncated expansions of the oscillating-symbol calculus: amplitude to
//! symbol, the products A1 A2* and A2* A1, the Taylor-with-rest identity and
//! the singular-part split, plus slope-based remainder measurement.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{CxField3, Expr, OscExpr, Slot};
use crate::grid::GridSpec;
use crate::multi::{self, MultiIndex};
use crate::pdo::{self, CornerQuad};
use crate::quad;
use crate::slope;
use crate::symbols::{OscillatingAmplitude, OscillatingSymbol, ProbePlan};

/// One expansion term: its multi-index, the declared symbol order
/// `m - |alpha| (1 - r)`, and a pure evaluator on `(x, xi)`.
///
/// Terms coming from a doubled amplitude are evaluated on the diagonal
/// `x' = x`; product terms never reference the second spatial slot.
#[derive(Clone)]
pub struct ExpansionTerm {
    pub alpha: MultiIndex,
    pub declared_order: f64,
    expr: OscExpr,
}

impl ExpansionTerm {
    pub fn eval(&self, x: &[f64], xi: &[f64]) -> Result<Complex64> {
        self.expr.eval(x, x, xi)
    }

    /// Term value with its factorial weight `1/alpha!`.
    pub fn weighted(&self, x: &[f64], xi: &[f64]) -> Result<Complex64> {
        Ok(self.eval(x, xi)? / multi::multi_factorial(&self.alpha))
    }

    /// True when every oscillating factor has cancelled.
    pub fn is_plain(&self) -> bool {
        self.expr.is_plain()
    }
}

/// Truncated asymptotic expansion: one term per multi-index with
/// `0 <= |alpha| <= N - 1`, in graded lexicographic order.
pub struct ExpansionResult {
    pub dim: usize,
    pub truncation: usize,
    pub order_m: f64,
    pub order_r: f64,
    pub terms: Vec<ExpansionTerm>,
}

impl ExpansionResult {
    /// `sum_{|alpha| <= N-1} (alpha!)^{-1} t_alpha(x, xi)`.
    pub fn truncated_sum(&self, x: &[f64], xi: &[f64]) -> Result<Complex64> {
        let mut acc = Complex64::ZERO;
        for t in &self.terms {
            acc += t.weighted(x, xi)?;
        }
        Ok(acc)
    }

    pub fn term(&self, alpha: &[u32]) -> Option<&ExpansionTerm> {
        self.terms.iter().find(|t| t.alpha == alpha)
    }

    /// The truncated sum packaged as a plain symbol of order `m`, suitable
    /// for quadrature application and materialization.
    pub fn truncated_symbol(&self) -> OscillatingSymbol {
        let terms = self
            .terms
            .iter()
            .map(|t| (1.0 / multi::multi_factorial(&t.alpha), t.expr.clone()))
            .collect();
        let field = Arc::new(DiagonalField { terms });
        OscillatingSymbol::plain(self.dim, self.order_m, field)
    }
}

/// Two-slot field `(x, xi) -> sum_k w_k t_k(x, x, xi)` over expression
/// terms. x-derivatives of the diagonal restriction split binomially across
/// the (x, x') slots of the trees; terms that ignore x' lose nothing.
struct DiagonalField {
    terms: Vec<(f64, OscExpr)>,
}

impl CxField3 for DiagonalField {
    fn eval_deriv(
        &self,
        bx: &[u32],
        bxp: &[u32],
        axi: &[u32],
        x: &[f64],
        _xp: &[f64],
        xi: &[f64],
    ) -> Result<Complex64> {
        if bxp.iter().any(|&b| b > 0) {
            return Err(Error::UnsupportedDerivative(
                "diagonal restriction exposes only (x, xi) derivatives".into(),
            ));
        }
        let mut acc = Complex64::ZERO;
        if bx.iter().all(|&b| b == 0) && axi.iter().all(|&a| a == 0) {
            for (w, e) in &self.terms {
                acc += *w * e.eval(x, x, xi)?;
            }
            return Ok(acc);
        }
        for gamma in multi::sub_indices(bx) {
            let c = multi::choose(bx, &gamma);
            let rest = multi::sub(bx, &gamma);
            for (w, e) in &self.terms {
                let de = e
                    .differentiate_multi(&gamma, Slot::X)
                    .differentiate_multi(&rest, Slot::Xp)
                    .differentiate_multi(axi, Slot::Xi);
                acc += c * *w * de.eval(x, x, xi)?;
            }
        }
        Ok(acc)
    }
}

/// Diagonal-restriction expansion of an amplitude into a symbol: terms
/// `a_alpha = (d^alpha_xi D^alpha_{x'} a)|_{x'=x}` with `D = -i d`, declared
/// order `m - |alpha| (1 - r)`.
///
/// The oscillating factor must be trivial on the diagonal; this is checked
/// over the probe plan and the offending probe is reported on failure.
pub fn expand_amplitude_to_symbol(
    a: &OscillatingAmplitude,
    n: usize,
    plan: &ProbePlan,
    x_box: &[(f64, f64)],
) -> Result<ExpansionResult> {
    check_truncation(n)?;
    for (x, xi) in plan.sample(x_box) {
        let th = a.phase_eval(&x, &x, &xi);
        if th.abs() >= 1e-10 {
            return Err(Error::Precondition(format!(
                "diagonal phase is {th:.3e} at x = {x:?}, xi = {xi:?}; \
                 the reduction needs |Theta(x, x, xi)| < 1e-10"
            )));
        }
    }
    let base = a.expr();
    let r = a.order_r();
    let mut terms = Vec::new();
    for alpha in multi::graded(a.dim, n as u32 - 1) {
        multi::check_factorial_order(&alpha)?;
        let expr = base
            .d_multi(&alpha, Slot::Xp)
            .differentiate_multi(&alpha, Slot::Xi);
        terms.push(ExpansionTerm {
            declared_order: a.order_m - multi::order(&alpha) as f64 * (1.0 - r),
            alpha,
            expr,
        });
    }
    Ok(ExpansionResult {
        dim: a.dim,
        truncation: n,
        order_m: a.order_m,
        order_r: r,
        terms,
    })
}

/// Expansion of the product `G = A1 A2*`: terms
/// `g_alpha = d^alpha_xi ( a1 conj(D^alpha_x a2) )`, declared order
/// `m1 + m2 - |alpha| (1 - r)`. In the leading term the oscillating factors
/// cancel, leaving `b1 conj(b2)`.
pub fn expand_right_product(
    a1: &OscillatingSymbol,
    a2: &OscillatingSymbol,
    n: usize,
) -> Result<ExpansionResult> {
    check_product(a1, a2, n)?;
    let e1 = a1.expr();
    let e2 = a2.expr();
    let (m, r) = product_orders(a1, a2);
    let mut terms = Vec::new();
    for alpha in multi::graded(a1.dim, n as u32 - 1) {
        multi::check_factorial_order(&alpha)?;
        let factor = e2.d_multi(&alpha, Slot::X).conj();
        let expr = e1.mul(&factor)?.differentiate_multi(&alpha, Slot::Xi);
        terms.push(ExpansionTerm {
            declared_order: m - multi::order(&alpha) as f64 * (1.0 - r),
            alpha,
            expr,
        });
    }
    Ok(ExpansionResult { dim: a1.dim, truncation: n, order_m: m, order_r: r, terms })
}

/// Expansion of the product `H = A2* A1`: terms
/// `h_alpha = D^alpha_x ( a1 conj(d^alpha_xi a2) )`, declared orders as for
/// the right product.
pub fn expand_left_product(
    a1: &OscillatingSymbol,
    a2: &OscillatingSymbol,
    n: usize,
) -> Result<ExpansionResult> {
    check_product(a1, a2, n)?;
    let e1 = a1.expr();
    let e2 = a2.expr();
    let (m, r) = product_orders(a1, a2);
    let mut terms = Vec::new();
    for alpha in multi::graded(a1.dim, n as u32 - 1) {
        multi::check_factorial_order(&alpha)?;
        let factor = e2.differentiate_multi(&alpha, Slot::Xi).conj();
        let expr = e1.mul(&factor)?.d_multi(&alpha, Slot::X);
        terms.push(ExpansionTerm {
            declared_order: m - multi::order(&alpha) as f64 * (1.0 - r),
            alpha,
            expr,
        });
    }
    Ok(ExpansionResult { dim: a1.dim, truncation: n, order_m: m, order_r: r, terms })
}

fn check_truncation(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Range("truncation order must be at least 1".into()));
    }
    Ok(())
}

fn check_product(a1: &OscillatingSymbol, a2: &OscillatingSymbol, n: usize) -> Result<()> {
    check_truncation(n)?;
    if a1.dim != a2.dim {
        return Err(Error::DimensionMismatch(format!(
            "factor dimensions {} vs {}",
            a1.dim, a2.dim
        )));
    }
    if let (Some(p), Some(q)) = (&a1.phase, &a2.phase) {
        if !Arc::ptr_eq(p, q) {
            return Err(Error::Precondition(
                "product expansion requires both factors to share one phase object".into(),
            ));
        }
    }
    Ok(())
}

fn product_orders(a1: &OscillatingSymbol, a2: &OscillatingSymbol) -> (f64, f64) {
    (a1.order_m + a2.order_m, a1.order_r().max(a2.order_r()))
}

/// The singular part of both products of two order-zero oscillating
/// symbols: the plain symbol `B = b1 conj(b2)` plus a grid probe for the
/// compact residuals `A1 A2* - B` and `A2* A1 - B`.
pub struct SingularSplit {
    pub b: OscillatingSymbol,
    a1: OscillatingSymbol,
    a2: OscillatingSymbol,
}

/// Leading singular values of the residuals and of the full products,
/// descending; the residual lists decaying much faster than the full ones
/// is the compactness signal.
pub struct ResidualTails {
    pub right_residual: Vec<f64>,
    pub left_residual: Vec<f64>,
    pub right_full: Vec<f64>,
    pub left_full: Vec<f64>,
}

pub fn split_singular_part(
    a1: &OscillatingSymbol,
    a2: &OscillatingSymbol,
) -> Result<SingularSplit> {
    check_product(a1, a2, 1)?;
    if a1.order_m != 0.0 || a2.order_m != 0.0 {
        return Err(Error::Precondition(format!(
            "singular-part split needs order-zero factors, got m1 = {}, m2 = {}",
            a1.order_m, a2.order_m
        )));
    }
    let body = Expr::Prod(vec![
        Expr::leaf(a1.base.clone(), a1.dim),
        Expr::Conj(Box::new(Expr::leaf(a2.base.clone(), a2.dim))),
    ]);
    let field = Arc::new(DiagonalField {
        terms: vec![(1.0, OscExpr::plain(body, a1.dim))],
    });
    Ok(SingularSplit {
        b: OscillatingSymbol::plain(a1.dim, 0.0, field),
        a1: a1.clone(),
        a2: a2.clone(),
    })
}

impl SingularSplit {
    /// Materialize `A1 A2* - B` and `A2* A1 - B` on the grid and return the
    /// top `k` singular values of the residuals and of the full products,
    /// estimated by randomized subspace iteration on the dense sections.
    pub fn residual_norm_probe(
        &self,
        spec: &GridSpec,
        k: usize,
        power_iters: usize,
        seed: u64,
    ) -> Result<ResidualTails> {
        let m1 = pdo::materialize_symbol(&self.a1, spec)?.entries;
        let m2 = pdo::materialize_symbol(&self.a2, spec)?.entries;
        let mb = pdo::materialize_symbol(&self.b, spec)?.entries;
        // grid L2 weights are uniform, so the matrix adjoint is the L2 one
        let m1h = m1.adjoint();
        let m2h = m2.adjoint();
        let mbh = mb.adjoint();
        let n = spec.total();
        let zero = DMatrix::<Complex64>::zeros(n, n);

        let right_residual =
            top_of_difference(&m1, &m2h, &mb, &m1h, &m2, &mbh, n, k, power_iters, seed)?;
        let left_residual =
            top_of_difference(&m2h, &m1, &mb, &m2, &m1h, &mbh, n, k, power_iters, seed)?;
        let right_full =
            top_of_difference(&m1, &m2h, &zero, &m1h, &m2, &zero, n, k, power_iters, seed)?;
        let left_full =
            top_of_difference(&m2h, &m1, &zero, &m2, &m1h, &zero, n, k, power_iters, seed)?;
        Ok(ResidualTails { right_residual, left_residual, right_full, left_full })
    }
}

/// Top singular values of `P Q - S` given the factors and their adjoints.
#[allow(clippy::too_many_arguments)]
fn top_of_difference(
    p: &DMatrix<Complex64>,
    q: &DMatrix<Complex64>,
    s: &DMatrix<Complex64>,
    ph: &DMatrix<Complex64>,
    qh: &DMatrix<Complex64>,
    sh: &DMatrix<Complex64>,
    n: usize,
    k: usize,
    power_iters: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let apply = move |v: &[Complex64]| {
        let x = DVector::from_column_slice(v);
        (p * (q * &x) - s * &x).as_slice().to_vec()
    };
    let apply_adj = move |v: &[Complex64]| {
        let x = DVector::from_column_slice(v);
        (qh * (ph * &x) - sh * &x).as_slice().to_vec()
    };
    pdo::top_singular_values(&apply, &apply_adj, n, k, power_iters, seed)
}

/// Taylor-with-rest split of the corner integral
/// `(2 pi)^{-d} sum p(z, zeta) e^{-i<z, zeta>}`: the head
/// `sum_{|alpha| <= N-1} (alpha!)^{-1} (d^alpha_zeta D^alpha_z p)(0, 0)`
/// plus an explicit remainder quadrature over the order-N shell.
pub struct TaylorSplit {
    pub head: Complex64,
    pub truncation: usize,
    dim: usize,
    z_support: Vec<(f64, f64)>,
    field: Arc<dyn CxField3>,
}

/// Split the corner integral of `p` at truncation order `n`. The field is
/// read as `p(z, zeta)` through its (x, xi) slots; `z_support` declares the
/// box outside which `p` vanishes.
pub fn taylor_rest(
    field: Arc<dyn CxField3>,
    dim: usize,
    n: usize,
    z_support: &[(f64, f64)],
) -> Result<TaylorSplit> {
    check_truncation(n)?;
    if z_support.len() != dim {
        return Err(Error::DimensionMismatch(format!(
            "support box dimension {} vs field dimension {dim}",
            z_support.len()
        )));
    }
    let zeros = vec![0u32; dim];
    let origin = vec![0.0; dim];
    let mut head = Complex64::ZERO;
    for alpha in multi::graded(dim, n as u32 - 1) {
        multi::check_factorial_order(&alpha)?;
        let d = field.eval_deriv(&alpha, &zeros, &alpha, &origin, &origin, &origin)?;
        let di = Complex64::new(0.0, -1.0).powu(multi::order(&alpha));
        head += di * d / multi::multi_factorial(&alpha);
    }
    Ok(TaylorSplit {
        head,
        truncation: n,
        dim,
        z_support: z_support.to_vec(),
        field,
    })
}

impl TaylorSplit {
    /// The remainder after the head: Gauss nodes in `t` against corner sums
    /// of the order-N frequency shell,
    /// `(2 pi)^{-d} N sum_{|alpha|=N} (alpha!)^{-1} int_0^1 (1-t)^{N-1}
    ///  [sum (d^alpha_zeta p)(z, t zeta) zeta^alpha e^{-i<z, zeta>}] dt`.
    pub fn rest(&self, quad: &CornerQuad, t_nodes: usize) -> Result<Complex64> {
        self.check_support(quad)?;
        if t_nodes == 0 {
            return Err(Error::Config("need at least one t node".into()));
        }
        let n = self.truncation;
        let alphas = multi::of_order(self.dim, n as u32);
        let zeros = vec![0u32; self.dim];
        let mut total = Complex64::ZERO;
        for (t, w) in quad::gauss_legendre_on(0.0, 1.0, t_nodes) {
            let shell = pdo::corner_integral(self.dim, quad, &|z, zeta| {
                let tz: Vec<f64> = zeta.iter().map(|&c| t * c).collect();
                let mut acc = Complex64::ZERO;
                for alpha in &alphas {
                    let d = self.field.eval_deriv(&zeros, &zeros, alpha, z, z, &tz)?;
                    acc += d * multi::monomial(zeta, alpha) / multi::multi_factorial(alpha);
                }
                Ok(acc)
            })?;
            total += w * (1.0 - t).powi(n as i32 - 1) * shell;
        }
        Ok(total * n as f64)
    }

    /// The left side of the identity: the direct corner quadrature of `p`.
    pub fn direct(&self, quad: &CornerQuad) -> Result<Complex64> {
        self.check_support(quad)?;
        let zeros = vec![0u32; self.dim];
        pdo::corner_integral(self.dim, quad, &|z, zeta| {
            self.field.eval_deriv(&zeros, &zeros, &zeros, z, z, zeta)
        })
    }

    /// The declared support must sit inside the quadrature box, and the
    /// field must actually be negligible on the box boundary.
    fn check_support(&self, quad: &CornerQuad) -> Result<()> {
        for &(lo, hi) in &self.z_support {
            if lo < -quad.z_half || hi > quad.z_half {
                return Err(Error::Precondition(format!(
                    "declared z support [{lo}, {hi}] leaks outside the \
                     quadrature box [-{0}, {0}]",
                    quad.z_half
                )));
            }
        }
        let zeros = vec![0u32; self.dim];
        let probes = boundary_probes(quad.z_half, self.dim);
        for z in &probes {
            let v = self
                .field
                .eval_deriv(&zeros, &zeros, &zeros, z, z, &vec![0.0; self.dim])?;
            if v.norm() >= 1e-10 {
                return Err(Error::Precondition(format!(
                    "integrand support leaks outside the z box: |p| = {:.3e} at z = {z:?}",
                    v.norm()
                )));
            }
        }
        Ok(())
    }
}

/// Points on the faces of `[-half, half]^dim` (coarse sweep per face).
fn boundary_probes(half: f64, dim: usize) -> Vec<Vec<f64>> {
    let sweep: Vec<f64> = (0..9).map(|i| -half + 2.0 * half * i as f64 / 8.0).collect();
    let mut out = Vec::new();
    for axis in 0..dim {
        for &side in &[-half, half] {
            if dim == 1 {
                out.push(vec![side]);
                continue;
            }
            // sweep the other axis; dim <= 2 in practice
            for &t in &sweep {
                let mut z = vec![t; dim];
                z[axis] = side;
                out.push(z);
            }
        }
    }
    out
}

/// Sup of `|t(x, xi)|` over x-probes with `xi = lambda * dir`.
pub fn term_sup_at(
    term: &ExpansionTerm,
    xs: &[Vec<f64>],
    dirs: &[Vec<f64>],
    lambda: f64,
) -> Result<f64> {
    let mut best = 0.0_f64;
    for x in xs {
        for dir in dirs {
            let xi: Vec<f64> = dir.iter().map(|&t| t * lambda).collect();
            let v = term.eval(x, &xi)?.norm();
            if !v.is_finite() {
                return Err(Error::Domain(format!(
                    "term not finite at x = {x:?}, xi = {xi:?}"
                )));
            }
            best = best.max(v);
        }
    }
    Ok(best)
}

/// Fitted log-log decay slope of a term over a lambda ladder; identically
/// vanishing terms report negative infinity (they decay faster than any
/// power).
pub fn term_decay_slope(
    term: &ExpansionTerm,
    xs: &[Vec<f64>],
    dirs: &[Vec<f64>],
    lambdas: &[f64],
) -> Result<f64> {
    let sups: Vec<f64> = lambdas
        .iter()
        .map(|&l| term_sup_at(term, xs, dirs, l))
        .collect::<Result<_>>()?;
    if sups.iter().all(|&s| s < 1e-100) {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(slope::loglog_slope(lambdas, &sups))
}

/// Rows `(lambda, sup error)` of |oracle - truncated sum| over the probe set,
/// for remainder-decay regressions against a quadrature oracle.
pub fn remainder_rows(
    oracle: &(dyn Fn(&[f64], &[f64]) -> Result<Complex64> + Sync),
    expansion: &ExpansionResult,
    xs: &[Vec<f64>],
    dirs: &[Vec<f64>],
    lambdas: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let mut rows = Vec::with_capacity(lambdas.len());
    for &lam in lambdas {
        let mut worst = 0.0_f64;
        for x in xs {
            for dir in dirs {
                let xi: Vec<f64> = dir.iter().map(|&t| t * lam).collect();
                let full = oracle(x, &xi)?;
                let head = expansion.truncated_sum(x, &xi)?;
                worst = worst.max((full - head).norm());
            }
        }
        rows.push((lam, worst));
    }
    Ok(rows)
}

/// Band-pass product experiment: how the materialized product deviates from
/// the truncated symbol on test functions with spectrum in `[lam, 2 lam]`.
pub struct ProductDecayConfig {
    pub lambdas: Vec<f64>,
    pub probes: usize,
    pub seed: u64,
}

/// Rows `(lambda, max residual ratio)` for `A1 A2* - B_N` (or `A2* A1 - B_N`
/// when `left`) acting on band-pass probes, ratio in the grid L2 norm.
pub fn product_decay_rows(
    a1: &OscillatingSymbol,
    a2: &OscillatingSymbol,
    expansion: &ExpansionResult,
    spec: &GridSpec,
    left: bool,
    cfg: &ProductDecayConfig,
) -> Result<Vec<(f64, f64)>> {
    let m1 = pdo::materialize_symbol(a1, spec)?.entries;
    let m2h = pdo::materialize_symbol(a2, spec)?.entries.adjoint();
    let mb = pdo::materialize_symbol(&expansion.truncated_symbol(), spec)?.entries;
    let mut rows = Vec::with_capacity(cfg.lambdas.len());
    for (i, &lam) in cfg.lambdas.iter().enumerate() {
        let probes = pdo::band_pass_probes(spec, lam, cfg.probes, cfg.seed ^ i as u64)?;
        let mut worst = 0.0_f64;
        for u in &probes {
            let x = DVector::from_column_slice(&u.values);
            let pu = if left { &m2h * (&m1 * &x) } else { &m1 * (&m2h * &x) };
            let du = pu - &mb * &x;
            // uniform cell volume: the l2 ratio equals the L2 ratio
            let ratio = du.norm() / x.norm();
            worst = worst.max(ratio);
        }
        rows.push((lam, worst));
    }
    Ok(rows)
}
