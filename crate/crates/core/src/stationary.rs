//! Stationary-point machinery for the oscillating calculus: the fixed point
//! behind the amplitude-to-symbol reduction, the shifted point behind the
//! action on oscillating exponent packets, and the phase and curvature
//! reports built on top of them.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridSpec};
use crate::pdo;
use crate::quad;
use crate::smooth::{Poly1D, SmoothProfile};
use crate::symbols::{AmplitudePhase, OscillatingAmplitude, OscillatingSymbol, PhaseFunction};

/// Frequency floor for the fixed-point solvers. The model phases contract
/// comfortably from here on; smaller frequencies are rejected rather than
/// iterated on faith.
pub const LAMBDA_MIN: f64 = 16.0;

/// Floor for `eps * lambda^(1-r)` in [`act_on_exponent`]: the leading-term
/// approximation needs the packet to be wide against the stationary shift.
pub const PACKET_SCALE_FLOOR: f64 = 1.5;

/// Fraction of the Nyquist band the carrier `lambda psi'` may occupy.
pub const CARRIER_BAND_FRACTION: f64 = 0.8;

const DEFAULT_TOL: f64 = 1e-10;
const MAX_ITER: usize = 64;
const SEGMENT_NODES: usize = 16;

/// Converged fixed point of one of the stationary systems.
#[derive(Debug, Clone)]
pub struct StationaryPoint {
    /// Spatial part: the offset `z_s` for amplitude solves, the shifted
    /// point `y_s` for exponent solves.
    pub location: Vec<f64>,
    /// Covector part: the relative frequency offset `eta_s` for amplitude
    /// solves, the profile gradient at the shifted point for exponent solves.
    pub covector: Vec<f64>,
    /// Applications of the fixed-point map.
    pub iterations: usize,
    /// Sup-norm defect of the defining equations at the returned point,
    /// measured by one extra direct substitution.
    pub residual: f64,
    /// Largest ratio of consecutive iterate gaps; below 1 certifies that the
    /// map contracted along the whole trajectory.
    pub gap_ratio: f64,
}

impl StationaryPoint {
    fn resting(location: Vec<f64>, covector: Vec<f64>) -> Self {
        StationaryPoint { location, covector, iterations: 0, residual: 0.0, gap_ratio: 0.0 }
    }
}

/// Curvature summary of the reduced phase at a probe point.
#[derive(Debug, Clone, Copy)]
pub struct HessianProbe {
    /// Absolute determinant of the second-derivative matrix.
    pub det_abs: f64,
    /// Positive minus negative eigenvalue count.
    pub signature: i32,
}

/// Scalar carrier phase for exponent packets `exp(i lambda psi)`: twice
/// differentiable with a nonvanishing slope on a recorded validity box.
///
/// The exponent pipeline only ever needs the value, the gradient, and the
/// second-derivative matrix applied to a vector, so carriers with cross
/// terms (polynomials in several variables) plug in next to separable sums.
pub trait CarrierPhase: Send + Sync {
    fn dim(&self) -> usize;
    /// Box on which the slope condition was verified.
    fn validity(&self) -> &[(f64, f64)];
    fn eval(&self, x: &[f64]) -> f64;
    fn grad(&self, x: &[f64]) -> Vec<f64>;
    /// Second-derivative matrix at `x` applied to `v`.
    fn hessian_apply(&self, x: &[f64], v: &[f64]) -> Vec<f64>;
}

/// Scalar phase `psi` for oscillating exponent packets: a separable sum of
/// per-axis smooth profiles, recorded together with the box on which its
/// slope stays away from zero.
///
/// Profiles are fixed functions of the spatial variable; a family indexed by
/// the frequency parameter is represented by constructing one profile per
/// ladder rung.
#[derive(Clone)]
pub struct PhaseProfile {
    /// `psi(x) = sum_axis sum_term coeff * p(x_axis)`.
    terms: Vec<Vec<(f64, Arc<dyn SmoothProfile>)>>,
    /// Box on which the slope condition was verified.
    pub validity: Vec<(f64, f64)>,
    /// Smallest `|psi'|` seen on the probe grid of the validity box.
    pub gradient_floor: f64,
}

impl PhaseProfile {
    /// Builds a profile and verifies the slope condition `|psi'| > 0` plus
    /// finiteness of the first four derivatives on a probe grid of the box.
    pub fn new(
        terms: Vec<Vec<(f64, Arc<dyn SmoothProfile>)>>,
        validity: Vec<(f64, f64)>,
    ) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Domain("phase profile needs at least one axis".into()));
        }
        if validity.len() != terms.len() {
            return Err(Error::DimensionMismatch(format!(
                "validity box has {} axes, profile has {}",
                validity.len(),
                terms.len()
            )));
        }
        for &(a, b) in &validity {
            if !(b > a) {
                return Err(Error::Domain(format!("validity box needs b > a, got [{a}, {b}]")));
            }
        }
        let mut profile = PhaseProfile { terms, validity, gradient_floor: 0.0 };
        let mut floor = f64::INFINITY;
        for x in probe_points(&profile.validity, 17) {
            for axis in 0..profile.dim() {
                for k in 0..=4 {
                    let v = profile.axis_deriv(axis, k, x[axis]);
                    if !v.is_finite() {
                        return Err(Error::Domain(format!(
                            "profile derivative of order {k} is not finite at {x:?}"
                        )));
                    }
                }
            }
            floor = floor.min(l2(&profile.grad(&x)));
        }
        if floor < 1e-8 {
            return Err(Error::Precondition(format!(
                "profile slope vanishes on the validity box (min |psi'| = {floor:.3e})"
            )));
        }
        profile.gradient_floor = floor;
        Ok(profile)
    }

    /// One polynomial per axis: `psi(x) = sum_i p_i(x_i)`.
    pub fn polynomial(coeffs: Vec<Vec<f64>>, validity: Vec<(f64, f64)>) -> Result<Self> {
        let terms = coeffs
            .into_iter()
            .map(|c| vec![(1.0, Arc::new(Poly1D { coeffs: c }) as Arc<dyn SmoothProfile>)])
            .collect();
        PhaseProfile::new(terms, validity)
    }

    /// Linear profile `<slopes, x>`.
    pub fn linear(slopes: &[f64], validity: Vec<(f64, f64)>) -> Result<Self> {
        PhaseProfile::polynomial(slopes.iter().map(|&s| vec![0.0, s]).collect(), validity)
    }

    pub fn dim(&self) -> usize {
        self.terms.len()
    }

    /// k-th derivative along one axis; mixed derivatives vanish because the
    /// profile is a separable sum.
    pub fn axis_deriv(&self, axis: usize, k: usize, t: f64) -> f64 {
        self.terms[axis].iter().map(|(c, p)| c * p.eval_deriv(t, k)).sum()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        x.iter().enumerate().map(|(i, &t)| self.axis_deriv(i, 0, t)).sum()
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        x.iter().enumerate().map(|(i, &t)| self.axis_deriv(i, 1, t)).collect()
    }

    /// Diagonal of the second-derivative matrix (the whole matrix, for a
    /// separable sum).
    pub fn hessian_diag(&self, x: &[f64]) -> Vec<f64> {
        x.iter().enumerate().map(|(i, &t)| self.axis_deriv(i, 2, t)).collect()
    }

    /// `self + scale * other`, re-validated on this profile's box.
    pub fn plus(&self, scale: f64, other: &PhaseProfile) -> Result<PhaseProfile> {
        if other.dim() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "cannot add a {}-axis profile to a {}-axis one",
                other.dim(),
                self.dim()
            )));
        }
        let mut terms = self.terms.clone();
        for (axis, extra) in other.terms.iter().enumerate() {
            terms[axis].extend(extra.iter().map(|(c, p)| (scale * c, p.clone())));
        }
        PhaseProfile::new(terms, self.validity.clone())
    }
}

impl CarrierPhase for PhaseProfile {
    fn dim(&self) -> usize {
        PhaseProfile::dim(self)
    }

    fn validity(&self) -> &[(f64, f64)] {
        &self.validity
    }

    fn eval(&self, x: &[f64]) -> f64 {
        PhaseProfile::eval(self, x)
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        PhaseProfile::grad(self, x)
    }

    fn hessian_apply(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        self.hessian_diag(x).iter().zip(v).map(|(h, w)| h * w).collect()
    }
}

/// Exact output phase of a symbol acting on an oscillating exponent packet,
/// with its frozen-frequency part and the curvature correction split in two.
#[derive(Debug, Clone)]
pub struct ExponentPhaseReport {
    /// Output phase at the probe point.
    pub g: f64,
    /// Curvature correction: `g = phi(x, lambda psi'(x)) + lambda^(-1+2r) * omega`.
    pub omega: f64,
    /// Part that moves the frequency argument from `psi'(x)` to `psi'(y_s)`.
    pub omega_1: f64,
    /// Taylor rest of the profile between `x` and `y_s`.
    pub omega_2: f64,
    /// Shifted stationary point.
    pub y_s: Vec<f64>,
    /// Profile gradient at the shifted point.
    pub eta_s: Vec<f64>,
    /// Symbol base at the frozen frequency `(x, lambda psi'(x))`.
    pub b_leading: Complex64,
}

/// Output of a symbol applied to an oscillating exponent packet, next to its
/// leading-term approximation.
#[derive(Debug, Clone)]
pub struct ExponentAction {
    /// `exp(i g(x)) * b(x, lambda psi'(x)) * u(x)` on the grid.
    pub approx: GridFunction,
    /// L2 distance between the operator output and `approx`, restricted to
    /// the profile's validity box.
    pub residual_l2: f64,
}

/// Row of the profile-perturbation comparison at one frequency.
#[derive(Debug, Clone, Copy)]
pub struct OmegaDeviation {
    pub lambda: f64,
    /// Worst deviation of the curvature correction over the probe grid.
    pub max_deviation: f64,
}

/// Fixed point `(z_s, eta_s)` of the amplitude reduction at `(x, xi)`:
///
/// ```text
/// z   = Theta_xi(x, x + z, xi + |xi| eta)
/// eta = |xi|^{-1} Theta_y(x, x + z, xi + |xi| eta)
/// ```
///
/// iterated from `(0, 0)`; `Theta_y` and `Theta_xi` are the derivatives in
/// the second and third slots. The map contracts once `|xi|` clears
/// [`LAMBDA_MIN`].
pub fn solve_amplitude_stationary(
    theta: &AmplitudePhase,
    x: &[f64],
    xi: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<StationaryPoint> {
    let d = theta.dim;
    check_point_dims("amplitude solve", d, &[("x", x), ("xi", xi)])?;
    let rho = l2(xi);
    if rho < LAMBDA_MIN {
        return Err(Error::Precondition(format!(
            "|xi| = {rho:.3} is below the contraction floor {LAMBDA_MIN}"
        )));
    }
    let zeros = vec![0u32; d];
    let map = |z: &[f64], eta: &[f64]| -> Result<(Vec<f64>, Vec<f64>)> {
        let xp: Vec<f64> = x.iter().zip(z).map(|(a, b)| a + b).collect();
        let arg: Vec<f64> = xi.iter().zip(eta).map(|(a, b)| a + rho * b).collect();
        let mut nz = vec![0.0; d];
        let mut ne = vec![0.0; d];
        for i in 0..d {
            let mut e = vec![0u32; d];
            e[i] = 1;
            nz[i] = theta.deriv(&zeros, &zeros, &e, x, &xp, &arg)?;
            ne[i] = theta.deriv(&zeros, &e, &zeros, x, &xp, &arg)? / rho;
        }
        Ok((nz, ne))
    };
    run_fixed_point((vec![0.0; d], vec![0.0; d]), map, tol, max_iter)
}

/// Second-derivative summary of the reduced phase
/// `Xi(z, eta) = |xi|^{-1} Theta(x, x+z, xi + |xi| eta) - <z, eta>`
/// at the probe offsets `at = (z, eta)`. Assembles the symmetric 2d x 2d
/// block matrix
///
/// ```text
/// [ |xi|^{-1} Theta_yy    Theta_{y xi} - I ]
/// [ transpose             |xi| Theta_{xi xi} ]
/// ```
///
/// and reports its absolute determinant and eigenvalue signature.
pub fn hessian_probe(
    theta: &AmplitudePhase,
    x: &[f64],
    xi: &[f64],
    at: (&[f64], &[f64]),
) -> Result<HessianProbe> {
    let d = theta.dim;
    let (z, eta) = at;
    check_point_dims("curvature probe", d, &[("x", x), ("xi", xi), ("z", z), ("eta", eta)])?;
    let rho = l2(xi);
    if rho == 0.0 {
        return Err(Error::Precondition("curvature probe needs a nonzero frequency".into()));
    }
    let zeros = vec![0u32; d];
    let xp: Vec<f64> = x.iter().zip(z).map(|(a, b)| a + b).collect();
    let arg: Vec<f64> = xi.iter().zip(eta).map(|(a, b)| a + rho * b).collect();
    let mut h = DMatrix::<f64>::zeros(2 * d, 2 * d);
    for i in 0..d {
        for j in 0..d {
            let mut yy = vec![0u32; d];
            yy[i] += 1;
            yy[j] += 1;
            h[(i, j)] = theta.deriv(&zeros, &yy, &zeros, x, &xp, &arg)? / rho;

            let mut yi = vec![0u32; d];
            yi[i] = 1;
            let mut xj = vec![0u32; d];
            xj[j] = 1;
            let delta = if i == j { 1.0 } else { 0.0 };
            let cross = theta.deriv(&zeros, &yi, &xj, x, &xp, &arg)? - delta;
            h[(i, d + j)] = cross;
            h[(d + j, i)] = cross;

            let mut xx = vec![0u32; d];
            xx[i] += 1;
            xx[j] += 1;
            h[(d + i, d + j)] = rho * theta.deriv(&zeros, &zeros, &xx, x, &xp, &arg)?;
        }
    }
    // symmetric matrix: determinant and signature both come from one
    // eigendecomposition
    let eig = h.symmetric_eigen();
    let det: f64 = eig.eigenvalues.iter().product();
    let det_abs = det.abs();
    if det_abs < 1e-8 {
        return Err(Error::Singular(format!(
            "phase Hessian is degenerate at the probe point (|det| = {det_abs:.3e})"
        )));
    }
    let scale = eig.eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let cut = scale * 1e-12;
    let signature = eig
        .eigenvalues
        .iter()
        .map(|&v| if v > cut { 1 } else if v < -cut { -1 } else { 0 })
        .sum();
    Ok(HessianProbe { det_abs, signature })
}

/// Reduced symbol data of an oscillating amplitude at one `(x, xi)`.
#[derive(Debug, Clone)]
pub struct SymbolExtract {
    /// Reduced phase: `Theta(x, x + z_s, xi + |xi| eta_s) - |xi| <z_s, eta_s>`.
    pub phi: f64,
    /// `phi` minus the diagonal amplitude phase `Theta(x, x, xi)`; one order
    /// smaller in the frequency than either term.
    pub phi_correction: f64,
    /// Base value on the diagonal, `b(x, x, xi)`.
    pub b_leading: Complex64,
    /// Stationary point behind the reduction.
    pub point: StationaryPoint,
}

/// Evaluates the reduced oscillating symbol of an amplitude at `(x, xi)` by
/// solving the amplitude fixed point and substituting it into the phase.
pub fn symbol_from_oscillating_amplitude(
    amp: &OscillatingAmplitude,
    x: &[f64],
    xi: &[f64],
) -> Result<SymbolExtract> {
    let d = amp.dim;
    check_point_dims("symbol reduction", d, &[("x", x), ("xi", xi)])?;
    let b_leading = amp.base_eval(x, x, xi);
    let Some(theta) = amp.phase.as_deref() else {
        return Ok(SymbolExtract {
            phi: 0.0,
            phi_correction: 0.0,
            b_leading,
            point: StationaryPoint::resting(vec![0.0; d], vec![0.0; d]),
        });
    };
    let point = solve_amplitude_stationary(theta, x, xi, DEFAULT_TOL, MAX_ITER)?;
    let rho = l2(xi);
    let xp: Vec<f64> = x.iter().zip(&point.location).map(|(a, b)| a + b).collect();
    let arg: Vec<f64> = xi.iter().zip(&point.covector).map(|(a, b)| a + rho * b).collect();
    let pairing: f64 = point.location.iter().zip(&point.covector).map(|(a, b)| a * b).sum();
    let phi = theta.eval(x, &xp, &arg) - rho * pairing;
    let diag = theta.eval(x, x, xi);
    Ok(SymbolExtract { phi, phi_correction: phi - diag, b_leading, point })
}

/// Fixed point `y_s = x + phi_xi(x, lambda psi'(y_s))` of the exponent
/// action, iterated from `y = x`. The covector of the result is the profile
/// gradient at the shifted point.
pub fn solve_exponent_stationary(
    phi: &PhaseFunction,
    psi: &dyn CarrierPhase,
    x: &[f64],
    lambda: f64,
    tol: f64,
) -> Result<StationaryPoint> {
    let d = phi.dim;
    if psi.dim() != d {
        return Err(Error::DimensionMismatch(format!(
            "profile has {} axes, phase has {d}",
            psi.dim()
        )));
    }
    check_point_dims("exponent solve", d, &[("x", x)])?;
    if lambda < LAMBDA_MIN {
        return Err(Error::Precondition(format!(
            "lambda = {lambda:.3} is below the contraction floor {LAMBDA_MIN}"
        )));
    }
    let g0 = psi.grad(x);
    if l2(&g0) < 1e-12 {
        return Err(Error::Precondition("profile slope vanishes at the probe point".into()));
    }
    let map = |y: &[f64], _c: &[f64]| -> Result<(Vec<f64>, Vec<f64>)> {
        let arg: Vec<f64> = psi.grad(y).iter().map(|&e| lambda * e).collect();
        let shift = phi.grad_xi(x, &arg)?;
        let ny: Vec<f64> = x.iter().zip(&shift).map(|(a, b)| a + b).collect();
        let nc = psi.grad(&ny);
        Ok((ny, nc))
    };
    run_fixed_point((x.to_vec(), g0), map, tol, MAX_ITER)
}

/// Full phase report for a symbol acting on the packet carrier
/// `exp(i lambda psi)` at `x`: the output phase, its frozen-frequency part,
/// the curvature correction split in two segment integrals, and the leading
/// base value.
pub fn exponent_phase(
    a: &OscillatingSymbol,
    psi: &dyn CarrierPhase,
    x: &[f64],
    lambda: f64,
) -> Result<ExponentPhaseReport> {
    let d = a.dim;
    if psi.dim() != d {
        return Err(Error::DimensionMismatch(format!(
            "profile has {} axes, symbol has {d}",
            psi.dim()
        )));
    }
    check_point_dims("exponent phase", d, &[("x", x)])?;
    let (point, g, om1, om2) = exponent_core(a.phase.as_deref(), psi, x, lambda)?;
    let frozen: Vec<f64> = psi.grad(x).iter().map(|&e| lambda * e).collect();
    let b_leading = a.base_eval(x, &frozen);
    Ok(ExponentPhaseReport {
        g,
        omega: om1 + om2,
        omega_1: om1,
        omega_2: om2,
        y_s: point.location,
        eta_s: point.covector,
        b_leading,
    })
}

/// Applies the symbol to the packet
/// `u(x) = exp(i lambda psi(x)) eps^{-d/2} f(|x - x0| / eps)` and compares
/// the result with the leading-term approximation
/// `exp(i g(x)) b(x, lambda psi'(x)) u(x)`. The residual is measured in L2
/// over the profile's validity box.
pub fn act_on_exponent(
    a: &OscillatingSymbol,
    psi: &dyn CarrierPhase,
    x0: &[f64],
    lambda: f64,
    epsilon: f64,
    f: &dyn SmoothProfile,
    spec: &GridSpec,
) -> Result<ExponentAction> {
    let d = a.dim;
    if psi.dim() != d || spec.dim() != d {
        return Err(Error::DimensionMismatch(format!(
            "symbol has {d} axes, profile {}, grid {}",
            psi.dim(),
            spec.dim()
        )));
    }
    check_point_dims("exponent action", d, &[("x0", x0)])?;
    if epsilon <= 0.0 {
        return Err(Error::Domain(format!("packet width must be positive, got {epsilon}")));
    }
    let r = a.order_r();
    let packet_scale = epsilon * lambda.powf(1.0 - r);
    if packet_scale < PACKET_SCALE_FLOOR {
        return Err(Error::Precondition(format!(
            "packet too narrow: eps * lambda^(1-r) = {packet_scale:.3} is below {PACKET_SCALE_FLOOR}"
        )));
    }

    let amp_scale = epsilon.powf(-(d as f64) / 2.0);
    let mut u = GridFunction::zeros(spec.clone());
    for i in 0..u.values.len() {
        let x = spec.point(&spec.unflat(i));
        let w = x.iter().zip(x0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() / epsilon;
        let fv = f.eval(w);
        if fv != 0.0 {
            u.values[i] = Complex64::from_polar(amp_scale * fv, lambda * psi.eval(&x));
        }
    }

    // the leading term lives where the packet does; everything below
    // round-off of the peak contributes nothing to either side
    let umax = u.sup_norm();
    let support: Vec<usize> =
        (0..u.values.len()).filter(|&i| u.values[i].norm() > umax * 1e-14).collect();

    for &i in &support {
        let x = spec.point(&spec.unflat(i));
        for (axis, gi) in psi.grad(&x).iter().enumerate() {
            let band = CARRIER_BAND_FRACTION * spec.axes[axis].nyquist();
            if (lambda * gi).abs() > band {
                return Err(Error::Aliasing(format!(
                    "carrier frequency {:.1} exceeds {:.1} on axis {axis}",
                    (lambda * gi).abs(),
                    band
                )));
            }
        }
    }

    let applied = pdo::apply_symbol_pdo(a, &u)?;

    let mut approx = GridFunction::zeros(spec.clone());
    for &i in &support {
        let x = spec.point(&spec.unflat(i));
        let (_, g) = direct_phase(a.phase.as_deref(), psi, &x, lambda)?;
        let frozen: Vec<f64> = psi.grad(&x).iter().map(|&e| lambda * e).collect();
        let b = a.base_eval(&x, &frozen);
        approx.values[i] = Complex64::from_polar(1.0, g) * b * u.values[i];
    }

    let mut acc = 0.0;
    for i in 0..approx.values.len() {
        let x = spec.point(&spec.unflat(i));
        if inside_box(psi.validity(), &x) {
            acc += (applied.values[i] - approx.values[i]).norm_sqr();
        }
    }
    let residual_l2 = (acc * spec.cell_volume()).sqrt();
    Ok(ExponentAction { approx, residual_l2 })
}

/// Curvature-correction deviation between two profiles over a frequency
/// ladder: rows of `max_x |omega(psi) - omega(psi_alt)|`, the max taken on a
/// probe grid of the shared validity box.
pub fn omega_stability(
    phi: &PhaseFunction,
    psi: &PhaseProfile,
    psi_alt: &PhaseProfile,
    lambdas: &[f64],
) -> Result<Vec<OmegaDeviation>> {
    let d = phi.dim;
    if psi.dim() != d || psi_alt.dim() != d {
        return Err(Error::DimensionMismatch(format!(
            "profiles have {} and {} axes, phase has {d}",
            psi.dim(),
            psi_alt.dim()
        )));
    }
    if psi.validity != psi_alt.validity {
        return Err(Error::Domain("profiles must share a validity box".into()));
    }
    let probes = probe_points(&psi.validity, 9);
    let mut rows = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let mut worst = 0.0f64;
        for x in &probes {
            let (_, _, a1, a2) = exponent_core(Some(phi), psi, x, lambda)?;
            let (_, _, b1, b2) = exponent_core(Some(phi), psi_alt, x, lambda)?;
            worst = worst.max(((a1 + a2) - (b1 + b2)).abs());
        }
        rows.push(OmegaDeviation { lambda, max_deviation: worst });
    }
    Ok(rows)
}

/// Stationary solve plus the direct output phase
/// `lambda <x - y, eta> + phi(x, lambda eta) + lambda (psi(y) - psi(x))`
/// at `y = y_s`, `eta = psi'(y_s)`.
fn direct_phase(
    phi: Option<&PhaseFunction>,
    psi: &dyn CarrierPhase,
    x: &[f64],
    lambda: f64,
) -> Result<(StationaryPoint, f64)> {
    let Some(phi) = phi else {
        return Ok((StationaryPoint::resting(x.to_vec(), psi.grad(x)), 0.0));
    };
    let point = solve_exponent_stationary(phi, psi, x, lambda, DEFAULT_TOL)?;
    let y = &point.location;
    let eta = &point.covector;
    let pairing: f64 = x.iter().zip(y).zip(eta).map(|((a, b), e)| (a - b) * e).sum();
    let arg: Vec<f64> = eta.iter().map(|&e| lambda * e).collect();
    let g = lambda * pairing + phi.eval(x, &arg) + lambda * (psi.eval(y) - psi.eval(x));
    Ok((point, g))
}

/// Direct phase plus the two segment integrals of the curvature correction,
/// cross-checked against each other: with `Y(t) = x + t (y_s - x)`,
///
/// ```text
/// omega_1 =  lambda^{2-2r} Int_0^1 <psi''(Y) phi_xi(x, lambda psi'(Y)), y_s - x> dt
/// omega_2 = -lambda^{2-2r} Int_0^1 t <psi''(Y) (y_s - x), y_s - x> dt
/// ```
///
/// and the reconstruction `phi(x, lambda psi'(x)) + lambda^{-1+2r} omega`
/// must reproduce the direct phase to near round-off.
fn exponent_core(
    phi: Option<&PhaseFunction>,
    psi: &dyn CarrierPhase,
    x: &[f64],
    lambda: f64,
) -> Result<(StationaryPoint, f64, f64, f64)> {
    let (point, g) = direct_phase(phi, psi, x, lambda)?;
    let Some(phi) = phi else {
        return Ok((point, g, 0.0, 0.0));
    };
    let r = phi.order_r;
    let dy: Vec<f64> = point.location.iter().zip(x).map(|(a, b)| a - b).collect();
    let mut om1 = 0.0;
    let mut om2 = 0.0;
    for (t, w) in quad::gauss_legendre_on(0.0, 1.0, SEGMENT_NODES) {
        let yt: Vec<f64> = x.iter().zip(&dy).map(|(a, b)| a + t * b).collect();
        let arg: Vec<f64> = psi.grad(&yt).iter().map(|&e| lambda * e).collect();
        let shift = phi.grad_xi(x, &arg)?;
        let h_shift = psi.hessian_apply(&yt, &shift);
        let h_dy = psi.hessian_apply(&yt, &dy);
        let a1: f64 = h_shift.iter().zip(&dy).map(|(a, b)| a * b).sum();
        let a2: f64 = h_dy.iter().zip(&dy).map(|(a, b)| a * b).sum();
        om1 += w * a1;
        om2 -= w * t * a2;
    }
    let scale = lambda.powf(2.0 - 2.0 * r);
    om1 *= scale;
    om2 *= scale;

    let frozen_arg: Vec<f64> = psi.grad(x).iter().map(|&e| lambda * e).collect();
    let frozen = phi.eval(x, &frozen_arg);
    let recon = frozen + lambda.powf(-1.0 + 2.0 * r) * (om1 + om2);
    let denom = g.abs().max(frozen.abs()).max(1.0);
    if (g - recon).abs() > 1e-9 * denom {
        return Err(Error::Quadrature(format!(
            "segment integrals disagree with the direct phase: {g:.12e} vs {recon:.12e}"
        )));
    }
    Ok((point, g, om1, om2))
}

/// Shared driver: iterate `state -> map(state)` until the sup gap falls
/// under `tol`, guarding against three consecutive gap increases. The
/// returned residual comes from one extra substitution at the final state.
fn run_fixed_point(
    start: (Vec<f64>, Vec<f64>),
    map: impl Fn(&[f64], &[f64]) -> Result<(Vec<f64>, Vec<f64>)>,
    tol: f64,
    max_iter: usize,
) -> Result<StationaryPoint> {
    let (mut loc, mut cov) = start;
    let mut trace: Vec<f64> = Vec::new();
    let mut rises = 0usize;
    for p in 1..=max_iter {
        let (nl, nc) = map(&loc, &cov)?;
        let gap = sup_gap(&nl, &loc).max(sup_gap(&nc, &cov));
        if let Some(&prev) = trace.last() {
            if gap > prev {
                rises += 1;
            } else {
                rises = 0;
            }
        }
        trace.push(gap);
        if rises >= 3 {
            return Err(Error::Divergence { trace });
        }
        loc = nl;
        cov = nc;
        if gap <= tol {
            let (rl, rc) = map(&loc, &cov)?;
            let residual = sup_gap(&rl, &loc).max(sup_gap(&rc, &cov));
            let gap_ratio = max_gap_ratio(&trace, tol);
            return Ok(StationaryPoint {
                location: loc,
                covector: cov,
                iterations: p,
                residual,
                gap_ratio,
            });
        }
    }
    Err(Error::Divergence { trace })
}

/// Largest consecutive gap ratio, skipping steps already at the tolerance
/// floor where the quotient is noise.
fn max_gap_ratio(trace: &[f64], tol: f64) -> f64 {
    let mut ratio = 0.0f64;
    for w in trace.windows(2) {
        if w[0] > tol {
            ratio = ratio.max(w[1] / w[0]);
        }
    }
    ratio
}

/// Uniform probe grid over a box, endpoints included.
fn probe_points(bounds: &[(f64, f64)], per_axis: usize) -> Vec<Vec<f64>> {
    let mut pts: Vec<Vec<f64>> = vec![Vec::with_capacity(bounds.len())];
    for &(a, b) in bounds {
        let step = (b - a) / (per_axis - 1) as f64;
        let mut next = Vec::with_capacity(pts.len() * per_axis);
        for p in &pts {
            for k in 0..per_axis {
                let mut q = p.clone();
                q.push(a + k as f64 * step);
                next.push(q);
            }
        }
        pts = next;
    }
    pts
}

fn inside_box(bounds: &[(f64, f64)], x: &[f64]) -> bool {
    bounds.iter().zip(x).all(|(&(a, b), &t)| t >= a && t <= b)
}

fn check_point_dims(what: &str, d: usize, points: &[(&str, &[f64])]) -> Result<()> {
    for (name, p) in points {
        if p.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "{what} needs {name} of dimension {d}, got {}",
                p.len()
            )));
        }
    }
    Ok(())
}

fn sup_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|t| t * t).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smooth::{CutoffStep, Gaussian1D};
    use crate::symbols::{
        constant_symbol, model_phase, AxisProfile, BumpSpec, PhaseModel, SeparableField,
        SumField, XiPart,
    };
    use crate::field::RealField3;

    fn long_range(r: f64) -> PhaseFunction {
        model_phase(&PhaseModel::LongRange {
            r,
            bump: BumpSpec::new(vec![0.0], 2.0),
            cutoff: (0.5, 1.0),
        })
        .unwrap()
    }

    #[test]
    fn zero_phase_fixed_point_is_the_origin() {
        let phi = model_phase(&PhaseModel::Zero { dim: 1 }).unwrap();
        let theta = AmplitudePhase::average(&phi);
        let p = solve_amplitude_stationary(&theta, &[0.3], &[32.0], 1e-12, 16).unwrap();
        assert_eq!(p.iterations, 1);
        assert_eq!(p.residual, 0.0);
        assert!(p.location[0].abs() == 0.0 && p.covector[0].abs() == 0.0);
    }

    /// `Theta = c (x' - x) q(|xi|)` with `q` saturated: the frequency slot is
    /// flat there, so the solution is `z = 0`, `eta = c / |xi|`, reached in
    /// two map applications.
    #[test]
    fn saturated_linear_amplitude_solves_in_two_iterations() {
        let c = 0.7;
        let poly: Arc<dyn SmoothProfile> = Arc::new(Poly1D { coeffs: vec![0.0, 1.0] });
        let q: Arc<dyn SmoothProfile> = Arc::new(CutoffStep::new(1.0, 2.0));
        let gain = SeparableField {
            dim: 1,
            amp: c,
            x_part: None,
            xp_part: Some(vec![AxisProfile::new(poly.clone(), 0.0, 1.0)]),
            xi_part: XiPart::Radial { g: q.clone(), vanish_below: 1.0 },
        };
        let loss = SeparableField {
            dim: 1,
            amp: -c,
            x_part: Some(vec![AxisProfile::new(poly, 0.0, 1.0)]),
            xp_part: None,
            xi_part: XiPart::Radial { g: q, vanish_below: 1.0 },
        };
        let field: Arc<dyn RealField3> =
            Arc::new(SumField(vec![Arc::new(gain), Arc::new(loss)]));
        let theta = AmplitudePhase::new(1, 0.0, field).unwrap();
        let p = solve_amplitude_stationary(&theta, &[0.4], &[32.0], 1e-12, 16).unwrap();
        assert!(p.iterations <= 2, "took {} iterations", p.iterations);
        assert!(p.location[0].abs() < 1e-14);
        assert!((p.covector[0] - c / 32.0).abs() < 1e-14);
        assert!(p.residual < 1e-12);
    }

    #[test]
    fn low_frequency_is_rejected() {
        let theta = AmplitudePhase::difference(&long_range(0.5));
        let err = solve_amplitude_stationary(&theta, &[0.0], &[4.0], 1e-10, 16);
        assert!(matches!(err, Err(Error::Precondition(_))));
    }

    #[test]
    fn zero_phase_hessian_is_the_symplectic_pairing() {
        let phi = model_phase(&PhaseModel::Zero { dim: 1 }).unwrap();
        let theta = AmplitudePhase::average(&phi);
        let h = hessian_probe(&theta, &[0.3], &[32.0], (&[0.0], &[0.0])).unwrap();
        assert!((h.det_abs - 1.0).abs() < 1e-12);
        assert_eq!(h.signature, 0);
    }

    #[test]
    fn diagonal_amplitude_reduces_to_itself() {
        // Theta independent of the second slot: the reduced phase equals the
        // diagonal value and the correction vanishes.
        let phi = long_range(0.6);
        let theta = AmplitudePhase::from_phase(&phi);
        let one = constant_symbol(1, Complex64::new(1.0, 0.0));
        let amp = OscillatingAmplitude::oscillating(Arc::new(theta), 0.0, one.base.clone());
        let x = [0.3];
        let xi = [48.0];
        let out = symbol_from_oscillating_amplitude(&amp, &x, &xi).unwrap();
        assert!((out.phi - phi.eval(&x, &xi)).abs() < 1e-10);
        assert!(out.phi_correction.abs() < 1e-10);
        assert!((out.b_leading - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        assert!(out.point.residual < 1e-10);
    }

    #[test]
    fn plain_amplitude_extracts_trivially() {
        let one = constant_symbol(1, Complex64::new(1.0, 0.0));
        let amp = OscillatingAmplitude::plain(1, 0.0, one.base.clone());
        let out = symbol_from_oscillating_amplitude(&amp, &[0.1], &[20.0]).unwrap();
        assert_eq!(out.phi, 0.0);
        assert_eq!(out.phi_correction, 0.0);
        assert!((out.b_leading - Complex64::new(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn profile_with_flat_spot_is_rejected() {
        // psi = x^2 has zero slope at the origin
        let err = PhaseProfile::polynomial(vec![vec![0.0, 0.0, 1.0]], vec![(-1.0, 1.0)]);
        assert!(matches!(err, Err(Error::Precondition(_))));
    }

    #[test]
    fn flat_frequency_slot_fixes_the_exponent_point_immediately() {
        let phi = model_phase(&PhaseModel::Zero { dim: 1 }).unwrap();
        let psi = PhaseProfile::linear(&[1.0], vec![(-1.0, 1.0)]).unwrap();
        let p = solve_exponent_stationary(&phi, &psi, &[0.2], 64.0, 1e-12).unwrap();
        assert_eq!(p.iterations, 1);
        assert_eq!(p.location[0], 0.2);
        assert_eq!(p.covector[0], 1.0);
        assert_eq!(p.residual, 0.0);
    }

    #[test]
    fn linear_profile_kills_the_curvature_correction() {
        let phi = long_range(0.5);
        let psi = PhaseProfile::linear(&[1.2], vec![(-1.0, 1.0)]).unwrap();
        let one = constant_symbol(1, Complex64::new(1.0, 0.0));
        let a = OscillatingSymbol::oscillating(Arc::new(phi.clone()), 0.0, one.base.clone());
        let rep = exponent_phase(&a, &psi, &[0.3], 64.0).unwrap();
        assert!(rep.omega.abs() < 1e-12);
        assert!(rep.omega_1.abs() < 1e-12 && rep.omega_2.abs() < 1e-12);
        let frozen = phi.eval(&[0.3], &[64.0 * 1.2]);
        assert!((rep.g - frozen).abs() < 1e-10 * frozen.abs().max(1.0));
        // the point still shifts: only the correction dies, not the solve
        assert!((rep.y_s[0] - 0.3).abs() > 1e-6);
    }

    #[test]
    fn zero_phase_symbol_has_zero_output_phase() {
        let a = constant_symbol(1, Complex64::new(1.0, 0.0));
        let psi =
            PhaseProfile::polynomial(vec![vec![0.0, 1.0, 0.15]], vec![(-1.0, 1.0)]).unwrap();
        let rep = exponent_phase(&a, &psi, &[0.4], 128.0).unwrap();
        assert_eq!(rep.g, 0.0);
        assert_eq!(rep.omega, 0.0);
        assert_eq!(rep.y_s, vec![0.4]);
    }

    #[test]
    fn identity_symbol_acts_as_the_identity_on_packets() {
        let a = constant_symbol(1, Complex64::new(1.0, 0.0));
        let psi = PhaseProfile::linear(&[1.0], vec![(-3.0, 3.0)]).unwrap();
        let spec = GridSpec::line(-8.0, 8.0, 512).unwrap();
        let f = Gaussian1D;
        let act = act_on_exponent(&a, &psi, &[0.0], 64.0, 0.5, &f, &spec).unwrap();
        assert!(act.residual_l2 < 1e-6, "residual {}", act.residual_l2);
        assert!(act.approx.sup_norm() > 1.0);
    }

    #[test]
    fn zero_base_yields_zero_action() {
        let a = constant_symbol(1, Complex64::ZERO);
        let psi = PhaseProfile::linear(&[1.0], vec![(-3.0, 3.0)]).unwrap();
        let spec = GridSpec::line(-8.0, 8.0, 512).unwrap();
        let act = act_on_exponent(&a, &psi, &[0.0], 64.0, 0.5, &Gaussian1D, &spec).unwrap();
        assert_eq!(act.approx.sup_norm(), 0.0);
        assert!(act.residual_l2 < 1e-10, "residual {}", act.residual_l2);
    }

    #[test]
    fn carrier_beyond_the_band_is_an_aliasing_error() {
        let a = constant_symbol(1, Complex64::new(1.0, 0.0));
        let psi = PhaseProfile::linear(&[1.0], vec![(-3.0, 3.0)]).unwrap();
        let spec = GridSpec::line(-8.0, 8.0, 512).unwrap();
        // Nyquist is (n/2) * 2 pi / 16 ~ 100.5; 0.8 of it is ~80.4
        let err = act_on_exponent(&a, &psi, &[0.0], 90.0, 0.5, &Gaussian1D, &spec);
        assert!(matches!(err, Err(Error::Aliasing(_))), "got {err:?}");
    }

    #[test]
    fn narrow_packet_is_rejected() {
        let a = constant_symbol(1, Complex64::new(1.0, 0.0));
        let psi = PhaseProfile::linear(&[1.0], vec![(-3.0, 3.0)]).unwrap();
        let spec = GridSpec::line(-8.0, 8.0, 512).unwrap();
        let err = act_on_exponent(&a, &psi, &[0.0], 64.0, 0.01, &Gaussian1D, &spec);
        assert!(matches!(err, Err(Error::Precondition(_))), "got {err:?}");
    }

    #[test]
    fn identical_profiles_have_zero_deviation() {
        let phi = long_range(0.5);
        let psi =
            PhaseProfile::polynomial(vec![vec![0.0, 1.0, 0.15]], vec![(-0.5, 0.5)]).unwrap();
        let rows = omega_stability(&phi, &psi, &psi.plus(0.0, &psi).unwrap(), &[32.0, 64.0])
            .unwrap();
        for row in rows {
            assert_eq!(row.max_deviation, 0.0, "lambda {}", row.lambda);
        }
    }

    #[test]
    fn linear_profiles_have_zero_deviation() {
        let phi = long_range(0.5);
        let psi = PhaseProfile::linear(&[1.0], vec![(-0.5, 0.5)]).unwrap();
        let alt = psi.plus(0.05, &PhaseProfile::linear(&[0.3], vec![(-0.5, 0.5)]).unwrap())
            .unwrap();
        let rows = omega_stability(&phi, &psi, &alt, &[32.0, 128.0]).unwrap();
        for row in rows {
            assert!(row.max_deviation < 1e-12, "lambda {}", row.lambda);
        }
    }
}
