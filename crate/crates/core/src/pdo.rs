//! Discrete pseudo-differential operators: Fourier quadrature, symbol and
//! amplitude application, Schwartz kernels, dense operator matrices and
//! norm / singular-value probes.
//!
//! Everything here is direct quadrature on truncated boxes; this module is
//! the ground-truth oracle the asymptotic machinery is tested against.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridSpec};
use crate::symbols::{OscillatingAmplitude, OscillatingSymbol};

const TAU: f64 = 2.0 * std::f64::consts::PI;

/// Unitary Fourier transform pair on a grid, with cached FFT plans.
///
/// Forward: `u^(xi_k) = (2 pi)^{-d/2} sum_j u(x_j) e^{-i<x_j, xi_k>} dx`,
/// realized per axis by an index sign flip and a boundary phase so a plain
/// FFT lands on the centered frequency grid. Inverse composes to identity.
pub struct FourierTransform {
    spec: GridSpec,
    fwd: Vec<Arc<dyn Fft<f64>>>,
    inv: Vec<Arc<dyn Fft<f64>>>,
}

impl FourierTransform {
    pub fn new(spec: GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = spec
            .axes
            .iter()
            .map(|a| planner.plan_fft(a.n, FftDirection::Forward))
            .collect();
        let inv = spec
            .axes
            .iter()
            .map(|a| planner.plan_fft(a.n, FftDirection::Inverse))
            .collect();
        FourierTransform { spec, fwd, inv }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    /// Apply `f` to every 1-d line of `data` along `axis`.
    fn each_line(&self, data: &mut [Complex64], axis: usize, mut f: impl FnMut(&mut [Complex64])) {
        let n = self.spec.axes[axis].n;
        let stride: usize = self.spec.axes[axis + 1..].iter().map(|a| a.n).product();
        let block = n * stride;
        let mut line = vec![Complex64::ZERO; n];
        for base in 0..data.len() / block {
            for off in 0..stride {
                let start = base * block + off;
                for j in 0..n {
                    line[j] = data[start + j * stride];
                }
                f(&mut line);
                for j in 0..n {
                    data[start + j * stride] = line[j];
                }
            }
        }
    }

    /// Transform to the centered frequency grid.
    pub fn forward(&self, u: &GridFunction) -> GridFunction {
        assert_eq!(u.spec, self.spec, "transform and function grids differ");
        let mut data = u.values.clone();
        for (t, ax) in self.spec.axes.iter().enumerate() {
            let norm = ax.dx() / TAU.sqrt();
            let plan = self.fwd[t].clone();
            self.each_line(&mut data, t, |line| {
                for (j, v) in line.iter_mut().enumerate() {
                    if j % 2 == 1 {
                        *v = -*v;
                    }
                }
                plan.process(line);
                for (k, v) in line.iter_mut().enumerate() {
                    let xi = ax.freq(k);
                    *v *= Complex64::from_polar(norm, -ax.a * xi);
                }
            });
        }
        GridFunction { spec: self.spec.clone(), values: data }
    }

    /// Transform frequency-grid values back to the spatial grid.
    pub fn inverse(&self, uhat: &GridFunction) -> GridFunction {
        assert_eq!(uhat.spec, self.spec, "transform and function grids differ");
        let mut data = uhat.values.clone();
        for (t, ax) in self.spec.axes.iter().enumerate() {
            let norm = ax.dxi() / TAU.sqrt();
            let plan = self.inv[t].clone();
            self.each_line(&mut data, t, |line| {
                for (k, v) in line.iter_mut().enumerate() {
                    let xi = ax.freq(k);
                    *v *= Complex64::from_polar(1.0, ax.a * xi);
                }
                plan.process(line);
                for (j, v) in line.iter_mut().enumerate() {
                    *v *= norm;
                    if j % 2 == 1 {
                        *v = -*v;
                    }
                }
            });
        }
        GridFunction { spec: self.spec.clone(), values: data }
    }
}

/// Fraction of spectral energy at frequencies with any `|xi_t|` above
/// `frac * nyquist_t`.
pub fn high_band_fraction(uhat: &GridFunction, frac: f64) -> f64 {
    let spec = &uhat.spec;
    let mut high = 0.0;
    let mut total = 0.0;
    for (i, v) in uhat.values.iter().enumerate() {
        let e = v.norm_sqr();
        total += e;
        let idx = spec.unflat(i);
        let hot = spec
            .axes
            .iter()
            .zip(&idx)
            .any(|(a, &k)| a.freq(k).abs() > frac * a.nyquist());
        if hot {
            high += e;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        high / total
    }
}

fn check_band_limit(uhat: &GridFunction) -> Result<()> {
    let f = high_band_fraction(uhat, 0.8);
    if f >= 1e-8 {
        return Err(Error::Aliasing(format!(
            "input keeps {f:.3e} of its energy above 0.8 * Nyquist"
        )));
    }
    Ok(())
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Apply a (possibly oscillating) symbol as a PDO:
/// `(A u)(x) = (2 pi)^{-d/2} sum_xi e^{i<x,xi>} a(x, xi) u^(xi) dxi`.
///
/// The input must be band-limited on the grid (energy above 0.8 Nyquist
/// below 1e-8 of total), otherwise the quadrature aliases.
pub fn apply_symbol_pdo(a: &OscillatingSymbol, u: &GridFunction) -> Result<GridFunction> {
    let ft = FourierTransform::new(u.spec.clone());
    let uhat = ft.forward(u);
    check_band_limit(&uhat)?;
    apply_symbol_to_spectrum(a, &uhat)
}

/// Same quadrature without the band-limit precondition; used internally for
/// delta columns when materializing matrices.
pub fn apply_symbol_pdo_unchecked(a: &OscillatingSymbol, u: &GridFunction) -> Result<GridFunction> {
    let ft = FourierTransform::new(u.spec.clone());
    let uhat = ft.forward(u);
    apply_symbol_to_spectrum(a, &uhat)
}

fn apply_symbol_to_spectrum(a: &OscillatingSymbol, uhat: &GridFunction) -> Result<GridFunction> {
    let spec = &uhat.spec;
    if a.dim != spec.dim() {
        return Err(Error::DimensionMismatch(format!(
            "symbol dimension {} vs grid dimension {}",
            a.dim,
            spec.dim()
        )));
    }
    let d = spec.dim();
    let weight = spec.freq_cell_volume() / TAU.powf(d as f64 / 2.0);
    let freqs: Vec<Vec<f64>> = (0..spec.total()).map(|k| spec.freq(&spec.unflat(k))).collect();
    let values: Vec<Result<Complex64>> = (0..spec.total())
        .into_par_iter()
        .map(|i| {
            let x = spec.point(&spec.unflat(i));
            let mut acc = Complex64::ZERO;
            for (k, xi) in freqs.iter().enumerate() {
                let av = a.eval(&x, xi);
                if !av.is_finite() {
                    return Err(Error::Domain(format!(
                        "symbol not finite at x={x:?}, xi={xi:?}"
                    )));
                }
                acc += Complex64::from_polar(1.0, dot(&x, xi)) * av * uhat.values[k];
            }
            Ok(acc * weight)
        })
        .collect();
    let values = values.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(GridFunction { spec: spec.clone(), values })
}

fn is_finite(v: Complex64) -> bool {
    v.re.is_finite() && v.im.is_finite()
}

/// Apply an amplitude as a PDO via the double quadrature
/// `(A u)(x) = (2 pi)^{-d} sum_{x', xi} e^{i<x - x', xi>} a(x, x', xi) u(x') dx' dxi`.
pub fn apply_amplitude_pdo(a: &OscillatingAmplitude, u: &GridFunction) -> Result<GridFunction> {
    let ft = FourierTransform::new(u.spec.clone());
    check_band_limit(&ft.forward(u))?;
    apply_amplitude_pdo_unchecked(a, u)
}

/// The same double quadrature without the band-limit precondition.
pub fn apply_amplitude_pdo_unchecked(
    a: &OscillatingAmplitude,
    u: &GridFunction,
) -> Result<GridFunction> {
    let spec = &u.spec;
    if a.dim != spec.dim() {
        return Err(Error::DimensionMismatch(format!(
            "amplitude dimension {} vs grid dimension {}",
            a.dim,
            spec.dim()
        )));
    }
    let d = spec.dim();
    let total = spec.total();
    let weight = spec.cell_volume() * spec.freq_cell_volume() / TAU.powf(d as f64);
    let pts: Vec<Vec<f64>> = (0..total).map(|i| spec.point(&spec.unflat(i))).collect();
    let freqs: Vec<Vec<f64>> = (0..total).map(|k| spec.freq(&spec.unflat(k))).collect();
    let values: Vec<Result<Complex64>> = (0..total)
        .into_par_iter()
        .map(|i| {
            let x = &pts[i];
            let mut acc = Complex64::ZERO;
            for xi in &freqs {
                // inner x' sum for this (x, xi)
                let mut inner = Complex64::ZERO;
                for (jp, xp) in pts.iter().enumerate() {
                    let uv = u.values[jp];
                    if uv == Complex64::ZERO {
                        continue;
                    }
                    let av = a.eval(x, xp, xi);
                    if !av.is_finite() {
                        return Err(Error::Domain(format!(
                            "amplitude not finite at x={x:?}, x'={xp:?}, xi={xi:?}"
                        )));
                    }
                    inner += Complex64::from_polar(1.0, -dot(xp, xi)) * av * uv;
                }
                acc += Complex64::from_polar(1.0, dot(x, xi)) * inner;
            }
            Ok(acc * weight)
        })
        .collect();
    let values = values.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(GridFunction { spec: spec.clone(), values })
}

/// Schwartz kernel of an amplitude operator at one point pair:
/// `k(x, x') = (2 pi)^{-d} sum_xi e^{i<x - x', xi>} a(x, x', xi) dxi`
/// over the frequency grid of `spec`.
///
/// On the diagonal the xi-integral only converges absolutely for declared
/// order below `-d`; anything else is rejected.
pub fn kernel_of(
    a: &OscillatingAmplitude,
    spec: &GridSpec,
    x: &[f64],
    xp: &[f64],
) -> Result<Complex64> {
    let d = spec.dim();
    if a.dim != d || x.len() != d || xp.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "kernel point dimensions {}/{} vs amplitude dimension {}",
            x.len(),
            xp.len(),
            a.dim
        )));
    }
    let same = x.iter().zip(xp).all(|(s, t)| s == t);
    if same && a.order_m >= -(d as f64) {
        return Err(Error::Divergence {
            trace: vec![a.order_m],
        });
    }
    let diff: Vec<f64> = x.iter().zip(xp).map(|(s, t)| s - t).collect();
    let weight = spec.freq_cell_volume() / TAU.powf(d as f64);
    let mut acc = Complex64::ZERO;
    for k in 0..spec.total() {
        let xi = spec.freq(&spec.unflat(k));
        acc += Complex64::from_polar(1.0, dot(&diff, &xi)) * a.eval(x, xp, &xi);
    }
    Ok(acc * weight)
}

/// Dense finite section of an operator on a grid.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub spec: GridSpec,
    pub entries: DMatrix<Complex64>,
}

impl OperatorMatrix {
    pub fn apply(&self, u: &GridFunction) -> GridFunction {
        assert_eq!(u.spec, self.spec);
        let v = nalgebra::DVector::from_column_slice(&u.values);
        let w = &self.entries * v;
        GridFunction { spec: self.spec.clone(), values: w.as_slice().to_vec() }
    }
}

/// Materialize any linear application procedure into a dense matrix by
/// feeding it the grid coordinate functions (deltas scaled by cell volume).
pub fn materialize(
    apply: impl Fn(&GridFunction) -> Result<GridFunction> + Sync,
    spec: &GridSpec,
) -> Result<OperatorMatrix> {
    let n = spec.total();
    let cols: Vec<Result<Vec<Complex64>>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut e = GridFunction::zeros(spec.clone());
            e.values[j] = Complex64::new(1.0, 0.0);
            Ok(apply(&e)?.values)
        })
        .collect();
    let mut entries = DMatrix::zeros(n, n);
    for (j, col) in cols.into_iter().enumerate() {
        let col = col?;
        for (i, v) in col.into_iter().enumerate() {
            entries[(i, j)] = v;
        }
    }
    Ok(OperatorMatrix { spec: spec.clone(), entries })
}

/// Materialize a symbol operator directly: row `i` is the inverse-transform
/// of `a(x_i, .) e^{i<x_i, .>}` over the frequency grid, one FFT per row.
pub fn materialize_symbol(a: &OscillatingSymbol, spec: &GridSpec) -> Result<OperatorMatrix> {
    if a.dim != spec.dim() {
        return Err(Error::DimensionMismatch(format!(
            "symbol dimension {} vs grid dimension {}",
            a.dim,
            spec.dim()
        )));
    }
    let d = spec.dim();
    let n = spec.total();
    let ft = FourierTransform::new(spec.clone());
    // row_i(x_j) = dx_vol * (2 pi)^{-d} sum_k e^{i <x_i - x_j, xi_k>} a(x_i, xi_k) dxi_vol
    // The x_j-dependence is a forward transform of a(x_i, .) e^{i<x_i, .>}.
    let scale = spec.cell_volume() * spec.freq_cell_volume() / TAU.powf(d as f64);
    let rows: Vec<Result<Vec<Complex64>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = spec.point(&spec.unflat(i));
            let mut g = GridFunction::zeros(spec.clone());
            for k in 0..n {
                let xi = spec.freq(&spec.unflat(k));
                let av = a.eval(&x, &xi);
                if !av.is_finite() {
                    return Err(Error::Domain(format!(
                        "symbol not finite at x={x:?}, xi={xi:?}"
                    )));
                }
                g.values[k] = av * Complex64::from_polar(1.0, dot(&x, &xi));
            }
            // forward transform computes sum_k g_k e^{-i<x_j, xi_k>} * dx_prefactors;
            // strip its normalization and keep the raw sum.
            let f = ft.forward_of_spectrum(&g);
            Ok(f.values.iter().map(|v| v * scale).collect())
        })
        .collect();
    let mut entries = DMatrix::zeros(n, n);
    for (i, row) in rows.into_iter().enumerate() {
        let row = row?;
        for (j, v) in row.into_iter().enumerate() {
            entries[(i, j)] = v;
        }
    }
    Ok(OperatorMatrix { spec: spec.clone(), entries })
}

impl FourierTransform {
    /// Raw sum `S_j = sum_k g_k e^{-i<x_j, xi_k>}` over the frequency grid,
    /// reusing the cached plans (no quadrature prefactors).
    fn forward_of_spectrum(&self, g: &GridFunction) -> GridFunction {
        let mut data = g.values.clone();
        for (t, ax) in self.spec.axes.iter().enumerate() {
            let plan = self.fwd[t].clone();
            self.each_line(&mut data, t, |line| {
                // e^{-i x_j xi_k} = e^{-i a xi_k} (-1)^j e^{-2 pi i jk/n}
                for (k, v) in line.iter_mut().enumerate() {
                    let xi = ax.freq(k);
                    *v *= Complex64::from_polar(1.0, -ax.a * xi);
                }
                plan.process(line);
                for (j, v) in line.iter_mut().enumerate() {
                    if j % 2 == 1 {
                        *v = -*v;
                    }
                }
            });
        }
        GridFunction { spec: self.spec.clone(), values: data }
    }
}

/// Materialize an amplitude operator (direct triple quadrature).
pub fn materialize_amplitude(
    a: &OscillatingAmplitude,
    spec: &GridSpec,
) -> Result<OperatorMatrix> {
    if a.dim != spec.dim() {
        return Err(Error::DimensionMismatch(format!(
            "amplitude dimension {} vs grid dimension {}",
            a.dim,
            spec.dim()
        )));
    }
    let d = spec.dim();
    let n = spec.total();
    let scale = spec.cell_volume() * spec.freq_cell_volume() / TAU.powf(d as f64);
    let pts: Vec<Vec<f64>> = (0..n).map(|i| spec.point(&spec.unflat(i))).collect();
    let freqs: Vec<Vec<f64>> = (0..n).map(|k| spec.freq(&spec.unflat(k))).collect();
    let rows: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = &pts[i];
            (0..n)
                .map(|j| {
                    let xp = &pts[j];
                    let mut acc = Complex64::ZERO;
                    for xi in &freqs {
                        let phase = dot(x, xi) - dot(xp, xi);
                        acc += Complex64::from_polar(1.0, phase) * a.eval(x, xp, xi);
                    }
                    acc * scale
                })
                .collect()
        })
        .collect();
    let mut entries = DMatrix::zeros(n, n);
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            entries[(i, j)] = v;
        }
    }
    Ok(OperatorMatrix { spec: spec.clone(), entries })
}

/// Operator norm and full singular spectrum of a finite section.
#[derive(Debug, Clone)]
pub struct NormSpectrum {
    pub operator_norm: f64,
    /// Descending.
    pub singular_values: Vec<f64>,
}

/// Full SVD probe. The L2 weighting is a uniform scalar on these grids
/// (every cell has the same volume), so it cancels in the conjugation and
/// the singular values of the raw matrix are already the L2 ones.
pub fn norm_and_spectrum_probe(m: &OperatorMatrix) -> Result<NormSpectrum> {
    let svd = m.entries.clone().svd(false, false);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    if sv.iter().any(|s| !s.is_finite()) {
        return Err(Error::Conditioning("singular values not finite".into()));
    }
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let operator_norm = sv.first().copied().unwrap_or(0.0);
    Ok(NormSpectrum { operator_norm, singular_values: sv })
}

/// Leading singular values of an implicitly defined operator via randomized
/// subspace iteration; `apply` and `apply_adj` are matvecs with the operator
/// and its adjoint on length-`n` vectors.
pub fn top_singular_values(
    apply: &(dyn Fn(&[Complex64]) -> Vec<Complex64> + Sync),
    apply_adj: &(dyn Fn(&[Complex64]) -> Vec<Complex64> + Sync),
    n: usize,
    k: usize,
    power_iters: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if k == 0 || k > n {
        return Err(Error::Range(format!("requested {k} singular values of size {n}")));
    }
    let p = (k + 6).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = DMatrix::<Complex64>::zeros(n, p);
    for c in 0..p {
        let col: Vec<Complex64> = (0..n)
            .map(|_| {
                let (u1, u2) = (rng.gen::<f64>().max(1e-12), rng.gen::<f64>());
                let r = (-2.0 * u1.ln()).sqrt();
                Complex64::new(r * (TAU * u2).cos(), r * (TAU * u2).sin())
            })
            .collect();
        let img = apply(&col);
        y.set_column(c, &nalgebra::DVector::from_vec(img));
    }
    for _ in 0..power_iters {
        let q = orthonormalize(y)?;
        let mut z = DMatrix::<Complex64>::zeros(n, p);
        for c in 0..p {
            let img = apply_adj(q.column(c).as_slice());
            z.set_column(c, &nalgebra::DVector::from_vec(img));
        }
        let qz = orthonormalize(z)?;
        y = DMatrix::<Complex64>::zeros(n, p);
        for c in 0..p {
            let img = apply(qz.column(c).as_slice());
            y.set_column(c, &nalgebra::DVector::from_vec(img));
        }
    }
    let q = orthonormalize(y)?;
    // singular values of Q^H A = singular values of A^H Q
    let mut c = DMatrix::<Complex64>::zeros(n, p);
    for j in 0..p {
        let img = apply_adj(q.column(j).as_slice());
        c.set_column(j, &nalgebra::DVector::from_vec(img));
    }
    let svd = c.svd(false, false);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv.truncate(k);
    Ok(sv)
}

fn orthonormalize(m: DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let qr = m.qr();
    let q = qr.q();
    if q.iter().any(|v| !is_finite(*v)) {
        return Err(Error::Conditioning("QR produced non-finite factors".into()));
    }
    Ok(q)
}

/// Centered Gaussian packet `e^{i <eta, x>} e^{-|x - c|^2 / (2 w^2)}`.
pub fn gaussian_packet(spec: &GridSpec, center: &[f64], width: f64, eta: &[f64]) -> GridFunction {
    GridFunction::from_fn(spec.clone(), |x| {
        let q: f64 = x
            .iter()
            .zip(center)
            .map(|(a, c)| (a - c) * (a - c))
            .sum();
        let ph: f64 = x.iter().zip(eta).map(|(a, e)| a * e).sum();
        Complex64::from_polar((-q / (2.0 * width * width)).exp(), ph)
    })
}

/// Midpoint boxes for the oscillatory corner integrals
/// `(2 pi)^{-d} integral of p(z, zeta) e^{-i<z, zeta>}`.
///
/// The `z` box must cover the numerical support of the integrand and the
/// `zeta` box its frequency content; each step must resolve the fastest
/// oscillation the other box admits (keep `dz * zeta_half` and
/// `dzeta * z_half` below about pi/2).
#[derive(Debug, Clone, Copy)]
pub struct CornerQuad {
    pub z_half: f64,
    pub z_pts: usize,
    pub zeta_half: f64,
    pub zeta_pts: usize,
}

impl CornerQuad {
    pub fn new(z_half: f64, z_pts: usize, zeta_half: f64, zeta_pts: usize) -> Result<Self> {
        if !(z_half > 0.0) || !(zeta_half > 0.0) || z_pts < 2 || zeta_pts < 2 {
            return Err(Error::Config(format!(
                "corner quadrature needs positive boxes and at least 2 points per axis, \
                 got z {z_half}/{z_pts}, zeta {zeta_half}/{zeta_pts}"
            )));
        }
        Ok(CornerQuad { z_half, z_pts, zeta_half, zeta_pts })
    }

    /// A box sized for integrands of unit width; widen for slowly decaying
    /// phases or broad supports.
    pub fn standard() -> Self {
        CornerQuad { z_half: 8.0, z_pts: 256, zeta_half: 24.0, zeta_pts: 256 }
    }
}

/// Midpoint grid on `[-half, half]^dim` as flat point list plus cell volume.
fn midpoint_box(half: f64, pts: usize, dim: usize) -> (Vec<Vec<f64>>, f64) {
    let step = 2.0 * half / pts as f64;
    let line: Vec<f64> = (0..pts).map(|i| -half + (i as f64 + 0.5) * step).collect();
    let mut out: Vec<Vec<f64>> = vec![Vec::new()];
    for _ in 0..dim {
        let mut next = Vec::with_capacity(out.len() * pts);
        for prefix in &out {
            for &t in &line {
                let mut p = prefix.clone();
                p.push(t);
                next.push(p);
            }
        }
        out = next;
    }
    (out, step.powi(dim as i32))
}

/// The oscillatory corner integral
/// `(2 pi)^{-d} sum_{z, zeta} p(z, zeta) e^{-i<z, zeta>} dz dzeta`
/// on midpoint boxes. This one quadrature backs the amplitude-to-symbol
/// reduction, the product-symbol reduction, and the Taylor-remainder checks.
pub fn corner_integral(
    dim: usize,
    quad: &CornerQuad,
    p: &(dyn Fn(&[f64], &[f64]) -> Result<Complex64> + Sync),
) -> Result<Complex64> {
    let (zs, z_cell) = midpoint_box(quad.z_half, quad.z_pts, dim);
    let (zetas, zeta_cell) = midpoint_box(quad.zeta_half, quad.zeta_pts, dim);
    let partial: Vec<Result<Complex64>> = zetas
        .par_iter()
        .map(|zeta| {
            let mut acc = Complex64::ZERO;
            for z in &zs {
                acc += p(z, zeta)? * Complex64::from_polar(1.0, -dot(z, zeta));
            }
            Ok(acc)
        })
        .collect();
    let mut total = Complex64::ZERO;
    for s in partial {
        total += s?;
    }
    Ok(total * z_cell * zeta_cell / TAU.powi(dim as i32))
}

/// Symbol of an amplitude operator at one point, by the corner reduction
/// `a(x, xi) = (2 pi)^{-d} sum_{z, zeta} 𝐚(x, x+z, xi+zeta) e^{-i<z, zeta>}`.
pub fn symbol_from_amplitude(
    a: &OscillatingAmplitude,
    x: &[f64],
    xi: &[f64],
    quad: &CornerQuad,
) -> Result<Complex64> {
    if x.len() != a.dim || xi.len() != a.dim {
        return Err(Error::DimensionMismatch(format!(
            "amplitude dimension {} vs point dimensions {}/{}",
            a.dim,
            x.len(),
            xi.len()
        )));
    }
    corner_integral(a.dim, quad, &|z, zeta| {
        let xp: Vec<f64> = x.iter().zip(z).map(|(a, b)| a + b).collect();
        let xiz: Vec<f64> = xi.iter().zip(zeta).map(|(a, b)| a + b).collect();
        Ok(a.eval(x, &xp, &xiz))
    })
}

/// Symbol of the product `A2* A1` at one point:
/// `h(x, xi) = (2 pi)^{-d} sum a1(x+z, xi) conj(a2(x+z, xi+zeta)) e^{-i<z, zeta>}`.
pub fn product_symbol_quadrature(
    a1: &OscillatingSymbol,
    a2: &OscillatingSymbol,
    x: &[f64],
    xi: &[f64],
    quad: &CornerQuad,
) -> Result<Complex64> {
    check_product_points(a1, a2, x, xi)?;
    corner_integral(a1.dim, quad, &|z, zeta| {
        let y: Vec<f64> = x.iter().zip(z).map(|(a, b)| a + b).collect();
        let xiz: Vec<f64> = xi.iter().zip(zeta).map(|(a, b)| a + b).collect();
        Ok(a1.eval(&y, xi) * a2.eval(&y, &xiz).conj())
    })
}

/// Symbol of the product `A1 A2*` at one point:
/// `g(x, xi) = (2 pi)^{-d} sum a1(x, xi+zeta) conj(a2(x+z, xi+zeta)) e^{-i<z, zeta>}`.
pub fn right_product_symbol_quadrature(
    a1: &OscillatingSymbol,
    a2: &OscillatingSymbol,
    x: &[f64],
    xi: &[f64],
    quad: &CornerQuad,
) -> Result<Complex64> {
    check_product_points(a1, a2, x, xi)?;
    corner_integral(a1.dim, quad, &|z, zeta| {
        let y: Vec<f64> = x.iter().zip(z).map(|(a, b)| a + b).collect();
        let xiz: Vec<f64> = xi.iter().zip(zeta).map(|(a, b)| a + b).collect();
        Ok(a1.eval(x, &xiz) * a2.eval(&y, &xiz).conj())
    })
}

fn check_product_points(
    a1: &OscillatingSymbol,
    a2: &OscillatingSymbol,
    x: &[f64],
    xi: &[f64],
) -> Result<()> {
    if a1.dim != a2.dim || x.len() != a1.dim || xi.len() != a1.dim {
        return Err(Error::DimensionMismatch(format!(
            "symbol dimensions {}/{} vs point dimensions {}/{}",
            a1.dim,
            a2.dim,
            x.len(),
            xi.len()
        )));
    }
    Ok(())
}

/// Random test functions with spectrum confined to `lam <= |xi| <= 2 lam`,
/// normalized in the grid L2 norm.
pub fn band_pass_probes(
    spec: &GridSpec,
    lam: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<GridFunction>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = spec.total();
    let in_band: Vec<bool> = (0..total)
        .map(|k| {
            let xi = spec.freq(&spec.unflat(k));
            let rho = xi.iter().map(|t| t * t).sum::<f64>().sqrt();
            (lam..=2.0 * lam).contains(&rho)
        })
        .collect();
    if !in_band.iter().any(|&b| b) {
        return Err(Error::Range(format!(
            "band [{lam}, {}] contains no grid frequencies",
            2.0 * lam
        )));
    }
    let ft = FourierTransform::new(spec.clone());
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut hat = GridFunction::zeros(spec.clone());
        for k in 0..total {
            if in_band[k] {
                hat.values[k] = Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
            }
        }
        let u = ft.inverse(&hat);
        let norm = u.l2_norm();
        out.push(u.scale(Complex64::new(1.0 / norm, 0.0)));
    }
    Ok(out)
}
