//! Uniform periodic grids and grid functions.
//!
//! Each axis discretizes `[a, b)` with `n` points (endpoint excluded) and
//! carries the dual frequency grid `xi_k = (k - n/2) * 2*pi/(b - a)`, so the
//! discrete transforms on these grids are unitary up to cell volumes.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// One grid axis: `x_j = a + j*(b-a)/n`, `j = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub a: f64,
    pub b: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(b > a) {
            return Err(Error::Domain(format!("axis needs b > a, got [{a}, {b})")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::Domain(format!(
                "axis needs a power-of-two point count >= 8, got {n}"
            )));
        }
        Ok(Axis { a, b, n })
    }

    pub fn len(&self) -> f64 {
        self.b - self.a
    }

    pub fn dx(&self) -> f64 {
        self.len() / self.n as f64
    }

    /// Frequency spacing `2*pi/(b-a)`; `dx * dxi * n = 2*pi`.
    pub fn dxi(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.len()
    }

    pub fn point(&self, j: usize) -> f64 {
        self.a + j as f64 * self.dx()
    }

    /// Centered frequency `(k - n/2) * dxi`.
    pub fn freq(&self, k: usize) -> f64 {
        (k as f64 - self.n as f64 / 2.0) * self.dxi()
    }

    /// Largest representable frequency magnitude `(n/2) * dxi`.
    pub fn nyquist(&self) -> f64 {
        self.n as f64 / 2.0 * self.dxi()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.point(j)).collect()
    }

    pub fn freqs(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.freq(k)).collect()
    }
}

/// Tensor-product grid over up to a few axes.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub axes: Vec<Axis>,
}

impl GridSpec {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::Domain("grid needs at least one axis".into()));
        }
        Ok(GridSpec { axes })
    }

    pub fn line(a: f64, b: f64, n: usize) -> Result<Self> {
        Ok(GridSpec { axes: vec![Axis::new(a, b, n)?] })
    }

    pub fn square(a: f64, b: f64, n: usize) -> Result<Self> {
        let ax = Axis::new(a, b, n)?;
        Ok(GridSpec { axes: vec![ax, ax] })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn total(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    /// Product of spatial cell sizes.
    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.dx()).product()
    }

    /// Product of frequency cell sizes.
    pub fn freq_cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.dxi()).product()
    }

    /// Row-major flat index of a multi-index.
    pub fn flat(&self, idx: &[usize]) -> usize {
        let mut f = 0;
        for (ax, &i) in self.axes.iter().zip(idx) {
            debug_assert!(i < ax.n);
            f = f * ax.n + i;
        }
        f
    }

    pub fn unflat(&self, mut f: usize) -> Vec<usize> {
        let mut idx = vec![0usize; self.dim()];
        for k in (0..self.dim()).rev() {
            idx[k] = f % self.axes[k].n;
            f /= self.axes[k].n;
        }
        idx
    }

    pub fn point(&self, idx: &[usize]) -> Vec<f64> {
        self.axes.iter().zip(idx).map(|(a, &i)| a.point(i)).collect()
    }

    pub fn freq(&self, idx: &[usize]) -> Vec<f64> {
        self.axes.iter().zip(idx).map(|(a, &i)| a.freq(i)).collect()
    }
}

/// Complex values on a grid, row-major.
#[derive(Debug, Clone)]
pub struct GridFunction {
    pub spec: GridSpec,
    pub values: Vec<Complex64>,
}

impl GridFunction {
    pub fn zeros(spec: GridSpec) -> Self {
        let n = spec.total();
        GridFunction { spec, values: vec![Complex64::ZERO; n] }
    }

    pub fn from_fn(spec: GridSpec, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let mut g = GridFunction::zeros(spec);
        for i in 0..g.values.len() {
            let idx = g.spec.unflat(i);
            let x = g.spec.point(&idx);
            g.values[i] = f(&x);
        }
        g
    }

    /// Fill from a function of the frequency grid (values indexed like freqs).
    pub fn from_freq_fn(spec: GridSpec, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let mut g = GridFunction::zeros(spec);
        for i in 0..g.values.len() {
            let idx = g.spec.unflat(i);
            let xi = g.spec.freq(&idx);
            g.values[i] = f(&xi);
        }
        g
    }

    /// `sqrt(sum |u|^2 * dx_vol)`, the discrete L2 norm.
    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        (s * self.spec.cell_volume()).sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// L2 inner product `<u, v> = sum u * conj(v) * dx_vol`.
    pub fn dot(&self, other: &GridFunction) -> Complex64 {
        debug_assert_eq!(self.spec, other.spec);
        let s: Complex64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(u, v)| u * v.conj())
            .sum();
        s * self.spec.cell_volume()
    }

    pub fn sub(&self, other: &GridFunction) -> GridFunction {
        debug_assert_eq!(self.spec, other.spec);
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(u, v)| u - v)
            .collect();
        GridFunction { spec: self.spec.clone(), values }
    }

    pub fn add(&self, other: &GridFunction) -> GridFunction {
        debug_assert_eq!(self.spec, other.spec);
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(u, v)| u + v)
            .collect();
        GridFunction { spec: self.spec.clone(), values }
    }

    pub fn scale(&self, c: Complex64) -> GridFunction {
        let values = self.values.iter().map(|u| u * c).collect();
        GridFunction { spec: self.spec.clone(), values }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_layout() {
        let ax = Axis::new(-4.0, 4.0, 8).unwrap();
        assert_eq!(ax.dx(), 1.0);
        assert!((ax.dxi() - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
        assert_eq!(ax.point(0), -4.0);
        assert_eq!(ax.point(7), 3.0); // right endpoint excluded
        assert!((ax.freq(0) + ax.nyquist()).abs() < 1e-15);
        assert_eq!(ax.freq(4), 0.0);
        // dx * dxi * n = 2 pi
        assert!((ax.dx() * ax.dxi() * 8.0 - 2.0 * std::f64::consts::PI).abs() < 1e-14);
    }

    #[test]
    fn axis_rejects_non_power_or_tiny() {
        assert!(Axis::new(0.0, 1.0, 7).is_err());
        assert!(Axis::new(0.0, 1.0, 12).is_err());
        assert!(Axis::new(0.0, 1.0, 4).is_err());
        assert!(Axis::new(1.0, 1.0, 8).is_err());
    }

    #[test]
    fn flat_roundtrip_2d() {
        let spec = GridSpec::new(vec![
            Axis::new(0.0, 1.0, 8).unwrap(),
            Axis::new(0.0, 2.0, 16).unwrap(),
        ])
        .unwrap();
        assert_eq!(spec.total(), 128);
        for f in 0..spec.total() {
            let idx = spec.unflat(f);
            assert_eq!(spec.flat(&idx), f);
        }
        assert_eq!(spec.flat(&[1, 3]), 19);
    }

    #[test]
    fn l2_norm_of_indicator() {
        let spec = GridSpec::line(0.0, 2.0, 8).unwrap();
        let u = GridFunction::from_fn(spec, |_| Complex64::new(1.0, 0.0));
        // |u|^2 integrates to the interval length
        assert!((u.l2_norm() - 2f64.sqrt()).abs() < 1e-14);
    }
}
