//! Exact derivatives of the compactly supported smooth kernels used by the
//! model phases and symbols.
//!
//! Everything here reduces to the function `F(u) = exp(-1/u)` (extended by 0
//! for `u <= 0`), whose derivatives satisfy `F^(k)(u) = Q_k(1/u) F(u)` with
//! polynomials `Q_0 = 1`, `Q_{k+1}(w) = w^2 (Q_k(w) - Q_k'(w))`. Steps,
//! bumps and plateaus are assembled from `F` by Leibniz and quotient rules,
//! so all derivative oracles are closed form rather than finite differences.

use std::sync::OnceLock;

/// Binomial coefficient as f64 (exact for the small orders used here).
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c
}

const Q_DEPTH: usize = 14;

fn q_polys() -> &'static Vec<Vec<f64>> {
    static POLYS: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    POLYS.get_or_init(|| {
        let mut polys: Vec<Vec<f64>> = vec![vec![1.0]];
        for _ in 0..Q_DEPTH {
            let q = polys.last().unwrap();
            // p = q - q'
            let mut p = q.clone();
            for i in 1..q.len() {
                p[i - 1] -= i as f64 * q[i];
            }
            // shift by w^2
            let mut next = vec![0.0; p.len() + 2];
            next[2..].copy_from_slice(&p);
            polys.push(next);
        }
        polys
    })
}

/// k-th derivative of `F(u) = exp(-1/u)` for `u > 0`, extended by 0 for
/// `u <= 0` (all derivatives vanish there).
pub fn exp_recip_deriv(u: f64, k: usize) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    let w = 1.0 / u;
    if w > 700.0 {
        return 0.0; // exp underflows before any Q_k can matter
    }
    let q = &q_polys()[k];
    let mut horner = 0.0;
    for &c in q.iter().rev() {
        horner = horner * w + c;
    }
    horner * (-w).exp()
}

/// One-dimensional profile with exact derivatives of every order used by
/// the oracles (orders beyond the cached polynomial depth panic; the crate
/// never requests more than 12).
pub trait SmoothProfile: Send + Sync {
    /// k-th derivative at `t` (`k = 0` is the value).
    fn eval_deriv(&self, t: f64, k: usize) -> f64;

    fn eval(&self, t: f64) -> f64 {
        self.eval_deriv(t, 0)
    }
}

/// The smooth step `sigma(t)`: 0 for `t <= 0`, 1 for `t >= 1`, strictly
/// increasing in between, infinitely flat at both ends.
/// `sigma(t) = F(t) / (F(t) + F(1-t))`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SmoothStep;

impl SmoothProfile for SmoothStep {
    fn eval_deriv(&self, t: f64, k: usize) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= 1.0 {
            return if k == 0 { 1.0 } else { 0.0 };
        }
        // f = F(t), g = F(t) + F(1-t); derivatives of f/g by Leibniz with
        // the reciprocal's derivatives found from sum_j C(k,j) g^(j) (1/g)^(k-j) = 0.
        let f: Vec<f64> = (0..=k).map(|j| exp_recip_deriv(t, j)).collect();
        let g: Vec<f64> = (0..=k)
            .map(|j| {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                exp_recip_deriv(t, j) + sign * exp_recip_deriv(1.0 - t, j)
            })
            .collect();
        let mut recip = vec![0.0; k + 1];
        recip[0] = 1.0 / g[0];
        for m in 1..=k {
            let mut s = 0.0;
            for j in 1..=m {
                s += binomial(m, j) * g[j] * recip[m - j];
            }
            recip[m] = -s / g[0];
        }
        (0..=k).map(|j| binomial(k, j) * f[j] * recip[k - j]).sum()
    }
}

/// Even bump supported on `[-1, 1]`, equal to 1 at the origin:
/// `B(t) = e^2 F(1+t) F(1-t) = exp(2 - 2/(1-t^2))`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SmoothBump;

impl SmoothProfile for SmoothBump {
    fn eval_deriv(&self, t: f64, k: usize) -> f64 {
        if t.abs() >= 1.0 {
            return 0.0;
        }
        let e2 = std::f64::consts::E * std::f64::consts::E;
        let mut s = 0.0;
        for j in 0..=k {
            let sign = if (k - j) % 2 == 0 { 1.0 } else { -1.0 };
            s += binomial(k, j)
                * exp_recip_deriv(1.0 + t, j)
                * sign
                * exp_recip_deriv(1.0 - t, k - j);
        }
        e2 * s
    }
}

/// Even plateau profile: 1 for `|t| <= inner`, 0 for `|t| >= outer`,
/// a smooth-step transition in between. `inner = 0` is admissible and
/// still yields a smooth bump (the step is infinitely flat at its ends).
#[derive(Debug, Clone, Copy)]
pub struct Plateau {
    pub inner: f64,
    pub outer: f64,
}

impl Plateau {
    pub fn new(inner: f64, outer: f64) -> Self {
        assert!(0.0 <= inner && inner < outer, "plateau needs 0 <= inner < outer");
        Plateau { inner, outer }
    }
}

impl SmoothProfile for Plateau {
    fn eval_deriv(&self, t: f64, k: usize) -> f64 {
        let a = t.abs();
        if a <= self.inner {
            return if k == 0 { 1.0 } else { 0.0 };
        }
        if a >= self.outer {
            return 0.0;
        }
        let w = self.outer - self.inner;
        // p(t) = sigma((outer - |t|)/w); on t > 0 the chain factor is -1/w.
        let s = (self.outer - a) / w;
        let base = SmoothStep.eval_deriv(s, k) * (-1.0 / w).powi(k as i32);
        if t >= 0.0 {
            base
        } else {
            // even reflection
            if k % 2 == 0 {
                base
            } else {
                -base
            }
        }
    }
}

/// Smooth low-frequency cutoff on `[lo, hi]`: 0 below `lo`, 1 above `hi`.
#[derive(Debug, Clone, Copy)]
pub struct CutoffStep {
    pub lo: f64,
    pub hi: f64,
}

impl CutoffStep {
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo < hi, "cutoff needs lo < hi");
        CutoffStep { lo, hi }
    }
}

impl SmoothProfile for CutoffStep {
    fn eval_deriv(&self, t: f64, k: usize) -> f64 {
        let w = self.hi - self.lo;
        SmoothStep.eval_deriv((t - self.lo) / w, k) / w.powi(k as i32)
    }
}

/// `t^r` on `t > 0` with exact derivatives (`r` real). Only queried away
/// from 0 because every user multiplies by a cutoff vanishing near 0.
#[derive(Debug, Clone, Copy)]
pub struct FractionalPower {
    pub r: f64,
}

impl SmoothProfile for FractionalPower {
    fn eval_deriv(&self, t: f64, k: usize) -> f64 {
        let mut c = 1.0;
        for j in 0..k {
            c *= self.r - j as f64;
        }
        c * t.powf(self.r - k as f64)
    }
}

/// Polynomial profile, coefficients in ascending order.
#[derive(Debug, Clone)]
pub struct Poly1D {
    pub coeffs: Vec<f64>,
}

impl SmoothProfile for Poly1D {
    fn eval_deriv(&self, t: f64, k: usize) -> f64 {
        let mut c = self.coeffs.clone();
        for _ in 0..k {
            if c.len() <= 1 {
                return 0.0;
            }
            c = c.iter().enumerate().skip(1).map(|(i, &a)| i as f64 * a).collect();
        }
        c.iter().rev().fold(0.0, |acc, &a| acc * t + a)
    }
}

/// `exp(-t^2)` with derivatives `P_k(t) exp(-t^2)`, `P_{k+1} = P_k' - 2 t P_k`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Gaussian1D;

impl SmoothProfile for Gaussian1D {
    fn eval_deriv(&self, t: f64, k: usize) -> f64 {
        let mut p = vec![1.0];
        for _ in 0..k {
            let mut next = vec![0.0; p.len() + 1];
            for (i, &a) in p.iter().enumerate() {
                if i >= 1 {
                    next[i - 1] += i as f64 * a;
                }
                next[i + 1] -= 2.0 * a;
            }
            p = next;
        }
        let val = p.iter().rev().fold(0.0, |acc, &a| acc * t + a);
        val * (-t * t).exp()
    }
}

/// Product of two profiles (Leibniz rule).
pub struct ProfileProduct<A, B>(pub A, pub B);

impl<A: SmoothProfile, B: SmoothProfile> SmoothProfile for ProfileProduct<A, B> {
    fn eval_deriv(&self, t: f64, k: usize) -> f64 {
        (0..=k)
            .map(|j| binomial(k, j) * self.0.eval_deriv(t, j) * self.1.eval_deriv(t, k - j))
            .sum()
    }
}

/// Central finite-difference derivative of a scalar callable, used by tests
/// to validate the closed forms above and by fallback oracles. Fourth-order
/// stencils, nested for mixed orders.
pub fn central_diff(f: &dyn Fn(f64) -> f64, t: f64, k: usize, h: f64) -> f64 {
    match k {
        0 => f(t),
        1 => (-f(t + 2.0 * h) + 8.0 * f(t + h) - 8.0 * f(t - h) + f(t - 2.0 * h)) / (12.0 * h),
        2 => {
            (-f(t + 2.0 * h) + 16.0 * f(t + h) - 30.0 * f(t) + 16.0 * f(t - h)
                - f(t - 2.0 * h))
                / (12.0 * h * h)
        }
        _ => {
            let g = move |s: f64| central_diff(f, s, k - 2, h);
            central_diff(&g, t, 2, h)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Validate order k against a finite difference of the order-(k-1)
    /// closed form; nesting stencils from order 0 loses too much to roundoff.
    fn check_profile<P: SmoothProfile>(p: &P, pts: &[f64], kmax: usize, h: f64, tol: f64) {
        for &t in pts {
            for k in 1..=kmax {
                let exact = p.eval_deriv(t, k);
                let fd = central_diff(&|s| p.eval_deriv(s, k - 1), t, 1, h);
                let scale = 1.0 + exact.abs();
                assert!(
                    (exact - fd).abs() / scale < tol,
                    "k={k} t={t}: exact {exact} vs fd {fd}"
                );
            }
        }
    }

    #[test]
    fn exp_recip_matches_finite_differences() {
        for &u in &[0.3, 0.7, 1.1, 2.5] {
            for k in 1..=5 {
                let exact = exp_recip_deriv(u, k);
                let fd = central_diff(&|s| exp_recip_deriv(s, k - 1), u, 1, 1e-3);
                assert!(
                    (exact - fd).abs() / (1.0 + exact.abs()) < 1e-7,
                    "u={u} k={k}: {exact} vs {fd}"
                );
            }
        }
    }

    #[test]
    fn exp_recip_vanishes_left_of_zero() {
        for k in 0..=6 {
            assert_eq!(exp_recip_deriv(-1.0, k), 0.0);
            assert_eq!(exp_recip_deriv(0.0, k), 0.0);
        }
        // flatness from the right
        assert!(exp_recip_deriv(1e-3, 3).abs() < 1e-200);
    }

    #[test]
    fn step_shape() {
        let s = SmoothStep;
        assert_eq!(s.eval(-0.5), 0.0);
        assert_eq!(s.eval(1.5), 1.0);
        assert!((s.eval(0.5) - 0.5).abs() < 1e-14); // symmetry of F(t)/(F(t)+F(1-t))
        assert!(s.eval(0.2) > 0.0 && s.eval(0.2) < s.eval(0.4));
        check_profile(&s, &[0.15, 0.4, 0.5, 0.77, 0.9], 4, 2e-4, 1e-6);
    }

    #[test]
    fn bump_shape() {
        let b = SmoothBump;
        assert!((b.eval(0.0) - 1.0).abs() < 1e-15);
        assert_eq!(b.eval(1.0), 0.0);
        assert_eq!(b.eval(-1.2), 0.0);
        assert!((b.eval(0.3) - b.eval(-0.3)).abs() < 1e-15);
        check_profile(&b, &[-0.8, -0.33, 0.0, 0.41, 0.66], 4, 2e-4, 1e-6);
    }

    #[test]
    fn plateau_shape() {
        let p = Plateau::new(0.6, 1.2);
        assert_eq!(p.eval(0.0), 1.0);
        assert_eq!(p.eval(0.55), 1.0);
        assert_eq!(p.eval_deriv(0.3, 2), 0.0);
        assert_eq!(p.eval(1.3), 0.0);
        check_profile(&p, &[-1.1, -0.8, 0.7, 0.9, 1.05], 4, 2e-4, 1e-6);
    }

    #[test]
    fn cutoff_saturates() {
        let c = CutoffStep::new(1.0, 2.0);
        assert_eq!(c.eval(0.9), 0.0);
        assert_eq!(c.eval(2.0), 1.0);
        assert_eq!(c.eval_deriv(3.0, 1), 0.0);
        check_profile(&c, &[1.2, 1.5, 1.8], 4, 2e-3, 1e-6);
    }

    #[test]
    fn poly_and_gaussian_derivs() {
        let p = Poly1D { coeffs: vec![1.0, -2.0, 0.5, 3.0] };
        check_profile(&p, &[-1.0, 0.3, 2.0], 4, 1e-2, 1e-8);
        assert_eq!(p.eval_deriv(1.0, 3), 18.0);
        let g = Gaussian1D;
        check_profile(&g, &[-1.5, 0.0, 0.4, 2.0], 4, 1e-3, 1e-7);
        assert!((g.eval_deriv(0.7, 1) + 2.0 * 0.7 * (-0.49f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn fractional_power_derivs() {
        let f = FractionalPower { r: 0.6 };
        check_profile(&f, &[0.5, 1.0, 3.0, 10.0], 4, 1e-3, 1e-7);
        assert!((f.eval_deriv(4.0, 1) - 0.6 * 4.0f64.powf(-0.4)).abs() < 1e-14);
    }
}
