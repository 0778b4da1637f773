//! Derivative multi-indices over `R^d`.

use crate::error::{Error, Result};

/// A multi-index `alpha = (alpha_1, ..., alpha_d)` of partial-derivative
/// orders. The length equals the space dimension.
pub type MultiIndex = Vec<u32>;

/// `|alpha| = alpha_1 + ... + alpha_d`.
pub fn order(alpha: &[u32]) -> u32 {
    alpha.iter().sum()
}

/// Exact factorial. Valid through 20! (u64); callers stay at order <= 12.
pub fn factorial(n: u32) -> u64 {
    (1..=n as u64).product()
}

/// `alpha! = prod_i alpha_i!` as f64, exact for total order <= 12.
pub fn multi_factorial(alpha: &[u32]) -> f64 {
    alpha.iter().map(|&a| factorial(a) as f64).product()
}

/// Guard for the exact-factorial contract.
pub fn check_factorial_order(alpha: &[u32]) -> Result<()> {
    if order(alpha) > 12 {
        return Err(Error::Range(format!(
            "multi-index order {} exceeds the exact factorial range (12)",
            order(alpha)
        )));
    }
    Ok(())
}

/// `x^alpha = prod_i x_i^{alpha_i}`.
pub fn monomial(x: &[f64], alpha: &[u32]) -> f64 {
    x.iter()
        .zip(alpha)
        .map(|(&xi, &a)| xi.powi(a as i32))
        .product()
}

/// All multi-indices of exact total order `k` in dimension `d`,
/// in lexicographic order.
pub fn of_order(d: usize, k: u32) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; d];
    fill(&mut out, &mut cur, 0, k);
    out
}

fn fill(out: &mut Vec<MultiIndex>, cur: &mut MultiIndex, pos: usize, left: u32) {
    if pos + 1 == cur.len() {
        cur[pos] = left;
        out.push(cur.clone());
        cur[pos] = 0;
        return;
    }
    // Descending first entry yields lexicographic descent on the suffix;
    // iterate ascending so the full list is lexicographically increasing
    // with respect to (alpha_1, alpha_2, ...) read left to right.
    for a in (0..=left).rev() {
        cur[pos] = a;
        fill(out, cur, pos + 1, left - a);
        cur[pos] = 0;
    }
}

/// Multi-indices with `0 <= |alpha| <= max_order`, graded lexicographic:
/// increasing total order, lexicographic within an order.
pub fn graded(d: usize, max_order: u32) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    for k in 0..=max_order {
        out.extend(of_order(d, k));
    }
    out
}

/// `alpha + e_i`.
pub fn bump(alpha: &[u32], i: usize) -> MultiIndex {
    let mut b = alpha.to_vec();
    b[i] += 1;
    b
}

/// `alpha - e_i` when `alpha_i > 0`.
pub fn lower(alpha: &[u32], i: usize) -> Option<MultiIndex> {
    if alpha[i] == 0 {
        return None;
    }
    let mut b = alpha.to_vec();
    b[i] -= 1;
    Some(b)
}

/// Componentwise `alpha <= beta`.
pub fn le(alpha: &[u32], beta: &[u32]) -> bool {
    alpha.iter().zip(beta).all(|(a, b)| a <= b)
}

/// Componentwise difference `beta - alpha` (requires `alpha <= beta`).
pub fn sub(beta: &[u32], alpha: &[u32]) -> MultiIndex {
    beta.iter().zip(alpha).map(|(b, a)| b - a).collect()
}

/// All `gamma` with `gamma <= alpha` componentwise, for Leibniz sums.
pub fn sub_indices(alpha: &[u32]) -> Vec<MultiIndex> {
    let mut out: Vec<MultiIndex> = vec![Vec::new()];
    for &a in alpha {
        let mut next = Vec::with_capacity(out.len() * (a as usize + 1));
        for prefix in &out {
            for g in 0..=a {
                let mut p = prefix.clone();
                p.push(g);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// Product of binomial coefficients `prod_i C(alpha_i, gamma_i)`.
pub fn choose(alpha: &[u32], gamma: &[u32]) -> f64 {
    alpha
        .iter()
        .zip(gamma)
        .map(|(&a, &g)| binomial(a, g))
        .product()
}

fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factorials_exact() {
        assert_eq!(factorial(0), 1);
        assert_eq!(factorial(5), 120);
        assert_eq!(factorial(12), 479_001_600);
        assert_eq!(multi_factorial(&[2, 3]), 12.0);
    }

    #[test]
    fn graded_order_d2() {
        let list = graded(2, 2);
        let expect: Vec<MultiIndex> = vec![
            vec![0, 0],
            vec![1, 0],
            vec![0, 1],
            vec![2, 0],
            vec![1, 1],
            vec![0, 2],
        ];
        assert_eq!(list, expect);
    }

    #[test]
    fn of_order_counts() {
        // Stars and bars: C(k+d-1, d-1) indices of order k.
        assert_eq!(of_order(3, 4).len(), 15);
        assert_eq!(of_order(1, 7), vec![vec![7]]);
    }

    #[test]
    fn monomials() {
        assert_eq!(monomial(&[2.0, 3.0], &[2, 1]), 12.0);
        assert_eq!(monomial(&[5.0], &[0]), 1.0);
    }

    #[test]
    fn order_guard() {
        assert!(check_factorial_order(&[6, 6]).is_ok());
        assert!(check_factorial_order(&[7, 6]).is_err());
    }

    #[test]
    fn leibniz_combinatorics() {
        let subs = sub_indices(&[2, 1]);
        assert_eq!(subs.len(), 6);
        assert!(subs.contains(&vec![0, 0]));
        assert!(subs.contains(&vec![2, 1]));
        assert_eq!(choose(&[2, 1], &[1, 0]), 2.0);
        assert_eq!(choose(&[4, 2], &[2, 1]), 12.0);
    }
}
