//! Randomized algebra laws for the symmetric-tensor ladder: the commutation
//! identity, the right-inverse property, full index symmetry, and the exact
//! inverse scaling of the solution in the direction length.

use oscsym_core::fock::{self, DirectionVector, SymTensor};
use proptest::prelude::*;

const TOL: f64 = 1e-12;

/// A tensor of degree <= `max_degree` over dimension <= `max_dim`, with
/// unit-scale coefficients, plus a direction bounded away from zero.
fn tensor_and_direction(
    min_degree: usize,
    max_degree: usize,
    max_dim: usize,
) -> impl Strategy<Value = (SymTensor, DirectionVector)> {
    (min_degree..=max_degree, 1..=max_dim).prop_flat_map(|(n, d)| {
        let m = fock::space_dim(n, d).unwrap();
        let coeffs = prop::collection::vec(-1.0..1.0f64, m);
        let direction = prop::collection::vec(-1.0..1.0f64, d)
            .prop_filter("direction too close to zero", |t| {
                t.iter().map(|v| v * v).sum::<f64>() > 0.09
            });
        (coeffs, direction).prop_map(move |(c, t)| {
            (
                SymTensor::from_coeffs(n, d, c).unwrap(),
                DirectionVector::new(t).unwrap(),
            )
        })
    })
}

fn permutations(tuple: &[usize]) -> Vec<Vec<usize>> {
    if tuple.len() <= 1 {
        return vec![tuple.to_vec()];
    }
    let mut out = Vec::new();
    for (j, &head) in tuple.iter().enumerate() {
        let mut rest = tuple.to_vec();
        rest.remove(j);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

proptest! {
    /// lower(raise(psi)) = |t|^2 psi + raise(lower(psi)), coefficientwise;
    /// at degree 0 the second term is absent because lowering stops there.
    #[test]
    fn lowering_after_raising_splits_into_norm_and_swap(
        (psi, t) in tensor_and_direction(0, 5, 4)
    ) {
        let down_up = fock::lower(&fock::raise(&psi, &t).unwrap(), &t).unwrap();
        let expected = if psi.degree() == 0 {
            psi.scale(t.norm_sq())
        } else {
            let up_down = fock::raise(&fock::lower(&psi, &t).unwrap(), &t).unwrap();
            psi.scale(t.norm_sq()).add(&up_down).unwrap()
        };
        let gap = down_up.sub(&expected).unwrap().sup_norm();
        prop_assert!(gap < TOL, "commutation gap {gap:.3e} at degree {}", psi.degree());
    }

    /// Lowering the solved tensor reproduces the right-hand side exactly.
    #[test]
    fn solving_the_lowering_is_a_right_inverse(
        (f, t) in tensor_and_direction(0, 4, 4)
    ) {
        let psi = fock::solve_lowering(&f, &t).unwrap();
        prop_assert_eq!(psi.degree(), f.degree() + 1);
        let residual = fock::lower(&psi, &t).unwrap().sub(&f).unwrap().sup_norm();
        prop_assert!(residual < TOL, "residual {residual:.3e}");
    }

    /// Raised tensors answer every permutation of a lookup tuple alike.
    #[test]
    fn raising_commutes_with_slot_permutations(
        (psi, t) in tensor_and_direction(1, 3, 3)
    ) {
        let up = fock::raise(&psi, &t).unwrap();
        for tuple in up.index_tuples() {
            let reference = up.get(&tuple);
            for p in permutations(&tuple) {
                prop_assert_eq!(up.get(&p), reference);
            }
        }
    }

    /// Scaling the direction by c scales the solution by exactly 1/c, so the
    /// bound constant |psi| |t| / |f| is invariant along the sweep.
    #[test]
    fn direction_scaling_moves_the_solution_inversely(
        (f, t) in tensor_and_direction(0, 4, 4),
        c in prop::sample::select(vec![2.0f64, 4.0, 8.0])
    ) {
        let base = fock::solve_lowering(&f, &t).unwrap();
        let scaled = fock::solve_lowering(&f, &t.scaled(c).unwrap()).unwrap();
        let gap = scaled.scale(c).sub(&base).unwrap().sup_norm();
        prop_assert!(gap < TOL, "scaling gap {gap:.3e} at c = {c}");
    }
}
