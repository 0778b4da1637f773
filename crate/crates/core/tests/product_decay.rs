//! Matrix-product oracle for the product expansions: on band-pass test
//! functions with spectrum in [lambda, 2 lambda], the materialized product
//! minus the truncated symbol decays like lambda^{-N(1-r)}.

use std::sync::Arc;

use oscsym_core::calculus::{
    expand_left_product, expand_right_product, product_decay_rows, ProductDecayConfig,
};
use oscsym_core::slope::{dyadic_ladder, loglog_slope};
use oscsym_core::symbols::{base_power, model_phase, BumpSpec, PhaseModel};
use oscsym_core::{GridSpec, OscillatingSymbol, PhaseFunction};

fn setup() -> (OscillatingSymbol, OscillatingSymbol) {
    let phi: Arc<PhaseFunction> = Arc::new(
        model_phase(&PhaseModel::LongRange {
            r: 0.6,
            bump: BumpSpec::new(vec![0.0], 2.0),
            cutoff: (0.5, 1.0),
        })
        .unwrap(),
    );
    let b1 = base_power(1, 0.0, Some(&BumpSpec::new(vec![0.3], 1.5))).base;
    let b2 = base_power(1, 0.0, Some(&BumpSpec::new(vec![-0.2], 1.4))).base;
    (
        OscillatingSymbol::oscillating(phi.clone(), 0.0, b1),
        OscillatingSymbol::oscillating(phi, 0.0, b2),
    )
}

#[test]
fn band_pass_residuals_decay_for_both_product_orders() {
    let (a1, a2) = setup();
    // Nyquist here is ~100; the top window [32, 64] plus the phase-induced
    // spectral spread stays safely inside
    let spec = GridSpec::line(-16.0, 16.0, 1024).unwrap();
    let cfg = ProductDecayConfig { lambdas: dyadic_ladder(4.0, 4), probes: 6, seed: 23 };

    for (left, label) in [(false, "right"), (true, "left")] {
        let exp = if left {
            expand_left_product(&a1, &a2, 2).unwrap()
        } else {
            expand_right_product(&a1, &a2, 2).unwrap()
        };
        let rows = product_decay_rows(&a1, &a2, &exp, &spec, left, &cfg).unwrap();
        assert_eq!(rows.len(), 4);
        for &(lam, res) in &rows {
            assert!(
                res.is_finite() && res > 1e-12,
                "{label}: degenerate residual {res} at lambda {lam}"
            );
        }
        let (ls, rs): (Vec<f64>, Vec<f64>) = rows.iter().copied().unzip();
        let s = loglog_slope(&ls, &rs);
        assert!(
            s <= -2.0 * (1.0 - 0.6) + 0.3,
            "{label}: residual slope {s:.3} exceeds -2(1-r) + 0.3; rows {rows:?}"
        );
        assert!(
            rows[3].1 < rows[0].1,
            "{label}: residual does not shrink across the ladder: {rows:?}"
        );
    }
}
