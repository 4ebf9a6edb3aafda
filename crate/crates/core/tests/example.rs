use cascade_core::bounds::eval_inner_tuple;
use cascade_core::example::{self, analytic_pi, log2_3, verify_example, DEFAULT_TOL};
use cascade_core::names::{U1, X, Y2, Y3};
use cascade_core::payoff::{adversary_value, best_response, Payoff};

/// Straight line through two points, evaluated at `r`.
fn line(p: (f64, f64), q: (f64, f64), r: f64) -> f64 {
    p.1 + (q.1 - p.1) * (r - p.0) / (q.0 - p.0)
}

#[test]
fn curve_is_piecewise_linear_through_the_corners() {
    let l = log2_3();
    let pts = [(0.0, 0.0), (1.0, 0.5), (l, 2.0 / 3.0)];
    for i in 0..=40 {
        let r = 2.0 * i as f64 / 40.0;
        let want = if r <= 1.0 {
            line(pts[0], pts[1], r)
        } else if r <= l {
            line(pts[1], pts[2], r)
        } else {
            2.0 / 3.0
        };
        assert!((analytic_pi(r).unwrap() - want).abs() <= 1e-15, "R0={r}");
    }
    assert!(analytic_pi(-1e-9).is_err());
    assert!(analytic_pi(f64::NAN).is_err());
}

#[test]
fn verified_grids() {
    for grid in [
        vec![0.0, 0.5, 1.0, 1.3, log2_3(), 2.0],
        vec![1.0],
        vec![2.0],
        example::default_grid(),
    ] {
        let report = verify_example(&grid, DEFAULT_TOL).unwrap();
        assert!(report.passed, "{:?}", report.failures());
        assert_eq!(report.rows.len(), grid.len());
        for row in &report.rows {
            assert!(row.signals_determined);
            assert!((row.evaluated.pi - analytic_pi(row.r0).unwrap()).abs() <= DEFAULT_TOL);
        }
    }
    assert!(verify_example(&[2.5], DEFAULT_TOL).is_err());
}

#[test]
fn corner_and_disclosure_tuples() {
    let (p_x, side, pay) = (
        example::source().unwrap(),
        example::side_info().unwrap(),
        example::payoff().unwrap(),
    );
    let l = log2_3();
    let cases = [
        (
            example::disclosure_candidate().unwrap(),
            [0.0, l, l - 1.0, 0.0],
        ),
        (
            example::corner_candidate(1).unwrap(),
            [1.0, l, l - 1.0, 0.5],
        ),
        (
            example::corner_candidate(2).unwrap(),
            [l, l, l - 1.0, 2.0 / 3.0],
        ),
    ];
    for (c, want) in cases {
        let t = eval_inner_tuple(&c, &p_x, &side, &pay, 1e-9).unwrap();
        let got = [t.r0, t.r1, t.r2, t.pi];
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() <= 1e-12, "{got:?} vs {want:?}");
        }
        assert!(!t.forbidden);
    }
    assert!(example::corner_candidate(3).is_err());
}

#[test]
fn forbidden_exactly_off_the_support() {
    let t = example::payoff_table().unwrap();
    for x in 0..3 {
        for y2 in 0..3 {
            for y3 in 0..3 {
                let mut post = vec![0.0; 27];
                post[(x * 3 + y2) * 3 + y3] = 1.0;
                let distinct = x != y2 && y2 != y3 && x != y3;
                assert_eq!(best_response(&post, &t).forbidden, !distinct);
            }
        }
    }
}

#[test]
fn corner_one_error_is_one_half_for_every_u1() {
    let c = example::corner_candidate(1).unwrap();
    let j = c.joint();
    let pay = example::payoff().unwrap();
    let n = j.variable(U1).unwrap().size;
    let pu = j.marginalize(&[U1]).unwrap();
    for u in 0..n {
        assert!((pu.table()[u] - 1.0 / n as f64).abs() <= 1e-15);
        let given = j.condition(&[(U1, u)]).unwrap();
        let v = adversary_value(&given, &[], &pay).unwrap();
        assert!(
            (v.value - 0.5).abs() <= 1e-12 && !v.forbidden,
            "u1={u}: {}",
            v.value
        );
    }
}

#[test]
fn source_is_determined_by_the_two_signals() {
    for which in [1, 2] {
        let c = example::corner_candidate(which).unwrap();
        assert!(
            c.joint()
                .conditional_entropy(&[X], &[Y2, Y3])
                .unwrap()
                .abs()
                <= 1e-12
        );
        let px = c.joint().marginalize(&[X]).unwrap();
        assert!(px.table().iter().all(|p| (p - 1.0 / 3.0).abs() <= 1e-15));
    }
    assert!(matches!(example::payoff().unwrap(), Payoff::Table(_)));
}
