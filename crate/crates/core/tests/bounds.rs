mod common;

use cascade_core::bounds::{
    check_inner_constraints, check_outer_constraints, equivocation_value, eval_inner_tuple,
    eval_outer_tuple, search_inner, Caps, InnerCandidate, InnerSearchProblem, RateBudget,
    SearchOptions, SearchOutcome, SideInfoSpec,
};
use cascade_core::example::{self, log2_3};
use cascade_core::names::{U, U1, U2, V1, V2, X, Y2, Y3};
use cascade_core::payoff::{LogLossPayoff, Payoff, SecretVar};
use cascade_core::prob::{Alphabet, JointDistribution, Pmf};
use cascade_core::Error;
use proptest::prelude::*;
use rand::Rng;

fn a(n: &str, k: usize) -> Alphabet {
    Alphabet::new(n, k).unwrap()
}

/// Binary uniform X with the given Y2 law and every auxiliary constant
/// except `U1`, which is `X` when `u1_is_x`.
fn simple_candidate(y2: Pmf, u1_is_x: bool) -> InnerCandidate {
    let base = JointDistribution::independent(&[
        Pmf::uniform(a(X, 2)).unwrap(),
        y2,
        Pmf::point_mass(a(Y3, 1), 0).unwrap(),
    ])
    .unwrap();
    let j = base
        .attach_function(&[X], a(U1, if u1_is_x { 2 } else { 1 }), |d| {
            if u1_is_x {
                d[0]
            } else {
                0
            }
        })
        .unwrap()
        .attach_function(&[X], a(U2, 1), |_| 0)
        .unwrap()
        .attach_function(&[X], a(V1, 1), |_| 0)
        .unwrap()
        .attach_function(&[X], a(V2, 1), |_| 0)
        .unwrap();
    InnerCandidate::new(j).unwrap()
}

fn ternary_inputs() -> (Pmf, SideInfoSpec, Payoff) {
    (
        example::source().unwrap(),
        example::side_info().unwrap(),
        example::payoff().unwrap(),
    )
}

#[test]
fn corner_one_passes_every_constraint() {
    let (px, _, _) = ternary_inputs();
    let c = example::corner_candidate(1).unwrap();
    let r = check_inner_constraints(&c, &px, 1e-9).unwrap();
    assert!(r.passed, "{}", r.summary());
    assert!(
        check_outer_constraints(&c.as_outer().unwrap(), &px, 1e-9)
            .unwrap()
            .passed
    );
}

#[test]
fn u1_not_determined_by_v1_fails() {
    let px = Pmf::uniform(a(X, 2)).unwrap();
    let c = simple_candidate(Pmf::point_mass(a(Y2, 1), 0).unwrap(), true);
    let r = check_inner_constraints(&c, &px, 1e-9).unwrap();
    assert!(!r.passed);
    let item = r.item("H(V2,U1|V1) = 0").unwrap();
    assert!(!item.passed && (item.measured - 1.0).abs() < 1e-12);
}

#[test]
fn independent_action_with_constant_v1_is_markov() {
    let px = Pmf::uniform(a(X, 2)).unwrap();
    let c = simple_candidate(Pmf::uniform(a(Y2, 2)).unwrap(), false);
    let r = check_inner_constraints(&c, &px, 1e-9).unwrap();
    assert!(r.item("X - V1 - Y2").unwrap().passed);
    assert!(r.passed);
}

#[test]
fn source_mismatch_is_reported() {
    let px = Pmf::new(a(X, 2), vec![0.3, 0.7]).unwrap();
    let c = simple_candidate(Pmf::uniform(a(Y2, 2)).unwrap(), false);
    let r = check_inner_constraints(&c, &px, 1e-9).unwrap();
    assert!(!r.item("X ~ P_X").unwrap().passed);
    assert!(matches!(
        eval_inner_tuple(
            &c,
            &px,
            &SideInfoSpec::identity(2, 2, 1).unwrap(),
            &common::hamming_payoff([2, 2, 1]),
            1e-9
        ),
        Err(Error::Constraints(_))
    ));
}

#[test]
fn corner_tuples() {
    let (px, side, pay) = ternary_inputs();
    let l = log2_3();
    for (which, want) in [(1, [1.0, l, l - 1.0, 0.5]), (2, [l, l, l - 1.0, 2.0 / 3.0])] {
        let c = example::corner_candidate(which).unwrap();
        let ti = eval_inner_tuple(&c, &px, &side, &pay, 1e-9).unwrap();
        let to = eval_outer_tuple(&c.as_outer().unwrap(), &px, &side, &pay, 1e-9).unwrap();
        for t in [ti, to] {
            let got = [t.r0, t.r1, t.r2, t.pi];
            for (g, w) in got.iter().zip(want) {
                assert!((g - w).abs() < 1e-9, "corner {which}: {got:?}");
            }
        }
    }
}

#[test]
fn constant_auxiliaries_give_the_unconditional_value() {
    let base = JointDistribution::independent(&[
        Pmf::uniform(a(X, 3)).unwrap(),
        Pmf::point_mass(a(Y2, 1), 0).unwrap(),
        Pmf::point_mass(a(Y3, 1), 0).unwrap(),
    ])
    .unwrap();
    let mut j = base;
    for n in [U, V1, V2] {
        j = j.attach_function(&[X], a(n, 1), |_| 0).unwrap();
    }
    let c = cascade_core::bounds::OuterCandidate::new(j).unwrap();
    let px = Pmf::uniform(a(X, 3)).unwrap();
    let t = eval_outer_tuple(
        &c,
        &px,
        &SideInfoSpec::identity(3, 1, 1).unwrap(),
        &common::hamming_payoff([3, 1, 1]),
        1e-9,
    )
    .unwrap();
    assert_eq!([t.r0, t.r1, t.r2], [0.0, 0.0, 0.0]);
    assert!((t.pi - 2.0 / 3.0).abs() < 1e-15);
}

fn ternary_search(r0: f64, caps: Caps, restarts: usize) -> SearchOutcome {
    let (p_x, side, payoff) = ternary_inputs();
    let problem = InnerSearchProblem {
        p_x,
        side,
        payoff,
        budget: RateBudget {
            r0,
            r1: 1.6,
            r2: 0.6,
        },
        caps,
    };
    let opts = SearchOptions {
        restarts,
        iterations: 1000,
        seed: 5,
        ..Default::default()
    };
    search_inner(&problem, &opts).unwrap()
}

#[test]
fn search_without_key_finds_no_secrecy() {
    let out = ternary_search(
        0.0,
        Caps {
            u1: 6,
            u2: 3,
            v1: 27,
            v2: 9,
        },
        8,
    );
    let w = out
        .witness()
        .expect("the full-disclosure point is feasible");
    assert!(w.tuple.pi <= 1e-9 && w.tuple.r0 <= 1e-9);
}

#[test]
fn unit_caps_are_infeasible() {
    let out = ternary_search(
        1.0,
        Caps {
            u1: 1,
            u2: 1,
            v1: 1,
            v2: 1,
        },
        4,
    );
    assert!(matches!(out, SearchOutcome::Infeasible { .. }));
}

#[test]
fn search_witness_reevaluates_to_its_tuple() {
    let out = ternary_search(
        1.0,
        Caps {
            u1: 6,
            u2: 3,
            v1: 27,
            v2: 9,
        },
        8,
    );
    let w = out.witness().unwrap();
    let (px, side, pay) = ternary_inputs();
    assert!(
        check_inner_constraints(&w.candidate, &px, 1e-9)
            .unwrap()
            .passed
    );
    let t = eval_inner_tuple(&w.candidate, &px, &side, &pay, 1e-9).unwrap();
    assert_eq!(t, w.tuple);
    assert!(t.r0 <= 1.0 + 1e-9 && t.r1 <= 1.6 + 1e-9 && t.r2 <= 0.6 + 1e-9);
    assert!(t.pi > 0.0);
}

/// Uniform all-distinct triples with `V1 = (Y2, Y3)` and `V2 = Y3`.
fn ternary_equivocation_joint() -> JointDistribution {
    let base = JointDistribution::from_fn(vec![a(X, 3), a(Y2, 3), a(Y3, 3)], |d| {
        if example::all_distinct(d[0], d[1], d[2]) {
            1.0 / 6.0
        } else {
            0.0
        }
    })
    .unwrap();
    base.attach_function(&[Y2, Y3], a(V1, 9), |d| d[0] * 3 + d[1])
        .unwrap()
        .attach_function(&[Y3], a(V2, 3), |d| d[0])
        .unwrap()
}

#[test]
fn equivocation_examples() {
    let j = ternary_equivocation_joint();
    let px = example::source().unwrap();
    let s = LogLossPayoff::new(vec![SecretVar::X]).unwrap();
    let l = log2_3();
    assert!((equivocation_value(&j, &px, &s, l, 1e-9).unwrap() - l).abs() < 1e-12);
    assert!((equivocation_value(&j, &px, &s, 5.0, 1e-9).unwrap() - l).abs() < 1e-12);
    assert!((equivocation_value(&j, &px, &s, 1.0, 1e-9).unwrap() - 1.0).abs() < 1e-12);
    let h_x_given_v1 = j.conditional_entropy(&[X], &[V1]).unwrap();
    assert!((equivocation_value(&j, &px, &s, 0.0, 1e-9).unwrap() - h_x_given_v1).abs() < 1e-12);
    let skewed = Pmf::new(a(X, 3), vec![0.5, 0.25, 0.25]).unwrap();
    assert!(matches!(
        equivocation_value(&j, &skewed, &s, 0.0, 1e-9),
        Err(Error::Constraints(_))
    ));
}

fn permutation(r: &mut impl Rng, k: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..k).collect();
    for i in (1..k).rev() {
        p.swap(i, r.random_range(0..=i));
    }
    p
}

fn secret_of(bits: usize) -> LogLossPayoff {
    let all = [SecretVar::X, SecretVar::Y2, SecretVar::Y3];
    LogLossPayoff::new(
        (0..3)
            .filter(|i| (bits + 1) >> i & 1 == 1)
            .map(|i| all[i])
            .collect(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inner_candidates_are_outer_candidates(seed in 0u64..100_000) {
        let (c, px) = common::random_inner(&mut common::rng(seed, "containment"), 3);
        prop_assert!(check_inner_constraints(&c, &px, 1e-9).unwrap().passed);
        let o = c.as_outer().unwrap();
        prop_assert!(check_outer_constraints(&o, &px, 1e-9).unwrap().passed);
        let j = c.joint();
        let dims = [X, Y2, Y3].map(|n| j.variable(n).unwrap().size);
        let side = SideInfoSpec::identity(dims[0], dims[1], dims[2]).unwrap();
        let pay = common::hamming_payoff(dims);
        prop_assert_eq!(
            eval_inner_tuple(&c, &px, &side, &pay, 1e-9).unwrap(),
            eval_outer_tuple(&o, &px, &side, &pay, 1e-9).unwrap()
        );
    }

    #[test]
    fn tuples_ignore_auxiliary_labels(seed in 0u64..100_000) {
        let mut r = common::rng(seed, "permute");
        let (c, px) = common::random_inner(&mut r, 3);
        let j = c.joint();
        let dims = [X, Y2, Y3].map(|n| j.variable(n).unwrap().size);
        let side = SideInfoSpec::identity(dims[0], dims[1], dims[2]).unwrap();
        let pay = common::hamming_payoff(dims);
        let mut p = c.clone();
        for n in [U1, U2, V1, V2] {
            let k = p.joint().variable(n).unwrap().size;
            p = p.permute_symbols(n, &permutation(&mut r, k)).unwrap();
        }
        prop_assert!(check_inner_constraints(&p, &px, 1e-9).unwrap().passed);
        let t0 = eval_inner_tuple(&c, &px, &side, &pay, 1e-9).unwrap();
        let t1 = eval_inner_tuple(&p, &px, &side, &pay, 1e-9).unwrap();
        for (x, y) in [(t0.r0, t1.r0), (t0.r1, t1.r1), (t0.r2, t1.r2), (t0.pi, t1.pi)] {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn equivocation_value_properties(seed in 0u64..100_000, bits in 0usize..7) {
        let (c, px) = common::random_inner(&mut common::rng(seed, "equivocation"), 3);
        let j = c.joint().marginalize(&[X, Y2, Y3, V1, V2]).unwrap();
        let s = secret_of(bits);
        let names = s.secret_names();
        let h = j.entropy(&names).unwrap();
        let leak = j.mutual_information(&names, &[V1]).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=12 {
            let r0 = 0.25 * i as f64;
            let v = equivocation_value(&j, &px, &s, r0, 1e-9).unwrap();
            prop_assert!(v <= h + 1e-12);
            prop_assert!(v >= prev - 1e-12);
            if r0 >= leak {
                prop_assert!((v - h).abs() <= 1e-12);
            }
            prev = v;
        }
    }

    #[test]
    fn log_loss_disclosure_reduces_to_conditional_entropy(seed in 0u64..100_000, bits in 0usize..7) {
        let (c, px) = common::random_inner(&mut common::rng(seed, "reduction"), 3);
        let o = c.as_outer().unwrap();
        let j = o.joint();
        let dims = [X, Y2, Y3].map(|n| j.variable(n).unwrap().size);
        let s = secret_of(bits);
        let side = SideInfoSpec::reveal(dims, &s.secret_names()).unwrap();
        let t = eval_outer_tuple(&o, &px, &side, &Payoff::LogLoss(s.clone()), 1e-9).unwrap();
        let want = j.conditional_entropy(&s.secret_names(), &[U]).unwrap();
        prop_assert!((t.pi - want).abs() <= 1e-12);
    }
}
