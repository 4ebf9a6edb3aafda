mod common;

use cascade_core::example;
use cascade_core::names::{U2, V1, V2, X, Y2, Y3};
use cascade_core::prob::{Alphabet, Channel, JointDistribution, Pmf};
use cascade_core::Error;
use proptest::prelude::*;

fn a(n: &str, k: usize) -> Alphabet {
    Alphabet::new(n, k).unwrap()
}

fn fair_bits() -> JointDistribution {
    JointDistribution::independent(&[
        Pmf::uniform(a("A", 2)).unwrap(),
        Pmf::uniform(a("B", 2)).unwrap(),
    ])
    .unwrap()
}

/// Uniform over the six all-distinct ternary triples.
fn ternary_joint() -> JointDistribution {
    JointDistribution::from_fn(vec![a(X, 3), a(Y2, 3), a(Y3, 3)], |d| {
        if example::all_distinct(d[0], d[1], d[2]) {
            1.0 / 6.0
        } else {
            0.0
        }
    })
    .unwrap()
}

#[test]
fn entropy_examples() {
    let u3 = Pmf::uniform(a(X, 3)).unwrap().to_joint();
    assert!((u3.entropy(&[X]).unwrap() - 1.584_962_500_721_156).abs() < 1e-12);
    let pm = Pmf::point_mass(a(X, 4), 2).unwrap().to_joint();
    assert_eq!(pm.entropy(&[X]).unwrap(), 0.0);
    assert!((fair_bits().entropy(&["A", "B"]).unwrap() - 2.0).abs() < 1e-15);
    match fair_bits().entropy(&["Q"]) {
        Err(Error::UnknownVariable(n)) => assert_eq!(n, "Q"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn conditional_entropy_examples() {
    let t = ternary_joint();
    assert!(t.conditional_entropy(&[X], &[Y2, Y3]).unwrap().abs() < 1e-15);
    let d = fair_bits();
    assert_eq!(d.conditional_entropy(&["A"], &["A"]).unwrap(), 0.0);
    assert!((d.conditional_entropy(&["A"], &["B"]).unwrap() - 1.0).abs() < 1e-15);
}

#[test]
fn mutual_information_examples() {
    let t = ternary_joint();
    let want = 3f64.log2() - 1.0;
    assert!((t.mutual_information(&[X], &[Y3]).unwrap() - want).abs() < 1e-12);
    let d = fair_bits();
    assert_eq!(d.mutual_information(&["A"], &["B"]).unwrap(), 0.0);
    assert_eq!(
        d.conditional_mutual_information(&["A"], &["B"], &["B"])
            .unwrap(),
        0.0
    );
    assert!(matches!(
        d.mutual_information(&["A"], &["A", "B"]),
        Err(Error::Overlap(_))
    ));
}

#[test]
fn marginalize_and_condition_examples() {
    let t = ternary_joint();
    let mx = t.marginalize(&[X]).unwrap();
    for p in mx.table() {
        assert!((p - 1.0 / 3.0).abs() < 1e-15);
    }
    let c = t.condition(&[(X, 0), (Y2, 1), (Y3, 2)]).unwrap();
    assert_eq!(c.prob(&[0, 1, 2]), 1.0);
    assert_eq!(c.table().iter().filter(|p| **p > 0.0).count(), 1);
    assert_eq!(t.marginalize(&[X, Y2, Y3]).unwrap(), t);
    assert!(matches!(
        t.condition(&[(X, 0), (Y2, 0)]),
        Err(Error::ZeroProbabilityEvidence)
    ));
}

#[test]
fn attach_channel_examples() {
    let x = Pmf::new(a(X, 3), vec![0.2, 0.3, 0.5]).unwrap().to_joint();
    let w = x
        .attach_channel(&Channel::identity(a(X, 3), "W1").unwrap(), &[X], "W1")
        .unwrap();
    assert!(w.conditional_entropy(&["W1"], &[X]).unwrap().abs() < 1e-15);

    let noise = Channel::constant(vec![a(X, 3)], &Pmf::uniform(a("N", 4)).unwrap()).unwrap();
    let n = x.attach_channel(&noise, &[X], "N").unwrap();
    assert!(n.mutual_information(&["N"], &[X]).unwrap() < 1e-15);

    let bit = Pmf::new(a("B", 2), vec![0.9, 0.1]).unwrap().to_joint();
    let out = bit
        .attach_channel(
            &Channel::binary_symmetric(a("B", 2), "O", 0.5).unwrap(),
            &["B"],
            "O",
        )
        .unwrap();
    assert!(out.mutual_information(&["O"], &["B"]).unwrap() < 1e-15);
    assert!((out.entropy(&["O"]).unwrap() - 1.0).abs() < 1e-15);

    let ch = Channel::identity(a(X, 3), X).unwrap();
    assert!(matches!(
        x.attach_channel(&ch, &[X], X),
        Err(Error::DuplicateVariable(_))
    ));
}

#[test]
fn structural_check_examples() {
    let d = common::random_joint(&mut common::rng(1, "markov"), &["A", "B"], 4);
    assert!(d.is_markov(&["A"], &["B"], &["B"], 1e-9).unwrap().holds);

    let c1 = example::corner_candidate(1).unwrap();
    let j = c1.joint();
    let m = j.is_markov(&[X, Y2], &[Y3], &[U2], 1e-9).unwrap();
    assert!(m.holds && m.value <= 1e-9);
    let det = j.is_deterministic(&[V2], &[V1], 1e-9).unwrap();
    assert!(det.holds && det.value.abs() < 1e-12);

    let bits = fair_bits();
    let not = bits.is_deterministic(&["A"], &["B"], 1e-9).unwrap();
    assert!(!not.holds && (not.value - 1.0).abs() < 1e-12);
}

#[test]
fn table_validation_and_cap() {
    assert!(Alphabet::new("A", 0).is_err());
    assert!(Alphabet::with_labels("A", vec!["x", "x"]).is_err());
    assert!(Pmf::new(a("A", 2), vec![0.5, 0.6]).is_err());
    assert!(Pmf::new(a("A", 2), vec![1.5, -0.5]).is_err());
    assert!(JointDistribution::new(vec![a("A", 2), a("A", 2)], vec![0.25; 4]).is_err());
    let big = vec![a("A", 10_000), a("B", 10_000), a("C", 2)];
    assert!(matches!(
        JointDistribution::new(big, vec![]),
        Err(Error::CellCap {
            required: 200_000_000,
            ..
        })
    ));
}

#[test]
fn json_round_trip_is_exact() {
    let mut r = common::rng(4, "json");
    for _ in 0..20 {
        let d = common::random_joint(&mut r, &["A", "B", "C"], 4);
        let s = serde_json::to_string(&d).unwrap();
        let back: JointDistribution = serde_json::from_str(&s).unwrap();
        assert_eq!(back, d);
    }
    let labelled = JointDistribution::new(
        vec![Alphabet::with_labels("S", vec!["lo", "hi"]).unwrap()],
        vec![0.1, 0.9],
    )
    .unwrap();
    let v: serde_json::Value = serde_json::to_value(&labelled).unwrap();
    assert_eq!(v["variables"][0]["labels"][1], "hi");
    assert_eq!(
        serde_json::from_value::<JointDistribution>(v).unwrap(),
        labelled
    );
}

fn joint_strategy(vars: usize) -> impl Strategy<Value = JointDistribution> {
    proptest::collection::vec(1usize..=3, vars).prop_flat_map(move |sizes| {
        let cells: usize = sizes.iter().product();
        proptest::collection::vec(0.0f64..1.0, cells).prop_filter_map("nonzero mass", move |w| {
            let s: f64 = w.iter().sum();
            if s <= 0.0 {
                return None;
            }
            let names = ["A", "B", "C", "D"];
            let vars = sizes
                .iter()
                .enumerate()
                .map(|(i, &k)| a(names[i], k))
                .collect();
            JointDistribution::new(vars, w.iter().map(|p| p / s).collect()).ok()
        })
    })
}

proptest! {
    #[test]
    fn chain_rule(d in joint_strategy(3)) {
        let lhs = d.entropy(&["A", "B"]).unwrap();
        let rhs = d.entropy(&["A"]).unwrap() + d.conditional_entropy(&["B"], &["A"]).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9);
    }

    #[test]
    fn measures_are_nonnegative(d in joint_strategy(3)) {
        prop_assert!(d.entropy(&["A", "C"]).unwrap() >= 0.0);
        prop_assert!(d.conditional_entropy(&["A"], &["B", "C"]).unwrap() >= 0.0);
        prop_assert!(d.mutual_information(&["A"], &["B"]).unwrap() >= 0.0);
        prop_assert!(d.conditional_mutual_information(&["A"], &["B"], &["C"]).unwrap() >= 0.0);
    }

    #[test]
    fn data_processing(d in joint_strategy(2), rows in proptest::collection::vec(proptest::collection::vec(0.01f64..1.0, 3), 3)) {
        let nb = d.variable("B").unwrap().size;
        let rows: Vec<Vec<f64>> = rows[..nb].iter().map(|r| {
            let s: f64 = r.iter().sum();
            r.iter().map(|p| p / s).collect()
        }).collect();
        let ch = Channel::new(vec![d.variable("B").unwrap().clone()], a("W", 3), rows).unwrap();
        let w = d.attach_channel(&ch, &["B"], "W").unwrap();
        let out = w.mutual_information(&["A"], &["W"]).unwrap();
        let inp = w.mutual_information(&["A"], &["B"]).unwrap();
        prop_assert!(out <= inp + 1e-9);
    }

    #[test]
    fn condition_matches_direct_formula(d in joint_strategy(3), sym in 0usize..3) {
        let nc = d.variable("C").unwrap().size;
        let c = sym % nc;
        let pc = d.marginalize(&["C"]).unwrap().table()[c];
        prop_assume!(pc > 0.0);
        let got = d.condition(&[("C", c)]).unwrap().marginalize(&["A", "B"]).unwrap();
        let [na, nb] = [d.variable("A").unwrap().size, d.variable("B").unwrap().size];
        for i in 0..na {
            for j in 0..nb {
                let want = d.prob(&[i, j, c]) / pc;
                prop_assert!((got.prob(&[i, j]) - want).abs() <= 1e-12);
            }
        }
    }
}
