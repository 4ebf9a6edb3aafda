#![allow(dead_code)]

use cascade_core::bounds::{InnerCandidate, SideInfoSpec, StructuredCandidate};
use cascade_core::example;
use cascade_core::names::{V1, V2, X};
use cascade_core::payoff::{Payoff, PayoffTable};
use cascade_core::prob::{Alphabet, JointDistribution, Pmf};
use cascade_core::rng::{dirichlet, stream, vertex, StreamRng};
use cascade_core::sim::{IndexBits, Scheme, SchemeRates, SchemeSpec, SystemTable};
use rand::Rng;

pub fn rng(seed: u64, label: &str) -> StreamRng {
    stream(seed, label, 0)
}

fn row(r: &mut StreamRng, k: usize, sparse: bool) -> Vec<f64> {
    if sparse && r.random_bool(0.4) {
        vertex(r, k)
    } else {
        dirichlet(r, k, 1.0)
    }
}

/// Random factored candidate: `V1 = (U2, A, B, C)`, `U1 = (U2, A)`, `V2 = (U2, B)`.
pub fn random_structured(
    r: &mut StreamRng,
    dims: [usize; 3],
    parts: [usize; 4],
    sparse: bool,
) -> StructuredCandidate {
    let [nu2, na, nb, nc] = parts;
    let nv1 = parts.iter().product::<usize>();
    StructuredCandidate {
        dims,
        parts,
        p_u2: row(r, nu2, sparse),
        p_a: (0..nu2).map(|_| row(r, na, sparse)).collect(),
        p_b: (0..nu2).map(|_| row(r, nb, sparse)).collect(),
        p_c: (0..nu2 * na * nb).map(|_| row(r, nc, sparse)).collect(),
        kx: (0..nv1).map(|_| row(r, dims[0], sparse)).collect(),
        ky2: (0..nv1).map(|_| row(r, dims[1], sparse)).collect(),
        ky3: (0..nu2 * nb).map(|_| row(r, dims[2], sparse)).collect(),
    }
}

/// Auxiliary splits whose every alphabet (U1, U2, V1, V2) has at most `max` symbols.
pub fn small_parts(max: usize) -> Vec<[usize; 4]> {
    let mut out = Vec::new();
    for u2 in 1..=max {
        for a in 1..=max {
            for b in 1..=max {
                for c in 1..=max {
                    if u2 * a * b * c <= max {
                        out.push([u2, a, b, c]);
                    }
                }
            }
        }
    }
    out
}

/// A random feasible inner candidate with signal and auxiliary alphabets of
/// at most `max` symbols, with its own source law.
pub fn random_inner(r: &mut StreamRng, max: usize) -> (InnerCandidate, Pmf) {
    let dims = [
        r.random_range(2..=max),
        r.random_range(1..=max),
        r.random_range(1..=max),
    ];
    let choices = small_parts(max);
    let parts = choices[r.random_range(0..choices.len())];
    let sparse = r.random_bool(0.5);
    let c = random_structured(r, dims, parts, sparse)
        .to_inner()
        .unwrap();
    let p_x = c.joint().pmf(X).unwrap();
    (c, p_x)
}

/// Joint with arbitrary sizes and Dirichlet cell weights, some cells zeroed.
pub fn random_joint(r: &mut StreamRng, names: &[&str], max: usize) -> JointDistribution {
    let vars: Vec<Alphabet> = names
        .iter()
        .map(|n| Alphabet::new(*n, r.random_range(1..=max)).unwrap())
        .collect();
    let cells: usize = vars.iter().map(|a| a.size).product();
    let mut t = dirichlet(r, cells, 0.7);
    if cells > 1 && r.random_bool(0.5) {
        let z = r.random_range(0..cells);
        t[z] = 0.0;
        let s: f64 = t.iter().sum();
        t.iter_mut().for_each(|p| *p /= s);
    }
    JointDistribution::new(vars, t).unwrap()
}

pub fn hamming_payoff(dims: [usize; 3]) -> Payoff {
    let a = |n: &str, k: usize| Alphabet::new(n, k).unwrap();
    Payoff::Table(
        PayoffTable::from_fn(
            a("X", dims[0]),
            a("Y2", dims[1]),
            a("Y3", dims[2]),
            a("Z", dims[0]),
            |x, _, _, z| f64::from(u8::from(x != z)),
        )
        .unwrap(),
    )
}

/// Corner-1 scheme at blocklength `n` with `slack` and `key` key bits.
pub fn corner_spec(n: usize, slack: f64, key: u32, seed: u64) -> SchemeSpec {
    let c = example::corner_candidate(1).unwrap();
    let side = example::side_info().unwrap();
    let bits = IndexBits {
        key,
        ..SchemeRates::of(&c, &side).unwrap().bits(n, slack)
    };
    SchemeSpec::with_bits(n, c, example::source().unwrap(), side, bits, slack, seed).unwrap()
}

/// Random binary scheme with explicit index bits.
pub fn random_binary_spec(seed: u64, n: usize, bits: IndexBits) -> (SchemeSpec, Payoff) {
    let mut r = rng(seed, "spec");
    let parts = [[1, 1, 1, 2], [1, 1, 2, 1], [1, 2, 1, 1], [2, 1, 1, 1]][r.random_range(0..4)];
    let c = random_structured(&mut r, [2, 2, 2], parts, false)
        .to_inner()
        .unwrap();
    let p_x = c.joint().pmf(X).unwrap();
    let side = SideInfoSpec::identity(2, 2, 2).unwrap();
    let spec = SchemeSpec::with_bits(n, c, p_x, side, bits, 0.0, seed).unwrap();
    (spec, hamming_payoff([2, 2, 2]))
}

pub fn bits(a: u32, b: u32, c: u32, d: u32, key: u32) -> IndexBits {
    IndexBits { a, b, c, d, key }
}

/// The tiny specs shared by the simulation suites.
pub fn tiny_specs() -> Vec<(String, SchemeSpec, Payoff)> {
    let ternary = example::payoff().unwrap();
    let mut out = vec![
        (
            "corner-1 n=1".to_string(),
            corner_spec(1, 1.0, 4, 1),
            ternary.clone(),
        ),
        (
            "corner-1 n=1 seed 2".to_string(),
            corner_spec(1, 1.0, 2, 2),
            ternary.clone(),
        ),
        (
            "corner-1 n=2".to_string(),
            corner_spec(2, 1.0, 4, 3),
            ternary.clone(),
        ),
    ];
    for (i, (n, b)) in [
        (1, bits(1, 0, 0, 1, 1)),
        (2, bits(1, 1, 0, 1, 2)),
        (2, bits(0, 1, 1, 0, 1)),
    ]
    .into_iter()
    .enumerate()
    {
        let (spec, payoff) = random_binary_spec(10 + i as u64, n, b);
        out.push((format!("binary #{i} n={n}"), spec, payoff));
    }
    out
}

/// Likelihood-encoder law recomputed from the raw codewords and the
/// candidate's own `P(x | v1, v2)`.
pub fn brute_force_encoder(scheme: &Scheme, xn: &[usize], k: usize) -> Vec<f64> {
    let j = scheme
        .spec
        .candidate
        .joint()
        .marginalize(&[V1, V2, X])
        .unwrap();
    let [nv1, nv2, nx] = [j.sizes()[0], j.sizes()[1], j.sizes()[2]];
    let p_x_given = |v1: usize, v2: usize, x: usize| {
        let base = (v1 * nv2 + v2) * nx;
        let s: f64 = j.table()[base..base + nx].iter().sum();
        j.table()[base + x] / s
    };
    let _ = nv1;
    let cb = &scheme.codebooks;
    let [na, nb, nc, nd, nk] = cb.bits.sizes();
    let mut w = Vec::new();
    for a in 0..na {
        for b in 0..nb {
            for c in 0..nc {
                for d in 0..nd {
                    let v1 = &cb.v1[((((a * nb + b) * nc + c) * nd + d) * nk) + k];
                    let v2 = &cb.v2[(a * nb + b) * nk + k];
                    w.push(
                        (0..xn.len())
                            .map(|t| p_x_given(v1[t], v2[t], xn[t]))
                            .product::<f64>(),
                    );
                }
            }
        }
    }
    let s: f64 = w.iter().sum();
    w.into_iter().map(|p| p / s).collect()
}

/// `P(X_t, Y2_t, Y3_t | M1 = m, W^{t-1} = h)` by direct conditioning of the
/// materialized table, with the mass of the conditioning event.
pub fn direct_posterior(
    table: &SystemTable,
    joint: &JointDistribution,
    m: usize,
    h: &[usize],
) -> (Vec<f64>, f64) {
    let [a, b, c, d] = table.scheme.codebooks.split_message(m);
    let mut evidence: Vec<(String, usize)> = vec![
        ("Ma".into(), a),
        ("Mb".into(), b),
        ("Mc".into(), c),
        ("Md".into(), d),
    ];
    for (t, &w) in h.iter().enumerate() {
        evidence.push((format!("W_{}", t + 1), w));
    }
    let t = h.len() + 1;
    let names: Vec<String> = evidence.iter().map(|(n, _)| n.clone()).collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let ev = joint.marginalize(&refs).unwrap();
    let digits: Vec<usize> = evidence.iter().map(|(_, s)| *s).collect();
    let mass = ev.prob(&digits);
    let ev_refs: Vec<(&str, usize)> = evidence.iter().map(|(n, s)| (n.as_str(), *s)).collect();
    let cond = joint.condition(&ev_refs).unwrap();
    let (xt, y2t, y3t) = (format!("X_{t}"), format!("Y2_{t}"), format!("Y3_{t}"));
    let post = cond
        .marginalize(&[xt.as_str(), y2t.as_str(), y3t.as_str()])
        .unwrap();
    (post.table().to_vec(), mass)
}
