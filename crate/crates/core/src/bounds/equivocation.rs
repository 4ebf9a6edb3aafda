//! Maximum equivocation of a secret set under distortion and rate limits.
//!
//! The value of a joint over (X, Y2, Y3, V1, V2) is
//! `H(S) - [I(S;V1) - R0]+`, maximized over joints with `X ~ P_X`,
//! `X - V1 - Y2`, `(X,V1,Y2) - V2 - Y3`, `H(V2|V1) = 0`, both expected
//! distortions within limits, `I(X;V1) <= R1` and `I(X;V2) <= R2`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::search::{
    enumerated_candidate, joint_hash, map_count, mutate_candidate, random_candidate, run_in_pool,
    SearchOptions,
};
use super::structured::StructuredCandidate;
use super::{measured, source_deviation, ConstraintReport};
use crate::error::{Error, Result};
use crate::names::{V1, V2, X, Y2, Y3};
use crate::payoff::{LogLossPayoff, SecretVar};
use crate::prob::{entropy_of, JointDistribution, Pmf};
use crate::rng;

const SOURCE_TOL: f64 = 1e-11;
const FIT_ITERS: usize = 3000;

/// Finite per-letter distortion `d(x, y)`, rows indexed by `x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistortionTable {
    rows: Vec<Vec<f64>>,
}

impl DistortionTable {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || width == 0 || rows.iter().any(|r| r.len() != width) {
            return Err(Error::InvalidArgument(
                "distortion table must be a non-empty rectangle".into(),
            ));
        }
        if rows.iter().flatten().any(|d| !d.is_finite()) {
            return Err(Error::InvalidArgument(
                "distortion entries must be finite".into(),
            ));
        }
        Ok(DistortionTable { rows })
    }

    pub fn hamming(k: usize) -> Result<Self> {
        DistortionTable::new(
            (0..k)
                .map(|x| (0..k).map(|y| (x != y) as u8 as f64).collect())
                .collect(),
        )
    }

    pub fn x_size(&self) -> usize {
        self.rows.len()
    }

    pub fn y_size(&self) -> usize {
        self.rows[0].len()
    }

    pub fn value(&self, x: usize, y: usize) -> f64 {
        self.rows[x][y]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivocationProblem {
    pub p_x: Pmf,
    pub secret: LogLossPayoff,
    /// Distortion between X and Y2.
    pub d1: DistortionTable,
    /// Distortion between X and Y3.
    pub d2: DistortionTable,
    pub max_d1: f64,
    pub max_d2: f64,
    pub r0: f64,
    pub r1: f64,
    pub r2: f64,
    pub cap_v1: usize,
    pub cap_v2: usize,
}

impl EquivocationProblem {
    pub fn dims(&self) -> [usize; 3] {
        [self.p_x.probs().len(), self.d1.y_size(), self.d2.y_size()]
    }

    fn validate(&self) -> Result<()> {
        let nx = self.p_x.probs().len();
        if self.d1.x_size() != nx || self.d2.x_size() != nx {
            return Err(Error::InvalidArgument(
                "distortion tables must have one row per source symbol".into(),
            ));
        }
        if self.cap_v1 == 0 || self.cap_v2 == 0 {
            return Err(Error::InvalidArgument(
                "cardinality caps must be at least 1".into(),
            ));
        }
        if self.r0 < 0.0 || self.r1 < 0.0 || self.r2 < 0.0 {
            return Err(Error::InvalidArgument("rates must be nonnegative".into()));
        }
        Ok(())
    }

    /// Sizes of (U2, A, B, C) with `V2 = B`, `V1 = (B, C)`.
    fn parts(&self) -> [usize; 4] {
        let nb = self.cap_v2.min(self.cap_v1);
        [1, 1, nb, (self.cap_v1 / nb).max(1)]
    }
}

fn secret_names(secret: &LogLossPayoff) -> Vec<&'static str> {
    secret
        .secret()
        .iter()
        .map(|s: &SecretVar| s.name())
        .collect()
}

/// Membership in the feasible set, distortion and rate limits included.
pub fn check_equivocation_membership(
    joint: &JointDistribution,
    problem: &EquivocationProblem,
    tol: f64,
) -> Result<ConstraintReport> {
    problem.validate()?;
    let mut items = structural_items(joint, &problem.p_x, tol)?;
    let [nx, n2, n3] = [
        joint.variable(X)?.size,
        joint.variable(Y2)?.size,
        joint.variable(Y3)?.size,
    ];
    if [nx, n2, n3] != problem.dims() {
        return Err(Error::InvalidArgument(
            "joint alphabets do not match the problem".into(),
        ));
    }
    let q12 = joint.marginalize(&[X, Y2])?;
    let q13 = joint.marginalize(&[X, Y3])?;
    let ed1: f64 = (0..nx * n2)
        .map(|i| q12.table()[i] * problem.d1.value(i / n2, i % n2))
        .sum();
    let ed2: f64 = (0..nx * n3)
        .map(|i| q13.table()[i] * problem.d2.value(i / n3, i % n3))
        .sum();
    items.push(measured(
        "E d1(X,Y2) <= D1",
        (ed1 - problem.max_d1).max(0.0),
        tol,
    ));
    items.push(measured(
        "E d2(X,Y3) <= D2",
        (ed2 - problem.max_d2).max(0.0),
        tol,
    ));
    let r1 = joint.mutual_information(&[X], &[V1])?;
    let r2 = joint.mutual_information(&[X], &[V2])?;
    items.push(measured("I(X;V1) <= R1", (r1 - problem.r1).max(0.0), tol));
    items.push(measured("I(X;V2) <= R2", (r2 - problem.r2).max(0.0), tol));
    Ok(ConstraintReport::from_items(items))
}

fn structural_items(
    joint: &JointDistribution,
    p_x: &Pmf,
    tol: f64,
) -> Result<Vec<super::ConstraintItem>> {
    for v in [X, Y2, Y3, V1, V2] {
        joint.index_of(v)?;
    }
    Ok(vec![
        measured("X ~ P_X", source_deviation(joint, p_x)?, tol),
        measured(
            "X - V1 - Y2",
            joint.is_markov(&[X], &[V1], &[Y2], tol)?.value,
            tol,
        ),
        measured(
            "(X,V1,Y2) - V2 - Y3",
            joint.is_markov(&[X, V1, Y2], &[V2], &[Y3], tol)?.value,
            tol,
        ),
        measured(
            "H(V2|V1) = 0",
            joint.conditional_entropy(&[V2], &[V1])?,
            tol,
        ),
    ])
}

/// `H(S) - [I(S;V1) - R0]+` for a joint over (X, Y2, Y3, V1, V2).
pub fn equivocation_value(
    joint: &JointDistribution,
    p_x: &Pmf,
    secret: &LogLossPayoff,
    r0: f64,
    tol: f64,
) -> Result<f64> {
    let report = ConstraintReport::from_items(structural_items(joint, p_x, tol)?);
    if !report.passed {
        return Err(Error::Constraints(Box::new(report)));
    }
    let s = secret_names(secret);
    let h = joint.entropy(&s)?;
    let leak = joint.mutual_information(&s, &[V1])?;
    Ok(h - (leak - r0).max(0.0))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquivocationWitness {
    pub value: f64,
    /// Joint over (X, Y2, Y3, V1, V2).
    pub joint: JointDistribution,
    pub leak: f64,
    pub r1: f64,
    pub r2: f64,
    pub distortion1: f64,
    pub distortion2: f64,
    pub origin: usize,
    pub hash: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum EquivocationOutcome {
    Found(Box<EquivocationWitness>),
    Infeasible { reason: String },
}

impl EquivocationOutcome {
    pub fn witness(&self) -> Option<&EquivocationWitness> {
        match self {
            EquivocationOutcome::Found(w) => Some(w),
            EquivocationOutcome::Infeasible { .. } => None,
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct FastEval {
    value: f64,
    leak: f64,
    r1: f64,
    r2: f64,
    ed1: f64,
    ed2: f64,
}

struct Ctx<'a> {
    problem: &'a EquivocationProblem,
    dims: [usize; 3],
    parts: [usize; 4],
    rate_tol: f64,
    seed: u64,
    iterations: usize,
}

#[derive(Clone)]
struct Scored {
    cand: StructuredCandidate,
    eval: FastEval,
    score: f64,
    feasible: bool,
}

impl Ctx<'_> {
    fn evaluate(&self, c: &StructuredCandidate) -> FastEval {
        let [nx, n2, n3] = self.dims;
        let nxyy = nx * n2 * n3;
        let nv1 = c.n_v1();
        let joint = c.joint_v1_xyy();
        let p = self.problem;
        let ns: usize = p.secret.project(&vec![0.0; nxyy], self.dims).len();
        let mut q_v1x = vec![0.0; nv1 * nx];
        let mut q_v2x = vec![0.0; c.n_v2() * nx];
        let mut q_v1s = vec![0.0; nv1 * ns];
        let (mut ed1, mut ed2) = (0.0, 0.0);
        for v in 0..nv1 {
            let slice = &joint[v * nxyy..(v + 1) * nxyy];
            let v2 = c.v2_of(v);
            for (i, &q) in slice.iter().enumerate() {
                if q == 0.0 {
                    continue;
                }
                let (x, y2, y3) = (i / (n2 * n3), (i / n3) % n2, i % n3);
                q_v1x[v * nx + x] += q;
                q_v2x[v2 * nx + x] += q;
                ed1 += q * p.d1.value(x, y2);
                ed2 += q * p.d2.value(x, y3);
            }
            q_v1s[v * ns..(v + 1) * ns].copy_from_slice(&p.secret.project(slice, self.dims));
        }
        let mi = |table: &[f64], k: usize| -> (f64, f64) {
            let rows = table.len() / k;
            let mut col = vec![0.0; k];
            let mut row = vec![0.0; rows];
            for (i, q) in table.iter().enumerate() {
                col[i % k] += q;
                row[i / k] += q;
            }
            let h = entropy_of(&col);
            (h, (h + entropy_of(&row) - entropy_of(table)).max(0.0))
        };
        let (_, r1) = mi(&q_v1x, nx);
        let (_, r2) = mi(&q_v2x, nx);
        let (hs, leak) = mi(&q_v1s, ns);
        FastEval {
            value: hs - (leak - p.r0).max(0.0),
            leak,
            r1,
            r2,
            ed1,
            ed2,
        }
    }

    fn prepare(&self, mut c: StructuredCandidate) -> Scored {
        let p = self.problem;
        let err = c.fit_source(p.p_x.probs(), FIT_ITERS, SOURCE_TOL * 0.1);
        let eval = self.evaluate(&c);
        let excess = (eval.r1 - p.r1).max(0.0)
            + (eval.r2 - p.r2).max(0.0)
            + (eval.ed1 - p.max_d1).max(0.0)
            + (eval.ed2 - p.max_d2).max(0.0);
        let feasible = err <= SOURCE_TOL
            && eval.r1 <= p.r1 + self.rate_tol
            && eval.r2 <= p.r2 + self.rate_tol
            && eval.ed1 <= p.max_d1 + self.rate_tol
            && eval.ed2 <= p.max_d2 + self.rate_tol;
        let score = eval.value - 20.0 * excess - 1000.0 * err.min(1.0);
        Scored {
            cand: c,
            eval,
            score,
            feasible,
        }
    }

    fn local_search(&self, restart: usize) -> Option<Scored> {
        let mut rng = rng::stream(self.seed, "search_equivocation/restart", restart as u64);
        let mut cur = self.prepare(random_candidate(&mut rng, self.dims, self.parts, restart));
        let mut best = cur.feasible.then(|| cur.clone());
        for _ in 0..self.iterations {
            let next = self.prepare(mutate_candidate(&mut rng, &cur.cand));
            if next.feasible && best.as_ref().is_none_or(|b| next.eval.value > b.eval.value) {
                best = Some(next.clone());
            }
            if next.score >= cur.score {
                cur = next;
            }
        }
        best
    }
}

/// Best equivocation found over the feasible set.
pub fn search_equivocation(
    problem: &EquivocationProblem,
    opts: &SearchOptions,
) -> Result<EquivocationOutcome> {
    problem.validate()?;
    if opts.restarts == 0 {
        return Err(Error::InvalidArgument("restarts must be at least 1".into()));
    }
    let dims = problem.dims();
    let parts = problem.parts();
    let ctx = Ctx {
        problem,
        dims,
        parts,
        rate_tol: opts.rate_tol,
        seed: opts.seed,
        iterations: opts.iterations,
    };
    let enumerate = map_count(dims, parts).filter(|&n| n <= opts.enumeration_limit);
    let results: Vec<Option<Scored>> = run_in_pool(opts.threads, || {
        let mut out: Vec<Option<Scored>> = (0..opts.restarts)
            .into_par_iter()
            .map(|r| ctx.local_search(r))
            .collect();
        if let Some(n) = enumerate {
            out.extend(
                (0..n)
                    .into_par_iter()
                    .map(|k| {
                        Some(ctx.prepare(enumerated_candidate(dims, parts, k)))
                            .filter(|s| s.feasible)
                    })
                    .collect::<Vec<_>>(),
            );
        }
        out
    })?;

    let mut ranked: Vec<(usize, Scored)> = results
        .into_iter()
        .enumerate()
        .filter_map(|(i, s)| s.map(|s| (i, s)))
        .collect();
    ranked.sort_by(|a, b| {
        b.1.eval
            .value
            .total_cmp(&a.1.eval.value)
            .then(a.0.cmp(&b.0))
    });

    let mut confirmed: Vec<EquivocationWitness> = Vec::new();
    for (origin, s) in ranked {
        if let Some(best) = confirmed.first() {
            if s.eval.value < best.value - 1e-12 {
                break;
            }
        }
        let joint = s
            .cand
            .to_inner()?
            .joint()
            .marginalize(&[X, Y2, Y3, V1, V2])?;
        let report = check_equivocation_membership(&joint, problem, 1e-9)?;
        if !report.passed {
            continue;
        }
        let value = equivocation_value(&joint, &problem.p_x, &problem.secret, problem.r0, 1e-9)?;
        let hash = joint_hash(&joint);
        confirmed.push(EquivocationWitness {
            value,
            joint,
            leak: s.eval.leak,
            r1: s.eval.r1,
            r2: s.eval.r2,
            distortion1: s.eval.ed1,
            distortion2: s.eval.ed2,
            origin,
            hash,
        });
    }
    let top = confirmed
        .iter()
        .map(|w| w.value)
        .fold(f64::NEG_INFINITY, f64::max);
    let best = confirmed
        .into_iter()
        .filter(|w| w.value >= top - 1e-12)
        .min_by(|a, b| a.hash.cmp(&b.hash));
    Ok(match best {
        Some(w) => EquivocationOutcome::Found(Box::new(w)),
        None => EquivocationOutcome::Infeasible {
            reason: format!(
                "no joint meets distortions ({}, {}) within rates ({}, {}) under caps |V1| <= {}, |V2| <= {}",
                problem.max_d1, problem.max_d2, problem.r1, problem.r2, problem.cap_v1, problem.cap_v2
            ),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::Alphabet;

    fn binary_problem(d: f64, r0: f64) -> EquivocationProblem {
        EquivocationProblem {
            p_x: Pmf::uniform(Alphabet::new(X, 2).unwrap()).unwrap(),
            secret: LogLossPayoff::new(vec![SecretVar::X]).unwrap(),
            d1: DistortionTable::hamming(2).unwrap(),
            d2: DistortionTable::hamming(2).unwrap(),
            max_d1: d,
            max_d2: d,
            r0,
            r1: 1.0,
            r2: 1.0,
            cap_v1: 4,
            cap_v2: 2,
        }
    }

    #[test]
    fn distortion_table_rejects_ragged_rows() {
        assert!(DistortionTable::new(vec![vec![0.0, 1.0], vec![1.0]]).is_err());
        assert!(DistortionTable::new(vec![vec![f64::INFINITY]]).is_err());
    }

    #[test]
    fn zero_distortion_with_full_key() {
        let out = search_equivocation(
            &binary_problem(0.0, 1.0),
            &SearchOptions {
                restarts: 4,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((out.witness().unwrap().value - 1.0).abs() < 1e-6);
    }
}
