//! Search over inner-bound candidates.
//!
//! Maximizes Π subject to the rate budget. Each restart runs a seeded local
//! search over [`StructuredCandidate`] parameters; when the space of
//! deterministic signal maps is small it is also enumerated exhaustively.
//! Results are merged in restart order, so the outcome does not depend on
//! the thread count.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::structured::{FastTuple, SideMatrix, StructuredCandidate};
use super::{eval_inner_tuple, InnerCandidate, RatePayoffTuple, SideInfoSpec};
use crate::error::{Error, Result};
use crate::payoff::Payoff;
use crate::prob::{JointDistribution, Pmf};
use crate::rng::{self, StreamRng};

const SOURCE_TOL: f64 = 1e-11;
const FIT_ITERS: usize = 3000;
const CHECK_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateBudget {
    pub r0: f64,
    pub r1: f64,
    pub r2: f64,
}

/// Cardinality caps for the auxiliaries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Caps {
    pub u1: usize,
    pub u2: usize,
    pub v1: usize,
    pub v2: usize,
}

impl Caps {
    /// `|U1|, |U2|, |V2| <= |X||Y2||Y3| + 2` and `|V1|` up to its square.
    pub fn default_for(dims: [usize; 3]) -> Self {
        let n = dims.iter().product::<usize>() + 2;
        Caps {
            u1: n,
            u2: n,
            v1: n * n,
            v2: n,
        }
    }

    /// Sizes of (U2, A, B, C) in the factored parameterization.
    pub(crate) fn parts(&self) -> Result<[usize; 4]> {
        if self.u1 == 0 || self.u2 == 0 || self.v1 == 0 || self.v2 == 0 {
            return Err(Error::InvalidArgument(
                "cardinality caps must be at least 1".into(),
            ));
        }
        let nu2 = self.u2.min(self.u1).min(self.v2).min(self.v1);
        let mut na = (self.u1 / nu2).max(1);
        let mut nb = (self.v2 / nu2).max(1);
        while nu2 * na * nb > self.v1 {
            if na >= nb && na > 1 {
                na -= 1;
            } else if nb > 1 {
                nb -= 1;
            } else {
                break;
            }
        }
        let nc = (self.v1 / (nu2 * na * nb)).max(1);
        Ok([nu2, na, nb, nc])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub restarts: usize,
    /// Local-search proposals per restart.
    pub iterations: usize,
    pub seed: u64,
    /// Enumerate deterministic signal maps when there are at most this many.
    pub enumeration_limit: u64,
    /// Slack allowed on the rate budget, in bits.
    pub rate_tol: f64,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            restarts: 64,
            iterations: 3000,
            seed: 0,
            enumeration_limit: 1_000_000,
            rate_tol: 1e-9,
            threads: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerSearchProblem {
    pub p_x: Pmf,
    pub side: SideInfoSpec,
    pub payoff: Payoff,
    pub budget: RateBudget,
    pub caps: Caps,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SearchWitness {
    pub tuple: RatePayoffTuple,
    pub candidate: InnerCandidate,
    pub structured: StructuredCandidate,
    /// Restart that produced the witness; enumerated maps count after restarts.
    pub origin: usize,
    pub hash: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SearchOutcome {
    Found(Box<SearchWitness>),
    Infeasible { reason: String },
}

impl SearchOutcome {
    pub fn witness(&self) -> Option<&SearchWitness> {
        match self {
            SearchOutcome::Found(w) => Some(w),
            SearchOutcome::Infeasible { .. } => None,
        }
    }
}

struct Context<'a> {
    problem: &'a InnerSearchProblem,
    p_x: Vec<f64>,
    side: SideMatrix,
    dims: [usize; 3],
    parts: [usize; 4],
    scale: f64,
    worst: f64,
    rate_tol: f64,
    seed: u64,
    iterations: usize,
}

#[derive(Clone)]
struct Scored {
    cand: StructuredCandidate,
    tuple: FastTuple,
    score: f64,
    feasible: bool,
}

impl Context<'_> {
    fn prepare(&self, mut c: StructuredCandidate) -> Scored {
        c.repair_signals(&self.problem.payoff);
        c.mask_forbidden(&self.problem.payoff);
        let source_err = c.fit_source(&self.p_x, FIT_ITERS, SOURCE_TOL * 0.1);
        let tuple = c.fast_tuple(&self.side, &self.problem.payoff);
        let b = self.problem.budget;
        let excess =
            (tuple.r0 - b.r0).max(0.0) + (tuple.r1 - b.r1).max(0.0) + (tuple.r2 - b.r2).max(0.0);
        let feasible = source_err <= SOURCE_TOL
            && tuple.forbidden_mass == 0.0
            && tuple.r0 <= b.r0 + self.rate_tol
            && tuple.r1 <= b.r1 + self.rate_tol
            && tuple.r2 <= b.r2 + self.rate_tol;
        let pi = if tuple.pi.is_finite() {
            tuple.pi
        } else {
            self.worst
        };
        let score = pi
            - 20.0 * self.scale * excess
            - 20.0 * self.scale * tuple.forbidden_mass
            - 1000.0 * self.scale * source_err.min(1.0);
        Scored {
            cand: c,
            tuple,
            score,
            feasible,
        }
    }

    fn local_search(&self, restart: usize) -> Option<Scored> {
        let mut rng = rng::stream(self.seed, "search_inner/restart", restart as u64);
        let mut cur = self.prepare(random_candidate(&mut rng, self.dims, self.parts, restart));
        let mut best = cur.feasible.then(|| cur.clone());
        for _ in 0..self.iterations {
            let next = self.prepare(mutate_candidate(&mut rng, &cur.cand));
            if next.feasible && best.as_ref().is_none_or(|b| next.tuple.pi > b.tuple.pi) {
                best = Some(next.clone());
            }
            if next.score >= cur.score {
                cur = next;
            }
        }
        best
    }

    fn enumerated(&self, k: u64) -> Scored {
        self.prepare(enumerated_candidate(self.dims, self.parts, k))
    }
}

pub(crate) fn uniform_candidate(dims: [usize; 3], parts: [usize; 4]) -> StructuredCandidate {
    let [nu2, na, nb, nc] = parts;
    let [nx, n2, n3] = dims;
    let nv1 = nu2 * na * nb * nc;
    let uni = |k: usize| vec![1.0 / k as f64; k];
    StructuredCandidate {
        dims,
        parts,
        p_u2: uni(nu2),
        p_a: vec![uni(na); nu2],
        p_b: vec![uni(nb); nu2],
        p_c: vec![uni(nc); nu2 * na * nb],
        kx: vec![uni(nx); nv1],
        ky2: vec![uni(n2); nv1],
        ky3: vec![uni(n3); nu2 * nb],
    }
}

/// Random starting point. `style` cycles between mostly-deterministic
/// signal maps, sparse auxiliaries, and fully mixed rows.
pub(crate) fn random_candidate(
    rng: &mut StreamRng,
    dims: [usize; 3],
    parts: [usize; 4],
    style: usize,
) -> StructuredCandidate {
    let mut c = uniform_candidate(dims, parts);
    let row = |rng: &mut StreamRng, k: usize, p_vertex: f64, alpha: f64| {
        if rng.random::<f64>() < p_vertex {
            rng::vertex(rng, k)
        } else {
            rng::dirichlet(rng, k, alpha)
        }
    };
    let (pv_aux, pv_sig, alpha) = match style % 4 {
        0 => (0.0, 0.8, 1.0),
        1 => (0.3, 0.5, 0.5),
        2 => (0.0, 0.0, 1.0),
        _ => (0.0, 1.0, 1.0),
    };
    c.p_u2 = row(rng, parts[0], 0.0, alpha);
    for r in c
        .p_a
        .iter_mut()
        .chain(c.p_b.iter_mut())
        .chain(c.p_c.iter_mut())
    {
        *r = if style % 4 == 3 {
            subset_uniform(rng, r.len())
        } else {
            row(rng, r.len(), pv_aux, alpha)
        };
    }
    for r in
        c.kx.iter_mut()
            .chain(c.ky2.iter_mut())
            .chain(c.ky3.iter_mut())
    {
        *r = row(rng, r.len(), pv_sig, alpha);
    }
    c
}

/// Perturbs one to three randomly chosen rows.
pub(crate) fn mutate_candidate(
    rng: &mut StreamRng,
    c: &StructuredCandidate,
) -> StructuredCandidate {
    let mut n = c.clone();
    let changes = 1 + (rng.random::<f64>() < 0.3) as usize + (rng.random::<f64>() < 0.1) as usize;
    for _ in 0..changes {
        let lens = [
            1,
            n.p_a.len(),
            n.p_b.len(),
            n.p_c.len(),
            n.kx.len(),
            n.ky2.len(),
            n.ky3.len(),
        ];
        let total: usize = lens.iter().sum();
        let mut pick = rng.random_range(0..total);
        let mut g = 0;
        while pick >= lens[g] {
            pick -= lens[g];
            g += 1;
        }
        let row: &mut Vec<f64> = match g {
            0 => &mut n.p_u2,
            1 => &mut n.p_a[pick],
            2 => &mut n.p_b[pick],
            3 => &mut n.p_c[pick],
            4 => &mut n.kx[pick],
            5 => &mut n.ky2[pick],
            _ => &mut n.ky3[pick],
        };
        mutate_row(rng, row);
    }
    n
}

/// The `k`-th combination of deterministic signal maps, other rows uniform.
pub(crate) fn enumerated_candidate(
    dims: [usize; 3],
    parts: [usize; 4],
    k: u64,
) -> StructuredCandidate {
    let mut c = uniform_candidate(dims, parts);
    let mut k = k;
    let mut take = |n: usize| {
        let d = (k % n as u64) as usize;
        k /= n as u64;
        let mut r = vec![0.0; n];
        r[d] = 1.0;
        r
    };
    for r in c.kx.iter_mut() {
        *r = take(dims[0]);
    }
    for r in c.ky2.iter_mut() {
        *r = take(dims[1]);
    }
    for r in c.ky3.iter_mut() {
        *r = take(dims[2]);
    }
    c
}

/// Number of deterministic (kx, ky2, ky3) map combinations.
pub(crate) fn map_count(dims: [usize; 3], parts: [usize; 4]) -> Option<u64> {
    let [nx, n2, n3] = dims;
    let [nu2, na, nb, nc] = parts;
    let nv1 = (nu2 * na * nb * nc) as u32;
    let nv2 = (nu2 * nb) as u32;
    (nx as u64)
        .checked_pow(nv1)?
        .checked_mul((n2 as u64).checked_pow(nv1)?)?
        .checked_mul((n3 as u64).checked_pow(nv2)?)
}

/// Uniform over a random nonempty subset of `0..k`.
fn subset_uniform(rng: &mut StreamRng, k: usize) -> Vec<f64> {
    let mut on: Vec<bool> = (0..k).map(|_| rng.random::<bool>()).collect();
    if !on.contains(&true) {
        on[rng.random_range(0..k)] = true;
    }
    let m = on.iter().filter(|&&b| b).count() as f64;
    on.iter().map(|&b| if b { 1.0 / m } else { 0.0 }).collect()
}

pub(crate) fn mutate_row(rng: &mut StreamRng, row: &mut [f64]) {
    let k = row.len();
    if k == 1 {
        return;
    }
    match rng.random_range(0..5) {
        0 => row.copy_from_slice(&rng::vertex(rng, k)),
        4 => row.copy_from_slice(&subset_uniform(rng, k)),
        1 => row.copy_from_slice(&rng::dirichlet(rng, k, 1.0)),
        2 => {
            let eta: f64 = rng.random::<f64>() * 0.5;
            let d = rng::dirichlet(rng, k, 0.5);
            for (r, n) in row.iter_mut().zip(d) {
                *r = (1.0 - eta) * *r + eta * n;
            }
        }
        _ => {
            let i = rng.random_range(0..k);
            let j = (i + rng.random_range(1..k)) % k;
            let delta = row[i] * rng.random::<f64>();
            row[i] -= delta;
            row[j] += delta;
        }
    }
    let s: f64 = row.iter().sum();
    row.iter_mut().for_each(|p| *p /= s);
}

/// SHA-256 over the table shape and the exact bits of every cell.
pub(crate) fn joint_hash(j: &JointDistribution) -> String {
    let mut h = Sha256::new();
    for v in j.variables() {
        h.update((v.size as u64).to_le_bytes());
    }
    for p in j.table() {
        h.update(p.to_bits().to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn payoff_scale(payoff: &Payoff, dims: [usize; 3]) -> (f64, f64) {
    match payoff {
        Payoff::Table(t) => {
            let finite: Vec<f64> = t
                .values()
                .iter()
                .copied()
                .filter(|v| v.is_finite())
                .collect();
            let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if finite.is_empty() {
                (1.0, -1.0)
            } else {
                ((hi - lo).max(1.0), lo - 1.0)
            }
        }
        Payoff::LogLoss(l) => {
            let k: usize = l.secret().iter().map(|s| dims[*s as usize]).product();
            ((k as f64).log2().max(1.0), -1.0)
        }
    }
}

pub(crate) fn run_in_pool<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> T + Send,
) -> Result<T> {
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))
            .map(|p| p.install(f)),
        None => Ok(f()),
    }
}

/// Best inner-bound tuple found within the rate budget.
pub fn search_inner(problem: &InnerSearchProblem, opts: &SearchOptions) -> Result<SearchOutcome> {
    if opts.restarts == 0 {
        return Err(Error::InvalidArgument("restarts must be at least 1".into()));
    }
    let dims = problem.side.input_dims();
    if dims[0] != problem.p_x.probs().len() {
        return Err(Error::InvalidArgument(
            "source pmf and side-information X alphabet differ".into(),
        ));
    }
    problem.payoff.check_dims(dims)?;
    let parts = problem.caps.parts()?;
    let (scale, worst) = payoff_scale(&problem.payoff, dims);
    let ctx = Context {
        problem,
        p_x: problem.p_x.probs().to_vec(),
        side: SideMatrix::new(&problem.side, dims),
        dims,
        parts,
        scale,
        worst,
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
                    .map(|k| Some(ctx.enumerated(k)).filter(|s| s.feasible))
                    .collect::<Vec<_>>(),
            );
        }
        out
    })?;

    // Rank feasible results; confirm each through the public evaluator.
    let mut ranked: Vec<(usize, Scored)> = results
        .into_iter()
        .enumerate()
        .filter_map(|(i, s)| s.map(|s| (i, s)))
        .collect();
    ranked.sort_by(|a, b| b.1.tuple.pi.total_cmp(&a.1.tuple.pi).then(a.0.cmp(&b.0)));

    let mut confirmed: Vec<SearchWitness> = Vec::new();
    for (origin, s) in ranked {
        if let Some(best) = confirmed.first() {
            if s.tuple.pi < best.tuple.pi - 1e-12 {
                break;
            }
        }
        let candidate = s.cand.to_inner()?;
        let tuple = match eval_inner_tuple(
            &candidate,
            &problem.p_x,
            &problem.side,
            &problem.payoff,
            CHECK_TOL,
        ) {
            Ok(t) => t,
            Err(Error::Constraints(_)) => continue,
            Err(e) => return Err(e),
        };
        let b = problem.budget;
        if tuple.forbidden
            || tuple.r0 > b.r0 + opts.rate_tol
            || tuple.r1 > b.r1 + opts.rate_tol
            || tuple.r2 > b.r2 + opts.rate_tol
        {
            continue;
        }
        let hash = joint_hash(candidate.joint());
        confirmed.push(SearchWitness {
            tuple,
            candidate,
            structured: s.cand,
            origin,
            hash,
        });
    }
    // Ties within 1e-12 go to the smallest hash.
    let top = confirmed
        .iter()
        .map(|w| w.tuple.pi)
        .fold(f64::NEG_INFINITY, f64::max);
    let best = confirmed
        .into_iter()
        .filter(|w| w.tuple.pi >= top - 1e-12)
        .min_by(|a, b| a.hash.cmp(&b.hash));
    Ok(match best {
        Some(w) => SearchOutcome::Found(Box::new(w)),
        None => SearchOutcome::Infeasible {
            reason: format!(
                "no candidate with finite payoff within rates (R0, R1, R2) <= ({}, {}, {}) under caps {:?}",
                problem.budget.r0, problem.budget.r1, problem.budget.r2, problem.caps
            ),
        },
    })
}

/// Smallest key rate at which the search reaches payoff `target`, by
/// bisection on the R0 budget. `None` if even the largest useful key rate
/// falls short.
pub fn min_key_rate_for_payoff(
    problem: &InnerSearchProblem,
    opts: &SearchOptions,
    target: f64,
    steps: usize,
) -> Result<Option<(f64, SearchWitness)>> {
    let nw: usize = problem.side.output_dims().iter().product();
    let mut hi = (nw as f64).log2();
    let reaches = |r0: f64| -> Result<Option<SearchWitness>> {
        let p = InnerSearchProblem {
            budget: RateBudget {
                r0,
                ..problem.budget
            },
            ..problem.clone()
        };
        Ok(match search_inner(&p, opts)? {
            SearchOutcome::Found(w) if w.tuple.pi >= target - 1e-12 => Some(*w),
            _ => None,
        })
    };
    let Some(mut best) = reaches(hi)? else {
        return Ok(None);
    };
    let mut lo = 0.0;
    if let Some(w) = reaches(0.0)? {
        return Ok(Some((0.0, w)));
    }
    for _ in 0..steps {
        let mid = 0.5 * (lo + hi);
        match reaches(mid)? {
            Some(w) => {
                hi = mid;
                best = w;
            }
            None => lo = mid,
        }
    }
    Ok(Some((hi, best)))
}
