use rayon::prelude::*;
use serde::Serialize;

use super::system::SystemTable;
use crate::error::{Error, Result};
use crate::payoff::{Action, LogLossPayoff, Payoff};
use crate::prob::{entropy_of, DEFAULT_CELL_CAP};
use crate::rng::{self, sample_index};

/// One `(k, x^n)` term consistent with a message.
struct Item {
    weight: f64,
    xn: Vec<usize>,
    /// `P(y2, y3 | v1_t, v2_t)` per letter over flattened `(y2, y3)`.
    signal: Vec<Vec<f64>>,
    /// `P(w | x_t, v1_t, v2_t)` per letter.
    pw: Vec<Vec<f64>>,
}

impl SystemTable {
    fn items(&self, m: usize) -> Vec<Item> {
        let [_, n2, n3] = self.dims();
        let laws = &self.scheme.laws;
        let cb = &self.scheme.codebooks;
        let mut out = Vec::new();
        for k in 0..self.key_count() {
            let v1 = cb.v1_word(m, k);
            let v2 = cb.v2_word(m, k);
            let signal: Vec<Vec<f64>> = (0..self.n())
                .map(|t| {
                    let (r2, r3) = (&laws.y2_given_v1[v1[t]], &laws.y3_given_v2[v2[t]]);
                    (0..n2 * n3).map(|i| r2[i / n3] * r3[i % n3]).collect()
                })
                .collect();
            for xi in 0..self.n_xn {
                let weight = self.encoder_joint(k, m, xi);
                if weight == 0.0 {
                    continue;
                }
                let xn = self.xn_digits(xi);
                let pw = (0..self.n())
                    .map(|t| {
                        let mut row = vec![0.0; self.nw];
                        for (i, &q) in signal[t].iter().enumerate() {
                            if q == 0.0 {
                                continue;
                            }
                            let side = &self.side_rows[xn[t] * n2 * n3 + i];
                            for (r, s) in row.iter_mut().zip(side) {
                                *r += q * s;
                            }
                        }
                        row
                    })
                    .collect();
                out.push(Item {
                    weight,
                    xn,
                    signal: signal.clone(),
                    pw,
                });
            }
        }
        out
    }

    /// Unnormalized posterior of letter `t` over flattened `(x, y2, y3)`,
    /// given per-item likelihoods of the observed history.
    fn letter_posterior(&self, items: &[Item], lik: &[f64], t: usize) -> Vec<f64> {
        let [_, n2, n3] = self.dims();
        let mut post = vec![0.0; self.dims().iter().product()];
        for (it, &l) in items.iter().zip(lik) {
            if l == 0.0 {
                continue;
            }
            let base = it.xn[t] * n2 * n3;
            for (i, q) in it.signal[t].iter().enumerate() {
                post[base + i] += l * q;
            }
        }
        post
    }
}

/// Posterior of letter `t` (1-based) given `(M1, W^{t-1})`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HistoryPosterior {
    pub message: usize,
    pub history: Vec<usize>,
    /// `P(M1 = message, W^{t-1} = history)`.
    pub mass: f64,
    pub posterior: Vec<f64>,
}

/// Walks every positive-probability history depth first, updating the
/// per-item likelihoods one letter at a time.
fn walk(table: &SystemTable, m: usize, visit: &mut dyn FnMut(&[usize], f64, &[f64])) {
    let items = table.items(m);
    if items.is_empty() {
        return;
    }
    let lik: Vec<f64> = items.iter().map(|i| i.weight).collect();
    let mut history = Vec::with_capacity(table.n());
    descend(table, &items, lik, &mut history, visit);
}

fn descend(
    table: &SystemTable,
    items: &[Item],
    lik: Vec<f64>,
    history: &mut Vec<usize>,
    visit: &mut dyn FnMut(&[usize], f64, &[f64]),
) {
    let t = history.len();
    let post = table.letter_posterior(items, &lik, t);
    let mass: f64 = post.iter().sum();
    if mass <= 0.0 {
        return;
    }
    visit(history, mass, &post);
    if t + 1 == table.n() {
        return;
    }
    for w in 0..table.nw {
        let next: Vec<f64> = items
            .iter()
            .zip(&lik)
            .map(|(it, l)| l * it.pw[t][w])
            .collect();
        if next.iter().all(|&l| l == 0.0) {
            continue;
        }
        history.push(w);
        descend(table, items, next, history, visit);
        history.pop();
    }
}

/// Every adversary posterior of the exact table, in message then
/// depth-first history order.
pub fn posteriors(table: &SystemTable) -> Vec<HistoryPosterior> {
    let mut out = Vec::new();
    for m in 0..table.message_count() {
        walk(table, m, &mut |h, mass, post| {
            out.push(HistoryPosterior {
                message: m,
                history: h.to_vec(),
                mass,
                posterior: post.iter().map(|p| p / mass).collect(),
            })
        });
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimPayoff {
    /// π̄: time-averaged expected payoff under the best causal adversary.
    #[serde(with = "crate::bounds::ext_real")]
    pub value: f64,
    /// Expected payoff at each letter.
    pub per_letter: Vec<f64>,
    pub forbidden: bool,
}

/// Exact π̄ against the adversary that sees `(M1, M2, W^{t-1})` at letter `t`.
pub fn simulate_payoff(table: &SystemTable, payoff: &Payoff) -> Result<SimPayoff> {
    let dims = table.dims();
    payoff.check_dims(dims)?;
    let n = table.n();
    let parts: Vec<(Vec<f64>, bool)> = (0..table.message_count())
        .into_par_iter()
        .map(|m| {
            let mut per = vec![0.0; n];
            let mut forbidden = false;
            walk(table, m, &mut |h, mass, post| {
                let p: Vec<f64> = post.iter().map(|q| q / mass).collect();
                let r = payoff.respond(&p, dims);
                forbidden |= r.forbidden;
                if !r.forbidden {
                    per[h.len()] += mass * r.value;
                }
            });
            (per, forbidden)
        })
        .collect();
    let mut per_letter = vec![0.0; n];
    let mut forbidden = false;
    for (per, f) in parts {
        forbidden |= f;
        for (a, b) in per_letter.iter_mut().zip(per) {
            *a += b;
        }
    }
    let value = if forbidden {
        f64::NEG_INFINITY
    } else {
        per_letter.iter().sum::<f64>() / n as f64
    };
    Ok(SimPayoff {
        value,
        per_letter,
        forbidden,
    })
}

/// Index of `(x, y2, y3)` in the secret alphabet.
fn secret_map(secret: &LogLossPayoff, dims: [usize; 3]) -> (Vec<usize>, usize) {
    let cells: usize = dims.iter().product();
    let mut onehot = vec![0.0; cells];
    let mut map = Vec::with_capacity(cells);
    let mut ns = 0;
    for i in 0..cells {
        onehot[i] = 1.0;
        let proj = secret.project(&onehot, dims);
        ns = proj.len();
        map.push(proj.iter().position(|&p| p == 1.0).unwrap());
        onehot[i] = 0.0;
    }
    (map, ns)
}

/// `(1/n) H(S^n | M1, M2)` in bits.
pub fn empirical_equivocation(table: &SystemTable, secret: &LogLossPayoff) -> Result<f64> {
    let dims = table.dims();
    let n = table.n();
    let (smap, ns) = secret_map(secret, dims);
    let nsn = ns
        .checked_pow(n as u32)
        .filter(|&c| c <= DEFAULT_CELL_CAP)
        .ok_or(Error::CellCap {
            required: (ns as u128).pow(n as u32),
            cap: DEFAULT_CELL_CAP,
        })?;
    let [_, n2, n3] = dims;
    let total: f64 = (0..table.message_count())
        .into_par_iter()
        .map(|m| {
            let mut dist = vec![0.0; nsn];
            for it in table.items(m) {
                // Enumerate the (y2, y3) blocks with positive probability.
                let mut acc: Vec<(usize, f64)> = vec![(0, it.weight)];
                for t in 0..n {
                    let mut next = Vec::new();
                    for &(s, p) in &acc {
                        for (i, &q) in it.signal[t].iter().enumerate() {
                            if q > 0.0 {
                                next.push((s * ns + smap[it.xn[t] * n2 * n3 + i], p * q));
                            }
                        }
                    }
                    acc = next;
                }
                for (s, p) in acc {
                    dist[s] += p;
                }
            }
            let mass: f64 = dist.iter().sum();
            if mass <= 0.0 {
                return 0.0;
            }
            mass * entropy_of(&dist.iter().map(|p| p / mass).collect::<Vec<_>>())
        })
        .collect::<Vec<f64>>()
        .into_iter()
        .sum();
    Ok(total / n as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McEstimate {
    #[serde(with = "crate::bounds::ext_real")]
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
    pub forbidden: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub sample: usize,
    /// 1-based letter index.
    pub t: usize,
    /// Side-information symbols seen before letter `t`.
    pub history: Vec<usize>,
    pub posterior_entropy: f64,
    pub action: Action,
    #[serde(with = "crate::bounds::ext_real")]
    pub payoff: f64,
}

struct SampleOut {
    value: f64,
    forbidden: bool,
    trace: Vec<TraceRow>,
}

fn run_mc(
    table: &SystemTable,
    payoff: &Payoff,
    samples: usize,
    seed: u64,
    keep_trace: bool,
) -> Result<Vec<SampleOut>> {
    if samples < 2 {
        return Err(Error::InvalidArgument(
            "at least two samples are needed".into(),
        ));
    }
    let dims = table.dims();
    payoff.check_dims(dims)?;
    let [_, n2, n3] = dims;
    let n = table.n();
    let nm = table.message_count();
    let n_xn = table.n_xn;
    // Cumulative law of (k, m, x^n) for inversion sampling.
    let mut cdf = Vec::with_capacity(table.enc.len());
    let mut acc = 0.0;
    for &p in &table.enc {
        acc += p;
        cdf.push(acc);
    }
    Ok((0..samples)
        .into_par_iter()
        .map(|s| {
            let mut r = rng::stream(seed, "mc/sample", s as u64);
            let u = rand::Rng::random::<f64>(&mut r) * acc;
            let cell = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
            let m = (cell / n_xn) % nm;
            let xn = table.xn_digits(cell % n_xn);
            let items = table.items(m);
            let k = cell / (n_xn * nm);
            let cb = &table.scheme.codebooks;
            let (v1, v2) = (cb.v1_word(m, k), cb.v2_word(m, k));
            let laws = &table.scheme.laws;
            let mut lik: Vec<f64> = items.iter().map(|i| i.weight).collect();
            let mut history = Vec::with_capacity(n);
            let mut total = 0.0;
            let mut forbidden = false;
            let mut trace = Vec::new();
            for t in 0..n {
                let post = table.letter_posterior(&items, &lik, t);
                let mass: f64 = post.iter().sum();
                let post: Vec<f64> = post.iter().map(|p| p / mass).collect();
                let br = payoff.respond(&post, dims);
                forbidden |= br.forbidden;
                total += br.value;
                if keep_trace {
                    trace.push(TraceRow {
                        sample: s,
                        t: t + 1,
                        history: history.clone(),
                        posterior_entropy: entropy_of(&post),
                        action: br.action,
                        payoff: br.value,
                    });
                }
                let y2 = sample_index(&mut r, &laws.y2_given_v1[v1[t]]);
                let y3 = sample_index(&mut r, &laws.y3_given_v2[v2[t]]);
                let w = sample_index(&mut r, &table.side_rows[(xn[t] * n2 + y2) * n3 + y3]);
                for (l, it) in lik.iter_mut().zip(&items) {
                    *l *= it.pw[t][w];
                }
                history.push(w);
            }
            SampleOut {
                value: if forbidden {
                    f64::NEG_INFINITY
                } else {
                    total / n as f64
                },
                forbidden,
                trace,
            }
        })
        .collect())
}

/// Monte Carlo estimate of π̄. Histories are sampled; each adversary
/// posterior is still computed exactly from the table.
pub fn mc_estimate(
    table: &SystemTable,
    payoff: &Payoff,
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    let outs = run_mc(table, payoff, samples, seed, false)?;
    let forbidden = outs.iter().any(|o| o.forbidden);
    if forbidden {
        return Ok(McEstimate {
            mean: f64::NEG_INFINITY,
            std_error: 0.0,
            samples,
            forbidden,
        });
    }
    let nf = samples as f64;
    let mean = outs.iter().map(|o| o.value).sum::<f64>() / nf;
    let var = outs.iter().map(|o| (o.value - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    Ok(McEstimate {
        mean,
        std_error: (var / nf).sqrt(),
        samples,
        forbidden,
    })
}

/// Per-letter trace of the Monte Carlo run with the same seed.
pub fn mc_trace(
    table: &SystemTable,
    payoff: &Payoff,
    samples: usize,
    seed: u64,
) -> Result<Vec<TraceRow>> {
    Ok(run_mc(table, payoff, samples, seed, true)?
        .into_iter()
        .flat_map(|o| o.trace)
        .collect())
}
