//! Inner-bound candidates in factored form.
//!
//! `V1 = (U2, A, B, C)`, `U1 = (U2, A)`, `V2 = (U2, B)` with
//! `P(v1) = P(u2) P(a|u2) P(b|u2) P(c|u2,a,b)`. The determinism constraints
//! hold by construction and `A ⊥ B | U2` gives `U1 - U2 - V2`. Signals are
//! drawn as `P(x|v1) P(y2|v1) P(y3|v2)`, which gives both signal Markov
//! chains. The source marginal is matched by iterative proportional fitting
//! that alternates between the `X` marginal and the factored `V1` marginal.

use serde::{Deserialize, Serialize};

use super::{InnerCandidate, SideInfoSpec};
use crate::error::Result;
use crate::names::{U1, U2, V1, V2, X, Y2, Y3};
use crate::payoff::Payoff;
use crate::prob::{entropy_of, Alphabet, JointDistribution};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructuredCandidate {
    /// Sizes of X, Y2, Y3.
    pub dims: [usize; 3],
    /// Sizes of U2, A, B, C.
    pub parts: [usize; 4],
    pub p_u2: Vec<f64>,
    pub p_a: Vec<Vec<f64>>,
    pub p_b: Vec<Vec<f64>>,
    pub p_c: Vec<Vec<f64>>,
    pub kx: Vec<Vec<f64>>,
    pub ky2: Vec<Vec<f64>>,
    pub ky3: Vec<Vec<f64>>,
}

/// Side-information matrix `P(w | x, y2, y3)` over flattened indices.
#[derive(Clone, Debug)]
pub(crate) struct SideMatrix {
    pub nw: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl SideMatrix {
    pub fn new(side: &SideInfoSpec, dims: [usize; 3]) -> Self {
        let od = side.output_dims();
        let nw = od.iter().product();
        let mut rows = Vec::with_capacity(dims.iter().product());
        for x in 0..dims[0] {
            for y2 in 0..dims[1] {
                for y3 in 0..dims[2] {
                    let mut row = Vec::new();
                    for w in 0..nw {
                        let w3 = w % od[2];
                        let w2 = (w / od[2]) % od[1];
                        let w1 = w / (od[1] * od[2]);
                        let p = side.prob(x, y2, y3, [w1, w2, w3]);
                        if p > 0.0 {
                            row.push((w, p));
                        }
                    }
                    rows.push(row);
                }
            }
        }
        SideMatrix { nw, rows }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct FastTuple {
    pub r0: f64,
    pub r1: f64,
    pub r2: f64,
    pub pi: f64,
    pub forbidden_mass: f64,
}

fn normalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|p| *p /= s);
    }
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold(0, |b, (i, &p)| if p > v[b] { i } else { b })
}

fn vertex(k: usize, i: usize) -> Vec<f64> {
    let mut r = vec![0.0; k];
    r[i] = 1.0;
    r
}

impl StructuredCandidate {
    pub fn n_u1(&self) -> usize {
        self.parts[0] * self.parts[1]
    }

    pub fn n_v1(&self) -> usize {
        self.parts.iter().product()
    }

    pub fn n_v2(&self) -> usize {
        self.parts[0] * self.parts[2]
    }

    pub fn n_xyy(&self) -> usize {
        self.dims.iter().product()
    }

    /// (u2, a, b, c) of a V1 symbol.
    pub fn split_v1(&self, v1: usize) -> [usize; 4] {
        let [_, na, nb, nc] = self.parts;
        [
            v1 / (na * nb * nc),
            (v1 / (nb * nc)) % na,
            (v1 / nc) % nb,
            v1 % nc,
        ]
    }

    pub fn u1_of(&self, v1: usize) -> usize {
        let [u2, a, _, _] = self.split_v1(v1);
        u2 * self.parts[1] + a
    }

    pub fn v2_of(&self, v1: usize) -> usize {
        let [u2, _, b, _] = self.split_v1(v1);
        u2 * self.parts[2] + b
    }

    fn abc_index(&self, u2: usize, a: usize, b: usize) -> usize {
        (u2 * self.parts[1] + a) * self.parts[2] + b
    }

    pub fn v1_weights(&self) -> Vec<f64> {
        (0..self.n_v1())
            .map(|v| {
                let [u2, a, b, c] = self.split_v1(v);
                self.p_u2[u2]
                    * self.p_a[u2][a]
                    * self.p_b[u2][b]
                    * self.p_c[self.abc_index(u2, a, b)][c]
            })
            .collect()
    }

    /// Max abs deviation of the X marginal from `p_x`.
    pub fn source_error(&self, p_x: &[f64]) -> f64 {
        let w = self.v1_weights();
        let mut qx = vec![0.0; self.dims[0]];
        for (v, wv) in w.iter().enumerate() {
            for (x, k) in self.kx[v].iter().enumerate() {
                qx[x] += wv * k;
            }
        }
        qx.iter()
            .zip(p_x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// For every V1 symbol where no `x` avoids the forbidden cells, sharpens
    /// its signal rows to vertices that admit one, if such vertices exist.
    pub(crate) fn repair_signals(&mut self, payoff: &Payoff) {
        let Payoff::Table(t) = payoff else { return };
        let [nx, n2, n3] = self.dims;
        let ok = |x: usize, y2: usize, y3: usize| !t.is_forbidden((x * n2 + y2) * n3 + y3);
        for v in 0..self.n_v1() {
            let v2 = self.v2_of(v);
            let (r2, r3) = (&self.ky2[v], &self.ky3[v2]);
            let admits = (0..nx).any(|x| {
                (0..n2).all(|y2| r2[y2] == 0.0 || (0..n3).all(|y3| r3[y3] == 0.0 || ok(x, y2, y3)))
            });
            if admits {
                continue;
            }
            let y3 = argmax(r3);
            let y3 = if (0..nx).any(|x| (0..n2).any(|y2| ok(x, y2, y3))) {
                y3
            } else {
                match (0..n3).find(|&y3| (0..nx).any(|x| (0..n2).any(|y2| ok(x, y2, y3)))) {
                    Some(y3) => y3,
                    None => continue,
                }
            };
            self.ky3[v2] = vertex(n3, y3);
            let best = argmax(&self.ky2[v]);
            let y2 = (0..n2)
                .map(|i| (best + i) % n2)
                .find(|&y2| (0..nx).any(|x| ok(x, y2, y3)))
                .unwrap_or(best);
            self.ky2[v] = vertex(n2, y2);
        }
    }

    /// Restricts each `P(x|v1)` row to symbols whose every possible
    /// (y2, y3) pairing has a finite payoff. Rows with no such symbol are
    /// left untouched.
    pub(crate) fn mask_forbidden(&mut self, payoff: &Payoff) {
        let Payoff::Table(t) = payoff else { return };
        let [nx, n2, n3] = self.dims;
        for v in 0..self.n_v1() {
            let v2 = self.v2_of(v);
            let allowed: Vec<bool> = (0..nx)
                .map(|x| {
                    (0..n2).all(|y2| {
                        self.ky2[v][y2] == 0.0
                            || (0..n3).all(|y3| {
                                self.ky3[v2][y3] == 0.0 || !t.is_forbidden((x * n2 + y2) * n3 + y3)
                            })
                    })
                })
                .collect();
            let row = &mut self.kx[v];
            let mass: f64 = row
                .iter()
                .zip(&allowed)
                .filter(|(_, &ok)| ok)
                .map(|(p, _)| p)
                .sum();
            if allowed.iter().any(|&ok| ok) {
                if mass > 0.0 {
                    for (p, &ok) in row.iter_mut().zip(&allowed) {
                        if !ok {
                            *p = 0.0;
                        }
                    }
                } else {
                    let k = allowed.iter().filter(|&&ok| ok).count() as f64;
                    for (p, &ok) in row.iter_mut().zip(&allowed) {
                        *p = if ok { 1.0 / k } else { 0.0 };
                    }
                }
                normalize(row);
            }
        }
    }

    /// Fits the X marginal to `p_x` while keeping the factored V1 marginal.
    /// Returns the remaining max abs deviation.
    pub(crate) fn fit_source(&mut self, p_x: &[f64], max_iter: usize, tol: f64) -> f64 {
        let nx = self.dims[0];
        let nv = self.n_v1();
        let w = self.v1_weights();
        let mut q: Vec<f64> = (0..nv * nx)
            .map(|i| w[i / nx] * self.kx[i / nx][i % nx])
            .collect();
        let mut err = f64::INFINITY;
        for _ in 0..max_iter {
            let mut qx = vec![0.0; nx];
            for (i, p) in q.iter().enumerate() {
                qx[i % nx] += p;
            }
            err = qx
                .iter()
                .zip(p_x)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if err <= tol {
                break;
            }
            for x in 0..nx {
                if qx[x] <= 0.0 {
                    if p_x[x] > 0.0 {
                        return f64::INFINITY;
                    }
                    continue;
                }
                let s = p_x[x] / qx[x];
                for v in 0..nv {
                    q[v * nx + x] *= s;
                }
            }
            let r: Vec<f64> = (0..nv)
                .map(|v| q[v * nx..(v + 1) * nx].iter().sum())
                .collect();
            let s = self.factored_projection(&r);
            for v in 0..nv {
                let row = &mut q[v * nx..(v + 1) * nx];
                if r[v] > 0.0 {
                    let f = s[v] / r[v];
                    row.iter_mut().for_each(|p| *p *= f);
                } else if s[v] > 0.0 {
                    for (p, k) in row.iter_mut().zip(&self.kx[v]) {
                        *p = s[v] * k;
                    }
                }
            }
        }
        self.write_back(&q);
        err.min(self.source_error(p_x))
    }

    /// Marginals of `r` recombined as P(u2) P(a|u2) P(b|u2) P(c|u2,a,b).
    fn factored_projection(&self, r: &[f64]) -> Vec<f64> {
        let [nu2, na, nb, _] = self.parts;
        let mut m_u2 = vec![0.0; nu2];
        let mut m_ua = vec![0.0; nu2 * na];
        let mut m_ub = vec![0.0; nu2 * nb];
        let mut m_uab = vec![0.0; nu2 * na * nb];
        for (v, &p) in r.iter().enumerate() {
            let [u2, a, b, _] = self.split_v1(v);
            m_u2[u2] += p;
            m_ua[u2 * na + a] += p;
            m_ub[u2 * nb + b] += p;
            m_uab[self.abc_index(u2, a, b)] += p;
        }
        (0..r.len())
            .map(|v| {
                let [u2, a, b, c] = self.split_v1(v);
                if m_u2[u2] <= 0.0 {
                    return 0.0;
                }
                let ab = m_ua[u2 * na + a] * m_ub[u2 * nb + b] / m_u2[u2];
                let uab = m_uab[self.abc_index(u2, a, b)];
                let pc = if uab > 0.0 {
                    r[v] / uab
                } else {
                    self.p_c[self.abc_index(u2, a, b)][c]
                };
                ab * pc
            })
            .collect()
    }

    fn write_back(&mut self, q: &[f64]) {
        let nx = self.dims[0];
        let [nu2, na, nb, nc] = self.parts;
        let r: Vec<f64> = (0..self.n_v1())
            .map(|v| q[v * nx..(v + 1) * nx].iter().sum())
            .collect();
        let mut m_u2 = vec![0.0; nu2];
        let mut m_ua = vec![vec![0.0; na]; nu2];
        let mut m_ub = vec![vec![0.0; nb]; nu2];
        let mut m_c = vec![vec![0.0; nc]; nu2 * na * nb];
        for (v, &p) in r.iter().enumerate() {
            let [u2, a, b, c] = self.split_v1(v);
            m_u2[u2] += p;
            m_ua[u2][a] += p;
            m_ub[u2][b] += p;
            m_c[self.abc_index(u2, a, b)][c] += p;
        }
        let total: f64 = m_u2.iter().sum();
        if total <= 0.0 {
            return;
        }
        self.p_u2 = m_u2.iter().map(|p| p / total).collect();
        for u2 in 0..nu2 {
            if m_u2[u2] > 0.0 {
                self.p_a[u2] = m_ua[u2].iter().map(|p| p / m_u2[u2]).collect();
                self.p_b[u2] = m_ub[u2].iter().map(|p| p / m_u2[u2]).collect();
            }
        }
        for (i, row) in m_c.into_iter().enumerate() {
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                self.p_c[i] = row.iter().map(|p| p / s).collect();
            }
        }
        for v in 0..self.n_v1() {
            if r[v] > 0.0 {
                self.kx[v] = q[v * nx..(v + 1) * nx].iter().map(|p| p / r[v]).collect();
            }
        }
    }

    /// P(v1, xyy) as a dense vector, v1-major.
    pub(crate) fn joint_v1_xyy(&self) -> Vec<f64> {
        let [nx, n2, n3] = self.dims;
        let nxyy = nx * n2 * n3;
        let w = self.v1_weights();
        let mut out = vec![0.0; self.n_v1() * nxyy];
        for (v, &wv) in w.iter().enumerate() {
            if wv == 0.0 {
                continue;
            }
            let v2 = self.v2_of(v);
            let dst = &mut out[v * nxyy..(v + 1) * nxyy];
            for x in 0..nx {
                let px = wv * self.kx[v][x];
                if px == 0.0 {
                    continue;
                }
                for y2 in 0..n2 {
                    let p2 = px * self.ky2[v][y2];
                    if p2 == 0.0 {
                        continue;
                    }
                    for y3 in 0..n3 {
                        dst[(x * n2 + y2) * n3 + y3] = p2 * self.ky3[v2][y3];
                    }
                }
            }
        }
        out
    }

    /// Rates, payoff and forbidden mass without building named tables.
    pub(crate) fn fast_tuple(&self, side: &SideMatrix, payoff: &Payoff) -> FastTuple {
        let [nx, n2, n3] = self.dims;
        let nxyy = nx * n2 * n3;
        let nv1 = self.n_v1();
        let joint = self.joint_v1_xyy();

        let mut q_v1x = vec![0.0; nv1 * nx];
        let mut q_v2x = vec![0.0; self.n_v2() * nx];
        let mut q_u1xyy = vec![0.0; self.n_u1() * nxyy];
        let mut q_xyy = vec![0.0; nxyy];
        let mut t_v1w = vec![0.0; nv1 * side.nw];
        let mut t_u1w = vec![0.0; self.n_u1() * side.nw];
        let mut w_v1 = vec![0.0; nv1];
        let mut w_u1 = vec![0.0; self.n_u1()];
        for v in 0..nv1 {
            let (u1, v2) = (self.u1_of(v), self.v2_of(v));
            for (i, &p) in joint[v * nxyy..(v + 1) * nxyy].iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let x = i / (n2 * n3);
                q_v1x[v * nx + x] += p;
                q_v2x[v2 * nx + x] += p;
                q_u1xyy[u1 * nxyy + i] += p;
                q_xyy[i] += p;
                w_v1[v] += p;
                w_u1[u1] += p;
                for &(w, pw) in &side.rows[i] {
                    t_v1w[v * side.nw + w] += p * pw;
                    t_u1w[u1 * side.nw + w] += p * pw;
                }
            }
        }
        let mut q_x = vec![0.0; nx];
        for (i, p) in q_v1x.iter().enumerate() {
            q_x[i % nx] += p;
        }
        let mut w_v2 = vec![0.0; self.n_v2()];
        for (i, p) in q_v2x.iter().enumerate() {
            w_v2[i / nx] += p;
        }
        let hx = entropy_of(&q_x);
        let r1 = (hx + entropy_of(&w_v1) - entropy_of(&q_v1x)).max(0.0);
        let r2 = (hx + entropy_of(&w_v2) - entropy_of(&q_v2x)).max(0.0);
        let r0 = (entropy_of(&t_u1w) - entropy_of(&w_u1) - entropy_of(&t_v1w) + entropy_of(&w_v1))
            .max(0.0);

        let forbidden_mass = match payoff {
            Payoff::Table(t) => q_xyy
                .iter()
                .enumerate()
                .filter(|(i, _)| t.is_forbidden(*i))
                .map(|(_, p)| p)
                .sum(),
            Payoff::LogLoss(_) => 0.0,
        };
        let mut pi = 0.0;
        for (u1, slice) in q_u1xyy.chunks_exact(nxyy).enumerate() {
            let pu = w_u1[u1];
            if pu <= 0.0 {
                continue;
            }
            let post: Vec<f64> = slice.iter().map(|p| p / pu).collect();
            pi += pu * payoff.respond(&post, self.dims).value;
        }
        if forbidden_mass > 0.0 {
            pi = f64::NEG_INFINITY;
        }
        FastTuple {
            r0,
            r1,
            r2,
            pi,
            forbidden_mass,
        }
    }

    /// Component-level joint over (X, Y2, Y3, U2, A, B, C); roles are
    /// `U1 = {U2, A}`, `V2 = {U2, B}`, `V1 = {U2, A, B, C}`.
    pub fn component_joint(&self) -> Result<JointDistribution> {
        let [nx, n2, n3] = self.dims;
        let [nu2, na, nb, nc] = self.parts;
        let vars = vec![
            Alphabet::new(X, nx)?,
            Alphabet::new(Y2, n2)?,
            Alphabet::new(Y3, n3)?,
            Alphabet::new(U2, nu2)?,
            Alphabet::new(COMPONENT_A, na)?,
            Alphabet::new(COMPONENT_B, nb)?,
            Alphabet::new(COMPONENT_C, nc)?,
        ];
        let joint = self.joint_v1_xyy();
        let nxyy = nx * n2 * n3;
        let nv1 = self.n_v1();
        let mut table = vec![0.0; nxyy * nv1];
        for v in 0..nv1 {
            for i in 0..nxyy {
                table[i * nv1 + v] = joint[v * nxyy + i];
            }
        }
        JointDistribution::from_weights(vars, table)
    }

    /// Atomic candidate over (X, Y2, Y3, U1, U2, V1, V2), unused auxiliary
    /// symbols dropped.
    pub fn to_inner(&self) -> Result<InnerCandidate> {
        let [nx, n2, n3] = self.dims;
        let nxyy = nx * n2 * n3;
        let joint = self.joint_v1_xyy();
        let nv1 = self.n_v1();
        let used_v1: Vec<bool> = (0..nv1)
            .map(|v| joint[v * nxyy..(v + 1) * nxyy].iter().any(|p| *p > 0.0))
            .collect();
        let index = |used: Vec<bool>| -> (Vec<usize>, Vec<usize>) {
            let mut map = vec![usize::MAX; used.len()];
            let mut orig = Vec::new();
            for (s, u) in used.into_iter().enumerate() {
                if u {
                    map[s] = orig.len();
                    orig.push(s);
                }
            }
            (map, orig)
        };
        let mut used_u1 = vec![false; self.n_u1()];
        let mut used_u2 = vec![false; self.parts[0]];
        let mut used_v2 = vec![false; self.n_v2()];
        for v in (0..nv1).filter(|&v| used_v1[v]) {
            used_u1[self.u1_of(v)] = true;
            used_u2[self.split_v1(v)[0]] = true;
            used_v2[self.v2_of(v)] = true;
        }
        let (m_v1, o_v1) = index(used_v1);
        let (m_u1, o_u1) = index(used_u1);
        let (m_u2, o_u2) = index(used_u2);
        let (m_v2, o_v2) = index(used_v2);

        let [_, na, nb, _] = self.parts;
        let lab = |n: &str, o: &[usize], f: &dyn Fn(usize) -> String| {
            Alphabet::with_labels(n, o.iter().map(|&s| f(s)))
        };
        let vars = vec![
            Alphabet::new(X, nx)?,
            Alphabet::new(Y2, n2)?,
            Alphabet::new(Y3, n3)?,
            lab(U1, &o_u1, &|s| format!("{}.{}", s / na, s % na))?,
            lab(U2, &o_u2, &|s| s.to_string())?,
            lab(V1, &o_v1, &|s| {
                let [u2, a, b, c] = self.split_v1(s);
                format!("{u2}.{a}.{b}.{c}")
            })?,
            lab(V2, &o_v2, &|s| format!("{}.{}", s / nb, s % nb))?,
        ];
        let sizes = [nx, n2, n3, o_u1.len(), o_u2.len(), o_v1.len(), o_v2.len()];
        let mut table = vec![0.0; sizes.iter().product()];
        for v in (0..nv1).filter(|&v| m_v1[v] != usize::MAX) {
            let digits_aux = [
                m_u1[self.u1_of(v)],
                m_u2[self.split_v1(v)[0]],
                m_v1[v],
                m_v2[self.v2_of(v)],
            ];
            for i in 0..nxyy {
                let p = joint[v * nxyy + i];
                if p == 0.0 {
                    continue;
                }
                let digits = [
                    i / (n2 * n3),
                    (i / n3) % n2,
                    i % n3,
                    digits_aux[0],
                    digits_aux[1],
                    digits_aux[2],
                    digits_aux[3],
                ];
                let flat = digits
                    .iter()
                    .zip(&sizes)
                    .fold(0, |acc, (&d, &s)| acc * s + d);
                table[flat] += p;
            }
        }
        InnerCandidate::new(JointDistribution::from_weights(vars, table)?)
    }
}

pub(crate) const COMPONENT_A: &str = "U1_part";
pub(crate) const COMPONENT_B: &str = "V2_part";
pub(crate) const COMPONENT_C: &str = "V1_part";
