use serde::Serialize;

use super::{Scheme, SchemeSpec};
use crate::error::{Error, Result};
use crate::prob::joint::{check_cells, unflatten};
use crate::prob::{Alphabet, JointDistribution, DEFAULT_CELL_CAP};

/// Exact law of one system run for fixed codebooks, kept in factored form.
///
/// `P(k, m, x^n)` is stored densely. Given `(m, k)` the actions are
/// memoryless through the codewords, and `W_t` depends only on the letter-`t`
/// signals, so the full joint over
/// `(K, Ma, Mb, Mc, Md, X^n, Y2^n, Y3^n, W^n)` follows by products;
/// [`SystemTable::to_joint`] materializes it when it fits.
#[derive(Clone, Debug)]
pub struct SystemTable {
    pub scheme: Scheme,
    /// `enc[(k * |M1| + m) * |X|^n + x^n]`
    pub(crate) enc: Vec<f64>,
    pub(crate) n_xn: usize,
    /// `P(w | x, y2, y3)` rows over flattened `(x, y2, y3)`.
    pub(crate) side_rows: Vec<Vec<f64>>,
    pub(crate) nw: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SystemAudit {
    /// Max abs deviation of `P(k)` from `2^-b0`.
    pub key_uniformity: f64,
    /// Max abs deviation of `P(k, x^n)` from `P(k) prod P_X(x_t)`.
    pub key_source_independence: f64,
    /// Max abs deviation of the `X^n` marginal from the i.i.d. law.
    pub source_marginal: f64,
    pub m1_bits: u32,
    pub m2_bits: u32,
    /// `I(X^n; M2, Y2^n | M1, K)` in bits.
    pub markov_node2: f64,
    /// `I(X^n, M1, Y2^n; Y3^n | M2, K)` in bits.
    pub markov_node3: f64,
    pub passed: bool,
}

/// Builds the exact system law with the default cell cap.
pub fn run_system_exact(spec: &SchemeSpec) -> Result<SystemTable> {
    run_system_exact_with_cap(spec, DEFAULT_CELL_CAP)
}

pub fn run_system_exact_with_cap(spec: &SchemeSpec, cap: usize) -> Result<SystemTable> {
    SystemTable::from_scheme(Scheme::new(spec.clone())?, cap)
}

impl SystemTable {
    /// Exact law for an already drawn scheme, e.g. one with edited codebooks.
    pub fn from_scheme(scheme: Scheme, cap: usize) -> Result<SystemTable> {
        if scheme.codebooks.bits != scheme.spec.bits || scheme.codebooks.n != scheme.spec.n {
            return Err(Error::InvalidArgument(
                "codebooks do not match the spec".into(),
            ));
        }
        build_table(scheme.spec.clone(), scheme, cap)
    }
}

fn build_table(spec: SchemeSpec, scheme: Scheme, cap: usize) -> Result<SystemTable> {
    let n = spec.n;
    let nx = scheme.laws.dims[0];
    let n_xn = check_cells(std::iter::repeat_n(nx, n), cap)?;
    let nk = scheme.codebooks.key_count();
    let nm = scheme.codebooks.message_count();
    check_cells([nk, nm, n_xn], cap)?;

    let pk = 1.0 / nk as f64;
    let px = spec.p_x.probs();
    let mut enc = vec![0.0; nk * nm * n_xn];
    let mut xn = vec![0usize; n];
    let sizes = vec![nx; n];
    for xi in 0..n_xn {
        unflatten(xi, &sizes, &mut xn);
        let p: f64 = xn.iter().map(|&x| px[x]).product();
        if p == 0.0 {
            continue;
        }
        for k in 0..nk {
            let dist = scheme.encoder_distribution(&xn, k)?;
            for (m, q) in dist.into_iter().enumerate() {
                enc[(k * nm + m) * n_xn + xi] = pk * p * q;
            }
        }
    }

    let [_, n2, n3] = scheme.laws.dims;
    let od = spec.side.output_dims();
    let nw = od.iter().product();
    let mut side_rows = Vec::with_capacity(nx * n2 * n3);
    for x in 0..nx {
        for y2 in 0..n2 {
            for y3 in 0..n3 {
                side_rows.push(
                    (0..nw)
                        .map(|w| {
                            spec.side.prob(
                                x,
                                y2,
                                y3,
                                [w / (od[1] * od[2]), (w / od[2]) % od[1], w % od[2]],
                            )
                        })
                        .collect(),
                );
            }
        }
    }
    Ok(SystemTable {
        scheme,
        enc,
        n_xn,
        side_rows,
        nw,
    })
}

/// `sum p log2 1/p` over an unnormalized slice.
fn plogp(v: &[f64]) -> f64 {
    v.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.log2()).sum()
}

/// `mass * I(row; col)` for a row-major table of total `mass`.
fn scaled_mi(joint: &[f64], cols: usize, mass: f64) -> f64 {
    let rows: Vec<f64> = joint.chunks_exact(cols).map(|r| r.iter().sum()).collect();
    let mut col = vec![0.0; cols];
    for (i, p) in joint.iter().enumerate() {
        col[i % cols] += p;
    }
    plogp(&rows) + plogp(&col) - plogp(joint) + mass * mass.log2()
}

impl SystemTable {
    pub fn n(&self) -> usize {
        self.scheme.spec.n
    }

    pub fn dims(&self) -> [usize; 3] {
        self.scheme.laws.dims
    }

    pub fn key_count(&self) -> usize {
        self.scheme.codebooks.key_count()
    }

    pub fn message_count(&self) -> usize {
        self.scheme.codebooks.message_count()
    }

    pub fn side_alphabet_size(&self) -> usize {
        self.nw
    }

    /// `P(k, m, x^n)` with `x^n` flattened row-major.
    pub fn encoder_joint(&self, k: usize, m: usize, xn: usize) -> f64 {
        self.enc[(k * self.message_count() + m) * self.n_xn + xn]
    }

    pub(crate) fn xn_digits(&self, xi: usize) -> Vec<usize> {
        let mut d = vec![0; self.n()];
        unflatten(xi, &vec![self.dims()[0]; self.n()], &mut d);
        d
    }

    /// `P(y2^n | m, k)` or `P(y3^n | m, k)` over flattened blocks.
    fn action_block(&self, m: usize, k: usize, node3: bool) -> Vec<f64> {
        let cb = &self.scheme.codebooks;
        let laws = &self.scheme.laws;
        let (word, rows, ny) = if node3 {
            (cb.v2_word(m, k), &laws.y3_given_v2, laws.dims[2])
        } else {
            (cb.v1_word(m, k), &laws.y2_given_v1, laws.dims[1])
        };
        let mut out = vec![1.0];
        for &v in word {
            out = out
                .iter()
                .flat_map(|p| rows[v].iter().map(move |q| p * q))
                .collect();
        }
        debug_assert_eq!(out.len(), ny.pow(self.n() as u32));
        out
    }

    /// Checks key and source laws, message sizes and both Markov chains.
    pub fn audit(&self, tol: f64) -> SystemAudit {
        let nk = self.key_count();
        let nm = self.message_count();
        let nxn = self.n_xn;
        let px = self.scheme.spec.p_x.probs();
        let iid: Vec<f64> = (0..nxn)
            .map(|xi| self.xn_digits(xi).iter().map(|&x| px[x]).product())
            .collect();
        let mut p_kx = vec![0.0; nk * nxn];
        for k in 0..nk {
            for m in 0..nm {
                for xi in 0..nxn {
                    p_kx[k * nxn + xi] += self.encoder_joint(k, m, xi);
                }
            }
        }
        let p_k: Vec<f64> = p_kx.chunks_exact(nxn).map(|r| r.iter().sum()).collect();
        let key_uniformity = p_k
            .iter()
            .map(|p| (p - 1.0 / nk as f64).abs())
            .fold(0.0, f64::max);
        let key_source_independence = (0..nk * nxn)
            .map(|i| (p_kx[i] - p_k[i / nxn] * iid[i % nxn]).abs())
            .fold(0.0, f64::max);
        let source_marginal = (0..nxn)
            .map(|xi| ((0..nk).map(|k| p_kx[k * nxn + xi]).sum::<f64>() - iid[xi]).abs())
            .fold(0.0, f64::max);

        // I(X^n; Y2^n | M1, K): per (m, k), the joint of (x^n, y2^n).
        let mut markov_node2 = 0.0;
        for k in 0..nk {
            for m in 0..nm {
                let px_mk = &self.enc[(k * nm + m) * nxn..(k * nm + m + 1) * nxn];
                let mass: f64 = px_mk.iter().sum();
                if mass <= 0.0 {
                    continue;
                }
                let y2 = self.action_block(m, k, false);
                let joint: Vec<f64> = px_mk
                    .iter()
                    .flat_map(|p| y2.iter().map(move |q| p * q))
                    .collect();
                markov_node2 += scaled_mi(&joint, y2.len(), mass);
            }
        }

        // I(X^n, M1, Y2^n; Y3^n | M2, K): per (m2, k), rows over (m1 in m2, x^n, y2^n).
        let cb = &self.scheme.codebooks;
        let n_m2 = 1usize << cb.bits.m2_bits();
        let per_m2 = nm / n_m2;
        let mut markov_node3 = 0.0;
        for k in 0..nk {
            for m2 in 0..n_m2 {
                let ms: Vec<usize> = (m2 * per_m2..(m2 + 1) * per_m2).collect();
                debug_assert!(ms.iter().all(|&m| cb.m2_of(m) == m2));
                let mut left = Vec::new();
                for &m in &ms {
                    let y2 = self.action_block(m, k, false);
                    for xi in 0..nxn {
                        let p = self.encoder_joint(k, m, xi);
                        left.extend(y2.iter().map(|q| p * q));
                    }
                }
                let mass: f64 = left.iter().sum();
                if mass <= 0.0 {
                    continue;
                }
                let y3 = self.action_block(ms[0], k, true);
                let joint: Vec<f64> = left
                    .iter()
                    .flat_map(|p| y3.iter().map(move |q| p * q))
                    .collect();
                markov_node3 += scaled_mi(&joint, y3.len(), mass);
            }
        }
        let markov_node2 = markov_node2.max(0.0);
        let markov_node3 = markov_node3.max(0.0);
        SystemAudit {
            key_uniformity,
            key_source_independence,
            source_marginal,
            m1_bits: cb.bits.m1_bits(),
            m2_bits: cb.bits.m2_bits(),
            markov_node2,
            markov_node3,
            passed: key_uniformity <= 1e-12
                && key_source_independence <= 1e-12
                && source_marginal <= 1e-12
                && markov_node2 <= tol
                && markov_node3 <= tol,
        }
    }

    /// Dense joint over `K, Ma, Mb, Mc, Md, X_t.., Y2_t.., Y3_t.., W_t..`
    /// (`t = 1..n`), with `W_t` the flattened `(W1, W2, W3)` at letter `t`.
    pub fn to_joint(&self, cap: usize) -> Result<JointDistribution> {
        let n = self.n();
        let [nx, n2, n3] = self.dims();
        let [na, nb, nc, nd, nk] = self.scheme.codebooks.sizes();
        let mut vars = vec![
            Alphabet::new("K", nk)?,
            Alphabet::new("Ma", na)?,
            Alphabet::new("Mb", nb)?,
            Alphabet::new("Mc", nc)?,
            Alphabet::new("Md", nd)?,
        ];
        for (prefix, size) in [("X", nx), ("Y2", n2), ("Y3", n3), ("W", self.nw)] {
            for t in 1..=n {
                vars.push(Alphabet::new(format!("{prefix}_{t}"), size)?);
            }
        }
        let sizes: Vec<usize> = vars.iter().map(|v| v.size).collect();
        let cells = check_cells(sizes.iter().copied(), cap)?;
        let mut table = vec![0.0; cells];
        let nm = self.message_count();
        let n2n = n2.pow(n as u32);
        let n3n = n3.pow(n as u32);
        let nwn = self.nw.pow(n as u32);
        for k in 0..nk {
            for m in 0..nm {
                let y2 = self.action_block(m, k, false);
                let y3 = self.action_block(m, k, true);
                for xi in 0..self.n_xn {
                    let p = self.encoder_joint(k, m, xi);
                    if p == 0.0 {
                        continue;
                    }
                    let xd = self.xn_digits(xi);
                    for (i2, q2) in y2.iter().enumerate().filter(|(_, q)| **q > 0.0) {
                        let y2d = digits(i2, n2, n);
                        for (i3, q3) in y3.iter().enumerate().filter(|(_, q)| **q > 0.0) {
                            let y3d = digits(i3, n3, n);
                            let base = ((k * nm + m) * self.n_xn + xi) * n2n * n3n + i2 * n3n + i3;
                            for wi in 0..nwn {
                                let wd = digits(wi, self.nw, n);
                                let pw: f64 = (0..n)
                                    .map(|t| {
                                        self.side_rows[(xd[t] * n2 + y2d[t]) * n3 + y3d[t]][wd[t]]
                                    })
                                    .product();
                                if pw > 0.0 {
                                    table[base * nwn + wi] += p * q2 * q3 * pw;
                                }
                            }
                        }
                    }
                }
            }
        }
        // Message digits (a, b, c, d) flatten to m in the same order, so
        // the layout above is already row-major over the declared variables.
        JointDistribution::new(vars, table).map_err(|e| match e {
            Error::InvalidDistribution(s) => {
                Error::InvalidDistribution(format!("system table: {s}"))
            }
            e => e,
        })
    }
}

pub(crate) fn digits(mut i: usize, base: usize, n: usize) -> Vec<usize> {
    let mut d = vec![0; n];
    for t in (0..n).rev() {
        d[t] = i % base;
        i /= base;
    }
    d
}
