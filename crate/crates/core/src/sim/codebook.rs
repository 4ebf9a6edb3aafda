use serde::{Deserialize, Serialize};

use super::system::digits;
use super::{conditional, IndexBits, SchemeSpec};
use crate::error::{Error, Result};
use crate::names::{U1, U2, V1, V2, X, Y2, Y3};
use crate::prob::DEFAULT_CELL_CAP;
use crate::rng::{self, sample_index};

/// Conditional laws of a candidate used by the scheme.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SchemeLaws {
    /// Sizes of X, Y2, Y3.
    pub dims: [usize; 3],
    /// Sizes of U1, U2, V1, V2.
    pub aux: [usize; 4],
    pub u2: Vec<f64>,
    /// `[u2][v2]`
    pub v2_given_u2: Vec<Vec<f64>>,
    /// `[u2][u1]`
    pub u1_given_u2: Vec<Vec<f64>>,
    /// `[u1 * |V2| + v2][v1]`
    pub v1_given_u1v2: Vec<Vec<f64>>,
    /// `[v1 * |V2| + v2][x]`
    pub x_given_v1v2: Vec<Vec<f64>>,
    /// `[v1][y2]`
    pub y2_given_v1: Vec<Vec<f64>>,
    /// `[v2][y3]`
    pub y3_given_v2: Vec<Vec<f64>>,
}

impl SchemeLaws {
    pub fn of(spec: &SchemeSpec) -> Result<Self> {
        let j = spec.candidate.joint();
        let size = |n: &str| j.variable(n).map(|a| a.size);
        Ok(SchemeLaws {
            dims: [size(X)?, size(Y2)?, size(Y3)?],
            aux: [size(U1)?, size(U2)?, size(V1)?, size(V2)?],
            u2: j.pmf(U2)?.probs().to_vec(),
            v2_given_u2: conditional(j, &[U2], V2)?,
            u1_given_u2: conditional(j, &[U2], U1)?,
            v1_given_u1v2: conditional(j, &[U1, V2], V1)?,
            x_given_v1v2: conditional(j, &[V1, V2], X)?,
            y2_given_v1: conditional(j, &[V1], Y2)?,
            y3_given_v2: conditional(j, &[V2], Y3)?,
        })
    }

    pub fn n_v2(&self) -> usize {
        self.aux[3]
    }
}

/// Codewords as symbol indices of the candidate's auxiliary alphabets.
///
/// Flattened layouts: `v2[(a * B + b) * K + k]`, `u1[a * C + c]`,
/// `v1[((((a * B + b) * C + c) * D + d) * K + k]`, with `A..D, K` the index
/// space sizes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodebookSet {
    pub n: usize,
    pub bits: IndexBits,
    /// Number of discarded draws before this one.
    #[serde(default)]
    pub redraws: u32,
    pub u2: Vec<Vec<usize>>,
    pub v2: Vec<Vec<usize>>,
    pub u1: Vec<Vec<usize>>,
    pub v1: Vec<Vec<usize>>,
}

impl CodebookSet {
    pub fn sizes(&self) -> [usize; 5] {
        self.bits.sizes()
    }

    pub fn message_count(&self) -> usize {
        1usize << self.bits.m1_bits()
    }

    pub fn key_count(&self) -> usize {
        1usize << self.bits.key
    }

    /// `(a, b, c, d)` of a flattened `M1`.
    pub fn split_message(&self, m: usize) -> [usize; 4] {
        let [_, nb, nc, nd, _] = self.sizes();
        [
            m / (nb * nc * nd),
            (m / (nc * nd)) % nb,
            (m / nd) % nc,
            m % nd,
        ]
    }

    pub fn join_message(&self, idx: [usize; 4]) -> usize {
        let [_, nb, nc, nd, _] = self.sizes();
        ((idx[0] * nb + idx[1]) * nc + idx[2]) * nd + idx[3]
    }

    /// Flattened `M2 = (a, b)` of a flattened `M1`.
    pub fn m2_of(&self, m: usize) -> usize {
        let [a, b, _, _] = self.split_message(m);
        a * self.sizes()[1] + b
    }

    pub fn v1_word(&self, m: usize, k: usize) -> &[usize] {
        &self.v1[m * self.key_count() + k]
    }

    pub fn v2_word(&self, m: usize, k: usize) -> &[usize] {
        &self.v2[self.m2_of(m) * self.key_count() + k]
    }

    pub fn u1_word(&self, m: usize) -> &[usize] {
        let [a, _, c, _] = self.split_message(m);
        &self.u1[a * self.sizes()[2] + c]
    }

    /// Every drawn symbol has positive probability under its conditional law.
    pub fn check_support(&self, laws: &SchemeLaws) -> bool {
        let [na, nb, nc, nd, nk] = self.sizes();
        let nv2 = laws.n_v2();
        for a in 0..na {
            let u2 = &self.u2[a];
            if u2.iter().any(|&s| laws.u2[s] <= 0.0) {
                return false;
            }
            for b in 0..nb {
                for k in 0..nk {
                    let v2 = &self.v2[(a * nb + b) * nk + k];
                    if (0..self.n).any(|t| laws.v2_given_u2[u2[t]][v2[t]] <= 0.0) {
                        return false;
                    }
                    for c in 0..nc {
                        let u1 = &self.u1[a * nc + c];
                        if (0..self.n).any(|t| laws.u1_given_u2[u2[t]][u1[t]] <= 0.0) {
                            return false;
                        }
                        for d in 0..nd {
                            let v1 = &self.v1[((((a * nb + b) * nc + c) * nd + d) * nk) + k];
                            if (0..self.n)
                                .any(|t| laws.v1_given_u1v2[u1[t] * nv2 + v2[t]][v1[t]] <= 0.0)
                            {
                                return false;
                            }
                        }
                    }
                }
            }
        }
        true
    }
}

/// Stream index of a keyed codeword. The key sits in the low 32 bits so a
/// larger key space reproduces the codewords of a smaller one.
fn nested(message: usize, k: usize) -> u64 {
    ((message as u64) << 32) | k as u64
}

fn draw_word(
    seed: u64,
    label: &str,
    index: u64,
    n: usize,
    row: impl Fn(usize) -> Vec<f64>,
) -> Vec<usize> {
    let mut r = rng::stream(seed, label, index);
    (0..n).map(|t| sample_index(&mut r, &row(t))).collect()
}

/// Draws the four codebooks. Each codeword has its own random stream keyed
/// by the codebook name and its index.
///
/// A draw is discarded when some key leaves a positive-probability source
/// block without any codeword of positive likelihood; the next draw uses a
/// seed derived from the spec seed and the redraw count. The first draw
/// uses the spec seed itself.
pub fn build_codebooks(spec: &SchemeSpec) -> Result<CodebookSet> {
    spec.validate()?;
    let laws = SchemeLaws::of(spec)?;
    codebooks_from_laws(spec, &laws)
}

pub const MAX_REDRAWS: u32 = 256;

pub(crate) fn codebooks_from_laws(spec: &SchemeSpec, laws: &SchemeLaws) -> Result<CodebookSet> {
    let [_, _, _, _, nk] = spec.bits.sizes();
    let nm = 1usize << spec.bits.m1_bits();
    let n_xn = (laws.dims[0] as u128).pow(spec.n as u32);
    let checkable =
        (nk as u128) * (nm as u128) * n_xn.max(spec.n as u128) <= DEFAULT_CELL_CAP as u128;
    for redraws in 0..MAX_REDRAWS {
        let seed = if redraws == 0 {
            spec.seed
        } else {
            rand::Rng::random(&mut rng::stream(
                spec.seed,
                "codebook/redraw",
                redraws as u64,
            ))
        };
        let mut cb = draw_codebooks(spec, laws, seed)?;
        cb.redraws = redraws;
        if !checkable || covers_source(&cb, laws, spec.p_x.probs()) {
            return Ok(cb);
        }
    }
    Err(Error::OutsideSupport)
}

/// Every key reproduces every positive-probability source block with some
/// message.
fn covers_source(cb: &CodebookSet, laws: &SchemeLaws, p_x: &[f64]) -> bool {
    let nx = laws.dims[0];
    let nv2 = laws.n_v2();
    let n_xn = nx.pow(cb.n as u32);
    let needed: Vec<bool> = (0..n_xn)
        .map(|xi| digits(xi, nx, cb.n).iter().all(|&x| p_x[x] > 0.0))
        .collect();
    for k in 0..cb.key_count() {
        let mut covered = vec![false; n_xn];
        for m in 0..cb.message_count() {
            let (v1, v2) = (cb.v1_word(m, k), cb.v2_word(m, k));
            // Source blocks with positive likelihood, built letter by letter.
            let mut blocks = vec![0usize];
            for t in 0..cb.n {
                let row = &laws.x_given_v1v2[v1[t] * nv2 + v2[t]];
                blocks = blocks
                    .iter()
                    .flat_map(|&b| (0..nx).filter(|&x| row[x] > 0.0).map(move |x| b * nx + x))
                    .collect();
            }
            for b in blocks {
                covered[b] = true;
            }
        }
        if needed.iter().zip(&covered).any(|(&need, &c)| need && !c) {
            return false;
        }
    }
    true
}

fn draw_codebooks(spec: &SchemeSpec, laws: &SchemeLaws, seed: u64) -> Result<CodebookSet> {
    let n = spec.n;
    let [na, nb, nc, nd, nk] = spec.bits.sizes();
    let words = (na as u128) * (1 + (nb * nk) as u128 + nc as u128 + (nb * nc * nd * nk) as u128);
    let required = words * n as u128;
    if required > DEFAULT_CELL_CAP as u128 {
        return Err(Error::CellCap {
            required,
            cap: DEFAULT_CELL_CAP,
        });
    }
    let nv2 = laws.n_v2();
    let u2: Vec<Vec<usize>> = (0..na)
        .map(|a| draw_word(seed, "codebook/U2", a as u64, n, |_| laws.u2.clone()))
        .collect();
    let mut v2 = Vec::with_capacity(na * nb * nk);
    for (a, u2w) in u2.iter().enumerate() {
        for b in 0..nb {
            for k in 0..nk {
                let i = nested(a * nb + b, k);
                v2.push(draw_word(seed, "codebook/V2", i, n, |t| {
                    laws.v2_given_u2[u2w[t]].clone()
                }));
            }
        }
    }
    let mut u1 = Vec::with_capacity(na * nc);
    for (a, u2w) in u2.iter().enumerate() {
        for c in 0..nc {
            u1.push(draw_word(
                seed,
                "codebook/U1",
                (a * nc + c) as u64,
                n,
                |t| laws.u1_given_u2[u2w[t]].clone(),
            ));
        }
    }
    let mut v1 = Vec::with_capacity(na * nb * nc * nd * nk);
    for a in 0..na {
        for b in 0..nb {
            for c in 0..nc {
                for d in 0..nd {
                    for k in 0..nk {
                        let i = nested(((a * nb + b) * nc + c) * nd + d, k);
                        let u1w = &u1[a * nc + c];
                        let v2w = &v2[(a * nb + b) * nk + k];
                        v1.push(draw_word(seed, "codebook/V1", i, n, |t| {
                            laws.v1_given_u1v2[u1w[t] * nv2 + v2w[t]].clone()
                        }));
                    }
                }
            }
        }
    }
    Ok(CodebookSet {
        n,
        bits: spec.bits,
        redraws: 0,
        u2,
        v2,
        u1,
        v1,
    })
}

/// A spec with its laws and drawn codebooks.
#[derive(Clone, Debug, PartialEq)]
pub struct Scheme {
    pub spec: SchemeSpec,
    pub laws: SchemeLaws,
    pub codebooks: CodebookSet,
}

impl Scheme {
    pub fn new(spec: SchemeSpec) -> Result<Self> {
        spec.validate()?;
        let laws = SchemeLaws::of(&spec)?;
        let codebooks = codebooks_from_laws(&spec, &laws)?;
        Ok(Scheme {
            spec,
            laws,
            codebooks,
        })
    }

    /// `prod_t P(x_t | v1_t, v2_t)` for the codewords of `(m, k)`.
    pub fn likelihood(&self, xn: &[usize], m: usize, k: usize) -> f64 {
        let v1 = self.codebooks.v1_word(m, k);
        let v2 = self.codebooks.v2_word(m, k);
        let nv2 = self.laws.n_v2();
        xn.iter()
            .enumerate()
            .map(|(t, &x)| self.laws.x_given_v1v2[v1[t] * nv2 + v2[t]][x])
            .product()
    }

    /// Likelihood-encoder law of the flattened `M1` given `(x^n, k)`.
    pub fn encoder_distribution(&self, xn: &[usize], k: usize) -> Result<Vec<f64>> {
        if xn.len() != self.spec.n || k >= self.codebooks.key_count() {
            return Err(Error::InvalidArgument(
                "source block or key out of range".into(),
            ));
        }
        let mut w: Vec<f64> = (0..self.codebooks.message_count())
            .map(|m| self.likelihood(xn, m, k))
            .collect();
        let s: f64 = w.iter().sum();
        if !(s > 0.0) {
            return Err(Error::OutsideSupport);
        }
        w.iter_mut().for_each(|p| *p /= s);
        Ok(w)
    }

    /// Samples `(a, b, c, d)` from the likelihood encoder.
    pub fn likelihood_encode(&self, xn: &[usize], k: usize, seed: u64) -> Result<[usize; 4]> {
        let dist = self.encoder_distribution(xn, k)?;
        let nx = self.laws.dims[0];
        let block = xn.iter().fold(0usize, |acc, &x| acc * nx + x);
        let mut r = rng::stream(
            seed,
            "encoder",
            (block * self.codebooks.key_count() + k) as u64,
        );
        Ok(self.codebooks.split_message(sample_index(&mut r, &dist)))
    }
}
