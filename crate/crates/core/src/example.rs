//! Ternary example with an all-distinct requirement.
//!
//! `X` is uniform on {1, 2, 3}. The payoff is `-inf` unless `x`, `y2`, `y3`
//! are all different, and otherwise 1 when the adversary's guess `z`
//! differs from `x`. The adversary sees every signal exactly (after the
//! fact). The optimal payoff as a function of key rate is
//!
//! ```text
//! Π(R0) = R0 / 2                              R0 <= 1
//!       = (R0 - 1) / (6 (log2 3 - 1)) + 1/2    1 < R0 <= log2 3
//!       = 2/3                                 R0 > log2 3
//! ```
//!
//! Symbols 1, 2, 3 are stored as indices 0, 1, 2.

use serde::Serialize;

use crate::bounds::{eval_inner_tuple, InnerCandidate, RatePayoffTuple, SideInfoSpec};
use crate::error::{Error, Result};
use crate::names::{U1, U2, V1, V2, X, Y2, Y3};
use crate::payoff::{Payoff, PayoffTable};
use crate::prob::{Alphabet, JointDistribution, Pmf};

const LABELS: [&str; 3] = ["1", "2", "3"];

fn ternary(name: &str) -> Result<Alphabet> {
    Alphabet::with_labels(name, LABELS)
}

pub fn log2_3() -> f64 {
    3f64.log2()
}

pub fn source() -> Result<Pmf> {
    Pmf::uniform(ternary(X)?)
}

pub fn side_info() -> Result<SideInfoSpec> {
    SideInfoSpec::identity(3, 3, 3)
}

pub fn all_distinct(x: usize, y2: usize, y3: usize) -> bool {
    x != y2 && y2 != y3 && x != y3
}

pub fn payoff_table() -> Result<PayoffTable> {
    PayoffTable::from_fn(
        ternary(X)?,
        ternary(Y2)?,
        ternary(Y3)?,
        ternary("Z")?,
        |x, y2, y3, z| {
            if !all_distinct(x, y2, y3) {
                f64::NEG_INFINITY
            } else if x != z {
                1.0
            } else {
                0.0
            }
        },
    )
}

pub fn payoff() -> Result<Payoff> {
    Ok(Payoff::Table(payoff_table()?))
}

pub fn analytic_pi(r0: f64) -> Result<f64> {
    if !(r0 >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "key rate must be nonnegative, got {r0}"
        )));
    }
    let l = log2_3();
    Ok(if r0 <= 1.0 {
        r0 / 2.0
    } else if r0 <= l {
        (r0 - 1.0) / (6.0 * (l - 1.0)) + 0.5
    } else {
        2.0 / 3.0
    })
}

/// The third symbol of a pair of distinct symbols.
fn third(a: usize, b: usize) -> usize {
    3 - a - b
}

fn product_labels(parts: &[&[&str]]) -> Vec<String> {
    parts.iter().fold(vec![String::new()], |acc, p| {
        acc.iter()
            .flat_map(|prefix| {
                p.iter().map(move |s| {
                    if prefix.is_empty() {
                        s.to_string()
                    } else {
                        format!("{prefix},{s}")
                    }
                })
            })
            .collect()
    })
}

/// Builds a candidate from weighted atoms `(x, y2, y3, u1, u2, v1, v2)`.
fn from_atoms(aux: [Alphabet; 4], atoms: &[([usize; 7], f64)]) -> Result<InnerCandidate> {
    let [u1, u2, v1, v2] = aux;
    let vars = vec![ternary(X)?, ternary(Y2)?, ternary(Y3)?, u1, u2, v1, v2];
    let sizes: Vec<usize> = vars.iter().map(|v| v.size).collect();
    let mut table = vec![0.0; sizes.iter().product()];
    for (d, p) in atoms {
        let flat = d.iter().zip(&sizes).fold(0, |acc, (&x, &s)| acc * s + x);
        table[flat] += p;
    }
    InnerCandidate::new(JointDistribution::new(vars, table)?)
}

/// The six all-distinct triples `(x, y2, y3)`.
fn support() -> impl Iterator<Item = (usize, usize, usize)> {
    (0..3).flat_map(|y2| {
        (0..3)
            .filter(move |&y3| y3 != y2)
            .map(move |y3| (third(y2, y3), y2, y3))
    })
}

/// `U' = Y2 - Y3 mod 3`, stored as 0 for difference 1 and 1 for difference 2.
fn u_prime(y2: usize, y3: usize) -> usize {
    (y2 + 3 - y3) % 3 - 1
}

/// Candidates reaching the two corner points of the curve.
///
/// * `1`: `U2` uniform on the two symbols other than `Y3`, independent of
///   everything else given `Y3`; `V2 = (Y3, U2)`, `U1 = (U', U2)`,
///   `V1 = (Y2, Y3, U2)`. Gives `(1, log2 3, log2 3 - 1, 1/2)`.
/// * `2`: the same with `U2` constant. Gives `(log2 3, log2 3, log2 3 - 1, 2/3)`.
pub fn corner_candidate(which: u8) -> Result<InnerCandidate> {
    let diff = ["+1", "+2"];
    match which {
        1 => {
            let aux = [
                Alphabet::with_labels(U1, product_labels(&[&diff, &LABELS]))?,
                ternary(U2)?,
                Alphabet::with_labels(V1, product_labels(&[&LABELS, &LABELS, &LABELS]))?,
                Alphabet::with_labels(V2, product_labels(&[&LABELS, &LABELS]))?,
            ];
            let mut atoms = Vec::new();
            for (x, y2, y3) in support() {
                for u2 in (0..3).filter(|&u| u != y3) {
                    let u1 = u_prime(y2, y3) * 3 + u2;
                    let v1 = (y2 * 3 + y3) * 3 + u2;
                    let v2 = y3 * 3 + u2;
                    atoms.push(([x, y2, y3, u1, u2, v1, v2], 1.0 / 12.0));
                }
            }
            from_atoms(aux, &atoms)
        }
        2 => {
            let empty = ["-"];
            let aux = [
                Alphabet::with_labels(U1, product_labels(&[&diff, &empty]))?,
                Alphabet::with_labels(U2, empty)?,
                Alphabet::with_labels(V1, product_labels(&[&LABELS, &LABELS, &empty]))?,
                Alphabet::with_labels(V2, product_labels(&[&LABELS, &empty]))?,
            ];
            let atoms: Vec<_> = support()
                .map(|(x, y2, y3)| ([x, y2, y3, u_prime(y2, y3), 0, y2 * 3 + y3, y3], 1.0 / 6.0))
                .collect();
            from_atoms(aux, &atoms)
        }
        _ => Err(Error::InvalidArgument(format!(
            "corner must be 1 or 2, got {which}"
        ))),
    }
}

/// Full disclosure without key: `U1 = V1 = (Y2, Y3)`, `U2 = V2 = Y3`.
/// Gives `(0, log2 3, log2 3 - 1, 0)`.
pub fn disclosure_candidate() -> Result<InnerCandidate> {
    let pair = product_labels(&[&LABELS, &LABELS]);
    let aux = [
        Alphabet::with_labels(U1, pair.clone())?,
        ternary(U2)?,
        Alphabet::with_labels(V1, pair)?,
        ternary(V2)?,
    ];
    let atoms: Vec<_> = support()
        .map(|(x, y2, y3)| ([x, y2, y3, y2 * 3 + y3, y3, y2 * 3 + y3, y3], 1.0 / 6.0))
        .collect();
    from_atoms(aux, &atoms)
}

/// Mixture of the disclosure and corner candidates whose key rate is
/// `min(r0, log2 3)`; returns the components with their weights as well.
pub fn time_shared_candidate(r0: f64) -> Result<(InnerCandidate, Vec<(f64, InnerCandidate)>)> {
    if !(r0 >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "key rate must be nonnegative, got {r0}"
        )));
    }
    let l = log2_3();
    let parts = if r0 <= 1.0 {
        vec![
            (1.0 - r0, disclosure_candidate()?),
            (r0, corner_candidate(1)?),
        ]
    } else if r0 < l {
        let lam = (r0 - 1.0) / (l - 1.0);
        vec![
            (1.0 - lam, corner_candidate(1)?),
            (lam, corner_candidate(2)?),
        ]
    } else {
        vec![(1.0, corner_candidate(2)?)]
    };
    let refs: Vec<(f64, &InnerCandidate)> = parts.iter().map(|(w, c)| (*w, c)).collect();
    Ok((InnerCandidate::time_share(&refs)?, parts))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExampleRow {
    pub r0: f64,
    pub analytic: f64,
    pub evaluated: RatePayoffTuple,
    /// `H(Y3|V2) = 0` and `H(Y2,Y3|V1) = 0` on every mixture component.
    pub signals_determined: bool,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExampleReport {
    pub rows: Vec<ExampleRow>,
    pub passed: bool,
}

impl ExampleReport {
    pub fn failures(&self) -> Vec<String> {
        self.rows
            .iter()
            .filter(|r| !r.passed)
            .map(|r| {
                format!(
                    "R0={}: expected {}, got {}",
                    r.r0, r.analytic, r.evaluated.pi
                )
            })
            .collect()
    }
}

pub const DEFAULT_TOL: f64 = 1e-6;
const STRUCT_TOL: f64 = 1e-9;

/// Evaluates the time-shared candidates on a grid of key rates against the
/// closed-form curve.
pub fn verify_example(grid: &[f64], tol: f64) -> Result<ExampleReport> {
    let p_x = source()?;
    let side = side_info()?;
    let payoff = payoff()?;
    let mut rows = Vec::with_capacity(grid.len());
    for &r0 in grid {
        if !(0.0..=2.0).contains(&r0) {
            return Err(Error::InvalidArgument(format!(
                "grid point {r0} outside [0, 2]"
            )));
        }
        let (mix, parts) = time_shared_candidate(r0)?;
        let evaluated = eval_inner_tuple(&mix, &p_x, &side, &payoff, STRUCT_TOL)?;
        let mut signals_determined = true;
        for (_, c) in &parts {
            let j = c.joint();
            signals_determined &= j.is_deterministic(&[Y3], &[V2], STRUCT_TOL)?.holds;
            signals_determined &= j.is_deterministic(&[Y2, Y3], &[V1], STRUCT_TOL)?.holds;
        }
        let analytic = analytic_pi(r0)?;
        let passed = signals_determined
            && !evaluated.forbidden
            && (evaluated.pi - analytic).abs() <= tol
            && (evaluated.r0 - r0.min(log2_3())).abs() <= tol;
        rows.push(ExampleRow {
            r0,
            analytic,
            evaluated,
            signals_determined,
            passed,
        });
    }
    let passed = rows.iter().all(|r| r.passed);
    Ok(ExampleReport { rows, passed })
}

pub fn default_grid() -> Vec<f64> {
    vec![0.0, 0.25, 0.5, 0.75, 1.0, 1.2, 1.4, log2_3(), 1.8, 2.0]
}
