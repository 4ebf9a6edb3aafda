//! Small-blocklength simulation of the superposition-codebook scheme.
//!
//! Four public random codebooks are drawn from an inner-bound candidate:
//! `C_U2[a]`, `C_V2[a,b,k]`, `C_U1[a,c]` and `C_V1[a,b,c,d,k]`. Node 1
//! picks `(a, b, c, d)` with a likelihood encoder and sends
//! `M1 = (a, b, c, d)`; node 2 forwards `M2 = (a, b)`. Node 2 acts through
//! `P(y2|v1)` and node 3 through `P(y3|v2)`. The adversary knows the
//! codebooks and sees `M1`, `M2` and strictly-causal side information.
//!
//! [`run_system_exact`] builds the exact joint law of the system in factored
//! form; [`simulate_payoff`] and [`empirical_equivocation`] evaluate it
//! exactly and [`mc_estimate`] samples it.

mod adversary;
mod codebook;
mod system;

use serde::{Deserialize, Serialize};

use crate::bounds::{check_inner_constraints, InnerCandidate, SideInfoSpec};
use crate::error::{Error, Result};
use crate::names::{U1, U2, V1, V2, W1, W2, W3, X, Y2, Y3};
use crate::prob::{JointDistribution, Pmf};

pub use adversary::{
    empirical_equivocation, mc_estimate, mc_trace, posteriors, simulate_payoff, HistoryPosterior,
    McEstimate, SimPayoff, TraceRow,
};
pub use codebook::{build_codebooks, CodebookSet, Scheme, SchemeLaws};
pub use system::{run_system_exact, run_system_exact_with_cap, SystemAudit, SystemTable};

pub const DEFAULT_SLACK: f64 = 0.1;

/// Numbers of index bits; each index ranges over `2^bits` values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexBits {
    pub a: u32,
    pub b: u32,
    pub c: u32,
    pub d: u32,
    pub key: u32,
}

impl IndexBits {
    pub fn sizes(&self) -> [usize; 5] {
        [self.a, self.b, self.c, self.d, self.key].map(|b| 1usize << b)
    }

    pub fn m1_bits(&self) -> u32 {
        self.a + self.b + self.c + self.d
    }

    pub fn m2_bits(&self) -> u32 {
        self.a + self.b
    }
}

/// Per-letter rates that the index sizes must cover.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeRates {
    /// I(X;U2)
    pub a: f64,
    /// I(X;V2|U2)
    pub b: f64,
    /// I(X;U1|V2)
    pub c: f64,
    /// I(X;V1|U1,V2)
    pub d: f64,
    /// I(W;V1|U1)
    pub key: f64,
}

impl SchemeRates {
    pub fn of(candidate: &InnerCandidate, side: &SideInfoSpec) -> Result<Self> {
        let j = candidate.joint();
        let with_w = side.adjoin(j)?;
        Ok(SchemeRates {
            a: j.mutual_information(&[X], &[U2])?,
            b: j.conditional_mutual_information(&[X], &[V2], &[U2])?,
            c: j.conditional_mutual_information(&[X], &[U1], &[V2])?,
            d: j.conditional_mutual_information(&[X], &[V1], &[U1, V2])?,
            key: with_w.conditional_mutual_information(&[W1, W2, W3], &[V1], &[U1])?,
        })
    }

    /// `ceil(n (rate + slack))` bits for every index.
    pub fn bits(&self, n: usize, slack: f64) -> IndexBits {
        let f = |r: f64| (n as f64 * (r + slack) - 1e-12).ceil().max(0.0) as u32;
        IndexBits {
            a: f(self.a),
            b: f(self.b),
            c: f(self.c),
            d: f(self.d),
            key: f(self.key),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeSpec {
    pub n: usize,
    pub candidate: InnerCandidate,
    pub p_x: Pmf,
    pub side: SideInfoSpec,
    pub bits: IndexBits,
    pub slack: f64,
    pub seed: u64,
}

impl SchemeSpec {
    /// Index bits sized from the candidate's rates plus `slack`.
    pub fn auto(
        n: usize,
        candidate: InnerCandidate,
        p_x: Pmf,
        side: SideInfoSpec,
        slack: f64,
        seed: u64,
    ) -> Result<Self> {
        let bits = SchemeRates::of(&candidate, &side)?.bits(n, slack);
        SchemeSpec::with_bits(n, candidate, p_x, side, bits, slack, seed)
    }

    pub fn with_bits(
        n: usize,
        candidate: InnerCandidate,
        p_x: Pmf,
        side: SideInfoSpec,
        bits: IndexBits,
        slack: f64,
        seed: u64,
    ) -> Result<Self> {
        let spec = SchemeSpec {
            n,
            candidate,
            p_x,
            side,
            bits,
            slack,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidArgument(
                "blocklength must be at least 1".into(),
            ));
        }
        if !(self.slack >= 0.0) {
            return Err(Error::InvalidArgument("slack must be nonnegative".into()));
        }
        let report = check_inner_constraints(&self.candidate, &self.p_x, 1e-9)?;
        if !report.passed {
            return Err(Error::Constraints(Box::new(report)));
        }
        let j = self.candidate.joint();
        let dims = [
            j.variable(X)?.size,
            j.variable(Y2)?.size,
            j.variable(Y3)?.size,
        ];
        if self.side.input_dims() != dims {
            return Err(Error::InvalidArgument(
                "side information does not match signal alphabets".into(),
            ));
        }
        let total_bits = self.bits.m1_bits() + self.bits.key;
        if total_bits > 40 {
            return Err(Error::InvalidArgument(format!(
                "{total_bits} index bits is beyond exact simulation"
            )));
        }
        Ok(())
    }

    pub fn rates(&self) -> Result<SchemeRates> {
        SchemeRates::of(&self.candidate, &self.side)
    }

    pub fn dims(&self) -> [usize; 3] {
        let j = self.candidate.joint();
        [X, Y2, Y3].map(|n| j.variable(n).map(|a| a.size).unwrap_or(0))
    }
}

/// Rows of `P(target | given)` indexed by the flattened `given` symbols.
/// Rows of zero-probability conditions are all zero.
pub(crate) fn conditional(
    joint: &JointDistribution,
    given: &[&str],
    target: &str,
) -> Result<Vec<Vec<f64>>> {
    let mut keep = given.to_vec();
    keep.push(target);
    let m = joint.marginalize(&keep)?;
    let k = joint.variable(target)?.size;
    Ok(m.table()
        .chunks_exact(k)
        .map(|row| {
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                row.iter().map(|p| p / s).collect()
            } else {
                vec![0.0; k]
            }
        })
        .collect())
}
