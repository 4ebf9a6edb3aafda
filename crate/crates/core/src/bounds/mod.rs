//! Outer and inner bounds on the achievable rate–payoff region.
//!
//! A candidate is a joint distribution over the signals and auxiliaries. Side
//! information `W = (W1, W2, W3)` is never part of a candidate; it is adjoined
//! through the three per-signal channels, so its factorization holds by
//! construction.

mod equivocation;
mod search;
mod structured;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::names::{U, U1, U2, V1, V2, W1, W2, W3, X, Y2, Y3};
use crate::payoff::{adversary_value, Payoff};
use crate::prob::{Alphabet, Channel, JointDistribution, Pmf};

pub use equivocation::{
    check_equivocation_membership, equivocation_value, search_equivocation, DistortionTable,
    EquivocationOutcome, EquivocationProblem, EquivocationWitness,
};
pub use search::{
    min_key_rate_for_payoff, search_inner, Caps, InnerSearchProblem, RateBudget, SearchOptions,
    SearchOutcome, SearchWitness,
};
pub use structured::StructuredCandidate;

/// The three side-information channels `X -> W1`, `Y2 -> W2`, `Y3 -> W3`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SideInfoSpec {
    pub w1: Channel,
    pub w2: Channel,
    pub w3: Channel,
}

impl SideInfoSpec {
    pub fn new(w1: Channel, w2: Channel, w3: Channel) -> Result<Self> {
        for c in [&w1, &w2, &w3] {
            if c.inputs().len() != 1 {
                return Err(Error::InvalidArgument(
                    "side-information channels take exactly one input".into(),
                ));
            }
        }
        Ok(SideInfoSpec { w1, w2, w3 })
    }

    /// The adversary sees every signal exactly.
    pub fn identity(x: usize, y2: usize, y3: usize) -> Result<Self> {
        SideInfoSpec::new(
            Channel::identity(Alphabet::new(X, x)?, W1)?,
            Channel::identity(Alphabet::new(Y2, y2)?, W2)?,
            Channel::identity(Alphabet::new(Y3, y3)?, W3)?,
        )
    }

    /// Identity on the listed signals, a constant (uninformative) output on the rest.
    pub fn reveal(dims: [usize; 3], revealed: &[&str]) -> Result<Self> {
        let mk = |name: &str, size: usize, out: &str| -> Result<Channel> {
            let a = Alphabet::new(name, size)?;
            if revealed.contains(&name) {
                Channel::identity(a, out)
            } else {
                Channel::constant(vec![a], &Pmf::uniform(Alphabet::new(out, 1)?)?)
            }
        };
        SideInfoSpec::new(
            mk(X, dims[0], W1)?,
            mk(Y2, dims[1], W2)?,
            mk(Y3, dims[2], W3)?,
        )
    }

    pub fn input_dims(&self) -> [usize; 3] {
        [
            self.w1.inputs()[0].size,
            self.w2.inputs()[0].size,
            self.w3.inputs()[0].size,
        ]
    }

    pub fn output_dims(&self) -> [usize; 3] {
        [
            self.w1.output().size,
            self.w2.output().size,
            self.w3.output().size,
        ]
    }

    /// Adjoins W1, W2, W3 to a joint containing X, Y2, Y3.
    pub fn adjoin(&self, dist: &JointDistribution) -> Result<JointDistribution> {
        dist.attach_channel(&self.w1, &[X], W1)?
            .attach_channel(&self.w2, &[Y2], W2)?
            .attach_channel(&self.w3, &[Y3], W3)
    }

    /// P(w1, w2, w3 | x, y2, y3) with flattened indices.
    pub fn prob(&self, x: usize, y2: usize, y3: usize, w: [usize; 3]) -> f64 {
        self.w1.row(x)[w[0]] * self.w2.row(y2)[w[1]] * self.w3.row(y3)[w[2]]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstraintItem {
    pub name: String,
    /// Measured slack: bits for information constraints, max abs deviation
    /// for the source marginal.
    pub measured: f64,
    pub passed: bool,
    /// Holds by construction rather than by measurement.
    pub structural: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstraintReport {
    pub items: Vec<ConstraintItem>,
    pub passed: bool,
}

impl ConstraintReport {
    fn from_items(items: Vec<ConstraintItem>) -> Self {
        let passed = items.iter().all(|i| i.passed);
        ConstraintReport { items, passed }
    }

    pub fn item(&self, name: &str) -> Option<&ConstraintItem> {
        self.items.iter().find(|i| i.name == name)
    }

    pub fn summary(&self) -> String {
        let failed: Vec<String> = self
            .items
            .iter()
            .filter(|i| !i.passed)
            .map(|i| format!("{} ({:.3e})", i.name, i.measured))
            .collect();
        if failed.is_empty() {
            "all constraints hold".into()
        } else {
            failed.join(", ")
        }
    }
}

fn measured(name: &str, value: f64, tol: f64) -> ConstraintItem {
    ConstraintItem {
        name: name.to_string(),
        measured: value,
        passed: value <= tol,
        structural: false,
    }
}

fn structural(name: &str) -> ConstraintItem {
    ConstraintItem {
        name: name.to_string(),
        measured: 0.0,
        passed: true,
        structural: true,
    }
}

fn source_deviation(joint: &JointDistribution, p_x: &Pmf) -> Result<f64> {
    let m = joint.pmf(X)?;
    if m.probs().len() != p_x.probs().len() {
        return Err(Error::InvalidArgument(format!(
            "X has {} symbols, source pmf has {}",
            m.probs().len(),
            p_x.probs().len()
        )));
    }
    Ok(m.probs()
        .iter()
        .zip(p_x.probs())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

fn require_exact_vars(joint: &JointDistribution, expected: &[&str]) -> Result<()> {
    for e in expected {
        joint.index_of(e)?;
    }
    if let Some(extra) = joint.names().iter().find(|n| !expected.contains(n)) {
        return Err(Error::InvalidArgument(format!(
            "unexpected variable `{extra}` in candidate"
        )));
    }
    Ok(())
}

const OUTER_VARS: [&str; 6] = [X, Y2, Y3, U, V1, V2];
const INNER_VARS: [&str; 7] = [X, Y2, Y3, U1, U2, V1, V2];

/// Joint over (X, Y2, Y3, U, V1, V2) proposed for the outer bound.
#[derive(Clone, Debug, PartialEq)]
pub struct OuterCandidate {
    joint: JointDistribution,
}

impl OuterCandidate {
    pub fn new(joint: JointDistribution) -> Result<Self> {
        require_exact_vars(&joint, &OUTER_VARS)?;
        Ok(OuterCandidate { joint })
    }

    pub fn joint(&self) -> &JointDistribution {
        &self.joint
    }
}

/// Joint over (X, Y2, Y3, U1, U2, V1, V2) proposed for the inner bound.
#[derive(Clone, Debug, PartialEq)]
pub struct InnerCandidate {
    joint: JointDistribution,
}

impl InnerCandidate {
    pub fn new(joint: JointDistribution) -> Result<Self> {
        require_exact_vars(&joint, &INNER_VARS)?;
        Ok(InnerCandidate { joint })
    }

    pub fn joint(&self) -> &JointDistribution {
        &self.joint
    }

    /// Reads the candidate as an outer-bound candidate with `U := U1`.
    pub fn as_outer(&self) -> Result<OuterCandidate> {
        let j = self
            .joint
            .marginalize(&[X, Y2, Y3, U1, V1, V2])?
            .rename(U1, U)?;
        OuterCandidate::new(j)
    }

    /// Relabels symbols of an auxiliary variable.
    pub fn permute_symbols(&self, name: &str, perm: &[usize]) -> Result<Self> {
        InnerCandidate::new(self.joint.permute_symbols(name, perm)?)
    }

    /// Time-sharing mixture. Each auxiliary alphabet becomes the disjoint
    /// union of the component alphabets, so every auxiliary reveals which
    /// component is active. Rates and payoff are then the weighted averages
    /// of the components' values.
    pub fn time_share(parts: &[(f64, &InnerCandidate)]) -> Result<Self> {
        let parts: Vec<(f64, &InnerCandidate)> =
            parts.iter().copied().filter(|(w, _)| *w > 0.0).collect();
        let total: f64 = parts.iter().map(|(w, _)| w).sum();
        if parts.is_empty()
            || (total - 1.0).abs() > 1e-12
            || parts.iter().any(|(w, _)| !w.is_finite())
        {
            return Err(Error::InvalidArgument(
                "time-sharing weights must be nonnegative and sum to 1".into(),
            ));
        }
        let aux = [U1, U2, V1, V2];
        let mut vars = Vec::new();
        let mut offsets = vec![[0usize; 7]; parts.len()];
        for (pos, name) in INNER_VARS.iter().enumerate() {
            if !aux.contains(name) {
                let a = parts[0].1.joint.variable(name)?.clone();
                for (_, c) in &parts[1..] {
                    if c.joint.variable(name)?.size != a.size {
                        return Err(Error::InvalidArgument(format!(
                            "components disagree on the size of {name}"
                        )));
                    }
                }
                vars.push(a);
                continue;
            }
            let mut labels = Vec::new();
            for (j, (_, c)) in parts.iter().enumerate() {
                offsets[j][pos] = labels.len();
                let a = c.joint.variable(name)?;
                labels.extend((0..a.size).map(|s| format!("{j}:{}", a.label(s))));
            }
            vars.push(Alphabet::with_labels(*name, labels)?);
        }
        let sizes: Vec<usize> = vars.iter().map(|v| v.size).collect();
        let mut table = vec![0.0; sizes.iter().product()];
        for (j, (w, c)) in parts.iter().enumerate() {
            let pos: Vec<usize> = INNER_VARS
                .iter()
                .map(|n| c.joint.index_of(n))
                .collect::<Result<_>>()?;
            c.joint.for_each_positive(|d, p| {
                let flat = (0..7).fold(0, |acc, i| acc * sizes[i] + d[pos[i]] + offsets[j][i]);
                table[flat] += w * p;
            });
        }
        InnerCandidate::new(JointDistribution::from_weights(vars, table)?)
    }
}

/// Candidate JSON: the joint-table layout plus an optional `roles` map from
/// canonical role name (`X`, `U1`, ...) to the variable name used in the file.
#[derive(Serialize, Deserialize)]
struct CandidateRepr {
    variables: Vec<Alphabet>,
    table: Vec<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    roles: BTreeMap<String, String>,
}

fn joint_from_repr(r: CandidateRepr) -> Result<JointDistribution> {
    let mut j = JointDistribution::new(r.variables, r.table)?;
    // Two passes so that swapped names do not collide.
    let mut tmp = Vec::new();
    for (role, var) in &r.roles {
        let t = format!("__role_{role}");
        j = j.rename(var, &t)?;
        tmp.push((t, role.clone()));
    }
    for (t, role) in tmp {
        j = j.rename(&t, &role)?;
    }
    Ok(j)
}

macro_rules! candidate_serde {
    ($t:ty) => {
        impl Serialize for $t {
            fn serialize<S: serde::Serializer>(
                &self,
                s: S,
            ) -> std::result::Result<S::Ok, S::Error> {
                CandidateRepr {
                    variables: self.joint.variables().to_vec(),
                    table: self.joint.table().to_vec(),
                    roles: BTreeMap::new(),
                }
                .serialize(s)
            }
        }

        impl<'de> Deserialize<'de> for $t {
            fn deserialize<D: serde::Deserializer<'de>>(
                d: D,
            ) -> std::result::Result<Self, D::Error> {
                let r = CandidateRepr::deserialize(d)?;
                joint_from_repr(r)
                    .and_then(<$t>::new)
                    .map_err(serde::de::Error::custom)
            }
        }
    };
}

candidate_serde!(OuterCandidate);
candidate_serde!(InnerCandidate);

/// (R0, R1, R2) in bits and the payoff Π.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatePayoffTuple {
    pub r0: f64,
    pub r1: f64,
    pub r2: f64,
    #[serde(with = "ext_real")]
    pub pi: f64,
    /// Π is `-inf` because a `-inf` payoff event has positive probability.
    #[serde(default)]
    pub forbidden: bool,
}

/// Serializes `-inf` as the string `"-inf"`.
pub mod ext_real {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *v == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum E {
            F(f64),
            S(String),
        }
        match E::deserialize(d)? {
            E::F(f) => Ok(f),
            E::S(s) if s == "-inf" => Ok(f64::NEG_INFINITY),
            E::S(s) => Err(serde::de::Error::custom(format!(
                "expected number or \"-inf\", got `{s}`"
            ))),
        }
    }
}

pub fn check_outer_constraints(
    c: &OuterCandidate,
    p_x: &Pmf,
    tol: f64,
) -> Result<ConstraintReport> {
    let j = &c.joint;
    Ok(ConstraintReport::from_items(vec![
        measured("X ~ P_X", source_deviation(j, p_x)?, tol),
        structural("W | X,Y2,Y3 side-information factorization"),
        measured(
            "X - V1 - Y2",
            j.is_markov(&[X], &[V1], &[Y2], tol)?.value,
            tol,
        ),
        measured(
            "(X,V1,Y2) - V2 - Y3",
            j.is_markov(&[X, V1, Y2], &[V2], &[Y3], tol)?.value,
            tol,
        ),
        measured(
            "H(V2,U|V1) = 0",
            j.conditional_entropy(&[V2, U], &[V1])?,
            tol,
        ),
    ]))
}

pub fn check_inner_constraints(
    c: &InnerCandidate,
    p_x: &Pmf,
    tol: f64,
) -> Result<ConstraintReport> {
    let j = &c.joint;
    Ok(ConstraintReport::from_items(vec![
        measured("X ~ P_X", source_deviation(j, p_x)?, tol),
        structural("W | X,Y2,Y3 side-information factorization"),
        measured(
            "X - V1 - Y2",
            j.is_markov(&[X], &[V1], &[Y2], tol)?.value,
            tol,
        ),
        measured(
            "(X,V1,Y2) - V2 - Y3",
            j.is_markov(&[X, V1, Y2], &[V2], &[Y3], tol)?.value,
            tol,
        ),
        measured(
            "H(V2,U1|V1) = 0",
            j.conditional_entropy(&[V2, U1], &[V1])?,
            tol,
        ),
        measured("H(U2|U1) = 0", j.conditional_entropy(&[U2], &[U1])?, tol),
        measured("H(U2|V2) = 0", j.conditional_entropy(&[U2], &[V2])?, tol),
        measured(
            "U1 - U2 - V2",
            j.is_markov(&[U1], &[U2], &[V2], tol)?.value,
            tol,
        ),
    ]))
}

/// Rates and payoff for a joint whose roles are given as variable sets.
pub(crate) fn tuple_for_roles(
    joint: &JointDistribution,
    u: &[&str],
    v1: &[&str],
    v2: &[&str],
    side: &SideInfoSpec,
    payoff: &Payoff,
) -> Result<RatePayoffTuple> {
    let with_w = side.adjoin(joint)?;
    let r0 = with_w.conditional_mutual_information(&[W1, W2, W3], v1, u)?;
    let r1 = joint.mutual_information(&[X], v1)?;
    let r2 = joint.mutual_information(&[X], v2)?;
    let adv = adversary_value(joint, u, payoff)?;
    Ok(RatePayoffTuple {
        r0,
        r1,
        r2,
        pi: adv.value,
        forbidden: adv.forbidden,
    })
}

fn check_side(joint: &JointDistribution, side: &SideInfoSpec) -> Result<()> {
    let dims = [
        joint.variable(X)?.size,
        joint.variable(Y2)?.size,
        joint.variable(Y3)?.size,
    ];
    if side.input_dims() != dims {
        return Err(Error::InvalidArgument(format!(
            "side-information inputs {:?} do not match signals {dims:?}",
            side.input_dims()
        )));
    }
    Ok(())
}

/// (I(W;V1|U), I(X;V1), I(X;V2), min_z E π(X,Y2,Y3,z(U))).
pub fn eval_outer_tuple(
    c: &OuterCandidate,
    p_x: &Pmf,
    side: &SideInfoSpec,
    payoff: &Payoff,
    tol: f64,
) -> Result<RatePayoffTuple> {
    let report = check_outer_constraints(c, p_x, tol)?;
    if !report.passed {
        return Err(Error::Constraints(Box::new(report)));
    }
    check_side(&c.joint, side)?;
    tuple_for_roles(&c.joint, &[U], &[V1], &[V2], side, payoff)
}

/// Closure values of the inner-bound rates and payoff, with `U := U1`.
///
/// The region itself is open: rates strictly above and payoff strictly below
/// the returned boundary.
pub fn eval_inner_tuple(
    c: &InnerCandidate,
    p_x: &Pmf,
    side: &SideInfoSpec,
    payoff: &Payoff,
    tol: f64,
) -> Result<RatePayoffTuple> {
    let report = check_inner_constraints(c, p_x, tol)?;
    if !report.passed {
        return Err(Error::Constraints(Box::new(report)));
    }
    check_side(&c.joint, side)?;
    tuple_for_roles(&c.joint, &[U1], &[V1], &[V2], side, payoff)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::DEFAULT_STRUCTURAL_TOL;

    fn a(n: &str, k: usize) -> Alphabet {
        Alphabet::new(n, k).unwrap()
    }

    /// X uniform ternary; U1 is U2 (both constant); V1 = V2 = X; Y2 = Y3 = X.
    fn simple_inner(u1_from_x: bool) -> InnerCandidate {
        let vars = vec![
            a(X, 3),
            a(Y2, 3),
            a(Y3, 3),
            a(U1, 3),
            a(U2, 1),
            a(V1, 3),
            a(V2, 3),
        ];
        let j = JointDistribution::from_fn(vars, |d| {
            let x = d[0];
            let u1 = if u1_from_x { x } else { 0 };
            if d[1] == x && d[2] == x && d[3] == u1 && d[5] == x && d[6] == x {
                1.0 / 3.0
            } else {
                0.0
            }
        })
        .unwrap();
        InnerCandidate::new(j).unwrap()
    }

    #[test]
    fn determinism_failure_is_reported() {
        // U1 uniform independent of V1 (V1 constant here).
        let vars = vec![
            a(X, 2),
            a(Y2, 1),
            a(Y3, 1),
            a(U1, 2),
            a(U2, 1),
            a(V1, 1),
            a(V2, 1),
        ];
        let j = JointDistribution::from_fn(vars, |_| 0.25).unwrap();
        let c = InnerCandidate::new(j).unwrap();
        let px = Pmf::uniform(a(X, 2)).unwrap();
        let r = check_inner_constraints(&c, &px, DEFAULT_STRUCTURAL_TOL).unwrap();
        assert!(!r.passed);
        let item = r.item("H(V2,U1|V1) = 0").unwrap();
        assert!(!item.passed);
        assert!((item.measured - 1.0).abs() < 1e-12);
    }

    #[test]
    fn independent_y2_with_constant_v1_passes_markov() {
        let vars = vec![a(X, 2), a(Y2, 2), a(Y3, 1), a(U, 1), a(V1, 1), a(V2, 1)];
        let j = JointDistribution::from_fn(vars, |_| 0.25).unwrap();
        let c = OuterCandidate::new(j).unwrap();
        let px = Pmf::uniform(a(X, 2)).unwrap();
        let r = check_outer_constraints(&c, &px, DEFAULT_STRUCTURAL_TOL).unwrap();
        assert!(r.item("X - V1 - Y2").unwrap().passed);
        assert!(r.passed);
    }

    #[test]
    fn missing_variable_is_an_error() {
        let j = Pmf::uniform(a(X, 2)).unwrap().to_joint();
        assert!(matches!(
            OuterCandidate::new(j),
            Err(Error::UnknownVariable(_))
        ));
    }

    #[test]
    fn constraint_failure_blocks_evaluation() {
        let c = simple_inner(false);
        let px = Pmf::new(a(X, 3), vec![0.5, 0.25, 0.25]).unwrap();
        let side = SideInfoSpec::identity(3, 3, 3).unwrap();
        let payoff = Payoff::LogLoss(
            crate::payoff::LogLossPayoff::new(vec![crate::payoff::SecretVar::X]).unwrap(),
        );
        let e = eval_inner_tuple(&c, &px, &side, &payoff, 1e-9).unwrap_err();
        assert!(matches!(e, Error::Constraints(_)));
    }

    #[test]
    fn full_disclosure_costs_no_key() {
        let c = simple_inner(true);
        let px = Pmf::uniform(a(X, 3)).unwrap();
        let side = SideInfoSpec::identity(3, 3, 3).unwrap();
        let payoff = Payoff::LogLoss(
            crate::payoff::LogLossPayoff::new(vec![crate::payoff::SecretVar::X]).unwrap(),
        );
        // U1 = X violates U1 - U2 - V2 (U2 constant, V2 = X).
        let r = check_inner_constraints(&c, &px, 1e-9).unwrap();
        assert!(!r.item("U1 - U2 - V2").unwrap().passed);
        let t = eval_outer_tuple(&c.as_outer().unwrap(), &px, &side, &payoff, 1e-9).unwrap();
        assert!(t.r0.abs() < 1e-12 && t.pi.abs() < 1e-12);
        assert!((t.r1 - 3f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn candidate_json_roles_are_applied() {
        let c = simple_inner(false);
        let mut v = serde_json::to_value(&c).unwrap();
        v["variables"][3]["name"] = "leak".into();
        v["roles"] = serde_json::json!({"U1": "leak"});
        let back: InnerCandidate = serde_json::from_value(v).unwrap();
        assert_eq!(back, c);
    }
}
