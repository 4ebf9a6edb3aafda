//! Payoff functions and the adversary's best response.
//!
//! The adversary minimizes expected payoff given what it observes. A payoff
//! table is linear in the adversary's mixed strategy, so a deterministic
//! action always attains the minimum. For log-loss the minimizer is the
//! posterior itself and the value is its entropy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::names;
use crate::prob::{entropy_of, Alphabet, Channel, JointDistribution};

/// Relative tolerance when comparing candidate actions.
const TIE_TOL: f64 = 1e-12;

/// π(x, y2, y3, z), extended-real valued: `-inf` allowed, `+inf` and NaN not.
#[derive(Clone, Debug, PartialEq)]
pub struct PayoffTable {
    x: Alphabet,
    y2: Alphabet,
    y3: Alphabet,
    z: Alphabet,
    values: Vec<f64>,
}

impl PayoffTable {
    /// `values` is row-major over (x, y2, y3, z).
    pub fn new(
        x: Alphabet,
        y2: Alphabet,
        y3: Alphabet,
        z: Alphabet,
        values: Vec<f64>,
    ) -> Result<Self> {
        for a in [&x, &y2, &y3, &z] {
            a.validate()?;
        }
        let n = x.size * y2.size * y3.size * z.size;
        if values.len() != n {
            return Err(Error::InvalidPayoff(format!(
                "{} values for {n} cells",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| v.is_nan() || **v == f64::INFINITY) {
            return Err(Error::InvalidPayoff(format!("entry {v} not allowed")));
        }
        Ok(PayoffTable {
            x,
            y2,
            y3,
            z,
            values,
        })
    }

    pub fn from_fn(
        x: Alphabet,
        y2: Alphabet,
        y3: Alphabet,
        z: Alphabet,
        f: impl Fn(usize, usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(x.size * y2.size * y3.size * z.size);
        for a in 0..x.size {
            for b in 0..y2.size {
                for c in 0..y3.size {
                    for d in 0..z.size {
                        values.push(f(a, b, c, d));
                    }
                }
            }
        }
        PayoffTable::new(x, y2, y3, z, values)
    }

    pub fn x(&self) -> &Alphabet {
        &self.x
    }
    pub fn y2(&self) -> &Alphabet {
        &self.y2
    }
    pub fn y3(&self) -> &Alphabet {
        &self.y3
    }
    pub fn z(&self) -> &Alphabet {
        &self.z
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Number of (x, y2, y3) triples.
    pub fn signal_cells(&self) -> usize {
        self.x.size * self.y2.size * self.y3.size
    }

    pub fn value(&self, x: usize, y2: usize, y3: usize, z: usize) -> f64 {
        self.values[((x * self.y2.size + y2) * self.y3.size + y3) * self.z.size + z]
    }

    /// Values for all actions at the flattened triple `xyy`.
    pub fn actions_at(&self, xyy: usize) -> &[f64] {
        let k = self.z.size;
        &self.values[xyy * k..(xyy + 1) * k]
    }

    /// True if some action yields `-inf` at this flattened triple.
    pub fn is_forbidden(&self, xyy: usize) -> bool {
        self.actions_at(xyy).contains(&f64::NEG_INFINITY)
    }
}

/// Which of the network signals are kept secret under log-loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SecretVar {
    X,
    Y2,
    Y3,
}

impl SecretVar {
    pub fn name(self) -> &'static str {
        match self {
            SecretVar::X => names::X,
            SecretVar::Y2 => names::Y2,
            SecretVar::Y3 => names::Y3,
        }
    }

    fn position(self) -> usize {
        self as usize
    }
}

/// π(s, z) = log2 1/z(s) with z a pmf over the secret alphabet.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogLossPayoff {
    secret: Vec<SecretVar>,
}

impl LogLossPayoff {
    pub fn new(mut secret: Vec<SecretVar>) -> Result<Self> {
        secret.sort();
        secret.dedup();
        if secret.is_empty() {
            return Err(Error::InvalidPayoff(
                "log-loss needs a non-empty secret set".into(),
            ));
        }
        Ok(LogLossPayoff { secret })
    }

    pub fn secret(&self) -> &[SecretVar] {
        &self.secret
    }

    pub fn secret_names(&self) -> Vec<&'static str> {
        self.secret.iter().map(|s| s.name()).collect()
    }

    /// Marginalizes a posterior over (x, y2, y3) onto the secret components.
    pub fn project(&self, post: &[f64], dims: [usize; 3]) -> Vec<f64> {
        let sizes: Vec<usize> = self.secret.iter().map(|s| dims[s.position()]).collect();
        let mut out = vec![0.0; sizes.iter().product()];
        let mut i = 0;
        for a in 0..dims[0] {
            for b in 0..dims[1] {
                for c in 0..dims[2] {
                    let p = post[i];
                    i += 1;
                    if p == 0.0 {
                        continue;
                    }
                    let digits = [a, b, c];
                    let flat = self
                        .secret
                        .iter()
                        .zip(&sizes)
                        .fold(0, |acc, (s, &k)| acc * k + digits[s.position()]);
                    out[flat] += p;
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payoff {
    Table(PayoffTable),
    LogLoss(LogLossPayoff),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Action {
    Symbol(usize),
    Distribution(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BestResponse {
    pub action: Action,
    pub value: f64,
    /// The minimum is `-inf`: an event with a `-inf` payoff has positive
    /// probability under the posterior.
    pub forbidden: bool,
}

/// Minimizing action for a posterior over the flattened (x, y2, y3) product.
///
/// Zero-probability cells contribute nothing, even where the payoff is
/// `-inf`. Ties go to the smallest action index.
pub fn best_response(post: &[f64], payoff: &PayoffTable) -> BestResponse {
    debug_assert_eq!(post.len(), payoff.signal_cells());
    let nz = payoff.z.size;
    let mut totals = vec![0.0; nz];
    for (xyy, &p) in post.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for (t, &v) in totals.iter_mut().zip(payoff.actions_at(xyy)) {
            *t += p * v;
        }
    }
    let min = totals.iter().copied().fold(f64::INFINITY, f64::min);
    let action = if min == f64::NEG_INFINITY {
        totals.iter().position(|&t| t == f64::NEG_INFINITY).unwrap()
    } else {
        let cut = min + TIE_TOL * (1.0 + min.abs());
        totals.iter().position(|&t| t <= cut).unwrap()
    };
    BestResponse {
        action: Action::Symbol(action),
        value: totals[action],
        forbidden: min == f64::NEG_INFINITY,
    }
}

/// Log-loss best response: report the posterior, pay its entropy.
pub fn log_loss_best_response(post: &[f64]) -> (Vec<f64>, f64) {
    (post.to_vec(), entropy_of(post))
}

impl Payoff {
    /// Best response to a posterior over the flattened (x, y2, y3) product.
    pub fn respond(&self, post: &[f64], dims: [usize; 3]) -> BestResponse {
        match self {
            Payoff::Table(t) => best_response(post, t),
            Payoff::LogLoss(l) => {
                let (z, value) = log_loss_best_response(&l.project(post, dims));
                BestResponse {
                    action: Action::Distribution(z),
                    value,
                    forbidden: false,
                }
            }
        }
    }

    /// Checks that the payoff's alphabets match the signal sizes.
    pub fn check_dims(&self, dims: [usize; 3]) -> Result<()> {
        if let Payoff::Table(t) = self {
            let have = [t.x.size, t.y2.size, t.y3.size];
            if have != dims {
                return Err(Error::InvalidPayoff(format!(
                    "payoff alphabets {have:?} do not match signal alphabets {dims:?}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AdversaryValue {
    pub value: f64,
    pub forbidden: bool,
}

/// Σ_u P(u) · min_z E[π(X, Y2, Y3, z) | U = u] for the observation set `u`.
///
/// The distribution must contain variables named `X`, `Y2`, `Y3`.
/// Observation variables may include any of those signals.
pub fn adversary_value(
    dist: &JointDistribution,
    observation: &[&str],
    payoff: &Payoff,
) -> Result<AdversaryValue> {
    let signals = [names::X, names::Y2, names::Y3];
    let dims = [
        dist.variable(names::X)?.size,
        dist.variable(names::Y2)?.size,
        dist.variable(names::Y3)?.size,
    ];
    payoff.check_dims(dims)?;

    // Observed signals are copied so the posterior stays over all three.
    let mut d = std::borrow::Cow::Borrowed(dist);
    let mut obs: Vec<String> = Vec::new();
    for &o in observation {
        dist.index_of(o)?;
        if signals.contains(&o) {
            let copy = format!("__obs_{o}");
            if !d.has_variable(&copy) {
                let a = dist.variable(o)?.clone();
                let ch = Channel::identity(a, copy.clone())?;
                d = std::borrow::Cow::Owned(d.attach_channel(&ch, &[o], &copy)?);
            }
            obs.push(copy);
        } else if !obs.iter().any(|s| s == o) {
            obs.push(o.to_string());
        }
    }
    let mut keep: Vec<&str> = obs.iter().map(String::as_str).collect();
    keep.extend(signals);
    let m = d.marginalize(&keep)?;
    let block = dims.iter().product::<usize>();

    let mut value = 0.0;
    let mut forbidden = false;
    for slice in m.table().chunks_exact(block) {
        let pu: f64 = slice.iter().sum();
        if pu <= 0.0 {
            continue;
        }
        let post: Vec<f64> = slice.iter().map(|p| p / pu).collect();
        let r = payoff.respond(&post, dims);
        forbidden |= r.forbidden;
        value += pu * r.value;
    }
    if forbidden {
        value = f64::NEG_INFINITY;
    }
    Ok(AdversaryValue { value, forbidden })
}

// JSON: {"alphabets": {"x","y2","y3","z"}, "values": [.., "-inf", ..]}

#[derive(Serialize, Deserialize)]
struct PayoffAlphabets {
    x: Alphabet,
    y2: Alphabet,
    y3: Alphabet,
    z: Alphabet,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ExtReal {
    Finite(f64),
    Sentinel(String),
}

#[derive(Serialize, Deserialize)]
struct PayoffRepr {
    alphabets: PayoffAlphabets,
    values: Vec<ExtReal>,
}

impl Serialize for PayoffTable {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PayoffRepr {
            alphabets: PayoffAlphabets {
                x: self.x.clone(),
                y2: self.y2.clone(),
                y3: self.y3.clone(),
                z: self.z.clone(),
            },
            values: self
                .values
                .iter()
                .map(|&v| {
                    if v == f64::NEG_INFINITY {
                        ExtReal::Sentinel("-inf".into())
                    } else {
                        ExtReal::Finite(v)
                    }
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PayoffTable {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = PayoffRepr::deserialize(d)?;
        let values = r
            .values
            .into_iter()
            .map(|v| match v {
                ExtReal::Finite(f) => Ok(f),
                ExtReal::Sentinel(s) if s == "-inf" => Ok(f64::NEG_INFINITY),
                ExtReal::Sentinel(s) => Err(serde::de::Error::custom(format!(
                    "payoff entry `{s}` is neither a number nor \"-inf\""
                ))),
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let a = r.alphabets;
        PayoffTable::new(a.x, a.y2, a.y3, a.z, values).map_err(serde::de::Error::custom)
    }
}
