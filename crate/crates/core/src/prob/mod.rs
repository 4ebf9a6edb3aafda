//! Exact finite-alphabet probability.
//!
//! Everything is a dense, row-major table over named variables (last
//! variable varies fastest). Entropies are in bits; `0 log 0 = 0`.

pub(crate) mod joint;
mod measures;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use joint::{JointDistribution, DEFAULT_CELL_CAP};
pub use measures::{entropy_of, StructuralCheck, DEFAULT_STRUCTURAL_TOL};

/// Tolerance on `|sum - 1|` for user-facing pmfs, channel rows and joints.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// A named finite alphabet `{0, .., size-1}` with optional symbol labels.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alphabet {
    pub name: String,
    pub size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

impl Alphabet {
    pub fn new(name: impl Into<String>, size: usize) -> Result<Self> {
        let a = Alphabet {
            name: name.into(),
            size,
            labels: None,
        };
        a.validate()?;
        Ok(a)
    }

    pub fn with_labels<S: Into<String>>(
        name: impl Into<String>,
        labels: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        let a = Alphabet {
            name: name.into(),
            size: labels.len(),
            labels: Some(labels),
        };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason: &str| Error::InvalidAlphabet {
            name: self.name.clone(),
            reason: reason.to_string(),
        };
        if self.name.is_empty() {
            return Err(fail("empty name"));
        }
        if self.size == 0 {
            return Err(fail("size must be at least 1"));
        }
        if let Some(labels) = &self.labels {
            if labels.len() != self.size {
                return Err(fail("label count differs from size"));
            }
            let mut seen = std::collections::HashSet::new();
            if !labels.iter().all(|l| seen.insert(l)) {
                return Err(fail("labels are not distinct"));
            }
        }
        Ok(())
    }

    pub fn renamed(&self, name: impl Into<String>) -> Self {
        Alphabet {
            name: name.into(),
            ..self.clone()
        }
    }

    pub fn label(&self, symbol: usize) -> String {
        match &self.labels {
            Some(l) => l[symbol].clone(),
            None => symbol.to_string(),
        }
    }
}

fn check_pmf(probs: &[f64], what: &str) -> Result<()> {
    if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(Error::InvalidDistribution(format!(
            "{what}: entry {p} is not a nonnegative real"
        )));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::InvalidDistribution(format!("{what}: sums to {sum}")));
    }
    Ok(())
}

/// A probability mass function on one alphabet.
#[derive(Clone, Debug, PartialEq)]
pub struct Pmf {
    alphabet: Alphabet,
    probs: Vec<f64>,
}

impl Pmf {
    pub fn new(alphabet: Alphabet, probs: Vec<f64>) -> Result<Self> {
        alphabet.validate()?;
        if probs.len() != alphabet.size {
            return Err(Error::InvalidDistribution(format!(
                "pmf on `{}` has {} entries for {} symbols",
                alphabet.name,
                probs.len(),
                alphabet.size
            )));
        }
        check_pmf(&probs, &alphabet.name)?;
        Ok(Pmf { alphabet, probs })
    }

    pub fn uniform(alphabet: Alphabet) -> Result<Self> {
        let k = alphabet.size;
        Pmf::new(alphabet, vec![1.0 / k as f64; k])
    }

    pub fn point_mass(alphabet: Alphabet, symbol: usize) -> Result<Self> {
        if symbol >= alphabet.size {
            return Err(Error::InvalidArgument(format!(
                "symbol {symbol} outside `{}`",
                alphabet.name
            )));
        }
        let mut probs = vec![0.0; alphabet.size];
        probs[symbol] = 1.0;
        Pmf::new(alphabet, probs)
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn entropy(&self) -> f64 {
        entropy_of(&self.probs)
    }

    pub fn to_joint(&self) -> JointDistribution {
        JointDistribution::from_parts_unchecked(vec![self.alphabet.clone()], self.probs.clone())
    }
}

/// A conditional pmf of one output given one or more inputs.
///
/// `rows` is indexed by the row-major joint input symbol.
#[derive(Clone, Debug, PartialEq)]
pub struct Channel {
    inputs: Vec<Alphabet>,
    output: Alphabet,
    rows: Vec<Vec<f64>>,
}

impl Channel {
    pub fn new(inputs: Vec<Alphabet>, output: Alphabet, rows: Vec<Vec<f64>>) -> Result<Self> {
        output.validate()?;
        for a in &inputs {
            a.validate()?;
        }
        let expected: usize = inputs.iter().map(|a| a.size).product();
        if rows.len() != expected {
            return Err(Error::InvalidDistribution(format!(
                "channel to `{}` has {} rows, inputs need {expected}",
                output.name,
                rows.len()
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != output.size {
                return Err(Error::InvalidDistribution(format!(
                    "channel row {i} has {} entries for {} outputs",
                    row.len(),
                    output.size
                )));
            }
            check_pmf(row, &format!("channel row {i}"))?;
        }
        Ok(Channel {
            inputs,
            output,
            rows,
        })
    }

    /// Output equals input.
    pub fn identity(input: Alphabet, output_name: impl Into<String>) -> Result<Self> {
        let output = input.renamed(output_name);
        let rows = (0..input.size)
            .map(|i| {
                let mut r = vec![0.0; input.size];
                r[i] = 1.0;
                r
            })
            .collect();
        Channel::new(vec![input], output, rows)
    }

    /// Output drawn from `pmf` whatever the input.
    pub fn constant(inputs: Vec<Alphabet>, pmf: &Pmf) -> Result<Self> {
        let n: usize = inputs.iter().map(|a| a.size).product();
        Channel::new(inputs, pmf.alphabet.clone(), vec![pmf.probs.clone(); n])
    }

    /// Binary symmetric channel with crossover `eps`.
    pub fn binary_symmetric(
        input: Alphabet,
        output_name: impl Into<String>,
        eps: f64,
    ) -> Result<Self> {
        if input.size != 2 || !(0.0..=1.0).contains(&eps) {
            return Err(Error::InvalidArgument(
                "binary symmetric channel needs a binary input and eps in [0,1]".into(),
            ));
        }
        let output = input.renamed(output_name);
        Channel::new(
            vec![input],
            output,
            vec![vec![1.0 - eps, eps], vec![eps, 1.0 - eps]],
        )
    }

    /// Deterministic channel `output = f(input symbols)`.
    pub fn from_fn(
        inputs: Vec<Alphabet>,
        output: Alphabet,
        f: impl Fn(&[usize]) -> usize,
    ) -> Result<Self> {
        let sizes: Vec<usize> = inputs.iter().map(|a| a.size).collect();
        let n: usize = sizes.iter().product();
        let mut digits = vec![0; sizes.len()];
        let mut rows = Vec::with_capacity(n);
        for r in 0..n {
            joint::unflatten(r, &sizes, &mut digits);
            let o = f(&digits);
            if o >= output.size {
                return Err(Error::InvalidArgument(format!(
                    "function value {o} outside `{}`",
                    output.name
                )));
            }
            let mut row = vec![0.0; output.size];
            row[o] = 1.0;
            rows.push(row);
        }
        Channel::new(inputs, output, rows)
    }

    pub fn inputs(&self) -> &[Alphabet] {
        &self.inputs
    }

    pub fn output(&self) -> &Alphabet {
        &self.output
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, input: usize) -> &[f64] {
        &self.rows[input]
    }

    /// Same channel with the output variable renamed.
    pub fn with_output_name(&self, name: impl Into<String>) -> Self {
        Channel {
            output: self.output.renamed(name),
            ..self.clone()
        }
    }
}

// JSON: pmfs and channels share the joint-table layout. A channel's table is
// row-major over (inputs..., output).

#[derive(Serialize, Deserialize)]
pub(crate) struct TableRepr {
    pub variables: Vec<Alphabet>,
    pub table: Vec<f64>,
}

impl Serialize for Pmf {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TableRepr {
            variables: vec![self.alphabet.clone()],
            table: self.probs.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Pmf {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = TableRepr::deserialize(d)?;
        let mut vars = r.variables;
        if vars.len() != 1 {
            return Err(serde::de::Error::custom("a pmf has exactly one variable"));
        }
        Pmf::new(vars.remove(0), r.table).map_err(serde::de::Error::custom)
    }
}

impl Serialize for Channel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut variables = self.inputs.clone();
        variables.push(self.output.clone());
        TableRepr {
            variables,
            table: self.rows.iter().flatten().copied().collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Channel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = TableRepr::deserialize(d)?;
        let mut inputs = r.variables;
        let output = inputs
            .pop()
            .ok_or_else(|| serde::de::Error::custom("a channel needs an output variable"))?;
        if output.size == 0 {
            return Err(serde::de::Error::custom("empty output alphabet"));
        }
        let rows = r.table.chunks(output.size).map(<[f64]>::to_vec).collect();
        Channel::new(inputs, output, rows).map_err(serde::de::Error::custom)
    }
}
