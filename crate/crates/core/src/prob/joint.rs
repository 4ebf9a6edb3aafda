use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{check_pmf, Alphabet, Channel, Pmf, TableRepr, NORMALIZATION_TOL};
use crate::error::{Error, Result};

/// Default upper bound on the number of cells in a dense table.
pub const DEFAULT_CELL_CAP: usize = 100_000_000;

/// Dense joint pmf over an ordered list of uniquely named variables.
#[derive(Clone, Debug, PartialEq)]
pub struct JointDistribution {
    vars: Vec<Alphabet>,
    table: Vec<f64>,
}

pub(crate) fn unflatten(mut flat: usize, sizes: &[usize], digits: &mut [usize]) {
    for k in (0..sizes.len()).rev() {
        digits[k] = flat % sizes[k];
        flat /= sizes[k];
    }
}

pub(crate) fn flatten(digits: &[usize], sizes: &[usize]) -> usize {
    digits
        .iter()
        .zip(sizes)
        .fold(0, |acc, (&d, &s)| acc * s + d)
}

pub(crate) fn check_cells(sizes: impl IntoIterator<Item = usize>, cap: usize) -> Result<usize> {
    let required = sizes
        .into_iter()
        .fold(1u128, |acc, s| acc.saturating_mul(s as u128));
    if required > cap as u128 {
        return Err(Error::CellCap { required, cap });
    }
    Ok(required as usize)
}

impl JointDistribution {
    pub fn new(vars: Vec<Alphabet>, table: Vec<f64>) -> Result<Self> {
        Self::with_cell_cap(vars, table, DEFAULT_CELL_CAP)
    }

    pub fn with_cell_cap(vars: Vec<Alphabet>, table: Vec<f64>, cap: usize) -> Result<Self> {
        let mut seen = HashSet::new();
        for v in &vars {
            v.validate()?;
            if !seen.insert(v.name.as_str()) {
                return Err(Error::DuplicateVariable(v.name.clone()));
            }
        }
        let cells = check_cells(vars.iter().map(|v| v.size), cap)?;
        if table.len() != cells {
            return Err(Error::InvalidDistribution(format!(
                "table has {} entries, variables need {cells}",
                table.len()
            )));
        }
        check_pmf(&table, "joint table")?;
        Ok(JointDistribution { vars, table })
    }

    /// Builds a table by evaluating `f` on every cell, then validates it.
    pub fn from_fn(vars: Vec<Alphabet>, f: impl Fn(&[usize]) -> f64) -> Result<Self> {
        let sizes: Vec<usize> = vars.iter().map(|v| v.size).collect();
        let cells = check_cells(sizes.iter().copied(), DEFAULT_CELL_CAP)?;
        let mut digits = vec![0; sizes.len()];
        let table = (0..cells)
            .map(|i| {
                unflatten(i, &sizes, &mut digits);
                f(&digits)
            })
            .collect();
        Self::new(vars, table)
    }

    /// Builds a table and renormalizes it; for callers that accumulate
    /// probabilities and only need the shape checked.
    pub(crate) fn from_weights(vars: Vec<Alphabet>, mut table: Vec<f64>) -> Result<Self> {
        let total: f64 = table.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::InvalidDistribution("weights have no mass".into()));
        }
        for p in &mut table {
            *p /= total;
        }
        Self::new(vars, table)
    }

    pub(crate) fn from_parts_unchecked(vars: Vec<Alphabet>, table: Vec<f64>) -> Self {
        debug_assert_eq!(table.len(), vars.iter().map(|v| v.size).product::<usize>());
        JointDistribution { vars, table }
    }

    /// The product of independent pmfs, in the given order.
    pub fn independent(pmfs: &[Pmf]) -> Result<Self> {
        let mut d = JointDistribution::from_parts_unchecked(vec![], vec![1.0]);
        for p in pmfs {
            d = d.attach_channel(&Channel::constant(vec![], p)?, &[], &p.alphabet().name)?;
        }
        Ok(d)
    }

    pub fn variables(&self) -> &[Alphabet] {
        &self.vars
    }

    pub fn variable(&self, name: &str) -> Result<&Alphabet> {
        Ok(&self.vars[self.index_of(name)?])
    }

    pub fn names(&self) -> Vec<&str> {
        self.vars.iter().map(|v| v.name.as_str()).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.vars.iter().map(|v| v.size).collect()
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn has_variable(&self, name: &str) -> bool {
        self.vars.iter().any(|v| v.name == name)
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.vars
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    /// Resolves names to positions, dropping repeats.
    pub(crate) fn resolve_set(&self, names: &[&str]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(names.len());
        for n in names {
            let i = self.index_of(n)?;
            if !out.contains(&i) {
                out.push(i);
            }
        }
        Ok(out)
    }

    pub fn prob(&self, digits: &[usize]) -> f64 {
        self.table[flatten(digits, &self.sizes())]
    }

    /// Calls `f(digits, p)` for every cell with positive probability.
    pub fn for_each_positive(&self, mut f: impl FnMut(&[usize], f64)) {
        let sizes = self.sizes();
        let mut digits = vec![0; sizes.len()];
        for (i, &p) in self.table.iter().enumerate() {
            if p > 0.0 {
                unflatten(i, &sizes, &mut digits);
                f(&digits, p);
            }
        }
    }

    /// Marginal table over `keep` (positions), row-major in `keep` order.
    pub(crate) fn marginal_raw(&self, keep: &[usize]) -> Vec<f64> {
        let n = self.vars.len();
        let sizes = self.sizes();
        let mut out_stride = vec![0usize; n];
        let mut acc = 1usize;
        for &i in keep.iter().rev() {
            out_stride[i] = acc;
            acc *= sizes[i];
        }
        let mut out = vec![0.0; acc];
        if n == 0 {
            out[0] = self.table.iter().sum();
            return out;
        }
        // Walk the table in chunks of the last variable.
        let last = n - 1;
        let last_size = sizes[last];
        let last_stride = out_stride[last];
        let mut digits = vec![0usize; n];
        let mut base = 0usize;
        for chunk in self.table.chunks_exact(last_size) {
            if last_stride == 0 {
                out[base] += chunk.iter().sum::<f64>();
            } else {
                for (j, &p) in chunk.iter().enumerate() {
                    out[base + j * last_stride] += p;
                }
            }
            let mut k = last;
            while k > 0 {
                k -= 1;
                digits[k] += 1;
                base += out_stride[k];
                if digits[k] < sizes[k] {
                    break;
                }
                base -= out_stride[k] * sizes[k];
                digits[k] = 0;
            }
        }
        out
    }

    pub fn marginalize(&self, keep: &[&str]) -> Result<Self> {
        if keep.is_empty() {
            return Err(Error::InvalidArgument(
                "marginalize needs at least one variable".into(),
            ));
        }
        let mut idx = Vec::with_capacity(keep.len());
        for k in keep {
            let i = self.index_of(k)?;
            if idx.contains(&i) {
                return Err(Error::DuplicateVariable(k.to_string()));
            }
            idx.push(i);
        }
        let vars = idx.iter().map(|&i| self.vars[i].clone()).collect();
        Ok(JointDistribution::from_parts_unchecked(
            vars,
            self.marginal_raw(&idx),
        ))
    }

    /// Pmf of a single variable.
    pub fn pmf(&self, name: &str) -> Result<Pmf> {
        let i = self.index_of(name)?;
        let probs = self.marginal_raw(&[i]);
        let total: f64 = probs.iter().sum();
        Pmf::new(
            self.vars[i].clone(),
            probs.iter().map(|p| p / total).collect(),
        )
    }

    /// Restricts to the event `evidence` and renormalizes. All variables are kept.
    pub fn condition(&self, evidence: &[(&str, usize)]) -> Result<Self> {
        let mut fixed = Vec::with_capacity(evidence.len());
        for &(name, sym) in evidence {
            let i = self.index_of(name)?;
            if sym >= self.vars[i].size {
                return Err(Error::InvalidArgument(format!(
                    "symbol {sym} outside `{name}`"
                )));
            }
            fixed.push((i, sym));
        }
        let sizes = self.sizes();
        let mut digits = vec![0; sizes.len()];
        let mut table = vec![0.0; self.table.len()];
        let mut mass = 0.0;
        for (c, &p) in self.table.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            unflatten(c, &sizes, &mut digits);
            if fixed.iter().all(|&(i, s)| digits[i] == s) {
                table[c] = p;
                mass += p;
            }
        }
        if mass <= 0.0 {
            return Err(Error::ZeroProbabilityEvidence);
        }
        table.iter_mut().for_each(|p| *p /= mass);
        Ok(JointDistribution::from_parts_unchecked(
            self.vars.clone(),
            table,
        ))
    }

    /// Adjoins `new_var` drawn through `channel` from the `inputs` variables.
    ///
    /// The new variable is appended last and is conditionally independent of
    /// everything else given the inputs.
    pub fn attach_channel(
        &self,
        channel: &Channel,
        inputs: &[&str],
        new_var: &str,
    ) -> Result<Self> {
        if self.has_variable(new_var) {
            return Err(Error::DuplicateVariable(new_var.to_string()));
        }
        if inputs.len() != channel.inputs().len() {
            return Err(Error::InvalidArgument(format!(
                "channel takes {} inputs, {} given",
                channel.inputs().len(),
                inputs.len()
            )));
        }
        let mut idx = Vec::with_capacity(inputs.len());
        for (name, a) in inputs.iter().zip(channel.inputs()) {
            let i = self.index_of(name)?;
            if self.vars[i].size != a.size {
                return Err(Error::InvalidArgument(format!(
                    "`{name}` has {} symbols, channel input expects {}",
                    self.vars[i].size, a.size
                )));
            }
            idx.push(i);
        }
        let out_size = channel.output().size;
        check_cells(self.sizes().into_iter().chain([out_size]), DEFAULT_CELL_CAP)?;

        let sizes = self.sizes();
        let in_sizes: Vec<usize> = idx.iter().map(|&i| sizes[i]).collect();
        let mut digits = vec![0; sizes.len()];
        let mut in_digits = vec![0; idx.len()];
        let mut table = vec![0.0; self.table.len() * out_size];
        for (c, &p) in self.table.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            unflatten(c, &sizes, &mut digits);
            for (j, &i) in idx.iter().enumerate() {
                in_digits[j] = digits[i];
            }
            let row = channel.row(flatten(&in_digits, &in_sizes));
            let dst = &mut table[c * out_size..(c + 1) * out_size];
            for (d, &w) in dst.iter_mut().zip(row) {
                *d = p * w;
            }
        }
        let mut vars = self.vars.clone();
        vars.push(channel.output().renamed(new_var));
        Ok(JointDistribution::from_parts_unchecked(vars, table))
    }

    /// Adjoins `output` as a deterministic function of `inputs`.
    pub fn attach_function(
        &self,
        inputs: &[&str],
        output: Alphabet,
        f: impl Fn(&[usize]) -> usize,
    ) -> Result<Self> {
        let in_alphas = inputs
            .iter()
            .map(|n| self.variable(n).cloned())
            .collect::<Result<Vec<_>>>()?;
        let name = output.name.clone();
        let ch = Channel::from_fn(in_alphas, output, f)?;
        self.attach_channel(&ch, inputs, &name)
    }

    /// Drops symbols of the named variables that have zero probability.
    pub fn compact(&self, names: &[&str]) -> Result<Self> {
        let idx = self.resolve_set(names)?;
        let sizes = self.sizes();
        let mut keep_maps: Vec<Option<Vec<Option<usize>>>> = vec![None; sizes.len()];
        let mut vars = self.vars.clone();
        for &i in &idx {
            let m = self.marginal_raw(&[i]);
            let mut map = vec![None; sizes[i]];
            let mut next = 0;
            let mut labels = Vec::new();
            for (s, &p) in m.iter().enumerate() {
                if p > 0.0 {
                    map[s] = Some(next);
                    labels.push(self.vars[i].label(s));
                    next += 1;
                }
            }
            vars[i].size = next.max(1);
            vars[i].labels = self.vars[i].labels.as_ref().map(|_| labels);
            keep_maps[i] = Some(map);
        }
        let new_sizes: Vec<usize> = vars.iter().map(|v| v.size).collect();
        let mut table = vec![0.0; new_sizes.iter().product()];
        let mut new_digits = vec![0; sizes.len()];
        self.for_each_positive(|digits, p| {
            for (k, &d) in digits.iter().enumerate() {
                new_digits[k] = match &keep_maps[k] {
                    Some(m) => m[d].expect("positive cell has positive marginal"),
                    None => d,
                };
            }
            table[flatten(&new_digits, &new_sizes)] += p;
        });
        Ok(JointDistribution::from_parts_unchecked(vars, table))
    }

    /// Renames variable `from` to `to`.
    pub fn rename(&self, from: &str, to: &str) -> Result<Self> {
        let i = self.index_of(from)?;
        if from != to && self.has_variable(to) {
            return Err(Error::DuplicateVariable(to.to_string()));
        }
        let mut d = self.clone();
        d.vars[i].name = to.to_string();
        Ok(d)
    }

    /// Relabels the symbols of `name` through the permutation `perm`
    /// (old symbol `s` becomes `perm[s]`).
    pub fn permute_symbols(&self, name: &str, perm: &[usize]) -> Result<Self> {
        let i = self.index_of(name)?;
        let size = self.vars[i].size;
        let mut seen = vec![false; size];
        if perm.len() != size
            || !perm
                .iter()
                .all(|&p| p < size && !std::mem::replace(&mut seen[p], true))
        {
            return Err(Error::InvalidArgument(format!(
                "not a permutation of `{name}`"
            )));
        }
        let sizes = self.sizes();
        let mut table = vec![0.0; self.table.len()];
        let mut nd = vec![0; sizes.len()];
        self.for_each_positive(|digits, p| {
            nd.copy_from_slice(digits);
            nd[i] = perm[digits[i]];
            table[flatten(&nd, &sizes)] = p;
        });
        let mut vars = self.vars.clone();
        if let Some(labels) = &self.vars[i].labels {
            let mut nl = labels.clone();
            for (s, l) in labels.iter().enumerate() {
                nl[perm[s]] = l.clone();
            }
            vars[i].labels = Some(nl);
        }
        Ok(JointDistribution::from_parts_unchecked(vars, table))
    }

    /// Total variation distance to a pmf on the same single variable layout.
    pub fn total_variation(&self, other: &JointDistribution) -> Result<f64> {
        if self.sizes() != other.sizes() {
            return Err(Error::InvalidArgument(
                "tables have different shapes".into(),
            ));
        }
        Ok(0.5
            * self
                .table
                .iter()
                .zip(&other.table)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>())
    }

    pub fn total_mass(&self) -> f64 {
        self.table.iter().sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.total_mass() - 1.0).abs() <= NORMALIZATION_TOL
    }
}

impl Serialize for JointDistribution {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TableRepr {
            variables: self.vars.clone(),
            table: self.table.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for JointDistribution {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = TableRepr::deserialize(d)?;
        JointDistribution::new(r.variables, r.table).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(names: &[&str]) -> Vec<Alphabet> {
        names
            .iter()
            .map(|n| Alphabet::new(*n, 2).unwrap())
            .collect()
    }

    fn sample3() -> JointDistribution {
        let t = [0.05, 0.1, 0.15, 0.2, 0.02, 0.08, 0.1, 0.3];
        JointDistribution::new(bits(&["A", "B", "C"]), t.to_vec()).unwrap()
    }

    #[test]
    fn marginal_matches_direct_sum() {
        let d = sample3();
        let m = d.marginalize(&["C", "A"]).unwrap();
        assert_eq!(m.names(), vec!["C", "A"]);
        // P(C=0, A=1) = t[100] + t[110]
        assert!((m.prob(&[0, 1]) - (0.02 + 0.1)).abs() < 1e-15);
        assert!((m.prob(&[1, 0]) - (0.1 + 0.2)).abs() < 1e-15);
    }

    #[test]
    fn marginalize_all_is_identity() {
        let d = sample3();
        assert_eq!(d.marginalize(&["A", "B", "C"]).unwrap(), d);
    }

    #[test]
    fn condition_on_full_assignment_is_point_mass() {
        let d = sample3();
        let c = d.condition(&[("A", 1), ("B", 0), ("C", 1)]).unwrap();
        assert_eq!(c.prob(&[1, 0, 1]), 1.0);
        assert!((c.total_mass() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_probability_evidence_is_an_error() {
        let d = JointDistribution::new(bits(&["A"]), vec![1.0, 0.0]).unwrap();
        assert!(matches!(
            d.condition(&[("A", 1)]),
            Err(Error::ZeroProbabilityEvidence)
        ));
    }

    #[test]
    fn duplicate_names_rejected() {
        let r = JointDistribution::new(bits(&["A", "A"]), vec![0.25; 4]);
        assert!(matches!(r, Err(Error::DuplicateVariable(_))));
    }

    #[test]
    fn cell_cap_enforced() {
        let vars = vec![
            Alphabet::new("A", 10).unwrap(),
            Alphabet::new("B", 10).unwrap(),
        ];
        let r = JointDistribution::with_cell_cap(vars, vec![0.01; 100], 50);
        assert!(matches!(
            r,
            Err(Error::CellCap {
                required: 100,
                cap: 50
            })
        ));
    }

    #[test]
    fn attach_name_collision() {
        let d = sample3();
        let ch = Channel::identity(Alphabet::new("A", 2).unwrap(), "A").unwrap();
        assert!(matches!(
            d.attach_channel(&ch, &["A"], "B"),
            Err(Error::DuplicateVariable(_))
        ));
    }

    #[test]
    fn compact_drops_empty_symbols() {
        let vars = vec![Alphabet::new("A", 3).unwrap()];
        let d = JointDistribution::new(vars, vec![0.5, 0.0, 0.5]).unwrap();
        let c = d.compact(&["A"]).unwrap();
        assert_eq!(c.sizes(), vec![2]);
        assert_eq!(c.table(), &[0.5, 0.5]);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let vars = vec![
            Alphabet::with_labels("X", ["1", "2", "3"]).unwrap(),
            Alphabet::new("Y", 2).unwrap(),
        ];
        let table = vec![0.1, 1.0 / 7.0, 0.2, 0.05, 1.0 / 3.0, 0.0];
        let s: f64 = table.iter().sum();
        let table: Vec<f64> = table.iter().map(|p| p / s).collect();
        let d = JointDistribution::new(vars, table).unwrap();
        let json = serde_json::to_string(&d).unwrap();
        let back: JointDistribution = serde_json::from_str(&json).unwrap();
        assert_eq!(d, back);
        assert!(json.starts_with("{\"variables\":[{\"name\":\"X\",\"size\":3,\"labels\""));
    }
}
