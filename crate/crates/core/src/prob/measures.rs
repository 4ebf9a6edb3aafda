//! Shannon measures over variable sets of a [`JointDistribution`].
//!
//! Sets are given by variable name. Conditioning sets may overlap the other
//! arguments (the overlap is simply conditioned away); the two arguments of a
//! mutual information must be disjoint.

use serde::Serialize;

use super::JointDistribution;
use crate::error::{Error, Result};

/// Default tolerance, in bits, for Markov and determinism checks.
pub const DEFAULT_STRUCTURAL_TOL: f64 = 1e-9;

/// Small negative values from cancellation are clamped to zero.
const CLAMP_TOL: f64 = 1e-10;

/// Entropy in bits of a (not necessarily normalized) vector of masses.
pub fn entropy_of(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.log2())
        .sum::<f64>()
}

fn clamp(v: f64) -> f64 {
    debug_assert!(v >= -CLAMP_TOL * 1e3, "information measure {v} is negative");
    v.max(0.0)
}

/// Outcome of a structural check with the measured value in bits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StructuralCheck {
    pub holds: bool,
    pub value: f64,
}

fn union(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut u = a.to_vec();
    for &i in b {
        if !u.contains(&i) {
            u.push(i);
        }
    }
    u
}

impl JointDistribution {
    fn entropy_idx(&self, idx: &[usize]) -> f64 {
        if idx.is_empty() {
            return 0.0;
        }
        let mut sorted = idx.to_vec();
        sorted.sort_unstable();
        entropy_of(&self.marginal_raw(&sorted))
    }

    fn disjoint(&self, a: &[usize], b: &[usize]) -> Result<()> {
        match a.iter().find(|i| b.contains(i)) {
            Some(&i) => Err(Error::Overlap(self.variables()[i].name.clone())),
            None => Ok(()),
        }
    }

    /// H(targets) in bits.
    pub fn entropy(&self, targets: &[&str]) -> Result<f64> {
        let t = self.resolve_set(targets)?;
        Ok(self.entropy_idx(&t))
    }

    /// H(targets | given) in bits.
    pub fn conditional_entropy(&self, targets: &[&str], given: &[&str]) -> Result<f64> {
        let t = self.resolve_set(targets)?;
        let g = self.resolve_set(given)?;
        Ok(clamp(
            self.entropy_idx(&union(&t, &g)) - self.entropy_idx(&g),
        ))
    }

    /// I(a; b) in bits.
    pub fn mutual_information(&self, a: &[&str], b: &[&str]) -> Result<f64> {
        self.conditional_mutual_information(a, b, &[])
    }

    /// I(a; b | c) in bits.
    pub fn conditional_mutual_information(
        &self,
        a: &[&str],
        b: &[&str],
        c: &[&str],
    ) -> Result<f64> {
        let a = self.resolve_set(a)?;
        let b = self.resolve_set(b)?;
        let c = self.resolve_set(c)?;
        self.disjoint(&a, &b)?;
        let ac = union(&a, &c);
        let bc = union(&b, &c);
        let abc = union(&ac, &b);
        Ok(clamp(
            self.entropy_idx(&ac) + self.entropy_idx(&bc)
                - self.entropy_idx(&abc)
                - self.entropy_idx(&c),
        ))
    }

    /// `a - b - c` holds iff I(a; c | b) <= tol.
    pub fn is_markov(
        &self,
        a: &[&str],
        b: &[&str],
        c: &[&str],
        tol: f64,
    ) -> Result<StructuralCheck> {
        let value = self.conditional_mutual_information(a, c, b)?;
        Ok(StructuralCheck {
            holds: value <= tol,
            value,
        })
    }

    /// `a` is a function of `given` iff H(a | given) <= tol.
    pub fn is_deterministic(
        &self,
        a: &[&str],
        given: &[&str],
        tol: f64,
    ) -> Result<StructuralCheck> {
        let value = self.conditional_entropy(a, given)?;
        Ok(StructuralCheck {
            holds: value <= tol,
            value,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::{Alphabet, Channel, Pmf};

    fn uniform(name: &str, k: usize) -> Pmf {
        Pmf::uniform(Alphabet::new(name, k).unwrap()).unwrap()
    }

    #[test]
    fn entropy_examples() {
        let d = uniform("X", 3).to_joint();
        assert!((d.entropy(&["X"]).unwrap() - 1.584962500721156).abs() < 1e-12);

        let pm = Pmf::point_mass(Alphabet::new("X", 4).unwrap(), 2)
            .unwrap()
            .to_joint();
        assert_eq!(pm.entropy(&["X"]).unwrap(), 0.0);

        let two = JointDistribution::independent(&[uniform("A", 2), uniform("B", 2)]).unwrap();
        assert!((two.entropy(&["A", "B"]).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(two.entropy(&[]).unwrap(), 0.0);
    }

    #[test]
    fn unknown_variable_is_named() {
        let d = uniform("X", 3).to_joint();
        let err = d.entropy(&["Q"]).unwrap_err();
        assert!(err.to_string().contains("`Q`"));
    }

    #[test]
    fn conditional_entropy_examples() {
        let d = JointDistribution::independent(&[uniform("A", 3), uniform("B", 2)]).unwrap();
        assert_eq!(d.conditional_entropy(&["A"], &["A"]).unwrap(), 0.0);
        let h = d.conditional_entropy(&["A"], &["B"]).unwrap();
        assert!((h - d.entropy(&["A"]).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn mutual_information_examples() {
        let d = JointDistribution::independent(&[uniform("A", 3), uniform("B", 2)]).unwrap();
        assert!(d.mutual_information(&["A"], &["B"]).unwrap().abs() < 1e-12);
        assert_eq!(
            d.conditional_mutual_information(&["A"], &["B"], &["B"])
                .unwrap(),
            0.0
        );
        assert!(matches!(
            d.mutual_information(&["A", "B"], &["B"]),
            Err(Error::Overlap(_))
        ));
    }

    #[test]
    fn attach_examples() {
        let x = uniform("X", 3).to_joint();
        let id = Channel::identity(x.variable("X").unwrap().clone(), "W1").unwrap();
        let d = x.attach_channel(&id, &["X"], "W1").unwrap();
        assert_eq!(d.conditional_entropy(&["W1"], &["X"]).unwrap(), 0.0);

        let noise =
            Channel::constant(vec![x.variable("X").unwrap().clone()], &uniform("N", 4)).unwrap();
        let d = x.attach_channel(&noise, &["X"], "N").unwrap();
        assert!(d.mutual_information(&["X"], &["N"]).unwrap() < 1e-12);

        let b = uniform("B", 2).to_joint();
        let bsc = Channel::binary_symmetric(b.variable("B").unwrap().clone(), "O", 0.5).unwrap();
        let d = Pmf::new(Alphabet::new("B", 2).unwrap(), vec![0.9, 0.1])
            .unwrap()
            .to_joint()
            .attach_channel(&bsc, &["B"], "O")
            .unwrap();
        let o = d.pmf("O").unwrap();
        assert!((o.probs()[0] - 0.5).abs() < 1e-15);
        assert!(d.mutual_information(&["B"], &["O"]).unwrap() < 1e-12);
    }

    #[test]
    fn markov_and_determinism() {
        let d = JointDistribution::independent(&[uniform("A", 3), uniform("B", 2)]).unwrap();
        let m = d.is_markov(&["A"], &["B"], &["B"], 0.0).unwrap();
        assert!(m.holds);
        let x = uniform("X", 4).to_joint();
        let x = x
            .attach_function(&["X"], Alphabet::new("P", 2).unwrap(), |d| d[0] % 2)
            .unwrap();
        let c = x
            .is_deterministic(&["P"], &["X"], DEFAULT_STRUCTURAL_TOL)
            .unwrap();
        assert!(c.holds && c.value == 0.0);
        let c = x
            .is_deterministic(&["X"], &["P"], DEFAULT_STRUCTURAL_TOL)
            .unwrap();
        assert!(!c.holds);
        assert!((c.value - 1.0).abs() < 1e-12);
    }
}
