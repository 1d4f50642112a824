//! Sparse multivariate polynomials with exact rational complex coefficients.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::scalar::{ExactComplex, Real, Ring};

/// A polynomial variable: either the `(row, col)` entry of the unipotent
/// factor with index `factor`, or a named free symbol.
///
/// The derived order is lexicographic on `(factor, row, col)` for
/// parameters, with free symbols after all parameters ordered by name.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarId {
    Param { factor: usize, row: usize, col: usize },
    Free(String),
}

impl VarId {
    /// Parameter variable; odd factors are lower triangular, even ones upper.
    pub fn param(factor: usize, row: usize, col: usize) -> Result<Self> {
        if factor == 0 || row == 0 || col == 0 {
            return Err(Error::InvalidArgument(
                "factor, row and col are 1-based".into(),
            ));
        }
        if row == col {
            return Err(Error::Parity(format!("diagonal entry ({row},{col}) is not a parameter")));
        }
        let lower = factor % 2 == 1;
        if lower != (row > col) {
            return Err(Error::Parity(format!(
                "entry ({row},{col}) does not belong to factor {factor} ({})",
                if lower { "lower" } else { "upper" }
            )));
        }
        Ok(VarId::Param { factor, row, col })
    }

    pub fn free(name: impl Into<String>) -> Self {
        VarId::Free(name.into())
    }

    pub fn factor(&self) -> Option<usize> {
        match self {
            VarId::Param { factor, .. } => Some(*factor),
            VarId::Free(_) => None,
        }
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VarId::Param { factor, row, col } => write!(f, "z[{row},{col};{factor}]"),
            VarId::Free(name) => f.write_str(name),
        }
    }
}

impl FromStr for VarId {
    type Err = Error;

    /// Accepts `z[row,col;factor]` or a bare identifier for a free symbol.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(body) = s.strip_prefix("z[").and_then(|r| r.strip_suffix(']')) {
            let bad = || Error::Parse(format!("invalid variable '{s}'"));
            let (rc, k) = body.split_once(';').ok_or_else(bad)?;
            let (r, c) = rc.split_once(',').ok_or_else(bad)?;
            let parse = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
            return VarId::param(parse(k)?, parse(r)?, parse(c)?);
        }
        let valid = !s.is_empty()
            && s.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_')
            && s.chars().all(|c| c.is_alphanumeric() || c == '_');
        if valid {
            Ok(VarId::Free(s.to_string()))
        } else {
            Err(Error::Parse(format!("invalid variable '{s}'")))
        }
    }
}

/// Product of variables with positive exponents, sorted by variable.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Monomial(Vec<(VarId, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn var(v: VarId) -> Self {
        Monomial(vec![(v, 1)])
    }

    /// Builds a monomial from arbitrary factors, merging repeats and dropping
    /// zero exponents.
    pub fn from_factors(factors: impl IntoIterator<Item = (VarId, u32)>) -> Self {
        let mut map: BTreeMap<VarId, u32> = BTreeMap::new();
        for (v, e) in factors {
            *map.entry(v).or_insert(0) += e;
        }
        Monomial(map.into_iter().filter(|(_, e)| *e > 0).collect())
    }

    pub fn factors(&self) -> &[(VarId, u32)] {
        &self.0
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|(_, e)| e).sum()
    }

    pub fn exponent(&self, v: &VarId) -> u32 {
        self.0
            .binary_search_by(|(w, _)| w.cmp(v))
            .map(|i| self.0[i].1)
            .unwrap_or(0)
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => {
                    out.push(a[i].clone());
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j].clone());
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push((a[i].0.clone(), a[i].1 + b[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Monomial(out)
    }

    /// Lowers the exponent of `v` by one; `None` if `v` does not occur.
    fn without_one(&self, v: &VarId) -> Option<(u32, Monomial)> {
        let i = self.0.binary_search_by(|(w, _)| w.cmp(v)).ok()?;
        let e = self.0[i].1;
        let mut out = self.0.clone();
        if e == 1 {
            out.remove(i);
        } else {
            out[i].1 -= 1;
        }
        Some((e, Monomial(out)))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("1");
        }
        for (idx, (v, e)) in self.0.iter().enumerate() {
            if idx > 0 {
                f.write_str("*")?;
            }
            if *e == 1 {
                write!(f, "{v}")?;
            } else {
                write!(f, "{v}^{e}")?;
            }
        }
        Ok(())
    }
}

/// Sparse polynomial; zero coefficients are never stored.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Poly {
    terms: BTreeMap<Monomial, ExactComplex>,
}

impl Poly {
    pub fn constant(c: ExactComplex) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(Monomial::one(), c);
        }
        Poly { terms }
    }

    pub fn int(c: i64) -> Self {
        Poly::constant(ExactComplex::from_int(c))
    }

    pub fn var(v: VarId) -> Self {
        Poly::term(ExactComplex::one(), Monomial::var(v))
    }

    pub fn term(c: ExactComplex, m: Monomial) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        Poly { terms }
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Monomial, ExactComplex)>) -> Self {
        let mut p = Poly::zero();
        for (m, c) in terms {
            p.add_term(m, &c);
        }
        p
    }

    fn add_term(&mut self, m: Monomial, c: &ExactComplex) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c.clone());
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    /// Terms in canonical (lexicographic monomial) order.
    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &ExactComplex)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// The value if this polynomial is constant.
    pub fn as_constant(&self) -> Option<ExactComplex> {
        match self.terms.len() {
            0 => Some(ExactComplex::zero()),
            1 => self.terms.get(&Monomial::one()).cloned(),
            _ => None,
        }
    }

    pub fn coefficient(&self, m: &Monomial) -> ExactComplex {
        self.terms.get(m).cloned().unwrap_or_else(ExactComplex::zero)
    }

    pub fn variables(&self) -> BTreeSet<VarId> {
        self.terms
            .keys()
            .flat_map(|m| m.0.iter().map(|(v, _)| v.clone()))
            .collect()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn degree_in(&self, v: &VarId) -> u32 {
        self.terms.keys().map(|m| m.exponent(v)).max().unwrap_or(0)
    }

    pub fn scale(&self, c: &ExactComplex) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(m, a)| (m.clone(), a * c))
                .collect(),
        }
    }

    /// Exact formal partial derivative.
    pub fn partial_derivative(&self, v: &VarId) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            if let Some((e, rest)) = m.without_one(v) {
                out.add_term(rest, &(c * &ExactComplex::from_int(e as i64)));
            }
        }
        out
    }

    /// Whether every exponent is at most one; also returns the offending
    /// variables in canonical order.
    pub fn is_multilinear(&self) -> (bool, Vec<VarId>) {
        let offenders: BTreeSet<VarId> = self
            .terms
            .keys()
            .flat_map(|m| m.0.iter().filter(|(_, e)| *e > 1).map(|(v, _)| v.clone()))
            .collect();
        (offenders.is_empty(), offenders.into_iter().collect())
    }

    /// Floating evaluation. Powers of each variable are tabulated once and
    /// reused across terms.
    pub fn evaluate<F: Real>(&self, assignment: &BTreeMap<VarId, Complex<F>>) -> Result<Complex<F>> {
        let vars = self.variables();
        let missing: Vec<VarId> = vars
            .iter()
            .filter(|v| !assignment.contains_key(*v))
            .cloned()
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingVariables(missing));
        }
        let order: Vec<VarId> = vars.into_iter().collect();
        let values: Vec<Complex<F>> = order.iter().map(|v| assignment[v]).collect();
        Ok(self.compile::<F>(&order)?.eval(&values))
    }

    /// Exact evaluation with rational complex values.
    pub fn evaluate_exact(&self, assignment: &BTreeMap<VarId, ExactComplex>) -> Result<ExactComplex> {
        let missing: Vec<VarId> = self
            .variables()
            .into_iter()
            .filter(|v| !assignment.contains_key(v))
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingVariables(missing));
        }
        let mut acc = ExactComplex::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (v, e) in &m.0 {
                for _ in 0..*e {
                    t *= &assignment[v];
                }
            }
            acc += &t;
        }
        Ok(acc)
    }

    /// Replaces `v` by the polynomial `value`.
    pub fn substitute(&self, v: &VarId, value: &Poly) -> Poly {
        let mut out = Poly::zero();
        let mut powers: Vec<Poly> = vec![Poly::one()];
        for (m, c) in &self.terms {
            let e = m.exponent(v) as usize;
            if e == 0 {
                out.add_term(m.clone(), c);
                continue;
            }
            while powers.len() <= e {
                let next = &powers[powers.len() - 1] * value;
                powers.push(next);
            }
            let rest = Monomial(m.0.iter().filter(|(w, _)| w != v).cloned().collect());
            let piece = &Poly::term(c.clone(), rest) * &powers[e];
            out = &out + &piece;
        }
        out
    }

    /// Sets all listed variables to zero.
    pub fn restrict_zero(&self, vars: &BTreeSet<VarId>) -> Poly {
        Poly {
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| !m.0.iter().any(|(v, _)| vars.contains(v)))
                .map(|(m, c)| (m.clone(), c.clone()))
                .collect(),
        }
    }

    /// Index-based evaluator for repeated floating evaluation.
    pub fn compile<F: Real>(&self, order: &[VarId]) -> Result<CompiledPoly<F>> {
        let index: BTreeMap<&VarId, usize> = order.iter().enumerate().map(|(i, v)| (v, i)).collect();
        let mut missing = BTreeSet::new();
        let mut terms = Vec::with_capacity(self.terms.len());
        for (m, c) in &self.terms {
            let mut mono = Vec::with_capacity(m.0.len());
            for (v, e) in &m.0 {
                match index.get(v) {
                    Some(&i) => mono.push((i, *e)),
                    None => {
                        missing.insert(v.clone());
                    }
                }
            }
            terms.push((c.to_complex::<F>(), mono));
        }
        if !missing.is_empty() {
            return Err(Error::MissingVariables(missing.into_iter().collect()));
        }
        Ok(CompiledPoly { terms })
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (idx, (m, c)) in self.terms.iter().enumerate() {
            if idx > 0 {
                f.write_str(" + ")?;
            }
            if m.is_one() {
                write!(f, "{c}")?;
            } else if c.is_one() {
                write!(f, "{m}")?;
            } else {
                write!(f, "{c}*{m}")?;
            }
        }
        Ok(())
    }
}

/// A polynomial with floating coefficients over a fixed variable order.
#[derive(Clone, Debug)]
pub struct CompiledPoly<F: Real> {
    terms: Vec<(Complex<F>, Vec<(usize, u32)>)>,
}

impl<F: Real> CompiledPoly<F> {
    pub fn eval(&self, x: &[Complex<F>]) -> Complex<F> {
        let mut acc = Complex::new(F::zero(), F::zero());
        for (c, mono) in &self.terms {
            let mut t = *c;
            for &(i, e) in mono {
                for _ in 0..e {
                    t *= x[i];
                }
            }
            acc += t;
        }
        acc
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }
}

impl Zero for Poly {
    fn zero() -> Self {
        Poly { terms: BTreeMap::new() }
    }
    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

impl One for Poly {
    fn one() -> Self {
        Poly::int(1)
    }
}

impl<'a> Add<&'a Poly> for &'a Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let (big, small) = if self.terms.len() >= rhs.terms.len() {
            (self, rhs)
        } else {
            (rhs, self)
        };
        let mut out = big.clone();
        for (m, c) in &small.terms {
            out.add_term(m.clone(), c);
        }
        out
    }
}

impl<'a> Sub<&'a Poly> for &'a Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), &-c);
        }
        out
    }
}

impl<'a> Mul<&'a Poly> for &'a Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.add_term(ma.mul(mb), &(ca * cb));
            }
        }
        out
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }
}

impl Neg for Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        -&self
    }
}

impl Add for Poly {
    type Output = Poly;
    fn add(self, rhs: Poly) -> Poly {
        &self + &rhs
    }
}

impl Sub for Poly {
    type Output = Poly;
    fn sub(self, rhs: Poly) -> Poly {
        &self - &rhs
    }
}

impl Mul for Poly {
    type Output = Poly;
    fn mul(self, rhs: Poly) -> Poly {
        &self * &rhs
    }
}

impl From<ExactComplex> for Poly {
    fn from(c: ExactComplex) -> Self {
        Poly::constant(c)
    }
}

impl From<VarId> for Poly {
    fn from(v: VarId) -> Self {
        Poly::var(v)
    }
}

impl Ring for Poly {}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(i: usize) -> Poly {
        Poly::var(VarId::free(format!("x{i}")))
    }

    fn xv(i: usize) -> VarId {
        VarId::free(format!("x{i}"))
    }

    #[test]
    fn difference_of_squares() {
        let p = &(&x(1) + &Poly::one()) * &(&x(1) - &Poly::one());
        let expected = &(&x(1) * &x(1)) - &Poly::one();
        assert_eq!(p, expected);
    }

    #[test]
    fn cohn_determinant_is_one() {
        let (z1, z2) = (x(1), x(2));
        let zz = &z1 * &z2;
        let a = &Poly::one() - &zz;
        let d = &Poly::one() + &zz;
        let b = &z1 * &z1;
        let c = -(&z2 * &z2);
        assert_eq!(&(&a * &d) - &(&b * &c), Poly::one());
    }

    #[test]
    fn derivatives() {
        let p = &x(1) * &x(2);
        assert_eq!(p.partial_derivative(&xv(1)), x(2));
        assert!(Poly::int(7).partial_derivative(&xv(1)).is_zero());
        let cube = &(&x(1) * &x(1)) * &x(1);
        assert_eq!(cube.partial_derivative(&xv(1)), (&x(1) * &x(1)).scale(&ExactComplex::from_int(3)));
    }

    #[test]
    fn evaluation() {
        let p = &Poly::one() + &(&x(1) * &x(2));
        let mut a = BTreeMap::new();
        a.insert(xv(1), Complex::new(-1.0, 0.0));
        a.insert(xv(2), Complex::new(-4.0, 0.0));
        assert_eq!(p.evaluate(&a).unwrap(), Complex::new(5.0, 0.0));
        assert_eq!(Poly::one().evaluate::<f64>(&BTreeMap::new()).unwrap(), Complex::new(1.0, 0.0));
        a.remove(&xv(2));
        assert_eq!(p.evaluate(&a), Err(Error::MissingVariables(vec![xv(2)])));
    }

    #[test]
    fn multilinearity() {
        let p = &(&x(1) * &x(2)) + &x(3);
        assert_eq!(p.is_multilinear(), (true, vec![]));
        let q = &x(1) * &x(1);
        assert_eq!(q.is_multilinear(), (false, vec![xv(1)]));
    }

    #[test]
    fn substitution_and_restriction() {
        let p = &(&x(1) * &x(2)) + &x(1);
        let s = p.substitute(&xv(1), &(&x(3) + &Poly::int(2)));
        let expected = &(&(&x(3) * &x(2)) + &x(2).scale(&ExactComplex::from_int(2))) + &(&x(3) + &Poly::int(2));
        assert_eq!(s, expected);
        let r = p.restrict_zero(&[xv(2)].into_iter().collect());
        assert_eq!(r, x(1));
    }

    #[test]
    fn var_text_form() {
        let v = VarId::param(3, 2, 1).unwrap();
        assert_eq!(v.to_string(), "z[2,1;3]");
        assert_eq!("z[2,1;3]".parse::<VarId>().unwrap(), v);
        assert_eq!("x1".parse::<VarId>().unwrap(), xv(1));
        assert!("z[1,2;3]".parse::<VarId>().is_err());
        assert!(VarId::param(2, 2, 1).is_err());
        assert!(VarId::param(1, 1, 1).is_err());
    }
}
