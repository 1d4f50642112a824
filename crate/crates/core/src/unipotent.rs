//! Unipotent triangular factors, their products, and the last-row map.
//!
//! Factor `k` is lower triangular when `k` is odd and upper triangular when
//! `k` is even. Parameters of a factor are stored in canonical order:
//! column-major for lower factors (`(2,1), (3,1), …, (n,1), (3,2), …`) and
//! row-major for upper factors (`(1,2), (1,3), …, (1,n), (2,3), …`). All
//! `(row, col)` indices in this module are 1-based.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::polyring::{Poly, VarId};
use crate::scalar::Ring;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Lower,
    Upper,
}

impl Side {
    pub fn of_factor(k: usize) -> Side {
        if k % 2 == 1 {
            Side::Lower
        } else {
            Side::Upper
        }
    }

    pub fn flip(self) -> Side {
        match self {
            Side::Lower => Side::Upper,
            Side::Upper => Side::Lower,
        }
    }

    /// Whether `(row, col)` lies strictly inside this triangle.
    pub fn contains(self, row: usize, col: usize) -> bool {
        match self {
            Side::Lower => row > col,
            Side::Upper => row < col,
        }
    }
}

/// Canonical coordinate list of a triangular factor of size `n`.
pub fn coordinates(n: usize, side: Side) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for a in 1..n {
        for b in a + 1..=n {
            out.push(match side {
                Side::Lower => (b, a),
                Side::Upper => (a, b),
            });
        }
    }
    out
}

/// Index of `(row, col)` in the canonical coordinate list.
pub fn coordinate_index(n: usize, side: Side, row: usize, col: usize) -> Option<usize> {
    if row == 0 || col == 0 || row > n || col > n || !side.contains(row, col) {
        return None;
    }
    // Entries before the block of the leading index `a`, then the offset inside it.
    let (a, b) = match side {
        Side::Lower => (col, row),
        Side::Upper => (row, col),
    };
    let before: usize = (1..a).map(|t| n - t).sum();
    Some(before + (b - a - 1))
}

pub fn num_params(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Unit-diagonal triangular matrix with the given canonical entries.
pub fn build_unipotent<T: Ring>(n: usize, side: Side, entries: &[T]) -> Matrix<T> {
    let mut m = Matrix::identity(n);
    for ((r, c), v) in coordinates(n, side).into_iter().zip(entries) {
        m.set(r - 1, c - 1, v.clone());
    }
    m
}

/// Canonical entries of the inverse of a unipotent triangular matrix,
/// by exact back substitution.
pub fn invert_unipotent<T: Ring>(n: usize, side: Side, entries: &[T]) -> Vec<T> {
    let m = build_unipotent(n, side, entries);
    let mut inv: Matrix<T> = Matrix::identity(n);
    match side {
        Side::Lower => {
            for i in 0..n {
                for j in 0..i {
                    let mut acc = -m.get(i, j).clone();
                    for k in j + 1..i {
                        let (a, b) = (m.get(i, k), inv.get(k, j));
                        if !a.is_zero() && !b.is_zero() {
                            acc = acc - a.clone() * b.clone();
                        }
                    }
                    inv.set(i, j, acc);
                }
            }
        }
        Side::Upper => {
            for i in (0..n).rev() {
                for j in i + 1..n {
                    let mut acc = -m.get(i, j).clone();
                    for k in i + 1..j {
                        let (a, b) = (m.get(i, k), inv.get(k, j));
                        if !a.is_zero() && !b.is_zero() {
                            acc = acc - a.clone() * b.clone();
                        }
                    }
                    inv.set(i, j, acc);
                }
            }
        }
    }
    coordinates(n, side)
        .into_iter()
        .map(|(r, c)| inv.get(r - 1, c - 1).clone())
        .collect()
}

/// Parameters `Z_k` of the `k`-th unipotent factor.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector<T> {
    n: usize,
    factor: usize,
    entries: Vec<T>,
}

impl<T: Ring> ParamVector<T> {
    pub fn new(n: usize, factor: usize, entries: Vec<T>) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidArgument("matrix size must be positive".into()));
        }
        if factor == 0 {
            return Err(Error::InvalidArgument("factor indices start at 1".into()));
        }
        if entries.len() != num_params(n) {
            return Err(Error::Shape(format!(
                "factor {factor} of size {n} needs {} entries, got {}",
                num_params(n),
                entries.len()
            )));
        }
        Ok(ParamVector { n, factor, entries })
    }

    pub fn zeros(n: usize, factor: usize) -> Self {
        ParamVector::new(n, factor, vec![T::zero(); num_params(n)]).expect("valid shape")
    }

    /// Builds a parameter vector from `(row, col) -> value`; absent entries are zero.
    pub fn from_entries(
        n: usize,
        factor: usize,
        values: impl IntoIterator<Item = ((usize, usize), T)>,
    ) -> Result<Self> {
        let side = Side::of_factor(factor);
        let mut pv = ParamVector::zeros(n, factor);
        for ((r, c), v) in values {
            let idx = coordinate_index(n, side, r, c).ok_or_else(|| {
                Error::Parity(format!("entry ({r},{c}) is not a parameter of factor {factor} (n = {n})"))
            })?;
            pv.entries[idx] = v;
        }
        Ok(pv)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn factor(&self) -> usize {
        self.factor
    }

    pub fn side(&self) -> Side {
        Side::of_factor(self.factor)
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<T> {
        self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> Option<&T> {
        coordinate_index(self.n, self.side(), row, col).map(|i| &self.entries[i])
    }

    pub fn set(&mut self, row: usize, col: usize, v: T) -> Result<()> {
        let i = coordinate_index(self.n, self.side(), row, col)
            .ok_or_else(|| Error::Parity(format!("({row},{col}) not in factor {}", self.factor)))?;
        self.entries[i] = v;
        Ok(())
    }

    /// `((row, col), value)` pairs in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), &T)> {
        coordinates(self.n, self.side()).into_iter().zip(self.entries.iter())
    }

    /// The unit-diagonal triangular matrix `M_k(Z_k)`.
    pub fn build_factor(&self) -> Matrix<T> {
        build_unipotent(self.n, self.side(), &self.entries)
    }

    /// Parameters of `M_k(Z_k)^{-1}`.
    pub fn inverse_params(&self) -> ParamVector<T> {
        ParamVector {
            n: self.n,
            factor: self.factor,
            entries: invert_unipotent(self.n, self.side(), &self.entries),
        }
    }

    /// Same values attached to another factor index of the same parity.
    pub fn with_factor(&self, factor: usize) -> Result<Self> {
        if Side::of_factor(factor) != self.side() {
            return Err(Error::Parity(format!(
                "cannot move factor {} to index {factor}",
                self.factor
            )));
        }
        Ok(ParamVector { factor, ..self.clone() })
    }

    /// Entries that must vanish on the singular set: the last row of a lower
    /// factor, the last column of an upper one.
    pub fn constrained_coordinates(n: usize, side: Side) -> Vec<(usize, usize)> {
        match side {
            Side::Lower => (1..n).map(|j| (n, j)).collect(),
            Side::Upper => (1..n).map(|i| (i, n)).collect(),
        }
    }

    pub fn constrained_vanish(&self) -> bool {
        Self::constrained_coordinates(self.n, self.side())
            .into_iter()
            .all(|(r, c)| self.get(r, c).is_some_and(T::is_zero))
    }

    pub fn map<U: Ring>(&self, f: impl FnMut(&T) -> U) -> ParamVector<U> {
        ParamVector {
            n: self.n,
            factor: self.factor,
            entries: self.entries.iter().map(f).collect(),
        }
    }
}

impl ParamVector<Poly> {
    /// Fully symbolic parameters `z_{ij,k}`.
    pub fn symbolic(n: usize, factor: usize) -> Self {
        let side = Side::of_factor(factor);
        let entries = coordinates(n, side)
            .into_iter()
            .map(|(r, c)| Poly::var(VarId::Param { factor, row: r, col: c }))
            .collect();
        ParamVector { n, factor, entries }
    }
}

/// Variables of factor `k` in canonical order.
pub fn factor_variables(n: usize, factor: usize) -> Vec<VarId> {
    coordinates(n, Side::of_factor(factor))
        .into_iter()
        .map(|(row, col)| VarId::Param { factor, row, col })
        .collect()
}

/// Variables of factors `1..=k_total`, concatenated in canonical order.
pub fn chain_variables(n: usize, k_total: usize) -> Vec<VarId> {
    (1..=k_total).flat_map(|k| factor_variables(n, k)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// `M_1(Z_1) ⋯ M_K(Z_K)`
    Direct,
    /// `M_1(Z_1)^{-1} ⋯ M_K(Z_K)^{-1}`
    Inverse,
}

/// An ordered list of factor parameters with alternating parity.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorChain<T> {
    n: usize,
    orientation: Orientation,
    factors: Vec<ParamVector<T>>,
}

impl<T: Ring> FactorChain<T> {
    pub fn new(n: usize, orientation: Orientation, factors: Vec<ParamVector<T>>) -> Result<Self> {
        for (pos, f) in factors.iter().enumerate() {
            if f.n != n {
                return Err(Error::Shape(format!("factor {} has size {}, expected {n}", f.factor, f.n)));
            }
            if f.factor != pos + 1 {
                return Err(Error::InvalidArgument(format!(
                    "factor indices must be consecutive from 1; found {} at position {}",
                    f.factor,
                    pos + 1
                )));
            }
        }
        Ok(FactorChain { n, orientation, factors })
    }

    pub fn zeros(n: usize, k_total: usize, orientation: Orientation) -> Self {
        FactorChain {
            n,
            orientation,
            factors: (1..=k_total).map(|k| ParamVector::zeros(n, k)).collect(),
        }
    }

    /// Splits a flat point (factors concatenated in canonical order).
    pub fn from_flat(n: usize, k_total: usize, orientation: Orientation, values: &[T]) -> Result<Self> {
        let per = num_params(n);
        if values.len() != per * k_total {
            return Err(Error::Shape(format!(
                "expected {} coordinates for n = {n}, K = {k_total}, got {}",
                per * k_total,
                values.len()
            )));
        }
        let factors = (1..=k_total)
            .map(|k| ParamVector::new(n, k, values[(k - 1) * per..k * per].to_vec()))
            .collect::<Result<Vec<_>>>()?;
        FactorChain::new(n, orientation, factors)
    }

    pub fn flat(&self) -> Vec<T> {
        self.factors.iter().flat_map(|f| f.entries.iter().cloned()).collect()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn factors(&self) -> &[ParamVector<T>] {
        &self.factors
    }

    /// The matrices whose ordered product is the chain's value.
    pub fn factor_matrices(&self) -> Vec<Matrix<T>> {
        self.factors
            .iter()
            .map(|f| match self.orientation {
                Orientation::Direct => f.build_factor(),
                Orientation::Inverse => f.inverse_params().build_factor(),
            })
            .collect()
    }

    /// Ordered product; for the inverse orientation this is `Ψ_K`.
    pub fn psi_eval(&self) -> Matrix<T> {
        self.factor_matrices()
            .iter()
            .fold(Matrix::identity(self.n), |acc, m| acc.mul(m))
    }

    /// Last row of `Ψ_K`, propagated as a row vector through the factors.
    pub fn phi_eval(&self) -> Result<Vec<T>> {
        if self.orientation != Orientation::Inverse {
            return Err(Error::InvalidArgument("the last-row map is defined for inverse orientation".into()));
        }
        let mut row = vec![T::zero(); self.n];
        row[self.n - 1] = T::one();
        for m in self.factor_matrices() {
            row = Matrix::vec_mul(&row, &m);
        }
        Ok(row)
    }

    /// The same matrix expressed in the other orientation.
    pub fn reoriented(&self) -> Self {
        FactorChain {
            n: self.n,
            orientation: match self.orientation {
                Orientation::Direct => Orientation::Inverse,
                Orientation::Inverse => Orientation::Direct,
            },
            factors: self.factors.iter().map(ParamVector::inverse_params).collect(),
        }
    }

    /// Membership in `S_K` for `K = self.len()`: every factor before the last
    /// has its constrained entries equal to zero.
    pub fn in_singular_set(&self) -> Result<bool> {
        let k_total = self.factors.len();
        if k_total < 2 {
            return Err(Error::InvalidArgument(format!("S_K needs K >= 2, got {k_total}")));
        }
        Ok(self.factors[..k_total - 1].iter().all(ParamVector::constrained_vanish))
    }

    /// Appends `(e, 0, -e)` where `e` has only the final canonical coordinate
    /// set to one. The product is unchanged and the result avoids `S_{K+3}`.
    pub fn pad_factors(&self) -> Result<Self> {
        if self.orientation != Orientation::Inverse {
            return Err(Error::InvalidArgument("padding is defined for inverse orientation".into()));
        }
        let k = self.factors.len();
        let last = num_params(self.n).checked_sub(1).ok_or_else(|| {
            Error::InvalidArgument("padding needs n >= 2".into())
        })?;
        let mut factors = self.factors.clone();
        let mut first = ParamVector::zeros(self.n, k + 1);
        first.entries[last] = T::one();
        let mut third = ParamVector::zeros(self.n, k + 3);
        third.entries[last] = -T::one();
        factors.push(first);
        factors.push(ParamVector::zeros(self.n, k + 2));
        factors.push(third);
        Ok(FactorChain { factors, ..self.clone() })
    }

    pub fn map<U: Ring>(&self, mut f: impl FnMut(&T) -> U) -> FactorChain<U> {
        FactorChain {
            n: self.n,
            orientation: self.orientation,
            factors: self.factors.iter().map(|p| p.map(&mut f)).collect(),
        }
    }
}

impl FactorChain<Poly> {
    /// Chain of fully symbolic factors `Z_1, …, Z_K`.
    pub fn symbolic(n: usize, k_total: usize, orientation: Orientation) -> Self {
        FactorChain {
            n,
            orientation,
            factors: (1..=k_total).map(|k| ParamVector::symbolic(n, k)).collect(),
        }
    }
}

/// Assignment map for evaluating symbolic expressions at a numeric chain.
pub fn chain_assignment<T: Ring>(chain: &FactorChain<T>) -> BTreeMap<VarId, T> {
    let vars = chain_variables(chain.n(), chain.len());
    vars.into_iter().zip(chain.flat()).collect()
}
