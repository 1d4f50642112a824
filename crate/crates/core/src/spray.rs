//! Shear vector fields `V_{ij,p} = (∂p/∂x_i) ∂/∂x_j - (∂p/∂x_j) ∂/∂x_i`
//! of multilinear polynomials, their closed-form flows, and sprays built by
//! composing flows.
//!
//! For `p` multilinear write `p = α x_i x_j + β x_i + γ x_j + δ` with
//! `α, β, γ, δ` free of `x_i, x_j`. Along the field those coefficients are
//! constant, so the flow solves two decoupled linear equations:
//! `x_j' = α x_j + β` and `x_i' = -(α x_i + γ)`.

use std::collections::BTreeMap;

use nalgebra::ComplexField;
use num_complex::Complex;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::matrix::{numerical_rank, Matrix};
use crate::polyring::{Poly, VarId};
use crate::scalar::{real, Real};

/// A point given by named coordinates.
pub type Point<F> = BTreeMap<VarId, Complex<F>>;

/// Threshold on `|α|` below which the linear flow formula is used.
pub const ALPHA_LINEAR_THRESHOLD: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq)]
pub struct ShearField {
    p: Poly,
    i: VarId,
    j: VarId,
    dp_di: Poly,
    dp_dj: Poly,
    alpha: Poly,
}

impl ShearField {
    pub fn new(p: Poly, i: VarId, j: VarId) -> Result<Self> {
        if i == j {
            return Err(Error::InvalidArgument(format!("shear field needs two distinct variables, got {i} twice")));
        }
        let (ok, offenders) = p.is_multilinear();
        if !ok {
            return Err(Error::NotMultilinear(offenders));
        }
        let dp_di = p.partial_derivative(&i);
        let dp_dj = p.partial_derivative(&j);
        let alpha = dp_di.partial_derivative(&j);
        Ok(ShearField { p, i, j, dp_di, dp_dj, alpha })
    }

    pub fn polynomial(&self) -> &Poly {
        &self.p
    }

    pub fn vars(&self) -> (&VarId, &VarId) {
        (&self.i, &self.j)
    }

    /// The field applied to `q` as a derivation: `V(q)`.
    pub fn apply(&self, q: &Poly) -> Poly {
        &(&self.dp_di * &q.partial_derivative(&self.j)) - &(&self.dp_dj * &q.partial_derivative(&self.i))
    }

    /// Components `(dx_i, dx_j)` of the field at a point.
    pub fn vector_at<F: Real>(&self, point: &Point<F>) -> Result<(Complex<F>, Complex<F>)> {
        Ok((-self.dp_dj.evaluate(point)?, self.dp_di.evaluate(point)?))
    }

    /// Closed-form time-`t` flow from `start`. Coordinates other than `x_i`
    /// and `x_j` are unchanged.
    pub fn flow<F: Real>(&self, start: &Point<F>, t: Complex<F>) -> Result<Point<F>> {
        let xi = *start.get(&self.i).ok_or_else(|| Error::MissingVariables(vec![self.i.clone()]))?;
        let xj = *start.get(&self.j).ok_or_else(|| Error::MissingVariables(vec![self.j.clone()]))?;
        let alpha = self.alpha.evaluate(start)?;
        let beta = self.dp_di.evaluate(start)? - alpha * xj;
        let gamma = self.dp_dj.evaluate(start)? - alpha * xi;

        let (new_i, new_j) = if ComplexField::modulus(alpha) < real::<F>(ALPHA_LINEAR_THRESHOLD) {
            (xi - gamma * t, xj + beta * t)
        } else {
            let at = alpha * t;
            let grow = ComplexField::exp(at);
            let shrink = ComplexField::exp(-at);
            (
                xi * shrink - gamma * t * phi1(-at),
                xj * grow + beta * t * phi1(at),
            )
        };
        let mut out = start.clone();
        out.insert(self.i.clone(), new_i);
        out.insert(self.j.clone(), new_j);
        Ok(out)
    }
}

/// `(e^z - 1) / z`, with a series near zero.
fn phi1<F: Real>(z: Complex<F>) -> Complex<F> {
    let one = Complex::new(F::one(), F::zero());
    if ComplexField::modulus(z) < real::<F>(1e-4) {
        let two: F = real(2.0);
        let six: F = real(6.0);
        let twenty_four: F = real(24.0);
        one + z / two + z * z / six + z * z * z / twenty_four
    } else {
        (ComplexField::exp(z) - one) / z
    }
}

/// Rank of `{V_{ij,p}(point)}` over all pairs `i < j` of `vars`.
pub fn span_rank<F: Real>(p: &Poly, vars: &[VarId], point: &Point<F>, rel_tol: F) -> Result<usize> {
    let grads: Vec<Complex<F>> = vars
        .iter()
        .map(|v| p.partial_derivative(v).evaluate(point))
        .collect::<Result<_>>()?;
    let m = vars.len();
    let mut rows = Vec::new();
    for a in 0..m {
        for b in a + 1..m {
            let mut row = vec![Complex::zero(); m];
            row[b] = grads[a];
            row[a] = -grads[b];
            rows.push(row);
        }
    }
    if rows.is_empty() {
        return Ok(0);
    }
    let mat = Matrix::from_rows(rows)?;
    Ok(numerical_rank(&mat, rel_tol).0)
}

/// One generator of a composed-flow spray.
#[derive(Clone, Debug, PartialEq)]
pub enum Generator {
    Shear(ShearField),
    /// Unit-speed translation along a coordinate the residual does not involve.
    Translation(VarId),
}

impl Generator {
    fn flow<F: Real>(&self, z: &Point<F>, t: Complex<F>) -> Result<Point<F>> {
        match self {
            Generator::Shear(f) => f.flow(z, t),
            Generator::Translation(v) => {
                let mut out = z.clone();
                let x = out.get_mut(v).ok_or_else(|| Error::MissingVariables(vec![v.clone()]))?;
                *x += t;
                Ok(out)
            }
        }
    }
}

/// `s(z, t) = φ_1^{t_1} ∘ ⋯ ∘ φ_N^{t_N}(z)` for complete fields `φ_k`.
#[derive(Clone, Debug)]
pub struct SprayMap<F: Real> {
    generators: Vec<Generator>,
    residual: Option<Poly>,
    base: Point<F>,
}

impl<F: Real> SprayMap<F> {
    pub fn new(generators: Vec<Generator>, base: Point<F>) -> Result<Self> {
        let mut residual: Option<Poly> = None;
        for g in &generators {
            if let Generator::Shear(f) = g {
                match &residual {
                    None => residual = Some(f.polynomial().clone()),
                    Some(p) if p != f.polynomial() => return Err(Error::MixedResiduals),
                    Some(_) => {}
                }
            }
        }
        if let Some(p) = &residual {
            let support = p.variables();
            for g in &generators {
                if let Generator::Translation(v) = g {
                    if support.contains(v) {
                        return Err(Error::MixedResiduals);
                    }
                }
            }
        }
        for g in &generators {
            let needed: Vec<&VarId> = match g {
                Generator::Shear(f) => vec![f.vars().0, f.vars().1],
                Generator::Translation(v) => vec![v],
            };
            let missing: Vec<VarId> = needed.into_iter().filter(|v| !base.contains_key(*v)).cloned().collect();
            if !missing.is_empty() {
                return Err(Error::MissingVariables(missing));
            }
        }
        Ok(SprayMap { generators, residual, base })
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn residual(&self) -> Option<&Poly> {
        self.residual.as_ref()
    }

    pub fn base(&self) -> &Point<F> {
        &self.base
    }

    /// Evaluates the spray; an empty `t` gives the base point.
    pub fn eval(&self, t: &[Complex<F>]) -> Result<Point<F>> {
        if t.is_empty() {
            return Ok(self.base.clone());
        }
        if t.len() != self.generators.len() {
            return Err(Error::Shape(format!(
                "spray has {} generators, got {} times",
                self.generators.len(),
                t.len()
            )));
        }
        let mut z = self.base.clone();
        for (g, &tk) in self.generators.iter().zip(t).rev() {
            z = g.flow(&z, tk)?;
        }
        Ok(z)
    }

    /// Central finite-difference derivative in `t` at `t = 0`; columns are
    /// generators, rows follow the coordinate order of the base point.
    pub fn differential_at_zero(&self, h: F) -> Result<Matrix<Complex<F>>> {
        let coords: Vec<VarId> = self.base.keys().cloned().collect();
        let m = self.generators.len();
        let mut d = Matrix::zeros(coords.len(), m);
        let two: F = real(2.0);
        for k in 0..m {
            let mut tp = vec![Complex::zero(); m];
            let mut tm = vec![Complex::zero(); m];
            tp[k] = Complex::new(h, F::zero());
            tm[k] = Complex::new(-h, F::zero());
            let (zp, zm) = (self.eval(&tp)?, self.eval(&tm)?);
            for (row, v) in coords.iter().enumerate() {
                d.set(row, k, (zp[v] - zm[v]) / Complex::new(two * h, F::zero()));
            }
        }
        Ok(d)
    }
}

/// Stratum of `a` in the coordinate-vanishing stratification: for even `K`
/// the smallest `k` with `a_k != 0`, for odd `K` the smallest `k` with
/// `a_{n-k+1} != 0`.
pub fn stratum_index<T: crate::scalar::Ring>(a: &[T], k_even: bool) -> Result<usize> {
    let found = if k_even {
        a.iter().position(|x| !x.is_zero())
    } else {
        a.iter().rev().position(|x| !x.is_zero())
    };
    found.map(|idx| idx + 1).ok_or(Error::ZeroVector)
}
