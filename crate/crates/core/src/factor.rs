//! Constructive factorizations into unipotent triangular matrices.
//!
//! Constant matrices are factored by induction on the size: find a short
//! chain whose product has the same last row as `A`, peel that chain off to
//! reduce to a block of size `n - 1`, and recurse. Matrices over `C[z]` of
//! size two are factored by the Euclidean algorithm.

use std::collections::BTreeSet;

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::polyring::{Poly, VarId};
use crate::scalar::{modulus, norm, real, to_f64, ExactComplex, Field, Real, Ring};
use crate::unipotent::{build_unipotent, coordinates, invert_unipotent, num_params, FactorChain, Orientation, ParamVector, Side};

/// A unit-diagonal triangular matrix, stored by its canonical coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct ElementaryFactor<T> {
    pub side: Side,
    pub n: usize,
    pub entries: Vec<T>,
}

impl<T: Ring> ElementaryFactor<T> {
    pub fn new(side: Side, n: usize, entries: Vec<T>) -> Result<Self> {
        if entries.len() != num_params(n) {
            return Err(Error::Shape(format!(
                "a factor of size {n} has {} coordinates, got {}",
                num_params(n),
                entries.len()
            )));
        }
        Ok(ElementaryFactor { side, n, entries })
    }

    /// `E12(x)` or `E21(x)` for size two.
    pub fn shear(side: Side, x: T) -> Self {
        ElementaryFactor { side, n: 2, entries: vec![x] }
    }

    pub fn identity(side: Side, n: usize) -> Self {
        ElementaryFactor { side, n, entries: vec![T::zero(); num_params(n)] }
    }

    pub fn from_matrix(side: Side, m: &Matrix<T>) -> Self {
        let n = m.rows();
        let entries = coordinates(n, side).into_iter().map(|(r, c)| m.get(r - 1, c - 1).clone()).collect();
        ElementaryFactor { side, n, entries }
    }

    pub fn matrix(&self) -> Matrix<T> {
        build_unipotent(self.n, self.side, &self.entries)
    }

    pub fn inverse(&self) -> Self {
        ElementaryFactor {
            side: self.side,
            n: self.n,
            entries: invert_unipotent(self.n, self.side, &self.entries),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.entries.iter().all(Zero::is_zero)
    }

    /// The same factor placed in the upper-left corner of size `n`.
    pub fn embed(&self, n: usize) -> Self {
        let m = self.matrix().embed(n);
        ElementaryFactor::from_matrix(self.side, &m)
    }

    /// Product with a factor on the same side, if the sides agree.
    pub fn merge(&self, other: &Self) -> Option<Self> {
        (self.side == other.side && self.n == other.n)
            .then(|| ElementaryFactor::from_matrix(self.side, &self.matrix().mul(&other.matrix())))
    }
}

/// Product of a factor list; the identity of size `n` when empty.
pub fn product<T: Ring>(n: usize, factors: &[ElementaryFactor<T>]) -> Matrix<T> {
    factors.iter().fold(Matrix::identity(n), |acc, f| acc.mul(&f.matrix()))
}

/// Merges neighbours on the same side and drops identity factors, so the
/// result alternates between lower and upper.
pub fn merge_adjacent<T: Ring>(factors: Vec<ElementaryFactor<T>>) -> Vec<ElementaryFactor<T>> {
    let mut out: Vec<ElementaryFactor<T>> = Vec::with_capacity(factors.len());
    for f in factors {
        if f.is_identity() {
            continue;
        }
        match out.last().and_then(|top| top.merge(&f)) {
            Some(merged) => {
                out.pop();
                if !merged.is_identity() {
                    out.push(merged);
                }
            }
            None => out.push(f),
        }
    }
    out
}

/// Inverse of a product, as a factor list.
pub fn invert_list<T: Ring>(factors: &[ElementaryFactor<T>]) -> Vec<ElementaryFactor<T>> {
    factors.iter().rev().map(ElementaryFactor::inverse).collect()
}

/// Relative size below which `b_1` is treated as zero by [`preimage_last_row`].
pub const PREIMAGE_BRANCH_TOL: f64 = 1e-8;

/// Three-factor chain (inverse orientation) whose last-row map hits `b`.
///
/// When `b_1` is nonzero two factors suffice; otherwise the row
/// `(1, b_2, …, b_n)` is reached first and a third factor moves the first
/// entry to `b_1` using the largest of `b_2, …, b_n`.
pub fn preimage_last_row<F: Real>(b: &[Complex<F>]) -> Result<FactorChain<Complex<F>>> {
    check_target(b)?;
    let branch = if modulus(b[0]) > real::<F>(PREIMAGE_BRANCH_TOL) * norm(b) {
        Branch::TwoFactor
    } else {
        Branch::ThirdFactor(largest_tail(b))
    };
    Ok(preimage_branch(b, branch))
}

#[derive(Clone, Copy)]
enum Branch {
    TwoFactor,
    /// Third factor pivoting on the given 0-based index.
    ThirdFactor(usize),
}

fn check_target<F: Real>(b: &[Complex<F>]) -> Result<()> {
    let n = b.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need n >= 2, got {n}")));
    }
    if norm(b) == F::zero() {
        return Err(Error::ZeroVector);
    }
    Ok(())
}

fn largest_tail<F: Real>(b: &[Complex<F>]) -> usize {
    (1..b.len())
        .max_by(|&i, &j| modulus(b[i]).partial_cmp(&modulus(b[j])).unwrap_or(std::cmp::Ordering::Equal))
        .expect("n >= 2")
}

fn preimage_branch<F: Real>(b: &[Complex<F>], branch: Branch) -> FactorChain<Complex<F>> {
    let n = b.len();
    let one = Complex::new(F::one(), F::zero());
    let mut x1 = ParamVector::zeros(n, 1);
    let mut x2 = ParamVector::zeros(n, 2);
    let mut x3 = ParamVector::zeros(n, 3);
    // lower then upper factor reach any row whose first entry is nonzero
    let mut two_factor = |row: &[Complex<F>]| {
        for k in 1..n {
            x1.set(n, k, row[k - 1]).expect("lower coordinate");
        }
        x2.set(1, n, (row[n - 1] - one) / row[0]).expect("upper coordinate");
    };
    match branch {
        Branch::TwoFactor => two_factor(b),
        Branch::ThirdFactor(m) => {
            let mut row = b.to_vec();
            row[0] = one;
            two_factor(&row);
            x3.set(m + 1, 1, (b[0] - one) / b[m]).expect("lower coordinate");
        }
    }
    FactorChain::new(n, Orientation::Direct, vec![x1, x2, x3])
        .expect("consecutive factors")
        .reoriented()
}

/// Result of peeling a matching chain off a matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Peel<T> {
    /// `Ψ_K(Z) · A^{-1}`.
    pub b: Matrix<T>,
    /// Last column of `b` above the diagonal.
    pub h: Vec<T>,
    /// Upper-left block of `E(-h) · b`.
    pub core: Matrix<T>,
}

/// Peels a chain `z` (inverse orientation) whose last row matches `A`.
pub fn peel_last_row<F: Real>(a: &Matrix<Complex<F>>, z: &FactorChain<Complex<F>>, tol: F) -> Result<Peel<Complex<F>>> {
    let n = a.rows();
    if !a.is_square() || z.n() != n {
        return Err(Error::Shape(format!("matrix is {}x{}, chain has size {}", a.rows(), a.cols(), z.n())));
    }
    let phi = z.phi_eval()?;
    let mismatch = crate::scalar::distance(&phi, &a.last_row());
    if mismatch > tol {
        return Err(Error::LastRowMismatch { mismatch: to_f64(mismatch), tol: to_f64(tol) });
    }
    let b = z.psi_eval().mul(&a.inverse()?);
    let h: Vec<Complex<F>> = (0..n - 1).map(|i| *b.get(i, n - 1)).collect();
    let core = Matrix::from_fn(n - 1, n - 1, |i, j| *b.get(i, j) - h[i] * *b.get(n - 1, j));
    Ok(Peel { b, h, core })
}

/// Upper unipotent with last column `v` above the diagonal.
fn last_column_factor<T: Ring>(n: usize, v: &[T]) -> ElementaryFactor<T> {
    let mut m = Matrix::identity(n);
    for (i, x) in v.iter().enumerate() {
        m.set(i, n - 1, x.clone());
    }
    ElementaryFactor::from_matrix(Side::Upper, &m)
}

/// Factor list of a constant matrix of determinant one.
pub fn factor_constant<F: Real>(a: &Matrix<Complex<F>>) -> Result<Vec<ElementaryFactor<Complex<F>>>> {
    if !a.is_square() {
        return Err(Error::Shape(format!("matrix is {}x{}", a.rows(), a.cols())));
    }
    let det = a.determinant();
    if modulus(det - Complex::one()) > real(1e-10) {
        return Err(Error::Determinant { re: to_f64(det.re), im: to_f64(det.im) });
    }
    let factors = factor_constant_unchecked(a)?;
    Ok(polish(a, factors, 8))
}

/// Refines the entries of a factor list by Gauss–Newton on
/// `product(factors) = A`, keeping the layout. The induction multiplies
/// rounding errors by the growing sizes of the intermediate blocks, which a
/// few refinement steps remove.
pub fn polish<F: Real>(a: &Matrix<Complex<F>>, mut factors: Vec<ElementaryFactor<Complex<F>>>, max_iters: usize) -> Vec<ElementaryFactor<Complex<F>>> {
    let n = a.rows();
    let error = |fs: &[ElementaryFactor<Complex<F>>]| product(n, fs).frobenius_distance(a);
    let mut err = error(&factors);
    let floor = real::<F>(1e-15) * a.frobenius_norm();
    for _ in 0..max_iters {
        if err <= floor || factors.is_empty() {
            break;
        }
        let mats: Vec<Matrix<Complex<F>>> = factors.iter().map(ElementaryFactor::matrix).collect();
        let mut prefix = vec![Matrix::identity(n)];
        for m in &mats {
            let next = prefix.last().expect("nonempty").mul(m);
            prefix.push(next);
        }
        let mut suffix = vec![Matrix::identity(n)];
        for m in mats.iter().rev() {
            let next = m.mul(suffix.last().expect("nonempty"));
            suffix.push(next);
        }
        suffix.reverse();
        // columns: d(product)/d(entry) = prefix_k[:, r] ⊗ suffix_{k+1}[c, :]
        let mut cols: Vec<Vec<Complex<F>>> = Vec::new();
        for (k, f) in factors.iter().enumerate() {
            for (r, c) in coordinates(n, f.side) {
                let (left, right) = (&prefix[k], &suffix[k + 1]);
                let mut col = Vec::with_capacity(n * n);
                for i in 0..n {
                    for j in 0..n {
                        col.push(*left.get(i, r - 1) * *right.get(c - 1, j));
                    }
                }
                cols.push(col);
            }
        }
        let jac = Matrix::from_fn(n * n, cols.len(), |row, col| cols[col][row]);
        let current = &prefix[factors.len()];
        let rhs: Vec<Complex<F>> = (0..n * n).map(|idx| *a.get(idx / n, idx % n) - *current.get(idx / n, idx % n)).collect();
        let step = crate::matrix::min_norm_solve(&jac, &rhs, real(1e-12));
        let mut trial = factors.clone();
        let mut offset = 0;
        for f in &mut trial {
            for e in &mut f.entries {
                *e += step[offset];
                offset += 1;
            }
        }
        let trial_err = error(&trial);
        if trial_err < err {
            factors = trial;
            err = trial_err;
        } else {
            break;
        }
    }
    factors
}

fn factor_constant_unchecked<F: Real>(a: &Matrix<Complex<F>>) -> Result<Vec<ElementaryFactor<Complex<F>>>> {
    let n = a.rows();
    if n <= 1 {
        return Ok(Vec::new());
    }
    let z = preimage_last_row(&a.last_row())?;
    let tol = real::<F>(1e-8) * (F::one() + a.frobenius_norm());
    let peel = peel_last_row(a, &z, tol)?;
    let core_factors = factor_constant_unchecked(&peel.core)?;

    // A = diag(core^{-1}, 1) · E(-h) · Ψ_K(Z), with Ψ_K(Z) a direct product.
    let mut out: Vec<ElementaryFactor<Complex<F>>> = invert_list(&core_factors).iter().map(|f| f.embed(n)).collect();
    let minus_h: Vec<Complex<F>> = peel.h.iter().map(|x| -*x).collect();
    out.push(last_column_factor(n, &minus_h));
    for p in z.reoriented().factors() {
        out.push(ElementaryFactor::new(p.side(), n, p.entries().to_vec())?);
    }
    Ok(merge_adjacent(out))
}

/// `E12(u) E21(-1/u) E12(u-1) E21(1) E12(-1) = diag(u, 1/u)`.
pub fn whitehead_diag<T: Field>(u: T) -> Result<Vec<ElementaryFactor<T>>> {
    if u.is_zero() {
        return Err(Error::InvalidArgument("u must be nonzero".into()));
    }
    let one = T::one();
    Ok(vec![
        ElementaryFactor::shear(Side::Upper, u.clone()),
        ElementaryFactor::shear(Side::Lower, -(one.clone() / u.clone())),
        ElementaryFactor::shear(Side::Upper, u - one.clone()),
        ElementaryFactor::shear(Side::Lower, one.clone()),
        ElementaryFactor::shear(Side::Upper, -one),
    ])
}

/// A 2x2 matrix over `C[z]` of determinant one.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyMatrix2 {
    pub a: Poly,
    pub b: Poly,
    pub c: Poly,
    pub d: Poly,
    symbol: Option<VarId>,
}

impl PolyMatrix2 {
    pub fn new(a: Poly, b: Poly, c: Poly, d: Poly) -> Result<Self> {
        let vars: BTreeSet<VarId> = [&a, &b, &c, &d].iter().flat_map(|p| p.variables()).collect();
        if vars.len() > 1 {
            let names: Vec<String> = vars.iter().map(ToString::to_string).collect();
            return Err(Error::NotUnivariate(names.join(", ")));
        }
        let det = &(&a * &d) - &(&b * &c);
        if !(&det - &Poly::one()).is_zero() {
            return Err(Error::PolyDeterminant(det.to_string()));
        }
        Ok(PolyMatrix2 { a, b, c, d, symbol: vars.into_iter().next() })
    }

    pub fn from_matrix(m: &Matrix<Poly>) -> Result<Self> {
        if m.rows() != 2 || m.cols() != 2 {
            return Err(Error::Shape(format!("expected a 2x2 matrix, got {}x{}", m.rows(), m.cols())));
        }
        PolyMatrix2::new(m.get(0, 0).clone(), m.get(0, 1).clone(), m.get(1, 0).clone(), m.get(1, 1).clone())
    }

    pub fn to_matrix(&self) -> Matrix<Poly> {
        Matrix::from_rows(vec![vec![self.a.clone(), self.b.clone()], vec![self.c.clone(), self.d.clone()]])
            .expect("square")
    }

    pub fn symbol(&self) -> Option<&VarId> {
        self.symbol.as_ref()
    }
}

/// Dense coefficients, constant term first, without trailing zeros.
fn to_dense(p: &Poly, var: Option<&VarId>) -> Vec<ExactComplex> {
    let mut out = vec![ExactComplex::zero(); p.degree() as usize + 1];
    for (m, c) in p.terms() {
        let e = var.map_or(0, |v| m.exponent(v)) as usize;
        out[e] = c.clone();
    }
    trim(&mut out);
    out
}

fn trim(c: &mut Vec<ExactComplex>) {
    while c.last().is_some_and(Zero::is_zero) {
        c.pop();
    }
}

fn from_dense(c: &[ExactComplex], var: Option<&VarId>) -> Poly {
    let mut p = Poly::zero();
    let mut power = Poly::one();
    for (k, x) in c.iter().enumerate() {
        if !x.is_zero() {
            p = &p + &power.scale(x);
        }
        if k + 1 < c.len() {
            power = &power * &Poly::var(var.expect("nonconstant needs a symbol").clone());
        }
    }
    p
}

/// Quotient of univariate division `a = q b + r` with `deg r < deg b`.
fn div_quotient(a: &[ExactComplex], b: &[ExactComplex]) -> Vec<ExactComplex> {
    let mut rem = a.to_vec();
    let db = b.len() - 1;
    let lead_inv = b[db].inv().expect("nonzero leading coefficient");
    let mut q = vec![ExactComplex::zero(); rem.len().saturating_sub(db).max(1)];
    while rem.len() > db && !rem.is_empty() {
        let shift = rem.len() - 1 - db;
        let coef = &rem[rem.len() - 1] * &lead_inv;
        for (i, bi) in b.iter().enumerate() {
            rem[shift + i] -= &(&coef * bi);
        }
        q[shift] = coef;
        rem.pop();
        trim(&mut rem);
    }
    trim(&mut q);
    q
}

/// Exact factorization over `C[z]` by Euclidean reduction of the first column.
pub fn factor_sl2_poly(m: &PolyMatrix2) -> Result<Vec<ElementaryFactor<Poly>>> {
    let var = m.symbol();
    let (mut a, mut b, mut c, mut d) = (m.a.clone(), m.b.clone(), m.c.clone(), m.d.clone());
    // left multiplications applied so far
    let mut applied: Vec<ElementaryFactor<Poly>> = Vec::new();
    while !c.is_zero() {
        if a.is_zero() {
            // det = -bc = 1 forces c to be a nonzero constant
            let cc = c.as_constant().expect("constant lower-left entry");
            let s = Poly::constant(cc.inv().expect("nonzero"));
            a = &a + &(&s * &c);
            b = &b + &(&s * &d);
            applied.push(ElementaryFactor::shear(Side::Upper, s));
        } else if c.degree() >= a.degree() {
            let q = from_dense(&div_quotient(&to_dense(&c, var), &to_dense(&a, var)), var);
            c = &c - &(&q * &a);
            d = &d - &(&q * &b);
            applied.push(ElementaryFactor::shear(Side::Lower, -q));
        } else {
            let q = from_dense(&div_quotient(&to_dense(&a, var), &to_dense(&c, var)), var);
            a = &a - &(&q * &c);
            b = &b - &(&q * &d);
            applied.push(ElementaryFactor::shear(Side::Upper, -q));
        }
    }
    // now [[u, b], [0, 1/u]] = E12(b u) diag(u, 1/u)
    let u = a.as_constant().expect("unit upper-left entry");
    // E_k ⋯ E_1 A = R gives A = E_1^{-1} ⋯ E_k^{-1} R
    let mut out: Vec<ElementaryFactor<Poly>> = applied.iter().map(ElementaryFactor::inverse).collect();
    out.push(ElementaryFactor::shear(Side::Upper, b.scale(&u)));
    if !u.is_one() {
        for f in whitehead_diag(u)? {
            out.push(ElementaryFactor::shear(f.side, Poly::constant(f.entries[0].clone())));
        }
    }
    Ok(merge_adjacent(out))
}

/// Outcome of multiplying out a factor list and comparing with a target.
#[derive(Clone, Debug, PartialEq)]
pub struct VerifyReport {
    pub matches: bool,
    /// Number of factors.
    pub k: usize,
    /// Relative Frobenius error, in tolerance mode.
    pub error: Option<f64>,
}

fn sizes_agree<T>(n: usize, factors: &[ElementaryFactor<T>]) -> bool {
    factors.iter().all(|f| f.n == n)
}

/// Exact structural comparison.
pub fn verify_exact<T: Ring>(target: &Matrix<T>, factors: &[ElementaryFactor<T>]) -> VerifyReport {
    let n = target.rows();
    let matches = target.is_square() && sizes_agree(n, factors) && product(n, factors) == *target;
    VerifyReport { matches, k: factors.len(), error: None }
}

/// Comparison by relative Frobenius distance.
pub fn verify_numeric<F: Real>(target: &Matrix<Complex<F>>, factors: &[ElementaryFactor<Complex<F>>], tol: F) -> VerifyReport {
    let n = target.rows();
    if !target.is_square() || !sizes_agree(n, factors) {
        return VerifyReport { matches: false, k: factors.len(), error: None };
    }
    let err = product(n, factors).frobenius_distance(target) / target.frobenius_norm().max(F::one());
    VerifyReport { matches: err <= tol, k: factors.len(), error: Some(to_f64(err)) }
}
