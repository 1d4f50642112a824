//! Component polynomials `P_{k,K}` of the last-row map, their Jacobians,
//! and the rank characterization of the singular set `S_K`.
//!
//! Components are produced by the row recurrences: writing `P_{·,K}` for the
//! last row of `Ψ_K`, the identity `P_{·,K-1} = P_{·,K} · M_K(Z_K)` gives
//!
//! * even `K`: `P_{k,K} = P_{k,K-1} - Σ_{j<k} z_{jk,K} P_{j,K}` (ascending `k`),
//! * odd `K`:  `P_{k,K} = P_{k,K-1} - Σ_{j>k} z_{jk,K} P_{j,K}` (descending `k`),
//!
//! with `P_{·,1}` taken from the exact inverse of `M_1(Z_1)`.

use std::collections::BTreeSet;

use num_complex::Complex;
use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{numerical_rank, Matrix};
use crate::polyring::{CompiledPoly, Poly, VarId};
use crate::scalar::Real;
use crate::unipotent::{chain_variables, FactorChain, Orientation, ParamVector, Side};

/// Environment variable capping symbolic expansion (total stored terms).
pub const TERM_BUDGET_ENV: &str = "UNIFACT_TERM_BUDGET";
pub const DEFAULT_TERM_BUDGET: usize = 5_000_000;

pub fn term_budget_from_env() -> usize {
    std::env::var(TERM_BUDGET_ENV)
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(DEFAULT_TERM_BUDGET)
}

/// The components `P_{1,K}, …, P_{n,K}` of `Φ_K`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComponentSystem {
    pub n: usize,
    pub k: usize,
    pub components: Vec<Poly>,
}

fn z(factor: usize, row: usize, col: usize) -> Poly {
    Poly::var(VarId::Param { factor, row, col })
}

/// One recurrence step from `P_{·,K-1}` to `P_{·,K}`.
pub fn recurrence_step(prev: &[Poly], k: usize) -> Vec<Poly> {
    let n = prev.len();
    let mut next = vec![Poly::zero(); n];
    match Side::of_factor(k) {
        Side::Upper => {
            for col in 0..n {
                let mut p = prev[col].clone();
                for j in 0..col {
                    p = &p - &(&z(k, j + 1, col + 1) * &next[j]);
                }
                next[col] = p;
            }
        }
        Side::Lower => {
            for col in (0..n).rev() {
                let mut p = prev[col].clone();
                for j in col + 1..n {
                    p = &p - &(&z(k, j + 1, col + 1) * &next[j]);
                }
                next[col] = p;
            }
        }
    }
    next
}

/// All levels `P_{·,0}, …, P_{·,K}` where level 0 is the last row of the identity.
pub fn component_levels(n: usize, k_total: usize, budget: usize) -> Result<Vec<Vec<Poly>>> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("n must be at least 2, got {n}")));
    }
    let mut unit = vec![Poly::zero(); n];
    unit[n - 1] = Poly::one();
    let mut levels = vec![unit];
    for k in 1..=k_total {
        let next = if k == 1 {
            ParamVector::symbolic(n, 1).inverse_params().build_factor().last_row()
        } else {
            recurrence_step(&levels[k - 1], k)
        };
        let terms: usize = next.iter().map(Poly::num_terms).sum();
        if terms > budget {
            return Err(Error::TermBudget { budget });
        }
        levels.push(next);
    }
    Ok(levels)
}

/// `P_{·,K}` via the recurrences, with the budget from the environment.
pub fn symbolic_components(n: usize, k_total: usize) -> Result<ComponentSystem> {
    symbolic_components_with_budget(n, k_total, term_budget_from_env())
}

pub fn symbolic_components_with_budget(n: usize, k_total: usize, budget: usize) -> Result<ComponentSystem> {
    if k_total < 1 {
        return Err(Error::InvalidArgument("K must be at least 1".into()));
    }
    let mut levels = component_levels(n, k_total, budget)?;
    Ok(ComponentSystem {
        n,
        k: k_total,
        components: levels.pop().expect("at least one level"),
    })
}

/// Factor-`K` variables on which `P_{comp,K}` may depend: `z_{ij,K}` with
/// `i < j <= comp` for even `K`, and `comp <= j < i <= n` for odd `K`.
pub fn last_factor_dependencies(n: usize, k_total: usize, comp: usize) -> BTreeSet<VarId> {
    let mut out = BTreeSet::new();
    match Side::of_factor(k_total) {
        Side::Upper => {
            for j in 1..=comp {
                for i in 1..j {
                    out.insert(VarId::Param { factor: k_total, row: i, col: j });
                }
            }
        }
        Side::Lower => {
            for j in comp..=n {
                for i in j + 1..=n {
                    out.insert(VarId::Param { factor: k_total, row: i, col: j });
                }
            }
        }
    }
    out
}

/// Variables constrained to zero on `S_K`.
pub fn singular_set_variables(n: usize, k_total: usize) -> BTreeSet<VarId> {
    (1..k_total)
        .flat_map(|k| {
            ParamVector::<Poly>::constrained_coordinates(n, Side::of_factor(k))
                .into_iter()
                .map(move |(row, col)| VarId::Param { factor: k, row, col })
        })
        .collect()
}

impl ComponentSystem {
    pub fn variables(&self) -> Vec<VarId> {
        chain_variables(self.n, self.k)
    }

    /// Symbolic Jacobian, row `k` holding `dP_{k,K}`.
    pub fn jacobian_polys(&self) -> Vec<Vec<Poly>> {
        let vars = self.variables();
        self.components
            .iter()
            .map(|p| vars.iter().map(|v| p.partial_derivative(v)).collect())
            .collect()
    }

    pub fn compile<F: Real>(&self) -> CompiledSystem<F> {
        let vars = self.variables();
        let compile = |p: &Poly| p.compile::<F>(&vars).expect("components use chain variables only");
        CompiledSystem {
            n: self.n,
            k: self.k,
            values: self.components.iter().map(compile).collect(),
            jacobian: self
                .jacobian_polys()
                .iter()
                .map(|row| row.iter().map(compile).collect())
                .collect(),
        }
    }

    fn check_point<F: Real>(&self, point: &FactorChain<Complex<F>>) -> Result<()> {
        if point.n() != self.n || point.len() != self.k {
            return Err(Error::Shape(format!(
                "point has n = {}, K = {}; system has n = {}, K = {}",
                point.n(),
                point.len(),
                self.n,
                self.k
            )));
        }
        Ok(())
    }

    /// Jacobian of `(P_{1,K}, …, P_{n,K})` at a numeric point.
    pub fn jacobian_at<F: Real>(&self, point: &FactorChain<Complex<F>>) -> Result<Matrix<Complex<F>>> {
        self.check_point(point)?;
        Ok(self.compile::<F>().jacobian(&point.flat()))
    }

    /// Whether the Jacobian has numerical rank `n`.
    pub fn submersive_at<F: Real>(&self, point: &FactorChain<Complex<F>>, tol: F) -> Result<bool> {
        if self.k < 2 {
            return Err(Error::InvalidArgument("submersivity is analysed for K >= 2".into()));
        }
        let j = self.jacobian_at(point)?;
        Ok(numerical_rank(&j, tol).0 == self.n)
    }
}

/// Components and Jacobian entries compiled for repeated floating evaluation
/// over the chain variable order.
#[derive(Clone, Debug)]
pub struct CompiledSystem<F: Real> {
    pub n: usize,
    pub k: usize,
    values: Vec<CompiledPoly<F>>,
    jacobian: Vec<Vec<CompiledPoly<F>>>,
}

impl<F: Real> CompiledSystem<F> {
    pub fn phi(&self, x: &[Complex<F>]) -> Vec<Complex<F>> {
        self.values.iter().map(|p| p.eval(x)).collect()
    }

    pub fn jacobian(&self, x: &[Complex<F>]) -> Matrix<Complex<F>> {
        let cols = self.jacobian.first().map_or(0, Vec::len);
        Matrix::from_fn(self.n, cols, |i, j| self.jacobian[i][j].eval(x))
    }

    pub fn num_vars(&self) -> usize {
        self.jacobian.first().map_or(0, Vec::len)
    }
}

/// Outcome of the rank test at one point.
#[derive(Clone, Debug)]
pub struct RankReport {
    pub point: Vec<Complex<f64>>,
    pub rank: usize,
    /// Smallest over largest singular value.
    pub ratio: f64,
    pub in_singular_set: bool,
    /// Whether "full rank" and "off `S_K`" agree.
    pub agree: bool,
}

pub fn rank_report(
    system: &CompiledSystem<f64>,
    point: &FactorChain<Complex<f64>>,
    tol: f64,
) -> Result<RankReport> {
    let j = system.jacobian(&point.flat());
    let (rank, ratio) = numerical_rank(&j, tol);
    let in_s = point.in_singular_set()?;
    Ok(RankReport {
        point: point.flat(),
        rank,
        ratio,
        in_singular_set: in_s,
        agree: (rank == system.n) != in_s,
    })
}

/// Rank reports for a batch of points, evaluated in parallel.
pub fn rank_reports(
    system: &CompiledSystem<f64>,
    points: &[FactorChain<Complex<f64>>],
    tol: f64,
) -> Result<Vec<RankReport>> {
    points
        .par_iter()
        .map(|p| rank_report(system, p, tol))
        .collect()
}

/// Restriction of `Φ_K` to `S_K`, compared against the expected image.
#[derive(Clone, Debug, PartialEq)]
pub struct SingularImageReport {
    pub n: usize,
    pub k: usize,
    pub restricted: Vec<Poly>,
    /// 1-based indices of components whose restriction is not as expected.
    pub failures: Vec<usize>,
}

impl SingularImageReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Substitutes the `S_K` constraints into `P_{·,K}`. For even `K` the
/// restriction must be `(0, …, 0, 1)`; for odd `K` the last component must be 1.
pub fn singular_image_check(n: usize, k_total: usize) -> Result<SingularImageReport> {
    if k_total < 2 {
        return Err(Error::InvalidArgument(format!("S_K needs K >= 2, got {k_total}")));
    }
    let system = symbolic_components(n, k_total)?;
    let zeroed = singular_set_variables(n, k_total);
    let restricted: Vec<Poly> = system.components.iter().map(|p| p.restrict_zero(&zeroed)).collect();
    let mut failures = Vec::new();
    for (idx, p) in restricted.iter().enumerate() {
        let last = idx + 1 == n;
        let good = if last {
            p.is_one()
        } else if k_total.is_multiple_of(2) {
            p.is_zero()
        } else {
            true
        };
        if !good {
            failures.push(idx + 1);
        }
    }
    Ok(SingularImageReport { n, k: k_total, restricted, failures })
}

/// Direct expansion of the last row of `Ψ_K` through full matrix products.
pub fn direct_components(n: usize, k_total: usize) -> Vec<Poly> {
    FactorChain::symbolic(n, k_total, Orientation::Inverse).psi_eval().last_row()
}
