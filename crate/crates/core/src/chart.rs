//! Local charts on the fibers `Φ_K^{-1}(a)`.
//!
//! On a stratum the fiber splits as a residual hypersurface
//! `{P_{r,K-1} = a_r}` in the residual coordinates, times an affine space of
//! free coordinates; the remaining `n - 1` coordinates are rational
//! functions of those with denominator `a_r`. Numerators mention the target
//! through free symbols `a1, …, an`.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex;
use num_traits::Zero;
use rand::Rng;

use crate::error::{Error, Result};
use crate::polyring::{Poly, VarId};
use crate::sampling::disc;
use crate::spray::{stratum_index, Generator, Point, ShearField, SprayMap};
use crate::submersion::{component_levels, term_budget_from_env};
use crate::unipotent::{chain_variables, FactorChain, Orientation};

type C64 = Complex<f64>;

/// Free symbol standing for the target coordinate `a_j`.
pub fn target_symbol(j: usize) -> VarId {
    VarId::free(format!("a{j}"))
}

fn a(j: usize) -> Poly {
    Poly::var(target_symbol(j))
}

fn z(factor: usize, row: usize, col: usize) -> VarId {
    VarId::Param { factor, row, col }
}

fn pz(factor: usize, row: usize, col: usize) -> Poly {
    Poly::var(z(factor, row, col))
}

/// A coordinate given by `numerator / a_pivot`.
#[derive(Clone, Debug, PartialEq)]
pub struct SolvedVariable {
    pub var: VarId,
    pub numerator: Poly,
}

#[derive(Clone, Debug)]
pub struct FiberChart {
    n: usize,
    k_total: usize,
    stratum: usize,
    pivot: usize,
    target: Vec<C64>,
    solved: Vec<SolvedVariable>,
    free: Vec<VarId>,
    residual_vars: Vec<VarId>,
    residual: Poly,
}

impl FiberChart {
    pub fn new(n: usize, k_total: usize, target: &[C64]) -> Result<Self> {
        if target.len() != n {
            return Err(Error::Shape(format!("target has length {}, expected {n}", target.len())));
        }
        if k_total < 2 {
            return Err(Error::InvalidArgument(format!("fiber charts need K >= 2, got {k_total}")));
        }
        let even = k_total.is_multiple_of(2);
        let stratum = stratum_index(target, even)?;
        if stratum >= 2 && k_total < 3 {
            return Err(Error::UnsupportedStratum {
                stratum,
                k: k_total,
                reason: "strata beyond the first need K >= 3".into(),
            });
        }
        let levels = component_levels(n, k_total - 1, term_budget_from_env())?;
        let prev = &levels[k_total - 1];
        let prev2 = &levels[k_total - 2];
        let kk = k_total;

        let mut solved = Vec::new();
        let mut free = Vec::new();
        let pivot;
        if even {
            let k = stratum;
            pivot = k;
            for j in k + 1..=n {
                let mut num = &prev[j - 1] - &a(j);
                for m in k + 1..j {
                    num = &num - &(&pz(kk, m, j) * &a(m));
                }
                solved.push(SolvedVariable { var: z(kk, k, j), numerator: num });
            }
            for m in 1..k {
                let mut num = prev2[m - 1].clone();
                for j in k + 1..=n {
                    num = &num - &(&pz(kk - 1, j, m) * &prev[j - 1]);
                }
                solved.push(SolvedVariable { var: z(kk - 1, k, m), numerator: num });
            }
            for i in 1..k {
                for j in i + 1..=n {
                    free.push(z(kk, i, j));
                }
            }
            for j in 1..k.saturating_sub(1) {
                for i in j + 1..k {
                    free.push(z(kk - 1, i, j));
                }
            }
        } else {
            let r = n - stratum + 1;
            pivot = r;
            for m in 1..r {
                let mut num = &prev[m - 1] - &a(m);
                for j in m + 1..r {
                    num = &num - &(&pz(kk, j, m) * &a(j));
                }
                solved.push(SolvedVariable { var: z(kk, r, m), numerator: num });
            }
            for m in r + 1..=n {
                let mut num = prev2[m - 1].clone();
                for j in 1..r {
                    num = &num - &(&pz(kk - 1, j, m) * &prev[j - 1]);
                }
                solved.push(SolvedVariable { var: z(kk - 1, r, m), numerator: num });
            }
            for j in r + 1..=n {
                for m in 1..j {
                    free.push(z(kk, j, m));
                }
            }
            for m in r + 1..=n {
                for j in r + 1..m {
                    free.push(z(kk - 1, j, m));
                }
            }
        }

        let taken: BTreeSet<&VarId> = solved.iter().map(|s| &s.var).chain(free.iter()).collect();
        let residual_vars: Vec<VarId> = chain_variables(n, k_total)
            .into_iter()
            .filter(|v| !taken.contains(v))
            .collect();
        Ok(FiberChart {
            n,
            k_total,
            stratum,
            pivot,
            target: target.to_vec(),
            solved,
            free,
            residual_vars,
            residual: prev[pivot - 1].clone(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k_total(&self) -> usize {
        self.k_total
    }

    pub fn stratum(&self) -> usize {
        self.stratum
    }

    /// Index `r` of the target coordinate used as denominator.
    pub fn pivot(&self) -> usize {
        self.pivot
    }

    pub fn target(&self) -> &[C64] {
        &self.target
    }

    pub fn solved(&self) -> &[SolvedVariable] {
        &self.solved
    }

    pub fn free(&self) -> &[VarId] {
        &self.free
    }

    pub fn residual_vars(&self) -> &[VarId] {
        &self.residual_vars
    }

    /// The residual polynomial; the fiber needs `residual = a_pivot`.
    pub fn residual(&self) -> &Poly {
        &self.residual
    }

    /// `(M, N)`: residual and free dimensions.
    pub fn base_dims(&self) -> (usize, usize) {
        (self.residual_vars.len(), self.free.len())
    }

    fn target_point(&self) -> Point<f64> {
        self.target.iter().enumerate().map(|(j, &v)| (target_symbol(j + 1), v)).collect()
    }

    fn check_coords(&self, point: &Point<f64>) -> Result<()> {
        let missing: Vec<VarId> = self
            .residual_vars
            .iter()
            .chain(&self.free)
            .filter(|v| !point.contains_key(*v))
            .cloned()
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::MissingVariables(missing))
        }
    }

    /// `residual(point) - a_pivot`.
    pub fn residual_value(&self, point: &Point<f64>) -> Result<C64> {
        Ok(self.residual.evaluate(point)? - self.target[self.pivot - 1])
    }

    /// Gradient of the residual with respect to the residual coordinates.
    pub fn residual_gradient(&self, point: &Point<f64>) -> Result<Vec<C64>> {
        self.residual_vars
            .iter()
            .map(|v| self.residual.partial_derivative(v).evaluate(point))
            .collect()
    }

    /// Full chain from chart coordinates (residual and free).
    pub fn reconstruct(&self, point: &Point<f64>) -> Result<FactorChain<C64>> {
        self.check_coords(point)?;
        let denom = self.target[self.pivot - 1];
        let mut full = self.target_point();
        full.extend(point.iter().map(|(k, v)| (k.clone(), *v)));
        let mut values: BTreeMap<VarId, C64> = BTreeMap::new();
        for s in &self.solved {
            values.insert(s.var.clone(), s.numerator.evaluate(&full)? / denom);
        }
        let flat: Vec<C64> = chain_variables(self.n, self.k_total)
            .iter()
            .map(|v| values.get(v).or_else(|| point.get(v)).copied().expect("every coordinate is covered"))
            .collect();
        FactorChain::from_flat(self.n, self.k_total, Orientation::Inverse, &flat)
    }

    /// Moves `var` so that the residual equation holds, keeping the other
    /// coordinates. Relies on the residual being affine in each variable.
    pub fn solve_residual_for(&self, point: &mut Point<f64>, var: &VarId) -> Result<()> {
        let slope = self.residual.partial_derivative(var).evaluate(point)?;
        if slope.norm() < 1e-12 {
            return Err(Error::InvalidArgument(format!("residual does not depend on {var} here")));
        }
        let value = self.residual_value(point)?;
        *point.get_mut(var).ok_or_else(|| Error::MissingVariables(vec![var.clone()]))? -= value / slope;
        Ok(())
    }

    /// Random point of the chart: residual coordinates from the disc of
    /// radius `r` projected onto the residual hypersurface along the
    /// steepest coordinate, free coordinates from the same disc.
    pub fn sample_point<R: Rng>(&self, rng: &mut R, r: f64) -> Result<Point<f64>> {
        let mut point: Point<f64> = self.residual_vars.iter().chain(&self.free).map(|v| (v.clone(), disc(rng, r))).collect();
        let support: Vec<VarId> = self.residual.variables().into_iter().collect();
        if support.is_empty() {
            return if self.residual_value(&point)?.norm() < 1e-12 {
                Ok(point)
            } else {
                Err(Error::InvalidArgument("residual equation is an inconsistent constant".into()))
            };
        }
        let (best, _) = support
            .iter()
            .map(|v| (v, self.residual.partial_derivative(v).evaluate(&point).map(|s| s.norm()).unwrap_or(0.0)))
            .fold((&support[0], -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        self.solve_residual_for(&mut point, &best.clone())?;
        Ok(point)
    }

    /// Spray through `base`: shear fields of the residual for every pair of
    /// residual coordinates it involves, and translations along the rest.
    pub fn spray(&self, base: Point<f64>) -> Result<SprayMap<f64>> {
        self.check_coords(&base)?;
        let support = self.residual.variables();
        let involved: Vec<&VarId> = self.residual_vars.iter().filter(|v| support.contains(*v)).collect();
        let mut generators = Vec::new();
        for (idx, &vi) in involved.iter().enumerate() {
            for &vj in &involved[idx + 1..] {
                generators.push(Generator::Shear(ShearField::new(self.residual.clone(), vi.clone(), vj.clone())?));
            }
        }
        for v in self.residual_vars.iter().filter(|v| !support.contains(*v)).chain(&self.free) {
            generators.push(Generator::Translation(v.clone()));
        }
        SprayMap::new(generators, base)
    }
}

/// Whether the residual's differential vanishes at `point` (relative to `tol`).
pub fn residual_is_critical(chart: &FiberChart, point: &Point<f64>, tol: f64) -> Result<bool> {
    let g = chart.residual_gradient(point)?;
    Ok(g.iter().all(|x| x.norm() <= tol) || g.iter().all(Zero::is_zero))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::rng;
    use crate::scalar::cx;
    use crate::unipotent::num_params;

    #[test]
    fn two_by_two_first_stratum() {
        let target: [C64; 2] = [cx(2.0, 1.0), cx(-0.5, 0.3)];
        let chart = FiberChart::new(2, 2, &target).unwrap();
        assert_eq!(chart.stratum(), 1);
        assert_eq!(chart.residual(), &Poly::var(z(1, 2, 1)).scale(&(-crate::scalar::ExactComplex::from_int(1))));
        assert_eq!(chart.base_dims(), (1, 0));
        let point: Point<f64> = [(z(1, 2, 1), -target[0])].into_iter().collect();
        let chain = chart.reconstruct(&point).unwrap();
        let z12: C64 = (cx::<f64>(1.0, 0.0) - target[1]) / target[0];
        assert!((chain.flat()[1] - z12).norm() < 1e-15);
        let row = chain.phi_eval().unwrap();
        assert!((row[0] - target[0]).norm() < 1e-14 && (row[1] - target[1]).norm() < 1e-14);
    }

    #[test]
    fn two_factor_charts_reject_higher_strata() {
        let err = FiberChart::new(3, 2, &[cx(0.0, 0.0), cx(1.0, 0.0), cx(0.0, 0.0)]).unwrap_err();
        assert!(matches!(err, Error::UnsupportedStratum { stratum: 2, .. }));
        assert_eq!(FiberChart::new(3, 3, &[cx(0.0, 0.0); 3]).unwrap_err(), Error::ZeroVector);
    }

    #[test]
    fn charts_land_in_fiber() {
        let mut g = rng(7);
        let cases: Vec<(usize, usize, Vec<C64>)> = vec![
            (3, 2, vec![cx(1.0, 0.5), cx(0.0, 0.0), cx(2.0, -1.0)]),
            (3, 3, vec![cx(1.0, 0.5), cx(0.3, 0.0), cx(2.0, -1.0)]),
            (3, 3, vec![cx(1.0, 0.5), cx(0.3, 0.0), cx(0.0, 0.0)]),
            (3, 3, vec![cx(1.0, 0.5), cx(0.0, 0.0), cx(0.0, 0.0)]),
            (3, 4, vec![cx(0.0, 0.0), cx(0.7, 0.2), cx(-1.0, 0.0)]),
            (3, 4, vec![cx(0.0, 0.0), cx(0.0, 0.0), cx(-1.0, 0.4)]),
            (4, 4, vec![cx(0.0, 0.0), cx(0.0, 0.0), cx(1.5, 0.0), cx(0.0, 1.0)]),
            (4, 5, vec![cx(0.0, 0.9), cx(1.0, 0.0), cx(0.0, 0.0), cx(0.0, 0.0)]),
        ];
        for (n, k, target) in cases {
            let chart = FiberChart::new(n, k, &target).unwrap();
            let (m, f) = chart.base_dims();
            assert_eq!(m + f + chart.solved().len(), k * num_params(n));
            assert_eq!(chart.solved().len(), n - 1);
            for _ in 0..5 {
                let p = chart.sample_point(&mut g, 1.0).unwrap();
                let chain = chart.reconstruct(&p).unwrap();
                let row = chain.phi_eval().unwrap();
                let err: f64 = row.iter().zip(&target).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
                assert!(err < 1e-9, "n={n} K={k} stratum={} err={err}", chart.stratum());
                if !residual_is_critical(&chart, &p, 1e-9).unwrap() {
                    assert!(!chain.in_singular_set().unwrap());
                }
            }
        }
    }

    #[test]
    fn spray_stays_in_fiber() {
        let mut g = rng(11);
        let target = vec![cx(0.4, 0.0), cx(-1.0, 0.3), cx(0.8, 0.8)];
        let chart = FiberChart::new(3, 3, &target).unwrap();
        let base = chart.sample_point(&mut g, 0.8).unwrap();
        let spray = chart.spray(base).unwrap();
        let t: Vec<C64> = (0..spray.generators().len()).map(|_| disc(&mut g, 0.5)).collect();
        let moved = spray.eval(&t).unwrap();
        assert!(chart.residual_value(&moved).unwrap().norm() < 1e-10);
        let row = chart.reconstruct(&moved).unwrap().phi_eval().unwrap();
        for (x, y) in row.iter().zip(&target) {
            assert!((x - y).norm() < 1e-9);
        }
    }
}
