//! Numerical continuation along sampled paths.
//!
//! Solutions of `Φ_K(Z) = b(t)` are followed with damped minimum-norm
//! Gauss–Newton corrections. Steps that fail (no convergence, a Jacobian
//! close to rank deficiency, or a jump larger than the continuity cap) are
//! bisected, up to a fixed depth.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::factor::{invert_list, peel_last_row, preimage_last_row, ElementaryFactor};
use crate::matrix::{min_norm_solve, singular_values, Matrix};
use crate::scalar::{distance, norm};
use crate::submersion::{symbolic_components, CompiledSystem};
use crate::unipotent::{FactorChain, Orientation, ParamVector, Side};

type C64 = Complex<f64>;

#[derive(Clone, Debug, PartialEq)]
pub struct TrackerConfig {
    pub max_iters: usize,
    /// Newton stopping tolerance, relative to `1 + |b|`.
    pub newton_tol: f64,
    /// Residual every accepted point must satisfy.
    pub accept_tol: f64,
    /// Relative singular value threshold for rank deficiency.
    pub rank_tol: f64,
    pub max_bisections: u32,
    /// Largest allowed parameter jump between consecutive accepted points.
    pub continuity_cap: f64,
    /// Largest allowed jump between consecutive path samples.
    pub step_cap: f64,
    /// Below this singular value ratio the point is moved along its fiber,
    /// away from the rank-deficient locus.
    pub safety_ratio: f64,
    /// Initial length of one such move.
    pub steer_step: f64,
    pub max_steer: usize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            max_iters: 60,
            newton_tol: 1e-13,
            accept_tol: 1e-8,
            rank_tol: 1e-8,
            max_bisections: 12,
            continuity_cap: 1.0,
            step_cap: 1.0,
            safety_ratio: 1e-3,
            steer_step: 0.05,
            max_steer: 40,
        }
    }
}

/// A sampled path `t ↦ b(t)` with a starting chain near `b(t_0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PathProblem {
    pub n: usize,
    pub k: usize,
    pub samples: Vec<(f64, Vec<C64>)>,
    pub seed: FactorChain<C64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackRecord {
    pub t: f64,
    pub z: FactorChain<C64>,
    pub residual: f64,
    pub min_singular_value: f64,
    /// Smallest over largest singular value of the Jacobian.
    pub singular_ratio: f64,
}

fn residual(system: &CompiledSystem<f64>, z: &[C64], b: &[C64]) -> f64 {
    distance(&system.phi(z), b)
}

fn singular_summary(system: &CompiledSystem<f64>, z: &[C64]) -> (f64, f64) {
    let sv = singular_values(&system.jacobian(z));
    let largest = sv.first().copied().unwrap_or(0.0);
    let smallest = sv.last().copied().unwrap_or(0.0);
    let ratio = if largest > 0.0 { smallest / largest } else { 0.0 };
    (smallest, ratio)
}

/// Damped Gauss–Newton with minimum-norm steps for `Φ_K(z) = b`.
pub fn newton_step(system: &CompiledSystem<f64>, z: &[C64], b: &[C64], config: &TrackerConfig) -> Result<Vec<C64>> {
    if b.len() != system.n || z.len() != system.num_vars() {
        return Err(Error::Shape(format!(
            "system has {} equations in {} unknowns, got b of length {} and a point of length {}",
            system.n,
            system.num_vars(),
            b.len(),
            z.len()
        )));
    }
    let tol = config.newton_tol * (1.0 + norm(b));
    let mut x = z.to_vec();
    let mut res = residual(system, &x, b);
    for _ in 0..config.max_iters {
        if res <= tol {
            return Ok(x);
        }
        let j = system.jacobian(&x);
        let (_, ratio) = singular_summary(system, &x);
        if ratio <= config.rank_tol {
            return Err(Error::NearSingularJacobian { ratio });
        }
        let r: Vec<C64> = system.phi(&x).iter().zip(b).map(|(p, q)| q - p).collect();
        let delta = min_norm_solve(&j, &r, config.rank_tol);
        let mut lambda = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let trial: Vec<C64> = x.iter().zip(&delta).map(|(a, d)| a + d * lambda).collect();
            let trial_res = residual(system, &trial, b);
            if trial_res < res {
                x = trial;
                res = trial_res;
                improved = true;
                break;
            }
            lambda *= 0.5;
        }
        if !improved {
            break;
        }
    }
    // stagnation at rounding level still counts if the point is acceptable
    if res <= tol || res <= config.accept_tol.min(1e3 * tol) {
        Ok(x)
    } else {
        Err(Error::NoConvergence { iters: config.max_iters, residual: res })
    }
}

struct Tracker<'a> {
    system: &'a CompiledSystem<f64>,
    config: &'a TrackerConfig,
}

impl Tracker<'_> {
    fn ratio(&self, z: &[C64]) -> f64 {
        singular_summary(self.system, z).1
    }

    /// Moves `z` inside the fiber over `b` until the singular value ratio
    /// reaches the safety margin: finite-difference ascent on the ratio,
    /// projected onto the kernel of the Jacobian, then re-corrected.
    /// Minimum-norm corrections alone can slide into the rank-deficient
    /// locus, since they never move along the fiber.
    fn steer(&self, z: Vec<C64>, b: &[C64]) -> Vec<C64> {
        let cfg = self.config;
        let mut x = z;
        let mut ratio = self.ratio(&x);
        let mut step = cfg.steer_step;
        let mut moved = 0.0;
        for _ in 0..cfg.max_steer {
            if ratio >= cfg.safety_ratio || moved >= 0.5 * cfg.continuity_cap {
                break;
            }
            let h = 1e-7;
            let grad: Vec<C64> = (0..x.len())
                .map(|k| {
                    let probe = |d: C64| {
                        let mut y = x.clone();
                        y[k] += d;
                        (self.ratio(&y) - ratio) / h
                    };
                    Complex::new(probe(Complex::new(h, 0.0)), probe(Complex::new(0.0, h)))
                })
                .collect();
            let j = self.system.jacobian(&x);
            let jg: Vec<C64> = (0..j.rows())
                .map(|r| j.row(r).iter().zip(&grad).map(|(a, g)| a * g).sum())
                .collect();
            let along = min_norm_solve(&j, &jg, cfg.rank_tol);
            let dir: Vec<C64> = grad.iter().zip(&along).map(|(g, a)| g - a).collect();
            let len = norm(&dir);
            if len == 0.0 {
                break;
            }
            let mut accepted = false;
            while step > 1e-6 {
                let trial: Vec<C64> = x.iter().zip(&dir).map(|(a, d)| a + d * (step / len)).collect();
                if let Ok(y) = newton_step(self.system, &trial, b, cfg) {
                    let r = self.ratio(&y);
                    if r > ratio {
                        moved += distance(&y, &x);
                        x = y;
                        ratio = r;
                        accepted = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        x
    }

    fn correct(&self, from: &[C64], b: &[C64]) -> Result<Vec<C64>> {
        let mut next = newton_step(self.system, from, b, self.config)?;
        if self.ratio(&next) < self.config.safety_ratio {
            next = self.steer(next, b);
        }
        let (_, ratio) = singular_summary(self.system, &next);
        if ratio <= self.config.rank_tol {
            return Err(Error::NearSingularJacobian { ratio });
        }
        if distance(&next, from) > self.config.continuity_cap {
            return Err(Error::NoConvergence { iters: 0, residual: f64::INFINITY });
        }
        Ok(next)
    }

    fn advance(&self, z: &[C64], t0: f64, b0: &[C64], t1: f64, b1: &[C64], depth: u32) -> Result<Vec<C64>> {
        match self.correct(z, b1) {
            Ok(next) => Ok(next),
            Err(_) if depth < self.config.max_bisections => {
                let tm = 0.5 * (t0 + t1);
                let bm: Vec<C64> = b0.iter().zip(b1).map(|(p, q)| (p + q) * 0.5).collect();
                let mid = self.advance(z, t0, b0, tm, &bm, depth + 1)?;
                self.advance(&mid, tm, &bm, t1, b1, depth + 1)
            }
            Err(_) => Err(Error::StepUnderflow { t0, t1 }),
        }
    }
}

fn record(system: &CompiledSystem<f64>, n: usize, k: usize, t: f64, z: Vec<C64>, b: &[C64]) -> Result<TrackRecord> {
    let (min_singular_value, singular_ratio) = singular_summary(system, &z);
    Ok(TrackRecord {
        t,
        residual: residual(system, &z, b),
        z: FactorChain::from_flat(n, k, Orientation::Inverse, &z)?,
        min_singular_value,
        singular_ratio,
    })
}

/// Tracks the path sample by sample. A seed too close to `S_K` is padded
/// with three extra factors first, so the records may have `K + 3` factors.
pub fn track_path(problem: &PathProblem, config: &TrackerConfig) -> Result<Vec<TrackRecord>> {
    let PathProblem { n, samples, .. } = problem;
    let n = *n;
    if samples.is_empty() {
        return Ok(Vec::new());
    }
    if problem.seed.n() != n || problem.seed.len() != problem.k || problem.seed.orientation() != Orientation::Inverse {
        return Err(Error::Shape(format!("seed must be an inverse-orientation chain with n = {n}, K = {}", problem.k)));
    }
    for w in samples.windows(2) {
        let jump = distance(&w[1].1, &w[0].1);
        if jump > config.step_cap {
            return Err(Error::InvalidArgument(format!(
                "samples at t = {} and t = {} differ by {jump:e}, above the step cap {:e}",
                w[0].0, w[1].0, config.step_cap
            )));
        }
    }
    if samples.iter().any(|(_, b)| b.len() != n) {
        return Err(Error::Shape(format!("every sample must have length {n}")));
    }

    let mut seed = problem.seed.clone();
    let mut system = symbolic_components(n, seed.len())?.compile::<f64>();
    if singular_summary(&system, &seed.flat()).1 <= config.rank_tol {
        seed = seed.pad_factors()?;
        system = symbolic_components(n, seed.len())?.compile::<f64>();
    }
    let k = seed.len();
    let tracker = Tracker { system: &system, config };

    let (t0, b0) = &samples[0];
    let mut z = newton_step(&system, &seed.flat(), b0, config)?;
    if singular_summary(&system, &z).1 < config.safety_ratio {
        z = tracker.steer(z, b0);
    }
    let mut out = vec![record(&system, n, k, *t0, z.clone(), b0)?];
    for w in samples.windows(2) {
        let ((ta, ba), (tb, bb)) = (&w[0], &w[1]);
        z = tracker.advance(&z, *ta, ba, *tb, bb, 0)?;
        out.push(record(&system, n, k, *tb, z.clone(), bb)?);
    }
    if let Some(bad) = out.iter().find(|r| r.residual > config.accept_tol) {
        return Err(Error::NoConvergence { iters: config.max_iters, residual: bad.residual });
    }
    Ok(out)
}

/// Per-sample factorization whose factor layout is the same at every sample.
#[derive(Clone, Debug, PartialEq)]
pub struct PathFactorization {
    pub t: f64,
    /// Direct orientation: the product of the factor matrices is the sample.
    pub chain: FactorChain<C64>,
}

/// Factors a sampled path of matrices of determinant one, keeping the
/// factor parameters continuous in `t`.
pub fn factor_matrix_path(samples: &[(f64, Matrix<C64>)], config: &TrackerConfig) -> Result<Vec<PathFactorization>> {
    let Some((_, first)) = samples.first() else {
        return Ok(Vec::new());
    };
    let n = first.rows();
    for (t, a) in samples {
        if !a.is_square() || a.rows() != n {
            return Err(Error::Shape(format!("sample at t = {t} is not {n}x{n}")));
        }
        let det = a.determinant();
        if (det - 1.0).norm() > 1e-8 {
            return Err(Error::Determinant { re: det.re, im: det.im });
        }
    }
    let lists = structural_factors(samples, config)?;
    samples
        .iter()
        .zip(lists)
        .map(|((t, _), list)| Ok(PathFactorization { t: *t, chain: to_direct_chain(n, list)? }))
        .collect()
}

/// Factor lists with a layout that depends only on `n`; no factor is dropped
/// even if it happens to be the identity.
fn structural_factors(samples: &[(f64, Matrix<C64>)], config: &TrackerConfig) -> Result<Vec<Vec<ElementaryFactor<C64>>>> {
    let n = samples[0].1.rows();
    if n <= 1 {
        return Ok(vec![Vec::new(); samples.len()]);
    }
    let path: Vec<(f64, Vec<C64>)> = samples.iter().map(|(t, a)| (*t, a.last_row())).collect();
    let seed = preimage_last_row(&path[0].1)?;
    let problem = PathProblem { n, k: 3, samples: path, seed };
    let tracked = track_path(&problem, config)?;

    let mut peels = Vec::with_capacity(samples.len());
    let mut cores = Vec::with_capacity(samples.len());
    for ((t, a), rec) in samples.iter().zip(&tracked) {
        let peel = peel_last_row(a, &rec.z, 1e-6 * (1.0 + a.frobenius_norm()))?;
        cores.push((*t, peel.core.clone()));
        peels.push(peel);
    }
    let core_lists = structural_factors(&cores, config)?;

    let mut out = Vec::with_capacity(samples.len());
    for ((rec, peel), core_list) in tracked.iter().zip(&peels).zip(core_lists) {
        // A = diag(core^{-1}, 1) · E(-h) · Ψ_K(Z)
        let mut list: Vec<ElementaryFactor<C64>> = invert_list(&core_list).iter().map(|f| f.embed(n)).collect();
        let mut e = Matrix::identity(n);
        for (i, h) in peel.h.iter().enumerate() {
            e.set(i, n - 1, -h);
        }
        list.push(ElementaryFactor::from_matrix(Side::Upper, &e));
        for p in rec.z.reoriented().factors() {
            list.push(ElementaryFactor::new(p.side(), n, p.entries().to_vec())?);
        }
        out.push(merge_same_side(list));
    }
    Ok(out)
}

fn merge_same_side(list: Vec<ElementaryFactor<C64>>) -> Vec<ElementaryFactor<C64>> {
    let mut out: Vec<ElementaryFactor<C64>> = Vec::with_capacity(list.len());
    for f in list {
        match out.last().and_then(|top| top.merge(&f)) {
            Some(m) => {
                out.pop();
                out.push(m);
            }
            None => out.push(f),
        }
    }
    out
}

fn to_direct_chain(n: usize, mut list: Vec<ElementaryFactor<C64>>) -> Result<FactorChain<C64>> {
    if list.first().is_some_and(|f| f.side == Side::Upper) {
        list.insert(0, ElementaryFactor::identity(Side::Lower, n));
    }
    let factors = list
        .into_iter()
        .enumerate()
        .map(|(idx, f)| ParamVector::new(n, idx + 1, f.entries))
        .collect::<Result<Vec<_>>>()?;
    FactorChain::new(n, Orientation::Direct, factors)
}
