//! Seeded random generators for points, polynomials and matrices.
//!
//! Every generator takes the RNG explicitly; [`rng`] builds the
//! deterministic ChaCha stream used by tests and the command line.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::matrix::Matrix;
use crate::polyring::{Monomial, Poly, VarId};
use crate::scalar::ExactComplex;
use crate::unipotent::{num_params, FactorChain, Orientation, ParamVector};

pub type SampleRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform point in the disc of radius `r`.
pub fn disc<R: Rng>(rng: &mut R, r: f64) -> Complex<f64> {
    let rho = r * rng.random::<f64>().sqrt();
    let theta = std::f64::consts::TAU * rng.random::<f64>();
    Complex::from_polar(rho, theta)
}

/// Uniform point in the ball of radius `r` in `C^d`.
pub fn ball<R: Rng>(rng: &mut R, d: usize, r: f64) -> Vec<Complex<f64>> {
    let mut v: Vec<Complex<f64>> = (0..d)
        .map(|_| Complex::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let len = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let radius = r * rng.random::<f64>().powf(1.0 / (2.0 * d as f64));
    for z in &mut v {
        *z *= radius / len;
    }
    v
}

/// Random chain with coordinates drawn from the ball of radius `scale` in
/// the full parameter space.
pub fn random_chain<R: Rng>(rng: &mut R, n: usize, k_total: usize, scale: f64) -> FactorChain<Complex<f64>> {
    let v = ball(rng, num_params(n) * k_total, scale);
    FactorChain::from_flat(n, k_total, Orientation::Inverse, &v).expect("shape")
}

/// Random chain with each coordinate drawn independently from a disc.
pub fn random_chain_disc<R: Rng>(rng: &mut R, n: usize, k_total: usize, r: f64) -> FactorChain<Complex<f64>> {
    let v: Vec<Complex<f64>> = (0..num_params(n) * k_total).map(|_| disc(rng, r)).collect();
    FactorChain::from_flat(n, k_total, Orientation::Inverse, &v).expect("shape")
}

/// Projects a chain onto `S_K` by zeroing the constrained coordinates of
/// every factor but the last.
pub fn onto_singular_set(chain: &FactorChain<Complex<f64>>) -> FactorChain<Complex<f64>> {
    let k_total = chain.len();
    let factors = chain
        .factors()
        .iter()
        .map(|f| {
            let mut f = f.clone();
            if f.factor() < k_total {
                for (r, c) in ParamVector::<Complex<f64>>::constrained_coordinates(f.n(), f.side()) {
                    f.set(r, c, Complex::new(0.0, 0.0)).expect("constrained coordinate");
                }
            }
            f
        })
        .collect();
    FactorChain::new(chain.n(), chain.orientation(), factors).expect("shape")
}

/// Small random rational: `p/q` with `|p| <= 9`, `1 <= q <= 4`.
pub fn small_rational<R: Rng>(rng: &mut R) -> BigRational {
    let p: i64 = rng.random_range(-9..=9);
    let q: i64 = rng.random_range(1..=4);
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

pub fn small_exact<R: Rng>(rng: &mut R, complex: bool) -> ExactComplex {
    let im = if complex { small_rational(rng) } else { BigRational::from_integer(0.into()) };
    ExactComplex::new(small_rational(rng), im)
}

/// Exact complex number approximating a uniform sample of the disc, with
/// dyadic parts.
pub fn exact_disc<R: Rng>(rng: &mut R, r: f64) -> ExactComplex {
    let z = disc(rng, r);
    let q = |x: f64| (x * 1024.0).round() / 1024.0;
    ExactComplex::from_f64(q(z.re), q(z.im)).expect("finite")
}

/// Random multilinear polynomial in `vars` with up to `max_terms` terms and
/// coefficients of modulus at most `coef_radius`.
pub fn random_multilinear<R: Rng>(rng: &mut R, vars: &[VarId], max_terms: usize, coef_radius: f64) -> Poly {
    let terms = rng.random_range(1..=max_terms.max(1));
    let mut p = Poly::default();
    for _ in 0..terms {
        let chosen: BTreeSet<VarId> = vars.iter().filter(|_| rng.random_bool(0.5)).cloned().collect();
        let mono = Monomial::from_factors(chosen.into_iter().map(|v| (v, 1)));
        p = &p + &Poly::term(exact_disc(rng, coef_radius), mono);
    }
    p
}

/// Random matrix of determinant one: a product of two near-identity
/// matrices, rescaled by a principal `n`-th root of the determinant.
pub fn random_sl<R: Rng>(rng: &mut R, n: usize) -> Matrix<Complex<f64>> {
    let near_identity = |rng: &mut R| {
        Matrix::from_fn(n, n, |i, j| {
            let d = disc(rng, 0.6);
            if i == j { d + Complex::one() } else { d }
        })
    };
    let a = near_identity(rng).mul(&near_identity(rng));
    let det = a.determinant();
    let root = det.powf(1.0 / n as f64);
    a.map(|z| z / root)
}

/// Random unipotent chain product in direct orientation.
pub fn random_unipotent_product<R: Rng>(rng: &mut R, n: usize, k_total: usize, r: f64) -> Matrix<Complex<f64>> {
    let chain = random_chain_disc(rng, n, k_total, r);
    FactorChain::new(n, Orientation::Direct, chain.factors().to_vec())
        .expect("shape")
        .psi_eval()
}
