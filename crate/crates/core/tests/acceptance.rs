//! Acceptance suite. Runs every criterion, prints one line each and exits
//! non-zero if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use num_complex::Complex;
use num_traits::{One, Zero};
use rand::Rng;
use rayon::prelude::*;

use unifact::chart::{residual_is_critical, FiberChart};
use unifact::factor::{
    factor_constant, factor_sl2_poly, peel_last_row, preimage_last_row, product, verify_exact, verify_numeric,
    ElementaryFactor, PolyMatrix2,
};
use unifact::matrix::{numerical_rank, Matrix};
use unifact::polyring::{Poly, VarId};
use unifact::sampling::{ball, disc, onto_singular_set, random_chain, random_multilinear, random_sl, rng, small_exact};
use unifact::scalar::{distance, norm};
use unifact::spray::{span_rank, Point, ShearField};
use unifact::submersion::{direct_components, singular_image_check, symbolic_components};
use unifact::tracker::{factor_matrix_path, track_path, PathProblem, TrackerConfig};
use unifact::unipotent::{Orientation, Side};
use unifact::{ComplexMatrix, C64};

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome { ok, detail: detail.into() }
}

fn c(x: f64) -> C64 {
    Complex::new(x, 0.0)
}

fn z(factor: usize, row: usize, col: usize) -> VarId {
    VarId::Param { factor, row, col }
}

fn recurrence_matches_expansion() -> Outcome {
    let mut checked = 0;
    for n in 2..=4 {
        for k in 1..=5 {
            let rec = symbolic_components(n, k).expect("within budget");
            let direct = direct_components(n, k);
            if rec.components != direct {
                return outcome(false, format!("n={n} K={k} differs"));
            }
            checked += 1;
        }
    }
    outcome(true, format!("{checked} (n, K) pairs equal term by term"))
}

/// Factor-`K` variables of `P_{k,K}`, written out independently.
fn expected_last_factor_support(n: usize, big_k: usize, k: usize) -> BTreeSet<VarId> {
    let mut out = BTreeSet::new();
    if big_k.is_multiple_of(2) {
        for j in 1..=k {
            for i in 1..j {
                out.insert(z(big_k, i, j));
            }
        }
    } else {
        for j in k..=n {
            for i in j + 1..=n {
                out.insert(z(big_k, i, j));
            }
        }
    }
    out
}

fn dependency_sets() -> Outcome {
    let mut checked = 0;
    for n in 2..=4 {
        for big_k in 1..=5 {
            let sys = symbolic_components(n, big_k).expect("within budget");
            for (idx, p) in sys.components.iter().enumerate() {
                let (multilinear, _) = p.is_multilinear();
                let support: BTreeSet<VarId> =
                    p.variables().into_iter().filter(|v| v.factor() == Some(big_k)).collect();
                if !multilinear || support != expected_last_factor_support(n, big_k, idx + 1) {
                    return outcome(false, format!("P_{{{},{big_k}}} for n={n}", idx + 1));
                }
                checked += 1;
            }
        }
    }
    outcome(true, format!("{checked} components multilinear with the stated factor-K support"))
}

fn rank_characterization() -> Outcome {
    let per = 1000;
    let mut disagreements = 0usize;
    let mut total = 0usize;
    for n in 2..=4 {
        for big_k in 2..=5 {
            let sys = symbolic_components(n, big_k).expect("within budget").compile::<f64>();
            let seed = (n * 10 + big_k) as u64;
            let bad: usize = (0..per)
                .into_par_iter()
                .map(|i| {
                    let mut g = rng(seed * 100_000 + i as u64);
                    let off = random_chain(&mut g, n, big_k, 2.0);
                    let on = onto_singular_set(&off);
                    let r_off = numerical_rank(&sys.jacobian(&off.flat()), 1e-8).0;
                    let r_on = numerical_rank(&sys.jacobian(&on.flat()), 1e-8).0;
                    let off_ok = !off.in_singular_set().unwrap() && r_off == n;
                    let on_ok = on.in_singular_set().unwrap() && r_on < n;
                    usize::from(!off_ok) + usize::from(!on_ok)
                })
                .sum();
            disagreements += bad;
            total += 2 * per;
        }
    }
    outcome(disagreements == 0, format!("{disagreements} disagreements over {total} points"))
}

fn singular_image() -> Outcome {
    for n in 2..=4 {
        for big_k in 2..=5 {
            let report = singular_image_check(n, big_k).expect("within budget");
            if !report.ok() {
                return outcome(false, format!("n={n} K={big_k} components {:?}", report.failures));
            }
        }
    }
    outcome(true, "restrictions to S_K are (0,...,0,1) for even K and end in 1 for odd K")
}

fn preimages() -> Outcome {
    let mut worst = 0.0f64;
    let mut zero_first = 0;
    let mut failures = 0;
    let mut total = 0;
    for n in 2..=5 {
        let mut g = rng(500 + n as u64);
        for i in 0..1000 {
            let mut b = ball(&mut g, n, 3.0);
            if i % 4 == 0 {
                b[0] = c(0.0);
                zero_first += 1;
            }
            if norm(&b) == 0.0 {
                continue;
            }
            let chain = preimage_last_row(&b).expect("nonzero b");
            let err = distance(&chain.phi_eval().unwrap(), &b) / norm(&b);
            worst = worst.max(err);
            if err > 1e-12 || chain.in_singular_set().unwrap() {
                failures += 1;
            }
            total += 1;
        }
    }
    outcome(
        failures == 0 && zero_first >= 200,
        format!("{total} targets ({zero_first} with b1 = 0), worst relative error {worst:.2e}, {failures} failures"),
    )
}

fn peel_and_constant() -> Outcome {
    let results: Vec<(f64, f64, usize, usize, bool)> = (0..500u64)
        .into_par_iter()
        .map(|i| {
            let mut g = rng(6000 + i);
            let n = 2 + (i as usize % 5);
            let a = random_sl(&mut g, n);
            let z = preimage_last_row(&a.last_row()).unwrap();
            let peel = peel_last_row(&a, &z, 1e-10).unwrap();
            let mut unit = vec![c(0.0); n];
            unit[n - 1] = c(1.0);
            let row_err = distance(&peel.b.last_row(), &unit);
            let factors = factor_constant(&a).unwrap();
            let err = product(n, &factors).frobenius_distance(&a) / a.frobenius_norm();
            let strict = factors.iter().all(|f| f.n == n && f.matrix().get(0, 0) == &c(1.0));
            (row_err, err, factors.len(), n, strict)
        })
        .collect();
    let worst_row = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let worst = results.iter().map(|r| r.1).fold(0.0, f64::max);
    let strict = results.iter().all(|r| r.4);
    let mut max_k: BTreeMap<usize, usize> = BTreeMap::new();
    for r in &results {
        let e = max_k.entry(r.3).or_default();
        *e = (*e).max(r.2);
    }
    outcome(
        worst_row <= 1e-10 && worst <= 1e-10 && strict,
        format!("500 matrices: last row error {worst_row:.2e}, product error {worst:.2e}, max K by n {max_k:?}"),
    )
}

fn random_univariate<R: Rng>(g: &mut R, degree: usize) -> Poly {
    let zvar = Poly::var(VarId::free("z"));
    let mut p = Poly::zero();
    let mut power = Poly::one();
    for _ in 0..=degree {
        let complex = g.random_bool(0.5);
        p = &p + &power.scale(&small_exact(g, complex));
        power = &power * &zvar;
    }
    p
}

fn sl2_polynomial() -> Outcome {
    let mut g = rng(77);
    let mut failures = 0;
    let mut total_k = 0;
    for _ in 0..200 {
        let count = g.random_range(1..=8);
        let shears: Vec<ElementaryFactor<Poly>> = (0..count)
            .map(|_| {
                let side = if g.random_bool(0.5) { Side::Lower } else { Side::Upper };
                let degree = g.random_range(0..=5);
                ElementaryFactor::shear(side, random_univariate(&mut g, degree))
            })
            .collect();
        let m = product(2, &shears);
        let pm = PolyMatrix2::from_matrix(&m).expect("determinant one");
        let f = factor_sl2_poly(&pm).expect("univariate");
        let report = verify_exact(&m, &f);
        total_k += report.k;
        if !report.matches {
            failures += 1;
        }
    }
    let (z1, z2) = (Poly::var(VarId::free("z1")), Poly::var(VarId::free("z2")));
    let one = Poly::one();
    let cohn = Matrix::from_rows(vec![
        vec![&one - &(&z1 * &z2), &z1 * &z1],
        vec![-(&z2 * &z2), &one + &(&z1 * &z2)],
    ])
    .unwrap();
    let cohn_det_one = cohn.det_expansion() == Poly::one();
    outcome(
        failures == 0 && cohn_det_one,
        format!("200 products, {failures} mismatches, mean K {:.2}; Cohn determinant is 1: {cohn_det_one}", total_k as f64 / 200.0),
    )
}

/// Adaptive RK4 (step doubling) for `dx/ds = t · V(x)` on `s ∈ [0, 1]`.
fn rk4_flow(field: &ShearField, start: &Point<f64>, t: C64) -> Point<f64> {
    let (vi, vj) = field.vars();
    let (vi, vj) = (vi.clone(), vj.clone());
    let rhs = |x: &Point<f64>| -> (C64, C64) {
        let (di, dj) = field.vector_at(x).unwrap();
        (di * t, dj * t)
    };
    let step = |x: &Point<f64>, h: f64| -> Point<f64> {
        let shift = |x: &Point<f64>, d: (C64, C64), s: f64| {
            let mut y = x.clone();
            *y.get_mut(&vi).unwrap() += d.0 * s;
            *y.get_mut(&vj).unwrap() += d.1 * s;
            y
        };
        let k1 = rhs(x);
        let k2 = rhs(&shift(x, k1, h / 2.0));
        let k3 = rhs(&shift(x, k2, h / 2.0));
        let k4 = rhs(&shift(x, k3, h));
        let d = (
            (k1.0 + k2.0 * 2.0 + k3.0 * 2.0 + k4.0) / 6.0,
            (k1.1 + k2.1 * 2.0 + k3.1 * 2.0 + k4.1) / 6.0,
        );
        shift(x, d, h)
    };
    let pair = |x: &Point<f64>| [x[&vi], x[&vj]];
    let mut x = start.clone();
    let (mut s, mut h) = (0.0f64, 0.05f64);
    while s < 1.0 {
        h = h.min(1.0 - s);
        let full = step(&x, h);
        let half = step(&step(&x, h / 2.0), h / 2.0);
        let err = distance(&pair(&full), &pair(&half));
        let scale = 1.0 + norm(&pair(&half));
        if err <= 1e-11 * scale || h < 1e-9 {
            x = half;
            s += h;
            h *= 1.5;
        } else {
            h /= 2.0;
        }
    }
    x
}

fn flows_and_spans() -> Outcome {
    let vars: Vec<VarId> = (1..=6).map(|i| VarId::free(format!("x{i}"))).collect();
    let stats: Vec<(f64, f64, f64, bool, bool, bool)> = (0..1000u64)
        .into_par_iter()
        .map(|i| {
            let mut g = rng(8000 + i);
            let m = g.random_range(2..=6);
            let vs = &vars[..m];
            let p = random_multilinear(&mut g, vs, 4, 1.0);
            let a = g.random_range(0..m);
            let mut b = g.random_range(0..m - 1);
            if b >= a {
                b += 1;
            }
            let field = ShearField::new(p.clone(), vs[a].clone(), vs[b].clone()).unwrap();
            let start: Point<f64> = vs.iter().map(|v| (v.clone(), disc(&mut g, 1.0))).collect();
            let t = disc(&mut g, 2.0);
            let end = field.flow(&start, t).unwrap();
            let p0 = p.evaluate(&start).unwrap();
            let conservation = (p.evaluate(&end).unwrap() - p0).norm() / (1.0 + p0.norm());

            let oracle = rk4_flow(&field, &start, t);
            let pick = |x: &Point<f64>| vec![x[&vs[a]], x[&vs[b]]];
            let ode_err = distance(&pick(&end), &pick(&oracle)) / (1.0 + norm(&pick(&oracle)));

            let (t1, t2) = (disc(&mut g, 1.0), disc(&mut g, 1.0));
            let two_step = field.flow(&field.flow(&start, t1).unwrap(), t2).unwrap();
            let one_step = field.flow(&start, t1 + t2).unwrap();
            let group_err = distance(&pick(&two_step), &pick(&one_step)) / (1.0 + norm(&pick(&one_step)));

            let grad_nonzero = vs.iter().any(|v| p.partial_derivative(v).evaluate(&start).unwrap().norm() > 1e-9);
            let span_ok = !grad_nonzero || span_rank(&p, vs, &start, 1e-9).unwrap() == m - 1;
            let tangent = field.apply(&p).is_zero();
            (conservation, ode_err, group_err, span_ok, tangent, grad_nonzero)
        })
        .collect();
    let worst = |k: fn(&(f64, f64, f64, bool, bool, bool)) -> f64| stats.iter().map(k).fold(0.0, f64::max);
    let (cons, ode, group) = (worst(|s| s.0), worst(|s| s.1), worst(|s| s.2));
    let spans = stats.iter().all(|s| s.3);
    let tangent = stats.iter().all(|s| s.4);
    let smooth = stats.iter().filter(|s| s.5).count();
    outcome(
        cons <= 1e-12 && ode <= 1e-6 && group <= 1e-10 && spans && tangent,
        format!(
            "1000 fields: conservation {cons:.2e}, RK4 gap {ode:.2e}, group law {group:.2e}, spans full at {smooth} smooth points: {spans}, tangency exact: {tangent}"
        ),
    )
}

fn stratum_target<R: Rng>(g: &mut R, n: usize, stratum: usize, even: bool) -> Vec<C64> {
    let mut a: Vec<C64> = (0..n).map(|_| disc(g, 2.0)).collect();
    let pivot = if even { stratum - 1 } else { n - stratum };
    for (idx, x) in a.iter_mut().enumerate() {
        let zeroed = if even { idx < pivot } else { idx > pivot };
        if zeroed {
            *x = c(0.0);
        }
    }
    // keep the pivot away from zero
    let r = 0.5 + g.random::<f64>();
    a[pivot] = Complex::from_polar(r, g.random::<f64>() * std::f64::consts::TAU);
    a
}

fn fiber_charts() -> Outcome {
    let mut worst = 0.0f64;
    let mut runs = 0;
    let mut cases = Vec::new();
    for n in 2..=4 {
        cases.push((n, 2, 1));
        for big_k in [3, 4] {
            for stratum in 1..=n {
                cases.push((n, big_k, stratum));
            }
        }
    }
    let mut bad = Vec::new();
    for (n, big_k, stratum) in cases {
        let mut g = rng((n * 100 + big_k * 10 + stratum) as u64);
        for _ in 0..200 {
            let a = stratum_target(&mut g, n, stratum, big_k % 2 == 0);
            let chart = FiberChart::new(n, big_k, &a).unwrap();
            let point = chart.sample_point(&mut g, 1.0).unwrap();
            let chain = chart.reconstruct(&point).unwrap();
            let err = distance(&chain.phi_eval().unwrap(), &a);
            let off_s = residual_is_critical(&chart, &point, 1e-9).unwrap() || !chain.in_singular_set().unwrap();
            worst = worst.max(err);
            if err > 1e-10 || !off_s || chart.stratum() != stratum {
                bad.push((n, big_k, stratum));
            }
            runs += 1;
        }
    }
    bad.dedup();
    outcome(
        bad.is_empty(),
        format!("{runs} reconstructions (even K in {{2,4}}, odd K = 3), worst |Phi - a| {worst:.2e}, failing cases {bad:?}"),
    )
}

fn tracking() -> Outcome {
    let config = TrackerConfig::default();
    let mut lines = Vec::new();
    let mut ok = true;

    let mut run_path = |name: &str, samples: Vec<(f64, Vec<C64>)>| {
        let seed = preimage_last_row(&samples[0].1).unwrap();
        let problem = PathProblem { n: 2, k: 3, samples: samples.clone(), seed };
        match track_path(&problem, &config) {
            Ok(recs) => {
                let res = recs.iter().map(|r| r.residual).fold(0.0, f64::max);
                let ratio = recs.iter().map(|r| r.singular_ratio).fold(f64::INFINITY, f64::min);
                let consistent = recs.iter().zip(&samples).all(|(r, (_, b))| {
                    let constructive = preimage_last_row(b).unwrap().phi_eval().unwrap();
                    distance(&r.z.phi_eval().unwrap(), &constructive) <= 2e-8
                });
                let good = res <= 1e-8 && ratio > 1e-8 && consistent && recs.len() == samples.len();
                ok &= good;
                lines.push(format!("{name}: residual {res:.1e}, min sv ratio {ratio:.1e}"));
            }
            Err(e) => {
                ok = false;
                lines.push(format!("{name}: {e}"));
            }
        }
    };
    let circle = (0..50)
        .map(|i| {
            let t = i as f64 / 49.0;
            (t, vec![Complex::from_polar(1.0, std::f64::consts::PI * t), c(1.0)])
        })
        .collect();
    run_path("half circle", circle);
    let crossing = (0..=40).map(|i| {
        let t = i as f64 / 40.0;
        (t, vec![c(1.0 - 2.0 * t), c(5.0)])
    });
    run_path("b1 crossing", crossing.collect());

    // exp(tN) for nilpotent upper-triangular N is I + tN + t^2 N^2 / 2
    let nil = Matrix::from_rows(vec![
        vec![c(0.0), c(1.5), c(-0.7)],
        vec![c(0.0), c(0.0), c(2.0)],
        vec![c(0.0), c(0.0), c(0.0)],
    ])
    .unwrap();
    let nil2 = nil.mul(&nil);
    let samples: Vec<(f64, ComplexMatrix)> = (0..20)
        .map(|i| {
            let t = i as f64 / 19.0;
            let m = Matrix::from_fn(3, 3, |r, col| {
                let id = if r == col { c(1.0) } else { c(0.0) };
                id + nil.get(r, col) * t + nil2.get(r, col) * (t * t / 2.0)
            });
            (t, m)
        })
        .collect();
    match factor_matrix_path(&samples, &config) {
        Ok(out) => {
            let worst = out
                .iter()
                .zip(&samples)
                .map(|(pf, (_, a))| {
                    let factors: Vec<ElementaryFactor<C64>> = pf
                        .chain
                        .factors()
                        .iter()
                        .map(|p| ElementaryFactor::new(p.side(), 3, p.entries().to_vec()).unwrap())
                        .collect();
                    verify_numeric(a, &factors, 1e-8).error.unwrap()
                })
                .fold(0.0, f64::max);
            let same_shape = out.iter().all(|pf| pf.chain.len() == out[0].chain.len());
            ok &= worst <= 1e-8 && same_shape && out[0].chain.orientation() == Orientation::Direct;
            lines.push(format!("nilpotent exponential: product error {worst:.1e}, K = {}", out[0].chain.len()));
        }
        Err(e) => {
            ok = false;
            lines.push(format!("nilpotent exponential: {e}"));
        }
    }
    outcome(ok, lines.join("; "))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("recurrence equals direct expansion", recurrence_matches_expansion),
        ("multilinearity and dependency sets", dependency_sets),
        ("Jacobian rank characterizes S_K", rank_characterization),
        ("image of S_K", singular_image),
        ("three-factor last-row preimage", preimages),
        ("peel identity and constant factorization", peel_and_constant),
        ("SL_2 over C[z]", sl2_polynomial),
        ("shear flows and spanning", flows_and_spans),
        ("fiber charts", fiber_charts),
        ("path tracking", tracking),
    ];
    let mut failed = 0;
    for (idx, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let status = if result.ok { "PASS" } else { "FAIL" };
        if !result.ok {
            failed += 1;
        }
        println!(
            "{status} criterion {:>2} {name} ({:.1}s): {}",
            idx + 1,
            start.elapsed().as_secs_f64(),
            result.detail
        );
    }
    if failed > 0 {
        println!("{failed} of 10 criteria failed");
        std::process::exit(1);
    }
    println!("all 10 criteria passed");
}
