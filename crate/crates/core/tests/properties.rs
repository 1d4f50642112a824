use std::collections::BTreeMap;

use num_traits::{One, Zero};
use proptest::prelude::*;

use unifact::factor::{invert_list, merge_adjacent, product, ElementaryFactor};
use unifact::json::{ChainJson, PolyJson};
use unifact::matrix::Matrix;
use unifact::polyring::{Monomial, Poly, VarId};
use unifact::scalar::ExactComplex;
use unifact::unipotent::{build_unipotent, num_params, FactorChain, Orientation, ParamVector, Side};
use unifact::ExactChain;

fn var(i: usize) -> VarId {
    VarId::free(format!("x{i}"))
}

fn exact() -> impl Strategy<Value = ExactComplex> {
    (-4i64..=4, -4i64..=4, 1i64..=3).prop_map(|(re, im, den)| {
        let r = ExactComplex::ratio(re, den);
        r + ExactComplex::from_ints(0, im)
    })
}

fn poly() -> impl Strategy<Value = Poly> {
    let term = (prop::collection::vec(0u32..=2, 3), exact()).prop_map(|(exps, c)| {
        let m = Monomial::from_factors(exps.into_iter().enumerate().filter(|(_, e)| *e > 0).map(|(i, e)| (var(i), e)));
        (m, c)
    });
    prop::collection::vec(term, 0..5).prop_map(Poly::from_terms)
}

fn assignment() -> impl Strategy<Value = BTreeMap<VarId, ExactComplex>> {
    prop::collection::vec(exact(), 3).prop_map(|v| v.into_iter().enumerate().map(|(i, c)| (var(i), c)).collect())
}

fn side() -> impl Strategy<Value = Side> {
    prop_oneof![Just(Side::Lower), Just(Side::Upper)]
}

fn exact_factor(n: usize) -> impl Strategy<Value = ElementaryFactor<ExactComplex>> {
    (side(), prop::collection::vec(exact(), num_params(n)))
        .prop_map(move |(s, e)| ElementaryFactor::new(s, n, e).unwrap())
}

fn exact_chain(n: usize, k: usize) -> impl Strategy<Value = ExactChain> {
    (any::<bool>(), prop::collection::vec(exact(), k * num_params(n))).prop_map(move |(inv, v)| {
        let o = if inv { Orientation::Inverse } else { Orientation::Direct };
        FactorChain::from_flat(n, k, o, &v).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ring_axioms(p in poly(), q in poly(), r in poly()) {
        prop_assert_eq!(&p + &q, &q + &p);
        prop_assert_eq!(&p * &q, &q * &p);
        prop_assert_eq!(&(&p + &q) + &r, &p + &(&q + &r));
        prop_assert_eq!(&(&p * &q) * &r, &p * &(&q * &r));
        prop_assert_eq!(&p * &(&q + &r), &(&p * &q) + &(&p * &r));
        prop_assert!((&p - &p).is_zero());
        prop_assert_eq!(&p * &Poly::one(), p.clone());
    }

    #[test]
    fn evaluation_is_multiplicative(p in poly(), q in poly(), x in assignment()) {
        let pq = (&p * &q).evaluate_exact(&x).unwrap();
        let sum = (&p + &q).evaluate_exact(&x).unwrap();
        let (a, b) = (p.evaluate_exact(&x).unwrap(), q.evaluate_exact(&x).unwrap());
        prop_assert_eq!(pq, &a * &b);
        prop_assert_eq!(sum, &a + &b);
    }

    #[test]
    fn derivatives_commute_and_obey_leibniz(p in poly(), q in poly(), i in 0usize..3, j in 0usize..3) {
        let (u, v) = (var(i), var(j));
        prop_assert_eq!(
            p.partial_derivative(&u).partial_derivative(&v),
            p.partial_derivative(&v).partial_derivative(&u)
        );
        let lhs = (&p * &q).partial_derivative(&u);
        let rhs = &(&p.partial_derivative(&u) * &q) + &(&p * &q.partial_derivative(&u));
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn poly_json_round_trip(p in poly()) {
        let s = serde_json::to_string(&PolyJson::from_poly(&p)).unwrap();
        let back: PolyJson = serde_json::from_str(&s).unwrap();
        prop_assert_eq!(back.to_poly().unwrap(), p);
    }

    #[test]
    fn inverse_params_invert(n in 2usize..5, k in 1usize..4, seed in prop::collection::vec(exact(), 10)) {
        let entries: Vec<ExactComplex> = (0..num_params(n)).map(|i| seed[i % seed.len()].clone()).collect();
        let p = ParamVector::new(n, k, entries).unwrap();
        prop_assert_eq!(p.build_factor().mul(&p.inverse_params().build_factor()), Matrix::identity(n));
        prop_assert_eq!(p.inverse_params().inverse_params(), p);
    }

    #[test]
    fn reorientation_is_an_involution_preserving_the_product(c in exact_chain(3, 3)) {
        let r = c.reoriented();
        prop_assert_ne!(r.orientation(), c.orientation());
        prop_assert_eq!(r.psi_eval(), c.psi_eval());
        prop_assert_eq!(r.reoriented(), c);
    }

    #[test]
    fn last_row_of_product(c in exact_chain(3, 4)) {
        let inv = if c.orientation() == Orientation::Inverse { c } else { c.reoriented() };
        prop_assert_eq!(inv.phi_eval().unwrap(), inv.psi_eval().last_row());
    }

    #[test]
    fn flat_round_trip(c in exact_chain(4, 3)) {
        let back = FactorChain::from_flat(4, 3, c.orientation(), &c.flat()).unwrap();
        prop_assert_eq!(back, c);
    }

    #[test]
    fn merging_keeps_the_product_and_alternates(list in prop::collection::vec(exact_factor(3), 0..7)) {
        let merged = merge_adjacent(list.clone());
        prop_assert_eq!(product(3, &merged), product(3, &list));
        prop_assert!(merged.windows(2).all(|w| w[0].side != w[1].side));
        prop_assert!(merged.iter().all(|f| !f.is_identity()));
    }

    #[test]
    fn inverted_list_is_the_inverse(list in prop::collection::vec(exact_factor(3), 0..6)) {
        prop_assert_eq!(product(3, &list).mul(&product(3, &invert_list(&list))), Matrix::identity(3));
    }

    #[test]
    fn unipotent_factors_have_unit_determinant(s in side(), e in prop::collection::vec(exact(), num_params(4))) {
        prop_assert!(build_unipotent(4, s, &e).det_expansion().is_one());
    }

    #[test]
    fn chain_json_round_trip(v in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 9)) {
        let vals: Vec<_> = v.iter().map(|&(re, im)| unifact::C64::new(re, im)).collect();
        let c = FactorChain::from_flat(3, 3, Orientation::Inverse, &vals).unwrap();
        let s = serde_json::to_string(&ChainJson::from_chain(&c)).unwrap();
        let back: ChainJson = serde_json::from_str(&s).unwrap();
        prop_assert_eq!(back.to_chain().unwrap(), c);
    }
}
