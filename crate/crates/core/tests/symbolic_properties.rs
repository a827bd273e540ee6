//! Randomized algebraic invariants of the operator calculus.

use std::sync::Arc;

use proptest::prelude::*;
use quartic_carleman::symcore::{
    parse_op, Alphabet, Coeff, DiffOp, DiffPoly, Monomial, Var,
};

fn coeff_strategy() -> impl Strategy<Value = Coeff> {
    (-6i64..=6, -6i64..=6, 1i64..=3).prop_map(|(re, im, den)| {
        use num::complex::Complex;
        use num::{BigInt, BigRational};
        Complex::new(
            BigRational::new(BigInt::from(re), BigInt::from(den)),
            BigRational::new(BigInt::from(im), BigInt::from(den)),
        )
    })
}

/// Random polynomial in alpha, rinv, psi, x2, phi over d = 2.  Explicit
/// phi derivatives are excluded so that the nested time derivatives of
/// commutator/adjoint tests stay inside the closure order.
fn poly_strategy(alph: Arc<Alphabet>) -> impl Strategy<Value = DiffPoly> {
    let n_gens = alph.len();
    let phi_deriv_slots: Vec<usize> = (1..=3)
        .map(|k| alph.index_by_name(&format!("phi{k}")).unwrap())
        .collect();
    let term = (
        proptest::collection::vec(0u8..=2, n_gens),
        coeff_strategy(),
    );
    proptest::collection::vec(term, 0..4).prop_map(move |terms| {
        let mut p = DiffPoly::zero(&alph);
        for (mut exps, c) in terms {
            for &slot in &phi_deriv_slots {
                exps[slot] = 0;
            }
            p = p
                .add(&DiffPoly::monomial(&alph, Monomial(exps), c))
                .unwrap();
        }
        p
    })
}

fn op_strategy(alph: Arc<Alphabet>, max_order: u8) -> impl Strategy<Value = DiffOp> {
    let a2 = alph.clone();
    let term = (
        poly_strategy(alph),
        0u8..=max_order,
        0u8..=max_order,
        0u8..=1,
    );
    proptest::collection::vec(term, 0..3).prop_map(move |terms| {
        let mut op = DiffOp::zero(&a2);
        for (p, ot, o1, o2) in terms {
            let mut t = DiffOp::mult(p);
            if ot > 0 {
                t = t
                    .compose(&DiffOp::partial(&a2, Var::T, ot.min(1)))
                    .unwrap();
            }
            if o1 > 0 {
                t = t.compose(&DiffOp::partial(&a2, Var::X(1), o1)).unwrap();
            }
            if o2 > 0 {
                t = t.compose(&DiffOp::partial(&a2, Var::X(2), o2)).unwrap();
            }
            op = op.add(&t).unwrap();
        }
        op
    })
}

fn alph() -> Arc<Alphabet> {
    Alphabet::new(2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn poly_ring_axioms(
        p in poly_strategy(alph()),
        q in poly_strategy(alph()),
        r in poly_strategy(alph()),
    ) {
        // commutativity, associativity, distributivity
        prop_assert_eq!(p.mul(&q).unwrap(), q.mul(&p).unwrap());
        prop_assert_eq!(
            p.mul(&q).unwrap().mul(&r).unwrap(),
            p.mul(&q.mul(&r).unwrap()).unwrap()
        );
        prop_assert_eq!(
            p.mul(&q.add(&r).unwrap()).unwrap(),
            p.mul(&q).unwrap().add(&p.mul(&r).unwrap()).unwrap()
        );
        prop_assert_eq!(p.add(&q).unwrap(), q.add(&p).unwrap());
        prop_assert!(p.sub(&p).unwrap().is_zero());
    }

    #[test]
    fn leibniz_rule(p in poly_strategy(alph()), q in poly_strategy(alph())) {
        for v in [Var::X(1), Var::X(2)] {
            let lhs = p.mul(&q).unwrap().diff(v).unwrap();
            let rhs = p.diff(v).unwrap().mul(&q).unwrap()
                .add(&p.mul(&q.diff(v).unwrap()).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn adjoint_laws(
        a in op_strategy(alph(), 2),
        b in op_strategy(alph(), 2),
        c in coeff_strategy(),
    ) {
        // (L*)* = L
        prop_assert_eq!(a.adjoint().unwrap().adjoint().unwrap(), a.clone());
        // (AB)* = B* A*
        prop_assert_eq!(
            a.compose(&b).unwrap().adjoint().unwrap(),
            b.adjoint().unwrap().compose(&a.adjoint().unwrap()).unwrap()
        );
        // (cL)* = conj(c) L*
        use num::complex::Complex;
        let cc = Complex::new(c.re.clone(), -c.im.clone());
        prop_assert_eq!(
            a.scale(&c).adjoint().unwrap(),
            a.adjoint().unwrap().scale(&cc)
        );
    }

    #[test]
    fn split_laws(a in op_strategy(alph(), 2)) {
        let (s, anti) = a.split().unwrap();
        prop_assert_eq!(s.adjoint().unwrap(), s.clone());
        prop_assert_eq!(anti.adjoint().unwrap(), anti.neg());
        prop_assert_eq!(s.add(&anti).unwrap(), a);
    }

    #[test]
    fn commutator_antisymmetry_and_jacobi(
        a in op_strategy(alph(), 2),
        b in op_strategy(alph(), 2),
        c in op_strategy(alph(), 2),
    ) {
        prop_assert_eq!(
            a.commutator(&b).unwrap(),
            b.commutator(&a).unwrap().neg()
        );
        let j = a.commutator(&b.commutator(&c).unwrap()).unwrap()
            .add(&b.commutator(&c.commutator(&a).unwrap()).unwrap()).unwrap()
            .add(&c.commutator(&a.commutator(&b).unwrap()).unwrap()).unwrap();
        prop_assert!(j.is_zero());
    }

    #[test]
    fn print_parse_round_trip(a in op_strategy(alph(), 4)) {
        let printed = a.to_string();
        let back = parse_op(&printed, a.alphabet()).unwrap();
        prop_assert_eq!(&back, &a);
        prop_assert_eq!(back.to_string(), printed);
    }
}
