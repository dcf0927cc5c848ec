//! Property tests over randomized inputs: ring laws, class canonicalization
//! invariants, divisibility soundness, and representation stability under
//! squared units.

use num_bigint::BigInt;
use proptest::prelude::*;

use critset_core::elements::{class_of, is_indecomposable, is_squarefree};
use critset_core::forms::QForm;
use critset_core::sspec::SSpec;
use critset_core::{AlgInt, FieldCtx};

fn field_strategy() -> impl Strategy<Value = FieldCtx> {
    prop_oneof![
        Just(FieldCtx::rational()),
        prop::sample::select(vec![2u64, 3, 5, 6, 7, 10, 13])
            .prop_map(|d| FieldCtx::quadratic(d).unwrap()),
    ]
}

fn totally_positive_strategy(k: FieldCtx) -> impl Strategy<Value = (FieldCtx, AlgInt)> {
    let deg2 = k.degree() == 2;
    let filter_k = k.clone();
    (1i64..=40, -6i64..=6)
        .prop_map(move |(a, b)| AlgInt::new(a, if deg2 { b } else { 0 }))
        .prop_filter("totally positive", move |x| filter_k.is_totally_positive(x))
        .prop_map(move |x| (k.clone(), x))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn norm_is_multiplicative_trace_is_additive(k in field_strategy(), seed in any::<u64>()) {
        let mut s = seed | 1;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 33) as i64 % 2_000_001) - 1_000_000
        };
        let x = AlgInt::new(next(), if k.degree() == 2 { next() } else { 0 });
        let y = AlgInt::new(next(), if k.degree() == 2 { next() } else { 0 });
        prop_assert_eq!(k.norm(&k.mul(&x, &y)), k.norm(&x) * k.norm(&y));
        prop_assert_eq!(k.trace(&k.add(&x, &y)), k.trace(&x) + k.trace(&y));
        prop_assert_eq!(k.conjugate(&k.conjugate(&x)), x);
    }

    #[test]
    fn totally_positive_cone_is_closed((k, x) in field_strategy().prop_flat_map(totally_positive_strategy),
                                       (k2_seed, b2) in (1i64..=40, -6i64..=6)) {
        let y = AlgInt::new(k2_seed, if k.degree() == 2 { b2 } else { 0 });
        prop_assume!(k.is_totally_positive(&y));
        prop_assert!(k.is_totally_positive(&k.add(&x, &y)));
        prop_assert!(k.is_totally_positive(&k.mul(&x, &y)));
        let (n, t) = k.norm_trace(&x);
        prop_assert!(n > BigInt::from(0));
        prop_assert!(t > BigInt::from(0));
    }

    #[test]
    fn class_canonicalization_is_idempotent_and_unit_square_invariant(
        (k, x) in field_strategy().prop_flat_map(totally_positive_strategy)
    ) {
        let c = class_of(&k, &x).unwrap();
        prop_assert_eq!(class_of(&k, c.rep()).unwrap(), c.clone());
        let twisted = k.mul(&x, &k.eps_sq());
        prop_assert_eq!(class_of(&k, &twisted).unwrap(), c);
    }

    #[test]
    fn divides_quotients_reconstruct(k in field_strategy(), seed in any::<u64>()) {
        let mut s = seed | 1;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 40) as i64 % 201) - 100
        };
        let x = AlgInt::new(next(), if k.degree() == 2 { next() } else { 0 });
        let y = AlgInt::new(next(), if k.degree() == 2 { next() } else { 0 });
        prop_assume!(!x.is_zero());
        if let Some(q) = k.divides(&x, &y).unwrap() {
            prop_assert_eq!(k.mul(&q, &x), y.clone());
        }
        // products always divide back
        let p = k.mul(&x, &y);
        let q = k.divides(&x, &p).unwrap();
        prop_assert_eq!(q, Some(y));
    }

    #[test]
    fn squarefree_witnesses_are_sound((k, x) in field_strategy().prop_flat_map(totally_positive_strategy)) {
        let r = is_squarefree(&k, &x).unwrap();
        if let Some(w) = r.witness {
            prop_assert!(!r.squarefree);
            prop_assert!(!k.is_unit(&w));
            let w2 = k.square(&w);
            prop_assert!(k.divides(&w2, &x).unwrap().is_some());
        }
    }

    #[test]
    fn decompositions_are_sound((k, x) in field_strategy().prop_flat_map(totally_positive_strategy)) {
        let r = is_indecomposable(&k, &x).unwrap();
        if let Some((p, rest)) = r.decomposition {
            prop_assert!(!r.indecomposable);
            prop_assert!(k.is_totally_positive(&p));
            prop_assert!(k.is_totally_positive(&rest));
            prop_assert_eq!(k.add(&p, &rest), x);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn representation_is_unit_square_stable(
        d in prop::sample::select(vec![2u64, 3, 5]),
        coeffs in prop::collection::vec((1i64..=6, -2i64..=2), 1..=2),
        target_seed in (1i64..=12, -3i64..=3),
    ) {
        let k = FieldCtx::quadratic(d).unwrap();
        let cs: Vec<AlgInt> = coeffs
            .into_iter()
            .map(|(a, b)| AlgInt::new(a, b))
            .filter(|c| k.is_totally_positive(c))
            .collect();
        prop_assume!(!cs.is_empty());
        let form = QForm::diagonal(k.clone(), cs).unwrap();
        let t = AlgInt::new(target_seed.0, target_seed.1);
        prop_assume!(k.is_totally_positive(&t));
        let twisted = k.mul(&t, &k.eps_sq());
        prop_assert_eq!(
            form.represents(&t).unwrap().is_some(),
            form.represents(&twisted).unwrap().is_some()
        );
    }

    #[test]
    fn gram_and_diagonal_engines_agree_on_sheared_lattices(
        d in prop::sample::select(vec![2u64, 3, 5]),
        diag in prop::collection::vec((1i64..=4, -1i64..=1), 2..=2),
        shear in (-1i64..=1, -1i64..=1),
    ) {
        // build the Gram of <c1, c2> in the basis (e1, e1*s + e2): the Gram
        // engine (trace-ball) and the diagonal engine (two-embedding search)
        // must see the same value sets
        let k = FieldCtx::quadratic(d).unwrap();
        let cs: Vec<AlgInt> = diag
            .into_iter()
            .map(|(a, b)| AlgInt::new(a, b))
            .filter(|c| k.is_totally_positive(c))
            .collect();
        prop_assume!(cs.len() == 2);
        let s = AlgInt::new(shear.0, shear.1);
        // Q(x, y) = c1 (x + s y)^2 + c2 y^2
        let m00 = cs[0].clone();
        let m11 = k.add(&k.mul(&cs[0], &k.square(&s)), &cs[1]);
        let m01 = k.mul_int(&k.mul(&cs[0], &s), &num_bigint::BigInt::from(2));
        let gram = QForm::gram(
            k.clone(),
            vec![vec![m00, m01.clone()], vec![m01, m11]],
        ).unwrap();
        let diag_form = QForm::diagonal(k.clone(), cs).unwrap();
        prop_assert_eq!(
            gram.represented_classes_up_to(15),
            diag_form.represented_classes_up_to(15)
        );
    }

    #[test]
    fn escalation_shrinks_the_missing_set(
        base in prop::collection::vec(1i64..=8, 1..=3),
        extra in 1i64..=8,
    ) {
        let k = FieldCtx::rational();
        let f1 = QForm::diagonal_ints(k.clone(), &base).unwrap();
        let f2 = f1.orthogonal_sum(&QForm::diagonal_ints(k, &[extra]).unwrap()).unwrap();
        let m1: std::collections::BTreeSet<_> =
            f1.non_represented_up_to(&SSpec::All, 40).into_iter().collect();
        let m2: std::collections::BTreeSet<_> =
            f2.non_represented_up_to(&SSpec::All, 40).into_iter().collect();
        prop_assert!(m2.is_subset(&m1));
    }
}
