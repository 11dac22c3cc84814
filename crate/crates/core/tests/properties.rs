use std::collections::BTreeMap;

use num_rational::BigRational;
use proptest::prelude::*;

use supersle::grassmann::Parity;
use supersle::ns_algebra::{
    apply, basis, bracket_modes, jacobi_residual, AlgebraElement, AlgebraKind, Half, Mode, ModuleParams, VermaVector,
};
use supersle::scalar::rational;
use supersle::sde::BrownianPath;
use supersle::walk::{
    coefficient_commutator, diffusion_from_spec, drift_parity, drift_vector, inverse_consistency, primary_commutator,
    WalkCoefficient, WalkSpec,
};
use supersle::{GaussianRational as Q, GrassmannNumber, LaurentPoly, LaurentSuperfunction, Scalar};

type G = GrassmannNumber<Q>;

const N: usize = 3;

fn q() -> impl Strategy<Value = Q> {
    (-6i64..=6, 1i64..=4, -3i64..=3).prop_map(|(a, b, c)| Q::new(rational(a, b), rational(c, b)))
}

fn grassmann() -> impl Strategy<Value = G> {
    prop::collection::vec((0u16..(1 << N), q()), 0..6).prop_map(|terms| G::from_terms(N, terms).unwrap())
}

fn homogeneous(odd: bool) -> impl Strategy<Value = G> {
    grassmann().prop_map(move |g| {
        let terms: Vec<(u16, Q)> =
            g.terms().iter().filter(|(m, _)| (m.count_ones() % 2 == 1) == odd).cloned().collect();
        G::from_terms(N, terms).unwrap()
    })
}

fn laurent() -> impl Strategy<Value = LaurentPoly<Q>> {
    prop::collection::vec((-3i32..=3, grassmann()), 0..4).prop_map(|terms| LaurentPoly::from_terms(N, terms))
}

fn superfunction() -> impl Strategy<Value = LaurentSuperfunction<Q>> {
    (laurent(), laurent()).prop_map(|(a, b)| LaurentSuperfunction::new(a, b))
}

fn mode() -> impl Strategy<Value = Mode> {
    prop_oneof![(-3i32..=3).prop_map(Mode::L), (-3i32..=2).prop_map(|k| Mode::g(2 * k + 1))]
}

fn series() -> impl Strategy<Value = BTreeMap<i32, WalkCoefficient<Q>>> {
    prop::collection::btree_map(-2i32..=2, (homogeneous(false), homogeneous(true)), 1..3)
        .prop_map(|m| m.into_iter().map(|(k, (y, eta))| (k, WalkCoefficient::new(y, eta))).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn grassmann_ring_axioms(a in grassmann(), b in grassmann(), c in grassmann()) {
        prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
        prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
        prop_assert_eq!(&(&a + &b) - &b, a.clone());
    }

    #[test]
    fn generators_anticommute(i in 0..N, j in 0..N) {
        let (pi, pj) = (G::generator(i, N).unwrap(), G::generator(j, N).unwrap());
        prop_assert_eq!(&pi * &pj, -(&pj * &pi));
    }

    #[test]
    fn graded_commutation(a in homogeneous(true), b in homogeneous(true), e in homogeneous(false), x in grassmann()) {
        prop_assert_eq!(&a * &b, -(&b * &a));
        prop_assert_eq!(&e * &x, &x * &e);
        prop_assert!((&a * &a).is_zero());
    }

    #[test]
    fn involution_is_automorphism(a in grassmann(), b in grassmann()) {
        prop_assert_eq!((&a * &b).involute(), &a.involute() * &b.involute());
        prop_assert_eq!(a.involute().involute(), a);
    }

    #[test]
    fn graded_leibniz(a in grassmann(), b in grassmann(), i in 0..N) {
        let lhs = (&a * &b).derive(i);
        let rhs = &(&a.derive(i) * &b) + &(&a.involute() * &b.derive(i));
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn inverse_when_body_nonzero(a in grassmann(), body in q()) {
        prop_assume!(!body.is_zero());
        let x = &a.soul() + &G::scalar(N, body);
        let inv = x.inverse().unwrap();
        prop_assert_eq!(&x * &inv, G::one(N));
        prop_assert_eq!(&inv * &x, G::one(N));
    }

    #[test]
    fn soul_is_nilpotent(a in grassmann()) {
        prop_assert!(a.soul().pow(N as u32 + 1).is_zero());
    }

    #[test]
    fn superderivative_squares_to_dz(f in superfunction()) {
        prop_assert_eq!(f.superderivative().superderivative(), f.d_z());
    }

    #[test]
    fn superfunction_product_associative(f in superfunction(), g in superfunction(), h in superfunction()) {
        prop_assert_eq!(&(&f * &g) * &h, &f * &(&g * &h));
    }

    #[test]
    fn bracket_antisymmetry(a in mode(), b in mode(), c2 in -20i64..=20) {
        let c = rational(c2, 2);
        let ab = bracket_modes(a, b, &c);
        let ba = bracket_modes(b, a, &c);
        let sign = if a.is_odd() && b.is_odd() { -1 } else { 1 };
        for (m, v) in &ab.modes {
            let other = ba.modes.get(m).cloned().unwrap_or_else(|| BigRational::from_integer(0.into()));
            prop_assert_eq!(v.clone(), -other * BigRational::from_integer(sign.into()));
        }
        prop_assert_eq!(ab.central.clone(), -ba.central.clone() * BigRational::from_integer(sign.into()));
    }

    #[test]
    fn super_jacobi(a in mode(), b in mode(), x in mode(), c2 in -20i64..=20) {
        prop_assert!(jacobi_residual(a, b, x, &rational(c2, 2)).is_zero());
    }

    #[test]
    fn l0_measures_level(d4 in -8i64..=8, c2 in -10i64..=10, pick in 0usize..7) {
        let params = ModuleParams::ns(rational(c2, 2), rational(d4, 4));
        let all = basis(AlgebraKind::NeveuSchwarz, Half(4));
        let mono = all[pick % all.len()].clone();
        let mut v = VermaVector::zero(params.clone(), 0);
        v.add_entry(mono.clone(), GrassmannNumber::one(0));
        let out = apply(&AlgebraElement::mode(Mode::L(0), GrassmannNumber::one(0)), &v).unwrap();
        let eigen = &params.delta + mono.level().to_rational();
        prop_assert_eq!(out, v.scale_left(&GrassmannNumber::scalar(0, Q::real(eigen))));
    }

    #[test]
    fn commutator_routes_agree(s in series(), delta in q(), k in -2i32..=2, coeff in grassmann()) {
        let spec = WalkSpec::new(N, BTreeMap::new(), vec![s]).unwrap();
        let (zi, ti) = diffusion_from_spec(&spec).remove(0);
        for phi in [LaurentSuperfunction::z_power(k, coeff.clone()), LaurentSuperfunction::theta_z_power(k, coeff.clone())] {
            prop_assert_eq!(primary_commutator(&spec.beta()[0], &delta, &phi), coefficient_commutator(&zi, &ti, &delta, &phi));
        }
    }

    #[test]
    fn ito_inverse_cancels(a in series(), b in series(), drift in series()) {
        let spec = WalkSpec::new(N, drift, vec![a, b]).unwrap();
        prop_assert!(inverse_consistency(&spec));
    }

    #[test]
    fn drift_vector_of_even_walk_is_even(a in series(), drift in series(), d4 in -8i64..=8) {
        let spec = WalkSpec::new(N, drift, vec![a]).unwrap();
        let params = ModuleParams::ns(rational(1, 1), rational(d4, 4)).with_cutoff(Half(9));
        prop_assert_eq!(drift_parity(&spec, &params).unwrap(), Parity::Even);
        prop_assert_eq!(drift_vector(&spec, &params).unwrap().parity(), Parity::Even);
    }

    #[test]
    fn brownian_coarsening_preserves_path(seed in any::<u64>(), k in 1usize..6) {
        let fine = BrownianPath::sample(2, 1e-3, 60, seed);
        let coarse = fine.coarsen(k).unwrap_or_else(|_| fine.clone());
        let step = fine.steps / coarse.steps;
        for d in 0..2 {
            let (fv, cv) = (fine.values(d), coarse.values(d));
            for (j, c) in cv.iter().enumerate() {
                prop_assert!((fv[j * step] - c).abs() < 1e-12);
            }
        }
    }
}
