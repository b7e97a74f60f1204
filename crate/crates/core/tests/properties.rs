use nalgebra::{Complex, DVector, Vector3};
use partrans::connection::Domain;
use partrans::geometry::{invert_path, Manifold, Path};
use partrans::holonomy::Representation;
use partrans::lie::{adjoint, exp_map, log_map, GroupSpec};
use partrans::presets;
use partrans::solver::{transport_local, SolverConfig};
use partrans::{AlgebraElement, GroupElement};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn specs() -> Vec<GroupSpec> {
    vec![GroupSpec::u1(), GroupSpec::su2(), GroupSpec::so3(), GroupSpec::un(2).unwrap()]
}

fn spec_strategy() -> impl Strategy<Value = GroupSpec> {
    (0..specs().len()).prop_map(|i| specs()[i])
}

/// Algebra element with coordinates in `[-1, 1]`, rescaled to norm `radius`
/// when longer.
fn algebra(spec: GroupSpec, radius: f64) -> impl Strategy<Value = AlgebraElement> {
    let dim = spec.algebra_basis::<f64>().len();
    prop::collection::vec(-1.0..1.0f64, dim).prop_map(move |c| {
        let x = AlgebraElement::from_coords(spec, &c);
        let n = x.norm();
        if n > radius {
            x.scale(radius / n)
        } else {
            x
        }
    })
}

fn with_algebra<const K: usize>(radius: f64) -> impl Strategy<Value = (GroupSpec, [AlgebraElement; K])> {
    spec_strategy().prop_flat_map(move |spec| {
        let xs = prop::array::uniform::<_, K>(algebra(spec, radius));
        (Just(spec), xs)
    })
}

fn complex_vector(n: usize) -> impl Strategy<Value = DVector<Complex<f64>>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), n)
        .prop_map(|v| DVector::from_iterator(v.len(), v.into_iter().map(|(re, im)| Complex::new(re, im))))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn log_inverts_exp_near_the_identity((_, [x]) in with_algebra::<1>(0.5)) {
        let back = log_map(&exp_map(&x)).unwrap();
        prop_assert!((&back - &x).norm() < 1e-10);
    }

    #[test]
    fn exponentials_stay_in_the_group((_, [x, y]) in with_algebra::<2>(3.0)) {
        let g = &exp_map(&x) * &exp_map(&y);
        prop_assert!(g.deviation() < 1e-10);
        prop_assert!((&g * &g.inverse()).distance_to_identity() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn adjoint_preserves_brackets((_, [a, b, x, y]) in with_algebra::<4>(2.0)) {
        let (g, h) = (exp_map(&a), exp_map(&b));
        let lhs = adjoint(&g, &x.bracket(&y));
        let rhs = adjoint(&g, &x).bracket(&adjoint(&g, &y));
        prop_assert!((&lhs - &rhs).norm() < 1e-10);
        let composed = adjoint(&(&g * &h), &x);
        let nested = adjoint(&g, &adjoint(&h, &x));
        prop_assert!((&composed - &nested).norm() < 1e-10);
        prop_assert!(adjoint(&g, &x).deviation() < 1e-10);
    }

    #[test]
    fn defining_representation_is_a_unitary_homomorphism(
        (spec, [a, b], v) in with_algebra::<2>(2.0).prop_flat_map(|(spec, xs)| {
            (Just(spec), Just(xs), complex_vector(spec.n()))
        })
    ) {
        let rho = Representation::defining(spec);
        let (g, h) = (exp_map(&a), exp_map(&b));
        let gh = rho.apply(&(&g * &h), &v).unwrap();
        let g_h = rho.apply(&g, &rho.apply(&h, &v).unwrap()).unwrap();
        prop_assert!((&gh - &g_h).norm() < 1e-10);
        prop_assert!((gh.norm() - v.norm()).abs() < 1e-10);
        let id = rho.apply(&GroupElement::identity(spec), &v).unwrap();
        prop_assert!((&id - &v).norm() < 1e-14);
    }

    #[test]
    fn determinant_representation_is_multiplicative((spec, [a, b]) in with_algebra::<2>(2.0)) {
        let rho = Representation::determinant(spec);
        let one = DVector::from_element(1, Complex::new(1.0, 0.0));
        let (g, h) = (exp_map(&a), exp_map(&b));
        let gh = rho.apply(&(&g * &h), &one).unwrap();
        let g_h = rho.apply(&g, &rho.apply(&h, &one).unwrap()).unwrap();
        prop_assert!((&gh - &g_h).norm() < 1e-10);
        prop_assert!((gh[0].norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn forms_are_linear_in_the_tangent(
        seed in any::<u64>(),
        p in prop::array::uniform3(-1.5..1.5f64),
        v in prop::array::uniform3(-1.0..1.0f64),
        w in prop::array::uniform3(-1.0..1.0f64),
        s in -2.0..2.0f64,
        r in -2.0..2.0f64,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = GroupSpec::su2();
        let coeffs = presets::random_form_coeffs(&mut rng, spec, 0.5, true);
        let form = presets::polynomial_form(Domain::Manifold(Manifold::plane()), spec, &coeffs).unwrap();
        let planar = |a: [f64; 3]| Vector3::new(a[0], a[1], 0.0);
        let (p, v, w) = (planar(p), planar(v), planar(w));
        let combined = form.eval(&p, &(v * s + w * r)).unwrap();
        let split = &form.eval(&p, &v).unwrap().scale(s) + &form.eval(&p, &w).unwrap().scale(r);
        prop_assert!((&combined - &split).norm() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn reversed_paths_transport_to_the_inverse(
        seed in any::<u64>(),
        a in prop::array::uniform2(-1.5..1.5f64),
        b in prop::array::uniform2(-1.5..1.5f64),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = GroupSpec::su2();
        let coeffs = presets::random_form_coeffs(&mut rng, spec, 0.5, true);
        let form = presets::polynomial_form(Domain::Manifold(Manifold::plane()), spec, &coeffs).unwrap();
        let path = Path::segment(Vector3::new(a[0], a[1], 0.0), Vector3::new(b[0], b[1], 0.0));
        let cfg = SolverConfig::default();
        let forward = transport_local(&form, &path, &cfg).unwrap().value;
        let backward = transport_local(&form, &invert_path(&path), &cfg).unwrap().value;
        prop_assert!((&backward * &forward).distance_to_identity() < 1e-8);
    }
}
