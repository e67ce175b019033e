use amspace::dyson_phillips::{dp_evolve, dp_term, DpConfig};
use amspace::extrapolation::{embed, extrapolated_resolvent, norm_minus_one};
use amspace::perturbation::{desch_condition, perturbed_resolvent, resolvent_rb, NEUMANN_MAX_TERMS, NEUMANN_TOL};
use amspace::{Density, ExtrapolatedElement, GeneratorSpec, GridFunction, RankOnePerturbation, Space};
use proptest::prelude::*;

const SHIFT: GeneratorSpec = GeneratorSpec::left_shift();

fn grid(space: Space, mut v: Vec<f64>) -> GridFunction {
    let n = v.len() - 1;
    match space {
        Space::Shift => v[n] = 0.0,
        Space::Periodic => v[n] = v[0],
    }
    GridFunction::new(space, v).unwrap()
}

fn space() -> impl Strategy<Value = Space> {
    prop_oneof![Just(Space::Shift), Just(Space::Periodic)]
}

fn values(lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(lo..hi, 3..60)
}

fn positive_density() -> impl Strategy<Value = Density> {
    prop::collection::vec(0.0..2.5_f64, 4)
        .prop_map(|levels| Density::piecewise_constant(&[0.25, 0.5, 0.75], &levels).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn am_identity_on_positive_parts(s in space(), a in values(0.0, 5.0), b in values(0.0, 5.0)) {
        let n = a.len().min(b.len());
        let f = grid(s, a[..n].to_vec());
        let g = grid(s, b[..n].to_vec());
        let sup = f.lattice_sup(&g).unwrap();
        prop_assert_eq!(sup.sup_norm(), f.sup_norm().max(g.sup_norm()));
        prop_assert!(f.abs().is_nonnegative(0.0));
        let split = f.positive_part().sub(&f.negative_part()).unwrap();
        prop_assert!(split.distance(&f).unwrap() < 1e-15);
    }

    #[test]
    fn cone_compatibility(s in space(), v in values(-0.5, 1.0)) {
        let f = grid(s, v);
        prop_assert_eq!(embed(&f).is_positive(), f.is_nonnegative(f.eps_pos()));
    }

    #[test]
    fn cone_closed_under_sums(s in space(), a in values(0.0, 1.0), c in 0.0..10.0_f64) {
        let f = grid(s, a);
        let g = f.abs().scale(0.5);
        let sum = embed(&f).add(&embed(&g)).unwrap().scale(c);
        prop_assert!(sum.is_positive());
    }

    #[test]
    fn resolvent_positive(s in space(), v in values(0.0, 1.0), lambda in 0.1..50.0_f64) {
        let f = grid(s, v);
        let gen = GeneratorSpec::for_space(s);
        prop_assert!(gen.resolvent(lambda, &f).unwrap().is_nonnegative(0.0));
    }

    #[test]
    fn desch_norm_dominates_radius(d in positive_density(), lambda in 0.0..20.0_f64) {
        let b = RankOnePerturbation::uniform(ExtrapolatedElement::from_density(Space::Shift, 200, d).unwrap());
        let rep = desch_condition(&SHIFT, lambda, &b).unwrap();
        prop_assert!(rep.spr <= rep.k * (1.0 + 1e-12));
        prop_assert!((rep.spr - rep.spr_power).abs() <= 1e-10 * (1.0 + rep.spr));
        let later = desch_condition(&SHIFT, lambda + 1.0, &b).unwrap();
        prop_assert!(later.k <= rep.k * (1.0 + 1e-12));
    }

    #[test]
    fn rank_one_algebra(d in positive_density(), v in values(0.1, 1.0)) {
        let n = v.len() - 1;
        let b = RankOnePerturbation::uniform(ExtrapolatedElement::from_density(Space::Shift, n, d).unwrap());
        let f = grid(Space::Shift, v);
        let once = resolvent_rb(&SHIFT, 1.0, &b, &f).unwrap();
        let twice = resolvent_rb(&SHIFT, 1.0, &b, &once).unwrap();
        let spr = desch_condition(&SHIFT, 1.0, &b).unwrap().spr;
        prop_assert!(twice.distance(&once.scale(spr)).unwrap() <= 1e-12 * (1.0 + once.sup_norm()));
    }

    #[test]
    fn perturbed_resolvent_positive_on_ray(d in positive_density(), v in values(0.0, 1.0)) {
        let n = v.len() - 1;
        let b = RankOnePerturbation::uniform(ExtrapolatedElement::from_density(Space::Shift, n, d).unwrap());
        let f = grid(Space::Shift, v);
        let rep = desch_condition(&SHIFT, 1.0, &b).unwrap();
        prop_assume!(rep.spr < 1.0);
        for mu in [1.0, 2.0, 11.0] {
            let u = perturbed_resolvent(&SHIFT, mu, &b, &f, NEUMANN_TOL, NEUMANN_MAX_TERMS).unwrap();
            prop_assert!(u.value.is_nonnegative(u.value.eps_pos()));
        }
    }

    #[test]
    fn norm_minus_one_is_seminorm(a in values(-1.0, 1.0), c in -5.0..5.0_f64) {
        let f = grid(Space::Shift, a);
        let g = embed(&f);
        let scaled = norm_minus_one(&SHIFT, 1.0, &g.scale(c)).unwrap();
        prop_assert!((scaled - c.abs() * norm_minus_one(&SHIFT, 1.0, &g).unwrap()).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn dyson_phillips_terms_positive(d in positive_density(), v in prop::collection::vec(0.0..1.0_f64, 51)) {
        let u0 = grid(Space::Shift, v);
        let b = RankOnePerturbation::uniform(ExtrapolatedElement::from_density(Space::Shift, 50, d).unwrap());
        let cfg = DpConfig::new(4.0, 0.5, 0.01);
        for n in 0..4 {
            let term = dp_term(&SHIFT, &b, &cfg, n, 0.5, &u0).unwrap();
            prop_assert!(term.is_nonnegative(term.eps_pos()));
        }
    }

    #[test]
    fn periodic_evolution_positive(v in prop::collection::vec(0.0..1.0_f64, 41), level in 0.1..2.0_f64) {
        let rot = GeneratorSpec::rotation();
        let u0 = grid(Space::Periodic, v);
        let b = RankOnePerturbation::uniform(
            ExtrapolatedElement::from_density(Space::Periodic, 40, Density::constant(level)).unwrap(),
        );
        let cfg = DpConfig::new(2.0 * level + 1.0, 1.0, 0.01);
        let res = dp_evolve(&rot, &b, &cfg, &u0, &[0.5, 1.0]).unwrap();
        prop_assert_eq!(res.positivity_ok, Some(true));
    }
}

#[test]
fn generator_consistency_in_minus_one_norm() {
    // u₀ smooth with u₀(1) = 0; (A₋₁ + B)u₀ has antiderivative u₀ + (∫u₀)·F_h
    let n = 2000;
    let u0 = GridFunction::from_fn(Space::Shift, n, |x| (1.0 - x).powi(2) * (1.0 + x)).unwrap();
    let h = ExtrapolatedElement::from_density(Space::Shift, n, Density::constant(1.0)).unwrap();
    let b = RankOnePerturbation::uniform(h.clone());
    let target = ExtrapolatedElement::from_antiderivative(u0.axpy(u0.integrate(), h.antiderivative()).unwrap());
    let mut errs = Vec::new();
    for &delta in &[0.04, 0.02, 0.01] {
        let cfg = DpConfig::new(1.0, delta, delta / 40.0);
        let res = dp_evolve(&SHIFT, &b, &cfg, &u0, &[delta]).unwrap();
        let quotient = res.states[1].sub(&u0).unwrap().scale(1.0 / delta);
        let diff = embed(&quotient).sub(&target).unwrap();
        errs.push(norm_minus_one(&SHIFT, 1.0, &diff).unwrap());
    }
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    assert!(errs[2] < 0.02, "{errs:?}");
}

#[test]
fn resolvent_of_direction_matches_embedding_route() {
    let n = 800;
    let f = GridFunction::from_fn(Space::Shift, n, |x| (1.0 - x) * (4.0 * x).cos().abs()).unwrap();
    let via = extrapolated_resolvent(&SHIFT, 0.7, &embed(&f)).unwrap();
    assert!(via.distance(&SHIFT.resolvent(0.7, &f).unwrap()).unwrap() < 1e-6);
}
