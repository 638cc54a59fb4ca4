use glorenz::experiments::srb;
use glorenz::flow::SuspensionState;
use glorenz::maps::{DoublingSkew, SectionPoint, ValidatedModel, HALF};
use glorenz::measures::{push_forward, w1_1d, w1_zero, FamilyOperator, LeafFamily, Measure1D};
use glorenz::rng::Streams;
use glorenz::statistics::{
    dyadic_radii, hitting_times_flow, hitting_times_map, Linear, Observable, Outcome, SrbSampler,
};
use proptest::prelude::*;

fn point() -> impl Strategy<Value = SectionPoint> {
    (-0.5f64..0.5, -0.5f64..0.5)
        .prop_filter("off the singular line", |(x, _)| *x != 0.0)
        .prop_map(|(x, y)| SectionPoint::new(x, y))
}

fn atoms(mass: f64) -> impl Strategy<Value = Measure1D> {
    prop::collection::vec((-0.5f64..0.5, 0.01f64..1.0), 1..10).prop_map(move |v| {
        let s: f64 = v.iter().map(|p| p.1).sum();
        Measure1D::Atoms(v.into_iter().map(|(x, w)| (x, w * mass / s)).collect())
    })
}

proptest! {
    #[test]
    fn return_map_preserves_the_square_and_is_odd(q in point()) {
        let m = ValidatedModel::reference();
        let p = m.poincare_map(q).unwrap();
        prop_assert!(p.x.abs() <= HALF && p.y.abs() <= HALF);
        let r = m.poincare_map(SectionPoint::new(-q.x, -q.y)).unwrap();
        prop_assert!((r.x + p.x).abs() < 1e-12 && (r.y + p.y).abs() < 1e-12);
    }

    #[test]
    fn fibers_contract_by_the_leaf_factor(x in -0.5f64..0.5, y1 in -0.5f64..0.5, y2 in -0.5f64..0.5) {
        prop_assume!(x != 0.0);
        let m = ValidatedModel::reference();
        let a = m.poincare_map(SectionPoint::new(x, y1)).unwrap();
        let b = m.poincare_map(SectionPoint::new(x, y2)).unwrap();
        prop_assert!((a.y - b.y).abs() <= m.leaf_contraction() * (y1 - y2).abs() + 1e-15);
    }

    #[test]
    fn flat_distance_is_below_w1_and_above_the_mass_gap(a in atoms(1.0), b in atoms(1.0), m in 0.1f64..3.0) {
        prop_assert!(w1_zero(&a, &b) <= w1_1d(&a, &b).unwrap() + 1e-12);
        let c = match &b {
            Measure1D::Atoms(v) => Measure1D::Atoms(v.iter().map(|(x, w)| (*x, w * m)).collect()),
            Measure1D::Grid(_) => unreachable!(),
        };
        prop_assert!(w1_zero(&a, &c) + 1e-12 >= (1.0 - m).abs());
    }

    #[test]
    fn linear_observables_respect_their_constants(o in (-3f64..3.0, -3f64..3.0, -1f64..1.0), p in point(), q in point()) {
        let f = Linear { a: o.0, b: o.1, c: o.2 };
        prop_assert!((f.eval(p) - f.eval(q)).abs() <= f.lipschitz() * p.dist(&q) + 1e-12);
        prop_assert!(f.eval(p) >= f.infimum() - 1e-12);
    }

    #[test]
    fn map_hitting_times_are_nested(seed in 0u64..1000) {
        let m = ValidatedModel::reference();
        let streams = Streams::new(seed);
        let mut rng = streams.get(0, 0);
        let fam = LeafFamily::lebesgue(64, 64);
        let sampler = SrbSampler::new(&fam).unwrap();
        let start = sampler.draw(&m, 8, &mut rng);
        let target = sampler.draw(&m, 8, &mut rng);
        let out = hitting_times_map(&m, start, target, &dyadic_radii(2, 6), 100_000, &mut rng).unwrap();
        for w in out.windows(2) {
            if let (Some(a), Some(b)) = (w[0].hit(), w[1].hit()) {
                prop_assert!(a <= b);
            }
            if !w[0].is_hit() {
                prop_assert!(!w[1].is_hit());
            }
        }
    }
}

#[test]
fn pushforward_conserves_mass() {
    let m = ValidatedModel::reference();
    let op = FamilyOperator::new(&m, 128, 32).unwrap();
    let mut fam = LeafFamily::lebesgue(128, 32);
    for _ in 0..10 {
        fam = op.apply(&fam).unwrap();
        assert!((fam.total_mass() - 1.0).abs() < 1e-12);
    }
    let baker = push_forward(&DoublingSkew::baker(), &LeafFamily::lebesgue(64, 64)).unwrap();
    // Lebesgue is invariant for the baker map
    assert!(baker
        .cells()
        .iter()
        .all(|c| (c - 1.0 / 4096.0).abs() < 1e-12));
}

#[test]
fn srb_samples_and_their_images_avoid_the_central_band() {
    let m = ValidatedModel::reference();
    let s = srb(&m, 256, 64).unwrap();
    let streams = Streams::new(5);
    for i in 0..2000 {
        let q = s.sampler.draw(&m, 32, &mut streams.get(3, i));
        assert!(q.x.abs() <= HALF && q.y.abs() <= HALF);
        // each branch image is a strip of half-width λ/2 around y = ±1/4
        let p = m.poincare_map(q).unwrap();
        assert!(p.y.abs() >= 0.25 - m.leaf_contraction() * HALF - 1e-12);
    }
}

#[test]
fn flow_hits_of_the_own_trajectory_are_near_immediate() {
    let m = ValidatedModel::reference();
    let streams = Streams::new(9);
    let mut rng = streams.get(0, 0);
    let q = SectionPoint::new(0.2, 0.1);
    let start = SuspensionState::at(q);
    // the point one cube-quarter along the trajectory of q is hit without a return
    let target = glorenz::statistics::FlowTarget::at_fraction(&m, q, 0.25).unwrap();
    let out = hitting_times_flow(&m, start, target.point, &[1e-3, 1e-6], 10.0, &mut rng).unwrap();
    for h in &out {
        assert!(
            matches!(h.time, Outcome::Hit(t) if t < m.outer_travel_time() + glorenz::flow::roof(&m, q.x).unwrap())
        );
        assert_eq!(h.segment, 0);
    }
}
