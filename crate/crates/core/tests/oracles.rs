use rand::Rng;
use revmono::lab::gen::{random_dist, random_xos, rng_for};
use revmono::oracles::{
    drev_ud, opt_copies_ud, opt_single_param, rev_bic_lp, BundleRule, Environment, LpOptions, SolutionConcept,
};
use revmono::prob::{v_dominates, v_dominates_lp};
use revmono::{r, Caps, DiscreteDist, ProductDist, Rat, XosValuation};

fn half_half() -> DiscreteDist {
    DiscreteDist::new([(r(1, 1), r(1, 2)), (r(2, 1), r(1, 2))]).unwrap()
}

fn lp(concept: SolutionConcept) -> LpOptions {
    LpOptions::new(concept, BundleRule::Any)
}

#[test]
fn flow_and_lp_agree_on_valuation_dominance() {
    let caps = Caps::default();
    let mut rng = rng_for(77);
    let mut feasible = 0;
    for _ in 0..300 {
        let m = 2;
        let v = random_xos(&mut rng, 1, m);
        let f: Vec<DiscreteDist> = (0..m).map(|_| random_dist(&mut rng, 2, 3)).collect();
        let g: Vec<DiscreteDist> = (0..m).map(|_| random_dist(&mut rng, 2, 3)).collect();
        let flow = v_dominates(&v, 0, &f, &g, &caps).unwrap();
        let by_lp = v_dominates_lp(&v, 0, &f, &g, &caps).unwrap();
        assert_eq!(flow.is_some(), by_lp.is_some(), "f={f:?} g={g:?}");
        if let Some(c) = flow {
            feasible += 1;
            assert_eq!(c.total(), Rat::one());
        }
    }
    assert!(feasible > 0, "sample never produced a dominating pair");
}

#[test]
fn one_item_lp_matches_posted_price() {
    let v = XosValuation::additive(1, 1);
    let f = ProductDist::new(vec![vec![half_half()]]).unwrap();
    for concept in [SolutionConcept::Bic, SolutionConcept::Dic] {
        assert_eq!(rev_bic_lp(&v, &f, lp(concept), &Caps::default()).unwrap().value, r(1, 1));
    }
}

#[test]
fn two_items_beat_bundle_price() {
    let v = XosValuation::additive(1, 2);
    let f = ProductDist::new(vec![vec![half_half(), half_half()]]).unwrap();
    let rev = rev_bic_lp(&v, &f, lp(SolutionConcept::Bic), &Caps::default()).unwrap().value;
    assert!(rev >= r(9, 4), "{rev}");
}

#[test]
fn point_mass_is_fully_extracted() {
    let v = XosValuation::additive(1, 2);
    let f = ProductDist::new(vec![vec![DiscreteDist::point(r(3, 1)), DiscreteDist::point(r(5, 1))]]).unwrap();
    assert_eq!(rev_bic_lp(&v, &f, lp(SolutionConcept::Dic), &Caps::default()).unwrap().value, r(8, 1));
}

#[test]
fn dic_never_exceeds_bic() {
    let caps = Caps::default();
    let mut rng = rng_for(5);
    for _ in 0..25 {
        let (n, m) = (2, 2);
        let v = random_xos(&mut rng, n, m);
        let f =
            ProductDist::new((0..n).map(|_| (0..m).map(|_| random_dist(&mut rng, 2, 4)).collect()).collect()).unwrap();
        let bic = rev_bic_lp(&v, &f, lp(SolutionConcept::Bic), &caps).unwrap().value;
        let dic = rev_bic_lp(&v, &f, lp(SolutionConcept::Dic), &caps).unwrap().value;
        let again = rev_bic_lp(&v, &f, lp(SolutionConcept::Dic).reverify(), &caps).unwrap().value;
        assert!(dic <= bic);
        assert_eq!(dic, again);
    }
}

#[test]
fn copies_of_two_iid_items() {
    let f = ProductDist::new(vec![vec![half_half(), half_half()]]).unwrap();
    // Ironed virtual values are 0 at 1 and 2 at 2; the max is positive unless both are 1.
    assert_eq!(opt_copies_ud(&f, &Caps::default()).unwrap(), r(3, 2));
}

#[test]
fn copies_sandwich_for_one_buyer() {
    let caps = Caps::default();
    let mut rng = rng_for(31);
    for _ in 0..60 {
        let m = rng.gen_range(1..=3);
        let f = ProductDist::new(vec![(0..m).map(|_| random_dist(&mut rng, 3, 6)).collect()]).unwrap();
        let drev = drev_ud(&f, &caps).unwrap();
        assert!(drev.is_exact());
        let copies = opt_copies_ud(&f, &caps).unwrap();
        assert!(drev.lower <= copies);
        assert!(copies <= drev.lower.clone() * r(6, 1));
    }
}

#[test]
fn empty_environment_earns_nothing() {
    let env = Environment::explicit(vec![vec![Rat::zero(); 2]]).unwrap();
    assert_eq!(opt_single_param(&env, &[half_half(), half_half()], &Caps::default()).unwrap(), Rat::zero());
}
