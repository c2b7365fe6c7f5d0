use lelek_core::homeo::HomeoError;
use lelek_core::morphisms::random_fan_epi;
use lelek_core::{adjacent, build, cells, enumerate_epis, ensure_star, envelope, factorize, Fan, FanMorphism, Structure};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Number of carrier branches whose image is a whole base branch, per base branch.
fn onto_counts(f: &FanMorphism) -> Vec<usize> {
    let (t, s) = (f.source(), f.target());
    s.branches()
        .iter()
        .map(|c| {
            t.branches()
                .iter()
                .filter(|b| {
                    let mut img: Vec<usize> = b.nodes().iter().map(|&x| f.apply(x)).collect();
                    img.dedup();
                    img == c.nodes()
                })
                .count()
        })
        .collect()
}

fn star_holds(f: &FanMorphism) -> bool {
    let k = f.target().width();
    f.target().is_point() || onto_counts(f).iter().all(|&c| c > k)
}

/// Lifts both maps along `ensure_star(β₀)`, factorizes and checks the chain
/// against its contract by hand.
fn run(beta0: &FanMorphism, beta: &FanMorphism) -> usize {
    let s = *beta0.target();
    let (t2, lift, b0) = ensure_star(beta0, s.width()).unwrap();
    assert!(star_holds(&b0));
    let b = beta.after(&lift).unwrap();
    let chain = factorize(&b0, &b).unwrap();
    let stages: Vec<FanMorphism> = (0..=chain.len()).map(|i| chain.step(i)).collect();
    assert_eq!(stages[0], b0);
    assert_eq!(stages[chain.len()], b);
    for st in &stages {
        assert!(st.is_epimorphism());
    }
    for w in stages.windows(2) {
        for x in 0..t2.len() {
            assert!(s.related_sym(w[0].apply(x), w[1].apply(x)));
        }
        assert!(adjacent(&w[0], &w[1]).unwrap());
    }
    let bound = 2 * s.height() * t2.branches().len();
    assert!(chain.len() <= bound, "{} > {bound}", chain.len());
    let r = chain.verify(&b0, &b);
    assert!(r.starts_at_beta0 && r.ends_at_beta && r.all_epimorphisms && r.all_adjacent);
    chain.len()
}

#[test]
fn exhaustive_small_universe() {
    let mut bases = vec![Fan::point()];
    bases.extend((1..=2).flat_map(|h| (1..=2).map(move |w| Fan::new(h, w))));
    let mut pairs = 0;
    for s in &bases {
        for dh in 0..=1 {
            for w in s.width()..=3 {
                let t = Fan::new(s.height().max(1) + dh, w);
                let epis = enumerate_epis(&t, s);
                for b0 in &epis {
                    for b in &epis {
                        run(b0, b);
                        pairs += 1;
                    }
                }
            }
        }
    }
    assert!(pairs > 1000, "{pairs}");
}

#[test]
fn random_larger_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let s = Fan::new(rng.gen_range(1..=4), rng.gen_range(1..=3));
        let t = Fan::new(s.height() + rng.gen_range(0..=2), s.width() + rng.gen_range(0..=4));
        let b0 = random_fan_epi(&t, &s, &mut rng).unwrap();
        let b = random_fan_epi(&t, &s, &mut rng).unwrap();
        run(&b0, &b);
    }
}

#[test]
fn equal_endpoints_return_home() {
    let s = Fan::new(2, 2);
    let t = Fan::new(3, 3);
    for b0 in enumerate_epis(&t, &s).iter().take(20) {
        run(b0, b0);
    }
}

#[test]
fn input_errors() {
    let s = Fan::new(1, 1);
    let t = Fan::new(1, 2);
    let id = FanMorphism::identity(t);
    let b0 = enumerate_epis(&t, &s).remove(0);
    assert_eq!(factorize(&b0, &id).unwrap_err(), HomeoError::Mismatch);
    let not_epi = FanMorphism::new(t, s, vec![0, 0, 0]).unwrap();
    assert!(matches!(factorize(&not_epi, &b0), Err(HomeoError::NotEpi(_))));
    assert!(matches!(ensure_star(&not_epi, 1), Err(HomeoError::NotEpi(_))));
    // the identity of F(1,1) has one onto branch, one short of (*)
    let one = FanMorphism::identity(s);
    assert_eq!(factorize(&one, &one).unwrap_err(), HomeoError::NotStar { branch: 1, count: 1, needed: 2 });
    let (t2, _, lifted) = ensure_star(&one, 1).unwrap();
    assert_eq!(t2, Fan::new(1, 2));
    assert_eq!(onto_counts(&lifted), vec![2]);
}

#[test]
fn steps_move_cells_by_less_than_twice_the_mesh() {
    let env = envelope(&build(3, 0));
    for n in 1..=2 {
        let s = *env.fan(n);
        let grid = cells(&env, n).unwrap();
        let embed = env.inclusion(n).map().to_vec();
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        for _ in 0..10 {
            let t = Fan::new(s.height() + 1, s.width() + 3);
            let b0 = random_fan_epi(&t, &s, &mut rng).unwrap();
            let b = random_fan_epi(&t, &s, &mut rng).unwrap();
            let (t2, lift, b0) = ensure_star(&b0, s.width()).unwrap();
            let chain = factorize(&b0, &b.after(&lift).unwrap()).unwrap();
            assert_eq!(chain.carrier(), &t2);
            let (moved, bound) = chain.displacement(&grid, &embed);
            assert!(moved < bound, "level {n}: {moved} >= {bound}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn ensure_star_establishes_star(hs in 1usize..=3, ws in 1usize..=3, dh in 0usize..=1, dw in 0usize..=3, seed: u64) {
        let s = Fan::new(hs, ws);
        let t = Fan::new(hs + dh, ws + dw);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b0 = random_fan_epi(&t, &s, &mut rng).unwrap();
        let (t2, lift, lifted) = ensure_star(&b0, ws).unwrap();
        prop_assert!(star_holds(&lifted));
        prop_assert!(lift.is_epimorphism());
        prop_assert_eq!(lifted, b0.after(&lift).unwrap());
        prop_assert_eq!(t2.height(), t.height());
        if star_holds(&b0) {
            prop_assert_eq!(t2, t);
        }
    }

    #[test]
    fn chain_json_roundtrip(hs in 1usize..=3, ws in 1usize..=2, seed: u64) {
        let s = Fan::new(hs, ws);
        let t = Fan::new(hs + 1, 3 * ws + 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b0 = random_fan_epi(&t, &s, &mut rng).unwrap();
        let b = random_fan_epi(&t, &s, &mut rng).unwrap();
        let (_, lift, b0) = ensure_star(&b0, ws).unwrap();
        let chain = factorize(&b0, &b.after(&lift).unwrap()).unwrap();
        let text = serde_json::to_string(&chain).unwrap();
        let back: lelek_core::FactorChain = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, chain);
    }
}
