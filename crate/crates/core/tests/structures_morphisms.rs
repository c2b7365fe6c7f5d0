use std::collections::{BTreeSet, HashSet};

use lelek_core::morphisms::{fan_cover, random_fan_epi};
use lelek_core::{compose, enumerate_epis, Fan, Morphism, Spider, Structure, Tree};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Every rooted tree with at most `max` nodes, one per isomorphism class,
/// as parent vectors with `parent[i] < i`.
fn all_trees(max: usize) -> Vec<Tree> {
    fn canon(parent: &[usize], x: usize) -> String {
        let mut kids: Vec<String> =
            (1..parent.len()).filter(|&c| parent[c] == x).map(|c| canon(parent, c)).collect();
        kids.sort();
        format!("({})", kids.concat())
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for n in 1..=max {
        let mut parent = vec![0usize; n];
        loop {
            if seen.insert(canon(&parent, 0)) {
                let names = (0..n).map(|i| if i == 0 { "r".to_string() } else { format!("v{i}") }).collect();
                let links = (0..n).map(|i| (i > 0).then_some(parent[i])).collect();
                out.push(Tree::from_parents(names, links, 0).unwrap());
            }
            // odometer over parent[i] in 0..i
            let Some(i) = (2..n).rev().find(|&i| parent[i] + 1 < i) else { break };
            parent[i] += 1;
            parent[i + 1..].iter_mut().for_each(|p| *p = 0);
        }
    }
    out
}

/// Epimorphism straight from the definition: onto, and `R_T` is exactly the
/// image of `R_S`.
fn is_epi_by_definition<S: Structure, T: Structure>(s: &S, t: &T, map: &[usize]) -> bool {
    let nodes: HashSet<usize> = map.iter().copied().collect();
    if nodes.len() != t.len() {
        return false;
    }
    let mut image = HashSet::new();
    for x in 0..s.len() {
        for y in 0..s.len() {
            if s.related(x, y) {
                image.insert((map[x], map[y]));
            }
        }
    }
    let rel: HashSet<(usize, usize)> =
        (0..t.len()).flat_map(|a| (0..t.len()).map(move |b| (a, b))).filter(|&(a, b)| t.related(a, b)).collect();
    image == rel
}

fn naive_epis<S: Structure, T: Structure>(s: &S, t: &T) -> Vec<Vec<usize>> {
    let (n, k) = (s.len(), t.len());
    let mut out = Vec::new();
    let mut map = vec![0usize; n];
    loop {
        if is_epi_by_definition(s, t, &map) {
            out.push(map.clone());
        }
        let mut i = n;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            map[i] += 1;
            if map[i] < k {
                break;
            }
            map[i] = 0;
        }
    }
}

#[test]
fn tree_census() {
    // rooted unlabeled trees: 1, 1, 2, 4, 9, 20 nodes of size 1..=6
    let counts: Vec<usize> = (1..=6).map(|n| all_trees(n).len()).collect();
    assert_eq!(counts, vec![1, 2, 4, 8, 17, 37]);
}

fn branch_counts<T: Structure>(t: &T) -> Vec<usize> {
    let mut seen = vec![0usize; t.len()];
    for b in t.branches() {
        let nodes = b.nodes();
        assert_eq!(nodes[0], t.root());
        for w in nodes.windows(2) {
            assert!(t.le(w[0], w[1]) && t.related(w[0], w[1]));
        }
        assert!(t.is_leaf(b.leaf()));
        for &x in &nodes[1..] {
            seen[x] += 1;
        }
    }
    seen
}

#[test]
fn branches_are_maximal_chains() {
    for t in all_trees(7) {
        let seen = branch_counts(&t);
        for x in 1..t.len() {
            assert!(seen[x] >= 1);
            if t.is_leaf(x) {
                assert_eq!(seen[x], 1, "{t:?}");
            }
        }
        assert_eq!(t.branches().len(), (0..t.len()).filter(|&x| t.is_leaf(x)).count());
    }
}

#[test]
fn branches_partition_fans_and_spiders() {
    for f in Fan::all_up_to(9) {
        assert!(branch_counts(&f)[1..].iter().all(|&c| c == 1));
    }
    let s = Spider::new(vec![3, 1, 2]);
    assert!(branch_counts(&s)[1..].iter().all(|&c| c == 1));
    // D1: a single node is one degenerate branch
    assert_eq!(Fan::point().branches().len(), 1);
}

#[test]
fn relation_is_reflexive_and_strict_part_antisymmetric() {
    for t in all_trees(7) {
        for s in 0..t.len() {
            assert!(t.related(s, s));
            for u in 0..t.len() {
                assert!(s == u || !(t.related(s, u) && t.related(u, s)));
            }
        }
    }
}

#[test]
fn fan_cover_is_epi_for_small_trees() {
    let trees = all_trees(9);
    assert_eq!(trees.len(), 1 + 1 + 2 + 4 + 9 + 20 + 48 + 115 + 286);
    for t in &trees {
        let phi = fan_cover(t);
        assert!(phi.is_epimorphism(), "{t:?}");
        assert!(is_epi_by_definition(phi.source(), t, phi.map()));
    }
}

#[test]
fn enumerate_matches_naive_on_small_trees() {
    let trees = all_trees(5);
    for s in &trees {
        for t in &trees {
            let got: Vec<Vec<usize>> = enumerate_epis(s, t).into_iter().map(|m| m.into_map()).collect();
            assert_eq!(got, naive_epis(s, t), "{s:?} -> {t:?}");
        }
    }
}

#[test]
fn enumerated_epis_fix_the_root() {
    for s in Fan::all_up_to(6) {
        for t in Fan::all_up_to(6) {
            for f in enumerate_epis(&s, &t) {
                assert_eq!(f.apply(s.root()), t.root());
            }
        }
    }
}

#[test]
fn compose_is_associative_on_enumerated_triples() {
    let fans = Fan::all_up_to(5);
    for a in &fans {
        for b in &fans {
            let ab = enumerate_epis(a, b);
            if ab.is_empty() {
                continue;
            }
            for c in &fans {
                let bc = enumerate_epis(b, c);
                for d in &fans {
                    let cd = enumerate_epis(c, d);
                    for f in ab.iter().take(3) {
                        for g in bc.iter().take(3) {
                            for h in cd.iter().take(3) {
                                let left = compose(&compose(h, g).unwrap(), f).unwrap();
                                let right = compose(h, &compose(g, f).unwrap()).unwrap();
                                assert_eq!(left, right);
                                assert!(left.is_epimorphism());
                            }
                        }
                    }
                }
            }
        }
    }
}

proptest! {
    #[test]
    fn random_epis_are_epis(h in 1usize..5, w in 1usize..5, dh in 0usize..3, dw in 0usize..4, seed: u64) {
        let target = Fan::new(h, w);
        let source = Fan::new(h + dh, w + dw);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_fan_epi(&source, &target, &mut rng).unwrap();
        prop_assert!(f.is_epimorphism());
        prop_assert!(is_epi_by_definition(&source, &target, f.map()));
    }

    #[test]
    fn no_epi_onto_a_taller_or_wider_fan(h in 1usize..4, w in 1usize..4, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = Fan::new(h, w);
        prop_assert!(random_fan_epi(&s, &Fan::new(h + 1, w), &mut rng).is_none());
        prop_assert!(random_fan_epi(&s, &Fan::new(h, w + 1), &mut rng).is_none());
        prop_assert!(enumerate_epis(&s, &Fan::new(h + 1, 1)).is_empty());
    }

    #[test]
    fn fan_json_roundtrip(h in 0usize..6, w in 1usize..6) {
        let f = if h == 0 { Fan::point() } else { Fan::new(h, w) };
        let text = serde_json::to_string(&f).unwrap();
        prop_assert_eq!(serde_json::from_str::<Fan>(&text).unwrap(), f);
    }

    #[test]
    fn epi_json_roundtrip(h in 1usize..4, w in 1usize..4, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_fan_epi(&Fan::new(h + 1, w + 1), &Fan::new(h, w), &mut rng).unwrap();
        let text = serde_json::to_string(&f).unwrap();
        let back: Morphism<Fan, Fan> = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, f);
    }

    #[test]
    fn branch_images_are_intervals(h in 1usize..5, w in 1usize..4, seed: u64) {
        // fibers along a branch are intervals: images are monotone in depth
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = Fan::new(h + 2, w + 1);
        let t = Fan::new(h, w);
        let f = random_fan_epi(&s, &t, &mut rng).unwrap();
        for b in s.branches() {
            let depths: Vec<usize> = b.nodes().iter().map(|&x| t.depth(f.apply(x))).collect();
            prop_assert!(depths.windows(2).all(|d| d[1] == d[0] || d[1] == d[0] + 1));
            let imgs: BTreeSet<usize> = b.nodes().iter().map(|&x| f.apply(x)).collect();
            prop_assert_eq!(imgs.len(), depths.last().unwrap() + 1);
        }
    }
}
