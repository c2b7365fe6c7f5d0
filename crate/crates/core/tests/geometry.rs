use std::path::PathBuf;
use std::sync::OnceLock;

use lelek_core::geometry::{
    cantor_value, cell_levels, digit_map, digit_word, hausdorff, skeleton, CellAssignment,
};
use lelek_core::{
    build, cells, cover_cantor, endpoint_gap, envelope, pair_survival, render, CoverStructure, Envelope, Structure,
};
use num_rational::Rational64;
use proptest::prelude::*;

fn env8() -> &'static (Envelope, Vec<CellAssignment>) {
    static ENV: OnceLock<(Envelope, Vec<CellAssignment>)> = OnceLock::new();
    ENV.get_or_init(|| {
        let env = envelope(&build(8, 0));
        let levels = cell_levels(&env).collect();
        (env, levels)
    })
}

fn golden(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn cells_nest_and_tile_at_every_level() {
    let (env, levels) = env8();
    for (n, c) in levels.iter().enumerate() {
        assert_eq!(c.level(), n);
        assert!(c.check_tiling().is_empty(), "level {n}: {:?}", c.check_tiling());
        assert_eq!(c.point(env.level(n).root()), (0.0, 0.0));
        assert!(c.mesh() <= 0.5f64.powi(n as i32) + 1e-12, "level {n}: {}", c.mesh());
        if n > 0 {
            let g = env.bond(n - 1).map();
            let bad = levels[n - 1].check_nesting(c, g);
            assert!(bad.is_empty(), "level {n}: {bad:?}");
            // nesting checked directly on the planar cells
            for x in 0..env.level(n).len() {
                let (fine, coarse) = (c.cell(x), levels[n - 1].cell(g[x]));
                for p in fine.corners() {
                    assert!(coarse.dist(p) < 1e-12);
                }
            }
        }
    }
}

#[test]
fn skeleton_refines_within_cell_mesh() {
    // point sets are compared pairwise, so stay at moderate depth
    let (env, levels) = env8();
    for d in 1..=5 {
        let fine: Vec<(f64, f64)> = skeleton(env, d).unwrap().concat();
        let coarse: Vec<(f64, f64)> = skeleton(env, d - 1).unwrap().concat();
        let h = hausdorff(&fine, &coarse);
        assert!(h <= levels[d - 1].cell_mesh() + 1e-12, "depth {d}: {h}");
    }
}

#[test]
fn render_matches_golden_files() {
    let env = envelope(&build(4, 0));
    assert_eq!(render(&env, 4).unwrap(), golden("fan_d4_s0_l4.svg"));
    assert_eq!(render(&env, 2).unwrap(), golden("fan_d4_s0_l2.svg"));
    let point = envelope(&build(0, 0));
    assert_eq!(render(&point, 0).unwrap(), golden("point.svg"));
    // byte-identical across independent builds
    assert_eq!(render(&envelope(&build(4, 0)), 4).unwrap(), render(&env, 4).unwrap());
}

#[test]
fn render_draws_one_polyline_per_branch() {
    let (env, _) = env8();
    for n in [3, 5] {
        let svg = render(env, n).unwrap();
        assert_eq!(svg.matches("<polyline").count(), env.fan(n).width());
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
    }
}

#[test]
fn endpoint_gap_shrinks() {
    let (env, _) = env8();
    let gaps: Vec<f64> = (2..=8).map(|m| endpoint_gap(env, 2, m).unwrap()).collect();
    assert!(gaps.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{gaps:?}");
    assert!(gaps[6] < gaps[2], "{gaps:?}");
    assert!(gaps.iter().all(|&g| (0.0..=2.0).contains(&g)));
    assert!(endpoint_gap(env, 3, 2).is_err());
    assert!(endpoint_gap(env, 2, 9).is_err());
}

#[test]
fn pair_survival_decreases_and_frees_the_root() {
    let (env, _) = env8();
    for m in 0..4 {
        let s = env.level(m);
        let base = pair_survival(env, m, m).unwrap();
        for x in 0..s.len() {
            let degree = (0..s.len()).filter(|&y| y != x && s.related_sym(x, y)).count();
            assert_eq!(base[x], degree);
        }
        let mut prev = base;
        for n in m + 1..=env.depth().min(m + 4) {
            let cur = pair_survival(env, m, n).unwrap();
            assert!(cur.iter().zip(&prev).all(|(a, b)| a <= b), "m={m} n={n}");
            prev = cur;
        }
        assert_eq!(prev[s.root()], 0);
    }
}

#[test]
fn level_errors() {
    let (env, _) = env8();
    assert!(cells(env, 9).is_err());
    assert!(render(env, 9).is_err());
}

/// Binary value of a {0,2}-word read with 2 as 1.
fn binary(word: &[u8]) -> Rational64 {
    word.iter()
        .enumerate()
        .map(|(i, &d)| Rational64::new(i64::from(d / 2), 1 << (i + 1)))
        .sum()
}

proptest! {
    #[test]
    fn digit_map_is_an_order_isomorphism(a in prop::collection::vec(prop::bool::ANY, 1..20),
                                         b in prop::collection::vec(prop::bool::ANY, 1..20)) {
        let len = a.len().min(b.len());
        let wa: Vec<u8> = a[..len].iter().map(|&x| if x { 2 } else { 0 }).collect();
        let wb: Vec<u8> = b[..len].iter().map(|&x| if x { 2 } else { 0 }).collect();
        prop_assert_eq!(digit_map(&wa), binary(&wa));
        prop_assert_eq!(digit_word(&wa).len(), len);
        prop_assert!(digit_word(&wa).iter().all(|&d| d <= 1));
        prop_assert_eq!(wa == wb, digit_map(&wa) == digit_map(&wb));
        prop_assert_eq!(cantor_value(&wa).cmp(&cantor_value(&wb)), digit_map(&wa).cmp(&digit_map(&wb)));
    }

    #[test]
    fn cover_roundtrips(n in 2usize..6, m in 1usize..4) {
        let c = cover_cantor(n, m).unwrap();
        prop_assert_eq!(c.a.len(), 1 + (n - 1) * m);
        let text = serde_json::to_string(&c).unwrap();
        prop_assert_eq!(serde_json::from_str::<CoverStructure>(&text).unwrap(), c);
    }
}

#[test]
fn covers_in_the_acceptance_range() {
    for n in 3..=5 {
        for m in 2..=3 {
            let c = cover_cantor(n, m).unwrap();
            assert_eq!(c.a.len(), 1 + (n - 1) * m);
            let r = c.verify();
            assert!(r.c1 && r.c2 && r.c3 && r.c4 && r.covers, "({n},{m}): {:?}", r.violations);
        }
    }
    assert!(cover_cantor(1, 2).is_err());
    assert!(cover_cantor(3, 0).is_err());
}
