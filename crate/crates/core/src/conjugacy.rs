//! Fans with an extra binary relation `s`, and membership in `F⁺`.
//!
//! `(T, s) ∈ F⁺` when `s = {(p₁(z), p₂(z)) : z ∈ S}` for two epimorphisms
//! `p₁, p₂: S → T`. The decision procedure uses the characterization by
//! surjectivity, the root pair and connectedness; [`fplus_oracle`] searches
//! for `S, p₁, p₂` directly.

use std::collections::{BTreeSet, HashSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fraisse::jpp;
use crate::morphisms::{FanMorphism, Morphism};
use crate::structures::{Fan, Structure, StructureDoc};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConjugacyError {
    #[error("relation is not in F⁺: {0}")]
    NotInFPlus(Refutation),
    #[error("pair ({0}, {1}) names a node outside the fan")]
    UnknownNode(String, String),
}

/// A fan `T` with a relation `s ⊆ T × T`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SRelation {
    fan: Fan,
    pairs: BTreeSet<(usize, usize)>,
}

impl SRelation {
    pub fn new(fan: Fan, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, ConjugacyError> {
        let pairs: BTreeSet<_> = pairs.into_iter().collect();
        if let Some(&(x, y)) = pairs.iter().find(|&&(x, y)| x >= fan.len() || y >= fan.len()) {
            return Err(ConjugacyError::UnknownNode(x.to_string(), y.to_string()));
        }
        Ok(Self { fan, pairs })
    }

    /// The graph of a map `T → T`.
    pub fn graph(fan: Fan, map: &[usize]) -> Self {
        Self { fan, pairs: map.iter().copied().enumerate().collect() }
    }

    pub fn identity(fan: Fan) -> Self {
        Self { fan, pairs: (0..fan.len()).map(|x| (x, x)).collect() }
    }

    /// Relation given by canonical node ids.
    pub fn from_names(fan: Fan, pairs: &[(&str, &str)]) -> Result<Self, ConjugacyError> {
        let idx = |a: &str, b: &str| {
            fan.index_of(a)
                .zip(fan.index_of(b))
                .ok_or_else(|| ConjugacyError::UnknownNode(a.into(), b.into()))
        };
        let pairs = pairs.iter().map(|(a, b)| idx(a, b)).collect::<Result<BTreeSet<_>, _>>()?;
        Ok(Self { fan, pairs })
    }

    /// `{(p₁(z), p₂(z)) : z ∈ S}`.
    pub fn realized(p1: &FanMorphism, p2: &FanMorphism) -> Self {
        let pairs = p1.map().iter().copied().zip(p2.map().iter().copied()).collect();
        Self { fan: *p1.target(), pairs }
    }

    pub fn fan(&self) -> &Fan {
        &self.fan
    }

    pub fn pairs(&self) -> &BTreeSet<(usize, usize)> {
        &self.pairs
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        self.pairs.contains(&(x, y))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[derive(Serialize, Deserialize)]
struct SRelationDoc {
    fan: StructureDoc,
    pairs: Vec<(String, String)>,
}

impl Serialize for SRelation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let pairs = self.pairs.iter().map(|&(x, y)| (self.fan.name(x), self.fan.name(y))).collect();
        SRelationDoc { fan: self.fan.to_doc(), pairs }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for SRelation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        let doc = SRelationDoc::deserialize(d)?;
        let (fan, names) = Fan::from_doc(&doc.fan).map_err(D::Error::custom)?;
        let pairs = doc
            .pairs
            .iter()
            .map(|(a, b)| match (names.get(a), names.get(b)) {
                (Some(&x), Some(&y)) => Ok((x, y)),
                _ => Err(D::Error::custom(format!("unknown node in pair ({a}, {b})"))),
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { fan, pairs })
    }
}

/// Every node has an outgoing and an incoming pair.
pub fn is_surjective_rel(rel: &SRelation) -> bool {
    let n = rel.fan.len();
    let mut out = vec![false; n];
    let mut inc = vec![false; n];
    for &(x, y) in &rel.pairs {
        out[x] = true;
        inc[y] = true;
    }
    out.iter().chain(&inc).all(|&b| b)
}

/// Pairs of `s` reachable from `(r, r)` by `s`-adjacency, with a BFS parent
/// for each (the root pair is its own parent).
fn bfs(rel: &SRelation) -> Vec<((usize, usize), (usize, usize))> {
    let t = &rel.fan;
    let r = t.root();
    if !rel.contains(r, r) {
        return Vec::new();
    }
    let mut seen = HashSet::from([(r, r)]);
    let mut order = vec![((r, r), (r, r))];
    let mut queue = VecDeque::from([(r, r)]);
    while let Some((x, y)) = queue.pop_front() {
        let mut xs = t.children(x);
        xs.push(x);
        xs.sort_unstable();
        let mut ys = t.children(y);
        ys.push(y);
        ys.sort_unstable();
        for &x1 in &xs {
            for &y1 in &ys {
                if rel.contains(x1, y1) && seen.insert((x1, y1)) {
                    order.push(((x1, y1), (x, y)));
                    queue.push_back((x1, y1));
                }
            }
        }
    }
    order
}

/// Pairs of `s` that are `s`-connected to `(r, r)`.
pub fn s_connected(rel: &SRelation) -> BTreeSet<(usize, usize)> {
    bfs(rel).into_iter().map(|(p, _)| p).collect()
}

/// Why a relation is not in `F⁺`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Error)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum Refutation {
    #[error("node {node} has no {side} pair")]
    NotSurjective { node: String, side: String },
    #[error("(r, r) is missing")]
    MissingRootPair,
    #[error("{} pair(s) are not connected to (r, r)", pairs.len())]
    Disconnected { pairs: Vec<(String, String)> },
}

/// The first failed condition of the characterization, if any.
pub fn refute(rel: &SRelation) -> Option<Refutation> {
    let t = &rel.fan;
    for x in 0..t.len() {
        for (side, ok) in [
            ("outgoing", rel.pairs.iter().any(|p| p.0 == x)),
            ("incoming", rel.pairs.iter().any(|p| p.1 == x)),
        ] {
            if !ok {
                return Some(Refutation::NotSurjective { node: t.name(x), side: side.into() });
            }
        }
    }
    if !rel.contains(t.root(), t.root()) {
        return Some(Refutation::MissingRootPair);
    }
    let reach = s_connected(rel);
    let pairs: Vec<_> = rel
        .pairs
        .iter()
        .filter(|p| !reach.contains(p))
        .map(|&(x, y)| (t.name(x), t.name(y)))
        .collect();
    (!pairs.is_empty()).then_some(Refutation::Disconnected { pairs })
}

pub fn in_fplus(rel: &SRelation) -> bool {
    refute(rel).is_none()
}

/// `S` with `p₁, p₂: S → T` realizing a relation.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub s: Fan,
    pub p1: FanMorphism,
    pub p2: FanMorphism,
}

impl Witness {
    /// Both maps are epimorphisms and realize exactly `rel`.
    pub fn verify(&self, rel: &SRelation) -> bool {
        self.p1.is_epimorphism() && self.p2.is_epimorphism() && SRelation::realized(&self.p1, &self.p2) == *rel
    }
}

#[derive(Serialize, Deserialize)]
struct WitnessDoc {
    s: Fan,
    p1: FanMorphism,
    p2: FanMorphism,
}

impl Serialize for Witness {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        WitnessDoc { s: self.s, p1: self.p1.clone(), p2: self.p2.clone() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Witness {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let doc = WitnessDoc::deserialize(d)?;
        if doc.p1.source() != &doc.s || doc.p2.source() != &doc.s || doc.p1.target() != doc.p2.target() {
            return Err(serde::de::Error::custom("witness maps do not share S and T"));
        }
        Ok(Self { s: doc.s, p1: doc.p1, p2: doc.p2 })
    }
}

/// One chain of length `2k + 2` per pair of `s`, roots identified; each chain
/// follows a shortest connecting path to its pair and stays there.
pub fn fplus_witness(rel: &SRelation) -> Result<Witness, ConjugacyError> {
    if let Some(why) = refute(rel) {
        return Err(ConjugacyError::NotInFPlus(why));
    }
    let t = rel.fan;
    let order = bfs(rel);
    let parent: std::collections::HashMap<_, _> = order.iter().copied().collect();
    let len = 2 * t.height() + 2;
    let s = Fan::new(len, rel.len());
    let (mut m1, mut m2) = (vec![0; s.len()], vec![0; s.len()]);
    for (b, &pair) in rel.pairs.iter().enumerate() {
        let mut path = vec![pair];
        while *path.last().unwrap() != (t.root(), t.root()) {
            path.push(parent[path.last().unwrap()]);
        }
        path.reverse();
        for j in 1..=len {
            let (x, y) = path[j.min(path.len() - 1)];
            m1[s.node(b, j)] = x;
            m2[s.node(b, j)] = y;
        }
    }
    Ok(Witness {
        s,
        p1: Morphism::new(s, t, m1).expect("in range"),
        p2: Morphism::new(s, t, m2).expect("in range"),
    })
}

/// Searches fans `S = F(h, w)` with `|S| ≤ 1 + (2·height(T) + 2)·|s|` for
/// epimorphisms `p₁, p₂: S → T` with `{(p₁(z), p₂(z))} = s`.
///
/// A pair of homomorphisms out of `F(h, w)` is the same as `w` walks of
/// length `h` in `T × T` from `(r, r)` moving by `R` in both coordinates, so
/// the search enumerates the footprints of such walks and asks whether `s` is
/// the union of at most `w` of them. Panics for `|T| > 11`.
pub fn fplus_oracle(rel: &SRelation) -> bool {
    let t = &rel.fan;
    let n = t.len();
    assert!(n * n <= 128, "oracle supports fans with at most 11 nodes");
    let bit = |x: usize, y: usize| 1u128 << (x * n + y);
    let target: u128 = rel.pairs.iter().map(|&(x, y)| bit(x, y)).fold(0, |a, b| a | b);
    let full_rows = (0..n).all(|x| rel.pairs.iter().any(|p| p.0 == x));
    let full_cols = (0..n).all(|y| rel.pairs.iter().any(|p| p.1 == y));
    let r = t.root();
    if target & bit(r, r) == 0 || !full_rows || !full_cols {
        // every homomorphism out of a fan sends the root to the root, and
        // both maps must be onto
        return false;
    }
    let bound = 1 + (2 * t.height() + 2) * rel.len();
    let steps: Vec<Vec<usize>> = (0..n)
        .map(|x| {
            let mut v = t.children(x);
            v.push(x);
            v
        })
        .collect();

    // walks of length h, as (position, footprint) states
    let mut layer: HashSet<((usize, usize), u128)> = HashSet::from([((r, r), bit(r, r))]);
    let mut h = 0;
    loop {
        let masks: Vec<u128> = maximal(layer.iter().map(|&(_, m)| m).collect());
        let width = if h == 0 { 1 } else { (bound - 1) / h };
        if width == 0 {
            return false;
        }
        if covers(target, &masks, width) {
            return true;
        }
        if h + 1 > bound - 1 {
            return false;
        }
        let mut next = HashSet::new();
        for &((x, y), m) in &layer {
            for &x1 in &steps[x] {
                for &y1 in &steps[y] {
                    let b = bit(x1, y1);
                    if target & b != 0 {
                        next.insert(((x1, y1), m | b));
                    }
                }
            }
        }
        // staying put keeps every walk, so a stable layer stays stable
        if next == layer {
            return false;
        }
        layer = next;
        h += 1;
    }
}

fn maximal(mut masks: Vec<u128>) -> Vec<u128> {
    masks.sort_unstable_by_key(|m| std::cmp::Reverse(m.count_ones()));
    masks.dedup();
    let mut out: Vec<u128> = Vec::new();
    for m in masks {
        if !out.iter().any(|&o| o & m == m) {
            out.push(m);
        }
    }
    out
}

/// Is `target` a union of at most `budget` of `masks` (each a subset)?
fn covers(target: u128, masks: &[u128], budget: usize) -> bool {
    fn go(left: u128, masks: &[u128], budget: usize) -> bool {
        if left == 0 {
            return true;
        }
        if budget == 0 {
            return false;
        }
        let low = left & left.wrapping_neg();
        masks.iter().filter(|&&m| m & low != 0).any(|&m| go(left & !m, masks, budget - 1))
    }
    let usable: Vec<u128> = masks.iter().copied().filter(|&m| m & !target == 0).collect();
    go(target, &usable, budget)
}

/// The joint of two members of `F⁺`.
#[derive(Debug, Clone, PartialEq)]
pub struct FPlusJoint {
    pub rel: SRelation,
    pub phi1: FanMorphism,
    pub phi2: FanMorphism,
}

/// `φ` is an epimorphism of fans and carries `s` exactly onto `s'`.
pub fn is_rel_epimorphism(phi: &FanMorphism, from: &SRelation, to: &SRelation) -> bool {
    phi.source() == from.fan() && phi.target() == to.fan() && phi.is_epimorphism() && {
        let image: BTreeSet<_> = from.pairs.iter().map(|&(x, y)| (phi.apply(x), phi.apply(y))).collect();
        image == to.pairs
    }
}

/// Glues the fans at the root (padding the lower one) and pulls each relation
/// back along its projection onto its own part.
pub fn fplus_jpp(rel1: &SRelation, rel2: &SRelation) -> Result<FPlusJoint, ConjugacyError> {
    for rel in [rel1, rel2] {
        if let Some(why) = refute(rel) {
            return Err(ConjugacyError::NotInFPlus(why));
        }
    }
    let joint = jpp(&rel1.fan, &rel2.fan);
    let t = joint.t;
    let part = |x: usize| -> Option<usize> {
        let b = t.branch_of(x)?;
        Some(usize::from(b >= rel1.fan.width()))
    };
    let mut pairs = BTreeSet::new();
    for x in 0..t.len() {
        for y in 0..t.len() {
            let side = match (part(x), part(y)) {
                (None, None) => None,
                (Some(a), None) | (None, Some(a)) => Some(a),
                (Some(a), Some(b)) if a == b => Some(a),
                _ => continue,
            };
            let keep = match side {
                None => rel1.contains(0, 0) || rel2.contains(0, 0),
                Some(0) => rel1.contains(joint.phi1.apply(x), joint.phi1.apply(y)),
                Some(_) => rel2.contains(joint.phi2.apply(x), joint.phi2.apply(y)),
            };
            if keep {
                pairs.insert((x, y));
            }
        }
    }
    Ok(FPlusJoint {
        rel: SRelation { fan: t, pairs },
        phi1: joint.phi1,
        phi2: joint.phi2,
    })
}
