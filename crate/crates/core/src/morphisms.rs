//! Homomorphisms and epimorphisms between finite rooted structures.
//!
//! For structures in the language `{R}` a map is an epimorphism iff it is a
//! surjective homomorphism, so [`Morphism::check`] only needs those two tests.

use std::collections::{BTreeMap, HashMap};
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::structures::{fan_cover_map, Fan, Structure, StructureDoc, StructureError, Tree};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MorphismError {
    #[error("map has {got} entries but the source has {expected} nodes")]
    WrongLength { expected: usize, got: usize },
    #[error("image {image} of node {node} is outside the target ({target_len} nodes)")]
    OutOfRange {
        node: usize,
        image: usize,
        target_len: usize,
    },
    #[error("codomain of the inner map differs from the domain of the outer map")]
    DomainMismatch,
    #[error("node `{0}` has no image")]
    Partial(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error(transparent)]
    Structure(#[from] StructureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Status {
    pub homomorphism: bool,
    pub epimorphism: bool,
}

/// A total node map `source -> target`.
#[derive(Debug, Clone)]
pub struct Morphism<S, T> {
    source: S,
    target: T,
    map: Vec<usize>,
    status: OnceLock<Status>,
}

pub type FanMorphism = Morphism<Fan, Fan>;

impl<S: PartialEq, T: PartialEq> PartialEq for Morphism<S, T> {
    fn eq(&self, other: &Self) -> bool {
        self.map == other.map && self.source == other.source && self.target == other.target
    }
}

impl<S: Structure, T: Structure> Morphism<S, T> {
    pub fn new(source: S, target: T, map: Vec<usize>) -> Result<Self, MorphismError> {
        if map.len() != source.len() {
            return Err(MorphismError::WrongLength {
                expected: source.len(),
                got: map.len(),
            });
        }
        if let Some((node, &image)) = map.iter().enumerate().find(|(_, &i)| i >= target.len()) {
            return Err(MorphismError::OutOfRange {
                node,
                image,
                target_len: target.len(),
            });
        }
        Ok(Self::from_parts(source, target, map))
    }

    /// Unchecked constructor for maps produced by this crate.
    pub(crate) fn from_parts(source: S, target: T, map: Vec<usize>) -> Self {
        debug_assert_eq!(map.len(), source.len());
        Self {
            source,
            target,
            map,
            status: OnceLock::new(),
        }
    }

    pub fn identity(s: S) -> Morphism<S, S> {
        let map = (0..s.len()).collect();
        Morphism::from_parts(s.clone(), s, map)
    }

    /// Constant map onto the target root.
    pub fn to_root(source: S, target: T) -> Self {
        let map = vec![target.root(); source.len()];
        Self::from_parts(source, target, map)
    }

    pub fn source(&self) -> &S {
        &self.source
    }

    pub fn target(&self) -> &T {
        &self.target
    }

    pub fn map(&self) -> &[usize] {
        &self.map
    }

    #[inline]
    pub fn apply(&self, node: usize) -> usize {
        self.map[node]
    }

    pub fn into_map(self) -> Vec<usize> {
        self.map
    }

    pub fn is_homomorphism(&self) -> bool {
        (0..self.source.len()).all(|x| match self.source.parent(x) {
            Some(p) => self.target.related(self.map[p], self.map[x]),
            None => true,
        })
    }

    pub fn is_surjective(&self) -> bool {
        let mut hit = vec![false; self.target.len()];
        for &y in &self.map {
            hit[y] = true;
        }
        hit.into_iter().all(|h| h)
    }

    /// Homomorphism / epimorphism status, computed once per value.
    pub fn check(&self) -> Status {
        *self.status.get_or_init(|| {
            let homomorphism = self.is_homomorphism();
            Status {
                homomorphism,
                epimorphism: homomorphism && self.is_surjective(),
            }
        })
    }

    pub fn is_epimorphism(&self) -> bool {
        self.check().epimorphism
    }

    /// `self ∘ inner`.
    pub fn after<A: Structure>(&self, inner: &Morphism<A, S>) -> Result<Morphism<A, T>, MorphismError> {
        compose(self, inner)
    }

    pub fn with_source<S2: Structure>(self, source: S2) -> Result<Morphism<S2, T>, MorphismError> {
        Morphism::new(source, self.target, self.map)
    }

    /// The node table alone, keyed by source id.
    pub fn map_doc(&self) -> MapDoc {
        self.map
            .iter()
            .enumerate()
            .map(|(x, &y)| (self.source.name(x), self.target.name(y)))
            .collect()
    }

    pub fn to_doc(&self) -> MorphismDoc {
        let map = self
            .map
            .iter()
            .enumerate()
            .map(|(x, &y)| (self.source.name(x), self.target.name(y)))
            .collect();
        MorphismDoc {
            source: self.source.to_doc(),
            target: self.target.to_doc(),
            map,
        }
    }
}

/// `outer ∘ inner`.
pub fn compose<A: Structure, B: Structure, C: Structure>(
    outer: &Morphism<B, C>,
    inner: &Morphism<A, B>,
) -> Result<Morphism<A, C>, MorphismError> {
    if inner.target != outer.source {
        return Err(MorphismError::DomainMismatch);
    }
    let map = inner.map.iter().map(|&b| outer.map[b]).collect();
    Ok(Morphism::from_parts(
        inner.source.clone(),
        outer.target.clone(),
        map,
    ))
}

/// The fan cover of a tree as an epimorphism onto it.
pub fn fan_cover(tree: &Tree) -> Morphism<Fan, Tree> {
    let (fan, map) = fan_cover_map(tree);
    Morphism::from_parts(fan, tree.clone(), map)
}

// ---------------------------------------------------------------------------
// JSON

pub type MapDoc = BTreeMap<String, String>;

/// Rebuilds a map between known structures from its node table.
pub fn map_from_doc<S: Structure, T: Structure>(
    source: S,
    target: T,
    doc: &MapDoc,
) -> Result<Morphism<S, T>, MorphismError> {
    let mut map = vec![usize::MAX; source.len()];
    for (x, y) in doc {
        let xi = source.locate(x).ok_or_else(|| MorphismError::UnknownNode(x.clone()))?;
        let yi = target.locate(y).ok_or_else(|| MorphismError::UnknownNode(y.clone()))?;
        map[xi] = yi;
    }
    if let Some(missing) = map.iter().position(|&v| v == usize::MAX) {
        return Err(MorphismError::Partial(source.name(missing)));
    }
    Ok(Morphism::from_parts(source, target, map))
}

pub fn fan_map_from_doc(source: Fan, target: Fan, doc: &MapDoc) -> Result<FanMorphism, MorphismError> {
    map_from_doc(source, target, doc)
}

/// `{"source":...,"target":...,"map":{"r":"r","1:1":"r",...}}`
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MorphismDoc {
    pub source: StructureDoc,
    pub target: StructureDoc,
    pub map: BTreeMap<String, String>,
}

impl MorphismDoc {
    /// Resolves the document into a morphism between canonical fans.
    pub fn to_fan_morphism(&self) -> Result<FanMorphism, MorphismError> {
        let (src, src_names) = Fan::from_doc(&self.source)?;
        let (tgt, tgt_names) = Fan::from_doc(&self.target)?;
        let map = resolve_map(&self.map, &src_names, &tgt_names, src.len())?;
        Morphism::new(src, tgt, map)
    }

    pub fn to_tree_morphism(&self) -> Result<Morphism<Tree, Tree>, MorphismError> {
        let src = Tree::from_doc(&self.source)?;
        let tgt = Tree::from_doc(&self.target)?;
        let index = |t: &Tree| -> HashMap<String, usize> {
            t.names().iter().cloned().enumerate().map(|(i, n)| (n, i)).collect()
        };
        let map = resolve_map(&self.map, &index(&src), &index(&tgt), src.len())?;
        Morphism::new(src, tgt, map)
    }
}

fn resolve_map(
    map: &BTreeMap<String, String>,
    src: &HashMap<String, usize>,
    tgt: &HashMap<String, usize>,
    len: usize,
) -> Result<Vec<usize>, MorphismError> {
    let mut out = vec![usize::MAX; len];
    for (x, y) in map {
        let xi = *src.get(x).ok_or_else(|| MorphismError::UnknownNode(x.clone()))?;
        let yi = *tgt.get(y).ok_or_else(|| MorphismError::UnknownNode(y.clone()))?;
        out[xi] = yi;
    }
    if let Some(missing) = out.iter().position(|&v| v == usize::MAX) {
        let name = src
            .iter()
            .find(|(_, &i)| i == missing)
            .map(|(n, _)| n.clone())
            .unwrap_or_default();
        return Err(MorphismError::Partial(name));
    }
    Ok(out)
}

impl<S: Structure, T: Structure> Serialize for Morphism<S, T> {
    fn serialize<Ser: serde::Serializer>(&self, s: Ser) -> Result<Ser::Ok, Ser::Error> {
        self.to_doc().serialize(s)
    }
}

impl<'de> Deserialize<'de> for FanMorphism {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        MorphismDoc::deserialize(d)?
            .to_fan_morphism()
            .map_err(serde::de::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// Enumeration

/// Backtracking search for epimorphisms `source -> target`.
///
/// Images are assigned root-outward. A child's image must be `R`-related to
/// its parent's image, and the search is cut as soon as the unassigned nodes
/// can no longer cover the uncovered target nodes. The root is sent to the
/// target root: every other node of the source lies above the root, so a
/// homomorphism maps everything into the cone above the root's image.
pub struct EpiSearch<'a, S, T> {
    source: &'a S,
    target: &'a T,
    order: Vec<usize>,
    target_children: Vec<Vec<usize>>,
    allowed: Option<&'a dyn Fn(usize, usize) -> bool>,
}

impl<'a, S: Structure, T: Structure> EpiSearch<'a, S, T> {
    pub fn new(source: &'a S, target: &'a T) -> Self {
        let mut order = Vec::with_capacity(source.len());
        let mut stack = vec![source.root()];
        while let Some(x) = stack.pop() {
            order.push(x);
            for c in source.children(x).into_iter().rev() {
                stack.push(c);
            }
        }
        let target_children = (0..target.len()).map(|t| target.children(t)).collect();
        Self {
            source,
            target,
            order,
            target_children,
            allowed: None,
        }
    }

    /// Restricts the admissible image of each source node.
    pub fn restrict(mut self, allowed: &'a dyn Fn(usize, usize) -> bool) -> Self {
        self.allowed = Some(allowed);
        self
    }

    /// True when the search visits nodes in index order, so the first hit is
    /// the lexicographically least.
    fn index_ordered(&self) -> bool {
        self.order.iter().enumerate().all(|(i, &x)| i == x)
    }

    /// Calls `visit` on every epimorphism found; stops when it returns `false`.
    fn run(&self, visit: &mut dyn FnMut(&[usize]) -> bool) {
        let n = self.source.len();
        let mut map = vec![usize::MAX; n];
        let mut cover = vec![0usize; self.target.len()];
        let mut uncovered = self.target.len();
        self.step(0, &mut map, &mut cover, &mut uncovered, visit);
    }

    fn candidates(&self, x: usize, map: &[usize]) -> Vec<usize> {
        let mut c = match self.source.parent(x) {
            None => vec![self.target.root()],
            Some(p) => {
                let u = map[p];
                let mut v = Vec::with_capacity(1 + self.target_children[u].len());
                v.push(u);
                v.extend_from_slice(&self.target_children[u]);
                v.sort_unstable();
                v
            }
        };
        if let Some(f) = self.allowed {
            c.retain(|&t| f(x, t));
        }
        c
    }

    fn step(
        &self,
        pos: usize,
        map: &mut Vec<usize>,
        cover: &mut Vec<usize>,
        uncovered: &mut usize,
        visit: &mut dyn FnMut(&[usize]) -> bool,
    ) -> bool {
        if pos == self.order.len() {
            return if *uncovered == 0 { visit(map) } else { true };
        }
        let remaining = self.order.len() - pos;
        if remaining < *uncovered {
            return true;
        }
        let x = self.order[pos];
        for t in self.candidates(x, map) {
            map[x] = t;
            cover[t] += 1;
            if cover[t] == 1 {
                *uncovered -= 1;
            }
            let go_on = self.step(pos + 1, map, cover, uncovered, visit);
            cover[t] -= 1;
            if cover[t] == 0 {
                *uncovered += 1;
            }
            if !go_on {
                map[x] = usize::MAX;
                return false;
            }
        }
        map[x] = usize::MAX;
        true
    }

    /// All epimorphisms, lexicographic on the image tuple.
    pub fn all(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        self.run(&mut |m| {
            out.push(m.to_vec());
            true
        });
        if !self.index_ordered() {
            out.sort();
        }
        out
    }

    /// The lexicographically least epimorphism.
    pub fn first(&self) -> Option<Vec<usize>> {
        if !self.index_ordered() {
            return self.all().into_iter().next();
        }
        let mut found = None;
        self.run(&mut |m| {
            found = Some(m.to_vec());
            false
        });
        found
    }

    pub fn count(&self) -> usize {
        let mut n = 0;
        self.run(&mut |_| {
            n += 1;
            true
        });
        n
    }
}

/// Every epimorphism `source -> target`, in canonical order.
pub fn enumerate_epis<S: Structure, T: Structure>(source: &S, target: &T) -> Vec<Morphism<S, T>> {
    EpiSearch::new(source, target)
        .all()
        .into_iter()
        .map(|m| Morphism::from_parts(source.clone(), target.clone(), m))
        .collect()
}

/// Lexicographically least epimorphism between two fans whose node images
/// are restricted by `allowed(source_node, target_node)`.
///
/// Works branch by branch: each source branch is a monotone path in the
/// target, and the target is covered iff every target branch is fully traced
/// by some source path. A suffix Hall-condition check keeps the greedy choice
/// completable, so sources with millions of nodes are fine.
pub fn first_fan_epi(
    source: &Fan,
    target: &Fan,
    allowed: &dyn Fn(usize, usize) -> bool,
) -> Option<Vec<usize>> {
    if !allowed(source.root(), target.root()) {
        return None;
    }
    let mut map = vec![target.root(); source.len()];
    if target.is_point() {
        return (1..source.len()).all(|x| allowed(x, 0)).then_some(map);
    }
    if source.is_point() {
        return None;
    }
    let wt = target.width();
    // bitmask bookkeeping needs a small target
    if wt > 20 || target.len() > 64 {
        return EpiSearch::new(source, target).restrict(allowed).first();
    }
    let (hs, ht) = (source.height(), target.height());
    let tn = target.len();
    let succ: Vec<Vec<usize>> = (0..tn)
        .map(|y| {
            let mut v = vec![y];
            v.extend(target.children(y));
            v
        })
        .collect();
    let leaf_branch = |y: usize| (target.depth(y) == ht).then(|| target.branch_of(y).unwrap());
    let branch_paths = |i: usize| -> (Vec<Vec<u64>>, u64) {
        // reach[j][y]: bitmask of final nodes reachable from state y at depth j
        let mut reach = vec![vec![0u64; tn]; hs + 1];
        for y in 0..tn {
            if allowed(source.node(i, hs), y) {
                reach[hs][y] = 1 << y;
            }
        }
        for j in (0..hs).rev() {
            for y in 0..tn {
                if j > 0 && !allowed(source.node(i, j), y) {
                    continue;
                }
                reach[j][y] = succ[y].iter().fold(0, |m, &z| m | reach[j + 1][z]);
            }
        }
        let finals = reach[0][0];
        let mut covers = 0u64;
        for b in 0..wt {
            if finals >> target.node(b, ht) & 1 == 1 {
                covers |= 1 << b;
            }
        }
        (reach, covers)
    };
    let leaf_mask: u64 = (0..wt).fold(0, |m, b| m | 1 << target.node(b, ht));
    let covers: Vec<u64> = (0..source.width())
        .map(|i| {
            let (reach, c) = branch_paths(i);
            if reach[0][0] == 0 {
                u64::MAX
            } else {
                c
            }
        })
        .collect();
    if covers.contains(&u64::MAX) {
        return None;
    }
    let subsets = 1usize << wt;
    // cnt[X]: remaining source branches able to trace some target branch in X
    let mut cnt = vec![0usize; subsets];
    for &c in &covers {
        for (x, n) in cnt.iter_mut().enumerate() {
            if c & x as u64 != 0 {
                *n += 1;
            }
        }
    }
    let hall = |cnt: &[usize], u: usize| {
        let mut x = u;
        loop {
            if x == 0 {
                return true;
            }
            if cnt[x] < x.count_ones() as usize {
                return false;
            }
            x = (x - 1) & u;
        }
    };
    let mut uncovered = subsets - 1;
    if !hall(&cnt, uncovered) {
        return None;
    }
    for i in 0..source.width() {
        for (x, n) in cnt.iter_mut().enumerate() {
            if covers[i] & x as u64 != 0 {
                *n -= 1;
            }
        }
        let (reach, _) = branch_paths(i);
        let mut best: Option<(Vec<usize>, usize)> = None;
        let mut classes: Vec<u64> = vec![reach[0][0] & !leaf_mask];
        classes.extend((0..wt).map(|b| 1u64 << target.node(b, ht)));
        for class in classes {
            if reach[0][0] & class == 0 {
                continue;
            }
            let mut path = Vec::with_capacity(hs);
            let mut y = 0;
            for j in 1..=hs {
                y = *succ[y].iter().filter(|&&z| reach[j][z] & class != 0).min().unwrap();
                path.push(y);
            }
            let rest = match leaf_branch(y) {
                Some(b) => uncovered & !(1 << b),
                None => uncovered,
            };
            if !hall(&cnt, rest) {
                continue;
            }
            if best.as_ref().is_none_or(|(p, _)| path < *p) {
                best = Some((path, rest));
            }
        }
        let (path, rest) = best?;
        for (j, y) in path.into_iter().enumerate() {
            map[source.node(i, j + 1)] = y;
        }
        uncovered = rest;
    }
    debug_assert_eq!(uncovered, 0);
    Some(map)
}

/// A random epimorphism between fans, drawn branch by branch.
///
/// The first `target.width()` branches of a shuffled source are sent onto
/// distinct target branches; the rest climb a random target branch at random.
/// Returns `None` when the source is lower or narrower than the target.
pub fn random_fan_epi<R: Rng + ?Sized>(source: &Fan, target: &Fan, rng: &mut R) -> Option<FanMorphism> {
    if target.is_point() {
        return Some(Morphism::to_root(*source, *target));
    }
    let (hs, ht) = (source.height(), target.height());
    if source.is_point() || hs < ht || source.width() < target.width() {
        return None;
    }
    let mut order: Vec<usize> = (0..source.width()).collect();
    order.shuffle(rng);
    let mut map = vec![0; source.len()];
    for (k, &i) in order.iter().enumerate() {
        let onto = k < target.width();
        let c = if onto { k } else { rng.gen_range(0..target.width()) };
        let steps: Vec<bool> = if onto {
            let mut up = vec![false; hs];
            for j in rand::seq::index::sample(rng, hs, ht) {
                up[j] = true;
            }
            up
        } else {
            (0..hs).map(|_| rng.gen_bool(0.5)).collect()
        };
        let mut d = 0;
        for (j, &up) in steps.iter().enumerate() {
            if up && d < ht {
                d += 1;
            }
            map[source.node(i, j + 1)] = target.node(c, d);
        }
    }
    Some(Morphism::from_parts(*source, *target, map))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structures::Tree;

    fn names<S: Structure, T: Structure>(m: &Morphism<S, T>) -> Vec<String> {
        m.map().iter().map(|&y| m.target().name(y)).collect()
    }

    #[test]
    fn identity_is_epi() {
        let f = Fan::new(1, 2);
        let id = Morphism::<Fan, Fan>::identity(f);
        assert_eq!(
            id.check(),
            Status {
                homomorphism: true,
                epimorphism: true
            }
        );
    }

    #[test]
    fn constant_to_root_is_not_onto() {
        let f = Fan::new(1, 1);
        let c = Morphism::to_root(f, f);
        assert_eq!(
            c.check(),
            Status {
                homomorphism: true,
                epimorphism: false
            }
        );
    }

    #[test]
    fn chain_collapse_is_epi() {
        let m = Morphism::new(Fan::chain(2), Fan::chain(1), vec![0, 0, 1]).unwrap();
        assert!(m.is_epimorphism());
        // skipping a level is not a homomorphism
        let bad = Morphism::new(Fan::chain(2), Fan::chain(2), vec![0, 2, 2]).unwrap();
        assert!(!bad.check().homomorphism);
    }

    #[test]
    fn malformed_maps_are_rejected() {
        assert!(matches!(
            Morphism::new(Fan::chain(1), Fan::chain(1), vec![0]),
            Err(MorphismError::WrongLength { .. })
        ));
        assert!(matches!(
            Morphism::new(Fan::chain(1), Fan::chain(1), vec![0, 5]),
            Err(MorphismError::OutOfRange { .. })
        ));
    }

    #[test]
    fn composition_of_chain_tower() {
        let c3 = Fan::chain(3);
        let f = Morphism::new(c3, c3, vec![0, 0, 1, 2]).unwrap();
        let g = f.after(&f).unwrap();
        assert_eq!(g.map(), &[0, 0, 0, 1]);
        let id = Morphism::<Fan, Fan>::identity(c3);
        assert_eq!(id.after(&f).unwrap(), f);
        assert_eq!(f.after(&id).unwrap(), f);
        let other = Morphism::<Fan, Fan>::identity(Fan::chain(2));
        assert_eq!(other.after(&f), Err(MorphismError::DomainMismatch));
    }

    #[test]
    fn enumerate_chain_cases() {
        let c1 = Fan::chain(1);
        let c2 = Fan::chain(2);
        assert_eq!(enumerate_epis(&c1, &c1).len(), 1);
        let e = enumerate_epis(&c2, &c1);
        let maps: Vec<Vec<String>> = e.iter().map(names).collect();
        assert_eq!(maps, vec![vec!["r", "r", "1:1"], vec!["r", "1:1", "1:1"]]);
        assert!(enumerate_epis(&c1, &c2).is_empty());
    }

    #[test]
    fn enumerate_on_named_trees_sorts_results() {
        // node order is not root-outward
        let doc = StructureDoc {
            nodes: vec!["b".into(), "r".into(), "a".into()],
            root: "r".into(),
            parent: [("a".to_string(), "r".to_string()), ("b".to_string(), "a".to_string())]
                .into_iter()
                .collect(),
            height: None,
            width: None,
        };
        let t = Tree::from_doc(&doc).unwrap();
        let target = Tree::chain(&["r", "a"]);
        let e = enumerate_epis(&t, &target);
        assert_eq!(e.len(), 2);
        assert!(e[0].map() < e[1].map());
    }

    #[test]
    fn fan_cover_examples_are_epis() {
        let t = Tree::chain(&["r", "a", "b"]);
        let c = fan_cover(&t);
        assert_eq!(*c.source(), Fan::chain(2));
        assert_eq!(c.map(), &[0, 1, 2]);
        assert!(c.is_epimorphism());
    }

    #[test]
    fn doc_roundtrip() {
        let m = Morphism::new(Fan::chain(2), Fan::chain(1), vec![0, 0, 1]).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        let back: FanMorphism = serde_json::from_str(&json).unwrap();
        assert_eq!(m, back);
        assert!(json.contains("\"1:2\":\"1:1\""));
    }

    #[test]
    fn restricted_first_is_lexicographically_least() {
        let s = Fan::new(2, 2);
        let t = Fan::new(1, 2);
        let all = EpiSearch::new(&s, &t).all();
        let first = EpiSearch::new(&s, &t).first().unwrap();
        assert_eq!(first, all[0]);
        let only_second_branch: &dyn Fn(usize, usize) -> bool = &|x, y| x != 4 || y == 2;
        let r = EpiSearch::new(&s, &t).restrict(only_second_branch).all();
        assert!(r.iter().all(|m| m[4] == 2));
    }

    #[test]
    fn fan_epi_search_matches_backtracking() {
        let fans = Fan::all_up_to(7);
        for s in &fans {
            for t in &fans {
                for salt in 0..4usize {
                    let allowed = |x: usize, y: usize| (x * 7 + y * 3 + salt) % 5 != 0 || y == 0;
                    let slow = EpiSearch::new(s, t).restrict(&allowed).first();
                    assert_eq!(first_fan_epi(s, t, &allowed), slow, "{s:?} -> {t:?} salt {salt}");
                }
            }
        }
    }
}
