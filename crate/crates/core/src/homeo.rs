//! Factorizing a level map into small steps.
//!
//! Given epimorphisms `β₀, β: T → S` the chain `β₀, β₁, …, βₙ = β` moves one
//! branch of `T` at a time: first down to the root one `R`-step per stage,
//! then up along its final image. Consecutive stages differ by at most one
//! `R`-step at every node.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::CellAssignment;
use crate::morphisms::{fan_map_from_doc, FanMorphism, MapDoc, Morphism, MorphismError};
use crate::structures::{Fan, Structure};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HomeoError {
    #[error("{0} is not an epimorphism")]
    NotEpi(&'static str),
    #[error("maps do not share domain and codomain")]
    Mismatch,
    #[error("branch {branch} of the base has only {count} onto branches under β₀, needs {needed}")]
    NotStar { branch: usize, count: usize, needed: usize },
    #[error("no branch enumeration sends a distinct branch of the carrier onto each base branch")]
    NotOnto,
    #[error(transparent)]
    Morphism(#[from] MorphismError),
}

/// The base branch that `f` maps carrier branch `i` onto, if any.
fn onto_branch(f: &FanMorphism, i: usize) -> Option<usize> {
    let (t, s) = (f.source(), f.target());
    if s.is_point() {
        return Some(0);
    }
    if t.is_point() {
        return None;
    }
    let y = f.apply(t.node(i, t.height()));
    let c = s.branch_of(y)?;
    (s.depth(y) == s.height()).then_some(c)
}

fn branch_count(f: &Fan) -> usize {
    f.width()
}

/// Number of carrier branches mapped onto each base branch.
fn onto_counts(f: &FanMorphism) -> Vec<usize> {
    let mut counts = vec![0; branch_count(f.target())];
    for i in 0..branch_count(f.source()) {
        if let Some(c) = onto_branch(f, i) {
            counts[c] += 1;
        }
    }
    counts
}

/// Copies carrier branches until every base branch has `k + 1` branches
/// mapping onto it. Returns `(T', lift: T' → T, β₀ ∘ lift)`.
pub fn ensure_star(beta0: &FanMorphism, k: usize) -> Result<(Fan, FanMorphism, FanMorphism), HomeoError> {
    if !beta0.is_epimorphism() {
        return Err(HomeoError::NotEpi("β₀"));
    }
    let t = *beta0.source();
    let counts = onto_counts(beta0);
    let mut copies = Vec::new();
    if !t.is_point() {
        for (c, &count) in counts.iter().enumerate() {
            if count <= k {
                let b = (0..t.width()).find(|&i| onto_branch(beta0, i) == Some(c)).unwrap();
                copies.extend(std::iter::repeat_n(b, k + 1 - count));
            }
        }
    }
    if copies.is_empty() {
        return Ok((t, FanMorphism::identity(t), beta0.clone()));
    }
    let big = Fan::new(t.height(), t.width() + copies.len());
    let mut lift = vec![0; big.len()];
    for i in 0..big.width() {
        let src = if i < t.width() { i } else { copies[i - t.width()] };
        for j in 1..=t.height() {
            lift[big.node(i, j)] = t.node(src, j);
        }
    }
    let lift = Morphism::new(big, t, lift)?;
    let lifted = beta0.after(&lift)?;
    Ok((big, lift, lifted))
}

/// `β` and `β'` differ by at most one `R`-step at every node.
pub fn adjacent(a: &FanMorphism, b: &FanMorphism) -> Result<bool, HomeoError> {
    if a.source() != b.source() || a.target() != b.target() {
        return Err(HomeoError::Mismatch);
    }
    let s = a.target();
    Ok(a.map().iter().zip(b.map()).all(|(&x, &y)| s.related_sym(x, y)))
}

/// Lexicographically first injective choice of carrier branches `d₁…d_k`
/// with `β` onto base branch `cᵢ` along `dᵢ`.
fn enumeration(beta: &FanMorphism) -> Option<Vec<usize>> {
    let k = branch_count(beta.target());
    let onto: Vec<Option<usize>> = (0..branch_count(beta.source())).map(|i| onto_branch(beta, i)).collect();
    fn assign(c: usize, k: usize, onto: &[Option<usize>], used: &mut Vec<bool>, out: &mut Vec<usize>) -> bool {
        if c == k {
            return true;
        }
        for d in 0..onto.len() {
            if !used[d] && onto[d] == Some(c) {
                used[d] = true;
                out.push(d);
                if assign(c + 1, k, onto, used, out) {
                    return true;
                }
                out.pop();
                used[d] = false;
            }
        }
        false
    }
    let mut used = vec![false; onto.len()];
    let mut out = Vec::new();
    if !assign(0, k, &onto, &mut used, &mut out) {
        return None;
    }
    out.extend((0..onto.len()).filter(|&d| !used[d]));
    Some(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactorChain {
    base: Fan,
    carrier: Fan,
    enumeration: Vec<usize>,
    steps: Vec<Vec<usize>>,
}

/// Outcome of [`FactorChain::verify`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainReport {
    pub length: usize,
    pub bound: usize,
    pub starts_at_beta0: bool,
    pub ends_at_beta: bool,
    pub all_epimorphisms: bool,
    pub all_adjacent: bool,
}

impl ChainReport {
    pub fn passed(&self) -> bool {
        self.starts_at_beta0 && self.ends_at_beta && self.all_epimorphisms && self.all_adjacent && self.length <= self.bound
    }
}

/// Sweeps the carrier's branches: each goes down to the root, then up to its
/// image under `β`. Requires (*) for `β₀` (see [`ensure_star`]).
pub fn factorize(beta0: &FanMorphism, beta: &FanMorphism) -> Result<FactorChain, HomeoError> {
    if beta0.source() != beta.source() || beta0.target() != beta.target() {
        return Err(HomeoError::Mismatch);
    }
    if !beta0.is_epimorphism() {
        return Err(HomeoError::NotEpi("β₀"));
    }
    if !beta.is_epimorphism() {
        return Err(HomeoError::NotEpi("β"));
    }
    let (t, s) = (*beta.source(), *beta.target());
    let mut steps = vec![beta0.map().to_vec()];
    if s.is_point() || t.is_point() {
        return Ok(FactorChain { base: s, carrier: t, enumeration: vec![0], steps });
    }
    let k = s.width();
    for (c, &count) in onto_counts(beta0).iter().enumerate() {
        if count <= k {
            return Err(HomeoError::NotStar { branch: c + 1, count, needed: k + 1 });
        }
    }
    let order = enumeration(beta).ok_or(HomeoError::NotOnto)?;
    let mut cur = beta0.map().to_vec();
    for &d in &order {
        let nodes: Vec<usize> = (1..=t.height()).map(|j| t.node(d, j)).collect();
        let top = nodes.iter().map(|&x| cur[x]).max_by_key(|&y| s.depth(y)).unwrap();
        if let Some(c) = s.branch_of(top) {
            for level in (1..=s.depth(top)).rev() {
                for &x in &nodes {
                    if s.depth(cur[x]) == level {
                        cur[x] = s.node(c, level - 1);
                    }
                }
                steps.push(cur.clone());
            }
        }
        let goal = nodes.iter().map(|&x| beta.apply(x)).max_by_key(|&y| s.depth(y)).unwrap();
        if let Some(c) = s.branch_of(goal) {
            for i in 1..=s.depth(goal) {
                for &x in &nodes {
                    if s.depth(beta.apply(x)) >= i {
                        cur[x] = s.node(c, i);
                    }
                }
                steps.push(cur.clone());
            }
        }
    }
    Ok(FactorChain { base: s, carrier: t, enumeration: order, steps })
}

impl FactorChain {
    pub fn base(&self) -> &Fan {
        &self.base
    }

    pub fn carrier(&self) -> &Fan {
        &self.carrier
    }

    /// Carrier branches in sweep order (0-based).
    pub fn enumeration(&self) -> &[usize] {
        &self.enumeration
    }

    /// Number of moves `n`; the chain has `n + 1` stages.
    pub fn len(&self) -> usize {
        self.steps.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn steps(&self) -> &[Vec<usize>] {
        &self.steps
    }

    pub fn step(&self, i: usize) -> FanMorphism {
        Morphism::new(self.carrier, self.base, self.steps[i].clone()).expect("stage maps stay in range")
    }

    /// `2·height(S)·|B(T)|`.
    pub fn bound(&self) -> usize {
        2 * self.base.height() * branch_count(&self.carrier)
    }

    pub fn verify(&self, beta0: &FanMorphism, beta: &FanMorphism) -> ChainReport {
        let stages: Vec<FanMorphism> = (0..self.steps.len()).map(|i| self.step(i)).collect();
        ChainReport {
            length: self.len(),
            bound: self.bound(),
            starts_at_beta0: stages[0] == *beta0,
            ends_at_beta: stages[stages.len() - 1] == *beta,
            all_epimorphisms: stages.iter().all(FanMorphism::is_epimorphism),
            all_adjacent: stages.windows(2).all(|w| adjacent(&w[0], &w[1]).unwrap_or(false)),
        }
    }

    /// Largest planar diameter of `cell(βᵢ t) ∪ cell(βᵢ₊₁ t)` and twice the
    /// largest cell of the base, with the base placed by `embed` into the
    /// level of `cells`.
    pub fn displacement(&self, cells: &CellAssignment, embed: &[usize]) -> (f64, f64) {
        let corners: Vec<[(f64, f64); 4]> = embed.iter().map(|&x| cells.cell(x).corners()).collect();
        let diam = |a: &[(f64, f64)], b: &[(f64, f64)]| {
            let mut d: f64 = 0.0;
            for p in a.iter().chain(b) {
                for q in a.iter().chain(b) {
                    d = d.max((p.0 - q.0).hypot(p.1 - q.1));
                }
            }
            d
        };
        let widest = corners.iter().map(|c| diam(c, c)).fold(0.0, f64::max);
        let mut moved: f64 = 0.0;
        for w in self.steps.windows(2) {
            for (&x, &y) in w[0].iter().zip(&w[1]) {
                if x != y {
                    moved = moved.max(diam(&corners[x], &corners[y]));
                }
            }
        }
        (moved, 2.0 * widest)
    }
}

#[derive(Serialize, Deserialize)]
struct ChainDoc {
    base: Fan,
    carrier: Fan,
    enumeration: Vec<usize>,
    steps: Vec<MapDoc>,
}

impl Serialize for FactorChain {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let steps = (0..self.steps.len()).map(|i| self.step(i).map_doc()).collect();
        ChainDoc {
            base: self.base,
            carrier: self.carrier,
            enumeration: self.enumeration.iter().map(|d| d + 1).collect(),
            steps,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for FactorChain {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        let doc = ChainDoc::deserialize(d)?;
        if doc.steps.is_empty() || doc.enumeration.contains(&0) {
            return Err(D::Error::custom("empty chain or 0 in a 1-based enumeration"));
        }
        let steps = doc
            .steps
            .iter()
            .map(|m| fan_map_from_doc(doc.carrier, doc.base, m).map(Morphism::into_map))
            .collect::<Result<_, _>>()
            .map_err(D::Error::custom)?;
        Ok(Self {
            base: doc.base,
            carrier: doc.carrier,
            enumeration: doc.enumeration.iter().map(|e| e - 1).collect(),
            steps,
        })
    }
}

/// Input document for a factorization: `{"beta0": …, "beta": …}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorInput {
    pub beta0: FanMorphism,
    pub beta: FanMorphism,
}

/// Node-by-node description of one stage, for reports.
pub fn describe(f: &FanMorphism) -> BTreeMap<String, String> {
    f.map_doc()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fan_map(t: Fan, s: Fan, images: &[&str]) -> FanMorphism {
        let mut map = vec![0];
        map.extend(images.iter().map(|n| s.index_of(n).unwrap()));
        FanMorphism::new(t, s, map).unwrap()
    }

    #[test]
    fn worked_example() {
        let s = Fan::chain(1);
        let t = Fan::new(1, 3);
        let beta0 = fan_map(t, s, &["1:1", "1:1", "r"]);
        let beta = fan_map(t, s, &["1:1", "r", "1:1"]);
        let chain = factorize(&beta0, &beta).unwrap();
        let expect = [
            ["1:1", "1:1", "r"],
            ["r", "1:1", "r"],
            ["1:1", "1:1", "r"],
            ["1:1", "r", "r"],
            ["1:1", "r", "1:1"],
        ];
        assert_eq!(chain.len(), 4);
        for (i, row) in expect.iter().enumerate() {
            assert_eq!(chain.step(i), fan_map(t, s, row), "stage {i}");
        }
        assert!(chain.verify(&beta0, &beta).passed());
    }

    #[test]
    fn star_already_holds() {
        let s = Fan::chain(1);
        let t = Fan::new(1, 3);
        let beta0 = fan_map(t, s, &["1:1", "1:1", "r"]);
        let (t2, lift, b2) = ensure_star(&beta0, 1).unwrap();
        assert_eq!(t2, t);
        assert_eq!(lift, FanMorphism::identity(t));
        assert_eq!(b2, beta0);
    }

    #[test]
    fn star_duplicates_branches() {
        let s = Fan::new(1, 1);
        let id = FanMorphism::identity(s);
        let (t2, lift, b2) = ensure_star(&id, 1).unwrap();
        assert_eq!(t2, Fan::new(1, 2));
        assert!(lift.is_epimorphism());
        assert_eq!(onto_counts(&b2), vec![2]);
    }

    #[test]
    fn missing_star_is_reported() {
        let s = Fan::new(1, 1);
        let id = FanMorphism::identity(s);
        assert!(matches!(factorize(&id, &id), Err(HomeoError::NotStar { .. })));
    }

    #[test]
    fn adjacency() {
        let s = Fan::chain(2);
        let t = Fan::chain(2);
        let a = fan_map(t, s, &["r", "1:1"]);
        let b = fan_map(t, s, &["1:1", "1:1"]);
        let c = fan_map(t, s, &["1:2", "1:2"]);
        assert!(adjacent(&a, &a).unwrap());
        assert!(adjacent(&a, &b).unwrap());
        assert!(!adjacent(&a, &c).unwrap());
        let other = FanMorphism::to_root(Fan::new(1, 1), s);
        assert_eq!(adjacent(&a, &other), Err(HomeoError::Mismatch));
    }

    #[test]
    fn chain_json_roundtrip() {
        let s = Fan::chain(1);
        let t = Fan::new(1, 3);
        let chain = factorize(&fan_map(t, s, &["1:1", "1:1", "r"]), &fan_map(t, s, &["1:1", "r", "1:1"])).unwrap();
        let json = serde_json::to_string(&chain).unwrap();
        let back: FactorChain = serde_json::from_str(&json).unwrap();
        assert_eq!(back, chain);
    }
}
