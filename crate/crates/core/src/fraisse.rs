//! Witnesses for the joint projection and amalgamation properties of the
//! family of finite fans, and the extension property of a built sequence.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::morphisms::{enumerate_epis, first_fan_epi, FanMorphism, Morphism, MorphismDoc, MorphismError};
use crate::sequence::InverseSequence;
use crate::structures::{Fan, Structure};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FraisseError {
    #[error("{0} is not an epimorphism")]
    NotEpi(&'static str),
    #[error("the two maps have different codomains")]
    CodomainMismatch,
    #[error("the map does not start at level {0} of the sequence")]
    WrongLevel(usize),
    #[error("no solution up to the built depth {0}")]
    DepthExhausted(usize),
    #[error(transparent)]
    Morphism(#[from] MorphismError),
}

/// A fan with projections onto two fans.
#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub t: Fan,
    pub phi1: FanMorphism,
    pub phi2: FanMorphism,
}

/// Padded identity on the branches `offset..offset + part.width()` of `t`,
/// everything else collapsed to the root.
fn embed_part(t: Fan, part: Fan, offset: usize) -> FanMorphism {
    let mut map = vec![0; t.len()];
    if !part.is_point() {
        for i in 0..part.width() {
            for j in 1..=t.height() {
                map[t.node(offset + i, j)] = part.node(i, j.min(part.height()));
            }
        }
    }
    Morphism::from_parts(t, part, map)
}

/// Both fans glued at the root, branches padded to the larger height.
///
/// Two points give a point. Otherwise every branch of `s1`, then every branch
/// of `s2`, becomes one branch of the result; a point contributes its single
/// degenerate branch.
pub fn jpp(s1: &Fan, s2: &Fan) -> Joint {
    let height = s1.height().max(s2.height());
    let t = Fan::new(height, s1.width() + s2.width());
    Joint {
        t,
        phi1: embed_part(t, *s1, 0),
        phi2: embed_part(t, *s2, s1.width()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Q,
    S,
}

/// One branch of the amalgam: a monotone walk through the pairs of
/// positions `(own depth, partner depth)` with equal images in `P`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Walk {
    pub side: Side,
    pub branch: usize,
    pub partner: usize,
    pub steps: Vec<(usize, usize)>,
}

impl Walk {
    /// Position at depth `j` of the padded branch.
    pub fn at(&self, j: usize) -> (usize, usize) {
        self.steps[j.min(self.steps.len() - 1)]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmalgamWitness {
    pub t: Fan,
    pub psi1: FanMorphism,
    pub psi2: FanMorphism,
    pub walks: Vec<Walk>,
}

#[derive(Serialize, Deserialize)]
struct AmalgamDoc {
    t: Fan,
    psi1: MorphismDoc,
    psi2: MorphismDoc,
    walks: Vec<Walk>,
}

impl Serialize for AmalgamWitness {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        AmalgamDoc {
            t: self.t,
            psi1: self.psi1.to_doc(),
            psi2: self.psi2.to_doc(),
            walks: self.walks.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for AmalgamWitness {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let doc = AmalgamDoc::deserialize(d)?;
        let psi1 = doc.psi1.to_fan_morphism().map_err(serde::de::Error::custom)?;
        let psi2 = doc.psi2.to_fan_morphism().map_err(serde::de::Error::custom)?;
        Ok(Self {
            t: doc.t,
            psi1,
            psi2,
            walks: doc.walks,
        })
    }
}

impl AmalgamWitness {
    /// Both projections are epimorphisms and `φ₁∘ψ₁ = φ₂∘ψ₂`.
    pub fn verify(&self, phi1: &FanMorphism, phi2: &FanMorphism) -> bool {
        self.psi1.source() == &self.t
            && self.psi2.source() == &self.t
            && self.psi1.target() == phi1.source()
            && self.psi2.target() == phi2.source()
            && self.psi1.is_epimorphism()
            && self.psi2.is_epimorphism()
            && (0..self.t.len()).all(|x| phi1.apply(self.psi1.apply(x)) == phi2.apply(self.psi2.apply(x)))
    }
}

/// Image of a branch: `None` if it stays at the root, otherwise the target
/// branch and the largest depth reached.
fn branch_image(phi: &FanMorphism, branch: usize) -> Option<(usize, usize)> {
    let (src, tgt) = (phi.source(), phi.target());
    let top = phi.apply(src.node(branch, src.height()));
    tgt.branch_of(top).map(|b| (b, tgt.depth(top)))
}

/// First branch `c` of `other` whose image contains the image `img`.
fn partner(img: Option<(usize, usize)>, other: &[Option<(usize, usize)>]) -> usize {
    match img {
        None => 0,
        Some((b, d)) => other
            .iter()
            .position(|c| matches!(c, Some((cb, cd)) if *cb == b && *cd >= d))
            .expect("codomain map is onto"),
    }
}

/// Shortest monotone walk from `(0,0)` to the top of the own branch through
/// positions with equal images. Ties go to own-advance, then diagonal, then
/// partner-advance.
fn shortest_walk(own: &[usize], other: &[usize]) -> Vec<(usize, usize)> {
    let (ho, hp) = (own.len() - 1, other.len() - 1);
    let idx = |x: usize, y: usize| x * (hp + 1) + y;
    let mut prev = vec![usize::MAX; (ho + 1) * (hp + 1)];
    prev[0] = 0;
    let mut queue = VecDeque::from([(0usize, 0usize)]);
    while let Some((x, y)) = queue.pop_front() {
        if x == ho {
            let mut path = vec![(x, y)];
            let mut cur = idx(x, y);
            while cur != 0 {
                cur = prev[cur];
                path.push((cur / (hp + 1), cur % (hp + 1)));
            }
            path.reverse();
            return path;
        }
        for (nx, ny) in [(x + 1, y), (x + 1, y + 1), (x, y + 1)] {
            if nx > ho || ny > hp || own[nx] != other[ny] {
                continue;
            }
            let k = idx(nx, ny);
            if prev[k] == usize::MAX {
                prev[k] = idx(x, y);
                queue.push_back((nx, ny));
            }
        }
    }
    unreachable!("a compatible partner branch always admits a walk")
}

fn images_along(phi: &FanMorphism, branch: usize) -> Vec<usize> {
    let src = phi.source();
    (0..=src.height()).map(|j| phi.apply(src.node(branch, j))).collect()
}

/// Amalgam of two epimorphisms `φ₁: Q → P` and `φ₂: S → P`.
///
/// Every branch of `Q` and of `S` is traced by one branch of the result,
/// walking alongside the first compatible branch of the other fan.
pub fn amalgamate(phi1: &FanMorphism, phi2: &FanMorphism) -> Result<AmalgamWitness, FraisseError> {
    if phi1.target() != phi2.target() {
        return Err(FraisseError::CodomainMismatch);
    }
    if !phi1.is_epimorphism() {
        return Err(FraisseError::NotEpi("φ₁"));
    }
    if !phi2.is_epimorphism() {
        return Err(FraisseError::NotEpi("φ₂"));
    }
    let (q, s) = (*phi1.source(), *phi2.source());
    let q_img: Vec<_> = (0..q.width()).map(|b| branch_image(phi1, b)).collect();
    let s_img: Vec<_> = (0..s.width()).map(|b| branch_image(phi2, b)).collect();
    let q_paths: Vec<Vec<usize>> = (0..q.width()).map(|b| images_along(phi1, b)).collect();
    let s_paths: Vec<Vec<usize>> = (0..s.width()).map(|b| images_along(phi2, b)).collect();

    let mut walks = Vec::with_capacity(q.width() + s.width());
    for b in 0..q.width() {
        let c = partner(q_img[b], &s_img);
        walks.push(Walk {
            side: Side::Q,
            branch: b,
            partner: c,
            steps: shortest_walk(&q_paths[b], &s_paths[c]),
        });
    }
    for b in 0..s.width() {
        let c = partner(s_img[b], &q_img);
        walks.push(Walk {
            side: Side::S,
            branch: b,
            partner: c,
            steps: shortest_walk(&s_paths[b], &q_paths[c]),
        });
    }

    let height = walks.iter().map(|w| w.steps.len() - 1).max().unwrap_or(0);
    let t = Fan::new(height, walks.len());
    let mut m1 = vec![0; t.len()];
    let mut m2 = vec![0; t.len()];
    if !t.is_point() {
        for (i, w) in walks.iter().enumerate() {
            for j in 1..=height {
                let (own, other) = w.at(j);
                let (qn, sn) = match w.side {
                    Side::Q => (q.node(w.branch, own), s.node(w.partner, other)),
                    Side::S => (q.node(w.partner, other), s.node(w.branch, own)),
                };
                m1[t.node(i, j)] = qn;
                m2[t.node(i, j)] = sn;
            }
        }
    }
    Ok(AmalgamWitness {
        t,
        psi1: Morphism::from_parts(t, q, m1),
        psi2: Morphism::from_parts(t, s, m2),
        walks,
    })
}

/// Extension property at finite depth.
///
/// Given `φ₁: B → A` and `φ₂: T_m → A`, finds the least `n ≥ m` and the
/// lexicographically first epimorphism `ψ: T_n → B` with
/// `φ₁∘ψ = φ₂∘f^n_m`.
pub fn extend(
    seq: &InverseSequence,
    phi1: &FanMorphism,
    m: usize,
    phi2: &FanMorphism,
) -> Result<(usize, FanMorphism), FraisseError> {
    if m > seq.depth() || phi2.source() != seq.level(m) {
        return Err(FraisseError::WrongLevel(m));
    }
    if phi1.target() != phi2.target() {
        return Err(FraisseError::CodomainMismatch);
    }
    if !phi1.is_epimorphism() {
        return Err(FraisseError::NotEpi("φ₁"));
    }
    if !phi2.is_epimorphism() {
        return Err(FraisseError::NotEpi("φ₂"));
    }
    let b = *phi1.source();
    let mut down: Vec<usize> = phi2.map().to_vec();
    for n in m..=seq.depth() {
        if n > m {
            let f = seq.bond(n - 1);
            down = f.map().iter().map(|&x| down[x]).collect();
        }
        let allowed = |x: usize, y: usize| phi1.apply(y) == down[x];
        if let Some(map) = first_fan_epi(seq.level(n), &b, &allowed) {
            return Ok((n, Morphism::from_parts(*seq.level(n), b, map)));
        }
    }
    Err(FraisseError::DepthExhausted(seq.depth()))
}

/// Counts from [`verify_family`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyReport {
    pub max_height: usize,
    pub max_width: usize,
    pub fans: usize,
    pub jpp_checked: usize,
    pub jpp_failures: Vec<String>,
    pub amalgams_checked: usize,
    pub amalgam_failures: Vec<String>,
}

impl FamilyReport {
    pub fn passed(&self) -> bool {
        self.jpp_failures.is_empty() && self.amalgam_failures.is_empty()
    }
}

/// Checks [`jpp`] on every pair of fans within the bounds and [`amalgamate`]
/// on every pair of epimorphisms `Q → P ← S` between them.
pub fn verify_family(max_height: usize, max_width: usize) -> FamilyReport {
    let mut fans = vec![Fan::point()];
    for h in 1..=max_height {
        for w in 1..=max_width {
            fans.push(Fan::new(h, w));
        }
    }
    let label = |f: &Fan| format!("F({},{})", f.height(), f.width());
    let mut report = FamilyReport {
        max_height,
        max_width,
        fans: fans.len(),
        jpp_checked: 0,
        jpp_failures: Vec::new(),
        amalgams_checked: 0,
        amalgam_failures: Vec::new(),
    };
    for a in &fans {
        for b in &fans {
            let j = jpp(a, b);
            report.jpp_checked += 1;
            let ok = j.phi1.source() == &j.t
                && j.phi2.source() == &j.t
                && j.phi1.target() == a
                && j.phi2.target() == b
                && j.phi1.is_epimorphism()
                && j.phi2.is_epimorphism();
            if !ok {
                report.jpp_failures.push(format!("jpp {} {}", label(a), label(b)));
            }
        }
    }
    let epis: Vec<Vec<Vec<FanMorphism>>> =
        fans.iter().map(|p| fans.iter().map(|q| enumerate_epis(q, p)).collect()).collect();
    for (pi, p) in fans.iter().enumerate() {
        for (qi, q) in fans.iter().enumerate() {
            for (si, s) in fans.iter().enumerate() {
                for (k1, phi1) in epis[pi][qi].iter().enumerate() {
                    for (k2, phi2) in epis[pi][si].iter().enumerate() {
                        report.amalgams_checked += 1;
                        let ok = amalgamate(phi1, phi2).is_ok_and(|w| w.verify(phi1, phi2));
                        if !ok {
                            report.amalgam_failures.push(format!(
                                "amalgam over {}: epi #{k1} from {}, epi #{k2} from {}",
                                label(p),
                                label(q),
                                label(s)
                            ));
                        }
                    }
                }
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fm(s: Fan, t: Fan, map: &[usize]) -> FanMorphism {
        Morphism::new(s, t, map.to_vec()).unwrap()
    }

    fn names(m: &FanMorphism) -> Vec<String> {
        m.map().iter().map(|&y| m.target().name(y)).collect()
    }

    #[test]
    fn jpp_of_two_arcs() {
        let a = Fan::chain(1);
        let j = jpp(&a, &a);
        assert_eq!(j.t, Fan::new(1, 2));
        assert_eq!(j.phi1.map(), &[0, 1, 0]);
        assert_eq!(j.phi2.map(), &[0, 0, 1]);
        assert!(j.phi1.is_epimorphism() && j.phi2.is_epimorphism());
    }

    #[test]
    fn jpp_of_points() {
        let p = Fan::point();
        let j = jpp(&p, &p);
        assert_eq!(j.t, p);
        assert_eq!(j.phi1.map(), &[0]);
    }

    #[test]
    fn jpp_pads_lower_fan() {
        let j = jpp(&Fan::new(1, 2), &Fan::chain(2));
        assert_eq!(j.t, Fan::new(2, 3));
        assert_eq!(names(&j.phi1), ["r", "1:1", "1:1", "2:1", "2:1", "r", "r"]);
        assert_eq!(names(&j.phi2), ["r", "r", "r", "r", "r", "1:1", "1:2"]);
        assert!(j.phi1.is_epimorphism() && j.phi2.is_epimorphism());
    }

    #[test]
    fn amalgam_over_a_point() {
        let a = Fan::chain(1);
        let c = fm(a, Fan::point(), &[0, 0]);
        let w = amalgamate(&c, &c).unwrap();
        assert_eq!(w.t, Fan::new(1, 2));
        assert_eq!(w.walks[0].steps, [(0, 0), (1, 0)]);
        assert_eq!(w.walks[1].steps, [(0, 0), (1, 0)]);
        assert_eq!(w.psi1.map(), &[0, 1, 0]);
        assert_eq!(w.psi2.map(), &[0, 0, 1]);
        assert!(w.verify(&c, &c));
    }

    #[test]
    fn amalgam_of_identities_is_diagonal() {
        let a = Fan::chain(1);
        let id = Morphism::<Fan, Fan>::identity(a);
        let w = amalgamate(&id, &id).unwrap();
        assert_eq!(w.t, Fan::new(1, 2));
        assert!(w.walks.iter().all(|x| x.steps == [(0, 0), (1, 1)]));
        assert!(w.verify(&id, &id));
    }

    #[test]
    fn amalgam_hand_traced_walk() {
        let p = Fan::chain(1);
        let q = Fan::chain(2);
        let phi1 = fm(q, p, &[0, 0, 1]);
        let phi2 = fm(q, p, &[0, 1, 1]);
        let w = amalgamate(&phi1, &phi2).unwrap();
        assert_eq!(w.walks[0].steps, [(0, 0), (1, 0), (2, 1)]);
        let n: Vec<usize> = (0..=2).map(|j| w.t.node(0, j)).collect();
        let psi1: Vec<_> = n.iter().map(|&x| q.name(w.psi1.apply(x))).collect();
        let psi2: Vec<_> = n.iter().map(|&x| q.name(w.psi2.apply(x))).collect();
        assert_eq!(psi1, ["r", "1:1", "1:2"]);
        assert_eq!(psi2, ["r", "r", "1:1"]);
        assert!(w.verify(&phi1, &phi2));
    }

    #[test]
    fn amalgam_rejects_non_epis() {
        let a = Fan::chain(1);
        let c = fm(a, a, &[0, 0]);
        let id = Morphism::<Fan, Fan>::identity(a);
        assert_eq!(amalgamate(&c, &id), Err(FraisseError::NotEpi("φ₁")));
    }

    #[test]
    fn walks_are_bounded_by_branch_sizes() {
        let p = Fan::new(1, 2);
        let q = Fan::new(2, 2);
        let phi1 = fm(q, p, &[0, 1, 1, 0, 2]);
        let phi2 = fm(q, p, &[0, 0, 1, 2, 2]);
        let w = amalgamate(&phi1, &phi2).unwrap();
        for x in &w.walks {
            assert!(x.steps.len() <= 2 * (q.height() + 1));
        }
        assert!(w.verify(&phi1, &phi2));
    }

    #[test]
    fn witness_json_roundtrip() {
        let a = Fan::chain(1);
        let id = Morphism::<Fan, Fan>::identity(a);
        let w = amalgamate(&id, &id).unwrap();
        let back: AmalgamWitness = serde_json::from_str(&serde_json::to_string(&w).unwrap()).unwrap();
        assert_eq!(back, w);
    }
}
