//! The envelope `(S_n, g_n) ⊇ (T_n, f_n)` whose branches map onto branches.
//!
//! `S_{n+1}` keeps the branches of `T_{n+1}` in order and prolongs each one
//! past its endpoint `e` by a doubled copy of the part of `S_n` above
//! `f_n(e)`. Branches of `S_n` meeting `T_n` only at the root get two fully
//! doubled covering branches. Levels are spiders: branch lengths differ.

use serde::{Deserialize, Serialize};

use super::{branch_images, lonely_in_branch, InverseSequence, Property, Violation};
use crate::morphisms::{map_from_doc, MapDoc, Morphism, MorphismError};
use crate::structures::{Fan, Spider, Structure};

pub type SpiderMorphism = Morphism<Spider, Spider>;
pub type Inclusion = Morphism<Fan, Spider>;

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    levels: Vec<Spider>,
    bonds: Vec<SpiderMorphism>,
    inclusions: Vec<Inclusion>,
    fans: Vec<Fan>,
    tree_bonds: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub depth: usize,
    pub violations: Vec<Violation>,
}

impl EnvelopeReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn include(t: Fan, s: &Spider) -> Inclusion {
    let mut map = vec![0; t.len()];
    if !t.is_point() {
        for i in 0..t.width() {
            for j in 1..=t.height() {
                map[t.node(i, j)] = s.node(i, j);
            }
        }
    }
    Morphism::from_parts(t, s.clone(), map)
}

/// Builds the envelope of a sequence.
pub fn envelope(seq: &InverseSequence) -> Envelope {
    let s0 = Spider::from(*seq.level(0));
    let mut env = Envelope {
        inclusions: vec![include(*seq.level(0), &s0)],
        levels: vec![s0],
        bonds: Vec::new(),
        fans: seq.levels().to_vec(),
        tree_bonds: seq.bonds().iter().map(|f| f.map().to_vec()).collect(),
    };
    for n in 0..seq.depth() {
        env.grow(seq.level(n), seq.level(n + 1), seq.bond(n));
    }
    env
}

impl Envelope {
    fn grow(&mut self, t: &Fan, t_next: &Fan, f: &Morphism<Fan, Fan>) {
        let s = self.levels.last().unwrap().clone();
        let h = t_next.height();
        // (branch of S_n, depth of f_n(e), nodes above it) per branch of T_{n+1}
        let tops: Vec<(usize, usize, usize)> = (0..t_next.width())
            .map(|i| {
                let m = f.apply(t_next.node(i, h));
                let b = t.branch_of(m).unwrap_or(0);
                let dm = t.depth(m);
                (b, dm, s.lengths()[b] - dm)
            })
            .collect();
        let outside: Vec<usize> = (t.width()..s.width()).filter(|&c| s.lengths()[c] > 0).collect();
        let mut lengths: Vec<usize> = tops.iter().map(|&(_, _, above)| h + 2 * above).collect();
        for &c in &outside {
            lengths.extend([2 * s.lengths()[c] + 1; 2]);
        }
        let next = Spider::new(lengths);
        let mut g = vec![0; next.len()];
        for (i, &(b, dm, above)) in tops.iter().enumerate() {
            for j in 1..=h {
                let y = f.apply(t_next.node(i, j));
                g[next.node(i, j)] = match t.branch_of(y) {
                    None => 0,
                    Some(bi) => s.node(bi, t.depth(y)),
                };
            }
            for k in 0..2 * above {
                g[next.node(i, h + 1 + k)] = s.node(b, dm + 1 + k / 2);
            }
        }
        for (k, &c) in outside.iter().enumerate() {
            for copy in 0..2 {
                let i = t_next.width() + 2 * k + copy;
                for j in 1..=next.lengths()[i] {
                    g[next.node(i, j)] = s.node(c, j / 2);
                }
            }
        }
        self.inclusions.push(include(*t_next, &next));
        self.bonds.push(Morphism::from_parts(next.clone(), s, g));
        self.levels.push(next);
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, n: usize) -> &Spider {
        &self.levels[n]
    }

    pub fn levels(&self) -> &[Spider] {
        &self.levels
    }

    /// `g_n: S_{n+1} → S_n`.
    pub fn bond(&self, n: usize) -> &SpiderMorphism {
        &self.bonds[n]
    }

    /// `ι_n: T_n → S_n`.
    pub fn inclusion(&self, n: usize) -> &Inclusion {
        &self.inclusions[n]
    }

    /// The fan `T_n` sitting inside `S_n`.
    pub fn fan(&self, n: usize) -> &Fan {
        &self.fans[n]
    }

    /// `f_n` of the underlying sequence.
    pub fn fan_bond(&self, n: usize) -> &[usize] {
        &self.tree_bonds[n]
    }

    /// `g^n_m: S_n → S_m` as an index vector over `S_n`.
    pub fn composite(&self, n: usize, m: usize) -> Vec<usize> {
        let mut map: Vec<usize> = (0..self.levels[n].len()).collect();
        for k in (m..n).rev() {
            let g = &self.bonds[k];
            for x in map.iter_mut() {
                *x = g.apply(*x);
            }
        }
        map
    }

    /// Replaces a bond; used to exercise the checker.
    pub fn with_bond(mut self, n: usize, map: Vec<usize>) -> Result<Self, MorphismError> {
        let b = &self.bonds[n];
        self.bonds[n] = Morphism::new(b.source().clone(), b.target().clone(), map)?;
        Ok(self)
    }

    /// Checks the restriction identity, the inclusions, and conditions (3),
    /// (4) and (5) at every level.
    pub fn verify(&self) -> EnvelopeReport {
        let mut violations = Vec::new();
        let mut report = |level: usize, property: Property, witness: String| {
            violations.push(Violation {
                level,
                property,
                witness,
            })
        };
        for (n, iota) in self.inclusions.iter().enumerate() {
            let mut seen = vec![false; iota.target().len()];
            let injective = iota.map().iter().all(|&y| !std::mem::replace(&mut seen[y], true));
            if !injective || !iota.is_homomorphism() {
                report(n, Property::Inclusion, format!("inclusion into S_{n} is not an embedding"));
            }
        }
        for (n, g) in self.bonds.iter().enumerate() {
            let (src, tgt) = (g.source(), g.target());
            if !g.is_epimorphism() {
                report(n, Property::Epimorphism, "g is not an epimorphism".into());
            }
            let t_next = &self.fans[n + 1];
            let (up, down) = (&self.inclusions[n + 1], &self.inclusions[n]);
            let f = &self.tree_bonds[n];
            if let Some(x) = (0..t_next.len()).find(|&x| g.apply(up.apply(x)) != down.apply(f[x])) {
                report(n, Property::Restriction, format!("g and f differ at {}", t_next.name(x)));
            }
            let tgt_branches = tgt.branches();
            let mut onto = vec![0usize; tgt.width()];
            for b in src.branches() {
                let nodes = b.nodes();
                if let Some(x) = lonely_in_branch(nodes, &|x| g.apply(x)) {
                    report(n, Property::FiberDoubling, format!("{} in branch {}", src.name(x), src.name(b.leaf())));
                }
                let (full, partial) = branch_images(nodes, &|x| g.apply(x), tgt, &tgt_branches);
                for c in full {
                    onto[c] += 1;
                }
                for c in partial {
                    report(
                        n,
                        Property::BranchImage,
                        format!(
                            "branch {} maps into but not onto branch {}",
                            src.name(b.leaf()),
                            tgt.name(tgt_branches[c].leaf())
                        ),
                    );
                }
            }
            for (c, &k) in onto.iter().enumerate() {
                if k < 2 {
                    report(
                        n,
                        Property::BranchDoubling,
                        format!("branch {} has {k} preimage branches", tgt.name(tgt_branches[c].leaf())),
                    );
                }
            }
        }
        EnvelopeReport {
            depth: self.depth(),
            violations,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct EnvelopeLevelDoc {
    level: usize,
    spider: Spider,
    fan: Fan,
    inclusion: MapDoc,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    bond: Option<MapDoc>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    fan_bond: Option<MapDoc>,
}

impl Serialize for Envelope {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let docs: Vec<EnvelopeLevelDoc> = (0..self.levels.len())
            .map(|n| EnvelopeLevelDoc {
                level: n,
                spider: self.levels[n].clone(),
                fan: self.fans[n],
                inclusion: self.inclusions[n].map_doc(),
                bond: (n > 0).then(|| self.bonds[n - 1].map_doc()),
                fan_bond: (n > 0).then(|| {
                    let (t, tp) = (&self.fans[n], &self.fans[n - 1]);
                    self.tree_bonds[n - 1]
                        .iter()
                        .enumerate()
                        .map(|(x, &y)| (t.name(x), tp.name(y)))
                        .collect()
                }),
            })
            .collect();
        docs.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Envelope {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let docs = Vec::<EnvelopeLevelDoc>::deserialize(d)?;
        if docs.is_empty() {
            return Err(D::Error::custom("an envelope has at least one level"));
        }
        let mut env = Envelope {
            levels: Vec::new(),
            bonds: Vec::new(),
            inclusions: Vec::new(),
            fans: Vec::new(),
            tree_bonds: Vec::new(),
        };
        for (n, doc) in docs.iter().enumerate() {
            env.inclusions
                .push(map_from_doc(doc.fan, doc.spider.clone(), &doc.inclusion).map_err(D::Error::custom)?);
            if n > 0 {
                let bond = doc.bond.as_ref().ok_or_else(|| D::Error::custom("missing bond"))?;
                let g = map_from_doc(doc.spider.clone(), env.levels[n - 1].clone(), bond).map_err(D::Error::custom)?;
                env.bonds.push(g);
                let fb = doc.fan_bond.as_ref().ok_or_else(|| D::Error::custom("missing fan bond"))?;
                let f = map_from_doc(doc.fan, env.fans[n - 1], fb).map_err(D::Error::custom)?;
                env.tree_bonds.push(f.into_map());
            }
            env.levels.push(doc.spider.clone());
            env.fans.push(doc.fan);
        }
        Ok(env)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence::build;

    #[test]
    fn depth_zero_is_the_point() {
        let e = envelope(&build(0, 3));
        assert_eq!(e.levels(), &[Spider::new(vec![0])]);
        assert!(e.verify().passed());
    }

    #[test]
    fn small_envelope_verifies() {
        let seq = build(5, 1);
        let e = envelope(&seq);
        let r = e.verify();
        assert!(r.passed(), "{:?}", r.violations);
        for n in 0..5 {
            assert!(e.level(n + 1).width() >= e.level(n).width());
            assert!(e.level(n + 1).height() >= e.level(n).height());
        }
    }

    #[test]
    fn restriction_identity_pointwise() {
        let seq = build(3, 4);
        let e = envelope(&seq);
        for n in 0..3 {
            let t = seq.level(n + 1);
            for x in 0..t.len() {
                let via_g = e.bond(n).apply(e.inclusion(n + 1).apply(x));
                let via_f = e.inclusion(n).apply(seq.bond(n).apply(x));
                assert_eq!(via_g, via_f);
            }
        }
    }

    #[test]
    fn broken_branch_image_is_reported() {
        let e = envelope(&build(3, 1));
        let g = e.bond(2);
        let s = g.source().clone();
        // shorten the image of the first branch by one node
        let mut map = g.map().to_vec();
        let leaf = s.node(0, s.lengths()[0]);
        let below = map[s.node(0, s.lengths()[0] - 2)];
        map[leaf] = below;
        map[leaf - 1] = below;
        let broken = e.with_bond(2, map).unwrap();
        let r = broken.verify();
        assert!(r.violations.iter().any(|v| v.level == 2));
    }

    #[test]
    fn json_roundtrip() {
        let e = envelope(&build(3, 2));
        let back: Envelope = serde_json::from_str(&serde_json::to_string(&e).unwrap()).unwrap();
        assert_eq!(back, e);
    }
}
