//! Fraïssé sequences of fans and their Cantor-fan envelopes.
//!
//! A build starts from the point and alternates two kinds of demands. A
//! universality demand asks for an epimorphism onto the next fan of a
//! diagonal enumeration. An extension demand `(m, φ₂: T_m → A, φ₁: B → A)`
//! asks for a level `n` and `ψ: T_n → B` with `φ₁∘ψ = φ₂∘f^n_m`. Every step is
//! followed by the doubling cover, which makes each fiber inside a branch have
//! two points and each branch have two preimages.

mod envelope;

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fraisse::{amalgamate, jpp, FraisseError};
use crate::morphisms::{enumerate_epis, fan_map_from_doc, FanMorphism, MapDoc, Morphism, MorphismError};
use crate::structures::{Branch, Fan, Structure};

pub use envelope::{envelope, Envelope, EnvelopeReport};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SequenceError {
    #[error("demand for level {m}: {reason}")]
    BadDemand { m: usize, reason: String },
    #[error("bond {0} does not connect consecutive levels")]
    Shape(usize),
    #[error(transparent)]
    Fraisse(#[from] FraisseError),
    #[error(transparent)]
    Morphism(#[from] MorphismError),
}

/// An extension instance `(m, φ₂: T_m → A, φ₁: B → A)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Demand {
    pub id: usize,
    pub m: usize,
    pub level_map: FanMorphism,
    pub target_map: FanMorphism,
}

/// Record of the demand discharged while building `T_{n+1}`.
#[derive(Debug, Clone, PartialEq)]
pub enum Certificate {
    /// `epi: T_{n+1} → fan`, where `fan` is entry `index` of the diagonal
    /// enumeration.
    Universality { index: usize, fan: Fan, epi: FanMorphism },
    /// `lift: T_{n+1} → B` with `target_map ∘ lift = level_map ∘ f^{n+1}_m`.
    Extension { demand: Demand, lift: FanMorphism },
}

/// Entry `k` of the enumeration of fans other than the point by `h + w`,
/// then by height.
pub fn diagonal_fan(k: usize) -> Fan {
    let mut k = k;
    let mut s = 2;
    loop {
        if k < s - 1 {
            let h = k + 1;
            return Fan::new(h, s - h);
        }
        k -= s - 1;
        s += 1;
    }
}

/// The doubling cover `D(T) → T`: branch `i` becomes branches `2i` and
/// `2i+1` of length `2h+1`, with depth `j` sent to depth `⌊j/2⌋`.
pub fn double(t: Fan) -> FanMorphism {
    let d = Fan::new(2 * t.height() + 1, 2 * t.width());
    let mut map = vec![0; d.len()];
    for i in 0..d.width() {
        for j in 1..=d.height() {
            map[d.node(i, j)] = t.node(i / 2, j / 2);
        }
    }
    Morphism::from_parts(d, t, map)
}

/// An epimorphism `t → f` that needs no new branches, if `t` is tall and
/// wide enough.
fn direct_epi(t: Fan, f: Fan) -> Option<FanMorphism> {
    if f.is_point() {
        return Some(Morphism::to_root(t, f));
    }
    if t.height() < f.height() || t.width() < f.width() {
        return None;
    }
    let mut map = vec![0; t.len()];
    for i in 0..t.width() {
        let b = if i < f.width() { i } else { 0 };
        for j in 1..=t.height() {
            map[t.node(i, j)] = f.node(b, j.min(f.height()));
        }
    }
    Some(Morphism::from_parts(t, f, map))
}

/// Levels `j` for which the build schedules an endpoint demand.
pub const ENDPOINT_LEVELS: std::ops::RangeInclusive<usize> = 1..=2;

/// `E(T) → T`: the branches of `T`, followed by one branch per node `p`
/// strictly between the root and a leaf, running up to `p` and then
/// staying there. Every such `p` is the image of an endpoint of `E(T)`.
pub fn endpoint_cover(t: Fan) -> FanMorphism {
    let h = t.height();
    let extra = t.width() * h.saturating_sub(1);
    let e = Fan::new(h, t.width() + extra);
    let mut map = vec![0; e.len()];
    for i in 0..t.width() {
        for j in 1..=h {
            map[e.node(i, j)] = t.node(i, j);
        }
        for d in 1..h {
            let b = t.width() + i * (h - 1) + d - 1;
            for j in 1..=h {
                map[e.node(b, j)] = t.node(i, j.min(d));
            }
        }
    }
    Morphism::from_parts(e, t, map)
}

fn pull_back(outer: &FanMorphism, inner: &FanMorphism) -> FanMorphism {
    let map = inner.map().iter().map(|&x| outer.apply(x)).collect();
    Morphism::from_parts(*inner.source(), *outer.target(), map)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InverseSequence {
    seed: u64,
    levels: Vec<Fan>,
    bonds: Vec<FanMorphism>,
    certificates: Vec<Certificate>,
    pending: VecDeque<Demand>,
    next_fan: usize,
    next_demand: usize,
}

/// Caller-supplied extension instance for [`build_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct DemandSpec {
    pub m: usize,
    pub level_map: FanMorphism,
    pub target_map: FanMorphism,
}

pub fn build(depth: usize, seed: u64) -> InverseSequence {
    build_with(depth, seed, Vec::new()).expect("the default schedule is well formed")
}

/// Builds `depth` steps, queueing `extra` ahead of the generated demand of
/// their level.
pub fn build_with(depth: usize, seed: u64, extra: Vec<DemandSpec>) -> Result<InverseSequence, SequenceError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seq = InverseSequence {
        seed,
        levels: vec![Fan::point()],
        bonds: Vec::new(),
        certificates: Vec::new(),
        pending: VecDeque::new(),
        next_fan: 0,
        next_demand: 0,
    };
    for n in 0..=depth {
        for spec in extra.iter().filter(|s| s.m == n) {
            seq.push_spec(spec)?;
        }
        if ENDPOINT_LEVELS.contains(&n) {
            let t = seq.levels[n];
            seq.enqueue(n, Morphism::<Fan, Fan>::identity(t), endpoint_cover(t));
        }
        seq.push_generated(n, &mut rng);
        if n < depth {
            seq.step()?;
        }
    }
    Ok(seq)
}

impl InverseSequence {
    /// Assembles a sequence from explicit parts, checking only that bonds
    /// connect consecutive levels. Use [`InverseSequence::verify`] for the rest.
    pub fn from_parts(
        seed: u64,
        levels: Vec<Fan>,
        bonds: Vec<FanMorphism>,
        certificates: Vec<Certificate>,
    ) -> Result<Self, SequenceError> {
        if levels.is_empty() || bonds.len() + 1 != levels.len() {
            return Err(SequenceError::Shape(bonds.len()));
        }
        for (n, f) in bonds.iter().enumerate() {
            if f.source() != &levels[n + 1] || f.target() != &levels[n] {
                return Err(SequenceError::Shape(n));
            }
        }
        Ok(Self {
            seed,
            levels,
            bonds,
            certificates,
            pending: VecDeque::new(),
            next_fan: 0,
            next_demand: 0,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn levels(&self) -> &[Fan] {
        &self.levels
    }

    pub fn level(&self, n: usize) -> &Fan {
        &self.levels[n]
    }

    /// `f_n: T_{n+1} → T_n`.
    pub fn bond(&self, n: usize) -> &FanMorphism {
        &self.bonds[n]
    }

    pub fn bonds(&self) -> &[FanMorphism] {
        &self.bonds
    }

    pub fn certificates(&self) -> &[Certificate] {
        &self.certificates
    }

    /// Demands queued but not yet discharged.
    pub fn pending(&self) -> impl Iterator<Item = &Demand> {
        self.pending.iter()
    }

    /// `f^n_m: T_n → T_m` as an index vector over `T_n`.
    pub fn composite(&self, n: usize, m: usize) -> Vec<usize> {
        assert!(m <= n && n <= self.depth());
        let mut map: Vec<usize> = (0..self.levels[n].len()).collect();
        for k in (m..n).rev() {
            let f = &self.bonds[k];
            for x in map.iter_mut() {
                *x = f.apply(*x);
            }
        }
        map
    }

    /// `φ ∘ f^n_m` for a map `φ` out of `T_m`.
    fn composite_onto(&self, n: usize, m: usize, phi: &FanMorphism) -> FanMorphism {
        let map = self.composite(n, m).into_iter().map(|x| phi.apply(x)).collect();
        Morphism::from_parts(self.levels[n], *phi.target(), map)
    }

    fn push_spec(&mut self, spec: &DemandSpec) -> Result<(), SequenceError> {
        let bad = |reason: &str| SequenceError::BadDemand {
            m: spec.m,
            reason: reason.to_string(),
        };
        if spec.level_map.source() != &self.levels[spec.m] {
            return Err(bad("level map does not start at this level"));
        }
        if spec.level_map.target() != spec.target_map.target() {
            return Err(bad("maps have different codomains"));
        }
        if !spec.level_map.is_epimorphism() || !spec.target_map.is_epimorphism() {
            return Err(bad("maps must be epimorphisms"));
        }
        self.enqueue(spec.m, spec.level_map.clone(), spec.target_map.clone());
        Ok(())
    }

    fn enqueue(&mut self, m: usize, level_map: FanMorphism, target_map: FanMorphism) {
        self.pending.push_back(Demand {
            id: self.next_demand,
            m,
            level_map,
            target_map,
        });
        self.next_demand += 1;
    }

    /// One demand per level: `A` is the point or a fan already certified for
    /// universality, `φ₁: B → A` is drawn from the epimorphisms onto `A` from
    /// fans at most one step taller and wider than `A` (and at least
    /// height 2, width 2).
    fn push_generated(&mut self, m: usize, rng: &mut ChaCha8Rng) {
        let certified: Vec<(usize, &FanMorphism)> = self
            .certificates
            .iter()
            .enumerate()
            .filter_map(|(k, c)| match c {
                Certificate::Universality { epi, .. } => Some((k + 1, epi)),
                _ => None,
            })
            .collect();
        let pick = rng.gen_range(0..=certified.len());
        let level_map = if pick == 0 {
            Morphism::to_root(self.levels[m], Fan::point())
        } else {
            let (j, epi) = certified[pick - 1];
            self.composite_onto(m, j, epi)
        };
        let a = *level_map.target();
        let mut options = Vec::new();
        for h in 1..=a.height().max(1) + 1 {
            for w in 1..=a.width().max(1) + 1 {
                options.extend(enumerate_epis(&Fan::new(h, w), &a));
            }
        }
        let target_map = options.choose(rng).expect("F(h+1, w) always maps onto F(h, w)").clone();
        self.enqueue(m, level_map, target_map);
    }

    fn step(&mut self) -> Result<(), SequenceError> {
        let n = self.depth();
        let t = self.levels[n];
        let demand = if n % 2 == 1 { self.pending.pop_front() } else { None };
        let (psi, cert) = match demand {
            None => {
                let index = self.next_fan;
                self.next_fan += 1;
                let fan = diagonal_fan(index);
                match direct_epi(t, fan) {
                    Some(epi) => (
                        Morphism::<Fan, Fan>::identity(t),
                        Certificate::Universality { index, fan, epi },
                    ),
                    None => {
                        let j = jpp(&t, &fan);
                        (
                            j.phi1,
                            Certificate::Universality {
                                index,
                                fan,
                                epi: j.phi2,
                            },
                        )
                    }
                }
            }
            Some(demand) => {
                let down = self.composite_onto(n, demand.m, &demand.level_map);
                let w = amalgamate(&down, &demand.target_map)?;
                (w.psi1, Certificate::Extension { demand, lift: w.psi2 })
            }
        };
        let d = double(*psi.source());
        let bond = pull_back(&psi, &d);
        let cert = match cert {
            Certificate::Universality { index, fan, epi } => Certificate::Universality {
                index,
                fan,
                epi: pull_back(&epi, &d),
            },
            Certificate::Extension { demand, lift } => Certificate::Extension {
                demand,
                lift: pull_back(&lift, &d),
            },
        };
        self.levels.push(*d.source());
        self.bonds.push(bond);
        self.certificates.push(cert);
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Verification

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Property {
    /// The bond is an epimorphism.
    Epimorphism,
    /// Every point of a branch shares its image with another point of it.
    FiberDoubling,
    /// Every branch is the image of two distinct branches.
    BranchDoubling,
    /// A recorded certificate replays.
    Certificate,
    /// The envelope bond extends the sequence bond.
    Restriction,
    /// The sequence level embeds into the envelope level.
    Inclusion,
    /// A branch mapping into a branch maps onto it.
    BranchImage,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// Index `n` of the bond `f_n: T_{n+1} → T_n` concerned.
    pub level: usize,
    pub property: Property,
    pub witness: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub depth: usize,
    pub bonds_checked: usize,
    pub certificates_checked: usize,
    pub violations: Vec<Violation>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// A node of `branch` whose image under `f` is shared by no other node of
/// the branch.
pub(crate) fn lonely_in_branch(branch: &[usize], f: &dyn Fn(usize) -> usize) -> Option<usize> {
    let mut imgs: Vec<(usize, usize)> = branch.iter().map(|&x| (f(x), x)).collect();
    imgs.sort_unstable();
    (0..imgs.len())
        .find(|&k| {
            let same_prev = k > 0 && imgs[k - 1].0 == imgs[k].0;
            let same_next = k + 1 < imgs.len() && imgs[k + 1].0 == imgs[k].0;
            !same_prev && !same_next
        })
        .map(|k| imgs[k].1)
}

/// True iff `f` maps the node set `branch` onto exactly the node set `onto`.
pub(crate) fn maps_onto(branch: &[usize], f: &dyn Fn(usize) -> usize, onto: &[usize]) -> bool {
    let mut img: Vec<usize> = branch.iter().map(|&x| f(x)).collect();
    img.sort_unstable();
    img.dedup();
    let mut want = onto.to_vec();
    want.sort_unstable();
    img == want
}

/// Splits the target branches containing the image of `branch` into those
/// it maps onto and those it only maps into.
///
/// Branches of a spider share only the root, so the image lies in the one
/// branch owning its non-root points, or in every branch if it is the root.
pub(crate) fn branch_images<T: Structure>(
    branch: &[usize],
    f: &dyn Fn(usize) -> usize,
    tgt: &T,
    tgt_branches: &[Branch],
) -> (Vec<usize>, Vec<usize>) {
    let in_branch = |c: usize, y: usize| tgt_branches[c].nodes().get(tgt.depth(y)) == Some(&y);
    let off_root: Vec<usize> = branch.iter().map(|&x| f(x)).filter(|&y| y != tgt.root()).collect();
    let candidates: Vec<usize> = match off_root.first() {
        None => (0..tgt_branches.len()).collect(),
        Some(&y) => (0..tgt_branches.len())
            .find(|&c| in_branch(c, y))
            .filter(|&c| off_root.iter().all(|&z| in_branch(c, z)))
            .into_iter()
            .collect(),
    };
    candidates
        .into_iter()
        .partition(|&c| maps_onto(branch, f, tgt_branches[c].nodes()))
}
impl InverseSequence {
    /// Checks every bond for the epimorphism, fiber-doubling and
    /// branch-doubling properties and replays every certificate.
    pub fn verify(&self) -> Report {
        let mut violations = Vec::new();
        for (n, f) in self.bonds.iter().enumerate() {
            let (src, tgt) = (f.source(), f.target());
            let status = f.check();
            if !status.epimorphism {
                let witness = if !status.homomorphism {
                    let x = (0..src.len())
                        .find(|&x| src.parent(x).is_some_and(|p| !tgt.related(f.apply(p), f.apply(x))))
                        .unwrap();
                    format!("edge into {} is not preserved", src.name(x))
                } else {
                    let mut hit = vec![false; tgt.len()];
                    f.map().iter().for_each(|&y| hit[y] = true);
                    format!("{} is not hit", tgt.name(hit.iter().position(|h| !h).unwrap()))
                };
                violations.push(Violation {
                    level: n,
                    property: Property::Epimorphism,
                    witness,
                });
            }
            for b in src.branches() {
                if let Some(x) = lonely_in_branch(b.nodes(), &|x| f.apply(x)) {
                    violations.push(Violation {
                        level: n,
                        property: Property::FiberDoubling,
                        witness: format!("{} in branch {}", src.name(x), src.name(b.leaf())),
                    });
                    break;
                }
            }
            let tgt_branches = tgt.branches();
            let mut onto = vec![0usize; tgt_branches.len()];
            for b in src.branches() {
                for c in branch_images(b.nodes(), &|x| f.apply(x), tgt, &tgt_branches).0 {
                    onto[c] += 1;
                }
            }
            for (c, &k) in onto.iter().enumerate() {
                if k < 2 {
                    violations.push(Violation {
                        level: n,
                        property: Property::BranchDoubling,
                        witness: format!(
                            "branch ending at {} has {k} preimage branches",
                            tgt.name(tgt_branches[c].leaf())
                        ),
                    });
                }
            }
        }
        for (n, c) in self.certificates.iter().enumerate() {
            if let Some(reason) = self.replay(n, c) {
                violations.push(Violation {
                    level: n,
                    property: Property::Certificate,
                    witness: reason,
                });
            }
        }
        Report {
            depth: self.depth(),
            bonds_checked: self.bonds.len(),
            certificates_checked: self.certificates.len(),
            violations,
        }
    }

    /// Replays the certificate discharged while building `T_{n+1}`.
    fn replay(&self, n: usize, cert: &Certificate) -> Option<String> {
        if n + 1 > self.depth() {
            return Some("certificate beyond the built depth".into());
        }
        let t = &self.levels[n + 1];
        match cert {
            Certificate::Universality { index, fan, epi } => {
                if diagonal_fan(*index) != *fan {
                    return Some(format!("fan {fan:?} is not entry {index} of the enumeration"));
                }
                if epi.source() != t || epi.target() != fan || !epi.is_epimorphism() {
                    return Some(format!("no epimorphism onto {fan:?}"));
                }
                None
            }
            Certificate::Extension { demand, lift } => {
                let m = demand.m;
                if m > n || demand.level_map.source() != &self.levels[m] {
                    return Some(format!("demand {} does not start at level {m}", demand.id));
                }
                if !demand.level_map.is_epimorphism() || !demand.target_map.is_epimorphism() {
                    return Some(format!("demand {} is not made of epimorphisms", demand.id));
                }
                if lift.source() != t || lift.target() != demand.target_map.source() || !lift.is_epimorphism() {
                    return Some(format!("lift for demand {} is not an epimorphism", demand.id));
                }
                let down = self.composite(n + 1, m);
                let bad = (0..t.len())
                    .find(|&x| demand.target_map.apply(lift.apply(x)) != demand.level_map.apply(down[x]));
                bad.map(|x| format!("demand {} does not commute at {}", demand.id, t.name(x)))
            }
        }
    }
}

// ---------------------------------------------------------------------------
// JSON

#[derive(Serialize, Deserialize)]
struct DemandDoc {
    id: usize,
    m: usize,
    a: Fan,
    b: Fan,
    level_map: MapDoc,
    target_map: MapDoc,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum CertificateDoc {
    Universality { index: usize, fan: Fan, epi: MapDoc },
    Extension { demand: DemandDoc, lift: MapDoc },
}

#[derive(Serialize, Deserialize)]
struct LevelDoc {
    level: usize,
    fan: Fan,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    bond: Option<MapDoc>,
    certificates: Vec<CertificateDoc>,
}

#[derive(Serialize, Deserialize)]
struct SequenceDoc {
    seed: u64,
    depth: usize,
    levels: Vec<LevelDoc>,
    pending: Vec<DemandDoc>,
    next_fan: usize,
    next_demand: usize,
}

impl DemandDoc {
    fn from_demand(d: &Demand) -> Self {
        Self {
            id: d.id,
            m: d.m,
            a: *d.target_map.target(),
            b: *d.target_map.source(),
            level_map: d.level_map.map_doc(),
            target_map: d.target_map.map_doc(),
        }
    }

    fn to_demand(&self, levels: &[Fan]) -> Result<Demand, MorphismError> {
        let tm = *levels.get(self.m).ok_or(MorphismError::DomainMismatch)?;
        Ok(Demand {
            id: self.id,
            m: self.m,
            level_map: fan_map_from_doc(tm, self.a, &self.level_map)?,
            target_map: fan_map_from_doc(self.b, self.a, &self.target_map)?,
        })
    }
}

impl Serialize for InverseSequence {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let levels = self
            .levels
            .iter()
            .enumerate()
            .map(|(n, &fan)| LevelDoc {
                level: n,
                fan,
                bond: (n > 0).then(|| self.bonds[n - 1].map_doc()),
                certificates: match n.checked_sub(1).and_then(|k| self.certificates.get(k)) {
                    None => Vec::new(),
                    Some(Certificate::Universality { index, fan, epi }) => vec![CertificateDoc::Universality {
                        index: *index,
                        fan: *fan,
                        epi: epi.map_doc(),
                    }],
                    Some(Certificate::Extension { demand, lift }) => vec![CertificateDoc::Extension {
                        demand: DemandDoc::from_demand(demand),
                        lift: lift.map_doc(),
                    }],
                },
            })
            .collect();
        SequenceDoc {
            seed: self.seed,
            depth: self.depth(),
            levels,
            pending: self.pending.iter().map(DemandDoc::from_demand).collect(),
            next_fan: self.next_fan,
            next_demand: self.next_demand,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for InverseSequence {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let doc = SequenceDoc::deserialize(d)?;
        let levels: Vec<Fan> = doc.levels.iter().map(|l| l.fan).collect();
        if levels.is_empty() || doc.depth + 1 != levels.len() {
            return Err(D::Error::custom("depth does not match the number of levels"));
        }
        let mut bonds = Vec::new();
        let mut certificates = Vec::new();
        for (n, l) in doc.levels.iter().enumerate().skip(1) {
            let bond = l.bond.as_ref().ok_or_else(|| D::Error::custom("missing bond"))?;
            bonds.push(fan_map_from_doc(levels[n], levels[n - 1], bond).map_err(D::Error::custom)?);
            for c in &l.certificates {
                certificates.push(match c {
                    CertificateDoc::Universality { index, fan, epi } => Certificate::Universality {
                        index: *index,
                        fan: *fan,
                        epi: fan_map_from_doc(levels[n], *fan, epi).map_err(D::Error::custom)?,
                    },
                    CertificateDoc::Extension { demand, lift } => Certificate::Extension {
                        lift: fan_map_from_doc(levels[n], demand.b, lift).map_err(D::Error::custom)?,
                        demand: demand.to_demand(&levels).map_err(D::Error::custom)?,
                    },
                });
            }
        }
        let pending = doc
            .pending
            .iter()
            .map(|p| p.to_demand(&levels))
            .collect::<Result<_, _>>()
            .map_err(D::Error::custom)?;
        Ok(Self {
            seed: doc.seed,
            levels,
            bonds,
            certificates,
            pending,
            next_fan: doc.next_fan,
            next_demand: doc.next_demand,
        })
    }
}
