//! Coordinates for the envelope inside the planar Cantor fan.
//!
//! A point `(c, y)` of `C × [0,1]` is drawn at `(y·(2c−1), y)`; the apex is
//! `(0,0)`. Each node of `S_n` gets a cell: a Cantor cylinder (the code of its
//! branch) times a vertical interval. Intervals of `S_{n+1}` split the interval
//! of their image equally among the fiber block in chain order, so cells nest
//! exactly.

use std::fmt::Write as _;

use num_rational::Rational64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sequence::Envelope;
use crate::structures::{Fan, Spider, Structure};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GeometryError {
    #[error("level {level} exceeds built depth {depth}")]
    LevelOutOfRange { level: usize, depth: usize },
    #[error("levels must satisfy {0} <= {1}")]
    LevelOrder(usize, usize),
    #[error("cover parameters out of range: n={n} (>= 2), m={m} (>= 1)")]
    CoverRange { n: usize, m: usize },
}

fn check_level(env: &Envelope, level: usize) -> Result<(), GeometryError> {
    if level > env.depth() {
        return Err(GeometryError::LevelOutOfRange { level, depth: env.depth() });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Cantor codes

/// Middle-thirds value of `0.w000…` for a word over `{0,2}`.
pub fn cantor_value(code: &[u8]) -> Rational64 {
    let mut v = Rational64::from_integer(0);
    let mut scale = Rational64::new(1, 3);
    for &d in code {
        v += scale * i64::from(d);
        scale /= 3;
    }
    v
}

/// The digit map `0.a₁a₂… ↦ 0.a'₁a'₂…` with `2 ↦ 1`, as an exact binary value.
pub fn digit_map(code: &[u8]) -> Rational64 {
    let mut v = Rational64::from_integer(0);
    let mut scale = Rational64::new(1, 2);
    for &d in code {
        if d == 2 {
            v += scale;
        }
        scale /= 2;
    }
    v
}

/// Binary digits of the digit map.
pub fn digit_word(code: &[u8]) -> Vec<u8> {
    code.iter().map(|&d| d / 2).collect()
}

/// Parses a word such as `"0202"`; only digits 0 and 2 are accepted.
pub fn parse_code(s: &str) -> Option<Vec<u8>> {
    s.chars()
        .map(|ch| match ch {
            '0' => Some(0),
            '2' => Some(2),
            _ => None,
        })
        .collect()
}

pub fn code_string(code: &[u8]) -> String {
    code.iter().map(|d| char::from(b'0' + d)).collect()
}

fn cylinder(code: &[u8]) -> (f64, f64) {
    let mut lo = 0.0;
    let mut scale = 1.0 / 3.0;
    for &d in code {
        lo += scale * f64::from(d);
        scale /= 3.0;
    }
    (lo, lo + 3.0 * scale)
}

fn sibling_digits(rank: usize, count: usize) -> Vec<u8> {
    let k = usize::BITS - (count.max(1) - 1).leading_zeros();
    (0..k).rev().map(|bit| if rank >> bit & 1 == 1 { 2 } else { 0 }).collect()
}

// ---------------------------------------------------------------------------
// Planar cells

/// A cell `{(y(2c−1), y) : c ∈ [c0,c1], y ∈ [lo,hi]}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trapezoid {
    pub c: (f64, f64),
    pub y: (f64, f64),
}

fn planar(c: f64, y: f64) -> (f64, f64) {
    (y * (2.0 * c - 1.0), y)
}

fn seg_dist(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (qx, qy) = (a.0 + t * dx - p.0, a.1 + t * dy - p.1);
    (qx * qx + qy * qy).sqrt()
}

impl Trapezoid {
    pub fn corners(&self) -> [(f64, f64); 4] {
        let (c0, c1) = self.c;
        let (lo, hi) = self.y;
        [planar(c0, lo), planar(c1, lo), planar(c1, hi), planar(c0, hi)]
    }

    pub fn contains(&self, p: (f64, f64)) -> bool {
        let (x, y) = p;
        if y < self.y.0 || y > self.y.1 {
            return false;
        }
        if y == 0.0 {
            return x == 0.0;
        }
        let c = (x / y + 1.0) / 2.0;
        c >= self.c.0 && c <= self.c.1
    }

    /// Distance from a point to the (convex) cell.
    pub fn dist(&self, p: (f64, f64)) -> f64 {
        if self.contains(p) {
            return 0.0;
        }
        let v = self.corners();
        (0..4).map(|i| seg_dist(p, v[i], v[(i + 1) % 4])).fold(f64::INFINITY, f64::min)
    }

    /// `sup_{z ∈ self} dist(z, other)`, attained at a corner by convexity.
    pub fn excess(&self, other: &Trapezoid) -> f64 {
        self.corners().iter().map(|&z| other.dist(z)).fold(0.0, f64::max)
    }

    pub fn diameter(&self) -> f64 {
        let v = self.corners();
        let mut d: f64 = 0.0;
        for a in &v {
            for b in &v {
                d = d.max(((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt());
            }
        }
        d
    }
}

/// Cells of every node of `S_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellAssignment {
    level: usize,
    spider: Spider,
    // per node; the root holds [0, max root piece]
    intervals: Vec<[f64; 2]>,
    // per branch: the part of the root interval owned by that branch
    root_pieces: Vec<f64>,
    codes: Vec<Vec<u8>>,
    // per branch: its branch in the coarser level
    parents: Vec<usize>,
}

impl CellAssignment {
    fn base(s: &Spider) -> Self {
        assert_eq!(s.len(), 1, "the envelope starts at a point");
        Self {
            level: 0,
            spider: s.clone(),
            intervals: vec![[0.0, 1.0]],
            root_pieces: vec![1.0],
            codes: vec![Vec::new()],
            parents: vec![0],
        }
    }

    fn refine(&self, next: &Spider, g: &[usize]) -> Self {
        let s = &self.spider;
        let mut intervals = vec![[0.0, 0.0]; next.len()];
        let mut root_pieces = vec![0.0; next.width()];
        let mut parents = vec![0; next.width()];
        for b in 0..next.width() {
            let len = next.lengths()[b];
            let leaf_image = g[next.node(b, len)];
            let parent = s.branch_of(leaf_image).unwrap_or(0);
            parents[b] = parent;
            let mut j = 0;
            while j <= len {
                let y = g[next.node(b, j)];
                let mut end = j;
                while end < len && g[next.node(b, end + 1)] == y {
                    end += 1;
                }
                let [lo, hi] = if y == 0 {
                    [0.0, self.root_pieces[parent]]
                } else {
                    self.intervals[y]
                };
                let count = end - j + 1;
                let cut = |k: usize| {
                    if k == 0 {
                        lo
                    } else if k == count {
                        hi
                    } else {
                        (lo + (hi - lo) * k as f64 / count as f64).min(hi)
                    }
                };
                for k in 0..count {
                    let piece = [cut(k), cut(k + 1)];
                    if j + k == 0 {
                        root_pieces[b] = piece[1];
                    } else {
                        intervals[next.node(b, j + k)] = piece;
                    }
                }
                j = end + 1;
            }
        }
        intervals[0] = [0.0, root_pieces.iter().copied().fold(0.0, f64::max)];

        let mut codes = vec![Vec::new(); next.width()];
        let mut siblings: Vec<Vec<usize>> = vec![Vec::new(); s.width()];
        for (b, &p) in parents.iter().enumerate() {
            siblings[p].push(b);
        }
        for (p, group) in siblings.iter().enumerate() {
            for (rank, &b) in group.iter().enumerate() {
                let mut code = self.codes[p].clone();
                code.extend(sibling_digits(rank, group.len()));
                codes[b] = code;
            }
        }
        Self {
            level: self.level + 1,
            spider: next.clone(),
            intervals,
            root_pieces,
            codes,
            parents,
        }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn spider(&self) -> &Spider {
        &self.spider
    }

    pub fn interval(&self, x: usize) -> [f64; 2] {
        self.intervals[x]
    }

    pub fn root_piece(&self, branch: usize) -> f64 {
        self.root_pieces[branch]
    }

    pub fn branch_code(&self, branch: usize) -> &[u8] {
        &self.codes[branch]
    }

    /// Code of a node; empty for the root.
    pub fn code(&self, x: usize) -> &[u8] {
        match self.spider.branch_of(x) {
            None => &[],
            Some(b) => &self.codes[b],
        }
    }

    pub fn cell(&self, x: usize) -> Trapezoid {
        let c = match self.spider.branch_of(x) {
            None => (0.0, 1.0),
            Some(b) => cylinder(&self.codes[b]),
        };
        let [lo, hi] = self.intervals[x];
        Trapezoid { c, y: (lo, hi) }
    }

    /// Planar point of a node: left end of its cylinder at mid-height.
    pub fn point(&self, x: usize) -> (f64, f64) {
        if x == 0 {
            return (0.0, 0.0);
        }
        let [lo, hi] = self.intervals[x];
        planar(self.cell(x).c.0, (lo + hi) / 2.0)
    }

    /// Largest vertical interval, counting each branch's root piece.
    pub fn mesh(&self) -> f64 {
        let pieces = self.root_pieces.iter().copied();
        let spans = self.intervals.iter().skip(1).map(|[lo, hi]| hi - lo);
        pieces.chain(spans).fold(0.0, f64::max)
    }

    /// Largest planar cell diameter.
    pub fn cell_mesh(&self) -> f64 {
        (0..self.spider.len()).map(|x| self.cell(x).diameter()).fold(0.0, f64::max)
    }

    /// Intervals along each branch start at 0, end at 1 and meet end to end.
    pub fn check_tiling(&self) -> Vec<String> {
        let mut out = Vec::new();
        let s = &self.spider;
        for b in 0..s.width() {
            let mut top = self.root_pieces[b];
            for j in 1..=s.lengths()[b] {
                let [lo, hi] = self.intervals[s.node(b, j)];
                if lo != top || hi < lo {
                    out.push(format!("level {}: branch {} breaks at depth {j}", self.level, b + 1));
                    break;
                }
                top = hi;
            }
            if top != 1.0 {
                out.push(format!("level {}: branch {} tops out at {top}", self.level, b + 1));
            }
        }
        out
    }

    /// Every cell of `finer` sits inside the cell of its image under `g`.
    pub fn check_nesting(&self, finer: &CellAssignment, g: &[usize]) -> Vec<String> {
        let mut out = Vec::new();
        for (x, &y) in g.iter().enumerate() {
            let [lo, hi] = finer.intervals[x];
            let [plo, phi] = self.intervals[y];
            let vertical = plo <= lo && hi <= phi;
            let horizontal = y == 0 || finer.code(x).starts_with(self.code(y));
            if !(vertical && horizontal) {
                out.push(format!(
                    "level {}: cell of {} escapes cell of {}",
                    finer.level,
                    finer.spider.name(x),
                    self.spider.name(y)
                ));
            }
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
struct CellDoc {
    node: String,
    code: String,
    interval: [f64; 2],
    point: [f64; 2],
}

#[derive(Serialize, Deserialize)]
pub struct CellsDoc {
    pub level: usize,
    pub spider: Spider,
    cells: Vec<CellDoc>,
}

impl CellAssignment {
    pub fn to_doc(&self) -> CellsDoc {
        let cells = (0..self.spider.len())
            .map(|x| {
                let (px, py) = self.point(x);
                CellDoc {
                    node: self.spider.name(x),
                    code: code_string(self.code(x)),
                    interval: self.intervals[x],
                    point: [px, py],
                }
            })
            .collect();
        CellsDoc { level: self.level, spider: self.spider.clone(), cells }
    }
}

/// Cell assignments for levels `0..=depth`, computed one at a time.
pub fn cell_levels(env: &Envelope) -> impl Iterator<Item = CellAssignment> + '_ {
    let mut current: Option<CellAssignment> = None;
    (0..=env.depth()).map(move |n| {
        let next = match &current {
            None => CellAssignment::base(env.level(0)),
            Some(prev) => prev.refine(env.level(n), env.bond(n - 1).map()),
        };
        current = Some(next.clone());
        next
    })
}

pub fn cells(env: &Envelope, n: usize) -> Result<CellAssignment, GeometryError> {
    check_level(env, n)?;
    Ok(cell_levels(env).nth(n).unwrap())
}

// ---------------------------------------------------------------------------
// Rendering

fn fan_points(env: &Envelope, cells: &CellAssignment) -> Vec<Vec<(f64, f64)>> {
    let t = env.fan(cells.level);
    let iota = env.inclusion(cells.level);
    if t.is_point() {
        return vec![vec![(0.0, 0.0)]];
    }
    (0..t.width())
        .map(|i| (0..=t.height()).map(|j| cells.point(iota.apply(t.node(i, j)))).collect())
        .collect()
}

/// Node points of `T_n`, branch by branch, starting at the apex.
pub fn skeleton(env: &Envelope, n: usize) -> Result<Vec<Vec<(f64, f64)>>, GeometryError> {
    Ok(fan_points(env, &cells(env, n)?))
}

/// SVG of `T_n` in the view box `[−1,1]×[0,1]`, apex at the bottom.
pub fn render(env: &Envelope, n: usize) -> Result<String, GeometryError> {
    let branches = skeleton(env, n)?;
    let stroke = 0.004 / (1.0 + n as f64);
    let mut svg = String::new();
    svg.push_str("<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"-1 0 2 1\" width=\"1000\" height=\"500\">\n");
    let _ = writeln!(svg, "<!-- level {n} -->");
    svg.push_str("<g transform=\"matrix(1 0 0 -1 0 1)\">\n");
    let _ = writeln!(svg, "<g fill=\"none\" stroke=\"black\" stroke-width=\"{stroke:.6}\">");
    if env.fan(n).is_point() {
        svg.push_str("</g>\n");
    } else {
        for branch in &branches {
            svg.push_str("<polyline points=\"");
            for (k, (x, y)) in branch.iter().enumerate() {
                if k > 0 {
                    svg.push(' ');
                }
                let _ = write!(svg, "{x:.6},{y:.6}");
            }
            svg.push_str("\"/>\n");
        }
        svg.push_str("</g>\n");
        let _ = writeln!(svg, "<g fill=\"crimson\">");
        for branch in &branches {
            let (x, y) = branch[branch.len() - 1];
            let _ = writeln!(svg, "<circle cx=\"{x:.6}\" cy=\"{y:.6}\" r=\"{:.6}\"/>", 2.0 * stroke);
        }
        svg.push_str("</g>\n");
    }
    svg.push_str("<circle cx=\"0\" cy=\"0\" r=\"0.008\" fill=\"black\"/>\n");
    svg.push_str("</g>\n</svg>\n");
    Ok(svg)
}

/// Symmetric Hausdorff distance between two finite point sets.
pub fn hausdorff(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let one_way = |p: &[(f64, f64)], q: &[(f64, f64)]| {
        p.iter()
            .map(|u| q.iter().map(|v| (u.0 - v.0).hypot(u.1 - v.1)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    one_way(a, b).max(one_way(b, a))
}

// ---------------------------------------------------------------------------
// Endpoint gap

/// `endpoint_gap(env, n, m)` for every `m` in `n..=depth`, in one pass.
///
/// For a node `x` of `T_n` the candidates are the leaves `e` of `T_m` with
/// `f^m_n(e)` on the branch of `x` off the root (every leaf when `x` is the
/// root); the gap
/// of `x` is the least `sup_{z ∈ cell(e)} dist(z, cell(x))`.
pub fn endpoint_gaps(env: &Envelope, n: usize) -> Result<Vec<f64>, GeometryError> {
    check_level(env, n)?;
    let tn = *env.fan(n);
    let mut base: Vec<(Option<usize>, Trapezoid)> = Vec::new();
    let mut out = Vec::new();
    for cells in cell_levels(env).skip(n) {
        let m = cells.level;
        if m == n {
            let iota = env.inclusion(n);
            base = (0..tn.len()).map(|x| (tn.branch_of(x), cells.cell(iota.apply(x)))).collect();
        }
        let tm = env.fan(m);
        let iota = env.inclusion(m);
        let leaves: Vec<(Option<usize>, Trapezoid)> = (0..tm.width())
            .map(|i| {
                let mut e = if tm.is_point() { 0 } else { tm.node(i, tm.height()) };
                let cell = cells.cell(iota.apply(e));
                for k in (n..m).rev() {
                    e = env.fan_bond(k)[e];
                }
                (tn.branch_of(e), cell)
            })
            .collect();
        let gap = base
            .iter()
            .map(|(bx, cx)| {
                leaves
                    .iter()
                    .filter(|(be, _)| bx.is_none() || be == bx)
                    .map(|(_, ce)| ce.excess(cx))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max);
        out.push(gap);
    }
    Ok(out)
}

pub fn endpoint_gap(env: &Envelope, n: usize, m: usize) -> Result<f64, GeometryError> {
    if n > m {
        return Err(GeometryError::LevelOrder(n, m));
    }
    check_level(env, m)?;
    Ok(endpoint_gaps(env, n)?[m - n])
}

// ---------------------------------------------------------------------------
// Pair survival

/// For each `x ∈ S_m`, the number of `y ≠ x` whose fibers under `g^n_m`
/// contain an `R_S`-related pair. The root's own thread is the thread of
/// roots, so a pair through the root fiber counts only at `r_n` itself.
pub fn pair_survival(env: &Envelope, m: usize, n: usize) -> Result<Vec<usize>, GeometryError> {
    if m > n {
        return Err(GeometryError::LevelOrder(m, n));
    }
    check_level(env, n)?;
    let c = env.composite(n, m);
    let sn = env.level(n);
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for x in 1..sn.len() {
        let p = sn.parent(x).unwrap();
        let (a, b) = (c[p], c[x]);
        if a != b && (a != 0 || p == 0) {
            edges.push((a.min(b), a.max(b)));
        }
    }
    edges.sort_unstable();
    edges.dedup();
    let mut counts = vec![0; env.level(m).len()];
    for (a, b) in edges {
        counts[a] += 1;
        counts[b] += 1;
    }
    Ok(counts)
}

// ---------------------------------------------------------------------------
// The cover of the Cantor fan

mod ratio_str {
    use num_rational::Rational64;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&r.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational64, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `Oᵢ`: an interval of heights, open except where clipped to `[0,1]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeightInterval {
    pub index: usize,
    #[serde(with = "ratio_str")]
    pub lo: Rational64,
    #[serde(with = "ratio_str")]
    pub hi: Rational64,
    pub closed_lo: bool,
    pub closed_hi: bool,
}

impl HeightInterval {
    pub fn contains(&self, y: Rational64) -> bool {
        let above = if self.closed_lo { y >= self.lo } else { y > self.lo };
        let below = if self.closed_hi { y <= self.hi } else { y < self.hi };
        above && below
    }

    pub fn length(&self) -> Rational64 {
        self.hi - self.lo
    }
}

/// `Vⱼ`: a union of consecutive Cantor cylinders.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clopen {
    pub index: usize,
    pub cylinders: Vec<String>,
}

impl Clopen {
    fn words(&self) -> impl Iterator<Item = Vec<u8>> + '_ {
        self.cylinders.iter().map(|w| parse_code(w).expect("cylinder word"))
    }

    fn span(w: &[u8]) -> (Rational64, Rational64) {
        let lo = cantor_value(w);
        (lo, lo + Rational64::new(1, 3i64.pow(w.len() as u32)))
    }

    /// Membership for points of `C`.
    pub fn contains(&self, c: Rational64) -> bool {
        self.words().any(|w| {
            let (lo, hi) = Self::span(&w);
            lo <= c && c <= hi
        })
    }

    pub fn bounds(&self) -> (Rational64, Rational64) {
        let spans: Vec<_> = self.words().map(|w| Self::span(&w)).collect();
        (spans[0].0, spans[spans.len() - 1].1)
    }

    pub fn diameter(&self) -> Rational64 {
        let (lo, hi) = self.bounds();
        hi - lo
    }
}

/// Which region a node of `A` names: `r` is `O₁ × C` (the apex region).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverCell {
    pub node: String,
    pub interval: usize,
    pub clopen: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverStructure {
    pub n_intervals: usize,
    pub m_clopens: usize,
    #[serde(with = "ratio_str")]
    pub epsilon: Rational64,
    pub a: Fan,
    pub intervals: Vec<HeightInterval>,
    pub clopens: Vec<Clopen>,
    pub cells: Vec<CoverCell>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverReport {
    pub samples: usize,
    pub covers: bool,
    pub c1: bool,
    pub c2: bool,
    pub c3: bool,
    pub c4: bool,
    pub violations: Vec<String>,
}

impl CoverReport {
    pub fn passed(&self) -> bool {
        self.covers && self.c1 && self.c2 && self.c3 && self.c4
    }
}

/// The cover `{O} ∪ {Oᵢ × Vⱼ : i = 2..n, j = 1..m}` with `A = F(n−1, m)`;
/// `(i,j)` is node `j:(i−1)` of `A`.
pub fn cover_cantor(n: usize, m: usize) -> Result<CoverStructure, GeometryError> {
    if n < 2 || m < 1 || n > 1000 || m > 1 << 16 {
        return Err(GeometryError::CoverRange { n, m });
    }
    let h = Rational64::new(1, n as i64);
    let quarter = h / 4;
    let zero = Rational64::from_integer(0);
    let one = Rational64::from_integer(1);
    let intervals: Vec<HeightInterval> = (1..=n)
        .map(|i| {
            let lo = h * (i as i64 - 1) - quarter;
            let hi = h * i as i64 + quarter;
            HeightInterval {
                index: i,
                lo: lo.max(zero),
                hi: hi.min(one),
                closed_lo: lo < zero,
                closed_hi: hi > one,
            }
        })
        .collect();

    let k = usize::BITS - (m - 1).leading_zeros();
    let total = 1usize << k;
    let (q, extra) = (total / m, total % m);
    let mut next = 0;
    let clopens: Vec<Clopen> = (1..=m)
        .map(|j| {
            let size = q + usize::from(j <= extra);
            let cylinders = (next..next + size)
                .map(|w| code_string(&sibling_digits(w, total)))
                .collect();
            next += size;
            Clopen { index: j, cylinders }
        })
        .collect();

    let widest = intervals
        .iter()
        .map(HeightInterval::length)
        .chain(clopens.iter().map(Clopen::diameter))
        .max()
        .unwrap();
    let a = Fan::new(n - 1, m);
    let mut cells = vec![CoverCell { node: "r".into(), interval: 1, clopen: None }];
    cells.resize(a.len(), cells[0].clone());
    for i in 2..=n {
        for j in 1..=m {
            let x = a.node(j - 1, i - 1);
            cells[x] = CoverCell { node: a.name(x), interval: i, clopen: Some(j) };
        }
    }
    Ok(CoverStructure {
        n_intervals: n,
        m_clopens: m,
        epsilon: widest * 4,
        a,
        intervals,
        clopens,
        cells,
    })
}

type Point = Option<(Rational64, Rational64)>; // None is the apex

impl CoverStructure {
    fn region_contains(&self, a: usize, p: Point) -> bool {
        let cell = &self.cells[a];
        let o = &self.intervals[cell.interval - 1];
        match p {
            None => o.contains(Rational64::from_integer(0)),
            Some((c, y)) => o.contains(y) && cell.clopen.is_none_or(|j| self.clopens[j - 1].contains(c)),
        }
    }

    fn sample(&self) -> Vec<Point> {
        let mut ys: Vec<Rational64> = vec![Rational64::from_integer(0), Rational64::from_integer(1)];
        for o in &self.intervals {
            ys.extend([o.lo, o.hi]);
        }
        ys.sort();
        ys.dedup();
        let mids: Vec<Rational64> = ys.windows(2).map(|w| (w[0] + w[1]) / 2).collect();
        ys.extend(mids);
        ys.sort();
        let depth = self.clopens[0].cylinders[0].len() + 1;
        let width = Rational64::new(1, 3i64.pow(depth as u32));
        let mut cs = Vec::new();
        for w in 0..1usize << depth {
            let lo = cantor_value(&sibling_digits(w, 1 << depth));
            cs.extend([lo, lo + width]);
        }
        let mut out = vec![None];
        for &y in ys.iter().filter(|y| **y > Rational64::from_integer(0)) {
            out.extend(cs.iter().map(|&c| Some((c, y))));
        }
        out
    }

    fn closure_corners(&self, a: usize) -> Vec<(Rational64, Rational64)> {
        let cell = &self.cells[a];
        let o = &self.intervals[cell.interval - 1];
        let (c0, c1) = match cell.clopen {
            None => (Rational64::from_integer(0), Rational64::from_integer(1)),
            Some(j) => self.clopens[j - 1].bounds(),
        };
        let two = Rational64::from_integer(2);
        let mut out = Vec::new();
        for y in [o.lo, o.hi] {
            for c in [c0, c1] {
                out.push((y * (two * c - 1), y));
            }
        }
        out
    }

    /// Checks (C1)–(C4) and that the regions cover the sampled model.
    pub fn verify(&self) -> CoverReport {
        let a = &self.a;
        let mut violations = Vec::new();

        let eps2 = self.epsilon * self.epsilon;
        let mut c1 = true;
        for x in 0..a.len() {
            let v = self.closure_corners(x);
            let diam2 = v
                .iter()
                .flat_map(|p| v.iter().map(move |q| (p.0 - q.0) * (p.0 - q.0) + (p.1 - q.1) * (p.1 - q.1)))
                .max()
                .unwrap();
            if diam2 >= eps2 {
                c1 = false;
                violations.push(format!("C1: diam(U_{}) >= epsilon", a.name(x)));
            }
        }

        let points = self.sample();
        let members: Vec<Vec<usize>> = points
            .iter()
            .map(|&p| (0..a.len()).filter(|&x| self.region_contains(x, p)).collect())
            .collect();
        let covers = members.iter().all(|s| !s.is_empty());
        if !covers {
            violations.push("some sample point lies in no region".into());
        }

        let mut c2 = true;
        for (x, y) in (0..a.len()).flat_map(|x| (0..a.len()).map(move |y| (x, y))) {
            if x == y || a.related_sym(x, y) {
                continue;
            }
            let (cx, cy) = (&self.cells[x], &self.cells[y]);
            let (ox, oy) = (&self.intervals[cx.interval - 1], &self.intervals[cy.interval - 1]);
            let heights_meet = ox.lo.max(oy.lo) < ox.hi.min(oy.hi) || (ox.closed_lo && oy.closed_lo);
            let columns_meet = match (cx.clopen, cy.clopen) {
                (Some(i), Some(j)) => i == j,
                _ => true,
            };
            let sampled = members.iter().any(|s| s.contains(&x) && s.contains(&y));
            if (heights_meet && columns_meet) || sampled {
                c2 = false;
                violations.push(format!("C2: U_{} meets U_{}", a.name(x), a.name(y)));
            }
        }

        let mut c3 = true;
        for (pi, &p) in points.iter().enumerate() {
            let Some((c, yx)) = p else { continue };
            let below = points.iter().enumerate().filter(|(_, q)| match q {
                None => true,
                Some((c2, y2)) => *c2 == c && *y2 <= yx,
            });
            for (qi, _) in below {
                for &ra in &members[qi] {
                    for &rb in &members[pi] {
                        if ra == rb || Structure::le(a, ra, rb) {
                            continue;
                        }
                        let both = members[pi].contains(&ra) && members[qi].contains(&rb);
                        if !both {
                            c3 = false;
                            violations.push(format!("C3: {} then {} along a segment", a.name(ra), a.name(rb)));
                        }
                    }
                }
            }
        }

        let mut c4 = true;
        for x in 0..a.len() {
            if !members.iter().any(|s| s == &[x]) {
                c4 = false;
                violations.push(format!("C4: U_{} has no private point", a.name(x)));
            }
        }
        violations.sort();
        violations.dedup();
        CoverReport { samples: points.len(), covers, c1, c2, c3, c4, violations }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence::{build, envelope};

    #[test]
    fn digit_map_example() {
        let code = parse_code("202").unwrap();
        assert_eq!(digit_map(&code), Rational64::new(5, 8));
        assert_eq!(digit_word(&code), vec![1, 0, 1]);
        assert_eq!(cantor_value(&code), Rational64::new(2 * 9 + 2, 27));
        assert_eq!(parse_code("21"), None);
    }

    #[test]
    fn sibling_digits_are_distinct_and_short() {
        assert!(sibling_digits(0, 1).is_empty());
        assert_eq!(sibling_digits(1, 2), vec![2]);
        assert_eq!(sibling_digits(2, 3), vec![2, 0]);
        let words: Vec<_> = (0..5).map(|r| sibling_digits(r, 5)).collect();
        assert!(words.windows(2).all(|w| w[0] < w[1]));
        assert!(words.iter().all(|w| w.len() == 3));
    }

    #[test]
    fn trapezoid_distance() {
        let t = Trapezoid { c: (0.0, 1.0), y: (0.5, 1.0) };
        assert_eq!(t.dist((0.0, 0.75)), 0.0);
        assert!((t.dist((0.0, 0.25)) - 0.25).abs() < 1e-12);
        let u = Trapezoid { c: (0.0, 1.0), y: (0.0, 0.25) };
        assert!((u.excess(&t) - 0.5).abs() < 1e-12);
        assert_eq!(t.excess(&t), 0.0);
    }

    #[test]
    fn root_sits_at_apex() {
        let env = envelope(&build(3, 0));
        for c in cell_levels(&env) {
            assert_eq!(c.point(0), (0.0, 0.0));
            assert_eq!(c.interval(0)[0], 0.0);
        }
    }

    #[test]
    fn cells_nest_tile_and_shrink() {
        let env = envelope(&build(5, 0));
        let levels: Vec<_> = cell_levels(&env).collect();
        for (n, c) in levels.iter().enumerate() {
            assert!(c.check_tiling().is_empty(), "{:?}", c.check_tiling());
            assert!(c.mesh() <= 0.5f64.powi(n as i32));
            if n > 0 {
                let v = levels[n - 1].check_nesting(c, env.bond(n - 1).map());
                assert!(v.is_empty(), "{v:?}");
            }
        }
    }

    #[test]
    fn gap_zero_on_leaves_at_same_level() {
        let env = envelope(&build(3, 0));
        let gaps = endpoint_gaps(&env, 3).unwrap();
        assert!(gaps[0] <= 2.0);
        let c = cells(&env, 3).unwrap();
        let t = env.fan(3);
        let leaf = c.cell(env.inclusion(3).apply(t.node(0, t.height())));
        assert_eq!(leaf.excess(&leaf), 0.0);
        assert!(endpoint_gap(&env, 3, 2).is_err());
        assert!(endpoint_gap(&env, 0, 4).is_err());
    }

    #[test]
    fn render_point() {
        let env = envelope(&build(0, 0));
        let svg = render(&env, 0).unwrap();
        assert!(!svg.contains("polyline"));
        assert_eq!(svg.matches("<circle").count(), 1);
    }

    #[test]
    fn pair_survival_at_same_level_is_degree() {
        let env = envelope(&build(3, 0));
        let s = env.level(2);
        let counts = pair_survival(&env, 2, 2).unwrap();
        for x in 0..s.len() {
            let deg = (0..s.len()).filter(|&y| y != x && s.related_sym(x, y)).count();
            assert_eq!(counts[x], deg);
        }
    }

    #[test]
    fn cover_small_case() {
        let cover = cover_cantor(3, 2).unwrap();
        assert_eq!(cover.a.len(), 5);
        let report = cover.verify();
        assert!(report.passed(), "{:?}", report.violations);
        assert!(cover_cantor(1, 2).is_err());
        assert!(cover_cantor(3, 0).is_err());
    }

    #[test]
    fn cover_json_roundtrip() {
        let cover = cover_cantor(4, 3).unwrap();
        let json = serde_json::to_string(&cover).unwrap();
        assert!(json.contains("\"epsilon\":\""));
        let back: CoverStructure = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cover);
    }
}
