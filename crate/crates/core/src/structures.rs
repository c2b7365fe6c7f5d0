//! Finite rooted trees, fans and spiders with the edge relation `R`.
//!
//! `R(s, t)` holds iff `s == t` or `t` is an immediate successor of `s`. Every
//! structure here is rooted and `R` is derived from the parent map alone.
//!
//! Three concrete shapes implement [`Structure`]:
//!
//! * [`Tree`]: an arbitrary finite rooted tree with user supplied node names.
//! * [`Fan`]: a finite rooted reflexive fan of height `k` and width `w`, with
//!   canonical node ids `r` and `i:j` (branch `i` in `1..=w`, depth `j` in
//!   `1..=k`). The root is index 0, then branch 1 bottom-up, branch 2, ...
//! * [`Spider`]: a rooted tree whose only branching node is the root but whose
//!   branches may have different lengths. Same canonical naming as fans.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StructureError {
    #[error("empty node set")]
    Empty,
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("root `{0}` is not a node")]
    UnknownRoot(String),
    #[error("root `{0}` has a parent")]
    RootHasParent(String),
    #[error("parent map mentions unknown node `{0}`")]
    DanglingParent(String),
    #[error("node `{0}` lies on a parent cycle")]
    Cycle(String),
    #[error("node `{0}` is not connected to the root")]
    Disconnected(String),
    #[error("structure is not a fan: {0}")]
    NotAFan(String),
    #[error("declared {field} {declared} disagrees with the shape ({actual})")]
    ShapeMismatch {
        field: &'static str,
        declared: usize,
        actual: usize,
    },
}

/// A maximal chain `b(0) = root, b(1), ..., b(k)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Branch(pub Vec<usize>);

impl Branch {
    pub fn nodes(&self) -> &[usize] {
        &self.0
    }

    /// Number of nodes minus one.
    pub fn height(&self) -> usize {
        self.0.len() - 1
    }

    pub fn leaf(&self) -> usize {
        *self.0.last().expect("branches contain the root")
    }
}

/// Common read-only view of a finite rooted structure in the language `{R}`.
pub trait Structure: Clone + PartialEq + std::fmt::Debug {
    fn len(&self) -> usize;

    fn root(&self) -> usize;

    fn parent(&self, node: usize) -> Option<usize>;

    fn depth(&self, node: usize) -> usize;

    /// Immediate successors in ascending index order.
    fn children(&self, node: usize) -> Vec<usize>;

    fn name(&self, node: usize) -> String;

    /// Branches in canonical (lexicographic on node indices) order.
    fn branches(&self) -> Vec<Branch>;

    /// Index of the node with the given id.
    fn locate(&self, name: &str) -> Option<usize> {
        (0..self.len()).find(|&n| self.name(n) == name)
    }

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn related(&self, s: usize, t: usize) -> bool {
        s == t || self.parent(t) == Some(s)
    }

    /// Symmetrization of `R`.
    fn related_sym(&self, s: usize, t: usize) -> bool {
        self.related(s, t) || self.related(t, s)
    }

    /// Maximal branch height.
    fn height(&self) -> usize {
        (0..self.len()).map(|n| self.depth(n)).max().unwrap_or(0)
    }

    /// `s <=_T t`: `s` lies on the path from `t` to the root.
    fn le(&self, s: usize, t: usize) -> bool {
        let mut cur = Some(t);
        while let Some(c) = cur {
            if c == s {
                return true;
            }
            cur = self.parent(c);
        }
        false
    }

    fn is_leaf(&self, node: usize) -> bool {
        self.children(node).is_empty()
    }

    fn to_doc(&self) -> StructureDoc {
        let nodes: Vec<String> = (0..self.len()).map(|n| self.name(n)).collect();
        let parent = (0..self.len())
            .filter_map(|n| self.parent(n).map(|p| (nodes[n].clone(), nodes[p].clone())))
            .collect();
        StructureDoc {
            nodes,
            root: self.name(self.root()),
            parent,
            height: None,
            width: None,
        }
    }
}

/// JSON shape shared by every structure: `{"nodes":[...],"root":"r","parent":{...}}`.
/// Fans additionally carry `height` and `width`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructureDoc {
    pub nodes: Vec<String>,
    pub root: String,
    pub parent: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
}

/// Outcome of [`validate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Classification {
    Fan { height: usize, width: usize },
    Tree,
    Invalid { reason: String },
}

/// Classifies a raw node set + root + parent map.
pub fn validate(doc: &StructureDoc) -> Classification {
    match Tree::from_doc(doc) {
        Err(e) => Classification::Invalid {
            reason: e.to_string(),
        },
        Ok(tree) => match tree.fan_shape() {
            Some((height, width)) => Classification::Fan { height, width },
            None => Classification::Tree,
        },
    }
}

// ---------------------------------------------------------------------------
// Tree

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tree {
    names: Vec<String>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    depth: Vec<usize>,
    root: usize,
}

impl Tree {
    pub fn from_doc(doc: &StructureDoc) -> Result<Self, StructureError> {
        if doc.nodes.is_empty() {
            return Err(StructureError::Empty);
        }
        let mut index = HashMap::with_capacity(doc.nodes.len());
        for (i, n) in doc.nodes.iter().enumerate() {
            if index.insert(n.as_str(), i).is_some() {
                return Err(StructureError::DuplicateNode(n.clone()));
            }
        }
        let root = *index
            .get(doc.root.as_str())
            .ok_or_else(|| StructureError::UnknownRoot(doc.root.clone()))?;
        let mut parent = vec![None; doc.nodes.len()];
        for (child, par) in &doc.parent {
            let c = *index
                .get(child.as_str())
                .ok_or_else(|| StructureError::DanglingParent(child.clone()))?;
            let p = *index
                .get(par.as_str())
                .ok_or_else(|| StructureError::DanglingParent(par.clone()))?;
            if c == root {
                return Err(StructureError::RootHasParent(doc.root.clone()));
            }
            parent[c] = Some(p);
        }
        Self::from_parents(doc.nodes.clone(), parent, root)
    }

    /// Builds a tree from names and parent links; checks acyclicity and connectivity.
    pub fn from_parents(
        names: Vec<String>,
        parent: Vec<Option<usize>>,
        root: usize,
    ) -> Result<Self, StructureError> {
        let n = names.len();
        if n == 0 {
            return Err(StructureError::Empty);
        }
        if parent[root].is_some() {
            return Err(StructureError::RootHasParent(names[root].clone()));
        }
        // 0 = unvisited, 1 = on current path, 2 = resolved
        let mut state = vec![0u8; n];
        let mut depth = vec![0usize; n];
        state[root] = 2;
        for start in 0..n {
            if state[start] == 2 {
                continue;
            }
            let mut path = Vec::new();
            let mut cur = start;
            loop {
                match state[cur] {
                    2 => break,
                    1 => return Err(StructureError::Cycle(names[cur].clone())),
                    _ => {}
                }
                state[cur] = 1;
                path.push(cur);
                match parent[cur] {
                    Some(p) => cur = p,
                    None => return Err(StructureError::Disconnected(names[cur].clone())),
                }
            }
            let mut d = depth[cur];
            for &node in path.iter().rev() {
                d += 1;
                depth[node] = d;
                state[node] = 2;
            }
        }
        let mut children = vec![Vec::new(); n];
        for (c, p) in parent.iter().enumerate() {
            if let Some(p) = p {
                children[*p].push(c);
            }
        }
        Ok(Self {
            names,
            parent,
            children,
            depth,
            root,
        })
    }

    /// A chain `r - a - b - ...` with the given names; the first name is the root.
    pub fn chain(names: &[&str]) -> Self {
        let parent = (0..names.len())
            .map(|i| i.checked_sub(1))
            .collect::<Vec<_>>();
        Self::from_parents(names.iter().map(|s| s.to_string()).collect(), parent, 0)
            .expect("chains are trees")
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// `(height, width)` when the tree is a finite rooted reflexive fan.
    pub fn fan_shape(&self) -> Option<(usize, usize)> {
        // only the root may branch
        if (0..self.len()).any(|n| n != self.root && self.children[n].len() > 1) {
            return None;
        }
        let branches = self.branches();
        let height = branches[0].height();
        branches
            .iter()
            .all(|b| b.height() == height)
            .then_some((height, branches.len()))
    }

    /// The canonical fan with this tree's shape plus, for each canonical fan
    /// node, the tree node it corresponds to.
    pub fn as_fan(&self) -> Result<(Fan, Vec<usize>), StructureError> {
        let (height, width) = self
            .fan_shape()
            .ok_or_else(|| StructureError::NotAFan("branches differ or a non-root node branches".into()))?;
        let fan = Fan::new(height, width);
        let mut to_tree = vec![self.root; fan.len()];
        for (i, b) in self.branches().iter().enumerate() {
            for (j, &node) in b.nodes().iter().enumerate().skip(1) {
                to_tree[fan.node(i, j)] = node;
            }
        }
        Ok((fan, to_tree))
    }
}

impl Structure for Tree {
    fn locate(&self, name: &str) -> Option<usize> {
        self.index_of(name)
    }

    fn len(&self) -> usize {
        self.names.len()
    }

    fn root(&self) -> usize {
        self.root
    }

    fn parent(&self, node: usize) -> Option<usize> {
        self.parent[node]
    }

    fn depth(&self, node: usize) -> usize {
        self.depth[node]
    }

    fn children(&self, node: usize) -> Vec<usize> {
        self.children[node].clone()
    }

    fn name(&self, node: usize) -> String {
        self.names[node].clone()
    }

    fn branches(&self) -> Vec<Branch> {
        let mut out = Vec::new();
        let mut stack = vec![vec![self.root]];
        while let Some(path) = stack.pop() {
            let last = *path.last().unwrap();
            let kids = &self.children[last];
            if kids.is_empty() {
                out.push(Branch(path));
                continue;
            }
            for &k in kids.iter().rev() {
                let mut p = path.clone();
                p.push(k);
                stack.push(p);
            }
        }
        out
    }
}

/// `"r"` is `(0, 0)`; `"i:j"` is `(i, j)` with 1-based branch `i`.
fn parse_id(name: &str) -> Option<(usize, usize)> {
    if name == "r" {
        return Some((0, 0));
    }
    let (i, j) = name.split_once(':')?;
    Some((i.parse().ok()?, j.parse().ok()?))
}

// ---------------------------------------------------------------------------
// Fan

/// Finite rooted reflexive fan `F(height, width)` with canonical node ids.
///
/// A fan of height 0 is the single point and always has width 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fan {
    height: usize,
    width: usize,
}

impl Fan {
    pub fn new(height: usize, width: usize) -> Self {
        assert!(width >= 1, "a fan has at least one branch");
        let width = if height == 0 { 1 } else { width };
        Self { height, width }
    }

    pub fn point() -> Self {
        Self::new(0, 1)
    }

    pub fn chain(height: usize) -> Self {
        Self::new(height, 1)
    }

    pub fn is_point(&self) -> bool {
        self.height == 0
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Node at depth `j` of branch `i` (both 0-based; depth 0 is the root).
    #[inline]
    pub fn node(&self, branch: usize, depth: usize) -> usize {
        debug_assert!(branch < self.width && depth <= self.height);
        if depth == 0 {
            0
        } else {
            1 + branch * self.height + depth - 1
        }
    }

    /// Branch index of a non-root node.
    #[inline]
    pub fn branch_of(&self, node: usize) -> Option<usize> {
        (node != 0).then(|| (node - 1) / self.height)
    }

    pub fn branch(&self, i: usize) -> Branch {
        Branch((0..=self.height).map(|j| self.node(i, j)).collect())
    }

    /// Index of a canonical node id.
    pub fn index_of(&self, name: &str) -> Option<usize> {
        let (i, j) = parse_id(name)?;
        if (i, j) == (0, 0) {
            return Some(0);
        }
        (i >= 1 && i <= self.width && j >= 1 && j <= self.height).then(|| self.node(i - 1, j))
    }

    pub fn from_doc(doc: &StructureDoc) -> Result<(Self, HashMap<String, usize>), StructureError> {
        let tree = Tree::from_doc(doc)?;
        let (fan, to_tree) = tree.as_fan()?;
        if let Some(h) = doc.height {
            if h != fan.height {
                return Err(StructureError::ShapeMismatch {
                    field: "height",
                    declared: h,
                    actual: fan.height,
                });
            }
        }
        if let Some(w) = doc.width {
            if w != fan.width {
                return Err(StructureError::ShapeMismatch {
                    field: "width",
                    declared: w,
                    actual: fan.width,
                });
            }
        }
        let names = to_tree
            .iter()
            .enumerate()
            .map(|(f, &t)| (tree.names[t].clone(), f))
            .collect();
        Ok((fan, names))
    }

    /// All fans with at most `max_nodes` nodes, in `(height, width)` order.
    pub fn all_up_to(max_nodes: usize) -> Vec<Fan> {
        let mut out = vec![Fan::point()];
        for h in 1..max_nodes {
            for w in 1..max_nodes {
                if h * w < max_nodes {
                    out.push(Fan::new(h, w));
                }
            }
        }
        out
    }
}

impl Structure for Fan {
    fn locate(&self, name: &str) -> Option<usize> {
        self.index_of(name)
    }

    #[inline]
    fn len(&self) -> usize {
        1 + self.height * self.width
    }

    fn root(&self) -> usize {
        0
    }

    #[inline]
    fn parent(&self, node: usize) -> Option<usize> {
        if node == 0 {
            None
        } else if (node - 1).is_multiple_of(self.height) {
            Some(0)
        } else {
            Some(node - 1)
        }
    }

    #[inline]
    fn depth(&self, node: usize) -> usize {
        if node == 0 {
            0
        } else {
            (node - 1) % self.height + 1
        }
    }

    fn children(&self, node: usize) -> Vec<usize> {
        if node == 0 {
            if self.height == 0 {
                Vec::new()
            } else {
                (0..self.width).map(|i| self.node(i, 1)).collect()
            }
        } else if self.depth(node) < self.height {
            vec![node + 1]
        } else {
            Vec::new()
        }
    }

    fn name(&self, node: usize) -> String {
        match self.branch_of(node) {
            None => "r".to_string(),
            Some(i) => format!("{}:{}", i + 1, self.depth(node)),
        }
    }

    fn branches(&self) -> Vec<Branch> {
        (0..self.width).map(|i| self.branch(i)).collect()
    }

    fn height(&self) -> usize {
        self.height
    }

    fn to_doc(&self) -> StructureDoc {
        let nodes: Vec<String> = (0..self.len()).map(|n| self.name(n)).collect();
        let parent = (1..self.len())
            .map(|n| (nodes[n].clone(), nodes[self.parent(n).unwrap()].clone()))
            .collect();
        StructureDoc {
            nodes,
            root: "r".into(),
            parent,
            height: Some(self.height),
            width: Some(self.width),
        }
    }
}

impl Serialize for Fan {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_doc().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Fan {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let doc = StructureDoc::deserialize(d)?;
        let (fan, names) = Fan::from_doc(&doc).map_err(serde::de::Error::custom)?;
        if names.iter().any(|(n, &i)| *n != fan.name(i)) {
            return Err(serde::de::Error::custom("fan node ids are not canonical"));
        }
        Ok(fan)
    }
}

// ---------------------------------------------------------------------------
// Spider

/// Rooted tree branching only at the root; branch `i` has `lengths[i]` non-root nodes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Spider {
    lengths: Vec<usize>,
    // offsets[i] = number of non-root nodes in branches before i
    offsets: Vec<usize>,
}

impl Spider {
    pub fn new(lengths: Vec<usize>) -> Self {
        assert!(!lengths.is_empty(), "a spider has at least one branch");
        assert!(
            lengths.len() == 1 || lengths.iter().all(|&l| l > 0),
            "only the single point has an empty branch"
        );
        let mut offsets = Vec::with_capacity(lengths.len() + 1);
        let mut acc = 0;
        for &l in &lengths {
            offsets.push(acc);
            acc += l;
        }
        offsets.push(acc);
        Self { lengths, offsets }
    }

    pub fn lengths(&self) -> &[usize] {
        &self.lengths
    }

    pub fn width(&self) -> usize {
        self.lengths.len()
    }

    #[inline]
    pub fn node(&self, branch: usize, depth: usize) -> usize {
        debug_assert!(depth <= self.lengths[branch]);
        if depth == 0 {
            0
        } else {
            1 + self.offsets[branch] + depth - 1
        }
    }

    #[inline]
    pub fn branch_of(&self, node: usize) -> Option<usize> {
        (node != 0).then(|| self.offsets.partition_point(|&o| o < node) - 1)
    }

    pub fn branch(&self, i: usize) -> Branch {
        Branch((0..=self.lengths[i]).map(|j| self.node(i, j)).collect())
    }

    /// Index of a canonical node id.
    pub fn index_of(&self, name: &str) -> Option<usize> {
        let (i, j) = parse_id(name)?;
        if (i, j) == (0, 0) {
            return Some(0);
        }
        (i >= 1 && i <= self.width() && j >= 1 && j <= self.lengths[i - 1]).then(|| self.node(i - 1, j))
    }

    pub fn as_fan(&self) -> Option<Fan> {
        let h = self.lengths[0];
        self.lengths
            .iter()
            .all(|&l| l == h)
            .then(|| Fan::new(h, self.width()))
    }
}

impl From<Fan> for Spider {
    fn from(f: Fan) -> Self {
        Spider::new(vec![f.height; f.width])
    }
}

impl Structure for Spider {
    fn locate(&self, name: &str) -> Option<usize> {
        self.index_of(name)
    }

    fn len(&self) -> usize {
        1 + self.offsets[self.lengths.len()]
    }

    fn root(&self) -> usize {
        0
    }

    #[inline]
    fn parent(&self, node: usize) -> Option<usize> {
        let b = self.branch_of(node)?;
        if node == 1 + self.offsets[b] {
            Some(0)
        } else {
            Some(node - 1)
        }
    }

    #[inline]
    fn depth(&self, node: usize) -> usize {
        match self.branch_of(node) {
            None => 0,
            Some(b) => node - self.offsets[b],
        }
    }

    fn children(&self, node: usize) -> Vec<usize> {
        match self.branch_of(node) {
            None => (0..self.width())
                .filter(|&i| self.lengths[i] > 0)
                .map(|i| self.node(i, 1))
                .collect(),
            Some(b) if self.depth(node) < self.lengths[b] => vec![node + 1],
            Some(_) => Vec::new(),
        }
    }

    fn name(&self, node: usize) -> String {
        match self.branch_of(node) {
            None => "r".to_string(),
            Some(i) => format!("{}:{}", i + 1, self.depth(node)),
        }
    }

    fn branches(&self) -> Vec<Branch> {
        (0..self.width()).map(|i| self.branch(i)).collect()
    }

    fn height(&self) -> usize {
        self.lengths.iter().copied().max().unwrap_or(0)
    }
}

impl Serialize for Spider {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut doc = self.to_doc();
        if let Some(f) = self.as_fan() {
            doc.height = Some(f.height());
            doc.width = Some(f.width());
        }
        doc.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Spider {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let doc = StructureDoc::deserialize(d)?;
        let tree = Tree::from_doc(&doc).map_err(serde::de::Error::custom)?;
        if (0..tree.len()).any(|n| n != tree.root() && tree.children(n).len() > 1) {
            return Err(serde::de::Error::custom("not a spider"));
        }
        let branches = tree.branches();
        let spider = Spider::new(branches.iter().map(Branch::height).collect());
        for (i, b) in branches.iter().enumerate() {
            for (j, &node) in b.nodes().iter().enumerate() {
                if tree.name(node) != spider.name(spider.node(i, j)) {
                    return Err(serde::de::Error::custom("spider node ids are not canonical"));
                }
            }
        }
        Ok(spider)
    }
}

// ---------------------------------------------------------------------------

/// Covers a tree by a fan: one fan branch per tree branch, each padded to the
/// maximal branch length by repeating its leaf.
///
/// Returns the fan together with the covering map as an index vector (fan node
/// to tree node). A tree that already is a fan is covered by its canonical
/// relabelling.
pub fn fan_cover_map(tree: &Tree) -> (Fan, Vec<usize>) {
    let branches = tree.branches();
    let height = branches.iter().map(Branch::height).max().unwrap_or(0);
    let fan = Fan::new(height, branches.len());
    let mut map = vec![tree.root(); fan.len()];
    for (i, b) in branches.iter().enumerate() {
        for j in 1..=height {
            map[fan.node(i, j)] = b.nodes()[j.min(b.height())];
        }
    }
    (fan, map)
}
