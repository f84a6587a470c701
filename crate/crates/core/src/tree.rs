//! Lazily grown rooted trees.
//!
//! A [`LazyTree`] is either a Galton–Watson tree (plain or augmented) whose
//! nodes are materialized on demand, or a frozen finite tree used by the
//! exact finite-state checks. Randomness for a node is keyed by a hash of
//! its path from the root, so the tree is a pure function of
//! `(law, flavor, seed)` no matter in which order it is explored.
//!
//! The distinguished ray is the leftmost-child path from the original root.
//! Horodistances are measured against it.

use alloc::collections::VecDeque;
use alloc::vec::Vec;
use alloc::{format, vec};

use crate::error::{Error, Result};
use crate::offspring::OffspringDistribution;
use crate::stream::{hash2, unit};

const NONE: u32 = u32::MAX;
const ROOT_KEY: u64 = 0x6a09_e667_f3bc_c908;

/// Handle to a materialized vertex. Only meaningful for the tree that
/// issued it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(u32);

impl NodeId {
    pub const fn index(self) -> u32 {
        self.0
    }

    /// Handle with a raw index, for trajectories read back from storage.
    pub const fn from_index(i: u32) -> Self {
        Self(i)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Flavor {
    /// Root has `Z` children.
    Gw,
    /// Root has `Z + 1` children: two GW trees joined at their roots.
    Agw,
}

#[derive(Debug, Clone)]
enum Source {
    GaltonWatson { law: OffspringDistribution, seed: u64, flavor: Flavor },
    Frozen { children: Vec<Vec<u32>> },
}

#[derive(Debug, Clone)]
struct Node {
    parent: u32,
    key: u64,
    depth: u32,
    /// Depth of the deepest ancestor (or self) lying on the ray.
    ray_depth: u32,
    child_index: u32,
    first_child: u32,
    /// `NONE` until the children are materialized.
    child_count: u32,
    /// Vertex index in a frozen tree.
    vertex: u32,
}

/// Contiguous block of sibling ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeRange {
    start: u32,
    end: u32,
}

impl NodeRange {
    pub fn len(&self) -> usize {
        (self.end - self.start) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn get(&self, i: usize) -> Option<NodeId> {
        (i < self.len()).then(|| NodeId(self.start + i as u32))
    }

    pub fn contains(&self, v: NodeId) -> bool {
        (self.start..self.end).contains(&v.0)
    }
}

impl Iterator for NodeRange {
    type Item = NodeId;

    fn next(&mut self) -> Option<NodeId> {
        (self.start < self.end).then(|| {
            self.start += 1;
            NodeId(self.start - 1)
        })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.len(), Some(self.len()))
    }
}

impl ExactSizeIterator for NodeRange {}

/// Parent (if any) followed by the children.
#[derive(Debug, Clone, Copy)]
pub struct Neighbors {
    parent: Option<NodeId>,
    children: NodeRange,
}

impl Iterator for Neighbors {
    type Item = NodeId;

    fn next(&mut self) -> Option<NodeId> {
        self.parent.take().or_else(|| self.children.next())
    }
}

#[derive(Debug, Clone)]
pub struct LazyTree {
    source: Source,
    nodes: Vec<Node>,
}

/// Samples a lazy GW or AGW tree. Only the root is materialized.
pub fn sample_tree(d: &OffspringDistribution, flavor: Flavor, tree_seed: u64) -> LazyTree {
    LazyTree::sample(d, flavor, tree_seed)
}

impl LazyTree {
    pub fn sample(d: &OffspringDistribution, flavor: Flavor, seed: u64) -> Self {
        Self::with_source(Source::GaltonWatson { law: d.clone(), seed, flavor }, NONE)
    }

    /// Finite rooted tree given by child lists; vertex 0 is the root.
    pub fn frozen(children: &[Vec<usize>]) -> Result<Self> {
        let n = children.len();
        if n == 0 {
            return Err(Error::BadTree("no vertices".into()));
        }
        let mut seen = vec![false; n];
        seen[0] = true;
        let mut lists = Vec::with_capacity(n);
        for (v, list) in children.iter().enumerate() {
            let mut converted = Vec::with_capacity(list.len());
            for &c in list {
                if c >= n || seen[c] {
                    return Err(Error::BadTree(format!("vertex {c} listed twice or out of range (parent {v})")));
                }
                seen[c] = true;
                converted.push(c as u32);
            }
            lists.push(converted);
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::BadTree("not every vertex is reachable from the root".into()));
        }
        let mut tree = Self::with_source(Source::Frozen { children: lists }, 0);
        // A listed child must not be an ancestor; materializing everything
        // detects cycles through the node count.
        let mut stack = vec![tree.root()];
        while let Some(v) = stack.pop() {
            if tree.nodes.len() > n {
                return Err(Error::BadTree("child lists contain a cycle".into()));
            }
            stack.extend(tree.children(v)?);
        }
        if tree.nodes.len() != n {
            return Err(Error::BadTree("child lists do not form a tree".into()));
        }
        Ok(tree)
    }

    fn with_source(source: Source, root_vertex: u32) -> Self {
        let root = Node {
            parent: NONE,
            key: ROOT_KEY,
            depth: 0,
            ray_depth: 0,
            child_index: 0,
            first_child: NONE,
            child_count: NONE,
            vertex: root_vertex,
        };
        Self { source, nodes: vec![root] }
    }

    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    /// Offspring law for GW/AGW trees, `None` for frozen trees.
    pub fn law(&self) -> Option<&OffspringDistribution> {
        match &self.source {
            Source::GaltonWatson { law, .. } => Some(law),
            Source::Frozen { .. } => None,
        }
    }

    pub fn flavor(&self) -> Option<Flavor> {
        match &self.source {
            Source::GaltonWatson { flavor, .. } => Some(*flavor),
            Source::Frozen { .. } => None,
        }
    }

    pub fn is_frozen(&self) -> bool {
        matches!(self.source, Source::Frozen { .. })
    }

    /// Number of materialized nodes.
    pub fn materialized(&self) -> usize {
        self.nodes.len()
    }

    pub fn contains(&self, v: NodeId) -> bool {
        (v.0 as usize) < self.nodes.len()
    }

    fn node(&self, v: NodeId) -> Result<&Node> {
        self.nodes.get(v.0 as usize).ok_or(Error::UnknownNode(v.0))
    }

    pub fn is_materialized(&self, v: NodeId) -> Result<bool> {
        Ok(self.node(v)?.child_count != NONE)
    }

    fn offspring_count(&self, node: &Node) -> u32 {
        match &self.source {
            Source::GaltonWatson { law, seed, flavor } => {
                let z = law.sample(unit(hash2(*seed, node.key)));
                if node.parent == NONE && *flavor == Flavor::Agw {
                    z + 1
                } else {
                    z
                }
            }
            Source::Frozen { children } => children[node.vertex as usize].len() as u32,
        }
    }

    fn materialize(&mut self, v: NodeId) -> Result<NodeRange> {
        let node = self.node(v)?;
        if node.child_count != NONE {
            return Ok(NodeRange { start: node.first_child, end: node.first_child + node.child_count });
        }
        let count = self.offspring_count(node);
        let (key, depth, on_ray, ray_depth) = (node.key, node.depth, self.on_ray_node(node), node.ray_depth);
        let vertex = node.vertex;
        let start = self.nodes.len() as u32;
        for i in 0..count {
            let child_on_ray = on_ray && i == 0;
            let child_vertex = match &self.source {
                Source::Frozen { children } => children[vertex as usize][i as usize],
                Source::GaltonWatson { .. } => NONE,
            };
            self.nodes.push(Node {
                parent: v.0,
                key: hash2(key, i as u64 + 1),
                depth: depth + 1,
                ray_depth: if child_on_ray { depth + 1 } else { ray_depth },
                child_index: i,
                first_child: NONE,
                child_count: NONE,
                vertex: child_vertex,
            });
        }
        let node = &mut self.nodes[v.0 as usize];
        node.first_child = start;
        node.child_count = count;
        Ok(NodeRange { start, end: start + count })
    }

    /// Index of `v` in the child lists of a frozen tree.
    pub fn vertex(&self, v: NodeId) -> Result<u32> {
        match self.source {
            Source::Frozen { .. } => Ok(self.node(v)?.vertex),
            Source::GaltonWatson { .. } => Err(Error::InvalidArgument("only frozen trees have vertex labels".into())),
        }
    }

    /// Ordered children of `v`, materializing them on first use.
    pub fn children(&mut self, v: NodeId) -> Result<NodeRange> {
        self.materialize(v)
    }

    pub fn child_count(&mut self, v: NodeId) -> Result<u32> {
        Ok(self.materialize(v)?.len() as u32)
    }

    pub fn parent(&self, v: NodeId) -> Result<Option<NodeId>> {
        let p = self.node(v)?.parent;
        Ok((p != NONE).then_some(NodeId(p)))
    }

    /// Number of neighbors. For AGW roots this counts the joined root.
    pub fn degree(&mut self, v: NodeId) -> Result<u32> {
        let has_parent = self.node(v)?.parent != NONE;
        Ok(self.child_count(v)? + has_parent as u32)
    }

    pub fn neighbors(&mut self, v: NodeId) -> Result<Neighbors> {
        let parent = self.parent(v)?;
        Ok(Neighbors { parent, children: self.children(v)? })
    }

    pub fn depth(&self, v: NodeId) -> Result<u32> {
        Ok(self.node(v)?.depth)
    }

    /// Stable path hash, independent of exploration order. Also used as the
    /// key of the edge to the parent.
    pub fn key(&self, v: NodeId) -> Result<u64> {
        Ok(self.node(v)?.key)
    }

    pub fn child_index(&self, v: NodeId) -> Result<u32> {
        Ok(self.node(v)?.child_index)
    }

    /// Root-to-node path as child indices.
    pub fn path(&self, v: NodeId) -> Result<Vec<u32>> {
        let mut path = Vec::new();
        let mut cur = self.node(v)?;
        while cur.parent != NONE {
            path.push(cur.child_index);
            cur = &self.nodes[cur.parent as usize];
        }
        path.reverse();
        Ok(path)
    }

    /// Follows a path of child indices from the root.
    pub fn descend(&mut self, path: &[u32]) -> Result<NodeId> {
        let mut v = self.root();
        for &i in path {
            v = self
                .children(v)?
                .get(i as usize)
                .ok_or_else(|| Error::InvalidArgument(format!("no child {i}")))?;
        }
        Ok(v)
    }

    fn on_ray_node(&self, node: &Node) -> bool {
        node.ray_depth == node.depth
    }

    pub fn is_on_ray(&self, v: NodeId) -> Result<bool> {
        let node = self.node(v)?;
        Ok(self.on_ray_node(node))
    }

    /// First vertex after `v` on the ray from `v` converging to the
    /// distinguished ray.
    pub fn ray_next(&mut self, v: NodeId) -> Result<NodeId> {
        if self.is_on_ray(v)? {
            self.children(v)?
                .get(0)
                .ok_or_else(|| Error::InvalidArgument("the ray ends at a leaf of a finite tree".into()))
        } else {
            Ok(NodeId(self.node(v)?.parent))
        }
    }

    /// `⟨v⟩ = ⟨v - o⟩`, the horodistance from the original root.
    pub fn horo(&self, v: NodeId) -> Result<i64> {
        let node = self.node(v)?;
        Ok(node.depth as i64 - 2 * node.ray_depth as i64)
    }

    pub fn lca(&self, x: NodeId, y: NodeId) -> Result<NodeId> {
        let (mut a, mut b) = (self.node(x)?, self.node(y)?);
        let (mut ia, mut ib) = (x.0, y.0);
        while a.depth > b.depth {
            ia = a.parent;
            a = &self.nodes[ia as usize];
        }
        while b.depth > a.depth {
            ib = b.parent;
            b = &self.nodes[ib as usize];
        }
        while ia != ib {
            ia = a.parent;
            ib = b.parent;
            a = &self.nodes[ia as usize];
            b = &self.nodes[ib as usize];
        }
        Ok(NodeId(ia))
    }

    /// Graph distance.
    pub fn distance(&self, x: NodeId, y: NodeId) -> Result<u32> {
        let m = self.lca(x, y)?;
        let dm = self.node(m)?.depth;
        Ok(self.node(x)?.depth + self.node(y)?.depth - 2 * dm)
    }

    fn ancestor_at_depth(&self, v: NodeId, depth: u32) -> NodeId {
        let mut cur = v.0;
        while self.nodes[cur as usize].depth > depth {
            cur = self.nodes[cur as usize].parent;
        }
        NodeId(cur)
    }

    /// First site where the rays from `x` and `y` towards the distinguished
    /// ray meet.
    pub fn confluent(&self, x: NodeId, y: NodeId) -> Result<NodeId> {
        let (kx, ky) = (self.node(x)?.ray_depth, self.node(y)?.ray_depth);
        Ok(if kx == ky {
            self.lca(x, y)?
        } else if kx < ky {
            self.ancestor_at_depth(y, ky)
        } else {
            self.ancestor_at_depth(x, kx)
        })
    }

    /// Signed distance `⟨y - x⟩ = |y - x∧y| - |x - x∧y|`.
    pub fn horodistance(&self, x: NodeId, y: NodeId) -> Result<i64> {
        let m = self.confluent(x, y)?;
        Ok(self.distance(y, m)? as i64 - self.distance(x, m)? as i64)
    }

    /// Ball of radius `r` around `center`, as a rooted tree hanging from
    /// `center`.
    pub fn ball(&mut self, center: NodeId, r: u32) -> Result<Ball> {
        self.node(center)?;
        let mut ball = Ball { nodes: vec![center], children: vec![Vec::new()], dist: vec![0] };
        let mut queue = VecDeque::from([(0usize, NONE)]);
        while let Some((slot, from)) = queue.pop_front() {
            if ball.dist[slot] == r {
                continue;
            }
            let v = ball.nodes[slot];
            for w in self.neighbors(v)? {
                if w.0 == from {
                    continue;
                }
                let idx = ball.nodes.len();
                ball.nodes.push(w);
                ball.children.push(Vec::new());
                ball.dist.push(ball.dist[slot] + 1);
                ball.children[slot].push(idx);
                queue.push_back((idx, v.0));
            }
        }
        Ok(ball)
    }

    /// Isomorphism-invariant code of the uncolored ball of radius `r`.
    pub fn ball_code(&mut self, center: NodeId, r: u32) -> Result<Vec<u8>> {
        Ok(self.ball(center, r)?.code(None))
    }

    /// Adjacency dump of the materialized part, for debugging.
    pub fn dump(&self) -> Vec<NodeRecord> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, n)| NodeRecord {
                id: i as u32,
                parent: (n.parent != NONE).then_some(n.parent),
                children: (n.child_count != NONE).then(|| (n.first_child..n.first_child + n.child_count).collect()),
                depth: n.depth,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeRecord {
    pub id: u32,
    pub parent: Option<u32>,
    /// `None` when the children have not been materialized.
    pub children: Option<Vec<u32>>,
    pub depth: u32,
}

/// A ball around a vertex, re-rooted at the center. Slot 0 is the center;
/// slots are in breadth-first order.
#[derive(Debug, Clone)]
pub struct Ball {
    pub nodes: Vec<NodeId>,
    children: Vec<Vec<usize>>,
    dist: Vec<u32>,
}

impl Ball {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn distance(&self, slot: usize) -> u32 {
        self.dist[slot]
    }

    /// AHU-style canonical code: each vertex becomes `(` color children `)`
    /// with children codes sorted. `colors` is indexed by slot.
    pub fn code(&self, colors: Option<&[bool]>) -> Vec<u8> {
        let mut codes: Vec<Vec<u8>> = vec![Vec::new(); self.nodes.len()];
        for slot in (0..self.nodes.len()).rev() {
            let mut kids: Vec<Vec<u8>> = self.children[slot].iter().map(|&c| core::mem::take(&mut codes[c])).collect();
            kids.sort_unstable();
            let mut code = Vec::with_capacity(3 + kids.iter().map(Vec::len).sum::<usize>());
            code.push(b'(');
            code.push(match colors {
                None => b'.',
                Some(c) if c[slot] => b'1',
                Some(_) => b'0',
            });
            for k in kids {
                code.extend_from_slice(&k);
            }
            code.push(b')');
            codes[slot] = code;
        }
        core::mem::take(&mut codes[0])
    }
}
