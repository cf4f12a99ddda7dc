//! Communication graph: proximity edges between trajectories, bipartiteness,
//! maximum bipartite subgraphs and the alternating line-angle cycle condition
//! for neighbors flying in opposite directions.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    line_angle, link_positions, min_distance, Circle, ClosedPath, GeometryError,
};
use crate::scalar::{residue, wrap, Scalar};

/// Largest edge count handled by exhaustive max-cut search.
pub const EXACT_MAX_CUT_EDGES: usize = 24;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("graph is disconnected; components: {components:?}")]
    Disconnected { components: Vec<Vec<usize>> },
}

/// What a link location on a trajectory means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinkKind {
    /// Angle on a circle, in `[0, 2pi)`.
    Angle,
    /// Arc length along a closed path.
    ArcLength,
}

/// An undirected communication link, stored with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct Edge<F> {
    pub a: usize,
    pub b: usize,
    /// Angle of the line through the link, in `[0, pi)`.
    pub beta: F,
    /// Link location on trajectory `a` (closest to `b`).
    pub link_a: F,
    /// Link location on trajectory `b` (closest to `a`).
    pub link_b: F,
    pub distance: F,
}

impl<F: Scalar> Edge<F> {
    pub fn new(i: usize, j: usize, beta: F, link_i: F, link_j: F, distance: F) -> Self {
        if i < j {
            Self {
                a: i,
                b: j,
                beta,
                link_a: link_i,
                link_b: link_j,
                distance,
            }
        } else {
            Self {
                a: j,
                b: i,
                beta,
                link_a: link_j,
                link_b: link_i,
                distance,
            }
        }
    }

    pub fn key(&self) -> (usize, usize) {
        (self.a, self.b)
    }

    pub fn other(&self, v: usize) -> usize {
        if v == self.a {
            self.b
        } else {
            self.a
        }
    }

    /// Link location on trajectory `v`, one of the two endpoints.
    pub fn link_at(&self, v: usize) -> F {
        if v == self.a {
            self.link_a
        } else {
            self.link_b
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct CommGraph<F> {
    n: usize,
    kind: LinkKind,
    edges: Vec<Edge<F>>,
    #[serde(skip)]
    adjacency: Vec<Vec<(usize, usize)>>,
}

/// Two-coloring class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

impl Side {
    pub fn flip(self) -> Self {
        match self {
            Side::A => Side::B,
            Side::B => Side::A,
        }
    }
}

pub type Coloring = Vec<Side>;

/// Witness that a graph is not bipartite: a closed walk of odd length given as
/// its node sequence (the closing edge back to the first node is implicit).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("odd cycle {nodes:?}")]
pub struct OddCycle {
    pub nodes: Vec<usize>,
}

/// Fundamental cycles with respect to a spanning forest.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CycleBasis {
    pub cycles: Vec<Vec<usize>>,
    pub tree_edges: Vec<(usize, usize)>,
    /// Non-tree edge that closes each cycle, parallel to `cycles`.
    pub chords: Vec<(usize, usize)>,
}

impl<F: Scalar> CommGraph<F> {
    pub fn new(n: usize, kind: LinkKind, mut edges: Vec<Edge<F>>) -> Result<Self, GraphError> {
        edges.sort_by_key(|e| e.key());
        for w in edges.windows(2) {
            if w[0].key() == w[1].key() {
                return Err(GraphError::InvalidArgument(format!(
                    "duplicate edge {:?}",
                    w[0].key()
                )));
            }
        }
        if let Some(e) = edges.iter().find(|e| e.a == e.b || e.b >= n) {
            return Err(GraphError::InvalidArgument(format!(
                "bad edge {:?}",
                e.key()
            )));
        }
        let mut g = Self {
            n,
            kind,
            edges,
            adjacency: Vec::new(),
        };
        g.rebuild_adjacency();
        Ok(g)
    }

    fn rebuild_adjacency(&mut self) {
        let mut adj = vec![Vec::new(); self.n];
        for (k, e) in self.edges.iter().enumerate() {
            adj[e.a].push((e.b, k));
            adj[e.b].push((e.a, k));
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        self.adjacency = adj;
    }

    /// Restore derived indices after deserialization.
    pub fn reindexed(mut self) -> Self {
        self.edges.sort_by_key(|e| e.key());
        self.rebuild_adjacency();
        self
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn kind(&self) -> LinkKind {
        self.kind
    }

    pub fn edges(&self) -> &[Edge<F>] {
        &self.edges
    }

    pub fn edge_keys(&self) -> Vec<(usize, usize)> {
        self.edges.iter().map(Edge::key).collect()
    }

    /// Neighbors of `v` in ascending order.
    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[v].iter().map(|&(u, _)| u)
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn edge(&self, i: usize, j: usize) -> Option<&Edge<F>> {
        let key = (i.min(j), i.max(j));
        self.edges
            .binary_search_by_key(&key, Edge::key)
            .ok()
            .map(|k| &self.edges[k])
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edge(i, j).is_some()
    }

    /// Same nodes, only the edges accepted by `keep`.
    pub fn filter_edges(&self, mut keep: impl FnMut(&Edge<F>) -> bool) -> Self {
        let edges = self.edges.iter().copied().filter(|e| keep(e)).collect();
        let mut g = Self {
            n: self.n,
            kind: self.kind,
            edges,
            adjacency: Vec::new(),
        };
        g.rebuild_adjacency();
        g
    }

    pub fn with_edge_set(&self, keys: &BTreeSet<(usize, usize)>) -> Self {
        self.filter_edges(|e| keys.contains(&e.key()))
    }

    /// Connected components, each sorted, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.n];
        let mut out = Vec::new();
        for s in 0..self.n {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut comp = vec![s];
            let mut queue = VecDeque::from([s]);
            while let Some(v) = queue.pop_front() {
                for u in self.neighbors(v) {
                    if !seen[u] {
                        seen[u] = true;
                        comp.push(u);
                        queue.push_back(u);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.n <= 1 || self.components().len() == 1
    }

    /// BFS spanning forest: parent of every node (None for component roots),
    /// BFS order, and depth. Roots are `root` for its component and the
    /// smallest node of every other component.
    fn bfs_forest(&self, root: usize) -> (Vec<Option<usize>>, Vec<usize>, Vec<usize>) {
        let mut parent = vec![None; self.n];
        let mut depth = vec![0; self.n];
        let mut seen = vec![false; self.n];
        let mut order = Vec::with_capacity(self.n);
        let starts = std::iter::once(root).chain(0..self.n);
        for s in starts {
            if s >= self.n || seen[s] {
                continue;
            }
            seen[s] = true;
            let mut queue = VecDeque::from([s]);
            while let Some(v) = queue.pop_front() {
                order.push(v);
                for u in self.neighbors(v) {
                    if !seen[u] {
                        seen[u] = true;
                        parent[u] = Some(v);
                        depth[u] = depth[v] + 1;
                        queue.push_back(u);
                    }
                }
            }
        }
        (parent, order, depth)
    }

    /// BFS two-coloring from the smallest node of each component, or an odd
    /// cycle witness.
    pub fn two_color(&self) -> Result<Coloring, OddCycle> {
        let (parent, order, depth) = self.bfs_forest(0);
        let mut side = vec![Side::A; self.n];
        for &v in &order {
            if let Some(p) = parent[v] {
                side[v] = side[p].flip();
            }
        }
        for e in &self.edges {
            if side[e.a] == side[e.b] {
                return Err(OddCycle {
                    nodes: tree_cycle(&parent, &depth, e.a, e.b),
                });
            }
        }
        Ok(side)
    }

    pub fn is_bipartite(&self) -> bool {
        self.two_color().is_ok()
    }

    /// Edge-maximum bipartite subgraph: exact search when the graph has at most
    /// [`EXACT_MAX_CUT_EDGES`] edges, otherwise local-move max-cut, which keeps
    /// at least half of the edges.
    pub fn max_bipartite_subgraph(&self) -> Self {
        if self.is_bipartite() {
            return self.clone();
        }
        let side = if self.edges.len() <= EXACT_MAX_CUT_EDGES {
            self.exact_max_cut()
        } else {
            self.local_max_cut()
        };
        self.filter_edges(|e| side[e.a] != side[e.b])
    }

    /// Exhaustive max cut, one Gray-code walk per component with its first
    /// node pinned.
    fn exact_max_cut(&self) -> Vec<bool> {
        let mut side = vec![false; self.n];
        for comp in self.components() {
            if comp.len() < 2 {
                continue;
            }
            let free = &comp[1..];
            let mut current = vec![false; self.n];
            let mut cut = 0_i64;
            let mut best_cut = 0_i64;
            let mut best = current.clone();
            let steps: u64 = 1 << free.len();
            for step in 1..steps {
                let flip = free[step.trailing_zeros() as usize];
                // flipping changes cut by (same-side neighbors) - (other-side neighbors)
                let mut delta = 0_i64;
                for u in self.neighbors(flip) {
                    if current[u] == current[flip] {
                        delta += 1;
                    } else {
                        delta -= 1;
                    }
                }
                current[flip] = !current[flip];
                cut += delta;
                if cut > best_cut {
                    best_cut = cut;
                    best.clone_from(&current);
                }
            }
            for &v in &comp {
                side[v] = best[v];
            }
        }
        side
    }

    fn local_max_cut(&self) -> Vec<bool> {
        let mut side: Vec<bool> = match self.bfs_coloring_guess() {
            Some(s) => s,
            None => vec![false; self.n],
        };
        loop {
            let mut improved = false;
            for v in 0..self.n {
                let same = self.neighbors(v).filter(|&u| side[u] == side[v]).count();
                if 2 * same > self.degree(v) {
                    side[v] = !side[v];
                    improved = true;
                }
            }
            if !improved {
                return side;
            }
        }
    }

    fn bfs_coloring_guess(&self) -> Option<Vec<bool>> {
        let (parent, order, _) = self.bfs_forest(0);
        let mut side = vec![false; self.n];
        for &v in &order {
            if let Some(p) = parent[v] {
                side[v] = !side[p];
            }
        }
        Some(side)
    }

    /// Alternating line-angle sum `b(1,2) - b(2,3) + b(3,4) - ...` around a
    /// cycle, reduced to its distance from the nearest multiple of pi.
    pub fn alternating_residue(&self, cycle: &[usize]) -> Result<F, GraphError> {
        if cycle.len() < 4 || cycle.len() % 2 == 1 {
            return Err(GraphError::InvalidArgument(format!(
                "cycle must be simple and even with at least 4 nodes, got {cycle:?}"
            )));
        }
        let distinct: BTreeSet<_> = cycle.iter().collect();
        if distinct.len() != cycle.len() {
            return Err(GraphError::InvalidArgument(format!(
                "cycle {cycle:?} repeats a node"
            )));
        }
        let mut sum = F::zero();
        for (k, &v) in cycle.iter().enumerate() {
            let u = cycle[(k + 1) % cycle.len()];
            let e = self
                .edge(v, u)
                .ok_or_else(|| GraphError::InvalidArgument(format!("({v},{u}) is not an edge")))?;
            sum = if k % 2 == 0 {
                sum + e.beta
            } else {
                sum - e.beta
            };
        }
        Ok(residue(sum, F::PI()))
    }

    /// Whether an even cycle can be synchronized with neighbors flying in
    /// opposite directions: the alternating sum of line angles must vanish
    /// modulo pi.
    pub fn cycle_feasible_opposite(&self, cycle: &[usize], tol: F) -> Result<bool, GraphError> {
        Ok(self.alternating_residue(cycle)? <= tol)
    }

    /// Fundamental cycles of a BFS spanning forest rooted at `root`.
    pub fn cycle_basis(&self, root: usize) -> CycleBasis {
        let (parent, _, depth) = self.bfs_forest(root);
        let mut basis = CycleBasis::default();
        for e in &self.edges {
            let tree = parent[e.a] == Some(e.b) || parent[e.b] == Some(e.a);
            if tree {
                basis.tree_edges.push(e.key());
            } else {
                basis.cycles.push(tree_cycle(&parent, &depth, e.a, e.b));
                basis.chords.push(e.key());
            }
        }
        basis
    }

    /// Keep every spanning-tree edge and each chord whose fundamental cycle is
    /// feasible. Every simple cycle of the result is then feasible: the tree
    /// fixes one start-angle assignment and each kept chord agrees with it.
    pub fn max_synch_subgraph(&self, tol: F) -> Result<Self, GraphError> {
        if let Err(odd) = self.two_color() {
            return Err(GraphError::InvalidArgument(format!(
                "graph must be bipartite, found {odd}"
            )));
        }
        let basis = self.cycle_basis(0);
        let mut keep: BTreeSet<_> = basis.tree_edges.iter().copied().collect();
        for (cycle, chord) in basis.cycles.iter().zip(&basis.chords) {
            if self.cycle_feasible_opposite(cycle, tol)? {
                keep.insert(*chord);
            }
        }
        Ok(self.with_edge_set(&keep))
    }

    /// Depth-first-search tree from `root`, visiting neighbors in ascending
    /// order. Edges are returned as `(parent, child)` in discovery order.
    pub fn dfs_tree(&self, root: usize) -> Result<Vec<(usize, usize)>, GraphError> {
        if root >= self.n {
            return Err(GraphError::InvalidArgument(format!(
                "root {root} out of range"
            )));
        }
        let comps = self.components();
        if comps.len() > 1 {
            return Err(GraphError::Disconnected { components: comps });
        }
        Ok(self.dfs_forest(root))
    }

    /// Depth-first-search forest: the tree from `root` followed by trees of
    /// the remaining components, each rooted at its smallest node.
    pub fn dfs_forest(&self, root: usize) -> Vec<(usize, usize)> {
        let mut seen = vec![false; self.n];
        let mut tree = Vec::with_capacity(self.n.saturating_sub(1));
        for start in std::iter::once(root).chain(0..self.n) {
            if start >= self.n || seen[start] {
                continue;
            }
            seen[start] = true;
            let mut stack: Vec<(usize, usize)> = vec![(start, 0)];
            while let Some(&mut (v, ref mut next)) = stack.last_mut() {
                let adj = &self.adjacency[v];
                if *next < adj.len() {
                    let u = adj[*next].0;
                    *next += 1;
                    if !seen[u] {
                        seen[u] = true;
                        tree.push((v, u));
                        stack.push((u, 0));
                    }
                } else {
                    stack.pop();
                }
            }
        }
        tree
    }
}

/// Cycle formed by the tree paths from `a` and `b` to their lowest common
/// ancestor, closed by the edge `(a, b)`.
fn tree_cycle(parent: &[Option<usize>], depth: &[usize], a: usize, b: usize) -> Vec<usize> {
    let (mut x, mut y) = (a, b);
    let mut left = vec![x];
    let mut right = vec![y];
    while depth[x] > depth[y] {
        x = parent[x].expect("non-root has parent");
        left.push(x);
    }
    while depth[y] > depth[x] {
        y = parent[y].expect("non-root has parent");
        right.push(y);
    }
    while x != y {
        x = parent[x].expect("non-root has parent");
        y = parent[y].expect("non-root has parent");
        left.push(x);
        right.push(y);
    }
    right.pop();
    right.reverse();
    left.extend(right);
    left
}

/// Proximity graph of circles: an edge joins two circles whose gap is at most
/// `range` (boundary inclusive). For unit circles this is center distance
/// `<= 2 + range`.
pub fn build_circle_graph<F: Scalar>(
    circles: &[Circle<F>],
    range: F,
) -> Result<CommGraph<F>, GraphError> {
    let mut edges = Vec::new();
    for i in 0..circles.len() {
        for j in (i + 1)..circles.len() {
            let (ci, cj) = (&circles[i], &circles[j]);
            if !ci.disjoint(cj) {
                return Err(GraphError::InvalidInstance(format!(
                    "circles {i} and {j} are not disjoint"
                )));
            }
            let gap = ci.gap(cj);
            if gap <= range {
                let (phi_ij, phi_ji) = link_positions(ci, cj)?;
                edges.push(Edge::new(
                    i,
                    j,
                    line_angle(ci, cj)?,
                    phi_ij.radians(),
                    phi_ji.radians(),
                    gap,
                ));
            }
        }
    }
    CommGraph::new(circles.len(), LinkKind::Angle, edges)
}

/// Proximity graph of closed paths: an edge joins two paths whose minimum
/// distance is at most the smaller of their ranges. Link locations are the
/// arc lengths of the closest pair.
pub fn build_path_graph<F: Scalar>(
    paths: &[ClosedPath<F>],
    ranges: &[F],
) -> Result<CommGraph<F>, GraphError> {
    if paths.len() != ranges.len() {
        return Err(GraphError::InvalidArgument(format!(
            "{} paths but {} ranges",
            paths.len(),
            ranges.len()
        )));
    }
    let mut edges = Vec::new();
    for i in 0..paths.len() {
        for j in (i + 1)..paths.len() {
            let cp = min_distance(&paths[i], &paths[j]).map_err(|e| match e {
                GeometryError::OverlappingTrajectories => {
                    GraphError::InvalidInstance(format!("paths {i} and {j} intersect"))
                }
                other => GraphError::Geometry(other),
            })?;
            if cp.distance <= ranges[i].min(ranges[j]) {
                let beta = if cp.distance > F::zero() {
                    wrap(cp.point_i.heading_to(&cp.point_j), F::PI())
                } else {
                    F::zero()
                };
                edges.push(Edge::new(i, j, beta, cp.s_i, cp.s_j, cp.distance));
            }
        }
    }
    CommGraph::new(paths.len(), LinkKind::ArcLength, edges)
}
