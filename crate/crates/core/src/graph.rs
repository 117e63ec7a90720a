//! Network representation, spanning trees, cut partitions and closed-form tree fluxes.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on the global balance `Σ S_i = 0`.
pub const SOURCE_BALANCE_TOL: f64 = 1e-12;

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Merges the sets of `a` and `b`; returns false if they were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}

/// Undirected connected graph with edge lengths and nodal source strengths.
///
/// Edges are stored with `i < j`; every signed per-edge quantity in this crate
/// follows that orientation (positive means flow from `i` to `j`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkJson", into = "NetworkJson")]
pub struct Network {
    vertex_count: usize,
    edges: Vec<(usize, usize)>,
    lengths: Vec<f64>,
    sources: Vec<f64>,
    coordinates: Option<Vec<[f64; 2]>>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

#[derive(Serialize, Deserialize)]
struct NetworkJson {
    vertex_count: usize,
    edges: Vec<[usize; 2]>,
    lengths: Vec<f64>,
    sources: Vec<f64>,
    coordinates: Option<Vec<[f64; 2]>>,
}

impl TryFrom<NetworkJson> for Network {
    type Error = Error;

    fn try_from(raw: NetworkJson) -> Result<Self> {
        Network::new(
            raw.vertex_count,
            raw.edges.into_iter().map(|[i, j]| (i, j)).collect(),
            raw.lengths,
            raw.sources,
            raw.coordinates,
        )
    }
}

impl From<Network> for NetworkJson {
    fn from(net: Network) -> Self {
        NetworkJson {
            vertex_count: net.vertex_count,
            edges: net.edges.into_iter().map(|(i, j)| [i, j]).collect(),
            lengths: net.lengths,
            sources: net.sources,
            coordinates: net.coordinates,
        }
    }
}

impl Network {
    /// Builds a network, normalizing every edge to `i < j`.
    ///
    /// Only structural problems are rejected here (array sizes, out-of-range
    /// vertex ids). Semantic problems such as disconnection or unbalanced
    /// sources are reported by [`validate_network`].
    pub fn new(
        vertex_count: usize,
        edges: Vec<(usize, usize)>,
        lengths: Vec<f64>,
        sources: Vec<f64>,
        coordinates: Option<Vec<[f64; 2]>>,
    ) -> Result<Self> {
        if vertex_count == 0 {
            return Err(Error::Malformed("vertex_count must be positive".into()));
        }
        if lengths.len() != edges.len() {
            return Err(Error::Malformed(format!(
                "{} lengths for {} edges",
                lengths.len(),
                edges.len()
            )));
        }
        if sources.len() != vertex_count {
            return Err(Error::Malformed(format!(
                "{} sources for {} vertices",
                sources.len(),
                vertex_count
            )));
        }
        if let Some(coords) = &coordinates {
            if coords.len() != vertex_count {
                return Err(Error::Malformed(format!(
                    "{} coordinates for {} vertices",
                    coords.len(),
                    vertex_count
                )));
            }
        }
        let mut normalized = Vec::with_capacity(edges.len());
        for (k, &(a, b)) in edges.iter().enumerate() {
            if a >= vertex_count || b >= vertex_count {
                return Err(Error::Malformed(format!(
                    "edge {k} ({a},{b}) references a vertex outside 0..{vertex_count}"
                )));
            }
            normalized.push((a.min(b), a.max(b)));
        }
        let mut adjacency = vec![Vec::new(); vertex_count];
        for (k, &(i, j)) in normalized.iter().enumerate() {
            if i != j {
                adjacency[i].push((j, k));
                adjacency[j].push((i, k));
            }
        }
        Ok(Network {
            vertex_count,
            edges: normalized,
            lengths,
            sources,
            coordinates,
            adjacency,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> (usize, usize) {
        self.edges[e]
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn sources(&self) -> &[f64] {
        &self.sources
    }

    pub fn coordinates(&self) -> Option<&[[f64; 2]]> {
        self.coordinates.as_deref()
    }

    /// `(neighbor, edge index)` pairs incident to `v`.
    pub fn neighbors(&self, v: usize) -> &[(usize, usize)] {
        &self.adjacency[v]
    }

    /// Copy of this network with every source multiplied by `factor`.
    pub fn with_scaled_sources(&self, factor: f64) -> Network {
        let mut out = self.clone();
        out.sources.iter_mut().for_each(|s| *s *= factor);
        out
    }

    /// Copy of this network with the given sources.
    pub fn with_sources(&self, sources: Vec<f64>) -> Result<Network> {
        Network::new(
            self.vertex_count,
            self.edges.clone(),
            self.lengths.clone(),
            sources,
            self.coordinates.clone(),
        )
    }

    /// Largest absolute source strength (0 for an all-zero source vector).
    pub fn max_abs_source(&self) -> f64 {
        self.sources.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    /// Looks up the index of edge `{a, b}`.
    pub fn find_edge(&self, a: usize, b: usize) -> Option<usize> {
        self.adjacency
            .get(a)?
            .iter()
            .find(|&&(n, _)| n == b)
            .map(|&(_, e)| e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Disconnected { unreachable: Vec<usize> },
    UnbalancedSources { total: f64 },
    NonpositiveLength { edge: usize, length: f64 },
    DuplicateEdge { first: usize, duplicate: usize },
    SelfLoop { edge: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Disconnected { unreachable } => {
                write!(f, "disconnected: {} vertices unreachable from 0", unreachable.len())
            }
            Violation::UnbalancedSources { total } => write!(f, "sources sum to {total:e}, not 0"),
            Violation::NonpositiveLength { edge, length } => {
                write!(f, "edge {edge} has nonpositive length {length}")
            }
            Violation::DuplicateEdge { first, duplicate } => {
                write!(f, "edge {duplicate} duplicates edge {first}")
            }
            Violation::SelfLoop { edge } => write!(f, "edge {edge} is a self-loop"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidNetwork(self))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        for (k, v) in self.violations.iter().enumerate() {
            if k > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks the standing assumptions on a network: connectivity, balanced
/// sources, positive lengths and a simple edge set.
pub fn validate_network(net: &Network) -> ValidationReport {
    let mut violations = Vec::new();

    let mut seen = std::collections::HashMap::new();
    for (k, &(i, j)) in net.edges.iter().enumerate() {
        if i == j {
            violations.push(Violation::SelfLoop { edge: k });
        } else if let Some(&first) = seen.get(&(i, j)) {
            violations.push(Violation::DuplicateEdge {
                first,
                duplicate: k,
            });
        } else {
            seen.insert((i, j), k);
        }
    }

    for (k, &l) in net.lengths.iter().enumerate() {
        if !(l > 0.0) || !l.is_finite() {
            violations.push(Violation::NonpositiveLength { edge: k, length: l });
        }
    }

    let total: f64 = net.sources.iter().sum();
    if !(total.abs() <= SOURCE_BALANCE_TOL) {
        violations.push(Violation::UnbalancedSources { total });
    }

    let mut uf = UnionFind::new(net.vertex_count);
    for &(i, j) in &net.edges {
        uf.union(i, j);
    }
    let root = uf.find(0);
    let unreachable: Vec<usize> = (0..net.vertex_count)
        .filter(|&v| uf.find(v) != root)
        .collect();
    if !unreachable.is_empty() {
        violations.push(Violation::Disconnected { unreachable });
    }

    ValidationReport { violations }
}

/// A set of `|V| - 1` edges of a network forming a spanning tree.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpanningTree {
    vertex_count: usize,
    edge_total: usize,
    edges: Vec<usize>,
}

impl SpanningTree {
    /// Checks that `edges` (indices into `net.edges()`) span `net` without cycles.
    pub fn new(net: &Network, mut edges: Vec<usize>) -> Result<Self> {
        edges.sort_unstable();
        edges.dedup();
        let n = net.vertex_count();
        if edges.len() + 1 != n {
            return Err(Error::Usage(format!(
                "a spanning tree of {n} vertices needs {} edges, got {}",
                n - 1,
                edges.len()
            )));
        }
        let mut uf = UnionFind::new(n);
        for &e in &edges {
            if e >= net.edge_count() {
                return Err(Error::Usage(format!("edge index {e} out of range")));
            }
            let (i, j) = net.edge(e);
            if i == j || !uf.union(i, j) {
                return Err(Error::Usage(format!("edge {e} closes a cycle")));
            }
        }
        Ok(SpanningTree {
            vertex_count: n,
            edge_total: net.edge_count(),
            edges,
        })
    }

    /// Sorted edge indices of the tree.
    pub fn edges(&self) -> &[usize] {
        &self.edges
    }

    pub fn contains(&self, e: usize) -> bool {
        self.edges.binary_search(&e).is_ok()
    }

    /// True when this tree was built over a network with the same vertex and edge counts.
    pub fn fits(&self, net: &Network) -> bool {
        self.vertex_count == net.vertex_count() && self.edge_total == net.edge_count()
    }

    pub(crate) fn from_sorted_unchecked(net: &Network, edges: Vec<usize>) -> Self {
        debug_assert!(edges.windows(2).all(|w| w[0] < w[1]));
        SpanningTree {
            vertex_count: net.vertex_count(),
            edge_total: net.edge_count(),
            edges,
        }
    }

    /// Adjacency lists `(neighbor, edge)` restricted to tree edges.
    pub fn adjacency(&self, net: &Network) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.vertex_count];
        for &e in &self.edges {
            let (i, j) = net.edge(e);
            adj[i].push((j, e));
            adj[j].push((i, e));
        }
        adj
    }

    /// Endpoint pairs of the tree edges.
    pub fn edge_pairs(&self, net: &Network) -> Vec<(usize, usize)> {
        self.edges.iter().map(|&e| net.edge(e)).collect()
    }

    fn check_fits(&self, net: &Network) -> Result<()> {
        if self.fits(net) {
            Ok(())
        } else {
            Err(Error::Usage("spanning tree belongs to a different network".into()))
        }
    }
}

/// Signed per-edge flux in the stored `i < j` orientation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxAssignment(pub Vec<f64>);

impl FluxAssignment {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// Net outflow at every vertex; equals the source vector for a conservative flux.
    pub fn net_outflow(&self, net: &Network) -> Vec<f64> {
        let mut out = vec![0.0; net.vertex_count()];
        for (k, &(i, j)) in net.edges().iter().enumerate() {
            out[i] += self.0[k];
            out[j] -= self.0[k];
        }
        out
    }

    /// Largest per-vertex deviation from mass conservation.
    pub fn conservation_error(&self, net: &Network) -> f64 {
        self.net_outflow(net)
            .iter()
            .zip(net.sources())
            .fold(0.0, |m, (o, s)| m.max((o - s).abs()))
    }
}

/// Splits the vertices by removing tree edge `edge`: the first set holds the
/// component of the edge's lower endpoint `i`, the second that of `j`.
pub fn cut_partition(
    net: &Network,
    tree: &SpanningTree,
    edge: usize,
) -> Result<(Vec<usize>, Vec<usize>)> {
    tree.check_fits(net)?;
    if !tree.contains(edge) {
        return Err(Error::Usage(format!("edge {edge} is not a tree edge")));
    }
    let adj = tree.adjacency(net);
    let (i, _) = net.edge(edge);
    let mut side_i = vec![false; net.vertex_count()];
    side_i[i] = true;
    let mut stack = vec![i];
    while let Some(v) = stack.pop() {
        for &(w, e) in &adj[v] {
            if e != edge && !side_i[w] {
                side_i[w] = true;
                stack.push(w);
            }
        }
    }
    let (a, b): (Vec<usize>, Vec<usize>) = (0..net.vertex_count()).partition(|&v| side_i[v]);
    Ok((a, b))
}

/// Fluxes forced by mass conservation on a spanning tree.
///
/// Removing tree edge `(i, j)` leaves components `V_i ∋ i` and `V_j ∋ j`;
/// the flux from `i` to `j` is the net source of `V_i`, equivalently minus
/// that of `V_j`. The symmetric form `Σ_{V_i} S − Σ_{V_j} S` is twice this
/// value when the sources balance. Non-tree edges carry zero flux.
///
/// Subtree sums are accumulated from a traversal rooted at vertex 0 with
/// children visited in increasing vertex order, so the result does not depend
/// on how the network enumerates its edges.
pub fn tree_fluxes(net: &Network, tree: &SpanningTree) -> Result<FluxAssignment> {
    tree.check_fits(net)?;
    let n = net.vertex_count();
    let mut adj = tree.adjacency(net);
    for list in adj.iter_mut() {
        list.sort_unstable();
    }
    let mut parent_edge = vec![usize::MAX; n];
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    visited[0] = true;
    let mut stack = vec![0];
    while let Some(v) = stack.pop() {
        order.push(v);
        for &(w, e) in adj[v].iter().rev() {
            if !visited[w] {
                visited[w] = true;
                parent_edge[w] = e;
                stack.push(w);
            }
        }
    }
    if order.len() != n {
        return Err(Error::Usage("tree does not span the network".into()));
    }

    // subtree[v] = S_v + Σ subtree[child], children summed in increasing id
    let mut subtree = net.sources().to_vec();
    let mut flux = vec![0.0; net.edge_count()];
    for &v in order.iter().rev() {
        let mut acc = net.sources()[v];
        for &(w, e) in &adj[v] {
            if parent_edge[v] != e {
                acc += subtree[w];
            }
        }
        subtree[v] = acc;
        if v != 0 {
            let e = parent_edge[v];
            let (i, _) = net.edge(e);
            // flow from the parent into v's subtree is minus the subtree's net source
            flux[e] = if i == v { subtree[v] } else { -subtree[v] };
        }
    }
    Ok(FluxAssignment(flux))
}

/// Vertices reachable from `start` along directed edges, excluding `start`, in increasing order.
pub fn reachable_set(adjacency: &[Vec<usize>], start: usize) -> Result<Vec<usize>> {
    if start >= adjacency.len() {
        return Err(Error::Usage(format!(
            "start vertex {start} outside 0..{}",
            adjacency.len()
        )));
    }
    let mut seen = vec![false; adjacency.len()];
    seen[start] = true;
    let mut stack = vec![start];
    let mut out = Vec::new();
    while let Some(v) = stack.pop() {
        for &w in &adjacency[v] {
            if w >= adjacency.len() {
                return Err(Error::Usage(format!("adjacency references vertex {w}")));
            }
            if !seen[w] {
                seen[w] = true;
                out.push(w);
                stack.push(w);
            }
        }
    }
    out.sort_unstable();
    Ok(out)
}
