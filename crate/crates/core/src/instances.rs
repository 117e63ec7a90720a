//! Deterministic instance generators and the brute-force spanning-tree oracle.

use num_bigint::{BigInt, BigUint};
use num_traits::{Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{energy_tree_optimal, ModelParams};
use crate::error::{Error, Result};
use crate::graph::{tree_fluxes, validate_network, Network, SpanningTree, UnionFind};

/// Default enumeration cap for brute-force searches.
pub const DEFAULT_TREE_CAP: u64 = 1_000_000;

/// Shape of the leaf-like planar test graph.
///
/// Vertices are the points of a triangular lattice (spacing `spacing`, one row
/// through the leaf axis) that fall inside an ellipse with semi-axes
/// `semi_major` along x and `semi_minor` along y whose left tip sits at the
/// origin. Lattice neighbours inside the ellipse are joined, which triangulates
/// the region. Every vertex except the tip is then displaced by a uniform
/// offset of at most `jitter · spacing` per coordinate, drawn from a ChaCha8
/// stream keyed by `jitter_seed`; for `jitter < 0.2` no lattice triangle flips,
/// so the embedding stays planar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeafSpec {
    pub semi_major: f64,
    pub semi_minor: f64,
    pub spacing: f64,
    pub jitter: f64,
    pub jitter_seed: u64,
}

impl Default for LeafSpec {
    /// 122 vertices and 323 edges.
    fn default() -> Self {
        LeafSpec {
            semi_major: 7.56,
            semi_minor: 4.36,
            spacing: 1.0,
            jitter: 0.15,
            jitter_seed: 122,
        }
    }
}

/// Generated leaf together with its stem (the single source, left-most vertex).
#[derive(Debug, Clone, PartialEq)]
pub struct Leaf {
    pub network: Network,
    pub stem_vertex: usize,
}

/// Builds the leaf graph described by `spec`.
///
/// The stem carries source 1 and every other vertex a sink of `1/(|V|−1)`.
/// Lengths are Euclidean distances of the (jittered) coordinates.
pub fn generate_leaf(spec: &LeafSpec) -> Result<Leaf> {
    let LeafSpec {
        semi_major: a,
        semi_minor: b,
        spacing: h,
        jitter,
        jitter_seed,
    } = *spec;
    if !(a > 0.0 && b > 0.0 && h > 0.0) || !(0.0..0.2).contains(&jitter) {
        return Err(Error::Config(format!("degenerate leaf spec {spec:?}")));
    }
    let dy = h * 3f64.sqrt() / 2.0;
    let rows = (b / dy).floor() as i64 + 1;
    let cols = (2.0 * a / h).ceil() as i64 + 1;
    let inside = |x: f64, y: f64| {
        let u = (x - a) / a;
        let v = y / b;
        u * u + v * v <= 1.0 + 1e-12
    };
    let lattice_point = |r: i64, k: i64| {
        let offset = if r.rem_euclid(2) == 1 { h / 2.0 } else { 0.0 };
        (k as f64 * h + offset, r as f64 * dy)
    };

    // row-major over (r, k) so vertex ids are reproducible
    let mut id = std::collections::HashMap::new();
    let mut coords = Vec::new();
    for r in -rows..=rows {
        for k in -1..=cols {
            let (x, y) = lattice_point(r, k);
            if inside(x, y) {
                id.insert((r, k), coords.len());
                coords.push([x, y]);
            }
        }
    }
    let n = coords.len();
    if n < 2 {
        return Err(Error::Config(format!("leaf spec {spec:?} yields {n} vertices")));
    }

    let mut edges = Vec::new();
    for r in -rows..=rows {
        for k in -1..=cols {
            let Some(&v) = id.get(&(r, k)) else { continue };
            let up = if r.rem_euclid(2) == 0 {
                [(r + 1, k - 1), (r + 1, k)]
            } else {
                [(r + 1, k), (r + 1, k + 1)]
            };
            for key in [(r, k + 1), up[0], up[1]] {
                if let Some(&w) = id.get(&key) {
                    edges.push((v.min(w), v.max(w)));
                }
            }
        }
    }
    edges.sort_unstable();

    let tip = id[&(0, 0)];
    let mut rng = ChaCha8Rng::seed_from_u64(jitter_seed);
    for (v, c) in coords.iter_mut().enumerate() {
        let dx = rng.random_range(-1.0..=1.0) * jitter * h;
        let dy = rng.random_range(-1.0..=1.0) * jitter * h;
        if v != tip {
            c[0] += dx;
            c[1] += dy;
        }
    }
    let stem_vertex = (0..n)
        .min_by(|&p, &q| coords[p][0].total_cmp(&coords[q][0]))
        .expect("non-empty");

    let lengths = edges
        .iter()
        .map(|&(i, j)| euclid(coords[i], coords[j]))
        .collect();
    let sources = single_source(n, stem_vertex);
    let network = Network::new(n, edges, lengths, sources, Some(coords))?;
    validate_network(&network).into_result()?;
    Ok(Leaf {
        network,
        stem_vertex,
    })
}

fn euclid(p: [f64; 2], q: [f64; 2]) -> f64 {
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
}

/// Unit source at `source`, uniform sinks elsewhere.
pub fn single_source(n: usize, source: usize) -> Vec<f64> {
    let sink = -1.0 / (n as f64 - 1.0);
    (0..n).map(|v| if v == source { 1.0 } else { sink }).collect()
}

/// A named corpus instance.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedInstance {
    pub name: String,
    pub network: Network,
}

fn unit_instance(
    name: &str,
    n: usize,
    edges: Vec<(usize, usize)>,
    coords: Option<Vec<[f64; 2]>>,
) -> NamedInstance {
    let lengths = vec![1.0; edges.len()];
    NamedInstance {
        name: name.to_string(),
        network: Network::new(n, edges, lengths, single_source(n, 0), coords)
            .expect("canonical instance is well formed"),
    }
}

fn grid(rows: usize, cols: usize) -> NamedInstance {
    let at = |r: usize, c: usize| r * cols + c;
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                edges.push((at(r, c), at(r, c + 1)));
            }
            if r + 1 < rows {
                edges.push((at(r, c), at(r + 1, c)));
            }
        }
    }
    let coords = (0..rows * cols)
        .map(|v| [(v % cols) as f64, (v / cols) as f64])
        .collect();
    unit_instance(&format!("grid{rows}x{cols}"), rows * cols, edges, Some(coords))
}

/// Random connected graph on `n` points of the unit square with Euclidean
/// lengths: a random attachment tree plus extra chords, at most `max_edges` edges.
fn random_connected(name: String, seed: u64, n: usize, max_edges: usize) -> NamedInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords: Vec<[f64; 2]> = (0..n)
        .map(|_| [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)])
        .collect();
    let mut edges = Vec::new();
    for v in 1..n {
        let u = rng.random_range(0..v);
        edges.push((u, v));
    }
    let extra = rng.random_range(1..=max_edges.saturating_sub(n - 1).max(1));
    let mut attempts = 0;
    while edges.len() < n - 1 + extra && attempts < 1000 {
        attempts += 1;
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        let e = (u.min(v), u.max(v));
        if u != v && !edges.contains(&e) {
            edges.push(e);
        }
    }
    edges.sort_unstable();
    let lengths = edges
        .iter()
        .map(|&(i, j)| euclid(coords[i], coords[j]).max(1e-3))
        .collect();
    NamedInstance {
        name,
        network: Network::new(n, edges, lengths, single_source(n, 0), Some(coords))
            .expect("random instance is well formed"),
    }
}

/// The fixed test corpus: small named graphs plus 20 seeded random graphs
/// with at most 8 vertices and 14 edges. Vertex 0 is the unit source.
pub fn canonical_instances() -> Vec<NamedInstance> {
    let s3 = 3f64.sqrt() / 2.0;
    let mut out = vec![
        unit_instance("path2", 2, vec![(0, 1)], Some(vec![[0.0, 0.0], [1.0, 0.0]])),
        unit_instance(
            "path3",
            3,
            vec![(0, 1), (1, 2)],
            Some(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]),
        ),
        unit_instance(
            "triangle",
            3,
            vec![(0, 1), (1, 2), (0, 2)],
            Some(vec![[0.0, 0.0], [1.0, 0.0], [0.5, s3]]),
        ),
        unit_instance(
            "cycle4",
            4,
            vec![(0, 1), (1, 2), (2, 3), (0, 3)],
            Some(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]),
        ),
        unit_instance(
            "star5",
            5,
            vec![(0, 1), (0, 2), (0, 3), (0, 4)],
            Some(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]]),
        ),
        grid(3, 3),
        unit_instance(
            "k5",
            5,
            (0..5).flat_map(|i| (i + 1..5).map(move |j| (i, j))).collect(),
            None,
        ),
    ];
    for k in 0..20u64 {
        let n = 4 + (k as usize % 5);
        out.push(random_connected(format!("random{k:02}"), 0xC0FFEE + k, n, 14));
    }
    out
}

/// Looks up a builtin instance: `leaf122` or any canonical name.
pub fn builtin(name: &str) -> Option<Network> {
    if name == "leaf122" {
        return generate_leaf(&LeafSpec::default()).ok().map(|l| l.network);
    }
    canonical_instances()
        .into_iter()
        .find(|i| i.name == name)
        .map(|i| i.network)
}

/// Exact number of spanning trees: determinant of the reduced Laplacian,
/// computed with fraction-free (Bareiss) elimination over big integers.
/// Parallel edges count with multiplicity; self-loops are ignored.
pub fn count_spanning_trees(net: &Network) -> BigUint {
    let n = net.vertex_count();
    if n == 1 {
        return BigUint::from(1u32);
    }
    let m = n - 1;
    let mut a = vec![vec![BigInt::zero(); m]; m];
    for &(i, j) in net.edges() {
        if i == j {
            continue;
        }
        for v in [i, j] {
            if v > 0 {
                a[v - 1][v - 1] += 1;
            }
        }
        if i > 0 && j > 0 {
            a[i - 1][j - 1] -= 1;
            a[j - 1][i - 1] -= 1;
        }
    }
    let mut sign = 1i32;
    let mut prev = BigInt::from(1);
    for k in 0..m {
        if a[k][k].is_zero() {
            let Some(p) = (k + 1..m).find(|&r| !a[r][k].is_zero()) else {
                return BigUint::zero();
            };
            a.swap(k, p);
            sign = -sign;
        }
        for i in k + 1..m {
            for j in k + 1..m {
                let v = (&a[i][j] * &a[k][k] - &a[i][k] * &a[k][j]) / &prev;
                a[i][j] = v;
            }
            a[i][k] = BigInt::zero();
        }
        prev = a[k][k].clone();
    }
    let det = if sign < 0 { -&a[m - 1][m - 1] } else { a[m - 1][m - 1].clone() };
    det.abs().to_biguint().expect("non-negative")
}

/// Lazy enumeration of all spanning trees in lexicographic order of their
/// sorted edge-index lists.
///
/// Edges are decided in index order: include the edge if it closes no cycle,
/// then exclude it if the remaining edges can still span the graph. Every
/// branch that survives both checks ends in a tree, so no work is wasted on
/// dead ends.
pub struct SpanningTrees<'a> {
    net: &'a Network,
    chosen: Vec<usize>,
    frames: Vec<Frame>,
    started: bool,
}

/// Decision on one edge: branch 0 tries to include it, 1 to exclude it, 2 is exhausted.
#[derive(Debug, Clone, Copy)]
struct Frame {
    edge: usize,
    branch: u8,
    included: bool,
}

impl<'a> SpanningTrees<'a> {
    fn acyclic_with(&self, extra: usize) -> bool {
        let mut uf = UnionFind::new(self.net.vertex_count());
        for &e in &self.chosen {
            let (i, j) = self.net.edge(e);
            uf.union(i, j);
        }
        let (i, j) = self.net.edge(extra);
        uf.union(i, j)
    }

    /// Can `chosen` ∪ edges[from..] still connect every vertex?
    fn spannable(&self, from: usize) -> bool {
        let n = self.net.vertex_count();
        let mut uf = UnionFind::new(n);
        let mut joined = 0;
        for &e in self.chosen.iter() {
            let (i, j) = self.net.edge(e);
            joined += uf.union(i, j) as usize;
        }
        for e in from..self.net.edge_count() {
            let (i, j) = self.net.edge(e);
            joined += uf.union(i, j) as usize;
        }
        joined + 1 == n
    }
}

impl Iterator for SpanningTrees<'_> {
    type Item = SpanningTree;

    fn next(&mut self) -> Option<SpanningTree> {
        let n = self.net.vertex_count();
        if !self.started {
            self.started = true;
            if n == 1 {
                return Some(SpanningTree::from_sorted_unchecked(self.net, Vec::new()));
            }
            if !self.spannable(0) {
                return None;
            }
            self.frames.push(Frame { edge: 0, branch: 0, included: false });
        }
        while let Some(&Frame { edge, branch, included }) = self.frames.last() {
            let top = self.frames.len() - 1;
            if edge >= self.net.edge_count() {
                self.frames.pop();
                continue;
            }
            match branch {
                0 => {
                    self.frames[top].branch = 1;
                    if self.acyclic_with(edge) {
                        self.chosen.push(edge);
                        self.frames[top].included = true;
                        if self.chosen.len() + 1 == n {
                            return Some(SpanningTree::from_sorted_unchecked(
                                self.net,
                                self.chosen.clone(),
                            ));
                        }
                        self.frames.push(Frame { edge: edge + 1, branch: 0, included: false });
                    }
                }
                1 => {
                    self.frames[top].branch = 2;
                    if included {
                        self.chosen.pop();
                        self.frames[top].included = false;
                    }
                    if self.spannable(edge + 1) {
                        self.frames.push(Frame { edge: edge + 1, branch: 0, included: false });
                    }
                }
                _ => {
                    self.frames.pop();
                }
            }
        }
        None
    }
}

/// Enumerates every spanning tree, refusing when the matrix-tree count exceeds `cap`.
pub fn enumerate_spanning_trees(net: &Network, cap: u64) -> Result<SpanningTrees<'_>> {
    let count = count_spanning_trees(net);
    if count > BigUint::from(cap) {
        return Err(Error::TooManyTrees { count, cap });
    }
    Ok(SpanningTrees {
        net,
        chosen: Vec::new(),
        frames: Vec::new(),
        started: false,
    })
}

/// Global minimum of the tree-optimal energy over all spanning trees.
///
/// Ties keep the lexicographically first tree.
pub fn brute_force_optimum(
    net: &Network,
    params: &ModelParams,
    cap: u64,
) -> Result<(SpanningTree, f64)> {
    validate_network(net).into_result()?;
    let mut best: Option<(SpanningTree, f64)> = None;
    for tree in enumerate_spanning_trees(net, cap)? {
        let energy = energy_tree_optimal(net, &tree_fluxes(net, &tree)?, params);
        if best.as_ref().is_none_or(|(_, b)| energy < *b) {
            best = Some((tree, energy));
        }
    }
    best.ok_or_else(|| Error::Usage("network has no spanning tree".into()))
}

/// Spanning-tree count as `f64` (saturating), for reporting.
pub fn tree_count_f64(net: &Network) -> f64 {
    count_spanning_trees(net).to_f64().unwrap_or(f64::INFINITY)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn by_name(name: &str) -> Network {
        builtin(name).unwrap()
    }

    #[test]
    fn default_leaf_counts() {
        let leaf = generate_leaf(&LeafSpec::default()).unwrap();
        assert_eq!(leaf.network.vertex_count(), 122);
        assert_eq!(leaf.network.edge_count(), 323);
        let total: f64 = leaf.network.sources().iter().sum();
        assert!(total.abs() <= 1e-12);
    }

    #[test]
    fn leaf_sources_and_lengths() {
        let spec = LeafSpec {
            semi_major: 4.0,
            semi_minor: 2.0,
            spacing: 0.8,
            jitter: 0.1,
            jitter_seed: 7,
        };
        for spec in [spec, LeafSpec::default()] {
            let leaf = generate_leaf(&spec).unwrap();
            let net = &leaf.network;
            let n = net.vertex_count();
            let coords = net.coordinates().unwrap();
            assert_eq!(net.sources()[leaf.stem_vertex], 1.0);
            for v in (0..n).filter(|&v| v != leaf.stem_vertex) {
                assert_eq!(net.sources()[v], -1.0 / (n as f64 - 1.0));
                assert!(coords[v][0] > coords[leaf.stem_vertex][0]);
            }
            for (k, &(i, j)) in net.edges().iter().enumerate() {
                assert!((net.lengths()[k] - euclid(coords[i], coords[j])).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_leaf_rejected() {
        let tiny = LeafSpec {
            semi_major: 0.1,
            semi_minor: 0.1,
            ..LeafSpec::default()
        };
        assert!(generate_leaf(&tiny).is_err());
        let bad = LeafSpec {
            spacing: 0.0,
            ..LeafSpec::default()
        };
        assert!(generate_leaf(&bad).is_err());
    }

    #[test]
    fn corpus_is_valid_and_small() {
        let corpus = canonical_instances();
        assert_eq!(corpus.len(), 27);
        for inst in &corpus {
            assert!(validate_network(&inst.network).is_valid(), "{}", inst.name);
            if inst.name.starts_with("random") {
                assert!(inst.network.vertex_count() <= 8);
                assert!(inst.network.edge_count() <= 14);
            }
        }
    }

    #[test]
    fn tree_counts() {
        assert_eq!(count_spanning_trees(&by_name("triangle")), BigUint::from(3u32));
        assert_eq!(count_spanning_trees(&by_name("cycle4")), BigUint::from(4u32));
        assert_eq!(count_spanning_trees(&by_name("grid3x3")), BigUint::from(192u32));
        assert_eq!(count_spanning_trees(&by_name("k5")), BigUint::from(125u32));
        assert_eq!(count_spanning_trees(&by_name("star5")), BigUint::from(1u32));
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(enumerate_spanning_trees(&by_name("triangle"), 10).unwrap().count(), 3);
        assert_eq!(enumerate_spanning_trees(&by_name("cycle4"), 10).unwrap().count(), 4);
        assert_eq!(enumerate_spanning_trees(&by_name("k5"), 1000).unwrap().count(), 125);
    }

    #[test]
    fn enumeration_refuses_above_cap() {
        match enumerate_spanning_trees(&by_name("k5"), 100) {
            Err(Error::TooManyTrees { count, cap }) => {
                assert_eq!(count, BigUint::from(125u32));
                assert_eq!(cap, 100);
            }
            _ => panic!("expected refusal"),
        }
    }

    #[test]
    fn enumeration_is_lexicographic_and_distinct() {
        let trees: Vec<Vec<usize>> = enumerate_spanning_trees(&by_name("grid3x3"), 1000)
            .unwrap()
            .map(|t| t.edges().to_vec())
            .collect();
        assert!(trees.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn brute_force_two_node() {
        let net = by_name("path2");
        for gamma in [0.2, 0.5, 1.0] {
            let params = ModelParams::new(gamma, 1.5).unwrap();
            let (tree, e) = brute_force_optimum(&net, &params, 10).unwrap();
            assert_eq!(tree.edges(), &[0]);
            let expected = params.tree_prefactor() * 1f64.powf(params.flux_exponent()) * 1.0;
            assert!((e - expected).abs() <= 1e-15 * expected);
        }
    }

    #[test]
    fn brute_force_triangle_picks_star() {
        let params = ModelParams::new(0.5, 1.0).unwrap();
        let (tree, e) = brute_force_optimum(&by_name("triangle"), &params, 10).unwrap();
        assert_eq!(tree.edges(), &[0, 2]);
        let a = params.flux_exponent();
        assert!((e - 3.0 * 2.0 * 0.5f64.powf(a)).abs() < 1e-14);
    }
}
