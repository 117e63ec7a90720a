//! Random instances and independent reference computations for the test suites.
#![allow(dead_code)]

use optnet::descent::random_spanning_tree;
use optnet::energy::Conductivities;
use optnet::{Network, SpanningTree};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Balanced sources with `max|S| = 1` and no exact zeros.
pub fn random_sources<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let mut s: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mean = s.iter().sum::<f64>() / n as f64;
    s.iter_mut().for_each(|x| *x -= mean);
    let m = s.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    s.iter_mut().for_each(|x| *x /= m);
    let rest: f64 = s[..n - 1].iter().sum();
    s[n - 1] = -rest;
    s
}

/// Connected network on `n` vertices: a random recursive tree plus up to
/// `extra` further edges, lengths uniform in `[0.5, 2]`.
pub fn random_network<R: Rng>(rng: &mut R, n: usize, extra: usize) -> Network {
    let mut edges = Vec::new();
    for v in 1..n {
        edges.push((rng.random_range(0..v), v));
    }
    let mut candidates: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .filter(|&(i, j)| !edges.contains(&(i, j)))
        .collect();
    candidates.shuffle(rng);
    edges.extend(candidates.into_iter().take(extra));
    let lengths = (0..edges.len()).map(|_| rng.random_range(0.5..2.0)).collect();
    let sources = random_sources(rng, n);
    Network::new(n, edges, lengths, sources, None).unwrap()
}

/// Random network with `2..=max_n` vertices and random extra edges.
pub fn any_network<R: Rng>(rng: &mut R, max_n: usize) -> Network {
    let n = rng.random_range(2..=max_n);
    let extra = rng.random_range(0..=n);
    random_network(rng, n, extra)
}

pub fn random_tree<R: Rng>(rng: &mut R, net: &Network) -> SpanningTree {
    random_spanning_tree(net, rng).unwrap()
}

pub fn random_conductivities<R: Rng>(rng: &mut R, net: &Network) -> Conductivities {
    Conductivities((0..net.edge_count()).map(|_| 10f64.powf(rng.random_range(-1.0..1.0))).collect())
}

/// Net outflow `Σ_j Q_ij` at every vertex, with `Q` oriented low → high index.
pub fn outflow(net: &Network, q: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; net.vertex_count()];
    for (e, &(i, j)) in net.edges().iter().enumerate() {
        out[i] += q[e];
        out[j] -= q[e];
    }
    out
}

/// `max_i |Σ_j C_ij (P_i − P_j)/L_ij − S_i|`.
pub fn kirchhoff_max_residual(net: &Network, c: &[f64], p: &[f64]) -> f64 {
    let q: Vec<f64> = net
        .edges()
        .iter()
        .enumerate()
        .map(|(e, &(i, j))| c[e] * (p[i] - p[j]) / net.lengths()[e])
        .collect();
    outflow(net, &q)
        .iter()
        .zip(net.sources())
        .map(|(o, s)| (o - s).abs())
        .fold(0.0, f64::max)
}

/// Tree fluxes by brute force: for each tree edge, flood-fill one side of
/// the cut and sum its sources.
pub fn tree_flux_oracle(net: &Network, tree: &SpanningTree) -> Vec<f64> {
    let n = net.vertex_count();
    let mut q = vec![0.0; net.edge_count()];
    for &e in tree.edges() {
        let (i, _) = net.edge(e);
        let mut seen = vec![false; n];
        let mut stack = vec![i];
        seen[i] = true;
        while let Some(u) = stack.pop() {
            for &(w, f) in net.neighbors(u) {
                if f != e && tree.contains(f) && !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        q[e] = (0..n).filter(|&v| seen[v]).map(|v| net.sources()[v]).sum();
    }
    q
}

/// Shortest-path distances from `src`.
pub fn dijkstra(net: &Network, src: usize) -> Vec<f64> {
    let n = net.vertex_count();
    let mut d = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    d[src] = 0.0;
    for _ in 0..n {
        let u = (0..n)
            .filter(|&v| !done[v])
            .min_by(|&a, &b| d[a].total_cmp(&d[b]))
            .unwrap();
        done[u] = true;
        for &(w, e) in net.neighbors(u) {
            let nd = d[u] + net.lengths()[e];
            if nd < d[w] {
                d[w] = nd;
            }
        }
    }
    d
}

/// Optimal `γ = 1` energy for a single source: every sink is served along a
/// shortest path, so `E = 2√ν Σ_j |S_j| d(src, j)`.
pub fn single_source_optimum(net: &Network, src: usize, nu: f64) -> f64 {
    let d = dijkstra(net, src);
    2.0 * nu.sqrt()
        * (0..net.vertex_count())
            .filter(|&v| v != src)
            .map(|v| -net.sources()[v] * d[v])
            .sum::<f64>()
}
