//! Flux-induced orientation and global reaching centrality (GRC).

use serde::Serialize;

use crate::descent::McSummary;
use crate::error::{Error, Result};
use crate::graph::{reachable_set, tree_fluxes, FluxAssignment, Network};

/// Directed graph induced by flux signs; zero-flux edges are dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct OrientedNetwork {
    vertex_count: usize,
    directed_edges: Vec<(usize, usize)>,
    out_adj: Vec<Vec<usize>>,
}

impl OrientedNetwork {
    pub fn new(vertex_count: usize, directed_edges: Vec<(usize, usize)>) -> Result<Self> {
        let mut out_adj = vec![Vec::new(); vertex_count];
        for &(a, b) in &directed_edges {
            if a >= vertex_count || b >= vertex_count || a == b {
                return Err(Error::Usage(format!("invalid directed edge {a}->{b}")));
            }
            out_adj[a].push(b);
        }
        Ok(OrientedNetwork {
            vertex_count,
            directed_edges,
            out_adj,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn directed_edges(&self) -> &[(usize, usize)] {
        &self.directed_edges
    }

    pub fn out_adjacency(&self) -> &[Vec<usize>] {
        &self.out_adj
    }

    pub fn in_degree(&self, v: usize) -> usize {
        self.directed_edges.iter().filter(|&&(_, b)| b == v).count()
    }

    pub fn out_degree(&self, v: usize) -> usize {
        self.out_adj[v].len()
    }
}

/// Default cutoff below which a flux counts as zero: `1e-12 · max|S|`.
pub fn default_zero_tol(net: &Network) -> f64 {
    1e-12 * net.max_abs_source()
}

/// `i → j` when `Q_ij > zero_tol`, `j → i` when `Q_ij < −zero_tol`.
pub fn orient_by_flux(net: &Network, q: &FluxAssignment, zero_tol: f64) -> OrientedNetwork {
    let directed = net
        .edges()
        .iter()
        .zip(q.values())
        .filter_map(|(&(i, j), &q)| {
            if q > zero_tol {
                Some((i, j))
            } else if q < -zero_tol {
                Some((j, i))
            } else {
                None
            }
        })
        .collect();
    OrientedNetwork::new(net.vertex_count(), directed).expect("edges come from a valid network")
}

fn require_two(onet: &OrientedNetwork) -> Result<()> {
    if onet.vertex_count < 2 {
        return Err(Error::Domain(
            "reaching centrality needs at least two vertices".into(),
        ));
    }
    Ok(())
}

/// Fraction of the other vertices reachable from `v` along directed edges.
pub fn local_reaching_centrality(onet: &OrientedNetwork, v: usize) -> Result<f64> {
    require_two(onet)?;
    let reached = reachable_set(&onet.out_adj, v)?;
    Ok(reached.len() as f64 / (onet.vertex_count - 1) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrcReport {
    pub local_cr: Vec<f64>,
    pub cr_max: f64,
    pub grc: f64,
}

fn report_from(local_cr: Vec<f64>) -> GrcReport {
    let n = local_cr.len();
    let cr_max = local_cr.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let grc = local_cr.iter().map(|c| cr_max - c).sum::<f64>() / (n - 1) as f64;
    GrcReport { local_cr, cr_max, grc }
}

/// `GRC = Σ_i (C_R^max − C_R(i)) / (|V| − 1)`.
pub fn grc(onet: &OrientedNetwork) -> Result<GrcReport> {
    require_two(onet)?;
    let local = (0..onet.vertex_count)
        .map(|v| local_reaching_centrality(onet, v))
        .collect::<Result<Vec<_>>>()?;
    Ok(report_from(local))
}

/// Weighted variant: the local centrality of `v` is the total `|S_j|` of the
/// sinks reachable from `v`, divided by the total sink mass. Normalization of
/// the aggregate is the same `1/(|V| − 1)` as the unweighted measure.
pub fn grc_weighted(onet: &OrientedNetwork, sources: &[f64]) -> Result<GrcReport> {
    require_two(onet)?;
    if sources.len() != onet.vertex_count {
        return Err(Error::Usage("source vector length mismatch".into()));
    }
    let sink_mass: f64 = sources.iter().filter(|&&s| s < 0.0).map(|s| -s).sum();
    if !(sink_mass > 0.0) {
        return Err(Error::Domain("weighted centrality needs at least one sink".into()));
    }
    let local = (0..onet.vertex_count)
        .map(|v| {
            let reached = reachable_set(&onet.out_adj, v)?;
            let mass: f64 = reached
                .iter()
                .map(|&w| sources[w])
                .filter(|&s| s < 0.0)
                .map(|s| -s)
                .sum();
            Ok(mass / sink_mass)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(report_from(local))
}

/// GRC of the network oriented by `q` with the default zero cutoff.
pub fn flux_grc(net: &Network, q: &FluxAssignment) -> Result<GrcReport> {
    grc(&orient_by_flux(net, q, default_zero_tol(net)))
}

/// GRC of every final tree in a Monte-Carlo summary, in run order.
pub fn run_grc_values(net: &Network, summary: &McSummary) -> Result<Vec<f64>> {
    summary
        .runs
        .iter()
        .map(|r| Ok(flux_grc(net, &tree_fluxes(net, &r.final_tree)?)?.grc))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::SpanningTree;

    fn directed_path(n: usize) -> OrientedNetwork {
        OrientedNetwork::new(n, (0..n - 1).map(|k| (k, k + 1)).collect()).unwrap()
    }

    #[test]
    fn orientation_examples() {
        let net = Network::new(
            3,
            vec![(0, 1), (1, 2)],
            vec![1.0, 1.0],
            vec![1.0, -0.5, -0.5],
            None,
        )
        .unwrap();
        let tree = SpanningTree::new(&net, vec![0, 1]).unwrap();
        let q = tree_fluxes(&net, &tree).unwrap();
        let o = orient_by_flux(&net, &q, default_zero_tol(&net));
        assert_eq!(o.directed_edges(), &[(0, 1), (1, 2)]);

        let quiet = net.with_sources(vec![0.0; 3]).unwrap();
        let q = tree_fluxes(&quiet, &tree).unwrap();
        assert!(orient_by_flux(&quiet, &q, 0.0).directed_edges().is_empty());
    }

    #[test]
    fn negative_flux_reverses() {
        let net = Network::new(2, vec![(0, 1)], vec![1.0], vec![-1.0, 1.0], None).unwrap();
        let o = orient_by_flux(&net, &FluxAssignment(vec![-1.0]), 0.0);
        assert_eq!(o.directed_edges(), &[(1, 0)]);
    }

    #[test]
    fn local_centrality_on_path() {
        let p = directed_path(3);
        assert_eq!(local_reaching_centrality(&p, 0).unwrap(), 1.0);
        assert_eq!(local_reaching_centrality(&p, 1).unwrap(), 0.5);
        assert_eq!(local_reaching_centrality(&p, 2).unwrap(), 0.0);
    }

    #[test]
    fn single_vertex_is_a_domain_error() {
        let o = OrientedNetwork::new(1, vec![]).unwrap();
        assert!(matches!(local_reaching_centrality(&o, 0), Err(Error::Domain(_))));
        assert!(matches!(grc(&o), Err(Error::Domain(_))));
    }

    #[test]
    fn grc_closed_forms() {
        for n in 2..12 {
            let star = OrientedNetwork::new(n, (1..n).map(|k| (0, k)).collect()).unwrap();
            assert_eq!(grc(&star).unwrap().grc, 1.0);
            let path = grc(&directed_path(n)).unwrap().grc;
            let expected = n as f64 / (2.0 * (n as f64 - 1.0));
            assert!((path - expected).abs() <= 1e-12);
        }
        assert_eq!(grc(&directed_path(3)).unwrap().grc, 0.75);
    }

    #[test]
    fn rejects_self_loops() {
        assert!(OrientedNetwork::new(2, vec![(1, 1)]).is_err());
    }
}
