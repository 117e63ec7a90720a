//! Discrete energy descent over spanning trees and its Monte-Carlo restart driver.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{energy_tree_optimal, flux_cost, ModelParams};
use crate::error::{Error, Result};
use crate::graph::{tree_fluxes, validate_network, Network, SpanningTree, UnionFind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescentConfig {
    pub params: ModelParams,
    /// Master seed; run `k` draws from stream `k` of a ChaCha8 generator keyed by it.
    pub seed: u64,
    /// A swap is accepted only if it lowers the energy by more than this fraction.
    pub improvement_rel_tol: f64,
    /// Cap on edge selections per descent.
    pub max_iterations: usize,
    pub record_trace: bool,
}

impl DescentConfig {
    pub fn new(params: ModelParams, seed: u64) -> Self {
        DescentConfig {
            params,
            seed,
            improvement_rel_tol: 1e-12,
            max_iterations: 1_000_000,
            record_trace: false,
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.improvement_rel_tol > 0.0 && self.improvement_rel_tol < 1.0) {
            return Err(Error::Config(format!(
                "improvement_rel_tol must lie in (0, 1), got {}",
                self.improvement_rel_tol
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescentRun {
    pub final_tree: SpanningTree,
    pub final_energy: f64,
    pub swaps_accepted: usize,
    /// Energy after initialization and after every accepted swap.
    pub energy_trace: Option<Vec<f64>>,
}

/// Outcome of independent restarts, in run-index order.
#[derive(Debug, Clone, PartialEq)]
pub struct McSummary {
    pub runs: Vec<DescentRun>,
    /// Index of the lowest-energy run (lowest index among ties).
    pub best_index: usize,
    pub best_energy: f64,
    pub worst_energy: f64,
    /// Population standard deviation of the final energies.
    pub energy_std: f64,
    pub grc_values: Option<Vec<f64>>,
}

impl McSummary {
    pub fn run_count(&self) -> usize {
        self.runs.len()
    }

    pub fn best_run(&self) -> &DescentRun {
        &self.runs[self.best_index]
    }

    pub fn energies(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.final_energy).collect()
    }

    fn from_runs(runs: Vec<DescentRun>) -> Self {
        let energies: Vec<f64> = runs.iter().map(|r| r.final_energy).collect();
        let mut best_index = 0;
        let mut worst = energies[0];
        for (k, &e) in energies.iter().enumerate() {
            if e < energies[best_index] {
                best_index = k;
            }
            worst = worst.max(e);
        }
        let (_, std) = mean_std(&energies);
        McSummary {
            best_energy: energies[best_index],
            worst_energy: worst,
            energy_std: std,
            best_index,
            runs,
            grc_values: None,
        }
    }
}

/// Mean and population standard deviation, accumulated in slice order.
/// Values are shifted by the first one, so a constant slice has zero spread.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let Some(&shift) = values.first() else {
        return (f64::NAN, f64::NAN);
    };
    let n = values.len() as f64;
    let mean = values.iter().map(|v| v - shift).sum::<f64>() / n;
    let var = values
        .iter()
        .map(|v| (v - shift - mean) * (v - shift - mean))
        .sum::<f64>()
        / n;
    (shift + mean, var.sqrt())
}

/// Generator for restart `run_index`, independent of every other run.
pub fn run_rng(seed: u64, run_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run_index);
    rng
}

/// Uniformly distributed spanning tree by Wilson's loop-erased random walk.
pub fn random_spanning_tree<R: Rng + ?Sized>(net: &Network, rng: &mut R) -> Result<SpanningTree> {
    let n = net.vertex_count();
    let mut uf = UnionFind::new(n);
    let joined = net.edges().iter().filter(|&&(i, j)| uf.union(i, j)).count();
    if joined + 1 != n {
        return Err(Error::Usage("network is not connected".into()));
    }
    let mut in_tree = vec![false; n];
    let mut next_edge = vec![usize::MAX; n];
    let mut next = vec![usize::MAX; n];
    let root = rng.random_range(0..n);
    in_tree[root] = true;
    for start in 0..n {
        let mut u = start;
        while !in_tree[u] {
            let nbrs = net.neighbors(u);
            let (w, e) = nbrs[rng.random_range(0..nbrs.len())];
            next[u] = w;
            next_edge[u] = e;
            u = w;
        }
        u = start;
        while !in_tree[u] {
            in_tree[u] = true;
            u = next[u];
        }
    }
    let mut edges: Vec<usize> = (0..n).filter(|&v| v != root).map(|v| next_edge[v]).collect();
    edges.sort_unstable();
    Ok(SpanningTree::from_sorted_unchecked(net, edges))
}

/// Mutable tree state with scratch buffers for swap evaluation.
struct TreeState<'a> {
    net: &'a Network,
    alpha: f64,
    in_tree: Vec<bool>,
    adj: Vec<Vec<(usize, usize)>>,
    flux: Vec<f64>,
    /// `|Q|^α` for every edge (zero off the tree).
    weight: Vec<f64>,
    cost: f64,
    side: Vec<u8>,
    reroute: Vec<f64>,
    stack: Vec<(usize, usize)>,
    order: Vec<usize>,
    parent_edge: Vec<usize>,
    subtree: Vec<f64>,
}

impl<'a> TreeState<'a> {
    fn new(net: &'a Network, tree: &SpanningTree, alpha: f64) -> Self {
        let n = net.vertex_count();
        let mut in_tree = vec![false; net.edge_count()];
        for &e in tree.edges() {
            in_tree[e] = true;
        }
        let mut state = TreeState {
            net,
            alpha,
            in_tree,
            adj: tree.adjacency(net),
            flux: vec![0.0; net.edge_count()],
            weight: vec![0.0; net.edge_count()],
            cost: 0.0,
            side: vec![0; n],
            reroute: vec![0.0; n],
            stack: Vec::with_capacity(n),
            order: Vec::with_capacity(n),
            parent_edge: vec![usize::MAX; n],
            subtree: vec![0.0; n],
        };
        state.recompute();
        state
    }

    /// Fluxes from subtree source sums of the tree rooted at vertex 0.
    fn recompute(&mut self) {
        let net = self.net;
        let n = net.vertex_count();
        self.order.clear();
        self.parent_edge.iter_mut().for_each(|p| *p = usize::MAX);
        self.side.iter_mut().for_each(|s| *s = 0);
        self.side[0] = 1;
        self.stack.clear();
        self.stack.push((0, usize::MAX));
        while let Some((v, _)) = self.stack.pop() {
            self.order.push(v);
            for &(w, e) in &self.adj[v] {
                if self.side[w] == 0 {
                    self.side[w] = 1;
                    self.parent_edge[w] = e;
                    self.stack.push((w, e));
                }
            }
        }
        debug_assert_eq!(self.order.len(), n);
        for e in 0..net.edge_count() {
            self.flux[e] = 0.0;
            self.weight[e] = 0.0;
        }
        for &v in self.order.iter().rev() {
            let mut acc = net.sources()[v];
            for &(w, e) in &self.adj[v] {
                if self.parent_edge[v] != e {
                    acc += self.subtree[w];
                }
            }
            self.subtree[v] = acc;
            if v != 0 {
                let e = self.parent_edge[v];
                let q = if net.edge(e).0 == v { acc } else { -acc };
                self.flux[e] = q;
                self.weight[e] = if q == 0.0 { 0.0 } else { q.abs().powf(self.alpha) };
            }
        }
        self.cost = flux_cost(net, &self.flux, self.alpha);
    }

    /// Marks one side of the cut at `removed` and fills `reroute[v]` with the
    /// cost change on the tree path from `root` to `v` when the cut flux is
    /// rerouted along it. `toward_root` selects the direction of the extra flow.
    fn sweep_side(&mut self, root: usize, removed: usize, mark: u8, extra: f64, toward_root: bool) {
        let net = self.net;
        self.side[root] = mark;
        self.reroute[root] = 0.0;
        self.stack.clear();
        self.stack.push((root, removed));
        while let Some((u, via)) = self.stack.pop() {
            for &(w, g) in &self.adj[u] {
                if g == via || g == removed {
                    continue;
                }
                let (x, _) = net.edge(g);
                let from = if toward_root { w } else { u };
                let q = self.flux[g];
                let shifted = if x == from { q + extra } else { q - extra };
                let delta = (shifted.abs().powf(self.alpha) - self.weight[g]) * net.lengths()[g];
                self.side[w] = mark;
                self.reroute[w] = self.reroute[u] + delta;
                self.stack.push((w, g));
            }
        }
    }

    /// Best replacement for tree edge `removed`: `(edge, cost change)`.
    ///
    /// Only edges crossing the cut are candidates; ties go to the lowest index.
    fn best_replacement(&mut self, removed: usize) -> Option<(usize, f64)> {
        let net = self.net;
        let (i, j) = net.edge(removed);
        let cut_flux = self.flux[removed];
        if cut_flux == 0.0 {
            return None;
        }
        self.side.iter_mut().for_each(|s| *s = 0);
        // circulate the cut flux from j back to i, then out along the new edge
        self.sweep_side(i, removed, 1, cut_flux, false);
        self.sweep_side(j, removed, 2, cut_flux, true);
        let w = self.weight[removed];
        let base = -w * net.lengths()[removed];
        let mut best: Option<(usize, f64)> = None;
        for (f, &(x, y)) in net.edges().iter().enumerate() {
            if self.in_tree[f] || self.side[x] == self.side[y] {
                continue;
            }
            let delta = self.reroute[x] + self.reroute[y] + base + w * net.lengths()[f];
            if best.is_none_or(|(_, d)| delta < d) {
                best = Some((f, delta));
            }
        }
        best
    }

    fn swap(&mut self, removed: usize, added: usize) {
        let (i, j) = self.net.edge(removed);
        self.adj[i].retain(|&(_, e)| e != removed);
        self.adj[j].retain(|&(_, e)| e != removed);
        let (x, y) = self.net.edge(added);
        self.adj[x].push((y, added));
        self.adj[y].push((x, added));
        self.in_tree[removed] = false;
        self.in_tree[added] = true;
    }

    fn tree_edges(&self) -> Vec<usize> {
        (0..self.in_tree.len()).filter(|&e| self.in_tree[e]).collect()
    }

    fn is_spanning_tree(&self) -> bool {
        let edges = self.tree_edges();
        let n = self.net.vertex_count();
        if edges.len() + 1 != n {
            return false;
        }
        let mut uf = UnionFind::new(n);
        edges.iter().all(|&e| {
            let (a, b) = self.net.edge(e);
            uf.union(a, b)
        })
    }
}

/// Runs the 1-swap descent from `init` until no tree edge admits an
/// energy-lowering replacement.
///
/// Tree edges are drawn uniformly from those not yet tried since the last
/// accepted swap; for the drawn edge every cut-crossing replacement is scored
/// and the best one is taken if it lowers the energy by more than
/// `improvement_rel_tol` relative.
pub fn descend<R: Rng + ?Sized>(
    net: &Network,
    init: &SpanningTree,
    cfg: &DescentConfig,
    rng: &mut R,
) -> Result<DescentRun> {
    cfg.check()?;
    if !init.fits(net) {
        return Err(Error::Usage("initial tree belongs to a different network".into()));
    }
    let params = cfg.params;
    let prefactor = params.tree_prefactor();
    let mut state = TreeState::new(net, init, params.flux_exponent());
    let mut trace = cfg.record_trace.then(|| vec![prefactor * state.cost]);
    let mut untried = state.tree_edges();
    let mut swaps = 0;
    let mut iterations = 0;

    while !untried.is_empty() {
        iterations += 1;
        if iterations > cfg.max_iterations {
            return Err(Error::IterationCap(cfg.max_iterations));
        }
        let removed = untried.swap_remove(rng.random_range(0..untried.len()));
        let current = state.cost;
        let threshold = current * (1.0 - cfg.improvement_rel_tol);
        let Some((added, delta)) = state.best_replacement(removed) else {
            continue;
        };
        if !(current + delta < threshold) {
            continue;
        }
        state.swap(removed, added);
        state.recompute();
        if !(state.cost < threshold) {
            // the incremental estimate disagreed with the exact recomputation
            state.swap(added, removed);
            state.recompute();
            continue;
        }
        debug_assert!(state.is_spanning_tree());
        swaps += 1;
        if let Some(t) = trace.as_mut() {
            t.push(prefactor * state.cost);
        }
        untried = state.tree_edges();
    }

    let final_tree = SpanningTree::from_sorted_unchecked(net, state.tree_edges());
    let final_energy = energy_tree_optimal(net, &tree_fluxes(net, &final_tree)?, &params);
    Ok(DescentRun {
        final_tree,
        final_energy,
        swaps_accepted: swaps,
        energy_trace: trace,
    })
}

/// `runs` independent descents from uniform random spanning trees.
///
/// Runs execute on the ambient rayon pool; results are gathered and
/// aggregated in run-index order so the summary does not depend on the
/// number of workers.
pub fn monte_carlo(net: &Network, cfg: &DescentConfig, runs: usize) -> Result<McSummary> {
    if runs == 0 {
        return Err(Error::Usage("at least one run is required".into()));
    }
    validate_network(net).into_result()?;
    cfg.check()?;
    let results: Vec<Result<DescentRun>> = (0..runs as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = run_rng(cfg.seed, k);
            let init = random_spanning_tree(net, &mut rng)?;
            descend(net, &init, cfg, &mut rng)
        })
        .collect();
    let runs = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(McSummary::from_runs(runs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycle4() -> Network {
        Network::new(
            4,
            vec![(0, 1), (1, 2), (2, 3), (0, 3)],
            vec![1.0; 4],
            vec![1.0, -1.0 / 3.0, -1.0 / 3.0, -1.0 / 3.0],
            None,
        )
        .unwrap()
    }

    fn triangle() -> Network {
        Network::new(
            3,
            vec![(0, 1), (1, 2), (0, 2)],
            vec![1.0; 3],
            vec![1.0, -0.5, -0.5],
            None,
        )
        .unwrap()
    }

    fn tree_energy(net: &Network, edges: Vec<usize>, params: &ModelParams) -> f64 {
        let t = SpanningTree::new(net, edges).unwrap();
        energy_tree_optimal(net, &tree_fluxes(net, &t).unwrap(), params)
    }

    #[test]
    fn random_tree_is_spanning() {
        let net = cycle4();
        let mut rng = run_rng(3, 0);
        for _ in 0..100 {
            let t = random_spanning_tree(&net, &mut rng).unwrap();
            assert!(SpanningTree::new(&net, t.edges().to_vec()).is_ok());
        }
    }

    #[test]
    fn random_tree_on_a_tree_is_identity() {
        let net = Network::new(
            4,
            vec![(0, 1), (1, 2), (1, 3)],
            vec![1.0; 3],
            vec![1.0, -1.0 / 3.0, -1.0 / 3.0, -1.0 / 3.0],
            None,
        )
        .unwrap();
        let mut rng = run_rng(11, 4);
        assert_eq!(random_spanning_tree(&net, &mut rng).unwrap().edges(), &[0, 1, 2]);
    }

    #[test]
    fn fixed_point_is_returned_unchanged() {
        let net = triangle();
        let params = ModelParams::new(0.5, 1.0).unwrap();
        let star = SpanningTree::new(&net, vec![0, 2]).unwrap();
        let run = descend(&net, &star, &DescentConfig::new(params, 0), &mut run_rng(0, 0)).unwrap();
        assert_eq!(run.final_tree, star);
        assert_eq!(run.swaps_accepted, 0);
    }

    #[test]
    fn cycle4_matches_enumeration() {
        let net = cycle4();
        let params = ModelParams::new(0.5, 1.0).unwrap();
        // the four spanning trees drop one edge each
        let all: Vec<Vec<usize>> = (0..4)
            .map(|skip| (0..4).filter(|&e| e != skip).collect())
            .collect();
        let best = all
            .iter()
            .map(|t| tree_energy(&net, t.clone(), &params))
            .fold(f64::INFINITY, f64::min);
        for init in &all {
            for seed in 0..5 {
                let t = SpanningTree::new(&net, init.clone()).unwrap();
                let cfg = DescentConfig::new(params, seed);
                let run = descend(&net, &t, &cfg, &mut run_rng(seed, 0)).unwrap();
                assert!((run.final_energy - best).abs() <= 1e-12 * best);
            }
        }
    }

    #[test]
    fn trace_strictly_decreases() {
        let net = cycle4();
        let params = ModelParams::new(0.3, 1.0).unwrap();
        let mut cfg = DescentConfig::new(params, 9);
        cfg.record_trace = true;
        let init = SpanningTree::new(&net, vec![0, 1, 2]).unwrap();
        let run = descend(&net, &init, &cfg, &mut run_rng(9, 0)).unwrap();
        let trace = run.energy_trace.unwrap();
        assert_eq!(trace.len(), run.swaps_accepted + 1);
        assert!(trace.windows(2).all(|w| w[1] < w[0] * (1.0 - 1e-12)));
    }

    #[test]
    fn iteration_cap_reports_error() {
        let net = cycle4();
        let params = ModelParams::new(0.5, 1.0).unwrap();
        let mut cfg = DescentConfig::new(params, 0);
        cfg.max_iterations = 1;
        let init = SpanningTree::new(&net, vec![0, 1, 2]).unwrap();
        assert!(matches!(
            descend(&net, &init, &cfg, &mut run_rng(0, 0)),
            Err(Error::IterationCap(1))
        ));
    }

    #[test]
    fn single_run_summary() {
        let net = cycle4();
        let cfg = DescentConfig::new(ModelParams::new(0.5, 1.0).unwrap(), 1);
        let s = monte_carlo(&net, &cfg, 1).unwrap();
        assert_eq!(s.run_count(), 1);
        assert_eq!(s.energy_std, 0.0);
        assert_eq!(s.best_energy, s.worst_energy);
    }

    #[test]
    fn triangle_runs_all_converge() {
        let net = triangle();
        for gamma in [0.1, 0.5, 1.0] {
            let cfg = DescentConfig::new(ModelParams::new(gamma, 1.0).unwrap(), 5);
            let s = monte_carlo(&net, &cfg, 50).unwrap();
            assert_eq!(s.best_energy, s.worst_energy);
            assert_eq!(s.best_run().final_tree.edges(), &[0, 2]);
        }
    }

    #[test]
    fn zero_runs_rejected() {
        let cfg = DescentConfig::new(ModelParams::new(0.5, 1.0).unwrap(), 1);
        assert!(monte_carlo(&triangle(), &cfg, 0).is_err());
    }

    #[test]
    fn population_std() {
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!((m, s), (2.0, 1.0));
    }
}
