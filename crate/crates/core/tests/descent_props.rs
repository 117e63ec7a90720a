mod common;

use common::*;
use optnet::descent::{descend, monte_carlo, random_spanning_tree, DescentConfig};
use optnet::energy::{energy_tree_optimal, ModelParams};
use optnet::graph::{tree_fluxes, UnionFind};
use optnet::instances::{brute_force_optimum, canonical_instances, enumerate_spanning_trees, single_source, DEFAULT_TREE_CAP};
use optnet::{Error, Network, SpanningTree};
use proptest::prelude::*;
use rand::Rng;

fn tree_energy(net: &Network, tree: &SpanningTree, prm: &ModelParams) -> f64 {
    energy_tree_optimal(net, &tree_fluxes(net, tree).unwrap(), prm)
}

/// Every tree one edge exchange away from `tree`, found by trying all pairs.
fn one_swap_neighbours(net: &Network, tree: &SpanningTree) -> Vec<SpanningTree> {
    let mut out = Vec::new();
    for &e in tree.edges() {
        for f in 0..net.edge_count() {
            if tree.contains(f) {
                continue;
            }
            let mut edges: Vec<usize> = tree.edges().iter().copied().filter(|&x| x != e).collect();
            edges.push(f);
            let mut uf = UnionFind::new(net.vertex_count());
            if edges.iter().all(|&x| {
                let (i, j) = net.edge(x);
                uf.union(i, j)
            }) {
                out.push(SpanningTree::new(net, edges).unwrap());
            }
        }
    }
    out
}

fn traced(prm: ModelParams, seed: u64) -> DescentConfig {
    DescentConfig {
        record_trace: true,
        ..DescentConfig::new(prm, seed)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn descent_ends_in_a_one_swap_local_minimum(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(3..=14);
        let extra = r.random_range(1..=n + 4);
        let net = random_network(&mut r, n, extra);
        let prm = ModelParams::new(r.random_range(0.05..=1.0), 1.0).unwrap();
        let init = random_spanning_tree(&net, &mut r).unwrap();
        let run = descend(&net, &init, &traced(prm, seed), &mut r).unwrap();

        let e = tree_energy(&net, &run.final_tree, &prm);
        prop_assert!((e - run.final_energy).abs() <= 1e-12 * e);
        for nb in one_swap_neighbours(&net, &run.final_tree) {
            prop_assert!(tree_energy(&net, &nb, &prm) >= e * (1.0 - 1e-9));
        }

        let trace = run.energy_trace.unwrap();
        prop_assert_eq!(trace.len(), run.swaps_accepted + 1);
        prop_assert!((trace[0] - tree_energy(&net, &init, &prm)).abs() <= 1e-9 * trace[0]);
        prop_assert!((trace.last().unwrap() - e).abs() <= 1e-9 * e);
        for w in trace.windows(2) {
            prop_assert!(w[1] < w[0] * (1.0 - 0.5e-12));
        }
    }

    #[test]
    fn gamma_one_local_minima_are_shortest_path_trees(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(2..=30);
        let extra = r.random_range(0..=2 * n);
        let net0 = random_network(&mut r, n, extra);
        let src = r.random_range(0..n);
        let net = net0.with_sources(single_source(n, src)).unwrap();
        let nu = 10f64.powf(r.random_range(-1.0..1.0));
        let prm = ModelParams::new(1.0, nu).unwrap();
        let init = random_spanning_tree(&net, &mut r).unwrap();
        let run = descend(&net, &init, &DescentConfig::new(prm, seed), &mut r).unwrap();
        let opt = single_source_optimum(&net, src, nu);
        prop_assert!((run.final_energy - opt).abs() <= 1e-9 * opt, "{} vs {}", run.final_energy, opt);
    }
}

#[test]
fn square_descends_to_the_best_tree_from_every_start() {
    let net = Network::new(4, vec![(0, 1), (1, 2), (2, 3), (0, 3)], vec![1.0; 4], vec![1.0, -1.0 / 3.0, -1.0 / 3.0, -1.0 / 3.0], None).unwrap();
    let prm = ModelParams::new(0.5, 1.0).unwrap();
    let (_, best) = brute_force_optimum(&net, &prm, DEFAULT_TREE_CAP).unwrap();
    for init in enumerate_spanning_trees(&net, DEFAULT_TREE_CAP).unwrap() {
        for seed in 0..5 {
            let run = descend(&net, &init, &DescentConfig::new(prm, seed), &mut rng(seed)).unwrap();
            assert!((run.final_energy - best).abs() <= 1e-12 * best);
        }
    }
}

#[test]
fn triangle_runs_all_agree() {
    let tri = canonical_instances().into_iter().find(|i| i.name == "triangle").unwrap().network;
    for gamma in [0.1, 0.5, 1.0] {
        let s = monte_carlo(&tri, &DescentConfig::new(ModelParams::new(gamma, 1.0).unwrap(), 9), 50).unwrap();
        assert_eq!(s.best_energy, s.worst_energy);
        assert_eq!(s.energy_std, 0.0);
    }
}

#[test]
fn summaries_do_not_depend_on_worker_count() {
    let net = canonical_instances().into_iter().find(|i| i.name == "grid3x3").unwrap().network;
    let cfg = traced(ModelParams::new(0.4, 1.3).unwrap(), 77);
    let pool = |k| rayon::ThreadPoolBuilder::new().num_threads(k).build().unwrap();
    let a = pool(1).install(|| monte_carlo(&net, &cfg, 64)).unwrap();
    let b = pool(3).install(|| monte_carlo(&net, &cfg, 64)).unwrap();
    assert_eq!(a, b);
    let c = monte_carlo(&net, &DescentConfig { seed: 78, ..cfg }, 64).unwrap();
    assert_ne!(a.energies(), c.energies());
}

#[test]
fn summary_statistics_are_consistent() {
    let net = canonical_instances().into_iter().find(|i| i.name == "k5").unwrap().network;
    let s = monte_carlo(&net, &DescentConfig::new(ModelParams::new(0.3, 1.0).unwrap(), 5), 40).unwrap();
    let e = s.energies();
    assert_eq!(e.len(), 40);
    assert_eq!(s.best_energy, e.iter().copied().fold(f64::INFINITY, f64::min));
    assert_eq!(s.worst_energy, e.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    assert_eq!(e.iter().position(|&x| x == s.best_energy), Some(s.best_index));
    let mean = e.iter().sum::<f64>() / 40.0;
    let var = e.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 40.0;
    assert!((s.energy_std - var.sqrt()).abs() <= 1e-12 * (1.0 + var.sqrt()));
    for run in &s.runs {
        assert!(SpanningTree::new(&net, run.final_tree.edges().to_vec()).is_ok());
    }
}

#[test]
fn errors_are_reported() {
    let disconnected = Network::new(4, vec![(0, 1), (2, 3)], vec![1.0; 2], vec![1.0, -1.0, 0.0, 0.0], None).unwrap();
    let cfg = DescentConfig::new(ModelParams::new(0.5, 1.0).unwrap(), 1);
    assert!(matches!(monte_carlo(&disconnected, &cfg, 3), Err(Error::InvalidNetwork(_))));
    assert!(random_spanning_tree(&disconnected, &mut rng(1)).is_err());

    let k5 = canonical_instances().into_iter().find(|i| i.name == "k5").unwrap().network;
    assert!(matches!(monte_carlo(&k5, &cfg, 0), Err(Error::Usage(_))));
    let capped = DescentConfig { max_iterations: 1, ..cfg };
    let init = random_spanning_tree(&k5, &mut rng(2)).unwrap();
    assert!(matches!(descend(&k5, &init, &capped, &mut rng(2)), Err(Error::IterationCap(1))));
}
