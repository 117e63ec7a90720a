//! Projected gradient descent on the convex `γ = 1` energy.
//!
//! At `γ = 1` the energy is convex in `C ≥ 0` and its minimizers form a convex
//! set whose extremal points are loop-free, so the optimum found here bounds
//! every spanning-tree energy from below.

use serde::{Deserialize, Serialize};

use crate::energy::{
    energy_tree_optimal, energy_with_fluxes, gradient_from_pressures, solve_kirchhoff,
    Conductivities, ModelParams,
};
use crate::error::{Error, Result};
use crate::graph::{tree_fluxes, validate_network, Network, SpanningTree, UnionFind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientConfig {
    pub nu: f64,
    /// Lower clamp on conductivities when evaluating the gradient.
    pub c_floor: f64,
    pub initial_c: f64,
    pub initial_step: f64,
    pub shrink: f64,
    /// Armijo constant.
    pub sufficient_decrease: f64,
    /// Relative energy decrease regarded as stalled.
    pub stop_rel_tol: f64,
    /// Consecutive stalled iterations required to stop.
    pub stall_window: usize,
    pub max_iters: usize,
}

impl Default for GradientConfig {
    fn default() -> Self {
        GradientConfig {
            nu: 1.0,
            c_floor: 1e-12,
            initial_c: 1.0,
            initial_step: 1.0,
            shrink: 0.5,
            sufficient_decrease: 1e-4,
            stop_rel_tol: 1e-10,
            stall_window: 10,
            max_iters: 100_000,
        }
    }
}

impl GradientConfig {
    pub fn with_nu(nu: f64) -> Self {
        GradientConfig {
            nu,
            ..Self::default()
        }
    }

    fn check(&self) -> Result<()> {
        let positive = [
            self.nu,
            self.c_floor,
            self.initial_c,
            self.initial_step,
            self.sufficient_decrease,
            self.stop_rel_tol,
        ];
        if positive.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::Config(format!("non-positive gradient setting in {self:?}")));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::Config(format!("shrink must lie in (0, 1), got {}", self.shrink)));
        }
        if self.stall_window == 0 || self.max_iters == 0 {
            return Err(Error::Config("stall_window and max_iters must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexOptimum {
    pub conductivities: Conductivities,
    pub energy: f64,
    pub iterations: usize,
    /// Euclidean norm of the projected gradient at the returned point.
    pub projected_grad_norm: f64,
    /// Energy after every iteration, starting with the initial point.
    pub energy_history: Vec<f64>,
}

/// Energy at `c`, or `+∞` when the Kirchhoff system has no solution there.
fn energy_or_inf(net: &Network, c: &Conductivities, params: &ModelParams) -> f64 {
    match solve_kirchhoff(net, c) {
        Ok(p) => energy_with_fluxes(net, c, &p.fluxes(net, c), params),
        Err(_) => f64::INFINITY,
    }
}

/// Gradient with conductivities clamped to `c_floor`, in pressure form.
fn floored_gradient(
    net: &Network,
    c: &Conductivities,
    params: &ModelParams,
    c_floor: f64,
) -> Result<Vec<f64>> {
    let floored = Conductivities(c.0.iter().map(|&x| x.max(c_floor)).collect());
    let p = solve_kirchhoff(net, &floored)?;
    Ok(gradient_from_pressures(net, &floored.0, &p.0, params))
}

fn projected_norm(c: &[f64], g: &[f64]) -> f64 {
    c.iter()
        .zip(g)
        .map(|(&c, &g)| if c == 0.0 && g >= 0.0 { 0.0 } else { g * g })
        .sum::<f64>()
        .sqrt()
}

/// Minimizes `E[C]` at `γ = 1` over `C ≥ 0` by projected gradient descent
/// with Armijo backtracking along the projection arc.
///
/// Each iteration tries `C⁺ = max(0, C − t∇E)` for `t = initial_step,
/// initial_step·shrink, …` until `E(C⁺) ≤ E(C) + σ ∇E·(C⁺ − C)`. Infeasible
/// trial points (a source cut off from every sink) count as `+∞`. Iteration
/// stops once the relative decrease stays below `stop_rel_tol` for
/// `stall_window` consecutive iterations.
pub fn minimize_convex(net: &Network, cfg: &GradientConfig) -> Result<ConvexOptimum> {
    cfg.check()?;
    validate_network(net).into_result()?;
    let params = ModelParams::new(1.0, cfg.nu)?;
    let mut c = Conductivities::uniform(net, cfg.initial_c);
    let mut energy = energy_full_checked(net, &c, &params)?;
    let mut history = vec![energy];
    let mut stalled = 0;
    let mut grad = floored_gradient(net, &c, &params, cfg.c_floor)?;

    for iter in 1..=cfg.max_iters {
        let mut t = cfg.initial_step;
        let mut accepted = None;
        while t > 1e-30 {
            let trial = Conductivities(
                c.0.iter().zip(&grad).map(|(&x, &g)| (x - t * g).max(0.0)).collect(),
            );
            let directional: f64 = trial
                .0
                .iter()
                .zip(&c.0)
                .zip(&grad)
                .map(|((&n, &o), &g)| g * (n - o))
                .sum();
            let e = energy_or_inf(net, &trial, &params);
            if e <= energy + cfg.sufficient_decrease * directional {
                accepted = Some((trial, e));
                break;
            }
            t *= cfg.shrink;
        }

        let decrease = match accepted {
            Some((trial, e)) => {
                let d = (energy - e) / energy;
                c = trial;
                energy = e;
                grad = floored_gradient(net, &c, &params, cfg.c_floor)?;
                d
            }
            None => 0.0,
        };
        history.push(energy);
        stalled = if decrease < cfg.stop_rel_tol { stalled + 1 } else { 0 };
        if stalled >= cfg.stall_window {
            return Ok(ConvexOptimum {
                projected_grad_norm: projected_norm(&c.0, &grad),
                conductivities: c,
                energy,
                iterations: iter,
                energy_history: history,
            });
        }
    }
    Err(Error::Convergence {
        iterations: cfg.max_iters,
        grad_norm: projected_norm(&c.0, &grad),
    })
}

fn energy_full_checked(net: &Network, c: &Conductivities, params: &ModelParams) -> Result<f64> {
    let p = solve_kirchhoff(net, c)?;
    Ok(energy_with_fluxes(net, c, &p.fluxes(net, c), params))
}

/// Result of reading a spanning tree off a conductivity vector.
#[derive(Debug, Clone, PartialEq)]
pub enum TreeSupport {
    Tree(SpanningTree),
    /// The active set is not a spanning tree: the minimizer is a proper
    /// convex combination of tree-supported minimizers, or it is disconnected.
    NotATree { active_edges: Vec<usize>, has_cycle: bool },
}

/// Returns the spanning tree formed by the edges with `C > threshold`, if they form one.
pub fn extract_tree_support(c: &Conductivities, net: &Network, threshold: f64) -> TreeSupport {
    let active: Vec<usize> = (0..net.edge_count()).filter(|&e| c.0[e] > threshold).collect();
    let mut uf = UnionFind::new(net.vertex_count());
    let has_cycle = !active.iter().all(|&e| {
        let (i, j) = net.edge(e);
        uf.union(i, j)
    });
    if !has_cycle && active.len() + 1 == net.vertex_count() {
        return TreeSupport::Tree(SpanningTree::from_sorted_unchecked(net, active));
    }
    TreeSupport::NotATree {
        active_edges: active,
        has_cycle,
    }
}

/// Tree-optimal `γ = 1` energy of an extracted support tree.
pub fn support_energy(net: &Network, tree: &SpanningTree, nu: f64) -> Result<f64> {
    let params = ModelParams::new(1.0, nu)?;
    Ok(energy_tree_optimal(net, &tree_fluxes(net, tree)?, &params))
}
