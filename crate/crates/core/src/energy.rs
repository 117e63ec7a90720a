//! Energy functionals, the Kirchhoff pressure solver, optimal conductivities
//! and the analytic energy gradient.
//!
//! For conductivities `C` the pressures solve the weighted Laplacian system
//! `Σ_j C_ij (P_i − P_j) / L_ij = S_i`, fluxes follow as
//! `Q_ij = C_ij (P_i − P_j) / L_ij`, and the energy is
//! `E[C] = Σ (Q_ij² / C_ij + (ν/γ) C_ij^γ) L_ij`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{FluxAssignment, Network, UnionFind};

/// Relative residual accepted after a Kirchhoff solve, scaled by `max(1, max|S|)`.
pub const KIRCHHOFF_RESIDUAL_TOL: f64 = 1e-10;

/// Metabolic exponent `γ ∈ (0, 1]` and coefficient `ν > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    gamma: f64,
    nu: f64,
}

impl ModelParams {
    pub fn new(gamma: f64, nu: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::Domain(format!("gamma must lie in (0, 1], got {gamma}")));
        }
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::Domain(format!("nu must be positive, got {nu}")));
        }
        Ok(ModelParams { gamma, nu })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Exponent `2γ/(γ+1)` applied to `|Q|` in the tree-optimal energy.
    pub fn flux_exponent(&self) -> f64 {
        2.0 * self.gamma / (self.gamma + 1.0)
    }

    /// Constant `(1 + 1/γ) ν^{1/(γ+1)}` of the tree-optimal energy.
    ///
    /// Obtained by inserting `C = (Q²/ν)^{1/(γ+1)}` into both terms of `E[C]`:
    /// `Q²/C = ν^{1/(γ+1)} |Q|^{2γ/(γ+1)}` and
    /// `(ν/γ) C^γ = (1/γ) ν^{1/(γ+1)} |Q|^{2γ/(γ+1)}`. At `γ = 1` this is `2√ν`.
    pub fn tree_prefactor(&self) -> f64 {
        (1.0 + 1.0 / self.gamma) * self.nu.powf(1.0 / (self.gamma + 1.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conductivities(pub Vec<f64>);

impl Conductivities {
    pub fn uniform(net: &Network, value: f64) -> Self {
        Conductivities(vec![value; net.edge_count()])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Gauge-fixed pressures: zero at the lowest-indexed vertex of every active
/// component and at vertices touching no active edge.
#[derive(Debug, Clone, PartialEq)]
pub struct PressureField(pub Vec<f64>);

impl PressureField {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// Fluxes `C_ij (P_i − P_j) / L_ij` in the stored edge orientation.
    pub fn fluxes(&self, net: &Network, c: &Conductivities) -> FluxAssignment {
        let p = &self.0;
        FluxAssignment(
            net.edges()
                .iter()
                .zip(net.lengths())
                .zip(&c.0)
                .map(|((&(i, j), &l), &cij)| {
                    if cij > 0.0 {
                        cij * (p[i] - p[j]) / l
                    } else {
                        0.0
                    }
                })
                .collect(),
        )
    }
}

/// Largest per-vertex violation of the Kirchhoff equations.
pub fn kirchhoff_residual(net: &Network, c: &Conductivities, p: &[f64]) -> f64 {
    let mut lhs = vec![0.0; net.vertex_count()];
    for ((&(i, j), &l), &cij) in net.edges().iter().zip(net.lengths()).zip(&c.0) {
        if cij > 0.0 {
            let q = cij * (p[i] - p[j]) / l;
            lhs[i] += q;
            lhs[j] -= q;
        }
    }
    lhs.iter()
        .zip(net.sources())
        .fold(0.0, |m, (a, s)| m.max((a - s).abs()))
}

fn check_conductivities(net: &Network, c: &Conductivities) -> Result<()> {
    if c.0.len() != net.edge_count() {
        return Err(Error::Usage(format!(
            "{} conductivities for {} edges",
            c.0.len(),
            net.edge_count()
        )));
    }
    if let Some(k) = c.0.iter().position(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::Domain(format!("conductivity {k} is {}", c.0[k])));
    }
    Ok(())
}

/// Solves the Kirchhoff system on every active component (edges with `C > 0`).
///
/// Each component's reduced Laplacian (lowest-indexed vertex pinned to zero)
/// is factored densely by Cholesky, followed by one step of iterative
/// refinement. The residual is checked against [`KIRCHHOFF_RESIDUAL_TOL`].
pub fn solve_kirchhoff(net: &Network, c: &Conductivities) -> Result<PressureField> {
    check_conductivities(net, c)?;
    let n = net.vertex_count();
    let scale = net.max_abs_source().max(1.0);
    let tol = KIRCHHOFF_RESIDUAL_TOL * scale;

    let mut uf = UnionFind::new(n);
    for (k, &(i, j)) in net.edges().iter().enumerate() {
        if c.0[k] > 0.0 {
            uf.union(i, j);
        }
    }
    let mut components: Vec<Vec<usize>> = Vec::new();
    let mut comp_of_root = vec![usize::MAX; n];
    for v in 0..n {
        let r = uf.find(v);
        if comp_of_root[r] == usize::MAX {
            comp_of_root[r] = components.len();
            components.push(Vec::new());
        }
        components[comp_of_root[r]].push(v);
    }

    let mut pressure = vec![0.0; n];
    let mut local = vec![usize::MAX; n];
    for comp in &components {
        let total: f64 = comp.iter().map(|&v| net.sources()[v]).sum();
        if total.abs() > tol {
            let reason = if comp.len() == 1 {
                format!("isolated vertex carries source {total}")
            } else {
                format!("component sources sum to {total:e}")
            };
            return Err(Error::Unsolvable {
                component: comp.clone(),
                reason,
            });
        }
        if comp.len() == 1 {
            continue;
        }
        // comp is ascending, so comp[0] is the pinned vertex
        let m = comp.len() - 1;
        for (k, &v) in comp[1..].iter().enumerate() {
            local[v] = k;
        }
        let mut a = DMatrix::<f64>::zeros(m, m);
        let mut b = DVector::<f64>::zeros(m);
        for (k, &v) in comp[1..].iter().enumerate() {
            b[k] = net.sources()[v];
        }
        for &v in comp {
            for &(w, e) in net.neighbors(v) {
                if w < v || c.0[e] <= 0.0 {
                    continue;
                }
                let g = c.0[e] / net.lengths()[e];
                let (lv, lw) = (local[v], local[w]);
                if v != comp[0] {
                    a[(lv, lv)] += g;
                }
                if w != comp[0] {
                    a[(lw, lw)] += g;
                }
                if v != comp[0] && w != comp[0] {
                    a[(lv, lw)] -= g;
                    a[(lw, lv)] -= g;
                }
            }
        }
        let chol = a.clone().cholesky().ok_or_else(|| Error::Unsolvable {
            component: comp.clone(),
            reason: "reduced Laplacian is not positive definite".into(),
        })?;
        let mut x = chol.solve(&b);
        let r = &b - &a * &x;
        x += chol.solve(&r);
        for (k, &v) in comp[1..].iter().enumerate() {
            pressure[v] = x[k];
        }
        for &v in comp {
            local[v] = usize::MAX;
        }
    }

    let residual = kirchhoff_residual(net, c, &pressure);
    if !(residual <= tol) {
        return Err(Error::Unsolvable {
            component: (0..n).collect(),
            reason: format!("residual {residual:e} exceeds {tol:e} after solve"),
        });
    }
    Ok(PressureField(pressure))
}

/// Per-edge energy density `(Q²/C + (ν/γ) C^γ) L`, zero on inactive edges.
fn edge_energy(q: f64, c: f64, l: f64, params: &ModelParams) -> f64 {
    if c > 0.0 {
        (q * q / c + params.nu / params.gamma * c.powf(params.gamma)) * l
    } else {
        0.0
    }
}

/// Full energy `E[C]`, with fluxes obtained from the Kirchhoff solve.
pub fn energy_full(net: &Network, c: &Conductivities, params: &ModelParams) -> Result<f64> {
    let p = solve_kirchhoff(net, c)?;
    Ok(energy_with_fluxes(net, c, &p.fluxes(net, c), params))
}

/// `E[C]` for fluxes already computed from `c`.
pub fn energy_with_fluxes(
    net: &Network,
    c: &Conductivities,
    q: &FluxAssignment,
    params: &ModelParams,
) -> f64 {
    q.0.iter()
        .zip(&c.0)
        .zip(net.lengths())
        .map(|((&q, &c), &l)| edge_energy(q, c, l, params))
        .sum()
}

/// `C_ij = (Q_ij² / ν)^{1/(γ+1)}`, exactly zero where `Q_ij = 0`.
pub fn optimal_conductivity(q: &FluxAssignment, params: &ModelParams) -> Conductivities {
    let exp = 1.0 / (params.gamma + 1.0);
    Conductivities(
        q.0.iter()
            .map(|&q| {
                if q == 0.0 {
                    0.0
                } else {
                    (q * q / params.nu).powf(exp)
                }
            })
            .collect(),
    )
}

/// Energy of a conservative flux with optimal conductivities installed:
/// `(1 + 1/γ) ν^{1/(γ+1)} Σ |Q_ij|^{2γ/(γ+1)} L_ij`.
pub fn energy_tree_optimal(net: &Network, q: &FluxAssignment, params: &ModelParams) -> f64 {
    params.tree_prefactor() * flux_cost(net, q.values(), params.flux_exponent())
}

/// `Σ |Q|^α L` without the prefactor.
pub(crate) fn flux_cost(net: &Network, q: &[f64], alpha: f64) -> f64 {
    q.iter()
        .zip(net.lengths())
        .map(|(&q, &l)| if q == 0.0 { 0.0 } else { q.abs().powf(alpha) * l })
        .sum()
}

/// `∂E/∂C_ij = (−Q_ij²/C_ij² + ν C_ij^{γ−1}) L_ij` on every edge.
///
/// All conductivities must be strictly positive.
pub fn energy_gradient(net: &Network, c: &Conductivities, params: &ModelParams) -> Result<Vec<f64>> {
    check_conductivities(net, c)?;
    if let Some(k) = c.0.iter().position(|&x| x == 0.0) {
        return Err(Error::Domain(format!(
            "gradient requested at zero conductivity on edge {k}"
        )));
    }
    let p = solve_kirchhoff(net, c)?;
    let q = p.fluxes(net, c);
    Ok(q.0
        .iter()
        .zip(&c.0)
        .zip(net.lengths())
        .map(|((&q, &c), &l)| (-q * q / (c * c) + params.nu * c.powf(params.gamma - 1.0)) * l)
        .collect())
}

/// Gradient in pressure form, `(−((P_i − P_j)/L)² + ν C^{γ−1}) L`, which stays
/// finite at `C = 0` for `γ = 1`.
pub(crate) fn gradient_from_pressures(
    net: &Network,
    c: &[f64],
    p: &[f64],
    params: &ModelParams,
) -> Vec<f64> {
    net.edges()
        .iter()
        .zip(net.lengths())
        .zip(c)
        .map(|((&(i, j), &l), &c)| {
            let dp = (p[i] - p[j]) / l;
            (-dp * dp + params.nu * c.powf(params.gamma - 1.0)) * l
        })
        .collect()
}
