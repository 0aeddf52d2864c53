use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::continuation::CauchyData;
use crate::geometry::{BoundaryCurve, BoundaryTag, Mesh};
use crate::linalg::spmv;

use super::assembly::assemble_stiffness;
use super::{PotentialField, SolveError};

/// Values attached to the boundary nodes of one tag, in arc-length order.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace {
    pub curve: BoundaryCurve,
    pub values: Vec<f64>,
}

/// Mesh nodes along one polygon side, in path order.
struct SideChain {
    nodes: Vec<usize>,
    t: Vec<f64>,
}

fn side_chains(mesh: &Mesh, tag: BoundaryTag) -> Result<Vec<SideChain>, SolveError> {
    let path = mesh.domain.path(tag).map_err(|_| SolveError::EmptyTag(tag))?;
    let mut chains = Vec::new();
    for side in path.sides() {
        let mut edges: Vec<_> = mesh.edges_with_tag(tag).filter(|e| e.side == side.index).collect();
        if edges.is_empty() {
            continue;
        }
        edges.sort_by(|a, b| a.t[0].total_cmp(&b.t[0]));
        let mut nodes = vec![edges[0].nodes[0]];
        let mut t = vec![edges[0].t[0]];
        for e in &edges {
            nodes.push(e.nodes[1]);
            t.push(e.t[1]);
        }
        chains.push(SideChain { nodes, t });
    }
    if chains.is_empty() {
        return Err(SolveError::EmptyTag(tag));
    }
    Ok(chains)
}

/// Merges per-side nodal values into one trace; a node shared by consecutive
/// sides takes the value and normal of the following side.
fn merge_chains(mesh: &Mesh, tag: BoundaryTag, chains: &[SideChain], values: &[Vec<f64>]) -> BoundaryTrace {
    let mut curve = BoundaryCurve { tag, t: Vec::new(), points: Vec::new(), normals: Vec::new() };
    let mut out = Vec::new();
    let path = mesh.domain.path(tag).expect("chains exist so the tag does");
    for (k, chain) in chains.iter().enumerate() {
        // a shared corner node, or the jump between disconnected runs that
        // share one arc-length value, belongs to the following chain
        let continues = chains.get(k + 1).is_some_and(|next| next.t[0] <= *chain.t.last().unwrap());
        let end = if continues { chain.nodes.len() - 1 } else { chain.nodes.len() };
        for i in 0..end {
            curve.t.push(chain.t[i]);
            curve.points.push(mesh.nodes[chain.nodes[i]]);
            curve.normals.push(path.normal_at(chain.t[i]));
            out.push(values[k][i]);
        }
    }
    BoundaryTrace { curve, values: out }
}

/// Nodal values of `u` along the tagged boundary.
pub fn dirichlet_trace(u: &PotentialField, mesh: &Mesh, tag: BoundaryTag) -> Result<BoundaryTrace, SolveError> {
    let chains = side_chains(mesh, tag)?;
    let values: Vec<Vec<f64>> = chains.iter().map(|c| c.nodes.iter().map(|&i| u.values[i]).collect()).collect();
    Ok(merge_chains(mesh, tag, &chains, &values))
}

/// Normal flux `∂u/∂ν` on the tagged boundary by variational recovery.
///
/// The residual functional `ρ ↦ ∫ ∇u·∇ρ` (the Laplacian has no interior
/// source) is tested against the hat functions of each side's nodes and
/// represented in the side's P1 boundary mass matrix. Side endpoints also
/// receive flux from the neighbouring side, so their rows are replaced by
/// linear extrapolation from the two adjacent nodes.
pub fn neumann_trace(u: &PotentialField, mesh: &Mesh, tag: BoundaryTag) -> Result<BoundaryTrace, SolveError> {
    let chains = side_chains(mesh, tag)?;
    let k = assemble_stiffness(mesh)?;
    let r = spmv(&k, &u.values);
    let mut values = Vec::with_capacity(chains.len());
    for chain in &chains {
        let m = chain.nodes.len();
        let mut a = DMatrix::<f64>::zeros(m, m);
        let mut b = DVector::<f64>::zeros(m);
        let mut mass = DMatrix::<f64>::zeros(m, m);
        for e in 0..m - 1 {
            let h = chain.t[e + 1] - chain.t[e];
            mass[(e, e)] += h / 3.0;
            mass[(e + 1, e + 1)] += h / 3.0;
            mass[(e, e + 1)] += h / 6.0;
            mass[(e + 1, e)] += h / 6.0;
        }
        for i in 0..m {
            let endpoint = i == 0 || i == m - 1;
            if endpoint && m >= 3 {
                let (n1, n2) = if i == 0 { (1, 2) } else { (m - 2, m - 3) };
                let (t0, t1, t2) = (chain.t[i], chain.t[n1], chain.t[n2]);
                // λ_i = λ_n1 + (λ_n1 - λ_n2) (t_i - t_n1) / (t_n1 - t_n2)
                let s = (t0 - t1) / (t1 - t2);
                a[(i, i)] = 1.0;
                a[(i, n1)] = -(1.0 + s);
                a[(i, n2)] = s;
            } else {
                a.set_row(i, &mass.row(i));
                b[i] = r[chain.nodes[i]];
            }
        }
        let sol = a.lu().solve(&b).ok_or(SolveError::EmptyTag(tag))?;
        values.push(sol.iter().copied().collect());
    }
    Ok(merge_chains(mesh, tag, &chains, &values))
}

/// Cauchy data `(ψ, g)` on Γ₂ read from a solved field, optionally perturbed.
///
/// Each trace receives independent Gaussian noise rescaled so that its
/// discrete `L²(Γ₂)` norm equals `noise_eps` exactly. The perturbation is a
/// deterministic function of `seed`.
pub fn extract_cauchy_data(u: &PotentialField, mesh: &Mesh, noise_eps: f64, seed: u64) -> Result<CauchyData, SolveError> {
    if !(noise_eps >= 0.0 && noise_eps.is_finite()) {
        return Err(SolveError::InvalidNoise(noise_eps));
    }
    let psi = dirichlet_trace(u, mesh, BoundaryTag::Gamma2)?;
    let flux = neumann_trace(u, mesh, BoundaryTag::Gamma2)?;
    let path = mesh.domain.path(BoundaryTag::Gamma2).map_err(|_| SolveError::EmptyTag(BoundaryTag::Gamma2))?;
    let clean = CauchyData::new(psi.curve.t.clone(), psi.values, flux.values, 0.0, &path)
        .map_err(|e| SolveError::Data(e.to_string()))?;
    Ok(perturb(&clean, noise_eps, seed))
}

/// Adds normalized Gaussian noise of discrete `L²` norm `eps` to both traces.
pub fn perturb(data: &CauchyData, eps: f64, seed: u64) -> CauchyData {
    let mut out = data.clone();
    out.eps = eps;
    if eps == 0.0 {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = data.weights();
    for trace in [&mut out.psi, &mut out.g] {
        let xi: Vec<f64> = (0..trace.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let nrm = xi.iter().zip(w).map(|(x, wi)| wi * x * x).sum::<f64>().sqrt();
        for (v, x) in trace.iter_mut().zip(&xi) {
            *v += eps * x / nrm;
        }
    }
    out
}
