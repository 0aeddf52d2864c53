//! P1 finite element assembly on triangles and tagged boundary edges.

use nalgebra_sparse::{CooMatrix, CsrMatrix};

use crate::geometry::{BoundaryTag, Mesh, Point};

use super::SolveError;

/// Two-point Gauss rule on `[0, 1]`.
pub(crate) const GAUSS2: [(f64, f64); 2] = [
    (0.5 - 0.288_675_134_594_812_9, 0.5),
    (0.5 + 0.288_675_134_594_812_9, 0.5),
];

/// Gradients of the three barycentric basis functions and the signed area.
pub fn p1_gradients(p: [Point; 3]) -> ([Point; 3], f64) {
    let [a, b, c] = p;
    let area2 = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    let g = |q: Point, r: Point| [(q[1] - r[1]) / area2, (r[0] - q[0]) / area2];
    ([g(b, c), g(c, a), g(a, b)], 0.5 * area2)
}

/// Element stiffness matrix `∫ ∇φ_i · ∇φ_j` of a P1 triangle.
pub fn local_stiffness(p: [Point; 3]) -> Option<[[f64; 3]; 3]> {
    let (g, area) = p1_gradients(p);
    if !(area > 0.0) || !area.is_finite() {
        return None;
    }
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
        }
    }
    Some(k)
}

/// Global stiffness matrix of `∫_Ω ∇u · ∇ρ` (no boundary conditions applied).
pub fn assemble_stiffness(mesh: &Mesh) -> Result<CsrMatrix<f64>, SolveError> {
    let n = mesh.num_nodes();
    let mut coo = CooMatrix::new(n, n);
    for (k, tri) in mesh.triangles.iter().enumerate() {
        let pts = tri.map(|i| mesh.nodes[i]);
        let ke = local_stiffness(pts).ok_or(SolveError::DegenerateTriangle(k))?;
        for a in 0..3 {
            for b in 0..3 {
                coo.push(tri[a], tri[b], ke[a][b]);
            }
        }
    }
    Ok(CsrMatrix::from(&coo))
}

/// Load vector `∫_{Γ_tag} density(t) ρ` by two-point Gauss quadrature per edge.
pub fn assemble_boundary_load<F>(mesh: &Mesh, tag: BoundaryTag, density: F) -> Vec<f64>
where
    F: Fn(f64) -> f64,
{
    let mut load = vec![0.0; mesh.num_nodes()];
    for e in mesh.edges_with_tag(tag) {
        let len = e.t[1] - e.t[0];
        for (xi, w) in GAUSS2 {
            let val = density(e.t[0] + xi * len) * w * len;
            load[e.nodes[0]] += (1.0 - xi) * val;
            load[e.nodes[1]] += xi * val;
        }
    }
    load
}

/// Load `∫_{Γ_tag} f(u_h) ρ` with `u_h` interpolated at the Gauss points.
pub(crate) fn nonlinear_load<F>(mesh: &Mesh, tag: BoundaryTag, u: &[f64], f: F) -> Vec<f64>
where
    F: Fn(f64) -> f64,
{
    let mut load = vec![0.0; mesh.num_nodes()];
    for e in mesh.edges_with_tag(tag) {
        let len = e.t[1] - e.t[0];
        let (u0, u1) = (u[e.nodes[0]], u[e.nodes[1]]);
        for (xi, w) in GAUSS2 {
            let val = f((1.0 - xi) * u0 + xi * u1) * w * len;
            load[e.nodes[0]] += (1.0 - xi) * val;
            load[e.nodes[1]] += xi * val;
        }
    }
    load
}

/// Entries of `∫_{Γ_tag} c(u_h) φ_i φ_j`, pushed into `coo` scaled by `sign`.
pub(crate) fn push_boundary_mass<F>(coo: &mut CooMatrix<f64>, mesh: &Mesh, tag: BoundaryTag, u: &[f64], c: F, sign: f64)
where
    F: Fn(f64) -> f64,
{
    for e in mesh.edges_with_tag(tag) {
        let len = e.t[1] - e.t[0];
        let (u0, u1) = (u[e.nodes[0]], u[e.nodes[1]]);
        let mut m = [[0.0; 2]; 2];
        for (xi, w) in GAUSS2 {
            let phi = [1.0 - xi, xi];
            let cw = c(phi[0] * u0 + phi[1] * u1) * w * len;
            for a in 0..2 {
                for b in 0..2 {
                    m[a][b] += cw * phi[a] * phi[b];
                }
            }
        }
        for a in 0..2 {
            for b in 0..2 {
                coo.push(e.nodes[a], e.nodes[b], sign * m[a][b]);
            }
        }
    }
}
