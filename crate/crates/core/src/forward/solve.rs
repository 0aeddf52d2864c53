use nalgebra_sparse::{CooMatrix, CsrMatrix};

use crate::geometry::{BoundaryTag, Mesh, Point};
use crate::linalg::{gauss_legendre, spmv, BandedLu};

use super::assembly::{
    assemble_boundary_load, assemble_stiffness, local_stiffness, nonlinear_load, p1_gradients, push_boundary_mass,
};
use super::{FluxProfile, NonlinearityModel, SolveError};

/// Nodal values of a P1 potential with the grounded nodes pinned to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialField {
    pub values: Vec<f64>,
    pub dirichlet: Vec<bool>,
    /// Dirichlet energy `∫ |∇u|²`.
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// Newton passes, each evaluating the residual once; a zero initial
    /// residual counts as one pass.
    pub iterations: usize,
    pub residual: f64,
    pub energy: f64,
    pub converged: bool,
    pub residual_history: Vec<f64>,
    /// Set when the energy exceeds the configured bound E².
    pub energy_bound_exceeded: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub energy_bound_sq: Option<f64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-11, max_iter: 50, energy_bound_sq: None }
    }
}

const MAX_HALVINGS: usize = 30;

/// Discrete nonlinear problem `F(u) = K u - b_g - b_f(u) = 0` on the free nodes.
pub(crate) struct Discretization<'a> {
    mesh: &'a Mesh,
    stiffness: CsrMatrix<f64>,
    load_g: Vec<f64>,
    model: &'a NonlinearityModel,
    mask: Vec<bool>,
}

impl<'a> Discretization<'a> {
    pub(crate) fn new(mesh: &'a Mesh, g: &FluxProfile, model: &'a NonlinearityModel) -> Result<Self, SolveError> {
        let mask = mesh.dirichlet_mask();
        if !mask.iter().any(|&m| m) {
            return Err(SolveError::NoDirichlet);
        }
        let stiffness = assemble_stiffness(mesh)?;
        let load_g = assemble_boundary_load(mesh, BoundaryTag::Gamma2, |t| g.eval(t));
        Ok(Discretization { mesh, stiffness, load_g, model, mask })
    }

    pub(crate) fn residual(&self, u: &[f64]) -> Vec<f64> {
        let ku = spmv(&self.stiffness, u);
        let bf = nonlinear_load(self.mesh, BoundaryTag::Gamma1, u, |v| self.model.eval(v));
        ku.iter()
            .zip(&self.load_g)
            .zip(&bf)
            .zip(&self.mask)
            .map(|(((k, g), f), &m)| if m { 0.0 } else { k - g - f })
            .collect()
    }

    /// `K` minus the Γ₁ boundary mass weighted by `weight(u)`, with Dirichlet
    /// rows and columns replaced by the identity.
    fn operator<F: Fn(f64) -> f64>(&self, u: &[f64], weight: F) -> CsrMatrix<f64> {
        let n = self.mesh.num_nodes();
        let mut coo = CooMatrix::new(n, n);
        for (i, j, v) in self.stiffness.triplet_iter() {
            if !self.mask[i] && !self.mask[j] {
                coo.push(i, j, *v);
            }
        }
        let mut bm = CooMatrix::new(n, n);
        push_boundary_mass(&mut bm, self.mesh, BoundaryTag::Gamma1, u, weight, -1.0);
        for (i, j, v) in bm.triplet_iter() {
            if !self.mask[i] && !self.mask[j] {
                coo.push(i, j, *v);
            }
        }
        for i in (0..n).filter(|&i| self.mask[i]) {
            coo.push(i, i, 1.0);
        }
        CsrMatrix::from(&coo)
    }

    fn field(&self, values: Vec<f64>) -> PotentialField {
        let energy = quadratic_form(&self.stiffness, &values);
        PotentialField { values, dirichlet: self.mask.clone(), energy }
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn quadratic_form(k: &CsrMatrix<f64>, u: &[f64]) -> f64 {
    spmv(k, u).iter().zip(u).map(|(a, b)| a * b).sum()
}

/// Solves the nonlinear boundary value problem by damped Newton iteration
/// started from `u = 0`.
pub fn solve_forward(
    mesh: &Mesh,
    g: &FluxProfile,
    f: &NonlinearityModel,
    opts: &SolverOptions,
) -> Result<(PotentialField, SolveReport), SolveError> {
    if !(opts.tol > 0.0) {
        return Err(SolveError::InvalidTolerance(opts.tol));
    }
    let disc = Discretization::new(mesh, g, f)?;
    let n = mesh.num_nodes();
    let mut u = vec![0.0; n];
    let mut r = disc.residual(&u);
    let mut rnorm = norm2(&r);
    let mut history = vec![rnorm];
    let mut iterations = 0;
    let converged = loop {
        iterations += 1;
        if rnorm <= opts.tol {
            break true;
        }
        if iterations > opts.max_iter {
            break false;
        }
        let jac = disc.operator(&u, |v| f.derivative(v));
        let lu = BandedLu::factor(&jac).map_err(|e| SolveError::SingularJacobian(e.0))?;
        let step = lu.solve(&r);
        let mut s = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = u.iter().zip(&step).map(|(a, d)| a - s * d).collect();
            let rt = disc.residual(&trial);
            let nt = norm2(&rt);
            if nt.is_finite() && nt < rnorm {
                accepted = Some((trial, rt, nt));
                break;
            }
            s *= 0.5;
        }
        match accepted {
            Some((trial, rt, nt)) => {
                u = trial;
                r = rt;
                rnorm = nt;
                history.push(rnorm);
            }
            None => break false,
        }
    };
    if !converged {
        return Err(SolveError::NotConverged { last_iterate: u, residual_history: history });
    }
    let field = disc.field(u);
    let energy = field.energy;
    let report = SolveReport {
        iterations,
        residual: rnorm,
        energy,
        converged,
        residual_history: history,
        energy_bound_exceeded: opts.energy_bound_sq.is_some_and(|e2| energy > e2),
    };
    Ok((field, report))
}

/// Fixed-point iteration `K u_{k+1} = b_g + b_f(u_k)`, used as an independent
/// check of the Newton solver. Converges when the boundary law is a
/// contraction relative to the Steklov spectrum of the domain.
pub fn solve_picard(
    mesh: &Mesh,
    g: &FluxProfile,
    f: &NonlinearityModel,
    tol: f64,
    max_iter: usize,
) -> Result<PotentialField, SolveError> {
    let disc = Discretization::new(mesh, g, f)?;
    let n = mesh.num_nodes();
    let zero = vec![0.0; n];
    let k = disc.operator(&zero, |_| 0.0);
    let lu = BandedLu::factor(&k).map_err(|e| SolveError::SingularJacobian(e.0))?;
    let mut u = zero;
    let mut history = Vec::new();
    for _ in 0..max_iter {
        let bf = nonlinear_load(mesh, BoundaryTag::Gamma1, &u, |v| f.eval(v));
        let rhs: Vec<f64> = (0..n).map(|i| if disc.mask[i] { 0.0 } else { disc.load_g[i] + bf[i] }).collect();
        let next = lu.solve(&rhs);
        let change = next.iter().zip(&u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        u = next;
        history.push(change);
        if change <= tol {
            return Ok(disc.field(u));
        }
    }
    Err(SolveError::NotConverged { last_iterate: u, residual_history: history })
}

/// Discrete weak-form residual norm of a field on the free nodes.
pub fn weak_residual(mesh: &Mesh, g: &FluxProfile, f: &NonlinearityModel, u: &PotentialField) -> Result<f64, SolveError> {
    let disc = Discretization::new(mesh, g, f)?;
    Ok(norm2(&disc.residual(&u.values)))
}

/// Exact P1 Dirichlet energy `uᵀ K u`.
pub fn energy(u: &PotentialField, mesh: &Mesh) -> Result<f64, SolveError> {
    nodal_energy(&u.values, mesh)
}

pub fn nodal_energy(values: &[f64], mesh: &Mesh) -> Result<f64, SolveError> {
    let mut e = 0.0;
    for (k, tri) in mesh.triangles.iter().enumerate() {
        let ke = local_stiffness(tri.map(|i| mesh.nodes[i])).ok_or(SolveError::DegenerateTriangle(k))?;
        for a in 0..3 {
            for b in 0..3 {
                e += values[tri[a]] * ke[a][b] * values[tri[b]];
            }
        }
    }
    Ok(e)
}

/// `(‖u_h − u‖_{L²}, |u_h − u|_{H¹})` against an exact solution and its
/// gradient, by a collapsed Gauss rule on every triangle.
pub fn error_norms(
    mesh: &Mesh,
    u: &PotentialField,
    exact: impl Fn(Point) -> f64,
    grad: impl Fn(Point) -> Point,
) -> Result<(f64, f64), SolveError> {
    const ORDER: usize = 5;
    let (x, w) = gauss_legendre(ORDER);
    let (mut l2, mut h1) = (0.0, 0.0);
    for (k, tri) in mesh.triangles.iter().enumerate() {
        let p = tri.map(|i| mesh.nodes[i]);
        let (g, area) = p1_gradients(p);
        if !(area > 0.0) {
            return Err(SolveError::DegenerateTriangle(k));
        }
        let vals = tri.map(|i| u.values[i]);
        let gh = [0, 1].map(|d| (0..3).map(|a| vals[a] * g[a][d]).sum::<f64>());
        for (xi, wi) in x.iter().zip(&w) {
            let s = 0.5 * (xi + 1.0);
            for (xj, wj) in x.iter().zip(&w) {
                let t = 0.5 * (xj + 1.0);
                // barycentric (1 - s, s(1 - t), s t), Jacobian 2|T| s
                let lam = [1.0 - s, s * (1.0 - t), s * t];
                let q = [0, 1].map(|d| (0..3).map(|a| lam[a] * p[a][d]).sum::<f64>());
                let weight = 0.25 * wi * wj * 2.0 * area * s;
                let uh: f64 = (0..3).map(|a| lam[a] * vals[a]).sum();
                let ge = grad(q);
                l2 += weight * (uh - exact(q)).powi(2);
                h1 += weight * ((gh[0] - ge[0]).powi(2) + (gh[1] - ge[1]).powi(2));
            }
        }
    }
    Ok((l2.sqrt(), h1.sqrt()))
}

/// Global current balance of a solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxBalance {
    /// `∫_{Γ₂} g + ∫_{Γ₁} f(u_h)`.
    pub inflow: f64,
    /// Reaction collected at the grounded nodes, `-Σ_{Γ_D nodes} (K u - b)_i`.
    pub absorbed: f64,
}

pub fn flux_balance(mesh: &Mesh, g: &FluxProfile, f: &NonlinearityModel, u: &PotentialField) -> Result<FluxBalance, SolveError> {
    let disc = Discretization::new(mesh, g, f)?;
    let ku = spmv(&disc.stiffness, &u.values);
    let bf = nonlinear_load(mesh, BoundaryTag::Gamma1, &u.values, |v| f.eval(v));
    let inflow = disc.load_g.iter().sum::<f64>() + bf.iter().sum::<f64>();
    let absorbed = -(0..mesh.num_nodes())
        .filter(|&i| disc.mask[i])
        .map(|i| ku[i] - disc.load_g[i] - bf[i])
        .sum::<f64>();
    Ok(FluxBalance { inflow, absorbed })
}
