//! Cauchy data completion from Γ₂ to Γ₁.
//!
//! The potential is sought in a finite family of exactly harmonic functions
//! whose coefficients are fitted, in weighted least squares with Tikhonov
//! regularization, to three constraint blocks: the measured potential ψ and
//! flux g on Γ₂ and the homogeneous Dirichlet condition on Γ_D. The
//! regularization weight is chosen by the discrepancy principle.

use std::f64::consts::PI;

use nalgebra::{Complex, DMatrix, DVector};
use thiserror::Error;

use crate::geometry::{dot, norm, sub, BoundaryCurve, BoundaryTag, DomainSpec, Point, TaggedPath};
use crate::linalg::composite_weights;
use crate::reconstruction::BoundaryProfile;

/// Discrepancy-principle safety factor τ.
pub const MOROZOV_TAU: f64 = 1.2;
pub const MU_MIN: f64 = 1e-16;
pub const MU_MAX: f64 = 1e2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContinuationError {
    #[error("Cauchy data arrays differ in length: t={t}, psi={psi}, g={g}")]
    LengthMismatch { t: usize, psi: usize, g: usize },
    #[error("Cauchy data arc lengths must be strictly increasing (index {0})")]
    NotIncreasing(usize),
    #[error("noise level must be finite and nonnegative, got {0}")]
    InvalidNoise(f64),
    #[error("constraint block '{0}' has no samples")]
    EmptyBlock(&'static str),
    #[error("regularization weight must be nonnegative, got {0}")]
    InvalidMu(f64),
    #[error("curve is tagged {0}, expected gamma1")]
    WrongTag(BoundaryTag),
    #[error("charge point {0} lies within {1} of the boundary")]
    ChargeTooClose(usize, f64),
    #[error("invalid basis: {0}")]
    InvalidBasis(String),
}

/// Sampled potential ψ and flux g on Γ₂ with a declared noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct CauchyData {
    pub t: Vec<f64>,
    pub psi: Vec<f64>,
    pub g: Vec<f64>,
    pub eps: f64,
    points: Vec<Point>,
    normals: Vec<Point>,
    weights: Vec<f64>,
}

impl CauchyData {
    /// Builds data sampled at arc lengths `t` along the Γ₂ path; quadrature
    /// weights restart on every side so corners do not spoil the rule.
    pub fn new(t: Vec<f64>, psi: Vec<f64>, g: Vec<f64>, eps: f64, path: &TaggedPath) -> Result<Self, ContinuationError> {
        if t.len() != psi.len() || t.len() != g.len() {
            return Err(ContinuationError::LengthMismatch { t: t.len(), psi: psi.len(), g: g.len() });
        }
        if let Some(i) = (1..t.len()).find(|&i| t[i] <= t[i - 1]) {
            return Err(ContinuationError::NotIncreasing(i));
        }
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(ContinuationError::InvalidNoise(eps));
        }
        let breaks: Vec<usize> =
            (1..t.len()).filter(|&i| path.side_index(t[i]) != path.side_index(t[i - 1])).collect();
        let weights = composite_weights(&t, &breaks);
        let points = t.iter().map(|&s| path.point_at(s)).collect();
        let normals = t.iter().map(|&s| path.normal_at(s)).collect();
        Ok(CauchyData { t, psi, g, eps, points, normals, weights })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Arc-length quadrature weights of the discrete `L²(Γ₂)` norm.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn normals(&self) -> &[Point] {
        &self.normals
    }

    pub fn l2_norm(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.weights).map(|(v, w)| w * v * v).sum::<f64>().sqrt()
    }
}

/// Quadrature samples on Γ_D where the zero potential is enforced.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletSamples {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

impl DirichletSamples {
    /// Equispaced samples on every grounded side, about `per_unit` intervals
    /// per unit length, each side integrated by its own composite rule.
    pub fn new(domain: &DomainSpec, per_unit: usize) -> Self {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for side in domain.sides().filter(|s| s.tag == BoundaryTag::GammaD) {
            let len = side.length();
            let m = ((len * per_unit as f64).ceil() as usize).max(2) + 1;
            let t: Vec<f64> = (0..m).map(|i| len * i as f64 / (m - 1) as f64).collect();
            weights.extend(composite_weights(&t, &[]));
            points.extend(t.iter().map(|&s| side.point_at(s)));
        }
        DirichletSamples { points, weights }
    }
}

/// Finite family of functions harmonic in Ω.
#[derive(Debug, Clone, PartialEq)]
pub enum HarmonicBasis {
    /// `1, Re z^k, Im z^k` for `k = 1..=degree`, with `z` centred at `center`.
    Polynomials { degree: usize, center: Point },
    /// A constant plus `log |x - y_m|` for charge points `y_m` outside Ω̄.
    FundamentalSolutions { charges: Vec<Point>, offset: f64 },
}

impl HarmonicBasis {
    pub fn polynomials(domain: &DomainSpec, degree: usize) -> Self {
        HarmonicBasis::Polynomials { degree, center: domain.centroid() }
    }

    /// `count` charges evenly spread on the circle about the centroid whose
    /// radius exceeds the farthest vertex distance by `offset`.
    pub fn fundamental_solutions(domain: &DomainSpec, count: usize, offset: f64) -> Result<Self, ContinuationError> {
        if count == 0 || !(offset > 0.0) {
            return Err(ContinuationError::InvalidBasis(format!("need count > 0 and offset > 0, got {count}, {offset}")));
        }
        let c = domain.centroid();
        let r = domain.vertices().iter().map(|v| norm(sub(*v, c))).fold(0.0, f64::max) + offset;
        let charges: Vec<Point> = (0..count)
            .map(|m| {
                let th = 2.0 * PI * m as f64 / count as f64;
                [c[0] + r * th.cos(), c[1] + r * th.sin()]
            })
            .collect();
        let basis = HarmonicBasis::FundamentalSolutions { charges, offset };
        basis.check_charges(domain)?;
        Ok(basis)
    }

    /// Every charge must lie outside Ω̄ at distance at least `offset / 2`.
    pub fn check_charges(&self, domain: &DomainSpec) -> Result<(), ContinuationError> {
        if let HarmonicBasis::FundamentalSolutions { charges, offset } = self {
            for (m, y) in charges.iter().enumerate() {
                let d = domain.distance_to_boundary(*y);
                if domain.contains(*y) || d < 0.5 * offset {
                    return Err(ContinuationError::ChargeTooClose(m, d));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        match self {
            HarmonicBasis::Polynomials { degree, .. } => 2 * degree + 1,
            HarmonicBasis::FundamentalSolutions { charges, .. } => charges.len() + 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn kind(&self) -> &'static str {
        match self {
            HarmonicBasis::Polynomials { .. } => "polynomials",
            HarmonicBasis::FundamentalSolutions { .. } => "fundamental_solutions",
        }
    }

    /// Values and gradients of every basis function at `p`.
    pub fn evaluate(&self, p: Point, values: &mut [f64], grads: &mut [Point]) {
        match self {
            HarmonicBasis::Polynomials { degree, center } => {
                let z = Complex::new(p[0] - center[0], p[1] - center[1]);
                values[0] = 1.0;
                grads[0] = [0.0, 0.0];
                let mut zk_1 = Complex::new(1.0, 0.0); // z^{k-1}
                for k in 1..=*degree {
                    let dz = zk_1 * k as f64;
                    let zk = zk_1 * z;
                    values[2 * k - 1] = zk.re;
                    values[2 * k] = zk.im;
                    grads[2 * k - 1] = [dz.re, -dz.im];
                    grads[2 * k] = [dz.im, dz.re];
                    zk_1 = zk;
                }
            }
            HarmonicBasis::FundamentalSolutions { charges, .. } => {
                values[0] = 1.0;
                grads[0] = [0.0, 0.0];
                for (m, y) in charges.iter().enumerate() {
                    let d = sub(p, *y);
                    let r2 = dot(d, d);
                    values[m + 1] = 0.5 * r2.ln();
                    grads[m + 1] = [d[0] / r2, d[1] / r2];
                }
            }
        }
    }

    /// Value and gradient of the expansion with coefficients `c` at `p`.
    pub fn expansion(&self, c: &[f64], p: Point) -> (f64, Point) {
        let n = self.len();
        let mut vals = vec![0.0; n];
        let mut grads = vec![[0.0; 2]; n];
        self.evaluate(p, &mut vals, &mut grads);
        let mut u = 0.0;
        let mut g = [0.0; 2];
        for k in 0..n {
            u += c[k] * vals[k];
            g[0] += c[k] * grads[k][0];
            g[1] += c[k] * grads[k][1];
        }
        (u, g)
    }
}

/// Row-weighted least-squares system `[ψ-block; g-block; Γ_D-block]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSystem {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    /// Row counts of the ψ, g and Γ_D blocks.
    pub block_rows: [usize; 3],
}

impl DesignSystem {
    /// Weighted `L²` misfit of each block for coefficients `c`.
    pub fn discrepancy(&self, c: &DVector<f64>) -> Discrepancy {
        let r = &self.matrix * c - &self.rhs;
        let [n1, n2, n3] = self.block_rows;
        let block = |a: usize, b: usize| r.rows(a, b).norm();
        Discrepancy { psi: block(0, n1), flux: block(n1, n2), dirichlet: block(n1 + n2, n3) }
    }
}

pub fn design_matrix(
    basis: &HarmonicBasis,
    data: &CauchyData,
    dirichlet: &DirichletSamples,
) -> Result<DesignSystem, ContinuationError> {
    if data.is_empty() {
        return Err(ContinuationError::EmptyBlock("cauchy"));
    }
    if dirichlet.points.is_empty() {
        return Err(ContinuationError::EmptyBlock("dirichlet"));
    }
    let (n2, nd, nb) = (data.len(), dirichlet.points.len(), basis.len());
    let rows = 2 * n2 + nd;
    let mut a = DMatrix::zeros(rows, nb);
    let mut b = DVector::zeros(rows);
    let mut vals = vec![0.0; nb];
    let mut grads = vec![[0.0; 2]; nb];
    for j in 0..n2 {
        let sw = data.weights[j].sqrt();
        basis.evaluate(data.points[j], &mut vals, &mut grads);
        let nu = data.normals[j];
        for k in 0..nb {
            a[(j, k)] = sw * vals[k];
            a[(n2 + j, k)] = sw * dot(grads[k], nu);
        }
        b[j] = sw * data.psi[j];
        b[n2 + j] = sw * data.g[j];
    }
    for i in 0..nd {
        let sw = dirichlet.weights[i].sqrt();
        basis.evaluate(dirichlet.points[i], &mut vals, &mut grads);
        for k in 0..nb {
            a[(2 * n2 + i, k)] = sw * vals[k];
        }
    }
    Ok(DesignSystem { matrix: a, rhs: b, block_rows: [n2, n2, nd] })
}

/// Weighted `L²` misfits of the three constraint blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discrepancy {
    pub psi: f64,
    pub flux: f64,
    pub dirichlet: f64,
}

impl Discrepancy {
    /// Root mean square over the blocks; the quantity matched to `τ ε`.
    pub fn combined(&self) -> f64 {
        ((self.psi * self.psi + self.flux * self.flux + self.dirichlet * self.dirichlet) / 3.0).sqrt()
    }

    /// Full weighted residual norm `‖A c - b‖`.
    pub fn total(&self) -> f64 {
        3f64.sqrt() * self.combined()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationResult {
    pub basis: HarmonicBasis,
    pub coefficients: Vec<f64>,
    pub mu: f64,
    pub discrepancy: Discrepancy,
    /// Ratio of extreme singular values of the design matrix.
    pub condition_number: f64,
    /// Set when even the smallest admissible μ misses the noise target.
    pub under_resolved: bool,
}

/// Design system with its SVD, ready for repeated Tikhonov solves.
#[derive(Debug, Clone)]
pub struct CauchySolver {
    basis: HarmonicBasis,
    system: DesignSystem,
    v: DMatrix<f64>,
    sigma: DVector<f64>,
    utb: DVector<f64>,
    eps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MuChoice {
    pub mu: f64,
    pub under_resolved: bool,
    /// `(μ, combined discrepancy)` for every evaluation, sorted by μ.
    pub trace: Vec<(f64, f64)>,
}

impl CauchySolver {
    pub fn new(basis: HarmonicBasis, data: &CauchyData, dirichlet: &DirichletSamples) -> Result<Self, ContinuationError> {
        let system = design_matrix(&basis, data, dirichlet)?;
        let svd = system.matrix.clone().svd(true, true);
        let u = svd.u.expect("requested U");
        let v = svd.v_t.expect("requested Vᵀ").transpose();
        let utb = u.transpose() * &system.rhs;
        Ok(CauchySolver { basis, system, v, sigma: svd.singular_values, utb, eps: data.eps })
    }

    pub fn system(&self) -> &DesignSystem {
        &self.system
    }

    pub fn basis(&self) -> &HarmonicBasis {
        &self.basis
    }

    pub fn condition_number(&self) -> f64 {
        let max = self.sigma.max();
        let min = self.sigma.min();
        if min > 0.0 { max / min } else { f64::INFINITY }
    }

    fn coefficients(&self, mu: f64) -> DVector<f64> {
        let smax = self.sigma.max();
        let cutoff = smax * f64::EPSILON * self.system.matrix.nrows().max(self.basis.len()) as f64;
        let filt = DVector::from_iterator(
            self.sigma.len(),
            self.sigma.iter().zip(self.utb.iter()).map(|(&s, &b)| {
                if mu == 0.0 {
                    if s > cutoff { b / s } else { 0.0 }
                } else {
                    s * b / (s * s + mu)
                }
            }),
        );
        &self.v * filt
    }

    pub fn discrepancy(&self, mu: f64) -> Discrepancy {
        self.system.discrepancy(&self.coefficients(mu))
    }

    /// Minimizer of `‖A c - b‖² + μ ‖c‖²`; the minimum-norm least-squares
    /// solution for `μ = 0`.
    pub fn fit(&self, mu: f64) -> Result<ContinuationResult, ContinuationError> {
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(ContinuationError::InvalidMu(mu));
        }
        let c = self.coefficients(mu);
        Ok(ContinuationResult {
            basis: self.basis.clone(),
            discrepancy: self.system.discrepancy(&c),
            coefficients: c.iter().copied().collect(),
            mu,
            condition_number: self.condition_number(),
            under_resolved: false,
        })
    }

    /// Discrepancy principle: the largest μ in `[MU_MIN, MU_MAX]` whose
    /// combined discrepancy stays below `τ ε`, located by bisection in `log μ`.
    pub fn choose_mu(&self) -> Result<MuChoice, ContinuationError> {
        if !(self.eps > 0.0) {
            return Err(ContinuationError::InvalidNoise(self.eps));
        }
        let target = MOROZOV_TAU * self.eps;
        let mut trace = Vec::new();
        let mut eval = |mu: f64| {
            let d = self.discrepancy(mu).combined();
            trace.push((mu, d));
            d
        };
        let (mut lo, mut hi) = (MU_MIN.ln(), MU_MAX.ln());
        let (mu, under_resolved) = if eval(MU_MAX) <= target {
            (MU_MAX, false)
        } else if eval(MU_MIN) > target {
            (MU_MIN, true)
        } else {
            for _ in 0..64 {
                let mid = 0.5 * (lo + hi);
                if eval(mid.exp()) <= target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            (lo.exp(), false)
        };
        trace.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(MuChoice { mu, under_resolved, trace })
    }

    /// Fit with μ from the discrepancy principle.
    pub fn fit_morozov(&self) -> Result<ContinuationResult, ContinuationError> {
        let choice = self.choose_mu()?;
        let mut res = self.fit(choice.mu)?;
        res.under_resolved = choice.under_resolved;
        Ok(res)
    }
}

pub fn fit(
    basis: &HarmonicBasis,
    data: &CauchyData,
    dirichlet: &DirichletSamples,
    mu: f64,
) -> Result<ContinuationResult, ContinuationError> {
    CauchySolver::new(basis.clone(), data, dirichlet)?.fit(mu)
}

pub fn choose_mu(basis: &HarmonicBasis, data: &CauchyData, dirichlet: &DirichletSamples) -> Result<MuChoice, ContinuationError> {
    CauchySolver::new(basis.clone(), data, dirichlet)?.choose_mu()
}

/// Potential, normal flux and tangential derivative of the fitted expansion
/// along a Γ₁ curve, evaluated analytically.
pub fn evaluate_on_gamma1(result: &ContinuationResult, curve: &BoundaryCurve) -> Result<BoundaryProfile, ContinuationError> {
    if curve.tag != BoundaryTag::Gamma1 {
        return Err(ContinuationError::WrongTag(curve.tag));
    }
    let mut v = Vec::with_capacity(curve.len());
    let mut w = Vec::with_capacity(curve.len());
    let mut dv = Vec::with_capacity(curve.len());
    for i in 0..curve.len() {
        let (u, g) = result.basis.expansion(&result.coefficients, curve.points[i]);
        v.push(u);
        w.push(dot(g, curve.normals[i]));
        dv.push(dot(g, curve.tangent(i)));
    }
    Ok(BoundaryProfile { t: curve.t.clone(), v, w, dv })
}
