use std::fmt;

use crate::geometry::{inner_portion, BoundaryCurve, DomainSpec, GeometryError};

use super::SolveError;

/// Boundary law `∂u/∂ν = f(u)` on the corroded portion. Every variant
/// satisfies `f(0) = 0` and is globally Lipschitz.
#[derive(Debug, Clone, PartialEq)]
pub enum NonlinearityModel {
    /// `λ (exp(a u) - exp(-(1 - a) u))`, continued linearly (with matching
    /// slope) outside `[-u_max, u_max]`.
    Exponential { lambda: f64, a: f64, u_max: f64 },
    Linear { slope: f64 },
    /// Piecewise-linear through sorted knots containing `(0, 0)`, extended
    /// with the end slopes.
    Tabulated { knots: Vec<(f64, f64)> },
}

impl NonlinearityModel {
    pub fn exponential(lambda: f64, a: f64, u_max: f64) -> Result<Self, SolveError> {
        let m = NonlinearityModel::Exponential { lambda, a, u_max };
        m.validate()?;
        Ok(m)
    }

    pub fn tabulated(knots: Vec<(f64, f64)>) -> Result<Self, SolveError> {
        let m = NonlinearityModel::Tabulated { knots };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        let bad = |msg: String| Err(SolveError::InvalidModel(msg));
        match self {
            NonlinearityModel::Exponential { lambda, a, u_max } => {
                if !(*a > 0.0 && *a < 1.0) {
                    return bad(format!("transfer coefficient must lie in (0,1), got {a}"));
                }
                if !(lambda.is_finite() && *lambda >= 0.0) {
                    return bad(format!("current-density scale must be finite and nonnegative, got {lambda}"));
                }
                if !(u_max.is_finite() && *u_max > 0.0) {
                    return bad(format!("truncation potential must be positive, got {u_max}"));
                }
            }
            NonlinearityModel::Linear { slope } => {
                if !slope.is_finite() {
                    return bad("slope must be finite".into());
                }
            }
            NonlinearityModel::Tabulated { knots } => {
                if knots.len() < 2 {
                    return bad("tabulated law needs at least two knots".into());
                }
                if knots.iter().any(|(u, f)| !u.is_finite() || !f.is_finite()) {
                    return bad("tabulated knots must be finite".into());
                }
                if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return bad("tabulated knots must be strictly increasing in u".into());
                }
                if !knots.iter().any(|&(u, f)| u == 0.0 && f == 0.0) {
                    return bad("tabulated law must contain the knot (0, 0)".into());
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, u: f64) -> f64 {
        match self {
            NonlinearityModel::Exponential { lambda, a, u_max } => {
                let raw = |u: f64| lambda * ((a * u).exp() - (-(1.0 - a) * u).exp());
                if u > *u_max {
                    raw(*u_max) + self.derivative(*u_max) * (u - u_max)
                } else if u < -*u_max {
                    raw(-*u_max) + self.derivative(-*u_max) * (u + u_max)
                } else {
                    raw(u)
                }
            }
            NonlinearityModel::Linear { slope } => slope * u,
            NonlinearityModel::Tabulated { knots } => {
                let k = segment(knots, u);
                let ((u0, f0), (u1, f1)) = (knots[k], knots[k + 1]);
                f0 + (f1 - f0) / (u1 - u0) * (u - u0)
            }
        }
    }

    /// Derivative; at tabulated knots the right-hand slope is returned.
    pub fn derivative(&self, u: f64) -> f64 {
        match self {
            NonlinearityModel::Exponential { lambda, a, u_max } => {
                let v = u.clamp(-*u_max, *u_max);
                lambda * (a * (a * v).exp() + (1.0 - a) * (-(1.0 - a) * v).exp())
            }
            NonlinearityModel::Linear { slope } => *slope,
            NonlinearityModel::Tabulated { knots } => {
                let k = segment(knots, u);
                let ((u0, f0), (u1, f1)) = (knots[k], knots[k + 1]);
                (f1 - f0) / (u1 - u0)
            }
        }
    }

    /// Global Lipschitz constant L.
    pub fn lipschitz(&self) -> f64 {
        match self {
            NonlinearityModel::Exponential { lambda, a, u_max } => {
                lambda * (a * (a * u_max).exp() + (1.0 - a) * ((1.0 - a) * u_max).exp())
            }
            NonlinearityModel::Linear { slope } => slope.abs(),
            NonlinearityModel::Tabulated { knots } => knots
                .windows(2)
                .map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs())
                .fold(0.0, f64::max),
        }
    }

    /// Points where the derivative may jump.
    pub fn kinks(&self) -> Vec<f64> {
        match self {
            NonlinearityModel::Tabulated { knots } => {
                knots[1..knots.len() - 1].iter().map(|k| k.0).collect()
            }
            _ => Vec::new(),
        }
    }
}

impl fmt::Display for NonlinearityModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NonlinearityModel::Exponential { lambda, a, u_max } => {
                write!(f, "exponential(lambda={lambda}, a={a}, u_max={u_max})")
            }
            NonlinearityModel::Linear { slope } => write!(f, "linear(slope={slope})"),
            NonlinearityModel::Tabulated { knots } => write!(f, "tabulated({} knots)", knots.len()),
        }
    }
}

/// Index `k` of the segment `[x_k, x_{k+1}]` used for `x`, clamped to the end
/// segments for extrapolation.
fn segment(knots: &[(f64, f64)], x: f64) -> usize {
    let n = knots.len();
    let k = knots.partition_point(|(u, _)| *u <= x);
    k.saturating_sub(1).min(n - 2)
}

#[derive(Debug, Clone, PartialEq)]
pub enum FluxShape {
    Constant(f64),
    /// Coefficients in increasing powers of arc length.
    Polynomial(Vec<f64>),
    /// Piecewise-linear in arc length, constant beyond the end knots.
    Tabulated(Vec<(f64, f64)>),
}

/// Prescribed current flux `g` on Γ₂ as a function of arc length.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxProfile {
    pub shape: FluxShape,
    /// Hölder exponent used for the regularity check.
    pub alpha: f64,
    /// Bound G on the Hölder norm, if one is imposed.
    pub holder_bound: Option<f64>,
}

impl FluxProfile {
    pub fn new(shape: FluxShape) -> Self {
        FluxProfile { shape, alpha: 0.5, holder_bound: None }
    }

    pub fn constant(c: f64) -> Self {
        FluxProfile::new(FluxShape::Constant(c))
    }

    pub fn polynomial(coeffs: Vec<f64>) -> Self {
        FluxProfile::new(FluxShape::Polynomial(coeffs))
    }

    pub fn zero() -> Self {
        FluxProfile::constant(0.0)
    }

    pub fn eval(&self, t: f64) -> f64 {
        match &self.shape {
            FluxShape::Constant(c) => *c,
            FluxShape::Polynomial(c) => c.iter().rev().fold(0.0, |acc, ci| acc * t + ci),
            FluxShape::Tabulated(knots) => {
                if t <= knots[0].0 {
                    knots[0].1
                } else if t >= knots[knots.len() - 1].0 {
                    knots[knots.len() - 1].1
                } else {
                    let k = segment(knots, t);
                    let ((t0, g0), (t1, g1)) = (knots[k], knots[k + 1]);
                    g0 + (g1 - g0) / (t1 - t0) * (t - t0)
                }
            }
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let shape = match &self.shape {
            FluxShape::Constant(c) => FluxShape::Constant(factor * c),
            FluxShape::Polynomial(c) => FluxShape::Polynomial(c.iter().map(|v| factor * v).collect()),
            FluxShape::Tabulated(k) => FluxShape::Tabulated(k.iter().map(|&(t, g)| (t, factor * g)).collect()),
        };
        FluxProfile { shape, alpha: self.alpha, holder_bound: self.holder_bound.map(|g| g * factor.abs()) }
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        let finite = match &self.shape {
            FluxShape::Constant(c) => c.is_finite(),
            FluxShape::Polynomial(c) => c.iter().all(|v| v.is_finite()),
            FluxShape::Tabulated(k) => {
                if k.is_empty() || k.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(SolveError::InvalidFlux("tabulated flux knots must be nonempty and increasing".into()));
                }
                k.iter().all(|(t, g)| t.is_finite() && g.is_finite())
            }
        };
        if !finite {
            return Err(SolveError::InvalidFlux("flux values must be finite".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(SolveError::InvalidFlux(format!("Hölder exponent must lie in (0,1), got {}", self.alpha)));
        }
        Ok(())
    }

    /// Discrete `C^{0,α}` norm over the samples: `sup|g| + r0^α · max quotient`.
    pub fn holder_norm(&self, t: &[f64], r0: f64) -> f64 {
        let g: Vec<f64> = t.iter().map(|&s| self.eval(s)).collect();
        let sup = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut q: f64 = 0.0;
        for i in 0..t.len() {
            for j in (i + 1)..t.len() {
                let d = (t[j] - t[i]).abs();
                if d > 0.0 {
                    q = q.max((g[j] - g[i]).abs() / d.powf(self.alpha));
                }
            }
        }
        sup + r0.powf(self.alpha) * q
    }

    /// Checks the Hölder bound G, when one is set, on the sample grid.
    pub fn check_holder(&self, curve: &BoundaryCurve, r0: f64) -> Result<f64, SolveError> {
        let norm = self.holder_norm(&curve.t, r0);
        match self.holder_bound {
            Some(bound) if norm > bound => Err(SolveError::InvalidFlux(format!(
                "Hölder norm {norm} exceeds the bound G = {bound}"
            ))),
            _ => Ok(norm),
        }
    }

    /// `sup |g|` over the inner portion Γ_{2,2r0}, sampled on `m` points.
    pub fn sup_on_inner_portion(&self, domain: &DomainSpec, m: usize) -> Result<f64, GeometryError> {
        let path = domain.path(crate::geometry::BoundaryTag::Gamma2)?;
        let curve = BoundaryCurve::sample(&path, m);
        let inner = inner_portion(domain, &curve, 2.0 * domain.r0)?;
        Ok(inner.t.iter().map(|&t| self.eval(t).abs()).fold(0.0, f64::max))
    }
}
