//! End-to-end scenarios, noise and flux-magnitude sweeps, rate fitting and
//! a numerical three-spheres check.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::continuation::{
    evaluate_on_gamma1, CauchyData, CauchySolver, ContinuationError, ContinuationResult, DirichletSamples, HarmonicBasis,
};
use crate::forward::{
    extract_cauchy_data, perturb, solve_forward, FluxProfile, NonlinearityModel, PotentialField, SolveError, SolveReport,
    SolverOptions,
};
use crate::geometry::{build_rectangle_mesh, BoundaryCurve, BoundaryTag, DomainSpec, GeometryError, Mesh, Point};
use crate::linalg::gauss_legendre;
use crate::reconstruction::{
    extract_f, find_monotone_segment, oscillation, overlap_and_error, BoundaryProfile, MonotoneSegment, Overlap,
    ReconstructError, ReconstructedNonlinearity, OVERLAP_GRID,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("geometry: {0}")]
    Geometry(#[from] GeometryError),
    #[error("forward: {0}")]
    Forward(#[from] SolveError),
    #[error("continuation: {0}")]
    Continuation(#[from] ContinuationError),
    #[error("continuation: under-resolved, discrepancy {discrepancy:.3e} exceeds the target at mu = {mu:.1e}")]
    UnderResolved { mu: f64, discrepancy: f64 },
    #[error("reconstruction: {0}")]
    Reconstruction(#[from] ReconstructError),
    #[error("experiment: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BasisKind {
    Polynomials { degree: usize },
    /// Charges at `offset_factor · diam Ω` beyond the farthest vertex.
    FundamentalSolutions { count: usize, offset_factor: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisSettings {
    pub kind: BasisKind,
    /// Γ_D samples per unit length.
    pub dirichlet_density: usize,
}

impl Default for BasisSettings {
    fn default() -> Self {
        BasisSettings { kind: BasisKind::Polynomials { degree: 10 }, dirichlet_density: 64 }
    }
}

impl BasisSettings {
    pub fn build(&self, domain: &DomainSpec) -> Result<HarmonicBasis, ContinuationError> {
        match self.kind {
            BasisKind::Polynomials { degree } => Ok(HarmonicBasis::polynomials(domain, degree)),
            BasisKind::FundamentalSolutions { count, offset_factor } => {
                HarmonicBasis::fundamental_solutions(domain, count, offset_factor * domain.diameter())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructionSettings {
    /// Γ₁ samples of the continued traces.
    pub gamma1_samples: usize,
    /// Monotonicity threshold as a fraction of `max |dv/dt|`.
    pub threshold_factor: f64,
    /// Trim as a multiple of the combined continuation discrepancy.
    pub trim_factor: f64,
    /// Regularization weight used for exact data (`ε = 0`).
    pub noiseless_mu: f64,
}

impl Default for ReconstructionSettings {
    fn default() -> Self {
        ReconstructionSettings { gamma1_samples: 201, threshold_factor: 0.25, trim_factor: 2.0, noiseless_mu: 1e-12 }
    }
}

/// Everything needed to run the forward → continue → reconstruct chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub domain: DomainSpec,
    /// Cells along the shorter side of the rectangle.
    pub mesh_n: usize,
    pub model: NonlinearityModel,
    pub flux: FluxProfile,
    pub basis: BasisSettings,
    pub reconstruction: ReconstructionSettings,
    pub solver: SolverOptions,
}

impl Scenario {
    /// Unit square with `u = xy` as exact solution: `f(u) = u` on the top,
    /// `g(t) = t` on the right.
    pub fn manufactured_xy() -> Self {
        Scenario {
            domain: DomainSpec::unit_square(),
            mesh_n: 128,
            model: NonlinearityModel::Linear { slope: 1.0 },
            flux: FluxProfile::polynomial(vec![0.0, 1.0]),
            basis: BasisSettings::default(),
            reconstruction: ReconstructionSettings::default(),
            solver: SolverOptions::default(),
        }
    }

    /// Unit square, exponential law with `λ = 0.1`, `a = 0.5` and the
    /// current `g(t) = t` on the right side.
    pub fn exponential_default() -> Self {
        Scenario {
            model: NonlinearityModel::Exponential { lambda: 0.1, a: 0.5, u_max: 5.0 },
            ..Scenario::manufactured_xy()
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.model.validate()?;
        self.flux.validate()?;
        if self.mesh_n == 0 {
            return Err(PipelineError::Config("mesh resolution must be positive".into()));
        }
        let r = &self.reconstruction;
        if r.gamma1_samples < 2 || !(r.threshold_factor >= 0.0) || !(r.trim_factor >= 0.0) || !(r.noiseless_mu >= 0.0) {
            return Err(PipelineError::Config(format!("invalid reconstruction settings {r:?}")));
        }
        Ok(())
    }

    pub fn mesh(&self) -> Result<Mesh, PipelineError> {
        Ok(build_rectangle_mesh(&self.domain, self.mesh_n)?)
    }

    /// Solves the forward problem once; the result is shared by every
    /// pipeline run on this scenario.
    pub fn solve(&self) -> Result<ForwardRun, PipelineError> {
        self.validate()?;
        let mesh = self.mesh()?;
        let (field, report) = solve_forward(&mesh, &self.flux, &self.model, &self.solver)?;
        let clean = extract_cauchy_data(&field, &mesh, 0.0, 0)?;
        let data_floor = continue_data(self, &clean)?.discrepancy.combined();
        Ok(ForwardRun { mesh, field, report, clean, data_floor })
    }
}

#[derive(Debug, Clone)]
pub struct ForwardRun {
    pub mesh: Mesh,
    pub field: PotentialField,
    pub report: SolveReport,
    /// Unperturbed Cauchy data on Γ₂.
    pub clean: CauchyData,
    /// Combined discrepancy of the noiseless fit: how far the clean data sit
    /// from the span of the basis (discretization plus truncation error).
    pub data_floor: f64,
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub data: CauchyData,
    pub continuation: ContinuationResult,
    pub profile: BoundaryProfile,
    pub segment: MonotoneSegment,
    pub reconstruction: ReconstructedNonlinearity,
    pub truth: ReconstructedNonlinearity,
    pub overlap: Overlap,
}

impl PipelineOutcome {
    pub fn sup_error(&self) -> f64 {
        self.overlap.sup_error
    }
}

/// Continues `data` to Γ₁: fixed μ for exact data, discrepancy principle
/// otherwise.
pub fn continue_data(scenario: &Scenario, data: &CauchyData) -> Result<ContinuationResult, PipelineError> {
    let basis = scenario.basis.build(&scenario.domain)?;
    let dirichlet = DirichletSamples::new(&scenario.domain, scenario.basis.dirichlet_density);
    let solver = CauchySolver::new(basis, data, &dirichlet)?;
    let res = if data.eps == 0.0 { solver.fit(scenario.reconstruction.noiseless_mu)? } else { solver.fit_morozov()? };
    if res.under_resolved {
        return Err(PipelineError::UnderResolved { mu: res.mu, discrepancy: res.discrepancy.combined() });
    }
    Ok(res)
}

pub fn gamma1_profile(scenario: &Scenario, res: &ContinuationResult) -> Result<BoundaryProfile, PipelineError> {
    let path = scenario.domain.path(BoundaryTag::Gamma1)?;
    let curve = BoundaryCurve::sample(&path, scenario.reconstruction.gamma1_samples);
    Ok(evaluate_on_gamma1(res, &curve)?)
}

/// Monotone segment and trimmed reconstruction from a Γ₁ profile.
pub fn reconstruct(
    settings: &ReconstructionSettings,
    profile: &BoundaryProfile,
    discrepancy: f64,
) -> Result<(MonotoneSegment, ReconstructedNonlinearity), PipelineError> {
    let max_slope = profile.dv.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let seg = find_monotone_segment(profile, settings.threshold_factor * max_slope)?;
    let rec = extract_f(profile, &seg, settings.trim_factor * discrepancy)?;
    Ok((seg, rec))
}

/// The true law sampled on the overlap grid of `rec`, so the comparison is
/// exact at every grid point.
pub fn truth_on(model: &NonlinearityModel, rec: &ReconstructedNonlinearity) -> ReconstructedNonlinearity {
    ReconstructedNonlinearity::from_model(model, rec.interval, OVERLAP_GRID)
}

impl ForwardRun {
    /// Error level declared to the discrepancy principle for added noise
    /// `eps`: the noise combined with the floor of the clean data.
    pub fn declared_noise(&self, eps: f64) -> f64 {
        if eps == 0.0 { 0.0 } else { eps.hypot(self.data_floor) }
    }

    /// Perturb, continue, reconstruct and compare against the true law.
    pub fn pipeline(&self, scenario: &Scenario, eps: f64, seed: u64) -> Result<PipelineOutcome, PipelineError> {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(SolveError::InvalidNoise(eps).into());
        }
        let data = perturb(&self.clean, eps, seed);
        let mut declared = data.clone();
        declared.eps = self.declared_noise(eps);
        let continuation = continue_data(scenario, &declared)?;
        let profile = gamma1_profile(scenario, &continuation)?;
        let (segment, reconstruction) =
            reconstruct(&scenario.reconstruction, &profile, continuation.discrepancy.combined())?;
        let truth = truth_on(&scenario.model, &reconstruction);
        let overlap = overlap_and_error(&reconstruction, &truth)?;
        Ok(PipelineOutcome { data, continuation, profile, segment, reconstruction, truth, overlap })
    }
}

/// Sweep over noise levels and seeds plus the magnitude and three-spheres
/// settings of the `check` experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    /// Strictly decreasing positive noise levels.
    pub levels: Vec<f64>,
    pub seeds: usize,
    pub base_seed: u64,
    pub magnitudes: Vec<f64>,
    pub sphere_trials: usize,
    /// Inner radius ρ₀; `None` picks the largest with `B_{4ρ₀}` inside Ω.
    pub sphere_rho0: Option<f64>,
    pub sphere_center: Option<Point>,
}

impl ExperimentConfig {
    pub fn new(scenario: Scenario) -> Self {
        ExperimentConfig {
            scenario,
            levels: vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6],
            seeds: 20,
            base_seed: 0,
            magnitudes: (1..=10).map(|k| k as f64 / 10.0).collect(),
            sphere_trials: 100,
            sphere_rho0: None,
            sphere_center: None,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.scenario.validate()?;
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.levels.len() < 3 {
            return bad(format!("need at least 3 noise levels, got {}", self.levels.len()));
        }
        if self.levels.iter().any(|e| !(*e > 0.0 && *e < 1.0)) || self.levels.windows(2).any(|w| w[1] >= w[0]) {
            return bad("noise levels must lie in (0,1) and decrease strictly".into());
        }
        if self.seeds < 5 {
            return bad(format!("need at least 5 seeds per level, got {}", self.seeds));
        }
        if self.magnitudes.iter().any(|m| !(*m >= 0.0)) || self.magnitudes.windows(2).any(|w| w[1] <= w[0]) {
            return bad("magnitudes must be nonnegative and increase strictly".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelRecord {
    pub eps: f64,
    /// `NaN` when every seed failed.
    pub median: f64,
    pub iqr: f64,
    pub failures: usize,
    pub errors: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    /// `C` for the log-power law, `c` for the stretched exponential.
    pub scale: f64,
    /// `θ` or `γ`.
    pub exponent: f64,
    pub rms_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityCurve {
    pub levels: Vec<LevelRecord>,
    pub fit: Option<RateFit>,
    /// Error of the noiseless run.
    pub baseline: Option<f64>,
    /// Largest level at which most seeds still find a monotone segment.
    pub eps0: Option<f64>,
    /// Adjacent levels whose medians increase as ε decreases.
    pub inversions: usize,
}

/// Median and interquartile range by linear interpolation between order
/// statistics.
pub fn median_iqr(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let x = p * (v.len() - 1) as f64;
        let i = x.floor() as usize;
        let j = (i + 1).min(v.len() - 1);
        v[i] + (x - i as f64) * (v[j] - v[i])
    };
    (q(0.5), q(0.75) - q(0.25))
}

pub fn run_noise_sweep(config: &ExperimentConfig) -> Result<StabilityCurve, PipelineError> {
    config.validate()?;
    let scenario = &config.scenario;
    let fwd = scenario.solve()?;
    let cells: Vec<(usize, usize)> =
        (0..config.levels.len()).flat_map(|l| (0..config.seeds).map(move |s| (l, s))).collect();
    let mut results: Vec<((usize, usize), Result<f64, PipelineError>)> = cells
        .par_iter()
        .map(|&(l, s)| {
            let seed = config.base_seed.wrapping_add(s as u64);
            ((l, s), fwd.pipeline(scenario, config.levels[l], seed).map(|o| o.sup_error()))
        })
        .collect();
    results.sort_by_key(|r| r.0);
    let mut levels = Vec::with_capacity(config.levels.len());
    let mut eps0 = None;
    for (l, &eps) in config.levels.iter().enumerate() {
        let cell = results.iter().filter(|r| r.0 .0 == l);
        let errors: Vec<f64> = cell.clone().filter_map(|r| r.1.as_ref().ok().copied()).collect();
        let no_segment = cell
            .filter(|r| {
                matches!(
                    r.1,
                    Err(PipelineError::Reconstruction(
                        ReconstructError::NoMonotoneSegment(_) | ReconstructError::EmptyInterval { .. }
                    ))
                )
            })
            .count();
        if eps0.is_none() && 2 * no_segment < config.seeds {
            eps0 = Some(eps);
        }
        let (median, iqr) = median_iqr(&errors);
        levels.push(LevelRecord { eps, median, iqr, failures: config.seeds - errors.len(), errors });
    }
    let inversions = levels.windows(2).filter(|w| w[1].median > w[0].median).count();
    let ok: Vec<&LevelRecord> = levels.iter().filter(|r| r.median > 0.0).collect();
    let fit = if ok.len() >= 3 {
        let xs: Vec<f64> = ok.iter().map(|r| r.eps).collect();
        let ys: Vec<f64> = ok.iter().map(|r| r.median).collect();
        fit_rate(&xs, &ys, RateModel::LogPower).ok()
    } else {
        None
    };
    let baseline = fwd.pipeline(scenario, 0.0, config.base_seed).ok().map(|o| o.sup_error());
    Ok(StabilityCurve { levels, fit, baseline, eps0, inversions })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillationRecord {
    pub m: f64,
    /// `sup |g|` on the inner portion of Γ₂.
    pub gsup: f64,
    pub osc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OscillationCurve {
    pub records: Vec<OscillationRecord>,
    pub fit: Option<RateFit>,
    /// First magnitude whose forward solve failed; the sweep stops there.
    pub truncated_at: Option<(f64, String)>,
}

/// Samples of Γ₂ used for `sup |g|` on its inner portion.
pub const INNER_SAMPLES: usize = 1001;

pub fn run_oscillation_sweep(config: &ExperimentConfig, magnitudes: &[f64]) -> Result<OscillationCurve, PipelineError> {
    config.scenario.validate()?;
    if magnitudes.iter().any(|m| !(*m >= 0.0)) || magnitudes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(PipelineError::Config("magnitudes must be nonnegative and increase strictly".into()));
    }
    let sc = &config.scenario;
    let base = sc.flux.sup_on_inner_portion(&sc.domain, INNER_SAMPLES)?;
    if !(base > 0.0) {
        return Err(PipelineError::Config("base flux vanishes on the inner portion of gamma2".into()));
    }
    let mesh = sc.mesh()?;
    let mut records = Vec::new();
    let mut truncated_at = None;
    for &m in magnitudes {
        let g = sc.flux.scaled(m / base);
        let field = match solve_forward(&mesh, &g, &sc.model, &sc.solver) {
            Ok((u, _)) => u,
            Err(e) => {
                truncated_at = Some((m, e.to_string()));
                break;
            }
        };
        let trace = crate::forward::dirichlet_trace(&field, &mesh, BoundaryTag::Gamma1)?;
        let profile = BoundaryProfile {
            t: trace.curve.t.clone(),
            v: trace.values.clone(),
            w: vec![0.0; trace.values.len()],
            dv: vec![0.0; trace.values.len()],
        };
        let gsup = g.sup_on_inner_portion(&sc.domain, INNER_SAMPLES)?;
        records.push(OscillationRecord { m, gsup, osc: oscillation(&profile) });
    }
    let pos: Vec<&OscillationRecord> = records.iter().filter(|r| r.m > 0.0 && r.osc > 0.0 && r.osc < 1.0).collect();
    let fit = if pos.len() >= 3 {
        let xs: Vec<f64> = pos.iter().map(|r| r.m).collect();
        let ys: Vec<f64> = pos.iter().map(|r| r.osc).collect();
        fit_rate(&xs, &ys, RateModel::ExpStretch).ok()
    } else {
        None
    };
    Ok(OscillationCurve { records, fit, truncated_at })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateModel {
    /// `y = C |log x|^{-θ}`.
    LogPower,
    /// `y = exp(-(x/c)^{-γ})`.
    ExpStretch,
}

/// Least-squares line through transformed data: `log y` against
/// `log |log x|`, or `log(-log y)` against `log x`.
pub fn fit_rate(xs: &[f64], ys: &[f64], model: RateModel) -> Result<RateFit, PipelineError> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(PipelineError::Config(format!("need at least 3 paired points, got {} and {}", xs.len(), ys.len())));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(PipelineError::Config("rate fit needs positive finite data".into()));
    }
    let (px, py): (Vec<f64>, Vec<f64>) = match model {
        RateModel::LogPower => {
            if xs.iter().any(|&x| x == 1.0) {
                return Err(PipelineError::Config("log-power fit undefined at x = 1".into()));
            }
            xs.iter().zip(ys).map(|(x, y)| (x.ln().abs().ln(), y.ln())).unzip()
        }
        RateModel::ExpStretch => {
            if ys.iter().any(|&y| y >= 1.0) {
                return Err(PipelineError::Config("stretched-exponential fit needs y < 1".into()));
            }
            xs.iter().zip(ys).map(|(x, y)| (x.ln(), (-y.ln()).ln())).unzip()
        }
    };
    let n = px.len() as f64;
    let mx = px.iter().sum::<f64>() / n;
    let my = py.iter().sum::<f64>() / n;
    let sxx: f64 = px.iter().map(|x| (x - mx) * (x - mx)).sum();
    if !(sxx > 0.0) {
        return Err(PipelineError::Config("rate fit needs at least two distinct abscissae".into()));
    }
    let sxy: f64 = px.iter().zip(&py).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rms = (px.iter().zip(&py).map(|(x, y)| (y - icpt - slope * x).powi(2)).sum::<f64>() / n).sqrt();
    let (scale, exponent) = match model {
        RateModel::LogPower => (icpt.exp(), -slope),
        RateModel::ExpStretch => {
            let gamma = -slope;
            ((icpt / gamma).exp(), gamma)
        }
    };
    Ok(RateFit { scale, exponent, rms_residual: rms })
}

/// Largest ρ₀ with `B_{4ρ₀}(center)` inside Ω.
pub fn max_rho0(domain: &DomainSpec, center: Point) -> f64 {
    if domain.contains(center) { domain.distance_to_boundary(center) / 4.0 } else { 0.0 }
}

/// `‖u‖_{L²(B_r(center))}` by Gauss–Legendre in the radius and the periodic
/// trapezoid rule in the angle.
pub fn ball_norm(u: impl Fn(Point) -> f64, center: Point, r: f64) -> f64 {
    const RADIAL: usize = 32;
    const ANGULAR: usize = 128;
    let (x, w) = gauss_legendre(RADIAL);
    let mut sum = 0.0;
    for (xi, wi) in x.iter().zip(&w) {
        let rho = 0.5 * r * (xi + 1.0);
        let mut ring = 0.0;
        for k in 0..ANGULAR {
            let th = 2.0 * PI * k as f64 / ANGULAR as f64;
            let v = u([center[0] + rho * th.cos(), center[1] + rho * th.sin()]);
            ring += v * v;
        }
        sum += 0.5 * r * wi * rho * ring * 2.0 * PI / ANGULAR as f64;
    }
    sum.sqrt()
}

/// Largest τ with `‖u‖_{3ρ} ≤ ‖u‖_ρ^τ ‖u‖_{4ρ}^{1-τ}`, clipped to `[0, 1]`.
pub fn tau_max(n1: f64, n3: f64, n4: f64) -> f64 {
    let denom = n4.ln() - n1.ln();
    if !(denom > 0.0) {
        return if n3 <= n4 { 1.0 } else { 0.0 };
    }
    ((n4.ln() - n3.ln()) / denom).clamp(0.0, 1.0)
}

/// Admissible τ for `trials` random-coefficient expansions in `basis`.
pub fn three_spheres_check(
    domain: &DomainSpec,
    basis: &HarmonicBasis,
    trials: usize,
    rho0: f64,
    center: Point,
    seed: u64,
) -> Result<Vec<f64>, PipelineError> {
    if trials < 10 {
        return Err(PipelineError::Config(format!("need at least 10 trials, got {trials}")));
    }
    if !(rho0 > 0.0) || !domain.contains(center) || domain.distance_to_boundary(center) < 4.0 * rho0 {
        return Err(PipelineError::Config(format!("ball of radius {} about {center:?} leaves the domain", 4.0 * rho0)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut taus = Vec::with_capacity(trials);
    for _ in 0..trials {
        let c: Vec<f64> = (0..basis.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let u = |p: Point| basis.expansion(&c, p).0;
        let norms = [1.0, 3.0, 4.0].map(|k| ball_norm(u, center, k * rho0));
        taus.push(tau_max(norms[0], norms[1], norms[2]));
    }
    Ok(taus)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_rate_exact_models() {
        let xs = [1e-1, 1e-2, 1e-3, 1e-4, 1e-6];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 2.0 * x.ln().abs().powf(-0.5)).collect();
        let f = fit_rate(&xs, &ys, RateModel::LogPower).unwrap();
        assert!((f.scale - 2.0).abs() < 1e-10 && (f.exponent - 0.5).abs() < 1e-10 && f.rms_residual < 1e-10);
        let xs = [0.5, 1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| (-(x / 3.0).powf(-2.0)).exp()).collect();
        let f = fit_rate(&xs, &ys, RateModel::ExpStretch).unwrap();
        assert!((f.scale - 3.0).abs() < 1e-10 && (f.exponent - 2.0).abs() < 1e-10);
        assert!(fit_rate(&[1.0, 2.0], &[1.0, 2.0], RateModel::LogPower).is_err());
        assert!(fit_rate(&[0.1, 0.2, -0.3], &[1.0, 2.0, 3.0], RateModel::LogPower).is_err());
    }

    #[test]
    fn fit_rate_under_multiplicative_noise() {
        use rand_distr::{Distribution, Normal};
        let xs = [1e-1f64, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6];
        let sigma = 0.05f64;
        let noise = Normal::new(0.0, sigma).unwrap();
        // standard errors of slope and intercept for log-noise of size σ
        let px: Vec<f64> = xs.iter().map(|x| x.ln().abs().ln()).collect();
        let n = px.len() as f64;
        let mx = px.iter().sum::<f64>() / n;
        let sxx: f64 = px.iter().map(|x| (x - mx).powi(2)).sum();
        let se_slope = sigma / sxx.sqrt();
        let se_icpt = sigma * (1.0 / n + mx * mx / sxx).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let ys: Vec<f64> = xs.iter().map(|x: &f64| 2.0 * x.ln().abs().powf(-0.5) * (1.0 + noise.sample(&mut rng))).collect();
            let f = fit_rate(&xs, &ys, RateModel::LogPower).unwrap();
            assert!((f.exponent - 0.5).abs() < 4.0 * se_slope, "{f:?}");
            assert!((f.scale / 2.0).ln().abs() < 4.0 * se_icpt, "{f:?}");
        }
    }

    #[test]
    fn median_and_iqr() {
        assert_eq!(median_iqr(&[3.0, 1.0, 2.0]), (2.0, 1.0));
        assert_eq!(median_iqr(&[1.0, 2.0, 3.0, 4.0]).0, 2.5);
        assert!(median_iqr(&[]).0.is_nan());
    }

    #[test]
    fn constant_and_linear_three_spheres() {
        let exact = 1.0 - 3f64.ln() / 4f64.ln();
        let c = [0.5, 0.5];
        let rho = 0.1;
        let n = [1.0, 3.0, 4.0].map(|k| ball_norm(|_| 1.0, c, k * rho));
        assert!((tau_max(n[0], n[1], n[2]) - exact).abs() < 1e-6);
        let n = [1.0, 3.0, 4.0].map(|k| ball_norm(|p| p[0] - c[0], c, k * rho));
        assert!((tau_max(n[0], n[1], n[2]) - exact).abs() < 1e-6);
        // closed form of the second moment: π r⁴ / 4
        assert!((ball_norm(|p| p[0] - c[0], c, 0.3).powi(2) - PI * 0.3f64.powi(4) / 4.0).abs() < 1e-14);
    }

    #[test]
    fn three_spheres_rejects_large_balls() {
        let sq = DomainSpec::unit_square();
        let b = HarmonicBasis::polynomials(&sq, 3);
        assert!(three_spheres_check(&sq, &b, 10, 0.2, [0.5, 0.5], 0).is_err());
        assert!(three_spheres_check(&sq, &b, 5, 0.1, [0.5, 0.5], 0).is_err());
        assert!((max_rho0(&sq, [0.5, 0.5]) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        let mut c = ExperimentConfig::new(Scenario::exponential_default());
        c.validate().unwrap();
        c.levels = vec![1e-2, 1e-4];
        assert!(c.validate().is_err());
        c.levels = vec![1e-4, 1e-2, 1e-6];
        assert!(c.validate().is_err());
        c.levels = vec![1e-2, 1e-4, 1e-6];
        c.seeds = 4;
        assert!(c.validate().is_err());
    }

    #[test]
    fn oscillation_zero_flux_and_linearity() {
        let mut sc = Scenario::manufactured_xy();
        sc.mesh_n = 16;
        let cfg = ExperimentConfig::new(sc);
        let curve = run_oscillation_sweep(&cfg, &[0.0, 0.4, 0.8]).unwrap();
        assert_eq!(curve.records[0].osc, 0.0);
        let (a, b) = (curve.records[1].osc, curve.records[2].osc);
        assert!((b - 2.0 * a).abs() < 1e-12 * b, "{a} {b}");
    }
}
