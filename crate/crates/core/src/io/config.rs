//! Plain-text configuration: `key = value` lines, either fully dotted
//! (`model.a = 0.5`) or grouped under `[section]` headers. `#` starts a
//! comment.
//!
//! ```text
//! [domain]
//! vertices = 0 0, 1 0, 1 1, 0 1
//! tags = D, 2, 1, D
//!
//! [model]
//! kind = exponential
//! lambda = 0.1
//! a = 0.5
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::experiments::{BasisKind, BasisSettings, ExperimentConfig, ReconstructionSettings, Scenario};
use crate::forward::{FluxProfile, FluxShape, NonlinearityModel, SolveError, SolverOptions};
use crate::geometry::{BoundaryTag, DomainSpec, Point};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}: {}", self.key, self.message),
            None => write!(f, "{}: {}", self.key, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Experiment-only settings of the `sweep` and `check` subcommands.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSection {
    pub levels: Vec<f64>,
    pub seeds: usize,
    pub magnitudes: Vec<f64>,
    pub sphere_trials: usize,
    pub sphere_rho0: Option<f64>,
    pub sphere_center: Option<Point>,
}

/// Everything a configuration file can set.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub scenario: Scenario,
    /// Noise added to the Cauchy data.
    pub noise_eps: f64,
    /// Fixed regularization weight; `None` selects μ automatically.
    pub mu: Option<f64>,
    /// Known error floor of Cauchy data read from a file, combined with the
    /// noise level in the discrepancy principle.
    pub model_error: f64,
    /// Absolute monotonicity threshold overriding the relative one.
    pub threshold: Option<f64>,
    /// Absolute trim overriding the discrepancy-based one.
    pub trim: Option<f64>,
    pub experiment: ExperimentSection,
}

impl Settings {
    pub fn experiment_config(&self, seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            scenario: self.scenario.clone(),
            levels: self.experiment.levels.clone(),
            seeds: self.experiment.seeds,
            base_seed: seed,
            magnitudes: self.experiment.magnitudes.clone(),
            sphere_trials: self.experiment.sphere_trials,
            sphere_rho0: self.experiment.sphere_rho0,
            sphere_center: self.experiment.sphere_center,
        }
    }
}

impl Default for Settings {
    fn default() -> Self {
        parse_config("").expect("empty configuration is valid")
    }
}

struct Entry {
    value: String,
    line: usize,
}

/// Raw key/value pairs; every key must be consumed exactly once.
struct Raw {
    entries: BTreeMap<String, Entry>,
    lines: BTreeMap<String, usize>,
}

impl Raw {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap().trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| ConfigError {
                    line: Some(line),
                    key: content.to_string(),
                    message: "unterminated section header".into(),
                })?;
                section = name.trim().to_string();
                continue;
            }
            let (k, v) = content.split_once('=').ok_or_else(|| ConfigError {
                line: Some(line),
                key: content.to_string(),
                message: "expected 'key = value'".into(),
            })?;
            let k = k.trim();
            let key = if section.is_empty() || k.contains('.') { k.to_string() } else { format!("{section}.{k}") };
            if let Some(prev) = entries.get(&key) {
                let prev: &Entry = prev;
                return Err(ConfigError {
                    line: Some(line),
                    key,
                    message: format!("duplicate key (first set on line {})", prev.line),
                });
            }
            entries.insert(key, Entry { value: v.trim().to_string(), line });
        }
        let lines = entries.iter().map(|(k, e)| (k.clone(), e.line)).collect();
        Ok(Raw { entries, lines })
    }

    fn line(&self, key: &str) -> Option<usize> {
        self.lines.get(key).copied()
    }

    fn err(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError { line: self.line(key), key: key.to_string(), message: message.into() }
    }

    fn take_str(&mut self, key: &str) -> Option<(String, usize)> {
        self.entries.remove(key).map(|e| (e.value, e.line))
    }

    fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.take_str(key) {
            None => Ok(None),
            Some((v, line)) => v.parse::<T>().map(Some).map_err(|_| ConfigError {
                line: Some(line),
                key: key.to_string(),
                message: format!("cannot parse '{v}' as {}", std::any::type_name::<T>()),
            }),
        }
    }

    fn take_list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>, ConfigError> {
        match self.take_str(key) {
            None => Ok(None),
            Some((v, line)) => v
                .split(',')
                .map(|s| s.trim().parse::<T>())
                .collect::<Result<Vec<T>, _>>()
                .map(Some)
                .map_err(|_| ConfigError { line: Some(line), key: key.to_string(), message: format!("cannot parse list '{v}'") }),
        }
    }

    /// Comma-separated pairs `a b, c d, ...`.
    fn take_pairs(&mut self, key: &str) -> Result<Option<Vec<(f64, f64)>>, ConfigError> {
        let Some((v, line)) = self.take_str(key) else { return Ok(None) };
        let bad = || ConfigError { line: Some(line), key: key.to_string(), message: format!("expected pairs 'a b, c d, ...', got '{v}'") };
        v.split(',')
            .map(|p| {
                let xs: Vec<f64> = p.split_whitespace().map(|s| s.parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad())?;
                if xs.len() == 2 { Ok((xs[0], xs[1])) } else { Err(bad()) }
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    fn finish(self) -> Result<(), ConfigError> {
        match self.entries.into_iter().next() {
            None => Ok(()),
            Some((key, e)) => Err(ConfigError { line: Some(e.line), key, message: "unknown key".into() }),
        }
    }
}

pub fn read_config(path: &Path) -> Result<Settings, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        line: None,
        key: path.display().to_string(),
        message: format!("cannot read configuration: {e}"),
    })?;
    parse_config(&text)
}

/// Parses and validates a configuration; omitted keys take the defaults of
/// the exponential scenario on the unit square.
pub fn parse_config(text: &str) -> Result<Settings, ConfigError> {
    let mut raw = Raw::parse(text)?;
    let base = Scenario::exponential_default();

    let domain = parse_domain(&mut raw)?;

    let mesh_n = raw.take::<usize>("mesh.n")?.unwrap_or(base.mesh_n);
    if mesh_n == 0 {
        return Err(raw.err("mesh.n", "mesh resolution must be positive"));
    }

    let model = parse_model(&mut raw)?;
    let flux = parse_flux(&mut raw)?;

    let mut solver = SolverOptions::default();
    solver.tol = raw.take("solver.tol")?.unwrap_or(solver.tol);
    solver.max_iter = raw.take("solver.max_iter")?.unwrap_or(solver.max_iter);
    solver.energy_bound_sq = raw.take("solver.energy_bound_sq")?;
    if !(solver.tol > 0.0) {
        return Err(raw.err("solver.tol", "tolerance must be positive"));
    }

    let noise_eps = raw.take::<f64>("noise.eps")?.unwrap_or(0.0);
    if !(noise_eps >= 0.0 && noise_eps.is_finite()) {
        return Err(raw.err("noise.eps", "noise level must be finite and nonnegative"));
    }

    let mut basis = BasisSettings::default();
    let kind_line = raw.line("continuation.basis");
    let kind = raw.take_str("continuation.basis").map(|v| v.0).unwrap_or_else(|| "polynomials".into());
    let degree = raw.take::<usize>("continuation.degree")?;
    let charges = raw.take::<usize>("continuation.charges")?;
    let offset = raw.take::<f64>("continuation.offset_factor")?;
    basis.kind = match kind.as_str() {
        "polynomials" => BasisKind::Polynomials { degree: degree.unwrap_or(10) },
        "fundamental_solutions" | "mfs" => {
            BasisKind::FundamentalSolutions { count: charges.unwrap_or(64), offset_factor: offset.unwrap_or(0.5) }
        }
        other => {
            return Err(ConfigError {
                line: kind_line,
                key: "continuation.basis".into(),
                message: format!("unknown basis '{other}' (use polynomials or fundamental_solutions)"),
            })
        }
    };
    basis.dirichlet_density = raw.take("continuation.dirichlet_density")?.unwrap_or(basis.dirichlet_density);
    if basis.dirichlet_density == 0 {
        return Err(raw.err("continuation.dirichlet_density", "must be positive"));
    }
    if let Err(e) = basis.build(&domain) {
        return Err(ConfigError { line: kind_line, key: "continuation.basis".into(), message: e.to_string() });
    }
    let mu = raw.take::<f64>("continuation.mu")?;
    if mu.is_some_and(|m| !(m >= 0.0 && m.is_finite())) {
        return Err(raw.err("continuation.mu", "regularization weight must be finite and nonnegative"));
    }
    let model_error = raw.take::<f64>("continuation.model_error")?.unwrap_or(0.0);
    if !(model_error >= 0.0 && model_error.is_finite()) {
        return Err(raw.err("continuation.model_error", "must be finite and nonnegative"));
    }

    let mut rec = ReconstructionSettings::default();
    rec.noiseless_mu = raw.take("continuation.noiseless_mu")?.unwrap_or(rec.noiseless_mu);
    rec.gamma1_samples = raw.take("reconstruction.gamma1_samples")?.unwrap_or(rec.gamma1_samples);
    rec.threshold_factor = raw.take("reconstruction.threshold_factor")?.unwrap_or(rec.threshold_factor);
    rec.trim_factor = raw.take("reconstruction.trim_factor")?.unwrap_or(rec.trim_factor);
    let threshold = raw.take::<f64>("reconstruction.threshold")?;
    let trim = raw.take::<f64>("reconstruction.trim")?;
    for (key, v) in [
        ("reconstruction.threshold_factor", Some(rec.threshold_factor)),
        ("reconstruction.trim_factor", Some(rec.trim_factor)),
        ("continuation.noiseless_mu", Some(rec.noiseless_mu)),
        ("reconstruction.threshold", threshold),
        ("reconstruction.trim", trim),
    ] {
        if v.is_some_and(|x| !(x >= 0.0 && x.is_finite())) {
            return Err(raw.err(key, "must be finite and nonnegative"));
        }
    }
    if rec.gamma1_samples < 2 {
        return Err(raw.err("reconstruction.gamma1_samples", "need at least 2 samples"));
    }

    let scenario = Scenario { domain, mesh_n, model, flux, basis, reconstruction: rec, solver };
    let defaults = ExperimentConfig::new(scenario.clone());
    let experiment = ExperimentSection {
        levels: raw.take_list("experiment.levels")?.unwrap_or(defaults.levels),
        seeds: raw.take("experiment.seeds")?.unwrap_or(defaults.seeds),
        magnitudes: raw.take_list("experiment.magnitudes")?.unwrap_or(defaults.magnitudes),
        sphere_trials: raw.take("experiment.sphere_trials")?.unwrap_or(defaults.sphere_trials),
        sphere_rho0: raw.take("experiment.sphere_rho0")?,
        sphere_center: raw.take_pairs("experiment.sphere_center")?.map(|p| [p[0].0, p[0].1]),
    };
    let levels_line = raw.line("experiment.levels");
    let seeds_line = raw.line("experiment.seeds");
    raw.finish()?;

    let settings = Settings { scenario, noise_eps, mu, model_error, threshold, trim, experiment };
    if let Err(e) = settings.experiment_config(0).validate() {
        let line = if e.to_string().contains("seed") { seeds_line } else { levels_line };
        return Err(ConfigError { line, key: "experiment".into(), message: e.to_string() });
    }
    Ok(settings)
}

fn parse_domain(raw: &mut Raw) -> Result<DomainSpec, ConfigError> {
    let vline = raw.line("domain.vertices");
    let vertices: Vec<Point> = raw
        .take_pairs("domain.vertices")?
        .map(|p| p.into_iter().map(|(x, y)| [x, y]).collect())
        .unwrap_or_else(|| vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]);
    let tline = raw.line("domain.tags");
    let tags: Vec<BoundaryTag> = match raw.take_str("domain.tags") {
        None if vertices.len() == 4 => {
            use BoundaryTag::*;
            vec![GammaD, Gamma2, Gamma1, GammaD]
        }
        None => return Err(ConfigError { line: vline, key: "domain.tags".into(), message: "required unless the domain has 4 sides".into() }),
        Some((v, line)) => v
            .split(',')
            .map(|s| s.parse::<BoundaryTag>())
            .collect::<Result<_, _>>()
            .map_err(|m| ConfigError { line: Some(line), key: "domain.tags".into(), message: m })?,
    };
    let shortest = (0..vertices.len())
        .map(|i| {
            let (a, b) = (vertices[i], vertices[(i + 1) % vertices.len()]);
            (b[0] - a[0]).hypot(b[1] - a[1])
        })
        .fold(f64::INFINITY, f64::min);
    let diameter = vertices
        .iter()
        .flat_map(|a| vertices.iter().map(move |b| (b[0] - a[0]).hypot(b[1] - a[1])))
        .fold(0.0, f64::max);
    let r0 = raw.take::<f64>("domain.r0")?.unwrap_or(0.1 * shortest);
    let m = raw.take::<f64>("domain.lipschitz_m")?.unwrap_or(1.0);
    let dline = raw.line("domain.diameter_bound");
    let d = raw.take::<f64>("domain.diameter_bound")?.unwrap_or(diameter);
    DomainSpec::new(vertices, tags, r0, m, d).map_err(|e| {
        use crate::geometry::GeometryError::*;
        let (key, line) = match e {
            TagCountMismatch { .. } | MissingDirichlet | TagAbsent(_) => ("domain.tags", tline.or(vline)),
            DiameterBound { .. } => ("domain.diameter_bound", dline),
            InvalidParameter(_) => ("domain", None),
            _ => ("domain.vertices", vline),
        };
        ConfigError { line, key: key.into(), message: e.to_string() }
    })
}

fn parse_model(raw: &mut Raw) -> Result<NonlinearityModel, ConfigError> {
    let kline = raw.line("model.kind");
    let kind = raw.take_str("model.kind").map(|v| v.0).unwrap_or_else(|| "exponential".into());
    let model = match kind.as_str() {
        "exponential" => NonlinearityModel::Exponential {
            lambda: raw.take("model.lambda")?.unwrap_or(0.1),
            a: raw.take("model.a")?.unwrap_or(0.5),
            u_max: raw.take("model.u_max")?.unwrap_or(5.0),
        },
        "linear" => NonlinearityModel::Linear { slope: raw.take("model.slope")?.unwrap_or(1.0) },
        "tabulated" => NonlinearityModel::Tabulated {
            knots: raw.take_pairs("model.knots")?.ok_or_else(|| raw.err("model.knots", "required for a tabulated model"))?,
        },
        other => {
            return Err(ConfigError {
                line: kline,
                key: "model.kind".into(),
                message: format!("unknown model '{other}' (use exponential, linear or tabulated)"),
            })
        }
    };
    model.validate().map_err(|e| {
        let msg = match &e {
            SolveError::InvalidModel(m) => m.clone(),
            other => other.to_string(),
        };
        let key = if msg.starts_with("transfer") {
            "model.a"
        } else if msg.starts_with("current-density") {
            "model.lambda"
        } else if msg.starts_with("truncation") {
            "model.u_max"
        } else if msg.starts_with("slope") {
            "model.slope"
        } else {
            "model.knots"
        };
        ConfigError { line: raw.line(key).or(kline), key: key.into(), message: msg }
    })?;
    // keys of other model kinds would otherwise be reported as unknown
    Ok(model)
}

fn parse_flux(raw: &mut Raw) -> Result<FluxProfile, ConfigError> {
    let kline = raw.line("flux.kind");
    let kind = raw.take_str("flux.kind").map(|v| v.0).unwrap_or_else(|| "polynomial".into());
    let shape = match kind.as_str() {
        "constant" => FluxShape::Constant(raw.take("flux.value")?.unwrap_or(1.0)),
        "polynomial" => FluxShape::Polynomial(raw.take_list("flux.coeffs")?.unwrap_or_else(|| vec![0.0, 1.0])),
        "tabulated" => FluxShape::Tabulated(
            raw.take_pairs("flux.knots")?.ok_or_else(|| raw.err("flux.knots", "required for a tabulated flux"))?,
        ),
        other => {
            return Err(ConfigError {
                line: kline,
                key: "flux.kind".into(),
                message: format!("unknown flux '{other}' (use constant, polynomial or tabulated)"),
            })
        }
    };
    let mut flux = FluxProfile::new(shape);
    flux.alpha = raw.take("flux.alpha")?.unwrap_or(flux.alpha);
    flux.holder_bound = raw.take("flux.holder_bound")?;
    flux.validate().map_err(|e| ConfigError { line: kline, key: "flux".into(), message: e.to_string() })?;
    Ok(flux)
}
