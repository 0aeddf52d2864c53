//! The subcommands behind the `corrosion` binary. Every stage writes its
//! artifacts into the output directory; nothing depends on the clock.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::continuation::{CauchyData, CauchySolver, ContinuationResult, DirichletSamples};
use crate::experiments::{
    ball_norm, gamma1_profile, max_rho0, run_noise_sweep, run_oscillation_sweep, tau_max, three_spheres_check,
    truth_on, ForwardRun, PipelineError, Scenario,
};
use crate::forward::{dirichlet_trace, neumann_trace, perturb, NonlinearityModel};
use crate::geometry::{BoundaryTag, Mesh};
use crate::reconstruction::{
    extract_f, find_monotone_segment, overlap_and_error, BoundaryProfile, MonotoneSegment, ReconstructedNonlinearity,
};

use super::config::{read_config, Settings};
use super::csv::{Cell, CsvTable};
use super::{CliError, IoError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Forward,
    Continue,
    Reconstruct,
    Pipeline,
    Sweep,
    Check,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    /// Configuration file; defaults apply when absent.
    pub config: Option<PathBuf>,
    /// Input file of `continue` (cauchy.csv) or `reconstruct`
    /// (gamma1_rec.csv); defaults to that name inside `out`.
    pub input: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub quiet: bool,
}

/// Runs one subcommand and returns a short human-readable summary.
pub fn run(rc: &RunConfig) -> Result<String, CliError> {
    if rc.out.as_os_str().is_empty() {
        return Err(CliError::config("output directory must be nonempty"));
    }
    let settings = match &rc.config {
        Some(p) => read_config(p)?,
        None => Settings::default(),
    };
    fs::create_dir_all(&rc.out).map_err(|e| IoError::file(&rc.out, e))?;
    let out = rc.out.as_path();
    write_schema(out)?;
    match rc.command {
        Command::Forward => forward(&settings, out, rc.seed),
        Command::Continue => continue_cmd(&settings, rc.input.as_deref(), out),
        Command::Reconstruct => reconstruct_cmd(&settings, rc.input.as_deref(), out),
        Command::Pipeline => pipeline(&settings, out, rc.seed),
        Command::Sweep => sweep(&settings, out, rc.seed),
        Command::Check => check(&settings, out, rc.seed),
    }
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<(), IoError> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| IoError::file(&path, e))
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

const SCHEMA: &str = "\
# Column reference for the CSV outputs. Lengths are in domain units, arc
# length t is measured along the tagged boundary portion from its first
# vertex, potentials are in the units of u, fluxes in units of u per length.
nodes.csv        id: node index | x, y: coordinates
tris.csv         id: triangle index | n0, n1, n2: node indices, counterclockwise
bedges.csv       id: edge index | n0, n1: node indices | tag: gamma1, gamma2 or gammaD | t0, t1: arc length of the endpoints
field.csv        node: node index | x, y: coordinates | u: potential
cauchy.csv       t: arc length on gamma2 | psi: potential | g: normal current density
gamma1.csv       t: arc length on gamma1 | u: potential | dnu: outward normal derivative
gamma1_rec.csv   t: arc length on gamma1 | u: continued potential | dnu: continued normal derivative | du_dt: tangential derivative
frec.csv         u: potential | f: reconstructed flux law
stability.csv    eps: noise level (discrete L2 norm on gamma2) | median_err: median sup error on V | iqr: interquartile range | fails: failed seeds
oscillation.csv  m: flux magnitude | gsup: sup |g| on the inner portion of gamma2 | osc: max - min of u on gamma1
spheres.csv      trial: trial index | tau: largest admissible exponent
";

fn write_schema(out: &Path) -> Result<(), IoError> {
    write_text(out, "schema.txt", SCHEMA)
}

fn write_mesh(mesh: &Mesh, out: &Path) -> Result<(), IoError> {
    let mut nodes = CsvTable::new(&["id", "x", "y"]);
    for (i, p) in mesh.nodes.iter().enumerate() {
        nodes.push(vec![i.into(), p[0].into(), p[1].into()]);
    }
    nodes.write(&out.join("nodes.csv"))?;
    let mut tris = CsvTable::new(&["id", "n0", "n1", "n2"]);
    for (i, t) in mesh.triangles.iter().enumerate() {
        tris.push(vec![i.into(), t[0].into(), t[1].into(), t[2].into()]);
    }
    tris.write(&out.join("tris.csv"))?;
    let mut edges = CsvTable::new(&["id", "n0", "n1", "tag", "t0", "t1"]);
    for (i, e) in mesh.boundary_edges.iter().enumerate() {
        edges.push(vec![
            i.into(),
            e.nodes[0].into(),
            e.nodes[1].into(),
            e.tag.name().into(),
            e.t[0].into(),
            e.t[1].into(),
        ]);
    }
    edges.write(&out.join("bedges.csv"))
}

fn cauchy_table(data: &CauchyData) -> CsvTable {
    let mut t = CsvTable::new(&["t", "psi", "g"]);
    for i in 0..data.len() {
        t.push(vec![data.t[i].into(), data.psi[i].into(), data.g[i].into()]);
    }
    t
}

/// Solves the forward problem and writes mesh, field, traces and report.
/// Returns the run and the (possibly perturbed) Cauchy data.
fn forward_stage(s: &Settings, out: &Path, seed: u64) -> Result<(ForwardRun, CauchyData), CliError> {
    let sc = &s.scenario;
    let run = sc.solve()?;
    write_mesh(&run.mesh, out)?;

    let mut field = CsvTable::new(&["node", "x", "y", "u"]);
    for (i, (p, u)) in run.mesh.nodes.iter().zip(&run.field.values).enumerate() {
        field.push(vec![i.into(), p[0].into(), p[1].into(), (*u).into()]);
    }
    field.write(&out.join("field.csv"))?;

    let data = perturb(&run.clean, s.noise_eps, seed);
    cauchy_table(&data).write(&out.join("cauchy.csv"))?;

    if sc.domain.has_tag(BoundaryTag::Gamma1) {
        let u = dirichlet_trace(&run.field, &run.mesh, BoundaryTag::Gamma1).map_err(PipelineError::from)?;
        let dnu = neumann_trace(&run.field, &run.mesh, BoundaryTag::Gamma1).map_err(PipelineError::from)?;
        let mut g1 = CsvTable::new(&["t", "u", "dnu"]);
        for i in 0..u.values.len() {
            g1.push(vec![u.curve.t[i].into(), u.values[i].into(), dnu.values[i].into()]);
        }
        g1.write(&out.join("gamma1.csv"))?;
    }

    let r = &run.report;
    let mut rep = String::new();
    writeln!(rep, "iterations = {}", r.iterations).unwrap();
    writeln!(rep, "residual = {}", num(r.residual)).unwrap();
    writeln!(rep, "energy = {}", num(r.energy)).unwrap();
    writeln!(rep, "converged = {}", r.converged).unwrap();
    writeln!(rep, "nodes = {}", run.mesh.num_nodes()).unwrap();
    writeln!(rep, "triangles = {}", run.mesh.triangles.len()).unwrap();
    writeln!(rep, "mesh_h = {}", num(run.mesh.h)).unwrap();
    writeln!(rep, "data_floor = {}", num(run.data_floor)).unwrap();
    writeln!(rep, "noise_eps = {}", num(s.noise_eps)).unwrap();
    writeln!(rep, "seed = {seed}").unwrap();
    write_text(out, "report.txt", &rep)?;
    Ok((run, data))
}

/// Continues `data` (whose `eps` is the declared error level) to Γ₁ and
/// writes the continued traces and the fit report.
fn continue_stage(s: &Settings, data: &CauchyData, out: &Path) -> Result<(ContinuationResult, BoundaryProfile), CliError> {
    let sc = &s.scenario;
    let basis = sc.basis.build(&sc.domain).map_err(PipelineError::from)?;
    let dirichlet = DirichletSamples::new(&sc.domain, sc.basis.dirichlet_density);
    let solver = CauchySolver::new(basis, data, &dirichlet).map_err(PipelineError::from)?;
    let (res, rule) = match s.mu {
        Some(mu) => (solver.fit(mu), "fixed"),
        None if data.eps == 0.0 => (solver.fit(sc.reconstruction.noiseless_mu), "fixed (exact data)"),
        None => (solver.fit_morozov(), "discrepancy principle"),
    };
    let res = res.map_err(PipelineError::from)?;

    let d = &res.discrepancy;
    let mut rep = String::new();
    writeln!(rep, "basis = {}", res.basis.kind()).unwrap();
    writeln!(rep, "basis_size = {}", res.basis.len()).unwrap();
    writeln!(rep, "mu = {}", num(res.mu)).unwrap();
    writeln!(rep, "mu_rule = {rule}").unwrap();
    writeln!(rep, "declared_noise = {}", num(data.eps)).unwrap();
    writeln!(rep, "discrepancy_psi = {}", num(d.psi)).unwrap();
    writeln!(rep, "discrepancy_flux = {}", num(d.flux)).unwrap();
    writeln!(rep, "discrepancy_dirichlet = {}", num(d.dirichlet)).unwrap();
    writeln!(rep, "discrepancy_combined = {}", num(d.combined())).unwrap();
    writeln!(rep, "condition_number = {}", num(res.condition_number)).unwrap();
    writeln!(rep, "under_resolved = {}", res.under_resolved).unwrap();
    write_text(out, "fitreport.txt", &rep)?;
    if res.under_resolved {
        return Err(PipelineError::UnderResolved { mu: res.mu, discrepancy: d.combined() }.into());
    }

    let profile = gamma1_profile(sc, &res)?;
    let mut t = CsvTable::new(&["t", "u", "dnu", "du_dt"]);
    for i in 0..profile.len() {
        t.push(vec![profile.t[i].into(), profile.v[i].into(), profile.w[i].into(), profile.dv[i].into()]);
    }
    t.write(&out.join("gamma1_rec.csv"))?;
    Ok((res, profile))
}

/// Finds the monotone segment, reconstructs f and writes frec.csv and
/// segreport.txt. `discrepancy` sets the trim unless the configuration
/// fixes one.
fn reconstruct_stage(
    s: &Settings,
    profile: &BoundaryProfile,
    discrepancy: Option<f64>,
    out: &Path,
) -> Result<(MonotoneSegment, ReconstructedNonlinearity), CliError> {
    let rs = &s.scenario.reconstruction;
    let max_slope = profile.dv.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let threshold = s.threshold.unwrap_or(rs.threshold_factor * max_slope);
    let trim = s.trim.unwrap_or(rs.trim_factor * discrepancy.unwrap_or(0.0));
    let seg = find_monotone_segment(profile, threshold).map_err(PipelineError::from)?;
    let mut rep = String::new();
    writeln!(rep, "segment_t = [{}, {}]", num(seg.t_a), num(seg.t_b)).unwrap();
    writeln!(rep, "segment_samples = [{}, {}]", seg.start, seg.end).unwrap();
    writeln!(rep, "orientation = {}", if seg.orientation > 0 { "increasing" } else { "decreasing" }).unwrap();
    writeln!(rep, "threshold = {}", num(threshold)).unwrap();
    writeln!(rep, "min_slope = {}", num(seg.min_slope)).unwrap();
    writeln!(rep, "trim = {}", num(trim)).unwrap();
    let rec = extract_f(profile, &seg, trim);
    if let Ok(rec) = &rec {
        writeln!(rep, "V = [{}, {}]", num(rec.interval.0), num(rec.interval.1)).unwrap();
        writeln!(rep, "V_length = {}", num(rec.interval.1 - rec.interval.0)).unwrap();
    } else {
        writeln!(rep, "V = empty").unwrap();
    }
    write_text(out, "segreport.txt", &rep)?;
    let rec = rec.map_err(PipelineError::from)?;

    let mut t = CsvTable::new(&["u", "f"]);
    for &(u, f) in &rec.knots {
        t.push(vec![u.into(), f.into()]);
    }
    t.write(&out.join("frec.csv"))?;
    Ok((seg, rec))
}

fn forward(s: &Settings, out: &Path, seed: u64) -> Result<String, CliError> {
    let (run, _) = forward_stage(s, out, seed)?;
    Ok(format!(
        "forward: {} Newton steps, residual {:.3e}, energy {:.6e}",
        run.report.iterations, run.report.residual, run.report.energy
    ))
}

fn continue_cmd(s: &Settings, input: Option<&Path>, out: &Path) -> Result<String, CliError> {
    let path = input.map(Path::to_path_buf).unwrap_or_else(|| out.join("cauchy.csv"));
    let table = CsvTable::read(&path)?;
    let gamma2 = s.scenario.domain.path(BoundaryTag::Gamma2).map_err(PipelineError::from)?;
    let data = CauchyData::new(
        table.column("t")?,
        table.column("psi")?,
        table.column("g")?,
        s.noise_eps.hypot(s.model_error),
        &gamma2,
    )
    .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let (res, _) = continue_stage(s, &data, out)?;
    Ok(format!("continue: mu {:.3e}, discrepancy {:.3e}", res.mu, res.discrepancy.combined()))
}

/// `discrepancy_combined` from a fit report, if one is present.
fn read_discrepancy(path: &Path) -> Result<Option<f64>, CliError> {
    let Ok(text) = fs::read_to_string(path) else { return Ok(None) };
    for line in text.lines() {
        if let Some((k, v)) = line.split_once('=') {
            if k.trim() == "discrepancy_combined" {
                return v
                    .trim()
                    .parse::<f64>()
                    .map(Some)
                    .map_err(|_| CliError::config(format!("{}: malformed discrepancy_combined", path.display())));
            }
        }
    }
    Ok(None)
}

fn reconstruct_cmd(s: &Settings, input: Option<&Path>, out: &Path) -> Result<String, CliError> {
    let path = input.map(Path::to_path_buf).unwrap_or_else(|| out.join("gamma1_rec.csv"));
    let table = CsvTable::read(&path)?;
    let profile = BoundaryProfile::new(table.column("t")?, table.column("u")?, table.column("dnu")?, table.column("du_dt")?)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let disc = read_discrepancy(&dir.join("fitreport.txt"))?;
    let (seg, rec) = reconstruct_stage(s, &profile, disc, out)?;
    Ok(format!(
        "reconstruct: segment t in [{:.4}, {:.4}], V = [{:.6}, {:.6}]",
        seg.t_a, seg.t_b, rec.interval.0, rec.interval.1
    ))
}

fn describe(model: &NonlinearityModel) -> String {
    match model {
        NonlinearityModel::Exponential { lambda, a, u_max } => {
            format!("exponential lambda = {lambda} a = {a} u_max = {u_max}")
        }
        NonlinearityModel::Linear { slope } => format!("linear slope = {slope}"),
        NonlinearityModel::Tabulated { knots } => format!("tabulated ({} knots)", knots.len()),
    }
}

fn pipeline(s: &Settings, out: &Path, seed: u64) -> Result<String, CliError> {
    let (run, mut data) = forward_stage(s, out, seed)?;
    data.eps = run.declared_noise(s.noise_eps).hypot(s.model_error);
    let (res, profile) = continue_stage(s, &data, out)?;
    let (_, rec) = reconstruct_stage(s, &profile, Some(res.discrepancy.combined()), out)?;
    let truth = truth_on(&s.scenario.model, &rec);
    let overlap = overlap_and_error(&rec, &truth).map_err(PipelineError::from)?;
    let mut rep = String::new();
    writeln!(rep, "true_law = {}", describe(&s.scenario.model)).unwrap();
    writeln!(rep, "noise_eps = {}", num(s.noise_eps)).unwrap();
    writeln!(rep, "seed = {seed}").unwrap();
    writeln!(rep, "V = [{}, {}]", num(rec.interval.0), num(rec.interval.1)).unwrap();
    writeln!(rep, "overlap = [{}, {}]", num(overlap.interval.0), num(overlap.interval.1)).unwrap();
    writeln!(rep, "sup_error = {}", num(overlap.sup_error)).unwrap();
    write_text(out, "comparison.txt", &rep)?;
    Ok(format!(
        "pipeline: V = [{:.6}, {:.6}], sup error {:.3e}",
        rec.interval.0, rec.interval.1, overlap.sup_error
    ))
}

fn sweep(s: &Settings, out: &Path, seed: u64) -> Result<String, CliError> {
    let cfg = s.experiment_config(seed);
    let curve = run_noise_sweep(&cfg)?;
    let mut t = CsvTable::new(&["eps", "median_err", "iqr", "fails"]);
    let mut dat = String::from("# eps median_err iqr fails fit\n");
    for r in &curve.levels {
        t.push(vec![r.eps.into(), r.median.into(), r.iqr.into(), r.failures.into()]);
        let fit = curve.fit.map_or(f64::NAN, |f| f.scale * r.eps.ln().abs().powf(-f.exponent));
        writeln!(dat, "{} {} {} {} {}", num(r.eps), num(r.median), num(r.iqr), r.failures, num(fit)).unwrap();
    }
    t.write(&out.join("stability.csv"))?;
    write_text(out, "stability.dat", &dat)?;

    let mut sum = String::new();
    writeln!(sum, "noise sweep: {} levels x {} seeds, base seed {seed}", cfg.levels.len(), cfg.seeds).unwrap();
    writeln!(sum, "model: {}", describe(&cfg.scenario.model)).unwrap();
    for r in &curve.levels {
        writeln!(sum, "  eps {:.1e}: median {:.4e}, iqr {:.4e}, failures {}", r.eps, r.median, r.iqr, r.failures).unwrap();
    }
    match curve.fit {
        Some(f) => writeln!(
            sum,
            "fit median = C |log eps|^(-theta): C = {:.6e}, theta = {:.6}, rms residual = {:.4}",
            f.scale, f.exponent, f.rms_residual
        )
        .unwrap(),
        None => writeln!(sum, "fit: fewer than 3 levels with a positive median").unwrap(),
    }
    match curve.baseline {
        Some(b) => writeln!(sum, "noiseless baseline: {b:.4e}").unwrap(),
        None => writeln!(sum, "noiseless baseline: failed").unwrap(),
    }
    match curve.eps0 {
        Some(e) => writeln!(sum, "largest level with a monotone segment for most seeds: {e:.1e}").unwrap(),
        None => writeln!(sum, "no level finds a monotone segment for most seeds").unwrap(),
    }
    writeln!(sum, "inversions (median grows as eps decreases): {}", curve.inversions).unwrap();
    write_text(out, "summary.txt", &sum)?;
    Ok(sum)
}

fn check(s: &Settings, out: &Path, seed: u64) -> Result<String, CliError> {
    let cfg = s.experiment_config(seed);
    cfg.validate()?;
    let osc = run_oscillation_sweep(&cfg, &cfg.magnitudes)?;
    let mut t = CsvTable::new(&["m", "gsup", "osc"]);
    let mut dat = String::from("# m gsup osc\n");
    for r in &osc.records {
        t.push(vec![r.m.into(), r.gsup.into(), r.osc.into()]);
        writeln!(dat, "{} {} {}", num(r.m), num(r.gsup), num(r.osc)).unwrap();
    }
    t.write(&out.join("oscillation.csv"))?;
    write_text(out, "oscillation.dat", &dat)?;

    let sc: &Scenario = &cfg.scenario;
    let center = cfg.sphere_center.unwrap_or_else(|| sc.domain.centroid());
    let rho0 = cfg.sphere_rho0.unwrap_or_else(|| max_rho0(&sc.domain, center));
    let basis = sc.basis.build(&sc.domain).map_err(PipelineError::from)?;
    let taus = three_spheres_check(&sc.domain, &basis, cfg.sphere_trials, rho0, center, seed)?;
    let mut st = CsvTable::new(&["trial", "tau"]);
    for (i, tau) in taus.iter().enumerate() {
        st.push(vec![i.into(), Cell::Num(*tau)]);
    }
    st.write(&out.join("spheres.csv"))?;
    let one = |_: [f64; 2]| 1.0;
    let tau_const = tau_max(ball_norm(one, center, rho0), ball_norm(one, center, 3.0 * rho0), ball_norm(one, center, 4.0 * rho0));
    let tau_exact = 1.0 - 3f64.ln() / 4f64.ln();

    let mut sum = String::new();
    writeln!(sum, "oscillation sweep over {} magnitudes", cfg.magnitudes.len()).unwrap();
    for r in &osc.records {
        writeln!(sum, "  m {:.3}: sup g {:.4e}, osc {:.6e}", r.m, r.gsup, r.osc).unwrap();
    }
    if let Some((m, e)) = &osc.truncated_at {
        writeln!(sum, "stopped at m = {m}: {e}").unwrap();
    }
    match osc.fit {
        Some(f) => writeln!(
            sum,
            "fit osc = exp(-(m/c)^(-gamma)): c = {:.6e}, gamma = {:.6}, rms residual = {:.4}",
            f.scale, f.exponent, f.rms_residual
        )
        .unwrap(),
        None => writeln!(sum, "fit: fewer than 3 magnitudes with 0 < osc < 1").unwrap(),
    }
    let min_tau = taus.iter().copied().fold(f64::INFINITY, f64::min);
    let positive = taus.iter().filter(|&&t| t > 0.0).count();
    writeln!(sum, "three spheres: center ({}, {}), rho0 = {rho0:.6e}, {} trials", center[0], center[1], taus.len()).unwrap();
    writeln!(sum, "  tau > 0 on {positive} of {} trials, min tau = {min_tau:.6}", taus.len()).unwrap();
    writeln!(sum, "  constant function: tau = {tau_const:.12} (closed form {tau_exact:.12})").unwrap();
    write_text(out, "summary.txt", &sum)?;
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_report_discrepancy_parses() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("fitreport.txt");
        fs::write(&p, "mu = 1\ndiscrepancy_combined = 2.5e-3\n").unwrap();
        assert_eq!(read_discrepancy(&p).unwrap(), Some(2.5e-3));
        assert_eq!(read_discrepancy(&dir.path().join("missing.txt")).unwrap(), None);
    }
}
