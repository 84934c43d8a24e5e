//! Command-line front end. Exit codes: 0 success, 1 invalid input or I/O,
//! 2 numerical failure (certificate, convergence, divergence).

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::orbit::{run_experiment, ExperimentConfig};
use crate::prolate::Precision;
use crate::quadrature::{bandlimit_for, build_quadrature, build_with_m, gauss_legendre_rule, node_ratio};
use crate::stability::check_a_stability;
use crate::tableau::{build_gauss_legendre, build_tableau, max_s_difference, Method, Tableau};

#[derive(Debug, Parser)]
#[command(name = "blcirk", version, about = "Band-limited collocation IRK toolkit")]
pub struct Cli {
    /// Arithmetic for verification steps; tableau construction always uses
    /// double-double.
    #[arg(long, value_enum, global = true, default_value_t = PrecisionFlag::Extended)]
    pub precision: PrecisionFlag,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PrecisionFlag {
    Standard,
    Extended,
}

impl From<PrecisionFlag> for Precision {
    fn from(p: PrecisionFlag) -> Self {
        match p {
            PrecisionFlag::Standard => Precision::Standard,
            PrecisionFlag::Extended => Precision::Extended,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Quadrature for exponentials of bandlimit c on [-1,1].
    Quad(QuadArgs),
    /// Integration-matrix tableau with certificates.
    Tableau(TableauArgs),
    /// Stability-function analysis of a tableau file.
    Stability(StabilityArgs),
    /// Orbit propagation from a JSON config.
    Propagate(PropagateArgs),
    /// Entrywise comparison of two tableau files.
    DiffTableau(DiffArgs),
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct QuadArgs {
    /// Bandlimit of the rule.
    #[arg(long)]
    pub c: f64,
    #[arg(long)]
    pub eps: f64,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Node-ratio / oversampling CSV over --accuracies × --node-counts.
    #[arg(long)]
    pub diagnostics: Option<PathBuf>,
    /// log10 of the accuracies for the diagnostics CSV.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [-3.5, -8.5, -13.0])]
    pub accuracies: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [32usize, 64, 128])]
    pub node_counts: Vec<usize>,
}

#[derive(Debug, Args)]
#[command(allow_negative_numbers = true)]
pub struct TableauArgs {
    /// Interpolation bandlimit c (the rule is built for 2c).
    #[arg(long)]
    pub c: f64,
    #[arg(long)]
    pub eps: f64,
    #[arg(long, value_enum, default_value_t = Method::CollocationSplit)]
    pub method: Method,
    /// Node count; by default the smallest count reaching eps.
    #[arg(long)]
    pub m: Option<usize>,
    /// Write the [0,1] form instead of [-1,1].
    #[arg(long)]
    pub unit: bool,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StabilityArgs {
    pub tableau: PathBuf,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Sweep CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Points per sweep part (log and linear).
    #[arg(long, default_value_t = 4096)]
    pub grid: usize,
    /// Upper end of the log sweep; default 10c.
    #[arg(long)]
    pub y_max: Option<f64>,
    /// Also analyse the Gauss–Legendre tableau with the same node count.
    #[arg(long)]
    pub compare_gauss_legendre: bool,
}

#[derive(Debug, Args)]
pub struct PropagateArgs {
    pub config: PathBuf,
    /// Directory for trajectory.csv and manifest.json.
    #[arg(long, short)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DiffArgs {
    pub a: PathBuf,
    pub b: PathBuf,
    /// Allowed max |S_a − S_b|; default 10·max(eps_a, eps_b).
    #[arg(long)]
    pub tol: Option<f64>,
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidInput(_) | Error::Parse { .. } | Error::Io(_) | Error::Json(_) => 1,
        Error::Interval { source, .. } => exit_code(source),
        _ => 2,
    }
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => {
            fs::write(p, text)?;
            eprintln!("wrote {}", p.display());
        }
        None => print_stdout(text)?,
    }
    Ok(())
}

/// A closed pipe on stdout is not an error.
fn print_stdout(text: &str) -> Result<()> {
    use std::io::Write;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)?)
}

pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Quad(a) => cmd_quad(&a, cli.precision.into()),
        Command::Tableau(a) => cmd_tableau(&a),
        Command::Stability(a) => cmd_stability(&a),
        Command::Propagate(a) => cmd_propagate(&a),
        Command::DiffTableau(a) => cmd_diff(&a),
    }
}

pub fn cmd_quad(a: &QuadArgs, precision: Precision) -> Result<i32> {
    if !(a.c > 0.0 && a.eps > 0.0 && a.eps < 1.0) {
        return Err(Error::InvalidInput(format!("need c > 0 and 0 < eps < 1, got c = {}, eps = {}", a.c, a.eps)));
    }
    let mut rule = build_quadrature(a.c, a.eps)?;
    rule.verified_error = rule.residual(10_000, precision);
    eprintln!(
        "M = {}, verified error {:.3e}, sum of weights − 2 = {:.3e}, node ratio {:.4}, oversampling {:.4}",
        rule.m(),
        rule.verified_error,
        (rule.weight_sum().to_f64() - 2.0),
        rule.node_ratio(),
        rule.oversampling_factor()
    );
    write_or_print(a.out.as_deref(), &to_json(&rule.to_json())?)?;
    if let Some(p) = &a.diagnostics {
        let mut csv = String::from("log10_eps,M,c,node_ratio,alpha,gauss_legendre_ratio,gauss_legendre_alpha\n");
        for &le in &a.accuracies {
            let eps = 10f64.powf(le);
            for &m in &a.node_counts {
                let cq = bandlimit_for(m, eps, 1e-3)?;
                let r = build_with_m(cq, m)?;
                let gl = gauss_legendre_rule(m, eps);
                csv.push_str(&format!(
                    "{le},{m},{cq:.10e},{:.10e},{:.10e},{:.10e},{:.10e}\n",
                    node_ratio(&r.nodes_f64()),
                    std::f64::consts::PI * m as f64 / cq,
                    node_ratio(&gl.nodes_f64()),
                    gl.oversampling_factor()
                ));
            }
        }
        fs::write(p, csv)?;
        eprintln!("wrote {}", p.display());
    }
    Ok(0)
}

fn check_certificates(t: &Tableau) -> Result<()> {
    let wmax = t.weights.iter().map(|w| w.to_f64().abs()).fold(0.0, f64::max);
    let c = &t.certificates;
    if c.symplectic_residual > 1e-14 * wmax * wmax {
        return Err(Error::Certificate(format!("symplectic residual {:e}", c.symplectic_residual)));
    }
    if let Some(r) = c.collocation_residual {
        if r > t.eps {
            return Err(Error::Certificate(format!("collocation residual {r:e} > eps = {:e}", t.eps)));
        }
    }
    if !(c.min_eig_real_part > 0.0) {
        return Err(Error::Certificate(format!("eigenvalue with real part {:e}", c.min_eig_real_part)));
    }
    Ok(())
}

pub fn cmd_tableau(a: &TableauArgs) -> Result<i32> {
    let mut t = build_tableau(a.c, a.eps, a.m, a.method)?;
    if a.unit {
        t = t.rescale_to_unit()?;
    }
    check_certificates(&t)?;
    let c = &t.certificates;
    eprintln!(
        "M = {}, symplectic {:.3e}, collocation {}, min Re λ(S) {:.4e}",
        t.m(),
        c.symplectic_residual,
        c.collocation_residual.map_or("n/a".to_string(), |r| format!("{r:.3e}")),
        c.min_eig_real_part
    );
    write_or_print(a.out.as_deref(), &to_json(&t.to_json())?)?;
    Ok(0)
}

fn read_tableau(p: &Path) -> Result<Tableau> {
    let text = fs::read_to_string(p)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", p.display())))?;
    Tableau::from_json(&serde_json::from_str(&text)?)
}

#[derive(Serialize)]
struct StabilityOutput {
    tableau: String,
    report: crate::stability::StabilityReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    gauss_legendre: Option<crate::stability::StabilityReport>,
}

pub fn cmd_stability(a: &StabilityArgs) -> Result<i32> {
    let t = read_tableau(&a.tableau)?;
    let c = if t.c > 0.0 { t.c } else { std::f64::consts::PI * t.m() as f64 / 4.0 };
    let y_max = a.y_max.unwrap_or(10.0 * c);
    let report = check_a_stability(&t, y_max, a.grid)?;
    eprintln!(
        "min Re λ(S) {:.4e} ({} pairs, {} real), max ||r(iy)| − 1| {:.3e}, max zero residual {:.3e}, max |r(iy) − e^(iy)| for y ≤ c {:.3e}",
        report.eigen.min_real_part,
        report.eigen.conjugate_pairs,
        report.eigen.real_count,
        report.max_unimodularity_error,
        report.max_zero_residual,
        report.approx_error
    );
    let gauss_legendre = if a.compare_gauss_legendre {
        let g = build_gauss_legendre(t.m())?;
        let r = check_a_stability(&g, y_max, a.grid)?;
        eprintln!(
            "Gauss–Legendre M = {}: min Re λ(S) {:.4e}, max ||r(iy)| − 1| {:.3e}",
            g.m(),
            r.eigen.min_real_part,
            r.max_unimodularity_error
        );
        Some(r)
    } else {
        None
    };
    if let Some(p) = &a.csv {
        fs::write(p, report.sweep_csv())?;
        eprintln!("wrote {}", p.display());
    }
    let out = StabilityOutput { tableau: a.tableau.display().to_string(), report, gauss_legendre };
    write_or_print(a.out.as_deref(), &to_json(&out)?)?;
    Ok(0)
}

pub fn cmd_propagate(a: &PropagateArgs) -> Result<i32> {
    let text = fs::read_to_string(&a.config)
        .map_err(|e| Error::InvalidInput(format!("cannot read config {}: {e}", a.config.display())))?;
    let mut cfg: ExperimentConfig = serde_json::from_str(&text)?;
    let base = a.config.parent().unwrap_or(Path::new("."));
    for f in [&mut cfg.model_file, &mut cfg.tableau_file].into_iter().flatten() {
        let p = base.join(&*f);
        if !p.exists() {
            return Err(Error::InvalidInput(format!("{} not found", p.display())));
        }
        *f = p.display().to_string();
    }
    let (report, traj) = run_experiment(&cfg)?;
    eprintln!(
        "full-model evaluations {}, low-model {} ({} before the first full sweep, {} after), final deviation vs reference {:.3e}",
        report.counts.full,
        report.counts.low,
        report.predictor_low_evaluations,
        report.refinement_low_evaluations,
        report.final_relative_deviation
    );
    if let Some(k) = report.kepler_relative_error {
        eprintln!("final relative error vs Kepler solution {k:.3e}");
    }
    #[derive(Serialize)]
    struct Manifest<'a> {
        config: &'a ExperimentConfig,
        report: &'a crate::orbit::RunReport,
        histories: &'a [Vec<f64>],
    }
    let manifest = to_json(&Manifest { config: &cfg, report: &report, histories: &traj.histories })?;
    match &a.out_dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let csv = traj.to_csv().replacen("t,y0,y1,y2,y3,y4,y5", "t,x,y,z,vx,vy,vz", 1);
            fs::write(dir.join("trajectory.csv"), csv)?;
            fs::write(dir.join("manifest.json"), manifest)?;
            eprintln!("wrote {}", dir.display());
        }
        None => print_stdout(&manifest)?,
    }
    Ok(0)
}

pub fn cmd_diff(a: &DiffArgs) -> Result<i32> {
    let x = read_tableau(&a.a)?;
    let y = read_tableau(&a.b)?;
    if x.m() != y.m() {
        return Err(Error::InvalidInput(format!("node counts differ: {} vs {}", x.m(), y.m())));
    }
    let (x, y) = (x.to_symmetric(), y.to_symmetric());
    let dn = x.nodes.iter().zip(&y.nodes).map(|(p, q)| (*p - *q).abs().to_f64()).fold(0.0, f64::max);
    let dw = x.weights.iter().zip(&y.weights).map(|(p, q)| (*p - *q).abs().to_f64()).fold(0.0, f64::max);
    let ds = max_s_difference(&x, &y);
    let tol = a.tol.unwrap_or(10.0 * x.eps.max(y.eps));
    print_stdout(&format!("max |Δτ| {dn:.3e}, max |Δw| {dw:.3e}, max |ΔS| {ds:.3e} (tolerance {tol:.3e})"))?;
    Ok(if ds <= tol && dn <= tol && dw <= tol { 0 } else { 2 })
}
