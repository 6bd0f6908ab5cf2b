//! Command-line interface.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use graphot_core::dynamics::{check_continuity, solve_bb, BbOptions};
use graphot_core::gradient_flow::{energy_dissipation_check, jko_flow, mkv_flow, JkoOptions};
use graphot_core::grid::{EdgeField, Grid};
use graphot_core::measure::PotentialSpec;
use graphot_core::regularize::{regularize_measure, ExtendedGraph};
use graphot_core::transport::{verify_hopf_lax_properties, wasserstein, HopfLax, SupportCloud};

use crate::error::{CliError, Result};
use crate::experiments::{effective_seed, run_suite, Example41Config, SuiteConfig};
use crate::io::{self, OutDir};
use crate::report::{Basis, Relation, RunReport};

#[derive(Debug, Parser)]
#[command(name = "graphot", version, about = "Optimal transport and Wasserstein gradient flows on metric graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// write the run report as JSON
    #[arg(long, global = true)]
    pub report: Option<PathBuf>,
    /// print only the assertion summary
    #[arg(long, short, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact W_p between two measures
    Wasserstein(WassersteinArgs),
    /// Dynamic (Benamou-Brenier) transport between two measures
    BbSolve(BbArgs),
    /// Implicit finite-volume McKean-Vlasov flow
    Mkv(MkvArgs),
    /// Minimising movements
    Jko(JkoArgs),
    /// Energy-dissipation balance of a trajectory CSV
    EdeCheck(EdeArgs),
    /// Hopf-Lax semigroup of a function and its checks
    HopfLax(HopfLaxArgs),
    /// Regularisation on the extended graph
    Regularize(RegularizeArgs),
    /// Entropy along the geodesic of the two-branch example
    #[command(name = "example-4-1")]
    Example41(ExampleArgs),
    /// Run a built-in suite or a suite config file
    Suite(SuiteArgs),
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    #[arg(long)]
    pub graph: PathBuf,
    /// cell width
    #[arg(long, default_value_t = 0.01)]
    pub h: f64,
}

impl GraphArgs {
    fn grid(&self) -> Result<Grid> {
        Ok(Grid::new(Arc::new(io::load_graph(&self.graph)?), self.h)?)
    }
}

#[derive(Debug, Args)]
pub struct WassersteinArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long)]
    pub mu: PathBuf,
    #[arg(long)]
    pub nu: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub p: u32,
    /// plan CSV
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-8)]
    pub gap_tol: f64,
}

#[derive(Debug, Args)]
pub struct BbArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long)]
    pub mu0: PathBuf,
    #[arg(long)]
    pub mu1: PathBuf,
    #[arg(long, default_value_t = 32)]
    pub steps: usize,
    /// path CSV
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// allowed relative gap to the static W2^2
    #[arg(long, default_value_t = 0.02)]
    pub rel_tol: f64,
    #[arg(long, default_value_t = 200_000)]
    pub max_iterations: usize,
}

#[derive(Debug, Args)]
pub struct PotentialArgs {
    /// external potential (JSON); zero when absent
    #[arg(long = "V")]
    pub v: Option<PathBuf>,
    /// interaction kernel (JSON); zero when absent
    #[arg(long = "W")]
    pub w: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MkvArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long)]
    pub init: PathBuf,
    #[command(flatten)]
    pub potentials: PotentialArgs,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long = "T", default_value_t = 1.0)]
    pub t_end: f64,
    /// trajectory CSV
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// energy CSV
    #[arg(long)]
    pub energy: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-10)]
    pub mass_tol: f64,
}

#[derive(Debug, Args)]
pub struct JkoArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long)]
    pub init: PathBuf,
    #[command(flatten)]
    pub potentials: PotentialArgs,
    #[arg(long, default_value_t = 0.01)]
    pub tau: f64,
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    #[arg(long, default_value_t = 4)]
    pub inner_steps: usize,
    /// measures CSV `(n, t, edge, cell, eta)`
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// free-energy CSV `(n, t, F, accepted)`
    #[arg(long)]
    pub energy: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EdeArgs {
    #[arg(long)]
    pub traj: PathBuf,
    #[arg(long)]
    pub graph: PathBuf,
    #[command(flatten)]
    pub potentials: PotentialArgs,
    #[arg(long, default_value_t = 0.05)]
    pub tol: f64,
    /// energy CSV
    #[arg(long)]
    pub energy: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HopfLaxArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// the function, in the potential JSON format
    #[arg(long)]
    pub f: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 0.5])]
    pub t: Vec<f64>,
    /// time-difference step of the Hamilton-Jacobi check
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    /// CSV `(edge, s, f, Q_t f, …)`
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RegularizeArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long)]
    pub mu: PathBuf,
    #[arg(long)]
    pub eps: f64,
    /// regularised density CSV on the extended graph
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-12)]
    pub mass_tol: f64,
}

#[derive(Debug, Args)]
pub struct ExampleArgs {
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub h: f64,
    /// number of sub-intervals of the t grid
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SuiteArgs {
    /// built-in suite name
    #[arg(required_unless_present = "config", conflicts_with = "config")]
    pub name: Option<String>,
    /// suite config file (TOML or JSON)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// entries run in parallel at most
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

fn out_file(path: &Option<PathBuf>, content: impl FnOnce() -> String) -> Result<Option<String>> {
    path.as_deref().map(|p| io::write_file(p, &content())).transpose()
}

/// Values of a potential description at the support points of `grid`.
fn support_values(spec: &PotentialSpec, grid: &Grid) -> Result<Vec<f64>> {
    let field: EdgeField = spec.sample(grid)?;
    let g = grid.graph();
    let mut out: Vec<f64> = (0..grid.cell_count())
        .map(|c| {
            let (e, i) = grid.cell_edge(c);
            field.center(e, i)
        })
        .collect();
    for w in g.vertex_ids() {
        let (e, _) = g.incident(w)[0];
        let k = if g.edge(e).init == w { 0 } else { grid.count(e) };
        out.push(field.interface(e, k));
    }
    Ok(out)
}

pub fn wasserstein_cmd(a: &WassersteinArgs) -> Result<RunReport> {
    let grid = a.graph.grid()?;
    let mu = SupportCloud::from_measure(&io::load_measure(&a.mu, &grid)?)?;
    let nu = SupportCloud::from_measure(&io::load_measure(&a.nu, &grid)?)?;
    let w = wasserstein(grid.graph(), &mu, &nu, a.p)?;
    let mut r = RunReport::new("wasserstein", &(a.graph.graph.display().to_string(), a.graph.h, a.p, a.gap_tol));
    r.check("transport.duality-gap", "primal minus dual objective", w.gap.abs(), 0.0, a.gap_tol * (1.0 + w.cost), Relation::AtMost, Basis::Invariant);
    r.check("transport.dual-feasible", "max violation of phi_i + psi_j <= c_ij", w.duals.max_violation(&w.costs), 0.0, 1e-9, Relation::AtMost, Basis::Invariant);
    r.check("transport.marginals", "plan marginal defect", w.plan.marginal_defect(mu.masses(), nu.masses()), 0.0, 1e-10, Relation::AtMost, Basis::Invariant);
    r.note("value", w.value);
    r.note("cost", w.cost);
    r.note("duality_gap", w.gap);
    r.note("dual_lipschitz", w.duals.lipschitz(grid.graph(), mu.points()));
    r.output(out_file(&a.out, || w.plan.to_csv(grid.graph(), &mu, &nu))?);
    Ok(r)
}

pub fn bb_cmd(a: &BbArgs) -> Result<RunReport> {
    let grid = a.graph.grid()?;
    let mu0 = io::load_measure(&a.mu0, &grid)?;
    let mu1 = io::load_measure(&a.mu1, &grid)?;
    let options = BbOptions { steps: a.steps, max_iterations: a.max_iterations, ..BbOptions::default() };
    let sol = solve_bb(&mu0, &mu1, &options)?;
    let w = graphot_core::transport::wasserstein_measures(&mu0, &mu1, 2)?;
    let mut r = RunReport::new("bb-solve", &(a.graph.graph.display().to_string(), a.graph.h, a.steps, a.rel_tol));
    let cont = check_continuity(&sol.path)?;
    r.check("dynamics.continuity", "max continuity and Kirchhoff residual", cont.max(), 0.0, options.residual_tol, Relation::AtMost, Basis::Invariant);
    r.check("dynamics.static-gap", "relative gap between action and static W2^2", (sol.action - w.cost).abs() / w.cost, 0.0, a.rel_tol, Relation::AtMost, Basis::Oracle);
    r.note("action", sol.action);
    r.note("static_w2sq", w.cost);
    r.note("iterations", sol.iterations);
    r.note("repair_weight", sol.repair_weight);
    r.output(out_file(&a.out, || sol.path.to_csv())?);
    Ok(r)
}

pub fn mkv_cmd(a: &MkvArgs) -> Result<RunReport> {
    let grid = a.graph.grid()?;
    let mu = io::load_measure(&a.init, &grid)?;
    let v = io::load_potential(a.potentials.v.as_deref(), &grid)?;
    let w = io::load_interaction(a.potentials.w.as_deref(), &grid)?;
    let traj = mkv_flow(&mu, &v, &w, a.dt, a.t_end)?;
    let mut r = RunReport::new("mkv", &(a.graph.graph.display().to_string(), a.graph.h, a.dt, a.t_end));
    r.check("c6.mass", "max mass drift over all steps", traj.mass_defect, 0.0, a.mass_tol, Relation::AtMost, Basis::Invariant);
    let min = traj.path.measures().iter().flat_map(|m| m.cells().iter().copied()).fold(f64::INFINITY, f64::min);
    r.check("c6.positivity", "smallest cell mass along the flow", min, 0.0, 0.0, Relation::AtLeast, Basis::Invariant);
    r.output(out_file(&a.out, || traj.to_csv(&v))?);
    if a.energy.is_some() {
        let ede = energy_dissipation_check(&traj.path, &v, &w)?;
        r.note("balance", ede.value);
        r.output(out_file(&a.energy, || ede.energy_csv())?);
    }
    Ok(r)
}

pub fn jko_cmd(a: &JkoArgs) -> Result<RunReport> {
    let grid = a.graph.grid()?;
    let mu = io::load_measure(&a.init, &grid)?;
    let v = io::load_potential(a.potentials.v.as_deref(), &grid)?;
    let w = io::load_interaction(a.potentials.w.as_deref(), &grid)?;
    let options = JkoOptions { inner_steps: a.inner_steps, ..JkoOptions::default() };
    let flow = jko_flow(&mu, a.tau, a.steps, &v, &w, &options)?;
    let mut r = RunReport::new("jko", &(a.graph.graph.display().to_string(), a.graph.h, a.tau, a.steps, a.inner_steps));
    r.check("c8.monotone", "free energy non-increasing", flow.is_monotone() as u8 as f64, 1.0, 0.0, Relation::Within, Basis::Invariant);
    r.note("rejected_steps", flow.accepted.iter().filter(|x| !**x).count());
    r.output(out_file(&a.out, || {
        let g = grid.graph();
        let mut s = String::from("n,t,edge,cell,eta\n");
        for (n, m) in flow.measures.iter().enumerate() {
            for e in g.edge_ids() {
                for (i, c) in grid.cells(e).enumerate() {
                    s.push_str(&format!("{n},{},{},{i},{}\n", n as f64 * a.tau, g.edge(e).name, m.density(c)));
                }
            }
        }
        s
    })?);
    r.output(out_file(&a.energy, || {
        let mut s = String::from("n,t,F,accepted\n");
        for (n, f) in flow.free_energies.iter().enumerate() {
            let acc = if n == 0 { true } else { flow.accepted[n - 1] };
            s.push_str(&format!("{n},{},{f},{acc}\n", n as f64 * a.tau));
        }
        s
    })?);
    Ok(r)
}

pub fn ede_cmd(a: &EdeArgs) -> Result<RunReport> {
    let path = io::read_trajectory(&a.traj, io::load_graph(&a.graph)?)?;
    let grid = path.grid().clone();
    let v = io::load_potential(a.potentials.v.as_deref(), &grid)?;
    let w = io::load_interaction(a.potentials.w.as_deref(), &grid)?;
    let ede = energy_dissipation_check(&path, &v, &w)?;
    let mut r = RunReport::new("ede-check", &(a.traj.display().to_string(), a.tol));
    r.check("c7.balance", "|L_T|", ede.value.abs(), 0.0, a.tol, Relation::AtMost, Basis::Invariant);
    r.note("balance", ede.value);
    r.note("energy_change", ede.energy_change);
    r.note("metric_term", ede.metric_term);
    r.note("dissipation_term", ede.dissipation_term);
    r.output(out_file(&a.energy, || ede.energy_csv())?);
    Ok(r)
}

pub fn hopf_lax_cmd(a: &HopfLaxArgs) -> Result<RunReport> {
    let grid = a.graph.grid()?;
    let spec: PotentialSpec = serde_json::from_str(&io::read_text(&a.f)?).map_err(|e| CliError::parse(&a.f, e))?;
    let f = support_values(&spec, &grid)?;
    let rep = verify_hopf_lax_properties(&grid, &f, &a.t, a.dt)?;
    let mut r = RunReport::new("hopf-lax", &(a.graph.graph.display().to_string(), a.graph.h, &a.t, a.dt));
    r.check("c5.lipschitz", "max Lip(Q_t f) / Lip(f)", rep.max_lip_ratio, 2.0 * (1.0 + 5.0 * rep.h), 0.0, Relation::AtMost, Basis::Invariant);
    r.check("c5.hamilton-jacobi", "max positive HJ residual", rep.hj_violation, rep.hj_tolerance, 0.0, Relation::AtMost, Basis::Invariant);
    if a.out.is_some() {
        let hl = HopfLax::new(&grid);
        let qs = a.t.iter().map(|&t| hl.apply(&f, t)).collect::<std::result::Result<Vec<_>, _>>()?;
        let g = grid.graph();
        r.output(out_file(&a.out, || {
            let mut s = String::from("edge,s,f");
            for t in &a.t {
                s.push_str(&format!(",Q_{t}"));
            }
            s.push('\n');
            for (i, p) in grid.support_points().iter().enumerate() {
                s.push_str(&format!("{},{},{}", g.edge(p.edge).name, p.s, f[i]));
                for q in &qs {
                    s.push_str(&format!(",{}", q[i]));
                }
                s.push('\n');
            }
            s
        })?);
    }
    Ok(r)
}

pub fn regularize_cmd(a: &RegularizeArgs) -> Result<RunReport> {
    let grid = a.graph.grid()?;
    let mu = io::load_measure(&a.mu, &grid)?;
    let ext = ExtendedGraph::new(&grid, a.eps)?;
    let reg = regularize_measure(&ext, &mu)?;
    let mut r = RunReport::new("regularize", &(a.graph.graph.display().to_string(), a.graph.h, a.eps));
    r.check("c4.mass", "mass change", (reg.total_mass() - mu.total_mass()).abs(), 0.0, a.mass_tol, Relation::AtMost, Basis::Invariant);
    let max = reg.densities().into_iter().fold(0.0, f64::max);
    r.check("c4.density", "max density against 1/(2 eps) + h", max, 1.0 / (2.0 * a.eps) + ext.grid().max_width(), 0.0, Relation::AtMost, Basis::Invariant);
    r.output(out_file(&a.out, || reg.to_csv())?);
    Ok(r)
}

pub fn example_cmd(a: &ExampleArgs) -> Result<RunReport> {
    let cfg = Example41Config { eps: a.eps, h: a.h, t_samples: a.samples, ..Default::default() };
    let out = a.out_dir.clone().map(OutDir::new).unwrap_or_default();
    crate::experiments::example41::run_example_4_1(&cfg, &out)
}

pub fn suite_cmd(a: &SuiteArgs) -> Result<RunReport> {
    let cfg = match (&a.name, &a.config) {
        (_, Some(path)) => load_suite(path)?,
        (Some(name), None) => SuiteConfig::preset(name)?,
        (None, None) => return Err(CliError::ConfigInvalid("give a suite name or --config".into())),
    };
    let seed = effective_seed(cfg.seed)?;
    let out = OutDir::new(a.out_dir.clone().unwrap_or_else(|| PathBuf::from("out").join(&cfg.name)));
    let report = run_suite(&cfg, seed, a.jobs, &out)?;
    let mut report = report;
    report.output(out.write("suite.json", &serde_json::to_string_pretty(&cfg).expect("configs serialise"))?);
    Ok(report)
}

fn load_suite(path: &Path) -> Result<SuiteConfig> {
    let text = io::read_text(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        SuiteConfig::from_json(&text)
    } else {
        SuiteConfig::from_toml(&text)
    }
}

/// Runs the parsed command; the report's wall time covers the whole command.
pub fn run(cli: &Cli) -> Result<RunReport> {
    let start = Instant::now();
    let mut report = match &cli.command {
        Command::Wasserstein(a) => wasserstein_cmd(a)?,
        Command::BbSolve(a) => bb_cmd(a)?,
        Command::Mkv(a) => mkv_cmd(a)?,
        Command::Jko(a) => jko_cmd(a)?,
        Command::EdeCheck(a) => ede_cmd(a)?,
        Command::HopfLax(a) => hopf_lax_cmd(a)?,
        Command::Regularize(a) => regularize_cmd(a)?,
        Command::Example41(a) => example_cmd(a)?,
        Command::Suite(a) => suite_cmd(a)?,
    };
    report.wall_time_s = start.elapsed().as_secs_f64();
    if let Some(path) = &cli.report {
        let p = io::write_file(path, &report.to_json())?;
        report.outputs.push(p);
    }
    Ok(report)
}
