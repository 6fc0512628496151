//! Command-line front end: deterministic CSV/JSON sweeps of the
//! entanglement quantities, matrix dumps, and a verification suite runner.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::canonical::{build_canonical, nrail_outputs_canonical, Family, Squeezing};
use crate::entangle::{
    closed_correlators, correlators_from_outputs, en_closed, en_ideal, rbar, witness_wg, Rails,
};
use crate::lincluster::{
    assemble_U, build_lo_cluster, factor_alpha, midrail_noise_cov, nrail_outputs_lo,
    nullifiers_lo, solve_geometric_constraints, verify_correlator_identity,
};
use crate::qalg::commutator;
use crate::teleport::{builtin_scenarios, run_scenario, verify_ft_cluster_equivalence};
use crate::topology::{linear_chain, nrail, ClusterSpec};
use crate::{canonical, Error, Result};

/// Parses arguments from the process environment, runs the requested
/// command, and returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "cvcluster", version, about = "Continuous-variable cluster-state entanglement engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sweep the output log-negativity over the squeezing parameter.
    Curve(CurveArgs),
    /// Tabulate the squeezing at which the log-negativity is half-ideal.
    TableRbar(TableRbarArgs),
    /// Evaluate the variance-sum entanglement witness over a gain sweep.
    Witness(WitnessArgs),
    /// Run internal consistency suites and report pass/fail per check.
    Verify(VerifyArgs),
    /// Dump the Gram matrix of a topology's network rows.
    Gmatrix(TopologyArgs),
    /// Dump the assembled network unitary of a topology.
    Umatrix(TopologyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct CurveArgs {
    /// Cluster construction: canonical or lo.
    #[arg(long)]
    family: Family,
    /// Rails per arm; a positive integer or 'inf'.
    #[arg(long)]
    rails: Rails,
    #[arg(long, default_value_t = 0.0)]
    r_min: f64,
    #[arg(long, default_value_t = 2.0)]
    r_max: f64,
    /// Number of sweep points, endpoints included.
    #[arg(long, default_value_t = 41)]
    steps: usize,
    #[arg(long, value_enum, default_value_t = OutFormat::Csv)]
    format: OutFormat,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TableRbarArgs {
    /// Comma-separated rail counts; the infinite-rail row is always added.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,100")]
    rails: Vec<usize>,
    #[arg(long, value_enum, default_value_t = OutFormat::Csv)]
    format: OutFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct WitnessArgs {
    #[arg(long)]
    family: Family,
    /// Rails per arm; a positive integer or 'inf'.
    #[arg(long)]
    rails: Rails,
    /// Uniform squeezing parameter of the cluster seeds.
    #[arg(long)]
    squeezing: f64,
    /// Single gain to evaluate; sweeps [gain-min, gain-max] when omitted.
    #[arg(long)]
    gain: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    gain_min: f64,
    #[arg(long, default_value_t = 2.0)]
    gain_max: f64,
    #[arg(long, default_value_t = 81)]
    steps: usize,
    #[arg(long, value_enum, default_value_t = OutFormat::Csv)]
    format: OutFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    All,
    Gmatrix,
    Unitarity,
    Correlators,
    Scenarios,
    Commutators,
    Weights,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = Suite::All)]
    suite: Suite,
}

#[derive(Debug, Args)]
struct TopologyArgs {
    /// Linear chain with this many nodes.
    #[arg(long)]
    chain: Option<usize>,
    /// Multi-rail topology with this many rails per arm.
    #[arg(long)]
    rails: Option<usize>,
    #[arg(long, value_enum, default_value_t = OutFormat::Csv)]
    format: OutFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn dispatch(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Curve(args) => {
            let table = cmd_curve(args)?;
            emit(&table.render(args.format), args.out.as_ref())?;
            Ok(0)
        }
        Command::TableRbar(args) => {
            let table = cmd_table_rbar(&args.rails)?;
            emit(&table.render(args.format), args.out.as_ref())?;
            Ok(0)
        }
        Command::Witness(args) => {
            let table = cmd_witness(args)?;
            emit(&table.render(args.format), args.out.as_ref())?;
            Ok(0)
        }
        Command::Verify(args) => {
            let checks = run_suite(args.suite);
            let mut all_pass = true;
            let mut stdout = std::io::stdout().lock();
            for check in &checks {
                all_pass &= check.pass();
                writeln!(stdout, "{check}")?;
            }
            Ok(if all_pass { 0 } else { 1 })
        }
        Command::Gmatrix(args) => {
            let spec = resolve_topology(args)?;
            let g = solve_geometric_constraints(&spec)?;
            let text = match args.format {
                OutFormat::Csv => g.to_csv(),
                OutFormat::Json => serde_json::to_string_pretty(&g.to_json())? + "\n",
            };
            emit(&text, args.out.as_ref())?;
            Ok(0)
        }
        Command::Umatrix(args) => {
            let spec = resolve_topology(args)?;
            let g = solve_geometric_constraints(&spec)?;
            let alpha = factor_alpha(&g)?;
            let u = assemble_U(&spec, &alpha)?;
            let text = match args.format {
                OutFormat::Csv => u.to_csv(),
                OutFormat::Json => serde_json::to_string_pretty(&u.to_json())? + "\n",
            };
            emit(&text, args.out.as_ref())?;
            Ok(0)
        }
    }
}

fn resolve_topology(args: &TopologyArgs) -> Result<ClusterSpec> {
    match (args.chain, args.rails) {
        (Some(m), None) => linear_chain(m),
        (None, Some(n)) => nrail(n),
        _ => Err(Error::InvalidArg(
            "pass exactly one of --chain or --rails".into(),
        )),
    }
}

/// One output cell; floats render with 17 significant digits in CSV.
#[derive(Debug, Clone)]
enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn render_csv(&self) -> String {
        match self {
            Cell::Num(x) => format!("{x:.16e}"),
            Cell::Int(k) => k.to_string(),
            Cell::Text(t) => t.clone(),
        }
    }

    fn to_json(&self) -> serde_json::Value {
        match self {
            Cell::Num(x) => serde_json::json!(x),
            Cell::Int(k) => serde_json::json!(k),
            Cell::Text(t) => serde_json::json!(t),
        }
    }
}

/// Rendered table with a fixed column order and deterministic formatting.
#[derive(Debug)]
struct Table {
    columns: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    fn render(&self, format: OutFormat) -> String {
        match format {
            OutFormat::Csv => {
                let mut s = self.columns.join(",");
                s.push('\n');
                for row in &self.rows {
                    let cells: Vec<String> = row.iter().map(Cell::render_csv).collect();
                    s.push_str(&cells.join(","));
                    s.push('\n');
                }
                s
            }
            OutFormat::Json => {
                let rows: Vec<Vec<serde_json::Value>> = self
                    .rows
                    .iter()
                    .map(|row| row.iter().map(Cell::to_json).collect())
                    .collect();
                let value = serde_json::json!({ "columns": self.columns, "rows": rows });
                serde_json::to_string_pretty(&value).expect("table serializes") + "\n"
            }
        }
    }
}

fn cmd_curve(args: &CurveArgs) -> Result<Table> {
    if !args.r_min.is_finite() || args.r_min < 0.0 {
        return Err(Error::InvalidArg(format!(
            "--r-min must be finite and nonnegative, got {}",
            args.r_min
        )));
    }
    if !args.r_max.is_finite() || args.r_max <= args.r_min {
        return Err(Error::InvalidArg(format!(
            "--r-max must be finite and exceed --r-min, got {} <= {}",
            args.r_max, args.r_min
        )));
    }
    if args.steps < 2 {
        return Err(Error::InvalidArg(format!(
            "--steps must be at least 2, got {}",
            args.steps
        )));
    }
    let ideal = en_ideal();
    let mut rows = Vec::with_capacity(args.steps);
    for k in 0..args.steps {
        let frac = k as f64 / (args.steps - 1) as f64;
        let r = args.r_min + (args.r_max - args.r_min) * frac;
        let en = en_closed(args.family, args.rails, r)?;
        rows.push(vec![Cell::Num(r), Cell::Num(en), Cell::Num(en / ideal)]);
    }
    Ok(Table {
        columns: vec!["r", "EN", "EN_normalized"],
        rows,
    })
}

fn cmd_table_rbar(rail_counts: &[usize]) -> Result<Table> {
    let mut rows = Vec::new();
    for family in [Family::Canonical, Family::LinearOptical] {
        let rails = rail_counts
            .iter()
            .map(|&n| Rails::Finite(n))
            .chain(std::iter::once(Rails::Infinite));
        for r in rails {
            let value = rbar(family, r)?;
            rows.push(vec![
                Cell::Text(family.to_string()),
                Cell::Text(r.to_string()),
                Cell::Text(format!("{value:.2}")),
                Cell::Num(value),
            ]);
        }
    }
    Ok(Table {
        columns: vec!["family", "rails", "rbar_2dp", "rbar"],
        rows,
    })
}

fn cmd_witness(args: &WitnessArgs) -> Result<Table> {
    let corr = closed_correlators(args.family, args.rails, args.squeezing)?;
    let gains: Vec<f64> = match args.gain {
        Some(g) => vec![g],
        None => {
            if args.steps < 2 {
                return Err(Error::InvalidArg(format!(
                    "--steps must be at least 2, got {}",
                    args.steps
                )));
            }
            if !args.gain_min.is_finite()
                || !args.gain_max.is_finite()
                || args.gain_max <= args.gain_min
            {
                return Err(Error::InvalidArg(format!(
                    "--gain-max must be finite and exceed --gain-min, got {} <= {}",
                    args.gain_max, args.gain_min
                )));
            }
            (0..args.steps)
                .map(|k| {
                    args.gain_min
                        + (args.gain_max - args.gain_min) * k as f64 / (args.steps - 1) as f64
                })
                .collect()
        }
    };
    let rows = gains
        .into_iter()
        .map(|g| {
            let report = witness_wg(&corr, g);
            vec![
                Cell::Num(g),
                Cell::Num(report.w),
                Cell::Num(report.bound),
                Cell::Int(report.entangled as i64),
            ]
        })
        .collect();
    Ok(Table {
        columns: vec!["g", "W", "bound", "entangled"],
        rows,
    })
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Outcome of one verification check.
#[derive(Debug)]
struct Check {
    name: &'static str,
    worst: f64,
    tol: f64,
}

impl Check {
    fn pass(&self) -> bool {
        self.worst <= self.tol
    }
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {:<24} worst residual {:9.3e}  tolerance {:7.1e}",
            if self.pass() { "PASS" } else { "FAIL" },
            self.name,
            self.worst,
            self.tol
        )
    }
}

/// Topologies exercised by the matrix-level suites.
fn suite_topologies() -> Vec<ClusterSpec> {
    let mut specs = Vec::new();
    for m in [2usize, 3, 4, 5, 6, 8] {
        specs.push(linear_chain(m).expect("valid chain"));
    }
    for n in 1..=8 {
        specs.push(nrail(n).expect("valid rails"));
    }
    specs
}

fn adjacency(spec: &ClusterSpec) -> DMatrix<f64> {
    let m = spec.node_count();
    let mut t = DMatrix::zeros(m, m);
    for (k, l) in spec.edges() {
        t[(k - 1, l - 1)] = 1.0;
        t[(l - 1, k - 1)] = 1.0;
    }
    t
}

fn suite_gmatrix() -> Vec<Check> {
    let mut worst: f64 = 0.0;
    for spec in suite_topologies() {
        let g = solve_geometric_constraints(&spec).expect("solvable constraints");
        let t = adjacency(&spec);
        let gm = g.as_matrix();
        let m = spec.node_count();
        let closure = gm + &t * gm * &t - DMatrix::identity(m, m);
        let commute = gm * &t - &t * gm;
        worst = worst.max(closure.abs().max()).max(commute.abs().max());
    }
    vec![Check {
        name: "gmatrix/constraints",
        worst,
        tol: 1e-10,
    }]
}

fn suite_unitarity() -> Vec<Check> {
    let mut worst_unitary: f64 = 0.0;
    let mut worst_purity: f64 = 0.0;
    for spec in suite_topologies() {
        let g = solve_geometric_constraints(&spec).expect("solvable constraints");
        let alpha = factor_alpha(&g).expect("positive semidefinite Gram matrix");
        let u = assemble_U(&spec, &alpha).expect("unitary assembly");
        worst_unitary = worst_unitary.max(u.unitarity_residual());

        let state = build_lo_cluster(&spec, 0.5).expect("cluster build");
        let m = spec.node_count();
        for nullifier in nullifiers_lo(&state).expect("momentum-only nullifiers") {
            worst_purity = worst_purity.max(nullifier.max_q_weight_on(0..m));
        }
    }
    vec![
        Check {
            name: "unitarity/network",
            worst: worst_unitary,
            tol: 1e-10,
        },
        Check {
            name: "unitarity/nullifier-purity",
            worst: worst_purity,
            tol: 1e-12,
        },
    ]
}

fn suite_correlators() -> Vec<Check> {
    let mut worst_identity: f64 = 0.0;
    for spec in suite_topologies() {
        for r in [0.2, 0.7, 1.5] {
            let state = build_lo_cluster(&spec, r).expect("cluster build");
            worst_identity =
                worst_identity.max(verify_correlator_identity(&state).expect("identity check"));
        }
    }

    let mut worst_closed: f64 = 0.0;
    for n in 1..=6 {
        for r in [0.3, 0.9] {
            for family in [Family::Canonical, Family::LinearOptical] {
                let out = match family {
                    Family::Canonical => {
                        nrail_outputs_canonical(n, r, None).expect("canonical outputs")
                    }
                    Family::LinearOptical => nrail_outputs_lo(n, r, None).expect("network outputs"),
                };
                let [q_mu, p_mu, q_nu, p_nu] = out.quadratures();
                let engine = correlators_from_outputs(q_mu, p_mu, q_nu, p_nu, &out.registry)
                    .expect("X-form outputs");
                let closed =
                    closed_correlators(family, Rails::Finite(n), r).expect("closed correlators");
                worst_closed = worst_closed
                    .max((engine.a() - closed.a()).abs())
                    .max((engine.b() - closed.b()).abs())
                    .max((engine.c() - closed.c()).abs());
            }
        }
    }
    vec![
        Check {
            name: "correlators/nullifier-identity",
            worst: worst_identity,
            tol: 1e-12,
        },
        Check {
            name: "correlators/closed-form",
            worst: worst_closed,
            tol: 1e-12,
        },
    ]
}

fn suite_scenarios() -> Vec<Check> {
    let mut worst: f64 = 0.0;
    for scenario in builtin_scenarios() {
        for r in [0.2, 0.7, 1.5] {
            let report = run_scenario(&scenario, r).expect("scenario verifies");
            worst = worst.max(report.max_residual);
        }
    }
    let ft = verify_ft_cluster_equivalence(0.5).expect("variant equivalence");
    vec![
        Check {
            name: "scenarios/identities",
            worst,
            tol: 1e-12,
        },
        Check {
            name: "scenarios/fourier-variant",
            worst: ft,
            tol: 1e-12,
        },
    ]
}

fn suite_commutators() -> Vec<Check> {
    let mut rng = StdRng::seed_from_u64(0x636f_6d6d);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let r = rng.gen_range(0.05..2.0);
        let family = if rng.gen_bool(0.5) {
            Family::Canonical
        } else {
            Family::LinearOptical
        };
        let spec = if rng.gen_bool(0.5) {
            linear_chain(rng.gen_range(2..=7)).expect("valid chain")
        } else {
            nrail(rng.gen_range(1..=5)).expect("valid rails")
        };
        let state = match family {
            Family::Canonical => {
                build_canonical(&spec, &Squeezing::Uniform(r)).expect("cluster build")
            }
            Family::LinearOptical => build_lo_cluster(&spec, r).expect("cluster build"),
        };
        let m = spec.node_count();
        for k in 1..=m {
            for l in k..=m {
                let a = state.node(k).expect("node");
                let b = state.node(l).expect("node");
                let reg = state.registry();
                let expected = if k == l { 0.5 } else { 0.0 };
                worst = worst
                    .max((commutator(&a.q, &b.p, reg).expect("commutator") - expected).abs())
                    .max(commutator(&a.q, &b.q, reg).expect("commutator").abs())
                    .max(commutator(&a.p, &b.p, reg).expect("commutator").abs());
            }
        }
    }
    vec![Check {
        name: "commutators/pipelines",
        worst,
        tol: 1e-12,
    }]
}

fn suite_weights() -> Vec<Check> {
    let mut worst: f64 = 0.0;
    for family in [Family::Canonical, Family::LinearOptical] {
        for n in 1..=12 {
            let cov = midrail_noise_cov(family, n, 0.4).expect("noise covariance");
            let weights = canonical::optimal_weights(&cov).expect("optimal weights");
            let uniform = 1.0 / n as f64;
            for &eta in weights.eta() {
                worst = worst.max((eta - uniform).abs());
            }
        }
    }
    vec![Check {
        name: "weights/uniform-optimum",
        worst,
        tol: 1e-9,
    }]
}

fn run_suite(suite: Suite) -> Vec<Check> {
    let mut checks = Vec::new();
    if matches!(suite, Suite::All | Suite::Gmatrix) {
        checks.extend(suite_gmatrix());
    }
    if matches!(suite, Suite::All | Suite::Unitarity) {
        checks.extend(suite_unitarity());
    }
    if matches!(suite, Suite::All | Suite::Correlators) {
        checks.extend(suite_correlators());
    }
    if matches!(suite, Suite::All | Suite::Scenarios) {
        checks.extend(suite_scenarios());
    }
    if matches!(suite, Suite::All | Suite::Commutators) {
        checks.extend(suite_commutators());
    }
    if matches!(suite, Suite::All | Suite::Weights) {
        checks.extend(suite_weights());
    }
    checks
}
