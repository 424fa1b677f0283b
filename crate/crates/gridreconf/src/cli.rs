//! Command-line front end.
//!
//! Subcommands: `validate`, `loadflow`, `solve`, `audit-tightness`, `pareto`,
//! `hc-scan`, `enumerate`. Every flag can also be supplied through a TOML
//! config file (`--config`); explicit flags win. Log level comes from the
//! `GRIDRECONF_LOG` environment variable.
//!
//! Exit codes: 0 success, 1 infeasible model, 2 input error, 3 solver limit
//! reached without the target gap, 4 internal error.

use crate::audit;
use crate::loadflow::{sweep_load_flow, violation_report};
use crate::model::{build_model, Objective, Variant};
use crate::netcase::{parse_case, parse_switch_list, CaseFormat, NetworkCase};
use crate::radiality::{enumerate_radial_configs, SwitchTopology};
use crate::report;
use crate::sbb::{self, SolveParams, SolveResult, Termination};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INFEASIBLE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_LIMIT: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "gridreconf", version, about = "Radial network reconfiguration and DG dispatch")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse and validate a case, reporting every violated invariant.
    Validate(CommonOpts),
    /// Run a load flow at a fixed topology and report limit violations.
    Loadflow(LoadflowOpts),
    /// Solve the reconfiguration problem.
    Solve(CommonOpts),
    /// Solve exact and conic side by side and report relaxation tightness.
    AuditTightness(CommonOpts),
    /// Sweep the DG/loss trade-off for the exact and conic models.
    Pareto(ParetoOpts),
    /// Hosting-capacity site scan.
    HcScan(HcOpts),
    /// Enumerate radial configurations (small cases).
    Enumerate(EnumerateOpts),
}

#[derive(Args, Debug, Default, Clone)]
struct CommonOpts {
    /// Case file (.m or .json).
    #[arg(long)]
    case: Option<PathBuf>,
    /// Switch list sidecar: JSON array of [from, to] pairs to make switchable.
    #[arg(long)]
    switches: Option<PathBuf>,
    /// Switch-change budget.
    #[arg(short = 'K', long)]
    k: Option<u32>,
    /// Model variant: exact | conic | lindistflow.
    #[arg(long)]
    variant: Option<String>,
    /// Objective: dgmax | lossmin | weighted=R | dgmax-losscap=L.
    #[arg(long)]
    objective: Option<String>,
    /// Relative optimality-gap target.
    #[arg(long)]
    gap: Option<f64>,
    /// Time limit in seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    node_limit: Option<u64>,
    #[arg(long, default_value_t = false)]
    deterministic: bool,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format: json | csv | svg-plot (json is always written).
    #[arg(long)]
    format: Option<String>,
    /// TOML config mirroring these flags; flags override.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
struct LoadflowOpts {
    #[command(flatten)]
    common: CommonOpts,
    /// Topology JSON (as written by solve); defaults to the initial statuses.
    #[arg(long)]
    topology: Option<PathBuf>,
    /// Dispatch JSON: {"p_gen": [...], "q_gen": [...]} in pu.
    #[arg(long)]
    dispatch: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
struct ParetoOpts {
    #[command(flatten)]
    common: CommonOpts,
    /// Number of evenly spaced ρ grid points on [0, 1].
    #[arg(long, default_value_t = 21)]
    grid: usize,
}

#[derive(Args, Debug, Default)]
struct HcOpts {
    #[command(flatten)]
    common: CommonOpts,
    /// Switch budgets to scan.
    #[arg(long, value_delimiter = ',', default_values_t = [0u32, 2, 4])]
    k_list: Vec<u32>,
    /// Nodes to scan (default: all non-slack).
    #[arg(long, value_delimiter = ',')]
    nodes: Option<Vec<usize>>,
    /// Added unit rating in pu (large enough to never bind).
    #[arg(long)]
    rating: Option<f64>,
}

#[derive(Args, Debug, Default)]
struct EnumerateOpts {
    #[command(flatten)]
    common: CommonOpts,
    #[arg(long, default_value_t = 10_000)]
    limit: usize,
}

/// File config mirroring the common flags.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    case: Option<PathBuf>,
    switches: Option<PathBuf>,
    k: Option<u32>,
    variant: Option<String>,
    objective: Option<String>,
    gap: Option<f64>,
    time_limit: Option<f64>,
    threads: Option<usize>,
    node_limit: Option<u64>,
    deterministic: Option<bool>,
    out: Option<PathBuf>,
    format: Option<String>,
}

#[derive(Debug)]
struct Run {
    case: NetworkCase,
    k: u32,
    variant: Variant,
    objective: Objective,
    params: SolveParams,
    out_dir: PathBuf,
    format: String,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Internal(String),
}

fn input<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Input(e.to_string())
}

pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(
        env_logger::Env::new().filter_or("GRIDRECONF_LOG", "warn"),
    )
    .format_timestamp(None)
    .try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version as "errors" with success codes.
            let code =
                if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            EXIT_INPUT
        }
        Err(CliError::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            EXIT_INTERNAL
        }
    }
}

fn dispatch(command: Command) -> Result<i32, CliError> {
    match command {
        Command::Validate(opts) => cmd_validate(opts),
        Command::Loadflow(opts) => cmd_loadflow(opts),
        Command::Solve(opts) => cmd_solve(opts),
        Command::AuditTightness(opts) => cmd_tightness(opts),
        Command::Pareto(opts) => cmd_pareto(opts),
        Command::HcScan(opts) => cmd_hc(opts),
        Command::Enumerate(opts) => cmd_enumerate(opts),
    }
}

/// Merge flags over the optional config file and load the case.
fn resolve(opts: &CommonOpts) -> Result<Run, CliError> {
    let file: FileConfig = match &opts.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(input)?;
            toml::from_str(&text).map_err(input)?
        }
        None => FileConfig::default(),
    };
    let case_path = opts
        .case
        .clone()
        .or(file.case)
        .ok_or_else(|| CliError::Input("--case is required".into()))?;
    let text = std::fs::read_to_string(&case_path).map_err(input)?;
    let format = if case_path.extension().is_some_and(|e| e == "m") {
        CaseFormat::MCase
    } else {
        CaseFormat::Native
    };
    let mut case = parse_case(&text, format).map_err(input)?;
    if let Some(switches) = opts.switches.clone().or(file.switches) {
        let text = std::fs::read_to_string(&switches).map_err(input)?;
        let pairs = parse_switch_list(&text).map_err(input)?;
        case.apply_switch_list(&pairs).map_err(input)?;
    }
    let variant = match opts
        .variant
        .clone()
        .or(file.variant)
        .unwrap_or_else(|| "exact".into())
        .as_str()
    {
        "exact" => Variant::Exact,
        "conic" => Variant::Conic,
        "lindistflow" => Variant::LinDistFlow,
        other => return Err(CliError::Input(format!("unknown variant '{other}'"))),
    };
    let objective = parse_objective(
        &opts.objective.clone().or(file.objective).unwrap_or_else(|| "dgmax".into()),
    )?;
    let params = SolveParams {
        gap_target: opts.gap.or(file.gap).unwrap_or(sbb::DEFAULT_GAP),
        time_limit: opts.time_limit.or(file.time_limit),
        node_limit: opts.node_limit.or(file.node_limit),
        threads: opts.threads.or(file.threads).unwrap_or(0),
        deterministic: opts.deterministic || file.deterministic.unwrap_or(false),
    };
    let out_dir = opts.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir).map_err(input)?;
    Ok(Run {
        case,
        k: opts.k.or(file.k).unwrap_or(0),
        variant,
        objective,
        params,
        out_dir,
        format: opts.format.clone().or(file.format).unwrap_or_else(|| "json".into()),
    })
}

fn parse_objective(text: &str) -> Result<Objective, CliError> {
    if text == "dgmax" {
        return Ok(Objective::DgMax);
    }
    if text == "lossmin" {
        return Ok(Objective::LossMin);
    }
    if let Some(rho) = text.strip_prefix("weighted=") {
        let rho: f64 = rho.parse().map_err(input)?;
        return Ok(Objective::Weighted(rho));
    }
    if let Some(cap) = text.strip_prefix("dgmax-losscap=") {
        let cap: f64 = cap.parse().map_err(input)?;
        return Ok(Objective::DgMaxLossCap(cap));
    }
    Err(CliError::Input(format!("unknown objective '{text}'")))
}

fn cmd_validate(opts: CommonOpts) -> Result<i32, CliError> {
    let run = resolve(&opts)?;
    let report = run.case.validate();
    println!(
        "{}",
        serde_json::to_string_pretty(&report).map_err(|e| CliError::Internal(e.to_string()))?
    );
    if report.is_ok() {
        println!(
            "case ok: {} buses, {} lines, {} switchable",
            run.case.n_buses(),
            run.case.lines.len(),
            run.case.lines.iter().filter(|l| l.switchable).count()
        );
        Ok(EXIT_OK)
    } else {
        for v in &report.violations {
            eprintln!("violation: {v}");
        }
        Ok(EXIT_INPUT)
    }
}

#[derive(Debug, Deserialize)]
struct DispatchFile {
    p_gen: Vec<f64>,
    q_gen: Vec<f64>,
}

fn cmd_loadflow(opts: LoadflowOpts) -> Result<i32, CliError> {
    let run = resolve(&opts.common)?;
    let case = &run.case;
    let topology = match &opts.topology {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(input)?;
            serde_json::from_str::<SwitchTopology>(&text).map_err(input)?
        }
        None => {
            let closed: Vec<bool> = case.lines.iter().map(|l| l.alpha0 == 1).collect();
            SwitchTopology::orient(case, &closed)
                .ok_or_else(|| CliError::Input("initial configuration is not radial".into()))?
        }
    };
    let (p_gen, q_gen) = match &opts.dispatch {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(input)?;
            let d: DispatchFile = serde_json::from_str(&text).map_err(input)?;
            (d.p_gen, d.q_gen)
        }
        None => (vec![0.0; case.n_buses()], vec![0.0; case.n_buses()]),
    };
    match sweep_load_flow(case, &topology, &p_gen, &q_gen) {
        Ok(point) => {
            let violations = violation_report(case, &point);
            let payload = serde_json::json!({
                "point": point,
                "violations": violations,
            });
            let path = run.out_dir.join("loadflow.json");
            std::fs::write(&path, serde_json::to_string_pretty(&payload).unwrap())
                .map_err(input)?;
            let vmin = point.nu.iter().skip(1).fold(f64::INFINITY, |m, &v| m.min(v)).sqrt();
            println!(
                "load flow converged: min voltage {:.4} pu, violations: {}",
                vmin,
                if violations.is_empty() { "none".to_string() } else {
                    format!(
                        "{} overvoltage, {} undervoltage, {} overcurrent",
                        violations.overvoltage.len(),
                        violations.undervoltage.len(),
                        violations.overcurrent.len()
                    )
                }
            );
            println!("report written to {}", path.display());
            Ok(EXIT_OK)
        }
        Err(e) => {
            eprintln!("load flow failed: {e}");
            Ok(EXIT_INFEASIBLE)
        }
    }
}

fn exit_code_for(result: &SolveResult, gap_target: f64) -> i32 {
    match result.termination {
        Termination::Infeasible => EXIT_INFEASIBLE,
        Termination::GapReached => EXIT_OK,
        Termination::TimeLimit | Termination::NodeLimit => {
            if result.gap.is_some_and(|g| g <= gap_target) {
                EXIT_OK
            } else {
                EXIT_LIMIT
            }
        }
    }
}

fn cmd_solve(opts: CommonOpts) -> Result<i32, CliError> {
    let run = resolve(&opts)?;
    let model =
        build_model(&run.case, run.k, run.variant, run.objective).map_err(input)?;
    let result = sbb::solve(&model, &run.params).map_err(input)?;
    emit_solve_report(&run, &result)?;
    match &result.incumbent {
        Some(inc) => {
            println!(
                "objective {:.6} (total DG {:.4} MW), bound {:.6}, gap {:.4e}, {} nodes in {:.2}s",
                inc.value,
                inc.point.total_dg() * run.case.s_base_mva,
                result.bound.unwrap_or(f64::NAN),
                result.gap.unwrap_or(f64::INFINITY),
                result.nodes,
                result.wall_time_s
            );
            println!("open lines: {:?}", inc.topology.open_lines(&run.case));
        }
        None => eprintln!("infeasible: no feasible configuration/dispatch exists"),
    }
    Ok(exit_code_for(&result, run.params.gap_target))
}

/// Write the solve artifacts in the requested format. JSON is always
/// emitted; `csv` adds a dispatch table, `svg-plot` a voltage profile.
fn emit_solve_report(run: &Run, result: &SolveResult) -> Result<(), CliError> {
    let json_path = run.out_dir.join("result.json");
    report::write_result_json(result, &json_path).map_err(input)?;
    if let Some(inc) = &result.incumbent {
        if run.format == "csv" {
            let mut csv = String::from("bus,v_pu,p_gen_mw,q_gen_mvar\n");
            for bus in 0..run.case.n_buses() {
                csv.push_str(&format!(
                    "{},{:.6},{:.6},{:.6}\n",
                    bus,
                    inc.point.nu[bus].sqrt(),
                    inc.point.p_gen[bus] * run.case.s_base_mva,
                    inc.point.q_gen[bus] * run.case.s_base_mva,
                ));
            }
            std::fs::write(run.out_dir.join("dispatch.csv"), csv).map_err(input)?;
        }
        if run.format == "svg-plot" {
            let perceived: Vec<f64> = inc.point.nu.iter().map(|v| v.sqrt()).collect();
            let profiles: Vec<(&str, Vec<f64>)> = match sweep_load_flow(
                &run.case,
                &inc.topology,
                &inc.point.p_gen,
                &inc.point.q_gen,
            ) {
                Ok(actual) => vec![
                    ("perceived", perceived),
                    ("actual", actual.nu.iter().map(|v| v.sqrt()).collect()),
                ],
                Err(_) => vec![("perceived", perceived)],
            };
            std::fs::write(
                run.out_dir.join("voltage_profile.svg"),
                report::voltage_profile_svg(&profiles),
            )
            .map_err(input)?;
        }
    }
    Ok(())
}

fn cmd_tightness(opts: CommonOpts) -> Result<i32, CliError> {
    let run = resolve(&opts)?;
    let mut payload = serde_json::Map::new();
    let mut worst_code = EXIT_OK;
    for variant in [Variant::Exact, Variant::Conic] {
        let model = build_model(&run.case, run.k, variant, run.objective).map_err(input)?;
        let result = sbb::solve(&model, &run.params).map_err(input)?;
        worst_code = worst_code.max(exit_code_for(&result, run.params.gap_target));
        if let Some(inc) = &result.incumbent {
            let tightness = audit::tightness_report(&model, &inc.topology, &inc.point);
            let posterior = sweep_load_flow(&run.case, &inc.topology, &inc.point.p_gen, &inc.point.q_gen)
                .map(|actual| violation_report(&run.case, &actual))
                .ok();
            println!(
                "{:?}: objective {:.6}, max coupling slack {:.3e} ({})",
                variant,
                inc.value,
                tightness.max_slack,
                if tightness.tight { "tight" } else { "not tight" }
            );
            payload.insert(
                format!("{variant:?}").to_lowercase(),
                serde_json::json!({
                    "objective": inc.value,
                    "tightness": tightness,
                    "posterior_violations": posterior,
                }),
            );
        } else {
            println!("{variant:?}: infeasible");
            payload.insert(format!("{variant:?}").to_lowercase(), serde_json::json!("infeasible"));
        }
    }
    let path = run.out_dir.join("tightness.json");
    std::fs::write(&path, serde_json::to_string_pretty(&payload).unwrap()).map_err(input)?;
    println!("report written to {}", path.display());
    Ok(worst_code)
}

fn cmd_pareto(opts: ParetoOpts) -> Result<i32, CliError> {
    let run = resolve(&opts.common)?;
    if opts.grid < 2 {
        return Err(CliError::Input("pareto grid needs at least 2 points".into()));
    }
    let rho_grid: Vec<f64> =
        (0..opts.grid).map(|i| i as f64 / (opts.grid - 1) as f64).collect();
    let curves = audit::pareto_sweep(&run.case, run.k, &rho_grid, &run.params);
    std::fs::write(run.out_dir.join("pareto_exact.csv"), report::pareto_csv(&curves.exact))
        .map_err(input)?;
    std::fs::write(run.out_dir.join("pareto_conic.csv"), report::pareto_csv(&curves.conic))
        .map_err(input)?;
    if run.format == "svg-plot" {
        std::fs::write(run.out_dir.join("pareto.svg"), report::pareto_svg(&curves))
            .map_err(input)?;
    }
    println!(
        "pareto sweep: {} exact points, {} conic points, {} failures",
        curves.exact.len(),
        curves.conic.len(),
        curves.failures.len()
    );
    for failure in &curves.failures {
        eprintln!("note: {failure}");
    }
    Ok(EXIT_OK)
}

fn cmd_hc(opts: HcOpts) -> Result<i32, CliError> {
    let run = resolve(&opts.common)?;
    // Default added rating: ten times total load, never binding.
    let total_load: f64 = run.case.buses.iter().map(|b| b.p_load).sum();
    let rating = opts.rating.unwrap_or(10.0 * total_load.max(1.0));
    let records =
        audit::hc_site_scan(&run.case, &opts.k_list, opts.nodes.as_deref(), rating, &run.params);
    std::fs::write(run.out_dir.join("hc_scan.csv"), report::hc_csv(&records)).map_err(input)?;
    if run.format == "svg-plot" {
        let series: Vec<(String, Vec<(f64, f64)>)> = opts
            .k_list
            .iter()
            .filter(|&&k| k > 0)
            .map(|&k| (format!("K={k}"), audit::hc_increase_distribution(&records, k)))
            .collect();
        std::fs::write(run.out_dir.join("hc_increase.svg"), report::hc_distribution_svg(&series))
            .map_err(input)?;
    }
    println!("hosting-capacity scan: {} records written to hc_scan.csv", records.len());
    Ok(EXIT_OK)
}

fn cmd_enumerate(opts: EnumerateOpts) -> Result<i32, CliError> {
    let run = resolve(&opts.common)?;
    match enumerate_radial_configs(&run.case, opts.limit) {
        Ok(configs) => {
            write_topologies(&run.out_dir, &run.case, &configs)?;
            println!("{} radial configurations", configs.len());
            Ok(EXIT_OK)
        }
        Err(limit) => {
            write_topologies(&run.out_dir, &run.case, &limit.partial)?;
            eprintln!("{limit}");
            Ok(EXIT_LIMIT)
        }
    }
}

fn write_topologies(
    out_dir: &Path,
    case: &NetworkCase,
    configs: &[SwitchTopology],
) -> Result<(), CliError> {
    let dump: Vec<_> = configs
        .iter()
        .map(|t| {
            serde_json::json!({
                "open_lines": t.open_lines(case),
                "parent": t.parent,
            })
        })
        .collect();
    std::fs::write(
        out_dir.join("topologies.json"),
        serde_json::to_string_pretty(&dump).unwrap(),
    )
    .map_err(input)
}
