//! `sa-lab`: batch harness for the clique-certificate laboratory.
//!
//! Every subcommand takes its parameters from flags, from a JSON config file
//! (`--config`), or both; flags win. Unknown config keys are rejected. All
//! randomness flows from explicit seeds, so identical configurations produce
//! byte-identical artifacts in exact mode. Exit codes: 0 success, 1 a
//! verification or validation failure, 2 configuration or schema errors.

use clap::{Args, Parser, Subcommand};
use sa_lab_core::formula::{build_clique_formula, ruled_out_rectangle, Monomial, PolynomialSystem};
use sa_lab_core::graph::{BlockGraph, Rectangle};
use sa_lab_core::measure::{self, MeasureValue, Strategy};
use sa_lab_core::patterns::{self, EnumMode};
use sa_lab_core::proof::{self, Refutation};
use sa_lab_core::rational::{format_rat, parse_rat, Rat};
use sa_lab_core::report::{self, MeasurementRow};
use sa_lab_core::simplex::LpStatus;
use sa_lab_core::validate;
use sa_lab_core::wellbehaved::{self, DecomposeSpec, TailProbe, WellBehavedSpec};
use sa_lab_core::lp;
use serde::Deserialize;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "sa-lab", version, about = "exact laboratory for clique certificates")]
struct Cli {
    /// Worker threads for trial-level parallelism (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Append progress lines to this file; stdout stays machine-parsable.
    #[arg(long, global = true)]
    log: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a seeded block-model graph and write it as JSON.
    GenGraph(GenGraphArgs),
    /// Build the clique polynomial system of a graph.
    BuildFormula(BuildFormulaArgs),
    /// Verify a certificate against a system (exit 0 accept, 1 reject).
    Verify(VerifyArgs),
    /// Solve the minimum-coefficient certificate LP; print the optimum.
    LpSolve(LpSolveArgs),
    /// Enumerate pattern graphs or core fixed points.
    EnumerateCores(EnumerateArgs),
    /// Evaluate the truncated measure on a rectangle.
    EvalMeasure(EvalMeasureArgs),
    /// Split the truncated character sum into main and boundary terms.
    SplitSum(SplitSumArgs),
    /// Partition a rectangle into labeled parts.
    Decompose(DecomposeArgs),
    /// Check one of the four pseudorandomness properties.
    CheckWellbehaved(CheckWbArgs),
    /// Monte Carlo tail validation for weighted character sums.
    TailProbe(TailProbeArgs),
    /// Run invariant suites (exit 0 when everything passes).
    Validate(ValidateArgs),
    /// Aggregate measurement CSVs by parameters (mean / stderr).
    Report(ReportArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    let mut logger = Logger::new(cli.log.as_deref());
    let result = match cli.command {
        Command::GenGraph(a) => cmd_gen_graph(a),
        Command::BuildFormula(a) => cmd_build_formula(a),
        Command::Verify(a) => cmd_verify(a),
        Command::LpSolve(a) => cmd_lp_solve(a, &mut logger),
        Command::EnumerateCores(a) => cmd_enumerate(a),
        Command::EvalMeasure(a) => cmd_eval_measure(a, &mut logger),
        Command::SplitSum(a) => cmd_split_sum(a),
        Command::Decompose(a) => cmd_decompose(a, &mut logger),
        Command::CheckWellbehaved(a) => cmd_check_wb(a, &mut logger),
        Command::TailProbe(a) => cmd_tail_probe(a),
        Command::Validate(a) => cmd_validate(a, &mut logger),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(code) => code,
        Err(CliError::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

enum CliError {
    Config(String),
    Run(String),
}

impl CliError {
    fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }
}

impl<E: std::fmt::Display> From<E> for CliError
where
    E: std::error::Error,
{
    fn from(e: E) -> Self {
        CliError::Run(e.to_string())
    }
}

struct Logger {
    file: Option<std::fs::File>,
}

impl Logger {
    fn new(path: Option<&Path>) -> Self {
        let file = path.and_then(|p| {
            std::fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(p)
                .ok()
        });
        Logger { file }
    }

    fn line(&mut self, msg: &str) {
        if let Some(f) = &mut self.file {
            let _ = writeln!(f, "{msg}");
        }
    }
}

/// Loads a config file into `T`, rejecting unknown keys, or an empty default.
fn load_config<T: for<'de> Deserialize<'de> + Default>(
    path: &Option<PathBuf>,
) -> Result<T, CliError> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::config(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::config(format!("{}: {e}", p.display())))
        }
    }
}

fn need<T>(flag: Option<T>, cfg: Option<T>, name: &str) -> Result<T, CliError> {
    flag.or(cfg)
        .ok_or_else(|| CliError::config(format!("missing required parameter `{name}`")))
}

fn parse_p(s: &str) -> Result<Rat, CliError> {
    parse_rat(s).map_err(|e| CliError::config(format!("bad probability `{s}`: {e}")))
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RectFile {
    sides: Vec<Vec<u32>>,
}

fn load_rectangle(path: &Path, g: &BlockGraph) -> Result<Rectangle, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let file: RectFile = serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    if file.sides.len() != g.k() {
        return Err(CliError::config(format!(
            "rectangle has {} sides, graph has {} blocks",
            file.sides.len(),
            g.k()
        )));
    }
    Rectangle::new(g, (0..g.k()).collect(), file.sides)
        .map_err(|e| CliError::config(e.to_string()))
}

// ---------------------------------------------------------------------------
// gen-graph
// ---------------------------------------------------------------------------

#[derive(Args)]
struct GenGraphArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    /// Edge probability as `num/den`.
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct GenGraphConfig {
    n: Option<usize>,
    k: Option<usize>,
    p: Option<String>,
    seed: Option<u64>,
    out: Option<PathBuf>,
}

fn cmd_gen_graph(a: GenGraphArgs) -> Result<ExitCode, CliError> {
    let cfg: GenGraphConfig = load_config(&a.config)?;
    let n = need(a.n, cfg.n, "n")?;
    let k = need(a.k, cfg.k, "k")?;
    let p = parse_p(&need(a.p, cfg.p, "p")?)?;
    let seed = need(a.seed, cfg.seed, "seed")?;
    let out = need(a.out, cfg.out, "out")?;
    let g = BlockGraph::sample(n, k, &p, seed)?;
    g.to_file(&out)?;
    println!(
        "{}",
        serde_json::json!({ "vertices": g.num_vertices(), "edges": g.edge_count() })
    );
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// build-formula
// ---------------------------------------------------------------------------

#[derive(Args)]
struct BuildFormulaArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct BuildFormulaConfig {
    graph: Option<PathBuf>,
    out: Option<PathBuf>,
}

fn cmd_build_formula(a: BuildFormulaArgs) -> Result<ExitCode, CliError> {
    let cfg: BuildFormulaConfig = load_config(&a.config)?;
    let graph = need(a.graph, cfg.graph, "graph")?;
    let out = need(a.out, cfg.out, "out")?;
    let g = BlockGraph::from_file(&graph)?;
    let sys = build_clique_formula(&g);
    sys.to_file(&out)?;
    println!("{}", serde_json::json!({ "axioms": sys.axioms.len() }));
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    formula: Option<PathBuf>,
    #[arg(long)]
    proof: Option<PathBuf>,
    /// truth-table | canonical | both
    #[arg(long)]
    verifier: Option<String>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct VerifyConfig {
    formula: Option<PathBuf>,
    proof: Option<PathBuf>,
    verifier: Option<String>,
}

fn cmd_verify(a: VerifyArgs) -> Result<ExitCode, CliError> {
    let cfg: VerifyConfig = load_config(&a.config)?;
    let formula = need(a.formula, cfg.formula, "formula")?;
    let proof_path = need(a.proof, cfg.proof, "proof")?;
    let verifier = a.verifier.or(cfg.verifier).unwrap_or_else(|| "both".into());
    let sys = PolynomialSystem::from_file(&formula)?;
    let pi = Refutation::from_file(&proof_path, sys.axioms.len())?;
    let (run_tt, run_canon) = match verifier.as_str() {
        "truth-table" => (true, false),
        "canonical" => (false, true),
        "both" => (true, true),
        other => return Err(CliError::config(format!("unknown verifier `{other}`"))),
    };
    let tt = if run_tt {
        Some(proof::verify_truth_table(&sys, &pi)?)
    } else {
        None
    };
    let canon = if run_canon {
        Some(proof::verify_canonical(&sys, &pi)?)
    } else {
        None
    };
    let accepted = tt.unwrap_or(true) && canon.unwrap_or(true);
    let sizes = proof::size_report(&pi, &sys)?;
    println!(
        "{}",
        serde_json::json!({
            "accepted": accepted,
            "truth_table": tt,
            "canonical": canon,
            "sizes": sizes,
        })
    );
    Ok(if accepted {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

// ---------------------------------------------------------------------------
// lp-solve
// ---------------------------------------------------------------------------

#[derive(Args)]
struct LpSolveArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    formula: Option<PathBuf>,
    /// Cap the monomial index degree (restricted-system optimum).
    #[arg(long)]
    degree_cap: Option<usize>,
    /// Write the result bundle (status, optimum, witnesses) here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Export the primal LP in text format.
    #[arg(long)]
    export_lp: Option<PathBuf>,
    /// Also solve the dual instance and insist the optima match.
    #[arg(long)]
    check_dual: bool,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct LpSolveConfig {
    formula: Option<PathBuf>,
    degree_cap: Option<usize>,
    out: Option<PathBuf>,
    export_lp: Option<PathBuf>,
    check_dual: Option<bool>,
}

fn cmd_lp_solve(a: LpSolveArgs, log: &mut Logger) -> Result<ExitCode, CliError> {
    let cfg: LpSolveConfig = load_config(&a.config)?;
    let formula = need(a.formula, cfg.formula, "formula")?;
    let degree_cap = a.degree_cap.or(cfg.degree_cap);
    let check_dual = a.check_dual || cfg.check_dual.unwrap_or(false);
    let sys = PolynomialSystem::from_file(&formula)?;
    let idx = lp::MonomialIndex::new(sys.num_vars, degree_cap)?;
    let primal = lp::build_primal(&sys, &idx)?;
    log.line(&format!(
        "primal built: {} rows x {} columns",
        primal.lp.rows.len(),
        primal.lp.num_vars
    ));
    if let Some(path) = a.export_lp.or(cfg.export_lp) {
        lp::export_lp(&primal.lp, &path)?;
    }
    let sol = lp::solve(&primal)?;
    log.line(&format!("primal solved in {} pivots", sol.iterations));
    let extracted = if sol.status == LpStatus::Optimal {
        Some(lp::extract_solutions(&sys, &idx, &primal, &sol)?)
    } else {
        None
    };
    if check_dual {
        let dual = lp::build_dual(&sys, &idx)?;
        let dsol = lp::solve(&dual)?;
        log.line(&format!("dual solved in {} pivots", dsol.iterations));
        let matches = match (sol.status, dsol.status) {
            (LpStatus::Optimal, LpStatus::Optimal) => sol.objective == dsol.objective,
            (LpStatus::Infeasible, LpStatus::Unbounded) => true,
            _ => false,
        };
        if !matches {
            eprintln!("primal and dual disagree");
            return Ok(ExitCode::from(1));
        }
    }
    if let Some(out) = a.out.or(cfg.out) {
        let bundle = lp::result_bundle(&sys, &sol, extracted.as_ref(), primal.restricted);
        std::fs::write(&out, serde_json::to_string_pretty(&bundle).expect("bundle"))
            .map_err(|e| CliError::Run(e.to_string()))?;
    }
    match (&sol.status, &sol.objective) {
        (LpStatus::Optimal, Some(obj)) => println!("{}", format_rat(obj)),
        (status, _) => println!("{status:?}"),
    }
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// enumerate-cores
// ---------------------------------------------------------------------------

#[derive(Args)]
struct EnumerateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    /// all | cores
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the counting audit (b, c, count, bound) as CSV.
    #[arg(long)]
    audit_csv: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct EnumerateConfig {
    k: Option<usize>,
    d: Option<usize>,
    mode: Option<String>,
    out: Option<PathBuf>,
    audit_csv: Option<PathBuf>,
}

fn cmd_enumerate(a: EnumerateArgs) -> Result<ExitCode, CliError> {
    let cfg: EnumerateConfig = load_config(&a.config)?;
    let k = need(a.k, cfg.k, "k")?;
    let d = need(a.d, cfg.d, "d")?;
    let mode = a.mode.or(cfg.mode).unwrap_or_else(|| "cores".into());
    let enum_mode = match mode.as_str() {
        "all" => EnumMode::AllWithVcAtMost,
        "cores" => EnumMode::CoresOnly,
        other => return Err(CliError::config(format!("unknown mode `{other}`"))),
    };
    let graphs = patterns::enumerate_patterns(k, d, enum_mode)?;
    if let Some(out) = a.out.or(cfg.out) {
        std::fs::write(&out, serde_json::to_string_pretty(&graphs).expect("patterns"))
            .map_err(|e| CliError::Run(e.to_string()))?;
    }
    if let Some(path) = a.audit_csv.or(cfg.audit_csv) {
        let rows = patterns::counting_audit(k)?;
        let mut text = String::from("b,c,count,bound,pass\n");
        for r in &rows {
            text.push_str(&format!("{},{},{},{},{}\n", r.b, r.c, r.count, r.bound, r.pass));
        }
        std::fs::write(&path, text).map_err(|e| CliError::Run(e.to_string()))?;
    }
    println!("{}", graphs.len());
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// eval-measure
// ---------------------------------------------------------------------------

#[derive(Args)]
struct EvalMeasureArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    d: Option<usize>,
    /// naive | factorized | grouped
    #[arg(long)]
    strategy: Option<String>,
    /// Rational probability override (defaults to the graph's metadata).
    #[arg(long)]
    p: Option<String>,
    /// Evaluate in binary64 with this probability (statistical mode).
    #[arg(long)]
    p_float: Option<f64>,
    /// Evaluate on the ruled-out rectangle of this monomial (JSON).
    #[arg(long)]
    monomial: Option<String>,
    /// Evaluate on a rectangle file instead of the full space.
    #[arg(long)]
    rect: Option<PathBuf>,
    /// Seed column for the CSV row.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct EvalMeasureConfig {
    graph: Option<PathBuf>,
    d: Option<usize>,
    strategy: Option<String>,
    p: Option<String>,
    p_float: Option<f64>,
    monomial: Option<String>,
    rect: Option<PathBuf>,
    seed: Option<u64>,
    out: Option<PathBuf>,
}

fn parse_strategy(s: &str) -> Result<Strategy, CliError> {
    match s {
        "naive" => Ok(Strategy::Naive),
        "factorized" => Ok(Strategy::Factorized),
        "grouped" => Ok(Strategy::Grouped),
        other => Err(CliError::config(format!("unknown strategy `{other}`"))),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MonomialSpec {
    pos: Vec<u32>,
    neg: Vec<u32>,
}

fn cmd_eval_measure(a: EvalMeasureArgs, log: &mut Logger) -> Result<ExitCode, CliError> {
    let cfg: EvalMeasureConfig = load_config(&a.config)?;
    let graph = need(a.graph, cfg.graph, "graph")?;
    let d = need(a.d, cfg.d, "d")?;
    let strategy = parse_strategy(
        &a.strategy
            .or(cfg.strategy)
            .unwrap_or_else(|| "grouped".into()),
    )?;
    let g = BlockGraph::from_file(&graph)?;
    let monomial = a.monomial.or(cfg.monomial);
    let rect_path = a.rect.or(cfg.rect);
    let (q, rect_id) = match (&monomial, &rect_path) {
        (Some(mtext), None) => {
            let spec: MonomialSpec = serde_json::from_str(mtext)
                .map_err(|e| CliError::config(format!("bad monomial: {e}")))?;
            let m = Monomial::new(spec.pos, spec.neg)?;
            match ruled_out_rectangle(&m, &g) {
                Some(q) => (q, format!("Q({m:?})")),
                None => {
                    println!("0");
                    return Ok(ExitCode::SUCCESS);
                }
            }
        }
        (None, Some(path)) => (load_rectangle(path, &g)?, path.display().to_string()),
        (None, None) => (Rectangle::full(&g), "full".into()),
        (Some(_), Some(_)) => {
            return Err(CliError::config("give either --monomial or --rect, not both"))
        }
    };
    let p_float = a.p_float.or(cfg.p_float);
    let seed = a.seed.or(cfg.seed).unwrap_or(0);
    let (value, p_col, mode_col) = match p_float {
        Some(pf) => {
            let v = measure::mu_d_float(&g, &q, d, pf, strategy)?;
            (MeasureValue::Approx(v), format!("{pf}"), "float".to_string())
        }
        None => {
            let p = match a.p.or(cfg.p) {
                Some(s) => parse_p(&s)?,
                None => g
                    .p_meta()
                    .cloned()
                    .ok_or_else(|| CliError::config("graph has no stored p; pass --p"))?,
            };
            let v = measure::mu_d_exact(&g, &q, d, &p, strategy)?;
            (MeasureValue::Exact(v), format_rat(&p), "exact".to_string())
        }
    };
    log.line(&format!("measure evaluated on {rect_id}"));
    let row = MeasurementRow {
        seed,
        n: g.n(),
        k: g.k(),
        d,
        p: p_col,
        rectangle_id: rect_id,
        strategy: format!("{strategy:?}").to_lowercase(),
        mode: mode_col,
        value: value.clone(),
    };
    match a.out.or(cfg.out) {
        Some(out) => {
            let mut buf = Vec::new();
            report::write_measurements(&[row], &mut buf)?;
            std::fs::write(&out, buf).map_err(|e| CliError::Run(e.to_string()))?;
            println!(
                "{}",
                match &value {
                    MeasureValue::Exact(r) => format_rat(r),
                    MeasureValue::Approx(x) => format!("{x}"),
                }
            );
        }
        None => println!("{}", report::MEASUREMENT_HEADER.to_string() + "\n" + &row.csv_line()),
    }
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// split-sum
// ---------------------------------------------------------------------------

#[derive(Args)]
struct SplitSumArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    rect: Option<PathBuf>,
    #[arg(long)]
    ell: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    p: Option<String>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SplitSumConfig {
    graph: Option<PathBuf>,
    rect: Option<PathBuf>,
    ell: Option<usize>,
    d: Option<usize>,
    p: Option<String>,
}

fn cmd_split_sum(a: SplitSumArgs) -> Result<ExitCode, CliError> {
    let cfg: SplitSumConfig = load_config(&a.config)?;
    let graph = need(a.graph, cfg.graph, "graph")?;
    let rect = need(a.rect, cfg.rect, "rect")?;
    let ell = need(a.ell, cfg.ell, "ell")?;
    let d = need(a.d, cfg.d, "d")?;
    let g = BlockGraph::from_file(&graph)?;
    let q = load_rectangle(&rect, &g)?;
    let p = match a.p.or(cfg.p) {
        Some(s) => parse_p(&s)?,
        None => g
            .p_meta()
            .cloned()
            .ok_or_else(|| CliError::config("graph has no stored p; pass --p"))?,
    };
    let split = measure::split_main_boundary(&g, &q, ell, d, &p)?;
    let full = measure::mu_d_exact(&g, &q, d, &p, Strategy::Factorized)?;
    let nk = Rat::from_integer(num_bigint_pow(g.n(), g.k()));
    let total_normalized = &split.total / nk;
    println!(
        "{}",
        serde_json::json!({
            "ell": split.ell,
            "d": split.d,
            "prefix_star_edges": split.prefix_star_edges,
            "main": format_rat(&split.main),
            "boundary": split.boundary.iter().map(|t| serde_json::json!({
                "center": t.center,
                "target": t.target,
                "value": format_rat(&t.value),
                "empty": t.empty,
            })).collect::<Vec<_>>(),
            "total": format_rat(&split.total),
            "matches_full_sum": total_normalized == full,
        })
    );
    Ok(if total_normalized == full {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn num_bigint_pow(n: usize, k: usize) -> num_bigint::BigInt {
    num_bigint::BigInt::from(n).pow(k as u32)
}

// ---------------------------------------------------------------------------
// decompose
// ---------------------------------------------------------------------------

#[derive(Args)]
struct DecomposeArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    rect: Option<PathBuf>,
    #[arg(long)]
    s: Option<u64>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct DecomposeConfig {
    graph: Option<PathBuf>,
    rect: Option<PathBuf>,
    s: Option<u64>,
    d: Option<usize>,
    p: Option<String>,
    out: Option<PathBuf>,
}

fn cmd_decompose(a: DecomposeArgs, log: &mut Logger) -> Result<ExitCode, CliError> {
    let cfg: DecomposeConfig = load_config(&a.config)?;
    let graph = need(a.graph, cfg.graph, "graph")?;
    let s = need(a.s, cfg.s, "s")?;
    let d = need(a.d, cfg.d, "d")?;
    let g = BlockGraph::from_file(&graph)?;
    let q = match a.rect.or(cfg.rect) {
        Some(path) => load_rectangle(&path, &g)?,
        None => Rectangle::full(&g),
    };
    let p = match a.p.or(cfg.p) {
        Some(ps) => parse_p(&ps)?,
        None => g
            .p_meta()
            .cloned()
            .ok_or_else(|| CliError::config("graph has no stored p; pass --p"))?,
    };
    let spec = DecomposeSpec {
        s,
        d,
        p,
        c_const: 324.0,
    };
    let dec = wellbehaved::decompose_rectangle(&g, &q, &spec)?;
    log.line(&format!("decomposed into {} parts", dec.parts.len()));
    let mut small = 0u64;
    let mut axiom = 0u64;
    let mut good = 0u64;
    for (_, label) in &dec.parts {
        match label {
            wellbehaved::PartLabel::Small => small += 1,
            wellbehaved::PartLabel::AxiomSub { .. } => axiom += 1,
            wellbehaved::PartLabel::Good { .. } => good += 1,
        }
    }
    if let Some(out) = a.out.or(cfg.out) {
        std::fs::write(
            &out,
            serde_json::to_string_pretty(&dec.parts).expect("parts"),
        )
        .map_err(|e| CliError::Run(e.to_string()))?;
    }
    let total: num_bigint::BigUint = dec.parts.iter().map(|(r, _)| r.cardinality()).sum();
    println!(
        "{}",
        serde_json::json!({
            "parts": dec.parts.len(),
            "small": small,
            "axiom_sub": axiom,
            "good": good,
            "cardinality_preserved": total == q.cardinality(),
            "regime_ok": dec.regime_ok,
            "regime_detail": dec.regime_detail,
            "worst_small_ratio": dec.worst_small_ratio,
            "good_label_fallbacks": dec.good_label_fallbacks,
            "max_depth": dec.max_depth,
        })
    );
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// check-wellbehaved
// ---------------------------------------------------------------------------

#[derive(Args)]
struct CheckWbArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    graph: Option<PathBuf>,
    /// p1 | p2 | p3 | p4
    #[arg(long)]
    property: Option<String>,
    /// WellBehavedSpec JSON file.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Tuple-depth cap for p1 / p2 / p3 (core cover cap).
    #[arg(long)]
    d: Option<usize>,
    /// Sampled rectangles for p2 / p4.
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    p: Option<String>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct CheckWbConfig {
    graph: Option<PathBuf>,
    property: Option<String>,
    spec: Option<PathBuf>,
    d: Option<usize>,
    samples: Option<u64>,
    seed: Option<u64>,
    p: Option<String>,
}

fn cmd_check_wb(a: CheckWbArgs, log: &mut Logger) -> Result<ExitCode, CliError> {
    use rand::{Rng, SeedableRng};
    let cfg: CheckWbConfig = load_config(&a.config)?;
    let graph = need(a.graph, cfg.graph, "graph")?;
    let property = need(a.property, cfg.property, "property")?;
    let spec_path = need(a.spec, cfg.spec, "spec")?;
    let spec: WellBehavedSpec = {
        let text = std::fs::read_to_string(&spec_path)
            .map_err(|e| CliError::config(format!("{}: {e}", spec_path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("{}: {e}", spec_path.display())))?
    };
    let g = BlockGraph::from_file(&graph)?;
    let p = match a.p.or(cfg.p) {
        Some(s) => parse_p(&s)?,
        None => g
            .p_meta()
            .cloned()
            .ok_or_else(|| CliError::config("graph has no stored p; pass --p"))?,
    };
    let d = a.d.or(cfg.d).unwrap_or(2);
    let samples = a.samples.or(cfg.samples).unwrap_or(5);
    let seed = a.seed.or(cfg.seed).unwrap_or(0);
    let pass = match property.as_str() {
        "p1" => {
            let rep = wellbehaved::check_common_neighborhoods(&g, &spec.beta, &p, d)?;
            println!("{}", serde_json::to_string_pretty(&rep).expect("report"));
            rep.pass
        }
        "p2" => {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut rects = Vec::new();
            for _ in 0..samples {
                let mut sides = Vec::new();
                for b in 0..g.k() {
                    let side: Vec<u32> = g
                        .block_vertices(b)
                        .filter(|_| rng.gen_bool(0.9))
                        .collect();
                    sides.push(side);
                }
                rects.push(
                    Rectangle::new(&g, (0..g.k()).collect(), sides)
                        .map_err(|e| CliError::Run(e.to_string()))?,
                );
            }
            let out = wellbehaved::check_error_sets(&g, spec.s, d, &spec.beta, &spec.gamma, &p, &rects)?;
            println!("{}", serde_json::to_string_pretty(&out).expect("report"));
            out.iter().all(|o| match o {
                wellbehaved::ErrorSetOutcome::Checked(c) => c.pass,
                wellbehaved::ErrorSetOutcome::Rejected { .. } => false,
            })
        }
        "p3" => {
            let cores = patterns::cores_vc_at_most(g.k().min(patterns::MAX_LABELS), d)?;
            let q = Rectangle::full(&g);
            let mut all = true;
            let mut reports = Vec::new();
            for info in cores.iter() {
                let rep = wellbehaved::check_char_bounds(
                    &g,
                    &info.f,
                    &q,
                    &p,
                    &wellbehaved::CharBoundMode::General {
                        lambda: spec.lambda,
                    },
                )?;
                all &= rep.pass || rep.degenerate;
                reports.push(rep);
            }
            log.line(&format!("checked {} cores", reports.len()));
            println!("{}", serde_json::to_string_pretty(&reports).expect("report"));
            all
        }
        "p4" => {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let lam = spec.big_lambda;
            let blocks: Vec<usize> = (0..g.k()).collect();
            let cores = patterns::cores_vc_at_most(g.k().min(patterns::MAX_LABELS), d)?;
            let mut all = true;
            let mut reports = Vec::new();
            for _ in 0..samples {
                // (4 Lambda)-small and (Lambda, B)-large random rectangle.
                let size = ((lam + 1) as usize).min(g.n()).max(1);
                let mut sides = Vec::new();
                for b in 0..g.k() {
                    let mut pool: Vec<u32> = g.block_vertices(b).collect();
                    for i in (1..pool.len()).rev() {
                        pool.swap(i, rng.gen_range(0..=i));
                    }
                    pool.truncate(size.min(4 * lam as usize));
                    pool.sort_unstable();
                    sides.push(pool);
                }
                let q = Rectangle::new(&g, (0..g.k()).collect(), sides)
                    .map_err(|e| CliError::Run(e.to_string()))?;
                for info in cores.iter() {
                    match wellbehaved::check_char_bounds(
                        &g,
                        &info.f,
                        &q,
                        &p,
                        &wellbehaved::CharBoundMode::Tight {
                            big_lambda: lam,
                            blocks: blocks.clone(),
                            constant: spec.tight_const,
                        },
                    ) {
                        Ok(rep) => {
                            all &= rep.pass || rep.degenerate;
                            reports.push(rep);
                        }
                        Err(wellbehaved::WbError::ProbeShape(reason)) => {
                            log.line(&format!("sample skipped: {reason}"));
                        }
                        Err(e) => return Err(e.into()),
                    }
                }
            }
            println!("{}", serde_json::to_string_pretty(&reports).expect("report"));
            all
        }
        other => return Err(CliError::config(format!("unknown property `{other}`"))),
    };
    Ok(if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

// ---------------------------------------------------------------------------
// tail-probe
// ---------------------------------------------------------------------------

#[derive(Args)]
struct TailProbeArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TailProbeConfig {
    n: usize,
    k: usize,
    p: String,
    rect: Option<RectFile>,
    probe: TailProbe,
    s_grid: Vec<f64>,
    trials: Option<u64>,
    seed: Option<u64>,
}

fn cmd_tail_probe(a: TailProbeArgs) -> Result<ExitCode, CliError> {
    let path = a
        .config
        .ok_or_else(|| CliError::config("tail-probe requires --config"))?;
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let cfg: TailProbeConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let p = parse_p(&cfg.p)?;
    let shape = BlockGraph::empty(cfg.n, cfg.k);
    let q = match cfg.rect {
        Some(r) => Rectangle::new(&shape, (0..cfg.k).collect(), r.sides)
            .map_err(|e| CliError::config(e.to_string()))?,
        None => Rectangle::full(&shape),
    };
    let trials = a.trials.or(cfg.trials).unwrap_or(10_000);
    let seed = a.seed.or(cfg.seed).unwrap_or(0);
    let rep = wellbehaved::tail_probe(cfg.n, cfg.k, &q, &cfg.probe, &p, &cfg.s_grid, trials, seed)?;
    println!("{}", serde_json::to_string_pretty(&rep).expect("report"));
    Ok(if rep.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// cores | counting | proofs | measure | lp | soundness | all
    #[arg(long)]
    suite: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ValidateConfig {
    suite: Option<String>,
    k: Option<usize>,
    n: Option<usize>,
    count: Option<usize>,
    seed: Option<u64>,
}

fn cmd_validate(a: ValidateArgs, log: &mut Logger) -> Result<ExitCode, CliError> {
    let cfg: ValidateConfig = load_config(&a.config)?;
    let suite = a.suite.or(cfg.suite).unwrap_or_else(|| "all".into());
    let k = a.k.or(cfg.k).unwrap_or(4);
    let n = a.n.or(cfg.n).unwrap_or(1);
    let count = a.count.or(cfg.count).unwrap_or(50);
    let seed = a.seed.or(cfg.seed).unwrap_or(1);
    let mut reports = Vec::new();
    let run = |name: &str, reports: &mut Vec<validate::SuiteReport>| -> Result<(), CliError> {
        match name {
            "cores" => reports.push(validate::validate_cores(k)?),
            "counting" => reports.push(validate::validate_counting(k)?),
            "proofs" => reports.push(validate::validate_proofs(count, seed).map_err(CliError::Run)?),
            "measure" => reports.push(validate::validate_measure(count, seed).map_err(CliError::Run)?),
            "lp" => reports.push(validate::validate_lp(count.min(30), seed).map_err(CliError::Run)?),
            "soundness" => reports.push(validate::validate_soundness(n, k).map_err(CliError::Run)?),
            other => return Err(CliError::config(format!("unknown suite `{other}`"))),
        }
        Ok(())
    };
    if suite == "all" {
        for name in ["cores", "counting", "proofs", "measure", "lp"] {
            log.line(&format!("running suite {name}"));
            run(name, &mut reports)?;
        }
    } else {
        run(&suite, &mut reports)?;
    }
    let mut all = true;
    for r in &reports {
        r.print();
        all &= r.pass;
    }
    Ok(if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input CSV files.
    #[arg(long)]
    input: Vec<PathBuf>,
    /// Column to aggregate.
    #[arg(long)]
    value: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ReportConfig {
    input: Option<Vec<PathBuf>>,
    value: Option<String>,
    out: Option<PathBuf>,
}

fn cmd_report(a: ReportArgs) -> Result<ExitCode, CliError> {
    let cfg: ReportConfig = load_config(&a.config)?;
    let inputs = if a.input.is_empty() {
        cfg.input.unwrap_or_default()
    } else {
        a.input
    };
    let value = a.value.or(cfg.value).unwrap_or_else(|| "value_float".into());
    let mut merged: Option<report::Table> = None;
    for path in &inputs {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let table = report::parse_csv(&text)?;
        match &mut merged {
            None => merged = Some(table),
            Some(m) => {
                if m.header != table.header {
                    return Err(CliError::config(format!(
                        "{}: header differs from the first input",
                        path.display()
                    )));
                }
                m.rows.extend(table.rows);
            }
        }
    }
    let table = merged.unwrap_or(report::Table {
        header: vec![],
        rows: vec![],
    });
    let agg = report::aggregate(&table, &value)?;
    let key_names: Vec<String> = table
        .header
        .iter()
        .filter(|h| *h != "seed" && !h.starts_with("value"))
        .cloned()
        .collect();
    let mut buf = Vec::new();
    report::write_aggregate(&agg, &key_names, &mut buf)?;
    match a.out.or(cfg.out) {
        Some(out) => std::fs::write(&out, buf).map_err(|e| CliError::Run(e.to_string()))?,
        None => print!("{}", String::from_utf8_lossy(&buf)),
    }
    Ok(ExitCode::SUCCESS)
}
