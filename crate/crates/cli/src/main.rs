use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};

use qpc_core::adversary::{self, AttackKind, AttackModel, AttackTarget, EntanglingAttack};
use qpc_core::analysis::{self, ExperimentReport, GuessRole};
use qpc_core::protocol::{run_protocol, ProtocolConfig, Secret};
use qpc_core::quantum::TwoQubitUnitary;
use qpc_core::rng::seeded;
use qpc_core::{BitString, QpcError};

const SCHEMA: &str = "ghz-qpc/1";

#[derive(Parser)]
#[command(name = "ghz-qpc", version, about = "GHZ-state quantum private comparison simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one comparison session.
    Run(RunArgs),
    /// Estimate the detection probability of an attack.
    Attack(AttackArgs),
    /// Recompute the published truth table.
    TruthTable(FormatArg),
    /// Qubit efficiency n/(2n+2).
    Efficiency(EfficiencyArgs),
    /// Honest-run correctness over all small secret lengths.
    Correctness(CorrectnessArgs),
    /// Estimate how often a party guesses a secret it should not learn.
    Guess(GuessArgs),
    /// Check an entangling probe against the no-disturbance constraints.
    Probe(ProbeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum AttackChoice {
    None,
    Intercept,
    Measure,
    Entangle,
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetChoice {
    Alice,
    Bob,
    Both,
}

impl From<TargetChoice> for AttackTarget {
    fn from(t: TargetChoice) -> Self {
        match t {
            TargetChoice::Alice => AttackTarget::AliceChannel,
            TargetChoice::Bob => AttackTarget::BobChannel,
            TargetChoice::Both => AttackTarget::Both,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum RoleChoice {
    Tp,
    Alice,
    Bob,
    Eve,
}

impl From<RoleChoice> for GuessRole {
    fn from(r: RoleChoice) -> Self {
        match r {
            RoleChoice::Tp => GuessRole::Tp,
            RoleChoice::Alice => GuessRole::Alice,
            RoleChoice::Bob => GuessRole::Bob,
            RoleChoice::Eve => GuessRole::Eve,
        }
    }
}

#[derive(clap::Args)]
struct FormatArg {
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Secret length.
    #[arg(long = "N")]
    secret_len: usize,
    /// Group size.
    #[arg(long = "n")]
    group_size: usize,
    /// Alice's secret: N characters of 0/1 in index order, or a decimal value.
    #[arg(long)]
    secret_a: String,
    #[arg(long)]
    secret_b: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = ProtocolConfig::DEFAULT_DECOYS)]
    decoys: usize,
    #[arg(long, default_value_t = 0.0)]
    threshold: f64,
    #[arg(long, value_enum, default_value = "none")]
    attack: AttackChoice,
    /// JSON file holding a 4x4 unitary as [re, im] pairs (entangle only).
    #[arg(long)]
    unitary: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "both")]
    target: TargetChoice,
    /// Include the full event transcript.
    #[arg(long)]
    transcript: bool,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(clap::Args)]
struct AttackArgs {
    #[arg(long, value_enum)]
    kind: AttackChoice,
    #[arg(long)]
    unitary: Option<PathBuf>,
    /// Decoy counts to sweep.
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 4, 8])]
    decoys: Vec<usize>,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "N", default_value_t = 4)]
    secret_len: usize,
    #[arg(long = "n", default_value_t = 2)]
    group_size: usize,
    #[arg(long, value_enum, default_value = "alice")]
    target: TargetChoice,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(clap::Args)]
struct EfficiencyArgs {
    /// Group sizes; repeat or separate with commas.
    #[arg(long = "n", value_delimiter = ',', required = true)]
    group_sizes: Vec<u64>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(clap::Args)]
struct CorrectnessArgs {
    #[arg(long = "max-N", default_value_t = 5)]
    max_len: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(clap::Args)]
struct GuessArgs {
    #[arg(long, value_enum)]
    role: RoleChoice,
    #[arg(long = "N", default_value_t = 4)]
    secret_len: usize,
    #[arg(long = "n", default_value_t = 2)]
    group_size: usize,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(clap::Args)]
struct ProbeArgs {
    #[arg(long)]
    unitary: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

enum CliError {
    Usage(String),
    Failed(String),
}

impl From<QpcError> for CliError {
    fn from(e: QpcError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

type CliResult = Result<(), CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Attack(a) => attack(a),
        Command::TruthTable(a) => truth_table(a),
        Command::Efficiency(a) => efficiency(a),
        Command::Correctness(a) => correctness(a),
        Command::Guess(a) => guess(a),
        Command::Probe(a) => probe(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Failed(msg)) => {
            eprintln!("ghz-qpc: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("ghz-qpc: {msg}");
            ExitCode::from(2)
        }
    }
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::rng().random();
        eprintln!("seed: {s}");
        s
    })
}

fn set_jobs(jobs: Option<usize>) -> CliResult {
    if let Some(j) = jobs {
        if j == 0 {
            return Err(CliError::Usage("--jobs must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    Ok(())
}

/// `N` characters of 0/1 are read as bits `x_1..x_N`; anything else as a
/// decimal value below `2^N`.
fn parse_secret(s: &str, len: usize) -> Result<Secret, CliError> {
    if s.len() == len && s.chars().all(|c| c == '0' || c == '1') {
        let bits: BitString = s.parse()?;
        return Ok(Secret::from_bits(bits)?);
    }
    let value: u64 = s
        .parse()
        .map_err(|_| CliError::Usage(format!("secret {s:?} is neither {len} bits nor a decimal value")))?;
    Ok(Secret::from_value(value, len)?)
}

fn load_unitary(path: &Path) -> Result<TwoQubitUnitary, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn attack_kind(choice: AttackChoice, unitary: Option<&Path>) -> Result<AttackKind, CliError> {
    Ok(match choice {
        AttackChoice::None => AttackKind::None,
        AttackChoice::Intercept => AttackKind::InterceptResend,
        AttackChoice::Measure => AttackKind::MeasurementResend,
        AttackChoice::Entangle => {
            let path = unitary.ok_or_else(|| CliError::Usage("--unitary is required for entangle".into()))?;
            AttackKind::EntangleMeasure(EntanglingAttack::new(load_unitary(path)?))
        }
    })
}

fn emit_json(body: impl Serialize) -> CliResult {
    let mut value = serde_json::to_value(body).map_err(|e| CliError::Usage(e.to_string()))?;
    if let Value::Object(map) = &mut value {
        map.insert("schema".into(), Value::from(SCHEMA));
    }
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, &value).map_err(|e| CliError::Usage(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

fn emit_reports(reports: &[ExperimentReport], format: Format, seed: u64) -> CliResult {
    match format {
        Format::Json => emit_json(json!({ "seed": seed, "reports": reports }))?,
        Format::Csv => analysis::write_csv(reports, io::stdout().lock())?,
        Format::Text => {
            for r in reports {
                let params = r.parameters.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" ");
                let analytic = r.analytic.map(|a| format!("{a:.6}")).unwrap_or_else(|| "-".into());
                println!(
                    "{} [{params}] trials={} estimate={:.6} analytic={analytic} std_error={:.6} {}",
                    r.name,
                    r.trials,
                    r.estimate,
                    r.std_error,
                    if r.pass { "PASS" } else { "FAIL" }
                );
            }
        }
    }
    if reports.iter().all(|r| r.pass) {
        Ok(())
    } else {
        Err(CliError::Failed("estimate outside the 3-sigma band".into()))
    }
}

fn run(a: RunArgs) -> CliResult {
    if matches!(a.format, Format::Csv) {
        return Err(CliError::Usage("run supports text and json output".into()));
    }
    let config = ProtocolConfig::new(a.secret_len, a.group_size)
        .with_decoys(a.decoys)
        .with_threshold(a.threshold);
    config.validate()?;
    let x = parse_secret(&a.secret_a, a.secret_len)?;
    let y = parse_secret(&a.secret_b, a.secret_len)?;
    let kind = attack_kind(a.attack, a.unitary.as_deref())?;
    let model = AttackModel::new(kind, a.target.into());
    let seed = resolve_seed(a.seed);
    let out = run_protocol(&config, &x, &y, &model, &mut seeded(seed))?;
    match a.format {
        Format::Json => {
            let mut body = json!({
                "seed": seed,
                "config": config,
                "attack": model,
                "verdict": out.verdict,
                "per_group_rc": out.per_group_rc,
                "eavesdrop_error_rate": out.eavesdrop_error_rate,
                "checks": out.checks,
            });
            if a.transcript {
                body["transcript"] = serde_json::to_value(&out.transcript).map_err(|e| CliError::Usage(e.to_string()))?;
            }
            emit_json(body)
        }
        _ => {
            println!("seed: {seed}");
            println!("N={} n={} groups={} decoys={}", config.secret_len, config.group_size, config.group_count(), config.decoy_count);
            println!("attack: {} ({:?})", model.kind, model.target);
            for c in &out.checks {
                println!(
                    "decoy check {}: {}/{} mismatches, {}",
                    c.channel,
                    c.check.mismatches,
                    c.check.decoys,
                    if c.check.pass { "pass" } else { "fail" }
                );
            }
            if !out.per_group_rc.is_empty() {
                let rc: Vec<String> = out.per_group_rc.iter().map(|r| r.to_string()).collect();
                println!("R_C: {}", rc.join(" "));
            }
            if a.transcript {
                for e in &out.transcript.events {
                    let line = serde_json::to_string(&e.payload).map_err(|e| CliError::Usage(e.to_string()))?;
                    println!("  step {} {:?}: {line}", e.step, e.actor);
                }
            }
            println!("verdict: {}", out.verdict);
            Ok(())
        }
    }
}

fn attack(a: AttackArgs) -> CliResult {
    set_jobs(a.jobs)?;
    let kind = attack_kind(a.kind, a.unitary.as_deref())?;
    let model = AttackModel::new(kind, a.target.into());
    let config = ProtocolConfig::new(a.secret_len, a.group_size);
    let seed = resolve_seed(a.seed);
    let reports = a
        .decoys
        .iter()
        .map(|&l| analysis::detection_experiment(&model, l, a.trials, &config, seed))
        .collect::<Result<Vec<_>, _>>()?;
    emit_reports(&reports, a.format, seed)
}

fn truth_table(a: FormatArg) -> CliResult {
    let report = analysis::verify_truth_table()?;
    match a.format {
        Format::Json => emit_json(&report)?,
        Format::Csv => return Err(CliError::Usage("truth-table supports text and json output".into())),
        Format::Text => {
            println!("row K_AB K_AC K_BC M_A1 M_B1 R_A R_B C_A C_B ~A ~B");
            for r in &report.rows {
                let e = r.expected;
                let cells = [
                    e.k_ab, e.k_ac, e.k_bc, e.m_a1, e.m_b1, e.r_a, e.r_b, e.c_a, e.c_b, e.a_complemented, e.b_complemented,
                ];
                let cells: Vec<&str> = cells.iter().map(|&b| if b { "1" } else { "0" }).collect();
                println!("{:>3} {} {}", r.row, cells.join(" "), if r.pass { "ok" } else { "MISMATCH" });
            }
            println!("{}/{} rows match", report.passed, report.rows.len());
        }
    }
    if report.all_pass {
        Ok(())
    } else {
        Err(CliError::Failed("truth table mismatch".into()))
    }
}

fn efficiency(a: EfficiencyArgs) -> CliResult {
    let results = a
        .group_sizes
        .iter()
        .map(|&n| analysis::qubit_efficiency(n))
        .collect::<Result<Vec<_>, _>>()?;
    match a.format {
        Format::Json => {
            let rows: Vec<Value> = results
                .iter()
                .map(|r| json!({ "n": r.n, "efficiency": r.efficiency.to_string(), "value": r.value(), "bounds_ok": r.bounds_ok }))
                .collect();
            emit_json(json!({ "results": rows }))?;
        }
        Format::Csv => {
            println!("n,efficiency,value,bounds_ok");
            for r in &results {
                println!("{},{},{},{}", r.n, r.efficiency, r.value(), r.bounds_ok);
            }
        }
        Format::Text => {
            for r in &results {
                println!("n={} efficiency={} ({:.6}) bounds_ok={}", r.n, r.efficiency, r.value(), r.bounds_ok);
            }
        }
    }
    if results.iter().all(|r| r.bounds_ok) {
        Ok(())
    } else {
        Err(CliError::Failed("efficiency outside [1/3, 1/2)".into()))
    }
}

fn correctness(a: CorrectnessArgs) -> CliResult {
    set_jobs(a.jobs)?;
    let seed = resolve_seed(a.seed);
    let summary = analysis::exhaustive_correctness(a.max_len, seed)?;
    match a.format {
        Format::Json => emit_json(json!({ "seed": seed, "summary": summary }))?,
        Format::Csv => {
            println!("N,n,exhaustive,pairs,equal,unequal,failures");
            for c in &summary.cases {
                println!(
                    "{},{},{},{},{},{},{}",
                    c.secret_len, c.group_size, c.exhaustive, c.pairs, c.equal_verdicts, c.unequal_verdicts, c.failures
                );
            }
        }
        Format::Text => {
            for c in &summary.cases {
                println!(
                    "N={} n={} {} pairs={} equal={} unequal={} failures={}",
                    c.secret_len,
                    c.group_size,
                    if c.exhaustive { "exhaustive" } else { "sampled" },
                    c.pairs,
                    c.equal_verdicts,
                    c.unequal_verdicts,
                    c.failures
                );
            }
        }
    }
    if summary.all_pass {
        Ok(())
    } else {
        Err(CliError::Failed("honest run returned a wrong verdict".into()))
    }
}

fn guess(a: GuessArgs) -> CliResult {
    set_jobs(a.jobs)?;
    let config = ProtocolConfig::new(a.secret_len, a.group_size);
    let seed = resolve_seed(a.seed);
    let report = analysis::guess_experiment(a.role.into(), &config, a.trials, seed)?;
    emit_reports(&[report], a.format, seed)
}

fn probe(a: ProbeArgs) -> CliResult {
    let u = load_unitary(&a.unitary)?;
    let constraints = adversary::check_constraints(&u)?;
    let distinguishability = adversary::ancilla_distinguishability(&u);
    let kind = AttackKind::EntangleMeasure(EntanglingAttack::new(u));
    let decoy_error = adversary::mean_decoy_error_probability(&kind)?;
    match a.format {
        Format::Json => emit_json(json!({
            "constraints": constraints,
            "ancilla_distinguishability": distinguishability,
            "mean_decoy_error": decoy_error,
        }))?,
        Format::Csv => return Err(CliError::Usage("probe supports text and json output".into())),
        Format::Text => {
            println!(
                "|lambda01|={:.3e} |lambda10|={:.3e} cross={:.3e} satisfied={}",
                constraints.lambda_01_mag, constraints.lambda_10_mag, constraints.cross_term_distance, constraints.satisfied
            );
            println!("mean decoy error={decoy_error:.6} ancilla distinguishability={distinguishability:.3e}");
        }
    }
    Ok(())
}
