//! `locprov`: run attack scenarios, audit exported chains, and produce
//! benchmark tables as CSV and gnuplot data.
//!
//! Exit codes: 0 clean or matched, 1 audit failure or expectation mismatch,
//! 2 usage, parse or I/O error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use locprov::audit::{audit, classify_failure, AuditConfig};
use locprov::bench::{bench_audit, bench_proofgen, space_table};
use locprov::crypto::Profile;
use locprov::export::{ChainDocument, ClaimsDocument, Document, RegistryDocument, ReportDocument};
use locprov::ordering::OrderingScheme;
use locprov::sim::{builtin, builtin_suite, run_scenario, Scenario};

#[derive(Parser, Debug)]
#[command(name = "locprov", version, about = "Location provenance simulator, auditor and benchmarks")]
struct Cli {
    /// TOML file with defaults for any command; flags win over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one scenario file (or `builtin:NAME`) and export its results.
    Simulate(SimulateArgs),
    /// Run every bundled scenario under both ordering schemes.
    Suite(SuiteArgs),
    /// Audit an exported chain against a list of claims.
    Audit(AuditArgs),
    /// Ordering metadata bytes per entry as the chain grows.
    BenchSpace(SpaceArgs),
    /// Audit cost for worst-case disclosures.
    BenchAudit(BenchAuditArgs),
    /// Proof issuance throughput.
    BenchProofgen(ProofgenArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    scenario: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    scheme: Option<OrderingScheme>,
    /// Directory for chain.json, claims.json, registry.json, outcome.json and trace.jsonl.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SuiteArgs {
    /// Restrict to one scheme.
    #[arg(long)]
    scheme: Option<OrderingScheme>,
}

#[derive(Args, Debug)]
struct AuditArgs {
    chain: PathBuf,
    #[arg(long)]
    claims: PathBuf,
    /// Without a registry, epoch inclusion is skipped with a warning.
    #[arg(long)]
    registry: Option<PathBuf>,
    /// Write the JSON report here.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    window_ms: Option<u64>,
}

#[derive(Args, Debug)]
struct SpaceArgs {
    #[arg(long)]
    max_n: Option<u64>,
    #[arg(long)]
    fpr: Option<f64>,
    #[arg(long)]
    profile: Option<Profile>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Whitespace-separated copy for gnuplot.
    #[arg(long)]
    dat: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchAuditArgs {
    #[arg(long, value_delimiter = ',')]
    chain_n: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    reveal_pct: Option<Vec<f64>>,
    #[arg(long)]
    scheme: Option<OrderingScheme>,
    #[arg(long)]
    profile: Option<Profile>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    dat: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ProofgenArgs {
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    profile: Option<Profile>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct Config {
    seed: Option<u64>,
    profile: Option<Profile>,
    scheme: Option<OrderingScheme>,
    out_dir: Option<PathBuf>,
    window_ms: Option<u64>,
    bench_space: SpaceConfig,
    bench_audit: BenchAuditConfig,
    bench_proofgen: ProofgenConfig,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SpaceConfig {
    max_n: Option<u64>,
    fpr: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct BenchAuditConfig {
    chain_n: Option<Vec<usize>>,
    reveal_pct: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ProofgenConfig {
    count: Option<usize>,
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    let Some(path) = path else { return Ok(Config::default()) };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn load_scenario(source: &str) -> Result<Scenario> {
    if let Some(name) = source.strip_prefix("builtin:") {
        return builtin(name).with_context(|| format!("no bundled scenario named `{name}`"));
    }
    let text = read(Path::new(source))?;
    Scenario::from_toml(&text).with_context(|| format!("parsing {source}"))
}

fn simulate(args: SimulateArgs, cfg: &Config) -> Result<ExitCode> {
    let mut scenario = load_scenario(&args.scenario)?;
    if let Some(seed) = args.seed.or(cfg.seed) {
        scenario.seed = seed;
    }
    let out = run_scenario(&scenario, args.scheme.or(cfg.scheme))?;
    let dir = args.out.or_else(|| cfg.out_dir.clone()).unwrap_or_else(|| PathBuf::from(format!("out/{}", out.name)));
    write(&dir.join("chain.json"), &out.chain_document().to_json())?;
    write(&dir.join("claims.json"), &out.claims_document().to_json())?;
    write(&dir.join("registry.json"), &out.registry_document().to_json())?;
    write(&dir.join("outcome.json"), &out.outcome_document().to_json())?;
    write(&dir.join("trace.jsonl"), &out.trace_jsonl())?;
    println!("{}", out.summary());
    print!("{}", out.report.render_text());
    println!("results in {}", dir.display());
    Ok(if out.matched { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn suite(args: SuiteArgs, cfg: &Config) -> Result<ExitCode> {
    let schemes: Vec<OrderingScheme> = match args.scheme.or(cfg.scheme) {
        Some(s) => vec![s],
        None => OrderingScheme::ALL.to_vec(),
    };
    let mut all = true;
    for s in builtin_suite() {
        for &scheme in &schemes {
            let out = run_scenario(&s, Some(scheme))?;
            all &= out.matched;
            println!("{}", out.summary());
        }
    }
    Ok(if all { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn audit_cmd(args: AuditArgs, cfg: &Config) -> Result<ExitCode> {
    let chain = ChainDocument::from_json(&read(&args.chain)?).with_context(|| format!("parsing {}", args.chain.display()))?;
    let claims =
        ClaimsDocument::from_json(&read(&args.claims)?).with_context(|| format!("parsing {}", args.claims.display()))?;
    let registry = match &args.registry {
        Some(p) => Some(RegistryDocument::from_json(&read(p)?).with_context(|| format!("parsing {}", p.display()))?),
        None => None,
    };
    let mut config = AuditConfig::for_profile(chain.profile);
    if let Some(w) = args.window_ms.or(cfg.window_ms) {
        config.window_ms = w;
    }
    let report =
        audit(&claims.claims, &chain.presentation, &chain.directory, registry.as_ref().map(|r| &r.registry), &config);
    let ok = report.is_ok();
    let class = (!ok).then(|| classify_failure(&report));
    print!("{}", report.render_text());
    if let Some(c) = class {
        println!("threat class: {c}");
    }
    if let Some(p) = &args.report {
        write(p, &ReportDocument { ok, class, report }.to_json())?;
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn emit_csv<T: Serialize>(rows: &[T], out: Option<&Path>) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().context("flushing CSV")?;
    let text = String::from_utf8(bytes).expect("CSV output is UTF-8");
    match out {
        Some(p) => write(p, &text),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

/// gnuplot reads `#` comments and whitespace-separated columns.
fn emit_dat(header: &[&str], rows: &[Vec<String>], out: &Path) -> Result<()> {
    let mut text = format!("# {}\n", header.join(" "));
    for r in rows {
        text.push_str(&r.join(" "));
        text.push('\n');
    }
    write(out, &text)
}

fn bench_space_cmd(args: SpaceArgs, cfg: &Config) -> Result<ExitCode> {
    let max_n = args.max_n.or(cfg.bench_space.max_n).unwrap_or(10_000);
    let fpr = args.fpr.or(cfg.bench_space.fpr).unwrap_or(0.001);
    let profile = args.profile.or(cfg.profile).unwrap_or(Profile::Legacy);
    if max_n == 0 {
        bail!("--max-n must be at least 1");
    }
    let rows = space_table(profile, max_n, fpr)?;
    emit_csv(&rows, args.out.as_deref())?;
    if let Some(p) = &args.dat {
        let data: Vec<Vec<String>> = rows
            .iter()
            .map(|r| vec![r.n.to_string(), r.hashchain_bytes_per_entry.to_string(), r.bloom_bytes_per_entry.to_string()])
            .collect();
        emit_dat(&["n", "hashchain_bytes_per_entry", "bloom_bytes_per_entry"], &data, p)?;
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct AuditCsvRow {
    scheme: OrderingScheme,
    n: usize,
    pct: f64,
    revealed: usize,
    ops_count: usize,
    signatures_verified: usize,
    wall_time_ms: f64,
}

fn bench_audit_cmd(args: BenchAuditArgs, cfg: &Config) -> Result<ExitCode> {
    let ns = args.chain_n.or_else(|| cfg.bench_audit.chain_n.clone()).unwrap_or_else(|| vec![10_000]);
    let pcts = args.reveal_pct.or_else(|| cfg.bench_audit.reveal_pct.clone()).unwrap_or_else(|| vec![1.0, 10.0, 50.0, 100.0]);
    let profile = args.profile.or(cfg.profile).unwrap_or_default();
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let schemes: Vec<OrderingScheme> = match args.scheme.or(cfg.scheme) {
        Some(s) => vec![s],
        None => OrderingScheme::ALL.to_vec(),
    };
    if ns.contains(&0) {
        bail!("--chain-n values must be at least 1");
    }
    if pcts.iter().any(|p| !(*p > 0.0 && *p <= 100.0)) {
        bail!("--reveal-pct values must lie in (0, 100]");
    }
    let mut rows = Vec::new();
    for &scheme in &schemes {
        for &n in &ns {
            for &pct in &pcts {
                let (r, _) = bench_audit(scheme, profile, n, pct, seed)?;
                rows.push(AuditCsvRow {
                    scheme,
                    n,
                    pct,
                    revealed: r.revealed,
                    ops_count: r.ops_count,
                    signatures_verified: r.signatures_verified,
                    wall_time_ms: r.wall_ms,
                });
            }
        }
    }
    emit_csv(&rows, args.out.as_deref())?;
    if let Some(p) = &args.dat {
        let data: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                vec![
                    r.scheme.to_string(),
                    r.n.to_string(),
                    r.pct.to_string(),
                    r.ops_count.to_string(),
                    format!("{:.3}", r.wall_time_ms),
                ]
            })
            .collect();
        emit_dat(&["scheme", "n", "pct", "ops_count", "wall_time_ms"], &data, p)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn bench_proofgen_cmd(args: ProofgenArgs, cfg: &Config) -> Result<ExitCode> {
    let count = args.count.or(cfg.bench_proofgen.count).unwrap_or(1_000);
    let profiles = match args.profile.or(cfg.profile) {
        Some(p) => vec![p],
        None => vec![Profile::Legacy, Profile::Modern],
    };
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let mut rows = Vec::new();
    for profile in profiles {
        for scheme in OrderingScheme::ALL {
            rows.push(bench_proofgen(scheme, profile, count, seed)?);
        }
    }
    emit_csv(&rows, args.out.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Simulate(a) => simulate(a, &cfg),
        Command::Suite(a) => suite(a, &cfg),
        Command::Audit(a) => audit_cmd(a, &cfg),
        Command::BenchSpace(a) => bench_space_cmd(a, &cfg),
        Command::BenchAudit(a) => bench_audit_cmd(a, &cfg),
        Command::BenchProofgen(a) => bench_proofgen_cmd(a, &cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
