//! Command-line front end: define channels, run the estimation protocols,
//! reconstruct process matrices, sweep the approximation error and verify
//! the operator identities.
//!
//! Exit codes: 0 success, 1 identity-check failure, 2 configuration error,
//! 3 numerical failure (trace-preserving path fed a non-physical map),
//! 4 approximation-bound violation.

mod spec;
mod verify;

use std::path::PathBuf;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use qfid::chi::{
    chi_diagonal_protocol, chi_direct, chi_full_protocol, chi_offdiagonal_protocol, pauli_basis,
    ChiProtocol,
};
use qfid::designs::StateDesign;
use qfid::estimators::{superop_triple_exact, EstimationReport, Mode};

use spec::{build_protocol, parse_channel, parse_m_range, ProtocolName, ProtocolOptions};

/// Seed used when neither the flag nor the config file provides one.
const DEFAULT_SEED: u64 = 7;

const EXIT_IDENTITY: i32 = 1;
const EXIT_CONFIG: i32 = 2;
const EXIT_NUMERIC: i32 = 3;
const EXIT_BOUND: i32 = 4;

#[derive(Parser)]
#[command(
    name = "qfid",
    version,
    about = "Average-fidelity estimation for bipartite quantum channels"
)]
struct Cli {
    /// JSON config file with snake_case keys; explicit flags take precedence
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the fidelity triple of a bipartite channel
    Estimate(EstimateArgs),
    /// Reconstruct process-matrix elements from survive probabilities
    Chi(ChiArgs),
    /// Sweep the reduced-input approximation error over M
    Approx(ApproxArgs),
    /// Run the operator-identity verification suite
    Verify(VerifyArgs),
    /// Export a state 2-design or verify a custom one
    Design(DesignArgs),
}

#[derive(Args)]
struct EstimateArgs {
    /// Channel: name[:k=v,...] from the zoo or a channel JSON file
    #[arg(long)]
    channel: Option<String>,
    /// Subsystem dimension D (the channel acts on D²)
    #[arg(long)]
    dim: Option<usize>,
    /// design-exact | design-shots | haar | haar-shots | twirl-haar |
    /// twirl-haar-shots | twirl-clifford | twirl-clifford-shots | superop
    #[arg(long)]
    protocol: Option<String>,
    /// Design family for the design protocols: sic | mub
    #[arg(long)]
    design: Option<String>,
    /// Custom design JSON for side A
    #[arg(long)]
    design_a: Option<String>,
    /// Custom design JSON for side B
    #[arg(long)]
    design_b: Option<String>,
    /// Sampled settings for the Haar protocols
    #[arg(long)]
    settings: Option<usize>,
    /// Shots per setting for the shots protocols
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Report file (default: $QFID_OUTPUT_DIR/estimate-report.json)
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ChiArgs {
    #[arg(long)]
    channel: Option<String>,
    /// Subsystem dimension (protocols support D = 2)
    #[arg(long)]
    dim: Option<usize>,
    /// Reconstruct the full matrix
    #[arg(long)]
    full: bool,
    /// Row label of a single element, e.g. XX
    #[arg(long)]
    mu: Option<String>,
    /// Column label of a single element (defaults to --mu)
    #[arg(long)]
    nu: Option<String>,
    /// exact | shots
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// json (matrix) | csv (diagonal)
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ApproxArgs {
    /// Subsystem dimension D (SIC sets exist for 2 and 3)
    #[arg(long)]
    dim: Option<usize>,
    /// Inclusive M range, e.g. 2..4 (default 2..D²)
    #[arg(long)]
    m: Option<String>,
    /// Use a seeded random SIC subset instead of the prefix subset
    #[arg(long)]
    subset_seed: Option<u64>,
    /// Optional channel to report exact vs approximated fidelity
    #[arg(long)]
    channel: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Sweep CSV (default: $QFID_OUTPUT_DIR/approx-sweep.csv)
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Subsystem dimension to check; repeat for several (default: 2 and 3)
    #[arg(long)]
    dim: Vec<usize>,
    /// Also run the Haar-twirl Monte Carlo check
    #[arg(long)]
    include_appendix: bool,
    /// Samples for the Monte Carlo check
    #[arg(long)]
    haar_samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct DesignArgs {
    /// Verify a design JSON file instead of exporting
    #[arg(long)]
    input: Option<PathBuf>,
    /// sic | mub
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    /// Design JSON (default: $QFID_OUTPUT_DIR/design.json)
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Values from the optional JSON config file; flags override them.
struct Cfg(Map<String, Value>);

impl Cfg {
    fn load(path: Option<&PathBuf>) -> Result<Self> {
        let map = match path {
            None => Map::new(),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                match serde_json::from_str::<Value>(&text)
                    .with_context(|| format!("parsing config {}", p.display()))?
                {
                    Value::Object(map) => map,
                    _ => bail!("config {} must be a JSON object", p.display()),
                }
            }
        };
        Ok(Self(map))
    }

    fn string(&self, flag: Option<String>, key: &str) -> Option<String> {
        flag.or_else(|| self.0.get(key).and_then(|v| v.as_str()).map(str::to_string))
    }

    fn u64(&self, flag: Option<u64>, key: &str) -> Option<u64> {
        flag.or_else(|| self.0.get(key).and_then(Value::as_u64))
    }

    fn usize(&self, flag: Option<usize>, key: &str) -> Option<usize> {
        flag.or_else(|| self.0.get(key).and_then(Value::as_u64).map(|v| v as usize))
    }

    fn bool(&self, flag: bool, key: &str) -> bool {
        flag || self
            .0
            .get(key)
            .and_then(Value::as_bool)
            .unwrap_or(false)
    }

    fn path(&self, flag: Option<PathBuf>, key: &str) -> Option<PathBuf> {
        flag.or_else(|| {
            self.0
                .get(key)
                .and_then(|v| v.as_str())
                .map(PathBuf::from)
        })
    }
}

fn resolve_output(flag: Option<PathBuf>, default_name: &str) -> PathBuf {
    flag.unwrap_or_else(|| {
        let dir = std::env::var("QFID_OUTPUT_DIR").unwrap_or_else(|_| ".".to_string());
        PathBuf::from(dir).join(default_name)
    })
}

fn exit_code_for(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<qfid::Error>() {
        Some(qfid::Error::RequiresTracePreserving) | Some(qfid::Error::NotTracePreserving(_)) => {
            EXIT_NUMERIC
        }
        _ => EXIT_CONFIG,
    }
}

fn main() {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        // a second build_global in the same process is harmless for tests
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let cfg = match Cfg::load(cli.config.as_ref()) {
        Ok(cfg) => cfg,
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(EXIT_CONFIG);
        }
    };

    let outcome = match cli.command {
        Command::Estimate(args) => cmd_estimate(args, &cfg),
        Command::Chi(args) => cmd_chi(args, &cfg),
        Command::Approx(args) => cmd_approx(args, &cfg),
        Command::Verify(args) => cmd_verify(args, &cfg),
        Command::Design(args) => cmd_design(args, &cfg),
    };

    match outcome {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(exit_code_for(&err));
        }
    }
}

fn cmd_estimate(args: EstimateArgs, cfg: &Cfg) -> Result<i32> {
    let started = Instant::now();
    let channel_spec = cfg
        .string(args.channel, "channel")
        .ok_or_else(|| anyhow!("--channel is required (flag or config)"))?;
    let d = cfg.usize(args.dim, "dim").unwrap_or(2);
    let protocol_name = cfg
        .string(args.protocol, "protocol")
        .unwrap_or_else(|| "design-exact".to_string());
    let seed = cfg.u64(args.seed, "seed").unwrap_or(DEFAULT_SEED);
    let opts = ProtocolOptions {
        design_kind: cfg
            .string(args.design, "design")
            .unwrap_or_else(|| "sic".to_string()),
        design_a: cfg.string(args.design_a, "design_a"),
        design_b: cfg.string(args.design_b, "design_b"),
        settings: cfg.usize(args.settings, "settings"),
        shots: cfg.u64(args.shots, "shots").unwrap_or(1000),
        seed,
    };

    let channel = parse_channel(&channel_spec, d, seed)?;
    if !channel.is_trace_preserving() {
        return Err(qfid::Error::RequiresTracePreserving.into());
    }
    let name = ProtocolName::parse(&protocol_name)?;
    let (triple, protocol_label) = if name == ProtocolName::Superop {
        (superop_triple_exact(&channel)?, "superop:exact".to_string())
    } else {
        let protocol = build_protocol(name, d, &opts)?;
        let label = protocol.describe();
        (qfid::estimators::estimate_triple(&channel, &protocol)?, label)
    };

    let f_avg_exact = channel.average_fidelity_exact().ok();
    let mut report = EstimationReport::from_triple(
        &channel_spec,
        &protocol_label,
        d,
        seed,
        triple,
        f_avg_exact,
    );
    report.config = json!({
        "channel": channel_spec,
        "dim": d,
        "protocol": protocol_name,
        "design": opts.design_kind,
        "design_a": opts.design_a,
        "design_b": opts.design_b,
        "settings": opts.settings,
        "shots": opts.shots,
        "seed": seed,
    });
    report.runtime_ms = started.elapsed().as_millis() as u64;

    let path = resolve_output(cfg.path(args.output, "output"), "estimate-report.json");
    std::fs::write(&path, serde_json::to_string_pretty(&report)?)
        .with_context(|| format!("writing {}", path.display()))?;

    println!("channel:  {channel_spec} (D={d}, dim {})", d * d);
    println!("protocol: {protocol_label}");
    println!(
        "triple:   f_AB={:.10} f_A={:.10} f_B={:.10}",
        report.triple.f_ab, report.triple.f_a, report.triple.f_b
    );
    if report.triple.se_ab > 0.0 {
        println!(
            "          se_AB={:.3e} se_A={:.3e} se_B={:.3e}",
            report.triple.se_ab, report.triple.se_a, report.triple.se_b
        );
    }
    println!("f_ent:    {:.10}", report.f_ent);
    match report.f_avg_exact {
        Some(exact) => println!("f_avg:    {:.10} (exact {exact:.10})", report.f_avg),
        None => println!("f_avg:    {:.10}", report.f_avg),
    }
    if report.out_of_range {
        println!("warning:  combined fidelity outside [0, 1] (noisy data; not clipped)");
    }
    println!("report:   {}", path.display());
    Ok(0)
}

fn cmd_chi(args: ChiArgs, cfg: &Cfg) -> Result<i32> {
    let started = Instant::now();
    let d = cfg.usize(args.dim, "dim").unwrap_or(2);
    if d != 2 {
        bail!("process-matrix protocols support D = 2 (got {d})");
    }
    let channel_spec = cfg
        .string(args.channel, "channel")
        .ok_or_else(|| anyhow!("--channel is required (flag or config)"))?;
    let seed = cfg.u64(args.seed, "seed").unwrap_or(DEFAULT_SEED);
    let mode = match cfg
        .string(args.mode, "mode")
        .unwrap_or_else(|| "exact".to_string())
        .as_str()
    {
        "exact" => Mode::Exact,
        "shots" => Mode::Shots,
        other => bail!("unknown mode `{other}` (expected exact or shots)"),
    };
    let shots = cfg.u64(args.shots, "shots").unwrap_or(1000);
    let full = cfg.bool(args.full, "full");
    let format = cfg
        .string(args.format, "format")
        .unwrap_or_else(|| "json".to_string());

    let channel = parse_channel(&channel_spec, d, seed)?;
    if !channel.is_trace_preserving() {
        return Err(qfid::Error::RequiresTracePreserving.into());
    }
    let basis = pauli_basis(1);
    let sic = StateDesign::sic(d)?;
    let protocol = ChiProtocol {
        design_a: sic.clone(),
        design_b: sic,
        mode,
        shots,
        seed,
    };

    if full {
        let (chi, clipped) = chi_full_protocol(&channel, &basis, &protocol)?;
        let path = resolve_output(
            cfg.path(args.output, "output"),
            if format == "csv" { "chi-diagonal.csv" } else { "chi-matrix.json" },
        );
        let body = match format.as_str() {
            "csv" => chi.diagonal_csv(),
            "json" => chi.to_json(),
            other => bail!("unknown format `{other}` (expected json or csv)"),
        };
        std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        println!("channel:     {channel_spec}");
        println!("elements:    {0}x{0}", basis.len());
        println!("hermiticity: {:.3e}", chi.hermiticity_residual());
        if mode == Mode::Exact {
            let direct = chi_direct(&channel, &basis)?;
            println!("max |Δ| vs direct: {:.3e}", chi.max_abs_difference(&direct));
        } else {
            println!("clipped draws: {clipped}");
        }
        println!("output:      {}", path.display());
        println!("runtime:     {} ms", started.elapsed().as_millis());
        return Ok(0);
    }

    let mu_label = cfg
        .string(args.mu, "mu")
        .ok_or_else(|| anyhow!("--mu LABEL or --full is required"))?;
    let nu_label = cfg.string(args.nu, "nu").unwrap_or_else(|| mu_label.clone());
    let mu = basis
        .index_of(&mu_label)
        .ok_or_else(|| anyhow!("unknown basis label `{mu_label}`"))?;
    let nu = basis
        .index_of(&nu_label)
        .ok_or_else(|| anyhow!("unknown basis label `{nu_label}`"))?;
    let estimate = if mu == nu {
        chi_diagonal_protocol(&channel, &basis, mu, &protocol)?
    } else {
        chi_offdiagonal_protocol(&channel, &basis, mu, nu, &protocol)?
    };
    let direct = chi_direct(&channel, &basis)?.entry(mu, nu);
    let deviation = (estimate.value - direct).norm();

    let report = json!({
        "channel": channel_spec,
        "mu": mu_label,
        "nu": nu_label,
        "mode": if mode == Mode::Exact { "exact" } else { "shots" },
        "value": [estimate.value.re, estimate.value.im],
        "direct": [direct.re, direct.im],
        "deviation": deviation,
        "clipped_draws": estimate.clipped_draws,
        "seed": seed,
        "runtime_ms": started.elapsed().as_millis() as u64,
    });
    let path = resolve_output(cfg.path(args.output, "output"), "chi-element.json");
    std::fs::write(&path, serde_json::to_string_pretty(&report)?)
        .with_context(|| format!("writing {}", path.display()))?;
    println!(
        "chi[{mu_label};{nu_label}] = {:.10} {:+.10}i",
        estimate.value.re, estimate.value.im
    );
    println!("direct reference: {:.10} {:+.10}i (|Δ| = {deviation:.3e})", direct.re, direct.im);
    println!("report: {}", path.display());
    Ok(0)
}

fn cmd_approx(args: ApproxArgs, cfg: &Cfg) -> Result<i32> {
    let d = cfg.usize(args.dim, "dim").unwrap_or(2);
    let seed = cfg.u64(args.seed, "seed").unwrap_or(DEFAULT_SEED);
    // surface the missing-fiducial error before parsing ranges
    StateDesign::sic(d)?;
    let (m_lo, m_hi) = match cfg.string(args.m, "m") {
        Some(text) => parse_m_range(&text, d)?,
        None => (2, d * d),
    };
    let subset_seed = cfg.u64(args.subset_seed, "subset_seed");
    let channel = match cfg.string(args.channel, "channel") {
        Some(spec) => Some(parse_channel(&spec, d, seed)?),
        None => None,
    };

    let mut rows = Vec::new();
    let mut violation: Option<String> = None;
    for m in m_lo..=m_hi {
        let plan = match subset_seed {
            Some(s) => qfid::approx::SubsetPlan::random_subset(d, m, s)?,
            None => qfid::approx::SubsetPlan::prefix(d, m)?,
        };
        let report = qfid::approx::hs_error_report(&plan, channel.as_ref())?;
        let margin = report.bound - report.hs_error;
        if m < d * d && (report.hs_error <= 0.0 || report.hs_error >= report.bound) {
            violation = Some(format!(
                "M={m}: error {:.6e} outside (0, {:.6e})",
                report.hs_error, report.bound
            ));
        }
        if m == d * d && report.hs_error.abs() > 1e-12 {
            violation = Some(format!(
                "M=D²: error {:.3e} not zero within 1e-12",
                report.hs_error
            ));
        }
        rows.push((report, margin));
    }

    let mut csv = String::from(if channel.is_some() {
        "D,M,hs_norm,hs_error,bound,margin,exact_f_avg,approx_f_avg\n"
    } else {
        "D,M,hs_norm,hs_error,bound,margin\n"
    });
    for (r, margin) in &rows {
        match (r.exact_f_avg, r.approx_f_avg) {
            (Some(exact), Some(approx)) => csv.push_str(&format!(
                "{},{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
                r.d, r.m, r.hs_norm_delta, r.hs_error, r.bound, margin, exact, approx
            )),
            _ => csv.push_str(&format!(
                "{},{},{:.12e},{:.12e},{:.12e},{:.12e}\n",
                r.d, r.m, r.hs_norm_delta, r.hs_error, r.bound, margin
            )),
        }
    }
    let path = resolve_output(cfg.path(args.output, "output"), "approx-sweep.csv");
    std::fs::write(&path, &csv).with_context(|| format!("writing {}", path.display()))?;
    print!("{csv}");
    println!("sweep: {}", path.display());

    if let Some(msg) = violation {
        eprintln!("bound violation: {msg}");
        return Ok(EXIT_BOUND);
    }
    Ok(0)
}

fn cmd_verify(args: VerifyArgs, cfg: &Cfg) -> Result<i32> {
    let dims = if args.dim.is_empty() {
        cfg.0
            .get("dims")
            .and_then(Value::as_array)
            .map(|a| {
                a.iter()
                    .filter_map(Value::as_u64)
                    .map(|v| v as usize)
                    .collect()
            })
            .unwrap_or_else(|| vec![2, 3])
    } else {
        args.dim
    };
    let opts = verify::SuiteOptions {
        dims,
        include_appendix: cfg.bool(args.include_appendix, "include_appendix"),
        haar_samples: cfg.usize(args.haar_samples, "haar_samples").unwrap_or(100_000),
        seed: cfg.u64(args.seed, "seed").unwrap_or(DEFAULT_SEED),
    };
    let started = Instant::now();
    let results = verify::run_suite(&opts);
    let mut failures = Vec::new();
    for r in &results {
        let status = if r.pass { "PASS" } else { "FAIL" };
        println!(
            "[{status}] {} (deviation {:.3e}, tolerance {:.0e})",
            r.name, r.deviation, r.tolerance
        );
        if !r.pass {
            failures.push(r.name.clone());
        }
    }
    println!(
        "{} checks in {:.2}s",
        results.len(),
        started.elapsed().as_secs_f64()
    );
    if failures.is_empty() {
        Ok(0)
    } else {
        eprintln!("failed identities: {}", failures.join(", "));
        Ok(EXIT_IDENTITY)
    }
}

fn cmd_design(args: DesignArgs, cfg: &Cfg) -> Result<i32> {
    if let Some(input) = cfg.path(args.input, "input") {
        let text = std::fs::read_to_string(&input)
            .with_context(|| format!("reading {}", input.display()))?;
        let design = StateDesign::from_json(&text)?;
        let report = design.verify();
        println!(
            "design: dim {}, {} states, kind {:?}",
            design.dim(),
            design.len(),
            design.kind()
        );
        println!(
            "2-design check: {} (max deviation {:.3e})",
            if report.pass { "PASS" } else { "FAIL" },
            report.max_deviation
        );
        return Ok(if report.pass { 0 } else { EXIT_IDENTITY });
    }

    let kind = cfg
        .string(args.kind, "kind")
        .ok_or_else(|| anyhow!("--kind sic|mub is required for export"))?;
    let d = cfg
        .usize(args.dim, "dim")
        .ok_or_else(|| anyhow!("--dim is required for export"))?;
    let design = match kind.as_str() {
        "sic" => StateDesign::sic(d)?,
        "mub" => StateDesign::mub(d)?,
        other => bail!("unknown design kind `{other}` (expected sic or mub)"),
    };
    let path = resolve_output(cfg.path(args.output, "output"), "design.json");
    std::fs::write(&path, design.to_json())
        .with_context(|| format!("writing {}", path.display()))?;
    println!(
        "exported {} design (dim {}, {} states) to {}",
        kind,
        d,
        design.len(),
        path.display()
    );
    Ok(0)
}
