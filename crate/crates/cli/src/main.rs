use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use abelian_core::experiments::adversary::{adversary_demo, BasisStrategy, HastyStrategy, Strategy};
use abelian_core::experiments::bench::{bench_scaling, write_points_csv, Family};
use abelian_core::experiments::estimate::{estimate_size_report, write_rows_csv};
use abelian_core::experiments::ground_truth::all_groups_up_to;
use abelian_core::experiments::sweep::{run_sweep, write_csv, Outcome};
use abelian_core::isomorphism::{find_basis, is_isomorphic, verify_witness, Mode};
use abelian_core::monomial::Presentation;
use abelian_core::oracle::{make_group, parse_factors, CayleyOracle, GroupOracle, Model};
use abelian_core::randomized::random_generators_detailed;
use abelian_core::snf::{build_relation_matrix, smith_normal_form, IntegerMatrix};
use abelian_core::{deterministic, Error};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

const EXIT_MISMATCH: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_RANDOMIZED: u8 = 3;

#[derive(Parser)]
#[command(name = "abelian", version, about = "Structure of black-box finite abelian groups")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Seed for the group labeling (and, unless stated otherwise, the algorithm).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Failure probability for randomized subroutines.
    #[arg(long, global = true, default_value_t = 0.01)]
    delta: f64,
    /// Oracle model: fs (size known) or ps (size hidden).
    #[arg(long, global = true, default_value = "fs", value_parser = parse_model)]
    model: Model,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Attempts after a randomized failure before giving up.
    #[arg(long, global = true, default_value_t = 3)]
    retries: u32,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Generator chain (A, K, L) of a group.
    Gen {
        #[arg(long)]
        group: String,
        #[arg(long, conflicts_with = "rand")]
        det: bool,
        #[arg(long)]
        rand: bool,
    },
    /// Basis and invariant factors of a group.
    Basis {
        #[arg(long)]
        group: String,
        #[arg(long, default_value = "det", value_parser = parse_mode)]
        mode: Mode,
    },
    /// Isomorphism test between two groups.
    Iso {
        #[arg(long)]
        g: String,
        #[arg(long)]
        h: String,
        #[arg(long, default_value_t = 1)]
        seed_g: u64,
        #[arg(long, default_value_t = 2)]
        seed_h: u64,
        #[arg(long, default_value = "rand", value_parser = parse_mode)]
        mode: Mode,
        /// Random pairs used to check the witness.
        #[arg(long, default_value_t = 32)]
        verify_samples: usize,
    },
    /// Smith normal form of a presentation (text) or an integer matrix (JSON).
    Snf {
        #[arg(long)]
        presentation: PathBuf,
    },
    /// Calibration of the birthday size estimator.
    EstimateSize {
        #[arg(long)]
        group: String,
        #[arg(long, default_value_t = 200)]
        trials: u32,
    },
    /// Access counts against group order for a family Z_q^m.
    Bench {
        /// z2, zp:<p> or zp2:<p>
        #[arg(long, default_value = "z2", value_parser = parse_family)]
        family: Family,
        #[arg(long, default_value_t = 10)]
        m_min: u32,
        #[arg(long, default_value_t = 22)]
        m_max: u32,
        #[arg(long, default_value_t = 20)]
        trials: u32,
        #[arg(long, default_value = "rand", value_parser = parse_mode)]
        mode: Mode,
    },
    /// Run a deterministic strategy against the D1/D2 adversary.
    Adversary {
        #[arg(long, default_value_t = 2)]
        p: u64,
        #[arg(long, default_value_t = 6)]
        m: u32,
        #[arg(long, value_enum, default_value_t = StrategyName::Basis)]
        strategy: StrategyName,
        /// Access cap after which a run is reported as inconclusive.
        #[arg(long, default_value_t = 1 << 24)]
        cap: u64,
    },
    /// Correctness sweep against ground-truth invariant factors.
    Sweep {
        /// Every abelian group of order at most this bound.
        #[arg(long, conflicts_with = "groups")]
        max_order: Option<u64>,
        /// Comma-separated group specs, e.g. 2x4,6,1.
        #[arg(long)]
        groups: Option<String>,
        /// Labelings per group, seeds seed..seed+labelings.
        #[arg(long, default_value_t = 5)]
        labelings: u64,
        #[arg(long, default_value = "det", value_parser = parse_mode)]
        mode: Mode,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StrategyName {
    Basis,
    Hasty,
}

fn parse_model(s: &str) -> Result<Model, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_family(s: &str) -> Result<Family, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Error plus the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::RandomizedFailure(_) => EXIT_RANDOMIZED,
            Error::InvalidSpec(_) | Error::Parse(_) | Error::Precondition(_) | Error::ModelViolation(_) => EXIT_USAGE,
            _ => EXIT_MISMATCH,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Error::from(e).into()
    }
}

type CliResult<T> = Result<T, Failure>;

/// Output of a command: the payload plus the exit code it implies.
struct Report {
    json: Value,
    csv: Option<Vec<u8>>,
    code: u8,
}

impl Report {
    fn ok(json: Value) -> Self {
        Report { json, csv: None, code: 0 }
    }
}

fn oracle(spec: &str, seed: u64, model: Model) -> CliResult<CayleyOracle> {
    Ok(CayleyOracle::new(make_group(&parse_factors(spec)?, seed)?.into(), model))
}

/// Runs `f` until it stops failing randomly, at most `1 + retries` times.
fn with_retries<T>(retries: u32, mut f: impl FnMut(u32) -> Result<T, Error>) -> CliResult<T> {
    let mut attempt = 0;
    loop {
        match f(attempt) {
            Err(e) if e.is_retryable() && attempt < retries => attempt += 1,
            other => return Ok(other?),
        }
    }
}

fn rng_for(seed: u64, attempt: u32) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_add((attempt as u64) << 40))
}

fn counters_json(o: &dyn GroupOracle) -> Value {
    serde_json::to_value(o.counters()).expect("counters serialize")
}

fn cmd_gen(g: &Global, group: &str, rand: bool) -> CliResult<Report> {
    let mut o = oracle(group, g.seed, g.model)?;
    let mut out = if rand {
        let r = with_retries(g.retries, |a| random_generators_detailed(&mut o, &mut rng_for(g.seed, a), g.delta))?;
        let mut v = serde_json::to_value(&r.chain).expect("chain serializes");
        if let Some(est) = r.estimate {
            v["q"] = json!(est.q);
        }
        v
    } else {
        if g.model != Model::Fs {
            return Err(Error::Precondition("--det needs --model fs".into()).into());
        }
        let (chain, _) = deterministic::generator_plus(&mut o)?;
        serde_json::to_value(&chain).expect("chain serializes")
    };
    out["counters"] = counters_json(&o);
    Ok(Report::ok(out))
}

fn cmd_basis(g: &Global, group: &str, mode: Mode) -> CliResult<Report> {
    let mut o = oracle(group, g.seed, g.model)?;
    let b = with_retries(g.retries, |a| find_basis(&mut o, &mut rng_for(g.seed, a), mode, g.delta))?;
    Ok(Report::ok(json!({
        "invariant_factors": b.orders,
        "basis": b.basis,
        "monomials": b.monomials.iter().map(|m| m.to_string()).collect::<Vec<_>>(),
        "presentation": b.presentation.to_string(),
        "A": b.chain.generators,
        "K": b.chain.exponents,
        "L": b.chain.relations,
        "counters": counters_json(&o),
    })))
}

#[allow(clippy::too_many_arguments)]
fn cmd_iso(g: &Global, gs: &str, hs: &str, seed_g: u64, seed_h: u64, mode: Mode, samples: usize) -> CliResult<Report> {
    let mut og = oracle(gs, seed_g, g.model)?;
    let mut oh = oracle(hs, seed_h, g.model)?;
    let rep = with_retries(g.retries, |a| is_isomorphic(&mut og, &mut oh, &mut rng_for(g.seed, a), mode, g.delta))?;
    let verified = rep
        .witness
        .as_ref()
        .map(|w| verify_witness(w, &mut og, &mut oh, samples, &mut rng_for(g.seed ^ 1, 0)));
    Ok(Report::ok(json!({
        "isomorphic": rep.isomorphic,
        "invariant_factors_g": rep.invariant_factors_g,
        "invariant_factors_h": rep.invariant_factors_h,
        "halted": rep.halted,
        "witness_verified": verified,
        "basis_g": rep.witness.as_ref().map(|w| w.basis_g().to_vec()),
        "basis_h": rep.witness.as_ref().map(|w| w.basis_h().to_vec()),
        "counters_g": counters_json(&og),
        "counters_h": counters_json(&oh),
    })))
}

fn cmd_snf(path: &PathBuf) -> CliResult<Report> {
    let text = fs::read_to_string(path)?;
    let (matrix, presentation) = if text.trim_start().starts_with('[') {
        let m: IntegerMatrix = serde_json::from_str(&text).map_err(Error::from)?;
        (m, None)
    } else {
        let p: Presentation = text.trim().parse()?;
        (build_relation_matrix(&p), Some(p))
    };
    let snf = smith_normal_form(&matrix);
    Ok(Report::ok(json!({
        "presentation": presentation.map(|p| p.to_string()),
        "R": matrix,
        "D": snf.d,
        "U": snf.u,
        "V": snf.v,
        "rank": snf.rank,
        "invariant_factors": snf.invariant_factors(),
    })))
}

fn cmd_estimate(g: &Global, group: &str, trials: u32) -> CliResult<Report> {
    let report = estimate_size_report(&parse_factors(group)?, trials, g.seed)?;
    let mut csv = Vec::new();
    write_rows_csv(&report, &mut csv)?;
    Ok(Report {
        json: serde_json::to_value(&report).expect("report serializes"),
        csv: Some(csv),
        code: 0,
    })
}

fn cmd_bench(g: &Global, family: Family, m_min: u32, m_max: u32, trials: u32, mode: Mode) -> CliResult<Report> {
    if m_min > m_max {
        return Err(Error::Precondition("--m-min exceeds --m-max".into()).into());
    }
    let report = bench_scaling(family, m_min..=m_max, trials, mode, g.model, g.delta)?;
    let mut csv = Vec::new();
    write_points_csv(&report, &mut csv)?;
    Ok(Report {
        json: serde_json::to_value(&report).expect("report serializes"),
        csv: Some(csv),
        code: 0,
    })
}

fn cmd_adversary(p: u64, m: u32, name: StrategyName, cap: u64) -> CliResult<Report> {
    let hasty = HastyStrategy { p, m };
    let strategy: &dyn Strategy = match name {
        StrategyName::Basis => &BasisStrategy,
        StrategyName::Hasty => &hasty,
    };
    let report = adversary_demo(p, m, strategy, cap)?;
    let mut json = serde_json::to_value(&report).expect("report serializes");
    json["lower_bound_holds"] = json!(report.lower_bound_holds());
    let code = if report.lower_bound_holds() && report.transcripts_consistent { 0 } else { EXIT_MISMATCH };
    Ok(Report { json, csv: None, code })
}

fn cmd_sweep(g: &Global, max_order: Option<u64>, groups: Option<&str>, labelings: u64, mode: Mode) -> CliResult<Report> {
    let grid: Vec<Vec<u64>> = match (max_order, groups) {
        (Some(n), _) => all_groups_up_to(n),
        (None, Some(list)) => list
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(parse_factors)
            .collect::<Result<_, _>>()?,
        (None, None) => Vec::new(),
    };
    let seeds: Vec<u64> = (0..labelings).map(|i| g.seed + i).collect();
    let records = run_sweep(&grid, &seeds, mode, g.model, g.delta)?;
    let count = |o: Outcome| records.iter().filter(|r| r.outcome == o).count();
    let (mismatches, failures) = (count(Outcome::Mismatch), count(Outcome::Fail));
    let mut csv = Vec::new();
    write_csv(&records, &mut csv)?;
    let code = if mismatches > 0 { EXIT_MISMATCH } else { 0 };
    Ok(Report {
        json: json!({
            "trials": records.len(),
            "mismatches": mismatches,
            "failures": failures,
            "records": records,
        }),
        csv: Some(csv),
        code,
    })
}

fn run(cli: &Cli) -> CliResult<Report> {
    let g = &cli.global;
    if !(g.delta > 0.0 && g.delta < 1.0) {
        return Err(Error::Precondition(format!("--delta {} is not in (0, 1)", g.delta)).into());
    }
    match &cli.command {
        Command::Gen { group, rand, .. } => cmd_gen(g, group, *rand),
        Command::Basis { group, mode } => cmd_basis(g, group, *mode),
        Command::Iso {
            g: gs,
            h,
            seed_g,
            seed_h,
            mode,
            verify_samples,
        } => cmd_iso(g, gs, h, *seed_g, *seed_h, *mode, *verify_samples),
        Command::Snf { presentation } => cmd_snf(presentation),
        Command::EstimateSize { group, trials } => cmd_estimate(g, group, *trials),
        Command::Bench {
            family,
            m_min,
            m_max,
            trials,
            mode,
        } => cmd_bench(g, *family, *m_min, *m_max, *trials, *mode),
        Command::Adversary { p, m, strategy, cap } => cmd_adversary(*p, *m, *strategy, *cap),
        Command::Sweep {
            max_order,
            groups,
            labelings,
            mode,
        } => cmd_sweep(g, *max_order, groups.as_deref(), *labelings, *mode),
    }
}

fn emit(g: &Global, report: &Report) -> io::Result<()> {
    let bytes = match (g.format, &report.csv) {
        (Format::Csv, Some(csv)) => csv.clone(),
        _ => {
            let mut s = serde_json::to_vec_pretty(&report.json).map_err(io::Error::other)?;
            s.push(b'\n');
            s
        }
    };
    match &g.out {
        Some(path) => fs::write(path, bytes),
        None => io::stdout().lock().write_all(&bytes),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => match emit(&cli.global, &report) {
            Ok(()) => ExitCode::from(report.code),
            Err(e) => {
                eprintln!("abelian: {e}");
                ExitCode::from(EXIT_MISMATCH)
            }
        },
        Err(f) => {
            eprintln!("abelian: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
