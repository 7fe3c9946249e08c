//! `outage-lab` command-line front end.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid input, 3 verification
//! failure, 4 computation budget exceeded.

mod spec;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use outage_lab::constellation::{awgn_mutual_information, Constellation, ConstellationKind};
use outage_lab::exponents::{
    oracle_exponent, oracle_exponent_rotated, outage_exponent_thm1, outage_exponent_thm2, staircase, ExponentError,
    ExponentQuery,
};
use outage_lab::mi_table::{build_mi_table, DEFAULT_NOISE_DRAWS, DEFAULT_POINTS, DEFAULT_SNR_MAX, DEFAULT_SNR_MIN};
use outage_lab::rotation::{build_rotation, verify_full_diversity, Matrix, RotationError, RotationFamily};
use outage_lab::sim::{estimate_outage, estimates_csv, fit_slope, MiModel, SweepRow, SweepTable};
use serde_json::json;

use spec::{read_json, ExperimentSpec, SweepSpec};

#[derive(Parser)]
#[command(name = "outage-lab", version, about = "Outage exponents and outage simulation for block-fading channels")]
struct Cli {
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true, env = "OUTAGE_LAB_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Mutual information of a constellation over AWGN.
    Mi(MiArgs),
    /// Closed-form outage exponent, optionally checked against the LP oracle.
    Exponent(ExponentArgs),
    /// Runs one experiment spec.
    Simulate { spec: PathBuf },
    /// Runs a list of experiments.
    Sweep { spec: PathBuf },
    /// Exhaustive full-diversity check of a rotation.
    RotationVerify(RotationArgs),
}

#[derive(Args)]
struct MiArgs {
    #[arg(long)]
    kind: ConstellationKind,
    /// Bits per symbol.
    #[arg(long = "M")]
    bits: u32,
    /// Linear SNR values.
    #[arg(long = "s", value_delimiter = ',', num_args = 1.., required_unless_present = "table")]
    s: Vec<f64>,
    /// Build an interpolation table instead of point values.
    #[arg(long)]
    table: bool,
    #[arg(long, requires = "table")]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_POINTS)]
    points: usize,
    #[arg(long, default_value_t = DEFAULT_NOISE_DRAWS)]
    n_noise: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ExponentArgs {
    #[arg(long = "B")]
    b: u32,
    #[arg(long, default_value_t = 1)]
    m: u32,
    #[arg(long = "R")]
    rate: f64,
    #[arg(long = "M")]
    bits: u32,
    #[arg(long = "de")]
    d_e: f64,
    /// Peak exponent; `inf` for none.
    #[arg(long = "dpeak", default_value = "inf")]
    d_peak: f64,
    #[arg(long = "N", default_value_t = 1)]
    n_rot: u32,
    #[arg(long)]
    oracle: bool,
    /// Comma-separated R/M values; prints a CSV staircase.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    staircase: Option<Vec<f64>>,
}

#[derive(Args)]
struct RotationArgs {
    #[arg(long = "N", required_unless_present = "matrix")]
    n: Option<usize>,
    #[arg(long, default_value = "cyclotomic")]
    family: RotationFamily,
    /// JSON matrix file; overrides `--family`.
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[arg(long, default_value = "psk")]
    kind: ConstellationKind,
    #[arg(long = "M", default_value_t = 1)]
    bits: u32,
}

enum Failure {
    Io(anyhow::Error),
    Input(anyhow::Error),
    Verification(String),
    Budget(anyhow::Error),
}

type CmdResult = Result<(), Failure>;

/// Sorts library errors into exit classes.
fn classify(e: anyhow::Error) -> Failure {
    let budget = e.chain().any(|c| {
        matches!(c.downcast_ref::<RotationError>(), Some(RotationError::BudgetExceeded { .. }))
            || matches!(c.downcast_ref::<ExponentError>(), Some(ExponentError::BudgetExceeded { .. }))
    });
    if budget {
        Failure::Budget(e)
    } else {
        Failure::Input(e)
    }
}

fn input<T, E: Into<anyhow::Error>>(r: Result<T, E>) -> Result<T, Failure> {
    r.map_err(|e| classify(e.into()))
}

fn write_file(path: &Path, contents: &str) -> CmdResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).map_err(Failure::Io)?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display())).map_err(Failure::Io)
}

fn cmd_mi(a: MiArgs) -> CmdResult {
    let c = input(Constellation::build(a.kind, a.bits))?;
    if a.table {
        let t = input(build_mi_table(&c, DEFAULT_SNR_MIN, DEFAULT_SNR_MAX, a.points, a.n_noise, a.seed))?;
        match a.out {
            Some(path) => write_file(&path, &t.to_json())?,
            None => println!("{}", t.to_json()),
        }
        return Ok(());
    }
    if let Some(bad) = a.s.iter().find(|s| s.is_nan() || **s < 0.0) {
        return Err(Failure::Input(anyhow!("SNR values must be ≥ 0, got {bad}")));
    }
    println!("s,mi,std_error");
    for s in a.s {
        let e = awgn_mutual_information(&c, s, a.n_noise, a.seed);
        println!("{s},{},{}", e.value, e.std_error);
    }
    Ok(())
}

fn cmd_exponent(a: ExponentArgs) -> CmdResult {
    let q = ExponentQuery::new(a.b, a.m, a.rate, a.bits, a.d_e, a.d_peak).with_rotation(a.n_rot);
    if let Some(ratios) = a.staircase {
        let rows = input(staircase(&q, &ratios))?;
        println!("r_over_m,d,at_breakpoint");
        for r in rows {
            println!("{},{},{}", r.r_over_m, r.d, r.at_breakpoint);
        }
        return Ok(());
    }
    let res = input(if a.n_rot > 1 { outage_exponent_thm2(&q) } else { outage_exponent_thm1(&q) })?;
    let mut out = serde_json::to_value(&res).map_err(|e| Failure::Io(e.into()))?;
    let mut disagreement = None;
    if a.oracle {
        let o = input(if a.n_rot > 1 { oracle_exponent_rotated(&q) } else { oracle_exponent(&q) })?;
        let agrees = o.d.approx_eq(res.d, 1e-9);
        out["oracle"] = json!({ "d": o.d, "agrees": agrees });
        if !agrees {
            disagreement = Some(format!("closed form {} vs oracle {}", res.d, o.d));
        }
    }
    println!("{}", serde_json::to_string_pretty(&out).expect("serializable"));
    disagreement.map_or(Ok(()), |m| Err(Failure::Verification(m)))
}

fn run_experiment(label: &str, s: &ExperimentSpec, cache: &mut HashMap<String, MiModel>) -> Result<SweepRow, Failure> {
    let cfg = input(s.to_config())?;
    let key = format!("{:?}|{:?}|{:?}", s.mi_table, cfg.constellation, cfg.rotation);
    let model = match cache.get(&key) {
        Some(m) => m.clone(),
        None => {
            let m = input(s.mi_model(&cfg))?;
            cache.insert(key, m.clone());
            m
        }
    };
    let estimates = input(estimate_outage(&cfg, &model))?;
    if let Some(path) = &s.output.estimates_csv {
        write_file(path, &estimates_csv(&estimates))?;
    }
    let fit = fit_slope(&estimates, cfg.min_events);
    Ok(SweepRow { label: label.to_string(), estimates: Ok(estimates), fit, theory: cfg.theory_exponent().ok() })
}

fn cmd_simulate(path: &Path) -> CmdResult {
    let s: ExperimentSpec = input(read_json(path))?;
    let row = run_experiment("experiment", &s, &mut HashMap::new())?;
    let table = SweepTable { rows: vec![row] };
    if s.output.estimates_csv.is_none() {
        print!("{}", table.estimates_csv());
    }
    match &s.output.summary_csv {
        Some(p) => write_file(p, &table.summary_csv()),
        None => {
            eprint!("{}", table.summary_csv());
            Ok(())
        }
    }
}

fn cmd_sweep(path: &Path) -> CmdResult {
    let s: SweepSpec = input(read_json(path))?;
    let mut cache = HashMap::new();
    let mut rows = Vec::with_capacity(s.experiments.len());
    for e in &s.experiments {
        let row = match run_experiment(&e.label, &e.spec, &mut cache) {
            Ok(r) => r,
            Err(Failure::Input(err) | Failure::Budget(err)) => {
                let msg = outage_lab::sim::SimError::Config(format!("{err:#}"));
                SweepRow { label: e.label.clone(), estimates: Err(msg.clone()), fit: Err(msg), theory: None }
            }
            Err(other) => return Err(other),
        };
        rows.push(row);
    }
    let table = SweepTable { rows };
    if let Some(p) = &s.output.estimates_csv {
        write_file(p, &table.estimates_csv())?;
    }
    match &s.output.summary_csv {
        Some(p) => write_file(p, &table.summary_csv()),
        None => {
            print!("{}", table.summary_csv());
            Ok(())
        }
    }
}

fn cmd_rotation_verify(a: RotationArgs) -> CmdResult {
    let u = match &a.matrix {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()));
            input(Matrix::from_json(&input(text)?))?
        }
        None => input(build_rotation(a.family, a.n.expect("clap enforces --N")))?,
    };
    if let Some(n) = a.n.filter(|&n| n != u.dim()) {
        return Err(Failure::Input(anyhow!("--N {n} does not match the {}×{} matrix", u.dim(), u.dim())));
    }
    let c = input(Constellation::build(a.kind, a.bits))?;
    let report = input(verify_full_diversity(&u, &c))?;
    println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
    if report.ok {
        Ok(())
    } else {
        Err(Failure::Verification("rotation is not full-diversity".into()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.cmd {
        Cmd::Mi(a) => cmd_mi(a),
        Cmd::Exponent(a) => cmd_exponent(a),
        Cmd::Simulate { spec } => cmd_simulate(&spec),
        Cmd::Sweep { spec } => cmd_sweep(&spec),
        Cmd::RotationVerify(a) => cmd_rotation_verify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Io(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Verification(m)) => {
            eprintln!("verification failed: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Budget(e)) => {
            eprintln!("budget exceeded: {e:#}");
            ExitCode::from(4)
        }
    }
}
