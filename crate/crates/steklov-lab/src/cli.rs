//! Command-line front end. Exit codes: 0 success / property holds, 1 property
//! fails, 2 configuration error, 3 numerical error (stage printed on stderr).

use crate::asymptotics::{eigenvalue_asymptote, Branch};
use crate::compare::{exponential_rate_fit, measure_epsilon, spectra_close};
use crate::config::{RunConfig, Subcommand};
use crate::dnmap::steklov_spectrum;
use crate::error::{LabError, Result};
use crate::geometry::potential_from_factor;
use crate::io::{write_csv, write_json, write_kernel, CsvCell};
use crate::muntz::{muntz_sequence, muntz_table};
use crate::stability::{run_calderon_stability, run_steklov_stability, Mode};
use crate::transform::solve_kernel;
use clap::Parser;
use serde_json::json;
use std::ffi::OsString;
use std::path::PathBuf;

pub const THREADS_ENV: &str = "STEKLOV_LAB_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "steklov-lab",
    version,
    about = "Steklov spectra of warped-product hollow spheres"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides output.dir).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long = "m-max", global = true)]
    pub m_max: Option<u32>,
    /// Worker threads; STEKLOV_LAB_THREADS takes precedence.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Also write JSON records.
    #[arg(long, global = true)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, clap::Subcommand)]
pub enum Command {
    /// Steklov spectrum of the configured factor.
    Spectrum,
    /// Closeness of the spectra of factor and factor_tilde.
    Compare,
    /// Stability chain over the configured δ-family.
    Stability,
    /// Transformation-operator kernel dump.
    Kernel,
    /// Müntz exponents, Blaschke index and coefficient row sums.
    MuntzTable,
}

impl From<Command> for Subcommand {
    fn from(c: Command) -> Self {
        match c {
            Command::Spectrum => Subcommand::Spectrum,
            Command::Compare => Subcommand::Compare,
            Command::Stability => Subcommand::Stability,
            Command::Kernel => Subcommand::Kernel,
            Command::MuntzTable => Subcommand::MuntzTable,
        }
    }
}

fn exit_code(r: Result<bool>) -> i32 {
    match r {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e @ LabError::Config(_)) => {
            eprintln!("{e}");
            2
        }
        Err(e) => {
            eprintln!("error in stage {}: {e}", e.stage());
            3
        }
    }
}

/// Parses arguments, builds the config and runs the subcommand.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let sub = Subcommand::from(cli.command);
    let cfg = match build_config(&cli, sub) {
        Ok(c) => c,
        Err(e) => return exit_code(Err(e)),
    };
    configure_threads(cli.threads);
    run(&cfg, sub)
}

fn build_config(cli: &Cli, sub: Subcommand) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.subcommand = Some(sub);
    if let Some(d) = &cli.out {
        cfg.output.dir = d.clone();
    }
    if let Some(m) = cli.m_max {
        cfg.m_max = m;
    }
    if cli.json {
        cfg.output.json = true;
    }
    cfg.validate(sub)?;
    Ok(cfg)
}

fn configure_threads(flag: Option<usize>) {
    let env = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok());
    if let Some(t) = env.or(flag) {
        #[cfg(feature = "parallel")]
        {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build_global();
        }
        #[cfg(not(feature = "parallel"))]
        let _ = t;
    }
}

pub fn run(cfg: &RunConfig, sub: Subcommand) -> i32 {
    match sub {
        Subcommand::Spectrum => cmd_spectrum(cfg),
        Subcommand::Compare => cmd_compare(cfg),
        Subcommand::Stability => cmd_stability(cfg),
        Subcommand::Kernel => cmd_kernel(cfg),
        Subcommand::MuntzTable => cmd_muntz_table(cfg),
    }
}

pub fn cmd_spectrum(cfg: &RunConfig) -> i32 {
    exit_code(spectrum(cfg))
}

pub fn cmd_compare(cfg: &RunConfig) -> i32 {
    exit_code(compare(cfg))
}

pub fn cmd_stability(cfg: &RunConfig) -> i32 {
    exit_code(stability(cfg))
}

pub fn cmd_kernel(cfg: &RunConfig) -> i32 {
    exit_code(kernel(cfg))
}

pub fn cmd_muntz_table(cfg: &RunConfig) -> i32 {
    exit_code(muntz(cfg))
}

fn spectrum(cfg: &RunConfig) -> Result<bool> {
    cfg.validate(Subcommand::Spectrum)?;
    let hash = cfg.hash();
    let f = cfg.base_factor()?;
    let s = steklov_spectrum(&f, cfg.n, cfg.omega, cfg.m_max)?;
    let rows: Vec<Vec<String>> = s
        .rows
        .iter()
        .map(|r| {
            vec![
                r.m.cell(),
                r.kappa.cell(),
                r.multiplicity.cell(),
                r.lambda_minus.cell(),
                r.lambda_plus.cell(),
            ]
        })
        .collect();
    let meta =
        json!({ "n": cfg.n, "omega": cfg.omega, "factor": s.factor_tag, "m_max": cfg.m_max });
    let dir = &cfg.output.dir;
    write_csv(
        &dir.join("spectrum.csv"),
        &hash,
        "spectrum",
        meta,
        &["m", "kappa", "multiplicity", "lambda_minus", "lambda_plus"],
        &rows,
    )?;
    if cfg.output.json {
        write_json(&dir.join("spectrum.json"), &hash, "spectrum", &s)?;
    }
    println!(
        "spectrum: n = {}, omega = {}, {} blocks, factor {}",
        cfg.n,
        cfg.omega,
        s.rows.len(),
        s.factor_tag
    );
    for r in s.rows.iter().take(5) {
        println!(
            "  m = {:3}  lambda- = {:.12e}  lambda+ = {:.12e}",
            r.m, r.lambda_minus, r.lambda_plus
        );
    }
    for r in s.rows.iter().rev().take(3).rev() {
        let am = eigenvalue_asymptote(&f, cfg.n, r.m, Branch::Minus);
        let ap = eigenvalue_asymptote(&f, cfg.n, r.m, Branch::Plus);
        println!(
            "  m = {:3}  asymptote residuals  {:.3e}  {:.3e}",
            r.m,
            (r.lambda_minus - am).abs(),
            (r.lambda_plus - ap).abs()
        );
    }
    Ok(true)
}

/// ε used when the config gives none.
pub const DEFAULT_COMPARE_EPS: f64 = 1e-8;

fn compare(cfg: &RunConfig) -> Result<bool> {
    cfg.validate(Subcommand::Compare)?;
    let hash = cfg.hash();
    let f = cfg.base_factor()?;
    let ft = cfg
        .tilde_factor()?
        .ok_or_else(|| LabError::Config("compare needs factor_tilde".into()))?;
    let s = steklov_spectrum(&f, cfg.n, cfg.omega, cfg.m_max)?;
    let st = steklov_spectrum(&ft, cfg.n, cfg.omega, cfg.m_max)?;
    let eps = cfg.tolerances.eps.unwrap_or(DEFAULT_COMPARE_EPS);
    let report = spectra_close(&s, &st, &[eps]);
    let measured = measure_epsilon(&s, &st);
    // λ⁻ carries the local-uniqueness rate; λ⁺ is reported when its gaps decay too
    let (fit, fit_plus) = match cfg.compare.rate_range {
        Some(range) => (
            Some(exponential_rate_fit(&s, &st, Branch::Minus, range)?),
            exponential_rate_fit(&s, &st, Branch::Plus, range).ok(),
        ),
        None => (None, None),
    };
    let dir = &cfg.output.dir;
    let rows: Vec<Vec<String>> = report
        .forward
        .iter()
        .map(|r| {
            let b = if r.branch == Branch::Plus {
                "plus"
            } else {
                "minus"
            };
            vec![
                r.m.cell(),
                b.cell(),
                r.value.cell(),
                r.matched_value.cell(),
                r.gap.cell(),
                r.cardinality_ok.cell(),
            ]
        })
        .collect();
    let meta = json!({ "n": cfg.n, "omega": cfg.omega, "eps": eps, "measured_eps": measured, "holds": report.holds });
    write_csv(
        &dir.join("compare.csv"),
        &hash,
        "compare",
        meta,
        &[
            "m",
            "branch",
            "value",
            "matched_value",
            "gap",
            "cardinality_ok",
        ],
        &rows,
    )?;
    write_json(
        &dir.join("compare.json"),
        &hash,
        "compare",
        &json!({ "eps": eps, "measured_eps": measured, "report": report, "rate_fit": fit, "rate_fit_plus": fit_plus }),
    )?;
    println!(
        "compare: holds = {} at eps = {eps:e}; smallest eps = {measured:e}; max gap {:e}",
        report.holds,
        report.max_gap()
    );
    if let Some(fit) = &fit {
        println!("  lambda- rate {:.4}  r^2 {:.4}", fit.rate, fit.r_squared);
    }
    if let Some(fit) = &fit_plus {
        println!("  lambda+ rate {:.4}  r^2 {:.4}", fit.rate, fit.r_squared);
    }
    Ok(report.holds)
}

fn stability(cfg: &RunConfig) -> Result<bool> {
    cfg.validate(Subcommand::Stability)?;
    let hash = cfg.hash();
    let f = cfg.base_factor()?;
    let opts = cfg.stability_options();
    let dir = &cfg.output.dir;
    let mut rows = Vec::new();
    let mut all_ok = true;
    for (i, &delta) in cfg.stability.deltas.iter().enumerate() {
        let ft = cfg.family_member(delta)?;
        let rec = match cfg.stability.mode {
            Mode::Steklov => run_steklov_stability(&f, &ft, cfg.n, cfg.omega, &opts),
            Mode::Calderon => run_calderon_stability(&f, &ft, cfg.n, cfg.omega, &opts),
        };
        match rec {
            Ok(r) => {
                let ok = r.all_passed();
                all_ok &= ok;
                let failed: Vec<&str> = r
                    .assertions
                    .iter()
                    .filter(|a| !a.1)
                    .map(|a| a.0.as_str())
                    .collect();
                println!(
                    "delta = {delta:e}: eps = {:.4e}  q_gap_L2 bound = {:.4e}  true = {:.4e}  bound_product = {:.4e}{}",
                    r.eps,
                    r.q_gap_l2,
                    r.q_gap_l2_true,
                    r.bound_product,
                    if ok { String::new() } else { format!("  FAILED {failed:?}") }
                );
                rows.push(vec![
                    delta.cell(),
                    r.eps.cell(),
                    r.q_gap_l2.cell(),
                    r.bound_product.cell(),
                    r.f_gap_sup.cell(),
                    r.q_gap_l2_true.cell(),
                    ok.cell(),
                ]);
                write_json(
                    &dir.join(format!("stability_{i:02}.json")),
                    &hash,
                    "stability-record",
                    &json!({ "delta": delta, "record": r }),
                )?;
            }
            Err(LabError::Diverging(msg)) => {
                all_ok = false;
                println!("delta = {delta:e}: diverging operator-norm difference ({msg})");
                let nan = f64::NAN.cell();
                rows.push(vec![
                    delta.cell(),
                    nan.clone(),
                    nan.clone(),
                    nan.clone(),
                    nan.clone(),
                    nan,
                    false.cell(),
                ]);
                write_json(
                    &dir.join(format!("stability_{i:02}.json")),
                    &hash,
                    "stability-diagnostic",
                    &json!({ "delta": delta, "diverging": msg }),
                )?;
            }
            Err(e) => return Err(e),
        }
    }
    let meta = json!({ "n": cfg.n, "omega": cfg.omega, "mode": cfg.stability.mode, "family": cfg.stability.family });
    write_csv(
        &dir.join("stability.csv"),
        &hash,
        "stability",
        meta,
        &[
            "delta",
            "eps",
            "q_gap_L2",
            "bound_product",
            "f_gap_sup",
            "q_gap_L2_true",
            "assertions_ok",
        ],
        &rows,
    )?;
    Ok(all_ok)
}

fn kernel(cfg: &RunConfig) -> Result<bool> {
    cfg.validate(Subcommand::Kernel)?;
    let hash = cfg.hash();
    let f = cfg.base_factor()?;
    let q = potential_from_factor(&f, cfg.n, cfg.omega)?;
    let kg = solve_kernel(&q, cfg.kernel.grid, cfg.tolerances.kernel)?;
    let h = write_kernel(&cfg.output.dir, "kernel", &hash, &kg)?;
    println!(
        "kernel: grid {} ({} values), {} sweeps, diagonal error {:.3e}, bound excess {:.3e}",
        h.grid_n, h.values, h.iterations, h.diagonal_error, h.bound_excess
    );
    Ok(kg.bound_excess <= 0.0 && kg.diagonal_error <= 1e-6)
}

fn muntz(cfg: &RunConfig) -> Result<bool> {
    cfg.validate(Subcommand::MuntzTable)?;
    let hash = cfg.hash();
    let sys = muntz_sequence(cfg.n, cfg.muntz.m0, cfg.m_max)?;
    let rows: Vec<Vec<String>> = muntz_table(&sys)
        .iter()
        .map(|r| vec![r.0.cell(), r.1.cell(), r.2.cell(), r.3.cell(), r.4.cell()])
        .collect();
    let meta = json!({ "n": cfg.n, "m0": cfg.muntz.m0, "alpha": sys.alpha });
    write_csv(
        &cfg.output.dir.join("muntz.csv"),
        &hash,
        "muntz-table",
        meta,
        &["k", "lambda", "gap", "eps2", "row_log_sum"],
        &rows,
    )?;
    println!(
        "muntz-table: {} exponents, alpha = {:.6}",
        sys.len(),
        sys.alpha
    );
    Ok(true)
}
