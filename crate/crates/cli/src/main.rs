use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use selfbh_core::constraints::ConstraintReport;
use selfbh_core::experiment::{emit_csv, fmt_sig, run_sweep, RowStatus, SweepSpec};
use selfbh_core::zf::{empirical_sinr_check, normalization_check, wishart_trace_check, ZfMode};
use selfbh_core::{baseline, optimize, Error, OptimizerOptions, PowerAllocation, RateBreakdown, Scheme, SystemParams};

#[derive(Parser)]
#[command(name = "selfbh", version, about = "Sum-rate analysis of a self-backhauling full-duplex access node")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Maximize the sum-rate of one scheme for a parameter file.
    Optimize {
        #[arg(long)]
        scheme: Scheme,
        /// Parameter file; every key is required.
        #[arg(long)]
        config: PathBuf,
        /// Also evaluate the max-power baseline.
        #[arg(long)]
        baseline: bool,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        starts: usize,
    },
    /// Run a sweep spec and write its rows as CSV.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte-Carlo checks of the ZF precoder and the SINR approximations.
    ValidateZf {
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Optimize { scheme, config, baseline, seed, starts } => {
            cmd_optimize(scheme, &config, baseline, seed, starts)
        }
        Command::Sweep { spec, out } => cmd_sweep(&spec, &out),
        Command::ValidateZf { trials, seed, out } => cmd_validate(trials, seed, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Error>() {
                Some(Error::Infeasible { .. }) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn print_rates(label: &str, r: &RateBreakdown) {
    println!("{label}");
    println!("  c_s    {:>12}", fmt_sig(r.c_s));
    println!("  c_d    {:>12}   c_bh_d {:>12}", fmt_sig(r.c_d), fmt_sig(r.c_bh_d));
    println!("  c_u    {:>12}   c_bh_u {:>12}", fmt_sig(r.c_u), fmt_sig(r.c_bh_u));
    println!("  c_ic   {:>12}", fmt_sig(r.c_ic));
}

fn print_alloc(a: &PowerAllocation) {
    println!(
        "  powers (mW): p_d={} p_u={} p_bh_d={} p_bh_u={} p_u_d2d={}  eta={}",
        fmt_sig(a.p_d),
        fmt_sig(a.p_u),
        fmt_sig(a.p_bh_d),
        fmt_sig(a.p_bh_u),
        fmt_sig(a.p_u_d2d),
        fmt_sig(a.eta)
    );
}

fn print_report(r: &ConstraintReport) {
    let cells: Vec<String> = r.values.iter().map(|(l, v)| format!("{l}={}", fmt_sig(*v))).collect();
    println!("  constraints: {}", cells.join(" "));
}

fn cmd_optimize(scheme: Scheme, config: &std::path::Path, with_baseline: bool, seed: u64, starts: usize) -> anyhow::Result<()> {
    let p = SystemParams::from_file(config)?;
    let opts = OptimizerOptions { n_starts: starts, rng_seed: seed, ..OptimizerOptions::default() };
    let r = optimize(scheme, &p, &opts)?;
    print_rates(&format!("{scheme} optimized (start {}, {}/{} converged)", r.best_start, r.converged_count, starts), &r.best_rates);
    print_alloc(&r.best_alloc);
    print_report(&r.best_report);
    if with_baseline {
        let b = baseline(scheme, &p)?;
        print_rates(&format!("{scheme} baseline{}", if b.clamped { " (clamped)" } else { "" }), &b.rates);
        print_alloc(&b.rates.alloc);
        print_report(&b.report);
    }
    Ok(())
}

fn cmd_sweep(spec: &std::path::Path, out: &std::path::Path) -> anyhow::Result<()> {
    let spec = SweepSpec::from_file(spec)?;
    let rows = run_sweep(&spec)?;
    emit_csv(&rows, out)?;
    let count = |st: fn(&RowStatus) -> bool| rows.iter().filter(|r| st(&r.status)).count();
    eprintln!(
        "{} rows to {} ({} skipped, {} infeasible)",
        rows.len(),
        out.display(),
        count(|s| *s == RowStatus::Skip),
        count(|s| *s == RowStatus::Infeasible)
    );
    Ok(())
}

fn cmd_validate(trials: usize, seed: u64, out: Option<&std::path::Path>) -> anyhow::Result<()> {
    let mut csv = String::from("check,empirical,closed_form,relative_error\n");
    let mut line = |name: &str, emp: f64, closed: f64, err: f64| {
        println!("{name:<28} empirical={:<14} closed={:<14} rel_err={}", fmt_sig(emp), fmt_sig(closed), fmt_sig(err));
        writeln!(csv, "{name},{},{},{}", fmt_sig(emp), fmt_sig(closed), fmt_sig(err)).unwrap();
    };

    let norm = normalization_check(40, 4, 16, &[1.0; 20], ZfMode::FdNull, trials, seed)?;
    line("zf_norm_40_4_16", norm.mean_norm2, 1.0, (norm.mean_norm2 - 1.0).abs());
    line("zf_si_null_max", norm.max_si_null, 0.0, norm.max_si_null);
    line("zf_off_diagonal_max", norm.max_off_diagonal, 0.0, norm.max_off_diagonal);

    for (n_t, m) in [(40, 20), (200, 16)] {
        let w = wishart_trace_check(n_t, m, trials, seed)?;
        line(&format!("wishart_{n_t}_{m}"), w.empirical, w.closed_form, w.relative_error);
    }

    let sinr_trials = trials.max(1000);
    for k in [1u32, 2, 4] {
        let p = SystemParams {
            n_t: 40 * k,
            n_r: 16 * k,
            d: 4 * k,
            u: 4 * k,
            m_bh_t: 2 * k,
            m_bh_r: 4 * k,
            ..SystemParams::table1()
        };
        let a = PowerAllocation { p_d: 500.0, p_u: p.p_ue_max, p_bh_d: p.p_bh_d_max, p_bh_u: 500.0, p_u_d2d: 0.0, eta: 0.5 };
        for c in empirical_sinr_check(&p, Scheme::HalfDuplex, &a, sinr_trials, seed)? {
            line(&format!("hd_sinr_{}_nt{}", c.link, p.n_t), c.check.empirical, c.check.closed_form, c.check.relative_error);
        }
    }

    if let Some(path) = out {
        std::fs::write(path, csv)?;
    }
    Ok(())
}
