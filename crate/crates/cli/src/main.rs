//! Command-line front end: loads a scenario, runs one experiment, writes
//! plot-ready tables and a JSON summary.
//!
//! Exit codes: 0 success, 2 configuration error (message names the key),
//! 1 runtime failure. Progress and timing go to stderr; everything written
//! to stdout and to files is deterministic for a given configuration.

use clap::{Parser, Subcommand, ValueEnum};
use riscf_core::experiments::{
    ap_replacement_sweep, min_rate_cdf, rate_report, throughput_cdf, validation_sweep, CdfReport,
    SweepParam, SweepSpec,
};
use riscf_core::channels::rho_to_csv;
use riscf_core::experiments::TopologyRealization;
use riscf_core::scenario::{ConfigError, ScenarioBuilder};
use riscf_core::{ScenarioConfig, SeedContext};
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(
    name = "riscf",
    version,
    about = "Downlink simulator and rate calculator for surface-assisted cell-free massive MIMO"
)]
struct Cli {
    /// Scenario file (flat `key = value` document).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override a scenario key, e.g. `--override K=40`; repeatable, wins
    /// over the file.
    #[arg(long = "override", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Master seed; wins over file and overrides.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Draw count: topology draws for min-rate/throughput/ap-sweep,
    /// Monte-Carlo channel draws for validate (total per sweep point) and
    /// rate.
    #[arg(long, global = true)]
    trials: Option<usize>,

    /// Worker thread cap (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output directory (default: $RISCF_OUT or the working directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Table format: `csv` writes tables as CSV next to the JSON summary,
    /// `json` embeds everything in the summary only.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form vs Monte-Carlo rate across an AP sweep in the normalized
    /// (unit-gain) scenario.
    Validate {
        /// AP counts, e.g. `50,100,150,200` or `50..200:50`.
        #[arg(long, default_value = "50,100,150,200")]
        sweep_m: String,
    },
    /// CDF of the per-topology minimum user rate, with the no-surface
    /// baseline on the same draws.
    MinRate {
        /// Outage levels for the reported quantiles.
        #[arg(long, default_value = "0.05,0.20")]
        outage: String,
    },
    /// CDF of the per-user net throughput, with the no-surface baseline on
    /// the same draws.
    Throughput {
        #[arg(long, default_value = "0.05,0.20")]
        outage: String,
    },
    /// Sum-rate curve of the no-surface system over AP counts against fixed
    /// AP deployments enriched with surfaces.
    ApSweep {
        /// AP counts of the no-surface curve.
        #[arg(long, required = true)]
        cf_m: String,
        /// AP count of the surface deployments.
        #[arg(long, required = true)]
        ris_m: usize,
        /// Surface counts to evaluate at `--ris-m` APs.
        #[arg(long, required = true)]
        ris_s: String,
    },
    /// Closed-form and Monte-Carlo rate report for a single topology draw.
    Rate {
        /// Also write the topology, gain, and variance tables.
        #[arg(long)]
        dump_inputs: bool,
    },
}

enum CliError {
    Config(String),
    Runtime(String),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn parse_usize_list(text: &str) -> Result<Vec<usize>, CliError> {
    let bad = |t: &str| CliError::Config(format!("cannot parse value list `{t}`"));
    if let Some((range, step)) = text.split_once(':') {
        if let Some((a, b)) = range.split_once("..") {
            let a: usize = a.trim().parse().map_err(|_| bad(text))?;
            let b: usize = b.trim().parse().map_err(|_| bad(text))?;
            let step: usize = step.trim().parse().map_err(|_| bad(text))?;
            if step == 0 || b < a {
                return Err(bad(text));
            }
            return Ok((a..=b).step_by(step).collect());
        }
        return Err(bad(text));
    }
    text.split(',')
        .map(|v| v.trim().parse::<usize>().map_err(|_| bad(text)))
        .collect()
}

fn parse_prob_list(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .ok()
                .filter(|p| (0.0..=1.0).contains(p))
                .ok_or_else(|| CliError::Config(format!("invalid outage level `{v}`")))
        })
        .collect()
}

/// Defaults of the normalized validation scenario, used by `validate` for
/// keys the operator did not set.
const VALIDATION_DEFAULTS: &[(&str, &str)] = &[
    ("user_count", "40"),
    ("ris_count", "30"),
    ("elements_per_ris", "10"),
    ("area_side_km", "1"),
    ("beta_override", "1"),
    ("pilot_len_symbols", "40"),
    ("topology_draws", "20"),
];

fn build_config(cli: &Cli) -> Result<ScenarioConfig, CliError> {
    let mut builder = ScenarioBuilder::new();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read `{}`: {e}", path.display())))?;
        builder.apply_document(&text)?;
    }
    for pair in &cli.overrides {
        let Some((key, value)) = pair.split_once('=') else {
            return Err(CliError::Config(format!("override `{pair}` is not KEY=VALUE")));
        };
        builder.force(key.trim(), value.trim())?;
    }
    if let Some(seed) = cli.seed {
        builder.force("master_seed", &seed.to_string())?;
    }

    if matches!(cli.command, Command::Validate { .. }) {
        for (key, value) in VALIDATION_DEFAULTS {
            if !builder.is_set(key) {
                builder.set(key, value)?;
            }
        }
        // the swept parameter only needs a placeholder
        if !builder.is_set("ap_count") {
            builder.set("ap_count", "50")?;
        }
    }

    let mut cfg = builder.build()?;
    if let Some(trials) = cli.trials {
        if trials == 0 {
            return Err(CliError::Config("--trials must be positive".into()));
        }
        match cli.command {
            Command::Validate { .. } => {
                cfg.channel_draws_per_topology = trials.div_ceil(cfg.topology_draws);
            }
            Command::Rate { .. } => cfg.channel_draws_per_topology = trials,
            _ => cfg.topology_draws = trials,
        }
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| std::env::var_os("RISCF_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn write_output(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Runtime(format!("cannot create `{}`: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents)
        .map_err(|e| CliError::Runtime(format!("cannot write `{}`: {e}", path.display())))?;
    Ok(path)
}

fn csv_header(cfg: &ScenarioConfig) -> String {
    format!(
        "# config_hash={}\n# master_seed={}\n# tool_version={}\n",
        cfg.config_hash(),
        cfg.master_seed,
        TOOL_VERSION
    )
}

fn summary_json(experiment: &str, cfg: &ScenarioConfig, results: serde_json::Value) -> String {
    let value = json!({
        "experiment": experiment,
        "tool_version": TOOL_VERSION,
        "config_hash": cfg.config_hash(),
        "master_seed": cfg.master_seed,
        "config": cfg,
        "results": results,
    });
    serde_json::to_string_pretty(&value).expect("summary serializes")
}

fn progress_printer(label: &'static str) -> impl Fn(usize, usize) + Sync {
    move |done, total| {
        let step = (total / 20).max(1);
        if done % step == 0 || done == total {
            eprint!("\r{label}: {done}/{total}");
            if done == total {
                eprintln!();
            }
        }
    }
}

fn cdf_csv(cfg: &ScenarioConfig, report: &CdfReport) -> String {
    format!("{}{}", csv_header(cfg), report.cdf.to_csv())
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Runtime(format!("cannot configure thread pool: {e}")))?;
    }
    let cfg = build_config(&cli)?;
    let dir = out_dir(&cli);
    let hash = cfg.config_hash();
    let started = Instant::now();

    match &cli.command {
        Command::Validate { sweep_m } => {
            let values = parse_usize_list(sweep_m)?;
            let spec = SweepSpec::new(SweepParam::ApCount, values, cfg.clone())
                .map_err(CliError::Config)?;
            let progress = progress_printer("validate");
            let rows = validation_sweep(&spec, Some(&progress));

            let mut table = csv_header(&cfg);
            table.push_str("m,closed_mean,mc_mean,mc_stderr,draws\n");
            for row in &rows {
                table.push_str(&format!(
                    "{},{},{},{},{}\n",
                    row.value, row.closed_mean, row.mc_mean, row.mc_stderr, row.draws
                ));
            }
            let mut written = Vec::new();
            if cli.format == Format::Csv {
                written.push(write_output(&dir, &format!("validate_{hash}.csv"), &table)?);
            }
            let summary = summary_json("validate", &cfg, json!({ "rows": rows }));
            written.push(write_output(&dir, &format!("validate_{hash}.json"), &summary)?);

            println!("validation sweep ({} points, {} draws each)", rows.len(), rows[0].draws);
            println!("{:>6} {:>12} {:>12} {:>12}", "M", "closed", "mc", "mc_stderr");
            for row in &rows {
                println!(
                    "{:>6} {:>12.6} {:>12.6} {:>12.2e}",
                    row.value, row.closed_mean, row.mc_mean, row.mc_stderr
                );
            }
            for path in &written {
                println!("wrote {}", path.display());
            }
        }

        Command::MinRate { outage } | Command::Throughput { outage } => {
            let levels = parse_prob_list(outage)?;
            let is_min_rate = matches!(cli.command, Command::MinRate { .. });
            let (name, label) = if is_min_rate {
                ("min-rate", "min-rate over users, bits/s/Hz")
            } else {
                ("throughput", "per-user net throughput, bits/s")
            };
            let mut baseline_cfg = cfg.clone();
            baseline_cfg.ris_count = 0;
            let draws = cfg.topology_draws;
            let progress = progress_printer("cdf");
            let run_one = |c: &ScenarioConfig| {
                if is_min_rate {
                    min_rate_cdf(c, draws, &levels, Some(&progress))
                } else {
                    throughput_cdf(c, draws, &levels, Some(&progress))
                }
            };
            let with_ris = run_one(&cfg);
            let baseline = run_one(&baseline_cfg);

            let mut written = Vec::new();
            if cli.format == Format::Csv {
                written.push(write_output(&dir, &format!("{name}_{hash}.csv"), &cdf_csv(&cfg, &with_ris))?);
                written.push(write_output(
                    &dir,
                    &format!("{name}_baseline_{hash}.csv"),
                    &cdf_csv(&baseline_cfg, &baseline),
                )?);
            }
            let ratios: Vec<serde_json::Value> = with_ris
                .quantiles
                .iter()
                .zip(&baseline.quantiles)
                .map(|((p, ris), (_, cf))| json!({ "outage": p, "with_ris": ris, "baseline": cf, "ratio": ris / cf }))
                .collect();
            let summary = summary_json(
                name,
                &cfg,
                json!({
                    "statistic": label,
                    "topology_draws": draws,
                    "quantiles": ratios,
                    "with_ris": with_ris,
                    "baseline": baseline,
                }),
            );
            written.push(write_output(&dir, &format!("{name}_{hash}.json"), &summary)?);

            println!("{label} ({draws} topology draws, S = {} vs baseline)", cfg.ris_count);
            println!("{:>8} {:>14} {:>14} {:>8}", "outage", "with_ris", "baseline", "ratio");
            for ((p, ris), (_, cf)) in with_ris.quantiles.iter().zip(&baseline.quantiles) {
                println!("{:>8.2} {:>14.6e} {:>14.6e} {:>8.4}", p, ris, cf, ris / cf);
            }
            for path in &written {
                println!("wrote {}", path.display());
            }
        }

        Command::ApSweep { cf_m, ris_m, ris_s } => {
            let cf_values = parse_usize_list(cf_m)?;
            let ris_values = parse_usize_list(ris_s)?;
            let progress = progress_printer("ap-sweep");
            let report = ap_replacement_sweep(&cfg, &cf_values, *ris_m, &ris_values, Some(&progress));

            let mut table = csv_header(&cfg);
            table.push_str("kind,ap_count,ris_count,mean_sum_rate,stderr,equivalent_ap_count\n");
            for p in &report.cf_curve {
                table.push_str(&format!("cf,{},0,{},{},\n", p.ap_count, p.mean_sum_rate, p.stderr));
            }
            for c in &report.ris_configs {
                table.push_str(&format!(
                    "ris,{},{},{},{},{}\n",
                    c.ap_count,
                    c.ris_count,
                    c.mean_sum_rate,
                    c.stderr,
                    c.equivalent_ap_count.map_or(String::new(), |m| m.to_string())
                ));
            }
            let mut written = Vec::new();
            if cli.format == Format::Csv {
                written.push(write_output(&dir, &format!("ap_sweep_{hash}.csv"), &table)?);
            }
            let summary = summary_json("ap-sweep", &cfg, serde_json::to_value(&report).unwrap());
            written.push(write_output(&dir, &format!("ap_sweep_{hash}.json"), &summary)?);

            println!("sum-rate sweep ({} topology draws per point)", report.topology_draws);
            for p in &report.cf_curve {
                println!("  cf   M={:>4}          sum rate {:.4} +- {:.4}", p.ap_count, p.mean_sum_rate, p.stderr);
            }
            for c in &report.ris_configs {
                println!(
                    "  ris  M={:>4} S={:>4}   sum rate {:.4} +- {:.4}   equivalent M = {}",
                    c.ap_count,
                    c.ris_count,
                    c.mean_sum_rate,
                    c.stderr,
                    c.equivalent_ap_count.map_or("outside curve".to_string(), |m| format!("{m:.4}")),
                );
            }
            for path in &written {
                println!("wrote {}", path.display());
            }
        }

        Command::Rate { dump_inputs } => {
            let report = rate_report(&cfg);
            let mut written = Vec::new();
            if cli.format == Format::Csv {
                written.push(write_output(&dir, &format!("rate_{hash}.csv"), &report.to_csv())?);
            }
            let summary = summary_json("rate", &cfg, serde_json::to_value(&report).unwrap());
            written.push(write_output(&dir, &format!("rate_{hash}.json"), &summary)?);

            if *dump_inputs {
                let seeds = SeedContext::new(cfg.master_seed);
                let real = TopologyRealization::generate(&cfg, &seeds, 0);
                let header = csv_header(&cfg);
                written.push(write_output(
                    &dir,
                    &format!("topology_{hash}.csv"),
                    &format!("{header}{}", real.topology.to_csv()),
                )?);
                written.push(write_output(
                    &dir,
                    &format!("beta_{hash}.csv"),
                    &format!("{header}{}", real.large_scale.to_csv()),
                )?);
                written.push(write_output(
                    &dir,
                    &format!("rho_{hash}.csv"),
                    &format!("{header}{}", rho_to_csv(&real.rho)),
                )?);
            }

            println!(
                "rate report: {} APs, {} users, {} surfaces x {} elements ({} channel draws)",
                cfg.ap_count, cfg.user_count, cfg.ris_count, cfg.elements_per_ris, report.channel_draws
            );
            println!("  min closed-form rate: {:.6} bits/s/Hz", report.min_rate);
            println!("  sum rate:             {:.6} bits/s/Hz", report.sum_rate);
            let mc_mean: f64 = report.per_user_mc.iter().sum::<f64>() / report.per_user_mc.len() as f64;
            println!("  mean mc rate:         {mc_mean:.6} bits/s/Hz");
            for note in &report.notes {
                println!("  note: {note}");
            }
            for path in &written {
                println!("wrote {}", path.display());
            }
        }
    }

    eprintln!("done in {:.1} s", started.elapsed().as_secs_f64());
    Ok(())
}
