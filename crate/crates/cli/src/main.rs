use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use wlanmodel_core::csma::{Cca, ModeSelection};
use wlanmodel_core::phy::{QuantizationPoint, RateMode, Technology};
use wlanmodel_core::pipeline::{
    self, write_files, AxisValue, Generator, OracleSettings, RunConfig, ScenarioSource, SectorConfig, SweepAxis,
    SweepConfig,
};
use wlanmodel_core::radio_plan::Channelization;

const THREADS_ENV: &str = "WLANMODEL_THREADS";

#[derive(Parser)]
#[command(name = "wlanmodel", version, about = "Analytical throughput model for dense multi-AP Wi-Fi")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the scenario and write it as TOML.
    Generate(RunArgs),
    /// Run the model once and write the rate report, CDF and summary.
    Evaluate(RunArgs),
    /// Evaluate every value of one sweep axis.
    Sweep(RunArgs),
    /// Compare the model against the Monte Carlo fading simulation.
    McValidate(RunArgs),
}

/// Flags override values read from `--config`.
#[derive(Args, Debug, Default)]
struct RunArgs {
    /// RunConfig TOML file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short, default_value = "wlanmodel-out")]
    out: PathBuf,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    print_config: bool,

    #[arg(long, help_heading = "Scenario")]
    generator: Option<Generator>,
    /// Scenario TOML file; replaces the generator.
    #[arg(long, help_heading = "Scenario")]
    scenario_file: Option<PathBuf>,
    #[arg(long, help_heading = "Scenario")]
    n_aps: Option<usize>,
    #[arg(long, help_heading = "Scenario")]
    n_users: Option<usize>,
    #[arg(long, help_heading = "Scenario")]
    n_rooms: Option<usize>,
    #[arg(long, help_heading = "Scenario")]
    wall_attenuation_db: Option<f64>,
    #[arg(long, help_heading = "Scenario")]
    sector_width_deg: Option<f64>,
    /// Defaults to facing the centre of the area.
    #[arg(long, help_heading = "Scenario", requires = "sector_width_deg")]
    sector_orientation_deg: Option<f64>,

    /// su_beamforming, concentrated_mu_mimo or distributed_mu_mimo.
    #[arg(long, help_heading = "Model")]
    technology: Option<Technology>,
    /// 4x20, 2x40 or 1x80.
    #[arg(long, help_heading = "Model")]
    channelization: Option<Channelization>,
    /// CCA threshold in dB, or "disabled".
    #[arg(long, help_heading = "Model", allow_hyphen_values = true)]
    cca: Option<Cca>,
    #[arg(long, help_heading = "Model", allow_hyphen_values = true)]
    power_db: Option<f64>,
    #[arg(long, help_heading = "Model")]
    antennas: Option<usize>,
    #[arg(long, help_heading = "Model")]
    rho: Option<f64>,
    /// gaussian or quantized.
    #[arg(long, help_heading = "Model")]
    rate_mode: Option<RateMode>,
    /// per_state or after_averaging.
    #[arg(long, help_heading = "Model")]
    quantization: Option<QuantizationPoint>,
    /// auto, all_independent_sets, maximal_only or no_csma.
    #[arg(long, help_heading = "Model")]
    ctmc_mode: Option<ModeSelection>,
    #[arg(long, help_heading = "Model")]
    state_cap: Option<usize>,
    #[arg(long, help_heading = "Model")]
    n_clusters: Option<usize>,
    #[arg(long, help_heading = "Model")]
    overhead_discount: Option<f64>,
    #[arg(long, help_heading = "Model")]
    outage_threshold_bps: Option<f64>,
    /// Also write gains, channels, association, contention graph and CTMC.
    #[arg(long, help_heading = "Model")]
    dump_intermediates: bool,

    #[arg(long, help_heading = "Seeds")]
    seed_topology: Option<u64>,
    #[arg(long, help_heading = "Seeds")]
    seed_plan: Option<u64>,
    #[arg(long, help_heading = "Seeds")]
    seed_shadowing: Option<u64>,
    #[arg(long, help_heading = "Seeds")]
    seed_oracle: Option<u64>,

    #[arg(long, help_heading = "Oracle")]
    n_realizations: Option<usize>,
    #[arg(long, help_heading = "Oracle")]
    subcarriers: Option<usize>,
    #[arg(long, help_heading = "Oracle")]
    enumeration_limit: Option<usize>,

    /// n_aps, n_users, cca, power_db, channelization, n_clusters, antennas or rho.
    #[arg(long, help_heading = "Sweep")]
    sweep_axis: Option<SweepAxis>,
    /// Comma-separated axis values.
    #[arg(long, help_heading = "Sweep", value_delimiter = ',', allow_hyphen_values = true)]
    sweep_values: Vec<String>,
    /// Comma-separated CCA values evaluated at every sweep point.
    #[arg(long, help_heading = "Sweep", value_delimiter = ',', allow_hyphen_values = true)]
    cca_grid: Vec<f64>,
}

impl RunArgs {
    fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path).with_context(|| format!("config stage failed: {}", path.display()))?,
            None => RunConfig::new(ScenarioSource::generator(Generator::ConferenceHall, 20, 200)),
        };
        let src = &mut cfg.scenario;
        if let Some(g) = self.generator {
            src.generator = Some(g);
            src.file = None;
        }
        if let Some(f) = &self.scenario_file {
            src.file = Some(f.clone());
            src.generator = None;
        }
        set(&mut src.n_aps, self.n_aps);
        set(&mut src.n_users, self.n_users);
        set(&mut src.n_rooms, self.n_rooms);
        set(&mut src.wall_attenuation_db, self.wall_attenuation_db);
        if let Some(width_deg) = self.sector_width_deg {
            cfg.sector = Some(SectorConfig { width_deg, orientation_deg: self.sector_orientation_deg });
        }

        set(&mut cfg.technology, self.technology);
        set(&mut cfg.channelization, self.channelization);
        set(&mut cfg.cca, self.cca);
        if self.power_db.is_some() {
            cfg.power_db = self.power_db;
        }
        if self.antennas.is_some() {
            cfg.antennas = self.antennas;
        }
        set(&mut cfg.rho, self.rho);
        set(&mut cfg.rate_mode, self.rate_mode);
        set(&mut cfg.quantization, self.quantization);
        set(&mut cfg.ctmc_mode, self.ctmc_mode);
        set(&mut cfg.state_cap, self.state_cap);
        set(&mut cfg.n_clusters, self.n_clusters);
        set(&mut cfg.overhead_discount, self.overhead_discount);
        set(&mut cfg.outage_threshold_bps, self.outage_threshold_bps);
        cfg.dump_intermediates |= self.dump_intermediates;

        set(&mut cfg.seeds.topology, self.seed_topology);
        set(&mut cfg.seeds.plan, self.seed_plan);
        set(&mut cfg.seeds.shadowing, self.seed_shadowing);
        set(&mut cfg.seeds.oracle, self.seed_oracle);

        if self.n_realizations.is_some() || self.subcarriers.is_some() || self.enumeration_limit.is_some() {
            let o = cfg.oracle.get_or_insert_with(OracleSettings::default);
            set(&mut o.n_realizations, self.n_realizations);
            set(&mut o.subcarriers, self.subcarriers);
            set(&mut o.enumeration_limit, self.enumeration_limit);
        }

        if self.sweep_axis.is_some() || !self.sweep_values.is_empty() || !self.cca_grid.is_empty() {
            let axis = match (self.sweep_axis, &cfg.sweep) {
                (Some(a), _) => a,
                (None, Some(s)) => s.axis,
                (None, None) if self.sweep_values.is_empty() => SweepAxis::Cca,
                (None, None) => bail!("config stage failed: --sweep-values needs --sweep-axis"),
            };
            let s = cfg.sweep.get_or_insert_with(|| SweepConfig { axis, values: Vec::new(), cca_grid: None });
            s.axis = axis;
            if !self.sweep_values.is_empty() {
                s.values = self.sweep_values.iter().map(|v| AxisValue::parse(v.trim())).collect();
            }
            if !self.cca_grid.is_empty() {
                s.cca_grid = Some(self.cca_grid.clone());
            }
        }
        Ok(cfg)
    }
}

fn set<T>(field: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *field = v;
    }
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = raw.trim().parse().with_context(|| format!("{THREADS_ENV}={raw:?} is not a thread count"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn print_summary(label: &str, s: &wlanmodel_core::metrics::Summary) {
    println!(
        "{label}: mean {:.4e} bps, median {:.4e} bps, p5 {:.4e} bps, outage {:.4}",
        s.mean, s.median, s.p5, s.outage
    );
}

/// Returns whether every stage and sweep point succeeded.
fn run(command: Command) -> anyhow::Result<bool> {
    let (Command::Generate(args) | Command::Evaluate(args) | Command::Sweep(args) | Command::McValidate(args)) =
        &command;
    let cfg = args.resolve()?;
    if args.print_config {
        print!("{}", cfg.to_toml_string()?);
        return Ok(true);
    }
    let out = &args.out;
    let write = |files: &[pipeline::OutputFile]| -> anyhow::Result<()> {
        write_files(out, files).with_context(|| format!("writing outputs to {}", out.display()))
    };
    match command {
        Command::Generate(_) => {
            write(&pipeline::generate(&cfg)?)?;
            println!("scenario written to {}", out.join("scenario.toml").display());
            Ok(true)
        }
        Command::Evaluate(_) => {
            let eval = pipeline::evaluate(&cfg)?;
            write(&eval.files()?)?;
            print_summary("throughput", &eval.report.summary);
            Ok(true)
        }
        Command::Sweep(_) => {
            let result = pipeline::sweep(&cfg)?;
            write(&result.files()?)?;
            for (i, p) in result.points.iter().enumerate() {
                let value = p.value.as_ref().map_or("-".to_string(), |v| v.to_string());
                match &p.outcome {
                    Ok(r) => {
                        print_summary(&format!("point {i} ({value})"), &r.summary);
                        if let Some((cca, mean)) = r.optimal_cca {
                            println!("point {i} ({value}): optimal cca {cca} dB, mean {mean:.4e} bps");
                        }
                    }
                    Err(e) => eprintln!("point {i} ({value}): {e}"),
                }
            }
            Ok(result.failures() == 0)
        }
        Command::McValidate(_) => {
            let v = pipeline::mc_validate(&cfg)?;
            write(&v.files()?)?;
            print_summary("deterministic", &v.evaluation.report.summary);
            print_summary("monte carlo", &v.monte_carlo.summary);
            println!("mean relative error {:.4}", v.mean_relative_error());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = configure_threads().and_then(|_| run(cli.command));
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: one or more sweep points failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
