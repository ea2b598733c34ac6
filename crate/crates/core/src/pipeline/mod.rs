//! End-to-end runs: scenario, gains, radio plan, CSMA chain, rates, report.

mod config;
mod output;

use rayon::prelude::*;
use serde::Serialize;

pub use config::{
    AxisValue, Generator, OracleSettings, RunConfig, ScenarioSource, SectorConfig, Seeds, SweepAxis, SweepConfig,
};
pub use output::{write_files, OutputFile};

use crate::csma::{build_contention_graph, ContentionGraph, CtmcMode, CtmcModel};
use crate::error::{Error, Result, StageContext};
use crate::metrics::{McsTable, Summary};
use crate::oracle::{mc_dist_rate, mc_mu_rate, mc_su_rate, OracleConfig, OracleReport};
use crate::phy::{
    ctmc_average_rates, distributed_rates, peak_rate_matrix, throughput_report, LinkRate, Network, RateMode, RateReport,
    Technology,
};
use crate::propagation::{gain_matrix, GainMatrix, PathlossParams};
use crate::radio_plan::{
    assign_channels, associate_users, associate_users_to_clusters, build_clusters, AssociationMap, ChannelPlan, ClusterPlan,
};
use crate::scenario::{
    build_conference_hall, build_open_floor, build_stadium, build_walled_office_with, Point, Scenario, Sector,
};

/// Radio-plan and MAC artifacts, by technology family.
#[derive(Debug, Clone)]
pub enum RadioArtifacts {
    Csma { plan: ChannelPlan, assoc: AssociationMap, graph: ContentionGraph, model: CtmcModel },
    Distributed { clusters: ClusterPlan, streams: Vec<usize> },
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    /// Resolved single-point configuration.
    pub config: RunConfig,
    pub scenario: Scenario,
    pub gains: GainMatrix,
    pub radio: RadioArtifacts,
    /// CTMC-averaged spectral efficiency per user, bit/s/Hz.
    pub rates: Vec<f64>,
    pub report: RateReport,
}

/// Facts about a run that are not part of its configuration.
#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata {
    pub version: String,
    pub n_aps: usize,
    pub n_users: usize,
    pub zero_rate_users: Vec<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub chains: Vec<ChainMetadata>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainMetadata {
    pub channel: usize,
    pub aps: usize,
    pub mode: CtmcMode,
    pub states: usize,
}

pub fn build_scenario(cfg: &RunConfig) -> Result<Scenario> {
    let src = &cfg.scenario;
    let seed = cfg.seeds.topology;
    let mut scenario = match (src.generator, &src.file) {
        (Some(Generator::ConferenceHall), _) => build_conference_hall(src.n_aps, src.n_users, seed)?,
        (Some(Generator::OpenFloor), _) => build_open_floor(src.n_aps, src.n_users, seed)?,
        (Some(Generator::WalledOffice), _) => {
            build_walled_office_with(src.n_rooms, src.n_aps, src.n_users, seed, src.wall_attenuation_db)?
        }
        (Some(Generator::Stadium), _) => build_stadium(src.n_aps, src.n_users, seed)?,
        (None, Some(path)) => Scenario::load(path)?,
        (None, None) => return Err(Error::Config("scenario needs a generator or a file".into())),
    };
    if let Some(m) = cfg.antennas {
        scenario = scenario.with_antennas(m);
    }
    if let Some(p) = cfg.power_db {
        scenario = scenario.with_power_db(p);
    }
    if let Some(sector) = cfg.sector {
        let centre = Point::new(scenario.width_m / 2.0, scenario.height_m / 2.0);
        for ap in &mut scenario.aps {
            let orientation_deg = sector.orientation_deg.unwrap_or_else(|| {
                let (dx, dy) = (centre.x - ap.position.x, centre.y - ap.position.y);
                if dx == 0.0 && dy == 0.0 {
                    0.0
                } else {
                    dy.atan2(dx).to_degrees()
                }
            });
            ap.sector = Some(Sector { orientation_deg, width_deg: sector.width_deg });
        }
    }
    scenario.validate()?;
    Ok(scenario)
}

fn link_rate<'a>(cfg: &RunConfig, mcs: &'a McsTable) -> LinkRate<'a> {
    LinkRate { mode: cfg.rate_mode, mcs, point: cfg.quantization }
}

/// Runs the full pipeline for one configuration point. Errors carry the
/// label of the stage that failed.
pub fn evaluate(cfg: &RunConfig) -> Result<Evaluation> {
    let cfg = cfg.point();
    cfg.validate().stage("config")?;
    let scenario = build_scenario(&cfg).stage("scenario")?;
    let params = cfg.pathloss.clone().unwrap_or_else(|| PathlossParams::for_class(scenario.scenario_class));
    let gains = gain_matrix(&scenario, &params, cfg.seeds.shadowing).stage("propagation")?;
    let mcs = cfg.mcs_table.clone().unwrap_or_default();
    let link = link_rate(&cfg, &mcs);
    let channels = cfg.channelization.channels();

    let (radio, rates, serving, bandwidth) = match cfg.technology {
        Technology::SuBeamforming | Technology::ConcentratedMuMimo => {
            let plan = assign_channels(&gains, &scenario.aps, &channels, cfg.seeds.plan).stage("channel assignment")?;
            let assoc = associate_users(&peak_rate_matrix(&gains, &scenario.aps), &gains, cfg.seeds.plan).stage("association")?;
            let graph = build_contention_graph(&gains, &plan, &scenario.aps, cfg.cca);
            let model = CtmcModel::build(&graph, cfg.ctmc_mode, cfg.rho, cfg.state_cap).stage("csma")?;
            let net = Network { gains: &gains, aps: &scenario.aps, plan: &plan, assoc: &assoc };
            let rates = ctmc_average_rates(&net, link, &model, cfg.technology).stage("phy")?;
            let serving = assoc.user_ap.clone();
            let bandwidth = serving.iter().map(|&i| plan.channel_of(i).width_hz()).collect::<Vec<_>>();
            (RadioArtifacts::Csma { plan, assoc, graph, model }, rates, serving, bandwidth)
        }
        Technology::DistributedMuMimo => {
            let mut clusters = build_clusters(&scenario.aps, cfg.n_clusters, &channels, cfg.seeds.plan).stage("clustering")?;
            associate_users_to_clusters(&mut clusters, &scenario.aps, &gains, cfg.seeds.plan);
            let (rates, streams) = distributed_rates(&gains, &scenario.aps, &clusters, link).stage("phy")?;
            let serving = clusters.user_cluster.clone();
            let bandwidth =
                serving.iter().map(|&c| clusters.channels[clusters.clusters[c].channel].width_hz()).collect::<Vec<_>>();
            (RadioArtifacts::Distributed { clusters, streams }, rates, serving, bandwidth)
        }
    };
    let report = throughput_report(
        cfg.technology,
        cfg.rate_mode,
        &rates,
        &serving,
        &bandwidth,
        cfg.overhead_discount,
        cfg.outage_threshold_bps,
    )
    .stage("report")?;
    Ok(Evaluation { config: cfg, scenario, gains, radio, rates, report })
}

impl Evaluation {
    pub fn metadata(&self) -> RunMetadata {
        let mut notes = Vec::new();
        let (zero_rate_users, chains) = match &self.radio {
            RadioArtifacts::Csma { assoc, model, .. } => (
                assoc.zero_rate.clone(),
                model
                    .chains
                    .iter()
                    .map(|c| ChainMetadata { channel: c.channel, aps: c.aps.len(), mode: c.mode, states: c.states.len() })
                    .collect(),
            ),
            RadioArtifacts::Distributed { clusters, .. } => {
                if (0..clusters.clusters.len()).any(|c| !clusters.co_channel(c).is_empty()) {
                    notes.push(
                        "co-channel clusters interfere; interference is the sum of g*P over all APs of the other \
                         co-channel clusters, all transmitting"
                            .to_string(),
                    );
                }
                (Vec::new(), Vec::new())
            }
        };
        if self.config.rate_mode == RateMode::Quantized {
            notes.push(format!("MCS quantization point: {:?}", self.config.quantization));
        }
        RunMetadata {
            version: env!("CARGO_PKG_VERSION").to_string(),
            n_aps: self.scenario.n_aps(),
            n_users: self.scenario.n_users(),
            zero_rate_users,
            chains,
            notes,
        }
    }

    /// Report files, plus intermediate artifacts when requested.
    pub fn files(&self) -> Result<Vec<OutputFile>> {
        let header = output::config_header(&self.config)?;
        let mut files = vec![
            OutputFile::new("run.toml", output::sidecar(&self.config, &self.metadata())?),
            OutputFile::csv("report.csv", &header, |w| self.report.write_csv(w))?,
            OutputFile::csv("cdf.csv", &header, |w| self.report.write_cdf_csv(w))?,
            OutputFile::csv("summary.csv", &header, |w| output::write_summary(w, &self.report.summary))?,
        ];
        if self.config.dump_intermediates {
            files.push(scenario_file(&header, &self.scenario)?);
            files.push(OutputFile::csv("gains.csv", &header, |w| self.gains.write_csv(w))?);
            match &self.radio {
                RadioArtifacts::Csma { plan, assoc, graph, model } => {
                    files.push(OutputFile::csv("channels.csv", &header, |w| plan.write_csv(w))?);
                    files.push(OutputFile::csv("association.csv", &header, |w| assoc.write_csv(w))?);
                    files.push(OutputFile::csv("contention_graph.csv", &header, |w| graph.write_csv(w))?);
                    files.push(OutputFile::csv("ctmc.csv", &header, |w| model.write_csv(w))?);
                }
                RadioArtifacts::Distributed { clusters, .. } => {
                    files.push(OutputFile::csv("clusters.csv", &header, |w| clusters.write_csv(w))?);
                }
            }
        }
        Ok(files)
    }
}

fn scenario_file(header: &str, scenario: &Scenario) -> Result<OutputFile> {
    Ok(OutputFile::new("scenario.toml", format!("{header}{}", scenario.to_toml_string()?).into_bytes()))
}

/// Builds the scenario only: `scenario.toml` and the `run.toml` sidecar.
pub fn generate(cfg: &RunConfig) -> Result<Vec<OutputFile>> {
    let cfg = cfg.point();
    cfg.validate().stage("config")?;
    let scenario = build_scenario(&cfg).stage("scenario")?;
    let header = output::config_header(&cfg)?;
    Ok(vec![OutputFile::new("run.toml", output::sweep_sidecar(&cfg)?), scenario_file(&header, &scenario)?])
}

/// Outcome of one sweep point.
#[derive(Debug, Clone)]
pub struct PointResult {
    pub summary: Summary,
    pub files: Vec<OutputFile>,
    /// Smallest CCA on the grid reaching the best mean throughput.
    pub optimal_cca: Option<(f64, f64)>,
    pub cca_curve: Vec<(f64, std::result::Result<f64, String>)>,
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub value: Option<AxisValue>,
    pub config: Option<RunConfig>,
    pub outcome: std::result::Result<PointResult, String>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub config: RunConfig,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn failures(&self) -> usize {
        self.points.iter().filter(|p| p.outcome.is_err()).count()
    }
}

fn sweep_point(cfg: &RunConfig, cca_grid: Option<&[f64]>) -> Result<PointResult> {
    let eval = evaluate(cfg)?;
    let mut cca_curve = Vec::new();
    let mut optimal_cca = None;
    if let Some(grid) = cca_grid {
        cca_curve = grid
            .par_iter()
            .map(|&cca| {
                let c = RunConfig { cca: crate::csma::Cca::Db(cca), dump_intermediates: false, ..cfg.clone() };
                (cca, evaluate(&c).map(|e| e.report.summary.mean).map_err(|e| e.to_string()))
            })
            .collect();
        for (cca, mean) in &cca_curve {
            if let Ok(m) = mean {
                if optimal_cca.is_none_or(|(best_cca, best): (f64, f64)| *m > best || (*m == best && *cca < best_cca)) {
                    optimal_cca = Some((*cca, *m));
                }
            }
        }
    }
    Ok(PointResult { summary: eval.report.summary, files: eval.files()?, optimal_cca, cca_curve })
}

/// Evaluates every sweep point in parallel. Point failures are recorded and
/// do not stop the sweep; only an invalid base configuration is an error.
pub fn sweep(cfg: &RunConfig) -> Result<SweepResult> {
    cfg.validate().stage("config")?;
    let grid = cfg.sweep.as_ref().and_then(|s| s.cca_grid.as_deref());
    let jobs: Vec<(Option<AxisValue>, Result<RunConfig>)> = match &cfg.sweep {
        Some(s) if !s.values.is_empty() => s.values.iter().map(|v| (Some(v.clone()), cfg.with_axis(s.axis, v))).collect(),
        _ => vec![(None, Ok(cfg.point()))],
    };
    let points = jobs
        .into_par_iter()
        .map(|(value, point_cfg)| {
            let outcome = point_cfg
                .as_ref()
                .map_err(|e| format!("config stage failed: {e}"))
                .and_then(|c| sweep_point(c, grid).map_err(|e| e.to_string()));
            SweepPoint { value, config: point_cfg.ok(), outcome }
        })
        .collect();
    Ok(SweepResult { config: cfg.clone(), points })
}

impl SweepResult {
    /// `sweep.csv`, `sweep_cdfs.csv`, optional `cca_grid.csv`, and every
    /// point's evaluation files under `point_NNN/`.
    pub fn files(&self) -> Result<Vec<OutputFile>> {
        let header = output::config_header(&self.config)?;
        let axis = self.config.sweep.as_ref().map(|s| s.axis.to_string()).unwrap_or_default();
        let mut files = vec![OutputFile::new("run.toml", output::sweep_sidecar(&self.config)?)];
        files.push(OutputFile::csv("sweep.csv", &header, |w| {
            let mut out = csv::Writer::from_writer(w);
            out.write_record([
                "point",
                "axis",
                "value",
                "status",
                "mean_throughput_bps",
                "median_bps",
                "p5_bps",
                "outage",
                "optimal_cca_db",
                "error",
            ])?;
            for (i, p) in self.points.iter().enumerate() {
                let value = p.value.as_ref().map(ToString::to_string).unwrap_or_default();
                let row = match &p.outcome {
                    Ok(r) => [
                        format!("{i:03}"),
                        axis.clone(),
                        value,
                        "ok".into(),
                        format!("{:.12e}", r.summary.mean),
                        format!("{:.12e}", r.summary.median),
                        format!("{:.12e}", r.summary.p5),
                        format!("{:.12e}", r.summary.outage),
                        r.optimal_cca.map(|(c, _)| c.to_string()).unwrap_or_default(),
                        String::new(),
                    ],
                    Err(e) => [
                        format!("{i:03}"),
                        axis.clone(),
                        value,
                        "error".into(),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                        e.clone(),
                    ],
                };
                out.write_record(row)?;
            }
            out.flush()?;
            Ok(())
        })?);
        files.push(OutputFile::csv("sweep_cdfs.csv", &header, |w| {
            let mut out = csv::Writer::from_writer(w);
            out.write_record(["point", "value", "throughput_bps", "cdf"])?;
            for (i, p) in self.points.iter().enumerate() {
                let Ok(r) = &p.outcome else { continue };
                let value = p.value.as_ref().map(ToString::to_string).unwrap_or_default();
                let cdf = r.files.iter().find(|f| f.name == "cdf.csv").expect("cdf file");
                let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(cdf.contents.as_slice());
                for rec in rdr.records() {
                    let rec = rec?;
                    out.write_record([format!("{i:03}"), value.clone(), rec[0].to_string(), rec[1].to_string()])?;
                }
            }
            out.flush()?;
            Ok(())
        })?);
        if self.config.sweep.as_ref().is_some_and(|s| s.cca_grid.is_some()) {
            files.push(OutputFile::csv("cca_grid.csv", &header, |w| {
                let mut out = csv::Writer::from_writer(w);
                out.write_record(["point", "value", "cca_db", "mean_throughput_bps", "error"])?;
                for (i, p) in self.points.iter().enumerate() {
                    let Ok(r) = &p.outcome else { continue };
                    let value = p.value.as_ref().map(ToString::to_string).unwrap_or_default();
                    for (cca, mean) in &r.cca_curve {
                        let (m, e) = match mean {
                            Ok(m) => (format!("{m:.12e}"), String::new()),
                            Err(e) => (String::new(), e.clone()),
                        };
                        out.write_record([format!("{i:03}"), value.clone(), cca.to_string(), m, e])?;
                    }
                }
                out.flush()?;
                Ok(())
            })?);
        }
        for (i, p) in self.points.iter().enumerate() {
            if let Ok(r) = &p.outcome {
                for f in &r.files {
                    files.push(OutputFile::new(&format!("point_{i:03}/{}", f.name), f.contents.clone()));
                }
            }
        }
        Ok(files)
    }
}

#[derive(Debug, Clone)]
pub struct Validation {
    pub evaluation: Evaluation,
    pub oracle: OracleReport,
    /// Throughput report built from the Monte Carlo rates.
    pub monte_carlo: RateReport,
}

/// Runs the deterministic pipeline and the fading oracle on the same
/// scenario, plan and seeds. Rates are compared in Gaussian mode.
pub fn mc_validate(cfg: &RunConfig) -> Result<Validation> {
    let mut cfg = cfg.point();
    cfg.rate_mode = RateMode::Gaussian;
    let settings = cfg.oracle.unwrap_or_default();
    cfg.oracle = Some(settings);
    let evaluation = evaluate(&cfg)?;
    let oracle_cfg = OracleConfig {
        n_realizations: settings.n_realizations,
        seed: cfg.seeds.oracle,
        subcarriers: settings.subcarriers,
        enumeration_limit: settings.enumeration_limit,
    };
    let oracle = match &evaluation.radio {
        RadioArtifacts::Csma { plan, assoc, model, .. } => {
            let net = Network { gains: &evaluation.gains, aps: &evaluation.scenario.aps, plan, assoc };
            match cfg.technology {
                Technology::SuBeamforming => mc_su_rate(&net, model, &oracle_cfg),
                _ => mc_mu_rate(&net, model, &oracle_cfg),
            }
        }
        RadioArtifacts::Distributed { clusters, .. } => {
            mc_dist_rate(&evaluation.gains, &evaluation.scenario.aps, clusters, &oracle_cfg)
        }
    }
    .stage("oracle")?;
    let serving: Vec<usize> = evaluation.report.users.iter().map(|u| u.serving).collect();
    let bandwidth: Vec<f64> = evaluation.report.users.iter().map(|u| u.bandwidth_hz).collect();
    let monte_carlo = throughput_report(
        cfg.technology,
        RateMode::Gaussian,
        &oracle.mean,
        &serving,
        &bandwidth,
        cfg.overhead_discount,
        cfg.outage_threshold_bps,
    )
    .stage("report")?;
    Ok(Validation { evaluation, oracle, monte_carlo })
}

impl Validation {
    /// Mean-rate relative error `|MC - deterministic| / deterministic`.
    pub fn mean_relative_error(&self) -> f64 {
        let det = self.evaluation.report.summary.mean;
        (self.monte_carlo.summary.mean - det).abs() / det
    }

    pub fn files(&self) -> Result<Vec<OutputFile>> {
        let cfg = &self.evaluation.config;
        let header = output::config_header(cfg)?;
        Ok(vec![
            OutputFile::new("run.toml", output::sidecar(cfg, &self.evaluation.metadata())?),
            OutputFile::csv("deterministic_cdf.csv", &header, |w| self.evaluation.report.write_cdf_csv(w))?,
            OutputFile::csv("monte_carlo_cdf.csv", &header, |w| self.monte_carlo.write_cdf_csv(w))?,
            OutputFile::csv("oracle.csv", &header, |w| self.oracle.write_csv(w))?,
            OutputFile::csv("comparison.csv", &header, |w| {
                crate::oracle::write_comparison_csv(&self.evaluation.rates, &self.oracle, w)
            })?,
            OutputFile::csv("summary.csv", &header, |w| {
                output::write_validation_summary(w, &self.evaluation.report.summary, &self.monte_carlo.summary, &self.oracle)
            })?,
        ])
    }
}
