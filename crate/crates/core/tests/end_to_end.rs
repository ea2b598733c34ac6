use proptest::prelude::*;
use wlanmodel_core::csma::{Cca, CtmcMode};
use wlanmodel_core::phy::{RateMode, Technology};
use wlanmodel_core::pipeline::{evaluate, mc_validate, Generator, OracleSettings, RadioArtifacts, RunConfig, ScenarioSource};
use wlanmodel_core::radio_plan::Channelization;

fn config(generator: Generator, n_aps: usize, n_users: usize) -> RunConfig {
    RunConfig::new(ScenarioSource::generator(generator, n_aps, n_users))
}

#[test]
fn conference_hall_all_technologies_at_cca_10() {
    let mut means = Vec::new();
    for tech in [Technology::SuBeamforming, Technology::ConcentratedMuMimo] {
        let mut cfg = config(Generator::ConferenceHall, 20, 200);
        cfg.technology = tech;
        cfg.power_db = Some(90.0);
        cfg.rate_mode = RateMode::Quantized;
        let eval = evaluate(&cfg).unwrap();
        let files = eval.files().unwrap();
        assert!(files.iter().any(|f| f.name == "cdf.csv"));
        assert!(files.iter().any(|f| f.name == "summary.csv"));
        means.push(eval.report.summary.mean);
    }
    assert!(means[1] > means[0], "MU-MIMO {} should beat SU-BF {}", means[1], means[0]);
}

#[test]
fn disabling_cca_removes_contention() {
    let mut cfg = config(Generator::OpenFloor, 12, 60);
    cfg.cca = Cca::Disabled;
    let eval = evaluate(&cfg).unwrap();
    let RadioArtifacts::Csma { graph, model, .. } = &eval.radio else { panic!("expected CSMA artifacts") };
    assert!(graph.edges().is_empty());
    assert!(model.chains.iter().all(|c| c.mode == CtmcMode::NoCsma && c.states.len() == 1));
}

#[test]
fn stadium_small_clusters_share_channels() {
    let mut cfg = config(Generator::Stadium, 24, 240);
    cfg.technology = Technology::DistributedMuMimo;
    cfg.channelization = Channelization::Four20;
    cfg.n_clusters = 8;
    cfg.overhead_discount = 0.8;
    let eval = evaluate(&cfg).unwrap();
    assert!(eval.metadata().notes.iter().any(|n| n.contains("co-channel clusters interfere")));

    let mut isolated = cfg.clone();
    isolated.n_clusters = 4;
    let full = RunConfig { overhead_discount: 1.0, ..isolated.clone() };
    let (a, b) = (evaluate(&isolated).unwrap().report, evaluate(&full).unwrap().report);
    for (x, y) in a.users.iter().zip(&b.users) {
        assert!((x.throughput_bps - 0.8 * y.throughput_bps).abs() <= 1e-9 * y.throughput_bps.max(1.0));
    }
}

#[test]
fn more_antennas_tighten_oracle_agreement() {
    let run = |m| {
        let mut cfg = config(Generator::ConferenceHall, 4, 20);
        cfg.technology = Technology::ConcentratedMuMimo;
        cfg.antennas = Some(m);
        cfg.oracle = Some(OracleSettings { n_realizations: 2000, ..OracleSettings::default() });
        mc_validate(&cfg).unwrap().mean_relative_error()
    };
    assert!(run(10) < run(4));
}

fn generator() -> impl Strategy<Value = Generator> {
    prop_oneof![
        Just(Generator::ConferenceHall),
        Just(Generator::OpenFloor),
        Just(Generator::WalledOffice),
        Just(Generator::Stadium)
    ]
}

fn technology() -> impl Strategy<Value = Technology> {
    prop_oneof![
        Just(Technology::SuBeamforming),
        Just(Technology::ConcentratedMuMimo),
        Just(Technology::DistributedMuMimo)
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generated_runs_satisfy_report_contract(
        generator in generator(),
        technology in technology(),
        n_aps in 1usize..16,
        n_users in 1usize..60,
        cca in prop_oneof![Just(Cca::Disabled), (-10.0f64..40.0).prop_map(Cca::Db)],
        quantized in any::<bool>(),
        channelization in prop_oneof![Just(Channelization::Four20), Just(Channelization::Two40), Just(Channelization::One80)],
        seed in 0u64..1000,
    ) {
        let mut cfg = config(generator, n_aps, n_users);
        cfg.technology = technology;
        cfg.cca = cca;
        cfg.channelization = channelization;
        cfg.rate_mode = if quantized { RateMode::Quantized } else { RateMode::Gaussian };
        cfg.seeds.topology = seed;
        cfg.seeds.shadowing = seed + 1;
        if technology == Technology::DistributedMuMimo {
            cfg.n_clusters = 1 + (seed as usize) % n_aps;
        }
        let eval = evaluate(&cfg).unwrap();
        let report = &eval.report;
        prop_assert_eq!(report.users.len(), n_users);
        prop_assert!(report.users.iter().all(|u| u.throughput_bps.is_finite() && u.throughput_bps >= 0.0));
        let cdf = report.cdf();
        prop_assert!(cdf.windows(2).all(|w| w[1].0 > w[0].0 && w[1].1 >= w[0].1));
        prop_assert_eq!(cdf.last().unwrap().1, 1.0);
        prop_assert!(report.summary.p5 <= report.summary.median);
        if let RadioArtifacts::Csma { model, .. } = &eval.radio {
            for chain in &model.chains {
                let total: f64 = chain.pi.iter().sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn evaluation_is_deterministic(n_aps in 1usize..10, n_users in 1usize..40, seed in 0u64..100) {
        let mut cfg = config(Generator::OpenFloor, n_aps, n_users);
        cfg.seeds.plan = seed;
        let a = evaluate(&cfg).unwrap().files().unwrap();
        let b = evaluate(&cfg).unwrap().files().unwrap();
        prop_assert_eq!(a, b);
    }
}
