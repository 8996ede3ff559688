use std::fs;
use std::path::Path;

use proptest::prelude::*;

use crnrx::config::{ExperimentConfig, ExperimentKind};
use crnrx::experiments::run_experiment;
use crnrx::netfile::{parse_network, write_network};
use crnrx::{realization_rng, ReactionNetwork, Signal, Simulator};

fn network() -> impl Strategy<Value = ReactionNetwork> {
    let reaction = (0usize..6, 0usize..6, 1u32..3, 0usize..7, 0.01f64..100.0, 0usize..4);
    (prop::collection::vec(0u64..20, 6), prop::collection::vec(reaction, 1..10)).prop_map(|(counts, reactions)| {
        let mut net = ReactionNetwork::new();
        for (i, c) in counts.iter().enumerate() {
            net.add_species(&format!("S{i}"), *c).unwrap();
        }
        for (a, b, m, cat, k, gate) in reactions {
            let eq = format!("{m} S{a} -> S{b}");
            let cats = if cat < 6 && cat != a { vec![format!("S{cat}")] } else { vec![] };
            let cats: Vec<&str> = cats.iter().map(String::as_str).collect();
            let gate = [None, Some(Signal::SymbolStart), Some(Signal::PilotMode), Some(Signal::DataMode)][gate];
            net.add(&eq, k, gate, &cats).unwrap();
        }
        net.set_schedule(crnrx::SignalSchedule::new(Signal::SymbolStart, vec![(0.0, 0.5), (2.0, 2.5)]).unwrap());
        net
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn network_text_round_trip(net in network(), seed in any::<u64>()) {
        let text = write_network(&net);
        let back = parse_network(&text).unwrap();
        prop_assert_eq!(write_network(&back), text);
        let run = |n: &ReactionNetwork| {
            let mut sim = Simulator::new(n, realization_rng(seed, 0));
            sim.set_event_limit(Some(2_000));
            let _ = sim.advance(3.0);
            (sim.counts().to_vec(), sim.events())
        };
        prop_assert_eq!(run(&back), run(&net));
    }

    #[test]
    fn config_integers_accept_scientific_notation(k in 1u32..7) {
        let cfg = ExperimentConfig::parse(&format!("realizations = 1e{k}\n")).unwrap();
        prop_assert_eq!(cfg.realizations, 10usize.pow(k));
    }
}

#[test]
fn config_rejects_unknown_keys_and_bad_values() {
    for text in ["experiment = frames\nbogus = 1\n", "frames = -2\n", "scenario = S9\n", "k_on = zero\n"] {
        let err = ExperimentConfig::parse(text).and_then(|c| c.validate().map(|_| c));
        assert!(err.is_err(), "accepted {text:?}");
    }
    let err = ExperimentConfig::parse("seed = 4\n\nbogus = 1\n").unwrap_err();
    assert_eq!(err.line, 3);
}

fn small_frames(out: &Path, workers: usize) -> ExperimentConfig {
    let text = format!(
        "experiment = frames\nscenarios = S1, S3\nframes = 2\npilots = 4\ndata = 4\nrealizations = 4\nseed = 12\nworkers = {workers}\nout = {}\n",
        out.display()
    );
    ExperimentConfig::parse(&text).unwrap()
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn same_seed_gives_byte_identical_csvs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let written = run_experiment(&small_frames(a.path(), 1)).unwrap();
    assert_eq!(written.len(), 4);
    run_experiment(&small_frames(b.path(), 3)).unwrap();
    let (fa, fb) = (read_all(a.path()), read_all(b.path()));
    assert_eq!(fa.iter().map(|f| &f.0).collect::<Vec<_>>(), ["frames_S1.csv", "frames_S3.csv", "intervals_S1.csv", "intervals_S3.csv"]);
    assert_eq!(fa, fb);
    let frames = String::from_utf8(fa[0].1.clone()).unwrap();
    assert!(frames.starts_with("frame_index,mean_BER,std_BER,baseline_det,baseline_asym,baseline_MAP\n"));
    assert_eq!(frames.lines().count(), 3);
}

#[test]
fn different_seed_changes_intervals() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_experiment(&small_frames(a.path(), 2)).unwrap();
    let mut cfg = small_frames(b.path(), 2);
    cfg.seed = 13;
    run_experiment(&cfg).unwrap();
    assert_ne!(read_all(a.path())[2], read_all(b.path())[2]);
}

#[test]
fn network_experiment_reads_text_file() {
    let dir = tempfile::tempdir().unwrap();
    let net_path = dir.path().join("iso.crn");
    fs::write(&net_path, "species A = 10\nreaction A -> B @ 1\nreaction B -> A @ 1\npool T = A, B\n").unwrap();
    let mut cfg = ExperimentConfig::parse(&format!("experiment = network\nnetwork = {}\nt_end = 5\nrealizations = 3\n", net_path.display())).unwrap();
    assert_eq!(cfg.kind, ExperimentKind::Network);
    cfg.out = dir.path().join("out");
    run_experiment(&cfg).unwrap();
    let finals = fs::read_to_string(cfg.out.join("final_counts.csv")).unwrap();
    let mut lines = finals.lines();
    assert_eq!(lines.next(), Some("realization,A,B"));
    for line in lines {
        let v: Vec<u64> = line.split(',').skip(1).map(|x| x.parse().unwrap()).collect();
        assert_eq!(v.iter().sum::<u64>(), 10);
    }
}
