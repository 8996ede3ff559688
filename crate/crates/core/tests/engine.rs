use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crnrx::{realization_rng, run_ensemble, ReactionNetwork, Signal, SignalSchedule, Simulator};

/// Independent first-reaction SSA over the same network description.
fn first_reaction(net: &ReactionNetwork, t_end: f64, rng: &mut ChaCha8Rng) -> Vec<u64> {
    let mut x = net.initial_counts();
    let mut t = 0.0;
    loop {
        let mut best = (f64::INFINITY, usize::MAX);
        for (k, r) in net.reactions().iter().enumerate() {
            let a = r.mass_action(&x);
            if a > 0.0 {
                let tau = -(1.0 - rng.random::<f64>()).ln() / a;
                if tau < best.0 {
                    best = (tau, k);
                }
            }
        }
        if t + best.0 > t_end {
            return x;
        }
        t += best.0;
        net.reactions()[best.1].apply(&mut x);
    }
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

fn dimerization() -> ReactionNetwork {
    let mut net = ReactionNetwork::new();
    net.add_species("A", 20).unwrap();
    net.add("0 -> A", 8.0, None, &[]).unwrap();
    net.add("2 A -> B", 0.05, None, &[]).unwrap();
    net.add("B -> 2 A", 0.5, None, &[]).unwrap();
    net.add("A -> 0", 0.3, None, &[]).unwrap();
    net
}

#[test]
fn next_reaction_matches_first_reaction_oracle() {
    let net = dimerization();
    let n = 4000;
    let t_end = 3.0;
    let a = net.species_id("A").unwrap();
    let b = net.species_id("B").unwrap();
    let mnrm: Vec<(f64, f64)> = run_ensemble(n, 5, None, |_, rng| {
        let mut sim = Simulator::new(&net, rng);
        sim.advance(t_end).unwrap();
        (sim.count(a) as f64, sim.count(b) as f64)
    });
    let oracle: Vec<Vec<u64>> = (0..n).map(|i| first_reaction(&net, t_end, &mut realization_rng(6, i as u64))).collect();
    for (s, idx) in [(a, 0usize), (b, 1)] {
        let x: Vec<f64> = mnrm.iter().map(|p| if idx == 0 { p.0 } else { p.1 }).collect();
        let y: Vec<f64> = oracle.iter().map(|c| c[s.index()] as f64).collect();
        let (mx, vx) = mean_var(&x);
        let (my, vy) = mean_var(&y);
        let se = ((vx + vy) / n as f64).sqrt();
        assert!((mx - my).abs() < 4.0 * se, "species {idx}: mean {mx} vs oracle {my} (se {se})");
        assert!((vx / vy - 1.0).abs() < 0.15, "species {idx}: variance {vx} vs oracle {vy}");
    }
}

#[test]
fn immigration_death_transient_mean() {
    // E[n(t)] = (k/g)(1 - e^{-g t}) from an empty start; n(t) is Poisson.
    let mut net = ReactionNetwork::new();
    net.add("0 -> P", 10.0, None, &[]).unwrap();
    net.add("P -> 0", 0.5, None, &[]).unwrap();
    let p = net.species_id("P").unwrap();
    let t = 2.0;
    let v: Vec<f64> = run_ensemble(5000, 9, None, |_, rng| {
        let mut sim = Simulator::new(&net, rng);
        sim.advance(t).unwrap();
        sim.count(p) as f64
    });
    let expected = 20.0 * (1.0 - (-0.5 * t).exp());
    let (m, var) = mean_var(&v);
    assert!((m - expected).abs() < 4.0 * (expected / 5000.0).sqrt(), "{m} vs {expected}");
    assert!((var / expected - 1.0).abs() < 0.1);
}

#[test]
fn gated_immigration_counts_only_on_windows() {
    // Poisson with mean k times the total ON time inside [0, t_end].
    let mut net = ReactionNetwork::new();
    net.add("0 -> P", 4.0, Some(Signal::PilotMode), &[]).unwrap();
    net.set_schedule(SignalSchedule::new(Signal::PilotMode, vec![(0.5, 1.0), (2.0, 2.25), (3.0, 10.0)]).unwrap());
    let p = net.species_id("P").unwrap();
    let v: Vec<f64> = run_ensemble(4000, 3, None, |_, rng| {
        let mut sim = Simulator::new(&net, rng);
        sim.advance(4.0).unwrap();
        sim.count(p) as f64
    });
    let expected = 4.0 * (0.5 + 0.25 + 1.0);
    let (m, _) = mean_var(&v);
    assert!((m - expected).abs() < 4.0 * (expected / 4000.0).sqrt(), "{m} vs {expected}");
}

#[test]
fn ensemble_results_independent_of_worker_count() {
    let net = dimerization();
    let run = |workers| {
        run_ensemble(16, 77, Some(workers), |_, rng| {
            let mut sim = Simulator::new(&net, rng);
            sim.advance(2.0).unwrap();
            (sim.counts().to_vec(), sim.events())
        })
    };
    assert_eq!(run(1), run(4));
}

/// Random networks of conversions between the states of a few conserved
/// pools, with catalysts drawn from any species.
fn pooled_network() -> impl Strategy<Value = ReactionNetwork> {
    (2usize..5, prop::collection::vec((0usize..20, 0usize..20, 0usize..20, 0.1f64..5.0), 1..12), prop::collection::vec(0u64..6, 20))
        .prop_map(|(pools, reactions, init)| {
            let mut net = ReactionNetwork::new();
            let name = |i: usize| format!("S{}_{}", i / 3, i % 3);
            let species = pools * 3;
            for i in 0..species {
                net.add_species(&name(i), init[i]).unwrap();
            }
            for (a, b, c, k) in reactions {
                let (a, b, c) = (a % species, b % species, c % species);
                let to = a - a % 3 + b % 3;
                if to == a {
                    continue;
                }
                let cat = name(c);
                let cats: Vec<&str> = if c == a { vec![] } else { vec![cat.as_str()] };
                net.add(&format!("{} -> {}", name(a), name(to)), k, None, &cats).unwrap();
            }
            for p in 0..pools {
                let members: Vec<String> = (0..3).map(|j| name(3 * p + j)).collect();
                let refs: Vec<&str> = members.iter().map(String::as_str).collect();
                net.declare_pool(&format!("pool{p}"), &refs).unwrap();
            }
            net
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pools_hold_after_every_event(net in pooled_network(), seed in any::<u64>()) {
        prop_assert!(net.verify_pools_structurally().is_ok());
        let mut sim = Simulator::new(&net, realization_rng(seed, 0));
        sim.set_event_limit(Some(20_000));
        let mut bad = 0;
        let _ = sim.advance_observed(5.0, |e| {
            if net.check_pools(e.counts).is_err() {
                bad += 1;
            }
        });
        prop_assert_eq!(bad, 0);
    }

    #[test]
    fn same_seed_same_path(net in pooled_network(), seed in any::<u64>()) {
        let run = || {
            let mut sim = Simulator::new(&net, realization_rng(seed, 1));
            sim.set_event_limit(Some(5_000));
            let _ = sim.advance(3.0);
            (sim.counts().to_vec(), sim.events(), sim.firings().to_vec())
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn clock_ends_at_target(net in pooled_network(), seed in any::<u64>(), t in 0.0f64..2.0) {
        let mut sim = Simulator::new(&net, realization_rng(seed, 2));
        sim.set_event_limit(Some(50_000));
        if sim.advance(t).is_ok() {
            prop_assert_eq!(sim.time(), t);
        }
    }

    #[test]
    fn integral_bounded_by_extreme_counts(seed in any::<u64>(), k in 0.1f64..10.0) {
        let mut net = ReactionNetwork::new();
        net.add_species("A", 5).unwrap();
        net.add("A -> B", k, None, &[]).unwrap();
        net.add("B -> A", k, None, &[]).unwrap();
        let a = net.species_id("A").unwrap();
        let mut sim = Simulator::new(&net, realization_rng(seed, 3));
        sim.advance(4.0).unwrap();
        let i = sim.integral(a);
        prop_assert!((0.0..=20.0 + 1e-9).contains(&i));
    }
}
