use ncauth_core::analytics::{self, coding_relay_prob, EnergyConstants};
use ncauth_core::generate::{random_instance, random_strategy};
use ncauth_core::io::{format_sig, network_to_json, parse_network};
use ncauth_core::optimizer::{enumerate_strategies, optimize_energy, optimize_energy_best_throughput, SearchOptions};
use ncauth_core::{butterfly, AttackTopology, MacMode, NetworkStrategy, NodeId};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const C: EnergyConstants = EnergyConstants::SENSOR_NODE;

fn butterfly_attacks(probs: &[f64]) -> AttackTopology {
    let g = butterfly();
    AttackTopology::new(
        &g,
        (0..g.edge_count()).map(|e| {
            let (u, v) = g.edge_ids(e);
            ((u.clone(), v.clone()), probs[e])
        }),
    )
    .unwrap()
}

proptest! {
    #[test]
    fn xaf_never_forwards_more_than_axf(inputs in prop::collection::vec(0.0..=1.0f64, 2..6)) {
        let xaf = coding_relay_prob(true, MacMode::Xaf, &inputs).unwrap();
        let axf = coding_relay_prob(true, MacMode::Axf, &inputs).unwrap();
        prop_assert!(xaf <= axf + 1e-15);
        prop_assert!((0.0..=1.0).contains(&xaf) && (0.0..=1.0).contains(&axf));
    }

    #[test]
    fn butterfly_optimum_is_minimal(probs in prop::collection::vec(0.0..=1.0f64, 7)) {
        let g = butterfly();
        let a = butterfly_attacks(&probs);
        let best = optimize_energy(&g, &a, &C, &SearchOptions::default()).unwrap();
        for s in enumerate_strategies(&g) {
            let (_, e) = analytics::evaluate(&g, &a, &s, &C).unwrap();
            prop_assert!(best.energy.total <= e.total + 1e-12);
        }
        let t = optimize_energy_best_throughput(&g, &a, &C, &SearchOptions::default()).unwrap();
        prop_assert!(t.throughput >= best.throughput - 1e-9);
        prop_assert!(t.energy.total >= best.energy.total - 1e-12);
    }

    #[test]
    fn authentication_stops_downstream_pollution(probs in prop::collection::vec(0.0..=1.0f64, 7)) {
        let g = butterfly();
        let a = butterfly_attacks(&probs);
        let s = NetworkStrategy::parse(&g, "C=XAF,D=AF").unwrap();
        let st = analytics::propagate(&g, &a, &s).unwrap();
        let p = |u: &str, v: &str| st.pollute_of(&g, &NodeId::from(u), &NodeId::from(v)).unwrap();
        // only the attack on the outgoing link itself can pollute it
        prop_assert!(p("C", "D") <= probs[g.find_edge(&"C".into(), &"D".into()).unwrap()] + 1e-15);
        prop_assert!(p("D", "E") <= probs[g.find_edge(&"D".into(), &"E".into()).unwrap()] + 1e-15);
    }

    #[test]
    fn random_networks_survive_the_emitter(seed in 0u64..5000) {
        let (g, a) = random_instance(seed);
        let doc = parse_network(&network_to_json(&g, &a)).unwrap();
        prop_assert_eq!(doc.graph, g);
        prop_assert_eq!(doc.attacks, a);
    }

    #[test]
    fn energy_is_positive_and_bounded(seed in 0u64..5000) {
        let (g, a) = random_instance(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_strategy(&g, &mut rng);
        let (_, e) = analytics::evaluate(&g, &a, &s, &C).unwrap();
        // every node acts at most once per incoming edge plus once on output
        let per_action = C.q_t + C.q_r + C.q_a + C.q_xor;
        let bound = (g.node_count() + g.edge_count()) as f64 * per_action;
        prop_assert!(e.total > 0.0 && e.total <= bound);
    }

    #[test]
    fn twelve_digits_round_trip(x in -1e6..1e6f64) {
        let back: f64 = format_sig(x, 12).parse().unwrap();
        prop_assert!((back - x).abs() <= 1e-11 * x.abs().max(1e-300));
    }
}
