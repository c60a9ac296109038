mod common;

use common::*;
use mwstab::adversary::ZeroInjection;
use mwstab::engine::{run_from, RunOptions};
use mwstab::model::{
    apply_decision, apply_injections, potential, InjectionEvent, NetworkSpec, QueueMatrix, ScheduleDecision,
};
use mwstab::scheduler::{max_weight_approx, max_weight_exact, ApproxParams};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_events<R: Rng>(rng: &mut R, spec: &NetworkSpec, t: u64, first_id: u64) -> Vec<InjectionEvent> {
    (0..rng.random_range(0..4))
        .map(|i| InjectionEvent {
            packet_id: first_id + i,
            slot: t,
            node: rng.random_range(0..spec.node_count()),
            destination: spec.destinations()[rng.random_range(0..spec.dest_count())],
            size: rng.random_range(0.1..2.0),
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn slot_conserves_mass_and_stays_nonnegative(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random_spec(&mut rng, 6, 10);
        let mut q = random_queues(&mut rng, &spec, 10.0);
        let mut next = 0;
        for t in 0..50 {
            let rs = random_matching(&mut rng, &spec);
            let dec = max_weight_exact(&spec, &q, &rs);
            let before = q.total();
            let mut out = apply_decision(&spec, &mut q, &dec).unwrap();
            let events = random_events(&mut rng, &spec, t, next);
            next += events.len() as u64;
            out += apply_injections(&spec, &mut q, &events).unwrap();
            let injected: f64 = events.iter().map(|e| e.size).sum();
            prop_assert!((q.total() - (before + injected - out)).abs() <= 1e-9 * (1.0 + before));
            prop_assert!(q.as_slice().iter().all(|&x| x >= 0.0));
            for (v, row) in (0..spec.node_count()).map(|v| (v, q.row(v))) {
                if let Some(di) = spec.dest_index(v) {
                    prop_assert_eq!(row[di], 0.0);
                }
            }
        }
    }

    #[test]
    fn single_transfer_preserves_order(seed in any::<u64>(), frac in 0.0f64..=1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random_spec(&mut rng, 6, 10);
        let mut q = random_queues(&mut rng, &spec, 10.0);
        let e = rng.random_range(0..spec.edge_count());
        let di = rng.random_range(0..spec.dest_count());
        let (v, u) = spec.edge(e);
        let gap = q.get(v, di) - q.get(u, di);
        prop_assume!(gap > 0.0);
        let mut dec = ScheduleDecision::zero(spec.edge_count());
        dec.rates[e] = gap;
        dec.dest[e] = Some(di);
        dec.transfer[e] = frac * gap / 2.0;
        let (d, src) = (spec.destinations()[di], v);
        apply_decision(&spec, &mut q, &dec).unwrap();
        // A transfer into the destination is absorbed, so only compare
        // when neither end is pinned.
        if u != d && src != d {
            prop_assert!(q.get(v, di) >= q.get(u, di) - 1e-12);
        }
    }

    #[test]
    fn potential_ignores_labels(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random_spec(&mut rng, 6, 10);
        let q = random_queues(&mut rng, &spec, 10.0);
        let n = spec.node_count();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let mut dperm: Vec<usize> = (0..spec.dest_count()).collect();
        dperm.shuffle(&mut rng);
        // Destination column i of the new spec is old column dperm[i].
        let dests: Vec<usize> = dperm.iter().map(|&i| perm[spec.destinations()[i]]).collect();
        let edges = spec.edges().iter().map(|&(a, b)| (perm[a], perm[b])).collect();
        let spec2 = NetworkSpec::new(n, edges, dests, spec.beta(), spec.r_min(), spec.r_max()).unwrap();
        let mut rows = vec![vec![0.0; spec.dest_count()]; n];
        for v in 0..n {
            for (i, &old) in dperm.iter().enumerate() {
                rows[perm[v]][i] = q.get(v, old);
            }
        }
        let q2 = QueueMatrix::from_rows(&spec2, &rows).unwrap();
        let (p1, p2) = (potential(&q, spec.beta()), potential(&q2, spec.beta()));
        prop_assert!((p1 - p2).abs() <= 1e-9 * (1.0 + p1));
        // The optimum is label-free too.
        let caps: Vec<f64> = (0..spec.edge_count()).map(|_| rng.random_range(0.5..2.0)).collect();
        let rs = mwstab::model::RateSet::matching(caps);
        let j1 = max_weight_exact(&spec, &q, &rs).objective(&spec, &q);
        let j2 = max_weight_exact(&spec2, &q2, &rs).objective(&spec2, &q2);
        prop_assert!((j1 - j2).abs() <= 1e-9 * (1.0 + j1));
    }

    #[test]
    fn exact_matches_brute_force(seed in any::<u64>(), explicit in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random_spec(&mut rng, 6, 12);
        let q = random_queues(&mut rng, &spec, 10.0);
        let rs = if explicit { random_explicit(&mut rng, &spec, 20) } else { random_matching(&mut rng, &spec) };
        let dec = max_weight_exact(&spec, &q, &rs);
        dec.check(&spec, &q).unwrap();
        prop_assert!(rs.contains(&spec, &dec.rates));
        let got = dec.objective(&spec, &q);
        let want = brute_force_objective(&spec, &q, &rs);
        prop_assert!((got - want).abs() <= 1e-9 * (1.0 + want), "got {got} want {want}");
    }

    #[test]
    fn approx_keeps_its_floor(seed in any::<u64>(), eps_hat in 0.0f64..0.9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random_spec(&mut rng, 6, 10);
        let q = random_queues(&mut rng, &spec, 10.0);
        let rs = random_matching(&mut rng, &spec);
        let ap = ApproxParams::degrade(eps_hat).unwrap();
        let exact = max_weight_exact(&spec, &q, &rs).objective(&spec, &q);
        let dec = max_weight_approx(&spec, &q, &rs, &ap, &mut rng);
        dec.check(&spec, &q).unwrap();
        let got = dec.objective(&spec, &q);
        prop_assert!(got >= (1.0 - eps_hat) * exact - 1e-12 * (1.0 + exact));
        prop_assert!(got <= exact + 1e-12 * (1.0 + exact));
    }

    #[test]
    fn no_injections_no_potential_rise(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random_spec(&mut rng, 6, 10);
        let q = random_queues(&mut rng, &spec, 20.0);
        let rs = random_matching(&mut rng, &spec);
        let mut adv = ZeroInjection::new(rs);
        let trace = run_from(&spec, &mut adv, &RunOptions::new(200), q).unwrap();
        let mut prev = trace.initial_potential;
        for r in &trace.records {
            prop_assert!(r.potential <= prev + 1e-9);
            prev = r.potential;
        }
    }

    #[test]
    fn zero_queues_zero_decision(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random_spec(&mut rng, 6, 10);
        let q = QueueMatrix::zeros(&spec);
        let rs = random_matching(&mut rng, &spec);
        let dec = max_weight_exact(&spec, &q, &rs);
        prop_assert_eq!(dec.objective(&spec, &q), 0.0);
        prop_assert!(dec.transfer.iter().all(|&s| s == 0.0));
        prop_assert_eq!(&dec, &max_weight_exact(&spec, &q, &rs));
    }
}
