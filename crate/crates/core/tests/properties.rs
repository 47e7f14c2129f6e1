use hypersep_core::geometry::{compute_ov, OpCount};
use hypersep_core::index::{code_of, QuadrantIndex};
use hypersep_core::oracle::{audit_bits, side_signs, verify_all_separated, verify_state};
use hypersep_core::persist;
use hypersep_core::sequence::{encode_prefix, WorldLine};
use hypersep_core::{Endgame, EngineConfig, Hyperplane, Point, SeparationState, TauMode};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Small integer grids, so duplicates and exact incidences do happen.
fn cloud() -> impl Strategy<Value = (usize, Vec<Point>)> {
    (1usize..=4).prop_flat_map(|n| {
        prop::collection::vec(prop::collection::vec(-6i32..=6, n), 1..60)
            .prop_map(move |rows| (n, rows.into_iter().enumerate().map(|(i, r)| Point::new(i as u64, r.into_iter().map(f64::from).collect())).collect()))
    })
}

fn config() -> impl Strategy<Value = EngineConfig> {
    (any::<bool>(), any::<bool>()).prop_map(|(pi, synthetic)| EngineConfig {
        tau: if pi { TauMode::PiRatio } else { TauMode::Off },
        endgame: if synthetic { Endgame::Synthetic } else { Endgame::Step7 },
        ..EngineConfig::default()
    })
}

fn solve(n: usize, pts: Vec<Point>, config: EngineConfig, seed: u64) -> SeparationState {
    let mut s = SeparationState::new(n, config, seed).unwrap();
    let mut rng = s.next_rng();
    s.run(pts, &mut rng).unwrap();
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn every_run_ends_separated((n, pts) in cloud(), config in config(), seed in any::<u64>()) {
        let total = pts.len();
        let s = solve(n, pts, config, seed);
        prop_assert_eq!(s.check_invariants(), Ok(()));
        let rep = verify_state(&s);
        prop_assert!(rep.ok, "{:?}", rep.violation);
        prop_assert!(audit_bits(&s).ok);
        prop_assert!(s.pending().is_empty() && s.parked().is_empty());
        prop_assert_eq!(s.counter(), 0);
        prop_assert_eq!(s.len() - s.synthetic_count() + s.dustbin().len(), total);
        for e in s.events() {
            prop_assert!(e.residual <= 1e-8 * e.residual_scale, "plane {} residual {}", e.plane, e.residual);
            prop_assert!(e.n_moved >= 1);
        }
    }

    #[test]
    fn same_seed_same_file((n, pts) in cloud(), seed in any::<u64>()) {
        let a = persist::to_json(&solve(n, pts.clone(), EngineConfig::default(), seed));
        let b = persist::to_json(&solve(n, pts, EngineConfig::default(), seed));
        prop_assert_eq!(a, b);
    }

    #[test]
    fn state_files_round_trip((n, pts) in cloud(), cut in 0usize..60, seed in any::<u64>()) {
        // stop part way through by feeding points one at a time
        let mut s = SeparationState::new(n, EngineConfig::default(), seed).unwrap();
        let mut rng = s.next_rng();
        let cut = cut.min(pts.len());
        s.run(pts[..cut.max(1)].to_vec(), &mut rng).unwrap();
        for p in pts.into_iter().skip(cut.max(1)).take(5) {
            s.insert_point(p, &mut rng).unwrap();
        }
        let text = persist::to_json(&s);
        let back = persist::from_json(&text).unwrap();
        prop_assert_eq!(back.check_invariants(), Ok(()));
        prop_assert_eq!(persist::to_json(&back), text);
        prop_assert_eq!(back.counter(), s.counter());
    }

    #[test]
    fn distinct_codes_iff_oracle_separates((n, pts) in cloud(), planes in 0usize..6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let planes: Vec<Hyperplane> = (0..planes)
            .map(|j| Hyperplane::new(j, (0..n).map(|_| rng.random_range(0.05..1.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect(), false))
            .collect();
        let refs: Vec<&Point> = pts.iter().collect();
        let report = verify_all_separated(&refs, &planes, TauMode::Off);
        let ovs: Option<Vec<_>> = pts.iter().map(|p| compute_ov(p, &planes, Default::default()).ok()).collect();
        match ovs {
            None => prop_assert!(!report.ok),
            Some(ovs) => {
                let distinct: std::collections::HashSet<_> = ovs.iter().collect();
                prop_assert_eq!(distinct.len() == ovs.len(), report.ok);
            }
        }
    }

    #[test]
    fn queries_match_exact_codes((n, pts) in cloud(), seed in any::<u64>(), probes in prop::collection::vec(prop::collection::vec(-8.0f64..8.0, 4), 1..20)) {
        let s = solve(n, pts, EngineConfig::default(), seed);
        let index = QuadrantIndex::build(&s, |_| Vec::new()).unwrap();
        prop_assert_eq!(index.occupied(), index.len());
        for sp in s.s_points().iter().filter(|sp| !sp.synthetic) {
            let hits = index.query(&sp.point.coords).unwrap();
            prop_assert_eq!(hits.len(), 1);
            prop_assert_eq!(hits[0].point_id, sp.point.id);
        }
        for probe in probes {
            let x = &probe[..n];
            let code = code_of(x, s.planes());
            let mut ops = OpCount::default();
            let (got, hits) = index.query_counted(x, &mut ops).unwrap();
            prop_assert_eq!(&got, &code);
            prop_assert_eq!(ops.multiplications, (s.q() * n) as u64);
            prop_assert_eq!(ops.additions, (s.q() * n) as u64);
            for r in hits {
                let stored = &s.s_point(r.point_id).unwrap().point.coords;
                prop_assert_eq!(code_of(stored, s.planes()), code.clone());
            }
        }
    }

    #[test]
    fn append_and_lift_keep_the_past((n, pts) in cloud(), extra in prop::collection::vec(prop::collection::vec(-6i32..=6, 4), 0..20), r in 1usize..3, seed in any::<u64>()) {
        let mut s = solve(n, pts, EngineConfig::default(), seed);
        let before = s.planes().to_vec();
        let extra: Vec<Point> = extra.into_iter().enumerate().map(|(i, c)| Point::new(1000 + i as u64, c[..n].iter().map(|&v| f64::from(v) + 0.5).collect())).collect();
        let mut rng = s.next_rng();
        s.append_points(extra, &mut rng).unwrap();
        prop_assert_eq!(&s.planes()[..before.len()], &before[..]);
        prop_assert!(verify_state(&s).ok);

        let codes = persist::codes(&s);
        let values: Vec<Vec<f64>> = s.s_points().iter().map(|sp| s.planes().iter().map(|h| h.value(&sp.point.coords)).collect()).collect();
        s.lift_dimension(r).unwrap();
        prop_assert_eq!(persist::codes(&s), codes);
        for (sp, old) in s.s_points().iter().zip(values) {
            let new: Vec<f64> = s.planes().iter().map(|h| h.value(&sp.point.coords)).collect();
            prop_assert_eq!(new.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), old.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        }
    }

    #[test]
    fn zero_padding_is_invisible_to_short_planes(values in prop::collection::vec(-100.0f64..100.0, 1..8), extra in 1usize..5, coeffs in prop::collection::vec(-1.0f64..1.0, 8)) {
        let s = values.len();
        let w = WorldLine::new(1, values, s + extra).unwrap();
        for k in 1..=s {
            let long = encode_prefix(&w, k, 0).unwrap();
            let short = WorldLine::new(1, w.values[..k].to_vec(), k).unwrap();
            let short = encode_prefix(&short, k, 0).unwrap();
            let mut a = coeffs[..k].to_vec();
            if a.iter().all(|&c| c == 0.0) {
                a[0] = 1.0;
            }
            let h_short = Hyperplane::new(0, a.clone(), false);
            a.resize(s + extra, 0.0);
            let h_long = Hyperplane::new(0, a, false);
            prop_assert_eq!(h_long.value(&long.coords).to_bits(), h_short.value(&short.coords).to_bits());
            prop_assert_eq!(side_signs(&long.coords, &[h_long], TauMode::Off), side_signs(&short.coords, &[h_short], TauMode::Off));
        }
    }
}
