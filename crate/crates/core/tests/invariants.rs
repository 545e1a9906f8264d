use fairline_core::aoi::{self, RateSet};
use fairline_core::fairness;
use fairline_core::metrics;
use fairline_core::moead::{self, ObjectiveVector, ParetoArchive, Solution};
use fairline_core::scenario::{Scenario, WindowVector};
use proptest::prelude::*;

fn rates_strategy() -> impl Strategy<Value = RateSet> {
    (1usize..=4).prop_flat_map(|n| {
        (
            prop::collection::vec(0.5f64..20.0, n),
            prop::collection::vec(0.1f64..10.0, n),
            prop::collection::vec(prop::collection::vec(0.0f64..5.0, n), n),
        )
            .prop_map(|(h, r, mut p)| {
                for (i, row) in p.iter_mut().enumerate() {
                    row[i] = 0.0;
                }
                RateSet::new(h, r, p).unwrap()
            })
    })
}

fn windows_strategy(n: usize) -> impl Strategy<Value = WindowVector> {
    prop::collection::vec(20.0f64..=150.0, n).prop_map(WindowVector::new)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn stationary_distribution_is_a_distribution(rates in rates_strategy()) {
        let (pi, c) = aoi::stationary_distribution(&rates).unwrap();
        prop_assert!(pi.iter().all(|&x| x > 0.0));
        prop_assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!((pi[0] - 1.0 / c).abs() < 1e-12);
    }

    #[test]
    fn age_is_positive_and_scales_inversely(rates in rates_strategy(), c in 0.05f64..20.0) {
        for k in 0..rates.len() {
            let a = aoi::link_aoi(k, &rates).unwrap();
            prop_assert!(a > 0.0 && a.is_finite());
            let b = aoi::link_aoi(k, &rates.scaled(c)).unwrap();
            prop_assert!((b * c - a).abs() <= 1e-9 * a);
        }
    }

    #[test]
    fn age_is_bounded_below_by_service_and_arrival(rates in rates_strategy()) {
        // Every update takes at least an arrival wait and a service time.
        for k in 0..rates.len() {
            let a = aoi::link_aoi(k, &rates).unwrap();
            prop_assert!(a >= 1.0 / rates.h[k], "{a} vs {}", 1.0 / rates.h[k]);
        }
    }

    #[test]
    fn network_age_is_mean_of_links(rates in rates_strategy()) {
        let sol = aoi::shs_solution(&rates).unwrap();
        let mean = sol.per_link_aoi.iter().sum::<f64>() / rates.len() as f64;
        prop_assert!((sol.network_aoi - mean).abs() <= 1e-12 * mean);
    }

    #[test]
    fn collision_is_a_symmetric_probability(wi in 20.0f64..=150.0, wj in 20.0f64..=150.0) {
        let s = Scenario::default_highway();
        let a = fairness::collision_probability(wi, wj, &s).unwrap();
        let b = fairness::collision_probability(wj, wi, &s).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!((a - b).abs() <= 1e-15);
    }

    #[test]
    fn report_is_consistent(w in windows_strategy(3)) {
        let s = Scenario::default_highway();
        let r = fairness::fairness_report(&w, &s).unwrap();
        prop_assert!(r.per_vehicle_prr.iter().all(|p| (0.0..=1.0).contains(p)));
        let mean = r.per_vehicle_index.iter().sum::<f64>() / 3.0;
        prop_assert!((r.network_index - mean).abs() < 1e-15);
        let obj = moead::evaluate_objectives(&w, &s).unwrap();
        prop_assert_eq!(obj.deviations(), r.per_vehicle_deviation.as_slice());
    }

    #[test]
    fn archive_stays_nondominated(points in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 3), 1..60)) {
        let mut archive = ParetoArchive::new(3);
        for p in &points {
            archive.insert(Solution { windows: WindowVector::uniform(1, 20.0), objectives: ObjectiveVector(p.clone()) });
        }
        prop_assert!(archive.is_mutually_nondominated());
        // Every input point is weakly dominated by something kept.
        for p in &points {
            let p = ObjectiveVector(p.clone());
            prop_assert!(archive.entries().iter().any(|s| s.objectives.weakly_dominates(&p)));
        }
    }

    #[test]
    fn hypervolume_ignores_dominated_points(points in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 3), 1..25)) {
        let reference = [1.1; 3];
        let mut archive = ParetoArchive::new(3);
        for p in &points {
            archive.insert(Solution { windows: WindowVector::uniform(1, 20.0), objectives: ObjectiveVector(p.clone()) });
        }
        let all = metrics::hypervolume(&points, &reference).value;
        let front = metrics::hypervolume(&archive.objectives(), &reference).value;
        prop_assert!((all - front).abs() <= 1e-12);
    }
}

#[test]
fn scenario_survives_json_round_trip() {
    let s = Scenario::default_highway();
    let back = Scenario::from_json(&s.to_json()).unwrap();
    let w = WindowVector::new(vec![30.0, 90.0, 140.0]);
    assert_eq!(moead::evaluate_objectives(&w, &s).unwrap(), moead::evaluate_objectives(&w, &back).unwrap());
}

#[test]
fn scenario_loads_from_file_and_rejects_unknown_fields() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    std::fs::write(&path, Scenario::default_highway().to_json()).unwrap();
    assert_eq!(Scenario::load(&path).unwrap().num_vehicles(), 3);

    let mut v: serde_json::Value = serde_json::from_str(&Scenario::default_highway().to_json()).unwrap();
    v["bogus"] = serde_json::json!(1);
    std::fs::write(&path, v.to_string()).unwrap();
    assert!(Scenario::load(&path).is_err());
}
