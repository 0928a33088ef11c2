use stochcool::sim::run_summarized;
use stochcool::{
    delta_e_total, run_replicas, CloudParams64, MeasurementSetting64, PhasePolicy, ProtocolSetup64,
    ScaledGeometry64,
};

fn setup(n: f64, l2: f64, s: f64, d: f64) -> ProtocolSetup64 {
    ProtocolSetup64::gaussian(
        &ScaledGeometry64::new(s, d).unwrap(),
        &CloudParams64::new(n, l2).unwrap(),
        &MeasurementSetting64::Optimal,
        None,
        PhasePolicy::Random,
    )
    .unwrap()
}

#[test]
fn repeated_cycles_keep_lowering_the_mean_energy() {
    let summary = run_summarized(&setup(100.0, 200.0, 2.0, 0.0), 0, 2000, 50, 17, 0).summary;
    let energies: Vec<f64> = summary.iter().map(|s| s.e_total_after.mean).collect();
    assert!(energies.windows(2).all(|w| w[1] < w[0]), "{energies:?}");
    assert!(summary[0].e_total_before.mean > energies[49]);
}

#[test]
fn first_cycle_matches_the_closed_form_budget() {
    let geom = ScaledGeometry64::new(1.0, 1.0).unwrap();
    let cloud = CloudParams64::new(50.0, 100.0).unwrap();
    let expected = delta_e_total(&geom, &cloud, &MeasurementSetting64::Optimal).unwrap();
    let run = run_replicas(&setup(50.0, 100.0, 1.0, 1.0), 20_000, 1, 3, 0).unwrap();
    let first = &run.summarize()[0];
    assert!(
        first.de_perp.z_score(expected.de_perp) < 4.0,
        "{:?} vs {}",
        first.de_perp,
        expected.de_perp
    );
    assert!(
        first.de_total.z_score(expected.de_total) < 4.0,
        "{:?} vs {}",
        first.de_total,
        expected.de_total
    );
}

#[test]
fn streaming_summary_matches_the_full_run() {
    let s = setup(20.0, 30.0, 1.0, 0.5);
    let full = run_replicas(&s, 3000, 3, 8, 0).unwrap();
    let streamed = run_summarized(&s, 0, 3000, 3, 8, 2);
    for (a, b) in full.summarize().iter().zip(&streamed.summary) {
        for (x, y) in [
            (a.e_total_after, b.e_total_after),
            (a.de_par, b.de_par),
            (a.de_perp, b.de_perp),
        ] {
            assert_eq!(x.count, y.count);
            assert!(
                (x.mean - y.mean).abs() <= 1e-12 * x.mean.abs().max(1.0),
                "{x:?} vs {y:?}"
            );
            assert!((x.std_error - y.std_error).abs() <= 1e-9 * x.std_error);
        }
    }
    assert_eq!(full.records[..2], streamed.kept[..]);
}
