//! Sampled sweeps against exact sweeps.

use qed_core::experiments::{fig2b_sweep, fig3a_sweep, SweepRow, SweepSpec};

fn paired(spec: &SweepSpec, sweep: fn(&SweepSpec) -> qed_core::Result<Vec<SweepRow>>) -> Vec<(SweepRow, SweepRow)> {
    let exact = sweep(&SweepSpec { shots: 0, ..spec.clone() }).unwrap();
    let sampled = sweep(spec).unwrap();
    exact.into_iter().zip(sampled).collect()
}

#[test]
fn no_storage_sweep_converges_within_bound() {
    let shots = 10_000;
    let spec = SweepSpec {
        shots,
        seed: 21,
        ..SweepSpec::default()
    };
    let bound = 4.0 / (shots as f64).sqrt();
    for (e, s) in paired(&spec, fig2b_sweep) {
        let d = (e.value.unwrap() - s.value.unwrap()).abs();
        assert!(d < bound, "p={:?}: |delta| = {d} exceeds {bound}", e.p);
    }
}

#[test]
fn storage_sweep_is_statistically_consistent() {
    let spec = SweepSpec {
        shots: 10_000,
        seed: 22,
        ..SweepSpec::default()
    };
    for (e, s) in paired(&spec, fig3a_sweep) {
        let d = (e.value.unwrap() - s.value.unwrap()).abs();
        match s.stderr {
            Some(sigma) => assert!(d < 4.0 * sigma, "p={:?} tau={}: {d} vs sigma {sigma}", e.p, e.tau2_us),
            // free-decay baselines are exact
            None => assert_eq!(d, 0.0),
        }
    }
}

#[test]
fn error_bars_grow_with_strength() {
    let spec = SweepSpec {
        p_grid: vec![0.0, 0.875],
        shots: 3000,
        seed: 5,
        ..SweepSpec::default()
    };
    let rows = fig3a_sweep(&spec).unwrap();
    for tau in [0.9, 1.7, 3.0] {
        let at = |p: f64| {
            rows.iter()
                .find(|r| r.p == Some(p) && r.tau2_us == tau)
                .and_then(|r| r.stderr)
                .unwrap()
        };
        assert!(at(0.875) > at(0.0), "tau={tau}");
    }
}

#[test]
fn sampling_depends_on_seed_only() {
    let spec = SweepSpec {
        p_grid: vec![0.5],
        shots: 500,
        seed: 3,
        ..SweepSpec::default()
    };
    let a = fig3a_sweep(&spec).unwrap();
    assert_eq!(a, fig3a_sweep(&spec).unwrap());
    let b = fig3a_sweep(&SweepSpec { seed: 4, ..spec.clone() }).unwrap();
    assert_ne!(a, b);
}
