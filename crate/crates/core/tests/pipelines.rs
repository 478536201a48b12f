use physml::distmatch::mmd;
use physml::sindy::{discover, DiscoverOptions, TermLibrary};
use physml::synth::{logistic_simulate, make_biased_lai_dataset, mexico_system, ode_simulate, LogisticMapParams};
use physml::{KernelConfig, RngStream};
use proptest::prelude::*;

#[test]
fn same_stream_gives_identical_datasets() {
    let a = make_biased_lai_dataset(&RngStream::new(5, 1), 12, 40).unwrap();
    let b = make_biased_lai_dataset(&RngStream::new(5, 1), 12, 40).unwrap();
    assert_eq!(a.0.inputs(), b.0.inputs());
    assert_eq!(a.1.targets(), b.1.targets());
    let c = make_biased_lai_dataset(&RngStream::new(5, 2), 12, 40).unwrap();
    assert_ne!(a.0.targets(), c.0.targets());
}

#[test]
fn planted_system_is_rediscovered_from_its_own_trajectory() {
    let sys = mexico_system(0.3, 1e-3);
    let traj = ode_simulate(&sys, &[-0.1, 0.1]).unwrap();
    let lib = TermLibrary::new(2, 2);
    let opts = DiscoverOptions {
        threshold: 5.0,
        ridge: 0.0,
        smoothing_window: 1,
        max_iters: 20,
    };
    let model = discover(&traj, 1e-3, &lib, &opts).unwrap();
    for i in 0..lib.len() {
        for j in 0..2 {
            assert_eq!(model.xi[(i, j)] == 0.0, sys.rhs[(i, j)] == 0.0, "support differs at {}", lib.term_name(i));
        }
    }
}

#[test]
fn logistic_series_stays_positive_for_default_truth() {
    let y = logistic_simulate(&LogisticMapParams::default(), &RngStream::new(1, 0)).unwrap();
    assert!(y.iter().all(|v| *v > 0.0 && v.is_finite()));
}

proptest! {
    #[test]
    fn mmd_of_a_sample_with_itself_is_zero(xs in prop::collection::vec(-5.0f64..5.0, 1..30)) {
        let k = KernelConfig::new(vec![1.0], 1.0).unwrap();
        prop_assert!(mmd(&xs, &xs, &k).unwrap().value.abs() < 1e-12);
    }

    #[test]
    fn mmd_is_nonnegative(
        a in prop::collection::vec(-5.0f64..5.0, 1..20),
        b in prop::collection::vec(-5.0f64..5.0, 1..20),
    ) {
        let k = KernelConfig::new(vec![0.7], 1.3).unwrap();
        prop_assert!(mmd(&a, &b, &k).unwrap().value > -1e-12);
    }
}
