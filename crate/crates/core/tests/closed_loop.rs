use windfarm_mpc::harness::{run, FrequencyProfile, LayoutSpec, ScenarioConfig};
use windfarm_mpc::mpc::ControllerMode;

fn column(count: usize, seconds: f64) -> ScenarioConfig {
    let mut c = ScenarioConfig::new(
        LayoutSpec {
            count,
            ..Default::default()
        },
        9.0,
    );
    c.simulation.duration = seconds;
    c
}

#[test]
fn single_turbine_settles_on_a_constant_reference() {
    let mut c = column(1, 200.0);
    c.wind.sigma = 0.0;
    c.frequency.profile = FrequencyProfile::Constant;
    c.dispatch.fraction = 0.5;
    let b = run(&c).unwrap();
    assert!(b.check().is_ok());
    let target = 0.5 * b.available_power;
    assert!(b.p_ref.iter().all(|&r| r == target));
    for k in 100..b.steps() {
        let rel = (b.p_total[k] - target).abs() / target;
        assert!(rel <= 5e-3, "step {k}: {rel}");
    }
    let last = *b.p_total.last().unwrap();
    assert!((last - target).abs() / target < 1e-6, "{last} vs {target}");
}

#[test]
fn single_turbine_recovers_from_a_step_in_the_command() {
    let mut c = column(1, 200.0);
    c.wind.sigma = 0.0;
    c.frequency.profile = FrequencyProfile::Constant;
    c.dispatch.schedule = vec![[0.0, 2.0], [50.0, 3.0]];
    let b = run(&c).unwrap();
    let err = (b.p_total[199] - 3.0e6).abs() / 3.0e6;
    assert!(err < 5e-3, "{err}");
}

#[test]
fn identical_runs_are_bit_identical() {
    let mut c = column(4, 120.0);
    c.wind.seed = 5;
    assert_eq!(run(&c).unwrap(), run(&c).unwrap());
}

#[test]
fn baseline_mode_matches_the_equivalent_proposed_weights() {
    let mut proposed = column(3, 80.0);
    proposed.mpc.weights.s = 1.0;
    proposed.mpc.weights.drop_r = true;
    let mut baseline = proposed.clone();
    baseline.mpc.mode = ControllerMode::Baseline;
    baseline.mpc.weights.s = 0.3;
    baseline.mpc.weights.drop_r = false;
    let a = run(&proposed).unwrap();
    let b = run(&baseline).unwrap();
    for (x, y) in a.dispatch.iter().zip(&b.dispatch) {
        for (p, q) in x.iter().zip(y) {
            assert!((p - q).abs() <= 1e-6 * p.abs().max(1.0), "{p} vs {q}");
        }
    }
}

#[test]
fn weights_do_not_touch_the_exogenous_inputs() {
    let a = column(3, 60.0);
    let mut b = a.clone();
    b.mpc.weights.w = 1e4;
    b.mpc.weights.s = 0.1;
    let (ra, rb) = (run(&a).unwrap(), run(&b).unwrap());
    assert_eq!(ra.freestream, rb.freestream);
    assert_eq!(ra.frequency, rb.frequency);
    assert_eq!(ra.p_command, rb.p_command);
}

#[test]
fn one_solve_per_step_and_energy_balance() {
    let b = run(&column(5, 90.0)).unwrap();
    assert_eq!(b.solver.len(), b.steps());
    assert_eq!(b.steps(), 90);
    for (row, total) in b.power.iter().zip(&b.p_total) {
        assert_eq!(row.iter().sum::<f64>(), *total);
    }
    assert!(b.solver.iter().all(|r| r.residuals.within(1e-6)));
}

#[test]
fn tracking_only_ignores_load_weights() {
    let mut a = column(3, 60.0);
    a.mpc.mode = ControllerMode::TrackingOnly;
    let mut b = a.clone();
    b.mpc.weights.w = 5e3;
    b.mpc.weights.s = 0.2;
    assert_eq!(run(&a).unwrap().dispatch, run(&b).unwrap().dispatch);
}

#[test]
fn realized_power_never_exceeds_what_the_wind_allows() {
    let b = run(&column(4, 120.0)).unwrap();
    let p = &b.config.turbine;
    for (pw, u) in b.power.iter().zip(&b.wind) {
        for (&pi, &ui) in pw.iter().zip(u) {
            let cap = windfarm_mpc::turbine::power(p.ct_max(), ui, p).unwrap();
            assert!(pi <= cap * (1.0 + 1e-12));
        }
    }
}
