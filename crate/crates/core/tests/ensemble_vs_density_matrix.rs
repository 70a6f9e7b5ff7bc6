use qflock_core::model::ModelParams;
use qflock_core::oracle::{integrate, DensityMatrix, DEFAULT_DT};
use qflock_core::trajectory::{initial_state, uniform_times, InitialState, TrajectoryConfig, TrajectoryRunner};
use std::sync::Arc;

fn compare(params: &ModelParams, t_max: f64, trajectories: u64) {
    let mut cfg = TrajectoryConfig::new(t_max, 11);
    cfg.sample_times = uniform_times(t_max, 1.0);
    let runner = TrajectoryRunner::new(params, &cfg).unwrap();
    let series = runner.run_range(0..trajectories).unwrap();

    let basis = Arc::new(params.basis().unwrap());
    let psi0 = initial_state(basis, InitialState::PlusProduct).unwrap();
    let rhos = integrate(&DensityMatrix::from_pure(&psi0), params, series.times(), DEFAULT_DT).unwrap();
    for (k, rho) in rhos.iter().enumerate() {
        let exact = rho.magnetization_moment(2);
        let est = series.m2(k);
        let sigma = est.error.max(1e-9);
        assert!(
            (est.value - exact).abs() <= 4.0 * sigma,
            "t={} traj={} exact={} se={}",
            series.times()[k],
            est.value,
            exact,
            est.error
        );
    }
}

#[test]
fn two_site_single_particle_matches_master_equation() {
    let p = ModelParams::new(2).with_particles(1).with_h(0.5).with_alignment(1.0);
    compare(&p, 5.0, 1500);
}

#[test]
fn four_site_pair_matches_master_equation() {
    let p = ModelParams::new(4).with_particles(2).with_h(0.5).with_alignment(2.0);
    compare(&p, 6.0, 600);
}
