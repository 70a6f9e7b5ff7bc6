//! Execution of each run mode into a [`ResultBundle`].

use crate::analysis::trace_distance;
use crate::config::{FieldInit, Mode, RunConfig};
use crate::ensemble::{map_jobs, run_ensemble};
use crate::output::{num, ResultBundle, Table};
use crate::scan::{estimate_transition, ScanPoint, TransitionEstimate};
use anyhow::Context;
use qflock_core::classical::{kolmogorov_rates, run_history, ClassicalChain, CycleSpec};
use qflock_core::clustering::{cluster_gamma, gamma_histogram, ClusterStats, Histogram};
use qflock_core::fock::Species;
use qflock_core::hydro::{
    homogeneous_m2, homogeneous_stability, integrate_fields, profile_peak, spatial_std, FieldState,
};
use qflock_core::model::ModelParams;
use qflock_core::observables::ObservableSeries;
use qflock_core::oracle::{integrate, DensityMatrix};
use qflock_core::rng::{stream, Purpose};
use qflock_core::trajectory::{initial_state, TrajectoryConfig, TrajectoryRunner};
use serde_json::json;
use std::sync::Arc;

pub fn run_mode(config: &RunConfig, threads: usize) -> anyhow::Result<ResultBundle> {
    match config.mode {
        Mode::Trajectory => trajectory(config, threads),
        Mode::OracleCompare => oracle_compare(config, threads),
        Mode::PhaseScan => phase_scan(config, threads),
        Mode::Hydro => hydro(config),
        Mode::Classical => classical(config, threads),
        Mode::Kolmogorov => kolmogorov(config),
    }
}

/// Ensemble of `config.run.trajectories` trajectories for `params`.
pub fn ensemble(
    params: &ModelParams,
    tcfg: &TrajectoryConfig,
    trajectories: u64,
    threads: usize,
) -> anyhow::Result<ObservableSeries> {
    let runner = TrajectoryRunner::new(params, tcfg)?;
    run_ensemble(&runner, 0..trajectories, threads)
}

pub fn moments_table(series: &ObservableSeries) -> Table {
    let mut t = Table::new(
        "moments",
        &["t", "M", "M_err", "M2", "M2_err", "M4", "M4_err", "U", "U_err"],
    );
    for (k, &time) in series.times().iter().enumerate() {
        let (m1, m2, m4) = (series.magnetization(k), series.m2(k), series.m4(k));
        let (u, ue) = series.binder(k).map_or((f64::NAN, f64::NAN), |e| (e.value, e.error));
        t.push_nums(&[time, m1.value, m1.error, m2.value, m2.error, m4.value, m4.error, u, ue]);
    }
    t
}

pub fn coherence_table(series: &ObservableSeries) -> Table {
    let mut t = Table::new("coherence", &["t", "C"]);
    for (time, c) in series.coherence_series() {
        t.push_nums(&[time, c]);
    }
    t
}

/// Pooled clustering statistics of every snapshot in `series`.
pub fn snapshot_stats(series: &ObservableSeries, species: Species, cutoff: usize) -> Vec<ClusterStats> {
    let sites = series.layout().sites;
    series
        .snapshots()
        .iter()
        .map(|s| cluster_gamma(s.configuration, sites, species, cutoff))
        .collect()
}

pub fn histogram_table(h: &Histogram) -> Table {
    let mut t = Table::new("gamma_histogram", &["gamma", "density"]);
    for (c, d) in h.centers().into_iter().zip(&h.density) {
        t.push_nums(&[c, *d]);
    }
    t
}

fn trajectory(config: &RunConfig, threads: usize) -> anyhow::Result<ResultBundle> {
    let params = config.model.params();
    let tcfg = config.trajectory.config(config.run.seed);
    let series = ensemble(&params, &tcfg, config.run.trajectories, threads)?;
    let mut bundle = ResultBundle::default();
    bundle.tables.push(moments_table(&series));
    if !tcfg.coherence_times.is_empty() {
        bundle.tables.push(coherence_table(&series));
    }
    if !series.snapshots().is_empty() {
        let c = &config.clustering;
        let stats = snapshot_stats(&series, c.species.into(), c.cutoff);
        let hist = gamma_histogram(&stats, c.bins, params.sites)?;
        bundle.tables.push(histogram_table(&hist));
    }
    let [lo, hi] = config.trajectory.binder_window;
    if let Some(u) = series.binder_time_average(lo, hi) {
        bundle.summary.insert("binder_window".into(), json!([lo, hi]));
        bundle.summary.insert("binder_average".into(), json!(u.value));
        bundle.summary.insert("binder_average_error".into(), json!(u.error));
    }
    Ok(bundle)
}

fn oracle_compare(config: &RunConfig, threads: usize) -> anyhow::Result<ResultBundle> {
    let params = config.model.params();
    let tcfg = config.trajectory.config(config.run.seed);
    let basis = Arc::new(params.basis()?);
    let psi0 = initial_state(basis, tcfg.initial_state)?;
    let rhos = integrate(&DensityMatrix::from_pure(&psi0), &params, &tcfg.sample_times, config.oracle.dt)
        .context("dense master-equation integration")?;
    let series = ensemble(&params, &tcfg, config.run.trajectories, threads)?;

    let mut cmp = Table::new("oracle_compare", &["t", "M2_traj", "M2_err", "M2_oracle", "deviation_sigma"]);
    let mut worst: f64 = 0.0;
    for (k, rho) in rhos.iter().enumerate() {
        let exact = rho.magnetization_moment(2);
        let est = series.m2(k);
        let dev = (est.value - exact).abs();
        let sigma = if est.error > 0.0 { dev / est.error } else if dev == 0.0 { 0.0 } else { f64::INFINITY };
        worst = worst.max(sigma);
        cmp.push_nums(&[series.times()[k], est.value, est.error, exact, sigma]);
    }
    let mut bundle = ResultBundle::default();
    bundle.tables.push(cmp);
    if !tcfg.density_times.is_empty() {
        let mut td = Table::new("trace_distance", &["t", "distance", "bound"]);
        let bound = 5.0 / (config.run.trajectories as f64).sqrt();
        for (slot, t) in series.density_times().into_iter().enumerate() {
            let k = series.time_index(t).expect("density time is a sample time");
            let d = trace_distance(&series.density_mean(slot), rhos[k].matrix());
            td.push_nums(&[t, d, bound]);
        }
        bundle.tables.push(td);
    }
    bundle.summary.insert("max_deviation_sigma".into(), json!(worst));
    Ok(bundle)
}

fn phase_scan(config: &RunConfig, threads: usize) -> anyhow::Result<ResultBundle> {
    let s = &config.scan;
    let [lo, hi] = config.trajectory.binder_window;
    let mut tcfg = config.trajectory.config(config.run.seed);
    tcfg.snapshot_times.clear();
    tcfg.coherence_times.clear();
    tcfg.density_times.clear();
    let mut table = Table::new("phase_scan", &["K", "L", "h", "U", "U_err"]);
    let mut transitions = Table::new("transition", &["K", "L", "h_star", "h_star_err", "status"]);
    for &k in &s.alignment {
        for &l in &s.sites {
            let mut points = Vec::new();
            for &h in &s.h_values {
                let mut m = config.model.clone();
                m.sites = l;
                m.particles = None;
                m.alignment = k;
                m.h = h;
                let series = ensemble(&m.params(), &tcfg, config.run.trajectories, threads)?;
                let u = series
                    .binder_time_average(lo, hi)
                    .with_context(|| format!("Binder cumulant undefined at K={k}, L={l}, h={h}"))?;
                table.push_nums(&[k, l as f64, h, u.value, u.error]);
                points.push(ScanPoint {
                    h,
                    binder: u.value,
                    error: u.error,
                });
            }
            let row = match estimate_transition(&points, s.epsilon) {
                Some(TransitionEstimate::Crossing { h, error }) => [num(h), num(error), "crossing".into()],
                Some(TransitionEstimate::Censored { h_max }) => [num(h_max), "NaN".into(), "censored-above".into()],
                Some(TransitionEstimate::BelowRange { h_min }) => [num(h_min), "NaN".into(), "below-range".into()],
                None => continue,
            };
            let mut cells = vec![num(k), num(l as f64)];
            cells.extend(row);
            transitions.push(cells);
        }
    }
    Ok(ResultBundle {
        tables: vec![table, transitions],
        summary: Default::default(),
    })
}

/// Initial fields of a hydro run.
pub fn hydro_initial(config: &RunConfig) -> FieldState {
    let h = &config.hydro;
    let s = match h.initial {
        FieldInit::GaussianCluster => FieldState::gaussian_cluster(h.sites, h.width),
        FieldInit::Homogeneous => FieldState::homogeneous(h.sites, h.rho, h.m),
    };
    if h.noise > 0.0 {
        s.with_noise(h.noise, &mut stream(config.run.seed, Purpose::Noise, 0))
    } else {
        s
    }
}

fn hydro(config: &RunConfig) -> anyhow::Result<ResultBundle> {
    let h = &config.hydro;
    let p = h.closure();
    let s0 = hydro_initial(config);
    let states = integrate_fields(&s0, &p, h.t_max, h.dt, h.record_every)?;
    let mut cols: Vec<String> = vec!["t".into()];
    cols.extend((0..h.sites).map(|x| format!("x{x}")));
    let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut rho = Table::new("hydro_rho", &cols);
    let mut m = Table::new("hydro_m", &cols);
    let mut profile = Table::new("hydro_profile", &["t", "peak_position", "peak_height", "m_std", "mass"]);
    for s in &states {
        let mut r = vec![s.t];
        r.extend(&s.rho);
        rho.push_nums(&r);
        let mut r = vec![s.t];
        r.extend(&s.m);
        m.push_nums(&r);
        let (pos, height) = profile_peak(&s.m);
        profile.push_nums(&[s.t, pos, height, spatial_std(&s.m), s.mass()]);
    }
    let mut bundle = ResultBundle {
        tables: vec![rho, m, profile],
        summary: Default::default(),
    };
    if let Ok(m2) = homogeneous_m2(&p) {
        bundle.summary.insert("homogeneous_m2".into(), json!(m2));
    }
    bundle.summary.insert("kc".into(), json!(p.kc()));
    bundle.summary.insert("kc_h".into(), json!(p.kc_h()));
    bundle
        .summary
        .insert("homogeneous_stability".into(), json!(homogeneous_stability(&p)));
    Ok(bundle)
}

/// `M^2` histories of the classical analogue, indexed `0..histories`.
pub fn classical_histories(config: &RunConfig, threads: usize) -> anyhow::Result<Vec<Vec<f64>>> {
    let c = &config.classical;
    let params = c.params();
    let initial = ClassicalChain::paired(c.sites);
    let jobs: Vec<u64> = (0..config.run.trajectories).collect();
    let out = map_jobs(jobs, threads, |i| {
        run_history(&params, &initial, c.sweeps, c.record_every, config.run.seed, i)
    })?;
    Ok(out.into_iter().collect::<qflock_core::Result<Vec<_>>>()?)
}

fn classical(config: &RunConfig, threads: usize) -> anyhow::Result<ResultBundle> {
    let histories = classical_histories(config, threads)?;
    let mean = qflock_core::classical::magnetization_sq(&histories)?;
    let n = histories.len() as f64;
    let mut t = Table::new("classical_m2", &["sweep", "M2", "M2_err"]);
    for (k, &m) in mean.iter().enumerate() {
        let var = if n > 1.0 {
            histories.iter().map(|h| (h[k] - m).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        t.push_nums(&[(k * config.classical.record_every) as f64, m, (var / n).sqrt()]);
    }
    Ok(ResultBundle {
        tables: vec![t],
        summary: Default::default(),
    })
}

fn kolmogorov(config: &RunConfig) -> anyhow::Result<ResultBundle> {
    let k = &config.kolmogorov;
    let mut t = Table::new("kolmogorov", &["gamma", "K", "epsilon", "forward", "backward", "ratio"]);
    for &a in &k.alignment {
        for &e in &k.epsilon {
            let r = kolmogorov_rates(&CycleSpec::canonical(e, a), k.gamma)?;
            t.push_nums(&[k.gamma, a, e, r.forward, r.backward, r.ratio]);
        }
    }
    Ok(ResultBundle {
        tables: vec![t],
        summary: Default::default(),
    })
}
