//! Quantum-jump unraveling of the master equation.
//!
//! Between jumps the state follows the linear generator
//! `G = -iH - 1/2 sum_a Gamma_a X_a^+ X_a` and is renormalized after every
//! step. Each step first draws `u`; a jump on channel `a` happens when `u`
//! falls inside the cumulative interval of `p_a = Gamma_a <X_a^+ X_a> dt`.
//!
//! `X_a^+ X_a` is diagonal for every channel, so the decay part of `G` is a
//! precomputed vector and the jump images are stored as a sparse table.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng;

use crate::clustering::sample_snapshot;
use crate::fock::{Configuration, FockBasis, SiteOccupation};
use crate::model::{channel_target, channels, for_each_spin_flip, JumpChannel, ModelParams, StateVector};
use crate::observables::{magnetization_moments, MomentRow, ObservableSeries, PairTable, SeriesLayout};
use crate::rng::{stream, Purpose};
use crate::{Error, Result};

/// Default time step in units of `1/Gamma`.
pub const DEFAULT_DT: f64 = 0.01;
/// Upper bound on the total jump probability of a single step.
pub const MAX_STEP_PROBABILITY: f64 = 0.1;
/// A step whose pre-normalization norm falls below this is retried.
pub const NORM_FLOOR: f64 = 1e-14;
/// Largest dimension for which full density matrices are accumulated.
pub const DENSITY_DIM_LIMIT: usize = 5000;

const MAX_RETRIES: u32 = 8;
/// Bound on `dt * |lambda|` for every Taylor substep.
const SUBSTEP_BOUND: f64 = 0.8;
const TIME_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitialState {
    /// The first `N` sites each hold `(|up> + |down>)/sqrt 2`.
    PlusProduct,
    /// The first `N/2` sites each hold an up-down pair.
    PairProduct,
}

pub fn initial_state(basis: Arc<FockBasis>, which: InitialState) -> Result<StateVector> {
    let (l, n) = (basis.sites(), basis.particles());
    match which {
        InitialState::PlusProduct => {
            if n > l {
                return Err(Error::parameter("initial_state", "PlusProduct needs N <= L"));
            }
            let mut psi = StateVector::zeros(basis.clone());
            let amp = Complex64::new((0.5f64).powf(n as f64 / 2.0), 0.0);
            for mask in 0..(1u32 << n) {
                let mut bits = 0u32;
                for site in 0..n {
                    bits |= if mask >> site & 1 == 1 { 1 << (2 * site) } else { 2 << (2 * site) };
                }
                let i = basis
                    .index_of(Configuration::from_bits(bits))
                    .ok_or_else(|| Error::Internal("product configuration outside basis".into()))?;
                psi.amplitudes_mut()[i] = amp;
            }
            Ok(psi)
        }
        InitialState::PairProduct => {
            if n % 2 != 0 || n / 2 > l {
                return Err(Error::parameter("initial_state", "PairProduct needs even N <= 2L"));
            }
            let sites = vec![SiteOccupation::PAIR; n / 2];
            Ok(StateVector::basis_state(basis, Configuration::from_sites(&sites)))
        }
    }
}

/// Sample times spaced by `step` from 0 up to and including `t_max`.
pub fn uniform_times(t_max: f64, step: f64) -> Vec<f64> {
    let n = ((t_max / step) + TIME_EPS).floor() as usize;
    (0..=n).map(|k| k as f64 * step).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryConfig {
    pub dt: f64,
    pub t_max: f64,
    pub seed: u64,
    /// Ascending observation times in `[0, t_max]`.
    pub sample_times: Vec<f64>,
    pub initial_state: InitialState,
    /// Subset of `sample_times` at which projective snapshots are drawn.
    pub snapshot_times: Vec<f64>,
    /// Subset of `sample_times` at which two-site reduced matrices are kept.
    pub coherence_times: Vec<f64>,
    /// Subset of `sample_times` at which the full `|psi><psi|` is accumulated.
    pub density_times: Vec<f64>,
}

impl TrajectoryConfig {
    /// `dt = 0.01`, samples every `0.5`, PlusProduct start, no extra records.
    pub fn new(t_max: f64, seed: u64) -> Self {
        TrajectoryConfig {
            dt: DEFAULT_DT,
            t_max,
            seed,
            sample_times: uniform_times(t_max, 0.5),
            initial_state: InitialState::PlusProduct,
            snapshot_times: Vec::new(),
            coherence_times: Vec::new(),
            density_times: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::parameter("dt", "must be positive and finite"));
        }
        if !(self.t_max >= 0.0 && self.t_max.is_finite()) {
            return Err(Error::parameter("t_max", "must be >= 0 and finite"));
        }
        if self.sample_times.is_empty() {
            return Err(Error::parameter("sample_times", "at least one sample time is required"));
        }
        let mut prev = -1.0;
        for &t in &self.sample_times {
            if !(t >= 0.0 && t <= self.t_max + TIME_EPS) {
                return Err(Error::parameter("sample_times", alloc::format!("{t} outside [0, t_max]")));
            }
            if t <= prev {
                return Err(Error::parameter("sample_times", "must be strictly ascending"));
            }
            prev = t;
        }
        for (name, subset) in [
            ("snapshot_times", &self.snapshot_times),
            ("coherence_times", &self.coherence_times),
            ("density_times", &self.density_times),
        ] {
            for &t in subset {
                if !self.sample_times.iter().any(|&s| (s - t).abs() < TIME_EPS) {
                    return Err(Error::parameter(name, alloc::format!("{t} is not a sample time")));
                }
            }
        }
        Ok(())
    }

    pub fn layout(&self, basis: &FockBasis) -> SeriesLayout {
        let flags = |subset: &[f64]| {
            self.sample_times
                .iter()
                .map(|&s| subset.iter().any(|&t| (s - t).abs() < TIME_EPS))
                .collect::<Vec<_>>()
        };
        let density = flags(&self.density_times);
        SeriesLayout {
            times: self.sample_times.clone(),
            coherence: flags(&self.coherence_times),
            snapshot: flags(&self.snapshot_times),
            dim: if density.iter().any(|&b| b) { basis.len() } else { 0 },
            density,
            sites: basis.sites(),
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct JumpEntry {
    channel: u16,
    target: u32,
    weight: f64,
}

/// Reusable buffers for one trajectory.
#[derive(Clone, Debug, Default)]
pub struct Workspace {
    acc: Vec<Complex64>,
    term: Vec<Complex64>,
    next: Vec<Complex64>,
    saved: Vec<Complex64>,
    probs: Vec<f64>,
}

impl Workspace {
    fn ensure(&mut self, dim: usize, channels: usize) {
        for b in [&mut self.acc, &mut self.term, &mut self.next, &mut self.saved] {
            b.resize(dim, Complex64::new(0.0, 0.0));
        }
        self.probs.resize(channels, 0.0);
    }
}

/// Outcome of one stochastic step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    /// Index into [`Unraveling::channels`] of the executed jump.
    pub jump: Option<usize>,
    pub dt: f64,
}

/// Precomputed operator data for a fixed `(params, basis)`. Shared read-only
/// between trajectories.
#[derive(Clone, Debug)]
pub struct Unraveling {
    params: ModelParams,
    basis: Arc<FockBasis>,
    channels: Vec<JumpChannel>,
    /// `sum_a Gamma_a <c|X_a^+ X_a|c>` per configuration.
    decay: Vec<f64>,
    half_decay: Vec<f64>,
    /// Spin-flip neighbours of every configuration (CSR).
    neighbours: Vec<u32>,
    neighbour_start: Vec<u32>,
    /// Gershgorin bound on the spectral radius of `G`.
    spectral_bound: f64,
    jumps: Vec<JumpEntry>,
    jump_start: Vec<u32>,
}

impl Unraveling {
    pub fn new(params: &ModelParams) -> Result<Self> {
        let basis = Arc::new(params.basis()?);
        Self::with_basis(params, basis)
    }

    pub fn with_basis(params: &ModelParams, basis: Arc<FockBasis>) -> Result<Self> {
        params.validate()?;
        if basis.sites() != params.sites || basis.particles() != params.particles {
            return Err(Error::BasisMismatch {
                sites: params.sites,
                particles: params.particles,
                found_sites: basis.sites(),
                found_particles: basis.particles(),
            });
        }
        let channels = channels(params);
        let dim = basis.len();
        let mut decay = vec![0.0; dim];
        let mut jumps = Vec::new();
        let mut jump_start = Vec::with_capacity(dim + 1);
        let mut spectral_bound: f64 = 0.0;
        let mut neighbours = Vec::new();
        let mut neighbour_start = Vec::with_capacity(dim + 1);
        for (i, &c) in basis.states().iter().enumerate() {
            jump_start.push(jumps.len() as u32);
            for (a, ch) in channels.iter().enumerate() {
                if ch.rate == 0.0 {
                    continue;
                }
                if let Some((t, w)) = channel_target(c, ch, params) {
                    let target = basis
                        .index_of(t)
                        .ok_or_else(|| Error::Internal("jump image outside basis".into()))?;
                    decay[i] += ch.rate * w * w;
                    jumps.push(JumpEntry {
                        channel: a as u16,
                        target: target as u32,
                        weight: w,
                    });
                }
            }
            neighbour_start.push(neighbours.len() as u32);
            let mut degree = 0usize;
            for_each_spin_flip(&basis, i, c.bits(), |j| {
                degree += 1;
                if params.h != 0.0 {
                    neighbours.push(j as u32);
                }
            });
            spectral_bound = spectral_bound.max(0.5 * decay[i] + params.h * degree as f64);
        }
        jump_start.push(jumps.len() as u32);
        neighbour_start.push(neighbours.len() as u32);
        let half_decay = decay.iter().map(|d| 0.5 * d).collect();
        Ok(Unraveling {
            params: params.clone(),
            basis,
            channels,
            decay,
            half_decay,
            neighbours,
            neighbour_start,
            spectral_bound,
            jumps,
            jump_start,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn channels(&self) -> &[JumpChannel] {
        &self.channels
    }

    pub fn workspace(&self) -> Workspace {
        let mut ws = Workspace::default();
        ws.ensure(self.basis.len(), self.channels.len());
        ws
    }

    fn check(&self, psi: &StateVector) -> Result<()> {
        let b = psi.basis();
        if !b.same_shape(&self.basis) {
            return Err(Error::BasisMismatch {
                sites: self.basis.sites(),
                particles: self.basis.particles(),
                found_sites: b.sites(),
                found_particles: b.particles(),
            });
        }
        Ok(())
    }

    /// `out = base + s * G x`.
    #[inline]
    fn stage(&self, x: &[Complex64], base: &[Complex64], out: &mut [Complex64], s: f64) {
        let ih = Complex64::new(0.0, self.params.h * s);
        let n = x.len();
        let (x, base, out) = (&x[..n], &base[..n], &mut out[..n]);
        if self.params.h == 0.0 {
            for i in 0..n {
                out[i] = base[i] - x[i] * (s * self.half_decay[i]);
            }
            return;
        }
        let nb = &self.neighbours;
        let starts = &self.neighbour_start[..n + 1];
        for i in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for &j in &nb[starts[i] as usize..starts[i + 1] as usize] {
                acc += x[j as usize];
            }
            out[i] = base[i] + ih * acc - x[i] * (s * self.half_decay[i]);
        }
    }

    /// Total jump probability `dt * sum_i |a_i|^2 D_i` of a normalized state.
    pub fn total_probability(&self, amps: &[Complex64], dt: f64) -> f64 {
        dt * amps
            .iter()
            .zip(&self.decay)
            .map(|(a, d)| a.norm_sqr() * d)
            .sum::<f64>()
    }

    /// Per-channel probabilities `Gamma_a <X_a^+ X_a> dt`, in channel order.
    pub fn jump_probabilities_into(&self, amps: &[Complex64], dt: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|p| *p = 0.0);
        for (i, a) in amps.iter().enumerate() {
            let p = a.norm_sqr();
            if p == 0.0 {
                continue;
            }
            for e in &self.jumps[self.jump_start[i] as usize..self.jump_start[i + 1] as usize] {
                out[e.channel as usize] += p * e.weight * e.weight;
            }
        }
        for (p, ch) in out.iter_mut().zip(&self.channels) {
            *p *= ch.rate * dt;
        }
    }

    pub fn jump_probabilities(&self, psi: &StateVector, dt: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.channels.len()];
        self.jump_probabilities_into(psi.amplitudes(), dt, &mut out);
        out
    }

    /// `exp(G dt) psi` by a fourth-order Taylor step per substep (identical to
    /// classical RK4 for a linear time-independent generator). No renormalization.
    fn propagate(&self, amps: &mut [Complex64], dt: f64, substeps: usize, ws: &mut Workspace) {
        let h = dt / substeps as f64;
        for _ in 0..substeps {
            // Horner form of 1 + hG + (hG)^2/2 + (hG)^3/6 + (hG)^4/24.
            self.stage(amps, amps, &mut ws.term, h / 4.0);
            self.stage(&ws.term, amps, &mut ws.next, h / 3.0);
            self.stage(&ws.next, amps, &mut ws.term, h / 2.0);
            self.stage(&ws.term, amps, &mut ws.acc, h);
            amps.copy_from_slice(&ws.acc);
        }
    }

    fn substeps(&self, dt: f64) -> usize {
        ((dt * self.spectral_bound / SUBSTEP_BOUND).ceil() as usize).max(1)
    }

    /// Deterministic non-Hermitian evolution over `dt` followed by renormalization.
    pub fn evolve_in_place(&self, psi: &mut StateVector, dt: f64, ws: &mut Workspace) -> Result<()> {
        self.check(psi)?;
        ws.ensure(self.basis.len(), self.channels.len());
        ws.saved.copy_from_slice(psi.amplitudes());
        let mut substeps = self.substeps(dt);
        let mut last = 0.0;
        for _ in 0..=MAX_RETRIES {
            self.propagate(psi.amplitudes_mut(), dt, substeps, ws);
            let norm = psi.norm_sqr().sqrt();
            if norm.is_finite() && norm >= NORM_FLOOR {
                let inv = 1.0 / norm;
                psi.amplitudes_mut().iter_mut().for_each(|a| *a *= inv);
                return Ok(());
            }
            last = norm;
            psi.amplitudes_mut().copy_from_slice(&ws.saved);
            substeps *= 2;
        }
        Err(Error::StepSize { norm: last, dt })
    }

    /// Unnormalized `exp(G dt) psi`; with zero rates this is unitary.
    pub fn propagate_unnormalized(&self, psi: &mut StateVector, dt: f64) -> Result<()> {
        self.check(psi)?;
        let mut ws = self.workspace();
        let substeps = self.substeps(dt);
        self.propagate(psi.amplitudes_mut(), dt, substeps, &mut ws);
        Ok(())
    }

    /// Replace `psi` by the normalized image `X_a psi`.
    pub fn apply_jump(&self, psi: &mut StateVector, channel: usize, ws: &mut Workspace) -> Result<()> {
        self.check(psi)?;
        ws.ensure(self.basis.len(), self.channels.len());
        let out = &mut ws.next;
        out.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        for (i, a) in psi.amplitudes().iter().enumerate() {
            if a.norm_sqr() == 0.0 {
                continue;
            }
            for e in &self.jumps[self.jump_start[i] as usize..self.jump_start[i + 1] as usize] {
                if e.channel as usize == channel {
                    out[e.target as usize] += a * e.weight;
                }
            }
        }
        let norm = out.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Internal(alloc::format!(
                "channel {channel} selected with a vanishing image"
            )));
        }
        let inv = 1.0 / norm;
        for (a, z) in psi.amplitudes_mut().iter_mut().zip(out.iter()) {
            *a = z * inv;
        }
        Ok(())
    }

    /// One first-order step of length `dt` driven by the uniform draw `u`.
    pub fn step_with(&self, psi: &mut StateVector, dt: f64, u: f64, ws: &mut Workspace) -> Result<Option<usize>> {
        self.check(psi)?;
        ws.ensure(self.basis.len(), self.channels.len());
        let total = self.total_probability(psi.amplitudes(), dt);
        if u < total {
            let mut probs = core::mem::take(&mut ws.probs);
            self.jump_probabilities_into(psi.amplitudes(), dt, &mut probs);
            let mut acc = 0.0;
            let mut chosen = None;
            for (a, &p) in probs.iter().enumerate() {
                if p > 0.0 {
                    acc += p;
                    chosen = Some(a);
                    if u < acc {
                        break;
                    }
                }
            }
            ws.probs = probs;
            let a = chosen.ok_or_else(|| Error::Internal("jump drawn with no open channel".into()))?;
            self.apply_jump(psi, a, ws)?;
            Ok(Some(a))
        } else {
            self.evolve_in_place(psi, dt, ws)?;
            Ok(None)
        }
    }

    /// One step of at most `dt`, halved until the total jump probability is
    /// below [`MAX_STEP_PROBABILITY`].
    pub fn step<R: Rng + ?Sized>(
        &self,
        psi: &mut StateVector,
        dt: f64,
        rng: &mut R,
        ws: &mut Workspace,
    ) -> Result<StepOutcome> {
        let mut h = dt;
        while self.total_probability(psi.amplitudes(), h) >= MAX_STEP_PROBABILITY {
            h *= 0.5;
        }
        let u: f64 = rng.random();
        let jump = self.step_with(psi, h, u, ws)?;
        Ok(StepOutcome { jump, dt: h })
    }

    /// Advance by exactly `span` using steps of at most `dt`.
    pub fn advance<R: Rng + ?Sized>(
        &self,
        psi: &mut StateVector,
        span: f64,
        dt: f64,
        rng: &mut R,
        ws: &mut Workspace,
    ) -> Result<usize> {
        if span <= 0.0 {
            return Ok(0);
        }
        let n = ((span / dt) - TIME_EPS).ceil().max(1.0) as usize;
        let h = span / n as f64;
        let mut jumps = 0;
        for _ in 0..n {
            let mut left = h;
            while left > 0.0 {
                let out = self.step(psi, left, rng, ws)?;
                jumps += out.jump.is_some() as usize;
                if out.dt >= left {
                    left = 0.0;
                } else {
                    left -= out.dt;
                }
            }
        }
        Ok(jumps)
    }
}

/// Everything needed to run trajectories of one ensemble.
#[derive(Clone, Debug)]
pub struct TrajectoryRunner {
    engine: Arc<Unraveling>,
    config: TrajectoryConfig,
    layout: SeriesLayout,
    pairs: Option<PairTable>,
    initial: StateVector,
}

impl TrajectoryRunner {
    pub fn new(params: &ModelParams, config: &TrajectoryConfig) -> Result<Self> {
        config.validate()?;
        let engine = Arc::new(Unraveling::new(params)?);
        let basis = engine.basis().clone();
        if !config.density_times.is_empty() && basis.len() > DENSITY_DIM_LIMIT {
            return Err(Error::Resource {
                what: "density-matrix accumulation",
                dim: basis.len(),
                limit: DENSITY_DIM_LIMIT,
            });
        }
        let pairs = if config.coherence_times.is_empty() {
            None
        } else {
            Some(PairTable::new(&basis)?)
        };
        let initial = initial_state(basis.clone(), config.initial_state)?;
        Ok(TrajectoryRunner {
            layout: config.layout(&basis),
            engine,
            config: config.clone(),
            pairs,
            initial,
        })
    }

    pub fn engine(&self) -> &Unraveling {
        &self.engine
    }

    pub fn layout(&self) -> &SeriesLayout {
        &self.layout
    }

    pub fn empty_series(&self) -> ObservableSeries {
        ObservableSeries::empty(self.layout.clone())
    }

    /// Run trajectory `index` and record it into `series`.
    pub fn run_into(&self, index: u64, series: &mut ObservableSeries) -> Result<()> {
        self.run_observed(index, series, |_, _| {})
    }

    /// As [`run_into`](Self::run_into), also handing the state at each sample time to `observe`.
    pub fn run_observed(
        &self,
        index: u64,
        series: &mut ObservableSeries,
        mut observe: impl FnMut(f64, &StateVector),
    ) -> Result<()> {
        let mut rng = stream(self.config.seed, Purpose::Dynamics, index);
        let mut snap_rng = stream(self.config.seed, Purpose::Snapshots, index);
        let mut ws = self.engine.workspace();
        let mut psi = self.initial.clone();
        let n = self.layout.times.len();
        let mut row = MomentRow {
            trajectory: index,
            m1: Vec::with_capacity(n),
            m2: Vec::with_capacity(n),
            m4: Vec::with_capacity(n),
        };
        let (mut coh_slot, mut den_slot) = (0, 0);
        let mut t = 0.0;
        for (k, &target) in self.layout.times.iter().enumerate() {
            self.engine.advance(&mut psi, target - t, self.config.dt, &mut rng, &mut ws)?;
            t = target;
            let m = magnetization_moments(&psi);
            row.m1.push(m.m1);
            row.m2.push(m.m2);
            row.m4.push(m.m4);
            if self.layout.coherence[k] {
                if let Some(pairs) = &self.pairs {
                    series.add_reduced(coh_slot, &pairs.reduced_all(psi.amplitudes()));
                }
                coh_slot += 1;
            }
            if self.layout.density[k] {
                series.add_density(den_slot, psi.amplitudes());
                den_slot += 1;
            }
            if self.layout.snapshot[k] {
                series.push_snapshot(sample_snapshot(&psi, &mut snap_rng, t, index));
            }
            observe(t, &psi);
        }
        series.push_row(row);
        Ok(())
    }

    /// Run trajectories `range` sequentially into one series.
    pub fn run_range(&self, range: core::ops::Range<u64>) -> Result<ObservableSeries> {
        let mut series = self.empty_series();
        for i in range {
            self.run_into(i, &mut series)?;
        }
        Ok(series)
    }
}

/// Per-channel jump probabilities `Gamma_a <psi|X_a^+ X_a|psi> dt`.
pub fn jump_probabilities(psi: &StateVector, params: &ModelParams, dt: f64) -> Result<Vec<f64>> {
    let engine = Unraveling::with_basis(params, psi.basis().clone())?;
    Ok(engine.jump_probabilities(psi, dt))
}

/// Deterministic evolution over `dt` with renormalization.
pub fn evolve_deterministic(psi: &StateVector, params: &ModelParams, dt: f64) -> Result<StateVector> {
    let engine = Unraveling::with_basis(params, psi.basis().clone())?;
    let mut out = psi.clone();
    let mut ws = engine.workspace();
    engine.evolve_in_place(&mut out, dt, &mut ws)?;
    Ok(out)
}

/// One stochastic step; returns the new state and the executed jump, if any.
pub fn step<R: Rng + ?Sized>(
    psi: &StateVector,
    params: &ModelParams,
    config: &TrajectoryConfig,
    rng: &mut R,
) -> Result<(StateVector, Option<JumpChannel>)> {
    let engine = Unraveling::with_basis(params, psi.basis().clone())?;
    let mut out = psi.clone();
    let mut ws = engine.workspace();
    let o = engine.step(&mut out, config.dt, rng, &mut ws)?;
    Ok((out, o.jump.map(|a| engine.channels()[a])))
}

/// Single trajectory `index` as a one-row series.
pub fn run_trajectory(params: &ModelParams, config: &TrajectoryConfig, index: u64) -> Result<ObservableSeries> {
    TrajectoryRunner::new(params, config)?.run_range(index..index + 1)
}
