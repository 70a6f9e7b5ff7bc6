//! Dense Lindblad integrator for small systems.
//!
//! `d rho/dt = -i[H, rho] + sum_a Gamma_a (X_a rho X_a^+ - 1/2 {X_a^+ X_a, rho})`
//! with explicit RK4 on the full density matrix.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::sync::Arc;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::fock::{Configuration, FockBasis};
use crate::linalg::CMatrix;
use crate::model::{channel_target, channels, ModelParams, StateVector};
use crate::{Error, Result};

/// Largest basis dimension accepted by the dense integrator.
pub const DIM_LIMIT: usize = 5000;
pub const DEFAULT_DT: f64 = 0.005;
pub const HERMITICITY_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct DensityMatrix {
    basis: Arc<FockBasis>,
    rho: CMatrix,
}

impl DensityMatrix {
    pub fn new(basis: Arc<FockBasis>, rho: CMatrix) -> Result<Self> {
        if rho.dim() != basis.len() {
            return Err(Error::parameter("rho", "matrix dimension differs from the basis"));
        }
        Ok(DensityMatrix { basis, rho })
    }

    pub fn from_pure(psi: &StateVector) -> Self {
        DensityMatrix {
            basis: psi.basis().clone(),
            rho: CMatrix::outer(psi.amplitudes()),
        }
    }

    /// `I / dim`.
    pub fn maximally_mixed(basis: Arc<FockBasis>) -> Self {
        let mut rho = CMatrix::identity(basis.len());
        rho.scale(1.0 / basis.len() as f64);
        DensityMatrix { basis, rho }
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.rho
    }

    pub fn into_matrix(self) -> CMatrix {
        self.rho
    }

    pub fn trace(&self) -> Complex64 {
        self.rho.trace()
    }

    /// `Tr(rho D)` for an operator diagonal in the configuration basis.
    pub fn diagonal_expectation(&self, f: impl Fn(Configuration) -> f64) -> f64 {
        self.basis
            .states()
            .iter()
            .zip(self.rho.diagonal())
            .map(|(c, p)| p * f(*c))
            .sum()
    }

    pub fn magnetization_moment(&self, power: i32) -> f64 {
        let sites = self.basis.sites();
        self.diagonal_expectation(|c| (c.total_magnetization(sites) as f64).powi(power))
    }

    /// Checks Hermiticity, unit trace and positivity; returns the first violation.
    pub fn check_invariants(&self) -> core::result::Result<(), &'static str> {
        if self.rho.hermiticity_error() > HERMITICITY_TOL {
            return Err("Hermiticity");
        }
        let tr = self.rho.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err("unit trace");
        }
        if !self.rho.is_positive_with_shift(POSITIVITY_TOL) {
            return Err("positivity");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
struct Entry {
    row: usize,
    col: usize,
    value: f64,
}

/// Sparse operator data for one `(params, basis)` pair.
#[derive(Clone, Debug)]
pub struct Lindbladian {
    basis: Arc<FockBasis>,
    hamiltonian: Vec<Entry>,
    /// Per channel: nonzero entries of `sqrt(Gamma) X`.
    jumps: Vec<Vec<Entry>>,
    /// Diagonal of `1/2 sum Gamma X^+ X`.
    half_decay: Vec<f64>,
}

impl Lindbladian {
    pub fn new(params: &ModelParams) -> Result<Self> {
        let basis = Arc::new(params.basis()?);
        Self::with_basis(params, basis)
    }

    pub fn with_basis(params: &ModelParams, basis: Arc<FockBasis>) -> Result<Self> {
        params.validate()?;
        let dim = basis.len();
        if dim > DIM_LIMIT {
            return Err(Error::Resource {
                what: "dense Lindblad oracle",
                dim,
                limit: DIM_LIMIT,
            });
        }
        let mut hamiltonian = Vec::new();
        if params.h != 0.0 {
            for (i, c) in basis.states().iter().enumerate() {
                for l in 0..params.sites {
                    let occ = c.site(l);
                    if occ.up != occ.down {
                        let bits = c.bits() ^ (3u32 << (2 * l));
                        let j = basis
                            .index_of(Configuration::from_bits(bits))
                            .ok_or_else(|| Error::Internal("spin flip outside basis".into()))?;
                        hamiltonian.push(Entry {
                            row: j,
                            col: i,
                            value: -params.h,
                        });
                    }
                }
            }
        }
        let mut jumps = Vec::new();
        let mut half_decay = alloc::vec![0.0; dim];
        for ch in channels(params) {
            let mut entries = Vec::new();
            let amp = ch.rate.sqrt();
            for (i, c) in basis.states().iter().enumerate() {
                if let Some((t, w)) = channel_target(*c, &ch, params) {
                    let j = basis
                        .index_of(t)
                        .ok_or_else(|| Error::Internal("jump outside basis".into()))?;
                    let value = amp * w;
                    if value != 0.0 {
                        entries.push(Entry { row: j, col: i, value });
                        half_decay[i] += 0.5 * value * value;
                    }
                }
            }
            if !entries.is_empty() {
                jumps.push(entries);
            }
        }
        Ok(Lindbladian {
            basis,
            hamiltonian,
            jumps,
            half_decay,
        })
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// `out = L(rho)`.
    pub fn apply(&self, rho: &CMatrix, out: &mut CMatrix) {
        let n = self.dim();
        let r = rho.as_slice();
        let o = out.as_mut_slice();
        for i in 0..n {
            for j in 0..n {
                o[i * n + j] = -r[i * n + j] * (self.half_decay[i] + self.half_decay[j]);
            }
        }
        let minus_i = Complex64::new(0.0, -1.0);
        for e in &self.hamiltonian {
            // -i H rho: row e.row gains H[row][col] * rho[col][*].
            let f = minus_i * e.value;
            for k in 0..n {
                o[e.row * n + k] += f * r[e.col * n + k];
            }
            // +i rho H: column e.col gains rho[*][row] * H[row][col].
            for k in 0..n {
                o[k * n + e.col] -= f * r[k * n + e.row];
            }
        }
        for entries in &self.jumps {
            for a in entries {
                for b in entries {
                    o[a.row * n + b.row] += r[a.col * n + b.col] * (a.value * b.value);
                }
            }
        }
    }

    pub fn rhs(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.rho.dim() != self.dim() {
            return Err(Error::parameter("rho", "dimension differs from the model basis"));
        }
        let mut out = CMatrix::zeros(self.dim());
        self.apply(&rho.rho, &mut out);
        Ok(DensityMatrix {
            basis: self.basis.clone(),
            rho: out,
        })
    }

    fn rk4_step(&self, rho: &mut CMatrix, dt: f64, k: &mut [CMatrix; 4], tmp: &mut CMatrix) {
        self.apply(rho, &mut k[0]);
        for (stage, coef) in [(1usize, 0.5), (2, 0.5), (3, 1.0)] {
            tmp.as_mut_slice().copy_from_slice(rho.as_slice());
            tmp.add_scaled(coef * dt, &k[stage - 1]);
            let (_, rest) = k.split_at_mut(stage);
            self.apply(tmp, &mut rest[0]);
        }
        rho.add_scaled(dt / 6.0, &k[0]);
        rho.add_scaled(dt / 3.0, &k[1]);
        rho.add_scaled(dt / 3.0, &k[2]);
        rho.add_scaled(dt / 6.0, &k[3]);
    }

    /// States at each of the ascending `times`, starting from `rho0` at `t = 0`.
    pub fn integrate(&self, rho0: &DensityMatrix, times: &[f64], dt: f64) -> Result<Vec<DensityMatrix>> {
        if !(dt > 0.0) {
            return Err(Error::parameter("dt", "must be positive"));
        }
        if rho0.rho.dim() != self.dim() {
            return Err(Error::parameter("rho0", "dimension differs from the model basis"));
        }
        let n = self.dim();
        let mut k = [CMatrix::zeros(n), CMatrix::zeros(n), CMatrix::zeros(n), CMatrix::zeros(n)];
        let mut tmp = CMatrix::zeros(n);
        let mut rho = rho0.rho.clone();
        let mut t = 0.0;
        let mut out = Vec::with_capacity(times.len());
        for &target in times {
            if target < t - 1e-12 {
                return Err(Error::parameter("times", "must be ascending and non-negative"));
            }
            let span = target - t;
            if span > 0.0 {
                let steps = ((span / dt) - 1e-9).ceil().max(1.0) as usize;
                let h = span / steps as f64;
                for _ in 0..steps {
                    self.rk4_step(&mut rho, h, &mut k, &mut tmp);
                }
            }
            t = target;
            let state = DensityMatrix {
                basis: self.basis.clone(),
                rho: rho.clone(),
            };
            if let Err(what) = state.check_invariants() {
                return Err(Error::Integration {
                    t,
                    what: alloc::format!("{what} violated; reduce dt"),
                });
            }
            out.push(state);
        }
        Ok(out)
    }

    /// Vectorized superoperator: column `i * n + j` is `vec(L(|i><j|))`, row-major.
    pub fn superoperator(&self) -> CMatrix {
        let n = self.dim();
        let mut sup = CMatrix::zeros(n * n);
        let mut e = CMatrix::zeros(n);
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                e.as_mut_slice().iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
                e[(i, j)] = Complex64::new(1.0, 0.0);
                self.apply(&e, &mut out);
                let col = i * n + j;
                for (row, z) in out.as_slice().iter().enumerate() {
                    sup[(row, col)] = *z;
                }
            }
        }
        sup
    }
}

/// `d rho / dt` for the model.
pub fn lindblad_rhs(rho: &DensityMatrix, params: &ModelParams) -> Result<DensityMatrix> {
    Lindbladian::with_basis(params, rho.basis.clone())?.rhs(rho)
}

/// RK4 states at `times` (ascending, `t = 0` allowed).
pub fn integrate(rho0: &DensityMatrix, params: &ModelParams, times: &[f64], dt: f64) -> Result<Vec<DensityMatrix>> {
    Lindbladian::with_basis(params, rho0.basis.clone())?.integrate(rho0, times, dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::SiteOccupation as S;
    use crate::model::Kernel;
    use crate::trajectory::{initial_state, InitialState};
    use rand::{Rng, SeedableRng};

    fn random_density(n: usize, seed: u64) -> CMatrix {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut a = CMatrix::zeros(n);
        for z in a.as_mut_slice() {
            *z = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        }
        let mut rho = a.matmul(&a.adjoint());
        let tr = rho.trace().re;
        rho.scale(1.0 / tr);
        rho
    }

    #[test]
    fn frozen_basis_gives_zero_rhs() {
        // Every site doubly occupied: no hop target, no flip possible.
        let p = ModelParams::new(2).with_particles(4).with_h(0.0);
        let basis = Arc::new(p.basis().unwrap());
        let rho = DensityMatrix::maximally_mixed(basis);
        let d = lindblad_rhs(&rho, &p).unwrap();
        assert_eq!(d.matrix().max_abs(), 0.0);
    }

    #[test]
    fn rhs_is_traceless_and_hermitian() {
        let p = ModelParams::new(3).with_particles(2).with_h(0.6).with_alignment(2.5);
        let lind = Lindbladian::new(&p).unwrap();
        for seed in 0..5 {
            let rho = DensityMatrix::new(lind.basis().clone(), random_density(lind.dim(), seed)).unwrap();
            let d = lind.rhs(&rho).unwrap();
            assert!(d.trace().norm() < 1e-12);
            assert!(d.matrix().hermiticity_error() < 1e-12);
        }
    }

    #[test]
    fn directed_hopping_relaxation() {
        // One particle on two sites, motion only: the up particle hops at rate 1
        // in each direction of the ring, so P(up at 0) = (1 + e^{-2t}) / 2.
        let p = ModelParams::new(2)
            .with_particles(1)
            .with_h(0.0)
            .with_rates(1.0, 0.0);
        let basis = Arc::new(p.basis().unwrap());
        let c0 = Configuration::from_sites(&[S::UP]);
        let rho0 = DensityMatrix::from_pure(&StateVector::basis_state(basis.clone(), c0));
        let times = [0.0, 0.3, 1.0, 2.5];
        let states = integrate(&rho0, &p, &times, DEFAULT_DT).unwrap();
        let i0 = basis.index_of(c0).unwrap();
        let i1 = basis.index_of(Configuration::from_sites(&[S::EMPTY, S::UP])).unwrap();
        for (t, s) in times.iter().zip(&states) {
            let d = s.matrix().diagonal();
            let exact = 0.5 * (1.0 + (-2.0 * t).exp());
            assert!((d[i0] - exact).abs() < 1e-10);
            assert!((d[i1] - (1.0 - exact)).abs() < 1e-10);
        }
    }

    /// Classical rates written out directly from the model definition.
    fn classical_generator(p: &ModelParams, basis: &FockBasis) -> Vec<Vec<f64>> {
        let n = basis.len();
        let l = p.sites;
        let mut q = alloc::vec![alloc::vec![0.0; n]; n];
        let m = |c: Configuration, s: usize| {
            let o = c.site(s % l);
            o.up as i32 - o.down as i32
        };
        for (i, &c) in basis.states().iter().enumerate() {
            let mut add = |bits: u32, rate: f64| {
                let j = basis.index_of(Configuration::from_bits(bits)).unwrap();
                q[j][i] += rate;
                q[i][i] -= rate;
            };
            for s in 0..l {
                let occ = c.site(s);
                let left = (s + l - 1) % l;
                let right = (s + 1) % l;
                if occ.up && !c.site(left).up {
                    add(c.bits() ^ (1 << (2 * s)) ^ (1 << (2 * left)), p.gamma_motion);
                }
                if occ.down && !c.site(right).down {
                    add(c.bits() ^ (2 << (2 * s)) ^ (2 << (2 * right)), p.gamma_motion);
                }
                if occ.up != occ.down {
                    let ml = m(c, s);
                    let nb: i32 = (1..=p.radius).map(|j| m(c, s + j) + m(c, s + l * p.radius - j)).sum();
                    let w = (-p.alignment / (2.0 * p.radius as f64) * (ml * nb) as f64).exp();
                    add(c.bits() ^ (3 << (2 * s)), p.gamma_align * w * w);
                }
            }
        }
        q
    }

    #[test]
    fn diagonal_follows_classical_master_equation() {
        let p = ModelParams::new(3)
            .with_particles(3)
            .with_h(0.0)
            .with_alignment(1.7)
            .with_rates(1.0, 0.6)
            .with_kernel(Kernel::Exponential);
        let basis = Arc::new(p.basis().unwrap());
        let psi = initial_state(basis.clone(), InitialState::PlusProduct).unwrap();
        let rho0 = DensityMatrix::from_pure(&psi);
        let times = [0.5, 1.5];
        let states = integrate(&rho0, &p, &times, DEFAULT_DT).unwrap();

        let q = classical_generator(&p, &basis);
        let n = basis.len();
        let qm = nalgebra::DMatrix::from_fn(n, n, |i, j| q[i][j]);
        let p0 = nalgebra::DVector::from_iterator(n, rho0.matrix().diagonal());
        for (t, s) in times.iter().zip(&states) {
            let pt = (&qm * *t).exp() * &p0;
            for (a, b) in pt.iter().zip(s.matrix().diagonal()) {
                assert!((a - b).abs() < 1e-9, "t={t}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn invariants_hold_along_integration() {
        let p = ModelParams::new(4).with_particles(2).with_h(0.5).with_alignment(2.0);
        let basis = Arc::new(p.basis().unwrap());
        let psi = initial_state(basis, InitialState::PlusProduct).unwrap();
        let rho0 = DensityMatrix::from_pure(&psi);
        let times: Vec<f64> = (0..=5).map(|k| k as f64).collect();
        let states = integrate(&rho0, &p, &times, DEFAULT_DT).unwrap();
        assert_eq!(states[0].matrix(), rho0.matrix());
        assert!(states.iter().all(|s| s.check_invariants().is_ok()));
    }

    #[test]
    fn superoperator_spectrum_is_contractive() {
        let p = ModelParams::new(3).with_particles(2).with_h(0.8).with_alignment(2.0);
        let lind = Lindbladian::new(&p).unwrap();
        let sup = lind.superoperator();
        let n = sup.dim();
        assert!(n <= 225);
        let m = nalgebra::DMatrix::from_fn(n, n, |i, j| {
            let z = sup[(i, j)];
            nalgebra::Complex::new(z.re, z.im)
        });
        let eig = m
            .try_schur(1e-13, 100_000)
            .expect("Schur iteration did not converge")
            .eigenvalues()
            .unwrap();
        let max_re = eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        assert!(max_re <= 1e-10, "max Re = {max_re}");
        // A steady state exists.
        assert!(eig.iter().any(|z| z.norm() < 1e-8));
    }

    #[test]
    fn dimension_guard() {
        let p = ModelParams::new(8).with_particles(6);
        assert!(matches!(Lindbladian::new(&p), Err(Error::Resource { dim: 8008, .. })));
    }
}
