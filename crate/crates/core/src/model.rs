//! Hamiltonian and quantum jump operators acting on state vectors.
//!
//! * `H = -h sum_l (c+_{l,up} c_{l,down} + h.c.)`
//! * `M_{l,up} = c+_{l,up} c_{l+1,up}` (up particles hop left),
//!   `M_{l,down} = c+_{l+1,down} c_{l,down}` (down particles hop right)
//! * `A_{l,s} = c+_{l,s} c_{l,s'} P_l` with `P_l` diagonal; `P_l` reads the
//!   configuration before the flip.
//!
//! All operators are applied matrix-free: every configuration is mapped to at
//! most one image configuration per operator.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::fock::{Configuration, FockBasis, Species, MAX_SITES};
use crate::{Error, Result};

/// Alignment kernel variant for `P_l`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Kernel {
    /// `exp(-K/(2r) m_l S_l)`
    Exponential,
    /// `1 - K/(2r) m_l S_l`, clamped at zero.
    Linear,
    /// Flips only when the neighbourhood sum matches `+m0` (flip into up) or
    /// `-m0` (flip into down).
    Delta { m0: i32 },
}

impl Default for Kernel {
    fn default() -> Self {
        Kernel::Exponential
    }
}

/// Physical parameters. Rates and `h` are in the same units (usually `Gamma = 1`).
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub sites: usize,
    pub particles: usize,
    /// Coherent spin-flip amplitude `h`.
    pub h: f64,
    /// Directed-motion rate `Gamma_M`.
    pub gamma_motion: f64,
    /// Alignment rate `Gamma_A`.
    pub gamma_align: f64,
    /// Dimensionless alignment strength `K`.
    pub alignment: f64,
    /// Interaction radius `r` in sites.
    pub radius: usize,
    pub kernel: Kernel,
}

impl ModelParams {
    /// Half filling, `Gamma_M = Gamma_A = 1`, `r = min(4, L/2)`, `h = 0.2`, `K = 3.8`.
    pub fn new(sites: usize) -> Self {
        ModelParams {
            sites,
            particles: sites / 2,
            h: 0.2,
            gamma_motion: 1.0,
            gamma_align: 1.0,
            alignment: 3.8,
            radius: default_radius(sites),
            kernel: Kernel::Exponential,
        }
    }

    pub fn with_particles(mut self, particles: usize) -> Self {
        self.particles = particles;
        self
    }

    pub fn with_h(mut self, h: f64) -> Self {
        self.h = h;
        self
    }

    pub fn with_alignment(mut self, k: f64) -> Self {
        self.alignment = k;
        self
    }

    pub fn with_rates(mut self, gamma_motion: f64, gamma_align: f64) -> Self {
        self.gamma_motion = gamma_motion;
        self.gamma_align = gamma_align;
        self
    }

    pub fn with_radius(mut self, radius: usize) -> Self {
        self.radius = radius;
        self
    }

    pub fn with_kernel(mut self, kernel: Kernel) -> Self {
        self.kernel = kernel;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.sites == 0 || self.sites > MAX_SITES {
            return Err(Error::parameter("sites", alloc::format!("L={} outside 1..={MAX_SITES}", self.sites)));
        }
        if self.particles > 2 * self.sites {
            return Err(Error::parameter("particles", alloc::format!("N={} exceeds 2L", self.particles)));
        }
        for (name, value) in [
            ("h", self.h),
            ("gamma_motion", self.gamma_motion),
            ("gamma_align", self.gamma_align),
        ] {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::parameter(name, alloc::format!("{value} must be finite and >= 0")));
            }
        }
        if !self.alignment.is_finite() {
            return Err(Error::parameter("alignment", "K must be finite"));
        }
        let max_radius = (self.sites / 2).max(1);
        if self.radius < 1 || self.radius > max_radius {
            return Err(Error::parameter(
                "radius",
                alloc::format!("r={} outside 1..={max_radius}", self.radius),
            ));
        }
        Ok(())
    }

    /// Whether the linear kernel can go negative (and is therefore clamped) for these parameters.
    pub fn linear_kernel_clamps(&self) -> bool {
        matches!(self.kernel, Kernel::Linear) && self.alignment > 1.0
    }

    pub fn basis(&self) -> Result<FockBasis> {
        self.validate()?;
        FockBasis::new(self.sites, self.particles)
    }
}

pub fn default_radius(sites: usize) -> usize {
    4.min(sites / 2).max(1)
}

/// Pure state over a [`FockBasis`].
#[derive(Clone, Debug)]
pub struct StateVector {
    basis: Arc<FockBasis>,
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn new(basis: Arc<FockBasis>, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != basis.len() {
            return Err(Error::parameter(
                "amplitudes",
                alloc::format!("{} amplitudes for a basis of {}", amps.len(), basis.len()),
            ));
        }
        Ok(StateVector { basis, amps })
    }

    pub fn zeros(basis: Arc<FockBasis>) -> Self {
        let amps = vec![Complex64::new(0.0, 0.0); basis.len()];
        StateVector { basis, amps }
    }

    /// The normalized state `|c>`. Panics if `c` is not in the basis.
    pub fn basis_state(basis: Arc<FockBasis>, c: Configuration) -> Self {
        let i = basis.index_of(c).expect("configuration outside basis");
        let mut psi = StateVector::zeros(basis);
        psi.amps[i] = Complex64::new(1.0, 0.0);
        psi
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Rescale to unit norm and return the norm before rescaling.
    pub fn normalize(&mut self) -> f64 {
        let norm = self.norm_sqr().sqrt();
        if norm > 0.0 {
            let inv = 1.0 / norm;
            self.amps.iter_mut().for_each(|a| *a *= inv);
        }
        norm
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// `<psi| D |psi>` for an operator diagonal in the configuration basis.
    pub fn diagonal_expectation(&self, f: impl Fn(Configuration) -> f64) -> f64 {
        self.basis
            .states()
            .iter()
            .zip(&self.amps)
            .map(|(c, a)| a.norm_sqr() * f(*c))
            .sum()
    }

    pub fn is_zero(&self) -> bool {
        self.amps.iter().all(|a| a.norm_sqr() == 0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ChannelKind {
    Motion,
    Alignment,
}

/// One of the `4L` dissipative channels `X_{l,s}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JumpChannel {
    pub kind: ChannelKind,
    pub site: usize,
    pub species: Species,
    pub rate: f64,
}

/// All channels in the fixed order: motion `(l, up), (l, down)` for every
/// `l`, followed by alignment in the same order.
pub fn channels(params: &ModelParams) -> Vec<JumpChannel> {
    let mut out = Vec::with_capacity(4 * params.sites);
    for (kind, rate) in [
        (ChannelKind::Motion, params.gamma_motion),
        (ChannelKind::Alignment, params.gamma_align),
    ] {
        for site in 0..params.sites {
            for species in Species::BOTH {
                out.push(JumpChannel {
                    kind,
                    site,
                    species,
                    rate,
                });
            }
        }
    }
    out
}

/// Neighbourhood magnetization `S_l = sum_{1 <= |j| <= r} m_{l+j}` (periodic).
#[inline]
pub fn neighbourhood_magnetization(c: Configuration, l: usize, sites: usize, radius: usize) -> i32 {
    let mut s = 0;
    for j in 1..=radius {
        s += c.magnetization((l + j) % sites);
        s += c.magnetization((l + sites * radius - j) % sites);
    }
    s
}

/// Diagonal value of `P_l` on `c`, read before any flip acts.
pub fn alignment_weight(c: Configuration, l: usize, params: &ModelParams) -> f64 {
    let m = c.magnetization(l);
    if m == 0 {
        return match params.kernel {
            Kernel::Delta { .. } => 0.0,
            _ => 1.0,
        };
    }
    let s = neighbourhood_magnetization(c, l, params.sites, params.radius);
    let x = params.alignment / (2.0 * params.radius as f64) * (m * s) as f64;
    match params.kernel {
        Kernel::Exponential => (-x).exp(),
        Kernel::Linear => (1.0 - x).max(0.0),
        // m = -1: a down particle that may flip into up, allowed at S = +m0.
        Kernel::Delta { m0 } => {
            if s == -m * m0 {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Image of configuration `c` under `X_channel`, with its matrix element.
#[inline]
pub fn channel_target(
    c: Configuration,
    channel: &JumpChannel,
    params: &ModelParams,
) -> Option<(Configuration, f64)> {
    match channel.kind {
        ChannelKind::Motion => motion_target(c, channel.site, channel.species, params.sites).map(|t| (t, 1.0)),
        ChannelKind::Alignment => {
            let l = channel.site;
            let target = channel.species;
            if c.has(l, target) || !c.has(l, target.flipped()) {
                return None;
            }
            let w = alignment_weight(c, l, params);
            if w == 0.0 {
                return None;
            }
            Some((c.toggled(target.bit(l) | target.flipped().bit(l)), w))
        }
    }
}

/// `M_{l,up}` moves an up particle `l+1 -> l`; `M_{l,down}` moves a down particle `l -> l+1`.
#[inline]
pub fn motion_target(c: Configuration, l: usize, species: Species, sites: usize) -> Option<Configuration> {
    let next = (l + 1) % sites;
    let (from, to) = match species {
        Species::Up => (next, l),
        Species::Down => (l, next),
    };
    if from == to {
        // Single-site chain: the hop maps the particle onto itself.
        return if c.has(from, species) { Some(c) } else { None };
    }
    if c.has(from, species) && !c.has(to, species) {
        Some(c.toggled(species.bit(from) | species.bit(to)))
    } else {
        None
    }
}

fn check_basis(psi: &StateVector, params: &ModelParams) -> Result<()> {
    let b = psi.basis();
    if b.sites() != params.sites || b.particles() != params.particles {
        return Err(Error::BasisMismatch {
            sites: params.sites,
            particles: params.particles,
            found_sites: b.sites(),
            found_particles: b.particles(),
        });
    }
    Ok(())
}

/// Calls `f(j)` for every configuration index `j` reachable from `index`
/// (mask `bits`) by a single on-site spin flip.
///
/// Moving the set bit of ordinal `k` from position `2l` to `2l + 1` changes the
/// colex rank by `C(2l, k)`, so no general ranking is needed.
#[inline(always)]
pub(crate) fn for_each_spin_flip(basis: &FockBasis, index: usize, bits: u32, mut f: impl FnMut(usize)) {
    let mut rest = bits;
    let mut ordinal = 0usize;
    while rest != 0 {
        let b = rest.trailing_zeros() as usize;
        rest &= rest - 1;
        if bits & (1 << (b ^ 1)) == 0 {
            if b & 1 == 0 {
                f(index + basis.binomial(b, ordinal) as usize);
            } else {
                f(index - basis.binomial(b - 1, ordinal) as usize);
            }
        }
        ordinal += 1;
    }
}

/// `H |psi>`.
pub fn apply_hamiltonian(psi: &StateVector, params: &ModelParams) -> Result<StateVector> {
    check_basis(psi, params)?;
    let basis = psi.basis().clone();
    let mut out = vec![Complex64::new(0.0, 0.0); basis.len()];
    if params.h != 0.0 {
        let amps = psi.amplitudes();
        for (i, c) in basis.states().iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for_each_spin_flip(&basis, i, c.bits(), |j| acc += amps[j]);
            out[i] = -params.h * acc;
        }
    }
    StateVector::new(basis, out)
}

/// `X |psi>` for an arbitrary channel (the rate is not included).
pub fn apply_channel(psi: &StateVector, channel: &JumpChannel, params: &ModelParams) -> Result<StateVector> {
    check_basis(psi, params)?;
    let basis = psi.basis().clone();
    let mut out = StateVector::zeros(basis.clone());
    for (c, a) in basis.states().iter().zip(psi.amplitudes()) {
        if a.norm_sqr() == 0.0 {
            continue;
        }
        if let Some((t, w)) = channel_target(*c, channel, params) {
            let j = basis.index_of(t).ok_or_else(|| Error::Internal("jump left the basis".into()))?;
            out.amps[j] += a * w;
        }
    }
    Ok(out)
}

/// `M_{l,s} |psi>`.
pub fn apply_motion_jump(psi: &StateVector, l: usize, species: Species, params: &ModelParams) -> Result<StateVector> {
    let ch = JumpChannel {
        kind: ChannelKind::Motion,
        site: l,
        species,
        rate: params.gamma_motion,
    };
    apply_channel(psi, &ch, params)
}

/// `A_{l,s} |psi>`: flips the opposite species into `species` at site `l`.
pub fn apply_alignment_jump(
    psi: &StateVector,
    l: usize,
    species: Species,
    params: &ModelParams,
) -> Result<StateVector> {
    let ch = JumpChannel {
        kind: ChannelKind::Alignment,
        site: l,
        species,
        rate: params.gamma_align,
    };
    apply_channel(psi, &ch, params)
}

/// Spatial reflection about `center` combined with a species flip:
/// `c_{l,s} -> c_{(center - l) mod L, s'}`.
pub fn mirror_configuration(c: Configuration, sites: usize, center: usize) -> Configuration {
    let mut bits = 0u32;
    for l in 0..sites {
        let target = (center + sites - l % sites) % sites;
        let occ = c.site(l);
        if occ.up {
            bits |= Species::Down.bit(target);
        }
        if occ.down {
            bits |= Species::Up.bit(target);
        }
    }
    Configuration::from_bits(bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::SiteOccupation as S;
    use proptest::prelude::*;

    fn c64(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_state(basis: &Arc<FockBasis>, seed: u64) -> StateVector {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let amps = (0..basis.len())
            .map(|_| c64(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let mut psi = StateVector::new(basis.clone(), amps).unwrap();
        psi.normalize();
        psi
    }

    /// Dense matrix of an operator, built column by column from its action.
    fn dense(basis: &Arc<FockBasis>, op: impl Fn(&StateVector) -> StateVector) -> Vec<Vec<Complex64>> {
        let n = basis.len();
        let mut m = vec![vec![c64(0.0, 0.0); n]; n];
        for j in 0..n {
            let e = StateVector::basis_state(basis.clone(), basis.state(j));
            let col = op(&e);
            for i in 0..n {
                m[i][j] = col.amplitudes()[i];
            }
        }
        m
    }

    #[test]
    fn hamiltonian_vanishes_at_zero_h() {
        let p = ModelParams::new(4).with_particles(2).with_h(0.0);
        let basis = Arc::new(p.basis().unwrap());
        let psi = random_state(&basis, 1);
        assert!(apply_hamiltonian(&psi, &p).unwrap().is_zero());
    }

    #[test]
    fn hamiltonian_single_site() {
        let p = ModelParams::new(1).with_particles(1).with_h(0.7);
        let basis = Arc::new(p.basis().unwrap());
        let up = StateVector::basis_state(basis.clone(), Configuration::from_sites(&[S::UP]));
        let out = apply_hamiltonian(&up, &p).unwrap();
        let down = basis.index_of(Configuration::from_sites(&[S::DOWN])).unwrap();
        assert_eq!(out.amplitudes()[down], c64(-0.7, 0.0));
        assert!((out.norm_sqr() - 0.49).abs() < 1e-15);
    }

    #[test]
    fn hamiltonian_matches_general_ranking() {
        let p = ModelParams::new(5).with_particles(4).with_h(1.3);
        let basis = Arc::new(p.basis().unwrap());
        let h = dense(&basis, |v| apply_hamiltonian(v, &p).unwrap());
        for (j, c) in basis.states().iter().enumerate() {
            for l in 0..5 {
                let occ = c.site(l);
                if occ.particles() == 1 {
                    let t = c.toggled(Species::Up.bit(l) | Species::Down.bit(l));
                    let i = basis.index_of(t).unwrap();
                    assert_eq!(h[i][j], c64(-1.3, 0.0));
                }
            }
        }
        for i in 0..basis.len() {
            for j in 0..basis.len() {
                assert_eq!(h[i][j], h[j][i].conj());
            }
        }
    }

    #[test]
    fn hamiltonian_is_hermitian_on_random_pairs() {
        let p = ModelParams::new(6).with_particles(3).with_h(0.4);
        let basis = Arc::new(p.basis().unwrap());
        for seed in 0..5 {
            let phi = random_state(&basis, seed);
            let psi = random_state(&basis, seed + 100);
            let a = phi.inner(&apply_hamiltonian(&psi, &p).unwrap());
            let b = psi.inner(&apply_hamiltonian(&phi, &p).unwrap()).conj();
            assert!((a - b).norm() < 1e-12);
            let e = psi.inner(&apply_hamiltonian(&psi, &p).unwrap());
            assert!(e.im.abs() < 1e-12);
        }
    }

    #[test]
    fn basis_mismatch_is_structural_error() {
        let p = ModelParams::new(4).with_particles(2);
        let basis = Arc::new(FockBasis::new(4, 3).unwrap());
        let psi = StateVector::zeros(basis);
        assert!(matches!(apply_hamiltonian(&psi, &p), Err(Error::BasisMismatch { .. })));
    }

    #[test]
    fn motion_jump_examples() {
        let p = ModelParams::new(2).with_particles(1);
        let basis = Arc::new(p.basis().unwrap());
        let psi = StateVector::basis_state(basis.clone(), Configuration::from_sites(&[S::EMPTY, S::UP]));
        let out = apply_motion_jump(&psi, 0, Species::Up, &p).unwrap();
        let expect = StateVector::basis_state(basis.clone(), Configuration::from_sites(&[S::UP, S::EMPTY]));
        assert_eq!(out.amplitudes(), expect.amplitudes());

        // Down particles move right, never left.
        let psi = StateVector::basis_state(basis.clone(), Configuration::from_sites(&[S::DOWN, S::EMPTY]));
        let out = apply_motion_jump(&psi, 0, Species::Down, &p).unwrap();
        let expect = StateVector::basis_state(basis.clone(), Configuration::from_sites(&[S::EMPTY, S::DOWN]));
        assert_eq!(out.amplitudes(), expect.amplitudes());

        let p2 = ModelParams::new(2).with_particles(2);
        let basis2 = Arc::new(p2.basis().unwrap());
        let blocked = StateVector::basis_state(basis2, Configuration::from_sites(&[S::UP, S::UP]));
        assert!(apply_motion_jump(&blocked, 0, Species::Up, &p2).unwrap().is_zero());

        let p0 = ModelParams::new(3).with_particles(0);
        let vac = StateVector::basis_state(Arc::new(p0.basis().unwrap()), Configuration::default());
        for l in 0..3 {
            for s in Species::BOTH {
                assert!(apply_motion_jump(&vac, l, s, &p0).unwrap().is_zero());
            }
        }
    }

    #[test]
    fn alignment_weight_examples() {
        let p = ModelParams::new(9).with_particles(3).with_alignment(3.8).with_radius(4);
        // m_l = 0 sites give weight 1.
        let c = Configuration::from_sites(&[S::PAIR, S::UP, S::UP]);
        assert_eq!(alignment_weight(c, 0, &p), 1.0);
        let zero_k = p.clone().with_alignment(0.0);
        let lin = zero_k.clone().with_kernel(Kernel::Linear);
        for l in 0..9 {
            assert_eq!(alignment_weight(c, l, &zero_k), 1.0);
            assert_eq!(alignment_weight(c, l, &lin), 1.0);
        }
        // Up site surrounded by 8 up neighbours.
        let all_up = Configuration::from_sites(&[S::UP; 9]);
        let w = alignment_weight(all_up, 0, &p);
        assert!((w - (-3.8f64).exp()).abs() < 1e-15);
        assert!((w - 0.022_370_771_856_165_6).abs() < 1e-12);
    }

    #[test]
    fn linear_kernel_is_clamped() {
        let p = ModelParams::new(9).with_alignment(3.8).with_radius(4).with_kernel(Kernel::Linear);
        let all_up = Configuration::from_sites(&[S::UP; 9]);
        assert_eq!(alignment_weight(all_up, 0, &p), 0.0);
        assert!(p.linear_kernel_clamps());
        assert!(!p.clone().with_alignment(0.9).linear_kernel_clamps());
    }

    #[test]
    fn delta_kernel_fires_on_matching_neighbourhood() {
        let p = ModelParams::new(8).with_radius(2).with_kernel(Kernel::Delta { m0: 2 });
        // Down at 0, two up neighbours on the right, empty elsewhere: S = +2.
        let mut sites = [S::EMPTY; 8];
        sites[0] = S::DOWN;
        sites[1] = S::UP;
        sites[2] = S::UP;
        let c = Configuration::from_sites(&sites);
        assert_eq!(alignment_weight(c, 0, &p), 1.0);
        sites[2] = S::EMPTY;
        assert_eq!(alignment_weight(Configuration::from_sites(&sites), 0, &p), 0.0);
        // Up at 0 needs S = -2.
        let mut sites = [S::EMPTY; 8];
        sites[0] = S::UP;
        sites[7] = S::DOWN;
        sites[6] = S::DOWN;
        assert_eq!(alignment_weight(Configuration::from_sites(&sites), 0, &p), 1.0);
    }

    #[test]
    fn alignment_jump_examples() {
        let p = ModelParams::new(9).with_particles(1).with_alignment(2.5).with_radius(4);
        let basis = Arc::new(p.basis().unwrap());
        let mut sites = [S::EMPTY; 9];
        sites[4] = S::DOWN;
        let psi = StateVector::basis_state(basis.clone(), Configuration::from_sites(&sites));
        let out = apply_alignment_jump(&psi, 4, Species::Up, &p).unwrap();
        sites[4] = S::UP;
        let expect = StateVector::basis_state(basis.clone(), Configuration::from_sites(&sites));
        assert_eq!(out.amplitudes(), expect.amplitudes());
        // Flipping into the species already present is blocked; so is flipping a pair.
        assert!(apply_alignment_jump(&psi, 4, Species::Down, &p).unwrap().is_zero());
        let p2 = p.clone().with_particles(2);
        let b2 = Arc::new(p2.basis().unwrap());
        let mut pair = [S::EMPTY; 9];
        pair[4] = S::PAIR;
        let psi2 = StateVector::basis_state(b2, Configuration::from_sites(&pair));
        for s in Species::BOTH {
            assert!(apply_alignment_jump(&psi2, 4, s, &p2).unwrap().is_zero());
        }
    }

    #[test]
    fn down_environment_suppresses_flip_to_up() {
        let k = 1.7;
        let p = ModelParams::new(9).with_particles(9).with_alignment(k).with_radius(4);
        let c = Configuration::from_sites(&[S::DOWN; 9]);
        assert!((alignment_weight(c, 0, &p) - (-k).exp()).abs() < 1e-15);
        let basis = Arc::new(p.basis().unwrap());
        let psi = StateVector::basis_state(basis, c);
        let out = apply_alignment_jump(&psi, 0, Species::Up, &p).unwrap();
        assert!((out.norm_sqr() - (-2.0 * k).exp()).abs() < 1e-15);
    }

    #[test]
    fn every_operator_conserves_particle_number() {
        let p = ModelParams::new(6).with_particles(3).with_alignment(1.1).with_radius(2).with_h(0.5);
        let basis = Arc::new(p.basis().unwrap());
        for c in basis.states() {
            for ch in channels(&p) {
                if let Some((t, _)) = channel_target(*c, &ch, &p) {
                    assert_eq!(t.particles(), 3);
                    assert!(basis.index_of(t).is_some());
                }
            }
            for_each_spin_flip(&basis, basis.index_of(*c).unwrap(), c.bits(), |j| {
                assert_eq!(basis.state(j).particles(), 3);
            });
        }
    }

    #[test]
    fn channel_list_has_four_l_entries() {
        let p = ModelParams::new(7);
        let ch = channels(&p);
        assert_eq!(ch.len(), 28);
        assert_eq!(ch.iter().filter(|c| c.kind == ChannelKind::Motion).count(), 14);
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        assert!(ModelParams::new(8).with_radius(5).validate().is_err());
        assert!(ModelParams::new(8).with_radius(0).validate().is_err());
        assert!(ModelParams::new(8).with_h(-1.0).validate().is_err());
        assert!(ModelParams::new(8).with_rates(f64::NAN, 1.0).validate().is_err());
        assert!(ModelParams::new(8).validate().is_ok());
        assert_eq!(ModelParams::new(4).radius, 2);
    }

    /// Permutation matrix of the mirror map, as index -> index.
    fn mirror_perm(basis: &FockBasis, center: usize) -> Vec<usize> {
        basis
            .states()
            .iter()
            .map(|c| basis.index_of(mirror_configuration(*c, basis.sites(), center)).unwrap())
            .collect()
    }

    fn conjugated(m: &[Vec<Complex64>], perm: &[usize]) -> Vec<Vec<Complex64>> {
        let n = m.len();
        let mut out = vec![vec![c64(0.0, 0.0); n]; n];
        for i in 0..n {
            for j in 0..n {
                out[perm[i]][perm[j]] = m[i][j];
            }
        }
        out
    }

    fn z2_check(p: &ModelParams) {
        let basis = Arc::new(p.basis().unwrap());
        let l_sites = p.sites;
        for center in 0..l_sites {
            let perm = mirror_perm(&basis, center);
            let h = dense(&basis, |v| apply_hamiltonian(v, p).unwrap());
            assert_eq!(conjugated(&h, &perm), h);
            for l in 0..l_sites {
                let m_up = dense(&basis, |v| apply_motion_jump(v, l, Species::Up, p).unwrap());
                let partner = (center + 2 * l_sites - l - 1) % l_sites;
                let m_down = dense(&basis, |v| apply_motion_jump(v, partner, Species::Down, p).unwrap());
                assert_eq!(conjugated(&m_up, &perm), m_down);
                for s in Species::BOTH {
                    let a = dense(&basis, |v| apply_alignment_jump(v, l, s, p).unwrap());
                    let mirrored_site = (center + l_sites - l) % l_sites;
                    let b = dense(&basis, |v| apply_alignment_jump(v, mirrored_site, s.flipped(), p).unwrap());
                    let ca = conjugated(&a, &perm);
                    for i in 0..basis.len() {
                        for j in 0..basis.len() {
                            assert!((ca[i][j] - b[i][j]).norm() < 1e-14);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn z2_covariance_exponential() {
        for (l, n) in [(4, 2), (5, 3), (6, 3)] {
            z2_check(&ModelParams::new(l).with_particles(n).with_alignment(2.3).with_h(0.7));
        }
    }

    #[test]
    fn z2_covariance_other_kernels() {
        z2_check(&ModelParams::new(6).with_particles(4).with_alignment(1.9).with_kernel(Kernel::Linear));
        z2_check(&ModelParams::new(6).with_particles(4).with_radius(2).with_kernel(Kernel::Delta { m0: 1 }));
    }

    proptest! {
        #[test]
        fn exponential_weight_is_positive(bits in 0u32..(1 << 20), k in -5.0f64..5.0, r in 1usize..=5) {
            let p = ModelParams::new(10).with_alignment(k).with_radius(r);
            let c = Configuration::from_bits(bits);
            for l in 0..10 {
                prop_assert!(alignment_weight(c, l, &p) > 0.0);
            }
        }
    }
}
