//! Classical two-species active lattice gas with synchronous updates, and the
//! cycle-rate (Kolmogorov) test for detailed balance.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::fock::{SiteOccupation, Species};
use crate::rng::{stream, Purpose};
use crate::{Error, Result};

pub const DEFAULT_SCALE: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalParams {
    pub sites: usize,
    pub alignment: f64,
    pub radius: usize,
    pub gamma_motion: f64,
    pub gamma_align: f64,
    /// Global factor applied to every per-sweep probability.
    pub scale: f64,
}

impl ClassicalParams {
    /// `r = min(4, L/2)`, unit rates, scale `0.1`.
    pub fn new(sites: usize, alignment: f64) -> Self {
        ClassicalParams {
            sites,
            alignment,
            radius: crate::model::default_radius(sites),
            gamma_motion: 1.0,
            gamma_align: 1.0,
            scale: DEFAULT_SCALE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sites < 2 {
            return Err(Error::parameter("sites", "need at least two sites"));
        }
        if self.radius < 1 || self.radius > (self.sites / 2).max(1) {
            return Err(Error::parameter("radius", "must lie in 1..=L/2"));
        }
        if !self.alignment.is_finite() {
            return Err(Error::parameter("alignment", "must be finite"));
        }
        for (name, v) in [
            ("gamma_motion", self.gamma_motion),
            ("gamma_align", self.gamma_align),
            ("scale", self.scale),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::parameter(name, "must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

/// Occupations of a classical chain (any length).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassicalChain {
    sites: Vec<SiteOccupation>,
}

impl ClassicalChain {
    pub fn new(sites: Vec<SiteOccupation>) -> Self {
        ClassicalChain { sites }
    }

    pub fn empty(sites: usize) -> Self {
        ClassicalChain::new(vec![SiteOccupation::EMPTY; sites])
    }

    /// The first `L/4` sites hold up-down pairs, the rest is empty.
    pub fn paired(sites: usize) -> Self {
        let mut c = ClassicalChain::empty(sites);
        for s in c.sites.iter_mut().take(sites / 4) {
            *s = SiteOccupation::PAIR;
        }
        c
    }

    pub fn sites(&self) -> &[SiteOccupation] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn particles(&self) -> usize {
        self.sites.iter().map(|s| s.particles()).sum()
    }

    pub fn magnetization(&self, l: usize) -> i32 {
        self.sites[l % self.sites.len()].magnetization()
    }

    pub fn total_magnetization(&self) -> i32 {
        self.sites.iter().map(|s| s.magnetization()).sum()
    }

    /// `(sum_l m_l)^2 / L^2`.
    pub fn magnetization_sq(&self) -> f64 {
        let m = self.total_magnetization() as f64 / self.sites.len() as f64;
        m * m
    }

    fn get(&self, slot: Slot) -> bool {
        self.sites[slot.site].has(slot.species)
    }

    fn set(&mut self, slot: Slot, value: bool) {
        let s = &mut self.sites[slot.site];
        match slot.species {
            Species::Up => s.up = value,
            Species::Down => s.down = value,
        }
    }
}

/// Alignment weight `exp(-K/(2r) m_l sum_{1 <= |j| <= r} m_{l+j})`.
pub fn flip_weight(chain: &ClassicalChain, l: usize, alignment: f64, radius: usize) -> f64 {
    let n = chain.len();
    let s: i32 = (1..=radius)
        .map(|j| chain.magnetization(l + j) + chain.magnetization(l + n * radius - j))
        .sum();
    (-alignment / (2.0 * radius as f64) * (chain.magnetization(l) * s) as f64).exp()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Slot {
    site: usize,
    species: Species,
}

#[derive(Clone, Copy, Debug)]
struct Move {
    from: Slot,
    to: Slot,
}

/// One synchronous sweep. All candidate events are evaluated on the current
/// configuration; events competing for a source particle or a target slot
/// are resolved in uniformly random order.
pub fn classical_step<R: Rng + ?Sized>(chain: &mut ClassicalChain, params: &ClassicalParams, rng: &mut R) {
    let n = chain.len();
    let p_move = (params.scale * params.gamma_motion).min(1.0);
    let mut fired: Vec<Move> = Vec::new();
    for l in 0..n {
        let occ = chain.sites[l];
        for species in Species::BOTH {
            if !occ.has(species) {
                continue;
            }
            let from = Slot { site: l, species };
            // Up particles move left, down particles move right.
            let target = match species {
                Species::Up => (l + n - 1) % n,
                Species::Down => (l + 1) % n,
            };
            if !chain.sites[target].has(species) && rng.random::<f64>() < p_move {
                fired.push(Move {
                    from,
                    to: Slot { site: target, species },
                });
            }
            let other = species.flipped();
            if !occ.has(other) {
                let w = flip_weight(chain, l, params.alignment, params.radius);
                let p = (params.scale * params.gamma_align * w).min(1.0);
                if rng.random::<f64>() < p {
                    fired.push(Move {
                        from,
                        to: Slot { site: l, species: other },
                    });
                }
            }
        }
    }
    for i in (1..fired.len()).rev() {
        let j = rng.random_range(0..=i);
        fired.swap(i, j);
    }
    let mut claimed = BTreeSet::new();
    let mut accepted = Vec::with_capacity(fired.len());
    for mv in fired {
        if claimed.contains(&mv.from) || claimed.contains(&mv.to) {
            continue;
        }
        claimed.insert(mv.from);
        claimed.insert(mv.to);
        accepted.push(mv);
    }
    for mv in accepted {
        chain.set(mv.from, false);
        chain.set(mv.to, true);
    }
}

/// `M^2` after every `record_every` sweeps (and at the start) for one history.
pub fn run_history(
    params: &ClassicalParams,
    initial: &ClassicalChain,
    sweeps: usize,
    record_every: usize,
    seed: u64,
    index: u64,
) -> Result<Vec<f64>> {
    params.validate()?;
    if initial.len() != params.sites {
        return Err(Error::parameter("initial", "chain length differs from L"));
    }
    if record_every == 0 {
        return Err(Error::parameter("record_every", "must be >= 1"));
    }
    let mut rng = stream(seed, Purpose::Classical, index);
    let mut chain = initial.clone();
    let mut out = Vec::with_capacity(sweeps / record_every + 1);
    out.push(chain.magnetization_sq());
    for s in 1..=sweeps {
        classical_step(&mut chain, params, &mut rng);
        if s % record_every == 0 {
            out.push(chain.magnetization_sq());
        }
    }
    Ok(out)
}

/// Ensemble mean of `M^2(t)` over histories of equal length.
pub fn magnetization_sq(histories: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = histories
        .first()
        .ok_or_else(|| Error::parameter("histories", "ensemble is empty"))?;
    if histories.iter().any(|h| h.len() != first.len()) {
        return Err(Error::parameter("histories", "histories differ in length"));
    }
    let n = histories.len() as f64;
    Ok((0..first.len())
        .map(|t| histories.iter().map(|h| h[t]).sum::<f64>() / n)
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Left,
    Right,
}

/// Elementary transition of the cycle-rate model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Transition {
    Hop {
        site: usize,
        species: Species,
        direction: Direction,
    },
    /// Flip the particle at `site` into `to`.
    Flip { site: usize, to: Species },
}

impl Transition {
    fn reversed(self, sites: usize) -> Transition {
        match self {
            Transition::Hop {
                site,
                species,
                direction,
            } => match direction {
                Direction::Right => Transition::Hop {
                    site: (site + 1) % sites,
                    species,
                    direction: Direction::Left,
                },
                Direction::Left => Transition::Hop {
                    site: (site + sites - 1) % sites,
                    species,
                    direction: Direction::Right,
                },
            },
            Transition::Flip { site, to } => Transition::Flip { site, to: to.flipped() },
        }
    }
}

/// A closed sequence of transitions from `start`.
#[derive(Clone, Debug, PartialEq)]
pub struct CycleSpec {
    pub start: Vec<SiteOccupation>,
    pub transitions: Vec<Transition>,
    /// Hop bias `epsilon`.
    pub epsilon: f64,
    pub alignment: f64,
}

impl CycleSpec {
    /// Three up particles at sites 1..=3 of a seven-site ring: the right-most
    /// one flips, steps right, flips back and steps home.
    pub fn canonical(epsilon: f64, alignment: f64) -> Self {
        let mut start = vec![SiteOccupation::EMPTY; 7];
        for s in &mut start[1..=3] {
            *s = SiteOccupation::UP;
        }
        CycleSpec {
            start,
            transitions: vec![
                Transition::Flip {
                    site: 3,
                    to: Species::Down,
                },
                Transition::Hop {
                    site: 3,
                    species: Species::Down,
                    direction: Direction::Right,
                },
                Transition::Flip {
                    site: 4,
                    to: Species::Up,
                },
                Transition::Hop {
                    site: 4,
                    species: Species::Up,
                    direction: Direction::Left,
                },
            ],
            epsilon,
            alignment,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CycleRates {
    pub forward: f64,
    pub backward: f64,
    /// `forward / backward` (infinite when the reverse cycle is forbidden).
    pub ratio: f64,
}

/// Rate of `t` from `chain` and the resulting configuration.
fn elementary(
    chain: &ClassicalChain,
    t: Transition,
    gamma: f64,
    epsilon: f64,
    alignment: f64,
) -> Result<(f64, ClassicalChain)> {
    let n = chain.len();
    let mut next = chain.clone();
    match t {
        Transition::Hop {
            site,
            species,
            direction,
        } => {
            let target = match direction {
                Direction::Left => (site + n - 1) % n,
                Direction::Right => (site + 1) % n,
            };
            let from = Slot { site, species };
            let to = Slot { site: target, species };
            if site >= n || !chain.get(from) || chain.get(to) {
                return Err(Error::Cycle(alloc::format!("hop {t:?} is blocked")));
            }
            next.set(from, false);
            next.set(to, true);
            let along = matches!(
                (species, direction),
                (Species::Up, Direction::Left) | (Species::Down, Direction::Right)
            );
            let bias = if along { 1.0 + epsilon } else { 1.0 - epsilon };
            Ok((gamma * bias / 2.0, next))
        }
        Transition::Flip { site, to } => {
            if site >= n || chain.sites[site].has(to) || !chain.sites[site].has(to.flipped()) {
                return Err(Error::Cycle(alloc::format!("flip {t:?} is not allowed")));
            }
            let w = flip_weight(chain, site, alignment, 1);
            next.set(Slot { site, species: to.flipped() }, false);
            next.set(Slot { site, species: to }, true);
            Ok((gamma * w, next))
        }
    }
}

/// Forward and backward rate products of a closed cycle. Hops along the
/// preferred direction have rate `G(1+e)/2`, against it `G(1-e)/2`; flips
/// have rate `G exp(-K/2 m_l (m_{l-1} + m_{l+1}))`.
pub fn kolmogorov_rates(spec: &CycleSpec, gamma: f64) -> Result<CycleRates> {
    if spec.start.len() < 2 {
        return Err(Error::Cycle("ring needs at least two sites".into()));
    }
    let start = ClassicalChain::new(spec.start.clone());
    let mut chain = start.clone();
    let mut forward = 1.0;
    for &t in &spec.transitions {
        let (rate, next) = elementary(&chain, t, gamma, spec.epsilon, spec.alignment)?;
        forward *= rate;
        chain = next;
    }
    if chain != start {
        return Err(Error::Cycle("transitions do not return to the start".into()));
    }
    let n = start.len();
    let mut backward = 1.0;
    for &t in spec.transitions.iter().rev() {
        let (rate, next) = elementary(&chain, t.reversed(n), gamma, spec.epsilon, spec.alignment)?;
        backward *= rate;
        chain = next;
    }
    let ratio = if backward == 0.0 { f64::INFINITY } else { forward / backward };
    Ok(CycleRates {
        forward,
        backward,
        ratio,
    })
}
