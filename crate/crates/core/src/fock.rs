//! Configuration space of two hard-core boson species on a periodic chain.
//!
//! A configuration is a `2L`-bit mask: bit `2l` is an up particle on site `l`,
//! bit `2l + 1` a down particle. At fixed total particle number `N` the basis
//! holds every mask of popcount `N` below `2^(2L)` in ascending numeric order,
//! and [`FockBasis::index_of`] is the combinatorial rank of a fixed-popcount
//! mask, so no lookup table is needed.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::{Error, Result};

/// Largest chain supported by the `u32` encoding.
pub const MAX_SITES: usize = 15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Species {
    Up,
    Down,
}

impl Species {
    pub const BOTH: [Species; 2] = [Species::Up, Species::Down];

    pub fn flipped(self) -> Species {
        match self {
            Species::Up => Species::Down,
            Species::Down => Species::Up,
        }
    }

    /// `+1` for up, `-1` for down.
    pub fn sign(self) -> i32 {
        match self {
            Species::Up => 1,
            Species::Down => -1,
        }
    }

    #[inline]
    pub fn bit(self, site: usize) -> u32 {
        match self {
            Species::Up => 1 << (2 * site),
            Species::Down => 1 << (2 * site + 1),
        }
    }
}

/// Occupation of a single site: each species is either absent or present.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct SiteOccupation {
    pub up: bool,
    pub down: bool,
}

impl SiteOccupation {
    pub const EMPTY: SiteOccupation = SiteOccupation { up: false, down: false };
    pub const UP: SiteOccupation = SiteOccupation { up: true, down: false };
    pub const DOWN: SiteOccupation = SiteOccupation { up: false, down: true };
    pub const PAIR: SiteOccupation = SiteOccupation { up: true, down: true };

    /// Local code in the order `{empty, up, down, up+down}`.
    pub fn code(self) -> usize {
        self.up as usize | (self.down as usize) << 1
    }

    pub fn from_code(code: usize) -> Self {
        SiteOccupation {
            up: code & 1 != 0,
            down: code & 2 != 0,
        }
    }

    pub fn has(self, species: Species) -> bool {
        match species {
            Species::Up => self.up,
            Species::Down => self.down,
        }
    }

    pub fn particles(self) -> usize {
        self.up as usize + self.down as usize
    }

    pub fn magnetization(self) -> i32 {
        self.up as i32 - self.down as i32
    }
}

impl fmt::Display for SiteOccupation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match (self.up, self.down) {
            (false, false) => "0",
            (true, false) => "u",
            (false, true) => "d",
            (true, true) => "ud",
        })
    }
}

/// A many-body configuration encoded as a bit mask.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Configuration(u32);

impl Configuration {
    pub const fn from_bits(bits: u32) -> Self {
        Configuration(bits)
    }

    pub const fn bits(self) -> u32 {
        self.0
    }

    pub fn from_sites(sites: &[SiteOccupation]) -> Self {
        assert!(sites.len() <= MAX_SITES, "at most {MAX_SITES} sites");
        let bits = sites
            .iter()
            .enumerate()
            .fold(0u32, |acc, (l, s)| acc | (s.code() as u32) << (2 * l));
        Configuration(bits)
    }

    #[inline]
    pub fn site(self, l: usize) -> SiteOccupation {
        SiteOccupation::from_code(((self.0 >> (2 * l)) & 3) as usize)
    }

    #[inline]
    pub fn has(self, l: usize, species: Species) -> bool {
        self.0 & species.bit(l) != 0
    }

    pub fn particles(self) -> usize {
        self.0.count_ones() as usize
    }

    /// `n_up(l) - n_down(l)`.
    #[inline]
    pub fn magnetization(self, l: usize) -> i32 {
        ((self.0 >> (2 * l)) & 1) as i32 - ((self.0 >> (2 * l + 1)) & 1) as i32
    }

    /// Total magnetization `M = sum_l m_l` over the first `sites` sites.
    pub fn total_magnetization(self, sites: usize) -> i32 {
        let mask = site_mask(sites);
        (self.0 & mask & UP_BITS).count_ones() as i32 - (self.0 & mask & DOWN_BITS).count_ones() as i32
    }

    /// Occupation numbers of one species on the first `sites` sites.
    pub fn species_occupation(self, sites: usize, species: Species) -> Vec<u8> {
        (0..sites).map(|l| self.has(l, species) as u8).collect()
    }

    pub fn sites(self, sites: usize) -> Vec<SiteOccupation> {
        (0..sites).map(|l| self.site(l)).collect()
    }

    #[inline]
    pub(crate) fn toggled(self, bits: u32) -> Self {
        Configuration(self.0 ^ bits)
    }
}

pub(crate) const UP_BITS: u32 = 0x5555_5555;
pub(crate) const DOWN_BITS: u32 = 0xAAAA_AAAA;

#[inline]
pub(crate) fn site_mask(sites: usize) -> u32 {
    if sites >= 16 {
        u32::MAX
    } else {
        (1u32 << (2 * sites)) - 1
    }
}

/// `n_up(l) - n_down(l)` of configuration `c`.
pub fn local_magnetization(c: Configuration, l: usize) -> i32 {
    c.magnetization(l)
}

/// Pascal triangle up to `n = 32`.
#[derive(Clone, Debug)]
pub(crate) struct Binomials {
    table: Vec<u64>,
}

const BINOM_N: usize = 33;

impl Binomials {
    fn new() -> Self {
        let mut table = vec![0u64; BINOM_N * BINOM_N];
        for n in 0..BINOM_N {
            table[n * BINOM_N] = 1;
            for k in 1..=n {
                table[n * BINOM_N + k] = table[(n - 1) * BINOM_N + k - 1]
                    + if k < n { table[(n - 1) * BINOM_N + k] } else { 0 };
            }
        }
        Binomials { table }
    }

    #[inline]
    pub(crate) fn get(&self, n: usize, k: usize) -> u64 {
        if k > n {
            0
        } else {
            self.table[n * BINOM_N + k]
        }
    }
}

/// All configurations of `N` particles on `L` sites, in ascending bit-mask order.
#[derive(Clone, Debug)]
pub struct FockBasis {
    sites: usize,
    particles: usize,
    states: Vec<Configuration>,
    binom: Binomials,
}

impl FockBasis {
    pub fn new(sites: usize, particles: usize) -> Result<Self> {
        if sites == 0 || sites > MAX_SITES {
            return Err(Error::parameter(
                "sites",
                alloc::format!("L={sites} outside 1..={MAX_SITES}"),
            ));
        }
        if particles > 2 * sites {
            return Err(Error::parameter(
                "particles",
                alloc::format!("N={particles} outside 0..={}", 2 * sites),
            ));
        }
        let binom = Binomials::new();
        let dim = binom.get(2 * sites, particles) as usize;
        let mut states = Vec::with_capacity(dim);
        let limit = 1u64 << (2 * sites);
        if particles == 0 {
            states.push(Configuration(0));
        } else {
            // Gosper's hack: next larger integer with the same popcount.
            let mut x: u64 = (1u64 << particles) - 1;
            while x < limit {
                states.push(Configuration(x as u32));
                let c = x & x.wrapping_neg();
                let r = x + c;
                x = (((r ^ x) >> 2) / c) | r;
            }
        }
        debug_assert_eq!(states.len(), dim);
        Ok(FockBasis {
            sites,
            particles,
            states,
            binom,
        })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[Configuration] {
        &self.states
    }

    pub fn state(&self, index: usize) -> Configuration {
        self.states[index]
    }

    /// Dense index of `c`, or `None` if `c` is not in this basis.
    pub fn index_of(&self, c: Configuration) -> Option<usize> {
        let bits = c.bits();
        if bits & !site_mask(self.sites) != 0 || bits.count_ones() as usize != self.particles {
            return None;
        }
        Some(self.rank(bits))
    }

    /// Colexicographic rank: `sum_i C(p_i, i)` over set-bit positions `p_1 < p_2 < ...`.
    #[inline]
    pub(crate) fn rank(&self, mut bits: u32) -> usize {
        let mut rank = 0u64;
        let mut ordinal = 1;
        while bits != 0 {
            let p = bits.trailing_zeros() as usize;
            rank += self.binom.get(p, ordinal);
            ordinal += 1;
            bits &= bits - 1;
        }
        rank as usize
    }

    #[inline]
    pub(crate) fn binomial(&self, n: usize, k: usize) -> u64 {
        self.binom.get(n, k)
    }

    pub(crate) fn same_shape(&self, other: &FockBasis) -> bool {
        self.sites == other.sites && self.particles == other.particles
    }
}

/// Enumerate the fixed-`N` basis on `L` sites.
pub fn enumerate_basis(sites: usize, particles: usize) -> Result<FockBasis> {
    FockBasis::new(sites, particles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force(sites: usize, particles: usize) -> Vec<u32> {
        (0u32..(1u32 << (2 * sites)))
            .filter(|b| b.count_ones() as usize == particles)
            .collect()
    }

    #[test]
    fn vacuum_basis() {
        let b = enumerate_basis(1, 0).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b.state(0), Configuration(0));
    }

    #[test]
    fn single_particle_two_sites() {
        let b = enumerate_basis(2, 1).unwrap();
        let sites: Vec<_> = b.states().iter().map(|c| (c.site(0), c.site(1))).collect();
        use SiteOccupation as S;
        assert_eq!(
            sites,
            [(S::UP, S::EMPTY), (S::DOWN, S::EMPTY), (S::EMPTY, S::UP), (S::EMPTY, S::DOWN)]
        );
    }

    #[test]
    fn eight_sites_four_particles() {
        let b = enumerate_basis(8, 4).unwrap();
        assert_eq!(b.len(), 1820);
        let brute = brute_force(8, 4);
        assert_eq!(b.states().iter().map(|c| c.bits()).collect::<Vec<_>>(), brute);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(matches!(enumerate_basis(3, 7), Err(Error::Parameter { name: "particles", .. })));
        assert!(enumerate_basis(0, 0).is_err());
        assert!(enumerate_basis(MAX_SITES + 1, 1).is_err());
    }

    #[test]
    fn full_and_empty_sectors() {
        assert_eq!(enumerate_basis(5, 10).unwrap().len(), 1);
        assert_eq!(enumerate_basis(14, 7).unwrap().len(), 1_184_040);
    }

    #[test]
    fn magnetization_values() {
        let c = Configuration::from_sites(&[SiteOccupation::PAIR, SiteOccupation::UP, SiteOccupation::EMPTY]);
        assert_eq!(local_magnetization(c, 0), 0);
        assert_eq!(local_magnetization(c, 1), 1);
        assert_eq!(local_magnetization(c, 2), 0);
        assert_eq!(c.total_magnetization(3), 1);
    }

    #[test]
    fn index_of_rejects_foreign_configurations() {
        let b = enumerate_basis(3, 2).unwrap();
        assert_eq!(b.index_of(Configuration(0b1)), None);
        assert_eq!(b.index_of(Configuration(0b1_0000_0001)), None);
    }

    proptest! {
        #[test]
        fn ranking_round_trip(sites in 1usize..=10, frac in 0.0f64..=1.0) {
            let particles = ((2 * sites) as f64 * frac).round() as usize;
            let b = enumerate_basis(sites, particles).unwrap();
            prop_assert_eq!(b.len() as u64, b.binomial(2 * sites, particles));
            prop_assert_eq!(b.len(), brute_force(sites, particles).len());
            for (i, c) in b.states().iter().enumerate() {
                prop_assert_eq!(b.index_of(*c), Some(i));
                prop_assert_eq!(c.particles(), particles);
            }
        }
    }
}
