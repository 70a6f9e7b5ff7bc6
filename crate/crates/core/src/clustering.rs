//! Projective snapshots and the density-peak clustering statistic.
//!
//! For one species with occupations `n_l`, the local density is
//! `rho_l = n_l * sum_{|m-l| < d_c} n_m` (periodic distance, `m = l`
//! included) and `delta_l` is the distance to the nearest site of strictly
//! higher density. Sites at the global maximum get `delta = L/2`, ties
//! included. The statistic is `gamma_l = rho_l * delta_l`.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::fock::{Configuration, Species};
use crate::model::StateVector;
use crate::{Error, Result};

/// Default density cutoff `d_c`.
pub const DEFAULT_CUTOFF: usize = 4;
/// Default number of histogram bins on `[0, gamma_max]`.
pub const DEFAULT_BINS: usize = 40;

/// Outcome of a joint projective measurement of every site.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Snapshot {
    pub configuration: Configuration,
    pub time: f64,
    pub trajectory: u64,
}

/// Configuration drawn by inverting the Born CDF at `u` in `[0, 1)`.
pub fn sample_configuration(psi: &StateVector, u: f64) -> Configuration {
    let amps = psi.amplitudes();
    let total: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last_nonzero = 0;
    for (i, a) in amps.iter().enumerate() {
        let w = a.norm_sqr();
        if w > 0.0 {
            acc += w;
            last_nonzero = i;
            if target < acc {
                return psi.basis().state(i);
            }
        }
    }
    psi.basis().state(last_nonzero)
}

/// Draw a snapshot with Born probabilities `|<c|psi>|^2`.
pub fn sample_snapshot<R: Rng + ?Sized>(psi: &StateVector, rng: &mut R, time: f64, trajectory: u64) -> Snapshot {
    Snapshot {
        configuration: sample_configuration(psi, rng.random::<f64>()),
        time,
        trajectory,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterStats {
    pub gamma: Vec<f64>,
    pub species: Species,
    pub cutoff: usize,
}

/// Largest possible `gamma` on `L` sites.
pub fn gamma_max(sites: usize) -> f64 {
    (sites * sites) as f64 / 4.0
}

#[inline]
fn ring_distance(a: usize, b: usize, sites: usize) -> usize {
    let d = a.abs_diff(b);
    d.min(sites - d)
}

/// Local densities `rho_l` of a 0/1 occupation vector.
pub fn local_density(occupation: &[u8], cutoff: usize) -> Vec<u32> {
    let sites = occupation.len();
    (0..sites)
        .map(|l| {
            if occupation[l] == 0 {
                return 0;
            }
            (0..sites)
                .filter(|&m| ring_distance(l, m, sites) < cutoff)
                .map(|m| occupation[m] as u32)
                .sum()
        })
        .collect()
}

/// `gamma_l` for a 0/1 occupation vector on a ring.
pub fn gamma_from_occupation(occupation: &[u8], cutoff: usize) -> Vec<f64> {
    let sites = occupation.len();
    let rho = local_density(occupation, cutoff);
    let half = sites as f64 / 2.0;
    (0..sites)
        .map(|l| {
            if rho[l] == 0 {
                return 0.0;
            }
            let delta = (0..sites)
                .filter(|&m| rho[m] > rho[l])
                .map(|m| ring_distance(l, m, sites))
                .min()
                .map_or(half, |d| d as f64);
            rho[l] as f64 * delta
        })
        .collect()
}

/// Clustering statistic of one species in configuration `c`.
pub fn cluster_gamma(c: Configuration, sites: usize, species: Species, cutoff: usize) -> ClusterStats {
    let occ = c.species_occupation(sites, species);
    ClusterStats {
        gamma: gamma_from_occupation(&occ, cutoff),
        species,
        cutoff,
    }
}

/// Normalized histogram with uniform bins on `[lo, hi]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    /// Probability density per bin; `sum(density) * width == 1`.
    pub density: Vec<f64>,
    pub samples: usize,
}

impl Histogram {
    pub fn bins(&self) -> usize {
        self.density.len()
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.bins() as f64
    }

    pub fn centers(&self) -> Vec<f64> {
        let w = self.width();
        (0..self.bins()).map(|k| self.lo + (k as f64 + 0.5) * w).collect()
    }

    /// Probability mass per bin.
    pub fn masses(&self) -> Vec<f64> {
        let w = self.width();
        self.density.iter().map(|d| d * w).collect()
    }

    /// Masses summed over `groups` consecutive equal-width groups of bins.
    pub fn coarse_masses(&self, groups: usize) -> Vec<f64> {
        let per = self.bins().div_ceil(groups);
        self.masses().chunks(per).map(|c| c.iter().sum()).collect()
    }

    /// Probability mass strictly above `threshold`, counting whole bins
    /// whose lower edge is at or above it.
    pub fn mass_above(&self, threshold: f64) -> f64 {
        let w = self.width();
        self.masses()
            .iter()
            .enumerate()
            .filter(|(k, _)| self.lo + *k as f64 * w >= threshold)
            .map(|(_, m)| m)
            .sum()
    }
}

/// Histogram of all pooled `gamma` values on `[0, L^2/4]`.
pub fn gamma_histogram(stats: &[ClusterStats], bins: usize, sites: usize) -> Result<Histogram> {
    if stats.is_empty() || stats.iter().all(|s| s.gamma.is_empty()) {
        return Err(Error::parameter("stats", "empty input"));
    }
    if bins == 0 {
        return Err(Error::parameter("bins", "need at least one bin"));
    }
    let hi = gamma_max(sites);
    let mut counts = vec![0usize; bins];
    let mut n = 0usize;
    for g in stats.iter().flat_map(|s| s.gamma.iter()) {
        let k = ((g / hi) * bins as f64) as usize;
        counts[k.min(bins - 1)] += 1;
        n += 1;
    }
    let w = hi / bins as f64;
    Ok(Histogram {
        lo: 0.0,
        hi,
        density: counts.iter().map(|&c| c as f64 / (n as f64 * w)).collect(),
        samples: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use crate::fock::{FockBasis, SiteOccupation as S};
    use alloc::sync::Arc;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::SeedableRng;

    /// Literal evaluation of the two defining formulas, site by site.
    fn brute_gamma(n: &[u8], dc: usize) -> Vec<f64> {
        let l = n.len() as i64;
        let dist = |a: i64, b: i64| {
            let d = (a - b).rem_euclid(l);
            d.min(l - d)
        };
        let rho: Vec<i64> = (0..l)
            .map(|i| n[i as usize] as i64 * (0..l).filter(|&m| dist(i, m) < dc as i64).map(|m| n[m as usize] as i64).sum::<i64>())
            .collect();
        let max = *rho.iter().max().unwrap();
        (0..l)
            .map(|i| {
                let delta = if rho[i as usize] == max {
                    l as f64 / 2.0
                } else {
                    (0..l).filter(|&m| rho[m as usize] > rho[i as usize]).map(|m| dist(i, m)).min().unwrap() as f64
                };
                rho[i as usize] as f64 * delta
            })
            .collect()
    }

    fn down_config(sites: usize, downs: &[usize]) -> Configuration {
        let mut s = vec![S::EMPTY; sites];
        for &d in downs {
            s[d] = S::DOWN;
        }
        Configuration::from_sites(&s)
    }

    #[test]
    fn empty_species_has_zero_gamma() {
        let c = Configuration::from_sites(&[S::UP, S::UP, S::EMPTY, S::UP]);
        let st = cluster_gamma(c, 4, Species::Down, 2);
        assert!(st.gamma.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn single_particle() {
        let st = cluster_gamma(down_config(12, &[3]), 12, Species::Down, 4);
        for (l, g) in st.gamma.iter().enumerate() {
            assert_eq!(*g, if l == 3 { 6.0 } else { 0.0 });
        }
    }

    #[test]
    fn block_of_five_matches_brute_force() {
        let c = down_config(12, &[2, 3, 4, 5, 6]);
        let st = cluster_gamma(c, 12, Species::Down, 4);
        let occ = c.species_occupation(12, Species::Down);
        assert_eq!(st.gamma, brute_gamma(&occ, 4));
        // Centre site 4 sees all five: rho = 5, delta = 6.
        assert_eq!(st.gamma[4], 30.0);
        assert!(st.gamma.iter().all(|&g| g <= gamma_max(12)));
    }

    #[test]
    fn histogram_of_zeros_is_a_unit_mass_in_the_first_bin() {
        let st = ClusterStats {
            gamma: vec![0.0; 10],
            species: Species::Down,
            cutoff: 4,
        };
        let h = gamma_histogram(&[st], 40, 10).unwrap();
        let m = h.masses();
        assert!((m[0] - 1.0).abs() < 1e-12);
        assert!(m[1..].iter().all(|&x| x == 0.0));
        assert!((h.density.iter().sum::<f64>() * h.width() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn histogram_rejects_empty_input() {
        assert!(gamma_histogram(&[], 40, 10).is_err());
    }

    #[test]
    fn histogram_includes_gamma_max() {
        let st = ClusterStats {
            gamma: vec![25.0, 0.0],
            species: Species::Down,
            cutoff: 4,
        };
        let h = gamma_histogram(&[st], 5, 10).unwrap();
        assert!((h.masses()[4] - 0.5).abs() < 1e-12);
        assert!((h.mass_above(12.5) - 0.5).abs() < 1e-12);
        assert_eq!(h.coarse_masses(5).len(), 5);
    }

    #[test]
    fn single_configuration_sampled_with_certainty() {
        let basis = Arc::new(FockBasis::new(3, 2).unwrap());
        let c = basis.state(5);
        let psi = StateVector::basis_state(basis, c);
        for u in [0.0, 0.3, 0.999_999] {
            assert_eq!(sample_configuration(&psi, u), c);
        }
    }

    #[test]
    fn plus_state_frequencies() {
        let basis = Arc::new(FockBasis::new(2, 1).unwrap());
        let a = Complex64::new(core::f64::consts::FRAC_1_SQRT_2, 0.0);
        let mut amps = vec![Complex64::new(0.0, 0.0); 4];
        amps[0] = a;
        amps[1] = a;
        let psi = StateVector::new(basis.clone(), amps).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = 10_000;
        let ups = (0..n)
            .filter(|_| sample_snapshot(&psi, &mut rng, 0.0, 0).configuration == basis.state(0))
            .count();
        let sigma = (n as f64 * 0.25).sqrt();
        assert!((ups as f64 - n as f64 / 2.0).abs() < 4.0 * sigma);
    }

    #[test]
    fn born_sampling_goodness_of_fit() {
        // 20-dimensional random state, 10^5 draws, Pearson chi-square.
        let basis = Arc::new(FockBasis::new(3, 3).unwrap());
        assert_eq!(basis.len(), 20);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let amps: Vec<Complex64> = (0..20)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let mut psi = StateVector::new(basis.clone(), amps).unwrap();
        psi.normalize();
        let draws = 100_000;
        let mut counts = [0usize; 20];
        for _ in 0..draws {
            let c = sample_snapshot(&psi, &mut rng, 0.0, 0).configuration;
            counts[basis.index_of(c).unwrap()] += 1;
        }
        let chi2: f64 = counts
            .iter()
            .zip(psi.amplitudes())
            .map(|(&o, a)| {
                let e = a.norm_sqr() * draws as f64;
                (o as f64 - e).powi(2) / e
            })
            .sum();
        // 19 degrees of freedom: P(chi2 > 43.82) = 0.001.
        assert!(chi2 < 43.82, "chi2 = {chi2}");
    }

    proptest! {
        #[test]
        fn gamma_matches_brute_force(bits in 0u32..(1 << 12), dc in 1usize..=6) {
            // One species never holds more than half of the sites at N = L/2.
            prop_assume!(bits.count_ones() <= 6);
            let occ: Vec<u8> = (0..12).map(|l| ((bits >> l) & 1) as u8).collect();
            let g = gamma_from_occupation(&occ, dc);
            prop_assert_eq!(&g, &brute_gamma(&occ, dc));
            let rho = local_density(&occ, dc);
            let max = *rho.iter().max().unwrap();
            for l in 0..12 {
                prop_assert!(g[l] >= 0.0 && g[l] <= gamma_max(12));
                if rho[l] > 0 && rho[l] < max {
                    prop_assert!(g[l] >= rho[l] as f64);
                }
            }
        }

        #[test]
        fn gamma_is_translation_invariant(bits in 0u32..(1 << 10), shift in 0usize..10, dc in 1usize..=5) {
            let occ: Vec<u8> = (0..10).map(|l| ((bits >> l) & 1) as u8).collect();
            let shifted: Vec<u8> = (0..10).map(|l| occ[(l + 10 - shift) % 10]).collect();
            let g = gamma_from_occupation(&occ, dc);
            let gs = gamma_from_occupation(&shifted, dc);
            for l in 0..10 {
                prop_assert_eq!(gs[(l + shift) % 10], g[l]);
            }
        }
    }
}
