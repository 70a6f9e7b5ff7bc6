//! Magnetization moments, Binder cumulant, two-site reduced density matrices
//! and long-distance coherence, plus the mergeable per-ensemble record.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::clustering::Snapshot;
use crate::fock::FockBasis;
use crate::linalg::CMatrix;
use crate::model::StateVector;
use crate::{Error, Result};

/// Below this `<M^2>` the Binder cumulant is reported as undefined.
pub const BINDER_M2_FLOOR: f64 = 1e-12;

/// `<M>`, `<M^2>`, `<M^4>` of one pure state.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Moments {
    pub m1: f64,
    pub m2: f64,
    pub m4: f64,
}

pub fn magnetization_moments(psi: &StateVector) -> Moments {
    let sites = psi.basis().sites();
    let mut m = Moments::default();
    for (c, a) in psi.basis().states().iter().zip(psi.amplitudes()) {
        let p = a.norm_sqr();
        if p == 0.0 {
            continue;
        }
        let mag = c.total_magnetization(sites) as f64;
        let sq = mag * mag;
        m.m1 += p * mag;
        m.m2 += p * sq;
        m.m4 += p * sq * sq;
    }
    m
}

/// `U = 1 - m4 / (3 m2^2)`, or `None` when `m2` is numerically zero.
pub fn binder(m2: f64, m4: f64) -> Option<f64> {
    if m2 <= BINDER_M2_FLOOR {
        None
    } else {
        Some(1.0 - m4 / (3.0 * m2 * m2))
    }
}

/// Reduced density matrix of sites `(l, l + L/2)`, indexed by
/// `4 * code(n_l) + code(n_{l+L/2})` with codes `{empty, up, down, up+down}`.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoSiteMatrix(pub [[Complex64; 16]; 16]);

impl Default for TwoSiteMatrix {
    fn default() -> Self {
        TwoSiteMatrix([[Complex64::new(0.0, 0.0); 16]; 16])
    }
}

impl TwoSiteMatrix {
    pub fn trace(&self) -> f64 {
        (0..16).map(|i| self.0[i][i].re).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let mut e: f64 = 0.0;
        for i in 0..16 {
            for j in 0..16 {
                e = e.max((self.0[i][j] - self.0[j][i].conj()).norm());
            }
        }
        e
    }

    /// Sum of `|rho_{v,v'}|` over `v != v'`.
    pub fn off_diagonal_l1(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..16 {
            for j in 0..16 {
                if i != j {
                    s += self.0[i][j].norm();
                }
            }
        }
        s
    }

    pub fn add_assign(&mut self, other: &TwoSiteMatrix) {
        for i in 0..16 {
            for j in 0..16 {
                self.0[i][j] += other.0[i][j];
            }
        }
    }

    pub fn scaled(&self, s: f64) -> TwoSiteMatrix {
        let mut out = self.clone();
        for row in out.0.iter_mut() {
            for z in row.iter_mut() {
                *z *= s;
            }
        }
        out
    }
}

/// Grouping of basis states by everything outside a site pair, so that
/// partial traces reduce to sums over small groups.
#[derive(Clone, Debug)]
pub struct PairTable {
    sites: usize,
    /// Per offset `l`: `(index, local code)` sorted by the masked remainder.
    members: Vec<Vec<(u32, u8)>>,
    /// Per offset `l`: group boundaries into `members[l]`.
    starts: Vec<Vec<u32>>,
}

impl PairTable {
    pub fn new(basis: &FockBasis) -> Result<Self> {
        let sites = basis.sites();
        if sites % 2 != 0 {
            return Err(Error::parameter("sites", "two-site coherence needs an even L"));
        }
        let half = sites / 2;
        let mut members = Vec::with_capacity(sites);
        let mut starts = Vec::with_capacity(sites);
        for l in 0..sites {
            let partner = (l + half) % sites;
            let pair_mask = (3u32 << (2 * l)) | (3u32 << (2 * partner));
            let mut entries: Vec<(u32, u32, u8)> = basis
                .states()
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let b = c.bits();
                    let code = (((b >> (2 * l)) & 3) << 2) | ((b >> (2 * partner)) & 3);
                    (b & !pair_mask, i as u32, code as u8)
                })
                .collect();
            entries.sort_unstable_by_key(|e| (e.0, e.1));
            let mut st = Vec::new();
            for (k, e) in entries.iter().enumerate() {
                if k == 0 || entries[k - 1].0 != e.0 {
                    st.push(k as u32);
                }
            }
            st.push(entries.len() as u32);
            members.push(entries.into_iter().map(|(_, i, c)| (i, c)).collect());
            starts.push(st);
        }
        Ok(PairTable { sites, members, starts })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    /// Partial trace of `|psi><psi|` onto sites `(l, l + L/2)`.
    pub fn reduced(&self, amps: &[Complex64], l: usize) -> TwoSiteMatrix {
        let mut rho = TwoSiteMatrix::default();
        let members = &self.members[l];
        for w in self.starts[l].windows(2) {
            let group = &members[w[0] as usize..w[1] as usize];
            for &(i, ci) in group {
                let ai = amps[i as usize];
                if ai.norm_sqr() == 0.0 {
                    continue;
                }
                for &(j, cj) in group {
                    rho.0[ci as usize][cj as usize] += ai * amps[j as usize].conj();
                }
            }
        }
        rho
    }

    pub fn reduced_all(&self, amps: &[Complex64]) -> Vec<TwoSiteMatrix> {
        (0..self.sites).map(|l| self.reduced(amps, l)).collect()
    }
}

/// Reduced two-site density matrix at maximal distance.
pub fn reduced_two_site(psi: &StateVector, l: usize) -> Result<TwoSiteMatrix> {
    let table = PairTable::new(psi.basis())?;
    if l >= table.sites {
        return Err(Error::parameter("site", "site index out of range"));
    }
    Ok(table.reduced(psi.amplitudes(), l))
}

/// `C = sum_l sum_{v != v'} |<v|rho_l|v'>|` over (already ensemble-averaged) matrices.
pub fn coherence(reduced: &[TwoSiteMatrix]) -> f64 {
    reduced.iter().map(TwoSiteMatrix::off_diagonal_l1).sum()
}

/// A value with a one-sigma error estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// Which sample times carry which optional records.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesLayout {
    pub times: Vec<f64>,
    pub coherence: Vec<bool>,
    pub density: Vec<bool>,
    pub snapshot: Vec<bool>,
    pub sites: usize,
    pub dim: usize,
}

/// Per-trajectory moments at every sample time.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentRow {
    pub trajectory: u64,
    pub m1: Vec<f64>,
    pub m2: Vec<f64>,
    pub m4: Vec<f64>,
}

/// Ensemble record of a set of trajectories. Merging is associative and
/// commutative: moment rows are kept per trajectory (sorted by index), matrix
/// sums are added.
#[derive(Clone, Debug)]
pub struct ObservableSeries {
    layout: SeriesLayout,
    rows: Vec<MomentRow>,
    /// `[coherence time][l]` sums of reduced matrices.
    reduced: Vec<Vec<TwoSiteMatrix>>,
    /// Sums of `|psi><psi|` at density times.
    density: Vec<CMatrix>,
    snapshots: Vec<Snapshot>,
}

impl ObservableSeries {
    pub fn empty(layout: SeriesLayout) -> Self {
        let n_coh = layout.coherence.iter().filter(|&&b| b).count();
        let n_den = layout.density.iter().filter(|&&b| b).count();
        let reduced = vec![vec![TwoSiteMatrix::default(); layout.sites]; n_coh];
        let density = vec![CMatrix::zeros(layout.dim); n_den];
        ObservableSeries {
            layout,
            rows: Vec::new(),
            reduced,
            density,
            snapshots: Vec::new(),
        }
    }

    pub fn layout(&self) -> &SeriesLayout {
        &self.layout
    }

    pub fn times(&self) -> &[f64] {
        &self.layout.times
    }

    pub fn count(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[MomentRow] {
        &self.rows
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    pub fn coherence_times(&self) -> Vec<f64> {
        self.flagged_times(&self.layout.coherence)
    }

    pub fn density_times(&self) -> Vec<f64> {
        self.flagged_times(&self.layout.density)
    }

    fn flagged_times(&self, flags: &[bool]) -> Vec<f64> {
        self.layout
            .times
            .iter()
            .zip(flags)
            .filter(|(_, &f)| f)
            .map(|(t, _)| *t)
            .collect()
    }

    pub(crate) fn push_row(&mut self, row: MomentRow) {
        self.rows.push(row);
    }

    pub(crate) fn add_reduced(&mut self, slot: usize, mats: &[TwoSiteMatrix]) {
        for (acc, m) in self.reduced[slot].iter_mut().zip(mats) {
            acc.add_assign(m);
        }
    }

    pub(crate) fn add_density(&mut self, slot: usize, amps: &[Complex64]) {
        let d = &mut self.density[slot];
        let n = d.dim();
        let data = d.as_mut_slice();
        for i in 0..n {
            if amps[i].norm_sqr() == 0.0 {
                continue;
            }
            for j in 0..n {
                data[i * n + j] += amps[i] * amps[j].conj();
            }
        }
    }

    pub(crate) fn push_snapshot(&mut self, s: Snapshot) {
        self.snapshots.push(s);
    }

    /// Combine two ensembles recorded with the same layout.
    pub fn merge(mut self, other: ObservableSeries) -> Result<ObservableSeries> {
        if self.layout != other.layout {
            return Err(Error::parameter("layout", "cannot merge series with different sample layouts"));
        }
        self.rows.extend(other.rows);
        self.rows.sort_by_key(|r| r.trajectory);
        for (a, b) in self.reduced.iter_mut().zip(&other.reduced) {
            for (x, y) in a.iter_mut().zip(b) {
                x.add_assign(y);
            }
        }
        for (a, b) in self.density.iter_mut().zip(&other.density) {
            a.add_scaled(1.0, b);
        }
        self.snapshots.extend(other.snapshots);
        self.snapshots
            .sort_by(|a, b| (a.trajectory, a.time).partial_cmp(&(b.trajectory, b.time)).unwrap());
        Ok(self)
    }

    /// Restrict to the sample times `<= t_max`, e.g. to pool with a shorter run.
    pub fn truncated(&self, t_max: f64) -> ObservableSeries {
        let keep = self.layout.times.iter().take_while(|&&t| t <= t_max + 1e-9).count();
        let slots = |flags: &[bool]| flags[..keep].iter().filter(|&&b| b).count();
        let (n_coh, n_den) = (slots(&self.layout.coherence), slots(&self.layout.density));
        let layout = SeriesLayout {
            times: self.layout.times[..keep].to_vec(),
            coherence: self.layout.coherence[..keep].to_vec(),
            density: self.layout.density[..keep].to_vec(),
            snapshot: self.layout.snapshot[..keep].to_vec(),
            sites: self.layout.sites,
            dim: self.layout.dim,
        };
        let rows = self
            .rows
            .iter()
            .map(|r| MomentRow {
                trajectory: r.trajectory,
                m1: r.m1[..keep].to_vec(),
                m2: r.m2[..keep].to_vec(),
                m4: r.m4[..keep].to_vec(),
            })
            .collect();
        ObservableSeries {
            layout,
            rows,
            reduced: self.reduced[..n_coh].to_vec(),
            density: self.density[..n_den].to_vec(),
            snapshots: self.snapshots.iter().filter(|s| s.time <= t_max + 1e-9).cloned().collect(),
        }
    }

    fn column(&self, which: fn(&MomentRow) -> &Vec<f64>, t: usize) -> (f64, f64) {
        let n = self.rows.len() as f64;
        let mean = self.rows.iter().map(|r| which(r)[t]).sum::<f64>() / n;
        let var = if self.rows.len() > 1 {
            self.rows.iter().map(|r| (which(r)[t] - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        (mean, (var / n).sqrt())
    }

    /// Ensemble mean of `<M>` with its standard error.
    pub fn magnetization(&self, t: usize) -> Estimate {
        let (value, error) = self.column(|r| &r.m1, t);
        Estimate { value, error }
    }

    pub fn m2(&self, t: usize) -> Estimate {
        let (value, error) = self.column(|r| &r.m2, t);
        Estimate { value, error }
    }

    pub fn m4(&self, t: usize) -> Estimate {
        let (value, error) = self.column(|r| &r.m4, t);
        Estimate { value, error }
    }

    /// Binder cumulant of the ensemble moments at sample `t`, with a
    /// leave-one-trajectory-out jackknife error.
    pub fn binder(&self, t: usize) -> Option<Estimate> {
        self.binder_window(&[t])
    }

    /// Binder cumulant averaged over the sample times in `[t_lo, t_hi]`.
    pub fn binder_time_average(&self, t_lo: f64, t_hi: f64) -> Option<Estimate> {
        let idx: Vec<usize> = self
            .layout
            .times
            .iter()
            .enumerate()
            .filter(|(_, &t)| t >= t_lo - 1e-9 && t <= t_hi + 1e-9)
            .map(|(i, _)| i)
            .collect();
        if idx.is_empty() {
            return None;
        }
        self.binder_window(&idx)
    }

    fn binder_window(&self, idx: &[usize]) -> Option<Estimate> {
        let n = self.rows.len();
        if n == 0 {
            return None;
        }
        let s2: Vec<f64> = idx.iter().map(|&t| self.rows.iter().map(|r| r.m2[t]).sum()).collect();
        let s4: Vec<f64> = idx.iter().map(|&t| self.rows.iter().map(|r| r.m4[t]).sum()).collect();
        let avg = |s2: &dyn Fn(usize) -> f64, s4: &dyn Fn(usize) -> f64, count: f64| -> Option<f64> {
            let mut acc = 0.0;
            for k in 0..idx.len() {
                acc += binder(s2(k) / count, s4(k) / count)?;
            }
            Some(acc / idx.len() as f64)
        };
        let value = avg(&|k| s2[k], &|k| s4[k], n as f64)?;
        if n < 2 {
            return Some(Estimate { value, error: 0.0 });
        }
        let mut loo = Vec::with_capacity(n);
        for r in &self.rows {
            let u = avg(&|k| s2[k] - r.m2[idx[k]], &|k| s4[k] - r.m4[idx[k]], (n - 1) as f64)?;
            loo.push(u);
        }
        let mean = loo.iter().sum::<f64>() / n as f64;
        let var = loo.iter().map(|u| (u - mean).powi(2)).sum::<f64>() * (n - 1) as f64 / n as f64;
        Some(Estimate {
            value,
            error: var.sqrt(),
        })
    }

    /// Ensemble-averaged reduced matrices at the `slot`-th coherence time.
    pub fn reduced_mean(&self, slot: usize) -> Vec<TwoSiteMatrix> {
        let inv = 1.0 / self.rows.len().max(1) as f64;
        self.reduced[slot].iter().map(|m| m.scaled(inv)).collect()
    }

    /// `C(t)` at every coherence time, computed from ensemble-averaged matrices.
    pub fn coherence_series(&self) -> Vec<(f64, f64)> {
        self.coherence_times()
            .into_iter()
            .enumerate()
            .map(|(slot, t)| (t, coherence(&self.reduced_mean(slot))))
            .collect()
    }

    /// Ensemble-averaged density matrix at the `slot`-th density time.
    pub fn density_mean(&self, slot: usize) -> CMatrix {
        let mut m = self.density[slot].clone();
        m.scale(1.0 / self.rows.len().max(1) as f64);
        m
    }

    /// Index of the sample time closest to `t`.
    pub fn time_index(&self, t: f64) -> Option<usize> {
        self.layout.times.iter().position(|&s| (s - t).abs() < 1e-9)
    }
}
