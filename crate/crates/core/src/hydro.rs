//! Coarse-grained density and magnetization fields on a periodic lattice.
//!
//! With `dO_l = O_{l+1} - O_{l-1}` and `d2O_l = O_{l+1} + O_{l-1} - 2 O_l`:
//!
//! ```text
//! d rho/dt = -G_M (2 d(rho m) - d m - 1/2 d2 rho)
//! d m/dt   = -G_M (d(rho^2) - d rho + d(m^2) - 1/2 d2 m + (g_rho + g_m) d rho) - 2 G_A R
//! ```
//!
//! where `R` is the alignment reaction term of the chosen [`Closure`] and
//! `M` is the spatial mean of `m`.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::{Error, Result};

/// Fields with `|m| > BLOW_UP_LIMIT` abort the integration.
pub const BLOW_UP_LIMIT: f64 = 10.0;
pub const DEFAULT_DT: f64 = 0.01;
const DEGENERACY_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Closure {
    /// Gaussian moments with variances `g_X rho`:
    /// `R = m - 2K m^2 M + 2K^2 m^3 M^2 - 2K g_m rho M + 6K^2 g_m rho m M^2`.
    /// Only defined for `h = 0`.
    Gaussian,
    /// Landau form around the homogeneous transition:
    /// `R = (1 + D_h) m - (K/K_c) M + 2 K_c^2 (q - 1/K_c) m M^2`,
    /// without the `g_X` transport corrections.
    Landau,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClosureParams {
    pub gamma_rho: f64,
    pub gamma_m: f64,
    pub sigma2: f64,
    pub q: f64,
    /// Alignment strength `K`.
    pub alignment: f64,
    pub h: f64,
    pub gamma_motion: f64,
    pub gamma_align: f64,
    pub closure: Closure,
}

impl Default for ClosureParams {
    /// `g_rho = 0.2`, `g_m = 0.6`, `sigma^2 = 0.125`, `q = 0.5`, `K = 4`,
    /// `h = 0`, `G_M = 1`, `G_A = 0.1`, Gaussian closure.
    fn default() -> Self {
        ClosureParams {
            gamma_rho: 0.2,
            gamma_m: 0.6,
            sigma2: 0.125,
            q: 0.5,
            alignment: 4.0,
            h: 0.0,
            gamma_motion: 1.0,
            gamma_align: 0.1,
            closure: Closure::Gaussian,
        }
    }
}

impl ClosureParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_rho >= 0.0) {
            return Err(Error::parameter("gamma_rho", "must be >= 0"));
        }
        if !(self.gamma_m >= 0.0) {
            return Err(Error::parameter("gamma_m", "must be >= 0"));
        }
        if !(self.sigma2 > 0.0) {
            return Err(Error::parameter("sigma2", "must be > 0"));
        }
        for (name, v) in [
            ("q", self.q),
            ("alignment", self.alignment),
            ("h", self.h),
            ("gamma_motion", self.gamma_motion),
            ("gamma_align", self.gamma_align),
        ] {
            if !v.is_finite() {
                return Err(Error::parameter(name, "must be finite"));
            }
        }
        if self.gamma_motion < 0.0 || self.gamma_align < 0.0 {
            return Err(Error::parameter("gamma_align", "rates must be >= 0"));
        }
        if self.closure == Closure::Gaussian && self.h != 0.0 {
            return Err(Error::parameter("h", "the Gaussian field closure is defined for h = 0 only"));
        }
        Ok(())
    }

    /// `K_c = 1 / (2 sigma^2)`.
    pub fn kc(&self) -> f64 {
        1.0 / (2.0 * self.sigma2)
    }

    /// `D_h = 4 h^2 / (G_A (G_M + G_A))`.
    pub fn delta_h(&self) -> f64 {
        if self.h == 0.0 {
            0.0
        } else {
            4.0 * self.h * self.h / (self.gamma_align * (self.gamma_motion + self.gamma_align))
        }
    }

    /// Shifted critical coupling `K_c(h) = (1 + D_h) K_c(0)`.
    pub fn kc_h(&self) -> f64 {
        (1.0 + self.delta_h()) * self.kc()
    }
}

/// Homogeneous fixed point `m^2 = (K/K_c - 1 - D_h) / (2 K_c^2 (q - 1/K_c))`,
/// or `None` on the disordered side where it would be negative.
pub fn homogeneous_m2(p: &ClosureParams) -> Result<Option<f64>> {
    if !(p.sigma2 > 0.0) {
        return Err(Error::parameter("sigma2", "must be > 0"));
    }
    let kc = p.kc();
    let denom = p.q - 1.0 / kc;
    if denom.abs() < DEGENERACY_TOL {
        return Err(Error::DegenerateClosure);
    }
    let m2 = (p.alignment / kc - 1.0 - p.delta_h()) / (2.0 * kc * kc * denom);
    Ok(if m2 >= 0.0 { Some(m2) } else { None })
}

/// Linear relaxation rate `-4 G_A (K/K_c - 1 - D_h)` of homogeneous deviations
/// from the ordered branch; negative means stable.
pub fn homogeneous_stability(p: &ClosureParams) -> f64 {
    -4.0 * p.gamma_align * (p.alignment / p.kc() - 1.0 - p.delta_h())
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldState {
    pub rho: Vec<f64>,
    pub m: Vec<f64>,
    pub t: f64,
}

impl FieldState {
    pub fn homogeneous(sites: usize, rho: f64, m: f64) -> Self {
        FieldState {
            rho: vec![rho; sites],
            m: vec![m; sites],
            t: 0.0,
        }
    }

    /// Up particles with occupation `1/2 exp(-((x - L/2)/width)^2 / 2)`, so
    /// `rho = m = n_up / 2`.
    pub fn gaussian_cluster(sites: usize, width: f64) -> Self {
        let center = sites as f64 / 2.0;
        let n_up: Vec<f64> = (0..sites)
            .map(|x| 0.5 * (-0.5 * ((x as f64 - center) / width).powi(2)).exp())
            .collect();
        let half: Vec<f64> = n_up.iter().map(|n| 0.5 * n).collect();
        FieldState {
            rho: half.clone(),
            m: half,
            t: 0.0,
        }
    }

    /// Adds independent uniform noise in `[-amplitude, amplitude]` to both fields.
    pub fn with_noise<R: Rng + ?Sized>(mut self, amplitude: f64, rng: &mut R) -> Self {
        for v in self.rho.iter_mut().chain(self.m.iter_mut()) {
            *v += amplitude * (2.0 * rng.random::<f64>() - 1.0);
        }
        self
    }

    pub fn sites(&self) -> usize {
        self.rho.len()
    }

    pub fn mass(&self) -> f64 {
        self.rho.iter().sum()
    }

    /// `rho_x -> rho_{-x}`, `m_x -> -m_{-x}`.
    pub fn mirrored(&self) -> FieldState {
        let l = self.sites();
        FieldState {
            rho: (0..l).map(|x| self.rho[(l - x) % l]).collect(),
            m: (0..l).map(|x| -self.m[(l - x) % l]).collect(),
            t: self.t,
        }
    }
}

#[inline]
fn diff(o: &[f64], l: usize) -> f64 {
    let n = o.len();
    o[(l + 1) % n] - o[(l + n - 1) % n]
}

#[inline]
fn lap(o: &[f64], l: usize) -> f64 {
    let n = o.len();
    o[(l + 1) % n] + o[(l + n - 1) % n] - 2.0 * o[l]
}

fn rhs_into(s: &FieldState, p: &ClosureParams, d_rho: &mut [f64], d_m: &mut [f64], scratch: &mut [Vec<f64>; 3]) {
    let n = s.sites();
    let (rho, m) = (&s.rho, &s.m);
    let [rm, r2, m2] = scratch;
    for x in 0..n {
        rm[x] = rho[x] * m[x];
        r2[x] = rho[x] * rho[x];
        m2[x] = m[x] * m[x];
    }
    let mean = m.iter().sum::<f64>() / n as f64;
    let k = p.alignment;
    let gm = p.gamma_motion;
    let ga = p.gamma_align;
    let kc = p.kc();
    let dh = p.delta_h();
    let gaussian = p.closure == Closure::Gaussian;
    let g_sum = if gaussian { p.gamma_rho + p.gamma_m } else { 0.0 };
    for x in 0..n {
        d_rho[x] = -gm * (2.0 * diff(rm, x) - diff(m, x) - 0.5 * lap(rho, x));
        let transport = diff(r2, x) - diff(rho, x) + diff(m2, x) - 0.5 * lap(m, x) + g_sum * diff(rho, x);
        let mx = m[x];
        let reaction = if gaussian {
            mx - 2.0 * k * m2[x] * mean + 2.0 * k * k * m2[x] * mx * mean * mean - 2.0 * k * p.gamma_m * rho[x] * mean
                + 6.0 * k * k * p.gamma_m * rho[x] * mx * mean * mean
        } else {
            (1.0 + dh) * mx - (k / kc) * mean + 2.0 * kc * kc * (p.q - 1.0 / kc) * mx * mean * mean
        };
        d_m[x] = -gm * transport - 2.0 * ga * reaction;
    }
}

/// `(d rho/dt, d m/dt)` at `s`.
pub fn field_rhs(s: &FieldState, p: &ClosureParams) -> Result<(Vec<f64>, Vec<f64>)> {
    p.validate()?;
    if s.rho.len() != s.m.len() || s.rho.is_empty() {
        return Err(Error::parameter("fields", "rho and m must be nonempty and of equal length"));
    }
    let n = s.sites();
    let mut d_rho = vec![0.0; n];
    let mut d_m = vec![0.0; n];
    let mut scratch = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    rhs_into(s, p, &mut d_rho, &mut d_m, &mut scratch);
    Ok((d_rho, d_m))
}

/// RK4 integration to `t_max`; the state is recorded every `record_every`
/// time units (and at the start).
pub fn integrate_fields(
    s0: &FieldState,
    p: &ClosureParams,
    t_max: f64,
    dt: f64,
    record_every: f64,
) -> Result<Vec<FieldState>> {
    p.validate()?;
    if s0.rho.len() != s0.m.len() || s0.rho.is_empty() {
        return Err(Error::parameter("fields", "rho and m must be nonempty and of equal length"));
    }
    if !(dt > 0.0) || !(record_every > 0.0) || !(t_max >= 0.0) {
        return Err(Error::parameter("dt", "dt, record_every must be > 0 and t_max >= 0"));
    }
    let n = s0.sites();
    let mut s = s0.clone();
    let mut out = vec![s.clone()];
    let mut k: [(Vec<f64>, Vec<f64>); 4] = core::array::from_fn(|_| (vec![0.0; n], vec![0.0; n]));
    let mut tmp = s.clone();
    let mut scratch = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let records = ((t_max - s0.t) / record_every + 1e-9).floor() as usize;
    for r in 1..=records {
        let target = s0.t + r as f64 * record_every;
        let span = target - s.t;
        let steps = ((span / dt) - 1e-9).ceil().max(1.0) as usize;
        let h = span / steps as f64;
        for _ in 0..steps {
            {
                let (a, b) = &mut k[0];
                rhs_into(&s, p, a, b, &mut scratch);
            }
            for (stage, coef) in [(1usize, 0.5), (2, 0.5), (3, 1.0)] {
                for x in 0..n {
                    tmp.rho[x] = s.rho[x] + coef * h * k[stage - 1].0[x];
                    tmp.m[x] = s.m[x] + coef * h * k[stage - 1].1[x];
                }
                let (a, b) = &mut k[stage];
                rhs_into(&tmp, p, a, b, &mut scratch);
            }
            for x in 0..n {
                s.rho[x] += h / 6.0 * (k[0].0[x] + 2.0 * k[1].0[x] + 2.0 * k[2].0[x] + k[3].0[x]);
                s.m[x] += h / 6.0 * (k[0].1[x] + 2.0 * k[1].1[x] + 2.0 * k[2].1[x] + k[3].1[x]);
            }
            s.t += h;
            if s.m.iter().any(|v| !(v.abs() <= BLOW_UP_LIMIT)) {
                return Err(Error::BlowUp {
                    t: s.t,
                    limit: BLOW_UP_LIMIT,
                });
            }
        }
        s.t = target;
        out.push(s.clone());
    }
    Ok(out)
}

/// Position and height of the maximum of a periodic profile; the position is
/// refined by a parabola through the maximum and its neighbours.
pub fn profile_peak(field: &[f64]) -> (f64, f64) {
    let n = field.len();
    let mut best = 0;
    for (i, v) in field.iter().enumerate() {
        if *v > field[best] {
            best = i;
        }
    }
    let (a, b, c) = (field[(best + n - 1) % n], field[best], field[(best + 1) % n]);
    let denom = a - 2.0 * b + c;
    let shift = if denom < 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
    let pos = wrap(best as f64 + shift, n as f64);
    (pos, b)
}

fn wrap(x: f64, l: f64) -> f64 {
    let r = x % l;
    if r < 0.0 {
        r + l
    } else {
        r
    }
}

/// Population standard deviation of a profile.
pub fn spatial_std(field: &[f64]) -> f64 {
    let n = field.len() as f64;
    let mean = field.iter().sum::<f64>() / n;
    (field.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Signed displacement `b - a` on a ring of length `sites`, in `[-L/2, L/2)`.
pub fn periodic_displacement(a: f64, b: f64, sites: usize) -> f64 {
    let l = sites as f64;
    wrap(b - a + 0.5 * l, l) - 0.5 * l
}
