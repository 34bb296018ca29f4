//! Dyadic Green tensor near the fiber and its channel decomposition.
//!
//! Conventions: `c = ε0 = 1`, lengths in units of the fiber radius, and the
//! Maxwell dyadic normalized so that `Im G0(r, r) = (k/6π) I`. Couplings are
//! stored as `ĝ = (6π/k) u_i*·G·u_j`, so a decay rate reads `Γ/γ0 = Im ĝ`.
//!
//! The fiber Green tensor is split into guided modes and the full radiation
//! continuum, `G = Gg + Gr`:
//!
//! * `Gg` is the pole form of every guided mode ([`guided`]).
//! * `Im Gr` (the anti-Hermitian part, elementwise `Im` for a reciprocal
//!   tensor) is the radiation-mode sum per azimuthal order ([`radiation`]).
//! * `Re Gr` follows from the scattering expansion `G = G0 + Gs`
//!   ([`spectral`]) as `Re(G0 + Gs) − Re Gg`. It is reported as a separate
//!   shift channel, and the singular `Re G0(r, r)` is dropped.
//!
//! `G0` itself is evaluated analytically and serves as the free-space
//! baseline only.

pub mod guided;
pub mod kernel;
pub mod radiation;
pub mod spectral;

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::fiber_modes::{labels, FiberSpec, GuidedModeSolution, ModeLabel, ModeSolver};
pub use guided::GuidedKernel;
pub use kernel::{Dyadic, RadialKernel};
pub use spectral::{Poles, SourceExpansion, SpectralConfig};

pub const MAX_NU: u32 = crate::specfun::TABLE_MAX_ORDER as u32;

#[derive(Debug, thiserror::Error)]
pub enum GreenError {
    #[error("real part of the free dyadic is singular at coincident points")]
    Coincident,
    #[error("point at r = {r} lies inside the fiber core")]
    InsideCore { r: f64 },
    #[error("radiation quadrature did not converge, relative change {residual:.3e}")]
    Convergence { residual: f64 },
    #[error("azimuthal cutoff {nu_max} exceeds the supported {max}")]
    Order { nu_max: u32, max: u32 },
}

/// A point in cylindrical coordinates `(r, φ, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub r: f64,
    pub phi: f64,
    pub z: f64,
}

impl Site {
    pub fn new(r: f64, phi: f64, z: f64) -> Self {
        Self { r, phi, z }
    }

    pub fn cartesian(&self) -> Vector3<f64> {
        Vector3::new(self.r * self.phi.cos(), self.r * self.phi.sin(), self.z)
    }

    pub fn from_cartesian(x: f64, y: f64, z: f64) -> Self {
        Self { r: x.hypot(y), phi: y.atan2(x), z }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    Cartesian,
    Cylindrical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DyadicValue {
    pub basis: Basis,
    pub value: Dyadic,
    pub r1: Site,
    pub r2: Site,
    pub k0: f64,
}

/// Analytic free-space dyadic `G0(r1, r2)` in Cartesian components.
pub fn g0(r1: Site, r2: Site, k0: f64) -> Result<DyadicValue, GreenError> {
    let d = r1.cartesian() - r2.cartesian();
    let dist = d.norm();
    if dist == 0.0 {
        return Err(GreenError::Coincident);
    }
    let x = k0 * dist;
    let i = C64::i();
    let phase = (i * x).exp() / (4.0 * PI * dist);
    let re_a = (phase * (1.0 + i / x - 1.0 / (x * x))).re;
    let re_b = (phase * (-1.0 - 3.0 * i / x + 3.0 / (x * x))).re;
    // imaginary parts through j0 and j1/x, free of cancellation as x → 0
    let (j0, j1x) = if x < 0.05 {
        let x2 = x * x;
        (1.0 - x2 / 6.0 + x2 * x2 / 120.0, 1.0 / 3.0 - x2 / 30.0 + x2 * x2 / 840.0)
    } else {
        let (s, c) = x.sin_cos();
        (s / x, (s / x - c) / (x * x))
    };
    let pref = k0 / (4.0 * PI);
    let a = C64::new(re_a, pref * (j0 - j1x));
    let b = C64::new(re_b, pref * (3.0 * j1x - j0));
    let u = d / dist;
    let value = Dyadic::from_fn(|p, q| {
        let delta = if p == q { 1.0 } else { 0.0 };
        a * delta + b * (u[p] * u[q])
    });
    Ok(DyadicValue { basis: Basis::Cartesian, value, r1, r2, k0 })
}

/// `Im G0(r, r) = (k/6π) I`, returned as the purely imaginary dyadic.
pub fn g0_coincident(k0: f64) -> Dyadic {
    Dyadic::identity() * C64::new(0.0, k0 / (6.0 * PI))
}

/// `ĝ0`: the free dyadic in hat units; the coincident value keeps only its
/// imaginary part.
pub fn g0_hat(r1: Site, r2: Site, k0: f64) -> Dyadic {
    let scale = C64::from(6.0 * PI / k0);
    match g0(r1, r2, k0) {
        Ok(v) => v.value * scale,
        Err(_) => g0_coincident(k0) * scale,
    }
}

/// `u1*·M·u2`.
pub fn project(m: &Dyadic, u1: &Vector3<C64>, u2: &Vector3<C64>) -> C64 {
    (u1.adjoint() * m * u2)[(0, 0)]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenConfig {
    /// Radiation orders `|ν| ≤ nu_max`.
    pub nu_max: u32,
    /// Gauss–Legendre nodes per θ-panel of the radiation integral.
    pub nodes: usize,
    pub panels: usize,
    /// Relative change allowed when the radiation panels are doubled.
    pub tolerance: f64,
    pub adaptive: bool,
    pub l_max: u32,
    /// Evaluate `Re Gr` through the scattering expansion.
    pub real_part: bool,
    pub spectral_nodes: usize,
}

impl Default for GreenConfig {
    fn default() -> Self {
        Self {
            nu_max: 7,
            nodes: 64,
            panels: 8,
            tolerance: 1e-3,
            adaptive: true,
            l_max: crate::fiber_modes::DEFAULT_L_MAX,
            real_part: true,
            spectral_nodes: 32,
        }
    }
}

impl GreenConfig {
    pub fn spectral(&self) -> SpectralConfig {
        SpectralConfig { nodes: self.spectral_nodes, ..SpectralConfig::default() }
    }
}

/// Channel-resolved dyadics (hat units, Cartesian) for one pair of sites.
#[derive(Debug, Clone)]
pub struct ChannelDyadics {
    pub free: Dyadic,
    pub guided: Vec<(ModeLabel, Dyadic)>,
    /// `i K_ν`, with `K_ν` the radiation-mode decay kernel of order ν.
    pub radiation: Vec<(i32, Dyadic)>,
    /// Real part of the radiation continuum.
    pub shift: Option<Dyadic>,
}

impl ChannelDyadics {
    pub fn total(&self) -> Dyadic {
        let mut t = self.shift.unwrap_or_else(Dyadic::zeros);
        for (_, m) in &self.guided {
            t += m;
        }
        for (_, m) in &self.radiation {
            t += m;
        }
        t
    }

    pub fn project(&self, u1: &Vector3<C64>, u2: &Vector3<C64>) -> CouplingChannels {
        let guided = self.guided.iter().map(|(l, m)| (*l, project(m, u1, u2))).collect();
        let radiation = self.radiation.iter().map(|(nu, m)| (*nu, project(m, u1, u2))).collect();
        let shift = self.shift.as_ref().map(|m| project(m, u1, u2));
        let mut c = CouplingChannels { free: project(&self.free, u1, u2), guided, radiation, shift, total: C64::new(0.0, 0.0) };
        c.total = c.sum();
        c
    }
}

/// Dipole-projected couplings `ĝ` per channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingChannels {
    /// Free-space baseline, not part of `total`.
    pub free: C64,
    pub guided: BTreeMap<ModeLabel, C64>,
    pub radiation: BTreeMap<i32, C64>,
    pub shift: Option<C64>,
    pub total: C64,
}

impl CouplingChannels {
    pub fn guided_sum(&self) -> C64 {
        self.guided.values().sum()
    }

    pub fn radiation_sum(&self) -> C64 {
        self.radiation.values().sum::<C64>() + self.shift.unwrap_or_default()
    }

    pub fn sum(&self) -> C64 {
        self.guided_sum() + self.radiation_sum()
    }
}

/// Guided modes and settings at one frequency.
#[derive(Debug, Clone)]
pub struct FiberGreen {
    pub fiber: FiberSpec,
    pub k0: f64,
    pub config: GreenConfig,
    pub modes: Vec<GuidedModeSolution>,
}

/// Kernels for one pair of radii, valid for `|Δz| ≤ dz_max`.
#[derive(Debug, Clone)]
pub struct PairKernels {
    pub r1: f64,
    pub r2: f64,
    pub k0: f64,
    pub guided: Vec<GuidedKernel>,
    pub radiation: RadialKernel,
    /// Scattered part `ĝs` from a source on `r2` observed on `r1`.
    pub scattered: Option<RadialKernel>,
}

impl FiberGreen {
    pub fn new(fiber: FiberSpec, k0: f64, config: GreenConfig, solver: &ModeSolver) -> Result<Self, GreenError> {
        if config.nu_max > MAX_NU {
            return Err(GreenError::Order { nu_max: config.nu_max, max: MAX_NU });
        }
        let modes = solver.list(k0, config.l_max);
        Ok(Self { fiber, k0, config, modes })
    }

    pub fn labels(&self) -> Vec<ModeLabel> {
        labels(&self.modes)
    }

    pub fn poles(&self) -> Poles {
        let mut list: Vec<(u32, f64)> = self.modes.iter().map(|m| (m.id.label.l, m.beta)).collect();
        list.sort_by(|a, b| a.partial_cmp(b).unwrap());
        list.dedup();
        Poles { list }
    }

    fn check(&self, r: f64) -> Result<(), GreenError> {
        if r <= self.fiber.radius() {
            Err(GreenError::InsideCore { r })
        } else {
            Ok(())
        }
    }

    pub fn guided_kernels(&self, r1: f64, r2: f64) -> Vec<GuidedKernel> {
        self.labels()
            .into_iter()
            .filter_map(|l| GuidedKernel::new(l, &self.modes, r1, r2))
            .collect()
    }

    /// Radiation kernel on adaptively bisected θ-panels. A panel is split
    /// while its two halves change the summed dyadic at a few probe offsets
    /// by more than its share of the tolerance.
    pub fn radiation_kernel(&self, r1: f64, r2: f64, dz_max: f64) -> Result<RadialKernel, GreenError> {
        let cfg = &self.config;
        let min_panels = (self.k0 * dz_max.abs() / (8.0 * PI)).ceil() as usize;
        let panels = cfg.panels.max(min_panels).max(1);
        if !cfg.adaptive {
            return Ok(radiation::radiation_kernel(self.fiber, self.k0, r1, r2, cfg.nu_max, cfg.nodes, panels));
        }
        let build = |t0: f64, t1: f64| radiation::radiation_panel(self.fiber, self.k0, r1, r2, cfg.nu_max, cfg.nodes, t0, t1);
        let probes: Vec<(f64, f64)> = [0.0, 0.4 * PI, 0.8 * PI]
            .iter()
            .flat_map(|&p| [(p, 0.0), (p, dz_max)])
            .collect();
        let at = |k: &RadialKernel| -> Vec<Dyadic> { probes.iter().map(|&(p, z)| k.cartesian(p, 0.0, z)).collect() };
        let mut pending: Vec<(f64, f64, RadialKernel, usize)> = (0..panels)
            .map(|p| {
                let t0 = PI * p as f64 / panels as f64;
                let t1 = PI * (p + 1) as f64 / panels as f64;
                (t0, t1, build(t0, t1), 0)
            })
            .collect();
        let scale = pending
            .iter()
            .fold(Dyadic::zeros(), |acc, (_, _, k, _)| acc + k.cartesian(0.0, 0.0, 0.0));
        let scale = max_abs(&scale).max(f64::MIN_POSITIVE);
        let mut accepted: Vec<(f64, RadialKernel)> = Vec::new();
        let mut residual: f64 = 0.0;
        while let Some((t0, t1, whole, depth)) = pending.pop() {
            let tm = 0.5 * (t0 + t1);
            let (left, right) = (build(t0, tm), build(tm, t1));
            let coarse = at(&whole);
            let (fl, fr) = (at(&left), at(&right));
            let change = (0..probes.len())
                .map(|i| max_abs(&(fl[i] + fr[i] - coarse[i])))
                .fold(0.0, f64::max)
                / scale;
            let share = cfg.tolerance * (t1 - t0) / PI;
            if change <= share {
                accepted.push((t0, left));
                accepted.push((tm, right));
            } else if depth >= 12 {
                residual += change;
                accepted.push((t0, left));
                accepted.push((tm, right));
            } else {
                pending.push((t0, tm, left, depth + 1));
                pending.push((tm, t1, right, depth + 1));
            }
        }
        if residual > cfg.tolerance {
            return Err(GreenError::Convergence { residual });
        }
        // fixed θ order keeps summation bit-stable
        accepted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out = RadialKernel { r1, r2, parts: Vec::new() };
        for (_, k) in accepted {
            out.append(k);
        }
        Ok(out)
    }

    /// All kernels between radii `r1` (observation) and `r2` (source).
    pub fn pair(&self, r1: f64, r2: f64, dz_max: f64) -> Result<PairKernels, GreenError> {
        self.check(r1)?;
        self.check(r2)?;
        let radiation = self.radiation_kernel(r1, r2, dz_max)?;
        let scattered = self.config.real_part.then(|| {
            let cfg = self.config.spectral();
            SourceExpansion::new(self.fiber, self.k0, r2, self.config.nu_max, r1, dz_max, &self.poles(), &cfg).kernel(r1)
        });
        Ok(PairKernels { r1, r2, k0: self.k0, guided: self.guided_kernels(r1, r2), radiation, scattered })
    }

    /// Scattered (and, inside the core, transmitted) field of a dipole on
    /// radius `rs`, for observation radii no closer to the surface than
    /// `r_min` and axial offsets up to `dz_max`.
    pub fn source_expansion(&self, rs: f64, r_min: f64, dz_max: f64) -> Result<SourceExpansion, GreenError> {
        self.check(rs)?;
        let cfg = self.config.spectral();
        Ok(SourceExpansion::new(self.fiber, self.k0, rs, self.config.nu_max, r_min, dz_max, &self.poles(), &cfg))
    }

    /// Channel dyadics between two sites.
    pub fn dyadics(&self, s1: Site, s2: Site) -> Result<ChannelDyadics, GreenError> {
        let pair = self.pair(s1.r, s2.r, s1.z - s2.z)?;
        Ok(pair.dyadics(s1, s2))
    }

    /// Projected couplings between two dipoles.
    pub fn g_total(&self, s1: Site, u1: &Vector3<C64>, s2: Site, u2: &Vector3<C64>) -> Result<CouplingChannels, GreenError> {
        Ok(self.dyadics(s1, s2)?.project(u1, u2))
    }

    pub fn g_guided(&self, s1: Site, s2: Site) -> Result<Vec<(ModeLabel, Dyadic)>, GreenError> {
        self.check(s1.r)?;
        self.check(s2.r)?;
        Ok(self
            .guided_kernels(s1.r, s2.r)
            .iter()
            .map(|g| (g.label, g.cartesian(s1.phi, s2.phi, s1.z - s2.z)))
            .collect())
    }

    pub fn g_radiation(&self, s1: Site, s2: Site) -> Result<Vec<(i32, Dyadic)>, GreenError> {
        self.check(s1.r)?;
        self.check(s2.r)?;
        let k = self.radiation_kernel(s1.r, s2.r, s1.z - s2.z)?;
        Ok(k.cartesian_by_nu(s1.phi, s2.phi, s1.z - s2.z)
            .into_iter()
            .map(|(nu, m)| (nu, m * C64::i()))
            .collect())
    }
}

impl PairKernels {
    pub fn dyadics(&self, s1: Site, s2: Site) -> ChannelDyadics {
        self.dyadics_at(s1.z - s2.z, &[(s1, s2)]).pop().expect("one pair")
    }

    /// Dyadics for several site pairs sharing the axial offset `dz = z1 − z2`.
    /// The β-sums are done once and reused for every pair.
    pub fn dyadics_at(&self, dz: f64, pairs: &[(Site, Site)]) -> Vec<ChannelDyadics> {
        let radiation = self.radiation.sums(dz);
        let scattered = self.scattered.as_ref().map(|s| s.sums(dz));
        pairs
            .iter()
            .map(|&(s1, s2)| {
                debug_assert!((s1.z - s2.z - dz).abs() <= 1e-9 * dz.abs().max(1.0));
                let free = g0_hat(s1, s2, self.k0);
                let guided: Vec<(ModeLabel, Dyadic)> = self
                    .guided
                    .iter()
                    .map(|g| (g.label, g.cartesian(s1.phi, s2.phi, dz)))
                    .collect();
                let radiation = RadialKernel::place(&radiation, s1.phi, s2.phi)
                    .into_iter()
                    .map(|(nu, m)| (nu, m * C64::i()))
                    .collect();
                let shift = scattered.as_ref().map(|sums| {
                    let full = RadialKernel::place(sums, s1.phi, s2.phi)
                        .into_iter()
                        .fold(free, |acc, (_, m)| acc + m);
                    let mut re = full.map(|c| C64::new(c.re, 0.0));
                    for (_, g) in &guided {
                        re -= g.map(|c| C64::new(c.re, 0.0));
                    }
                    re
                });
                ChannelDyadics { free, guided, radiation, shift }
            })
            .collect()
    }
}

/// Largest elementwise modulus, for relative comparisons.
pub fn max_abs(m: &Matrix3<C64>) -> f64 {
    m.iter().map(|c| c.norm()).fold(0.0, f64::max)
}
