//! Guided modes of a step-index fiber of radius `a = 1` in vacuum.
//!
//! Characteristic equations, with `U = ha`, `W = qa`,
//! `h² = n²k² − β²`, `q² = β² − k²` and `y = K_l'(W)/(W K_l(W))`:
//!
//! ```text
//! HE / EH:  J_{l−1}(U)/(U J_l(U)) = l/U² − (n²+1)/(2n²)·y ∓ R
//!           R = sqrt(((n²−1)/(2n²))² y² + (lβ/(nk))² (1/U² + 1/W²)²)
//! TE:       J_1(U)/(U J_0(U)) + K_1(W)/(W K_0(W)) = 0
//! TM:       n² J_1(U)/(U J_0(U)) + K_1(W)/(W K_0(W)) = 0
//! ```
//!
//! HE takes the `−R` branch and EH the `+R` branch. This is the labeling in
//! which the `l = 1` HE branch has no cutoff. Roots are bracketed on the
//! pole-free forms obtained by multiplying through by `J_l(U)` (and `K_0(W)`
//! for TE/TM); `characteristic_residual` returns the standard forms.
//!
//! Profiles are the null vector of the 4×4 tangential-continuity system at
//! `r = a`, normalized so that `∫∫ n²(r) |e|² dA = 1`.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use nalgebra::Matrix4;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::cylinder::{transverse, Axial};
use crate::quadrature::GaussLegendre;
use crate::specfun::{jy_tables, k_scaled_table, MAX_ORDER};

pub const DEFAULT_N_FIBER: f64 = 1.45;
pub const DEFAULT_L_MAX: u32 = 8;
/// Points of the sign-change scan over `(k, nk)`.
pub const SCAN_POINTS: usize = 2000;
/// Relative step on `k0` for the centered `dβ/dω` difference.
pub const DBETA_STEP: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum FiberError {
    #[error("fiber index must exceed 1, got {0}")]
    InvalidIndex(f64),
    #[error("wavelength must be positive and finite, got {0}")]
    InvalidWavelength(f64),
    #[error("β = {beta} lies outside the guided interval ({lo}, {hi})")]
    OutsideGuidedInterval { beta: f64, lo: f64, hi: f64 },
    #[error("azimuthal order {0} invalid for this family or above the supported maximum")]
    InvalidOrder(u32),
    #[error("dispersion cache: {0}")]
    Cache(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberSpec {
    pub n_fiber: f64,
}

impl FiberSpec {
    pub fn new(n_fiber: f64) -> Result<Self, FiberError> {
        if !(n_fiber > 1.0 && n_fiber.is_finite()) {
            return Err(FiberError::InvalidIndex(n_fiber));
        }
        Ok(Self { n_fiber })
    }

    /// Unit of length.
    pub fn radius(&self) -> f64 {
        1.0
    }

    pub fn v_number(&self, k0: f64) -> f64 {
        k0 * (self.n_fiber * self.n_fiber - 1.0).sqrt()
    }

    /// Permittivity at radius `r`.
    pub fn eps_at(&self, r: f64) -> f64 {
        if r < 1.0 {
            self.n_fiber * self.n_fiber
        } else {
            1.0
        }
    }
}

impl Default for FiberSpec {
    fn default() -> Self {
        Self { n_fiber: DEFAULT_N_FIBER }
    }
}

/// Vacuum wavelength in units of `a`; `c = 1` so `ω0 = k0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WavelengthSpec {
    pub lambda0: f64,
}

impl WavelengthSpec {
    pub fn new(lambda0: f64) -> Result<Self, FiberError> {
        if !(lambda0 > 0.0 && lambda0.is_finite()) {
            return Err(FiberError::InvalidWavelength(lambda0));
        }
        Ok(Self { lambda0 })
    }

    pub fn from_ratio(lambda0_over_d: f64, d: f64) -> Result<Self, FiberError> {
        Self::new(lambda0_over_d * d)
    }

    pub fn k0(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.lambda0
    }

    pub fn omega0(&self) -> f64 {
        self.k0()
    }

    /// `π/5 ≤ λ0/a ≤ 2π`.
    pub fn in_scan_range(&self) -> bool {
        let pi = std::f64::consts::PI;
        (pi / 5.0..=2.0 * pi).contains(&self.lambda0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModeFamily {
    HE,
    EH,
    TE,
    TM,
}

impl ModeFamily {
    pub fn is_hybrid(self) -> bool {
        matches!(self, ModeFamily::HE | ModeFamily::EH)
    }
}

impl fmt::Display for ModeFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModeFamily::HE => "HE",
            ModeFamily::EH => "EH",
            ModeFamily::TE => "TE",
            ModeFamily::TM => "TM",
        })
    }
}

/// A guided mode up to rotation sense and direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModeLabel {
    pub family: ModeFamily,
    pub l: u32,
    pub m: u32,
}

impl ModeLabel {
    pub fn new(family: ModeFamily, l: u32, m: u32) -> Self {
        Self { family, l, m }
    }
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.l < 10 && self.m < 10 {
            write!(f, "{}{}{}", self.family, self.l, self.m)
        } else {
            write!(f, "{}{}_{}", self.family, self.l, self.m)
        }
    }
}

/// Full mode identity. `p` is absent for TE/TM; `f = ±1` is the direction
/// of propagation along z.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModeId {
    pub label: ModeLabel,
    pub p: Option<i8>,
    pub f: i8,
}

impl ModeId {
    /// Signed azimuthal order `p·l`.
    pub fn nu(&self) -> i32 {
        self.p.map_or(0, |p| p as i32 * self.label.l as i32)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GuidedModeSolution {
    pub id: ModeId,
    pub k0: f64,
    pub n_fiber: f64,
    pub beta: f64,
    pub dbeta_domega: f64,
    /// Core amplitudes of `E_z`, `H_z` multiplying `J_ν(hr)`.
    pub core: [C64; 2],
    /// Cladding amplitudes of `E_z`, `H_z` multiplying `K_ν(qr)/K_ν(qa)`.
    pub cladding: [C64; 2],
    /// Factor that was divided out to reach unit norm.
    pub normalization: f64,
}

impl GuidedModeSolution {
    pub fn h(&self) -> f64 {
        (self.n_fiber * self.n_fiber * self.k0 * self.k0 - self.beta * self.beta).sqrt()
    }

    pub fn q(&self) -> f64 {
        (self.beta * self.beta - self.k0 * self.k0).sqrt()
    }

    pub fn signed_beta(&self) -> f64 {
        self.id.f as f64 * self.beta
    }

    /// The same mode with another rotation sense and direction.
    pub fn oriented(&self, p: Option<i8>, f: i8) -> GuidedModeSolution {
        let id = ModeId { label: self.id.label, p, f };
        build_solution(
            FiberSpec { n_fiber: self.n_fiber },
            self.k0,
            id,
            self.beta,
            self.dbeta_domega,
        )
    }

    /// Cylindrical components `(e_r, e_θ, e_z)` at `(r, θ)` in the plane z = 0.
    pub fn profile(&self, r: f64, theta: f64) -> [C64; 3] {
        let e = self.radial_e(r);
        let phase = C64::from_polar(1.0, self.id.nu() as f64 * theta);
        [e[0] * phase, e[1] * phase, e[2] * phase]
    }

    /// θ-independent cylindrical components at radius `r`.
    pub fn radial_e(&self, r: f64) -> [C64; 3] {
        self.radial_fields(r).0
    }

    fn radial_fields(&self, r: f64) -> ([C64; 3], [C64; 3]) {
        let nu = self.id.nu();
        let beta = self.signed_beta();
        let k = self.k0;
        let n2 = self.n_fiber * self.n_fiber;
        let order = nu.unsigned_abs() as usize + 1;
        if r < 1.0 {
            let h = self.h();
            let s = n2 * k * k - beta * beta;
            let (jt, _) = jy_tables(h * r, order);
            let (j, dj) = jt.signed(nu);
            let ax = Axial {
                ez: self.core[0] * j,
                dez: self.core[0] * (h * dj),
                hz: self.core[1] * j,
                dhz: self.core[1] * (h * dj),
            };
            transverse(nu as f64, beta, k, n2, s, r, ax)
        } else {
            let q = self.q();
            let s = k * k - beta * beta;
            let (kr, dkr) = k_scaled_table(q * r, order).signed_even(nu);
            let (ka, _) = k_scaled_table(q, order).signed_even(nu);
            let decay = (-(q * r - q)).exp() / ka;
            let ax = Axial {
                ez: self.cladding[0] * (kr * decay),
                dez: self.cladding[0] * (q * dkr * decay),
                hz: self.cladding[1] * (kr * decay),
                dhz: self.cladding[1] * (q * dkr * decay),
            };
            transverse(nu as f64, beta, k, 1.0, s, r, ax)
        }
    }
}

/// Free-function form of [`GuidedModeSolution::profile`].
pub fn mode_profile(mode: &GuidedModeSolution, r: f64, theta: f64) -> [C64; 3] {
    mode.profile(r, theta)
}

struct Point {
    u: f64,
    w: f64,
    j: [f64; 3],
    kk: [f64; 2],
}

/// `J_{l−1}, J_l, J_{l+1}` at U and `K_l, K_l'` (scaled) at W.
fn point(fiber: FiberSpec, k0: f64, l: u32, beta: f64) -> Point {
    let n = fiber.n_fiber;
    let u = (n * n * k0 * k0 - beta * beta).max(0.0).sqrt();
    let w = (beta * beta - k0 * k0).max(0.0).sqrt();
    let li = l as i32;
    let (jt, _) = jy_tables(u, l as usize + 1);
    let kt = k_scaled_table(w, l as usize + 1);
    let (jm, _) = jt.signed(li - 1);
    let (jl, _) = jt.signed(li);
    let (jp, _) = jt.signed(li + 1);
    let (kv, kd) = kt.signed_even(li);
    Point { u, w, j: [jm, jl, jp], kk: [kv, kd] }
}

/// Right-hand side of the hybrid equation (without `J_l` factor).
fn hybrid_rhs(fiber: FiberSpec, k0: f64, family: ModeFamily, l: u32, beta: f64, p: &Point) -> f64 {
    let n2 = fiber.n_fiber * fiber.n_fiber;
    let y = p.kk[1] / (p.w * p.kk[0]);
    let lf = l as f64;
    let inv = 1.0 / (p.u * p.u) + 1.0 / (p.w * p.w);
    let r = (((n2 - 1.0) / (2.0 * n2) * y).powi(2)
        + (lf * beta / (fiber.n_fiber * k0) * inv).powi(2))
    .sqrt();
    let base = lf / (p.u * p.u) - (n2 + 1.0) / (2.0 * n2) * y;
    match family {
        ModeFamily::HE => base - r,
        _ => base + r,
    }
}

/// Continuous form used for bracketing.
fn pole_free(fiber: FiberSpec, k0: f64, family: ModeFamily, l: u32, beta: f64) -> f64 {
    let p = point(fiber, k0, l, beta);
    let n2 = fiber.n_fiber * fiber.n_fiber;
    match family {
        ModeFamily::TE => p.j[2] * p.kk[0] / p.u + p.j[1] * k1_over(l, &p) / p.w,
        ModeFamily::TM => n2 * p.j[2] * p.kk[0] / p.u + p.j[1] * k1_over(l, &p) / p.w,
        _ => p.j[0] / p.u - p.j[1] * hybrid_rhs(fiber, k0, family, l, beta, &p),
    }
}

/// `K_1` from `K_0' = −K_1` (scaled values keep the same ratio).
fn k1_over(_l: u32, p: &Point) -> f64 {
    -p.kk[1]
}

fn check_order(family: ModeFamily, l: u32) -> Result<(), FiberError> {
    let ok = match family {
        ModeFamily::TE | ModeFamily::TM => l == 0,
        _ => (1..MAX_ORDER).contains(&l),
    };
    if ok {
        Ok(())
    } else {
        Err(FiberError::InvalidOrder(l))
    }
}

/// Standard eigenvalue function; its zero locus is the guided-mode β.
pub fn characteristic_residual(
    fiber: FiberSpec,
    k0: f64,
    family: ModeFamily,
    l: u32,
    beta: f64,
) -> Result<f64, FiberError> {
    check_order(family, l)?;
    let (lo, hi) = (k0, fiber.n_fiber * k0);
    if !(beta > lo && beta < hi) {
        return Err(FiberError::OutsideGuidedInterval { beta, lo, hi });
    }
    let p = point(fiber, k0, l, beta);
    let n2 = fiber.n_fiber * fiber.n_fiber;
    let kr = k1_over(l, &p) / (p.w * p.kk[0]);
    Ok(match family {
        ModeFamily::TE => p.j[2] / (p.u * p.j[1]) + kr,
        ModeFamily::TM => n2 * p.j[2] / (p.u * p.j[1]) + kr,
        _ => p.j[0] / (p.u * p.j[1]) - hybrid_rhs(fiber, k0, family, l, beta, &p),
    })
}

/// All roots in `(k0, n k0)` as `β/k0`, in decreasing order.
pub fn dispersion_roots(fiber: FiberSpec, k0: f64, family: ModeFamily, l: u32) -> Vec<f64> {
    if check_order(family, l).is_err() {
        return Vec::new();
    }
    let n = fiber.n_fiber;
    let f = |x: f64| pole_free(fiber, k0, family, l, x * k0);
    let span = n - 1.0;
    let mut grid = Vec::with_capacity(SCAN_POINTS + 32);
    // closer than ~1e-10 the differences β² − k² lose their digits
    for j in (1..=6).rev() {
        grid.push(1.0 + span * 10f64.powi(-j) / SCAN_POINTS as f64);
    }
    for i in 1..SCAN_POINTS {
        grid.push(1.0 + span * i as f64 / SCAN_POINTS as f64);
    }
    for j in 1..=6 {
        grid.push(n - span * 10f64.powi(-j) / SCAN_POINTS as f64);
    }
    grid.retain(|&x| x > 1.0 && x < n);
    let vals: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    let mut roots = Vec::new();
    for i in 0..grid.len().saturating_sub(1) {
        let (fa, fb) = (vals[i], vals[i + 1]);
        if fa == 0.0 {
            roots.push(grid[i]);
            continue;
        }
        if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() {
            continue;
        }
        roots.push(refine(&f, grid[i], grid[i + 1], fa));
    }
    roots.sort_by(|a, b| b.partial_cmp(a).unwrap());
    roots
}

fn refine(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, mut flo: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    // secant polish inside the final bracket
    let fhi = f(hi);
    let x = lo - flo * (hi - lo) / (fhi - flo);
    if x > lo && x < hi && f(x).abs() <= flo.abs().min(fhi.abs()) {
        x
    } else if flo.abs() <= fhi.abs() {
        lo
    } else {
        hi
    }
}

fn dbeta_domega(fiber: FiberSpec, k0: f64, family: ModeFamily, l: u32, m: u32, beta: f64) -> f64 {
    let dk = DBETA_STEP * k0;
    let at = |k: f64| {
        dispersion_roots(fiber, k, family, l)
            .get(m as usize - 1)
            .map(|x| x * k)
    };
    match (at(k0 + dk), at(k0 - dk)) {
        (Some(bp), Some(bm)) => (bp - bm) / (2.0 * dk),
        (Some(bp), None) => (bp - beta) / dk,
        (None, Some(bm)) => (beta - bm) / dk,
        (None, None) => f64::NAN,
    }
}

fn default_orientation(family: ModeFamily) -> Option<i8> {
    family.is_hybrid().then_some(1)
}

/// Null vector of the continuity system, normalized.
fn build_solution(fiber: FiberSpec, k0: f64, id: ModeId, beta: f64, dbdw: f64) -> GuidedModeSolution {
    let n2 = fiber.n_fiber * fiber.n_fiber;
    let nu = id.nu();
    let bs = id.f as f64 * beta;
    let h = (n2 * k0 * k0 - beta * beta).sqrt();
    let q = (beta * beta - k0 * k0).sqrt();
    let order = nu.unsigned_abs() as usize + 1;
    let (jt, _) = jy_tables(h, order);
    let (j, dj) = jt.signed(nu);
    let (kv, kd) = k_scaled_table(q, order).signed_even(nu);
    let lk = kd / kv;
    let s_in = n2 * k0 * k0 - beta * beta;
    let s_out = k0 * k0 - beta * beta;
    let zero = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let col = |inside: bool, electric: bool| {
        let (z, dz, eps, s) = if inside {
            (C64::new(j, 0.0), C64::new(h * dj, 0.0), n2, s_in)
        } else {
            (one, C64::new(q * lk, 0.0), 1.0, s_out)
        };
        let ax = if electric {
            Axial { ez: z, dez: dz, hz: zero, dhz: zero }
        } else {
            Axial { ez: zero, dez: zero, hz: z, dhz: dz }
        };
        let (e, hh) = transverse(nu as f64, bs, k0, eps, s, 1.0, ax);
        let sign = if inside { 1.0 } else { -1.0 };
        [e[2] * sign, hh[2] * sign, e[1] * sign, hh[1] * sign]
    };
    let cols = [col(true, true), col(true, false), col(false, true), col(false, false)];
    let m = Matrix4::from_fn(|r, c| cols[c][r]);
    let mut v = match id.label.family {
        ModeFamily::TE => [zero, one, zero, C64::new(j, 0.0)],
        ModeFamily::TM => [one, zero, C64::new(j, 0.0), zero],
        _ => null_vector(&m),
    };
    let pivot = if v[0].norm() >= v[1].norm() { v[0] } else { v[1] };
    let phase = pivot.conj() / pivot.norm();
    for x in &mut v {
        *x *= phase;
    }
    let mut sol = GuidedModeSolution {
        id,
        k0,
        n_fiber: fiber.n_fiber,
        beta,
        dbeta_domega: dbdw,
        core: [v[0], v[1]],
        cladding: [v[2], v[3]],
        normalization: 1.0,
    };
    let norm = norm_integral(&sol).sqrt();
    for x in sol.core.iter_mut().chain(sol.cladding.iter_mut()) {
        *x /= norm;
    }
    sol.normalization = norm;
    sol
}

fn null_vector(m: &Matrix4<C64>) -> [C64; 4] {
    let svd = m.svd(false, true);
    let vt = svd.v_t.expect("requested V");
    let (idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap();
    [0, 1, 2, 3].map(|c| vt[(idx, c)].conj())
}

/// `2π ∫ n²(r) |e(r)|² r dr` with graded panels in the cladding.
pub fn norm_integral(mode: &GuidedModeSolution) -> f64 {
    let rule = GaussLegendre::cached(48);
    let n2 = mode.n_fiber * mode.n_fiber;
    let dens = |r: f64| -> f64 { mode.radial_e(r).iter().map(|c| c.norm_sqr()).sum::<f64>() * r };
    let mut total = n2 * (rule.integrate(0.0, 0.5, dens) + rule.integrate(0.5, 1.0, dens));
    let q = mode.q();
    let t_max = 40.0 / q;
    let mut lo = 0.0;
    let mut width = (0.25f64).min(0.5 / q);
    while lo < t_max {
        let hi = (lo + width).min(t_max);
        total += rule.integrate(1.0 + lo, 1.0 + hi, dens);
        lo = hi;
        width *= 2.0;
    }
    2.0 * std::f64::consts::PI * total
}

fn solve_uncached(fiber: FiberSpec, k0: f64, family: ModeFamily, l: u32) -> Vec<(f64, f64)> {
    dispersion_roots(fiber, k0, family, l)
        .into_iter()
        .enumerate()
        .map(|(i, x)| {
            let beta = x * k0;
            (x, dbeta_domega(fiber, k0, family, l, i as u32 + 1, beta))
        })
        .collect()
}

/// m-th guided root (decreasing β), or `None` below cutoff.
pub fn solve_dispersion(
    fiber: FiberSpec,
    k0: f64,
    family: ModeFamily,
    l: u32,
    m: u32,
) -> Option<GuidedModeSolution> {
    ModeSolver::new(fiber, None).solve(k0, family, l, m)
}

/// Every guided mode with `l ≤ l_max`, once per `(p, f)`.
pub fn list_guided_modes(fiber: FiberSpec, k0: f64, l_max: u32) -> Vec<GuidedModeSolution> {
    ModeSolver::new(fiber, None).list(k0, l_max)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct CacheEntry {
    beta_over_k0: Option<f64>,
    dbeta_domega: Option<f64>,
    k0a: f64,
}

/// Persistent map of solved roots keyed by `(n, k0·a, family, l, m)`.
#[derive(Debug, Default)]
pub struct DispersionCache {
    path: Option<PathBuf>,
    map: RwLock<BTreeMap<String, CacheEntry>>,
}

pub fn cache_key(n_fiber: f64, k0: f64, family: ModeFamily, l: u32, m: u32) -> String {
    format!("n={n_fiber},k0a={k0:.6},{family},l={l},m={m}")
}

impl DispersionCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens the cache file, starting empty when it does not exist yet.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, FiberError> {
        let path = path.as_ref().to_path_buf();
        // a missing directory means a new, empty cache
        let dir_exists = path.parent().is_none_or(|p| p.as_os_str().is_empty() || p.exists());
        let lock = if dir_exists { Some(lock_file(&path)?) } else { None };
        if let Some(f) = &lock {
            f.lock_shared().map_err(|e| FiberError::Cache(format!("{}: {e}", path.display())))?;
        }
        let map = match std::fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text)
                .map_err(|e| FiberError::Cache(format!("{}: {e}", path.display())))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => BTreeMap::new(),
            Err(e) => return Err(FiberError::Cache(format!("{}: {e}", path.display()))),
        };
        Ok(Self { path: Some(path), map: RwLock::new(map) })
    }

    pub fn len(&self) -> usize {
        self.map.read().expect("cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn get(&self, key: &str, k0: f64) -> Option<CacheEntry> {
        let map = self.map.read().expect("cache poisoned");
        map.get(key).copied().filter(|e| e.k0a == k0)
    }

    fn insert(&self, key: String, entry: CacheEntry) {
        let mut map = self.map.write().expect("cache poisoned");
        match map.get(&key) {
            Some(old) if old.k0a == entry.k0a => {}
            _ => {
                map.insert(key, entry);
            }
        }
    }

    /// Writes the file atomically (temp file + rename).
    pub fn save(&self) -> Result<(), FiberError> {
        let Some(path) = &self.path else { return Ok(()) };
        let text = {
            let map = self.map.read().expect("cache poisoned");
            serde_json::to_string_pretty(&*map).map_err(|e| FiberError::Cache(e.to_string()))?
        };
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let err = |e: std::io::Error| FiberError::Cache(format!("{}: {e}", path.display()));
        std::fs::create_dir_all(dir).map_err(err)?;
        let lock = lock_file(path)?;
        lock.lock().map_err(err)?;
        let tmp = dir.join(format!(
            ".{}.tmp{}",
            path.file_name().and_then(|s| s.to_str()).unwrap_or("cache"),
            std::process::id()
        ));
        {
            let mut f = std::fs::File::create(&tmp).map_err(err)?;
            f.write_all(text.as_bytes()).map_err(err)?;
            f.sync_all().map_err(err)?;
        }
        std::fs::rename(&tmp, path).map_err(err)
    }
}

/// Sidecar `<cache>.lock`: shared while reading, exclusive while writing.
fn lock_file(path: &Path) -> Result<std::fs::File, FiberError> {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".lock");
    std::fs::OpenOptions::new()
        .create(true)
        .truncate(false)
        .write(true)
        .open(path.with_file_name(name))
        .map_err(|e| FiberError::Cache(format!("{}: {e}", path.display())))
}

/// Mode solver with an optional shared dispersion cache.
#[derive(Debug, Clone)]
pub struct ModeSolver {
    pub fiber: FiberSpec,
    cache: Option<Arc<DispersionCache>>,
}

impl ModeSolver {
    pub fn new(fiber: FiberSpec, cache: Option<Arc<DispersionCache>>) -> Self {
        Self { fiber, cache }
    }

    /// `(β/k0, dβ/dω)` for every root of one family and order.
    pub fn roots(&self, k0: f64, family: ModeFamily, l: u32) -> Vec<(f64, f64)> {
        let n = self.fiber.n_fiber;
        if let Some(cache) = &self.cache {
            let mut out = Vec::new();
            let mut complete = false;
            for m in 1.. {
                match cache.get(&cache_key(n, k0, family, l, m), k0) {
                    Some(CacheEntry { beta_over_k0: Some(b), dbeta_domega: Some(d), .. }) => {
                        out.push((b, d))
                    }
                    Some(CacheEntry { beta_over_k0: None, .. }) => {
                        complete = true;
                        break;
                    }
                    _ => break,
                }
            }
            if complete {
                return out;
            }
        }
        let roots = solve_uncached(self.fiber, k0, family, l);
        if let Some(cache) = &self.cache {
            for (i, &(b, d)) in roots.iter().enumerate() {
                let entry = CacheEntry { beta_over_k0: Some(b), dbeta_domega: Some(d), k0a: k0 };
                cache.insert(cache_key(n, k0, family, l, i as u32 + 1), entry);
            }
            let end = CacheEntry { beta_over_k0: None, dbeta_domega: None, k0a: k0 };
            cache.insert(cache_key(n, k0, family, l, roots.len() as u32 + 1), end);
        }
        roots
    }

    pub fn solve(&self, k0: f64, family: ModeFamily, l: u32, m: u32) -> Option<GuidedModeSolution> {
        if m == 0 || check_order(family, l).is_err() {
            return None;
        }
        let &(x, d) = self.roots(k0, family, l).get(m as usize - 1)?;
        let id = ModeId { label: ModeLabel::new(family, l, m), p: default_orientation(family), f: 1 };
        Some(build_solution(self.fiber, k0, id, x * k0, d))
    }

    pub fn list(&self, k0: f64, l_max: u32) -> Vec<GuidedModeSolution> {
        let l_max = l_max.min(MAX_ORDER - 1);
        let mut out = Vec::new();
        for l in 0..=l_max {
            let families: &[ModeFamily] = if l == 0 {
                &[ModeFamily::TE, ModeFamily::TM]
            } else {
                &[ModeFamily::HE, ModeFamily::EH]
            };
            for &family in families {
                for (i, (x, d)) in self.roots(k0, family, l).into_iter().enumerate() {
                    let label = ModeLabel::new(family, l, i as u32 + 1);
                    let ps: &[Option<i8>] = if family.is_hybrid() { &[Some(1), Some(-1)] } else { &[None] };
                    for &p in ps {
                        for f in [1i8, -1] {
                            let id = ModeId { label, p, f };
                            out.push(build_solution(self.fiber, k0, id, x * k0, d));
                        }
                    }
                }
            }
        }
        out
    }
}

/// Distinct mode labels of a listing, in listing order.
pub fn labels(modes: &[GuidedModeSolution]) -> Vec<ModeLabel> {
    let mut out: Vec<ModeLabel> = Vec::new();
    for m in modes {
        if !out.contains(&m.id.label) {
            out.push(m.id.label);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionRow {
    pub lambda0_over_d: f64,
    pub mode: String,
    pub beta_over_k0: f64,
}

/// `(λ0/d, β/k0)` for every guided mode at each grid point.
pub fn dispersion_table(
    solver: &ModeSolver,
    d: f64,
    lambda0_over_d: &[f64],
    l_max: u32,
) -> Vec<DispersionRow> {
    use rayon::prelude::*;
    let per_point: Vec<Vec<DispersionRow>> = lambda0_over_d
        .par_iter()
        .map(|&x| {
            let k0 = 2.0 * std::f64::consts::PI / (x * d);
            let mut rows = Vec::new();
            for l in 0..=l_max.min(MAX_ORDER - 1) {
                let families: &[ModeFamily] = if l == 0 {
                    &[ModeFamily::TE, ModeFamily::TM]
                } else {
                    &[ModeFamily::HE, ModeFamily::EH]
                };
                for &family in families {
                    for (i, (b, _)) in solver.roots(k0, family, l).into_iter().enumerate() {
                        rows.push(DispersionRow {
                            lambda0_over_d: x,
                            mode: ModeLabel::new(family, l, i as u32 + 1).to_string(),
                            beta_over_k0: b,
                        });
                    }
                }
            }
            rows
        })
        .collect();
    per_point.into_iter().flatten().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k_for_v(v: f64) -> f64 {
        v / (1.45f64 * 1.45 - 1.0).sqrt()
    }

    #[test]
    fn te_cutoff_at_first_zero() {
        let f = FiberSpec::default();
        assert!(dispersion_roots(f, k_for_v(2.40), ModeFamily::TE, 0).is_empty());
        assert_eq!(dispersion_roots(f, k_for_v(2.42), ModeFamily::TE, 0).len(), 1);
        assert!(solve_dispersion(f, k_for_v(2.0), ModeFamily::TE, 0, 1).is_none());
    }

    #[test]
    fn residual_vanishes_at_roots() {
        let f = FiberSpec::default();
        let k0 = 2.7;
        for (fam, l) in [(ModeFamily::HE, 1), (ModeFamily::TE, 0), (ModeFamily::TM, 0), (ModeFamily::HE, 2)] {
            for x in dispersion_roots(f, k0, fam, l) {
                let r = characteristic_residual(f, k0, fam, l, x * k0).unwrap();
                assert!(r.abs() < 1e-10, "{fam}{l}: {r}");
            }
        }
        assert!(characteristic_residual(f, k0, ModeFamily::HE, 1, 0.5 * k0).is_err());
        assert!(characteristic_residual(f, k0, ModeFamily::TE, 1, 1.2 * k0).is_err());
    }

    #[test]
    fn tangential_continuity_and_norm() {
        let f = FiberSpec::default();
        for m in list_guided_modes(f, 2.7, 4) {
            let inner = m.radial_fields(1.0 - 1e-13);
            let outer = m.radial_fields(1.0);
            for c in [1, 2] {
                assert!((inner.0[c] - outer.0[c]).norm() < 1e-8, "{:?} e{c}", m.id);
                assert!((inner.1[c] - outer.1[c]).norm() < 1e-8, "{:?} h{c}", m.id);
            }
            assert!((norm_integral(&m) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn cache_key_layout() {
        assert_eq!(cache_key(1.45, 2.7, ModeFamily::HE, 1, 1), "n=1.45,k0a=2.700000,HE,l=1,m=1");
    }
}
