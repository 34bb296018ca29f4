//! Scattering part of the fiber Green tensor by cylindrical-harmonic
//! expansion, `G = G0 + Gs`.
//!
//! The free scalar Green function expands as
//!
//! ```text
//! e^{ikR}/(4πR) = Σ_ν ∫ dβ  p_f R_ν(r_<) O_ν(r_>) e^{iν(φ−φ')} e^{iβ(z−z')}
//! ```
//!
//! with `R = J`, `O = H^(1)`, `p_f = i/(8π)` for `|β| < k`, and `R = I`,
//! `O = K`, `p_f = 1/(4π²)` beyond. A dipole `p` at `r'` (components in the
//! local cylindrical frame of `r'`) then has the axial harmonics
//!
//! ```text
//! a_E = p_f [ s p_z O − iβ p_ρ ∂O − (βν/ρ') p_φ O ],
//! a_H = ik p_f [ ∂O p_φ + (iν/ρ') O p_ρ ],          s = k² − β²,
//! ```
//!
//! times `R(r)` at `r < ρ'`. The core field (`J` or `I` of `√(n²k² − β²)`) and
//! the outgoing scattered field `O(r)` are fixed by continuity of `E_z, H_z,
//! E_φ, H_φ` at `r = a`. The boundary solve depends on the source only, so a
//! [`SourceExpansion`] serves every observation radius.
//!
//! Guided modes are poles of the scattered harmonic on `k < |β| < nk`. With
//! `k → k + i0` the pole at `+β_p` sits above the axis and the one at `−β_p`
//! below, so each contributes a principal value and `±iπ` times its residue.
//! Principal values use node pairs placed symmetrically about the pole;
//! residues come from the odd part of the coefficients at `±10⁻⁶` relative
//! offsets.

use std::f64::consts::PI;

use nalgebra::{Matrix4, Matrix4x3};
use num_complex::Complex64 as C64;

use super::kernel::{Dyadic, NuKernel, RadialKernel};
use crate::cylinder::{transverse, Axial};
use crate::fiber_modes::FiberSpec;
use crate::quadrature::GaussLegendre;
use crate::specfun::{i_scaled_table, jy_tables, k_scaled_table, OrderTable};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralConfig {
    /// Gauss–Legendre nodes per panel.
    pub nodes: usize,
    /// Minimum number of θ-panels on `|β| < k`.
    pub min_panels: usize,
    /// Evanescent tail is cut where `q (r + ρ' − 2a)` reaches this value.
    pub decay: f64,
    /// Floor on `r + ρ' − 2a` when sizing the tail.
    pub min_gap: f64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self { nodes: 32, min_panels: 8, decay: 36.0, min_gap: 0.02 }
    }
}

impl SpectralConfig {
    pub fn refined(&self) -> Self {
        Self { nodes: self.nodes * 2, min_panels: self.min_panels * 2, decay: self.decay + 4.0, ..*self }
    }
}

/// Guided poles `β_p > 0` with their azimuthal order `l`.
#[derive(Debug, Clone, Default)]
pub struct Poles {
    pub list: Vec<(u32, f64)>,
}

/// Radial function of one kind on an order table: `(F, dF/dr)`.
#[derive(Clone)]
enum Radial {
    J(OrderTable, f64),
    I(OrderTable, f64),
    K(OrderTable, f64),
    H(OrderTable, OrderTable, f64),
}

impl Radial {
    fn at(&self, nu: i32) -> (C64, C64) {
        let real = |(v, d): (f64, f64), s: f64| (C64::new(v, 0.0), C64::new(d * s, 0.0));
        match self {
            Radial::J(t, s) => real(t.signed(nu), *s),
            Radial::I(t, s) | Radial::K(t, s) => real(t.signed_even(nu), *s),
            Radial::H(j, y, s) => {
                let (jv, jd) = j.signed(nu);
                let (yv, yd) = y.signed(nu);
                (C64::new(jv, yv), C64::new(jd, yd) * *s)
            }
        }
    }
}

/// Outside regular or outgoing function at radius `r`. Modified Bessel
/// functions are exponentially scaled; callers restore the factor.
fn outside(k: f64, beta: f64, r: f64, nmax: usize, outgoing: bool) -> Radial {
    let s = k * k - beta * beta;
    if s > 0.0 {
        let kappa = s.sqrt();
        let (j, y) = jy_tables(kappa * r, nmax);
        if outgoing {
            Radial::H(j, y, kappa)
        } else {
            Radial::J(j, kappa)
        }
    } else {
        let q = (-s).sqrt();
        if outgoing {
            Radial::K(k_scaled_table(q * r, nmax), q)
        } else {
            Radial::I(i_scaled_table(q * r, nmax), q)
        }
    }
}

fn core(fiber: FiberSpec, k: f64, beta: f64, nmax: usize) -> Radial {
    let s1 = fiber.n_fiber * fiber.n_fiber * k * k - beta * beta;
    if s1 > 0.0 {
        let h = s1.sqrt();
        Radial::J(jy_tables(h, nmax).0, h)
    } else {
        let q1 = (-s1).sqrt();
        Radial::I(i_scaled_table(q1, nmax), q1)
    }
}

fn prefactor(k: f64, beta: f64) -> C64 {
    if beta.abs() < k {
        C64::new(0.0, 1.0 / (8.0 * PI))
    } else {
        C64::new(1.0 / (4.0 * PI * PI), 0.0)
    }
}

/// `q` for evanescent `β`, zero otherwise.
fn decay_rate(k: f64, beta: f64) -> f64 {
    (beta * beta - k * k).max(0.0).sqrt()
}

/// Axial amplitudes of the incident harmonic, one per source component
/// `(ρ', φ', z')`, built on `(F, ∂F)` at the source radius.
fn incident(k: f64, beta: f64, nu: i32, rs: f64, f: (C64, C64), pf: C64) -> [(C64, C64); 3] {
    let i = C64::i();
    let s = k * k - beta * beta;
    let nf = nu as f64;
    let (o, d) = f;
    [
        (pf * (-i * beta * d), i * k * pf * (i * nf / rs) * o),
        (pf * (-(beta * nf / rs) * o), i * k * pf * d),
        (pf * (s * o), C64::new(0.0, 0.0)),
    ]
}

/// `(E_z, H_z)` coefficients of the observation function per source component.
type Coef = [[C64; 2]; 3];

fn zero_coef() -> Coef {
    [[C64::new(0.0, 0.0); 2]; 3]
}

/// Coefficients of one order: scattered (outside) and transmitted (core).
/// The core pair multiplies the core function divided by its boundary scale,
/// or `(r/a)^|ν|` when that scale underflowed (`tiny`).
#[derive(Debug, Clone, Copy)]
struct Coefs {
    outer: Coef,
    inner: Coef,
    tiny: bool,
}

/// Scattered and transmitted coefficients at one β for every order in
/// `-nmax..=nmax`, including the source-side decay factor. `None` marks an
/// exact pole.
fn coefficients(fiber: FiberSpec, k: f64, beta: f64, rs: f64, nmax: usize) -> Vec<Option<Coefs>> {
    let i = C64::i();
    let n2 = fiber.n_fiber * fiber.n_fiber;
    let s = k * k - beta * beta;
    let s1 = n2 * k * k - beta * beta;
    let inside = core(fiber, k, beta, nmax);
    let reg_a = outside(k, beta, 1.0, nmax, false);
    let out_a = outside(k, beta, 1.0, nmax, true);
    let out_s = outside(k, beta, rs, nmax, true);
    let ex = (-decay_rate(k, beta) * (rs - 1.0)).exp();
    let nmax = nmax as i32;
    let z = C64::new(0.0, 0.0);
    (-nmax..=nmax)
        .map(|nu| {
            let bn = beta * nu as f64;
            // the core column may be rescaled freely; for tiny arguments both
            // entries underflow and only the ratio d/r → |ν| survives
            let (r1, d1, tiny) = match inside.at(nu) {
                (r, d) if r.norm().max(d.norm()) < 1e-200 => (C64::new(1.0, 0.0), C64::new(nu.abs() as f64, 0.0), true),
                (r, d) => {
                    let m = r.norm().max(d.norm());
                    (r / m, d / m, false)
                }
            };
            let (ra, dra) = reg_a.at(nu);
            let (oa, doa) = out_a.at(nu);
            #[rustfmt::skip]
            let m = Matrix4::new(
                r1, z, -oa, z,
                z, r1, z, -oa,
                s * (-bn * r1), s * (-i * k * d1), -s1 * (-bn * oa), -s1 * (-i * k * doa),
                s * (i * k * n2 * d1), s * (-bn * r1), -s1 * (i * k * doa), -s1 * (-bn * oa),
            );
            let inc = incident(k, beta, nu, rs, out_s.at(nu), prefactor(k, beta));
            let rhs = Matrix4x3::from_fn(|row, col| {
                let (ae, ah) = inc[col];
                let (e, de, h, dh) = (ae * ra, ae * dra, ah * ra, ah * dra);
                match row {
                    0 => e,
                    1 => h,
                    2 => s1 * (-bn * e - i * k * dh),
                    _ => s1 * (-bn * h + i * k * de),
                }
            });
            let x = m.lu().solve(&rhs)?;
            // core unknowns multiply F(r)/m with m the boundary scale
            let scale = if tiny { 1.0 } else { 1.0 / inside_scale(&inside, nu) };
            let mut c = Coefs { outer: zero_coef(), inner: zero_coef(), tiny };
            for col in 0..3 {
                c.outer[col] = [x[(2, col)] * ex, x[(3, col)] * ex];
                c.inner[col] = [x[(0, col)] * (ex * scale), x[(1, col)] * (ex * scale)];
            }
            Some(c)
        })
        .collect()
}

fn inside_scale(inside: &Radial, nu: i32) -> f64 {
    let (r, d) = inside.at(nu);
    r.norm().max(d.norm())
}

/// Core function at `h r` (or scaled `I` at `q1 r`) with the factor that
/// restores its scaling relative to the boundary.
fn core_at(fiber: FiberSpec, k: f64, beta: f64, r: f64, nmax: usize) -> (Radial, f64) {
    let r = r.max(1e-9);
    let s1 = fiber.n_fiber * fiber.n_fiber * k * k - beta * beta;
    if s1 > 0.0 {
        let h = s1.sqrt();
        (Radial::J(jy_tables(h * r, nmax).0, h), 1.0)
    } else {
        let q1 = (-s1).sqrt();
        (Radial::I(i_scaled_table(q1 * r, nmax), q1), (-q1 * (1.0 - r)).exp())
    }
}

/// Transmitted field dyadic inside the core.
#[allow(clippy::too_many_arguments)]
fn field_inside(fiber: FiberSpec, k: f64, beta: f64, nu: i32, r: f64, c: &Coefs, core: &Radial, factor: f64) -> Dyadic {
    let r = r.max(1e-9);
    let n2 = fiber.n_fiber * fiber.n_fiber;
    let s1 = n2 * k * k - beta * beta;
    let (f, df) = if c.tiny {
        let m = nu.unsigned_abs() as i32;
        (C64::new(r.powi(m), 0.0), C64::new(m as f64 * r.powi(m - 1), 0.0))
    } else {
        let (f, df) = core.at(nu);
        (f * factor, df * factor)
    };
    let mut out = Dyadic::zeros();
    for (col, &[ce, ch]) in c.inner.iter().enumerate() {
        let ax = Axial { ez: ce * f, dez: ce * df, hz: ch * f, dhz: ch * df };
        let e = transverse(nu as f64, beta, k, n2, s1, r, ax).0;
        for row in 0..3 {
            out[(row, col)] = e[row];
        }
    }
    out
}

/// Field dyadic (cylindrical, observation rows × source columns) of one
/// order from its coefficients and the observation function at `r`.
fn field(k: f64, beta: f64, nu: i32, r: f64, c: &Coef, obs: (C64, C64), ex: f64) -> Dyadic {
    let s = k * k - beta * beta;
    let mut out = Dyadic::zeros();
    for (col, &[ce, ch]) in c.iter().enumerate() {
        let ax = Axial { ez: ce * obs.0, dez: ce * obs.1, hz: ch * obs.0, dhz: ch * obs.1 };
        let e = transverse(nu as f64, beta, k, 1.0, s, r, ax).0;
        for row in 0..3 {
            out[(row, col)] = e[row] * ex;
        }
    }
    out
}

/// Quadrature rule on the real β axis (both signs). Symmetric windows around
/// the poles are covered by node pairs.
fn beta_rule(fiber: FiberSpec, k: f64, gap: f64, dz_max: f64, poles: &[f64], cfg: &SpectralConfig) -> Vec<(f64, f64)> {
    let n = fiber.n_fiber;
    let rule = GaussLegendre::cached(cfg.nodes);
    let mut out = Vec::new();
    let dz = dz_max.abs().max(1e-12);

    // |β| < k in θ, at most 4 oscillations of e^{iβΔz} per panel
    let panels = cfg.min_panels.max((k * dz / PI / 4.0).ceil() as usize);
    for p in 0..panels {
        let t0 = PI * p as f64 / panels as f64;
        let t1 = PI * (p + 1) as f64 / panels as f64;
        for (theta, w) in rule.mapped(t0, t1) {
            let (sin, cos) = theta.sin_cos();
            out.push((k * cos, w * k * sin));
        }
    }

    let gap = gap.max(cfg.min_gap);
    let beta_max = n * k + cfg.decay / gap;
    let h_tail = (8.0 * PI / dz).min(12.0 / gap);
    let h_guided = h_tail.min(0.25 * k);
    let mut windows = Vec::new();
    for (i, &p) in poles.iter().enumerate() {
        let left = if i == 0 { k } else { poles[i - 1] };
        let right = poles.get(i + 1).copied().unwrap_or(f64::INFINITY);
        let w = (0.45 * (p - left)).min(0.45 * (right - p)).min(0.1 * k);
        windows.push((p, w));
    }
    let panels_at = |a: f64, b: f64, h: f64, out: &mut Vec<(f64, f64)>| {
        if b <= a {
            return;
        }
        let np = ((b - a) / h).ceil().max(1.0) as usize;
        for p in 0..np {
            let t0 = a + (b - a) * p as f64 / np as f64;
            let t1 = a + (b - a) * (p + 1) as f64 / np as f64;
            out.extend(rule.mapped(t0, t1));
        }
    };
    let mut pos = Vec::new();
    // β = k cosh t up to the first window (or 2k) removes the square root at k
    let first_end = windows
        .first()
        .map(|&(p, w)| p - w)
        .unwrap_or(f64::INFINITY)
        .min(2.0 * k)
        .min(beta_max);
    let tb = (first_end / k).acosh();
    let np = ((first_end - k) / h_guided).ceil().max(2.0) as usize;
    for p in 0..np {
        let t0 = tb * p as f64 / np as f64;
        let t1 = tb * (p + 1) as f64 / np as f64;
        for (t, w) in rule.mapped(t0, t1) {
            pos.push((k * t.cosh(), w * k * t.sinh()));
        }
    }
    let mut start = first_end;
    for &(p, w) in &windows {
        panels_at(start, p - w, h_guided, &mut pos);
        for (t, wt) in rule.mapped(0.0, w) {
            pos.push((p + t, wt));
            pos.push((p - t, wt));
        }
        start = p + w;
    }
    let guided_end = (n * k).max(start);
    panels_at(start, guided_end, h_guided, &mut pos);
    panels_at(guided_end, beta_max, h_tail, &mut pos);
    for &(b, w) in &pos {
        out.push((b, w));
        out.push((-b, w));
    }
    out
}

#[derive(Debug, Clone)]
struct Node {
    beta: f64,
    weight: C64,
    /// Residue nodes carry only the orders of their pole.
    only: Option<u32>,
    coef: Vec<Option<Coefs>>,
}

/// Scattered field of a unit dipole at radius `rs`, expanded in `(ν, β)`,
/// in units of `ĝ = (6π/k) G`.
#[derive(Debug, Clone)]
pub struct SourceExpansion {
    pub fiber: FiberSpec,
    pub k: f64,
    pub rs: f64,
    pub nu_max: u32,
    nodes: Vec<Node>,
}

impl SourceExpansion {
    /// `r_min` is the observation radius closest to the fiber surface, on
    /// either side, and `dz_max` the largest axial offset; both size the β
    /// grid. Observation radii below 1 receive the transmitted core field.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        fiber: FiberSpec,
        k: f64,
        rs: f64,
        nu_max: u32,
        r_min: f64,
        dz_max: f64,
        poles: &Poles,
        cfg: &SpectralConfig,
    ) -> Self {
        let nmax = nu_max as usize;
        let n = fiber.n_fiber;
        let hat = 6.0 * PI / (k * k * k);
        let mut pole_pos: Vec<f64> = poles
            .list
            .iter()
            .filter(|&&(l, b)| l <= nu_max && b > k && b < n * k)
            .map(|&(_, b)| b)
            .collect();
        pole_pos.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pole_pos.dedup();
        let rule = beta_rule(fiber, k, (r_min - 1.0).abs() + rs - 1.0, dz_max, &pole_pos, cfg);
        let scale = |c: Vec<Option<Coefs>>| -> Vec<Option<Coefs>> {
            c.into_iter()
                .map(|o| {
                    o.map(|c| Coefs {
                        outer: c.outer.map(|p| p.map(|x| x * hat)),
                        inner: c.inner.map(|p| p.map(|x| x * hat)),
                        tiny: c.tiny,
                    })
                })
                .collect()
        };
        let mut nodes: Vec<Node> = rule
            .iter()
            .map(|&(beta, w)| Node {
                beta,
                weight: C64::new(w, 0.0),
                only: None,
                coef: scale(coefficients(fiber, k, beta, rs, nmax)),
            })
            .collect();
        for &(l, bp) in &poles.list {
            if l > nu_max || !(bp > k && bp < n * k) {
                continue;
            }
            let t = 1e-6 * bp;
            for sign in [1.0, -1.0] {
                let c = sign * bp;
                let up = coefficients(fiber, k, c + t, rs, nmax);
                let dn = coefficients(fiber, k, c - t, rs, nmax);
                let coef = up
                    .iter()
                    .zip(&dn)
                    .map(|(u, d)| {
                        let (u, d) = (u.as_ref()?, d.as_ref()?);
                        let mut r = Coefs { outer: zero_coef(), inner: zero_coef(), tiny: u.tiny };
                        for col in 0..3 {
                            for q in 0..2 {
                                r.outer[col][q] = (u.outer[col][q] - d.outer[col][q]) * (0.5 * t * hat);
                                r.inner[col][q] = (u.inner[col][q] - d.inner[col][q]) * (0.5 * t * hat);
                            }
                        }
                        Some(r)
                    })
                    .collect();
                nodes.push(Node { beta: c, weight: C64::new(0.0, sign * PI), only: Some(l), coef });
            }
        }
        Self { fiber, k, rs, nu_max, nodes }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Visits the per-order dyadic at observation radius `r` of every node.
    fn visit(&self, r: f64, mut f: impl FnMut(&Node, i32, Dyadic)) {
        let nmax = self.nu_max as usize;
        if r < 1.0 {
            for node in &self.nodes {
                let (core, factor) = core_at(self.fiber, self.k, node.beta, r, nmax);
                for (idx, c) in node.coef.iter().enumerate() {
                    let nu = idx as i32 - self.nu_max as i32;
                    if node.only.is_some_and(|l| l != nu.unsigned_abs()) {
                        continue;
                    }
                    let Some(c) = c else { continue };
                    let m = field_inside(self.fiber, self.k, node.beta, nu, r, c, &core, factor);
                    if m.iter().all(|c| c.is_finite()) {
                        f(node, nu, m);
                    }
                }
            }
            return;
        }
        for node in &self.nodes {
            let obs = outside(self.k, node.beta, r, nmax, true);
            let ex = (-decay_rate(self.k, node.beta) * (r - 1.0)).exp();
            for (idx, c) in node.coef.iter().enumerate() {
                let nu = idx as i32 - self.nu_max as i32;
                if node.only.is_some_and(|l| l != nu.unsigned_abs()) {
                    continue;
                }
                let Some(c) = c else { continue };
                let m = field(self.k, node.beta, nu, r, &c.outer, obs.at(nu), ex);
                // far inside the centrifugal barrier the harmonic is negligible
                // but its Bessel factors leave the f64 range
                let x = (self.k * self.k - node.beta * node.beta).abs().sqrt() * r.max(self.rs);
                if m.iter().any(|c| !c.is_finite()) && 2.0 * x < nu.abs() as f64 {
                    continue;
                }
                f(node, nu, m);
            }
        }
    }

    /// Kernel at observation radius `r`, reusable for any `Δφ`, `Δz`.
    pub fn kernel(&self, r: f64) -> RadialKernel {
        let nu_max = self.nu_max as i32;
        let mut parts: Vec<NuKernel> = (-nu_max..=nu_max).map(NuKernel::new).collect();
        self.visit(r, |node, nu, m| parts[(nu + nu_max) as usize].push(node.beta, node.weight, m));
        RadialKernel { r1: r, r2: self.rs, parts }
    }

    /// Cylindrical dyadics at radius `r` for several `(Δφ, Δz)` offsets.
    pub fn evaluate(&self, r: f64, offsets: &[(f64, f64)]) -> Vec<Dyadic> {
        let mut acc = vec![Dyadic::zeros(); offsets.len()];
        self.visit(r, |node, nu, m| {
            for (a, &(dphi, dz)) in acc.iter_mut().zip(offsets) {
                let phase = C64::from_polar(1.0, nu as f64 * dphi + node.beta * dz);
                *a += m * (node.weight * phase);
            }
        });
        acc
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FreePart {
    Full,
    /// Anti-Hermitian part: `J J` products on `|β| < k` with `p_f → 1/(8π)`.
    Radiative,
}

/// Free-space harmonics with the same conventions, for checks of the
/// expansion, valid for axial offsets up to `dz_max`.
pub fn free_kernel(k: f64, r: f64, rs: f64, nu_max: u32, dz_max: f64, part: FreePart, cfg: &SpectralConfig) -> RadialKernel {
    let radiative = part == FreePart::Radiative;
    let nmax = nu_max as usize;
    let hat = 6.0 * PI / (k * k * k);
    let vacuum = FiberSpec { n_fiber: 1.0 };
    let rule = beta_rule(vacuum, k, (r - rs).abs(), dz_max, &[], cfg);
    let nu_max = nu_max as i32;
    let mut parts: Vec<NuKernel> = (-nu_max..=nu_max).map(NuKernel::new).collect();
    for (beta, w) in rule {
        if radiative && beta.abs() >= k {
            continue;
        }
        let (src, obs) = if radiative {
            (outside(k, beta, rs, nmax, false), outside(k, beta, r, nmax, false))
        } else if r <= rs {
            (outside(k, beta, rs, nmax, true), outside(k, beta, r, nmax, false))
        } else {
            (outside(k, beta, rs, nmax, false), outside(k, beta, r, nmax, true))
        };
        let ex = (-decay_rate(k, beta) * (r - rs).abs()).exp();
        for part in parts.iter_mut() {
            let nu = part.nu;
            let pf = if radiative { C64::new(1.0 / (8.0 * PI), 0.0) } else { prefactor(k, beta) };
            let inc = incident(k, beta, nu, rs, src.at(nu), pf);
            let c: Coef = inc.map(|(e, h)| [e * hat, h * hat]);
            part.push(beta, C64::new(w, 0.0), field(k, beta, nu, r, &c, obs.at(nu), ex));
        }
    }
    RadialKernel { r1: r, r2: rs, parts }
}
