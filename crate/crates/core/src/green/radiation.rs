//! Radiation-mode expansion of the decay kernel.
//!
//! For each `(ν, β)` with `|β| < k` the core carries `E_z = A J_ν(hr)`,
//! `H_z = B J_ν(hr)` and the outside
//!
//! ```text
//! E_z = C J_ν(κr) + D Y_ν(κr),   H_z = E J_ν(κr) + F Y_ν(κr),   κ² = k² − β².
//! ```
//!
//! The core amplitudes `(1, 0)` and `(0, 1)` fix two outside vectors
//! `v = (C, D, E, F)`. Gram–Schmidt under `⟨v, w⟩ = Σ v_i w_i*` yields two
//! orthogonal polarizations. The far-zone energy of a cylindrical wave is
//! `(k²/κ²)|v|²` per unit amplitude, so δ(ω)-normalized modes are the fields
//! of a unit `v` scaled by `κ/√(2πk)`.
//!
//! With this normalization the decay kernel is
//!
//! ```text
//! Γ_ij/γ0 = (3π/(2k²)) Σ_ν Σ_pol ∫_{−k}^{k} dβ (u_i*·e(r_i)) (e*(r_j)·u_j),
//! ```
//!
//! which in a homogeneous medium sums to exactly 1 for any unit dipole.
//! The integral runs over `β = k cos θ` so the square-root behaviour of `κ`
//! at `β = ±k` becomes smooth; uniform θ-panels cluster β-nodes at `±k`.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use super::kernel::{outer_conj, Dyadic, NuKernel, RadialKernel};
use crate::cylinder::{transverse, Axial};
use crate::fiber_modes::FiberSpec;
use crate::quadrature::GaussLegendre;
use crate::specfun::{jy_tables, OrderTable};

/// Outside coefficients `(C, D, E, F)` of the two radiation polarizations.
fn outside_vectors(
    fiber: FiberSpec,
    k: f64,
    beta: f64,
    nu: i32,
    inner: &OrderTable,
    outer_j: &OrderTable,
    outer_y: &OrderTable,
) -> [[C64; 4]; 2] {
    let n2 = fiber.n_fiber * fiber.n_fiber;
    let s_in = n2 * k * k - beta * beta;
    let h = s_in.sqrt();
    let s_out = k * k - beta * beta;
    let kappa = s_out.sqrt();
    let i = C64::i();
    let (j1, dj1) = inner.signed(nu);
    let (jo, djo) = outer_j.signed(nu);
    let (yo, dyo) = outer_y.signed(nu);
    let bn = beta * nu as f64;
    let wr = 2.0 / (PI * kappa);
    let solve = |a: C64, b: C64| {
        let ez = a * j1;
        let hz = b * j1;
        // tangential E_φ and H_φ just inside, times s_out
        let ephi = (-bn * ez - i * k * b * h * dj1) / s_in;
        let hphi = (-bn * hz + i * k * n2 * a * h * dj1) / s_in;
        // outside derivatives from E_φ, H_φ continuity
        let dhz = (ephi * s_out + bn * ez) / (-i * k);
        let dez = (hphi * s_out + bn * hz) / (i * k);
        let coef = |v: C64, dv: C64| {
            let dvx = dv / kappa;
            ((v * dyo - dvx * yo) / wr, (dvx * jo - v * djo) / wr)
        };
        let (c, d) = coef(ez, dez);
        let (e, f) = coef(hz, dhz);
        [c, d, e, f]
    };
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    // rescale first: at high order |C| can approach the f64 range
    let unit = |v: [C64; 4]| {
        let m = v.iter().map(|x| x.norm()).fold(0.0, f64::max);
        v.map(|x| x / m)
    };
    let v1 = unit(solve(one, zero));
    let v2 = unit(solve(zero, one));
    let dot = |a: &[C64; 4], b: &[C64; 4]| a.iter().zip(b).map(|(x, y)| x * y.conj()).sum::<C64>();
    let n1 = dot(&v1, &v1).re.sqrt();
    let w1 = v1.map(|x| x / n1);
    let proj = dot(&v2, &w1);
    let mut w2 = [zero; 4];
    for c in 0..4 {
        w2[c] = v2[c] - proj * w1[c];
    }
    let n2v = dot(&w2, &w2).re.sqrt();
    [w1, w2.map(|x| x / n2v)]
}

/// δ-normalized outside field of one polarization at radius `r`.
fn outside_field(k: f64, beta: f64, nu: i32, v: &[C64; 4], jt: &OrderTable, yt: &OrderTable, r: f64) -> [C64; 3] {
    let s = k * k - beta * beta;
    let kappa = s.sqrt();
    let (j, dj) = jt.signed(nu);
    let (y, dy) = yt.signed(nu);
    let ax = Axial {
        ez: v[0] * j + v[1] * y,
        dez: (v[0] * dj + v[1] * dy) * kappa,
        hz: v[2] * j + v[3] * y,
        dhz: (v[2] * dj + v[3] * dy) * kappa,
    };
    let scale = kappa / (2.0 * PI * k).sqrt();
    transverse(nu as f64, beta, k, 1.0, s, r, ax).0.map(|c| c * scale)
}

/// Kernel whose sum gives the radiation part of `Im ĝ` between radii
/// `r1`, `r2 > a`, for `|ν| ≤ nu_max`, on uniform θ-panels.
pub fn radiation_kernel(
    fiber: FiberSpec,
    k: f64,
    r1: f64,
    r2: f64,
    nu_max: u32,
    nodes: usize,
    panels: usize,
) -> RadialKernel {
    let mut out = RadialKernel { r1, r2, parts: Vec::new() };
    for p in 0..panels {
        let t0 = PI * p as f64 / panels as f64;
        let t1 = PI * (p + 1) as f64 / panels as f64;
        out.append(radiation_panel(fiber, k, r1, r2, nu_max, nodes, t0, t1));
    }
    out
}

/// Contribution of `θ ∈ [t0, t1]` (`β = k cos θ`) to [`radiation_kernel`].
#[allow(clippy::too_many_arguments)]
pub fn radiation_panel(
    fiber: FiberSpec,
    k: f64,
    r1: f64,
    r2: f64,
    nu_max: u32,
    nodes: usize,
    t0: f64,
    t1: f64,
) -> RadialKernel {
    let nmax = nu_max as usize;
    let rule = GaussLegendre::cached(nodes);
    let mut parts: Vec<NuKernel> = (-(nu_max as i32)..=nu_max as i32).map(NuKernel::new).collect();
    let n2 = fiber.n_fiber * fiber.n_fiber;
    let pref = 3.0 * PI / (2.0 * k * k);
    for (theta, w) in rule.mapped(t0, t1) {
        let (sin, cos) = theta.sin_cos();
        let beta = k * cos;
        let kappa = k * sin;
        let h = (n2 * k * k - beta * beta).sqrt();
        let (inner, _) = jy_tables(h, nmax);
        let (oj, oy) = jy_tables(kappa, nmax);
        let (j1, y1) = jy_tables(kappa * r1, nmax);
        let (j2, y2) = if r2 == r1 { (j1.clone(), y1.clone()) } else { jy_tables(kappa * r2, nmax) };
        let weight = C64::new(w * k * sin * pref, 0.0);
        for part in parts.iter_mut() {
            let nu = part.nu;
            let pols = outside_vectors(fiber, k, beta, nu, &inner, &oj, &oy);
            let mut m = Dyadic::zeros();
            for v in &pols {
                let e1 = outside_field(k, beta, nu, v, &j1, &y1, r1);
                let e2 = if r2 == r1 { e1 } else { outside_field(k, beta, nu, v, &j2, &y2, r2) };
                m += outer_conj(&e1, &e2);
            }
            // deep inside the centrifugal barrier the mode is negligible,
            // but its Y-coefficients leave the f64 range
            if m.iter().any(|c| !c.is_finite()) && kappa * r1.max(r2) < 0.5 * nu.abs() as f64 {
                m = Dyadic::zeros();
            }
            part.push(beta, weight, m);
        }
    }
    RadialKernel { r1, r2, parts }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    fn project(m: &Dyadic, u: [f64; 3]) -> C64 {
        let u = Vector3::new(u[0], u[1], u[2]).map(|x| C64::new(x, 0.0));
        (u.adjoint() * m * u)[(0, 0)]
    }

    /// Homogeneous medium: the kernel at one point is the identity
    /// (Σ_ν J_ν² = 1 and its derivative identities).
    #[test]
    fn homogeneous_self_rate_is_one() {
        let fiber = FiberSpec { n_fiber: 1.0 };
        let k = 1.4;
        let r = 1.3;
        let kern = radiation_kernel(fiber, k, r, r, 10, 32, 4);
        let m = kern.cartesian(0.4, 0.4, 0.0);
        for u in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.6, 0.0, 0.8]] {
            let g = project(&m, u);
            assert!((g.re - 1.0).abs() < 1e-9 && g.im.abs() < 1e-12, "{u:?} {g}");
        }
    }
}
