//! Guided-mode (pole) part of the coupling.
//!
//! For a mode of propagation constant β and group delay β' = dβ/dω,
//!
//! ```text
//! ĝ^g_ij = i (3πβ'/k²) Σ_p (u_i*·e_{p,f}(r_i)) (e*_{p,f}(r_j)·u_j) e^{iβ|z_i − z_j|},
//! ```
//!
//! with `f = sgn(z_i − z_j)`, and the average over both directions at equal
//! heights. Its imaginary part at `i = j` is the standard mode-function rate
//! `(3πβ'/(2k²)) Σ_{p,f} |u·e_{p,f}|²`.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use super::kernel::{outer_conj, rotate, Dyadic};
use crate::fiber_modes::{GuidedModeSolution, ModeLabel};

/// One `(p, f)` component of a guided mode between two radii.
#[derive(Debug, Clone)]
pub struct GuidedPart {
    pub nu: i32,
    pub f: i8,
    pub value: Dyadic,
}

/// Cylindrical-component dyadics of one guided mode between radii `r1`, `r2`.
#[derive(Debug, Clone)]
pub struct GuidedKernel {
    pub label: ModeLabel,
    pub beta: f64,
    pub dbeta_domega: f64,
    pub k: f64,
    pub parts: Vec<GuidedPart>,
}

impl GuidedKernel {
    /// Collects every orientation of `label` present in `modes`.
    pub fn new(label: ModeLabel, modes: &[GuidedModeSolution], r1: f64, r2: f64) -> Option<Self> {
        let mut parts = Vec::new();
        let mut head = None;
        for m in modes.iter().filter(|m| m.id.label == label) {
            head.get_or_insert((m.beta, m.dbeta_domega, m.k0));
            let e1 = m.radial_e(r1);
            let e2 = if r1 == r2 { e1 } else { m.radial_e(r2) };
            parts.push(GuidedPart { nu: m.id.nu(), f: m.id.f, value: outer_conj(&e1, &e2) });
        }
        let (beta, dbeta_domega, k) = head?;
        Some(Self { label, beta, dbeta_domega, k, parts })
    }

    /// Cartesian `ĝ^g` dyadic for sites at azimuths `φ1`, `φ2`, `dz = z1 − z2`.
    pub fn cartesian(&self, phi1: f64, phi2: f64, dz: f64) -> Dyadic {
        self.cartesian_by_nu(phi1, phi2, dz)
            .into_iter()
            .fold(Dyadic::zeros(), |acc, (_, m)| acc + m)
    }

    /// [`GuidedKernel::cartesian`] split by the signed order `ν = p·l`.
    pub fn cartesian_by_nu(&self, phi1: f64, phi2: f64, dz: f64) -> Vec<(i32, Dyadic)> {
        let pref = C64::new(0.0, 3.0 * PI * self.dbeta_domega / (self.k * self.k));
        let along = pref * C64::from_polar(1.0, self.beta * dz.abs());
        let mut out: Vec<(i32, Dyadic)> = Vec::new();
        for part in &self.parts {
            let weight = if dz == 0.0 {
                0.5
            } else if (dz > 0.0) == (part.f > 0) {
                1.0
            } else {
                continue;
            };
            let phase = C64::from_polar(weight, part.nu as f64 * (phi1 - phi2));
            let m = rotate(&(part.value * (phase * along)), phi1, phi2);
            match out.iter_mut().find(|(nu, _)| *nu == part.nu) {
                Some((_, acc)) => *acc += m,
                None => out.push((part.nu, m)),
            }
        }
        out
    }

    /// Decay kernel `(3πβ'/(2k²)) Σ e_{p,f}(r1) e_{p,f}(r2)† e^{iνΔφ} e^{ifβΔz}`
    /// per azimuthal order; its sum is the anti-Hermitian part of
    /// [`GuidedKernel::cartesian`].
    pub fn decay_by_nu(&self, phi1: f64, phi2: f64, dz: f64) -> Vec<(i32, Dyadic)> {
        let pref = 1.5 * PI * self.dbeta_domega / (self.k * self.k);
        let mut out: Vec<(i32, Dyadic)> = Vec::new();
        for part in &self.parts {
            let phase = C64::from_polar(pref, part.nu as f64 * (phi1 - phi2) + part.f as f64 * self.beta * dz);
            let m = rotate(&(part.value * phase), phi1, phi2);
            match out.iter_mut().find(|(nu, _)| *nu == part.nu) {
                Some((_, acc)) => *acc += m,
                None => out.push((part.nu, m)),
            }
        }
        out
    }
}
