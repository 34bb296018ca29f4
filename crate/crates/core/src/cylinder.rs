//! Transverse field components of a cylindrical wave from its axial parts.
//!
//! Fields carry `exp(i(βz + νφ − ωt))`; with `s = εk² − β²` the Maxwell curl
//! equations give the radial and azimuthal components below.

use num_complex::Complex64 as C64;

/// Axial amplitudes of one cylindrical wave at radius `r`.
#[derive(Debug, Clone, Copy)]
pub struct Axial {
    pub ez: C64,
    pub dez: C64,
    pub hz: C64,
    pub dhz: C64,
}

/// Returns `(e, h)` in cylindrical components `(r, φ, z)`.
#[allow(clippy::too_many_arguments)]
pub fn transverse(nu: f64, beta: f64, k: f64, eps: f64, s: f64, r: f64, a: Axial) -> ([C64; 3], [C64; 3]) {
    let i = C64::i();
    let inv = 1.0 / s;
    let bn = beta * nu / r;
    let e_r = (i * beta * a.dez - nu * k / r * a.hz) * inv;
    let e_phi = (-bn * a.ez - i * k * a.dhz) * inv;
    let h_r = (i * beta * a.dhz + nu * k * eps / r * a.ez) * inv;
    let h_phi = (-bn * a.hz + i * k * eps * a.dez) * inv;
    ([e_r, e_phi, a.ez], [h_r, h_phi, a.hz])
}

/// Cylindrical components at azimuth `phi` rotated to Cartesian.
pub fn to_cartesian(v: [C64; 3], phi: f64) -> [C64; 3] {
    let (s, c) = phi.sin_cos();
    [v[0] * c - v[1] * s, v[0] * s + v[1] * c, v[2]]
}

/// Cartesian components rotated to cylindrical at azimuth `phi`.
pub fn to_cylindrical(v: [C64; 3], phi: f64) -> [C64; 3] {
    let (s, c) = phi.sin_cos();
    [v[0] * c + v[1] * s, -v[0] * s + v[1] * c, v[2]]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_round_trip() {
        let v = [C64::new(1.0, 2.0), C64::new(-0.5, 0.3), C64::new(0.0, 1.0)];
        let w = to_cylindrical(to_cartesian(v, 0.7), 0.7);
        for (a, b) in v.iter().zip(&w) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    /// A plane wave along z written as ν = ±1 content has no axial field;
    /// here we only check the homogeneous curl relation ∇·E = 0 for a TM
    /// wave `E_z = J_0(hr)` numerically.
    #[test]
    fn divergence_free() {
        use crate::specfun::bessel_j;
        let (k, beta, eps) = (2.0, 1.2, 1.0);
        let s: f64 = eps * k * k - beta * beta;
        let h = s.sqrt();
        let field = |r: f64| {
            let j = bessel_j(0, h * r).unwrap();
            let a = Axial {
                ez: C64::new(j.value, 0.0),
                dez: C64::new(h * j.derivative, 0.0),
                hz: C64::new(0.0, 0.0),
                dhz: C64::new(0.0, 0.0),
            };
            transverse(0.0, beta, k, eps, s, r, a).0
        };
        let r = 0.9;
        let dr = 1e-5;
        let d_rer = ((r + dr) * field(r + dr)[0] - (r - dr) * field(r - dr)[0]) / (2.0 * dr);
        let div = d_rer / r + C64::i() * beta * field(r)[2];
        assert!(div.norm() < 1e-8, "{div}");
    }
}
