//! Radial kernels: quadrature nodes in β per azimuthal order, each carrying a
//! 3×3 dyadic in cylindrical components `(r, φ, z)` at the two radii. The
//! angular and axial dependence `e^{iν(φ1−φ2)} e^{iβ(z1−z2)}` is applied at
//! evaluation time, so one kernel serves every pair of sites on the same
//! two radii.

use nalgebra::Matrix3;
use num_complex::Complex64 as C64;

pub type Dyadic = Matrix3<C64>;

/// Quadrature nodes of one azimuthal order.
#[derive(Debug, Clone, Default)]
pub struct NuKernel {
    pub nu: i32,
    pub beta: Vec<f64>,
    pub weight: Vec<C64>,
    pub value: Vec<Dyadic>,
}

impl NuKernel {
    pub fn new(nu: i32) -> Self {
        Self { nu, ..Default::default() }
    }

    pub fn push(&mut self, beta: f64, weight: C64, value: Dyadic) {
        self.beta.push(beta);
        self.weight.push(weight);
        self.value.push(value);
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }

    /// `Σ_q w_q M_q e^{iβ_q Δz}` in cylindrical components.
    pub fn sum(&self, dz: f64) -> Dyadic {
        let mut acc = Dyadic::zeros();
        for ((&b, &w), m) in self.beta.iter().zip(&self.weight).zip(&self.value) {
            acc += m * (w * C64::from_polar(1.0, b * dz));
        }
        acc
    }
}

/// Kernel for a fixed pair of radii.
#[derive(Debug, Clone)]
pub struct RadialKernel {
    pub r1: f64,
    pub r2: f64,
    pub parts: Vec<NuKernel>,
}

impl RadialKernel {
    /// Cartesian dyadic per azimuthal order for sites at `(r1, φ1, z1)`,
    /// `(r2, φ2, z2)` with `dz = z1 − z2`.
    pub fn cartesian_by_nu(&self, phi1: f64, phi2: f64, dz: f64) -> Vec<(i32, Dyadic)> {
        Self::place(&self.sums(dz), phi1, phi2)
    }

    /// Cylindrical sums per order at one axial offset, shared by every
    /// azimuth pair.
    pub fn sums(&self, dz: f64) -> Vec<(i32, Dyadic)> {
        self.parts.iter().map(|p| (p.nu, p.sum(dz))).collect()
    }

    /// Cartesian dyadics per order from [`RadialKernel::sums`].
    pub fn place(sums: &[(i32, Dyadic)], phi1: f64, phi2: f64) -> Vec<(i32, Dyadic)> {
        sums.iter()
            .map(|&(nu, m)| {
                let phase = C64::from_polar(1.0, nu as f64 * (phi1 - phi2));
                (nu, rotate(&(m * phase), phi1, phi2))
            })
            .collect()
    }

    pub fn cartesian(&self, phi1: f64, phi2: f64, dz: f64) -> Dyadic {
        self.cartesian_by_nu(phi1, phi2, dz)
            .into_iter()
            .fold(Dyadic::zeros(), |acc, (_, m)| acc + m)
    }

    /// Adds the nodes of `other`, which must cover the same orders.
    pub fn append(&mut self, other: RadialKernel) {
        if self.parts.is_empty() {
            self.parts = other.parts;
            return;
        }
        for (mine, theirs) in self.parts.iter_mut().zip(other.parts) {
            debug_assert_eq!(mine.nu, theirs.nu);
            mine.beta.extend(theirs.beta);
            mine.weight.extend(theirs.weight);
            mine.value.extend(theirs.value);
        }
    }

    pub fn node_count(&self) -> usize {
        self.parts.iter().map(NuKernel::len).sum()
    }
}

/// Rotation taking cylindrical components at azimuth `phi` to Cartesian.
pub fn rotation(phi: f64) -> Matrix3<f64> {
    let (s, c) = phi.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// `R(φ1) M R(φ2)ᵀ`.
pub fn rotate(m: &Dyadic, phi1: f64, phi2: f64) -> Dyadic {
    let a = rotation(phi1).map(|x| C64::new(x, 0.0));
    let b = rotation(phi2).transpose().map(|x| C64::new(x, 0.0));
    a * m * b
}

/// Outer product `a b†`.
pub fn outer_conj(a: &[C64; 3], b: &[C64; 3]) -> Dyadic {
    Dyadic::from_fn(|i, j| a[i] * b[j].conj())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_matches_component_map() {
        let v = [C64::new(0.3, 0.1), C64::new(-1.0, 0.0), C64::new(0.5, 0.5)];
        let phi = 1.1;
        let want = crate::cylinder::to_cartesian(v, phi);
        let r = rotation(phi).map(|x| C64::new(x, 0.0));
        let got = r * nalgebra::Vector3::new(v[0], v[1], v[2]);
        for i in 0..3 {
            assert!((got[i] - want[i]).norm() < 1e-15);
        }
    }
}
