//! Emitted field `E(r) ∝ Σ_j ĝ(r, r_j)·u_j c_j` of a prepared ring state and
//! intensity maps `|E|²` on planar grids.

use std::collections::HashMap;

use nalgebra::{DVector, Vector3};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collective::RingSpec;
use crate::fiber_modes::GuidedModeSolution;
use crate::green::kernel::{rotate, Dyadic};
use crate::green::{g0_hat, FiberGreen, GreenError, Site, SourceExpansion};

/// Observation closer than this to an atom is rejected.
pub const MIN_DISTANCE: f64 = 1e-3;

#[derive(Debug, thiserror::Error)]
pub enum FieldError {
    #[error("observation point within {distance:.2e} of an atom")]
    Singular { distance: f64 },
    #[error("observation radius {r} is inside the fiber core")]
    InsideCore { r: f64 },
    #[error("state has {got} amplitudes for {expected} atoms")]
    Dimension { expected: usize, got: usize },
    #[error("grid needs at least 2×2 points, got {0}×{1}")]
    Resolution(usize, usize),
    #[error(transparent)]
    Green(#[from] GreenError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Environment {
    Free,
    Fiber,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "plane", rename_all = "lowercase")]
pub enum Plane {
    /// Points `(u, y, v)`.
    Xz { y: f64 },
    /// Points `(u, v, z)`.
    Xy { z: f64 },
}

impl Plane {
    pub fn point(&self, u: f64, v: f64) -> Vector3<f64> {
        match *self {
            Plane::Xz { y } => Vector3::new(u, y, v),
            Plane::Xy { z } => Vector3::new(u, v, z),
        }
    }

    /// Name of the second in-plane axis.
    pub fn v_axis(&self) -> &'static str {
        match self {
            Plane::Xz { .. } => "z",
            Plane::Xy { .. } => "y",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Core {
    /// Core pixels are set to zero and flagged.
    Mask,
    /// The transmitted field is evaluated inside the core as well.
    Evaluate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub plane: Plane,
    pub u: (f64, f64),
    pub v: (f64, f64),
    pub resolution: (usize, usize),
    pub core: Core,
}

impl GridSpec {
    /// A square `resolution²` grid of half-width `half` centred on the axis.
    pub fn square(plane: Plane, half: f64, resolution: usize) -> Self {
        Self { plane, u: (-half, half), v: (-half, half), resolution: (resolution, resolution), core: Core::Mask }
    }

    pub fn u_at(&self, i: usize) -> f64 {
        self.u.0 + (self.u.1 - self.u.0) * i as f64 / (self.resolution.0 - 1) as f64
    }

    pub fn v_at(&self, j: usize) -> f64 {
        self.v.0 + (self.v.1 - self.v.0) * j as f64 / (self.resolution.1 - 1) as f64
    }

    /// Points row by row (`v` outer, `u` inner).
    pub fn points(&self) -> Vec<Vector3<f64>> {
        let (nu, nv) = self.resolution;
        (0..nv).flat_map(|j| (0..nu).map(move |i| (i, j))).map(|(i, j)| self.plane.point(self.u_at(i), self.v_at(j))).collect()
    }
}

#[derive(Debug, Clone)]
struct Emitter {
    site: Site,
    dipole: Vector3<C64>,
    amplitude: C64,
}

/// Dipoles of a prepared state with their scattered-field expansions.
#[derive(Debug, Clone)]
pub struct FieldSource {
    pub k0: f64,
    pub environment: Environment,
    emitters: Vec<Emitter>,
    /// Per ring: expansion on its radius and the emitter index range.
    rings: Vec<(SourceExpansion, std::ops::Range<usize>)>,
}

fn emitters(rings: &[RingSpec], state: &DVector<C64>) -> Result<Vec<Emitter>, FieldError> {
    let expected: usize = rings.iter().map(|r| r.atoms).sum();
    if state.len() != expected {
        return Err(FieldError::Dimension { expected, got: state.len() });
    }
    Ok(rings
        .iter()
        .flat_map(|r| r.sites().into_iter().zip(r.dipoles()))
        .zip(state.iter())
        .map(|((site, dipole), &amplitude)| Emitter { site, dipole, amplitude })
        .collect())
}

impl FieldSource {
    pub fn free(rings: &[RingSpec], state: &DVector<C64>, k0: f64) -> Result<Self, FieldError> {
        Ok(Self { k0, environment: Environment::Free, emitters: emitters(rings, state)?, rings: Vec::new() })
    }

    /// Sources next to the fiber, for observation points no closer to the
    /// surface than `r_min` (either side) and axial offsets up to `dz_max`.
    pub fn fiber(
        rings: &[RingSpec],
        state: &DVector<C64>,
        green: &FiberGreen,
        r_min: f64,
        dz_max: f64,
    ) -> Result<Self, FieldError> {
        let emitters = emitters(rings, state)?;
        let mut start = 0;
        let mut out = Vec::new();
        for r in rings {
            out.push((green.source_expansion(r.rho, r_min, dz_max)?, start..start + r.atoms));
            start += r.atoms;
        }
        Ok(Self { k0: green.k0, environment: Environment::Fiber, emitters, rings: out })
    }

    /// Cartesian field at `p`, in units where a free atom has `ĝ = i`.
    pub fn field_at(&self, p: Vector3<f64>) -> Result<Vector3<C64>, FieldError> {
        let obs = Site::from_cartesian(p.x, p.y, p.z);
        for e in &self.emitters {
            let distance = (e.site.cartesian() - p).norm();
            if distance <= MIN_DISTANCE {
                return Err(FieldError::Singular { distance });
            }
        }
        let inside = self.environment == Environment::Fiber && obs.r < 1.0;
        let mut field = Vector3::zeros();
        if !inside {
            for e in &self.emitters {
                field += g0_hat(obs, e.site, self.k0) * e.dipole * e.amplitude;
            }
        }
        for (expansion, range) in &self.rings {
            let emitters = &self.emitters[range.clone()];
            let offsets: Vec<(f64, f64)> = emitters.iter().map(|e| (obs.phi - e.site.phi, obs.z - e.site.z)).collect();
            for (m, e) in expansion.evaluate(obs.r, &offsets).iter().zip(emitters) {
                field += rotate(m, obs.phi, e.site.phi) * e.dipole * e.amplitude;
            }
        }
        Ok(field)
    }
}

/// Field of a state at one point. Builds the expansions for this point only;
/// use [`FieldSource`] for many points.
pub fn field_at(
    point: Vector3<f64>,
    state: &DVector<C64>,
    rings: &[RingSpec],
    green: Option<&FiberGreen>,
    k0: f64,
) -> Result<Vector3<C64>, FieldError> {
    let source = match green {
        None => FieldSource::free(rings, state, k0)?,
        Some(g) => {
            let r = point.xy().norm();
            let dz = rings.iter().map(|ring| (point.z - ring.z0).abs()).fold(0.0, f64::max);
            FieldSource::fiber(rings, state, g, r, dz)?
        }
    };
    source.field_at(point)
}

/// Radial step of the interpolation tables used for maps.
pub const RADIAL_STEP: f64 = 0.02;

/// Upper gap edges `|r − a|` of the bands sharing one β rule.
const BANDS: [f64; 4] = [0.1, 0.3, 1.0, 3.0];

fn band(r: f64) -> usize {
    let gap = (r - 1.0).abs();
    BANDS.iter().position(|&e| gap < e).unwrap_or(BANDS.len())
}

/// Per-order cylindrical sums on one side of the surface, for a set of axial
/// offsets: `values[radius][offset][order]`.
#[derive(Debug, Clone)]
struct RadialTable {
    radii: Vec<f64>,
    exact: Option<HashMap<u64, usize>>,
    values: Vec<Vec<Vec<Dyadic>>>,
}

impl RadialTable {
    fn build(green: &FiberGreen, rs: f64, radii: &[f64], offsets: &[f64], step: f64, exact: bool) -> Result<Self, FieldError> {
        let lo = radii.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = radii.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let n = (((hi - lo) / step).ceil() as usize + 1).max(4);
        let exact = exact || radii.len() <= n;
        let grid: Vec<f64> = if exact {
            radii.to_vec()
        } else {
            (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
        };
        let dz_max = offsets.iter().fold(0.0, |m: f64, d| m.max(d.abs()));
        let mut expansions = Vec::new();
        for b in 0..=BANDS.len() {
            let members = grid.iter().filter(|&&r| band(r) == b);
            let Some(r_min) = members.min_by(|x, y| (*x - 1.0).abs().total_cmp(&(*y - 1.0).abs())) else {
                expansions.push(None);
                continue;
            };
            expansions.push(Some(green.source_expansion(rs, *r_min, dz_max)?));
        }
        let values = grid
            .par_iter()
            .map(|&r| {
                let kernel = expansions[band(r)].as_ref().expect("band has members").kernel(r);
                offsets.iter().map(|&dz| kernel.sums(dz).into_iter().map(|(_, m)| m).collect()).collect()
            })
            .collect();
        let exact = exact.then(|| grid.iter().enumerate().map(|(i, r)| (r.to_bits(), i)).collect());
        Ok(Self { radii: grid, exact, values })
    }

    /// Sums at radius `r` and offset index `d`, by cubic interpolation
    /// between grid radii unless `r` is tabulated.
    fn at(&self, r: f64, d: usize) -> Vec<Dyadic> {
        if let Some(idx) = &self.exact {
            return self.values[idx[&r.to_bits()]][d].clone();
        }
        let n = self.radii.len();
        let (lo, hi) = (self.radii[0], self.radii[n - 1]);
        let t = (r - lo) / (hi - lo) * (n - 1) as f64;
        let i0 = (t.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
        let mut out = vec![Dyadic::zeros(); self.values[0][d].len()];
        for a in i0..i0 + 4 {
            let w: f64 = (i0..i0 + 4).filter(|&b| b != a).map(|b| (t - b as f64) / (a as f64 - b as f64)).product();
            for (o, m) in out.iter_mut().zip(&self.values[a][d]) {
                *o += m * C64::new(w, 0.0);
            }
        }
        out
    }
}

/// Scattered field of one ring tabulated for the pixels of a map.
#[derive(Debug, Clone)]
struct RingTable {
    range: std::ops::Range<usize>,
    nu_max: i32,
    offsets: HashMap<u64, usize>,
    outside: Option<RadialTable>,
    inside: Option<RadialTable>,
}

impl RingTable {
    fn build(green: &FiberGreen, ring: &RingSpec, range: std::ops::Range<usize>, points: &[Vector3<f64>], step: f64, exact: bool) -> Result<Self, FieldError> {
        let mut offsets: Vec<f64> = points.iter().map(|p| p.z - ring.z0).collect();
        offsets.sort_by(f64::total_cmp);
        offsets.dedup();
        let mut radii: Vec<f64> = points.iter().map(|p| p.x.hypot(p.y)).collect();
        radii.sort_by(f64::total_cmp);
        radii.dedup();
        let side = |inner: bool| -> Result<Option<RadialTable>, FieldError> {
            let r: Vec<f64> = radii.iter().copied().filter(|&r| (r < 1.0) == inner).collect();
            if r.is_empty() {
                return Ok(None);
            }
            RadialTable::build(green, ring.rho, &r, &offsets, step, exact).map(Some)
        };
        Ok(Self {
            range,
            nu_max: green.config.nu_max as i32,
            offsets: offsets.iter().enumerate().map(|(i, d)| (d.to_bits(), i)).collect(),
            outside: side(false)?,
            inside: side(true)?,
        })
    }
}

/// Field at the tabulated points of a map.
fn tabulated_field(source: &FieldSource, tables: &[RingTable], p: Vector3<f64>) -> Result<Vector3<C64>, FieldError> {
    let obs = Site::from_cartesian(p.x, p.y, p.z);
    let mut field = Vector3::zeros();
    for e in &source.emitters {
        let distance = (e.site.cartesian() - p).norm();
        if distance <= MIN_DISTANCE {
            return Err(FieldError::Singular { distance });
        }
        if obs.r >= 1.0 {
            field += g0_hat(obs, e.site, source.k0) * e.dipole * e.amplitude;
        }
    }
    for t in tables {
        let d = t.offsets[&(p.z - source.emitters[t.range.start].site.z).to_bits()];
        let table = if obs.r < 1.0 { &t.inside } else { &t.outside };
        let sums = table.as_ref().expect("radius tabulated").at(obs.r, d);
        for e in &source.emitters[t.range.clone()] {
            let dphi = obs.phi - e.site.phi;
            let mut m = Dyadic::zeros();
            for (i, s) in sums.iter().enumerate() {
                m += s * C64::from_polar(1.0, (i as i32 - t.nu_max) as f64 * dphi);
            }
            field += rotate(&m, obs.phi, e.site.phi) * e.dipole * e.amplitude;
        }
    }
    Ok(field)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntensityGrid {
    pub spec: GridSpec,
    pub environment: Environment,
    /// `|E|²` scaled to a maximum of 1, row by row (`v` outer).
    pub values: Vec<f64>,
    /// Pixels inside the core or on an atom.
    pub mask: Vec<bool>,
    /// Unscaled maximum of `|E|²`.
    pub peak: f64,
}

/// `|E|²` of a state on a grid, normalized to a maximum of 1.
pub fn intensity_map(
    spec: GridSpec,
    state: &DVector<C64>,
    rings: &[RingSpec],
    green: Option<&FiberGreen>,
    k0: f64,
) -> Result<IntensityGrid, FieldError> {
    map_with(spec, state, rings, green, k0, RADIAL_STEP, false)
}

fn map_with(
    spec: GridSpec,
    state: &DVector<C64>,
    rings: &[RingSpec],
    green: Option<&FiberGreen>,
    k0: f64,
    step: f64,
    exact: bool,
) -> Result<IntensityGrid, FieldError> {
    let (nu, nv) = spec.resolution;
    if nu < 2 || nv < 2 {
        return Err(FieldError::Resolution(nu, nv));
    }
    let points = spec.points();
    let masked = |p: &Vector3<f64>| spec.core == Core::Mask && p.xy().norm() < 1.0;
    let source = FieldSource::free(rings, state, k0)?;
    let mut tables = Vec::new();
    let environment = match green {
        None => Environment::Free,
        Some(g) => {
            let live: Vec<Vector3<f64>> = points.iter().filter(|p| !masked(p)).copied().collect();
            let mut start = 0;
            for ring in rings {
                tables.push(RingTable::build(g, ring, start..start + ring.atoms, &live, step, exact)?);
                start += ring.atoms;
            }
            Environment::Fiber
        }
    };
    let raw: Vec<Option<f64>> = points
        .par_iter()
        .map(|p| {
            if masked(p) {
                return Ok(None);
            }
            match tabulated_field(&source, &tables, *p) {
                Ok(e) => Ok(Some(e.norm_squared())),
                Err(FieldError::Singular { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_, FieldError>>()?;
    let peak = raw.iter().flatten().fold(0.0, |m: f64, &v| m.max(v));
    let scale = if peak > 0.0 { 1.0 / peak } else { 0.0 };
    Ok(IntensityGrid {
        spec,
        environment,
        values: raw.iter().map(|v| v.map_or(0.0, |v| v * scale)).collect(),
        mask: raw.iter().map(Option::is_none).collect(),
        peak,
    })
}

impl IntensityGrid {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.spec.resolution.0 + i]
    }

    /// Largest value among unmasked pixels with `|x, y| ≤ radius` from the axis.
    pub fn max_within(&self, radius: f64) -> f64 {
        self.spec
            .points()
            .iter()
            .zip(&self.values)
            .zip(&self.mask)
            .filter(|((p, _), &m)| !m && p.xy().norm() <= radius)
            .map(|((_, &v), _)| v)
            .fold(0.0, f64::max)
    }

    /// Strict local maxima along row `j`, skipping masked pixels.
    pub fn row_maxima(&self, j: usize) -> usize {
        let nu = self.spec.resolution.0;
        let row = |i: usize| (!self.mask[j * nu + i]).then(|| self.at(i, j));
        (1..nu - 1)
            .filter(|&i| match (row(i - 1), row(i), row(i + 1)) {
                (Some(a), Some(b), Some(c)) => b > a && b > c,
                _ => false,
            })
            .count()
    }

    /// Pearson correlation with `other` over pixels unmasked here.
    pub fn correlation(&self, other: &[f64]) -> f64 {
        let pairs: Vec<(f64, f64)> =
            self.values.iter().zip(other).zip(&self.mask).filter(|(_, &m)| !m).map(|((&a, &b), _)| (a, b)).collect();
        let n = pairs.len() as f64;
        let (ma, mb) = pairs.iter().fold((0.0, 0.0), |(x, y), &(a, b)| (x + a / n, y + b / n));
        let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
        for &(a, b) in &pairs {
            sab += (a - ma) * (b - mb);
            saa += (a - ma) * (a - ma);
            sbb += (b - mb) * (b - mb);
        }
        sab / (saa * sbb).sqrt()
    }

    /// JSON header: plane, extents, resolution and mask.
    pub fn header(&self) -> serde_json::Value {
        serde_json::json!({
            "plane": self.spec.plane,
            "u_range": [self.spec.u.0, self.spec.u.1],
            "v_range": [self.spec.v.0, self.spec.v.1],
            "resolution": [self.spec.resolution.0, self.spec.resolution.1],
            "core": self.spec.core,
            "environment": self.environment,
            "normalization": "max",
            "peak": self.peak,
            "mask": self.mask.iter().map(|&m| u8::from(m)).collect::<Vec<_>>(),
        })
    }

    /// Rows `x, y_or_z, intensity`.
    pub fn to_csv(&self) -> String {
        let (nu, nv) = self.spec.resolution;
        let mut s = format!("x,{},intensity\n", self.spec.plane.v_axis());
        for j in 0..nv {
            for i in 0..nu {
                s.push_str(&format!("{},{},{}\n", self.spec.u_at(i), self.spec.v_at(j), self.at(i, j)));
            }
        }
        s
    }
}

/// `|e|²` of a guided mode at every grid point, for comparison with maps.
pub fn mode_intensity(mode: &GuidedModeSolution, spec: &GridSpec) -> Vec<f64> {
    spec.points()
        .iter()
        .map(|p| {
            let s = Site::from_cartesian(p.x, p.y, p.z);
            mode.profile(s.r.max(1e-9), s.phi).iter().map(|c| c.norm_sqr()).sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collective::{rem_state, Orientation};

    #[test]
    fn free_field_scales_linearly_and_rejects_atoms() {
        let ring = RingSpec::new(5, 1.1, 0.0, Orientation::Orthoradial).unwrap();
        let psi = rem_state(1, 5).unwrap();
        let src = FieldSource::free(&[ring], &psi, 1.4).unwrap();
        let p = Vector3::new(0.3, 2.0, 1.5);
        let c = C64::new(0.3, -1.7);
        let scaled = FieldSource::free(&[ring], &(&psi * c), 1.4).unwrap();
        assert!((scaled.field_at(p).unwrap() - src.field_at(p).unwrap() * c).norm() < 1e-14);
        let atom = ring.sites()[2].cartesian();
        assert!(matches!(src.field_at(atom + Vector3::new(0.0, 0.0, 5e-4)), Err(FieldError::Singular { .. })));
        assert!(matches!(
            FieldSource::free(&[ring], &DVector::zeros(4), 1.4),
            Err(FieldError::Dimension { expected: 5, got: 4 })
        ));
    }

    #[test]
    fn grid_layout() {
        let spec = GridSpec::square(Plane::Xz { y: 1.65 }, 2.0, 5);
        let pts = spec.points();
        assert_eq!(pts.len(), 25);
        assert_eq!(pts[0], Vector3::new(-2.0, 1.65, -2.0));
        assert_eq!(pts[6], Vector3::new(-1.0, 1.65, -1.0));
    }

    #[test]
    fn tabulated_maps_match_direct_evaluation() {
        use crate::fiber_modes::{FiberSpec, ModeSolver};
        use crate::green::GreenConfig;
        let fiber = FiberSpec { n_fiber: 1.45 };
        let ring = RingSpec::new(5, 1.1, 0.0, Orientation::Orthoradial).unwrap();
        let k = 2.0 * std::f64::consts::PI / (1.8 * ring.spacing());
        let g = FiberGreen::new(fiber, k, GreenConfig::default(), &ModeSolver::new(fiber, None)).unwrap();
        let psi = rem_state(1, 5).unwrap();
        let spec = GridSpec::square(Plane::Xy { z: 1.65 }, 3.0, 9);
        let exact = map_with(spec, &psi, &[ring], Some(&g), k, RADIAL_STEP, true).unwrap();
        let interp = map_with(spec, &psi, &[ring], Some(&g), k, RADIAL_STEP, false).unwrap();
        assert!(interp.spec == exact.spec && interp.mask == exact.mask);
        for (a, b) in exact.values.iter().zip(&interp.values) {
            assert!((a - b).abs() < 1e-5, "{a} {b}");
        }
        let direct = FieldSource::fiber(&[ring], &psi, &g, 1.0 + 0.1 / 3.0, 1.65).unwrap();
        for (p, (&v, &m)) in spec.points().iter().zip(exact.values.iter().zip(&exact.mask)) {
            if !m {
                let e = direct.field_at(*p).unwrap().norm_squared() / exact.peak;
                assert!((e - v).abs() < 1e-5, "{p:?}: {e} {v}");
            }
        }
    }
}
