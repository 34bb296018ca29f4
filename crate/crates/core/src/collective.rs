//! Single-excitation effective Hamiltonian of atomic rings around the fiber,
//! ring radiation eigenmodes (REMs), and channel-resolved decay rates.
//!
//! Couplings are kept in hat units, `ĝ_ij = (6π/k0) u_i*·G(r_i, r_j)·u_j`, so
//! the Hamiltonian in units of `ħγ0` is `H = −ĝ/2` and a REM with
//! `λ_n = (1/N) Σ_kl e^{−in2π(k−l)/N} ĝ_kl` decays at `Γ_n/γ0 = Im λ_n`.
//! A single free-space atom has `ĝ = i`, i.e. decays at exactly `γ0`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, DVector, Vector3};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fiber_modes::ModeLabel;
use crate::green::{g0_hat, project, ChannelDyadics, FiberGreen, GreenError, PairKernels, Site};

#[derive(Debug, thiserror::Error)]
pub enum CollectiveError {
    #[error("ring needs at least 2 atoms, got {0}")]
    TooFewAtoms(usize),
    #[error("ring radius {rho} must exceed the fiber radius")]
    InsideFiber { rho: f64 },
    #[error("REM index {n} is outside the index set of a {atoms}-atom ring")]
    Index { n: i32, atoms: usize },
    #[error("coupling matrix is not circulant, residual {residual:.3e}")]
    NotCirculant { residual: f64 },
    #[error("rings differ and cannot be paired")]
    RingMismatch,
    #[error("expected a {expected}×{expected} coupling matrix, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error(transparent)]
    Green(#[from] GreenError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Orthoradial,
    Longitudinal,
}

/// `N` atoms at `θ_j = 2π(j−1)/N` on a circle of radius `ρ` in the plane `z0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingSpec {
    pub atoms: usize,
    pub rho: f64,
    pub z0: f64,
    pub orientation: Orientation,
}

impl RingSpec {
    pub fn new(atoms: usize, rho: f64, z0: f64, orientation: Orientation) -> Result<Self, CollectiveError> {
        if atoms < 2 {
            return Err(CollectiveError::TooFewAtoms(atoms));
        }
        if !(rho > 1.0) {
            return Err(CollectiveError::InsideFiber { rho });
        }
        Ok(Self { atoms, rho, z0, orientation })
    }

    /// Nearest-neighbour distance `d = 2ρ sin(π/N)`.
    pub fn spacing(&self) -> f64 {
        2.0 * self.rho * (PI / self.atoms as f64).sin()
    }

    pub fn theta(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.atoms as f64
    }

    pub fn sites(&self) -> Vec<Site> {
        (0..self.atoms).map(|j| Site::new(self.rho, self.theta(j), self.z0)).collect()
    }

    /// Unit dipoles in Cartesian components.
    pub fn dipoles(&self) -> Vec<Vector3<C64>> {
        (0..self.atoms)
            .map(|j| {
                let v = match self.orientation {
                    Orientation::Orthoradial => {
                        let (s, c) = self.theta(j).sin_cos();
                        Vector3::new(-s, c, 0.0)
                    }
                    Orientation::Longitudinal => Vector3::new(0.0, 0.0, 1.0),
                };
                v.map(|x| C64::new(x, 0.0))
            })
            .collect()
    }

    /// Smallest and largest REM index, `⌈−(N−1)/2⌉ … ⌈(N−1)/2⌉`.
    pub fn index_range(&self) -> (i32, i32) {
        index_range(self.atoms)
    }

    pub fn same_shape(&self, other: &RingSpec) -> bool {
        self.atoms == other.atoms && self.rho == other.rho && self.orientation == other.orientation
    }
}

pub fn index_range(atoms: usize) -> (i32, i32) {
    let m = atoms as f64 - 1.0;
    ((-m / 2.0).ceil() as i32, (m / 2.0).ceil() as i32)
}

/// Decay channel of a REM.
///
/// Guided sub-channels carry the rotation sense `p` under which the
/// selection rule reads `(n + p·l) mod N = 0`. With profiles `∝ e^{iplθ}` the
/// ring mode `n` drives the field component of order `ν = −p·l`, so `p` here
/// is the sense of the mode that couples, opposite to the emitted profile's.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Channel {
    Guided { label: ModeLabel, p: Option<i8> },
    Radiation(i32),
    /// Real part of the radiation continuum; never contributes to rates.
    Shift,
}

impl Channel {
    fn guided(label: ModeLabel, nu: i32) -> Self {
        let p = (label.l > 0).then_some(if nu > 0 { -1 } else { 1 });
        Channel::Guided { label, p }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Channel::Guided { label, p: None } => write!(f, "{label}"),
            Channel::Guided { label, p: Some(p) } => write!(f, "{label}{}", if *p > 0 { "+" } else { "-" }),
            Channel::Radiation(nu) => write!(f, "rad{nu:+}"),
            Channel::Shift => write!(f, "shift"),
        }
    }
}

/// Kernels for every ordered pair of ring radii, valid up to `dz_max`.
#[derive(Debug, Clone)]
pub struct KernelSet {
    pairs: Vec<PairKernels>,
}

impl KernelSet {
    pub fn new(green: &FiberGreen, radii: &[f64], dz_max: f64) -> Result<Self, CollectiveError> {
        let mut distinct: Vec<f64> = radii.to_vec();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        let wanted: Vec<(f64, f64)> = distinct
            .iter()
            .flat_map(|&a| distinct.iter().map(move |&b| (a, b)))
            .collect();
        let pairs = wanted
            .par_iter()
            .map(|&(a, b)| green.pair(a, b, dz_max))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { pairs })
    }

    pub fn for_rings(green: &FiberGreen, rings: &[RingSpec]) -> Result<Self, CollectiveError> {
        let radii: Vec<f64> = rings.iter().map(|r| r.rho).collect();
        let (lo, hi) = rings
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r.z0), hi.max(r.z0)));
        Self::new(green, &radii, hi - lo)
    }

    pub fn get(&self, r1: f64, r2: f64) -> &PairKernels {
        self.pairs
            .iter()
            .find(|p| p.r1 == r1 && p.r2 == r2)
            .expect("kernel set built for these radii")
    }

    pub fn k0(&self) -> f64 {
        self.pairs[0].k0
    }
}

/// Channel-resolved coupling matrices `ĝ` (hat units).
#[derive(Debug, Clone)]
pub struct EffectiveHamiltonian {
    pub k0: f64,
    pub rings: Vec<RingSpec>,
    /// `ĝ` summed over guided, radiation and shift channels.
    pub total: DMatrix<C64>,
    /// Free-space baseline `ĝ0`.
    pub free: DMatrix<C64>,
    pub channels: BTreeMap<Channel, DMatrix<C64>>,
}

impl EffectiveHamiltonian {
    pub fn dimension(&self) -> usize {
        self.total.nrows()
    }

    /// `H/ħγ0 = −ĝ/2`.
    pub fn matrix(&self) -> DMatrix<C64> {
        self.total.map(|c| c * -0.5)
    }

    pub fn sites(&self) -> Vec<Site> {
        self.rings.iter().flat_map(RingSpec::sites).collect()
    }

    pub fn dipoles(&self) -> Vec<Vector3<C64>> {
        self.rings.iter().flat_map(RingSpec::dipoles).collect()
    }

    /// Guided labels with at least one sub-channel.
    pub fn guided_labels(&self) -> Vec<ModeLabel> {
        let mut out: Vec<ModeLabel> = self
            .channels
            .keys()
            .filter_map(|c| match c {
                Channel::Guided { label, .. } => Some(*label),
                _ => None,
            })
            .collect();
        out.dedup();
        out
    }

    /// Largest `|Hᵀ − H|` relative to `max |H|`.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.total.iter().map(|c| c.norm()).fold(0.0, f64::max);
        (&self.total - self.total.transpose()).iter().map(|c| c.norm()).fold(0.0, f64::max) / scale
    }
}

/// Assembles `ĝ` between all atoms of `rings`, ring by ring.
pub fn assemble(rings: &[RingSpec], kernels: &KernelSet) -> EffectiveHamiltonian {
    let k0 = kernels.k0();
    let offsets: Vec<usize> = rings
        .iter()
        .scan(0, |acc, r| {
            let o = *acc;
            *acc += r.atoms;
            Some(o)
        })
        .collect();
    let dim: usize = rings.iter().map(|r| r.atoms).sum();
    let blocks: Vec<(usize, usize)> =
        (0..rings.len()).flat_map(|i| (0..rings.len()).map(move |j| (i, j))).collect();
    let entries: Vec<Vec<(usize, usize, Vec<(Channel, C64)>)>> = blocks
        .par_iter()
        .map(|&(bi, bj)| block_channels(kernels, &rings[bi], &rings[bj], offsets[bi], offsets[bj]))
        .collect();
    let mut channels: BTreeMap<Channel, DMatrix<C64>> = BTreeMap::new();
    for (i, j, list) in entries.iter().flatten() {
        for &(c, v) in list {
            channels.entry(c).or_insert_with(|| DMatrix::zeros(dim, dim))[(*i, *j)] = v;
        }
    }
    let mut total = DMatrix::zeros(dim, dim);
    for m in channels.values() {
        total += m;
    }
    let atoms: Vec<(Site, Vector3<C64>)> =
        rings.iter().flat_map(|r| r.sites().into_iter().zip(r.dipoles())).collect();
    let free = DMatrix::from_fn(dim, dim, |i, j| project(&g0_hat(atoms[i].0, atoms[j].0, k0), &atoms[i].1, &atoms[j].1));
    EffectiveHamiltonian { k0, rings: rings.to_vec(), total, free, channels }
}

/// Channel couplings between every atom of `a` and every atom of `b`,
/// tagged with their matrix position.
pub(crate) fn block_channels(
    kernels: &KernelSet,
    a: &RingSpec,
    b: &RingSpec,
    row0: usize,
    col0: usize,
) -> Vec<(usize, usize, Vec<(Channel, C64)>)> {
    let pk = kernels.get(a.rho, b.rho);
    let (sa, ua) = (a.sites(), a.dipoles());
    let (sb, ub) = (b.sites(), b.dipoles());
    let pairs: Vec<(Site, Site)> = sa.iter().flat_map(|&s1| sb.iter().map(move |&s2| (s1, s2))).collect();
    let dyadics = pk.dyadics_at(a.z0 - b.z0, &pairs);
    let mut out = Vec::with_capacity(pairs.len());
    for (idx, ch) in dyadics.iter().enumerate() {
        let (k, l) = (idx / b.atoms, idx % b.atoms);
        out.push((row0 + k, col0 + l, pair_channels(pk, ch, sa[k], &ua[k], sb[l], &ub[l])));
    }
    out
}

fn pair_channels(
    pk: &PairKernels,
    ch: &ChannelDyadics,
    s1: Site,
    u1: &Vector3<C64>,
    s2: Site,
    u2: &Vector3<C64>,
) -> Vec<(Channel, C64)> {
    let dz = s1.z - s2.z;
    let mut out = Vec::new();
    for g in &pk.guided {
        for (nu, m) in g.cartesian_by_nu(s1.phi, s2.phi, dz) {
            out.push((Channel::guided(g.label, nu), project(&m, u1, u2)));
        }
    }
    for (nu, m) in &ch.radiation {
        out.push((Channel::Radiation(*nu), project(m, u1, u2)));
    }
    if let Some(m) = &ch.shift {
        out.push((Channel::Shift, project(m, u1, u2)));
    }
    out
}

/// Builds the effective Hamiltonian of one or more rings.
pub fn build_hamiltonian(rings: &[RingSpec], green: &FiberGreen) -> Result<EffectiveHamiltonian, CollectiveError> {
    let kernels = KernelSet::for_rings(green, rings)?;
    Ok(assemble(rings, &kernels))
}

/// `e^{in2π(j−1)/N}/√N`.
pub fn rem_state(n: i32, atoms: usize) -> Result<DVector<C64>, CollectiveError> {
    let (lo, hi) = index_range(atoms);
    if n < lo || n > hi {
        return Err(CollectiveError::Index { n, atoms });
    }
    let norm = (atoms as f64).sqrt();
    Ok(DVector::from_fn(atoms, |j, _| {
        C64::from_polar(1.0 / norm, 2.0 * PI * (n as i64 * j as i64) as f64 / atoms as f64)
    }))
}

/// `(n + p·l) mod N = 0`.
pub fn selection_rule(n: i32, l: u32, p: i8, atoms: usize) -> bool {
    (n as i64 + p as i64 * l as i64).rem_euclid(atoms as i64) == 0
}

/// `(1/N) Σ_kl e^{−in2π(k−l)/N} m_kl`.
pub fn fourier(m: &DMatrix<C64>, n: i32) -> C64 {
    let atoms = m.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for k in 0..atoms {
        for l in 0..atoms {
            let phase = -2.0 * PI * (n as i64 * (k as i64 - l as i64)).rem_euclid(atoms as i64) as f64 / atoms as f64;
            acc += m[(k, l)] * C64::from_polar(1.0, phase);
        }
    }
    acc / atoms as f64
}

/// Largest `|m_{k+1,l+1} − m_kl|` relative to `max |m|`.
pub fn circulant_residual(m: &DMatrix<C64>) -> f64 {
    let atoms = m.nrows();
    let scale = m.iter().map(|c| c.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut worst: f64 = 0.0;
    for k in 0..atoms {
        for l in 0..atoms {
            worst = worst.max((m[((k + 1) % atoms, (l + 1) % atoms)] - m[(k, l)]).norm());
        }
    }
    worst / scale
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RemResult {
    pub n: i32,
    /// `λ_n` in hat units; `Γ_n/γ0 = Im λ_n`.
    pub lambda: C64,
    /// Free-space `λ_n^{(0)}`.
    pub lambda_free: C64,
    pub state: Vec<C64>,
    pub gamma_total: f64,
    pub gamma_free: f64,
    pub gamma_guided: f64,
    pub channels: BTreeMap<Channel, f64>,
}

impl RemResult {
    /// `Γ^{(λ)}/Γ^{(t)}` summed over the sub-channels of one guided mode.
    pub fn guided_ratio(&self, label: ModeLabel) -> f64 {
        self.channels
            .iter()
            .filter(|(c, _)| matches!(c, Channel::Guided { label: l, .. } if *l == label))
            .map(|(_, g)| g)
            .sum::<f64>()
            / self.gamma_total
    }

    pub fn gamma_radiation(&self) -> f64 {
        self.channels
            .iter()
            .filter(|(c, _)| matches!(c, Channel::Radiation(_)))
            .map(|(_, g)| g)
            .sum()
    }
}

/// `Γ_n^{(λ)} = Im` of the Fourier sum of each channel block.
pub fn channel_rates(h: &EffectiveHamiltonian, n: i32) -> BTreeMap<Channel, f64> {
    h.channels.iter().map(|(c, m)| (*c, fourier(m, n).im)).collect()
}

/// REMs of a single ring by the Fourier formula.
pub fn rem_eigenvalues(h: &EffectiveHamiltonian) -> Result<Vec<RemResult>, CollectiveError> {
    let [ring] = h.rings.as_slice() else {
        return Err(CollectiveError::RingMismatch);
    };
    let residual = circulant_residual(&h.total);
    if residual > 1e-8 {
        return Err(CollectiveError::NotCirculant { residual });
    }
    let (lo, hi) = ring.index_range();
    (lo..=hi)
        .map(|n| {
            let lambda = fourier(&h.total, n);
            let lambda_free = fourier(&h.free, n);
            let channels = channel_rates(h, n);
            let gamma_guided = channels
                .iter()
                .filter(|(c, _)| matches!(c, Channel::Guided { .. }))
                .map(|(_, g)| g)
                .sum();
            Ok(RemResult {
                n,
                lambda,
                lambda_free,
                state: rem_state(n, ring.atoms)?.iter().copied().collect(),
                gamma_total: lambda.im,
                gamma_free: lambda_free.im,
                gamma_guided,
                channels,
            })
        })
        .collect()
}

/// Eigenvalues of a dense complex matrix (Schur form).
pub fn dense_eigenvalues(m: &DMatrix<C64>) -> Vec<C64> {
    m.clone()
        .schur()
        .eigenvalues()
        .expect("complex Schur form is triangular")
        .iter()
        .copied()
        .collect()
}

/// Largest distance from each of `a` to its nearest unused partner in `b`.
pub fn match_spectra(a: &[C64], b: &[C64]) -> f64 {
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for x in a {
        let (idx, d) = b
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .map(|(i, y)| (i, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .unwrap_or((0, f64::INFINITY));
        if idx < used.len() {
            used[idx] = true;
        }
        worst = worst.max(d);
    }
    worst
}

/// One row of a wavelength scan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanRow {
    pub lambda0_over_d: f64,
    pub lambda0_over_a: f64,
    pub rems: Vec<RemResult>,
}

/// Decay rates of every REM along a grid of `λ0/d`.
pub fn scan_wavelength(
    ring: RingSpec,
    green_at: impl Fn(f64) -> Result<FiberGreen, CollectiveError> + Sync,
    lambda0_over_d: &[f64],
) -> Result<Vec<ScanRow>, CollectiveError> {
    let d = ring.spacing();
    lambda0_over_d
        .par_iter()
        .map(|&x| {
            let green = green_at(2.0 * PI / (x * d))?;
            let h = build_hamiltonian(&[ring], &green)?;
            Ok(ScanRow { lambda0_over_d: x, lambda0_over_a: x * d, rems: rem_eigenvalues(&h)? })
        })
        .collect()
}

/// Guided labels present anywhere in a scan, in label order.
pub fn scan_labels(rows: &[ScanRow]) -> Vec<ModeLabel> {
    let mut out: Vec<ModeLabel> = rows
        .iter()
        .flat_map(|r| r.rems.iter())
        .flat_map(|rem| rem.channels.keys())
        .filter_map(|c| match c {
            Channel::Guided { label, .. } => Some(*label),
            _ => None,
        })
        .collect();
    out.sort();
    out.dedup();
    out
}

/// CSV with one row per grid point and REM.
pub fn scan_csv(rows: &[ScanRow]) -> String {
    let labels = scan_labels(rows);
    let mut s = String::from("lambda0_over_d,lambda0_over_a,n,gamma_free,gamma_total,gamma_guided_ratio");
    for l in &labels {
        s.push_str(&format!(",ratio_{l}"));
    }
    s.push_str(",shift_total,shift_free\n");
    for row in rows {
        for rem in &row.rems {
            s.push_str(&format!(
                "{},{},{},{},{},{}",
                row.lambda0_over_d,
                row.lambda0_over_a,
                rem.n,
                rem.gamma_free,
                rem.gamma_total,
                rem.gamma_guided / rem.gamma_total
            ));
            for l in &labels {
                s.push_str(&format!(",{}", rem.guided_ratio(*l)));
            }
            s.push_str(&format!(",{},{}\n", rem.lambda.re, rem.lambda_free.re));
        }
    }
    s
}
