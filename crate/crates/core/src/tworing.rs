//! Two identical rings separated by `Δz` along the fiber.
//!
//! In the basis of single-ring REMs the `2N` coupling matrix splits into
//! 2×2 blocks `[[λ_n, ν_n], [ν_n, λ_n]]` with
//! `ν_n = (1/N) Σ_kl ĝ_{k+N,l} e^{−i2πn(k−l)/N}`, whose eigenvalues are
//! `μ_n± = λ_n ± ν_n` for the states `(|Ψ_n^I⟩ ± |Ψ_n^II⟩)/√2`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collective::{
    assemble, block_channels, fourier, rem_state, Channel, CollectiveError, EffectiveHamiltonian, KernelSet, RingSpec,
};
use crate::fiber_modes::ModeLabel;
use crate::green::{g0_hat, project, FiberGreen};

/// Rings I (at `z0`) and II (at `z0 + Δz`) with identical atoms and no twist.
pub fn ring_pair(ring: RingSpec, dz: f64) -> [RingSpec; 2] {
    [ring, RingSpec { z0: ring.z0 + dz, ..ring }]
}

/// `(1/N) Σ_kl m_kl e^{−i2πn(k−l)/N}` of one block.
fn block_fourier(m: &DMatrix<C64>, row0: usize, col0: usize, atoms: usize, n: i32) -> C64 {
    fourier(&m.view((row0, col0), (atoms, atoms)).into_owned(), n)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NuCoupling {
    pub n: i32,
    pub nu: C64,
    /// Free-space `ν_n^{(0)}`.
    pub nu_free: C64,
    pub channels: BTreeMap<Channel, C64>,
}

impl NuCoupling {
    /// Sum over the sub-channels of one guided mode.
    pub fn guided(&self, label: ModeLabel) -> C64 {
        self.channels
            .iter()
            .filter(|(c, _)| matches!(c, Channel::Guided { label: l, .. } if *l == label))
            .map(|(_, v)| v)
            .sum()
    }

    pub fn radiation(&self, nu: i32) -> C64 {
        self.channels.get(&Channel::Radiation(nu)).copied().unwrap_or_default()
    }
}

/// `ν_n` with its channel decomposition, from a two-ring Hamiltonian.
pub fn coupling_nu(h: &EffectiveHamiltonian, n: i32) -> Result<NuCoupling, CollectiveError> {
    let [a, b] = h.rings.as_slice() else {
        return Err(CollectiveError::RingMismatch);
    };
    if !a.same_shape(b) {
        return Err(CollectiveError::RingMismatch);
    }
    let atoms = a.atoms;
    let channels = h
        .channels
        .iter()
        .map(|(c, m)| (*c, block_fourier(m, atoms, 0, atoms, n)))
        .collect();
    Ok(NuCoupling {
        n,
        nu: block_fourier(&h.total, atoms, 0, atoms, n),
        nu_free: block_fourier(&h.free, atoms, 0, atoms, n),
        channels,
    })
}

#[derive(Debug, Clone)]
pub struct BlockStructure {
    pub indices: Vec<i32>,
    /// Diagonal entries of the four blocks, in REM order.
    pub diag_i: Vec<C64>,
    pub diag_ii: Vec<C64>,
    pub off_i_ii: Vec<C64>,
    pub off_ii_i: Vec<C64>,
    /// Largest off-diagonal entry within any block, relative to the matrix scale.
    pub residual: f64,
    /// The transformed matrix.
    pub matrix: DMatrix<C64>,
}

/// `U† ĝ U` with `U = diag(F, F)` and `F` the REM states as columns.
pub fn block_structure(h: &EffectiveHamiltonian) -> Result<BlockStructure, CollectiveError> {
    let [a, b] = h.rings.as_slice() else {
        return Err(CollectiveError::RingMismatch);
    };
    if !a.same_shape(b) {
        return Err(CollectiveError::RingMismatch);
    }
    let atoms = a.atoms;
    let dim = 2 * atoms;
    if h.dimension() != dim {
        return Err(CollectiveError::Dimension { expected: dim, got: h.dimension() });
    }
    let (lo, hi) = a.index_range();
    let indices: Vec<i32> = (lo..=hi).collect();
    let mut u = DMatrix::<C64>::zeros(dim, dim);
    for (col, &n) in indices.iter().enumerate() {
        let psi: DVector<C64> = rem_state(n, atoms)?;
        for j in 0..atoms {
            u[(j, col)] = psi[j];
            u[(atoms + j, atoms + col)] = psi[j];
        }
    }
    let m = u.adjoint() * &h.total * &u;
    let scale = m.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut residual: f64 = 0.0;
    for r in 0..dim {
        for c in 0..dim {
            if r % atoms != c % atoms {
                residual = residual.max(m[(r, c)].norm() / scale);
            }
        }
    }
    let pick = |r0: usize, c0: usize| (0..atoms).map(|i| m[(r0 + i, c0 + i)]).collect::<Vec<_>>();
    Ok(BlockStructure {
        diag_i: pick(0, 0),
        diag_ii: pick(atoms, atoms),
        off_i_ii: pick(0, atoms),
        off_ii_i: pick(atoms, 0),
        indices,
        residual,
        matrix: m,
    })
}

impl BlockStructure {
    /// Fails when the blocks are not diagonal to `tol`.
    pub fn check(&self, tol: f64) -> Result<(), CollectiveError> {
        if self.residual > tol {
            Err(CollectiveError::NotCirculant { residual: self.residual })
        } else {
            Ok(())
        }
    }

    /// JSON dump with complex entries as `[re, im]` pairs, row-major.
    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<Vec<[f64; 2]>> = (0..self.matrix.nrows())
            .map(|r| (0..self.matrix.ncols()).map(|c| [self.matrix[(r, c)].re, self.matrix[(r, c)].im]).collect())
            .collect();
        let pairs = |v: &[C64]| v.iter().map(|c| [c.re, c.im]).collect::<Vec<_>>();
        serde_json::json!({
            "indices": self.indices,
            "matrix": rows,
            "lambda_ring_i": pairs(&self.diag_i),
            "lambda_ring_ii": pairs(&self.diag_ii),
            "nu_i_ii": pairs(&self.off_i_ii),
            "nu_ii_i": pairs(&self.off_ii_i),
            "residual": self.residual,
        })
    }
}

/// `(|Ψ_n^I⟩ ± |Ψ_n^II⟩)/√2`.
pub fn symmetric_state(n: i32, atoms: usize, sign: f64) -> Result<DVector<C64>, CollectiveError> {
    let psi = rem_state(n, atoms)?;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Ok(DVector::from_fn(2 * atoms, |j, _| {
        if j < atoms {
            psi[j] * s
        } else {
            psi[j - atoms] * (s * sign)
        }
    }))
}

/// A π phase on the excitation of ring II: exchanges `|Ψ_n^(+)⟩ ↔ |Ψ_n^(−)⟩`.
pub fn pi_phase(state: &DVector<C64>) -> DVector<C64> {
    let atoms = state.len() / 2;
    DVector::from_fn(state.len(), |j, _| if j < atoms { state[j] } else { -state[j] })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TwoRingRem {
    pub n: i32,
    pub lambda: C64,
    pub lambda_free: C64,
    pub coupling: NuCoupling,
    pub mu_plus: C64,
    pub mu_minus: C64,
    pub gamma_plus: f64,
    pub gamma_minus: f64,
    pub gamma_plus_free: f64,
    pub gamma_minus_free: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TwoRingResult {
    pub dz: f64,
    pub rems: Vec<TwoRingRem>,
}

impl TwoRingResult {
    pub fn rem(&self, n: i32) -> Option<&TwoRingRem> {
        self.rems.iter().find(|r| r.n == n)
    }
}

/// Single-ring `λ_n` and free `λ_n^{(0)}` reused along a separation scan.
struct RingLevels {
    lambda: Vec<(i32, C64, C64)>,
}

fn ring_levels(ring: RingSpec, kernels: &KernelSet) -> RingLevels {
    let h = assemble(&[ring], kernels);
    let (lo, hi) = ring.index_range();
    RingLevels { lambda: (lo..=hi).map(|n| (n, fourier(&h.total, n), fourier(&h.free, n))).collect() }
}

/// `ν_n` between ring I and ring II from a single block of couplings.
fn inter_ring(ring: RingSpec, dz: f64, kernels: &KernelSet) -> Result<Vec<NuCoupling>, CollectiveError> {
    let [one, two] = ring_pair(ring, dz);
    let k0 = kernels.k0();
    let atoms = ring.atoms;
    let (s1, u1) = (two.sites(), two.dipoles());
    let (s2, u2) = (one.sites(), one.dipoles());
    let mut blocks: BTreeMap<Channel, DMatrix<C64>> = BTreeMap::new();
    let mut total = DMatrix::zeros(atoms, atoms);
    for (k, l, list) in block_channels(kernels, &two, &one, 0, 0) {
        for (c, v) in list {
            blocks.entry(c).or_insert_with(|| DMatrix::zeros(atoms, atoms))[(k, l)] = v;
            total[(k, l)] += v;
        }
    }
    let free = DMatrix::from_fn(atoms, atoms, |k, l| project(&g0_hat(s1[k], s2[l], k0), &u1[k], &u2[l]));
    let (lo, hi) = ring.index_range();
    Ok((lo..=hi)
        .map(|n| NuCoupling {
            n,
            nu: fourier(&total, n),
            nu_free: fourier(&free, n),
            channels: blocks.iter().map(|(c, m)| (*c, fourier(m, n))).collect(),
        })
        .collect())
}

fn combine(levels: &RingLevels, dz: f64, nus: Vec<NuCoupling>) -> TwoRingResult {
    let rems = levels
        .lambda
        .iter()
        .zip(nus)
        .map(|(&(n, lambda, lambda_free), coupling)| {
            let mu_plus = lambda + coupling.nu;
            let mu_minus = lambda - coupling.nu;
            TwoRingRem {
                n,
                lambda,
                lambda_free,
                gamma_plus: mu_plus.im,
                gamma_minus: mu_minus.im,
                gamma_plus_free: (lambda_free + coupling.nu_free).im,
                gamma_minus_free: (lambda_free - coupling.nu_free).im,
                mu_plus,
                mu_minus,
                coupling,
            }
        })
        .collect();
    TwoRingResult { dz, rems }
}

/// `Γ_n^{(±)}` along a grid of separations. Kernels are built once for the
/// largest separation and reused at every grid point.
pub fn scan_separation(ring: RingSpec, green: &FiberGreen, dz: &[f64]) -> Result<Vec<TwoRingResult>, CollectiveError> {
    let dz_max = dz.iter().fold(0.0f64, |m, z| m.max(z.abs()));
    let kernels = KernelSet::new(green, &[ring.rho], dz_max)?;
    scan_with(ring, &kernels, dz)
}

pub fn scan_with(ring: RingSpec, kernels: &KernelSet, dz: &[f64]) -> Result<Vec<TwoRingResult>, CollectiveError> {
    let levels = ring_levels(ring, kernels);
    dz.par_iter()
        .map(|&z| Ok(combine(&levels, z, inter_ring(ring, z, kernels)?)))
        .collect()
}

/// Guided labels present in a scan.
pub fn scan_labels(rows: &[TwoRingResult]) -> Vec<ModeLabel> {
    let mut out: Vec<ModeLabel> = rows
        .iter()
        .flat_map(|r| r.rems.iter())
        .flat_map(|rem| rem.coupling.channels.keys())
        .filter_map(|c| match c {
            Channel::Guided { label, .. } => Some(*label),
            _ => None,
        })
        .collect();
    out.sort();
    out.dedup();
    out
}

/// CSV with one row per separation and a block of columns per REM `n`
/// (suffix `_n<n>`). Channel columns hold `Im ν_n` of each channel, the
/// part that enters `Γ^{(±)}`.
pub fn scan_csv(rows: &[TwoRingResult]) -> String {
    let labels = scan_labels(rows);
    let first = rows.first().map(|r| r.rems.as_slice()).unwrap_or_default();
    let orders: Vec<i32> = first
        .first()
        .map(|rem| {
            rem.coupling
                .channels
                .keys()
                .filter_map(|c| match c {
                    Channel::Radiation(nu) => Some(*nu),
                    _ => None,
                })
                .collect()
        })
        .unwrap_or_default();
    let mut s = String::from("dz_over_a");
    for rem in first {
        let n = rem.n;
        for col in ["gamma_plus_free", "gamma_minus_free", "gamma_plus_fiber", "gamma_minus_fiber", "re_nu", "im_nu"] {
            s.push_str(&format!(",{col}_n{n}"));
        }
        for l in &labels {
            s.push_str(&format!(",nu_guided_{l}_n{n}"));
        }
        for nu in &orders {
            s.push_str(&format!(",nu_rad_{nu}_n{n}"));
        }
    }
    s.push('\n');
    for row in rows {
        s.push_str(&row.dz.to_string());
        for rem in &row.rems {
            for v in [
                rem.gamma_plus_free,
                rem.gamma_minus_free,
                rem.gamma_plus,
                rem.gamma_minus,
                rem.coupling.nu.re,
                rem.coupling.nu.im,
            ] {
                s.push_str(&format!(",{v}"));
            }
            for l in &labels {
                s.push_str(&format!(",{}", rem.coupling.guided(*l).im));
            }
            for nu in &orders {
                s.push_str(&format!(",{}", rem.coupling.radiation(*nu).im));
            }
        }
        s.push('\n');
    }
    s
}

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("window holds {got} samples, at least {need} needed")]
    TooFewSamples { got: usize, need: usize },
    #[error("window spans {periods:.1} periods, at least {need} needed")]
    TooShort { periods: f64, need: f64 },
    #[error("samples are not uniformly spaced")]
    NonUniform,
}

/// One damped oscillation `A e^{−α z} cos(2π z/P + φ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub period: f64,
    pub damping: f64,
    /// Root-mean-square over the analysis window.
    pub rms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decay {
    Persistent,
    Decaying,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OscillationReport {
    /// Mean spacing of the local maxima of the signal.
    pub period: f64,
    pub decay: Decay,
    /// Components sorted by decreasing weight.
    pub components: Vec<Component>,
    /// Two components within 30% in period, each above 10% of the dominant.
    pub beat: Option<(Component, Component)>,
}

/// Damped complex exponentials of uniformly sampled data (matrix pencil).
/// Returns `(z_k, c_k)` with `y_m ≈ Σ c_k z_k^m`.
pub fn matrix_pencil(y: &[f64], max_order: usize, rel_tol: f64) -> Vec<(C64, C64)> {
    let m = y.len();
    let l = m / 3;
    let rows = m - l;
    let hankel = DMatrix::from_fn(rows, l + 1, |i, j| C64::new(y[i + j], 0.0));
    let svd = hankel.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let smax = svd.singular_values[0];
    let order = svd
        .singular_values
        .iter()
        .take_while(|&&s| s > rel_tol * smax)
        .count()
        .clamp(1, max_order);
    let vh = v_t.rows(0, order);
    let v1 = vh.columns(0, l).into_owned();
    let v2 = vh.columns(1, l).into_owned();
    let pinv = v1.clone().pseudo_inverse(1e-14).expect("pseudo-inverse of a finite matrix");
    let a = &v2 * pinv;
    let poles: Vec<C64> = crate::collective::dense_eigenvalues(&a);
    // amplitudes by least squares on the Vandermonde system
    let vander = DMatrix::from_fn(m, poles.len(), |i, k| poles[k].powi(i as i32));
    let rhs = DVector::from_fn(m, |i, _| C64::new(y[i], 0.0));
    let amps = vander
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .expect("least-squares amplitudes");
    poles.into_iter().zip(amps.iter().copied()).collect()
}

/// Period, decay and beat analysis of `Γ_n^{(+)} − Γ_n^{(−)} = 2 Im ν_n`
/// for separations within `window`, which must hold at least ten periods.
pub fn oscillation_analysis(
    scan: &[TwoRingResult],
    n: i32,
    window: (f64, f64),
) -> Result<OscillationReport, AnalysisError> {
    oscillation_analysis_with(scan, n, window, MIN_PERIODS)
}

/// Default number of periods an analysis window must span.
pub const MIN_PERIODS: f64 = 10.0;

/// [`oscillation_analysis`] with an explicit minimum number of periods.
pub fn oscillation_analysis_with(
    scan: &[TwoRingResult],
    n: i32,
    window: (f64, f64),
    min_periods: f64,
) -> Result<OscillationReport, AnalysisError> {
    let (z, y): (Vec<f64>, Vec<f64>) = scan
        .iter()
        .filter(|r| r.dz >= window.0 && r.dz <= window.1)
        .filter_map(|r| r.rem(n).map(|rem| (r.dz, rem.gamma_plus - rem.gamma_minus)))
        .unzip();
    analyse(&z, &y, min_periods)
}

/// Channel part of `Γ_n^{(+)} − Γ_n^{(−)}`, i.e. `2 Im ν_n^{(c)}`, along a scan.
pub fn channel_signal(scan: &[TwoRingResult], n: i32, window: (f64, f64), select: impl Fn(&Channel) -> bool) -> (Vec<f64>, Vec<f64>) {
    scan.iter()
        .filter(|r| r.dz >= window.0 && r.dz <= window.1)
        .filter_map(|r| {
            let rem = r.rem(n)?;
            let sum: f64 = rem.coupling.channels.iter().filter(|(c, _)| select(c)).map(|(_, v)| 2.0 * v.im).sum();
            Some((r.dz, sum))
        })
        .unzip()
}

/// [`oscillation_analysis`] on any uniformly sampled signal.
pub fn analyse(z: &[f64], y: &[f64], min_periods: f64) -> Result<OscillationReport, AnalysisError> {
    if z.len() < 30 {
        return Err(AnalysisError::TooFewSamples { got: z.len(), need: 30 });
    }
    let h = z[1] - z[0];
    if z.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h.abs().max(1.0)) {
        return Err(AnalysisError::NonUniform);
    }
    let span = z[z.len() - 1] - z[0];
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let centred: Vec<f64> = y.iter().map(|v| v - mean).collect();

    let mut components: Vec<Component> = matrix_pencil(&centred, 12, 1e-6)
        .into_iter()
        .filter(|(p, _)| p.im > 1e-9)
        .map(|(p, c)| {
            let period = 2.0 * std::f64::consts::PI * h / p.arg();
            let damping = -p.norm().ln() / h;
            let rms = (0..centred.len())
                .map(|i| (c * p.powi(i as i32)).re * 2.0)
                .map(|v| v * v)
                .sum::<f64>()
                / centred.len() as f64;
            Component { period, damping, rms: rms.sqrt() }
        })
        .filter(|c| c.period > 2.0 * h && c.period < 2.0 * span)
        .collect();
    components.sort_by(|a, b| b.rms.total_cmp(&a.rms));

    let peaks: Vec<f64> = (1..centred.len() - 1)
        .filter(|&i| centred[i] > centred[i - 1] && centred[i] >= centred[i + 1] && centred[i] > 0.0)
        .map(|i| {
            // parabolic refinement of the peak position
            let (a, b, c) = (centred[i - 1], centred[i], centred[i + 1]);
            let denom = a - 2.0 * b + c;
            let shift = if denom.abs() > 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
            z[i] + shift * h
        })
        .collect();
    let period = if peaks.len() >= 3 {
        (peaks[peaks.len() - 1] - peaks[0]) / (peaks.len() - 1) as f64
    } else {
        components.first().map_or(f64::NAN, |c| c.period)
    };
    let periods = span / period;
    if !(periods >= min_periods) {
        return Err(AnalysisError::TooShort { periods, need: min_periods });
    }

    let third = centred.len() / 3;
    let rms = |s: &[f64]| (s.iter().map(|v| v * v).sum::<f64>() / s.len() as f64).sqrt();
    let decay = if rms(&centred[centred.len() - third..]) < 0.3 * rms(&centred[..third]) {
        Decay::Decaying
    } else {
        Decay::Persistent
    };

    let beat = components.first().and_then(|&dominant| {
        components.iter().skip(1).find_map(|&c| {
            let close = (c.period / dominant.period).max(dominant.period / c.period) <= 1.3;
            (close && c.rms >= 0.1 * dominant.rms).then_some((dominant, c))
        })
    });
    Ok(OscillationReport { period, decay, components, beat })
}
