use std::f64::consts::PI;

use nalgebra::DMatrix;
use nanoring::collective::*;
use nanoring::fiber_modes::{FiberSpec, ModeFamily, ModeLabel, ModeSolver};
use nanoring::green::*;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn green(n: f64, k: f64, config: GreenConfig) -> FiberGreen {
    let fiber = FiberSpec { n_fiber: n };
    FiberGreen::new(fiber, k, config, &ModeSolver::new(fiber, None)).unwrap()
}

fn ring(atoms: usize, o: Orientation) -> RingSpec {
    RingSpec::new(atoms, 1.1, 0.0, o).unwrap()
}

fn single(r: RingSpec, x: f64, config: GreenConfig) -> (EffectiveHamiltonian, Vec<RemResult>) {
    let k = 2.0 * PI / (x * r.spacing());
    let h = build_hamiltonian(&[r], &green(1.45, k, config)).unwrap();
    let rems = rem_eigenvalues(&h).unwrap();
    (h, rems)
}

fn scale(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

#[test]
fn free_atom_and_dicke_pair() {
    let k = 1.3;
    let s = Site::new(2.0, 0.3, 0.0);
    let u = nalgebra::Vector3::new(0.0, 0.0, 1.0).map(|x| C64::new(x, 0.0));
    assert!((project(&g0_hat(s, s, k), &u, &u) - C64::i()).norm() < 1e-12);
    // two parallel dipoles: symmetric and antisymmetric rates, coincident
    // and in the limit of vanishing separation
    for dz in [0.0, 1e-7, 1e-4] {
        let g12 = project(&g0_hat(s, Site::new(2.0, 0.3, dz), k), &u, &u).im;
        assert!((1.0 + g12 - 2.0).abs() < 1e-6 && (1.0 - g12).abs() < 1e-6, "{dz}");
    }
}

#[test]
fn fourier_eigenvalues_match_dense_diagonalization() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cases: Vec<(usize, f64, f64, Orientation)> = (0..100)
        .map(|i| {
            let o = if i % 2 == 0 { Orientation::Orthoradial } else { Orientation::Longitudinal };
            (rng.gen_range(2..=10), rng.gen_range(1.05..2.0), rng.gen_range(PI / 5.0..2.0 * PI), o)
        })
        .collect();
    cases.par_iter().for_each(|&(atoms, rho, lambda0, o)| {
        let r = RingSpec::new(atoms, rho, 0.0, o).unwrap();
        let g = green(1.45, 2.0 * PI / lambda0, GreenConfig { real_part: false, ..Default::default() });
        let h = build_hamiltonian(&[r], &g).unwrap();
        assert!(h.asymmetry() < 1e-10);
        let rems = rem_eigenvalues(&h).unwrap();
        let fourier: Vec<C64> = rems.iter().map(|r| r.lambda).collect();
        let dense = dense_eigenvalues(&h.total);
        let e = match_spectra(&fourier, &dense) / scale(&h.total);
        assert!(e < 1e-9, "N={atoms} ρ={rho} λ0={lambda0}: {e:.2e}");
        // H ψ_n = −(λ_n/2) ψ_n
        let m = h.matrix();
        for rem in &rems {
            let psi = rem_state(rem.n, atoms).unwrap();
            let res = &m * &psi - &psi * (rem.lambda * -0.5);
            assert!(res.norm() < 1e-9 * scale(&m));
        }
    });
}

#[test]
fn free_matrix_is_circulant_and_degenerate_pairs_coincide() {
    let (h, rems) = single(ring(5, Orientation::Orthoradial), 2.4, GreenConfig::default());
    assert!(circulant_residual(&h.free) < 1e-12);
    assert!(circulant_residual(&h.total) < 1e-12);
    for n in 1..=2 {
        let a = rems.iter().find(|r| r.n == n).unwrap();
        let b = rems.iter().find(|r| r.n == -n).unwrap();
        assert!((a.lambda - b.lambda).norm() < 1e-10);
    }
}

#[test]
fn forbidden_channels_vanish_and_channels_add_up() {
    for o in [Orientation::Orthoradial, Orientation::Longitudinal] {
        for x in [1.3, 1.8, 3.4] {
            let (_, rems) = single(ring(5, o), x, GreenConfig::default());
            for rem in &rems {
                let mut sum = 0.0;
                for (c, &g) in &rem.channels {
                    sum += g;
                    match *c {
                        Channel::Guided { label, p } => {
                            let allowed = selection_rule(rem.n, label.l, p.unwrap_or(1), 5);
                            if !allowed {
                                assert!(g.abs() < 1e-12, "{o:?} {x} n={} {c}: {g:e}", rem.n);
                            } else {
                                assert!(g > -1e-12);
                            }
                        }
                        Channel::Radiation(nu) => {
                            if (nu - rem.n).rem_euclid(5) != 0 {
                                assert!(g.abs() < 1e-12, "{o:?} {x} n={} ν={nu}: {g:e}", rem.n);
                            }
                        }
                        Channel::Shift => assert!(g.abs() < 1e-12),
                    }
                }
                assert!((sum - rem.gamma_total).abs() < 1e-9);
                assert!(rem.gamma_total > 0.0);
                assert!(rem.gamma_guided <= rem.gamma_total);
                let ratio = rem.gamma_guided / rem.gamma_total;
                assert!((-1e-12..=1.0 + 1e-9).contains(&ratio), "{ratio}");
            }
        }
    }
}

#[test]
fn orientation_blind_modes() {
    let tm = ModeLabel::new(ModeFamily::TM, 0, 1);
    let te = ModeLabel::new(ModeFamily::TE, 0, 1);
    for x in [1.3, 1.8] {
        let (_, rems) = single(ring(5, Orientation::Orthoradial), x, GreenConfig::default());
        assert!(rems.iter().all(|r| r.guided_ratio(tm).abs() < 1e-12));
        let (_, rems) = single(ring(5, Orientation::Longitudinal), x, GreenConfig::default());
        assert!(rems.iter().all(|r| r.guided_ratio(te).abs() < 1e-12));
    }
}

/// At ρ = 1.1a, λ0/d = 3 the ring has kρ ≈ 2.4, so |n| = 3 lies only just
/// outside the light cone: the rates are subradiant but not below 0.1γ0,
/// even in free space (Γ0 ≈ 0.36).
#[test]
fn high_index_rems_are_subradiant_for_seven_atoms() {
    let (_, rems) = single(ring(7, Orientation::Orthoradial), 3.0, GreenConfig::default());
    for rem in rems.iter().filter(|r| r.n.abs() >= 3) {
        assert!(rem.gamma_total < 0.25 && rem.gamma_total < rem.gamma_free, "n={}: {}", rem.n, rem.gamma_total);
        assert!((rem.gamma_free - 0.36).abs() < 0.01);
    }
    let (_, rems) = single(ring(7, Orientation::Orthoradial), 5.0, GreenConfig::default());
    for rem in rems.iter().filter(|r| r.n.abs() >= 3) {
        assert!(rem.gamma_total < 0.1, "n={}: {}", rem.n, rem.gamma_total);
    }
}

#[test]
fn homogeneous_fiber_reproduces_free_rates() {
    let r = ring(5, Orientation::Orthoradial);
    let k = 2.0 * PI / (2.2 * r.spacing());
    let h = build_hamiltonian(&[r], &green(1.0001, k, GreenConfig::default())).unwrap();
    for rem in rem_eigenvalues(&h).unwrap() {
        let e = (rem.gamma_total - rem.gamma_free).abs() / rem.gamma_free;
        assert!(e < 5e-3, "n={}: {} vs {}", rem.n, rem.gamma_total, rem.gamma_free);
    }
}

#[test]
fn scan_csv_has_one_row_per_rem() {
    let r = ring(5, Orientation::Orthoradial);
    let fiber = FiberSpec { n_fiber: 1.45 };
    let solver = ModeSolver::new(fiber, None);
    let grid = [1.7, 1.8, 3.4];
    let cfg = GreenConfig { real_part: false, ..Default::default() };
    let rows = scan_wavelength(r, |k| Ok(FiberGreen::new(fiber, k, cfg, &solver)?), &grid).unwrap();
    let csv = scan_csv(&rows);
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&header[..6], &["lambda0_over_d", "lambda0_over_a", "n", "gamma_free", "gamma_total", "gamma_guided_ratio"]);
    assert!(header.contains(&"ratio_HE11") && header.contains(&"ratio_TE01"));
    assert_eq!(lines.clone().count(), 15);
    for line in lines {
        assert_eq!(line.split(',').count(), header.len());
    }
}
