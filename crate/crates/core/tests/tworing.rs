use std::f64::consts::PI;

use nalgebra::DMatrix;
use nanoring::collective::*;
use nanoring::fiber_modes::{FiberSpec, ModeFamily, ModeLabel, ModeSolver};
use nanoring::green::*;
use nanoring::tworing::*;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn green(k: f64, real_part: bool) -> FiberGreen {
    let fiber = FiberSpec { n_fiber: 1.45 };
    FiberGreen::new(fiber, k, GreenConfig { real_part, ..Default::default() }, &ModeSolver::new(fiber, None)).unwrap()
}

fn ring(o: Orientation) -> RingSpec {
    RingSpec::new(5, 1.1, 0.0, o).unwrap()
}

fn k_at(x: f64, r: &RingSpec) -> f64 {
    2.0 * PI / (x * r.spacing())
}

#[test]
fn eigenvalues_are_lambda_plus_minus_nu() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..12 {
        let o = if i % 2 == 0 { Orientation::Orthoradial } else { Orientation::Longitudinal };
        let r = RingSpec::new(rng.gen_range(3..=7), rng.gen_range(1.05..1.8), 0.0, o).unwrap();
        let dz = rng.gen_range(0.2..12.0);
        let g = green(k_at(rng.gen_range(1.3..3.6), &r), i % 3 == 0);
        let h = build_hamiltonian(&ring_pair(r, dz), &g).unwrap();
        let blocks = block_structure(&h).unwrap();
        blocks.check(1e-9).unwrap();
        let scale = h.total.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let mut mu = Vec::new();
        for (idx, &n) in blocks.indices.iter().enumerate() {
            let nu = coupling_nu(&h, n).unwrap();
            assert!((blocks.off_i_ii[idx] - nu.nu).norm() < 1e-9 * scale);
            assert!((blocks.off_ii_i[idx] - nu.nu).norm() < 1e-9 * scale);
            assert!((blocks.diag_i[idx] - blocks.diag_ii[idx]).norm() < 1e-9 * scale);
            let channel_sum: C64 = nu.channels.values().sum();
            assert!((channel_sum - nu.nu).norm() < 1e-9 * scale);
            mu.push(blocks.diag_i[idx] + nu.nu);
            mu.push(blocks.diag_i[idx] - nu.nu);
        }
        let dense = dense_eigenvalues(&h.total);
        let e = match_spectra(&mu, &dense) / scale;
        assert!(e < 1e-9, "case {i}: {e:.2e}");
    }
}

#[test]
fn scan_agrees_with_full_assembly() {
    let r = ring(Orientation::Orthoradial);
    let g = green(k_at(3.4, &r), true);
    let dz = [0.7, 3.3, 9.1];
    let scan = scan_separation(r, &g, &dz).unwrap();
    let single = rem_eigenvalues(&build_hamiltonian(&[r], &g).unwrap()).unwrap();
    for row in &scan {
        let h = build_hamiltonian(&ring_pair(r, row.dz), &g).unwrap();
        for rem in &row.rems {
            let nu = coupling_nu(&h, rem.n).unwrap();
            assert!((nu.nu - rem.coupling.nu).norm() < 1e-6, "{} {}", row.dz, rem.n);
            assert!((nu.nu_free - rem.coupling.nu_free).norm() < 1e-12);
            let lambda = single.iter().find(|s| s.n == rem.n).unwrap().lambda;
            // rates agree exactly; shifts to the spectral quadrature accuracy
            assert!((lambda.im - rem.lambda.im).abs() < 1e-12);
            assert!((lambda.re - rem.lambda.re).abs() < 1e-5, "{} {}", lambda, rem.lambda);
            // trace identity of the 2×2 block
            assert!((rem.gamma_plus + rem.gamma_minus - 2.0 * rem.lambda.im).abs() < 1e-12);
            assert!((rem.gamma_plus_free + rem.gamma_minus_free - 2.0 * rem.lambda_free.im).abs() < 1e-12);
        }
    }
}

#[test]
fn merging_rings_double_and_cancel_the_rate() {
    for o in [Orientation::Orthoradial, Orientation::Longitudinal] {
        let r = ring(o);
        let scan = scan_separation(r, &green(k_at(3.4, &r), false), &[1e-3]).unwrap();
        for rem in &scan[0].rems {
            let gt = rem.lambda.im;
            assert!((rem.gamma_plus - 2.0 * gt).abs() < 0.01 * gt, "{o:?} n={}", rem.n);
            assert!(rem.gamma_minus.abs() < 0.01 * gt, "{o:?} n={}", rem.n);
        }
    }
}

#[test]
fn excitation_stays_in_the_same_rem() {
    let r = ring(Orientation::Orthoradial);
    let h = build_hamiltonian(&ring_pair(r, 2.7), &green(k_at(1.8, &r), true)).unwrap();
    let m = h.matrix();
    for n in -2..=2 {
        let start = symmetric_state(n, 5, 1.0).unwrap() + symmetric_state(n, 5, -1.0).unwrap();
        let norm = start.norm();
        let start = start / C64::new(norm, 0.0);
        let plus = symmetric_state(n, 5, 1.0).unwrap();
        let minus = symmetric_state(n, 5, -1.0).unwrap();
        for t in [0.3, 1.0, 4.0] {
            let u: DMatrix<C64> = (&m * C64::new(0.0, -t)).exp();
            let psi = &u * &start;
            let inside = &plus * plus.dotc(&psi) + &minus * minus.dotc(&psi);
            assert!((&psi - inside).norm() < 1e-9, "n={n} t={t}");
        }
    }
}

#[test]
fn pi_phase_maps_superradiant_to_subradiant() {
    let r = ring(Orientation::Orthoradial);
    let h = build_hamiltonian(&ring_pair(r, 4.15), &green(k_at(3.4, &r), false)).unwrap();
    let m = h.total.clone();
    let plus = symmetric_state(1, 5, 1.0).unwrap();
    let minus = pi_phase(&plus);
    let nu = coupling_nu(&h, 1).unwrap().nu;
    let lambda = fourier(&m.view((0, 0), (5, 5)).into_owned(), 1);
    assert!((&m * &plus - &plus * (lambda + nu)).norm() < 1e-9);
    assert!((&m * &minus - &minus * (lambda - nu)).norm() < 1e-9);
}

/// The n = 0 coupling decays through 5% of |ν_1| near Δz = 21.6a; at 20a it
/// is still 5.9%.
#[test]
fn only_the_guided_rem_couples_far_apart() {
    let r = ring(Orientation::Orthoradial);
    let scan = scan_separation(r, &green(k_at(3.4, &r), true), &[20.0, 22.0]).unwrap();
    let ratio = |row: &TwoRingResult, n: i32| row.rem(n).unwrap().coupling.nu.norm() / row.rem(1).unwrap().coupling.nu.norm();
    for n in [2, -2] {
        assert!(ratio(&scan[0], n) < 0.05, "n={n}");
    }
    assert!(ratio(&scan[0], 0) < 0.065);
    for n in [0, 2, -2] {
        assert!(ratio(&scan[1], n) < 0.05, "n={n}");
    }
    let he11 = ModeLabel::new(ModeFamily::HE, 1, 1);
    let rem = scan[0].rem(1).unwrap();
    assert!((rem.coupling.guided(he11) - rem.coupling.nu).norm() < 0.1 * rem.coupling.nu.norm());
}

#[test]
fn te01_dominates_at_eighteen_tenths() {
    let r = ring(Orientation::Orthoradial);
    let scan = scan_separation(r, &green(k_at(1.8, &r), false), &[10.0]).unwrap();
    let row = &scan[0];
    let nu0 = row.rem(0).unwrap();
    let te01 = ModeLabel::new(ModeFamily::TE, 0, 1);
    assert!(nu0.coupling.guided(te01).norm() > 0.9 * nu0.coupling.nu.norm());
    for n in [1, -1, 2, -2] {
        let nu = row.rem(n).unwrap().coupling.nu.norm();
        assert!(nu > 1e-3 && nu < nu0.coupling.nu.norm(), "n={n}: {nu}");
    }
}

#[test]
fn only_the_hybrid_rem_keeps_oscillating() {
    let r = ring(Orientation::Orthoradial);
    let grid: Vec<f64> = (0..=300).map(|i| 50.0 + 0.05 * i as f64).collect();
    let scan = scan_separation(r, &green(k_at(3.4, &r), false), &grid).unwrap();
    let amp = |n: i32| scan.iter().map(|row| row.rem(n).unwrap().coupling.nu.im.abs()).fold(0.0, f64::max);
    assert!(amp(1) > 0.4);
    for n in [0, 2] {
        assert!(amp(n) < 0.01 * amp(1), "n={n}: {}", amp(n));
    }
}

#[test]
fn separation_csv_shape() {
    let r = ring(Orientation::Longitudinal);
    let grid: Vec<f64> = (1..=4).map(|i| i as f64).collect();
    let scan = scan_separation(r, &green(k_at(1.3, &r), false), &grid).unwrap();
    let csv = nanoring::tworing::scan_csv(&scan);
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(
        &header[..7],
        &["dz_over_a", "gamma_plus_free_n-2", "gamma_minus_free_n-2", "gamma_plus_fiber_n-2", "gamma_minus_fiber_n-2", "re_nu_n-2", "im_nu_n-2"]
    );
    assert!(header.contains(&"nu_guided_HE21_n2") && header.contains(&"nu_rad_-3_n0") && header.contains(&"im_nu_n2"));
    assert_eq!(lines.clone().count(), 4);
    assert!(lines.all(|l| l.split(',').count() == header.len()));
}
