use std::f64::consts::PI;
use std::sync::Arc;

use nanoring::fiber_modes::*;
use proptest::prelude::*;

/// Nearest-neighbour spacing of the default 5-atom ring at ρ = 1.1a.
fn d() -> f64 {
    2.0 * 1.1 * (PI / 5.0).sin()
}

fn k_at(lambda0_over_d: f64) -> f64 {
    2.0 * PI / (lambda0_over_d * d())
}

fn fiber() -> FiberSpec {
    FiberSpec::default()
}

fn label_set(k0: f64) -> Vec<String> {
    labels(&list_guided_modes(fiber(), k0, DEFAULT_L_MAX))
        .iter()
        .map(|l| l.to_string())
        .collect()
}

/// Cutoff V-numbers for n = 1.45: first zero of J0 (TE/TM), first zero of J1
/// (EH11), and roots of (n²+1) J_{l−1}(V) = V J_l(V)/(l−1) for HE21, HE31,
/// computed independently in double precision with scipy.
const CUTOFFS: [(ModeFamily, u32, f64); 5] = [
    (ModeFamily::TE, 0, 2.404825557695773),
    (ModeFamily::TM, 0, 2.404825557695773),
    (ModeFamily::HE, 2, 2.760804855996071),
    (ModeFamily::EH, 1, 3.831705970207512),
    (ModeFamily::HE, 3, 4.246203482801607),
];

#[test]
fn ring_spacing() {
    assert!((d() - 1.293127555043441).abs() < 1e-12);
}

#[test]
fn fundamental_mode_at_long_wavelength() {
    let k0 = k_at(3.4);
    assert!((k0 - 1.429).abs() < 1e-3);
    assert_eq!(label_set(k0), ["HE11"]);
    let he = solve_dispersion(fiber(), k0, ModeFamily::HE, 1, 1).unwrap();
    assert!((he.beta / k0 - 1.05).abs() <= 0.01, "{}", he.beta / k0);
    assert!(solve_dispersion(fiber(), k0, ModeFamily::HE, 1, 2).is_none());
}

#[test]
fn four_modes_at_short_wavelength() {
    let k0 = k_at(1.8);
    let mut got = label_set(k0);
    got.sort();
    assert_eq!(got, ["HE11", "HE21", "TE01", "TM01"]);
    let b = |fam, l| solve_dispersion(fiber(), k0, fam, l, 1).unwrap().beta / k0;
    assert!((b(ModeFamily::TE, 0) - 1.05).abs() <= 0.05);
    assert!((b(ModeFamily::HE, 1) - 1.3).abs() <= 0.05);
    assert!((b(ModeFamily::HE, 2) - 1.0).abs() <= 0.05);
}

#[test]
fn tm01_terminates_near_2_1() {
    let mut last = None;
    let mut x = 1.5;
    while x < 3.0 {
        if solve_dispersion(fiber(), k_at(x), ModeFamily::TM, 0, 1).is_some() {
            last = Some(x);
        }
        x += 0.005;
    }
    let last = last.unwrap();
    assert!((last - 2.1).abs() <= 0.05, "{last}");
}

#[test]
fn he31_appears_at_standard_cutoff() {
    let has = |x: f64| label_set(k_at(x)).iter().any(|s| s == "HE31");
    assert!(!has(1.21));
    assert!(has(1.19));
}

#[test]
fn list_counts_orientations() {
    let modes = list_guided_modes(fiber(), k_at(1.8), DEFAULT_L_MAX);
    // HE11, HE21: 2 rotations × 2 directions; TE01, TM01: 2 directions
    assert_eq!(modes.len(), 4 + 4 + 2 + 2);
}

#[test]
fn te_and_tm_field_structure() {
    let k0 = k_at(1.8);
    let te = solve_dispersion(fiber(), k0, ModeFamily::TE, 0, 1).unwrap();
    let tm = solve_dispersion(fiber(), k0, ModeFamily::TM, 0, 1).unwrap();
    for i in 1..200 {
        let r = 0.02 * i as f64;
        let th = 0.37 * i as f64;
        let e = te.profile(r, th);
        assert_eq!(e[0].norm(), 0.0);
        assert_eq!(e[2].norm(), 0.0);
        assert!(e[1].norm() > 0.0);
        let e = tm.profile(r, th);
        assert_eq!(e[1].norm(), 0.0);
    }
}

#[test]
fn magnitudes_independent_of_angle() {
    for m in list_guided_modes(fiber(), k_at(1.3), DEFAULT_L_MAX) {
        for r in [0.3, 0.99, 1.1, 2.5] {
            let e0 = m.profile(r, 0.0);
            for th in [0.4, 1.9, 4.0] {
                let e = m.profile(r, th);
                for c in 0..3 {
                    assert!((e[c].norm() - e0[c].norm()).abs() < 1e-14 * (1.0 + e0[c].norm()));
                }
                let want = num_complex::Complex64::from_polar(1.0, m.id.nu() as f64 * th);
                assert!((e[2] - e0[2] * want).norm() < 1e-13);
            }
        }
    }
}

/// Composite Simpson on a uniform grid out to r = 1 + 60/q, an independent
/// rule from the graded Gauss–Legendre panels; the core interval stops just
/// short of r = a where e_r jumps.
#[test]
fn normalization_by_independent_quadrature() {
    for x in [3.4, 1.8, 1.3] {
        for m in list_guided_modes(fiber(), k_at(x), DEFAULT_L_MAX) {
            let dens = |r: f64| -> f64 {
                let e = m.radial_e(r);
                fiber().eps_at(r) * e.iter().map(|c| c.norm_sqr()).sum::<f64>() * r
            };
            let simpson = |a: f64, b: f64, n: usize| {
                let h = (b - a) / n as f64;
                let mut s = dens(a) + dens(b);
                for i in 1..n {
                    s += dens(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
                }
                s * h / 3.0
            };
            let outer = 1.0 + 60.0 / m.q();
            let total = 2.0 * PI * (simpson(1e-12, 1.0 - 1e-14, 4000) + simpson(1.0, outer, 200_000));
            assert!((total - 1.0).abs() < 1e-8, "{:?} {total}", m.id);
        }
    }
}

#[test]
fn group_velocity_against_wider_step() {
    let k0 = k_at(1.8);
    for (fam, l) in [(ModeFamily::HE, 1), (ModeFamily::TE, 0), (ModeFamily::TM, 0)] {
        let m = solve_dispersion(fiber(), k0, fam, l, 1).unwrap();
        let h = 1e-4 * k0;
        let bp = solve_dispersion(fiber(), k0 + h, fam, l, 1).unwrap().beta;
        let bm = solve_dispersion(fiber(), k0 - h, fam, l, 1).unwrap().beta;
        let wide = (bp - bm) / (2.0 * h);
        assert!((m.dbeta_domega - wide).abs() < 1e-6 * wide, "{fam}: {} {wide}", m.dbeta_domega);
        // guided modes are slower than light in vacuum
        assert!(m.dbeta_domega > 1.0);
    }
}

#[test]
fn dispersion_table_bounds() {
    let solver = ModeSolver::new(fiber(), None);
    let grid: Vec<f64> = (0..60).map(|i| 1.0 + 0.05 * i as f64).collect();
    let rows = dispersion_table(&solver, d(), &grid, DEFAULT_L_MAX);
    for r in &rows {
        assert!(r.beta_over_k0 > 1.0 && r.beta_over_k0 < 1.45);
    }
    for x in &grid {
        assert!(rows.iter().any(|r| r.lambda0_over_d == *x && r.mode == "HE11"));
    }
    let tm: Vec<f64> = rows.iter().filter(|r| r.mode == "TM01").map(|r| r.lambda0_over_d).collect();
    let tm_max = tm.iter().cloned().fold(0.0, f64::max);
    assert!((tm_max - 2.1).abs() <= 0.05);
}

#[test]
fn cache_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dispersion.json");
    let plain = ModeSolver::new(fiber(), None);
    let first = Arc::new(DispersionCache::open(&path).unwrap());
    let cached = ModeSolver::new(fiber(), Some(first.clone()));
    let grid = [1.3, 1.8, 2.5, 3.4];
    let reference = dispersion_table(&plain, d(), &grid, DEFAULT_L_MAX);
    assert_eq!(dispersion_table(&cached, d(), &grid, DEFAULT_L_MAX), reference);
    first.save().unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains("\"n=1.45,k0a="));
    assert!(text.contains("beta_over_k0"));
    let reopened = Arc::new(DispersionCache::open(&path).unwrap());
    assert_eq!(reopened.len(), first.len());
    let warm = ModeSolver::new(fiber(), Some(reopened));
    assert_eq!(dispersion_table(&warm, d(), &grid, DEFAULT_L_MAX), reference);
    let k0 = k_at(1.8);
    let a = warm.solve(k0, ModeFamily::HE, 1, 1).unwrap();
    let b = plain.solve(k0, ModeFamily::HE, 1, 1).unwrap();
    assert_eq!(a.beta.to_bits(), b.beta.to_bits());
    assert_eq!(a.dbeta_domega.to_bits(), b.dbeta_domega.to_bits());
}

#[test]
fn corrupt_cache_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{not json").unwrap();
    assert!(DispersionCache::open(&path).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn presence_matches_cutoff_oracle(x in 1.0f64..3.6) {
        let k0 = k_at(x);
        let v = fiber().v_number(k0);
        for (fam, l, vc) in CUTOFFS {
            // skip a thin band around each cutoff where f64 cannot decide
            if (v - vc).abs() < 1e-6 { continue; }
            let present = solve_dispersion(fiber(), k0, fam, l, 1).is_some();
            prop_assert_eq!(present, v > vc, "{}{} at V={}", fam, l, v);
        }
        prop_assert!(solve_dispersion(fiber(), k0, ModeFamily::HE, 1, 1).is_some());
    }

    #[test]
    fn root_count_and_beta_grow_with_frequency(k0 in 0.9f64..5.0, dk in 1e-3f64..0.3) {
        let f = fiber();
        let lo = list_guided_modes(f, k0, DEFAULT_L_MAX);
        let hi = list_guided_modes(f, k0 + dk, DEFAULT_L_MAX);
        prop_assert!(hi.len() >= lo.len());
        for m in &lo {
            let b = m.beta / k0;
            prop_assert!(b > 1.0 && b < f.n_fiber);
            let l = m.id.label;
            if let Some(up) = solve_dispersion(f, k0 + dk, l.family, l.l, l.m) {
                prop_assert!(up.beta > m.beta);
            }
        }
    }

    #[test]
    fn normalized_and_continuous(k0 in 0.9f64..5.0) {
        for m in list_guided_modes(fiber(), k0, DEFAULT_L_MAX) {
            prop_assert!((norm_integral(&m) - 1.0).abs() < 1e-8);
            let inside = m.radial_e(1.0 - 1e-12);
            let outside = m.radial_e(1.0);
            prop_assert!((inside[1] - outside[1]).norm() < 1e-8);
            prop_assert!((inside[2] - outside[2]).norm() < 1e-8);
            let l = m.id.label;
            let res = |b: f64| characteristic_residual(fiber(), k0, l.family, l.l, b).unwrap();
            let r = res(m.beta);
            let up = f64::from_bits(m.beta.to_bits() + 1);
            let down = f64::from_bits(m.beta.to_bits() - 1);
            let ulp_spread = (res(up) - res(down)).abs();
            prop_assert!(r.abs() < 1e-10f64.max(ulp_spread), "{} {} {}", l, r, ulp_spread);
        }
    }
}
