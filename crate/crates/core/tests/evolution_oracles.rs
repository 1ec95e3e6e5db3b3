mod common;

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use num_complex::Complex64;
use proptest::prelude::*;
use qwalk::evolution::{
    evolution_map, evolution_map_fixed, evolution_map_over_distance, intensity_frame, propagator,
    two_photon_correlation, Spectrum, UnitaryPropagator,
};
use qwalk::lattice::{z_for_xi, CouplingMatrix};

use common::*;

#[test]
fn bessel_oracles_agree() {
    for &x in &[0.0, 0.3, 1.0, 2.0, 4.0, 8.0] {
        for n in 0..=25 {
            let a = bessel_j_series(n, x);
            let b = bessel_j_recurrence(n, x);
            assert!((a - b).abs() < 1e-12, "J_{n}({x}): {a} vs {b}");
        }
    }
    assert!((bessel_j_series(0, 1.0) - 0.765_197_686_557_966_6).abs() < 1e-15);
    assert!((bessel_j_series(1, 2.0) - 0.576_724_807_756_873_4).abs() < 1e-15);
}

#[test]
fn central_injection_matches_infinite_lattice() {
    let n = 101;
    let center = 50;
    let gamma = 0.25;
    let coupling = CouplingMatrix::uniform(n, gamma).unwrap();
    let spectrum = Spectrum::new(&coupling).unwrap();
    for &gz in &[0.5, 1.0, 2.0, 3.0, 4.0] {
        let frame = spectrum.frame(gz / gamma, center).unwrap();
        for k in -20i64..=20 {
            let want = bessel_j_series(k.unsigned_abs() as u32, 2.0 * gz).powi(2);
            let got = frame.intensities[(center as i64 + k) as usize];
            assert!((got - want).abs() < 1e-6, "gz={gz} k={k}: {got} vs {want}");
        }
    }
}

#[test]
fn propagator_matches_closed_form_eigenbasis() {
    for &(n, gamma, z) in &[(2, 0.5, 1.3), (7, 0.2, 5.0), (51, 0.085, 7.0), (30, 1.0, 2.2)] {
        let u = propagator(&CouplingMatrix::uniform(n, gamma).unwrap(), z).unwrap();
        let want = uniform_propagator_analytic(n, gamma, z);
        for k in 0..n {
            for l in 0..n {
                assert!((u.get(k, l) - want[k][l]).norm() < 1e-12, "n={n} ({k},{l})");
            }
        }
    }
}

#[test]
fn semigroup_property() {
    let coupling = CouplingMatrix::uniform(51, 0.085).unwrap();
    let spectrum = Spectrum::new(&coupling).unwrap();
    for &(z1, z2) in &[(1.0, 2.0), (3.5, 3.5), (0.0, 7.0), (10.0, 27.0)] {
        let a = spectrum.propagator(z1).unwrap();
        let b = spectrum.propagator(z2).unwrap();
        let ab = a.then(&b).unwrap();
        let direct = spectrum.propagator(z1 + z2).unwrap();
        let diff = (ab.as_matrix() - direct.as_matrix()).iter().map(|c| c.norm()).fold(0.0, f64::max);
        assert!(diff < 1e-9, "{diff}");
    }
}

#[test]
fn unitarity_across_graphs() {
    let graphs = [
        CouplingMatrix::uniform(51, 0.085).unwrap(),
        CouplingMatrix::nearest_neighbour(&[0.3, 0.1, 0.7, 0.2, 0.2, 0.9]).unwrap(),
        CouplingMatrix::uniform(4, 0.0).unwrap(),
    ];
    for c in &graphs {
        for &z in &[0.0, 0.5, 7.0, 100.0] {
            assert!(propagator(c, z).unwrap().unitarity_error() < 1e-10);
        }
    }
}

#[test]
fn mirror_symmetry_of_central_injection() {
    let n = 51;
    let coupling = CouplingMatrix::uniform(n, 0.085).unwrap();
    let spectrum = Spectrum::new(&coupling).unwrap();
    for &z in &[1.0, 7.0, 30.0] {
        let frame = spectrum.frame(z, 25).unwrap();
        for k in 0..n {
            assert!((frame.intensities[k] - frame.intensities[n - 1 - k]).abs() < 1e-10);
        }
    }
}

#[test]
fn maps_agree_for_any_realization() {
    let n = 51;
    let xi_max = 2.0 * 0.02 * 200.0 / std::f64::consts::PI;
    let grid: Vec<f64> = (0..=60).map(|i| xi_max * i as f64 / 60.0).collect();
    let by_distance = |gamma: f64| {
        move |xi: f64| Ok((CouplingMatrix::uniform(n, gamma)?, z_for_xi(gamma, xi)?))
    };
    let a = evolution_map(by_distance(0.02), &grid, 25).unwrap();
    let b = evolution_map(by_distance(0.01), &grid, 25).unwrap();
    // Fixed length, coupling tuned to reach each ξ.
    let c = evolution_map(
        |xi: f64| {
            let z = 7.0;
            let gamma = xi * FRAC_PI_2 / z;
            Ok((CouplingMatrix::uniform(n, gamma)?, z))
        },
        &grid,
        25,
    )
    .unwrap();
    let d = evolution_map_fixed(&CouplingMatrix::uniform(n, 0.02).unwrap(), &grid, 25).unwrap();
    for other in [&b, &c, &d] {
        for r in 0..grid.len() {
            for k in 0..n {
                assert!((a.get(r, k) - other.get(r, k)).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn halving_coupling_halves_the_range() {
    let n = 51;
    let z_grid: Vec<f64> = (0..=100).map(|i| 2.0 * i as f64).collect();
    let full = evolution_map_over_distance(n, 0.02, &z_grid, 25).unwrap();
    let half = evolution_map_over_distance(n, 0.01, &z_grid, 25).unwrap();
    let full_range = full.xi_grid().last().unwrap();
    let half_range = half.xi_grid().last().unwrap();
    assert!((half_range - full_range / 2.0).abs() < 1e-14);
    // Row at z under γ/2 equals row at z/2 under γ.
    for i in (0..=100).step_by(2) {
        for k in 0..n {
            assert!((half.get(i, k) - full.get(i / 2, k)).abs() < 1e-10);
        }
    }
}

#[test]
fn two_photon_matches_fock_expansion() {
    for seed in 0..10 {
        let u = random_unitary(7, seed);
        let wrapped = UnitaryPropagator::from_matrix(u.clone(), 0.0).unwrap();
        for &(k, l) in &[(0, 1), (2, 5), (3, 3), (6, 0)] {
            let g = two_photon_correlation(&wrapped, k, l).unwrap();
            let want = two_photon_brute_force(&u, k, l);
            let mut total = 0.0;
            for q in 0..7 {
                for r in 0..7 {
                    assert!((g.get(q, r) - want[q][r]).abs() < 1e-12);
                    assert_eq!(g.get(q, r), g.get(r, q));
                    if q <= r {
                        total += want[q][r];
                    }
                }
            }
            assert!((total - 1.0).abs() < 1e-12);
            assert!((g.total() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn balanced_coupler_is_the_hadamard_like_splitter() {
    let u = propagator(&CouplingMatrix::uniform(2, 1.0).unwrap(), FRAC_PI_4).unwrap();
    let s = 0.5f64.sqrt();
    let want = [[Complex64::new(s, 0.0), Complex64::new(0.0, s)], [Complex64::new(0.0, s), Complex64::new(s, 0.0)]];
    for k in 0..2 {
        for l in 0..2 {
            assert!((u.get(k, l) - want[k][l]).norm() < 1e-15);
        }
    }
}

proptest! {
    #[test]
    fn coupling_distance_factorization(gamma in 0.01f64..1.0, z in 0.0f64..20.0, a in prop::sample::select(vec![0.5, 2.0, 10.0])) {
        let n = 21;
        let u1 = propagator(&CouplingMatrix::uniform(n, gamma).unwrap(), z).unwrap();
        let u2 = propagator(&CouplingMatrix::uniform(n, a * gamma).unwrap(), z / a).unwrap();
        let f1 = intensity_frame(&u1, 10).unwrap();
        let f2 = intensity_frame(&u2, 10).unwrap();
        for k in 0..n {
            prop_assert!((f1.intensities[k] - f2.intensities[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn frames_are_normalized(rates in prop::collection::vec(0.0f64..1.0, 1..15), z in 0.0f64..30.0, seed in 0usize..100) {
        let c = CouplingMatrix::nearest_neighbour(&rates).unwrap();
        let u = propagator(&c, z).unwrap();
        prop_assert!(u.unitarity_error() < 1e-10);
        let frame = intensity_frame(&u, seed % c.n()).unwrap();
        prop_assert!((frame.intensities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
