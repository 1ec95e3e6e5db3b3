//! Reference implementations used only by the tests. None of these share
//! code with the library paths they check.

#![allow(dead_code)]

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `J_n(x)` from the power series `Σ (−1)^m (x/2)^{2m+n} / (m! (m+n)!)`.
/// Accurate to ~1e-13 for `x ≤ 10`, `n ≤ 30`.
pub fn bessel_j_series(n: u32, x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = half.powi(n as i32) / (1..=n).map(f64::from).product::<f64>();
    let mut sum = term;
    for m in 1..200u32 {
        term *= -half * half / (f64::from(m) * f64::from(m + n));
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// `J_n(x)` by Miller's downward recurrence normalized with
/// `J_0 + 2 Σ J_{2k} = 1`.
pub fn bessel_j_recurrence(n: u32, x: f64) -> f64 {
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let start = (2 * ((n.max(x as u32) + 40) / 2)) as usize;
    let mut values = vec![0.0; start + 2];
    values[start + 1] = 0.0;
    values[start] = 1e-30;
    for k in (1..=start).rev() {
        values[k - 1] = 2.0 * k as f64 / x * values[k] - values[k + 1];
    }
    let norm = values[0] + 2.0 * values.iter().step_by(2).skip(1).sum::<f64>();
    values[n as usize] / norm
}

/// Closed-form eigenbasis of the uniform path graph:
/// `λ_j = 2γ cos(jπ/(n+1))`, `v_j(k) = √(2/(n+1)) sin(jkπ/(n+1))`.
pub fn uniform_propagator_analytic(n: usize, gamma: f64, z: f64) -> Vec<Vec<Complex64>> {
    let m = (n + 1) as f64;
    let mut u = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for j in 1..=n {
        let lambda = 2.0 * gamma * (j as f64 * std::f64::consts::PI / m).cos();
        let phase = Complex64::from_polar(1.0, z * lambda);
        let v: Vec<f64> = (1..=n)
            .map(|k| (2.0 / m).sqrt() * ((j * k) as f64 * std::f64::consts::PI / m).sin())
            .collect();
        for k in 0..n {
            for l in 0..n {
                u[k][l] += phase * v[k] * v[l];
            }
        }
    }
    u
}

/// Haar-ish random unitary from Gram–Schmidt on a complex Gaussian matrix.
pub fn random_unitary(n: usize, seed: u64) -> nalgebra::DMatrix<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols: Vec<Vec<Complex64>> = Vec::new();
    while cols.len() < n {
        let mut v: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        for c in &cols {
            let dot: Complex64 = c.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            v.iter_mut().zip(c).for_each(|(x, y)| *x -= dot * y);
        }
        let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-6 {
            v.iter_mut().for_each(|x| *x /= norm);
            cols.push(v);
        }
    }
    nalgebra::DMatrix::from_fn(n, n, |r, c| cols[c][r])
}

/// Brute-force two-photon statistics in the Fock basis. Expands
/// `Σ_{q,r} U_qk U_rl a†_q a†_r |0⟩` into coefficients of normally ordered
/// monomials, then converts each monomial to a normalized occupation state
/// (`a†_q² |0⟩ = √2 |2_q⟩`). A doubly occupied input carries `1/√2`.
pub fn two_photon_brute_force(u: &nalgebra::DMatrix<Complex64>, k: usize, l: usize) -> Vec<Vec<f64>> {
    let n = u.nrows();
    let mut coeff = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for q in 0..n {
        for r in 0..n {
            let (a, b) = if q <= r { (q, r) } else { (r, q) };
            coeff[a][b] += u[(q, k)] * u[(r, l)];
        }
    }
    let input_norm = if k == l { 0.5f64.sqrt() } else { 1.0 };
    let mut p = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in a..n {
            let state_norm = if a == b { 2.0f64.sqrt() } else { 1.0 };
            let amp = coeff[a][b] * state_norm * input_norm;
            p[a][b] = amp.norm_sqr();
            p[b][a] = p[a][b];
        }
    }
    p
}
