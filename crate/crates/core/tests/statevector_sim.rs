mod common;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qkdisc::genome::{random_genome, SearchSpace};
use qkdisc::pauli::PauliString;
use qkdisc::statevector::{apply_pauli_rotation, encode, reduced_density, StateVector};

fn random_state(n: usize, seed: u64) -> StateVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut amps: Vec<Complex64> = (0..1usize << n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for a in amps.iter_mut() {
        *a /= norm;
    }
    StateVector::from_amplitudes(n, amps).unwrap()
}

/// `exp(−iθ/2 P)` by Taylor series on the dense matrix.
fn dense_exp(p: &[Complex64], dim: usize, theta: f64) -> Vec<Complex64> {
    let a: Vec<Complex64> = p.iter().map(|v| v * Complex64::new(0.0, -theta / 2.0)).collect();
    let mut out = vec![Complex64::new(0.0, 0.0); dim * dim];
    let mut term = out.clone();
    for i in 0..dim {
        out[i * dim + i] = Complex64::new(1.0, 0.0);
        term[i * dim + i] = Complex64::new(1.0, 0.0);
    }
    for k in 1..60 {
        let mut next = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            for l in 0..dim {
                let t = term[i * dim + l];
                for j in 0..dim {
                    next[i * dim + j] += t * a[l * dim + j];
                }
            }
        }
        for v in next.iter_mut() {
            *v /= k as f64;
        }
        for (o, v) in out.iter_mut().zip(&next) {
            *o += v;
        }
        term = next;
    }
    out
}

fn gate() -> impl Strategy<Value = (usize, u8, u8, usize, usize, f64, u64)> {
    (2usize..=5).prop_flat_map(|n| {
        (Just(n), 0u8..4, 0u8..4, 0..n, 0..n - 1, -7.0f64..7.0, any::<u64>()).prop_map(
            |(n, a, b, p, qs, theta, seed)| {
                let q = if qs < p { qs } else { qs + 1 };
                (n, a, b, p, q, theta, seed)
            },
        )
    })
}

proptest! {
    #[test]
    fn rotations_preserve_norm((n, a, b, p, q, theta, seed) in gate()) {
        let s = random_state(n, seed);
        let out = apply_pauli_rotation(&s, a, b, p, q, theta).unwrap();
        prop_assert!((out.norm_sqr() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn opposite_angle_undoes_rotation((n, a, b, p, q, theta, seed) in gate()) {
        let s = random_state(n, seed);
        let back = apply_pauli_rotation(&apply_pauli_rotation(&s, a, b, p, q, theta).unwrap(), a, b, p, q, -theta).unwrap();
        for (x, y) in back.amplitudes().iter().zip(s.amplitudes()) {
            prop_assert!((x - y).norm() <= 1e-12);
        }
    }

    #[test]
    fn rotation_matches_dense_exponential((n, a, b, p, q, theta, seed) in gate()) {
        let n = n.min(3);
        let (p, q) = (p % n, q % n);
        prop_assume!(p != q);
        let s = random_state(n, seed);
        let word = PauliString::two_site(n, a, p, b, q).unwrap();
        let dim = 1usize << n;
        let u = dense_exp(&common::pauli_matrix(&word), dim, theta);
        let fast = apply_pauli_rotation(&s, a, b, p, q, theta).unwrap();
        for i in 0..dim {
            let expected: Complex64 = (0..dim).map(|j| u[i * dim + j] * s.amplitudes()[j]).sum();
            prop_assert!((expected - fast.amplitudes()[i]).norm() <= 1e-10);
        }
    }

    #[test]
    fn reduced_density_invariants(n in 2usize..=5, mask_seed in any::<u64>(), seed in any::<u64>()) {
        let s = random_state(n, seed);
        let full = (1u64 << n) - 1;
        let mask = (mask_seed % full) + 1;
        let rho = reduced_density(&s, mask).unwrap();
        prop_assert!(rho.check_invariants(1e-10).is_ok());
        prop_assert!((rho.trace().re - 1.0).abs() <= 1e-12);
        prop_assert!(rho.trace().im.abs() <= 1e-12);
        prop_assert!(rho.purity() <= 1.0 + 1e-12);
        prop_assert_eq!(rho.dim(), 1usize << mask.count_ones());
    }

    #[test]
    fn encoded_states_are_normalized(n in 2usize..=5, m in 1usize..=8, seed in any::<u64>()) {
        let space = SearchSpace::new(n, m, 3, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_genome(&space, &mut rng).unwrap();
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let s = encode(&g, &x).unwrap();
        prop_assert!((s.norm_sqr() - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn qubit_zero_is_least_significant_bit() {
    // X on qubit 0 with θ = π maps |00⟩ to −i|01⟩, i.e. amplitude index 1
    let s = StateVector::zero(2).unwrap();
    let out = apply_pauli_rotation(&s, 1, 0, 0, 1, std::f64::consts::PI).unwrap();
    assert!((out.amplitudes()[1] - Complex64::new(0.0, -1.0)).norm() < 1e-12);
    assert!(out.amplitudes()[2].norm() < 1e-12);
}

#[test]
fn rejects_equal_qubits_and_unnormalized_input() {
    let s = StateVector::zero(2).unwrap();
    assert!(apply_pauli_rotation(&s, 1, 1, 0, 0, 0.3).is_err());
    let loose = StateVector::from_amplitudes(2, vec![Complex64::new(1.0, 0.0); 4]).unwrap();
    assert!(apply_pauli_rotation(&loose, 1, 1, 0, 1, 0.3).is_err());
}
