//! Dense, noiseless statevector simulation of Pauli-rotation feature maps.
//!
//! Qubit 0 is the least-significant bit of the amplitude index.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::genome::KernelGenome;
use crate::pauli::pauli_bits;

/// Largest register the dense simulator accepts.
pub const MAX_SIM_QUBITS: usize = 24;

const NORM_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// `|0^n⟩`.
    pub fn zero(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_SIM_QUBITS {
            return Err(Error::InvalidArgument(format!(
                "simulator supports 1..={MAX_SIM_QUBITS} qubits, got {n}"
            )));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Self { n, amps })
    }

    pub fn from_amplitudes(n: usize, amps: Vec<Complex64>) -> Result<Self> {
        if n == 0 || n > MAX_SIM_QUBITS {
            return Err(Error::InvalidArgument(format!("unsupported qubit count {n}")));
        }
        if amps.len() != 1 << n {
            return Err(Error::dim(1 << n, amps.len()));
        }
        Ok(Self { n, amps })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.n != other.n {
            return Err(Error::dim(self.n, other.n));
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    fn rotate_in_place(&mut self, alpha: u8, beta: u8, p: usize, q: usize, theta: f64) {
        let (xa, za) = pauli_bits(alpha);
        let (xb, zb) = pauli_bits(beta);
        let flip = ((xa as usize) << p) | ((xb as usize) << q);
        let zmask = ((za as usize) << p) | ((zb as usize) << q);
        // each Y contributes a factor i on top of its Z sign
        let y_count = (xa && za) as u32 + (xb && zb) as u32;
        let i_pow = match y_count {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            _ => Complex64::new(-1.0, 0.0),
        };
        let c = (theta / 2.0).cos();
        let s = (theta / 2.0).sin();
        let minus_i_s = Complex64::new(0.0, -s);

        if flip == 0 {
            // diagonal generator: P|i⟩ = sign(i) |i⟩ (times i^y, which is 1 here)
            for (i, a) in self.amps.iter_mut().enumerate() {
                let sign = if (i & zmask).count_ones() & 1 == 1 { -1.0 } else { 1.0 };
                *a *= Complex64::new(c, 0.0) + minus_i_s * (i_pow * sign);
            }
            return;
        }

        // pair up |i⟩ and |i ^ flip⟩, visiting each pair once from its lower index
        let pivot = flip & flip.wrapping_neg();
        for i in 0..self.amps.len() {
            if i & pivot != 0 {
                continue;
            }
            let j = i ^ flip;
            let phase_i = phase_of(i, zmask, i_pow);
            let phase_j = phase_of(j, zmask, i_pow);
            let ai = self.amps[i];
            let aj = self.amps[j];
            // (P ψ)[j] = phase(i) ψ[i], (P ψ)[i] = phase(j) ψ[j]
            self.amps[i] = ai * c + minus_i_s * phase_j * aj;
            self.amps[j] = aj * c + minus_i_s * phase_i * ai;
        }
    }
}

#[inline]
fn phase_of(index: usize, zmask: usize, i_pow: Complex64) -> Complex64 {
    if (index & zmask).count_ones() & 1 == 1 {
        -i_pow
    } else {
        i_pow
    }
}

/// `exp(−i θ/2 σ_alpha^(p) σ_beta^(q)) |ψ⟩ = (cos(θ/2) I − i sin(θ/2) P) |ψ⟩`.
pub fn apply_pauli_rotation(
    state: &StateVector,
    alpha: u8,
    beta: u8,
    p: usize,
    q: usize,
    theta: f64,
) -> Result<StateVector> {
    if p == q {
        return Err(Error::InvalidArgument("rotation needs two distinct qubits".into()));
    }
    if p >= state.n || q >= state.n {
        return Err(Error::OutOfRange {
            index: p.max(q),
            limit: state.n,
        });
    }
    if alpha > 3 || beta > 3 {
        return Err(Error::InvalidArgument("Pauli index must be in 0..=3".into()));
    }
    let norm = state.norm_sqr();
    if (norm - 1.0).abs() > NORM_TOL {
        return Err(Error::Numerical(format!("input state not normalized (|ψ|² = {norm})")));
    }
    let mut out = state.clone();
    out.rotate_in_place(alpha, beta, p, q, theta);
    Ok(out)
}

/// `U(x)|0^n⟩` with `θ_g = bandwidths[j_g] · x[k_g]`, gates applied in order.
pub fn encode(genome: &KernelGenome, x: &[f64]) -> Result<StateVector> {
    if x.len() != genome.d {
        return Err(Error::dim(genome.d, x.len()));
    }
    genome.ensure_valid()?;
    let mut state = StateVector::zero(genome.n)?;
    for g in &genome.gates {
        let theta = genome.bandwidths[g.bandwidth] * x[g.feature];
        state.rotate_in_place(g.alpha, g.beta, g.p, g.second_qubit(), theta);
    }
    Ok(state)
}

/// Reduced density matrix on a qubit subset. Row/column index bit `k`
/// corresponds to the `k`-th lowest measured qubit.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    qubits: Vec<usize>,
    dim: usize,
    entries: Vec<Complex64>,
}

impl DensityMatrix {
    pub fn qubits(&self) -> &[usize] {
        &self.qubits
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim + col]
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// `tr[self · other]`, real for Hermitian arguments.
    pub fn trace_product(&self, other: &DensityMatrix) -> Result<f64> {
        if self.dim != other.dim {
            return Err(Error::dim(self.dim, other.dim));
        }
        let d = self.dim;
        let mut acc = 0.0;
        for a in 0..d {
            for b in 0..d {
                acc += (self.entries[a * d + b] * other.entries[b * d + a]).re;
            }
        }
        Ok(acc)
    }

    pub fn purity(&self) -> f64 {
        self.trace_product(self).unwrap_or(f64::NAN)
    }

    /// Checks Hermiticity, unit trace, and positivity.
    pub fn check_invariants(&self, tol: f64) -> Result<()> {
        let d = self.dim;
        for a in 0..d {
            for b in 0..d {
                if (self.get(a, b) - self.get(b, a).conj()).norm() > tol {
                    return Err(Error::Numerical(format!("density matrix not Hermitian at ({a},{b})")));
                }
            }
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
            return Err(Error::Numerical(format!("density matrix trace {tr}")));
        }
        // Hermitian 2d×2d real embedding [[Re, −Im], [Im, Re]] has the same spectrum (doubled)
        let big = nalgebra::DMatrix::from_fn(2 * d, 2 * d, |r, c| {
            let e = self.get(r % d, c % d);
            match (r < d, c < d) {
                (true, true) | (false, false) => e.re,
                (true, false) => -e.im,
                (false, true) => e.im,
            }
        });
        let min = nalgebra::SymmetricEigen::new(big)
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min < -1e-10 {
            return Err(Error::Numerical(format!("density matrix eigenvalue {min}")));
        }
        Ok(())
    }
}

/// Partial trace over the qubits not in `mask`.
pub fn reduced_density(state: &StateVector, mask: u64) -> Result<DensityMatrix> {
    let n = state.n;
    if mask == 0 {
        return Err(Error::InvalidArgument("empty measurement mask".into()));
    }
    if n < 64 && mask >> n != 0 {
        return Err(Error::InvalidArgument(format!("mask {mask:#b} exceeds {n} qubits")));
    }
    let qubits: Vec<usize> = (0..n).filter(|q| (mask >> q) & 1 == 1).collect();
    let env: Vec<usize> = (0..n).filter(|q| (mask >> q) & 1 == 0).collect();
    let dim = 1usize << qubits.len();
    let env_dim = 1usize << env.len();

    // amplitudes regrouped as M[env][sub]
    let mut grouped = vec![Complex64::new(0.0, 0.0); dim * env_dim];
    for (i, &a) in state.amps.iter().enumerate() {
        let sub = gather_bits(i, &qubits);
        let e = gather_bits(i, &env);
        grouped[e * dim + sub] = a;
    }
    let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
    for e in 0..env_dim {
        let row = &grouped[e * dim..(e + 1) * dim];
        for a in 0..dim {
            if row[a] == Complex64::new(0.0, 0.0) {
                continue;
            }
            for b in 0..dim {
                entries[a * dim + b] += row[a] * row[b].conj();
            }
        }
    }
    Ok(DensityMatrix {
        qubits,
        dim,
        entries,
    })
}

#[inline]
fn gather_bits(index: usize, positions: &[usize]) -> usize {
    positions
        .iter()
        .enumerate()
        .fold(0, |acc, (k, &q)| acc | (((index >> q) & 1) << k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genome::{identity_genome, GateSpec};
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn identity_generator_is_global_phase() {
        let s = StateVector::zero(2).unwrap();
        let theta = 0.7;
        let out = apply_pauli_rotation(&s, 0, 0, 0, 1, theta).unwrap();
        let phase = c((theta / 2.0).cos(), -(theta / 2.0).sin());
        assert!(close(out.amplitudes()[0], phase, 1e-15));
    }

    #[test]
    fn x_rotation_by_pi_flips_qubit_zero() {
        let s = StateVector::zero(2).unwrap();
        let out = apply_pauli_rotation(&s, 1, 0, 0, 1, PI).unwrap();
        // |10⟩ in ket notation with qubit 0 first is amplitude index 1
        assert!(close(out.amplitudes()[1], c(0.0, -1.0), 1e-15));
        assert!(out.amplitudes()[0].norm() < 1e-15);
    }

    #[test]
    fn xx_rotation_closed_form() {
        let theta = 1.1;
        let out = apply_pauli_rotation(&StateVector::zero(2).unwrap(), 1, 1, 0, 1, theta).unwrap();
        assert!(close(out.amplitudes()[0], c((theta / 2.0).cos(), 0.0), 1e-15));
        assert!(close(out.amplitudes()[3], c(0.0, -(theta / 2.0).sin()), 1e-15));
    }

    #[test]
    fn rotation_errors() {
        let s = StateVector::zero(2).unwrap();
        assert!(apply_pauli_rotation(&s, 1, 1, 1, 1, 0.3).is_err());
        assert!(apply_pauli_rotation(&s, 1, 1, 0, 2, 0.3).is_err());
        let bad = StateVector::from_amplitudes(1, vec![c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert!(matches!(
            apply_pauli_rotation(&bad, 1, 0, 0, 1, 0.1),
            Err(Error::InvalidArgument(_)) | Err(Error::OutOfRange { .. })
        ));
        let bad = StateVector::from_amplitudes(2, vec![c(1.0, 0.0); 4]).unwrap();
        assert!(matches!(
            apply_pauli_rotation(&bad, 1, 0, 0, 1, 0.1),
            Err(Error::Numerical(_))
        ));
    }

    #[test]
    fn encode_examples() {
        let g = identity_genome(3, 4, 2, 10);
        let s = encode(&g, &[0.4, -1.2]).unwrap();
        assert!((s.amplitudes()[0].norm() - 1.0).abs() < 1e-14);

        let g = KernelGenome {
            n: 2,
            d: 1,
            gates: vec![GateSpec::new(1, 0, 0, 0, 0, 9)],
            measure_mask: 0b11,
            bandwidths: crate::genome::uniform_bandwidths(10),
        };
        let s = encode(&g, &[PI]).unwrap();
        assert!(s.amplitudes()[0].norm_sqr() < 1e-30);
        assert!(encode(&g, &[PI, 0.0]).is_err());

        let s = encode(&g, &[0.0]).unwrap();
        assert!((s.amplitudes()[0].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn reduced_density_examples() {
        let theta = 0.9;
        let s = apply_pauli_rotation(&StateVector::zero(2).unwrap(), 1, 1, 0, 1, theta).unwrap();
        let rho = reduced_density(&s, 0b01).unwrap();
        assert!((rho.get(0, 0).re - (theta / 2.0).cos().powi(2)).abs() < 1e-15);
        assert!((rho.get(1, 1).re - (theta / 2.0).sin().powi(2)).abs() < 1e-15);
        assert!(rho.get(0, 1).norm() < 1e-15);
        rho.check_invariants(1e-12).unwrap();

        let full = reduced_density(&s, 0b11).unwrap();
        assert!((full.purity() - 1.0).abs() < 1e-14);

        // |0⟩ on qubit 0, |+⟩ on qubit 1
        let h = 1.0 / 2f64.sqrt();
        let plus = StateVector::from_amplitudes(2, vec![c(h, 0.0), c(0.0, 0.0), c(h, 0.0), c(0.0, 0.0)]).unwrap();
        let rho = reduced_density(&plus, 0b10).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                assert!((rho.get(a, b).re - 0.5).abs() < 1e-15);
            }
        }
        assert!(reduced_density(&plus, 0).is_err());
        assert!(reduced_density(&plus, 0b100).is_err());
    }

    #[test]
    fn subsystem_ordering_follows_qubit_index() {
        // X on qubit 2 only: reduced state on qubits {0, 2} is |1⟩ at subsystem bit 1
        let s = apply_pauli_rotation(&StateVector::zero(3).unwrap(), 1, 0, 2, 0, PI).unwrap();
        let rho = reduced_density(&s, 0b101).unwrap();
        assert_eq!(rho.qubits(), &[0, 2]);
        assert!((rho.get(2, 2).re - 1.0).abs() < 1e-14);
    }
}
