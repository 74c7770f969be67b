#![allow(dead_code)]

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use qkdisc::criteria::ValidationData;
use qkdisc::data::{Label, LabeledDataset};
use qkdisc::kernels::GramMatrix;
use qkdisc::pauli::PauliString;

/// SM rows ~ N(0, I), BSM rows ~ N(shift·1, I).
pub fn gaussian_blobs(n_sm: usize, n_bsm: usize, dim: usize, shift: f64, seed: u64) -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n_sm + n_bsm {
        let bsm = i >= n_sm;
        let off = if bsm { shift } else { 0.0 };
        features.push((0..dim).map(|_| normal.sample(&mut rng) + off).collect());
        labels.push(if bsm { Label::Bsm } else { Label::Sm });
    }
    LabeledDataset::new(features, labels, dim / 2).unwrap()
}

/// One-feature data for the two-qubit, one-gate toy space. SM rows are
/// N(0, 0.2) restricted to |x| ≤ 0.4, BSM rows have |x| uniform on
/// [0.6, 0.95] with a random sign; the gap makes the classes separable.
pub fn toy_validation_data(seed: u64) -> ValidationData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sm = Normal::new(0.0, 0.2).unwrap();
    let draw_sm = |rng: &mut ChaCha8Rng| loop {
        let v: f64 = sm.sample(rng);
        if v.abs() <= 0.4 {
            break vec![v];
        }
    };
    let train: Vec<Vec<f64>> = (0..75).map(|_| draw_sm(&mut rng)).collect();
    let mut validation = Vec::new();
    let mut labels = Vec::new();
    for i in 0..75 {
        if i < 38 {
            validation.push(draw_sm(&mut rng));
            labels.push(Label::Sm);
        } else {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            validation.push(vec![sign * rng.random_range(0.6..0.95)]);
            labels.push(Label::Bsm);
        }
    }
    ValidationData {
        train,
        validation,
        validation_labels: labels,
    }
}

pub fn random_rows(count: usize, dim: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

// ---- dense Pauli matrices ----

pub type Mat = Vec<Complex64>;

fn pauli_1q(p: u8) -> [Complex64; 4] {
    let (o, z, i) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 1.0));
    match p {
        0 => [o, z, z, o],
        1 => [z, o, o, z],
        2 => [z, -i, i, z],
        _ => [o, z, z, -o],
    }
}

/// Dense matrix of a Pauli word; qubit 0 is the least significant index bit.
pub fn pauli_matrix(p: &PauliString) -> Mat {
    let n = p.num_qubits();
    let dim = 1usize << n;
    let mut out = vec![Complex64::new(0.0, 0.0); dim * dim];
    for r in 0..dim {
        for c in 0..dim {
            let mut v = Complex64::new(1.0, 0.0);
            for q in 0..n {
                let m = pauli_1q(p.pauli_at(q));
                v *= m[((r >> q) & 1) * 2 + ((c >> q) & 1)];
            }
            out[r * dim + c] = v;
        }
    }
    out
}

fn matmul(a: &Mat, b: &Mat, dim: usize) -> Mat {
    let mut out = vec![Complex64::new(0.0, 0.0); dim * dim];
    for i in 0..dim {
        for k in 0..dim {
            let aik = a[i * dim + k];
            if aik == Complex64::new(0.0, 0.0) {
                continue;
            }
            for j in 0..dim {
                out[i * dim + j] += aik * b[k * dim + j];
            }
        }
    }
    out
}

fn commutator(a: &Mat, b: &Mat, dim: usize) -> Mat {
    let ab = matmul(a, b, dim);
    let ba = matmul(b, a, dim);
    ab.iter().zip(&ba).map(|(x, y)| x - y).collect()
}

fn inner(a: &Mat, b: &Mat) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Orthonormal basis of a complex matrix span, grown by Gram–Schmidt.
struct Span {
    basis: Vec<Mat>,
}

impl Span {
    /// Adds `m` if it leaves the span; returns whether it did.
    fn add(&mut self, m: &Mat) -> bool {
        let mut r = m.clone();
        for _ in 0..2 {
            for b in &self.basis {
                let c = inner(b, &r);
                for (x, y) in r.iter_mut().zip(b) {
                    *x -= c * y;
                }
            }
        }
        let norm = inner(&r, &r).re.sqrt();
        let scale = inner(m, m).re.sqrt().max(1.0);
        if norm <= 1e-9 * scale {
            return false;
        }
        for x in r.iter_mut() {
            *x /= norm;
        }
        self.basis.push(r);
        true
    }

    fn contains(&self, m: &Mat) -> bool {
        let mut r = m.clone();
        for b in &self.basis {
            let c = inner(b, &r);
            for (x, y) in r.iter_mut().zip(b) {
                *x -= c * y;
            }
        }
        inner(&r, &r).re.sqrt() <= 1e-9 * inner(m, m).re.sqrt()
    }
}

/// Lie closure computed on dense matrices: the span of the generators is
/// closed under commutators until no new direction appears, then every
/// non-identity Pauli word is tested for membership.
pub fn brute_force_dla(generators: &[PauliString], n: usize) -> Vec<PauliString> {
    let dim = 1usize << n;
    let mut span = Span { basis: Vec::new() };
    for g in generators {
        span.add(&pauli_matrix(g));
    }
    loop {
        let current = span.basis.clone();
        let mut grew = false;
        for i in 0..current.len() {
            for j in i + 1..current.len() {
                if span.add(&commutator(&current[i], &current[j], dim)) {
                    grew = true;
                }
            }
        }
        if !grew {
            break;
        }
    }
    let mut out = Vec::new();
    for x in 0..(1u64 << n) {
        for z in 0..(1u64 << n) {
            if x == 0 && z == 0 {
                continue;
            }
            let p = PauliString::from_masks(n, x, z).unwrap();
            if span.contains(&pauli_matrix(&p)) {
                out.push(p);
            }
        }
    }
    out.sort();
    out
}

// ---- reference QP for the one-class dual ----

/// Euclidean projection onto `{0 ≤ a ≤ c, Σa = 1}` by bisection on the shift.
pub fn project_capped_simplex(v: &[f64], c: f64) -> Vec<f64> {
    let total = |t: f64| v.iter().map(|x| (x - t).clamp(0.0, c)).sum::<f64>();
    let mut lo = v.iter().cloned().fold(f64::INFINITY, f64::min) - c - 1.0;
    let mut hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 1.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    v.iter().map(|x| (x - t).clamp(0.0, c)).collect()
}

pub fn quad_objective(k: &GramMatrix, a: &[f64]) -> f64 {
    let m = a.len();
    let mut acc = 0.0;
    for i in 0..m {
        for j in 0..m {
            acc += a[i] * a[j] * k.get(i, j);
        }
    }
    0.5 * acc
}

/// Accelerated projected gradient on `½ aᵀKa` over the capped simplex.
pub fn reference_ocsvm_objective(k: &GramMatrix, nu: f64, iterations: usize) -> f64 {
    let m = k.rows();
    let c = 1.0 / (nu * m as f64);
    let lipschitz = (0..m)
        .map(|i| (0..m).map(|j| k.get(i, j).abs()).sum::<f64>())
        .fold(0.0, f64::max)
        .max(1e-12);
    let mut x = vec![1.0 / m as f64; m];
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut best = quad_objective(k, &x);
    for _ in 0..iterations {
        let grad: Vec<f64> = (0..m).map(|i| (0..m).map(|j| k.get(i, j) * y[j]).sum()).collect();
        let step: Vec<f64> = y.iter().zip(&grad).map(|(a, g)| a - g / lipschitz).collect();
        let x_next = project_capped_simplex(&step, c);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = x_next
            .iter()
            .zip(&x)
            .map(|(a, b)| a + (t - 1.0) / t_next * (a - b))
            .collect();
        x = x_next;
        t = t_next;
        best = best.min(quad_objective(k, &x));
    }
    best
}
