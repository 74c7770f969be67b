//! Quantum kernel evaluation and Gram-matrix assembly.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genome::KernelGenome;
use crate::statevector::{encode, reduced_density, DensityMatrix, StateVector};

/// `|⟨ψ_x'|ψ_x⟩|²`.
pub fn overlap_kernel(genome: &KernelGenome, x: &[f64], x2: &[f64]) -> Result<f64> {
    let a = encode(genome, x)?;
    let b = encode(genome, x2)?;
    Ok(a.inner(&b)?.norm_sqr())
}

/// `tr[ρ̃_x ρ̃_x']` with `ρ̃` reduced onto the genome's measured qubits.
pub fn projected_kernel(genome: &KernelGenome, x: &[f64], x2: &[f64]) -> Result<f64> {
    let a = reduced_density(&encode(genome, x)?, genome.measure_mask)?;
    let b = reduced_density(&encode(genome, x2)?, genome.measure_mask)?;
    a.trace_product(&b)
}

/// Probability of reading 0 on the ancilla of a swap test between the two
/// reduced states: `(1 + tr[ρ̃ρ̃'])/2`.
pub fn swap_test_p0(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    Ok((1.0 + a.trace_product(b)?) / 2.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    /// Full-state fidelity, mask ignored.
    Overlap,
    /// Reduced-state kernel on the genome's measurement mask.
    Projected,
}

/// Per-sample representation reused across Gram entries.
enum Encoded {
    States(Vec<StateVector>),
    Densities(Vec<DensityMatrix>),
}

impl Encoded {
    fn build(genome: &KernelGenome, xs: &[Vec<f64>], kind: KernelKind) -> Result<Self> {
        // a projected kernel on a full mask is the overlap kernel; skip the density matrices
        let use_states = kind == KernelKind::Overlap || genome.measures_all();
        let states: Vec<StateVector> = xs
            .par_iter()
            .map(|x| encode(genome, x))
            .collect::<Result<_>>()?;
        if use_states {
            Ok(Encoded::States(states))
        } else {
            let rhos = states
                .par_iter()
                .map(|s| reduced_density(s, genome.measure_mask))
                .collect::<Result<_>>()?;
            Ok(Encoded::Densities(rhos))
        }
    }

    fn len(&self) -> usize {
        match self {
            Encoded::States(v) => v.len(),
            Encoded::Densities(v) => v.len(),
        }
    }

    fn entry(&self, other: &Encoded, i: usize, j: usize) -> f64 {
        match (self, other) {
            (Encoded::States(a), Encoded::States(b)) => {
                a[i].inner(&b[j]).map(|z| z.norm_sqr()).unwrap_or(f64::NAN)
            }
            (Encoded::Densities(a), Encoded::Densities(b)) => {
                a[i].trace_product(&b[j]).unwrap_or(f64::NAN)
            }
            _ => unreachable!("both sides are encoded with the same genome"),
        }
    }
}

/// Row-major real matrix of kernel values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GramMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl GramMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::dim(rows * cols, values.len()));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                values.push(f(i, j));
            }
        }
        Self { rows, cols, values }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    pub fn to_dmatrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.rows, self.cols, &self.values)
    }

    /// Rows and columns restricted to `idx` (square matrices).
    pub fn submatrix(&self, idx: &[usize]) -> Self {
        Self::from_fn(idx.len(), idx.len(), |a, b| self.get(idx[a], idx[b]))
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows.min(self.cols) {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        if !self.is_square() {
            return Err(Error::InvalidArgument("eigenvalues need a square matrix".into()));
        }
        if self.rows == 0 {
            return Ok(0.0);
        }
        let eig = nalgebra::SymmetricEigen::new(self.to_dmatrix());
        Ok(eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min))
    }

    /// CSV export: one matrix row per line, full-precision scientific notation.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for i in 0..self.rows {
            let line = self
                .row(i)
                .iter()
                .map(|v| format!("{v:.17e}"))
                .collect::<Vec<_>>()
                .join(",");
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// Self-Gram of `xs` under the genome's own kernel (projected on its mask).
pub fn gram(genome: &KernelGenome, xs: &[Vec<f64>]) -> Result<GramMatrix> {
    gram_with(genome, xs, KernelKind::Projected)
}

/// Self-Gram under an explicit kernel kind. Each sample is encoded once;
/// only the upper triangle is computed and then mirrored. The diagonal is
/// evaluated, not assumed (projected kernels give purities below 1).
pub fn gram_with(genome: &KernelGenome, xs: &[Vec<f64>], kind: KernelKind) -> Result<GramMatrix> {
    let m = xs.len();
    if m == 0 {
        return Ok(GramMatrix {
            rows: 0,
            cols: 0,
            values: Vec::new(),
        });
    }
    let enc = Encoded::build(genome, xs, kind)?;
    let upper: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| (i..m).map(|j| enc.entry(&enc, i, j)).collect())
        .collect();
    let mut values = vec![0.0; m * m];
    for (i, row) in upper.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            let j = i + off;
            values[i * m + j] = v;
            values[j * m + i] = v;
        }
    }
    Ok(GramMatrix {
        rows: m,
        cols: m,
        values,
    })
}

/// Rectangular Gram `K[i][j] = κ(rows[i], cols[j])` under the genome's own kernel.
pub fn cross_gram(genome: &KernelGenome, rows: &[Vec<f64>], cols: &[Vec<f64>]) -> Result<GramMatrix> {
    cross_gram_with(genome, rows, cols, KernelKind::Projected)
}

pub fn cross_gram_with(
    genome: &KernelGenome,
    rows: &[Vec<f64>],
    cols: &[Vec<f64>],
    kind: KernelKind,
) -> Result<GramMatrix> {
    if rows.is_empty() || cols.is_empty() {
        return Ok(GramMatrix {
            rows: rows.len(),
            cols: cols.len(),
            values: Vec::new(),
        });
    }
    let a = Encoded::build(genome, rows, kind)?;
    let b = Encoded::build(genome, cols, kind)?;
    let nc = b.len();
    let values: Vec<f64> = (0..a.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let a = &a;
            let b = &b;
            (0..nc).map(move |j| a.entry(b, i, j))
        })
        .collect();
    Ok(GramMatrix {
        rows: rows.len(),
        cols: cols.len(),
        values,
    })
}

/// Plain Euclidean inner-product Gram, a classical baseline.
pub fn linear_gram(rows: &[Vec<f64>], cols: &[Vec<f64>]) -> GramMatrix {
    GramMatrix::from_fn(rows.len(), cols.len(), |i, j| {
        rows[i].iter().zip(&cols[j]).map(|(a, b)| a * b).sum()
    })
}
