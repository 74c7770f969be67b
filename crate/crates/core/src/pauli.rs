//! Pauli words in symplectic form and dynamical-Lie-algebra closure.
//!
//! A word on `n` qubits is stored as two bit masks: bit `i` of `x` carries the
//! X component on qubit `i`, bit `i` of `z` the Z component. `x∧z` is Y.
//! Phases are not tracked; every commutator of two Pauli words is a single
//! Pauli word times a scalar, so the span dimension only depends on the words.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported register for the bit-packed representation.
pub const MAX_QUBITS: usize = 64;

/// Single-qubit Pauli index as used by gate tuples: 0 = I, 1 = X, 2 = Y, 3 = Z.
pub fn pauli_bits(index: u8) -> (bool, bool) {
    match index & 3 {
        0 => (false, false),
        1 => (true, false),
        2 => (true, true),
        _ => (false, true),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PauliString {
    // Field order gives the (x_mask, z_mask) ordering for words of equal size.
    x: u64,
    z: u64,
    n: usize,
}

impl PauliString {
    pub fn identity(n: usize) -> Result<Self> {
        Self::from_masks(n, 0, 0)
    }

    pub fn from_masks(n: usize, x: u64, z: u64) -> Result<Self> {
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::InvalidArgument(format!(
                "Pauli word size must be in 1..={MAX_QUBITS}, got {n}"
            )));
        }
        let mask = low_mask(n);
        if x & !mask != 0 || z & !mask != 0 {
            return Err(Error::InvalidArgument(format!(
                "mask bits set beyond qubit {}",
                n - 1
            )));
        }
        Ok(Self { x, z, n })
    }

    /// Word acting as `σ_a` on qubit `p` and `σ_b` on qubit `q` (identity elsewhere).
    pub fn two_site(n: usize, a: u8, p: usize, b: u8, q: usize) -> Result<Self> {
        if p >= n || q >= n {
            return Err(Error::OutOfRange {
                index: p.max(q),
                limit: n,
            });
        }
        if p == q {
            return Err(Error::InvalidArgument("two-site word needs p != q".into()));
        }
        let (xa, za) = pauli_bits(a);
        let (xb, zb) = pauli_bits(b);
        let x = ((xa as u64) << p) | ((xb as u64) << q);
        let z = ((za as u64) << p) | ((zb as u64) << q);
        Self::from_masks(n, x, z)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    /// Pauli index (0..=3) acting on `qubit`.
    pub fn pauli_at(&self, qubit: usize) -> u8 {
        let xb = (self.x >> qubit) & 1 == 1;
        let zb = (self.z >> qubit) & 1 == 1;
        match (xb, zb) {
            (false, false) => 0,
            (true, false) => 1,
            (true, true) => 2,
            (false, true) => 3,
        }
    }

    pub fn weight(&self) -> u32 {
        (self.x | self.z).count_ones()
    }
}

fn low_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

fn check_same_size(a: &PauliString, b: &PauliString) -> Result<()> {
    if a.n != b.n {
        return Err(Error::dim(a.n, b.n));
    }
    Ok(())
}

/// True iff the symplectic product of `a` and `b` is odd, i.e. `[a, b] != 0`.
pub fn anticommutes(a: &PauliString, b: &PauliString) -> Result<bool> {
    check_same_size(a, b)?;
    Ok(symplectic_odd(a, b))
}

#[inline]
fn symplectic_odd(a: &PauliString, b: &PauliString) -> bool {
    ((a.x & b.z) ^ (a.z & b.x)).count_ones() & 1 == 1
}

/// Pauli word of `a·b` with the phase dropped.
pub fn pauli_product(a: &PauliString, b: &PauliString) -> Result<PauliString> {
    check_same_size(a, b)?;
    Ok(PauliString {
        x: a.x ^ b.x,
        z: a.z ^ b.z,
        n: a.n,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DlaClosureResult {
    pub basis: BTreeSet<PauliString>,
    pub rank: usize,
    /// The threshold was reached before the fixed point.
    pub truncated: bool,
}

/// Exact-closure threshold `4^n - 1`, available for `n <= 6`.
pub fn default_threshold(n: usize) -> Option<usize> {
    (n <= 6).then(|| 4usize.pow(n as u32) - 1)
}

/// Closes `generators` under commutation.
///
/// Worklist is FIFO over insertion order: element `i` is commuted against all
/// elements inserted before it, new words are appended. The identity word is
/// never part of the basis. Stops with `truncated = true` as soon as the basis
/// holds at least `threshold` words.
pub fn dla_closure(generators: &[PauliString], threshold: usize) -> Result<DlaClosureResult> {
    if threshold == 0 {
        return Err(Error::InvalidArgument("threshold must be >= 1".into()));
    }
    let Some(first) = generators.first() else {
        return Ok(DlaClosureResult {
            basis: BTreeSet::new(),
            rank: 0,
            truncated: false,
        });
    };
    for g in generators {
        check_same_size(first, g)?;
    }

    let mut seen: HashSet<PauliString> = HashSet::new();
    let mut order: Vec<PauliString> = Vec::new();
    for g in generators {
        if !g.is_identity() && seen.insert(*g) {
            order.push(*g);
        }
    }

    let finish = |order: Vec<PauliString>, truncated: bool| DlaClosureResult {
        rank: order.len(),
        basis: order.into_iter().collect(),
        truncated,
    };

    if order.len() >= threshold {
        return Ok(finish(order, true));
    }

    let mut i = 0;
    while i < order.len() {
        let current = order[i];
        for j in 0..i {
            let other = order[j];
            if symplectic_odd(&current, &other) {
                let word = PauliString {
                    x: current.x ^ other.x,
                    z: current.z ^ other.z,
                    n: current.n,
                };
                if seen.insert(word) {
                    order.push(word);
                    if order.len() >= threshold {
                        return Ok(finish(order, true));
                    }
                }
            }
        }
        i += 1;
    }
    Ok(finish(order, false))
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in 0..self.n {
            let c = match self.pauli_at(q) {
                0 => 'I',
                1 => 'X',
                2 => 'Y',
                _ => 'Z',
            };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    /// Parses one character per qubit from `{I, X, Y, Z}`, qubit 0 leftmost.
    fn from_str(s: &str) -> Result<Self> {
        let mut x = 0u64;
        let mut z = 0u64;
        let mut n = 0usize;
        for (q, c) in s.trim().chars().enumerate() {
            if q >= MAX_QUBITS {
                return Err(Error::InvalidArgument(format!(
                    "Pauli word longer than {MAX_QUBITS} qubits"
                )));
            }
            let (xb, zb) = match c {
                'I' => (false, false),
                'X' => (true, false),
                'Y' => (true, true),
                'Z' => (false, true),
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "invalid Pauli character {other:?}"
                    )))
                }
            };
            x |= (xb as u64) << q;
            z |= (zb as u64) << q;
            n = q + 1;
        }
        Self::from_masks(n, x, z)
    }
}
