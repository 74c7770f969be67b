//! Integer genome of a quantum kernel.
//!
//! A genome on `n` qubits with `m` gates and `d` features flattens to
//! `6m + n` naturals: each gate contributes `(alpha, beta, p, q, k, j)` and the
//! measurement mask contributes one bit per qubit (qubit 0 first).
//!
//! The second-qubit field `q` is a slot in `0..n-1`; the realized qubit skips
//! `p`, so every in-range tuple names two distinct qubits.

use std::fmt;
use std::path::Path;

use num_bigint::BigUint;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::PauliString;

pub const CELLS_PER_GATE: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GateSpec {
    /// Pauli on the first qubit (0 = I, 1 = X, 2 = Y, 3 = Z).
    pub alpha: u8,
    /// Pauli on the second qubit.
    pub beta: u8,
    /// First qubit.
    pub p: usize,
    /// Second-qubit slot, excludes `p`.
    pub q: usize,
    /// Feature index.
    pub feature: usize,
    /// Bandwidth slot.
    pub bandwidth: usize,
}

impl GateSpec {
    pub fn new(alpha: u8, beta: u8, p: usize, q: usize, feature: usize, bandwidth: usize) -> Self {
        Self {
            alpha,
            beta,
            p,
            q,
            feature,
            bandwidth,
        }
    }

    /// The qubit the second Pauli acts on.
    pub fn second_qubit(&self) -> usize {
        if self.q < self.p {
            self.q
        } else {
            self.q + 1
        }
    }

    pub fn is_identity(&self) -> bool {
        self.alpha == 0 && self.beta == 0
    }

    /// Generator word `σ_alpha^(p) σ_beta^(q')`.
    pub fn generator(&self, n: usize) -> Result<PauliString> {
        PauliString::two_site(n, self.alpha, self.p, self.beta, self.second_qubit())
    }

    fn cells(&self) -> [u32; CELLS_PER_GATE] {
        [
            self.alpha as u32,
            self.beta as u32,
            self.p as u32,
            self.q as u32,
            self.feature as u32,
            self.bandwidth as u32,
        ]
    }

    fn from_cells(c: &[u32]) -> Self {
        Self {
            alpha: c[0] as u8,
            beta: c[1] as u8,
            p: c[2] as usize,
            q: c[3] as usize,
            feature: c[4] as usize,
            bandwidth: c[5] as usize,
        }
    }
}

/// One invariant violation reported by [`KernelGenome::validate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    TooFewQubits { n: usize },
    TooManyQubits { n: usize },
    NoFeatures,
    NoBandwidths,
    BandwidthOutOfRange { slot: usize, value: f64 },
    BandwidthsNotIncreasing { slot: usize },
    LastBandwidthNotOne { value: f64 },
    EmptyMeasurement,
    MaskBeyondRegister { mask: u64 },
    CellOutOfRange { gate: usize, field: &'static str, value: usize, limit: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TooFewQubits { n } => write!(f, "two-qubit gates need n >= 2, got {n}"),
            Violation::TooManyQubits { n } => write!(f, "n = {n} exceeds the supported register"),
            Violation::NoFeatures => write!(f, "feature count d must be >= 1"),
            Violation::NoBandwidths => write!(f, "bandwidth table is empty"),
            Violation::BandwidthOutOfRange { slot, value } => {
                write!(f, "bandwidth[{slot}] = {value} outside (0, 1]")
            }
            Violation::BandwidthsNotIncreasing { slot } => {
                write!(f, "bandwidths not strictly increasing at slot {slot}")
            }
            Violation::LastBandwidthNotOne { value } => {
                write!(f, "last bandwidth ≠ 1 (got {value})")
            }
            Violation::EmptyMeasurement => write!(f, "empty measurement"),
            Violation::MaskBeyondRegister { mask } => {
                write!(f, "measurement mask {mask:#b} has bits beyond the register")
            }
            Violation::CellOutOfRange {
                gate,
                field,
                value,
                limit,
            } => write!(f, "gate {gate}: {field} = {value} not below {limit}"),
        }
    }
}

/// `(n, m, d, bandwidth table)` of a genome family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub bandwidths: Vec<f64>,
}

impl SearchSpace {
    /// Space with the uniform bandwidth table `i/b`, `i = 1..=b`.
    pub fn new(n: usize, m: usize, d: usize, b: usize) -> Self {
        Self {
            n,
            m,
            d,
            bandwidths: uniform_bandwidths(b),
        }
    }

    pub fn with_bandwidths(n: usize, m: usize, d: usize, bandwidths: Vec<f64>) -> Self {
        Self { n, m, d, bandwidths }
    }

    pub fn b(&self) -> usize {
        self.bandwidths.len()
    }

    pub fn flat_len(&self) -> usize {
        CELLS_PER_GATE * self.m + self.n
    }

    /// Number of values cell `index` of the flat encoding can take.
    pub fn cell_bound(&self, index: usize) -> Result<u32> {
        let len = self.flat_len();
        if index >= len {
            return Err(Error::OutOfRange { index, limit: len });
        }
        let gate_cells = CELLS_PER_GATE * self.m;
        if index >= gate_cells {
            return Ok(2);
        }
        Ok(match index % CELLS_PER_GATE {
            0 | 1 => 4,
            2 => self.n as u32,
            3 => self.n.saturating_sub(1) as u32,
            4 => self.d as u32,
            _ => self.b() as u32,
        })
    }

    pub fn is_mask_cell(&self, index: usize) -> bool {
        index >= CELLS_PER_GATE * self.m && index < self.flat_len()
    }

    fn same_shape(&self, other: &SearchSpace) -> bool {
        self.n == other.n && self.m == other.m && self.d == other.d && self.bandwidths == other.bandwidths
    }
}

pub fn uniform_bandwidths(b: usize) -> Vec<f64> {
    (1..=b).map(|i| i as f64 / b as f64).collect()
}

/// `(16·n·(n−1)·d·b)^m · 2^n`, counting every mask pattern including the empty one.
pub fn space_cardinality(space: &SearchSpace) -> Result<BigUint> {
    if space.n < 2 {
        return Err(Error::InvalidArgument(
            "two-qubit gates need at least two qubits".into(),
        ));
    }
    if space.d == 0 || space.b() == 0 {
        return Err(Error::InvalidArgument("d and b must be >= 1".into()));
    }
    let per_gate = BigUint::from(16u32)
        * BigUint::from(space.n)
        * BigUint::from(space.n - 1)
        * BigUint::from(space.d)
        * BigUint::from(space.b());
    Ok(per_gate.pow(space.m as u32) * (BigUint::from(1u32) << space.n))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelGenome {
    pub n: usize,
    pub d: usize,
    pub gates: Vec<GateSpec>,
    /// Bit `i` set means qubit `i` is measured.
    pub measure_mask: u64,
    pub bandwidths: Vec<f64>,
}

impl KernelGenome {
    pub fn m(&self) -> usize {
        self.gates.len()
    }

    pub fn space(&self) -> SearchSpace {
        SearchSpace::with_bandwidths(self.n, self.m(), self.d, self.bandwidths.clone())
    }

    pub fn full_mask(&self) -> u64 {
        full_mask(self.n)
    }

    pub fn measures_all(&self) -> bool {
        self.measure_mask == self.full_mask()
    }

    /// Every invariant violation; empty when the genome is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.n == 0 || (!self.gates.is_empty() && self.n < 2) {
            out.push(Violation::TooFewQubits { n: self.n });
        }
        if self.n > crate::pauli::MAX_QUBITS {
            out.push(Violation::TooManyQubits { n: self.n });
        }
        if self.d == 0 {
            out.push(Violation::NoFeatures);
        }
        if self.bandwidths.is_empty() {
            out.push(Violation::NoBandwidths);
        }
        for (slot, &v) in self.bandwidths.iter().enumerate() {
            if !(v > 0.0 && v <= 1.0) {
                out.push(Violation::BandwidthOutOfRange { slot, value: v });
            }
            if slot > 0 && !(v > self.bandwidths[slot - 1]) {
                out.push(Violation::BandwidthsNotIncreasing { slot });
            }
        }
        if let Some(&last) = self.bandwidths.last() {
            if last != 1.0 {
                out.push(Violation::LastBandwidthNotOne { value: last });
            }
        }
        if self.measure_mask == 0 {
            out.push(Violation::EmptyMeasurement);
        }
        if self.n <= crate::pauli::MAX_QUBITS && self.measure_mask & !full_mask(self.n) != 0 {
            out.push(Violation::MaskBeyondRegister {
                mask: self.measure_mask,
            });
        }
        let b = self.bandwidths.len();
        for (g, gate) in self.gates.iter().enumerate() {
            let checks: [(&'static str, usize, usize); 6] = [
                ("alpha", gate.alpha as usize, 4),
                ("beta", gate.beta as usize, 4),
                ("p", gate.p, self.n),
                ("q", gate.q, self.n.saturating_sub(1)),
                ("k", gate.feature, self.d),
                ("j", gate.bandwidth, b),
            ];
            for (field, value, limit) in checks {
                if value >= limit {
                    out.push(Violation::CellOutOfRange {
                        gate: g,
                        field,
                        value,
                        limit,
                    });
                }
            }
        }
        out
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidGenome(v))
        }
    }

    /// Flat `6m + n` encoding: gate tuples in order, then the mask bits.
    pub fn encode_flat(&self) -> Result<Vec<u32>> {
        self.ensure_valid()?;
        Ok(self.flat_unchecked())
    }

    pub(crate) fn flat_unchecked(&self) -> Vec<u32> {
        let mut out = Vec::with_capacity(CELLS_PER_GATE * self.m() + self.n);
        for g in &self.gates {
            out.extend_from_slice(&g.cells());
        }
        for q in 0..self.n {
            out.push(((self.measure_mask >> q) & 1) as u32);
        }
        out
    }

    /// Inverse of [`encode_flat`](Self::encode_flat); rejects out-of-range cells.
    pub fn decode_flat(flat: &[u32], space: &SearchSpace) -> Result<Self> {
        if flat.len() != space.flat_len() {
            return Err(Error::dim(space.flat_len(), flat.len()));
        }
        for (i, &v) in flat.iter().enumerate() {
            let bound = space.cell_bound(i)?;
            if v >= bound {
                return Err(Error::OutOfRange {
                    index: v as usize,
                    limit: bound as usize,
                });
            }
        }
        let genome = Self::from_flat_unchecked(flat, space);
        genome.ensure_valid()?;
        Ok(genome)
    }

    fn from_flat_unchecked(flat: &[u32], space: &SearchSpace) -> Self {
        let gate_cells = CELLS_PER_GATE * space.m;
        let gates = flat[..gate_cells]
            .chunks(CELLS_PER_GATE)
            .map(GateSpec::from_cells)
            .collect();
        let measure_mask = flat[gate_cells..]
            .iter()
            .enumerate()
            .fold(0u64, |acc, (q, &bit)| acc | ((bit as u64) << q));
        Self {
            n: space.n,
            d: space.d,
            gates,
            measure_mask,
            bandwidths: space.bandwidths.clone(),
        }
    }

    /// Comma-separated flat encoding, for logs and traces.
    pub fn flat_string(&self) -> String {
        flat_to_string(&self.flat_unchecked())
    }

    /// Pauli generators of the feature map, identity gates skipped.
    pub fn generators(&self) -> Result<Vec<PauliString>> {
        self.gates
            .iter()
            .filter(|g| !g.is_identity())
            .map(|g| g.generator(self.n))
            .collect()
    }

    /// All valid genomes differing from `self` only at flat cell `cell`,
    /// in increasing cell-value order; includes `self`.
    pub fn enumerate_cell_values(&self, cell: usize) -> Result<Vec<KernelGenome>> {
        self.ensure_valid()?;
        let space = self.space();
        let bound = space.cell_bound(cell)?;
        let base = self.flat_unchecked();
        let mut out = Vec::with_capacity(bound as usize);
        for v in 0..bound {
            let mut flat = base.clone();
            flat[cell] = v;
            let g = Self::from_flat_unchecked(&flat, &space);
            if g.validate().is_empty() {
                out.push(g);
            }
        }
        Ok(out)
    }

    /// Resamples each cell independently with probability `rate`.
    pub fn mutate<R: Rng + ?Sized>(&self, rate: f64, rng: &mut R) -> Result<KernelGenome> {
        self.ensure_valid()?;
        if !(0.0..=1.0).contains(&rate) {
            return Err(Error::InvalidArgument(format!("mutation rate {rate} outside [0, 1]")));
        }
        let space = self.space();
        let mut flat = self.flat_unchecked();
        let gate_cells = CELLS_PER_GATE * space.m;
        for (i, cell) in flat.iter_mut().enumerate().take(gate_cells) {
            if rng.random::<f64>() < rate {
                *cell = rng.random_range(0..space.cell_bound(i)?);
            }
        }
        // mask cells: redraw the mask step until it is non-empty
        let original = flat[gate_cells..].to_vec();
        loop {
            let mut mask = original.clone();
            for bit in mask.iter_mut() {
                if rng.random::<f64>() < rate {
                    *bit = rng.random_range(0..2);
                }
            }
            if mask.contains(&1) {
                flat[gate_cells..].copy_from_slice(&mask);
                break;
            }
        }
        Ok(Self::from_flat_unchecked(&flat, &space))
    }

    pub fn to_qkg(&self) -> String {
        to_qkg(self)
    }

    pub fn from_qkg(text: &str) -> Result<Self> {
        from_qkg(text)
    }

    pub fn read_qkg(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        from_qkg(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                message: msg,
            },
            other => other,
        })
    }

    pub fn write_qkg(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_qkg()).map_err(|e| Error::io(path, e))
    }
}

pub fn full_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

pub fn flat_to_string(flat: &[u32]) -> String {
    flat.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// `m` global-phase gates (`alpha = beta = 0`), full mask, bandwidths `i/b`.
pub fn identity_genome(n: usize, m: usize, d: usize, b: usize) -> KernelGenome {
    identity_in(&SearchSpace::new(n, m, d, b))
}

pub fn identity_in(space: &SearchSpace) -> KernelGenome {
    KernelGenome {
        n: space.n,
        d: space.d,
        gates: vec![GateSpec::new(0, 0, 0, 0, 0, 0); space.m],
        measure_mask: full_mask(space.n),
        bandwidths: space.bandwidths.clone(),
    }
}

/// Uniform sample over valid genomes of `space`.
pub fn random_genome<R: Rng + ?Sized>(space: &SearchSpace, rng: &mut R) -> Result<KernelGenome> {
    let mut flat = Vec::with_capacity(space.flat_len());
    for i in 0..CELLS_PER_GATE * space.m {
        flat.push(rng.random_range(0..space.cell_bound(i)?));
    }
    let mask = loop {
        let mask = rng.random::<u64>() & full_mask(space.n);
        if mask != 0 {
            break mask;
        }
    };
    for q in 0..space.n {
        flat.push(((mask >> q) & 1) as u32);
    }
    let g = KernelGenome::from_flat_unchecked(&flat, space);
    g.ensure_valid()?;
    Ok(g)
}

/// Gates `[0, point)` from `a`, gates `[point, m)` and the mask from `b`.
pub fn crossover(a: &KernelGenome, b: &KernelGenome, point: usize) -> Result<KernelGenome> {
    if !a.space().same_shape(&b.space()) {
        return Err(Error::Incompatible(format!(
            "(n={}, m={}, d={}, b={}) vs (n={}, m={}, d={}, b={})",
            a.n,
            a.m(),
            a.d,
            a.bandwidths.len(),
            b.n,
            b.m(),
            b.d,
            b.bandwidths.len()
        )));
    }
    if point > a.m() {
        return Err(Error::OutOfRange {
            index: point,
            limit: a.m() + 1,
        });
    }
    let mut gates = a.gates[..point].to_vec();
    gates.extend_from_slice(&b.gates[point..]);
    let child = KernelGenome {
        n: a.n,
        d: a.d,
        gates,
        measure_mask: b.measure_mask,
        bandwidths: a.bandwidths.clone(),
    };
    child.ensure_valid()?;
    Ok(child)
}

/// Every flat vector of the raw encoding space (empty masks included),
/// in lexicographic order. Intended for tiny spaces.
pub fn enumerate_flat(space: &SearchSpace) -> Result<Vec<Vec<u32>>> {
    let len = space.flat_len();
    let bounds: Vec<u32> = (0..len).map(|i| space.cell_bound(i)).collect::<Result<_>>()?;
    if bounds.contains(&0) {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut cur = vec![0u32; len];
    loop {
        out.push(cur.clone());
        let mut i = len;
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            cur[i] += 1;
            if cur[i] < bounds[i] {
                break;
            }
            cur[i] = 0;
        }
    }
}

/// All valid genomes of a tiny space.
pub fn enumerate_valid(space: &SearchSpace) -> Result<Vec<KernelGenome>> {
    Ok(enumerate_flat(space)?
        .into_iter()
        .map(|f| KernelGenome::from_flat_unchecked(&f, space))
        .filter(|g| g.validate().is_empty())
        .collect())
}

fn mask_string(mask: u64, n: usize) -> String {
    (0..n)
        .map(|q| if (mask >> q) & 1 == 1 { '1' } else { '0' })
        .collect()
}

fn to_qkg(g: &KernelGenome) -> String {
    let mut s = String::new();
    s.push_str("# quantum kernel genome\n");
    s.push_str(&format!("n = {}\n", g.n));
    s.push_str(&format!("d = {}\n", g.d));
    let bws = g
        .bandwidths
        .iter()
        .map(|b| format!("{b:?}"))
        .collect::<Vec<_>>()
        .join(", ");
    s.push_str(&format!("bandwidths = [{bws}]\n"));
    s.push_str("# (alpha, beta, p, q, k, j)\n");
    s.push_str("gates = [\n");
    for gate in &g.gates {
        let c = gate.cells();
        s.push_str(&format!(
            "  [{}, {}, {}, {}, {}, {}],\n",
            c[0], c[1], c[2], c[3], c[4], c[5]
        ));
    }
    s.push_str("]\n");
    s.push_str("# qubit 0 leftmost\n");
    s.push_str(&format!("measure = \"{}\"\n", mask_string(g.measure_mask, g.n)));
    s
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct QkgDoc {
    n: usize,
    d: usize,
    bandwidths: Vec<f64>,
    gates: Vec<[u32; CELLS_PER_GATE]>,
    measure: String,
}

fn from_qkg(text: &str) -> Result<KernelGenome> {
    let doc: QkgDoc = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    if doc.measure.chars().count() != doc.n {
        return Err(Error::Config(format!(
            "measure string has {} bits, n = {}",
            doc.measure.chars().count(),
            doc.n
        )));
    }
    let mut mask = 0u64;
    for (q, c) in doc.measure.chars().enumerate() {
        match c {
            '0' => {}
            '1' => mask |= 1 << q,
            other => return Err(Error::Config(format!("invalid mask character {other:?}"))),
        }
    }
    let space = SearchSpace::with_bandwidths(doc.n, doc.gates.len(), doc.d, doc.bandwidths);
    let mut flat: Vec<u32> = doc.gates.iter().flatten().copied().collect();
    flat.extend((0..doc.n).map(|q| ((mask >> q) & 1) as u32));
    KernelGenome::decode_flat(&flat, &space)
}
