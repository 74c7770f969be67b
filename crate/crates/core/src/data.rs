//! Dataset ingestion, scaling, feature engineering and split protocols.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shrink applied to the scaled range so features stay strictly inside (−1, 1).
pub const SCALE_MARGIN: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    /// Standard Model background, the regular class (+1).
    #[serde(rename = "SM")]
    Sm,
    /// Beyond-Standard-Model signal, the anomalous class (−1).
    #[serde(rename = "BSM")]
    Bsm,
}

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Sm => 1.0,
            Label::Bsm => -1.0,
        }
    }

    pub fn from_score(score: f64) -> Self {
        if score >= 0.0 {
            Label::Sm
        } else {
            Label::Bsm
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Sm => "SM",
            Label::Bsm => "BSM",
        })
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "SM" => Ok(Label::Sm),
            "BSM" => Ok(Label::Bsm),
            other => Err(Error::Data(format!("unknown label {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<Label>,
    /// Per-jet latent dimension; raw rows carry `2ℓ` features.
    pub latent_dim: usize,
}

impl LabeledDataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<Label>, latent_dim: usize) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::Data(format!(
                "{} feature rows but {} labels",
                features.len(),
                labels.len()
            )));
        }
        if let Some(first) = features.first() {
            if let Some(bad) = features.iter().position(|r| r.len() != first.len()) {
                return Err(Error::Data(format!("row {bad} has inconsistent width")));
            }
        }
        Ok(Self {
            features,
            labels,
            latent_dim,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(2 * self.latent_dim, |r| r.len())
    }

    pub fn rows(&self, idx: &[usize]) -> Vec<Vec<f64>> {
        idx.iter().map(|&i| self.features[i].clone()).collect()
    }

    pub fn labels_of(&self, idx: &[usize]) -> Vec<Label> {
        idx.iter().map(|&i| self.labels[i]).collect()
    }

    pub fn indices_of(&self, label: Label) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == label).collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
        let mut header: Vec<String> = (0..self.dim()).map(|i| format!("f{i}")).collect();
        header.push("label".into());
        w.write_record(&header).map_err(|e| csv_io(path, e))?;
        for (row, label) in self.features.iter().zip(&self.labels) {
            let mut rec: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            rec.push(label.to_string());
            w.write_record(&rec).map_err(|e| csv_io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    Error::Data(format!("{}: {e}", path.display()))
}

/// Reads a table with a header row, `2ℓ` numeric feature columns and a
/// `label` column holding `SM` or `BSM`. Values are not rescaled.
pub fn load_csv(path: &Path) -> Result<LabeledDataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, path)
}

fn parse_csv(text: &str, path: &Path) -> Result<LabeledDataset> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(parse_err(1, "empty file".into()));
    }
    let label_col = header
        .iter()
        .position(|h| h == "label")
        .ok_or_else(|| parse_err(1, "missing `label` column".into()))?;
    let n_features = header.len() - 1;
    if n_features == 0 || n_features % 2 != 0 {
        return Err(parse_err(
            1,
            format!("expected an even, non-zero number of feature columns, found {n_features}"),
        ));
    }

    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| parse_err(line, e.to_string()))?;
        if rec.len() != header.len() {
            return Err(parse_err(
                line,
                format!("expected {} fields, found {}", header.len(), rec.len()),
            ));
        }
        let mut row = Vec::with_capacity(n_features);
        for (c, field) in rec.iter().enumerate() {
            if c == label_col {
                continue;
            }
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(line, format!("non-numeric value {field:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("non-finite value {field:?}")));
            }
            row.push(v);
        }
        let label = rec[label_col]
            .parse::<Label>()
            .map_err(|e| parse_err(line, e.to_string()))?;
        features.push(row);
        labels.push(label);
    }
    if features.is_empty() {
        return Err(parse_err(1, "no data rows".into()));
    }
    LabeledDataset::new(features, labels, n_features / 2)
}

/// Per-feature min-max map onto `[−1+δ, 1−δ]`, fitted on training rows only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    /// Columns with zero range; they map to 0.
    pub constant_features: Vec<usize>,
}

pub fn fit_scaler(train_rows: &[Vec<f64>]) -> Result<MinMaxScaler> {
    let first = train_rows
        .first()
        .ok_or_else(|| Error::Data("cannot fit a scaler on zero rows".into()))?;
    let d = first.len();
    let mut min = vec![f64::INFINITY; d];
    let mut max = vec![f64::NEG_INFINITY; d];
    for row in train_rows {
        if row.len() != d {
            return Err(Error::dim(d, row.len()));
        }
        for (k, &v) in row.iter().enumerate() {
            min[k] = min[k].min(v);
            max[k] = max[k].max(v);
        }
    }
    let constant_features = (0..d).filter(|&k| max[k] <= min[k]).collect();
    Ok(MinMaxScaler {
        min,
        max,
        constant_features,
    })
}

impl MinMaxScaler {
    pub fn transform_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.min.len() {
            return Err(Error::dim(self.min.len(), row.len()));
        }
        let hi = 1.0 - SCALE_MARGIN;
        Ok(row
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                let range = self.max[k] - self.min[k];
                if range <= 0.0 {
                    return 0.0;
                }
                let unit = (v - self.min[k]) / range;
                ((2.0 * unit - 1.0) * hi).clamp(-hi, hi)
            })
            .collect())
    }
}

pub fn apply_scaler(scaler: &MinMaxScaler, dataset: &LabeledDataset) -> Result<LabeledDataset> {
    let features = dataset
        .features
        .iter()
        .map(|r| scaler.transform_row(r))
        .collect::<Result<_>>()?;
    LabeledDataset::new(features, dataset.labels.clone(), dataset.latent_dim)
}

/// Appends `(x_i − π)(x_j − π)` for each pair; appended columns are not rescaled.
pub fn engineer_features(dataset: &LabeledDataset, pairs: &[(usize, usize)]) -> Result<LabeledDataset> {
    let d = dataset.dim();
    let mut seen = HashSet::new();
    for &(i, j) in pairs {
        if i >= d || j >= d {
            return Err(Error::OutOfRange {
                index: i.max(j),
                limit: d,
            });
        }
        if !seen.insert((i.min(j), i.max(j))) {
            return Err(Error::InvalidArgument(format!("duplicate feature pair ({i}, {j})")));
        }
    }
    let pi = std::f64::consts::PI;
    let features = dataset
        .features
        .iter()
        .map(|row| {
            let mut out = row.clone();
            out.extend(pairs.iter().map(|&(i, j)| (row[i] - pi) * (row[j] - pi)));
            out
        })
        .collect();
    LabeledDataset::new(features, dataset.labels.clone(), dataset.latent_dim)
}

/// How labeled evaluation sets are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Mixing {
    /// Fixed SM fraction; the SM count is rounded up.
    Balanced { sm_fraction: f64 },
    /// Uniform draws from whatever rows remain, regardless of class.
    Iid,
}

impl Default for Mixing {
    fn default() -> Self {
        Mixing::Balanced { sm_fraction: 0.5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscoverySplit {
    /// SM-only training indices.
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssessmentSplit {
    pub train: Vec<usize>,
    pub tests: Vec<Vec<usize>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscoverySizes {
    pub train: usize,
    pub validation: usize,
    pub mixing: Mixing,
}

impl Default for DiscoverySizes {
    fn default() -> Self {
        Self {
            train: 75,
            validation: 75,
            mixing: Mixing::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssessmentSizes {
    pub train: usize,
    pub test: usize,
    pub repeats: usize,
    pub mixing: Mixing,
}

impl Default for AssessmentSizes {
    fn default() -> Self {
        Self {
            train: 200,
            test: 1500,
            repeats: 5,
            mixing: Mixing::default(),
        }
    }
}

/// Pools of unused SM and BSM indices, shuffled once under the seed.
struct Pools {
    sm: Vec<usize>,
    bsm: Vec<usize>,
    rng: ChaCha8Rng,
}

impl Pools {
    fn new(dataset: &LabeledDataset, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sm = dataset.indices_of(Label::Sm);
        let mut bsm = dataset.indices_of(Label::Bsm);
        sm.shuffle(&mut rng);
        bsm.shuffle(&mut rng);
        Self { sm, bsm, rng }
    }

    fn take(pool: &mut Vec<usize>, k: usize, what: &str) -> Result<Vec<usize>> {
        if pool.len() < k {
            return Err(Error::Data(format!(
                "need {k} more {what} rows, only {} available",
                pool.len()
            )));
        }
        Ok(pool.drain(..k).collect())
    }

    fn take_sm(&mut self, k: usize) -> Result<Vec<usize>> {
        Self::take(&mut self.sm, k, "SM")
    }

    fn take_labeled(&mut self, k: usize, mixing: Mixing) -> Result<Vec<usize>> {
        let mut out = match mixing {
            Mixing::Balanced { sm_fraction } => {
                if !(0.0..=1.0).contains(&sm_fraction) {
                    return Err(Error::Config(format!("sm_fraction {sm_fraction} outside [0, 1]")));
                }
                let n_sm = (k as f64 * sm_fraction).ceil() as usize;
                let mut out = Self::take(&mut self.sm, n_sm, "SM")?;
                out.extend(Self::take(&mut self.bsm, k - n_sm, "BSM")?);
                out
            }
            Mixing::Iid => {
                let mut all: Vec<usize> = self.sm.iter().chain(&self.bsm).copied().collect();
                all.sort_unstable();
                if all.len() < k {
                    return Err(Error::Data(format!("need {k} rows, only {} available", all.len())));
                }
                all.shuffle(&mut self.rng);
                let chosen: HashSet<usize> = all[..k].iter().copied().collect();
                self.sm.retain(|i| !chosen.contains(i));
                self.bsm.retain(|i| !chosen.contains(i));
                all.truncate(k);
                all
            }
        };
        out.sort_unstable();
        Ok(out)
    }
}

pub fn make_discovery_split(dataset: &LabeledDataset, sizes: DiscoverySizes, seed: u64) -> Result<DiscoverySplit> {
    let mut pools = Pools::new(dataset, seed);
    let mut train = pools.take_sm(sizes.train)?;
    train.sort_unstable();
    let validation = pools.take_labeled(sizes.validation, sizes.mixing)?;
    Ok(DiscoverySplit { train, validation })
}

pub fn make_assessment_split(dataset: &LabeledDataset, sizes: AssessmentSizes, seed: u64) -> Result<AssessmentSplit> {
    let mut pools = Pools::new(dataset, seed);
    let mut train = pools.take_sm(sizes.train)?;
    train.sort_unstable();
    let tests = (0..sizes.repeats)
        .map(|_| pools.take_labeled(sizes.test, sizes.mixing))
        .collect::<Result<_>>()?;
    Ok(AssessmentSplit { train, tests })
}

/// Converts an autoencoder latent array of shape `(N, 2, ℓ)` or `(N, 2ℓ)`
/// stored as `.npy` (f32 or f64) into rows.
pub fn read_latent_npy(path: &Path) -> Result<Vec<Vec<f64>>> {
    use ndarray::ArrayD;
    use ndarray_npy::ReadNpyExt;

    let open = || std::fs::File::open(path).map_err(|e| Error::io(path, e));
    let arr: ArrayD<f64> = match ArrayD::<f64>::read_npy(open()?) {
        Ok(a) => a,
        Err(_) => ArrayD::<f32>::read_npy(open()?)
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?
            .mapv(f64::from),
    };
    let shape = arr.shape().to_vec();
    let (rows, width) = match shape.as_slice() {
        [n, 2, l] => (*n, 2 * l),
        [n, w] if w % 2 == 0 => (*n, *w),
        other => {
            return Err(Error::Data(format!(
                "{}: unsupported latent array shape {other:?}",
                path.display()
            )))
        }
    };
    let values: Vec<f64> = arr.iter().copied().collect();
    if width == 0 {
        return Err(Error::Data(format!("{}: zero-width latent array", path.display())));
    }
    Ok(values.chunks(width).take(rows).map(<[f64]>::to_vec).collect())
}

/// Builds a labeled CSV from separate SM and BSM latent arrays.
pub fn import_hep(sm_path: &Path, bsm_path: &Path, out: &Path) -> Result<LabeledDataset> {
    let sm = read_latent_npy(sm_path)?;
    let bsm = read_latent_npy(bsm_path)?;
    let width = sm.first().map(|r| r.len()).unwrap_or(0);
    if bsm.first().map(|r| r.len()).unwrap_or(width) != width {
        return Err(Error::Data("SM and BSM arrays have different widths".into()));
    }
    let labels = std::iter::repeat_n(Label::Sm, sm.len())
        .chain(std::iter::repeat_n(Label::Bsm, bsm.len()))
        .collect();
    let mut features = sm;
    features.extend(bsm);
    let ds = LabeledDataset::new(features, labels, width / 2)?;
    ds.write_csv(out)?;
    Ok(ds)
}
