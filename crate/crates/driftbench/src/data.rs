//! Dataset model, file parsers, standardization, and the temporal split.
//!
//! A [`Dataset`] is a flat list of labeled samples, each tagged with the
//! index of the acquisition batch it came from. Batches are the unit of
//! time: the temporal split trains on an early subset of batches and holds
//! out the later ones, unshuffled, so that drift between acquisition periods
//! is preserved in the evaluation sets.
//!
//! Two on-disk formats are supported: the sparse libsvm format used by the
//! gas-sensor batch files (`<label> <index>:<value> ...`, one-based feature
//! indices, labels `1..=C`) and a dense CSV with named label/batch columns
//! and zero-based labels. [`serialize_csv`] writes the canonical CSV form;
//! parse → serialize → parse is the identity.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::seeds;

/// Errors from dataset construction, parsing, and splitting.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: feature index {index} out of range (valid: 1..={num_features})")]
    FeatureIndexOutOfRange {
        line: usize,
        index: usize,
        num_features: usize,
    },
    #[error("line {line}: label {label} out of range (valid: {min}..={max})")]
    LabelOutOfRange {
        line: usize,
        label: i64,
        min: i64,
        max: i64,
    },
    #[error("column {name:?} not found in CSV header")]
    MissingColumn { name: String },
    #[error("duplicate column {name:?} in CSV header")]
    DuplicateColumn { name: String },
    #[error("sample {index}: expected {expected} features, found {found}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("sample {index}: feature {feature} is not finite")]
    NonFiniteFeature { index: usize, feature: usize },
    #[error("batch ids must be contiguous from 0, found {found:?}")]
    NonContiguousBatches { found: Vec<usize> },
    #[error("dataset is empty")]
    Empty,
    #[error("cannot merge datasets with differing shapes: {message}")]
    ShapeMismatch { message: String },
    #[error("train batch {batch} not present in dataset (batches: {present:?})")]
    UnknownBatch { batch: usize, present: Vec<usize> },
    #[error("no training batches selected")]
    NoTrainBatches,
    #[error("split fraction must lie strictly between 0 and 1, got {0}")]
    InvalidFraction(f64),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// One labeled observation: a dense feature vector, a zero-based class
/// label, and the index of the acquisition batch it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: usize,
    pub batch: usize,
}

/// An immutable collection of samples with a fixed feature dimensionality
/// and class count.
///
/// Invariants, enforced at construction: every sample has exactly
/// `num_features` features and a label below `num_classes`, and the distinct
/// batch ids are contiguous from 0 ([`parse_libsvm`] is the one documented
/// exception — it tags a single file with a caller-chosen batch id and
/// relies on [`Dataset::merge`] to restore contiguity).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    num_features: usize,
    num_classes: usize,
    /// Optional descriptive metadata: batch id → inclusive (first, last)
    /// month of acquisition. Not used by any computation.
    batch_months: BTreeMap<usize, (u32, u32)>,
}

impl Dataset {
    /// Builds a dataset from parts, validating every invariant.
    pub fn from_parts(
        samples: Vec<Sample>,
        num_features: usize,
        num_classes: usize,
    ) -> Result<Self, DataError> {
        let d = Self::from_parts_unchecked_batches(samples, num_features, num_classes)?;
        d.check_contiguous_batches()?;
        Ok(d)
    }

    /// Same as [`from_parts`](Self::from_parts) but without the contiguity
    /// check on batch ids; used by the single-file parser and the split.
    fn from_parts_unchecked_batches(
        samples: Vec<Sample>,
        num_features: usize,
        num_classes: usize,
    ) -> Result<Self, DataError> {
        for (index, s) in samples.iter().enumerate() {
            if s.features.len() != num_features {
                return Err(DataError::DimensionMismatch {
                    index,
                    expected: num_features,
                    found: s.features.len(),
                });
            }
            if let Some(feature) = s.features.iter().position(|v| !v.is_finite()) {
                return Err(DataError::NonFiniteFeature { index, feature });
            }
            if s.label >= num_classes {
                return Err(DataError::LabelOutOfRange {
                    line: index + 1,
                    label: s.label as i64,
                    min: 0,
                    max: num_classes as i64 - 1,
                });
            }
        }
        Ok(Dataset {
            samples,
            num_features,
            num_classes,
            batch_months: BTreeMap::new(),
        })
    }

    fn check_contiguous_batches(&self) -> Result<(), DataError> {
        let ids = self.batch_ids();
        for (expect, &got) in ids.iter().enumerate() {
            if got != expect {
                return Err(DataError::NonContiguousBatches { found: ids });
            }
        }
        Ok(())
    }

    /// Concatenates datasets of identical shape into one; the combined batch
    /// ids must be contiguous from 0.
    pub fn merge(parts: Vec<Dataset>) -> Result<Dataset, DataError> {
        let first = parts.first().ok_or(DataError::Empty)?;
        let (num_features, num_classes) = (first.num_features, first.num_classes);
        let mut samples = Vec::with_capacity(parts.iter().map(|p| p.len()).sum());
        let mut batch_months = BTreeMap::new();
        for p in parts {
            if p.num_features != num_features || p.num_classes != num_classes {
                return Err(DataError::ShapeMismatch {
                    message: format!(
                        "{}x{} classes vs {}x{}",
                        num_features, num_classes, p.num_features, p.num_classes
                    ),
                });
            }
            batch_months.extend(p.batch_months.iter().map(|(&k, &v)| (k, v)));
            samples.extend(p.samples);
        }
        let mut merged = Self::from_parts(samples, num_features, num_classes)?;
        merged.batch_months = batch_months;
        Ok(merged)
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Distinct batch ids in ascending order.
    pub fn batch_ids(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = self.samples.iter().map(|s| s.batch).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Number of samples per class, indexed by label.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.num_classes];
        for s in &self.samples {
            counts[s.label] += 1;
        }
        counts
    }

    /// Descriptive batch → (first month, last month) metadata.
    pub fn batch_months(&self) -> &BTreeMap<usize, (u32, u32)> {
        &self.batch_months
    }

    pub fn set_batch_months(&mut self, months: BTreeMap<usize, (u32, u32)>) {
        self.batch_months = months;
    }

    /// New dataset containing only the samples for which `keep` is true,
    /// preserving order.
    fn filtered(&self, keep: impl Fn(&Sample) -> bool) -> Dataset {
        Dataset {
            samples: self.samples.iter().filter(|s| keep(s)).cloned().collect(),
            num_features: self.num_features,
            num_classes: self.num_classes,
            batch_months: self.batch_months.clone(),
        }
    }
}

/// Parses one file in sparse libsvm format into a dataset whose samples all
/// carry the given `batch` id.
///
/// Lines look like `3 1:0.52 7:-1.4`; feature indices are one-based and
/// strictly increasing, unlisted features are 0.0, and labels run `1..=C`
/// in the file (stored zero-based). An empty reader yields an empty dataset.
///
/// The returned dataset intentionally skips the batch-contiguity invariant
/// (its one batch id is whatever the caller assigned); assemble the full
/// collection with [`Dataset::merge`].
pub fn parse_libsvm<R: BufRead>(
    reader: R,
    num_features: usize,
    num_classes: usize,
    batch: usize,
) -> Result<Dataset, DataError> {
    let mut samples = Vec::new();
    for (line_index, line) in reader.lines().enumerate() {
        let line_no = line_index + 1;
        let line = line.map_err(|source| DataError::Io {
            path: format!("<line {line_no}>"),
            source,
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut fields = trimmed.split_ascii_whitespace();
        let label_text = fields.next().expect("non-empty line has a first field");
        let raw_label: i64 = label_text.parse().map_err(|_| DataError::Malformed {
            line: line_no,
            message: format!("label {label_text:?} is not an integer"),
        })?;
        if raw_label < 1 || raw_label > num_classes as i64 {
            return Err(DataError::LabelOutOfRange {
                line: line_no,
                label: raw_label,
                min: 1,
                max: num_classes as i64,
            });
        }
        let mut features = vec![0.0; num_features];
        let mut prev_index = 0usize;
        for field in fields {
            let (index_text, value_text) =
                field.split_once(':').ok_or_else(|| DataError::Malformed {
                    line: line_no,
                    message: format!("expected index:value, found {field:?}"),
                })?;
            let index: usize = index_text.parse().map_err(|_| DataError::Malformed {
                line: line_no,
                message: format!("feature index {index_text:?} is not an integer"),
            })?;
            if index < 1 || index > num_features {
                return Err(DataError::FeatureIndexOutOfRange {
                    line: line_no,
                    index,
                    num_features,
                });
            }
            if index <= prev_index {
                return Err(DataError::Malformed {
                    line: line_no,
                    message: format!("feature indices must be strictly increasing ({index} after {prev_index})"),
                });
            }
            let value: f64 = value_text.parse().map_err(|_| DataError::Malformed {
                line: line_no,
                message: format!("feature value {value_text:?} is not a number"),
            })?;
            features[index - 1] = value;
            prev_index = index;
        }
        samples.push(Sample {
            features,
            label: (raw_label - 1) as usize,
            batch,
        });
    }
    Dataset::from_parts_unchecked_batches(samples, num_features, num_classes)
}

/// Loads a sequence of libsvm batch files as one dataset; file position in
/// the list becomes the batch id.
pub fn load_libsvm_files<P: AsRef<Path>>(
    paths: &[P],
    num_features: usize,
    num_classes: usize,
) -> Result<Dataset, DataError> {
    let mut parts = Vec::with_capacity(paths.len());
    for (batch, path) in paths.iter().enumerate() {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })?;
        parts.push(parse_libsvm(
            BufReader::new(file),
            num_features,
            num_classes,
            batch,
        )?);
    }
    Dataset::merge(parts)
}

/// Parses a dense CSV with a header row into a dataset.
///
/// `label_column` and `batch_column` name the two non-feature columns (both
/// non-negative integers; labels are zero-based here, unlike libsvm). Every
/// other column is a feature, in header order. The class count is inferred
/// as `max label + 1`.
pub fn parse_csv<R: Read>(
    reader: R,
    label_column: &str,
    batch_column: &str,
) -> Result<Dataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(reader);
    let header = rdr.headers()?.clone();

    let mut seen = std::collections::BTreeSet::new();
    for name in header.iter() {
        if !seen.insert(name) {
            return Err(DataError::DuplicateColumn {
                name: name.to_string(),
            });
        }
    }
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn {
                name: name.to_string(),
            })
    };
    let label_idx = find(label_column)?;
    let batch_idx = find(batch_column)?;
    let feature_idx: Vec<usize> = (0..header.len())
        .filter(|&i| i != label_idx && i != batch_idx)
        .collect();

    let mut samples = Vec::new();
    let mut max_label = 0usize;
    for (record_index, record) in rdr.records().enumerate() {
        // Header is line 1; the first record is line 2.
        let line_no = record_index + 2;
        let record = record?;
        if record.len() != header.len() {
            return Err(DataError::Malformed {
                line: line_no,
                message: format!(
                    "expected {} fields, found {}",
                    header.len(),
                    record.len()
                ),
            });
        }
        let parse_usize = |idx: usize, what: &str| -> Result<usize, DataError> {
            record[idx].parse().map_err(|_| DataError::Malformed {
                line: line_no,
                message: format!("{what} {:?} is not a non-negative integer", &record[idx]),
            })
        };
        let label = parse_usize(label_idx, "label")?;
        let batch = parse_usize(batch_idx, "batch")?;
        let mut features = Vec::with_capacity(feature_idx.len());
        for &idx in &feature_idx {
            let value: f64 = record[idx].parse().map_err(|_| DataError::Malformed {
                line: line_no,
                message: format!(
                    "feature {:?} value {:?} is not a number",
                    &header[idx], &record[idx]
                ),
            })?;
            features.push(value);
        }
        max_label = max_label.max(label);
        samples.push(Sample {
            features,
            label,
            batch,
        });
    }
    let num_classes = if samples.is_empty() { 0 } else { max_label + 1 };
    Dataset::from_parts(samples, feature_idx.len(), num_classes)
}

/// Writes the canonical CSV form: header `f0,...,f{D-1},label,batch`, one
/// row per sample, features printed with shortest round-trip formatting.
///
/// Parsing the output with [`parse_csv`] (columns `"label"`, `"batch"`)
/// reproduces the dataset exactly; batch-month metadata is not serialized.
pub fn serialize_csv<W: Write>(dataset: &Dataset, mut writer: W) -> Result<(), DataError> {
    let io_err = |source: std::io::Error| DataError::Io {
        path: "<csv output>".to_string(),
        source,
    };
    let mut header: Vec<String> = (0..dataset.num_features()).map(|i| format!("f{i}")).collect();
    header.push("label".to_string());
    header.push("batch".to_string());
    writeln!(writer, "{}", header.join(",")).map_err(io_err)?;
    for s in dataset.samples() {
        let mut row = String::new();
        for v in &s.features {
            row.push_str(&format!("{v}"));
            row.push(',');
        }
        row.push_str(&format!("{},{}", s.label, s.batch));
        writeln!(writer, "{row}").map_err(io_err)?;
    }
    Ok(())
}

/// Per-feature affine transform `x' = (x - mean) / deviation` with
/// statistics taken from a training set.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    mean: Vec<f64>,
    deviation: Vec<f64>,
}

impl Standardizer {
    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Per-feature scale; always strictly positive (constant features get
    /// deviation 1 so they map to exactly 0).
    pub fn deviation(&self) -> &[f64] {
        &self.deviation
    }
}

/// Computes per-feature mean and population standard deviation.
pub fn fit_standardizer(dataset: &Dataset) -> Result<Standardizer, DataError> {
    if dataset.is_empty() {
        return Err(DataError::Empty);
    }
    let d = dataset.num_features();
    let n = dataset.len() as f64;
    let mut mean = vec![0.0; d];
    for s in dataset.samples() {
        for (m, &x) in mean.iter_mut().zip(&s.features) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut variance = vec![0.0; d];
    for s in dataset.samples() {
        for ((v, &m), &x) in variance.iter_mut().zip(&mean).zip(&s.features) {
            let diff = x - m;
            *v += diff * diff;
        }
    }
    let deviation = variance
        .into_iter()
        .map(|v| {
            let sd = (v / n).sqrt();
            if sd == 0.0 {
                1.0
            } else {
                sd
            }
        })
        .collect();
    Ok(Standardizer { mean, deviation })
}

/// Applies the transform to every sample, returning a new dataset.
pub fn apply_standardizer(
    standardizer: &Standardizer,
    dataset: &Dataset,
) -> Result<Dataset, DataError> {
    if standardizer.mean.len() != dataset.num_features() {
        return Err(DataError::DimensionMismatch {
            index: 0,
            expected: standardizer.mean.len(),
            found: dataset.num_features(),
        });
    }
    let samples = dataset
        .samples()
        .iter()
        .map(|s| Sample {
            features: s
                .features
                .iter()
                .zip(&standardizer.mean)
                .zip(&standardizer.deviation)
                .map(|((&x, &m), &sd)| (x - m) / sd)
                .collect(),
            label: s.label,
            batch: s.batch,
        })
        .collect();
    Ok(Dataset {
        samples,
        num_features: dataset.num_features(),
        num_classes: dataset.num_classes(),
        batch_months: dataset.batch_months.clone(),
    })
}

/// Output of [`temporal_split`]: a shuffled train/validation division of the
/// early batches plus the later batches held out whole, in batch order.
#[derive(Debug, Clone)]
pub struct TemporalSplit {
    pub train: Dataset,
    pub val: Dataset,
    /// One dataset per held-out batch, ascending by batch id, with the
    /// original within-batch sample order preserved.
    pub test_batches: Vec<Dataset>,
}

/// Splits a dataset in time: samples from `train_batches` are shuffled with
/// the seeded generator and divided `fraction` / `1 - fraction` into train
/// and validation; every other batch becomes one unshuffled test set.
///
/// The train set receives `ceil(fraction * n)` samples. `fraction` must lie
/// strictly inside (0, 1) and every requested batch must be present.
pub fn temporal_split(
    dataset: &Dataset,
    train_batches: &[usize],
    fraction: f64,
    seed: u64,
) -> Result<TemporalSplit, DataError> {
    if train_batches.is_empty() {
        return Err(DataError::NoTrainBatches);
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(DataError::InvalidFraction(fraction));
    }
    let present = dataset.batch_ids();
    for &b in train_batches {
        if !present.contains(&b) {
            return Err(DataError::UnknownBatch {
                batch: b,
                present: present.clone(),
            });
        }
    }
    let in_train_batches = |s: &Sample| train_batches.contains(&s.batch);

    let mut pool_indices: Vec<usize> = dataset
        .samples()
        .iter()
        .enumerate()
        .filter(|(_, s)| in_train_batches(s))
        .map(|(i, _)| i)
        .collect();
    pool_indices.shuffle(&mut seeds::rng(seed, &[seeds::tag::SPLIT]));

    let train_len = (fraction * pool_indices.len() as f64).ceil() as usize;
    let make = |indices: &[usize]| Dataset {
        samples: indices
            .iter()
            .map(|&i| dataset.samples()[i].clone())
            .collect(),
        num_features: dataset.num_features(),
        num_classes: dataset.num_classes(),
        batch_months: dataset.batch_months.clone(),
    };
    let train = make(&pool_indices[..train_len]);
    let val = make(&pool_indices[train_len..]);

    let test_batches = present
        .iter()
        .filter(|b| !train_batches.contains(b))
        .map(|&b| dataset.filtered(|s| s.batch == b))
        .collect();

    Ok(TemporalSplit {
        train,
        val,
        test_batches,
    })
}
