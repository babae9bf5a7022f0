//! Labeled tabular data: the concentric-hypersphere benchmark, min-max
//! scaling and CSV import/export (`f0,...,f{d-1},label`).

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
    pub split: Split,
}

impl Dataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<usize>, n_classes: usize, split: Split) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::LengthMismatch {
                what: "labels",
                expected: features.len(),
                found: labels.len(),
            });
        }
        if let Some(first) = features.first() {
            let d = first.len();
            if let Some(i) = features.iter().position(|r| r.len() != d) {
                return Err(Error::Shape(format!("row {i} has {} features, expected {d}", features[i].len())));
            }
        }
        if features.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Shape("non-finite feature value".into()));
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::LabelOutOfRange { label, n_classes });
        }
        Ok(Self {
            features,
            labels,
            n_classes,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn d_inp(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn class_histogram(&self) -> BTreeMap<usize, usize> {
        let mut h = BTreeMap::new();
        for &l in &self.labels {
            *h.entry(l).or_insert(0) += 1;
        }
        h
    }

    /// First `n` rows.
    pub fn head(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        Dataset {
            features: self.features[..n].to_vec(),
            labels: self.labels[..n].to_vec(),
            n_classes: self.n_classes,
            split: self.split,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypersphereConfig {
    pub d_ambient: usize,
    pub r_mean_a: f64,
    pub r_mean_b: f64,
    pub sigma_a: f64,
    pub sigma_b: f64,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub seed: u64,
}

impl HypersphereConfig {
    /// Radii 0.73 vs 0.78 with σ = 0.05.
    pub fn one_sigma(seed: u64) -> Self {
        Self {
            d_ambient: 6,
            r_mean_a: 0.73,
            r_mean_b: 0.78,
            sigma_a: 0.05,
            sigma_b: 0.05,
            n_train: 30_000,
            n_val: 15_000,
            n_test: 100_000,
            seed,
        }
    }

    /// Radii 0.72 vs 0.78 with σ = 0.02.
    pub fn three_sigma(seed: u64) -> Self {
        Self {
            r_mean_a: 0.72,
            r_mean_b: 0.78,
            sigma_a: 0.02,
            sigma_b: 0.02,
            ..Self::one_sigma(seed)
        }
    }

    pub fn scenario(name: &str, seed: u64) -> Result<Self> {
        match name {
            "sphere-1sigma" => Ok(Self::one_sigma(seed)),
            "sphere-3sigma" => Ok(Self::three_sigma(seed)),
            other => Err(Error::Config(format!("unknown hypersphere scenario {other:?}"))),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.d_ambient == 0 {
            return Err(Error::Config("ambient dimension must be positive".into()));
        }
        for v in [self.r_mean_a, self.r_mean_b, self.sigma_a, self.sigma_b] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config("radii and widths must be positive".into()));
            }
        }
        for n in [self.n_train, self.n_val, self.n_test] {
            if n == 0 || n % 2 != 0 {
                return Err(Error::Config(format!("split size {n} must be positive and even")));
            }
        }
        Ok(())
    }
}

/// Uniform direction on `S^{d-1}` from a normalized Gaussian vector.
pub fn unit_direction<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 0.0 {
            return v.into_iter().map(|a| a / norm).collect();
        }
    }
}

fn positive_draw<R: Rng>(rng: &mut R, dist: &Normal<f64>) -> f64 {
    loop {
        let r = dist.sample(rng);
        if r > 0.0 {
            return r;
        }
    }
}

/// Train, validation and test splits of the two-shell benchmark. Class A
/// (label 0) and class B (label 1) are equally represented in every split.
/// Split `k` draws from ChaCha stream `k` of the seed, so splits never share draws.
pub fn gen_hypersphere(cfg: &HypersphereConfig) -> Result<(Dataset, Dataset, Dataset)> {
    cfg.validate()?;
    let dist_a = Normal::new(cfg.r_mean_a, cfg.sigma_a).map_err(|e| Error::Config(e.to_string()))?;
    let dist_b = Normal::new(cfg.r_mean_b, cfg.sigma_b).map_err(|e| Error::Config(e.to_string()))?;
    let make = |stream: u64, n: usize, split: Split| -> Result<Dataset> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(stream);
        let mut labels: Vec<usize> = (0..n).map(|i| usize::from(i >= n / 2)).collect();
        labels.shuffle(&mut rng);
        let features = labels
            .iter()
            .map(|&l| {
                let dir = unit_direction(&mut rng, cfg.d_ambient);
                let r = positive_draw(&mut rng, if l == 0 { &dist_a } else { &dist_b });
                dir.into_iter().map(|v| v * r).collect()
            })
            .collect();
        Dataset::new(features, labels, 2, split)
    };
    Ok((
        make(0, cfg.n_train, Split::Train)?,
        make(1, cfg.n_val, Split::Val)?,
        make(2, cfg.n_test, Split::Test)?,
    ))
}

/// Per-feature affine map sending the fitted `[min, max]` onto `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(data: &Dataset) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptySample);
        }
        let d = data.d_inp();
        let mut min = vec![f64::INFINITY; d];
        let mut max = vec![f64::NEG_INFINITY; d];
        for row in &data.features {
            for (k, &v) in row.iter().enumerate() {
                min[k] = min[k].min(v);
                max[k] = max[k].max(v);
            }
        }
        Ok(Self { min, max })
    }

    fn scale_value(&self, k: usize, v: f64) -> f64 {
        let span = self.max[k] - self.min[k];
        if span == 0.0 {
            0.0
        } else {
            2.0 * (v - self.min[k]) / span - 1.0
        }
    }

    pub fn transform(&self, data: &Dataset) -> Result<Dataset> {
        if data.d_inp() != self.min.len() && !data.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: self.min.len(),
                found: data.d_inp(),
            });
        }
        let features = data
            .features
            .iter()
            .map(|row| row.iter().enumerate().map(|(k, &v)| self.scale_value(k, v)).collect())
            .collect();
        Ok(Dataset {
            features,
            ..data.clone()
        })
    }

    /// Inverse map; constant columns come back as their fitted value.
    pub fn inverse_transform(&self, data: &Dataset) -> Result<Dataset> {
        let features = data
            .features
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .map(|(k, &v)| self.min[k] + 0.5 * (v + 1.0) * (self.max[k] - self.min[k]))
                    .collect()
            })
            .collect();
        Ok(Dataset {
            features,
            ..data.clone()
        })
    }
}

/// Fits on `train` and applies the same map to every split.
pub fn minmax_scale(train: &Dataset, others: &[&Dataset]) -> Result<(Dataset, Vec<Dataset>, MinMaxScaler)> {
    let scaler = MinMaxScaler::fit(train)?;
    let scaled_train = scaler.transform(train)?;
    let scaled_others = others.iter().map(|d| scaler.transform(d)).collect::<Result<_>>()?;
    Ok((scaled_train, scaled_others, scaler))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub label_column: String,
    /// Number of classes; inferred as `max label + 1` when absent.
    pub n_classes: Option<usize>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            label_column: "label".into(),
            n_classes: None,
        }
    }
}

pub fn write_csv<W: Write>(writer: W, data: &Dataset) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    let mut header: Vec<String> = (0..data.d_inp()).map(|k| format!("f{k}")).collect();
    header.push("label".into());
    w.write_record(&header)?;
    for (row, label) in data.features.iter().zip(&data.labels) {
        let mut record: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        record.push(label.to_string());
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(std::io::BufWriter::new(file), data)
}

pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema, split: Split) -> Result<Dataset> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = r.headers()?.clone();
    let label_col = headers
        .iter()
        .position(|h| h.trim() == schema.label_column)
        .ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("missing label column {:?}", schema.label_column),
        })?;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for record in r.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != headers.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} cells, found {}", headers.len(), record.len()),
            });
        }
        let mut row = Vec::with_capacity(headers.len() - 1);
        for (k, cell) in record.iter().enumerate() {
            let cell = cell.trim();
            if k == label_col {
                let label: usize = cell.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("label {cell:?} is not a class index"),
                })?;
                if let Some(n) = schema.n_classes {
                    if label >= n {
                        return Err(Error::Parse {
                            line,
                            message: format!("unknown label {label} for {n} classes"),
                        });
                    }
                }
                labels.push(label);
            } else {
                let v: f64 = cell.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("non-numeric cell {cell:?} in column {:?}", &headers[k]),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        line,
                        message: format!("non-finite cell {cell:?} in column {:?}", &headers[k]),
                    });
                }
                row.push(v);
            }
        }
        features.push(row);
    }
    let n_classes = schema
        .n_classes
        .unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1));
    Dataset::new(features, labels, n_classes, split)
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema, split: Split) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    read_csv(std::io::BufReader::new(file), schema, split)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg(seed: u64) -> HypersphereConfig {
        HypersphereConfig {
            n_train: 200,
            n_val: 100,
            n_test: 300,
            ..HypersphereConfig::three_sigma(seed)
        }
    }

    #[test]
    fn directions_are_unit() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let v = unit_direction(&mut rng, 6);
            let n2: f64 = v.iter().map(|a| a * a).sum();
            assert!((n2 - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn splits_are_balanced_and_deterministic() {
        let (tr, va, te) = gen_hypersphere(&small_cfg(7)).unwrap();
        assert_eq!(tr.class_histogram(), BTreeMap::from([(0, 100), (1, 100)]));
        assert_eq!(va.class_histogram(), BTreeMap::from([(0, 50), (1, 50)]));
        assert_eq!(te.len(), 300);
        let (tr2, _, _) = gen_hypersphere(&small_cfg(7)).unwrap();
        assert_eq!(tr, tr2);
        let (tr3, _, _) = gen_hypersphere(&small_cfg(8)).unwrap();
        assert_ne!(tr, tr3);
        assert!(tr.features.iter().all(|r| !va.features.contains(r)));
    }

    #[test]
    fn rejects_odd_split() {
        let cfg = HypersphereConfig {
            n_train: 3,
            ..small_cfg(1)
        };
        assert!(gen_hypersphere(&cfg).is_err());
    }

    #[test]
    fn minmax_examples() {
        let d = Dataset::new(vec![vec![0.0, 3.0], vec![5.0, 3.0], vec![10.0, 3.0]], vec![0, 1, 0], 2, Split::Train).unwrap();
        let (s, others, scaler) = minmax_scale(&d, &[]).unwrap();
        assert!(others.is_empty());
        let col: Vec<f64> = s.features.iter().map(|r| r[0]).collect();
        assert_eq!(col, vec![-1.0, 0.0, 1.0]);
        assert!(s.features.iter().all(|r| r[1] == 0.0));
        let outside = Dataset::new(vec![vec![20.0, 3.0]], vec![0], 2, Split::Test).unwrap();
        assert_eq!(scaler.transform(&outside).unwrap().features[0][0], 3.0);
    }

    #[test]
    fn csv_examples() {
        let text = "f0,f1,label\n0.5,1.5,0\n-2,3e-1,1\n1,1,1\n";
        let d = read_csv(text.as_bytes(), &CsvSchema::default(), Split::Other).unwrap();
        assert_eq!(d.features, vec![vec![0.5, 1.5], vec![-2.0, 0.3], vec![1.0, 1.0]]);
        assert_eq!(d.n_classes, 2);

        let bad = "f0,label\n0.5,0\nabc,1\n";
        match read_csv(bad.as_bytes(), &CsvSchema::default(), Split::Other) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(read_csv("f0,label\nNaN,0\n".as_bytes(), &CsvSchema::default(), Split::Other).is_err());
        let schema = CsvSchema {
            n_classes: Some(2),
            ..CsvSchema::default()
        };
        assert!(read_csv("f0,label\n1,5\n".as_bytes(), &schema, Split::Other).is_err());
        assert!(read_csv("f0,target\n1,0\n".as_bytes(), &CsvSchema::default(), Split::Other).is_err());

        let h = read_csv("f0,label\n1,0\n2,1\n3,1\n4,0\n".as_bytes(), &CsvSchema::default(), Split::Other).unwrap();
        assert_eq!(h.class_histogram(), BTreeMap::from([(0, 2), (1, 2)]));
    }
}
