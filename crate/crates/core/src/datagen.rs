//! Long-tailed embedding datasets: synthetic generation, CSV ingestion and
//! two-view augmentation.
//!
//! Data file: CSV with header `id,label,is_labeled,f0,...,f{d-1}`.
//! Manifest: JSON `{"data": path, "C": int, "d": int, "known_classes": [ints]}`
//! where a relative `data` path resolves against the manifest's directory.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::SplitSpec;
use crate::error::{Error, Result};
use crate::linalg::{normalize_in_place, Matrix};
use crate::rng::RngService;

/// Points with ground-truth labels, a labeled flag per row, and the
/// known/unknown class partition. Labels of unlabeled rows are for
/// evaluation only.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingDataset {
    pub ids: Vec<u64>,
    pub points: Matrix,
    pub labels: Vec<usize>,
    pub is_labeled: Vec<bool>,
    /// Sorted ascending.
    pub known_classes: Vec<usize>,
    /// Sorted ascending.
    pub unknown_classes: Vec<usize>,
    pub num_classes: usize,
}

impl EmbeddingDataset {
    /// Checks shapes and the class-partition invariants.
    pub fn new(
        ids: Vec<u64>,
        points: Matrix,
        labels: Vec<usize>,
        is_labeled: Vec<bool>,
        known_classes: Vec<usize>,
        num_classes: usize,
    ) -> Result<Self> {
        let n = points.rows();
        if ids.len() != n || labels.len() != n || is_labeled.len() != n {
            return Err(Error::invalid("dataset", "ids, labels and flags must match the row count"));
        }
        let known: BTreeSet<usize> = known_classes.iter().copied().collect();
        if known.len() != known_classes.len() {
            return Err(Error::invalid("known_classes", "duplicate class id"));
        }
        if let Some(&c) = known.iter().find(|&&c| c >= num_classes) {
            return Err(Error::invalid("known_classes", format!("class id {c} >= C = {num_classes}")));
        }
        if known.is_empty() || known.len() >= num_classes {
            return Err(Error::invalid("known_classes", "need at least one known and one unknown class"));
        }
        let mut labeled_per_class = vec![0usize; num_classes];
        for (row, (&label, &lab)) in labels.iter().zip(&is_labeled).enumerate() {
            if label >= num_classes {
                return Err(Error::invalid("label", format!("row {row}: class id {label} >= C = {num_classes}")));
            }
            if lab {
                if !known.contains(&label) {
                    return Err(Error::LabeledUnknownClass { row, label });
                }
                labeled_per_class[label] += 1;
            }
        }
        if let Some(&c) = known.iter().find(|&&c| labeled_per_class[c] == 0) {
            return Err(Error::invalid("dataset", format!("known class {c} has no labeled rows")));
        }
        let unknown_classes = (0..num_classes).filter(|c| !known.contains(c)).collect();
        Ok(Self {
            ids,
            points,
            labels,
            is_labeled,
            known_classes: known.into_iter().collect(),
            unknown_classes,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    pub fn num_known(&self) -> usize {
        self.known_classes.len()
    }

    pub fn is_known_class(&self, c: usize) -> bool {
        self.known_classes.binary_search(&c).is_ok()
    }

    pub fn unlabeled_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.is_labeled[i]).collect()
    }

    pub fn labeled_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_labeled[i]).collect()
    }

    /// The model's class order: known classes first, then unknown, each
    /// ascending. Entry `k` is the dataset class id of model slot `k`.
    pub fn class_order(&self) -> Vec<usize> {
        self.known_classes.iter().chain(&self.unknown_classes).copied().collect()
    }

    /// Inverse of [`class_order`](Self::class_order): dataset class id to slot.
    pub fn class_slots(&self) -> Vec<usize> {
        let mut slots = vec![0; self.num_classes];
        for (slot, c) in self.class_order().into_iter().enumerate() {
            slots[c] = slot;
        }
        slots
    }

    /// Per-class count of unlabeled rows.
    pub fn unlabeled_histogram(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for i in self.unlabeled_indices() {
            counts[self.labels[i]] += 1;
        }
        counts
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`, returning the manifest path.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<PathBuf> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let data_name = format!("{stem}.csv");
        let data_path = dir.join(&data_name);
        let mut buf = String::with_capacity(self.len() * (self.dim() * 20 + 16));
        buf.push_str("id,label,is_labeled");
        for f in 0..self.dim() {
            buf.push_str(&format!(",f{f}"));
        }
        buf.push('\n');
        for i in 0..self.len() {
            buf.push_str(&format!("{},{},{}", self.ids[i], self.labels[i], u8::from(self.is_labeled[i])));
            for v in self.points.row(i) {
                buf.push(',');
                buf.push_str(&v.to_string());
            }
            buf.push('\n');
        }
        let mut f = fs::File::create(&data_path).map_err(|e| Error::io(&data_path, e))?;
        f.write_all(buf.as_bytes()).map_err(|e| Error::io(&data_path, e))?;

        let manifest = Manifest {
            data: data_name,
            num_classes: self.num_classes,
            dim: self.dim(),
            known_classes: self.known_classes.clone(),
        };
        let manifest_path = dir.join(format!("{stem}.json"));
        let text = serde_json::to_string_pretty(&manifest)?;
        fs::write(&manifest_path, text).map_err(|e| Error::io(&manifest_path, e))?;
        Ok(manifest_path)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    data: String,
    #[serde(rename = "C")]
    num_classes: usize,
    #[serde(rename = "d")]
    dim: usize,
    known_classes: Vec<usize>,
}

/// Reads a manifest and its CSV data file.
pub fn load_embeddings(manifest_path: &Path) -> Result<EmbeddingDataset> {
    let text = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    let data_path = {
        let p = PathBuf::from(&manifest.data);
        if p.is_absolute() {
            p
        } else {
            manifest_path.parent().unwrap_or_else(|| Path::new(".")).join(p)
        }
    };
    let d = manifest.dim;
    let shown = data_path.display().to_string();
    let malformed = |line: usize, reason: String| Error::Malformed {
        path: shown.clone(),
        line,
        reason,
    };

    let file = fs::File::open(&data_path).map_err(|e| Error::io(&data_path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header = reader.headers().map_err(|e| malformed(1, e.to_string()))?.clone();
    let expected: Vec<String> = ["id", "label", "is_labeled"]
        .iter()
        .map(|s| s.to_string())
        .chain((0..d).map(|f| format!("f{f}")))
        .collect();
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(malformed(1, format!("header must be id,label,is_labeled,f0..f{}", d.saturating_sub(1))));
    }

    let mut ids = Vec::new();
    let mut labels = Vec::new();
    let mut flags = Vec::new();
    let mut values = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| malformed(line, e.to_string()))?;
        if record.len() != d + 3 {
            return Err(malformed(line, format!("expected {} fields, got {}", d + 3, record.len())));
        }
        ids.push(record[0].trim().parse::<u64>().map_err(|_| malformed(line, format!("bad id {:?}", &record[0])))?);
        let label: usize = record[1]
            .trim()
            .parse()
            .map_err(|_| malformed(line, format!("bad label {:?}", &record[1])))?;
        if label >= manifest.num_classes {
            return Err(malformed(line, format!("class id {label} >= C = {}", manifest.num_classes)));
        }
        labels.push(label);
        flags.push(match record[2].trim() {
            "0" => false,
            "1" => true,
            other => return Err(malformed(line, format!("is_labeled must be 0 or 1, got {other:?}"))),
        });
        for f in record.iter().skip(3) {
            let v: f64 = f.trim().parse().map_err(|_| malformed(line, format!("bad feature {f:?}")))?;
            if !v.is_finite() {
                return Err(malformed(line, format!("non-finite feature {f:?}")));
            }
            values.push(v);
        }
    }
    let n = labels.len();
    let points = Matrix::from_vec(n, d, values)?;
    EmbeddingDataset::new(ids, points, labels, flags, manifest.known_classes, manifest.num_classes)
}

/// Gaussian mixture with class means uniform on the sphere of radius `sep`
/// and unit isotropic covariance. Known classes are `0..num_known`.
pub fn generate_mixture(spec: &SplitSpec, sep: f64, rng: &mut RngService) -> Result<EmbeddingDataset> {
    spec.validate()?;
    if !(sep >= 0.0 && sep.is_finite()) {
        return Err(Error::invalid("sep", format!("must be >= 0, got {sep}")));
    }
    let d = spec.dim;
    let c = spec.num_classes;
    let mut means = Matrix::zeros(c, d);
    for k in 0..c {
        let row = means.row_mut(k);
        loop {
            row.iter_mut().for_each(|v| *v = rng.normal());
            if normalize_in_place(row, 1e-12) >= 1e-12 {
                break;
            }
        }
        row.iter_mut().for_each(|v| *v *= sep);
    }

    let n_known = spec.samples_per_known;
    let n_unknown = spec.samples_per_unknown();
    let n_labeled = spec.labeled_per_known();
    let total = spec.num_known * n_known + spec.num_unknown() * n_unknown;
    let mut values = Vec::with_capacity(total * d);
    let mut labels = Vec::with_capacity(total);
    let mut flags = Vec::with_capacity(total);
    for k in 0..c {
        let known = k < spec.num_known;
        let count = if known { n_known } else { n_unknown };
        let mut class_flags = vec![false; count];
        if known {
            let mut order: Vec<usize> = (0..count).collect();
            rng.shuffle(&mut order);
            for &i in &order[..n_labeled] {
                class_flags[i] = true;
            }
        }
        for flag in class_flags {
            values.extend(means.row(k).iter().map(|m| m + rng.normal()));
            labels.push(k);
            flags.push(flag);
        }
    }
    let points = Matrix::from_vec(total, d, values)?;
    EmbeddingDataset::new((0..total as u64).collect(), points, labels, flags, (0..spec.num_known).collect(), c)
}

/// Two augmented views of a batch of rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewPair {
    pub view_a: Matrix,
    pub view_b: Matrix,
    /// Dataset row each view row derives from.
    pub source: Vec<usize>,
}

fn augment(row: &[f64], noise_sigma: f64, drop_prob: f64, rng: &mut RngService, out: &mut [f64]) {
    for (o, &x) in out.iter_mut().zip(row) {
        let noisy = if noise_sigma > 0.0 { x + noise_sigma * rng.normal() } else { x };
        *o = if drop_prob > 0.0 && rng.uniform() < drop_prob { 0.0 } else { noisy };
    }
}

/// Each view is the point plus `N(0, noise_sigma^2)` noise with every
/// coordinate independently zeroed with probability `drop_prob`.
pub fn make_views(
    data: &EmbeddingDataset,
    batch: &[usize],
    noise_sigma: f64,
    drop_prob: f64,
    rng: &mut RngService,
) -> Result<ViewPair> {
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::invalid("noise_sigma", format!("must be >= 0, got {noise_sigma}")));
    }
    if !(0.0..1.0).contains(&drop_prob) {
        return Err(Error::invalid("drop_prob", format!("must lie in [0, 1), got {drop_prob}")));
    }
    let d = data.dim();
    let mut view_a = Matrix::zeros(batch.len(), d);
    let mut view_b = Matrix::zeros(batch.len(), d);
    for (r, &src) in batch.iter().enumerate() {
        let row = data.points.row(src);
        augment(row, noise_sigma, drop_prob, rng, view_a.row_mut(r));
        augment(row, noise_sigma, drop_prob, rng, view_b.row_mut(r));
    }
    Ok(ViewPair {
        view_a,
        view_b,
        source: batch.to_vec(),
    })
}
