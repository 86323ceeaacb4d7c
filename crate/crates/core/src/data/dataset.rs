use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::{stream, stream_rng};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub view_names: Vec<String>,
    pub provenance: String,
    /// Free-form notes recorded by constructors (e.g. fallbacks taken).
    #[serde(default)]
    pub notes: Vec<String>,
}

/// `M` aligned views sharing a sample count, with optional labels.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewDataset {
    views: Vec<Matrix>,
    labels: Option<Vec<u32>>,
    pub meta: DatasetMeta,
}

impl MultiViewDataset {
    pub fn new(views: Vec<Matrix>, labels: Option<Vec<u32>>) -> Result<Self> {
        if views.is_empty() {
            return Err(Error::ShapeMismatch("a dataset needs at least one view".into()));
        }
        let n = views[0].rows();
        if let Some(m) = views.iter().position(|v| v.rows() != n) {
            return Err(Error::ShapeMismatch(format!("view {m} has {} samples, view 0 has {n}", views[m].rows())));
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::ShapeMismatch(format!("{} labels for {n} samples", l.len())));
            }
        }
        let view_names = (1..=views.len()).map(|m| format!("view{m}")).collect();
        Ok(Self { views, labels, meta: DatasetMeta { view_names, ..Default::default() } })
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.views.len() {
            return Err(Error::ShapeMismatch(format!("{} names for {} views", names.len(), self.views.len())));
        }
        self.meta.view_names = names;
        Ok(self)
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.meta.provenance = provenance.into();
        self
    }

    pub fn n_samples(&self) -> usize {
        self.views[0].rows()
    }

    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.views.iter().map(Matrix::cols).collect()
    }

    pub fn views(&self) -> &[Matrix] {
        &self.views
    }

    pub fn view(&self, m: usize) -> &Matrix {
        &self.views[m]
    }

    pub fn labels(&self) -> Option<&[u32]> {
        self.labels.as_deref()
    }

    pub fn into_views(self) -> Vec<Matrix> {
        self.views
    }

    /// Rows `indices` of every view (and label vector).
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            views: self.views.iter().map(|v| v.select_rows(indices)).collect(),
            labels: self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect()),
            meta: self.meta.clone(),
        }
    }
}

/// Per-view feature standardization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    /// Features with zero variance: centred only, scale 1.
    pub constant: Vec<bool>,
}

/// Centre every feature and divide by its population standard deviation.
pub fn standardize(data: &MultiViewDataset) -> Result<(MultiViewDataset, Vec<Standardization>)> {
    let n = data.n_samples();
    if n < 2 {
        return Err(Error::ShapeMismatch("standardize needs at least two samples".into()));
    }
    let mut out = data.clone();
    let mut stats = Vec::with_capacity(data.n_views());
    for view in &mut out.views {
        let mean = view.column_means();
        let mut var = vec![0.0; view.cols()];
        for r in 0..n {
            for ((v, x), m) in var.iter_mut().zip(view.row(r)).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let mut scale = Vec::with_capacity(var.len());
        let mut constant = Vec::with_capacity(var.len());
        for v in var {
            let sd = (v / n as f64).sqrt();
            let flat = sd.is_nan() || sd <= 0.0;
            constant.push(flat);
            scale.push(if flat { 1.0 } else { sd });
        }
        for r in 0..n {
            for ((x, m), s) in view.row_mut(r).iter_mut().zip(&mean).zip(&scale) {
                *x = (*x - m) / s;
            }
        }
        stats.push(Standardization { mean, scale, constant });
    }
    Ok((out, stats))
}

/// Train / validation / test partition.
#[derive(Debug, Clone)]
pub struct Split {
    pub train: MultiViewDataset,
    pub validation: Option<MultiViewDataset>,
    pub test: Option<MultiViewDataset>,
    /// Row indices of each part in the source dataset.
    pub indices: Vec<Vec<usize>>,
}

/// Seeded disjoint row partition into one to three parts.
///
/// Part `i` receives `round(fractions[i] · N)` rows; when the fractions sum to
/// one the last part takes whatever remains so sizes sum to `N`.
pub fn split(data: &MultiViewDataset, fractions: &[f64], seed: u64) -> Result<Split> {
    if fractions.is_empty() || fractions.len() > 3 {
        return Err(Error::InvalidSplit("between one and three fractions are required".into()));
    }
    if fractions.iter().any(|f| !(*f > 0.0 && f.is_finite())) {
        return Err(Error::InvalidSplit("fractions must be positive".into()));
    }
    let total: f64 = fractions.iter().sum();
    if total > 1.0 + 1e-12 {
        return Err(Error::InvalidSplit(format!("fractions sum to {total} > 1")));
    }
    let n = data.n_samples();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream_rng(seed, stream::SPLIT));

    let exhaustive = (total - 1.0).abs() <= 1e-12;
    let mut sizes: Vec<usize> = fractions.iter().map(|f| (f * n as f64).round() as usize).collect();
    if exhaustive {
        let head: usize = sizes[..sizes.len() - 1].iter().sum();
        if head > n {
            return Err(Error::InvalidSplit("rounded split sizes exceed the sample count".into()));
        }
        *sizes.last_mut().unwrap() = n - head;
    }
    if sizes.iter().sum::<usize>() > n {
        return Err(Error::InvalidSplit("rounded split sizes exceed the sample count".into()));
    }
    if let Some(i) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::InvalidSplit(format!("part {i} would be empty")));
    }

    let mut indices = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for s in &sizes {
        indices.push(order[start..start + s].to_vec());
        start += s;
    }
    let mut parts = indices.iter().map(|idx| data.select(idx));
    Ok(Split { train: parts.next().unwrap(), validation: parts.next(), test: parts.next(), indices })
}
