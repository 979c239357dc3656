//! Multi-view dataset model.
//!
//! All matrices are sample-major: row `i` of every view describes sample `i`.

mod io;
mod synthetic;

pub use io::{
    load_manifest, read_f32le, read_labels, read_matrix_csv, write_dataset, write_f32le,
    write_labels, write_matrix_csv, Manifest, MatrixFormat, ViewDescriptor,
};
pub use synthetic::{generate_synthetic, SyntheticSpec, ViewSpec};

use ndarray::{concatenate, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

/// One feature representation of the samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewMatrix {
    name: String,
    data: Array2<f64>,
}

impl ViewMatrix {
    pub fn new(name: impl Into<String>, data: Array2<f64>) -> Result<Self> {
        let name = name.into();
        if data.ncols() == 0 {
            return Err(Error::Shape(format!("view `{name}` has no feature columns")));
        }
        if let Some(((row, col), _)) = data.indexed_iter().find(|(_, x)| !x.is_finite()) {
            return Err(Error::NonFinite { view: name, row, col });
        }
        Ok(Self { name, data })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn data(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn into_data(self) -> Array2<f64> {
        self.data
    }

    /// Column-wise z-score. Constant columns are centred and left at zero.
    pub fn standardized(&self) -> ViewMatrix {
        let n = self.n() as f64;
        let mut data = self.data.clone();
        for mut col in data.axis_iter_mut(Axis(1)) {
            let mean = col.sum() / n;
            let var = col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
            let sd = var.sqrt();
            if sd > 0.0 {
                col.mapv_inplace(|x| (x - mean) / sd);
            } else {
                col.fill(0.0);
            }
        }
        ViewMatrix {
            name: self.name.clone(),
            data,
        }
    }
}

/// `V` views over the same `n` samples with optional ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewDataset {
    views: Vec<ViewMatrix>,
    labels: Option<Vec<usize>>,
}

impl MultiViewDataset {
    pub fn new(views: Vec<ViewMatrix>, labels: Option<Vec<usize>>) -> Result<Self> {
        let Some(first) = views.first() else {
            return Err(Error::Shape("a dataset needs at least one view".into()));
        };
        let n = first.n();
        if n == 0 {
            return Err(Error::Shape("a dataset needs at least one sample".into()));
        }
        for v in &views {
            if v.n() != n {
                return Err(Error::Shape(format!(
                    "view `{}` has {} rows, expected {n}",
                    v.name(),
                    v.n()
                )));
            }
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::Shape(format!("{} labels for {n} samples", l.len())));
            }
        }
        Ok(Self { views, labels })
    }

    pub fn n(&self) -> usize {
        self.views[0].n()
    }

    pub fn num_views(&self) -> usize {
        self.views.len()
    }

    pub fn views(&self) -> &[ViewMatrix] {
        &self.views
    }

    pub fn view(&self, v: usize) -> &ViewMatrix {
        &self.views[v]
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.views.iter().map(ViewMatrix::dim).collect()
    }

    /// Keep only the listed views, in the listed order.
    pub fn select_views(&self, indices: &[usize]) -> Result<Self> {
        let views = indices
            .iter()
            .map(|&v| {
                self.views.get(v).cloned().ok_or_else(|| {
                    Error::InvalidParameter(format!(
                        "view index {v} out of range for {} views",
                        self.num_views()
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(views, self.labels.clone())
    }

    /// Look a view up by name or by 1-based position.
    pub fn resolve_view(&self, key: &str) -> Result<usize> {
        if let Some(v) = self.views.iter().position(|v| v.name() == key) {
            return Ok(v);
        }
        match key.parse::<usize>() {
            Ok(i) if (1..=self.num_views()).contains(&i) => Ok(i - 1),
            _ => Err(Error::InvalidParameter(format!("unknown view `{key}`"))),
        }
    }

    /// Single-view dataset holding the concatenated features.
    pub fn concatenated(&self) -> Self {
        let x = concatenate_views(self);
        Self {
            views: vec![x],
            labels: self.labels.clone(),
        }
    }

    pub fn standardized(&self) -> Self {
        Self {
            views: self.views.iter().map(ViewMatrix::standardized).collect(),
            labels: self.labels.clone(),
        }
    }
}

/// Stack all views column-wise, in view order.
pub fn concatenate_views(ds: &MultiViewDataset) -> ViewMatrix {
    if ds.num_views() == 1 {
        return ds.views[0].clone();
    }
    let parts: Vec<_> = ds.views.iter().map(|v| v.data.view()).collect();
    let data = concatenate(Axis(1), &parts).expect("views share the row count");
    let name = ds
        .views
        .iter()
        .map(ViewMatrix::name)
        .collect::<Vec<_>>()
        .join("+");
    ViewMatrix { name, data }
}
