//! Multi-subject time-series datasets `X[i, t, j]`.

mod io;

use ndarray::{s, Array2, Array3, ArrayView2, Axis};

use crate::error::{Error, Result};

pub use io::{read_binary, read_csv, write_binary, write_csv, BINARY_MAGIC, BINARY_VERSION};

/// Observations indexed `(subject, time, variable)`, all subjects observed at
/// the same number of time points.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    values: Array3<f64>,
    provenance: String,
}

impl Dataset {
    pub fn new(values: Array3<f64>, provenance: impl Into<String>) -> Result<Self> {
        let (n, t, d) = values.dim();
        if n == 0 || t == 0 || d == 0 {
            return Err(Error::contract(format!("dataset has an empty axis: {n}x{t}x{d}")));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let (i, rest) = (pos / (t * d), pos % (t * d));
            return Err(Error::contract(format!(
                "non-finite value at subject {i}, time {}, variable {}",
                rest / d,
                rest % d
            )));
        }
        Ok(Dataset {
            values,
            provenance: provenance.into(),
        })
    }

    pub fn n_subjects(&self) -> usize {
        self.values.dim().0
    }

    pub fn n_times(&self) -> usize {
        self.values.dim().1
    }

    pub fn n_vars(&self) -> usize {
        self.values.dim().2
    }

    pub fn values(&self) -> &Array3<f64> {
        &self.values
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// Stacks the observations of `subjects` (in the given order) into rows.
    pub fn subject_rows(&self, subjects: &[usize]) -> Result<HalfData> {
        let (n, t, d) = self.values.dim();
        if let Some(&bad) = subjects.iter().find(|&&i| i >= n) {
            return Err(Error::contract(format!("subject {bad} out of range for {n} subjects")));
        }
        let mut rows = Array2::zeros((subjects.len() * t, d));
        for (slot, &i) in subjects.iter().enumerate() {
            rows.slice_mut(s![slot * t..(slot + 1) * t, ..])
                .assign(&self.values.index_axis(Axis(0), i));
        }
        Ok(HalfData {
            rows,
            segments: vec![t; subjects.len()],
            subjects: subjects.to_vec(),
        })
    }

    pub fn all_rows(&self) -> HalfData {
        let all: Vec<usize> = (0..self.n_subjects()).collect();
        self.subject_rows(&all).expect("indices in range")
    }
}

/// Rows of a subset of subjects, stacked subject-major.
///
/// `segments[s]` is the number of consecutive rows that belong to the s-th
/// subject; batched standard errors never let a batch cross a segment.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfData {
    pub rows: Array2<f64>,
    pub segments: Vec<usize>,
    pub subjects: Vec<usize>,
}

impl HalfData {
    pub fn from_rows(rows: Array2<f64>, segments: Vec<usize>) -> Result<Self> {
        if segments.iter().sum::<usize>() != rows.nrows() {
            return Err(Error::contract(format!(
                "segments cover {} rows, matrix has {}",
                segments.iter().sum::<usize>(),
                rows.nrows()
            )));
        }
        let subjects = (0..segments.len()).collect();
        Ok(HalfData {
            rows,
            segments,
            subjects,
        })
    }

    pub fn n_obs(&self) -> usize {
        self.rows.nrows()
    }

    pub fn n_vars(&self) -> usize {
        self.rows.ncols()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.column(j).to_vec()
    }

    /// Columns `cols` in order, as a new `(n_obs, cols.len())` matrix.
    pub fn select(&self, cols: &[usize]) -> Array2<f64> {
        self.rows.select(Axis(1), cols)
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.rows.view()
    }
}
