//! Tabular data: loading, seeded train/test splitting and min-max rescaling.
//!
//! A [`Dataset`] stores covariates row-major so that a network evaluation can
//! walk one observation at a time without gathering from separate columns.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    covariate_names: Vec<String>,
    response_name: String,
    /// Row-major `n x p_max` covariate matrix.
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Dataset {
    /// Builds a dataset from covariate rows and a response vector.
    pub fn from_rows(
        covariate_names: Vec<String>,
        response_name: impl Into<String>,
        rows: &[Vec<f64>],
        y: Vec<f64>,
    ) -> Result<Self> {
        let p = covariate_names.len();
        if rows.len() != y.len() {
            return Err(Error::InvalidConfig(format!(
                "{} covariate rows but {} responses",
                rows.len(),
                y.len()
            )));
        }
        let mut x = Vec::with_capacity(rows.len() * p);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::InvalidConfig(format!(
                    "row {i} has {} covariates, expected {p}",
                    row.len()
                )));
            }
            x.extend_from_slice(row);
        }
        Self::from_flat(covariate_names, response_name, x, y)
    }

    /// Builds a dataset from a flat row-major covariate buffer.
    pub fn from_flat(
        covariate_names: Vec<String>,
        response_name: impl Into<String>,
        x: Vec<f64>,
        y: Vec<f64>,
    ) -> Result<Self> {
        let response_name = response_name.into();
        let p = covariate_names.len();
        if x.len() != p * y.len() {
            return Err(Error::InvalidConfig(format!(
                "covariate buffer of length {} does not match {} rows x {p} columns",
                x.len(),
                y.len()
            )));
        }
        if covariate_names.contains(&response_name) {
            return Err(Error::InvalidConfig(format!(
                "response `{response_name}` also listed as a covariate"
            )));
        }
        if let Some(bad) = x.iter().chain(y.iter()).find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("dataset value {bad}")));
        }
        Ok(Self {
            covariate_names,
            response_name,
            x,
            y,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Number of available covariates (`p_max`).
    pub fn p(&self) -> usize {
        self.covariate_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn response_name(&self) -> &str {
        &self.response_name
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.p();
        &self.x[i * p..(i + 1) * p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        let p = self.p();
        (0..self.n()).map(move |i| &self.x[i * p..(i + 1) * p])
    }

    pub fn response(&self) -> &[f64] {
        &self.y
    }

    pub fn covariates_flat(&self) -> &[f64] {
        &self.x
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn covariate_index(&self, name: &str) -> Option<usize> {
        self.covariate_names.iter().position(|c| c == name)
    }

    /// New dataset holding the given rows, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Dataset {
        let p = self.p();
        let mut x = Vec::with_capacity(idx.len() * p);
        let mut y = Vec::with_capacity(idx.len());
        for &i in idx {
            x.extend_from_slice(self.row(i));
            y.push(self.y[i]);
        }
        Dataset {
            covariate_names: self.covariate_names.clone(),
            response_name: self.response_name.clone(),
            x,
            y,
        }
    }
}

/// Outcome of [`load_csv`].
#[derive(Debug, Clone)]
pub struct CsvLoad {
    pub dataset: Dataset,
    pub rows_read: usize,
    pub rows_rejected: usize,
}

/// Reads a comma-separated file with a header row. Rows holding an empty,
/// non-numeric or non-finite cell are dropped and counted.
pub fn load_csv(path: impl AsRef<Path>, response_name: &str) -> Result<CsvLoad> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file, response_name)
}

/// [`load_csv`] over any reader.
pub fn read_csv<R: std::io::Read>(reader: R, response_name: &str) -> Result<CsvLoad> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Csv(e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    let response_col = headers
        .iter()
        .position(|h| h == response_name)
        .ok_or_else(|| Error::MissingColumn(response_name.to_owned()))?;
    let covariate_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != response_col)
        .map(|(_, h)| h.clone())
        .collect();

    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut rows_read = 0;
    let mut rows_rejected = 0;
    let mut parsed = Vec::with_capacity(headers.len());
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Csv(e.to_string()))?;
        rows_read += 1;
        parsed.clear();
        let ok = record.iter().all(|cell| match cell.parse::<f64>() {
            Ok(v) if v.is_finite() => {
                parsed.push(v);
                true
            }
            _ => false,
        });
        if !ok {
            rows_rejected += 1;
            continue;
        }
        for (j, &v) in parsed.iter().enumerate() {
            if j == response_col {
                y.push(v);
            } else {
                x.push(v);
            }
        }
    }
    let dataset = Dataset::from_flat(covariate_names, response_name, x, y)?;
    Ok(CsvLoad {
        dataset,
        rows_read,
        rows_rejected,
    })
}

/// Datasets shipped with the crate: `(name, response column, CSV text)`.
pub const BUNDLED: [(&str, &str, &str); 2] = [
    ("boston", "medv", include_str!("../data/boston.csv")),
    ("red-wine", "quality", include_str!("../data/red_wine.csv")),
];

/// Loads a bundled dataset by name with its default response.
pub fn load_bundled(name: &str) -> Result<CsvLoad> {
    let (_, response, text) = BUNDLED
        .iter()
        .find(|(n, _, _)| *n == name)
        .ok_or_else(|| Error::InvalidConfig(format!("no bundled dataset named `{name}`")))?;
    read_csv(text.as_bytes(), response)
}

/// Number of test rows for a given fraction: `round(test_fraction * n)` with
/// halves rounded up.
pub fn test_size(n: usize, test_fraction: f64) -> usize {
    (test_fraction * n as f64 + 0.5).floor() as usize
}

/// Seeded uniform partition into `(train, test)`. Both parts keep the
/// original row order.
pub fn split(data: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidSplit(format!(
            "test fraction {test_fraction} must lie strictly between 0 and 1"
        )));
    }
    let n = data.n();
    let n_test = test_size(n, test_fraction);
    if n_test == 0 || n_test >= n {
        return Err(Error::InvalidSplit(format!(
            "fraction {test_fraction} of {n} rows leaves an empty part"
        )));
    }
    let (train_idx, test_idx) = partition_indices(n, n_test, seed);
    Ok((data.select_rows(&train_idx), data.select_rows(&test_idx)))
}

/// Returns sorted `(kept, held_out)` index sets with `held_out.len() == n_out`.
pub(crate) fn partition_indices(n: usize, n_out: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    let mut out = idx[..n_out].to_vec();
    let mut kept = idx[n_out..].to_vec();
    out.sort_unstable();
    kept.sort_unstable();
    (kept, out)
}

/// Per-column min-max bounds learned from training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    covariate_bounds: Vec<(f64, f64)>,
    response_bounds: (f64, f64),
}

fn bounds(values: impl Iterator<Item = f64>, name: &str) -> Result<(f64, f64)> {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if !(hi > lo) {
        return Err(Error::ConstantColumn(name.to_owned()));
    }
    Ok((lo, hi))
}

/// Learns `(min, max)` for every covariate and the response.
pub fn fit_scaler(train: &Dataset) -> Result<Scaler> {
    if train.is_empty() {
        return Err(Error::InvalidConfig("cannot fit a scaler on zero rows".into()));
    }
    let covariate_bounds = (0..train.p())
        .map(|j| bounds(train.rows().map(|r| r[j]), &train.covariate_names()[j]))
        .collect::<Result<Vec<_>>>()?;
    let response_bounds = bounds(train.response().iter().copied(), train.response_name())?;
    Ok(Scaler {
        covariate_bounds,
        response_bounds,
    })
}

/// Maps every column with `(x - min) / (max - min)`. Values outside the
/// training range are not clipped.
pub fn apply_scaler(scaler: &Scaler, data: &Dataset) -> Result<Dataset> {
    scaler.transform(data)
}

impl Scaler {
    pub fn covariate_bounds(&self) -> &[(f64, f64)] {
        &self.covariate_bounds
    }

    pub fn response_bounds(&self) -> (f64, f64) {
        self.response_bounds
    }

    fn check_width(&self, data: &Dataset) -> Result<()> {
        if data.p() != self.covariate_bounds.len() {
            return Err(Error::InvalidConfig(format!(
                "scaler fitted on {} covariates, data has {}",
                self.covariate_bounds.len(),
                data.p()
            )));
        }
        Ok(())
    }

    pub fn transform(&self, data: &Dataset) -> Result<Dataset> {
        self.check_width(data)?;
        self.map(data, |v, (lo, hi)| (v - lo) / (hi - lo))
    }

    pub fn inverse_transform(&self, data: &Dataset) -> Result<Dataset> {
        self.check_width(data)?;
        self.map(data, |v, (lo, hi)| v * (hi - lo) + lo)
    }

    fn map(&self, data: &Dataset, f: impl Fn(f64, (f64, f64)) -> f64) -> Result<Dataset> {
        let p = data.p();
        let x = data
            .covariates_flat()
            .iter()
            .enumerate()
            .map(|(k, &v)| f(v, self.covariate_bounds[k % p]))
            .collect();
        let y = data
            .response()
            .iter()
            .map(|&v| f(v, self.response_bounds))
            .collect();
        Dataset::from_flat(
            data.covariate_names().to_vec(),
            data.response_name(),
            x,
            y,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(k: usize) -> Vec<String> {
        (1..=k).map(|j| format!("x{j}")).collect()
    }

    fn toy(n: usize) -> Dataset {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let y = (0..n).map(|i| 2.0 * i as f64).collect();
        Dataset::from_rows(names(2), "y", &rows, y).unwrap()
    }

    #[test]
    fn load_three_rows() {
        let csv = "a,b,y\n1,2,3\n4,5,6\n7,8,9\n";
        let load = read_csv(csv.as_bytes(), "y").unwrap();
        assert_eq!(load.dataset.n(), 3);
        assert_eq!(load.dataset.p(), 2);
        assert_eq!(load.rows_rejected, 0);
        assert_eq!(load.dataset.row(1), &[4.0, 5.0]);
        assert_eq!(load.dataset.response(), &[3.0, 6.0, 9.0]);
    }

    #[test]
    fn non_numeric_row_is_rejected_and_counted() {
        let csv = "a,y\n1,2\nfoo,3\n4,5\n";
        let load = read_csv(csv.as_bytes(), "y").unwrap();
        assert_eq!(load.dataset.n(), 2);
        assert_eq!(load.rows_read, 3);
        assert_eq!(load.rows_rejected, 1);
    }

    #[test]
    fn empty_and_nan_cells_are_rejected() {
        let csv = "a,y\n1,\nNaN,3\n4,5\n";
        let load = read_csv(csv.as_bytes(), "y").unwrap();
        assert_eq!(load.dataset.n(), 1);
        assert_eq!(load.rows_rejected, 2);
    }

    #[test]
    fn response_column_required() {
        let err = read_csv("a,b\n1,2\n".as_bytes(), "y").unwrap_err();
        assert!(matches!(err, Error::MissingColumn(c) if c == "y"));
    }

    #[test]
    fn missing_file_is_an_io_error() {
        let err = load_csv("/definitely/not/here.csv", "y").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn split_sizes() {
        let (tr, te) = split(&toy(10), 0.1, 3).unwrap();
        assert_eq!((tr.n(), te.n()), (9, 1));
        assert_eq!(test_size(506, 0.1), 51);
        assert_eq!(test_size(10, 0.25), 3); // 2.5 rounds up
    }

    #[test]
    fn split_is_seeded() {
        let d = toy(40);
        assert_eq!(split(&d, 0.3, 11).unwrap(), split(&d, 0.3, 11).unwrap());
        assert_ne!(split(&d, 0.3, 11).unwrap().1, split(&d, 0.3, 12).unwrap().1);
    }

    #[test]
    fn split_rejects_empty_parts() {
        assert!(matches!(split(&toy(3), 0.1, 0), Err(Error::InvalidSplit(_))));
        assert!(matches!(split(&toy(3), 0.9, 0), Err(Error::InvalidSplit(_))));
        assert!(matches!(split(&toy(3), 0.0, 0), Err(Error::InvalidSplit(_))));
        assert!(matches!(split(&toy(3), 1.0, 0), Err(Error::InvalidSplit(_))));
    }

    #[test]
    fn scaler_maps_to_unit_interval() {
        let rows = vec![vec![0.0], vec![5.0], vec![10.0]];
        let d = Dataset::from_rows(names(1), "y", &rows, vec![1.0, 2.0, 3.0]).unwrap();
        let s = fit_scaler(&d).unwrap();
        let t = apply_scaler(&s, &d).unwrap();
        assert_eq!(t.column(0), vec![0.0, 0.5, 1.0]);
        assert_eq!(t.response(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn scaler_does_not_clip() {
        let train = Dataset::from_rows(names(1), "y", &[vec![0.0], vec![10.0]], vec![0.0, 1.0])
            .unwrap();
        let test = Dataset::from_rows(names(1), "y", &[vec![12.0]], vec![0.5]).unwrap();
        let s = fit_scaler(&train).unwrap();
        let t = s.transform(&test).unwrap();
        assert!((t.row(0)[0] - 1.2).abs() < 1e-15);
    }

    #[test]
    fn constant_column_rejected() {
        let d = Dataset::from_rows(names(1), "y", &[vec![1.0], vec![1.0]], vec![0.0, 1.0])
            .unwrap();
        assert!(matches!(fit_scaler(&d), Err(Error::ConstantColumn(c)) if c == "x1"));
    }
}
