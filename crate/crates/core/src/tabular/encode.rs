use std::collections::HashMap;
use std::ops::Range;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::{Cell, ColumnKind, ColumnSchema, Dataset, Result, TabularError};
use crate::scalar::Real;

/// Dense, fully imputed, one-hot encoded feature matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedMatrix<T: Real = f64> {
    pub values: Array2<T>,
    pub feature_names: Vec<String>,
    pub source_schema: Vec<ColumnSchema>,
}

impl<T: Real> EncodedMatrix<T> {
    pub fn new(values: Array2<T>, feature_names: Vec<String>, source_schema: Vec<ColumnSchema>) -> Self {
        debug_assert_eq!(values.ncols(), feature_names.len());
        Self { values, feature_names, source_schema }
    }

    /// Anonymous numeric matrix (no source schema).
    pub fn from_array(values: Array2<T>) -> Self {
        let names = (0..values.ncols()).map(|j| format!("x{j}")).collect();
        Self { values, feature_names: names, source_schema: Vec::new() }
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn width(&self) -> usize {
        self.values.ncols()
    }

    pub fn select(&self, rows: &[usize]) -> Self {
        Self {
            values: self.values.select(Axis(0), rows),
            feature_names: self.feature_names.clone(),
            source_schema: self.source_schema.clone(),
        }
    }

    /// View as an all-numeric [`Dataset`] named by the encoded features.
    pub fn to_dataset(&self) -> Dataset {
        let schema = self.feature_names.iter().map(ColumnSchema::numeric).collect();
        let rows = self
            .values
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|v| Cell::Num(v.as_f64())).collect())
            .collect();
        Dataset::new(schema, rows, None, None).expect("encoded values are finite")
    }
}

/// Fitted per-column encoding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ColumnEncoding {
    Numeric { median: f64 },
    Categorical { levels: Vec<String>, mode: usize },
}

/// Imputation and one-hot encoding fitted on a training split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    schema: Vec<ColumnSchema>,
    columns: Vec<ColumnEncoding>,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

impl Encoder {
    /// Fit medians, modes and observed level order on `train`.
    pub fn fit(train: &Dataset) -> Result<Self> {
        let mut columns = Vec::with_capacity(train.n_cols());
        for (j, col) in train.schema().iter().enumerate() {
            match col.kind {
                ColumnKind::Numeric => {
                    let mut vals: Vec<f64> = train.rows().iter().filter_map(|r| r[j].as_num()).collect();
                    if vals.is_empty() {
                        return Err(TabularError::AllMissingColumn(col.name.clone()));
                    }
                    columns.push(ColumnEncoding::Numeric { median: median(&mut vals) });
                }
                ColumnKind::Categorical => {
                    let mut order: Vec<u32> = Vec::new();
                    let mut counts: HashMap<u32, usize> = HashMap::new();
                    for r in train.rows() {
                        if let Cell::Cat(c) = r[j] {
                            let e = counts.entry(c).or_insert(0);
                            if *e == 0 {
                                order.push(c);
                            }
                            *e += 1;
                        }
                    }
                    if order.is_empty() {
                        return Err(TabularError::AllMissingColumn(col.name.clone()));
                    }
                    let mut mode = 0;
                    for (i, c) in order.iter().enumerate() {
                        if counts[c] > counts[&order[mode]] {
                            mode = i;
                        }
                    }
                    let levels = order.iter().map(|&c| col.categories[c as usize].clone()).collect();
                    columns.push(ColumnEncoding::Categorical { levels, mode });
                }
            }
        }
        Ok(Self { schema: train.schema().to_vec(), columns })
    }

    pub fn schema(&self) -> &[ColumnSchema] {
        &self.schema
    }

    pub fn columns(&self) -> &[ColumnEncoding] {
        &self.columns
    }

    /// Encoded width: numeric columns plus the level count of each categorical.
    pub fn width(&self) -> usize {
        self.columns
            .iter()
            .map(|c| match c {
                ColumnEncoding::Numeric { .. } => 1,
                ColumnEncoding::Categorical { levels, .. } => levels.len(),
            })
            .sum()
    }

    /// Encoded index range of every raw column.
    pub fn blocks(&self) -> Vec<Range<usize>> {
        let mut at = 0;
        self.columns
            .iter()
            .map(|c| {
                let w = match c {
                    ColumnEncoding::Numeric { .. } => 1,
                    ColumnEncoding::Categorical { levels, .. } => levels.len(),
                };
                at += w;
                at - w..at
            })
            .collect()
    }

    /// `(raw column, encoded index)` for each numeric column.
    pub fn numeric_coordinates(&self) -> Vec<(usize, usize)> {
        self.blocks()
            .into_iter()
            .enumerate()
            .filter(|(j, _)| matches!(self.columns[*j], ColumnEncoding::Numeric { .. }))
            .map(|(j, r)| (j, r.start))
            .collect()
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.schema
            .iter()
            .zip(&self.columns)
            .flat_map(|(col, enc)| match enc {
                ColumnEncoding::Numeric { .. } => vec![col.name.clone()],
                ColumnEncoding::Categorical { levels, .. } => {
                    levels.iter().map(|l| format!("{}={l}", col.name)).collect()
                }
            })
            .collect()
    }

    pub fn encode<T: Real>(&self, ds: &Dataset) -> Result<EncodedMatrix<T>> {
        if ds.n_cols() != self.schema.len() {
            return Err(TabularError::SchemaMismatch(format!(
                "expected {} columns, found {}",
                self.schema.len(),
                ds.n_cols()
            )));
        }
        for (a, b) in self.schema.iter().zip(ds.schema()) {
            if !a.compatible(b) {
                return Err(TabularError::SchemaMismatch(format!(
                    "column `{}` ({:?}) does not match `{}` ({:?})",
                    b.name, b.kind, a.name, a.kind
                )));
            }
        }
        // Map each dataset category index onto the fitted level slot.
        let slot_maps: Vec<Vec<Option<usize>>> = self
            .columns
            .iter()
            .zip(ds.schema())
            .map(|(enc, col)| match enc {
                ColumnEncoding::Numeric { .. } => Vec::new(),
                ColumnEncoding::Categorical { levels, .. } => {
                    col.categories.iter().map(|c| levels.iter().position(|l| l == c)).collect()
                }
            })
            .collect();
        let blocks = self.blocks();
        let mut values = Array2::<T>::zeros((ds.n_rows(), self.width()));
        for (i, row) in ds.rows().iter().enumerate() {
            for (j, enc) in self.columns.iter().enumerate() {
                let base = blocks[j].start;
                match (enc, row[j]) {
                    (ColumnEncoding::Numeric { .. }, Cell::Num(v)) => values[[i, base]] = T::of(v),
                    (ColumnEncoding::Numeric { median }, _) => values[[i, base]] = T::of(*median),
                    (ColumnEncoding::Categorical { .. }, Cell::Cat(c)) => {
                        if let Some(slot) = slot_maps[j][c as usize] {
                            values[[i, base + slot]] = T::one();
                        }
                    }
                    (ColumnEncoding::Categorical { mode, .. }, _) => values[[i, base + mode]] = T::one(),
                }
            }
        }
        Ok(EncodedMatrix::new(values, self.feature_names(), self.schema.clone()))
    }
}

/// Fit an [`Encoder`] on `train` and encode `train` followed by every entry of `others`.
pub fn preprocess<T: Real>(train: &Dataset, others: &[&Dataset]) -> Result<(Vec<EncodedMatrix<T>>, Encoder)> {
    for o in others {
        if !train.compatible(o) {
            return Err(TabularError::SchemaMismatch("inputs do not share one schema".into()));
        }
    }
    let enc = Encoder::fit(train)?;
    let mut out = Vec::with_capacity(others.len() + 1);
    out.push(enc.encode(train)?);
    for o in others {
        out.push(enc.encode(o)?);
    }
    Ok((out, enc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::read_csv;

    #[test]
    fn median_imputation() {
        let train = read_csv("a\n1\n3\nNA\n".as_bytes(), None).unwrap();
        let (m, _) = preprocess::<f64>(&train, &[]).unwrap();
        assert_eq!(m[0].values[[2, 0]], 2.0);
    }

    #[test]
    fn unseen_level_is_all_zeros() {
        let train = read_csv("c\nred\nblue\nred\n".as_bytes(), None).unwrap();
        let target = read_csv("c\ngreen\nblue\n".as_bytes(), None).unwrap();
        let (m, enc) = preprocess::<f64>(&train, &[&target]).unwrap();
        assert_eq!(enc.width(), 2);
        assert_eq!(m[1].values.row(0).to_vec(), vec![0.0, 0.0]);
        assert_eq!(m[1].values.row(1).to_vec(), vec![0.0, 1.0]);
    }

    #[test]
    fn categorical_missing_takes_mode() {
        let train = read_csv("c,x\nb,1\na,2\na,3\nNA,4\n".as_bytes(), None).unwrap();
        let (m, _) = preprocess::<f64>(&train, &[]).unwrap();
        // Levels in first-appearance order: b, a. Mode is a.
        assert_eq!(m[0].values.row(3).to_vec(), vec![0.0, 1.0, 4.0]);
    }

    #[test]
    fn mixed_width_counts_levels() {
        let train = read_csv("n1,c1,n2,c2\n1,a,2,x\n2,b,3,y\n3,c,4,x\n4,a,5,z\n5,b,6,y\n".as_bytes(), None).unwrap();
        let (m, enc) = preprocess::<f32>(&train, &[]).unwrap();
        assert_eq!(enc.width(), 2 + 3 + 3);
        assert_eq!(m[0].width(), 8);
        assert_eq!(enc.numeric_coordinates(), vec![(0, 0), (2, 4)]);
        for r in m[0].values.rows() {
            assert_eq!(r[1] + r[2] + r[3], 1.0);
        }
    }

    #[test]
    fn all_missing_column_rejected() {
        let train = read_csv("a,b\n1,NA\n2,NA\n".as_bytes(), None).unwrap();
        assert!(matches!(Encoder::fit(&train), Err(TabularError::AllMissingColumn(c)) if c == "b"));
    }

    #[test]
    fn schema_mismatch_rejected() {
        let a = read_csv("a,b\n1,2\n".as_bytes(), None).unwrap();
        let b = read_csv("a,b\n1,x\n".as_bytes(), None).unwrap();
        assert!(matches!(preprocess::<f64>(&a, &[&b]), Err(TabularError::SchemaMismatch(_))));
    }
}
