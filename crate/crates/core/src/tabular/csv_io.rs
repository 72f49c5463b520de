use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use super::{Cell, ColumnKind, ColumnSchema, Dataset, Result, TabularError};

/// Tokens read as a missing cell.
pub const MISSING_MARKERS: [&str; 2] = ["", "NA"];

fn is_missing(token: &str) -> bool {
    MISSING_MARKERS.contains(&token)
}

fn parse_number(token: &str) -> Option<f64> {
    token.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Load a headed CSV file. When `label_column` is given that column becomes
/// the label vector, with class ids assigned in order of first appearance.
pub fn load_csv(path: impl AsRef<Path>, label_column: Option<&str>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| TabularError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_csv(file, label_column)
}

/// [`load_csv`] over any reader.
pub fn read_csv<R: Read>(reader: R, label_column: Option<&str>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(TabularError::Parse { line: 1, message: "missing header".into() });
    }
    let label_idx = match label_column {
        Some(name) => Some(header.iter().position(|h| h == name).ok_or_else(|| {
            TabularError::InvalidDataset(format!("label column `{name}` not in header"))
        })?),
        None => None,
    };

    let mut records: Vec<csv::StringRecord> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != header.len() {
            return Err(TabularError::Parse {
                line,
                message: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        if let Some(li) = label_idx {
            if is_missing(&rec[li]) {
                return Err(TabularError::Parse { line, message: "missing label".into() });
            }
        }
        records.push(rec);
    }
    if records.is_empty() {
        return Err(TabularError::EmptyDataset);
    }

    let feature_cols: Vec<usize> = (0..header.len()).filter(|&j| Some(j) != label_idx).collect();
    let mut schema = Vec::with_capacity(feature_cols.len());
    let mut lookups: Vec<Option<HashMap<String, u32>>> = Vec::with_capacity(feature_cols.len());
    for &j in &feature_cols {
        let numeric = records.iter().all(|r| is_missing(&r[j]) || parse_number(&r[j]).is_some());
        if numeric {
            schema.push(ColumnSchema::numeric(header[j].clone()));
            lookups.push(None);
        } else {
            let mut levels = Vec::new();
            let mut map = HashMap::new();
            for r in &records {
                let t = &r[j];
                if !is_missing(t) && !map.contains_key(t) {
                    map.insert(t.to_owned(), levels.len() as u32);
                    levels.push(t.to_owned());
                }
            }
            schema.push(ColumnSchema { name: header[j].clone(), kind: ColumnKind::Categorical, categories: levels });
            lookups.push(Some(map));
        }
    }

    let rows = records
        .iter()
        .map(|r| {
            feature_cols
                .iter()
                .zip(&lookups)
                .map(|(&j, lookup)| {
                    let t = &r[j];
                    if is_missing(t) {
                        Cell::Missing
                    } else if let Some(map) = lookup {
                        Cell::Cat(map[t])
                    } else {
                        Cell::Num(parse_number(t).expect("checked numeric"))
                    }
                })
                .collect()
        })
        .collect();

    let (labels, class_names) = match label_idx {
        Some(li) => {
            let mut names: Vec<String> = Vec::new();
            let mut ids: HashMap<String, usize> = HashMap::new();
            let labels = records
                .iter()
                .map(|r| {
                    let t = &r[li];
                    *ids.entry(t.to_owned()).or_insert_with(|| {
                        names.push(t.to_owned());
                        names.len() - 1
                    })
                })
                .collect();
            (Some(labels), Some(names))
        }
        None => (None, None),
    };
    let mut ds = Dataset::new(schema, rows, labels, class_names)?;
    ds.set_label_name(label_idx.map(|li| header[li].clone()));
    Ok(ds)
}

/// Write `ds` as headed CSV; labels (if any) go in a trailing column named
/// after the original label column, or `label`.
pub fn write_csv<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = ds.schema().iter().map(|c| c.name.as_str()).collect();
    if ds.labels().is_some() {
        header.push(ds.label_name().unwrap_or("label"));
    }
    w.write_record(&header)?;
    let mut fields = Vec::with_capacity(header.len());
    for i in 0..ds.n_rows() {
        fields.clear();
        fields.extend((0..ds.n_cols()).map(|j| ds.cell_text(i, j)));
        if let Some(labels) = ds.labels() {
            let y = labels[i];
            fields.push(ds.class_names().map_or_else(|| y.to_string(), |n| n[y].clone()));
        }
        w.write_record(&fields)?;
    }
    w.flush().map_err(|source| TabularError::Io { path: "<writer>".into(), source })?;
    Ok(())
}

impl Dataset {
    /// Re-express labels against `class_names` (e.g. the training file's
    /// order). Fails on a class name absent from `class_names`.
    pub fn align_classes(&self, class_names: &[String]) -> Result<Dataset> {
        let (Some(labels), Some(own)) = (self.labels(), self.class_names()) else {
            return Ok(self.clone());
        };
        let index: HashMap<&str, usize> = class_names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let map: Vec<usize> = own
            .iter()
            .map(|n| {
                index.get(n.as_str()).copied().ok_or_else(|| {
                    TabularError::SchemaMismatch(format!("class `{n}` unknown to the reference labels"))
                })
            })
            .collect::<Result<_>>()?;
        let mut out = Dataset::with_ids(
            self.schema().to_vec(),
            self.rows().to_vec(),
            Some(labels.iter().map(|&y| map[y]).collect()),
            Some(class_names.to_vec()),
            self.row_ids().to_vec(),
        )?;
        out.set_label_name(self.label_name().map(str::to_owned));
        Ok(out)
    }
}
