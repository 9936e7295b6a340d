use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{Dataset, Example, GroupId};
use crate::error::{Error, Result};

/// Column roles for CSV ingestion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSchema {
    pub label: String,
    pub attribute: Option<String>,
    pub features: Vec<String>,
}

impl CsvSchema {
    /// `label`, optionally `attribute`, then `f0..f{n-1}`.
    pub fn standard(num_features: usize, with_attribute: bool) -> Self {
        Self {
            label: "label".into(),
            attribute: with_attribute.then(|| "attribute".into()),
            features: (0..num_features).map(|i| format!("f{i}")).collect(),
        }
    }

    /// The standard layout as found in a header: `label`, `attribute` if
    /// present, and every column named `f<k>` in header order.
    pub fn from_header(header: &[&str]) -> Self {
        Self {
            label: "label".into(),
            attribute: header.contains(&"attribute").then(|| "attribute".into()),
            features: header
                .iter()
                .filter(|h| h.len() > 1 && h.starts_with('f') && h[1..].chars().all(|c| c.is_ascii_digit()))
                .map(|h| h.to_string())
                .collect(),
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    read_csv(File::open(path)?, schema, name)
}

/// Reads a dataset; `row` numbers in errors count data rows from 1.
pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema, name: impl Into<String>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let column = |col: &str| {
        header.iter().position(|h| h == col).ok_or_else(|| Error::Ingestion {
            row: 0,
            column: col.to_string(),
            message: "missing column".into(),
        })
    };
    let label_col = column(&schema.label)?;
    let attr_col = schema.attribute.as_deref().map(column).transpose()?;
    let feature_cols = schema
        .features
        .iter()
        .map(|c| column(c))
        .collect::<Result<Vec<_>>>()?;
    if feature_cols.is_empty() {
        return Err(Error::invalid("schema names no feature columns"));
    }

    let mut examples = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record?;
        let cell = |col: usize| record.get(col).unwrap_or("").trim();
        let index_of = |col: usize, what: &str| -> Result<usize> {
            cell(col).parse::<usize>().map_err(|_| Error::Ingestion {
                row,
                column: header[col].clone(),
                message: format!("unknown {what} value `{}`", cell(col)),
            })
        };
        let label = index_of(label_col, "label")?;
        let group = attr_col
            .map(|c| index_of(c, "attribute").map(|a| GroupId::new(a, label)))
            .transpose()?;
        let features = feature_cols
            .iter()
            .map(|&c| {
                cell(c)
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Ingestion {
                        row,
                        column: header[c].clone(),
                        message: format!("non-numeric feature `{}`", cell(c)),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        examples.push(Example {
            features,
            label,
            group,
        });
    }
    Dataset::new(name, examples)
}

impl Dataset {
    /// Canonical CSV form: header `label[,attribute],f0..fk`, floats in their
    /// shortest round-trip decimal form. The attribute column is written iff
    /// the dataset is annotated.
    pub fn to_csv_string(&self) -> String {
        let annotated = self.has_group_annotations();
        let mut out = String::from("label");
        if annotated {
            out.push_str(",attribute");
        }
        for k in 0..self.feature_dim() {
            out.push_str(&format!(",f{k}"));
        }
        out.push('\n');
        for e in self.examples() {
            out.push_str(&e.label.to_string());
            if annotated {
                out.push(',');
                out.push_str(&e.group.map(|g| g.attribute).unwrap_or_default().to_string());
            }
            for v in &e.features {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = File::create(path)?;
        f.write_all(self.to_csv_string().as_bytes())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const THREE_ROWS: &str = "label,attribute,f0,f1\n0,0,1.5,-2\n1,0,0.25,3\n1,1,7,8e-3\n";

    #[test]
    fn reads_with_attribute() {
        let d = read_csv(THREE_ROWS.as_bytes(), &CsvSchema::standard(2, true), "t").unwrap();
        assert_eq!(d.len(), 3);
        assert!(d.has_group_annotations());
        assert_eq!(d.examples()[1].group, Some(GroupId::new(0, 1)));
        assert_eq!(d.examples()[2].features, vec![7.0, 0.008]);
    }

    #[test]
    fn reads_without_attribute() {
        let d = read_csv(THREE_ROWS.as_bytes(), &CsvSchema::standard(2, false), "t").unwrap();
        assert_eq!(d.len(), 3);
        assert!(!d.has_group_annotations());
    }

    #[test]
    fn bad_feature_cites_row_and_column() {
        let text = "label,f0\n0,1.0\n1,abc\n";
        match read_csv(text.as_bytes(), &CsvSchema::standard(1, false), "t") {
            Err(Error::Ingestion { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "f0");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_column_and_bad_label() {
        assert!(matches!(
            read_csv("label,f0\n0,1\n".as_bytes(), &CsvSchema::standard(2, false), "t"),
            Err(Error::Ingestion { ref column, .. }) if column == "f1"
        ));
        assert!(matches!(
            read_csv("label,f0\ncat,1\n".as_bytes(), &CsvSchema::standard(1, false), "t"),
            Err(Error::Ingestion { row: 1, ref column, .. }) if column == "label"
        ));
    }

    #[test]
    fn header_inference() {
        let s = CsvSchema::from_header(&["label", "attribute", "f0", "f1", "note"]);
        assert_eq!(s, CsvSchema::standard(2, true));
    }

    #[test]
    fn save_load_save_is_byte_stable() {
        let d = read_csv(THREE_ROWS.as_bytes(), &CsvSchema::standard(2, true), "t").unwrap();
        let text = d.to_csv_string();
        let back = read_csv(text.as_bytes(), &CsvSchema::standard(2, true), "t").unwrap();
        assert_eq!(back, d);
        assert_eq!(back.to_csv_string(), text);
    }
}
