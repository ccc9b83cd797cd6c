//! The in-memory cohort table and its CSV/imputation operations.

use crate::error::{Error, Result};
use crate::dataio::schema::{FeatureKind, Role, Schema};
use std::path::Path;

/// One raw table cell. Missingness is explicit so that imputation is a
/// separate, observable step.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Cat(String),
    Missing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureColumn {
    pub name: String,
    pub kind: FeatureKind,
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitiveColumn {
    pub name: String,
    pub values: Vec<String>,
}

/// Recipient/organ features, sensitive group labels, optional priority
/// score, and binary outcomes for N individuals.
#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub recipient: Vec<FeatureColumn>,
    pub organ: Vec<FeatureColumn>,
    pub sensitive: Vec<SensitiveColumn>,
    /// Priority-score column (plays the clinical-score role for baselines).
    pub score: Option<(String, Vec<Option<f64>>)>,
    /// Binary outcome, 1 = event occurred.
    pub labels: Vec<u8>,
    pub label_name: String,
}

impl Cohort {
    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    /// Recipient then organ feature columns, the order every encoder uses.
    pub fn feature_columns(&self) -> impl Iterator<Item = &FeatureColumn> {
        self.recipient.iter().chain(self.organ.iter())
    }

    /// Per-feature kind tags, length M_r + M_o.
    pub fn feature_kinds(&self) -> Vec<FeatureKind> {
        self.feature_columns().map(|c| c.kind).collect()
    }

    pub fn sensitive_column(&self, name: &str) -> Result<&SensitiveColumn> {
        self.sensitive
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::Config(format!("unknown sensitive attribute `{name}`")))
    }

    /// Check the structural invariants: shared row count, binary labels,
    /// at least two distinct values per sensitive column.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_rows();
        if n == 0 {
            return Err(Error::Data("cohort has no rows".into()));
        }
        for col in self.feature_columns() {
            if col.cells.len() != n {
                return Err(Error::Data(format!(
                    "column `{}` has {} rows, expected {n}",
                    col.name,
                    col.cells.len()
                )));
            }
            for cell in &col.cells {
                match (col.kind, cell) {
                    (FeatureKind::Numeric, Cell::Cat(_)) => {
                        return Err(Error::Data(format!(
                            "numeric column `{}` holds a categorical cell",
                            col.name
                        )))
                    }
                    (FeatureKind::Categorical, Cell::Num(_)) => {
                        return Err(Error::Data(format!(
                            "categorical column `{}` holds a numeric cell",
                            col.name
                        )))
                    }
                    _ => {}
                }
            }
        }
        for col in &self.sensitive {
            if col.values.len() != n {
                return Err(Error::Data(format!(
                    "sensitive column `{}` row count mismatch",
                    col.name
                )));
            }
            let mut distinct: Vec<&str> = col.values.iter().map(String::as_str).collect();
            distinct.sort_unstable();
            distinct.dedup();
            if distinct.len() < 2 {
                return Err(Error::Data(format!(
                    "sensitive column `{}` has fewer than 2 distinct values",
                    col.name
                )));
            }
        }
        if let Some((_, vals)) = &self.score {
            if vals.len() != n {
                return Err(Error::Data("score column row count mismatch".into()));
            }
        }
        Ok(())
    }
}

/// Load a cohort from a UTF-8 CSV (header row, `""` = missing) against a
/// schema. Unparseable numeric cells are recorded as missing; non-binary
/// label values are an error.
pub fn load_cohort(path: impl AsRef<Path>, schema: &Schema) -> Result<Cohort> {
    let text = std::fs::read_to_string(path)?;
    read_cohort_csv(&text, schema)
}

/// Parse cohort CSV text. See [`load_cohort`].
pub fn read_cohort_csv(text: &str, schema: &Schema) -> Result<Cohort> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    for h in &headers {
        if !schema.columns.iter().any(|c| &c.name == h) {
            return Err(Error::Schema(format!("unknown column `{h}` in file")));
        }
    }
    // Map each schema column to its position in the file.
    let mut positions = Vec::with_capacity(schema.columns.len());
    for c in &schema.columns {
        match headers.iter().position(|h| h == &c.name) {
            Some(p) => positions.push(p),
            None => {
                return Err(Error::Schema(format!(
                    "column `{}` declared in schema but absent from file",
                    c.name
                )))
            }
        }
    }

    let mut recipient = Vec::new();
    let mut organ = Vec::new();
    let mut sensitive = Vec::new();
    let mut score: Option<(String, Vec<Option<f64>>)> = None;
    let mut labels: Vec<u8> = Vec::new();
    for c in &schema.columns {
        match c.role {
            Role::Recipient => recipient.push(FeatureColumn {
                name: c.name.clone(),
                kind: c.kind,
                cells: Vec::new(),
            }),
            Role::Organ => organ.push(FeatureColumn {
                name: c.name.clone(),
                kind: c.kind,
                cells: Vec::new(),
            }),
            Role::Sensitive => sensitive.push(SensitiveColumn {
                name: c.name.clone(),
                values: Vec::new(),
            }),
            Role::Score => score = Some((c.name.clone(), Vec::new())),
            Role::Label => {}
        }
    }

    for record in reader.records() {
        let record = record?;
        let mut ri = 0;
        let mut oi = 0;
        let mut si = 0;
        for (c, &pos) in schema.columns.iter().zip(&positions) {
            let raw = record.get(pos).unwrap_or("").trim();
            match c.role {
                Role::Recipient | Role::Organ => {
                    let cell = parse_feature_cell(raw, c.kind);
                    if c.role == Role::Recipient {
                        recipient[ri].cells.push(cell);
                        ri += 1;
                    } else {
                        organ[oi].cells.push(cell);
                        oi += 1;
                    }
                }
                Role::Sensitive => {
                    let v = if raw.is_empty() {
                        crate::dataio::encode::NA_TOKEN.to_string()
                    } else {
                        raw.to_string()
                    };
                    sensitive[si].values.push(v);
                    si += 1;
                }
                Role::Score => {
                    let v = raw.parse::<f64>().ok().filter(|x| x.is_finite());
                    score.as_mut().unwrap().1.push(v);
                }
                Role::Label => {
                    let parsed = raw.parse::<f64>().map_err(|_| {
                        Error::Data(format!("label cell `{raw}` is not a number"))
                    })?;
                    if parsed == 0.0 {
                        labels.push(0);
                    } else if parsed == 1.0 {
                        labels.push(1);
                    } else {
                        return Err(Error::Data(format!(
                            "label value `{raw}` is not binary"
                        )));
                    }
                }
            }
        }
    }

    let cohort = Cohort {
        recipient,
        organ,
        sensitive,
        score,
        labels,
        label_name: schema.label_column().name.clone(),
    };
    cohort.validate()?;
    Ok(cohort)
}

fn parse_feature_cell(raw: &str, kind: FeatureKind) -> Cell {
    if raw.is_empty() {
        return Cell::Missing;
    }
    match kind {
        FeatureKind::Numeric => match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => Cell::Num(v),
            _ => Cell::Missing,
        },
        FeatureKind::Categorical => Cell::Cat(raw.to_string()),
    }
}

/// Write a cohort back to CSV with the column order of `schema`.
pub fn write_cohort_csv(cohort: &Cohort, schema: &Schema) -> Result<String> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let names: Vec<&str> = schema.columns.iter().map(|c| c.name.as_str()).collect();
    wtr.write_record(&names)?;

    for i in 0..cohort.n_rows() {
        let mut row: Vec<String> = Vec::with_capacity(names.len());
        for c in &schema.columns {
            let field = match c.role {
                Role::Recipient | Role::Organ => {
                    let col = cohort
                        .feature_columns()
                        .find(|f| f.name == c.name)
                        .ok_or_else(|| Error::Schema(format!("column `{}` missing", c.name)))?;
                    match &col.cells[i] {
                        Cell::Num(v) => format!("{v}"),
                        Cell::Cat(t) => t.clone(),
                        Cell::Missing => String::new(),
                    }
                }
                Role::Sensitive => {
                    cohort
                        .sensitive
                        .iter()
                        .find(|s| s.name == c.name)
                        .ok_or_else(|| Error::Schema(format!("column `{}` missing", c.name)))?
                        .values[i]
                        .clone()
                }
                Role::Score => match &cohort.score {
                    Some((_, vals)) => vals[i].map(|v| format!("{v}")).unwrap_or_default(),
                    None => String::new(),
                },
                Role::Label => format!("{}", cohort.labels[i]),
            };
            row.push(field);
        }
        wtr.write_record(&row)?;
    }
    String::from_utf8(wtr.into_inner().map_err(|e| Error::Data(e.to_string()))?)
        .map_err(|e| Error::Data(e.to_string()))
}

/// Replace missing cells: zeros for numerics, the reserved `<NA>` token for
/// categoricals, zeros for the score column. Idempotent.
pub fn impute_missing(cohort: &Cohort) -> Cohort {
    let fix = |col: &FeatureColumn| FeatureColumn {
        name: col.name.clone(),
        kind: col.kind,
        cells: col
            .cells
            .iter()
            .map(|cell| match cell {
                Cell::Missing => match col.kind {
                    FeatureKind::Numeric => Cell::Num(0.0),
                    FeatureKind::Categorical => {
                        Cell::Cat(crate::dataio::encode::NA_TOKEN.to_string())
                    }
                },
                other => other.clone(),
            })
            .collect(),
    };
    Cohort {
        recipient: cohort.recipient.iter().map(fix).collect(),
        organ: cohort.organ.iter().map(fix).collect(),
        sensitive: cohort.sensitive.clone(),
        score: cohort
            .score
            .as_ref()
            .map(|(name, vals)| (name.clone(), vals.iter().map(|v| Some(v.unwrap_or(0.0))).collect())),
        labels: cohort.labels.clone(),
        label_name: cohort.label_name.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo_schema() -> Schema {
        Schema::parse(
            "age,numeric,recipient\nblood_type,categorical,organ\nrace,categorical,sensitive\ngender,categorical,sensitive\ngraft_failed,numeric,label\n",
        )
        .unwrap()
    }

    #[test]
    fn loads_three_row_csv() {
        let csv = "age,blood_type,race,gender,graft_failed\n41,A,I,male,0\n55,B,II,female,1\n63,O,I,female,0\n";
        let cohort = read_cohort_csv(csv, &demo_schema()).unwrap();
        assert_eq!(cohort.n_rows(), 3);
        assert_eq!(cohort.recipient.len(), 1);
        assert_eq!(cohort.organ.len(), 1);
        assert_eq!(cohort.labels, vec![0, 1, 0]);
        assert_eq!(cohort.feature_kinds().len(), 2);
    }

    #[test]
    fn non_binary_label_is_a_data_error() {
        let csv = "age,blood_type,race,gender,graft_failed\n41,A,I,male,2\n55,B,II,female,1\n";
        assert!(matches!(
            read_cohort_csv(csv, &demo_schema()),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn empty_numeric_cell_becomes_missing() {
        let csv = "age,blood_type,race,gender,graft_failed\n,A,I,male,0\nx9,B,II,female,1\n";
        let cohort = read_cohort_csv(csv, &demo_schema()).unwrap();
        assert_eq!(cohort.recipient[0].cells[0], Cell::Missing);
        // unparseable numeric is also missing, not an error
        assert_eq!(cohort.recipient[0].cells[1], Cell::Missing);
    }

    #[test]
    fn unknown_column_is_a_schema_error() {
        let csv = "age,blood_type,race,gender,graft_failed,extra\n41,A,I,male,0,9\n";
        assert!(matches!(
            read_cohort_csv(csv, &demo_schema()),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn impute_replaces_numeric_with_zero_and_cat_with_na() {
        let csv = "age,blood_type,race,gender,graft_failed\n1.5,,I,male,0\n,A,II,female,1\n2.0,B,I,male,0\n";
        let cohort = read_cohort_csv(csv, &demo_schema()).unwrap();
        let imputed = impute_missing(&cohort);
        assert_eq!(
            imputed.recipient[0].cells,
            vec![Cell::Num(1.5), Cell::Num(0.0), Cell::Num(2.0)]
        );
        assert_eq!(imputed.organ[0].cells[0], Cell::Cat("<NA>".into()));
        // idempotent
        assert_eq!(impute_missing(&imputed), imputed);
    }

    #[test]
    fn impute_is_identity_without_missing_cells() {
        let csv = "age,blood_type,race,gender,graft_failed\n1,A,I,male,0\n2,B,II,female,1\n";
        let cohort = read_cohort_csv(csv, &demo_schema()).unwrap();
        assert_eq!(impute_missing(&cohort), cohort);
    }

    #[test]
    fn csv_round_trip_preserves_cohort() {
        let schema = demo_schema();
        let csv = "age,blood_type,race,gender,graft_failed\n41.5,A,I,male,0\n,B,II,female,1\n";
        let cohort = read_cohort_csv(csv, &schema).unwrap();
        let text = write_cohort_csv(&cohort, &schema).unwrap();
        let reloaded = read_cohort_csv(&text, &schema).unwrap();
        assert_eq!(reloaded, cohort);
    }
}
