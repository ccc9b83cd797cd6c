//! Line-oriented column descriptor: `name,kind,role` per line.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Recipient,
    Organ,
    Sensitive,
    Label,
    Score,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: FeatureKind,
    pub role: Role,
}

/// Ordered column descriptors for one cohort file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<ColumnSpec>,
}

impl Schema {
    /// Parse the `name,kind,role` line format. Blank lines and `#` comments
    /// are skipped.
    pub fn parse(text: &str) -> Result<Schema> {
        let mut columns = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split(',').map(str::trim).collect();
            if parts.len() != 3 {
                return Err(Error::Schema(format!(
                    "line {}: expected `name,kind,role`, got `{line}`",
                    lineno + 1
                )));
            }
            let kind = match parts[1] {
                "numeric" => FeatureKind::Numeric,
                "categorical" => FeatureKind::Categorical,
                other => {
                    return Err(Error::Schema(format!(
                        "line {}: unknown kind `{other}`",
                        lineno + 1
                    )))
                }
            };
            let role = match parts[2] {
                "recipient" => Role::Recipient,
                "organ" => Role::Organ,
                "sensitive" => Role::Sensitive,
                "label" => Role::Label,
                "score" => Role::Score,
                other => {
                    return Err(Error::Schema(format!(
                        "line {}: unknown role `{other}`",
                        lineno + 1
                    )))
                }
            };
            columns.push(ColumnSpec {
                name: parts[0].to_string(),
                kind,
                role,
            });
        }
        let schema = Schema { columns };
        schema.validate()?;
        Ok(schema)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Schema> {
        Schema::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.columns {
            let kind = match c.kind {
                FeatureKind::Numeric => "numeric",
                FeatureKind::Categorical => "categorical",
            };
            let role = match c.role {
                Role::Recipient => "recipient",
                Role::Organ => "organ",
                Role::Sensitive => "sensitive",
                Role::Label => "label",
                Role::Score => "score",
            };
            out.push_str(&format!("{},{},{}\n", c.name, kind, role));
        }
        out
    }

    fn validate(&self) -> Result<()> {
        let labels = self.by_role(Role::Label).count();
        if labels != 1 {
            return Err(Error::Schema(format!(
                "schema must declare exactly one label column, found {labels}"
            )));
        }
        if self.by_role(Role::Score).count() > 1 {
            return Err(Error::Schema("at most one score column allowed".into()));
        }
        let mut names: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != self.columns.len() {
            return Err(Error::Schema("duplicate column name in schema".into()));
        }
        for c in &self.columns {
            match c.role {
                Role::Label | Role::Score if c.kind != FeatureKind::Numeric => {
                    return Err(Error::Schema(format!(
                        "column `{}`: label/score columns must be numeric",
                        c.name
                    )));
                }
                Role::Sensitive if c.kind != FeatureKind::Categorical => {
                    return Err(Error::Schema(format!(
                        "column `{}`: sensitive columns must be categorical",
                        c.name
                    )));
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn by_role(&self, role: Role) -> impl Iterator<Item = &ColumnSpec> {
        self.columns.iter().filter(move |c| c.role == role)
    }

    pub fn label_column(&self) -> &ColumnSpec {
        self.by_role(Role::Label).next().expect("validated schema")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_round_trip() {
        let text = "age,numeric,recipient\nblood_type,categorical,organ\nrace,categorical,sensitive\nmeld,numeric,score\ngraft_failed,numeric,label\n";
        let schema = Schema::parse(text).unwrap();
        assert_eq!(schema.columns.len(), 5);
        assert_eq!(Schema::parse(&schema.to_text()).unwrap(), schema);
    }

    #[test]
    fn rejects_bad_kind_and_missing_label() {
        assert!(matches!(
            Schema::parse("a,integer,recipient\ny,numeric,label"),
            Err(Error::Schema(_))
        ));
        assert!(matches!(
            Schema::parse("a,numeric,recipient"),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn rejects_categorical_score() {
        assert!(matches!(
            Schema::parse("m,categorical,score\ny,numeric,label"),
            Err(Error::Schema(_))
        ));
    }
}
