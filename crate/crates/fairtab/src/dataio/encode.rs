//! Dual categorical encoders: integer codes and one-hot indicators.
//!
//! Vocabularies are fitted on training rows only; values unseen at inference
//! time route to the reserved `<NA>` slot.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Reserved token for missing or unseen categorical values.
pub const NA_TOKEN: &str = "<NA>";

/// Ordered token list for one categorical column.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Vocab {
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, u32>,
    na_index: Option<u32>,
}

impl PartialEq for Vocab {
    fn eq(&self, other: &Self) -> bool {
        self.tokens == other.tokens
    }
}

impl Vocab {
    /// Build from an explicit token list (ordered). `<NA>` is optional here;
    /// encoding an unseen value without it is an error.
    pub fn new(tokens: Vec<String>) -> Result<Vocab> {
        if tokens.is_empty() {
            return Err(Error::Config("empty vocabulary".into()));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        let mut na_index = None;
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::Config(format!("duplicate vocab token `{t}`")));
            }
            if t == NA_TOKEN {
                na_index = Some(i as u32);
            }
        }
        Ok(Vocab {
            tokens,
            index,
            na_index,
        })
    }

    /// Rebuild the lookup table after deserialization.
    pub fn rebuild_index(&mut self) {
        self.index = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token(&self, code: u32) -> &str {
        &self.tokens[code as usize]
    }

    /// Integer code for a token; unseen values map to the `<NA>` slot.
    pub fn code(&self, token: &str) -> Result<u32> {
        match self.index.get(token) {
            Some(&c) => Ok(c),
            None => self.na_index.ok_or_else(|| {
                Error::Config(format!(
                    "token `{token}` not in vocabulary and no <NA> slot present"
                ))
            }),
        }
    }
}

/// Fit a vocabulary in first-appearance order over the given values,
/// guaranteeing an `<NA>` slot (appended if the data had no missing values).
pub fn fit_vocab<'a>(values: impl Iterator<Item = &'a str>) -> Vocab {
    let mut tokens: Vec<String> = Vec::new();
    let mut seen: HashMap<&str, ()> = HashMap::new();
    let mut owned: Vec<&'a str> = Vec::new();
    for v in values {
        if seen.insert(v, ()).is_none() {
            owned.push(v);
        }
    }
    for v in owned {
        tokens.push(v.to_string());
    }
    if !tokens.iter().any(|t| t == NA_TOKEN) {
        tokens.push(NA_TOKEN.to_string());
    }
    Vocab::new(tokens).expect("fitted vocab is nonempty and deduplicated")
}

/// Integer codes for a column of values.
pub fn encode_integer(values: &[&str], vocab: &Vocab) -> Result<Vec<u32>> {
    if vocab.is_empty() {
        return Err(Error::Config("empty vocabulary".into()));
    }
    values.iter().map(|v| vocab.code(v)).collect()
}

/// Width-|vocab| indicator rows, exactly one 1 per row.
pub fn encode_onehot(values: &[&str], vocab: &Vocab) -> Result<Vec<Vec<f64>>> {
    if vocab.is_empty() {
        return Err(Error::Config("empty vocabulary".into()));
    }
    values
        .iter()
        .map(|v| {
            let code = vocab.code(v)? as usize;
            let mut row = vec![0.0; vocab.len()];
            row[code] = 1.0;
            Ok(row)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab(tokens: &[&str]) -> Vocab {
        Vocab::new(tokens.iter().map(|s| s.to_string()).collect()).unwrap()
    }

    #[test]
    fn onehot_definition() {
        let v = vocab(&["A", "B", "C"]);
        assert_eq!(encode_onehot(&["B"], &v).unwrap(), vec![vec![0.0, 1.0, 0.0]]);
    }

    #[test]
    fn onehot_unseen_routes_to_na() {
        let v = vocab(&["A", "B", NA_TOKEN]);
        assert_eq!(encode_onehot(&["D"], &v).unwrap(), vec![vec![0.0, 0.0, 1.0]]);
    }

    #[test]
    fn onehot_degenerate_width_one() {
        let v = vocab(&["A"]);
        assert_eq!(encode_onehot(&["A"], &v).unwrap(), vec![vec![1.0]]);
    }

    #[test]
    fn integer_codes_and_unseen_fallback() {
        let v = vocab(&["A", "B", "C", NA_TOKEN]);
        assert_eq!(encode_integer(&["A", "C", "A"], &v).unwrap(), vec![0, 2, 0]);
        assert_eq!(encode_integer(&["zzz"], &v).unwrap(), vec![3]);
        assert_eq!(encode_integer(&[], &v).unwrap(), Vec::<u32>::new());
    }

    #[test]
    fn unseen_without_na_slot_is_an_error() {
        let v = vocab(&["A"]);
        assert!(encode_integer(&["B"], &v).is_err());
    }

    #[test]
    fn fit_vocab_first_appearance_order_with_na_appended() {
        let vals = ["x", "y", "x", "z"];
        let v = fit_vocab(vals.iter().copied());
        assert_eq!(v.tokens(), &["x", "y", "z", NA_TOKEN]);
    }

    #[test]
    fn round_trip_codes_recover_tokens() {
        let vals = ["a", "b", "c", "a", "b"];
        let v = fit_vocab(vals.iter().copied());
        let codes = encode_integer(&vals, &v).unwrap();
        for (val, code) in vals.iter().zip(&codes) {
            assert_eq!(v.token(*code), *val);
        }
    }

    #[test]
    fn onehot_rows_sum_to_one() {
        let vals = ["p", "q", "r", "p", "<NA>", "q"];
        let v = fit_vocab(vals.iter().copied());
        for row in encode_onehot(&vals, &v).unwrap() {
            assert_eq!(row.iter().sum::<f64>(), 1.0);
        }
    }
}
