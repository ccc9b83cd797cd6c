//! `fairtab analyze`: subgroup rate table and score/size correlation matrix
//! from a waiting-list counts file.

use crate::cli::manifest::Manifest;
use crate::dataio::{load_cohort, Schema};
use crate::error::{Error, Result};
use crate::metrics::{cohort_rates, pearson, SubgroupCounts};
use crate::persist;
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Serialize)]
struct SubgroupRow {
    group: String,
    score: f64,
    n_w: u64,
    n_r: u64,
    n_f: u64,
    orr: Option<f64>,
    gfr: Option<f64>,
}

#[derive(Debug, Serialize)]
struct PearsonMatrix {
    score_orr: f64,
    score_gfr: f64,
    size_orr: f64,
    size_gfr: f64,
}

#[derive(Debug, Serialize)]
struct Analysis {
    subgroups: Vec<SubgroupRow>,
    pearson: PearsonMatrix,
}

struct CountsRow {
    group: String,
    score: Option<f64>,
    n_w: u64,
    n_r: u64,
    n_f: u64,
}

fn parse_counts(path: &Path) -> Result<Vec<CountsRow>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(g_idx), Some(w_idx), Some(r_idx), Some(f_idx)) =
        (col("group"), col("n_w"), col("n_r"), col("n_f"))
    else {
        return Err(Error::Schema(
            "counts file needs columns group,n_w,n_r,n_f (score optional)".into(),
        ));
    };
    let score_idx = col("score");

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let get = |i: usize| record.get(i).unwrap_or("").trim().to_string();
        let parse_u64 = |i: usize, what: &str| -> Result<u64> {
            get(i)
                .parse::<u64>()
                .map_err(|_| Error::Data(format!("bad {what} count `{}`", get(i))))
        };
        rows.push(CountsRow {
            group: get(g_idx),
            score: score_idx.and_then(|i| get(i).parse::<f64>().ok()),
            n_w: parse_u64(w_idx, "waiting")?,
            n_r: parse_u64(r_idx, "receiving")?,
            n_f: parse_u64(f_idx, "failure")?,
        });
    }
    if rows.is_empty() {
        return Err(Error::Data("counts file has no subgroup rows".into()));
    }
    Ok(rows)
}

/// Mean score per joint sensitive subgroup (labels joined with `/`).
fn dataset_scores(dataset: &Path, schema: &Path) -> Result<BTreeMap<String, f64>> {
    let schema = Schema::load(schema)?;
    let cohort = load_cohort(dataset, &schema)?;
    let Some((_, scores)) = &cohort.score else {
        return Err(Error::Schema("dataset has no score column".into()));
    };
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for i in 0..cohort.n_rows() {
        let key: Vec<&str> = cohort
            .sensitive
            .iter()
            .map(|c| c.values[i].as_str())
            .collect();
        let key = key.join("/");
        let entry = sums.entry(key).or_insert((0.0, 0));
        entry.0 += scores[i].unwrap_or(0.0);
        entry.1 += 1;
    }
    Ok(sums
        .into_iter()
        .map(|(k, (sum, n))| (k, sum / n as f64))
        .collect())
}

pub fn cmd_analyze(
    counts_path: &Path,
    dataset: Option<&Path>,
    schema: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let counts = parse_counts(counts_path)?;
    let score_by_group = match (dataset, schema) {
        (Some(d), Some(s)) => Some(dataset_scores(d, s)?),
        (Some(_), None) | (None, Some(_)) => {
            return Err(Error::Config(
                "--dataset and --schema must be given together".into(),
            ))
        }
        (None, None) => None,
    };

    let rates = cohort_rates(
        &counts
            .iter()
            .map(|c| SubgroupCounts {
                label: c.group.clone(),
                n_w: c.n_w,
                n_r: c.n_r,
                n_f: c.n_f,
            })
            .collect::<Vec<_>>(),
    )?;

    let mut rows = Vec::with_capacity(counts.len());
    for (c, r) in counts.iter().zip(&rates.rows) {
        let score = match (&score_by_group, c.score) {
            (Some(map), _) => *map.get(&c.group).ok_or_else(|| {
                Error::Data(format!("subgroup `{}` absent from dataset", c.group))
            })?,
            (None, Some(s)) => s,
            (None, None) => {
                return Err(Error::Schema(format!(
                    "subgroup `{}` has no score (add a score column or --dataset)",
                    c.group
                )))
            }
        };
        rows.push(SubgroupRow {
            group: c.group.clone(),
            score,
            n_w: c.n_w,
            n_r: c.n_r,
            n_f: c.n_f,
            orr: r.orr,
            gfr: r.gfr,
        });
    }

    // correlations over subgroups with defined rates
    let defined_orr: Vec<&SubgroupRow> = rows.iter().filter(|r| r.orr.is_some()).collect();
    let defined_gfr: Vec<&SubgroupRow> = rows.iter().filter(|r| r.gfr.is_some()).collect();
    let corr = |xs: Vec<f64>, ys: Vec<f64>| pearson(&xs, &ys);
    let matrix = PearsonMatrix {
        score_orr: corr(
            defined_orr.iter().map(|r| r.score).collect(),
            defined_orr.iter().map(|r| r.orr.unwrap()).collect(),
        )?,
        score_gfr: corr(
            defined_gfr.iter().map(|r| r.score).collect(),
            defined_gfr.iter().map(|r| r.gfr.unwrap()).collect(),
        )?,
        size_orr: corr(
            defined_orr.iter().map(|r| r.n_w as f64).collect(),
            defined_orr.iter().map(|r| r.orr.unwrap()).collect(),
        )?,
        size_gfr: corr(
            defined_gfr.iter().map(|r| r.n_w as f64).collect(),
            defined_gfr.iter().map(|r| r.gfr.unwrap()).collect(),
        )?,
    };

    std::fs::create_dir_all(out)?;
    let subgroups_path = out.join("subgroups.csv");
    let pearson_path = out.join("pearson.csv");
    let json_path = out.join("analysis.json");

    let mut table = String::from("group,score,n_w,n_r,n_f,orr,gfr\n");
    for r in &rows {
        let fmt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        table.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.group,
            r.score,
            r.n_w,
            r.n_r,
            r.n_f,
            fmt(r.orr),
            fmt(r.gfr)
        ));
    }
    std::fs::write(&subgroups_path, table)?;
    std::fs::write(
        &pearson_path,
        format!(
            "pair,correlation\nscore_orr,{}\nscore_gfr,{}\nsize_orr,{}\nsize_gfr,{}\n",
            matrix.score_orr, matrix.score_gfr, matrix.size_orr, matrix.size_gfr
        ),
    )?;
    let analysis = Analysis {
        subgroups: rows,
        pearson: matrix,
    };
    std::fs::write(&json_path, serde_json::to_string_pretty(&analysis)?)?;

    let mut manifest = Manifest::new("analyze", 0, persist::hash_file(counts_path)?);
    manifest.record_input(counts_path)?;
    if let Some(d) = dataset {
        manifest.record_input(d)?;
    }
    manifest.record_output(&subgroups_path)?;
    manifest.record_output(&pearson_path)?;
    manifest.record_output(&json_path)?;
    manifest.write(out)?;

    println!(
        "analyze: {} subgroups, pearson(score, gfr) = {:.5}",
        analysis.subgroups.len(),
        analysis.pearson.score_gfr
    );
    Ok(())
}
