//! `fairtab report`: aggregate run directories into comparison tables and
//! per-group bar-chart data.

use crate::cli::manifest::Manifest;
use crate::cli::train::{RunReport, REPORT_FORMAT};
use crate::error::Result;
use crate::persist;
use std::path::Path;

pub fn cmd_report(runs_dir: &Path, out: &Path) -> Result<()> {
    let mut found: Vec<(String, Vec<RunReport>)> = Vec::new();
    let mut absent: Vec<String> = Vec::new();

    if runs_dir.exists() {
        let mut entries: Vec<_> = std::fs::read_dir(runs_dir)?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_dir())
            .collect();
        entries.sort_by_key(|e| e.file_name());
        for entry in entries {
            let name = entry.file_name().to_string_lossy().to_string();
            let single = entry.path().join("report.json");
            let multi = entry.path().join("ablation.json");
            if single.exists() {
                match persist::load_json::<RunReport>(&single, REPORT_FORMAT) {
                    Ok(run) => found.push((name, vec![run])),
                    Err(_) => absent.push(name),
                }
            } else if multi.exists() {
                match persist::load_json::<Vec<RunReport>>(&multi, REPORT_FORMAT) {
                    Ok(rows) => found.push((name, rows)),
                    Err(_) => absent.push(name),
                }
            } else {
                absent.push(name);
            }
        }
    }

    std::fs::create_dir_all(out)?;
    let mut csv = String::from(
        "run,model,attribute,auc_mean,auc_std,dpd_mean,dpd_std,eod_mean,eod_std\n",
    );
    let mut md = String::from(
        "| run | model | attribute | AUC | DPD | EOD |\n|---|---|---|---|---|---|\n",
    );
    let mut plot_files = Vec::new();
    for (run_name, rows) in &found {
        for r in rows {
            csv.push_str(&format!(
                "{run_name},{},{},{},{},{},{},{},{}\n",
                r.model,
                r.sensitive,
                r.report.mean.auc,
                r.report.std.auc,
                r.report.mean.dpd,
                r.report.std.dpd,
                r.report.mean.eod,
                r.report.std.eod
            ));
            md.push_str(&format!(
                "| {run_name} | {} | {} | {:.3}±{:.3} | {:.3}±{:.3} | {:.3}±{:.3} |\n",
                r.model,
                r.sensitive,
                r.report.mean.auc,
                r.report.std.auc,
                r.report.mean.dpd,
                r.report.std.dpd,
                r.report.mean.eod,
                r.report.std.eod
            ));
            if !r.group_rates.is_empty() {
                let safe_model = r.model.replace('/', "_");
                let path = out.join(format!("rates_{run_name}_{safe_model}.csv"));
                let mut data = String::from("group,positive_rate\n");
                for (g, rate) in &r.group_rates {
                    data.push_str(&format!("{g},{rate}\n"));
                }
                std::fs::write(&path, data)?;
                plot_files.push(path);
            }
        }
    }
    if !absent.is_empty() {
        md.push_str("\nAbsent runs (no report found):\n");
        for name in &absent {
            md.push_str(&format!("- {name}\n"));
        }
    }

    let csv_path = out.join("summary.csv");
    let md_path = out.join("summary.md");
    std::fs::write(&csv_path, csv)?;
    std::fs::write(&md_path, md)?;

    let mut manifest = Manifest::new("report", 0, String::new());
    manifest.record_output(&csv_path)?;
    manifest.record_output(&md_path)?;
    for f in &plot_files {
        manifest.record_output(f)?;
    }
    manifest.write(out)?;

    println!(
        "report: {} runs aggregated, {} absent",
        found.len(),
        absent.len()
    );
    Ok(())
}
