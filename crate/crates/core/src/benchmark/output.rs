use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::run::BenchmarkReport;
use super::{BenchmarkError, Result};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BenchmarkError + '_ {
    move |source| BenchmarkError::Io { path: path.to_owned(), source }
}

pub fn write_cells_csv(report: &BenchmarkReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for c in &report.cells {
        w.serialize(c)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

pub fn write_report_json(report: &BenchmarkReport, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

fn row(cells: impl IntoIterator<Item = String>) -> String {
    let v: Vec<String> = cells.into_iter().collect();
    format!("| {} |\n", v.join(" | "))
}

fn rule(n: usize) -> String {
    row((0..n).map(|_| "---".to_owned()))
}

/// Markdown rendering of the accuracy, TPR and rank tables.
pub fn render_tables(report: &BenchmarkReport) -> String {
    let sizes = &report.plan.sizes;
    let detectors: Vec<String> = report.plan.detectors.iter().map(|d| d.label()).collect();
    let mut md = String::new();

    md.push_str("## Accuracy by sample size\n\n");
    md.push_str(&row(std::iter::once("Detector".to_owned()).chain(sizes.iter().map(|s| s.to_string()))));
    md.push_str(&rule(sizes.len() + 1));
    for det in &detectors {
        let vals = sizes.iter().map(|&s| {
            report
                .summary
                .accuracy
                .iter()
                .find(|a| &a.detector == det && a.size == s)
                .map_or("-".to_owned(), |a| format!("{:.2}", a.accuracy))
        });
        md.push_str(&row(std::iter::once(det.clone()).chain(vals)));
    }

    for &size in sizes {
        let _ = write!(md, "\n## TPR by shift type at {size} samples\n\n");
        md.push_str(&row(std::iter::once("Shift".to_owned()).chain(detectors.iter().cloned())));
        md.push_str(&rule(detectors.len() + 1));
        for kind in report.shift_types() {
            let vals = detectors.iter().map(|det| {
                report
                    .summary
                    .tpr
                    .iter()
                    .find(|t| &t.detector == det && t.size == size && t.shift_type == kind.label())
                    .map_or("-".to_owned(), |t| format!("{:.2}", t.tpr))
            });
            md.push_str(&row(std::iter::once(kind.label().to_owned()).chain(vals)));
        }
    }

    if !report.comparisons.is_empty() {
        md.push_str("\n## Mean efficiency ranks\n\n");
        let mut families: Vec<&Vec<String>> = Vec::new();
        for c in &report.comparisons {
            if !families.contains(&&c.detectors) {
                families.push(&c.detectors);
            }
        }
        for fam in families {
            md.push_str(&row(["Shift".to_owned()].into_iter().chain(fam.iter().cloned()).chain(["Friedman p".to_owned(), "CD".to_owned()])));
            md.push_str(&rule(fam.len() + 3));
            for c in report.comparisons.iter().filter(|c| &c.detectors == fam) {
                let ranks = c.mean_ranks.iter().map(|r| format!("{r:.2}"));
                let cd = c.cd.map_or("-".to_owned(), |v| format!("{v:.3}"));
                md.push_str(&row(
                    std::iter::once(c.shift_type.clone()).chain(ranks).chain([format!("{:.3}", c.friedman_p), cd]),
                ));
            }
            md.push('\n');
        }
    }

    if !report.levels.is_empty() {
        md.push_str("\n## Calibrated significance levels\n\n");
        md.push_str(&row(["Dataset", "Detector", "Size", "Level"].map(String::from)));
        md.push_str(&rule(4));
        for l in &report.levels {
            let level = if l.degenerate { format!("{:.4} (degenerate)", l.level) } else { format!("{:.4}", l.level) };
            md.push_str(&row([l.dataset.clone(), l.detector.clone(), l.size.to_string(), level]));
        }
    }
    let failed = report.summary.failed_cells;
    if failed > 0 {
        let _ = write!(md, "\n{failed} of {} cells failed and are excluded from the tables.\n", report.cells.len());
    }
    md
}

pub fn write_tables_md(report: &BenchmarkReport, path: &Path) -> Result<()> {
    fs::write(path, render_tables(report)).map_err(io_err(path))
}

/// Write `cells.csv`, `report.json` and `tables.md` into `dir`.
pub fn write_outputs(report: &BenchmarkReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_cells_csv(report, &dir.join("cells.csv"))?;
    write_report_json(report, &dir.join("report.json"))?;
    write_tables_md(report, &dir.join("tables.md"))
}
