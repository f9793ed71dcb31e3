//! File emitters for statistics, cluster maps and boxplot reports.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::clustermap::{cluster_map, clustermap_svg};
use crate::data::AucMatrix;
use crate::error::{Error, Result};
use crate::evaluation::{boxplots_to_csv, percent_of_max_boxplots, BoxplotStats};
use crate::harness::AUC_MATRIX_FILE;
use crate::rankstats::{
    friedman_ranks, iman_davenport, nemenyi_pairwise, ranks_to_csv, significance_table,
    square_matrix_to_csv, RankSummary,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Svg,
}

fn write(path: &Path, contents: &str) -> Result<PathBuf> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))?;
    Ok(path.to_path_buf())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// `ranks.csv`, `nemenyi.csv`, `significance.txt` and `rank_summary.json`.
pub fn write_stats(auc: &AucMatrix, out_dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(out_dir)?;
    let ranks = friedman_ranks(auc)?;
    let id = iman_davenport(&ranks)?;
    let p = nemenyi_pairwise(&ranks);
    let mean_auc = auc.mean_auc();
    let table = significance_table(&ranks, &p, &mean_auc);
    let mut text = String::new();
    let _ = writeln!(
        text,
        "Iman-Davenport F = {:.3} (df {} and {}), critical value at 0.05 = {:.3}",
        id.statistic,
        id.df_numerator,
        id.df_denominator,
        id.critical_value(0.05)?
    );
    let _ = writeln!(
        text,
        "++/+: row beats column at p <= 0.05/0.10; --/-: column beats row\n"
    );
    text.push_str(&table.to_ascii());
    let summary = RankSummary {
        algorithms: ranks.algorithms.clone(),
        mean_ranks: ranks.mean_ranks.clone(),
        mean_auc: mean_auc.clone(),
        f_critical_05: id.critical_value(0.05)?,
        iman_davenport: id,
        nemenyi_p: p.clone(),
    };
    Ok(vec![
        write(&out_dir.join("ranks.csv"), &ranks_to_csv(&ranks, &mean_auc))?,
        write(
            &out_dir.join("nemenyi.csv"),
            &square_matrix_to_csv(&ranks.algorithms, &p),
        )?,
        write(&out_dir.join("significance.txt"), &text)?,
        write(
            &out_dir.join("rank_summary.json"),
            &serde_json::to_string_pretty(&summary)?,
        )?,
    ])
}

/// Both dendrograms as JSON plus the SVG heatmap.
pub fn write_clustermap(auc: &AucMatrix, out_dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(out_dir)?;
    let map = cluster_map(auc)?;
    Ok(vec![
        write(
            &out_dir.join("dendrogram_algorithms.json"),
            &map.algorithms.dendrogram.to_json(&map.algorithms.order)?,
        )?,
        write(
            &out_dir.join("dendrogram_datasets.json"),
            &map.datasets.dendrogram.to_json(&map.datasets.order)?,
        )?,
        write(&out_dir.join("clustermap.svg"), &clustermap_svg(auc, &map))?,
    ])
}

/// Horizontal boxplots of percent-of-max AUC, one row per algorithm.
pub fn boxplots_svg(stats: &[BoxplotStats]) -> String {
    const ROW: f64 = 18.0;
    const LEFT: f64 = 110.0;
    const PLOT: f64 = 500.0;
    let lo = stats
        .iter()
        .flat_map(|s| s.fliers.iter().copied().chain([s.whisker_low]))
        .fold(100.0_f64, f64::min)
        .floor();
    let x = |v: f64| LEFT + (v - lo) / (100.0 - lo).max(1e-9) * PLOT;
    let height = ROW * (stats.len() as f64 + 2.0);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{height}" font-family="sans-serif" font-size="10">"#,
        LEFT + PLOT + 20.0
    );
    for (i, s) in stats.iter().enumerate() {
        let y = ROW * (i as f64 + 1.0);
        let mid = y + ROW / 2.0;
        let _ = writeln!(
            svg,
            r#"<text x="4" y="{:.1}">{}</text>"#,
            mid + 3.0,
            s.label
        );
        let _ = writeln!(
            svg,
            r#"<line x1="{:.1}" y1="{mid:.1}" x2="{:.1}" y2="{mid:.1}" stroke="black"/>"#,
            x(s.whisker_low),
            x(s.whisker_high)
        );
        let _ = writeln!(
            svg,
            r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="#9ecae1" stroke="black"/>"##,
            x(s.q1),
            y + 3.0,
            (x(s.q3) - x(s.q1)).max(0.5),
            ROW - 6.0
        );
        let _ = writeln!(
            svg,
            r#"<line x1="{0:.1}" y1="{1:.1}" x2="{0:.1}" y2="{2:.1}" stroke="black" stroke-width="2"/>"#,
            x(s.median),
            y + 3.0,
            y + ROW - 3.0
        );
        for &f in &s.fliers {
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.1}" cy="{mid:.1}" r="2" fill="none" stroke="black"/>"#,
                x(f)
            );
        }
    }
    let axis_y = ROW * (stats.len() as f64 + 1.0) + 12.0;
    let _ = writeln!(svg, r#"<text x="{:.1}" y="{axis_y:.1}">{lo}</text>"#, x(lo));
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{axis_y:.1}">100</text>"#,
        x(100.0) - 16.0
    );
    svg.push_str("</svg>\n");
    svg
}

/// Report for a completed run directory: percent-of-max boxplot data, the
/// significance table and, for SVG output, rendered boxplots and heatmap.
pub fn emit_report(results_dir: &Path, format: ReportFormat) -> Result<Vec<PathBuf>> {
    let matrix_path = results_dir.join(AUC_MATRIX_FILE);
    if !matrix_path.exists() {
        return Err(Error::Io {
            path: matrix_path,
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "missing run results"),
        });
    }
    let auc = AucMatrix::read_csv(&matrix_path)?;
    let mut stats = percent_of_max_boxplots(&auc)?;
    stats.sort_by(|a, b| b.mean.total_cmp(&a.mean));
    let mut files = vec![write(
        &results_dir.join("boxplots.csv"),
        &boxplots_to_csv(&stats),
    )?];
    if auc.n_algorithms() >= 2 && auc.n_datasets() >= 2 {
        files.extend(write_stats(&auc, results_dir)?);
    }
    if format == ReportFormat::Svg {
        files.push(write(
            &results_dir.join("boxplots.svg"),
            &boxplots_svg(&stats),
        )?);
        if auc.n_algorithms() >= 2 && auc.n_datasets() >= 2 {
            files.extend(write_clustermap(&auc, results_dir)?);
        }
    }
    Ok(files)
}
