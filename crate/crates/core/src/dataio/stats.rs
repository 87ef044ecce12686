//! Per-frame provenance statistics as CSV.
//!
//! Header: `timestamp,rgbd_only_pct,sfm_only_pct,fused_pct,total_measured`;
//! one row per frame, percentages with one decimal place, and a final
//! `average,...` row carrying the mean of the per-frame percentages.

use crate::error::{Error, Result};
use crate::fusion::SequenceStats;
use std::path::Path;

pub const STATS_HEADER: &str = "timestamp,rgbd_only_pct,sfm_only_pct,fused_pct,total_measured";

/// One parsed row of a stats CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsRow {
    pub timestamp: f64,
    pub rgbd_only_pct: f64,
    pub sfm_only_pct: f64,
    pub fused_pct: f64,
    pub total_measured: f64,
}

/// Writes per-frame rows plus the average row. Refuses empty input without
/// creating the file.
pub fn write_stats_csv(path: &Path, stats: &SequenceStats) -> Result<()> {
    if stats.rows.is_empty() {
        return Err(Error::EmptyInput("no frame statistics to write"));
    }
    let mut text = String::from(STATS_HEADER);
    text.push('\n');
    for row in &stats.rows {
        let (r, s, f) = row.percentages();
        text.push_str(&format!(
            "{:.6},{r:.1},{s:.1},{f:.1},{}\n",
            row.timestamp,
            row.total_measured()
        ));
    }
    let (r, s, f) = stats.average;
    text.push_str(&format!("average,{r:.1},{s:.1},{f:.1},{:.1}\n", stats.average_total));
    std::fs::write(path, text).map_err(Error::io(path))
}

/// Reads the per-frame rows back (the trailing average row is skipped; it is
/// recomputed by consumers).
pub fn read_stats_csv(path: &Path) -> Result<Vec<StatsRow>> {
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == STATS_HEADER => {}
        Some((_, header)) => {
            return Err(Error::parse(path, 1, format!("unexpected header '{header}'")))
        }
        None => return Err(Error::format(path, "empty stats file")),
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::parse(
                path,
                lineno + 1,
                format!("expected 5 fields, got {}", fields.len()),
            ));
        }
        if fields[0] == "average" {
            continue;
        }
        let mut vals = [0.0f64; 5];
        for (i, field) in fields.iter().enumerate() {
            vals[i] = field.parse().map_err(|_| {
                Error::parse(path, lineno + 1, format!("field '{field}' is not a number"))
            })?;
        }
        rows.push(StatsRow {
            timestamp: vals[0],
            rgbd_only_pct: vals[1],
            sfm_only_pct: vals[2],
            fused_pct: vals[3],
            total_measured: vals[4],
        });
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput("stats file has no frame rows"));
    }
    Ok(rows)
}
