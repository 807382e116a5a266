//! The three report forms every command writes: a machine record, a CSV
//! table, and plot series.

use std::path::Path;

use caplab_core::io::{csv, Record};

/// One plottable curve; rendering is left to external tools.
pub struct Series {
    pub label: String,
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<(f64, f64)>,
}

/// Everything a command reports. `record` is authoritative; the CSV table
/// has one row per sample and the plot file one row per series point.
pub struct Bundle {
    pub record: Record,
    pub csv_header: Vec<String>,
    pub csv_rows: Vec<Vec<String>>,
    pub series: Vec<Series>,
}

impl Bundle {
    pub fn new(record: Record, csv_header: &[&str]) -> Self {
        Bundle {
            record,
            csv_header: csv_header.iter().map(|s| s.to_string()).collect(),
            csv_rows: Vec::new(),
            series: Vec::new(),
        }
    }

    /// Writes report.txt, table.csv, and plot.csv into `out`.
    pub fn write(&self, out: &Path) -> anyhow::Result<()> {
        std::fs::create_dir_all(out)?;
        std::fs::write(out.join("report.txt"), self.record.emit())?;
        let header: Vec<&str> = self.csv_header.iter().map(String::as_str).collect();
        std::fs::write(out.join("table.csv"), csv(&header, &self.csv_rows))?;
        let mut plot_rows = Vec::new();
        for s in &self.series {
            for &(x, y) in &s.points {
                plot_rows.push(vec![
                    s.label.clone(),
                    s.x_label.clone(),
                    s.y_label.clone(),
                    x.to_string(),
                    y.to_string(),
                ]);
            }
        }
        std::fs::write(
            out.join("plot.csv"),
            csv(&["series", "x_label", "y_label", "x", "y"], &plot_rows),
        )?;
        Ok(())
    }
}
