//! SVG exports. Every plot writes a lossless CSV companion next to it
//! (same stem, .csv extension); quantitative checks belong on the CSV.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::gp::Dataset;
use crate::som::NodeStats;

use super::ExploreError;

fn companion_path(path: &Path) -> PathBuf {
    let mut p = path.to_path_buf();
    p.set_extension("csv");
    p
}

/// Scale a column to [0, 1]; a constant column maps to 0.5 everywhere.
fn scale01(v: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        (v - lo) / (hi - lo)
    } else {
        0.5
    }
}

/// Parallel-coordinate plot: one vertical axis per input (in `axis_order`)
/// plus the output axis, one polyline per instance, all values scaled
/// per-axis to [0, 1].
pub fn parallel_coords_export(
    ds: &Dataset,
    axis_order: &[usize],
    path: &Path,
) -> Result<(), ExploreError> {
    let d = ds.dim();
    let mut seen = vec![false; d];
    if axis_order.len() != d || axis_order.iter().any(|&i| i >= d || std::mem::replace(&mut seen[i], true)) {
        return Err(ExploreError::Invalid(format!(
            "axis order must be a permutation of 0..{d}"
        )));
    }
    if ds.is_empty() {
        return Err(ExploreError::Invalid("empty dataset".into()));
    }

    let mut axis_names: Vec<String> = axis_order
        .iter()
        .map(|&i| ds.feature_names[i].clone())
        .collect();
    axis_names.push("output".into());

    // per-axis extrema over the dataset itself
    let mut ranges: Vec<(f64, f64)> = axis_order
        .iter()
        .map(|&i| {
            let vals = ds.features_raw.iter().map(|r| r[i]);
            let lo = vals.clone().fold(f64::INFINITY, f64::min);
            let hi = vals.fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        })
        .collect();
    let ylo = ds.outputs.iter().cloned().fold(f64::INFINITY, f64::min);
    let yhi = ds.outputs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    ranges.push((ylo, yhi));

    let scaled: Vec<Vec<f64>> = ds
        .features_raw
        .iter()
        .zip(&ds.outputs)
        .map(|(row, y)| {
            let mut v: Vec<f64> = axis_order
                .iter()
                .zip(&ranges)
                .map(|(&i, &(lo, hi))| scale01(row[i], lo, hi))
                .collect();
            let (lo, hi) = ranges[d];
            v.push(scale01(*y, lo, hi));
            v
        })
        .collect();

    // companion CSV of the scaled polyline coordinates
    let mut writer = csv::Writer::from_path(companion_path(path))?;
    writer.write_record(&axis_names)?;
    for row in &scaled {
        writer.write_record(row.iter().map(|v| format!("{v}")))?;
    }
    writer.flush()?;

    // layout
    let margin = 40.0;
    let axis_gap = 120.0;
    let height = 400.0;
    let width = margin * 2.0 + axis_gap * (axis_names.len() - 1) as f64;
    let x_of = |axis: usize| margin + axis as f64 * axis_gap;
    let y_of = |v: f64| margin + (1.0 - v) * height;

    let mut svg = String::new();
    writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0}\" height=\"{:.0}\" viewBox=\"0 0 {:.0} {:.0}\">",
        width,
        height + 2.0 * margin,
        width,
        height + 2.0 * margin
    )
    .unwrap();
    for (a, name) in axis_names.iter().enumerate() {
        let x = x_of(a);
        writeln!(
            svg,
            "  <line x1=\"{x:.1}\" y1=\"{:.1}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"#333\"/>",
            y_of(1.0),
            y_of(0.0)
        )
        .unwrap();
        writeln!(
            svg,
            "  <text x=\"{x:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\">{name}</text>",
            y_of(0.0) + 20.0
        )
        .unwrap();
    }
    for row in &scaled {
        let pts: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(a, v)| format!("{:.2},{:.2}", x_of(a), y_of(*v)))
            .collect();
        writeln!(
            svg,
            "  <polyline points=\"{}\" fill=\"none\" stroke=\"#1f77b4\" stroke-opacity=\"0.5\"/>",
            pts.join(" ")
        )
        .unwrap();
    }
    writeln!(svg, "</svg>").unwrap();
    std::fs::write(path, svg)?;
    Ok(())
}

/// Which node quantity a SOM heatmap displays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeatmapQuantity {
    /// One weight dimension.
    Weight(usize),
    Count,
    MeanOutput,
    InRange,
}

impl HeatmapQuantity {
    /// The plotted value for one node; None means "no data".
    fn value(&self, s: &NodeStats) -> Option<f64> {
        match self {
            HeatmapQuantity::Weight(dim) => s.weights.get(*dim).copied(),
            HeatmapQuantity::Count => Some(s.count as f64),
            HeatmapQuantity::MeanOutput => s.mean_output,
            HeatmapQuantity::InRange => Some(s.in_range as f64),
        }
    }

    pub fn label(&self) -> String {
        match self {
            HeatmapQuantity::Weight(dim) => format!("weight:{dim}"),
            HeatmapQuantity::Count => "count".into(),
            HeatmapQuantity::MeanOutput => "mean".into(),
            HeatmapQuantity::InRange => "inrange".into(),
        }
    }
}

/// Linear blue-to-red ramp over [0, 1].
fn ramp(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let r = (255.0 * t).round() as u8;
    let b = (255.0 * (1.0 - t)).round() as u8;
    format!("#{r:02x}40{b:02x}")
}

const NO_DATA_FILL: &str = "#cccccc";

/// Hexagonal heatmap of a node quantity. Nodes render as pointy-top
/// hexagons with circumradius 1/sqrt(3) so neighboring cells tile at unit
/// spacing; the companion CSV holds row, col, value (value empty when the
/// node has no data).
pub fn som_heatmap_export(
    stats: &[NodeStats],
    quantity: HeatmapQuantity,
    path: &Path,
) -> Result<(), ExploreError> {
    if stats.is_empty() {
        return Err(ExploreError::Invalid("no node statistics".into()));
    }
    let values: Vec<Option<f64>> = stats.iter().map(|s| quantity.value(s)).collect();
    if matches!(quantity, HeatmapQuantity::Weight(d) if stats.iter().any(|s| s.weights.len() <= d))
    {
        return Err(ExploreError::Invalid(
            "weight dimension out of range".into(),
        ));
    }

    let mut writer = csv::Writer::from_path(companion_path(path))?;
    writer.write_record(["row", "col", "value"])?;
    for (s, v) in stats.iter().zip(&values) {
        writer.write_record([
            s.row.to_string(),
            s.col.to_string(),
            v.map(|v| format!("{v}")).unwrap_or_default(),
        ])?;
    }
    writer.flush()?;

    let present: Vec<f64> = values.iter().filter_map(|v| *v).collect();
    let lo = present.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = present.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    let scale = 24.0;
    let margin = 30.0;
    let circ = 1.0 / 3.0_f64.sqrt();
    let row_pitch = 3.0_f64.sqrt() / 2.0;
    let max_x = stats
        .iter()
        .map(|s| s.col as f64 + 0.5 * (s.row % 2) as f64)
        .fold(0.0, f64::max);
    let max_y = stats.iter().map(|s| s.row as f64 * row_pitch).fold(0.0, f64::max);
    let width = margin * 2.0 + (max_x + 1.0) * scale;
    let height = margin * 2.0 + (max_y + 1.0) * scale + 30.0;

    let mut svg = String::new();
    writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\">"
    )
    .unwrap();
    for (s, v) in stats.iter().zip(&values) {
        let cx = margin + (s.col as f64 + 0.5 * (s.row % 2) as f64 + 0.5) * scale;
        let cy = margin + (s.row as f64 * row_pitch + 0.5) * scale;
        let fill = match v {
            Some(v) if hi > lo => ramp((v - lo) / (hi - lo)),
            Some(_) => ramp(0.5),
            None => NO_DATA_FILL.to_string(),
        };
        // pointy-top hexagon vertices, starting at the top
        let pts: Vec<String> = (0..6)
            .map(|k| {
                let ang = std::f64::consts::PI / 180.0 * (60.0 * k as f64 - 90.0);
                format!(
                    "{:.2},{:.2}",
                    cx + circ * scale * ang.cos(),
                    cy + circ * scale * ang.sin()
                )
            })
            .collect();
        writeln!(
            svg,
            "  <polygon points=\"{}\" fill=\"{fill}\" stroke=\"#555\" stroke-width=\"0.5\"/>",
            pts.join(" ")
        )
        .unwrap();
    }
    // legend: min/max of the ramp
    if present.is_empty() {
        writeln!(
            svg,
            "  <text x=\"{margin:.0}\" y=\"{:.0}\" font-size=\"12\">{}: no data</text>",
            height - 10.0,
            quantity.label()
        )
        .unwrap();
    } else {
        writeln!(
            svg,
            "  <text x=\"{margin:.0}\" y=\"{:.0}\" font-size=\"12\">{}: {lo} (blue) to {hi} (red)</text>",
            height - 10.0,
            quantity.label()
        )
        .unwrap();
    }
    writeln!(svg, "</svg>").unwrap();
    std::fs::write(path, svg)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::som::{batch_train, node_stats, HexGrid, SomConfig};

    fn read_csv(path: &Path) -> Vec<Vec<String>> {
        let mut reader = csv::Reader::from_path(path).unwrap();
        reader
            .records()
            .map(|r| r.unwrap().iter().map(str::to_string).collect())
            .collect()
    }

    #[test]
    fn parplot_single_instance() {
        let ds = Dataset::new(
            vec!["a".into(), "b".into()],
            vec![vec![1.0, 2.0]],
            vec![3.0],
        );
        let dir = tempfile::tempdir().unwrap();
        let svg = dir.path().join("p.svg");
        parallel_coords_export(&ds, &[0, 1], &svg).unwrap();
        let rows = read_csv(&dir.path().join("p.csv"));
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].len(), 3);
        // single instance: every axis is constant → 0.5 everywhere
        for cell in &rows[0] {
            assert_eq!(cell.parse::<f64>().unwrap(), 0.5);
        }
        let text = std::fs::read_to_string(&svg).unwrap();
        assert_eq!(text.matches("<polyline").count(), 1);
    }

    #[test]
    fn parplot_min_instance_at_zero() {
        let ds = Dataset::new(
            vec!["a".into(), "b".into()],
            vec![vec![0.0, 0.0], vec![2.0, 4.0]],
            vec![1.0, 5.0],
        );
        let dir = tempfile::tempdir().unwrap();
        parallel_coords_export(&ds, &[1, 0], &dir.path().join("p.svg")).unwrap();
        let rows = read_csv(&dir.path().join("p.csv"));
        assert_eq!(rows[0], vec!["0", "0", "0"]);
        assert_eq!(rows[1], vec!["1", "1", "1"]);
    }

    #[test]
    fn parplot_axis_order_permutes_columns() {
        let ds = Dataset::new(
            vec!["a".into(), "b".into()],
            vec![vec![0.0, 4.0], vec![2.0, 0.0]],
            vec![0.0, 1.0],
        );
        let dir = tempfile::tempdir().unwrap();
        parallel_coords_export(&ds, &[1, 0], &dir.path().join("p.svg")).unwrap();
        let mut reader = csv::Reader::from_path(dir.path().join("p.csv")).unwrap();
        let header: Vec<String> = reader.headers().unwrap().iter().map(str::to_string).collect();
        assert_eq!(header, vec!["b", "a", "output"]);
    }

    #[test]
    fn parplot_rejects_bad_order() {
        let ds = Dataset::new(
            vec!["a".into(), "b".into()],
            vec![vec![0.0, 1.0]],
            vec![0.0],
        );
        let dir = tempfile::tempdir().unwrap();
        assert!(parallel_coords_export(&ds, &[0, 0], &dir.path().join("p.svg")).is_err());
        assert!(parallel_coords_export(&ds, &[0], &dir.path().join("p.svg")).is_err());
    }

    fn demo_stats() -> Vec<NodeStats> {
        let grid = HexGrid::new(3, 3);
        let data = vec![vec![0.1, 0.1], vec![0.9, 0.9], vec![0.5, 0.5], vec![0.2, 0.8]];
        let outputs = vec![1.0, 2.0, 3.0, 4.0];
        let model = batch_train(&data, &grid, &SomConfig::preset_10x10(3));
        node_stats(&model, &data, &outputs, Some((2.0, 4.0)))
    }

    #[test]
    fn heatmap_csv_round_trips_stats() {
        let stats = demo_stats();
        let dir = tempfile::tempdir().unwrap();
        som_heatmap_export(&stats, HeatmapQuantity::Count, &dir.path().join("h.svg")).unwrap();
        let rows = read_csv(&dir.path().join("h.csv"));
        assert_eq!(rows.len(), stats.len());
        for (row, s) in rows.iter().zip(&stats) {
            assert_eq!(row[0].parse::<usize>().unwrap(), s.row);
            assert_eq!(row[1].parse::<usize>().unwrap(), s.col);
            assert_eq!(row[2].parse::<f64>().unwrap(), s.count as f64);
        }
    }

    #[test]
    fn heatmap_mean_empty_nodes_blank_in_csv_and_grey_in_svg() {
        let stats = demo_stats();
        assert!(stats.iter().any(|s| s.count == 0));
        let dir = tempfile::tempdir().unwrap();
        let svg = dir.path().join("h.svg");
        som_heatmap_export(&stats, HeatmapQuantity::MeanOutput, &svg).unwrap();
        let rows = read_csv(&dir.path().join("h.csv"));
        for (row, s) in rows.iter().zip(&stats) {
            match s.mean_output {
                Some(m) => assert_eq!(row[2].parse::<f64>().unwrap(), m),
                None => assert!(row[2].is_empty()),
            }
        }
        let text = std::fs::read_to_string(&svg).unwrap();
        assert!(text.contains(NO_DATA_FILL));
    }

    #[test]
    fn heatmap_single_node() {
        let grid = HexGrid::new(1, 1);
        let data = vec![vec![0.3], vec![0.7]];
        let model = batch_train(&data, &grid, &SomConfig::preset_10x10(1));
        let stats = node_stats(&model, &data, &[1.0, 2.0], None);
        let dir = tempfile::tempdir().unwrap();
        let svg = dir.path().join("h.svg");
        som_heatmap_export(&stats, HeatmapQuantity::Weight(0), &svg).unwrap();
        let text = std::fs::read_to_string(&svg).unwrap();
        assert_eq!(text.matches("<polygon").count(), 1);
        let rows = read_csv(&dir.path().join("h.csv"));
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0][2].parse::<f64>().unwrap(), stats[0].weights[0]);
    }

    #[test]
    fn heatmap_weight_dim_out_of_range() {
        let stats = demo_stats();
        let dir = tempfile::tempdir().unwrap();
        assert!(
            som_heatmap_export(&stats, HeatmapQuantity::Weight(9), &dir.path().join("h.svg"))
                .is_err()
        );
    }
}
