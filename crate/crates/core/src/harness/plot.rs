//! Static SVG bar charts from `results.csv`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::arch::ArchitectureMode;
use crate::error::{Error, Result};

const REQUIRED: [&str; 8] = [
    "encoder",
    "mode",
    "lambda1",
    "lambda2",
    "dropout",
    "model_acc",
    "make_acc_direct",
    "make_acc_derived",
];

pub const PLOT_HEIGHT: f64 = 300.0;
const TOP: f64 = 40.0;
const LEFT: f64 = 60.0;
const BAR_WIDTH: f64 = 24.0;
const GROUP_GAP: f64 = 32.0;
const BOTTOM: f64 = 70.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Model,
    /// Direct make head where present, otherwise derived from the model
    /// prediction (single-task rows).
    Make,
}

impl Metric {
    fn title(self) -> &'static str {
        match self {
            Metric::Model => "Test model accuracy",
            Metric::Make => "Test make accuracy",
        }
    }

    fn file_name(self) -> &'static str {
        match self {
            Metric::Model => "model_acc.svg",
            Metric::Make => "make_acc.svg",
        }
    }
}

/// Mean accuracy of one bar.
#[derive(Debug, Clone, PartialEq)]
pub struct Bar {
    pub mode: ArchitectureMode,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarGroup {
    /// `encoder [λ1, λ2] dropout`.
    pub label: String,
    pub bars: Vec<Bar>,
}

/// Groups rows by (encoder, weights, dropout) in order of first appearance
/// and averages each mode's metric over the remaining axes (seeds).
pub fn bar_groups(csv_text: &str, metric: Metric) -> Result<Vec<BarGroup>> {
    let mut reader = csv::Reader::from_reader(csv_text.as_bytes());
    let headers = reader.headers()?.clone();
    let missing: Vec<String> = REQUIRED
        .iter()
        .filter(|c| !headers.iter().any(|h| h == **c))
        .map(|c| c.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Schema { missing });
    }
    let col = |name: &str| headers.iter().position(|h| h == name).expect("checked above");
    let [enc, mode, l1, l2, drop, model, direct, derived] = REQUIRED.map(col);

    // (label, per-mode (sum, count))
    let mut groups: Vec<(String, [(f64, usize); 3])> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let label = format!("{} [{}, {}] d{}", &record[enc], &record[l1], &record[l2], &record[drop]);
        let mode: ArchitectureMode = record[mode].parse()?;
        let parse = |i: usize| -> Result<Option<f64>> {
            let s = record[i].trim();
            if s.is_empty() {
                return Ok(None);
            }
            s.parse()
                .map(Some)
                .map_err(|_| Error::Data(format!("unparseable accuracy {s:?}")))
        };
        let value = match metric {
            Metric::Model => parse(model)?,
            Metric::Make => parse(direct)?.or(parse(derived)?),
        };
        let Some(value) = value else { continue };
        let slot = match groups.iter().position(|(l, _)| *l == label) {
            Some(i) => i,
            None => {
                groups.push((label, [(0.0, 0); 3]));
                groups.len() - 1
            }
        };
        let m = ArchitectureMode::ALL.iter().position(|&x| x == mode).expect("known mode");
        groups[slot].1[m].0 += value;
        groups[slot].1[m].1 += 1;
    }
    Ok(groups
        .into_iter()
        .map(|(label, acc)| BarGroup {
            label,
            bars: ArchitectureMode::ALL
                .iter()
                .zip(acc)
                .filter(|(_, (_, n))| *n > 0)
                .map(|(&mode, (sum, n))| Bar {
                    mode,
                    value: sum / n as f64,
                })
                .collect(),
        })
        .collect())
}

fn color(mode: ArchitectureMode) -> &'static str {
    match mode {
        ArchitectureMode::SingleTask => "#8c8c8c",
        ArchitectureMode::Parallel => "#3b75af",
        ArchitectureMode::Cascaded => "#d0743c",
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Grouped bar chart on a 0–1 axis; bar height is `value·PLOT_HEIGHT`.
pub fn render_svg(groups: &[BarGroup], title: &str) -> String {
    let group_width = 3.0 * BAR_WIDTH + GROUP_GAP;
    let width = (LEFT + GROUP_GAP + groups.len() as f64 * group_width).max(LEFT + 340.0);
    let height = TOP + PLOT_HEIGHT + BOTTOM;
    let base_y = TOP + PLOT_HEIGHT;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<text x="{LEFT}" y="20" font-size="14">{}</text>"#, escape(title));
    for i in 0..=4 {
        let v = i as f64 / 4.0;
        let y = base_y - v * PLOT_HEIGHT;
        let _ = writeln!(
            s,
            r##"<line class="grid" x1="{LEFT}" y1="{y}" x2="{width}" y2="{y}" stroke="#e0e0e0"/><text x="{}" y="{}" text-anchor="end">{v:.2}</text>"##,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<line class="axis" x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{base_y}" stroke="black"/><line class="axis" x1="{LEFT}" y1="{base_y}" x2="{width}" y2="{base_y}" stroke="black"/>"#
    );
    for (g, group) in groups.iter().enumerate() {
        let x0 = LEFT + GROUP_GAP + g as f64 * group_width;
        for bar in &group.bars {
            let slot = ArchitectureMode::ALL.iter().position(|&m| m == bar.mode).expect("known mode");
            let h = bar.value * PLOT_HEIGHT;
            let _ = writeln!(
                s,
                r#"<rect class="bar" data-group="{}" data-mode="{}" data-value="{}" x="{}" y="{}" width="{BAR_WIDTH}" height="{h}" fill="{}"/>"#,
                escape(&group.label),
                bar.mode,
                bar.value,
                x0 + slot as f64 * BAR_WIDTH,
                base_y - h,
                color(bar.mode)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            x0 + 1.5 * BAR_WIDTH,
            base_y + 16.0,
            escape(&group.label)
        );
    }
    for (i, mode) in ArchitectureMode::ALL.iter().enumerate() {
        let x = LEFT + i as f64 * 110.0;
        let y = height - 24.0;
        let _ = writeln!(
            s,
            r#"<rect class="legend" x="{x}" y="{}" width="10" height="10" fill="{}"/><text x="{}" y="{y}">{mode}</text>"#,
            y - 9.0,
            color(*mode),
            x + 14.0
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `model_acc.svg` and `make_acc.svg` into `out_dir`.
pub fn emit_plots(results_csv: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let text = std::fs::read_to_string(results_csv).map_err(|e| Error::io(results_csv, e))?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    for metric in [Metric::Model, Metric::Make] {
        let svg = render_svg(&bar_groups(&text, metric)?, metric.title());
        let path = out_dir.join(metric.file_name());
        std::fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
