//! SVG figures: turn-length histogram, confusion grid and sweep chart.

use std::path::Path;

use plotters::prelude::*;

use super::{write_file, ConfusionMatrix, EvalError, SweepReport};
use crate::corpus::{AttachmentLabel, TurnLengthHistogram};

const WIDTH: u32 = 720;
const HEIGHT: u32 = 480;

fn label_color(l: AttachmentLabel) -> RGBColor {
    match l {
        AttachmentLabel::Avoidant => RGBColor(31, 119, 180),
        AttachmentLabel::Secure => RGBColor(44, 160, 44),
        AttachmentLabel::Preoccupied => RGBColor(214, 39, 40),
    }
}

fn plot_err<E: std::fmt::Debug>(e: E) -> EvalError {
    EvalError::Plot(format!("{e:?}"))
}

fn render(path: &Path, draw: impl FnOnce(&DrawingArea<SVGBackend, plotters::coord::Shift>) -> Result<(), EvalError>) -> Result<(), EvalError> {
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, (WIDTH, HEIGHT)).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        draw(&root)?;
        root.present().map_err(plot_err)?;
    }
    write_file(path, &svg)
}

/// Grouped bars of patient-turn counts per length bin, one colour per label.
pub fn histogram_svg(h: &TurnLengthHistogram, path: &Path) -> Result<(), EvalError> {
    let bins = h.boundaries.len();
    let max = h.counts.0.iter().flatten().copied().max().unwrap_or(0).max(1);
    render(path, |root| {
        let mut chart = ChartBuilder::on(root)
            .caption("Patient turn length by label", ("sans-serif", 20))
            .margin(12)
            .x_label_area_size(40)
            .y_label_area_size(50)
            .build_cartesian_2d(0f64..bins as f64, 0f64..max as f64 * 1.1)
            .map_err(plot_err)?;
        let labels: Vec<String> = (0..bins).map(|i| h.bin_label(i)).collect();
        chart
            .configure_mesh()
            .disable_x_mesh()
            .x_labels(bins + 1)
            .x_label_formatter(&|x| {
                let i = x.floor() as usize;
                labels.get(i).cloned().unwrap_or_default()
            })
            .x_desc("words per turn")
            .y_desc("turns")
            .draw()
            .map_err(plot_err)?;
        for l in AttachmentLabel::ALL {
            let color = label_color(l);
            let off = l.index() as f64 * 0.27 + 0.1;
            chart
                .draw_series(h.counts[l].iter().enumerate().map(|(i, &c)| {
                    let x0 = i as f64 + off;
                    Rectangle::new([(x0, 0.0), (x0 + 0.25, c as f64)], color.filled())
                }))
                .map_err(plot_err)?
                .label(format!("{l} (mean {:.1})", h.mean_length[l]))
                .legend(move |(x, y)| Rectangle::new([(x, y - 5), (x + 10, y + 5)], color.filled()));
        }
        chart
            .configure_series_labels()
            .border_style(BLACK)
            .background_style(WHITE.mix(0.8))
            .draw()
            .map_err(plot_err)
    })
}

/// 3x3 grid shaded by row-normalised counts, gold labels down the side.
pub fn confusion_svg(cm: &ConfusionMatrix, title: &str, path: &Path) -> Result<(), EvalError> {
    render(path, |root| {
        let mut chart = ChartBuilder::on(root)
            .caption(title, ("sans-serif", 20))
            .margin(12)
            .x_label_area_size(40)
            .y_label_area_size(90)
            .build_cartesian_2d(0f64..3f64, 0f64..3f64)
            .map_err(plot_err)?;
        let name = |v: &f64| {
            let i = v.floor() as usize;
            AttachmentLabel::from_index(i).map(|l| l.to_string()).unwrap_or_default()
        };
        chart
            .configure_mesh()
            .disable_mesh()
            .x_labels(4)
            .y_labels(4)
            .x_label_formatter(&|v| name(v))
            .y_label_formatter(&|v| name(&(2.0 - v.floor())))
            .x_desc("predicted")
            .y_desc("gold")
            .draw()
            .map_err(plot_err)?;
        for g in AttachmentLabel::ALL {
            let row = cm.row_sum(g).max(1) as f64;
            for p in AttachmentLabel::ALL {
                let n = cm.get(g, p);
                let shade = n as f64 / row;
                let y0 = 2.0 - g.index() as f64;
                let x0 = p.index() as f64;
                let fill = RGBColor(
                    (255.0 * (1.0 - 0.8 * shade)) as u8,
                    (255.0 * (1.0 - 0.6 * shade)) as u8,
                    255,
                );
                chart
                    .draw_series(std::iter::once(Rectangle::new([(x0, y0), (x0 + 1.0, y0 + 1.0)], fill.filled())))
                    .map_err(plot_err)?;
                chart
                    .draw_series(std::iter::once(Text::new(
                        n.to_string(),
                        (x0 + 0.45, y0 + 0.55),
                        ("sans-serif", 22).into_font(),
                    )))
                    .map_err(plot_err)?;
            }
        }
        Ok(())
    })
}

/// Mean accuracy per minimum length with population-std error bars.
pub fn sweep_svg(report: &SweepReport, path: &Path) -> Result<(), EvalError> {
    if report.entries.is_empty() {
        return Err(EvalError::EmptyRuns);
    }
    let xmax = report.entries.iter().map(|e| e.min_length).max().unwrap_or(0) as f64;
    let pad = (xmax * 0.08).max(10.0);
    render(path, |root| {
        let mut chart = ChartBuilder::on(root)
            .caption("Accuracy by minimum input length", ("sans-serif", 20))
            .margin(12)
            .x_label_area_size(40)
            .y_label_area_size(50)
            .build_cartesian_2d(-pad..xmax + pad, 0f64..100f64)
            .map_err(plot_err)?;
        chart
            .configure_mesh()
            .x_desc("minimum words per instance")
            .y_desc("accuracy (%)")
            .draw()
            .map_err(plot_err)?;
        let pts: Vec<(f64, f64, f64)> = report
            .entries
            .iter()
            .map(|e| (e.min_length as f64, 100.0 * e.mean, 100.0 * e.std))
            .collect();
        chart
            .draw_series(LineSeries::new(pts.iter().map(|p| (p.0, p.1)), BLUE.stroke_width(2)))
            .map_err(plot_err)?;
        chart
            .draw_series(
                pts.iter()
                    .map(|&(x, m, s)| ErrorBar::new_vertical(x, m - s, m, m + s, BLUE.filled(), 8)),
            )
            .map_err(plot_err)?;
        Ok(())
    })
}
