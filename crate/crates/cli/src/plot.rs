//! Static SVG line plots.

use plotters::prelude::*;

use crate::error::CliError;

pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
    /// Draw markers instead of a line.
    pub markers: bool,
}

fn plot_err<E: std::fmt::Debug>(e: E) -> CliError {
    CliError::Compute {
        kind: "Plot".into(),
        message: format!("{e:?}"),
    }
}

fn bounds(series: &[Series<'_>], log: bool, pick: fn(&(f64, f64)) -> f64) -> (f64, f64) {
    let vals = series
        .iter()
        .flat_map(|s| s.points.iter().map(pick))
        .filter(|v| v.is_finite() && (!log || *v > 0.0));
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return if log { (1.0, 10.0) } else { (0.0, 1.0) };
    }
    if log {
        (lo / 1.5, hi * 1.5)
    } else {
        let pad = 0.05 * (hi - lo).max(1e-12);
        (lo - pad, hi + pad)
    }
}

const COLORS: [RGBColor; 5] = [BLUE, RED, BLACK, GREEN, MAGENTA];

/// Render the series with logarithmic axes where requested.
pub fn line_plot(title: &str, x_label: &str, y_label: &str, series: &[Series<'_>], log_x: bool, log_y: bool) -> Result<String, CliError> {
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, (720, 480)).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let (x0, x1) = bounds(series, log_x, |p| p.0);
        let (y0, y1) = bounds(series, log_y, |p| p.1);
        let mut builder = ChartBuilder::on(&root);
        builder.caption(title, ("sans-serif", 20)).margin(12).x_label_area_size(40).y_label_area_size(70);
        macro_rules! draw {
            ($chart:expr) => {{
                let mut chart = $chart.map_err(plot_err)?;
                chart.configure_mesh().x_desc(x_label).y_desc(y_label).draw().map_err(plot_err)?;
                for (i, s) in series.iter().enumerate() {
                    let c = COLORS[i % COLORS.len()];
                    let pts = s.points.iter().copied().filter(|(x, y)| {
                        x.is_finite() && y.is_finite() && (!log_x || *x > 0.0) && (!log_y || *y > 0.0)
                    });
                    if s.markers {
                        chart
                            .draw_series(pts.map(|p| Circle::new(p, 3, c.filled())))
                            .map_err(plot_err)?
                            .label(s.label)
                            .legend(move |(x, y)| Circle::new((x + 10, y), 3, c.filled()));
                    } else {
                        chart
                            .draw_series(LineSeries::new(pts, c.stroke_width(2)))
                            .map_err(plot_err)?
                            .label(s.label)
                            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], c));
                    }
                }
                chart
                    .configure_series_labels()
                    .background_style(WHITE.mix(0.8))
                    .border_style(BLACK)
                    .draw()
                    .map_err(plot_err)?;
            }};
        }
        match (log_x, log_y) {
            (true, true) => draw!(builder.build_cartesian_2d((x0..x1).log_scale(), (y0..y1).log_scale())),
            (true, false) => draw!(builder.build_cartesian_2d((x0..x1).log_scale(), y0..y1)),
            (false, true) => draw!(builder.build_cartesian_2d(x0..x1, (y0..y1).log_scale())),
            (false, false) => draw!(builder.build_cartesian_2d(x0..x1, y0..y1)),
        }
        root.present().map_err(plot_err)?;
    }
    Ok(svg)
}
