//! Static SVG renderings of the plot tables.

use std::path::{Path, PathBuf};

use plotters::prelude::*;

use parley_analysis::effects::{Arm, EffectRow, Outcome, MAX_DOSE};
use parley_analysis::report::ReportBundle;
use parley_analysis::topics::{MessageClass, TopicReport};
use parley_analysis::tone::ToneEstimate;

use crate::error::CliError;

type DrawResult = Result<(), Box<dyn std::error::Error>>;

const ARM_COLORS: [RGBColor; 3] = [RGBColor(31, 119, 180), RGBColor(214, 39, 40), RGBColor(110, 110, 110)];

fn arm_color(arm: Arm) -> RGBColor {
    ARM_COLORS[Arm::ALL.iter().position(|a| *a == arm).unwrap_or(2)]
}

fn padded(lo: f64, hi: f64) -> std::ops::Range<f64> {
    let pad = ((hi - lo) * 0.1).max(1e-6);
    (lo - pad)..(hi + pad)
}

fn save(path: &Path, seed: u64, svg: String) -> Result<PathBuf, CliError> {
    std::fs::write(path, format!("<!-- parley seed={seed} -->\n{svg}")).map_err(|e| CliError::output(path, e))?;
    Ok(path.to_path_buf())
}

fn draw_tone(svg: &mut String, estimates: &[ToneEstimate]) -> DrawResult {
    let root = SVGBackend::with_string(svg, (720, 420)).into_drawing_area();
    root.fill(&WHITE)?;
    let lo = estimates.iter().map(|e| e.ci95[0]).fold(0.0, f64::min);
    let hi = estimates.iter().map(|e| e.ci95[1]).fold(0.0, f64::max);
    let n = estimates.len();
    let mut chart = ChartBuilder::on(&root)
        .caption("Rephrased minus original (95% CI)", ("sans-serif", 18))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(-0.5..n as f64 - 0.5, padded(lo, hi))?;
    chart
        .configure_mesh()
        .x_labels(n)
        .x_label_formatter(&|x| {
            let i = x.round();
            if (x - i).abs() < 1e-9 && i >= 0.0 && (i as usize) < n {
                estimates[i as usize].feature.as_str().to_owned()
            } else {
                String::new()
            }
        })
        .y_desc("share of messages")
        .draw()?;
    chart.draw_series(LineSeries::new([(-0.5, 0.0), (n as f64 - 0.5, 0.0)], BLACK.mix(0.4)))?;
    for (i, e) in estimates.iter().enumerate() {
        let x = i as f64;
        chart.draw_series(LineSeries::new([(x, e.ci95[0]), (x, e.ci95[1])], BLACK.stroke_width(2)))?;
        chart.draw_series([Circle::new((x, e.estimate), 5, ARM_COLORS[0].filled())])?;
    }
    root.present()?;
    Ok(())
}

fn draw_topics(svg: &mut String, report: &TopicReport) -> DrawResult {
    let root = SVGBackend::with_string(svg, (760, 600)).into_drawing_area();
    root.fill(&WHITE)?;
    let xs = report.points.iter().map(|p| p.x);
    let ys = report.points.iter().map(|p| p.y);
    let (xlo, xhi) = xs.fold((0.0f64, 0.0f64), |(a, b), v| (a.min(v), b.max(v)));
    let (ylo, yhi) = ys.fold((0.0f64, 0.0f64), |(a, b), v| (a.min(v), b.max(v)));
    let mut chart = ChartBuilder::on(&root)
        .caption(
            format!("Message topics (k = {}, p = {:.3})", report.k, report.test.p),
            ("sans-serif", 18),
        )
        .margin(12)
        .x_label_area_size(30)
        .y_label_area_size(40)
        .build_cartesian_2d(padded(xlo, xhi), padded(ylo, yhi))?;
    chart.configure_mesh().x_desc("PC1").y_desc("PC2").draw()?;
    for p in &report.points {
        let color = Palette99::pick(p.cluster).to_rgba();
        let at = (p.x, p.y);
        match p.class {
            MessageClass::Untreated => chart.draw_series([Circle::new(at, 2, color.mix(0.5).filled())])?,
            MessageClass::OriginalOfTreated => chart.draw_series([Circle::new(at, 3, color.stroke_width(1))])?,
            MessageClass::Rephrased => chart.draw_series([TriangleMarker::new(at, 3, color.filled())])?,
        };
    }
    for label in &report.labels {
        let members: Vec<_> = report.points.iter().filter(|p| p.cluster == label.cluster).collect();
        if members.is_empty() {
            continue;
        }
        let cx = members.iter().map(|p| p.x).sum::<f64>() / members.len() as f64;
        let cy = members.iter().map(|p| p.y).sum::<f64>() / members.len() as f64;
        chart.draw_series([Text::new(label.label.clone(), (cx, cy), ("sans-serif", 12))])?;
    }
    root.present()?;
    Ok(())
}

fn draw_effects(svg: &mut String, panels: &[(Outcome, &[EffectRow])]) -> DrawResult {
    let root = SVGBackend::with_string(svg, (420 * panels.len() as u32, 420)).into_drawing_area();
    root.fill(&WHITE)?;
    let areas = root.split_evenly((1, panels.len()));
    for (area, (outcome, rows)) in areas.iter().zip(panels) {
        let rows: Vec<&EffectRow> = rows.iter().filter(|r| r.outcome == *outcome).collect();
        let lo = rows.iter().map(|r| r.ci95[0]).fold(f64::INFINITY, f64::min);
        let hi = rows.iter().map(|r| r.ci95[1]).fold(f64::NEG_INFINITY, f64::max);
        let range = if lo.is_finite() { padded(lo, hi) } else { 0.0..1.0 };
        let mut chart = ChartBuilder::on(area)
            .caption(outcome.as_str(), ("sans-serif", 16))
            .margin(10)
            .x_label_area_size(30)
            .y_label_area_size(45)
            .build_cartesian_2d(-0.5..MAX_DOSE as f64 + 0.5, range)?;
        chart
            .configure_mesh()
            .x_labels(MAX_DOSE as usize + 1)
            .x_label_formatter(&|x| format!("{}+", x.round() as i64))
            .x_desc("minimum dose")
            .draw()?;
        let mut labelled = Vec::new();
        for r in &rows {
            let offset = match r.arm {
                Arm::GPTSelf => -0.2,
                Arm::GPTPartner => 0.0,
                Arm::Control => 0.2,
            };
            let x = r.min_dose as f64 + offset;
            let color = arm_color(r.arm);
            chart.draw_series(LineSeries::new([(x, r.ci95[0]), (x, r.ci95[1])], color.stroke_width(1)))?;
            chart.draw_series(LineSeries::new([(x, r.ci90[0]), (x, r.ci90[1])], color.stroke_width(3)))?;
            let points = chart.draw_series([Circle::new((x, r.mean), 4, color.filled())])?;
            if !labelled.contains(&r.arm) {
                labelled.push(r.arm);
                points
                    .label(format!("{:?}", r.arm))
                    .legend(move |(x, y)| Circle::new((x, y), 4, color.filled()));
            }
        }
        chart
            .configure_series_labels()
            .position(SeriesLabelPosition::LowerRight)
            .border_style(BLACK.mix(0.3))
            .background_style(WHITE.mix(0.8))
            .draw()?;
    }
    root.present()?;
    Ok(())
}

fn render(path: PathBuf, seed: u64, draw: impl FnOnce(&mut String) -> DrawResult) -> Result<PathBuf, CliError> {
    let mut svg = String::new();
    draw(&mut svg).map_err(|e| CliError::output(&path, e))?;
    save(&path, seed, svg)
}

/// Writes tone.svg, topics.svg, effects.svg and attitude.svg into `dir`.
pub fn render_all(dir: &Path, bundle: &ReportBundle) -> Result<Vec<PathBuf>, CliError> {
    let effects = &bundle.effects.rows[..];
    let seed = bundle.tone.meta.seed;
    Ok(vec![
        render(dir.join("tone.svg"), seed, |s| draw_tone(s, &bundle.tone.estimates))?,
        render(dir.join("topics.svg"), seed, |s| draw_topics(s, &bundle.topics.report))?,
        render(dir.join("effects.svg"), seed, |s| {
            draw_effects(s, &[(Outcome::ConvQuality, effects), (Outcome::DemReciprocity, effects)])
        })?,
        render(dir.join("attitude.svg"), seed, |s| {
            draw_effects(s, &[(Outcome::AttitudeChange, &bundle.attitude.rows[..])])
        })?,
    ])
}
