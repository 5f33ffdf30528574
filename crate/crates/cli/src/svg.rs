//! Static log-log chart of a sweep.

use std::fmt::Write;

use sdwave_core::sweep::SweepResult;

const W: f64 = 640.0;
const H: f64 = 440.0;
const PAD: f64 = 60.0;

fn polyline(points: &[(f64, f64)], color: &str, dash: bool) -> String {
    let pts: Vec<String> = points
        .iter()
        .map(|(x, y)| format!("{x:.2},{y:.2}"))
        .collect();
    let dash = if dash {
        " stroke-dasharray=\"6 4\""
    } else {
        ""
    };
    format!(
        "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"{dash} points=\"{}\"/>\n",
        pts.join(" ")
    )
}

/// `log10 t_star_est` and `log10 t_lower_bound` against `log10 rho`, plus a
/// line of slope `-(p-2)` through the largest blow-up point.
pub fn sweep_chart(result: &SweepResult) -> String {
    let blow: Vec<(f64, f64, f64)> = result
        .rows
        .iter()
        .filter_map(|r| {
            r.t_star_est
                .map(|t| (r.rho.log10(), t.log10(), r.t_lower_bound.log10()))
        })
        .collect();
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    );
    if blow.is_empty() {
        svg.push_str("<text x=\"20\" y=\"40\">no blow-up rows</text>\n</svg>\n");
        return svg;
    }
    let (x0, x1) = blow
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |a, r| {
            (a.0.min(r.0), a.1.max(r.0))
        });
    let ys = blow.iter().flat_map(|r| [r.1, r.2]);
    let (y0, y1) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |a, y| {
        (a.0.min(y), a.1.max(y))
    });
    let (x0, x1) = if x1 > x0 {
        (x0, x1)
    } else {
        (x0 - 0.5, x1 + 0.5)
    };
    let (y0, y1) = if y1 > y0 {
        (y0 - 0.1, y1 + 0.1)
    } else {
        (y0 - 0.5, y1 + 0.5)
    };
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);

    let _ = writeln!(
        svg,
        "<rect x=\"{PAD}\" y=\"{PAD}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>",
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    let est: Vec<(f64, f64)> = blow.iter().map(|r| (sx(r.0), sy(r.1))).collect();
    let floor: Vec<(f64, f64)> = blow.iter().map(|r| (sx(r.0), sy(r.2))).collect();
    svg.push_str(&polyline(&est, "#1f77b4", false));
    svg.push_str(&polyline(&floor, "#d62728", true));
    for (x, y) in &est {
        let _ = writeln!(
            svg,
            "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"3\" fill=\"#1f77b4\"/>"
        );
    }
    let last = blow[blow.len() - 1];
    let slope = -(result.p - 2.0);
    let reference = [
        (x0, last.1 + slope * (x0 - last.0)),
        (x1, last.1 + slope * (x1 - last.0)),
    ];
    let clipped: Vec<(f64, f64)> = reference
        .iter()
        .map(|&(x, y)| (sx(x), sy(y.clamp(y0, y1))))
        .collect();
    svg.push_str(&polyline(&clipped, "#7f7f7f", true));

    let label = |svg: &mut String, x: f64, y: f64, anchor: &str, text: &str| {
        let _ = writeln!(svg, "<text x=\"{x:.2}\" y=\"{y:.2}\" font-size=\"12\" text-anchor=\"{anchor}\">{text}</text>");
    };
    label(&mut svg, W / 2.0, H - 20.0, "middle", "log10 rho");
    label(&mut svg, 15.0, PAD - 15.0, "start", "log10 t");
    label(
        &mut svg,
        sx(x0),
        H - PAD + 16.0,
        "start",
        &format!("{x0:.2}"),
    );
    label(&mut svg, sx(x1), H - PAD + 16.0, "end", &format!("{x1:.2}"));
    label(&mut svg, PAD - 6.0, sy(y0), "end", &format!("{y0:.2}"));
    label(
        &mut svg,
        PAD - 6.0,
        sy(y1) + 10.0,
        "end",
        &format!("{y1:.2}"),
    );
    label(
        &mut svg,
        W - PAD,
        PAD - 30.0,
        "end",
        "t_star_est (blue), floor (red), slope -(p-2) (grey)",
    );
    svg.push_str("</svg>\n");
    svg
}
