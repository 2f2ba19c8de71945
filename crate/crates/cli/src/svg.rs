use std::fmt::Write;

use nalgebra::DVector;
use srot::monge::InterpolationFrames;

const SIZE: f64 = 600.0;

/// One polyline per mass point through its positions in time order, a
/// marker at each start and at the target. Uses the first two coordinates;
/// the y axis points up.
pub fn frames_svg(frames: &InterpolationFrames, target: Option<&DVector<f64>>) -> String {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for cloud in &frames.clouds {
        for p in cloud {
            xs.push(p[0]);
            ys.push(if p.len() > 1 { p[1] } else { 0.0 });
        }
    }
    if let Some(t) = target {
        xs.push(t[0]);
        ys.push(if t.len() > 1 { t[1] } else { 0.0 });
    }
    let (x0, x1) = bounds(&xs);
    let (y0, y1) = bounds(&ys);
    let span = (x1 - x0).max(y1 - y0).max(1e-9);
    let margin = 0.05 * span;
    let (vx, vy) = (x0 - margin, -(y1 + margin));
    let vw = (x1 - x0) + 2.0 * margin;
    let vh = (y1 - y0) + 2.0 * margin;
    let stroke = vw.max(vh) / 300.0;

    let mut order: Vec<usize> = (0..frames.times.len()).collect();
    order.sort_by(|&a, &b| frames.times[a].total_cmp(&frames.times[b]));

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{:.0}" viewBox="{vx} {vy} {vw} {vh}">"#,
        SIZE * vh / vw
    );
    let _ = writeln!(
        s,
        r#"<rect x="{vx}" y="{vy}" width="{vw}" height="{vh}" fill="white"/>"#
    );
    let points = frames.clouds.first().map_or(0, |c| c.len());
    for i in 0..points {
        let path: Vec<String> = order
            .iter()
            .map(|&m| {
                let p = &frames.clouds[m][i];
                format!("{},{}", p[0], -(if p.len() > 1 { p[1] } else { 0.0 }))
            })
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="{stroke}"/>"#,
            path.join(" ")
        );
        if let Some(&first) = order.first() {
            let p = &frames.clouds[first][i];
            let _ = writeln!(
                s,
                r#"<circle cx="{}" cy="{}" r="{}" fill="black"/>"#,
                p[0],
                -(if p.len() > 1 { p[1] } else { 0.0 }),
                2.0 * stroke
            );
        }
    }
    if let Some(t) = target {
        let _ = writeln!(
            s,
            r#"<circle cx="{}" cy="{}" r="{}" fill="crimson"/>"#,
            t[0],
            -(if t.len() > 1 { t[1] } else { 0.0 }),
            3.0 * stroke
        );
    }
    s.push_str("</svg>\n");
    s
}

fn bounds(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo.is_finite() {
        (lo, hi)
    } else {
        (0.0, 1.0)
    }
}
