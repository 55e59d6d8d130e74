//! SVG preview of the rendered chip.

use std::fmt::Write;

use super::chip::{ChipDesign, Polarity, RenderedChip};

const METAL: &str = "#c9a227";
const SUBSTRATE: &str = "#2b3a55";
const SCALE_BAR_UM: f64 = 1000.0;

fn num(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

/// Draws the chip in user units of µm with +y pointing up on screen.
pub fn render_svg(design: &ChipDesign, rendered: &RenderedChip) -> String {
    let (w, h) = (design.width, design.height);
    let (background, foreground) = match design.polarity {
        Polarity::DrawEtch => (METAL, SUBSTRATE),
        Polarity::DrawMetal => (SUBSTRATE, METAL),
    };
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {} {}" width="{}" height="{}">"#,
        num(w),
        num(h),
        num(w / 10.0),
        num(h / 10.0)
    );
    let _ = writeln!(out, "<title>{}</title>", design.name);
    let _ = writeln!(
        out,
        r#"<rect x="0" y="0" width="{}" height="{}" fill="{background}" stroke="black" stroke-width="10"/>"#,
        num(w),
        num(h)
    );
    let _ = writeln!(
        out,
        r#"<g transform="matrix(1 0 0 -1 0 {})" fill="{foreground}" fill-rule="evenodd">"#,
        num(h)
    );
    for p in &rendered.polygons {
        out.push_str("<path d=\"");
        for (i, q) in p.points.iter().enumerate() {
            let _ = write!(
                out,
                "{}{} {}",
                if i == 0 { "M" } else { " L" },
                num(q.x),
                num(q.y)
            );
        }
        out.push_str(" Z\"/>\n");
    }
    out.push_str("</g>\n");
    // scale bar in screen coordinates, bottom right
    let (x0, y0) = (w - SCALE_BAR_UM - 200.0, h - 120.0);
    let _ = writeln!(
        out,
        r#"<rect x="{}" y="{}" width="{}" height="30" fill="white" stroke="black" stroke-width="4"/>"#,
        num(x0),
        num(y0),
        num(SCALE_BAR_UM)
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-size="80" font-family="sans-serif" text-anchor="middle" fill="white">{} mm</text>"#,
        num(x0 + SCALE_BAR_UM / 2.0),
        num(y0 - 20.0),
        num(SCALE_BAR_UM / 1000.0)
    );
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::{build_chip, render_chip, ChipConfig};

    #[test]
    fn svg_has_viewbox_and_every_polygon() {
        let d = build_chip(&ChipConfig::default()).unwrap();
        let r = render_chip(&d).unwrap();
        let s = render_svg(&d, &r);
        assert!(s.contains(r#"viewBox="0 0 7500 7500""#));
        assert_eq!(s.matches("<path ").count(), r.polygons.len());
        assert!(s.contains("1 mm"));
    }

    #[test]
    fn polarity_swaps_fills() {
        let d = build_chip(&ChipConfig::default()).unwrap();
        let r = render_chip(&d).unwrap();
        let a = render_svg(&d, &r);
        let mut inv = d.clone();
        inv.polarity = d.polarity.inverted();
        let b = render_svg(&inv, &r);
        assert_ne!(a, b);
        assert_eq!(
            a.replace(METAL, "X")
                .replace(SUBSTRATE, METAL)
                .replace('X', SUBSTRATE),
            b
        );
    }

    #[test]
    fn number_format() {
        assert_eq!(num(7500.0), "7500");
        assert_eq!(num(1.25), "1.25");
        assert_eq!(num(-0.0001), "0");
    }
}
