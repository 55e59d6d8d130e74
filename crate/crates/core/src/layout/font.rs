//! Block stencil font for etched labels.
//!
//! Glyphs are 5x7 cells with no diagonal-only contacts and no enclosed
//! counters, so etched text never leaves floating metal islands.

use super::geometry::Polygon;

const W: usize = 5;
const H: usize = 7;

fn glyph(c: char) -> Option<[&'static str; H]> {
    Some(match c.to_ascii_uppercase() {
        '0' | 'O' => [
            "##.##", "#...#", "#...#", "#...#", "#...#", "#...#", "#####",
        ],
        '1' => [
            ".##..", "..#..", "..#..", "..#..", "..#..", "..#..", ".###.",
        ],
        '2' => [
            "#####", "....#", "....#", "#####", "#....", "#....", "#####",
        ],
        '3' => [
            "#####", "....#", "....#", ".####", "....#", "....#", "#####",
        ],
        '4' => [
            "#...#", "#...#", "#...#", "#####", "....#", "....#", "....#",
        ],
        '5' | 'S' => [
            "#####", "#....", "#....", "#####", "....#", "....#", "#####",
        ],
        '6' => [
            "#####", "#....", "#....", "#####", "#...#", "#...#", "##.##",
        ],
        '7' => [
            "#####", "....#", "....#", "....#", "....#", "....#", "....#",
        ],
        '8' => [
            "##.##", "#...#", "#...#", "##.##", "#...#", "#...#", "##.##",
        ],
        '9' => [
            "##.##", "#...#", "#...#", "#####", "....#", "....#", "#####",
        ],
        'A' => [
            "##.##", "#...#", "#...#", "#####", "#...#", "#...#", "#...#",
        ],
        'B' => [
            "#####", "#...#", "....#", "#####", "#...#", "....#", "#####",
        ],
        'C' => [
            "#####", "#....", "#....", "#....", "#....", "#....", "#####",
        ],
        'D' => [
            "#####", "#...#", "....#", "#...#", "#...#", "#...#", "#####",
        ],
        'E' => [
            "#####", "#....", "#....", "####.", "#....", "#....", "#####",
        ],
        'F' => [
            "#####", "#....", "#....", "####.", "#....", "#....", "#....",
        ],
        'G' => [
            "#####", "#....", "#....", "#..##", "#...#", "#...#", "#####",
        ],
        'H' => [
            "#...#", "#...#", "#...#", "#####", "#...#", "#...#", "#...#",
        ],
        'I' => [
            "#####", "..#..", "..#..", "..#..", "..#..", "..#..", "#####",
        ],
        'J' => [
            "#####", "...#.", "...#.", "...#.", "...#.", "#..#.", "####.",
        ],
        'K' => [
            "#...#", "#...#", "#..##", "####.", "#..##", "#...#", "#...#",
        ],
        'L' => [
            "#....", "#....", "#....", "#....", "#....", "#....", "#####",
        ],
        'M' => [
            "#####", "#.#.#", "#.#.#", "#.#.#", "#...#", "#...#", "#...#",
        ],
        'N' => [
            "#####", "#...#", "#...#", "#...#", "#...#", "#...#", "#...#",
        ],
        'P' => [
            "#####", "#...#", "....#", "#####", "#....", "#....", "#....",
        ],
        'Q' => [
            "##.##", "#...#", "#...#", "#...#", "#...#", "#..##", "#####",
        ],
        'R' => [
            "#####", "#...#", "....#", "#####", "#..##", "#...#", "#...#",
        ],
        'T' => [
            "#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#..",
        ],
        'U' => [
            "#...#", "#...#", "#...#", "#...#", "#...#", "#...#", "#####",
        ],
        'V' => [
            "#...#", "#...#", "#...#", "#...#", "##.##", ".#.#.", ".###.",
        ],
        'W' => [
            "#...#", "#...#", "#...#", "#.#.#", "#.#.#", "#.#.#", "#####",
        ],
        'X' => [
            "#...#", "##.##", ".###.", "..#..", ".###.", "##.##", "#...#",
        ],
        'Y' => [
            "#...#", "#...#", "##.##", ".###.", "..#..", "..#..", "..#..",
        ],
        'Z' => [
            "#####", "....#", "...##", "..##.", ".##..", "##...", "#####",
        ],
        '-' => [
            ".....", ".....", ".....", ".###.", ".....", ".....", ".....",
        ],
        '_' => [
            ".....", ".....", ".....", ".....", ".....", ".....", "#####",
        ],
        '.' => [
            ".....", ".....", ".....", ".....", ".....", ".....", "..#..",
        ],
        ' ' => [
            ".....", ".....", ".....", ".....", ".....", ".....", ".....",
        ],
        _ => return None,
    })
}

/// True when every glyph character is supported.
pub fn supports(text: &str) -> bool {
    text.chars().all(|c| glyph(c).is_some())
}

/// Cell bitmap of a glyph, row 0 at the top.
pub(crate) fn bitmap(c: char) -> Option<[[bool; W]; H]> {
    let rows = glyph(c)?;
    let mut out = [[false; W]; H];
    for (r, row) in rows.iter().enumerate() {
        for (k, ch) in row.chars().enumerate() {
            out[r][k] = ch == '#';
        }
    }
    Some(out)
}

/// Width of rendered text for a given cap height, µm.
pub fn text_width(text: &str, height: f64) -> f64 {
    let n = text.chars().count();
    if n == 0 {
        return 0.0;
    }
    let cell = height / H as f64;
    (n * (W + 1) - 1) as f64 * cell
}

/// Polygons for `text` with its lower-left corner at (`x`, `y`).
///
/// Horizontal runs of set cells become one rectangle each.
pub fn render_text(text: &str, x: f64, y: f64, height: f64) -> Vec<Polygon> {
    let cell = height / H as f64;
    let mut out = Vec::new();
    for (i, c) in text.chars().enumerate() {
        let Some(bm) = bitmap(c) else { continue };
        let x0 = x + (i * (W + 1)) as f64 * cell;
        for (r, row) in bm.iter().enumerate() {
            let yb = y + (H - 1 - r) as f64 * cell;
            let mut k = 0;
            while k < W {
                if row[k] {
                    let start = k;
                    while k < W && row[k] {
                        k += 1;
                    }
                    out.push(Polygon::rect(
                        x0 + start as f64 * cell,
                        yb,
                        x0 + k as f64 * cell,
                        yb + cell,
                    ));
                } else {
                    k += 1;
                }
            }
        }
    }
    out
}
