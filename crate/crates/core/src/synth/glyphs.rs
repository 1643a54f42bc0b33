//! Built-in stroke skeletons for the 62 alphanumeric glyphs.
//!
//! Glyphs are polylines on an 8x14 design grid: x grows right in [0,8],
//! y grows down in [0,14]. Cap top sits at y=1, the x-height line at y=4.5,
//! the baseline at y=11 and descenders reach y=14. Font files restyle these
//! skeletons (weight, slant, width, serifs) rather than shipping outlines.

pub type Stroke = &'static [(f32, f32)];

pub const GRID_W: f32 = 8.0;
pub const CAP_TOP: f32 = 1.0;
pub const BASELINE: f32 = 11.0;
pub const DESCENDER: f32 = 14.0;
/// Cap height in design units; font size is expressed as cap height.
pub const CAP_HEIGHT: f32 = BASELINE - CAP_TOP;

pub fn strokes(c: char) -> Option<&'static [Stroke]> {
    let s: &'static [Stroke] = match c {
        '0' => &[
            &[
                (2.5, 1.5),
                (5.5, 1.5),
                (6.5, 3.0),
                (6.5, 9.0),
                (5.5, 10.5),
                (2.5, 10.5),
                (1.5, 9.0),
                (1.5, 3.0),
                (2.5, 1.5),
            ],
            &[(2.2, 9.0), (5.8, 3.0)],
        ],
        '1' => &[&[(2.5, 3.0), (4.0, 1.5), (4.0, 11.0)], &[(2.5, 11.0), (5.5, 11.0)]],
        '2' => &[&[
            (1.5, 3.0),
            (2.5, 1.5),
            (5.5, 1.5),
            (6.5, 3.0),
            (6.5, 4.5),
            (1.5, 9.5),
            (1.5, 11.0),
            (6.5, 11.0),
        ]],
        '3' => &[
            &[(1.5, 2.5), (3.0, 1.5), (5.0, 1.5), (6.3, 3.0), (6.3, 4.5), (4.5, 6.0)],
            &[(4.5, 6.0), (6.5, 7.5), (6.5, 9.0), (5.0, 10.8), (3.0, 10.8), (1.5, 9.5)],
        ],
        '4' => &[&[(5.0, 11.0), (5.0, 1.5), (1.3, 8.0), (6.8, 8.0)]],
        '5' => &[&[
            (6.3, 1.5),
            (1.8, 1.5),
            (1.6, 6.0),
            (4.5, 5.2),
            (6.4, 6.8),
            (6.4, 9.0),
            (4.8, 10.8),
            (2.8, 10.8),
            (1.4, 9.6),
        ]],
        '6' => &[&[
            (6.2, 2.0),
            (4.5, 1.3),
            (2.8, 2.2),
            (1.6, 5.0),
            (1.6, 8.6),
            (3.0, 10.8),
            (5.0, 10.8),
            (6.4, 9.0),
            (6.4, 7.4),
            (5.0, 5.8),
            (3.0, 5.8),
            (1.7, 7.2),
        ]],
        '7' => &[&[(1.5, 1.5), (6.5, 1.5), (3.5, 11.0)]],
        '8' => &[
            &[
                (4.0, 6.0),
                (2.0, 5.0),
                (1.8, 3.0),
                (3.0, 1.4),
                (5.0, 1.4),
                (6.2, 3.0),
                (6.0, 5.0),
                (4.0, 6.0),
            ],
            &[
                (4.0, 6.0),
                (6.3, 7.3),
                (6.4, 9.3),
                (5.0, 10.9),
                (3.0, 10.9),
                (1.6, 9.3),
                (1.7, 7.3),
                (4.0, 6.0),
            ],
        ],
        '9' => &[&[
            (1.8, 10.0),
            (3.5, 10.9),
            (5.2, 10.0),
            (6.4, 7.5),
            (6.4, 3.4),
            (5.0, 1.4),
            (3.0, 1.4),
            (1.6, 3.0),
            (1.6, 4.8),
            (3.0, 6.4),
            (5.0, 6.4),
            (6.3, 5.0),
        ]],
        'A' => &[&[(1.0, 11.0), (4.0, 1.0), (7.0, 11.0)], &[(2.2, 7.5), (5.8, 7.5)]],
        'B' => &[
            &[(1.8, 1.5), (1.8, 11.0)],
            &[(1.8, 1.5), (4.8, 1.5), (6.0, 2.8), (6.0, 4.6), (4.8, 5.9), (1.8, 5.9)],
            &[(4.8, 5.9), (6.3, 7.2), (6.3, 9.5), (4.9, 11.0), (1.8, 11.0)],
        ],
        'C' => &[&[
            (6.4, 2.8),
            (5.0, 1.4),
            (3.0, 1.4),
            (1.6, 3.0),
            (1.6, 9.0),
            (3.0, 10.8),
            (5.0, 10.8),
            (6.4, 9.2),
        ]],
        'D' => &[
            &[(1.8, 1.5), (1.8, 11.0)],
            &[(1.8, 1.5), (4.4, 1.5), (6.3, 3.4), (6.3, 9.0), (4.4, 11.0), (1.8, 11.0)],
        ],
        'E' => &[
            &[(6.2, 1.5), (1.8, 1.5), (1.8, 11.0), (6.2, 11.0)],
            &[(1.8, 6.0), (5.4, 6.0)],
        ],
        'F' => &[&[(6.2, 1.5), (1.8, 1.5), (1.8, 11.0)], &[(1.8, 6.0), (5.2, 6.0)]],
        'G' => &[&[
            (6.4, 2.8),
            (5.0, 1.4),
            (3.0, 1.4),
            (1.6, 3.0),
            (1.6, 9.0),
            (3.0, 10.8),
            (5.0, 10.8),
            (6.4, 9.4),
            (6.4, 6.6),
            (4.2, 6.6),
        ]],
        'H' => &[
            &[(1.6, 1.5), (1.6, 11.0)],
            &[(6.4, 1.5), (6.4, 11.0)],
            &[(1.6, 6.0), (6.4, 6.0)],
        ],
        'I' => &[
            &[(4.0, 1.5), (4.0, 11.0)],
            &[(2.4, 1.5), (5.6, 1.5)],
            &[(2.4, 11.0), (5.6, 11.0)],
        ],
        'J' => &[&[(5.8, 1.5), (5.8, 9.0), (4.4, 10.9), (2.8, 10.9), (1.5, 9.4)]],
        'K' => &[
            &[(1.8, 1.5), (1.8, 11.0)],
            &[(6.3, 1.5), (1.8, 6.7)],
            &[(3.2, 5.4), (6.5, 11.0)],
        ],
        'L' => &[&[(1.8, 1.5), (1.8, 11.0), (6.2, 11.0)]],
        'M' => &[&[(1.4, 11.0), (1.4, 1.5), (4.0, 7.0), (6.6, 1.5), (6.6, 11.0)]],
        'N' => &[&[(1.6, 11.0), (1.6, 1.5), (6.4, 11.0), (6.4, 1.5)]],
        'O' => &[&[
            (2.5, 1.5),
            (5.5, 1.5),
            (6.5, 3.0),
            (6.5, 9.0),
            (5.5, 10.5),
            (2.5, 10.5),
            (1.5, 9.0),
            (1.5, 3.0),
            (2.5, 1.5),
        ]],
        'P' => &[&[
            (1.8, 11.0),
            (1.8, 1.5),
            (5.0, 1.5),
            (6.3, 2.9),
            (6.3, 4.9),
            (5.0, 6.3),
            (1.8, 6.3),
        ]],
        'Q' => &[
            &[
                (2.5, 1.5),
                (5.5, 1.5),
                (6.5, 3.0),
                (6.5, 9.0),
                (5.5, 10.5),
                (2.5, 10.5),
                (1.5, 9.0),
                (1.5, 3.0),
                (2.5, 1.5),
            ],
            &[(4.6, 8.6), (6.8, 11.4)],
        ],
        'R' => &[
            &[
                (1.8, 11.0),
                (1.8, 1.5),
                (5.0, 1.5),
                (6.3, 2.9),
                (6.3, 4.9),
                (5.0, 6.3),
                (1.8, 6.3),
            ],
            &[(4.0, 6.3), (6.5, 11.0)],
        ],
        'S' => &[&[
            (6.3, 2.6),
            (4.9, 1.4),
            (2.9, 1.4),
            (1.7, 2.7),
            (1.7, 4.0),
            (3.0, 5.2),
            (5.0, 5.9),
            (6.3, 7.1),
            (6.3, 9.2),
            (5.0, 10.8),
            (2.9, 10.8),
            (1.5, 9.4),
        ]],
        'T' => &[&[(1.2, 1.5), (6.8, 1.5)], &[(4.0, 1.5), (4.0, 11.0)]],
        'U' => &[&[(1.6, 1.5), (1.6, 9.0), (3.0, 10.9), (5.0, 10.9), (6.4, 9.0), (6.4, 1.5)]],
        'V' => &[&[(1.2, 1.5), (4.0, 11.0), (6.8, 1.5)]],
        'W' => &[&[(1.0, 1.5), (2.4, 11.0), (4.0, 4.5), (5.6, 11.0), (7.0, 1.5)]],
        'X' => &[&[(1.4, 1.5), (6.6, 11.0)], &[(6.6, 1.5), (1.4, 11.0)]],
        'Y' => &[&[(1.4, 1.5), (4.0, 6.2), (6.6, 1.5)], &[(4.0, 6.2), (4.0, 11.0)]],
        'Z' => &[&[(1.5, 1.5), (6.5, 1.5), (1.5, 11.0), (6.5, 11.0)]],
        'a' => &[
            &[
                (6.2, 5.6),
                (4.8, 4.4),
                (2.9, 4.4),
                (1.6, 5.9),
                (1.6, 9.5),
                (2.9, 10.9),
                (4.8, 10.9),
                (6.2, 9.6),
            ],
            &[(6.2, 4.5), (6.2, 11.0)],
        ],
        'b' => &[
            &[(1.7, 1.0), (1.7, 11.0)],
            &[
                (1.7, 5.8),
                (3.0, 4.5),
                (4.9, 4.5),
                (6.3, 6.0),
                (6.3, 9.4),
                (4.9, 10.9),
                (3.0, 10.9),
                (1.7, 9.6),
            ],
        ],
        'c' => &[&[
            (6.2, 5.8),
            (4.8, 4.4),
            (2.9, 4.4),
            (1.6, 6.0),
            (1.6, 9.4),
            (2.9, 10.9),
            (4.8, 10.9),
            (6.2, 9.6),
        ]],
        'd' => &[
            &[(6.3, 1.0), (6.3, 11.0)],
            &[
                (6.3, 5.8),
                (5.0, 4.5),
                (3.1, 4.5),
                (1.7, 6.0),
                (1.7, 9.4),
                (3.1, 10.9),
                (5.0, 10.9),
                (6.3, 9.6),
            ],
        ],
        'e' => &[&[
            (1.6, 7.6),
            (6.3, 7.6),
            (6.3, 6.0),
            (4.9, 4.4),
            (2.9, 4.4),
            (1.6, 6.0),
            (1.6, 9.4),
            (3.0, 10.9),
            (5.3, 10.9),
            (6.2, 9.9),
        ]],
        'f' => &[
            &[(6.0, 1.6), (4.8, 1.0), (3.6, 2.0), (3.6, 11.0)],
            &[(2.0, 5.0), (5.6, 5.0)],
        ],
        'g' => &[
            &[
                (6.3, 5.9),
                (4.9, 4.4),
                (2.9, 4.4),
                (1.6, 6.0),
                (1.6, 9.2),
                (2.9, 10.7),
                (4.9, 10.7),
                (6.3, 9.3),
            ],
            &[(6.3, 4.5), (6.3, 12.0), (5.0, 13.8), (2.8, 13.8), (1.6, 12.8)],
        ],
        'h' => &[
            &[(1.7, 1.0), (1.7, 11.0)],
            &[(1.7, 6.0), (3.2, 4.5), (5.0, 4.5), (6.3, 6.0), (6.3, 11.0)],
        ],
        'i' => &[&[(4.0, 4.5), (4.0, 11.0)], &[(4.0, 2.4), (4.0, 3.0)]],
        'j' => &[
            &[(4.6, 4.5), (4.6, 12.2), (3.4, 13.8), (1.9, 13.4)],
            &[(4.6, 2.4), (4.6, 3.0)],
        ],
        'k' => &[
            &[(1.8, 1.0), (1.8, 11.0)],
            &[(5.8, 4.5), (1.8, 8.2)],
            &[(3.3, 7.0), (6.2, 11.0)],
        ],
        'l' => &[&[(4.0, 1.0), (4.0, 11.0)]],
        'm' => &[
            &[(1.4, 11.0), (1.4, 4.5)],
            &[(1.4, 6.0), (2.5, 4.5), (3.4, 4.5), (4.1, 6.0), (4.1, 11.0)],
            &[(4.1, 6.0), (5.2, 4.5), (6.1, 4.5), (6.8, 6.0), (6.8, 11.0)],
        ],
        'n' => &[
            &[(1.7, 11.0), (1.7, 4.5)],
            &[(1.7, 6.0), (3.2, 4.5), (5.0, 4.5), (6.3, 6.0), (6.3, 11.0)],
        ],
        'o' => &[&[
            (2.9, 4.4),
            (4.9, 4.4),
            (6.3, 6.0),
            (6.3, 9.3),
            (4.9, 10.9),
            (2.9, 10.9),
            (1.6, 9.3),
            (1.6, 6.0),
            (2.9, 4.4),
        ]],
        'p' => &[
            &[(1.7, 4.5), (1.7, 14.0)],
            &[
                (1.7, 5.8),
                (3.0, 4.5),
                (4.9, 4.5),
                (6.3, 6.0),
                (6.3, 9.4),
                (4.9, 10.9),
                (3.0, 10.9),
                (1.7, 9.6),
            ],
        ],
        'q' => &[
            &[(6.3, 4.5), (6.3, 14.0)],
            &[
                (6.3, 5.8),
                (5.0, 4.5),
                (3.1, 4.5),
                (1.7, 6.0),
                (1.7, 9.4),
                (3.1, 10.9),
                (5.0, 10.9),
                (6.3, 9.6),
            ],
        ],
        'r' => &[
            &[(2.0, 11.0), (2.0, 4.5)],
            &[(2.0, 6.4), (3.4, 4.6), (5.0, 4.4), (6.2, 5.4)],
        ],
        's' => &[&[
            (6.1, 5.6),
            (4.9, 4.4),
            (3.0, 4.4),
            (1.9, 5.4),
            (1.9, 6.4),
            (3.0, 7.3),
            (5.0, 7.9),
            (6.1, 8.9),
            (6.1, 9.9),
            (4.9, 10.9),
            (2.9, 10.9),
            (1.7, 9.8),
        ]],
        't' => &[
            &[(3.6, 2.0), (3.6, 9.6), (4.8, 10.9), (6.0, 10.4)],
            &[(1.8, 4.8), (5.6, 4.8)],
        ],
        'u' => &[
            &[(1.6, 4.5), (1.6, 9.4), (3.0, 10.9), (4.8, 10.9), (6.3, 9.4)],
            &[(6.3, 4.5), (6.3, 11.0)],
        ],
        'v' => &[&[(1.5, 4.5), (4.0, 11.0), (6.5, 4.5)]],
        'w' => &[&[(1.2, 4.5), (2.4, 11.0), (4.0, 6.4), (5.6, 11.0), (6.8, 4.5)]],
        'x' => &[&[(1.6, 4.5), (6.4, 11.0)], &[(6.4, 4.5), (1.6, 11.0)]],
        'y' => &[&[(1.5, 4.5), (4.0, 10.6)], &[(6.5, 4.5), (3.2, 13.2), (2.0, 13.8)]],
        'z' => &[&[(1.8, 4.5), (6.2, 4.5), (1.8, 11.0), (6.2, 11.0)]],
        _ => return None,
    };
    Some(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_alphanumeric_coverage() {
        let charset: Vec<char> = ('a'..='z').chain('A'..='Z').chain('0'..='9').collect();
        for c in charset {
            let s = strokes(c).unwrap_or_else(|| panic!("missing glyph {c:?}"));
            assert!(!s.is_empty());
            for stroke in s {
                assert!(stroke.len() >= 2, "degenerate stroke in {c:?}");
                for &(x, y) in *stroke {
                    assert!((0.0..=8.0).contains(&x), "{c:?} x out of grid: {x}");
                    assert!((0.0..=14.0).contains(&y), "{c:?} y out of grid: {y}");
                }
            }
        }
    }

    #[test]
    fn no_symbol_coverage() {
        assert!(strokes('!').is_none());
        assert!(strokes(' ').is_none());
    }
}
