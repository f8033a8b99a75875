//! Diverging blue-white-red PPM rendering of a Wigner grid.

use cylwig::phase_space::WignerGrid;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Range {
    Auto,
    Fixed { min: f64, max: f64 },
}

impl Range {
    pub fn parse(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(Range::Auto);
        }
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| format!("range must be auto or min:max, got {s:?}"))?;
        let min: f64 = a.parse().map_err(|_| format!("bad range minimum {a:?}"))?;
        let max: f64 = b.parse().map_err(|_| format!("bad range maximum {b:?}"))?;
        if !(min.is_finite() && max.is_finite() && min <= 0.0 && max >= 0.0 && min < max) {
            return Err(format!("range needs finite min <= 0 <= max with min < max, got {s}"));
        }
        Ok(Range::Fixed { min, max })
    }

    fn bounds(self, w: &WignerGrid) -> (f64, f64) {
        match self {
            Range::Fixed { min, max } => (min, max),
            Range::Auto => w
                .values()
                .iter()
                .fold((0.0_f64, 0.0_f64), |(lo, hi), &v| (lo.min(v), hi.max(v))),
        }
    }
}

fn channel(fraction: f64) -> u8 {
    (255.0 * (1.0 - fraction.clamp(0.0, 1.0))).round() as u8
}

/// `w_min` maps to blue, zero to white, `w_max` to red, linearly in each half.
pub fn colour(v: f64, min: f64, max: f64) -> [u8; 3] {
    if v < 0.0 && min < 0.0 {
        let c = channel(v / min);
        [c, c, 255]
    } else if v > 0.0 && max > 0.0 {
        let c = channel(v / max);
        [255, c, c]
    } else {
        [255, 255, 255]
    }
}

/// Binary P6 image: one column per angle node, one row per ℓ with the
/// largest ℓ on top.
pub fn ppm(w: &WignerGrid, range: Range) -> Vec<u8> {
    let (min, max) = range.bounds(w);
    let n = w.grid().n_phi();
    let rows = w.rows().size();
    let mut out = format!("P6\n{n} {rows}\n255\n").into_bytes();
    for l in (w.l_lo()..=w.l_hi()).rev() {
        for &v in w.row(l).expect("stored row") {
            out.extend_from_slice(&colour(v, min, max));
        }
    }
    out
}
