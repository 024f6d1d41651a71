use crate::image::Rect;

/// Axis-aligned change annotation in input-image pixels, stored as center
/// and size.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ChangeBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl ChangeBox {
    #[inline]
    pub const fn new(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self { cx, cy, w, h }
    }

    /// Box spanning `[x0, x1] × [y0, y1]`.
    pub fn from_corners(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self {
            cx: (x0 + x1) / 2.0,
            cy: (y0 + y1) / 2.0,
            w: x1 - x0,
            h: y1 - y0,
        }
    }

    /// `(x0, y0, x1, y1)`.
    #[inline]
    pub fn corners(&self) -> (f64, f64, f64, f64) {
        let (hw, hh) = (self.w / 2.0, self.h / 2.0);
        (self.cx - hw, self.cy - hh, self.cx + hw, self.cy + hh)
    }

    #[inline]
    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn is_valid(&self) -> bool {
        self.cx.is_finite()
            && self.cy.is_finite()
            && self.w.is_finite()
            && self.h.is_finite()
            && self.w > 0.0
            && self.h > 0.0
    }

    /// Positive size and every corner inside `[0, width] × [0, height]`.
    pub fn is_within(&self, width: f64, height: f64) -> bool {
        let (x0, y0, x1, y1) = self.corners();
        self.is_valid() && x0 >= 0.0 && y0 >= 0.0 && x1 <= width && y1 <= height
    }

    /// Rescales coordinates by independent horizontal and vertical factors.
    pub fn scaled(&self, sx: f64, sy: f64) -> Self {
        Self {
            cx: self.cx * sx,
            cy: self.cy * sy,
            w: self.w * sx,
            h: self.h * sy,
        }
    }
}

impl From<Rect> for ChangeBox {
    /// Pixel `(x, y)` covers `[x, x+1) × [y, y+1)`, so a rect maps to its
    /// outer edges.
    fn from(r: Rect) -> Self {
        Self::from_corners(r.x as f64, r.y as f64, r.right() as f64, r.bottom() as f64)
    }
}

impl core::fmt::Display for ChangeBox {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "(cx {}, cy {}, w {}, h {})", self.cx, self.cy, self.w, self.h)
    }
}
