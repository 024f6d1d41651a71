//! Side-by-side previews of a pair with its boxes outlined.

use changeforge_core::{ChangeBox, RgbImage};

pub const GAP: u32 = 8;
pub const BOX_COLOR: [u8; 3] = [255, 32, 32];
const GAP_COLOR: [u8; 3] = [255, 255, 255];

fn outline(img: &mut RgbImage, x_offset: u32, width: u32, b: &ChangeBox, thickness: u32) {
    let height = img.height();
    let (x0, y0, x1, y1) = b.corners();
    let clamp_x = |v: f64| (v.floor().max(0.0) as u32).min(width - 1);
    let clamp_y = |v: f64| (v.floor().max(0.0) as u32).min(height - 1);
    let (l, t) = (clamp_x(x0), clamp_y(y0));
    let (r, btm) = (clamp_x(x1 - 1.0).max(l), clamp_y(y1 - 1.0).max(t));
    for y in t..=btm {
        for x in l..=r {
            let edge = x < l + thickness || x + thickness > r || y < t + thickness || y + thickness > btm;
            if edge {
                img.put(x_offset + x, y, BOX_COLOR);
            }
        }
    }
}

/// Reference on the left, test on the right, with every box drawn on both.
pub fn side_by_side(reference: &RgbImage, test: &RgbImage, boxes: &[ChangeBox]) -> RgbImage {
    let (w, h) = (reference.width().max(test.width()), reference.height().max(test.height()));
    let mut out = RgbImage::from_fn(2 * w + GAP, h, |x, y| {
        if x < w {
            if x < reference.width() && y < reference.height() {
                return reference.get(x, y);
            }
        } else if x >= w + GAP {
            let tx = x - w - GAP;
            if tx < test.width() && y < test.height() {
                return test.get(tx, y);
            }
        }
        GAP_COLOR
    })
    .expect("nonzero dims");
    for b in boxes {
        outline(&mut out, 0, w, b, 2);
        outline(&mut out, w + GAP, w, b, 2);
    }
    out
}
