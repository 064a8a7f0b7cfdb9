//! Binary morphology with a disk structuring element `{(dx, dy) : dx² + dy² ≤ r²}`.

use crate::raster::BitMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MorphOp {
    Dilate,
    Erode,
}

/// Half-widths of the disk's rows: `w[|dy|] = floor(sqrt(r² - dy²))`.
fn disk_rows(radius: u32) -> Vec<usize> {
    let r = radius as i64;
    (0..=r)
        .map(|dy| {
            let mut w = 0i64;
            while (w + 1) * (w + 1) + dy * dy <= r * r {
                w += 1;
            }
            w as usize
        })
        .collect()
}

/// Dilation; pixels outside the image count as false.
pub fn dilate(mask: &BitMask, radius: u32) -> BitMask {
    if radius == 0 {
        return mask.clone();
    }
    let (w, h) = mask.dims();
    // Row prefix counts let each disk row be tested in O(1).
    let mut prefix = vec![0u32; (w + 1) * h];
    for y in 0..h {
        for x in 0..w {
            prefix[y * (w + 1) + x + 1] = prefix[y * (w + 1) + x] + *mask.get(x, y) as u32;
        }
    }
    let rows = disk_rows(radius);
    let r = radius as i64;
    BitMask::from_fn(w, h, |x, y| {
        for dy in -r..=r {
            let yy = y as i64 + dy;
            if yy < 0 || yy >= h as i64 {
                continue;
            }
            let half = rows[dy.unsigned_abs() as usize];
            let lo = x.saturating_sub(half);
            let hi = (x + half + 1).min(w);
            let base = yy as usize * (w + 1);
            if prefix[base + hi] > prefix[base + lo] {
                return true;
            }
        }
        false
    })
}

/// Erosion; pixels outside the image count as true, so closing stays extensive at borders.
pub fn erode(mask: &BitMask, radius: u32) -> BitMask {
    if radius == 0 {
        return mask.clone();
    }
    dilate(&mask.not(), radius).not()
}

pub fn morphology(mask: &BitMask, op: MorphOp, radius: u32) -> BitMask {
    match op {
        MorphOp::Dilate => dilate(mask, radius),
        MorphOp::Erode => erode(mask, radius),
    }
}
