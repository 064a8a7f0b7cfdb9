//! Filling unknown pixels: nearest known color, sparse/dense classification,
//! and fast-marching (Telea) interpolation.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ImagingError;
use crate::raster::{BitMask, Raster, RgbImage};

/// Propagation band radius for Telea inpainting, pixels.
pub const TELEA_RADIUS: i64 = 5;

/// Nearest known pixel (Euclidean) for every unknown pixel; ties go to the
/// smallest row-major index. Returns `None` when no pixel is known.
pub fn nearest_known_index(unknown: &BitMask) -> Option<Raster<u32>> {
    let (w, h) = unknown.dims();
    if unknown.data().iter().all(|&u| u) {
        return None;
    }
    // Per column, the nearest known row above-or-at and below-or-at each row.
    let mut col_best = vec![i32::MIN; w * h];
    for x in 0..w {
        let mut last: Option<usize> = None;
        for y in 0..h {
            if !*unknown.get(x, y) {
                last = Some(y);
            }
            if let Some(l) = last {
                col_best[y * w + x] = l as i32;
            }
        }
        let mut next: Option<usize> = None;
        for y in (0..h).rev() {
            if !*unknown.get(x, y) {
                next = Some(y);
            }
            if let Some(n) = next {
                let cur = col_best[y * w + x];
                // On equal distance the row above has the smaller index and wins.
                if cur == i32::MIN || (n - y) < (y - cur as usize) {
                    col_best[y * w + x] = n as i32;
                }
            }
        }
    }
    let mut out = vec![u32::MAX; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, slot) in row.iter_mut().enumerate() {
            if !*unknown.get(x, y) {
                *slot = (y * w + x) as u32;
                continue;
            }
            let mut best: Option<(u64, u32)> = None;
            let mut dx = 0usize;
            loop {
                let d2x = (dx * dx) as u64;
                if let Some((bd, _)) = best {
                    if d2x > bd {
                        break;
                    }
                }
                if dx > x && x + dx >= w {
                    break;
                }
                let mut consider = |cx: usize| {
                    let r = col_best[y * w + cx];
                    if r == i32::MIN {
                        return;
                    }
                    let dy = (r as i64 - y as i64).unsigned_abs();
                    let cand = (d2x + dy * dy, (r as usize * w + cx) as u32);
                    if best.is_none_or(|b| cand < b) {
                        best = Some(cand);
                    }
                };
                if dx <= x {
                    consider(x - dx);
                }
                if dx > 0 && x + dx < w {
                    consider(x + dx);
                }
                dx += 1;
            }
            *slot = best.map(|b| b.1).unwrap_or(u32::MAX);
        }
    });
    Some(Raster::from_vec(w, h, out))
}

/// Every unknown pixel takes the color of its nearest known pixel.
pub fn nearest_color_fill(img: &RgbImage, unknown: &BitMask) -> Result<RgbImage, ImagingError> {
    if !img.same_dims(unknown) {
        return Err(ImagingError::Dimensions);
    }
    let nearest = nearest_known_index(unknown).ok_or(ImagingError::NoReference)?;
    Ok(RgbImage::from_vec(
        img.width(),
        img.height(),
        nearest.data().iter().map(|&i| img.data()[i as usize]).collect(),
    ))
}

/// Split of an unknown mask into interpolation-sized and generation-sized holes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionClassification {
    pub sparse: BitMask,
    pub dense: BitMask,
    pub window: usize,
    pub threshold: f64,
}

/// An unknown pixel is sparse when at least `threshold` of the in-image
/// pixels in its `window × window` neighborhood are known.
pub fn classify_unknown(
    unknown: &BitMask,
    window: usize,
    threshold: f64,
) -> Result<RegionClassification, ImagingError> {
    if window % 2 == 0 {
        return Err(ImagingError::EvenWindow(window));
    }
    let (w, h) = unknown.dims();
    let mut integral = vec![0u32; (w + 1) * (h + 1)];
    for y in 0..h {
        for x in 0..w {
            let known = !*unknown.get(x, y) as u32;
            integral[(y + 1) * (w + 1) + x + 1] = known + integral[y * (w + 1) + x + 1]
                + integral[(y + 1) * (w + 1) + x]
                - integral[y * (w + 1) + x];
        }
    }
    let r = window / 2;
    let sparse = BitMask::from_fn(w, h, |x, y| {
        if !*unknown.get(x, y) {
            return false;
        }
        let (x0, y0) = (x.saturating_sub(r), y.saturating_sub(r));
        let (x1, y1) = ((x + r + 1).min(w), (y + r + 1).min(h));
        let known = integral[y1 * (w + 1) + x1] + integral[y0 * (w + 1) + x0]
            - integral[y0 * (w + 1) + x1]
            - integral[y1 * (w + 1) + x0];
        let total = ((x1 - x0) * (y1 - y0)) as f64;
        known as f64 / total >= threshold
    });
    let dense = unknown.and_not(&sparse);
    Ok(RegionClassification {
        sparse,
        dense,
        window,
        threshold,
    })
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Flag {
    Known,
    Band,
    Inside,
}

#[derive(PartialEq)]
struct Arrival(f64, usize);

impl Eq for Arrival {}

impl PartialOrd for Arrival {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Arrival {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

struct Telea {
    w: usize,
    h: usize,
    flags: Vec<Flag>,
    t: Vec<f64>,
    chans: [Vec<f64>; 3],
}

impl Telea {
    fn flag(&self, x: i64, y: i64) -> Option<Flag> {
        if x < 0 || y < 0 || x >= self.w as i64 || y >= self.h as i64 {
            None
        } else {
            Some(self.flags[y as usize * self.w + x as usize])
        }
    }

    fn settled(&self, x: i64, y: i64) -> bool {
        matches!(self.flag(x, y), Some(Flag::Known | Flag::Band))
    }

    fn t_at(&self, x: i64, y: i64) -> f64 {
        self.t[y as usize * self.w + x as usize]
    }

    fn solve(&self, (x1, y1): (i64, i64), (x2, y2): (i64, i64)) -> f64 {
        let a = self.settled(x1, y1).then(|| self.t_at(x1, y1));
        let b = self.settled(x2, y2).then(|| self.t_at(x2, y2));
        match (a, b) {
            (Some(ta), Some(tb)) => {
                let diff = ta - tb;
                if diff.abs() >= std::f64::consts::SQRT_2 {
                    return 1.0 + ta.min(tb);
                }
                let r = (2.0 - diff * diff).sqrt();
                (ta + tb + r) / 2.0
            }
            (Some(ta), None) => 1.0 + ta,
            (None, Some(tb)) => 1.0 + tb,
            (None, None) => f64::INFINITY,
        }
    }

    fn arrival(&self, x: i64, y: i64) -> f64 {
        [
            self.solve((x - 1, y), (x, y - 1)),
            self.solve((x + 1, y), (x, y - 1)),
            self.solve((x - 1, y), (x, y + 1)),
            self.solve((x + 1, y), (x, y + 1)),
        ]
        .into_iter()
        .fold(f64::INFINITY, f64::min)
    }

    /// One-sided or central difference over settled neighbors.
    fn diff(&self, x: i64, y: i64, dx: i64, dy: i64, value: impl Fn(i64, i64) -> f64) -> f64 {
        let fwd = self.settled(x + dx, y + dy);
        let bwd = self.settled(x - dx, y - dy);
        match (fwd, bwd) {
            (true, true) => (value(x + dx, y + dy) - value(x - dx, y - dy)) * 0.5,
            (true, false) => value(x + dx, y + dy) - value(x, y),
            (false, true) => value(x, y) - value(x - dx, y - dy),
            (false, false) => 0.0,
        }
    }

    fn inpaint(&mut self, x: i64, y: i64) {
        let tp = self.t_at(x, y);
        let grad_t = (
            self.diff(x, y, 1, 0, |a, b| self.t_at(a, b)),
            self.diff(x, y, 0, 1, |a, b| self.t_at(a, b)),
        );
        let mut num = [0.0f64; 3];
        let mut den = 0.0f64;
        for qy in y - TELEA_RADIUS..=y + TELEA_RADIUS {
            for qx in x - TELEA_RADIUS..=x + TELEA_RADIUS {
                let (rx, ry) = ((x - qx) as f64, (y - qy) as f64);
                let r2 = rx * rx + ry * ry;
                if r2 == 0.0 || r2 > (TELEA_RADIUS * TELEA_RADIUS) as f64 || !self.settled(qx, qy) {
                    continue;
                }
                let dst = 1.0 / (r2 * r2.sqrt());
                let lev = 1.0 / (1.0 + (self.t_at(qx, qy) - tp).abs());
                let mut dir = (rx * grad_t.0 + ry * grad_t.1) / r2.sqrt();
                if dir.abs() <= 0.01 {
                    dir = 1e-6;
                }
                let weight = (dst * lev * dir).abs();
                let qi = qy as usize * self.w + qx as usize;
                for (c, acc) in num.iter_mut().enumerate() {
                    let ch = &self.chans[c];
                    let at = |a: i64, b: i64| ch[b as usize * self.w + a as usize];
                    let gx = self.diff(qx, qy, 1, 0, at);
                    let gy = self.diff(qx, qy, 0, 1, at);
                    *acc += weight * (ch[qi] + gx * rx + gy * ry);
                }
                den += weight;
            }
        }
        if den > 0.0 {
            let i = y as usize * self.w + x as usize;
            for c in 0..3 {
                self.chans[c][i] = (num[c] / den).clamp(0.0, 255.0);
            }
        }
    }
}

/// Fast-marching inpainting of the pixels in `fill`; other pixels are kept.
/// Pixels the march cannot reach fall back to the nearest known color.
pub fn interp_inpaint(img: &RgbImage, fill: &BitMask) -> Result<RgbImage, ImagingError> {
    if !img.same_dims(fill) {
        return Err(ImagingError::Dimensions);
    }
    if !fill.any() {
        return Ok(img.clone());
    }
    let (w, h) = img.dims();
    let mut st = Telea {
        w,
        h,
        flags: fill.data().iter().map(|&f| if f { Flag::Inside } else { Flag::Known }).collect(),
        t: fill.data().iter().map(|&f| if f { f64::INFINITY } else { 0.0 }).collect(),
        chans: [0, 1, 2].map(|c| img.data().iter().map(|p| p[c] as f64).collect()),
    };
    let mut heap = BinaryHeap::new();
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            if st.flag(x, y) != Some(Flag::Known) {
                continue;
            }
            let borders = [(1, 0), (-1, 0), (0, 1), (0, -1)]
                .iter()
                .any(|&(dx, dy)| st.flag(x + dx, y + dy) == Some(Flag::Inside));
            if borders {
                let i = y as usize * w + x as usize;
                st.flags[i] = Flag::Band;
                heap.push(Reverse(Arrival(0.0, i)));
            }
        }
    }
    while let Some(Reverse(Arrival(_, i))) = heap.pop() {
        if st.flags[i] == Flag::Known {
            continue;
        }
        st.flags[i] = Flag::Known;
        let (x, y) = ((i % w) as i64, (i / w) as i64);
        for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            let (nx, ny) = (x + dx, y + dy);
            if st.flag(nx, ny) != Some(Flag::Inside) {
                continue;
            }
            let ni = ny as usize * w + nx as usize;
            st.t[ni] = st.arrival(nx, ny);
            st.inpaint(nx, ny);
            st.flags[ni] = Flag::Band;
            heap.push(Reverse(Arrival(st.t[ni], ni)));
        }
    }
    let mut out = img.clone();
    for (i, px) in out.data_mut().iter_mut().enumerate() {
        if fill.data()[i] && st.flags[i] == Flag::Known {
            *px = [0, 1, 2].map(|c| st.chans[c][i].round() as u8);
        }
    }
    let unreached = fill.zip_map(&Raster::from_vec(w, h, st.flags.clone()), |&f, &fl| {
        f && fl == Flag::Inside
    });
    if unreached.any() {
        out = nearest_color_fill(&out, &unreached)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_red_neighbor_propagates() {
        let img = RgbImage::from_fn(3, 1, |x, _| if x == 0 { [255, 0, 0] } else { [0, 0, 0] });
        let unknown = BitMask::from_fn(3, 1, |x, _| x > 0);
        let out = nearest_color_fill(&img, &unknown).unwrap();
        assert!(out.data().iter().all(|&p| p == [255, 0, 0]));
    }

    #[test]
    fn half_known_image_fills_right_half() {
        let img = RgbImage::from_fn(10, 6, |x, _| if x < 5 { [255, 0, 0] } else { [1, 2, 3] });
        let unknown = BitMask::from_fn(10, 6, |x, _| x >= 5);
        let out = nearest_color_fill(&img, &unknown).unwrap();
        assert!(out.data().iter().all(|&p| p == [255, 0, 0]));
    }

    #[test]
    fn all_unknown_has_no_reference() {
        let img = RgbImage::filled(4, 4, [0; 3]);
        assert_eq!(
            nearest_color_fill(&img, &BitMask::filled(4, 4, true)).unwrap_err(),
            ImagingError::NoReference
        );
    }

    #[test]
    fn classification_examples() {
        // A large hole: its interior sees no known pixels.
        let hole = BitMask::from_fn(30, 30, |x, y| (5..25).contains(&x) && (5..25).contains(&y));
        let c = classify_unknown(&hole, 7, 0.3).unwrap();
        assert!(*c.dense.get(15, 15));
        assert_eq!(c.sparse.and(&c.dense).count(), 0);
        assert_eq!(c.sparse.or(&c.dense), hole);

        let pin = BitMask::from_fn(15, 15, |x, y| x == 7 && y == 7);
        let c = classify_unknown(&pin, 7, 0.3).unwrap();
        assert!(*c.sparse.get(7, 7));

        let checker = BitMask::from_fn(20, 20, |x, y| (x + y) % 2 == 0);
        let c = classify_unknown(&checker, 5, 0.4).unwrap();
        assert_eq!(c.sparse, checker);
        assert!(classify_unknown(&checker, 4, 0.4).is_err());
    }

    #[test]
    fn telea_constant_field_is_exact() {
        let img = RgbImage::from_fn(9, 9, |x, y| if x == 4 && y == 4 { [0, 0, 0] } else { [77, 77, 77] });
        let hole = BitMask::from_fn(9, 9, |x, y| x == 4 && y == 4);
        let out = interp_inpaint(&img, &hole).unwrap();
        assert_eq!(*out.get(4, 4), [77, 77, 77]);
        assert_eq!(interp_inpaint(&img, &BitMask::filled(9, 9, false)).unwrap(), img);
    }

    #[test]
    fn telea_never_touches_known_pixels() {
        let img = RgbImage::from_fn(16, 16, |x, y| [(x * 13) as u8, (y * 7) as u8, 50]);
        let hole = BitMask::from_fn(16, 16, |x, y| (x * y) % 5 == 1);
        let out = interp_inpaint(&img, &hole).unwrap();
        for (i, (&a, &b)) in img.data().iter().zip(out.data()).enumerate() {
            if !hole.data()[i] {
                assert_eq!(a, b);
            }
        }
    }
}
