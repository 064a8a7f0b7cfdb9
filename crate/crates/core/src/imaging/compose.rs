//! Per-pixel layer selection.

use super::ImagingError;
use crate::raster::{BitMask, RgbImage};

/// `fg` where `mask` is set, `bg` elsewhere.
pub fn composite(fg: &RgbImage, bg: &RgbImage, mask: &BitMask) -> Result<RgbImage, ImagingError> {
    if !fg.same_dims(bg) || !fg.same_dims(mask) {
        return Err(ImagingError::Dimensions);
    }
    let data = fg
        .data()
        .iter()
        .zip(bg.data())
        .zip(mask.data())
        .map(|((&f, &b), &m)| if m { f } else { b })
        .collect();
    Ok(RgbImage::from_vec(fg.width(), fg.height(), data))
}

/// Final image of a novel view: `warped` off the unknown mask, `interp` on the
/// sparse unknowns and `painted` on the remaining (dense) unknowns.
pub fn combine_final(
    warped: &RgbImage,
    interp: &RgbImage,
    painted: &RgbImage,
    unknown: &BitMask,
    sparse: &BitMask,
) -> Result<RgbImage, ImagingError> {
    if !warped.same_dims(interp)
        || !warped.same_dims(painted)
        || !warped.same_dims(unknown)
        || !warped.same_dims(sparse)
    {
        return Err(ImagingError::Dimensions);
    }
    if !sparse.is_subset_of(unknown) {
        return Err(ImagingError::SparseOutsideUnknown(sparse.and_not(unknown).count()));
    }
    let data = (0..warped.len())
        .map(|i| {
            if !unknown.data()[i] {
                warped.data()[i]
            } else if sparse.data()[i] {
                interp.data()[i]
            } else {
                painted.data()[i]
            }
        })
        .collect();
    Ok(RgbImage::from_vec(warped.width(), warped.height(), data))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composite_selects() {
        let fg = RgbImage::filled(4, 3, [1, 2, 3]);
        let bg = RgbImage::filled(4, 3, [9, 9, 9]);
        assert_eq!(composite(&fg, &bg, &BitMask::filled(4, 3, true)).unwrap(), fg);
        assert_eq!(composite(&fg, &bg, &BitMask::filled(4, 3, false)).unwrap(), bg);
        let m = BitMask::from_fn(4, 3, |x, y| x == y);
        assert_eq!(composite(&fg, &fg, &m).unwrap(), fg);
    }

    #[test]
    fn combine_final_contract() {
        let w = RgbImage::filled(3, 3, [1, 1, 1]);
        let i = RgbImage::filled(3, 3, [2, 2, 2]);
        let p = RgbImage::filled(3, 3, [3, 3, 3]);
        let none = BitMask::filled(3, 3, false);
        assert_eq!(combine_final(&w, &i, &p, &none, &none).unwrap(), w);
        let unknown = BitMask::from_fn(3, 3, |x, _| x == 0);
        let out = combine_final(&w, &i, &p, &unknown, &unknown).unwrap();
        assert!(!out.data().contains(&[3, 3, 3]));
        let bad = BitMask::from_fn(3, 3, |x, _| x == 1);
        assert_eq!(
            combine_final(&w, &i, &p, &unknown, &bad).unwrap_err(),
            ImagingError::SparseOutsideUnknown(3)
        );
    }
}
