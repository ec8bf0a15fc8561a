/// Row-major binary image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        BinaryMask {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        BinaryMask {
            width,
            height,
            data,
        }
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.data[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

/// Dilation by a `(2r+1) x (2r+1)` square: a pixel is set when some mask
/// pixel lies within Chebyshev distance `radius`. Pixels outside the frame
/// are ignored. The square is separable, so this runs one horizontal and
/// one vertical sliding-window pass.
pub fn dilate_mask(mask: &BinaryMask, radius: usize) -> BinaryMask {
    let (w, h) = (mask.width, mask.height);
    let mut horizontal = vec![false; w * h];
    for y in 0..h {
        let row = &mask.data[y * w..(y + 1) * w];
        window_any(row, radius, &mut horizontal[y * w..(y + 1) * w]);
    }
    let mut out = vec![false; w * h];
    let mut column = vec![false; h];
    let mut dilated = vec![false; h];
    for x in 0..w {
        for y in 0..h {
            column[y] = horizontal[y * w + x];
        }
        window_any(&column, radius, &mut dilated);
        for y in 0..h {
            out[y * w + x] = dilated[y];
        }
    }
    BinaryMask {
        width: w,
        height: h,
        data: out,
    }
}

/// `out[i] = any(input[i-r ..= i+r])`, clipped to the slice.
fn window_any(input: &[bool], radius: usize, out: &mut [bool]) {
    let n = input.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0usize);
    for &b in input {
        prefix.push(prefix.last().unwrap() + b as usize);
    }
    for (i, o) in out.iter_mut().enumerate() {
        let lo = i.saturating_sub(radius);
        let hi = (i + radius + 1).min(n);
        *o = prefix[hi] > prefix[lo];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force(mask: &BinaryMask, r: usize) -> BinaryMask {
        let r = r as isize;
        BinaryMask::from_fn(mask.width, mask.height, |x, y| {
            (-r..=r).any(|dy| {
                (-r..=r).any(|dx| {
                    let (sx, sy) = (x as isize + dx, y as isize + dy);
                    sx >= 0
                        && sy >= 0
                        && (sx as usize) < mask.width
                        && (sy as usize) < mask.height
                        && mask.get(sx as usize, sy as usize)
                })
            })
        })
    }

    #[test]
    fn single_pixel_grows_to_seven_by_seven() {
        let mut mask = BinaryMask::new(9, 9);
        mask.set(4, 4, true);
        let out = dilate_mask(&mask, 3);
        assert_eq!(out.count(), 49);
        for y in 0..9 {
            for x in 0..9 {
                assert_eq!(out.get(x, y), (1..=7).contains(&x) && (1..=7).contains(&y));
            }
        }
    }

    #[test]
    fn full_frame_is_unchanged() {
        let mask = BinaryMask::from_fn(5, 4, |_, _| true);
        assert_eq!(dilate_mask(&mask, 3), mask);
    }

    #[test]
    fn border_pixels_clip() {
        let mut mask = BinaryMask::new(6, 6);
        mask.set(0, 0, true);
        assert_eq!(dilate_mask(&mask, 3).count(), 16);
    }

    fn arb_mask() -> impl Strategy<Value = BinaryMask> {
        (1usize..20, 1usize..20).prop_flat_map(|(w, h)| {
            proptest::collection::vec(proptest::bool::weighted(0.08), w * h).prop_map(move |data| {
                BinaryMask {
                    width: w,
                    height: h,
                    data,
                }
            })
        })
    }

    proptest! {
        #[test]
        fn matches_brute_force(mask in arb_mask(), r in 0usize..5) {
            prop_assert_eq!(dilate_mask(&mask, r), brute_force(&mask, r));
        }

        #[test]
        fn extensive_monotone_and_additive(mask in arb_mask(), extra in arb_mask(), r in 1usize..4, s in 1usize..4) {
            let dilated = dilate_mask(&mask, r);
            for (m, d) in mask.data.iter().zip(&dilated.data) {
                prop_assert!(!m || *d);
            }
            if extra.width == mask.width && extra.height == mask.height {
                let union = BinaryMask {
                    width: mask.width,
                    height: mask.height,
                    data: mask.data.iter().zip(&extra.data).map(|(a, b)| *a || *b).collect(),
                };
                let du = dilate_mask(&union, r);
                for (a, b) in dilated.data.iter().zip(&du.data) {
                    prop_assert!(!a || *b);
                }
            }
            prop_assert_eq!(dilate_mask(&dilated, s), dilate_mask(&mask, r + s));
        }
    }
}
