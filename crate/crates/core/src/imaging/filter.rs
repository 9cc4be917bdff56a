use crate::error::{Error, Result};
use crate::imaging::Plane;

/// Min-max scales a plane onto `[0, 1]`. A constant plane maps to zeros.
pub fn normalize_plane(p: &Plane) -> Plane {
    let (lo, hi) = p
        .data()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    if !(range > 0.0) {
        return Plane::filled(p.height(), p.width(), 0.0);
    }
    p.map(|v| (v - lo) / range)
}

/// Symmetric reflection of a possibly out-of-range index into `0..len`
/// (edge sample repeated: `... b a | a b c ... | c b ...`).
#[inline]
pub(crate) fn reflect_index(i: isize, len: usize) -> usize {
    let n = len as isize;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    if m < n {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

pub(crate) fn check_odd_kernel(n: usize) -> Result<()> {
    if n == 0 || n.is_multiple_of(2) {
        return Err(Error::domain(format!(
            "kernel size must be odd and positive, got {n}"
        )));
    }
    Ok(())
}

/// Mean over the `n x n` neighbourhood of every pixel, with reflective
/// padding at the borders. Equivalent to convolving with a kernel whose
/// entries are all `1/n^2`.
pub fn convolve_uniform(p: &Plane, n: usize) -> Result<Plane> {
    check_odd_kernel(n)?;
    if n == 1 {
        return Ok(p.clone());
    }
    let (h, w) = (p.height(), p.width());
    let r = (n / 2) as isize;
    let src = p.data();

    let mut rows = vec![0.0; h * w];
    for y in 0..h {
        let line = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for d in -r..=r {
                acc += line[reflect_index(x as isize + d, w)];
            }
            rows[y * w + x] = acc;
        }
    }

    let scale = 1.0 / (n * n) as f64;
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for d in -r..=r {
            let sy = reflect_index(y as isize + d, h);
            let src_row = &rows[sy * w..(sy + 1) * w];
            let dst = &mut out[y * w..(y + 1) * w];
            for (o, s) in dst.iter_mut().zip(src_row) {
                *o += s;
            }
        }
        for o in &mut out[y * w..(y + 1) * w] {
            *o *= scale;
        }
    }
    Plane::new(h, w, out)
}
