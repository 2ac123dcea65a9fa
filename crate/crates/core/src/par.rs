//! Data-parallel helpers with a sequential fallback.
//!
//! Everything here is a thin dispatch layer: with the default `parallel`
//! feature the rayon implementations run, without it the `*_seq` bodies
//! are used. The sequential versions stay public so benchmarks can compare
//! both paths directly. All reductions are order-independent (min/max over
//! totally ordered values, or index-aligned writes), so results do not
//! depend on the thread count.

/// Elementwise map over two slices into a freshly allocated vector.
pub fn map2_seq(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64 + Sync) -> Vec<f64> {
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}

/// In-place elementwise update of `dst` from `src`.
pub fn zip_apply_seq(dst: &mut [f64], src: &[f64], f: impl Fn(f64, f64) -> f64 + Sync) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = f(*d, s);
    }
}

/// Minimum of `f` over all indices; returns (argmin, min).
pub fn min_by_seq(len: usize, f: impl Fn(usize) -> f64 + Sync) -> (usize, f64) {
    let mut best = (0usize, f64::INFINITY);
    for i in 0..len {
        let v = f(i);
        if v < best.1 {
            best = (i, v);
        }
    }
    best
}

#[cfg(feature = "parallel")]
mod imp {
    use rayon::prelude::*;

    pub fn map2(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64 + Sync) -> Vec<f64> {
        a.par_iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
    }

    pub fn zip_apply(dst: &mut [f64], src: &[f64], f: impl Fn(f64, f64) -> f64 + Sync) {
        dst.par_iter_mut().zip(src).for_each(|(d, &s)| *d = f(*d, s));
    }

    pub fn min_by(len: usize, f: impl Fn(usize) -> f64 + Sync) -> (usize, f64) {
        (0..len)
            .into_par_iter()
            .map(|i| (i, f(i)))
            .reduce(
                || (0usize, f64::INFINITY),
                // Ties break toward the smaller index so the witness is
                // deterministic across thread counts.
                |a, b| {
                    if b.1 < a.1 || (b.1 == a.1 && b.0 < a.0) {
                        b
                    } else {
                        a
                    }
                },
            )
    }
}

#[cfg(not(feature = "parallel"))]
mod imp {
    pub fn map2(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64 + Sync) -> Vec<f64> {
        super::map2_seq(a, b, f)
    }

    pub fn zip_apply(dst: &mut [f64], src: &[f64], f: impl Fn(f64, f64) -> f64 + Sync) {
        super::zip_apply_seq(dst, src, f)
    }

    pub fn min_by(len: usize, f: impl Fn(usize) -> f64 + Sync) -> (usize, f64) {
        super::min_by_seq(len, f)
    }
}

pub use imp::{map2, min_by, zip_apply};
