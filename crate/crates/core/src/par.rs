//! Data-parallel kernels with a sequential fallback.
//!
//! With the `parallel` feature the loops below run on the rayon pool; without
//! it they run in order on the calling thread. Reductions always sum fixed-size
//! chunks and then combine the partial sums left to right, so the result is
//! bit-identical whatever the thread count or feature selection.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Chunk length used by every reduction.
pub const CHUNK: usize = 1024;

/// `(0..n).map(f).collect()`, parallel when enabled.
pub fn map_collect<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// `out[i] = f(i)` for every index.
pub fn fill<F>(out: &mut [f64], f: F)
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        out.par_iter_mut().enumerate().for_each(|(i, o)| *o = f(i));
    }
    #[cfg(not(feature = "parallel"))]
    {
        out.iter_mut().enumerate().for_each(|(i, o)| *o = f(i));
    }
}

/// `out[i] += f(i)` for every index.
pub fn fill_add<F>(out: &mut [f64], f: F)
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        out.par_iter_mut().enumerate().for_each(|(i, o)| *o += f(i));
    }
    #[cfg(not(feature = "parallel"))]
    {
        out.iter_mut().enumerate().for_each(|(i, o)| *o += f(i));
    }
}

/// Deterministic `sum_{i<n} f(i)`.
pub fn sum<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunks = n.div_ceil(CHUNK);
    let partial = |c: usize| {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(n);
        let mut s = 0.0;
        for i in lo..hi {
            s += f(i);
        }
        s
    };
    map_collect(chunks, partial).into_iter().sum()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    sum(a.len(), |i| a[i] * b[i])
}

/// Deterministic maximum of `f(i)`; `-inf` for an empty range.
pub fn max<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunks = n.div_ceil(CHUNK);
    map_collect(chunks, |c| {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(n);
        (lo..hi).map(&f).fold(f64::NEG_INFINITY, f64::max)
    })
    .into_iter()
    .fold(f64::NEG_INFINITY, f64::max)
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    #[cfg(feature = "parallel")]
    {
        y.par_iter_mut().zip(x.par_iter()).for_each(|(y, x)| *y += alpha * x);
    }
    #[cfg(not(feature = "parallel"))]
    {
        y.iter_mut().zip(x).for_each(|(y, x)| *y += alpha * x);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunked_sum_matches_sequential_order() {
        let n = 5 * CHUNK + 17;
        let v: Vec<f64> = (0..n).map(|i| ((i * 7919) % 1000) as f64 * 1e-3 + 1e-9).collect();
        let mut expect = 0.0;
        for c in 0..n.div_ceil(CHUNK) {
            let mut s = 0.0;
            for x in &v[c * CHUNK..((c + 1) * CHUNK).min(n)] {
                s += x;
            }
            expect += s;
        }
        assert_eq!(sum(n, |i| v[i]).to_bits(), expect.to_bits());
    }

    #[test]
    fn empty_ranges() {
        assert_eq!(sum(0, |_| 1.0), 0.0);
        assert_eq!(max(0, |_| 1.0), f64::NEG_INFINITY);
        assert!(map_collect(0, |i| i).is_empty());
    }

    #[test]
    fn max_and_axpy() {
        let x: Vec<f64> = (0..3000).map(|i| (i as f64).sin()).collect();
        let m = max(x.len(), |i| x[i]);
        assert_eq!(m, x.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        let mut y = vec![1.0; 3000];
        axpy(2.0, &x, &mut y);
        assert_eq!(y[10], 1.0 + 2.0 * x[10]);
    }
}
