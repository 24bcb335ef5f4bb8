//! Data-parallel helpers.
//!
//! With the `parallel` feature the helpers run on the current rayon pool,
//! falling back to plain iteration when that pool has a single thread.
//! Without the feature they are always sequential.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[cfg(feature = "parallel")]
fn sequential() -> bool {
    rayon::current_num_threads() <= 1
}

/// `(0..n).map(f).collect()`.
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if !sequential() {
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    (0..n).map(f).collect()
}

/// `items.iter().map(f).collect()`.
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if !sequential() {
            return items.par_iter().map(f).collect();
        }
    }
    items.iter().map(f).collect()
}

/// Call `f(index, chunk)` for each `chunk`-sized piece of `data`.
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if !sequential() {
            data.par_chunks_mut(chunk).enumerate().for_each(|(k, c)| f(k, c));
            return;
        }
    }
    data.chunks_mut(chunk).enumerate().for_each(|(k, c)| f(k, c));
}

/// Run `f` on a dedicated pool of `threads` workers (`1` selects the sequential path).
pub fn with_threads<R, F>(threads: usize, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    #[cfg(feature = "parallel")]
    {
        match rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        f()
    }
}

/// Size the global pool once per process; ignored when already initialised.
pub fn configure_global_threads(threads: usize) {
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
}

/// Worker count of the current pool.
pub fn current_threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequential_and_parallel_agree() {
        let par = map_range(1000, |i| (i as f64).sqrt());
        let seq = with_threads(1, || map_range(1000, |i| (i as f64).sqrt()));
        assert_eq!(par, seq);
        let mut data = vec![0usize; 100];
        for_each_chunk_mut(&mut data, 10, |k, c| c.iter_mut().for_each(|v| *v = k));
        assert_eq!(data[57], 5);
    }
}
