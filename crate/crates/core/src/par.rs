//! Order-preserving map over a slice, parallel or sequential.
//!
//! Training accumulates per-document gradients, soft-label generation and
//! feature extraction are all independent per document. [`map_slice`] fans
//! those loops out on rayon when the `parallel` feature is enabled and runs
//! them inline otherwise. Results come back in input order either way, so
//! every reduction downstream happens in a fixed order and the two modes are
//! bit-identical. Both concrete implementations stay available for the
//! benchmark suite.

/// Sequential reference implementation.
pub fn map_slice_seq<T: Sync, U: Send, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U + Sync + Send,
{
    items.iter().map(f).collect()
}

/// Rayon implementation; order of the output matches the input.
#[cfg(feature = "parallel")]
pub fn map_slice_par<T: Sync, U: Send, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

/// Dispatches on the `parallel` feature.
#[cfg(feature = "parallel")]
pub fn map_slice<T: Sync, U: Send, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U + Sync + Send,
{
    map_slice_par(items, f)
}

/// Dispatches on the `parallel` feature.
#[cfg(not(feature = "parallel"))]
pub fn map_slice<T: Sync, U: Send, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U + Sync + Send,
{
    map_slice_seq(items, f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order() {
        let items: Vec<u64> = (0..1000).collect();
        let out = map_slice(&items, |x| x * 2);
        assert_eq!(out, items.iter().map(|x| x * 2).collect::<Vec<_>>());
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_matches_sequential() {
        let items: Vec<f64> = (0..512).map(|i| i as f64 * 0.37).collect();
        let f = |x: &f64| (x.sin() * 1e6).to_bits();
        assert_eq!(map_slice_par(&items, f), map_slice_seq(&items, f));
    }
}
