//! Optional data parallelism.
//!
//! With the `parallel` feature (default) the hot loops run on rayon. The
//! sequential path is always compiled and can be forced at runtime with
//! [`set_parallelism`] or the `ARCHNET_PARALLELISM=false` environment variable.
//! Both paths produce identical results: every reduction used here is either
//! order-preserving (`collect`) or over commutative integer merges.

use std::sync::atomic::{AtomicU8, Ordering};

pub const ENV_VARIABLE: &str = "ARCHNET_PARALLELISM";

// 0 = unset (consult env), 1 = parallel, 2 = sequential
static PARALLELISM: AtomicU8 = AtomicU8::new(0);

/// Force the parallel (`true`) or sequential (`false`) path for this process.
pub fn set_parallelism(enabled: bool) {
    PARALLELISM.store(if enabled { 1 } else { 2 }, Ordering::SeqCst);
}

/// Whether parallel execution is currently active.
pub fn get_parallelism() -> bool {
    if !cfg!(feature = "parallel") {
        return false;
    }
    match PARALLELISM.load(Ordering::SeqCst) {
        1 => true,
        2 => false,
        _ => match std::env::var(ENV_VARIABLE) {
            Ok(v) => !matches!(v.to_lowercase().as_ref(), "" | "0" | "false" | "off" | "no"),
            Err(_) => true,
        },
    }
}

/// Order-preserving map over a slice.
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if get_parallelism() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    items.iter().map(f).collect()
}

/// Order-preserving map over `0..n`.
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if get_parallelism() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// In-place mutation of every element.
pub fn for_each_mut<T, F>(items: &mut [T], f: F)
where
    T: Send,
    F: Fn(&mut T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if get_parallelism() {
        use rayon::prelude::*;
        items.par_iter_mut().for_each(f);
        return;
    }
    items.iter_mut().for_each(f);
}
