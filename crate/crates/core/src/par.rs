//! Conditional data parallelism.
//!
//! With the `parallel` feature the helpers below fan out over rayon's global
//! pool; without it they degrade to sequential iterators with identical
//! results. Output order always matches input order, so callers never have
//! to re-sort.
//!
//! A per-thread [`Mode`] override lets benches and tests force the
//! sequential path in a parallel build:
//!
//! ```
//! use skillground::par::{self, Mode};
//! let squares = par::with_mode(Mode::Sequential, || par::map(&[1, 2, 3], |x| x * x));
//! assert_eq!(squares, vec![1, 4, 9]);
//! ```

use std::cell::Cell;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Execution strategy for the helpers in this module.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Sequential,
    Parallel,
}

impl Default for Mode {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Mode::Parallel
        } else {
            Mode::Sequential
        }
    }
}

thread_local! {
    static OVERRIDE: Cell<Option<Mode>> = const { Cell::new(None) };
}

/// The mode in effect on the calling thread.
pub fn current_mode() -> Mode {
    OVERRIDE.with(|m| m.get()).unwrap_or_default()
}

/// Run `f` with `mode` forced on the calling thread.
pub fn with_mode<R>(mode: Mode, f: impl FnOnce() -> R) -> R {
    let prev = OVERRIDE.with(|m| m.replace(Some(mode)));
    let out = f();
    OVERRIDE.with(|m| m.set(prev));
    out
}

fn parallel_enabled() -> bool {
    cfg!(feature = "parallel") && current_mode() == Mode::Parallel
}

/// Ordered map over a slice.
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        return items.par_iter().map(f).collect();
    }
    items.iter().map(f).collect()
}

/// Ordered map over `0..n`.
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Ordered fallible map; the first error in input order wins.
pub fn try_map<T, R, E, F>(items: &[T], f: F) -> Result<Vec<R>, E>
where
    T: Sync,
    R: Send,
    E: Send,
    F: Fn(&T) -> Result<R, E> + Sync + Send,
{
    map(items, f).into_iter().collect()
}
