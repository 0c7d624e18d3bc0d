//! Numerical shape calculus for the first nontrivial Neumann eigenvalue on
//! planar domains and flat cylinders.

pub mod assembly;
pub mod cli;
pub mod criticality;
pub mod eigensolve;
pub mod geometry;
pub mod linalg;
pub mod optimizer;
pub mod reference;
pub mod shapecalc;

/// Worker threads for parallel evaluations: `SHAPELAB_THREADS` if set,
/// otherwise the available parallelism.
pub fn threads() -> usize {
    std::env::var("SHAPELAB_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Evaluates `f` on every item in a pool of [`threads`] workers,
/// returning results in input order.
pub fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    use rayon::prelude::*;
    let workers = threads().min(items.len()).max(1);
    if workers == 1 {
        return items.iter().map(&f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        Err(_) => items.iter().map(&f).collect(),
    }
}
