//! Block execution strategy for path ensembles.
//!
//! Paths are grouped into fixed-size blocks; an executor maps a closure over
//! block indices and returns the results *in block order*. All reductions
//! happen sequentially over that ordered `Vec`, so the ensemble averages are
//! bit-identical whether blocks run serially or on any number of workers.

/// Paths per block. Fixed (never derived from worker count) so that block
/// boundaries, and hence floating-point summation order, are invariant.
pub const BLOCK_SIZE: usize = 128;

pub trait BlockExecutor {
    fn map_blocks<T, F>(&self, n_blocks: usize, f: F) -> alloc::vec::Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync;
}

/// Runs blocks one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct SerialExecutor;

impl BlockExecutor for SerialExecutor {
    fn map_blocks<T, F>(&self, n_blocks: usize, f: F) -> alloc::vec::Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        (0..n_blocks).map(f).collect()
    }
}

/// Index range of paths in block `block` out of `n_paths` total.
pub fn block_range(block: usize, n_paths: usize) -> core::ops::Range<usize> {
    let start = block * BLOCK_SIZE;
    let end = ((block + 1) * BLOCK_SIZE).min(n_paths);
    start..end
}

pub fn n_blocks(n_paths: usize) -> usize {
    n_paths.div_ceil(BLOCK_SIZE)
}
