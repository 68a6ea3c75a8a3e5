pub mod distort;
pub mod eval;
pub mod infer;
pub mod prepare;
pub mod train;

use crate::CmdError;

/// Builds the rayon pool every parallel section runs inside; `jobs == 0`
/// means one worker per core. Results are ordered, so the pool size never
/// changes output bytes.
pub fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool, CmdError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CmdError::config(format!("could not build thread pool: {e}")))
}
