//! Worker-pool sizing from `PSEUDEQ_THREADS`.

use crate::error::{HarnessError, Result};

pub const THREADS_VAR: &str = "PSEUDEQ_THREADS";

/// Thread count requested by `value`; `0` or an unset variable means one
/// worker per core.
pub fn parse_threads(value: Option<&str>) -> Result<usize> {
    match value.map(str::trim) {
        None | Some("") => Ok(0),
        Some(v) => v
            .parse()
            .map_err(|_| HarnessError::validation(format!("{} must be a nonnegative integer, got {:?}", THREADS_VAR, v))),
    }
}

/// Sizes the global pool from the environment. Later calls are no-ops once
/// the pool exists.
pub fn init_from_env() -> Result<()> {
    let n = parse_threads(std::env::var(THREADS_VAR).ok().as_deref())?;
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}
