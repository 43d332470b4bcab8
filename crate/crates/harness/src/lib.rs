//! Experiment runner, CLI support and acceptance suite for `rbo-core`.

pub mod acceptance;
pub mod config;
pub mod experiment;
pub mod oracles;
pub mod suite;
pub mod svg;

/// Caps the global rayon pool at `RBO_THREADS` workers when the variable is
/// set. Later calls are no-ops.
pub fn configure_threads() -> anyhow::Result<()> {
    if let Ok(value) = std::env::var("RBO_THREADS") {
        let threads: usize = value
            .trim()
            .parse()
            .map_err(|_| anyhow::anyhow!("RBO_THREADS must be a positive integer, got `{value}`"))?;
        if threads == 0 {
            anyhow::bail!("RBO_THREADS must be at least 1");
        }
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    Ok(())
}
