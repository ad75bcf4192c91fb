use tracing_subscriber::EnvFilter;

/// JSON log lines on stderr, one object per event. `level` takes the same
/// syntax as `RUST_LOG`.
pub fn init(level: &str) {
    let filter = EnvFilter::try_new(level).unwrap_or_else(|_| EnvFilter::new("info"));
    let _ = tracing_subscriber::fmt()
        .json()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .with_current_span(false)
        .try_init();
}
