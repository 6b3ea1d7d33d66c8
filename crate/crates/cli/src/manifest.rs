use serde::Serialize;

/// Provenance record written to stderr after every run.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: Option<String>,
    pub seed: Option<u64>,
    pub outputs: Vec<String>,
    pub version: &'static str,
    pub wall_time_s: f64,
    pub exit_code: i32,
}

impl RunManifest {
    pub fn new(subcommand: &str) -> Self {
        RunManifest {
            subcommand: subcommand.to_owned(),
            config: None,
            seed: None,
            outputs: Vec::new(),
            version: env!("CARGO_PKG_VERSION"),
            wall_time_s: 0.0,
            exit_code: 0,
        }
    }
}
