//! File formats: binary feature containers and model dumps, the text run
//! config and ranked-case files.

mod binary;
mod cases;
mod config;

pub use binary::{read_features, read_model, write_features, write_model, FEATURE_MAGIC, FORMAT_VERSION, MODEL_MAGIC};
pub use cases::{format_case, parse_cases};
pub use config::{RunConfig, TauSetting, CONFIG_KEYS};
