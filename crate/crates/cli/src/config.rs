//! Config-file schema shared by the pipeline-driven subcommands.
//!
//! A config file carries the same keys as the command-line flags; a flag given
//! on the command line replaces the file's value.

use std::path::{Path, PathBuf};

use psihash::{Family, Quantizer, Variant};
use serde::{Deserialize, Serialize};

use crate::exit::{CliError, ExitCode};

pub const CLI_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<Variant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<Family>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantizer: Option<Quantizer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structure: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_format: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<(usize, usize)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub all_pairs: Option<bool>,
}

impl CliConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::new(ExitCode::MalformedInput, format!("{}: {e}", path.display()))
        })?;
        let cfg: CliConfig = serde_json::from_str(&text).map_err(|e| {
            CliError::new(ExitCode::MalformedInput, format!("{}: {e}", path.display()))
        })?;
        if let Some(v) = cfg.schema {
            if v != CLI_SCHEMA_VERSION {
                return Err(CliError::new(
                    ExitCode::MalformedInput,
                    format!("{}: unsupported schema version {v}", path.display()),
                ));
            }
        }
        Ok(cfg)
    }

    /// Every field set on `flags` replaces the corresponding field here.
    pub fn overridden_by(mut self, flags: CliConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if flags.$f.is_some() { self.$f = flags.$f; } )* };
        }
        take!(
            schema,
            variant,
            family,
            k,
            n,
            seed,
            quantizer,
            structure,
            input,
            input_format,
            out,
            format,
            mode,
            cap,
            pairs,
            all_pairs
        );
        self.schema = Some(CLI_SCHEMA_VERSION);
        self
    }

    pub fn require<T: Clone>(value: &Option<T>, flag: &str) -> Result<T, CliError> {
        value.clone().ok_or_else(|| {
            CliError::new(
                ExitCode::InvalidPipeline,
                format!("missing required setting --{flag} (flag or config file)"),
            )
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let file = CliConfig {
            k: Some(8),
            n: Some(16),
            seed: Some(1),
            ..Default::default()
        };
        let flags = CliConfig {
            k: Some(4),
            ..Default::default()
        };
        let merged = file.overridden_by(flags);
        assert_eq!(merged.k, Some(4));
        assert_eq!(merged.n, Some(16));
        assert_eq!(merged.seed, Some(1));
        assert_eq!(merged.schema, Some(CLI_SCHEMA_VERSION));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<CliConfig>(r#"{"kk": 3}"#).is_err());
        let cfg: CliConfig =
            serde_json::from_str(r#"{"variant":"short","quantizer":"tanh:2","pairs":[[0,1]]}"#)
                .unwrap();
        assert_eq!(cfg.variant, Some(Variant::Short));
        assert_eq!(cfg.quantizer, Some(Quantizer::Tanh { beta: 2.0 }));
        assert_eq!(cfg.pairs, Some(vec![(0, 1)]));
    }
}
