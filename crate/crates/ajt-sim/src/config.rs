//! JSON configuration files for the simulator. Every field is optional
//! and falls back to the built-in defaults (32KB 4-way caches with a
//! 30-cycle miss penalty); unknown keys are rejected so typos fail loudly
//! instead of silently running the default.

use serde::Deserialize;
use thiserror::Error;

use crate::core::CoreConfig;
use crate::memunit::{CacheConfig, ConfigError};
use crate::pipeline::Timing;
use crate::sidekick::DEFAULT_CHANNEL_BASE;

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CacheFile {
    size: Option<u32>,
    assoc: Option<u32>,
    miss_penalty: Option<u32>,
}

impl CacheFile {
    fn apply(&self, base: CacheConfig) -> CacheConfig {
        CacheConfig {
            size_bytes: self.size.unwrap_or(base.size_bytes),
            associativity: self.assoc.unwrap_or(base.associativity),
            miss_penalty: self.miss_penalty.unwrap_or(base.miss_penalty),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    icache: Option<CacheFile>,
    dcache: Option<CacheFile>,
    mispredict_penalty: Option<u32>,
    int_div_cycles: Option<u32>,
    channel_base: Option<u32>,
    trace: Option<bool>,
}

/// A parsed and validated configuration: the core parameters plus the
/// side-kick channel base used by workload builds.
#[derive(Debug, Clone, Copy)]
pub struct Config {
    pub core: CoreConfig,
    pub channel_base: u32,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            core: CoreConfig::default(),
            channel_base: DEFAULT_CHANNEL_BASE,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigFileError {
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("icache: {0}")]
    ICache(ConfigError),
    #[error("dcache: {0}")]
    DCache(ConfigError),
    #[error("channel base {0:#x} must be 64-byte aligned")]
    ChannelBase(u32),
}

/// Parse a config file's contents. An empty (or whitespace-only) file
/// means "all defaults".
pub fn parse(text: &str) -> Result<Config, ConfigFileError> {
    let file: ConfigFile = if text.trim().is_empty() {
        ConfigFile::default()
    } else {
        serde_json::from_str(text)?
    };
    let base = Config::default();
    let core = CoreConfig {
        icache: file.icache.unwrap_or_default().apply(base.core.icache),
        dcache: file.dcache.unwrap_or_default().apply(base.core.dcache),
        timing: Timing {
            mispredict_penalty: file
                .mispredict_penalty
                .unwrap_or(base.core.timing.mispredict_penalty),
            int_div_cycles: file.int_div_cycles.unwrap_or(base.core.timing.int_div_cycles),
        },
        trace: file.trace.unwrap_or(base.core.trace),
        ..base.core
    };
    core.icache.validate().map_err(ConfigFileError::ICache)?;
    core.dcache.validate().map_err(ConfigFileError::DCache)?;
    let channel_base = file.channel_base.unwrap_or(base.channel_base);
    if channel_base % 64 != 0 {
        return Err(ConfigFileError::ChannelBase(channel_base));
    }
    Ok(Config { core, channel_base })
}
