//! Preference and policy files.
//!
//! Domain paths are resolved relative to the file that names them.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use credmatch_core::encoding::MIN_GUARD_BITS;
use credmatch_core::{
    ClientPreferences, CredentialDomain, ElementEncoding, EncodingError, OptionCode, PolicyRule,
    ServerPolicy, Side,
};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BucketMode {
    #[default]
    Off,
    Auto,
}

fn default_guard() -> u32 {
    MIN_GUARD_BITS
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClientParams {
    #[serde(default = "default_guard")]
    pub guard_bits: u32,
    /// 0 selects the bitmask encoding.
    #[serde(default)]
    pub hash_width: u32,
    #[serde(default = "default_true")]
    pub payload: bool,
    #[serde(default)]
    pub bucketing: BucketMode,
}

impl Default for ClientParams {
    fn default() -> Self {
        ClientParams {
            guard_bits: default_guard(),
            hash_width: 0,
            payload: true,
            bucketing: BucketMode::Off,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerParams {
    #[serde(default = "default_guard")]
    pub guard_bits: u32,
    #[serde(default)]
    pub hash_width: u32,
    #[serde(default = "default_true")]
    pub payload: bool,
}

impl Default for ServerParams {
    fn default() -> Self {
        ServerParams {
            guard_bits: default_guard(),
            hash_width: 0,
            payload: true,
        }
    }
}

pub fn encoding_for(hash_width: u32) -> Result<ElementEncoding, EncodingError> {
    if hash_width == 0 {
        Ok(ElementEncoding::Bitmask)
    } else {
        ElementEncoding::hashed(hash_width)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PrefsFile {
    client_domain: PathBuf,
    server_domain: PathBuf,
    options: Vec<Vec<String>>,
    #[serde(default)]
    params: ClientParams,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleEntry {
    accept: Vec<String>,
    disclose: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolicyFile {
    client_domain: PathBuf,
    server_domain: PathBuf,
    rules: Vec<RuleEntry>,
    #[serde(default)]
    params: ServerParams,
}

pub struct ClientConfig {
    pub client_domain: CredentialDomain,
    pub server_domain: CredentialDomain,
    pub prefs: ClientPreferences,
    pub params: ClientParams,
    pub encoding: ElementEncoding,
}

pub struct ServerConfig {
    pub client_domain: CredentialDomain,
    pub server_domain: CredentialDomain,
    pub policy: ServerPolicy,
    pub params: ServerParams,
    pub encoding: ElementEncoding,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_domains(
    config_path: &Path,
    client: &Path,
    server: &Path,
) -> Result<(CredentialDomain, CredentialDomain)> {
    let base = config_path.parent().unwrap_or(Path::new("."));
    let load = |side, p: &Path| {
        let full = base.join(p);
        CredentialDomain::load(side, &full)
            .with_context(|| format!("loading domain {}", full.display()))
    };
    Ok((load(Side::Client, client)?, load(Side::Server, server)?))
}

/// Collects every name missing from a domain across many options.
#[derive(Default)]
struct Unknowns {
    client: BTreeSet<String>,
    server: BTreeSet<String>,
}

impl Unknowns {
    fn encode(
        &mut self,
        domain: &CredentialDomain,
        names: &[String],
        what: &str,
    ) -> Result<Option<OptionCode>> {
        match domain.encode_option(names) {
            Ok(code) => Ok(Some(code)),
            Err(EncodingError::UnknownCredentials(missing)) => {
                match domain.side() {
                    Side::Client => self.client.extend(missing),
                    Side::Server => self.server.extend(missing),
                }
                Ok(None)
            }
            Err(e) => bail!("{what}: {e}"),
        }
    }

    fn check(self) -> Result<()> {
        let mut parts = Vec::new();
        if !self.client.is_empty() {
            parts.push(format!(
                "unknown client credential(s): {}",
                self.client.into_iter().collect::<Vec<_>>().join(", ")
            ));
        }
        if !self.server.is_empty() {
            parts.push(format!(
                "unknown server credential(s): {}",
                self.server.into_iter().collect::<Vec<_>>().join(", ")
            ));
        }
        if !parts.is_empty() {
            bail!("{}", parts.join("; "));
        }
        Ok(())
    }
}

pub fn load_client_config(path: &Path) -> Result<ClientConfig> {
    let file: PrefsFile = read_json(path)?;
    let (client_domain, server_domain) =
        load_domains(path, &file.client_domain, &file.server_domain)?;
    let mut unknowns = Unknowns::default();
    let mut codes = Vec::with_capacity(file.options.len());
    for (i, names) in file.options.iter().enumerate() {
        if let Some(code) = unknowns.encode(&client_domain, names, &format!("option {}", i + 1))? {
            codes.push(code);
        }
    }
    unknowns
        .check()
        .with_context(|| format!("validating {}", path.display()))?;
    let prefs =
        ClientPreferences::new(codes).with_context(|| format!("validating {}", path.display()))?;
    let encoding = encoding_for(file.params.hash_width)?;
    Ok(ClientConfig {
        client_domain,
        server_domain,
        prefs,
        params: file.params,
        encoding,
    })
}

pub fn load_server_config(path: &Path) -> Result<ServerConfig> {
    let file: PolicyFile = read_json(path)?;
    let (client_domain, server_domain) =
        load_domains(path, &file.client_domain, &file.server_domain)?;
    let mut unknowns = Unknowns::default();
    let mut rules = Vec::with_capacity(file.rules.len());
    for (i, rule) in file.rules.iter().enumerate() {
        let what = format!("rule {}", i + 1);
        let accept = unknowns.encode(&client_domain, &rule.accept, &what)?;
        let disclose = unknowns.encode(&server_domain, &rule.disclose, &what)?;
        if let (Some(accept), Some(disclose)) = (accept, disclose) {
            rules.push(PolicyRule { accept, disclose });
        }
    }
    unknowns
        .check()
        .with_context(|| format!("validating {}", path.display()))?;
    if rules.is_empty() {
        bail!("{}: policy has no rules", path.display());
    }
    let policy =
        ServerPolicy::new(rules).with_context(|| format!("validating {}", path.display()))?;
    let encoding = encoding_for(file.params.hash_width)?;
    Ok(ServerConfig {
        client_domain,
        server_domain,
        policy,
        params: file.params,
        encoding,
    })
}
