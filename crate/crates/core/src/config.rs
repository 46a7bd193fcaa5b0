//! Campaign configuration: built-in defaults, an optional TOML file and
//! command-line overrides, resolved with precedence flag > file > default.
//! The `FEDSIM_SEED` value sits between the file and the default for the
//! seed only.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::domains::{CompletionMode, ConsumerPolicy, DeploymentModel, ProviderPolicy, CLIENT_OVERHEAD_S};
use crate::ledger::NetworkProfile;
use crate::rng::Dist;

pub const DEFAULT_BLOCK_PERIODS_S: [f64; 5] = [1.0, 2.0, 5.0, 10.0, 20.0];
pub const DEFAULT_REPLICATIONS: u32 = 100;
pub const DEFAULT_SEED: u64 = 2023;
pub const BUILTIN_PROFILES: [&str; 2] = ["private", "public"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub profiles: Vec<NetworkProfile>,
    /// Swept for private profiles; public profiles use their own period.
    pub block_periods_s: Vec<f64>,
    pub replications: u32,
    pub base_seed: u64,
    pub n_consumers: u32,
    pub n_providers: u32,
    pub deployment: DeploymentModel,
    pub consumer: ConsumerPolicy,
    pub provider: ProviderPolicy,
    pub client_overhead_s: f64,
    pub output_dir: PathBuf,
    pub complete_tx_mode: CompletionMode,
    pub jobs: usize,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            profiles: vec![NetworkProfile::private(1.0), NetworkProfile::public()],
            block_periods_s: DEFAULT_BLOCK_PERIODS_S.to_vec(),
            replications: DEFAULT_REPLICATIONS,
            base_seed: DEFAULT_SEED,
            n_consumers: 1,
            n_providers: 1,
            deployment: DeploymentModel::default(),
            consumer: ConsumerPolicy::default(),
            provider: ProviderPolicy::default(),
            client_overhead_s: CLIENT_OVERHEAD_S,
            output_dir: PathBuf::from("results"),
            complete_tx_mode: CompletionMode::OnChain,
            jobs: 1,
        }
    }
}

/// Every violation found while resolving or validating a configuration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub violations: Vec<String>,
}

impl ConfigError {
    pub fn single(msg: impl Into<String>) -> Self {
        ConfigError { violations: vec![msg.into()] }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration:")?;
        for v in &self.violations {
            write!(f, "\n  - {v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

impl CampaignConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut v = Vec::new();
        if self.profiles.is_empty() {
            v.push("at least one profile is required".to_string());
        }
        for p in &self.profiles {
            if let Err(errs) = p.validate() {
                v.extend(errs);
            }
        }
        if self.block_periods_s.is_empty() {
            v.push("block_periods_s must not be empty".into());
        }
        for bp in &self.block_periods_s {
            if !(bp.is_finite() && *bp > 0.0) {
                v.push(format!("block period {bp} must be > 0"));
            }
        }
        if self.replications < 1 {
            v.push("replications must be >= 1".into());
        }
        if self.n_consumers != 1 {
            v.push(format!("n_consumers must be 1 (got {})", self.n_consumers));
        }
        if self.n_providers < 1 {
            v.push("n_providers must be >= 1".into());
        }
        if self.jobs < 1 {
            v.push("jobs must be >= 1".into());
        }
        if !(self.client_overhead_s.is_finite() && self.client_overhead_s >= 0.0) {
            v.push("client_overhead_s must be >= 0".into());
        }
        let d = &self.deployment;
        let (lo, _) = d.latency.support();
        if lo <= 0.0 && !matches!(d.latency, Dist::Normal { mean, .. } if mean > 0.0) {
            v.push(format!("deployment latency {} must produce positive draws", d.latency));
        }
        if !(0.0..=1.0).contains(&d.failure_prob) {
            v.push("deployment failure_prob must lie in [0, 1]".into());
        }
        if let Some((a, b)) = d.breakdown {
            if !(a >= 0.0 && b >= 0.0 && a + b > 0.0) {
                v.push("deployment breakdown parts must be >= 0 with a positive sum".into());
            }
        }
        if !(self.consumer.bid_wait_s.is_finite() && self.consumer.bid_wait_s >= 0.0) {
            v.push("consumer bid_wait_s must be >= 0".into());
        }
        if !(self.consumer.timeout_s.is_finite() && self.consumer.timeout_s > 0.0) {
            v.push("consumer timeout_s must be > 0".into());
        }
        if self.provider.pricing.support().0 < 0.0 && !matches!(self.provider.pricing, Dist::Normal { .. }) {
            v.push("provider pricing must be non-negative".into());
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(ConfigError { violations: v })
        }
    }
}

/// Values given on the command line. Numbers stay signed and lists stay
/// raw so that bad input is reported together with everything else.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigOverrides {
    pub profiles: Option<Vec<String>>,
    pub block_periods: Option<String>,
    pub reps: Option<i64>,
    pub seed: Option<u64>,
    pub providers: Option<i64>,
    pub deploy_latency: Option<String>,
    pub out: Option<PathBuf>,
    pub jobs: Option<i64>,
    pub no_complete_tx: bool,
}

#[derive(Debug, Default, Deserialize)]
struct FileConfig {
    profiles: Option<Vec<String>>,
    block_periods_s: Option<Vec<f64>>,
    replications: Option<i64>,
    base_seed: Option<u64>,
    output_dir: Option<PathBuf>,
    jobs: Option<i64>,
    complete_tx_mode: Option<String>,
    client_overhead_s: Option<f64>,
    topology: Option<FileTopology>,
    deployment: Option<FileDeployment>,
    consumer: Option<FileConsumer>,
    provider: Option<FileProvider>,
    profile: Option<BTreeMap<String, FileProfile>>,
}

#[derive(Debug, Default, Deserialize)]
struct FileTopology {
    n_consumers: Option<i64>,
    n_providers: Option<i64>,
}

#[derive(Debug, Default, Deserialize)]
struct FileDeployment {
    latency: Option<String>,
    breakdown: Option<(f64, f64)>,
    failure_prob: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
struct FileConsumer {
    bid_wait_s: Option<f64>,
    timeout_s: Option<f64>,
    requirements: Option<BTreeMap<String, toml::Value>>,
}

#[derive(Debug, Default, Deserialize)]
struct FileProvider {
    pricing: Option<String>,
    max_resources: Option<BTreeMap<String, f64>>,
}

#[derive(Debug, Default, Deserialize)]
struct FileProfile {
    block_period_s: Option<f64>,
    block_jitter: Option<String>,
    inclusion_extra_blocks: Option<String>,
    api_latency_s: Option<String>,
}

fn parse_file(text: &str, v: &mut Vec<String>) -> FileConfig {
    let de = match toml::Deserializer::parse(text) {
        Ok(de) => de,
        Err(e) => {
            v.push(format!("config file: {}", e.message()));
            return FileConfig::default();
        }
    };
    let mut unknown = Vec::new();
    let parsed: Result<FileConfig, _> = serde_ignored::deserialize(de, |path| {
        let key: Vec<String> = path.to_string().split('.').filter(|seg| *seg != "?").map(str::to_string).collect();
        unknown.push(key.join("."));
    });
    for key in unknown {
        v.push(format!("unknown key `{key}`"));
    }
    match parsed {
        Ok(f) => f,
        Err(e) => {
            v.push(format!("config file: {}", e.message()));
            FileConfig::default()
        }
    }
}

fn parse_dist(what: &str, spec: &str, v: &mut Vec<String>) -> Option<Dist> {
    match spec.parse::<Dist>() {
        Ok(d) => Some(d),
        Err(e) => {
            v.push(format!("{what}: {e}"));
            None
        }
    }
}

fn non_negative(what: &str, x: i64, v: &mut Vec<String>) -> u64 {
    if x < 0 {
        v.push(format!("{what} must be non-negative (got {x})"));
        0
    } else {
        x as u64
    }
}

fn toml_scalar(value: &toml::Value) -> String {
    match value {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Merges defaults, `file_text` (TOML) and `flags`; `env_seed` is the
/// raw `FEDSIM_SEED` value, if set.
pub fn resolve(
    file_text: Option<&str>,
    flags: &ConfigOverrides,
    env_seed: Option<&str>,
) -> Result<CampaignConfig, ConfigError> {
    let mut v = Vec::new();
    let file = file_text.map(|t| parse_file(t, &mut v)).unwrap_or_default();
    let mut cfg = CampaignConfig::default();

    let names = flags
        .profiles
        .clone()
        .or(file.profiles.clone())
        .unwrap_or_else(|| BUILTIN_PROFILES.iter().map(|s| s.to_string()).collect());
    let overrides = file.profile.unwrap_or_default();
    for name in overrides.keys() {
        if !BUILTIN_PROFILES.contains(&name.as_str()) {
            v.push(format!("unknown profile `{name}` in [profile] table"));
        }
    }
    cfg.profiles.clear();
    for name in &names {
        let name = name.trim().to_ascii_lowercase();
        let Some(mut p) = NetworkProfile::builtin(&name) else {
            v.push(format!("unknown profile `{name}` (expected one of {})", BUILTIN_PROFILES.join(", ")));
            continue;
        };
        if cfg.profiles.iter().any(|q| q.name == p.name) {
            v.push(format!("profile `{name}` listed twice"));
            continue;
        }
        if let Some(o) = overrides.get(&name) {
            if let Some(bp) = o.block_period_s {
                p.block_period_s = bp;
            }
            let field = |label: &str, spec: &Option<String>, v: &mut Vec<String>| {
                spec.as_deref().and_then(|s| parse_dist(&format!("profile.{name}.{label}"), s, v))
            };
            if let Some(d) = field("block_jitter", &o.block_jitter, &mut v) {
                p.block_jitter = d;
            }
            if let Some(d) = field("inclusion_extra_blocks", &o.inclusion_extra_blocks, &mut v) {
                p.inclusion_extra_blocks = d;
            }
            if let Some(d) = field("api_latency_s", &o.api_latency_s, &mut v) {
                p.api_latency_s = d;
            }
        }
        cfg.profiles.push(p);
    }

    if let Some(raw) = &flags.block_periods {
        let mut bps = Vec::new();
        for part in raw.split(',') {
            match part.trim().parse::<f64>() {
                Ok(x) => bps.push(x),
                Err(_) => v.push(format!("--block-periods: `{}` is not a number", part.trim())),
            }
        }
        cfg.block_periods_s = bps;
    } else if let Some(bps) = file.block_periods_s {
        cfg.block_periods_s = bps;
    }

    if let Some(r) = flags.reps.or(file.replications) {
        match u32::try_from(r) {
            Ok(r) => cfg.replications = r,
            Err(_) => v.push(format!("replications must be a positive integer (got {r})")),
        }
    }

    let env = env_seed.and_then(|s| match s.trim().parse::<u64>() {
        Ok(x) => Some(x),
        Err(_) => {
            v.push(format!("FEDSIM_SEED `{s}` is not an unsigned 64-bit integer"));
            None
        }
    });
    cfg.base_seed = flags.seed.or(file.base_seed).or(env).unwrap_or(DEFAULT_SEED);

    let topo = file.topology.unwrap_or_default();
    if let Some(c) = topo.n_consumers {
        cfg.n_consumers = non_negative("n_consumers", c, &mut v) as u32;
    }
    if let Some(n) = flags.providers.or(topo.n_providers) {
        cfg.n_providers = non_negative("n_providers", n, &mut v).min(u32::MAX as u64) as u32;
    }

    let dep = file.deployment.unwrap_or_default();
    if let Some(spec) = flags.deploy_latency.as_deref().or(dep.latency.as_deref()) {
        if let Some(d) = parse_dist("deployment latency", spec, &mut v) {
            cfg.deployment.latency = d;
        }
    }
    if let Some(b) = dep.breakdown {
        cfg.deployment.breakdown = Some(b);
    }
    if let Some(p) = dep.failure_prob {
        cfg.deployment.failure_prob = p;
    }

    let cons = file.consumer.unwrap_or_default();
    if let Some(w) = cons.bid_wait_s {
        cfg.consumer.bid_wait_s = w;
    }
    if let Some(t) = cons.timeout_s {
        cfg.consumer.timeout_s = t;
    }
    if let Some(r) = cons.requirements {
        cfg.consumer.requirements = r.iter().map(|(k, val)| (k.clone(), toml_scalar(val))).collect();
    }

    let prov = file.provider.unwrap_or_default();
    if let Some(spec) = prov.pricing {
        if let Some(d) = parse_dist("provider pricing", &spec, &mut v) {
            cfg.provider.pricing = d;
        }
    }
    if let Some(m) = prov.max_resources {
        cfg.provider.max_resources = m;
    }

    if let Some(o) = file.client_overhead_s {
        cfg.client_overhead_s = o;
    }
    if let Some(dir) = flags.out.clone().or(file.output_dir) {
        cfg.output_dir = dir;
    }
    if let Some(j) = flags.jobs.or(file.jobs) {
        cfg.jobs = non_negative("jobs", j, &mut v) as usize;
    }

    if flags.no_complete_tx {
        cfg.complete_tx_mode = CompletionMode::MeasurementOnly;
    } else if let Some(mode) = file.complete_tx_mode {
        match mode.as_str() {
            "on-chain" => cfg.complete_tx_mode = CompletionMode::OnChain,
            "measurement-only" => cfg.complete_tx_mode = CompletionMode::MeasurementOnly,
            other => v.push(format!(
                "complete_tx_mode `{other}` must be `on-chain` or `measurement-only`"
            )),
        }
    }

    if let Err(e) = cfg.validate() {
        for msg in e.violations {
            if !v.contains(&msg) {
                v.push(msg);
            }
        }
    }
    if v.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError { violations: v })
    }
}
