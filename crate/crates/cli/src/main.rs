use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fedsim_core::config::{ConfigOverrides, BUILTIN_PROFILES};
use fedsim_core::harness::{self, export};
use fedsim_core::ledger::{PRIVATE_API_LATENCY_S, PUBLIC_API_LATENCY_S, PUBLIC_EXTRA_BLOCKS_MEAN};
use fedsim_core::{resolve, CampaignConfig, NetworkProfile};

const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;

/// Discrete-event simulator of blockchain-brokered multi-domain service federation.
#[derive(Debug, Parser)]
#[command(name = "fedsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a replicated campaign and write timelines and summaries.
    Run(Common),
    /// Run a single federation and print its event narrative.
    Trace {
        #[command(flatten)]
        common: Common,
        /// Replication index within the first (profile, block period) group.
        #[arg(long, default_value_t = 0)]
        run_id: u64,
        /// Also write the sealed chain as JSON lines.
        #[arg(long, value_name = "PATH")]
        chain_trace: Option<PathBuf>,
    },
    /// List built-in network profiles and where their parameters come from.
    Profiles,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Comma-separated profile names.
    #[arg(long, value_name = "NAME[,NAME]", value_delimiter = ',')]
    profile: Option<Vec<String>>,
    /// Comma-separated block periods in seconds for private profiles.
    #[arg(long, value_name = "CSV", allow_hyphen_values = true)]
    block_periods: Option<String>,
    /// Replications per (profile, block period) group.
    #[arg(long, value_name = "N", allow_negative_numbers = true)]
    reps: Option<i64>,
    /// Base seed (overrides FEDSIM_SEED).
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Number of provider domains.
    #[arg(long, value_name = "N", allow_negative_numbers = true)]
    providers: Option<i64>,
    /// Deployment latency distribution, e.g. `36` or `normal:36,2`.
    #[arg(long, value_name = "SPEC")]
    deploy_latency: Option<String>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, value_name = "N", allow_negative_numbers = true)]
    jobs: Option<i64>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    dry_run: bool,
    /// Stamp completion at confirmation instead of sending a completion transaction.
    #[arg(long)]
    no_complete_tx: bool,
}

enum Failure {
    Config(String),
    Io(String),
}

impl Common {
    fn resolve(&self) -> Result<CampaignConfig, Failure> {
        let text = match &self.config {
            Some(path) => Some(
                fs::read_to_string(path).map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?,
            ),
            None => None,
        };
        let flags = ConfigOverrides {
            profiles: self.profile.clone(),
            block_periods: self.block_periods.clone(),
            reps: self.reps,
            seed: self.seed,
            providers: self.providers,
            deploy_latency: self.deploy_latency.clone(),
            out: self.out.clone(),
            jobs: self.jobs,
            no_complete_tx: self.no_complete_tx,
        };
        let env = std::env::var("FEDSIM_SEED").ok();
        resolve(text.as_deref(), &flags, env.as_deref()).map_err(|e| Failure::Config(e.to_string()))
    }
}

fn emit(text: &str) -> Result<(), Failure> {
    io::stdout().lock().write_all(text.as_bytes()).map_err(|e| Failure::Io(e.to_string()))
}

fn print_config(config: &CampaignConfig) -> Result<(), Failure> {
    let json = serde_json::to_string_pretty(config).map_err(|e| Failure::Io(e.to_string()))?;
    emit(&format!("{json}\n"))
}

fn run(common: &Common) -> Result<(), Failure> {
    let config = common.resolve()?;
    if common.dry_run {
        return print_config(&config);
    }
    let timelines = harness::run_campaign(&config).map_err(|e| Failure::Config(e.to_string()))?;
    let stats = harness::aggregate(&timelines);
    let files = export::export(&config.output_dir, &config, &stats, &timelines).map_err(|e| Failure::Io(e.to_string()))?;
    let mut text = harness::render_summary(&stats);
    let failed = timelines.iter().filter(|t| t.failed).count();
    text += &format!("{} runs ({failed} failed), seed {}\n", timelines.len(), config.base_seed);
    for f in [&files.timelines_csv, &files.summary_csv, &files.summary_json] {
        text += &format!("wrote {}\n", f.display());
    }
    emit(&text)
}

fn trace(common: &Common, run_id: u64, chain_trace: Option<&PathBuf>) -> Result<(), Failure> {
    let config = common.resolve()?;
    if common.dry_run {
        return print_config(&config);
    }
    let profile = harness::campaign_groups(&config)
        .into_iter()
        .next()
        .ok_or_else(|| Failure::Config("no profile to trace".into()))?;
    let spec = harness::run_spec(&config, &profile, run_id);
    let out = harness::run_federation(&spec, true);
    let stdout = io::stdout();
    let mut w = stdout.lock();
    let io_err = |e: io::Error| Failure::Io(e.to_string());
    writeln!(w, "# {} BP={}s run {} seed {}", profile.name, profile.block_period_s, run_id, spec.seed).map_err(io_err)?;
    for line in &out.trace {
        writeln!(w, "{line}").map_err(io_err)?;
    }
    if let Some(path) = chain_trace {
        let file = File::create(path).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))?;
        let mut file = BufWriter::new(file);
        out.ledger
            .export_chain_jsonl(&mut file)
            .and_then(|_| file.flush())
            .map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

fn profiles() -> Result<(), Failure> {
    let mut out = String::new();
    for name in BUILTIN_PROFILES {
        let p = NetworkProfile::builtin(name).expect("built-in");
        out += &format!("{name} ({:?})\n", p.kind);
        let (bp_src, jit_src, extra_src, api_src) = match name {
            "private" => ("reported sweep 1-20 s", "reported (none)", "reported (none)", "calibrated"),
            _ => ("reported", "calibrated", "calibrated", "calibrated"),
        };
        out += &format!("  block_period_s          {:<16} {bp_src}\n", p.block_period_s);
        out += &format!("  block_jitter            {:<16} {jit_src}\n", p.block_jitter.to_string());
        out += &format!("  inclusion_extra_blocks  {:<16} {extra_src}\n", p.inclusion_extra_blocks.to_string());
        out += &format!("  api_latency_s           {:<16} {api_src}\n", p.api_latency_s.to_string());
        out += &format!("  expected inclusion wait {:.3} s\n", p.expected_inclusion_wait());
    }
    out += &format!(
        "calibrated values ({PRIVATE_API_LATENCY_S} s / {PUBLIC_API_LATENCY_S} s API latency, \
         {PUBLIC_EXTRA_BLOCKS_MEAN} mean extra blocks) are fitted to reported end-to-end totals \
         and can be overridden under [profile.<name>]\n"
    );
    emit(&out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(common) => run(common),
        Command::Trace { common, run_id, chain_trace } => trace(common, *run_id, chain_trace.as_ref()),
        Command::Profiles => profiles(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_IO)
        }
    }
}
