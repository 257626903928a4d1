mod config;
mod serve;

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::net::{TcpStream, ToSocketAddrs};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use credmatch_core::matching::bucketize;
use credmatch_core::paillier::MIN_KEY_BITS;
use credmatch_core::wire::{
    run_client_session, ClientSessionConfig, ServerSessionConfig, DEFAULT_MAX_OPTIONS,
    DEFAULT_TIMEOUT,
};
use credmatch_core::{
    keygen, BucketParams, Keypair, MatchSetup, NamedAgreement, ProtocolParams, PublicKey,
};
use rand::rngs::OsRng;
use serde::Serialize;

use config::{BucketMode, ClientConfig};

const TIMEOUT_ENV: &str = "CREDMATCH_TIMEOUT_SECS";
/// Fresh bucket seeds tried before giving up on an overflowing assignment.
const BUCKET_ATTEMPTS: usize = 32;

#[derive(Parser)]
#[command(
    name = "credmatch",
    version,
    about = "Private matching of credential policies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a key pair. Writes PATH (private) and PATH.pub (public).
    Keygen {
        #[arg(long, default_value_t = 2048)]
        bits: u64,
        #[arg(long)]
        out: PathBuf,
        /// Overwrite existing key files.
        #[arg(long)]
        force: bool,
    },
    /// Answer queries against a policy file.
    Serve {
        #[arg(long)]
        policy: PathBuf,
        /// Public key of the client allowed to connect.
        #[arg(long)]
        key_pub: PathBuf,
        #[arg(long)]
        listen: String,
        #[arg(long, value_enum, default_value_t = Buckets::Auto)]
        buckets: Buckets,
    },
    /// Run one query against a server.
    Client {
        #[arg(long)]
        prefs: PathBuf,
        /// Private key file written by `keygen`.
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        connect: String,
        /// Print agreements as JSON.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Buckets {
    Auto,
    Off,
}

/// Failure classes, each with its own exit code.
enum Failure {
    Config(anyhow::Error),
    Protocol(anyhow::Error),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Protocol(_) => 2,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Config(e) | Failure::Protocol(e) => e,
        }
    }
}

fn config_err(e: anyhow::Error) -> Failure {
    Failure::Config(e)
}

fn protocol_err(e: anyhow::Error) -> Failure {
    Failure::Protocol(e)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let default_level = match cli.command {
        Command::Serve { .. } => "info",
        _ => "warn",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(default_level))
        .init();

    let outcome = match cli.command {
        Command::Keygen { bits, out, force } => cmd_keygen(bits, &out, force).map(|()| 0),
        Command::Serve {
            policy,
            key_pub,
            listen,
            buckets,
        } => cmd_serve(&policy, &key_pub, &listen, buckets).map(|()| 0),
        Command::Client {
            prefs,
            key,
            connect,
            json,
        } => cmd_client(&prefs, &key, &connect, json),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {:#}", failure.error());
            ExitCode::from(failure.exit_code())
        }
    }
}

fn timeout_from_env() -> Result<Duration> {
    match std::env::var(TIMEOUT_ENV) {
        Ok(v) => {
            let secs: u64 = v
                .trim()
                .parse()
                .with_context(|| format!("{TIMEOUT_ENV}={v:?} is not a whole number of seconds"))?;
            if secs == 0 {
                bail!("{TIMEOUT_ENV} must be positive");
            }
            Ok(Duration::from_secs(secs))
        }
        Err(std::env::VarError::NotPresent) => Ok(DEFAULT_TIMEOUT),
        Err(e) => Err(anyhow!("{TIMEOUT_ENV}: {e}")),
    }
}

fn pub_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".pub");
    PathBuf::from(name)
}

fn write_file(path: &Path, text: &str, force: bool, private: bool) -> Result<()> {
    let mut opts = OpenOptions::new();
    opts.write(true);
    if force {
        opts.create(true).truncate(true);
    } else {
        opts.create_new(true);
    }
    #[cfg(unix)]
    if private {
        use std::os::unix::fs::OpenOptionsExt;
        opts.mode(0o600);
    }
    #[cfg(not(unix))]
    let _ = private;
    let mut f = opts.open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::AlreadyExists {
            anyhow!("{} exists; pass --force to overwrite", path.display())
        } else {
            anyhow!("writing {}: {e}", path.display())
        }
    })?;
    f.write_all(text.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}

fn cmd_keygen(bits: u64, out: &Path, force: bool) -> Result<(), Failure> {
    if bits < MIN_KEY_BITS {
        return Err(config_err(anyhow!(
            "--bits {bits} is below the minimum of {MIN_KEY_BITS}"
        )));
    }
    let public_out = pub_path(out);
    if !force {
        for p in [out, public_out.as_path()] {
            if p.exists() {
                return Err(config_err(anyhow!(
                    "{} exists; pass --force to overwrite",
                    p.display()
                )));
            }
        }
    }
    let kp = keygen(bits, &mut OsRng).map_err(|e| config_err(e.into()))?;
    write_file(out, &kp.to_json(), force, true).map_err(config_err)?;
    write_file(&public_out, &kp.public.to_json(), force, false).map_err(config_err)?;
    println!(
        "wrote {} and {} ({}-bit modulus)",
        out.display(),
        public_out.display(),
        kp.public.bits()
    );
    Ok(())
}

fn read_public_key(path: &Path) -> Result<PublicKey> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    PublicKey::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn read_keypair(path: &Path) -> Result<Keypair> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Keypair::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn cmd_serve(policy: &Path, key_pub: &Path, listen: &str, buckets: Buckets) -> Result<(), Failure> {
    let cfg = config::load_server_config(policy).map_err(config_err)?;
    let pinned = read_public_key(key_pub).map_err(config_err)?;
    let timeout = timeout_from_env().map_err(config_err)?;
    // Fail before listening if this key cannot carry the policy's payloads.
    let check = ProtocolParams {
        guard_bits: cfg.params.guard_bits,
        encoding: cfg.encoding,
        payload: cfg.params.payload,
        bucketing: None,
    };
    MatchSetup::new(&pinned, &cfg.client_domain, &cfg.server_domain, check)
        .map_err(|e| config_err(anyhow!(e).context("policy does not fit the client key")))?;
    let session = ServerSessionConfig {
        client_domain: cfg.client_domain,
        server_domain: cfg.server_domain,
        guard_bits: cfg.params.guard_bits,
        encoding: cfg.encoding,
        payload: cfg.params.payload,
        allow_bucketing: matches!(buckets, Buckets::Auto),
        pinned_key: Some(pinned),
        max_options: DEFAULT_MAX_OPTIONS,
        timeout,
    };
    serve::serve(listen, cfg.policy, session).map_err(protocol_err)
}

/// Picks bucket parameters under which no bucket overflows.
fn choose_bucketing(cfg: &ClientConfig) -> Result<BucketParams> {
    let elements: Vec<_> = cfg
        .prefs
        .options()
        .iter()
        .map(|o| cfg.encoding.element(o))
        .collect();
    for _ in 0..BUCKET_ATTEMPTS {
        let params = BucketParams::auto_with_rng(cfg.prefs.len(), &mut OsRng);
        if bucketize(&elements, &params).is_ok() {
            return Ok(params);
        }
    }
    bail!("every bucket assignment overflowed after {BUCKET_ATTEMPTS} attempts; disable bucketing")
}

#[derive(Serialize)]
struct JsonOutput {
    agreements: Vec<NamedAgreement>,
}

fn cmd_client(prefs: &Path, key: &Path, connect: &str, json: bool) -> Result<u8, Failure> {
    let cfg = config::load_client_config(prefs).map_err(config_err)?;
    let keypair = read_keypair(key).map_err(config_err)?;
    let timeout = timeout_from_env().map_err(config_err)?;
    let bucketing = match cfg.params.bucketing {
        BucketMode::Off => None,
        BucketMode::Auto => Some(choose_bucketing(&cfg).map_err(config_err)?),
    };
    let params = ProtocolParams {
        guard_bits: cfg.params.guard_bits,
        encoding: cfg.encoding,
        payload: cfg.params.payload,
        bucketing,
    };
    MatchSetup::new(
        &keypair.public,
        &cfg.client_domain,
        &cfg.server_domain,
        params,
    )
    .map_err(|e| config_err(anyhow!(e).context("preferences do not fit the key")))?;

    let mut stream = connect_with_timeout(connect, timeout).map_err(protocol_err)?;
    let session = ClientSessionConfig {
        client_domain: cfg.client_domain.clone(),
        server_domain: cfg.server_domain.clone(),
        params,
        timeout,
    };
    let outcome = run_client_session(&mut stream, &cfg.prefs, &keypair, &session, &mut OsRng)
        .map_err(|e| protocol_err(anyhow!(e).context("session failed")))?;
    let named = outcome
        .result
        .named(&cfg.client_domain, &cfg.server_domain)
        .map_err(|e| protocol_err(e.into()))?;

    if json {
        let text = serde_json::to_string_pretty(&JsonOutput {
            agreements: named.clone(),
        })
        .expect("agreements serialize");
        println!("{text}");
    } else if named.is_empty() {
        println!("no agreements");
    } else {
        for a in &named {
            if params.payload {
                println!(
                    "agreement: show [{}], server discloses [{}]",
                    a.client_option.join(", "),
                    a.server_disclosure.join(", ")
                );
            } else {
                println!("agreement: show [{}]", a.client_option.join(", "));
            }
        }
    }
    Ok(if named.is_empty() { 3 } else { 0 })
}

fn connect_with_timeout(addr: &str, timeout: Duration) -> Result<TcpStream> {
    let addrs: Vec<_> = addr
        .to_socket_addrs()
        .with_context(|| format!("resolving {addr}"))?
        .collect();
    let mut last = None;
    for a in addrs {
        match TcpStream::connect_timeout(&a, timeout) {
            Ok(s) => return Ok(s),
            Err(e) => last = Some(e),
        }
    }
    match last {
        Some(e) => Err(anyhow!(e).context(format!("connecting to {addr}"))),
        None => bail!("{addr} resolved to no addresses"),
    }
}
