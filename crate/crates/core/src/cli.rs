//! Command-line front end. Structured output goes to stdout as JSON, logs to
//! stderr. Numbers are big-endian hex on both sides.
//!
//! Exit codes: 0 success, 1 domain failure (including an exhausted attack),
//! 2 usage error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, LevelFilter};
use num_bigint::BigUint;
use serde::Serialize;
use serde_json::{json, Value};

use crate::attack::{run_attack, AttackInput};
use crate::campaign::{run_campaign, write_outputs, CampaignConfig};
use crate::codec::{bytes_from_hex, bytes_to_hex, from_hex, to_hex};
use crate::error::{Error, Result};
use crate::factor::{factorize_seeded, FactorBudget, DEFAULT_RHO_SEED};
use crate::faults::{candidate_moduli, FaultSpec};
use crate::ntheory::{seeded_rng, SeededRng};
use crate::protocols::{
    ramon_encrypt, ramon_encrypt_with_width, ramon_format, ramon_unblind, ramon_verify, scheme_keygen,
    wipr_encrypt, wipr_format, wipr_verify, Ciphertext, SchemeParams, Transcript,
};
use crate::rabin::{decrypt, encrypt, RabinKeyPair, Scheme};
use crate::sqroots::{all_roots_mod_capped, DEFAULT_ROOT_CAP};

#[derive(Debug, Parser)]
#[command(name = "crashmod", version, about = "Crashing-modulus fault attack workbench")]
struct Cli {
    /// RNG seed; drawn from the OS when omitted and echoed in the output.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SchemeArg {
    Wipr,
    Ramon,
    Raw,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Wipr => Scheme::Wipr,
            SchemeArg::Ramon => Scheme::Ramon,
            SchemeArg::Raw => Scheme::Raw,
        }
    }
}

#[derive(Debug, Args)]
struct BudgetArgs {
    /// Wall-clock limit per factorisation in milliseconds (unlimited if absent).
    #[arg(long)]
    budget_ms: Option<u64>,
    /// Operation limit per factorisation.
    #[arg(long)]
    budget_ops: Option<u64>,
}

impl BudgetArgs {
    fn budget(&self) -> FactorBudget {
        let mut b = match self.budget_ms {
            Some(ms) => FactorBudget::from_millis(ms),
            None => FactorBudget::unlimited(),
        };
        b.op_limit = self.budget_ops;
        b
    }
}

#[derive(Debug, Args)]
struct FaultArgs {
    /// Crash byte `i` (little-endian index) of the modulus.
    #[arg(long, requires = "fault_pattern", conflicts_with = "skip")]
    fault_byte: Option<usize>,
    /// XOR pattern for the crashed byte (hex, 01..ff).
    #[arg(long, requires = "fault_byte")]
    fault_pattern: Option<String>,
    /// Instruction-skip fault: the modulus loses its top byte.
    #[arg(long)]
    skip: bool,
}

impl FaultArgs {
    fn spec(&self) -> Result<Option<FaultSpec>> {
        if self.skip {
            return Ok(Some(FaultSpec::instruction_skip()));
        }
        match (self.fault_byte, &self.fault_pattern) {
            (Some(i), Some(k)) => Ok(Some(FaultSpec::byte_crash(i, parse_byte(k)?))),
            _ => Ok(None),
        }
    }
}

#[derive(Debug, Args)]
struct SessionArgs {
    /// Keypair JSON as written by `keygen`.
    #[arg(long)]
    key: PathBuf,
    /// Reader challenge (hex bytes); random when absent.
    #[arg(long)]
    challenge: Option<String>,
    /// Tag UID (hex bytes); random when absent.
    #[arg(long)]
    uid: Option<String>,
    #[command(flatten)]
    fault: FaultArgs,
    #[command(flatten)]
    budget: BudgetArgs,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a keypair (RAMON keys satisfy N = 1 mod 2^(n/2)).
    Keygen {
        #[arg(long)]
        bits: u64,
        #[arg(long, value_enum, default_value = "raw")]
        scheme: SchemeArg,
    },
    /// Encrypt M: M^2 mod N (RAW) or M^2 R^-1 mod N (RAMON).
    Encrypt {
        #[arg(long)]
        m: String,
        #[arg(long)]
        modulus: String,
        #[arg(long, value_enum, default_value = "raw")]
        scheme: SchemeArg,
    },
    /// All square roots of a ciphertext under a keypair.
    Decrypt {
        #[arg(long)]
        c: String,
        #[arg(long)]
        key: PathBuf,
        #[arg(long, value_enum, default_value = "raw")]
        scheme: SchemeArg,
    },
    /// Simulate one WIPR exchange, optionally with a faulted tag.
    Wipr(SessionArgs),
    /// Simulate one RAMON exchange, optionally with a faulted tag.
    Ramon(SessionArgs),
    /// Apply a fault to a modulus and list the attacker's candidates.
    Fault {
        #[arg(long)]
        modulus: String,
        #[command(flatten)]
        fault: FaultArgs,
        /// Also print the candidate moduli.
        #[arg(long)]
        candidates: bool,
    },
    /// Factor a (hex) natural under a budget.
    Factor {
        n: String,
        #[command(flatten)]
        budget: BudgetArgs,
    },
    /// All square roots of C modulo an odd modulus.
    Roots {
        #[arg(long)]
        c: String,
        #[arg(long)]
        modulus: String,
        #[arg(long, default_value_t = DEFAULT_ROOT_CAP)]
        cap: usize,
    },
    /// Run the attack described by a JSON input file.
    Attack {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        parallelism: Option<usize>,
    },
    /// Run a Monte-Carlo campaign and write stats.json, trials.csv and histograms.
    Campaign {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        parallelism: Option<usize>,
    },
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    init_logging(cli.verbose);
    let seed = cli.seed.unwrap_or_else(rand::random);
    match run(&cli.command, seed, cli.seed.is_some()) {
        Ok((value, code)) => {
            println!("{}", serde_json::to_string_pretty(&value).expect("JSON values serialize"));
            code
        }
        Err(e) => {
            eprintln!("error: {e}");
            println!("{}", json!({"seed": seed, "error": e.to_string()}));
            1
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => LevelFilter::Warn,
        1 => LevelFilter::Info,
        _ => LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .target(env_logger::Target::Stderr)
        .try_init();
}

fn parse_byte(s: &str) -> Result<u8> {
    let v = from_hex(s)?;
    u8::try_from(&v).map_err(|_| Error::Range(format!("{s} is not a byte")))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn read_key(path: &Path) -> Result<RabinKeyPair> {
    let key: RabinKeyPair = read_json(path)?;
    key.validate()?;
    Ok(key)
}

fn with_seed(seed: u64, value: impl Serialize) -> Result<Value> {
    let mut v = serde_json::to_value(value).map_err(|e| Error::Format(e.to_string()))?;
    match &mut v {
        Value::Object(map) => {
            map.insert("seed".into(), json!(seed));
            Ok(v)
        }
        _ => Ok(json!({"seed": seed, "result": v})),
    }
}

fn bytes_or_random(arg: &Option<String>, len: usize, rng: &mut SeededRng) -> Result<Vec<u8>> {
    match arg {
        Some(h) => bytes_from_hex(h),
        None => {
            let mut v = vec![0u8; len];
            rand::RngCore::fill_bytes(rng, &mut v);
            Ok(v)
        }
    }
}

/// `explicit_seed` is set when `--seed` was given; it then also overrides a
/// campaign's `master_seed`.
fn run(cmd: &Command, seed: u64, explicit_seed: bool) -> Result<(Value, i32)> {
    let mut rng = seeded_rng(seed);
    match cmd {
        Command::Keygen { bits, scheme } => {
            let key = scheme_keygen((*scheme).into(), *bits, &mut rng)?;
            Ok((with_seed(seed, key)?, 0))
        }
        Command::Encrypt { m, modulus, scheme } => {
            let (m, n) = (from_hex(m)?, from_hex(modulus)?);
            let ct = match Scheme::from(*scheme) {
                Scheme::Ramon => ramon_encrypt(&m, &n)?,
                Scheme::Raw => Ciphertext {
                    scheme: Scheme::Raw,
                    value: encrypt(&m, &n)?,
                },
                Scheme::Wipr => {
                    return Err(Error::Precondition("use the `wipr` subcommand for WIPR responses".into()))
                }
            };
            Ok((with_seed(seed, ct)?, 0))
        }
        Command::Decrypt { c, key, scheme } => {
            let key = read_key(key)?;
            let value = from_hex(c)?;
            let c = match Scheme::from(*scheme) {
                Scheme::Ramon => ramon_unblind(
                    &Ciphertext {
                        scheme: Scheme::Ramon,
                        value,
                    },
                    key.modulus(),
                )?,
                _ => value,
            };
            Ok((with_seed(seed, decrypt(&c, &key)?)?, 0))
        }
        Command::Wipr(args) => session(Scheme::Wipr, args, seed, &mut rng),
        Command::Ramon(args) => session(Scheme::Ramon, args, seed, &mut rng),
        Command::Fault {
            modulus,
            fault,
            candidates,
        } => {
            let n = from_hex(modulus)?;
            let spec = fault
                .spec()?
                .ok_or_else(|| Error::Precondition("give --fault-byte/--fault-pattern or --skip".into()))?;
            let mut out = json!({
                "seed": seed,
                "fault": spec,
                "modulus": to_hex(&n),
                "faulted": to_hex(&spec.apply(&n)?),
            });
            if *candidates {
                let list: Vec<String> = candidate_moduli(&n, &spec.attacker_view())?.iter().map(to_hex).collect();
                out["candidates"] = json!(list);
            }
            Ok((out, 0))
        }
        Command::Factor { n, budget } => {
            let n = from_hex(n)?;
            let outcome = factorize_seeded(&n, &budget.budget(), seed)?;
            let code = if outcome.is_complete() { 0 } else { 1 };
            Ok((with_seed(seed, outcome)?, code))
        }
        Command::Roots { c, modulus, cap } => {
            let (c, m) = (from_hex(c)?, from_hex(modulus)?);
            let fact = factorize_seeded(&m, &FactorBudget::unlimited(), DEFAULT_RHO_SEED)?
                .factorization
                .expect("unlimited budget completes");
            let roots = all_roots_mod_capped(&c, &fact, *cap)?;
            Ok((with_seed(seed, roots)?, 0))
        }
        Command::Attack { input, parallelism } => {
            let mut input: AttackInput = read_json(input)?;
            if let Some(p) = parallelism {
                input.parallelism = *p;
            }
            let outcome = run_attack(&input)?;
            for l in &outcome.transcript {
                info!(
                    "pattern {:3} factor {:?} omega {:?} eta {:?} roots {} -> {:?}",
                    l.pattern, l.factor_status, l.omega, l.eta, l.roots_tried, l.result
                );
            }
            let code = if outcome.is_recovered() { 0 } else { 1 };
            Ok((with_seed(seed, outcome)?, code))
        }
        Command::Campaign {
            config,
            out,
            parallelism,
        } => {
            let mut config: CampaignConfig = read_json(config)?;
            if let Some(p) = parallelism {
                config.parallelism = *p;
            }
            if explicit_seed {
                config.master_seed = seed;
            }
            let report = run_campaign(&config)?;
            write_outputs(out, &report)?;
            Ok((
                json!({
                    "seed": config.master_seed,
                    "out": out.display().to_string(),
                    "stats": report.stats,
                }),
                0,
            ))
        }
    }
}

fn session(scheme: Scheme, args: &SessionArgs, seed: u64, rng: &mut SeededRng) -> Result<(Value, i32)> {
    let key = read_key(&args.key)?;
    let n = key.modulus();
    let params = SchemeParams::scaled(scheme, key.n_bits)?;
    let fault = args.fault.spec()?;
    let tag_modulus: BigUint = match &fault {
        Some(f) => f.apply(n)?,
        None => n.clone(),
    };
    let challenge = bytes_or_random(&args.challenge, params.challenge_len(), rng)?;
    let (ct, planted) = match &params {
        SchemeParams::Wipr(p) => {
            let uid = bytes_or_random(&args.uid, p.uid_len(), rng)?;
            let msg = wipr_format(&challenge, &uid, p, rng)?;
            (wipr_encrypt(&msg, &tag_modulus, p, rng)?, msg)
        }
        SchemeParams::Ramon(p) => {
            let uid = bytes_or_random(&args.uid, p.uid_capacity().unwrap_or(0).min(8), rng)?;
            let msg = ramon_format(&challenge, &uid, rng, p)?;
            (
                ramon_encrypt_with_width(&msg.to_natural(), &tag_modulus, n.bits())?,
                msg.to_formatted(),
            )
        }
    };
    let verified = match &params {
        SchemeParams::Wipr(p) => wipr_verify(&ct, &key, &challenge, p),
        SchemeParams::Ramon(p) => ramon_verify(&ct, &key, &challenge, p),
    };
    let transcript = Transcript::new(&challenge, &ct, key.n_bits, Some(params));
    let mut out = json!({
        "seed": seed,
        "transcript": transcript,
        "planted": planted,
        "uid_hex": bytes_to_hex(&planted.uid),
    });
    match verified {
        Ok(m) => out["verified"] = json!(m),
        Err(e) => out["verify_error"] = json!(e.to_string()),
    }
    if let Some(f) = fault {
        out["fault"] = json!(f);
        out["attack_input"] = json!(AttackInput::new(
            ct,
            n.clone(),
            f,
            challenge,
            args.budget.budget(),
            params
        ));
    }
    Ok((out, 0))
}
