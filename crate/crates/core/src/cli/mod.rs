//! The `finr` command line.
//!
//! ```text
//! finr fit-image|fit-sdf|fit-pinn|bench|eval --config <path> --out <dir>
//!      [--seed N] [--threads N] [--f64]
//! ```
//!
//! Every run writes `manifest.txt` into `--out`; training commands add
//! `metrics.csv`, `timing.csv` and `checkpoint.finr`. Config keys are listed
//! in [`commands`].

pub mod commands;
pub mod config;
pub mod render;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

pub use config::Config;

use crate::error::{Error, Result};

pub const THREADS_ENV: &str = "FINR_THREADS";
pub const ENGINE_VERSION: &str = concat!("finr-v", env!("CARGO_PKG_VERSION"));

pub const USAGE: &str = "usage: finr <fit-image|fit-sdf|fit-pinn|bench|eval> --config <path> --out <dir> \
[--seed N] [--threads N] [--f64]

exit codes: 0 ok, 2 config error, 3 capability error, 4 numeric failure
FINR_THREADS is read when --threads is absent.";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    FitImage,
    FitSdf,
    FitPinn,
    Bench,
    Eval,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::FitImage => "fit-image",
            Self::FitSdf => "fit-sdf",
            Self::FitPinn => "fit-pinn",
            Self::Bench => "bench",
            Self::Eval => "eval",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "fit-image" => Self::FitImage,
            "fit-sdf" => Self::FitSdf,
            "fit-pinn" => Self::FitPinn,
            "bench" => Self::Bench,
            "eval" => Self::Eval,
            other => return Err(Error::Config(format!("unknown command `{other}`\n{USAGE}"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CliArgs {
    pub command: Command,
    pub config: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub f64: bool,
}

impl CliArgs {
    pub fn parse<I, S>(args: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut it = args.into_iter().map(Into::into);
        let command: Command = it
            .next()
            .ok_or_else(|| Error::Config(format!("missing command\n{USAGE}")))?
            .parse()?;
        let (mut config, mut out, mut seed, mut threads, mut f64) = (None, None, None, None, false);
        while let Some(flag) = it.next() {
            let mut value = |name: &str| it.next().ok_or_else(|| Error::Config(format!("{name} needs a value")));
            match flag.as_str() {
                "--config" => config = Some(PathBuf::from(value("--config")?)),
                "--out" => out = Some(PathBuf::from(value("--out")?)),
                "--seed" => {
                    let v = value("--seed")?;
                    seed = Some(v.parse().map_err(|_| Error::Config(format!("bad --seed `{v}`")))?);
                }
                "--threads" => {
                    let v = value("--threads")?;
                    threads = Some(parse_threads(&v)?);
                }
                "--f64" => f64 = true,
                other => return Err(Error::Config(format!("unknown argument `{other}`\n{USAGE}"))),
            }
        }
        Ok(Self {
            command,
            config: config.ok_or_else(|| Error::Config("--config is required".into()))?,
            out: out.ok_or_else(|| Error::Config("--out is required".into()))?,
            seed,
            threads,
            f64,
        })
    }

    /// `--threads`, else `FINR_THREADS`, else 1.
    pub fn requested_threads(&self) -> Result<usize> {
        if let Some(t) = self.threads {
            return Ok(t);
        }
        match std::env::var(THREADS_ENV) {
            Ok(v) if !v.trim().is_empty() => parse_threads(v.trim()),
            _ => Ok(1),
        }
    }
}

fn parse_threads(v: &str) -> Result<usize> {
    v.parse::<usize>()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| Error::Config(format!("thread count must be a positive integer, got `{v}`")))
}

/// What a run did, for humans and for reproduction.
#[derive(Clone, Debug, PartialEq)]
pub struct RunManifest {
    pub command: Command,
    pub engine_version: String,
    pub seed: u64,
    pub threads: usize,
    pub precision: &'static str,
    /// Canonical snapshot of the configuration actually used.
    pub config: String,
    /// Files written, relative to the output directory.
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "command = {}\nengine = {}\nseed = {}\nthreads = {}\nprecision = {}\noutputs = {}\n",
            self.command,
            self.engine_version,
            self.seed,
            self.threads,
            self.precision,
            self.outputs.join(", ")
        );
        s += "\n# configuration\n";
        s += &self.config;
        s
    }
}

/// Output of a finished command.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunSummary {
    /// `name = value` lines describing the result.
    pub lines: Vec<String>,
    pub warnings: Vec<String>,
}

/// Shared state of one command invocation.
pub struct RunContext {
    pub command: Command,
    pub config: Config,
    pub config_dir: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
    pub threads: usize,
    outputs: Vec<String>,
    pub summary: RunSummary,
}

impl RunContext {
    pub fn path(&mut self, name: &str) -> PathBuf {
        if !self.outputs.iter().any(|o| o == name) {
            self.outputs.push(name.to_string());
        }
        self.out.join(name)
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let p = self.path(name);
        std::fs::write(p, contents)?;
        Ok(())
    }

    /// Records a PNG and its FTNR twin.
    pub fn png(&mut self, name: &str, img: &crate::tensor::DenseTensor) -> Result<()> {
        let p = self.path(name);
        self.path(&Path::new(name).with_extension("ftnr").to_string_lossy());
        render::save_png(&p, img)
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        eprintln!("warning: {msg}");
        self.summary.warnings.push(msg);
    }

    pub fn report(&mut self, key: &str, value: impl fmt::Display) {
        self.summary.lines.push(format!("{key} = {value}"));
    }

    /// Resolves a path from the config relative to the config file.
    pub fn resolve(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.config_dir.join(p)
        }
    }
}

/// Runs one command end to end and writes its manifest.
pub fn run(args: &CliArgs) -> Result<RunSummary> {
    let mut config = Config::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.set("run", "seed", seed.to_string());
    }
    let threads = args.requested_threads()?;
    std::fs::create_dir_all(&args.out)?;
    let seed = config.get_or("run", "seed", 0u64)?;
    let mut ctx = RunContext {
        command: args.command,
        config,
        config_dir: args.config.parent().map(Path::to_path_buf).unwrap_or_default(),
        out: args.out.clone(),
        seed,
        threads,
        outputs: Vec::new(),
        summary: RunSummary::default(),
    };
    if threads > 1 {
        ctx.warn(format!("{threads} threads requested; the engine runs single-threaded"));
    }
    match args.command {
        Command::FitImage => commands::fit_image(&mut ctx)?,
        Command::FitSdf => commands::fit_sdf(&mut ctx)?,
        Command::FitPinn => commands::fit_pinn(&mut ctx)?,
        Command::Bench => commands::bench(&mut ctx)?,
        Command::Eval => commands::eval(&mut ctx)?,
    }
    ctx.path("manifest.txt");
    let manifest = RunManifest {
        command: ctx.command,
        engine_version: ENGINE_VERSION.into(),
        seed: ctx.seed,
        threads: 1,
        precision: "f64",
        config: ctx.config.to_text(),
        outputs: ctx.outputs.clone(),
    };
    std::fs::write(ctx.out.join("manifest.txt"), manifest.to_text())?;
    Ok(ctx.summary)
}
