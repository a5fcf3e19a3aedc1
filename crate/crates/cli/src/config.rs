//! Flags and key=value files merged into one validated configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use polyq::checks::Scale;
use polyq::exact::DEFAULT_BUDGET;
use polyq::mcmc::{BurnIn, Init, RunConfig};
use polyq::ChargeLaw;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad(key: &str, msg: impl fmt::Display) -> ConfigError {
    ConfigError(format!("`{key}`: {msg}"))
}

#[derive(Parser, Debug)]
#[command(name = "polyq", version = env!("POLYQ_VERSION"), about = "Charged-polymer experiments")]
#[command(allow_negative_numbers = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Opts,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Exact enumeration of the Gibbs measure.
    Enumerate,
    /// Metropolis estimates at one β.
    Mcmc,
    /// Free energy and event frequencies along a β grid.
    SweepBeta,
    /// Maximal energy: closed form, folding trajectory, optional brute force.
    MaxEnergy,
    /// Local-time rate function I(ε).
    RateFn,
    /// Tilted walk, tilted partition function and β_c(λ) bounds.
    Pulling,
    /// The acceptance checks.
    Selftest,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Enumerate => "enumerate",
            Command::Mcmc => "mcmc",
            Command::SweepBeta => "sweep-beta",
            Command::MaxEnergy => "max-energy",
            Command::RateFn => "rate-fn",
            Command::Pulling => "pulling",
            Command::Selftest => "selftest",
        }
    }

    /// Subcommands whose output depends on random charges or sampling.
    pub fn needs_seed(self) -> bool {
        !matches!(self, Command::RateFn | Command::Selftest)
    }
}

/// Every key is accepted both as `--key value` and as `key = value` in the
/// file given by `--config`; flags win.
#[derive(Args, Debug, Default)]
pub struct Opts {
    /// key=value file; `#` starts a comment.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Lattice dimension (1..=4).
    #[arg(long, global = true)]
    pub d: Option<String>,
    /// Number of monomers.
    #[arg(long, global = true)]
    pub n: Option<String>,
    #[arg(long, global = true)]
    pub beta: Option<String>,
    /// rademacher, gaussian, uniform or discrete:v1,v2,...;p1,p2,...
    #[arg(long, global = true)]
    pub charges: Option<String>,
    /// Root seed for charges and chains.
    #[arg(long, global = true)]
    pub seed: Option<String>,
    /// Pulling force, comma separated.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub pull: Option<String>,
    /// Force increment for the Lipschitz bound, comma separated.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub mu: Option<String>,
    /// β_c(λ) estimate used by the Lipschitz bound.
    #[arg(long = "beta-c", global = true)]
    pub beta_c: Option<String>,
    /// Independent charge vectors.
    #[arg(long, global = true)]
    pub replicas: Option<String>,
    #[arg(long, global = true)]
    pub sweeps: Option<String>,
    /// `auto` or a number of sweeps.
    #[arg(long = "burn-in", global = true)]
    pub burn_in: Option<String>,
    #[arg(long, global = true)]
    pub chains: Option<String>,
    /// Probability of a window move per sweep.
    #[arg(long = "window-rate", global = true)]
    pub window_rate: Option<String>,
    /// hot or cold.
    #[arg(long, global = true)]
    pub init: Option<String>,
    #[arg(long, global = true)]
    pub alpha: Option<String>,
    /// energy, lstar, diameter, s_alpha, c_alpha, r_alpha, end.
    #[arg(long, global = true)]
    pub observables: Option<String>,
    /// Grid start (β or ε).
    #[arg(long, global = true)]
    pub from: Option<String>,
    /// Grid end (β or ε).
    #[arg(long, global = true)]
    pub to: Option<String>,
    /// Grid intervals.
    #[arg(long, global = true)]
    pub steps: Option<String>,
    /// exact or mcmc (max-energy: formula or exact).
    #[arg(long, global = true)]
    pub method: Option<String>,
    /// Integration points for the sampled tilted partition function.
    #[arg(long, global = true)]
    pub grid: Option<String>,
    /// Maximal number of enumerated paths.
    #[arg(long, global = true)]
    pub budget: Option<String>,
    /// csv or json.
    #[arg(long, global = true)]
    pub format: Option<String>,
    #[arg(long, global = true)]
    pub output: Option<String>,
    /// full or quick.
    #[arg(long, global = true)]
    pub scale: Option<String>,
    /// Selftest ids, comma separated.
    #[arg(long, global = true)]
    pub checks: Option<String>,
    /// Write a gnuplot script next to the CSV output.
    #[arg(long = "emit-gnuplot", global = true)]
    pub emit_gnuplot: bool,
    /// Exit 4 when a chain looks unconverged.
    #[arg(long, global = true)]
    pub strict: bool,
}

impl Opts {
    fn pairs(&self) -> Vec<(&'static str, Option<String>)> {
        let flag = |b: bool| b.then(|| "true".to_string());
        vec![
            ("d", self.d.clone()),
            ("n", self.n.clone()),
            ("beta", self.beta.clone()),
            ("charges", self.charges.clone()),
            ("seed", self.seed.clone()),
            ("pull", self.pull.clone()),
            ("mu", self.mu.clone()),
            ("beta-c", self.beta_c.clone()),
            ("replicas", self.replicas.clone()),
            ("sweeps", self.sweeps.clone()),
            ("burn-in", self.burn_in.clone()),
            ("chains", self.chains.clone()),
            ("window-rate", self.window_rate.clone()),
            ("init", self.init.clone()),
            ("alpha", self.alpha.clone()),
            ("observables", self.observables.clone()),
            ("from", self.from.clone()),
            ("to", self.to.clone()),
            ("steps", self.steps.clone()),
            ("method", self.method.clone()),
            ("grid", self.grid.clone()),
            ("budget", self.budget.clone()),
            ("format", self.format.clone()),
            ("output", self.output.clone()),
            ("scale", self.scale.clone()),
            ("checks", self.checks.clone()),
            ("emit-gnuplot", flag(self.emit_gnuplot)),
            ("strict", flag(self.strict)),
        ]
    }
}

pub fn known_keys() -> Vec<&'static str> {
    Opts::default().pairs().into_iter().map(|(k, _)| k).collect()
}

/// Reads `key = value` lines. Keys may use `_` for `-`.
pub fn parse_file(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let known = known_keys();
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("line {}: expected key = value", i + 1)))?;
        let k = k.trim().replace('_', "-");
        if !known.contains(&k.as_str()) {
            return Err(ConfigError(format!("line {}: unknown key `{k}`", i + 1)));
        }
        if out.insert(k.clone(), v.trim().to_string()).is_some() {
            return Err(ConfigError(format!("line {}: duplicate key `{k}`", i + 1)));
        }
    }
    Ok(out)
}

/// File values overlaid by flags; each override is logged.
pub fn merge(file: BTreeMap<String, String>, opts: &Opts) -> BTreeMap<String, String> {
    let mut m = file;
    for (k, v) in opts.pairs() {
        if let Some(v) = v {
            if let Some(old) = m.get(k) {
                if *old != v {
                    info!("flag --{k}={v} overrides config value {old}");
                }
            }
            m.insert(k.to_string(), v);
        }
    }
    m
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Obs {
    Energy,
    Lstar,
    Diameter,
    SAlpha,
    CAlpha,
    RAlpha,
    End,
}

impl Obs {
    fn parse(s: &str) -> Option<Obs> {
        Some(match s.trim() {
            "energy" => Obs::Energy,
            "lstar" => Obs::Lstar,
            "diameter" => Obs::Diameter,
            "s_alpha" => Obs::SAlpha,
            "c_alpha" => Obs::CAlpha,
            "r_alpha" => Obs::RAlpha,
            "end" => Obs::End,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub from: f64,
    pub to: f64,
    pub steps: usize,
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        (0..=self.steps)
            .map(|k| self.from + (self.to - self.from) * k as f64 / self.steps as f64)
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub command: Command,
    pub d: usize,
    pub n: usize,
    pub beta: f64,
    pub law: ChargeLaw,
    pub seed: Option<u64>,
    pub pull: Vec<f64>,
    pub mu: Vec<f64>,
    pub beta_c: Option<f64>,
    pub replicas: usize,
    pub run: RunConfig,
    pub alpha: f64,
    pub observables: Vec<Obs>,
    pub grid: Option<Grid>,
    pub method: Option<String>,
    pub grid_points: usize,
    pub budget: u64,
    pub format: Format,
    pub output: Option<PathBuf>,
    pub scale: Scale,
    pub checks: Vec<u8>,
    pub emit_gnuplot: bool,
    pub strict: bool,
}

struct Reader(BTreeMap<String, String>);

impl Reader {
    fn raw(&self, k: &str) -> Option<&str> {
        self.0.get(k).map(|s| s.as_str())
    }

    fn get<T: std::str::FromStr>(&self, k: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        self.raw(k)
            .map(|v| v.parse::<T>().map_err(|e| bad(k, format!("cannot parse `{v}`: {e}"))))
            .transpose()
    }

    fn list(&self, k: &str) -> Result<Vec<f64>, ConfigError> {
        match self.raw(k) {
            None => Ok(Vec::new()),
            Some(v) => v
                .split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|e| bad(k, format!("`{x}`: {e}"))))
                .collect(),
        }
    }

    fn flag(&self, k: &str) -> Result<bool, ConfigError> {
        Ok(self.get::<bool>(k)?.unwrap_or(false))
    }
}

fn positive<T: PartialOrd + Default + fmt::Display>(k: &str, v: T) -> Result<T, ConfigError> {
    if v > T::default() {
        Ok(v)
    } else {
        Err(bad(k, format!("must be positive, got {v}")))
    }
}

fn finite(k: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad(k, "must be finite"))
    }
}

impl ExperimentConfig {
    pub fn from_cli(cli: &Cli) -> Result<ExperimentConfig, ConfigError> {
        let file = match &cli.opts.config {
            Some(p) => parse_file(&read(p)?)?,
            None => BTreeMap::new(),
        };
        Self::from_map(cli.command, merge(file, &cli.opts))
    }

    pub fn from_map(command: Command, map: BTreeMap<String, String>) -> Result<ExperimentConfig, ConfigError> {
        let r = Reader(map);
        let d = positive("d", r.get("d")?.unwrap_or(2usize))?;
        if d > 4 {
            return Err(bad("d", "supported dimensions are 1..=4"));
        }
        let law = match r.raw("charges") {
            Some(s) => s.parse::<ChargeLaw>().map_err(|e| bad("charges", e))?,
            None => ChargeLaw::Rademacher,
        };
        let seed = r.get::<u64>("seed")?;
        if seed.is_none() && command.needs_seed() {
            return Err(bad("seed", format!("`{}` needs an explicit --seed", command.name())));
        }
        let pull = r.list("pull")?;
        let mu = r.list("mu")?;
        for (k, v) in [("pull", &pull), ("mu", &mu)] {
            if !v.is_empty() && v.len() != d {
                return Err(bad(k, format!("expected {d} components, got {}", v.len())));
            }
            for &x in v {
                finite(k, x)?;
            }
        }
        if command == Command::Pulling && pull.is_empty() {
            return Err(bad("pull", "`pulling` needs --pull"));
        }
        let burn_in = match r.raw("burn-in") {
            None | Some("auto") => BurnIn::Auto,
            Some(v) => BurnIn::Sweeps(v.parse().map_err(|e| bad("burn-in", format!("`{v}`: {e}")))?),
        };
        let init = match r.raw("init") {
            None | Some("hot") => Init::Hot,
            Some("cold") => Init::Cold,
            Some(v) => return Err(bad("init", format!("expected hot or cold, got `{v}`"))),
        };
        let window_rate = r.get::<f64>("window-rate")?.unwrap_or(0.0);
        if !(0.0..=1.0).contains(&window_rate) {
            return Err(bad("window-rate", "must lie in [0, 1]"));
        }
        let run = RunConfig {
            sweeps: positive("sweeps", r.get("sweeps")?.unwrap_or(10_000usize))?,
            burn_in,
            init,
            window_rate,
            chains: positive("chains", r.get("chains")?.unwrap_or(1usize))?,
        };
        let alpha = r.get::<f64>("alpha")?.unwrap_or(0.25);
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(bad("alpha", "must lie in (0, 1)"));
        }
        let observables = match r.raw("observables") {
            None => vec![Obs::Energy, Obs::Lstar, Obs::Diameter, Obs::SAlpha],
            Some(v) => v
                .split(',')
                .map(|s| Obs::parse(s).ok_or_else(|| bad("observables", format!("unknown observable `{}`", s.trim()))))
                .collect::<Result<_, _>>()?,
        };
        let grid = grid(command, &r)?;
        let method = r.raw("method").map(str::to_string);
        let allowed: &[&str] = match command {
            Command::SweepBeta | Command::Pulling => &["exact", "mcmc"],
            Command::MaxEnergy => &["formula", "exact"],
            _ => &[],
        };
        if let Some(m) = &method {
            if !allowed.contains(&m.as_str()) {
                return Err(bad("method", format!("`{m}` is not one of {allowed:?} for {}", command.name())));
            }
        }
        if command == Command::Pulling && grid.is_some() && method.as_deref() != Some("mcmc") {
            return Err(bad("to", "a beta_c scan needs --method mcmc"));
        }
        let format = match r.raw("format") {
            None | Some("csv") => Format::Csv,
            Some("json") => Format::Json,
            Some(v) => return Err(bad("format", format!("expected csv or json, got `{v}`"))),
        };
        let scale = match r.raw("scale") {
            None | Some("full") => Scale::Full,
            Some("quick") => Scale::Quick,
            Some(v) => return Err(bad("scale", format!("expected full or quick, got `{v}`"))),
        };
        let checks = match r.raw("checks") {
            None => (1..=12).collect(),
            Some(v) => v
                .split(',')
                .map(|x| match x.trim().parse::<u8>() {
                    Ok(id) if (1..=12).contains(&id) => Ok(id),
                    _ => Err(bad("checks", format!("`{x}` is not a check id in 1..=12"))),
                })
                .collect::<Result<_, _>>()?,
        };
        let output = r.raw("output").map(PathBuf::from);
        let emit_gnuplot = r.flag("emit-gnuplot")?;
        if emit_gnuplot {
            if !matches!(command, Command::SweepBeta | Command::RateFn) {
                return Err(bad("emit-gnuplot", "only sweep-beta and rate-fn have a plot"));
            }
            if output.is_none() || format != Format::Csv {
                return Err(bad("emit-gnuplot", "needs --output and CSV format"));
            }
        }
        Ok(ExperimentConfig {
            command,
            d,
            n: positive("n", r.get("n")?.unwrap_or(8usize))?,
            beta: finite("beta", r.get("beta")?.unwrap_or(1.0))?,
            law,
            seed,
            pull,
            mu,
            beta_c: r.get::<f64>("beta-c")?.map(|b| positive("beta-c", b)).transpose()?,
            replicas: positive("replicas", r.get("replicas")?.unwrap_or(1usize))?,
            run,
            alpha,
            observables,
            grid,
            method,
            grid_points: positive("grid", r.get("grid")?.unwrap_or(17usize))?,
            budget: positive("budget", r.get("budget")?.unwrap_or(DEFAULT_BUDGET))?,
            format,
            output,
            scale,
            checks,
            emit_gnuplot,
            strict: r.flag("strict")?,
        })
    }

    pub fn method_is(&self, m: &str) -> bool {
        self.method.as_deref() == Some(m)
    }
}

/// β grid for sweep-beta and pulling scans, ε grid for rate-fn.
fn grid(command: Command, r: &Reader) -> Result<Option<Grid>, ConfigError> {
    let (from, to, steps) = match command {
        Command::SweepBeta => (0.0, 8.0, 32),
        Command::RateFn => (0.02, 0.48, 23),
        Command::Pulling if r.raw("to").is_some() => (0.0, 0.0, 16),
        _ => return Ok(None),
    };
    let g = Grid {
        from: finite("from", r.get("from")?.unwrap_or(from))?,
        to: finite("to", r.get("to")?.unwrap_or(to))?,
        steps: positive("steps", r.get("steps")?.unwrap_or(steps))?,
    };
    if g.to <= g.from {
        return Err(bad("to", format!("must exceed from ({} <= {})", g.to, g.from)));
    }
    if command != Command::RateFn && g.from < 0.0 {
        return Err(bad("from", "β grids start at a nonnegative value"));
    }
    if command == Command::RateFn && !(g.from > 0.0 && g.to < 0.5) {
        return Err(bad("from", "ε grid must lie inside (0, 1/2)"));
    }
    Ok(Some(g))
}

fn read(p: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(p).map_err(|e| bad("config", format!("{}: {e}", p.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(kv: &[(&str, &str)]) -> BTreeMap<String, String> {
        kv.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn file_parsing() {
        let m = parse_file("# comment\nd = 3\n\nburn_in=auto  # trailing\n").unwrap();
        assert_eq!(m["d"], "3");
        assert_eq!(m["burn-in"], "auto");
        let e = parse_file("temperature = 3").unwrap_err();
        assert!(e.0.contains("temperature"));
        assert!(parse_file("d 3").is_err());
        assert!(parse_file("d=1\nd=2").is_err());
    }

    #[test]
    fn flags_override_file() {
        let opts = Opts {
            beta: Some("2".into()),
            ..Default::default()
        };
        let m = merge(map(&[("beta", "1"), ("n", "6")]), &opts);
        assert_eq!(m["beta"], "2");
        assert_eq!(m["n"], "6");
    }

    #[test]
    fn seed_is_required_for_sampling() {
        let e = ExperimentConfig::from_map(Command::Mcmc, map(&[("n", "6")])).unwrap_err();
        assert!(e.0.contains("seed"));
        assert!(ExperimentConfig::from_map(Command::RateFn, map(&[])).is_ok());
    }

    #[test]
    fn malformed_values_name_the_key() {
        for (k, v) in [("n", "eight"), ("n", "0"), ("pull", "1,x"), ("window-rate", "2"), ("init", "warm")] {
            let e = ExperimentConfig::from_map(Command::Mcmc, map(&[("seed", "1"), (k, v)])).unwrap_err();
            assert!(e.0.contains(k), "{k}: {}", e.0);
        }
    }

    #[test]
    fn every_key_is_known() {
        let keys = known_keys();
        assert_eq!(keys.len(), 28);
        let mut sorted = keys.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), keys.len());
    }
}
