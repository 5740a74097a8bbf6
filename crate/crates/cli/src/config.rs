//! Run configuration: a plain-text key-value file plus flag overrides,
//! flags winning. Keys and flags share names, so an experiment record is a
//! trivially diffable text file.

use std::fmt;
use std::path::PathBuf;

use fep_core::model::SystemParams;

/// Initial macroscopic profile for simulation and PDE runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitProfile {
    Const(f64),
    /// `rho(u) = a + b u`.
    Linear { a: f64, b: f64 },
}

impl InitProfile {
    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            InitProfile::Const(v) => v,
            InitProfile::Linear { a, b } => a + b * u,
        }
    }

    fn parse(s: &str) -> Result<Self, UsageError> {
        if let Some(v) = s.strip_prefix("const:") {
            return Ok(InitProfile::Const(parse_num(v, "init")?));
        }
        if let Some(rest) = s.strip_prefix("linear:") {
            let parts: Vec<&str> = rest.split(',').collect();
            if parts.len() == 2 {
                return Ok(InitProfile::Linear {
                    a: parse_num(parts[0], "init")?,
                    b: parse_num(parts[1], "init")?,
                });
            }
        }
        Err(UsageError(format!("bad init profile '{s}' (use const:V or linear:A,B)")))
    }
}

impl fmt::Display for InitProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            InitProfile::Const(v) => write!(f, "const:{v}"),
            InitProfile::Linear { a, b } => write!(f, "linear:{a},{b}"),
        }
    }
}

/// Invalid command line or config file.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "usage error: {}", self.0)
    }
}

impl std::error::Error for UsageError {}

/// Everything a command needs, resolved from defaults, config file, and flags.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    pub theta: f64,
    pub kappa: f64,
    pub replicas: usize,
    pub seed: u64,
    pub checkpoints: Vec<f64>,
    pub out_dir: PathBuf,
    /// PDE grid nodes.
    pub m_grid: usize,
    pub init: InitProfile,
    /// Pass threshold for the hydro L1 comparison.
    pub l1_tol: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n: 128,
            alpha: 0.3,
            beta: 0.8,
            theta: 0.0,
            kappa: 1.0,
            replicas: 16,
            seed: 1,
            checkpoints: vec![0.05, 0.1],
            out_dir: PathBuf::from("out"),
            m_grid: 256,
            init: InitProfile::Linear { a: 0.6, b: 0.3 },
            l1_tol: 0.02,
        }
    }
}

impl RunConfig {
    pub fn params(&self) -> Result<SystemParams, UsageError> {
        SystemParams::new(self.n, self.alpha, self.beta, self.theta, self.kappa)
            .map_err(|e| UsageError(e.to_string()))
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<(), UsageError> {
        match key {
            "n" => self.n = parse_num::<usize>(value, key)?,
            "alpha" => self.alpha = parse_num(value, key)?,
            "beta" => self.beta = parse_num(value, key)?,
            "theta" => self.theta = parse_num(value, key)?,
            "kappa" => self.kappa = parse_num(value, key)?,
            "replicas" => self.replicas = parse_num(value, key)?,
            "seed" => self.seed = parse_num(value, key)?,
            "m" => self.m_grid = parse_num(value, key)?,
            "l1-tol" => self.l1_tol = parse_num(value, key)?,
            "t" => {
                self.checkpoints = value
                    .split(',')
                    .map(|s| parse_num::<f64>(s, key))
                    .collect::<Result<_, _>>()?;
                if self.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(UsageError("checkpoints must be strictly increasing".into()));
                }
            }
            "out" => self.out_dir = PathBuf::from(value),
            "init" => self.init = InitProfile::parse(value)?,
            _ => return Err(UsageError(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    fn load_file(&mut self, path: &str) -> Result<(), UsageError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config '{path}': {e}")))?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(UsageError(format!("{path}:{}: expected key=value", lineno + 1)));
            };
            self.apply(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Resolve from the argument list following the subcommand. The config
    /// file (if any) is applied first, then every flag in order.
    pub fn from_args(args: &[String]) -> Result<Self, UsageError> {
        let mut cfg = RunConfig::default();
        // config file first, flags win
        let mut i = 0;
        while i < args.len() {
            if args[i] == "--config" {
                let path = args.get(i + 1).ok_or_else(|| flag_needs_value("config"))?;
                cfg.load_file(path)?;
            }
            i += 1;
        }
        let mut i = 0;
        while i < args.len() {
            let arg = &args[i];
            let Some(key) = arg.strip_prefix("--") else {
                return Err(UsageError(format!("unexpected argument '{arg}'")));
            };
            let value = args.get(i + 1).ok_or_else(|| flag_needs_value(key))?;
            if key != "config" {
                cfg.apply(key, value)?;
            }
            i += 2;
        }
        Ok(cfg)
    }
}

fn flag_needs_value(key: &str) -> UsageError {
    UsageError(format!("flag --{key} needs a value"))
}

fn parse_num<T: std::str::FromStr>(s: &str, key: &str) -> Result<T, UsageError> {
    s.trim().parse().map_err(|_| UsageError(format!("bad value '{s}' for {key}")))
}
