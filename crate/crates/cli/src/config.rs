//! Run configuration: a flat `key = value` document with `#` comments, or a
//! JSON object with the same keys.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use gl_lab::{Covariance, EnsembleSpec, Family, LambdaRule, Method, Placement, SweepSpec};
use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer};

use crate::error::CliError;
use crate::format::fmt_g17;

/// Every key a configuration may contain.
pub const KEYS: &[&str] = &[
    "command",
    "family",
    "alpha",
    "p",
    "s",
    "K",
    "sigma",
    "covariance",
    "rho",
    "placement",
    "theta_grid",
    "theta",
    "n",
    "trials",
    "seed",
    "lambda_rule",
    "lambda",
    "method",
    "alphas",
    "with_lasso",
    "m",
    "d",
    "t",
    "tol",
    "max_iter",
    "x_path",
    "y_path",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Psi,
    Solve,
    Witness,
    Sweep,
    Theta50Scan,
    CheckAssumptions,
    TailCheck,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Psi,
        Command::Solve,
        Command::Witness,
        Command::Sweep,
        Command::Theta50Scan,
        Command::CheckAssumptions,
        Command::TailCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Psi => "psi",
            Command::Solve => "solve",
            Command::Witness => "witness",
            Command::Sweep => "sweep",
            Command::Theta50Scan => "theta50-scan",
            Command::CheckAssumptions => "check-assumptions",
            Command::TailCheck => "tail-check",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown command `{s}`"))
    }
}

/// Keys and raw string values in document order, with syntax and key names checked.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawConfig {
    entries: Vec<(String, String)>,
}

impl RawConfig {
    /// Parses either format; a document whose first non-blank character is `{` is JSON.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        if text.trim_start().starts_with('{') {
            Self::parse_json(text)
        } else {
            Self::parse_kv(text)
        }
    }

    pub fn parse_kv(text: &str) -> Result<Self, CliError> {
        let mut raw = RawConfig::default();
        for (lineno, line) in text.lines().enumerate() {
            let lineno = lineno + 1;
            let line = match line.find('#') {
                Some(i) => &line[..i],
                None => line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Parse(format!("line {lineno}: expected `key = value`, got `{line}`")))?;
            raw.insert(key.trim(), value.trim(), &format!("line {lineno}: "))?;
        }
        Ok(raw)
    }

    pub fn parse_json(text: &str) -> Result<Self, CliError> {
        let doc: StrictObject =
            serde_json::from_str(text).map_err(|e| CliError::Parse(format!("JSON config: {e}")))?;
        let mut raw = RawConfig::default();
        for (key, value) in doc.0 {
            let value = json_scalar(&key, &value)?;
            raw.insert(&key, &value, "")?;
        }
        Ok(raw)
    }

    fn insert(&mut self, key: &str, value: &str, at: &str) -> Result<(), CliError> {
        if !KEYS.contains(&key) {
            return Err(CliError::Parse(format!("{at}unknown key `{key}`")));
        }
        if self.get(key).is_some() {
            return Err(CliError::Parse(format!("{at}duplicate key `{key}`")));
        }
        self.entries.push((key.to_string(), value.to_string()));
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Sets `key`, replacing any previous value.
    pub fn set(&mut self, key: &str, value: &str) {
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value.to_string(),
            None => self.entries.push((key.to_string(), value.to_string())),
        }
    }
}

/// JSON object that rejects repeated keys instead of keeping the last one.
struct StrictObject(Vec<(String, serde_json::Value)>);

impl<'de> Deserialize<'de> for StrictObject {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = StrictObject;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a JSON object of configuration keys")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<StrictObject, A::Error> {
                let mut entries: Vec<(String, serde_json::Value)> = Vec::new();
                while let Some((key, value)) = map.next_entry::<String, serde_json::Value>()? {
                    if entries.iter().any(|(k, _)| *k == key) {
                        return Err(serde::de::Error::custom(format!("duplicate key `{key}`")));
                    }
                    entries.push((key, value));
                }
                Ok(StrictObject(entries))
            }
        }
        d.deserialize_map(V)
    }
}

fn json_scalar(key: &str, value: &serde_json::Value) -> Result<String, CliError> {
    use serde_json::Value;
    match value {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        Value::Bool(b) => Ok(b.to_string()),
        Value::Array(items) => items
            .iter()
            .map(|v| match v {
                Value::Number(n) => Ok(n.to_string()),
                Value::String(s) => Ok(s.clone()),
                _ => Err(CliError::Parse(format!("key `{key}`: list items must be numbers"))),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(|v| v.join(",")),
        _ => Err(CliError::Parse(format!("key `{key}`: expected a string, number, boolean or list"))),
    }
}

/// Fully typed and validated run configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub ensemble: EnsembleSpec,
    pub theta_grid: Vec<f64>,
    /// Rescaled sample size for single-instance commands.
    pub theta: f64,
    /// Explicit sample size; overrides `theta` when set.
    pub n: Option<usize>,
    pub trials: usize,
    pub seed: u64,
    pub lambda_rule: LambdaRule,
    pub method: Method,
    pub alphas: Vec<f64>,
    pub with_lasso: bool,
    pub m: usize,
    pub d: usize,
    pub t: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub x_path: Option<PathBuf>,
    pub y_path: Option<PathBuf>,
}

pub const DEFAULT_SWEEP_TRIALS: usize = 200;
pub const DEFAULT_TAIL_TRIALS: usize = 100_000;

/// Help text listing every key with its default.
pub const KEY_HELP: &str = "\
Configuration keys (flat `key = value` lines with `#` comments, or a JSON object):
  command       psi | solve | witness | sweep | theta50-scan | check-assumptions | tail-check
  family        identical | orthonormal | intermediate | b1_alpha      [identical]
  alpha         angle for b1_alpha                                     [0]
  p, s, K       dimension, support size, tasks                         [256, 16, 2]
  sigma         noise standard deviation                               [0.1]
  covariance    identity | toeplitz (needs rho)                        [identity]
  placement     first_s | random                                       [first_s]
  theta_grid    comma-separated increasing grid                        [0.25,0.5,...,2]
  theta, n      sample size for solve/witness/psi; n overrides theta   [theta = 2]
  trials        Monte Carlo trials                                     [200; tail-check 100000]
  seed          base seed                                              [0]
  lambda_rule   paper_sim | theorem | fixed (needs lambda)             [paper_sim]
  method        group_l12 | lasso_union                                [group_l12]
  alphas        angles for theta50-scan                                [7 points in 0..pi/2]
  with_lasso    also scan the per-task Lasso union                     [false]
  m, d, t       tail-check: m chi-square(d) variates against level 2t  [10, 2, 18]
  tol, max_iter solver stopping rule                                   [1e-9, 50000]
  x_path, y_path  headerless numeric CSV design and responses for solve";

fn parse_value<T: FromStr>(key: &str, value: &str, what: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Parse(format!("key `{key}`: expected {what}, got `{value}`")))
}

fn parse_int(key: &str, value: &str) -> Result<i128, CliError> {
    parse_value(key, value, "an integer")
}

fn parse_float(key: &str, value: &str) -> Result<f64, CliError> {
    let v: f64 = parse_value(key, value, "a number")?;
    if !v.is_finite() {
        return Err(CliError::Validation(format!("{key} must be finite")));
    }
    Ok(v)
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, CliError> {
    value
        .split(',')
        .map(|item| parse_float(key, item.trim()))
        .collect()
}

fn at_least(key: &str, v: i128, min: i128) -> Result<usize, CliError> {
    if v < min {
        return Err(CliError::Validation(format!("{key} must be ≥ {min}")));
    }
    usize::try_from(v).map_err(|_| CliError::Validation(format!("{key} is too large")))
}

struct Reader<'a> {
    raw: &'a RawConfig,
}

impl Reader<'_> {
    fn usize_or(&self, key: &str, default: usize, min: i128) -> Result<usize, CliError> {
        match self.raw.get(key) {
            Some(v) => at_least(key, parse_int(key, v)?, min),
            None => Ok(default),
        }
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        self.raw.get(key).map_or(Ok(default), |v| parse_float(key, v))
    }

    fn list_or(&self, key: &str, default: Vec<f64>) -> Result<Vec<f64>, CliError> {
        self.raw.get(key).map_or(Ok(default), |v| parse_list(key, v))
    }
}

pub fn default_theta_grid() -> Vec<f64> {
    (1..=8).map(|i| 0.25 * i as f64).collect()
}

pub fn default_alphas() -> Vec<f64> {
    (0..7).map(|i| FRAC_PI_2 * i as f64 / 6.0).collect()
}

impl RunConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, CliError> {
        let r = Reader { raw };
        let command: Command = raw
            .get("command")
            .ok_or_else(|| CliError::Validation("command is required".into()))?
            .parse()
            .map_err(CliError::Validation)?;

        let alpha = r.f64_or("alpha", 0.0)?;
        let family = match raw.get("family").unwrap_or("identical") {
            "identical" => Family::Identical,
            "orthonormal" => Family::Orthonormal,
            "intermediate" => Family::Intermediate,
            "b1_alpha" => Family::B1Alpha { alpha },
            other => return Err(CliError::Validation(format!("unknown family `{other}`"))),
        };
        if raw.get("alpha").is_some() && !matches!(family, Family::B1Alpha { .. }) {
            return Err(CliError::Validation("alpha applies only to family = b1_alpha".into()));
        }
        let covariance = match raw.get("covariance").unwrap_or("identity") {
            "identity" => {
                if raw.get("rho").is_some() {
                    return Err(CliError::Validation("rho applies only to covariance = toeplitz".into()));
                }
                Covariance::Identity
            }
            "toeplitz" => {
                let rho = raw
                    .get("rho")
                    .ok_or_else(|| CliError::Validation("covariance = toeplitz needs rho".into()))?;
                let rho = parse_float("rho", rho)?;
                if !(rho.abs() < 1.0) {
                    return Err(CliError::Validation("rho must satisfy |rho| < 1".into()));
                }
                Covariance::Toeplitz { rho }
            }
            other => return Err(CliError::Validation(format!("unknown covariance `{other}`"))),
        };
        let placement = match raw.get("placement").unwrap_or("first_s") {
            "first_s" => Placement::FirstS,
            "random" => Placement::Random,
            other => return Err(CliError::Validation(format!("unknown placement `{other}`"))),
        };
        let sigma = r.f64_or("sigma", 0.1)?;
        if sigma < 0.0 {
            return Err(CliError::Validation("sigma must be ≥ 0".into()));
        }
        let ensemble = EnsembleSpec {
            p: r.usize_or("p", 256, 1)?,
            s: r.usize_or("s", 16, 1)?,
            k: r.usize_or("K", 2, 1)?,
            sigma,
            family,
            covariance,
            placement,
        };

        let lambda_rule = match raw.get("lambda_rule").unwrap_or("paper_sim") {
            "paper_sim" => LambdaRule::PaperSim,
            "theorem" => LambdaRule::Theorem,
            "fixed" => {
                let l = raw
                    .get("lambda")
                    .ok_or_else(|| CliError::Validation("lambda_rule = fixed needs lambda".into()))?;
                let l = parse_float("lambda", l)?;
                if !(l > 0.0) {
                    return Err(CliError::Validation("lambda must be > 0".into()));
                }
                LambdaRule::Fixed(l)
            }
            other => return Err(CliError::Validation(format!("unknown lambda_rule `{other}`"))),
        };
        if raw.get("lambda").is_some() && !matches!(lambda_rule, LambdaRule::Fixed(_)) {
            return Err(CliError::Validation("lambda applies only to lambda_rule = fixed".into()));
        }
        let method = match raw.get("method").unwrap_or("group_l12") {
            "group_l12" => Method::GroupL12,
            "lasso_union" => Method::LassoUnion,
            other => return Err(CliError::Validation(format!("unknown method `{other}`"))),
        };
        let with_lasso = match raw.get("with_lasso").unwrap_or("false") {
            "true" => true,
            "false" => false,
            other => return Err(CliError::Parse(format!("key `with_lasso`: expected true or false, got `{other}`"))),
        };
        let default_trials = if command == Command::TailCheck {
            DEFAULT_TAIL_TRIALS
        } else {
            DEFAULT_SWEEP_TRIALS
        };
        let seed = match raw.get("seed") {
            Some(v) => parse_value::<u64>("seed", v, "an unsigned 64-bit integer")?,
            None => 0,
        };

        let cfg = RunConfig {
            command,
            ensemble,
            theta_grid: r.list_or("theta_grid", default_theta_grid())?,
            theta: r.f64_or("theta", 2.0)?,
            n: raw.get("n").map(|v| parse_int("n", v).and_then(|n| at_least("n", n, 1))).transpose()?,
            trials: r.usize_or("trials", default_trials, 1)?,
            seed,
            lambda_rule,
            method,
            alphas: r.list_or("alphas", default_alphas())?,
            with_lasso,
            m: r.usize_or("m", 10, 1)?,
            d: r.usize_or("d", 2, 1)?,
            t: r.f64_or("t", 18.0)?,
            tol: r.f64_or("tol", 1e-9)?,
            max_iter: r.usize_or("max_iter", 50_000, 1)?,
            x_path: raw.get("x_path").map(PathBuf::from),
            y_path: raw.get("y_path").map(PathBuf::from),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks the preconditions of the selected command before any work starts.
    pub fn validate(&self) -> Result<(), CliError> {
        let e = &self.ensemble;
        let invalid = |msg: String| Err(CliError::Validation(msg));
        if !(self.theta > 0.0) {
            return invalid("theta must be > 0".into());
        }
        if !(self.tol > 0.0) {
            return invalid("tol must be > 0".into());
        }
        if self.x_path.is_some() != self.y_path.is_some() {
            return invalid("x_path and y_path must be given together".into());
        }
        if self.x_path.is_some() && self.command != Command::Solve {
            return invalid("x_path and y_path apply only to solve".into());
        }
        if self.command == Command::TailCheck {
            if !(self.t > self.d as f64) {
                return invalid(format!("t must be > d = {}", self.d));
            }
            return Ok(());
        }
        if self.x_path.is_some() {
            return Ok(());
        }
        e.validate().map_err(|err| CliError::Validation(err.to_string()))?;
        if e.p < e.s + 2 {
            return invalid(format!("p must be ≥ s + 2 so that log(p − s) is defined, got p = {}, s = {}", e.p, e.s));
        }
        match self.command {
            Command::Sweep => self.sweep_spec().validate().map_err(|err| CliError::Validation(err.to_string())),
            Command::Theta50Scan => {
                if self.alphas.is_empty() {
                    return invalid("alphas must be nonempty".into());
                }
                let mut spec = self.sweep_spec();
                spec.ensemble.family = Family::B1Alpha { alpha: 0.0 };
                spec.validate().map_err(|err| CliError::Validation(err.to_string()))
            }
            _ => Ok(()),
        }
    }

    pub fn sweep_spec(&self) -> SweepSpec {
        SweepSpec {
            ensemble: self.ensemble.clone(),
            theta_grid: self.theta_grid.clone(),
            trials: self.trials,
            base_seed: self.seed,
            lambda_rule: self.lambda_rule,
            method: self.method,
        }
    }

    /// Canonical key/value echo that parses back to an equal configuration.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let e = &self.ensemble;
        let mut out = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            out.insert(k.to_string(), v);
        };
        let list = |v: &[f64]| v.iter().map(|x| fmt_g17(*x)).collect::<Vec<_>>().join(",");
        put("command", self.command.to_string());
        put("family", e.family.name().to_string());
        if let Family::B1Alpha { alpha } = e.family {
            put("alpha", fmt_g17(alpha));
        }
        put("p", e.p.to_string());
        put("s", e.s.to_string());
        put("K", e.k.to_string());
        put("sigma", fmt_g17(e.sigma));
        match e.covariance {
            Covariance::Toeplitz { rho } => {
                put("covariance", "toeplitz".into());
                put("rho", fmt_g17(rho));
            }
            _ => put("covariance", "identity".into()),
        }
        put(
            "placement",
            match e.placement {
                Placement::FirstS => "first_s",
                Placement::Random => "random",
            }
            .into(),
        );
        put("theta_grid", list(&self.theta_grid));
        put("theta", fmt_g17(self.theta));
        if let Some(n) = self.n {
            put("n", n.to_string());
        }
        put("trials", self.trials.to_string());
        put("seed", self.seed.to_string());
        match self.lambda_rule {
            LambdaRule::Fixed(l) => {
                put("lambda_rule", "fixed".into());
                put("lambda", fmt_g17(l));
            }
            rule => put("lambda_rule", rule.to_string()),
        }
        put("method", self.method.to_string());
        put("alphas", list(&self.alphas));
        put("with_lasso", self.with_lasso.to_string());
        put("m", self.m.to_string());
        put("d", self.d.to_string());
        put("t", fmt_g17(self.t));
        put("tol", fmt_g17(self.tol));
        put("max_iter", self.max_iter.to_string());
        if let Some(p) = &self.x_path {
            put("x_path", p.display().to_string());
        }
        if let Some(p) = &self.y_path {
            put("y_path", p.display().to_string());
        }
        out
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    RunConfig::from_raw(&RawConfig::parse(text)?)
}
