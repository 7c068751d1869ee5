use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Attack hyper-parameters; defaults follow the reference settings table.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackConfig {
    /// Per-coordinate vertex bound ε, meters.
    pub epsilon: f64,
    pub lambda: f64,
    pub mu: f64,
    pub beta1: f64,
    pub learning_rate: f64,
    /// Magnitude of the uniform random start, meters.
    pub pgd_init: f64,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    /// Degrees.
    pub yaw_range: (f64, f64),
    pub samples: usize,
    pub max_iters: usize,
    pub eps_div: f64,
    /// Run the 8-pose success check every this many iterations.
    pub verify_every: usize,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.02,
            lambda: 20.0,
            mu: 100.0,
            beta1: 0.001,
            learning_rate: 0.001,
            pgd_init: 0.01,
            x_range: (5.0, 35.0),
            y_range: (-0.3, 0.3),
            yaw_range: (-5.0, 5.0),
            samples: 4,
            max_iters: 1000,
            eps_div: 1e-7,
            verify_every: 10,
        }
    }
}

const KEYS: [&str; 13] = [
    "pgd_initial_point",
    "pgd_constraint",
    "tanh_mu",
    "eps_div",
    "x_range",
    "y_range",
    "yaw_range",
    "learning_rate",
    "lambda",
    "beta1",
    "samples",
    "max_iters",
    "verify_every",
];

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return bad(format!("pgd_constraint must be non-negative, got {}", self.epsilon));
        }
        if !(self.pgd_init >= 0.0 && self.pgd_init.is_finite()) {
            return bad(format!("pgd_initial_point must be non-negative, got {}", self.pgd_init));
        }
        for (k, v) in [("tanh_mu", self.mu), ("eps_div", self.eps_div)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{k} must be positive, got {v}"));
            }
        }
        for (k, v) in [("lambda", self.lambda), ("beta1", self.beta1), ("learning_rate", self.learning_rate)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{k} must be non-negative, got {v}"));
            }
        }
        for (k, r) in [("x_range", self.x_range), ("y_range", self.y_range), ("yaw_range", self.yaw_range)] {
            if !(r.0 <= r.1 && r.0.is_finite() && r.1.is_finite()) {
                return bad(format!("{k} must be an ordered finite pair, got {} {}", r.0, r.1));
            }
        }
        if self.samples == 0 {
            return bad("samples must be at least 1".into());
        }
        if self.verify_every == 0 {
            return bad("verify_every must be at least 1".into());
        }
        Ok(())
    }
}

pub fn parse_config(text: &str) -> Result<AttackConfig> {
    let mut c = AttackConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::parse(ln, "expected `key = value`"))?;
        let (k, v) = (k.trim(), v.trim());
        let nums = || -> Result<Vec<f64>> {
            v.split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| Error::parse(ln, format!("bad number `{t}` for `{k}`"))))
                .collect()
        };
        let one = || -> Result<f64> {
            let n = nums()?;
            <[f64; 1]>::try_from(n).map(|[x]| x).map_err(|_| Error::parse(ln, format!("`{k}` takes one value")))
        };
        let pair = || -> Result<(f64, f64)> {
            let n = nums()?;
            <[f64; 2]>::try_from(n).map(|[a, b]| (a, b)).map_err(|_| Error::parse(ln, format!("`{k}` takes two values")))
        };
        let count = || -> Result<usize> { v.parse().map_err(|_| Error::parse(ln, format!("`{k}` takes a count"))) };
        match k {
            "pgd_initial_point" => c.pgd_init = one()?,
            "pgd_constraint" => c.epsilon = one()?,
            "tanh_mu" => c.mu = one()?,
            "eps_div" => c.eps_div = one()?,
            "x_range" => c.x_range = pair()?,
            "y_range" => c.y_range = pair()?,
            "yaw_range" => c.yaw_range = pair()?,
            "learning_rate" => c.learning_rate = one()?,
            "lambda" => c.lambda = one()?,
            "beta1" => c.beta1 = one()?,
            "samples" => c.samples = count()?,
            "max_iters" => c.max_iters = count()?,
            "verify_every" => c.verify_every = count()?,
            _ => return Err(Error::parse(ln, format!("unknown key `{k}` (known: {})", KEYS.join(", ")))),
        }
    }
    c.validate()?;
    Ok(c)
}

pub fn format_config(c: &AttackConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "pgd_initial_point = {}", c.pgd_init);
    let _ = writeln!(s, "pgd_constraint = {}", c.epsilon);
    let _ = writeln!(s, "tanh_mu = {}", c.mu);
    let _ = writeln!(s, "eps_div = {}", c.eps_div);
    let _ = writeln!(s, "x_range = {} {}", c.x_range.0, c.x_range.1);
    let _ = writeln!(s, "y_range = {} {}", c.y_range.0, c.y_range.1);
    let _ = writeln!(s, "yaw_range = {} {}", c.yaw_range.0, c.yaw_range.1);
    let _ = writeln!(s, "learning_rate = {}", c.learning_rate);
    let _ = writeln!(s, "lambda = {}", c.lambda);
    let _ = writeln!(s, "beta1 = {}", c.beta1);
    let _ = writeln!(s, "samples = {}", c.samples);
    let _ = writeln!(s, "max_iters = {}", c.max_iters);
    let _ = writeln!(s, "verify_every = {}", c.verify_every);
    s
}

pub fn load_config(path: impl AsRef<Path>) -> Result<AttackConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}
