//! Covariate specifications: a small grammar naming how the segmented
//! covariate `z` is laid out for power work.
//!
//! ```text
//! spec := "equispaced"
//!       | "normal" "(" R "," R ")"
//!       | "uniform" "(" R "," R ")"
//!       | "exponential" "(" R ")"
//!       | "beta" "(" R "," R ")"
//!       | R ("," R)*
//! ```
//!
//! Names are case-insensitive and whitespace is ignored everywhere.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::error::{Error, Result};
use crate::normal;

/// Smallest series a covariate can be realized for.
pub const MIN_REALIZED_N: usize = 5;

#[derive(Debug, Clone, PartialEq, Default)]
pub enum CovariateSpec {
    /// `(1..n)/n`.
    #[default]
    Equispaced,
    Normal { mu: f64, sd: f64 },
    Uniform { a: f64, b: f64 },
    Exponential { rate: f64 },
    Beta { a: f64, b: f64 },
    /// Values used verbatim.
    Explicit(Vec<f64>),
}


/// Probabilities plugged into a quantile function to realize `n` points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbabilityGrid {
    /// `n` evenly spaced probabilities from 0.001 to 0.999.
    #[default]
    Trimmed,
    /// `(i - 0.5)/n`.
    Midpoint,
}

impl ProbabilityGrid {
    pub fn probabilities(self, n: usize) -> Vec<f64> {
        match self {
            ProbabilityGrid::Trimmed => {
                let (lo, hi) = (0.001, 0.999);
                (0..n)
                    .map(|i| lo + (hi - lo) * i as f64 / (n - 1).max(1) as f64)
                    .collect()
            }
            ProbabilityGrid::Midpoint => (1..=n).map(|i| (i as f64 - 0.5) / n as f64).collect(),
        }
    }
}

impl FromStr for ProbabilityGrid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "trimmed" => Ok(ProbabilityGrid::Trimmed),
            "midpoint" => Ok(ProbabilityGrid::Midpoint),
            other => Err(Error::invalid(format!("unknown probability grid `{other}`"))),
        }
    }
}

impl CovariateSpec {
    /// Parses the textual form.
    pub fn parse(text: &str) -> Result<Self> {
        Parser::new(text).spec()
    }

    fn validate(&self) -> std::result::Result<(), String> {
        match *self {
            CovariateSpec::Equispaced => Ok(()),
            CovariateSpec::Normal { sd, .. } if !(sd > 0.0) => Err("sd must be positive".into()),
            CovariateSpec::Uniform { a, b } if !(a < b) => Err("uniform requires a < b".into()),
            CovariateSpec::Exponential { rate } if !(rate > 0.0) => Err("rate must be positive".into()),
            CovariateSpec::Beta { a, b } if !(a > 0.0 && b > 0.0) => {
                Err("beta shapes must be positive".into())
            }
            CovariateSpec::Explicit(ref v) => {
                if v.iter().any(|x| !x.is_finite()) {
                    return Err("explicit values must be finite".into());
                }
                let mut s = v.clone();
                s.sort_by(f64::total_cmp);
                s.dedup();
                if s.len() < 3 {
                    return Err("explicit values need at least 3 distinct points".into());
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Realizes `n` covariate values on the default probability grid.
    pub fn realize(&self, n: usize) -> Result<Vec<f64>> {
        realize_covariate_with(self, n, ProbabilityGrid::default())
    }

    /// Fixed size for explicit specs, `None` otherwise.
    pub fn fixed_len(&self) -> Option<usize> {
        match self {
            CovariateSpec::Explicit(v) => Some(v.len()),
            _ => None,
        }
    }
}

/// Realizes `n` values of the covariate on the default probability grid.
pub fn realize_covariate(spec: &CovariateSpec, n: usize) -> Result<Vec<f64>> {
    realize_covariate_with(spec, n, ProbabilityGrid::default())
}

/// Realizes `n` values, evaluating distributional quantile functions on `grid`.
pub fn realize_covariate_with(spec: &CovariateSpec, n: usize, grid: ProbabilityGrid) -> Result<Vec<f64>> {
    if let CovariateSpec::Explicit(v) = spec {
        if v.len() != n {
            return Err(Error::Dimension {
                what: "explicit covariate",
                expected: n,
                found: v.len(),
            });
        }
        return Ok(v.clone());
    }
    if n < MIN_REALIZED_N {
        return Err(Error::SeriesTooShort { n, min: MIN_REALIZED_N });
    }
    let q: Box<dyn Fn(f64) -> f64> = match *spec {
        CovariateSpec::Equispaced => {
            return Ok((1..=n).map(|i| i as f64 / n as f64).collect());
        }
        CovariateSpec::Normal { mu, sd } => Box::new(move |p| mu + sd * normal::quantile(p)),
        CovariateSpec::Uniform { a, b } => Box::new(move |p| a + (b - a) * p),
        CovariateSpec::Exponential { rate } => Box::new(move |p: f64| -(-p).ln_1p() / rate),
        CovariateSpec::Beta { a, b } => {
            let d = Beta::new(a, b).map_err(|e| Error::Config(e.to_string()))?;
            Box::new(move |p| d.inverse_cdf(p))
        }
        CovariateSpec::Explicit(_) => unreachable!(),
    };
    let mut z: Vec<f64> = grid.probabilities(n).into_iter().map(q).collect();
    z.sort_by(f64::total_cmp);
    Ok(z)
}

impl fmt::Display for CovariateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CovariateSpec::Equispaced => f.write_str("equispaced"),
            CovariateSpec::Normal { mu, sd } => write!(f, "normal({mu},{sd})"),
            CovariateSpec::Uniform { a, b } => write!(f, "uniform({a},{b})"),
            CovariateSpec::Exponential { rate } => write!(f, "exponential({rate})"),
            CovariateSpec::Beta { a, b } => write!(f, "beta({a},{b})"),
            CovariateSpec::Explicit(v) => {
                for (i, x) in v.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{x}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for CovariateSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CovariateSpec::parse(s)
    }
}

impl Serialize for CovariateSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CovariateSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        CovariateSpec::parse(&text).map_err(serde::de::Error::custom)
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Self { src, pos: 0 }
    }

    fn err<T>(&self, position: usize, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            position,
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn expect(&mut self, c: char) -> Result<()> {
        match self.peek() {
            Some(got) if got == c => {
                self.pos += c.len_utf8();
                Ok(())
            }
            Some(got) => self.err(self.pos, format!("expected `{c}`, found `{got}`")),
            None => self.err(self.pos, format!("expected `{c}`, found end of input")),
        }
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        let rest = &self.src[start..];
        let len = rest
            .find(|c: char| !(c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E')))
            .unwrap_or(rest.len());
        if len == 0 {
            return match rest.chars().next() {
                Some(c) => self.err(start, format!("expected a number, found `{c}`")),
                None => self.err(start, "expected a number, found end of input"),
            };
        }
        let tok = &rest[..len];
        match tok.parse::<f64>() {
            Ok(v) if v.is_finite() => {
                self.pos += len;
                Ok(v)
            }
            _ => self.err(start, format!("invalid number `{tok}`")),
        }
    }

    fn args(&mut self, name: &str, arity: usize, name_pos: usize) -> Result<Vec<f64>> {
        self.expect('(')?;
        let mut out = Vec::new();
        if self.peek() != Some(')') {
            loop {
                out.push(self.number()?);
                if self.peek() == Some(',') {
                    self.pos += 1;
                } else {
                    break;
                }
            }
        }
        self.expect(')')?;
        if out.len() != arity {
            return self.err(
                name_pos,
                format!("`{name}` takes {arity} argument(s), got {}", out.len()),
            );
        }
        Ok(out)
    }

    fn spec(&mut self) -> Result<CovariateSpec> {
        let start = match self.peek() {
            None => return self.err(self.pos, "empty covariate specification"),
            Some(_) => self.pos,
        };
        let rest = &self.src[start..];
        let word_len = rest
            .find(|c: char| !c.is_ascii_alphabetic())
            .unwrap_or(rest.len());
        let spec = if word_len > 0 {
            let word = rest[..word_len].to_ascii_lowercase();
            self.pos += word_len;
            match word.as_str() {
                "equispaced" => CovariateSpec::Equispaced,
                "normal" => {
                    let a = self.args("normal", 2, start)?;
                    CovariateSpec::Normal { mu: a[0], sd: a[1] }
                }
                "uniform" => {
                    let a = self.args("uniform", 2, start)?;
                    CovariateSpec::Uniform { a: a[0], b: a[1] }
                }
                "exponential" => {
                    let a = self.args("exponential", 1, start)?;
                    CovariateSpec::Exponential { rate: a[0] }
                }
                "beta" => {
                    let a = self.args("beta", 2, start)?;
                    CovariateSpec::Beta { a: a[0], b: a[1] }
                }
                _ => return self.err(start, format!("unknown distribution `{}`", &rest[..word_len])),
            }
        } else {
            let mut values = vec![self.number()?];
            while self.peek() == Some(',') {
                self.pos += 1;
                values.push(self.number()?);
            }
            CovariateSpec::Explicit(values)
        };
        if let Some(c) = self.peek() {
            return self.err(self.pos, format!("unexpected trailing `{c}`"));
        }
        if let Err(msg) = spec.validate() {
            return self.err(start, msg);
        }
        Ok(spec)
    }
}
