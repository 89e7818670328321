//! Standard Normal helpers and test alternatives.

use serde::{Deserialize, Serialize};
use std::f64::consts::SQRT_2;
use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// Standard Normal distribution function.
pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Upper tail `1 - Φ(x)`, accurate for large `x`.
pub fn sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// Standard Normal quantile function (Wichura's AS 241, about 1e-16 relative).
pub fn quantile(p: f64) -> f64 {
    crate::rng::qnorm_as241(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alternative {
    #[default]
    TwoSided,
    Greater,
    Less,
}

impl Alternative {
    /// p-value of a standard Normal statistic.
    pub fn p_value(self, s: f64) -> f64 {
        let p = match self {
            Alternative::TwoSided => 2.0 * cdf(-s.abs()),
            Alternative::Greater => sf(s),
            Alternative::Less => cdf(s),
        };
        p.clamp(0.0, 1.0)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Alternative::TwoSided => "two-sided",
            Alternative::Greater => "greater",
            Alternative::Less => "less",
        }
    }
}

impl fmt::Display for Alternative {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Alternative {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "two-sided" | "two.sided" | "two_sided" | "twosided" => Ok(Alternative::TwoSided),
            "greater" => Ok(Alternative::Greater),
            "less" => Ok(Alternative::Less),
            other => Err(Error::invalid(format!("unknown alternative `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_sided_p_values_are_complementary() {
        for s in [-4.0, -1.3, 0.0, 0.2, 2.5, 7.0] {
            let g = Alternative::Greater.p_value(s);
            let l = Alternative::Less.p_value(s);
            assert!((g + l - 1.0).abs() < 1e-12, "s = {s}");
        }
    }

    #[test]
    fn two_sided_is_symmetric() {
        assert!((Alternative::TwoSided.p_value(1.96) - 0.049_995_790_296_440_5).abs() < 1e-9);
        assert_eq!(
            Alternative::TwoSided.p_value(-2.2),
            Alternative::TwoSided.p_value(2.2)
        );
        assert_eq!(Alternative::TwoSided.p_value(0.0), 1.0);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for p in [0.005, 0.025, 0.5, 0.975, 0.995] {
            assert!((cdf(quantile(p)) - p).abs() < 1e-12);
        }
    }
}
