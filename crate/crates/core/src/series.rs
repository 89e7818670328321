use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An ordered response vector, the unit of analysis for every test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub y: Vec<f64>,
    /// Observation times; `1..=n` unless supplied.
    pub time_index: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    /// Segmented covariate, when it differs from the time index.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<Vec<f64>>,
    /// Item difficulties for binary responses.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
}

impl Series {
    pub fn new(y: Vec<f64>) -> Self {
        let time_index = (1..=y.len()).map(|i| i as f64).collect();
        Self {
            y,
            time_index,
            labels: None,
            z: None,
            b: None,
        }
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        self.labels = Some(labels);
        self
    }

    pub fn with_z(mut self, z: Vec<f64>) -> Self {
        self.z = Some(z);
        self
    }

    pub fn with_difficulties(mut self, b: Vec<f64>) -> Self {
        self.b = Some(b);
        self
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Segmented covariate: explicit `z`, else numeric labels, else the time index.
    pub fn covariate(&self) -> Vec<f64> {
        if let Some(z) = &self.z {
            return z.clone();
        }
        if let Some(labels) = &self.labels {
            let parsed: Option<Vec<f64>> = labels.iter().map(|l| l.trim().parse().ok()).collect();
            if let Some(v) = parsed {
                return v;
            }
        }
        self.time_index.clone()
    }

    /// Display label of observation `i` (0-based).
    pub fn label(&self, i: usize) -> String {
        match &self.labels {
            Some(l) => l[i].clone(),
            None => format_number(self.time_index[i]),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.y.len();
        let check = |what: &'static str, len: usize| {
            if len != n {
                Err(Error::Dimension {
                    what,
                    expected: n,
                    found: len,
                })
            } else {
                Ok(())
            }
        };
        check("time_index", self.time_index.len())?;
        if let Some(l) = &self.labels {
            check("labels", l.len())?;
        }
        if let Some(z) = &self.z {
            check("z", z.len())?;
        }
        if let Some(b) = &self.b {
            check("b", b.len())?;
        }
        if self.y.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("response has non-finite values"));
        }
        if self.time_index.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("time index must be strictly increasing"));
        }
        Ok(())
    }
}

pub(crate) fn format_number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}
