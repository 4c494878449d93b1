//! Lifetime datasets: the embedded failure-time sample, a plain-text parser
//! and boxplot outlier flagging.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Failure times of 50 units, in their original order.
pub const FAILURE_TIMES: [f64; 50] = [
    0.013, 0.065, 0.111, 0.111, 0.163, 0.309, 0.426, 0.535, 0.684, 0.747, 0.997, 1.284, 1.304, 1.647, 1.829, 2.336,
    2.838, 3.269, 3.977, 3.981, 4.520, 4.789, 4.849, 5.202, 5.291, 5.349, 5.911, 6.018, 6.427, 6.456, 6.572, 7.023,
    7.087, 7.291, 7.787, 8.596, 9.388, 10.261, 10.713, 11.658, 13.006, 13.388, 13.842, 17.152, 17.283, 19.418, 23.471,
    24.777, 32.795, 48.105,
];

/// Source tag of the embedded sample.
pub const EMBEDDED_SOURCE: &str = "embedded:failure-times";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataError {
    #[error("line {line}: cannot parse {token:?} as a number")]
    Parse { line: usize, token: String },
    #[error("line {line}: value {value} is not positive")]
    NonPositiveValue { line: usize, value: f64 },
    #[error("dataset is empty")]
    Empty,
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub values: Vec<f64>,
    pub source: String,
}

impl Dataset {
    pub fn embedded() -> Self {
        Self {
            values: FAILURE_TIMES.to_vec(),
            source: EMBEDDED_SOURCE.to_string(),
        }
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    /// Parses newline-, comma- or whitespace-separated positive numbers.
    /// Blank lines and `#` comments are skipped.
    pub fn parse(text: &str, source: &str) -> Result<Self, DataError> {
        let mut values = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("");
            for token in content
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
            {
                let value: f64 = token.parse().map_err(|_| DataError::Parse {
                    line,
                    token: token.to_string(),
                })?;
                if !(value > 0.0) || !value.is_finite() {
                    return Err(DataError::NonPositiveValue { line, value });
                }
                values.push(value);
            }
        }
        if values.is_empty() {
            return Err(DataError::Empty);
        }
        Ok(Self {
            values,
            source: source.to_string(),
        })
    }

    /// `"embedded"` (or the full embedded tag) selects the built-in sample;
    /// anything else is read as a file path.
    pub fn load(spec: &str) -> Result<Self, DataError> {
        if spec == "embedded" || spec == EMBEDDED_SOURCE {
            return Ok(Self::embedded());
        }
        let text = std::fs::read_to_string(spec).map_err(|e| DataError::Io {
            path: spec.to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text, spec)
    }

    /// Copy without the boxplot outliers, tagged with the number removed.
    pub fn without_outliers(&self) -> Self {
        let flags = OutlierReport::tukey(&self.values);
        let values = self
            .values
            .iter()
            .enumerate()
            .filter(|(i, _)| !flags.indices.contains(i))
            .map(|(_, &v)| v)
            .collect();
        Self {
            values,
            source: format!("{} (minus {} boxplot outliers)", self.source, flags.indices.len()),
        }
    }
}

/// Boxplot outlier flags (1.5 IQR fences on Tukey's hinges).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierReport {
    pub lower_hinge: f64,
    pub upper_hinge: f64,
    pub lower_fence: f64,
    pub upper_fence: f64,
    /// Positions in the input (0-based) of the flagged values.
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl OutlierReport {
    /// Flags points beyond `hinge ± 1.5 (upper - lower hinge)`, where the
    /// hinges are the medians of the lower and upper halves of the sorted
    /// sample (halves share the median when `n` is odd), as a boxplot draws them.
    pub fn tukey(data: &[f64]) -> Self {
        let mut sorted = data.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let (lower_hinge, upper_hinge) = if n == 0 {
            (f64::NAN, f64::NAN)
        } else {
            // depth of the hinge in 1-based order statistics
            let depth = ((n + 3) / 2) as f64 / 2.0;
            let at = |d: f64| {
                let lo = sorted[d.floor() as usize - 1];
                let hi = sorted[d.ceil() as usize - 1];
                0.5 * (lo + hi)
            };
            (at(depth), at(n as f64 + 1.0 - depth))
        };
        let spread = 1.5 * (upper_hinge - lower_hinge);
        let lower_fence = lower_hinge - spread;
        let upper_fence = upper_hinge + spread;
        let indices: Vec<usize> = data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v < lower_fence || v > upper_fence)
            .map(|(i, _)| i)
            .collect();
        let values = indices.iter().map(|&i| data[i]).collect();
        Self {
            lower_hinge,
            upper_hinge,
            lower_fence,
            upper_fence,
            indices,
            values,
        }
    }
}
