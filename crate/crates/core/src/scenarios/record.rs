//! Uniformly sampled trial output.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::analysis::Series;
use crate::error::{Error, Result};

/// Output sampling interval, s.
pub const SAMPLE_DT: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub name: String,
    pub unit: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrialRecord {
    pub scenario: String,
    pub config: String,
    pub t: Vec<f64>,
    pub channels: Vec<Channel>,
    pub metrics: BTreeMap<String, f64>,
    pub flags: Vec<String>,
}

impl TrialRecord {
    pub fn new(scenario: &str, config: &str, channels: &[(&str, &str)]) -> Self {
        Self {
            scenario: scenario.into(),
            config: config.into(),
            channels: channels
                .iter()
                .map(|(n, u)| Channel {
                    name: (*n).into(),
                    unit: (*u).into(),
                    values: Vec::new(),
                })
                .collect(),
            ..Self::default()
        }
    }

    /// Appends one row; `values` follows the channel order.
    pub fn push(&mut self, t: f64, values: &[f64]) {
        debug_assert_eq!(values.len(), self.channels.len());
        self.t.push(t);
        for (c, v) in self.channels.iter_mut().zip(values) {
            c.values.push(*v);
        }
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.channels
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.values.as_slice())
    }

    pub fn series(&self, name: &str) -> Result<Series> {
        let v = self
            .channel(name)
            .ok_or_else(|| Error::InvalidSpec(format!("record has no channel `{name}`")))?;
        Series::from_samples(&self.t, v.to_vec())
    }

    pub fn metric(&self, name: &str) -> f64 {
        self.metrics.get(name).copied().unwrap_or(f64::NAN)
    }

    pub fn set_metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.into(), value);
    }

    pub fn flag(&mut self, flag: impl Into<String>) {
        let f = flag.into();
        if !self.flags.contains(&f) {
            self.flags.push(f);
        }
    }

    pub fn max_of(&self, name: &str) -> f64 {
        self.channel(name)
            .map(|v| v.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .unwrap_or(f64::NAN)
    }

    /// `t_s,<name>_<unit>…` with shortest round-trip number formatting.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t_s");
        for c in &self.channels {
            let _ = write!(s, ",{}_{}", c.name, c.unit);
        }
        s.push('\n');
        for (i, t) in self.t.iter().enumerate() {
            let _ = write!(s, "{t}");
            for c in &self.channels {
                let _ = write!(s, ",{}", c.values[i]);
            }
            s.push('\n');
        }
        s
    }

    /// Reads the format written by [`TrialRecord::to_csv`]. Channel names end at
    /// the first underscore of each header.
    pub fn from_csv(scenario: &str, config: &str, text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty record".into()))?;
        let mut cols = header.split(',').map(str::trim);
        if cols.next() != Some("t_s") {
            return Err(Error::Parse(format!("record header must start with t_s: `{header}`")));
        }
        let names: Vec<(&str, &str)> = cols
            .map(|c| {
                c.split_once('_')
                    .ok_or_else(|| Error::Parse(format!("column `{c}` lacks a unit")))
            })
            .collect::<Result<_>>()?;
        let mut rec = Self::new(scenario, config, &names);
        let mut row = Vec::with_capacity(names.len());
        for (n, line) in lines.enumerate() {
            let mut f = line.split(',').map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("row {}: `{}`", n + 1, v.trim())))
            });
            let t = f
                .next()
                .ok_or_else(|| Error::Parse(format!("row {} is empty", n + 1)))??;
            row.clear();
            for v in f {
                row.push(v?);
            }
            if row.len() != names.len() {
                return Err(Error::Parse(format!(
                    "row {} has {} values, expected {}",
                    n + 1,
                    row.len(),
                    names.len()
                )));
            }
            rec.push(t, &row);
        }
        Ok(rec)
    }
}

/// Number of integration steps between output samples.
pub fn sample_stride(dt: f64) -> usize {
    ((SAMPLE_DT / dt).round() as usize).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_header_and_rows() {
        let mut r = TrialRecord::new("drop", "all_jammed", &[("force", "N"), ("omega", "rad_s")]);
        r.push(0.0, &[1.5, -0.25]);
        r.push(0.001, &[2.0, 0.1]);
        assert_eq!(r.to_csv(), "t_s,force_N,omega_rad_s\n0,1.5,-0.25\n0.001,2,0.1\n");
        assert_eq!(r.max_of("force"), 2.0);
        assert!(r.series("force").is_ok());
        assert!(r.series("missing").is_err());
    }

    #[test]
    fn csv_round_trips() {
        let mut r = TrialRecord::new("walk", "case_II", &[("fz", "N"), ("omega", "rad_s")]);
        r.push(-1.25, &[0.1 + 0.2, 1e-300]);
        r.push(-1.249, &[36.0, -0.0]);
        let back = TrialRecord::from_csv("walk", "case_II", &r.to_csv()).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.channels[1].unit, "rad_s");
    }

    #[test]
    fn malformed_csv_is_rejected() {
        assert!(TrialRecord::from_csv("a", "b", "").is_err());
        assert!(TrialRecord::from_csv("a", "b", "time,fz_N\n0,1\n").is_err());
        assert!(TrialRecord::from_csv("a", "b", "t_s,fz_N\n0,1,2\n").is_err());
        assert!(TrialRecord::from_csv("a", "b", "t_s,fz_N\n0,x\n").is_err());
    }
}
