//! Jamming configurations, the perturbation table and paired-difference analysis.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dynamics::TendonId;
use crate::error::{Error, Result};
use crate::tendon::jamming::{JammingState, JAMMED_KPA};

/// Vacuum pressure of each tendon, k1..k4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JamConfig {
    pub pressures_kpa: [f64; 4],
}

/// Masks in the row order of the perturbation table (bit `i` is tendon `k{i+1}`).
pub const TABLE_ORDER: [u8; 16] = [0, 1, 2, 4, 8, 3, 5, 9, 6, 10, 12, 7, 14, 13, 11, 15];

impl JamConfig {
    pub fn from_mask(mask: u8) -> Self {
        let mut p = [0.0; 4];
        for (i, v) in p.iter_mut().enumerate() {
            if mask & (1 << i) != 0 {
                *v = JAMMED_KPA;
            }
        }
        Self { pressures_kpa: p }
    }

    pub fn unjammed() -> Self {
        Self::from_mask(0)
    }

    pub fn all_jammed() -> Self {
        Self::from_mask(15)
    }

    pub fn jammed(ids: &[TendonId]) -> Self {
        Self::from_mask(ids.iter().fold(0, |m, id| m | (1 << id.index())))
    }

    /// All sixteen binary configurations in table order.
    pub fn table() -> Vec<Self> {
        TABLE_ORDER.iter().map(|&m| Self::from_mask(m)).collect()
    }

    pub fn is_jammed(&self, id: TendonId) -> bool {
        self.pressures_kpa[id.index()] >= 0.5 * JAMMED_KPA
    }

    /// The binary mask, when every pressure is exactly 0 or the jammed level.
    pub fn mask(&self) -> Option<u8> {
        let mut m = 0;
        for (i, &p) in self.pressures_kpa.iter().enumerate() {
            if p == JAMMED_KPA {
                m |= 1 << i;
            } else if p != 0.0 {
                return None;
            }
        }
        Some(m)
    }

    /// `all_unjammed`, `all_jammed`, `k1k3_jammed`, or explicit pressures.
    pub fn label(&self) -> String {
        match self.mask() {
            Some(0) => "all_unjammed".into(),
            Some(15) => "all_jammed".into(),
            Some(m) => {
                let mut s = String::new();
                for id in TendonId::ALL {
                    if m & (1 << id.index()) != 0 {
                        s.push_str(id.as_str());
                    }
                }
                s + "_jammed"
            }
            None => {
                let mut s = String::from("kpa");
                for p in self.pressures_kpa {
                    let _ = write!(s, "_{p}");
                }
                s
            }
        }
    }

    pub fn parse(label: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("unrecognised jamming label `{label}`"));
        match label {
            "all_unjammed" | "unjammed" => return Ok(Self::unjammed()),
            "all_jammed" | "jammed" => return Ok(Self::all_jammed()),
            _ => {}
        }
        if let Some(rest) = label.strip_prefix("kpa_") {
            let v: Vec<f64> = rest
                .split('_')
                .map(|s| s.parse::<f64>().map_err(|_| bad()))
                .collect::<Result<_>>()?;
            let p: [f64; 4] = v.try_into().map_err(|_| bad())?;
            if p.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(bad());
            }
            return Ok(Self { pressures_kpa: p });
        }
        let body = label.strip_suffix("_jammed").ok_or_else(bad)?;
        let mut mask = 0u8;
        let mut rest = body;
        while !rest.is_empty() {
            let id = TendonId::ALL
                .into_iter()
                .find(|id| rest.starts_with(id.as_str()))
                .ok_or_else(bad)?;
            if mask & (1 << id.index()) != 0 {
                return Err(bad());
            }
            mask |= 1 << id.index();
            rest = &rest[2..];
        }
        if mask == 0 {
            return Err(bad());
        }
        Ok(Self::from_mask(mask))
    }

    pub fn jamming_states(&self) -> Vec<JammingState> {
        self.pressures_kpa.iter().map(|&p| JammingState::settled(p)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbMode {
    ToeDown,
    ToeUp,
}

impl PerturbMode {
    pub const BOTH: [PerturbMode; 2] = [PerturbMode::ToeDown, PerturbMode::ToeUp];

    pub fn as_str(self) -> &'static str {
        match self {
            PerturbMode::ToeDown => "toe_down",
            PerturbMode::ToeUp => "toe_up",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "toe_down" | "toedown" => Ok(PerturbMode::ToeDown),
            "toe_up" | "toeup" => Ok(PerturbMode::ToeUp),
            _ => Err(Error::Parse(format!("unknown mode `{s}`"))),
        }
    }
}

/// One force value per jamming configuration.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ForceTable {
    pub rows: Vec<(JamConfig, f64)>,
}

impl ForceTable {
    pub fn get(&self, mask: u8) -> Option<f64> {
        self.rows.iter().find(|(c, _)| c.mask() == Some(mask)).map(|r| r.1)
    }
}

/// Mean over the eight state-matched pairs of the force gained by jamming each tendon.
pub fn contribution_analysis(table: &ForceTable) -> Result<[f64; 4]> {
    let missing: Vec<String> = TABLE_ORDER
        .iter()
        .filter(|&&m| table.get(m).is_none())
        .map(|&m| JamConfig::from_mask(m).label())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingConfigurations(missing));
    }
    let f = |m: u8| table.get(m).expect("completeness checked above");
    let mut out = [0.0; 4];
    for (i, c) in out.iter_mut().enumerate() {
        let bit = 1u8 << i;
        let sum: f64 = (0u8..16).filter(|m| m & bit == 0).map(|m| f(m | bit) - f(m)).sum();
        *c = sum / 8.0;
    }
    Ok(out)
}

/// Both columns of the published perturbation table.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PerturbationTable {
    pub toe_down: ForceTable,
    pub toe_up: ForceTable,
}

pub const TABLE3_FIXTURE: &str = include_str!("../../fixtures/table3.csv");

impl PerturbationTable {
    /// Parses `k1,k2,k3,k4,toedown_N,toeup_N` rows with 0/1 jam flags.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty table".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols != ["k1", "k2", "k3", "k4", "toedown_N", "toeup_N"] {
            return Err(Error::Parse(format!("unexpected header `{header}`")));
        }
        let mut t = Self::default();
        for (n, line) in lines.enumerate() {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 6 {
                return Err(Error::Parse(format!("row {} has {} fields", n + 1, f.len())));
            }
            let mut mask = 0u8;
            for (i, s) in f[..4].iter().enumerate() {
                match *s {
                    "0" => {}
                    "1" => mask |= 1 << i,
                    _ => return Err(Error::Parse(format!("row {}: flag `{s}`", n + 1))),
                }
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("row {}: `{s}`", n + 1)))
            };
            let cfg = JamConfig::from_mask(mask);
            t.toe_down.rows.push((cfg, num(f[4])?));
            t.toe_up.rows.push((cfg, num(f[5])?));
        }
        Ok(t)
    }

    pub fn fixture() -> Self {
        Self::parse_csv(TABLE3_FIXTURE).expect("bundled table parses")
    }

    pub fn column(&self, mode: PerturbMode) -> &ForceTable {
        match mode {
            PerturbMode::ToeDown => &self.toe_down,
            PerturbMode::ToeUp => &self.toe_up,
        }
    }
}

/// `mode,tendon,mean_paired_diff_N` rows for each mode.
pub fn contributions_csv(rows: &[(PerturbMode, [f64; 4])]) -> String {
    let mut s = String::from("mode,tendon,mean_paired_diff_N\n");
    for (mode, c) in rows {
        for id in TendonId::ALL {
            let _ = writeln!(s, "{},{},{}", mode.as_str(), id.as_str(), c[id.index()]);
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_round_trip_and_are_unique() {
        let labels: Vec<String> = JamConfig::table().iter().map(JamConfig::label).collect();
        for (i, l) in labels.iter().enumerate() {
            assert_eq!(JamConfig::parse(l).unwrap().label(), *l);
            assert!(!labels[..i].contains(l));
        }
        assert_eq!(JamConfig::from_mask(5).label(), "k1k3_jammed");
        let odd = JamConfig {
            pressures_kpa: [20.0, 0.0, 50.0, 0.0],
        };
        assert_eq!(JamConfig::parse(&odd.label()).unwrap(), odd);
        assert!(JamConfig::parse("k3k3_jammed").is_err());
        assert!(JamConfig::parse("k5_jammed").is_err());
    }

    #[test]
    fn table_covers_every_mask_once() {
        let mut seen = [false; 16];
        for m in TABLE_ORDER {
            assert!(!seen[m as usize]);
            seen[m as usize] = true;
        }
    }

    #[test]
    fn constant_table_has_no_contributions() {
        let t = ForceTable {
            rows: JamConfig::table().into_iter().map(|c| (c, 42.0)).collect(),
        };
        assert_eq!(contribution_analysis(&t).unwrap(), [0.0; 4]);
    }

    #[test]
    fn additive_table_recovers_effects() {
        let effect = [3.0, -1.5, 7.25, 0.5];
        let t = ForceTable {
            rows: JamConfig::table()
                .into_iter()
                .map(|c| {
                    let m = c.mask().unwrap();
                    let f = 10.0 + (0..4).filter(|i| m & (1 << i) != 0).map(|i| effect[i]).sum::<f64>();
                    (c, f)
                })
                .collect(),
        };
        let c = contribution_analysis(&t).unwrap();
        for i in 0..4 {
            assert!((c[i] - effect[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn missing_rows_are_listed() {
        let mut t = PerturbationTable::fixture().toe_down;
        t.rows.retain(|(c, _)| c.mask() != Some(6));
        match contribution_analysis(&t) {
            Err(Error::MissingConfigurations(m)) => assert_eq!(m, vec!["k2k3_jammed".to_string()]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn fixture_contributions() {
        let t = PerturbationTable::fixture();
        // Paired differences worked by hand from the table rows.
        let down = contribution_analysis(&t.toe_down).unwrap();
        let up = contribution_analysis(&t.toe_up).unwrap();
        let expect_down = [9.5875, 5.3375, 13.1125, 4.0625];
        let expect_up = [1.6375, 2.4125, 4.2875, 12.6625];
        for i in 0..4 {
            assert!((down[i] - expect_down[i]).abs() < 1e-9);
            assert!((up[i] - expect_up[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn malformed_fixture_is_rejected() {
        assert!(PerturbationTable::parse_csv("a,b\n").is_err());
        assert!(PerturbationTable::parse_csv("k1,k2,k3,k4,toedown_N,toeup_N\n2,0,0,0,1,1\n").is_err());
    }
}
