//! Property checks on scenario outputs, shared by the command line `--check`
//! and the acceptance suite.

use serde::{Deserialize, Serialize};

use super::gait::GaitCase;
use super::jam::{JamConfig, PerturbMode};
use super::perturb::SweepTable;
use super::record::TrialRecord;
use crate::tendon::calibrate::{StateTarget, DAMPING_TOLERANCE, PEAK_TOLERANCE};
use crate::tendon::DampingReport;

/// Accepted reduction of transmitted force when the drop-rig tendons are unjammed.
pub const DROP_REDUCTION_RANGE: (f64, f64) = (0.15, 0.45);
/// Pressure from which a drop counts as jammed, kPa.
pub const DROP_JAMMED_FROM_KPA: f64 = 40.0;
/// Largest relative spread among the top stored-energy collisions.
pub const STORED_ENERGY_SPREAD: f64 = 0.15;
/// Published toe-down and toe-up contributions, k1..k4, N.
pub const PUBLISHED_CONTRIBUTIONS: [(PerturbMode, [f64; 4]); 2] = [
    (PerturbMode::ToeDown, [9.56, 5.36, 13.1, 4.03]),
    (PerturbMode::ToeUp, [1.60, 2.41, 4.26, 12.6]),
];
pub const CONTRIBUTION_TOLERANCE_N: f64 = 0.15;
pub const SWING_LIMIT_N: f64 = 2.0;
/// Stances with both peaks prominent, at least / at most.
pub const DISTINCT_MIN_FRACTION: f64 = 0.75;
pub const INDISTINCT_MAX_FRACTION: f64 = 0.25;
/// Smallest onset excursion counted as a spike, N, and its margin over case III.
pub const SPIKE_MIN_N: f64 = 1.0;
pub const SPIKE_RATIO: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }

    fn missing(name: &str, what: &str) -> Self {
        Self::new(name, false, format!("{what} not in this run"))
    }
}

/// `check,passed,detail`.
pub fn checks_csv(checks: &[Check]) -> String {
    let mut s = String::from("check,passed,detail\n");
    for c in checks {
        s.push_str(&format!("{},{},\"{}\"\n", c.name, c.passed, c.detail.replace('"', "'")));
    }
    s
}

pub fn tendon_claim(spec_id: &str, state: &str, got: &DampingReport, target: &StateTarget) -> Check {
    let peak_err = (got.peak_force - target.peak_n) / target.peak_n;
    let d_err = got.capacity - target.damping;
    Check::new(
        format!("tendon_{spec_id}_{state}"),
        peak_err.abs() <= PEAK_TOLERANCE && d_err.abs() <= DAMPING_TOLERANCE,
        format!(
            "peak {:.2} N vs {} ({:+.2}%), D {:.3} vs {}",
            got.peak_force,
            target.peak_n,
            100.0 * peak_err,
            got.capacity,
            target.damping
        ),
    )
}

/// Drop records keyed by pressure, kPa.
pub fn drop_claims(records: &[(f64, TrialRecord)]) -> Vec<Check> {
    let soft = records.iter().find(|(p, _)| *p == 0.0);
    let hard = records
        .iter()
        .filter(|(p, _)| *p >= DROP_JAMMED_FROM_KPA)
        .min_by(|a, b| a.0.total_cmp(&b.0));
    let (Some((_, soft)), Some((ph, hard))) = (soft, hard) else {
        return vec![Check::missing("drop_force_reduction", "0 kPa and ≥ 40 kPa drops")];
    };
    let reduction = 1.0 - soft.metric("peak_force_N") / hard.metric("peak_force_N");
    let (lo, hi) = DROP_REDUCTION_RANGE;
    let (ws, wh) = (soft.metric("peak_omega_rad_s"), hard.metric("peak_omega_rad_s"));
    vec![
        Check::new(
            "drop_force_reduction",
            (lo..=hi).contains(&reduction),
            format!("{:.1}% lower at 0 kPa than at {ph} kPa", 100.0 * reduction),
        ),
        Check::new(
            "drop_faster_when_unjammed",
            ws > wh,
            format!("peak ω {ws:.3} vs {wh:.3} rad/s"),
        ),
    ]
}

/// Toe-down collision records.
pub fn collision_claims(records: &[(JamConfig, TrialRecord)]) -> Vec<Check> {
    let get = |mask: u8, key: &str| {
        records
            .iter()
            .find(|(c, _)| c.mask() == Some(mask))
            .map(|(_, r)| r.metric(key))
    };
    let force = |m| get(m, "peak_impact_force_N");
    let energy = |m| get(m, "peak_stored_energy_J");
    let mut out = Vec::new();
    match (force(0b1111), force(0)) {
        (Some(all), Some(none)) => out.push(Check::new(
            "collision_jammed_absorbs_more",
            all < none,
            format!("all-jammed {all:.1} N vs unjammed {none:.1} N"),
        )),
        _ => out.push(Check::missing(
            "collision_jammed_absorbs_more",
            "all-jammed and unjammed",
        )),
    }
    match (force(0b1100), force(0b0011)) {
        (Some(ankle), Some(knee)) => out.push(Check::new(
            "collision_ankle_beats_knee",
            ankle < knee,
            format!("ankle-only {ankle:.1} N vs knee-only {knee:.1} N"),
        )),
        _ => out.push(Check::missing("collision_ankle_beats_knee", "knee-only and ankle-only")),
    }
    let top: Vec<f64> = [0b0101, 0b1100, 0b1111].into_iter().filter_map(energy).collect();
    if top.len() == 3 {
        let lo = top.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = top.iter().copied().fold(0.0, f64::max);
        let others = records
            .iter()
            .filter(|(c, _)| !matches!(c.mask(), Some(0b0101 | 0b1100 | 0b1111)))
            .map(|(_, r)| r.metric("peak_stored_energy_J"))
            .fold(0.0, f64::max);
        out.push(Check::new(
            "collision_stored_energy",
            hi / lo - 1.0 <= STORED_ENERGY_SPREAD && others < lo,
            format!("top three {lo:.4}..{hi:.4} J, best other {others:.4} J"),
        ));
    } else {
        out.push(Check::missing("collision_stored_energy", "k1k3, k3k4 and all-jammed"));
    }
    out
}

pub fn sweep_claims(table: &SweepTable) -> Vec<Check> {
    let mut out = Vec::new();
    for mode in PerturbMode::BOTH {
        let ft = table.force_table(mode);
        if ft.rows.len() != 16 {
            out.push(Check::missing(
                &format!("sweep_{}_extremes", mode.as_str()),
                "all 16 configurations",
            ));
            continue;
        }
        let (min_c, min_f) = ft
            .rows
            .iter()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .copied()
            .expect("16 rows");
        let (max_c, max_f) = ft
            .rows
            .iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .copied()
            .expect("16 rows");
        out.push(Check::new(
            format!("sweep_{}_extremes", mode.as_str()),
            min_c == JamConfig::unjammed() && max_c == JamConfig::all_jammed(),
            format!("min {} {min_f:.2} N, max {} {max_f:.2} N", min_c.label(), max_c.label()),
        ));
    }
    let up = table.force_table(PerturbMode::ToeUp);
    let best_single = (0..4)
        .filter_map(|i| up.get(1 << i).map(|f| (i, f)))
        .max_by(|a, b| a.1.total_cmp(&b.1));
    out.push(match best_single {
        Some((i, f)) => Check::new(
            "sweep_toe_up_k4_first",
            i == 3,
            format!("best single jam k{} at {f:.2} N", i + 1),
        ),
        None => Check::missing("sweep_toe_up_k4_first", "toe-up single jams"),
    });
    out
}

pub fn contribution_claims(rows: &[(PerturbMode, [f64; 4])]) -> Vec<Check> {
    PUBLISHED_CONTRIBUTIONS
        .iter()
        .map(|(mode, want)| {
            let name = format!("contributions_{}", mode.as_str());
            match rows.iter().find(|(m, _)| m == mode) {
                Some((_, got)) => {
                    let worst = got.iter().zip(want).map(|(g, w)| (g - w).abs()).fold(0.0, f64::max);
                    Check::new(
                        name,
                        worst <= CONTRIBUTION_TOLERANCE_N,
                        format!("{got:.2?} vs {want:?}, worst {worst:.3} N"),
                    )
                }
                None => Check::missing(&name, mode.as_str()),
            }
        })
        .collect()
}

pub fn walking_claims(records: &[(GaitCase, TrialRecord)]) -> Vec<Check> {
    let get = |case: GaitCase| records.iter().find(|(c, _)| *c == case).map(|(_, r)| r);
    let mut out = Vec::new();
    match (get(GaitCase::II), get(GaitCase::I)) {
        (Some(jammed), Some(free)) => {
            let (fj, ff) = (jammed.metric("distinct_fraction"), free.metric("distinct_fraction"));
            out.push(Check::new(
                "walk_distinct_peaks",
                fj >= DISTINCT_MIN_FRACTION && ff <= INDISTINCT_MAX_FRACTION,
                format!("stances with both peaks prominent: II {fj:.2}, I {ff:.2}"),
            ));
        }
        _ => out.push(Check::missing("walk_distinct_peaks", "cases I and II")),
    }
    match (get(GaitCase::IV), get(GaitCase::III)) {
        (Some(iv), Some(iii)) => {
            let (s4, s3) = (iv.metric("onset_spike_N"), iii.metric("onset_spike_N"));
            out.push(Check::new(
                "walk_onset_spike",
                s4 >= SPIKE_MIN_N && s4 >= SPIKE_RATIO * s3,
                format!("onset excursion IV {s4:.3} N, III {s3:.3} N"),
            ));
        }
        _ => out.push(Check::missing("walk_onset_spike", "cases III and IV")),
    }
    if records.is_empty() {
        out.push(Check::missing("walk_swing_clear", "any case"));
    } else {
        let worst = records
            .iter()
            .map(|(_, r)| r.metric("swing_peak_N"))
            .fold(0.0, f64::max);
        out.push(Check::new(
            "walk_swing_clear",
            worst < SWING_LIMIT_N,
            format!("largest swing force {worst:.3} N"),
        ));
    }
    out
}
