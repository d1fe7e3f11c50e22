//! One pipeline per command. Each fills a bundle and returns its checks.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use jamleg_core::analysis::GrfRecord;
use jamleg_core::scenarios::claims::{
    collision_claims, contribution_claims, drop_claims, sweep_claims, tendon_claim, walking_claims,
};
use jamleg_core::scenarios::jam::{PerturbationTable, TABLE3_FIXTURE};
use jamleg_core::scenarios::{
    collision_configs, contribution_analysis, contributions_csv, filtered_grf, grf_peaks, grf_summary_csv,
    run_collision, run_drop_test, run_perturbation, run_walking, sweep_trials, Check, GaitSpec, JamConfig, PeakNoise,
    PerturbMode, SweepTable, TrialRecord,
};
use jamleg_core::tendon::calibrate::{SolverOptions, TensileRow, TEST_AMPLITUDE_MM, TEST_DT_S, TEST_RATE_MM_S};
use jamleg_core::tendon::{
    calibrate_tendon, damping_capacity, run_tension_cycles, FibreBundleSpec, JammingState, TendonModel,
};
use rayon::prelude::*;

use crate::bundle::Bundle;
use crate::config::{AnalyzeJob, CollideJob, DropJob, PerturbJob, TendonJob, WalkJob};
use crate::error::{CliError, CliResult};

pub const FIXTURES_ENV: &str = "JAMLEG_FIXTURES";

fn json(value: &impl serde::Serialize) -> CliResult<String> {
    Ok(serde_json::to_string_pretty(value).map_err(jamleg_core::Error::from)? + "\n")
}

fn flags(rec: &TrialRecord) -> String {
    rec.flags.join(";")
}

pub fn tendon(job: &TendonJob, bundle: &mut Bundle) -> CliResult<Vec<Check>> {
    if job.cycles == 0 || job.states.is_empty() {
        return Err(CliError::Usage("tendon needs at least one cycle and one state".into()));
    }
    let spec = FibreBundleSpec::from_id(&job.spec)?;
    let row = TensileRow::find(&spec)
        .ok_or_else(|| CliError::Usage(format!("no tensile targets tabulated for `{}`", job.spec)))?;
    let cal = calibrate_tendon(&row.targets, &spec, &SolverOptions::default())?;
    let mut summary =
        String::from("spec,state,pressure_kPa,peak_force_N,damping_capacity,target_peak_N,target_damping\n");
    let mut checks = Vec::new();
    for state in &job.states {
        let mut model = TendonModel::build(&spec, &cal.params, &JammingState::settled(state.pressure_kpa()))?;
        let hysteresis = run_tension_cycles(&mut model, TEST_AMPLITUDE_MM, TEST_RATE_MM_S, job.cycles, TEST_DT_S)?;
        let report = damping_capacity(&hysteresis)?;
        let target = match state {
            crate::config::TendonState::Unjammed => row.targets.unjammed,
            crate::config::TendonState::Jammed => row.targets.jammed,
        };
        let _ = writeln!(
            summary,
            "{},{},{},{},{},{},{}",
            cal.spec_id,
            state.as_str(),
            state.pressure_kpa(),
            report.peak_force,
            report.capacity,
            target.peak_n,
            target.damping
        );
        bundle.add(format!("hysteresis_{}.csv", state.as_str()), hysteresis.to_csv());
        checks.push(tendon_claim(&cal.spec_id, state.as_str(), &report, &target));
    }
    bundle.add("tendon_summary.csv", summary);
    bundle.add("calibration.json", json(&cal)?);
    Ok(checks)
}

pub fn drop(job: &DropJob, bundle: &mut Bundle) -> CliResult<Vec<Check>> {
    job.rig.validate()?;
    if job.pressures_kpa.is_empty() {
        return Err(CliError::Usage("drop needs at least one pressure".into()));
    }
    let runs: Vec<jamleg_core::Result<TrialRecord>> = job
        .pressures_kpa
        .par_iter()
        .map(|&p| run_drop_test(&job.rig, p))
        .collect();
    let mut summary =
        String::from("pressure_kPa,peak_force_N,peak_contact_force_N,peak_omega_rad_s,first_contact_s,flags\n");
    let mut records = Vec::new();
    for (&p, run) in job.pressures_kpa.iter().zip(runs) {
        let rec = run?;
        let _ = writeln!(
            summary,
            "{p},{},{},{},{},{}",
            rec.metric("peak_force_N"),
            rec.metric("peak_contact_force_N"),
            rec.metric("peak_omega_rad_s"),
            rec.metric("first_contact_s"),
            flags(&rec)
        );
        bundle.add(format!("drop_{p}kPa.csv"), rec.to_csv());
        records.push((p, rec));
    }
    bundle.add("drop_summary.csv", summary);
    Ok(drop_claims(&records))
}

pub fn collide(job: &CollideJob, bundle: &mut Bundle) -> CliResult<Vec<Check>> {
    job.rig.validate()?;
    let trials: Vec<(PerturbMode, JamConfig)> = job
        .modes
        .iter()
        .flat_map(|&m| collision_configs(m).into_iter().map(move |c| (m, c)))
        .collect();
    let runs: Vec<jamleg_core::Result<TrialRecord>> =
        trials.par_iter().map(|(m, c)| run_collision(&job.rig, *m, c)).collect();
    let mut summary = String::from(
        "mode,config,peak_impact_force_N,peak_stored_energy_J,peak_kinetic_J,contact_speed_m_s,settling_time_s,flags\n",
    );
    let mut toe_down = Vec::new();
    for ((mode, config), run) in trials.iter().zip(runs) {
        let rec = run?;
        let _ = writeln!(
            summary,
            "{},{},{},{},{},{},{},{}",
            mode.as_str(),
            config.label(),
            rec.metric("peak_impact_force_N"),
            rec.metric("peak_stored_energy_J"),
            rec.metric("peak_kinetic_J"),
            rec.metric("contact_speed_m_s"),
            rec.metric("settling_time_s"),
            flags(&rec)
        );
        bundle.add(
            format!("collide_{}_{}.csv", mode.as_str(), config.label()),
            rec.to_csv(),
        );
        if *mode == PerturbMode::ToeDown {
            toe_down.push((*config, rec));
        }
    }
    bundle.add("collision_summary.csv", summary);
    Ok(collision_claims(&toe_down))
}

/// Reads a fixture from `JAMLEG_FIXTURES`, or the bundled copy of the
/// published table when the variable is unset.
fn read_fixture(name: &str) -> CliResult<String> {
    match std::env::var_os(FIXTURES_ENV) {
        Some(dir) => {
            let path = PathBuf::from(dir).join(name);
            std::fs::read_to_string(&path).map_err(|_| CliError::MissingFixture(path))
        }
        None if name == "table3.csv" => Ok(TABLE3_FIXTURE.to_string()),
        None => Err(CliError::MissingFixture(PathBuf::from(name))),
    }
}

pub fn perturb(job: &PerturbJob, seed: u64, bundle: &mut Bundle) -> CliResult<Vec<Check>> {
    if job.modes.is_empty() {
        return Err(CliError::Usage("perturb needs at least one mode".into()));
    }
    if job.analysis_only {
        let table = PerturbationTable::parse_csv(&read_fixture(&job.fixture)?)?;
        let rows = job
            .modes
            .iter()
            .map(|&m| Ok((m, contribution_analysis(table.column(m))?)))
            .collect::<CliResult<Vec<_>>>()?;
        bundle.add("contributions.csv", contributions_csv(&rows));
        return Ok(contribution_claims(&rows));
    }
    job.rig.validate()?;
    if job.repeats == 0 || !(job.noise_sd_n >= 0.0) {
        return Err(CliError::Usage("perturb needs repeats ≥ 1 and noise ≥ 0".into()));
    }
    let trials = sweep_trials(&job.modes, job.repeats);
    // Repeats differ only by recorded noise, so each configuration runs once.
    let unique: Vec<(PerturbMode, JamConfig)> = trials
        .iter()
        .filter(|t| t.repeat == 0)
        .map(|t| (t.mode, t.config))
        .collect();
    let runs: Vec<Result<TrialRecord, String>> = unique
        .par_iter()
        .map(|(m, c)| run_perturbation(&job.rig, *m, c).map_err(|e| e.to_string()))
        .collect();
    let outcomes = trials
        .iter()
        .map(|t| {
            let i = unique
                .iter()
                .position(|u| *u == (t.mode, t.config))
                .expect("every trial has a run");
            runs[i].clone()
        })
        .collect();
    for ((m, c), run) in unique.iter().zip(&runs) {
        if let Ok(rec) = run {
            bundle.add(format!("perturb_{}_{}.csv", m.as_str(), c.label()), rec.to_csv());
        }
    }
    let noise = PeakNoise {
        sd_n: job.noise_sd_n,
        seed,
    };
    let table = SweepTable::collate(&trials, outcomes, noise);
    if let Some(row) = table.rows.iter().find(|r| r.peaks.is_empty()) {
        return Err(CliError::Simulation(jamleg_core::Error::Configuration(format!(
            "{} {}: {}",
            row.mode.as_str(),
            row.config.label(),
            row.failures.join("; ")
        ))));
    }
    bundle.add("sweep_summary.csv", table.to_csv());
    let rows = job
        .modes
        .iter()
        .map(|&m| Ok((m, contribution_analysis(&table.force_table(m))?)))
        .collect::<CliResult<Vec<_>>>()?;
    bundle.add("contributions.csv", contributions_csv(&rows));
    Ok(sweep_claims(&table))
}

fn grf_line(label: &str, rec: &TrialRecord, grf: &GrfRecord, out: &mut String) {
    let _ = writeln!(
        out,
        "{label},{},{},{},{},{},{},{},{}",
        grf.cycles.len(),
        grf.touchdown.mean,
        grf.pushoff.mean,
        rec.metric("distinct_fraction"),
        rec.metric("onset_spike_N"),
        rec.metric("swing_peak_N"),
        rec.metric("impulse_ratio"),
        flags(rec)
    );
}

const WALK_METRICS_HEADER: &str =
    "case,stances,touchdown_mean_N,pushoff_mean_N,distinct_fraction,onset_spike_N,swing_peak_N,impulse_ratio,flags\n";

pub fn walk(job: &WalkJob, bundle: &mut Bundle) -> CliResult<Vec<Check>> {
    job.rig.validate()?;
    if job.cases.is_empty() {
        return Err(CliError::Usage("walk needs at least one case".into()));
    }
    let runs: Vec<jamleg_core::Result<TrialRecord>> = job.cases.par_iter().map(|&c| run_walking(&job.rig, c)).collect();
    let mut metrics = String::from(WALK_METRICS_HEADER);
    let mut peaks = Vec::new();
    let mut records = Vec::new();
    for (&case, run) in job.cases.iter().zip(runs) {
        let rec = run?;
        let grf = grf_peaks(&rec, &job.rig.gait)?;
        grf_line(case.as_str(), &rec, &grf, &mut metrics);
        bundle.add(format!("walk_case_{}.csv", case.as_str()), rec.to_csv());
        peaks.push((case, grf));
        records.push((case, rec));
    }
    bundle.add("grf_summary.csv", grf_summary_csv(&peaks));
    bundle.add("walk_metrics.csv", metrics);
    Ok(walking_claims(&records))
}

pub fn analyze(job: &AnalyzeJob, bundle: &mut Bundle) -> CliResult<Vec<Check>> {
    if job.inputs.is_empty() {
        return Err(CliError::Usage("analyze needs at least one input record".into()));
    }
    let gait = GaitSpec {
        cycle_duration_s: job.cycle_duration_s,
        ..GaitSpec::default()
    };
    gait.validate()?;
    let mut peaks = Vec::new();
    let mut checks = Vec::new();
    for path in &job.inputs {
        let label = stem(path)?;
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let rec = TrialRecord::from_csv("walk", &label, &text)?;
        let filtered = filtered_grf(&rec)?;
        let mut csv = String::from("t_s,fr_N\n");
        for (i, v) in filtered.values.iter().enumerate() {
            let _ = writeln!(csv, "{},{v}", rec.t[i]);
        }
        bundle.add(format!("filtered_{label}.csv"), csv);
        let grf = grf_peaks(&rec, &gait)?;
        checks.push(Check::new(
            format!("stances_{label}"),
            !grf.no_contact,
            format!("{} complete stances", grf.cycles.len()),
        ));
        peaks.push((label, grf));
    }
    let labels: Vec<&String> = peaks.iter().map(|p| &p.0).collect();
    if let Some(dup) = labels.iter().enumerate().find(|(i, l)| labels[..*i].contains(l)) {
        return Err(CliError::Usage(format!("two inputs share the name `{}`", dup.1)));
    }
    bundle.add("grf_summary.csv", grf_summary_csv(&peaks));
    Ok(checks)
}

fn stem(path: &Path) -> CliResult<String> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_owned)
        .ok_or_else(|| CliError::Usage(format!("cannot name input {}", path.display())))
}
