//! The subcommands. Each takes a fully merged [`RunConfig`], writes its run
//! directory and returns the text for standard output.

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use stochcool::boundary::linspace;
use stochcool::energy::perp_ordering_correction;
use stochcool::oracle::{
    run_verification, GridPoint, Tamper, VerificationGrid, VerificationReport,
};
use stochcool::sim::{
    classical_regime_advisory, run_summarized, worker_pool, FeedbackStepRecord, StepSummary,
};
use stochcool::{
    boundary_curve, delta_e_total, delta_e_total_asymptotic, s_min_asymptotic, s_min_numeric,
    BoundaryCurve64, BoundaryMode, CloudParams64, EnergyBudget64, MeasurementSetting64,
    PhasePolicy, ProtocolSetup, RootOptions, ScaledGeometry64,
};

use crate::config::{RangeSpec, ResolvedPhysics, RunConfig, UnitSystem};
use crate::error::CliError;
use crate::output::{num, RunDir};

const DEFAULT_S_RANGE: RangeSpec = RangeSpec {
    min: 0.1,
    max: 10.0,
    points: 100,
    log: true,
};

fn geometry(r: &ResolvedPhysics) -> ScaledGeometry64 {
    r.geometry.expect("geometry resolved")
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, CliError> {
    Ok(worker_pool(workers)?)
}

#[derive(Debug, Serialize)]
pub struct EnergyReport {
    pub units: UnitSystem,
    pub n_atoms: f64,
    pub l_th_sq: f64,
    pub s: f64,
    pub d: f64,
    pub sigma_optimal: bool,
    pub budget: EnergyBudget64,
    /// Back-action plus resolution heating of the longitudinal motion.
    pub measurement_heating: f64,
    pub de_total_asymptotic: f64,
    /// Quantum ordering contribution to the transverse energy, not included in `budget`.
    pub perp_ordering_correction: f64,
}

pub fn energy_report(r: &ResolvedPhysics) -> Result<EnergyReport, CliError> {
    let g = geometry(r);
    let budget = delta_e_total(&g, &r.cloud, &r.measurement)?;
    Ok(EnergyReport {
        units: r.units,
        n_atoms: r.cloud.n_atoms,
        l_th_sq: r.cloud.l_th_sq,
        s: g.s,
        d: g.d,
        sigma_optimal: r.measurement.is_optimal(),
        measurement_heating: budget.dv_par + budget.dt_par_meas,
        de_total_asymptotic: delta_e_total_asymptotic(&g, &r.cloud, &r.measurement)?,
        perp_ordering_correction: perp_ordering_correction(&g, &r.cloud),
        budget,
    })
}

fn energy_table(e: &EnergyReport) -> String {
    let b = &e.budget;
    let mut rows = vec![
        ("<N_w>", b.mean_nw),
        ("sigma/dp0", b.sigma_over_dp0),
        ("dV_par", b.dv_par),
        ("dT_par_meas", b.dt_par_meas),
        ("dT_par_cool", b.dt_par_cool),
        ("dT_par_fluct", b.dt_par_fluct),
        ("dE_par", b.de_par),
    ];
    let names = [
        "dE_perp[0]",
        "dE_perp[1]",
        "dE_perp[2]",
        "dE_perp[3]",
        "dE_perp[4]",
    ];
    rows.extend(names.into_iter().zip(b.de_perp_terms));
    rows.extend([
        ("dE_perp", b.de_perp),
        ("dE_total", b.de_total),
        ("dE_total (N -> inf)", e.de_total_asymptotic),
        ("perp ordering term", e.perp_ordering_correction),
    ]);
    let mut out = format!(
        "N = {}, l_th^2 = {}, s = {}, d = {}, sigma {}\n{:<22}{:>24}\n",
        e.n_atoms,
        e.l_th_sq,
        e.s,
        e.d,
        if e.sigma_optimal {
            "optimal"
        } else {
            "explicit"
        },
        "quantity",
        "quanta"
    );
    for (name, v) in rows {
        out.push_str(&format!("{name:<22}{v:>24.12e}\n"));
    }
    out
}

pub fn cmd_energy(cfg: &RunConfig, print_json: bool) -> Result<String, CliError> {
    let resolved = cfg.physics.resolve(true)?;
    let report = energy_report(&resolved)?;
    let mut run = RunDir::create(cfg.output_dir("energy"))?;
    run.write_json("energy.json", &report)?;
    run.finish("energy", cfg, json!(resolved))?;
    Ok(if print_json {
        serde_json::to_string_pretty(&report).expect("report serializes") + "\n"
    } else {
        energy_table(&report)
    })
}

fn curve_file_name(c: &BoundaryCurve64) -> String {
    format!(
        "boundary_{}_N{}_lthsq{}.csv",
        c.mode.name(),
        num(c.n_atoms),
        num(c.l_th_sq)
    )
}

#[derive(Debug, Serialize)]
struct CurveSummary {
    file: String,
    mode: BoundaryMode,
    n_atoms: f64,
    l_th_sq: f64,
    sigma_optimal: bool,
    samples: usize,
    s_min: Option<f64>,
}

pub fn cmd_boundary(cfg: &RunConfig, workers: usize) -> Result<String, CliError> {
    let s_grid = cfg.grid.s_grid(DEFAULT_S_RANGE)?;
    let clouds = cfg.grid.clouds(&cfg.physics)?;
    let meas = measurement_for_grid(cfg)?;
    let modes = cfg
        .grid
        .modes
        .clone()
        .unwrap_or_else(|| vec![BoundaryMode::LongitudinalOnly, BoundaryMode::Total]);
    let jobs: Vec<(CloudParams64, BoundaryMode)> = clouds
        .iter()
        .flat_map(|c| modes.iter().map(move |&m| (*c, m)))
        .collect();
    let opts = RootOptions::default();
    let curves = pool(workers)?.install(|| {
        jobs.par_iter()
            .map(|(cloud, mode)| boundary_curve(&s_grid, *mode, cloud, &meas, &opts))
            .collect::<Result<Vec<_>, _>>()
    })?;

    let mut run = RunDir::create(cfg.output_dir("boundary"))?;
    let mut out = String::new();
    let mut summaries = Vec::new();
    for c in &curves {
        let name = curve_file_name(c);
        if c.is_empty() {
            eprintln!(
                "warning: {} boundary at N = {}, l_th^2 = {} is empty on this s grid",
                c.mode.name(),
                c.n_atoms,
                c.l_th_sq
            );
        }
        let rows: Vec<Vec<String>> = c
            .samples
            .iter()
            .map(|&(s, d)| {
                vec![
                    num(s),
                    num(d),
                    c.mode.name().to_string(),
                    num(c.n_atoms),
                    num(c.l_th_sq),
                ]
            })
            .collect();
        run.write_csv(&name, &["s", "d", "mode", "N", "l_th_sq"], &rows)?;
        out.push_str(&format!(
            "{name}: {} points, s_min = {}\n",
            c.samples.len(),
            c.s_min.map_or("-".into(), num)
        ));
        summaries.push(CurveSummary {
            file: name,
            mode: c.mode,
            n_atoms: c.n_atoms,
            l_th_sq: c.l_th_sq,
            sigma_optimal: c.sigma_optimal,
            samples: c.samples.len(),
            s_min: c.s_min,
        });
    }
    run.write_json("boundary_summary.json", &summaries)?;
    run.finish(
        "boundary",
        cfg,
        json!({ "s_grid": s_grid, "measurement": meas, "curves": summaries.len() }),
    )?;
    Ok(out)
}

/// Measurement setting for grid commands: only `sigma_over_dp0` (or optimal) is meaningful across clouds.
fn measurement_for_grid(cfg: &RunConfig) -> Result<MeasurementSetting64, CliError> {
    if cfg.physics.sigma.is_some() {
        return Err(CliError::config(
            "grid commands take the resolution as `sigma_over_dp0`, not SI `sigma`",
        ));
    }
    Ok(match cfg.physics.sigma_over_dp0 {
        Some(v) => MeasurementSetting64::explicit(v)?,
        None => MeasurementSetting64::Optimal,
    })
}

/// `l_th² = 2 + ε` for `ε` geometric in `[1e-3, 98]`.
fn default_smin_grid() -> Vec<f64> {
    RangeSpec {
        min: 1e-3,
        max: 98.0,
        points: 120,
        log: true,
    }
    .values()
    .expect("valid range")
    .into_iter()
    .map(|e| 2.0 + e)
    .collect()
}

pub fn cmd_smin(cfg: &RunConfig, workers: usize) -> Result<String, CliError> {
    if cfg.physics.unit_system()? == UnitSystem::Si {
        return Err(CliError::config(
            "smin sweeps l_th^2 in trap units; remove the SI physics fields",
        ));
    }
    let l2_grid = cfg.grid.l_th_sq.clone().unwrap_or_else(default_smin_grid);
    let atoms = cfg.grid.n_atoms.clone().unwrap_or_default();
    let meas = measurement_for_grid(cfg)?;
    let opts = RootOptions::default();
    let rows = pool(workers)?.install(|| {
        l2_grid
            .par_iter()
            .map(|&l2| -> Result<Vec<String>, CliError> {
                let mut row = vec![num(l2), s_min_asymptotic(l2).map_or(String::new(), num)];
                for &n in &atoms {
                    let cloud = CloudParams64::new(n, l2)?;
                    let s =
                        s_min_numeric(BoundaryMode::Total, &cloud, &meas, &opts, (1e-2, 1e3), 200)?;
                    row.push(s.map_or(String::new(), num));
                }
                Ok(row)
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    let mut header = vec!["l_th_sq".to_string(), "s_min_asymptotic".to_string()];
    header.extend(atoms.iter().map(|n| format!("s_min_N{}", num(*n))));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut run = RunDir::create(cfg.output_dir("smin"))?;
    run.write_csv("smin.csv", &header, &rows)?;
    run.finish(
        "smin",
        cfg,
        json!({ "l_th_sq": l2_grid, "n_atoms": atoms, "measurement": meas }),
    )?;
    Ok(format!("smin.csv: {} rows\n", rows.len()))
}

pub fn parse_tamper(arg: &str) -> Result<Tamper, CliError> {
    let (target, factor) = arg
        .split_once('=')
        .ok_or_else(|| CliError::config(format!("tamper `{arg}` must be `target=factor`")))?;
    let factor: f64 = factor
        .parse()
        .map_err(|_| CliError::config(format!("tamper factor `{factor}` is not a number")))?;
    Ok(Tamper {
        target: target.parse().map_err(CliError::Config)?,
        factor,
    })
}

fn point_label(point: Option<&GridPoint>) -> String {
    point.map_or_else(|| "grid-independent".to_string(), ToString::to_string)
}

fn verify_table(report: &VerificationReport) -> String {
    let mut names: Vec<&str> = Vec::new();
    for c in &report.checks {
        if !names.contains(&c.name.as_str()) {
            names.push(&c.name);
        }
    }
    let mut out = format!(
        "{:<44}{:>8}{:>14}{:>12}  status\n",
        "check", "count", "worst", "required"
    );
    for name in names {
        let group: Vec<_> = report.checks.iter().filter(|c| c.name == name).collect();
        let worst = group
            .iter()
            .max_by(|a, b| (a.achieved / a.required).total_cmp(&(b.achieved / b.required)))
            .expect("non-empty");
        let ok = group.iter().all(|c| c.passed);
        out.push_str(&format!(
            "{name:<44}{:>8}{:>14.3e}{:>12.1e}  {}\n",
            group.len(),
            worst.achieved,
            worst.required,
            if ok { "PASS" } else { "FAIL" }
        ));
    }
    for d in &report.diagnostics {
        out.push_str(&format!(
            "diagnostic {} at {}: {:.6e} (closed form {:.6e})\n",
            d.name, d.point, d.value, d.closed_form
        ));
    }
    out.push_str(&format!(
        "{} checks, {} failed\n",
        report.n_checks, report.n_failed
    ));
    out
}

pub fn cmd_verify(cfg: &RunConfig, workers: usize) -> Result<String, CliError> {
    let grid = if cfg.verify.quick {
        VerificationGrid::quick()
    } else {
        VerificationGrid::full()
    };
    let tamper = cfg.verify.tamper.as_deref().map(parse_tamper).transpose()?;
    let report = pool(workers)?.install(|| run_verification(&grid, tamper))?;
    let mut run = RunDir::create(cfg.output_dir("verify"))?;
    run.write_json("verify.json", &report)?;
    run.finish("verify", cfg, json!({ "grid": grid, "tamper": tamper }))?;
    let table = verify_table(&report);
    if report.passed {
        Ok(table)
    } else {
        print!("{table}");
        for c in report.failures().take(20) {
            eprintln!(
                "FAIL {} at {}: achieved {:e}, required {:e}",
                c.name,
                point_label(c.point.as_ref()),
                c.achieved,
                c.required
            );
        }
        Err(CliError::Verification {
            failed: report.n_failed,
            total: report.n_checks,
        })
    }
}

pub const DEFAULT_REPLICAS: usize = 1000;
pub const DEFAULT_TRAJECTORIES: usize = 100;

#[derive(Debug, Serialize)]
pub struct Comparison {
    pub simulated: f64,
    pub std_error: f64,
    pub closed_form: f64,
    pub z_score: f64,
}

impl Comparison {
    fn new(m: &stochcool::sim::MeanSe, closed_form: f64) -> Self {
        Self {
            simulated: m.mean,
            std_error: m.std_error,
            closed_form,
            z_score: m.z_score(closed_form),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SimulateSummary {
    pub replicas: usize,
    pub steps: usize,
    pub n_atoms: usize,
    pub l_th_sq: f64,
    pub s: f64,
    pub d: f64,
    pub sigma_over_dp0: f64,
    pub n_effective: f64,
    pub advisory: Option<String>,
    /// Closed-form budget for a thermal state; applies to the first step when `n_effective = <N_w>`.
    pub prediction: EnergyBudget64,
    pub prediction_applies: bool,
    pub first_step: Option<FirstStepComparison>,
    pub per_step: Vec<StepSummary>,
}

#[derive(Debug, Serialize)]
pub struct FirstStepComparison {
    pub dv_par: Comparison,
    pub dt_par: Comparison,
    pub de_perp: Comparison,
    pub de_total: Comparison,
}

fn phase_policy(phase: Option<f64>) -> PhasePolicy<f64> {
    phase.map_or(PhasePolicy::Random, |phase| PhasePolicy::Fixed { phase })
}

pub fn cmd_simulate(cfg: &RunConfig, workers: usize) -> Result<String, CliError> {
    let resolved = cfg.physics.resolve(true)?;
    let g = geometry(&resolved);
    let sc = &cfg.simulate;
    let replicas = sc.replicas.unwrap_or(DEFAULT_REPLICAS);
    let steps = sc.steps.unwrap_or(1);
    if replicas < 2 || steps == 0 {
        return Err(CliError::config(
            "simulate needs `replicas` >= 2 and `steps` >= 1",
        ));
    }
    let keep = sc
        .trajectories
        .unwrap_or(DEFAULT_TRAJECTORIES)
        .min(replicas);
    let setup = ProtocolSetup::gaussian(
        &g,
        &resolved.cloud,
        &resolved.measurement,
        sc.n_effective,
        phase_policy(sc.phase),
    )?;
    let advisory = classical_regime_advisory(&resolved.cloud);
    if let Some(a) = &advisory {
        eprintln!("advisory: {a}");
    }
    let seed = cfg.seed();
    let result = pool(workers)?.install(|| run_summarized(&setup, 0, replicas, steps, seed, keep));

    let prediction = delta_e_total(&g, &resolved.cloud, &resolved.measurement)?;
    let prediction_applies = (setup.n_effective / prediction.mean_nw - 1.0).abs() < 1e-12;
    let first_step = prediction_applies.then(|| {
        let s = &result.summary[0];
        FirstStepComparison {
            dv_par: Comparison::new(&s.dv_par, prediction.dv_par),
            dt_par: Comparison::new(
                &s.dt_par,
                prediction.dt_par_meas + prediction.dt_par_cool + prediction.dt_par_fluct,
            ),
            de_perp: Comparison::new(&s.de_perp, prediction.de_perp),
            de_total: Comparison::new(&s.de_total, prediction.de_total),
        }
    });
    let summary = SimulateSummary {
        replicas,
        steps,
        n_atoms: setup.n_atoms,
        l_th_sq: resolved.cloud.l_th_sq,
        s: g.s,
        d: g.d,
        sigma_over_dp0: prediction.sigma_over_dp0,
        n_effective: setup.n_effective,
        advisory,
        prediction,
        prediction_applies,
        first_step,
        per_step: result.summary,
    };

    let rows: Vec<Vec<String>> = result
        .kept
        .iter()
        .enumerate()
        .flat_map(|(i, recs)| recs.iter().map(move |r| trajectory_row(i, r)))
        .collect();
    let mut run = RunDir::create(cfg.output_dir("simulate"))?;
    run.write_csv(
        "trajectories.csv",
        &[
            "replica",
            "step",
            "E_par",
            "E_perp",
            "measured_P",
            "dE_total",
        ],
        &rows,
    )?;
    run.write_json("summary.json", &summary)?;
    run.finish("simulate", cfg, json!({ "physics": resolved, "replicas": replicas, "steps": steps, "trajectories": keep, "n_effective": setup.n_effective, "phase": setup.phase }))?;

    let mut out = format!(
        "{replicas} replicas x {steps} steps, N = {}, l_th^2 = {}\n",
        setup.n_atoms, resolved.cloud.l_th_sq
    );
    for s in summary.per_step.iter().take(10) {
        out.push_str(&format!(
            "step {:>4}: mean dE_total = {:.6e} +- {:.2e}\n",
            s.step, s.de_total.mean, s.de_total.std_error
        ));
    }
    if let Some(f) = &summary.first_step {
        out.push_str(&format!(
            "closed form dE_total = {:.6e} (z = {:.2})\n",
            f.de_total.closed_form, f.de_total.z_score
        ));
    }
    Ok(out)
}

/// Energies after the kick of that step; `dE_total` is after minus before.
fn trajectory_row(replica: usize, r: &FeedbackStepRecord<f64>) -> Vec<String> {
    vec![
        replica.to_string(),
        r.step.to_string(),
        num(r.after.e_par()),
        num(r.after.e_perp()),
        num(r.measured_p),
        num(r.de_total()),
    ]
}

pub fn cmd_sweep(cfg: &RunConfig, workers: usize) -> Result<String, CliError> {
    let s_values = cfg.grid.s_grid(RangeSpec {
        min: 0.5,
        max: 5.0,
        points: 10,
        log: true,
    })?;
    let d_values = cfg
        .grid
        .d_values
        .clone()
        .unwrap_or_else(|| linspace(0.0, 3.0, 4));
    let clouds = cfg.grid.clouds(&cfg.physics)?;
    let meas = measurement_for_grid(cfg)?;
    let replicas = cfg.simulate.replicas.unwrap_or(0);
    let steps = cfg.simulate.steps.unwrap_or(1);
    if replicas == 1 || (replicas > 0 && steps == 0) {
        return Err(CliError::config(
            "sweep with simulation needs `replicas` >= 2 and `steps` >= 1",
        ));
    }
    let mut points: Vec<(CloudParams64, f64, f64)> = Vec::new();
    for c in &clouds {
        for &s in &s_values {
            points.extend(d_values.iter().map(|&d| (*c, s, d)));
        }
    }
    let seed = cfg.seed();
    let phase = phase_policy(cfg.simulate.phase);
    let rows = pool(workers)?.install(|| {
        points
            .par_iter()
            .enumerate()
            .map(|(k, (cloud, s, d))| -> Result<Vec<String>, CliError> {
                let g = ScaledGeometry64::new(*s, *d)?;
                let b = delta_e_total(&g, cloud, &meas)?;
                let mut row = vec![
                    num(*s),
                    num(*d),
                    num(cloud.n_atoms),
                    num(cloud.l_th_sq),
                    num(b.sigma_over_dp0),
                    num(b.mean_nw),
                    num(b.de_par),
                    num(b.de_perp),
                    num(b.de_total),
                    num(delta_e_total_asymptotic(&g, cloud, &meas)?),
                ];
                if replicas > 0 {
                    let setup =
                        ProtocolSetup::gaussian(&g, cloud, &meas, cfg.simulate.n_effective, phase)?;
                    let first = (k * replicas) as u64;
                    let last = run_summarized(&setup, first, replicas, steps, seed, 0).summary;
                    let s = last.last().expect("at least one step");
                    let mean: f64 = last.iter().map(|x| x.de_total.mean).sum();
                    row.extend([
                        num(mean),
                        num(s.e_total_after.mean),
                        num(s.e_total_after.std_error),
                    ]);
                }
                Ok(row)
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    let mut header = vec![
        "s",
        "d",
        "N",
        "l_th_sq",
        "sigma_over_dp0",
        "mean_nw",
        "dE_par",
        "dE_perp",
        "dE_total",
        "dE_total_asymptotic",
    ];
    if replicas > 0 {
        header.extend(["sim_dE_cumulative", "sim_E_final", "sim_E_final_se"]);
    }
    let mut run = RunDir::create(cfg.output_dir("sweep"))?;
    run.write_csv("sweep.csv", &header, &rows)?;
    run.finish(
        "sweep",
        cfg,
        json!({ "s": s_values, "d": d_values, "clouds": clouds.len(), "measurement": meas, "replicas": replicas, "steps": steps }),
    )?;
    Ok(format!("sweep.csv: {} points\n", rows.len()))
}
