//! Oracle-versus-closed-form verification over a parameter grid.

use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{
    delta_e_parallel, delta_e_perp, mean_atoms_in_beam, perp_ordering_correction,
    MeasurementSetting,
};
use crate::error::OracleError;
use crate::model::{CloudParams, ScaledGeometry};

use super::collective::Oracle;
use super::kernel::{fock_agreement, ThermalKernel1D, MOMENT_TOL, TRACE_TOL};
use super::moments::TransverseMoments;
use super::sampling::sample_collective_averages;

pub const TOL_MEAN_NW: f64 = 1e-10;
pub const TOL_PARALLEL: f64 = 1e-8;
pub const TOL_PERP: f64 = 1e-6;
pub const TOL_ODD_MOMENT: f64 = 1e-12;
pub const TOL_FOCK: f64 = 1e-8;
pub const MAX_Z_SCORE: f64 = 4.0;

/// Parameter sets to compare on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationGrid {
    pub s: Vec<f64>,
    pub d: Vec<f64>,
    pub l_th_sq: Vec<f64>,
    pub n_atoms: Vec<f64>,
    pub measurement: Vec<MeasurementSetting<f64>>,
    /// Temperatures `k_B T/ħω` for the Fock-basis kernel comparison.
    pub fock_kt: Vec<f64>,
    pub fock_levels: usize,
    /// Draws per sampled factorization check (0 disables it).
    pub sampling_draws: usize,
    pub sampling_atoms: Vec<usize>,
}

impl VerificationGrid {
    pub fn full() -> Self {
        Self {
            s: vec![0.5, 1.0, 2.0, 5.0],
            d: vec![0.0, 1.0, 3.0],
            l_th_sq: vec![3.0, 20.0, 200.0],
            n_atoms: vec![1.0, 10.0, 1e6],
            measurement: vec![
                MeasurementSetting::Optimal,
                MeasurementSetting::Explicit {
                    sigma_over_dp0: 3.0,
                },
            ],
            fock_kt: vec![0.3, 1.0, 5.0],
            fock_levels: 200,
            sampling_draws: 10_000_000,
            sampling_atoms: vec![2, 3],
        }
    }

    pub fn quick() -> Self {
        Self {
            s: vec![1.0, 2.0],
            d: vec![0.0, 1.0],
            l_th_sq: vec![20.0],
            n_atoms: vec![10.0],
            measurement: vec![MeasurementSetting::Optimal],
            fock_kt: vec![1.0],
            fock_levels: 200,
            sampling_draws: 1_000_000,
            sampling_atoms: vec![2],
        }
    }
}

/// Closed-form quantity that [`Tamper`] can perturb.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TamperTarget {
    MeanNw,
    DvPar,
    DtParMeas,
    DtParCool,
    DtParFluct,
    PerpTerm(usize),
}

impl FromStr for TamperTarget {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "mean_nw" => Self::MeanNw,
            "dv_par" => Self::DvPar,
            "dt_par_meas" => Self::DtParMeas,
            "dt_par_cool" => Self::DtParCool,
            "dt_par_fluct" => Self::DtParFluct,
            other => match other
                .strip_prefix("perp_term_")
                .and_then(|k| k.parse::<usize>().ok())
            {
                Some(k) if k < 5 => Self::PerpTerm(k),
                _ => return Err(format!("unknown tamper target `{other}`")),
            },
        })
    }
}

/// Negative control: scale one closed-form value before comparing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tamper {
    pub target: TamperTarget,
    pub factor: f64,
}

impl Tamper {
    fn apply(&self, target: TamperTarget, value: f64) -> f64 {
        if self.target == target {
            value * self.factor
        } else {
            value
        }
    }
}

type GeometryChecks = Result<(Vec<Check>, Vec<Diagnostic>), OracleError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub s: f64,
    pub d: f64,
    pub l_th_sq: f64,
    pub n_atoms: f64,
    pub measurement: MeasurementSetting<f64>,
}

impl std::fmt::Display for GridPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "s={} d={} l_th^2={} N={} sigma=",
            self.s, self.d, self.l_th_sq, self.n_atoms
        )?;
        match self.measurement {
            MeasurementSetting::Optimal => write!(f, "opt"),
            MeasurementSetting::Explicit { sigma_over_dp0 } => write!(f, "{sigma_over_dp0}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub point: Option<GridPoint>,
    pub oracle: f64,
    pub reference: f64,
    /// Relative error, absolute error or z-score depending on the check.
    pub achieved: f64,
    pub required: f64,
    pub metric: String,
    pub passed: bool,
}

impl Check {
    fn relative(
        name: impl Into<String>,
        point: Option<GridPoint>,
        oracle: f64,
        reference: f64,
        required: f64,
    ) -> Self {
        let scale = reference.abs().max(oracle.abs());
        let achieved = if scale == 0.0 {
            0.0
        } else {
            (oracle - reference).abs() / scale
        };
        Self {
            name: name.into(),
            point,
            oracle,
            reference,
            achieved,
            required,
            metric: "relative".into(),
            passed: achieved <= required,
        }
    }

    fn absolute(
        name: impl Into<String>,
        point: Option<GridPoint>,
        oracle: f64,
        reference: f64,
        required: f64,
    ) -> Self {
        let achieved = (oracle - reference).abs();
        Self {
            name: name.into(),
            point,
            oracle,
            reference,
            achieved,
            required,
            metric: "absolute".into(),
            passed: achieved <= required,
        }
    }
}

/// Non-gating comparison, reported alongside the checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub name: String,
    pub point: GridPoint,
    pub value: f64,
    pub closed_form: f64,
    /// `value / ΔE⊥` of the closed form at the same point.
    pub fraction_of_perp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub passed: bool,
    pub n_checks: usize,
    pub n_failed: usize,
    pub checks: Vec<Check>,
    pub diagnostics: Vec<Diagnostic>,
}

impl VerificationReport {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// Worst achieved/required ratio among checks whose name starts with `prefix`.
    pub fn worst(&self, prefix: &str) -> Option<&Check> {
        self.checks
            .iter()
            .filter(|c| c.name.starts_with(prefix))
            .max_by(|a, b| (a.achieved / a.required).total_cmp(&(b.achieved / b.required)))
    }
}

const PAR_NAMES: [&str; 4] = ["dv_par", "dt_par_meas", "dt_par_cool", "dt_par_fluct"];
const PAR_TARGETS: [TamperTarget; 4] = [
    TamperTarget::DvPar,
    TamperTarget::DtParMeas,
    TamperTarget::DtParCool,
    TamperTarget::DtParFluct,
];

fn kernel_checks(l2: f64, kernel: &ThermalKernel1D) -> Vec<Check> {
    let m = kernel.moments;
    let tag = |q: &str| format!("kernel.{q}[l_th_sq={l2}]");
    vec![
        Check::absolute(tag("trace"), None, m.trace, 1.0, TRACE_TOL),
        Check::relative(tag("z2"), None, m.z2, 0.5 * l2, MOMENT_TOL),
        Check::relative(tag("p2"), None, m.p2, 0.5 * l2, MOMENT_TOL),
        Check {
            name: tag("uncertainty"),
            point: None,
            oracle: m.z2 * m.p2,
            reference: 0.25,
            achieved: (0.25 - m.z2 * m.p2).max(0.0),
            required: 1e-12,
            metric: "violation".into(),
            passed: m.z2 * m.p2 >= 0.25 - 1e-12,
        },
    ]
}

fn point_checks(
    point: GridPoint,
    oracle: &Oracle,
    kernel: &ThermalKernel1D,
    transverse: &TransverseMoments,
    tamper: Option<Tamper>,
) -> Result<(Vec<Check>, Diagnostic), OracleError> {
    let t = |target, v| tamper.map_or(v, |tp: Tamper| tp.apply(target, v));
    let geom = ScaledGeometry::new(point.s, point.d)?;
    let cloud = CloudParams::new(point.n_atoms, point.l_th_sq)?;
    let meas = point.measurement;
    let p = oracle.evaluate_with(&cloud, &meas, kernel, *transverse)?;
    let mut checks = Vec::new();
    let p_ = Some(point);

    checks.push(Check::relative(
        "mean_nw",
        p_,
        p.averages.mean_nw,
        t(
            TamperTarget::MeanNw,
            mean_atoms_in_beam(&geom, cloud.n_atoms),
        ),
        TOL_MEAN_NW,
    ));

    let par = delta_e_parallel(&geom, &cloud, &meas)?;
    let par_ref = [
        par.dv_par,
        par.dt_par_meas,
        par.dt_par_cool,
        par.dt_par_fluct,
    ];
    let par_orc = [
        p.parallel.dv_par,
        p.parallel.dt_par_meas,
        p.parallel.dt_par_cool,
        p.parallel.dt_par_fluct,
    ];
    let mut par_total = 0.0;
    for k in 0..4 {
        let r = t(PAR_TARGETS[k], par_ref[k]);
        par_total += r;
        checks.push(Check::relative(
            format!("dE_par.{}", PAR_NAMES[k]),
            p_,
            par_orc[k],
            r,
            TOL_PARALLEL,
        ));
    }
    checks.push(Check::relative(
        "dE_par",
        p_,
        p.parallel.total(),
        par_total,
        TOL_PARALLEL,
    ));

    let perp = delta_e_perp(&geom, &cloud, &meas)?;
    let mut perp_total = 0.0;
    for k in 0..5 {
        let r = t(TamperTarget::PerpTerm(k), perp.terms[k]);
        perp_total += r;
        checks.push(Check::relative(
            format!("dE_perp.term{k}"),
            p_,
            p.perp.terms[k],
            r,
            TOL_PERP,
        ));
    }
    checks.push(Check::relative(
        "dE_perp",
        p_,
        p.perp.total(),
        perp_total,
        TOL_PERP,
    ));
    checks.push(Check::absolute(
        "dE_perp.dropped_integral.odd_moment",
        p_,
        p.perp.linear_phase_space,
        0.0,
        TOL_ODD_MOMENT,
    ));

    let correction = perp_ordering_correction(&geom, &cloud);
    let diagnostic = Diagnostic {
        name: "dE_perp.dropped_integral.ordering".into(),
        point,
        value: p.perp.linear_ordering,
        closed_form: correction,
        fraction_of_perp: p.perp.linear_ordering / perp.total(),
    };
    Ok((checks, diagnostic))
}

/// Runs every check of `grid`, with an optional tampered closed-form value.
pub fn run_verification(
    grid: &VerificationGrid,
    tamper: Option<Tamper>,
) -> Result<VerificationReport, OracleError> {
    let oracle = Oracle::default();
    let mut checks = Vec::new();
    let mut diagnostics = Vec::new();

    for &kt in &grid.fock_kt {
        checks.push(Check::absolute(
            format!("kernel.fock_vs_mehler[kT={kt}]"),
            None,
            fock_agreement(kt, grid.fock_levels, 41)?,
            0.0,
            TOL_FOCK,
        ));
    }

    for &l2 in &grid.l_th_sq {
        let kernel = ThermalKernel1D::new(l2)?;
        checks.extend(kernel_checks(l2, &kernel));

        let geoms: Vec<(f64, f64)> = grid
            .s
            .iter()
            .flat_map(|&s| grid.d.iter().map(move |&d| (s, d)))
            .collect();
        let per_geom: Vec<GeometryChecks> = geoms
            .par_iter()
            .map(|&(s, d)| {
                let geom = ScaledGeometry::new(s, d)?;
                let transverse = oracle.transverse(&geom, &CloudParams::new(1.0, l2)?)?;
                let mut c = Vec::new();
                let mut diag = Vec::new();
                for &n in &grid.n_atoms {
                    for &measurement in &grid.measurement {
                        let point = GridPoint {
                            s,
                            d,
                            l_th_sq: l2,
                            n_atoms: n,
                            measurement,
                        };
                        let (pc, pd) = point_checks(point, &oracle, &kernel, &transverse, tamper)?;
                        c.extend(pc);
                        diag.push(pd);
                    }
                }
                Ok((c, diag))
            })
            .collect();
        for r in per_geom {
            let (c, d) = r?;
            checks.extend(c);
            diagnostics.extend(d);
        }
    }

    if grid.sampling_draws > 0 {
        let geom = ScaledGeometry::new(1.0, 1.0)?;
        let l2 = grid.l_th_sq.first().copied().unwrap_or(20.0);
        let cloud = CloudParams::new(1.0, l2)?;
        let transverse = oracle.transverse(&geom, &cloud)?;
        for (k, &n) in grid.sampling_atoms.iter().enumerate() {
            for q in sample_collective_averages(
                &geom,
                &cloud,
                &transverse,
                n,
                grid.sampling_draws,
                0x5eed + k as u64,
            ) {
                let z = q.z_score();
                checks.push(Check {
                    name: format!("factorization.{}[N={n}]", q.name),
                    point: None,
                    oracle: q.expected,
                    reference: q.mean,
                    achieved: z,
                    required: MAX_Z_SCORE,
                    metric: "z_score".into(),
                    passed: z <= MAX_Z_SCORE,
                });
            }
        }
    }

    let n_failed = checks.iter().filter(|c| !c.passed).count();
    Ok(VerificationReport {
        passed: n_failed == 0,
        n_checks: checks.len(),
        n_failed,
        checks,
        diagnostics,
    })
}
