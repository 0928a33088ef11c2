//! Collective expectation values for `N` independent, identically distributed
//! atoms, and the single-step energy changes assembled from them.
//!
//! Notation per atom `i`: longitudinal `z_i, p_i`, transverse profile value
//! `w_i` and gradient `g_i = ∇w(ρ_i)`. Collective operators are
//! `N_w = Σ w_i²` and `P_w = Σ w_i p_i`. Single-atom averages:
//! `W = ⟨w²⟩, W4 = ⟨w⁴⟩, G = ⟨|g|²⟩, W2G = ⟨w²|g|²⟩, W4G = ⟨w⁴|g|²⟩`,
//! `Z = ⟨z²⟩, Π = ⟨p²⟩`.
//!
//! Factorization rules. Different atoms are independent and `⟨p⟩ = ⟨z⟩ = 0`,
//! so in a multiple sum only index patterns in which every `p` (and every `z`)
//! index appears an even number of times survive:
//!
//! - `⟨N_w⟩ = N W`
//! - `⟨P_w²⟩ = Σ_ij ⟨w_i w_j p_i p_j⟩ = N W Π`
//! - `⟨N_w P_w²⟩ = Σ_ijk ⟨w_k² w_i p_i w_j p_j⟩ = N W4 Π + N(N−1) W² Π`,
//!   hence `⟨ΔN_w P_w²⟩ = N Π (W4 − W²)`
//! - for fixed `i`: `⟨P_w² X_i⟩ = ⟨w_i² p_i² X_i⟩ + (N−1) W Π ⟨X_i⟩` whenever
//!   `X_i` involves only atom `i` and is even in `p_i`
//! - `⟨p_i P_w X_i⟩ = ⟨w_i p_i² X_i⟩`.
//!
//! Each collective average is validated against direct sampling in
//! [`super::sampling`].
//!
//! Protocol. The outcome `P` of the momentum measurement has noise variance
//! `σ²`; the measurement displaces `z_i` by `q w_i` and `p⊥,i` by `−q p_i g_i`
//! with `q` Gaussian of variance `v = 1/(4σ²)`. The kick then shifts
//! `p_i → p_i − P w_i/N_e` and `p⊥,i → p⊥,i − (P/N_e) z_i g_i`. Averaging the
//! kinetic and potential energies over `q` and the outcome reduces everything
//! to the averages above plus the ordered longitudinal products
//! `¼⟨p² z² + 2 p z² p + z² p²⟩` (own atom inside `P_w²`) and `Im⟨z p⟩`
//! (the commutator of `w_i` with `p⊥,i` in the linear kick term), both read
//! off the thermal kernel.

use serde::{Deserialize, Serialize};

use crate::energy::MeasurementSetting;
use crate::error::OracleError;
use crate::model::{CloudParams, ScaledGeometry};

use super::kernel::ThermalKernel1D;
use super::moments::{transverse_moments, MomentTable, TransverseMoments};
use super::quadrature::RulePair;

/// Collective averages built from a [`MomentTable`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollectiveAverages {
    pub n_atoms: f64,
    pub mean_nw: f64,
    pub pw2: f64,
    pub dnw_pw2: f64,
}

impl CollectiveAverages {
    pub fn new(n_atoms: f64, m: &MomentTable) -> Self {
        let t = &m.transverse;
        Self {
            n_atoms,
            mean_nw: n_atoms * t.w2,
            pw2: n_atoms * t.w2 * m.p2,
            dnw_pw2: n_atoms * m.p2 * (t.w4 - t.w2 * t.w2),
        }
    }
}

/// Longitudinal energy change, split like [`crate::energy::ParallelTerms`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleParallel {
    pub dv_par: f64,
    pub dt_par_meas: f64,
    pub dt_par_cool: f64,
    pub dt_par_fluct: f64,
}

impl OracleParallel {
    pub fn total(&self) -> f64 {
        self.dv_par + self.dt_par_meas + self.dt_par_cool + self.dt_par_fluct
    }
}

/// Transverse energy change in the five-term split of [`crate::energy::PerpTerms`],
/// plus the linear kick contribution that the closed form leaves out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OraclePerp {
    pub terms: [f64; 5],
    /// Symmetrised (phase-space) part of the kick term linear in `P`.
    pub linear_phase_space: f64,
    /// Ordering remainder of the same term, `∝ Im⟨z p⟩`.
    pub linear_ordering: f64,
}

impl OraclePerp {
    pub fn total(&self) -> f64 {
        self.terms.iter().sum()
    }
}

/// Resolution as a momentum variance `σ²` in oscillator units (`Δp0² = 1/2`).
fn sigma_sq(meas: &MeasurementSetting<f64>, mean_nw: f64) -> Result<f64, OracleError> {
    meas.validate()?;
    Ok(match *meas {
        MeasurementSetting::Optimal => 0.5 * mean_nw,
        MeasurementSetting::Explicit { sigma_over_dp0 } => 0.5 * sigma_over_dp0 * sigma_over_dp0,
    })
}

/// `ΔV∥ + ΔT∥` with `N_e = ⟨N_w⟩`.
///
/// `ΔV∥ = ½ Σ ⟨q² w_i²⟩ = v ⟨N_w⟩/2`. With `Δp_i = −P w_i/N_e`,
/// `ΔT∥ = −⟨P P_w⟩/N_e + ⟨P² N_w⟩/(2N_e²)`, and `⟨P P_w⟩ = ⟨P_w²⟩`,
/// `⟨P² N_w⟩ = ⟨P_w² N_w⟩ + σ²⟨N_w⟩`.
pub fn parallel_from_averages(avg: &CollectiveAverages, sigma2: f64) -> OracleParallel {
    let ne = avg.mean_nw;
    let v = 0.25 / sigma2;
    OracleParallel {
        dv_par: 0.5 * v * avg.mean_nw,
        dt_par_meas: sigma2 * avg.mean_nw / (2.0 * ne * ne),
        dt_par_cool: -avg.pw2 / ne + avg.mean_nw * avg.pw2 / (2.0 * ne * ne),
        dt_par_fluct: avg.dnw_pw2 / (2.0 * ne * ne),
    }
}

/// `ΔT⊥ = ½ Σ_i ⟨A_i² |g_i|²⟩` with `A_i = q p_i + (P/N_e)(z_i + q w_i)`, using
/// the averages `⟨q²⟩ = v`, `⟨P⟩ = P_w`, `⟨P²⟩ = P_w² + σ²`:
///
/// 0. `v Π G + Z σ² G/N_e²` (noise on the transverse momenta),
/// 1. `[K + v σ²] W2G/N_e² + 2 v Π W2G/N_e` with `K = ¼⟨p²z² + 2pz²p + z²p²⟩`,
/// 2. `(N−1) Z Π W G/N_e²`,
/// 3. `v Π W4G/N_e²`,
/// 4. `v (N−1) W Π W2G/N_e²`,
///
/// each multiplied by `N/2`. The term linear in `P`, `−(P/N_e) z_i {g_i·p⊥,i}`,
/// has zero symmetrised average but leaves `−N G Im⟨z p⟩/(2 N_e)` from the
/// commutator `[w_i, p⊥,i] = i g_i`.
pub fn perp_from_moments(n: f64, m: &MomentTable, sigma2: f64) -> OraclePerp {
    let t = &m.transverse;
    let ne = n * t.w2;
    let v = 0.25 / sigma2;
    let (z, pi) = (m.z2, m.p2);
    let half_n = 0.5 * n;
    let terms = [
        half_n * (v * pi * t.g2 + z * sigma2 * t.g2 / (ne * ne)),
        half_n
            * ((m.kick_ordered_z2p2 + v * sigma2) * t.w2g2 / (ne * ne)
                + 2.0 * v * pi * t.w2g2 / ne),
        half_n * (n - 1.0) * z * pi * t.w2 * t.g2 / (ne * ne),
        half_n * v * pi * t.w4g2 / (ne * ne),
        half_n * v * (n - 1.0) * t.w2 * pi * t.w2g2 / (ne * ne),
    ];
    OraclePerp {
        terms,
        linear_phase_space: -n * t.g2 * m.re_zp / (2.0 * ne),
        linear_ordering: -n * t.g2 * m.im_zp / (2.0 * ne),
    }
}

/// Oracle evaluation of one `(geometry, cloud, σ)` point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OraclePoint {
    pub moments: MomentTable,
    pub averages: CollectiveAverages,
    pub sigma_sq: f64,
    pub parallel: OracleParallel,
    pub perp: OraclePerp,
}

/// Shared quadrature rules and the thermal kernel for one temperature.
#[derive(Debug, Clone)]
pub struct Oracle {
    pub rules: RulePair,
}

impl Default for Oracle {
    fn default() -> Self {
        Self {
            rules: RulePair::new(128, 1e-10),
        }
    }
}

impl Oracle {
    pub fn transverse(
        &self,
        geom: &ScaledGeometry<f64>,
        cloud: &CloudParams<f64>,
    ) -> Result<TransverseMoments, OracleError> {
        transverse_moments(&self.rules, geom, cloud)
    }

    pub fn evaluate(
        &self,
        geom: &ScaledGeometry<f64>,
        cloud: &CloudParams<f64>,
        meas: &MeasurementSetting<f64>,
        kernel: &ThermalKernel1D,
    ) -> Result<OraclePoint, OracleError> {
        self.evaluate_with(cloud, meas, kernel, self.transverse(geom, cloud)?)
    }

    /// As [`Self::evaluate`] with precomputed transverse moments (they depend
    /// only on `s`, `d` and `l_th²`).
    pub fn evaluate_with(
        &self,
        cloud: &CloudParams<f64>,
        meas: &MeasurementSetting<f64>,
        kernel: &ThermalKernel1D,
        transverse: TransverseMoments,
    ) -> Result<OraclePoint, OracleError> {
        let moments = MomentTable::new(transverse, kernel);
        let averages = CollectiveAverages::new(cloud.n_atoms, &moments);
        let s2 = sigma_sq(meas, averages.mean_nw)?;
        Ok(OraclePoint {
            moments,
            averages,
            sigma_sq: s2,
            parallel: parallel_from_averages(&averages, s2),
            perp: perp_from_moments(cloud.n_atoms, &moments, s2),
        })
    }
}

/// `N ⟨w²⟩` by transverse quadrature.
pub fn oracle_mean_nw(
    geom: &ScaledGeometry<f64>,
    cloud: &CloudParams<f64>,
) -> Result<f64, OracleError> {
    let m = transverse_moments(&Oracle::default().rules, geom, cloud)?;
    Ok(cloud.n_atoms * m.w2)
}

pub fn oracle_delta_e_parallel(
    geom: &ScaledGeometry<f64>,
    cloud: &CloudParams<f64>,
    meas: &MeasurementSetting<f64>,
) -> Result<OracleParallel, OracleError> {
    let kernel = ThermalKernel1D::new(cloud.l_th_sq)?;
    Ok(Oracle::default()
        .evaluate(geom, cloud, meas, &kernel)?
        .parallel)
}

pub fn oracle_delta_e_perp(
    geom: &ScaledGeometry<f64>,
    cloud: &CloudParams<f64>,
    meas: &MeasurementSetting<f64>,
) -> Result<OraclePerp, OracleError> {
    let kernel = ThermalKernel1D::new(cloud.l_th_sq)?;
    Ok(Oracle::default().evaluate(geom, cloud, meas, &kernel)?.perp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{
        delta_e_parallel, delta_e_perp, mean_atoms_in_beam, perp_ordering_correction,
    };

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn reproduces_closed_forms_on_a_few_points() {
        let oracle = Oracle::default();
        for l2 in [3.0, 200.0] {
            let kernel = ThermalKernel1D::new(l2).unwrap();
            for n in [1.0, 10.0, 1e6] {
                let cloud = CloudParams::new(n, l2).unwrap();
                for (s, d) in [(0.5, 3.0), (2.0, 1.0)] {
                    let g = ScaledGeometry::new(s, d).unwrap();
                    for meas in [
                        MeasurementSetting::Optimal,
                        MeasurementSetting::Explicit {
                            sigma_over_dp0: 3.0,
                        },
                    ] {
                        let p = oracle.evaluate(&g, &cloud, &meas, &kernel).unwrap();
                        assert!(rel(p.averages.mean_nw, mean_atoms_in_beam(&g, n)) < 1e-10);
                        let par = delta_e_parallel(&g, &cloud, &meas).unwrap();
                        assert!(rel(p.parallel.total(), par.total()) < 1e-8);
                        let perp = delta_e_perp(&g, &cloud, &meas).unwrap();
                        for k in 0..5 {
                            assert!(
                                rel(p.perp.terms[k], perp.terms[k]) < 1e-6,
                                "term {k} at {s},{d},{n},{l2}"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn single_atom_has_no_pair_terms() {
        let kernel = ThermalKernel1D::new(20.0).unwrap();
        let cloud = CloudParams::new(1.0, 20.0).unwrap();
        let p = Oracle::default()
            .evaluate(
                &ScaledGeometry::new(1.0, 1.0).unwrap(),
                &cloud,
                &MeasurementSetting::Optimal,
                &kernel,
            )
            .unwrap();
        assert_eq!(p.perp.terms[2], 0.0);
        assert_eq!(p.perp.terms[4], 0.0);
    }

    #[test]
    fn wide_beam_leaves_no_fluctuation_heating() {
        let cloud = CloudParams::new(100.0, 20.0).unwrap();
        let p = oracle_delta_e_parallel(
            &ScaledGeometry::new(1e4, 0.0).unwrap(),
            &cloud,
            &MeasurementSetting::Optimal,
        )
        .unwrap();
        assert!(p.dt_par_fluct.abs() < 1e-6);
        assert!((p.total() - (0.5 - 5.0)).abs() < 1e-6);
    }

    #[test]
    fn linear_kick_term_splits_into_zero_and_ordering_parts() {
        for (s, d, l2) in [(1.0, 0.0, 3.0), (0.5, 3.0, 200.0), (5.0, 1.0, 20.0)] {
            let g = ScaledGeometry::new(s, d).unwrap();
            let cloud = CloudParams::new(10.0, l2).unwrap();
            let p = oracle_delta_e_perp(&g, &cloud, &MeasurementSetting::Optimal).unwrap();
            assert!(p.linear_phase_space.abs() < 1e-12);
            assert!(rel(p.linear_ordering, perp_ordering_correction(&g, &cloud)) < 1e-8);
        }
    }
}
