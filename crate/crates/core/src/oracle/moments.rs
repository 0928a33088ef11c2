//! Single-atom transverse averages of beam-profile powers and squared gradients.
//!
//! The transverse density is Gaussian with rms `L` per axis; the profile is
//! `w(ρ) = exp(−|ρ − ρ0|²/(2 r0²))`, so any integrand `n(ρ) wᵐ(ρ) × polynomial`
//! is a product Gaussian times a polynomial. Each average is therefore taken
//! with Gauss–Hermite nodes placed on that product envelope, and the integrand
//! divided by the envelope density is evaluated pointwise.

use serde::{Deserialize, Serialize};

use crate::error::OracleError;
use crate::model::{BeamGeometry, CloudParams, ScaledGeometry};

use super::kernel::ThermalKernel1D;
use super::quadrature::{GaussHermite, RulePair};

/// `⟨wᵏ |∇w|^{2j}⟩` for the combinations entering the energy changes. Lengths
/// in oscillator units; `L² = l_th²/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransverseMoments {
    pub w2: f64,
    pub w4: f64,
    pub g2: f64,
    pub w2g2: f64,
    pub w4g2: f64,
}

/// Transverse and longitudinal single-atom moments for one geometry and temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentTable {
    pub transverse: TransverseMoments,
    pub z2: f64,
    pub p2: f64,
    pub im_zp: f64,
    pub re_zp: f64,
    pub anticomm_z2p2: f64,
    pub kick_ordered_z2p2: f64,
}

impl MomentTable {
    pub fn new(transverse: TransverseMoments, kernel: &ThermalKernel1D) -> Self {
        let m = kernel.moments;
        Self {
            transverse,
            z2: m.z2,
            p2: m.p2,
            im_zp: m.im_zp,
            re_zp: m.re_zp,
            anticomm_z2p2: m.anticomm_z2p2,
            kick_ordered_z2p2: m.kick_ordered_z2p2(),
        }
    }
}

/// `E[n · wᵐ · h(ρ − ρ0)]`, the Gaussian factors combined in the log domain so
/// that far quadrature nodes neither underflow nor overflow.
fn envelope_average(
    rule: &GaussHermite,
    beam: &BeamGeometry<f64>,
    l: f64,
    power: f64,
    h: impl Fn(f64, f64) -> f64,
) -> f64 {
    let r2 = beam.r0 * beam.r0;
    let precision = 1.0 / (l * l) + power / r2;
    let sd = precision.sqrt().recip();
    let mean_x = power * beam.x0 / r2 / precision;
    let mean_y = power * beam.y0 / r2 / precision;
    let log_norm = |u: f64, mu: f64, s: f64| {
        -0.5 * ((u - mu) / s).powi(2) - (s * (2.0 * std::f64::consts::PI).sqrt()).ln()
    };
    rule.expect_2d((mean_x, sd), (mean_y, sd), |x, y| {
        let (dx, dy) = (x - beam.x0, y - beam.y0);
        let log_w = -(dx * dx + dy * dy) / (2.0 * r2);
        let log_ratio = log_norm(x, 0.0, l) + log_norm(y, 0.0, l) + power * log_w
            - log_norm(x, mean_x, sd)
            - log_norm(y, mean_y, sd);
        log_ratio.exp() * h(dx, dy)
    })
}

/// All [`TransverseMoments`] with order-doubling convergence checks.
///
/// `|∇w|² = w² |ρ − ρ0|²/r0⁴`, so each gradient moment is a profile power two
/// higher times that polynomial.
pub fn transverse_moments(
    rules: &RulePair,
    geom: &ScaledGeometry<f64>,
    cloud: &CloudParams<f64>,
) -> Result<TransverseMoments, OracleError> {
    let l = (0.5 * cloud.l_th_sq).sqrt();
    let beam = geom.to_beam(l);
    let r4 = beam.r0.powi(4);
    let avg = |quantity, power: f64, with_gradient: bool| {
        rules.converged(quantity, |rule| {
            envelope_average(rule, &beam, l, power, |dx, dy| {
                if with_gradient {
                    (dx * dx + dy * dy) / r4
                } else {
                    1.0
                }
            })
        })
    };
    Ok(TransverseMoments {
        w2: avg("<w^2>", 2.0, false)?,
        w4: avg("<w^4>", 4.0, false)?,
        g2: avg("<|grad w|^2>", 2.0, true)?,
        w2g2: avg("<w^2 |grad w|^2>", 4.0, true)?,
        w4g2: avg("<w^4 |grad w|^2>", 6.0, true)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::mean_atoms_in_beam;

    fn rules() -> RulePair {
        RulePair::new(128, 1e-10)
    }

    fn cloud(l2: f64) -> CloudParams<f64> {
        CloudParams::new(1.0, l2).unwrap()
    }

    #[test]
    fn closed_form_examples_for_w2() {
        let m = transverse_moments(
            &rules(),
            &ScaledGeometry::new(1.0, 0.0).unwrap(),
            &cloud(20.0),
        )
        .unwrap();
        assert!((m.w2 - 1.0 / 3.0).abs() < 1e-14);
        let s = std::f64::consts::SQRT_2;
        let m =
            transverse_moments(&rules(), &ScaledGeometry::new(s, s).unwrap(), &cloud(3.0)).unwrap();
        assert!((m.w2 / (0.5 * (-0.5f64).exp()) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn w2_matches_mean_atom_number_on_random_geometries() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let r = rules();
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let g = ScaledGeometry::new(rng.random_range(0.3..30.0), rng.random_range(0.0..10.0))
                .unwrap();
            let l2 = rng.random_range(1.0..1e4);
            let m = transverse_moments(&r, &g, &cloud(l2)).unwrap();
            worst = worst.max((m.w2 / mean_atoms_in_beam(&g, 1.0) - 1.0).abs());
        }
        assert!(worst < 1e-10, "{worst:e}");
    }

    #[test]
    fn gradient_moment_against_its_own_gaussian_integral() {
        // Centred beam: ⟨|∇w|²⟩ = ⟨w² ρ²⟩/r0⁴ = 2 (L²r0²/(r0²+2L²))·a / r0⁴ with a = r0²/(r0²+2L²)
        let (s, l2) = (1.7, 40.0);
        let m = transverse_moments(&rules(), &ScaledGeometry::new(s, 0.0).unwrap(), &cloud(l2))
            .unwrap();
        let l = (0.5 * l2).sqrt();
        let r0 = s * l;
        let v = r0 * r0 + 2.0 * l * l;
        let expected = 2.0 * (l * l * r0 * r0 / v) * (r0 * r0 / v) / r0.powi(4);
        assert!((m.g2 / expected - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_identity_matches_the_profile_derivative() {
        let beam = BeamGeometry::<f64>::new(0.8, 0.3, -0.2).unwrap();
        for (x, y) in [(0.0f64, 0.0f64), (1.0, -0.5), (-0.4, 0.9)] {
            let (w, gx, gy) = beam.profile_and_gradient(x, y);
            let h = 1e-5;
            let fx = (beam.profile(x + h, y) - beam.profile(x - h, y)) / (2.0 * h);
            let fy = (beam.profile(x, y + h) - beam.profile(x, y - h)) / (2.0 * h);
            assert!((gx - fx).abs() < 1e-9 && (gy - fy).abs() < 1e-9);
            let rho2 = (x - 0.3f64).powi(2) + (y + 0.2f64).powi(2);
            assert!((gx * gx + gy * gy - w * w * rho2 / 0.8f64.powi(4)).abs() < 1e-14);
        }
    }

    #[test]
    fn all_moments_positive_and_ordered() {
        for (s, d) in [(0.5, 0.0), (0.5, 3.0), (2.0, 1.0), (5.0, 3.0)] {
            let m =
                transverse_moments(&rules(), &ScaledGeometry::new(s, d).unwrap(), &cloud(200.0))
                    .unwrap();
            for v in [m.w2, m.w4, m.g2, m.w2g2, m.w4g2] {
                assert!(v > 0.0 && v.is_finite());
            }
            assert!(m.w4 < m.w2 && m.w4g2 < m.w2g2 && m.w2g2 < m.g2);
            assert!(m.w4 >= m.w2 * m.w2);
        }
    }
}
