//! Classical phase-space state of the trapped atoms in oscillator units.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::model::CloudParams;
use crate::scalar::{c, Scalar};

/// Axis indices into the per-atom `[T; 3]` arrays.
pub const X: usize = 0;
pub const Y: usize = 1;
pub const Z: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleState<T> {
    pub positions: Vec<[T; 3]>,
    pub momenta: Vec<[T; 3]>,
    /// Accumulated trap phase `ωt` in radians.
    pub time: T,
}

/// Energies in quanta, split by direction and kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyComponents<T> {
    pub v_par: T,
    pub t_par: T,
    pub v_perp: T,
    pub t_perp: T,
}

impl<T: Scalar> EnergyComponents<T> {
    pub fn e_par(&self) -> T {
        self.v_par + self.t_par
    }

    pub fn e_perp(&self) -> T {
        self.v_perp + self.t_perp
    }

    pub fn total(&self) -> T {
        self.e_par() + self.e_perp()
    }
}

impl<T: Scalar> EnsembleState<T> {
    pub fn n_atoms(&self) -> usize {
        self.positions.len()
    }

    pub fn energy(&self) -> EnergyComponents<T> {
        let half = c::<T>(0.5);
        let mut e = EnergyComponents::default();
        for (r, p) in self.positions.iter().zip(&self.momenta) {
            e.v_par = e.v_par + half * r[Z] * r[Z];
            e.t_par = e.t_par + half * p[Z] * p[Z];
            e.v_perp = e.v_perp + half * (r[X] * r[X] + r[Y] * r[Y]);
            e.t_perp = e.t_perp + half * (p[X] * p[X] + p[Y] * p[Y]);
        }
        e
    }

    /// `Σ p_z`.
    pub fn total_z_momentum(&self) -> T {
        self.momenta.iter().fold(T::zero(), |acc, p| acc + p[Z])
    }
}

/// Independent Gaussian coordinates and momenta, each with variance `l_th²/2`.
pub fn sample_thermal<T: Scalar, R: Rng + ?Sized>(
    cloud: &CloudParams<T>,
    n_atoms: usize,
    rng: &mut R,
) -> EnsembleState<T> {
    let sd = (c::<T>(0.5) * cloud.l_th_sq).sqrt();
    let mut draw = || -> [T; 3] {
        std::array::from_fn(|_| {
            let u: f64 = StandardNormal.sample(rng);
            sd * c::<T>(u)
        })
    };
    let mut positions = Vec::with_capacity(n_atoms);
    let mut momenta = Vec::with_capacity(n_atoms);
    for _ in 0..n_atoms {
        positions.push(draw());
        momenta.push(draw());
    }
    EnsembleState {
        positions,
        momenta,
        time: T::zero(),
    }
}

/// Below this `l_th²` the classical sampling misrepresents the zero-point spread.
pub const CLASSICAL_ADVISORY_L_TH_SQ: f64 = 10.0;

pub fn classical_regime_advisory<T: Scalar>(cloud: &CloudParams<T>) -> Option<String> {
    (cloud.l_th_sq.to_f64_lossy() < CLASSICAL_ADVISORY_L_TH_SQ).then(|| {
        format!(
            "l_th^2 = {} is below {CLASSICAL_ADVISORY_L_TH_SQ}; classical phase-space sampling is only approximate here",
            cloud.l_th_sq
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn same_seed_same_state() {
        let cloud = CloudParams::new(50.0, 20.0).unwrap();
        let a = sample_thermal(&cloud, 50, &mut ChaCha8Rng::seed_from_u64(9));
        let b = sample_thermal(&cloud, 50, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn marginals_have_the_thermal_width() {
        let n = 1_000_000;
        let l2 = 40.0;
        let cloud = CloudParams::new(n as f64, l2).unwrap();
        let st: EnsembleState<f64> = sample_thermal(&cloud, n, &mut ChaCha8Rng::seed_from_u64(1));
        let var = 0.5 * l2;
        let tol = 4.0 * var * (2.0 / n as f64).sqrt();
        for axis in 0..3 {
            let mz2 = st.positions.iter().map(|r| r[axis] * r[axis]).sum::<f64>() / n as f64;
            let mp2 = st.momenta.iter().map(|p| p[axis] * p[axis]).sum::<f64>() / n as f64;
            assert!((mz2 - var).abs() < tol && (mp2 - var).abs() < tol);
            // fourth moment of a normal: 3 var²
            let m4 = st.positions.iter().map(|r| r[axis].powi(4)).sum::<f64>() / n as f64;
            assert!((m4 / (3.0 * var * var) - 1.0).abs() < 4.0 * (96.0 / 9.0 / n as f64).sqrt());
        }
        // equipartition: six quadratic terms of l_th²/4 each
        let per_atom = st.energy().total() / n as f64;
        let sd = (6.0f64).sqrt() * (0.5 * var);
        assert!((per_atom - 1.5 * l2).abs() < 4.0 * sd / (n as f64).sqrt() * 2f64.sqrt());
    }

    #[test]
    fn advisory_only_for_cold_clouds() {
        assert!(classical_regime_advisory(&CloudParams::new(10.0, 3.0).unwrap()).is_some());
        assert!(classical_regime_advisory(&CloudParams::new(10.0, 200.0).unwrap()).is_none());
    }

    #[test]
    fn f32_sampling() {
        let cloud = CloudParams::<f32>::new(10.0, 20.0).unwrap();
        let st = sample_thermal(&cloud, 10, &mut ChaCha8Rng::seed_from_u64(2));
        assert!(st.energy().total().is_finite());
    }
}
