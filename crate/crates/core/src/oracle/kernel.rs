//! Position-representation density matrix of one longitudinal oscillator
//! degree of freedom in thermal equilibrium, in oscillator units
//! (`ħ = m = ω = 1`, so `Δz0² = Δp0² = 1/2`).
//!
//! Operator moments are obtained from the kernel alone: diagonal integrals by
//! the trapezoid rule (spectrally accurate for these Gaussian integrands) and
//! momentum operators as finite-difference derivatives in `z` and `z'`,
//! Richardson-extrapolated over three step sizes.

use crate::error::{ModelError, OracleError};
use crate::model::{l_th_squared, natural_scales, TrapEnsembleParams};

use super::quadrature::relative_change;

/// Something with a position-space density matrix `ρ(z, z')`.
pub trait DensityKernel {
    fn rho(&self, z: f64, zp: f64) -> f64;
    /// Rms width of the diagonal `ρ(z, z)`.
    fn position_rms(&self) -> f64;
    /// Length over which `ρ` decays in `z − z'`.
    fn coherence_length(&self) -> f64;
}

/// Mehler form `ρ(z,z') = (2πL²)^{-1/2} exp[−(z+z')²/(8L²) − p2 (z−z')²/2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalKernel1D {
    pub l: f64,
    pub p2: f64,
    pub grid: TrapezoidGrid,
    pub moments: KernelMoments,
}

impl DensityKernel for ThermalKernel1D {
    fn rho(&self, z: f64, zp: f64) -> f64 {
        mehler(self.l, self.p2, z, zp)
    }
    fn position_rms(&self) -> f64 {
        self.l
    }
    fn coherence_length(&self) -> f64 {
        self.p2.sqrt().recip()
    }
}

fn mehler(l: f64, p2: f64, z: f64, zp: f64) -> f64 {
    let sum = z + zp;
    let diff = z - zp;
    (-(sum * sum) / (8.0 * l * l) - 0.5 * p2 * diff * diff).exp()
        / (2.0 * std::f64::consts::PI * l * l).sqrt()
}

/// Tolerances of the construction-time checks.
pub const TRACE_TOL: f64 = 1e-10;
pub const MOMENT_TOL: f64 = 1e-8;

impl ThermalKernel1D {
    /// Kernel at `l_th² = coth(ω/2k_BT)`; both `⟨z²⟩` and `⟨p²⟩` equal `l_th²/2`.
    ///
    /// Fails if the trace or either second moment computed from the kernel is off.
    pub fn new(l_th_sq: f64) -> Result<Self, OracleError> {
        if !(l_th_sq >= 1.0) || !l_th_sq.is_finite() {
            return Err(ModelError::InvalidParameter {
                field: "l_th_sq",
                value: l_th_sq,
            }
            .into());
        }
        let l = (0.5 * l_th_sq).sqrt();
        let p2 = 0.5 * l_th_sq;
        let mut kernel = Self {
            l,
            p2,
            grid: TrapezoidGrid::for_width(l),
            moments: KernelMoments::default(),
        };
        let moments = kernel_moments(&kernel, &kernel.grid);
        let checks = [
            ("trace", moments.trace, 1.0, TRACE_TOL),
            ("z2", moments.z2, l * l, MOMENT_TOL),
            ("p2", moments.p2, p2, MOMENT_TOL),
        ];
        for (check, got, expected, tol) in checks {
            if !(relative_change(got, expected) <= tol) {
                return Err(OracleError::KernelCheck {
                    check,
                    got,
                    expected,
                });
            }
        }
        kernel.moments = moments;
        Ok(kernel)
    }

    pub fn from_kt_over_omega(kt_over_omega: f64) -> Result<Self, OracleError> {
        Self::new(l_th_squared(0.5 / kt_over_omega))
    }
}

/// Thermal kernel for the trap parameters, in oscillator units.
pub fn build_thermal_kernel(
    params: &TrapEnsembleParams<f64>,
) -> Result<ThermalKernel1D, OracleError> {
    let scales = natural_scales(params)?;
    ThermalKernel1D::new(scales.l_th_sq())
}

/// Boltzmann-weighted sum over the lowest `levels` Hermite functions.
#[derive(Debug, Clone, PartialEq)]
pub struct FockKernel {
    probabilities: Vec<f64>,
    l: f64,
    coherence: f64,
}

impl FockKernel {
    pub fn new(kt_over_omega: f64, levels: usize) -> Self {
        let beta = kt_over_omega.recip();
        let norm = -(-beta).exp_m1();
        let probabilities = (0..levels)
            .map(|n| norm * (-beta * n as f64).exp())
            .collect();
        let l_th_sq = l_th_squared(0.5 * beta);
        Self {
            probabilities,
            l: (0.5 * l_th_sq).sqrt(),
            coherence: (2.0 / l_th_sq).sqrt(),
        }
    }

    pub fn levels(&self) -> usize {
        self.probabilities.len()
    }
}

/// `ψ_n(z)` for `n < levels`, `ψ_{n+1} = sqrt(2/(n+1)) z ψ_n − sqrt(n/(n+1)) ψ_{n−1}`.
fn hermite_functions(z: f64, levels: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(levels);
    let mut prev = 0.0;
    let mut cur = std::f64::consts::PI.powf(-0.25) * (-0.5 * z * z).exp();
    for n in 0..levels {
        out.push(cur);
        let nf = n as f64;
        let next = (2.0 / (nf + 1.0)).sqrt() * z * cur - (nf / (nf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    out
}

impl DensityKernel for FockKernel {
    fn rho(&self, z: f64, zp: f64) -> f64 {
        let a = hermite_functions(z, self.levels());
        let b = hermite_functions(zp, self.levels());
        self.probabilities
            .iter()
            .zip(a.iter().zip(&b))
            .map(|(p, (x, y))| p * x * y)
            .sum()
    }
    fn position_rms(&self) -> f64 {
        self.l
    }
    fn coherence_length(&self) -> f64 {
        self.coherence
    }
}

/// Largest `|ρ_Mehler − ρ_Fock|` over a `points × points` grid spanning ±3 rms,
/// relative to the peak value of the kernel.
pub fn fock_agreement(
    kt_over_omega: f64,
    levels: usize,
    points: usize,
) -> Result<f64, OracleError> {
    let mehler = ThermalKernel1D::from_kt_over_omega(kt_over_omega)?;
    let fock = FockKernel::new(kt_over_omega, levels);
    let peak = mehler.rho(0.0, 0.0);
    let span = 3.0 * mehler.l;
    let zs: Vec<f64> = (0..points)
        .map(|i| -span + 2.0 * span * i as f64 / (points - 1) as f64)
        .collect();
    let mut worst = 0.0f64;
    for &z in &zs {
        let a = hermite_functions(z, levels);
        for &zp in &zs {
            let b = hermite_functions(zp, levels);
            let f: f64 = fock
                .probabilities
                .iter()
                .zip(a.iter().zip(&b))
                .map(|(p, (x, y))| p * x * y)
                .sum();
            worst = worst.max((f - mehler.rho(z, zp)).abs() / peak);
        }
    }
    Ok(worst)
}

/// Uniform grid `[−R, R]` for trapezoid integration of diagonal kernel quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct TrapezoidGrid {
    pub half_width: f64,
    pub points: usize,
}

impl TrapezoidGrid {
    /// 14 rms each side at 10 points per rms.
    pub fn for_width(rms: f64) -> Self {
        Self {
            half_width: 14.0 * rms,
            points: 281,
        }
    }

    pub fn step(&self) -> f64 {
        2.0 * self.half_width / (self.points - 1) as f64
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let h = self.step();
        let n = self.points;
        let mut sum = 0.0;
        for i in 0..n {
            let z = -self.half_width + h * i as f64;
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            sum += w * f(z);
        }
        sum * h
    }

    /// Component-wise [`Self::integrate`] of a vector-valued integrand.
    pub fn integrate_array<const K: usize>(&self, f: impl Fn(f64) -> [f64; K]) -> [f64; K] {
        let h = self.step();
        let n = self.points;
        let mut sum = [0.0; K];
        for i in 0..n {
            let z = -self.half_width + h * i as f64;
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            for (acc, v) in sum.iter_mut().zip(f(z)) {
                *acc += w * v;
            }
        }
        sum.map(|v| v * h)
    }
}

/// Single-coordinate operator expectation values computed from a kernel.
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KernelMoments {
    pub trace: f64,
    /// `⟨z²⟩`
    pub z2: f64,
    /// `⟨p²⟩ = ∫ ∂_z ∂_z' ρ |_{z'=z}`
    pub p2: f64,
    /// `Re⟨z p⟩ = ½⟨z p + p z⟩ = ½ ∫ z (∂_z' − ∂_z) ρ |_{z'=z}` up to the factor `i`
    /// that makes it real; zero for any symmetric kernel.
    pub re_zp: f64,
    /// `Im⟨z p⟩ = −∫ z ∂_z ρ |_{z'=z}`
    pub im_zp: f64,
    /// `⟨z² p² + p² z²⟩`
    pub anticomm_z2p2: f64,
    /// `⟨p z² p⟩`
    pub p_z2_p: f64,
    /// Largest relative change between the last two Richardson levels.
    pub richardson_change: f64,
}

impl KernelMoments {
    /// `¼⟨P² X + 2 P X P + X P²⟩`-type ordering with `X = z²`, `P = p`:
    /// `¼⟨p² z² + 2 p z² p + z² p²⟩`.
    pub fn kick_ordered_z2p2(&self) -> f64 {
        0.25 * (self.anticomm_z2p2 + 2.0 * self.p_z2_p)
    }
}

/// Every entry of [`KernelMoments`] for `kernel`.
pub fn kernel_moments<K: DensityKernel>(kernel: &K, grid: &TrapezoidGrid) -> KernelMoments {
    let trace = grid.integrate(|z| kernel.rho(z, z));
    let z2 = grid.integrate(|z| z * z * kernel.rho(z, z));
    let h0 = 0.03 * kernel.coherence_length().min(2.0 * kernel.position_rms());

    // Each derivative integral at step h; extrapolated over h, h/2, h/4.
    let at = |h: f64| -> [f64; 5] {
        let vals = |z: f64| {
            let f = |a: f64, b: f64| kernel.rho(z + a, z + b);
            let f00 = f(0.0, 0.0);
            let dz = (f(h, 0.0) - f(-h, 0.0)) / (2.0 * h);
            let dzp = (f(0.0, h) - f(0.0, -h)) / (2.0 * h);
            let dzdzp = (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4.0 * h * h);
            let dzz = (f(h, 0.0) - 2.0 * f00 + f(-h, 0.0)) / (h * h);
            let dzpzp = (f(0.0, h) - 2.0 * f00 + f(0.0, -h)) / (h * h);
            [
                dzdzp,
                -z * dz,
                -z * z * (dzz + dzpzp),
                z * z * dzdzp,
                0.5 * z * (dzp - dz),
            ]
        };
        grid.integrate_array(vals)
    };
    let (q1, q2, q4) = (at(h0), at(0.5 * h0), at(0.25 * h0));
    let mut out = [0.0; 5];
    let mut change = 0.0f64;
    for k in 0..5 {
        let r1a = (4.0 * q2[k] - q1[k]) / 3.0;
        let r1b = (4.0 * q4[k] - q2[k]) / 3.0;
        let r2 = (16.0 * r1b - r1a) / 15.0;
        if k < 4 {
            change = change.max(relative_change(r1b, r2));
        }
        out[k] = r2;
    }
    KernelMoments {
        trace,
        z2,
        p2: out[0],
        re_zp: out[4],
        im_zp: out[1],
        anticomm_z2p2: out[2],
        p_z2_p: out[3],
        richardson_change: change,
    }
}
