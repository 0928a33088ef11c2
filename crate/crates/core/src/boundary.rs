//! Cooling/heating boundaries in the `(s, d)` plane.
//!
//! For each beam radius `s` the boundary is the offset `d` at which the
//! single-step energy change crosses zero, cooling for `d` below it and
//! heating above. Roots are bracketed by doubling from `d = 1` and refined by
//! bisection.

use serde::{Deserialize, Serialize};

use crate::energy::{
    delta_e_parallel, delta_e_total, delta_e_total_asymptotic, MeasurementSetting,
};
use crate::error::{BoundaryError, ModelError};
use crate::model::{CloudParams, ScaledGeometry};
use crate::scalar::{c, Scalar};

/// Which energy change defines the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    /// `ΔE∥ = 0`
    LongitudinalOnly,
    /// `ΔE∥ + ΔE⊥ = 0`
    Total,
    /// Zero of the large-`N` expansion.
    Asymptotic,
}

impl BoundaryMode {
    pub const ALL: [BoundaryMode; 3] = [Self::LongitudinalOnly, Self::Total, Self::Asymptotic];

    pub fn name(&self) -> &'static str {
        match self {
            Self::LongitudinalOnly => "longitudinal_only",
            Self::Total => "total",
            Self::Asymptotic => "asymptotic",
        }
    }
}

impl std::str::FromStr for BoundaryMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "longitudinal_only" | "longitudinal" | "par" => Ok(Self::LongitudinalOnly),
            "total" => Ok(Self::Total),
            "asymptotic" => Ok(Self::Asymptotic),
            other => Err(format!("unknown boundary mode `{other}`")),
        }
    }
}

/// Energy change in quanta selected by `mode`.
pub fn energy_change<T: Scalar>(
    mode: BoundaryMode,
    geom: &ScaledGeometry<T>,
    cloud: &CloudParams<T>,
    meas: &MeasurementSetting<T>,
) -> Result<T, ModelError> {
    match mode {
        BoundaryMode::LongitudinalOnly => Ok(delta_e_parallel(geom, cloud, meas)?.total()),
        BoundaryMode::Total => Ok(delta_e_total(geom, cloud, meas)?.de_total),
        BoundaryMode::Asymptotic => delta_e_total_asymptotic(geom, cloud, meas),
    }
}

/// Root-finding controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootOptions<T> {
    /// Accept a midpoint once `|ΔE|` is below this (quanta).
    pub tol_energy: T,
    /// ... or once the bracket is narrower than this.
    pub tol_d: T,
    pub d_start: T,
    pub d_max: T,
    /// Points of the coarse monotonicity probe on `[0, d_hi]`.
    pub probe_points: usize,
}

impl<T: Scalar> Default for RootOptions<T> {
    fn default() -> Self {
        Self {
            tol_energy: c(1e-10),
            tol_d: c(1e-8),
            d_start: T::one(),
            d_max: c(1e3),
            probe_points: 32,
        }
    }
}

/// Boundary offset at radius `s`, or `None` when the beam heats at every offset
/// (including `d = 0`) or no sign change is found below `d_max`.
pub fn boundary_d_at_s<T: Scalar>(
    s: T,
    mode: BoundaryMode,
    cloud: &CloudParams<T>,
    meas: &MeasurementSetting<T>,
    opts: &RootOptions<T>,
) -> Result<Option<T>, BoundaryError> {
    let f = |d: T| -> Result<T, BoundaryError> {
        Ok(energy_change(
            mode,
            &ScaledGeometry::new(s, d)?,
            cloud,
            meas,
        )?)
    };
    let f0 = f(T::zero())?;
    if !(f0 < T::zero()) {
        return Ok(None);
    }
    let mut lo = T::zero();
    let mut hi = opts.d_start;
    let mut fhi = f(hi)?;
    while fhi < T::zero() {
        if hi >= opts.d_max {
            return Ok(None);
        }
        lo = hi;
        hi = (hi + hi).min(opts.d_max);
        fhi = f(hi)?;
    }
    probe_monotone(s, hi, opts.probe_points, &f)?;

    let two = c::<T>(2.0);
    loop {
        let mid = (lo + hi) / two;
        let fm = f(mid)?;
        if fm.abs() < opts.tol_energy || hi - lo < opts.tol_d || mid <= lo || mid >= hi {
            return Ok(Some(mid));
        }
        if fm < T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

/// A single sign change on `[0, d_hi]`, checked on an evenly spaced probe.
fn probe_monotone<T: Scalar>(
    s: T,
    d_hi: T,
    points: usize,
    f: &impl Fn(T) -> Result<T, BoundaryError>,
) -> Result<(), BoundaryError> {
    let n = points.max(2);
    let step = d_hi / c((n - 1) as f64);
    let mut crossings = Vec::new();
    let mut prev = f(T::zero())? < T::zero();
    for i in 1..n {
        let d = step * c(i as f64);
        let neg = f(d)? < T::zero();
        if neg != prev {
            crossings.push(d.to_f64_lossy());
        }
        prev = neg;
    }
    if crossings.len() > 1 {
        return Err(BoundaryError::NonMonotone {
            s: s.to_f64_lossy(),
            crossings,
        });
    }
    Ok(())
}

/// Boundary samples for one `(mode, N, l_th², σ)` combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCurve<T> {
    pub mode: BoundaryMode,
    /// `(s, d)` pairs ordered by increasing `s`.
    pub samples: Vec<(T, T)>,
    /// Smallest `s` admitting cooling at `d = 0`; `None` if no grid point cools.
    pub s_min: Option<T>,
    pub n_atoms: T,
    pub l_th_sq: T,
    pub sigma_optimal: bool,
}

impl<T: Scalar> BoundaryCurve<T> {
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Linear interpolation of `d(s)`; `None` outside the sampled range.
    pub fn d_at(&self, s: T) -> Option<T> {
        let i = self.samples.partition_point(|p| p.0 < s);
        if i < self.samples.len() && self.samples[i].0 == s {
            return Some(self.samples[i].1);
        }
        if i == 0 || i == self.samples.len() {
            return None;
        }
        let (s0, d0) = self.samples[i - 1];
        let (s1, d1) = self.samples[i];
        Some(d0 + (d1 - d0) * (s - s0) / (s1 - s0))
    }
}

/// Root at every grid radius plus `s_min` refined by bisection in `s` at `d = 0`.
pub fn boundary_curve<T: Scalar>(
    s_grid: &[T],
    mode: BoundaryMode,
    cloud: &CloudParams<T>,
    meas: &MeasurementSetting<T>,
    opts: &RootOptions<T>,
) -> Result<BoundaryCurve<T>, BoundaryError> {
    if s_grid.is_empty() || !(s_grid[0] > T::zero()) || s_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(BoundaryError::BadGrid);
    }
    let roots = s_grid
        .iter()
        .map(|&s| boundary_d_at_s(s, mode, cloud, meas, opts).map(|d| d.map(|d| (s, d))))
        .collect::<Result<Vec<_>, _>>()?;
    let samples: Vec<(T, T)> = roots.iter().flatten().copied().collect();

    let s_min = match roots.iter().position(Option::is_some) {
        None => None,
        Some(0) => Some(s_grid[0]),
        Some(i) => Some(refine_s_min(
            s_grid[i - 1],
            s_grid[i],
            mode,
            cloud,
            meas,
            opts,
        )?),
    };
    Ok(BoundaryCurve {
        mode,
        samples,
        s_min,
        n_atoms: cloud.n_atoms,
        l_th_sq: cloud.l_th_sq,
        sigma_optimal: meas.is_optimal(),
    })
}

/// Bisection for `ΔE(s, 0) = 0` between a heating radius and a cooling radius.
pub fn refine_s_min<T: Scalar>(
    s_heat: T,
    s_cool: T,
    mode: BoundaryMode,
    cloud: &CloudParams<T>,
    meas: &MeasurementSetting<T>,
    opts: &RootOptions<T>,
) -> Result<T, BoundaryError> {
    let f = |s: T| -> Result<T, BoundaryError> {
        Ok(energy_change(
            mode,
            &ScaledGeometry::new(s, T::zero())?,
            cloud,
            meas,
        )?)
    };
    let (mut lo, mut hi) = (s_heat, s_cool);
    let two = c::<T>(2.0);
    for _ in 0..200 {
        let mid = (lo + hi) / two;
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid)?;
        if fm.abs() < opts.tol_energy || hi - lo < opts.tol_d * mid {
            return Ok(mid);
        }
        if fm < T::zero() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((lo + hi) / two)
}

/// Smallest `s` on a geometric scan of `[s_lo, s_hi]` with `ΔE(s, 0) < 0`,
/// refined by bisection; `None` if the whole scan heats.
pub fn s_min_numeric<T: Scalar>(
    mode: BoundaryMode,
    cloud: &CloudParams<T>,
    meas: &MeasurementSetting<T>,
    opts: &RootOptions<T>,
    (s_lo, s_hi): (T, T),
    points: usize,
) -> Result<Option<T>, BoundaryError> {
    if !(s_lo > T::zero() && s_hi > s_lo) || points < 2 {
        return Err(BoundaryError::BadGrid);
    }
    let ratio = (s_hi / s_lo).powf(c::<T>(1.0 / (points - 1) as f64));
    let mut prev = s_lo;
    for k in 0..points {
        let s = s_lo * ratio.powi(k as i32);
        if energy_change(mode, &ScaledGeometry::new(s, T::zero())?, cloud, meas)? < T::zero() {
            return if k == 0 {
                Ok(Some(s))
            } else {
                refine_s_min(prev, s, mode, cloud, meas, opts).map(Some)
            };
        }
        prev = s;
    }
    Ok(None)
}

/// Smallest radius that cools at `d = 0` in the large-`N` limit with optimal resolution.
pub fn s_min_asymptotic<T: Scalar>(l_th_sq: T) -> Result<T, BoundaryError> {
    let two = c::<T>(2.0);
    if !(l_th_sq > two) {
        return Err(BoundaryError::NoCoolingDomain {
            l_th_sq: l_th_sq.to_f64_lossy(),
        });
    }
    let ratio = (l_th_sq + two) / (l_th_sq - two);
    // sqrt(1 + 2q) − 1 = 2q / (sqrt(1 + 2q) + 1)
    let root = (T::one() + two * ratio).sqrt();
    Ok((two * ratio / (root + T::one())).sqrt())
}

/// Zero-energy offset of the large-`N`, optimal-resolution energy change at radius `s`.
pub fn d_of_s_asymptotic<T: Scalar>(s: T, l_th_sq: T) -> Result<T, BoundaryError> {
    let two = c::<T>(2.0);
    let s_min = s_min_asymptotic(l_th_sq)?;
    let s2 = s * s;
    let arg = (l_th_sq - two) / (l_th_sq + two) - two / (s2 * (two + s2));
    if arg < T::zero() {
        if s >= s_min {
            // rounding right at the endpoint
            return Ok(T::zero());
        }
        return Err(BoundaryError::BelowMinimalRadius {
            s: s.to_f64_lossy(),
            s_min: s_min.to_f64_lossy(),
        });
    }
    Ok((two + s2) * arg.sqrt())
}

/// Distance from `(s, d)` to the polyline through `curve`, divided by `|(s, d)|`.
pub fn relative_distance_to_curve<T: Scalar>(point: (T, T), curve: &[(T, T)]) -> Option<T> {
    let (ps, pd) = point;
    let norm = ps.hypot(pd);
    let best = curve
        .windows(2)
        .map(|w| segment_distance(point, w[0], w[1]))
        .chain(curve.iter().map(|&q| (q.0 - ps).hypot(q.1 - pd)))
        .fold(None, |acc: Option<T>, x| Some(acc.map_or(x, |a| a.min(x))))?;
    Some(best / norm)
}

fn segment_distance<T: Scalar>(p: (T, T), a: (T, T), b: (T, T)) -> T {
    let (vx, vy) = (b.0 - a.0, b.1 - a.1);
    let (wx, wy) = (p.0 - a.0, p.1 - a.1);
    let len2 = vx * vx + vy * vy;
    let u = if len2 > T::zero() {
        ((wx * vx + wy * vy) / len2).max(T::zero()).min(T::one())
    } else {
        T::zero()
    };
    (a.0 + u * vx - p.0).hypot(a.1 + u * vy - p.1)
}

/// Largest relative distance from any sample of `a` to curve `b`, and vice versa.
pub fn symmetric_relative_gap<T: Scalar>(a: &[(T, T)], b: &[(T, T)]) -> Option<T> {
    let one_way = |x: &[(T, T)], y: &[(T, T)]| {
        x.iter()
            .filter_map(|&p| relative_distance_to_curve(p, y))
            .fold(None, |acc: Option<T>, v| Some(acc.map_or(v, |m| m.max(v))))
    };
    Some(one_way(a, b)?.max(one_way(b, a)?))
}

/// Evenly spaced grid of `n ≥ 2` points on `[lo, hi]`.
pub fn linspace<T: Scalar>(lo: T, hi: T, n: usize) -> Vec<T> {
    let n = n.max(2);
    let step = (hi - lo) / c((n - 1) as f64);
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                lo + step * c(i as f64)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const OPT: MeasurementSetting<f64> = MeasurementSetting::Optimal;

    fn cloud(n: f64, l2: f64) -> CloudParams<f64> {
        CloudParams::new(n, l2).unwrap()
    }

    #[test]
    fn s_min_landmarks() {
        let inf = s_min_asymptotic(1e300).unwrap();
        assert!((inf - (3f64.sqrt() - 1.0).sqrt()).abs() < 1e-12);
        assert_relative_eq!(inf, 0.855_599_677_167_352_1, max_relative = 1e-13);
        assert_relative_eq!(
            s_min_asymptotic(6.0).unwrap(),
            (5f64.sqrt() - 1.0).sqrt(),
            max_relative = 1e-14
        );
        assert!(s_min_asymptotic(2.0001).unwrap() > 16.0);
        assert!(matches!(
            s_min_asymptotic(2.0),
            Err(BoundaryError::NoCoolingDomain { .. })
        ));
        assert!(matches!(
            s_min_asymptotic(1.5),
            Err(BoundaryError::NoCoolingDomain { .. })
        ));
    }

    #[test]
    fn s_min_diverges_near_two() {
        // q = (l² + 2)/(l² − 2) ≈ 4/ε and s_min⁴ ≈ 2q for large q
        for eps in [1e-7f64, 1e-9] {
            let l2 = 2.0 + eps;
            let s = s_min_asymptotic(l2).unwrap();
            assert!(s > 0.99 * (8.0 / eps).powf(0.25));
            let q = (l2 + 2.0) / (l2 - 2.0);
            let exact = ((1.0 + 2.0 * q).sqrt() - 1.0).sqrt();
            assert_relative_eq!(s, exact, max_relative = 1e-9);
        }
    }

    #[test]
    fn asymptotic_contour_endpoints() {
        for l2 in [3.0, 20.0, 2e4] {
            let s0 = s_min_asymptotic(l2).unwrap();
            assert!(d_of_s_asymptotic(s0, l2).unwrap() < 1e-6);
            assert!(matches!(
                d_of_s_asymptotic(0.9 * s0, l2),
                Err(BoundaryError::BelowMinimalRadius { .. })
            ));
        }
        // l² → ∞, s = 2: 6 sqrt(1 − 1/12)
        assert_relative_eq!(
            d_of_s_asymptotic(2.0, 1e300).unwrap(),
            6.0 * (11.0f64 / 12.0).sqrt(),
            max_relative = 1e-14
        );
        assert_relative_eq!(
            6.0 * (11.0f64 / 12.0).sqrt(),
            5.744_562_646_538_029,
            max_relative = 1e-14
        );
    }

    #[test]
    fn contour_escapes_as_l2_approaches_two() {
        for s in [1.0, 10.0, 100.0] {
            assert!(d_of_s_asymptotic(s, 2.0 + 1e-12).is_err());
        }
    }

    #[test]
    fn numeric_root_matches_closed_form_contour_in_asymptotic_mode() {
        let cl = cloud(1e6, 1e300);
        let d = boundary_d_at_s(
            2.0,
            BoundaryMode::Asymptotic,
            &cl,
            &OPT,
            &RootOptions::default(),
        )
        .unwrap()
        .unwrap();
        assert!((d - 5.744_562_646_538_029).abs() < 1e-7);
        let cl = cloud(1e6, 200.0);
        for s in [0.9, 1.5, 3.0, 8.0] {
            let d = boundary_d_at_s(
                s,
                BoundaryMode::Asymptotic,
                &cl,
                &OPT,
                &RootOptions::default(),
            )
            .unwrap()
            .unwrap();
            let exact = d_of_s_asymptotic(s, 200.0).unwrap();
            assert!(
                (d - exact).abs() < 1e-7 * exact.max(1.0),
                "{s}: {d} vs {exact}"
            );
        }
    }

    #[test]
    fn asymptotic_mode_root_vanishes_at_s_min() {
        let cl = cloud(1e6, 200.0);
        let s0 = s_min_asymptotic(200.0).unwrap();
        let s_hi = s0 * (1.0 + 1e-12);
        let d = boundary_d_at_s(
            s_hi,
            BoundaryMode::Asymptotic,
            &cl,
            &OPT,
            &RootOptions::default(),
        )
        .unwrap();
        assert!(d.is_none_or(|d| d < 1e-4));
        assert_eq!(
            boundary_d_at_s(
                0.5 * s0,
                BoundaryMode::Asymptotic,
                &cl,
                &OPT,
                &RootOptions::default()
            )
            .unwrap(),
            None
        );
    }

    #[test]
    fn total_mode_tracks_closed_form_contour() {
        let l2 = 200.0;
        let cl = cloud(1e6, l2);
        for s in [1.0, 2.0, 5.0, 10.0] {
            let d = boundary_d_at_s(s, BoundaryMode::Total, &cl, &OPT, &RootOptions::default())
                .unwrap()
                .unwrap();
            let exact = d_of_s_asymptotic(s, l2).unwrap();
            assert!(((d - exact) / exact).abs() < 1e-2);
        }
    }

    #[test]
    fn roots_are_sign_changes() {
        let cl = cloud(1e4, 500.0);
        let opts = RootOptions::default();
        for mode in BoundaryMode::ALL {
            for s in [1.0, 2.5, 6.0] {
                let d = boundary_d_at_s(s, mode, &cl, &OPT, &opts).unwrap().unwrap();
                let delta = 10.0 * opts.tol_d;
                let e = |d: f64| {
                    energy_change(mode, &ScaledGeometry::new(s, d).unwrap(), &cl, &OPT).unwrap()
                };
                assert!(e(d - delta) < 0.0 && e(d + delta) > 0.0, "{mode:?} s={s}");
                assert!(e(d).abs() < 1e-6 * cl.l_th_sq);
            }
        }
    }

    #[test]
    fn curve_assembly_and_s_min_refinement() {
        let cl = cloud(1e6, 200.0);
        let grid = linspace(0.5, 10.0, 40);
        let curve = boundary_curve(
            &grid,
            BoundaryMode::Asymptotic,
            &cl,
            &OPT,
            &RootOptions::default(),
        )
        .unwrap();
        assert!(curve
            .samples
            .windows(2)
            .all(|w| w[1].0 > w[0].0 && w[1].1 >= w[0].1));
        assert_relative_eq!(
            curve.s_min.unwrap(),
            s_min_asymptotic(200.0).unwrap(),
            max_relative = 1e-7
        );
        assert!(curve.sigma_optimal);
        assert!(curve.d_at(0.1).is_none());
    }

    #[test]
    fn no_cooling_gives_empty_curve() {
        let cl = cloud(1e6, 1.5);
        let curve = boundary_curve(
            &linspace(0.5, 10.0, 10),
            BoundaryMode::Total,
            &cl,
            &OPT,
            &RootOptions::default(),
        )
        .unwrap();
        assert!(curve.is_empty());
        assert_eq!(curve.s_min, None);
    }

    #[test]
    fn bad_grids_rejected() {
        let cl = cloud(10.0, 20.0);
        for g in [vec![], vec![0.0, 1.0], vec![1.0, 1.0], vec![2.0, 1.0]] {
            assert_eq!(
                boundary_curve(&g, BoundaryMode::Total, &cl, &OPT, &RootOptions::default())
                    .unwrap_err(),
                BoundaryError::BadGrid
            );
        }
    }

    #[test]
    fn larger_samples_cool_further_out() {
        let l2 = 1881.0;
        let opts = RootOptions::default();
        let d = |n: f64| {
            boundary_d_at_s(
                1.0,
                BoundaryMode::LongitudinalOnly,
                &cloud(n, l2),
                &OPT,
                &opts,
            )
            .unwrap()
            .unwrap()
        };
        assert!(d(1e2) < d(1e4) && d(1e4) < d(1e6));
    }

    #[test]
    fn relative_gap_of_identical_curves_is_zero() {
        let a: Vec<(f64, f64)> = (1..20).map(|i| (i as f64, (i * i) as f64)).collect();
        assert_eq!(symmetric_relative_gap(&a, &a), Some(0.0));
        let b: Vec<(f64, f64)> = a.iter().map(|&(s, d)| (s * 1.01, d)).collect();
        let gap = symmetric_relative_gap(&a, &b).unwrap();
        assert!(gap > 0.0 && gap < 0.01);
    }

    proptest! {
        #[test]
        fn s_min_strictly_decreasing(l2 in 2.001f64..1e4, f in 1.001f64..5.0) {
            let a = s_min_asymptotic(l2).unwrap();
            let b = s_min_asymptotic(l2 * f).unwrap();
            prop_assert!(b < a);
            prop_assert!(b > (3f64.sqrt() - 1.0).sqrt() * (1.0 - 1e-15));
        }

        #[test]
        fn asymptotic_root_matches_closed_form(l2 in 2.5f64..1e5, excess in 0.05f64..8.0) {
            let s = s_min_asymptotic(l2).unwrap() + excess;
            let exact = d_of_s_asymptotic(s, l2).unwrap();
            let got = boundary_d_at_s(s, BoundaryMode::Asymptotic, &cloud(1.0, l2), &OPT, &RootOptions::default())
                .unwrap()
                .unwrap();
            prop_assert!((got - exact).abs() < 1e-6 * exact.max(1.0));
        }
    }

    #[test]
    fn numeric_s_min_approaches_the_asymptotic_one_at_large_n() {
        let cloud = CloudParams::new(1e6, 200.0).unwrap();
        let opts = RootOptions::default();
        let num = s_min_numeric(
            BoundaryMode::Total,
            &cloud,
            &MeasurementSetting::Optimal,
            &opts,
            (0.05, 100.0),
            64,
        )
        .unwrap()
        .unwrap();
        let asym: f64 = s_min_asymptotic(200.0).unwrap();
        assert!((num / asym - 1.0).abs() < 1e-3, "{num} vs {asym}");
        let hot = CloudParams::new(1e6, 1.5).unwrap();
        assert_eq!(
            s_min_numeric(
                BoundaryMode::Total,
                &hot,
                &MeasurementSetting::Optimal,
                &opts,
                (0.05, 100.0),
                64
            )
            .unwrap(),
            None
        );
    }
}
