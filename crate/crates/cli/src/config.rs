//! Run configuration: one JSON document per run, overridden field by field by flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stochcool::model::{natural_scales, scale_geometry};
use stochcool::{
    BeamGeometry, BoundaryMode, CloudParams64, MeasurementSetting64, ModelError, ScaledGeometry64,
    TrapEnsembleParams, Units,
};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitSystem {
    /// `l_th²` (or `T/T0`, `kT/ħω`), scaled `s`, `d` and `σ/Δp0`.
    Trap,
    /// ω in rad/s, mass in kg, temperature in K, beam geometry in m, σ in kg m/s.
    Si,
}

/// Physical parameters; all trap-unit fields or all SI fields.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub units: Option<UnitSystem>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_atoms: Option<f64>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_th_sq: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_over_t0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kt_over_omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    /// Explicit resolution; absent means the optimal one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_over_dp0: Option<f64>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    #[serde(default)]
    pub log: bool,
}

impl RangeSpec {
    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        if !(self.min > 0.0 && self.max > self.min && self.points >= 2) {
            return Err(CliError::config(format!(
                "range needs 0 < min < max and points >= 2, got {}..{} with {} points",
                self.min, self.max, self.points
            )));
        }
        let n = self.points - 1;
        Ok((0..=n)
            .map(|k| {
                let f = k as f64 / n as f64;
                if self.log {
                    self.min * (self.max / self.min).powf(f)
                } else {
                    self.min + (self.max - self.min) * f
                }
            })
            .collect())
    }
}

/// Grids for `boundary`, `smin` and `sweep`. Always dimensionless: boundaries
/// live in the scaled `(s, d)` plane.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_range: Option<RangeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_atoms: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_th_sq: Option<Vec<f64>>,
    /// `l_th²` chosen per atom number from `T = t_over_t0 · T0(N)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_over_t0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modes: Option<Vec<BoundaryMode>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicas: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_effective: Option<f64>,
    /// Fixed inter-step trap phase in radians; absent means uniformly random.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<f64>,
    /// Number of replicas written to the trajectory CSV.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectories: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub quick: bool,
    /// `target=factor`, e.g. `dt_par_cool=1.001`; a negative control.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tamper: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub physics: PhysicsConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
}

pub const OUTPUT_DIR_ENV: &str = "STOCHCOOL_OUTPUT_DIR";
pub const DEFAULT_SEED: u64 = 1;

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    /// Explicit directory, else `$STOCHCOOL_OUTPUT_DIR/<command>`, else `stochcool-output/<command>`.
    pub fn output_dir(&self, command: &str) -> PathBuf {
        if let Some(dir) = &self.out_dir {
            return dir.clone();
        }
        let base = std::env::var_os(OUTPUT_DIR_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("stochcool-output"));
        base.join(command)
    }
}

/// Physical parameters reduced to the dimensionless inputs of the library.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResolvedPhysics {
    pub units: UnitSystem,
    pub cloud: CloudParams64,
    pub geometry: Option<ScaledGeometry64>,
    pub measurement: MeasurementSetting64,
}

fn invalid(field: &'static str, value: f64) -> CliError {
    CliError::from(ModelError::InvalidParameter { field, value })
}

impl PhysicsConfig {
    fn trap_fields(&self) -> Vec<&'static str> {
        [
            ("l_th_sq", self.l_th_sq.is_some()),
            ("t_over_t0", self.t_over_t0.is_some()),
            ("kt_over_omega", self.kt_over_omega.is_some()),
            ("s", self.s.is_some()),
            ("d", self.d.is_some()),
            ("sigma_over_dp0", self.sigma_over_dp0.is_some()),
        ]
        .into_iter()
        .filter_map(|(name, set)| set.then_some(name))
        .collect()
    }

    fn si_fields(&self) -> Vec<&'static str> {
        [
            ("omega", self.omega.is_some()),
            ("mass", self.mass.is_some()),
            ("temperature", self.temperature.is_some()),
            ("r0", self.r0.is_some()),
            ("x0", self.x0.is_some()),
            ("y0", self.y0.is_some()),
            ("sigma", self.sigma.is_some()),
        ]
        .into_iter()
        .filter_map(|(name, set)| set.then_some(name))
        .collect()
    }

    /// Unit system implied by the fields present, checking that they are not mixed.
    pub fn unit_system(&self) -> Result<UnitSystem, CliError> {
        let (trap, si) = (self.trap_fields(), self.si_fields());
        if !trap.is_empty() && !si.is_empty() {
            return Err(CliError::config(format!(
                "config mixes trap-unit fields ({}) with SI fields ({}); use one system",
                trap.join(", "),
                si.join(", ")
            )));
        }
        let implied = if si.is_empty() {
            UnitSystem::Trap
        } else {
            UnitSystem::Si
        };
        match self.units {
            Some(u) if u != implied && !(trap.is_empty() && si.is_empty()) => {
                Err(CliError::config(format!(
                    "units = {u:?} but the config sets {} fields",
                    if si.is_empty() { "trap-unit" } else { "SI" }
                )))
            }
            Some(u) => Ok(u),
            None => Ok(implied),
        }
    }

    fn n_atoms(&self) -> Result<f64, CliError> {
        self.n_atoms
            .ok_or_else(|| CliError::config("missing `n_atoms`"))
    }

    /// Cloud for atom number `n` from whichever trap-unit temperature field is set.
    pub fn trap_cloud(&self, n: f64) -> Result<CloudParams64, CliError> {
        let cloud = match (self.l_th_sq, self.t_over_t0, self.kt_over_omega) {
            (Some(l2), None, None) => CloudParams64::new(n, l2),
            (None, Some(r), None) => CloudParams64::from_t0_ratio(n, r),
            (None, None, Some(kt)) => CloudParams64::from_kt_over_omega(n, kt),
            (None, None, None) => {
                return Err(CliError::config(
                    "missing temperature: set one of `l_th_sq`, `t_over_t0`, `kt_over_omega`",
                ))
            }
            _ => {
                return Err(CliError::config(
                    "set only one of `l_th_sq`, `t_over_t0`, `kt_over_omega`",
                ))
            }
        };
        Ok(cloud?)
    }

    fn has_temperature(&self) -> bool {
        self.l_th_sq.is_some()
            || self.t_over_t0.is_some()
            || self.kt_over_omega.is_some()
            || self.temperature.is_some()
    }

    /// Resolves cloud, measurement and, if `need_geometry`, the scaled beam geometry.
    pub fn resolve(&self, need_geometry: bool) -> Result<ResolvedPhysics, CliError> {
        let units = self.unit_system()?;
        match units {
            UnitSystem::Trap => {
                let cloud = self.trap_cloud(self.n_atoms()?)?;
                let geometry = match (self.s, need_geometry) {
                    (Some(s), _) => Some(ScaledGeometry64::new(s, self.d.unwrap_or(0.0))?),
                    (None, true) => return Err(CliError::config("missing beam radius `s`")),
                    (None, false) => None,
                };
                let measurement = match self.sigma_over_dp0 {
                    Some(v) => MeasurementSetting64::explicit(v)?,
                    None => MeasurementSetting64::Optimal,
                };
                Ok(ResolvedPhysics {
                    units,
                    cloud,
                    geometry,
                    measurement,
                })
            }
            UnitSystem::Si => {
                let need = |name: &'static str, v: Option<f64>| {
                    v.ok_or_else(|| CliError::config(format!("missing `{name}`")))
                };
                let n = self.n_atoms()?;
                if n.fract() != 0.0 || n < 1.0 || n > u64::MAX as f64 {
                    return Err(invalid("n_atoms", n));
                }
                let params = TrapEnsembleParams::new(
                    need("omega", self.omega)?,
                    need("mass", self.mass)?,
                    need("temperature", self.temperature)?,
                    n as u64,
                    Units::si(),
                )?;
                let scales = natural_scales(&params)?;
                let cloud = params.cloud()?;
                let geometry = match (self.r0, need_geometry) {
                    (Some(r0), _) => {
                        let beam =
                            BeamGeometry::new(r0, self.x0.unwrap_or(0.0), self.y0.unwrap_or(0.0))?;
                        Some(scale_geometry(&beam, &scales))
                    }
                    (None, true) => return Err(CliError::config("missing beam radius `r0`")),
                    (None, false) => None,
                };
                let measurement = match self.sigma {
                    Some(v) => MeasurementSetting64::from_physical(v, &scales)?,
                    None => MeasurementSetting64::Optimal,
                };
                Ok(ResolvedPhysics {
                    units,
                    cloud,
                    geometry,
                    measurement,
                })
            }
        }
    }
}

impl GridConfig {
    pub fn s_grid(&self, default: RangeSpec) -> Result<Vec<f64>, CliError> {
        match (&self.s_values, &self.s_range) {
            (Some(_), Some(_)) => Err(CliError::config(
                "set only one of `grid.s_values` and `grid.s_range`",
            )),
            (Some(v), None) => {
                if v.is_empty() {
                    return Err(CliError::config("`grid.s_values` is empty"));
                }
                Ok(v.clone())
            }
            (None, Some(r)) => r.values(),
            (None, None) => default.values(),
        }
    }

    /// `(N, l_th²)` combinations: the atom-number list (or the physics one)
    /// crossed with the `l_th²` list, or one `l_th²` per `N` from `t_over_t0`.
    pub fn clouds(&self, physics: &PhysicsConfig) -> Result<Vec<CloudParams64>, CliError> {
        let units = physics.unit_system()?;
        if units == UnitSystem::Si && (self.l_th_sq.is_some() || self.t_over_t0.is_some()) {
            return Err(CliError::config(
                "config mixes SI physics with trap-unit grid temperatures (`grid.l_th_sq`/`grid.t_over_t0`)",
            ));
        }
        if self.l_th_sq.is_some() && self.t_over_t0.is_some() {
            return Err(CliError::config(
                "set only one of `grid.l_th_sq` and `grid.t_over_t0`",
            ));
        }
        let atoms = match (&self.n_atoms, physics.n_atoms) {
            (Some(list), _) if !list.is_empty() => list.clone(),
            (Some(_), _) => return Err(CliError::config("`grid.n_atoms` is empty")),
            (None, Some(n)) => vec![n],
            (None, None) => vec![1e6],
        };
        let mut out = Vec::new();
        for &n in &atoms {
            if let Some(ratio) = self.t_over_t0 {
                out.push(CloudParams64::from_t0_ratio(n, ratio)?);
            } else if let Some(list) = &self.l_th_sq {
                for &l2 in list {
                    out.push(CloudParams64::new(n, l2)?);
                }
            } else if physics.has_temperature() {
                let mut p = physics.clone();
                p.n_atoms = Some(n);
                out.push(p.resolve(false)?.cloud);
            } else {
                return Err(CliError::config("missing temperature: set `grid.l_th_sq`, `grid.t_over_t0` or a physics temperature"));
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trap(s: f64) -> PhysicsConfig {
        PhysicsConfig {
            n_atoms: Some(1e6),
            l_th_sq: Some(200.0),
            s: Some(s),
            d: Some(0.0),
            ..Default::default()
        }
    }

    #[test]
    fn trap_units_resolve() {
        let r = trap(1.0).resolve(true).unwrap();
        assert_eq!(r.units, UnitSystem::Trap);
        assert_eq!(r.cloud.l_th_sq, 200.0);
        assert!(r.measurement.is_optimal());
    }

    #[test]
    fn zero_radius_names_the_field() {
        let err = trap(0.0).resolve(true).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("`s`"), "{err}");
    }

    #[test]
    fn mixing_is_rejected() {
        let mut p = trap(1.0);
        p.omega = Some(100.0);
        let err = p.resolve(true).unwrap_err();
        assert!(err.to_string().contains("mixes"), "{err}");
    }

    #[test]
    fn si_resolves_to_the_same_scaled_problem() {
        // Rb-87 in a 2π·100 Hz trap at 1 µK with a 10 µm beam.
        let p = PhysicsConfig {
            n_atoms: Some(1000.0),
            omega: Some(2.0 * std::f64::consts::PI * 100.0),
            mass: Some(1.443e-25),
            temperature: Some(1e-6),
            r0: Some(1e-5),
            ..Default::default()
        };
        let r = p.resolve(true).unwrap();
        assert_eq!(r.units, UnitSystem::Si);
        assert!(
            r.cloud.l_th_sq > 400.0 && r.cloud.l_th_sq < 420.0,
            "{}",
            r.cloud.l_th_sq
        );
        assert!(r.geometry.unwrap().s > 0.0);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(RunConfig::from_json(r#"{"physics": {"n_atom": 3}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"colour": 3}"#).is_err());
    }

    #[test]
    fn round_trip_is_idempotent() {
        let cfg = RunConfig {
            seed: Some(7),
            physics: trap(1.25),
            grid: GridConfig {
                s_range: Some(RangeSpec {
                    min: 0.5,
                    max: 10.0,
                    points: 17,
                    log: true,
                }),
                modes: Some(vec![BoundaryMode::Total]),
                ..Default::default()
            },
            simulate: SimulateConfig {
                replicas: Some(10),
                phase: Some(0.1),
                ..Default::default()
            },
            ..Default::default()
        };
        let once = cfg.to_json();
        let back = RunConfig::from_json(&once).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_json(), once);
    }

    proptest::proptest! {
        #[test]
        fn any_config_survives_a_round_trip(
            seed in proptest::option::of(0u64..u64::MAX),
            n in proptest::option::of(1.0f64..1e9),
            s in proptest::option::of(1e-3f64..1e3),
            sigma in proptest::option::of(1e-3f64..1e3),
            s_values in proptest::option::of(proptest::collection::vec(1e-3f64..1e3, 0..5)),
            replicas in proptest::option::of(0usize..1_000_000),
            phase in proptest::option::of(-10.0f64..10.0),
        ) {
            let cfg = RunConfig {
                seed,
                physics: PhysicsConfig { n_atoms: n, s, sigma_over_dp0: sigma, ..Default::default() },
                grid: GridConfig { s_values, ..Default::default() },
                simulate: SimulateConfig { replicas, phase, ..Default::default() },
                ..Default::default()
            };
            let text = cfg.to_json();
            let back = RunConfig::from_json(&text).unwrap();
            proptest::prop_assert_eq!(&back, &cfg);
            proptest::prop_assert_eq!(back.to_json(), text);
        }
    }

    #[test]
    fn grid_clouds_per_atom_number() {
        let grid = GridConfig {
            n_atoms: Some(vec![1.0, 10.0]),
            t_over_t0: Some(10.0),
            ..Default::default()
        };
        let clouds = grid.clouds(&PhysicsConfig::default()).unwrap();
        assert_eq!(clouds.len(), 2);
        assert!(clouds[1].l_th_sq > clouds[0].l_th_sq);
        let both = GridConfig {
            l_th_sq: Some(vec![3.0]),
            t_over_t0: Some(10.0),
            ..Default::default()
        };
        assert!(both.clouds(&PhysicsConfig::default()).is_err());
    }

    #[test]
    fn ranges() {
        let v = RangeSpec {
            min: 1.0,
            max: 100.0,
            points: 3,
            log: true,
        }
        .values()
        .unwrap();
        assert!((v[1] - 10.0).abs() < 1e-12);
        assert!(RangeSpec {
            min: 2.0,
            max: 1.0,
            points: 3,
            log: false
        }
        .values()
        .is_err());
    }
}
