//! Machine configuration: motor resolutions, travel limits, cure timing.
//!
//! Loaded from TOML with dotted keys (`steps_per_rev.x = 200`). Unknown keys
//! are rejected so a typo cannot silently fall back to a default. A short
//! fingerprint of every semantic field is embedded in emitted programs and
//! checked again before execution, which catches the classic mistake of
//! printing a program planned for a differently geared machine.

use sha2::{Digest, Sha256};
use toml::Value;

use crate::error::{Error, Result};
use crate::voxel_model::{AxisRange, PositionConvention, TravelLimits};

/// Lead-screw translation motor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearMotor {
    pub steps_per_rev: u32,
    pub distance_per_rev_mm: f64,
}

impl LinearMotor {
    /// Travel of a single step, mm.
    pub fn step_distance_mm(&self) -> f64 {
        self.distance_per_rev_mm / self.steps_per_rev as f64
    }
}

/// Gimbal rotation motor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotaryMotor {
    /// Nominal steps for a full circle; informational alongside
    /// `degree_per_step`, which is the authoritative resolution.
    pub steps_per_rev: u32,
    pub degree_per_step: f64,
}

impl RotaryMotor {
    pub fn from_degree_per_step(degree_per_step: f64) -> Self {
        let steps_per_rev = (360.0 / degree_per_step).round().max(1.0) as u32;
        RotaryMotor {
            steps_per_rev,
            degree_per_step,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MachineConfig {
    pub x: LinearMotor,
    pub y: LinearMotor,
    pub z: LinearMotor,
    pub azimuth: RotaryMotor,
    pub inclination: RotaryMotor,
    pub travel: TravelLimits,
    pub cure_duration_ms: u32,
    /// Focused spot size, i.e. the smallest printable voxel pitch.
    pub voxel_pitch_um: f64,
    /// Layer clustering tolerance for the path planner, mm.
    pub z_tol_mm: f64,
    /// Whether geometry datasets record voxel centers or minimum corners.
    pub position_convention: PositionConvention,
}

impl Default for MachineConfig {
    fn default() -> Self {
        let linear = LinearMotor {
            steps_per_rev: 200,
            distance_per_rev_mm: 8.0,
        };
        let rotary = RotaryMotor {
            steps_per_rev: 200,
            degree_per_step: 1.8,
        };
        let axis = AxisRange {
            min: -50.0,
            max: 50.0,
        };
        MachineConfig {
            x: linear,
            y: linear,
            z: linear,
            azimuth: rotary,
            inclination: rotary,
            travel: TravelLimits {
                x: axis,
                y: axis,
                z: axis,
            },
            cure_duration_ms: 500,
            voxel_pitch_um: 50.0,
            z_tol_mm: 1e-6,
            position_convention: PositionConvention::Center,
        }
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn as_table<'a>(value: &'a Value, key: &str) -> Result<&'a toml::Table> {
    value
        .as_table()
        .ok_or_else(|| config_err(format!("\"{key}\" must be a table")))
}

fn as_f64(value: &Value, key: &str) -> Result<f64> {
    let v = match value {
        Value::Float(f) => *f,
        Value::Integer(i) => *i as f64,
        _ => return Err(config_err(format!("\"{key}\" must be a number"))),
    };
    if !v.is_finite() {
        return Err(config_err(format!("\"{key}\" must be finite")));
    }
    Ok(v)
}

fn as_u32(value: &Value, key: &str) -> Result<u32> {
    let i = value
        .as_integer()
        .ok_or_else(|| config_err(format!("\"{key}\" must be an integer")))?;
    if i <= 0 || i > u32::MAX as i64 {
        return Err(config_err(format!(
            "\"{key}\" must be a positive integer, got {i}"
        )));
    }
    Ok(i as u32)
}

impl MachineConfig {
    /// Parse a TOML config, starting from defaults and overriding any key
    /// present. See the module documentation for the key list.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e| config_err(format!("TOML syntax: {e}")))?;
        let mut cfg = MachineConfig::default();
        // Track explicit rotary keys so the two ways of stating the same
        // resolution can be cross-checked.
        let mut az_spr = None;
        let mut az_dps = None;
        let mut inc_spr = None;
        let mut inc_dps = None;

        for (key, value) in &table {
            match key.as_str() {
                "steps_per_rev" => {
                    for (axis, v) in as_table(value, key)? {
                        let full = format!("steps_per_rev.{axis}");
                        match axis.as_str() {
                            "x" => cfg.x.steps_per_rev = as_u32(v, &full)?,
                            "y" => cfg.y.steps_per_rev = as_u32(v, &full)?,
                            "z" => cfg.z.steps_per_rev = as_u32(v, &full)?,
                            "az" => az_spr = Some(as_u32(v, &full)?),
                            "inc" => inc_spr = Some(as_u32(v, &full)?),
                            _ => return Err(config_err(format!("unknown key \"{full}\""))),
                        }
                    }
                }
                "distance_per_rev" => {
                    for (axis, v) in as_table(value, key)? {
                        let full = format!("distance_per_rev.{axis}");
                        match axis.as_str() {
                            "x" => cfg.x.distance_per_rev_mm = as_f64(v, &full)?,
                            "y" => cfg.y.distance_per_rev_mm = as_f64(v, &full)?,
                            "z" => cfg.z.distance_per_rev_mm = as_f64(v, &full)?,
                            _ => return Err(config_err(format!("unknown key \"{full}\""))),
                        }
                    }
                }
                "degree_per_step" => {
                    for (axis, v) in as_table(value, key)? {
                        let full = format!("degree_per_step.{axis}");
                        match axis.as_str() {
                            "az" => az_dps = Some(as_f64(v, &full)?),
                            "inc" => inc_dps = Some(as_f64(v, &full)?),
                            _ => return Err(config_err(format!("unknown key \"{full}\""))),
                        }
                    }
                }
                "travel" => {
                    for (axis, v) in as_table(value, key)? {
                        let range = match axis.as_str() {
                            "x" => &mut cfg.travel.x,
                            "y" => &mut cfg.travel.y,
                            "z" => &mut cfg.travel.z,
                            _ => return Err(config_err(format!("unknown key \"travel.{axis}\""))),
                        };
                        for (bound, bv) in as_table(v, &format!("travel.{axis}"))? {
                            let full = format!("travel.{axis}.{bound}");
                            match bound.as_str() {
                                "min" => range.min = as_f64(bv, &full)?,
                                "max" => range.max = as_f64(bv, &full)?,
                                _ => return Err(config_err(format!("unknown key \"{full}\""))),
                            }
                        }
                    }
                }
                "cure_duration_ms" => cfg.cure_duration_ms = as_u32(value, key)?,
                "voxel_pitch_um" => cfg.voxel_pitch_um = as_f64(value, key)?,
                "z_tol_mm" => cfg.z_tol_mm = as_f64(value, key)?,
                "position_convention" => {
                    let s = value
                        .as_str()
                        .ok_or_else(|| config_err("\"position_convention\" must be a string"))?;
                    cfg.position_convention = match s {
                        "center" => PositionConvention::Center,
                        "min_corner" => PositionConvention::MinCorner,
                        _ => {
                            return Err(config_err(format!(
                            "position_convention must be \"center\" or \"min_corner\", got \"{s}\""
                        )))
                        }
                    };
                }
                _ => return Err(config_err(format!("unknown key \"{key}\""))),
            }
        }

        cfg.azimuth = reconcile_rotary("az", az_spr, az_dps, cfg.azimuth)?;
        cfg.inclination = reconcile_rotary("inc", inc_spr, inc_dps, cfg.inclination)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Check every invariant the rest of the pipeline relies on.
    pub fn validate(&self) -> Result<()> {
        for (name, motor) in [("x", &self.x), ("y", &self.y), ("z", &self.z)] {
            if motor.steps_per_rev == 0 {
                return Err(config_err(format!("steps_per_rev.{name} must be positive")));
            }
            if motor.distance_per_rev_mm <= 0.0 {
                return Err(config_err(format!(
                    "distance_per_rev.{name} must be positive, got {}",
                    motor.distance_per_rev_mm
                )));
            }
        }
        for (name, motor) in [("az", &self.azimuth), ("inc", &self.inclination)] {
            if motor.degree_per_step <= 0.0 {
                return Err(config_err(format!(
                    "degree_per_step.{name} must be positive, got {}",
                    motor.degree_per_step
                )));
            }
        }
        for (name, range) in [
            ("x", self.travel.x),
            ("y", self.travel.y),
            ("z", self.travel.z),
        ] {
            if !range.min.is_finite() || !range.max.is_finite() || range.min >= range.max {
                return Err(config_err(format!(
                    "travel.{name}: min {} must be below max {}",
                    range.min, range.max
                )));
            }
        }
        if self.cure_duration_ms == 0 {
            return Err(config_err("cure_duration_ms must be positive"));
        }
        if self.voxel_pitch_um <= 0.0 {
            return Err(config_err("voxel_pitch_um must be positive"));
        }
        if self.z_tol_mm < 0.0 {
            return Err(config_err("z_tol_mm must not be negative"));
        }
        Ok(())
    }

    /// Short stable hash over every semantic field; embedded in program
    /// headers. Uses raw IEEE-754 bits, so two configs fingerprint equal iff
    /// their planning behavior is identical.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        let put_u32 = |h: &mut Sha256, v: u32| h.update(v.to_be_bytes());
        let put_f64 = |h: &mut Sha256, v: f64| h.update(v.to_bits().to_be_bytes());
        for motor in [&self.x, &self.y, &self.z] {
            put_u32(&mut hasher, motor.steps_per_rev);
            put_f64(&mut hasher, motor.distance_per_rev_mm);
        }
        for motor in [&self.azimuth, &self.inclination] {
            put_u32(&mut hasher, motor.steps_per_rev);
            put_f64(&mut hasher, motor.degree_per_step);
        }
        for range in [self.travel.x, self.travel.y, self.travel.z] {
            put_f64(&mut hasher, range.min);
            put_f64(&mut hasher, range.max);
        }
        put_u32(&mut hasher, self.cure_duration_ms);
        put_f64(&mut hasher, self.voxel_pitch_um);
        put_f64(&mut hasher, self.z_tol_mm);
        hasher.update([match self.position_convention {
            PositionConvention::Center => 0u8,
            PositionConvention::MinCorner => 1u8,
        }]);
        let digest = hasher.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Merge the two ways of stating a rotary resolution. Either key alone
/// defines the motor; together they must describe the same gearing.
fn reconcile_rotary(
    axis: &str,
    spr: Option<u32>,
    dps: Option<f64>,
    default: RotaryMotor,
) -> Result<RotaryMotor> {
    match (spr, dps) {
        (None, None) => Ok(default),
        (Some(spr), None) => Ok(RotaryMotor {
            steps_per_rev: spr,
            degree_per_step: 360.0 / spr as f64,
        }),
        (None, Some(dps)) => {
            if dps <= 0.0 {
                return Err(config_err(format!(
                    "degree_per_step.{axis} must be positive"
                )));
            }
            Ok(RotaryMotor::from_degree_per_step(dps))
        }
        (Some(spr), Some(dps)) => {
            if dps <= 0.0 {
                return Err(config_err(format!(
                    "degree_per_step.{axis} must be positive"
                )));
            }
            let product = spr as f64 * dps;
            if (product - 360.0).abs() > 360.0 * 1e-6 {
                return Err(config_err(format!(
                    "steps_per_rev.{axis} = {spr} and degree_per_step.{axis} = {dps} disagree ({product} deg per rev)"
                )));
            }
            Ok(RotaryMotor {
                steps_per_rev: spr,
                degree_per_step: dps,
            })
        }
    }
}
