//! Pose-to-step conversion for the five stepper motors.
//!
//! A target pose is a build-plate position plus a magnet orientation. Each
//! axis converts its delta from the current pose into motor revolutions,
//! then into a real step count, and rounds half away from zero to an
//! integer command. The machine state tracks the *achieved* pose (integer
//! steps times step size), so the sub-step remainder of one move is
//! automatically recovered by the next one and position error never
//! accumulates beyond a single step per axis.

pub mod config;

pub use config::{LinearMotor, MachineConfig, RotaryMotor};

use crate::error::{Error, Result};
use crate::voxel_model::{Magnetization, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Motor {
    X,
    Y,
    Z,
    Az,
    Inc,
}

/// One integer move of one motor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepCommand {
    pub motor: Motor,
    pub steps: i64,
}

/// Sub-step remainders left behind by the latest command, in steps.
/// Each stays within (-0.5, 0.5] by construction.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Residuals {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub az: f64,
    pub inc: f64,
}

/// Achieved machine pose. Every component is an exact integer multiple of
/// the corresponding step size away from the homed origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MachineState {
    pub position: Vec3,
    pub azimuth_deg: f64,
    pub inclination_deg: f64,
    pub residuals: Residuals,
}

impl MachineState {
    /// Pose after homing: origin, magnet at the +z pole, no residuals.
    pub fn homed() -> Self {
        MachineState {
            position: Vec3::ZERO,
            azimuth_deg: 0.0,
            inclination_deg: 0.0,
            residuals: Residuals::default(),
        }
    }
}

/// Revolutions a lead screw must turn to cover `motor_position_mm`.
pub fn required_trans_revs(motor_position_mm: f64, distance_per_rev_mm: f64) -> Result<f64> {
    if distance_per_rev_mm <= 0.0 {
        return Err(Error::Config(format!(
            "distance_per_rev must be positive, got {distance_per_rev_mm}"
        )));
    }
    Ok(motor_position_mm / distance_per_rev_mm)
}

/// Steps for a given number of revolutions. Kept as a real; integerization
/// happens once per move so remainders are not lost.
pub fn required_trans_steps(revs: f64, steps_per_rev: u32) -> f64 {
    steps_per_rev as f64 * revs
}

/// Steps a rotation motor must take to cover `motor_angle_deg`.
pub fn required_revo_steps(motor_angle_deg: f64, degree_per_step: f64) -> Result<f64> {
    if degree_per_step <= 0.0 {
        return Err(Error::Config(format!(
            "degree_per_step must be positive, got {degree_per_step}"
        )));
    }
    Ok(motor_angle_deg / degree_per_step)
}

/// Magnet gimbal angles for a magnetization direction.
///
/// Inclination is measured from +z in [0, 180] degrees; azimuth is the
/// in-plane angle in (-180, 180]. At the poles the azimuth is undefined and
/// fixed to 0 by convention.
pub fn cartesian_to_spherical(m: &Magnetization) -> Result<(f64, f64)> {
    if m.is_passive() || m.is_degenerate() {
        return Err(Error::DegenerateMagnetization(
            "cannot orient a zero magnetization".into(),
        ));
    }
    let dir = m.direction();
    let inclination = dir.z.clamp(-1.0, 1.0).acos().to_degrees();
    let azimuth = if dir.x == 0.0 && dir.y == 0.0 {
        0.0
    } else {
        let a = dir.y.atan2(dir.x).to_degrees();
        if a <= -180.0 {
            a + 360.0
        } else {
            a
        }
    };
    Ok((azimuth, inclination))
}

/// Unit direction for gimbal angles; inverse of [`cartesian_to_spherical`].
pub fn spherical_to_cartesian(azimuth_deg: f64, inclination_deg: f64) -> Vec3 {
    let az = azimuth_deg.to_radians();
    let inc = inclination_deg.to_radians();
    Vec3::new(inc.sin() * az.cos(), inc.sin() * az.sin(), inc.cos())
}

/// Wrap an angle delta into (-180, 180] so the gimbal always takes the
/// shorter way around.
pub fn wrap_angle_deg(delta: f64) -> f64 {
    let mut d = delta % 360.0;
    if d > 180.0 {
        d -= 360.0;
    } else if d <= -180.0 {
        d += 360.0;
    }
    d
}

/// Round half away from zero and report the remainder.
fn quantize_steps(real_steps: f64) -> (i64, f64) {
    let n = real_steps.round();
    (n as i64, real_steps - n)
}

fn push_command(commands: &mut Vec<StepCommand>, motor: Motor, steps: i64) {
    if steps != 0 {
        commands.push(StepCommand { motor, steps });
    }
}

/// Drive the three translation axes to `target` (absolute mm), mutating
/// `state` to the achieved position and appending nonzero step commands.
pub fn apply_linear_move(
    state: &mut MachineState,
    target: Vec3,
    cfg: &MachineConfig,
) -> Result<Vec<StepCommand>> {
    cfg.travel.check(target, None)?;
    let mut commands = Vec::new();
    let axes = [
        (Motor::X, cfg.x, target.x),
        (Motor::Y, cfg.y, target.y),
        (Motor::Z, cfg.z, target.z),
    ];
    for (motor, spec, target_mm) in axes {
        let current = match motor {
            Motor::X => state.position.x,
            Motor::Y => state.position.y,
            Motor::Z => state.position.z,
            _ => unreachable!(),
        };
        let revs = required_trans_revs(target_mm - current, spec.distance_per_rev_mm)?;
        let real_steps = required_trans_steps(revs, spec.steps_per_rev);
        let (steps, residual) = quantize_steps(real_steps);
        let achieved = current + steps as f64 * spec.step_distance_mm();
        match motor {
            Motor::X => {
                state.position.x = achieved;
                state.residuals.x = residual;
            }
            Motor::Y => {
                state.position.y = achieved;
                state.residuals.y = residual;
            }
            Motor::Z => {
                state.position.z = achieved;
                state.residuals.z = residual;
            }
            _ => unreachable!(),
        }
        push_command(&mut commands, motor, steps);
    }
    Ok(commands)
}

/// Reorient the magnet gimbal, wrapping the azimuth delta to the shorter
/// direction. Inclination moves directly within its [0, 180] range.
pub fn apply_orientation(
    state: &mut MachineState,
    azimuth_deg: f64,
    inclination_deg: f64,
    cfg: &MachineConfig,
) -> Result<Vec<StepCommand>> {
    let mut commands = Vec::new();

    let az_delta = wrap_angle_deg(azimuth_deg - state.azimuth_deg);
    let real = required_revo_steps(az_delta, cfg.azimuth.degree_per_step)?;
    let (steps, residual) = quantize_steps(real);
    state.azimuth_deg =
        wrap_angle_deg(state.azimuth_deg + steps as f64 * cfg.azimuth.degree_per_step);
    state.residuals.az = residual;
    push_command(&mut commands, Motor::Az, steps);

    let inc_delta = inclination_deg - state.inclination_deg;
    let real = required_revo_steps(inc_delta, cfg.inclination.degree_per_step)?;
    let (steps, residual) = quantize_steps(real);
    state.inclination_deg += steps as f64 * cfg.inclination.degree_per_step;
    state.residuals.inc = residual;
    push_command(&mut commands, Motor::Inc, steps);

    Ok(commands)
}

/// Full move to a cure pose: translate, then orient the magnet for the
/// target magnetization. Returns the command list and the achieved state.
pub fn plan_move(
    state: &MachineState,
    target_pos: Vec3,
    target_m: &Magnetization,
    cfg: &MachineConfig,
) -> Result<(Vec<StepCommand>, MachineState)> {
    let mut next = *state;
    let mut commands = apply_linear_move(&mut next, target_pos, cfg)?;
    let (az, inc) = cartesian_to_spherical(target_m)?;
    commands.extend(apply_orientation(&mut next, az, inc, cfg)?);
    Ok((commands, next))
}
