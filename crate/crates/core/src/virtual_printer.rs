//! Program execution against a simulated machine, plus fidelity checking.
//!
//! The executor drives the same quantization code the planner uses, so a
//! fidelity failure points at the emitted coordinates or the program text,
//! not at a second implementation of the kinematics. A deliberately naive
//! executor (rounds every move independently, carries nothing) is kept
//! alongside as a contrast oracle: its positional error grows with program
//! length, which is exactly the drift the residual carry prevents.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gcode::{Instruction, Program};
use crate::kinematics::{
    apply_linear_move, apply_orientation, cartesian_to_spherical, spherical_to_cartesian,
    wrap_angle_deg, MachineConfig, MachineState,
};
use crate::path_planner::plan;
use crate::voxel_model::{Design, Vec3};

/// Machine pose captured at one cure instruction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReconstructedVoxel {
    /// Achieved build-plate position, mm.
    pub position: Vec3,
    /// Unit direction the magnet actually pointed at cure time.
    pub magnetization_direction: Vec3,
    pub azimuth_deg: f64,
    pub inclination_deg: f64,
    pub cure_ms: u32,
}

/// Per-voxel fidelity comparison in cure order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FidelityEntry {
    pub voxel_id: u64,
    /// Euclidean distance between designed and achieved centers, mm.
    pub position_error_mm: f64,
    /// Angle between designed and achieved magnetization, degrees.
    pub angular_error_deg: f64,
    /// Within one step per translation axis and one step per rotation axis.
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FidelityReport {
    pub pass: bool,
    pub design_count: usize,
    pub reconstructed_count: usize,
    pub max_position_error_mm: f64,
    pub mean_position_error_mm: f64,
    pub max_angular_error_deg: f64,
    pub mean_angular_error_deg: f64,
    pub entries: Vec<FidelityEntry>,
}

impl FidelityReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    fn count_mismatch(design_count: usize, reconstructed_count: usize) -> Self {
        FidelityReport {
            pass: false,
            design_count,
            reconstructed_count,
            max_position_error_mm: 0.0,
            mean_position_error_mm: 0.0,
            max_angular_error_deg: 0.0,
            mean_angular_error_deg: 0.0,
            entries: vec![],
        }
    }
}

fn check_fingerprint(p: &Program, cfg: &MachineConfig) -> Result<()> {
    let machine = cfg.fingerprint();
    if p.config_fingerprint != machine {
        return Err(Error::FingerprintMismatch {
            program: p.config_fingerprint.clone(),
            machine,
        });
    }
    Ok(())
}

fn reconstruct(state: &MachineState, cure_ms: u32) -> ReconstructedVoxel {
    ReconstructedVoxel {
        position: state.position,
        magnetization_direction: spherical_to_cartesian(state.azimuth_deg, state.inclination_deg),
        azimuth_deg: state.azimuth_deg,
        inclination_deg: state.inclination_deg,
        cure_ms,
    }
}

/// Run a program on the simulated machine and record the pose at every
/// cure. The program must have been planned for exactly this config.
pub fn execute(p: &Program, cfg: &MachineConfig) -> Result<Vec<ReconstructedVoxel>> {
    check_fingerprint(p, cfg)?;
    if !matches!(p.instructions.first(), Some(Instruction::Home) | None) {
        return Err(Error::Execution("program must begin with home".into()));
    }

    let mut state = MachineState::homed();
    let mut seen_move = false;
    let mut cured = Vec::new();
    for instruction in &p.instructions {
        match instruction {
            Instruction::Home => {
                state = MachineState::homed();
                seen_move = false;
            }
            Instruction::MoveTo { x, y, z } => {
                apply_linear_move(&mut state, Vec3::new(*x, *y, *z), cfg)?;
                seen_move = true;
            }
            Instruction::OrientMagnet {
                azimuth_deg,
                inclination_deg,
            } => {
                apply_orientation(&mut state, *azimuth_deg, *inclination_deg, cfg)?;
            }
            Instruction::Cure { duration_ms } => {
                if !seen_move {
                    return Err(Error::Execution("cure before first move".into()));
                }
                cured.push(reconstruct(&state, *duration_ms));
            }
            Instruction::Dwell { .. } | Instruction::Comment(_) => {}
        }
    }
    Ok(cured)
}

/// Contrast executor without residual carry: every move rounds its own
/// delta and the remainders are silently dropped, so position error takes a
/// random walk that grows with the number of moves.
pub fn execute_naive(p: &Program, cfg: &MachineConfig) -> Result<Vec<ReconstructedVoxel>> {
    check_fingerprint(p, cfg)?;
    if !matches!(p.instructions.first(), Some(Instruction::Home) | None) {
        return Err(Error::Execution("program must begin with home".into()));
    }

    let mut requested = Vec3::ZERO;
    let mut state = MachineState::homed();
    let mut requested_az = 0.0_f64;
    let mut requested_inc = 0.0_f64;
    let mut seen_move = false;
    let mut cured = Vec::new();
    for instruction in &p.instructions {
        match instruction {
            Instruction::Home => {
                requested = Vec3::ZERO;
                requested_az = 0.0;
                requested_inc = 0.0;
                state = MachineState::homed();
                seen_move = false;
            }
            Instruction::MoveTo { x, y, z } => {
                cfg.travel.check(Vec3::new(*x, *y, *z), None)?;
                let target = Vec3::new(*x, *y, *z);
                for (axis, spec) in [(0, cfg.x), (1, cfg.y), (2, cfg.z)] {
                    let (req, prev, achieved) = match axis {
                        0 => (target.x, requested.x, &mut state.position.x),
                        1 => (target.y, requested.y, &mut state.position.y),
                        _ => (target.z, requested.z, &mut state.position.z),
                    };
                    let steps = ((req - prev) / spec.step_distance_mm()).round();
                    *achieved += steps * spec.step_distance_mm();
                }
                requested = target;
                seen_move = true;
            }
            Instruction::OrientMagnet {
                azimuth_deg,
                inclination_deg,
            } => {
                let az_steps = (wrap_angle_deg(azimuth_deg - requested_az)
                    / cfg.azimuth.degree_per_step)
                    .round();
                state.azimuth_deg =
                    wrap_angle_deg(state.azimuth_deg + az_steps * cfg.azimuth.degree_per_step);
                requested_az = *azimuth_deg;
                let inc_steps =
                    ((inclination_deg - requested_inc) / cfg.inclination.degree_per_step).round();
                state.inclination_deg += inc_steps * cfg.inclination.degree_per_step;
                requested_inc = *inclination_deg;
            }
            Instruction::Cure { duration_ms } => {
                if !seen_move {
                    return Err(Error::Execution("cure before first move".into()));
                }
                cured.push(reconstruct(&state, *duration_ms));
            }
            Instruction::Dwell { .. } | Instruction::Comment(_) => {}
        }
    }
    Ok(cured)
}

/// Compare a design against what the virtual machine actually cured,
/// pairing voxels in cure order. Passes when every voxel landed within one
/// step per translation axis and one step per rotation axis.
pub fn compare(
    d: &Design,
    reconstructed: &[ReconstructedVoxel],
    cfg: &MachineConfig,
) -> FidelityReport {
    let Ok(path) = plan(d, cfg) else {
        return FidelityReport::count_mismatch(d.len(), reconstructed.len());
    };
    let order = path.ordered_ids();
    if order.len() != reconstructed.len() {
        return FidelityReport::count_mismatch(order.len(), reconstructed.len());
    }

    let pos_tol = [
        cfg.x.step_distance_mm() + 1e-12,
        cfg.y.step_distance_mm() + 1e-12,
        cfg.z.step_distance_mm() + 1e-12,
    ];
    let az_tol = cfg.azimuth.degree_per_step + 1e-9;
    let inc_tol = cfg.inclination.degree_per_step + 1e-9;

    let mut entries = Vec::with_capacity(order.len());
    for (id, got) in order.iter().zip(reconstructed) {
        let v = d.get(*id).expect("path ids come from the design");
        let delta = got.position.sub(v.position);
        let position_error_mm = delta.norm();
        let within_pos = delta.x.abs() <= pos_tol[0]
            && delta.y.abs() <= pos_tol[1]
            && delta.z.abs() <= pos_tol[2];

        let (angular_error_deg, within_ang) = match cartesian_to_spherical(&v.magnetization) {
            Ok((az, inc)) => {
                let cosine = v.magnetization.direction().dot(got.magnetization_direction);
                let angle = cosine.clamp(-1.0, 1.0).acos().to_degrees();
                let within = wrap_angle_deg(got.azimuth_deg - az).abs() <= az_tol
                    && (got.inclination_deg - inc).abs() <= inc_tol;
                (angle, within)
            }
            Err(_) => (f64::INFINITY, false),
        };

        entries.push(FidelityEntry {
            voxel_id: *id,
            position_error_mm,
            angular_error_deg,
            ok: within_pos && within_ang,
        });
    }

    let n = entries.len().max(1) as f64;
    FidelityReport {
        pass: entries.iter().all(|e| e.ok),
        design_count: order.len(),
        reconstructed_count: reconstructed.len(),
        max_position_error_mm: entries
            .iter()
            .map(|e| e.position_error_mm)
            .fold(0.0, f64::max),
        mean_position_error_mm: entries.iter().map(|e| e.position_error_mm).sum::<f64>() / n,
        max_angular_error_deg: entries
            .iter()
            .map(|e| e.angular_error_deg)
            .fold(0.0, f64::max),
        mean_angular_error_deg: entries.iter().map(|e| e.angular_error_deg).sum::<f64>() / n,
        entries,
    }
}
