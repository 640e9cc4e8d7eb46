//! Quasi-static bending prediction for chain-like designs.
//!
//! A face-connected line of voxels becomes a pseudo-rigid-body chain: rigid
//! segments joined by torsional springs of stiffness E*I/L, bending in the
//! plane spanned by the chain axis and a fixed transverse direction. Each
//! segment carries its magnetization in the body frame, so the magnetic
//! energy couples joint angles to the applied field both through rotation
//! (torque) and, for non-uniform sources, through position (force).
//!
//! Equilibrium is the minimizer of
//!
//! ```text
//! U(theta) = sum_j 1/2 k_j theta_j^2  -  sum_i mu0 v_i M_i(theta) . H(x_i(theta))
//! ```
//!
//! found by damped Newton descent with an analytic gradient and a
//! finite-difference Hessian. The first segment is clamped at the base, so
//! n segments give n-1 degrees of freedom.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::magnetostatics::{field_at, field_jacobian, FieldSource, MU_0};
use crate::voxel_model::{Design, Vec3};

/// Gradient norm below which the chain counts as balanced, N*m.
pub const GRADIENT_TOL_NM: f64 = 1e-12;
/// Relative energy change considered stagnant.
pub const ENERGY_REL_TOL: f64 = 1e-14;
/// Stagnant iterations required before declaring convergence.
const STAGNANT_ITERS: usize = 3;
/// Iteration cap for the descent loop.
pub const MAX_ITERATIONS: usize = 10_000;

/// Axis the undeformed chain runs along.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainAxis {
    X,
    Y,
    Z,
}

impl ChainAxis {
    /// Orthonormal frame (a, b, c): a along the chain, c the transverse
    /// bending direction, b the hinge axis completing the triad.
    fn frame(self) -> (Vec3, Vec3, Vec3) {
        let (a, c) = match self {
            ChainAxis::X => (Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 0.0, 1.0)),
            ChainAxis::Y => (Vec3::new(0.0, 1.0, 0.0), Vec3::new(0.0, 0.0, 1.0)),
            ChainAxis::Z => (Vec3::new(0.0, 0.0, 1.0), Vec3::new(1.0, 0.0, 0.0)),
        };
        (a, c.cross(a), c)
    }
}

/// Elastic parameters of the cured composite. Poisson's ratio is recorded
/// for completeness but does not enter the 1D bending model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Material {
    pub elastic_modulus_pa: f64,
    pub poisson_ratio: f64,
}

/// One rigid link of the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    /// Extent along the chain axis, mm.
    pub length_mm: f64,
    /// Section extent along the hinge axis b, mm.
    pub width_mm: f64,
    /// Section extent along the bending direction c, mm.
    pub height_mm: f64,
    /// Magnetization in the undeformed body frame, A/m.
    pub magnetization_body: Vec3,
    pub volume_m3: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainModel {
    pub axis: ChainAxis,
    /// Clamped start point of the first segment, mm.
    pub base_mm: Vec3,
    pub segments: Vec<Segment>,
    /// Torsional stiffness per joint, N*m/rad; `segments.len() - 1` entries.
    pub joint_stiffness_nm: Vec<f64>,
    pub material: Material,
}

impl ChainModel {
    pub fn joint_count(&self) -> usize {
        self.segments.len().saturating_sub(1)
    }

    pub fn total_length_mm(&self) -> f64 {
        self.segments.iter().map(|s| s.length_mm).sum()
    }
}

/// Solved equilibrium state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumResult {
    /// Joint angles in radians, base to tip.
    pub joint_angles: Vec<f64>,
    /// Displacement of the distal end from its undeformed position, mm.
    pub tip_displacement_mm: Vec3,
    pub energy_j: f64,
    pub residual_norm: f64,
    pub iterations: usize,
}

/// Scenario file contents for a bending preview run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreviewScenario {
    pub field: FieldSource,
    /// Material magnetization magnitude applied to voxel directions, A/m.
    pub magnetization_a_per_m: f64,
    pub material: Material,
    pub chain_axis: ChainAxis,
}

const CHAIN_TOL_MM: f64 = 1e-6;

fn axis_component(v: Vec3, unit: Vec3) -> f64 {
    // unit is one of +/- x/y/z, so the dot picks the component directly.
    v.dot(unit)
}

/// Build a chain from a design whose voxels form one face-connected line
/// along `axis`. Voxel magnetization directions are scaled by the scenario
/// magnitude `m_a_per_m`; passive voxels become unmagnetized segments.
pub fn build_chain(
    d: &Design,
    material: Material,
    axis: ChainAxis,
    m_a_per_m: f64,
) -> Result<ChainModel> {
    if d.is_empty() {
        return Err(Error::EmptyInput(format!(
            "design \"{}\" has no voxels",
            d.name
        )));
    }
    if material.elastic_modulus_pa <= 0.0 {
        return Err(Error::Config(format!(
            "elastic modulus must be positive, got {}",
            material.elastic_modulus_pa
        )));
    }

    let (a, b, c) = axis.frame();
    let mut sorted: Vec<&crate::voxel_model::Voxel> = d.voxels.iter().collect();
    sorted.sort_by(|p, q| axis_component(p.position, a).total_cmp(&axis_component(q.position, a)));

    // Every voxel must line up on the chain axis and touch its neighbor
    // face to face.
    let first = sorted[0];
    for v in &sorted[1..] {
        let db = (axis_component(v.position, b) - axis_component(first.position, b)).abs();
        let dc = (axis_component(v.position, c) - axis_component(first.position, c)).abs();
        if db > CHAIN_TOL_MM || dc > CHAIN_TOL_MM {
            return Err(Error::NotAChain(format!(
                "voxel {} is off the chain axis (use a full FEM tool for branched designs)",
                v.id
            )));
        }
    }
    for pair in sorted.windows(2) {
        let gap = axis_component(pair[1].position, a) - axis_component(pair[0].position, a);
        let expected =
            (axis_component(pair[0].dims, a).abs() + axis_component(pair[1].dims, a).abs()) / 2.0;
        if (gap - expected).abs() > CHAIN_TOL_MM {
            return Err(Error::NotAChain(format!(
                "voxels {} and {} do not share a face along the chain axis",
                pair[0].id, pair[1].id
            )));
        }
    }

    let mut segments = Vec::with_capacity(sorted.len());
    for v in &sorted {
        segments.push(Segment {
            length_mm: axis_component(v.dims, a).abs(),
            width_mm: axis_component(v.dims, b).abs(),
            height_mm: axis_component(v.dims, c).abs(),
            magnetization_body: v.magnetization.direction().scale(m_a_per_m),
            volume_m3: v.volume_m3(),
        });
    }

    // Joint stiffness E*I/L from the distal segment's section, SI units.
    let mut joint_stiffness_nm = Vec::with_capacity(segments.len().saturating_sub(1));
    for s in &segments[1..] {
        let w_m = s.width_mm * 1e-3;
        let h_m = s.height_mm * 1e-3;
        let l_m = s.length_mm * 1e-3;
        let second_moment = w_m * h_m.powi(3) / 12.0;
        joint_stiffness_nm.push(material.elastic_modulus_pa * second_moment / l_m);
    }

    let base_mm = first.position.sub(a.scale(segments[0].length_mm / 2.0));
    Ok(ChainModel {
        axis,
        base_mm,
        segments,
        joint_stiffness_nm,
        material,
    })
}

/// Per-configuration kinematics: cumulative angles, segment directions and
/// their angle-derivatives, and segment centers in mm.
struct Frames {
    directions: Vec<Vec3>,
    tangent_derivs: Vec<Vec3>,
    centers_mm: Vec<Vec3>,
    tip_mm: Vec3,
}

fn frames(c: &ChainModel, theta: &[f64]) -> Frames {
    let (a, _, cv) = c.axis.frame();
    let n = c.segments.len();
    let mut directions = Vec::with_capacity(n);
    let mut tangent_derivs = Vec::with_capacity(n);
    let mut centers_mm = Vec::with_capacity(n);
    let mut cursor = c.base_mm;
    let mut phi = 0.0;
    for (i, s) in c.segments.iter().enumerate() {
        if i > 0 {
            phi += theta[i - 1];
        }
        let dir = a.scale(phi.cos()).add(cv.scale(phi.sin()));
        let deriv = a.scale(-phi.sin()).add(cv.scale(phi.cos()));
        centers_mm.push(cursor.add(dir.scale(s.length_mm / 2.0)));
        cursor = cursor.add(dir.scale(s.length_mm));
        directions.push(dir);
        tangent_derivs.push(deriv);
    }
    Frames {
        directions,
        tangent_derivs,
        centers_mm,
        tip_mm: cursor,
    }
}

/// World-frame magnetization of segment `i` at cumulative angle `phi`.
fn rotate_body(c: &ChainModel, m_body: Vec3, phi: f64) -> Vec3 {
    let (a, b, cv) = c.axis.frame();
    let ma = m_body.dot(a);
    let mb = m_body.dot(b);
    let mc = m_body.dot(cv);
    a.scale(ma * phi.cos() - mc * phi.sin())
        .add(b.scale(mb))
        .add(cv.scale(ma * phi.sin() + mc * phi.cos()))
}

fn rotate_body_deriv(c: &ChainModel, m_body: Vec3, phi: f64) -> Vec3 {
    let (a, _, cv) = c.axis.frame();
    let ma = m_body.dot(a);
    let mc = m_body.dot(cv);
    a.scale(-ma * phi.sin() - mc * phi.cos())
        .add(cv.scale(ma * phi.cos() - mc * phi.sin()))
}

fn cumulative_angles(c: &ChainModel, theta: &[f64]) -> Vec<f64> {
    let mut phis = Vec::with_capacity(c.segments.len());
    let mut phi = 0.0;
    for i in 0..c.segments.len() {
        if i > 0 {
            phi += theta[i - 1];
        }
        phis.push(phi);
    }
    phis
}

/// Total potential energy at a configuration, J.
pub fn chain_energy(c: &ChainModel, src: &FieldSource, theta: &[f64]) -> Result<f64> {
    let f = frames(c, theta);
    let phis = cumulative_angles(c, theta);
    let mut u = 0.0;
    for (k, t) in c.joint_stiffness_nm.iter().zip(theta) {
        u += 0.5 * k * t * t;
    }
    for (i, s) in c.segments.iter().enumerate() {
        let m_world = rotate_body(c, s.magnetization_body, phis[i]);
        let h = field_at(src, f.centers_mm[i])?;
        u -= MU_0 * s.volume_m3 * m_world.dot(h);
    }
    Ok(u)
}

/// Analytic gradient of [`chain_energy`] with respect to the joint angles,
/// N*m per radian.
pub fn chain_gradient(c: &ChainModel, src: &FieldSource, theta: &[f64]) -> Result<Vec<f64>> {
    let f = frames(c, theta);
    let phis = cumulative_angles(c, theta);
    let n = c.segments.len();

    // Per-segment field data at the current configuration.
    let mut fields = Vec::with_capacity(n);
    let mut jacobians = Vec::with_capacity(n);
    let mut m_world = Vec::with_capacity(n);
    let mut m_deriv = Vec::with_capacity(n);
    for (i, s) in c.segments.iter().enumerate() {
        fields.push(field_at(src, f.centers_mm[i])?);
        jacobians.push(field_jacobian(src, f.centers_mm[i])?);
        m_world.push(rotate_body(c, s.magnetization_body, phis[i]));
        m_deriv.push(rotate_body_deriv(c, s.magnetization_body, phis[i]));
    }

    let mut grad = Vec::with_capacity(c.joint_count());
    for (j, (&k_j, &theta_j)) in c.joint_stiffness_nm.iter().zip(theta).enumerate() {
        let mut g = k_j * theta_j;
        // Joint j moves every segment beyond it: their magnetization
        // rotates and their center translates.
        let mut partial_mm = Vec3::ZERO;
        for i in (j + 1)..n {
            let s = &c.segments[i];
            let rotation_term = m_deriv[i].dot(fields[i]);
            let dx_mm = partial_mm.add(f.tangent_derivs[i].scale(s.length_mm / 2.0));
            let dx_m = dx_mm.scale(1e-3);
            let jac = &jacobians[i];
            let dh = Vec3::new(
                jac[0][0] * dx_m.x + jac[0][1] * dx_m.y + jac[0][2] * dx_m.z,
                jac[1][0] * dx_m.x + jac[1][1] * dx_m.y + jac[1][2] * dx_m.z,
                jac[2][0] * dx_m.x + jac[2][1] * dx_m.y + jac[2][2] * dx_m.z,
            );
            let translation_term = m_world[i].dot(dh);
            g -= MU_0 * s.volume_m3 * (rotation_term + translation_term);
            partial_mm = partial_mm.add(f.tangent_derivs[i].scale(s.length_mm));
        }
        grad.push(g);
    }
    Ok(grad)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Solve `A x = b` by Gaussian elimination with partial pivoting. Returns
/// `None` for a numerically singular system.
#[allow(clippy::needless_range_loop)]
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut sum = b[col];
        for k in (col + 1)..n {
            sum -= a[col][k] * x[k];
        }
        x[col] = sum / a[col][col];
    }
    Some(x)
}

#[allow(clippy::needless_range_loop)]
fn fd_hessian(c: &ChainModel, src: &FieldSource, theta: &[f64]) -> Result<Vec<Vec<f64>>> {
    let n = theta.len();
    let h = 1e-6;
    let mut hessian = vec![vec![0.0; n]; n];
    let mut probe = theta.to_vec();
    for (a, row) in hessian.iter_mut().enumerate() {
        probe[a] = theta[a] + h;
        let plus = chain_gradient(c, src, &probe)?;
        probe[a] = theta[a] - h;
        let minus = chain_gradient(c, src, &probe)?;
        probe[a] = theta[a];
        for ((slot, p), m) in row.iter_mut().zip(&plus).zip(&minus) {
            *slot = (p - m) / (2.0 * h);
        }
    }
    // Symmetrize away finite-difference noise.
    for a in 0..n {
        for b in (a + 1)..n {
            let mean = (hessian[a][b] + hessian[b][a]) / 2.0;
            hessian[a][b] = mean;
            hessian[b][a] = mean;
        }
    }
    Ok(hessian)
}

/// Minimize the chain energy by damped Newton descent starting from the
/// straight configuration.
pub fn solve_equilibrium(c: &ChainModel, src: &FieldSource) -> Result<EquilibriumResult> {
    let n = c.joint_count();
    if n == 0 {
        let energy = chain_energy(c, src, &[])?;
        return Ok(EquilibriumResult {
            joint_angles: vec![],
            tip_displacement_mm: Vec3::ZERO,
            energy_j: energy,
            residual_norm: 0.0,
            iterations: 0,
        });
    }

    let k_scale = c
        .joint_stiffness_nm
        .iter()
        .cloned()
        .fold(f64::MIN, f64::max)
        .max(1e-30);
    let mut theta = vec![0.0; n];
    let mut energy = chain_energy(c, src, &theta)?;
    let mut lambda = 1e-3 * k_scale;
    let mut stagnant = 0;
    let mut residual = f64::INFINITY;

    for iteration in 0..MAX_ITERATIONS {
        let gradient = chain_gradient(c, src, &theta)?;
        residual = norm(&gradient);
        if residual < GRADIENT_TOL_NM || stagnant >= STAGNANT_ITERS {
            return Ok(finish(c, theta, energy, residual, iteration));
        }

        let hessian = fd_hessian(c, src, &theta)?;
        let mut accepted = false;
        for _ in 0..60 {
            let mut damped = hessian.clone();
            for (d, row) in damped.iter_mut().enumerate() {
                row[d] += lambda;
            }
            let rhs: Vec<f64> = gradient.iter().map(|g| -g).collect();
            if let Some(step) = solve_linear(damped, rhs) {
                let candidate: Vec<f64> = theta.iter().zip(&step).map(|(t, s)| t + s).collect();
                let candidate_energy = chain_energy(c, src, &candidate)?;
                if candidate_energy <= energy {
                    let relative_drop = (energy - candidate_energy).abs() / energy.abs().max(1e-30);
                    stagnant = if relative_drop < ENERGY_REL_TOL {
                        stagnant + 1
                    } else {
                        0
                    };
                    theta = candidate;
                    energy = candidate_energy;
                    lambda = (lambda / 10.0).max(1e-12 * k_scale);
                    accepted = true;
                    break;
                }
            }
            lambda *= 10.0;
            if lambda > 1e15 * k_scale {
                break;
            }
        }
        if !accepted {
            return Err(Error::Convergence {
                iterations: iteration + 1,
                residual,
            });
        }
    }

    Err(Error::Convergence {
        iterations: MAX_ITERATIONS,
        residual,
    })
}

fn finish(
    c: &ChainModel,
    theta: Vec<f64>,
    energy: f64,
    residual: f64,
    iterations: usize,
) -> EquilibriumResult {
    let tip = tip_deflection_angles(c, &theta);
    EquilibriumResult {
        joint_angles: theta,
        tip_displacement_mm: tip,
        energy_j: energy,
        residual_norm: residual,
        iterations,
    }
}

fn tip_deflection_angles(c: &ChainModel, theta: &[f64]) -> Vec3 {
    let (a, _, _) = c.axis.frame();
    let bent = frames(c, theta).tip_mm;
    let straight = c.base_mm.add(a.scale(c.total_length_mm()));
    bent.sub(straight)
}

/// Displacement of the chain's distal end for a solved result, mm.
pub fn tip_deflection(r: &EquilibriumResult, c: &ChainModel) -> Vec3 {
    tip_deflection_angles(c, &r.joint_angles)
}

/// Side-view SVG of the undeformed (gray) and equilibrium (blue) chain in
/// the bending plane. Coordinates are micrometers.
pub fn render_svg(c: &ChainModel, r: &EquilibriumResult) -> String {
    let (a, _, cv) = c.axis.frame();
    let project = |p: Vec3| (p.dot(a) * 1e3, -p.dot(cv) * 1e3);

    let polyline_points = |theta: &[f64]| -> Vec<(f64, f64)> {
        let f = frames(c, theta);
        let mut pts = vec![project(c.base_mm)];
        let mut cursor = c.base_mm;
        for (s, dir) in c.segments.iter().zip(&f.directions) {
            cursor = cursor.add(dir.scale(s.length_mm));
            pts.push(project(cursor));
        }
        pts
    };

    let straight = polyline_points(&vec![0.0; c.joint_count()]);
    let bent = polyline_points(&r.joint_angles);

    let all: Vec<&(f64, f64)> = straight.iter().chain(bent.iter()).collect();
    let min_x = all.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let max_x = all.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let min_y = all.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let max_y = all.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let pad = ((max_x - min_x).max(max_y - min_y) * 0.1).max(10.0);

    let points_attr = |pts: &[(f64, f64)]| {
        pts.iter()
            .map(|(x, y)| format!("{x:.3},{y:.3}"))
            .collect::<Vec<_>>()
            .join(" ")
    };

    format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{:.3} {:.3} {:.3} {:.3}\" ",
            "width=\"480\" height=\"360\">\n",
            "  <polyline fill=\"none\" stroke=\"#b0b0b0\" stroke-width=\"{:.3}\" points=\"{}\"/>\n",
            "  <polyline fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"{:.3}\" points=\"{}\"/>\n",
            "  <circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"{:.3}\" fill=\"#333333\"/>\n",
            "</svg>\n"
        ),
        min_x - pad,
        min_y - pad,
        (max_x - min_x) + 2.0 * pad,
        (max_y - min_y) + 2.0 * pad,
        pad * 0.2,
        points_attr(&straight),
        pad * 0.2,
        points_attr(&bent),
        straight[0].0,
        straight[0].1,
        pad * 0.3,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::voxel_model::{Magnetization, Voxel};

    const E_PA: f64 = 4.6e6;
    const NU: f64 = 0.49;
    const M_A_PER_M: f64 = 8e4;

    fn material() -> Material {
        Material {
            elastic_modulus_pa: E_PA,
            poisson_ratio: NU,
        }
    }

    /// n cubes of side `pitch` mm in a line along x, magnetized along `dir`.
    fn line_design(n: usize, pitch: f64, dir: Vec3) -> Design {
        let voxels = (0..n)
            .map(|i| {
                Voxel::new(
                    i as u64 + 1,
                    Vec3::new(pitch / 2.0 + i as f64 * pitch, 0.0, 0.0),
                    Vec3::new(pitch, pitch, pitch),
                    Magnetization::new(dir, 1.0).unwrap(),
                )
            })
            .collect();
        Design::new("line", voxels).unwrap()
    }

    fn x_dir() -> Vec3 {
        Vec3::new(1.0, 0.0, 0.0)
    }

    #[test]
    fn four_cubes_make_three_joints() {
        let d = line_design(4, 0.05, x_dir());
        let c = build_chain(&d, material(), ChainAxis::X, M_A_PER_M).unwrap();
        assert_eq!(c.segments.len(), 4);
        assert_eq!(c.joint_count(), 3);
        assert_eq!(c.base_mm, Vec3::ZERO);
        // k = E * (w h^3 / 12) / L with 50 um cube sections.
        let w: f64 = 0.05e-3;
        let expected = E_PA * (w * w.powi(3) / 12.0) / w;
        for k in &c.joint_stiffness_nm {
            assert!((k - expected).abs() / expected < 1e-12);
        }
    }

    #[test]
    fn gripper_scale_chain_builds() {
        let d = line_design(6, 0.025, Vec3::new(0.0, 0.0, 1.0));
        let c = build_chain(&d, material(), ChainAxis::X, M_A_PER_M).unwrap();
        assert_eq!(c.segments.len(), 6);
        assert!((c.total_length_mm() - 0.15).abs() < 1e-12);
    }

    #[test]
    fn l_shape_is_not_a_chain() {
        let mut voxels = line_design(3, 0.05, x_dir()).voxels;
        voxels.push(Voxel::new(
            9,
            Vec3::new(0.125, 0.05, 0.0),
            Vec3::new(0.05, 0.05, 0.05),
            Magnetization::new(x_dir(), 1.0).unwrap(),
        ));
        let d = Design::new("l", voxels).unwrap();
        assert!(matches!(
            build_chain(&d, material(), ChainAxis::X, M_A_PER_M),
            Err(Error::NotAChain(_))
        ));
    }

    #[test]
    fn gap_in_the_line_is_not_a_chain() {
        let mut d = line_design(3, 0.05, x_dir());
        d.voxels[2].position.x += 0.05;
        assert!(matches!(
            build_chain(&d, material(), ChainAxis::X, M_A_PER_M),
            Err(Error::NotAChain(_))
        ));
    }

    #[test]
    fn zero_field_stays_straight() {
        let d = line_design(4, 0.05, x_dir());
        let c = build_chain(&d, material(), ChainAxis::X, M_A_PER_M).unwrap();
        let src = FieldSource::Uniform {
            b_tesla: Vec3::ZERO,
        };
        let r = solve_equilibrium(&c, &src).unwrap();
        assert_eq!(r.joint_angles, vec![0.0; 3]);
        assert_eq!(r.tip_displacement_mm, Vec3::ZERO);
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn perpendicular_field_bends_toward_it() {
        let d = line_design(4, 0.05, x_dir());
        let c = build_chain(&d, material(), ChainAxis::X, M_A_PER_M).unwrap();
        let src = FieldSource::Uniform {
            b_tesla: Vec3::new(0.0, 0.0, 0.004),
        };
        let r = solve_equilibrium(&c, &src).unwrap();
        // Magnetized +x, field +z: the chain curls upward.
        assert!(
            r.joint_angles.iter().all(|t| *t > 0.0),
            "{:?}",
            r.joint_angles
        );
        assert!(r.tip_displacement_mm.z > 0.0);
        assert!(r.energy_j <= chain_energy(&c, &src, &[0.0; 3]).unwrap());
    }

    #[test]
    fn deflection_grows_with_field_strength() {
        let d = line_design(4, 0.05, x_dir());
        let c = build_chain(&d, material(), ChainAxis::X, M_A_PER_M).unwrap();
        let mut previous = 0.0;
        for mt in [1.0, 2.0, 4.0] {
            let src = FieldSource::Uniform {
                b_tesla: Vec3::new(0.0, 0.0, mt * 1e-3),
            };
            let r = solve_equilibrium(&c, &src).unwrap();
            let deflection = r.tip_displacement_mm.norm();
            assert!(deflection > previous, "deflection {deflection} at {mt} mT");
            previous = deflection;
        }
    }

    #[test]
    fn mirrored_field_mirrors_the_angles() {
        let d = line_design(4, 0.05, x_dir());
        let c = build_chain(&d, material(), ChainAxis::X, M_A_PER_M).unwrap();
        let up = FieldSource::Uniform {
            b_tesla: Vec3::new(0.0, 0.0, 0.004),
        };
        let down = FieldSource::Uniform {
            b_tesla: Vec3::new(0.0, 0.0, -0.004),
        };
        let ru = solve_equilibrium(&c, &up).unwrap();
        let rd = solve_equilibrium(&c, &down).unwrap();
        for (u, d) in ru.joint_angles.iter().zip(&rd.joint_angles) {
            assert!((u + d).abs() < 1e-6, "{u} vs {d}");
        }
    }

    #[test]
    fn stiffer_joints_deflect_less() {
        let d = line_design(4, 0.05, x_dir());
        let soft = build_chain(&d, material(), ChainAxis::X, M_A_PER_M).unwrap();
        let mut stiff = soft.clone();
        for k in &mut stiff.joint_stiffness_nm {
            *k *= 2.0;
        }
        let src = FieldSource::Uniform {
            b_tesla: Vec3::new(0.0, 0.0, 0.004),
        };
        let soft_tip = solve_equilibrium(&soft, &src)
            .unwrap()
            .tip_displacement_mm
            .norm();
        let stiff_tip = solve_equilibrium(&stiff, &src)
            .unwrap()
            .tip_displacement_mm
            .norm();
        assert!(stiff_tip < soft_tip);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        use rand::{Rng, SeedableRng};
        let d = line_design(5, 0.05, Vec3::new(0.6, 0.0, 0.8));
        let c = build_chain(&d, material(), ChainAxis::X, M_A_PER_M).unwrap();
        let sources = [
            FieldSource::Uniform {
                b_tesla: Vec3::new(0.001, 0.0, 0.003),
            },
            FieldSource::Dipole {
                moment_a_m2: Vec3::new(0.0, 0.0, 0.5),
                position_mm: Vec3::new(0.1, 0.0, -5.0),
            },
        ];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let h = 1e-5;
        for src in &sources {
            for _ in 0..10 {
                let theta: Vec<f64> = (0..4).map(|_| rng.gen_range(-0.3..0.3)).collect();
                let analytic = chain_gradient(&c, src, &theta).unwrap();
                let mut fd = vec![0.0; 4];
                let mut probe = theta.clone();
                for (a, fd_a) in fd.iter_mut().enumerate() {
                    probe[a] = theta[a] + h;
                    let plus = chain_energy(&c, src, &probe).unwrap();
                    probe[a] = theta[a] - h;
                    let minus = chain_energy(&c, src, &probe).unwrap();
                    probe[a] = theta[a];
                    *fd_a = (plus - minus) / (2.0 * h);
                }
                let diff: f64 = analytic
                    .iter()
                    .zip(&fd)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                let scale = norm(&analytic).max(1e-30);
                assert!(
                    diff / scale < 1e-6,
                    "gradient mismatch: {analytic:?} vs {fd:?}"
                );
            }
        }
    }

    #[test]
    fn small_angle_tip_matches_linear_cantilever() {
        // Uniform chain, magnetization along the axis, field transverse.
        // Closed-form cantilever with distributed torque tau per segment:
        // tip angle = (tau/k) * n^2 / 2. Pick B so that angle is ~3.4 deg.
        let n = 32;
        let pitch = 0.05;
        let d = line_design(n, pitch, x_dir());
        let c = build_chain(&d, material(), ChainAxis::X, M_A_PER_M).unwrap();
        let k = c.joint_stiffness_nm[0];
        let v = c.segments[0].volume_m3;
        let theta_target = 0.06;
        let b = theta_target * k / (v * M_A_PER_M * (n * (n - 1)) as f64 / 2.0);
        let src = FieldSource::Uniform {
            b_tesla: Vec3::new(0.0, 0.0, b),
        };
        let r = solve_equilibrium(&c, &src).unwrap();
        let tip_angle: f64 = r.joint_angles.iter().sum();
        let tau = v * M_A_PER_M * b;
        let continuum = (tau / k) * (n * n) as f64 / 2.0;
        assert!(
            tip_angle < 0.0873,
            "tip angle {tip_angle} should stay below 5 deg"
        );
        let relative = (tip_angle - continuum).abs() / continuum;
        assert!(
            relative < 0.05,
            "tip angle {tip_angle} vs closed form {continuum}"
        );
    }

    #[test]
    fn single_joint_right_angle_displacement() {
        let d = line_design(2, 0.05, x_dir());
        let c = build_chain(&d, material(), ChainAxis::X, M_A_PER_M).unwrap();
        let r = EquilibriumResult {
            joint_angles: vec![std::f64::consts::FRAC_PI_2],
            tip_displacement_mm: Vec3::ZERO,
            energy_j: 0.0,
            residual_norm: 0.0,
            iterations: 0,
        };
        let tip = tip_deflection(&r, &c);
        let expected = 0.05 * 2.0_f64.sqrt();
        assert!((tip.norm() - expected).abs() < 1e-12);
    }

    #[test]
    fn tip_stays_within_total_length() {
        use rand::{Rng, SeedableRng};
        let d = line_design(6, 0.05, x_dir());
        let c = build_chain(&d, material(), ChainAxis::X, M_A_PER_M).unwrap();
        let total = c.total_length_mm();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let theta: Vec<f64> = (0..c.joint_count())
                .map(|_| rng.gen_range(-3.0..3.0))
                .collect();
            let tip = frames(&c, &theta).tip_mm;
            assert!(tip.sub(c.base_mm).norm() <= total + 1e-9);
        }
    }

    #[test]
    fn svg_contains_both_poses() {
        let d = line_design(4, 0.05, x_dir());
        let c = build_chain(&d, material(), ChainAxis::X, M_A_PER_M).unwrap();
        let src = FieldSource::Uniform {
            b_tesla: Vec3::new(0.0, 0.0, 0.004),
        };
        let r = solve_equilibrium(&c, &src).unwrap();
        let svg = render_svg(&c, &r);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        // Deterministic rendering.
        assert_eq!(svg, render_svg(&c, &r));
    }

    #[test]
    fn scenario_json_round_trip() {
        let scenario = PreviewScenario {
            field: FieldSource::Uniform {
                b_tesla: Vec3::new(0.0, 0.0, 0.004),
            },
            magnetization_a_per_m: M_A_PER_M,
            material: material(),
            chain_axis: ChainAxis::X,
        };
        let json = serde_json::to_string(&scenario).unwrap();
        let back: PreviewScenario = serde_json::from_str(&json).unwrap();
        assert_eq!(back, scenario);
        // Unknown fields are typos, not extensions.
        assert!(serde_json::from_str::<PreviewScenario>(
            "{\"field\":{\"type\":\"uniform\",\"b_tesla\":{\"x\":0,\"y\":0,\"z\":0}},\"magnetization_a_per_m\":1.0,\"material\":{\"elastic_modulus_pa\":1.0,\"poisson_ratio\":0.3},\"chain_axis\":\"x\",\"extra\":1}"
        )
        .is_err());
    }
}
