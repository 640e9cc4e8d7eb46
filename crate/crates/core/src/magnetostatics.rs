//! Field sources and the force/torque response of magnetized bodies.
//!
//! Physics runs in SI internally (meters, A/m, tesla); the public surface
//! takes positions in mm like the rest of the crate and converts at the
//! boundary. The external magnet is modeled as either a uniform field
//! (isolates rotation: its gradient vanishes, so it exerts torque but no
//! force) or a point dipole (exerts both, with a fully analytic Jacobian).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::voxel_model::{Design, Vec3};

/// Vacuum permeability, T·m/A.
pub const MU_0: f64 = 4.0e-7 * std::f64::consts::PI;

/// Closest allowed approach to a dipole singularity, mm.
pub const MIN_DIPOLE_DISTANCE_MM: f64 = 1e-6;

/// External magnet model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FieldSource {
    /// Homogeneous flux density, tesla.
    Uniform { b_tesla: Vec3 },
    /// Point dipole with moment in A·m^2 at a position in mm.
    Dipole {
        moment_a_m2: Vec3,
        position_mm: Vec3,
    },
}

/// A magnetized rigid body: magnetization vector (A/m) and volume (m^3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagneticBody {
    pub magnetization_a_per_m: Vec3,
    pub volume_m3: f64,
}

/// Magnetic field H at a point, A/m.
pub fn field_at(src: &FieldSource, p_mm: Vec3) -> Result<Vec3> {
    match src {
        FieldSource::Uniform { b_tesla } => Ok(b_tesla.scale(1.0 / MU_0)),
        FieldSource::Dipole {
            moment_a_m2,
            position_mm,
        } => {
            let r_mm = p_mm.sub(*position_mm);
            let distance_mm = r_mm.norm();
            if distance_mm < MIN_DIPOLE_DISTANCE_MM {
                return Err(Error::Singularity {
                    distance_mm,
                    min_mm: MIN_DIPOLE_DISTANCE_MM,
                });
            }
            let r = r_mm.scale(1e-3);
            let s = r.norm();
            let rhat = r.scale(1.0 / s);
            let m_dot_rhat = moment_a_m2.dot(rhat);
            let numerator = rhat.scale(3.0 * m_dot_rhat).sub(*moment_a_m2);
            Ok(numerator.scale(1.0 / (4.0 * std::f64::consts::PI * s.powi(3))))
        }
    }
}

/// Spatial Jacobian of H at a point: element `[i][j]` is dH_i/dx_j in
/// (A/m)/m. Zero for a uniform source; analytic (and symmetric) for a
/// dipole.
pub fn field_jacobian(src: &FieldSource, p_mm: Vec3) -> Result<[[f64; 3]; 3]> {
    match src {
        FieldSource::Uniform { .. } => Ok([[0.0; 3]; 3]),
        FieldSource::Dipole {
            moment_a_m2,
            position_mm,
        } => {
            let r_mm = p_mm.sub(*position_mm);
            let distance_mm = r_mm.norm();
            if distance_mm < MIN_DIPOLE_DISTANCE_MM {
                return Err(Error::Singularity {
                    distance_mm,
                    min_mm: MIN_DIPOLE_DISTANCE_MM,
                });
            }
            let r = r_mm.scale(1e-3);
            let s = r.norm();
            let m = [moment_a_m2.x, moment_a_m2.y, moment_a_m2.z];
            let rv = [r.x, r.y, r.z];
            let m_dot_r = moment_a_m2.dot(r);
            let s5 = s.powi(5);
            let s7 = s.powi(7);
            let mut jac = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    let delta = if i == j { 1.0 } else { 0.0 };
                    jac[i][j] = (3.0 * (m[j] * rv[i] + m[i] * rv[j] + m_dot_r * delta) / s5
                        - 15.0 * m_dot_r * rv[i] * rv[j] / s7)
                        / (4.0 * std::f64::consts::PI);
                }
            }
            Ok(jac)
        }
    }
}

/// Flux density B = mu * H, tesla. `mu` is the material's absolute
/// permeability in T·m/A (vacuum: [`MU_0`]).
pub fn flux_density(h: Vec3, mu: f64) -> Result<Vec3> {
    if mu <= 0.0 {
        return Err(Error::Config(format!(
            "permeability must be positive, got {mu}"
        )));
    }
    Ok(h.scale(mu))
}

/// Torque on a body in field H: mu0 * v * (M x H), N·m.
pub fn torque(body: &MagneticBody, h: Vec3) -> Vec3 {
    body.magnetization_a_per_m
        .cross(h)
        .scale(MU_0 * body.volume_m3)
}

/// Force on a body at `p_mm`: mu0 * v * [M . dH/dx, M . dH/dy, M . dH/dz],
/// N. Identically zero in a uniform field.
pub fn force(body: &MagneticBody, src: &FieldSource, p_mm: Vec3) -> Result<Vec3> {
    let jac = field_jacobian(src, p_mm)?;
    let m = body.magnetization_a_per_m;
    let grad_dot = Vec3::new(
        m.x * jac[0][0] + m.y * jac[1][0] + m.z * jac[2][0],
        m.x * jac[0][1] + m.y * jac[1][1] + m.z * jac[2][1],
        m.x * jac[0][2] + m.y * jac[1][2] + m.z * jac[2][2],
    );
    Ok(grad_dot.scale(MU_0 * body.volume_m3))
}

/// Per-voxel force/torque table as CSV (`id,fx,fy,fz,tx,ty,tz`, N and N·m).
/// Voxel directions are scaled by the material magnetization
/// `m_a_per_m`; passive voxels contribute zero rows.
pub fn force_torque_table(d: &Design, m_a_per_m: f64, src: &FieldSource) -> Result<String> {
    let mut out = String::from("id,fx,fy,fz,tx,ty,tz\n");
    for v in &d.voxels {
        let body = MagneticBody {
            magnetization_a_per_m: v.magnetization.direction().scale(m_a_per_m),
            volume_m3: v.volume_m3(),
        };
        let f = force(&body, src, v.position)?;
        let h = field_at(src, v.position)?;
        let t = torque(&body, h);
        out.push_str(&format!(
            "{},{:e},{:e},{:e},{:e},{:e},{:e}\n",
            v.id, f.x, f.y, f.z, t.x, t.y, t.z
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn body(m: Vec3) -> MagneticBody {
        MagneticBody {
            magnetization_a_per_m: m,
            volume_m3: 1.25e-13,
        }
    }

    #[test]
    fn uniform_four_millitesla_field() {
        let src = FieldSource::Uniform {
            b_tesla: Vec3::new(0.0, 0.0, 0.004),
        };
        let h = field_at(&src, Vec3::new(1.0, -2.0, 3.0)).unwrap();
        assert_eq!(h.x, 0.0);
        assert_eq!(h.y, 0.0);
        assert!((h.z - 3183.098861).abs() < 1e-5);
        // Eq of state: B = mu0 H recovers the input exactly.
        let b = flux_density(h, MU_0).unwrap();
        assert!((b.z - 0.004).abs() < 1e-18);
    }

    #[test]
    fn dipole_on_axis_field_is_parallel_and_double() {
        let m = Vec3::new(0.0, 0.0, 2.5);
        let src = FieldSource::Dipole {
            moment_a_m2: m,
            position_mm: Vec3::ZERO,
        };
        let p = Vec3::new(0.0, 0.0, 10.0);
        let h = field_at(&src, p).unwrap();
        assert!(h.x.abs() < 1e-12 && h.y.abs() < 1e-12);
        let s = 0.01_f64;
        let expected = 2.0 * 2.5 / (4.0 * std::f64::consts::PI * s.powi(3));
        assert!((h.z - expected).abs() / expected < 1e-12);
    }

    #[test]
    fn dipole_field_decays_cubically() {
        let src = FieldSource::Dipole {
            moment_a_m2: Vec3::new(0.0, 0.0, 1.0),
            position_mm: Vec3::ZERO,
        };
        let near = field_at(&src, Vec3::new(0.0, 0.0, 5.0)).unwrap().norm();
        let far = field_at(&src, Vec3::new(0.0, 0.0, 10.0)).unwrap().norm();
        assert!((near / far - 8.0).abs() < 1e-9);
    }

    #[test]
    fn singular_evaluation_rejected() {
        let src = FieldSource::Dipole {
            moment_a_m2: Vec3::new(0.0, 0.0, 1.0),
            position_mm: Vec3::ZERO,
        };
        assert!(matches!(
            field_at(&src, Vec3::new(0.0, 0.0, 1e-9)),
            Err(Error::Singularity { .. })
        ));
    }

    #[test]
    fn flux_density_basics() {
        let b = flux_density(Vec3::new(0.0, 0.0, 1.0), MU_0).unwrap();
        assert_eq!(b.z, MU_0);
        assert_eq!(flux_density(Vec3::ZERO, 3.0).unwrap(), Vec3::ZERO);
        let doubled = flux_density(Vec3::new(1.0, 2.0, 3.0), 2.0 * MU_0).unwrap();
        let single = flux_density(Vec3::new(1.0, 2.0, 3.0), MU_0).unwrap();
        assert!((doubled.norm() - 2.0 * single.norm()).abs() < 1e-18);
        assert!(flux_density(Vec3::ZERO, 0.0).is_err());
    }

    #[test]
    fn parallel_magnetization_gives_zero_torque() {
        let h = Vec3::new(0.0, 0.0, 1000.0);
        let t = torque(&body(Vec3::new(0.0, 0.0, 5e4)), h);
        assert_eq!(t, Vec3::ZERO);
    }

    #[test]
    fn crossed_magnetization_torque_sign() {
        // M along x, H along z: M x H points along -y.
        let m = 5e4;
        let h_mag = 1000.0;
        let b = body(Vec3::new(m, 0.0, 0.0));
        let t = torque(&b, Vec3::new(0.0, 0.0, h_mag));
        let expected = MU_0 * b.volume_m3 * m * h_mag;
        assert!((t.y + expected).abs() / expected < 1e-12);
        assert_eq!(t.x, 0.0);
        assert_eq!(t.z, 0.0);
    }

    #[test]
    fn torque_is_orthogonal_to_m_and_h() {
        let b = body(Vec3::new(3e4, -2e4, 1e4));
        let h = Vec3::new(500.0, 800.0, -300.0);
        let t = torque(&b, h);
        let scale = t.norm() * b.magnetization_a_per_m.norm();
        assert!(t.dot(b.magnetization_a_per_m).abs() / scale < 1e-12);
        let scale = t.norm() * h.norm();
        assert!(t.dot(h).abs() / scale < 1e-12);
    }

    #[test]
    fn torque_magnitude_peaks_at_ninety_degrees() {
        let h = Vec3::new(0.0, 0.0, 3183.0);
        let mut best_angle = 0.0;
        let mut best = -1.0;
        let mut angle = 0.0_f64;
        while angle <= 180.0 {
            let rad = angle.to_radians();
            let m = Vec3::new(rad.sin(), 0.0, rad.cos()).scale(5e4);
            let t = torque(&body(m), h).norm();
            if t > best {
                best = t;
                best_angle = angle;
            }
            angle += 1.0;
        }
        assert_eq!(best_angle, 90.0);
    }

    #[test]
    fn uniform_field_force_is_exactly_zero() {
        let src = FieldSource::Uniform {
            b_tesla: Vec3::new(0.01, -0.02, 0.004),
        };
        let f = force(
            &body(Vec3::new(3e4, 1e4, -2e4)),
            &src,
            Vec3::new(7.0, -3.0, 2.0),
        )
        .unwrap();
        assert_eq!(f, Vec3::ZERO);
    }

    fn finite_difference_force(b: &MagneticBody, src: &FieldSource, p_mm: Vec3, h_m: f64) -> Vec3 {
        let h_mm = h_m * 1e3;
        let mut out = [0.0; 3];
        for (j, out_j) in out.iter_mut().enumerate() {
            let mut plus = p_mm;
            let mut minus = p_mm;
            match j {
                0 => {
                    plus.x += h_mm;
                    minus.x -= h_mm;
                }
                1 => {
                    plus.y += h_mm;
                    minus.y -= h_mm;
                }
                _ => {
                    plus.z += h_mm;
                    minus.z -= h_mm;
                }
            }
            let hp = field_at(src, plus).unwrap();
            let hm = field_at(src, minus).unwrap();
            let dh = hp.sub(hm).scale(1.0 / (2.0 * h_m));
            *out_j = MU_0 * b.volume_m3 * b.magnetization_a_per_m.dot(dh);
        }
        Vec3::new(out[0], out[1], out[2])
    }

    #[test]
    fn analytic_force_matches_finite_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..25 {
            let src = FieldSource::Dipole {
                moment_a_m2: Vec3::new(
                    rng.gen_range(-5.0..5.0),
                    rng.gen_range(-5.0..5.0),
                    rng.gen_range(-5.0..5.0),
                ),
                position_mm: Vec3::ZERO,
            };
            let p = Vec3::new(
                rng.gen_range(5.0..30.0),
                rng.gen_range(5.0..30.0),
                rng.gen_range(5.0..30.0),
            );
            let b = body(Vec3::new(
                rng.gen_range(-5e4..5e4),
                rng.gen_range(-5e4..5e4),
                rng.gen_range(-5e4..5e4),
            ));
            let analytic = force(&b, &src, p).unwrap();
            let fd = finite_difference_force(&b, &src, p, 1e-6);
            let scale = analytic.norm().max(1e-30);
            assert!(
                analytic.sub(fd).norm() / scale < 1e-6,
                "analytic {analytic:?} vs fd {fd:?}"
            );
        }
    }

    #[test]
    fn aligned_body_is_pulled_toward_stronger_field() {
        let src = FieldSource::Dipole {
            moment_a_m2: Vec3::new(0.0, 0.0, 3.0),
            position_mm: Vec3::ZERO,
        };
        let p = Vec3::new(0.0, 0.0, 15.0);
        let h = field_at(&src, p).unwrap();
        let m = h.normalized().unwrap().scale(5e4);
        let f = force(&body(m), &src, p).unwrap();
        // Numeric gradient of |H| along each axis.
        let eps = 1e-4;
        let grad = Vec3::new(
            (field_at(&src, Vec3::new(p.x + eps, p.y, p.z))
                .unwrap()
                .norm()
                - field_at(&src, Vec3::new(p.x - eps, p.y, p.z))
                    .unwrap()
                    .norm())
                / (2.0 * eps),
            (field_at(&src, Vec3::new(p.x, p.y + eps, p.z))
                .unwrap()
                .norm()
                - field_at(&src, Vec3::new(p.x, p.y - eps, p.z))
                    .unwrap()
                    .norm())
                / (2.0 * eps),
            (field_at(&src, Vec3::new(p.x, p.y, p.z + eps))
                .unwrap()
                .norm()
                - field_at(&src, Vec3::new(p.x, p.y, p.z - eps))
                    .unwrap()
                    .norm())
                / (2.0 * eps),
        );
        assert!(f.dot(grad) > 0.0);
    }

    #[test]
    fn force_and_torque_scale_linearly() {
        let src = FieldSource::Dipole {
            moment_a_m2: Vec3::new(1.0, 2.0, 3.0),
            position_mm: Vec3::ZERO,
        };
        let p = Vec3::new(10.0, 5.0, -8.0);
        let m = Vec3::new(2e4, -1e4, 3e4);
        let b1 = MagneticBody {
            magnetization_a_per_m: m,
            volume_m3: 1e-13,
        };
        let b2 = MagneticBody {
            magnetization_a_per_m: m.scale(2.0),
            volume_m3: 1e-13,
        };
        let b3 = MagneticBody {
            magnetization_a_per_m: m,
            volume_m3: 2e-13,
        };
        let f1 = force(&b1, &src, p).unwrap();
        assert!((force(&b2, &src, p).unwrap().norm() - 2.0 * f1.norm()).abs() / f1.norm() < 1e-12);
        assert!((force(&b3, &src, p).unwrap().norm() - 2.0 * f1.norm()).abs() / f1.norm() < 1e-12);
        let h = field_at(&src, p).unwrap();
        let t1 = torque(&b1, h);
        assert!((torque(&b2, h).norm() - 2.0 * t1.norm()).abs() / t1.norm() < 1e-12);
    }

    #[test]
    fn field_source_json_round_trip() {
        let src = FieldSource::Dipole {
            moment_a_m2: Vec3::new(0.0, 0.0, 2.5),
            position_mm: Vec3::new(0.0, 0.0, -20.0),
        };
        let json = serde_json::to_string(&src).unwrap();
        assert!(json.contains("\"type\":\"dipole\""));
        let back: FieldSource = serde_json::from_str(&json).unwrap();
        assert_eq!(back, src);

        let uniform: FieldSource = serde_json::from_str(
            "{\"type\":\"uniform\",\"b_tesla\":{\"x\":0,\"y\":0,\"z\":0.004}}",
        )
        .unwrap();
        assert_eq!(
            uniform,
            FieldSource::Uniform {
                b_tesla: Vec3::new(0.0, 0.0, 0.004)
            }
        );
    }
}
