//! The printer's instruction dialect: emission, parsing, rendering.
//!
//! The dialect is deliberately tiny and absolute-coordinate so every line
//! can be audited on its own:
//!
//! ```text
//! ;MAGVOX v1          header, dialect version
//! ;CFG 0123456789abcdef   header, machine-config fingerprint
//! G28                 home all five motors
//! G1 X<mm> Y<mm> Z<mm>    absolute move of the build plate
//! M20 A<deg> B<deg>   magnet azimuth (-180, 180] and inclination [0, 180]
//! M10 P<ms>           cure at the current pose
//! G4 P<ms>            dwell
//! ;<text>             comment
//! ```
//!
//! Files are UTF-8 with LF endings. Every numeric field is printed with six
//! decimal places; emitted values are quantized to that grid first, so
//! parsing an emitted file reproduces the in-memory program bit for bit.

use crate::error::{Error, Result};
use crate::kinematics::{cartesian_to_spherical, MachineConfig};
use crate::path_planner::ToolPath;
use crate::voxel_model::Design;

pub const DIALECT: &str = "MAGVOX v1";

#[derive(Debug, Clone, PartialEq)]
pub enum Instruction {
    Home,
    MoveTo {
        x: f64,
        y: f64,
        z: f64,
    },
    OrientMagnet {
        azimuth_deg: f64,
        inclination_deg: f64,
    },
    Cure {
        duration_ms: u32,
    },
    Dwell {
        ms: u32,
    },
    Comment(String),
}

/// A parsed or emitted program: header fingerprint plus instruction list.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    /// Fingerprint of the machine config the program was planned for.
    pub config_fingerprint: String,
    pub instructions: Vec<Instruction>,
}

impl Program {
    pub fn cure_count(&self) -> usize {
        self.instructions
            .iter()
            .filter(|i| matches!(i, Instruction::Cure { .. }))
            .count()
    }
}

/// Snap a value to the six-decimal grid the serializer prints. Applied at
/// emission time so the stored program equals its parsed rendering.
fn quantize6(v: f64) -> f64 {
    let q = (v * 1e6).round() / 1e6;
    if q == 0.0 {
        0.0
    } else {
        q
    }
}

/// Generate the program for a planned path: home once, then translate,
/// reorient, and cure per voxel in path order.
pub fn emit(path: &ToolPath, d: &Design, cfg: &MachineConfig) -> Result<Program> {
    let order = path.ordered_ids();
    if order.is_empty() {
        return Err(Error::EmptyInput("tool path has no voxels".into()));
    }

    let mut path_ids: Vec<u64> = order.clone();
    path_ids.sort_unstable();
    let mut design_ids: Vec<u64> = d.voxels.iter().map(|v| v.id).collect();
    design_ids.sort_unstable();
    if path_ids != design_ids {
        return Err(Error::PathDesignMismatch(format!(
            "path covers {} voxels, design \"{}\" has {}",
            path_ids.len(),
            d.name,
            design_ids.len()
        )));
    }

    let mut instructions = vec![Instruction::Home];
    for id in order {
        let v = d.get(id).expect("coverage was checked above");
        cfg.travel.check(v.position, Some(id))?;
        let (az, inc) = cartesian_to_spherical(&v.magnetization).map_err(|_| {
            Error::DegenerateMagnetization(format!("voxel {id} has no orientable magnetization"))
        })?;
        instructions.push(Instruction::MoveTo {
            x: quantize6(v.position.x),
            y: quantize6(v.position.y),
            z: quantize6(v.position.z),
        });
        instructions.push(Instruction::OrientMagnet {
            azimuth_deg: quantize6(az),
            inclination_deg: quantize6(inc),
        });
        instructions.push(Instruction::Cure {
            duration_ms: cfg.cure_duration_ms,
        });
    }

    Ok(Program {
        config_fingerprint: cfg.fingerprint(),
        instructions,
    })
}

/// Serialize a program to dialect text. Deterministic: equal programs
/// render to identical bytes.
pub fn render(p: &Program) -> String {
    let mut out = String::new();
    out.push_str(&format!(";{DIALECT}\n"));
    out.push_str(&format!(";CFG {}\n", p.config_fingerprint));
    for instruction in &p.instructions {
        match instruction {
            Instruction::Home => out.push_str("G28\n"),
            Instruction::MoveTo { x, y, z } => {
                out.push_str(&format!("G1 X{x:.6} Y{y:.6} Z{z:.6}\n"));
            }
            Instruction::OrientMagnet {
                azimuth_deg,
                inclination_deg,
            } => {
                out.push_str(&format!("M20 A{azimuth_deg:.6} B{inclination_deg:.6}\n"));
            }
            Instruction::Cure { duration_ms } => out.push_str(&format!("M10 P{duration_ms}\n")),
            Instruction::Dwell { ms } => out.push_str(&format!("G4 P{ms}\n")),
            Instruction::Comment(text) => out.push_str(&format!(";{text}\n")),
        }
    }
    out
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_word_f64(token: &str, prefix: char, line: usize) -> Result<f64> {
    let rest = token
        .strip_prefix(prefix)
        .ok_or_else(|| parse_err(line, format!("missing axis word {prefix}")))?;
    let value: f64 = rest.parse().map_err(|_| {
        parse_err(
            line,
            format!("malformed number \"{rest}\" in word {prefix}"),
        )
    })?;
    if !value.is_finite() {
        return Err(parse_err(
            line,
            format!("non-finite value in word {prefix}"),
        ));
    }
    Ok(value)
}

fn parse_word_ms(token: &str, line: usize) -> Result<u32> {
    let rest = token
        .strip_prefix('P')
        .ok_or_else(|| parse_err(line, "missing duration word P"))?;
    let ms: u32 = rest
        .parse()
        .map_err(|_| parse_err(line, format!("malformed duration \"{rest}\"")))?;
    if ms == 0 {
        return Err(parse_err(line, "duration must be positive"));
    }
    Ok(ms)
}

fn expect_word_count(tokens: &[&str], expected: usize, line: usize, missing: &str) -> Result<()> {
    match tokens.len().cmp(&expected) {
        std::cmp::Ordering::Less => Err(parse_err(line, format!("missing axis word {missing}"))),
        std::cmp::Ordering::Greater => Err(parse_err(
            line,
            format!("unexpected token \"{}\"", tokens[expected]),
        )),
        std::cmp::Ordering::Equal => Ok(()),
    }
}

/// Parse dialect text back into a program. Inverse of [`render`] on
/// anything this crate emits; rejects structural violations (missing
/// header, missing home, cure before any move) with line numbers.
pub fn parse(text: &str) -> Result<Program> {
    let mut lines = text.lines().enumerate();

    let (_, first) = lines.next().ok_or_else(|| parse_err(1, "empty program"))?;
    if first.trim_end_matches('\r') != format!(";{DIALECT}") {
        return Err(parse_err(
            1,
            format!("missing dialect header \";{DIALECT}\""),
        ));
    }
    let (_, second) = lines
        .next()
        .ok_or_else(|| parse_err(2, "missing config fingerprint header"))?;
    let second = second.trim_end_matches('\r');
    let fingerprint = second
        .strip_prefix(";CFG ")
        .ok_or_else(|| parse_err(2, "missing config fingerprint header \";CFG <hash>\""))?;
    if fingerprint.len() != 16 || !fingerprint.chars().all(|c| c.is_ascii_hexdigit()) {
        return Err(parse_err(
            2,
            format!("malformed config fingerprint \"{fingerprint}\""),
        ));
    }

    let mut instructions = Vec::new();
    let mut seen_home = false;
    let mut seen_move = false;
    for (idx, raw_line) in lines {
        let line_no = idx + 1;
        let line = raw_line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix(';') {
            instructions.push(Instruction::Comment(comment.to_string()));
            continue;
        }

        let tokens: Vec<&str> = line.split_whitespace().collect();
        let instruction = match tokens[0] {
            "G28" => {
                expect_word_count(&tokens, 1, line_no, "")?;
                Instruction::Home
            }
            "G1" => {
                expect_word_count(
                    &tokens,
                    4,
                    line_no,
                    ["X", "Y", "Z"][(tokens.len() - 1).min(2)],
                )?;
                Instruction::MoveTo {
                    x: parse_word_f64(tokens[1], 'X', line_no)?,
                    y: parse_word_f64(tokens[2], 'Y', line_no)?,
                    z: parse_word_f64(tokens[3], 'Z', line_no)?,
                }
            }
            "M20" => {
                expect_word_count(&tokens, 3, line_no, ["A", "B"][(tokens.len() - 1).min(1)])?;
                let azimuth_deg = parse_word_f64(tokens[1], 'A', line_no)?;
                let inclination_deg = parse_word_f64(tokens[2], 'B', line_no)?;
                if !(azimuth_deg > -180.0 && azimuth_deg <= 180.0) {
                    return Err(parse_err(
                        line_no,
                        format!("azimuth out of range: {azimuth_deg}"),
                    ));
                }
                if !(0.0..=180.0).contains(&inclination_deg) {
                    return Err(parse_err(
                        line_no,
                        format!("inclination out of range: {inclination_deg}"),
                    ));
                }
                Instruction::OrientMagnet {
                    azimuth_deg,
                    inclination_deg,
                }
            }
            "M10" => {
                expect_word_count(&tokens, 2, line_no, "P")?;
                Instruction::Cure {
                    duration_ms: parse_word_ms(tokens[1], line_no)?,
                }
            }
            "G4" => {
                expect_word_count(&tokens, 2, line_no, "P")?;
                Instruction::Dwell {
                    ms: parse_word_ms(tokens[1], line_no)?,
                }
            }
            word => return Err(parse_err(line_no, format!("unknown word \"{word}\""))),
        };

        match &instruction {
            Instruction::Home => seen_home = true,
            Instruction::MoveTo { .. } if !seen_home => {
                return Err(parse_err(line_no, "missing home before first motion"));
            }
            Instruction::MoveTo { .. } => seen_move = true,
            Instruction::OrientMagnet { .. } | Instruction::Dwell { .. } if !seen_home => {
                return Err(parse_err(line_no, "missing home before first motion"));
            }
            Instruction::Cure { .. } if !seen_move => {
                return Err(parse_err(line_no, "cure before any move"));
            }
            _ => {}
        }
        instructions.push(instruction);
    }

    if !seen_home {
        return Err(parse_err(text.lines().count().max(2), "missing home"));
    }

    Ok(Program {
        config_fingerprint: fingerprint.to_string(),
        instructions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path_planner::plan;
    use crate::voxel_model::{Design, Magnetization, Vec3, Voxel};

    fn cube(id: u64, x: f64, y: f64, z: f64) -> Voxel {
        Voxel::new(
            id,
            Vec3::new(x, y, z),
            Vec3::new(0.05, 0.05, 0.05),
            Magnetization::new(Vec3::new(0.0, 0.0, 1.0), 1.0).unwrap(),
        )
    }

    fn single_voxel_program() -> (Program, MachineConfig) {
        let cfg = MachineConfig::default();
        let d = Design::new("one", vec![cube(1, 0.0, 0.0, 0.0)]).unwrap();
        let path = plan(&d, &cfg).unwrap();
        (emit(&path, &d, &cfg).unwrap(), cfg)
    }

    #[test]
    fn single_voxel_emits_reference_text() {
        let (program, cfg) = single_voxel_program();
        let text = render(&program);
        let expected = format!(
            ";{DIALECT}\n;CFG {}\nG28\nG1 X0.000000 Y0.000000 Z0.000000\nM20 A0.000000 B0.000000\nM10 P500\n",
            cfg.fingerprint()
        );
        assert_eq!(text, expected);
    }

    #[test]
    fn parse_render_round_trip() {
        let (program, _) = single_voxel_program();
        let text = render(&program);
        assert_eq!(parse(&text).unwrap(), program);
    }

    #[test]
    fn emit_is_deterministic() {
        let cfg = MachineConfig::default();
        let d = Design::new(
            "w",
            vec![
                cube(1, 0.0, 0.0, 0.0),
                cube(2, 0.05, 0.0, 0.0),
                cube(3, 0.1, 0.0, 0.0),
            ],
        )
        .unwrap();
        let path = plan(&d, &cfg).unwrap();
        let a = render(&emit(&path, &d, &cfg).unwrap());
        let b = render(&emit(&path, &d, &cfg).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn cure_count_matches_voxel_count() {
        let cfg = MachineConfig::default();
        let d = Design::new(
            "w",
            vec![
                cube(1, 0.0, 0.0, 0.0),
                cube(2, 0.05, 0.0, 0.0),
                cube(3, 0.1, 0.0, 0.0),
            ],
        )
        .unwrap();
        let path = plan(&d, &cfg).unwrap();
        assert_eq!(emit(&path, &d, &cfg).unwrap().cure_count(), 3);
    }

    #[test]
    fn empty_path_rejected() {
        let cfg = MachineConfig::default();
        let d = Design::new("d", vec![cube(1, 0.0, 0.0, 0.0)]).unwrap();
        let empty = ToolPath {
            layers: vec![],
            total_xy_travel_mm: 0.0,
        };
        assert!(matches!(emit(&empty, &d, &cfg), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn passive_voxel_cannot_be_emitted() {
        let cfg = MachineConfig::default();
        let mut v = cube(1, 0.0, 0.0, 0.0);
        v.magnetization = Magnetization::passive();
        let d = Design::new("d", vec![v]).unwrap();
        let path = ToolPath {
            layers: vec![crate::path_planner::Layer {
                z: 0.0,
                voxel_ids: vec![1],
            }],
            total_xy_travel_mm: 0.0,
        };
        match emit(&path, &d, &cfg) {
            Err(Error::DegenerateMagnetization(msg)) => assert!(msg.contains("voxel 1")),
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn out_of_travel_emit_names_voxel() {
        let cfg = MachineConfig::default();
        let d = Design::new("d", vec![cube(3, 200.0, 0.0, 0.0)]).unwrap();
        let path = ToolPath {
            layers: vec![crate::path_planner::Layer {
                z: 0.0,
                voxel_ids: vec![3],
            }],
            total_xy_travel_mm: 0.0,
        };
        match emit(&path, &d, &cfg) {
            Err(Error::TravelLimit {
                voxel_id: Some(3), ..
            }) => {}
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn missing_axis_word_is_reported_with_line() {
        let (program, _) = single_voxel_program();
        let mut text = render(&program);
        text.push_str("G1 X1 Y2\n");
        let err = parse(&text).unwrap_err();
        assert_eq!(err.line(), Some(7));
        assert!(err.to_string().contains("missing axis word Z"));
    }

    #[test]
    fn azimuth_out_of_range_rejected() {
        let (program, _) = single_voxel_program();
        let mut text = render(&program);
        text.push_str("M20 A361 B0\n");
        let err = parse(&text).unwrap_err();
        assert!(err.to_string().contains("azimuth out of range"));
    }

    #[test]
    fn unknown_word_rejected() {
        let (program, _) = single_voxel_program();
        let mut text = render(&program);
        text.push_str("M99 P1\n");
        let err = parse(&text).unwrap_err();
        assert!(err.to_string().contains("unknown word"));
    }

    #[test]
    fn missing_home_rejected() {
        let fp = MachineConfig::default().fingerprint();
        let text = format!(";{DIALECT}\n;CFG {fp}\nG1 X0 Y0 Z0\n");
        let err = parse(&text).unwrap_err();
        assert!(err.to_string().contains("missing home"));
    }

    #[test]
    fn cure_before_move_rejected() {
        let fp = MachineConfig::default().fingerprint();
        let text = format!(";{DIALECT}\n;CFG {fp}\nG28\nM10 P500\n");
        let err = parse(&text).unwrap_err();
        assert_eq!(err.line(), Some(4));
        assert!(err.to_string().contains("cure before any move"));
    }

    #[test]
    fn missing_header_rejected() {
        assert!(parse("G28\n").is_err());
        assert!(parse("").is_err());
        let err = parse(";MAGVOX v1\n;CFG xyz\n").unwrap_err();
        assert!(err.to_string().contains("fingerprint"));
    }

    #[test]
    fn quantization_survives_round_trip() {
        let fp = MachineConfig::default().fingerprint();
        let program = Program {
            config_fingerprint: fp,
            instructions: vec![
                Instruction::Home,
                Instruction::MoveTo {
                    x: quantize6(0.123456789),
                    y: quantize6(-0.9999995),
                    z: quantize6(1e-9),
                },
                Instruction::OrientMagnet {
                    azimuth_deg: quantize6(179.9999996),
                    inclination_deg: quantize6(90.0000004),
                },
                Instruction::Cure { duration_ms: 1 },
                Instruction::Dwell { ms: 250 },
                Instruction::Comment(" checkpoint".into()),
            ],
        };
        let text = render(&program);
        assert_eq!(parse(&text).unwrap(), program);
    }

    #[test]
    fn negative_zero_renders_as_positive_zero() {
        assert_eq!(format!("{:.6}", quantize6(-1e-9)), "0.000000");
    }
}
