//! Design validation: structural errors and printability warnings.

use serde::Serialize;

use super::adjacency::{classify_adjacency, ContactClass, DEFAULT_CONTACT_TOL_MM};
use super::{Design, TravelLimits, UNIT_NORM_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationIssue {
    pub severity: Severity,
    pub message: String,
    /// Voxels the issue refers to; empty for design-wide issues.
    pub voxel_ids: Vec<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn has_errors(&self) -> bool {
        self.issues.iter().any(|i| i.severity == Severity::Error)
    }

    pub fn is_clean(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn error_messages(&self) -> Vec<String> {
        self.issues
            .iter()
            .filter(|i| i.severity == Severity::Error)
            .map(|i| i.message.clone())
            .collect()
    }

    pub fn warnings(&self) -> impl Iterator<Item = &ValidationIssue> {
        self.issues
            .iter()
            .filter(|i| i.severity == Severity::Warning)
    }

    fn error(&mut self, message: impl Into<String>, ids: Vec<u64>) {
        self.issues.push(ValidationIssue {
            severity: Severity::Error,
            message: message.into(),
            voxel_ids: ids,
        });
    }

    fn warning(&mut self, message: impl Into<String>, ids: Vec<u64>) {
        self.issues.push(ValidationIssue {
            severity: Severity::Warning,
            message: message.into(),
            voxel_ids: ids,
        });
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, i: usize) -> usize {
        if self.parent[i] != i {
            let root = self.find(self.parent[i]);
            self.parent[i] = root;
        }
        self.parent[i]
    }

    fn union(&mut self, a: usize, b: usize) {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra != rb {
            self.parent[ra] = rb;
        }
    }
}

/// Inspect a design and report everything that would make it unprintable
/// (errors) or fragile (warnings). Never fails; callers decide whether
/// warnings block.
///
/// Checks: duplicate ids, non-positive or non-finite dimensions, non-finite
/// positions, zero magnetization without the passive flag, voxels outside
/// `limits` when given, and connectivity. Components that touch only at
/// corners cure as mechanically separate islands, so each corner-only link
/// is warned about individually; voxels with no link at all produce a
/// disconnected-components warning.
pub fn validate_design(d: &Design, limits: Option<&TravelLimits>) -> ValidationReport {
    let mut report = ValidationReport::default();

    let mut seen = std::collections::HashSet::new();
    for v in &d.voxels {
        if !seen.insert(v.id) {
            report.error(format!("duplicate id {}", v.id), vec![v.id]);
        }
    }

    for v in &d.voxels {
        if v.id == 0 {
            report.error("id must be positive", vec![v.id]);
        }
        if !(v.dims.x > 0.0 && v.dims.y > 0.0 && v.dims.z > 0.0) {
            report.error(
                format!(
                    "non-positive dimension ({}, {}, {})",
                    v.dims.x, v.dims.y, v.dims.z
                ),
                vec![v.id],
            );
        }
        if !v.dims.is_finite() || !v.position.is_finite() {
            report.error("non-finite position or dimension", vec![v.id]);
        }
        let m = &v.magnetization;
        if m.is_degenerate() {
            report.error("zero magnetization without passive flag", vec![v.id]);
        } else if !m.is_passive() && (m.direction().norm() - 1.0).abs() > UNIT_NORM_TOL {
            report.error("non-unit magnetization direction", vec![v.id]);
        }
        if let Some(limits) = limits {
            if let Err(e) = limits.check(v.position, Some(v.id)) {
                report.error(e.to_string(), vec![v.id]);
            }
        }
    }

    if report.has_errors() || d.voxels.len() < 2 {
        return report;
    }

    let adjacency = classify_adjacency(d, DEFAULT_CONTACT_TOL_MM);
    let index: std::collections::HashMap<u64, usize> = d
        .voxels
        .iter()
        .enumerate()
        .map(|(i, v)| (v.id, i))
        .collect();

    // Solid connectivity ignores corner contacts; they carry no cured cross
    // section.
    let mut solid = UnionFind::new(d.voxels.len());
    for p in &adjacency.pairs {
        if matches!(
            p.class,
            ContactClass::Face | ContactClass::Edge | ContactClass::Overlap
        ) {
            solid.union(index[&p.a], index[&p.b]);
        }
    }

    for p in adjacency.pairs_of_class(ContactClass::Corner) {
        if solid.find(index[&p.a]) != solid.find(index[&p.b]) {
            report.warning(
                format!(
                    "corner-only connectivity between voxels {} and {}",
                    p.a, p.b
                ),
                vec![p.a, p.b],
            );
        }
    }

    // With corner links included, anything still apart is fully disconnected.
    let mut loose = UnionFind::new(d.voxels.len());
    for p in &adjacency.pairs {
        if p.class != ContactClass::None {
            loose.union(index[&p.a], index[&p.b]);
        }
    }
    let mut roots = std::collections::HashSet::new();
    for i in 0..d.voxels.len() {
        roots.insert(loose.find(i));
    }
    if roots.len() > 1 {
        report.warning(
            format!("design splits into {} disconnected components", roots.len()),
            vec![],
        );
    }

    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::voxel_model::{AxisRange, Magnetization, Vec3, Voxel};

    fn cube(id: u64, x: f64, y: f64, z: f64) -> Voxel {
        Voxel::new(
            id,
            Vec3::new(x, y, z),
            Vec3::new(0.05, 0.05, 0.05),
            Magnetization::new(Vec3::new(0.0, 0.0, 1.0), 1.0).unwrap(),
        )
    }

    #[test]
    fn valid_single_voxel_design_is_clean() {
        let d = Design::new("d", vec![cube(1, 0.0, 0.0, 0.0)]).unwrap();
        assert!(validate_design(&d, None).is_clean());
    }

    #[test]
    fn non_positive_dimension_is_an_error() {
        let mut v = cube(1, 0.0, 0.0, 0.0);
        v.dims = Vec3::new(0.0, 0.05, 0.05);
        let d = Design {
            name: "d".into(),
            voxels: vec![v],
        };
        let report = validate_design(&d, None);
        assert!(report.has_errors());
        assert!(report.error_messages()[0].contains("non-positive dimension"));
    }

    #[test]
    fn degenerate_magnetization_is_an_error_but_passive_is_not() {
        let mut bad = cube(1, 0.0, 0.0, 0.0);
        bad.magnetization = Magnetization::from_raw(Vec3::ZERO);
        let d = Design {
            name: "d".into(),
            voxels: vec![bad],
        };
        let report = validate_design(&d, None);
        assert!(report.has_errors());
        assert!(report.error_messages()[0].contains("zero magnetization"));

        let mut passive = cube(1, 0.0, 0.0, 0.0);
        passive.magnetization = Magnetization::passive();
        let d = Design {
            name: "d".into(),
            voxels: vec![passive],
        };
        assert!(!validate_design(&d, None).has_errors());
    }

    #[test]
    fn travel_limits_checked_when_given() {
        let limits = TravelLimits {
            x: AxisRange {
                min: -1.0,
                max: 1.0,
            },
            y: AxisRange {
                min: -1.0,
                max: 1.0,
            },
            z: AxisRange {
                min: -1.0,
                max: 1.0,
            },
        };
        let d = Design::new("d", vec![cube(1, 5.0, 0.0, 0.0)]).unwrap();
        let report = validate_design(&d, Some(&limits));
        assert!(report.has_errors());
        assert!(report.error_messages()[0].contains("voxel 1"));
    }

    #[test]
    fn corner_only_link_warns_per_pair() {
        // Two cubes meeting at a single corner point.
        let d = Design::new("d", vec![cube(1, 0.0, 0.0, 0.0), cube(2, 0.05, 0.05, 0.05)]).unwrap();
        let report = validate_design(&d, None);
        assert!(!report.has_errors());
        let warnings: Vec<_> = report.warnings().collect();
        assert!(warnings
            .iter()
            .any(|w| w.message.contains("corner-only") && w.voxel_ids == vec![1, 2]));
    }

    #[test]
    fn face_connected_pair_has_no_warnings() {
        let d = Design::new("d", vec![cube(1, 0.0, 0.0, 0.0), cube(2, 0.05, 0.0, 0.0)]).unwrap();
        assert!(validate_design(&d, None).is_clean());
    }

    #[test]
    fn fully_separated_voxels_warn_disconnected() {
        let d = Design::new("d", vec![cube(1, 0.0, 0.0, 0.0), cube(2, 1.0, 0.0, 0.0)]).unwrap();
        let report = validate_design(&d, None);
        assert!(report
            .warnings()
            .any(|w| w.message.contains("disconnected")));
    }
}
