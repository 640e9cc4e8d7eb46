//! Pairwise contact classification for axis-aligned voxels.
//!
//! Two boxes can share a 2D face, a 1D edge, a single corner point, a
//! positive intersection volume, or nothing. Corner-only contact matters for
//! printability: such voxels cure as separate islands that merely touch, so
//! validation downgrades them to connectivity warnings.

use serde::Serialize;

use super::{Design, Voxel};

/// Default geometric tolerance in mm for deciding that two box faces touch.
pub const DEFAULT_CONTACT_TOL_MM: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactClass {
    /// 2D shared area.
    Face,
    /// 1D shared segment.
    Edge,
    /// Single shared point.
    Corner,
    /// Positive intersection volume.
    Overlap,
    /// No contact.
    None,
}

/// One classified voxel pair; `a < b` by id.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContactPair {
    pub a: u64,
    pub b: u64,
    pub class: ContactClass,
    /// Intersection volume in mm^3, present iff `class` is `Overlap`.
    pub overlap_volume_mm3: Option<f64>,
}

/// All voxel pairs of a design with their contact classes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdjacencyReport {
    pub pairs: Vec<ContactPair>,
}

impl AdjacencyReport {
    pub fn pairs_of_class(&self, class: ContactClass) -> impl Iterator<Item = &ContactPair> {
        self.pairs.iter().filter(move |p| p.class == class)
    }

    pub fn class_of(&self, a: u64, b: u64) -> Option<ContactClass> {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        self.pairs
            .iter()
            .find(|p| p.a == lo && p.b == hi)
            .map(|p| p.class)
    }
}

/// Signed extent of the overlap between two boxes along one axis: positive
/// inside, negative separation, near zero when the faces touch.
fn axis_overlap(center_a: f64, half_a: f64, center_b: f64, half_b: f64) -> f64 {
    (half_a + half_b) - (center_a - center_b).abs()
}

/// Classify the contact between two voxels with tolerance `tol` (mm).
pub fn classify_pair(a: &Voxel, b: &Voxel, tol: f64) -> (ContactClass, Option<f64>) {
    let ha = a.dims.scale(0.5);
    let hb = b.dims.scale(0.5);
    let overlaps = [
        axis_overlap(a.position.x, ha.x, b.position.x, hb.x),
        axis_overlap(a.position.y, ha.y, b.position.y, hb.y),
        axis_overlap(a.position.z, ha.z, b.position.z, hb.z),
    ];

    let mut positive = 0;
    let mut touching = 0;
    for &o in &overlaps {
        if o > tol {
            positive += 1;
        } else if o >= -tol {
            touching += 1;
        } else {
            return (ContactClass::None, None);
        }
    }

    match (positive, touching) {
        (3, 0) => {
            let volume = overlaps.iter().product();
            (ContactClass::Overlap, Some(volume))
        }
        (2, 1) => (ContactClass::Face, None),
        (1, 2) => (ContactClass::Edge, None),
        (0, 3) => (ContactClass::Corner, None),
        _ => unreachable!("positive + touching covers all non-separated axes"),
    }
}

/// Classify every voxel pair of a design. Pure analysis; pairs are listed for
/// all combinations, ordered by (a, b) id.
pub fn classify_adjacency(d: &Design, tol: f64) -> AdjacencyReport {
    let mut sorted: Vec<&Voxel> = d.voxels.iter().collect();
    sorted.sort_by_key(|v| v.id);

    let mut pairs = Vec::new();
    for (i, va) in sorted.iter().enumerate() {
        for vb in &sorted[i + 1..] {
            let (class, volume) = classify_pair(va, vb, tol);
            pairs.push(ContactPair {
                a: va.id,
                b: vb.id,
                class,
                overlap_volume_mm3: volume,
            });
        }
    }
    AdjacencyReport { pairs }
}
