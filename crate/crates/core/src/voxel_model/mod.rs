//! Core domain types: designs made of rectangular magnetized voxels.
//!
//! Positions and dimensions are millimeters. Positions refer to voxel
//! *centers*; datasets that record minimum corners instead are converted
//! during [`merge_datasets`] (see [`PositionConvention`]). Magnetization is
//! stored as a unit direction plus a magnitude so orientation planning and
//! field physics can share one value without re-normalizing.

pub mod adjacency;
pub mod validation;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{GeomRecord, MagRecord};

/// Tolerance for the unit-length check on stored directions.
pub const UNIT_NORM_TOL: f64 = 1e-9;

/// Three-component vector. Units depend on context: mm for positions and
/// dimensions, dimensionless for directions, SI elsewhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }

    pub fn scale(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// Unit vector with the same direction, or `None` for the zero vector.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        if n == 0.0 {
            None
        } else {
            Some(self.scale(1.0 / n))
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// Per-voxel magnetization: unit direction plus magnitude in A/m.
///
/// A zero magnitude is representable in two ways: the explicit
/// [`Magnetization::passive`] constructor, which marks a deliberately
/// unmagnetized voxel, and a zero raw vector fed to
/// [`Magnetization::from_raw`], which is degenerate and rejected by
/// [`validation::validate_design`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Magnetization {
    direction: Vec3,
    magnitude: f64,
    passive: bool,
}

impl Magnetization {
    /// A unit `direction` with a positive magnitude in A/m.
    pub fn new(direction: Vec3, magnitude: f64) -> Result<Self> {
        if !direction.is_finite() || !magnitude.is_finite() {
            return Err(Error::DegenerateMagnetization(
                "non-finite component".into(),
            ));
        }
        if magnitude <= 0.0 {
            return Err(Error::DegenerateMagnetization(format!(
                "magnitude {magnitude} must be positive (use passive() for unmagnetized voxels)"
            )));
        }
        if (direction.norm() - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::DegenerateMagnetization(format!(
                "direction ({}, {}, {}) is not unit length",
                direction.x, direction.y, direction.z
            )));
        }
        Ok(Magnetization {
            direction,
            magnitude,
            passive: false,
        })
    }

    /// Explicitly unmagnetized voxel.
    pub fn passive() -> Self {
        Magnetization {
            direction: Vec3::ZERO,
            magnitude: 0.0,
            passive: true,
        }
    }

    /// Normalize a raw vector (unit direction or A/m components) into
    /// direction + magnitude. A zero vector yields a degenerate value that
    /// validation reports; it is not the same as [`Magnetization::passive`].
    pub fn from_raw(raw: Vec3) -> Self {
        match raw.normalized() {
            Some(direction) => Magnetization {
                direction,
                magnitude: raw.norm(),
                passive: false,
            },
            None => Magnetization {
                direction: Vec3::ZERO,
                magnitude: 0.0,
                passive: false,
            },
        }
    }

    pub fn direction(&self) -> Vec3 {
        self.direction
    }

    /// Magnitude in A/m as recorded by the source dataset; zero when the
    /// dataset provided only unit directions is fine, callers supply the
    /// material magnitude separately.
    pub fn magnitude(&self) -> f64 {
        self.magnitude
    }

    pub fn is_passive(&self) -> bool {
        self.passive
    }

    /// True for a zero vector that was not explicitly marked passive.
    pub fn is_degenerate(&self) -> bool {
        self.magnitude == 0.0 && !self.passive
    }

    /// direction x magnitude, the raw vector the dataset carried.
    pub fn raw(&self) -> Vec3 {
        self.direction.scale(self.magnitude)
    }
}

/// One cure site: axis-aligned box with a single magnetization direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Voxel {
    /// Positive, unique within a design.
    pub id: u64,
    /// Center position, mm.
    pub position: Vec3,
    /// Side lengths L x W x H, mm, all positive.
    pub dims: Vec3,
    pub magnetization: Magnetization,
}

impl Voxel {
    pub fn new(id: u64, position: Vec3, dims: Vec3, magnetization: Magnetization) -> Self {
        Voxel {
            id,
            position,
            dims,
            magnetization,
        }
    }

    /// Volume in cubic meters (dims are mm, 1 mm^3 = 1e-9 m^3).
    pub fn volume_m3(&self) -> f64 {
        self.dims.x * self.dims.y * self.dims.z * 1e-9
    }

    /// Axis-aligned bounds as (min, max) corners, mm.
    pub fn bounds(&self) -> (Vec3, Vec3) {
        let half = self.dims.scale(0.5);
        (self.position.sub(half), self.position.add(half))
    }
}

/// Whether geometry records position voxel centers or minimum corners.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositionConvention {
    #[default]
    Center,
    MinCorner,
}

/// An ordered collection of voxels with unique ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub name: String,
    pub voxels: Vec<Voxel>,
}

impl Design {
    /// Build a design, rejecting duplicate voxel ids.
    pub fn new(name: impl Into<String>, voxels: Vec<Voxel>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for v in &voxels {
            if !seen.insert(v.id) {
                return Err(Error::DuplicateId {
                    id: v.id,
                    context: "design".into(),
                });
            }
        }
        Ok(Design {
            name: name.into(),
            voxels,
        })
    }

    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    pub fn get(&self, id: u64) -> Option<&Voxel> {
        self.voxels.iter().find(|v| v.id == id)
    }
}

/// Reachable motion range per axis, mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisRange {
    pub min: f64,
    pub max: f64,
}

impl AxisRange {
    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }
}

/// Travel limits of the three translation axes, mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TravelLimits {
    pub x: AxisRange,
    pub y: AxisRange,
    pub z: AxisRange,
}

impl TravelLimits {
    pub fn contains(&self, p: Vec3) -> bool {
        self.x.contains(p.x) && self.y.contains(p.y) && self.z.contains(p.z)
    }

    /// Error naming the first offending axis, or Ok when `p` is reachable.
    pub fn check(&self, p: Vec3, voxel_id: Option<u64>) -> Result<()> {
        for (axis, value, range) in [("x", p.x, self.x), ("y", p.y, self.y), ("z", p.z, self.z)] {
            if !range.contains(value) {
                return Err(Error::TravelLimit {
                    axis,
                    value,
                    min: range.min,
                    max: range.max,
                    voxel_id,
                });
            }
        }
        Ok(())
    }
}

/// Combine the two exported datasets into one design, pairing records by
/// voxel id. Output voxels are ordered by ascending id regardless of input
/// order.
pub fn merge_datasets(
    name: impl Into<String>,
    mag_records: &[MagRecord],
    geom_records: &[GeomRecord],
    convention: PositionConvention,
) -> Result<Design> {
    if mag_records.is_empty() {
        return Err(Error::EmptyInput("magnetization records".into()));
    }
    if geom_records.is_empty() {
        return Err(Error::EmptyInput("geometry records".into()));
    }

    let mut mags = std::collections::BTreeMap::new();
    for r in mag_records {
        if mags.insert(r.id, r).is_some() {
            return Err(Error::DuplicateId {
                id: r.id,
                context: "magnetization records".into(),
            });
        }
    }
    let mut geoms = std::collections::BTreeMap::new();
    for r in geom_records {
        if geoms.insert(r.id, r).is_some() {
            return Err(Error::DuplicateId {
                id: r.id,
                context: "geometry records".into(),
            });
        }
    }

    let missing_geometry: Vec<u64> = mags
        .keys()
        .filter(|id| !geoms.contains_key(id))
        .copied()
        .collect();
    let missing_magnetization: Vec<u64> = geoms
        .keys()
        .filter(|id| !mags.contains_key(id))
        .copied()
        .collect();
    if !missing_geometry.is_empty() || !missing_magnetization.is_empty() {
        return Err(Error::MissingCounterpart {
            missing_geometry,
            missing_magnetization,
        });
    }

    let mut voxels = Vec::with_capacity(mags.len());
    for (id, mag) in &mags {
        let geom = geoms[id];
        let dims = Vec3::new(geom.l, geom.w, geom.h);
        let position = match convention {
            PositionConvention::Center => Vec3::new(geom.x, geom.y, geom.z),
            PositionConvention::MinCorner => Vec3::new(geom.x, geom.y, geom.z).add(dims.scale(0.5)),
        };
        let magnetization = Magnetization::from_raw(Vec3::new(mag.mx, mag.my, mag.mz));
        voxels.push(Voxel::new(*id, position, dims, magnetization));
    }
    Design::new(name, voxels)
}

/// Project a design back to the two record lists (inverse of
/// [`merge_datasets`], ascending id order).
pub fn split_design(
    d: &Design,
    convention: PositionConvention,
) -> (Vec<MagRecord>, Vec<GeomRecord>) {
    let mut voxels: Vec<&Voxel> = d.voxels.iter().collect();
    voxels.sort_by_key(|v| v.id);
    let mut mags = Vec::with_capacity(voxels.len());
    let mut geoms = Vec::with_capacity(voxels.len());
    for v in voxels {
        let raw = v.magnetization.raw();
        mags.push(MagRecord {
            id: v.id,
            mx: raw.x,
            my: raw.y,
            mz: raw.z,
        });
        let pos = match convention {
            PositionConvention::Center => v.position,
            PositionConvention::MinCorner => v.position.sub(v.dims.scale(0.5)),
        };
        geoms.push(GeomRecord {
            id: v.id,
            l: v.dims.x,
            w: v.dims.y,
            h: v.dims.z,
            x: pos.x,
            y: pos.y,
            z: pos.z,
        });
    }
    (mags, geoms)
}
