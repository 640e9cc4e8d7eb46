//! Cure-order planning: top layer first, nearest-to-origin first within a
//! layer.
//!
//! Layers are clustered on z with a tolerance (single linkage on the sorted
//! values) so that floating-point exports with micro-jitter still group
//! naturally. Within a layer, voxels are sorted by their XY hypotenuse from
//! the machine origin with a deterministic (y, x, id) tie-break. That sort
//! is not travel-optimal in general, so the accumulated XY travel is
//! reported and a greedy nearest-neighbor mode exists for comparison; the
//! hypotenuse order remains the default.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kinematics::MachineConfig;
use crate::voxel_model::validation::validate_design;
use crate::voxel_model::{Design, Voxel};

/// One z-cluster of voxels in cure order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Layer {
    /// Representative height: mean z of the members, mm.
    pub z: f64,
    pub voxel_ids: Vec<u64>,
}

/// The full cure sequence. Layers are strictly descending in z and every
/// design voxel appears exactly once.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToolPath {
    pub layers: Vec<Layer>,
    /// Sum of XY moves between consecutive cure sites, starting from the
    /// machine origin, mm.
    pub total_xy_travel_mm: f64,
}

impl ToolPath {
    /// Voxel ids in overall cure order.
    pub fn ordered_ids(&self) -> Vec<u64> {
        self.layers
            .iter()
            .flat_map(|l| l.voxel_ids.iter().copied())
            .collect()
    }
}

/// Within-layer ordering strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OrderMode {
    /// Ascending hypotenuse from the origin; the published workflow order.
    #[default]
    Hypotenuse,
    /// Greedy nearest neighbor from the previous cure site; usually travels
    /// less, never the default.
    NearestNeighbor,
}

fn squared_hypotenuse(v: &Voxel) -> f64 {
    v.position.x * v.position.x + v.position.y * v.position.y
}

/// Cluster voxels into z-layers, highest first. Voxels whose z values chain
/// within `z_tol` of each other share a layer.
pub fn group_layers(d: &Design, z_tol: f64) -> Vec<Layer> {
    let mut sorted: Vec<&Voxel> = d.voxels.iter().collect();
    sorted.sort_by(|a, b| b.position.z.total_cmp(&a.position.z).then(a.id.cmp(&b.id)));

    let mut layers: Vec<Vec<&Voxel>> = Vec::new();
    for v in sorted {
        match layers.last_mut() {
            Some(current) if current.last().unwrap().position.z - v.position.z <= z_tol => {
                current.push(v);
            }
            _ => layers.push(vec![v]),
        }
    }

    layers
        .into_iter()
        .map(|members| {
            let z = members.iter().map(|v| v.position.z).sum::<f64>() / members.len() as f64;
            Layer {
                z,
                voxel_ids: members.iter().map(|v| v.id).collect(),
            }
        })
        .collect()
}

/// Sort a layer by ascending hypotenuse from the origin, breaking ties by
/// (y, x, id) so equal radii still order deterministically.
pub fn order_within_layer(layer: &Layer, d: &Design) -> Layer {
    let mut members: Vec<&Voxel> = layer
        .voxel_ids
        .iter()
        .map(|id| d.get(*id).expect("layer ids come from the design"))
        .collect();
    members.sort_by(|a, b| {
        squared_hypotenuse(a)
            .total_cmp(&squared_hypotenuse(b))
            .then(a.position.y.total_cmp(&b.position.y))
            .then(a.position.x.total_cmp(&b.position.x))
            .then(a.id.cmp(&b.id))
    });
    Layer {
        z: layer.z,
        voxel_ids: members.iter().map(|v| v.id).collect(),
    }
}

fn order_nearest_neighbor(layer: &Layer, d: &Design, start: (f64, f64)) -> Layer {
    let mut remaining: Vec<&Voxel> = layer
        .voxel_ids
        .iter()
        .map(|id| d.get(*id).expect("layer ids come from the design"))
        .collect();
    let mut current = start;
    let mut ordered = Vec::with_capacity(remaining.len());
    while !remaining.is_empty() {
        let (best, _) = remaining
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                let da = dist2(current, a);
                let db = dist2(current, b);
                da.total_cmp(&db)
                    .then(a.position.y.total_cmp(&b.position.y))
                    .then(a.position.x.total_cmp(&b.position.x))
                    .then(a.id.cmp(&b.id))
            })
            .expect("remaining is non-empty");
        let v = remaining.remove(best);
        current = (v.position.x, v.position.y);
        ordered.push(v.id);
    }
    Layer {
        z: layer.z,
        voxel_ids: ordered,
    }
}

fn dist2(from: (f64, f64), v: &Voxel) -> f64 {
    let dx = v.position.x - from.0;
    let dy = v.position.y - from.1;
    dx * dx + dy * dy
}

/// Plan the cure sequence for a design with the default hypotenuse order.
pub fn plan(d: &Design, cfg: &MachineConfig) -> Result<ToolPath> {
    plan_with_mode(d, cfg, OrderMode::Hypotenuse)
}

/// Plan with an explicit within-layer ordering mode. The design must
/// validate cleanly (warnings are allowed, errors are not).
pub fn plan_with_mode(d: &Design, cfg: &MachineConfig, mode: OrderMode) -> Result<ToolPath> {
    if d.is_empty() {
        return Err(Error::EmptyInput(format!(
            "design \"{}\" has no voxels",
            d.name
        )));
    }
    let report = validate_design(d, Some(&cfg.travel));
    if report.has_errors() {
        return Err(Error::DesignInvalid {
            messages: report.error_messages(),
        });
    }

    let grouped = group_layers(d, cfg.z_tol_mm);
    let mut layers = Vec::with_capacity(grouped.len());
    let mut cursor = (0.0, 0.0);
    let mut travel = 0.0;
    for layer in &grouped {
        let ordered = match mode {
            OrderMode::Hypotenuse => order_within_layer(layer, d),
            OrderMode::NearestNeighbor => order_nearest_neighbor(layer, d, cursor),
        };
        for id in &ordered.voxel_ids {
            let v = d.get(*id).expect("ordered ids come from the design");
            travel += dist2(cursor, v).sqrt();
            cursor = (v.position.x, v.position.y);
        }
        layers.push(ordered);
    }

    Ok(ToolPath {
        layers,
        total_xy_travel_mm: travel,
    })
}

/// Machine-readable planning summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathReport {
    pub design: String,
    pub voxel_count: usize,
    pub layer_count: usize,
    pub total_xy_travel_mm: f64,
    pub order: Vec<u64>,
    pub layers: Vec<Layer>,
}

impl PathReport {
    pub fn new(path: &ToolPath, d: &Design) -> Self {
        PathReport {
            design: d.name.clone(),
            voxel_count: d.len(),
            layer_count: path.layers.len(),
            total_xy_travel_mm: path.total_xy_travel_mm,
            order: path.ordered_ids(),
            layers: path.layers.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}
