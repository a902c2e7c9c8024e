//! Scene description, analytic primitives and ray casting.
//!
//! World frame is z-up; the room spans `[0, room[0]] × [0, room[1]] ×
//! [0, room[2]]` with the floor at `z = 0`.

use crate::embedding::SynthEmbeddingSpace;
use crate::taxonomy::{indoor, CategorySpec};
use crate::SynthError;
use nalgebra::{Matrix3, Vector3};
use promptmap::category::{CategoryKind, CategoryTable, SizePolicy};
use serde::{Deserialize, Serialize};

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Shape {
    /// Full edge lengths along the object's local x, y, z.
    Box { size: [f64; 3] },
    Sphere { radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub shape: Shape,
    pub center: [f64; 3],
    /// Rotation about the world z axis, boxes only.
    #[serde(default)]
    pub yaw_deg: f64,
    pub category: String,
    /// Label schedule, cycled by frame index. Empty means the category name.
    #[serde(default)]
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomCategories {
    pub wall: String,
    pub floor: String,
    pub ceiling: String,
}

impl Default for RoomCategories {
    fn default() -> Self {
        Self { wall: "wall".into(), floor: "floor".into(), ceiling: "ceiling".into() }
    }
}

fn default_room() -> [f64; 3] {
    [3.0, 3.0, 2.5]
}
fn default_dim() -> usize {
    64
}
fn default_angle() -> f64 {
    30.0
}
fn default_spacing() -> f64 {
    0.02
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    #[serde(default = "default_room")]
    pub room: [f64; 3],
    #[serde(default = "indoor")]
    pub categories: Vec<CategorySpec>,
    #[serde(default)]
    pub size_policy: SizePolicy,
    #[serde(default = "default_dim")]
    pub embedding_dim: usize,
    #[serde(default = "default_angle")]
    pub synonym_angle_deg: f64,
    /// Ground-truth surface sampling distance, meters.
    #[serde(default = "default_spacing")]
    pub point_spacing: f64,
    #[serde(default)]
    pub room_categories: RoomCategories,
    #[serde(default)]
    pub objects: Vec<ObjectSpec>,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            room: default_room(),
            categories: indoor(),
            size_policy: SizePolicy::default(),
            embedding_dim: default_dim(),
            synonym_angle_deg: default_angle(),
            point_spacing: default_spacing(),
            room_categories: RoomCategories::default(),
            objects: vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    /// Inner face of the room: points `p` with `(p - point) · normal = 0`,
    /// `normal` pointing into the room.
    Plane { point: Vector3<f64>, normal: Vector3<f64> },
    Box { center: Vector3<f64>, half: Vector3<f64>, rotation: Matrix3<f64> },
    Sphere { center: Vector3<f64>, radius: f64 },
}

impl Geometry {
    /// Smallest `t > 0` with `origin + t * dir` on the surface (seen from
    /// outside for boxes and spheres, from inside for planes).
    pub fn intersect(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
        match self {
            Geometry::Plane { point, normal } => {
                let dn = dir.dot(normal);
                if dn >= 0.0 {
                    return None;
                }
                let t = (point - origin).dot(normal) / dn;
                (t > EPS).then_some(t)
            }
            Geometry::Box { center, half, rotation } => {
                let o = rotation.transpose() * (origin - center);
                let d = rotation.transpose() * dir;
                let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
                for a in 0..3 {
                    if d[a].abs() < 1e-15 {
                        if o[a].abs() > half[a] {
                            return None;
                        }
                        continue;
                    }
                    let ta = (-half[a] - o[a]) / d[a];
                    let tb = (half[a] - o[a]) / d[a];
                    t0 = t0.max(ta.min(tb));
                    t1 = t1.min(ta.max(tb));
                }
                (t0 <= t1 && t0 > EPS).then_some(t0)
            }
            Geometry::Sphere { center, radius } => {
                let oc = origin - center;
                let a = dir.dot(dir);
                let b = oc.dot(dir);
                let c = oc.dot(&oc) - radius * radius;
                let disc = b * b - a * c;
                if disc < 0.0 {
                    return None;
                }
                let t = (-b - disc.sqrt()) / a;
                (t > EPS).then_some(t)
            }
        }
    }
}

/// One renderable surface with its ground-truth identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Primitive {
    pub geometry: Geometry,
    /// Panoptic instance id: one per object, one per stuff category.
    pub instance: u32,
    pub category: u32,
    pub kind: CategoryKind,
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceInfo {
    pub id: u32,
    pub category: u32,
    pub category_name: String,
    pub kind: CategoryKind,
    pub labels: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SynthScene {
    pub spec: SceneSpec,
    pub seed: u64,
    pub primitives: Vec<Primitive>,
    pub instances: Vec<InstanceInfo>,
    pub categories: CategoryTable,
    pub space: SynthEmbeddingSpace,
}

fn yaw(deg: f64) -> Matrix3<f64> {
    let (s, c) = deg.to_radians().sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

fn check_positive(v: f64, what: &str) -> Result<(), SynthError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(SynthError::SpecInvalid(format!("{what} must be positive, got {v}")))
    }
}

/// Separating-axis test for two z-yawed boxes; touching counts as disjoint.
fn boxes_overlap(a: (&Vector3<f64>, &Vector3<f64>, &Matrix3<f64>), b: (&Vector3<f64>, &Vector3<f64>, &Matrix3<f64>)) -> bool {
    let (ca, ha, ra) = a;
    let (cb, hb, rb) = b;
    if (ca.z - cb.z).abs() >= ha.z + hb.z - EPS {
        return false;
    }
    let d = cb - ca;
    let axes = [ra.column(0).into_owned(), ra.column(1).into_owned(), rb.column(0).into_owned(), rb.column(1).into_owned()];
    for n in axes {
        let proj = |h: &Vector3<f64>, r: &Matrix3<f64>| {
            h.x * r.column(0).dot(&n).abs() + h.y * r.column(1).dot(&n).abs()
        };
        if d.dot(&n).abs() >= proj(ha, ra) + proj(hb, rb) - EPS {
            return false;
        }
    }
    true
}

fn sphere_box_overlap(c: &Vector3<f64>, r: f64, (bc, h, rot): (&Vector3<f64>, &Vector3<f64>, &Matrix3<f64>)) -> bool {
    let local = rot.transpose() * (c - bc);
    let closest = Vector3::new(local.x.clamp(-h.x, h.x), local.y.clamp(-h.y, h.y), local.z.clamp(-h.z, h.z));
    (local - closest).norm() < r - EPS
}

fn overlaps(a: &Geometry, b: &Geometry) -> bool {
    match (a, b) {
        (Geometry::Box { center: c1, half: h1, rotation: r1 }, Geometry::Box { center: c2, half: h2, rotation: r2 }) => {
            boxes_overlap((c1, h1, r1), (c2, h2, r2))
        }
        (Geometry::Sphere { center: c1, radius: r1 }, Geometry::Sphere { center: c2, radius: r2 }) => {
            (c1 - c2).norm() < r1 + r2 - EPS
        }
        (Geometry::Sphere { center, radius }, Geometry::Box { center: bc, half, rotation })
        | (Geometry::Box { center: bc, half, rotation }, Geometry::Sphere { center, radius }) => {
            sphere_box_overlap(center, *radius, (bc, half, rotation))
        }
        _ => false,
    }
}

/// World-axis-aligned bounds of an object.
fn extent(g: &Geometry) -> (Vector3<f64>, Vector3<f64>) {
    match g {
        Geometry::Box { center, half, rotation } => {
            let e = rotation.abs() * half;
            (center - e, center + e)
        }
        Geometry::Sphere { center, radius } => {
            let r = Vector3::repeat(*radius);
            (center - r, center + r)
        }
        Geometry::Plane { .. } => (Vector3::repeat(f64::NEG_INFINITY), Vector3::repeat(f64::INFINITY)),
    }
}

/// Builds the scene. Objects must lie inside the room and must not
/// interpenetrate each other.
pub fn generate_scene(spec: &SceneSpec, seed: u64) -> Result<SynthScene, SynthError> {
    for (i, &r) in spec.room.iter().enumerate() {
        check_positive(r, &format!("room[{i}]"))?;
    }
    check_positive(spec.point_spacing, "point_spacing")?;
    let names: Vec<String> = spec.categories.iter().map(|c| c.name.clone()).collect();
    let space = SynthEmbeddingSpace::new(&names, spec.embedding_dim, spec.synonym_angle_deg, seed)?;
    let categories = space.category_table(&spec.categories, spec.size_policy)?;
    let lookup = |name: &str| {
        categories.by_name(name).map(|c| (c.id, c.kind)).ok_or_else(|| SynthError::SpecInvalid(format!("unknown category {name:?}")))
    };

    let mut primitives = Vec::new();
    let mut instances = Vec::new();
    for (i, o) in spec.objects.iter().enumerate() {
        let (category, kind) = lookup(&o.category)?;
        if kind != CategoryKind::Thing {
            return Err(SynthError::SpecInvalid(format!("object {i}: category {:?} is not a thing", o.category)));
        }
        let center = Vector3::from(o.center);
        let geometry = match &o.shape {
            Shape::Box { size } => {
                for (a, &s) in size.iter().enumerate() {
                    check_positive(s, &format!("object {i} size[{a}]"))?;
                }
                Geometry::Box { center, half: Vector3::from(*size) / 2.0, rotation: yaw(o.yaw_deg) }
            }
            Shape::Sphere { radius } => {
                check_positive(*radius, &format!("object {i} radius"))?;
                Geometry::Sphere { center, radius: *radius }
            }
        };
        let (lo, hi) = extent(&geometry);
        let room = Vector3::from(spec.room);
        if (0..3).any(|a| lo[a] < -EPS || hi[a] > room[a] + EPS) {
            return Err(SynthError::SpecInvalid(format!("object {i} extends outside the room")));
        }
        for (j, p) in primitives.iter().enumerate() {
            let p: &Primitive = p;
            if overlaps(&geometry, &p.geometry) {
                return Err(SynthError::SpecInvalid(format!("objects {j} and {i} overlap")));
            }
        }
        let labels = if o.labels.is_empty() { vec![o.category.clone()] } else { o.labels.clone() };
        for l in &labels {
            if l.trim().is_empty() {
                return Err(SynthError::SpecInvalid(format!("object {i} has an empty label")));
            }
        }
        let instance = i as u32 + 1;
        instances.push(InstanceInfo {
            id: instance,
            category,
            category_name: o.category.clone(),
            kind,
            labels: labels.clone(),
        });
        primitives.push(Primitive { geometry, instance, category, kind, labels });
    }

    let [sx, sy, sz] = spec.room;
    let rc = &spec.room_categories;
    let planes = [
        (&rc.floor, Vector3::zeros(), Vector3::z()),
        (&rc.ceiling, Vector3::new(0.0, 0.0, sz), -Vector3::z()),
        (&rc.wall, Vector3::zeros(), Vector3::x()),
        (&rc.wall, Vector3::new(sx, 0.0, 0.0), -Vector3::x()),
        (&rc.wall, Vector3::zeros(), Vector3::y()),
        (&rc.wall, Vector3::new(0.0, sy, 0.0), -Vector3::y()),
    ];
    for (name, point, normal) in planes {
        let (category, kind) = lookup(name)?;
        if kind != CategoryKind::Stuff {
            return Err(SynthError::SpecInvalid(format!("room category {name:?} is not stuff")));
        }
        let instance = match instances.iter().find(|i| i.category == category) {
            Some(i) => i.id,
            None => {
                let id = instances.len() as u32 + 1;
                instances.push(InstanceInfo {
                    id,
                    category,
                    category_name: name.clone(),
                    kind,
                    labels: vec![name.clone()],
                });
                id
            }
        };
        primitives.push(Primitive {
            geometry: Geometry::Plane { point, normal },
            instance,
            category,
            kind,
            labels: vec![name.clone()],
        });
    }

    // Every label must retrieve the category it was engineered for.
    for p in &primitives {
        for l in &p.labels {
            let e = space.embed_label(l, p.category as usize);
            let (got, _) = promptmap::retrieval::retrieve_category(&e, &categories)
                .map_err(|e| SynthError::SpecInvalid(e.to_string()))?;
            let own = categories.get(got).map(|c| c.name.as_str()).unwrap_or("");
            let is_named = promptmap::retrieval::normalize_label(own) == promptmap::retrieval::normalize_label(l);
            if got != p.category && !is_named {
                return Err(SynthError::SpecInvalid(format!("label {l:?} does not retrieve its category")));
            }
        }
    }

    Ok(SynthScene { spec: spec.clone(), seed, primitives, instances, categories, space })
}

impl SynthScene {
    /// Nearest hit along the ray: `(t, primitive index)`.
    pub fn cast(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<(f64, usize)> {
        let mut best: Option<(f64, usize)> = None;
        for (i, p) in self.primitives.iter().enumerate() {
            if let Some(t) = p.geometry.intersect(origin, dir) {
                if best.is_none_or(|(b, _)| t < b) {
                    best = Some((t, i));
                }
            }
        }
        best
    }

    pub fn instance(&self, id: u32) -> Option<&InstanceInfo> {
        self.instances.iter().find(|i| i.id == id)
    }

    /// Surface samples of every primitive at roughly `point_spacing`:
    /// `(point, primitive index)`. Box bottoms resting on the floor and other
    /// hidden faces are included; visibility is decided per trajectory.
    pub fn sample_surfaces(&self) -> Vec<([f64; 3], usize)> {
        let h = self.spec.point_spacing;
        let mut out = Vec::new();
        let [sx, sy, sz] = self.spec.room;
        for (i, p) in self.primitives.iter().enumerate() {
            match &p.geometry {
                Geometry::Plane { point, normal } => {
                    // The two in-plane axes and their room extents.
                    let axis = (0..3).find(|&a| normal[a] != 0.0).expect("axis-aligned plane");
                    let others: Vec<usize> = (0..3).filter(|&a| a != axis).collect();
                    let ext = [sx, sy, sz];
                    grid_2d(ext[others[0]], ext[others[1]], h, |a, b| {
                        let mut q = [0.0; 3];
                        q[axis] = point[axis];
                        q[others[0]] = a;
                        q[others[1]] = b;
                        out.push((q, i));
                    });
                }
                Geometry::Box { center, half, rotation } => {
                    for axis in 0..3 {
                        let others: Vec<usize> = (0..3).filter(|&a| a != axis).collect();
                        for sign in [-1.0, 1.0] {
                            grid_2d(2.0 * half[others[0]], 2.0 * half[others[1]], h, |a, b| {
                                let mut l = Vector3::zeros();
                                l[axis] = sign * half[axis];
                                l[others[0]] = a - half[others[0]];
                                l[others[1]] = b - half[others[1]];
                                let w = center + rotation * l;
                                out.push(([w.x, w.y, w.z], i));
                            });
                        }
                    }
                }
                Geometry::Sphere { center, radius } => {
                    let area = 4.0 * std::f64::consts::PI * radius * radius;
                    let n = ((area / (h * h)).ceil() as usize).max(1);
                    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
                    for k in 0..n {
                        let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
                        let r = (1.0 - z * z).sqrt();
                        let phi = golden * k as f64;
                        let w = center + *radius * Vector3::new(r * phi.cos(), r * phi.sin(), z);
                        out.push(([w.x, w.y, w.z], i));
                    }
                }
            }
        }
        out
    }
}

/// Cell-centred samples of a `w × h` rectangle at spacing close to `step`.
fn grid_2d(w: f64, h: f64, step: f64, mut f: impl FnMut(f64, f64)) {
    let nw = ((w / step).round() as usize).max(1);
    let nh = ((h / step).round() as usize).max(1);
    for i in 0..nw {
        for j in 0..nh {
            f((i as f64 + 0.5) * w / nw as f64, (j as f64 + 0.5) * h / nh as f64);
        }
    }
}
