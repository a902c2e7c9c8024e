//! Shared fixtures: a toy category table with engineered embeddings and a
//! minimal ray caster over axis-aligned boxes and a floor plane.

#![allow(dead_code)]

use nalgebra::Vector3;
use promptmap::camera::{CameraIntrinsics, Pose};
use promptmap::category::{CategoryKind, CategoryTable, SizeClass, SizePolicy, UnifiedCategory};
use promptmap::dataset::{DepthImage, Detection, FrameRecord, DEFAULT_DEPTH_SCALE};
use promptmap::mask::Mask;

pub const DIM: usize = 16;
pub const WALL: u32 = 0;
pub const FLOOR: u32 = 1;
pub const COUCH: u32 = 2;
pub const TABLE: u32 = 3;
pub const DINING_TABLE: u32 = 4;
pub const BOOK: u32 = 5;
pub const CUP: u32 = 6;

const NAMES: [(&str, CategoryKind, SizeClass); 7] = [
    ("wall", CategoryKind::Stuff, SizeClass::Large),
    ("floor", CategoryKind::Stuff, SizeClass::Large),
    ("couch", CategoryKind::Thing, SizeClass::Large),
    ("table", CategoryKind::Thing, SizeClass::Medium),
    ("dining table", CategoryKind::Thing, SizeClass::Medium),
    ("book", CategoryKind::Thing, SizeClass::Small),
    ("cup", CategoryKind::Thing, SizeClass::Small),
];

pub fn basis(i: usize) -> Vec<f32> {
    let mut v = vec![0.0; DIM];
    v[i] = 1.0;
    v
}

/// Category anchors are the first basis vectors; a synonym of `category` is
/// the anchor rotated by 30° towards an unused basis direction `8 + j`.
pub fn synonym(category: u32, j: usize) -> Vec<f32> {
    let (c, s) = (30f32.to_radians().cos(), 30f32.to_radians().sin());
    let mut v = vec![0.0; DIM];
    v[category as usize] = c;
    v[8 + j] = s;
    v
}

pub fn toy_table() -> CategoryTable {
    let cats = NAMES
        .iter()
        .enumerate()
        .map(|(i, (name, kind, size_class))| UnifiedCategory {
            id: i as u32,
            name: name.to_string(),
            kind: *kind,
            size_class: *size_class,
            embedding: basis(i),
        })
        .collect();
    CategoryTable::new(cats, DIM, SizePolicy::default()).unwrap()
}

pub fn intrinsics() -> CameraIntrinsics {
    CameraIntrinsics { fx: 100.0, fy: 100.0, cx: 79.5, cy: 59.5, width: 160, height: 120 }
}

/// Axis-aligned box owned by instance `id`.
#[derive(Debug, Clone, Copy)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub id: u32,
}

impl Aabb {
    pub fn cube(center: [f64; 3], side: f64, id: u32) -> Self {
        let h = side / 2.0;
        Self { min: [center[0] - h, center[1] - h, center[2] - h], max: [center[0] + h, center[1] + h, center[2] + h], id }
    }

    fn hit(&self, o: &Vector3<f64>, d: &Vector3<f64>) -> Option<f64> {
        let (mut t0, mut t1) = (0.0f64, f64::INFINITY);
        for a in 0..3 {
            if d[a].abs() < 1e-12 {
                if o[a] < self.min[a] || o[a] > self.max[a] {
                    return None;
                }
                continue;
            }
            let (mut lo, mut hi) = ((self.min[a] - o[a]) / d[a], (self.max[a] - o[a]) / d[a]);
            if lo > hi {
                std::mem::swap(&mut lo, &mut hi);
            }
            t0 = t0.max(lo);
            t1 = t1.min(hi);
            if t0 > t1 {
                return None;
            }
        }
        (t0 > 1e-9).then_some(t0)
    }
}

/// Boxes plus an optional floor plane `z = 0` (instance `floor_id`) and an
/// optional wall plane `y = wall_y` facing -y (instance `wall_id`).
#[derive(Debug, Clone, Default)]
pub struct Scene {
    pub boxes: Vec<Aabb>,
    pub floor_id: Option<u32>,
    pub wall: Option<(f64, u32)>,
}

pub struct View {
    pub depth: DepthImage,
    pub ids: Vec<Option<u32>>,
}

impl Scene {
    pub fn cast(&self, o: &Vector3<f64>, d: &Vector3<f64>) -> Option<(f64, u32)> {
        let mut best: Option<(f64, u32)> = None;
        let mut take = |t: f64, id: u32| {
            if best.is_none_or(|(b, _)| t < b) {
                best = Some((t, id));
            }
        };
        for b in &self.boxes {
            if let Some(t) = b.hit(o, d) {
                take(t, b.id);
            }
        }
        if let Some(id) = self.floor_id {
            if d.z < 0.0 {
                take(-o.z / d.z, id);
            }
        }
        if let Some((y, id)) = self.wall {
            if (y - o.y) * d.y > 0.0 {
                take((y - o.y) / d.y, id);
            }
        }
        best
    }

    /// Depth is the camera-frame z of the first hit, quantised to millimetres.
    pub fn render(&self, k: &CameraIntrinsics, pose: &Pose) -> View {
        let mut raw = Vec::with_capacity(k.pixel_count());
        let mut ids = Vec::with_capacity(k.pixel_count());
        for v in 0..k.height as usize {
            for u in 0..k.width as usize {
                let (x, y) = k.ray_xy(u, v);
                let dir = pose.rotation() * Vector3::new(x, y, 1.0);
                match self.cast(pose.translation(), &dir) {
                    Some((t, id)) if t < 10.0 => {
                        raw.push((t / DEFAULT_DEPTH_SCALE).round() as u16);
                        ids.push(Some(id));
                    }
                    _ => {
                        raw.push(0);
                        ids.push(None);
                    }
                }
            }
        }
        let depth = DepthImage { width: k.width, height: k.height, scale: DEFAULT_DEPTH_SCALE, raw };
        View { depth, ids }
    }
}

impl View {
    pub fn mask_of(&self, k: &CameraIntrinsics, id: u32) -> Mask {
        Mask::from_bits(k.width, k.height, self.ids.iter().map(|i| *i == Some(id)).collect()).unwrap()
    }
}

/// What to detect in a frame: instance id, label, embedding, confidence.
pub struct Spec<'a> {
    pub id: u32,
    pub label: &'a str,
    pub embedding: Vec<f32>,
    pub confidence: f64,
}

pub fn spec(id: u32, label: &str, embedding: Vec<f32>, confidence: f64) -> Spec<'_> {
    Spec { id, label, embedding, confidence }
}

/// Renders `scene` and turns the requested instances into exact-mask
/// detections (instances not visible are skipped).
pub fn frame(index: u32, scene: &Scene, pose: Pose, specs: &[Spec]) -> FrameRecord {
    let k = intrinsics();
    let view = scene.render(&k, &pose);
    let detections = specs
        .iter()
        .filter_map(|s| {
            let mask = view.mask_of(&k, s.id);
            let bbox = mask.bbox()?;
            Some(Detection {
                bbox,
                confidence: s.confidence,
                label: s.label.to_string(),
                embedding: s.embedding.clone(),
                mask,
                from_caption: false,
            })
        })
        .collect();
    FrameRecord {
        index,
        rgb_path: None,
        depth_path: format!("depth/{index:06}.bin"),
        depth: view.depth,
        intrinsics: k,
        pose,
        detections,
        blurry: false,
    }
}

pub fn look_at(eye: [f64; 3], target: [f64; 3]) -> Pose {
    Pose::look_at(Vector3::from(eye), Vector3::from(target), Vector3::z()).unwrap()
}

/// `n` poses on a circle of `radius` around `target` at `height`.
pub fn orbit(target: [f64; 3], radius: f64, height: f64, n: usize, arc: f64) -> Vec<Pose> {
    (0..n)
        .map(|i| {
            let a = arc * i as f64 / n.max(1) as f64;
            look_at([target[0] + radius * a.cos(), target[1] + radius * a.sin(), height], target)
        })
        .collect()
}

/// Writes `frames` as a dataset under `root` and returns the manifest path.
pub fn write_dataset(root: &std::path::Path, table: &CategoryTable, frames: &[FrameRecord]) -> std::path::PathBuf {
    use promptmap::dataset::{write_category_table, write_frame, write_manifest, DepthSpec, Manifest, SCHEMA_VERSION};
    let k = intrinsics();
    write_category_table(&root.join("categories.json"), table).unwrap();
    let entries = frames.iter().map(|f| write_frame(root, f).unwrap()).collect::<Vec<_>>();
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        frame_count: entries.len(),
        embedding_dim: table.embedding_dim(),
        depth: DepthSpec { scale: DEFAULT_DEPTH_SCALE, width: k.width, height: k.height },
        category_table: "categories.json".into(),
        size_policy: Some(*table.size_policy()),
        config: None,
        frames: entries,
    };
    write_manifest(root, &manifest).unwrap()
}

/// A table-and-cube scene seen from three poses, with one detection each.
pub fn three_frames() -> Vec<FrameRecord> {
    let scene = Scene { boxes: vec![Aabb::cube([0.0, 0.0, 0.3], 0.6, 7)], floor_id: Some(1), wall: None };
    orbit([0.0, 0.0, 0.3], 2.0, 1.2, 3, 1.0)
        .into_iter()
        .enumerate()
        .map(|(i, pose)| {
            frame(i as u32, &scene, pose, &[spec(7, "table", basis(TABLE as usize), 0.9), spec(1, "floor", basis(FLOOR as usize), 0.8)])
        })
        .collect()
}
