//! Category lists used to build synthetic category tables.

use promptmap::category::{CategoryKind, SizeClass};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategorySpec {
    pub name: String,
    pub kind: CategoryKind,
    pub size_class: SizeClass,
}

impl CategorySpec {
    pub fn new(name: &str, kind: CategoryKind, size_class: SizeClass) -> Self {
        Self { name: name.to_string(), kind, size_class }
    }
}

pub const COCO_THINGS: [&str; 80] = [
    "person", "bicycle", "car", "motorcycle", "airplane", "bus", "train", "truck", "boat", "traffic light",
    "fire hydrant", "stop sign", "parking meter", "bench", "bird", "cat", "dog", "horse", "sheep", "cow",
    "elephant", "bear", "zebra", "giraffe", "backpack", "umbrella", "handbag", "tie", "suitcase", "frisbee",
    "skis", "snowboard", "sports ball", "kite", "baseball bat", "baseball glove", "skateboard", "surfboard",
    "tennis racket", "bottle", "wine glass", "cup", "fork", "knife", "spoon", "bowl", "banana", "apple",
    "sandwich", "orange", "broccoli", "carrot", "hot dog", "pizza", "donut", "cake", "chair", "couch",
    "potted plant", "bed", "dining table", "toilet", "tv", "laptop", "mouse", "remote", "keyboard",
    "cell phone", "microwave", "oven", "toaster", "sink", "refrigerator", "book", "clock", "vase", "scissors",
    "teddy bear", "hair drier", "toothbrush",
];

pub const COCO_STUFF: [&str; 91] = [
    "banner", "blanket", "branch", "bridge", "building-other", "bush", "cabinet", "cage", "cardboard",
    "carpet", "ceiling-other", "ceiling-tile", "cloth", "clothes", "clouds", "counter", "cupboard", "curtain",
    "desk-stuff", "dirt", "door-stuff", "fence", "floor-marble", "floor-other", "floor-stone", "floor-tile",
    "floor-wood", "flower", "fog", "food-other", "fruit", "furniture-other", "grass", "gravel", "ground-other",
    "hill", "house", "leaves", "light", "mat", "metal", "mirror-stuff", "moss", "mountain", "mud", "napkin",
    "net", "paper", "pavement", "pillow", "plant-other", "plastic", "platform", "playingfield", "railing",
    "railroad", "river", "road", "rock", "roof", "rug", "salad", "sand", "sea", "shelf", "sky-other",
    "skyscraper", "snow", "solid-other", "stairs", "stone", "straw", "structural-other", "table", "tent",
    "textile-other", "towel", "tree", "vegetable", "wall-brick", "wall-concrete", "wall-other", "wall-panel",
    "wall-stone", "wall-tile", "wall-wood", "water-other", "waterdrops", "window-blind", "window-other", "wood",
];

const LARGE_THINGS: [&str; 12] =
    ["car", "bus", "train", "truck", "boat", "airplane", "elephant", "giraffe", "bed", "refrigerator", "couch", "dining table"];
const MEDIUM_THINGS: [&str; 14] = [
    "person", "bicycle", "motorcycle", "bench", "horse", "cow", "bear", "chair", "potted plant", "toilet", "tv",
    "oven", "sink", "suitcase",
];

/// The 171 COCO-Stuff categories: things first, then stuff. Stuff is Large;
/// things get a coarse size class by name.
pub fn coco_stuff() -> Vec<CategorySpec> {
    let things = COCO_THINGS.iter().map(|&n| {
        let size = if LARGE_THINGS.contains(&n) {
            SizeClass::Large
        } else if MEDIUM_THINGS.contains(&n) {
            SizeClass::Medium
        } else {
            SizeClass::Small
        };
        CategorySpec::new(n, CategoryKind::Thing, size)
    });
    let stuff = COCO_STUFF.iter().map(|&n| CategorySpec::new(n, CategoryKind::Stuff, SizeClass::Large));
    things.chain(stuff).collect()
}

/// Small indoor taxonomy used by the default scenes.
pub fn indoor() -> Vec<CategorySpec> {
    use CategoryKind::{Stuff, Thing};
    use SizeClass::{Large, Medium, Small};
    [
        ("wall", Stuff, Large),
        ("floor", Stuff, Large),
        ("ceiling", Stuff, Large),
        ("couch", Thing, Large),
        ("table", Thing, Medium),
        ("dining table", Thing, Medium),
        ("chair", Thing, Medium),
        ("cabinet", Thing, Medium),
        ("bed", Thing, Large),
        ("tv", Thing, Medium),
        ("vase", Thing, Small),
        ("cup", Thing, Small),
        ("bowl", Thing, Small),
        ("book", Thing, Small),
        ("ball", Thing, Small),
        ("lamp", Thing, Small),
    ]
    .into_iter()
    .map(|(n, k, s)| CategorySpec::new(n, k, s))
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn coco_stuff_has_171_unique_names() {
        let all = coco_stuff();
        assert_eq!(all.len(), 171);
        assert_eq!(all.iter().map(|c| &c.name).collect::<BTreeSet<_>>().len(), 171);
        assert_eq!(all.iter().filter(|c| c.kind == CategoryKind::Thing).count(), 80);
    }
}
