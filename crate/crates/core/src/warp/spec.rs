use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The 12 vehicle keypoints (wheels, upper windshield, upper rear window,
/// front lights and back trunk, each left and right).
pub const CAR_KEYPOINTS: [&str; 12] = [
    "left_front_wheel",
    "left_back_wheel",
    "right_front_wheel",
    "right_back_wheel",
    "upper_left_windshield",
    "upper_right_windshield",
    "upper_left_rearwindow",
    "upper_right_rearwindow",
    "left_front_light",
    "right_front_light",
    "left_back_trunk",
    "right_back_trunk",
];

/// The 10 chair keypoints.
pub const CHAIR_KEYPOINTS: [&str; 10] = [
    "back_upper_left",
    "back_upper_right",
    "seat_upper_left",
    "seat_upper_right",
    "seat_lower_left",
    "seat_lower_right",
    "leg_upper_left",
    "leg_upper_right",
    "leg_lower_left",
    "leg_lower_right",
];

/// Keypoint catalog of a known class, `None` for user-defined classes.
pub fn class_keypoints(class: &str) -> Option<&'static [&'static str]> {
    match class {
        "car" | "vehicle" => Some(&CAR_KEYPOINTS),
        "chair" => Some(&CHAIR_KEYPOINTS),
        _ => None,
    }
}

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("patch {patch:?} lists {count} keypoints; at least 3 are required")]
    TooFewKeypoints { patch: String, count: usize },
    #[error("patch {patch:?} references keypoint {keypoint:?} outside the {class:?} catalog")]
    UnknownKeypoint { patch: String, keypoint: String, class: String },
    #[error("mirror entry {0:?} -> {1:?} names an unknown patch")]
    UnknownMirrorPatch(String, String),
    #[error("mirror map is not an involution at {0:?}")]
    MirrorNotInvolution(String),
    #[error("keypoint mirror is not an involution at {0:?}")]
    KeypointMirrorNotInvolution(String),
    #[error("keypoint mirror entry {0:?} is not used by any patch")]
    UnknownMirrorKeypoint(String),
    #[error("patch {0:?} and its mirror have different keypoint counts")]
    MirrorArity(String),
    #[error("spec json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Per-class catalog of planar patches and their left/right symmetry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct PatchSpec {
    class: String,
    patches: BTreeMap<String, Vec<String>>,
    mirror: BTreeMap<String, String>,
    keypoint_mirror: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawSpec {
    class: String,
    patches: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    mirror: BTreeMap<String, String>,
    #[serde(default)]
    keypoint_mirror: BTreeMap<String, String>,
}

impl TryFrom<RawSpec> for PatchSpec {
    type Error = SpecError;
    fn try_from(raw: RawSpec) -> Result<Self, SpecError> {
        PatchSpec::new(raw.class, raw.patches, raw.mirror, raw.keypoint_mirror)
    }
}

impl From<PatchSpec> for RawSpec {
    fn from(s: PatchSpec) -> Self {
        RawSpec {
            class: s.class,
            patches: s.patches,
            mirror: s.mirror,
            keypoint_mirror: s.keypoint_mirror,
        }
    }
}

impl PatchSpec {
    pub fn new(
        class: String,
        patches: BTreeMap<String, Vec<String>>,
        mirror: BTreeMap<String, String>,
        keypoint_mirror: BTreeMap<String, String>,
    ) -> Result<Self, SpecError> {
        let catalog: Option<BTreeSet<&str>> = class_keypoints(&class).map(|c| c.iter().copied().collect());
        let mut used = BTreeSet::new();
        for (name, kps) in &patches {
            if kps.len() < 3 {
                return Err(SpecError::TooFewKeypoints {
                    patch: name.clone(),
                    count: kps.len(),
                });
            }
            for kp in kps {
                if let Some(cat) = &catalog {
                    if !cat.contains(kp.as_str()) {
                        return Err(SpecError::UnknownKeypoint {
                            patch: name.clone(),
                            keypoint: kp.clone(),
                            class: class.clone(),
                        });
                    }
                }
                used.insert(kp.clone());
            }
        }
        for (a, b) in &mirror {
            if !patches.contains_key(a) || !patches.contains_key(b) {
                return Err(SpecError::UnknownMirrorPatch(a.clone(), b.clone()));
            }
            if mirror.get(b) != Some(a) {
                return Err(SpecError::MirrorNotInvolution(a.clone()));
            }
            if patches[a].len() != patches[b].len() {
                return Err(SpecError::MirrorArity(a.clone()));
            }
        }
        for (a, b) in &keypoint_mirror {
            if !used.contains(a) {
                return Err(SpecError::UnknownMirrorKeypoint(a.clone()));
            }
            if keypoint_mirror.get(b) != Some(a) {
                return Err(SpecError::KeypointMirrorNotInvolution(a.clone()));
            }
        }
        Ok(Self {
            class,
            patches,
            mirror,
            keypoint_mirror,
        })
    }

    pub fn from_json(src: &str) -> Result<Self, SpecError> {
        Ok(serde_json::from_str(src)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SpecError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn class(&self) -> &str {
        &self.class
    }

    /// Patch names in lexicographic order.
    pub fn patch_names(&self) -> impl Iterator<Item = &str> {
        self.patches.keys().map(String::as_str)
    }

    pub fn patches(&self) -> &BTreeMap<String, Vec<String>> {
        &self.patches
    }

    pub fn keypoints_of(&self, patch: &str) -> Option<&[String]> {
        self.patches.get(patch).map(Vec::as_slice)
    }

    /// Mirror partner of a patch (itself for self-symmetric patches).
    pub fn mirror_of(&self, patch: &str) -> Option<&str> {
        self.mirror.get(patch).map(String::as_str)
    }

    /// Mirrored keypoint name; keypoints on the symmetry plane map to themselves.
    pub fn mirror_keypoint<'a>(&'a self, kp: &'a str) -> &'a str {
        self.keypoint_mirror.get(kp).map(String::as_str).unwrap_or(kp)
    }

    /// Every keypoint name referenced by some patch.
    pub fn keypoint_names(&self) -> BTreeSet<&str> {
        self.patches.values().flatten().map(String::as_str).collect()
    }

    /// Built-in layout of a known class.
    pub fn builtin(class: &str) -> Option<Self> {
        match class {
            "car" | "vehicle" => Some(Self::vehicle()),
            "chair" => Some(Self::chair()),
            _ => None,
        }
    }

    /// Default six-plane vehicle layout: left, right, roof, front, back and
    /// windshield (hood plus windscreen, lights to upper windshield).
    pub fn vehicle() -> Self {
        let patch = |kps: &[&str]| kps.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let mut patches = BTreeMap::new();
        patches.insert(
            "left".to_string(),
            patch(&["left_front_wheel", "left_back_wheel", "left_back_trunk", "left_front_light"]),
        );
        patches.insert(
            "right".to_string(),
            patch(&["right_front_wheel", "right_back_wheel", "right_back_trunk", "right_front_light"]),
        );
        patches.insert(
            "roof".to_string(),
            patch(&[
                "upper_left_windshield",
                "upper_right_windshield",
                "upper_right_rearwindow",
                "upper_left_rearwindow",
            ]),
        );
        patches.insert(
            "front".to_string(),
            patch(&["left_front_light", "right_front_light", "right_front_wheel", "left_front_wheel"]),
        );
        patches.insert(
            "back".to_string(),
            patch(&["left_back_trunk", "right_back_trunk", "right_back_wheel", "left_back_wheel"]),
        );
        patches.insert(
            "windshield".to_string(),
            patch(&[
                "left_front_light",
                "right_front_light",
                "upper_right_windshield",
                "upper_left_windshield",
            ]),
        );
        let mut mirror = BTreeMap::new();
        for (a, b) in [
            ("left", "right"),
            ("right", "left"),
            ("roof", "roof"),
            ("front", "front"),
            ("back", "back"),
            ("windshield", "windshield"),
        ] {
            mirror.insert(a.to_string(), b.to_string());
        }
        let keypoint_mirror = CAR_KEYPOINTS
            .iter()
            .map(|k| (k.to_string(), swap_side(k)))
            .collect();
        Self::new("car".into(), patches, mirror, keypoint_mirror).expect("built-in vehicle spec is valid")
    }

    /// Four-plane chair layout: left, right, seat and back.
    pub fn chair() -> Self {
        let patch = |kps: &[&str]| kps.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let mut patches = BTreeMap::new();
        patches.insert(
            "back".to_string(),
            patch(&["back_upper_left", "back_upper_right", "seat_upper_right", "seat_upper_left"]),
        );
        patches.insert(
            "seat".to_string(),
            patch(&["seat_upper_left", "seat_upper_right", "seat_lower_right", "seat_lower_left"]),
        );
        patches.insert(
            "left".to_string(),
            patch(&["seat_upper_left", "seat_lower_left", "leg_lower_left", "leg_upper_left"]),
        );
        patches.insert(
            "right".to_string(),
            patch(&["seat_upper_right", "seat_lower_right", "leg_lower_right", "leg_upper_right"]),
        );
        let mut mirror = BTreeMap::new();
        for (a, b) in [("left", "right"), ("right", "left"), ("seat", "seat"), ("back", "back")] {
            mirror.insert(a.to_string(), b.to_string());
        }
        let keypoint_mirror = CHAIR_KEYPOINTS
            .iter()
            .map(|k| (k.to_string(), swap_side(k)))
            .collect();
        Self::new("chair".into(), patches, mirror, keypoint_mirror).expect("built-in chair spec is valid")
    }
}

fn swap_side(name: &str) -> String {
    if name.contains("left") {
        name.replace("left", "right")
    } else {
        name.replace("right", "left")
    }
}
