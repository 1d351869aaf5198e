use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{frame_file_name, ChannelPolicy, ModalityKind};
use crate::error::{Error, Result};

pub const INDEX_FILE: &str = "index.json";

/// Frame extensions probed in order when locating a modality's frames.
const FRAME_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClipSplit {
    #[default]
    Train,
    Test,
}

impl std::str::FromStr for ClipSplit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(ClipSplit::Train),
            "test" => Ok(ClipSplit::Test),
            other => Err(Error::InvalidParam(format!(
                "unknown split {other:?} (expected train or test)"
            ))),
        }
    }
}

/// Serialized form of `index.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndexFile {
    pub classes: Vec<String>,
    /// Decode channel count for TIR and DEPTH (1 or 3). Defaults to 3.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channels: Option<usize>,
    pub clips: Vec<IndexedClip>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndexedClip {
    pub id: String,
    pub label: usize,
    pub frames: usize,
    #[serde(default)]
    pub split: ClipSplit,
    /// Modality key (`rgb`, `tir`, `depth`) to frame directory, relative to the root.
    pub modalities: BTreeMap<String, String>,
}

/// Frames of one modality of one clip as found on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalityFrames {
    pub dir: PathBuf,
    pub ext: String,
    /// Number of frames present; may be shorter than the clip's `frames`.
    pub count: usize,
    pub width: u32,
    pub height: u32,
}

impl ModalityFrames {
    pub fn frame_path(&self, i: usize) -> PathBuf {
        self.dir.join(frame_file_name(i, &self.ext))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultimodalClip {
    pub id: String,
    pub label: usize,
    /// Aligned frame count: the longest modality.
    pub frames: usize,
    pub split: ClipSplit,
    pub modalities: BTreeMap<ModalityKind, ModalityFrames>,
}

impl MultimodalClip {
    pub fn modality(&self, kind: ModalityKind) -> &ModalityFrames {
        &self.modalities[&kind]
    }
}

#[derive(Debug, Clone)]
pub struct DatasetIndex {
    pub root: PathBuf,
    pub classes: Vec<String>,
    pub clips: Vec<MultimodalClip>,
    pub split: ClipSplit,
    pub channels: ChannelPolicy,
}

impl DatasetIndex {
    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn len(&self) -> usize {
        self.clips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clips.is_empty()
    }
}

/// Reads and validates `root/index.json`, keeping the clips of `split`.
///
/// Every clip of the file is validated, not only those of the requested split.
pub fn load_index(root: &Path, split: ClipSplit) -> Result<DatasetIndex> {
    let path = root.join(INDEX_FILE);
    if !path.is_file() {
        return Err(Error::MissingIndex(path));
    }
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let file: IndexFile = serde_json::from_str(&text).map_err(|e| Error::BadIndex {
        path: path.clone(),
        msg: e.to_string(),
    })?;
    if file.classes.is_empty() {
        return Err(Error::BadIndex {
            path,
            msg: "class table is empty".into(),
        });
    }
    let channels = match file.channels {
        None => ChannelPolicy::default(),
        Some(n) => ChannelPolicy::from_count(n).ok_or_else(|| Error::BadIndex {
            path: path.clone(),
            msg: format!("channels must be 1 or 3, got {n}"),
        })?,
    };

    let k = file.classes.len();
    let mut seen = HashSet::new();
    let mut clips = Vec::new();
    for entry in &file.clips {
        if !seen.insert(entry.id.clone()) {
            return Err(Error::DuplicateClip(entry.id.clone()));
        }
        let clip = validate_clip(root, entry, k)?;
        if clip.split == split {
            clips.push(clip);
        }
    }

    Ok(DatasetIndex {
        root: root.to_path_buf(),
        classes: file.classes,
        clips,
        split,
        channels,
    })
}

fn validate_clip(root: &Path, entry: &IndexedClip, classes: usize) -> Result<MultimodalClip> {
    if entry.label >= classes {
        return Err(Error::LabelOutOfRange {
            clip: entry.id.clone(),
            label: entry.label,
            classes,
        });
    }
    if entry.frames == 0 {
        return Err(Error::BadIndex {
            path: root.join(INDEX_FILE),
            msg: format!("clip {}: frame count must be positive", entry.id),
        });
    }
    for key in entry.modalities.keys() {
        if ModalityKind::from_key(key).is_none() {
            return Err(Error::BadIndex {
                path: root.join(INDEX_FILE),
                msg: format!("clip {}: unknown modality {key:?}", entry.id),
            });
        }
    }

    let mut modalities = BTreeMap::new();
    for kind in ModalityKind::ALL {
        let subdir = entry
            .modalities
            .iter()
            .find(|(k, _)| ModalityKind::from_key(k) == Some(kind))
            .map(|(_, v)| v)
            .ok_or_else(|| Error::MissingModality {
                clip: entry.id.clone(),
                modality: kind,
                detail: "not listed in index".into(),
            })?;
        let dir = root.join(subdir);
        let frames = probe_modality(&entry.id, kind, dir, entry.frames)?;
        modalities.insert(kind, frames);
    }

    let longest = modalities.values().map(|m| m.count).max().unwrap_or(0);
    if longest < entry.frames {
        // Name the first missing file of the longest modality.
        let m = modalities
            .values()
            .max_by_key(|m| m.count)
            .expect("three modalities");
        return Err(Error::MissingFrame {
            clip: entry.id.clone(),
            path: m.frame_path(m.count),
        });
    }

    Ok(MultimodalClip {
        id: entry.id.clone(),
        label: entry.label,
        frames: entry.frames,
        split: entry.split,
        modalities,
    })
}

fn probe_modality(
    clip: &str,
    kind: ModalityKind,
    dir: PathBuf,
    max_frames: usize,
) -> Result<ModalityFrames> {
    if !dir.is_dir() {
        return Err(Error::MissingModality {
            clip: clip.to_string(),
            modality: kind,
            detail: format!("directory {} not found", dir.display()),
        });
    }
    let ext = FRAME_EXTENSIONS
        .iter()
        .find(|ext| dir.join(frame_file_name(0, ext)).is_file())
        .ok_or_else(|| Error::MissingModality {
            clip: clip.to_string(),
            modality: kind,
            detail: format!("no {} in {}", frame_file_name(0, "png|jpg"), dir.display()),
        })?
        .to_string();

    let mut count = 0;
    while count < max_frames && dir.join(frame_file_name(count, &ext)).is_file() {
        count += 1;
    }
    let first = dir.join(frame_file_name(0, &ext));
    let (width, height) = image::image_dimensions(&first).map_err(|e| Error::Decode {
        path: first.clone(),
        msg: e.to_string(),
    })?;

    Ok(ModalityFrames {
        dir,
        ext,
        count,
        width,
        height,
    })
}
