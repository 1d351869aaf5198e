use super::{ChannelPolicy, ModalityKind, MultimodalClip};
use crate::error::{Error, Result};

/// One decoded frame, interleaved `[height, width, channels]`, values 0..=255.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<u8>,
}

impl Frame {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Frame {
            width,
            height,
            channels,
            data: vec![0; width * height * channels],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: u8) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }
}

/// Decoded frames of one clip, aligned to a common length.
#[derive(Debug, Clone)]
pub struct RawClip {
    pub id: String,
    pub label: usize,
    /// Indexed by [`ModalityKind::index`]; every entry has the same length.
    pub modalities: [Vec<Frame>; 3],
}

impl RawClip {
    pub fn frames(&self) -> usize {
        self.modalities[0].len()
    }

    pub fn modality(&self, kind: ModalityKind) -> &[Frame] {
        &self.modalities[kind.index()]
    }
}

/// Nearest-index stretch of a `source`-frame sequence onto `target` slots:
/// slot `i` reads frame `floor(i * source / target)`.
pub fn stretch_indices(source: usize, target: usize) -> Vec<usize> {
    assert!(source >= 1 && target >= 1);
    (0..target).map(|i| i * source / target).collect()
}

/// Decodes every modality of `clip`. Modalities shorter than the clip are
/// stretched with [`stretch_indices`].
pub fn read_clip(clip: &MultimodalClip, channels: ChannelPolicy) -> Result<RawClip> {
    let mut out: [Vec<Frame>; 3] = Default::default();
    for kind in ModalityKind::ALL {
        let m = clip.modality(kind);
        let c = channels.channels(kind);
        let decoded = (0..m.count)
            .map(|i| decode_frame(&m.frame_path(i), c))
            .collect::<Result<Vec<_>>>()?;
        out[kind.index()] = if m.count == clip.frames {
            decoded
        } else {
            stretch_indices(m.count, clip.frames)
                .into_iter()
                .map(|j| decoded[j].clone())
                .collect()
        };
    }
    Ok(RawClip {
        id: clip.id.clone(),
        label: clip.label,
        modalities: out,
    })
}

fn decode_frame(path: &std::path::Path, channels: usize) -> Result<Frame> {
    let img = image::open(path).map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    let (width, height) = (img.width() as usize, img.height() as usize);
    let data = match channels {
        1 => img.into_luma8().into_raw(),
        _ => img.into_rgb8().into_raw(),
    };
    Ok(Frame {
        width,
        height,
        channels,
        data,
    })
}
