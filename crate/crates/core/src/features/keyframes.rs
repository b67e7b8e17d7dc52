use log::debug;

use super::{Episode, PipelineConfig};
use crate::error::Result;
use crate::raster::{
    euclidean_distance_transform, frame_diff_energy, laplacian_variance, mask_centroid,
    min_distance_in_mask, Point2,
};

/// Cached per-keyframe measurements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyframeSignal {
    /// Index into the source episode.
    pub frame_index: usize,
    pub centroid: Point2,
    /// Minimum hand-object distance in pixels, clamped to the image diagonal.
    pub distance: f64,
    pub contact: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyframeSeries {
    pub source: String,
    pub entries: Vec<KeyframeSignal>,
}

impl KeyframeSeries {
    pub fn indices(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.frame_index).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Keeps frame 0 and every later frame whose sharpness and difference against
/// the previous original frame both reach their thresholds.
///
/// Empty masks never fail: a missing hand carries the previous centroid
/// forward, and either missing mask sets the distance to the image diagonal
/// with no contact.
pub fn select_keyframes(episode: &Episode, cfg: &PipelineConfig) -> Result<KeyframeSeries> {
    cfg.validate()?;
    episode.validate()?;
    let (w, h) = episode.dimensions();
    let diagonal = (w as f64).hypot(h as f64);
    let mut entries: Vec<KeyframeSignal> = Vec::new();

    for i in 0..episode.len() {
        if i > 0 {
            let sharp = laplacian_variance(&episode.frames[i])?;
            let diff = frame_diff_energy(&episode.frames[i - 1], &episode.frames[i])?;
            if !(sharp >= cfg.sharpness_threshold && diff >= cfg.diff_threshold) {
                continue;
            }
        }

        let hand = &episode.hand_masks[i];
        let object = &episode.object_masks[i];
        let centroid = match mask_centroid(hand) {
            Ok(c) => c,
            Err(_) => entries
                .last()
                .map(|e| e.centroid)
                .unwrap_or_else(|| Point2::new(w as f64 / 2.0, h as f64 / 2.0)),
        };
        let distance = if hand.is_empty() || object.is_empty() {
            diagonal
        } else {
            let field = euclidean_distance_transform(object);
            min_distance_in_mask(&field, hand)?.min(diagonal)
        };
        let contact = !hand.is_empty() && !object.is_empty() && distance <= cfg.contact_epsilon;
        entries.push(KeyframeSignal {
            frame_index: i,
            centroid,
            distance,
            contact,
        });
    }
    debug!(
        "episode {}: kept {} of {} frames",
        episode.episode_id,
        entries.len(),
        episode.len()
    );
    Ok(KeyframeSeries {
        source: episode.episode_id.clone(),
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::ClassLabel;
    use crate::raster::{BinaryMask, Raster};

    fn textured(w: usize, h: usize, shift: usize) -> Raster {
        let data = (0..w * h)
            .map(|i| (((i + shift) * 37) % 11) as f64 * 5.0)
            .collect();
        Raster::new(w, h, data).unwrap()
    }

    fn episode(frames: Vec<Raster>) -> Episode {
        let n = frames.len();
        let (w, h) = (frames[0].width(), frames[0].height());
        let hand = BinaryMask::from_points(w, h, &[(1, 1)]).unwrap();
        let object = BinaryMask::from_points(w, h, &[(w - 1, h - 1)]).unwrap();
        Episode::new(
            "t",
            frames,
            vec![hand; n],
            vec![object; n],
            vec![ClassLabel::Unknown; n],
        )
        .unwrap()
    }

    #[test]
    fn vacuous_thresholds_keep_everything() {
        let ep = episode((0..6).map(|i| textured(8, 8, i)).collect());
        let cfg = PipelineConfig {
            sharpness_threshold: 0.0,
            diff_threshold: 0.0,
            ..Default::default()
        };
        let s = select_keyframes(&ep, &cfg).unwrap();
        assert_eq!(s.indices(), (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn infinite_diff_threshold_keeps_first_only() {
        let ep = episode((0..6).map(|i| textured(8, 8, i)).collect());
        let cfg = PipelineConfig {
            diff_threshold: f64::INFINITY,
            ..Default::default()
        };
        assert_eq!(select_keyframes(&ep, &cfg).unwrap().indices(), vec![0]);
    }

    #[test]
    fn static_prefix_is_dropped() {
        let mut frames = vec![textured(8, 8, 0); 4];
        frames.extend((1..5).map(|i| textured(8, 8, i)));
        let ep = episode(frames);
        let cfg = PipelineConfig::default();
        let s = select_keyframes(&ep, &cfg).unwrap();
        // per-frame recomputation
        let mut expect = vec![0];
        for i in 1..ep.len() {
            let sharp = laplacian_variance(&ep.frames[i]).unwrap();
            let diff = frame_diff_energy(&ep.frames[i - 1], &ep.frames[i]).unwrap();
            if sharp >= cfg.sharpness_threshold && diff >= cfg.diff_threshold {
                expect.push(i);
            }
        }
        assert_eq!(s.indices(), expect);
        assert_eq!(s.indices(), vec![0, 4, 5, 6, 7]);
    }

    #[test]
    fn empty_masks_fall_back() {
        let (w, h) = (6, 8);
        let frames: Vec<Raster> = (0..3).map(|i| textured(w, h, i)).collect();
        let hand = BinaryMask::from_points(w, h, &[(2, 3)]).unwrap();
        let empty = BinaryMask::empty(w, h).unwrap();
        let object = BinaryMask::from_points(w, h, &[(2, 4)]).unwrap();
        let ep = Episode::new(
            "fallback",
            frames,
            vec![hand.clone(), empty.clone(), hand],
            vec![object.clone(), object, empty],
            vec![ClassLabel::Unknown; 3],
        )
        .unwrap();
        let cfg = PipelineConfig {
            sharpness_threshold: 0.0,
            diff_threshold: 0.0,
            ..Default::default()
        };
        let s = select_keyframes(&ep, &cfg).unwrap();
        let diag = (w as f64).hypot(h as f64);
        assert_eq!(s.entries[0].distance, 1.0);
        assert!(s.entries[0].contact);
        assert_eq!(s.entries[1].centroid, Point2::new(2.0, 3.0));
        assert_eq!(s.entries[1].distance, diag);
        assert!(!s.entries[1].contact);
        assert_eq!(s.entries[2].distance, diag);
        assert!(!s.entries[2].contact);
    }
}
