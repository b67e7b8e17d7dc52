use super::{ClassLabel, Episode, FeatureVector, KeyframeSeries, KeyframeSignal, PipelineConfig};
use crate::error::{Error, Result};

/// `N` consecutive keyframes and the label of the keyframe right after them.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveWindow {
    pub context: Vec<KeyframeSignal>,
    pub target_label: ClassLabel,
    /// Position of the target within the keyframe series.
    pub target_keyframe: usize,
    /// Frame index of the target within the episode.
    pub target_frame: usize,
}

/// Windows start at `0, stride, 2*stride, ...` while a target keyframe still
/// follows the context.
pub fn slide_windows(
    series: &KeyframeSeries,
    cfg: &PipelineConfig,
    episode: &Episode,
) -> Vec<PredictiveWindow> {
    let n = cfg.window_length;
    let k = series.entries.len();
    let mut out = Vec::new();
    let mut offset = 0;
    while offset + n < k {
        let target = &series.entries[offset + n];
        out.push(PredictiveWindow {
            context: series.entries[offset..offset + n].to_vec(),
            target_label: episode.labels[target.frame_index],
            target_keyframe: offset + n,
            target_frame: target.frame_index,
        });
        offset += cfg.stride.max(1);
    }
    out
}

/// Number of in-contact keyframes and the longest consecutive run of them.
pub fn contact_metrics(flags: &[bool], expected_len: usize) -> Result<(u32, u32)> {
    if flags.len() != expected_len {
        return Err(Error::InvalidArgument(format!(
            "expected {expected_len} contact flags, got {}",
            flags.len()
        )));
    }
    let mut count = 0;
    let mut run = 0;
    let mut longest = 0;
    for &f in flags {
        if f {
            count += 1;
            run += 1;
            longest = longest.max(run);
        } else {
            run = 0;
        }
    }
    Ok((count, longest))
}

/// Ordinary least-squares slope of `values` against `0..n`.
pub fn linear_trend(values: &[f64]) -> Result<f64> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "linear trend needs at least 2 values, got {n}"
        )));
    }
    let nf = n as f64;
    let x_mean = (nf - 1.0) / 2.0;
    let y_mean = values.iter().sum::<f64>() / nf;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (i, y) in values.iter().enumerate() {
        let dx = i as f64 - x_mean;
        sxy += dx * (y - y_mean);
        sxx += dx * dx;
    }
    Ok(sxy / sxx)
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Aggregates distances, keyframe-step speeds and contact flags of a window.
pub fn window_feature_vector(window: &PredictiveWindow) -> Result<FeatureVector> {
    let ctx = &window.context;
    if ctx.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "window context needs at least 2 keyframes, got {}",
            ctx.len()
        )));
    }
    let dists: Vec<f64> = ctx.iter().map(|s| s.distance).collect();
    let speeds: Vec<f64> = ctx
        .windows(2)
        .map(|w| w[1].centroid.distance(&w[0].centroid))
        .collect();
    let flags: Vec<bool> = ctx.iter().map(|s| s.contact).collect();

    let (mean_dist, std_dist) = mean_std(&dists);
    let (mean_speed, std_speed) = mean_std(&speeds);
    let trend_dist = linear_trend(&dists)?;
    // a single speed sample has no slope
    let trend_speed = if speeds.len() >= 2 {
        linear_trend(&speeds)?
    } else {
        0.0
    };
    let (contact_count, contact_duration) = contact_metrics(&flags, ctx.len())?;
    Ok(FeatureVector {
        mean_dist,
        std_dist,
        trend_dist,
        mean_speed,
        std_speed,
        trend_speed,
        contact_count,
        contact_duration,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::Point2;

    fn series(k: usize) -> KeyframeSeries {
        KeyframeSeries {
            source: "s".into(),
            entries: (0..k)
                .map(|i| KeyframeSignal {
                    frame_index: 2 * i,
                    centroid: Point2::new(0.0, 0.0),
                    distance: 50.0,
                    contact: false,
                })
                .collect(),
        }
    }

    fn dummy_episode(frames: usize) -> Episode {
        use crate::raster::{BinaryMask, Raster};
        let f = Raster::filled(3, 3, 0.0).unwrap();
        let m = BinaryMask::empty(3, 3).unwrap();
        let labels = (0..frames)
            .map(|i| ClassLabel::from_index(i % 5).unwrap())
            .collect();
        Episode::new(
            "d",
            vec![f; frames],
            vec![m.clone(); frames],
            vec![m; frames],
            labels,
        )
        .unwrap()
    }

    #[test]
    fn window_counts() {
        let cfg = PipelineConfig::default();
        let ep = dummy_episode(80);
        assert_eq!(slide_windows(&series(11), &cfg, &ep).len(), 1);
        assert_eq!(slide_windows(&series(10), &cfg, &ep).len(), 0);
        let w = slide_windows(&series(15), &cfg, &ep);
        assert_eq!(w.len(), 5);
        assert_eq!(
            w.iter().map(|w| w.target_keyframe).collect::<Vec<_>>(),
            (10..15).collect::<Vec<_>>()
        );
        // target label comes from the episode frame behind the keyframe
        assert_eq!(w[0].target_frame, 20);
        assert_eq!(w[0].target_label, ep.labels[20]);

        for k in 0..40 {
            for stride in 1..5 {
                let cfg = PipelineConfig {
                    stride,
                    ..Default::default()
                };
                let want = if k >= 11 { (k - 11) / stride + 1 } else { 0 };
                assert_eq!(slide_windows(&series(k), &cfg, &ep).len(), want);
            }
        }
    }

    #[test]
    fn contact_examples() {
        let t = true;
        let f = false;
        assert_eq!(
            contact_metrics(&[t, t, f, t, t, t, f, f, f, f], 10).unwrap(),
            (5, 3)
        );
        assert_eq!(contact_metrics(&[f; 10], 10).unwrap(), (0, 0));
        assert_eq!(contact_metrics(&[t; 10], 10).unwrap(), (10, 10));
        assert!(contact_metrics(&[t; 9], 10).is_err());
    }

    #[test]
    fn trend_examples() {
        assert_eq!(linear_trend(&[4.0, 4.0, 4.0]).unwrap(), 0.0);
        assert_eq!(linear_trend(&[0.0, 1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(linear_trend(&[3.0, 1.0]).unwrap(), -2.0);
        assert!(linear_trend(&[1.0]).is_err());
    }

    #[test]
    fn stationary_far_hand() {
        let s = series(11);
        let w = PredictiveWindow {
            context: s.entries[..10].to_vec(),
            target_label: ClassLabel::Unknown,
            target_keyframe: 10,
            target_frame: 20,
        };
        let fv = window_feature_vector(&w).unwrap();
        assert_eq!(fv.to_array(), [50.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn approaching_on_a_line() {
        // d = 45, 40, ..., 0 ; centroid advances one pixel per keyframe
        let context: Vec<KeyframeSignal> = (0..10)
            .map(|i| {
                let d = 45.0 - 5.0 * i as f64;
                KeyframeSignal {
                    frame_index: i,
                    centroid: Point2::new(i as f64, 3.0),
                    distance: d,
                    contact: d <= 10.0,
                }
            })
            .collect();
        let w = PredictiveWindow {
            context,
            target_label: ClassLabel::Grabbing,
            target_keyframe: 10,
            target_frame: 10,
        };
        let fv = window_feature_vector(&w).unwrap();
        assert!((fv.mean_dist - 22.5).abs() < 1e-12);
        // population std of an arithmetic progression: step * sqrt((n^2-1)/12)
        assert!((fv.std_dist - 5.0 * (99.0f64 / 12.0).sqrt()).abs() < 1e-12);
        assert!((fv.trend_dist + 5.0).abs() < 1e-12);
        assert!((fv.mean_speed - 1.0).abs() < 1e-12);
        assert!(fv.std_speed.abs() < 1e-12);
        assert!(fv.trend_speed.abs() < 1e-12);
        assert_eq!(fv.contact_count, 3);
        assert_eq!(fv.contact_duration, 3);
    }
}
