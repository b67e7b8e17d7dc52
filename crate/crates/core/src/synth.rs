//! Scripted hand/object episodes with ground-truth atomic-state labels.
//!
//! The hand is a disc moving horizontally toward the left face of a static
//! rectangular object. Its horizontal position is driven by the edge gap
//! `g = object.x0 - (cx + r)`:
//!
//! | phase    | label       | gap                                               |
//! |----------|-------------|---------------------------------------------------|
//! | idle     | unknown     | constant, far                                     |
//! | approach | approaching | closes at `approach_speed` per frame, ends at 2ε+1 |
//! | grab     | grabbing    | decelerating steps from 2ε+1 to `-depth` (overlap) |
//! | hold     | holding     | `-depth`                                          |
//! | release  | releasing   | opens linearly back to 2ε                         |
//! | retreat  | unknown     | opens at half the approach speed                  |
//!
//! `depth` is half the hand radius, so every hold frame overlaps the object.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{
    select_keyframes, slide_windows, ClassLabel, Episode, PipelineConfig, NUM_CLASSES,
};
use crate::raster::{BinaryMask, Raster};

const BACKGROUND_LEVEL: f64 = 60.0;
const OBJECT_LEVEL: f64 = 140.0;
const HAND_LEVEL: f64 = 210.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: usize,
    pub y0: usize,
    pub width: usize,
    pub height: usize,
}

impl Rect {
    fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && x < self.x0 + self.width && y >= self.y0 && y < self.y0 + self.height
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseDurations {
    pub idle: usize,
    pub approach: usize,
    pub grab: usize,
    pub hold: usize,
    pub release: usize,
    pub retreat: usize,
}

impl PhaseDurations {
    pub fn total(&self) -> usize {
        self.idle + self.approach + self.grab + self.hold + self.release + self.retreat
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Idle,
    Approach,
    Grab,
    Hold,
    Release,
    Retreat,
}

impl Phase {
    pub const ALL: [Phase; 6] = [
        Phase::Idle,
        Phase::Approach,
        Phase::Grab,
        Phase::Hold,
        Phase::Release,
        Phase::Retreat,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Phase::Idle => "idle",
            Phase::Approach => "approach",
            Phase::Grab => "grab",
            Phase::Hold => "hold",
            Phase::Release => "release",
            Phase::Retreat => "retreat",
        }
    }

    pub fn label(self) -> ClassLabel {
        match self {
            Phase::Idle | Phase::Retreat => ClassLabel::Unknown,
            Phase::Approach => ClassLabel::Approaching,
            Phase::Grab => ClassLabel::Grabbing,
            Phase::Hold => ClassLabel::Holding,
            Phase::Release => ClassLabel::Releasing,
        }
    }
}

/// Ordered `(phase, frames, label)` triples.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseScript(pub Vec<(Phase, usize, ClassLabel)>);

impl PhaseScript {
    pub fn from_durations(d: &PhaseDurations) -> Self {
        let counts = [d.idle, d.approach, d.grab, d.hold, d.release, d.retreat];
        Self(
            Phase::ALL
                .iter()
                .zip(counts)
                .map(|(p, n)| (*p, n, p.label()))
                .collect(),
        )
    }

    /// Per-frame phase sequence.
    pub fn frames(&self) -> Vec<Phase> {
        self.0
            .iter()
            .flat_map(|(p, n, _)| std::iter::repeat_n(*p, *n))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub width: usize,
    pub height: usize,
    pub object_rect: Rect,
    pub hand_radius: f64,
    pub phases: PhaseDurations,
    /// Pixels per frame during approach.
    pub approach_speed: f64,
    /// Contact distance; the grab band starts just outside `2 * epsilon`.
    pub contact_epsilon: f64,
    /// Std-dev of per-frame hand-centre jitter, pixels.
    pub jitter_sigma: f64,
    /// Flip probability for mask pixels on the shape boundary.
    pub noise_flip_prob: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            width: 128,
            height: 96,
            object_rect: Rect {
                x0: 100,
                y0: 36,
                width: 20,
                height: 24,
            },
            hand_radius: 6.0,
            phases: PhaseDurations {
                idle: 12,
                approach: 6,
                grab: 4,
                hold: 50,
                release: 8,
                retreat: 12,
            },
            approach_speed: 8.0,
            contact_epsilon: 10.0,
            jitter_sigma: 1.0,
            noise_flip_prob: 0.05,
            seed: 7,
        }
    }
}

/// Hand-centre x trajectory plus the grab step profile, precomputed from the
/// config and checked for feasibility.
struct Trajectory {
    gaps: Vec<f64>,
    phases: Vec<Phase>,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width < 3 || self.height < 3 {
            return Err(Error::InvalidArgument("canvas must be at least 3x3".into()));
        }
        let r = self.object_rect;
        if r.width == 0
            || r.height == 0
            || r.x0 + r.width > self.width
            || r.y0 + r.height > self.height
        {
            return Err(Error::InvalidArgument(
                "object rectangle outside canvas".into(),
            ));
        }
        if !(self.hand_radius > 0.0) {
            return Err(Error::InvalidArgument("hand radius must be > 0".into()));
        }
        if !(self.approach_speed > 0.0) {
            return Err(Error::InvalidArgument("approach speed must be > 0".into()));
        }
        if !(self.contact_epsilon > 0.0) {
            return Err(Error::InvalidArgument("contact epsilon must be > 0".into()));
        }
        if !(self.jitter_sigma >= 0.0) {
            return Err(Error::InvalidArgument("jitter sigma must be >= 0".into()));
        }
        if !(0.0..0.5).contains(&self.noise_flip_prob) {
            return Err(Error::InvalidArgument(
                "noise flip probability must lie in [0, 0.5)".into(),
            ));
        }
        if self.phases.total() == 0 {
            return Err(Error::InvalidArgument("scenario has no frames".into()));
        }
        Ok(())
    }

    fn contact_depth(&self) -> f64 {
        self.hand_radius / 2.0
    }

    /// Gap at which the grab band starts.
    fn grab_start_gap(&self) -> f64 {
        2.0 * self.contact_epsilon + 1.0
    }

    /// Per-step displacements during grab: linearly decelerating from the
    /// approach speed so that the last step lands at overlap depth.
    fn grab_steps(&self) -> Result<Vec<f64>> {
        let n = self.phases.grab;
        let distance = self.grab_start_gap() + self.contact_depth();
        let v = self.approach_speed;
        if n == 0 || (n as f64) * v < distance {
            return Err(Error::InfeasibleScenario(format!(
                "grab of {n} frames at {v} px/frame cannot close {distance} px to contact"
            )));
        }
        let nf = n as f64;
        let v_end = v - 2.0 * (nf * v - distance) / (nf + 1.0);
        if !(v_end > 0.0) {
            return Err(Error::InfeasibleScenario(format!(
                "grab of {n} frames would have to stop before contact (end speed {v_end:.3})"
            )));
        }
        Ok((1..=n).map(|j| v + (v_end - v) * j as f64 / nf).collect())
    }

    /// Smallest and largest grab durations that reach contact.
    pub fn feasible_grab_range(&self) -> Option<(usize, usize)> {
        let ok: Vec<usize> = (1..=256)
            .filter(|&n| {
                let probe = ScenarioConfig {
                    phases: PhaseDurations {
                        grab: n,
                        ..self.phases
                    },
                    ..self.clone()
                };
                probe.grab_steps().is_ok()
            })
            .collect();
        Some((*ok.first()?, *ok.last()?))
    }

    fn trajectory(&self) -> Result<Trajectory> {
        let phases = PhaseScript::from_durations(&self.phases).frames();
        let d = &self.phases;
        let steps = if d.grab > 0 || d.hold > 0 || d.release > 0 {
            self.grab_steps()?
        } else {
            Vec::new()
        };
        let eps2 = 2.0 * self.contact_epsilon;
        let approach_end = self.grab_start_gap();
        let far = approach_end + self.approach_speed * d.approach as f64;
        let depth = self.contact_depth();

        let mut gaps = Vec::with_capacity(phases.len());
        let mut counter = [0usize; 6];
        let mut grab_acc = 0.0;
        for &p in &phases {
            let slot = Phase::ALL.iter().position(|q| *q == p).unwrap();
            counter[slot] += 1;
            let k = counter[slot] as f64;
            let g = match p {
                Phase::Idle => far,
                Phase::Approach => far - self.approach_speed * k,
                Phase::Grab => {
                    grab_acc += steps[counter[slot] - 1];
                    approach_end - grab_acc
                }
                Phase::Hold => -depth,
                Phase::Release => -depth + (eps2 + depth) * k / d.release as f64,
                Phase::Retreat => {
                    let start = if d.release > 0 || d.hold > 0 || d.grab > 0 {
                        eps2
                    } else {
                        far
                    };
                    start + self.approach_speed / 2.0 * k
                }
            };
            gaps.push(g);
        }
        Ok(Trajectory { gaps, phases })
    }
}

fn texture(x: usize, y: usize) -> f64 {
    // integer hash, deterministic and seed-free
    let mut h = (x as u32).wrapping_mul(0x9E37_79B1) ^ (y as u32).wrapping_mul(0x85EB_CA77);
    h ^= h >> 15;
    h = h.wrapping_mul(0x2C1B_3C6D);
    h ^= h >> 12;
    ((h % 17) as f64) - 8.0
}

fn flip_boundary(mask: &mut BinaryMask, p: f64, rng: &mut ChaCha8Rng) {
    if p <= 0.0 {
        return;
    }
    let (w, h) = (mask.width(), mask.height());
    let src = mask.clone();
    for y in 0..h {
        for x in 0..w {
            let v = src.get(x, y);
            let mut boundary = false;
            if x > 0 && src.get(x - 1, y) != v {
                boundary = true;
            }
            if x + 1 < w && src.get(x + 1, y) != v {
                boundary = true;
            }
            if y > 0 && src.get(x, y - 1) != v {
                boundary = true;
            }
            if y + 1 < h && src.get(x, y + 1) != v {
                boundary = true;
            }
            // one draw per pixel keeps the stream position independent of shape
            let draw: f64 = rng.random();
            if boundary && draw < p {
                mask.set(x, y, !v);
            }
        }
    }
}

/// Renders one scripted episode. Fully determined by `cfg` (including
/// `cfg.seed`).
pub fn generate_episode(cfg: &ScenarioConfig) -> Result<Episode> {
    cfg.validate()?;
    let traj = cfg.trajectory()?;
    let (w, h) = (cfg.width, cfg.height);
    let rect = cfg.object_rect;
    let r = cfg.hand_radius;
    let cy0 = rect.y0 as f64 + (rect.height as f64 - 1.0) / 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let jitter = Normal::new(0.0, cfg.jitter_sigma.max(0.0))
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;

    let mut object_mask = BinaryMask::empty(w, h)?;
    for y in 0..h {
        for x in 0..w {
            if rect.contains(x, y) {
                object_mask.set(x, y, true);
            }
        }
    }

    let n = traj.gaps.len();
    let mut frames = Vec::with_capacity(n);
    let mut hands = Vec::with_capacity(n);
    let mut objects = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for (t, (&gap, &phase)) in traj.gaps.iter().zip(&traj.phases).enumerate() {
        let (jx, jy) = if cfg.jitter_sigma > 0.0 {
            (jitter.sample(&mut rng), jitter.sample(&mut rng))
        } else {
            (0.0, 0.0)
        };
        let cx = rect.x0 as f64 - r - gap + jx;
        let cy = cy0 + jy;

        let mut frame = Raster::filled(w, h, 0.0)?;
        let mut hand = BinaryMask::empty(w, h)?;
        for y in 0..h {
            for x in 0..w {
                let dx = x as f64 - cx;
                let dy = y as f64 - cy;
                let in_hand = dx * dx + dy * dy <= r * r;
                let base = if in_hand {
                    HAND_LEVEL
                } else if rect.contains(x, y) {
                    OBJECT_LEVEL
                } else {
                    BACKGROUND_LEVEL
                };
                frame.set(x, y, base + texture(x, y));
                if in_hand {
                    hand.set(x, y, true);
                }
            }
        }
        let mut obj = object_mask.clone();
        flip_boundary(&mut hand, cfg.noise_flip_prob, &mut rng);
        flip_boundary(&mut obj, cfg.noise_flip_prob, &mut rng);
        frames.push(frame);
        hands.push(hand);
        objects.push(obj);
        labels.push(phase.label());
        log::trace!("frame {t}: {} gap {gap:.2}", phase.name());
    }
    Episode::new(
        format!("synth_{}", cfg.seed),
        frames,
        hands,
        objects,
        labels,
    )
}

/// The per-episode scenario used by [`generate_corpus`]: seed `seed + index`
/// and every phase duration scaled by a factor drawn from `[0.7, 1.3]`. The
/// grab duration is clamped into its feasible range.
pub fn corpus_episode_config(cfg: &ScenarioConfig, seed: u64, index: usize) -> ScenarioConfig {
    let derived = seed.wrapping_add(index as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(derived ^ 0x5EED_C0DE_u64);
    let mut scale = |d: usize| -> usize {
        let f: f64 = rng.random_range(0.7..=1.3);
        (d as f64 * f).round() as usize
    };
    let p = cfg.phases;
    let mut phases = PhaseDurations {
        idle: scale(p.idle),
        approach: scale(p.approach),
        grab: scale(p.grab),
        hold: scale(p.hold),
        release: scale(p.release),
        retreat: scale(p.retreat),
    };
    let mut out = ScenarioConfig {
        phases,
        seed: derived,
        ..cfg.clone()
    };
    if let Some((lo, hi)) = out.feasible_grab_range() {
        phases.grab = phases.grab.clamp(lo, hi);
        out.phases = phases;
    }
    out
}

pub fn corpus_episode_id(index: usize) -> String {
    format!("ep_{index:04}")
}

/// `n_episodes` episodes with derived seeds and jittered phase durations.
pub fn generate_corpus(cfg: &ScenarioConfig, n_episodes: usize, seed: u64) -> Result<Vec<Episode>> {
    if n_episodes == 0 {
        return Err(Error::InvalidArgument("n_episodes must be >= 1".into()));
    }
    (0..n_episodes)
        .map(|i| {
            let mut ep = generate_episode(&corpus_episode_config(cfg, seed, i))?;
            ep.episode_id = corpus_episode_id(i);
            Ok(ep)
        })
        .collect()
}

/// Histogram of window target labels over a corpus.
pub fn window_label_histogram(
    episodes: &[Episode],
    cfg: &PipelineConfig,
) -> Result<[usize; NUM_CLASSES]> {
    let mut counts = [0; NUM_CLASSES];
    for ep in episodes {
        let series = select_keyframes(ep, cfg)?;
        for w in slide_windows(&series, cfg, ep) {
            counts[w.target_label.index()] += 1;
        }
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{euclidean_distance_transform, mask_centroid, min_distance_in_mask};

    fn clean() -> ScenarioConfig {
        ScenarioConfig {
            jitter_sigma: 0.0,
            noise_flip_prob: 0.0,
            ..Default::default()
        }
    }

    fn distances(ep: &Episode) -> Vec<f64> {
        (0..ep.len())
            .map(|i| {
                let f = euclidean_distance_transform(&ep.object_masks[i]);
                min_distance_in_mask(&f, &ep.hand_masks[i]).unwrap()
            })
            .collect()
    }

    #[test]
    fn hold_frames_overlap() {
        let ep = generate_episode(&clean()).unwrap();
        let d = distances(&ep);
        for (i, l) in ep.labels.iter().enumerate() {
            if *l == ClassLabel::Holding {
                assert_eq!(d[i], 0.0, "frame {i}");
            }
        }
    }

    #[test]
    fn idle_frames_are_static_and_far() {
        let cfg = clean();
        let ep = generate_episode(&cfg).unwrap();
        let d = distances(&ep);
        let c0 = mask_centroid(&ep.hand_masks[0]).unwrap();
        for i in 0..cfg.phases.idle {
            assert_eq!(mask_centroid(&ep.hand_masks[i]).unwrap(), c0);
            assert!(d[i] > cfg.contact_epsilon);
        }
    }

    #[test]
    fn approach_strictly_closes_and_grab_reaches_contact() {
        let cfg = clean();
        let ep = generate_episode(&cfg).unwrap();
        let d = distances(&ep);
        let mut prev = f64::INFINITY;
        for (i, l) in ep.labels.iter().enumerate() {
            if *l == ClassLabel::Approaching {
                assert!(d[i] < prev, "frame {i}: {} !< {prev}", d[i]);
                prev = d[i];
            }
        }
        let last_grab = ep
            .labels
            .iter()
            .rposition(|l| *l == ClassLabel::Grabbing)
            .unwrap();
        assert!(d[last_grab] <= cfg.contact_epsilon);
        for (i, l) in ep.labels.iter().enumerate() {
            if *l == ClassLabel::Grabbing {
                assert!(d[i] <= 2.0 * cfg.contact_epsilon);
            }
        }
    }

    #[test]
    fn deterministic() {
        let cfg = ScenarioConfig::default();
        assert_eq!(
            generate_episode(&cfg).unwrap(),
            generate_episode(&cfg).unwrap()
        );
        let other = ScenarioConfig {
            seed: 8,
            ..cfg.clone()
        };
        assert_ne!(
            generate_episode(&cfg).unwrap(),
            generate_episode(&other).unwrap()
        );
    }

    #[test]
    fn infeasible_grab() {
        let mut cfg = clean();
        cfg.phases.grab = 2;
        assert!(matches!(
            generate_episode(&cfg),
            Err(Error::InfeasibleScenario(_))
        ));
        cfg.phases.grab = 4;
        cfg.approach_speed = 2.0;
        assert!(matches!(
            generate_episode(&cfg),
            Err(Error::InfeasibleScenario(_))
        ));
    }

    #[test]
    fn labels_follow_script() {
        let cfg = clean();
        let ep = generate_episode(&cfg).unwrap();
        let p = cfg.phases;
        assert_eq!(ep.len(), p.total());
        assert_eq!(ep.labels[0], ClassLabel::Unknown);
        assert_eq!(ep.labels[p.idle], ClassLabel::Approaching);
        assert_eq!(ep.labels[p.idle + p.approach], ClassLabel::Grabbing);
        assert_eq!(ep.labels[p.idle + p.approach + p.grab], ClassLabel::Holding);
        assert_eq!(ep.labels[ep.len() - 1], ClassLabel::Unknown);
    }

    #[test]
    fn corpus_single_matches_episode() {
        let cfg = ScenarioConfig::default();
        let corpus = generate_corpus(&cfg, 1, 3).unwrap();
        let mut ep = generate_episode(&corpus_episode_config(&cfg, 3, 0)).unwrap();
        ep.episode_id = corpus_episode_id(0);
        assert_eq!(corpus, vec![ep]);
        assert!(generate_corpus(&cfg, 0, 3).is_err());
    }

    #[test]
    fn corpus_durations_within_thirty_percent() {
        let cfg = ScenarioConfig::default();
        for i in 0..30 {
            let c = corpus_episode_config(&cfg, 11, i);
            let pairs = [
                (c.phases.idle, cfg.phases.idle),
                (c.phases.hold, cfg.phases.hold),
                (c.phases.grab, cfg.phases.grab),
                (c.phases.retreat, cfg.phases.retreat),
            ];
            for (got, base) in pairs {
                let lo = (base as f64 * 0.7).round() as usize;
                let hi = (base as f64 * 1.3).round() as usize;
                assert!((lo..=hi).contains(&got), "{got} outside [{lo},{hi}]");
            }
            assert!(generate_episode(&c).is_ok());
        }
    }
}
