//! Monte-Carlo channel sampling and empirical throughput estimation.
//!
//! Randomness comes from ChaCha8 keyed by one run seed. Independent parts of
//! a run draw from separate ChaCha streams of that key (see [`stream_rng`]), so
//! results do not depend on thread count or scheduling order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::engine::{run_frame, ChannelMatrix};
use crate::error::{Error, Result};
use crate::model::{ensure_valid, ChannelParams, FrameConfig, RateVector, Schedule};

/// Stream carrying the per-frame channel realizations of a policy run.
pub const STREAM_CHANNEL: u64 = 1;
/// Stream used to place users in a cellular drop.
pub const STREAM_DROP: u64 = 2;
/// First stream of the fixed-size frame chunks used by [`simulate_schedule`];
/// chunk `k` uses stream `STREAM_CHUNK_BASE + k`.
pub const STREAM_CHUNK_BASE: u64 = 1 << 32;
/// Frames per independently seeded chunk in [`simulate_schedule`].
pub const CHUNK_FRAMES: u64 = 8192;

/// Normal quantile for the two-sided 95% intervals.
const Z95: f64 = 1.959_963_984_540_054;

/// Generator for sub-stream `stream` of the run keyed by `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Each entry is ON independently with its user's probability.
pub fn sample_channel_matrix<R: Rng + ?Sized>(
    channel: &ChannelParams,
    frame: FrameConfig,
    rng: &mut R,
) -> ChannelMatrix {
    let slots = frame.slots();
    ChannelMatrix::from_fn(channel.n_users(), slots, |i, _| rng.gen::<f64>() < channel.p(i))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub frame: u64,
    /// Running per-user throughput, packets per frame.
    pub throughput: Vec<f64>,
    /// Virtual-queue backlogs at this frame, when the policy keeps them.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backlog: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationResult {
    pub per_user_throughput: RateVector,
    pub frames: u64,
    /// 95% Agresti-Coull half-widths of the per-frame delivery probability;
    /// unlike the plain normal interval they stay positive when a user
    /// succeeded in every frame or in none.
    pub ci_halfwidth: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<Vec<TrajectoryPoint>>,
}

impl SimulationResult {
    pub(crate) fn from_counts(delivered: &[u64], frames: u64, trajectory: Option<Vec<TrajectoryPoint>>) -> Self {
        let n = frames as f64;
        let mean: Vec<f64> = delivered.iter().map(|&c| c as f64 / n).collect();
        let z2 = Z95 * Z95;
        let ci_halfwidth = delivered
            .iter()
            .map(|&c| {
                let centre = (c as f64 + z2 / 2.0) / (n + z2);
                Z95 * (centre * (1.0 - centre) / (n + z2)).sqrt()
            })
            .collect();
        Self {
            per_user_throughput: RateVector::new(mean).expect("frequencies lie in [0, 1]"),
            frames,
            ci_halfwidth,
            trajectory,
        }
    }

    /// Trajectory as CSV: frame index, then one running-throughput column per user.
    pub fn trajectory_csv(&self) -> String {
        let n = self.per_user_throughput.len();
        let mut out = String::from("frame_index");
        for i in 1..=n {
            out.push_str(&format!(",throughput_{i}"));
        }
        out.push('\n');
        for p in self.trajectory.iter().flatten() {
            out.push_str(&crate::report::csv_row(&p.frame.to_string(), &p.throughput));
        }
        out
    }
}

/// Runs `schedule` over `n_frames` independent frames and reports the empirical
/// delivery rate of every user.
pub fn simulate_schedule(
    schedule: &Schedule,
    channel: &ChannelParams,
    frame: FrameConfig,
    n_frames: u64,
    seed: u64,
) -> Result<SimulationResult> {
    ensure_valid(schedule, channel)?;
    if n_frames == 0 {
        return Err(Error::InvalidInput("at least one frame is required".into()));
    }
    let n = channel.n_users();
    let chunks = n_frames.div_ceil(CHUNK_FRAMES);
    let delivered = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(seed, STREAM_CHUNK_BASE + k);
            let frames = CHUNK_FRAMES.min(n_frames - k * CHUNK_FRAMES);
            let mut counts = vec![0u64; n];
            for _ in 0..frames {
                let m = sample_channel_matrix(channel, frame, &mut rng);
                let trace = run_frame(schedule, &m);
                for (c, &s) in counts.iter_mut().zip(&trace.success) {
                    *c += u64::from(s);
                }
            }
            counts
        })
        .reduce(
            || vec![0u64; n],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                a
            },
        );
    Ok(SimulationResult::from_counts(&delivered, n_frames, None))
}

/// Empirical CDF as `(value, fraction of samples <= value)`, one step per
/// distinct value.
pub fn empirical_cdf(values: &[f64]) -> Result<Vec<(f64, f64)>> {
    if values.is_empty() {
        return Err(Error::InvalidInput("empirical CDF of an empty sample".into()));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidInput("NaN in CDF sample".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut steps: Vec<(f64, f64)> = Vec::new();
    for (k, v) in sorted.iter().enumerate() {
        let frac = (k + 1) as f64 / n;
        match steps.last_mut() {
            Some(last) if last.0 == *v => last.1 = frac,
            _ => steps.push((*v, frac)),
        }
    }
    Ok(steps)
}

/// Two-column CSV of an empirical CDF.
pub fn cdf_csv(cdf: &[(f64, f64)]) -> String {
    let mut out = String::from("value,cumulative_fraction\n");
    for &(v, f) in cdf {
        out.push_str(&crate::report::format_sig12(v));
        out.push(',');
        out.push_str(&crate::report::format_sig12(f));
        out.push('\n');
    }
    out
}

/// Smallest sample value whose CDF reaches `q` (lower quantile).
pub fn cdf_quantile(cdf: &[(f64, f64)], q: f64) -> f64 {
    cdf.iter()
        .find(|&&(_, f)| f >= q - 1e-12)
        .or(cdf.last())
        .map_or(f64::NAN, |&(v, _)| v)
}
