//! Per-frame schedule selection: max-weight over virtual queues for
//! throughput targets, and the gradient rule for proportional fairness.
//!
//! Both policies pick, at the start of every frame, the candidate schedule
//! maximizing `sum_i weight_i * rate_i` where `rate` is the schedule's
//! expected rate vector. Max-weight uses the virtual-queue backlogs as
//! weights, proportional fairness uses `1 / average throughput`. Ties go to
//! the lexicographically first canonical schedule text.

use std::cmp::Ordering;

use serde::Serialize;

use crate::engine::run_frame;
use crate::error::{Error, Result};
use crate::model::{ChannelParams, ContentionGroup, FrameConfig, RateVector, Schedule};
use crate::rates::success_probabilities;
use crate::region::{hull_feasible, CornerPoint, HullDecision, RateRegion};
use crate::sim::{sample_channel_matrix, stream_rng, SimulationResult, TrajectoryPoint, STREAM_CHANNEL};

pub const DEFAULT_EWMA_WEIGHT: f64 = 0.01;
/// Lower bound on a running average, so gradient weights stay finite.
pub const AVERAGE_FLOOR: f64 = 1e-6;
/// Trajectory sampling period, in frames.
pub const TRAJECTORY_PERIOD: u64 = 100;

// relative band inside which weighted sums count as tied
const TIE_BAND: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VirtualQueueState {
    pub backlog: Vec<f64>,
    pub target: RateVector,
}

impl VirtualQueueState {
    pub fn new(target: RateVector) -> Self {
        Self {
            backlog: vec![0.0; target.len()],
            target,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FairnessState {
    pub avg_throughput: Vec<f64>,
    pub ewma_weight: f64,
}

impl FairnessState {
    pub fn new(n_users: usize, ewma_weight: f64) -> Result<Self> {
        if !(ewma_weight > 0.0 && ewma_weight <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "EWMA weight must lie in (0, 1], got {ewma_weight}"
            )));
        }
        Ok(Self {
            avg_throughput: vec![1.0 / n_users as f64; n_users],
            ewma_weight,
        })
    }

    pub fn gradient(&self) -> Vec<f64> {
        self.avg_throughput.iter().map(|a| 1.0 / a).collect()
    }
}

/// Index of the candidate maximizing `weights . rates`.
fn argmax<'a>(weights: &[f64], candidates: impl Iterator<Item = (&'a Schedule, &'a [f64])>) -> Option<usize> {
    let mut best: Option<(usize, f64, String)> = None;
    let scale = weights.iter().map(|w| w.abs()).fold(0.0, f64::max);
    for (k, (schedule, rates)) in candidates.enumerate() {
        let value: f64 = weights.iter().zip(rates).map(|(w, r)| w * r).sum();
        let better = match &best {
            None => true,
            Some((_, bv, bname)) => {
                let band = TIE_BAND * scale.max(f64::MIN_POSITIVE);
                if value > bv + band {
                    true
                } else if value >= bv - band {
                    schedule.to_string().cmp(bname) == Ordering::Less
                } else {
                    false
                }
            }
        };
        if better {
            best = Some((k, value, schedule.to_string()));
        }
    }
    best.map(|(k, _, _)| k)
}

fn select<'a>(weights: &[f64], candidates: &'a [CornerPoint]) -> Result<&'a Schedule> {
    let k = argmax(weights, candidates.iter().map(|c| (&c.schedule, c.rates.as_slice())))
        .ok_or_else(|| Error::InvalidInput("no candidate schedules".into()))?;
    Ok(&candidates[k].schedule)
}

pub fn maxweight_select<'a>(q: &VirtualQueueState, candidates: &'a [CornerPoint]) -> Result<&'a Schedule> {
    select(&q.backlog, candidates)
}

pub fn pf_select<'a>(f: &FairnessState, candidates: &'a [CornerPoint]) -> Result<&'a Schedule> {
    select(&f.gradient(), candidates)
}

/// `backlog_i <- max(backlog_i + target_i - delivered_i, 0)`.
pub fn update_virtual_queues(q: &VirtualQueueState, delivered: &[bool]) -> VirtualQueueState {
    let backlog = q
        .backlog
        .iter()
        .zip(q.target.as_slice())
        .zip(delivered)
        .map(|((b, a), &d)| (b + a - f64::from(u8::from(d))).max(0.0))
        .collect();
    VirtualQueueState {
        backlog,
        target: q.target.clone(),
    }
}

/// `avg_i <- max((1 - w) avg_i + w delivered_i, floor)`.
pub fn update_fairness(f: &FairnessState, delivered: &[bool]) -> FairnessState {
    let w = f.ewma_weight;
    let avg_throughput = f
        .avg_throughput
        .iter()
        .zip(delivered)
        .map(|(a, &d)| ((1.0 - w) * a + w * f64::from(u8::from(d))).max(AVERAGE_FLOOR))
        .collect();
    FairnessState {
        avg_throughput,
        ewma_weight: w,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum Policy {
    MaxWeight { target: RateVector },
    ProportionalFair { ewma_weight: f64 },
}

/// Where the per-frame candidates come from.
#[derive(Debug, Clone, PartialEq)]
pub enum Candidates {
    /// A fixed list, typically the corner points of an enumerated region.
    Fixed(RateRegion),
    /// Built every frame from the current weights, for user counts where
    /// enumeration is out of reach: the polling schedule serving users in
    /// decreasing `weight * p` order (the best polling schedule for those
    /// weights), and with `pairing` also every variant that merges two users
    /// adjacent in that order into one contention group.
    WeightOrdered { pairing: bool },
}

/// Candidate schedules for `weights` under [`Candidates::WeightOrdered`].
pub fn weight_ordered_candidates(weights: &[f64], channel: &ChannelParams, pairing: bool) -> Vec<Schedule> {
    let score: Vec<f64> = (0..channel.n_users()).map(|i| weights[i] * channel.p(i)).collect();
    let mut order: Vec<usize> = (0..channel.n_users()).filter(|&i| score[i] > 0.0).collect();
    order.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then(a.cmp(&b)));
    let mut out = vec![Schedule::polling(&order)];
    if pairing {
        for k in 0..order.len().saturating_sub(1) {
            let mut groups: Vec<ContentionGroup> = Vec::with_capacity(order.len() - 1);
            groups.extend(order[..k].iter().map(|&u| ContentionGroup::single(u)));
            groups.push(ContentionGroup::new(vec![order[k], order[k + 1]]).expect("distinct users"));
            groups.extend(order[k + 2..].iter().map(|&u| ContentionGroup::single(u)));
            out.push(Schedule::new(groups));
        }
    }
    out
}

fn choose_dynamic(weights: &[f64], channel: &ChannelParams, frame: FrameConfig, pairing: bool) -> Schedule {
    let schedules = weight_ordered_candidates(weights, channel, pairing);
    let rates: Vec<Vec<f64>> = schedules
        .iter()
        .map(|s| success_probabilities(s, channel, frame.slots()))
        .collect();
    let k = argmax(weights, schedules.iter().zip(rates.iter().map(Vec::as_slice))).expect("at least one candidate");
    schedules[k].clone()
}

enum PolicyState {
    Queues(VirtualQueueState),
    Fairness(FairnessState),
}

impl PolicyState {
    fn weights(&self) -> Vec<f64> {
        match self {
            Self::Queues(q) => q.backlog.clone(),
            Self::Fairness(f) => f.gradient(),
        }
    }

    fn update(&mut self, delivered: &[bool]) {
        match self {
            Self::Queues(q) => *q = update_virtual_queues(q, delivered),
            Self::Fairness(f) => *f = update_fairness(f, delivered),
        }
    }

    fn backlog(&self) -> Option<Vec<f64>> {
        match self {
            Self::Queues(q) => Some(q.backlog.clone()),
            Self::Fairness(_) => None,
        }
    }
}

/// Runs a policy frame by frame: select a schedule, draw the frame's channel,
/// execute, update the policy state.
///
/// Channel realizations come from stream [`STREAM_CHANNEL`] of `seed` and do
/// not depend on the policy, so two policies run with the same seed see the
/// same channel.
pub fn run_policy(
    policy: &Policy,
    channel: &ChannelParams,
    frame: FrameConfig,
    candidates: &Candidates,
    n_frames: u64,
    seed: u64,
) -> Result<SimulationResult> {
    if n_frames == 0 {
        return Err(Error::InvalidInput("at least one frame is required".into()));
    }
    if let Candidates::Fixed(region) = candidates {
        if region.channel() != channel || region.frame() != frame {
            return Err(Error::InvalidInput(
                "candidate region was built for another channel or frame".into(),
            ));
        }
    }
    let n = channel.n_users();
    let mut state = match policy {
        Policy::MaxWeight { target } => {
            if target.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: target.len(),
                });
            }
            let Candidates::Fixed(region) = candidates else {
                return Err(Error::InvalidInput(
                    "max-weight needs a fixed candidate region for admission control".into(),
                ));
            };
            if let HullDecision::Infeasible { margin, .. } = hull_feasible(target, region)? {
                return Err(Error::InfeasibleTarget { margin });
            }
            PolicyState::Queues(VirtualQueueState::new(target.clone()))
        }
        Policy::ProportionalFair { ewma_weight } => PolicyState::Fairness(FairnessState::new(n, *ewma_weight)?),
    };

    let mut rng = stream_rng(seed, STREAM_CHANNEL);
    let mut delivered = vec![0u64; n];
    let mut trajectory = Vec::new();
    for t in 1..=n_frames {
        let weights = state.weights();
        let schedule = match candidates {
            Candidates::Fixed(region) => select(&weights, region.corner_points())?.clone(),
            Candidates::WeightOrdered { pairing } => choose_dynamic(&weights, channel, frame, *pairing),
        };
        let matrix = sample_channel_matrix(channel, frame, &mut rng);
        let trace = run_frame(&schedule, &matrix);
        for (c, &s) in delivered.iter_mut().zip(&trace.success) {
            *c += u64::from(s);
        }
        state.update(&trace.success);
        if t % TRAJECTORY_PERIOD == 0 || t == n_frames {
            trajectory.push(TrajectoryPoint {
                frame: t,
                throughput: delivered.iter().map(|&c| c as f64 / t as f64).collect(),
                backlog: state.backlog(),
            });
        }
    }
    Ok(SimulationResult::from_counts(&delivered, n_frames, Some(trajectory)))
}
