//! Exact per-schedule throughput, the idle-slot expectation behind the
//! workload conditions, polling admission control, and the single-slot
//! multicast gain checks.

use serde::Serialize;

use crate::engine::{run_frame, ChannelMatrix};
use crate::error::{Error, Result};
use crate::model::{ensure_valid, outcome_law, ChannelParams, FrameConfig, RateVector, Schedule};

/// Band within which a workload condition or hull face counts as satisfied.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-9;

/// Largest `N * slots` accepted by [`brute_force_rate`].
pub const BRUTE_FORCE_MAX_BITS: usize = 20;

const MAX_GROUP_FOR_DP: usize = 20;

/// Probability that each user succeeds within the frame under `schedule`.
///
/// Dynamic program over (slot, active group, members of the active group that
/// have already succeeded). Finished groups never contend again, so the state
/// for a group is just a bitmask over its own members.
pub fn expected_rate(schedule: &Schedule, channel: &ChannelParams, frame: FrameConfig) -> Result<RateVector> {
    ensure_valid(schedule, channel)?;
    if schedule.max_group_size() > MAX_GROUP_FOR_DP {
        return Err(Error::TooLarge(format!(
            "group of {} users in the rate recursion",
            schedule.max_group_size()
        )));
    }
    Ok(RateVector::new(success_probabilities(schedule, channel, frame.slots())).expect("probabilities lie in [0, 1]"))
}

struct GroupLaw {
    members: Vec<usize>,
    // per succeeded-mask: (local index, success probability), and total success
    success: Vec<Vec<(usize, f64)>>,
}

impl GroupLaw {
    fn new(members: &[usize], channel: &ChannelParams) -> Self {
        let k = members.len();
        let full = (1usize << k) - 1;
        let success = (0..=full)
            .map(|mask| {
                let locals: Vec<usize> = (0..k).filter(|&j| mask & (1 << j) == 0).collect();
                let probs: Vec<f64> = locals.iter().map(|&j| channel.p(members[j])).collect();
                let law = outcome_law(&locals, &probs);
                law.success
            })
            .collect();
        Self {
            members: members.to_vec(),
            success,
        }
    }

    fn full(&self) -> usize {
        (1 << self.members.len()) - 1
    }
}

pub(crate) fn success_probabilities(schedule: &Schedule, channel: &ChannelParams, slots: usize) -> Vec<f64> {
    let mut rates = vec![0.0; channel.n_users()];
    let laws: Vec<GroupLaw> = schedule
        .groups()
        .iter()
        .map(|g| GroupLaw::new(g.members(), channel))
        .collect();
    if laws.is_empty() {
        return rates;
    }
    // mass[g][mask]; a group index equal to laws.len() means the schedule is done
    let mut mass: Vec<Vec<f64>> = laws.iter().map(|l| vec![0.0; l.full() + 1]).collect();
    let mut next = mass.clone();
    mass[0][0] = 1.0;
    let mut frontier = 0; // highest group index that may carry mass
    for _ in 0..slots {
        for row in next.iter_mut().take(frontier + 2) {
            row.iter_mut().for_each(|m| *m = 0.0);
        }
        let mut new_frontier = frontier;
        for g in 0..=frontier.min(laws.len() - 1) {
            let law = &laws[g];
            for mask in 0..law.full() {
                let m = mass[g][mask];
                if m == 0.0 {
                    continue;
                }
                let mut stay = 1.0;
                for &(j, ps) in &law.success[mask] {
                    if ps == 0.0 {
                        continue;
                    }
                    stay -= ps;
                    let flow = m * ps;
                    rates[law.members[j]] += flow;
                    let after = mask | (1 << j);
                    if after == law.full() {
                        if g + 1 < laws.len() {
                            next[g + 1][0] += flow;
                            new_frontier = new_frontier.max(g + 1);
                        }
                    } else {
                        next[g][after] += flow;
                    }
                }
                next[g][mask] += m * stay.max(0.0);
            }
        }
        frontier = new_frontier;
        std::mem::swap(&mut mass, &mut next);
    }
    rates
}

/// Exact expectation by enumerating all `2^(N * slots)` channel matrices.
/// Verification oracle for [`expected_rate`].
pub fn brute_force_rate(schedule: &Schedule, channel: &ChannelParams, frame: FrameConfig) -> Result<RateVector> {
    ensure_valid(schedule, channel)?;
    let n = channel.n_users();
    let slots = frame.slots();
    let bits = n * slots;
    if bits > BRUTE_FORCE_MAX_BITS {
        return Err(Error::TooLarge(format!(
            "{n} users x {slots} slots = {bits} channel bits (limit {BRUTE_FORCE_MAX_BITS})"
        )));
    }
    let mut rates = vec![0.0; n];
    for code in 0u64..(1u64 << bits) {
        // bit (i * slots + t) is user i in slot t
        let matrix = ChannelMatrix::from_fn(n, slots, |i, t| code & (1 << (i * slots + t)) != 0);
        let mut prob = 1.0;
        for i in 0..n {
            let p = channel.p(i);
            for t in 0..slots {
                prob *= if matrix.on(i, t) { p } else { 1.0 - p };
            }
        }
        if prob == 0.0 {
            continue;
        }
        let trace = run_frame(schedule, &matrix);
        for (r, &s) in rates.iter_mut().zip(&trace.success) {
            if s {
                *r += prob;
            }
        }
    }
    Ok(RateVector::new(rates).expect("probabilities lie in [0, 1]"))
}

/// Expected number of idle slots left in a frame once every user in `subset`
/// has been served until success: `E[(slots - sum G_i)^+]` with independent
/// geometric service times `G_i`.
///
/// The value does not depend on service order. A user with `p = 0` never
/// completes, so the frame has no idle slots.
pub fn expected_idle_slots(subset: &[usize], channel: &ChannelParams, frame: FrameConfig) -> Result<f64> {
    let slots = frame.slots();
    for &u in subset {
        if u >= channel.n_users() {
            return Err(Error::UserOutOfRange {
                index: u,
                n_users: channel.n_users(),
            });
        }
    }
    if subset.iter().any(|&u| channel.p(u) == 0.0) {
        return Ok(0.0);
    }
    // dist[k] = P(sum of service times so far == k) for k <= slots; mass
    // beyond the frame is dropped since it contributes no idle slots
    let mut dist = vec![0.0; slots + 1];
    dist[0] = 1.0;
    for &u in subset {
        let p = channel.p(u);
        let geo: Vec<f64> = (0..=slots)
            .map(|g| if g == 0 { 0.0 } else { p * (1.0 - p).powi(g as i32 - 1) })
            .collect();
        let mut conv = vec![0.0; slots + 1];
        for (k, &a) in dist.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for g in 1..=slots - k {
                conv[k + g] += a * geo[g];
            }
        }
        dist = conv;
    }
    Ok(dist.iter().enumerate().map(|(k, &pr)| (slots - k) as f64 * pr).sum())
}

/// One necessary condition `sum_{i in S} d_i / (p_i * slots) <= 1 - E[I_S] / slots`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorkloadCondition {
    pub subset: Vec<usize>,
    pub load: f64,
    pub slack_bound: f64,
}

impl WorkloadCondition {
    pub fn evaluate(subset: &[usize], d: &[f64], channel: &ChannelParams, frame: FrameConfig) -> Result<Self> {
        let slots = frame.slots() as f64;
        let load = subset
            .iter()
            .map(|&i| {
                let p = channel.p(i);
                match (d[i], p) {
                    (0.0, _) => 0.0,
                    (_, 0.0) => f64::INFINITY,
                    (di, p) => di / (p * slots),
                }
            })
            .sum();
        let slack_bound = 1.0 - expected_idle_slots(subset, channel, frame)? / slots;
        Ok(Self {
            subset: subset.to_vec(),
            load,
            slack_bound,
        })
    }

    /// `load - slack_bound`; positive means violated.
    pub fn excess(&self) -> f64 {
        self.load - self.slack_bound
    }

    pub fn holds(&self) -> bool {
        self.excess() <= FEASIBILITY_TOLERANCE
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BindingCondition {
    Negative { user: usize },
    Workload(WorkloadCondition),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissionDecision {
    pub accepted: bool,
    /// First violated condition when rejected.
    pub binding: Option<BindingCondition>,
    pub conditions_checked: usize,
}

fn check_dims(d: &RateVector, channel: &ChannelParams) -> Result<()> {
    if d.len() != channel.n_users() {
        return Err(Error::DimensionMismatch {
            expected: channel.n_users(),
            actual: d.len(),
        });
    }
    Ok(())
}

/// Admission test over the nested user sets given by sorting the demands.
///
/// Users are sorted by ascending demand (ties by index); the workload
/// conditions for the suffix sets of that order are checked from the full set
/// down to the single most demanding user, after the nonnegativity check.
/// That is `N + 1` checks in total.
pub fn polling_admission(d: &RateVector, channel: &ChannelParams, frame: FrameConfig) -> Result<AdmissionDecision> {
    check_dims(d, channel)?;
    let n = channel.n_users();
    let rates = d.as_slice();
    let mut checked = 1;
    if let Some(user) = (0..n).find(|&i| rates[i] < 0.0) {
        return Ok(AdmissionDecision {
            accepted: false,
            binding: Some(BindingCondition::Negative { user }),
            conditions_checked: checked,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| rates[a].total_cmp(&rates[b]).then(a.cmp(&b)));
    for start in 0..n {
        let mut subset = order[start..].to_vec();
        subset.sort_unstable();
        let cond = WorkloadCondition::evaluate(&subset, rates, channel, frame)?;
        checked += 1;
        if !cond.holds() {
            return Ok(AdmissionDecision {
                accepted: false,
                binding: Some(BindingCondition::Workload(cond)),
                conditions_checked: checked,
            });
        }
    }
    Ok(AdmissionDecision {
        accepted: true,
        binding: None,
        conditions_checked: checked,
    })
}

/// Checks all `2^N - 1` workload conditions and reports the most violated
/// one. Exact membership test for the polling region.
pub fn workload_admission(d: &RateVector, channel: &ChannelParams, frame: FrameConfig) -> Result<AdmissionDecision> {
    check_dims(d, channel)?;
    let n = channel.n_users();
    if n > 20 {
        return Err(Error::TooLarge(format!("{n} users for exhaustive subset checks")));
    }
    let rates = d.as_slice();
    if let Some(user) = (0..n).find(|&i| rates[i] < 0.0) {
        return Ok(AdmissionDecision {
            accepted: false,
            binding: Some(BindingCondition::Negative { user }),
            conditions_checked: 1,
        });
    }
    let mut worst: Option<WorkloadCondition> = None;
    for mask in 1u32..(1 << n) {
        let subset: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
        let cond = WorkloadCondition::evaluate(&subset, rates, channel, frame)?;
        if !cond.holds() && worst.as_ref().is_none_or(|w| cond.excess() > w.excess()) {
            worst = Some(cond);
        }
    }
    Ok(AdmissionDecision {
        accepted: worst.is_none(),
        binding: worst.map(BindingCondition::Workload),
        conditions_checked: 1 << n,
    })
}

/// Which exponent of the no-success probability multiplies the inner term of
/// the two-user closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairFormConvention {
    /// Inner term `q^l * p_other * (1 - p)^(k - l) * p`, summed over `l = 1..k-1`.
    AsPrinted,
    /// Inner term `q^(l-1) * p_other * (1 - p)^(k - l) * p`: the other user
    /// succeeds in slot `l` after `l - 1` wasted group slots.
    SlotConsistent,
}

/// Closed-form throughput of both users under the schedule `(1+2)`.
///
/// `q = (1 - p1)(1 - p2) + p1 p2` is the chance that a group slot yields no
/// success. Only [`PairFormConvention::SlotConsistent`] agrees with
/// [`brute_force_rate`]; the other reading is kept for comparison.
pub fn pair_group_closed_form(p1: f64, p2: f64, frame: FrameConfig, convention: PairFormConvention) -> (f64, f64) {
    let q = (1.0 - p1) * (1.0 - p2) + p1 * p2;
    let shift = match convention {
        PairFormConvention::AsPrinted => 0,
        PairFormConvention::SlotConsistent => 1,
    };
    let user = |p: f64, other: f64| -> f64 {
        (1..=frame.slots() as i32)
            .map(|k| {
                let first = q.powi(k - 1) * (1.0 - other) * p;
                let after_other: f64 = (1..k)
                    .map(|l| q.powi(l - shift) * other * (1.0 - p).powi(k - l) * p)
                    .sum();
                first + after_other
            })
            .sum()
    };
    (user(p1, p2), user(p2, p1))
}

/// Single-slot multicast point of a group and where it sits relative to the
/// polling plane `sum d_i / p_i <= 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MulticastGain {
    /// `p_i * prod_{j != i} (1 - p_j)` per member, in member order.
    pub point: Vec<f64>,
    /// `sum_i point_i / p_i = sum_i prod_{j != i} (1 - p_j)`.
    pub load: f64,
    /// `load - 1`; positive means the point lies beyond the polling region.
    pub margin: f64,
    /// Whether every member has `p_i <= 1/k`, the condition under which the
    /// margin is guaranteed nonnegative.
    pub premise: bool,
}

impl MulticastGain {
    pub fn enhances(&self) -> bool {
        self.margin > 0.0
    }
}

pub fn multicast_gain_holds(group: &crate::model::ContentionGroup, channel: &ChannelParams) -> Result<MulticastGain> {
    let k = group.len();
    if k < 2 {
        return Err(Error::InvalidInput(format!(
            "multicast gain needs at least two users, got {k}"
        )));
    }
    let law = crate::model::slot_outcome_distribution(group, channel)?;
    let point: Vec<f64> = law.success.iter().map(|&(_, p)| p).collect();
    let load: f64 = group
        .members()
        .iter()
        .map(|&i| {
            group
                .members()
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| 1.0 - channel.p(j))
                .product::<f64>()
        })
        .sum();
    let bound = 1.0 / k as f64;
    Ok(MulticastGain {
        point,
        load,
        margin: load - 1.0,
        premise: group.members().iter().all(|&i| channel.p(i) <= bound),
    })
}

/// Ratio of single-slot system throughput with all `n` users in one group to
/// polling one user, at a common ON probability `p`: `n (1 - p)^(n - 1)`.
pub fn factor_n_gain(n: usize, p: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    n as f64 * (1.0 - p).powi(n as i32 - 1)
}
