//! Domain types shared by every other module, and the single-slot contention law.
//!
//! Users are indexed from zero internally. The canonical text form of a
//! [`Schedule`] numbers users from one, matching how schedules are written by
//! hand: `"1/2"` polls user 1 until success and then user 2, `"(1+2)/3"`
//! addresses users 1 and 2 together until both have succeeded and then polls
//! user 3.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-user probability that the channel is ON in a slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ChannelParams {
    on_prob: Vec<f64>,
}

impl ChannelParams {
    pub fn new(on_prob: Vec<f64>) -> Result<Self> {
        if on_prob.is_empty() {
            return Err(Error::InvalidInput("at least one user is required".into()));
        }
        for (user, &value) in on_prob.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidProbability { user, value });
            }
        }
        Ok(Self { on_prob })
    }

    /// `n` users sharing the same ON probability.
    pub fn symmetric(n: usize, p: f64) -> Result<Self> {
        Self::new(vec![p; n])
    }

    pub fn n_users(&self) -> usize {
        self.on_prob.len()
    }

    pub fn on_prob(&self) -> &[f64] {
        &self.on_prob
    }

    pub fn p(&self, user: usize) -> f64 {
        self.on_prob[user]
    }
}

impl TryFrom<Vec<f64>> for ChannelParams {
    type Error = Error;

    fn try_from(value: Vec<f64>) -> Result<Self> {
        Self::new(value)
    }
}

impl From<ChannelParams> for Vec<f64> {
    fn from(value: ChannelParams) -> Self {
        value.on_prob
    }
}

/// Number of slots in a frame. Every user's packet arrives at the start of a
/// frame and expires at its end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct FrameConfig {
    slots_per_frame: usize,
}

impl FrameConfig {
    pub fn new(slots_per_frame: usize) -> Result<Self> {
        if slots_per_frame == 0 {
            return Err(Error::InvalidInput("a frame needs at least one slot".into()));
        }
        Ok(Self { slots_per_frame })
    }

    pub fn slots(&self) -> usize {
        self.slots_per_frame
    }
}

impl TryFrom<usize> for FrameConfig {
    type Error = Error;

    fn try_from(value: usize) -> Result<Self> {
        Self::new(value)
    }
}

impl From<FrameConfig> for usize {
    fn from(value: FrameConfig) -> Self {
        value.slots_per_frame
    }
}

/// A nonempty set of users addressed together by one multicast control
/// packet. A singleton group is plain polling.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ContentionGroup {
    // sorted ascending, no duplicates
    members: Vec<usize>,
}

impl ContentionGroup {
    pub fn new(mut members: Vec<usize>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidSchedule("contention group is empty".into()));
        }
        members.sort_unstable();
        if let Some(w) = members.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidSchedule(format!(
                "user {} appears twice in one group",
                w[0] + 1
            )));
        }
        Ok(Self { members })
    }

    pub fn single(user: usize) -> Self {
        Self { members: vec![user] }
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, user: usize) -> bool {
        self.members.binary_search(&user).is_ok()
    }

    fn check_indices(&self, n_users: usize) -> Result<()> {
        match self.members.iter().find(|&&m| m >= n_users) {
            Some(&index) => Err(Error::UserOutOfRange { index, n_users }),
            None => Ok(()),
        }
    }
}

impl fmt::Display for ContentionGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.members.len() == 1 {
            return write!(f, "{}", self.members[0] + 1);
        }
        f.write_str("(")?;
        for (i, m) in self.members.iter().enumerate() {
            if i > 0 {
                f.write_str("+")?;
            }
            write!(f, "{}", m + 1)?;
        }
        f.write_str(")")
    }
}

/// An ordered list of disjoint contention groups served one after another
/// within a frame.
///
/// The active group is addressed until every member has succeeded; after each
/// success the remaining members are addressed again as a smaller multicast
/// set. Once the last group finishes the rest of the frame is idle.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Schedule {
    groups: Vec<ContentionGroup>,
}

impl Schedule {
    pub fn new(groups: Vec<ContentionGroup>) -> Self {
        Self { groups }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// All-singleton schedule serving `order[0]` until success, then `order[1]`, ...
    pub fn polling(order: &[usize]) -> Self {
        Self::new(order.iter().map(|&u| ContentionGroup::single(u)).collect())
    }

    pub fn groups(&self) -> &[ContentionGroup] {
        &self.groups
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn is_polling(&self) -> bool {
        self.groups.iter().all(|g| g.len() == 1)
    }

    pub fn max_group_size(&self) -> usize {
        self.groups.iter().map(ContentionGroup::len).max().unwrap_or(0)
    }

    /// Users served by this schedule, in service order.
    pub fn users(&self) -> impl Iterator<Item = usize> + '_ {
        self.groups.iter().flat_map(|g| g.members.iter().copied())
    }

    pub fn canonical(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, g) in self.groups.iter().enumerate() {
            if i > 0 {
                f.write_str("/")?;
            }
            write!(f, "{g}")?;
        }
        Ok(())
    }
}

impl FromStr for Schedule {
    type Err = Error;

    /// Parses the canonical form only, so that printing a parsed schedule
    /// reproduces the input byte for byte.
    fn from_str(s: &str) -> Result<Self> {
        let fail = |reason: &str| Error::ScheduleParse {
            input: s.to_string(),
            reason: reason.to_string(),
        };
        if s.is_empty() {
            return Ok(Self::empty());
        }
        let mut groups = Vec::new();
        for token in s.split('/') {
            let (inner, bracketed) = match token.strip_prefix('(') {
                Some(rest) => (
                    rest.strip_suffix(')').ok_or_else(|| fail("unbalanced parenthesis"))?,
                    true,
                ),
                None => (token, false),
            };
            let mut members = Vec::new();
            for part in inner.split('+') {
                if part.is_empty() || !part.bytes().all(|b| b.is_ascii_digit()) || part.starts_with('0') {
                    return Err(fail("user numbers must be positive integers without leading zeros"));
                }
                let user: usize = part.parse().map_err(|_| fail("user number overflows"))?;
                members.push(user - 1);
            }
            if bracketed != (members.len() > 1) {
                return Err(fail(
                    "groups of two or more users are parenthesized, singletons are not",
                ));
            }
            if members.windows(2).any(|w| w[0] >= w[1]) {
                return Err(fail("group members must be strictly increasing"));
            }
            groups.push(ContentionGroup { members });
        }
        Ok(Self { groups })
    }
}

impl Serialize for Schedule {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Schedule {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Why a schedule cannot be used with a given channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScheduleViolation {
    DuplicateUser(usize),
    IndexOutOfRange { index: usize, n_users: usize },
}

impl fmt::Display for ScheduleViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::DuplicateUser(u) => write!(f, "duplicate user {}", u + 1),
            Self::IndexOutOfRange { index, n_users } => {
                write!(f, "user {} out of range for {} users", index + 1, n_users)
            }
        }
    }
}

/// Checks group disjointness and index validity, returning the first violation
/// in service order.
pub fn validate_schedule(schedule: &Schedule, channel: &ChannelParams) -> std::result::Result<(), ScheduleViolation> {
    validate_for_users(schedule, channel.n_users())
}

pub(crate) fn validate_for_users(schedule: &Schedule, n_users: usize) -> std::result::Result<(), ScheduleViolation> {
    let mut seen = vec![false; n_users];
    for user in schedule.users() {
        if user >= n_users {
            return Err(ScheduleViolation::IndexOutOfRange { index: user, n_users });
        }
        if std::mem::replace(&mut seen[user], true) {
            return Err(ScheduleViolation::DuplicateUser(user));
        }
    }
    Ok(())
}

pub(crate) fn ensure_valid(schedule: &Schedule, channel: &ChannelParams) -> Result<()> {
    validate_schedule(schedule, channel).map_err(|v| Error::InvalidSchedule(v.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SlotOutcome {
    Success(usize),
    Idle,
    Collision,
}

/// Outcome law of one slot in which a set of users is addressed.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDistribution {
    /// `(user, probability)` in ascending user order.
    pub success: Vec<(usize, f64)>,
    pub idle: f64,
    pub collision: f64,
}

impl OutcomeDistribution {
    pub fn prob(&self, outcome: SlotOutcome) -> f64 {
        match outcome {
            SlotOutcome::Idle => self.idle,
            SlotOutcome::Collision => self.collision,
            SlotOutcome::Success(u) => self.success.iter().find(|&&(v, _)| v == u).map_or(0.0, |&(_, p)| p),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (SlotOutcome, f64)> + '_ {
        self.success
            .iter()
            .map(|&(u, p)| (SlotOutcome::Success(u), p))
            .chain([(SlotOutcome::Idle, self.idle), (SlotOutcome::Collision, self.collision)])
    }

    pub fn total_success(&self) -> f64 {
        self.success.iter().map(|&(_, p)| p).sum()
    }
}

/// Exactly one addressed user ON is a success, none ON is idle, two or more
/// ON is a collision.
pub fn slot_outcome_distribution(addressed: &ContentionGroup, channel: &ChannelParams) -> Result<OutcomeDistribution> {
    addressed.check_indices(channel.n_users())?;
    let probs: Vec<f64> = addressed.members().iter().map(|&u| channel.p(u)).collect();
    Ok(outcome_law(addressed.members(), &probs))
}

/// `members[k]` is ON with probability `probs[k]`.
pub(crate) fn outcome_law(members: &[usize], probs: &[f64]) -> OutcomeDistribution {
    let k = probs.len();
    // off_before[j] = prod_{i<j} (1 - p_i), off_after[j] = prod_{i>=j} (1 - p_i)
    let mut off_before = vec![1.0; k + 1];
    for j in 0..k {
        off_before[j + 1] = off_before[j] * (1.0 - probs[j]);
    }
    let mut off_after = vec![1.0; k + 1];
    for j in (0..k).rev() {
        off_after[j] = off_after[j + 1] * (1.0 - probs[j]);
    }
    let success: Vec<(usize, f64)> = (0..k)
        .map(|j| (members[j], probs[j] * off_before[j] * off_after[j + 1]))
        .collect();
    let idle = off_before[k];
    // P(at least two ON), accumulated by count so a singleton gives exactly zero
    let (mut none, mut one, mut several) = (1.0, 0.0, 0.0);
    for &p in probs {
        several += one * p;
        one = one * (1.0 - p) + none * p;
        none *= 1.0 - p;
    }
    let collision = several;
    OutcomeDistribution {
        success,
        idle,
        collision,
    }
}

/// Expected per-frame throughput of each user, in packets per frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct RateVector(Vec<f64>);

const RATE_ROUNDING: f64 = 1e-12;

impl RateVector {
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        let mut rates = rates;
        for (user, r) in rates.iter_mut().enumerate() {
            if !(r.is_finite() && *r >= -RATE_ROUNDING && *r <= 1.0 + RATE_ROUNDING) {
                return Err(Error::InvalidInput(format!(
                    "rate {r} for user {} is outside [0, 1]",
                    user + 1
                )));
            }
            *r = r.clamp(0.0, 1.0);
        }
        Ok(Self(rates))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn dot(&self, weights: &[f64]) -> f64 {
        self.0.iter().zip(weights).map(|(r, w)| r * w).sum()
    }

    /// Throughput in packets per slot.
    pub fn per_slot(&self, frame: FrameConfig) -> Vec<f64> {
        self.0.iter().map(|r| r / frame.slots() as f64).collect()
    }
}

impl std::ops::Index<usize> for RateVector {
    type Output = f64;

    fn index(&self, index: usize) -> &f64 {
        &self.0[index]
    }
}

impl TryFrom<Vec<f64>> for RateVector {
    type Error = Error;

    fn try_from(value: Vec<f64>) -> Result<Self> {
        Self::new(value)
    }
}

impl From<RateVector> for Vec<f64> {
    fn from(value: RateVector) -> Self {
        value.0
    }
}
