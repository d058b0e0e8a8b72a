//! Schedule enumeration and deterministic execution of a schedule against one
//! realized frame of channel states.

use std::cmp::Reverse;

use crate::error::{Error, Result};
use crate::model::{validate_for_users, ContentionGroup, Schedule, SlotOutcome};

/// Largest user count enumerated exhaustively by default for polling schedules.
pub const DEFAULT_POLLING_CAP: usize = 8;
/// Largest user count enumerated exhaustively by default for group schedules.
pub const DEFAULT_GROUP_CAP: usize = 6;

/// One frame of channel realizations: `on(i, t)` is true iff user `i` is ON in slot `t`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelMatrix {
    n_users: usize,
    slots: usize,
    // row-major, one row per user
    on: Vec<bool>,
}

impl ChannelMatrix {
    pub fn new(n_users: usize, slots: usize, on: Vec<bool>) -> Result<Self> {
        if on.len() != n_users * slots {
            return Err(Error::DimensionMismatch {
                expected: n_users * slots,
                actual: on.len(),
            });
        }
        Ok(Self { n_users, slots, on })
    }

    pub fn from_rows(rows: &[Vec<bool>]) -> Result<Self> {
        let slots = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != slots) {
            return Err(Error::DimensionMismatch {
                expected: slots,
                actual: bad.len(),
            });
        }
        Self::new(rows.len(), slots, rows.concat())
    }

    pub(crate) fn from_fn(n_users: usize, slots: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut on = Vec::with_capacity(n_users * slots);
        for i in 0..n_users {
            for t in 0..slots {
                on.push(f(i, t));
            }
        }
        Self { n_users, slots, on }
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn on(&self, user: usize, slot: usize) -> bool {
        self.on[user * self.slots + slot]
    }
}

/// Per-slot outcomes of one frame and the per-user delivery indicators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameTrace {
    pub outcomes: Vec<SlotOutcome>,
    pub success: Vec<bool>,
}

impl FrameTrace {
    pub fn delivered(&self) -> usize {
        self.success.iter().filter(|&&s| s).count()
    }
}

/// Walks the frame slot by slot. The active group's remaining members are
/// addressed; exactly one of them ON is a success, none is idle, several is a
/// collision. Slots after the last group has finished are idle.
pub fn execute_frame(schedule: &Schedule, matrix: &ChannelMatrix) -> Result<FrameTrace> {
    validate_for_users(schedule, matrix.n_users()).map_err(|v| match v {
        crate::model::ScheduleViolation::IndexOutOfRange { index, n_users } => Error::UserOutOfRange { index, n_users },
        other => Error::InvalidSchedule(other.to_string()),
    })?;
    Ok(run_frame(schedule, matrix))
}

pub(crate) fn run_frame(schedule: &Schedule, matrix: &ChannelMatrix) -> FrameTrace {
    let groups = schedule.groups();
    let mut success = vec![false; matrix.n_users()];
    let mut outcomes = Vec::with_capacity(matrix.slots());
    let mut active = 0;
    let mut remaining: Vec<usize> = groups.first().map_or_else(Vec::new, |g| g.members().to_vec());
    for t in 0..matrix.slots() {
        if active == groups.len() {
            outcomes.push(SlotOutcome::Idle);
            continue;
        }
        let mut on_users = remaining.iter().copied().filter(|&u| matrix.on(u, t));
        let outcome = match (on_users.next(), on_users.next()) {
            (None, _) => SlotOutcome::Idle,
            (Some(u), None) => SlotOutcome::Success(u),
            (Some(_), Some(_)) => SlotOutcome::Collision,
        };
        if let SlotOutcome::Success(u) = outcome {
            success[u] = true;
            remaining.retain(|&v| v != u);
            if remaining.is_empty() {
                active += 1;
                if let Some(next) = groups.get(active) {
                    remaining = next.members().to_vec();
                }
            }
        }
        outcomes.push(outcome);
    }
    FrameTrace { outcomes, success }
}

/// All ordered polling schedules over at most `max_len` distinct users, by
/// length and then lexicographically by user sequence.
pub fn enumerate_polling_schedules(n: usize, max_len: usize) -> Result<Vec<Schedule>> {
    enumerate_polling_schedules_capped(n, max_len, DEFAULT_POLLING_CAP)
}

pub fn enumerate_polling_schedules_capped(n: usize, max_len: usize, cap: usize) -> Result<Vec<Schedule>> {
    if n > cap {
        return Err(Error::EnumerationCap { n, cap });
    }
    if max_len > n {
        return Err(Error::InvalidInput(format!(
            "schedule length {max_len} exceeds user count {n}"
        )));
    }
    let mut out = Vec::new();
    let mut prefix = Vec::with_capacity(max_len);
    let mut used = vec![false; n];
    for len in 0..=max_len {
        permutations(len, &mut prefix, &mut used, &mut out);
    }
    Ok(out)
}

fn permutations(len: usize, prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Schedule>) {
    if prefix.len() == len {
        out.push(Schedule::polling(prefix));
        return;
    }
    for u in 0..used.len() {
        if !used[u] {
            used[u] = true;
            prefix.push(u);
            permutations(len, prefix, used, out);
            prefix.pop();
            used[u] = false;
        }
    }
}

/// All static schedules made of pairwise-disjoint groups of at most
/// `max_group_size` users, over any subset of the `n` users.
///
/// Ordered by number of users served, then by number of groups (descending,
/// so plain polling comes first), then lexicographically by group sequence.
/// With `max_group_size == 1` this is exactly the polling enumeration.
pub fn enumerate_group_schedules(n: usize, max_group_size: usize) -> Result<Vec<Schedule>> {
    enumerate_group_schedules_capped(n, max_group_size, DEFAULT_GROUP_CAP)
}

pub fn enumerate_group_schedules_capped(n: usize, max_group_size: usize, cap: usize) -> Result<Vec<Schedule>> {
    if n > cap {
        return Err(Error::EnumerationCap { n, cap });
    }
    if max_group_size == 0 || max_group_size > n {
        return Err(Error::InvalidInput(format!(
            "group size cap {max_group_size} must be between 1 and {n}"
        )));
    }
    // n <= cap keeps the masks small; a u64 mask is plenty
    if n > 63 {
        return Err(Error::TooLarge(format!("{n} users")));
    }
    let mut out = Vec::new();
    let mut prefix = Vec::new();
    extend_groups(n, max_group_size, 0, &mut prefix, &mut out);
    out.sort_by_cached_key(|s| {
        let seq: Vec<Vec<usize>> = s.groups().iter().map(|g| g.members().to_vec()).collect();
        (s.users().count(), Reverse(s.groups().len()), seq)
    });
    Ok(out)
}

fn extend_groups(n: usize, cap: usize, used: u64, prefix: &mut Vec<ContentionGroup>, out: &mut Vec<Schedule>) {
    out.push(Schedule::new(prefix.clone()));
    let free: Vec<usize> = (0..n).filter(|&u| used & (1 << u) == 0).collect();
    // every nonempty subset of the free users with at most `cap` members
    for subset in 1u64..(1 << free.len()) {
        if subset.count_ones() as usize > cap {
            continue;
        }
        let members: Vec<usize> = (0..free.len())
            .filter(|&k| subset & (1 << k) != 0)
            .map(|k| free[k])
            .collect();
        let mask = members.iter().fold(used, |m, &u| m | (1 << u));
        prefix.push(ContentionGroup::new(members).expect("distinct members"));
        extend_groups(n, cap, mask, prefix, out);
        prefix.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[&[u8]]) -> ChannelMatrix {
        let rows: Vec<Vec<bool>> = rows.iter().map(|r| r.iter().map(|&b| b == 1).collect()).collect();
        ChannelMatrix::from_rows(&rows).unwrap()
    }

    fn sched(text: &str) -> Schedule {
        text.parse().unwrap()
    }

    #[test]
    fn polling_both_on_when_addressed() {
        let m = matrix(&[&[1, 0], &[0, 1]]);
        let tr = execute_frame(&sched("1/2"), &m).unwrap();
        assert_eq!(tr.outcomes, vec![SlotOutcome::Success(0), SlotOutcome::Success(1)]);
        assert_eq!(tr.success, vec![true, true]);
    }

    #[test]
    fn group_collides_when_both_on() {
        let tr = execute_frame(&sched("(1+2)"), &matrix(&[&[1], &[1]])).unwrap();
        assert_eq!(tr.outcomes, vec![SlotOutcome::Collision]);
        assert_eq!(tr.success, vec![false, false]);
    }

    #[test]
    fn group_idle_collision_success() {
        let m = matrix(&[&[0, 1, 0], &[0, 1, 1]]);
        let tr = execute_frame(&sched("(1+2)"), &m).unwrap();
        assert_eq!(
            tr.outcomes,
            vec![SlotOutcome::Idle, SlotOutcome::Collision, SlotOutcome::Success(1)]
        );
        assert_eq!(tr.success, vec![false, true]);
    }

    #[test]
    fn residual_member_is_addressed_alone() {
        // user 2 succeeds first; user 1 is then addressed alone, so user 2's
        // later ON slots no longer collide
        let m = matrix(&[&[0, 1, 1], &[1, 1, 1]]);
        let tr = execute_frame(&sched("(1+2)"), &m).unwrap();
        assert_eq!(
            tr.outcomes,
            vec![SlotOutcome::Success(1), SlotOutcome::Success(0), SlotOutcome::Idle]
        );
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        assert!(matches!(
            execute_frame(&sched("3"), &matrix(&[&[1], &[1]])),
            Err(Error::UserOutOfRange { index: 2, n_users: 2 })
        ));
        assert!(ChannelMatrix::from_rows(&[vec![true], vec![true, false]]).is_err());
        assert!(ChannelMatrix::new(2, 3, vec![true; 5]).is_err());
    }

    #[test]
    fn polling_enumeration_small_cases() {
        let texts: Vec<String> = enumerate_polling_schedules(2, 2)
            .unwrap()
            .iter()
            .map(Schedule::to_string)
            .collect();
        assert_eq!(texts, ["", "1", "2", "1/2", "2/1"]);
        assert_eq!(enumerate_polling_schedules(3, 3).unwrap().len(), 16);
        assert_eq!(enumerate_polling_schedules(1, 0).unwrap(), vec![Schedule::empty()]);
        assert!(matches!(
            enumerate_polling_schedules(9, 2),
            Err(Error::EnumerationCap { n: 9, cap: 8 })
        ));
        assert!(enumerate_polling_schedules(2, 3).is_err());
        assert_eq!(enumerate_polling_schedules_capped(9, 1, 9).unwrap().len(), 10);
    }

    #[test]
    fn group_enumeration_small_cases() {
        let texts: Vec<String> = enumerate_group_schedules(2, 2)
            .unwrap()
            .iter()
            .map(Schedule::to_string)
            .collect();
        assert_eq!(texts, ["", "1", "2", "1/2", "2/1", "(1+2)"]);
        assert_eq!(enumerate_group_schedules(3, 3).unwrap().len(), 26);
        assert_eq!(enumerate_group_schedules(3, 1).unwrap().len(), 16);
        assert!(matches!(
            enumerate_group_schedules(7, 2),
            Err(Error::EnumerationCap { n: 7, cap: 6 })
        ));
        assert!(enumerate_group_schedules(3, 0).is_err());
        assert!(enumerate_group_schedules(3, 4).is_err());
    }

    #[test]
    fn singleton_group_enumeration_equals_polling() {
        for n in 1..=5 {
            assert_eq!(
                enumerate_group_schedules(n, 1).unwrap(),
                enumerate_polling_schedules(n, n).unwrap()
            );
        }
    }

    #[test]
    fn enumerations_are_valid_and_distinct() {
        use std::collections::HashSet;
        let ch = crate::model::ChannelParams::symmetric(4, 0.5).unwrap();
        for list in [
            enumerate_polling_schedules(4, 4).unwrap(),
            enumerate_group_schedules(4, 3).unwrap(),
        ] {
            let distinct: HashSet<String> = list.iter().map(Schedule::to_string).collect();
            assert_eq!(distinct.len(), list.len());
            for s in &list {
                assert_eq!(crate::model::validate_schedule(s, &ch), Ok(()));
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn frame() -> impl Strategy<Value = (Schedule, ChannelMatrix)> {
            (1usize..=4, 1usize..=6).prop_flat_map(|(n, slots)| {
                let schedules = enumerate_group_schedules(n, n).unwrap();
                (
                    prop::sample::select(schedules),
                    prop::collection::vec(any::<bool>(), n * slots),
                )
                    .prop_map(move |(s, on)| (s, ChannelMatrix::new(n, slots, on).unwrap()))
            })
        }

        proptest! {
            #[test]
            fn success_only_when_on((s, m) in frame()) {
                let tr = execute_frame(&s, &m).unwrap();
                prop_assert_eq!(tr.outcomes.len(), m.slots());
                let mut seen = vec![0; m.n_users()];
                for (t, o) in tr.outcomes.iter().enumerate() {
                    if let SlotOutcome::Success(u) = *o {
                        prop_assert!(m.on(u, t));
                        seen[u] += 1;
                    }
                }
                for (count, &success) in seen.iter().zip(&tr.success) {
                    prop_assert!(*count <= 1);
                    prop_assert_eq!(*count == 1, success);
                }
            }

            #[test]
            fn polling_successes_follow_order((s, m) in frame()) {
                prop_assume!(s.is_polling());
                let tr = execute_frame(&s, &m).unwrap();
                let order: Vec<usize> = s.users().collect();
                for j in 0..order.len() {
                    if tr.success[order[j]] {
                        prop_assert!(order[..j].iter().all(|&u| tr.success[u]));
                    }
                }
            }
        }
    }
}
