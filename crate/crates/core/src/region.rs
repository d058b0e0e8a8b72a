//! Rate regions as lists of corner points, and hull membership with free
//! disposal answered by a small linear program.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::Serialize;

use crate::engine::{enumerate_group_schedules, enumerate_polling_schedules};
use crate::error::{Error, Result};
use crate::lp::{solve_standard_form, LpOutcome};
use crate::model::{ChannelParams, FrameConfig, RateVector, Schedule};
use crate::rates::{expected_rate, FEASIBILITY_TOLERANCE};
use crate::report::csv_row;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CornerPoint {
    pub schedule: Schedule,
    pub rates: RateVector,
}

/// Convex hull of the corner points, extended downward (free disposal).
#[derive(Debug, Clone, PartialEq)]
pub struct RateRegion {
    corner_points: Vec<CornerPoint>,
    channel: ChannelParams,
    frame: FrameConfig,
}

impl RateRegion {
    pub fn corner_points(&self) -> &[CornerPoint] {
        &self.corner_points
    }

    pub fn channel(&self) -> &ChannelParams {
        &self.channel
    }

    pub fn frame(&self) -> FrameConfig {
        self.frame
    }

    pub fn len(&self) -> usize {
        self.corner_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.corner_points.is_empty()
    }

    /// Drops corner points weakly dominated by another corner point.
    pub fn prune_dominated(&self) -> RateRegion {
        let pts = &self.corner_points;
        let keep: Vec<CornerPoint> = pts
            .iter()
            .enumerate()
            .filter(|&(i, a)| {
                !pts.iter().enumerate().any(|(j, b)| {
                    j != i && dominates(b.rates.as_slice(), a.rates.as_slice()) && (a.rates != b.rates || j < i)
                })
            })
            .map(|(_, c)| c.clone())
            .collect();
        RateRegion {
            corner_points: keep,
            channel: self.channel.clone(),
            frame: self.frame,
        }
    }

    /// One row per corner point: canonical schedule, then the rates.
    pub fn to_csv(&self) -> String {
        let n = self.channel.n_users();
        let mut out = String::from("schedule");
        for i in 1..=n {
            out.push_str(&format!(",rate_{i}"));
        }
        out.push('\n');
        for c in &self.corner_points {
            out.push_str(&csv_row(&c.schedule.to_string(), c.rates.as_slice()));
        }
        out
    }
}

fn dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x >= y)
}

/// Maps each schedule to its expected rate vector. The empty schedule is
/// always present; schedules with bit-identical rate vectors collapse onto the
/// one whose canonical text sorts first. Input order is otherwise kept.
pub fn build_rate_region(schedules: &[Schedule], channel: &ChannelParams, frame: FrameConfig) -> Result<RateRegion> {
    let mut list: Vec<Schedule> = Vec::with_capacity(schedules.len() + 1);
    if !schedules.iter().any(Schedule::is_empty) {
        list.push(Schedule::empty());
    }
    list.extend(schedules.iter().cloned());
    let rates: Vec<RateVector> = list
        .par_iter()
        .map(|s| expected_rate(s, channel, frame))
        .collect::<Result<_>>()?;

    let mut points: Vec<CornerPoint> = Vec::with_capacity(list.len());
    let mut index_of: std::collections::HashMap<Vec<u64>, usize> = Default::default();
    for (schedule, rates) in list.into_iter().zip(rates) {
        let key: Vec<u64> = rates.as_slice().iter().map(|v| v.to_bits()).collect();
        match index_of.get(&key) {
            Some(&k) => {
                if schedule.to_string() < points[k].schedule.to_string() {
                    points[k].schedule = schedule;
                }
            }
            None => {
                index_of.insert(key, points.len());
                points.push(CornerPoint { schedule, rates });
            }
        }
    }
    let mut seen = HashSet::new();
    points.retain(|p| seen.insert(p.schedule.to_string()));
    Ok(RateRegion {
        corner_points: points,
        channel: channel.clone(),
        frame,
    })
}

/// Region of all ordered polling schedules.
pub fn polling_region(channel: &ChannelParams, frame: FrameConfig) -> Result<RateRegion> {
    let n = channel.n_users();
    build_rate_region(&enumerate_polling_schedules(n, n)?, channel, frame)
}

/// Region of all static group schedules with groups of at most `max_group_size` users.
pub fn extended_region(channel: &ChannelParams, frame: FrameConfig, max_group_size: usize) -> Result<RateRegion> {
    let n = channel.n_users();
    build_rate_region(&enumerate_group_schedules(n, max_group_size)?, channel, frame)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
pub enum HullDecision {
    /// Convex weights `(corner index, weight)` whose combination dominates the
    /// demand. `slack` is the largest uniform increase of the demand that
    /// would still be feasible.
    Feasible { weights: Vec<(usize, f64)>, slack: f64 },
    /// Nonnegative user weights `w` (summing to one) with
    /// `w . d > max_corner w . r + margin`.
    Infeasible { certificate: Vec<f64>, margin: f64 },
}

impl HullDecision {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Self::Feasible { .. })
    }

    /// Signed distance-like slack: positive inside, negative outside.
    pub fn slack(&self) -> f64 {
        match self {
            Self::Feasible { slack, .. } => *slack,
            Self::Infeasible { margin, .. } => -margin,
        }
    }
}

/// Whether some convex combination of corner points dominates `d`.
///
/// Solves `max t` subject to `sum_s lambda_s r_s >= d + t 1`, `sum lambda = 1`,
/// `lambda >= 0`. The demand is accepted when `t >= -1e-9`; the row duals of
/// the optimum give the separating weights when it is not.
pub fn hull_feasible(d: &RateVector, region: &RateRegion) -> Result<HullDecision> {
    let n = region.channel.n_users();
    if d.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: d.len(),
        });
    }
    let pts = &region.corner_points;
    if pts.is_empty() {
        return Err(Error::InvalidInput("region has no corner points".into()));
    }
    let demand = d.as_slice();

    let k = pts.len();
    // columns: lambda_1..k, t+, t-, surplus_1..n
    let cols = k + 2 + n;
    let mut a = Vec::with_capacity(n + 1);
    for i in 0..n {
        let mut row = vec![0.0; cols];
        for (s, p) in pts.iter().enumerate() {
            row[s] = p.rates[i];
        }
        row[k] = -1.0;
        row[k + 1] = 1.0;
        row[k + 2 + i] = -1.0;
        a.push(row);
    }
    let mut convex = vec![0.0; cols];
    convex[..k].iter_mut().for_each(|v| *v = 1.0);
    a.push(convex);
    let mut b = demand.to_vec();
    b.push(1.0);
    let mut c = vec![0.0; cols];
    c[k] = -1.0;
    c[k + 1] = 1.0;

    let sol = match solve_standard_form(&c, &a, &b)? {
        LpOutcome::Optimal(sol) => sol,
        other => return Err(Error::Lp(format!("hull program ended as {other:?}"))),
    };
    let t = sol.x[k] - sol.x[k + 1];

    if t >= -FEASIBILITY_TOLERANCE {
        // a single dominating corner point is the simplest certificate
        if let Some(s) = pts.iter().position(|p| {
            p.rates
                .as_slice()
                .iter()
                .zip(demand)
                .all(|(r, d)| r - d >= -FEASIBILITY_TOLERANCE)
        }) {
            return Ok(HullDecision::Feasible {
                weights: vec![(s, 1.0)],
                slack: t,
            });
        }
        let total: f64 = sol.x[..k].iter().sum();
        let weights: Vec<(usize, f64)> = sol.x[..k]
            .iter()
            .enumerate()
            .filter(|&(_, &w)| w > 1e-12)
            .map(|(s, &w)| (s, w / total))
            .collect();
        let combo: Vec<f64> = (0..n)
            .map(|i| weights.iter().map(|&(s, w)| w * pts[s].rates[i]).sum())
            .collect();
        if combo
            .iter()
            .zip(demand)
            .any(|(c, d)| c - d < -10.0 * FEASIBILITY_TOLERANCE)
        {
            return Err(Error::Lp("accepted weights do not dominate the demand".into()));
        }
        return Ok(HullDecision::Feasible { weights, slack: t });
    }

    let mut certificate: Vec<f64> = sol.duals[..n].iter().map(|v| v.max(0.0)).collect();
    let total: f64 = certificate.iter().sum();
    if total <= 0.0 {
        return Err(Error::Lp("empty separating certificate".into()));
    }
    certificate.iter_mut().for_each(|v| *v /= total);
    let best = pts
        .iter()
        .map(|p| p.rates.dot(&certificate))
        .fold(f64::NEG_INFINITY, f64::max);
    let margin = dot(&certificate, demand) - best;
    if (margin + t).abs() > 1e-7 {
        return Err(Error::Lp(format!(
            "certificate margin {margin:.3e} disagrees with program value {:.3e}",
            -t
        )));
    }
    Ok(HullDecision::Infeasible { certificate, margin })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Largest `alpha` with `alpha * direction` inside the region, by bisection
/// on [`hull_feasible`]. `direction` must be nonnegative and nonzero.
pub fn boundary_scale(direction: &[f64], region: &RateRegion) -> Result<f64> {
    if direction.iter().any(|&v| v < 0.0) || direction.iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidInput("direction must be nonnegative and nonzero".into()));
    }
    let fits = |alpha: f64| -> Result<bool> {
        let d: Vec<f64> = direction.iter().map(|v| (v * alpha).min(1.0)).collect();
        Ok(hull_feasible(&RateVector::new(d)?, region)?.is_feasible())
    };
    let max_component = direction.iter().copied().fold(0.0, f64::max);
    let (mut lo, mut hi) = (0.0, 1.0 / max_component);
    if fits(hi)? {
        return Ok(hi);
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if fits(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig2_channel() -> (ChannelParams, FrameConfig) {
        (
            ChannelParams::new(vec![0.3, 0.2]).unwrap(),
            FrameConfig::new(4).unwrap(),
        )
    }

    #[test]
    fn polling_region_has_five_points() {
        let (c, f) = fig2_channel();
        let r = polling_region(&c, f).unwrap();
        let names: Vec<String> = r.corner_points().iter().map(|p| p.schedule.to_string()).collect();
        assert_eq!(names, ["", "1", "2", "1/2", "2/1"]);
        assert!(r.corner_points()[0].rates.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn empty_schedule_list_gives_origin() {
        let (c, f) = fig2_channel();
        let r = build_rate_region(&[], &c, f).unwrap();
        assert_eq!(r.len(), 1);
        assert!(r.corner_points()[0].schedule.is_empty());
    }

    #[test]
    fn duplicate_rates_collapse_to_first_canonical() {
        // with p_2 = 0 user 2 never succeeds: "1" and "1/2" coincide, and
        // "2", "2/1" are stuck on user 2 and collapse onto the origin
        let c = ChannelParams::new(vec![0.3, 0.0]).unwrap();
        let f = FrameConfig::new(3).unwrap();
        let r = polling_region(&c, f).unwrap();
        let names: Vec<String> = r.corner_points().iter().map(|p| p.schedule.to_string()).collect();
        assert_eq!(names, ["", "1"]);
    }

    #[test]
    fn corner_points_accepted_and_midpoints_too() {
        let (c, f) = fig2_channel();
        let r = extended_region(&c, f, 2).unwrap();
        for (k, p) in r.corner_points().iter().enumerate() {
            match hull_feasible(&p.rates, &r).unwrap() {
                HullDecision::Feasible { weights, .. } => {
                    let (s, w) = weights[0];
                    assert_eq!(w, 1.0);
                    assert!(s <= k);
                    let other = &r.corner_points()[s].rates;
                    assert!((0..2).all(|i| other[i] >= p.rates[i]));
                }
                other => panic!("corner point rejected: {other:?}"),
            }
        }
        let a = &r.corner_points()[1].rates;
        let b = &r.corner_points()[2].rates;
        let mid = RateVector::new((0..2).map(|i| 0.5 * (a[i] + b[i])).collect()).unwrap();
        assert!(hull_feasible(&mid, &r).unwrap().is_feasible());
    }

    #[test]
    fn group_point_separates_from_polling_hull() {
        let (c, f) = fig2_channel();
        let polling = polling_region(&c, f).unwrap();
        let extended = extended_region(&c, f, 2).unwrap();
        assert_eq!(extended.len(), 6);
        let group = extended
            .corner_points()
            .iter()
            .find(|p| p.schedule.to_string() == "(1+2)")
            .unwrap();
        match hull_feasible(&group.rates, &polling).unwrap() {
            HullDecision::Infeasible { certificate, margin } => {
                assert!(margin > 1e-6);
                assert!((certificate.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
            other => panic!("expected separation, got {other:?}"),
        }
        assert!(hull_feasible(&group.rates, &extended).unwrap().is_feasible());
    }

    #[test]
    fn csv_export() {
        let (c, f) = fig2_channel();
        let csv = polling_region(&c, f).unwrap().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "schedule,rate_1,rate_2");
        assert_eq!(lines[1], ",0,0");
        assert_eq!(lines[2], "1,0.759900000000,0");
        assert_eq!(lines.len(), 6);
    }

    #[test]
    fn pruning_keeps_efficient_points() {
        let (c, f) = fig2_channel();
        let pruned = polling_region(&c, f).unwrap().prune_dominated();
        let names: Vec<String> = pruned.corner_points().iter().map(|p| p.schedule.to_string()).collect();
        assert_eq!(names, ["1/2", "2/1"]);
    }

    #[test]
    fn dimension_mismatch() {
        let (c, f) = fig2_channel();
        let r = polling_region(&c, f).unwrap();
        assert!(hull_feasible(&RateVector::zeros(3), &r).is_err());
    }
}
