//! Random single-cell drops: users placed uniformly over a disk, distance-based
//! path loss and Rayleigh fading turned into per-slot ON probabilities.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ChannelParams;
use crate::sim::{stream_rng, STREAM_DROP};

/// Converts a power level in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) / 1000.0
}

/// Constants of a drop, everything except the positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DropParams {
    pub n_users: usize,
    /// meters
    pub cell_radius: f64,
    /// watts
    pub tx_power: f64,
    pub path_loss_exponent: f64,
    /// Received power (watts) needed to decode, noise folded in.
    pub decode_threshold: f64,
    /// meters; mean received power equals `tx_power` at this distance
    pub reference_distance: f64,
}

impl Default for DropParams {
    fn default() -> Self {
        Self {
            n_users: 30,
            cell_radius: 1000.0,
            tx_power: 1.0,
            path_loss_exponent: 4.0,
            decode_threshold: dbm_to_watts(10.0),
            // puts the cell-edge ON probability near 0.08 and the cell center near 1
            reference_distance: 250.0,
        }
    }
}

impl DropParams {
    fn validate(&self) -> Result<()> {
        let positive = [
            ("cell_radius", self.cell_radius),
            ("path_loss_exponent", self.path_loss_exponent),
            ("reference_distance", self.reference_distance),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.tx_power.is_finite() && self.tx_power > 0.0) {
            return Err(Error::InvalidInput("tx_power must be positive".into()));
        }
        if !(self.decode_threshold.is_finite() && self.decode_threshold >= 0.0) {
            return Err(Error::InvalidInput("decode_threshold must be nonnegative".into()));
        }
        if self.n_users == 0 {
            return Err(Error::InvalidInput("a drop needs at least one user".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellularScenario {
    pub params: DropParams,
    /// `(x, y)` in meters, base station at the origin.
    pub positions: Vec<(f64, f64)>,
}

impl CellularScenario {
    pub fn n_users(&self) -> usize {
        self.positions.len()
    }

    pub fn distances(&self) -> Vec<f64> {
        self.positions.iter().map(|&(x, y)| x.hypot(y)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.positions.len() != self.params.n_users {
            return Err(Error::DimensionMismatch {
                expected: self.params.n_users,
                actual: self.positions.len(),
            });
        }
        let r = self.params.cell_radius;
        if let Some(d) = self
            .distances()
            .into_iter()
            .find(|&d| d.is_nan() || d > r * (1.0 + 1e-12))
        {
            return Err(Error::InvalidInput(format!("user at {d} m is outside the {r} m cell")));
        }
        Ok(())
    }
}

/// Mean received power `tx * (max(r, r0) / r0)^-exponent`; with unit-mean
/// Rayleigh fading the received power is exponential, so the slot is ON with
/// probability `exp(-threshold / mean)`.
pub fn on_probability(distance: f64, params: &DropParams) -> f64 {
    let ratio = distance.max(params.reference_distance) / params.reference_distance;
    let mean_power = params.tx_power * ratio.powf(-params.path_loss_exponent);
    if params.decode_threshold == 0.0 {
        return 1.0;
    }
    (-params.decode_threshold / mean_power).exp()
}

pub fn cellular_on_probabilities(scenario: &CellularScenario) -> Result<ChannelParams> {
    scenario.validate()?;
    ChannelParams::new(
        scenario
            .distances()
            .into_iter()
            .map(|d| on_probability(d, &scenario.params))
            .collect(),
    )
}

/// Area-uniform drop with the default constants.
pub fn generate_cellular_drop(seed: u64) -> CellularScenario {
    generate_cellular_drop_with(DropParams::default(), seed).expect("default drop parameters are valid")
}

pub fn generate_cellular_drop_with(params: DropParams, seed: u64) -> Result<CellularScenario> {
    params.validate()?;
    let mut rng = stream_rng(seed, STREAM_DROP);
    let positions = (0..params.n_users)
        .map(|_| sample_disk(&mut rng, params.cell_radius))
        .collect();
    Ok(CellularScenario { params, positions })
}

/// Uniform over the disk: radius `R * sqrt(u)`, angle uniform.
fn sample_disk<R: Rng + ?Sized>(rng: &mut R, radius: f64) -> (f64, f64) {
    let r = radius * rng.gen::<f64>().sqrt();
    let theta = std::f64::consts::TAU * rng.gen::<f64>();
    (r * theta.cos(), r * theta.sin())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probability_examples() {
        let mut p = DropParams::default();
        p.tx_power = p.decode_threshold;
        assert!((on_probability(p.reference_distance, &p) - (-1f64).exp()).abs() < 1e-15);
        // inside the reference distance the clamp applies
        assert!((on_probability(0.0, &p) - (-1f64).exp()).abs() < 1e-15);
        p.decode_threshold = 0.0;
        assert_eq!(on_probability(900.0, &p), 1.0);
        assert!((dbm_to_watts(10.0) - 0.01).abs() < 1e-15);
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn monotone_in_distance_and_threshold() {
        let p = DropParams::default();
        let mut last = 1.0;
        for d in (0..=40).map(|k| k as f64 * 25.0) {
            let v = on_probability(d, &p);
            assert!(v <= last);
            last = v;
        }
        let mut q = p.clone();
        q.decode_threshold *= 2.0;
        assert!(on_probability(600.0, &q) < on_probability(600.0, &p));
    }

    #[test]
    fn drops_are_reproducible_and_inside_the_cell() {
        let a = generate_cellular_drop(5);
        assert_eq!(a, generate_cellular_drop(5));
        assert_ne!(a, generate_cellular_drop(6));
        assert_eq!(a.n_users(), 30);
        assert!(a.distances().iter().all(|&d| d <= 1000.0));
        let ch = cellular_on_probabilities(&a).unwrap();
        assert_eq!(ch.n_users(), 30);
    }

    #[test]
    fn mean_distance_is_two_thirds_radius() {
        let mut rng = stream_rng(17, 0);
        let n = 100_000;
        let radius = 1000.0;
        let mean: f64 = (0..n)
            .map(|_| {
                let (x, y) = sample_disk(&mut rng, radius);
                x.hypot(y)
            })
            .sum::<f64>()
            / n as f64;
        // E[r] = 2R/3, Var[r] = R^2/2 - 4R^2/9 = R^2/18
        let sigma = radius / 18f64.sqrt() / (n as f64).sqrt();
        assert!((mean - 2.0 * radius / 3.0).abs() < 3.0 * sigma, "{mean}");
    }

    #[test]
    fn scenario_json_round_trip() {
        let a = generate_cellular_drop(1);
        let text = serde_json::to_string(&a).unwrap();
        let back: CellularScenario = serde_json::from_str(&text).unwrap();
        assert_eq!(a, back);
    }

    #[test]
    fn invalid_scenarios() {
        let mut a = generate_cellular_drop(2);
        a.positions[0] = (2000.0, 0.0);
        assert!(cellular_on_probabilities(&a).is_err());
        let mut b = generate_cellular_drop(2);
        b.positions.pop();
        assert!(cellular_on_probabilities(&b).is_err());
        let bad = DropParams {
            path_loss_exponent: 0.0,
            ..DropParams::default()
        };
        assert!(generate_cellular_drop_with(bad, 1).is_err());
    }
}
