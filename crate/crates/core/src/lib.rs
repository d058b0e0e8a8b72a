//! Throughput regions of deadline-constrained traffic over unreliable ON/OFF
//! wireless channels, for plain polling and for multicast contention groups.
//!
//! Every user gets one packet per frame of `slots` slots and must deliver it
//! within that frame. A [`Schedule`] fixes, for one frame, the order in which
//! users (or groups of users addressed together) are served until success.
//! The expected per-frame delivery probability of each user under a schedule
//! is a corner point of the rate region; the region itself is the convex hull
//! of the corner points, with free disposal.
//!
//! - [`model`]: channel, frame, group and schedule types; single-slot outcome law
//! - [`engine`]: schedule enumeration and frame execution
//! - [`rates`]: exact expected rates, idle-slot expectations, admission tests
//! - [`region`]: corner-point regions and hull membership
//! - [`schedulers`]: max-weight and proportional-fair selection and simulation
//! - [`sim`]: Monte-Carlo sampling and empirical throughput
//! - [`cellular`]: random cell drops mapped to ON probabilities

pub mod cellular;
pub mod engine;
pub mod error;
pub mod lp;
pub mod model;
pub mod rates;
pub mod region;
pub mod report;
pub mod schedulers;
pub mod sim;

pub use cellular::{cellular_on_probabilities, generate_cellular_drop, CellularScenario, DropParams};
pub use engine::{enumerate_group_schedules, enumerate_polling_schedules, execute_frame, ChannelMatrix, FrameTrace};
pub use error::{Error, Result};
pub use model::{
    slot_outcome_distribution, validate_schedule, ChannelParams, ContentionGroup, FrameConfig, OutcomeDistribution,
    RateVector, Schedule, ScheduleViolation, SlotOutcome,
};
pub use rates::{
    brute_force_rate, expected_idle_slots, expected_rate, factor_n_gain, multicast_gain_holds, polling_admission,
    workload_admission, AdmissionDecision, BindingCondition, WorkloadCondition,
};
pub use region::{build_rate_region, hull_feasible, CornerPoint, HullDecision, RateRegion};
pub use schedulers::{
    maxweight_select, pf_select, run_policy, update_fairness, update_virtual_queues, Candidates, FairnessState, Policy,
    VirtualQueueState,
};
pub use sim::{empirical_cdf, sample_channel_matrix, simulate_schedule, SimulationResult};
