//! The four subcommands. Each writes its files under the configured output
//! directory and returns the text to print plus the process exit code.

use std::fs;
use std::path::Path;

use anyhow::Context;
use dcqos::cellular::generate_cellular_drop_with;
use dcqos::engine::enumerate_polling_schedules;
use dcqos::region::{extended_region, polling_region};
use dcqos::report::{csv_row, format_sig12};
use dcqos::sim::{cdf_csv, cdf_quantile};
use dcqos::{
    build_rate_region, cellular_on_probabilities, empirical_cdf, hull_feasible, polling_admission, run_policy,
    BindingCondition, Candidates, CellularScenario, ChannelParams, Error, FrameConfig, Policy, RateRegion, RateVector,
};
use serde::Serialize;
use serde_json::json;

use crate::config::{ExperimentConfig, Model, PolicyKind};

/// What a command prints and how the process should exit.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub exit_code: i32,
    pub report: String,
}

impl Outcome {
    fn ok(report: String) -> Self {
        Self { exit_code: 0, report }
    }
}

/// Corner-point region of the configured model.
pub fn build_region(config: &ExperimentConfig) -> dcqos::Result<RateRegion> {
    let (channel, frame) = (&config.channel, config.frame);
    match config.model {
        Model::Polling if config.max_len() == channel.n_users() => polling_region(channel, frame),
        Model::Polling => build_rate_region(
            &enumerate_polling_schedules(channel.n_users(), config.max_len())?,
            channel,
            frame,
        ),
        Model::Extended => extended_region(channel, frame, config.max_group_size()),
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

fn pretty<T: Serialize>(value: &T) -> anyhow::Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

/// `region`: corner-point CSV plus a summary with the target's hull status.
pub fn region(config: &ExperimentConfig) -> anyhow::Result<Outcome> {
    let region = build_region(config)?;
    let model = config.model.name();
    let csv_name = format!("region_{model}.csv");
    write(&config.out_dir, &csv_name, &region.to_csv())?;

    let target = config.target()?;
    let decision = hull_feasible(&target, &region)?;
    let summary = json!({
        "config": config,
        "model": model,
        "corner_points": region.len(),
        "pareto_corner_points": region.prune_dominated().len(),
        "target": target,
        "target_feasible": decision.is_feasible(),
        "target_hull": decision,
    });
    write(
        &config.out_dir,
        &format!("region_{model}_summary.json"),
        &pretty(&summary)?,
    )?;

    let mut report = format!(
        "{model} region: {} corner points ({} Pareto) written to {}\n",
        region.len(),
        region.prune_dominated().len(),
        config.out_dir.join(&csv_name).display()
    );
    report.push_str(&format!(
        "target {} is {} (slack {})\n",
        join(target.as_slice()),
        if decision.is_feasible() {
            "feasible"
        } else {
            "infeasible"
        },
        format_sig12(decision.slack())
    ));
    Ok(Outcome::ok(report))
}

fn join(values: &[f64]) -> String {
    values.iter().map(|&v| format_sig12(v)).collect::<Vec<_>>().join(",")
}

/// Parses a comma-separated rate vector such as `0.6,0.5`.
pub fn parse_rates(text: &str) -> anyhow::Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .with_context(|| format!("malformed rate vector {text:?}: {s:?} is not a number"))
        })
        .collect()
}

/// `admit`: exit 0 when the rates are admitted, 1 when rejected.
pub fn admit(config: &ExperimentConfig, rates: Option<&[f64]>) -> anyhow::Result<Outcome> {
    let d = match rates {
        Some(r) => {
            let n = config.channel.n_users();
            if r.len() != n {
                anyhow::bail!("rate vector has {} entries for {n} users", r.len());
            }
            RateVector::new(r.to_vec())?
        }
        None => config.target()?,
    };
    let report = match config.model {
        Model::Polling => {
            let decision = polling_admission(&d, &config.channel, config.frame)?;
            // 1-based, as users are numbered in schedules and CSV headers
            let binding_users: Option<Vec<usize>> = match &decision.binding {
                Some(BindingCondition::Workload(w)) => Some(w.subset.iter().map(|u| u + 1).collect()),
                Some(BindingCondition::Negative { user }) => Some(vec![user + 1]),
                None => None,
            };
            json!({
                "model": "polling",
                "rates": d,
                "accepted": decision.accepted,
                "binding_users": binding_users,
                "decision": decision,
            })
        }
        Model::Extended => {
            let decision = hull_feasible(&d, &build_region(config)?)?;
            json!({ "model": "extended", "rates": d, "accepted": decision.is_feasible(), "decision": decision })
        }
    };
    let accepted = report["accepted"].as_bool().unwrap_or(false);
    Ok(Outcome {
        exit_code: if accepted { 0 } else { 1 },
        report: pretty(&report)?,
    })
}

/// `schedule-run`: trajectory CSV and a summary embedding the resolved config.
pub fn schedule_run(config: &ExperimentConfig) -> anyhow::Result<Outcome> {
    let region = build_region(config)?;
    let policy = match config.policy.kind {
        PolicyKind::Maxweight => Policy::MaxWeight {
            target: config.target()?,
        },
        PolicyKind::Pf => Policy::ProportionalFair {
            ewma_weight: config.policy.ewma_weight,
        },
    };
    let (frames, seed) = (config.simulation.frames, config.simulation.seed);
    let result = match run_policy(
        &policy,
        &config.channel,
        config.frame,
        &Candidates::Fixed(region.clone()),
        frames,
        seed,
    ) {
        Err(Error::InfeasibleTarget { .. }) => {
            let target = config.target()?;
            let report = json!({
                "accepted": false,
                "target": target,
                "decision": hull_feasible(&target, &region)?,
            });
            return Ok(Outcome {
                exit_code: 1,
                report: pretty(&report)?,
            });
        }
        other => other?,
    };

    let stem = format!("{}_{}", config.policy.kind.name(), config.model.name());
    write(
        &config.out_dir,
        &format!("trajectory_{stem}.csv"),
        &result.trajectory_csv(),
    )?;
    let throughput = result.per_user_throughput.as_slice();
    let summary = json!({
        "config": config,
        "policy": policy,
        "frames": frames,
        "seed": seed,
        "per_user_throughput": throughput,
        "ci_halfwidth": result.ci_halfwidth,
        "sum_log_throughput": sum_log(throughput),
        "final_backlog": result.trajectory.as_ref().and_then(|t| t.last()).and_then(|p| p.backlog.clone()),
    });
    write(&config.out_dir, &format!("summary_{stem}.json"), &pretty(&summary)?)?;
    Ok(Outcome::ok(format!(
        "{} under the {} model, {frames} frames: throughput {}\n",
        config.policy.kind.name(),
        config.model.name(),
        join(throughput)
    )))
}

fn sum_log(values: &[f64]) -> f64 {
    values.iter().map(|v| v.ln()).sum()
}

/// Per-user proportional-fair throughput of one drop under both models.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellularComparison {
    pub on_probability: Vec<f64>,
    pub polling: Vec<f64>,
    pub extended: Vec<f64>,
}

/// Runs the PF scheduler on one drop with polling candidates and with
/// pairwise-group candidates. Both runs share the seed and therefore the
/// channel realizations.
pub fn compare_cellular(
    scenario: &CellularScenario,
    frame: FrameConfig,
    ewma_weight: f64,
    frames: u64,
    seed: u64,
) -> dcqos::Result<CellularComparison> {
    let channel: ChannelParams = cellular_on_probabilities(scenario)?;
    let policy = Policy::ProportionalFair { ewma_weight };
    let run = |pairing| {
        run_policy(
            &policy,
            &channel,
            frame,
            &Candidates::WeightOrdered { pairing },
            frames,
            seed,
        )
        .map(|r| r.per_user_throughput.as_slice().to_vec())
    };
    Ok(CellularComparison {
        on_probability: channel.on_prob().to_vec(),
        polling: run(false)?,
        extended: run(true)?,
    })
}

/// The drop described by the config: explicit positions or a seeded draw.
pub fn cellular_scenario(config: &ExperimentConfig) -> anyhow::Result<CellularScenario> {
    let cell = &config.cellular;
    let scenario = match &cell.positions {
        Some(positions) => CellularScenario {
            params: cell.drop.clone(),
            positions: positions.clone(),
        },
        None => generate_cellular_drop_with(cell.drop.clone(), config.simulation.seed)?,
    };
    scenario.validate()?;
    Ok(scenario)
}

/// `cellular`: drop, ON probabilities, PF under both models, CDFs.
pub fn cellular(config: &ExperimentConfig) -> anyhow::Result<Outcome> {
    let scenario = cellular_scenario(config)?;
    let (frames, seed) = (config.simulation.frames, config.simulation.seed);
    let cmp = compare_cellular(
        &scenario,
        config.cellular.slots,
        config.policy.ewma_weight,
        frames,
        seed,
    )?;
    let dir = &config.out_dir;
    write(dir, "cellular_scenario.json", &pretty(&scenario)?)?;

    let mut table = String::from("user,distance,on_probability,polling,extended\n");
    for (i, d) in scenario.distances().iter().enumerate() {
        let row = [*d, cmp.on_probability[i], cmp.polling[i], cmp.extended[i]];
        table.push_str(&csv_row(&(i + 1).to_string(), &row));
    }
    write(dir, "cellular_throughput.csv", &table)?;

    let cdf_polling = empirical_cdf(&cmp.polling)?;
    let cdf_extended = empirical_cdf(&cmp.extended)?;
    write(dir, "cellular_cdf_polling.csv", &cdf_csv(&cdf_polling))?;
    write(dir, "cellular_cdf_extended.csv", &cdf_csv(&cdf_extended))?;

    let deciles: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
    let at = |cdf: &[(f64, f64)]| deciles.iter().map(|&q| cdf_quantile(cdf, q)).collect::<Vec<_>>();
    let summary = json!({
        "config": config,
        "frames": frames,
        "seed": seed,
        "deciles": deciles,
        "polling_deciles": at(&cdf_polling),
        "extended_deciles": at(&cdf_extended),
        "polling_total": cmp.polling.iter().sum::<f64>(),
        "extended_total": cmp.extended.iter().sum::<f64>(),
    });
    write(dir, "cellular_summary.json", &pretty(&summary)?)?;
    Ok(Outcome::ok(format!(
        "cellular drop of {} users, {frames} frames: total throughput polling {} extended {}\n",
        scenario.n_users(),
        format_sig12(cmp.polling.iter().sum()),
        format_sig12(cmp.extended.iter().sum())
    )))
}
