use mobility_extremes::graph::{SnapshotSummary, TemporalNetwork};

use super::Outcome;
use crate::context::Context;
use crate::error::CliError;
use crate::output::Outputs;

fn write_summaries(out: &mut Outputs, stem: &str, network: &TemporalNetwork) -> Result<(), CliError> {
    let summaries = network.summaries();
    let rows: Vec<Vec<String>> = summaries.iter().map(SnapshotSummary::to_record).collect();
    out.write_csv(&format!("network/{stem}.csv"), &SnapshotSummary::HEADER, &rows)?;
    out.write_json(&format!("network/{stem}.json"), &summaries)
}

pub fn run(ctx: &mut Context, out: &mut Outputs) -> Result<Outcome, CliError> {
    let network = &ctx.config.network;
    if !network.weekly && !network.monthly {
        ctx.warn("network.weekly and network.monthly are both false; nothing to build");
        return Ok(Outcome::Skipped);
    }
    if network.weekly {
        let weekly = ctx.weekly_network()?.clone();
        write_summaries(out, "weekly_summary", &weekly)?;
    }
    if network.monthly {
        let monthly = ctx.monthly_network()?.clone();
        write_summaries(out, "monthly_summary", &monthly)?;
    }
    Ok(Outcome::Ran)
}
