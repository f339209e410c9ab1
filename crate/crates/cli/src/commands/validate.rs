use perpliq::validation::{run_criterion, CriterionReport, ValidationOptions, CRITERIA, DEFAULT_SEED};
use perpliq::{ModelParams, PayoffSpec};
use serde::Serialize;

use super::Context;
use crate::error::{CliError, CliResult};
use crate::output::Provenance;

#[derive(Serialize)]
struct CheckRecord<'a> {
    name: &'a str,
    passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    detail: Option<&'a str>,
}

#[derive(Serialize)]
struct CriterionRecord<'a> {
    id: u8,
    title: &'a str,
    passed: bool,
    checks: Vec<CheckRecord<'a>>,
}

#[derive(Serialize)]
struct Report<'a> {
    seed: u64,
    passed: bool,
    criteria: Vec<CriterionRecord<'a>>,
}

// Wall-clock details are left out of the JSON so reruns produce identical files.
fn record(r: &CriterionReport) -> CriterionRecord<'_> {
    CriterionRecord {
        id: r.id,
        title: &r.title,
        passed: r.passed,
        checks: r
            .checks
            .iter()
            .map(|c| CheckRecord {
                name: &c.name,
                passed: c.passed,
                detail: (c.name != "runtime").then_some(c.detail.as_str()),
            })
            .collect(),
    }
}

pub fn validate(ctx: &Context, only: &[u8]) -> CliResult<()> {
    let seed = ctx
        .overrides
        .seed
        .or(ctx.config.sim.and_then(|s| s.seed))
        .unwrap_or(DEFAULT_SEED);
    let ids: Vec<u8> = if !only.is_empty() {
        only.to_vec()
    } else {
        ctx.config.criteria.clone().unwrap_or_else(|| CRITERIA.to_vec())
    };
    if let Some(bad) = ids.iter().find(|id| !CRITERIA.contains(id)) {
        return Err(CliError::Config(format!("unknown criterion {bad}; expected 1 to {}", CRITERIA.len())));
    }
    let opts = ValidationOptions { seed };
    let mut reports = Vec::new();
    for id in ids {
        let r = run_criterion(id, &opts).expect("criterion ids are checked above");
        println!("{}", r.render());
        reports.push(r);
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    let report = Report {
        seed,
        passed: failed == 0,
        criteria: reports.iter().map(record).collect(),
    };
    let mut prov = Provenance::new("validate", &ModelParams::default(), &PayoffSpec::Identity);
    prov.seed = Some(seed);
    let mut art = ctx.artifacts("validate")?;
    art.json("validation.json", "pass/fail per acceptance criterion", &prov, &report)?;
    let dir = art.dir().to_path_buf();
    art.finish()?;
    println!("{} of {} criteria passed; wrote {}", reports.len() - failed, reports.len(), dir.display());
    if failed > 0 {
        Err(CliError::Validation(failed))
    } else {
        Ok(())
    }
}
