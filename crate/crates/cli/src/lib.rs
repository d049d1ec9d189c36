//! Run orchestration behind the `mlosim` binary: single runs, seed/policy
//! sweeps, validation and run comparison.

use std::fs;
use std::io::BufWriter;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use mlosim_core::metrics::{
    self, build_reports, conservation_violations, flows_csv, links_csv, meta_csv, parse_flows_csv,
    parse_links_csv, parse_meta_csv, Reports, RunMeta, RunReports,
};
use mlosim_core::scenario::{parse_scenario, Scenario};
use mlosim_core::sim::run;
use mlosim_core::steering::PolicyKind;
use mlosim_core::trace::write_trace;

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_scenario(&text).map_err(|e| anyhow::anyhow!("{}:\n{e}", path.display()))
}

/// Parses `A..B` (inclusive).
pub fn parse_seed_range(s: &str) -> Result<RangeInclusive<u64>, String> {
    let (a, b) = s.split_once("..").ok_or_else(|| format!("expected A..B, got `{s}`"))?;
    let a: u64 = a.trim().parse().map_err(|_| format!("bad seed `{a}`"))?;
    let b: u64 = b.trim().parse().map_err(|_| format!("bad seed `{b}`"))?;
    if a > b {
        return Err(format!("empty seed range {a}..{b}"));
    }
    Ok(a..=b)
}

pub fn parse_policy(s: &str) -> Result<PolicyKind, String> {
    PolicyKind::from_name(s).ok_or_else(|| {
        let names: Vec<_> = PolicyKind::ALL.iter().map(|p| p.name()).collect();
        format!("unknown policy `{s}` (expected one of {})", names.join(", "))
    })
}

/// Runs one (scenario, seed) and writes `meta.csv`, `flows.csv`,
/// `links.csv` and optionally `trace.csv` into `out`.
pub fn run_to_dir(scenario: &Scenario, seed: u64, out: &Path, trace: bool) -> Result<Reports> {
    let output = run(scenario, seed)?;
    let reports = build_reports(&output.trace)?;
    let broken = conservation_violations(&reports);
    if !broken.is_empty() {
        bail!("conservation violated for flows {broken:?}");
    }
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let meta = RunMeta {
        fingerprint: scenario.fingerprint(),
        seed,
        policy: scenario.steering.policy.name().to_string(),
    };
    fs::write(out.join("meta.csv"), meta_csv(&meta))?;
    fs::write(out.join("flows.csv"), flows_csv(&reports.flows))?;
    fs::write(out.join("links.csv"), links_csv(&reports.links))?;
    if trace {
        let f = fs::File::create(out.join("trace.csv"))?;
        write_trace(BufWriter::new(f), &output.trace)?;
    }
    Ok(reports)
}

pub const SUMMARY_HEADER: &str = "policy,seed,flow,generated,delivered,dropped_retries,dropped_overflow,residual,\
deadline_misses,latency_mean_us,latency_p99_us,jitter_us";

pub fn run_dir(out: &Path, policy: PolicyKind, seed: u64) -> PathBuf {
    out.join(policy.name()).join(format!("seed-{seed}"))
}

/// Every (policy, seed) pair on up to `jobs` threads, then `summary.csv`.
pub fn sweep(
    scenario: &Scenario,
    seeds: RangeInclusive<u64>,
    policies: &[PolicyKind],
    out: &Path,
    jobs: usize,
    trace: bool,
) -> Result<PathBuf> {
    let tasks: Vec<(PolicyKind, u64)> = policies
        .iter()
        .flat_map(|&p| seeds.clone().map(move |s| (p, s)))
        .collect();
    let results: Mutex<Vec<Option<Result<Reports>>>> = Mutex::new((0..tasks.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, tasks.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(policy, seed)) = tasks.get(i) else { break };
                let s = scenario.clone().with_policy(policy);
                let r = run_to_dir(&s, seed, &run_dir(out, policy, seed), trace);
                results.lock().expect("no poisoned workers")[i] = Some(r);
            });
        }
    });
    let mut summary = format!("{SUMMARY_HEADER}\n");
    for ((policy, seed), r) in tasks.iter().zip(results.into_inner().expect("workers done")) {
        let reports = r.expect("every task ran").with_context(|| format!("{} seed {seed}", policy.name()))?;
        for f in &reports.flows {
            let l = f.latency;
            summary.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{:.3}\n",
                policy.name(),
                seed,
                f.flow,
                f.generated,
                f.delivered,
                f.dropped_retries,
                f.dropped_overflow,
                f.residual,
                f.deadline_misses,
                l.map_or("-".to_string(), |l| format!("{:.3}", l.mean)),
                l.map_or("-".to_string(), |l| l.p99.to_string()),
                f.jitter,
            ));
        }
    }
    let path = out.join("summary.csv");
    fs::write(&path, summary)?;
    Ok(path)
}

pub fn load_run(dir: &Path) -> Result<RunReports> {
    let read = |name: &str| {
        let p = dir.join(name);
        fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))
    };
    let at = |name: &str| format!("{}", dir.join(name).display());
    Ok(RunReports {
        meta: parse_meta_csv(&read("meta.csv")?).with_context(|| at("meta.csv"))?,
        reports: Reports {
            flows: parse_flows_csv(&read("flows.csv")?).with_context(|| at("flows.csv"))?,
            links: parse_links_csv(&read("links.csv")?).with_context(|| at("links.csv"))?,
        },
    })
}

pub fn compare_dirs(a: &Path, b: &Path) -> Result<String> {
    let deltas = metrics::compare_policies(&load_run(a)?, &load_run(b)?)?;
    Ok(metrics::compare_csv(&deltas))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_ranges_are_inclusive() {
        assert_eq!(parse_seed_range("1..10").unwrap().count(), 10);
        assert_eq!(parse_seed_range("4..4").unwrap().count(), 1);
        assert!(parse_seed_range("5..4").is_err());
        assert!(parse_seed_range("5").is_err());
    }

    #[test]
    fn policy_names() {
        assert_eq!(parse_policy("late_fifo"), Ok(PolicyKind::LateFifo));
        assert!(parse_policy("split").is_err());
    }
}
