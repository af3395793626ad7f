use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use freearm::walker::{TrialStats, WalkParams, WalkStats};
use serde::Serialize;

pub const CSV_COLUMNS: [&str; 10] = [
    "n",
    "target_links",
    "trials",
    "seed",
    "attempts_per_net_link",
    "units_per_link",
    "cs_per_link",
    "attempts_per_net_link_stderr",
    "units_per_link_stderr",
    "cs_per_link_stderr",
];

#[derive(Serialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Record<'a> {
    Trial {
        index: u64,
        #[serde(flatten)]
        stats: &'a TrialStats,
    },
    Aggregate {
        params: &'a WalkParams,
        #[serde(flatten)]
        stats: &'a WalkStats,
    },
}

fn json_lines(
    out: &mut impl Write,
    params: &WalkParams,
    trials: &[TrialStats],
    stats: &WalkStats,
) -> io::Result<()> {
    for (index, t) in (0u64..).zip(trials) {
        serde_json::to_writer(&mut *out, &Record::Trial { index, stats: t })?;
        out.write_all(b"\n")?;
    }
    serde_json::to_writer(&mut *out, &Record::Aggregate { params, stats })?;
    out.write_all(b"\n")
}

fn aggregate_csv(out: impl Write, params: &WalkParams, stats: &WalkStats) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    let est = [
        stats.attempts_per_net_link,
        stats.units_per_link,
        stats.cs_per_link,
    ];
    let mut row = vec![
        params.n.get().to_string(),
        params.target_links.to_string(),
        params.trials.to_string(),
        params.seed.to_string(),
    ];
    row.extend(est.iter().map(|e| e.mean.to_string()));
    row.extend(est.iter().map(|e| e.stderr.to_string()));
    w.write_record(&row)?;
    w.flush()?;
    Ok(())
}

/// Per-trial JSON lines closed by one aggregate line, or a single aggregate
/// CSV row when `path` ends in `.csv`.
pub fn write_records(
    path: &Path,
    params: &WalkParams,
    trials: &[TrialStats],
    stats: &WalkStats,
) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
    let mut out = BufWriter::new(File::create(path)?);
    if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
    {
        aggregate_csv(&mut out, params, stats)?;
    } else {
        json_lines(&mut out, params, trials, stats)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use freearm::walker::{aggregate, run_trials, Boundary, LinkedChainStep};
    use freearm::GateOrder;
    use serde_json::Value;

    fn sample() -> (WalkParams, Vec<TrialStats>, WalkStats) {
        let params = WalkParams {
            n: GateOrder::new(2).unwrap(),
            target_links: 5,
            trials: 3,
            seed: 1,
            max_steps: 1000,
            boundary: Boundary::Bulk,
        };
        let trials = run_trials(&LinkedChainStep { n: params.n }, &params).unwrap();
        let stats = aggregate(&trials).unwrap();
        (params, trials, stats)
    }

    #[test]
    fn json_lines_end_with_aggregate() {
        let (p, t, s) = sample();
        let mut buf = Vec::new();
        json_lines(&mut buf, &p, &t, &s).unwrap();
        let lines: Vec<Value> = String::from_utf8(buf)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[1]["record"], "trial");
        assert_eq!(lines[1]["index"], 1);
        assert_eq!(lines[1]["steps"], t[1].steps);
        assert_eq!(lines[3]["record"], "aggregate");
        assert_eq!(lines[3]["params"]["seed"], 1);
        assert_eq!(lines[3]["trials"], 3);
    }

    #[test]
    fn csv_has_documented_columns() {
        let (p, _, s) = sample();
        let mut buf = Vec::new();
        aggregate_csv(&mut buf, &p, &s).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_COLUMNS.join(","));
        assert!(lines.next().unwrap().starts_with("2,5,3,1,"));
    }
}
