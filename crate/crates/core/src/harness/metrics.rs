//! Metrics CSV: one row per evaluation point.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const METRICS_HEADER: &str =
    "step,eval_mean,eval_std,demo_reward_mean,samp_reward_mean,critic_loss,actor_loss,disc_loss,alpha,wall_time_s";

/// Missing values (nothing was trained yet, or the quantity does not exist
/// for the algorithm) are written as empty cells.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsRow {
    pub step: u64,
    pub eval_mean: f64,
    pub eval_std: f64,
    pub demo_reward_mean: Option<f64>,
    pub samp_reward_mean: Option<f64>,
    pub critic_loss: Option<f64>,
    pub actor_loss: Option<f64>,
    pub disc_loss: Option<f64>,
    pub alpha: Option<f64>,
    pub wall_time_s: f64,
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn metrics_to_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.step,
            r.eval_mean,
            r.eval_std,
            cell(r.demo_reward_mean),
            cell(r.samp_reward_mean),
            cell(r.critic_loss),
            cell(r.actor_loss),
            cell(r.disc_loss),
            cell(r.alpha),
            r.wall_time_s
        );
    }
    out
}

pub fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    std::fs::write(path, metrics_to_csv(rows)).map_err(|e| Error::io(path, e))
}

pub fn parse_metrics(text: &str, path: &Path) -> Result<Vec<MetricsRow>> {
    let corrupt = |reason: String| Error::Corrupt {
        path: path.to_path_buf(),
        reason,
    };
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(METRICS_HEADER) {
        return Err(corrupt("missing or unexpected header".into()));
    }
    let mut rows: Vec<MetricsRow> = Vec::new();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 10 {
            return Err(corrupt(format!(
                "row {}: expected 10 fields, got {}",
                i + 1,
                f.len()
            )));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| corrupt(format!("row {}: bad number `{s}`", i + 1)))
        };
        let opt = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                num(s).map(Some)
            }
        };
        let step = f[0]
            .parse::<u64>()
            .map_err(|_| corrupt(format!("row {}: bad step `{}`", i + 1, f[0])))?;
        if rows.last().is_some_and(|r| r.step > step) {
            return Err(corrupt(format!("row {}: step decreases", i + 1)));
        }
        rows.push(MetricsRow {
            step,
            eval_mean: num(f[1])?,
            eval_std: num(f[2])?,
            demo_reward_mean: opt(f[3])?,
            samp_reward_mean: opt(f[4])?,
            critic_loss: opt(f[5])?,
            actor_loss: opt(f[6])?,
            disc_loss: opt(f[7])?,
            alpha: opt(f[8])?,
            wall_time_s: num(f[9])?,
        });
    }
    Ok(rows)
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_metrics(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn opt_f64() -> impl Strategy<Value = Option<f64>> {
        prop::option::of(-1e6f64..1e6)
    }

    proptest! {
        #[test]
        fn csv_round_trip(rows in prop::collection::vec((0u64..10, -1e3f64..0.0, 0.0f64..10.0, opt_f64(), opt_f64(), opt_f64(), opt_f64()), 0..6)) {
            let mut step = 0;
            let rows: Vec<MetricsRow> = rows.into_iter().map(|(ds, m, s, d, sm, c, a)| {
                step += ds * 5000;
                MetricsRow { step, eval_mean: m, eval_std: s, demo_reward_mean: d, samp_reward_mean: sm, critic_loss: c, actor_loss: a, disc_loss: None, alpha: Some(0.2), wall_time_s: 0.0 }
            }).collect();
            let text = metrics_to_csv(&rows);
            prop_assert_eq!(parse_metrics(&text, Path::new("m.csv")).unwrap(), rows);
        }
    }

    #[test]
    fn malformed_files_are_rejected() {
        let p = Path::new("m.csv");
        assert!(parse_metrics("step,eval\n", p).is_err());
        let bad = format!("{METRICS_HEADER}\n5000,1,2,3\n");
        assert!(parse_metrics(&bad, p).is_err());
        let dec = format!("{METRICS_HEADER}\n10,0,0,,,,,,,0\n5,0,0,,,,,,,0\n");
        assert!(parse_metrics(&dec, p).is_err());
        let ok = format!("{METRICS_HEADER}\n5,0,0,,,,,,,0\n");
        assert_eq!(parse_metrics(&ok, p).unwrap().len(), 1);
    }
}
