//! SVG learning curves from metrics files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::config::RunConfig;
use super::metrics::{read_metrics, MetricsRow};
use crate::error::{Error, Result};
use crate::rollout::mean_std;

/// One curve: mean and spread over the runs sharing a label.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub steps: Vec<u64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Number of runs behind the curve; bands are drawn only above one.
    pub runs: usize,
}

/// Label for a metrics file: algorithm and wrapper setting from a
/// `config.txt` next to it, otherwise the file stem.
pub fn run_label(metrics_path: &Path) -> String {
    let cfg = metrics_path
        .parent()
        .map(|d| d.join("config.txt"))
        .filter(|p| p.is_file())
        .and_then(|p| RunConfig::load(&p).ok());
    match cfg {
        Some(c) => format!(
            "{} wrapper={}",
            c.algo,
            if c.absorbing_wrapper { "on" } else { "off" }
        ),
        None => metrics_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run".into()),
    }
}

/// Groups runs by label and averages `field` at each step over the runs
/// that report it. Labels keep their first-seen order.
pub fn aggregate(
    runs: &[(String, Vec<MetricsRow>)],
    field: fn(&MetricsRow) -> Option<f64>,
) -> Vec<Series> {
    let mut order: Vec<&str> = Vec::new();
    for (l, _) in runs {
        if !order.contains(&l.as_str()) {
            order.push(l);
        }
    }
    order
        .into_iter()
        .map(|label| {
            let mut by_step: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
            let group: Vec<_> = runs.iter().filter(|(l, _)| l == label).collect();
            for (_, rows) in &group {
                for r in rows {
                    if let Some(v) = field(r) {
                        by_step.entry(r.step).or_default().push(v);
                    }
                }
            }
            let mut s = Series {
                label: label.to_string(),
                steps: vec![],
                mean: vec![],
                std: vec![],
                runs: group.len(),
            };
            for (step, vals) in by_step {
                let (m, sd) = mean_std(&vals);
                s.steps.push(step);
                s.mean.push(m);
                s.std.push(sd);
            }
            s
        })
        .collect()
}

const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];
const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD_L: f64 = 70.0;
const PAD_R: f64 = 20.0;
const PAD_T: f64 = 30.0;
const PAD_B: f64 = 50.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Line chart with a shaded ±1 std band per series and an optional
/// horizontal reference line.
pub fn render_svg(
    title: &str,
    y_label: &str,
    series: &[Series],
    reference: Option<(&str, f64)>,
) -> String {
    let xs = series
        .iter()
        .flat_map(|s| s.steps.iter().map(|&x| x as f64));
    let (x_min, x_max) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| {
        (a.min(x), b.max(x))
    });
    let mut ys: Vec<f64> = series
        .iter()
        .flat_map(|s| s.mean.iter().zip(&s.std).flat_map(|(m, d)| [m - d, m + d]))
        .collect();
    ys.extend(reference.map(|r| r.1));
    let (mut y_min, mut y_max) = ys
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| {
            (a.min(y), b.max(y))
        });
    let (x_min, x_max) = if x_min.is_finite() {
        (x_min.min(0.0), x_max.max(x_min + 1.0))
    } else {
        (0.0, 1.0)
    };
    if !y_min.is_finite() {
        (y_min, y_max) = (0.0, 1.0);
    }
    if y_max - y_min < 1e-9 {
        y_min -= 0.5;
        y_max += 0.5;
    }
    let px = |x: f64| PAD_L + (x - x_min) / (x_max - x_min) * (W - PAD_L - PAD_R);
    let py = |y: f64| H - PAD_B - (y - y_min) / (y_max - y_min) * (H - PAD_T - PAD_B);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    let (x0, x1, y0, y1) = (px(x_min), px(x_max), py(y_min), py(y_max));
    let _ = writeln!(
        out,
        r#"<path d="M{x0:.1},{y1:.1} L{x0:.1},{y0:.1} L{x1:.1},{y0:.1}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let fx = x_min + (x_max - x_min) * i as f64 / 4.0;
        let fy = y_min + (y_max - y_min) * i as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            px(fx),
            y0 + 16.0,
            fx.round()
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.3}</text>"#,
            x0 - 6.0,
            py(fy) + 4.0,
            fy
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">environment steps</text>"#,
        (x0 + x1) / 2.0,
        H - 12.0
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        if s.steps.is_empty() {
            continue;
        }
        if s.runs > 1 {
            let upper = s
                .steps
                .iter()
                .zip(&s.mean)
                .zip(&s.std)
                .map(|((&x, m), d)| (px(x as f64), py(m + d)));
            let lower = s
                .steps
                .iter()
                .zip(&s.mean)
                .zip(&s.std)
                .rev()
                .map(|((&x, m), d)| (px(x as f64), py(m - d)));
            let band: Vec<String> = upper
                .chain(lower)
                .map(|(x, y)| format!("{x:.1},{y:.1}"))
                .collect();
            let _ = writeln!(
                out,
                r#"<polygon class="band" points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
                band.join(" ")
            );
        }
        let line: Vec<String> = s
            .steps
            .iter()
            .zip(&s.mean)
            .map(|(&x, &m)| format!("{:.1},{:.1}", px(x as f64), py(m)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline class="mean" data-label="{}" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            escape(&s.label),
            line.join(" ")
        );
        let ly = PAD_T + 14.0 * (i as f64 + 1.0);
        let _ = writeln!(
            out,
            r#"<rect x="{:.1}" y="{:.1}" width="10" height="10" fill="{color}"/>"#,
            x1 - 150.0,
            ly - 9.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{ly:.1}">{}</text>"#,
            x1 - 136.0,
            escape(&s.label)
        );
    }
    if series.iter().any(|s| s.runs > 1) {
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" fill="gray">shaded: mean ± 1 std over runs</text>"#,
            x0 + 4.0,
            PAD_T
        );
    }
    if let Some((name, v)) = reference {
        let y = py(v);
        let _ = writeln!(
            out,
            r#"<line class="reference" x1="{x0:.1}" y1="{y:.1}" x2="{x1:.1}" y2="{y:.1}" stroke="gray" stroke-dasharray="6 4"/>"#
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" fill="gray">{}</text>"#,
            x0 + 4.0,
            y - 4.0,
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Plotted values in long form: `plot,label,step,mean,std`.
pub fn series_csv(plots: &[(&str, &[Series])]) -> String {
    let mut out = String::from("plot,label,step,mean,std\n");
    for (plot, series) in plots {
        for s in *series {
            for i in 0..s.steps.len() {
                let _ = writeln!(
                    out,
                    "{plot},{},{},{},{}",
                    s.label, s.steps[i], s.mean[i], s.std[i]
                );
            }
        }
    }
    out
}

/// Reads the metrics files and writes `<stem>.svg` (evaluation return),
/// `<stem>_rewards.svg` (mean demo and sample rewards) and `<stem>.csv`.
/// Returns the written paths.
pub fn plot_runs(
    metrics: &[PathBuf],
    out_stem: &Path,
    expert_score: Option<f64>,
) -> Result<Vec<PathBuf>> {
    if metrics.is_empty() {
        return Err(Error::InvalidArgument("no metrics files given".into()));
    }
    let runs = metrics
        .iter()
        .map(|p| Ok((run_label(p), read_metrics(p)?)))
        .collect::<Result<Vec<_>>>()?;
    let scores = aggregate(&runs, |r| Some(r.eval_mean));
    let mut rewards = aggregate(&runs, |r| r.demo_reward_mean);
    for s in &mut rewards {
        s.label = format!("{} demo", s.label);
    }
    let mut samp = aggregate(&runs, |r| r.samp_reward_mean);
    for s in &mut samp {
        s.label = format!("{} sample", s.label);
    }
    rewards.extend(samp);
    rewards.retain(|s| !s.steps.is_empty());

    if let Some(dir) = out_stem.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let stem = out_stem.to_string_lossy();
    let files = [
        (
            PathBuf::from(format!("{stem}.svg")),
            render_svg(
                "Evaluation return",
                "mean return",
                &scores,
                expert_score.map(|v| ("expert", v)),
            ),
        ),
        (
            PathBuf::from(format!("{stem}_rewards.svg")),
            render_svg(
                "Learned rewards",
                "mean reward",
                &rewards,
                Some(("zero", 0.0)),
            ),
        ),
        (
            PathBuf::from(format!("{stem}.csv")),
            series_csv(&[("score", &scores), ("reward", &rewards)]),
        ),
    ];
    for (p, text) in &files {
        std::fs::write(p, text).map_err(|e| Error::io(p, e))?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(step: u64, v: f64, d: Option<f64>) -> MetricsRow {
        MetricsRow {
            step,
            eval_mean: v,
            demo_reward_mean: d,
            ..MetricsRow::default()
        }
    }

    #[test]
    fn aggregate_averages_per_label() {
        let runs = vec![
            (
                "a".to_string(),
                vec![row(10, 1.0, None), row(20, 2.0, None)],
            ),
            ("b".to_string(), vec![row(10, 5.0, None)]),
            ("a".to_string(), vec![row(10, 3.0, None)]),
        ];
        let s = aggregate(&runs, |r| Some(r.eval_mean));
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].label, "a");
        assert_eq!(s[0].steps, vec![10, 20]);
        assert_eq!(s[0].mean, vec![2.0, 2.0]);
        assert_eq!(s[0].std, vec![1.0, 0.0]);
        assert_eq!(s[1].mean, vec![5.0]);
        assert_eq!((s[0].runs, s[1].runs), (2, 1));
    }

    #[test]
    fn svg_is_well_formed_with_bands_and_reference() {
        let s = vec![Series {
            label: "dsac <x>".into(),
            steps: vec![0, 5, 10],
            mean: vec![-3.0, -2.0, -1.0],
            std: vec![0.5, 0.5, 0.2],
            runs: 3,
        }];
        let svg = render_svg("t", "y", &s, Some(("expert", -0.5)));
        let doc = roxmltree::Document::parse(&svg).unwrap();
        let count = |class: &str| {
            doc.descendants()
                .filter(|n| n.attribute("class") == Some(class))
                .count()
        };
        assert_eq!(count("mean"), 1);
        assert_eq!(count("band"), 1);
        assert_eq!(count("reference"), 1);
        let line = doc
            .descendants()
            .find(|n| n.attribute("class") == Some("mean"))
            .unwrap();
        assert_eq!(line.attribute("data-label"), Some("dsac <x>"));
        assert_eq!(line.attribute("points").unwrap().split(' ').count(), 3);
        roxmltree::Document::parse(&render_svg("empty", "y", &[], None)).unwrap();
        let single = vec![Series {
            runs: 1,
            ..s[0].clone()
        }];
        let svg = render_svg("t", "y", &single, None);
        let doc = roxmltree::Document::parse(&svg).unwrap();
        assert_eq!(
            doc.descendants()
                .filter(|n| n.attribute("class") == Some("band"))
                .count(),
            0
        );
    }

    #[test]
    fn plot_runs_writes_files_and_labels_from_config() {
        let dir = tempfile::tempdir().unwrap();
        let run = dir.path().join("seed_1");
        std::fs::create_dir_all(&run).unwrap();
        let cfg =
            RunConfig::from_text("env = point_goal_v1\nalgo = sqil\nabsorbing_wrapper = off\n")
                .unwrap();
        std::fs::write(run.join("config.txt"), cfg.to_text()).unwrap();
        let m = run.join("metrics.csv");
        super::super::metrics::write_metrics(
            &m,
            &[row(5, -4.0, Some(0.1)), row(10, -2.0, Some(0.2))],
        )
        .unwrap();
        assert_eq!(run_label(&m), "sqil wrapper=off");
        let files = plot_runs(&[m], &dir.path().join("out/curves"), Some(-1.0)).unwrap();
        assert_eq!(files.len(), 3);
        for f in &files[..2] {
            roxmltree::Document::parse(&std::fs::read_to_string(f).unwrap()).unwrap();
        }
        let csv = std::fs::read_to_string(&files[2]).unwrap();
        assert!(csv.contains("score,sqil wrapper=off,10,-2,0"));
        assert!(csv.contains("reward,sqil wrapper=off demo,5,0.1,0"));
    }
}
