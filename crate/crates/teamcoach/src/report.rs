//! Summary tables over a finished benchmark and inference run.

use std::fmt::Write as _;
use std::path::Path;

use teamcoach_core::domains::Domain;
use teamcoach_core::intervention::{objective, EpisodeMetrics, StrategyConfig, StrategyRun};

use crate::error::{Error, Result};
use crate::files::{read_csv, write_csv};
use crate::pipeline::paths;
use crate::rows::{AccuracyRow, AccuracySummaryRow, EpisodeRow, StrategyRow};

/// Checks `J = reward − cost · interventions` on every row; `Ok` carries the
/// number of rows checked.
pub fn audit_objectives(path: &Path, rows: &[EpisodeRow]) -> Result<usize> {
    for (i, r) in rows.iter().enumerate() {
        let expected = objective(r.reward, r.interventions, r.cost);
        if r.objective.to_bits() != expected.to_bits() {
            return Err(Error::ObjectiveMismatch {
                path: path.to_path_buf(),
                // Line 1 holds the header.
                row: i as u64 + 2,
                found: r.objective,
                expected,
            });
        }
    }
    Ok(rows.len())
}

/// Regroups episode rows by strategy, in order of first appearance.
pub fn group_runs(rows: &[EpisodeRow]) -> Vec<StrategyRun> {
    let mut runs: Vec<StrategyRun> = Vec::new();
    for r in rows {
        let cfg: StrategyConfig = r.config();
        let metrics = EpisodeMetrics {
            seed: r.seed,
            reward: r.reward,
            interventions: r.interventions,
            objective: r.objective,
            length: r.length,
        };
        match runs.iter_mut().find(|run| run.config == cfg) {
            Some(run) => run.episodes.push(metrics),
            None => runs.push(StrategyRun {
                config: cfg,
                episodes: vec![metrics],
            }),
        }
    }
    runs
}

/// Writes `report/strategies.csv` (best mean objective first),
/// `report/accuracy.csv` and the text report.
pub fn write_report(dir: &Path, domain: &Domain) -> Result<Vec<String>> {
    let episodes_path = dir.join(paths::EPISODES);
    let episodes: Vec<EpisodeRow> = read_csv(&episodes_path)?;
    let audited = audit_objectives(&episodes_path, &episodes)?;
    let name = domain.kind().to_string();
    let mut strategies: Vec<StrategyRow> = group_runs(&episodes)
        .iter()
        .map(|run| StrategyRow::new(&name, &run.summary()))
        .collect();
    strategies.sort_by(|a, b| b.objective_mean.total_cmp(&a.objective_mean));

    let accuracy_rows: Vec<AccuracyRow> = read_csv(&dir.join(paths::ACCURACY))?;
    let accuracy = AccuracySummaryRow::aggregate(&accuracy_rows, domain);

    write_csv(&dir.join(paths::REPORT_STRATEGIES), &strategies)?;
    write_csv(&dir.join(paths::REPORT_ACCURACY), &accuracy)?;
    let text = render(&name, &accuracy, &strategies, audited);
    let text_path = dir.join(paths::REPORT_TEXT);
    std::fs::write(&text_path, text).map_err(|source| Error::Io {
        path: text_path,
        source,
    })?;
    Ok(vec![
        paths::REPORT_STRATEGIES.into(),
        paths::REPORT_ACCURACY.into(),
        paths::REPORT_TEXT.into(),
    ])
}

fn strategy_label(r: &StrategyRow) -> String {
    use teamcoach_core::intervention::{StrategyKind, Wrapper};
    match (r.strategy, r.wrapper) {
        (StrategyKind::Value, Wrapper::Confidence) => format!("value confidence d={} th={}", r.delta, r.theta),
        (StrategyKind::Value, w) => format!("value {w} d={}", r.delta),
        (kind, Wrapper::Deterministic) => kind.to_string(),
        (kind, w) => format!("{kind} {w}"),
    }
}

pub fn render(domain: &str, accuracy: &[AccuracySummaryRow], strategies: &[StrategyRow], audited: usize) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "domain: {domain}");
    let _ = writeln!(out);
    let _ = writeln!(out, "inference accuracy (mean ± s.e., quartiles)");
    for a in accuracy {
        let _ = writeln!(
            out,
            "  {:<10} {:.3} ± {:.3}   [{:.3} {:.3} {:.3}]   seeds {} episodes {}",
            a.setting, a.mean, a.std_err, a.q1, a.median, a.q3, a.training_seeds, a.episodes
        );
    }
    if let Some(a) = accuracy.first() {
        let _ = writeln!(out, "  random guess {:.3}", a.random_guess);
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "strategies by mean objective J (mean ± s.e. / median)");
    let _ = writeln!(
        out,
        "  {:<34} {:>22} {:>22} {:>22}",
        "strategy", "reward", "interventions", "J"
    );
    for s in strategies {
        let _ = writeln!(
            out,
            "  {:<34} {:>9.2} ± {:>5.2} /{:>7.2} {:>9.2} ± {:>5.2} /{:>7.2} {:>9.2} ± {:>5.2} /{:>7.2}",
            strategy_label(s),
            s.reward_mean,
            s.reward_se,
            s.reward_median,
            s.interventions_mean,
            s.interventions_se,
            s.interventions_median,
            s.objective_mean,
            s.objective_se,
            s.objective_median,
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "objective audit: J = reward - c * interventions holds on all {audited} episodes"
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use teamcoach_core::intervention::{StrategyKind, Wrapper};

    fn row(seed: u64, reward: f64, interventions: usize, cost: f64) -> EpisodeRow {
        EpisodeRow {
            domain: "tiny".into(),
            strategy: StrategyKind::Value,
            wrapper: Wrapper::Deterministic,
            delta: 1.0,
            theta: 0.0,
            cost,
            acceptance: 1.0,
            seed,
            reward,
            interventions,
            objective: objective(reward, interventions, cost),
            length: 4,
        }
    }

    #[test]
    fn audit_accepts_exact_objectives_and_names_bad_rows() {
        let mut rows = vec![row(0, -3.0, 2, 1.0), row(1, 0.1, 3, 0.7)];
        assert_eq!(audit_objectives(Path::new("e.csv"), &rows).unwrap(), 2);
        rows[1].objective += 1e-12;
        match audit_objectives(Path::new("e.csv"), &rows) {
            Err(Error::ObjectiveMismatch { row, .. }) => assert_eq!(row, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn grouping_keeps_order_and_members() {
        let mut other = row(5, 1.0, 0, 1.0);
        other.strategy = StrategyKind::None;
        let rows = vec![row(0, -1.0, 1, 1.0), other, row(1, -2.0, 0, 1.0)];
        let runs = group_runs(&rows);
        assert_eq!(runs.len(), 2);
        assert_eq!(runs[0].episodes.len(), 2);
        assert_eq!(runs[1].config.kind, StrategyKind::None);
    }
}
