//! Cross-run summaries built from metric directories.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::run::{
    ATTACK_HEADER, ATTACK_SCHEMA, DETECTION_HEADER, DETECTION_SCHEMA, EPISODES_HEADER, EPISODES_SCHEMA,
    SUMMARY_HEADER, SUMMARY_SCHEMA,
};
use crate::CliError;

pub const GROUPS_SCHEMA: &str = "# schema: ldpfl/report_groups v1";
pub const TRACES_SCHEMA: &str = "# schema: ldpfl/gamma_traces v1";

/// Relative tolerance when checking stored summaries against recomputation.
const RECOMPUTE_TOL: f64 = 1e-9;

/// A CSV body after its schema line, as named columns.
struct Table {
    rows: Vec<BTreeMap<String, String>>,
}

fn read_table(path: &Path, schema: &str, header: &[&str]) -> Result<Table, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let (first, body) = text.split_once('\n').unwrap_or((text.as_str(), ""));
    if first != schema {
        return Err(CliError::Schema(format!(
            "{}: expected `{schema}`, found `{first}`",
            path.display()
        )));
    }
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let found: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    let missing: Vec<&&str> = header.iter().filter(|h| !found.iter().any(|f| f == *h)).collect();
    if !missing.is_empty() {
        return Err(CliError::Schema(format!("{}: missing columns {missing:?}", path.display())));
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))?;
        rows.push(found.iter().cloned().zip(rec.iter().map(str::to_string)).collect());
    }
    Ok(Table { rows })
}

fn field<'a>(row: &'a BTreeMap<String, String>, key: &str) -> &'a str {
    row.get(key).map_or("", String::as_str)
}

fn num(row: &BTreeMap<String, String>, key: &str, path: &Path) -> Result<f64, CliError> {
    field(row, key)
        .parse()
        .map_err(|_| CliError::Schema(format!("{}: `{key}` is not a number", path.display())))
}

fn opt_num(row: &BTreeMap<String, String>, key: &str, path: &Path) -> Result<Option<f64>, CliError> {
    if field(row, key).is_empty() {
        Ok(None)
    } else {
        num(row, key, path).map(Some)
    }
}

/// One run directory as read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub dir: PathBuf,
    pub label: String,
    pub attack: String,
    pub detector: String,
    pub final_val_loss: f64,
    pub d_acc: Option<f64>,
    pub gamma_trace: Vec<(usize, f64)>,
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= RECOMPUTE_TOL * a.abs().max(b.abs()).max(1e-300) || (a.is_nan() && b.is_nan())
}

/// Reads one run and checks its summary against the per-episode files.
pub fn read_run(dir: &Path) -> Result<RunRow, CliError> {
    let summary_path = dir.join("summary.csv");
    let summary = read_table(&summary_path, SUMMARY_SCHEMA, SUMMARY_HEADER)?;
    let [s] = summary.rows.as_slice() else {
        return Err(CliError::Schema(format!("{}: expected one row", summary_path.display())));
    };

    let ep_path = dir.join("episodes.csv");
    let episodes = read_table(&ep_path, EPISODES_SCHEMA, EPISODES_HEADER)?;
    let losses: Vec<f64> = episodes
        .rows
        .iter()
        .map(|r| num(r, "global_val_loss", &ep_path))
        .collect::<Result<_, _>>()?;
    let tail = num(s, "tail", &summary_path)? as usize;
    let k = tail.max(1).min(losses.len());
    let recomputed_final = if k == 0 {
        f64::NAN
    } else {
        losses[losses.len() - k..].iter().sum::<f64>() / k as f64
    };
    let final_val_loss = num(s, "final_val_loss", &summary_path)?;
    if !close(recomputed_final, final_val_loss) {
        return Err(CliError::Schema(format!(
            "{}: final_val_loss {final_val_loss} disagrees with episodes.csv ({recomputed_final})",
            dir.display()
        )));
    }

    let det_path = dir.join("detection.csv");
    let detection = read_table(&det_path, DETECTION_SCHEMA, DETECTION_HEADER)?;
    let d_acc = opt_num(s, "d_acc", &summary_path)?;
    if let Some(stored) = d_acc {
        // per-episode accuracy, then the mean over episodes
        let mut per: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
        for r in &detection.rows {
            let ep = num(r, "episode", &det_path)? as usize;
            let e = per.entry(ep).or_default();
            e.1 += 1;
            if field(r, "malicious") == field(r, "flagged") {
                e.0 += 1;
            }
        }
        let recomputed = if per.is_empty() {
            100.0
        } else {
            per.values().map(|(c, n)| 100.0 * *c as f64 / *n as f64).sum::<f64>() / per.len() as f64
        };
        if !close(recomputed, stored) {
            return Err(CliError::Schema(format!(
                "{}: d_acc {stored} disagrees with detection.csv ({recomputed})",
                dir.display()
            )));
        }
    }

    let att_path = dir.join("attack.csv");
    let attack = read_table(&att_path, ATTACK_SCHEMA, ATTACK_HEADER)?;
    let mut gamma_trace = Vec::new();
    for r in &attack.rows {
        if let Some(g) = opt_num(r, "gamma_t", &att_path)? {
            gamma_trace.push((num(r, "episode", &att_path)? as usize, g));
        }
    }

    Ok(RunRow {
        dir: dir.to_path_buf(),
        label: field(s, "label").to_string(),
        attack: field(s, "attack").to_string(),
        detector: field(s, "detector").to_string(),
        final_val_loss,
        d_acc,
        gamma_trace,
    })
}

/// Every directory under `roots` holding a `summary.csv`, sorted.
pub fn find_runs(roots: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), CliError> {
        if dir.join("summary.csv").is_file() {
            out.push(dir.to_path_buf());
        }
        for entry in fs::read_dir(dir).map_err(|e| CliError::io(dir, e))? {
            let path = entry.map_err(|e| CliError::io(dir, e))?.path();
            if path.is_dir() {
                walk(&path, out)?;
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    for root in roots {
        if !root.is_dir() {
            return Err(CliError::Usage(format!("{} is not a directory", root.display())));
        }
        walk(root, &mut out)?;
    }
    out.sort();
    out.dedup();
    Ok(out)
}

/// Runs that differ only in their seed, averaged.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupRow {
    pub group: String,
    pub runs: usize,
    pub mean_final_val_loss: f64,
    pub mean_d_acc: Option<f64>,
}

pub fn group_key(label: &str) -> String {
    match label.rsplit_once("/seed=") {
        Some((head, _)) => head.to_string(),
        None => label.to_string(),
    }
}

pub fn group(rows: &[RunRow]) -> Vec<GroupRow> {
    let mut groups: BTreeMap<String, Vec<&RunRow>> = BTreeMap::new();
    for r in rows {
        groups.entry(group_key(&r.label)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(group, rs)| {
            let n = rs.len() as f64;
            let accs: Vec<f64> = rs.iter().filter_map(|r| r.d_acc).collect();
            GroupRow {
                group,
                runs: rs.len(),
                mean_final_val_loss: rs.iter().map(|r| r.final_val_loss).sum::<f64>() / n,
                mean_d_acc: (!accs.is_empty()).then(|| accs.iter().sum::<f64>() / accs.len() as f64),
            }
        })
        .collect()
}

pub fn render_text(groups: &[GroupRow]) -> String {
    let width = groups.iter().map(|g| g.group.len()).max().unwrap_or(0).max(5);
    let mut s = format!("{:<width$}  {:>4}  {:>14}  {:>8}\n", "group", "runs", "final_val_loss", "d_acc");
    for g in groups {
        let acc = g.mean_d_acc.map_or("-".to_string(), |a| format!("{a:.2}"));
        let _ = writeln!(
            s,
            "{:<width$}  {:>4}  {:>14.6}  {:>8}",
            g.group, g.runs, g.mean_final_val_loss, acc
        );
    }
    s
}

pub fn groups_csv(groups: &[GroupRow]) -> Vec<u8> {
    let mut out = format!("{GROUPS_SCHEMA}\n").into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(["group", "runs", "mean_final_val_loss", "mean_d_acc"])
            .expect("in-memory write");
        for g in groups {
            w.write_record([
                g.group.clone(),
                g.runs.to_string(),
                g.mean_final_val_loss.to_string(),
                g.mean_d_acc.map(|a| a.to_string()).unwrap_or_default(),
            ])
            .expect("in-memory write");
        }
        w.flush().expect("in-memory flush");
    }
    out
}

pub fn traces_csv(rows: &[RunRow]) -> Vec<u8> {
    let mut out = format!("{TRACES_SCHEMA}\n").into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(["label", "episode", "gamma_t"]).expect("in-memory write");
        for r in rows {
            for (ep, g) in &r.gamma_trace {
                w.write_record([r.label.clone(), ep.to_string(), g.to_string()])
                    .expect("in-memory write");
            }
        }
        w.flush().expect("in-memory flush");
    }
    out
}

/// Reads every run under `roots`; writes the grouped table and γ traces to
/// `out` when given.
pub fn report(roots: &[PathBuf], out: Option<&Path>) -> Result<(Vec<RunRow>, Vec<GroupRow>), CliError> {
    let rows = find_runs(roots)?
        .iter()
        .map(|d| read_run(d))
        .collect::<Result<Vec<_>, _>>()?;
    let groups = group(&rows);
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        for (name, bytes) in [
            ("report_groups.csv", groups_csv(&groups)),
            ("gamma_traces.csv", traces_csv(&rows)),
            ("report.txt", render_text(&groups).into_bytes()),
        ] {
            let p = dir.join(name);
            fs::write(&p, bytes).map_err(|e| CliError::io(&p, e))?;
        }
    }
    Ok((rows, groups))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn group_key_strips_the_seed() {
        assert_eq!(group_key("norm/beta1=1/m=3/rmd/seed=4"), "norm/beta1=1/m=3/rmd");
        assert_eq!(group_key("plain"), "plain");
    }

    #[test]
    fn empty_run_set_gives_an_empty_table() {
        let groups = group(&[]);
        assert!(groups.is_empty());
        assert_eq!(render_text(&groups).lines().count(), 1);
        let csv = String::from_utf8(groups_csv(&groups)).unwrap();
        assert_eq!(csv.lines().count(), 2);
    }

    #[test]
    fn identical_runs_give_identical_rows() {
        let row = |dir: &str| RunRow {
            dir: PathBuf::from(dir),
            label: "x/seed=1".into(),
            attack: "none".into(),
            detector: "off".into(),
            final_val_loss: 0.25,
            d_acc: Some(90.0),
            gamma_trace: vec![],
        };
        let a = group(&[row("a")]);
        let b = group(&[row("b")]);
        assert_eq!(a, b);
        let both = group(&[row("a"), row("b")]);
        assert_eq!(both[0].runs, 2);
        assert_eq!(both[0].mean_final_val_loss, 0.25);
    }
}
