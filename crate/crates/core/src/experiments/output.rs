use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_text;
use crate::rng::{label, stream};

use super::bootstrap::bootstrap_quantiles;
use super::config::BootstrapConfig;
use super::runner::ResultRow;

pub const CSV_HEADER: &str = "setting,d,n,seed,estimator,metric,value";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Render rows as CSV preceded by `# key=value` metadata lines.
pub fn rows_to_csv(rows: &[ResultRow], metadata: &[(String, String)]) -> String {
    let mut out = String::new();
    for (k, v) in metadata {
        out.push_str(&format!("# {k}={v}\n"));
    }
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            csv_field(&r.setting),
            r.d,
            r.n,
            r.seed,
            csv_field(&r.estimator),
            csv_field(&r.metric),
            r.value
        ));
    }
    out
}

pub fn emit_csv(rows: &[ResultRow], metadata: &[(String, String)], path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::Empty("result rows"));
    }
    write_text(path, &rows_to_csv(rows, metadata))
}

/// Parse CSV produced by [`rows_to_csv`], returning metadata and rows.
pub fn rows_from_csv(text: &str) -> Result<(Vec<(String, String)>, Vec<ResultRow>)> {
    let mut metadata = Vec::new();
    for line in text.lines() {
        let Some(rest) = line.strip_prefix('#') else { break };
        if let Some((k, v)) = rest.trim().split_once('=') {
            metadata.push((k.to_string(), v.to_string()));
        }
    }
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::Parse(format!("unexpected header {:?}", header.join(","))));
    }
    let mut rows = Vec::new();
    for rec in reader.deserialize() {
        rows.push(rec?);
    }
    Ok((metadata, rows))
}

pub fn read_rows_csv(path: &Path) -> Result<(Vec<(String, String)>, Vec<ResultRow>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    rows_from_csv(&text)
}

/// Mean over repetitions of one (setting, d, n, estimator, metric) group,
/// with bootstrap quantiles of that mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub setting: String,
    pub d: usize,
    pub n: usize,
    pub estimator: String,
    pub metric: String,
    pub count: usize,
    pub mean: f64,
    pub quantiles: Vec<f64>,
}

/// Group rows and bootstrap each group's mean. NaN values (failed cells)
/// are left out; groups with no finite value are dropped. Each group's
/// resampling stream is derived from `seed` and the group key.
pub fn summarize(rows: &[ResultRow], boot: &BootstrapConfig, seed: u64) -> Result<Vec<SummaryRow>> {
    let mut groups: BTreeMap<(String, usize, String, String, usize), Vec<f64>> = BTreeMap::new();
    for r in rows {
        if r.value.is_finite() {
            groups
                .entry((r.setting.clone(), r.d, r.estimator.clone(), r.metric.clone(), r.n))
                .or_default()
                .push(r.value);
        }
    }
    let mut out = Vec::with_capacity(groups.len());
    for ((setting, d, estimator, metric, n), values) in groups {
        let mut rng = stream(
            seed,
            &[label("bootstrap"), label(&setting), d as u64, n as u64, label(&estimator), label(&metric)],
        );
        let quantiles = bootstrap_quantiles(&values, boot.resamples, &boot.quantiles, &mut rng)?;
        out.push(SummaryRow {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            count: values.len(),
            setting,
            d,
            n,
            estimator,
            metric,
            quantiles,
        });
    }
    Ok(out)
}

pub fn summary_to_csv(rows: &[SummaryRow], qs: &[f64]) -> String {
    let mut out = String::from("setting,d,n,estimator,metric,count,mean");
    for q in qs {
        out.push_str(&format!(",q{q}"));
    }
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}",
            csv_field(&r.setting),
            r.d,
            r.n,
            csv_field(&r.estimator),
            csv_field(&r.metric),
            r.count,
            r.mean
        ));
        for v in &r.quantiles {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

/// Look up a metadata value.
pub fn metadata_value<'a>(metadata: &'a [(String, String)], key: &str) -> Option<&'a str> {
    metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}
