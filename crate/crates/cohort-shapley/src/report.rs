//! Deterministic table and histogram emission.
//!
//! Machine-readable files carry 17 significant digits so every value
//! round-trips; orderings are fixed (target, then feature; configured group
//! order) so reruns are byte-identical.

use std::io::{self, Write};

use crate::aggregate::GroupAggregate;
use crate::bootstrap::FeatureSummary;
use crate::error::{Error, Result};
use crate::shapley::{Method, ShapleyAttribution};

/// Full-precision float formatting for machine-readable files.
pub fn format_full(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.16e}")
    }
}

/// Compact formatting for human-facing tables.
pub fn format_human(x: f64) -> String {
    format!("{x:.4}")
}

fn method_fields(m: &Method) -> (&'static str, String, String, Option<&[f64]>) {
    match m {
        Method::Exact => ("exact", String::new(), String::new(), None),
        Method::Mc {
            n_perms,
            seed,
            stderr,
        } => ("mc", n_perms.to_string(), seed.to_string(), Some(stderr)),
    }
}

/// One row per (target, feature):
/// `target_id,feature,phi,nu_empty,nu_full,method,n_perms,seed,stderr`.
pub fn write_attributions_csv<W: Write>(
    mut w: W,
    attrs: &[ShapleyAttribution],
    feature_names: &[String],
) -> io::Result<()> {
    writeln!(
        w,
        "target_id,feature,phi,nu_empty,nu_full,method,n_perms,seed,stderr"
    )?;
    for attr in attrs {
        let (method, n_perms, seed, stderr) = method_fields(&attr.method);
        let target = attr.target.map(|t| t.to_string()).unwrap_or_default();
        for (j, name) in feature_names.iter().enumerate() {
            let se = stderr.map(|s| format_full(s[j])).unwrap_or_default();
            writeln!(
                w,
                "{target},{name},{},{},{},{method},{n_perms},{seed},{se}",
                format_full(attr.phi[j]),
                format_full(attr.nu_empty),
                format_full(attr.nu_full),
            )?;
        }
    }
    Ok(())
}

/// Same records as the CSV, one JSON object per line.
pub fn write_attributions_jsonl<W: Write>(
    mut w: W,
    attrs: &[ShapleyAttribution],
    feature_names: &[String],
) -> io::Result<()> {
    for attr in attrs {
        let (method, n_perms, seed, stderr) = method_fields(&attr.method);
        for (j, name) in feature_names.iter().enumerate() {
            let mut obj = serde_json::Map::new();
            obj.insert("target_id".into(), attr.target.into());
            obj.insert("feature".into(), name.as_str().into());
            obj.insert("phi".into(), attr.phi[j].into());
            obj.insert("nu_empty".into(), attr.nu_empty.into());
            obj.insert("nu_full".into(), attr.nu_full.into());
            obj.insert("method".into(), method.into());
            obj.insert("n_perms".into(), n_perms.parse::<u64>().ok().into());
            obj.insert("seed".into(), seed.parse::<u64>().ok().into());
            obj.insert("stderr".into(), stderr.map(|s| s[j]).into());
            writeln!(w, "{}", serde_json::Value::Object(obj))?;
        }
    }
    Ok(())
}

/// `group,count,feature,mean_phi` rows in configured group order.
pub fn write_groups_csv<W: Write>(
    mut w: W,
    aggregates: &[GroupAggregate],
    feature_names: &[String],
) -> io::Result<()> {
    writeln!(w, "group,count,feature,mean_phi")?;
    for agg in aggregates {
        for (j, name) in feature_names.iter().enumerate() {
            writeln!(
                w,
                "{},{},{name},{}",
                agg.name,
                agg.count,
                format_full(agg.mean_phi[j])
            )?;
        }
    }
    Ok(())
}

/// `series,feature,mean,sd,q...` rows.
pub fn write_bootstrap_summary_csv<W: Write>(
    mut w: W,
    summaries: &[FeatureSummary],
    feature_names: &[String],
    quantiles: &[f64],
) -> io::Result<()> {
    let qcols: Vec<String> = quantiles.iter().map(|q| format!("q{q}")).collect();
    writeln!(w, "series,feature,mean,sd,{}", qcols.join(","))?;
    for s in summaries {
        let qvals: Vec<String> = s.quantiles.iter().map(|&(_, v)| format_full(v)).collect();
        writeln!(
            w,
            "{},{},{},{},{}",
            s.series,
            feature_names[s.feature],
            format_full(s.mean),
            format_full(s.sd),
            qvals.join(",")
        )?;
    }
    Ok(())
}

/// Violin polylines as a JSON array of `{series, feature, points}`.
pub fn write_violins_json<W: Write>(
    mut w: W,
    summaries: &[FeatureSummary],
    feature_names: &[String],
) -> io::Result<()> {
    let arr: Vec<serde_json::Value> = summaries
        .iter()
        .map(|s| {
            serde_json::json!({
                "series": s.series,
                "feature": feature_names[s.feature],
                "mean": s.mean,
                "sd": s.sd,
                "points": s.violin.iter().map(|&(v, d)| vec![v, d]).collect::<Vec<_>>(),
            })
        })
        .collect();
    writeln!(w, "{}", serde_json::Value::Array(arr))
}

/// Fixed-width histogram bins aligned at zero, one count column per group.
#[derive(Clone, Debug)]
pub struct Histogram {
    pub bin_width: f64,
    /// Index of the first bin; bin `k` covers `[k*w, (k+1)*w)`.
    pub first_bin: i64,
    pub groups: Vec<String>,
    /// `counts[bin][group]`.
    pub counts: Vec<Vec<u64>>,
}

/// Bins one value series per named group. Bin edges are multiples of
/// `bin_width`, so zero is always an edge and group histograms overlay.
pub fn histogram(values_by_group: &[(String, Vec<f64>)], bin_width: f64) -> Result<Histogram> {
    if !bin_width.is_finite() || bin_width <= 0.0 {
        return Err(Error::NonPositiveBinWidth);
    }
    if values_by_group.iter().all(|(_, v)| v.is_empty()) {
        return Err(Error::EmptySelection);
    }
    let bin_of = |v: f64| (v / bin_width).floor() as i64;
    let mut lo = i64::MAX;
    let mut hi = i64::MIN;
    for (_, vals) in values_by_group {
        for &v in vals {
            let b = bin_of(v);
            lo = lo.min(b);
            hi = hi.max(b);
        }
    }
    let nbins = (hi - lo + 1) as usize;
    let mut counts = vec![vec![0u64; values_by_group.len()]; nbins];
    for (g, (_, vals)) in values_by_group.iter().enumerate() {
        for &v in vals {
            counts[(bin_of(v) - lo) as usize][g] += 1;
        }
    }
    Ok(Histogram {
        bin_width,
        first_bin: lo,
        groups: values_by_group.iter().map(|(n, _)| n.clone()).collect(),
        counts,
    })
}

/// `bin_lo,bin_hi,count_<group>...` rows.
pub fn write_histogram_csv<W: Write>(mut w: W, h: &Histogram) -> io::Result<()> {
    let cols: Vec<String> = h.groups.iter().map(|g| format!("count_{g}")).collect();
    writeln!(w, "bin_lo,bin_hi,{}", cols.join(","))?;
    for (b, row) in h.counts.iter().enumerate() {
        let k = h.first_bin + b as i64;
        let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
        writeln!(
            w,
            "{},{},{}",
            format_full(k as f64 * h.bin_width),
            format_full((k + 1) as f64 * h.bin_width),
            cells.join(",")
        )?;
    }
    Ok(())
}
