//! Sectioned plain-text run configuration.
//!
//! One file drives the whole pipeline: dataset schema, per-feature
//! similarity rules, response construction, estimation mode, groups,
//! bootstrap settings, and output options. Sections are `[name]` headers
//! with `key = value` entries; `#` and `;` start comments. Unknown sections
//! and keys are rejected with the offending line number.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use crate::aggregate::{GroupDef, GroupTerm};
use crate::attribute::EstimationMode;
use crate::dataset::{ColumnRole, TableSchema};
use crate::error::{Error, Result};
use crate::response::ResponseKind;
use crate::similarity::SimilarityRule;

#[derive(Clone, Debug, PartialEq)]
pub enum TargetSel {
    All,
    List(Vec<usize>),
}

#[derive(Clone, Debug)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub seed: u64,
    pub quantiles: Vec<f64>,
    /// Group names to track (defaults to every defined group).
    pub groups: Vec<String>,
    /// Individual targets to track.
    pub targets: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct HistogramConfig {
    pub bin_width: f64,
    /// Feature names whose levels split the histogram into overlaid groups.
    pub group_by: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct SobolConfig {
    pub grid: PathBuf,
    pub pickfreeze_n: Option<usize>,
    pub pickfreeze_seed: u64,
}

/// Fully validated run configuration.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub dataset_path: PathBuf,
    pub schema: TableSchema,
    /// Similarity rule per feature column name (data-file order).
    pub similarity: Vec<(String, SimilarityRule)>,
    pub response: ResponseKind,
    pub mode_kind: ModeKind,
    pub n_perms: usize,
    pub seed: u64,
    pub threads: usize,
    pub targets: TargetSel,
    pub out_dir: PathBuf,
    pub svg: bool,
    pub groups: Vec<GroupDef>,
    pub condition: Option<Vec<GroupTerm>>,
    pub bootstrap: Option<BootstrapConfig>,
    pub histogram: Option<HistogramConfig>,
    pub sobol: Option<SobolConfig>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeKind {
    Exact,
    MonteCarlo,
}

impl RunConfig {
    pub fn estimation_mode(&self) -> EstimationMode {
        match self.mode_kind {
            ModeKind::Exact => EstimationMode::Exact,
            ModeKind::MonteCarlo => EstimationMode::MonteCarlo {
                n_perms: self.n_perms,
                seed: self.seed,
            },
        }
    }
}

struct Entry {
    key: String,
    value: String,
    line: usize,
    used: std::cell::Cell<bool>,
}

struct Section {
    name: String,
    line: usize,
    entries: Vec<Entry>,
}

impl Section {
    fn get(&self, key: &str) -> Option<&Entry> {
        let e = self.entries.iter().find(|e| e.key == key);
        if let Some(e) = e {
            e.used.set(true);
        }
        e
    }

    fn require(&self, key: &str) -> Result<&Entry> {
        self.get(key).ok_or_else(|| Error::Config {
            line: Some(self.line),
            msg: format!("section [{}] is missing key `{key}`", self.name),
        })
    }

    fn reject_unused(&self) -> Result<()> {
        for e in &self.entries {
            if !e.used.get() {
                return Err(Error::Config {
                    line: Some(e.line),
                    msg: format!("unknown key `{}` in section [{}]", e.key, self.name),
                });
            }
        }
        Ok(())
    }
}

fn parse_sections(text: &str) -> Result<Vec<Section>> {
    let mut sections: Vec<Section> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find(['#', ';']) {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(inner) = line.strip_prefix('[') {
            let name = inner.strip_suffix(']').ok_or(Error::Config {
                line: Some(line_no),
                msg: "unterminated section header".into(),
            })?;
            sections.push(Section {
                name: name.trim().to_string(),
                line: line_no,
                entries: Vec::new(),
            });
        } else if let Some(eq) = line.find('=') {
            let section = sections.last_mut().ok_or(Error::Config {
                line: Some(line_no),
                msg: "key outside any section".into(),
            })?;
            section.entries.push(Entry {
                key: line[..eq].trim().to_string(),
                value: line[eq + 1..].trim().to_string(),
                line: line_no,
                used: std::cell::Cell::new(false),
            });
        } else {
            return Err(Error::Config {
                line: Some(line_no),
                msg: format!("expected `key = value`, found `{line}`"),
            });
        }
    }
    Ok(sections)
}

fn bad(line: usize, msg: impl Into<String>) -> Error {
    Error::Config {
        line: Some(line),
        msg: msg.into(),
    }
}

fn parse_f64(e: &Entry) -> Result<f64> {
    e.value
        .parse()
        .map_err(|_| bad(e.line, format!("`{}` is not a number", e.value)))
}

fn parse_u64(e: &Entry) -> Result<u64> {
    e.value
        .parse()
        .map_err(|_| bad(e.line, format!("`{}` is not an integer", e.value)))
}

fn parse_usize(e: &Entry) -> Result<usize> {
    e.value
        .parse()
        .map_err(|_| bad(e.line, format!("`{}` is not an integer", e.value)))
}

fn parse_bool(e: &Entry) -> Result<bool> {
    match e.value.as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(bad(e.line, format!("`{other}` is not a boolean"))),
    }
}

fn parse_f64_list(e: &Entry) -> Result<Vec<f64>> {
    e.value
        .split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| bad(e.line, format!("`{}` is not a number", s.trim())))
        })
        .collect()
}

/// `exact` | `abs(d)` | `rel(d)` | `bins(e1,e2,...)`
fn parse_rule(e: &Entry) -> Result<SimilarityRule> {
    let v = e.value.as_str();
    if v == "exact" {
        return Ok(SimilarityRule::ExactMatch);
    }
    let call = |name: &str| -> Option<&str> {
        v.strip_prefix(name)
            .and_then(|rest| rest.strip_prefix('('))
            .and_then(|rest| rest.strip_suffix(')'))
    };
    if let Some(arg) = call("abs") {
        let delta: f64 = arg
            .trim()
            .parse()
            .map_err(|_| bad(e.line, format!("`{arg}` is not a number")))?;
        if delta.is_nan() || delta <= 0.0 {
            return Err(bad(e.line, "abs() window must be positive"));
        }
        return Ok(SimilarityRule::AbsWindow(delta));
    }
    if let Some(arg) = call("rel") {
        let delta: f64 = arg
            .trim()
            .parse()
            .map_err(|_| bad(e.line, format!("`{arg}` is not a number")))?;
        if delta.is_nan() || delta <= 0.0 {
            return Err(bad(e.line, "rel() window must be positive"));
        }
        return Ok(SimilarityRule::RelWindow(delta));
    }
    if let Some(args) = call("bins") {
        let edges: Vec<f64> = args
            .split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| bad(e.line, format!("`{}` is not a number", s.trim())))
            })
            .collect::<Result<_>>()?;
        if edges.len() < 2 {
            return Err(bad(e.line, "bins() needs at least two edges"));
        }
        if edges
            .windows(2)
            .any(|w| w[0].is_nan() || w[1].is_nan() || w[0] >= w[1])
        {
            return Err(bad(e.line, "bins() edges must be strictly ascending"));
        }
        return Ok(SimilarityRule::SharedBin(edges));
    }
    Err(bad(
        e.line,
        format!("unknown similarity rule `{v}` (expected exact, abs(d), rel(d), or bins(...))"),
    ))
}

/// `column=value` terms joined by `&`.
fn parse_terms(e: &Entry) -> Result<Vec<GroupTerm>> {
    e.value
        .split('&')
        .map(|part| {
            let part = part.trim();
            let eq = part
                .find('=')
                .ok_or_else(|| bad(e.line, format!("`{part}` is not `column=value`")))?;
            Ok(GroupTerm {
                column: part[..eq].trim().to_string(),
                value: part[eq + 1..].trim().to_string(),
            })
        })
        .collect()
}

/// Parses and validates a config file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text, path.parent().unwrap_or(Path::new(".")))
}

/// Parses config text; relative paths resolve against `base`.
pub fn parse_config(text: &str, base: &Path) -> Result<RunConfig> {
    let sections = parse_sections(text)?;
    let known = [
        "dataset",
        "response",
        "run",
        "output",
        "bootstrap",
        "condition",
        "histogram",
        "sobol",
    ];
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    for s in &sections {
        let base_name = s.name.split('.').next().unwrap_or("");
        if !known.contains(&s.name.as_str()) && !(base_name == "column" || base_name == "group") {
            return Err(bad(s.line, format!("unknown section [{}]", s.name)));
        }
        if known.contains(&s.name.as_str()) && !seen.insert(s.name.as_str()) {
            return Err(bad(s.line, format!("duplicate section [{}]", s.name)));
        }
    }
    let find = |name: &str| sections.iter().find(|s| s.name == name);

    // [dataset]
    let dataset = find("dataset").ok_or(Error::Config {
        line: None,
        msg: "missing [dataset] section".into(),
    })?;
    let rel: PathBuf = dataset.require("path")?.value.clone().into();
    let dataset_path = if rel.is_absolute() {
        rel
    } else {
        base.join(rel)
    };
    dataset.reject_unused()?;

    // [column.*]
    let mut schema = TableSchema::default();
    let mut similarity: Vec<(String, SimilarityRule)> = Vec::new();
    for s in sections.iter().filter(|s| s.name.starts_with("column.")) {
        let col_name = s.name["column.".len()..].to_string();
        if col_name.is_empty() {
            return Err(bad(s.line, "empty column name"));
        }
        if schema.columns.iter().any(|(n, _)| *n == col_name) {
            return Err(bad(
                s.line,
                format!("duplicate section [column.{col_name}]"),
            ));
        }
        let role_entry = s.require("role")?;
        match role_entry.value.as_str() {
            "feature" => {
                let kind = s.require("kind")?;
                let bins = s.get("bins").map(parse_f64_list).transpose()?;
                if let Some(edges) = &bins {
                    if edges.len() < 2 {
                        return Err(bad(s.line, "bins needs at least two edges"));
                    }
                    if edges
                        .windows(2)
                        .any(|w| w[0].is_nan() || w[1].is_nan() || w[0] >= w[1])
                    {
                        return Err(bad(s.line, "bins edges must be strictly ascending"));
                    }
                }
                let role = match kind.value.as_str() {
                    "categorical" => {
                        if bins.is_some() {
                            return Err(bad(kind.line, "bins only apply to continuous columns"));
                        }
                        ColumnRole::CategoricalFeature
                    }
                    "continuous" => ColumnRole::ContinuousFeature { bins: bins.clone() },
                    other => {
                        return Err(bad(
                            kind.line,
                            format!("unknown kind `{other}` (expected categorical or continuous)"),
                        ))
                    }
                };
                let rule = match s.get("rule") {
                    Some(e) => {
                        let rule = parse_rule(e)?;
                        if bins.is_some() && rule != SimilarityRule::ExactMatch {
                            return Err(bad(
                                e.line,
                                format!(
                                    "column `{col_name}` is binned at load; only rule = exact applies"
                                ),
                            ));
                        }
                        if role == ColumnRole::CategoricalFeature
                            && rule != SimilarityRule::ExactMatch
                        {
                            return Err(bad(
                                e.line,
                                format!(
                                    "column `{col_name}` is categorical; only rule = exact applies"
                                ),
                            ));
                        }
                        rule
                    }
                    None => SimilarityRule::ExactMatch,
                };
                schema.columns.push((col_name.clone(), role));
                similarity.push((col_name, rule));
            }
            "response" => {
                let name = s
                    .get("name")
                    .map(|e| e.value.clone())
                    .unwrap_or_else(|| col_name.clone());
                let threshold = s.get("threshold").map(parse_f64).transpose()?;
                schema
                    .columns
                    .push((col_name, ColumnRole::Response { name, threshold }));
            }
            "ignore" => {
                schema.columns.push((col_name, ColumnRole::Ignore));
            }
            other => {
                return Err(bad(
                    role_entry.line,
                    format!("unknown role `{other}` (expected feature, response, or ignore)"),
                ))
            }
        }
        s.reject_unused()?;
    }
    if schema.columns.is_empty() {
        return Err(Error::Config {
            line: None,
            msg: "no [column.*] sections declared".into(),
        });
    }

    // [response]
    let response = match find("response") {
        None => ResponseKind::Raw("y".into()),
        Some(s) => {
            let kind = s.require("kind")?;
            let r = match kind.value.as_str() {
                "raw" => ResponseKind::Raw(s.require("column")?.value.clone()),
                "residual" => ResponseKind::Residual,
                "fp" => ResponseKind::FalsePositive,
                "fn" => ResponseKind::FalseNegative,
                "threshold" => ResponseKind::Threshold {
                    column: s.require("column")?.value.clone(),
                    cut: parse_f64(s.require("cut")?)?,
                },
                other => {
                    return Err(bad(
                        kind.line,
                        format!(
                            "unknown response kind `{other}` (expected raw, residual, fp, fn, or threshold)"
                        ),
                    ))
                }
            };
            s.reject_unused()?;
            r
        }
    };

    // [run]
    let mut mode_kind = ModeKind::Exact;
    let mut n_perms = 10_000usize;
    let mut seed = 0u64;
    let mut threads = 0usize;
    let mut targets = TargetSel::All;
    if let Some(s) = find("run") {
        if let Some(e) = s.get("mode") {
            mode_kind = match e.value.as_str() {
                "exact" => ModeKind::Exact,
                "mc" => ModeKind::MonteCarlo,
                other => {
                    return Err(bad(
                        e.line,
                        format!("unknown mode `{other}` (expected exact or mc)"),
                    ))
                }
            };
        }
        if let Some(e) = s.get("n_perms") {
            n_perms = parse_usize(e)?;
            if n_perms == 0 {
                return Err(bad(e.line, "n_perms must be at least 1"));
            }
        }
        if let Some(e) = s.get("seed") {
            seed = parse_u64(e)?;
        }
        if let Some(e) = s.get("threads") {
            threads = parse_usize(e)?;
        }
        if let Some(e) = s.get("targets") {
            targets = if e.value == "all" {
                TargetSel::All
            } else {
                TargetSel::List(
                    e.value
                        .split(',')
                        .map(|t| {
                            t.trim().parse().map_err(|_| {
                                bad(e.line, format!("`{}` is not a row index", t.trim()))
                            })
                        })
                        .collect::<Result<_>>()?,
                )
            };
        }
        s.reject_unused()?;
    }

    // [output]
    let mut out_dir = PathBuf::from("out");
    let mut svg = false;
    if let Some(s) = find("output") {
        if let Some(e) = s.get("dir") {
            out_dir = e.value.clone().into();
        }
        if let Some(e) = s.get("svg") {
            svg = parse_bool(e)?;
        }
        s.reject_unused()?;
    }
    if out_dir.is_relative() {
        out_dir = base.join(out_dir);
    }

    // [group.*]
    let mut groups: Vec<GroupDef> = Vec::new();
    for s in sections.iter().filter(|s| s.name.starts_with("group.")) {
        let name = s.name["group.".len()..].to_string();
        if name.is_empty() {
            return Err(bad(s.line, "empty group name"));
        }
        if groups.iter().any(|g| g.name == name) {
            return Err(bad(s.line, format!("duplicate section [group.{name}]")));
        }
        let mut terms = Vec::new();
        for e in &s.entries {
            e.used.set(true);
            terms.push(GroupTerm {
                column: e.key.clone(),
                value: e.value.clone(),
            });
        }
        if terms.is_empty() {
            return Err(bad(s.line, format!("group `{name}` has no terms")));
        }
        groups.push(GroupDef { name, terms });
    }

    // [condition]
    let condition = match find("condition") {
        None => None,
        Some(s) => {
            let terms = parse_terms(s.require("where")?)?;
            s.reject_unused()?;
            Some(terms)
        }
    };

    // [bootstrap]
    let bootstrap = match find("bootstrap") {
        None => None,
        Some(s) => {
            let replicates = parse_usize(s.require("replicates")?)?;
            if replicates == 0 {
                return Err(bad(s.line, "replicates must be at least 1"));
            }
            let bseed = s.get("seed").map(parse_u64).transpose()?.unwrap_or(seed);
            let quantiles = s
                .get("quantiles")
                .map(parse_f64_list)
                .transpose()?
                .unwrap_or_else(|| vec![0.025, 0.975]);
            for (q, e) in quantiles.iter().zip(std::iter::repeat(s.line)) {
                if !(0.0..=1.0).contains(q) {
                    return Err(bad(e, format!("quantile {q} outside [0, 1]")));
                }
            }
            let bgroups: Vec<String> = match s.get("groups") {
                Some(e) => e
                    .value
                    .split(',')
                    .map(|g| g.trim().to_string())
                    .filter(|g| !g.is_empty())
                    .collect(),
                None => groups.iter().map(|g| g.name.clone()).collect(),
            };
            for g in &bgroups {
                if !groups.iter().any(|def| def.name == *g) {
                    return Err(bad(s.line, format!("bootstrap group `{g}` is not defined")));
                }
            }
            let btargets = match s.get("targets") {
                Some(e) => e
                    .value
                    .split(',')
                    .filter(|t| !t.trim().is_empty())
                    .map(|t| {
                        t.trim()
                            .parse()
                            .map_err(|_| bad(e.line, format!("`{}` is not a row index", t.trim())))
                    })
                    .collect::<Result<_>>()?,
                None => Vec::new(),
            };
            if bgroups.is_empty() && btargets.is_empty() {
                return Err(bad(
                    s.line,
                    "bootstrap needs at least one group or target to track",
                ));
            }
            s.reject_unused()?;
            Some(BootstrapConfig {
                replicates,
                seed: bseed,
                quantiles,
                groups: bgroups,
                targets: btargets,
            })
        }
    };

    // [histogram]
    let histogram = match find("histogram") {
        None => None,
        Some(s) => {
            let bin_width = parse_f64(s.require("bin_width")?)?;
            if bin_width.is_nan() || bin_width <= 0.0 {
                return Err(bad(s.line, "bin_width must be positive"));
            }
            let group_by = match s.get("group_by") {
                Some(e) => e
                    .value
                    .split(',')
                    .map(|g| g.trim().to_string())
                    .filter(|g| !g.is_empty())
                    .collect(),
                None => Vec::new(),
            };
            s.reject_unused()?;
            Some(HistogramConfig {
                bin_width,
                group_by,
            })
        }
    };

    // [sobol]
    let sobol = match find("sobol") {
        None => None,
        Some(s) => {
            let rel: PathBuf = s.require("grid")?.value.clone().into();
            let grid = if rel.is_absolute() {
                rel
            } else {
                base.join(rel)
            };
            let pickfreeze_n = s.get("pickfreeze_n").map(parse_usize).transpose()?;
            let pickfreeze_seed = s
                .get("pickfreeze_seed")
                .map(parse_u64)
                .transpose()?
                .unwrap_or(seed);
            s.reject_unused()?;
            Some(SobolConfig {
                grid,
                pickfreeze_n,
                pickfreeze_seed,
            })
        }
    };

    Ok(RunConfig {
        dataset_path,
        schema,
        similarity,
        response,
        mode_kind,
        n_perms,
        seed,
        threads,
        targets,
        out_dir,
        svg,
        groups,
        condition,
        bootstrap,
        histogram,
        sobol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = "\
[dataset]
path = data.csv

[column.x1]
role = feature
kind = categorical

[column.age]
role = feature
kind = continuous
bins = 0, 25, 46, 120

[column.score]
role = response
name = yhat
threshold = 5

[column.outcome]
role = response
name = y

[column.junk]
role = ignore

[response]
kind = residual

[run]
mode = exact
seed = 17
targets = all

[output]
dir = results

[group.young]
age = [0, 25)

[bootstrap]
replicates = 100
seed = 3
quantiles = 0.025, 0.975
";

    #[test]
    fn parses_full_config() {
        let cfg = parse_config(GOOD, Path::new("/tmp/x")).unwrap();
        assert_eq!(cfg.dataset_path, Path::new("/tmp/x/data.csv"));
        assert_eq!(cfg.schema.columns.len(), 5);
        assert_eq!(cfg.similarity.len(), 2);
        assert_eq!(cfg.response, ResponseKind::Residual);
        assert_eq!(cfg.seed, 17);
        assert_eq!(cfg.groups.len(), 1);
        let b = cfg.bootstrap.unwrap();
        assert_eq!(b.replicates, 100);
        assert_eq!(b.groups, vec!["young".to_string()]);
    }

    #[test]
    fn unknown_key_is_rejected_with_line() {
        let text =
            "[dataset]\npath = x.csv\nbogus = 1\n[column.a]\nrole = feature\nkind = categorical\n";
        let err = parse_config(text, Path::new(".")).unwrap_err();
        match err {
            Error::Config { line, msg } => {
                assert_eq!(line, Some(3));
                assert!(msg.contains("bogus"), "{msg}");
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn unknown_section_is_rejected() {
        let text = "[dataset]\npath = x.csv\n[column.a]\nrole = feature\nkind = categorical\n[mystery]\nx = 1\n";
        assert!(matches!(
            parse_config(text, Path::new(".")),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn negative_window_is_rejected_naming_line() {
        let text = "\
[dataset]
path = x.csv
[column.v]
role = feature
kind = continuous
rule = abs(-0.5)
";
        let err = parse_config(text, Path::new(".")).unwrap_err();
        match err {
            Error::Config { line, msg } => {
                assert_eq!(line, Some(6));
                assert!(msg.contains("positive"), "{msg}");
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn rule_variants_parse() {
        let text = "\
[dataset]
path = x.csv
[column.a]
role = feature
kind = continuous
rule = abs(0.5)
[column.b]
role = feature
kind = continuous
rule = rel(0.1)
[column.c]
role = feature
kind = continuous
rule = bins(0, 1, 2)
";
        let cfg = parse_config(text, Path::new(".")).unwrap();
        assert_eq!(cfg.similarity[0].1, SimilarityRule::AbsWindow(0.5));
        assert_eq!(cfg.similarity[1].1, SimilarityRule::RelWindow(0.1));
        assert_eq!(
            cfg.similarity[2].1,
            SimilarityRule::SharedBin(vec![0.0, 1.0, 2.0])
        );
    }

    #[test]
    fn condition_terms_parse() {
        let text = "\
[dataset]
path = x.csv
[column.race]
role = feature
kind = categorical
[column.y]
role = response
[condition]
where = y=0 & race=Black
";
        let cfg = parse_config(text, Path::new(".")).unwrap();
        let terms = cfg.condition.unwrap();
        assert_eq!(
            terms[0],
            GroupTerm {
                column: "y".into(),
                value: "0".into()
            }
        );
        assert_eq!(
            terms[1],
            GroupTerm {
                column: "race".into(),
                value: "Black".into()
            }
        );
    }
}
