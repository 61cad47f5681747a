//! Pipeline stages: ingest, similarity, attribution, aggregation,
//! bootstrap, Sobol' analysis, and deterministic file emission.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use cohort_shapley::anova::read_grid_csv;
use cohort_shapley::bootstrap::{bootstrap_attributions, summarize, BootstrapTask};
use cohort_shapley::config::TargetSel;
use cohort_shapley::report::{
    format_human, histogram, write_attributions_csv, write_attributions_jsonl,
    write_bootstrap_summary_csv, write_groups_csv, write_histogram_csv, write_violins_json,
};
use cohort_shapley::{
    aggregate_groups, all_targets, anova, attributions_for, exact_shapley, jansen_total,
    load_table, make_response, pick_freeze_closed, shapley_effects, sobol_closed, sobol_total,
    Dataset, Error, FeatureSet, GroupDef, IndependentSampler, ProductGrid, ResponseVector, Result,
    RunConfig, ShapleyAttribution, SimilaritySpec, TableOracle, ValueTable,
};

use crate::svg;

/// Loaded dataset with the per-feature rules and response resolved, after
/// any `[condition]` row restriction.
pub struct Prepared {
    pub ds: Dataset,
    pub spec: SimilaritySpec,
    pub resp: ResponseVector,
    pub targets: Vec<usize>,
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let file = File::open(&cfg.dataset_path)?;
    let ds = load_table(file, &cfg.schema)?;

    let ds = match &cfg.condition {
        None => ds,
        Some(terms) => {
            let sel = GroupDef {
                name: "condition".into(),
                terms: terms.clone(),
            };
            let keep = sel.members(&ds)?;
            ds.restrict(&keep)?
        }
    };

    let rules = ds
        .features()
        .iter()
        .map(|f| {
            cfg.similarity
                .iter()
                .find(|(name, _)| name == &f.name)
                .map(|(_, rule)| rule.clone())
                .ok_or_else(|| Error::Config {
                    line: None,
                    msg: format!("no similarity rule for feature `{}`", f.name),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    let spec = SimilaritySpec { rules };
    spec.validate(&ds)?;

    let resp = make_response(&ds, &cfg.response)?;
    let targets = match &cfg.targets {
        TargetSel::All => (0..ds.n()).collect(),
        TargetSel::List(list) => {
            for &t in list {
                if t >= ds.n() {
                    return Err(Error::TargetOutOfRange { t, n: ds.n() });
                }
            }
            list.clone()
        }
    };
    Ok(Prepared {
        ds,
        spec,
        resp,
        targets,
    })
}

fn out_file(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    std::fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

/// Everything needed to reproduce the emitted numbers.
fn write_manifest(cfg: &RunConfig, config_path: &Path, prep: Option<&Prepared>) -> Result<()> {
    let mode = match cfg.mode_kind {
        cohort_shapley::config::ModeKind::Exact => "exact",
        cohort_shapley::config::ModeKind::MonteCarlo => "mc",
    };
    let manifest = serde_json::json!({
        "tool": "cohort-shapley",
        "version": env!("CARGO_PKG_VERSION"),
        "config_path": config_path.display().to_string(),
        "config_sha256": sha256_file(config_path)?,
        "dataset_path": cfg.dataset_path.display().to_string(),
        "dataset_sha256": sha256_file(&cfg.dataset_path)?,
        "mode": mode,
        "n_perms": if mode == "mc" { Some(cfg.n_perms) } else { None },
        "seed": cfg.seed,
        "threads": cfg.threads,
        "n": prep.map(|p| p.ds.n()),
        "d": prep.map(|p| p.ds.d()),
        "response": prep.map(|p| p.resp.name.clone()),
        "conditioned": cfg.condition.is_some(),
        "bootstrap": cfg.bootstrap.as_ref().map(|b| serde_json::json!({
            "replicates": b.replicates,
            "seed": b.seed,
            "quantiles": b.quantiles,
        })),
    });
    let mut w = out_file(&cfg.out_dir, "manifest.json")?;
    writeln!(w, "{}", serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

fn attribute_stage(cfg: &RunConfig, prep: &Prepared) -> Result<Vec<ShapleyAttribution>> {
    let attrs = attributions_for(
        &prep.ds,
        &prep.spec,
        &prep.targets,
        &prep.resp,
        None,
        cfg.estimation_mode(),
    )?;
    let names = prep.ds.feature_names();
    write_attributions_csv(out_file(&cfg.out_dir, "attributions.csv")?, &attrs, &names)?;
    write_attributions_jsonl(
        out_file(&cfg.out_dir, "attributions.jsonl")?,
        &attrs,
        &names,
    )?;
    Ok(attrs)
}

/// `attribute`: per-target attributions plus the run manifest.
pub fn cmd_attribute(cfg: &RunConfig, config_path: &Path) -> Result<()> {
    let prep = prepare(cfg)?;
    let attrs = attribute_stage(cfg, &prep)?;
    write_manifest(cfg, config_path, Some(&prep))?;
    println!(
        "attributed {} targets x {} features -> {}",
        attrs.len(),
        prep.ds.d(),
        cfg.out_dir.display()
    );
    Ok(())
}

fn aggregate_stage(cfg: &RunConfig, prep: &Prepared, attrs: &[ShapleyAttribution]) -> Result<()> {
    if cfg.groups.is_empty() {
        return Ok(());
    }
    // Group aggregation averages over every row, so it needs the full sweep.
    let full;
    let attrs_all: &[ShapleyAttribution] = if attrs.len() == prep.ds.n() {
        attrs
    } else {
        full = all_targets(
            &prep.ds,
            &prep.spec,
            &prep.resp,
            None,
            cfg.estimation_mode(),
        )?;
        &full
    };
    let aggs = aggregate_groups(attrs_all, &cfg.groups, &prep.ds)?;
    let names = prep.ds.feature_names();
    write_groups_csv(out_file(&cfg.out_dir, "groups.csv")?, &aggs, &names)?;
    println!("group mean attribution ({}):", prep.resp.name);
    for agg in &aggs {
        let cells: Vec<String> = names
            .iter()
            .zip(&agg.mean_phi)
            .map(|(n, v)| format!("{n}={}", format_human(*v)))
            .collect();
        println!("  {} (n={}): {}", agg.name, agg.count, cells.join(" "));
    }
    Ok(())
}

/// `aggregate`: attributions plus per-group mean tables.
pub fn cmd_aggregate(cfg: &RunConfig, config_path: &Path) -> Result<()> {
    let prep = prepare(cfg)?;
    let attrs = attribute_stage(cfg, &prep)?;
    aggregate_stage(cfg, &prep, &attrs)?;
    write_manifest(cfg, config_path, Some(&prep))?;
    Ok(())
}

fn bootstrap_stage(cfg: &RunConfig, prep: &Prepared) -> Result<()> {
    let Some(bcfg) = &cfg.bootstrap else {
        return Ok(());
    };
    let names = prep.ds.feature_names();
    let mut summaries = Vec::new();
    if !bcfg.groups.is_empty() {
        let groups: Vec<(String, Vec<usize>)> = bcfg
            .groups
            .iter()
            .map(|name| {
                let def = cfg
                    .groups
                    .iter()
                    .find(|g| &g.name == name)
                    .expect("validated during config parse");
                Ok((name.clone(), def.members(&prep.ds)?))
            })
            .collect::<Result<Vec<_>>>()?;
        let run = bootstrap_attributions(
            &prep.ds,
            &prep.spec,
            BootstrapTask::Groups(&groups),
            &prep.resp,
            bcfg.replicates,
            bcfg.seed,
        )?;
        summaries.extend(summarize(&run, &bcfg.quantiles)?);
    }
    if !bcfg.targets.is_empty() {
        for &t in &bcfg.targets {
            if t >= prep.ds.n() {
                return Err(Error::TargetOutOfRange { t, n: prep.ds.n() });
            }
        }
        let run = bootstrap_attributions(
            &prep.ds,
            &prep.spec,
            BootstrapTask::Targets(&bcfg.targets),
            &prep.resp,
            bcfg.replicates,
            bcfg.seed,
        )?;
        summaries.extend(summarize(&run, &bcfg.quantiles)?);
    }
    write_bootstrap_summary_csv(
        out_file(&cfg.out_dir, "bootstrap_summary.csv")?,
        &summaries,
        &names,
        &bcfg.quantiles,
    )?;
    write_violins_json(
        out_file(&cfg.out_dir, "bootstrap_violins.json")?,
        &summaries,
        &names,
    )?;
    if cfg.svg {
        let mut w = out_file(&cfg.out_dir, "bootstrap_violins.svg")?;
        w.write_all(svg::violins(&summaries, &names).as_bytes())?;
    }
    println!(
        "bootstrap: {} replicates, {} series",
        bcfg.replicates,
        summaries.len() / prep.ds.d().max(1)
    );
    Ok(())
}

/// `bootstrap`: replicate-reweighted uncertainty for groups and targets.
pub fn cmd_bootstrap(cfg: &RunConfig, config_path: &Path) -> Result<()> {
    if cfg.bootstrap.is_none() {
        return Err(Error::Config {
            line: None,
            msg: "the bootstrap subcommand needs a [bootstrap] section".into(),
        });
    }
    let prep = prepare(cfg)?;
    bootstrap_stage(cfg, &prep)?;
    write_manifest(cfg, config_path, Some(&prep))?;
    Ok(())
}

fn histogram_stage(cfg: &RunConfig, prep: &Prepared, attrs: &[ShapleyAttribution]) -> Result<()> {
    let Some(hcfg) = &cfg.histogram else {
        return Ok(());
    };
    // Group label per attribution row from the configured feature levels.
    let group_cols: Vec<usize> = hcfg
        .group_by
        .iter()
        .map(|name| prep.ds.feature_named(name).map(|(j, _)| j))
        .collect::<Result<Vec<_>>>()?;
    let label_of = |t: usize| -> String {
        if group_cols.is_empty() {
            "all".to_string()
        } else {
            group_cols
                .iter()
                .map(|&j| prep.ds.feature(j).label_of(t))
                .collect::<Vec<_>>()
                .join("/")
        }
    };
    let names = prep.ds.feature_names();
    for (j, fname) in names.iter().enumerate() {
        // Group order: first appearance by row order, deterministic.
        let mut order: Vec<String> = Vec::new();
        let mut by_group: std::collections::HashMap<String, Vec<f64>> =
            std::collections::HashMap::new();
        for attr in attrs {
            let t = attr.target.expect("pipeline attributions carry targets");
            let label = label_of(t);
            if !by_group.contains_key(&label) {
                order.push(label.clone());
            }
            by_group.entry(label).or_default().push(attr.phi[j]);
        }
        let series: Vec<(String, Vec<f64>)> = order
            .into_iter()
            .map(|label| {
                let vals = by_group.remove(&label).unwrap_or_default();
                (label, vals)
            })
            .collect();
        let h = histogram(&series, hcfg.bin_width)?;
        write_histogram_csv(
            out_file(&cfg.out_dir, &format!("histogram_{fname}.csv"))?,
            &h,
        )?;
        if cfg.svg {
            let mut w = out_file(&cfg.out_dir, &format!("histogram_{fname}.svg"))?;
            w.write_all(svg::histogram(&h, fname).as_bytes())?;
        }
    }
    Ok(())
}

/// `report`: attribution, aggregation, histograms, bootstrap, manifest.
pub fn cmd_report(cfg: &RunConfig, config_path: &Path) -> Result<()> {
    let prep = prepare(cfg)?;
    let attrs = attribute_stage(cfg, &prep)?;
    aggregate_stage(cfg, &prep, &attrs)?;
    histogram_stage(cfg, &prep, &attrs)?;
    bootstrap_stage(cfg, &prep)?;
    write_manifest(cfg, config_path, Some(&prep))?;
    println!("report written to {}", cfg.out_dir.display());
    Ok(())
}

fn subset_label(u: FeatureSet, names: &[String]) -> String {
    if u.is_empty() {
        "(none)".to_string()
    } else {
        u.iter()
            .map(|j| names[j].as_str())
            .collect::<Vec<_>>()
            .join("+")
    }
}

/// `sobol`: exact ANOVA of a product grid plus optional sampling estimates.
pub fn cmd_sobol(cfg: &RunConfig, config_path: &Path) -> Result<()> {
    let Some(scfg) = &cfg.sobol else {
        return Err(Error::Config {
            line: None,
            msg: "the sobol subcommand needs a [sobol] section".into(),
        });
    };
    let grid = read_grid_csv(File::open(&scfg.grid)?)?;
    let names: Vec<String> = grid.dims().iter().map(|d| d.name.clone()).collect();
    let dec = anova(&grid)?;
    let vc = dec.components();

    let mut w = out_file(&cfg.out_dir, "components.csv")?;
    writeln!(w, "subset,sigma2")?;
    for u in FeatureSet::all(vc.d) {
        writeln!(
            w,
            "{},{}",
            subset_label(u, &names),
            cohort_shapley::report::format_full(vc.sigma2[u.bits() as usize])
        )?;
    }
    drop(w);

    let effects = shapley_effects(&vc);
    let mut w = out_file(&cfg.out_dir, "indices.csv")?;
    writeln!(w, "feature,closed,total,shapley_effect")?;
    for (j, name) in names.iter().enumerate() {
        let u = FeatureSet::singleton(j);
        writeln!(
            w,
            "{name},{},{},{}",
            cohort_shapley::report::format_full(sobol_closed(&vc, u)),
            cohort_shapley::report::format_full(sobol_total(&vc, u)),
            cohort_shapley::report::format_full(effects[j]),
        )?;
    }
    drop(w);

    if let Some(n) = scfg.pickfreeze_n {
        let sampler = IndependentSampler::from_grid(&grid);
        let evaluator = GridEvaluator::new(&grid);
        let mut w = out_file(&cfg.out_dir, "estimates.csv")?;
        writeln!(
            w,
            "feature,closed_estimate,closed_stderr,total_estimate,total_stderr,n_pairs"
        )?;
        for (j, name) in names.iter().enumerate() {
            let u = FeatureSet::singleton(j);
            let c = pick_freeze_closed(&evaluator, &sampler, u, n, scfg.pickfreeze_seed)?;
            let t = jansen_total(&evaluator, &sampler, u, n, scfg.pickfreeze_seed)?;
            writeln!(
                w,
                "{name},{},{},{},{},{n}",
                cohort_shapley::report::format_full(c.value),
                cohort_shapley::report::format_full(c.stderr),
                cohort_shapley::report::format_full(t.value),
                cohort_shapley::report::format_full(t.stderr),
            )?;
        }
    }

    // Consistency check worth surfacing: Shapley over the closed-index game
    // must reproduce the variance-based effects.
    let closed_game: Vec<f64> = FeatureSet::all(vc.d)
        .map(|u| sobol_closed(&vc, u))
        .collect();
    let via_game = exact_shapley(&TableOracle::new(ValueTable::new(vc.d, closed_game)))?;
    let max_gap = effects
        .iter()
        .zip(&via_game.phi)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    println!(
        "sobol: d={} total variance {} (effect/game agreement {:.1e})",
        vc.d,
        format_human(vc.total),
        max_gap
    );
    write_manifest_sobol(cfg, config_path, scfg)?;
    Ok(())
}

fn write_manifest_sobol(
    cfg: &RunConfig,
    config_path: &Path,
    scfg: &cohort_shapley::config::SobolConfig,
) -> Result<()> {
    let manifest = serde_json::json!({
        "tool": "cohort-shapley",
        "version": env!("CARGO_PKG_VERSION"),
        "config_path": config_path.display().to_string(),
        "config_sha256": sha256_file(config_path)?,
        "grid_path": scfg.grid.display().to_string(),
        "grid_sha256": sha256_file(&scfg.grid)?,
        "pickfreeze_n": scfg.pickfreeze_n,
        "pickfreeze_seed": scfg.pickfreeze_seed,
    });
    let mut w = out_file(&cfg.out_dir, "manifest.json")?;
    writeln!(w, "{}", serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

/// Looks up grid values by matching levels, so sampling estimators can
/// treat the grid as a black-box function.
pub struct GridEvaluator<'a> {
    grid: &'a ProductGrid,
}

impl<'a> GridEvaluator<'a> {
    pub fn new(grid: &'a ProductGrid) -> Self {
        GridEvaluator { grid }
    }
}

impl cohort_shapley::FunctionEvaluator for GridEvaluator<'_> {
    fn arity(&self) -> usize {
        self.grid.d()
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        let mut idx = 0usize;
        for (j, dim) in self.grid.dims().iter().enumerate() {
            let l = dim
                .levels
                .iter()
                .position(|&v| v == x[j])
                .expect("sampler draws grid levels");
            idx = idx * dim.levels.len() + l;
        }
        self.grid.values()[idx]
    }
}
