//! Summaries and plots for an output directory.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};

use crate::plot::{line_plot, Series};

struct Table {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn read(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
        let headers = r.headers()?.iter().map(str::to_string).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|r| r.iter().map(str::to_string).collect()))
            .collect::<std::result::Result<_, _>>()
            .with_context(|| format!("parsing {}", path.display()))?;
        Ok(Self { headers, rows })
    }

    fn idx(&self, name: &str) -> Result<usize> {
        self.headers.iter().position(|h| h == name).with_context(|| format!("missing column `{name}`"))
    }

    fn num(&self, row: &[String], name: &str) -> Result<f64> {
        let v = &row[self.idx(name)?];
        v.parse().with_context(|| format!("column `{name}`: bad number `{v}`"))
    }

    fn xy(&self, rows: &[&Vec<String>], x: &str, y: &str) -> Result<Vec<(f64, f64)>> {
        rows.iter().map(|r| Ok((self.num(r, x)?, self.num(r, y)?))).collect()
    }
}

fn frames(path: &Path, scenario: &str, out: &mut String) -> Result<()> {
    let t = Table::read(path)?;
    let rows: Vec<&Vec<String>> = t.rows.iter().collect();
    let series = [("simulated", "mean_BER", false), ("deterministic", "baseline_det", true), ("asymptotic", "baseline_asym", true), ("MAP", "baseline_MAP", true)]
        .iter()
        .map(|&(name, col, dashed)| Ok(Series { name: name.into(), points: t.xy(&rows, "frame_index", col)?, dashed }))
        .collect::<Result<Vec<_>>>()?;
    let svg = line_plot(&format!("Per-frame BER, {scenario}"), "frame", "BER", &series, true);
    fs::write(path.with_extension("svg"), svg)?;
    if let Some(last) = rows.last() {
        let _ = writeln!(
            out,
            "frames {scenario}: final-frame BER {:.4} (std {:.4}), deterministic {:.4}, asymptotic {:.4}, MAP {:.4}",
            t.num(last, "mean_BER")?,
            t.num(last, "std_BER")?,
            t.num(last, "baseline_det")?,
            t.num(last, "baseline_asym")?,
            t.num(last, "baseline_MAP")?
        );
    }
    Ok(())
}

fn weights(path: &Path, label: &str, out: &mut String) -> Result<()> {
    let t = Table::read(path)?;
    let (ik_on, ik_off) = (t.idx("k_on")?, t.idx("k_off")?);
    let mut settings: Vec<(String, String)> = Vec::new();
    for r in &t.rows {
        let key = (r[ik_on].clone(), r[ik_off].clone());
        if !settings.contains(&key) {
            settings.push(key);
        }
    }
    let mut series = Vec::new();
    for (k_on, k_off) in &settings {
        let rows: Vec<&Vec<String>> = t.rows.iter().filter(|r| &r[ik_on] == k_on && &r[ik_off] == k_off).collect();
        series.push(Series { name: format!("k_on={k_on}, k_off={k_off}"), points: t.xy(&rows, "symbol_index", "mean_nW")?, dashed: false });
        if let Some(last) = rows.last() {
            let _ = writeln!(
                out,
                "{label} (k_on={k_on}, k_off={k_off}): final mean n_W {:.2} (std {:.2}), baseline {:.2}, MAP threshold {}",
                t.num(last, "mean_nW")?,
                t.num(last, "std_nW")?,
                t.num(last, "baseline_det")?,
                t.num(last, "baseline_MAP")?
            );
        }
    }
    let first: Vec<&Vec<String>> = t.rows.iter().filter(|r| Some((&r[ik_on], &r[ik_off])) == settings.first().map(|s| (&s.0, &s.1))).collect();
    for (name, col) in [("deterministic", "baseline_det"), ("asymptotic", "baseline_asym"), ("MAP", "baseline_MAP")] {
        series.push(Series { name: name.into(), points: t.xy(&first, "symbol_index", col)?, dashed: true });
    }
    fs::write(path.with_extension("svg"), line_plot(&format!("Mean n_W, {label}"), "pilot symbols", "n_W", &series, false))?;
    Ok(())
}

fn bm_study(path: &Path, out: &mut String) -> Result<()> {
    let t = Table::read(path)?;
    let (is, id, it) = (t.idx("scenario")?, t.idx("detector")?, t.idx("n_t")?);
    let _ = writeln!(out, "bm-study:");
    let _ = writeln!(out, "  {:<8} {:<9} {:>7} {:>9} {:>9} {:>9} {:>9}", "scenario", "detector", "n_t", "min", "mean", "max", "MAP");
    for r in &t.rows {
        let _ = writeln!(
            out,
            "  {:<8} {:<9} {:>7} {:>9.5} {:>9.5} {:>9.5} {:>9.5}",
            r[is],
            r[id],
            r[it],
            t.num(r, "min_BER")?,
            t.num(r, "mean_BER")?,
            t.num(r, "max_BER")?,
            t.num(r, "MAP_BER")?
        );
    }
    Ok(())
}

fn baseline(path: &Path, scenario: &str) -> Result<()> {
    let t = Table::read(path)?;
    let rows: Vec<&Vec<String>> = t.rows.iter().collect();
    let series = [Series { name: "E[BER]".into(), points: t.xy(&rows, "l", "E_BER")?, dashed: false }];
    fs::write(path.with_extension("svg"), line_plot(&format!("Chain baseline, {scenario}"), "pilots", "E[BER]", &series, true))?;
    Ok(())
}

/// Writes an SVG next to every recognized CSV and returns a text summary.
pub fn report(dir: &Path) -> Result<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().and_then(|e| e.file_name().into_string().ok()))
        .filter(|n| n.ends_with(".csv"))
        .collect();
    names.sort();
    let mut out = String::new();
    for name in &names {
        let path = dir.join(name);
        let stem = name.trim_end_matches(".csv");
        if let Some(s) = stem.strip_prefix("frames_") {
            frames(&path, s, &mut out)?;
        } else if stem == "time_variant" || stem == "threshold_learning" {
            weights(&path, stem, &mut out)?;
        } else if stem == "bm_study" {
            bm_study(&path, &mut out)?;
        } else if let Some(s) = stem.strip_prefix("baseline_").filter(|s| *s != "summary" && *s != "time_variant") {
            baseline(&path, s)?;
        } else if stem == "baseline_summary" {
            let t = Table::read(&path)?;
            for r in &t.rows {
                let _ = writeln!(
                    out,
                    "baseline {}: nu_MAP {}, MAP BER {:.5}, asymptotic BER {:.5}, steady E[N_W] {:.2}",
                    r[t.idx("scenario")?],
                    r[t.idx("nu_MAP")?],
                    t.num(r, "MAP_BER")?,
                    t.num(r, "asymptotic_BER")?,
                    t.num(r, "steady_E_NW")?
                );
            }
        }
    }
    if out.is_empty() {
        out.push_str("no recognized outputs\n");
    }
    fs::write(dir.join("report.txt"), &out)?;
    Ok(out)
}
