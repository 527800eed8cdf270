use std::time::Instant;

use morphofilter::analysis::{
    classify_sites, max_entropy_reference, regime_fit, CondensationMap, EntropyMap, MaxEntropyReference, RegimeFit,
    SiteState,
};
use morphofilter::ensemble::{
    compliance_ratio, probe_high_temperature, run_sweep_with_progress, schedule, temperature_seed, EnsembleStats,
    SweepConfig, SweepSeries, TemperatureFailure,
};
use morphofilter::optimizer::{optimize, OptimizationResult};
use morphofilter::problem::{DesignField, ProblemJson, ProblemSpec};
use morphofilter::raster;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{RunConfig, ScheduleSpec};
use crate::error::{CliError, CliResult};
use crate::store::{RunDir, Stage};

pub const CONFIG_FILE: &str = "config.json";
pub const OPTIMIZE_FILE: &str = "optimize/result.json";
pub const SERIES_FILE: &str = "sweep/series.json";
pub const REFERENCE_FILE: &str = "reference/reference.json";
pub const ENTROPY_FILE: &str = "analysis/entropy.csv";
pub const CONDENSATION_FILE: &str = "analysis/condensation.csv";
pub const REGIME_FILE: &str = "analysis/regime.json";
pub const IMPORTANCE_FILE: &str = "analysis/importance.csv";

const HINT_OPTIMIZE: &str = "run `morphofilter optimize` first";
const HINT_SWEEP: &str = "run `morphofilter sweep` first";
const HINT_REFERENCE: &str = "run `morphofilter reference-entropy` first to produce the zero-force reference";
const HINT_ANALYZE: &str = "run `morphofilter analyze` first";

/// Seed offset for the zero-force reference run.
const REFERENCE_SEED_INDEX: usize = 1 << 20;
/// Seed offset for the auto-schedule probe.
const PROBE_SEED_INDEX: usize = 1 << 21;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizeFile {
    pub spec_hash: String,
    pub result: OptimizationResult,
}

/// Sweep metadata; per-temperature statistics live in their own files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesFile {
    pub spec_hash: String,
    pub master_seed: u64,
    pub anneal: bool,
    pub schedule: Vec<f64>,
    pub c_min: Option<f64>,
    pub entries: Vec<SeriesEntry>,
    pub failures: Vec<TemperatureFailure>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesEntry {
    pub index: usize,
    pub temperature: f64,
    pub seed: u64,
    pub file: String,
}

#[derive(Debug, Serialize)]
struct SummaryRow {
    index: usize,
    #[serde(rename = "T")]
    temperature: f64,
    seed: u64,
    mean_compliance: f64,
    compliance_std_error: f64,
    ratio: Option<f64>,
    mean_lambda: f64,
    lambda_std_error: f64,
    mean_lambda_force: f64,
    equilibrated: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DensityRow {
    pub site: usize,
    pub ix: usize,
    pub iy: usize,
    pub mean_x: f64,
    pub mean_x_filtered: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EntropyRow {
    pub site: usize,
    #[serde(rename = "T")]
    pub temperature: f64,
    #[serde(rename = "S")]
    pub entropy: f64,
    #[serde(rename = "S_max")]
    pub s_max: f64,
    pub s: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CondensationRow {
    pub site: usize,
    #[serde(rename = "T_c")]
    pub t_c: f64,
    pub flag: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ImportanceRow {
    pub site: usize,
    pub ix: usize,
    pub iy: usize,
    pub density: f64,
    #[serde(rename = "T_c")]
    pub t_c: f64,
    #[serde(rename = "T_c_norm")]
    pub t_c_norm: f64,
}

#[derive(Debug, Serialize)]
struct ClassRow {
    site: usize,
    #[serde(rename = "T")]
    temperature: f64,
    state: SiteState,
    s: f64,
    mean_x: f64,
}

fn record_config(cfg: &RunConfig, dir: &RunDir) -> CliResult<()> {
    let spec = cfg.spec()?;
    let mut st = Stage::new(dir, "config");
    st.write_json(CONFIG_FILE, cfg)?;
    st.write_json("problem.json", &ProblemJson::from(&spec))?;
    st.finish(&cfg.hash(), json!({ "spec_hash": spec.content_hash() }), 0.0)?;
    Ok(())
}

fn check_hash(found: &str, spec: &ProblemSpec, what: &str, hint: &str, dir: &RunDir, rel: &str) -> CliResult<()> {
    if found != spec.content_hash() {
        return Err(CliError::missing(
            dir.path(rel),
            format!("{what} was produced for a different problem; {hint}"),
        ));
    }
    Ok(())
}

pub fn load_optimum(dir: &RunDir, spec: &ProblemSpec) -> CliResult<OptimizationResult> {
    let f: OptimizeFile = dir.read_json(OPTIMIZE_FILE, HINT_OPTIMIZE)?;
    check_hash(&f.spec_hash, spec, "optimum", HINT_OPTIMIZE, dir, OPTIMIZE_FILE)?;
    Ok(f.result)
}

fn grid_rows(spec: &ProblemSpec, values: &[f64]) -> Vec<Vec<String>> {
    (0..spec.nely)
        .map(|iy| {
            (0..spec.nelx)
                .map(|ix| values[spec.element_index(ix, iy)].to_string())
                .collect()
        })
        .collect()
}

fn write_image(st: &mut Stage, stem: &str, img: &raster::Image) -> CliResult<()> {
    st.write_bytes(&format!("{stem}.ppm"), &img.to_ppm())?;
    st.write_bytes(&format!("{stem}.png"), &img.to_png()?)?;
    Ok(())
}

pub fn cmd_optimize(cfg: &RunConfig, dir: &RunDir) -> CliResult<OptimizationResult> {
    let t0 = Instant::now();
    record_config(cfg, dir)?;
    let spec = cfg.spec()?;
    let r = optimize(&spec, &cfg.optimizer)?;
    let mut st = Stage::new(dir, "optimize");
    st.write_json(
        OPTIMIZE_FILE,
        &OptimizeFile {
            spec_hash: spec.content_hash(),
            result: r.clone(),
        },
    )?;
    let header: Vec<String> = (0..spec.nelx).map(|ix| format!("x{ix}")).collect();
    st.write_records("optimize/x_star.csv", &header, &grid_rows(&spec, r.x_star.as_slice()))?;
    st.write_csv(
        "optimize/history.csv",
        r.compliance_history.iter().enumerate().map(|(i, &c)| {
            #[derive(Serialize)]
            struct Row {
                iteration: usize,
                compliance: f64,
                change: Option<f64>,
            }
            Row {
                iteration: i,
                compliance: c,
                change: r.change_history.get(i).copied(),
            }
        }),
    )?;
    let phys = r.physical_density(&spec);
    let img = raster::grayscale(&spec, phys.as_slice(), cfg.render.scale)?;
    write_image(&mut st, "optimize/x_star", &img)?;
    st.finish(
        &cfg.hash(),
        json!({ "c_min": r.c_min, "iterations": r.iterations, "converged": r.converged }),
        t0.elapsed().as_secs_f64(),
    )?;
    Ok(r)
}

/// Expands the configured schedule; the auto form probes for `T_hi`.
pub fn resolve_schedule(cfg: &RunConfig, spec: &ProblemSpec, c_min: Option<f64>) -> CliResult<(Vec<f64>, serde_json::Value)> {
    match &cfg.schedule {
        ScheduleSpec::Explicit(t) => Ok((t.clone(), json!({ "kind": "explicit" }))),
        ScheduleSpec::Range {
            t_hi,
            t_lo,
            count,
            spacing,
        } => Ok((schedule(*t_hi, *t_lo, *count, *spacing)?, json!({ "kind": "range" }))),
        ScheduleSpec::Auto { auto } => {
            let c_min = c_min.ok_or_else(|| {
                CliError::missing(
                    std::path::PathBuf::from(OPTIMIZE_FILE),
                    format!("the auto schedule needs C_min; {HINT_OPTIMIZE}"),
                )
            })?;
            let t_start = c_min / spec.n_elements() as f64;
            let (t_probe, ratio) = probe_high_temperature(
                spec,
                &cfg.thermostat,
                &auto.probe,
                c_min,
                auto.target_ratio,
                t_start,
                temperature_seed(cfg.seed, PROBE_SEED_INDEX),
            )?;
            let t_hi = auto.headroom * t_probe;
            let temps = schedule(t_hi, auto.low_fraction * t_hi, auto.count, auto.spacing)?;
            Ok((
                temps,
                json!({ "kind": "auto", "t_hi": t_hi, "t_probe": t_probe, "probe_ratio": ratio }),
            ))
        }
    }
}

fn entry_file(i: usize) -> String {
    format!("sweep/t{i:03}.json")
}

pub fn cmd_sweep(cfg: &RunConfig, dir: &RunDir, verbose: bool) -> CliResult<SweepSeries> {
    let t0 = Instant::now();
    record_config(cfg, dir)?;
    let spec = cfg.spec()?;
    let c_min = if dir.exists(OPTIMIZE_FILE) {
        Some(load_optimum(dir, &spec)?.c_min)
    } else {
        None
    };
    let (temps, schedule_info) = resolve_schedule(cfg, &spec, c_min)?;
    let sweep = SweepConfig {
        schedule: temps.clone(),
        thermostat: cfg.thermostat,
        sampling: cfg.sampling,
        anneal: cfg.anneal,
        seed: cfg.seed,
    };
    let series = run_sweep_with_progress(&spec, &sweep, c_min, &|i, r| {
        if verbose {
            match r {
                Ok(s) => eprintln!("T[{i}] = {:.6e}: <C> = {:.6e}", s.temperature, s.mean_compliance),
                Err(e) => eprintln!("T[{i}] failed: {e}"),
            }
        }
    })?;
    if series.entries.is_empty() {
        let msg = series
            .failures
            .first()
            .map(|f| f.message.clone())
            .unwrap_or_default();
        return Err(CliError::Core(morphofilter::Error::InsufficientData(format!(
            "every temperature failed: {msg}"
        ))));
    }

    let mut st = Stage::new(dir, "sweep");
    let mut entries = Vec::new();
    let mut summary = Vec::new();
    let failed: Vec<usize> = series.failures.iter().map(|f| f.index).collect();
    let indices = (0..temps.len()).filter(|i| !failed.contains(i));
    for (stats, index) in series.entries.iter().zip(indices) {
        let file = entry_file(index);
        st.write_json(&file, stats)?;
        st.write_csv(
            &format!("sweep/t{index:03}_density.csv"),
            (0..spec.n_elements()).map(|e| {
                let (ix, iy) = spec.element_coords(e);
                DensityRow {
                    site: e,
                    ix,
                    iy,
                    mean_x: stats.mean_density[e],
                    mean_x_filtered: stats.mean_physical_density[e],
                }
            }),
        )?;
        let mut header = vec!["site".to_string()];
        header.extend((0..stats.bins).map(|b| format!("b{b}")));
        let rows: Vec<Vec<String>> = stats
            .density_histograms
            .iter()
            .enumerate()
            .map(|(e, h)| std::iter::once(e.to_string()).chain(h.iter().map(|c| c.to_string())).collect())
            .collect();
        st.write_records(&format!("sweep/t{index:03}_hist.csv"), &header, &rows)?;
        summary.push(SummaryRow {
            index,
            temperature: stats.temperature,
            seed: stats.seed,
            mean_compliance: stats.mean_compliance,
            compliance_std_error: stats.compliance_std_error,
            ratio: compliance_ratio(stats).ok(),
            mean_lambda: stats.mean_pressure,
            lambda_std_error: stats.pressure_std_error,
            mean_lambda_force: stats.mean_force_pressure,
            equilibrated: stats.equilibrated,
        });
        entries.push(SeriesEntry {
            index,
            temperature: stats.temperature,
            seed: stats.seed,
            file,
        });
    }
    st.write_csv("sweep/summary.csv", summary)?;
    let seeds: Vec<_> = (0..temps.len())
        .map(|i| json!({ "index": i, "T": temps[i], "seed": temperature_seed(cfg.seed, i) }))
        .collect();
    st.write_json(
        SERIES_FILE,
        &SeriesFile {
            spec_hash: series.spec_hash.clone(),
            master_seed: series.master_seed,
            anneal: series.anneal,
            schedule: temps,
            c_min,
            entries,
            failures: series.failures.clone(),
        },
    )?;
    st.finish(
        &cfg.hash(),
        json!({ "schedule": schedule_info, "seeds": seeds, "failures": series.failures.len() }),
        t0.elapsed().as_secs_f64(),
    )?;
    Ok(series)
}

/// Rebuilds the sweep from persisted files only.
pub fn load_series(dir: &RunDir, spec: &ProblemSpec) -> CliResult<(SeriesFile, SweepSeries)> {
    let meta: SeriesFile = dir.read_json(SERIES_FILE, HINT_SWEEP)?;
    check_hash(&meta.spec_hash, spec, "sweep", HINT_SWEEP, dir, SERIES_FILE)?;
    let entries = meta
        .entries
        .iter()
        .map(|e| dir.read_json::<EnsembleStats>(&e.file, HINT_SWEEP))
        .collect::<CliResult<Vec<_>>>()?;
    let series = SweepSeries {
        spec_hash: meta.spec_hash.clone(),
        master_seed: meta.master_seed,
        anneal: meta.anneal,
        entries,
        failures: meta.failures.clone(),
    };
    Ok((meta, series))
}

pub fn cmd_reference(cfg: &RunConfig, dir: &RunDir) -> CliResult<MaxEntropyReference> {
    let t0 = Instant::now();
    record_config(cfg, dir)?;
    let spec = cfg.spec()?;
    let seed = temperature_seed(cfg.seed, REFERENCE_SEED_INDEX);
    let r = max_entropy_reference(
        &spec,
        &cfg.thermostat,
        &cfg.reference_sampling(),
        cfg.reference.temperature,
        seed,
    )?;
    let mut st = Stage::new(dir, "reference");
    st.write_json(REFERENCE_FILE, &r)?;
    st.write_csv(
        "reference/s_max.csv",
        r.s_max.iter().zip(&r.std_error).enumerate().map(|(site, (&s, &se))| {
            #[derive(Serialize)]
            struct Row {
                site: usize,
                #[serde(rename = "S_max")]
                s_max: f64,
                std_error: f64,
            }
            Row {
                site,
                s_max: s,
                std_error: se,
            }
        }),
    )?;
    st.finish(
        &cfg.hash(),
        json!({ "seed": seed, "spread": r.spread(), "relative_std": r.relative_std() }),
        t0.elapsed().as_secs_f64(),
    )?;
    Ok(r)
}

pub fn load_reference(dir: &RunDir, spec: &ProblemSpec) -> CliResult<MaxEntropyReference> {
    let r: MaxEntropyReference = dir.read_json(REFERENCE_FILE, HINT_REFERENCE)?;
    check_hash(&r.spec_hash, spec, "reference", HINT_REFERENCE, dir, REFERENCE_FILE)?;
    Ok(r)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisSummary {
    pub temperatures: Vec<f64>,
    pub t_c_max: f64,
    pub top_decile: Vec<usize>,
    pub segments: usize,
    pub slopes: Vec<f64>,
    /// Counts of (unconstrained, in-play, condensed) per temperature.
    pub state_counts: Vec<[usize; 3]>,
}

pub struct Analysis {
    pub entropy: EntropyMap,
    pub condensation: CondensationMap,
    pub regimes: RegimeFit,
    pub states: Vec<Vec<SiteState>>,
    pub summary: AnalysisSummary,
}

/// Pure function of persisted sweep, reference and (optionally) optimum.
pub fn cmd_analyze(cfg: &RunConfig, dir: &RunDir) -> CliResult<Analysis> {
    let t0 = Instant::now();
    let spec = cfg.spec()?;
    let (_, series) = load_series(dir, &spec)?;
    let reference = load_reference(dir, &spec)?;
    let optimum = if dir.exists(OPTIMIZE_FILE) {
        Some(load_optimum(dir, &spec)?)
    } else {
        None
    };
    record_config(cfg, dir)?;
    let a = analyze(&spec, &series, &reference, cfg)?;

    let mut st = Stage::new(dir, "analyze");
    let mut rows = Vec::new();
    for (ti, &t) in a.entropy.temperatures.iter().enumerate() {
        for site in 0..a.entropy.n_sites() {
            rows.push(EntropyRow {
                site,
                temperature: t,
                entropy: a.entropy.entropy[ti][site],
                s_max: a.entropy.s_max[site],
                s: a.entropy.normalized[ti][site],
            });
        }
    }
    st.write_csv(ENTROPY_FILE, rows)?;
    st.write_csv(
        CONDENSATION_FILE,
        a.condensation.sites.iter().enumerate().map(|(site, c)| CondensationRow {
            site,
            t_c: c.t_c,
            flag: c.flag.as_str().into(),
        }),
    )?;
    st.write_json(REGIME_FILE, &a.regimes)?;
    let mut class_rows = Vec::new();
    for (ti, stats) in series.entries.iter().enumerate() {
        for site in 0..spec.n_elements() {
            class_rows.push(ClassRow {
                site,
                temperature: stats.temperature,
                state: a.states[ti][site],
                s: a.entropy.normalized[ti][site],
                mean_x: stats.mean_density[site],
            });
        }
    }
    st.write_csv("analysis/classes.csv", class_rows)?;
    if let Some(opt) = &optimum {
        let norm = a.condensation.normalized();
        st.write_csv(
            IMPORTANCE_FILE,
            (0..spec.n_elements()).map(|e| {
                let (ix, iy) = spec.element_coords(e);
                ImportanceRow {
                    site: e,
                    ix,
                    iy,
                    density: opt.x_star.as_slice()[e],
                    t_c: a.condensation.sites[e].t_c,
                    t_c_norm: norm[e],
                }
            }),
        )?;
    }
    st.write_json("analysis/summary.json", &a.summary)?;
    st.finish(
        &cfg.hash(),
        json!({ "importance": optimum.is_some() }),
        t0.elapsed().as_secs_f64(),
    )?;
    Ok(a)
}

pub fn analyze(
    spec: &ProblemSpec,
    series: &SweepSeries,
    reference: &MaxEntropyReference,
    cfg: &RunConfig,
) -> CliResult<Analysis> {
    let entropy = EntropyMap::build(series, reference, cfg.analysis.bootstrap_reps)?;
    let condensation = CondensationMap::from_entropy(&entropy, cfg.analysis.threshold)?;
    let points: Vec<(f64, f64)> = series
        .entries
        .iter()
        .map(|e| (e.temperature, e.mean_compliance))
        .collect();
    let regimes = regime_fit(&points, cfg.analysis.max_segments)?;
    let states = series
        .entries
        .iter()
        .zip(&entropy.normalized)
        .map(|(e, s)| classify_sites(s, &e.mean_density))
        .collect::<morphofilter::Result<Vec<_>>>()?;
    let state_counts = states
        .iter()
        .map(|row| {
            let mut c = [0usize; 3];
            for s in row {
                c[match s {
                    SiteState::Unconstrained => 0,
                    SiteState::InPlay => 1,
                    SiteState::Condensed => 2,
                }] += 1;
            }
            c
        })
        .collect();
    let summary = AnalysisSummary {
        temperatures: entropy.temperatures.clone(),
        t_c_max: condensation.t_c_max,
        top_decile: condensation.top_sites(0.1),
        segments: regimes.segments.len(),
        slopes: regimes.slopes(),
        state_counts,
    };
    debug_assert_eq!(spec.n_elements(), entropy.n_sites());
    Ok(Analysis {
        entropy,
        condensation,
        regimes,
        states,
        summary,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum RenderTarget {
    Optimum,
    MeanDensity(Option<f64>),
    Entropy(Option<f64>),
    Condensation,
    Importance,
}

impl std::str::FromStr for RenderTarget {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        let (name, at) = match s.split_once('@') {
            Some((n, t)) => {
                let t: f64 = t
                    .parse()
                    .map_err(|_| CliError::Config(format!("bad temperature in render target `{s}`")))?;
                (n, Some(t))
            }
            None => (s, None),
        };
        match (name, at) {
            ("x_star" | "optimum", None) => Ok(Self::Optimum),
            ("mean_density", t) => Ok(Self::MeanDensity(t)),
            ("entropy", t) => Ok(Self::Entropy(t)),
            ("condensation", None) => Ok(Self::Condensation),
            ("importance", None) => Ok(Self::Importance),
            _ => Err(CliError::Config(format!(
                "unknown render target `{s}`; expected x_star, mean_density[@T], entropy[@T], condensation or importance"
            ))),
        }
    }
}

/// Index of the swept temperature closest to `t` in log distance, or the
/// highest one when `t` is absent.
fn nearest(temps: &[f64], t: Option<f64>) -> usize {
    match t {
        None => 0,
        Some(t) => (0..temps.len())
            .min_by(|&a, &b| {
                let da = (temps[a].ln() - t.ln()).abs();
                let db = (temps[b].ln() - t.ln()).abs();
                da.total_cmp(&db)
            })
            .unwrap_or(0),
    }
}

/// File stem; temperature-resolved targets carry the sweep index.
fn stem_for(target: &RenderTarget, index: Option<usize>) -> String {
    let at = index.map(|i| format!("_t{i:03}")).unwrap_or_default();
    match target {
        RenderTarget::Optimum => "render/x_star".into(),
        RenderTarget::MeanDensity(_) => format!("render/mean_density{at}"),
        RenderTarget::Entropy(_) => format!("render/entropy{at}"),
        RenderTarget::Condensation => "render/condensation".into(),
        RenderTarget::Importance => "render/importance".into(),
    }
}

/// Draws a raster from persisted artifacts only.
pub fn cmd_render(cfg: &RunConfig, dir: &RunDir, target: &RenderTarget) -> CliResult<String> {
    let t0 = Instant::now();
    let spec = cfg.spec()?;
    let scale = cfg.render.scale;
    let (img, t) = match target {
        RenderTarget::Optimum => {
            let r = load_optimum(dir, &spec)?;
            (raster::grayscale(&spec, r.physical_density(&spec).as_slice(), scale)?, None)
        }
        RenderTarget::MeanDensity(t) => {
            let (meta, _) = load_series(dir, &spec)?;
            let temps: Vec<f64> = meta.entries.iter().map(|e| e.temperature).collect();
            let e = &meta.entries[nearest(&temps, *t)];
            let stats: EnsembleStats = dir.read_json(&e.file, HINT_SWEEP)?;
            (raster::grayscale(&spec, &stats.mean_physical_density, scale)?, Some(e.index))
        }
        RenderTarget::Entropy(t) => {
            let rows: Vec<EntropyRow> = dir.read_csv(ENTROPY_FILE, HINT_ANALYZE)?;
            let mut temps: Vec<f64> = rows.iter().map(|r| r.temperature).collect();
            temps.dedup();
            let idx = nearest(&temps, *t);
            let chosen = temps[idx];
            let mut s = vec![0.0; spec.n_elements()];
            for r in rows.iter().filter(|r| r.temperature == chosen) {
                *s.get_mut(r.site).ok_or_else(|| mesh_error(&spec, r.site))? = r.s;
            }
            (raster::heatmap(&spec, &s, 0.0, 1.0, scale)?, Some(idx))
        }
        RenderTarget::Condensation => {
            let rows: Vec<CondensationRow> = dir.read_csv(CONDENSATION_FILE, HINT_ANALYZE)?;
            let mut v = vec![0.0; spec.n_elements()];
            for r in &rows {
                *v.get_mut(r.site).ok_or_else(|| mesh_error(&spec, r.site))? = r.t_c;
            }
            let hi = v.iter().cloned().fold(0.0, f64::max);
            (raster::heatmap(&spec, &v, 0.0, hi, scale)?, None)
        }
        RenderTarget::Importance => {
            load_optimum(dir, &spec)?;
            let rows: Vec<ImportanceRow> = dir.read_csv(
                IMPORTANCE_FILE,
                "run `morphofilter optimize` and then `morphofilter analyze`",
            )?;
            let mut d = vec![0.0; spec.n_elements()];
            let mut tc = vec![0.0; spec.n_elements()];
            for r in &rows {
                *d.get_mut(r.site).ok_or_else(|| mesh_error(&spec, r.site))? = r.density;
                tc[r.site] = r.t_c_norm;
            }
            (raster::importance_map(&spec, &d, &tc, scale)?, None)
        }
    };
    let stem = stem_for(target, t);
    let mut st = Stage::new(dir, &format!("render:{}", stem.trim_start_matches("render/")));
    write_image(&mut st, &stem, &img)?;
    st.finish(&cfg.hash(), serde_json::Value::Null, t0.elapsed().as_secs_f64())?;
    Ok(stem)
}

fn mesh_error(spec: &ProblemSpec, site: usize) -> CliError {
    CliError::Core(morphofilter::Error::MeshMismatch {
        expected: spec.n_elements(),
        actual: site + 1,
    })
}

/// Optimal design as a field, for callers that only need `x*`.
pub fn optimum_field(dir: &RunDir, spec: &ProblemSpec) -> CliResult<DesignField> {
    Ok(load_optimum(dir, spec)?.x_star)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn targets_parse() {
        assert_eq!("importance".parse::<RenderTarget>().unwrap(), RenderTarget::Importance);
        assert_eq!(
            "mean_density@2.5".parse::<RenderTarget>().unwrap(),
            RenderTarget::MeanDensity(Some(2.5))
        );
        assert!("entropy@hot".parse::<RenderTarget>().is_err());
        assert!("movie".parse::<RenderTarget>().is_err());
    }

    #[test]
    fn nearest_in_log() {
        let t = [100.0, 10.0, 1.0];
        assert_eq!(nearest(&t, None), 0);
        assert_eq!(nearest(&t, Some(4.0)), 1);
        assert_eq!(nearest(&t, Some(2.0)), 2);
    }
}
