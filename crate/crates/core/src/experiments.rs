//! Experiment drivers and their CSV outputs.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::adaptive::{self, AdaptiveConfig};
use crate::bm::{self, BmError, BoltzmannMachine, TrainingSet};
use crate::channel::{ChannelError, ChannelScenario, SymbolFrame};
use crate::config::{ConfigError, ExperimentConfig, ExperimentKind};
use crate::crn::{CrnError, ReactionNetwork};
use crate::markov::{transient_curve, DtmcModel, MarkovError};
use crate::netfile;
use crate::receiver::{assemble_full_rx, IntervalPlan, IntervalRecord, RxAssembly, RxRun, SymbolKind, Timing};
use crate::sim::{realization_rng, run_ensemble, Recording, SimError, Simulator};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("realization {realization} (master seed {seed}): {source}")]
    Simulation { realization: usize, seed: u64, source: SimError },
    #[error(transparent)]
    Crn(#[from] CrnError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Markov(#[from] MarkovError),
    #[error(transparent)]
    Bm(#[from] BmError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl ExperimentError {
    /// Errors caused by the configuration rather than by the computation.
    pub fn is_config(&self) -> bool {
        matches!(self, Self::Config(_) | Self::Crn(_))
    }

    fn io(path: &Path) -> impl FnOnce(io::Error) -> Self + '_ {
        move |source| Self::Io { path: path.to_path_buf(), source }
    }
}

pub type Result<T> = std::result::Result<T, ExperimentError>;

/// Stream offset separating channel draws from simulator draws.
const CHANNEL_STREAM: u64 = 1 << 32;

pub fn channel_rng(master_seed: u64, realization: usize) -> ChaCha8Rng {
    realization_rng(master_seed, CHANNEL_STREAM + realization as u64)
}

/// Master seed for the `index`-th scenario of a multi-scenario run.
pub fn scenario_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

pub fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Full receiver with the configured rates, count overrides and detector.
pub fn build_assembly(cfg: &ExperimentConfig, detector: &AdaptiveConfig) -> Result<RxAssembly> {
    let mut asm = assemble_full_rx(detector, &cfg.rates)?;
    for (name, n) in &cfg.counts {
        asm.network.set_initial_count(name, *n)?;
    }
    asm.network.verify_pools_structurally()?;
    Ok(asm)
}

/// Runs a sequence of intervals on a fresh receiver.
pub fn run_intervals(
    asm: &RxAssembly,
    timing: Timing,
    rng: ChaCha8Rng,
    plans: &[IntervalPlan],
    check_pools: bool,
) -> std::result::Result<Vec<IntervalRecord>, SimError> {
    let mut run = RxRun::new(asm, timing, rng);
    run.check_pools_every_event(check_pools);
    plans.iter().map(|p| run.run_interval(p)).collect()
}

/// Interval plans for `frames` frames of `pilots` alternating pilots and
/// `data` random data symbols. PM-ES marks the first pilot, DM-ES the first
/// data symbol of each frame.
pub fn frame_plans<R: Rng + ?Sized>(
    scenario: &ChannelScenario,
    frames: usize,
    pilots: usize,
    data: usize,
    rng: &mut R,
) -> Vec<IntervalPlan> {
    let mut plans = Vec::with_capacity(frames * (pilots + data));
    for _ in 0..frames {
        let frame = SymbolFrame::frame(pilots, data, rng);
        for (j, &(kind, x)) in frame.symbols.iter().enumerate() {
            let n_rb = scenario.draw_symbol(x, rng);
            plans.push(IntervalPlan {
                kind,
                x,
                n_rb,
                pilot_mode_signal: j == 0 && pilots > 0,
                data_mode_signal: j == pilots && data > 0,
            });
        }
    }
    plans
}

/// Scenario in force at symbol `l` of the time-variant plan.
pub fn time_variant_scenario(cfg: &ExperimentConfig, base: &ChannelScenario, l: usize) -> ChannelScenario {
    let tv = &cfg.time_variant;
    if (tv.change_start..tv.change_end).contains(&l) {
        base.with_noise_scale(tv.noise_factor)
    } else {
        base.clone()
    }
}

/// Pilot-only plans with the noise step; PM-ES every `pm_every` symbols.
pub fn time_variant_plans<R: Rng + ?Sized>(cfg: &ExperimentConfig, base: &ChannelScenario, rng: &mut R) -> Vec<IntervalPlan> {
    let tv = &cfg.time_variant;
    let high = base.with_noise_scale(tv.noise_factor);
    SymbolFrame::pilots(tv.symbols)
        .symbols
        .iter()
        .enumerate()
        .map(|(l, &(kind, x))| {
            let s = if (tv.change_start..tv.change_end).contains(&l) { &high } else { base };
            IntervalPlan { kind, x, n_rb: s.draw_symbol(x, rng), pilot_mode_signal: l % tv.pm_every == 0, data_mode_signal: false }
        })
        .collect()
}

// ---------------------------------------------------------------- frames

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameRow {
    pub frame: usize,
    pub mean_ber: f64,
    pub std_ber: f64,
    pub baseline_det: f64,
    pub baseline_asym: f64,
    pub baseline_map: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FramesResult {
    pub scenario: String,
    pub rows: Vec<FrameRow>,
    /// Interval records per realization.
    pub records: Vec<Vec<IntervalRecord>>,
}

/// Deterministic, asymptotic and MAP BER for the data of each frame: the
/// chain has seen `(f + 1) * pilots` pilots when frame `f` carries data.
pub fn frame_baselines(cfg: &ExperimentConfig, scenario: &ChannelScenario) -> Result<Vec<(f64, f64, f64)>> {
    let chain = DtmcModel::from_scenario(scenario, cfg.n_w_total)?;
    let curve = transient_curve(&[(&chain, cfg.frames * cfg.pilots)], cfg.detector.n_w_init as usize)?;
    let asym = chain.expected_ber(&chain.steady_state()?)?;
    let map = scenario.map_ber()?;
    Ok((0..cfg.frames).map(|f| (curve[(f + 1) * cfg.pilots].expected_ber, asym, map)).collect())
}

pub fn run_frames(cfg: &ExperimentConfig, scenario_index: usize) -> Result<FramesResult> {
    let name = &cfg.scenarios[scenario_index];
    let scenario = cfg.scenario(name);
    scenario.validate()?;
    let asm = build_assembly(cfg, &cfg.detector)?;
    let seed = scenario_seed(cfg.seed, scenario_index);
    let per_frame = cfg.pilots + cfg.data;
    log::info!("frames {name}: {} realizations x {} symbols", cfg.realizations, cfg.frames * per_frame);
    let runs = run_ensemble(cfg.realizations, seed, cfg.workers, |i, rng| {
        let plans = frame_plans(&scenario, cfg.frames, cfg.pilots, cfg.data, &mut channel_rng(seed, i));
        let out = run_intervals(&asm, cfg.timing, rng, &plans, cfg.check_pools);
        log::debug!("frames {name}: realization {i} done");
        out
    });
    let records = runs
        .into_iter()
        .enumerate()
        .map(|(realization, r)| r.map_err(|source| ExperimentError::Simulation { realization, seed, source }))
        .collect::<Result<Vec<_>>>()?;
    let baselines = frame_baselines(cfg, &scenario)?;
    let rows = (0..cfg.frames)
        .map(|f| {
            let per_realization: Vec<f64> = records
                .iter()
                .map(|rec| {
                    let data = &rec[f * per_frame + cfg.pilots..(f + 1) * per_frame];
                    data.iter().map(IntervalRecord::error).sum::<f64>() / data.len().max(1) as f64
                })
                .collect();
            let (mean_ber, std_ber) = mean_std(&per_realization);
            let (baseline_det, baseline_asym, baseline_map) = baselines[f];
            FrameRow { frame: f, mean_ber, std_ber, baseline_det, baseline_asym, baseline_map }
        })
        .collect();
    Ok(FramesResult { scenario: name.clone(), rows, records })
}

pub fn write_frames_csv<W: Write>(rows: &[FrameRow], mut w: W) -> io::Result<()> {
    writeln!(w, "frame_index,mean_BER,std_BER,baseline_det,baseline_asym,baseline_MAP")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{},{}", r.frame, r.mean_ber, r.std_ber, r.baseline_det, r.baseline_asym, r.baseline_map)?;
    }
    Ok(())
}

pub fn write_intervals_csv<W: Write>(records: &[Vec<IntervalRecord>], mut w: W) -> io::Result<()> {
    writeln!(w, "realization,interval,kind,x,n_rb,int_XonC,int_XoffC,nW_end,error_flag")?;
    for (i, rec) in records.iter().enumerate() {
        for r in rec {
            writeln!(
                w,
                "{i},{},{},{},{},{},{},{},{}",
                r.index,
                r.kind,
                r.x as u8,
                r.n_rb,
                r.int_xc_on,
                r.int_xc_off,
                r.n_w_end,
                r.error_flag() as u8
            )?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------- time variant

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightRow {
    /// Number of pilots seen.
    pub symbol: usize,
    pub mean_nw: f64,
    pub std_nw: f64,
    pub baseline_det: f64,
    pub baseline_asym: f64,
    pub baseline_map: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightTrajectory {
    pub k_on: f64,
    pub k_off: f64,
    pub rows: Vec<WeightRow>,
    /// `n_W` after each symbol, per realization.
    pub n_w: Vec<Vec<u64>>,
}

/// Chain baselines for the time-variant plan: transient `E[N_W]`, steady
/// `E[N_W]` and `ν^MAP` of the channel in force, one entry per pilot count.
pub fn time_variant_baselines(cfg: &ExperimentConfig, base: &ChannelScenario) -> Result<Vec<(f64, f64, f64)>> {
    let tv = &cfg.time_variant;
    let high = base.with_noise_scale(tv.noise_factor);
    let low_chain = DtmcModel::from_scenario(base, cfg.n_w_total)?;
    let high_chain = DtmcModel::from_scenario(&high, cfg.n_w_total)?;
    let start = tv.change_start.min(tv.symbols);
    let end = tv.change_end.min(tv.symbols);
    let segments = [(&low_chain, start), (&high_chain, end - start), (&low_chain, tv.symbols - end)];
    let curve = transient_curve(&segments, cfg.detector.n_w_init as usize)?;
    let steady = |c: &DtmcModel| -> Result<f64> { Ok(c.expected_weight_count(&c.steady_state()?)?) };
    let (low_steady, high_steady) = (steady(&low_chain)?, steady(&high_chain)?);
    let (low_nu, high_nu) = (base.map_threshold()?.nu as f64, high.map_threshold()?.nu as f64);
    Ok(curve
        .iter()
        .map(|p| {
            // channel of the most recent pilot
            let l = p.l.saturating_sub(1);
            let noisy = (tv.change_start..tv.change_end).contains(&l) && p.l > 0;
            let (s, nu) = if noisy { (high_steady, high_nu) } else { (low_steady, low_nu) };
            (p.expected_n_w, s, nu)
        })
        .collect())
}

fn weight_rows(cfg: &ExperimentConfig, n_w: &[Vec<u64>], baselines: &[(f64, f64, f64)]) -> Vec<WeightRow> {
    (0..=cfg.time_variant.symbols)
        .map(|l| {
            let vals: Vec<f64> = n_w
                .iter()
                .map(|traj| if l == 0 { cfg.detector.n_w_init as f64 } else { traj[l - 1] as f64 })
                .collect();
            let (mean_nw, std_nw) = mean_std(&vals);
            let (baseline_det, baseline_asym, baseline_map) = baselines[l];
            WeightRow { symbol: l, mean_nw, std_nw, baseline_det, baseline_asym, baseline_map }
        })
        .collect()
}

/// Chemical receiver over the time-variant pilot sequence, one ensemble per
/// `(k_on, k_off)` setting.
pub fn run_time_variant(cfg: &ExperimentConfig) -> Result<Vec<WeightTrajectory>> {
    let base = cfg.scenario(&cfg.scenarios[0]);
    base.validate()?;
    let baselines = time_variant_baselines(cfg, &base)?;
    let mut out = Vec::new();
    for (si, &(k_on, k_off)) in cfg.time_variant.rate_settings.iter().enumerate() {
        let detector = AdaptiveConfig { k_on, k_off, ..cfg.detector };
        let asm = build_assembly(cfg, &detector)?;
        let seed = scenario_seed(cfg.seed, si);
        log::info!("time-variant k_on={k_on} k_off={k_off}: {} realizations", cfg.realizations);
        let runs = run_ensemble(cfg.realizations, seed, cfg.workers, |i, rng| {
            let plans = time_variant_plans(cfg, &base, &mut channel_rng(seed, i));
            run_intervals(&asm, cfg.timing, rng, &plans, cfg.check_pools)
        });
        let n_w = runs
            .into_iter()
            .enumerate()
            .map(|(realization, r)| {
                r.map(|rec| rec.iter().map(|x| x.n_w_end).collect())
                    .map_err(|source| ExperimentError::Simulation { realization, seed, source })
            })
            .collect::<Result<Vec<Vec<u64>>>>()?;
        out.push(WeightTrajectory { k_on, k_off, rows: weight_rows(cfg, &n_w, &baselines), n_w });
    }
    Ok(out)
}

/// The learning rule applied algorithmically, `x̂ = [N_rb >= n_W]`, over the
/// time-variant pilot sequence.
pub fn run_threshold_learning(cfg: &ExperimentConfig) -> Result<WeightTrajectory> {
    let base = cfg.scenario(&cfg.scenarios[0]);
    base.validate()?;
    let baselines = time_variant_baselines(cfg, &base)?;
    let n_w = run_ensemble(cfg.realizations, cfg.seed, cfg.workers, |i, _| {
        let plans = time_variant_plans(cfg, &base, &mut channel_rng(cfg.seed, i));
        let mut w = cfg.detector.n_w_init;
        plans
            .iter()
            .map(|p| {
                w = adaptive::update_threshold(w, p.n_rb >= w, p.x);
                w
            })
            .collect::<Vec<u64>>()
    });
    Ok(WeightTrajectory {
        k_on: cfg.detector.k_on,
        k_off: cfg.detector.k_off,
        rows: weight_rows(cfg, &n_w, &baselines),
        n_w,
    })
}

pub fn write_weight_csv<W: Write>(trajectories: &[WeightTrajectory], mut w: W) -> io::Result<()> {
    writeln!(w, "k_on,k_off,symbol_index,mean_nW,std_nW,baseline_det,baseline_asym,baseline_MAP")?;
    for t in trajectories {
        for r in &t.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                t.k_on, t.k_off, r.symbol, r.mean_nw, r.std_nw, r.baseline_det, r.baseline_asym, r.baseline_map
            )?;
        }
    }
    Ok(())
}

// -------------------------------------------------------- single interval

/// One pilot interval from the default initial state with `n_W` preset; returns the
/// interval record and the full event trajectory.
pub fn run_single_interval(cfg: &ExperimentConfig) -> Result<(IntervalRecord, crate::Trajectory, ReactionNetwork)> {
    let detector = AdaptiveConfig { n_w_init: cfg.interval.n_w, ..cfg.detector };
    let asm = build_assembly(cfg, &detector)?;
    let mut run = RxRun::new(&asm, cfg.timing, realization_rng(cfg.seed, 0));
    run.check_pools_every_event(cfg.check_pools);
    run.simulator_mut().set_recording(Recording::Events);
    let plan = IntervalPlan {
        kind: SymbolKind::Pilot,
        x: cfg.interval.x,
        n_rb: cfg.interval.n_rb,
        pilot_mode_signal: !cfg.interval.x,
        data_mode_signal: false,
    };
    let rec = run
        .run_interval(&plan)
        .map_err(|source| ExperimentError::Simulation { realization: 0, seed: cfg.seed, source })?;
    let traj = run.simulator_mut().take_trajectory();
    Ok((rec, traj, asm.network.clone()))
}

// -------------------------------------------------------------- bm study

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorRealization {
    pub n_t: usize,
    pub realization: usize,
    pub bm_ber: f64,
    pub adaptive_ber: f64,
    pub adaptive_n_w: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerBar {
    pub detector: &'static str,
    pub n_t: usize,
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

impl BerBar {
    pub fn spread(&self) -> f64 {
        self.max - self.min
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BmStudyResult {
    pub scenario: String,
    pub map_ber: f64,
    pub bars: Vec<BerBar>,
    pub realizations: Vec<DetectorRealization>,
}

/// Trains one BM and one adaptive detector on the same `n_t` samples and
/// counts their errors on fresh symbols. The adaptive detector learns with
/// `x̂ = [N_rb >= n_W]` and decides through the stationary ON probability.
pub fn detector_realization(
    cfg: &ExperimentConfig,
    scenario: &ChannelScenario,
    n_t: usize,
    realization: usize,
    rng: &mut ChaCha8Rng,
) -> Result<DetectorRealization> {
    let data = TrainingSet::generate(scenario, n_t, rng);
    let mut machine = BoltzmannMachine::random_init(scenario.n_r as usize + 1, rng);
    bm::train(&mut machine, &data, &cfg.bm.train, rng)?;
    let mut n_w = cfg.detector.n_w_init;
    for (x, y) in &data.samples {
        let n_rb = y.iter().filter(|&&b| b).count() as u64;
        n_w = adaptive::update_threshold(n_w, n_rb >= n_w, *x);
    }
    let (k_on, k_off) = (cfg.detector.k_on, cfg.detector.k_off);
    let (mut bm_err, mut ad_err) = (0usize, 0usize);
    for _ in 0..cfg.bm.eval_symbols {
        let x = rng.random::<bool>();
        let c = scenario.draw_received_concentration(x, rng);
        let y = scenario.draw_receptor_pattern(c, rng);
        let n_rb = y.iter().filter(|&&b| b).count() as u64;
        bm_err += (machine.detect(&y, cfg.bm.samples, rng) != x) as usize;
        ad_err += (adaptive::decide(n_rb, n_w, k_on, k_off) != x) as usize;
    }
    let n = cfg.bm.eval_symbols.max(1) as f64;
    Ok(DetectorRealization { n_t, realization, bm_ber: bm_err as f64 / n, adaptive_ber: ad_err as f64 / n, adaptive_n_w: n_w })
}

fn bar(detector: &'static str, n_t: usize, v: &[f64]) -> BerBar {
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    BerBar { detector, n_t, min, mean: mean_std(v).0, max }
}

pub fn run_bm_study(cfg: &ExperimentConfig, scenario_index: usize) -> Result<BmStudyResult> {
    let name = &cfg.scenarios[scenario_index];
    let scenario = cfg.scenario(name);
    scenario.validate()?;
    let map_ber = scenario.map_ber()?;
    let seed = scenario_seed(cfg.seed, scenario_index);
    let d = cfg.bm.detectors;
    let jobs = cfg.bm.n_t.len() * d;
    log::info!("bm-study {name}: {jobs} detector pairs, {} evaluation symbols each", cfg.bm.eval_symbols);
    let realizations = run_ensemble(jobs, seed, cfg.workers, |j, mut rng| {
        detector_realization(cfg, &scenario, cfg.bm.n_t[j / d], j % d, &mut rng)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut bars = Vec::new();
    for (k, &n_t) in cfg.bm.n_t.iter().enumerate() {
        let chunk = &realizations[k * d..(k + 1) * d];
        bars.push(bar("bm", n_t, &chunk.iter().map(|r| r.bm_ber).collect::<Vec<_>>()));
        bars.push(bar("adaptive", n_t, &chunk.iter().map(|r| r.adaptive_ber).collect::<Vec<_>>()));
    }
    Ok(BmStudyResult { scenario: name.clone(), map_ber, bars, realizations })
}

pub fn write_bm_study_csv<W: Write>(results: &[BmStudyResult], mut w: W) -> io::Result<()> {
    writeln!(w, "scenario,detector,n_t,min_BER,mean_BER,max_BER,MAP_BER")?;
    for r in results {
        for b in &r.bars {
            writeln!(w, "{},{},{},{},{},{},{}", r.scenario, b.detector, b.n_t, b.min, b.mean, b.max, r.map_ber)?;
        }
    }
    Ok(())
}

pub fn write_bm_realizations_csv<W: Write>(results: &[BmStudyResult], mut w: W) -> io::Result<()> {
    writeln!(w, "scenario,n_t,realization,bm_BER,adaptive_BER,adaptive_nW")?;
    for r in results {
        for d in &r.realizations {
            writeln!(w, "{},{},{},{},{},{}", r.scenario, d.n_t, d.realization, d.bm_ber, d.adaptive_ber, d.adaptive_n_w)?;
        }
    }
    Ok(())
}

// -------------------------------------------------------------- baselines

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineSummary {
    pub scenario: String,
    pub nu_map: u32,
    pub map_ber: f64,
    pub asymptotic_ber: f64,
    pub steady_n_w: f64,
    pub mode_n_w: usize,
}

pub fn baseline_summary(cfg: &ExperimentConfig, name: &str) -> Result<BaselineSummary> {
    let scenario = cfg.scenario(name);
    let chain = DtmcModel::from_scenario(&scenario, cfg.n_w_total)?;
    let pi = chain.steady_state()?;
    Ok(BaselineSummary {
        scenario: name.to_string(),
        nu_map: scenario.map_threshold()?.nu,
        map_ber: scenario.map_ber()?,
        asymptotic_ber: chain.expected_ber(&pi)?,
        steady_n_w: chain.expected_weight_count(&pi)?,
        mode_n_w: DtmcModel::mode(&pi),
    })
}

/// Transient `(l, E[BER], E[N_W])` over `pilots` pilots on a constant channel.
pub fn write_baseline_curve<W: Write>(cfg: &ExperimentConfig, name: &str, pilots: usize, mut w: W) -> Result<()> {
    let scenario = cfg.scenario(name);
    let chain = DtmcModel::from_scenario(&scenario, cfg.n_w_total)?;
    let curve = transient_curve(&[(&chain, pilots)], cfg.detector.n_w_init as usize)?;
    let mut body = String::from("l,E_BER,E_NW\n");
    for p in curve {
        body.push_str(&format!("{},{},{}\n", p.l, p.expected_ber, p.expected_n_w));
    }
    w.write_all(body.as_bytes()).map_err(ExperimentError::io(Path::new(name)))?;
    Ok(())
}

pub fn write_baseline_summary_csv<W: Write>(rows: &[BaselineSummary], mut w: W) -> io::Result<()> {
    writeln!(w, "scenario,nu_MAP,MAP_BER,asymptotic_BER,steady_E_NW,mode_NW")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{},{}", r.scenario, r.nu_map, r.map_ber, r.asymptotic_ber, r.steady_n_w, r.mode_n_w)?;
    }
    Ok(())
}

// ----------------------------------------------------------------- driver

fn create(dir: &Path, file: &str) -> Result<(PathBuf, BufWriter<File>)> {
    let path = dir.join(file);
    let f = File::create(&path).map_err(ExperimentError::io(&path))?;
    Ok((path, BufWriter::new(f)))
}

fn emit<F>(dir: &Path, file: &str, written: &mut Vec<PathBuf>, f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> io::Result<()>,
{
    let (path, mut w) = create(dir, file)?;
    f(&mut w).and_then(|_| w.flush()).map_err(ExperimentError::io(&path))?;
    written.push(path);
    Ok(())
}

/// Writes the baseline CSVs for every configured scenario.
pub fn run_baselines(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let dir = &cfg.out;
    fs::create_dir_all(dir).map_err(ExperimentError::io(dir))?;
    let mut written = Vec::new();
    let mut summaries = Vec::new();
    let pilots = cfg.time_variant.symbols.max(cfg.frames * cfg.pilots);
    for name in &cfg.scenarios {
        summaries.push(baseline_summary(cfg, name)?);
        let (path, mut w) = create(dir, &format!("baseline_{name}.csv"))?;
        write_baseline_curve(cfg, name, pilots, &mut w)?;
        w.flush().map_err(ExperimentError::io(&path))?;
        written.push(path);
    }
    emit(dir, "baseline_summary.csv", &mut written, |w| write_baseline_summary_csv(&summaries, w))?;
    let base = cfg.scenario(&cfg.scenarios[0]);
    let tv = time_variant_baselines(cfg, &base)?;
    emit(dir, "baseline_time_variant.csv", &mut written, |w| {
        writeln!(w, "l,E_NW,steady_E_NW,nu_MAP")?;
        for (l, (a, b, c)) in tv.iter().enumerate() {
            writeln!(w, "{l},{a},{b},{c}")?;
        }
        Ok(())
    })?;
    Ok(written)
}

/// Runs the configured experiment and writes its CSVs to `cfg.out`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let dir = &cfg.out;
    fs::create_dir_all(dir).map_err(ExperimentError::io(dir))?;
    let mut written = Vec::new();
    match cfg.kind {
        ExperimentKind::Frames => {
            for i in 0..cfg.scenarios.len() {
                let res = run_frames(cfg, i)?;
                let s = &res.scenario;
                emit(dir, &format!("frames_{s}.csv"), &mut written, |w| write_frames_csv(&res.rows, w))?;
                emit(dir, &format!("intervals_{s}.csv"), &mut written, |w| write_intervals_csv(&res.records, w))?;
            }
        }
        ExperimentKind::TimeVariant => {
            let res = run_time_variant(cfg)?;
            emit(dir, "time_variant.csv", &mut written, |w| write_weight_csv(&res, w))?;
        }
        ExperimentKind::ThresholdLearning => {
            let res = run_threshold_learning(cfg)?;
            emit(dir, "threshold_learning.csv", &mut written, |w| write_weight_csv(&[res], w))?;
        }
        ExperimentKind::SingleInterval => {
            let (rec, traj, net) = run_single_interval(cfg)?;
            emit(dir, "interval_trajectory.csv", &mut written, |w| traj.write_csv(&net, w))?;
            emit(dir, "interval_summary.csv", &mut written, |w| {
                writeln!(w, "interval_index,int_XonC,int_XoffC,n_W_end")?;
                writeln!(w, "{},{},{},{}", rec.index, rec.int_xc_on, rec.int_xc_off, rec.n_w_end)
            })?;
        }
        ExperimentKind::BmStudy => {
            let res = (0..cfg.scenarios.len()).map(|i| run_bm_study(cfg, i)).collect::<Result<Vec<_>>>()?;
            emit(dir, "bm_study.csv", &mut written, |w| write_bm_study_csv(&res, w))?;
            emit(dir, "bm_study_realizations.csv", &mut written, |w| write_bm_realizations_csv(&res, w))?;
        }
        ExperimentKind::Network => {
            let path = cfg.network_file.as_ref().expect("validated");
            let text = fs::read_to_string(path).map_err(ExperimentError::io(path))?;
            let net = netfile::parse_network(&text)?;
            let (traj, finals) = run_network(cfg, &net)?;
            emit(dir, "trajectory.csv", &mut written, |w| traj.write_csv(&net, w))?;
            emit(dir, "final_counts.csv", &mut written, |w| {
                let names: Vec<&str> = net.species().iter().map(|s| s.name.as_str()).collect();
                writeln!(w, "realization,{}", names.join(","))?;
                for (i, c) in finals.iter().enumerate() {
                    let vals: Vec<String> = c.iter().map(u64::to_string).collect();
                    writeln!(w, "{i},{}", vals.join(","))?;
                }
                Ok(())
            })?;
        }
    }
    Ok(written)
}

/// Simulates a network to `t_end`: the first realization's trajectory and
/// the final state of every realization.
pub fn run_network(cfg: &ExperimentConfig, net: &ReactionNetwork) -> Result<(crate::Trajectory, Vec<Vec<u64>>)> {
    let runs = run_ensemble(cfg.realizations, cfg.seed, cfg.workers, |i, rng| {
        let mut sim = Simulator::new(net, rng);
        if i == 0 {
            sim.set_recording(Recording::Events);
        }
        sim.advance(cfg.t_end)?;
        let traj = if i == 0 { Some(sim.take_trajectory()) } else { None };
        Ok::<_, SimError>((traj, sim.counts().to_vec()))
    });
    let mut traj = None;
    let mut finals = Vec::new();
    for (realization, r) in runs.into_iter().enumerate() {
        let (t, c) = r.map_err(|source| ExperimentError::Simulation { realization, seed: cfg.seed, source })?;
        traj = traj.or(t);
        finals.push(c);
    }
    Ok((traj.expect("at least one realization"), finals))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_plan_layout() {
        let s = ChannelScenario::s1();
        let plans = frame_plans(&s, 20, 10, 20, &mut realization_rng(1, 1));
        assert_eq!(plans.len(), 600);
        assert!(plans[0].pilot_mode_signal && !plans[1].pilot_mode_signal);
        assert!(plans[10].data_mode_signal && plans[10].kind == SymbolKind::Data);
        assert!(plans[30].pilot_mode_signal);
        assert_eq!(plans.iter().filter(|p| p.kind == SymbolKind::Pilot).count(), 200);
        assert!(plans.iter().all(|p| p.n_rb <= 30));
    }

    #[test]
    fn time_variant_pm_cadence_and_noise_step() {
        let cfg = ExperimentConfig::default();
        let s = ChannelScenario::s1();
        let plans = time_variant_plans(&cfg, &s, &mut realization_rng(1, 1));
        assert_eq!(plans.len(), 750);
        assert!(plans.iter().enumerate().all(|(l, p)| p.pilot_mode_signal == (l % 2 == 0) && p.x == (l % 2 == 1)));
        let mean = |r: std::ops::Range<usize>| r.clone().map(|l| plans[l].n_rb as f64).sum::<f64>() / r.len() as f64;
        assert!(mean(250..500) > mean(0..250) + 3.0);
    }

    #[test]
    fn mean_std_sample() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
        assert_eq!(mean_std(&[4.0]), (4.0, 0.0));
    }

    #[test]
    fn frame_baselines_start_at_transient_and_end_near_asymptote() {
        let cfg = ExperimentConfig::default();
        let b = frame_baselines(&cfg, &ChannelScenario::s1()).unwrap();
        assert_eq!(b.len(), 20);
        assert!(b[0].0 > b[19].0);
        assert!((b[19].0 - b[19].1).abs() < 0.01);
        assert!(b[19].1 >= b[19].2);
    }
}
