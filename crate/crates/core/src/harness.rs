//! Experiment driver: schedulability sweeps, exclusive-count tables,
//! soundness campaigns and their CSV/SVG output.
//!
//! # Seeds
//!
//! System `k` of the point with value `v` on parameter `p` is generated
//! with seed `H(master, p, v, k)`, where `H` chains the splitmix64
//! finaliser: `mix(mix(mix(mix(master) ^ p) ^ bits(v)) ^ k)`. A point's
//! systems therefore depend only on its own value, never on the other
//! points of the sweep.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{analyze, OverheadModel, Protocol};
use crate::error::HarnessError;
use crate::model::TaskId;
use crate::sim::{probe_instance, simulate_with, FaultSchedule, ProbeInstance, ReleasePattern, SimOptions};
use crate::taskgen::{generate, GenConfig};

pub const DESK_SYSTEMS_PER_POINT: usize = 200;
pub const FULL_SYSTEMS_PER_POINT: usize = 1000;

/// splitmix64 finaliser.
pub fn mix(z: u64) -> u64 {
    let mut z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SweepParam {
    /// Core count.
    M,
    /// Tasks per core, with the core count held at its base value.
    N,
    #[serde(rename = "rsf")]
    Rsf,
    /// Upper bound of the critical-section length range; lower bound 1.
    L,
    /// Maximum accesses per resource per release.
    A,
    /// Maximum faults per release.
    #[serde(rename = "f")]
    F,
}

impl SweepParam {
    pub const ALL: [SweepParam; 6] = [
        SweepParam::M,
        SweepParam::N,
        SweepParam::Rsf,
        SweepParam::L,
        SweepParam::A,
        SweepParam::F,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::M => "M",
            SweepParam::N => "N",
            SweepParam::Rsf => "rsf",
            SweepParam::L => "L",
            SweepParam::A => "A",
            SweepParam::F => "f",
        }
    }

    fn index(self) -> u64 {
        self as u64
    }

    pub fn default_values(self) -> Vec<f64> {
        match self {
            SweepParam::M => (1..=8).map(|k| (2 * k) as f64).collect(),
            SweepParam::N => (2..=9).map(|k| k as f64).collect(),
            SweepParam::Rsf => (0..=8).map(|k| k as f64 / 10.0).collect(),
            SweepParam::L => vec![15.0, 50.0, 100.0, 150.0, 200.0, 250.0, 300.0],
            SweepParam::A => vec![1.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0],
            SweepParam::F => (0..=7).map(|k| k as f64).collect(),
        }
    }

    pub fn axis_label(self) -> &'static str {
        match self {
            SweepParam::M => "number of cores M",
            SweepParam::N => "tasks per core N (M fixed)",
            SweepParam::Rsf => "resource sharing factor rsf",
            SweepParam::L => "critical section length upper bound L (us)",
            SweepParam::A => "maximum accesses per resource A",
            SweepParam::F => "maximum faults per release f",
        }
    }

    /// The generator configuration for one point.
    pub fn apply(self, base: &GenConfig, value: f64) -> GenConfig {
        let mut cfg = base.clone();
        match self {
            SweepParam::M => cfg.cores = value as usize,
            SweepParam::N => cfg.tasks_per_core = value as usize,
            SweepParam::Rsf => cfg.rsf = value,
            SweepParam::L => cfg.cs_range = (1, value as u64),
            SweepParam::A => cfg.max_accesses = value as u32,
            SweepParam::F => cfg.f_max = value as u32,
        }
        cfg
    }
}

impl FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "NM" | "N*M" => Ok(SweepParam::N),
            _ => SweepParam::ALL
                .into_iter()
                .find(|p| p.name() == s)
                .ok_or_else(|| format!("unknown sweep parameter `{s}` (expected M, N, rsf, L, A or f)")),
        }
    }
}

pub fn system_seed(master: u64, param: SweepParam, value: f64, k: u64) -> u64 {
    mix(mix(mix(mix(master) ^ param.index()) ^ value.to_bits()) ^ k)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub base: GenConfig,
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub systems_per_point: usize,
    pub protocols: Vec<Protocol>,
    pub master_seed: u64,
    pub overheads: OverheadModel,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig::for_param(SweepParam::F)
    }
}

impl SweepConfig {
    pub fn for_param(param: SweepParam) -> Self {
        SweepConfig {
            base: GenConfig::default(),
            param,
            values: param.default_values(),
            systems_per_point: DESK_SYSTEMS_PER_POINT,
            protocols: Protocol::ALL.to_vec(),
            master_seed: 1,
            overheads: OverheadModel::MEASURED,
        }
    }

    pub fn check(&self) -> Result<(), HarnessError> {
        if self.values.is_empty() {
            return Err(HarnessError::InvalidConfig("value list is empty".into()));
        }
        if self.systems_per_point == 0 {
            return Err(HarnessError::InvalidConfig(
                "systems_per_point must be at least 1".into(),
            ));
        }
        if self.protocols.is_empty() {
            return Err(HarnessError::InvalidConfig("no protocols selected".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolCount {
    pub protocol: Protocol,
    pub schedulable: usize,
    pub count: usize,
    pub fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub value: f64,
    /// Set when the generator rejected this point's configuration.
    pub skipped: Option<String>,
    pub counts: Vec<ProtocolCount>,
    /// Per system, one verdict per protocol in `SchedulabilityCurve::protocols` order.
    pub verdicts: Vec<Vec<bool>>,
}

impl PointResult {
    pub fn count(&self, p: Protocol) -> Option<&ProtocolCount> {
        self.counts.iter().find(|c| c.protocol == p)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchedulabilityCurve {
    pub param: SweepParam,
    pub protocols: Vec<Protocol>,
    pub systems_per_point: usize,
    pub points: Vec<PointResult>,
}

fn verdicts_for(cfg: &SweepConfig, gen: &GenConfig, value: f64, k: u64) -> Result<Vec<bool>, HarnessError> {
    let mut g = gen.clone();
    g.seed = system_seed(cfg.master_seed, cfg.param, value, k);
    let sys = generate(&g)?;
    cfg.protocols
        .iter()
        .map(|&p| Ok(analyze(&sys, p, &cfg.overheads)?.schedulable))
        .collect()
}

pub fn sweep(cfg: &SweepConfig) -> Result<SchedulabilityCurve, HarnessError> {
    cfg.check()?;
    let n = cfg.systems_per_point;
    let gens: Vec<(f64, Result<GenConfig, String>)> = cfg
        .values
        .iter()
        .map(|&v| {
            let g = cfg.param.apply(&cfg.base, v);
            let checked = g.check().map(|_| g).map_err(|e| e.to_string());
            (v, checked)
        })
        .collect();
    let jobs: Vec<(usize, u64)> = gens
        .iter()
        .enumerate()
        .filter(|(_, (_, g))| g.is_ok())
        .flat_map(|(p, _)| (0..n as u64).map(move |k| (p, k)))
        .collect();
    let results: Vec<Result<Vec<bool>, HarnessError>> = jobs
        .par_iter()
        .map(|&(p, k)| {
            let (v, g) = &gens[p];
            verdicts_for(cfg, g.as_ref().expect("filtered"), *v, k)
        })
        .collect();

    let mut results = results.into_iter();
    let mut points = Vec::with_capacity(gens.len());
    for (value, g) in &gens {
        if let Err(why) = g {
            points.push(PointResult {
                value: *value,
                skipped: Some(why.clone()),
                counts: Vec::new(),
                verdicts: Vec::new(),
            });
            continue;
        }
        let mut verdicts = Vec::with_capacity(n);
        let mut skipped = None;
        for _ in 0..n {
            match results.next().expect("one result per system") {
                Ok(v) => verdicts.push(v),
                Err(e) => skipped = Some(e.to_string()),
            }
        }
        let counts = cfg
            .protocols
            .iter()
            .enumerate()
            .map(|(pi, &protocol)| {
                let schedulable = verdicts.iter().filter(|v| v[pi]).count();
                ProtocolCount {
                    protocol,
                    schedulable,
                    count: verdicts.len(),
                    fraction: if verdicts.is_empty() {
                        0.0
                    } else {
                        schedulable as f64 / verdicts.len() as f64
                    },
                }
            })
            .collect();
        points.push(PointResult {
            value: *value,
            skipped,
            counts,
            verdicts,
        });
    }
    Ok(SchedulabilityCurve {
        param: cfg.param,
        protocols: cfg.protocols.clone(),
        systems_per_point: n,
        points,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExclusiveRow {
    pub value: f64,
    /// Schedulable under MSRP-FT but not LEFT-RS.
    pub msrpft_only: usize,
    /// Schedulable under LEFT-RS but not MSRP-FT.
    pub leftrs_only: usize,
}

/// Per point, systems schedulable by exactly one of MSRP-FT and LEFT-RS.
pub fn exclusive_table(curve: &SchedulabilityCurve) -> Result<Vec<ExclusiveRow>, HarnessError> {
    let idx = |p: Protocol| {
        curve
            .protocols
            .iter()
            .position(|&q| q == p)
            .ok_or_else(|| HarnessError::InvalidConfig(format!("the curve has no {p} verdicts")))
    };
    let (a, b) = (idx(Protocol::MsrpFt)?, idx(Protocol::LeftRs)?);
    Ok(curve
        .points
        .iter()
        .map(|pt| ExclusiveRow {
            value: pt.value,
            msrpft_only: pt.verdicts.iter().filter(|v| v[a] && !v[b]).count(),
            leftrs_only: pt.verdicts.iter().filter(|v| v[b] && !v[a]).count(),
        })
        .collect())
}

/// Mean over points of `(count_a - count_b) / count_b`, skipping points
/// where `b` schedules nothing.
pub fn mean_relative_improvement(curve: &SchedulabilityCurve, a: Protocol, b: Protocol) -> Option<f64> {
    let ratios: Vec<f64> = curve
        .points
        .iter()
        .filter_map(|pt| {
            let (ca, cb) = (pt.count(a)?.schedulable, pt.count(b)?.schedulable);
            (cb > 0).then(|| (ca as f64 - cb as f64) / cb as f64)
        })
        .collect();
    (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64)
}

fn fmt_value(v: f64) -> String {
    let s = format!("{v}");
    s
}

pub fn curve_csv(curve: &SchedulabilityCurve) -> String {
    let mut s = String::from("param,value,protocol,schedulable,count,fraction\n");
    for pt in &curve.points {
        for c in &pt.counts {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{:.4}",
                curve.param.name(),
                fmt_value(pt.value),
                c.protocol,
                c.schedulable,
                c.count,
                c.fraction
            );
        }
    }
    s
}

pub fn exclusive_csv(param: SweepParam, rows: &[ExclusiveRow]) -> String {
    let mut s = String::from("param,value,exclA,exclB\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            param.name(),
            fmt_value(r.value),
            r.msrpft_only,
            r.leftrs_only
        );
    }
    s
}

fn color(p: Protocol) -> &'static str {
    match p {
        Protocol::LeftRs => "#d62728",
        Protocol::MsrpFt => "#1f77b4",
        Protocol::MsrpFtOf => "#2ca02c",
        Protocol::Checkpointing => "#ff7f0e",
    }
}

/// Line chart of schedulable fraction against the swept value.
pub fn plot_svg(curve: &SchedulabilityCurve) -> Result<String, HarnessError> {
    if curve.protocols.is_empty() {
        return Err(HarnessError::EmptyPlot("no protocols"));
    }
    let points: Vec<&PointResult> = curve.points.iter().filter(|p| p.skipped.is_none()).collect();
    if points.is_empty() {
        return Err(HarnessError::EmptyPlot("no evaluated points"));
    }
    let (w, h) = (640.0, 420.0);
    let (left, right, top, bottom) = (60.0, 150.0, 20.0, 50.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let n = points.len();
    let x_at = |i: usize| {
        if n == 1 {
            left + pw / 2.0
        } else {
            left + pw * i as f64 / (n - 1) as f64
        }
    };
    let y_at = |f: f64| top + ph * (1.0 - f);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    for k in 0..=5 {
        let f = k as f64 / 5.0;
        let y = y_at(f);
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{y}" x2="{}" y2="{y}" stroke="#ddd"/><text x="{}" y="{}" text-anchor="end">{f:.1}</text>"##,
            left + pw,
            left - 6.0,
            y + 4.0
        );
    }
    for (i, pt) in points.iter().enumerate() {
        let x = x_at(i);
        let _ = writeln!(
            s,
            r##"<line x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="#333"/><text x="{x}" y="{}" text-anchor="middle">{}</text>"##,
            top + ph,
            top + ph + 5.0,
            top + ph + 18.0,
            fmt_value(pt.value)
        );
    }
    let _ = writeln!(
        s,
        r##"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>"##
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        left + pw / 2.0,
        h - 12.0,
        curve.param.axis_label()
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">schedulable fraction</text>"#,
        top + ph / 2.0,
        top + ph / 2.0
    );
    for (li, &p) in curve.protocols.iter().enumerate() {
        let coords: Vec<(f64, f64)> = points
            .iter()
            .enumerate()
            .filter_map(|(i, pt)| pt.count(p).map(|c| (x_at(i), y_at(c.fraction))))
            .collect();
        let path: Vec<String> = coords.iter().map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
        let _ = writeln!(
            s,
            r#"<polyline class="series" data-protocol="{p}" fill="none" stroke="{}" stroke-width="2" points="{}"/>"#,
            color(p),
            path.join(" ")
        );
        for (x, y) in coords {
            let _ = writeln!(
                s,
                r#"<circle class="marker" data-protocol="{p}" cx="{x:.1}" cy="{y:.1}" r="3.5" fill="{}"/>"#,
                color(p)
            );
        }
        let ly = top + 10.0 + 18.0 * li as f64;
        let lx = left + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{}" stroke-width="2"/><text x="{}" y="{}">{p}</text>"#,
            lx + 20.0,
            color(p),
            lx + 26.0,
            ly + 4.0
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
                path: dir.display().to_string(),
                source,
            })?;
        }
    }
    fs::write(path, contents).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Writes the SVG and the CSV next to it (same stem, `.csv`).
pub fn plot(curve: &SchedulabilityCurve, out_path: &Path) -> Result<(), HarnessError> {
    let svg = plot_svg(curve)?;
    write_file(out_path, &svg)?;
    write_file(&out_path.with_extension("csv"), &curve_csv(curve))
}

/// Writes `<param>_curve.csv`, `<param>_exclusive.csv` (when both MSRP-FT
/// and LEFT-RS are present), `<param>_curve.json` and `<param>.svg`.
pub fn write_sweep_outputs(curve: &SchedulabilityCurve, dir: &Path) -> Result<Vec<String>, HarnessError> {
    let name = curve.param.name();
    let mut written = Vec::new();
    let mut put = |file: String, body: &str| -> Result<(), HarnessError> {
        let p = dir.join(&file);
        write_file(&p, body)?;
        written.push(p.display().to_string());
        Ok(())
    };
    put(format!("{name}_curve.csv"), &curve_csv(curve))?;
    if let Ok(rows) = exclusive_table(curve) {
        put(
            format!("{name}_exclusive.csv"),
            &exclusive_csv(curve.param, &rows),
        )?;
    }
    let json = serde_json::to_string_pretty(curve).expect("curves serialise");
    put(format!("{name}_curve.json"), &json)?;
    put(format!("{name}.svg"), &plot_svg(curve)?)?;
    Ok(written)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SoundnessConfig {
    pub gen: GenConfig,
    pub n_systems: usize,
    pub seeds_per_system: u64,
    /// Also run the exhaustive single-request probe.
    pub small: bool,
    pub master_seed: u64,
    /// Give up after generating this many candidate systems.
    pub max_candidates: usize,
}

impl Default for SoundnessConfig {
    fn default() -> Self {
        SoundnessConfig {
            gen: GenConfig::default(),
            n_systems: 100,
            seeds_per_system: 100,
            small: false,
            master_seed: 1,
            max_candidates: 100_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SoundnessViolation {
    pub system_seed: u64,
    pub sim_seed: u64,
    pub task: TaskId,
    pub observed_us: u64,
    pub bound_us: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeFinding {
    pub target_n: u32,
    pub predecessor_ns: Vec<u32>,
    /// In quarter critical-section units.
    pub observed: u64,
    pub cap: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub instances: usize,
    pub findings: Vec<ProbeFinding>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SoundnessReport {
    pub candidates: usize,
    pub systems: usize,
    pub simulations: u64,
    pub jobs: u64,
    pub violations: Vec<SoundnessViolation>,
    pub probe: Option<ProbeReport>,
}

impl SoundnessReport {
    pub fn is_clean(&self) -> bool {
        self.systems > 0
            && self.violations.is_empty()
            && self.probe.as_ref().is_none_or(|p| p.findings.is_empty())
    }
}

/// Every admissible small single-request instance: up to three
/// predecessors, execution counts up to four, all FIFO orders.
pub fn small_probe_instances() -> Vec<ProbeInstance> {
    let mut out = Vec::new();
    for m in 0..=3u32 {
        for code in 0..4u32.pow(m) {
            let preds: Vec<u32> = (0..m).map(|p| code / 4u32.pow(p) % 4 + 1).collect();
            for target_n in 1..=4 {
                out.push(ProbeInstance {
                    target_n,
                    predecessor_ns: preds.clone(),
                });
            }
        }
    }
    out
}

/// Probes every small instance against the `(n + m + 1) c` cap and, when
/// all predecessors are fault-free, the exact `(n + m) c` value.
pub fn probe_report(bound: usize) -> Result<ProbeReport, HarnessError> {
    let instances = small_probe_instances();
    let results: Vec<Result<Option<ProbeFinding>, String>> = instances
        .par_iter()
        .map(|inst| {
            let got = probe_instance(inst, bound).map_err(|e| e.to_string())?;
            let m = inst.predecessor_ns.len() as u64;
            let n = inst.target_n as u64;
            let quarter = 4;
            let cap = (n + m + 1) * quarter;
            let exact = inst.predecessor_ns.iter().all(|&p| p == 1);
            let bad = got > cap || (exact && got != (n + m) * quarter);
            Ok(bad.then(|| ProbeFinding {
                target_n: inst.target_n,
                predecessor_ns: inst.predecessor_ns.clone(),
                observed: got,
                cap: if exact { (n + m) * quarter } else { cap },
            }))
        })
        .collect();
    let mut findings = Vec::new();
    for r in results {
        if let Some(f) = r.map_err(HarnessError::InvalidConfig)? {
            findings.push(f);
        }
    }
    Ok(ProbeReport {
        instances: instances.len(),
        findings,
    })
}

/// Simulates LEFT-RS-schedulable systems under randomized faults and
/// sporadic releases and reports every job that outlives its bound.
pub fn soundness_campaign(cfg: &SoundnessConfig) -> Result<SoundnessReport, HarnessError> {
    cfg.gen.check()?;
    let batch = 64;
    let mut chosen = Vec::new();
    let mut candidates = 0;
    while chosen.len() < cfg.n_systems && candidates < cfg.max_candidates {
        let hi = (candidates + batch).min(cfg.max_candidates);
        let found: Vec<Option<(u64, crate::model::SystemSpec, Vec<u64>)>> = (candidates..hi)
            .into_par_iter()
            .map(|k| {
                let mut g = cfg.gen.clone();
                g.seed = mix(mix(cfg.master_seed) ^ k as u64);
                let sys = generate(&g).ok()?;
                let a = analyze(&sys, Protocol::LeftRs, &OverheadModel::MEASURED).ok()?;
                a.schedulable.then(|| {
                    (
                        g.seed,
                        sys.clone(),
                        sys.tasks
                            .iter()
                            .map(|t| a.task(t.id).map_or(0, |r| r.r))
                            .collect(),
                    )
                })
            })
            .collect();
        for f in found.into_iter().flatten() {
            if chosen.len() < cfg.n_systems {
                chosen.push(f);
            }
        }
        candidates = hi;
    }

    let per_system: Vec<(u64, u64, Vec<SoundnessViolation>)> = chosen
        .par_iter()
        .map(|(seed, sys, bounds)| {
            let horizon = sys.tasks.iter().map(|t| t.d).max().unwrap_or(1);
            let mut jobs = 0;
            let mut sims = 0;
            let mut bad = Vec::new();
            for s in 0..cfg.seeds_per_system {
                let sim_seed = mix(*seed ^ s);
                let mut o = SimOptions::new(
                    Protocol::LeftRs,
                    ReleasePattern::Sporadic { seed: sim_seed },
                    FaultSchedule::Randomized { seed: sim_seed },
                    horizon,
                );
                o.record_events = false;
                let Ok(trace) = simulate_with(sys, &o) else {
                    continue;
                };
                sims += 1;
                jobs += trace.jobs.len() as u64;
                for (task, observed) in trace.max_response() {
                    let pos = sys.tasks.iter().position(|t| t.id == task).unwrap_or(0);
                    if observed > bounds[pos] {
                        bad.push(SoundnessViolation {
                            system_seed: *seed,
                            sim_seed,
                            task,
                            observed_us: observed,
                            bound_us: bounds[pos],
                        });
                    }
                }
            }
            (sims, jobs, bad)
        })
        .collect();

    let mut report = SoundnessReport {
        candidates,
        systems: chosen.len(),
        simulations: 0,
        jobs: 0,
        violations: Vec::new(),
        probe: None,
    };
    for (sims, jobs, bad) in per_system {
        report.simulations += sims;
        report.jobs += jobs;
        report.violations.extend(bad);
    }
    if cfg.small {
        report.probe = Some(probe_report(10_000_000)?);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(param: SweepParam) -> SweepConfig {
        let mut cfg = SweepConfig::for_param(param);
        cfg.base.cores = 2;
        cfg.base.tasks_per_core = 3;
        cfg.systems_per_point = 6;
        cfg
    }

    #[test]
    fn seeds_depend_on_value_not_position() {
        let a = system_seed(7, SweepParam::F, 3.0, 4);
        assert_eq!(a, system_seed(7, SweepParam::F, 3.0, 4));
        assert_ne!(a, system_seed(7, SweepParam::F, 2.0, 4));
        assert_ne!(a, system_seed(7, SweepParam::M, 3.0, 4));
        assert_ne!(a, system_seed(8, SweepParam::F, 3.0, 4));
        assert_ne!(a, system_seed(7, SweepParam::F, 3.0, 5));
    }

    #[test]
    fn adding_points_keeps_existing_ones() {
        let mut cfg = tiny(SweepParam::F);
        cfg.values = vec![1.0, 3.0];
        let small = sweep(&cfg).unwrap();
        cfg.values = vec![0.0, 1.0, 2.0, 3.0];
        let big = sweep(&cfg).unwrap();
        assert_eq!(small.points[0], big.points[1]);
        assert_eq!(small.points[1], big.points[3]);
    }

    #[test]
    fn identical_verdicts_give_no_exclusives() {
        let curve = SchedulabilityCurve {
            param: SweepParam::F,
            protocols: vec![Protocol::LeftRs, Protocol::MsrpFt],
            systems_per_point: 3,
            points: vec![PointResult {
                value: 0.0,
                skipped: None,
                counts: vec![],
                verdicts: vec![vec![true, true], vec![false, false], vec![true, true]],
            }],
        };
        let rows = exclusive_table(&curve).unwrap();
        assert_eq!((rows[0].msrpft_only, rows[0].leftrs_only), (0, 0));
    }

    #[test]
    fn exclusive_table_needs_both_protocols() {
        let mut cfg = tiny(SweepParam::F);
        cfg.values = vec![1.0];
        cfg.protocols = vec![Protocol::LeftRs];
        assert!(exclusive_table(&sweep(&cfg).unwrap()).is_err());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = tiny(SweepParam::F);
        cfg.values.clear();
        assert!(sweep(&cfg).is_err());
        let mut cfg = tiny(SweepParam::F);
        cfg.systems_per_point = 0;
        assert!(sweep(&cfg).is_err());
    }

    #[test]
    fn infeasible_point_is_skipped_with_reason() {
        let mut cfg = tiny(SweepParam::Rsf);
        cfg.values = vec![0.5, 1.5];
        let curve = sweep(&cfg).unwrap();
        assert!(curve.points[0].skipped.is_none());
        assert!(curve.points[1].skipped.is_some());
        assert!(curve.points[1].verdicts.is_empty());
    }

    #[test]
    fn csv_layout() {
        let mut cfg = tiny(SweepParam::F);
        cfg.values = vec![0.0, 2.0];
        let curve = sweep(&cfg).unwrap();
        let csv = curve_csv(&curve);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next(),
            Some("param,value,protocol,schedulable,count,fraction")
        );
        assert_eq!(csv.lines().count(), 1 + 2 * 4);
        assert!(csv.contains("\nf,2,leftrs,"));
        let ex = exclusive_csv(curve.param, &exclusive_table(&curve).unwrap());
        assert!(ex.starts_with("param,value,exclA,exclB\nf,0,"));
    }

    #[test]
    fn svg_has_one_marker_per_protocol_and_point() {
        let mut cfg = tiny(SweepParam::F);
        cfg.values = vec![3.0];
        let svg = plot_svg(&sweep(&cfg).unwrap()).unwrap();
        assert_eq!(svg.matches("class=\"marker\"").count(), 4);
        assert_eq!(svg.matches("class=\"series\"").count(), 4);
        let empty = SchedulabilityCurve {
            param: SweepParam::F,
            protocols: vec![],
            systems_per_point: 1,
            points: vec![],
        };
        assert!(matches!(plot_svg(&empty), Err(HarnessError::EmptyPlot(_))));
    }

    #[test]
    fn relative_improvement_skips_empty_baselines() {
        let point = |value, a, b| PointResult {
            value,
            skipped: None,
            counts: vec![
                ProtocolCount {
                    protocol: Protocol::LeftRs,
                    schedulable: a,
                    count: 10,
                    fraction: a as f64 / 10.0,
                },
                ProtocolCount {
                    protocol: Protocol::MsrpFt,
                    schedulable: b,
                    count: 10,
                    fraction: b as f64 / 10.0,
                },
            ],
            verdicts: vec![],
        };
        let curve = SchedulabilityCurve {
            param: SweepParam::M,
            protocols: vec![Protocol::LeftRs, Protocol::MsrpFt],
            systems_per_point: 10,
            points: vec![point(2.0, 6, 4), point(4.0, 3, 3), point(6.0, 1, 0)],
        };
        let m = mean_relative_improvement(&curve, Protocol::LeftRs, Protocol::MsrpFt).unwrap();
        assert!((m - 0.25).abs() < 1e-12);
    }

    #[test]
    fn param_names_parse() {
        for p in SweepParam::ALL {
            assert_eq!(p.name().parse::<SweepParam>().unwrap(), p);
        }
        assert_eq!("NM".parse::<SweepParam>().unwrap(), SweepParam::N);
        assert!("K".parse::<SweepParam>().is_err());
    }

    #[test]
    fn small_instance_family_is_complete() {
        // 4 target counts times 1 + 4 + 16 + 64 predecessor tuples
        assert_eq!(small_probe_instances().len(), 4 * 85);
    }
}
