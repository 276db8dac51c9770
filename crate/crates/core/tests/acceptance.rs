//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use leftrs::analysis::baselines::{msrpft_access, msrpft_overhead};
use leftrs::analysis::{analyze, OverheadModel, Protocol};
use leftrs::harness::{
    exclusive_table, mean_relative_improvement, probe_report, soundness_campaign, sweep, SoundnessConfig,
    SweepConfig, SweepParam,
};
use leftrs::sim::{scenarios, simulate_with, worst_case_probe, SimTrace};
use leftrs::taskgen::{generate, GenConfig};

use common::single_request_system;

type Check = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Check);

fn golden_traces() -> Check {
    let cases = [
        (
            "fault-then-sync",
            scenarios::fault_then_sync(),
            include_str!("golden/fault_then_sync.trace"),
        ),
        (
            "concurrent-success",
            scenarios::concurrent_success(),
            include_str!("golden/concurrent_success.trace"),
        ),
    ];
    for (name, (sys, opts), golden) in cases {
        let trace = simulate_with(&sys, &opts).map_err(|e| format!("{name}: {e}"))?;
        let want = SimTrace::parse_text(golden).map_err(|e| format!("{name}: {e}"))?;
        if trace.events != want {
            let at = trace
                .events
                .iter()
                .zip(&want)
                .position(|(a, b)| a != b)
                .unwrap_or(want.len().min(trace.events.len()));
            return Err(format!(
                "{name}: first difference at event {at}: got {:?}, want {:?}",
                trace.events.get(at).map(|e| e.to_string()),
                want.get(at).map(|e| e.to_string())
            ));
        }
    }
    Ok("both event sequences match exactly".into())
}

fn baseline_vector() -> Check {
    let access = msrpft_access(1, &[6], 1);
    let overhead = msrpft_overhead(2, &OverheadModel::MEASURED);
    let leaves = 1 + access;
    if access == 4 && overhead == 15 && leaves == 5 {
        Ok(format!(
            "access {access} units, request at t=1 leaves at t={leaves}, O_total(2) = {overhead} us"
        ))
    } else {
        Err(format!(
            "access {access} (want 4), leave {leaves} (want 5), overhead {overhead} (want 15)"
        ))
    }
}

fn bound_tightness() -> Check {
    let report = probe_report(10_000_000).map_err(|e| e.to_string())?;
    if let Some(f) = report.findings.first() {
        return Err(format!(
            "{} findings, first: n={} preds={:?} observed {} > cap {} (quarter units)",
            report.findings.len(),
            f.target_n,
            f.predecessor_ns,
            f.observed,
            f.cap
        ));
    }
    // the same family through the system-level entry point, c = 8 us
    let c = 8;
    let mut checked = 0;
    for inst in leftrs::harness::small_probe_instances() {
        let sys = single_request_system(inst.target_n, &inst.predecessor_ns, c);
        let got = worst_case_probe(&sys, 0, 0, 10_000_000).map_err(|e| e.to_string())?;
        let (n, m) = (inst.target_n as u64, inst.predecessor_ns.len() as u64);
        if got > (n + m + 1) * c {
            return Err(format!(
                "n={n} preds={:?}: {got} us > {} us",
                inst.predecessor_ns,
                (n + m + 1) * c
            ));
        }
        if inst.predecessor_ns.iter().all(|&p| p == 1) && got != (n + m) * c {
            return Err(format!(
                "n={n} m={m} fault-free predecessors: {got} us != {} us",
                (n + m) * c
            ));
        }
        checked += 1;
    }
    Ok(format!(
        "{} instances probed twice, none above (n+m+1)c, fault-free cases exact ({checked} via systems)",
        report.instances
    ))
}

fn soundness() -> Check {
    let cfg = SoundnessConfig {
        n_systems: 100,
        seeds_per_system: 100,
        ..SoundnessConfig::default()
    };
    let r = soundness_campaign(&cfg).map_err(|e| e.to_string())?;
    if r.systems < 100 {
        return Err(format!(
            "only {} schedulable systems among {} candidates",
            r.systems, r.candidates
        ));
    }
    if r.simulations < 100 * 100 {
        return Err(format!("only {} simulations ran", r.simulations));
    }
    if let Some(v) = r.violations.first() {
        return Err(format!(
            "{} violations, first: system seed {} sim seed {} task {} observed {} > R {}",
            r.violations.len(),
            v.system_seed,
            v.sim_seed,
            v.task,
            v.observed_us,
            v.bound_us
        ));
    }
    Ok(format!(
        "{} systems ({} candidates), {} simulations, {} jobs, 0 violations",
        r.systems, r.candidates, r.simulations, r.jobs
    ))
}

fn fault_free_equivalence() -> Check {
    let mut tasks = 0;
    for seed in 0..100 {
        let cfg = GenConfig {
            f_max: 0,
            seed,
            ..GenConfig::default()
        };
        let sys = generate(&cfg).map_err(|e| e.to_string())?;
        let l = analyze(&sys, Protocol::LeftRs, &OverheadModel::MEASURED).map_err(|e| e.to_string())?;
        let c =
            analyze(&sys, Protocol::Checkpointing, &OverheadModel::MEASURED).map_err(|e| e.to_string())?;
        for (a, b) in l.tasks.iter().zip(&c.tasks) {
            if a.r != b.r {
                return Err(format!(
                    "seed {seed} task {}: LEFT-RS {} vs Checkpointing {}",
                    a.task, a.r, b.r
                ));
            }
            tasks += 1;
        }
    }
    Ok(format!("100 systems, {tasks} tasks, identical R"))
}

fn trends() -> Check {
    let mut notes = Vec::new();
    let mut curves = Vec::new();
    for p in SweepParam::ALL {
        let t = Instant::now();
        let curve = sweep(&SweepConfig::for_param(p)).map_err(|e| e.to_string())?;
        let took = t.elapsed();
        if took > Duration::from_secs(600) {
            return Err(format!("{} sweep took {took:?}", p.name()));
        }
        for pt in &curve.points {
            if let Some(why) = &pt.skipped {
                return Err(format!("{}={} skipped: {why}", p.name(), pt.value));
            }
            let l = pt.count(Protocol::LeftRs).map_or(0, |c| c.schedulable);
            let ck = pt.count(Protocol::Checkpointing).map_or(0, |c| c.schedulable);
            if l < ck {
                return Err(format!(
                    "(a) {}={}: LEFT-RS {l} < Checkpointing {ck}",
                    p.name(),
                    pt.value
                ));
            }
        }
        curves.push(curve);
    }
    notes.push("(a) holds at all points of 6 sweeps".to_string());

    let m = &curves[0];
    let imp = mean_relative_improvement(m, Protocol::LeftRs, Protocol::MsrpFt)
        .ok_or("(b) MSRP-FT schedules nothing on the M-sweep")?;
    if !(imp > 0.0 && (imp - 0.513).abs() <= 0.20) {
        return Err(format!(
            "(b) mean relative improvement {:.1}% outside 51.3% +- 20",
            imp * 100.0
        ));
    }
    notes.push(format!("(b) {:.1}%", imp * 100.0));

    let f = curves
        .iter()
        .find(|c| c.param == SweepParam::F)
        .expect("f-sweep ran");
    let rows = exclusive_table(f).map_err(|e| e.to_string())?;
    for r in &rows {
        let fv = r.value as u32;
        if r.msrpft_only > 0 && !(fv == 1 || fv == 2) {
            return Err(format!("(c) f={fv}: MSRP-FT-only count {}", r.msrpft_only));
        }
        if fv >= 3 && r.leftrs_only < r.msrpft_only {
            return Err(format!(
                "(c) f={fv}: LEFT-RS-only {} < MSRP-FT-only {}",
                r.leftrs_only, r.msrpft_only
            ));
        }
    }
    let table: Vec<String> = rows
        .iter()
        .map(|r| format!("{}:{}/{}", r.value, r.msrpft_only, r.leftrs_only))
        .collect();
    notes.push(format!("(c) f:exclA/exclB {}", table.join(" ")));
    Ok(notes.join("; "))
}

fn property_suites() -> Check {
    // the property suites live in tests/properties.rs and the unit tests;
    // here only the parallel-output identity is re-checked end to end
    let mut cfg = SweepConfig::for_param(SweepParam::F);
    cfg.systems_per_point = 40;
    let one = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| e.to_string())?
        .install(|| sweep(&cfg))
        .map_err(|e| e.to_string())?;
    let four = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .map_err(|e| e.to_string())?
        .install(|| sweep(&cfg))
        .map_err(|e| e.to_string())?;
    let (a, b) = (
        leftrs::harness::curve_csv(&one),
        leftrs::harness::curve_csv(&four),
    );
    if a == b {
        Ok("sweep CSV byte-identical with 1 and 4 workers; see properties suite".into())
    } else {
        Err("sweep CSV differs between worker counts".into())
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("golden traces", Duration::from_secs(1), golden_traces),
        ("baseline vector", Duration::from_secs(1), baseline_vector),
        (
            "bound tightness oracle",
            Duration::from_secs(120),
            bound_tightness,
        ),
        ("analysis soundness", Duration::from_secs(600), soundness),
        (
            "fault-free equivalence",
            Duration::from_secs(600),
            fault_free_equivalence,
        ),
        ("trend reproduction", Duration::from_secs(3600), trends),
        ("property suites", Duration::from_secs(600), property_suites),
    ];
    let mut failed = 0;
    for (k, (name, budget, check)) in criteria.into_iter().enumerate() {
        let t = Instant::now();
        let result = check();
        let took = t.elapsed();
        let result = match result {
            Ok(msg) if took > budget => Err(format!("{msg}; took {took:.2?}, budget {budget:?}")),
            r => r,
        };
        match result {
            Ok(msg) => println!("PASS [{}] {name}: {msg} ({took:.2?})", k + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL [{}] {name}: {msg} ({took:.2?})", k + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
