mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use rayon::prelude::*;

use leftrs::analysis::baselines::{msrpft_access, response_time_baseline};
use leftrs::analysis::leftrs::{blocking_set, n_local, resource_term, syn_overhead};
use leftrs::analysis::{analyze, pass_history, OverheadModel, Protocol, MAX_PASSES};
use leftrs::harness::{self, exclusive_table, system_seed, SweepConfig, SweepParam};
use leftrs::model::{lhp, llp, request_charge, validate, SystemSpec};
use leftrs::sim::invariants::check_trace;
use leftrs::sim::{probe_instance, simulate_with, FaultSchedule, ProbeInstance, ReleasePattern, SimOptions};
use leftrs::taskgen::{generate, generate_with_report, utilisation, GenConfig};

use common::{single_request_system, small_config};

fn default_system(seed: u64) -> SystemSpec {
    generate(&GenConfig {
        seed,
        ..GenConfig::default()
    })
    .unwrap()
}

fn global_pairs(sys: &SystemSpec) -> Vec<(usize, usize)> {
    sys.tasks
        .iter()
        .flat_map(|t| t.accessed().map(move |x| (t.id, x)))
        .filter(|&(_, x)| sys.is_global(x))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    // ---- model ----

    #[test]
    fn validate_is_idempotent(seed in any::<u64>(), break_it in any::<bool>()) {
        let mut sys = default_system(seed);
        if break_it {
            sys.tasks[0].d = sys.tasks[0].t + 1;
            sys.tasks[1].accesses.insert(99, 1);
        }
        let before = sys.clone();
        let a = validate(&sys);
        let b = validate(&sys);
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(before, sys);
        prop_assert_eq!(a.is_empty(), !break_it);
    }

    #[test]
    fn local_priority_sets_partition_the_core(seed in any::<u64>()) {
        let sys = default_system(seed);
        for t in &sys.tasks {
            let hp = lhp(&sys, t.id).unwrap();
            let lp = llp(&sys, t.id).unwrap();
            let mut all: BTreeSet<usize> = hp.iter().chain(&lp).copied().collect();
            prop_assert_eq!(all.len(), hp.len() + lp.len());
            prop_assert!(all.insert(t.id));
            let core: BTreeSet<usize> = sys.tasks_on(t.core).map(|u| u.id).collect();
            prop_assert_eq!(all, core);
        }
    }

    #[test]
    fn charge_is_fault_budget_plus_one(seed in any::<u64>()) {
        let sys = default_system(seed);
        for t in &sys.tasks {
            for x in t.accessed() {
                prop_assert_eq!(request_charge(t, x).unwrap().n, t.f + 1);
            }
        }
    }

    // ---- taskgen ----

    #[test]
    fn generation_is_deterministic(seed in any::<u64>(), cores in 1usize..6, n in 1usize..6) {
        let cfg = GenConfig { cores, tasks_per_core: n, seed, ..GenConfig::default() };
        prop_assert_eq!(generate(&cfg).unwrap().to_json(), generate(&cfg).unwrap().to_json());
    }

    #[test]
    fn utilisation_matches_target(seed in any::<u64>(), cores in 1usize..12, n in 1usize..8, rsf in 0.0f64..0.9) {
        let cfg = GenConfig { cores, tasks_per_core: n, rsf, seed, ..GenConfig::default() };
        let (sys, report) = generate_with_report(&cfg).unwrap();
        prop_assert!((report.drawn_utilisation - cfg.u_total()).abs() <= 1e-9);
        let actual: f64 = sys.tasks.iter().map(|t| utilisation(t, &sys.resources)).sum();
        prop_assert!(actual <= cfg.u_total() + report.clamp_slack + 1e-9,
            "{} > {} + {}", actual, cfg.u_total(), report.clamp_slack);
    }

    #[test]
    fn generated_systems_are_valid(seed in any::<u64>(), f in 0u32..8, a in 1u32..40) {
        let cfg = GenConfig { f_max: f, max_accesses: a, seed, ..GenConfig::default() };
        prop_assert!(validate(&generate(&cfg).unwrap()).is_empty());
    }

    #[test]
    fn worst_fit_places_on_least_loaded_core(seed in any::<u64>(), cores in 1usize..8, n in 1usize..6) {
        let cfg = GenConfig { cores, tasks_per_core: n, seed, ..GenConfig::default() };
        let (sys, report) = generate_with_report(&cfg).unwrap();
        let mut load = vec![0.0f64; cores];
        let mut count = vec![0usize; cores];
        for &id in &report.placement_order {
            let t = &sys.tasks[id];
            let best = (0..cores)
                .filter(|&k| count[k] < n)
                .map(|k| load[k])
                .fold(f64::INFINITY, f64::min);
            prop_assert!(load[t.core] <= best, "task {} put on a core with load {} > {}", id, load[t.core], best);
            load[t.core] += utilisation(t, &sys.resources);
            count[t.core] += 1;
        }
        prop_assert!(count.iter().all(|&c| c == n));
    }

    // ---- LEFT-RS analysis ----

    #[test]
    fn estimates_never_decrease_and_iteration_stops(seed in any::<u64>(), pi in 0usize..4) {
        let sys = default_system(seed);
        let history = pass_history(&sys, Protocol::ALL[pi], &OverheadModel::MEASURED).unwrap();
        prop_assert!(history.len() <= MAX_PASSES + 1);
        for w in history.windows(2) {
            for (a, b) in w[0].iter().zip(&w[1]) {
                prop_assert!(b >= a);
            }
        }
    }

    #[test]
    fn analysis_is_a_pure_function(seed in any::<u64>(), pi in 0usize..4) {
        let sys = default_system(seed);
        let p = Protocol::ALL[pi];
        prop_assert_eq!(
            analyze(&sys, p, &OverheadModel::MEASURED).unwrap(),
            analyze(&sys.clone(), p, &OverheadModel::MEASURED).unwrap()
        );
    }

    #[test]
    fn fault_free_blocking_sets_need_no_synchronisation(seed in any::<u64>()) {
        let sys = generate(&GenConfig { f_max: 0, seed, ..GenConfig::default() }).unwrap();
        for (i, x) in global_pairs(&sys) {
            let d = sys.tasks[i].d;
            let e = blocking_set(&sys, i, x, d, |j| sys.tasks[j].d).unwrap();
            prop_assert!(e.entries.to_vec().iter().all(|&n| n == 1));
            let nl = n_local(&sys, i, x, d).unwrap();
            prop_assert_eq!(syn_overhead(&e, nl), 0);
        }
    }

    #[test]
    fn remote_faults_never_change_blocking_set_size(seed in any::<u64>(), extra in 1u32..5) {
        let sys = default_system(seed);
        for (i, x) in global_pairs(&sys).into_iter().take(12) {
            let d = sys.tasks[i].d;
            let mut more = sys.clone();
            for t in more.tasks.iter_mut().filter(|t| t.core != sys.tasks[i].core) {
                t.f += extra;
            }
            let r_of = |j: usize| sys.tasks[j].d;
            let e = blocking_set(&sys, i, x, d, r_of).unwrap();
            let e2 = blocking_set(&more, i, x, d, r_of).unwrap();
            prop_assert_eq!(e.len(), e2.len());
            let nl = n_local(&sys, i, x, d).unwrap();
            let (s, s2) = (syn_overhead(&e, nl), syn_overhead(&e2, nl));
            prop_assert!(s2 >= s && s2 - s <= nl);
        }
    }

    // ---- baselines ----

    #[test]
    fn msrpft_ignores_input_order(n_i in 1u32..6, mut ns in prop::collection::vec(1u32..9, 0..6), c in 1u64..50) {
        let a = msrpft_access(n_i, &ns, c);
        ns.reverse();
        prop_assert_eq!(a, msrpft_access(n_i, &ns, c));
        ns.sort_unstable();
        prop_assert_eq!(a, msrpft_access(n_i, &ns, c));
    }

    #[test]
    fn second_heavy_remote_pushes_msrpft_past_one_extra_unit(
        n_i in 1u32..5,
        m in 2usize..6,
        first in 3u32..12,
        second in 4u32..12,
    ) {
        // all light except the two heaviest, which both need more than one unit
        let mut ns = vec![1; m];
        ns[0] = first.max(second);
        ns[1] = first.min(second).max(4);
        let s = msrpft_access(n_i, &ns, 1) - n_i as u64;
        prop_assert!(s > m as u64 + 1, "S = {} for {:?}", s, ns);
        // LEFT-RS charges n_i + m + 1 for the same request
        let leftrs_units = n_i as u64 + m as u64 + 1;
        prop_assert!(leftrs_units <= n_i as u64 + s);
    }

    #[test]
    fn heavier_remotes_never_shorten_msrpft(n_i in 1u32..5, ns in prop::collection::vec(1u32..9, 1..6), k in 0usize..6, bump in 1u32..5) {
        let mut more = ns.clone();
        let k = k % ns.len();
        more[k] += bump;
        prop_assert!(msrpft_access(n_i, &more, 1) >= msrpft_access(n_i, &ns, 1));
    }

    #[test]
    fn overhead_free_variant_equals_zero_overheads(seed in any::<u64>()) {
        let sys = default_system(seed);
        let of = response_time_baseline(&sys, Protocol::MsrpFtOf, &OverheadModel::MEASURED).unwrap();
        let zero = response_time_baseline(&sys, Protocol::MsrpFt, &OverheadModel::ZERO).unwrap();
        prop_assert_eq!(of.tasks, zero.tasks);
        prop_assert_eq!(of.schedulable, zero.schedulable);
        prop_assert_eq!(of.iterations, zero.iterations);
    }

    // ---- harness ----

    #[test]
    fn system_seeds_ignore_other_points(master in any::<u64>(), k in 0u64..1000, v in 0u32..20) {
        let v = v as f64;
        for p in SweepParam::ALL {
            prop_assert_eq!(system_seed(master, p, v, k), system_seed(master, p, v, k));
            prop_assert_ne!(system_seed(master, p, v, k), system_seed(master, p, v + 1.0, k));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    // ---- simulator ----

    #[test]
    fn traces_respect_queue_rules(seed in any::<u64>(), pi in 0usize..2) {
        let protocol = [Protocol::LeftRs, Protocol::Checkpointing][pi];
        let sys = generate(&small_config(seed)).unwrap();
        let horizon = sys.tasks.iter().map(|t| t.d).max().unwrap();
        let opts = SimOptions::new(
            protocol,
            ReleasePattern::Sporadic { seed },
            FaultSchedule::Randomized { seed: seed ^ 1 },
            horizon,
        );
        let trace = simulate_with(&sys, &opts).unwrap();
        let problems = check_trace(&sys, &trace);
        prop_assert!(problems.is_empty(), "{:?}", &problems[..problems.len().min(5)]);
    }

    #[test]
    fn responses_stay_within_bounds(seed in any::<u64>(), pi in 0usize..2) {
        let protocol = [Protocol::LeftRs, Protocol::Checkpointing][pi];
        let sys = generate(&small_config(seed)).unwrap();
        let a = analyze(&sys, protocol, &OverheadModel::MEASURED).unwrap();
        prop_assume!(a.schedulable);
        let horizon = sys.tasks.iter().map(|t| t.d).max().unwrap();
        for s in 0..8 {
            let mut opts = SimOptions::new(
                protocol,
                if s == 0 { ReleasePattern::SynchronousPeriodic } else { ReleasePattern::Sporadic { seed: seed ^ s } },
                FaultSchedule::Randomized { seed: seed.wrapping_add(s) },
                horizon,
            );
            opts.record_events = false;
            let trace = simulate_with(&sys, &opts).unwrap();
            for (task, r) in trace.max_response() {
                prop_assert!(r <= a.task(task).unwrap().r, "task {} observed {} > {}", task, r, a.task(task).unwrap().r);
            }
        }
    }

    #[test]
    fn simulation_is_deterministic_under_parallelism(seed in any::<u64>()) {
        let sys = generate(&small_config(seed)).unwrap();
        let horizon = sys.tasks.iter().map(|t| t.d).max().unwrap();
        let opts = SimOptions::new(
            Protocol::LeftRs,
            ReleasePattern::Sporadic { seed },
            FaultSchedule::Randomized { seed },
            horizon,
        );
        let serial = simulate_with(&sys, &opts).unwrap();
        let parallel: Vec<_> = (0..3).into_par_iter().map(|_| simulate_with(&sys, &opts).unwrap()).collect();
        for t in parallel {
            prop_assert_eq!(&t, &serial);
        }
    }

    #[test]
    fn charged_units_cover_the_probed_worst_case(n_i in 1u32..5, preds in prop::collection::vec(1u32..5, 0..4)) {
        let c = 4;
        let sys = single_request_system(n_i, &preds, c);
        let window = 100;
        let charged = resource_term(&sys, 0, window, |_| window).unwrap() / c + (n_i as u64 - 1);
        let m = preds.len() as u64;
        let probed = probe_instance(&ProbeInstance { target_n: n_i, predecessor_ns: preds.clone() }, 10_000_000).unwrap() / 4;
        prop_assert!(charged >= probed, "charged {} < probed {}", charged, probed);
        let cap = if preds.iter().all(|&n| n == 1) { n_i as u64 + m } else { n_i as u64 + m + 1 };
        prop_assert_eq!(charged, cap);
    }
}

fn tiny_sweep(param: SweepParam) -> SweepConfig {
    let mut cfg = SweepConfig::for_param(param);
    cfg.systems_per_point = 30;
    cfg
}

#[test]
fn sweep_csv_is_byte_identical_across_runs_and_workers() {
    let cfg = tiny_sweep(SweepParam::M);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| harness::curve_csv(&harness::sweep(&cfg).unwrap()))
    };
    let first = run(1);
    assert_eq!(first, run(1));
    assert_eq!(first, run(3));
    assert_eq!(first, harness::curve_csv(&harness::sweep(&cfg).unwrap()));
}

#[test]
fn exclusive_counts_bound_fraction_gaps() {
    for param in [SweepParam::F, SweepParam::Rsf] {
        let curve = harness::sweep(&tiny_sweep(param)).unwrap();
        let rows = exclusive_table(&curve).unwrap();
        for (pt, row) in curve.points.iter().zip(&rows) {
            let a = pt.count(Protocol::MsrpFt).unwrap();
            let b = pt.count(Protocol::LeftRs).unwrap();
            let gap = (a.fraction - b.fraction).abs() * a.count as f64;
            assert!(gap <= (row.msrpft_only + row.leftrs_only) as f64 + 1e-9);
            assert!(row.msrpft_only + row.leftrs_only <= a.count);
        }
    }
}
