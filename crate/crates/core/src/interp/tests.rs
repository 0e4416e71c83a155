use std::collections::BTreeMap;

use super::*;
use crate::frontend::parse_source;

fn module(src: &str) -> Module {
    parse_source(src, "test.irgl").unwrap_or_else(|d| panic!("{d:?}"))
}

fn run_with(src: &str, binds: &[(&str, Data)], config: &SimConfig) -> Result<RunResult, InterpError> {
    let b: BTreeMap<String, Data> = binds.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
    run_host_traced(&module(src), "main", &b, config, true)
}

fn run(src: &str, binds: &[(&str, Data)]) -> RunResult {
    run_with(src, binds, &SimConfig::default()).unwrap_or_else(|e| panic!("{e}"))
}

fn seeded(seed: u64) -> SimConfig {
    SimConfig { schedule_seed: seed, ..SimConfig::default() }
}

fn ints(d: Option<&Data>) -> Vec<i64> {
    d.and_then(Data::as_ints).expect("int array")
}

fn path(n: usize) -> Data {
    let edges: Vec<(i64, i64, i64)> = (1..n as i64).map(|i| (i - 1, i, 1)).collect();
    Data::Graph(Graph::from_edges(n, &edges).unwrap().into())
}

const BFS: &str = include_str!("../../corpus/bfs.irgl");

#[test]
fn bfs_on_a_path() {
    let r = run(BFS, &[("graph", path(5)), ("src", Data::Int(0))]);
    assert_eq!(ints(r.get("level")), vec![0, 1, 2, 3, 4]);
    // The last round pops node 4 and finds nothing new.
    assert_eq!(r.stats.iterate_rounds, vec![("BFS".to_string(), 5)]);
    assert_eq!(r.stats.epoch_violations, 0);
}

#[test]
fn iterate_over_a_kernel_that_never_pushes_runs_once() {
    let src = "array seen = zeros(1);
Kernel K() { ForAll(i In wl) { x = wl.pop(i); seen[0] = seen[0] + 1; } }
host Kernel main() { Iterate K() Initial [7]; }";
    let r = run(src, &[]);
    assert_eq!(r.stats.iterate_rounds, vec![("K".to_string(), 1)]);
    assert_eq!(ints(r.get("seen")), vec![1]);
}

#[test]
fn empty_pipe_once_leaves_bindings_alone() {
    let src = "int x = 3;\nhost Kernel main() { Pipe Once { } }";
    let r = run(src, &[]);
    assert_eq!(r.get("x"), Some(&Data::Int(3)));
    assert!(r.stats.launches.is_empty());
}

const COUNTER: &str = "array counter = zeros(1);
array locks = zeros(1);
Kernel inc(int n) { ForAll(i In range(n)) { Atomic(locks[0]) { counter[0] = counter[0] + 1; } } }
host Kernel main(int n) { Invoke inc(n); }";

#[test]
fn blocking_atomic_counts_every_thread() {
    for seed in 0..20 {
        let config = SimConfig { resident_threads: 256, ..seeded(seed) };
        let r = run_with(COUNTER, &[("n", Data::Int(256))], &config).unwrap();
        assert_eq!(ints(r.get("counter")), vec![256], "seed {seed}");
        assert_eq!(ints(r.get("locks")), vec![0]);
    }
}

#[test]
fn atomic_else_with_a_held_lock_fails() {
    let src = "array locks = fill(1, 1);
array took = zeros(4);
Kernel k() { ForAll(i In range(4)) { Atomic(locks[0]) { took[i] = 1; } Else { took[i] = 2; } } }
host Kernel main() { Invoke k(); }";
    for seed in 0..10 {
        let r = run_with(src, &[], &seeded(seed)).unwrap();
        assert_eq!(ints(r.get("took")), vec![2, 2, 2, 2]);
    }
}

#[test]
fn any_of_all_false_is_false_and_empty_launches_return_the_identity() {
    let src = "bool any = true;
bool all = false;
Kernel k(int n) { ForAll(i In range(n)) { ReduceAndReturn(false); } }
host Kernel main(int n) { any = Any(Invoke k(n)); all = All(Invoke k(n)); }";
    let r = run(src, &[("n", Data::Int(10))]);
    assert_eq!((r.get("any"), r.get("all")), (Some(&Data::Bool(false)), Some(&Data::Bool(false))));
    let r = run(src, &[("n", Data::Int(0))]);
    assert_eq!((r.get("any"), r.get("all")), (Some(&Data::Bool(false)), Some(&Data::Bool(true))));
}

#[test]
fn consecutive_mapping_strides_by_the_thread_count() {
    // `first` is thread-local, so it records the thread's first iteration.
    let src = "array owner = zeros(100);
Kernel k() { first = -1; ForAll(i In range(100)) { if (first == -1) { first = i; } owner[i] = first; } }
host Kernel main() { Invoke k(); }";
    let r = run_with(src, &[], &SimConfig { resident_threads: 8, ..SimConfig::default() }).unwrap();
    let expected: Vec<i64> = (0..100).map(|i| i % 8).collect();
    assert_eq!(ints(r.get("owner")), expected);
    assert_eq!(r.stats.launches[0].threads, 8);
}

#[test]
fn blocked_mapping_hands_out_chunks() {
    let src = "array owner = zeros(10);
Kernel k() { first = -1; @mapping(blocked) ForAll(i In range(10)) { if (first == -1) { first = i; } owner[i] = first; } }
host Kernel main() { Invoke k(); }";
    let r = run_with(src, &[], &SimConfig { resident_threads: 4, ..SimConfig::default() }).unwrap();
    assert_eq!(ints(r.get("owner")), vec![0, 0, 0, 3, 3, 3, 6, 6, 6, 9]);
}

fn exclusive_src(lo: &str, hi: &str) -> String {
    format!(
        "array slots = zeros(8);
array won = zeros(2);
Kernel k() {{
  ForAll(i In range(2)) {{
    Exclusive(slots, 2, In range({lo}, {hi})) {{ won[i] = 1; }} Else {{ won[i] = 2; }}
  }}
}}
host Kernel main() {{ Invoke k(); }}"
    )
}

#[test]
fn overlapping_exclusive_goes_to_the_lower_thread() {
    let src = exclusive_src("i + 1", "i + 3");
    for seed in 0..20 {
        let r = run_with(&src, &[], &seeded(seed)).unwrap();
        assert_eq!(ints(r.get("won")), vec![1, 2], "seed {seed}");
        let round = &r.stats.exclusive_rounds[0];
        assert_eq!(round[0], Claim { thread: 0, locks: vec![1, 2], won: true });
        assert_eq!(round[1], Claim { thread: 1, locks: vec![2, 3], won: false });
    }
}

#[test]
fn disjoint_and_empty_lock_sets_always_win() {
    for (lo, hi) in [("2 * i", "2 * i + 2"), ("i", "i")] {
        for seed in 0..10 {
            let r = run_with(&exclusive_src(lo, hi), &[], &seeded(seed)).unwrap();
            assert_eq!(ints(r.get("won")), vec![1, 1]);
        }
    }
}

#[test]
fn countdown_pushes_make_three_invocations() {
    let src = "Kernel k() { ForAll(i In wl) { x = wl.pop(i); if (x > 1) { wl.push(x - 1); } } }
host Kernel main() { Iterate k() Initial [3]; }";
    let r = run(src, &[]);
    assert_eq!(r.stats.launch_count("k"), 3);
    assert_eq!(r.stats.epoch_violations, 0);
}

#[test]
fn retried_items_rerun_with_the_output_kept() {
    let r = run(include_str!("../../corpus/retry.irgl"), &[]);
    assert_eq!(r.stats.launch_count("work"), 2);
    assert_eq!(ints(r.get("done")), vec![1; 6]);
    let swaps: Vec<&str> = r.trace.iter().filter(|l| l.starts_with("swap")).map(String::as_str).collect();
    assert_eq!(swaps, ["swap lists=in<->retry in=3 out=3 retry=0", "swap lists=in<->out in=6 out=0 retry=0"]);
}

fn redo_src(stmt: &str) -> String {
    format!(
        "array tries = zeros(1);
Kernel k() {{ ForAll(i In wl) {{ x = wl.pop(i); tries[0] = tries[0] + 1; if (tries[0] < 7) {{ {stmt} x; }} }} }}
host Kernel main() {{ Pipe Once Initial [0] {{ Invoke k(); }} }}"
    )
}

#[test]
fn repeated_retry_goes_serial_but_respawn_does_not() {
    let r = run(&redo_src("Retry"), &[]);
    let serial: Vec<bool> = r.stats.launches.iter().map(|l| l.serial).collect();
    assert_eq!(serial, [false, false, false, false, true, true, true]);
    assert!(r.trace.contains(&"serialize kernel=k".to_string()));

    let r = run(&redo_src("Respawn"), &[]);
    assert_eq!(r.stats.launches.len(), 7);
    assert!(r.stats.launches.iter().all(|l| !l.serial));
}

#[test]
fn barrier_launch_beyond_residency_deadlocks() {
    let src = "array a = zeros(64);
Kernel k() { ForAll(i In range(64)) { a[i] = 1; SyncRunningThreads(); } }
host Kernel main() { Invoke k(); }";
    let capped = run_with(src, &[], &SimConfig { resident_threads: 16, ..SimConfig::default() }).unwrap();
    assert_eq!(ints(capped.get("a")), vec![1; 64]);
    assert_eq!(capped.stats.launches[0].threads, 16);
    let forced = SimConfig { resident_threads: 16, launch_threads: Some(32), ..SimConfig::default() };
    assert!(matches!(run_with(src, &[], &forced), Err(InterpError::Deadlock { .. })));
}

#[test]
fn operator_code_reads_arrays_and_edges() {
    let src = "array components;
int got = 0;
int deg = 0;
host Kernel main(graph g, int n) {
  got = components[n];
  for (e In g.edges(0)) { deg = deg + 1; got = got + e.dst; }
}";
    let g = Data::Graph(Graph::from_edges(2, &[(0, 1, 1)]).unwrap().into());
    let comps = Data::Array(vec![Data::Int(5), Data::Int(7)]);
    let r = run(src, &[("g", g), ("n", Data::Int(1)), ("components", comps)]);
    assert_eq!(r.get("got"), Some(&Data::Int(8)));
    assert_eq!(r.get("deg"), Some(&Data::Int(1)));
}

#[test]
fn min_edge_scan_on_a_triangle() {
    let edges = [(0, 1, 1), (1, 0, 1), (1, 2, 2), (2, 1, 2), (0, 2, 3), (2, 0, 3)];
    let g = Data::Graph(Graph::from_edges(3, &edges).unwrap().into());
    let r = run(include_str!("../../corpus/boruvka.irgl"), &[("graph", g)]);
    assert_eq!(r.get("mst_weight"), Some(&Data::Int(3)));
}

#[test]
fn runtime_errors_are_reported() {
    let bad_index = "array a = zeros(2);\nhost Kernel main() { a[2] = 1; }";
    assert!(matches!(run_with(bad_index, &[], &SimConfig::default()), Err(InterpError::Runtime { .. })));
    let div = "int x = 0;\nhost Kernel main() { x = 1 / x; }";
    let err = run_with(div, &[], &SimConfig::default()).unwrap_err();
    assert!(err.to_string().contains("division by zero"), "{err}");
    let unknown = "int x = 0;\nhost Kernel main() { x = frobnicate(1); }";
    assert!(matches!(run_with(unknown, &[], &SimConfig::default()), Err(InterpError::Rejected(_))));
}

#[test]
fn missing_entry_parameter_is_a_binding_error() {
    assert!(matches!(
        run_with(BFS, &[("src", Data::Int(0))], &SimConfig::default()),
        Err(InterpError::Binding(_))
    ));
}
