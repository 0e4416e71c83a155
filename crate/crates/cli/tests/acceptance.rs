//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use petgraph::algo::{dijkstra, min_spanning_tree};
use petgraph::data::Element;
use petgraph::graph::{NodeIndex, UnGraph};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use irgl::ast::{walk_block, Module, StmtKind};
use irgl::codegen::{compile, EmitOptions};
use irgl::frontend::parse_source;
use irgl::interp::{run_host, run_host_traced, Claim, Data, Graph, RunResult, SimConfig};
use irgl::plan::{t_control, PlanConfig};
use irgl::sema::{analyze, BlockConstraint, SemaOptions};

type Outcome = Result<String, String>;

fn corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/corpus")
}

fn corpus_module(name: &str) -> Module {
    let text = fs::read_to_string(corpus().join(format!("{name}.irgl"))).unwrap();
    parse_source(&text, &format!("{name}.irgl")).unwrap()
}

fn module(src: &str) -> Module {
    parse_source(src, "case.irgl").unwrap_or_else(|d| panic!("{d:?}"))
}

fn bindings(pairs: Vec<(&str, Data)>) -> BTreeMap<String, Data> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn config(seed: u64) -> SimConfig {
    SimConfig { schedule_seed: seed, ..SimConfig::default() }
}

fn ints(r: &RunResult, name: &str) -> Vec<i64> {
    r.get(name).and_then(Data::as_ints).unwrap_or_else(|| panic!("`{name}` is not an int array"))
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Random connected undirected graph: a random spanning tree plus extra edges.
/// Every edge is returned once, with a distinct weight.
fn random_connected(rng: &mut ChaCha8Rng, max_nodes: usize) -> (usize, Vec<(i64, i64, i64)>) {
    let n = rng.gen_range(2..=max_nodes);
    let mut pairs = BTreeSet::new();
    for v in 1..n {
        let u = rng.gen_range(0..v);
        pairs.insert((u, v));
    }
    for _ in 0..rng.gen_range(0..=n) {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if a != b {
            pairs.insert((a.min(b), a.max(b)));
        }
    }
    let mut weights: Vec<i64> = (1..=pairs.len() as i64).collect();
    weights.shuffle(rng);
    let edges = pairs.into_iter().zip(weights).map(|((a, b), w)| (a as i64, b as i64, w)).collect();
    (n, edges)
}

fn symmetric(n: usize, edges: &[(i64, i64, i64)]) -> Data {
    let both: Vec<_> = edges.iter().flat_map(|&(a, b, w)| [(a, b, w), (b, a, w)]).collect();
    Data::Graph(Graph::from_edges(n, &both).unwrap().into())
}

fn oracle_graph(n: usize, edges: &[(i64, i64, i64)]) -> UnGraph<(), i64> {
    let mut g = UnGraph::new_undirected();
    let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    for &(a, b, w) in edges {
        g.add_edge(nodes[a as usize], nodes[b as usize], w);
    }
    g
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let m = corpus_module("bfs");
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut runs = 0;
    for case in 0..20 {
        let (n, edges) = random_connected(&mut rng, 64);
        let src = rng.gen_range(0..n);
        let dist = dijkstra(&oracle_graph(n, &edges), NodeIndex::new(src), None, |_| 1i64);
        let expected: Vec<i64> = (0..n).map(|v| dist[&NodeIndex::new(v)]).collect();
        let ecc = *expected.iter().max().unwrap() as usize;
        for seed in 0..10 {
            let b = bindings(vec![("graph", symmetric(n, &edges)), ("src", Data::Int(src as i64))]);
            let cfg = SimConfig { resident_threads: 8 + 6 * seed as usize, ..config(seed) };
            let r = run_host(&m, "main", &b, &cfg).map_err(|e| format!("case {case} seed {seed}: {e}"))?;
            ensure(ints(&r, "level") == expected, || format!("case {case} seed {seed}: levels differ"))?;
            let rounds = r.stats.iterate_rounds.first().map(|x| x.1);
            ensure(rounds == Some(ecc + 1), || format!("case {case} seed {seed}: {rounds:?} rounds, ecc {ecc}"))?;
            runs += 1;
        }
    }
    let t = start.elapsed();
    ensure(t < Duration::from_secs(5), || format!("took {t:?}"))?;
    Ok(format!("{runs} runs in {t:.2?}"))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let m = corpus_module("boruvka");
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for case in 0..20 {
        let (n, edges) = random_connected(&mut rng, 32);
        let g = oracle_graph(n, &edges);
        let expected: i64 = min_spanning_tree(&g)
            .filter_map(|e| match e {
                Element::Edge { weight, .. } => Some(weight),
                _ => None,
            })
            .sum();
        for seed in 0..10 {
            let b = bindings(vec![("graph", symmetric(n, &edges))]);
            let cfg = SimConfig { resident_threads: 4 + 3 * seed as usize, ..config(seed) };
            let r = run_host(&m, "main", &b, &cfg).map_err(|e| format!("case {case} seed {seed}: {e}"))?;
            let got = r.get("mst_weight");
            ensure(got == Some(&Data::Int(expected)), || format!("case {case} seed {seed}: {got:?} vs {expected}"))?;
        }
    }
    let t = start.elapsed();
    ensure(t < Duration::from_secs(10), || format!("took {t:?}"))?;
    Ok(format!("200 runs in {t:.2?}"))
}

fn criterion_3() -> Outcome {
    let counter = module(
        "array counter = zeros(1);
array locks = zeros(1);
Kernel inc(int n) { ForAll(i In range(n)) { Atomic(locks[0]) { counter[0] = counter[0] + 1; } } }
host Kernel main(int n) { Invoke inc(n); }",
    );
    for seed in 0..50 {
        let cfg = SimConfig { resident_threads: 256, ..config(seed) };
        let r = run_host(&counter, "main", &bindings(vec![("n", Data::Int(256))]), &cfg).map_err(|e| e.to_string())?;
        ensure(ints(&r, "counter") == [256], || format!("seed {seed}: counter {:?}", ints(&r, "counter")))?;
        ensure(r.stats.launches[0].threads == 256, || "not 256 threads".into())?;
    }
    let held = module(
        "array locks = fill(1, 1);
array took = zeros(32);
Kernel k() { ForAll(i In range(32)) { Atomic(locks[0]) { took[i] = 1; } Else { took[i] = 2; } } }
host Kernel main() { Invoke k(); }",
    );
    for seed in 0..50 {
        let r = run_host(&held, "main", &BTreeMap::new(), &config(seed)).map_err(|e| e.to_string())?;
        ensure(ints(&r, "took") == vec![2; 32], || format!("seed {seed}: {:?}", ints(&r, "took")))?;
    }
    Ok("256/256 for 50 seeds; Else taken by all 32 threads for 50 seeds".into())
}

/// Runs the claim/recheck/confirm protocol with the claims written in
/// `claim_order` and rechecked in `check_order`.
fn protocol(sets: &[Vec<i64>], claim_order: &[usize], check_order: &[usize]) -> Vec<bool> {
    let mut slot: HashMap<i64, usize> = HashMap::new();
    for &t in claim_order {
        for &l in &sets[t] {
            slot.insert(l, t);
        }
    }
    for &t in check_order {
        for &l in &sets[t] {
            let owner = slot[&l];
            if owner != t && t < owner {
                slot.insert(l, t);
            }
        }
    }
    sets.iter().enumerate().map(|(t, s)| s.iter().all(|l| slot[l] == t)).collect()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

/// Winners under every claim and recheck order; they must agree.
fn exclusive_oracle(sets: &[Vec<i64>], rng: &mut ChaCha8Rng) -> Result<Vec<bool>, String> {
    let n = sets.len();
    let orders: Vec<Vec<usize>> = if n <= 4 {
        permutations(n)
    } else {
        (0..24)
            .map(|_| {
                let mut p: Vec<usize> = (0..n).collect();
                p.shuffle(rng);
                p
            })
            .collect()
    };
    let first = protocol(sets, &orders[0], &orders[0]);
    for a in &orders {
        for b in &orders {
            if protocol(sets, a, b) != first {
                return Err(format!("protocol outcome depends on the order for {sets:?}"));
            }
        }
    }
    Ok(first)
}

fn criterion_4() -> Outcome {
    let m = module(
        "array slots = zeros(8);
array won = zeros(16);
Kernel k(int t, array rows) {
  ForAll(i In range(t)) {
    Exclusive(slots, len(rows[i]), In rows[i]) { won[i] = 1; } Else { won[i] = 2; }
  }
}
host Kernel main(int t, array rows) { Invoke k(t, rows); }",
    );
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for case in 0..200 {
        let t = rng.gen_range(1..=16usize);
        let sets: Vec<Vec<i64>> = (0..t)
            .map(|_| {
                let mut all: Vec<i64> = (0..8).collect();
                all.shuffle(&mut rng);
                all.truncate(rng.gen_range(0..=4));
                all
            })
            .collect();
        let expected = exclusive_oracle(&sets, &mut rng)?;
        let rows = Data::Array(sets.iter().map(|s| Data::Array(s.iter().map(|&l| Data::Int(l)).collect())).collect());
        for seed in 0..10 {
            let b = bindings(vec![("t", Data::Int(t as i64)), ("rows", rows.clone())]);
            let r = run_host(&m, "main", &b, &config(seed)).map_err(|e| format!("case {case}: {e}"))?;
            let round: &Vec<Claim> = &r.stats.exclusive_rounds[0];
            let won: Vec<bool> = round.iter().map(|c| c.won).collect();
            ensure(won == expected, || format!("case {case} seed {seed}: {won:?} vs oracle {expected:?} for {sets:?}"))?;
            let outcome = ints(&r, "won");
            for (i, w) in won.iter().enumerate() {
                ensure(outcome[i] == if *w { 1 } else { 2 }, || format!("case {case}: thread {i} ran the wrong branch"))?;
            }
            let mut held = BTreeSet::new();
            for c in round.iter().filter(|c| c.won) {
                for l in &c.locks {
                    ensure(held.insert(*l), || format!("case {case} seed {seed}: lock {l} won twice"))?;
                }
            }
            let claimants = round.iter().filter(|c| !c.locks.is_empty()).count();
            let winners = round.iter().filter(|c| c.won && !c.locks.is_empty()).count();
            ensure(claimants == 0 || winners >= 1, || format!("case {case} seed {seed}: no winner"))?;
        }
    }
    Ok("200 cases x 10 seeds match the enumeration oracle".into())
}

fn criterion_5() -> Outcome {
    let m = module(
        "int r = 0;
Kernel k(int r) {
  ForAll(i In wl) {
    if (r < 3) {
      wl.push(r * 10 + i);
    }
    x = wl.pop(i);
  }
}
host Kernel main() {
  r = 0;
  Iterate k(r) Initial [0, 1] {
    r++;
  }
}",
    );
    let r = run_host_traced(&m, "main", &BTreeMap::new(), &SimConfig::default(), true).map_err(|e| e.to_string())?;
    ensure(r.stats.epoch_violations == 0, || format!("{} epoch violations", r.stats.epoch_violations))?;
    ensure(r.stats.launch_count("k") == 4, || format!("{} launches", r.stats.launch_count("k")))?;
    // Items popped by each launch are exactly those pushed by the one before.
    let mut per_launch: Vec<(BTreeSet<i64>, BTreeSet<i64>)> = Vec::new();
    for line in &r.trace {
        let item = || line.rsplit("item=").next().and_then(|v| v.parse::<i64>().ok()).unwrap();
        if line.starts_with("launch ") {
            per_launch.push(Default::default());
        } else if line.starts_with("pop ") {
            per_launch.last_mut().unwrap().0.insert(item());
        } else if line.starts_with("push ") {
            per_launch.last_mut().unwrap().1.insert(item());
        }
    }
    ensure(per_launch[0].0 == BTreeSet::from([0, 1]), || "first launch pops the initial items".into())?;
    for w in per_launch.windows(2) {
        ensure(w[1].0 == w[0].1, || format!("popped {:?} after pushing {:?}", w[1].0, w[0].1))?;
    }

    let mut total = 0;
    let cases: Vec<(&str, Vec<(&str, Data)>)> = vec![
        ("bfs", vec![("graph", symmetric(6, &[(0, 1, 1), (1, 2, 1), (2, 3, 1), (1, 4, 1), (4, 5, 1)])), ("src", Data::Int(0))]),
        ("sssp", vec![("graph", symmetric(4, &[(0, 1, 4), (0, 2, 1), (2, 1, 2), (1, 3, 7)])), ("src", Data::Int(0))]),
        ("boruvka", vec![("graph", symmetric(4, &[(0, 1, 4), (0, 2, 1), (2, 1, 2), (1, 3, 7)]))]),
        ("dmr", vec![("mesh", Data::Array([2, 0, 1, 3, 1, 0, 2, 1].map(Data::Int).to_vec()))]),
        ("retry", vec![]),
        ("dynamic_pipe", vec![]),
    ];
    for (name, binds) in cases {
        for seed in 0..5 {
            let r = run_host(&corpus_module(name), "main", &bindings(binds.clone()), &config(seed))
                .map_err(|e| format!("{name}: {e}"))?;
            total += r.stats.epoch_violations;
        }
    }
    ensure(total == 0, || format!("{total} epoch violations across the corpus"))?;
    Ok("no pop saw a same-launch push; pushes popped in the next launch".into())
}

/// Items 1, 2 and 3 are retried until they have run 1, 2 and 3 times.
const RETRY_SCENARIO: &str = "array tries = zeros(4);
Kernel k() {
  ForAll(i In wl) {
    x = wl.pop(i);
    tries[x] = tries[x] + 1;
    if (tries[x] < x) {
      Retry x;
    } else {
      wl.push(x);
    }
  }
}
host Kernel main() {
  Pipe Once Initial [1, 2, 3] {
    Invoke k();
  }
}";

const RETRY_TRACE: &str = "launch kernel=k threads=3 epoch=1 in=3
pop thread=0 index=0 item=1
pop thread=1 index=1 item=2
pop thread=2 index=2 item=3
push thread=0 list=out item=1
push thread=1 list=retry item=2
push thread=2 list=retry item=3
swap lists=in<->retry in=2 out=1 retry=0
launch kernel=k threads=2 epoch=2 in=2
pop thread=0 index=0 item=2
pop thread=1 index=1 item=3
push thread=0 list=out item=2
push thread=1 list=retry item=3
swap lists=in<->retry in=1 out=2 retry=0
launch kernel=k threads=1 epoch=3 in=1
pop thread=0 index=0 item=3
push thread=0 list=out item=3
swap lists=in<->out in=3 out=0 retry=0
";

fn criterion_6() -> Outcome {
    let r = run_host_traced(&module(RETRY_SCENARIO), "main", &BTreeMap::new(), &SimConfig::default(), true)
        .map_err(|e| e.to_string())?;
    let got = r.trace.join("\n") + "\n";
    ensure(got == RETRY_TRACE, || format!("trace differs:\n{got}"))?;
    ensure(ints(&r, "tries") == [0, 1, 2, 3], || "wrong retry counts".into())?;
    Ok("3-round trace matches".into())
}

fn criterion_7() -> Outcome {
    use BlockConstraint::*;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let random = |rng: &mut ChaCha8Rng| match rng.gen_range(0..3) {
        0 => Elastic,
        1 => Shrinkable(rng.gen_range(1..=1024)),
        _ => Fixed(*[32, 64, 128, 256, 512, 1024, rng.gen_range(1..=1024)].choose(rng).unwrap()),
    };
    for _ in 0..1000 {
        let triple: Vec<BlockConstraint> = (0..3).map(|_| random(&mut rng)).collect();
        let brute = (1..=1024u32).rev().find(|&s| triple.iter().all(|c| c.admits(s)));
        let fast = t_control(&triple).ok();
        ensure(brute == fast, || format!("{triple:?}: brute force {brute:?}, interval {fast:?}"))?;
    }
    ensure(t_control(&[Elastic, Shrinkable(512), Fixed(128)]) == Ok(128), || "expected 128".into())?;
    ensure(t_control(&[Fixed(128), Fixed(256)]).is_err(), || "expected an empty intersection".into())?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let src = dir.path().join("fixed.irgl");
    fs::write(
        &src,
        "@fixed_block_size(128)
Kernel a() { ForAll(i In wl) { x = wl.pop(i); } }
@fixed_block_size(256)
Kernel b() { ForAll(i In wl) { x = wl.pop(i); } }
host Kernel main() { Pipe Initial [1] { Invoke a(); Invoke b(); } }
",
    )
    .map_err(|e| e.to_string())?;
    let out = Command::new(env!("CARGO_BIN_EXE_irglc"))
        .args(["compile", "--outline"])
        .arg(&src)
        .output()
        .map_err(|e| e.to_string())?;
    let stderr = String::from_utf8_lossy(&out.stderr);
    ensure(out.status.success(), || format!("compile failed: {stderr}"))?;
    ensure(stderr.contains("iteration outlining cannot be performed"), || format!("no warning in: {stderr}"))?;
    Ok("1000 triples agree; fixed example yields 128; conflict warns".into())
}

/// Whether (), {} and [] nest properly outside literals and comments.
fn balanced(code: &str) -> bool {
    let mut stack = Vec::new();
    let mut chars = code.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '"' | '\'' => {
                while let Some(d) = chars.next() {
                    if d == '\\' {
                        chars.next();
                    } else if d == c {
                        break;
                    }
                }
            }
            '/' if chars.peek() == Some(&'/') => {
                for d in chars.by_ref() {
                    if d == '\n' {
                        break;
                    }
                }
            }
            '(' | '{' | '[' => stack.push(c),
            ')' | '}' | ']' => {
                let open = match c {
                    ')' => '(',
                    '}' => '{',
                    _ => '[',
                };
                if stack.pop() != Some(open) {
                    return false;
                }
            }
            _ => {}
        }
    }
    stack.is_empty()
}

fn count_stmts(m: &Module, pred: impl Fn(&StmtKind) -> bool) -> usize {
    let mut n = 0;
    for k in &m.kernels {
        walk_block(&k.body, &mut |s| n += pred(&s.kind) as usize);
    }
    n
}

fn criterion_8() -> Outcome {
    for name in ["bfs", "sssp", "boruvka", "dmr", "retry", "dynamic_pipe"] {
        let m = corpus_module(name);
        let emit = || {
            let options = EmitOptions { outline: false, runtime_inline: false };
            compile(&m, &SemaOptions::default(), &PlanConfig::default(), options).map(|o| o.cuda)
        };
        let cuda = emit().map_err(|d| format!("{name}: {d:?}"))?;
        ensure(cuda == emit().unwrap(), || format!("{name}: output differs between runs"))?;
        let golden = fs::read_to_string(corpus().join("golden").join(format!("{name}.cu"))).unwrap_or_default();
        ensure(cuda == golden, || format!("{name}: differs from its golden file"))?;
        ensure(balanced(&cuda), || format!("{name}: unbalanced delimiters"))?;

        let atomics = count_stmts(&m, |s| matches!(s, StmtKind::Atomic { .. }));
        let cas = cuda.matches("atomicCAS(").count();
        ensure(cas == atomics, || format!("{name}: {cas} atomicCAS for {atomics} Atomic"))?;

        let exclusives = count_stmts(&m, |s| matches!(s, StmtKind::Exclusive(_)));
        let starts: Vec<usize> = cuda.match_indices("IRGL_EXCL_SLOTS(").map(|(i, _)| i).collect();
        ensure(starts.len() == exclusives, || format!("{name}: {} lock protocols for {exclusives} Exclusive", starts.len()))?;
        for s in starts {
            let body = &cuda[s..];
            let end = body.find("= IRGL_UNCLAIMED").ok_or_else(|| format!("{name}: Exclusive never clears"))?;
            let barriers = body[..end].matches("irgl::barrier_sync(").count();
            ensure(barriers == 3, || format!("{name}: {barriers} barriers in an Exclusive"))?;
        }

        // Every launch of a kernel taking a barrier sizes its grid by occupancy.
        let a = analyze(&m, &SemaOptions::default()).map_err(|d| format!("{d:?}"))?;
        for line in cuda.lines().filter(|l| l.contains("<<<")) {
            let callee = line.trim().split(['<', '(']).next().unwrap();
            let kernel = callee.strip_prefix("irgl_").unwrap_or(callee);
            if a.infos.get(kernel).is_some_and(|i| i.needs_global_barrier()) {
                let grid = line.split("<<<").nth(1).and_then(|s| s.split(',').next()).unwrap().trim();
                let bps = grid.replace("irgl_grid_", "irgl_bps_");
                let call = format!("cudaOccupancyMaxActiveBlocksPerMultiprocessor(&{bps}, {callee}");
                ensure(cuda.contains(&call), || format!("{name}: launch of {kernel} has no occupancy query"))?;
            }
        }

        // One instantiation per reduction the kernel is invoked with.
        for k in m.kernels.iter().filter(|k| a.infos.get(&k.name).is_some_and(|i| i.uses_reduce)) {
            let mut wanted = BTreeSet::new();
            for h in &m.kernels {
                walk_block(&h.body, &mut |s| match &s.kind {
                    StmtKind::Invoke(inv) if inv.kernel == k.name => {
                        wanted.insert(format!("{:?}", inv.reduction));
                    }
                    StmtKind::Iterate(it) if it.kernel == k.name => {
                        wanted.insert(format!("{:?}", it.cond.map(|c| c.1)));
                    }
                    _ => {}
                });
            }
            let variants = cuda.matches(&format!("template __global__ void irgl_{}<", k.name)).count();
            ensure(variants == wanted.len(), || format!("{name}: {variants} variants of {} for {wanted:?}", k.name))?;
        }
    }
    Ok("6 programs structurally sound and identical to golden files".into())
}

fn criterion_9() -> Outcome {
    let m = module(
        "bool any = false;
bool all = false;
Kernel k(int n, array vals) { ForAll(i In range(n)) { ReduceAndReturn(vals[i] == 1); } }
host Kernel main(int n, array vals) {
  any = Any(Invoke k(n, vals));
  all = All(Invoke k(n, vals));
}",
    );
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for case in 0..200 {
        let n = if case == 0 { 0 } else { rng.gen_range(1..=64usize) };
        let p = rng.gen_range(0.0..1.0);
        let vals: Vec<bool> = (0..n).map(|_| rng.gen_bool(p)).collect();
        let data = Data::Array(vals.iter().map(|&v| Data::Int(v as i64)).collect());
        let b = bindings(vec![("n", Data::Int(n as i64)), ("vals", data)]);
        let r = run_host(&m, "main", &b, &config(case)).map_err(|e| e.to_string())?;
        let (any, all) = (vals.iter().any(|&v| v), vals.iter().all(|&v| v));
        ensure(r.get("any") == Some(&Data::Bool(any)), || format!("case {case}: Any wrong for {vals:?}"))?;
        ensure(r.get("all") == Some(&Data::Bool(all)), || format!("case {case}: All wrong for {vals:?}"))?;
        let seen = &r.stats.launches[0].reduce_values;
        ensure(seen.len() == n && seen.iter().any(|&v| v) == any, || format!("case {case}: instrumented values differ"))?;
    }
    Ok("200 cases including a zero-iteration launch".into())
}

fn criterion_10() -> Outcome {
    let mut files: Vec<PathBuf> = fs::read_dir(corpus().join("bad"))
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "irgl"))
        .collect();
    files.sort();
    ensure(!files.is_empty(), || "no negative tests".into())?;
    for f in &files {
        let rule = f.file_stem().unwrap().to_string_lossy().to_string();
        let out = Command::new(env!("CARGO_BIN_EXE_irglc")).arg("check").arg(f).output().map_err(|e| e.to_string())?;
        let stderr = String::from_utf8_lossy(&out.stderr);
        let errors: Vec<&str> = stderr.lines().filter(|l| l.contains(": error[")).collect();
        ensure(out.status.code() == Some(1), || format!("{rule}: exit {:?}", out.status.code()))?;
        ensure(
            errors.len() == 1 && errors[0].contains(&format!("error[{rule}]")),
            || format!("{rule}: got {errors:?}"),
        )?;
    }
    Ok(format!("{} rule files", files.len()))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("BFS levels and rounds", criterion_1),
        ("Boruvka MST weight", criterion_2),
        ("Atomic mutual exclusion", criterion_3),
        ("Exclusive protocol", criterion_4),
        ("bulk-synchronous worklists", criterion_5),
        ("retry swap protocol", criterion_6),
        ("t_control", criterion_7),
        ("codegen structure", criterion_8),
        ("ReduceAndReturn folds", criterion_9),
        ("sema negative corpus", criterion_10),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (title, f)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {title}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {title}: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
