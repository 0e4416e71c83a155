//! Observable results of the corpus programs do not depend on the schedule.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use irgl::ast::Module;
use irgl::frontend::parse_source;
use irgl::interp::{run_host, Data, Graph, SimConfig};

const SEEDS: u64 = 50;

fn corpus(name: &str) -> Module {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus").join(format!("{name}.irgl"));
    parse_source(&fs::read_to_string(path).unwrap(), name).unwrap()
}

/// Connected, symmetric, with distinct weights per undirected edge.
fn graph(rng: &mut ChaCha8Rng, n: usize) -> Data {
    let mut edges = Vec::new();
    let mut w = 0;
    let mut add = |a: usize, b: usize, edges: &mut Vec<(i64, i64, i64)>| {
        w += 1;
        edges.push((a as i64, b as i64, w));
        edges.push((b as i64, a as i64, w));
    };
    for v in 1..n {
        add(rng.gen_range(0..v), v, &mut edges);
    }
    for _ in 0..n {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if a != b {
            add(a, b, &mut edges);
        }
    }
    Data::Graph(Graph::from_edges(n, &edges).unwrap().into())
}

/// Runs `name` under every seed and returns the named outputs, checking they
/// never change.
fn stable(name: &str, binds: Vec<(&str, Data)>, outputs: &[&str]) {
    let m = corpus(name);
    let b: BTreeMap<String, Data> = binds.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    let mut first = None;
    for seed in 0..SEEDS {
        let config = SimConfig { schedule_seed: seed, resident_threads: 5 + seed as usize % 13, ..SimConfig::default() };
        let r = run_host(&m, "main", &b, &config).unwrap_or_else(|e| panic!("{name} seed {seed}: {e}"));
        assert_eq!(r.stats.epoch_violations, 0);
        let got: Vec<Data> = outputs.iter().map(|o| r.get(o).unwrap().clone()).collect();
        match &first {
            None => first = Some(got),
            Some(f) => assert_eq!(&got, f, "{name} changed under seed {seed}"),
        }
    }
}

#[test]
fn bfs_levels() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in [3, 9, 20] {
        stable("bfs", vec![("graph", graph(&mut rng, n)), ("src", Data::Int(0))], &["level"]);
    }
}

#[test]
fn sssp_distances() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for n in [4, 12] {
        stable("sssp", vec![("graph", graph(&mut rng, n)), ("src", Data::Int(1))], &["dist"]);
    }
}

#[test]
fn boruvka_weight() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for n in [4, 16] {
        stable("boruvka", vec![("graph", graph(&mut rng, n))], &["mst_weight"]);
    }
}

#[test]
fn dmr_final_mesh() {
    let mesh = Data::Array([3, 1, 0, 2, 2, 4, 0, 1, 1, 3].map(Data::Int).to_vec());
    stable("dmr", vec![("mesh", mesh)], &["mesh", "nbad"]);
}

#[test]
fn guarded_counters() {
    stable("dynamic_pipe", vec![], &["total"]);
    stable("retry", vec![], &["done", "tries"]);
}
