use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn irglc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_irglc")).args(args).output().expect("irglc runs")
}

fn corpus(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/corpus").join(name)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn copy_to(dir: &Path, name: &str) -> PathBuf {
    let dst = dir.join(name);
    fs::copy(corpus(name), &dst).unwrap();
    dst
}

#[test]
fn run_bfs_on_a_path() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("path5.txt");
    fs::write(&graph, "5 4\n0 1\n1 2\n2 3\n3 4\n").unwrap();
    let bfs = corpus("bfs.irgl");
    let o = irglc(&["run", bfs.to_str().unwrap(), "--graph", graph.to_str().unwrap(), "--bind", "src=0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).lines().any(|l| l == "level = [0, 1, 2, 3, 4]"), "{}", stdout(&o));
    // Nothing but the input files is left in the directory.
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn run_writes_the_trace_only_when_asked() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("retry.trace");
    let retry = corpus("retry.irgl");
    let o = irglc(&["run", retry.to_str().unwrap(), "--trace", trace.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&trace).unwrap();
    assert!(text.starts_with("launch kernel=work threads=6 epoch=1 in=6\n"), "{text}");
    assert!(text.contains("swap lists=in<->retry in=3 out=3 retry=0\n"));
}

#[test]
fn run_binds_arrays_from_files_and_prints_output() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = dir.path().join("mesh.txt");
    fs::write(&mesh, "[1, 0, 2]\n").unwrap();
    let dmr = corpus("dmr.irgl");
    let o = irglc(&["run", dmr.to_str().unwrap(), "--bind", &format!("mesh=@{}", mesh.display()), "--seed", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("initial bad: 2\nfinal bad: 0\n"), "{out}");
    assert!(out.contains("mesh = [0, 0, 0]\n"), "{out}");
}

#[test]
fn run_reports_runtime_errors_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("oob.irgl");
    fs::write(&src, "array a = zeros(2);\nhost Kernel main() { a[5] = 1; }\n").unwrap();
    let o = irglc(&["run", src.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("out of bounds"), "{}", stderr(&o));
}

#[test]
fn compile_is_deterministic_and_lands_beside_the_input() {
    let dir = tempfile::tempdir().unwrap();
    let src = copy_to(dir.path(), "bfs.irgl");
    let cu = dir.path().join("bfs.cu");
    assert!(irglc(&["compile", src.to_str().unwrap()]).status.success());
    let first = fs::read(&cu).unwrap();
    assert!(irglc(&["compile", src.to_str().unwrap()]).status.success());
    assert_eq!(fs::read(&cu).unwrap(), first);
    assert!(String::from_utf8(first).unwrap().contains("namespace irgl"));
}

#[test]
fn compile_with_runtime_header_writes_it_alongside() {
    let dir = tempfile::tempdir().unwrap();
    let src = copy_to(dir.path(), "sssp.irgl");
    let out = dir.path().join("out.cu");
    let o = irglc(&["compile", src.to_str().unwrap(), "--runtime-header", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(fs::read_to_string(&out).unwrap().contains("#include \"irgl_runtime.cuh\""));
    assert!(dir.path().join("irgl_runtime.cuh").exists());
}

#[test]
fn block_size_override_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let src = copy_to(dir.path(), "sssp.irgl");
    let ok = irglc(&["plan", src.to_str().unwrap(), "--block-size", "relax=128"]);
    assert!(ok.status.success(), "{}", stderr(&ok));
    assert!(stdout(&ok).lines().any(|l| l.starts_with("relax") && l.contains("128")), "{}", stdout(&ok));
    let bad = irglc(&["plan", src.to_str().unwrap(), "--block-size", "relax=512"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stderr(&bad).contains("error[block-size-override]"), "{}", stderr(&bad));
}

#[test]
fn mapping_flag_sets_the_annotation() {
    let bfs = corpus("bfs.irgl");
    let o = irglc(&["fmt", bfs.to_str().unwrap(), "--mapping", "BFS=blocked"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("@mapping(blocked)"), "{}", stdout(&o));
    let bad = irglc(&["fmt", bfs.to_str().unwrap(), "--mapping", "main=blocked"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn check_rejects_a_host_atomic() {
    let o = irglc(&["check", corpus("bad/kernel-construct-in-host.irgl").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr(&o).lines().filter(|l| l.contains(": error[")).count(), 1);
}

#[test]
fn check_accepts_the_corpus() {
    for name in ["bfs", "sssp", "boruvka", "dmr", "retry", "dynamic_pipe"] {
        let o = irglc(&["check", corpus(&format!("{name}.irgl")).to_str().unwrap()]);
        assert!(o.status.success(), "{name}: {}", stderr(&o));
    }
}

#[test]
fn dump_and_fmt_are_stable() {
    let dir = tempfile::tempdir().unwrap();
    let src = corpus("boruvka.irgl");
    let dumped = stdout(&irglc(&["dump-ast", src.to_str().unwrap()]));
    assert!(dumped.starts_with("(module boruvka"), "{dumped}");
    let formatted = stdout(&irglc(&["fmt", src.to_str().unwrap()]));
    let again = dir.path().join("again.irgl");
    fs::write(&again, &formatted).unwrap();
    assert_eq!(stdout(&irglc(&["fmt", again.to_str().unwrap()])), formatted);
    assert_eq!(stdout(&irglc(&["dump-ast", again.to_str().unwrap()])), dumped);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(irglc(&[]).status.code(), Some(2));
    let o = irglc(&["run", "x.irgl", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--no-such-flag"));
}
