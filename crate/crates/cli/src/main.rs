//! `irglc`: check, plan, compile, run, dump and format IrGL programs.
//!
//! Exit status is 0 on success, 1 when diagnostics or run-time errors are
//! reported and 2 on usage errors.
//!
//! Flags and the configuration field each one sets:
//!
//! | flag                      | field                                     |
//! |---------------------------|-------------------------------------------|
//! | `--outline`               | `PlanConfig::outline`, `EmitOptions::outline` |
//! | `--sm-count`              | `PlanConfig::sm_count`                    |
//! | `--blocks-per-sm`         | `PlanConfig::blocks_per_sm`               |
//! | `--block-size K=N`        | `PlanConfig::block_size_overrides`        |
//! | `--mapping K=blocked`     | the `mapping` annotation of kernel `K`    |
//! | `--runtime-header`        | `EmitOptions::runtime_inline` (off)       |
//! | `--resident-threads`      | `SimConfig::resident_threads`             |
//! | `--thread-block`          | `SimConfig::block_size`                   |
//! | `--seed`                  | `SimConfig::schedule_seed`                |
//! | `--retry-serialize-after` | `SimConfig::retry_serialize_after`        |

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use irgl::ast::{KernelKind, Mapping, Module, TypeTag};
use irgl::codegen::{self, runtime, EmitOptions};
use irgl::diag::Diagnostic;
use irgl::interp::{self, Data, InterpError, SimConfig};
use irgl::plan::{format_table, PlanConfig};
use irgl::sema::{analyze, host_forall_demotion, SemaOptions};

#[derive(Parser)]
#[command(name = "irglc", version, about = "Compiler and reference interpreter for IrGL")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check the static rules; diagnostics go to standard error.
    Check(Source),
    /// Print the launch plan of every plain kernel.
    Plan {
        #[command(flatten)]
        src: Source,
        #[command(flatten)]
        plan: PlanFlags,
    },
    /// Emit CUDA C++.
    Compile {
        #[command(flatten)]
        src: Source,
        #[command(flatten)]
        plan: PlanFlags,
        /// Output file; defaults to the input with a `.cu` extension.
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Paste the runtime into the output (the default).
        #[arg(long, conflicts_with = "runtime_header")]
        runtime_inline: bool,
        /// Include the runtime header and write it beside the output.
        #[arg(long)]
        runtime_header: bool,
    },
    /// Execute a host kernel on the simulated machine.
    Run {
        #[command(flatten)]
        src: Source,
        /// Host kernel to run.
        #[arg(long, default_value = "main")]
        entry: String,
        /// Edge-list file bound to the entry's graph parameter.
        #[arg(long)]
        graph: Option<PathBuf>,
        /// `NAME=VALUE` or `NAME=@FILE`; repeatable.
        #[arg(long = "bind", value_name = "NAME=VALUE")]
        binds: Vec<String>,
        #[arg(long, default_value_t = SimConfig::default().resident_threads)]
        resident_threads: usize,
        /// Threads per simulated block.
        #[arg(long, default_value_t = SimConfig::default().block_size)]
        thread_block: usize,
        /// Schedule seed; 0 is round-robin.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = SimConfig::default().retry_serialize_after)]
        retry_serialize_after: usize,
        /// Write the event trace to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Print the canonical serialization.
    DumpAst(Source),
    /// Print the source in canonical surface syntax.
    Fmt(Source),
}

#[derive(Args)]
struct Source {
    /// IrGL source file.
    input: PathBuf,
    /// `KERNEL=blocked|consecutive`: sets a kernel's iteration mapping.
    #[arg(long = "mapping", value_name = "KERNEL=MAPPING")]
    mappings: Vec<String>,
}

#[derive(Args)]
struct PlanFlags {
    /// Compile eligible pipes into control kernels.
    #[arg(long)]
    outline: bool,
    #[arg(long, default_value_t = PlanConfig::default().sm_count)]
    sm_count: u32,
    #[arg(long, default_value_t = PlanConfig::default().blocks_per_sm)]
    blocks_per_sm: u32,
    /// `KERNEL=N`: fixes a kernel's block size; repeatable.
    #[arg(long = "block-size", value_name = "KERNEL=N")]
    block_sizes: Vec<String>,
}

enum Failure {
    Diags(Vec<Diagnostic>),
    Message(String),
}

impl From<String> for Failure {
    fn from(m: String) -> Self {
        Failure::Message(m)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(text) => {
            // A closed pipe (`irglc run ... | head`) is not an error.
            let _ = io::stdout().lock().write_all(text.as_bytes());
            ExitCode::SUCCESS
        }
        Err(Failure::Diags(ds)) => {
            for d in ds {
                eprintln!("{d}");
            }
            ExitCode::from(1)
        }
        Err(Failure::Message(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

fn split_kv<'a>(flag: &str, s: &'a str) -> Result<(&'a str, &'a str), String> {
    s.split_once('=').filter(|(k, _)| !k.is_empty()).ok_or_else(|| format!("--{flag} expects NAME=VALUE, got `{s}`"))
}

fn read(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

fn load(src: &Source) -> Result<Module, Failure> {
    let text = read(&src.input)?;
    let mut m = irgl::frontend::parse_source(&text, &src.input.display().to_string()).map_err(Failure::Diags)?;
    for spec in &src.mappings {
        let (kernel, value) = split_kv("mapping", spec)?;
        let mapping = Mapping::parse(value).ok_or_else(|| format!("unknown mapping `{value}`"))?;
        match m.kernel_mut(kernel) {
            Some(k) if k.kind == KernelKind::Plain => {
                k.annotations.insert("mapping".into(), mapping.as_str().into());
            }
            _ => return Err(format!("--mapping names `{kernel}`, which is not a plain kernel").into()),
        }
    }
    Ok(m)
}

fn plan_config(flags: &PlanFlags) -> Result<PlanConfig, Failure> {
    let mut overrides = BTreeMap::new();
    for spec in &flags.block_sizes {
        let (kernel, n) = split_kv("block-size", spec)?;
        let n: u32 = n.parse().map_err(|_| format!("--block-size: `{n}` is not a block size"))?;
        overrides.insert(kernel.to_string(), n);
    }
    Ok(PlanConfig {
        sm_count: flags.sm_count,
        blocks_per_sm: flags.blocks_per_sm,
        block_size_overrides: overrides,
        outline: flags.outline,
    })
}

fn warn(ds: &[Diagnostic]) {
    for d in ds {
        eprintln!("{d}");
    }
}

fn dispatch(cmd: Cmd) -> Result<String, Failure> {
    let mut out = String::new();
    match cmd {
        Cmd::Check(src) => {
            let m = host_forall_demotion(&load(&src)?);
            let a = analyze(&m, &SemaOptions::default()).map_err(Failure::Diags)?;
            warn(&a.warnings);
        }
        Cmd::Plan { src, plan } => {
            let config = plan_config(&plan)?;
            let m = host_forall_demotion(&load(&src)?);
            let a = analyze(&m, &SemaOptions::default()).map_err(Failure::Diags)?;
            let p = irgl::plan::plan_module(&m, &a, &config).map_err(Failure::Diags)?;
            warn(&a.warnings);
            warn(&p.warnings);
            out = format_table(&m, &p, &a, config.sm_count);
        }
        Cmd::Compile { src, plan, out: out_path, runtime_inline: _, runtime_header } => {
            let config = plan_config(&plan)?;
            let m = load(&src)?;
            let options = EmitOptions { outline: config.outline, runtime_inline: !runtime_header };
            let result = codegen::compile(&m, &SemaOptions::default(), &config, options).map_err(Failure::Diags)?;
            warn(&result.warnings);
            let path = out_path.unwrap_or_else(|| src.input.with_extension("cu"));
            fs::write(&path, &result.cuda).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
            if runtime_header {
                let header = path.with_file_name(runtime::HEADER_NAME);
                fs::write(&header, runtime::RUNTIME).map_err(|e| format!("cannot write {}: {e}", header.display()))?;
            }
        }
        Cmd::Run { src, entry, graph, binds, resident_threads, thread_block, seed, retry_serialize_after, trace } => {
            let m = load(&src)?;
            let bindings = collect_bindings(&m, &entry, graph.as_deref(), &binds)?;
            let config = SimConfig {
                resident_threads,
                block_size: thread_block,
                schedule_seed: seed,
                retry_serialize_after,
                ..SimConfig::default()
            };
            let result = interp::run_host_traced(&m, &entry, &bindings, &config, trace.is_some()).map_err(|e| match e {
                InterpError::Rejected(ds) => Failure::Diags(ds),
                other => Failure::Message(other.to_string()),
            })?;
            if let Some(path) = trace {
                let mut text = result.trace.join("\n");
                text.push('\n');
                fs::write(&path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
            }
            out = result.output;
            for (name, value) in &result.bindings {
                out.push_str(&format!("{name} = {value}\n"));
            }
        }
        Cmd::DumpAst(src) => out = irgl::serial::serialize(&load(&src)?),
        Cmd::Fmt(src) => out = irgl::frontend::pretty_print(&load(&src)?),
    }
    Ok(out)
}

/// Declared type of an entry parameter or global.
fn declared_type(m: &Module, entry: &str, name: &str) -> Option<TypeTag> {
    let param = m.kernel(entry).and_then(|k| k.params.iter().find(|p| p.name == name)).map(|p| p.ty);
    param.or_else(|| m.decls.iter().find(|d| d.name == name).map(|d| d.ty))
}

fn graph_from(path: &Path) -> Result<Data, String> {
    let g = interp::parse_edge_list(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(Data::Graph(g.into()))
}

fn collect_bindings(
    m: &Module,
    entry: &str,
    graph: Option<&Path>,
    binds: &[String],
) -> Result<BTreeMap<String, Data>, Failure> {
    let mut out = BTreeMap::new();
    if let Some(path) = graph {
        let params = m.kernel(entry).map(|k| k.params.as_slice()).unwrap_or_default();
        let target = params
            .iter()
            .find(|p| p.ty == TypeTag::Graph)
            .map(|p| p.name.clone())
            .or_else(|| m.decls.iter().find(|d| d.ty == TypeTag::Graph).map(|d| d.name.clone()))
            .ok_or_else(|| format!("--graph given but `{entry}` has no graph parameter"))?;
        out.insert(target, graph_from(path)?);
    }
    for spec in binds {
        let (name, value) = split_kv("bind", spec)?;
        let data = match value.strip_prefix('@') {
            Some(file) => {
                let path = Path::new(file);
                match declared_type(m, entry, name) {
                    Some(TypeTag::Graph) => graph_from(path)?,
                    _ => {
                        let text = read(path)?;
                        match interp::parse_data(text.trim()) {
                            Ok(d) => d,
                            Err(_) => graph_from(path)?,
                        }
                    }
                }
            }
            None => interp::parse_data(value).map_err(|e| format!("--bind {name}: {e}"))?,
        };
        out.insert(name.to_string(), data);
    }
    Ok(out)
}
