//! Sequential execution of host and device kernels, and the orchestration
//! constructs that drive launches.

use std::collections::BTreeMap;

use super::eval::{as_int, coerce, truthy, zero_of, EResult, Locals, Memory};
use super::machine;
use super::value::{Data, Value};
use super::worklist::PipeState;
use super::{InterpError, Program, RunResult, SimConfig};
use crate::ast::*;

struct Seq<'a, 'p> {
    mem: &'a mut Memory<'p>,
    /// Absent in device kernels, which cannot orchestrate.
    config: Option<&'a SimConfig>,
    kernel: String,
    pipe: Option<PipeState>,
    pipe_depth: usize,
}

pub(crate) fn run(
    prog: &Program,
    entry: &str,
    bindings: &BTreeMap<String, Data>,
    config: &SimConfig,
    trace: bool,
) -> Result<RunResult, InterpError> {
    let m = &prog.module;
    let k = match m.kernel(entry) {
        Some(k) if k.is_host() => k,
        Some(_) => return Err(InterpError::Binding(format!("`{entry}` is not a host kernel"))),
        None => return Err(InterpError::Binding(format!("no kernel named `{entry}`"))),
    };
    for name in bindings.keys() {
        let known = k.params.iter().any(|p| &p.name == name)
            || m.decls.iter().any(|d| &d.name == name)
            || prog.implicit_arrays.contains(name);
        if !known {
            return Err(InterpError::Binding(format!(
                "`{name}` is neither a parameter of `{entry}` nor a global"
            )));
        }
    }
    let mut mem = Memory::new(prog);
    if trace {
        mem.trace = Some(Vec::new());
    }
    let bind_err = |name: &str, e: String| InterpError::Binding(format!("`{name}`: {e}"));
    let mut locals = Locals::new();
    for p in &k.params {
        let d = bindings
            .get(&p.name)
            .ok_or_else(|| InterpError::Binding(format!("entry parameter `{}` is not bound", p.name)))?;
        let v = mem.heap.load_data(d);
        locals.insert(p.name.clone(), coerce(p.ty, v).map_err(|e| bind_err(&p.name, e))?);
    }
    let graph_data = k
        .params
        .iter()
        .filter_map(|p| match locals.get(&p.name) {
            Some(Value::Graph(g)) => Some(g.clone()),
            _ => None,
        })
        .chain(m.decls.iter().filter_map(|d| match bindings.get(&d.name) {
            Some(Data::Graph(g)) => Some(g.clone()),
            _ => None,
        }))
        .next();
    mem.graph = graph_data;
    let default_array = |mem: &mut Memory| {
        let n = mem.graph.as_ref().map_or(0, |g| g.nnodes());
        Value::Array(mem.heap.alloc(vec![Value::Int(0); n]))
    };
    for d in &m.decls {
        let v = if let Some(b) = bindings.get(&d.name) {
            let v = mem.heap.load_data(b);
            coerce(d.ty, v).map_err(|e| bind_err(&d.name, e))?
        } else if let Some(init) = &d.init {
            let v = mem.eval(&Locals::new(), init).map_err(|e| bind_err(&d.name, e))?;
            coerce(d.ty, v).map_err(|e| bind_err(&d.name, e))?
        } else {
            match d.ty {
                TypeTag::Array => default_array(&mut mem),
                TypeTag::Graph => match &mem.graph {
                    Some(g) => Value::Graph(g.clone()),
                    None => return Err(InterpError::Binding(format!("global graph `{}` is not bound", d.name))),
                },
                ty => zero_of(ty),
            }
        };
        mem.globals.insert(d.name.clone(), v);
    }
    for a in &prog.implicit_arrays {
        let v = match bindings.get(a) {
            Some(b) => mem.heap.load_data(b),
            None => default_array(&mut mem),
        };
        mem.globals.insert(a.clone(), v);
    }

    let mut seq = Seq { mem: &mut mem, config: Some(config), kernel: entry.to_string(), pipe: None, pipe_depth: 0 };
    seq.block(&mut locals, &k.body)?;

    let mut out = Vec::new();
    for p in &k.params {
        out.push((p.name.clone(), mem.heap.to_data(&locals[&p.name])));
    }
    for name in m.decls.iter().map(|d| &d.name).chain(prog.implicit_arrays.iter()) {
        out.push((name.clone(), mem.heap.to_data(&mem.globals[name])));
    }
    Ok(RunResult { bindings: out, output: mem.output, trace: mem.trace.unwrap_or_default(), stats: mem.stats })
}

/// Runs device kernel `name` to completion within the calling step.
pub(crate) fn call_device(mem: &mut Memory, name: &str, args: Vec<Value>) -> EResult<()> {
    let prog = mem.prog;
    let k = &prog.module.kernels[prog.device[name]];
    if args.len() != k.params.len() {
        return Err(format!("`{name}` takes {} argument(s), {} given", k.params.len(), args.len()));
    }
    let mut locals = Locals::new();
    for (p, v) in k.params.iter().zip(args) {
        locals.insert(p.name.clone(), coerce(p.ty, v)?);
    }
    let mut seq = Seq { mem, config: None, kernel: name.to_string(), pipe: None, pipe_depth: 0 };
    seq.block(&mut locals, &k.body).map_err(|e| e.to_string())
}

impl<'a> Seq<'a, '_> {
    fn err(&self, message: String) -> InterpError {
        InterpError::Runtime { kernel: self.kernel.clone(), message }
    }

    fn eval(&mut self, locals: &Locals, e: &Expr) -> Result<Value, InterpError> {
        self.mem.eval(locals, e).map_err(|m| self.err(m))
    }

    fn cond(&mut self, locals: &Locals, e: &Expr) -> Result<bool, InterpError> {
        let v = self.eval(locals, e)?;
        truthy(&v).map_err(|m| self.err(m))
    }

    fn config(&self, what: &str) -> Result<&'a SimConfig, InterpError> {
        self.config.ok_or_else(|| self.err(format!("{what} is only valid in host kernels")))
    }

    fn block(&mut self, locals: &mut Locals, b: &[Stmt]) -> Result<(), InterpError> {
        b.iter().try_for_each(|s| self.stmt(locals, s))
    }

    fn stmt(&mut self, locals: &mut Locals, s: &Stmt) -> Result<(), InterpError> {
        match &s.kind {
            StmtKind::CBlock(cb) => {
                let prog = self.mem.prog;
                let stmts = prog.code.get(&cb.code).ok_or_else(|| self.err("uninterpretable operator code".into()))?;
                for st in stmts {
                    self.mem.exec_simple(locals, st).map_err(|m| self.err(m))?;
                }
            }
            StmtKind::For { var, iter, body } | StmtKind::ForAll(ForAll { var, iter, body, .. }) => {
                let wl = self.pipe.as_ref().map(|p| p.input.len());
                let items = self.mem.items(locals, iter, wl).map_err(|m| self.err(m))?;
                for i in 0..items.len() {
                    let v = items.nth(&self.mem.heap, i).map_err(|m| self.err(m))?;
                    locals.insert(var.clone(), v);
                    self.block(locals, body)?;
                }
            }
            StmtKind::While { cond, body } => {
                while self.cond(locals, cond)? {
                    self.block(locals, body)?;
                }
            }
            StmtKind::If { cond, then, els } => {
                if self.cond(locals, cond)? {
                    self.block(locals, then)?;
                } else {
                    self.block(locals, els)?;
                }
            }
            StmtKind::Invoke(inv) => {
                let config = self.config("Invoke")?;
                let args = self.bind_args(locals, &inv.kernel, &inv.args)?;
                let r = self.invoke(config, &inv.kernel, args, inv.reduction)?;
                if let (Some(var), Some(r)) = (&inv.result, r) {
                    let p = self.mem.place(locals, &Expr::var(var)).map_err(|m| self.err(m))?;
                    self.mem.store(locals, p, Value::Bool(r)).map_err(|m| self.err(m))?;
                }
            }
            StmtKind::Iterate(it) => {
                let config = self.config("Iterate")?;
                self.iterate(config, locals, it)?;
            }
            StmtKind::Pipe(p) => {
                self.config("Pipe")?;
                self.pipe_stmt(locals, p)?;
            }
            other => {
                return Err(self.err(format!("{} cannot run in a host or device kernel", other.construct_name())));
            }
        }
        Ok(())
    }

    fn bind_args(&mut self, locals: &Locals, kernel: &str, args: &[Expr]) -> Result<Locals, InterpError> {
        let prog = self.mem.prog;
        let k = prog.module.kernel(kernel).ok_or_else(|| self.err(format!("no kernel named `{kernel}`")))?;
        if k.params.len() != args.len() {
            return Err(self.err(format!("`{kernel}` takes {} argument(s), {} given", k.params.len(), args.len())));
        }
        let mut bound = Locals::new();
        for (p, a) in k.params.iter().zip(args) {
            let v = self.eval(locals, a)?;
            bound.insert(p.name.clone(), coerce(p.ty, v).map_err(|m| self.err(m))?);
        }
        Ok(bound)
    }

    fn trace_swap(&mut self, lists: &str) {
        if let Some(p) = &self.pipe {
            let (i, o, r) = (p.input.len(), p.output.len(), p.retry.len());
            self.mem.trace(|| format!("swap lists={lists} in={i} out={o} retry={r}"));
        }
    }

    /// One invocation: the launch, reruns while items were retried, then the
    /// in/out swap. Returns the reduced value when `red` asks for one.
    fn invoke(
        &mut self,
        config: &SimConfig,
        kernel: &str,
        args: Locals,
        red: Option<Reduction>,
    ) -> Result<Option<bool>, InterpError> {
        let worklist = self.mem.prog.infos[kernel].uses_worklist;
        let temp = worklist && self.pipe.is_none();
        if temp {
            self.pipe = Some(PipeState::new(None));
        }
        let mut values = Vec::new();
        let mut retry_rounds = 0;
        let mut serial = false;
        loop {
            let pipe = if worklist { self.pipe.as_mut() } else { None };
            let out = machine::launch(self.mem, config, kernel, args.clone(), pipe, serial)?;
            values.extend(out.reduce_values);
            retry_rounds += out.retried as usize;
            let Some(p) = self.pipe.as_mut().filter(|_| worklist) else { break };
            if p.retry.is_empty() {
                break;
            }
            p.swap_in_retry();
            self.trace_swap("in<->retry");
            if !serial && retry_rounds >= config.retry_serialize_after {
                serial = true;
                self.mem.trace(|| format!("serialize kernel={kernel}"));
            }
        }
        if worklist {
            if let Some(p) = self.pipe.as_mut() {
                p.swap_in_out();
            }
            self.trace_swap("in<->out");
        }
        if temp {
            self.pipe = None;
        }
        Ok(red.map(|r| values.into_iter().fold(r.identity(), |acc, v| r.fold(acc, v))))
    }

    fn input_empty(&self) -> bool {
        self.pipe.as_ref().is_none_or(|p| p.input.is_empty())
    }

    fn iterate(&mut self, config: &SimConfig, locals: &mut Locals, it: &Iterate) -> Result<(), InterpError> {
        let worklist = self.mem.prog.infos[&it.kernel].uses_worklist;
        let mut saved = None;
        if it.initial.is_some() || (worklist && self.pipe.is_none()) {
            let fresh = self.new_pipe(locals, it.initial.as_ref())?;
            saved = Some(self.pipe.replace(fresh));
        }
        let mut rounds = 0;
        let result = (|| {
            loop {
                let stop = match (&it.extra_cond, worklist) {
                    (None, true) => self.input_empty(),
                    (Some((e, c)), true) => {
                        let empty = self.input_empty();
                        match c {
                            Combiner::And => empty && self.cond(locals, e)?,
                            Combiner::Or => empty || self.cond(locals, e)?,
                        }
                    }
                    (Some((e, _)), false) => self.cond(locals, e)?,
                    (None, false) => false,
                };
                if stop {
                    break;
                }
                rounds += 1;
                let kernel = &it.kernel;
                self.mem.trace(|| format!("iter kernel={kernel} round={rounds}"));
                let args = self.bind_args(locals, &it.kernel, &it.args)?;
                let r = self.invoke(config, &it.kernel, args, it.cond.map(|c| c.1))?;
                self.block(locals, &it.between_rounds)?;
                match (it.cond, r) {
                    (Some((CondKind::While, _)), Some(false)) | (Some((CondKind::Until, _)), Some(true)) => break,
                    _ => {}
                }
            }
            Ok(())
        })();
        self.mem.stats.iterate_rounds.push((it.kernel.clone(), rounds));
        if let Some(saved) = saved {
            self.pipe = saved;
        }
        result
    }

    fn pipe_stmt(&mut self, locals: &mut Locals, p: &Pipe) -> Result<(), InterpError> {
        let saved = if self.pipe_depth == 0 {
            let fresh = self.new_pipe(locals, p.wlinit.as_ref())?;
            Some(self.pipe.replace(fresh))
        } else {
            None
        };
        self.pipe_depth += 1;
        let result = if p.once {
            self.block(locals, &p.body)
        } else {
            (|| {
                while !self.input_empty() {
                    self.block(locals, &p.body)?;
                }
                Ok(())
            })()
        };
        self.pipe_depth -= 1;
        if let Some(saved) = saved {
            self.pipe = saved;
        }
        result
    }

    fn new_pipe(&mut self, locals: &Locals, init: Option<&WorklistInit>) -> Result<PipeState, InterpError> {
        let Some(init) = init else {
            return Ok(PipeState::new(None));
        };
        let capacity = match &init.size {
            Some(e) => {
                let n = as_int(&self.eval(locals, e)?).map_err(|m| self.err(m))?;
                Some(usize::try_from(n).map_err(|_| self.err(format!("negative worklist size {n}")))?)
            }
            None => None,
        };
        let mut items = Vec::new();
        match &init.source {
            WorklistSource::Scalars(es) => {
                for e in es {
                    items.push(self.eval(locals, e)?);
                }
            }
            WorklistSource::FromArray { array, len } => {
                let arr = self.eval(locals, array)?;
                let n = as_int(&self.eval(locals, len)?).map_err(|m| self.err(m))?;
                let Value::Array(id) = arr else {
                    return Err(self.err(format!("FromArray of {}", arr.type_name())));
                };
                for i in 0..n {
                    items.push(self.mem.heap.get(id, i).map_err(|m| self.err(m))?);
                }
            }
        }
        if let Some(c) = capacity.filter(|&c| items.len() > c) {
            return Err(self.err(format!("initializer size overflow: {} items for a worklist of size {c}", items.len())));
        }
        let mut pipe = PipeState::new(capacity);
        for v in items {
            let item = as_int(&v).map_err(|m| self.err(m))?;
            pipe.input.push(item, self.mem.epoch).map_err(|m| self.err(m))?;
        }
        Ok(pipe)
    }
}
