use proptest::prelude::*;

use irgl::ast::*;
use irgl::frontend::{parse_source, pretty_print};
use irgl::plan::t_control;
use irgl::sema::BlockConstraint;
use irgl::serial::{parse_serialized, serialize};

/// Generation knobs: the surface syntax cannot spell every tree the
/// serialization can (negative literals read back as negations, for one).
#[derive(Clone, Copy)]
struct Shape {
    surface: bool,
}

fn ident() -> impl Strategy<Value = String> {
    "v[a-z0-9_]{0,5}"
}

fn literal(shape: Shape) -> BoxedStrategy<Expr> {
    let ints = if shape.surface { (0i64..1000).boxed() } else { any::<i64>().boxed() };
    let floats = if shape.surface {
        (0u32..400).prop_map(|q| q as f64 / 4.0).boxed()
    } else {
        any::<f64>().prop_filter("finite", |f| f.is_finite()).boxed()
    };
    prop_oneof![
        ints.prop_map(Expr::Int),
        floats.prop_map(Expr::Float),
        any::<bool>().prop_map(Expr::Bool),
        "[ a-zA-Z0-9%\\\\\"\n]{0,8}".prop_map(Expr::Str),
        ident().prop_map(Expr::Var),
    ]
    .boxed()
}

fn expr(shape: Shape) -> BoxedStrategy<Expr> {
    literal(shape)
        .prop_recursive(3, 24, 3, |inner| {
            let op = prop::sample::select(BinaryOp::ALL.to_vec());
            let unary = prop_oneof![Just(UnaryOp::Neg), Just(UnaryOp::Not)];
            prop_oneof![
                (unary, inner.clone()).prop_map(|(op, e)| Expr::Unary(op, Box::new(e))),
                (op, inner.clone(), inner.clone()).prop_map(|(op, a, b)| Expr::binary(op, a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, i)| Expr::index(a, i)),
                (inner.clone(), ident()).prop_map(|(a, f)| Expr::field(a, f)),
                (ident(), prop::collection::vec(inner.clone(), 0..3)).prop_map(|(n, a)| Expr::Call(n, a)),
                (inner.clone(), ident(), prop::collection::vec(inner, 0..3))
                    .prop_map(|(r, n, a)| Expr::method(r, n, a)),
            ]
        })
        .boxed()
}

fn reduction() -> impl Strategy<Value = Reduction> {
    prop_oneof![Just(Reduction::Any), Just(Reduction::All)]
}

fn wlinit(shape: Shape) -> impl Strategy<Value = WorklistInit> {
    let source = prop_oneof![
        prop::collection::vec(expr(shape), 0..3).prop_map(WorklistSource::Scalars),
        (expr(shape), expr(shape)).prop_map(|(array, len)| WorklistSource::FromArray { array, len }),
    ];
    (prop::option::of(expr(shape)), source).prop_map(|(size, source)| WorklistInit { size, source })
}

fn leaf_stmt(shape: Shape) -> BoxedStrategy<StmtKind> {
    let e = || expr(shape);
    let cblock = (
        "[a-z0-9 =+;(){}\"]{1,16}",
        prop::collection::vec(ident(), 0..3),
        prop::collection::vec(ident(), 0..3),
    )
        .prop_map(|(code, reads, writes)| StmtKind::CBlock(CBlock { code, reads, writes }));
    let invoke = (ident(), prop::collection::vec(e(), 0..3), prop::option::of((reduction(), ident()))).prop_map(
        |(kernel, args, red)| {
            StmtKind::Invoke(Invoke {
                kernel,
                args,
                reduction: red.as_ref().map(|r| r.0),
                result: red.map(|r| r.1),
            })
        },
    );
    prop_oneof![
        cblock,
        Just(StmtKind::SyncRunningThreads),
        e().prop_map(StmtKind::Retry),
        e().prop_map(StmtKind::Respawn),
        e().prop_map(StmtKind::ReduceAndReturn),
        e().prop_map(StmtKind::WlPush),
        (ident(), e()).prop_map(|(var, index)| StmtKind::WlPop { var, index }),
        invoke,
    ]
    .boxed()
}

fn stmt(shape: Shape) -> BoxedStrategy<Stmt> {
    leaf_stmt(shape)
        .prop_map(Stmt::from)
        .prop_recursive(3, 32, 4, move |inner| {
            let block = || prop::collection::vec(inner.clone(), 0..3);
            let e = move || expr(shape);
            let mapping = prop_oneof![Just(Mapping::Consecutive), Just(Mapping::Blocked)];
            let cond = prop::option::of((prop_oneof![Just(CondKind::While), Just(CondKind::Until)], reduction()));
            let combiner = prop_oneof![Just(Combiner::And), Just(Combiner::Or)];
            let locks = prop_oneof![e().prop_map(LockSource::Array), e().prop_map(LockSource::ArrayIterator)];
            prop_oneof![
                (ident(), e(), block(), mapping)
                    .prop_map(|(var, iter, body, mapping)| StmtKind::ForAll(ForAll { var, iter, body, mapping })),
                (ident(), e(), block()).prop_map(|(var, iter, body)| StmtKind::For { var, iter, body }),
                (e(), block()).prop_map(|(cond, body)| StmtKind::While { cond, body }),
                (e(), block(), block()).prop_map(|(cond, then, els)| StmtKind::If { cond, then, els }),
                (e(), block(), prop::option::of(block()))
                    .prop_map(|(lock, locked, failed)| StmtKind::Atomic { lock, locked, failed }),
                (e(), e(), locks, block(), prop::option::of(block())).prop_map(
                    |(object, count, locks, locked, failed)| {
                        StmtKind::Exclusive(Exclusive { object, count, locks, locked, failed })
                    }
                ),
                (
                    ident(),
                    prop::collection::vec(e(), 0..3),
                    cond,
                    prop::option::of(wlinit(shape)),
                    prop::option::of((e(), combiner)),
                    block()
                )
                    .prop_map(|(kernel, args, cond, initial, extra_cond, between_rounds)| {
                        StmtKind::Iterate(Iterate { kernel, args, cond, initial, extra_cond, between_rounds })
                    }),
                (any::<bool>(), block(), prop::option::of(wlinit(shape)))
                    .prop_map(|(once, body, wlinit)| StmtKind::Pipe(Pipe { once, body, wlinit })),
            ]
            .prop_map(Stmt::from)
        })
        .boxed()
}

fn type_tag() -> impl Strategy<Value = TypeTag> {
    prop::sample::select(vec![TypeTag::Int, TypeTag::Float, TypeTag::Bool, TypeTag::Array, TypeTag::Graph])
}

fn kernel(shape: Shape) -> impl Strategy<Value = Kernel> {
    let kind = prop_oneof![Just(KernelKind::Plain), Just(KernelKind::Host), Just(KernelKind::Device)];
    let bounds = prop::option::of((1u32..=1024, prop::option::of(1u32..8)))
        .prop_map(|b| b.map(|(max_threads, min_blocks)| LaunchBounds { max_threads, min_blocks }));
    let annotations = prop::collection::btree_map(
        prop::sample::select(vec!["fixed_block_size".to_string(), "nested_parallelism".to_string()]),
        (1u32..1024).prop_map(|n| n.to_string()),
        0..2,
    );
    (
        ident(),
        kind,
        prop::collection::vec((ident(), type_tag()).prop_map(|(n, t)| Param::new(n, t)), 0..3),
        prop::collection::vec(stmt(shape), 0..4),
        bounds,
        annotations,
    )
        .prop_map(|(name, kind, params, body, launch_bounds, annotations)| Kernel {
            name,
            kind,
            params,
            body,
            launch_bounds,
            annotations,
            span: None,
        })
}

fn module(shape: Shape) -> impl Strategy<Value = Module> {
    let decl = (ident(), type_tag(), prop::option::of(expr(shape)))
        .prop_map(|(name, ty, init)| GlobalDecl { name, ty, init });
    (ident(), prop::collection::vec(decl, 0..3), prop::collection::vec(kernel(shape), 0..3)).prop_map(
        |(name, decls, kernels)| {
            let mut m = Module::new(name);
            m.decls = decls;
            // Kernel names must be unique.
            let mut seen = std::collections::BTreeSet::new();
            m.kernels = kernels.into_iter().filter(|k| seen.insert(k.name.clone())).collect();
            m
        },
    )
}

fn constraint() -> impl Strategy<Value = BlockConstraint> {
    prop_oneof![
        Just(BlockConstraint::Elastic),
        (1u32..=1024).prop_map(BlockConstraint::Shrinkable),
        (1u32..=1024).prop_map(BlockConstraint::Fixed),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn serialization_round_trips(m in module(Shape { surface: false })) {
        let text = serialize(&m);
        let back = parse_serialized(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(serialize(&back), text);
    }

    #[test]
    fn surface_syntax_round_trips(m in module(Shape { surface: true })) {
        let text = pretty_print(&m);
        let back = parse_source(&text, "gen.irgl").map_err(|e| TestCaseError::fail(format!("{e:?}\n{text}")))?;
        prop_assert_eq!(&back, &m, "{}", text);
    }

    #[test]
    fn t_control_is_the_largest_common_size(cs in prop::collection::vec(constraint(), 1..5)) {
        let brute = (1..=1024u32).rev().find(|&s| cs.iter().all(|c| c.admits(s)));
        prop_assert_eq!(t_control(&cs).ok(), brute);
    }
}
