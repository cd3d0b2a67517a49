//! Static analysis of a target cell: which names, attribute chains, and call
//! targets does the cell read from the kernel namespace?
//!
//! A name counts only when the cell may read it from pre-existing kernel
//! state: store-only names are excluded, read-before-write and augmented
//! assignments are included, and names bound by an import in the cell are
//! kept (the kernel may already hold the shadowed object). Free names inside
//! functions or lambdas defined in the cell are treated as reads at the
//! definition site, since the call may occur within the cell.

use std::collections::{BTreeSet, HashMap, HashSet};

use rustpython_parser::ast::{self, Expr, Stmt};
use rustpython_parser::{parse, Mode};

use crate::error::AnalysisError;

/// Host-language builtins excluded from symbol sets, shipped as a data file.
pub const PYTHON_BUILTINS: &str = include_str!("../data/python_builtins.txt");

/// The symbols a cell references from its enclosing kernel namespace.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SymbolSet {
    /// Plain identifiers read by the cell.
    pub names: BTreeSet<String>,
    /// Dotted attribute paths rooted at a read name (`df.col`, `df.col.mean`).
    pub attribute_chains: BTreeSet<String>,
    /// Called paths, each a name or an attribute chain.
    pub call_targets: BTreeSet<String>,
}

impl SymbolSet {
    pub fn is_empty(&self) -> bool {
        self.names.is_empty() && self.attribute_chains.is_empty() && self.call_targets.is_empty()
    }
}

fn builtin_names() -> &'static HashSet<String> {
    use std::sync::OnceLock;
    static NAMES: OnceLock<HashSet<String>> = OnceLock::new();
    NAMES.get_or_init(|| {
        PYTHON_BUILTINS
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_string)
            .collect()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BindKind {
    Assign,
    Import,
}

/// Loads, chains, and calls escaping one nested scope, in source order.
#[derive(Debug, Default)]
struct FreeSet {
    loads: Vec<String>,
    chains: Vec<String>,
    calls: Vec<String>,
}

/// Extract the symbols a cell reads from the kernel namespace.
pub fn referenced_symbols(source: &str) -> Result<SymbolSet, AnalysisError> {
    let module = parse(source, Mode::Module, "<cell>").map_err(|e| {
        let offset = usize::from(e.offset);
        let (line, column) = offset_to_line_col(source, offset);
        AnalysisError::Syntax {
            line,
            column,
            message: e.error.to_string(),
        }
    })?;
    let body = match &module {
        ast::Mod::Module(m) => &m.body,
        _ => unreachable!("Mode::Module always yields Mod::Module"),
    };

    let mut walker = ModuleWalker::default();
    for stmt in body {
        walker.visit_stmt(stmt);
    }
    Ok(walker.into_symbols())
}

fn offset_to_line_col(source: &str, offset: usize) -> (usize, usize) {
    let mut line = 1;
    let mut col = 1;
    for (i, ch) in source.char_indices() {
        if i >= offset {
            break;
        }
        if ch == '\n' {
            line += 1;
            col = 1;
        } else {
            col += 1;
        }
    }
    (line, col)
}

/// Sequential walker over module-level statements.
///
/// Tracks names bound so far so that a later read resolves to the cell, not
/// the kernel. Import bindings are remembered separately: reads of imported
/// names stay in the symbol set.
#[derive(Default)]
struct ModuleWalker {
    bound: HashMap<String, BindKind>,
    names: BTreeSet<String>,
    chains: BTreeSet<String>,
    calls: BTreeSet<String>,
}

impl ModuleWalker {
    fn into_symbols(self) -> SymbolSet {
        SymbolSet {
            names: self.names,
            attribute_chains: self.chains,
            call_targets: self.calls,
        }
    }

    /// Would a read of `name` here reach the kernel namespace?
    fn is_external(&self, name: &str) -> bool {
        if builtin_names().contains(name) {
            return false;
        }
        match self.bound.get(name) {
            None => true,
            Some(BindKind::Import) => true,
            Some(BindKind::Assign) => false,
        }
    }

    fn record_load(&mut self, name: &str) {
        if self.is_external(name) {
            self.names.insert(name.to_string());
        }
    }

    /// Record every dotted prefix of `path` (length >= 2) when the root reads
    /// from the kernel.
    fn record_chain(&mut self, path: &[String]) {
        debug_assert!(path.len() >= 2);
        if !self.is_external(&path[0]) {
            return;
        }
        self.names.insert(path[0].clone());
        for end in 2..=path.len() {
            self.chains.insert(path[..end].join("."));
        }
    }

    fn record_call(&mut self, path: &[String]) {
        if !self.is_external(&path[0]) {
            return;
        }
        if path.len() == 1 {
            self.names.insert(path[0].clone());
        } else {
            self.record_chain(path);
        }
        self.calls.insert(path.join("."));
    }

    fn bind(&mut self, name: &str, kind: BindKind) {
        // A later assignment overrides an earlier import bind.
        self.bound.insert(name.to_string(), kind);
    }

    fn replay_frees(&mut self, frees: FreeSet) {
        for name in frees.loads {
            self.record_load(&name);
        }
        for chain in frees.chains {
            let parts: Vec<String> = chain.split('.').map(str::to_string).collect();
            self.record_chain(&parts);
        }
        for call in frees.calls {
            let parts: Vec<String> = call.split('.').map(str::to_string).collect();
            self.record_call(&parts);
        }
    }

    fn visit_stmt(&mut self, stmt: &Stmt) {
        match stmt {
            Stmt::Expr(s) => self.visit_expr(&s.value),
            Stmt::Assign(s) => {
                self.visit_expr(&s.value);
                for target in &s.targets {
                    self.bind_target(target);
                }
            }
            Stmt::AugAssign(s) => {
                self.visit_expr(&s.value);
                // The target is read before it is written.
                self.visit_expr_as_load(&s.target);
                self.bind_target(&s.target);
            }
            Stmt::AnnAssign(s) => {
                self.visit_expr(&s.annotation);
                if let Some(value) = &s.value {
                    self.visit_expr(value);
                    self.bind_target(&s.target);
                }
            }
            Stmt::Return(s) => {
                if let Some(v) = &s.value {
                    self.visit_expr(v);
                }
            }
            Stmt::Delete(s) => {
                // `del x` requires the name to exist before the cell runs.
                for target in &s.targets {
                    self.visit_expr_as_load(target);
                }
            }
            Stmt::For(s) => {
                self.visit_expr(&s.iter);
                self.bind_target(&s.target);
                for st in &s.body {
                    self.visit_stmt(st);
                }
                for st in &s.orelse {
                    self.visit_stmt(st);
                }
            }
            Stmt::AsyncFor(s) => {
                self.visit_expr(&s.iter);
                self.bind_target(&s.target);
                for st in &s.body {
                    self.visit_stmt(st);
                }
                for st in &s.orelse {
                    self.visit_stmt(st);
                }
            }
            Stmt::While(s) => {
                self.visit_expr(&s.test);
                for st in &s.body {
                    self.visit_stmt(st);
                }
                for st in &s.orelse {
                    self.visit_stmt(st);
                }
            }
            Stmt::If(s) => {
                self.visit_expr(&s.test);
                for st in &s.body {
                    self.visit_stmt(st);
                }
                for st in &s.orelse {
                    self.visit_stmt(st);
                }
            }
            Stmt::With(s) => {
                for item in &s.items {
                    self.visit_expr(&item.context_expr);
                    if let Some(vars) = &item.optional_vars {
                        self.bind_target(vars);
                    }
                }
                for st in &s.body {
                    self.visit_stmt(st);
                }
            }
            Stmt::AsyncWith(s) => {
                for item in &s.items {
                    self.visit_expr(&item.context_expr);
                    if let Some(vars) = &item.optional_vars {
                        self.bind_target(vars);
                    }
                }
                for st in &s.body {
                    self.visit_stmt(st);
                }
            }
            Stmt::Raise(s) => {
                if let Some(e) = &s.exc {
                    self.visit_expr(e);
                }
                if let Some(c) = &s.cause {
                    self.visit_expr(c);
                }
            }
            Stmt::Try(s) => {
                for st in &s.body {
                    self.visit_stmt(st);
                }
                for handler in &s.handlers {
                    let ast::ExceptHandler::ExceptHandler(h) = handler;
                    if let Some(t) = &h.type_ {
                        self.visit_expr(t);
                    }
                    if let Some(name) = &h.name {
                        self.bind(name.as_str(), BindKind::Assign);
                    }
                    for st in &h.body {
                        self.visit_stmt(st);
                    }
                }
                for st in &s.orelse {
                    self.visit_stmt(st);
                }
                for st in &s.finalbody {
                    self.visit_stmt(st);
                }
            }
            Stmt::TryStar(s) => {
                for st in &s.body {
                    self.visit_stmt(st);
                }
                for handler in &s.handlers {
                    let ast::ExceptHandler::ExceptHandler(h) = handler;
                    if let Some(t) = &h.type_ {
                        self.visit_expr(t);
                    }
                    if let Some(name) = &h.name {
                        self.bind(name.as_str(), BindKind::Assign);
                    }
                    for st in &h.body {
                        self.visit_stmt(st);
                    }
                }
                for st in &s.orelse {
                    self.visit_stmt(st);
                }
                for st in &s.finalbody {
                    self.visit_stmt(st);
                }
            }
            Stmt::Assert(s) => {
                self.visit_expr(&s.test);
                if let Some(m) = &s.msg {
                    self.visit_expr(m);
                }
            }
            Stmt::Import(s) => {
                for alias in &s.names {
                    let bound = match &alias.asname {
                        Some(as_name) => as_name.to_string(),
                        // `import a.b` binds the root package name.
                        None => alias
                            .name
                            .split('.')
                            .next()
                            .unwrap_or_default()
                            .to_string(),
                    };
                    self.bind(&bound, BindKind::Import);
                }
            }
            Stmt::ImportFrom(s) => {
                for alias in &s.names {
                    let bound = alias
                        .asname
                        .as_ref()
                        .map(|a| a.to_string())
                        .unwrap_or_else(|| alias.name.to_string());
                    if bound != "*" {
                        self.bind(&bound, BindKind::Import);
                    }
                }
            }
            Stmt::FunctionDef(s) => {
                for dec in &s.decorator_list {
                    self.visit_expr(dec);
                }
                self.visit_arg_defaults_and_annotations(&s.args);
                if let Some(r) = &s.returns {
                    self.visit_expr(r);
                }
                let frees = scope_frees(Some(&s.args), &s.body);
                self.replay_frees(frees);
                self.bind(s.name.as_str(), BindKind::Assign);
            }
            Stmt::AsyncFunctionDef(s) => {
                for dec in &s.decorator_list {
                    self.visit_expr(dec);
                }
                self.visit_arg_defaults_and_annotations(&s.args);
                if let Some(r) = &s.returns {
                    self.visit_expr(r);
                }
                let frees = scope_frees(Some(&s.args), &s.body);
                self.replay_frees(frees);
                self.bind(s.name.as_str(), BindKind::Assign);
            }
            Stmt::ClassDef(s) => {
                for dec in &s.decorator_list {
                    self.visit_expr(dec);
                }
                for base in &s.bases {
                    self.visit_expr(base);
                }
                for kw in &s.keywords {
                    self.visit_expr(&kw.value);
                }
                let frees = scope_frees(None, &s.body);
                self.replay_frees(frees);
                self.bind(s.name.as_str(), BindKind::Assign);
            }
            Stmt::Match(s) => {
                self.visit_expr(&s.subject);
                for case in &s.cases {
                    self.visit_pattern(&case.pattern);
                    if let Some(g) = &case.guard {
                        self.visit_expr(g);
                    }
                    for st in &case.body {
                        self.visit_stmt(st);
                    }
                }
            }
            Stmt::Global(_) | Stmt::Nonlocal(_) => {}
            Stmt::Pass(_) | Stmt::Break(_) | Stmt::Continue(_) => {}
            Stmt::TypeAlias(s) => self.visit_expr(&s.value),
        }
    }

    fn visit_pattern(&mut self, pattern: &ast::Pattern) {
        match pattern {
            ast::Pattern::MatchValue(p) => self.visit_expr(&p.value),
            ast::Pattern::MatchSingleton(_) => {}
            ast::Pattern::MatchSequence(p) => {
                for sub in &p.patterns {
                    self.visit_pattern(sub);
                }
            }
            ast::Pattern::MatchMapping(p) => {
                for k in &p.keys {
                    self.visit_expr(k);
                }
                for sub in &p.patterns {
                    self.visit_pattern(sub);
                }
                if let Some(rest) = &p.rest {
                    self.bind(rest.as_str(), BindKind::Assign);
                }
            }
            ast::Pattern::MatchClass(p) => {
                self.visit_expr(&p.cls);
                for sub in &p.patterns {
                    self.visit_pattern(sub);
                }
                for sub in &p.kwd_patterns {
                    self.visit_pattern(sub);
                }
            }
            ast::Pattern::MatchStar(p) => {
                if let Some(name) = &p.name {
                    self.bind(name.as_str(), BindKind::Assign);
                }
            }
            ast::Pattern::MatchAs(p) => {
                if let Some(sub) = &p.pattern {
                    self.visit_pattern(sub);
                }
                if let Some(name) = &p.name {
                    self.bind(name.as_str(), BindKind::Assign);
                }
            }
            ast::Pattern::MatchOr(p) => {
                for sub in &p.patterns {
                    self.visit_pattern(sub);
                }
            }
        }
    }

    fn visit_arg_defaults_and_annotations(&mut self, args: &ast::Arguments) {
        for a in args.posonlyargs.iter().chain(&args.args).chain(&args.kwonlyargs) {
            if let Some(d) = &a.default {
                self.visit_expr(d);
            }
            if let Some(ann) = &a.def.annotation {
                self.visit_expr(ann);
            }
        }
        if let Some(v) = &args.vararg {
            if let Some(ann) = &v.annotation {
                self.visit_expr(ann);
            }
        }
        if let Some(k) = &args.kwarg {
            if let Some(ann) = &k.annotation {
                self.visit_expr(ann);
            }
        }
    }

    /// Binding occurrence: `x = ...`, `for x in ...`, `with ... as x`.
    fn bind_target(&mut self, target: &Expr) {
        match target {
            Expr::Name(n) => self.bind(n.id.as_str(), BindKind::Assign),
            Expr::Tuple(t) => {
                for e in &t.elts {
                    self.bind_target(e);
                }
            }
            Expr::List(l) => {
                for e in &l.elts {
                    self.bind_target(e);
                }
            }
            Expr::Starred(s) => self.bind_target(&s.value),
            // `obj.attr = v` and `seq[i] = v` read their bases.
            Expr::Attribute(a) => self.visit_expr(&a.value),
            Expr::Subscript(s) => {
                self.visit_expr(&s.value);
                self.visit_expr(&s.slice);
            }
            other => self.visit_expr(other),
        }
    }

    /// Visit an expression that is conceptually read even if its AST context
    /// is Store or Del (augmented-assignment targets, `del` targets).
    fn visit_expr_as_load(&mut self, expr: &Expr) {
        match expr {
            Expr::Name(n) => self.record_load(n.id.as_str()),
            other => self.visit_expr(other),
        }
    }

    /// Try to read `expr` as a pure dotted path (`a.b.c`); used for chains.
    fn dotted_path(expr: &Expr) -> Option<Vec<String>> {
        match expr {
            Expr::Name(n) => Some(vec![n.id.to_string()]),
            Expr::Attribute(a) => {
                let mut base = Self::dotted_path(&a.value)?;
                base.push(a.attr.to_string());
                Some(base)
            }
            _ => None,
        }
    }

    fn visit_expr(&mut self, expr: &Expr) {
        match expr {
            Expr::Name(n) => {
                if matches!(n.ctx, ast::ExprContext::Load | ast::ExprContext::Del) {
                    self.record_load(n.id.as_str());
                }
            }
            Expr::Attribute(a) => {
                if let Some(path) = Self::dotted_path(expr) {
                    if matches!(a.ctx, ast::ExprContext::Load) {
                        self.record_chain(&path);
                        return;
                    }
                }
                // Not a pure chain (or a store): the base is still read.
                self.visit_expr(&a.value);
            }
            Expr::Call(c) => {
                if let Some(path) = Self::dotted_path(&c.func) {
                    self.record_call(&path);
                } else {
                    self.visit_expr(&c.func);
                }
                for a in &c.args {
                    self.visit_expr(a);
                }
                for k in &c.keywords {
                    self.visit_expr(&k.value);
                }
            }
            Expr::Subscript(s) => {
                self.visit_expr(&s.value);
                self.visit_expr(&s.slice);
            }
            Expr::BoolOp(e) => {
                for v in &e.values {
                    self.visit_expr(v);
                }
            }
            Expr::NamedExpr(e) => {
                self.visit_expr(&e.value);
                self.bind_target(&e.target);
            }
            Expr::BinOp(e) => {
                self.visit_expr(&e.left);
                self.visit_expr(&e.right);
            }
            Expr::UnaryOp(e) => self.visit_expr(&e.operand),
            Expr::Lambda(e) => {
                self.visit_arg_defaults_and_annotations(&e.args);
                let body = [Stmt::Expr(ast::StmtExpr {
                    range: Default::default(),
                    value: e.body.clone(),
                })];
                let frees = scope_frees(Some(&e.args), &body);
                self.replay_frees(frees);
            }
            Expr::IfExp(e) => {
                self.visit_expr(&e.test);
                self.visit_expr(&e.body);
                self.visit_expr(&e.orelse);
            }
            Expr::Dict(e) => {
                for k in e.keys.iter().flatten() {
                    self.visit_expr(k);
                }
                for v in &e.values {
                    self.visit_expr(v);
                }
            }
            Expr::Set(e) => {
                for v in &e.elts {
                    self.visit_expr(v);
                }
            }
            Expr::ListComp(e) => self.visit_comprehension(std::slice::from_ref(&e.elt), None, &e.generators),
            Expr::SetComp(e) => self.visit_comprehension(std::slice::from_ref(&e.elt), None, &e.generators),
            Expr::GeneratorExp(e) => {
                self.visit_comprehension(std::slice::from_ref(&e.elt), None, &e.generators)
            }
            Expr::DictComp(e) => {
                self.visit_comprehension(std::slice::from_ref(&e.key), Some(&e.value), &e.generators)
            }
            Expr::Await(e) => self.visit_expr(&e.value),
            Expr::Yield(e) => {
                if let Some(v) = &e.value {
                    self.visit_expr(v);
                }
            }
            Expr::YieldFrom(e) => self.visit_expr(&e.value),
            Expr::Compare(e) => {
                self.visit_expr(&e.left);
                for c in &e.comparators {
                    self.visit_expr(c);
                }
            }
            Expr::FormattedValue(e) => {
                self.visit_expr(&e.value);
                if let Some(spec) = &e.format_spec {
                    self.visit_expr(spec);
                }
            }
            Expr::JoinedStr(e) => {
                for v in &e.values {
                    self.visit_expr(v);
                }
            }
            Expr::Constant(_) => {}
            Expr::Starred(e) => self.visit_expr(&e.value),
            Expr::List(e) => {
                for v in &e.elts {
                    self.visit_expr(v);
                }
            }
            Expr::Tuple(e) => {
                for v in &e.elts {
                    self.visit_expr(v);
                }
            }
            Expr::Slice(e) => {
                for part in [&e.lower, &e.upper, &e.step].into_iter().flatten() {
                    self.visit_expr(part);
                }
            }
        }
    }

    /// Comprehensions get their own scope: targets are local, the rest reads
    /// through to the enclosing scope.
    fn visit_comprehension(
        &mut self,
        elts: &[Expr],
        value: Option<&Expr>,
        generators: &[ast::Comprehension],
    ) {
        let mut stmts: Vec<Stmt> = Vec::new();
        let mk = |e: &Expr| {
            Stmt::Expr(ast::StmtExpr {
                range: Default::default(),
                value: Box::new(e.clone()),
            })
        };
        for e in elts {
            stmts.push(mk(e));
        }
        if let Some(v) = value {
            stmts.push(mk(v));
        }
        let mut locals = ScopeLocals::default();
        for gen in generators {
            locals.collect_target(&gen.target);
        }
        let mut collector = FreeCollector::new(locals);
        for gen in generators {
            collector.visit_expr(&gen.iter);
            for cond in &gen.ifs {
                collector.visit_expr(cond);
            }
        }
        for st in &stmts {
            collector.visit_stmt(st);
        }
        self.replay_frees(collector.frees);
    }
}

/// Names bound anywhere within one function or comprehension scope.
#[derive(Default)]
struct ScopeLocals {
    names: HashSet<String>,
    escaping: HashSet<String>,
}

impl ScopeLocals {
    fn add(&mut self, name: &str) {
        if !self.escaping.contains(name) {
            self.names.insert(name.to_string());
        }
    }

    fn collect_target(&mut self, target: &Expr) {
        match target {
            Expr::Name(n) => self.add(n.id.as_str()),
            Expr::Tuple(t) => {
                for e in &t.elts {
                    self.collect_target(e);
                }
            }
            Expr::List(l) => {
                for e in &l.elts {
                    self.collect_target(e);
                }
            }
            Expr::Starred(s) => self.collect_target(&s.value),
            _ => {}
        }
    }

    fn collect_args(&mut self, args: &ast::Arguments) {
        for a in args.posonlyargs.iter().chain(&args.args).chain(&args.kwonlyargs) {
            self.add(a.def.arg.as_str());
        }
        if let Some(v) = &args.vararg {
            self.add(v.arg.as_str());
        }
        if let Some(k) = &args.kwarg {
            self.add(k.arg.as_str());
        }
    }

    /// Python binds a name locally when it is assigned anywhere in the scope,
    /// unless a global/nonlocal declaration redirects it outward.
    fn collect_stmt(&mut self, stmt: &Stmt) {
        match stmt {
            Stmt::Assign(s) => {
                for t in &s.targets {
                    self.collect_target(t);
                }
            }
            Stmt::AugAssign(s) => self.collect_target(&s.target),
            Stmt::AnnAssign(s) => self.collect_target(&s.target),
            Stmt::For(s) => {
                self.collect_target(&s.target);
                for st in s.body.iter().chain(&s.orelse) {
                    self.collect_stmt(st);
                }
            }
            Stmt::AsyncFor(s) => {
                self.collect_target(&s.target);
                for st in s.body.iter().chain(&s.orelse) {
                    self.collect_stmt(st);
                }
            }
            Stmt::While(s) => {
                for st in s.body.iter().chain(&s.orelse) {
                    self.collect_stmt(st);
                }
            }
            Stmt::If(s) => {
                for st in s.body.iter().chain(&s.orelse) {
                    self.collect_stmt(st);
                }
            }
            Stmt::With(s) => {
                for item in &s.items {
                    if let Some(vars) = &item.optional_vars {
                        self.collect_target(vars);
                    }
                }
                for st in &s.body {
                    self.collect_stmt(st);
                }
            }
            Stmt::AsyncWith(s) => {
                for item in &s.items {
                    if let Some(vars) = &item.optional_vars {
                        self.collect_target(vars);
                    }
                }
                for st in &s.body {
                    self.collect_stmt(st);
                }
            }
            Stmt::Try(s) => {
                for st in s.body.iter().chain(&s.orelse).chain(&s.finalbody) {
                    self.collect_stmt(st);
                }
                for handler in &s.handlers {
                    let ast::ExceptHandler::ExceptHandler(h) = handler;
                    if let Some(name) = &h.name {
                        self.add(name.as_str());
                    }
                    for st in &h.body {
                        self.collect_stmt(st);
                    }
                }
            }
            Stmt::TryStar(s) => {
                for st in s.body.iter().chain(&s.orelse).chain(&s.finalbody) {
                    self.collect_stmt(st);
                }
                for handler in &s.handlers {
                    let ast::ExceptHandler::ExceptHandler(h) = handler;
                    if let Some(name) = &h.name {
                        self.add(name.as_str());
                    }
                    for st in &h.body {
                        self.collect_stmt(st);
                    }
                }
            }
            Stmt::Import(s) => {
                for alias in &s.names {
                    let bound = match &alias.asname {
                        Some(a) => a.to_string(),
                        None => alias
                            .name
                            .split('.')
                            .next()
                            .unwrap_or_default()
                            .to_string(),
                    };
                    self.add(&bound);
                }
            }
            Stmt::ImportFrom(s) => {
                for alias in &s.names {
                    let bound = alias
                        .asname
                        .as_ref()
                        .map(|a| a.to_string())
                        .unwrap_or_else(|| alias.name.to_string());
                    if bound != "*" {
                        self.add(&bound);
                    }
                }
            }
            Stmt::FunctionDef(s) => self.add(s.name.as_str()),
            Stmt::AsyncFunctionDef(s) => self.add(s.name.as_str()),
            Stmt::ClassDef(s) => self.add(s.name.as_str()),
            Stmt::Global(s) => {
                for name in &s.names {
                    self.escaping.insert(name.to_string());
                    self.names.remove(name.as_str());
                }
            }
            Stmt::Nonlocal(s) => {
                for name in &s.names {
                    self.escaping.insert(name.to_string());
                    self.names.remove(name.as_str());
                }
            }
            Stmt::Match(s) => {
                for case in &s.cases {
                    self.collect_pattern(&case.pattern);
                    for st in &case.body {
                        self.collect_stmt(st);
                    }
                }
            }
            _ => {}
        }
    }

    fn collect_pattern(&mut self, pattern: &ast::Pattern) {
        match pattern {
            ast::Pattern::MatchAs(p) => {
                if let Some(sub) = &p.pattern {
                    self.collect_pattern(sub);
                }
                if let Some(name) = &p.name {
                    self.add(name.as_str());
                }
            }
            ast::Pattern::MatchStar(p) => {
                if let Some(name) = &p.name {
                    self.add(name.as_str());
                }
            }
            ast::Pattern::MatchMapping(p) => {
                for sub in &p.patterns {
                    self.collect_pattern(sub);
                }
                if let Some(rest) = &p.rest {
                    self.add(rest.as_str());
                }
            }
            ast::Pattern::MatchSequence(p) => {
                for sub in &p.patterns {
                    self.collect_pattern(sub);
                }
            }
            ast::Pattern::MatchClass(p) => {
                for sub in p.patterns.iter().chain(&p.kwd_patterns) {
                    self.collect_pattern(sub);
                }
            }
            ast::Pattern::MatchOr(p) => {
                for sub in &p.patterns {
                    self.collect_pattern(sub);
                }
            }
            _ => {}
        }
    }
}

/// Free names of a nested scope: loads that are not bound locally.
fn scope_frees(args: Option<&ast::Arguments>, body: &[Stmt]) -> FreeSet {
    let mut locals = ScopeLocals::default();
    if let Some(args) = args {
        locals.collect_args(args);
    }
    for stmt in body {
        locals.collect_stmt(stmt);
    }
    let mut collector = FreeCollector::new(locals);
    for stmt in body {
        collector.visit_stmt(stmt);
    }
    collector.frees
}

/// Walks a nested scope and collects reads that escape it.
struct FreeCollector {
    locals: ScopeLocals,
    frees: FreeSet,
}

impl FreeCollector {
    fn new(locals: ScopeLocals) -> Self {
        Self {
            locals,
            frees: FreeSet::default(),
        }
    }

    fn is_free(&self, name: &str) -> bool {
        !self.locals.names.contains(name) && !builtin_names().contains(name)
    }

    fn record_load(&mut self, name: &str) {
        if self.is_free(name) {
            self.frees.loads.push(name.to_string());
        }
    }

    fn record_chain(&mut self, path: &[String]) {
        if self.is_free(&path[0]) {
            self.frees.chains.push(path.join("."));
        }
    }

    fn record_call(&mut self, path: &[String]) {
        if self.is_free(&path[0]) {
            if path.len() >= 2 {
                self.frees.chains.push(path.join("."));
            } else {
                self.frees.loads.push(path[0].clone());
            }
            self.frees.calls.push(path.join("."));
        }
    }

    fn absorb(&mut self, inner: FreeSet) {
        for name in inner.loads {
            self.record_load(&name);
        }
        for chain in inner.chains {
            let parts: Vec<String> = chain.split('.').map(str::to_string).collect();
            self.record_chain(&parts);
        }
        for call in inner.calls {
            let parts: Vec<String> = call.split('.').map(str::to_string).collect();
            if self.is_free(&parts[0]) {
                self.frees.calls.push(call);
            }
        }
    }

    fn visit_stmt(&mut self, stmt: &Stmt) {
        match stmt {
            Stmt::Expr(s) => self.visit_expr(&s.value),
            Stmt::Assign(s) => {
                self.visit_expr(&s.value);
                for t in &s.targets {
                    self.visit_store_target(t);
                }
            }
            Stmt::AugAssign(s) => {
                self.visit_expr(&s.value);
                if let Expr::Name(n) = s.target.as_ref() {
                    // Augmented assignment reads the target first; a local
                    // name stays local, anything else escapes.
                    self.record_load(n.id.as_str());
                } else {
                    self.visit_store_target(&s.target);
                }
            }
            Stmt::AnnAssign(s) => {
                self.visit_expr(&s.annotation);
                if let Some(v) = &s.value {
                    self.visit_expr(v);
                }
                self.visit_store_target(&s.target);
            }
            Stmt::Return(s) => {
                if let Some(v) = &s.value {
                    self.visit_expr(v);
                }
            }
            Stmt::Delete(s) => {
                for t in &s.targets {
                    if let Expr::Name(n) = t {
                        self.record_load(n.id.as_str());
                    } else {
                        self.visit_expr(t);
                    }
                }
            }
            Stmt::For(s) => {
                self.visit_expr(&s.iter);
                self.visit_store_target(&s.target);
                for st in s.body.iter().chain(&s.orelse) {
                    self.visit_stmt(st);
                }
            }
            Stmt::AsyncFor(s) => {
                self.visit_expr(&s.iter);
                self.visit_store_target(&s.target);
                for st in s.body.iter().chain(&s.orelse) {
                    self.visit_stmt(st);
                }
            }
            Stmt::While(s) => {
                self.visit_expr(&s.test);
                for st in s.body.iter().chain(&s.orelse) {
                    self.visit_stmt(st);
                }
            }
            Stmt::If(s) => {
                self.visit_expr(&s.test);
                for st in s.body.iter().chain(&s.orelse) {
                    self.visit_stmt(st);
                }
            }
            Stmt::With(s) => {
                for item in &s.items {
                    self.visit_expr(&item.context_expr);
                    if let Some(vars) = &item.optional_vars {
                        self.visit_store_target(vars);
                    }
                }
                for st in &s.body {
                    self.visit_stmt(st);
                }
            }
            Stmt::AsyncWith(s) => {
                for item in &s.items {
                    self.visit_expr(&item.context_expr);
                    if let Some(vars) = &item.optional_vars {
                        self.visit_store_target(vars);
                    }
                }
                for st in &s.body {
                    self.visit_stmt(st);
                }
            }
            Stmt::Raise(s) => {
                if let Some(e) = &s.exc {
                    self.visit_expr(e);
                }
                if let Some(c) = &s.cause {
                    self.visit_expr(c);
                }
            }
            Stmt::Try(s) => {
                for st in &s.body {
                    self.visit_stmt(st);
                }
                for handler in &s.handlers {
                    let ast::ExceptHandler::ExceptHandler(h) = handler;
                    if let Some(t) = &h.type_ {
                        self.visit_expr(t);
                    }
                    for st in &h.body {
                        self.visit_stmt(st);
                    }
                }
                for st in s.orelse.iter().chain(&s.finalbody) {
                    self.visit_stmt(st);
                }
            }
            Stmt::TryStar(s) => {
                for st in &s.body {
                    self.visit_stmt(st);
                }
                for handler in &s.handlers {
                    let ast::ExceptHandler::ExceptHandler(h) = handler;
                    if let Some(t) = &h.type_ {
                        self.visit_expr(t);
                    }
                    for st in &h.body {
                        self.visit_stmt(st);
                    }
                }
                for st in s.orelse.iter().chain(&s.finalbody) {
                    self.visit_stmt(st);
                }
            }
            Stmt::Assert(s) => {
                self.visit_expr(&s.test);
                if let Some(m) = &s.msg {
                    self.visit_expr(m);
                }
            }
            Stmt::FunctionDef(s) => {
                for dec in &s.decorator_list {
                    self.visit_expr(dec);
                }
                self.visit_defaults(&s.args);
                let inner = scope_frees(Some(&s.args), &s.body);
                self.absorb(inner);
            }
            Stmt::AsyncFunctionDef(s) => {
                for dec in &s.decorator_list {
                    self.visit_expr(dec);
                }
                self.visit_defaults(&s.args);
                let inner = scope_frees(Some(&s.args), &s.body);
                self.absorb(inner);
            }
            Stmt::ClassDef(s) => {
                for dec in &s.decorator_list {
                    self.visit_expr(dec);
                }
                for base in &s.bases {
                    self.visit_expr(base);
                }
                for kw in &s.keywords {
                    self.visit_expr(&kw.value);
                }
                let inner = scope_frees(None, &s.body);
                self.absorb(inner);
            }
            Stmt::Match(s) => {
                self.visit_expr(&s.subject);
                for case in &s.cases {
                    if let Some(g) = &case.guard {
                        self.visit_expr(g);
                    }
                    for st in &case.body {
                        self.visit_stmt(st);
                    }
                }
            }
            Stmt::Import(_) | Stmt::ImportFrom(_) => {}
            Stmt::Global(_) | Stmt::Nonlocal(_) => {}
            Stmt::Pass(_) | Stmt::Break(_) | Stmt::Continue(_) => {}
            Stmt::TypeAlias(s) => self.visit_expr(&s.value),
        }
    }

    fn visit_defaults(&mut self, args: &ast::Arguments) {
        for a in args.posonlyargs.iter().chain(&args.args).chain(&args.kwonlyargs) {
            if let Some(d) = &a.default {
                self.visit_expr(d);
            }
        }
    }

    fn visit_store_target(&mut self, target: &Expr) {
        match target {
            Expr::Name(_) => {}
            Expr::Tuple(t) => {
                for e in &t.elts {
                    self.visit_store_target(e);
                }
            }
            Expr::List(l) => {
                for e in &l.elts {
                    self.visit_store_target(e);
                }
            }
            Expr::Starred(s) => self.visit_store_target(&s.value),
            Expr::Attribute(a) => self.visit_expr(&a.value),
            Expr::Subscript(s) => {
                self.visit_expr(&s.value);
                self.visit_expr(&s.slice);
            }
            other => self.visit_expr(other),
        }
    }

    fn visit_expr(&mut self, expr: &Expr) {
        match expr {
            Expr::Name(n) => {
                if matches!(n.ctx, ast::ExprContext::Load | ast::ExprContext::Del) {
                    self.record_load(n.id.as_str());
                }
            }
            Expr::Attribute(a) => {
                if let Some(path) = ModuleWalker::dotted_path(expr) {
                    if matches!(a.ctx, ast::ExprContext::Load) {
                        if self.is_free(&path[0]) {
                            self.frees.loads.push(path[0].clone());
                            self.record_chain(&path);
                        }
                        return;
                    }
                }
                self.visit_expr(&a.value);
            }
            Expr::Call(c) => {
                if let Some(path) = ModuleWalker::dotted_path(&c.func) {
                    if self.is_free(&path[0]) && path.len() >= 2 {
                        self.frees.loads.push(path[0].clone());
                    }
                    self.record_call(&path);
                } else {
                    self.visit_expr(&c.func);
                }
                for a in &c.args {
                    self.visit_expr(a);
                }
                for k in &c.keywords {
                    self.visit_expr(&k.value);
                }
            }
            Expr::Lambda(e) => {
                self.visit_defaults(&e.args);
                let body = [Stmt::Expr(ast::StmtExpr {
                    range: Default::default(),
                    value: e.body.clone(),
                })];
                let inner = scope_frees(Some(&e.args), &body);
                self.absorb(inner);
            }
            Expr::NamedExpr(e) => {
                self.visit_expr(&e.value);
                if let Expr::Name(n) = e.target.as_ref() {
                    self.locals.add(n.id.as_str());
                }
            }
            Expr::BoolOp(e) => {
                for v in &e.values {
                    self.visit_expr(v);
                }
            }
            Expr::BinOp(e) => {
                self.visit_expr(&e.left);
                self.visit_expr(&e.right);
            }
            Expr::UnaryOp(e) => self.visit_expr(&e.operand),
            Expr::IfExp(e) => {
                self.visit_expr(&e.test);
                self.visit_expr(&e.body);
                self.visit_expr(&e.orelse);
            }
            Expr::Dict(e) => {
                for k in e.keys.iter().flatten() {
                    self.visit_expr(k);
                }
                for v in &e.values {
                    self.visit_expr(v);
                }
            }
            Expr::Set(e) => {
                for v in &e.elts {
                    self.visit_expr(v);
                }
            }
            Expr::ListComp(e) => self.visit_inner_comp(std::slice::from_ref(&e.elt), None, &e.generators),
            Expr::SetComp(e) => self.visit_inner_comp(std::slice::from_ref(&e.elt), None, &e.generators),
            Expr::GeneratorExp(e) => {
                self.visit_inner_comp(std::slice::from_ref(&e.elt), None, &e.generators)
            }
            Expr::DictComp(e) => {
                self.visit_inner_comp(std::slice::from_ref(&e.key), Some(&e.value), &e.generators)
            }
            Expr::Await(e) => self.visit_expr(&e.value),
            Expr::Yield(e) => {
                if let Some(v) = &e.value {
                    self.visit_expr(v);
                }
            }
            Expr::YieldFrom(e) => self.visit_expr(&e.value),
            Expr::Compare(e) => {
                self.visit_expr(&e.left);
                for c in &e.comparators {
                    self.visit_expr(c);
                }
            }
            Expr::FormattedValue(e) => {
                self.visit_expr(&e.value);
                if let Some(spec) = &e.format_spec {
                    self.visit_expr(spec);
                }
            }
            Expr::JoinedStr(e) => {
                for v in &e.values {
                    self.visit_expr(v);
                }
            }
            Expr::Constant(_) => {}
            Expr::Starred(e) => self.visit_expr(&e.value),
            Expr::List(e) => {
                for v in &e.elts {
                    self.visit_expr(v);
                }
            }
            Expr::Tuple(e) => {
                for v in &e.elts {
                    self.visit_expr(v);
                }
            }
            Expr::Subscript(s) => {
                self.visit_expr(&s.value);
                self.visit_expr(&s.slice);
            }
            Expr::Slice(e) => {
                for part in [&e.lower, &e.upper, &e.step].into_iter().flatten() {
                    self.visit_expr(part);
                }
            }
        }
    }

    fn visit_inner_comp(
        &mut self,
        elts: &[Expr],
        value: Option<&Expr>,
        generators: &[ast::Comprehension],
    ) {
        let mut locals = ScopeLocals::default();
        for gen in generators {
            locals.collect_target(&gen.target);
        }
        let mut inner = FreeCollector::new(locals);
        for gen in generators {
            inner.visit_expr(&gen.iter);
            for cond in &gen.ifs {
                inner.visit_expr(cond);
            }
        }
        let mk = |e: &Expr| {
            Stmt::Expr(ast::StmtExpr {
                range: Default::default(),
                value: Box::new(e.clone()),
            })
        };
        for e in elts {
            let st = mk(e);
            inner.visit_stmt(&st);
        }
        if let Some(v) = value {
            let st = mk(v);
            inner.visit_stmt(&st);
        }
        self.absorb(inner.frees);
    }
}
