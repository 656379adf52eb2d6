use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrimOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl PrimOp {
    pub fn from_symbol(s: &str) -> Option<Self> {
        Some(match s {
            "+" => PrimOp::Add,
            "-" => PrimOp::Sub,
            "*" => PrimOp::Mul,
            "/" => PrimOp::Div,
            _ => return None,
        })
    }

    pub fn symbol(self) -> &'static str {
        match self {
            PrimOp::Add => "+",
            PrimOp::Sub => "-",
            PrimOp::Mul => "*",
            PrimOp::Div => "/",
        }
    }

    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            PrimOp::Add => a + b,
            PrimOp::Sub => a - b,
            PrimOp::Mul => a * b,
            PrimOp::Div => a / b,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DistKind {
    Normal,
    Uniform,
    Bernoulli,
    Beta,
}

impl DistKind {
    pub fn from_symbol(s: &str) -> Option<Self> {
        Some(match s {
            "normal" => DistKind::Normal,
            "uniform" => DistKind::Uniform,
            "bernoulli" => DistKind::Bernoulli,
            "beta" => DistKind::Beta,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            DistKind::Normal => "normal",
            DistKind::Uniform => "uniform",
            DistKind::Bernoulli => "bernoulli",
            DistKind::Beta => "beta",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            DistKind::Bernoulli => 1,
            _ => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Ast {
    Number(f64),
    Var(String),
    /// Sequential bindings, then body forms evaluated in order; the value is the last.
    Let { bindings: Vec<(String, Ast)>, body: Vec<Ast> },
    Sample(Box<Ast>),
    Observe { dist: Box<Ast>, value: Box<Ast> },
    Fn { params: Vec<String>, body: Arc<Ast> },
    App { func: Box<Ast>, args: Vec<Ast> },
    Prim { op: PrimOp, args: Vec<Ast> },
    Dist { kind: DistKind, args: Vec<Ast> },
    Predict { label: String, value: Box<Ast> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Query {
    pub name: String,
    pub body: Ast,
}

impl Ast {
    fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Ast)) {
        f(self);
        match self {
            Ast::Number(_) | Ast::Var(_) => {}
            Ast::Let { bindings, body } => {
                bindings.iter().for_each(|(_, e)| e.walk(f));
                body.iter().for_each(|e| e.walk(f));
            }
            Ast::Sample(e) => e.walk(f),
            Ast::Observe { dist, value } => {
                dist.walk(f);
                value.walk(f);
            }
            Ast::Fn { body, .. } => body.walk(f),
            Ast::App { func, args } => {
                func.walk(f);
                args.iter().for_each(|e| e.walk(f));
            }
            Ast::Prim { args, .. } | Ast::Dist { args, .. } => args.iter().for_each(|e| e.walk(f)),
            Ast::Predict { value, .. } => value.walk(f),
        }
    }

    /// Counts of each node kind, keyed by form name.
    pub fn form_counts(&self) -> BTreeMap<&'static str, usize> {
        let mut counts = BTreeMap::new();
        self.walk(&mut |node| {
            let key = match node {
                Ast::Number(_) => "number",
                Ast::Var(_) => "var",
                Ast::Let { .. } => "let",
                Ast::Sample(_) => "sample",
                Ast::Observe { .. } => "observe",
                Ast::Fn { .. } => "fn",
                Ast::App { .. } => "app",
                Ast::Prim { .. } => "prim",
                Ast::Dist { .. } => "dist",
                Ast::Predict { .. } => "predict",
            };
            *counts.entry(key).or_insert(0) += 1;
        });
        counts
    }

    /// Variables referenced but not bound inside this expression.
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        collect_free(self, &mut Vec::new(), &mut out);
        out
    }
}

fn collect_free(e: &Ast, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
    match e {
        Ast::Number(_) => {}
        Ast::Var(v) => {
            if !bound.contains(v) {
                out.insert(v.clone());
            }
        }
        Ast::Let { bindings, body } => {
            let depth = bound.len();
            for (name, value) in bindings {
                collect_free(value, bound, out);
                bound.push(name.clone());
            }
            body.iter().for_each(|b| collect_free(b, bound, out));
            bound.truncate(depth);
        }
        Ast::Sample(inner) => collect_free(inner, bound, out),
        Ast::Observe { dist, value } => {
            collect_free(dist, bound, out);
            collect_free(value, bound, out);
        }
        Ast::Fn { params, body } => {
            let depth = bound.len();
            bound.extend(params.iter().cloned());
            collect_free(body, bound, out);
            bound.truncate(depth);
        }
        Ast::App { func, args } => {
            collect_free(func, bound, out);
            args.iter().for_each(|a| collect_free(a, bound, out));
        }
        Ast::Prim { args, .. } | Ast::Dist { args, .. } => args.iter().for_each(|a| collect_free(a, bound, out)),
        Ast::Predict { value, .. } => collect_free(value, bound, out),
    }
}

impl Query {
    /// Predict labels that occur more than once; the last write wins at run time.
    pub fn duplicate_labels(&self) -> Vec<String> {
        let mut seen = BTreeMap::<&str, usize>::new();
        self.body.walk(&mut |node| {
            if let Ast::Predict { label, .. } = node {
                *seen.entry(label.as_str()).or_insert(0) += 1;
            }
        });
        seen.into_iter().filter(|(_, n)| *n > 1).map(|(l, _)| l.to_string()).collect()
    }
}

fn fmt_number(x: f64) -> String {
    format!("{x:?}")
}

const INDENT: usize = 2;

fn write_ast(out: &mut String, e: &Ast, indent: usize) {
    let flat = flat(e);
    if flat.len() + indent <= 72 && !matches!(e, Ast::Let { .. }) {
        out.push_str(&flat);
        return;
    }
    match e {
        Ast::Let { bindings, body } => {
            out.push_str("(let [");
            for (i, (name, value)) in bindings.iter().enumerate() {
                if i > 0 {
                    out.push('\n');
                    out.push_str(&" ".repeat(indent + 6));
                }
                out.push_str(name);
                out.push(' ');
                write_ast(out, value, indent + 7 + name.len());
            }
            out.push(']');
            for b in body {
                out.push('\n');
                out.push_str(&" ".repeat(indent + INDENT));
                write_ast(out, b, indent + INDENT);
            }
            out.push(')');
        }
        Ast::Fn { params, body } => {
            out.push_str(&format!("(fn [{}]\n", params.join(" ")));
            out.push_str(&" ".repeat(indent + INDENT));
            write_ast(out, body, indent + INDENT);
            out.push(')');
        }
        Ast::Observe { dist, value } => {
            out.push_str("(observe ");
            write_ast(out, dist, indent + 9);
            out.push('\n');
            out.push_str(&" ".repeat(indent + 9));
            write_ast(out, value, indent + 9);
            out.push(')');
        }
        Ast::Predict { label, value } => {
            out.push_str(&format!("(predict :{label}\n"));
            out.push_str(&" ".repeat(indent + INDENT));
            write_ast(out, value, indent + INDENT);
            out.push(')');
        }
        _ => out.push_str(&flat),
    }
}

fn flat(e: &Ast) -> String {
    let join = |args: &[Ast]| args.iter().map(flat).collect::<Vec<_>>().join(" ");
    match e {
        Ast::Number(x) => fmt_number(*x),
        Ast::Var(v) => v.clone(),
        Ast::Let { bindings, body } => {
            let b: Vec<String> = bindings.iter().map(|(n, v)| format!("{n} {}", flat(v))).collect();
            format!("(let [{}] {})", b.join(" "), join(body))
        }
        Ast::Sample(d) => format!("(sample {})", flat(d)),
        Ast::Observe { dist, value } => format!("(observe {} {})", flat(dist), flat(value)),
        Ast::Fn { params, body } => format!("(fn [{}] {})", params.join(" "), flat(body)),
        Ast::App { func, args } if args.is_empty() => format!("({})", flat(func)),
        Ast::App { func, args } => format!("({} {})", flat(func), join(args)),
        Ast::Prim { op, args } => format!("({} {})", op.symbol(), join(args)),
        Ast::Dist { kind, args } => format!("({} {})", kind.name(), join(args)),
        Ast::Predict { label, value } => format!("(predict :{label} {})", flat(value)),
    }
}

impl fmt::Display for Ast {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        write_ast(&mut out, self, 0);
        f.write_str(&out)
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        write_ast(&mut out, &self.body, INDENT);
        write!(f, "(defquery {}\n  {})", self.name, out)
    }
}
