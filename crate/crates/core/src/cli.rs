//! Input format, printing and command dispatch for the `axdiff` binary.
//!
//! Problems are s-expressions with `;` line comments:
//!
//! ```text
//! (const a Array) (const i Index) (const e Elem)
//! (A (= a (wr b i e)))
//! (B (distinct (rd a j) (rd b j)))
//! (assert (= e e))
//! ```

use std::collections::BTreeMap;
use std::fmt;

use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::interpolate::{interpolate, reconstruct_all, InterpOptions, InterpResult};
use crate::oracle::{validate_interpolant, ValidateOptions, Validity};
use crate::satcheck::{decide_sat_report, Model, ModelView, SatOptions, SatResult};
use crate::terms::{Const, Formula, Literal, Sort, Term};

pub const EXIT_SAT: i32 = 10;
pub const EXIT_UNSAT: i32 = 20;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

/// A parse diagnostic, 1-based.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{line}:{col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Label {
    A,
    B,
    Unlabeled,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Problem {
    pub decls: Vec<Const>,
    pub assertions: Vec<(Label, Literal)>,
}

impl Problem {
    pub fn literals(&self) -> Vec<Literal> {
        self.assertions.iter().map(|(_, l)| l.clone()).collect()
    }

    pub fn part(&self, label: Label) -> Vec<Literal> {
        self.assertions
            .iter()
            .filter(|(k, _)| *k == label)
            .map(|(_, l)| l.clone())
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Pos {
    line: usize,
    col: usize,
}

#[derive(Clone, Debug)]
enum Sexp {
    Atom(String, Pos),
    List(Vec<Sexp>, Pos),
}

impl Sexp {
    fn pos(&self) -> Pos {
        match self {
            Sexp::Atom(_, p) | Sexp::List(_, p) => *p,
        }
    }
}

fn err<T>(p: Pos, msg: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError {
        line: p.line,
        col: p.col,
        msg: msg.into(),
    })
}

fn read_all(text: &str) -> Result<Vec<Sexp>, ParseError> {
    let mut stack: Vec<(Vec<Sexp>, Pos)> = vec![(vec![], Pos { line: 1, col: 1 })];
    let mut chars = text.chars().peekable();
    let (mut line, mut col) = (1, 1);
    let mut atom: Option<(String, Pos)> = None;
    while let Some(ch) = chars.next() {
        let here = Pos { line, col };
        if ch == '\n' {
            line += 1;
            col = 1;
        } else {
            col += 1;
        }
        let delim = ch.is_whitespace() || ch == '(' || ch == ')' || ch == ';';
        if delim {
            if let Some((s, p)) = atom.take() {
                stack.last_mut().expect("stack").0.push(Sexp::Atom(s, p));
            }
        }
        match ch {
            ';' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                    col += 1;
                }
            }
            '(' => stack.push((vec![], here)),
            ')' => {
                if stack.len() == 1 {
                    return err(here, "unbalanced ')'");
                }
                let (items, p) = stack.pop().expect("stack");
                stack.last_mut().expect("stack").0.push(Sexp::List(items, p));
            }
            c if c.is_whitespace() => {}
            c => match &mut atom {
                Some((s, _)) => s.push(c),
                None => atom = Some((c.to_string(), here)),
            },
        }
    }
    if let Some((s, p)) = atom.take() {
        stack.last_mut().expect("stack").0.push(Sexp::Atom(s, p));
    }
    if stack.len() > 1 {
        let p = stack.last().expect("stack").1;
        return err(p, "unclosed '('");
    }
    Ok(stack.pop().expect("stack").0)
}

struct Scope {
    consts: BTreeMap<String, Const>,
}

impl Scope {
    fn term(&self, s: &Sexp) -> Result<Term, ParseError> {
        match s {
            Sexp::Atom(name, p) => match self.consts.get(name) {
                Some(c) => Ok(Term::c(c)),
                None => err(*p, format!("unknown symbol `{name}`")),
            },
            Sexp::List(items, p) => {
                let Some(Sexp::Atom(head, hp)) = items.first() else {
                    return err(*p, "expected a function symbol");
                };
                let args = &items[1..];
                let want = match head.as_str() {
                    "wr" => [Sort::Array, Sort::Index, Sort::Elem].as_slice(),
                    "rd" => [Sort::Array, Sort::Index].as_slice(),
                    "diff" => [Sort::Array, Sort::Array].as_slice(),
                    _ => return err(*hp, format!("unknown function `{head}`")),
                };
                if args.len() != want.len() {
                    return err(*p, format!("`{head}` takes {} arguments, got {}", want.len(), args.len()));
                }
                let mut ts = Vec::new();
                for (a, s) in args.iter().zip(want) {
                    let t = self.term(a)?;
                    if t.sort() != *s {
                        return err(a.pos(), format!("expected {s}, got {}", t.sort()));
                    }
                    ts.push(t);
                }
                let mut it = ts.into_iter();
                let mut next = || it.next().expect("arity checked");
                Ok(match head.as_str() {
                    "wr" => Term::wr(next(), next(), next()),
                    "rd" => Term::rd(next(), next()),
                    _ => Term::diff(next(), next()),
                })
            }
        }
    }

    fn atom(&self, s: &Sexp) -> Result<Literal, ParseError> {
        let Sexp::List(items, p) = s else {
            return err(s.pos(), "expected `(= t u)` or `(distinct t u)`");
        };
        let Some(Sexp::Atom(head, hp)) = items.first() else {
            return err(*p, "expected `=` or `distinct`");
        };
        let pos = match head.as_str() {
            "=" => true,
            "distinct" => false,
            _ => return err(*hp, format!("unknown predicate `{head}`")),
        };
        if items.len() != 3 {
            return err(*p, format!("`{head}` takes 2 arguments, got {}", items.len() - 1));
        }
        let l = self.term(&items[1])?;
        let r = self.term(&items[2])?;
        if l.sort() != r.sort() {
            return err(items[2].pos(), format!("expected {}, got {}", l.sort(), r.sort()));
        }
        Ok(Literal::new(pos, l, r))
    }
}

/// Parses a problem.
pub fn parse(text: &str) -> Result<Problem, ParseError> {
    let mut scope = Scope { consts: BTreeMap::new() };
    let mut prob = Problem::default();
    for top in read_all(text)? {
        let Sexp::List(items, p) = &top else {
            return err(top.pos(), "expected a declaration or an assertion");
        };
        let Some(Sexp::Atom(head, hp)) = items.first() else {
            return err(*p, "expected a command");
        };
        match head.as_str() {
            "const" => {
                let [_, Sexp::Atom(name, np), Sexp::Atom(sort, sp)] = items.as_slice() else {
                    return err(*p, "expected `(const NAME SORT)`");
                };
                let sort = match sort.as_str() {
                    "Array" => Sort::Array,
                    "Index" => Sort::Index,
                    "Elem" => Sort::Elem,
                    _ => return err(*sp, format!("unknown sort `{sort}`")),
                };
                if matches!(name.as_str(), "wr" | "rd" | "diff" | "=" | "distinct") || name.starts_with("_k") {
                    return err(*np, format!("reserved name `{name}`"));
                }
                if scope.consts.contains_key(name) {
                    return err(*np, format!("`{name}` declared twice"));
                }
                let c = Const::new(name, sort);
                scope.consts.insert(name.clone(), c.clone());
                prob.decls.push(c);
            }
            "A" | "B" | "assert" => {
                if items.len() != 2 {
                    return err(*p, format!("`{head}` takes one atom"));
                }
                let label = match head.as_str() {
                    "A" => Label::A,
                    "B" => Label::B,
                    _ => Label::Unlabeled,
                };
                prob.assertions.push((label, scope.atom(&items[1])?));
            }
            _ => return err(*hp, format!("unknown command `{head}`")),
        }
    }
    Ok(prob)
}

/// A term as an s-expression.
pub fn print_term(t: &Term) -> String {
    match t {
        Term::Const(c) => c.name().to_string(),
        Term::Var => "x".into(),
        Term::Rd(a, i) => format!("(rd {} {})", print_term(a), print_term(i)),
        Term::Wr(a, i, e) => format!("(wr {} {} {})", print_term(a), print_term(i), print_term(e)),
        Term::Diff(a, b) => format!("(diff {} {})", print_term(a), print_term(b)),
    }
}

pub fn print_literal(l: &Literal) -> String {
    let op = if l.pos { "=" } else { "distinct" };
    format!("({op} {} {})", print_term(&l.lhs), print_term(&l.rhs))
}

/// A formula with `and`, `or`, `not`, `=`, `true` and `false`.
pub fn print_formula(f: &Formula) -> String {
    let list = |op: &str, fs: &[Formula]| {
        let parts: Vec<String> = fs.iter().map(print_formula).collect();
        format!("({op} {})", parts.join(" "))
    };
    match f {
        Formula::True => "true".into(),
        Formula::False => "false".into(),
        Formula::Atom(l) => {
            let eq = format!("(= {} {})", print_term(&l.lhs), print_term(&l.rhs));
            if l.pos {
                eq
            } else {
                format!("(not {eq})")
            }
        }
        Formula::Not(g) => format!("(not {})", print_formula(g)),
        Formula::And(fs) if fs.is_empty() => "true".into(),
        Formula::Or(fs) if fs.is_empty() => "false".into(),
        Formula::And(fs) => list("and", fs),
        Formula::Or(fs) => list("or", fs),
    }
}

/// The problem in the input format.
pub fn print_problem(p: &Problem) -> String {
    let mut out = String::new();
    for c in &p.decls {
        out.push_str(&format!("(const {} {})\n", c.name(), c.sort()));
    }
    for (label, l) in &p.assertions {
        let head = match label {
            Label::A => "A",
            Label::B => "B",
            Label::Unlabeled => "assert",
        };
        out.push_str(&format!("({head} {})\n", print_literal(l)));
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Check,
    Interp,
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub model: bool,
    pub trace: bool,
    pub validate: bool,
    pub seed: Option<u64>,
    pub max_branches: usize,
    pub simplify: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            model: false,
            trace: false,
            validate: false,
            seed: None,
            max_branches: InterpOptions::default().max_branches,
            simplify: true,
        }
    }
}

/// What a command printed and how it exits.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
    pub trace: Option<Json>,
}

impl Outcome {
    fn fail(code: i32, msg: impl fmt::Display) -> Self {
        Outcome {
            code,
            stderr: format!("error: {msg}\n"),
            ..Default::default()
        }
    }
}

fn model_block(m: &Model) -> String {
    let mut s = String::from("(model\n");
    for line in m.to_string().lines() {
        s.push_str("  ");
        s.push_str(line);
        s.push('\n');
    }
    s.push_str(")\n");
    s
}

/// Runs a command on a parsed problem.
pub fn run(cmd: Command, prob: &Problem, opts: &RunOptions) -> Outcome {
    match cmd {
        Command::Check => run_check(prob, opts),
        Command::Interp => run_interp(prob, opts),
    }
}

fn run_check(prob: &Problem, opts: &RunOptions) -> Outcome {
    let lits = prob.literals();
    let sopts = SatOptions {
        seed: opts.seed,
        keep_trace: opts.trace,
    };
    let report = match decide_sat_report(&lits, &sopts) {
        Ok(r) => r,
        Err(e) => return Outcome::fail(EXIT_INTERNAL, e),
    };
    let trace = opts.trace.then(|| json!(report.branches));
    match report.result {
        SatResult::Sat(m) => {
            let mut stdout = String::from("sat\n");
            if opts.model {
                stdout.push_str(&model_block(&m));
            }
            Outcome {
                code: EXIT_SAT,
                stdout,
                trace,
                ..Default::default()
            }
        }
        SatResult::Unsat => Outcome {
            code: EXIT_UNSAT,
            stdout: "unsat\n".into(),
            trace,
            ..Default::default()
        },
    }
}

fn run_interp(prob: &Problem, opts: &RunOptions) -> Outcome {
    if prob.assertions.iter().any(|(l, _)| *l == Label::Unlabeled) {
        return Outcome::fail(EXIT_USAGE, "interp needs every assertion labelled A or B");
    }
    let a = prob.part(Label::A);
    let b = prob.part(Label::B);
    let iopts = InterpOptions {
        seed: opts.seed,
        max_branches: opts.max_branches,
        simplify: opts.simplify,
        prune: true,
    };
    let res = match interpolate(&a, &b, &iopts) {
        Ok(r) => r,
        Err(e) => return Outcome::fail(EXIT_INTERNAL, e),
    };
    match res {
        InterpResult::Sat(m) => {
            let mut stdout = String::from("sat\n");
            if opts.model {
                stdout.push_str(&model_block(&m));
            }
            Outcome {
                code: EXIT_SAT,
                stdout,
                ..Default::default()
            }
        }
        InterpResult::Unsat {
            interpolant, raw, tree, ..
        } => {
            if opts.validate {
                let mut forms = vec![&raw];
                if interpolant != raw {
                    forms.push(&interpolant);
                }
                for f in forms {
                    match validate_interpolant(&a, &b, f, ValidateOptions::default()) {
                        Ok(Validity::Valid) => {}
                        Ok(Validity::Invalid(why)) => {
                            return Outcome::fail(EXIT_INTERNAL, format!("invalid interpolant: {why}"))
                        }
                        Err(e) => return Outcome::fail(EXIT_INTERNAL, e),
                    }
                }
            }
            let trace = if opts.trace {
                match reconstruct_all(&tree) {
                    Ok(parts) => Some(tree.to_json(Some(&parts))),
                    Err(e) => return Outcome::fail(EXIT_INTERNAL, e),
                }
            } else {
                None
            };
            Outcome {
                code: EXIT_UNSAT,
                stdout: format!("unsat\n{}\n", print_formula(&interpolant)),
                trace,
                ..Default::default()
            }
        }
    }
}

/// JSON view of a model.
pub fn model_json(m: &Model) -> Json {
    json!(ModelView::from(m))
}

#[cfg(test)]
mod tests {
    use super::*;

    const WORKED: &str = "
        ; worked example
        (const a Array) (const b Array)
        (const i Index) (const j Index) (const k Index)
        (const d Elem)
        (A (= a (wr b i d)))
        (B (distinct (rd a j) (rd b j)))
        (B (distinct (rd a k) (rd b k)))
        (B (distinct j k))
    ";

    #[test]
    fn parses_trivial_problem() {
        let p = parse("(const a Array)(assert (= a a))").unwrap();
        assert_eq!(p.decls.len(), 1);
        assert_eq!(p.assertions.len(), 1);
        assert_eq!(p.assertions[0].0, Label::Unlabeled);
    }

    #[test]
    fn parses_labelled_parts() {
        let p = parse(WORKED).unwrap();
        assert_eq!(p.part(Label::A).len(), 1);
        assert_eq!(p.part(Label::B).len(), 3);
    }

    #[test]
    fn arity_diagnostic_has_location() {
        let e = parse("(const a Array)\n(const i Index)\n(assert (= (rd a) i))").unwrap_err();
        assert_eq!((e.line, e.col), (3, 12));
        assert!(e.msg.contains("arguments"), "{e}");
    }

    #[test]
    fn diagnostics() {
        let cases = [
            ("(assert (= x x))", "unknown symbol"),
            ("(const a Array)(const i Index)(assert (= a i))", "expected Array"),
            ("(const a Foo)", "unknown sort"),
            ("(const a Array)(const a Array)", "twice"),
            ("(const a Array)(assert (distinct a a a))", "2 arguments"),
            ("(const a Array", "unclosed"),
            (")", "unbalanced"),
            ("(frob)", "unknown command"),
        ];
        for (src, want) in cases {
            let e = parse(src).unwrap_err();
            assert!(e.msg.contains(want), "{src}: {e}");
        }
    }

    #[test]
    fn print_round_trip() {
        let p = parse(WORKED).unwrap();
        let q = parse(&print_problem(&p)).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn check_exit_codes() {
        let p = parse("(const e Elem)(assert (distinct e e))").unwrap();
        let o = run(Command::Check, &p, &RunOptions::default());
        assert_eq!((o.code, o.stdout.as_str()), (EXIT_UNSAT, "unsat\n"));
        let p = parse("(const a Array)(const i Index)(const e Elem)(assert (= (rd a i) e))").unwrap();
        let o = run(
            Command::Check,
            &p,
            &RunOptions {
                model: true,
                ..Default::default()
            },
        );
        assert_eq!(o.code, EXIT_SAT);
        assert!(o.stdout.starts_with("sat\n(model\n"), "{}", o.stdout);
    }

    #[test]
    fn interp_needs_labels() {
        let p = parse("(const e Elem)(assert (distinct e e))").unwrap();
        assert_eq!(run(Command::Interp, &p, &RunOptions::default()).code, EXIT_USAGE);
    }

    #[test]
    fn interp_worked_example() {
        let p = parse(WORKED).unwrap();
        let opts = RunOptions {
            validate: true,
            trace: true,
            ..Default::default()
        };
        let o = run(Command::Interp, &p, &opts);
        assert_eq!(o.code, EXIT_UNSAT, "{}", o.stderr);
        assert!(o.stdout.starts_with("unsat\n"));
        let nodes = o.trace.unwrap();
        assert!(nodes.as_array().unwrap().iter().all(|n| n.get("interpolant").is_some()));
    }

    #[test]
    fn formula_printing() {
        let e = Term::c(&Const::new("e", Sort::Elem));
        let d = Term::c(&Const::new("d", Sort::Elem));
        let f = Formula::Or(vec![
            Formula::atom(Literal::neq(e.clone(), d.clone())),
            Formula::And(vec![Formula::True, Formula::atom(Literal::eq(e, d))]),
        ]);
        assert_eq!(print_formula(&f), "(or (not (= e d)) (and true (= e d)))");
    }
}
