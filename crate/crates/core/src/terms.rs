//! Sorts, terms, literals, constraints and interpolant formulas.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The three sorts of the theory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sort {
    Array,
    Index,
    Elem,
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sort::Array => "Array",
            Sort::Index => "Index",
            Sort::Elem => "Elem",
        })
    }
}

/// A free constant.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Const {
    name: Arc<str>,
    sort: Sort,
}

impl Const {
    pub fn new(name: &str, sort: Sort) -> Self {
        Const { name: Arc::from(name), sort }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn sort(&self) -> Sort {
        self.sort
    }

    /// True for names handed out by [`FreshGen`].
    pub fn is_fresh(&self) -> bool {
        self.name.starts_with(FRESH_PREFIX)
    }
}

impl fmt::Debug for Const {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl fmt::Display for Const {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// Function symbols plus constants, as seen by the precedence.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Symbol {
    Rd,
    Wr,
    Diff,
    Const(Const),
}

/// A term. `Var` is the array variable of the schema rules and never
/// appears in constraint literals.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Const(Const),
    Var,
    Rd(Box<Term>, Box<Term>),
    Wr(Box<Term>, Box<Term>, Box<Term>),
    Diff(Box<Term>, Box<Term>),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TermError {
    #[error("index list has length {indices} but element list has length {elems}")]
    LengthMismatch { indices: usize, elems: usize },
    #[error("sort mismatch in `{term}`: expected {expected}, found {found}")]
    SortMismatch {
        term: String,
        expected: Sort,
        found: Sort,
    },
    #[error("literal `{0}` is not flat")]
    NotFlat(String),
}

impl Term {
    pub fn c(k: &Const) -> Term {
        Term::Const(k.clone())
    }

    pub fn rd(a: Term, i: Term) -> Term {
        Term::Rd(Box::new(a), Box::new(i))
    }

    pub fn wr(a: Term, i: Term, e: Term) -> Term {
        Term::Wr(Box::new(a), Box::new(i), Box::new(e))
    }

    pub fn diff(a: Term, b: Term) -> Term {
        Term::Diff(Box::new(a), Box::new(b))
    }

    /// Sort of a well-sorted term.
    pub fn sort(&self) -> Sort {
        match self {
            Term::Const(k) => k.sort(),
            Term::Var | Term::Wr(..) => Sort::Array,
            Term::Rd(..) => Sort::Elem,
            Term::Diff(..) => Sort::Index,
        }
    }

    pub fn head(&self) -> Option<Symbol> {
        match self {
            Term::Const(k) => Some(Symbol::Const(k.clone())),
            Term::Var => None,
            Term::Rd(..) => Some(Symbol::Rd),
            Term::Wr(..) => Some(Symbol::Wr),
            Term::Diff(..) => Some(Symbol::Diff),
        }
    }

    pub fn args(&self) -> Vec<&Term> {
        match self {
            Term::Const(_) | Term::Var => vec![],
            Term::Rd(a, i) => vec![a, i],
            Term::Wr(a, i, e) => vec![a, i, e],
            Term::Diff(a, b) => vec![a, b],
        }
    }

    pub fn as_const(&self) -> Option<&Const> {
        match self {
            Term::Const(k) => Some(k),
            _ => None,
        }
    }

    pub fn is_const(&self) -> bool {
        matches!(self, Term::Const(_))
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var => false,
            t => t.args().into_iter().all(Term::is_ground),
        }
    }

    /// Checks well-sortedness against the symbol profiles.
    pub fn check_sorts(&self) -> Result<(), TermError> {
        let expect = |t: &Term, s: Sort| -> Result<(), TermError> {
            t.check_sorts()?;
            if t.sort() != s {
                return Err(TermError::SortMismatch {
                    term: t.to_string(),
                    expected: s,
                    found: t.sort(),
                });
            }
            Ok(())
        };
        match self {
            Term::Const(_) | Term::Var => Ok(()),
            Term::Rd(a, i) => {
                expect(a, Sort::Array)?;
                expect(i, Sort::Index)
            }
            Term::Wr(a, i, e) => {
                expect(a, Sort::Array)?;
                expect(i, Sort::Index)?;
                expect(e, Sort::Elem)
            }
            Term::Diff(a, b) => {
                expect(a, Sort::Array)?;
                expect(b, Sort::Array)
            }
        }
    }

    pub fn collect_consts(&self, out: &mut BTreeSet<Const>) {
        match self {
            Term::Const(k) => {
                out.insert(k.clone());
            }
            t => t.args().into_iter().for_each(|a| a.collect_consts(out)),
        }
    }

    pub fn consts(&self) -> BTreeSet<Const> {
        let mut out = BTreeSet::new();
        self.collect_consts(&mut out);
        out
    }

    /// Constants in order of first occurrence, left to right.
    pub fn consts_in_order(&self, out: &mut Vec<Const>) {
        match self {
            Term::Const(k) => {
                if !out.contains(k) {
                    out.push(k.clone());
                }
            }
            t => t.args().into_iter().for_each(|a| a.consts_in_order(out)),
        }
    }

    /// Replaces constants according to `map`.
    pub fn subst(&self, map: &BTreeMap<Const, Term>) -> Term {
        match self {
            Term::Const(k) => map.get(k).cloned().unwrap_or_else(|| self.clone()),
            Term::Var => Term::Var,
            Term::Rd(a, i) => Term::rd(a.subst(map), i.subst(map)),
            Term::Wr(a, i, e) => Term::wr(a.subst(map), i.subst(map), e.subst(map)),
            Term::Diff(a, b) => Term::diff(a.subst(map), b.subst(map)),
        }
    }

    /// Replaces every occurrence of the subterm `from` by `to`.
    pub fn replace(&self, from: &Term, to: &Term) -> Term {
        if self == from {
            return to.clone();
        }
        match self {
            Term::Const(_) | Term::Var => self.clone(),
            Term::Rd(a, i) => Term::rd(a.replace(from, to), i.replace(from, to)),
            Term::Wr(a, i, e) => {
                Term::wr(a.replace(from, to), i.replace(from, to), e.replace(from, to))
            }
            Term::Diff(a, b) => Term::diff(a.replace(from, to), b.replace(from, to)),
        }
    }

    /// Splits `wr(...wr(b,i1,e1)...,in,en)` into `b` and `[(i1,e1),...,(in,en)]`.
    pub fn decompose_tower(&self) -> (&Term, Vec<(&Term, &Term)>) {
        let mut writes = Vec::new();
        let mut cur = self;
        while let Term::Wr(a, i, e) = cur {
            writes.push((&**i, &**e));
            cur = a;
        }
        writes.reverse();
        (cur, writes)
    }

    /// Number of subterm positions.
    pub fn size(&self) -> usize {
        1 + self.args().into_iter().map(Term::size).sum::<usize>()
    }

    pub fn subterms(&self) -> Vec<&Term> {
        let mut out = vec![self];
        for a in self.args() {
            out.extend(a.subterms());
        }
        out
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Const(k) => write!(f, "{k}"),
            Term::Var => f.write_str("x"),
            Term::Rd(a, i) => write!(f, "rd({a},{i})"),
            Term::Wr(a, i, e) => write!(f, "wr({a},{i},{e})"),
            Term::Diff(a, b) => write!(f, "diff({a},{b})"),
        }
    }
}

/// Builds `wr(wr(...wr(base,i1,e1)...),in,en)`; empty lists give `base`.
pub fn mk_nested_write(base: Term, indices: &[Term], elems: &[Term]) -> Result<Term, TermError> {
    if indices.len() != elems.len() {
        return Err(TermError::LengthMismatch {
            indices: indices.len(),
            elems: elems.len(),
        });
    }
    let mut t = base;
    for (i, e) in indices.iter().zip(elems) {
        t = Term::wr(t, i.clone(), e.clone());
    }
    t.check_sorts()?;
    Ok(t)
}

/// Tower builder over constants; callers guarantee sorts.
pub fn tower(base: &Const, writes: &[(Const, Const)]) -> Term {
    writes.iter().fold(Term::c(base), |t, (i, e)| {
        Term::wr(t, Term::c(i), Term::c(e))
    })
}

/// An equality or disequality atom.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub pos: bool,
    pub lhs: Term,
    pub rhs: Term,
}

impl Literal {
    /// Builds a literal with the larger side (by the structural order) first,
    /// so that `t = u` and `u = t` coincide.
    pub fn new(pos: bool, a: Term, b: Term) -> Literal {
        if a >= b {
            Literal { pos, lhs: a, rhs: b }
        } else {
            Literal { pos, lhs: b, rhs: a }
        }
    }

    pub fn eq(a: Term, b: Term) -> Literal {
        Literal::new(true, a, b)
    }

    pub fn neq(a: Term, b: Term) -> Literal {
        Literal::new(false, a, b)
    }

    pub fn negate(&self) -> Literal {
        Literal::new(!self.pos, self.lhs.clone(), self.rhs.clone())
    }

    pub fn sort(&self) -> Sort {
        self.lhs.sort()
    }

    pub fn consts(&self) -> BTreeSet<Const> {
        let mut out = self.lhs.consts();
        self.rhs.collect_consts(&mut out);
        out
    }

    pub fn subst(&self, map: &BTreeMap<Const, Term>) -> Literal {
        Literal::new(self.pos, self.lhs.subst(map), self.rhs.subst(map))
    }

    pub fn check_sorts(&self) -> Result<(), TermError> {
        self.lhs.check_sorts()?;
        self.rhs.check_sorts()?;
        if self.lhs.sort() != self.rhs.sort() {
            return Err(TermError::SortMismatch {
                term: self.to_string(),
                expected: self.lhs.sort(),
                found: self.rhs.sort(),
            });
        }
        Ok(())
    }

    /// Flat view of the literal, if it has one of the flat shapes.
    pub fn flat(&self) -> Option<Flat> {
        let (l, r) = (&self.lhs, &self.rhs);
        match (self.pos, l.sort()) {
            (_, Sort::Index) => match (l, r) {
                (Term::Const(i), Term::Const(j)) => Some(if self.pos {
                    Flat::IdxEq(i.clone(), j.clone())
                } else {
                    Flat::IdxNeq(i.clone(), j.clone())
                }),
                (Term::Diff(a, b), Term::Const(i)) | (Term::Const(i), Term::Diff(a, b))
                    if self.pos =>
                {
                    Some(Flat::Diff {
                        a: a.as_const()?.clone(),
                        b: b.as_const()?.clone(),
                        i: i.clone(),
                    })
                }
                _ => None,
            },
            (true, Sort::Array) => {
                let (a, t) = match (l, r) {
                    (Term::Const(a), Term::Const(b)) => {
                        return Some(Flat::ArrEq {
                            lhs: a.clone(),
                            base: b.clone(),
                            writes: vec![],
                        })
                    }
                    (Term::Const(a), t) | (t, Term::Const(a)) => (a, t),
                    _ => return None,
                };
                let (base, ws) = t.decompose_tower();
                let base = base.as_const()?.clone();
                let mut writes = Vec::with_capacity(ws.len());
                for (i, e) in ws {
                    writes.push((i.as_const()?.clone(), e.as_const()?.clone()));
                }
                Some(Flat::ArrEq {
                    lhs: a.clone(),
                    base,
                    writes,
                })
            }
            (false, Sort::Array) => match (l, r) {
                (Term::Const(a), Term::Const(b)) => Some(Flat::ArrNeq(a.clone(), b.clone())),
                _ => None,
            },
            (_, Sort::Elem) => match (l, r) {
                (Term::Const(e), Term::Const(d)) => Some(if self.pos {
                    Flat::ElemEq(e.clone(), d.clone())
                } else {
                    Flat::ElemNeq(e.clone(), d.clone())
                }),
                (Term::Rd(a, i), Term::Const(e)) | (Term::Const(e), Term::Rd(a, i))
                    if self.pos =>
                {
                    Some(Flat::Read {
                        a: a.as_const()?.clone(),
                        i: i.as_const()?.clone(),
                        e: e.clone(),
                    })
                }
                _ => None,
            },
        }
    }
}

impl fmt::Debug for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = if self.pos { "=" } else { "!=" };
        write!(f, "{} {op} {}", self.lhs, self.rhs)
    }
}

/// The flat literal shapes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Flat {
    IdxEq(Const, Const),
    IdxNeq(Const, Const),
    Diff { a: Const, b: Const, i: Const },
    /// `lhs = wr(base, writes)`; an array equality `a = b` has no writes.
    ArrEq {
        lhs: Const,
        base: Const,
        writes: Vec<(Const, Const)>,
    },
    ArrNeq(Const, Const),
    Read { a: Const, i: Const, e: Const },
    ElemEq(Const, Const),
    ElemNeq(Const, Const),
}

/// Which part of a constraint a literal belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LiteralClass {
    IndexPart,
    MainPart,
    NotFlat,
}

pub fn classify_literal(l: &Literal) -> LiteralClass {
    match l.flat() {
        None => LiteralClass::NotFlat,
        Some(Flat::IdxEq(..) | Flat::IdxNeq(..) | Flat::Diff { .. }) => LiteralClass::IndexPart,
        Some(_) => LiteralClass::MainPart,
    }
}

/// A flat constraint split into index part and main part.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Constraint {
    pub index: BTreeSet<Literal>,
    pub main: BTreeSet<Literal>,
}

impl Constraint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_literals<I: IntoIterator<Item = Literal>>(lits: I) -> Result<Self, TermError> {
        let mut c = Constraint::new();
        for l in lits {
            c.insert(l)?;
        }
        Ok(c)
    }

    /// Inserts a flat literal into its part. Returns whether it was new.
    pub fn insert(&mut self, l: Literal) -> Result<bool, TermError> {
        match classify_literal(&l) {
            LiteralClass::IndexPart => Ok(self.index.insert(l)),
            LiteralClass::MainPart => Ok(self.main.insert(l)),
            LiteralClass::NotFlat => Err(TermError::NotFlat(l.to_string())),
        }
    }

    pub fn remove(&mut self, l: &Literal) -> bool {
        self.index.remove(l) | self.main.remove(l)
    }

    pub fn contains(&self, l: &Literal) -> bool {
        self.index.contains(l) || self.main.contains(l)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Literal> {
        self.index.iter().chain(self.main.iter())
    }

    pub fn len(&self) -> usize {
        self.index.len() + self.main.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn consts(&self) -> BTreeSet<Const> {
        let mut out = BTreeSet::new();
        for l in self.iter() {
            l.lhs.collect_consts(&mut out);
            l.rhs.collect_consts(&mut out);
        }
        out
    }

    pub fn consts_of_sort(&self, s: Sort) -> BTreeSet<Const> {
        self.consts().into_iter().filter(|k| k.sort() == s).collect()
    }

    pub fn literals(&self) -> Vec<Literal> {
        self.iter().cloned().collect()
    }

    pub fn subst(&self, map: &BTreeMap<Const, Term>) -> Result<Constraint, TermError> {
        Constraint::from_literals(self.iter().map(|l| l.subst(map)))
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.iter().map(|l| l.to_string()).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

/// Quantifier-free formulas over literals.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Formula {
    True,
    False,
    #[serde(with = "literal_serde")]
    Atom(Literal),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
}

mod literal_serde {
    use super::Literal;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(l: &Literal, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&l.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(_d: D) -> Result<Literal, D::Error> {
        Err(serde::de::Error::custom("literals are not deserializable"))
    }
}

impl Formula {
    pub fn atom(l: Literal) -> Formula {
        Formula::Atom(l)
    }

    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Or(vec![Formula::not(a), b])
    }

    pub fn symbols(&self) -> BTreeSet<Const> {
        let mut out = BTreeSet::new();
        self.collect_symbols(&mut out);
        out
    }

    fn collect_symbols(&self, out: &mut BTreeSet<Const>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(l) => {
                l.lhs.collect_consts(out);
                l.rhs.collect_consts(out);
            }
            Formula::Not(f) => f.collect_symbols(out),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|f| f.collect_symbols(out)),
        }
    }

    /// Substitutes a term for a constant everywhere.
    pub fn subst(&self, map: &BTreeMap<Const, Term>) -> Formula {
        match self {
            Formula::True | Formula::False => self.clone(),
            Formula::Atom(l) => Formula::Atom(l.subst(map)),
            Formula::Not(f) => Formula::not(f.subst(map)),
            Formula::And(fs) => Formula::And(fs.iter().map(|f| f.subst(map)).collect()),
            Formula::Or(fs) => Formula::Or(fs.iter().map(|f| f.subst(map)).collect()),
        }
    }

    /// Negation normal form: negations only on atoms, folded into literal polarity.
    pub fn nnf(&self) -> Formula {
        self.nnf_pol(true)
    }

    fn nnf_pol(&self, pol: bool) -> Formula {
        match (self, pol) {
            (Formula::True, true) | (Formula::False, false) => Formula::True,
            (Formula::True, false) | (Formula::False, true) => Formula::False,
            (Formula::Atom(l), true) => Formula::Atom(l.clone()),
            (Formula::Atom(l), false) => Formula::Atom(l.negate()),
            (Formula::Not(f), p) => f.nnf_pol(!p),
            (Formula::And(fs), true) | (Formula::Or(fs), false) => {
                Formula::And(fs.iter().map(|f| f.nnf_pol(pol)).collect())
            }
            (Formula::And(fs), false) | (Formula::Or(fs), true) => {
                Formula::Or(fs.iter().map(|f| f.nnf_pol(pol)).collect())
            }
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Formula::True | Formula::False | Formula::Atom(_) => 1,
            Formula::Not(f) => 1 + f.size(),
            Formula::And(fs) | Formula::Or(fs) => 1 + fs.iter().map(Formula::size).sum::<usize>(),
        }
    }
}

impl fmt::Debug for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => f.write_str("true"),
            Formula::False => f.write_str("false"),
            Formula::Atom(l) => write!(f, "{l}"),
            Formula::Not(g) => write!(f, "~({g})"),
            Formula::And(fs) | Formula::Or(fs) => {
                let op = if matches!(self, Formula::And(_)) { " & " } else { " | " };
                let parts: Vec<String> = fs.iter().map(|g| format!("({g})")).collect();
                f.write_str(&parts.join(op))
            }
        }
    }
}

/// Exact set of free constants in a formula.
pub fn symbols_of(f: &Formula) -> BTreeSet<Const> {
    f.symbols()
}

/// Prefix reserved for generated names; the parser rejects it.
pub const FRESH_PREFIX: &str = "_k";

/// Generator of fresh constants.
///
/// A generator hands out `_k{next}`, `_k{next+step}`, ... Forking splits the
/// remaining arithmetic progression into interleaved, disjoint progressions.
#[derive(Clone, Debug)]
pub struct FreshGen {
    next: u64,
    step: u64,
    reserved: BTreeSet<String>,
}

impl Default for FreshGen {
    fn default() -> Self {
        FreshGen::new()
    }
}

impl FreshGen {
    pub fn new() -> Self {
        FreshGen {
            next: 0,
            step: 1,
            reserved: BTreeSet::new(),
        }
    }

    /// Marks names that must never be produced.
    pub fn reserve<'a, I: IntoIterator<Item = &'a str>>(&mut self, names: I) {
        self.reserved.extend(names.into_iter().map(str::to_owned));
    }

    pub fn fresh(&mut self, sort: Sort) -> Const {
        loop {
            let name = format!("{FRESH_PREFIX}{}", self.next);
            self.next += self.step;
            if !self.reserved.contains(&name) {
                return Const::new(&name, sort);
            }
        }
    }

    /// Splits off `n` generators. `self` and the children draw from pairwise
    /// disjoint ranges afterwards.
    pub fn fork(&mut self, n: usize) -> Vec<FreshGen> {
        let ways = n as u64 + 1;
        let children = (1..ways)
            .map(|k| FreshGen {
                next: self.next + k * self.step,
                step: self.step * ways,
                reserved: self.reserved.clone(),
            })
            .collect();
        self.step *= ways;
        children
    }
}
