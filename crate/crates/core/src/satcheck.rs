//! Modularity, the satisfiability verdict for modular constraints, explicit
//! models, and the full decision procedure.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::completion::{run_completion, CompletionError, CompletionOutcome, TraceEntry};
use crate::ordering::{orient, OrderingError, Orientation, Precedence};
use crate::preprocess::{
    apply_partition, eliminate_array_disequalities, flatten, saturate_reads, GuessStream, PartitionChoice,
    PartitionOutcome,
};
use crate::rewrite::{RewriteError, RewriteSystem, RuleShape};
use crate::terms::{Const, Constraint, Flat, Formula, FreshGen, Literal, Sort, Term, TermError};

#[derive(Debug, Error)]
pub enum SatError {
    #[error(transparent)]
    Completion(#[from] CompletionError),
    #[error(transparent)]
    Rewrite(#[from] RewriteError),
    #[error(transparent)]
    Ordering(#[from] OrderingError),
    #[error(transparent)]
    Term(#[from] TermError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("constraint is not modular: {0}")]
    NotModular(ModularityViolation),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("constant {0} has no value")]
    Unassigned(String),
    #[error("term {0} cannot be evaluated")]
    BadTerm(String),
}

/// A value in a finite model.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Value {
    Index(usize),
    Elem(usize),
    /// Element ids indexed by index ids.
    Array(Vec<usize>),
}

/// A finite model: named domains, constant values and a partial `diff`
/// table. Pairs missing from the table use the least index where the two
/// arrays differ, or index 0 when they are equal.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Model {
    pub index_domain: Vec<String>,
    pub elem_domain: Vec<String>,
    pub index_of: BTreeMap<Const, usize>,
    pub elem_of: BTreeMap<Const, usize>,
    pub array_of: BTreeMap<Const, Vec<usize>>,
    pub diff_table: BTreeMap<(Vec<usize>, Vec<usize>), usize>,
}

impl Model {
    pub fn diff_value(&self, a: &[usize], b: &[usize]) -> usize {
        if let Some(&i) = self.diff_table.get(&(a.to_vec(), b.to_vec())) {
            return i;
        }
        a.iter().zip(b).position(|(x, y)| x != y).unwrap_or(0)
    }

    pub fn eval(&self, t: &Term) -> Result<Value, EvalError> {
        match t {
            Term::Const(c) => {
                let missing = || EvalError::Unassigned(c.to_string());
                Ok(match c.sort() {
                    Sort::Index => Value::Index(*self.index_of.get(c).ok_or_else(missing)?),
                    Sort::Elem => Value::Elem(*self.elem_of.get(c).ok_or_else(missing)?),
                    Sort::Array => Value::Array(self.array_of.get(c).ok_or_else(missing)?.clone()),
                })
            }
            Term::Var => Err(EvalError::BadTerm(t.to_string())),
            Term::Rd(a, i) => match (self.eval(a)?, self.eval(i)?) {
                (Value::Array(v), Value::Index(i)) => Ok(Value::Elem(v[i])),
                _ => Err(EvalError::BadTerm(t.to_string())),
            },
            Term::Wr(a, i, e) => match (self.eval(a)?, self.eval(i)?, self.eval(e)?) {
                (Value::Array(mut v), Value::Index(i), Value::Elem(e)) => {
                    v[i] = e;
                    Ok(Value::Array(v))
                }
                _ => Err(EvalError::BadTerm(t.to_string())),
            },
            Term::Diff(a, b) => match (self.eval(a)?, self.eval(b)?) {
                (Value::Array(x), Value::Array(y)) => Ok(Value::Index(self.diff_value(&x, &y))),
                _ => Err(EvalError::BadTerm(t.to_string())),
            },
        }
    }

    pub fn eval_literal(&self, l: &Literal) -> Result<bool, EvalError> {
        Ok((self.eval(&l.lhs)? == self.eval(&l.rhs)?) == l.pos)
    }

    pub fn eval_formula(&self, f: &Formula) -> Result<bool, EvalError> {
        Ok(match f {
            Formula::True => true,
            Formula::False => false,
            Formula::Atom(l) => self.eval_literal(l)?,
            Formula::Not(g) => !self.eval_formula(g)?,
            Formula::And(gs) => {
                for g in gs {
                    if !self.eval_formula(g)? {
                        return Ok(false);
                    }
                }
                true
            }
            Formula::Or(gs) => {
                for g in gs {
                    if self.eval_formula(g)? {
                        return Ok(true);
                    }
                }
                false
            }
        })
    }

    /// The first literal that is false in the model.
    pub fn first_false<'a, I: IntoIterator<Item = &'a Literal>>(&self, lits: I) -> Result<Option<Literal>, EvalError> {
        for l in lits {
            if !self.eval_literal(l)? {
                return Ok(Some(l.clone()));
            }
        }
        Ok(None)
    }

    /// Every table entry respects the `diff` axiom.
    pub fn diff_table_ok(&self) -> bool {
        self.diff_table
            .iter()
            .all(|((a, b), &i)| a == b || a.get(i) != b.get(i))
    }

    /// Assigns `c` the value of `t`.
    pub fn define(&mut self, c: &Const, t: &Term) -> Result<(), EvalError> {
        match self.eval(t)? {
            Value::Index(v) => self.index_of.insert(c.clone(), v),
            Value::Elem(v) => self.elem_of.insert(c.clone(), v),
            Value::Array(v) => {
                self.array_of.insert(c.clone(), v);
                None
            }
        };
        Ok(())
    }

    /// Gives every listed constant without a value some default value.
    pub fn default_missing<'a, I: IntoIterator<Item = &'a Const>>(&mut self, consts: I) {
        for c in consts {
            match c.sort() {
                Sort::Index => {
                    if !self.index_of.contains_key(c) {
                        if self.index_domain.is_empty() {
                            self.index_domain.push("*".into());
                        }
                        self.index_of.insert(c.clone(), 0);
                    }
                }
                Sort::Elem => {
                    if !self.elem_of.contains_key(c) {
                        self.elem_domain.push(format!("#{}", c.name()));
                        self.elem_of.insert(c.clone(), self.elem_domain.len() - 1);
                    }
                }
                Sort::Array => {
                    if !self.array_of.contains_key(c) {
                        if self.index_domain.is_empty() {
                            self.index_domain.push("*".into());
                        }
                        self.elem_domain.push(format!("#{}", c.name()));
                        let v = self.elem_domain.len() - 1;
                        self.array_of.insert(c.clone(), vec![v; self.index_domain.len()]);
                    }
                }
            }
        }
    }

    fn show_array(&self, v: &[usize]) -> String {
        let cells: Vec<String> = v
            .iter()
            .enumerate()
            .map(|(i, e)| format!("{}: {}", self.index_domain[i], self.elem_domain[*e]))
            .collect();
        format!("[{}]", cells.join(", "))
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (c, v) in &self.index_of {
            if !c.is_fresh() {
                writeln!(f, "{c} = {}", self.index_domain[*v])?;
            }
        }
        for (c, v) in &self.elem_of {
            if !c.is_fresh() {
                writeln!(f, "{c} = {}", self.elem_domain[*v])?;
            }
        }
        for (c, v) in &self.array_of {
            if !c.is_fresh() {
                writeln!(f, "{c} = {}", self.show_array(v))?;
            }
        }
        Ok(())
    }
}

/// JSON view of a model (non-fresh constants only).
#[derive(Clone, Debug, Serialize)]
pub struct ModelView {
    pub index: BTreeMap<String, String>,
    pub elem: BTreeMap<String, String>,
    pub array: BTreeMap<String, BTreeMap<String, String>>,
}

impl From<&Model> for ModelView {
    fn from(m: &Model) -> Self {
        let visible = |c: &Const| !c.is_fresh();
        ModelView {
            index: m
                .index_of
                .iter()
                .filter(|(c, _)| visible(c))
                .map(|(c, v)| (c.to_string(), m.index_domain[*v].clone()))
                .collect(),
            elem: m
                .elem_of
                .iter()
                .filter(|(c, _)| visible(c))
                .map(|(c, v)| (c.to_string(), m.elem_domain[*v].clone()))
                .collect(),
            array: m
                .array_of
                .iter()
                .filter(|(c, _)| visible(c))
                .map(|(c, v)| {
                    let cells = v
                        .iter()
                        .enumerate()
                        .map(|(i, e)| (m.index_domain[i].clone(), m.elem_domain[*e].clone()))
                        .collect();
                    (c.to_string(), cells)
                })
                .collect(),
        }
    }
}

/// Which modularity condition fails.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ModularityViolation {
    #[error("(o) positive index equality {0}")]
    IndexEquality(String),
    #[error("(i) array disequality {0}")]
    ArrayDisequality(String),
    #[error("(ii) badly orientable {0}")]
    BadlyOrientable(String),
    #[error("(iii) rewrite system not confluent or not ground irreducible")]
    NotConvergent,
    #[error("(iv) removable write in {0}")]
    RemovableWrite(String),
    #[error("(v) diff not functional: {0}, {1}")]
    DiffNotFunctional(String, String),
    #[error("(vi) diff with equal reads on distinct arrays: {0}")]
    DiffEqualReads(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Modularity {
    Yes,
    No(ModularityViolation),
}

/// Checks the modularity conditions (o) to (vi).
pub fn is_modular(c: &Constraint, prec: &Precedence) -> Result<Modularity, SatError> {
    use ModularityViolation as V;
    for l in &c.index {
        if let Some(Flat::IdxEq(i, j)) = l.flat() {
            if i != j {
                return Ok(Modularity::No(V::IndexEquality(l.to_string())));
            }
        }
    }
    for l in &c.main {
        if let Some(Flat::ArrNeq(..)) = l.flat() {
            return Ok(Modularity::No(V::ArrayDisequality(l.to_string())));
        }
        if l.pos && l.sort() == Sort::Array && orient(l, prec)? == Orientation::BadlyOrientable {
            return Ok(Modularity::No(V::BadlyOrientable(l.to_string())));
        }
    }
    let rs = RewriteSystem::from_literals(c.main.iter(), prec)?;
    if !rs.ground_overlaps().is_empty() || !rs.is_ground_irreducible()? {
        return Ok(Modularity::No(V::NotConvergent));
    }
    for r in rs.rules() {
        if r.shape != RuleShape::ArrayDef {
            continue;
        }
        let (b, ws) = r.rhs.decompose_tower();
        for (i, e) in ws {
            if rs.joinable(&Term::rd(b.clone(), i.clone()), e)? {
                return Ok(Modularity::No(V::RemovableWrite(r.to_string())));
            }
        }
    }
    let diffs: Vec<(&Literal, Const, Const, Const)> = c
        .index
        .iter()
        .filter_map(|l| match l.flat() {
            Some(Flat::Diff { a, b, i }) => Some((l, a, b, i)),
            _ => None,
        })
        .collect();
    for (x, (l1, a1, b1, i1)) in diffs.iter().enumerate() {
        for (l2, a2, b2, i2) in &diffs[x + 1..] {
            if i1 != i2 && rs.joinable(&Term::c(a1), &Term::c(a2))? && rs.joinable(&Term::c(b1), &Term::c(b2))? {
                return Ok(Modularity::No(V::DiffNotFunctional(l1.to_string(), l2.to_string())));
            }
        }
        let (ta, tb, ti) = (Term::c(a1), Term::c(b1), Term::c(i1));
        if rs.joinable(&Term::rd(ta.clone(), ti.clone()), &Term::rd(tb.clone(), ti))? && !rs.joinable(&ta, &tb)? {
            return Ok(Modularity::No(V::DiffEqualReads(l1.to_string())));
        }
    }
    Ok(Modularity::Yes)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ModularVerdict {
    Sat,
    Unsat(Const, Const),
}

/// The verdict for a modular constraint: unsatisfiable exactly when some
/// `e != d` has joinable sides.
pub fn decide_modular_sat(c: &Constraint, prec: &Precedence) -> Result<ModularVerdict, SatError> {
    if let Modularity::No(v) = is_modular(c, prec)? {
        return Err(SatError::NotModular(v));
    }
    let rs = RewriteSystem::from_literals(c.main.iter(), prec)?;
    for l in &c.main {
        if let Some(Flat::ElemNeq(e, d)) = l.flat() {
            if rs.joinable(&Term::c(&e), &Term::c(&d))? {
                return Ok(ModularVerdict::Unsat(e, d));
            }
        }
    }
    Ok(ModularVerdict::Sat)
}

/// Builds the canonical model of a satisfiable modular constraint.
///
/// Indices denote themselves plus an extra point `*`; elements are the
/// element normal forms, one token `#a` per normal-form array, and one
/// fresh value per missing read of a normal-form array.
pub fn build_model(c: &Constraint, prec: &Precedence) -> Result<Model, SatError> {
    if decide_modular_sat(c, prec)? != ModularVerdict::Sat {
        return Err(SatError::Invariant("model requested for an unsatisfiable constraint".into()));
    }
    let rs = RewriteSystem::from_literals(c.main.iter(), prec)?;
    let consts = c.consts();
    let mut m = Model::default();

    let mut indices: Vec<Const> = consts.iter().filter(|k| k.sort() == Sort::Index).cloned().collect();
    indices.sort_by(|x, y| prec.cmp_consts(x, y).unwrap_or(std::cmp::Ordering::Equal));
    for i in &indices {
        m.index_of.insert(i.clone(), m.index_domain.len());
        m.index_domain.push(i.name().to_string());
    }
    let star = m.index_domain.len();
    m.index_domain.push("*".into());

    let mut elem_ids: BTreeMap<Term, usize> = BTreeMap::new();
    let mut elem_value = |m: &mut Model, t: Term, label: String| -> usize {
        *elem_ids.entry(t).or_insert_with(|| {
            m.elem_domain.push(label);
            m.elem_domain.len() - 1
        })
    };
    for e in consts.iter().filter(|k| k.sort() == Sort::Elem) {
        let n = rs.normalize(&Term::c(e))?;
        let label = n.to_string();
        let v = elem_value(&mut m, n, label);
        m.elem_of.insert(e.clone(), v);
    }

    let arrays: Vec<&Const> = consts.iter().filter(|k| k.sort() == Sort::Array).collect();
    let mut fresh = 0usize;
    let mut nf_tables: BTreeMap<Term, Vec<usize>> = BTreeMap::new();
    let bases: BTreeSet<Term> = arrays
        .iter()
        .map(|a| rs.normalize(&Term::c(a)).map(|n| n.decompose_tower().0.clone()))
        .collect::<Result<_, _>>()?;
    for b in &bases {
        let mut row = vec![0; m.index_domain.len()];
        for (x, i) in indices.iter().enumerate() {
            let r = rs.normalize(&Term::rd(b.clone(), Term::c(i)))?;
            row[x] = if r.is_const() {
                let label = r.to_string();
                elem_value(&mut m, r, label)
            } else {
                fresh += 1;
                elem_value(&mut m, r, format!("_m{fresh}"))
            };
        }
        row[star] = elem_value(&mut m, b.clone(), format!("#{b}"));
        nf_tables.insert(b.clone(), row);
    }
    for a in &arrays {
        let n = rs.normalize(&Term::c(a))?;
        let (b, ws) = n.decompose_tower();
        let mut row = nf_tables[b].clone();
        for (i, e) in ws {
            let (Some(ic), Some(ec)) = (i.as_const(), e.as_const()) else {
                return Err(SatError::Invariant(format!("non-flat normal form {n}")));
            };
            let ev = m.elem_of.get(ec).copied().ok_or_else(|| EvalError::Unassigned(ec.to_string()))?;
            row[m.index_of[ic]] = ev;
        }
        m.array_of.insert((*a).clone(), row);
    }

    for l in &c.index {
        if let Some(Flat::Diff { a, b, i }) = l.flat() {
            let key = (m.array_of[&a].clone(), m.array_of[&b].clone());
            let v = m.index_of[&i];
            if let Some(old) = m.diff_table.insert(key, v) {
                if old != v {
                    return Err(SatError::Invariant(format!("conflicting diff values at {l}")));
                }
            }
        }
    }
    if !m.diff_table_ok() {
        return Err(SatError::Invariant("diff table violates the diff axiom".into()));
    }
    if let Some(l) = m.first_false(c.iter())? {
        return Err(SatError::Invariant(format!("model falsifies {l}")));
    }
    Ok(m)
}

/// Options for [`decide_sat`].
#[derive(Clone, Debug, Default)]
pub struct SatOptions {
    /// Shuffles the index constants before partitions are enumerated.
    pub seed: Option<u64>,
    /// Keeps the completion trace of every explored branch.
    pub keep_trace: bool,
}

#[derive(Clone, Debug)]
pub enum SatResult {
    Sat(Model),
    Unsat,
}

impl SatResult {
    pub fn is_sat(&self) -> bool {
        matches!(self, SatResult::Sat(_))
    }
}

/// One explored partition.
#[derive(Clone, Debug, Serialize)]
pub struct BranchTrace {
    pub partition: Vec<Vec<String>>,
    pub outcome: String,
    pub steps: Vec<TraceEntry>,
}

#[derive(Clone, Debug)]
pub struct SatReport {
    pub result: SatResult,
    pub branches: Vec<BranchTrace>,
}

/// Precedence by first appearance, earliest greatest.
pub fn precedence_of(lits: &[Literal]) -> Precedence {
    let mut order = Vec::new();
    for l in lits {
        l.lhs.consts_in_order(&mut order);
        l.rhs.consts_in_order(&mut order);
    }
    Precedence::from_first_appearance(&order)
}

/// Decides a conjunction of ground literals.
pub fn decide_sat(raw: &[Literal], opts: &SatOptions) -> Result<SatResult, SatError> {
    Ok(decide_sat_report(raw, opts)?.result)
}

/// [`decide_sat`] with the explored branches.
pub fn decide_sat_report(raw: &[Literal], opts: &SatOptions) -> Result<SatReport, SatError> {
    for l in raw {
        l.check_sorts()?;
    }
    let mut prec = precedence_of(raw);
    let mut gen = FreshGen::new();
    let raw_consts: BTreeSet<Const> = raw.iter().flat_map(|l| l.consts()).collect();
    gen.reserve(raw_consts.iter().map(|c| c.name()));
    let flat = flatten(raw, &mut gen, &mut prec)?;
    let c = eliminate_array_disequalities(&flat, &mut gen, &mut prec)?;
    let indices: Vec<Const> = c.consts_of_sort(Sort::Index).into_iter().collect();
    let order = decision_order(&c, &indices, opts.seed);
    let mut levels = vec![Constraint::new(); order.len() + 1];
    for l in c.iter() {
        let lvl = l
            .consts()
            .iter()
            .filter_map(|k| order.iter().position(|o| o == k))
            .map(|p| p + 1)
            .max()
            .unwrap_or(0);
        for sub in &mut levels[lvl..] {
            sub.insert(l.clone())?;
        }
    }
    let mut search = Search {
        raw,
        full: &c,
        prec: &prec,
        gen: &gen,
        opts,
        order: &order,
        levels: &levels,
        branches: Vec::new(),
    };
    let mut classes = Vec::new();
    let model = search.descend(&mut classes, 0, true)?;
    let branches = search.branches;
    Ok(SatReport {
        result: model.map_or(SatResult::Unsat, SatResult::Sat),
        branches,
    })
}

/// Orders index constants so that literals become fully decided early.
fn decision_order(c: &Constraint, indices: &[Const], seed: Option<u64>) -> Vec<Const> {
    let mut rest: Vec<Const> = GuessStream::new(indices, seed)
        .next()
        .map(|p| p.classes.into_iter().flatten().collect())
        .unwrap_or_default();
    let lit_idx: Vec<BTreeSet<Const>> = c
        .iter()
        .map(|l| l.consts().into_iter().filter(|k| k.sort() == Sort::Index).collect())
        .collect();
    let mut done: BTreeSet<Const> = BTreeSet::new();
    let mut order = Vec::new();
    while !rest.is_empty() {
        let score = |k: &Const| {
            let mut closed = 0usize;
            let mut touched = 0usize;
            for s in &lit_idx {
                if s.contains(k) {
                    touched += 1;
                    if s.iter().all(|x| x == k || done.contains(x)) {
                        closed += 1;
                    }
                }
            }
            (closed, touched)
        };
        let best = (0..rest.len())
            .max_by(|&x, &y| score(&rest[x]).cmp(&score(&rest[y])).then(y.cmp(&x)))
            .expect("non-empty");
        let k = rest.remove(best);
        done.insert(k.clone());
        order.push(k);
    }
    order
}

enum Branch {
    Refuted,
    Open {
        modular: Constraint,
        prec: Precedence,
        subst: BTreeMap<Const, Term>,
    },
}

/// Backtracking search over index partitions. A partial partition is
/// refuted when the literals whose index constants are all decided are
/// already unsatisfiable under it.
struct Search<'a> {
    raw: &'a [Literal],
    full: &'a Constraint,
    prec: &'a Precedence,
    gen: &'a FreshGen,
    opts: &'a SatOptions,
    order: &'a [Const],
    levels: &'a [Constraint],
    branches: Vec<BranchTrace>,
}

impl Search<'_> {
    fn descend(&mut self, classes: &mut Vec<Vec<Const>>, depth: usize, fresh: bool) -> Result<Option<Model>, SatError> {
        let leaf = depth == self.order.len();
        if leaf || fresh {
            let choice = PartitionChoice { classes: classes.clone() };
            match self.branch(&self.levels[depth], &choice, leaf)? {
                Branch::Refuted => return Ok(None),
                Branch::Open { modular, prec, subst } if leaf => {
                    return self.finish(&modular, &prec, &subst).map(Some);
                }
                Branch::Open { .. } => {}
            }
        }
        if leaf {
            return Ok(None);
        }
        let k = self.order[depth].clone();
        let grows = |lvl: usize| self.levels[lvl + 1].len() > self.levels[lvl].len();
        classes.push(vec![k.clone()]);
        let r = self.descend(classes, depth + 1, grows(depth))?;
        classes.pop();
        if r.is_some() {
            return Ok(r);
        }
        for b in 0..classes.len() {
            classes[b].push(k.clone());
            let r = self.descend(classes, depth + 1, grows(depth))?;
            classes[b].pop();
            if r.is_some() {
                return Ok(r);
            }
        }
        Ok(None)
    }

    fn record(&mut self, choice: &PartitionChoice, leaf: bool, outcome: &str, steps: Vec<TraceEntry>) {
        if self.opts.keep_trace {
            let partition = choice
                .classes
                .iter()
                .map(|cl| cl.iter().map(|k| k.name().to_string()).collect())
                .collect();
            let outcome = if leaf { outcome.to_string() } else { format!("pruned: {outcome}") };
            self.branches.push(BranchTrace { partition, outcome, steps });
        }
    }

    fn branch(&mut self, c: &Constraint, choice: &PartitionChoice, leaf: bool) -> Result<Branch, SatError> {
        let PartitionOutcome::Applied { constraint, subst } = apply_partition(c, choice, self.prec)? else {
            self.record(choice, leaf, "inconsistent partition", vec![]);
            return Ok(Branch::Refuted);
        };
        let mut bprec = self.prec.clone();
        let mut bgen = self.gen.clone();
        let sat = saturate_reads(&constraint, &mut bgen, &mut bprec)?;
        let (modular, steps) = match run_completion(sat, &bprec)? {
            CompletionOutcome::Failed { failure, trace } => {
                self.record(choice, leaf, &format!("failed {:?}", failure.failure), trace);
                return Ok(Branch::Refuted);
            }
            CompletionOutcome::Modular { constraint, trace } => (constraint, trace),
        };
        if let Modularity::No(v) = is_modular(&modular, &bprec)? {
            return Err(SatError::NotModular(v));
        }
        if let ModularVerdict::Unsat(..) = decide_modular_sat(&modular, &bprec)? {
            self.record(choice, leaf, "unsat modular constraint", steps);
            return Ok(Branch::Refuted);
        }
        if leaf {
            self.record(choice, leaf, "sat", steps);
        }
        Ok(Branch::Open {
            modular,
            prec: bprec,
            subst,
        })
    }

    fn finish(
        &self,
        modular: &Constraint,
        prec: &Precedence,
        subst: &BTreeMap<Const, Term>,
    ) -> Result<Model, SatError> {
        let mut model = build_model(modular, prec)?;
        let consts = self.full.consts();
        model.default_missing(consts.iter().filter(|k| !subst.contains_key(*k)));
        for (k, rep) in subst {
            model.define(k, rep)?;
        }
        if let Some(l) = model.first_false(self.raw)? {
            return Err(SatError::Invariant(format!("model falsifies input literal {l}")));
        }
        Ok(model)
    }
}
