//! Brute-force finite model search and interpolant validation, used as an
//! independent check of the solver.
//!
//! The search enumerates index constants up to renaming and a point for
//! every `diff` subterm. Each such choice turns the literals into equalities
//! and disequalities over element unknowns (element constants and array
//! cells), which are solved by union-find and a bounded colouring.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::preprocess::{
    apply_partition, eliminate_array_disequalities, flatten, saturate_reads, PartitionChoice, PartitionOutcome,
};
use crate::satcheck::{decide_sat, precedence_of, EvalError, Model, SatError, SatOptions, SatResult};
use crate::terms::{symbols_of, Const, Formula, FreshGen, Literal, Sort, Term, TermError};

/// Default cap on search nodes per query.
pub const NODE_LIMIT: u64 = 50_000_000;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("bounds {given:?} are below the minimum {min:?}")]
    BoundsTooSmall { given: Bounds, min: Bounds },
    #[error("search exceeded {0} nodes")]
    Budget(u64),
    #[error(transparent)]
    Term(#[from] TermError),
    #[error(transparent)]
    Sat(#[from] SatError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("solver and brute force disagree on {0}")]
    Disagreement(String),
}

/// Domain sizes for the search.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Bounds {
    pub n_index: usize,
    pub n_elem: usize,
}

impl Bounds {
    /// Sizes of the canonical model of the preprocessed constraint: one
    /// index per index constant plus one, one element per element constant
    /// (read-saturated) plus one token per array.
    pub fn lemma(lits: &[Literal]) -> Result<Bounds, OracleError> {
        let mut prec = precedence_of(lits);
        let mut gen = FreshGen::new();
        let names: BTreeSet<Const> = lits.iter().flat_map(|l| l.consts()).collect();
        gen.reserve(names.iter().map(|c| c.name()));
        let c = flatten(lits, &mut gen, &mut prec)?;
        let c = eliminate_array_disequalities(&c, &mut gen, &mut prec)?;
        let idx: Vec<Const> = c.consts_of_sort(Sort::Index).into_iter().collect();
        let c = match apply_partition(&c, &PartitionChoice::finest(&idx), &prec)? {
            PartitionOutcome::Applied { constraint, .. } => constraint,
            PartitionOutcome::Inconsistent => c,
        };
        let c = saturate_reads(&c, &mut gen, &mut prec)?;
        Ok(Bounds {
            n_index: c.consts_of_sort(Sort::Index).len() + 1,
            n_elem: (c.consts_of_sort(Sort::Elem).len() + c.consts_of_sort(Sort::Array).len()).max(1),
        })
    }
}

#[derive(Clone, Debug)]
pub enum OracleResult {
    SatModel(Model),
    NoModelWithinBounds,
}

impl OracleResult {
    pub fn is_sat(&self) -> bool {
        matches!(self, OracleResult::SatModel(_))
    }
}

/// A term value once index constants and `diff` choices are fixed. Element
/// values are unknowns: element constants first, then array cells.
#[derive(Clone, Debug, PartialEq, Eq)]
enum V {
    I(usize),
    E(usize),
    A(Vec<usize>),
}

/// A choice for one `diff` subterm: the point, and whether the arguments
/// are equal (any point allowed) or differ there.
#[derive(Clone, Copy, Debug)]
struct DiffChoice {
    point: usize,
    equal: bool,
}

struct Search<'a> {
    lits: &'a [Literal],
    b: Bounds,
    idx: Vec<Const>,
    elem_pos: BTreeMap<Const, usize>,
    arr_pos: BTreeMap<Const, usize>,
    /// Distinct `diff` subterms, inner ones first.
    diffs: Vec<Term>,
    iv: BTreeMap<Const, usize>,
    chosen: Vec<DiffChoice>,
    nodes: u64,
    limit: u64,
}

/// Equalities and disequalities over element unknowns.
struct Problem {
    parent: Vec<usize>,
    neq: Vec<(usize, usize)>,
    /// At least one pair in each list must differ.
    some_neq: Vec<Vec<(usize, usize)>>,
}

impl Problem {
    fn new(n: usize) -> Self {
        Problem {
            parent: (0..n).collect(),
            neq: Vec::new(),
            some_neq: Vec::new(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.parent[r] != r {
            r = self.parent[r];
        }
        let mut y = x;
        while self.parent[y] != r {
            let next = self.parent[y];
            self.parent[y] = r;
            y = next;
        }
        r
    }

    fn union(&mut self, x: usize, y: usize) {
        let (rx, ry) = (self.find(x), self.find(y));
        if rx != ry {
            self.parent[rx.max(ry)] = rx.min(ry);
        }
    }

    /// Class of every unknown, numbered densely, if the constraints can hold
    /// with enough distinct values.
    fn classes(&mut self) -> Option<(Vec<usize>, usize)> {
        let n = self.parent.len();
        let roots: Vec<usize> = (0..n).map(|x| self.find(x)).collect();
        let mut ids = BTreeMap::new();
        let cls: Vec<usize> = roots
            .iter()
            .map(|r| {
                let k = ids.len();
                *ids.entry(*r).or_insert(k)
            })
            .collect();
        if self.neq.iter().any(|&(x, y)| cls[x] == cls[y]) {
            return None;
        }
        if self
            .some_neq
            .iter()
            .any(|ps| ps.iter().all(|&(x, y)| cls[x] == cls[y]))
        {
            return None;
        }
        Some((cls, ids.len()))
    }
}

/// Colours classes with at most `k` colours so that every disequality and
/// at least one pair of every disjunction get distinct colours.
fn colour(
    n_classes: usize,
    k: usize,
    neq: &[(usize, usize)],
    some_neq: &[Vec<(usize, usize)>],
    budget: &mut u64,
) -> Option<Vec<usize>> {
    if n_classes <= k {
        return Some((0..n_classes).collect());
    }
    fn go(
        c: usize,
        col: &mut Vec<usize>,
        k: usize,
        neq: &[(usize, usize)],
        some_neq: &[Vec<(usize, usize)>],
        budget: &mut u64,
    ) -> bool {
        if *budget == 0 {
            return false;
        }
        *budget -= 1;
        let n = col.len();
        let set = |x: usize| x < c;
        if neq.iter().any(|&(x, y)| set(x) && set(y) && col[x] == col[y]) {
            return false;
        }
        if some_neq
            .iter()
            .any(|ps| ps.iter().all(|&(x, y)| set(x) && set(y) && col[x] == col[y]))
        {
            return false;
        }
        if c == n {
            return true;
        }
        let top = col[..c].iter().copied().max().map_or(0, |m| m + 1).min(k - 1);
        for v in 0..=top {
            col[c] = v;
            if go(c + 1, col, k, neq, some_neq, budget) {
                return true;
            }
        }
        false
    }
    let mut col = vec![0; n_classes];
    go(0, &mut col, k, neq, some_neq, budget).then_some(col)
}

impl<'a> Search<'a> {
    fn n_unknowns(&self) -> usize {
        self.elem_pos.len() + self.arr_pos.len() * self.b.n_index
    }

    fn cell(&self, a: usize, p: usize) -> usize {
        self.elem_pos.len() + a * self.b.n_index + p
    }

    /// Evaluates `t`; `None` when it mentions a `diff` not chosen yet.
    fn eval(&self, t: &Term) -> Option<V> {
        match t {
            Term::Const(c) => Some(match c.sort() {
                Sort::Index => V::I(self.iv[c]),
                Sort::Elem => V::E(self.elem_pos[c]),
                Sort::Array => {
                    let a = self.arr_pos[c];
                    V::A((0..self.b.n_index).map(|p| self.cell(a, p)).collect())
                }
            }),
            Term::Var => None,
            Term::Rd(a, i) => match (self.eval(a)?, self.eval(i)?) {
                (V::A(cs), V::I(i)) => Some(V::E(cs[i])),
                _ => None,
            },
            Term::Wr(a, i, e) => match (self.eval(a)?, self.eval(i)?, self.eval(e)?) {
                (V::A(mut cs), V::I(i), V::E(e)) => {
                    cs[i] = e;
                    Some(V::A(cs))
                }
                _ => None,
            },
            Term::Diff(..) => {
                let k = self.diffs.iter().position(|d| d == t)?;
                self.chosen.get(k).map(|c| V::I(c.point))
            }
        }
    }

    /// Builds the element problem for everything decided so far, or `None`
    /// when an index literal is already false.
    fn problem(&self) -> Option<Problem> {
        let mut pr = Problem::new(self.n_unknowns());
        for l in self.lits {
            let (Some(x), Some(y)) = (self.eval(&l.lhs), self.eval(&l.rhs)) else { continue };
            match (x, y) {
                (V::I(x), V::I(y)) => {
                    if (x == y) != l.pos {
                        return None;
                    }
                }
                (V::E(x), V::E(y)) => {
                    if l.pos {
                        pr.union(x, y);
                    } else {
                        pr.neq.push((x, y));
                    }
                }
                (V::A(xs), V::A(ys)) => {
                    if l.pos {
                        for (x, y) in xs.into_iter().zip(ys) {
                            pr.union(x, y);
                        }
                    } else {
                        pr.some_neq.push(xs.into_iter().zip(ys).collect());
                    }
                }
                _ => unreachable!("sorts checked"),
            }
        }
        let mut args = Vec::new();
        for (d, ch) in self.diffs.iter().zip(&self.chosen) {
            let Term::Diff(s, t) = d else { unreachable!() };
            let (Some(V::A(xs)), Some(V::A(ys))) = (self.eval(s), self.eval(t)) else {
                unreachable!("inner diff terms are chosen first")
            };
            if ch.equal {
                for (x, y) in xs.iter().zip(&ys) {
                    pr.union(*x, *y);
                }
            } else {
                pr.neq.push((xs[ch.point], ys[ch.point]));
            }
            args.push((xs, ys, ch.point));
        }
        for (x, (s1, t1, p1)) in args.iter().enumerate() {
            for (s2, t2, p2) in &args[x + 1..] {
                if p1 != p2 {
                    let pairs = s1.iter().zip(s2).chain(t1.iter().zip(t2)).map(|(u, v)| (*u, *v));
                    pr.some_neq.push(pairs.collect());
                }
            }
        }
        Some(pr)
    }

    fn tick(&mut self) -> Result<(), OracleError> {
        self.nodes += 1;
        if self.nodes > self.limit {
            return Err(OracleError::Budget(self.limit));
        }
        Ok(())
    }

    fn used_points(&self) -> Option<usize> {
        let consts = self.iv.values().copied();
        consts.chain(self.chosen.iter().map(|c| c.point)).max()
    }

    /// Chooses `diff` values one subterm at a time, pruning on the partial
    /// problem.
    fn choose_diffs(&mut self) -> Result<Option<Model>, OracleError> {
        self.tick()?;
        let Some(mut pr) = self.problem() else { return Ok(None) };
        let Some((cls, n)) = pr.classes() else { return Ok(None) };
        if self.chosen.len() == self.diffs.len() {
            let remap = |ps: &[(usize, usize)]| ps.iter().map(|&(x, y)| (cls[x], cls[y])).collect::<Vec<_>>();
            let neq = remap(&pr.neq);
            let some: Vec<Vec<(usize, usize)>> = pr.some_neq.iter().map(|ps| remap(ps)).collect();
            let mut budget = self.limit.saturating_sub(self.nodes);
            let Some(col) = colour(n, self.b.n_elem, &neq, &some, &mut budget) else {
                if budget == 0 {
                    return Err(OracleError::Budget(self.limit));
                }
                return Ok(None);
            };
            return Ok(Some(self.model(&cls, &col)));
        }
        let top = self.used_points().map_or(0, |m| m + 1).min(self.b.n_index - 1);
        for equal in [false, true] {
            for point in 0..=top {
                self.chosen.push(DiffChoice { point, equal });
                let found = self.choose_diffs()?;
                self.chosen.pop();
                if found.is_some() {
                    return Ok(found);
                }
            }
        }
        Ok(None)
    }

    fn assign_indices(&mut self, pos: usize) -> Result<Option<Model>, OracleError> {
        if pos == self.idx.len() {
            return self.choose_diffs();
        }
        let c = self.idx[pos].clone();
        let top = self.iv.values().copied().max().map_or(0, |m| m + 1).min(self.b.n_index - 1);
        for v in 0..=top {
            self.iv.insert(c.clone(), v);
            if let Some(m) = self.assign_indices(pos + 1)? {
                return Ok(Some(m));
            }
        }
        self.iv.remove(&c);
        Ok(None)
    }

    fn model(&self, cls: &[usize], col: &[usize]) -> Model {
        let val = |u: usize| col[cls[u]];
        let mut m = Model {
            index_domain: (0..self.b.n_index).map(|k| format!("i{k}")).collect(),
            elem_domain: (0..self.b.n_elem).map(|k| format!("v{k}")).collect(),
            index_of: self.iv.clone(),
            ..Model::default()
        };
        for (c, &u) in &self.elem_pos {
            m.elem_of.insert(c.clone(), val(u));
        }
        for (c, &a) in &self.arr_pos {
            let row = (0..self.b.n_index).map(|p| val(self.cell(a, p))).collect();
            m.array_of.insert(c.clone(), row);
        }
        for (d, ch) in self.diffs.iter().zip(&self.chosen) {
            let Term::Diff(s, t) = d else { unreachable!() };
            let (Some(V::A(xs)), Some(V::A(ys))) = (self.eval(s), self.eval(t)) else { unreachable!() };
            let key = (xs.into_iter().map(val).collect(), ys.into_iter().map(val).collect());
            m.diff_table.insert(key, ch.point);
        }
        m
    }
}

/// Searches for a model of the literals within the bounds.
pub fn brute_force_sat(lits: &[Literal], b: Bounds) -> Result<OracleResult, OracleError> {
    brute_force_sat_limited(lits, b, NODE_LIMIT)
}

pub fn brute_force_sat_limited(lits: &[Literal], b: Bounds, limit: u64) -> Result<OracleResult, OracleError> {
    let min = Bounds::lemma(lits)?;
    if b.n_index < min.n_index || b.n_elem < min.n_elem {
        return Err(OracleError::BoundsTooSmall { given: b, min });
    }
    for l in lits {
        l.check_sorts()?;
    }
    let consts: BTreeSet<Const> = lits.iter().flat_map(|l| l.consts()).collect();
    let of = |s: Sort| consts.iter().filter(|c| c.sort() == s).cloned().collect::<Vec<_>>();
    let mut diffs: Vec<Term> = Vec::new();
    for l in lits {
        for side in [&l.lhs, &l.rhs] {
            for t in side.subterms() {
                if matches!(t, Term::Diff(..)) && !diffs.contains(t) {
                    diffs.push(t.clone());
                }
            }
        }
    }
    diffs.sort_by_key(|t| t.size());
    let mut s = Search {
        lits,
        b,
        idx: of(Sort::Index),
        elem_pos: of(Sort::Elem).into_iter().enumerate().map(|(k, c)| (c, k)).collect(),
        arr_pos: of(Sort::Array).into_iter().enumerate().map(|(k, c)| (c, k)).collect(),
        diffs,
        iv: BTreeMap::new(),
        chosen: Vec::new(),
        nodes: 0,
        limit,
    };
    let Some(m) = s.assign_indices(0)? else {
        return Ok(OracleResult::NoModelWithinBounds);
    };
    if !m.diff_table_ok() {
        return Err(OracleError::Disagreement("oracle diff table violates the diff axiom".into()));
    }
    if let Some(l) = m.first_false(lits)? {
        return Err(OracleError::Disagreement(format!("oracle model falsifies {l}")));
    }
    Ok(OracleResult::SatModel(m))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Validity {
    Valid,
    Invalid(String),
}

/// Options for [`validate_interpolant`].
#[derive(Clone, Copy, Debug, Default)]
pub struct ValidateOptions {
    /// Confirms every unsatisfiable leaf with the brute-force search.
    pub cross_check: bool,
}

/// Checks that `i` is an interpolant of `(a, b)`: `a` entails `i`, `i` is
/// inconsistent with `b`, and `i` only uses shared constants.
pub fn validate_interpolant(
    a: &[Literal],
    b: &[Literal],
    i: &Formula,
    opts: ValidateOptions,
) -> Result<Validity, OracleError> {
    let ca: BTreeSet<Const> = a.iter().flat_map(|l| l.consts()).collect();
    let cb: BTreeSet<Const> = b.iter().flat_map(|l| l.consts()).collect();
    let stray: Vec<String> = symbols_of(i)
        .into_iter()
        .filter(|c| !ca.contains(c) || !cb.contains(c))
        .map(|c| c.to_string())
        .collect();
    if !stray.is_empty() {
        return Ok(Validity::Invalid(format!("non-shared symbols {}", stray.join(", "))));
    }
    if consistent_with(a, &Formula::not(i.clone()), opts)? {
        return Ok(Validity::Invalid("A does not entail the interpolant".into()));
    }
    if consistent_with(b, i, opts)? {
        return Ok(Validity::Invalid("B and the interpolant are satisfiable".into()));
    }
    Ok(Validity::Valid)
}

/// Whether `base` together with `f` is satisfiable.
pub fn consistent_with(base: &[Literal], f: &Formula, opts: ValidateOptions) -> Result<bool, OracleError> {
    let mut lits = base.to_vec();
    tableau(&mut lits, vec![f.nnf()], opts)
}

fn leaf_sat(lits: &[Literal], opts: ValidateOptions) -> Result<bool, OracleError> {
    let sat = decide_sat(lits, &SatOptions::default())?.is_sat();
    if !sat && opts.cross_check {
        let b = Bounds::lemma(lits)?;
        if brute_force_sat(lits, b)?.is_sat() {
            return Err(OracleError::Disagreement(format!("{lits:?}")));
        }
    }
    Ok(sat)
}

fn tableau(lits: &mut Vec<Literal>, mut todo: Vec<Formula>, opts: ValidateOptions) -> Result<bool, OracleError> {
    while let Some(f) = todo.pop() {
        match f {
            Formula::True => {}
            Formula::False => return Ok(false),
            Formula::Atom(l) => lits.push(l),
            Formula::Not(g) => match *g {
                Formula::Atom(l) => lits.push(l.negate()),
                other => todo.push(Formula::not(other).nnf()),
            },
            Formula::And(gs) => todo.extend(gs),
            Formula::Or(gs) => {
                if !matches!(decide_sat(lits, &SatOptions::default())?, SatResult::Sat(_)) {
                    return Ok(false);
                }
                for g in gs {
                    let mut branch = lits.clone();
                    let mut rest = todo.clone();
                    rest.push(g);
                    if tableau(&mut branch, rest, opts)? {
                        return Ok(true);
                    }
                }
                return Ok(false);
            }
        }
    }
    leaf_sat(lits, opts)
}
