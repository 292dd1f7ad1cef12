//! Interpolating solver over pairs of constraints.
//!
//! The solver runs preprocessing and completion on the two components side
//! by side, copies shared literals across, and repairs literals that would
//! block merging. Every change is recorded as a metarule application in a
//! proof tree; when all leaves are closed the interpolant is read off the
//! tree from the leaves to the root.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::completion::{multiset_greater, next_step, CompletionError, Measure, Step};
use crate::ordering::{OrderingError, Precedence};
use crate::preprocess::{eliminate_array_disequalities_with, flatten_with};
use crate::rewrite::{rule_of, RewriteError, RewriteSystem, RuleShape};
use crate::satcheck::{
    decide_modular_sat, decide_sat, is_modular, precedence_of, Model, ModularVerdict, Modularity, SatError,
    SatOptions, SatResult,
};
use crate::terms::{Const, Constraint, Flat, Formula, FreshGen, Literal, Sort, Term, TermError};

/// Steps allowed on one branch before the run is abandoned.
const STEP_LIMIT: usize = 100_000;

#[derive(Debug, Error)]
pub enum InterpError {
    #[error(transparent)]
    Sat(#[from] SatError),
    #[error(transparent)]
    Completion(#[from] CompletionError),
    #[error(transparent)]
    Rewrite(#[from] RewriteError),
    #[error(transparent)]
    Ordering(#[from] OrderingError),
    #[error(transparent)]
    Term(#[from] TermError),
    #[error("proviso of {rule} violated: {reason}")]
    Proviso { rule: MetaruleKind, reason: String },
    #[error("pair measure did not decrease at {0}")]
    PairMeasure(String),
    #[error("degree did not decrease: {from} to {to}")]
    Degree { from: usize, to: usize },
    #[error("cannot mirror {0} in the other component")]
    Mirror(String),
    #[error("proof tree has an open leaf")]
    OpenLeaf,
    #[error("more than {0} branches")]
    Budget(usize),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

/// One of the two components.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Side {
    A,
    B,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::A => Side::B,
            Side::B => Side::A,
        }
    }
}

/// Where a literal or metarule lives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Component {
    A,
    B,
    AB,
}

impl From<Side> for Component {
    fn from(s: Side) -> Self {
        match s {
            Side::A => Component::A,
            Side::B => Component::B,
        }
    }
}

/// Locality of a constant.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Locality {
    AStrict,
    BStrict,
    Common,
}

/// The two signatures. Shared symbols are those in both.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SignaturePartition {
    pub a: BTreeSet<Const>,
    pub b: BTreeSet<Const>,
}

impl SignaturePartition {
    pub fn of(a: &[Literal], b: &[Literal]) -> Self {
        SignaturePartition {
            a: a.iter().flat_map(|l| l.consts()).collect(),
            b: b.iter().flat_map(|l| l.consts()).collect(),
        }
    }

    pub fn locality(&self, c: &Const) -> Option<Locality> {
        match (self.a.contains(c), self.b.contains(c)) {
            (true, true) => Some(Locality::Common),
            (true, false) => Some(Locality::AStrict),
            (false, true) => Some(Locality::BStrict),
            (false, false) => None,
        }
    }

    pub fn is_common(&self, c: &Const) -> bool {
        self.a.contains(c) && self.b.contains(c)
    }

    pub fn sig(&self, s: Side) -> &BTreeSet<Const> {
        match s {
            Side::A => &self.a,
            Side::B => &self.b,
        }
    }

    pub fn common(&self) -> BTreeSet<Const> {
        self.a.intersection(&self.b).cloned().collect()
    }

    pub fn term_common(&self, t: &Term) -> bool {
        t.consts().iter().all(|c| self.is_common(c))
    }

    pub fn lit_common(&self, l: &Literal) -> bool {
        l.consts().iter().all(|c| self.is_common(c))
    }

    pub fn lit_local(&self, s: Side, l: &Literal) -> bool {
        l.consts().iter().all(|c| self.sig(s).contains(c))
    }

    pub fn term_local(&self, s: Side, t: &Term) -> bool {
        t.consts().iter().all(|c| self.sig(s).contains(c))
    }
}

/// The metarules.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum MetaruleKind {
    Close1,
    Close2,
    Propagate1,
    Propagate2,
    Define0,
    Define1,
    Define2,
    Disjunction1,
    Disjunction2,
    Redplus1,
    Redplus2,
    Redminus1,
    Redminus2,
    ConstElim0,
    ConstElim1,
    ConstElim2,
}

impl fmt::Display for MetaruleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl MetaruleKind {
    fn side_variant(s: Side, a: MetaruleKind, b: MetaruleKind) -> MetaruleKind {
        match s {
            Side::A => a,
            Side::B => b,
        }
    }
}

/// Metarule arguments.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Payload {
    None,
    /// Close: the witness; Propagate and Red: the literals moved.
    Literals(Vec<Literal>),
    /// Define and ConstElim: the equation `name = term`.
    Definition { name: Const, term: Term },
    /// Disjunction: each alternative is a conjunction of literals.
    Disjuncts(Vec<Vec<Literal>>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Metarule {
    pub kind: MetaruleKind,
    pub payload: Payload,
}

impl Metarule {
    pub fn new(kind: MetaruleKind, payload: Payload) -> Self {
        Metarule { kind, payload }
    }
}

/// A node of the interpolation tree: two components over a shared
/// precedence, with their signatures.
#[derive(Clone, Debug)]
pub struct PairState {
    pub a: BTreeSet<Literal>,
    pub b: BTreeSet<Literal>,
    pub sig: SignaturePartition,
    pub prec: Precedence,
}

impl PairState {
    /// The root state; shared constants sit below strict ones of the same
    /// sort.
    pub fn new(a: &[Literal], b: &[Literal]) -> Self {
        let sig = SignaturePartition::of(a, b);
        let all: Vec<Literal> = a.iter().chain(b).cloned().collect();
        let first = precedence_of(&all);
        let mut prec = Precedence::new();
        for s in [Sort::Array, Sort::Index, Sort::Elem] {
            let asc = first.ascending(s);
            let (common, strict): (Vec<Const>, Vec<Const>) = asc.into_iter().partition(|c| sig.is_common(c));
            for c in common.into_iter().chain(strict) {
                prec.push_top(c);
            }
        }
        PairState {
            a: a.iter().cloned().collect(),
            b: b.iter().cloned().collect(),
            sig,
            prec,
        }
    }

    pub fn get(&self, s: Side) -> &BTreeSet<Literal> {
        match s {
            Side::A => &self.a,
            Side::B => &self.b,
        }
    }

    fn get_mut(&mut self, s: Side) -> &mut BTreeSet<Literal> {
        match s {
            Side::A => &mut self.a,
            Side::B => &mut self.b,
        }
    }

    pub fn constraint(&self, s: Side) -> Result<Constraint, TermError> {
        Constraint::from_literals(self.get(s).iter().cloned())
    }

    fn occurs_in(&self, s: Side, c: &Const) -> bool {
        self.get(s).iter().any(|l| l.consts().contains(c))
    }

    fn sig_mut(&mut self, s: Side) -> &mut BTreeSet<Const> {
        match s {
            Side::A => &mut self.sig.a,
            Side::B => &mut self.sig.b,
        }
    }

    /// Applies a metarule bottom-up and returns its premise states: none
    /// for the closing rules, several for a disjunction, one otherwise.
    pub fn apply(&self, m: &Metarule) -> Result<Vec<PairState>, InterpError> {
        use MetaruleKind as K;
        let bad = |reason: String| InterpError::Proviso { rule: m.kind, reason };
        let side_of = |k: K| match k {
            K::Close1 | K::Propagate1 | K::Define1 | K::Disjunction1 | K::Redplus1 | K::Redminus1 | K::ConstElim1 => {
                Some(Side::A)
            }
            K::Close2 | K::Propagate2 | K::Define2 | K::Disjunction2 | K::Redplus2 | K::Redminus2 | K::ConstElim2 => {
                Some(Side::B)
            }
            K::Define0 | K::ConstElim0 => None,
        };
        let side = side_of(m.kind);
        match (m.kind, &m.payload) {
            (K::Close1 | K::Close2, Payload::Literals(w)) => {
                let s = side.expect("closing rules are one-sided");
                if let Some(l) = w.iter().find(|l| !self.get(s).contains(l)) {
                    return Err(bad(format!("witness {l} is not in the component")));
                }
                Ok(vec![])
            }
            (K::Propagate1 | K::Propagate2, Payload::Literals(ls)) => {
                let s = side.expect("propagation is one-sided");
                let mut out = self.clone();
                for l in ls {
                    if !self.sig.lit_common(l) {
                        return Err(bad(format!("{l} is not shared")));
                    }
                    if !self.get(s).contains(l) {
                        return Err(bad(format!("{l} is not in the source component")));
                    }
                    out.get_mut(s.other()).insert(l.clone());
                }
                Ok(vec![out])
            }
            (K::Define0 | K::Define1 | K::Define2, Payload::Definition { name, term }) => {
                if self.sig.a.contains(name) || self.sig.b.contains(name) || term.consts().contains(name) {
                    return Err(bad(format!("{name} is not fresh")));
                }
                let lit = Literal::eq(Term::c(name), term.clone());
                let mut out = self.clone();
                match side {
                    None => {
                        if !self.sig.term_common(term) {
                            return Err(bad(format!("{term} is not shared")));
                        }
                        for s in [Side::A, Side::B] {
                            out.get_mut(s).insert(lit.clone());
                            out.sig_mut(s).insert(name.clone());
                        }
                    }
                    Some(s) => {
                        if !self.sig.term_local(s, term) {
                            return Err(bad(format!("{term} is not local")));
                        }
                        out.get_mut(s).insert(lit);
                        out.sig_mut(s).insert(name.clone());
                    }
                }
                Ok(vec![out])
            }
            (K::Disjunction1 | K::Disjunction2, Payload::Disjuncts(ds)) => {
                let s = side.expect("disjunction is one-sided");
                let mut outs = Vec::with_capacity(ds.len());
                for d in ds {
                    let mut out = self.clone();
                    for l in d {
                        if !self.sig.lit_local(s, l) {
                            return Err(bad(format!("{l} is not local")));
                        }
                        out.get_mut(s).insert(l.clone());
                    }
                    outs.push(out);
                }
                Ok(outs)
            }
            (K::Redplus1 | K::Redplus2, Payload::Literals(ls)) => {
                let s = side.expect("one-sided");
                let mut out = self.clone();
                for l in ls {
                    if !self.sig.lit_local(s, l) {
                        return Err(bad(format!("{l} is not local")));
                    }
                    out.get_mut(s).insert(l.clone());
                }
                Ok(vec![out])
            }
            (K::Redminus1 | K::Redminus2, Payload::Literals(ls)) => {
                let s = side.expect("one-sided");
                let mut out = self.clone();
                for l in ls {
                    if !out.get_mut(s).remove(l) {
                        return Err(bad(format!("{l} is not in the component")));
                    }
                }
                Ok(vec![out])
            }
            (K::ConstElim0 | K::ConstElim1 | K::ConstElim2, Payload::Definition { name, term }) => {
                let lit = Literal::eq(Term::c(name), term.clone());
                let sides: Vec<Side> = match side {
                    None => {
                        if !self.sig.is_common(name) {
                            return Err(bad(format!("{name} is not shared")));
                        }
                        vec![Side::A, Side::B]
                    }
                    Some(s) => {
                        if self.sig.locality(name) == Some(Locality::Common) {
                            return Err(bad(format!("{name} is shared")));
                        }
                        vec![s]
                    }
                };
                let mut out = self.clone();
                for s in sides {
                    if !out.get_mut(s).remove(&lit) {
                        return Err(bad(format!("{lit} is not in the component")));
                    }
                    if out.occurs_in(s, name) || term.consts().contains(name) {
                        return Err(bad(format!("{name} still occurs")));
                    }
                }
                Ok(vec![out])
            }
            _ => Err(bad("payload does not fit the rule".into())),
        }
    }
}

/// One metarule application in the tree.
#[derive(Clone, Debug)]
pub struct ProofNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub rule: Metarule,
    pub component: Component,
    pub added: Vec<Literal>,
    pub removed: Vec<Literal>,
    pub children: Vec<usize>,
}

/// An interpolation tree. Node 0 is the root; children always have larger
/// ids than their parent.
#[derive(Clone, Debug, Default)]
pub struct ProofTree {
    pub root_a: Vec<Literal>,
    pub root_b: Vec<Literal>,
    pub nodes: Vec<ProofNode>,
}

impl ProofTree {
    /// The tree as a JSON array of nodes.
    pub fn to_json(&self, partial: Option<&[Formula]>) -> Json {
        let strs = |ls: &[Literal]| ls.iter().map(|l| l.to_string()).collect::<Vec<_>>();
        let nodes: Vec<Json> = self
            .nodes
            .iter()
            .map(|n| {
                let payload = match &n.rule.payload {
                    Payload::None => Json::Null,
                    Payload::Literals(ls) => json!(strs(ls)),
                    Payload::Definition { name, term } => json!({"name": name.to_string(), "term": term.to_string()}),
                    Payload::Disjuncts(ds) => json!(ds.iter().map(|d| strs(d)).collect::<Vec<_>>()),
                };
                let mut o = json!({
                    "id": n.id,
                    "parent": n.parent,
                    "rule": n.rule.kind.to_string(),
                    "payload": payload,
                    "component": format!("{:?}", n.component),
                    "added": strs(&n.added),
                    "removed": strs(&n.removed),
                });
                if let Some(p) = partial {
                    o["interpolant"] = json!(p[n.id].to_string());
                }
                o
            })
            .collect();
        Json::Array(nodes)
    }
}

/// Interpolant of every node, computed from the leaves up.
pub fn reconstruct_all(tree: &ProofTree) -> Result<Vec<Formula>, InterpError> {
    use MetaruleKind as K;
    let mut phi: Vec<Option<Formula>> = vec![None; tree.nodes.len()];
    for n in tree.nodes.iter().rev() {
        let kids: Vec<Formula> = n
            .children
            .iter()
            .map(|&c| phi[c].clone().ok_or(InterpError::OpenLeaf))
            .collect::<Result<_, _>>()?;
        let only = || kids.first().cloned().ok_or(InterpError::OpenLeaf);
        let f = match (n.rule.kind, &n.rule.payload) {
            (K::Close1, _) => Formula::False,
            (K::Close2, _) => Formula::True,
            (K::Propagate1, Payload::Literals(ls)) => {
                let mut v = vec![only()?];
                v.extend(ls.iter().cloned().map(Formula::Atom));
                Formula::And(v)
            }
            (K::Propagate2, Payload::Literals(ls)) => {
                let psi = Formula::And(ls.iter().cloned().map(Formula::Atom).collect());
                Formula::implies(psi, only()?)
            }
            (K::Define0, Payload::Definition { name, term }) => {
                let map = BTreeMap::from([(name.clone(), term.clone())]);
                only()?.subst(&map)
            }
            (K::Disjunction1, _) => Formula::Or(kids),
            (K::Disjunction2, _) => Formula::And(kids),
            _ => only()?,
        };
        phi[n.id] = Some(f);
    }
    phi.into_iter().map(|f| f.ok_or(InterpError::OpenLeaf)).collect()
}

/// The interpolant of a closed tree.
pub fn reconstruct(tree: &ProofTree) -> Result<Formula, InterpError> {
    if tree.nodes.is_empty() {
        return Err(InterpError::OpenLeaf);
    }
    Ok(reconstruct_all(tree)?.swap_remove(0))
}

/// Constant folding, flattening, deduplication and absorption.
pub fn simplify(f: &Formula) -> Formula {
    match f {
        Formula::True | Formula::False => f.clone(),
        Formula::Atom(l) => {
            if l.lhs == l.rhs {
                if l.pos {
                    Formula::True
                } else {
                    Formula::False
                }
            } else {
                f.clone()
            }
        }
        Formula::Not(g) => match simplify(g) {
            Formula::True => Formula::False,
            Formula::False => Formula::True,
            Formula::Atom(l) => Formula::Atom(l.negate()),
            Formula::Not(h) => *h,
            h => Formula::not(h),
        },
        Formula::And(fs) => junction(fs, true),
        Formula::Or(fs) => junction(fs, false),
    }
}

fn junction(fs: &[Formula], conj: bool) -> Formula {
    let (unit, zero) = if conj {
        (Formula::True, Formula::False)
    } else {
        (Formula::False, Formula::True)
    };
    let mut parts: Vec<Formula> = Vec::new();
    for g in fs {
        let g = simplify(g);
        if g == unit {
            continue;
        }
        if g == zero {
            return zero;
        }
        match g {
            Formula::And(hs) if conj => parts.extend(hs),
            Formula::Or(hs) if !conj => parts.extend(hs),
            g => parts.push(g),
        }
    }
    parts.sort();
    parts.dedup();
    for p in &parts {
        if let Formula::Atom(l) = p {
            if parts.contains(&Formula::Atom(l.negate())) {
                return zero;
            }
        }
    }
    // p & (p | q) = p and p | (p & q) = p
    let snapshot = parts.clone();
    parts.retain(|p| {
        let inner = match (p, conj) {
            (Formula::Or(hs), true) | (Formula::And(hs), false) => hs,
            _ => return true,
        };
        !inner.iter().any(|h| snapshot.contains(h))
    });
    match parts.len() {
        0 => unit,
        1 => parts.pop().expect("one part"),
        _ => {
            if conj {
                Formula::And(parts)
            } else {
                Formula::Or(parts)
            }
        }
    }
}

/// Literals blocking the merge of the two components.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MergeVerdict {
    Mergeable,
    Blocked(Vec<Literal>),
}

/// Shapes of undesired literals.
#[derive(Clone, Debug, PartialEq, Eq)]
enum Undesired {
    /// A shared left-hand side rewriting to a non-shared constant.
    SharedLhs { side: Side, lit: Literal, alpha: Const, t: Term },
    /// A non-shared constant rewriting to a shared write tower.
    SharedRhs { side: Side, lit: Literal, alpha: Const, t: Term },
    /// An unsuitable literal whose tower is not yet in normal form.
    Unnormalized { side: Side, lit: Literal, normal: Literal },
    /// `c -> wr(c',I,E)` with shared `c` and a non-shared tower.
    Unsuitable {
        side: Side,
        lit: Literal,
        c: Const,
        base: Const,
        writes: Vec<(Const, Const)>,
    },
}

impl Undesired {
    fn literal(&self) -> &Literal {
        match self {
            Undesired::SharedLhs { lit, .. }
            | Undesired::SharedRhs { lit, .. }
            | Undesired::Unnormalized { lit, .. }
            | Undesired::Unsuitable { lit, .. } => lit,
        }
    }
}

fn undesired(st: &PairState) -> Result<Vec<Undesired>, InterpError> {
    let sig = &st.sig;
    let mut out = Vec::new();
    for side in [Side::A, Side::B] {
        for l in st.get(side) {
            if let Some(Flat::Diff { a, b, i }) = l.flat() {
                if sig.is_common(&a) && sig.is_common(&b) && !sig.is_common(&i) {
                    let t = Term::diff(Term::c(&a), Term::c(&b));
                    out.push(Undesired::SharedLhs {
                        side,
                        lit: l.clone(),
                        alpha: i,
                        t,
                    });
                }
                continue;
            }
            let Some(r) = rule_of(l, &st.prec)? else { continue };
            let lhs_common = sig.term_common(&r.lhs);
            let rhs_common = sig.term_common(&r.rhs);
            if lhs_common && !rhs_common {
                match (&r.rhs, r.shape) {
                    (Term::Const(k), _) => out.push(Undesired::SharedLhs {
                        side,
                        lit: l.clone(),
                        alpha: k.clone(),
                        t: r.lhs.clone(),
                    }),
                    (_, RuleShape::ArrayDef) => {
                        let (base, ws) = r.rhs.decompose_tower();
                        let writes = ws
                            .iter()
                            .map(|(i, e)| (i.as_const().cloned(), e.as_const().cloned()))
                            .map(|(i, e)| i.zip(e))
                            .collect::<Option<Vec<_>>>();
                        let (Some(c), Some(base), Some(writes)) = (r.lhs.as_const(), base.as_const(), writes) else {
                            return Err(InterpError::Invariant(format!("non-flat rule {l}")));
                        };
                        out.push(Undesired::Unsuitable {
                            side,
                            lit: l.clone(),
                            c: c.clone(),
                            base: base.clone(),
                            writes,
                        });
                    }
                    _ => return Err(InterpError::Invariant(format!("unexpected undesired rule {l}"))),
                }
            } else if !lhs_common && rhs_common && r.shape == RuleShape::ArrayDef {
                if let Term::Const(a) = &r.lhs {
                    out.push(Undesired::SharedRhs {
                        side,
                        lit: l.clone(),
                        alpha: a.clone(),
                        t: r.rhs.clone(),
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Checks the merge conditions: shared literals are in both components,
/// shared left-hand sides have shared right-hand sides, `diff` of shared
/// arrays is shared, and shared towers have shared left-hand sides.
pub fn merge_check(st: &PairState) -> Result<MergeVerdict, InterpError> {
    let mut blocked: Vec<Literal> = Vec::new();
    for side in [Side::A, Side::B] {
        for l in st.get(side) {
            if st.sig.lit_common(l) && !st.get(side.other()).contains(l) {
                blocked.push(l.clone());
            }
        }
    }
    blocked.extend(undesired(st)?.iter().map(|u| u.literal().clone()));
    blocked.sort();
    blocked.dedup();
    Ok(if blocked.is_empty() {
        MergeVerdict::Mergeable
    } else {
        MergeVerdict::Blocked(blocked)
    })
}

/// Number of write positions whose index or element is not shared.
pub fn degree(sig: &SignaturePartition, writes: &[(Const, Const)]) -> usize {
    writes
        .iter()
        .filter(|(i, e)| !(sig.is_common(i) && sig.is_common(e)))
        .count()
}

type PairMeasure = Vec<(Vec<Term>, u8)>;

/// Multiset of `<literal multiset, tag>` pairs; the tag is 0 for literals
/// in both components, 1 for A only and 2 for B only.
pub fn pair_measure(st: &PairState) -> PairMeasure {
    let mut out = Vec::new();
    for l in st.a.union(&st.b) {
        let tag = match (st.a.contains(l), st.b.contains(l)) {
            (true, true) => 0,
            (true, false) => 1,
            _ => 2,
        };
        out.push((Measure::of([l]).0.remove(0), tag));
    }
    out
}

/// Strict comparison of pair measures.
pub fn pair_measure_greater(m: &PairMeasure, n: &PairMeasure, prec: &Precedence) -> bool {
    let term_gt = |s: &Term, t: &Term| prec.term_gt(s, t);
    let gt = |x: &(Vec<Term>, u8), y: &(Vec<Term>, u8)| {
        multiset_greater(&x.0, &y.0, &term_gt) || (x.0 == y.0 && x.1 > y.1)
    };
    multiset_greater(m, n, &gt)
}

/// Shared constants must sit below strict ones of the same sort.
fn check_bands(st: &PairState) -> Result<(), InterpError> {
    for s in [Sort::Array, Sort::Index, Sort::Elem] {
        let mut seen_strict: Option<Const> = None;
        for c in st.prec.ascending(s) {
            match (st.sig.is_common(&c), &seen_strict) {
                (true, Some(x)) => return Err(InterpError::Invariant(format!("shared {c} above strict {x}"))),
                (false, None) => seen_strict = Some(c),
                _ => {}
            }
        }
    }
    Ok(())
}

/// Options for [`interpolate`].
#[derive(Clone, Debug)]
pub struct InterpOptions {
    /// Shuffles the order in which index pairs are decided.
    pub seed: Option<u64>,
    /// Upper bound on branches over the whole tree.
    pub max_branches: usize,
    /// Simplifies the reconstructed interpolant.
    pub simplify: bool,
    /// Answers `Sat` up front when `A ∪ B` is satisfiable, and closes a
    /// branch early when one component is unsatisfiable on its own.
    /// Without it every branch runs to a failure or a modular leaf.
    pub prune: bool,
}

impl Default for InterpOptions {
    fn default() -> Self {
        InterpOptions {
            seed: None,
            max_branches: 100_000,
            simplify: true,
            prune: true,
        }
    }
}

/// Counters collected while building a tree.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct InterpStats {
    pub branches: usize,
    pub alpha_steps: usize,
    pub mirrored_steps: usize,
    pub term_sharings: usize,
    pub unsuitable_fixes: usize,
    pub degree_checks: usize,
    pub modular_leaves: usize,
}

#[derive(Clone, Debug)]
pub enum InterpResult {
    Unsat {
        interpolant: Formula,
        raw: Formula,
        tree: ProofTree,
        stats: InterpStats,
    },
    Sat(Model),
}

impl InterpResult {
    pub fn is_unsat(&self) -> bool {
        matches!(self, InterpResult::Unsat { .. })
    }
}

enum Run {
    Closed,
    Open(Model),
}

struct Engine<'o> {
    opts: &'o InterpOptions,
    gen: FreshGen,
    rng: Option<ChaCha8Rng>,
    tree: ProofTree,
    stats: InterpStats,
    raw: Vec<Literal>,
}

type Cursor = Option<usize>;

impl Engine<'_> {
    fn push(&mut self, at: Cursor, rule: Metarule, component: Component, added: Vec<Literal>, removed: Vec<Literal>) -> usize {
        let id = self.tree.nodes.len();
        self.tree.nodes.push(ProofNode {
            id,
            parent: at,
            rule,
            component,
            added,
            removed,
            children: vec![],
        });
        if let Some(p) = at {
            self.tree.nodes[p].children.push(id);
        }
        id
    }

    /// Applies a unary metarule and moves the cursor to its node.
    fn apply(&mut self, st: &mut PairState, at: &mut Cursor, rule: Metarule) -> Result<(), InterpError> {
        let next = st
            .apply(&rule)?
            .pop()
            .ok_or_else(|| InterpError::Invariant(format!("{} is not unary", rule.kind)))?;
        let mut added = Vec::new();
        let mut removed = Vec::new();
        let mut comps = BTreeSet::new();
        for s in [Side::A, Side::B] {
            let (old, new) = (st.get(s), next.get(s));
            for l in new.difference(old) {
                added.push(l.clone());
                comps.insert(s);
            }
            for l in old.difference(new) {
                removed.push(l.clone());
                comps.insert(s);
            }
        }
        added.dedup();
        removed.dedup();
        let component = match (comps.contains(&Side::A), comps.contains(&Side::B)) {
            (true, true) => Component::AB,
            (false, true) => Component::B,
            _ => Component::A,
        };
        *at = Some(self.push(*at, rule, component, added, removed));
        *st = next;
        Ok(())
    }

    fn close(&mut self, st: &PairState, at: Cursor, side: Side, witness: Vec<Literal>) -> Result<Run, InterpError> {
        let kind = MetaruleKind::side_variant(side, MetaruleKind::Close1, MetaruleKind::Close2);
        let rule = Metarule::new(kind, Payload::Literals(witness));
        st.apply(&rule)?;
        self.push(at, rule, side.into(), vec![], vec![]);
        Ok(Run::Closed)
    }

    /// Closes the branch when one component is unsatisfiable on its own.
    fn try_close(&mut self, st: &PairState, at: Cursor) -> Result<Option<Run>, InterpError> {
        if !self.opts.prune {
            return Ok(None);
        }
        for side in [Side::A, Side::B] {
            let lits: Vec<Literal> = st.get(side).iter().cloned().collect();
            if let SatResult::Unsat = decide_sat(&lits, &SatOptions::default())? {
                return Ok(Some(self.close(st, at, side, vec![])?));
            }
        }
        Ok(None)
    }

    /// Redplus for `added`, then Redminus for `removed`, in one component.
    fn replace(
        &mut self,
        st: &mut PairState,
        at: &mut Cursor,
        side: Side,
        removed: &[Literal],
        added: &[Literal],
    ) -> Result<(), InterpError> {
        let plus: Vec<Literal> = added
            .iter()
            .filter(|l| !st.get(side).contains(*l))
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let minus: Vec<Literal> = removed
            .iter()
            .filter(|l| !added.contains(l) && st.get(side).contains(*l))
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if !plus.is_empty() {
            let k = MetaruleKind::side_variant(side, MetaruleKind::Redplus1, MetaruleKind::Redplus2);
            self.apply(st, at, Metarule::new(k, Payload::Literals(plus)))?;
        }
        if !minus.is_empty() {
            let k = MetaruleKind::side_variant(side, MetaruleKind::Redminus1, MetaruleKind::Redminus2);
            self.apply(st, at, Metarule::new(k, Payload::Literals(minus)))?;
        }
        Ok(())
    }

    /// Places a fresh constant: shared ones go directly below the least
    /// strict constant of their sort, strict ones on top.
    fn place(st: &mut PairState, c: &Const, common: bool, pending: &BTreeMap<Const, bool>) -> Result<(), InterpError> {
        if !common {
            st.prec.push_top(c.clone());
            return Ok(());
        }
        let least_strict = st
            .prec
            .ascending(c.sort())
            .into_iter()
            .find(|k| !st.sig.is_common(k) && pending.get(k) != Some(&true));
        match least_strict {
            Some(s) => st.prec.insert_below(c.clone(), &s)?,
            None => st.prec.push_top(c.clone()),
        }
        Ok(())
    }

    /// A constant equal to `t`, defined by Define0 when `t` is shared and
    /// by Define1/Define2 otherwise. Reuses an existing shared name.
    fn define(&mut self, st: &mut PairState, at: &mut Cursor, t: &Term, side: Side) -> Result<Const, InterpError> {
        let common = st.sig.term_common(t);
        if common {
            for l in st.a.iter().chain(st.b.iter()) {
                if !l.pos {
                    continue;
                }
                let other = if l.lhs == *t {
                    &l.rhs
                } else if l.rhs == *t {
                    &l.lhs
                } else {
                    continue;
                };
                if let Term::Const(k) = other {
                    if st.sig.is_common(k) {
                        return Ok(k.clone());
                    }
                }
            }
        }
        let c = self.gen.fresh(t.sort());
        Self::place(st, &c, common, &BTreeMap::new())?;
        let kind = if common {
            MetaruleKind::Define0
        } else {
            MetaruleKind::side_variant(side, MetaruleKind::Define1, MetaruleKind::Define2)
        };
        self.apply(
            st,
            at,
            Metarule::new(
                kind,
                Payload::Definition {
                    name: c.clone(),
                    term: t.clone(),
                },
            ),
        )?;
        Ok(c)
    }

    /// Replaces `from` by `to` given the equation `from = to`, then drops
    /// the equation. Shared constants are eliminated in both components.
    fn eliminate(&mut self, st: &mut PairState, at: &mut Cursor, side: Side, from: &Const, to: &Const) -> Result<(), InterpError> {
        let eq = Literal::eq(Term::c(from), Term::c(to));
        let shared = st.sig.is_common(from);
        let sides = if shared { vec![Side::A, Side::B] } else { vec![side] };
        let map = BTreeMap::from([(from.clone(), Term::c(to))]);
        for s in &sides {
            if !st.get(*s).contains(&eq) {
                return Err(InterpError::Invariant(format!(
                    "missing {eq} before elimination (from {:?}, to {:?}, gt {})",
                    st.sig.locality(from),
                    st.sig.locality(to),
                    st.prec.gt(from, to)
                )));
            }
            let old: Vec<Literal> = st
                .get(*s)
                .iter()
                .filter(|l| **l != eq && l.consts().contains(from))
                .cloned()
                .collect();
            let new: Vec<Literal> = old
                .iter()
                .map(|l| l.subst(&map))
                .filter(|l| !(l.pos && l.lhs == l.rhs))
                .collect();
            self.replace(st, at, *s, &old, &new)?;
        }
        let kind = if shared {
            MetaruleKind::ConstElim0
        } else {
            MetaruleKind::side_variant(side, MetaruleKind::ConstElim1, MetaruleKind::ConstElim2)
        };
        self.apply(
            st,
            at,
            Metarule::new(
                kind,
                Payload::Definition {
                    name: from.clone(),
                    term: Term::c(to),
                },
            ),
        )
    }

    fn preprocess(&mut self, st: &mut PairState, at: &mut Cursor) -> Result<(), InterpError> {
        let mut cache: BTreeMap<Term, Const> = BTreeMap::new();
        for side in [Side::A, Side::B] {
            let lits: Vec<Literal> = st.get(side).iter().cloned().collect();
            let (flat, defs) = {
                let mut defs: Vec<(Const, Term, bool)> = Vec::new();
                let mut pending: BTreeMap<Const, bool> = BTreeMap::new();
                let gen = &mut self.gen;
                let stv: &mut PairState = st;
                let mut err = None;
                let mut namer = |t: &Term| {
                    let common = t
                        .consts()
                        .iter()
                        .all(|c| stv.sig.is_common(c) || pending.get(c) == Some(&true));
                    if common {
                        if let Some(k) = cache.get(t) {
                            return k.clone();
                        }
                    }
                    let k = gen.fresh(t.sort());
                    if let Err(e) = Self::place(stv, &k, common, &pending) {
                        err = Some(e);
                    }
                    pending.insert(k.clone(), common);
                    if common {
                        cache.insert(t.clone(), k.clone());
                    }
                    defs.push((k.clone(), t.clone(), common));
                    k
                };
                let flat = flatten_with(&lits, &mut namer)?;
                let c = Constraint::from_literals(flat.literals)?;
                let c = eliminate_array_disequalities_with(&c, &mut namer)?;
                if let Some(e) = err {
                    return Err(e);
                }
                (c, defs)
            };
            for (k, t, common) in defs {
                let kind = if common {
                    MetaruleKind::Define0
                } else {
                    MetaruleKind::side_variant(side, MetaruleKind::Define1, MetaruleKind::Define2)
                };
                self.apply(st, at, Metarule::new(kind, Payload::Definition { name: k, term: t }))?;
            }
            let new: Vec<Literal> = flat.iter().cloned().collect();
            let old: Vec<Literal> = lits.into_iter().filter(|l| !flat.contains(l)).collect();
            self.replace(st, at, side, &old, &new)?;
        }
        Ok(())
    }

    /// Copies one shared literal to the component that lacks it.
    fn propagate_one(&mut self, st: &mut PairState, at: &mut Cursor) -> Result<bool, InterpError> {
        for side in [Side::A, Side::B] {
            let missing = st
                .get(side)
                .iter()
                .find(|l| st.sig.lit_common(l) && !st.get(side.other()).contains(*l))
                .cloned();
            if let Some(l) = missing {
                let before = pair_measure(st);
                let kind = MetaruleKind::side_variant(side, MetaruleKind::Propagate1, MetaruleKind::Propagate2);
                self.apply(st, at, Metarule::new(kind, Payload::Literals(vec![l.clone()])))?;
                if !pair_measure_greater(&before, &pair_measure(st), &st.prec) {
                    return Err(InterpError::PairMeasure(format!("propagation of {l}")));
                }
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Eliminates the greater side of one index equality.
    fn index_equality(&mut self, st: &mut PairState, at: &mut Cursor) -> Result<bool, InterpError> {
        for side in [Side::A, Side::B] {
            let found = st.get(side).iter().find_map(|l| match l.flat() {
                Some(Flat::IdxEq(i, j)) if i != j => Some((i, j)),
                _ => None,
            });
            if let Some((i, j)) = found {
                let (from, to) = if st.prec.gt(&i, &j) { (i, j) } else { (j, i) };
                self.eliminate(st, at, side, &from, &to)?;
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// An index pair of one component that is not yet asserted distinct.
    fn undecided_pair(&mut self, st: &PairState) -> Option<(Side, Const, Const)> {
        let mut cands = Vec::new();
        for side in [Side::A, Side::B] {
            let idx: Vec<Const> = st
                .get(side)
                .iter()
                .flat_map(|l| l.consts())
                .filter(|c| c.sort() == Sort::Index)
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            for (x, i) in idx.iter().enumerate() {
                for j in &idx[x + 1..] {
                    if !st.get(side).contains(&Literal::neq(Term::c(i), Term::c(j))) {
                        let s = if st.sig.is_common(i) && st.sig.is_common(j) {
                            Side::A
                        } else {
                            side
                        };
                        cands.push((s, i.clone(), j.clone()));
                    }
                }
            }
            if !cands.is_empty() {
                break;
            }
        }
        match &mut self.rng {
            Some(r) => cands.choose(r).cloned(),
            None => cands.into_iter().next(),
        }
    }

    fn disjunction(&mut self, st: &PairState, at: Cursor, side: Side, ds: Vec<Vec<Literal>>) -> Result<(usize, Vec<PairState>), InterpError> {
        self.stats.branches += ds.len();
        if self.stats.branches > self.opts.max_branches {
            return Err(InterpError::Budget(self.opts.max_branches));
        }
        let kind = MetaruleKind::side_variant(side, MetaruleKind::Disjunction1, MetaruleKind::Disjunction2);
        let rule = Metarule::new(kind, Payload::Disjuncts(ds));
        let kids = st.apply(&rule)?;
        let id = self.push(at, rule, side.into(), vec![], vec![]);
        Ok((id, kids))
    }

    fn explore(&mut self, id: usize, kids: Vec<PairState>) -> Result<Run, InterpError> {
        for k in kids {
            if let Run::Open(m) = self.solve(k, Some(id))? {
                return Ok(Run::Open(m));
            }
        }
        Ok(Run::Closed)
    }

    /// Adds names for reads of occurring arrays at occurring indices that do
    /// not reduce to an element constant.
    fn saturate(&mut self, st: &mut PairState, at: &mut Cursor) -> Result<bool, InterpError> {
        for side in [Side::A, Side::B] {
            let c = st.constraint(side)?;
            let missing: BTreeSet<Term> = {
                let rs = RewriteSystem::from_literals(c.main.iter(), &st.prec)?;
                let consts = c.consts();
                let mut out = BTreeSet::new();
                for a in consts.iter().filter(|k| k.sort() == Sort::Array) {
                    for i in consts.iter().filter(|k| k.sort() == Sort::Index) {
                        let nf = rs.normalize(&Term::rd(Term::c(a), Term::c(i)))?;
                        if !nf.is_const() {
                            out.insert(nf);
                        }
                    }
                }
                out
            };
            if missing.is_empty() {
                continue;
            }
            for t in missing {
                self.define(st, at, &t, side)?;
            }
            return Ok(true);
        }
        Ok(false)
    }

    /// Renames the strict constant `alpha` of `alpha = t` to a shared one.
    fn term_share(&mut self, st: &mut PairState, at: &mut Cursor, side: Side, lit: &Literal, alpha: &Const, t: &Term) -> Result<(), InterpError> {
        self.stats.term_sharings += 1;
        let shared = self.define(st, at, t, side)?;
        let eq = Literal::eq(Term::c(alpha), Term::c(&shared));
        self.replace(st, at, side, std::slice::from_ref(lit), std::slice::from_ref(&eq))?;
        self.eliminate(st, at, side, alpha, &shared)
    }

    /// Splits an unsuitable `c -> wr(c',I,E)` on whether `c = wr(c',I1,E1)`.
    fn fix_unsuitable(
        &mut self,
        st: PairState,
        at: Cursor,
        side: Side,
        lit: Literal,
        c: Const,
        base: Const,
        writes: Vec<(Const, Const)>,
    ) -> Result<Run, InterpError> {
        self.stats.unsuitable_fixes += 1;
        if !st.sig.is_common(&base) {
            return Err(InterpError::Invariant(format!("base of {lit} is not shared")));
        }
        let (w1, w2): (Vec<_>, Vec<_>) = writes
            .into_iter()
            .partition(|(i, e)| st.sig.is_common(i) && st.sig.is_common(e));
        let n = w2.len();
        let tower = |b: &Const, ws: &[(Const, Const)]| {
            ws.iter()
                .fold(Term::c(b), |acc, (i, e)| Term::wr(acc, Term::c(i), Term::c(e)))
        };
        let t1 = tower(&base, &w1);
        let psi = Literal::eq(Term::c(&c), t1.clone());
        let before = pair_measure(&st);
        let (id, mut kids) = self.disjunction(&st, at, side, vec![vec![psi.clone()], vec![psi.negate()]])?;
        let mut neg = kids.pop().expect("two branches");
        let mut pos = kids.pop().expect("two branches");

        let mut cur = Some(id);
        let reads: Vec<Literal> = w2
            .iter()
            .map(|(i, e)| Literal::eq(Term::rd(Term::c(&base), Term::c(i)), Term::c(e)))
            .collect();
        self.replace(&mut pos, &mut cur, side, std::slice::from_ref(&lit), &reads)?;
        if !pair_measure_greater(&before, &pair_measure(&pos), &pos.prec) {
            return Err(InterpError::PairMeasure(format!("splitting {lit}")));
        }
        if let Run::Open(m) = self.solve(pos, cur)? {
            return Ok(Run::Open(m));
        }

        let mut cur = Some(id);
        let st2 = &mut neg;
        let c2 = if w1.is_empty() {
            base.clone()
        } else {
            let k = self.gen.fresh(Sort::Array);
            st2.prec.insert_between(k.clone(), &base, &c)?;
            self.apply(
                st2,
                &mut cur,
                Metarule::new(
                    MetaruleKind::Define0,
                    Payload::Definition {
                        name: k.clone(),
                        term: t1.clone(),
                    },
                ),
            )?;
            let neq = Literal::neq(Term::c(&c), Term::c(&k));
            self.replace(st2, &mut cur, side, &[psi.negate()], &[neq])?;
            k
        };
        let relit = Literal::eq(Term::c(&c), tower(&c2, &w2));
        self.replace(st2, &mut cur, side, std::slice::from_ref(&lit), std::slice::from_ref(&relit))?;
        let i = self.define(st2, &mut cur, &Term::diff(Term::c(&c), Term::c(&c2)), side)?;
        let d = self.define(st2, &mut cur, &Term::rd(Term::c(&c), Term::c(&i)), side)?;
        let d2 = self.define(st2, &mut cur, &Term::rd(Term::c(&c2), Term::c(&i)), side)?;
        let arr_neq = Literal::neq(Term::c(&c), Term::c(&c2));
        let el_neq = Literal::neq(Term::c(&d), Term::c(&d2));
        self.replace(st2, &mut cur, side, &[arr_neq], &[el_neq])?;
        let ds: Vec<Vec<Literal>> = w2
            .iter()
            .map(|(ik, ek)| {
                vec![
                    Literal::eq(Term::c(&i), Term::c(ik)),
                    Literal::eq(Term::c(&d), Term::c(ek)),
                ]
            })
            .collect();
        let (id2, kids) = self.disjunction(st2, cur, side, ds)?;
        for (k, mut sk) in kids.into_iter().enumerate() {
            let mut cur = Some(id2);
            let (ik, ek) = &w2[k];
            let mut map = BTreeMap::new();
            if !sk.sig.is_common(ik) && ik != &i {
                self.eliminate(&mut sk, &mut cur, side, ik, &i)?;
                map.insert(ik.clone(), Term::c(&i));
            }
            if !sk.sig.is_common(ek) && ek != &d {
                self.eliminate(&mut sk, &mut cur, side, ek, &d)?;
                map.insert(ek.clone(), Term::c(&d));
            }
            let after = relit.subst(&map);
            let new_degree = match after.flat() {
                Some(Flat::ArrEq { writes, .. }) => degree(&sk.sig, &writes),
                _ => 0,
            };
            self.stats.degree_checks += 1;
            if new_degree >= n {
                return Err(InterpError::Degree { from: n, to: new_degree });
            }
            if let Run::Open(m) = self.solve(sk, cur)? {
                return Ok(Run::Open(m));
            }
        }
        Ok(Run::Closed)
    }

    /// One completion step in one component, mirrored in the other when it
    /// deletes a shared literal.
    fn alpha(&mut self, st: &mut PairState, at: &mut Cursor) -> Result<Option<Run>, InterpError> {
        for side in [Side::A, Side::B] {
            let c = st.constraint(side)?;
            match next_step(&c, &st.prec)? {
                None => continue,
                Some(Step::Fail(w)) => {
                    let mut wit = w.literals.clone();
                    wit.extend(w.premises.iter().cloned());
                    return Ok(Some(self.close(st, *at, side, wit)?));
                }
                Some(Step::Apply(e)) => {
                    self.stats.alpha_steps += 1;
                    let before_pair = pair_measure(st);
                    let before = Measure::of_constraint(&c);
                    let mirror = e.removed.iter().any(|l| st.sig.lit_common(l));
                    if mirror {
                        let other = st.get(side.other());
                        if let Some(l) = e.removed.iter().chain(&e.premises).find(|l| !other.contains(*l)) {
                            return Err(InterpError::Mirror(format!("{} (needs {l})", e.instruction)));
                        }
                        self.stats.mirrored_steps += 1;
                    }
                    self.replace(st, at, side, &e.removed, &e.added)?;
                    if mirror {
                        self.replace(st, at, side.other(), &e.removed, &e.added)?;
                    }
                    let after = Measure::of_constraint(&st.constraint(side)?);
                    if !before.greater(&after, &st.prec) {
                        return Err(CompletionError::MeasureNotDecreasing(e.instruction).into());
                    }
                    if !pair_measure_greater(&before_pair, &pair_measure(st), &st.prec) {
                        return Err(InterpError::PairMeasure(e.instruction.to_string()));
                    }
                    return Ok(None);
                }
            }
        }
        Ok(Some(Run::Open(Model::default())))
    }

    fn finish(&mut self, st: PairState, at: Cursor) -> Result<Run, InterpError> {
        for side in [Side::A, Side::B] {
            let c = st.constraint(side)?;
            if let Modularity::No(v) = is_modular(&c, &st.prec)? {
                return Err(InterpError::Invariant(format!("component {side:?} is not modular: {v}")));
            }
            if let ModularVerdict::Unsat(e, d) = decide_modular_sat(&c, &st.prec)? {
                let w = Literal::neq(Term::c(&e), Term::c(&d));
                return self.close(&st, at, side, vec![w]);
            }
        }
        self.stats.modular_leaves += 1;
        if let MergeVerdict::Blocked(ls) = merge_check(&st)? {
            return Err(InterpError::Invariant(format!("leaf is not mergeable: {ls:?}")));
        }
        match decide_sat(&self.raw, &SatOptions::default())? {
            SatResult::Sat(m) => Ok(Run::Open(m)),
            SatResult::Unsat => Err(InterpError::Invariant("open leaf on an unsatisfiable pair".into())),
        }
    }

    fn solve(&mut self, mut st: PairState, mut at: Cursor) -> Result<Run, InterpError> {
        for _ in 0..STEP_LIMIT {
            check_bands(&st)?;
            if self.propagate_one(&mut st, &mut at)? || self.index_equality(&mut st, &mut at)? {
                continue;
            }
            if let Some((side, i, j)) = self.undecided_pair(&st) {
                if let Some(r) = self.try_close(&st, at)? {
                    return Ok(r);
                }
                let ti = Term::c(&i);
                let tj = Term::c(&j);
                let ds = vec![vec![Literal::neq(ti.clone(), tj.clone())], vec![Literal::eq(ti, tj)]];
                let (id, kids) = self.disjunction(&st, at, side, ds)?;
                return self.explore(id, kids);
            }
            if self.saturate(&mut st, &mut at)? {
                continue;
            }
            if let Some(u) = self.pick_undesired(&st)? {
                match u {
                    Undesired::SharedLhs { side, lit, alpha, t } | Undesired::SharedRhs { side, lit, alpha, t } => {
                        self.term_share(&mut st, &mut at, side, &lit, &alpha, &t)?;
                        continue;
                    }
                    Undesired::Unnormalized { side, lit, normal } => {
                        let added: Vec<Literal> = if normal.pos && normal.lhs == normal.rhs {
                            vec![]
                        } else {
                            vec![normal]
                        };
                        self.replace(&mut st, &mut at, side, &[lit], &added)?;
                        continue;
                    }
                    Undesired::Unsuitable {
                        side,
                        lit,
                        c,
                        base,
                        writes,
                    } => {
                        if let Some(r) = self.try_close(&st, at)? {
                            return Ok(r);
                        }
                        return self.fix_unsuitable(st, at, side, lit, c, base, writes);
                    }
                }
            }
            match self.alpha(&mut st, &mut at)? {
                None => continue,
                Some(Run::Closed) => return Ok(Run::Closed),
                Some(Run::Open(_)) => return self.finish(st, at),
            }
        }
        Err(InterpError::Invariant(format!("no progress after {STEP_LIMIT} steps")))
    }

    /// The first undesired literal that can be repaired now. Unsuitable
    /// towers wait until they are in normal form.
    fn pick_undesired(&self, st: &PairState) -> Result<Option<Undesired>, InterpError> {
        let all = undesired(st)?;
        let mut systems: BTreeMap<Side, Constraint> = BTreeMap::new();
        for u in all {
            match &u {
                Undesired::Unsuitable { side, lit, .. } => {
                    if !systems.contains_key(side) {
                        systems.insert(*side, st.constraint(*side)?);
                    }
                    let c = &systems[side];
                    let rest: Vec<&Literal> = c.main.iter().filter(|l| *l != lit).collect();
                    let rs = RewriteSystem::from_literals(rest, &st.prec)?;
                    if let Some(r) = rule_of(lit, &st.prec)? {
                        let nf = rs.normalize(&r.rhs)?;
                        if nf == r.rhs {
                            return Ok(Some(u));
                        }
                        return Ok(Some(Undesired::Unnormalized {
                            side: *side,
                            lit: lit.clone(),
                            normal: Literal::eq(r.lhs, nf),
                        }));
                    }
                }
                _ => return Ok(Some(u)),
            }
        }
        Ok(None)
    }
}

/// Computes an interpolant of `a` and `b`, or a model of both.
pub fn interpolate(a: &[Literal], b: &[Literal], opts: &InterpOptions) -> Result<InterpResult, InterpError> {
    for l in a.iter().chain(b) {
        l.check_sorts()?;
    }
    let st = PairState::new(a, b);
    let root_common = st.sig.common();
    let mut gen = FreshGen::new();
    gen.reserve(st.sig.a.iter().chain(&st.sig.b).map(|c| c.name()));
    let mut eng = Engine {
        opts,
        gen,
        rng: opts.seed.map(ChaCha8Rng::seed_from_u64),
        tree: ProofTree {
            root_a: a.to_vec(),
            root_b: b.to_vec(),
            nodes: vec![],
        },
        stats: InterpStats::default(),
        raw: a.iter().chain(b).cloned().collect(),
    };
    if opts.prune {
        if let SatResult::Sat(m) = decide_sat(&eng.raw, &SatOptions::default())? {
            return Ok(InterpResult::Sat(m));
        }
    }
    let run = match eng.try_close(&st, None)? {
        Some(r) => r,
        None => {
            let mut st = st;
            let mut at = None;
            eng.preprocess(&mut st, &mut at)?;
            eng.solve(st, at)?
        }
    };
    match run {
        Run::Open(m) => Ok(InterpResult::Sat(m)),
        Run::Closed => {
            let raw = reconstruct(&eng.tree)?;
            let stray: Vec<String> = raw
                .symbols()
                .into_iter()
                .filter(|c| !root_common.contains(c))
                .map(|c| c.to_string())
                .collect();
            if !stray.is_empty() {
                return Err(InterpError::Invariant(format!("interpolant uses {}", stray.join(", "))));
            }
            let interpolant = if opts.simplify { simplify(&raw) } else { raw.clone() };
            Ok(InterpResult::Unsat {
                interpolant,
                raw,
                tree: eng.tree,
                stats: eng.stats,
            })
        }
    }
}

/// Copies every one-sided shared literal to the other component.
pub fn propagate_common(st: &PairState) -> Result<PairState, InterpError> {
    let mut eng = scratch_engine();
    let mut st = st.clone();
    let mut at = None;
    while eng.propagate_one(&mut st, &mut at)? {}
    Ok(st)
}

/// Renames the strict constant of `alpha = t` (`t` shared) to a fresh
/// shared constant.
pub fn term_share(st: &PairState, side: Side, lit: &Literal, gen: &mut FreshGen) -> Result<PairState, InterpError> {
    let (alpha, t) = match (&lit.lhs, &lit.rhs) {
        (Term::Const(k), t) if !st.sig.is_common(k) && st.sig.term_common(t) => (k.clone(), t.clone()),
        (t, Term::Const(k)) if !st.sig.is_common(k) && st.sig.term_common(t) => (k.clone(), t.clone()),
        _ => return Err(InterpError::Invariant(format!("{lit} is not a sharable definition"))),
    };
    let mut eng = scratch_engine();
    eng.gen = gen.clone();
    let mut st = st.clone();
    let mut at = None;
    eng.term_share(&mut st, &mut at, side, lit, &alpha, &t)?;
    *gen = eng.gen;
    Ok(st)
}

fn scratch_engine() -> Engine<'static> {
    static OPTS: std::sync::OnceLock<InterpOptions> = std::sync::OnceLock::new();
    Engine {
        opts: OPTS.get_or_init(InterpOptions::default),
        gen: FreshGen::new(),
        rng: None,
        tree: ProofTree::default(),
        stats: InterpStats::default(),
        raw: vec![],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{consistent_with, validate_interpolant, ValidateOptions, Validity};

    fn k(n: &str, s: Sort) -> Const {
        Const::new(n, s)
    }
    fn a(n: &str) -> Term {
        Term::c(&k(n, Sort::Array))
    }
    fn i(n: &str) -> Term {
        Term::c(&k(n, Sort::Index))
    }
    fn e(n: &str) -> Term {
        Term::c(&k(n, Sort::Elem))
    }

    fn equivalent(f: &Formula, g: &Formula) -> bool {
        let o = ValidateOptions::default();
        !consistent_with(&[], &Formula::And(vec![f.clone(), Formula::not(g.clone())]), o).unwrap()
            && !consistent_with(&[], &Formula::And(vec![g.clone(), Formula::not(f.clone())]), o).unwrap()
    }

    fn worked() -> (Vec<Literal>, Vec<Literal>) {
        let av = vec![Literal::eq(a("a"), Term::wr(a("b"), i("i"), e("d")))];
        let bv = vec![
            Literal::neq(Term::rd(a("a"), i("j")), Term::rd(a("b"), i("j"))),
            Literal::neq(Term::rd(a("a"), i("k")), Term::rd(a("b"), i("k"))),
            Literal::neq(i("j"), i("k")),
        ];
        (av, bv)
    }

    #[test]
    fn worked_example() {
        let (av, bv) = worked();
        let r = interpolate(&av, &bv, &InterpOptions::default()).unwrap();
        let InterpResult::Unsat { interpolant, tree, stats, .. } = r else { panic!("expected unsat") };
        assert!(stats.unsuitable_fixes >= 1);
        let syms: Vec<String> = interpolant.symbols().iter().map(|c| c.to_string()).collect();
        assert!(syms.iter().all(|s| s == "a" || s == "b"), "{interpolant}");
        assert_eq!(
            validate_interpolant(&av, &bv, &interpolant, ValidateOptions::default()).unwrap(),
            Validity::Valid
        );
        let dab = Term::diff(a("a"), a("b"));
        let expected = Formula::atom(Literal::eq(
            a("a"),
            Term::wr(a("b"), dab.clone(), Term::rd(a("a"), dab)),
        ));
        assert!(equivalent(&interpolant, &expected), "{interpolant}");
        assert!(tree.nodes.iter().any(|n| n.rule.kind == MetaruleKind::Disjunction1));
    }

    #[test]
    fn closed_a_gives_false() {
        let av = vec![Literal::neq(e("e"), e("e"))];
        let r = interpolate(&av, &[], &InterpOptions::default()).unwrap();
        let InterpResult::Unsat { interpolant, .. } = r else { panic!() };
        assert_eq!(interpolant, Formula::False);
    }

    #[test]
    fn satisfiable_pair_gives_model() {
        let av = vec![Literal::eq(Term::rd(a("a"), i("i")), e("e"))];
        let bv = vec![Literal::eq(Term::rd(a("a"), i("j")), e("d"))];
        let r = interpolate(&av, &bv, &InterpOptions::default()).unwrap();
        let InterpResult::Sat(m) = r else { panic!() };
        assert!(m.first_false(av.iter().chain(&bv)).unwrap().is_none());
    }

    #[test]
    fn merge_check_on_empty_pair() {
        let st = PairState::new(&[], &[]);
        assert_eq!(merge_check(&st).unwrap(), MergeVerdict::Mergeable);
    }

    #[test]
    fn merge_check_flags_read_to_strict() {
        let av = vec![
            Literal::eq(Term::rd(a("c"), i("i")), e("d")),
            Literal::neq(e("d"), e("x")),
        ];
        let bv = vec![Literal::eq(Term::rd(a("c"), i("i")), e("f"))];
        let st = PairState::new(&av, &bv);
        let MergeVerdict::Blocked(ls) = merge_check(&st).unwrap() else { panic!() };
        assert!(ls.contains(&av[0]));
    }

    #[test]
    fn merge_check_accepts_shared_tower() {
        let l = Literal::eq(a("a"), Term::wr(a("c"), i("i"), e("e")));
        let st = PairState::new(std::slice::from_ref(&l), std::slice::from_ref(&l));
        assert_eq!(merge_check(&st).unwrap(), MergeVerdict::Mergeable);
    }

    #[test]
    fn propagation_copies_shared_literals() {
        let av = vec![Literal::eq(a("a"), a("b")), Literal::eq(e("x"), e("x"))];
        let bv = vec![Literal::neq(e("d"), e("f")), Literal::neq(a("a"), a("b"))];
        let st = PairState::new(&av, &bv);
        let out = propagate_common(&st).unwrap();
        assert!(out.b.contains(&av[0]));
        let none = propagate_common(&out).unwrap();
        assert_eq!(none.a, out.a);
        assert_eq!(none.b, out.b);
    }

    #[test]
    fn term_sharing_renames_read_value() {
        let lit = Literal::eq(Term::rd(a("c"), i("i")), e("d"));
        let av = vec![lit.clone(), Literal::neq(e("d"), e("x"))];
        let bv = vec![Literal::eq(Term::rd(a("c"), i("i")), e("f"))];
        let st = PairState::new(&av, &bv);
        let mut g = FreshGen::new();
        let out = term_share(&st, Side::A, &lit, &mut g).unwrap();
        assert!(!out.a.iter().any(|l| l.consts().contains(&k("d", Sort::Elem))));
        let shared: Vec<&Literal> = out.a.iter().filter(|l| out.b.contains(*l)).collect();
        assert_eq!(shared.len(), 1);
        assert!(out.sig.lit_common(shared[0]));
    }

    #[test]
    fn metarule_provisos_are_checked() {
        let av = vec![Literal::eq(e("x"), e("y"))];
        let bv = vec![Literal::eq(e("y"), e("z"))];
        let st = PairState::new(&av, &bv);
        let bad = Metarule::new(MetaruleKind::Propagate1, Payload::Literals(av.clone()));
        assert!(matches!(st.apply(&bad), Err(InterpError::Proviso { .. })));
        let def = Metarule::new(
            MetaruleKind::Define0,
            Payload::Definition {
                name: k("y", Sort::Elem),
                term: e("y"),
            },
        );
        assert!(st.apply(&def).is_err());
        let close = Metarule::new(MetaruleKind::Close1, Payload::Literals(vec![]));
        assert!(st.apply(&close).unwrap().is_empty());
    }

    #[test]
    fn reconstruct_single_close() {
        let tree = ProofTree {
            root_a: vec![],
            root_b: vec![],
            nodes: vec![ProofNode {
                id: 0,
                parent: None,
                rule: Metarule::new(MetaruleKind::Close1, Payload::Literals(vec![])),
                component: Component::A,
                added: vec![],
                removed: vec![],
                children: vec![],
            }],
        };
        assert_eq!(reconstruct(&tree).unwrap(), Formula::False);
    }

    #[test]
    fn simplify_folds_and_absorbs() {
        let p = Formula::atom(Literal::eq(e("x"), e("y")));
        let q = Formula::atom(Literal::eq(e("y"), e("z")));
        let f = Formula::Or(vec![
            p.clone(),
            Formula::And(vec![p.clone(), q]),
            Formula::False,
            Formula::atom(Literal::neq(e("x"), e("x"))),
        ]);
        assert_eq!(simplify(&f), p);
    }
}
