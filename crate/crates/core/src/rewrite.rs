//! Ground rewrite systems together with the four fixed write/read schemas.
//!
//! The schemas, over the array variable `x`, are
//!
//! * `rd(wr(x,i,e),j) -> rd(x,j)` for distinct index constants `i`, `j`
//! * `rd(wr(x,i,e),i) -> e`
//! * `wr(wr(x,i,e),j,d) -> wr(wr(x,j,d),i,e)` when `i > j`
//! * `wr(wr(x,i,e),i,d) -> wr(x,i,d)`
//!
//! They are applied by matching on concrete terms rather than by
//! instantiating them up front.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::ordering::{orient, OrderingError, Orientation, Precedence};
use crate::terms::{Flat, Literal, Sort, Term};

/// Upper bound on rewrite steps in one normalization.
pub const STEP_LIMIT: usize = 200_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RewriteError {
    #[error("rewrite step `{from}` -> `{to}` does not decrease in the term ordering")]
    NonDecreasing { from: String, to: String },
    #[error("normalization of `{0}` exceeded the step limit")]
    StepLimit(String),
    #[error("rule `{0}` is not a ground rule of an accepted shape")]
    BadRule(String),
    #[error(transparent)]
    Ordering(#[from] OrderingError),
    #[error("unknown reduction strategy `{0}`")]
    UnknownStrategy(String),
}

/// The three ground rule shapes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum RuleShape {
    /// `a -> wr(b,I,E)`, including `a -> b`.
    ArrayDef,
    /// `rd(a,i) -> e`.
    ReadDef,
    /// `e -> d`.
    ElemDef,
}

#[derive(Clone, PartialEq, Eq)]
pub struct GroundRule {
    pub lhs: Term,
    pub rhs: Term,
    pub shape: RuleShape,
}

impl GroundRule {
    pub fn literal(&self) -> Literal {
        Literal::eq(self.lhs.clone(), self.rhs.clone())
    }
}

impl fmt::Debug for GroundRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.lhs, self.rhs)
    }
}

impl fmt::Display for GroundRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// The non-ground schemas.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum SchemaRule {
    ReadOther,
    ReadSame,
    WriteSwap,
    WriteSame,
}

/// What justified a rewrite step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepBy {
    Ground(usize),
    Schema(SchemaRule),
}

/// The critical pair cases between ground rules.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum CriticalPairKind {
    /// Two array definitions of one constant with different bases.
    C1,
    /// Two array definitions of one constant with the same base.
    C2,
    /// A read of an array that is itself rewritten.
    C3,
    /// Two read definitions with the same left-hand side.
    C4,
    /// Two element definitions with the same left-hand side.
    C5,
}

/// An overlap between two ground rules (indices into the system).
///
/// For `C1` the first rule has the greater base, for `C3` the first rule
/// is the read definition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CriticalPair {
    pub kind: CriticalPairKind,
    pub first: usize,
    pub second: usize,
}

/// Ground rules indexed by left-hand side, plus the schemas.
#[derive(Clone)]
pub struct RewriteSystem<'p> {
    prec: &'p Precedence,
    rules: Vec<GroundRule>,
    by_lhs: BTreeMap<Term, Vec<usize>>,
}

impl<'p> RewriteSystem<'p> {
    /// The schema-only system.
    pub fn new(prec: &'p Precedence) -> Self {
        RewriteSystem {
            prec,
            rules: Vec::new(),
            by_lhs: BTreeMap::new(),
        }
    }

    /// Orients the positive main-part literals. Badly orientable and
    /// trivial equalities, negative literals and index literals are skipped.
    pub fn from_literals<'a, I>(lits: I, prec: &'p Precedence) -> Result<Self, RewriteError>
    where
        I: IntoIterator<Item = &'a Literal>,
    {
        let mut rs = RewriteSystem::new(prec);
        for l in lits {
            if let Some(rule) = rule_of(l, prec)? {
                rs.add_rule(rule)?;
            }
        }
        Ok(rs)
    }

    pub fn precedence(&self) -> &'p Precedence {
        self.prec
    }

    /// Adds a rule after checking its shape and that it decreases.
    pub fn add_rule(&mut self, rule: GroundRule) -> Result<usize, RewriteError> {
        if !rule.lhs.is_ground() || !rule.rhs.is_ground() {
            return Err(RewriteError::BadRule(rule.to_string()));
        }
        crate::ordering::lpo_compare(&rule.lhs, &rule.rhs, self.prec)?;
        if !self.prec.term_gt(&rule.lhs, &rule.rhs) {
            return Err(RewriteError::NonDecreasing {
                from: rule.lhs.to_string(),
                to: rule.rhs.to_string(),
            });
        }
        let id = self.rules.len();
        self.by_lhs.entry(rule.lhs.clone()).or_default().push(id);
        self.rules.push(rule);
        Ok(id)
    }

    pub fn rules(&self) -> &[GroundRule] {
        &self.rules
    }

    pub fn rule(&self, id: usize) -> &GroundRule {
        &self.rules[id]
    }

    /// Rules whose left-hand side is exactly `t`.
    pub fn rules_for(&self, t: &Term) -> &[usize] {
        self.by_lhs.get(t).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Index constants occurring in the ground rules.
    pub fn index_pool(&self) -> BTreeSet<crate::terms::Const> {
        self.pool(Sort::Index)
    }

    /// Element constants occurring in the ground rules.
    pub fn elem_pool(&self) -> BTreeSet<crate::terms::Const> {
        self.pool(Sort::Elem)
    }

    fn pool(&self, s: Sort) -> BTreeSet<crate::terms::Const> {
        let mut out = BTreeSet::new();
        for r in &self.rules {
            r.lhs.collect_consts(&mut out);
            r.rhs.collect_consts(&mut out);
        }
        out.retain(|c| c.sort() == s);
        out
    }

    /// Applies a schema at the root of `t`, if one matches.
    pub fn schema_step(&self, t: &Term) -> Result<Option<(Term, SchemaRule)>, RewriteError> {
        match t {
            Term::Rd(a, j) => {
                if let Term::Wr(x, i, e) = &**a {
                    if i == j {
                        return Ok(Some(((**e).clone(), SchemaRule::ReadSame)));
                    }
                    if i.is_const() && j.is_const() {
                        return Ok(Some((Term::rd((**x).clone(), (**j).clone()), SchemaRule::ReadOther)));
                    }
                }
                Ok(None)
            }
            Term::Wr(a, j, d) => {
                if let Term::Wr(x, i, e) = &**a {
                    if i == j {
                        return Ok(Some((
                            Term::wr((**x).clone(), (**i).clone(), (**d).clone()),
                            SchemaRule::WriteSame,
                        )));
                    }
                    if let (Some(ic), Some(jc)) = (i.as_const(), j.as_const()) {
                        if self.prec.cmp_consts(ic, jc)? == std::cmp::Ordering::Greater {
                            return Ok(Some((
                                Term::wr(
                                    Term::wr((**x).clone(), (**j).clone(), (**d).clone()),
                                    (**i).clone(),
                                    (**e).clone(),
                                ),
                                SchemaRule::WriteSwap,
                            )));
                        }
                    }
                }
                Ok(None)
            }
            _ => Ok(None),
        }
    }

    /// One step at the root: ground rules first, then schemas. `skip`
    /// excludes one ground rule.
    pub fn root_step(&self, t: &Term, skip: Option<usize>) -> Result<Option<(Term, StepBy)>, RewriteError> {
        if let Some(&id) = self.rules_for(t).iter().find(|&&id| Some(id) != skip) {
            return Ok(Some((self.rules[id].rhs.clone(), StepBy::Ground(id))));
        }
        Ok(self.schema_step(t)?.map(|(u, s)| (u, StepBy::Schema(s))))
    }

    fn checked(&self, from: &Term, to: &Term) -> Result<(), RewriteError> {
        if self.prec.term_gt(from, to) {
            Ok(())
        } else {
            Err(RewriteError::NonDecreasing {
                from: from.to_string(),
                to: to.to_string(),
            })
        }
    }

    /// Innermost-leftmost normal form.
    pub fn normalize(&self, t: &Term) -> Result<Term, RewriteError> {
        let mut used = BTreeSet::new();
        self.normalize_traced(t, &mut used)
    }

    /// Normal form, recording the ground rules used.
    pub fn normalize_traced(&self, t: &Term, used: &mut BTreeSet<usize>) -> Result<Term, RewriteError> {
        InnermostLeftmost.normalize(self, t, used)
    }

    /// Normal form using the schemas only.
    pub fn normalize_schemas(&self, t: &Term) -> Result<Term, RewriteError> {
        let bare = RewriteSystem::new(self.prec);
        bare.normalize(t)
    }

    pub fn normalize_with(&self, t: &Term, strategy: &dyn ReductionStrategy) -> Result<Term, RewriteError> {
        let mut used = BTreeSet::new();
        strategy.normalize(self, t, &mut used)
    }

    /// Whether both terms have the same normal form.
    pub fn joinable(&self, s: &Term, t: &Term) -> Result<bool, RewriteError> {
        Ok(s == t || self.normalize(s)? == self.normalize(t)?)
    }

    /// Whether some subterm of `t` is a redex, ignoring ground rule `skip`.
    pub fn is_reducible(&self, t: &Term, skip: Option<usize>) -> Result<bool, RewriteError> {
        for s in t.subterms() {
            if self.root_step(s, skip)?.is_some() {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// All overlaps between ground rules.
    pub fn ground_overlaps(&self) -> Vec<CriticalPair> {
        let mut out = Vec::new();
        for ids in self.by_lhs.values() {
            for (x, &p) in ids.iter().enumerate() {
                for &q in &ids[x + 1..] {
                    let (rp, rq) = (&self.rules[p], &self.rules[q]);
                    let kind = match rp.shape {
                        RuleShape::ArrayDef => {
                            let bp = rp.rhs.decompose_tower().0;
                            let bq = rq.rhs.decompose_tower().0;
                            if bp == bq {
                                CriticalPairKind::C2
                            } else {
                                let (first, second) = if self.prec.term_gt(bp, bq) { (p, q) } else { (q, p) };
                                out.push(CriticalPair {
                                    kind: CriticalPairKind::C1,
                                    first,
                                    second,
                                });
                                continue;
                            }
                        }
                        RuleShape::ReadDef => CriticalPairKind::C4,
                        RuleShape::ElemDef => CriticalPairKind::C5,
                    };
                    out.push(CriticalPair {
                        kind,
                        first: p,
                        second: q,
                    });
                }
            }
        }
        for (p, r) in self.rules.iter().enumerate() {
            if let Term::Rd(a, _) = &r.lhs {
                for &q in self.rules_for(a) {
                    out.push(CriticalPair {
                        kind: CriticalPairKind::C3,
                        first: p,
                        second: q,
                    });
                }
            }
        }
        out
    }

    /// No rule reduces the left-hand side of another rule, and no rule
    /// reduces any right-hand side.
    pub fn is_ground_irreducible(&self) -> Result<bool, RewriteError> {
        for (id, r) in self.rules.iter().enumerate() {
            if self.is_reducible(&r.lhs, Some(id))? || self.is_reducible(&r.rhs, None)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Orients a literal into a ground rule, if it is one.
pub fn rule_of(l: &Literal, prec: &Precedence) -> Result<Option<GroundRule>, RewriteError> {
    if !l.pos {
        return Ok(None);
    }
    let shape = match l.flat() {
        Some(Flat::ArrEq { .. }) => RuleShape::ArrayDef,
        Some(Flat::Read { .. }) => RuleShape::ReadDef,
        Some(Flat::ElemEq(..)) => RuleShape::ElemDef,
        _ => return Ok(None),
    };
    match orient(l, prec)? {
        Orientation::Rule { lhs, rhs } => Ok(Some(GroundRule { lhs, rhs, shape })),
        Orientation::BadlyOrientable | Orientation::Trivial => Ok(None),
    }
}

/// A reduction order for normalization.
pub trait ReductionStrategy: Send + Sync {
    fn name(&self) -> &'static str;

    /// Rewrites `t` to a normal form, recording ground rules used.
    fn normalize(&self, rs: &RewriteSystem<'_>, t: &Term, used: &mut BTreeSet<usize>) -> Result<Term, RewriteError>;
}

/// Normalizes arguments left to right before the root.
#[derive(Clone, Copy, Debug, Default)]
pub struct InnermostLeftmost;

impl InnermostLeftmost {
    fn go(
        rs: &RewriteSystem<'_>,
        t: &Term,
        used: &mut BTreeSet<usize>,
        steps: &mut usize,
    ) -> Result<Term, RewriteError> {
        let mut cur = match t {
            Term::Const(_) | Term::Var => t.clone(),
            Term::Rd(a, i) => Term::rd(Self::go(rs, a, used, steps)?, Self::go(rs, i, used, steps)?),
            Term::Wr(a, i, e) => Term::wr(
                Self::go(rs, a, used, steps)?,
                Self::go(rs, i, used, steps)?,
                Self::go(rs, e, used, steps)?,
            ),
            Term::Diff(a, b) => Term::diff(Self::go(rs, a, used, steps)?, Self::go(rs, b, used, steps)?),
        };
        while let Some((next, by)) = rs.root_step(&cur, None)? {
            *steps += 1;
            if *steps > STEP_LIMIT {
                return Err(RewriteError::StepLimit(t.to_string()));
            }
            rs.checked(&cur, &next)?;
            if let StepBy::Ground(id) = by {
                used.insert(id);
            }
            cur = Self::go(rs, &next, used, steps)?;
        }
        Ok(cur)
    }
}

impl ReductionStrategy for InnermostLeftmost {
    fn name(&self) -> &'static str {
        "innermost"
    }

    fn normalize(&self, rs: &RewriteSystem<'_>, t: &Term, used: &mut BTreeSet<usize>) -> Result<Term, RewriteError> {
        let mut steps = 0;
        Self::go(rs, t, used, &mut steps)
    }
}

/// Repeatedly rewrites the leftmost outermost redex.
#[derive(Clone, Copy, Debug, Default)]
pub struct Outermost;

impl Outermost {
    fn rewrite_once(
        rs: &RewriteSystem<'_>,
        t: &Term,
        used: &mut BTreeSet<usize>,
    ) -> Result<Option<Term>, RewriteError> {
        if let Some((next, by)) = rs.root_step(t, None)? {
            rs.checked(t, &next)?;
            if let StepBy::Ground(id) = by {
                used.insert(id);
            }
            return Ok(Some(next));
        }
        Ok(match t {
            Term::Const(_) | Term::Var => None,
            Term::Rd(a, i) => {
                if let Some(a2) = Self::rewrite_once(rs, a, used)? {
                    Some(Term::rd(a2, (**i).clone()))
                } else {
                    Self::rewrite_once(rs, i, used)?.map(|i2| Term::rd((**a).clone(), i2))
                }
            }
            Term::Wr(a, i, e) => {
                if let Some(a2) = Self::rewrite_once(rs, a, used)? {
                    Some(Term::wr(a2, (**i).clone(), (**e).clone()))
                } else if let Some(i2) = Self::rewrite_once(rs, i, used)? {
                    Some(Term::wr((**a).clone(), i2, (**e).clone()))
                } else {
                    Self::rewrite_once(rs, e, used)?.map(|e2| Term::wr((**a).clone(), (**i).clone(), e2))
                }
            }
            Term::Diff(a, b) => {
                if let Some(a2) = Self::rewrite_once(rs, a, used)? {
                    Some(Term::diff(a2, (**b).clone()))
                } else {
                    Self::rewrite_once(rs, b, used)?.map(|b2| Term::diff((**a).clone(), b2))
                }
            }
        })
    }
}

impl ReductionStrategy for Outermost {
    fn name(&self) -> &'static str {
        "outermost"
    }

    fn normalize(&self, rs: &RewriteSystem<'_>, t: &Term, used: &mut BTreeSet<usize>) -> Result<Term, RewriteError> {
        let mut cur = t.clone();
        for _ in 0..STEP_LIMIT {
            match Self::rewrite_once(rs, &cur, used)? {
                Some(next) => cur = next,
                None => return Ok(cur),
            }
        }
        Err(RewriteError::StepLimit(t.to_string()))
    }
}

/// Named reduction strategies.
pub struct StrategyRegistry {
    entries: Vec<Box<dyn ReductionStrategy>>,
}

impl Default for StrategyRegistry {
    fn default() -> Self {
        StrategyRegistry::with_defaults()
    }
}

impl StrategyRegistry {
    pub fn empty() -> Self {
        StrategyRegistry { entries: Vec::new() }
    }

    /// `innermost` (the default) and `outermost`.
    pub fn with_defaults() -> Self {
        let mut r = StrategyRegistry::empty();
        r.register(Box::new(InnermostLeftmost));
        r.register(Box::new(Outermost));
        r
    }

    /// Adds a strategy, replacing one with the same name.
    pub fn register(&mut self, s: Box<dyn ReductionStrategy>) {
        self.entries.retain(|e| e.name() != s.name());
        self.entries.push(s);
    }

    pub fn get(&self, name: &str) -> Result<&dyn ReductionStrategy, RewriteError> {
        self.entries
            .iter()
            .find(|e| e.name() == name)
            .map(|b| b.as_ref())
            .ok_or_else(|| RewriteError::UnknownStrategy(name.to_string()))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.name()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::terms::Const;
    use proptest::prelude::*;

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

    fn prec() -> Precedence {
        let names = [
            ("a", Sort::Array),
            ("b", Sort::Array),
            ("c", Sort::Array),
            ("i", Sort::Index),
            ("j", Sort::Index),
            ("k", Sort::Index),
            ("l", Sort::Index),
            ("e", Sort::Elem),
            ("d", Sort::Elem),
            ("f", Sort::Elem),
        ];
        let cs: Vec<Const> = names.iter().map(|(n, s)| k(n, *s)).collect();
        Precedence::from_first_appearance(&cs)
    }

    #[test]
    fn schema_examples() {
        let p = prec();
        let rs = RewriteSystem::new(&p);
        let t = Term::rd(Term::wr(a("b"), i("i"), e("e")), i("i"));
        assert_eq!(rs.normalize(&t).unwrap(), e("e"));
        let t = Term::wr(Term::wr(a("b"), i("i"), e("e")), i("j"), e("d"));
        assert_eq!(
            rs.normalize(&t).unwrap(),
            Term::wr(Term::wr(a("b"), i("j"), e("d")), i("i"), e("e"))
        );
        let t = Term::rd(Term::wr(a("b"), i("i"), e("e")), i("j"));
        assert_eq!(rs.normalize(&t).unwrap(), Term::rd(a("b"), i("j")));
        let t = Term::wr(Term::wr(a("b"), i("i"), e("e")), i("i"), e("d"));
        assert_eq!(rs.normalize(&t).unwrap(), Term::wr(a("b"), i("i"), e("d")));
    }

    #[test]
    fn ground_rule_step() {
        let p = prec();
        let lits = [Literal::eq(a("a"), Term::wr(a("b"), i("i"), e("e")))];
        let rs = RewriteSystem::from_literals(&lits, &p).unwrap();
        assert_eq!(rs.normalize(&a("a")).unwrap(), Term::wr(a("b"), i("i"), e("e")));
    }

    #[test]
    fn joinable_examples() {
        let p = prec();
        let rs = RewriteSystem::new(&p);
        assert!(rs.joinable(&e("e"), &e("e")).unwrap());
        assert!(rs
            .joinable(&Term::rd(Term::wr(a("b"), i("i"), e("e")), i("i")), &e("e"))
            .unwrap());
        // rd(a,i) -> e -> d
        let lits = [Literal::eq(Term::rd(a("a"), i("i")), e("e")), Literal::eq(e("e"), e("d"))];
        let rs = RewriteSystem::from_literals(&lits, &p).unwrap();
        assert!(rs.joinable(&Term::rd(a("a"), i("i")), &e("d")).unwrap());
        assert!(!rs.joinable(&Term::rd(a("a"), i("j")), &e("d")).unwrap());
    }

    #[test]
    fn overlap_examples() {
        let p = prec();
        let lits = [
            Literal::eq(a("a"), Term::wr(a("b"), i("i"), e("e"))),
            Literal::eq(a("a"), Term::wr(a("c"), i("j"), e("d"))),
        ];
        let rs = RewriteSystem::from_literals(&lits, &p).unwrap();
        let ov = rs.ground_overlaps();
        assert_eq!(ov.len(), 1);
        assert_eq!(ov[0].kind, CriticalPairKind::C1);
        assert_eq!(rs.rule(ov[0].first).rhs.decompose_tower().0, &a("b"));

        let lits = [Literal::eq(Term::rd(a("a"), i("i")), e("e")), Literal::eq(Term::rd(a("a"), i("i")), e("d"))];
        let rs = RewriteSystem::from_literals(&lits, &p).unwrap();
        let kinds: Vec<_> = rs.ground_overlaps().iter().map(|c| c.kind).collect();
        assert_eq!(kinds, vec![CriticalPairKind::C4]);

        assert!(RewriteSystem::new(&p).ground_overlaps().is_empty());
    }

    #[test]
    fn irreducibility_examples() {
        let p = prec();
        let lits = [Literal::eq(a("a"), Term::wr(a("b"), i("i"), e("e"))), Literal::eq(e("e"), e("d"))];
        assert!(!RewriteSystem::from_literals(&lits, &p).unwrap().is_ground_irreducible().unwrap());
        let lits = [Literal::eq(a("a"), Term::wr(a("b"), i("i"), e("e")))];
        assert!(RewriteSystem::from_literals(&lits, &p).unwrap().is_ground_irreducible().unwrap());
        let lits = [Literal::eq(Term::rd(a("a"), i("i")), e("e")), Literal::eq(a("a"), Term::wr(a("b"), i("j"), e("d")))];
        assert!(!RewriteSystem::from_literals(&lits, &p).unwrap().is_ground_irreducible().unwrap());
    }

    #[test]
    fn registry_lookup() {
        let r = StrategyRegistry::with_defaults();
        assert_eq!(r.names(), vec!["innermost", "outermost"]);
        assert!(r.get("outermost").is_ok());
        assert!(matches!(r.get("parallel"), Err(RewriteError::UnknownStrategy(_))));
    }

    fn arb_tower() -> impl Strategy<Value = Term> {
        let idx = prop_oneof![Just("i"), Just("j"), Just("k"), Just("l")];
        let el = prop_oneof![Just("e"), Just("d"), Just("f")];
        proptest::collection::vec((idx, el), 0..7).prop_map(|ws| {
            ws.into_iter().fold(a("b"), |t, (x, y)| Term::wr(t, i(x), e(y)))
        })
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent_and_strategy_free(t in arb_tower(), j in prop_oneof![Just("i"), Just("k")]) {
            let p = prec();
            let rs = RewriteSystem::new(&p);
            let n1 = rs.normalize(&t).unwrap();
            prop_assert_eq!(rs.normalize(&n1).unwrap(), n1.clone());
            prop_assert_eq!(rs.normalize_with(&t, &Outermost).unwrap(), n1.clone());
            let r = Term::rd(t.clone(), i(j));
            prop_assert_eq!(rs.normalize(&r).unwrap(), rs.normalize_with(&r, &Outermost).unwrap());
        }
    }
}
