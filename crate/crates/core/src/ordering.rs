//! Symbol precedence and the lexicographic path ordering on ground terms.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use num::{BigInt, BigRational, One, Zero};
use thiserror::Error;

use crate::terms::{Const, Literal, Sort, Symbol, Term};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OrderingError {
    #[error("symbol `{0}` has no place in the precedence")]
    UnknownSymbol(String),
    #[error("cannot compare non-ground term `{0}`")]
    NonGround(String),
    #[error("`{0}` is not a flat positive equality")]
    NotOrientable(String),
    #[error("cannot insert `{0}`: {1}")]
    BadInsert(String, String),
}

/// Result of comparing two terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Comparison {
    Greater,
    Less,
    Equal,
}

impl Comparison {
    pub fn reverse(self) -> Comparison {
        match self {
            Comparison::Greater => Comparison::Less,
            Comparison::Less => Comparison::Greater,
            Comparison::Equal => Comparison::Equal,
        }
    }
}

// Category ranks realising `array > wr > rd > diff > index > elem`.
const RANK_ARRAY: u8 = 5;
const RANK_WR: u8 = 4;
const RANK_RD: u8 = 3;
const RANK_DIFF: u8 = 2;
const RANK_INDEX: u8 = 1;
const RANK_ELEM: u8 = 0;

fn sort_rank(s: Sort) -> u8 {
    match s {
        Sort::Array => RANK_ARRAY,
        Sort::Index => RANK_INDEX,
        Sort::Elem => RANK_ELEM,
    }
}

/// A dense total precedence. Constants of one sort are ordered by rational
/// keys, so a new constant can always be placed between two others.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Precedence {
    keys: BTreeMap<Const, BigRational>,
}

impl Precedence {
    pub fn new() -> Self {
        Self::default()
    }

    /// Orders constants so that earlier ones are greater within each sort.
    pub fn from_first_appearance<'a, I: IntoIterator<Item = &'a Const>>(consts: I) -> Self {
        let mut p = Precedence::new();
        let mut seen = std::collections::BTreeSet::new();
        let firsts: Vec<&Const> = consts.into_iter().filter(|c| seen.insert(*c)).collect();
        for c in firsts.into_iter().rev() {
            p.push_top(c.clone());
        }
        p
    }

    pub fn contains(&self, c: &Const) -> bool {
        self.keys.contains_key(c)
    }

    pub fn key(&self, c: &Const) -> Option<&BigRational> {
        self.keys.get(c)
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    fn keys_of_sort(&self, s: Sort) -> impl Iterator<Item = &BigRational> {
        self.keys.iter().filter(move |(c, _)| c.sort() == s).map(|(_, k)| k)
    }

    fn max_key(&self, s: Sort) -> Option<BigRational> {
        self.keys_of_sort(s).max().cloned()
    }

    fn min_key(&self, s: Sort) -> Option<BigRational> {
        self.keys_of_sort(s).min().cloned()
    }

    /// Places `c` with an explicit key; used to lay out bands.
    pub fn set_key(&mut self, c: Const, key: BigRational) {
        self.keys.insert(c, key);
    }

    /// Makes `c` the greatest constant of its sort.
    pub fn push_top(&mut self, c: Const) {
        let k = self
            .max_key(c.sort())
            .map(|m| m + BigRational::one())
            .unwrap_or_else(BigRational::zero);
        self.keys.insert(c, k);
    }

    /// Makes `c` the least constant of its sort.
    pub fn push_bottom(&mut self, c: Const) {
        let k = self
            .min_key(c.sort())
            .map(|m| m - BigRational::one())
            .unwrap_or_else(BigRational::zero);
        self.keys.insert(c, k);
    }

    /// Places `c` strictly between `lo` and `hi` (`lo < hi`, same sort).
    pub fn insert_between(&mut self, c: Const, lo: &Const, hi: &Const) -> Result<(), OrderingError> {
        let (kl, kh) = match (self.keys.get(lo), self.keys.get(hi)) {
            (Some(a), Some(b)) => (a.clone(), b.clone()),
            _ => {
                return Err(OrderingError::BadInsert(
                    c.to_string(),
                    "bounds are not in the precedence".into(),
                ))
            }
        };
        if lo.sort() != c.sort() || hi.sort() != c.sort() || kl >= kh {
            return Err(OrderingError::BadInsert(
                c.to_string(),
                format!("`{lo}` < `{hi}` does not hold within sort {}", c.sort()),
            ));
        }
        self.keys.insert(c, (kl + kh) / BigRational::from_integer(BigInt::from(2)));
        Ok(())
    }

    /// Places `c` directly above `lo`, below every constant that was above it.
    pub fn insert_above(&mut self, c: Const, lo: &Const) -> Result<(), OrderingError> {
        let kl = self
            .keys
            .get(lo)
            .cloned()
            .ok_or_else(|| OrderingError::UnknownSymbol(lo.to_string()))?;
        let next = self.keys_of_sort(c.sort()).filter(|k| **k > kl).min().cloned();
        let k = match next {
            Some(kh) => (kl + kh) / BigRational::from_integer(BigInt::from(2)),
            None => kl + BigRational::one(),
        };
        self.keys.insert(c, k);
        Ok(())
    }

    /// Places `c` directly below `hi`.
    pub fn insert_below(&mut self, c: Const, hi: &Const) -> Result<(), OrderingError> {
        let kh = self
            .keys
            .get(hi)
            .cloned()
            .ok_or_else(|| OrderingError::UnknownSymbol(hi.to_string()))?;
        let prev = self.keys_of_sort(c.sort()).filter(|k| **k < kh).max().cloned();
        let k = match prev {
            Some(kl) => (kl + kh) / BigRational::from_integer(BigInt::from(2)),
            None => kh - BigRational::one(),
        };
        self.keys.insert(c, k);
        Ok(())
    }

    fn symbol_key(&self, s: &Symbol) -> Result<(u8, Option<&BigRational>), OrderingError> {
        Ok(match s {
            Symbol::Wr => (RANK_WR, None),
            Symbol::Rd => (RANK_RD, None),
            Symbol::Diff => (RANK_DIFF, None),
            Symbol::Const(c) => (
                sort_rank(c.sort()),
                Some(
                    self.keys
                        .get(c)
                        .ok_or_else(|| OrderingError::UnknownSymbol(c.to_string()))?,
                ),
            ),
        })
    }

    /// Compares two symbols.
    pub fn cmp_symbols(&self, f: &Symbol, g: &Symbol) -> Result<Ordering, OrderingError> {
        let a = self.symbol_key(f)?;
        let b = self.symbol_key(g)?;
        Ok(a.cmp(&b))
    }

    /// Compares two constants; both must be known.
    pub fn cmp_consts(&self, a: &Const, b: &Const) -> Result<Ordering, OrderingError> {
        self.cmp_symbols(&Symbol::Const(a.clone()), &Symbol::Const(b.clone()))
    }

    /// `cmp_consts` for constants already known to be present.
    pub fn gt(&self, a: &Const, b: &Const) -> bool {
        matches!(self.cmp_consts(a, b), Ok(Ordering::Greater))
    }

    /// Constants of a sort, least first.
    pub fn ascending(&self, s: Sort) -> Vec<Const> {
        let mut v: Vec<(&BigRational, &Const)> = self
            .keys
            .iter()
            .filter(|(c, _)| c.sort() == s)
            .map(|(c, k)| (k, c))
            .collect();
        v.sort();
        v.into_iter().map(|(_, c)| c.clone()).collect()
    }

    fn check_known(&self, t: &Term) -> Result<(), OrderingError> {
        match t {
            Term::Var => Err(OrderingError::NonGround(t.to_string())),
            Term::Const(c) => {
                if self.contains(c) {
                    Ok(())
                } else {
                    Err(OrderingError::UnknownSymbol(c.to_string()))
                }
            }
            _ => t.args().into_iter().try_for_each(|a| self.check_known(a)),
        }
    }

    /// `s ≻ t` for ground terms whose symbols are all known.
    fn lpo_gt(&self, s: &Term, t: &Term) -> bool {
        if s == t {
            return false;
        }
        let sargs = s.args();
        // Some argument of s is t or greater than t.
        if sargs.iter().any(|si| *si == t || self.lpo_gt(si, t)) {
            return true;
        }
        let targs = t.args();
        let (f, g) = match (s.head(), t.head()) {
            (Some(f), Some(g)) => (f, g),
            _ => return false,
        };
        match self.cmp_symbols(&f, &g).unwrap_or(Ordering::Equal) {
            Ordering::Greater => targs.iter().all(|tj| self.lpo_gt(s, tj)),
            Ordering::Equal => {
                for (si, ti) in sargs.iter().zip(targs.iter()) {
                    if si == ti {
                        continue;
                    }
                    return self.lpo_gt(si, ti) && targs.iter().all(|tj| self.lpo_gt(s, tj));
                }
                false
            }
            Ordering::Less => false,
        }
    }

    /// Term comparison, usable where the symbols are known to be present.
    pub fn term_gt(&self, s: &Term, t: &Term) -> bool {
        self.lpo_gt(s, t)
    }
}

/// Compares two ground terms under the lexicographic path ordering.
pub fn lpo_compare(s: &Term, t: &Term, p: &Precedence) -> Result<Comparison, OrderingError> {
    p.check_known(s)?;
    p.check_known(t)?;
    if s == t {
        Ok(Comparison::Equal)
    } else if p.lpo_gt(s, t) {
        Ok(Comparison::Greater)
    } else {
        Ok(Comparison::Less)
    }
}

/// An oriented equality.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Orientation {
    Rule { lhs: Term, rhs: Term },
    /// `a = wr(b,I,E)` with `a < b` or `a ≡ b`.
    BadlyOrientable,
    /// `t = t` for a non-array `t`.
    Trivial,
}

/// Orients a flat positive equality.
pub fn orient(eq: &Literal, p: &Precedence) -> Result<Orientation, OrderingError> {
    if !eq.pos || eq.flat().is_none() {
        return Err(OrderingError::NotOrientable(eq.to_string()));
    }
    let (l, r) = (&eq.lhs, &eq.rhs);
    if l.sort() == Sort::Array {
        let (a, t) = match (l, r) {
            (Term::Const(_), Term::Const(_)) => {
                if l == r {
                    return Ok(Orientation::BadlyOrientable);
                }
                return Ok(match lpo_compare(l, r, p)? {
                    Comparison::Greater => Orientation::Rule { lhs: l.clone(), rhs: r.clone() },
                    _ => Orientation::Rule { lhs: r.clone(), rhs: l.clone() },
                });
            }
            (Term::Const(_), t) => (l, t),
            (t, _) => (r, t),
        };
        let (base, _) = t.decompose_tower();
        return Ok(match lpo_compare(a, base, p)? {
            Comparison::Greater => Orientation::Rule { lhs: a.clone(), rhs: t.clone() },
            _ => Orientation::BadlyOrientable,
        });
    }
    if l == r {
        return Ok(Orientation::Trivial);
    }
    Ok(match lpo_compare(l, r, p)? {
        Comparison::Greater => Orientation::Rule { lhs: l.clone(), rhs: r.clone() },
        _ => Orientation::Rule { lhs: r.clone(), rhs: l.clone() },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn k(n: &str, s: Sort) -> Const {
        Const::new(n, s)
    }

    fn setup() -> (Precedence, Vec<Const>) {
        let cs = vec![
            k("a", Sort::Array),
            k("b", Sort::Array),
            k("c", Sort::Array),
            k("i", Sort::Index),
            k("j", Sort::Index),
            k("e", Sort::Elem),
            k("d", Sort::Elem),
        ];
        (Precedence::from_first_appearance(&cs), cs)
    }

    fn t(n: &str, s: Sort) -> Term {
        Term::c(&k(n, s))
    }

    #[test]
    fn first_appearance_ignores_repeats() {
        let (a, b) = (k("a", Sort::Array), k("b", Sort::Array));
        let p = Precedence::from_first_appearance(&[a.clone(), b.clone(), a.clone()]);
        assert!(p.gt(&a, &b));
        assert_eq!(p.len(), 2);
    }

    #[test]
    fn spine_and_examples() {
        let (p, _) = setup();
        let (a, b) = (t("a", Sort::Array), t("b", Sort::Array));
        let (i, e) = (t("i", Sort::Index), t("e", Sort::Elem));
        let w = Term::wr(b.clone(), i.clone(), e.clone());
        assert_eq!(lpo_compare(&a, &w, &p).unwrap(), Comparison::Greater);
        assert_eq!(lpo_compare(&w, &w, &p).unwrap(), Comparison::Equal);
        assert_eq!(lpo_compare(&w, &b, &p).unwrap(), Comparison::Greater);
        assert_eq!(lpo_compare(&Term::rd(b.clone(), i.clone()), &i, &p).unwrap(), Comparison::Greater);
        assert_eq!(lpo_compare(&i, &e, &p).unwrap(), Comparison::Greater);
        let unknown = t("zz", Sort::Elem);
        assert!(matches!(lpo_compare(&unknown, &e, &p), Err(OrderingError::UnknownSymbol(_))));
    }

    #[test]
    fn orient_examples() {
        let (p, _) = setup();
        let (a, b) = (t("a", Sort::Array), t("b", Sort::Array));
        let (i, e, d) = (t("i", Sort::Index), t("e", Sort::Elem), t("d", Sort::Elem));
        let w = Term::wr(b.clone(), i.clone(), e.clone());
        assert_eq!(
            orient(&Literal::eq(a.clone(), w.clone()), &p).unwrap(),
            Orientation::Rule { lhs: a.clone(), rhs: w }
        );
        let w2 = Term::wr(a.clone(), i.clone(), e.clone());
        assert_eq!(orient(&Literal::eq(b.clone(), w2), &p).unwrap(), Orientation::BadlyOrientable);
        let w3 = Term::wr(a.clone(), i.clone(), e.clone());
        assert_eq!(orient(&Literal::eq(a.clone(), w3), &p).unwrap(), Orientation::BadlyOrientable);
        assert_eq!(
            orient(&Literal::eq(d.clone(), e.clone()), &p).unwrap(),
            Orientation::Rule { lhs: e, rhs: d }
        );
        assert!(orient(&Literal::neq(a, b), &p).is_err());
    }

    #[test]
    fn dense_insertion() {
        let (mut p, cs) = setup();
        let x = k("x", Sort::Array);
        p.insert_between(x.clone(), &cs[1], &cs[0]).unwrap();
        assert!(p.gt(&cs[0], &x) && p.gt(&x, &cs[1]));
        let y = k("y", Sort::Array);
        p.insert_between(y.clone(), &cs[1], &x).unwrap();
        assert!(p.gt(&x, &y) && p.gt(&y, &cs[1]));
        assert!(p.insert_between(k("z", Sort::Array), &cs[0], &cs[1]).is_err());
        let lo = k("lo", Sort::Elem);
        p.push_bottom(lo.clone());
        assert!(p.gt(&cs[6], &lo));
        let hi = k("hi", Sort::Index);
        p.insert_above(hi.clone(), &cs[3]).unwrap();
        assert!(p.gt(&hi, &cs[3]));
    }

    fn arb_term(depth: u32) -> BoxedStrategy<Term> {
        let arr = prop_oneof![Just("a"), Just("b"), Just("c")].prop_map(|n| t(n, Sort::Array));
        let idx = prop_oneof![Just("i"), Just("j")].prop_map(|n| t(n, Sort::Index));
        let el = prop_oneof![Just("e"), Just("d")].prop_map(|n| t(n, Sort::Elem));
        fn arrays(depth: u32, arr: BoxedStrategy<Term>, idx: BoxedStrategy<Term>, el: BoxedStrategy<Term>) -> BoxedStrategy<Term> {
            if depth == 0 {
                return arr;
            }
            let inner = arrays(depth - 1, arr.clone(), idx.clone(), el.clone());
            prop_oneof![
                2 => arr,
                1 => (inner, idx, el).prop_map(|(a, i, e)| Term::wr(a, i, e)),
            ]
            .boxed()
        }
        let ar = arrays(depth, arr.boxed(), idx.clone().boxed(), el.clone().boxed());
        prop_oneof![
            ar.clone(),
            (ar.clone(), idx.clone()).prop_map(|(a, i)| Term::rd(a, i)),
            (ar.clone(), ar).prop_map(|(a, b)| Term::diff(a, b)),
            idx,
            el,
        ]
        .boxed()
    }

    proptest! {
        #[test]
        fn lpo_is_a_strict_total_order(s in arb_term(3), t in arb_term(3), u in arb_term(3)) {
            let (p, _) = setup();
            let st = lpo_compare(&s, &t, &p).unwrap();
            prop_assert_eq!(st, lpo_compare(&t, &s, &p).unwrap().reverse());
            prop_assert_eq!(st == Comparison::Equal, s == t);
            // Exactly one of s>t, t>s, s=t.
            prop_assert!(!(p.term_gt(&s, &t) && p.term_gt(&t, &s)));
            if p.term_gt(&s, &t) && p.term_gt(&t, &u) {
                prop_assert!(p.term_gt(&s, &u));
            }
        }

        #[test]
        fn lpo_has_subterm_property(s in arb_term(3)) {
            let (p, _) = setup();
            for sub in s.subterms().into_iter().skip(1) {
                prop_assert_eq!(lpo_compare(&s, sub, &p).unwrap(), Comparison::Greater);
            }
        }

        #[test]
        fn lpo_is_monotone(s in arb_term(2), t in arb_term(2)) {
            let (p, _) = setup();
            if s.sort() == t.sort() && p.term_gt(&s, &t) {
                let ctxs: Vec<Box<dyn Fn(Term) -> Term>> = match s.sort() {
                    Sort::Array => vec![
                        Box::new(|x| Term::rd(x, t_i())),
                        Box::new(|x| Term::wr(x, t_i(), t_e())),
                        Box::new(|x| Term::diff(x, t_b())),
                        Box::new(|x| Term::diff(t_b(), x)),
                    ],
                    Sort::Index => vec![
                        Box::new(|x| Term::rd(t_b(), x)),
                        Box::new(|x| Term::wr(t_b(), x, t_e())),
                    ],
                    Sort::Elem => vec![Box::new(|x| Term::wr(t_b(), t_i(), x))],
                };
                for c in ctxs {
                    prop_assert!(p.term_gt(&c(s.clone()), &c(t.clone())));
                }
            }
        }
    }

    fn t_i() -> Term {
        t("i", Sort::Index)
    }
    fn t_e() -> Term {
        t("e", Sort::Elem)
    }
    fn t_b() -> Term {
        t("b", Sort::Array)
    }
}
