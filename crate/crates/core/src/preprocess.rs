//! Flattening, array-disequality elimination, index partitions and read
//! saturation.
//!
//! Fresh constants are produced by a caller-supplied namer that receives the
//! term being named, so the same code serves the plain solver (where every
//! name is just fresh) and the interpolating solver (where the namer decides
//! whether the name is shared).

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ordering::Precedence;
use crate::terms::{Const, Constraint, Flat, FreshGen, Literal, Sort, Term, TermError};

/// Flat literals plus the definitions introduced for fresh constants.
#[derive(Clone, Debug, Default)]
pub struct Flattening {
    pub literals: Vec<Literal>,
    pub defs: Vec<(Const, Term)>,
}

struct Flattener<'n> {
    namer: &'n mut dyn FnMut(&Term) -> Const,
    shared: BTreeMap<Term, Const>,
    out: Flattening,
}

impl Flattener<'_> {
    /// A constant equal to `t`.
    fn name(&mut self, t: &Term) -> Const {
        if let Term::Const(c) = t {
            return c.clone();
        }
        let rhs = self.flat_rhs(t);
        if let Some(c) = self.shared.get(&rhs) {
            return c.clone();
        }
        let c = (self.namer)(&rhs);
        self.shared.insert(rhs.clone(), c.clone());
        self.out.defs.push((c.clone(), rhs.clone()));
        self.out.literals.push(Literal::eq(Term::c(&c), rhs));
        c
    }

    /// `t` with every argument replaced by a constant (towers stay towers).
    fn flat_rhs(&mut self, t: &Term) -> Term {
        match t {
            Term::Const(_) | Term::Var => t.clone(),
            Term::Rd(a, i) => Term::rd(Term::c(&self.name(a)), Term::c(&self.name(i))),
            Term::Diff(a, b) => Term::diff(Term::c(&self.name(a)), Term::c(&self.name(b))),
            Term::Wr(..) => {
                let (base, ws) = t.decompose_tower();
                let mut acc = Term::c(&self.name(base));
                for (i, e) in ws {
                    let ic = self.name(i);
                    let ec = self.name(e);
                    acc = Term::wr(acc, Term::c(&ic), Term::c(&ec));
                }
                acc
            }
        }
    }

    fn literal(&mut self, l: &Literal) {
        if !l.pos {
            let a = self.name(&l.lhs);
            let b = self.name(&l.rhs);
            self.out.literals.push(Literal::neq(Term::c(&a), Term::c(&b)));
            return;
        }
        let lit = match (&l.lhs, &l.rhs) {
            (Term::Const(_), Term::Const(_)) => l.clone(),
            (Term::Const(c), t) | (t, Term::Const(c)) => Literal::eq(Term::c(c), self.flat_rhs(t)),
            (s, t) => {
                let c = self.name(s);
                Literal::eq(Term::c(&c), self.flat_rhs(t))
            }
        };
        self.out.literals.push(lit);
    }
}

/// Flattens arbitrary ground literals bottom-up, sharing identical
/// subterms under one name.
pub fn flatten_with(lits: &[Literal], namer: &mut dyn FnMut(&Term) -> Const) -> Result<Flattening, TermError> {
    let mut f = Flattener {
        namer,
        shared: BTreeMap::new(),
        out: Flattening::default(),
    };
    for l in lits {
        l.check_sorts()?;
        f.literal(l);
    }
    Ok(f.out)
}

/// Flattens with fresh names placed at the top of the precedence.
pub fn flatten(lits: &[Literal], g: &mut FreshGen, prec: &mut Precedence) -> Result<Constraint, TermError> {
    let mut namer = |t: &Term| {
        let c = g.fresh(t.sort());
        prec.push_top(c.clone());
        c
    };
    Constraint::from_literals(flatten_with(lits, &mut namer)?.literals)
}

/// Replaces each `a != b` by `diff(a,b)=i, rd(a,i)=d, rd(b,i)=e, d != e`.
/// The namer receives `diff(a,b)`, `rd(a,i)` and `rd(b,i)` in that order.
pub fn eliminate_array_disequalities_with(
    c: &Constraint,
    namer: &mut dyn FnMut(&Term) -> Const,
) -> Result<Constraint, TermError> {
    let mut out = Constraint::new();
    for l in c.iter() {
        if let Some(Flat::ArrNeq(a, b)) = l.flat() {
            let (ta, tb) = (Term::c(&a), Term::c(&b));
            let dt = Term::diff(ta.clone(), tb.clone());
            let i = namer(&dt);
            let ra = Term::rd(ta, Term::c(&i));
            let d = namer(&ra);
            let rb = Term::rd(tb, Term::c(&i));
            let e = namer(&rb);
            out.insert(Literal::eq(dt, Term::c(&i)))?;
            out.insert(Literal::eq(ra, Term::c(&d)))?;
            out.insert(Literal::eq(rb, Term::c(&e)))?;
            out.insert(Literal::neq(Term::c(&d), Term::c(&e)))?;
        } else {
            out.insert(l.clone())?;
        }
    }
    Ok(out)
}

pub fn eliminate_array_disequalities(
    c: &Constraint,
    g: &mut FreshGen,
    prec: &mut Precedence,
) -> Result<Constraint, TermError> {
    let mut namer = |t: &Term| {
        let k = g.fresh(t.sort());
        prec.push_top(k.clone());
        k
    };
    eliminate_array_disequalities_with(c, &mut namer)
}

/// A partition of index constants.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionChoice {
    pub classes: Vec<Vec<Const>>,
}

impl PartitionChoice {
    pub fn finest(indices: &[Const]) -> Self {
        PartitionChoice {
            classes: indices.iter().map(|i| vec![i.clone()]).collect(),
        }
    }

    /// The precedence-least member of each class.
    pub fn representatives(&self, prec: &Precedence) -> Vec<Const> {
        self.classes
            .iter()
            .map(|cl| {
                cl.iter()
                    .min_by(|x, y| prec.cmp_consts(x, y).unwrap_or(std::cmp::Ordering::Equal))
                    .expect("partition classes are non-empty")
                    .clone()
            })
            .collect()
    }

    /// Maps every non-representative member to its representative.
    pub fn substitution(&self, prec: &Precedence) -> BTreeMap<Const, Term> {
        let mut map = BTreeMap::new();
        for (cl, rep) in self.classes.iter().zip(self.representatives(prec)) {
            for m in cl {
                if *m != rep {
                    map.insert(m.clone(), Term::c(&rep));
                }
            }
        }
        map
    }
}

/// Result of imposing a partition.
#[derive(Clone, Debug)]
pub enum PartitionOutcome {
    Applied {
        constraint: Constraint,
        subst: BTreeMap<Const, Term>,
    },
    Inconsistent,
}

/// Merges each class into its least member and asserts the representatives
/// pairwise distinct.
pub fn apply_partition(c: &Constraint, p: &PartitionChoice, prec: &Precedence) -> Result<PartitionOutcome, TermError> {
    let subst = p.substitution(prec);
    let reps = p.representatives(prec);
    let mut out = Constraint::new();
    for l in c.iter() {
        let l2 = l.subst(&subst);
        match l2.flat() {
            Some(Flat::IdxEq(i, j)) => {
                if i != j {
                    return Ok(PartitionOutcome::Inconsistent);
                }
            }
            Some(Flat::IdxNeq(i, j)) if i == j => return Ok(PartitionOutcome::Inconsistent),
            _ => {
                out.insert(l2)?;
            }
        }
    }
    for (x, i) in reps.iter().enumerate() {
        for j in &reps[x + 1..] {
            out.insert(Literal::neq(Term::c(i), Term::c(j)))?;
        }
    }
    Ok(PartitionOutcome::Applied { constraint: out, subst })
}

/// Enumerates all partitions of a set of index constants, finest first.
///
/// Partitions are produced by decreasing number of classes, and within one
/// class count in restricted-growth-string order over the constants. The
/// seed shuffles the constants before enumeration.
#[derive(Clone, Debug)]
pub struct GuessStream {
    items: Vec<Const>,
    blocks: usize,
    rgs: Option<Vec<usize>>,
}

impl GuessStream {
    pub fn new(indices: &[Const], seed: Option<u64>) -> Self {
        let mut items = indices.to_vec();
        items.sort();
        items.dedup();
        if let Some(s) = seed {
            items.shuffle(&mut ChaCha8Rng::seed_from_u64(s));
        }
        let n = items.len();
        let rgs = Some(first_rgs(n, n.max(1)));
        GuessStream {
            items,
            blocks: n.max(1),
            rgs,
        }
    }

    fn to_choice(&self, rgs: &[usize]) -> PartitionChoice {
        let mut classes: Vec<Vec<Const>> = Vec::new();
        for (c, &b) in self.items.iter().zip(rgs) {
            if b == classes.len() {
                classes.push(Vec::new());
            }
            classes[b].push(c.clone());
        }
        PartitionChoice { classes }
    }
}

/// Lexicographically first restricted growth string of length `n` with
/// exactly `k` blocks.
fn first_rgs(n: usize, k: usize) -> Vec<usize> {
    let mut a = vec![0; n];
    fill_suffix(&mut a, 0, 0, k);
    a
}

/// Fills `a[from..]` minimally given the prefix maximum `max`, so that the
/// whole string uses exactly `k` blocks.
fn fill_suffix(a: &mut [usize], from: usize, mut max: usize, k: usize) {
    let n = a.len();
    for j in from..n {
        if j == 0 {
            a[0] = 0;
            continue;
        }
        let needed = k - 1 - max;
        if n - j == needed {
            max += 1;
            a[j] = max;
        } else {
            a[j] = 0;
        }
    }
}

fn next_rgs(a: &mut [usize], k: usize) -> bool {
    let n = a.len();
    for i in (1..n).rev() {
        let prefix_max = a[..i].iter().copied().max().unwrap_or(0);
        let cand = a[i] + 1;
        if cand > prefix_max + 1 || cand > k - 1 {
            continue;
        }
        let new_max = prefix_max.max(cand);
        if new_max + 1 + (n - 1 - i) < k {
            continue;
        }
        a[i] = cand;
        fill_suffix(a, i + 1, new_max, k);
        return true;
    }
    false
}

impl Iterator for GuessStream {
    type Item = PartitionChoice;

    fn next(&mut self) -> Option<PartitionChoice> {
        let n = self.items.len();
        let cur = self.rgs.clone()?;
        let out = self.to_choice(&cur);
        let mut nxt = cur;
        if n > 0 && next_rgs(&mut nxt, self.blocks) {
            self.rgs = Some(nxt);
        } else if self.blocks > 1 {
            self.blocks -= 1;
            self.rgs = Some(first_rgs(n, self.blocks));
        } else {
            self.rgs = None;
        }
        Some(out)
    }
}

/// Adds `rd(a,i)=e` with `e` fresh for every array `a` and index `i`
/// occurring in `c` that have no read literal yet.
pub fn saturate_reads_with(c: &Constraint, namer: &mut dyn FnMut(&Term) -> Const) -> Result<Constraint, TermError> {
    let mut out = c.clone();
    let have: BTreeSet<(Const, Const)> = c
        .main
        .iter()
        .filter_map(|l| match l.flat() {
            Some(Flat::Read { a, i, .. }) => Some((a, i)),
            _ => None,
        })
        .collect();
    let consts = c.consts();
    let arrays: Vec<&Const> = consts.iter().filter(|k| k.sort() == Sort::Array).collect();
    let indices: Vec<&Const> = consts.iter().filter(|k| k.sort() == Sort::Index).collect();
    for a in &arrays {
        for i in &indices {
            if !have.contains(&((*a).clone(), (*i).clone())) {
                let t = Term::rd(Term::c(a), Term::c(i));
                let e = namer(&t);
                out.insert(Literal::eq(t, Term::c(&e)))?;
            }
        }
    }
    Ok(out)
}

pub fn saturate_reads(c: &Constraint, g: &mut FreshGen, prec: &mut Precedence) -> Result<Constraint, TermError> {
    let mut namer = |t: &Term| {
        let k = g.fresh(t.sort());
        prec.push_top(k.clone());
        k
    };
    saturate_reads_with(c, &mut namer)
}

/// True when all index constants of `c` are pairwise asserted distinct.
pub fn has_index_partition(c: &Constraint) -> bool {
    let idx: Vec<Const> = c.consts_of_sort(Sort::Index).into_iter().collect();
    let neq: BTreeSet<Literal> = c.index.iter().filter(|l| !l.pos).cloned().collect();
    for (x, i) in idx.iter().enumerate() {
        for j in &idx[x + 1..] {
            if !neq.contains(&Literal::neq(Term::c(i), Term::c(j))) {
                return false;
            }
        }
    }
    !c.index.iter().any(|l| l.pos && matches!(l.flat(), Some(Flat::IdxEq(..))))
}

/// True when every array/index pair of `c` has a read literal.
pub fn is_read_saturated(c: &Constraint) -> bool {
    let have: BTreeSet<(Const, Const)> = c
        .main
        .iter()
        .filter_map(|l| match l.flat() {
            Some(Flat::Read { a, i, .. }) => Some((a, i)),
            _ => None,
        })
        .collect();
    let arrays = c.consts_of_sort(Sort::Array);
    let indices = c.consts_of_sort(Sort::Index);
    arrays
        .iter()
        .all(|a| indices.iter().all(|i| have.contains(&(a.clone(), i.clone()))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::terms::{classify_literal, LiteralClass};

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

    fn prec_of(lits: &[Literal]) -> Precedence {
        let mut order = Vec::new();
        for l in lits {
            l.lhs.consts_in_order(&mut order);
            l.rhs.consts_in_order(&mut order);
        }
        Precedence::from_first_appearance(&order)
    }

    #[test]
    fn flatten_examples() {
        let lits = vec![Literal::eq(Term::rd(Term::wr(a("b"), i("i"), e("e")), i("j")), e("d"))];
        let mut p = prec_of(&lits);
        let c = flatten(&lits, &mut FreshGen::new(), &mut p).unwrap();
        let a1 = a("_k0");
        let expect = Constraint::from_literals(vec![
            Literal::eq(a1.clone(), Term::wr(a("b"), i("i"), e("e"))),
            Literal::eq(Term::rd(a1, i("j")), e("d")),
        ])
        .unwrap();
        assert_eq!(c, expect);
        assert!(c.iter().all(|l| classify_literal(l) != LiteralClass::NotFlat));

        let flat = vec![Literal::eq(Term::rd(a("a"), i("i")), e("e")), Literal::neq(e("e"), e("d"))];
        let mut p = prec_of(&flat);
        let c = flatten(&flat, &mut FreshGen::new(), &mut p).unwrap();
        assert_eq!(c, Constraint::from_literals(flat).unwrap());

        let lits = vec![Literal::eq(Term::diff(Term::wr(a("b"), i("i"), e("e")), a("b")), i("j"))];
        let mut p = prec_of(&lits);
        let c = flatten(&lits, &mut FreshGen::new(), &mut p).unwrap();
        let expect = Constraint::from_literals(vec![
            Literal::eq(a("_k0"), Term::wr(a("b"), i("i"), e("e"))),
            Literal::eq(Term::diff(a("_k0"), a("b")), i("j")),
        ])
        .unwrap();
        assert_eq!(c, expect);
    }

    #[test]
    fn flatten_shares_subterms() {
        let w = Term::wr(a("b"), i("i"), e("e"));
        let lits = vec![
            Literal::eq(Term::rd(w.clone(), i("j")), e("d")),
            Literal::neq(Term::rd(w, i("i")), e("d")),
        ];
        let mut p = prec_of(&lits);
        let c = flatten(&lits, &mut FreshGen::new(), &mut p).unwrap();
        let arrays = c.consts_of_sort(Sort::Array);
        assert_eq!(arrays.len(), 2);
    }

    #[test]
    fn array_disequality_examples() {
        let neq = Literal::neq(a("a"), a("b"));
        let Some(Flat::ArrNeq(x, y)) = neq.flat() else { panic!("flat disequality") };
        let c = Constraint::from_literals(vec![neq]).unwrap();
        let mut p = prec_of(&c.literals());
        let out = eliminate_array_disequalities(&c, &mut FreshGen::new(), &mut p).unwrap();
        let (i1, d1, e1) = (i("_k0"), e("_k1"), e("_k2"));
        let expect = Constraint::from_literals(vec![
            Literal::eq(Term::diff(Term::c(&x), Term::c(&y)), i1.clone()),
            Literal::eq(Term::rd(Term::c(&x), i1.clone()), d1.clone()),
            Literal::eq(Term::rd(Term::c(&y), i1), e1.clone()),
            Literal::neq(d1, e1),
        ])
        .unwrap();
        assert_eq!(out, expect);

        let c = Constraint::from_literals(vec![Literal::eq(Term::rd(a("a"), i("i")), e("e"))]).unwrap();
        let mut p = prec_of(&c.literals());
        assert_eq!(eliminate_array_disequalities(&c, &mut FreshGen::new(), &mut p).unwrap(), c);

        let c = Constraint::from_literals(vec![Literal::neq(a("a"), a("b")), Literal::neq(a("a"), a("c"))]).unwrap();
        let mut p = prec_of(&c.literals());
        let out = eliminate_array_disequalities(&c, &mut FreshGen::new(), &mut p).unwrap();
        assert_eq!(out.consts_of_sort(Sort::Index).len(), 2);
        assert_eq!(out.len(), 8);
    }

    #[test]
    fn partition_examples() {
        let c = Constraint::from_literals(vec![
            Literal::eq(Term::rd(a("a"), i("i")), e("e")),
            Literal::eq(Term::rd(a("a"), i("j")), e("d")),
        ])
        .unwrap();
        let p = prec_of(&c.literals());
        let ch = PartitionChoice {
            classes: vec![vec![k("i", Sort::Index), k("j", Sort::Index)]],
        };
        match apply_partition(&c, &ch, &p).unwrap() {
            PartitionOutcome::Applied { constraint, .. } => {
                let expect = Constraint::from_literals(vec![
                    Literal::eq(Term::rd(a("a"), i("j")), e("e")),
                    Literal::eq(Term::rd(a("a"), i("j")), e("d")),
                ])
                .unwrap();
                assert_eq!(constraint, expect);
            }
            PartitionOutcome::Inconsistent => panic!("expected a merged constraint"),
        }

        let c = Constraint::from_literals(vec![Literal::neq(i("i"), i("j"))]).unwrap();
        let p = prec_of(&c.literals());
        assert!(matches!(apply_partition(&c, &ch, &p).unwrap(), PartitionOutcome::Inconsistent));

        let c = Constraint::from_literals(vec![Literal::eq(Term::rd(a("a"), i("i")), Term::rd(a("a"), i("j")))
            .subst(&BTreeMap::new())])
        .ok();
        assert!(c.is_none());
        let c = Constraint::from_literals(vec![
            Literal::eq(Term::rd(a("a"), i("i")), e("e")),
            Literal::eq(Term::rd(a("a"), i("j")), e("e")),
        ])
        .unwrap();
        let p = prec_of(&c.literals());
        let fine = PartitionChoice::finest(&[k("i", Sort::Index), k("j", Sort::Index)]);
        match apply_partition(&c, &fine, &p).unwrap() {
            PartitionOutcome::Applied { constraint, .. } => {
                assert!(constraint.contains(&Literal::neq(i("i"), i("j"))));
            }
            PartitionOutcome::Inconsistent => panic!("finest partition is consistent"),
        }
    }

    #[test]
    fn guess_stream_counts_and_order() {
        let idx: Vec<Const> = ["i", "j", "k", "l"].iter().map(|n| k(n, Sort::Index)).collect();
        let all: Vec<PartitionChoice> = GuessStream::new(&idx, None).collect();
        assert_eq!(all.len(), 15);
        assert_eq!(all[0].classes.len(), 4);
        assert_eq!(all.last().unwrap().classes.len(), 1);
        let counts: Vec<usize> = all.iter().map(|p| p.classes.len()).collect();
        assert!(counts.windows(2).all(|w| w[0] >= w[1]));
        let mut keys: Vec<Vec<Vec<Const>>> = all
            .iter()
            .map(|p| {
                let mut cl: Vec<Vec<Const>> = p
                    .classes
                    .iter()
                    .map(|c| {
                        let mut c = c.clone();
                        c.sort();
                        c
                    })
                    .collect();
                cl.sort();
                cl
            })
            .collect();
        keys.sort();
        keys.dedup();
        assert_eq!(keys.len(), 15);
        for n in 0..7 {
            let idx: Vec<Const> = (0..n).map(|x| k(&format!("i{x}"), Sort::Index)).collect();
            let bell = [1, 1, 2, 5, 15, 52, 203][n];
            assert_eq!(GuessStream::new(&idx, Some(7)).count(), bell);
        }
    }

    #[test]
    fn saturation_examples() {
        let c = Constraint::from_literals(vec![Literal::eq(a("a"), Term::wr(a("b"), i("i"), e("e")))]).unwrap();
        let mut p = prec_of(&c.literals());
        let out = saturate_reads(&c, &mut FreshGen::new(), &mut p).unwrap();
        assert!(out.contains(&Literal::eq(Term::rd(a("a"), i("i")), e("_k0"))));
        assert!(out.contains(&Literal::eq(Term::rd(a("b"), i("i")), e("_k1"))));
        assert!(is_read_saturated(&out));
        assert_eq!(saturate_reads(&out, &mut FreshGen::new(), &mut p).unwrap(), out);

        let c = Constraint::from_literals(vec![Literal::eq(Term::rd(a("a"), i("i")), e("e"))]).unwrap();
        let mut p = prec_of(&c.literals());
        assert_eq!(saturate_reads(&c, &mut FreshGen::new(), &mut p).unwrap(), c);
    }
}
