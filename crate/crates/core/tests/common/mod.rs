//! Seeded random constraints over a small signature.

#![allow(dead_code)]

use axdiff::{Const, Literal, Sort, Term};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const ARRAYS: [&str; 3] = ["a", "b", "c"];
pub const INDICES: [&str; 3] = ["i", "j", "k"];
pub const ELEMS: [&str; 3] = ["d", "e", "f"];

pub struct Gen {
    rng: ChaCha8Rng,
    arrays: usize,
    indices: usize,
    elems: usize,
}

impl Gen {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let arrays = rng.gen_range(1..=3);
        let indices = rng.gen_range(1..=3);
        let elems = rng.gen_range(1..=3);
        Gen {
            rng,
            arrays,
            indices,
            elems,
        }
    }

    fn konst(&mut self, sort: Sort) -> Term {
        let (names, n) = match sort {
            Sort::Array => (&ARRAYS, self.arrays),
            Sort::Index => (&INDICES, self.indices),
            Sort::Elem => (&ELEMS, self.elems),
        };
        let k = self.rng.gen_range(0..n);
        Term::c(&Const::new(names[k], sort))
    }

    pub fn term(&mut self, sort: Sort, depth: usize) -> Term {
        if depth == 0 || self.rng.gen_bool(0.55) {
            return self.konst(sort);
        }
        match sort {
            Sort::Array => {
                let base = self.term(Sort::Array, depth - 1);
                let i = self.term(Sort::Index, depth - 1);
                let e = self.term(Sort::Elem, depth - 1);
                Term::wr(base, i, e)
            }
            Sort::Index => {
                let a = self.term(Sort::Array, depth - 1);
                let b = self.term(Sort::Array, depth - 1);
                Term::diff(a, b)
            }
            Sort::Elem => {
                let a = self.term(Sort::Array, depth - 1);
                let i = self.term(Sort::Index, depth - 1);
                Term::rd(a, i)
            }
        }
    }

    pub fn literal(&mut self) -> Literal {
        let sort = match self.rng.gen_range(0..10) {
            0..=3 => Sort::Array,
            4..=5 => Sort::Index,
            _ => Sort::Elem,
        };
        let l = self.term(sort, 2);
        let r = self.term(sort, 2);
        Literal::new(self.rng.gen_bool(0.6), l, r)
    }

    pub fn constraint(&mut self) -> Vec<Literal> {
        let n = self.rng.gen_range(1..=8);
        (0..n).map(|_| self.literal()).collect()
    }

    /// Splits literals randomly into two non-empty parts (when possible).
    pub fn split(&mut self, lits: &[Literal]) -> (Vec<Literal>, Vec<Literal>) {
        let mut a = Vec::new();
        let mut b = Vec::new();
        for l in lits {
            if self.rng.gen_bool(0.5) {
                a.push(l.clone());
            } else {
                b.push(l.clone());
            }
        }
        if a.is_empty() && b.len() > 1 {
            a.push(b.pop().unwrap());
        }
        if b.is_empty() && a.len() > 1 {
            b.push(a.pop().unwrap());
        }
        (a, b)
    }
}

/// The corpus used by the differential and interpolation checks.
pub fn corpus(n: u64) -> Vec<Vec<Literal>> {
    (0..n).map(|s| Gen::new(s).constraint()).collect()
}
