//! Brute-force enumeration of the seed magma with its own term type.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::fmt;
use std::rc::Rc;

#[derive(Clone, PartialEq, Eq, Hash)]
pub enum T {
    Gen(&'static str),
    Id(u32, Rc<T>),
    Dual(u32, Rc<T>),
    Comp(u32, Rc<T>, Rc<T>),
}

impl fmt::Display for T {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            T::Gen(n) => write!(f, "gen({n})"),
            T::Id(d, x) => write!(f, "id[{d}]({x})"),
            T::Dual(d, x) => write!(f, "dual[{d}]({x})"),
            T::Comp(d, x, y) => write!(f, "comp[{d}]({x},{y})"),
        }
    }
}

// name, directions, faces per direction as (source, target)
type Gen = (&'static str, &'static [u32], &'static [(u32, &'static str, &'static str)]);

const GENS: [Gen; 5] = [
    ("a", &[], &[]),
    ("b", &[], &[]),
    ("f", &[1], &[(1, "a", "b")]),
    ("g", &[1], &[(1, "b", "a")]),
    ("u", &[2], &[(2, "a", "b")]),
];

pub fn dirs(t: &T) -> BTreeSet<u32> {
    match t {
        T::Gen(n) => GENS.iter().find(|g| g.0 == *n).unwrap().1.iter().copied().collect(),
        T::Id(d, x) => {
            let mut s = dirs(x);
            s.insert(*d);
            s
        }
        T::Dual(_, x) => dirs(x),
        T::Comp(_, x, _) => dirs(x),
    }
}

/// `src` selects the source face. Only called on well-typed terms.
pub fn face(t: &T, d: u32, src: bool) -> T {
    match t {
        T::Gen(n) => {
            let g = GENS.iter().find(|g| g.0 == *n).unwrap();
            let (_, s, tg) = g.2.iter().find(|e| e.0 == d).unwrap();
            T::Gen(if src { s } else { tg })
        }
        T::Id(e, x) if *e == d => (**x).clone(),
        T::Id(e, x) => T::Id(*e, Rc::new(face(x, d, src))),
        T::Dual(e, x) if *e == d => face(x, d, !src),
        T::Dual(e, x) => T::Dual(*e, Rc::new(face(x, d, src))),
        T::Comp(e, x, y) if *e == d => face(if src { y } else { x }, d, src),
        T::Comp(e, x, y) => T::Comp(*e, Rc::new(face(x, d, src)), Rc::new(face(y, d, src))),
    }
}

/// Every typed term of size at most `max_size`, by size.
pub fn brute_force(max_dim: usize, ndirs: u32, max_size: usize) -> Vec<Vec<T>> {
    let mut by_size: Vec<Vec<T>> = vec![Vec::new(); max_size + 1];
    if max_size >= 1 {
        by_size[1] = GENS
            .iter()
            .filter(|g| g.1.len() <= max_dim && g.1.iter().all(|&d| d <= ndirs))
            .map(|g| T::Gen(g.0))
            .collect();
    }
    for s in 2..=max_size {
        let mut out: Vec<T> = Vec::new();
        for x in &by_size[s - 1] {
            let ds = dirs(x);
            for d in 1..=ndirs {
                if ds.contains(&d) {
                    out.push(T::Dual(d, Rc::new(x.clone())));
                } else if ds.len() < max_dim {
                    out.push(T::Id(d, Rc::new(x.clone())));
                }
            }
        }
        for i in 1..s - 1 {
            for x in &by_size[i] {
                for y in &by_size[s - 1 - i] {
                    let dx = dirs(x);
                    if dx != dirs(y) {
                        continue;
                    }
                    for &d in &dx {
                        if face(x, d, true) == face(y, d, false) {
                            out.push(T::Comp(d, Rc::new(x.clone()), Rc::new(y.clone())));
                        }
                    }
                }
            }
        }
        by_size[s] = out;
    }
    by_size
}

pub fn level_key(ds: &BTreeSet<u32>) -> String {
    let inner: Vec<String> = ds.iter().map(|d| d.to_string()).collect();
    format!("{}/{{{}}}", ds.len(), inner.join(","))
}

