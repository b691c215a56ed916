//! Lattice expressions, Gram files and a namer for small lattices.
//!
//! Grammar (whitespace ignored):
//!
//! ```text
//! sum   := term ('+' term)*
//! term  := [count] atom ['(' int ')']
//! atom  := 'U' | 'A' n | 'D' n | 'E' n | '[' int ']' | 'btA' | 'bL' | 'bLambda' | 'bR' | '(' sum ')'
//! ```
//!
//! `3U+2[-2]` is the lattice `U + U + U + [-2] + [-2]`, `A2(2)` is `A2` with the form doubled.

use crate::error::{LatticeError, Result};
use crate::genus::same_genus;
use crate::isometry::are_isometric;
use crate::lattice::{self, Lattice};
use crate::linalg::IMat;
use serde::Deserialize;

pub fn parse_lattice(expr: &str) -> Result<Lattice> {
    let chars: Vec<char> = expr.chars().map(|c| if c == '\u{2212}' { '-' } else { c }).collect();
    let mut p = Parser { s: chars, pos: 0 };
    let l = p.sum()?;
    p.skip_ws();
    if p.pos < p.s.len() {
        return Err(p.err(format!("unexpected '{}'", p.s[p.pos])));
    }
    Ok(l)
}

struct Parser {
    s: Vec<char>,
    pos: usize,
}

impl Parser {
    fn err(&self, msg: impl Into<String>) -> LatticeError {
        LatticeError::Parse { pos: self.pos, msg: msg.into() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_word(&mut self, w: &str) -> bool {
        self.skip_ws();
        let w: Vec<char> = w.chars().collect();
        if self.s[self.pos..].starts_with(&w) {
            // `bL` must not swallow the prefix of `bLambda`.
            let next = self.s.get(self.pos + w.len());
            if next.is_some_and(|c| c.is_ascii_alphabetic()) {
                return false;
            }
            self.pos += w.len();
            true
        } else {
            false
        }
    }

    fn unsigned(&mut self) -> Option<u64> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            return None;
        }
        let text: String = self.s[start..self.pos].iter().collect();
        text.parse().ok()
    }

    fn signed(&mut self) -> Result<i64> {
        let neg = self.eat('-');
        let at = self.pos;
        let v = self.unsigned().ok_or_else(|| self.err("expected an integer"))?;
        let v = i64::try_from(v).map_err(|_| LatticeError::Parse { pos: at, msg: "integer too large".into() })?;
        Ok(if neg { -v } else { v })
    }

    fn sum(&mut self) -> Result<Lattice> {
        let mut parts = vec![self.term()?];
        while self.eat('+') {
            parts.push(self.term()?);
        }
        Ok(Lattice::sum_unchecked(&parts))
    }

    fn term(&mut self) -> Result<Lattice> {
        let start = self.pos;
        let count = self.unsigned().unwrap_or(1);
        if count == 0 {
            return Err(LatticeError::Parse { pos: start, msg: "multiplicity must be positive".into() });
        }
        let mut l = self.atom()?;
        let at = self.pos;
        if self.eat('(') {
            let k = self.signed()?;
            if !self.eat(')') {
                return Err(self.err("expected ')'"));
            }
            l = l.rescale(k).map_err(|e| LatticeError::Parse { pos: at, msg: e.to_string() })?;
        }
        let parts = vec![l; count as usize];
        Ok(Lattice::sum_unchecked(&parts))
    }

    fn atom(&mut self) -> Result<Lattice> {
        let at = {
            self.skip_ws();
            self.pos
        };
        let wrap = |r: Result<Lattice>| r.map_err(|e| LatticeError::Parse { pos: at, msg: e.to_string() });
        for (w, f) in [("bLambda", lattice::blambda as fn() -> Lattice), ("btA", lattice::bt_a), ("bL", lattice::bl), ("bR", lattice::br)] {
            if self.eat_word(w) {
                return Ok(f());
            }
        }
        match self.peek() {
            Some('U') => {
                self.pos += 1;
                Ok(lattice::u())
            }
            Some(c @ ('A' | 'D' | 'E')) => {
                self.pos += 1;
                let n = self.unsigned().ok_or_else(|| self.err(format!("expected an index after '{c}'")))?;
                let n = n as usize;
                wrap(match c {
                    'A' => lattice::a(n),
                    'D' => lattice::d(n),
                    _ => lattice::e(n),
                })
            }
            Some('[') => {
                self.pos += 1;
                let m = self.signed()?;
                if !self.eat(']') {
                    return Err(self.err("expected ']'"));
                }
                wrap(lattice::rank1(m))
            }
            Some('(') => {
                self.pos += 1;
                let l = self.sum()?;
                if !self.eat(')') {
                    return Err(self.err("expected ')'"));
                }
                Ok(l)
            }
            Some(c) => Err(self.err(format!("unexpected '{c}'"))),
            None => Err(self.err("unexpected end of input")),
        }
    }
}

#[derive(Deserialize)]
struct GramJson {
    gram: IMat,
}

/// Reads a Gram matrix from whitespace separated rows or `{"gram": [[..], ..]}`.
pub fn parse_gram(text: &str) -> Result<Lattice> {
    let t = text.trim();
    let gram: IMat = if t.starts_with('{') {
        serde_json::from_str::<GramJson>(t)
            .map_err(|e| LatticeError::Parse { pos: e.column(), msg: e.to_string() })?
            .gram
    } else if t.starts_with('[') {
        serde_json::from_str(t).map_err(|e| LatticeError::Parse { pos: e.column(), msg: e.to_string() })?
    } else {
        let mut rows = Vec::new();
        let mut offset = 0;
        for line in text.lines() {
            let mut row = Vec::new();
            for tok in line.split_whitespace() {
                let pos = offset + line.find(tok).unwrap_or(0);
                row.push(tok.parse::<i64>().map_err(|_| LatticeError::Parse { pos, msg: format!("bad integer '{tok}'") })?);
            }
            if !row.is_empty() {
                rows.push(row);
            }
            offset += line.len() + 1;
        }
        rows
    };
    Lattice::new(gram)
}

#[derive(Clone)]
struct Piece {
    name: String,
    lattice: Lattice,
    det: i64,
}

fn piece(name: String, l: Lattice) -> Piece {
    Piece { det: l.abs_det(), name, lattice: l }
}

fn negative_pieces(max_rank: usize) -> Vec<Piece> {
    let mut out = Vec::new();
    for n in (6..=8).rev().filter(|&n| n <= max_rank) {
        out.push(piece(format!("E{n}"), lattice::e(n).unwrap()));
    }
    for n in (4..=max_rank.min(12)).rev() {
        out.push(piece(format!("D{n}"), lattice::d(n).unwrap()));
    }
    for n in (2..=max_rank.min(12)).rev() {
        out.push(piece(format!("A{n}"), lattice::a(n).unwrap()));
    }
    if max_rank >= 4 {
        out.push(piece("btA".into(), lattice::bt_a()));
    }
    for (n, k) in [(2, 2), (3, 2), (4, 2), (2, 3), (2, 4), (2, 6)] {
        if n <= max_rank {
            out.push(piece(format!("A{n}({k})"), lattice::a(n).unwrap().rescale(k).unwrap()));
        }
    }
    if max_rank >= 4 {
        out.push(piece("D4(2)".into(), lattice::d(4).unwrap().rescale(2).unwrap()));
    }
    for k in 1..=64 {
        out.push(piece(format!("[-{}]", 2 * k), lattice::rank1(-2 * k).unwrap()));
    }
    out
}

fn indefinite_pieces(max_rank: usize) -> Vec<Piece> {
    let mut out = vec![piece("U".into(), lattice::u())];
    for k in [2, 3, 4, 6] {
        out.push(piece(format!("U({k})"), lattice::u().rescale(k).unwrap()));
    }
    for k in 1..=32 {
        out.push(piece(format!("[{}]", 2 * k), lattice::rank1(2 * k).unwrap()));
    }
    for n in 2..=max_rank.min(4) {
        out.push(piece(format!("A{n}(-1)"), lattice::a(n).unwrap().negate()));
    }
    out.extend(negative_pieces(max_rank));
    out
}

// Indefinite even lattices with rank >= 2 + l(disc) are alone in their genus.
fn indefinite_unique(l: &Lattice) -> bool {
    l.rank() >= 2 + l.disc_form().length()
}

fn format_name(names: &[String]) -> String {
    let mut out: Vec<String> = Vec::new();
    let mut i = 0;
    while i < names.len() {
        let mut j = i;
        while j < names.len() && names[j] == names[i] {
            j += 1;
        }
        let c = j - i;
        out.push(if c == 1 { names[i].clone() } else { format!("{c}{}", names[i]) });
        i = j;
    }
    out.join("+")
}

struct Namer<'a> {
    target: &'a Lattice,
    pieces: Vec<Piece>,
    definite: bool,
    max_parts: usize,
}

impl Namer<'_> {
    fn search(&self, start: usize, rank_left: usize, det_left: i64, chosen: &mut Vec<usize>) -> Option<String> {
        if rank_left == 0 {
            if det_left != 1 {
                return None;
            }
            let parts: Vec<Lattice> = chosen.iter().map(|&i| self.pieces[i].lattice.clone()).collect();
            let cand = Lattice::sum_unchecked(&parts);
            let ok = if self.definite {
                are_isometric(&cand, self.target).unwrap_or(false)
            } else {
                same_genus(&cand, self.target).unwrap_or(false)
            };
            return ok.then(|| format_name(&chosen.iter().map(|&i| self.pieces[i].name.clone()).collect::<Vec<_>>()));
        }
        if chosen.len() == self.max_parts {
            return None;
        }
        for i in start..self.pieces.len() {
            let p = &self.pieces[i];
            if p.lattice.rank() > rank_left || det_left % p.det != 0 {
                continue;
            }
            chosen.push(i);
            let r = self.search(i, rank_left - p.lattice.rank(), det_left / p.det, chosen);
            chosen.pop();
            if r.is_some() {
                return r;
            }
        }
        None
    }
}

/// Names `l` as a direct sum of standard pieces when one matches: up to
/// isometry for definite lattices, and for indefinite ones by genus when the
/// genus has a single class.
pub fn describe(l: &Lattice) -> Option<String> {
    if l.rank() == 0 {
        return Some("0".into());
    }
    if l.is_positive_definite() {
        return describe(&l.negate()).map(|n| format!("({n})(-1)"));
    }
    let definite = l.is_negative_definite();
    if !definite && !indefinite_unique(l) {
        return None;
    }
    let pieces = if definite { negative_pieces(l.rank()) } else { indefinite_pieces(l.rank()) };
    let namer = Namer { target: l, pieces, definite, max_parts: l.rank() };
    namer.search(0, l.rank(), l.abs_det(), &mut Vec::new())
}
