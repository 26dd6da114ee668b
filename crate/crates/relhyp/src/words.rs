//! Words in free products of elementary factors, kept in normal form.
//!
//! A word is a flat byte string of signed generator letters. The normal form
//! is the alternating-syllable form of the free product, with each syllable
//! canonical inside its factor:
//!
//! * `FreeAbelian(r)`: exponent vector, letters emitted gen-by-gen ascending;
//! * `Free(r)`: freely reduced letter string;
//! * `Cyclic(q)`: single exponent normalized into `(-q/2, q/2]`.
//!
//! Canonical words are geodesic for the standard generators, so word length
//! equals byte length. Letter bytes order by (factor, sign, gen), which makes
//! plain byte comparison the lexicographic tie-break used for coset
//! representatives.

use crate::error::{RelhypError, Result};

/// One elementary factor of the free product.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FactorSpec {
    FreeAbelian(u32),
    Free(u32),
    Cyclic(u64),
}

impl FactorSpec {
    pub fn rank(&self) -> u32 {
        match self {
            FactorSpec::FreeAbelian(r) | FactorSpec::Free(r) => *r,
            FactorSpec::Cyclic(_) => 1,
        }
    }

    /// Finite order of the factor, if any.
    pub fn order(&self) -> Option<u64> {
        match self {
            FactorSpec::Cyclic(q) => Some(*q),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            FactorSpec::FreeAbelian(r) | FactorSpec::Free(r) => {
                if r == 0 || r > MAX_RANK {
                    return Err(RelhypError::InvalidSpec(format!(
                        "factor rank {r} outside 1..={MAX_RANK}"
                    )));
                }
            }
            FactorSpec::Cyclic(q) => {
                if q < 2 {
                    return Err(RelhypError::InvalidSpec(format!(
                        "cyclic order {q} must be at least 2"
                    )));
                }
            }
        }
        Ok(())
    }
}

pub const MAX_RANK: u32 = 8;
pub const MAX_FACTORS: usize = 16;

/// Signed generator letter packed as `factor << 4 | sign << 3 | gen`.
pub type Letter = u8;

#[inline]
pub fn letter(factor: usize, gen: u32, inverse: bool) -> Letter {
    debug_assert!(factor < MAX_FACTORS && gen < MAX_RANK);
    ((factor as u8) << 4) | ((inverse as u8) << 3) | gen as u8
}

#[inline]
pub fn letter_factor(l: Letter) -> usize {
    (l >> 4) as usize
}

#[inline]
pub fn letter_gen(l: Letter) -> u32 {
    (l & 0b111) as u32
}

#[inline]
pub fn letter_is_inverse(l: Letter) -> bool {
    l & 0b1000 != 0
}

#[inline]
pub fn letter_inverse(l: Letter) -> Letter {
    l ^ 0b1000
}

/// A word in canonical normal form, as produced by [`Alphabet::normalize`].
pub type Word = Vec<Letter>;

/// Letter codec plus normal-form arithmetic for a fixed factor list.
#[derive(Clone, Debug)]
pub struct Alphabet {
    factors: Vec<FactorSpec>,
}

#[derive(Clone, Debug)]
enum Syllable {
    Abelian { factor: usize, exps: Vec<i64> },
    Free { factor: usize, letters: Vec<Letter> },
    Cyclic { factor: usize, exp: i64, order: u64 },
}

impl Syllable {
    fn factor(&self) -> usize {
        match self {
            Syllable::Abelian { factor, .. }
            | Syllable::Free { factor, .. }
            | Syllable::Cyclic { factor, .. } => *factor,
        }
    }

    fn is_identity(&self) -> bool {
        match self {
            Syllable::Abelian { exps, .. } => exps.iter().all(|&e| e == 0),
            Syllable::Free { letters, .. } => letters.is_empty(),
            Syllable::Cyclic { exp, .. } => *exp == 0,
        }
    }

    fn absorb(&mut self, l: Letter) {
        let delta: i64 = if letter_is_inverse(l) { -1 } else { 1 };
        match self {
            Syllable::Abelian { exps, .. } => exps[letter_gen(l) as usize] += delta,
            Syllable::Free { letters, .. } => {
                if letters.last() == Some(&letter_inverse(l)) {
                    letters.pop();
                } else {
                    letters.push(l);
                }
            }
            Syllable::Cyclic { exp, order, .. } => {
                *exp = canonical_cyclic(*exp + delta, *order);
            }
        }
    }

    fn emit(&self, out: &mut Word) {
        match self {
            Syllable::Abelian { factor, exps } => {
                for (gen, &e) in exps.iter().enumerate() {
                    let l = letter(*factor, gen as u32, e < 0);
                    for _ in 0..e.unsigned_abs() {
                        out.push(l);
                    }
                }
            }
            Syllable::Free { letters, .. } => out.extend_from_slice(letters),
            Syllable::Cyclic { factor, exp, .. } => {
                let l = letter(*factor, 0, *exp < 0);
                for _ in 0..exp.unsigned_abs() {
                    out.push(l);
                }
            }
        }
    }
}

/// Reduce an exponent mod q into the canonical window `(-q/2, q/2]`.
#[inline]
fn canonical_cyclic(exp: i64, order: u64) -> i64 {
    let q = order as i64;
    let mut e = exp.rem_euclid(q);
    if 2 * e > q {
        e -= q;
    }
    e
}

impl Alphabet {
    pub fn new(factors: Vec<FactorSpec>) -> Result<Self> {
        if factors.is_empty() {
            return Err(RelhypError::InvalidSpec("no factors".into()));
        }
        if factors.len() > MAX_FACTORS {
            return Err(RelhypError::InvalidSpec(format!(
                "{} factors exceeds {MAX_FACTORS}",
                factors.len()
            )));
        }
        for f in &factors {
            f.validate()?;
        }
        Ok(Alphabet { factors })
    }

    pub fn factors(&self) -> &[FactorSpec] {
        &self.factors
    }

    /// All signed generator letters, in byte order. These are the edge labels
    /// of the Cayley graph.
    pub fn signed_generators(&self) -> Vec<Letter> {
        let mut out = Vec::new();
        for (fi, f) in self.factors.iter().enumerate() {
            for inv in [false, true] {
                for gen in 0..f.rank() {
                    // order 2 generators equal their inverse; emit once
                    if inv && f.order() == Some(2) {
                        continue;
                    }
                    out.push(letter(fi, gen, inv));
                }
            }
        }
        out.sort_unstable();
        out
    }

    fn fresh_syllable(&self, factor: usize) -> Syllable {
        match self.factors[factor] {
            FactorSpec::FreeAbelian(r) => Syllable::Abelian {
                factor,
                exps: vec![0; r as usize],
            },
            FactorSpec::Free(_) => Syllable::Free {
                factor,
                letters: Vec::new(),
            },
            FactorSpec::Cyclic(q) => Syllable::Cyclic {
                factor,
                exp: 0,
                order: q,
            },
        }
    }

    /// Normal form of an arbitrary letter string.
    pub fn normalize(&self, letters: &[Letter]) -> Word {
        let mut stack: Vec<Syllable> = Vec::new();
        for &l in letters {
            let f = letter_factor(l);
            debug_assert!(f < self.factors.len(), "letter outside alphabet");
            match stack.last_mut() {
                Some(top) if top.factor() == f => {
                    top.absorb(l);
                    if top.is_identity() {
                        stack.pop();
                    }
                }
                _ => {
                    let mut s = self.fresh_syllable(f);
                    s.absorb(l);
                    if !s.is_identity() {
                        stack.push(s);
                    }
                }
            }
        }
        let mut out = Word::new();
        for s in &stack {
            s.emit(&mut out);
        }
        out
    }

    pub fn mul(&self, a: &[Letter], b: &[Letter]) -> Word {
        let mut buf = Vec::with_capacity(a.len() + b.len());
        buf.extend_from_slice(a);
        buf.extend_from_slice(b);
        self.normalize(&buf)
    }

    pub fn mul_letter(&self, a: &[Letter], l: Letter) -> Word {
        self.mul(a, &[l])
    }

    pub fn inverse(&self, a: &[Letter]) -> Word {
        let mut buf: Vec<Letter> = a.iter().rev().map(|&l| letter_inverse(l)).collect();
        buf = self.normalize(&buf);
        buf
    }

    /// Geodesic word length; canonical words are geodesic letter-by-letter.
    #[inline]
    pub fn word_length(&self, w: &[Letter]) -> u64 {
        w.len() as u64
    }

    /// Syllable decomposition of a canonical word as (factor, byte range).
    pub fn syllables<'a>(&self, w: &'a [Letter]) -> SyllableRuns<'a> {
        SyllableRuns { w, pos: 0 }
    }

    pub fn syllable_count(&self, w: &[Letter]) -> usize {
        self.syllables(w).count()
    }

    /// Drops the trailing syllable when it belongs to `factor`; this is the
    /// canonical representative of the right coset w·H_factor.
    pub fn strip_trailing_factor<'a>(&self, w: &'a [Letter], factor: usize) -> &'a [Letter] {
        let mut end = w.len();
        while end > 0 && letter_factor(w[end - 1]) == factor {
            end -= 1;
        }
        &w[..end]
    }

    /// Leading syllable of `w` when it belongs to `factor`, as a subword.
    pub fn leading_factor<'a>(&self, w: &'a [Letter], factor: usize) -> &'a [Letter] {
        let mut end = 0;
        while end < w.len() && letter_factor(w[end]) == factor {
            end += 1;
        }
        &w[..end]
    }

    /// Human-readable rendering: letters a,b,c,... per factor in order, with
    /// capitals for inverses. Factor boundaries get no separator.
    pub fn render(&self, w: &[Letter]) -> String {
        let mut base = 0u32;
        let mut starts = Vec::with_capacity(self.factors.len());
        for f in &self.factors {
            starts.push(base);
            base += f.rank();
        }
        let mut s = String::with_capacity(w.len());
        for &l in w {
            let idx = starts[letter_factor(l)] + letter_gen(l);
            let ch = (b'a' + idx as u8) as char;
            if letter_is_inverse(l) {
                s.push(ch.to_ascii_uppercase());
            } else {
                s.push(ch);
            }
        }
        if s.is_empty() {
            s.push('e');
        }
        s
    }
}

pub struct SyllableRuns<'a> {
    w: &'a [Letter],
    pos: usize,
}

impl<'a> Iterator for SyllableRuns<'a> {
    type Item = (usize, std::ops::Range<usize>);

    fn next(&mut self) -> Option<Self::Item> {
        if self.pos >= self.w.len() {
            return None;
        }
        let start = self.pos;
        let f = letter_factor(self.w[start]);
        let mut end = start + 1;
        while end < self.w.len() && letter_factor(self.w[end]) == f {
            end += 1;
        }
        self.pos = end;
        Some((f, start..end))
    }
}

/// Total order used everywhere a canonical representative must be picked:
/// shorter first, then bytewise lexicographic.
#[inline]
pub fn shortlex(a: &[Letter], b: &[Letter]) -> std::cmp::Ordering {
    a.len().cmp(&b.len()).then_with(|| a.cmp(b))
}
