//! Group models: a free product of elementary factors with a designated
//! peripheral structure, finite Cayley balls, peripheral coset tables, and
//! closest-point gates.
//!
//! Two peripheral modes are supported. `AllFactors` marks every free factor
//! as peripheral; its left cosets are gated, so closest-point projections are
//! singletons computable from normal forms. `CyclicSubgroup(w)` marks the
//! cyclic subgroup generated by an infinite-order element of a free group;
//! its coset geometry is handled by graph search, not algebra.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{RelhypError, Result};
use crate::graph::{GraphBuilder, WeightedGraph};
use crate::words::{shortlex, Alphabet, FactorSpec, Letter, Word};

pub const DEFAULT_VERTEX_CAP: u64 = 2_000_000;
pub const CAP_ENV_VAR: &str = "RELHYP_CAP_VERTICES";

/// Vertex cap, honoring the `RELHYP_CAP_VERTICES` override.
pub fn configured_cap() -> u64 {
    std::env::var(CAP_ENV_VAR)
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(DEFAULT_VERTEX_CAP)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PeripheralMode {
    AllFactors,
    CyclicSubgroup(Word),
}

/// A group presentation (free product of elementary factors) together with
/// its peripheral structure.
#[derive(Clone, Debug)]
pub struct RelHypSpec {
    alphabet: Alphabet,
    mode: PeripheralMode,
}

impl RelHypSpec {
    pub fn new(factors: Vec<FactorSpec>, mode: PeripheralMode) -> Result<Self> {
        let alphabet = Alphabet::new(factors)?;
        match &mode {
            PeripheralMode::AllFactors => {
                if alphabet.factors().len() < 2 {
                    return Err(RelhypError::InvalidSpec(
                        "all-factors peripheral structure needs at least 2 factors".into(),
                    ));
                }
            }
            PeripheralMode::CyclicSubgroup(w) => {
                if alphabet.factors().len() != 1 {
                    return Err(RelhypError::InvalidSpec(
                        "cyclic peripheral mode needs exactly one factor".into(),
                    ));
                }
                match alphabet.factors()[0] {
                    FactorSpec::Free(n) if n >= 2 => {}
                    _ => {
                        return Err(RelhypError::InvalidSpec(
                            "cyclic peripheral mode needs a free factor of rank at least 2".into(),
                        ))
                    }
                }
                let w = alphabet.normalize(w);
                if w.is_empty() {
                    return Err(RelhypError::InvalidSpec("peripheral word is trivial".into()));
                }
                if w.first() == w.last().map(|&l| crate::words::letter_inverse(l)).as_ref() {
                    return Err(RelhypError::InvalidSpec(
                        "peripheral word must be cyclically reduced".into(),
                    ));
                }
                if is_proper_power(&w) {
                    return Err(RelhypError::InvalidSpec(
                        "peripheral word must not be a proper power".into(),
                    ));
                }
            }
        }
        Ok(RelHypSpec { alphabet, mode })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn mode(&self) -> &PeripheralMode {
        &self.mode
    }

    /// Number of peripheral subgroups.
    pub fn peripheral_count(&self) -> usize {
        match self.mode {
            PeripheralMode::AllFactors => self.alphabet.factors().len(),
            PeripheralMode::CyclicSubgroup(_) => 1,
        }
    }

    /// Stable identifier used in reports and file names.
    pub fn id(&self) -> String {
        let mut s = String::new();
        for (i, f) in self.alphabet.factors().iter().enumerate() {
            if i > 0 {
                s.push('*');
            }
            match f {
                FactorSpec::FreeAbelian(r) => write!(s, "Z{r}").unwrap(),
                FactorSpec::Free(r) => write!(s, "F{r}").unwrap(),
                FactorSpec::Cyclic(q) => write!(s, "C{q}").unwrap(),
            }
        }
        match &self.mode {
            PeripheralMode::AllFactors => s.push_str("/all"),
            PeripheralMode::CyclicSubgroup(w) => {
                write!(s, "/cyclic:{}", self.alphabet.render(w)).unwrap()
            }
        }
        s
    }

    /// Parses a word in the letter naming of [`Alphabet::render`]:
    /// a,b,c,... across factors in order, capitals for inverses.
    pub fn parse_word(&self, text: &str) -> Result<Word> {
        parse_word(&self.alphabet, text)
    }
}

fn is_proper_power(w: &[Letter]) -> bool {
    let n = w.len();
    for period in 1..n {
        if n % period != 0 {
            continue;
        }
        if (period..n).all(|i| w[i] == w[i - period]) {
            return true;
        }
    }
    false
}

pub fn parse_word(alphabet: &Alphabet, text: &str) -> Result<Word> {
    let mut starts = Vec::new();
    let mut base = 0u32;
    for f in alphabet.factors() {
        starts.push(base);
        base += f.rank();
    }
    let mut letters = Vec::with_capacity(text.len());
    for ch in text.chars() {
        if ch == 'e' && text.len() == 1 {
            break;
        }
        if !ch.is_ascii_alphabetic() {
            return Err(RelhypError::Parse(format!("invalid word character {ch:?}")));
        }
        let inv = ch.is_ascii_uppercase();
        let idx = (ch.to_ascii_lowercase() as u8 - b'a') as u32;
        if idx >= base {
            return Err(RelhypError::Parse(format!(
                "letter {ch:?} outside the {base}-generator alphabet"
            )));
        }
        let factor = match starts.binary_search(&idx) {
            Ok(f) => f,
            Err(f) => f - 1,
        };
        letters.push(crate::words::letter(factor, idx - starts[factor], inv));
    }
    Ok(alphabet.normalize(&letters))
}

/// Parses the key-value spec file format:
///
/// ```text
/// factors = Z2, Z2
/// peripheral_mode = all
/// ```
///
/// Factor tokens: `Zn` (free abelian of rank n), `Fn` (free of rank n),
/// `Cq` (cyclic of order q); a bare `Z` means `Z1`. The peripheral mode is
/// `all` or `cyclic:<word>` with the word written as rendered letters.
/// `#` starts a comment.
pub fn parse_spec_text(text: &str) -> Result<RelHypSpec> {
    let mut factors: Option<Vec<FactorSpec>> = None;
    let mut mode_raw: Option<String> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(RelhypError::Parse(format!(
                "line {}: expected key = value, got {line:?}",
                lineno + 1
            )));
        };
        match key.trim() {
            "factors" => {
                let mut fs = Vec::new();
                for tok in value.split(',') {
                    fs.push(parse_factor_token(tok.trim())?);
                }
                factors = Some(fs);
            }
            "peripheral_mode" => mode_raw = Some(value.trim().to_string()),
            other => {
                return Err(RelhypError::Parse(format!(
                    "line {}: unknown key {other:?}",
                    lineno + 1
                )))
            }
        }
    }
    let factors = factors.ok_or_else(|| RelhypError::Parse("missing key: factors".into()))?;
    let mode_raw = mode_raw.ok_or_else(|| RelhypError::Parse("missing key: peripheral_mode".into()))?;
    let alphabet = Alphabet::new(factors.clone())?;
    let mode = if mode_raw == "all" {
        PeripheralMode::AllFactors
    } else if let Some(word_text) = mode_raw.strip_prefix("cyclic:") {
        PeripheralMode::CyclicSubgroup(parse_word(&alphabet, word_text)?)
    } else {
        return Err(RelhypError::Parse(format!(
            "unknown peripheral_mode {mode_raw:?} (expected \"all\" or \"cyclic:<word>\")"
        )));
    };
    RelHypSpec::new(factors, mode)
}

fn parse_factor_token(tok: &str) -> Result<FactorSpec> {
    if tok.is_empty() {
        return Err(RelhypError::Parse("empty factor token".into()));
    }
    let (head, digits) = tok.split_at(1);
    let arg = if digits.is_empty() {
        None
    } else {
        Some(digits.parse::<u64>().map_err(|_| {
            RelhypError::Parse(format!("invalid factor token {tok:?}: bad number {digits:?}"))
        })?)
    };
    let f = match head {
        "Z" => FactorSpec::FreeAbelian(arg.unwrap_or(1) as u32),
        "F" => FactorSpec::Free(
            arg.ok_or_else(|| RelhypError::Parse(format!("factor token {tok:?} needs a rank")))?
                as u32,
        ),
        "C" => FactorSpec::Cyclic(
            arg.ok_or_else(|| RelhypError::Parse(format!("factor token {tok:?} needs an order")))?,
        ),
        _ => {
            return Err(RelhypError::Parse(format!(
                "invalid factor token {tok:?} (expected Zn, Fn, or Cq)"
            )))
        }
    };
    f.validate()?;
    Ok(f)
}

/// Number of elements of the factor at geodesic length exactly `k`.
fn factor_sphere(f: &FactorSpec, k: u32) -> u64 {
    match *f {
        FactorSpec::FreeAbelian(r) => {
            // compositions of k into r signed parts
            if k == 0 {
                return 1;
            }
            let (r, k) = (r as u64, k as u64);
            // sum over j = number of nonzero coordinates
            let mut total = 0u64;
            for j in 1..=r.min(k) {
                total += binom(r, j) * binom(k - 1, j - 1) * (1u64 << j);
            }
            total
        }
        FactorSpec::Free(r) => {
            if k == 0 {
                1
            } else {
                2 * (r as u64) * (2 * r as u64 - 1).pow(k - 1)
            }
        }
        FactorSpec::Cyclic(q) => match k as u64 {
            0 => 1,
            k2 if 2 * k2 < q => 2,
            k2 if 2 * k2 == q => 1,
            _ => 0,
        },
    }
}

fn binom(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc = 1u64;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Exact sphere sizes of the free product up to radius `r`, via the
/// alternating-syllable decomposition.
pub fn predicted_spheres(alphabet: &Alphabet, r: u32) -> Vec<u64> {
    let nf = alphabet.factors().len();
    let mut spheres = vec![0u64; r as usize + 1];
    spheres[0] = 1;
    // last[n][i] = words of length n whose last syllable lies in factor i
    let mut last = vec![vec![0u64; nf]; r as usize + 1];
    for n in 1..=r as usize {
        for (i, f) in alphabet.factors().iter().enumerate() {
            let mut acc = 0u64;
            for l in 1..=n {
                let ways = factor_sphere(f, l as u32);
                if ways == 0 {
                    continue;
                }
                let prev: u64 = if n == l {
                    1
                } else {
                    (0..nf).filter(|&j| j != i).map(|j| last[n - l][j]).sum()
                };
                acc += ways * prev;
            }
            last[n][i] = acc;
        }
        spheres[n] = last[n].iter().sum();
    }
    spheres
}

pub fn predicted_ball_size(alphabet: &Alphabet, r: u32) -> u64 {
    predicted_spheres(alphabet, r).iter().sum()
}

/// A Cayley ball: all group elements of word length at most `radius`, with
/// the induced unit-length Cayley graph. Vertex order is breadth-first.
pub struct Ball {
    alphabet: Alphabet,
    words: Vec<Word>,
    index: HashMap<Word, u32>,
    lengths: Vec<u8>,
    sphere_offsets: Vec<u32>,
    radius: u32,
    graph: WeightedGraph,
}

impl Ball {
    /// Ball of a bare alphabet, with no peripheral structure attached.
    pub fn build_raw(alphabet: Alphabet, radius: u32, cap: u64) -> Result<Ball> {
        let predicted = predicted_ball_size(&alphabet, radius);
        if predicted > cap {
            return Err(RelhypError::CapExceeded { predicted, cap });
        }
        let gens = alphabet.signed_generators();
        let mut words: Vec<Word> = vec![Vec::new()];
        let mut index: HashMap<Word, u32> = HashMap::new();
        index.insert(Vec::new(), 0);
        let mut sphere_offsets = vec![0u32, 1];
        let mut layer_start = 0usize;
        for _r in 1..=radius {
            let layer_end = words.len();
            for v in layer_start..layer_end {
                let w = words[v].clone();
                for &g in &gens {
                    let next = alphabet.mul_letter(&w, g);
                    if next.len() == w.len() + 1 && !index.contains_key(&next) {
                        index.insert(next.clone(), words.len() as u32);
                        words.push(next);
                    }
                }
            }
            sphere_offsets.push(words.len() as u32);
            layer_start = layer_end;
        }
        debug_assert_eq!(words.len() as u64, predicted);

        let mut builder = GraphBuilder::new(words.len());
        for (v, w) in words.iter().enumerate() {
            for &g in &gens {
                let next = alphabet.mul_letter(w, g);
                if let Some(&u) = index.get(&next) {
                    if (v as u32) < u {
                        builder.add_edge(v as u32, u, 1.0);
                    }
                }
            }
        }
        let graph = builder.build()?;
        let lengths = words.iter().map(|w| w.len() as u8).collect();
        Ok(Ball {
            alphabet,
            words,
            index,
            lengths,
            sphere_offsets,
            radius,
            graph,
        })
    }

    pub fn build(spec: &RelHypSpec, radius: u32, cap: u64) -> Result<Ball> {
        Self::build_raw(spec.alphabet().clone(), radius, cap)
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn graph(&self) -> &WeightedGraph {
        &self.graph
    }

    pub fn word(&self, v: u32) -> &Word {
        &self.words[v as usize]
    }

    pub fn words(&self) -> &[Word] {
        &self.words
    }

    pub fn index_of(&self, w: &[Letter]) -> Option<u32> {
        self.index.get(w).copied()
    }

    pub fn word_len(&self, v: u32) -> u32 {
        self.lengths[v as usize] as u32
    }

    /// Vertex ids at word length exactly `r`.
    pub fn sphere(&self, r: u32) -> std::ops::Range<u32> {
        let r = r as usize;
        self.sphere_offsets[r]..self.sphere_offsets[r + 1]
    }

    /// The ball metric is exact (agrees with the group metric) for pairs
    /// whose lengths sum to at most the radius: any geodesic between them
    /// stays inside the ball.
    pub fn exact_pair(&self, u: u32, v: u32) -> bool {
        self.word_len(u) + self.word_len(v) <= self.radius
    }

    /// Word metric between two ball vertices, computed algebraically.
    pub fn dist(&self, u: u32, v: u32) -> u32 {
        let w = self
            .alphabet
            .mul(&self.alphabet.inverse(&self.words[u as usize]), &self.words[v as usize]);
        w.len() as u32
    }

    /// Rendered vertex labels, in vertex order.
    pub fn labels(&self) -> Vec<String> {
        self.words.iter().map(|w| self.alphabet.render(w)).collect()
    }
}

/// Identifier of a peripheral coset within a [`CosetTable`].
pub type CosetId = u32;

#[derive(Clone, Debug)]
pub struct Coset {
    pub peripheral: u32,
    pub rep: Word,
}

/// All peripheral cosets meeting a ball, with canonical (shortlex-minimal)
/// representatives, sorted by (peripheral, representative).
pub struct CosetTable {
    cosets: Vec<Coset>,
    members: Vec<Vec<u32>>,
    /// AllFactors: `vertex * n_periph + i` -> coset of vertex in peripheral i.
    /// CyclicSubgroup: `vertex` -> its unique coset.
    membership: Vec<CosetId>,
    n_periph: usize,
    lookup: HashMap<(u32, Word), CosetId>,
}

impl CosetTable {
    pub fn build(spec: &RelHypSpec, ball: &Ball) -> CosetTable {
        match spec.mode() {
            PeripheralMode::AllFactors => Self::build_all_factors(spec, ball),
            PeripheralMode::CyclicSubgroup(w) => Self::build_cyclic(spec, ball, w),
        }
    }

    fn build_all_factors(spec: &RelHypSpec, ball: &Ball) -> CosetTable {
        let ab = spec.alphabet();
        let n_periph = ab.factors().len();
        let n = ball.len();
        let mut lookup: HashMap<(u32, Word), CosetId> = HashMap::new();
        let mut cosets: Vec<Coset> = Vec::new();
        let mut raw_membership = vec![0u32; n * n_periph];
        for v in 0..n as u32 {
            let w = ball.word(v);
            for i in 0..n_periph {
                let rep: Word = ab.strip_trailing_factor(w, i).to_vec();
                let id = *lookup.entry((i as u32, rep.clone())).or_insert_with(|| {
                    cosets.push(Coset {
                        peripheral: i as u32,
                        rep,
                    });
                    (cosets.len() - 1) as CosetId
                });
                raw_membership[v as usize * n_periph + i] = id;
            }
        }
        Self::finish(cosets, raw_membership, n_periph, n)
    }

    fn build_cyclic(spec: &RelHypSpec, ball: &Ball, w: &Word) -> CosetTable {
        let ab = spec.alphabet();
        let n = ball.len();
        let w_inv = ab.inverse(w);
        let mut lookup: HashMap<(u32, Word), CosetId> = HashMap::new();
        let mut cosets: Vec<Coset> = Vec::new();
        let mut raw_membership = vec![0u32; n];
        for v in 0..n as u32 {
            let rep = cyclic_coset_rep(ab, ball.word(v), w, &w_inv);
            let id = *lookup.entry((0, rep.clone())).or_insert_with(|| {
                cosets.push(Coset { peripheral: 0, rep });
                (cosets.len() - 1) as CosetId
            });
            raw_membership[v as usize] = id;
        }
        Self::finish(cosets, raw_membership, 1, n)
    }

    fn finish(
        cosets: Vec<Coset>,
        raw_membership: Vec<u32>,
        n_periph: usize,
        n_verts: usize,
    ) -> CosetTable {
        // renumber into canonical (peripheral, shortlex rep) order
        let mut order: Vec<u32> = (0..cosets.len() as u32).collect();
        order.sort_by(|&a, &b| {
            let (ca, cb) = (&cosets[a as usize], &cosets[b as usize]);
            ca.peripheral
                .cmp(&cb.peripheral)
                .then_with(|| shortlex(&ca.rep, &cb.rep))
        });
        let mut renumber = vec![0u32; cosets.len()];
        for (new, &old) in order.iter().enumerate() {
            renumber[old as usize] = new as u32;
        }
        let mut sorted: Vec<Option<Coset>> = vec![None; cosets.len()];
        for (old, c) in cosets.into_iter().enumerate() {
            sorted[renumber[old] as usize] = Some(c);
        }
        let cosets: Vec<Coset> = sorted.into_iter().map(Option::unwrap).collect();
        let membership: Vec<u32> = raw_membership.iter().map(|&c| renumber[c as usize]).collect();
        let mut members = vec![Vec::new(); cosets.len()];
        for v in 0..n_verts {
            for i in 0..n_periph {
                members[membership[v * n_periph + i] as usize].push(v as u32);
            }
        }
        let mut lookup = HashMap::new();
        for (id, c) in cosets.iter().enumerate() {
            lookup.insert((c.peripheral, c.rep.clone()), id as CosetId);
        }
        CosetTable {
            cosets,
            members,
            membership,
            n_periph,
            lookup,
        }
    }

    pub fn len(&self) -> usize {
        self.cosets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cosets.is_empty()
    }

    pub fn coset(&self, id: CosetId) -> &Coset {
        &self.cosets[id as usize]
    }

    pub fn cosets(&self) -> &[Coset] {
        &self.cosets
    }

    /// Ball vertices lying in the coset, ascending by vertex id.
    pub fn members(&self, id: CosetId) -> &[u32] {
        &self.members[id as usize]
    }

    /// Coset of `v` for the given peripheral index.
    pub fn coset_of(&self, v: u32, peripheral: usize) -> CosetId {
        self.membership[v as usize * self.n_periph + peripheral]
    }

    pub fn peripheral_count(&self) -> usize {
        self.n_periph
    }

    pub fn find(&self, peripheral: u32, rep: &Word) -> Option<CosetId> {
        self.lookup.get(&(peripheral, rep.clone())).copied()
    }
}

/// Shortlex-minimal element of the orbit v·⟨w⟩; the canonical representative
/// of the left coset of the cyclic peripheral.
fn cyclic_coset_rep(ab: &Alphabet, v: &Word, w: &Word, w_inv: &Word) -> Word {
    let mut best = v.clone();
    for dir in [w, w_inv] {
        let mut cur = v.clone();
        loop {
            cur = ab.mul(&cur, dir);
            if shortlex(&cur, &best) == std::cmp::Ordering::Less {
                best = cur.clone();
            }
            if cur.len() > v.len() + 2 * w.len() {
                break;
            }
        }
    }
    best
}

/// Closest-point projection of `x` onto the coset `rep·H_factor` of a factor
/// peripheral: the gate `rep · s` where `s` is the leading factor syllable of
/// `rep⁻¹x`. The gate is the unique nearest point of the coset, and for every
/// coset meeting a ball and every `x` in the ball it lies in the ball.
pub fn gate(ab: &Alphabet, rep: &Word, factor: usize, x: &Word) -> Word {
    let u = ab.mul(&ab.inverse(rep), x);
    let s = ab.leading_factor(&u, factor);
    let mut g = rep.clone();
    g.extend_from_slice(s);
    g
}

/// Distance in the coned-off graph between two elements, in all-factors mode:
/// the syllable count of x⁻¹y. Every Cayley or cone edge changes the word by
/// one right factor-element, so the syllable count is a lower bound, and the
/// cone edges along the syllable prefixes realize it.
pub fn coned_dist(ab: &Alphabet, x: &Word, y: &Word) -> u32 {
    let u = ab.mul(&ab.inverse(x), y);
    ab.syllable_count(&u) as u32
}
