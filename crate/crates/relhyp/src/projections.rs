//! Coned-off graphs, closest-point projections onto peripheral cosets, the
//! d^π distances between projections, axiom scans, and the distance formula.
//!
//! For factor peripherals every projection is a gate: π_Y(x) is the single
//! vertex rep·s where s is the leading Y-factor syllable of rep⁻¹x, and the
//! gate is constant over the members of any coset other than Y. The scan
//! machinery exploits this: projections of whole cosets are stored as one
//! factor element per (target, source) pair, and d^π lookups become a small
//! matrix read.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{RelhypError, Result};
use crate::graph::{GraphBuilder, WeightedGraph};
use crate::groups::{coned_dist, gate, Ball, CosetId, CosetTable, PeripheralMode, RelHypSpec};
use crate::words::{letter_factor, shortlex};

pub const DEFAULT_CONE_COSET_CAP: usize = 4096;

/// Cayley ball with a length-1 edge between every pair of distinct vertices
/// sharing a peripheral coset.
pub struct ConedOff {
    graph: WeightedGraph,
    cone_edges: Vec<(u32, u32, CosetId)>,
}

impl ConedOff {
    pub fn graph(&self) -> &WeightedGraph {
        &self.graph
    }

    pub fn cone_edges(&self) -> &[(u32, u32, CosetId)] {
        &self.cone_edges
    }

    pub fn cone_edge_count(&self, c: CosetId) -> usize {
        self.cone_edges.iter().filter(|&&(_, _, cc)| cc == c).count()
    }
}

pub fn build_coned_off(ball: &Ball, cosets: &CosetTable, coset_cap: usize) -> Result<ConedOff> {
    let mut cone_edges = Vec::new();
    for c in 0..cosets.cosets().len() as CosetId {
        let members = cosets.members(c);
        if members.len() > coset_cap {
            return Err(RelhypError::CapExceeded {
                predicted: members.len() as u64,
                cap: coset_cap as u64,
            });
        }
        for i in 0..members.len() {
            for j in (i + 1)..members.len() {
                cone_edges.push((members[i], members[j], c));
            }
        }
    }
    let mut builder = GraphBuilder::new(ball.graph().vertex_count());
    for &(u, v, w) in ball.graph().edges() {
        builder.add_edge(u, v, w);
    }
    for &(u, v, _) in &cone_edges {
        builder.add_edge(u, v, 1.0);
    }
    Ok(ConedOff {
        graph: builder.build()?,
        cone_edges,
    })
}

/// Full argmin set of d(x, ·) over the coset's ball vertices, ascending.
pub fn closest_point_projection(ball: &Ball, cosets: &CosetTable, y: CosetId, x: u32) -> Result<Vec<u32>> {
    let members = cosets.members(y);
    if members.is_empty() {
        return Err(RelhypError::EmptySet(format!("coset {y} has no ball vertices")));
    }
    let mut best = u32::MAX;
    let mut arg = Vec::new();
    for &m in members {
        let d = ball.dist(x, m);
        if d < best {
            best = d;
            arg.clear();
        }
        if d == best {
            arg.push(m);
        }
    }
    Ok(arg)
}

/// Diameter of the union of two projection sets, ambient word metric.
pub fn proj_set_distance(ball: &Ball, p: &[u32], q: &[u32]) -> f64 {
    let union: Vec<u32> = p.iter().chain(q).copied().collect();
    let mut best = 0u32;
    for i in 0..union.len() {
        for j in (i + 1)..union.len() {
            best = best.max(ball.dist(union[i], union[j]));
        }
    }
    best as f64
}

/// Projections of whole cosets onto whole cosets, restricted to a scan
/// family: the cosets whose canonical representative lies in the ball of
/// `family_radius`. Gates are stored as indices into a per-peripheral
/// element list with a precomputed distance matrix, so a d^π lookup is O(1).
pub struct ProjectionTable {
    spec_id: String,
    radius: u32,
    family_radius: u32,
    family: Vec<CosetId>,
    periph_of: Vec<u16>,
    /// Per peripheral: ball ids of the subgroup's own elements, ascending.
    elems: Vec<Vec<u32>>,
    /// Per peripheral: flattened pairwise word-metric distances.
    fdist: Vec<Vec<u16>>,
    /// Row-major (y, x) -> gate of coset x on coset y, as an index into
    /// `elems` of y's peripheral. Diagonal entries are u16::MAX.
    gates: Vec<u16>,
    /// Column-major copy: gates_t[x * n + y] = gates[y * n + x].
    gates_t: Vec<u16>,
}

impl ProjectionTable {
    pub fn build(
        spec: &RelHypSpec,
        ball: &Ball,
        cosets: &CosetTable,
        family_radius: u32,
    ) -> Result<ProjectionTable> {
        if !matches!(spec.mode(), PeripheralMode::AllFactors) {
            return Err(RelhypError::Precondition(
                "projection tables require factor peripherals".into(),
            ));
        }
        let ab = ball.alphabet();
        let family: Vec<CosetId> = (0..cosets.cosets().len() as CosetId)
            .filter(|&c| cosets.coset(c).rep.len() as u32 <= family_radius)
            .collect();
        let n = family.len();
        let periph_of: Vec<u16> = family
            .iter()
            .map(|&c| cosets.coset(c).peripheral as u16)
            .collect();
        let n_periph = cosets.peripheral_count();
        let mut elems: Vec<Vec<u32>> = vec![Vec::new(); n_periph];
        for v in 0..ball.graph().vertex_count() as u32 {
            let w = ball.word(v);
            if w.is_empty() {
                for list in elems.iter_mut() {
                    list.push(v);
                }
            } else if w.iter().all(|&l| letter_factor(l) == letter_factor(w[0])) {
                elems[letter_factor(w[0])].push(v);
            }
        }
        let fdist: Vec<Vec<u16>> = elems
            .iter()
            .map(|list| {
                let m = list.len();
                let mut mat = vec![0u16; m * m];
                for i in 0..m {
                    for j in (i + 1)..m {
                        let d = ball.dist(list[i], list[j]) as u16;
                        mat[i * m + j] = d;
                        mat[j * m + i] = d;
                    }
                }
                mat
            })
            .collect();
        let mut gates = vec![u16::MAX; n * n];
        for (yi, &yc) in family.iter().enumerate() {
            let y = cosets.coset(yc);
            let f = y.peripheral as usize;
            let rep_len = y.rep.len();
            let list = &elems[f];
            for (xi, &xc) in family.iter().enumerate() {
                if xi == yi {
                    continue;
                }
                let g = gate(ab, &y.rep, f, &cosets.coset(xc).rep);
                let h = &g[rep_len..];
                let id = ball
                    .index_of(h)
                    .ok_or_else(|| RelhypError::InvalidGraph("gate outside ball".into()))?;
                let e = list.binary_search(&id).map_err(|_| {
                    RelhypError::InvalidGraph("gate not a peripheral element".into())
                })? as u16;
                gates[yi * n + xi] = e;
            }
        }
        let mut gates_t = vec![u16::MAX; n * n];
        for y in 0..n {
            for x in 0..n {
                gates_t[x * n + y] = gates[y * n + x];
            }
        }
        Ok(ProjectionTable {
            spec_id: spec.id(),
            radius: ball.radius(),
            family_radius,
            family,
            periph_of,
            elems,
            fdist,
            gates,
            gates_t,
        })
    }

    pub fn family(&self) -> &[CosetId] {
        &self.family
    }

    pub fn family_index(&self, c: CosetId) -> Option<usize> {
        self.family.binary_search(&c).ok()
    }

    /// d^π_Y(X, Z) for family indices; X, Z must differ from Y.
    pub fn proj_distance(&self, y: usize, x: usize, z: usize) -> f64 {
        let n = self.family.len();
        let p = self.periph_of[y] as usize;
        let m = self.elems[p].len();
        let gx = self.gates[y * n + x] as usize;
        let gz = self.gates[y * n + z] as usize;
        self.fdist[p][gx * m + gz] as f64
    }

    /// Ball vertex id of the gate of coset x on coset y (family indices).
    pub fn gate_vertex(&self, ball: &Ball, cosets: &CosetTable, y: usize, x: usize) -> u32 {
        let n = self.family.len();
        let yc = cosets.coset(self.family[y]);
        let e = self.gates[y * n + x];
        let h = ball.word(self.elems[yc.peripheral as usize][e as usize]);
        let mut g = yc.rep.clone();
        g.extend_from_slice(h);
        ball.index_of(&g).expect("gate inside ball")
    }
}

#[derive(Clone, Copy, Debug)]
pub enum AuditLevel {
    /// Every member of every family coset (small radii).
    Exhaustive,
    /// A deterministic subset of members per coset pair.
    Probe { per_pair: usize, seed: u64 },
}

#[derive(Clone, Debug, Serialize)]
pub struct AxiomReport {
    pub spec_id: String,
    pub radius: u32,
    pub family_radius: u32,
    pub family_size: usize,
    /// Max diameter of π_Y(X) over audited coset pairs.
    pub xi0: f64,
    pub xi0_argmax: Option<[String; 2]>,
    pub audited_members: u64,
    /// Max over coset triples of the median of the three d^π values.
    pub xi3: f64,
    pub xi3_argmax: Option<[String; 3]>,
    pub triples_scanned: u64,
    /// Threshold used for the witness counts below.
    pub probe: f64,
    pub max_witness_count: u32,
    pub witness_argmax: Option<[String; 2]>,
    pub pairs_counted: u64,
    /// Every witness count stayed within one more than the coned-off
    /// distance between the representatives.
    pub count_bound_ok: bool,
}

fn coset_label(ball: &Ball, cosets: &CosetTable, c: CosetId) -> String {
    let coset = cosets.coset(c);
    format!("{}:{}", coset.peripheral, ball.alphabet().render(&coset.rep))
}

/// Measures diam π_Y(X) over audited members of X, as an index set into Y's
/// peripheral elements.
fn audit_gate_set(
    table: &ProjectionTable,
    ball: &Ball,
    cosets: &CosetTable,
    yi: usize,
    picks: &[u32],
) -> Vec<u16> {
    let ab = ball.alphabet();
    let y = cosets.coset(table.family[yi]);
    let f = y.peripheral as usize;
    let list = &table.elems[f];
    let mut set: Vec<u16> = Vec::with_capacity(picks.len());
    for &v in picks {
        let g = gate(ab, &y.rep, f, ball.word(v));
        let id = ball.index_of(&g[y.rep.len()..]).expect("gate inside ball");
        let e = list.binary_search(&id).expect("gate is a peripheral element") as u16;
        if !set.contains(&e) {
            set.push(e);
        }
    }
    set
}

/// Exhaustive axiom scan over the table's coset family.
///
/// ξ₀ audits gate constancy over coset members (everything within distance 2
/// of the boundary sphere is excluded to keep truncation out of the data).
/// ξ₃ is a full scan over unordered family triples. Witness counts use the
/// probe ξ₃+1 and are computed per pair from the syllable decomposition of
/// the representatives' difference word; the small-radius tests check this
/// against a direct scan.
pub fn verify_axioms(
    table: &ProjectionTable,
    ball: &Ball,
    cosets: &CosetTable,
    audit: AuditLevel,
) -> AxiomReport {
    let ab = ball.alphabet();
    let n = table.family.len();
    let member_cut = ball.radius().saturating_sub(2);

    let mut xi0 = 0u16;
    let mut xi0_argmax = None;
    let mut audited = 0u64;
    let mut rng = match audit {
        AuditLevel::Probe { seed, .. } => Some(ChaCha8Rng::seed_from_u64(seed)),
        AuditLevel::Exhaustive => None,
    };
    for yi in 0..n {
        let p = table.periph_of[yi] as usize;
        let m = table.elems[p].len();
        let fd = &table.fdist[p];
        for xi in 0..n {
            if xi == yi {
                continue;
            }
            let members: Vec<u32> = cosets
                .members(table.family[xi])
                .iter()
                .copied()
                .filter(|&v| ball.word_len(v) <= member_cut)
                .collect();
            if members.is_empty() {
                continue;
            }
            let picks: Vec<u32> = match audit {
                AuditLevel::Exhaustive => members,
                AuditLevel::Probe { per_pair, .. } => {
                    if members.len() <= per_pair {
                        members
                    } else {
                        let rng = rng.as_mut().unwrap();
                        let mut picks = vec![members[0], members[members.len() / 2], members[members.len() - 1]];
                        while picks.len() < per_pair {
                            let v = members[rng.gen_range(0..members.len())];
                            if !picks.contains(&v) {
                                picks.push(v);
                            }
                        }
                        picks
                    }
                }
            };
            audited += picks.len() as u64;
            let set = audit_gate_set(table, ball, cosets, yi, &picks);
            for i in 0..set.len() {
                for j in (i + 1)..set.len() {
                    let d = fd[set[i] as usize * m + set[j] as usize];
                    if d > xi0 {
                        xi0 = d;
                        xi0_argmax = Some([
                            coset_label(ball, cosets, table.family[yi]),
                            coset_label(ball, cosets, table.family[xi]),
                        ]);
                    }
                }
            }
        }
    }

    let mut xi3 = 0u16;
    let mut xi3_arg = None;
    let mut triples = 0u64;
    for a in 0..n {
        let pa = table.periph_of[a] as usize;
        let (fda, ma) = (&table.fdist[pa], table.elems[pa].len());
        let row_a = &table.gates[a * n..(a + 1) * n];
        let col_a = &table.gates_t[a * n..(a + 1) * n];
        for b in (a + 1)..n {
            let pb = table.periph_of[b] as usize;
            let (fdb, mb) = (&table.fdist[pb], table.elems[pb].len());
            let row_b = &table.gates[b * n..(b + 1) * n];
            let col_b = &table.gates_t[b * n..(b + 1) * n];
            let gab = row_a[b] as usize;
            let gba = row_b[a] as usize;
            for c in (b + 1)..n {
                let t_a = fda[gab * ma + row_a[c] as usize];
                let t_b = fdb[gba * mb + row_b[c] as usize];
                let pc = table.periph_of[c] as usize;
                let t_c =
                    table.fdist[pc][col_a[c] as usize * table.elems[pc].len() + col_b[c] as usize];
                let med = (t_a.min(t_b)).max(t_a.min(t_c)).max(t_b.min(t_c));
                if med > xi3 {
                    xi3 = med;
                    xi3_arg = Some([a, b, c]);
                }
            }
            triples += (n - b - 1) as u64;
        }
    }

    let probe = xi3 as u32 + 1;
    let mut max_count = 0u32;
    let mut count_argmax = None;
    let mut pairs = 0u64;
    let mut bound_ok = true;
    for xi in 0..n {
        let x = cosets.coset(table.family[xi]);
        let x_inv = ab.inverse(&x.rep);
        for zi in (xi + 1)..n {
            let z = cosets.coset(table.family[zi]);
            pairs += 1;
            let u = ab.mul(&x_inv, &z.rep);
            let mut count = 0u32;
            let mut prefix = x.rep.clone();
            for (f, range) in ab.syllables(&u) {
                let syll_len = range.len() as u32;
                let next = ab.mul(&prefix, &u[range]);
                if syll_len >= probe {
                    let rep = ab.strip_trailing_factor(&prefix, f);
                    if rep.len() as u32 <= table.family_radius
                        && !(f as u32 == x.peripheral && rep == &x.rep[..])
                        && !(f as u32 == z.peripheral && rep == &z.rep[..])
                    {
                        count += 1;
                    }
                }
                prefix = next;
            }
            if count > max_count {
                max_count = count;
                count_argmax = Some([
                    coset_label(ball, cosets, table.family[xi]),
                    coset_label(ball, cosets, table.family[zi]),
                ]);
            }
            if count > coned_dist(ab, &x.rep, &z.rep) + 1 {
                bound_ok = false;
            }
        }
    }

    AxiomReport {
        spec_id: table.spec_id.clone(),
        radius: table.radius,
        family_radius: table.family_radius,
        family_size: n,
        xi0: xi0 as f64,
        xi0_argmax,
        audited_members: audited,
        xi3: xi3 as f64,
        xi3_argmax: xi3_arg.map(|[a, b, c]| {
            [
                coset_label(ball, cosets, table.family[a]),
                coset_label(ball, cosets, table.family[b]),
                coset_label(ball, cosets, table.family[c]),
            ]
        }),
        triples_scanned: triples,
        probe: probe as f64,
        max_witness_count: max_count,
        witness_argmax: count_argmax,
        pairs_counted: pairs,
        count_bound_ok: bound_ok,
    }
}

/// Direct witness counts for validation: for each family pair (X,Z), the
/// number of other family cosets Y with d^π_Y(X,Z) >= probe. Quadratic in
/// the family times family size; small radii only.
pub fn witness_counts_direct(table: &ProjectionTable, probe: f64) -> Vec<u32> {
    let n = table.family.len();
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for xi in 0..n {
        for zi in (xi + 1)..n {
            let mut count = 0u32;
            for y in 0..n {
                if y == xi || y == zi {
                    continue;
                }
                if table.proj_distance(y, xi, zi) >= probe {
                    count += 1;
                }
            }
            out.push(count);
        }
    }
    out
}

/// Σ over peripheral cosets of the L-cutoff d^π terms, plus the coned-off
/// distance. Values above the cutoff survive, everything else drops:
/// {{v}}_L = v when v > L, else 0. By left invariance the sum depends only
/// on the difference word, whose syllables are exactly the nonzero terms.
pub fn distance_formula_eval(ball: &Ball, x: u32, y: u32, cutoff: f64) -> Result<f64> {
    if !ball.exact_pair(x, y) {
        return Err(RelhypError::Precondition(
            "pair too close to the ball boundary: coset terms would be incomplete".into(),
        ));
    }
    let ab = ball.alphabet();
    let u = ab.mul(&ab.inverse(ball.word(x)), ball.word(y));
    let mut total = ab.syllable_count(&u) as f64;
    for (_, range) in ab.syllables(&u) {
        let len = range.len() as f64;
        if len > cutoff {
            total += len;
        }
    }
    Ok(total)
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidualRow {
    pub word: String,
    pub dist: f64,
    pub formula: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DistanceFormulaFit {
    pub spec_id: String,
    pub radius: u32,
    pub cutoff: f64,
    pub lambda: f64,
    pub mu: f64,
    pub sample_count: u64,
    pub worst: Vec<ResidualRow>,
}

/// Lexicographically minimal (λ, μ) with rhs/λ − μ ≤ d ≤ λ·rhs + μ on every
/// row (d, rhs). On a finite sample λ = 1 always admits a finite μ, so the
/// minimal λ is 1 and μ is the largest two-sided gap.
pub(crate) fn fit_rows(rows: &[(f64, f64)]) -> (f64, f64) {
    let mu = rows
        .iter()
        .map(|&(d, rhs)| (d - rhs).abs())
        .fold(0.0, f64::max);
    (1.0, mu)
}

/// Fits the distance formula over every pair in the exact-metric region.
/// Both sides are left-invariant, so the scan ranges over difference words:
/// one evaluation per ball vertex covers all exact pairs.
pub fn fit_distance_formula(
    spec: &RelHypSpec,
    ball: &Ball,
    cutoff: f64,
) -> Result<DistanceFormulaFit> {
    let ab = ball.alphabet();
    let n = ball.graph().vertex_count() as u32;
    if n == 0 {
        return Err(RelhypError::EmptySet("no pairs to fit".into()));
    }
    let mut rows = Vec::with_capacity(n as usize);
    for v in 0..n {
        let w = ball.word(v);
        let d = ball.word_len(v) as f64;
        let mut rhs = ab.syllable_count(w) as f64;
        for (_, range) in ab.syllables(w) {
            let len = range.len() as f64;
            if len > cutoff {
                rhs += len;
            }
        }
        rows.push((d, rhs));
    }
    let (lambda, mu) = fit_rows(&rows);
    let mut order: Vec<u32> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let ra = (rows[a as usize].0 - rows[a as usize].1).abs();
        let rb = (rows[b as usize].0 - rows[b as usize].1).abs();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let worst = order
        .iter()
        .take(12)
        .map(|&v| {
            let (d, rhs) = rows[v as usize];
            ResidualRow {
                word: ab.render(ball.word(v)),
                dist: d,
                formula: rhs,
                residual: d - rhs,
            }
        })
        .collect();
    Ok(DistanceFormulaFit {
        spec_id: spec.id(),
        radius: ball.radius(),
        cutoff,
        lambda,
        mu,
        sample_count: n as u64,
        worst,
    })
}

/// The coset (over all peripherals) through x whose representative is
/// shortlex-least, ties to the first peripheral.
pub fn canonical_coset(cosets: &CosetTable, x: u32) -> CosetId {
    let mut best: Option<CosetId> = None;
    for p in 0..cosets.peripheral_count() {
        let c = cosets.coset_of(x, p);
        best = Some(match best {
            None => c,
            Some(b) => {
                if shortlex(&cosets.coset(c).rep, &cosets.coset(b).rep) == std::cmp::Ordering::Less
                {
                    c
                } else {
                    b
                }
            }
        });
    }
    best.expect("at least one peripheral")
}

/// Brute-force d^π between two vertices over one coset, via gates.
pub fn vertex_proj_distance(ball: &Ball, cosets: &CosetTable, y: CosetId, x: u32, z: u32) -> f64 {
    let ab = ball.alphabet();
    let coset = cosets.coset(y);
    let f = coset.peripheral as usize;
    let gx = gate(ab, &coset.rep, f, ball.word(x));
    let gz = gate(ab, &coset.rep, f, ball.word(z));
    ab.word_length(&ab.mul(&ab.inverse(&gx), &gz)) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::{configured_cap, Ball, CosetTable, RelHypSpec};
    use crate::words::FactorSpec;

    fn f2(radius: u32) -> (RelHypSpec, Ball, CosetTable) {
        let spec = RelHypSpec::new(
            vec![FactorSpec::FreeAbelian(1), FactorSpec::FreeAbelian(1)],
            PeripheralMode::AllFactors,
        )
        .unwrap();
        let ball = Ball::build(&spec, radius, configured_cap()).unwrap();
        let table = CosetTable::build(&spec, &ball);
        (spec, ball, table)
    }

    fn z2z2(radius: u32) -> (RelHypSpec, Ball, CosetTable) {
        let spec = RelHypSpec::new(
            vec![FactorSpec::FreeAbelian(2), FactorSpec::FreeAbelian(2)],
            PeripheralMode::AllFactors,
        )
        .unwrap();
        let ball = Ball::build(&spec, radius, configured_cap()).unwrap();
        let table = CosetTable::build(&spec, &ball);
        (spec, ball, table)
    }

    #[test]
    fn cone_edges_and_coned_distances() {
        let (spec, ball, cosets) = f2(8);
        let coned = build_coned_off(&ball, &cosets, DEFAULT_CONE_COSET_CAP).unwrap();
        let e_coset = cosets.coset_of(0, 0);
        assert_eq!(cosets.members(e_coset).len(), 17);
        assert_eq!(coned.cone_edge_count(e_coset), 17 * 16 / 2);
        let d = coned.graph().dijkstra(0);
        let a5 = ball.index_of(&spec.parse_word("aaaaa").unwrap()).unwrap();
        let a5b3 = ball.index_of(&spec.parse_word("aaaaabbb").unwrap()).unwrap();
        assert_eq!(d[a5 as usize], 1.0);
        assert_eq!(d[a5b3 as usize], 2.0);
        for v in 0..200u32 {
            if ball.exact_pair(0, v) {
                let alg = coned_dist(ball.alphabet(), ball.word(0), ball.word(v));
                assert_eq!(d[v as usize], alg as f64);
            }
        }
    }

    #[test]
    fn cone_cap_is_enforced() {
        let (_, ball, cosets) = f2(6);
        match build_coned_off(&ball, &cosets, 4).err() {
            Some(RelhypError::CapExceeded { predicted, cap }) => {
                assert!(predicted > 4);
                assert_eq!(cap, 4);
            }
            other => panic!("expected cap error, got {other:?}"),
        }
    }

    #[test]
    fn projection_examples() {
        let (spec, ball, cosets) = f2(8);
        // x in the coset projects to itself
        let a3 = ball.index_of(&spec.parse_word("aaa").unwrap()).unwrap();
        let y = cosets.coset_of(a3, 0);
        assert_eq!(closest_point_projection(&ball, &cosets, y, a3).unwrap(), vec![a3]);
        // π_⟨a⟩(b·aᵏ) = {e}, and d(b·aᵏ, ⟨a⟩) = k+1
        let e_coset = cosets.coset_of(0, 0);
        for k in 0..=5u32 {
            let text = format!("b{}", "a".repeat(k as usize));
            let v = ball.index_of(&spec.parse_word(&text).unwrap()).unwrap();
            let proj = closest_point_projection(&ball, &cosets, e_coset, v).unwrap();
            assert_eq!(proj, vec![0]);
            let d_min = cosets
                .members(e_coset)
                .iter()
                .map(|&m| ball.dist(v, m))
                .min()
                .unwrap();
            assert_eq!(d_min, k + 1);
        }
    }

    #[test]
    fn projection_argmin_is_the_gate() {
        let (_, ball, cosets) = z2z2(4);
        let ab = ball.alphabet();
        for c in 0..cosets.cosets().len() as CosetId {
            let coset = cosets.coset(c);
            if coset.rep.len() > 2 {
                continue;
            }
            for x in 0..ball.graph().vertex_count() as u32 {
                if ball.word_len(x) > 2 {
                    break;
                }
                let proj = closest_point_projection(&ball, &cosets, c, x).unwrap();
                let g = gate(ab, &coset.rep, coset.peripheral as usize, ball.word(x));
                assert_eq!(proj, vec![ball.index_of(&g).unwrap()]);
            }
        }
    }

    #[test]
    fn proj_distance_spec_example() {
        let (spec, ball, cosets) = f2(8);
        let y = cosets.coset_of(0, 0);
        let x_v = ball.index_of(&spec.parse_word("b").unwrap()).unwrap();
        let z_v = ball.index_of(&spec.parse_word("aaaaab").unwrap()).unwrap();
        let px = closest_point_projection(&ball, &cosets, y, x_v).unwrap();
        let pz = closest_point_projection(&ball, &cosets, y, z_v).unwrap();
        assert_eq!(px, vec![0]);
        let a5 = ball.index_of(&spec.parse_word("aaaaa").unwrap()).unwrap();
        assert_eq!(pz, vec![a5]);
        assert_eq!(proj_set_distance(&ball, &px, &pz), 5.0);
        assert_eq!(proj_set_distance(&ball, &pz, &px), 5.0);
    }

    #[test]
    fn axioms_exhaustive_small_z2z2() {
        let (spec, ball, cosets) = z2z2(4);
        let table = ProjectionTable::build(&spec, &ball, &cosets, 2).unwrap();
        let report = verify_axioms(&table, &ball, &cosets, AuditLevel::Exhaustive);
        assert_eq!(report.xi0, 0.0);
        assert_eq!(report.xi3, 0.0);
        assert_eq!(report.probe, 1.0);
        assert!(report.count_bound_ok);
        assert!(report.triples_scanned > 0);
        // the syllable-decomposition counts agree with the direct scan
        let direct = witness_counts_direct(&table, report.probe);
        let n = table.family().len();
        let mut k = 0;
        let ab = ball.alphabet();
        for xi in 0..n {
            for zi in (xi + 1)..n {
                let x = cosets.coset(table.family()[xi]);
                let z = cosets.coset(table.family()[zi]);
                let u = ab.mul(&ab.inverse(&x.rep), &z.rep);
                let mut count = 0u32;
                let mut prefix = x.rep.clone();
                for (f, range) in ab.syllables(&u) {
                    let next = ab.mul(&prefix, &u[range.clone()]);
                    if range.len() as u32 >= report.probe as u32 {
                        let rep = ab.strip_trailing_factor(&prefix, f);
                        if rep.len() as u32 <= 2
                            && !(f as u32 == x.peripheral && rep == &x.rep[..])
                            && !(f as u32 == z.peripheral && rep == &z.rep[..])
                        {
                            count += 1;
                        }
                    }
                    prefix = next;
                }
                assert_eq!(count, direct[k], "pair ({xi},{zi})");
                k += 1;
            }
        }
        assert_eq!(report.max_witness_count, direct.iter().copied().max().unwrap());
    }

    #[test]
    fn axioms_f2_zero_constants() {
        let (spec, ball, cosets) = f2(6);
        let table = ProjectionTable::build(&spec, &ball, &cosets, 3).unwrap();
        let report = verify_axioms(&table, &ball, &cosets, AuditLevel::Exhaustive);
        assert_eq!(report.xi0, 0.0);
        assert_eq!(report.xi3, 0.0);
        assert!(report.count_bound_ok);
    }

    #[test]
    fn probe_audit_agrees_with_exhaustive() {
        let (spec, ball, cosets) = z2z2(4);
        let table = ProjectionTable::build(&spec, &ball, &cosets, 2).unwrap();
        let full = verify_axioms(&table, &ball, &cosets, AuditLevel::Exhaustive);
        let probe = verify_axioms(
            &table,
            &ball,
            &cosets,
            AuditLevel::Probe { per_pair: 4, seed: 9 },
        );
        assert_eq!(full.xi0, probe.xi0);
        assert_eq!(full.xi3, probe.xi3);
        assert_eq!(full.max_witness_count, probe.max_witness_count);
    }

    #[test]
    fn formula_eval_examples() {
        let (spec, ball, _) = f2(8);
        let a5b3 = ball.index_of(&spec.parse_word("aaaaabbb").unwrap()).unwrap();
        assert_eq!(distance_formula_eval(&ball, 0, a5b3, 2.0).unwrap(), 10.0);
        assert_eq!(distance_formula_eval(&ball, 0, 0, 2.0).unwrap(), 0.0);
        assert_eq!(
            distance_formula_eval(&ball, 0, a5b3, f64::INFINITY).unwrap(),
            coned_dist(ball.alphabet(), ball.word(0), ball.word(a5b3)) as f64
        );
        // cutoff at least the radius keeps only the coned-off term
        let d8 = distance_formula_eval(&ball, 0, a5b3, 8.0).unwrap();
        assert_eq!(d8, 2.0);
        let far = ball.index_of(&spec.parse_word("aaaaaaa").unwrap()).unwrap();
        assert!(distance_formula_eval(&ball, a5b3, far, 2.0).is_err());
    }

    #[test]
    fn formula_eval_matches_coset_scan() {
        let (_, ball, cosets) = f2(6);
        let coned = build_coned_off(&ball, &cosets, DEFAULT_CONE_COSET_CAP).unwrap();
        let cutoff = 2.0;
        for x in [0u32, 1, 5] {
            let dhat = coned.graph().dijkstra(x);
            for y in 0..ball.graph().vertex_count() as u32 {
                if !ball.exact_pair(x, y) || x == y {
                    continue;
                }
                let mut brute = dhat[y as usize];
                for c in 0..cosets.cosets().len() as CosetId {
                    let t = vertex_proj_distance(&ball, &cosets, c, x, y);
                    if t > cutoff {
                        brute += t;
                    }
                }
                let fast = distance_formula_eval(&ball, x, y, cutoff).unwrap();
                assert_eq!(fast, brute, "pair ({x},{y})");
            }
        }
    }

    #[test]
    fn fit_is_lexicographic_and_matches_structure() {
        assert_eq!(fit_rows(&[(3.0, 3.0), (7.0, 7.0)]), (1.0, 0.0));
        let (spec, ball, _) = f2(6);
        let fit = fit_distance_formula(&spec, &ball, 4.0).unwrap();
        assert_eq!(fit.lambda, 1.0);
        assert_eq!(fit.mu, 4.0);
        let (spec, ball, _) = z2z2(6);
        let fit = fit_distance_formula(&spec, &ball, 4.0).unwrap();
        assert_eq!(fit.lambda, 1.0);
        assert_eq!(fit.mu, 4.0);
        assert_eq!(fit.sample_count, ball.graph().vertex_count() as u64);
    }

    #[test]
    fn gates_do_not_expand_distances() {
        let (_, ball, cosets) = z2z2(4);
        let ab = ball.alphabet();
        for c in [0 as CosetId, 3, 10] {
            let coset = cosets.coset(c);
            for x in 0..120u32 {
                for y in 0..60u32 {
                    let gx = gate(ab, &coset.rep, coset.peripheral as usize, ball.word(x));
                    let gy = gate(ab, &coset.rep, coset.peripheral as usize, ball.word(y));
                    let dg = ab.word_length(&ab.mul(&ab.inverse(&gx), &gy));
                    assert!(dg as u32 <= ball.dist(x, y));
                }
            }
        }
    }

    #[test]
    fn canonical_coset_prefers_shortlex_least_rep() {
        let (spec, ball, cosets) = f2(6);
        // x = a³: coset ⟨a⟩ (rep e) beats a³⟨b⟩ (rep a³)
        let a3 = ball.index_of(&spec.parse_word("aaa").unwrap()).unwrap();
        let c = canonical_coset(&cosets, a3);
        assert_eq!(cosets.coset(c).rep.len(), 0);
        assert_eq!(cosets.coset(c).peripheral, 0);
        // identity: tie broken to the first peripheral
        let c0 = canonical_coset(&cosets, 0);
        assert_eq!(cosets.coset(c0).peripheral, 0);
    }
}
