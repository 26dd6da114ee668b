//! Colored covers with separation and diameter audits, r-multiplicity,
//! rescaled level metrics, the banded horoball cover, and the projection
//! of ball covers to sphere covers in the visual quasimetric.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{RelhypError, Result};
use crate::graph::{MetricOracle, WeightedGraph};
use crate::horoball::{build_horoball, HoroballGraph};

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CoverSpec {
    /// Required separation between subsets of one color class (strict).
    pub r: f64,
    /// Diameter bound per subset.
    pub d: f64,
    pub n_colors: usize,
}

impl CoverSpec {
    pub fn new(r: f64, d: f64, n_colors: usize) -> Result<Self> {
        if r <= 0.0 || d < r || n_colors == 0 {
            return Err(RelhypError::InvalidSpec(format!(
                "cover spec needs 0 < r ≤ D and a color, got r={r} D={d} colors={n_colors}"
            )));
        }
        Ok(CoverSpec { r, d, n_colors })
    }
}

/// Color classes of vertex subsets, ids into some graph.
#[derive(Debug, Clone, Serialize)]
pub struct ColoredCover {
    pub classes: Vec<Vec<Vec<u32>>>,
}

impl ColoredCover {
    pub fn subset_count(&self) -> usize {
        self.classes.iter().map(Vec::len).sum()
    }

    pub fn covered(&self) -> Vec<u32> {
        let mut all: Vec<u32> = self
            .classes
            .iter()
            .flat_map(|c| c.iter().flatten().copied())
            .collect();
        all.sort_unstable();
        all.dedup();
        all
    }

    /// Colors that actually hold a subset.
    pub fn colors_used(&self) -> usize {
        self.classes.iter().filter(|c| !c.is_empty()).count()
    }
}

fn set_distance(oracle: &MetricOracle, a: &[u32], b: &[u32]) -> f64 {
    let mut best = f64::INFINITY;
    for &u in a {
        let row = oracle.row(u);
        for &v in b {
            best = best.min(row[v as usize]);
        }
    }
    best
}

fn subset_diameter(oracle: &MetricOracle, s: &[u32]) -> f64 {
    oracle.subset_diameter(s)
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverAudit {
    pub max_diameter: f64,
    pub min_separation: f64,
    pub subset_count: usize,
    pub ok: bool,
}

/// Exhaustive audit: every subset within the declared diameter, every
/// same-class pair strictly beyond the declared separation.
pub fn audit_cover(g: &WeightedGraph, cover: &ColoredCover, spec: &CoverSpec) -> CoverAudit {
    let oracle = MetricOracle::new(g);
    let mut max_diameter = 0.0f64;
    let mut min_separation = f64::INFINITY;
    for class in &cover.classes {
        for (i, s) in class.iter().enumerate() {
            max_diameter = max_diameter.max(subset_diameter(&oracle, s));
            for t in &class[i + 1..] {
                min_separation = min_separation.min(set_distance(&oracle, s, t));
            }
        }
    }
    CoverAudit {
        max_diameter,
        min_separation,
        subset_count: cover.subset_count(),
        ok: max_diameter <= spec.d + 1e-9 && min_separation > spec.r,
    }
}

/// Greedy cover with its uncovered remainder (nonempty when the color
/// budget is insufficient at this (r, D)).
pub struct CoverBuild {
    pub cover: ColoredCover,
    pub remainder: Vec<u32>,
}

/// First-fit greedy in canonical vertex order over `verts`: a vertex joins
/// an existing subset of the first color where it keeps the diameter bound
/// and the class separation, else founds a subset, else moves to the next
/// color; vertices no color takes land in the remainder.
pub fn greedy_colored_cover(
    g: &WeightedGraph,
    verts: &[u32],
    spec: &CoverSpec,
) -> Result<CoverBuild> {
    let oracle = MetricOracle::new(g);
    let mut classes: Vec<Vec<Vec<u32>>> = vec![Vec::new(); spec.n_colors];
    let mut diams: Vec<Vec<f64>> = vec![Vec::new(); spec.n_colors];
    let mut remainder = Vec::new();
    for &v in verts {
        let row = oracle.row(v);
        let dist_to = |s: &[u32]| s.iter().map(|&u| row[u as usize]).fold(f64::INFINITY, f64::min);
        let reach_of = |s: &[u32]| s.iter().map(|&u| row[u as usize]).fold(0.0f64, f64::max);
        let mut placed = false;
        'colors: for color in 0..spec.n_colors {
            let class = &classes[color];
            for (i, s) in class.iter().enumerate() {
                let grown = diams[color][i].max(reach_of(s));
                if grown <= spec.d
                    && class
                        .iter()
                        .enumerate()
                        .all(|(j, t)| j == i || dist_to(t) > spec.r)
                {
                    classes[color][i].push(v);
                    diams[color][i] = grown;
                    placed = true;
                    break 'colors;
                }
            }
            if classes[color].iter().all(|t| dist_to(t) > spec.r) {
                classes[color].push(vec![v]);
                diams[color].push(0.0);
                placed = true;
                break 'colors;
            }
        }
        if !placed {
            remainder.push(v);
        }
    }
    Ok(CoverBuild {
        cover: ColoredCover { classes },
        remainder,
    })
}

/// Max over witness balls of radius r/2 (centered at covered vertices) of
/// the number of subsets met. Lower bound for the diameter-r definition;
/// exact certificate when classes are r-separated.
pub fn r_multiplicity(g: &WeightedGraph, cover: &ColoredCover, r: f64) -> u32 {
    let oracle = MetricOracle::new(g);
    let subsets: Vec<&Vec<u32>> = cover.classes.iter().flatten().collect();
    let mut worst = 0u32;
    for v in cover.covered() {
        let row = oracle.row(v);
        let met = subsets
            .iter()
            .filter(|s| {
                s.iter()
                    .any(|&u| row[u as usize] <= r / 2.0 + 1e-9)
            })
            .count() as u32;
        worst = worst.max(met);
    }
    worst
}

/// Level-n rescaling of a base metric: d_n = 2 ln(d_Γ e⁻ⁿ + 1).
pub struct RescaledMetric<'g> {
    oracle: MetricOracle<'g>,
    level: f64,
}

impl<'g> RescaledMetric<'g> {
    pub fn dist(&self, u: u32, v: u32) -> f64 {
        rescaled(self.oracle.dist(u, v), self.level)
    }

    pub fn level(&self) -> f64 {
        self.level
    }
}

pub fn rescaled_level_metric(g: &WeightedGraph, level: f64) -> RescaledMetric<'_> {
    RescaledMetric {
        oracle: MetricOracle::new(g),
        level,
    }
}

#[inline]
pub fn rescaled(d_gamma: f64, level: f64) -> f64 {
    2.0 * (d_gamma * (-level).exp() + 1.0).ln()
}

#[derive(Debug, Clone, Serialize)]
pub struct BandInfo {
    pub band: u32,
    pub base_level: u32,
    pub levels: Vec<u32>,
    pub scale_r: f64,
    pub bound_d: f64,
    pub subsets: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct HoroballCoverReport {
    pub depth: u32,
    pub big_r: f64,
    pub band_height: u32,
    pub declared_ratio: f64,
    pub bands: Vec<BandInfo>,
    pub colors_used: usize,
    pub merged_subsets: usize,
    pub max_diameter: f64,
    pub min_separation: f64,
    pub audit_scale: f64,
    pub multiplicity: u32,
}

pub struct HoroballCoverBuild {
    pub horoball: HoroballGraph,
    pub cover: ColoredCover,
    pub report: HoroballCoverReport,
}

/// Banded cover of the horoball over Γ: bands of height R, each carrying a
/// greedy (e^{n+R}, ratio·e^{n+R}) cover of Γ in `base_colors` classes;
/// band b maps base class j to color (b + j) mod (base_colors + 1), and
/// vertically touching same-color bricks merge (the color cycle caps those
/// chains at two bands).
pub fn horoball_cover(
    base: &WeightedGraph,
    depth: u32,
    big_r: f64,
    base_colors: usize,
    ratio: f64,
) -> Result<HoroballCoverBuild> {
    if big_r < 2.0 || ratio < 1.0 {
        return Err(RelhypError::InvalidSpec(
            "horoball cover needs R ≥ 2 and ratio ≥ 1".into(),
        ));
    }
    let horoball = build_horoball(base, depth)?;
    let h = big_r.round() as u32;
    let n_colors = base_colors + 1;
    let base_verts: Vec<u32> = (0..base.vertex_count() as u32).collect();
    let mut bricks: Vec<(usize, Vec<u32>, Vec<u32>)> = Vec::new(); // color, columns, levels
    let mut bands = Vec::new();
    let mut band = 0u32;
    while band * h <= depth {
        let base_level = band * h;
        let levels: Vec<u32> = (base_level..(base_level + h).min(depth + 1)).collect();
        let scale_r = (base_level as f64 + big_r).exp();
        let bound_d = ratio * scale_r;
        let spec = CoverSpec::new(scale_r, bound_d, base_colors)?;
        let built = greedy_colored_cover(base, &base_verts, &spec)?;
        if !built.remainder.is_empty() {
            return Err(RelhypError::CoverFailure(format!(
                "band {band}: {} vertices uncovered at scale {scale_r:.2}",
                built.remainder.len()
            )));
        }
        let mut subsets = 0;
        for (j, class) in built.cover.classes.iter().enumerate() {
            let color = (band as usize + j) % n_colors;
            for s in class {
                bricks.push((color, s.clone(), levels.clone()));
                subsets += 1;
            }
        }
        bands.push(BandInfo {
            band,
            base_level,
            levels,
            scale_r,
            bound_d,
            subsets,
        });
        band += 1;
    }
    // saturation: vertically touching same-color bricks become one subset
    let mut owner: Vec<usize> = (0..bricks.len()).collect();
    fn root(owner: &mut [usize], mut x: usize) -> usize {
        while owner[x] != x {
            owner[x] = owner[owner[x]];
            x = owner[x];
        }
        x
    }
    for i in 0..bricks.len() {
        for j in (i + 1)..bricks.len() {
            if bricks[i].0 != bricks[j].0 {
                continue;
            }
            let (lo, hi) = (&bricks[i], &bricks[j]);
            let adjacent = hi.2.first().map(|&t| t == lo.2.last().unwrap() + 1) == Some(true)
                || lo.2.first().map(|&t| t == hi.2.last().unwrap() + 1) == Some(true);
            if adjacent && lo.1.iter().any(|c| hi.1.binary_search(c).is_ok()) {
                let (a, b) = (root(&mut owner, i), root(&mut owner, j));
                if a != b {
                    owner[b.max(a)] = b.min(a);
                }
            }
        }
    }
    let mut merged: BTreeMap<usize, (usize, Vec<u32>)> = BTreeMap::new();
    for i in 0..bricks.len() {
        let r = root(&mut owner, i);
        let entry = merged.entry(r).or_insert_with(|| (bricks[i].0, Vec::new()));
        for &col in &bricks[i].1 {
            for &lv in &bricks[i].2 {
                entry.1.push(horoball.vertex(col, lv));
            }
        }
    }
    let mut classes: Vec<Vec<Vec<u32>>> = vec![Vec::new(); n_colors];
    for (_, (color, mut verts)) in merged {
        verts.sort_unstable();
        classes[color].push(verts);
    }
    let cover = ColoredCover { classes };
    let oracle = MetricOracle::new(horoball.graph());
    let mut max_diameter = 0.0f64;
    let mut min_separation = f64::INFINITY;
    for class in &cover.classes {
        for (i, s) in class.iter().enumerate() {
            max_diameter = max_diameter.max(subset_diameter(&oracle, s));
            for t in &class[i + 1..] {
                min_separation = min_separation.min(set_distance(&oracle, s, t));
            }
        }
    }
    let audit_scale = 2.0;
    let multiplicity = r_multiplicity(horoball.graph(), &cover, audit_scale);
    let report = HoroballCoverReport {
        depth,
        big_r,
        band_height: h,
        declared_ratio: ratio,
        bands,
        colors_used: cover.colors_used(),
        merged_subsets: cover.subset_count(),
        max_diameter,
        min_separation,
        audit_scale,
        multiplicity,
    };
    Ok(HoroballCoverBuild {
        horoball,
        cover,
        report,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelSlice {
    pub level: u32,
    pub declared_r: f64,
    pub declared_d: f64,
    pub measured_max_diameter: f64,
    pub measured_min_separation: f64,
    pub subsets: usize,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PullbackReport {
    pub slices: Vec<LevelSlice>,
    /// Declared boundedness/disjointness ratio per level (single constant).
    pub ratio: f64,
    /// Max/min of the per-level declared ratios; 1 when the construction is
    /// level-independent.
    pub ratio_spread: f64,
    pub ok: bool,
}

/// Reads the cover back level by level in d_Γ and audits each slice against
/// its declared (e^{n+R}, ratio·e^{n+R}) bounds.
pub fn cover_pullback_check(
    build: &HoroballCoverBuild,
    base: &WeightedGraph,
) -> Result<PullbackReport> {
    if build.cover.subset_count() < 2 || build.cover.colors_used() < 2 {
        return Err(RelhypError::CoverFailure(
            "pullback needs at least two subsets in at least two colors".into(),
        ));
    }
    let oracle = MetricOracle::new(base);
    let hb = &build.horoball;
    // a saturated subset spans two bands: its slice in the lower band is one
    // upper brick's worth of touchers, so the level bound is D_{b+1} + 2 D_b
    let saturation = (build.report.band_height as f64).exp() + 2.0;
    let mut slices = Vec::new();
    for level in 0..=build.report.depth {
        let band = &build.report.bands[(level / build.report.band_height) as usize];
        let slice_bound = build.report.declared_ratio * band.scale_r * saturation;
        let mut per_class: Vec<Vec<Vec<u32>>> = Vec::new();
        for class in &build.cover.classes {
            let mut cls = Vec::new();
            for s in class {
                let cols: Vec<u32> = s
                    .iter()
                    .filter(|&&v| hb.level_of(v) == level)
                    .map(|&v| hb.base_of(v))
                    .collect();
                if !cols.is_empty() {
                    cls.push(cols);
                }
            }
            per_class.push(cls);
        }
        let mut max_diameter = 0.0f64;
        let mut min_separation = f64::INFINITY;
        let mut subsets = 0;
        for cls in &per_class {
            subsets += cls.len();
            for (i, s) in cls.iter().enumerate() {
                max_diameter = max_diameter.max(subset_diameter(&oracle, s));
                for t in &cls[i + 1..] {
                    min_separation = min_separation.min(set_distance(&oracle, s, t));
                }
            }
        }
        let ok = max_diameter <= slice_bound + 1e-9
            && (min_separation.is_infinite() || min_separation > band.scale_r);
        slices.push(LevelSlice {
            level,
            declared_r: band.scale_r,
            declared_d: slice_bound,
            measured_max_diameter: max_diameter,
            measured_min_separation: min_separation,
            subsets,
            ok,
        });
    }
    let ratios: Vec<f64> = slices.iter().map(|s| s.declared_d / s.declared_r).collect();
    let spread = ratios.iter().cloned().fold(f64::MIN, f64::max)
        / ratios.iter().cloned().fold(f64::MAX, f64::min);
    let ok = slices.iter().all(|s| s.ok);
    Ok(PullbackReport {
        slices,
        ratio: build.report.declared_ratio * saturation,
        ratio_spread: spread,
        ok,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundaryReport {
    pub epsilon: f64,
    pub cover_radius: f64,
    pub sphere_size: usize,
    /// Min ambient distance between same-class projecting subsets.
    pub input_separation: f64,
    /// Max ambient diameter over projecting subsets.
    pub input_diameter: f64,
    pub projected_subsets: usize,
    pub dropped_empty: usize,
    /// Measured min same-class visual separation; multiplicity witnesses use
    /// half of it.
    pub visual_scale: f64,
    pub max_visual_diameter: f64,
    pub min_visual_separation: f64,
    pub separation_shape: f64,
    pub diameter_shape: f64,
    pub separation_factor: f64,
    pub diameter_factor: f64,
    pub multiplicity: u32,
}

pub struct BoundaryProjection {
    /// Same class structure as the input, subsets now sphere vertex ids.
    pub cover: ColoredCover,
    pub report: BoundaryReport,
}

/// Projects a cover living at distance `cover_radius` from `base` onto a
/// sphere: a sphere point lands in the shadow of a subset U when its
/// shortest path to the base passes within 1 of U while crossing radius
/// `cover_radius`. Shadow sizes are then read in the visual quasimetric
/// e^(-eps * gromov product); a point's self-distance e^(-eps d(z)) is the
/// floor every shadow diameter inherits.
pub fn boundary_cover_projection(
    g: &WeightedGraph,
    base: u32,
    sphere: &[u32],
    input: &ColoredCover,
    cover_radius: f64,
    epsilon: f64,
) -> Result<BoundaryProjection> {
    if sphere.is_empty() {
        return Err(RelhypError::EmptySet("empty sphere".into()));
    }
    let (dist, parent) = g.shortest_path_tree(base);
    for &z in sphere {
        if !(dist[z as usize] > cover_radius) {
            return Err(RelhypError::Precondition(format!(
                "sphere vertex {z} at distance {} inside cover radius {cover_radius}",
                dist[z as usize]
            )));
        }
    }
    let crossing: Vec<u32> = sphere
        .iter()
        .map(|&z| {
            let mut p = z;
            while dist[p as usize] > cover_radius {
                p = parent[p as usize];
            }
            p
        })
        .collect();

    // shadows, plus subset-to-everything rows restricted to covered vertices
    // (enough to read off ambient separations later)
    let covered = input.covered();
    let pos_of = |v: u32| covered.binary_search(&v).expect("cover vertex");
    struct Sub<'a> {
        class: usize,
        members: &'a [u32],
        shadow: Vec<usize>, // positions into `sphere`
        row: Vec<f64>,      // distances to `covered`
    }
    let mut subs: Vec<Sub> = Vec::new();
    for (class, subsets) in input.classes.iter().enumerate() {
        for s in subsets {
            let full = g.dijkstra_multi(s);
            let shadow: Vec<usize> = (0..sphere.len())
                .filter(|&i| full[crossing[i] as usize] <= 1.0 + 1e-9)
                .collect();
            let row = covered.iter().map(|&v| full[v as usize]).collect();
            subs.push(Sub {
                class,
                members: s,
                shadow,
                row,
            });
        }
    }
    let dropped_empty = subs.iter().filter(|s| s.shadow.is_empty()).count();
    let live: Vec<&Sub> = subs.iter().filter(|s| !s.shadow.is_empty()).collect();
    if live.is_empty() {
        return Err(RelhypError::CoverFailure(
            "no subset casts a shadow on the sphere".into(),
        ));
    }

    let mut input_separation = f64::INFINITY;
    for (i, a) in live.iter().enumerate() {
        for b in &live[i + 1..] {
            if a.class != b.class {
                continue;
            }
            let d = a
                .members
                .iter()
                .map(|&u| b.row[pos_of(u)])
                .fold(f64::INFINITY, f64::min);
            input_separation = input_separation.min(d);
        }
    }
    let mut input_diameter = 0.0f64;
    for s in &live {
        for &u in s.members {
            let row = g.dijkstra(u);
            for &v in s.members {
                input_diameter = input_diameter.max(row[v as usize]);
            }
        }
    }

    // visual quasimetric over the sphere
    let n = sphere.len();
    let mut vis = vec![0.0f32; n * n];
    for (i, &zi) in sphere.iter().enumerate() {
        let row = g.dijkstra(zi);
        for (j, &zj) in sphere.iter().enumerate().skip(i) {
            let p = crate::bowditch::gromov_product(
                dist[zi as usize],
                dist[zj as usize],
                row[zj as usize],
            );
            let v = crate::bowditch::visual_quasimetric(epsilon, p) as f32;
            vis[i * n + j] = v;
            vis[j * n + i] = v;
        }
    }

    let mut max_visual_diameter = 0.0f64;
    for s in &live {
        for (a, &i) in s.shadow.iter().enumerate() {
            for &j in &s.shadow[a..] {
                max_visual_diameter = max_visual_diameter.max(vis[i * n + j] as f64);
            }
        }
    }
    let mut min_visual_separation = f64::INFINITY;
    for (i, a) in live.iter().enumerate() {
        for b in &live[i + 1..] {
            if a.class != b.class {
                continue;
            }
            for &x in &a.shadow {
                for &y in &b.shadow {
                    min_visual_separation = min_visual_separation.min(vis[x * n + y] as f64);
                }
            }
        }
    }
    if !min_visual_separation.is_finite() {
        return Err(RelhypError::CoverFailure(
            "no same-class subset pair projects; nothing to separate".into(),
        ));
    }

    let visual_scale = min_visual_separation;
    let mut multiplicity = 0u32;
    for i in 0..n {
        let met = live
            .iter()
            .filter(|s| {
                s.shadow.contains(&i)
                    || s.shadow
                        .iter()
                        .any(|&j| (vis[i * n + j] as f64) <= visual_scale / 2.0 + 1e-12)
            })
            .count() as u32;
        multiplicity = multiplicity.max(met);
    }

    let separation_shape =
        crate::bowditch::visual_quasimetric(epsilon, cover_radius - input_separation / 2.0);
    let diameter_shape =
        crate::bowditch::visual_quasimetric(epsilon, cover_radius - input_diameter / 2.0);
    let two_sided = |measured: f64, shape: f64| (measured / shape).max(shape / measured);
    let report = BoundaryReport {
        epsilon,
        cover_radius,
        sphere_size: n,
        input_separation,
        input_diameter,
        projected_subsets: live.len(),
        dropped_empty,
        visual_scale,
        max_visual_diameter,
        min_visual_separation,
        separation_shape,
        diameter_shape,
        separation_factor: two_sided(min_visual_separation, separation_shape),
        diameter_factor: two_sided(max_visual_diameter, diameter_shape),
        multiplicity,
    };
    let mut classes: Vec<Vec<Vec<u32>>> = vec![Vec::new(); input.classes.len()];
    for s in &live {
        classes[s.class].push(s.shadow.iter().map(|&i| sphere[i]).collect());
    }
    Ok(BoundaryProjection {
        cover: ColoredCover { classes },
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{cycle_graph, path_graph, GraphBuilder};

    fn z2_ball_graph(radius: i32) -> (WeightedGraph, Vec<(i32, i32)>) {
        let mut pts = Vec::new();
        for x in -radius..=radius {
            for y in -(radius - x.abs())..=(radius - x.abs()) {
                pts.push((x, y));
            }
        }
        pts.sort_unstable();
        let idx = |p: (i32, i32)| pts.binary_search(&p).ok().map(|i| i as u32);
        let mut b = GraphBuilder::new(pts.len());
        for (i, &(x, y)) in pts.iter().enumerate() {
            for q in [(x + 1, y), (x, y + 1)] {
                if let Some(j) = idx(q) {
                    b.add_edge(i as u32, j, 1.0);
                }
            }
        }
        (b.build().unwrap(), pts)
    }

    #[test]
    fn line_cover_alternates_two_colors() {
        let g = path_graph(100);
        let verts: Vec<u32> = (0..101).collect();
        let spec = CoverSpec::new(5.0, 10.0, 2).unwrap();
        let built = greedy_colored_cover(&g, &verts, &spec).unwrap();
        assert!(built.remainder.is_empty());
        let audit = audit_cover(&g, &built.cover, &spec);
        assert!(audit.ok, "audit {audit:?}");
        assert_eq!(r_multiplicity(&g, &built.cover, 5.0), 2);
    }

    #[test]
    fn z2_ball_needs_three_colors_at_scale_four() {
        let (g, pts) = z2_ball_graph(20);
        let verts: Vec<u32> = (0..pts.len() as u32).collect();
        let spec3 = CoverSpec::new(4.0, 16.0, 3).unwrap();
        let built = greedy_colored_cover(&g, &verts, &spec3).unwrap();
        assert!(built.remainder.is_empty(), "remainder {}", built.remainder.len());
        assert!(audit_cover(&g, &built.cover, &spec3).ok);
        assert!(r_multiplicity(&g, &built.cover, 4.0) <= 3);
        let spec2 = CoverSpec::new(4.0, 8.0, 2).unwrap();
        let narrow = greedy_colored_cover(&g, &verts, &spec2).unwrap();
        assert!(!narrow.remainder.is_empty());
    }

    #[test]
    fn multiplicity_of_disjoint_singletons_is_one() {
        let g = path_graph(6);
        let cover = ColoredCover {
            classes: vec![vec![vec![0], vec![3], vec![6]]],
        };
        assert_eq!(r_multiplicity(&g, &cover, 0.0), 1);
    }

    #[test]
    fn rescaled_metric_formula() {
        assert_eq!(rescaled(0.0, 3.0), 0.0);
        let e = std::f64::consts::E;
        assert!((rescaled(e - 1.0, 0.0) - 2.0).abs() < 1e-12);
        let d = 7.0;
        assert!(rescaled(d, 1.0) > rescaled(d, 2.0));
        assert!(rescaled(d, 2.0) > rescaled(d, 3.0));
    }

    #[test]
    fn point_horoball_cover_uses_two_alternating_colors() {
        let g = path_graph(0);
        let build = horoball_cover(&g, 8, 2.0, 1, 2.0).unwrap();
        assert_eq!(build.report.colors_used, 2);
        assert!(build.report.multiplicity <= 2);
        let covered = build.cover.covered();
        assert_eq!(covered.len(), 9);
    }

    #[test]
    fn path_horoball_cover_has_three_colors_and_multiplicity_three() {
        let g = path_graph(200);
        let build = horoball_cover(&g, 8, 2.0, 2, 2.0).unwrap();
        assert_eq!(build.cover.classes.len(), 3);
        assert_eq!(build.report.colors_used, 3);
        assert_eq!(build.cover.covered().len(), 201 * 9);
        assert!(
            build.report.multiplicity <= 3,
            "multiplicity {}",
            build.report.multiplicity
        );
        assert!(build.report.min_separation > 0.0);
        let pullback = cover_pullback_check(&build, &g).unwrap();
        assert!(pullback.ok, "slices {:#?}", pullback.slices);
        assert!(pullback.ratio_spread <= 1.05);
    }

    #[test]
    fn degenerate_single_subset_cover_fails_pullback() {
        let g = path_graph(4);
        let build = horoball_cover(&g, 2, 2.0, 1, 2.0);
        // scale e² already swallows the whole 4-path: a single brick per
        // band, one color pair; pullback then has nothing to separate
        let build = build.unwrap();
        if build.cover.subset_count() < 2 || build.cover.colors_used() < 2 {
            assert!(cover_pullback_check(&build, &g).is_err());
        }
    }

    #[test]
    fn free_group_cylinders_project_to_a_partition() {
        use crate::groups::Ball;
        use crate::words::{Alphabet, FactorSpec};
        let ab = Alphabet::new(vec![FactorSpec::Free(2)]).unwrap();
        let ball = Ball::build_raw(ab, 5, 1 << 20).unwrap();
        let sphere: Vec<u32> = ball.sphere(5).collect();
        let cylinders = ColoredCover {
            classes: vec![ball.sphere(3).map(|v| vec![v]).collect()],
        };
        let proj =
            boundary_cover_projection(ball.graph(), 0, &sphere, &cylinders, 3.0, 0.2).unwrap();
        assert_eq!(proj.report.multiplicity, 1);
        assert_eq!(proj.report.dropped_empty, 0);
        let mut union: Vec<u32> = proj.cover.classes[0].iter().flatten().copied().collect();
        let total = union.len();
        union.sort_unstable();
        union.dedup();
        assert_eq!(union.len(), total, "shadows overlap");
        assert_eq!(union.len(), sphere.len(), "shadows miss sphere points");
        assert!((proj.report.input_separation - 2.0).abs() < 1e-9);
        assert!(proj.report.input_diameter.abs() < 1e-9);
        assert!(
            proj.report.separation_factor < 1.0 + 1e-6,
            "report {:#?}",
            proj.report
        );
        assert!(proj.report.diameter_factor < 1.0 + 1e-6);
    }

    #[test]
    fn projection_without_class_pairs_is_degenerate() {
        let g = path_graph(10);
        let cover = ColoredCover {
            classes: vec![vec![vec![5]]],
        };
        let err = boundary_cover_projection(&g, 0, &[10], &cover, 5.0, 0.2);
        assert!(matches!(err, Err(RelhypError::CoverFailure(_))));
    }

    #[test]
    fn projection_rejects_sphere_inside_cover_radius() {
        let g = path_graph(10);
        let cover = ColoredCover {
            classes: vec![vec![vec![5], vec![8]]],
        };
        let err = boundary_cover_projection(&g, 0, &[4], &cover, 5.0, 0.2);
        assert!(matches!(err, Err(RelhypError::Precondition(_))));
    }

    #[test]
    fn cycle_cover_audit_rejects_undersized_declarations() {
        let g = cycle_graph(24);
        let cover = ColoredCover {
            classes: vec![vec![(0..12).collect::<Vec<u32>>(), (12..24).collect()]],
        };
        let tight = CoverSpec::new(1.0, 11.0, 1).unwrap();
        let audit = audit_cover(&g, &cover, &tight);
        assert!(!audit.ok);
        assert_eq!(audit.min_separation, 1.0);
    }
}
