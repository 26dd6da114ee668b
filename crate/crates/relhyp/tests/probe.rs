use relhyp::embed::{
    compose_embedding, distortion_report, exact_ball_pairs, exact_domain_pairs,
    free_product_join, lower_bound_excess, restriction_check,
};
use relhyp::groups::{configured_cap, Ball, CosetTable, PeripheralMode, RelHypSpec};
use relhyp::projections::{fit_distance_formula, verify_axioms, AuditLevel, ProjectionTable};
use relhyp::quasitree::build_projection_complex;
use relhyp::words::FactorSpec;

#[test]
#[ignore]
fn probe_c6_stability() {
    let spec = RelHypSpec::new(
        vec![FactorSpec::FreeAbelian(1), FactorSpec::FreeAbelian(1)],
        PeripheralMode::AllFactors,
    )
    .unwrap();
    for radius in [6u32, 8] {
        let t0 = std::time::Instant::now();
        let ball = Ball::build(&spec, radius, configured_cap()).unwrap();
        let cosets = CosetTable::build(&spec, &ball);
        let table = ProjectionTable::build(&spec, &ball, &cosets, radius / 2).unwrap();
        let ax = verify_axioms(&table, &ball, &cosets, AuditLevel::Exhaustive);
        let complex = build_projection_complex(&table, 4.0).unwrap();
        let emb = compose_embedding(&spec, &ball, &cosets, &table, &complex).unwrap();
        let pairs = exact_domain_pairs(&emb, &ball);
        let fit = distortion_report(&emb, &ball, &pairs).unwrap();
        let df = fit_distance_formula(&spec, &ball, 4.0).unwrap();
        let excess = lower_bound_excess(&emb, &ball, &pairs, df.lambda, df.mu).unwrap();
        println!(
            "R={radius}: domain={} pairs={} fit=({},{}) df=({},{}) excess={excess} xi3={} elapsed={:?}",
            emb.domain().len(),
            pairs.len(),
            fit.lambda,
            fit.mu,
            df.lambda,
            df.mu,
            ax.xi3,
            t0.elapsed()
        );
        for w in fit.worst.iter().take(3) {
            println!("  worst {} | {} d={} img={}", w.x, w.y, w.dist, w.image_dist);
        }
    }
}

#[test]
#[ignore]
fn probe_c7_stability() {
    let spec = RelHypSpec::new(
        vec![FactorSpec::FreeAbelian(2), FactorSpec::Free(2)],
        PeripheralMode::AllFactors,
    )
    .unwrap();
    for radius in [5u32, 6] {
        let t0 = std::time::Instant::now();
        let ball = Ball::build(&spec, radius, configured_cap()).unwrap();
        let cosets = CosetTable::build(&spec, &ball);
        let emb = free_product_join(&spec, &ball, &cosets).unwrap();
        let pairs = exact_ball_pairs(&ball, radius);
        let fit = distortion_report(&emb, &ball, &pairs).unwrap();
        let fixed = exact_ball_pairs(&ball, 5.min(radius));
        let fixed_fit = distortion_report(&emb, &ball, &fixed).unwrap();
        println!(
            "R={radius}: ball={} pairs={} fit=({},{}) fixed5pairs={} fixedfit=({},{}) elapsed={:?}",
            ball.graph().vertex_count(),
            pairs.len(),
            fit.lambda,
            fit.mu,
            fixed.len(),
            fixed_fit.lambda,
            fixed_fit.mu,
            t0.elapsed()
        );
        let t1 = std::time::Instant::now();
        let restr = restriction_check(&spec, &ball, &cosets, &emb).unwrap();
        println!(
            "  restriction: cosets={} pairs={} max_err={} elapsed={:?}",
            restr.coset_count,
            restr.pair_count,
            restr.max_error,
            t1.elapsed()
        );
        for w in fit.worst.iter().take(3) {
            println!("  worst {} | {} d={} img={}", w.x, w.y, w.dist, w.image_dist);
        }
    }
}

#[test]
#[ignore]
fn probe_c9_bowditch_projection() {
    use relhyp::bowditch::build_compressed;
    use relhyp::covers::{boundary_cover_projection, greedy_colored_cover, ColoredCover, CoverSpec};
    let spec = RelHypSpec::new(
        vec![FactorSpec::FreeAbelian(2), FactorSpec::FreeAbelian(2)],
        PeripheralMode::AllFactors,
    )
    .unwrap();
    let (w, depth, t) = (5u32, 4u32, 5u32);
    let ball = Ball::build(&spec, w, configured_cap()).unwrap();
    let cosets = CosetTable::build(&spec, &ball);
    let g = build_compressed(&spec, &ball, &cosets, depth).unwrap();
    let dist = g.dijkstra(0);
    let mut ds: Vec<f64> = ball.sphere(t).map(|z| dist[z as usize]).collect();
    ds.sort_by(f64::total_cmp);
    println!(
        "sphere({t}) bowditch dist: min={:.2} q1={:.2} med={:.2} q3={:.2} max={:.2}",
        ds[0],
        ds[ds.len() / 4],
        ds[ds.len() / 2],
        ds[3 * ds.len() / 4],
        ds[ds.len() - 1]
    );
    for (mode, big_r, band, cover_r, cover_d, eps) in [
        ("whole", 3.5f64, f64::INFINITY, 2.0f64, 5.5f64, 0.3f64),
        ("whole", 3.5, f64::INFINITY, 2.2, 6.0, 0.3),
        ("whole", 3.5, f64::INFINITY, 2.5, 6.0, 0.3),
        ("whole", 4.0, f64::INFINITY, 2.0, 6.0, 0.3),
    ] {
        let t0 = std::time::Instant::now();
        let mut classes: Vec<Vec<Vec<u32>>> = vec![Vec::new(); 3];
        let mut lo = 0.0f64;
        let mut remainder = 0usize;
        while lo <= big_r {
            let hi = (lo + band).min(big_r);
            let verts_amb: Vec<u32> = (0..g.vertex_count() as u32)
                .filter(|&v| dist[v as usize] > lo - 1e-9 && dist[v as usize] <= hi + 1e-9)
                .filter(|&v| lo == 0.0 || dist[v as usize] > lo)
                .collect();
            if verts_amb.is_empty() {
                lo += band;
                continue;
            }
            let sub = g.induced_subgraph(&verts_amb).unwrap();
            let cspec = CoverSpec::new(cover_r, cover_d, 3).unwrap();
            let verts: Vec<u32> = (0..verts_amb.len() as u32).collect();
            let built = greedy_colored_cover(&sub, &verts, &cspec).unwrap();
            remainder += built.remainder.len();
            for (j, cl) in built.cover.classes.iter().enumerate() {
                for s in cl {
                    classes[j].push(s.iter().map(|&i| verts_amb[i as usize]).collect());
                }
            }
            if band.is_infinite() {
                break;
            }
            lo += band;
        }
        let cover = ColoredCover { classes };
        let covered = cover.covered().len();
        println!(
            "{mode} R={big_r}: subsets={} covered={} remainder={remainder}",
            cover.subset_count(),
            covered
        );
        let sphere: Vec<u32> = ball
            .sphere(t)
            .filter(|&z| dist[z as usize] > big_r)
            .collect();
        match boundary_cover_projection(&g, 0, &sphere, &cover, big_r, eps) {
            Ok(proj) => println!("  {:?} elapsed={:?}", proj.report, t0.elapsed()),
            Err(e) => println!("  projection error: {e}"),
        }
    }
}

#[test]
#[ignore]
fn probe_suites_defaults() {
    use relhyp::suites::{run_suite, SuiteConfig, SUITE_NAMES};
    for name in SUITE_NAMES {
        let t0 = std::time::Instant::now();
        match run_suite(name, &SuiteConfig::default()) {
            Ok(run) => {
                println!(
                    "{name}: pass={} elapsed={:?} failure={:?}",
                    run.pass,
                    t0.elapsed(),
                    run.failure
                );
            }
            Err(e) => println!("{name}: ERROR {e} elapsed={:?}", t0.elapsed()),
        }
    }
}

#[test]
#[ignore]
fn probe_c2_delta() {
    use relhyp::bowditch::{build_compressed, delta_estimate, source_pool};
    use relhyp::words::Alphabet;
    let spec = RelHypSpec::new(
        vec![FactorSpec::FreeAbelian(2), FactorSpec::FreeAbelian(2)],
        PeripheralMode::AllFactors,
    )
    .unwrap();
    for radius in [6u32, 8] {
        let t0 = std::time::Instant::now();
        let ball = Ball::build(&spec, radius, 4_000_000).unwrap();
        let cosets = CosetTable::build(&spec, &ball);
        let g = build_compressed(&spec, &ball, &cosets, 8).unwrap();
        let pool = source_pool(&ball, 24, 16, 7);
        let rep = delta_estimate(&g, &pool, 100_000, 7);
        println!(
            "z2z2 R={radius}: verts={} edges={} pool={} delta={} quads={} elapsed={:?}",
            g.vertex_count(),
            g.edges().len(),
            pool.len(),
            rep.delta,
            rep.quadruple_count,
            t0.elapsed()
        );
    }
    for radius in [4u32, 8] {
        let t0 = std::time::Instant::now();
        let ab = Alphabet::new(vec![FactorSpec::FreeAbelian(2)]).unwrap();
        let ball = Ball::build_raw(ab, radius, 4_000_000).unwrap();
        let pool = source_pool(&ball, 24, 16, 7);
        let rep = delta_estimate(ball.graph(), &pool, 100_000, 7);
        println!(
            "bare z2 R={radius}: verts={} delta={} elapsed={:?}",
            ball.graph().vertex_count(),
            rep.delta,
            t0.elapsed()
        );
    }
}

#[test]
#[ignore]
fn probe_c3_c4_heavy() {
    for factors in [
        vec![FactorSpec::FreeAbelian(1), FactorSpec::FreeAbelian(1)],
        vec![FactorSpec::FreeAbelian(2), FactorSpec::FreeAbelian(2)],
    ] {
        let spec = RelHypSpec::new(factors, PeripheralMode::AllFactors).unwrap();
        for radius in [6u32, 8] {
            let t0 = std::time::Instant::now();
            let ball = Ball::build(&spec, radius, 4_000_000).unwrap();
            let cosets = CosetTable::build(&spec, &ball);
            let table = ProjectionTable::build(&spec, &ball, &cosets, radius / 2).unwrap();
            let built = t0.elapsed();
            let ax = verify_axioms(&table, &ball, &cosets, AuditLevel::Exhaustive);
            let axt = t0.elapsed();
            let df = fit_distance_formula(&spec, &ball, 4.0).unwrap();
            println!(
                "{} R={radius}: family={} xi0={} xi3={} witmax={} bound_ok={} df=({},{}) samples={} build={:?} axioms={:?} total={:?}",
                spec.id(),
                ax.family_size,
                ax.xi0,
                ax.xi3,
                ax.max_witness_count,
                ax.count_bound_ok,
                df.lambda,
                df.mu,
                df.sample_count,
                built,
                axt - built,
                t0.elapsed()
            );
        }
    }
}
