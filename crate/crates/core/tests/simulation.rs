mod common;

use clustersync::dynamics::{estimate_alpha, NodeDynamics, NodeField, Region};
use clustersync::metrics::*;
use clustersync::simulator::*;
use clustersync::spectral::{build_normalized_laplacian, left_perron_vector, transverse_basis};
use clustersync::synchronizability::cs_fixed_d;
use clustersync::ClusteredGraph;
use common::*;

fn lorenz() -> NodeDynamics {
    NodeDynamics::lorenz(&LORENZ_B, &GAMMA_DIAG).unwrap()
}

fn fixed_system(g: &ClusteredGraph, c: f64) -> CoupledSystem {
    CoupledSystem::new(
        g.clone(),
        lorenz(),
        Coupling::Fixed {
            c,
            laplacian: build_normalized_laplacian(g),
        },
    )
    .unwrap()
}

fn adaptive_system(g: &ClusteredGraph, rho: f64) -> CoupledSystem {
    let d = left_perron_vector(&build_normalized_laplacian(g)).unwrap();
    CoupledSystem::new(
        g.clone(),
        lorenz(),
        Coupling::Adaptive {
            rho: vec![rho; 2 * g.edges().len()],
            d,
        },
    )
    .unwrap()
}

#[test]
fn runs_are_deterministic() {
    let g = fixture("graph1");
    let system = adaptive_system(&g, 1.0);
    let m = g.m();
    let w = 2 * g.edges().len();
    let a = simulate_adaptive(
        &system,
        &random_initial_states(m, 3, 4),
        &random_initial_weights(w, 4),
        5.0,
        0.01,
        10,
    )
    .unwrap();
    let b = simulate_adaptive(
        &system,
        &random_initial_states(m, 3, 4),
        &random_initial_weights(w, 4),
        5.0,
        0.01,
        10,
    )
    .unwrap();
    assert_eq!(a, b);
    assert_ne!(
        random_initial_states(m, 3, 4),
        random_initial_states(m, 3, 5)
    );
}

#[test]
fn initial_data_lies_in_stated_ranges() {
    let x = random_initial_states(12, 3, 9);
    assert!(x.iter().all(|v| (-3.0..=3.0).contains(v)));
    let w = random_initial_weights(40, 9);
    assert!(w.iter().all(|v| (-5.0..=5.0).contains(v)));
}

#[test]
fn sampling_grid_is_uniform() {
    let g = fixture("graph2");
    let run = simulate_fixed(
        &fixed_system(&g, 1.0),
        &random_initial_states(g.m(), 3, 1),
        2.0,
        0.01,
        10,
    )
    .unwrap();
    assert_eq!(run.times.len(), 21);
    for (k, t) in run.times.iter().enumerate() {
        assert!((t - 0.1 * k as f64).abs() <= 1e-12);
    }
}

#[test]
fn lyapunov_v_never_rises_above_threshold() {
    for name in FIXTURES {
        let g = fixture(name);
        let l = build_normalized_laplacian(&g);
        let d = left_perron_vector(&l).unwrap();
        let cs = cs_fixed_d(&l, &d, &transverse_basis(&g, &d).unwrap()).unwrap();
        let region = Region::cube(3, 60.0);
        let alpha = estimate_alpha(&lorenz(), &region, 100_000, 1, 0.1)
            .unwrap()
            .alpha;
        let run = simulate_fixed(
            &fixed_system(&g, 1.2 * alpha / cs),
            &random_initial_states(g.m(), 3, 2),
            20.0,
            0.001,
            10,
        )
        .unwrap();
        assert!(run
            .states
            .iter()
            .all(|s| s.chunks(3).all(|u| region.contains(u))));
        let v = lyapunov_v(&run, &g, d.as_slice());
        for w in v.values.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{name}: V rose {} -> {}", w[0], w[1]);
        }
        assert!(v.last().unwrap() <= 1e-12 * v.values[0].max(1.0));
    }
}

#[test]
fn adaptive_q_is_nonincreasing() {
    let region = Region::cube(3, 60.0);
    let alpha = estimate_alpha(&lorenz(), &region, 100_000, 1, 0.1)
        .unwrap()
        .alpha;
    for name in FIXTURES {
        let g = fixture(name);
        let l = build_normalized_laplacian(&g);
        let d = left_perron_vector(&l).unwrap();
        let cs = cs_fixed_d(&l, &d, &transverse_basis(&g, &d).unwrap()).unwrap();
        let c = 1.2 * alpha / cs;
        let system = adaptive_system(&g, 1.0);
        let reference: Vec<f64> = g
            .directed_edges()
            .iter()
            .map(|&(i, j)| c * l.entries[(i, j)])
            .collect();
        let rho = vec![1.0; reference.len()];
        let w0 = random_initial_weights(reference.len(), 3);
        let run = simulate_adaptive(
            &system,
            &random_initial_states(g.m(), 3, 3),
            &w0,
            10.0,
            0.001,
            10,
        )
        .unwrap();
        assert!(run.is_completed());
        assert!(run
            .states
            .iter()
            .all(|s| s.chunks(3).all(|u| region.contains(u))));
        let q = lyapunov_q(&run, &g, d.as_slice(), &reference, &rho).unwrap();
        for w in q.values.windows(2) {
            assert!(
                w[1] <= w[0] + 1e-9 * w[0].abs(),
                "{name}: Q rose {} -> {}",
                w[0],
                w[1]
            );
        }
    }
}

#[test]
fn weights_stay_constant_on_the_manifold() {
    let g = fixture("graph3");
    let system = adaptive_system(&g, 1.0);
    let centers = [[1.0, -2.0, 0.5], [-1.5, 0.3, 2.0], [0.2, 2.5, -1.0]];
    let x0: Vec<f64> = (0..g.m()).flat_map(|i| centers[g.cluster_of(i)]).collect();
    // weights proportional to the normalized Laplacian keep the manifold invariant
    let l = build_normalized_laplacian(&g);
    let w0: Vec<f64> = g
        .directed_edges()
        .iter()
        .map(|&(i, j)| 3.0 * l.entries[(i, j)])
        .collect();
    let run = simulate_adaptive(&system, &x0, &w0, 5.0, 0.01, 10).unwrap();
    for w in run.weights.as_ref().unwrap() {
        assert_eq!(w, &w0);
    }
    for s in &run.states {
        assert!(intra_spread(s, 3, &g) <= 1e-12);
    }
}

#[test]
fn different_initial_weights_reach_different_limits() {
    let g = fixture("graph1");
    let system = adaptive_system(&g, 1.0);
    let x0 = random_initial_states(g.m(), 3, 1);
    let count = 2 * g.edges().len();
    let a = simulate_adaptive(
        &system,
        &x0,
        &random_initial_weights(count, 1),
        20.0,
        0.01,
        10,
    )
    .unwrap();
    let b = simulate_adaptive(
        &system,
        &x0,
        &random_initial_weights(count, 2),
        20.0,
        0.01,
        10,
    )
    .unwrap();
    let (wa, wb) = (a.weights.unwrap(), b.weights.unwrap());
    let diff: f64 = wa
        .last()
        .unwrap()
        .iter()
        .zip(wb.last().unwrap())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    assert!(diff > 1e-3);
}

#[test]
fn dis_is_translation_invariant() {
    let g = fixture("graph2");
    let run = simulate_fixed(
        &fixed_system(&g, 5.0),
        &random_initial_states(g.m(), 3, 8),
        5.0,
        0.01,
        10,
    )
    .unwrap();
    let mut shifted = run.clone();
    for s in &mut shifted.states {
        for (k, v) in s.iter_mut().enumerate() {
            *v += [3.0, -7.0, 11.0][k % 3];
        }
    }
    let (a, b) = (
        dis_metric(&run, &g).unwrap(),
        dis_metric(&shifted, &g).unwrap(),
    );
    for (x, y) in a.values.iter().zip(&b.values) {
        assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
    }
    let ka = k_metric(&run, &g);
    let kb = k_metric(&shifted, &g);
    for (x, y) in ka.values.iter().zip(&kb.values) {
        assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
    }
}

#[test]
fn k_metric_matches_oracle_along_run() {
    let g = fixture("graph1");
    let run = simulate_fixed(
        &fixed_system(&g, 0.5),
        &random_initial_states(g.m(), 3, 2),
        5.0,
        0.01,
        10,
    )
    .unwrap();
    let k = k_metric(&run, &g);
    for (v, s) in k.values.iter().zip(&run.states) {
        assert!((v - oracle_intra_variance(s, 3, &g)).abs() <= 1e-12 * (1.0 + v));
    }
}

#[test]
fn expanding_field_is_reported_as_divergence() {
    let g = fixture("graph1");
    let dynamics = NodeDynamics::new(
        vec![NodeField::Linear { rate: 5.0, dim: 3 }; 3],
        clustersync::dynamics::Gamma::identity(3),
    )
    .unwrap();
    let system = CoupledSystem::new(
        g.clone(),
        dynamics,
        Coupling::Fixed {
            c: 0.0,
            laplacian: build_normalized_laplacian(&g),
        },
    )
    .unwrap();
    let run = simulate_fixed(&system, &random_initial_states(g.m(), 3, 1), 10.0, 0.01, 10).unwrap();
    match run.status {
        RunStatus::Diverged { t } => assert!(t > 1.0 && t < 5.0, "t = {t}"),
        RunStatus::Completed => panic!("run should diverge"),
    }
    assert!(run.states.iter().all(|s| s.iter().all(|v| v.is_finite())));
}

#[test]
fn weight_report_counts_edges() {
    let g = fixture("graph2");
    let system = adaptive_system(&g, 1.0);
    let count = 2 * g.edges().len();
    let run = simulate_adaptive(
        &system,
        &random_initial_states(g.m(), 3, 1),
        &random_initial_weights(count, 1),
        5.0,
        0.01,
        10,
    )
    .unwrap();
    let report = weight_convergence_report(&run, &g).unwrap();
    assert_eq!(report.intra_total + report.inter_total, count);
    assert_eq!(report.edges.len(), count);
    let intra = g
        .directed_edges()
        .iter()
        .filter(|&&(i, j)| g.cluster_of(i) == g.cluster_of(j))
        .count();
    assert_eq!(report.intra_total, intra);
}
