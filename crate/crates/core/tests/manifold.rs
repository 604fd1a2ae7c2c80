mod common;

use common::*;
use dmem_core::dataset::{synthesize, ManifoldKind, SyntheticSpec};
use dmem_core::eval::adjusted_rand_index;
use dmem_core::manifold::{
    build_class_graph, cluster_subclasses, euclidean, geodesic_matrix, minimax_objective,
    model_manifolds, ClassGraph, GeodesicMatrix, ManifoldParams,
};
use dmem_core::rng::seeded;
use rand::Rng;

#[test]
fn geodesics_match_floyd_warshall() {
    let mut rng = seeded(2024);
    for _ in 0..60 {
        let n = rng.random_range(1..=40);
        let density = rng.random_range(0.02..0.4);
        let edges = random_graph(&mut rng, n, density);
        let g = ClassGraph::from_edges(n, &edges).unwrap();
        let s = geodesic_matrix(&g);
        let fw = floyd_warshall(n, &edges);
        for i in 0..n {
            for j in 0..n {
                assert!(rel_close(s.get(i, j), fw[i][j], 1e-12), "({i},{j})");
            }
        }
    }
}

#[test]
fn geodesic_metric_properties() {
    let mut rng = seeded(5);
    for _ in 0..20 {
        let n = rng.random_range(5..30);
        let pts: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let g = build_class_graph(&pts, rng.random_range(1..4)).unwrap();
        // graph invariants
        for i in 0..n {
            assert!(g.neighbors(i).len() >= g.b().min(n - 1));
            for &(j, w) in g.neighbors(i) {
                assert_eq!(g.weight(j, i), Some(w));
                assert_eq!(w, euclidean(&pts[i.min(j)], &pts[i.max(j)]));
            }
        }
        let s = geodesic_matrix(&g);
        for i in 0..n {
            assert_eq!(s.get(i, i), 0.0);
            for j in 0..n {
                assert_eq!(s.get(i, j), s.get(j, i));
                if s.get(i, j).is_finite() {
                    assert!(s.get(i, j) >= euclidean(&pts[i], &pts[j]) * (1.0 - 1e-12));
                }
                for k in 0..n {
                    let (a, b, c) = (s.get(i, j), s.get(i, k), s.get(k, j));
                    if a.is_finite() && b.is_finite() && c.is_finite() {
                        assert!(a <= (b + c) * (1.0 + 1e-12));
                    }
                }
            }
        }
    }
}

#[test]
fn fewer_neighbours_never_shorten_paths() {
    let mut rng = seeded(17);
    for _ in 0..15 {
        let n = rng.random_range(8..35);
        let pts: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let mut prev: Option<GeodesicMatrix> = None;
        for b in (1..=6).rev() {
            let s = geodesic_matrix(&build_class_graph(&pts, b).unwrap());
            if let Some(larger_b) = &prev {
                for i in 0..n {
                    for j in 0..n {
                        assert!(s.get(i, j) >= larger_b.get(i, j) * (1.0 - 1e-12));
                    }
                }
            }
            prev = Some(s);
        }
    }
}

fn to_matrix(d: &[Vec<f64>]) -> GeodesicMatrix {
    let n = d.len();
    GeodesicMatrix::from_rows(n, d.iter().flatten().copied().collect()).unwrap()
}

#[test]
fn complete_linkage_matches_naive_reference() {
    let mut rng = seeded(99);
    for case in 0..60 {
        let n = rng.random_range(1..=30);
        let k = rng.random_range(1..=5usize).min(n);
        let d = random_dissimilarity(&mut rng, n, case % 2 == 0);
        let got = cluster_subclasses::<Vec<f64>>(&to_matrix(&d), k, None).unwrap();
        assert_eq!(got.assignment, naive_complete_linkage(&d, k), "case {case}");
        // determinism
        let again = cluster_subclasses::<Vec<f64>>(&to_matrix(&d), k, None).unwrap();
        assert_eq!(again, got);
    }
}

#[test]
fn six_points_two_groups_is_the_brute_force_optimum() {
    let xs = [0.0, 1.0, 2.0, 10.0, 11.0, 12.0];
    let d: Vec<Vec<f64>> = xs
        .iter()
        .map(|a| xs.iter().map(|b| f64::abs(a - b)).collect())
        .collect();
    let best = partitions(6, 2)
        .into_iter()
        .min_by(|a, b| diameter_objective(&d, a).total_cmp(&diameter_objective(&d, b)))
        .unwrap();
    assert_eq!(best, vec![0, 0, 0, 1, 1, 1]);
    let got = cluster_subclasses::<Vec<f64>>(&to_matrix(&d), 2, None).unwrap();
    assert_eq!(got.assignment, best);
}

#[test]
fn greedy_objective_within_factor_two_of_optimum() {
    let mut rng = seeded(7);
    let mut worst_ratio: f64 = 1.0;
    for _ in 0..40 {
        let n = rng.random_range(3..=8);
        let k = rng.random_range(1..=3);
        let d = random_geodesic(&mut rng, n, false);
        let s = to_matrix(&d);
        let got = cluster_subclasses::<Vec<f64>>(&s, k, None).unwrap();
        let greedy = minimax_objective(&s, &got.assignment);
        let opt = brute_force_minimax(&d, k);
        worst_ratio = worst_ratio.max(if opt > 0.0 { greedy / opt } else { 1.0 });
    }
    println!("worst greedy/optimum diameter ratio: {worst_ratio:.4}");
    assert!(worst_ratio <= 2.0);
}

#[test]
fn merges_never_cross_components_with_finite_distance() {
    let mut rng = seeded(31);
    for _ in 0..30 {
        let n = rng.random_range(4..30);
        let edges = random_graph(&mut rng, n, 0.08);
        let g = ClassGraph::from_edges(n, &edges).unwrap();
        let s = geodesic_matrix(&g);
        let comps = g.components();
        let n_comp = comps.iter().max().unwrap() + 1;
        let pts: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64]).collect();
        for k in 1..=4 {
            let c = cluster_subclasses(&s, k, Some(&pts)).unwrap();
            assert_eq!(c.euclidean_fallback, n_comp > k);
            if !c.euclidean_fallback {
                for i in 0..n {
                    for j in 0..n {
                        if c.assignment[i] == c.assignment[j] {
                            assert_eq!(comps[i], comps[j]);
                        }
                    }
                }
            }
            // never empty sub-classes
            for sub in 0..c.num_subclasses {
                assert!(c.assignment.contains(&sub));
            }
        }
    }
}

#[test]
fn planted_swiss_roll_is_recovered() {
    let spec = SyntheticSpec {
        num_classes: 1,
        subclusters_per_class: 2,
        samples_per_subcluster: 60,
        ambient_dim: 5,
        manifold: ManifoldKind::SwissRoll,
        noise_sigma: 0.01,
        seed: 3,
    };
    let data = synthesize(&spec).unwrap();
    let p = model_manifolds(&data.points, &data.labels, ManifoldParams { k: 2, b: 5 }).unwrap();
    let found: Vec<usize> = p.tags().iter().map(|t| t.1).collect();
    assert_eq!(adjusted_rand_index(&found, &data.subclusters).unwrap(), 1.0);
}

#[test]
fn planted_gap_dwarfs_neighbour_edges() {
    for manifold in [
        ManifoldKind::Arc,
        ManifoldKind::SwissRoll,
        ManifoldKind::GaussianBlob,
    ] {
        let spec = SyntheticSpec {
            num_classes: 1,
            subclusters_per_class: 3,
            samples_per_subcluster: 40,
            ambient_dim: 4,
            manifold,
            noise_sigma: 0.02,
            seed: 8,
        };
        let data = synthesize(&spec).unwrap();
        let g = build_class_graph(&data.points, 5).unwrap();
        let mut intra = Vec::new();
        let mut gap = f64::INFINITY;
        for i in 0..data.points.len() {
            for j in 0..data.points.len() {
                let d = euclidean(&data.points[i], &data.points[j]);
                if data.subclusters[i] != data.subclusters[j] {
                    gap = gap.min(d);
                } else if g.weight(i, j).is_some() {
                    intra.push(d);
                }
            }
        }
        let mean_edge = intra.iter().sum::<f64>() / intra.len() as f64;
        assert!(
            gap >= 3.0 * mean_edge,
            "{manifold:?}: gap {gap} vs edge {mean_edge}"
        );
    }
}
