//! Independent oracles shared by the integration and acceptance suites.
//! Nothing here calls into the code paths it is used to check.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random symmetric weighted graph (possibly disconnected) as an edge list.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, density: f64) -> Vec<(usize, usize, f64)> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < density {
                edges.push((i, j, rng.random_range(0.0..10.0)));
            }
        }
    }
    edges
}

/// Floyd-Warshall over an edge list; `INFINITY` for unreachable pairs.
pub fn floyd_warshall(n: usize, edges: &[(usize, usize, f64)]) -> Vec<Vec<f64>> {
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for &(i, j, w) in edges {
        if w < d[i][j] {
            d[i][j] = w;
            d[j][i] = w;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    if a.is_infinite() || b.is_infinite() {
        return a == b;
    }
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

/// Random symmetric, zero-diagonal dissimilarity matrix with positive
/// entries, as rows.
pub fn random_dissimilarity(rng: &mut ChaCha8Rng, n: usize, distinct: bool) -> Vec<Vec<f64>> {
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            // Integer-valued draws produce ties, which exercise tie-breaking.
            let v = if distinct {
                rng.random_range(0.1..100.0)
            } else {
                rng.random_range(1..8) as f64
            };
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    d
}

/// Shortest-path closure of a random connected graph, i.e. a geodesic
/// matrix. Integer weights produce ties.
pub fn random_geodesic(rng: &mut ChaCha8Rng, n: usize, integer_weights: bool) -> Vec<Vec<f64>> {
    let weight = |rng: &mut ChaCha8Rng| {
        if integer_weights {
            rng.random_range(1..6) as f64
        } else {
            rng.random_range(0.1..10.0)
        }
    };
    let mut edges = Vec::new();
    for i in 1..n {
        // A random spanning tree keeps the graph connected.
        let parent = rng.random_range(0..i);
        edges.push((parent, i, weight(rng)));
    }
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < 0.3 {
                edges.push((i, j, weight(rng)));
            }
        }
    }
    floyd_warshall(n, &edges)
}

/// Textbook agglomerative clustering: every step recomputes complete-linkage
/// distances between all current clusters from their members, merges the
/// closest pair (ties to the lexicographically smallest pair of smallest
/// members) and stops at `k` clusters. Labels are numbered by smallest member.
pub fn naive_complete_linkage(d: &[Vec<f64>], k: usize) -> Vec<usize> {
    let n = d.len();
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    while clusters.len() > k {
        clusters.sort_by_key(|c| *c.iter().min().unwrap());
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let mut link = f64::NEG_INFINITY;
                for &i in &clusters[a] {
                    for &j in &clusters[b] {
                        link = link.max(d[i][j]);
                    }
                }
                if best.map_or(true, |(bd, _, _)| link < bd) {
                    best = Some((link, a, b));
                }
            }
        }
        let (_, a, b) = best.unwrap();
        let moved = clusters.remove(b);
        clusters[a].extend(moved);
    }
    clusters.sort_by_key(|c| *c.iter().min().unwrap());
    let mut labels = vec![0; n];
    for (id, c) in clusters.iter().enumerate() {
        for &m in c {
            labels[m] = id;
        }
    }
    labels
}

/// Every partition of `0..n` into exactly `k` non-empty blocks
/// (restricted-growth strings).
pub fn partitions(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(
        i: usize,
        n: usize,
        k: usize,
        used: usize,
        cur: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if i == n {
            if used == k {
                out.push(cur.clone());
            }
            return;
        }
        if used + (n - i) < k {
            return;
        }
        for b in 0..=used.min(k - 1) {
            cur.push(b);
            rec(i + 1, n, k, used.max(b + 1), cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, 0, &mut Vec::new(), &mut out);
    out
}

/// Largest within-block dissimilarity.
pub fn diameter_objective(d: &[Vec<f64>], labels: &[usize]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..d.len() {
        for j in i + 1..d.len() {
            if labels[i] == labels[j] {
                worst = worst.max(d[i][j]);
            }
        }
    }
    worst
}

pub fn brute_force_minimax(d: &[Vec<f64>], k: usize) -> f64 {
    partitions(d.len(), k)
        .iter()
        .map(|p| diameter_objective(d, p))
        .fold(f64::INFINITY, f64::min)
}

/// Central differences of `f` at `x`, one coordinate at a time.
pub fn central_diff(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Relative error with a unit floor on the scale, so coordinates whose true
/// derivative is ~0 are judged absolutely.
pub fn grad_rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1.0)
}

/// Squared Euclidean distance, written out independently of the library.
pub fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// `(L0, Ld)` written straight from their definitions, on row-major features
/// (`n x p`) with `(class, sub-class)` tags.
pub fn reference_dmem(
    features: &[f64],
    p: usize,
    tags: &[(u16, usize)],
    delta: f64,
    hinge: bool,
) -> (f64, f64) {
    let n = tags.len();
    let row = |i: usize| &features[i * p..(i + 1) * p];
    let mut l0 = 0.0;
    for o in 0..n {
        for i in 0..n {
            if tags[o] == tags[i] {
                l0 += sq(row(o), row(i));
            }
        }
    }
    let mut groups: Vec<(u16, usize)> = tags.to_vec();
    groups.sort_unstable();
    groups.dedup();
    let mut ld = 0.0;
    for &g in &groups {
        for &h in &groups {
            if g.0 == h.0 {
                continue;
            }
            let mut dh = f64::NEG_INFINITY;
            for a in (0..n).filter(|&a| tags[a] == g) {
                let mut m = f64::INFINITY;
                for b in (0..n).filter(|&b| tags[b] == h) {
                    m = m.min(sq(row(a), row(b)));
                }
                dh = dh.max(m);
            }
            let t = delta - dh;
            ld += if hinge { t.max(0.0) } else { t };
        }
    }
    (l0, ld)
}

/// Smallest gap between each Hausdorff max-min and its runner-up, over all
/// cross-class sub-class pairs, also counting the distance to the hinge
/// boundary. Finite differences are only meaningful when this is well above
/// the probe step.
pub fn hausdorff_tie_margin(features: &[f64], p: usize, tags: &[(u16, usize)], delta: f64) -> f64 {
    let n = tags.len();
    let row = |i: usize| &features[i * p..(i + 1) * p];
    let mut groups: Vec<(u16, usize)> = tags.to_vec();
    groups.sort_unstable();
    groups.dedup();
    let mut margin = f64::INFINITY;
    for &g in &groups {
        for &h in &groups {
            if g.0 == h.0 {
                continue;
            }
            let mut mins = Vec::new();
            for a in (0..n).filter(|&a| tags[a] == g) {
                let mut ds: Vec<f64> = (0..n)
                    .filter(|&b| tags[b] == h)
                    .map(|b| sq(row(a), row(b)))
                    .collect();
                ds.sort_by(f64::total_cmp);
                if ds.len() > 1 {
                    margin = margin.min(ds[1] - ds[0]);
                }
                mins.push(ds[0]);
            }
            mins.sort_by(f64::total_cmp);
            if mins.len() > 1 {
                margin = margin.min(mins[mins.len() - 1] - mins[mins.len() - 2]);
            }
            margin = margin.min((delta - mins[mins.len() - 1]).abs());
        }
    }
    margin
}

/// Parameters flattened in declaration order.
pub fn flatten(params: &dmem_core::ModelParams) -> Vec<f64> {
    params
        .tensors()
        .iter()
        .flat_map(|t| t.iter().copied())
        .collect()
}

pub fn unflatten(template: &dmem_core::ModelParams, flat: &[f64]) -> dmem_core::ModelParams {
    let mut out = template.clone();
    let mut at = 0;
    for t in out.tensors_mut() {
        t.copy_from_slice(&flat[at..at + t.len()]);
        at += t.len();
    }
    out
}

/// Value of `ce_mean + lambda * (L0 + beta * Ld)` evaluated through the
/// forward pass only.
pub fn composed_value(
    params: &dmem_core::ModelParams,
    inputs: ndarray::ArrayView2<f64>,
    labels: &[u16],
    tags: &[(u16, usize)],
    lambda: f64,
    loss: &dmem_core::LossParams,
) -> f64 {
    let trace = dmem_core::model::forward(params, inputs).unwrap();
    let n = labels.len() as f64;
    let mut ce = 0.0;
    for (row, &label) in trace.logits.rows().into_iter().zip(labels) {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        ce += lse - row[label as usize - 1];
    }
    let p = trace.features.ncols();
    let feats: Vec<f64> = trace.features.iter().copied().collect();
    let (l0, ld) = reference_dmem(&feats, p, tags, loss.delta, loss.hinge);
    ce / n + lambda * (l0 + loss.beta * ld)
}

/// True when a forward pass keeps every hidden pre-activation away from the
/// ReLU kink and the feature-space Hausdorff structure away from ties.
pub fn smooth_point(
    params: &dmem_core::ModelParams,
    inputs: ndarray::ArrayView2<f64>,
    tags: &[(u16, usize)],
    delta: f64,
) -> bool {
    let trace = dmem_core::model::forward(params, inputs).unwrap();
    let kink_free = trace.pre.iter().all(|z| z.iter().all(|v| v.abs() >= 1e-6));
    let feats: Vec<f64> = trace.features.iter().copied().collect();
    kink_free && hausdorff_tie_margin(&feats, trace.features.ncols(), tags, delta) > 1e-4
}
