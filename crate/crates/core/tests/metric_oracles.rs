use hydra_core::metrics::{chi, dbi, evaluate, project_2d, silhouette};
use hydra_core::rng::stream;
use rand::Rng;

fn d(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn members(labels: &[usize], c: usize) -> Vec<usize> {
    (0..labels.len()).filter(|&i| labels[i] == c).collect()
}

fn clusters(labels: &[usize]) -> Vec<usize> {
    let mut c = labels.to_vec();
    c.sort_unstable();
    c.dedup();
    c
}

fn centroid(x: &[Vec<f64>], idx: &[usize]) -> Vec<f64> {
    let mut c = vec![0.0; x[0].len()];
    for &i in idx {
        for (a, b) in c.iter_mut().zip(&x[i]) {
            *a += b;
        }
    }
    c.iter().map(|v| v / idx.len() as f64).collect()
}

fn oracle_silhouette(x: &[Vec<f64>], l: &[usize]) -> f64 {
    let n = x.len();
    let mut total = 0.0;
    for i in 0..n {
        let own = members(l, l[i]);
        if own.len() == 1 {
            continue;
        }
        let a = own.iter().filter(|&&j| j != i).map(|&j| d(&x[i], &x[j])).sum::<f64>() / (own.len() - 1) as f64;
        let b = clusters(l)
            .into_iter()
            .filter(|&c| c != l[i])
            .map(|c| {
                let m = members(l, c);
                m.iter().map(|&j| d(&x[i], &x[j])).sum::<f64>() / m.len() as f64
            })
            .fold(f64::INFINITY, f64::min);
        let den = a.max(b);
        if den > 0.0 {
            total += (b - a) / den;
        }
    }
    total / n as f64
}

fn oracle_chi(x: &[Vec<f64>], l: &[usize]) -> f64 {
    let n = x.len();
    let all: Vec<usize> = (0..n).collect();
    let g = centroid(x, &all);
    let cs = clusters(l);
    let k = cs.len();
    let (mut between, mut within) = (0.0, 0.0);
    for c in cs {
        let m = members(l, c);
        let cc = centroid(x, &m);
        between += m.len() as f64 * d(&cc, &g).powi(2);
        within += m.iter().map(|&i| d(&x[i], &cc).powi(2)).sum::<f64>();
    }
    (between / (k - 1) as f64) / (within / (n - k) as f64)
}

fn oracle_dbi(x: &[Vec<f64>], l: &[usize]) -> f64 {
    let cs = clusters(l);
    let cents: Vec<Vec<f64>> = cs.iter().map(|&c| centroid(x, &members(l, c))).collect();
    let sig: Vec<f64> = cs
        .iter()
        .zip(&cents)
        .map(|(&c, cc)| {
            let m = members(l, c);
            m.iter().map(|&i| d(&x[i], cc)).sum::<f64>() / m.len() as f64
        })
        .collect();
    let k = cs.len();
    (0..k)
        .map(|i| {
            (0..k)
                .filter(|&j| j != i)
                .map(|j| (sig[i] + sig[j]) / d(&cents[i], &cents[j]))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum::<f64>()
        / k as f64
}

/// n in k+1..=12, k in {2,3}, d in 1..=4, every cluster non-empty.
fn instance(seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = stream(seed, 99);
    let k = rng.gen_range(2..=3);
    let n = rng.gen_range(k + 1..=12);
    let dim = rng.gen_range(1..=4);
    let x = (0..n).map(|_| (0..dim).map(|_| rng.gen_range(-5.0..5.0)).collect()).collect();
    let mut l: Vec<usize> = (0..n).map(|i| if i < k { i } else { rng.gen_range(0..k) }).collect();
    for i in (1..n).rev() {
        l.swap(i, rng.gen_range(0..=i));
    }
    (x, l)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

#[test]
fn metrics_match_definitional_oracles_on_random_instances() {
    for seed in 0..50 {
        let (x, l) = instance(seed);
        let (s, c, b) = (silhouette(&x, &l).unwrap(), chi(&x, &l).unwrap(), dbi(&x, &l).unwrap());
        assert!(close(s, oracle_silhouette(&x, &l)), "seed {seed}: silhouette {s}");
        assert!(close(c, oracle_chi(&x, &l)), "seed {seed}: chi {c}");
        assert!(close(b, oracle_dbi(&x, &l)), "seed {seed}: dbi {b}");
        assert!((-1.0..=1.0).contains(&s) && c >= 0.0 && b >= 0.0);
    }
}

#[test]
fn metrics_are_invariant_to_relabeling_translation_and_scale() {
    for seed in 0..50 {
        let (x, l) = instance(seed);
        let base = evaluate(&x, &l).unwrap();
        let mut rng = stream(seed, 98);
        let relabeled: Vec<usize> = l.iter().map(|&c| 7 - c).collect();
        let shift: Vec<f64> = (0..x[0].len()).map(|_| rng.gen_range(-100.0..100.0)).collect();
        let moved: Vec<Vec<f64>> = x.iter().map(|p| p.iter().zip(&shift).map(|(a, b)| a + b).collect()).collect();
        let c = rng.gen_range(0.1..10.0);
        let scaled: Vec<Vec<f64>> = x.iter().map(|p| p.iter().map(|a| a * c).collect()).collect();
        for (what, e) in [
            ("relabel", evaluate(&x, &relabeled).unwrap()),
            ("translate", evaluate(&moved, &l).unwrap()),
            ("scale", evaluate(&scaled, &l).unwrap()),
        ] {
            assert!(close(e.silhouette, base.silhouette), "seed {seed} {what}: silhouette");
            assert!(close(e.chi, base.chi), "seed {seed} {what}: chi");
            assert!(close(e.dbi, base.dbi), "seed {seed} {what}: dbi");
        }
    }
}

fn random_frame(rng: &mut impl Rng, dim: usize) -> [Vec<f64>; 2] {
    let mut u: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    u.iter_mut().for_each(|a| *a /= nu);
    let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let p: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
    v.iter_mut().zip(&u).for_each(|(b, a)| *b -= p * a);
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    v.iter_mut().for_each(|a| *a /= nv);
    [u, v]
}

#[test]
fn pca_reconstruction_beats_random_rank_two_projections() {
    let mut rng = stream(5, 97);
    let x: Vec<Vec<f64>> = (0..10).map(|_| (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let mean: Vec<f64> = (0..16).map(|j| x.iter().map(|p| p[j]).sum::<f64>() / 10.0).collect();
    let centered: Vec<Vec<f64>> = x.iter().map(|p| p.iter().zip(&mean).map(|(a, b)| a - b).collect()).collect();
    let total: f64 = centered.iter().flatten().map(|a| a * a).sum();
    let proj = project_2d(&x).unwrap();
    assert!(!proj.degenerate);
    // Orthonormal scores: residual = total energy minus captured energy.
    let pca_err = total - proj.coords.iter().map(|c| c[0] * c[0] + c[1] * c[1]).sum::<f64>();
    assert!(pca_err >= -1e-9);
    for _ in 0..2000 {
        let [u, v] = random_frame(&mut rng, 16);
        let captured: f64 = centered
            .iter()
            .map(|p| {
                let a: f64 = p.iter().zip(&u).map(|(x, y)| x * y).sum();
                let b: f64 = p.iter().zip(&v).map(|(x, y)| x * y).sum();
                a * a + b * b
            })
            .sum();
        assert!(pca_err <= total - captured + 1e-9);
    }
}

#[test]
fn pca_of_centered_plane_preserves_distances() {
    let mut rng = stream(6, 96);
    let mut x: Vec<Vec<f64>> = (0..12).map(|_| vec![rng.gen_range(-3.0..3.0), rng.gen_range(-1.0..1.0)]).collect();
    let m = [x.iter().map(|p| p[0]).sum::<f64>() / 12.0, x.iter().map(|p| p[1]).sum::<f64>() / 12.0];
    x.iter_mut().for_each(|p| {
        p[0] -= m[0];
        p[1] -= m[1];
    });
    let proj = project_2d(&x).unwrap();
    for i in 0..12 {
        for j in 0..12 {
            assert!((d(&x[i], &x[j]) - d(&proj.coords[i], &proj.coords[j])).abs() < 1e-9);
        }
    }
    let again = project_2d(&x).unwrap();
    assert_eq!(proj, again);
}
